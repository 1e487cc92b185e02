/// Lowercases and splits on runs of non-alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(tokenize("Beta-blockers reduce HR."), vec!["beta", "blockers", "reduce", "hr"]);
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("A a A"), vec!["a", "a", "a"]);
        assert_eq!(tokenize("  --  "), Vec::<String>::new());
        assert_eq!(tokenize("Na+/K+ ATPase"), vec!["na", "k", "atpase"]);
    }
}
