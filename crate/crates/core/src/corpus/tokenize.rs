/// Splits text into lowercase runs of Unicode letters and digits.
///
/// Everything else (punctuation, hyphens, whitespace) separates tokens, and a
/// boundary between a letter run and a digit run also splits, so `COVID-19`
/// yields `covid`, `19`.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut current_is_digit = false;
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            let is_digit = ch.is_numeric();
            if !current.is_empty() && is_digit != current_is_digit {
                tokens.push(std::mem::take(&mut current));
            }
            current_is_digit = is_digit;
            current.extend(ch.to_lowercase().filter(|c| c.is_alphanumeric()));
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn basic_examples() {
        assert_eq!(tokenize("Antiviral drugs, NOW!"), vec!["antiviral", "drugs", "now"]);
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("COVID-19"), vec!["covid", "19"]);
        assert_eq!(tokenize("mental-health  Überblick"), vec!["mental", "health", "überblick"]);
        assert_eq!(tokenize("abc123def"), vec!["abc", "123", "def"]);
    }

    proptest! {
        #[test]
        fn tokens_are_lowercase_alnum_and_deterministic(s in "\\PC{0,80}") {
            let a = tokenize(&s);
            prop_assert_eq!(&a, &tokenize(&s));
            for t in &a {
                prop_assert!(!t.is_empty());
                prop_assert!(t.chars().all(char::is_alphanumeric));
                prop_assert_eq!(t, &t.to_lowercase());
            }
        }
    }
}
