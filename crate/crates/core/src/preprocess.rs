//! Domain-knowledge substitution, whitespace tokenization, and the split-token
//! heuristic of the token layer.
//!
//! Rules are compiled once at configuration load; a bad pattern is reported
//! there and can never fail a parse.

use std::borrow::Cow;
use std::fmt;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Characters treated as special when choosing a split token.
pub const DEFAULT_SPECIAL_CHARS: &str = "#^$'*+,/<=>@_`)|~";

/// One user-declared `pattern -> replacement` rule, uncompiled.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreprocessRule {
    pub pattern: String,
    pub replacement: String,
}

impl PreprocessRule {
    pub fn new(pattern: impl Into<String>, replacement: impl Into<String>) -> Self {
        Self {
            pattern: pattern.into(),
            replacement: replacement.into(),
        }
    }
}

#[derive(Clone, Debug)]
struct CompiledRule {
    regex: Regex,
    replacement: String,
}

/// An ordered, compiled list of preprocess rules.
#[derive(Clone, Debug, Default)]
pub struct RuleSet {
    rules: Vec<CompiledRule>,
}

impl RuleSet {
    pub fn compile(rules: &[PreprocessRule]) -> Result<Self> {
        let rules = rules
            .iter()
            .map(|rule| {
                if rule.replacement.chars().any(char::is_whitespace) {
                    return Err(Error::ReplacementWhitespace(rule.replacement.clone()));
                }
                let regex = Regex::new(&rule.pattern).map_err(|source| Error::InvalidPattern {
                    pattern: rule.pattern.clone(),
                    source,
                })?;
                Ok(CompiledRule {
                    regex,
                    replacement: rule.replacement.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { rules })
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    /// Applies every rule in declaration order; each rule sees the previous
    /// rule's output. Returns the input unchanged (borrowed) when nothing matches.
    ///
    /// Replacements are taken literally (`$` has no group meaning).
    pub fn apply<'a>(&self, content: &'a str) -> Cow<'a, str> {
        let mut current = Cow::Borrowed(content);
        for rule in &self.rules {
            if let Cow::Owned(s) = rule
                .regex
                .replace_all(&current, regex::NoExpand(&rule.replacement))
            {
                current = Cow::Owned(s);
            }
        }
        current
    }
}

/// Compiles `rules` and applies them to `content`.
pub fn apply_preprocess(rules: &[PreprocessRule], content: &str) -> Result<String> {
    Ok(RuleSet::compile(rules)?.apply(content).into_owned())
}

/// Splits on maximal whitespace runs. Never yields empty tokens.
pub fn tokenize(content: &str) -> Vec<&str> {
    content.split_whitespace().collect()
}

/// True iff the token contains an ASCII digit.
pub fn has_digit(token: &str) -> bool {
    token.bytes().any(|b| b.is_ascii_digit())
}

/// A set of special characters. ASCII members are looked up in a bitmap.
#[derive(Clone, PartialEq, Eq)]
pub struct SpecialCharSet {
    ascii: [bool; 128],
    other: Vec<char>,
}

impl SpecialCharSet {
    pub fn new(chars: &str) -> Self {
        let mut ascii = [false; 128];
        let mut other = Vec::new();
        for c in chars.chars() {
            if c.is_ascii() {
                ascii[c as usize] = true;
            } else if !other.contains(&c) {
                other.push(c);
            }
        }
        Self { ascii, other }
    }

    pub fn contains(&self, c: char) -> bool {
        if c.is_ascii() {
            self.ascii[c as usize]
        } else {
            self.other.contains(&c)
        }
    }

    /// The members as a string, ASCII first in code-point order.
    pub fn chars(&self) -> String {
        let mut out: String = (0u8..128)
            .filter(|&b| self.ascii[b as usize])
            .map(char::from)
            .collect();
        out.extend(self.other.iter());
        out
    }
}

impl Default for SpecialCharSet {
    fn default() -> Self {
        Self::new(DEFAULT_SPECIAL_CHARS)
    }
}

impl fmt::Debug for SpecialCharSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("SpecialCharSet")
            .field(&self.chars())
            .finish()
    }
}

/// True iff any character of `token` is in `set`.
pub fn has_special(token: &str, set: &SpecialCharSet) -> bool {
    token.chars().any(|c| set.contains(c))
}

/// Routing key chosen by the token layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SplitKey<'a> {
    First(&'a str),
    Last(&'a str),
    None,
}

impl SplitKey<'_> {
    pub fn to_owned_key(&self) -> OwnedSplitKey {
        match *self {
            SplitKey::First(t) => OwnedSplitKey::First(t.to_owned()),
            SplitKey::Last(t) => OwnedSplitKey::Last(t.to_owned()),
            SplitKey::None => OwnedSplitKey::None,
        }
    }
}

impl fmt::Display for SplitKey<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SplitKey::First(t) => write!(f, "First:{t}"),
            SplitKey::Last(t) => write!(f, "Last:{t}"),
            SplitKey::None => f.write_str("*"),
        }
    }
}

/// Owned form of [`SplitKey`], used where keys outlive the message.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OwnedSplitKey {
    First(String),
    Last(String),
    None,
}

impl OwnedSplitKey {
    pub fn as_key(&self) -> SplitKey<'_> {
        match self {
            OwnedSplitKey::First(t) => SplitKey::First(t),
            OwnedSplitKey::Last(t) => SplitKey::Last(t),
            OwnedSplitKey::None => SplitKey::None,
        }
    }

    /// Inverse of the `Display` rendering (`First:tok`, `Last:tok`, `*`).
    pub fn parse(s: &str) -> Option<Self> {
        if s == "*" {
            Some(OwnedSplitKey::None)
        } else if let Some(t) = s.strip_prefix("First:") {
            Some(OwnedSplitKey::First(t.to_owned()))
        } else {
            s.strip_prefix("Last:")
                .map(|t| OwnedSplitKey::Last(t.to_owned()))
        }
    }
}

impl fmt::Display for OwnedSplitKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.as_key().fmt(f)
    }
}

/// Picks the first token, the last token, or no split token.
///
/// Digit-bearing end tokens are assumed variable; when neither end has a
/// digit, a first token carrying a special character defers to the last.
/// `tokens` must be non-empty.
pub fn select_split_token<'a, S: AsRef<str>>(
    tokens: &'a [S],
    set: &SpecialCharSet,
) -> SplitKey<'a> {
    let first = tokens
        .first()
        .expect("split token selection on an empty message")
        .as_ref();
    let last = tokens[tokens.len() - 1].as_ref();

    match (has_digit(first), has_digit(last)) {
        (true, true) => SplitKey::None,
        (true, false) => SplitKey::Last(last),
        (false, true) => SplitKey::First(first),
        (false, false) => {
            if has_special(first, set) {
                if has_special(last, set) {
                    SplitKey::None
                } else {
                    SplitKey::Last(last)
                }
            } else {
                SplitKey::First(first)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_rule() {
        let rules = [PreprocessRule::new("blk_[0-9]+", "blkID")];
        assert_eq!(
            apply_preprocess(&rules, "Receiving block blk_3587 src").unwrap(),
            "Receiving block blkID src"
        );
    }

    #[test]
    fn core_rule() {
        let rules = [PreprocessRule::new(r"core\.[0-9]+", "coreID")];
        assert_eq!(
            apply_preprocess(&rules, "error on core.1023 detected").unwrap(),
            "error on coreID detected"
        );
    }

    #[test]
    fn no_rules_is_identity() {
        assert_eq!(
            apply_preprocess(&[], "Send file file_01").unwrap(),
            "Send file file_01"
        );
    }

    #[test]
    fn rules_chain_in_order() {
        let rules = [
            PreprocessRule::new("a", "b"),
            PreprocessRule::new("bb", "c"),
        ];
        assert_eq!(apply_preprocess(&rules, "ab xa").unwrap(), "c xb");
    }

    #[test]
    fn replacement_is_literal() {
        let rules = [PreprocessRule::new("(x)", "$1$")];
        assert_eq!(apply_preprocess(&rules, "x").unwrap(), "$1$");
    }

    #[test]
    fn bad_pattern_is_config_error() {
        let err = RuleSet::compile(&[PreprocessRule::new("blk_[0-9", "x")]).unwrap_err();
        assert!(matches!(err, Error::InvalidPattern { .. }));
        let err = RuleSet::compile(&[PreprocessRule::new("a", "b c")]).unwrap_err();
        assert!(matches!(err, Error::ReplacementWhitespace(_)));
    }

    #[test]
    fn whitespace_spanning_rule_then_retokenize() {
        let rules = [PreprocessRule::new("of size", "sizeof")];
        let out = apply_preprocess(&rules, "block of size 12").unwrap();
        assert_eq!(tokenize(&out), ["block", "sizeof", "12"]);
    }

    #[test]
    fn tokenize_cases() {
        assert_eq!(tokenize("Send file file_01"), ["Send", "file", "file_01"]);
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("  a   b "), ["a", "b"]);
        assert_eq!(tokenize("a\tb\r\n"), ["a", "b"]);
    }

    #[test]
    fn digit_and_special() {
        assert!(has_digit("file_01"));
        assert!(!has_digit("Send"));
        assert!(!has_digit("blkID"));
        // non-ASCII digits do not count
        assert!(!has_digit("٣"));

        let set = SpecialCharSet::default();
        assert!(has_special("<info>", &set));
        assert!(!has_special("opened", &set));
        assert!(!has_special("a.b", &set));
    }

    #[test]
    fn default_set_members() {
        let set = SpecialCharSet::default();
        for c in DEFAULT_SPECIAL_CHARS.chars() {
            assert!(set.contains(c), "{c}");
        }
        for c in ".:;-()[]{}\"!?%&\\ ".chars().filter(|c| *c != ')') {
            assert!(!set.contains(c), "{c:?}");
        }
        assert_eq!(set.chars().len(), DEFAULT_SPECIAL_CHARS.len());
    }

    #[test]
    fn custom_set_replaces_default() {
        let set = SpecialCharSet::new(".é");
        assert!(has_special("a.b", &set));
        assert!(has_special("café", &set));
        assert!(!has_special("<info>", &set));
    }

    #[test]
    fn split_token_examples() {
        let set = SpecialCharSet::default();
        assert_eq!(
            select_split_token(&["Send", "file", "file_01"], &set),
            SplitKey::First("Send")
        );
        assert_eq!(
            select_split_token(&["10", "bytes", "are", "sent"], &set),
            SplitKey::Last("sent")
        );
        assert_eq!(
            select_split_token(&["blk_1", "to", "node9"], &set),
            SplitKey::None
        );
        assert_eq!(
            select_split_token(&["<info>", "session", "opened"], &set),
            SplitKey::Last("opened")
        );
        assert_eq!(
            select_split_token(&["<a>", "b", "c|"], &set),
            SplitKey::None
        );
        assert_eq!(select_split_token(&["n7"], &set), SplitKey::None);
        assert_eq!(select_split_token(&["solo"], &set), SplitKey::First("solo"));
    }

    #[test]
    fn split_key_text_round_trip() {
        for key in [
            OwnedSplitKey::First("Send".into()),
            OwnedSplitKey::Last("a:b".into()),
            OwnedSplitKey::None,
        ] {
            assert_eq!(OwnedSplitKey::parse(&key.to_string()), Some(key));
        }
        assert_eq!(OwnedSplitKey::parse("Middle:x"), None);
    }
}
