//! Similarity and threshold arithmetic.
//!
//! Message-to-template similarity only counts template constants; thresholds
//! start from the share of digit-free tokens in a group's first message and
//! rise logarithmically as positions are generalized to wildcards.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::preprocess::has_digit;

/// Rendering of a wildcard position.
pub const WILDCARD: &str = "*";

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum TemplateToken {
    Literal(String),
    Wildcard,
}

impl TemplateToken {
    pub fn is_wildcard(&self) -> bool {
        matches!(self, TemplateToken::Wildcard)
    }

    pub fn as_str(&self) -> &str {
        match self {
            TemplateToken::Literal(s) => s,
            TemplateToken::Wildcard => WILDCARD,
        }
    }
}

impl fmt::Display for TemplateToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

// Serialized as plain strings; a bare "*" is a wildcard. Literals that would
// be ambiguous ("*" itself, or anything starting with a backslash) get one
// leading backslash.
impl Serialize for TemplateToken {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            TemplateToken::Wildcard => serializer.serialize_str(WILDCARD),
            TemplateToken::Literal(s) if s == WILDCARD || s.starts_with('\\') => {
                serializer.serialize_str(&format!("\\{s}"))
            }
            TemplateToken::Literal(s) => serializer.serialize_str(s),
        }
    }
}

impl<'de> Deserialize<'de> for TemplateToken {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Ok(if s == WILDCARD {
            TemplateToken::Wildcard
        } else if let Some(rest) = s.strip_prefix('\\') {
            TemplateToken::Literal(rest.to_owned())
        } else {
            TemplateToken::Literal(s)
        })
    }
}

/// A template: literal tokens and wildcards, one per message position.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LogEvent {
    pub tokens: Vec<TemplateToken>,
}

impl LogEvent {
    /// An all-literal event built from a message.
    pub fn from_message<S: AsRef<str>>(tokens: &[S]) -> Self {
        Self {
            tokens: tokens
                .iter()
                .map(|t| TemplateToken::Literal(t.as_ref().to_owned()))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Count of literal (non-wildcard) positions.
    pub fn literal_count(&self) -> usize {
        self.tokens.iter().filter(|t| !t.is_wildcard()).count()
    }

    pub fn wildcard_count(&self) -> usize {
        self.len() - self.literal_count()
    }

    /// Space-joined text with wildcards shown as `*`.
    pub fn render(&self) -> String {
        render_template(self)
    }
}

impl<S: AsRef<str>> FromIterator<S> for LogEvent {
    /// Builds an event from rendered tokens, reading `*` as a wildcard.
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Self {
            tokens: iter
                .into_iter()
                .map(|t| match t.as_ref() {
                    WILDCARD => TemplateToken::Wildcard,
                    s => TemplateToken::Literal(s.to_owned()),
                })
                .collect(),
        }
    }
}

impl fmt::Display for LogEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.tokens.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            f.write_str(t.as_str())?;
        }
        Ok(())
    }
}

pub fn render_template(event: &LogEvent) -> String {
    event.to_string()
}

/// 1 when the template position is the same literal, 0 otherwise.
pub fn equ(message_token: &str, event_token: &TemplateToken) -> u32 {
    match event_token {
        TemplateToken::Literal(s) if s == message_token => 1,
        _ => 0,
    }
}

/// Matching literal count and literal total, the two halves of `sim_seq`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SimScore {
    pub matches: u32,
    pub literals: u32,
}

impl SimScore {
    pub fn compute<S: AsRef<str>>(message: &[S], event: &LogEvent) -> Self {
        assert_eq!(
            message.len(),
            event.len(),
            "similarity on messages of unequal length"
        );
        let mut matches = 0;
        let mut literals = 0;
        for (m, e) in message.iter().zip(&event.tokens) {
            if let TemplateToken::Literal(s) = e {
                literals += 1;
                if s == m.as_ref() {
                    matches += 1;
                }
            }
        }
        Self { matches, literals }
    }

    /// An all-wildcard template accepts anything.
    pub fn value(self) -> f64 {
        if self.literals == 0 {
            1.0
        } else {
            f64::from(self.matches) / f64::from(self.literals)
        }
    }

    /// Exact rational comparison, so ties are real ties.
    pub fn cmp_value(self, other: SimScore) -> std::cmp::Ordering {
        let (a_num, a_den) = self.fraction();
        let (b_num, b_den) = other.fraction();
        (u64::from(a_num) * u64::from(b_den)).cmp(&(u64::from(b_num) * u64::from(a_den)))
    }

    fn fraction(self) -> (u32, u32) {
        if self.literals == 0 {
            (1, 1)
        } else {
            (self.matches, self.literals)
        }
    }
}

/// Share of template literals that the message reproduces at the same position.
pub fn sim_seq<S: AsRef<str>>(message: &[S], event: &LogEvent) -> f64 {
    SimScore::compute(message, event).value()
}

/// Per-group adaptive threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdState {
    pub st_init: f64,
    /// Total positions generalized to wildcards so far.
    pub eta: u64,
    pub base: u32,
    pub dig_len: u32,
    pub seq_len: u32,
}

impl ThresholdState {
    /// Initial state for a group whose event is `tokens` verbatim.
    ///
    /// `dig_len` and `base` are frozen here for the life of the group. An
    /// empty message has no defined ratio; it gets `st_init = 0.5`, which no
    /// caller ever consults.
    pub fn from_message<S: AsRef<str>>(tokens: &[S]) -> Self {
        let seq_len = tokens.len() as u32;
        let dig_len = tokens.iter().filter(|t| has_digit(t.as_ref())).count() as u32;
        let st_init = if seq_len == 0 {
            0.5
        } else {
            0.5 * f64::from(seq_len - dig_len) / f64::from(seq_len)
        };
        Self {
            st_init,
            eta: 0,
            base: 2.max(dig_len + 1),
            dig_len,
            seq_len,
        }
    }

    pub fn current_st(&self) -> f64 {
        current_st(self.st_init, self.base, self.eta)
    }
}

/// Threshold after `eta` wildcard replacements, capped at 1.
pub fn current_st(st_init: f64, base: u32, eta: u64) -> f64 {
    if eta == 0 {
        return st_init;
    }
    let log = ((eta + 1) as f64).ln() / f64::from(base).ln();
    (st_init + 0.5 * log).min(1.0)
}

/// Longest common subsequence under `==`.
///
/// Among equally long answers the one whose matches sit earliest in `a` wins.
pub fn lcs<T: PartialEq + Clone>(a: &[T], b: &[T]) -> Vec<T> {
    let (n, m) = (a.len(), b.len());
    if n == 0 || m == 0 {
        return Vec::new();
    }
    // suffix[i][j] = |lcs(a[i..], b[j..])|, flattened row-major with width m + 1
    let width = m + 1;
    let mut suffix = vec![0u32; (n + 1) * width];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            suffix[i * width + j] = if a[i] == b[j] {
                suffix[(i + 1) * width + j + 1] + 1
            } else {
                suffix[(i + 1) * width + j].max(suffix[i * width + j + 1])
            };
        }
    }

    let mut out = Vec::with_capacity(suffix[0] as usize);
    let (mut i, mut j) = (0, 0);
    while i < n && j < m {
        if a[i] == b[j] {
            out.push(a[i].clone());
            i += 1;
            j += 1;
        } else if suffix[i * width + j + 1] >= suffix[(i + 1) * width + j] {
            // keep a[i] in play
            j += 1;
        } else {
            i += 1;
        }
    }
    out
}

/// `|lcs| / min(|a|, |b|)` for two non-empty templates.
pub fn tem_sim(new_event: &LogEvent, exist_event: &LogEvent) -> f64 {
    let shorter = new_event.len().min(exist_event.len());
    assert!(shorter > 0, "template similarity on an empty template");
    lcs(&new_event.tokens, &exist_event.tokens).len() as f64 / shorter as f64
}
