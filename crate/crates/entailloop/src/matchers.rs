//! Term matchers: token-level alignment between a text sentence and a
//! hypothesis sentence.
//!
//! A term matcher decides whether two tokens should be treated as equivalent
//! and reports a confidence in (0, 1]. Five matchers are provided: exact
//! string match, multi-word overlap, multi-word head match, suffix-rewrite
//! morphology match, and normalized date match. [`TermMatchers::match_all`]
//! runs all of them over a token grid and keeps the best match per cell.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;

use crate::error::{Error, Result};

/// One token of a sentence.
///
/// Consecutive capitalized words are folded into a single multi-word token
/// (`"New York"`), whose constituent words are kept in `parts`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    /// Lowercased `surface`.
    pub norm: String,
    /// Index in the final token sequence of the sentence.
    pub position: usize,
    pub is_multiword: bool,
    /// Constituent words; non-empty iff `is_multiword`.
    pub parts: Vec<String>,
}

impl Token {
    /// Single-word token.
    pub fn word(surface: impl Into<String>, position: usize) -> Self {
        let surface = surface.into();
        Token {
            norm: surface.to_lowercase(),
            surface,
            position,
            is_multiword: false,
            parts: Vec::new(),
        }
    }

    /// Multi-word token; `surface` is the parts joined by single spaces.
    pub fn multiword(parts: Vec<String>, position: usize) -> Self {
        let surface = parts.join(" ");
        Token {
            norm: surface.to_lowercase(),
            surface,
            position,
            is_multiword: true,
            parts,
        }
    }

    /// Lowercased constituent parts, a single-word token being its own part.
    fn norm_parts(&self) -> Vec<String> {
        if self.is_multiword {
            self.parts.iter().map(|p| p.to_lowercase()).collect()
        } else {
            vec![self.norm.clone()]
        }
    }

    /// Rightmost constituent, lowercased. The head of a single-word token is
    /// the token itself.
    fn head(&self) -> String {
        if self.is_multiword {
            self.parts.last().expect("multiword token has parts").to_lowercase()
        } else {
            self.norm.clone()
        }
    }

    /// True when the token contains a letter and every letter is uppercase.
    pub fn is_fully_uppercase(&self) -> bool {
        let mut saw_letter = false;
        for c in self.surface.chars() {
            if c.is_alphabetic() {
                saw_letter = true;
                if !c.is_uppercase() {
                    return false;
                }
            }
        }
        saw_letter
    }
}

/// Which matcher produced a [`TermMatch`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MatcherKind {
    Exact,
    MultiWord,
    Head,
    Morphology,
    DateTime,
}

impl MatcherKind {
    /// Tie-break priority when two matchers fire on the same cell with equal
    /// confidence: Exact > DateTime > Morphology > Head > MultiWord.
    fn priority(self) -> u8 {
        match self {
            MatcherKind::Exact => 4,
            MatcherKind::DateTime => 3,
            MatcherKind::Morphology => 2,
            MatcherKind::Head => 1,
            MatcherKind::MultiWord => 0,
        }
    }
}

impl fmt::Display for MatcherKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            MatcherKind::Exact => "exact",
            MatcherKind::MultiWord => "multiword",
            MatcherKind::Head => "head",
            MatcherKind::Morphology => "morphology",
            MatcherKind::DateTime => "datetime",
        };
        f.write_str(name)
    }
}

/// A single token alignment between text and hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub struct TermMatch {
    pub text_pos: usize,
    pub hyp_pos: usize,
    pub matcher: MatcherKind,
    /// In (0, 1].
    pub confidence: f64,
}

/// Matcher confidences that are not pinned to 1.0 by construction.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct MatcherConfig {
    pub head_confidence: f64,
    pub morphology_confidence: f64,
}

impl Default for MatcherConfig {
    fn default() -> Self {
        MatcherConfig {
            head_confidence: 0.9,
            morphology_confidence: 0.8,
        }
    }
}

/// Splits a sentence into [`Token`]s.
///
/// Rules: split on whitespace; punctuation characters become their own tokens
/// unless flanked by digits on both sides (keeping `03/04/2010`, `2010-03-04`
/// and `7.5` whole); a run of two or more consecutive capitalized words is
/// folded into one multi-word token.
pub fn tokenize(sentence: &str) -> Vec<Token> {
    let mut words: Vec<String> = Vec::new();
    for chunk in sentence.split_whitespace() {
        let chars: Vec<char> = chunk.chars().collect();
        let mut current = String::new();
        for (i, &c) in chars.iter().enumerate() {
            if c.is_alphanumeric() {
                current.push(c);
            } else {
                let digit_flanked = i > 0
                    && i + 1 < chars.len()
                    && chars[i - 1].is_ascii_digit()
                    && chars[i + 1].is_ascii_digit();
                if digit_flanked {
                    current.push(c);
                } else {
                    if !current.is_empty() {
                        words.push(std::mem::take(&mut current));
                    }
                    words.push(c.to_string());
                }
            }
        }
        if !current.is_empty() {
            words.push(current);
        }
    }

    // Fold runs of capitalized words into multi-word tokens.
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < words.len() {
        if is_capitalized_word(&words[i]) {
            let mut j = i + 1;
            while j < words.len() && is_capitalized_word(&words[j]) {
                j += 1;
            }
            if j - i >= 2 {
                let parts = words[i..j].to_vec();
                tokens.push(Token::multiword(parts, tokens.len()));
                i = j;
                continue;
            }
        }
        tokens.push(Token::word(words[i].clone(), tokens.len()));
        i += 1;
    }
    tokens
}

fn is_capitalized_word(word: &str) -> bool {
    let mut chars = word.chars();
    match chars.next() {
        Some(c) if c.is_alphabetic() && c.is_uppercase() => {
            word.chars().all(|c| c.is_alphanumeric())
        }
        _ => false,
    }
}

/// Suffix-rewrite stemmer backing the morphology matcher.
///
/// Each rule maps a suffix to a replacement; a word's stem candidates are the
/// word itself plus every rewrite with a resulting stem of at least three
/// characters. Rewrites of `-ing`/`-ed` that end in a doubled consonant also
/// contribute the undoubled form (`running -> runn -> run`). Two words match
/// when their candidate sets intersect.
#[derive(Debug, Clone)]
pub struct Stemmer {
    rules: Vec<(String, String)>,
}

const MIN_STEM_LEN: usize = 3;
const DEFAULT_RULES: &str = include_str!("data/stemmer_rules.tsv");

impl Default for Stemmer {
    fn default() -> Self {
        Stemmer::parse(DEFAULT_RULES).expect("embedded stemmer rules are valid")
    }
}

impl Stemmer {
    /// Loads rules from a file with one `suffix<TAB>replacement` per line.
    pub fn from_file(path: &Path) -> Result<Self> {
        let content = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        Stemmer::parse(&content)
    }

    fn parse(content: &str) -> Result<Self> {
        let mut rules = Vec::new();
        for (idx, line) in content.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let (suffix, replacement) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(idx + 1, "stemmer rule missing tab separator"))?;
            if suffix.is_empty() {
                return Err(Error::parse(idx + 1, "stemmer rule has empty suffix"));
            }
            rules.push((suffix.to_string(), replacement.to_string()));
        }
        Ok(Stemmer { rules })
    }

    /// All stem candidates for a lowercased word, including the word itself.
    pub fn candidates(&self, word: &str) -> BTreeSet<String> {
        let mut set = BTreeSet::new();
        set.insert(word.to_string());
        for (suffix, replacement) in &self.rules {
            if let Some(stripped) = word.strip_suffix(suffix.as_str()) {
                let candidate = format!("{stripped}{replacement}");
                if candidate.len() >= MIN_STEM_LEN {
                    if (suffix == "ing" || suffix == "ed") && replacement.is_empty() {
                        if let Some(undoubled) = undouble(&candidate) {
                            if undoubled.len() >= MIN_STEM_LEN {
                                set.insert(undoubled);
                            }
                        }
                    }
                    set.insert(candidate);
                }
            }
        }
        set
    }

    /// True when the two lowercased words share a stem candidate.
    pub fn stems_equal(&self, a: &str, b: &str) -> bool {
        let ca = self.candidates(a);
        let cb = self.candidates(b);
        ca.intersection(&cb).next().is_some()
    }
}

/// Drops the last character of a word ending in a doubled consonant.
fn undouble(word: &str) -> Option<String> {
    let chars: Vec<char> = word.chars().collect();
    let n = chars.len();
    if n >= 2 && chars[n - 1] == chars[n - 2] && is_consonant(chars[n - 1]) {
        Some(chars[..n - 1].iter().collect())
    } else {
        None
    }
}

fn is_consonant(c: char) -> bool {
    c.is_ascii_alphabetic() && !matches!(c.to_ascii_lowercase(), 'a' | 'e' | 'i' | 'o' | 'u')
}

/// A normalized calendar date.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct NormalizedDate {
    year: u32,
    month: u32,
    day: u32,
}

static DATE_SLASH: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(\d{1,2})/(\d{1,2})/(\d{4})$").unwrap());
static DATE_ISO: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(\d{4})-(\d{1,2})-(\d{1,2})$").unwrap());
static DATE_MONTH_NAME: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^([A-Za-z]+)\s+(\d{1,2}),\s*(\d{4})$").unwrap());

const MONTHS: [&str; 12] = [
    "january", "february", "march", "april", "may", "june", "july", "august", "september",
    "october", "november", "december",
];

/// Parses `MM/DD/YYYY`, `YYYY-MM-DD`, or `<MonthName> D, YYYY`. Ambiguous
/// slash dates are read month-first.
fn parse_date(surface: &str) -> Option<NormalizedDate> {
    let s = surface.trim();
    let (year, month, day) = if let Some(c) = DATE_SLASH.captures(s) {
        (c[3].parse().ok()?, c[1].parse().ok()?, c[2].parse().ok()?)
    } else if let Some(c) = DATE_ISO.captures(s) {
        (c[1].parse().ok()?, c[2].parse().ok()?, c[3].parse().ok()?)
    } else {
        let c = DATE_MONTH_NAME.captures(s)?;
        let name = c[1].to_lowercase();
        let month = MONTHS.iter().position(|m| *m == name)? as u32 + 1;
        (c[3].parse().ok()?, month, c[2].parse().ok()?)
    };
    if !(1..=12).contains(&month) || day < 1 || day > days_in_month(year, month) {
        return None;
    }
    Some(NormalizedDate { year, month, day })
}

fn days_in_month(year: u32, month: u32) -> u32 {
    match month {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 => {
            if year.is_multiple_of(4) && (!year.is_multiple_of(100) || year.is_multiple_of(400)) {
                29
            } else {
                28
            }
        }
        _ => 0,
    }
}

/// The full matcher battery with its configuration.
#[derive(Debug, Clone, Default)]
pub struct TermMatchers {
    pub config: MatcherConfig,
    pub stemmer: Stemmer,
}

impl TermMatchers {
    pub fn new(config: MatcherConfig) -> Self {
        TermMatchers {
            config,
            stemmer: Stemmer::default(),
        }
    }

    /// Case-insensitive full-string match, confidence 1.0.
    pub fn exact_match(&self, a: &Token, b: &Token) -> Option<TermMatch> {
        (a.norm == b.norm).then_some(TermMatch {
            text_pos: a.position,
            hyp_pos: b.position,
            matcher: MatcherKind::Exact,
            confidence: 1.0,
        })
    }

    /// Shared constituents between tokens where at least one is multi-word;
    /// confidence is the shared count over the larger part count.
    pub fn multiword_overlap(&self, a: &Token, b: &Token) -> Option<TermMatch> {
        if !a.is_multiword && !b.is_multiword {
            return None;
        }
        let pa: BTreeSet<String> = a.norm_parts().into_iter().collect();
        let pb: BTreeSet<String> = b.norm_parts().into_iter().collect();
        let shared = pa.intersection(&pb).count();
        if shared == 0 {
            return None;
        }
        let confidence = shared as f64 / pa.len().max(pb.len()) as f64;
        Some(TermMatch {
            text_pos: a.position,
            hyp_pos: b.position,
            matcher: MatcherKind::MultiWord,
            confidence,
        })
    }

    /// Head (rightmost constituent) equality where at least one token is
    /// multi-word.
    pub fn head_match(&self, a: &Token, b: &Token) -> Option<TermMatch> {
        if !a.is_multiword && !b.is_multiword {
            return None;
        }
        (a.head() == b.head()).then_some(TermMatch {
            text_pos: a.position,
            hyp_pos: b.position,
            matcher: MatcherKind::Head,
            confidence: self.config.head_confidence,
        })
    }

    /// Shared stem under the suffix-rewrite stemmer, for unequal tokens.
    pub fn morphology_match(&self, a: &Token, b: &Token) -> Option<TermMatch> {
        if a.norm == b.norm {
            return None;
        }
        self.stemmer.stems_equal(&a.norm, &b.norm).then_some(TermMatch {
            text_pos: a.position,
            hyp_pos: b.position,
            matcher: MatcherKind::Morphology,
            confidence: self.config.morphology_confidence,
        })
    }

    /// Both tokens parse as dates and normalize to the same calendar day.
    pub fn datetime_match(&self, a: &Token, b: &Token) -> Option<TermMatch> {
        let da = parse_date(&a.surface)?;
        let db = parse_date(&b.surface)?;
        (da == db).then_some(TermMatch {
            text_pos: a.position,
            hyp_pos: b.position,
            matcher: MatcherKind::DateTime,
            confidence: 1.0,
        })
    }

    /// Runs every matcher on every (text, hypothesis) token pair, keeping the
    /// highest-confidence match per cell (ties broken by matcher priority).
    /// The result is sorted by (hyp_pos, text_pos).
    pub fn match_all(&self, text_tokens: &[Token], hyp_tokens: &[Token]) -> Vec<TermMatch> {
        let mut matches = Vec::new();
        for h in hyp_tokens {
            for t in text_tokens {
                let candidates = [
                    self.exact_match(t, h),
                    self.multiword_overlap(t, h),
                    self.head_match(t, h),
                    self.morphology_match(t, h),
                    self.datetime_match(t, h),
                ];
                let best = candidates.into_iter().flatten().max_by(|x, y| {
                    x.confidence
                        .partial_cmp(&y.confidence)
                        .expect("match confidences are finite")
                        .then(x.matcher.priority().cmp(&y.matcher.priority()))
                });
                if let Some(m) = best {
                    matches.push(m);
                }
            }
        }
        matches.sort_by_key(|m| (m.hyp_pos, m.text_pos));
        matches
    }
}
