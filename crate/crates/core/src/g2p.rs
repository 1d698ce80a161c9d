//! Table-driven grapheme/phone transliteration.
//!
//! Orthographic text is split into table graphemes by leftmost-longest
//! matching. Where the longest grapheme at a position would leave the rest
//! of the word untokenizable (Kunwinjku `r`+`dj` written "rdj" starts with
//! the digraph `rd`), a shorter grapheme is taken instead, so any
//! concatenation of table graphemes always tokenizes.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const KUNWINJKU_TSV: &str = include_str!("../data/kunwinjku.tsv");

#[derive(Debug, Error, PartialEq)]
pub enum G2pError {
    #[error("unknown grapheme {character:?} at position {position}")]
    UnknownGrapheme { position: usize, character: char },
    #[error("unknown phone {0:?}")]
    UnknownPhone(String),
    #[error("invalid table: {0}")]
    InvalidTable(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{0}")]
    Io(String),
}

/// What to do with characters (or phones) the table does not cover.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum UnknownPolicy {
    #[default]
    Error,
    Skip,
    /// Use the character itself as its phone (and vice versa).
    Passthrough,
}

impl std::str::FromStr for UnknownPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "error" => Ok(UnknownPolicy::Error),
            "skip" => Ok(UnknownPolicy::Skip),
            "passthrough" => Ok(UnknownPolicy::Passthrough),
            other => Err(format!("unknown policy '{other}' (error|skip|passthrough)")),
        }
    }
}

/// A sequence of phone symbols.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct PhoneSeq(pub Vec<String>);

impl PhoneSeq {
    pub fn new() -> Self {
        Self(Vec::new())
    }

    /// Split on whitespace.
    pub fn parse(text: &str) -> Self {
        Self(text.split_whitespace().map(str::to_owned).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[String] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, String> {
        self.0.iter()
    }
}

impl fmt::Display for PhoneSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join(" "))
    }
}

impl<S: Into<String>> FromIterator<S> for PhoneSeq {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Self(iter.into_iter().map(Into::into).collect())
    }
}

impl<'a> IntoIterator for &'a PhoneSeq {
    type Item = &'a String;
    type IntoIter = std::slice::Iter<'a, String>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

/// Bijective grapheme/phone table.
#[derive(Debug, Clone)]
pub struct G2PTable {
    pub language_id: String,
    pairs: Vec<(String, String)>,
    to_phone: HashMap<String, String>,
    to_grapheme: HashMap<String, String>,
    max_grapheme_chars: usize,
    policy: UnknownPolicy,
}

impl G2PTable {
    pub fn new(
        language_id: impl Into<String>,
        pairs: Vec<(String, String)>,
    ) -> Result<Self, G2pError> {
        let mut to_phone = HashMap::new();
        let mut to_grapheme = HashMap::new();
        for (g, p) in &pairs {
            if g.is_empty() || p.is_empty() {
                return Err(G2pError::InvalidTable("empty grapheme or phone".into()));
            }
            if g.chars().any(char::is_whitespace) || p.chars().any(char::is_whitespace) {
                return Err(G2pError::InvalidTable(format!("whitespace in pair {g:?} -> {p:?}")));
            }
            if to_phone.insert(g.clone(), p.clone()).is_some() {
                return Err(G2pError::InvalidTable(format!("duplicate grapheme {g:?}")));
            }
            if to_grapheme.insert(p.clone(), g.clone()).is_some() {
                return Err(G2pError::InvalidTable(format!("duplicate phone {p:?}")));
            }
        }
        let max_grapheme_chars = pairs.iter().map(|(g, _)| g.chars().count()).max().unwrap_or(0);
        Ok(Self {
            language_id: language_id.into(),
            pairs,
            to_phone,
            to_grapheme,
            max_grapheme_chars,
            policy: UnknownPolicy::Error,
        })
    }

    /// Each character is its own phone (accented vowels included).
    pub fn identity(language_id: impl Into<String>) -> Self {
        Self::new(language_id, Vec::new())
            .expect("empty table is valid")
            .with_policy(UnknownPolicy::Passthrough)
    }

    /// The 27-pair Kunwinjku table.
    pub fn kunwinjku() -> Self {
        Self::from_tsv("gup", KUNWINJKU_TSV).expect("bundled table is valid")
    }

    /// Parse `grapheme<TAB>phone` lines; `#` starts a comment line.
    pub fn from_tsv(language_id: impl Into<String>, text: &str) -> Result<Self, G2pError> {
        let mut pairs = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split('\t');
            match (cols.next(), cols.next(), cols.next()) {
                (Some(g), Some(p), None) => pairs.push((g.trim().to_owned(), p.trim().to_owned())),
                _ => {
                    return Err(G2pError::Parse {
                        line: n + 1,
                        message: "expected grapheme<TAB>phone".into(),
                    })
                }
            }
        }
        Self::new(language_id, pairs)
    }

    pub fn load(path: &Path) -> Result<Self, G2pError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| G2pError::Io(format!("{}: {e}", path.display())))?;
        let id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Self::from_tsv(id, &text)
    }

    pub fn with_policy(mut self, policy: UnknownPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn policy(&self) -> UnknownPolicy {
        self.policy
    }

    pub fn pairs(&self) -> &[(String, String)] {
        &self.pairs
    }

    pub fn phone_of(&self, grapheme: &str) -> Option<&str> {
        self.to_phone.get(grapheme).map(String::as_str)
    }

    pub fn grapheme_of(&self, phone: &str) -> Option<&str> {
        self.to_grapheme.get(phone).map(String::as_str)
    }
}

#[derive(Clone, Copy)]
enum Choice {
    Known(usize),
    Unknown,
}

/// Split `text` into table graphemes. Unknown characters are reported,
/// dropped, or kept as single-character tokens according to the table policy.
pub fn tokenize_graphemes(text: &str, table: &G2PTable) -> Result<Vec<String>, G2pError> {
    let chars: Vec<char> = text.chars().collect();
    let n = chars.len();
    // unknown[i]: fewest unknown characters needed to tokenize chars[i..]
    let mut unknown = vec![0usize; n + 1];
    let mut choice = vec![Choice::Unknown; n];
    let mut piece = String::new();
    for i in (0..n).rev() {
        let mut best = (Choice::Unknown, 1 + unknown[i + 1]);
        for len in (1..=table.max_grapheme_chars.min(n - i)).rev() {
            piece.clear();
            piece.extend(&chars[i..i + len]);
            if table.to_phone.contains_key(&piece) && unknown[i + len] < best.1 {
                best = (Choice::Known(len), unknown[i + len]);
            }
        }
        choice[i] = best.0;
        unknown[i] = best.1;
    }

    let mut tokens = Vec::new();
    let mut i = 0;
    while i < n {
        match choice[i] {
            Choice::Known(len) => {
                tokens.push(chars[i..i + len].iter().collect());
                i += len;
            }
            Choice::Unknown => {
                match table.policy {
                    UnknownPolicy::Error => {
                        return Err(G2pError::UnknownGrapheme { position: i, character: chars[i] })
                    }
                    UnknownPolicy::Skip => {}
                    UnknownPolicy::Passthrough => tokens.push(chars[i].to_string()),
                }
                i += 1;
            }
        }
    }
    Ok(tokens)
}

/// Transliterate one orthographic word into phones.
pub fn to_phones(text: &str, table: &G2PTable) -> Result<PhoneSeq, G2pError> {
    Ok(tokenize_graphemes(text, table)?
        .into_iter()
        .map(|g| table.phone_of(&g).map(str::to_owned).unwrap_or(g))
        .collect())
}

/// Transliterate a line of text word by word, keeping word boundaries.
pub fn text_to_phones(line: &str, table: &G2PTable) -> Result<Vec<PhoneSeq>, G2pError> {
    line.split_whitespace().map(|w| to_phones(w, table)).collect()
}

/// Reverse mapping: concatenate the grapheme of each phone.
pub fn to_graphemes(phones: &[String], table: &G2PTable) -> Result<String, G2pError> {
    let mut out = String::new();
    for p in phones {
        match (table.grapheme_of(p), table.policy) {
            (Some(g), _) => out.push_str(g),
            (None, UnknownPolicy::Passthrough) => out.push_str(p),
            (None, UnknownPolicy::Skip) => {}
            (None, UnknownPolicy::Error) => return Err(G2pError::UnknownPhone(p.clone())),
        }
    }
    Ok(out)
}
