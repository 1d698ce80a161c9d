//! Lexicon entries and the phone trie shared by the 1-best and
//! confusion-network matchers.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::g2p::{to_phones, G2PTable, G2pError, PhoneSeq};

#[derive(Debug, Error, PartialEq)]
pub enum LexiconError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate lexicon entry {0:?}")]
    DuplicateEntry(String),
    #[error("line {line}: {source}")]
    G2p { line: usize, source: G2pError },
    #[error("{0}")]
    Io(String),
}

/// A spoken example of a lexicon word.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Exemplar {
    pub audio: Option<PathBuf>,
    pub speaker: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LexiconEntry {
    pub orthography: String,
    pub phones: PhoneSeq,
    pub exemplars: Vec<Exemplar>,
}

impl LexiconEntry {
    pub fn new(orthography: impl Into<String>, phones: PhoneSeq) -> Self {
        Self { orthography: orthography.into(), phones, exemplars: Vec::new() }
    }

    pub fn exemplar_speakers(&self) -> impl Iterator<Item = &str> {
        self.exemplars.iter().filter_map(|e| e.speaker.as_deref())
    }
}

/// Read a lexicon TSV: `orthography<TAB>phones<TAB>exemplar<TAB>speaker`, the
/// last three optional. Missing phones are derived with `table`, or by the
/// identity mapping when no table is given. Relative exemplar paths resolve
/// against the lexicon's directory.
pub fn load_lexicon(path: &Path, table: Option<&G2PTable>) -> Result<Vec<LexiconEntry>, LexiconError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| LexiconError::Io(format!("{}: {e}", path.display())))?;
    parse_lexicon(&text, path.parent().unwrap_or(Path::new("")), table)
}

pub fn parse_lexicon(
    text: &str,
    base_dir: &Path,
    table: Option<&G2PTable>,
) -> Result<Vec<LexiconEntry>, LexiconError> {
    let identity;
    let table = match table {
        Some(t) => t,
        None => {
            identity = G2PTable::identity("identity");
            &identity
        }
    };
    let mut seen = HashSet::new();
    let mut entries = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
        if cols.len() > 4 {
            return Err(LexiconError::Parse { line: line_no, message: "more than 4 columns".into() });
        }
        let col = |i: usize| cols.get(i).copied().filter(|c| !c.is_empty());
        let orthography = col(0).ok_or_else(|| LexiconError::Parse {
            line: line_no,
            message: "empty orthography".into(),
        })?;
        let phones = match col(1) {
            Some(p) => PhoneSeq::parse(p),
            None => to_phones(orthography, table)
                .map_err(|source| LexiconError::G2p { line: line_no, source })?,
        };
        if phones.is_empty() {
            return Err(LexiconError::Parse { line: line_no, message: "no phones".into() });
        }
        if !seen.insert(orthography.to_owned()) {
            return Err(LexiconError::DuplicateEntry(orthography.to_owned()));
        }
        let mut entry = LexiconEntry::new(orthography, phones);
        if col(2).is_some() || col(3).is_some() {
            entry.exemplars.push(Exemplar {
                audio: col(2).map(|p| base_dir.join(p)),
                speaker: col(3).map(str::to_owned),
            });
        }
        entries.push(entry);
    }
    Ok(entries)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

#[derive(Debug, Clone, Default)]
struct TrieNode {
    children: BTreeMap<String, NodeId>,
    /// Orthographies ending here, sorted; homophones share a node.
    words: Vec<String>,
    depth: usize,
}

/// Prefix tree over lexicon phone sequences.
#[derive(Debug, Clone)]
pub struct LexiconTrie {
    nodes: Vec<TrieNode>,
}

impl Default for LexiconTrie {
    fn default() -> Self {
        Self { nodes: vec![TrieNode::default()] }
    }
}

impl LexiconTrie {
    pub const ROOT: NodeId = NodeId(0);

    pub fn insert(&mut self, orthography: &str, phones: &[String]) {
        let mut node = Self::ROOT;
        for phone in phones {
            node = match self.nodes[node.0].children.get(phone) {
                Some(&child) => child,
                None => {
                    let child = NodeId(self.nodes.len());
                    let depth = self.nodes[node.0].depth + 1;
                    self.nodes.push(TrieNode { depth, ..TrieNode::default() });
                    self.nodes[node.0].children.insert(phone.clone(), child);
                    child
                }
            };
        }
        let words = &mut self.nodes[node.0].words;
        if let Err(pos) = words.binary_search_by(|w| w.as_str().cmp(orthography)) {
            words.insert(pos, orthography.to_owned());
        }
    }

    pub fn cursor(&self) -> TrieCursor<'_> {
        TrieCursor { trie: self, node: Self::ROOT }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes[0].children.is_empty()
    }

    pub fn child(&self, node: NodeId, phone: &str) -> Option<NodeId> {
        self.nodes[node.0].children.get(phone).copied()
    }

    pub fn words_at(&self, node: NodeId) -> &[String] {
        &self.nodes[node.0].words
    }

    /// Words whose phones are exactly `phones`.
    pub fn lookup(&self, phones: &[String]) -> &[String] {
        let mut node = Self::ROOT;
        for p in phones {
            match self.child(node, p) {
                Some(next) => node = next,
                None => return &[],
            }
        }
        self.words_at(node)
    }

    /// Every stored phone sequence with its words, in lexicographic phone order.
    pub fn entries(&self) -> Vec<(PhoneSeq, Vec<String>)> {
        let mut out = Vec::new();
        let mut path = Vec::new();
        self.collect(Self::ROOT, &mut path, &mut out);
        out
    }

    fn collect(&self, node: NodeId, path: &mut Vec<String>, out: &mut Vec<(PhoneSeq, Vec<String>)>) {
        let n = &self.nodes[node.0];
        if !n.words.is_empty() {
            out.push((PhoneSeq(path.clone()), n.words.clone()));
        }
        for (phone, &child) in &n.children {
            path.push(phone.clone());
            self.collect(child, path, out);
            path.pop();
        }
    }

    pub fn max_depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }
}

/// Build the trie over all entries' phone sequences.
pub fn build_trie(entries: &[LexiconEntry]) -> LexiconTrie {
    let mut trie = LexiconTrie::default();
    for e in entries {
        trie.insert(&e.orthography, e.phones.as_slice());
    }
    trie
}

/// A position in a [`LexiconTrie`].
#[derive(Debug, Clone, Copy)]
pub struct TrieCursor<'t> {
    trie: &'t LexiconTrie,
    node: NodeId,
}

impl<'t> TrieCursor<'t> {
    /// Follow `phone`. Returns `false` and stays put when there is no such edge.
    pub fn step(&mut self, phone: &str) -> bool {
        match self.trie.child(self.node, phone) {
            Some(next) => {
                self.node = next;
                true
            }
            None => false,
        }
    }

    pub fn can_step(&self, phone: &str) -> bool {
        self.trie.child(self.node, phone).is_some()
    }

    pub fn reset(&mut self) {
        self.node = LexiconTrie::ROOT;
    }

    pub fn node(&self) -> NodeId {
        self.node
    }

    pub fn at_root(&self) -> bool {
        self.node == LexiconTrie::ROOT
    }

    pub fn is_word(&self) -> bool {
        !self.words().is_empty()
    }

    pub fn words(&self) -> &'t [String] {
        self.trie.words_at(self.node)
    }

    /// Phones consumed since the root.
    pub fn depth(&self) -> usize {
        self.trie.nodes[self.node.0].depth
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn entry(o: &str, p: &str) -> LexiconEntry {
        LexiconEntry::new(o, PhoneSeq::parse(p))
    }

    fn manu_bun() -> LexiconTrie {
        build_trie(&[entry("manu", "m a n u"), entry("bun", "b u n")])
    }

    #[test]
    fn manu_bun_shape() {
        let trie = manu_bun();
        assert_eq!(trie.node_count(), 1 + 4 + 3);
        let mut c = trie.cursor();
        assert!(c.step("m"));
        assert!(!c.is_word());
        assert_eq!(c.depth(), 1);
        let mut c = trie.cursor();
        for p in ["b", "u"] {
            assert!(c.step(p));
        }
        assert!(c.step("n"));
        assert!(c.is_word());
        assert_eq!(c.words(), ["bun"]);
        let mut c = trie.cursor();
        assert!(!c.step("z"));
        assert!(c.at_root());
    }

    #[test]
    fn prefix_words_and_single_phone() {
        let trie = build_trie(&[entry("ab", "a b"), entry("abc", "a b c"), entry("a", "a")]);
        let mut c = trie.cursor();
        assert!(c.step("a") && c.is_word());
        assert!(c.step("b") && c.is_word());
        assert!(c.can_step("c"));
    }

    #[test]
    fn homophones_share_a_node() {
        let trie = build_trie(&[entry("two", "t u"), entry("too", "t u")]);
        assert_eq!(trie.lookup(&PhoneSeq::parse("t u").0), ["too", "two"]);
    }

    #[test]
    fn parse_formats() {
        let text = "# comment\nmanu\t\t\nbun\tb u n\tclips/bun.wav\tSG\n\ndjang\n";
        let kun = G2PTable::kunwinjku();
        let entries = parse_lexicon(text, Path::new("/lex"), None).unwrap();
        assert_eq!(entries[0].phones, PhoneSeq::parse("m a n u"));
        assert_eq!(entries[1].exemplars[0].audio.as_deref(), Some(Path::new("/lex/clips/bun.wav")));
        assert_eq!(entries[1].exemplar_speakers().collect::<Vec<_>>(), ["SG"]);
        let entries = parse_lexicon(text, Path::new(""), Some(&kun)).unwrap();
        assert_eq!(entries[2].phones, PhoneSeq::parse("ɟ ɑ ŋ"));
        assert!(parse_lexicon("", Path::new(""), None).unwrap().is_empty());
    }

    #[test]
    fn parse_errors() {
        assert_eq!(
            parse_lexicon("manu\nmanu\tm a n u\n", Path::new(""), None),
            Err(LexiconError::DuplicateEntry("manu".into()))
        );
        let kun = G2PTable::kunwinjku();
        assert!(matches!(
            parse_lexicon("ok\nzzz\n", Path::new(""), Some(&kun)),
            Err(LexiconError::G2p { line: 2, .. })
        ));
        assert!(matches!(
            parse_lexicon("\tb u\n", Path::new(""), None),
            Err(LexiconError::Parse { line: 1, .. })
        ));
    }

    fn lexicon() -> impl Strategy<Value = Vec<Vec<String>>> {
        let phone = prop::sample::select(vec!["a", "b", "c", "d"]).prop_map(String::from);
        prop::collection::vec(prop::collection::vec(phone, 1..6), 0..15)
    }

    proptest! {
        #[test]
        fn trie_invariants(words in lexicon(), probe in prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "d", "e"]), 0..7)) {
            let entries: Vec<LexiconEntry> = words.iter().enumerate()
                .map(|(i, p)| LexiconEntry::new(format!("w{i}"), PhoneSeq(p.clone())))
                .collect();
            let trie = build_trie(&entries);
            let total: usize = words.iter().map(Vec::len).sum();
            prop_assert!(trie.node_count() <= 1 + total);
            for e in &entries {
                let mut c = trie.cursor();
                for p in &e.phones {
                    prop_assert!(c.step(p));
                }
                prop_assert!(c.words().contains(&e.orthography));
            }
            let stored: HashSet<Vec<String>> = trie.entries().into_iter().map(|(p, _)| p.0).collect();
            let expected: HashSet<Vec<String>> = words.iter().cloned().collect();
            prop_assert_eq!(stored, expected);
            // stepping fails exactly at the first symbol that leaves every entry's prefix set
            let probe: Vec<String> = probe.iter().map(|s| s.to_string()).collect();
            let mut c = trie.cursor();
            for k in 0..probe.len() {
                let is_prefix = words.iter().any(|w| w.len() > k && w[..=k] == probe[..=k]);
                prop_assert_eq!(c.step(&probe[k]), is_prefix);
                if !is_prefix { break; }
            }
        }
    }
}
