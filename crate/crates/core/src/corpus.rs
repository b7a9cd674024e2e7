//! Corpus ingestion: vocabularies, annotated relation data, candidate pairs,
//! bilingual dictionaries and document-level dataset splits.
//!
//! Annotated data is stored one JSON record per line:
//!
//! ```text
//! {"tokens":["alice","works","for","acme"],
//!  "mentions":[{"begin":0,"end":0,"type":"PER"},{"begin":3,"end":3,"type":"ORG"}],
//!  "relations":[{"m1":0,"m2":1,"label":"EMPLOYED_BY"}],
//!  "doc":"d17"}
//! ```
//!
//! `doc` is optional; sentences sharing a `doc` value form one document for
//! splitting purposes, and a sentence without one is its own document.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Label of a candidate pair with no relation of interest.
pub const NONE_LABEL: &str = "O";

/// Splits a line on whitespace, optionally lowercasing each token.
pub fn tokenize(line: &str, lowercase: bool) -> Vec<String> {
    line.split_whitespace()
        .map(|t| if lowercase { t.to_lowercase() } else { t.to_owned() })
        .collect()
}

/// Reads a plain-text corpus, one sentence per line. Blank lines are skipped.
pub fn read_corpus(path: &Path, lowercase: bool) -> Result<Vec<Vec<String>>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut sentences = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let tokens = tokenize(&line, lowercase);
        if !tokens.is_empty() {
            sentences.push(tokens);
        }
    }
    Ok(sentences)
}

pub fn write_corpus(path: &Path, sentences: &[Vec<String>]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for sentence in sentences {
        writeln!(out, "{}", sentence.join(" ")).map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Bijective word <-> id map. Ids are dense and ordered by descending count,
/// ties broken lexicographically.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Vocabulary {
    words: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn build<'a, I, S>(sentences: I, min_count: u64) -> Self
    where
        I: IntoIterator<Item = &'a S>,
        S: AsRef<[String]> + 'a + ?Sized,
    {
        let min_count = min_count.max(1);
        let mut counts: HashMap<&str, u64> = HashMap::new();
        for sentence in sentences {
            for token in sentence.as_ref() {
                *counts.entry(token.as_str()).or_default() += 1;
            }
        }
        let mut entries: Vec<(&str, u64)> = counts
            .into_iter()
            .filter(|&(_, c)| c >= min_count)
            .collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));

        let mut vocab = Vocabulary::default();
        for (word, count) in entries {
            vocab.push(word.to_owned(), count);
        }
        vocab
    }

    /// Builds a vocabulary from words already in rank order (e.g. read from an
    /// embedding file). Counts are unknown and stored as zero.
    pub fn from_ranked_words(words: Vec<String>) -> Result<Self> {
        let mut vocab = Vocabulary::default();
        for word in words {
            if vocab.index.contains_key(&word) {
                return Err(Error::Validation(format!("duplicate word {word:?}")));
            }
            vocab.push(word, 0);
        }
        Ok(vocab)
    }

    fn push(&mut self, word: String, count: u64) {
        self.index.insert(word.clone(), self.words.len());
        self.words.push(word);
        self.counts.push(count);
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn id(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn word(&self, id: usize) -> &str {
        &self.words[id]
    }

    pub fn count(&self, id: usize) -> u64 {
        self.counts[id]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }
}

/// Sentences as vocabulary ids. Tokens outside the vocabulary are dropped.
#[derive(Clone, Debug, PartialEq)]
pub struct TokenizedCorpus {
    pub sentences: Vec<Vec<usize>>,
    pub token_total: usize,
}

impl TokenizedCorpus {
    pub fn new<S: AsRef<[String]>>(sentences: &[S], vocab: &Vocabulary) -> Self {
        let sentences: Vec<Vec<usize>> = sentences
            .iter()
            .map(|s| s.as_ref().iter().filter_map(|t| vocab.id(t)).collect::<Vec<_>>())
            .filter(|s| !s.is_empty())
            .collect();
        let token_total = sentences.iter().map(Vec::len).sum();
        TokenizedCorpus {
            sentences,
            token_total,
        }
    }

    pub fn from_ids(sentences: Vec<Vec<usize>>) -> Self {
        let token_total = sentences.iter().map(Vec::len).sum();
        TokenizedCorpus {
            sentences,
            token_total,
        }
    }
}

/// A token span `[begin, end]` (both inclusive) tagged with an entity type.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EntityMention {
    pub begin: usize,
    pub end: usize,
    #[serde(rename = "type")]
    pub entity_type: String,
}

impl EntityMention {
    pub fn new(begin: usize, end: usize, entity_type: impl Into<String>) -> Self {
        EntityMention {
            begin,
            end,
            entity_type: entity_type.into(),
        }
    }

    /// True if `self` ends strictly before `other` begins.
    pub fn precedes(&self, other: &EntityMention) -> bool {
        self.end < other.begin
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationAnnotation {
    pub m1: usize,
    pub m2: usize,
    pub label: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedSentence {
    pub tokens: Vec<String>,
    pub mentions: Vec<EntityMention>,
    #[serde(default)]
    pub relations: Vec<RelationAnnotation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doc: Option<String>,
}

impl AnnotatedSentence {
    pub fn validate(&self) -> Result<()> {
        let n = self.tokens.len();
        for (i, m) in self.mentions.iter().enumerate() {
            if m.begin > m.end || m.end >= n {
                return Err(Error::Validation(format!(
                    "mention {i} span [{}, {}] out of range for {n} tokens",
                    m.begin, m.end
                )));
            }
        }
        let mut seen = HashSet::new();
        for r in &self.relations {
            let k = self.mentions.len();
            if r.m1 >= k || r.m2 >= k {
                return Err(Error::Validation(format!(
                    "relation ({}, {}) references a mention outside 0..{k}",
                    r.m1, r.m2
                )));
            }
            if !self.mentions[r.m1].precedes(&self.mentions[r.m2]) {
                return Err(Error::Validation(format!(
                    "relation ({}, {}): first mention must end before the second begins",
                    r.m1, r.m2
                )));
            }
            if !seen.insert((r.m1.min(r.m2), r.m1.max(r.m2))) {
                return Err(Error::Validation(format!(
                    "more than one label for mention pair ({}, {})",
                    r.m1, r.m2
                )));
            }
        }
        Ok(())
    }
}

/// One classification instance: a sentence and an ordered mention pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelationExample {
    pub tokens: Vec<String>,
    pub mention1: EntityMention,
    pub mention2: EntityMention,
    pub label: String,
}

pub fn read_annotated<R: BufRead>(reader: R) -> Result<Vec<AnnotatedSentence>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::parse("annotated data", line_no, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let sentence: AnnotatedSentence = serde_json::from_str(&line)
            .map_err(|e| Error::parse("annotated data", line_no, e.to_string()))?;
        sentence
            .validate()
            .map_err(|e| Error::Validation(format!("line {line_no}: {e}")))?;
        out.push(sentence);
    }
    Ok(out)
}

pub fn load_annotated(path: &Path) -> Result<Vec<AnnotatedSentence>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_annotated(BufReader::new(file)).map_err(|e| match e {
        Error::Parse { line, message, .. } => Error::Parse {
            what: path.display().to_string(),
            line,
            message,
        },
        Error::Validation(m) => Error::Validation(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn write_annotated<W: Write>(mut writer: W, sentences: &[AnnotatedSentence]) -> std::io::Result<()> {
    for s in sentences {
        serde_json::to_writer(&mut writer, s)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

pub fn save_annotated(path: &Path, sentences: &[AnnotatedSentence]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_annotated(BufWriter::new(file), sentences).map_err(|e| Error::io(path, e))
}

/// Enumerates every unordered pair of non-overlapping mentions, ordered left
/// to right. Pairs carrying a gold relation get its label, the rest get `O`.
pub fn generate_candidates(sentence: &AnnotatedSentence) -> Vec<RelationExample> {
    let gold: HashMap<(usize, usize), &str> = sentence
        .relations
        .iter()
        .map(|r| ((r.m1.min(r.m2), r.m1.max(r.m2)), r.label.as_str()))
        .collect();

    let mut order: Vec<usize> = (0..sentence.mentions.len()).collect();
    order.sort_by_key(|&i| (sentence.mentions[i].begin, sentence.mentions[i].end));

    let mut out = Vec::new();
    for (a, &i) in order.iter().enumerate() {
        for &j in &order[a + 1..] {
            let (left, right) = (&sentence.mentions[i], &sentence.mentions[j]);
            if !left.precedes(right) {
                continue;
            }
            let label = gold
                .get(&(i.min(j), i.max(j)))
                .copied()
                .unwrap_or(NONE_LABEL);
            out.push(RelationExample {
                tokens: sentence.tokens.clone(),
                mention1: left.clone(),
                mention2: right.clone(),
                label: label.to_owned(),
            });
        }
    }
    out
}

pub fn candidates_for(sentences: &[AnnotatedSentence]) -> Vec<RelationExample> {
    sentences.iter().flat_map(generate_candidates).collect()
}

/// Groups sentences into documents, preserving first-appearance order.
pub fn group_documents(sentences: Vec<AnnotatedSentence>) -> Vec<Vec<AnnotatedSentence>> {
    let mut docs: Vec<Vec<AnnotatedSentence>> = Vec::new();
    let mut by_id: HashMap<String, usize> = HashMap::new();
    for s in sentences {
        match s.doc.clone() {
            Some(id) => {
                let slot = *by_id.entry(id).or_insert_with(|| {
                    docs.push(Vec::new());
                    docs.len() - 1
                });
                docs[slot].push(s);
            }
            None => docs.push(vec![s]),
        }
    }
    docs
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitRatios {
    pub train: f64,
    pub dev: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.8,
            dev: 0.1,
            test: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Split<T> {
    pub train: Vec<T>,
    pub dev: Vec<T>,
    pub test: Vec<T>,
}

/// Shuffles `documents` with `seed` and cuts them into train/dev/test parts
/// of the rounded ratio shares. Every part with a nonzero ratio gets at least
/// one document.
pub fn split_dataset<T: Clone>(documents: &[T], ratios: SplitRatios, seed: u64) -> Result<Split<T>> {
    let r = [ratios.train, ratios.dev, ratios.test];
    if r.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) || (r.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "split ratios must be non-negative and sum to 1, got {r:?}"
        )));
    }
    let n = documents.len();
    let nonzero = r.iter().filter(|&&x| x > 0.0).count();
    if n < nonzero {
        return Err(Error::Validation(format!(
            "{n} documents cannot fill {nonzero} non-empty splits"
        )));
    }

    let mut sizes = [0usize; 3];
    sizes[1] = (n as f64 * r[1]).round() as usize;
    sizes[2] = (n as f64 * r[2]).round() as usize;
    for k in 1..3 {
        if r[k] > 0.0 && sizes[k] == 0 {
            sizes[k] = 1;
        }
    }
    // Train absorbs the rounding slack, but never drops below one if requested.
    while sizes[1] + sizes[2] + usize::from(r[0] > 0.0) > n {
        let k = if sizes[1] >= sizes[2] { 1 } else { 2 };
        sizes[k] -= 1;
    }
    sizes[0] = n - sizes[1] - sizes[2];

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let take = |range: std::ops::Range<usize>| -> Vec<T> {
        order[range].iter().map(|&i| documents[i].clone()).collect()
    };
    Ok(Split {
        train: take(0..sizes[0]),
        dev: take(sizes[0]..sizes[0] + sizes[1]),
        test: take(sizes[0] + sizes[1]..n),
    })
}

/// Aligned (source word, target word) translation pairs. Each target word
/// appears at most once.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BilingualDictionary {
    pairs: Vec<(String, String)>,
}

impl BilingualDictionary {
    /// Keeps the first entry for every target word; returns the dictionary and
    /// the number of later duplicates dropped.
    pub fn from_pairs<I>(pairs: I) -> (Self, usize)
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut seen = HashSet::new();
        let mut kept = Vec::new();
        let mut dropped = 0;
        for (src, tgt) in pairs {
            if seen.insert(tgt.clone()) {
                kept.push((src, tgt));
            } else {
                dropped += 1;
            }
        }
        (BilingualDictionary { pairs: kept }, dropped)
    }

    pub fn pairs(&self) -> &[(String, String)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// The first `n` entries.
    pub fn truncated(&self, n: usize) -> Self {
        BilingualDictionary {
            pairs: self.pairs.iter().take(n).cloned().collect(),
        }
    }

    /// Source translation of a target word.
    pub fn translation_of(&self, target: &str) -> Option<&str> {
        self.pairs
            .iter()
            .find(|(_, t)| t == target)
            .map(|(s, _)| s.as_str())
    }

    pub fn as_map(&self) -> BTreeMap<&str, &str> {
        self.pairs.iter().map(|(s, t)| (t.as_str(), s.as_str())).collect()
    }

    pub fn read<R: BufRead>(reader: R) -> Result<(Self, usize)> {
        let mut pairs = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::parse("dictionary", i + 1, e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut cols = line.split('\t');
            match (cols.next(), cols.next(), cols.next()) {
                (Some(s), Some(t), None) if !s.is_empty() && !t.is_empty() => {
                    pairs.push((s.to_owned(), t.to_owned()))
                }
                _ => {
                    return Err(Error::parse(
                        "dictionary",
                        i + 1,
                        "expected two tab-separated columns",
                    ))
                }
            }
        }
        Ok(Self::from_pairs(pairs))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let (dict, dropped) = Self::read(BufReader::new(file)).map_err(|e| match e {
            Error::Parse { line, message, .. } => Error::Parse {
                what: path.display().to_string(),
                line,
                message,
            },
            other => other,
        })?;
        if dropped > 0 {
            log::warn!(
                "{}: dropped {dropped} entries repeating a target word",
                path.display()
            );
        }
        Ok(dict)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        for (s, t) in &self.pairs {
            writeln!(out, "{s}\t{t}").map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        tokenize(s, false)
    }

    #[test]
    fn vocabulary_counts_and_order() {
        let corpus = vec![toks("a b a")];
        let v = Vocabulary::build(&corpus, 1);
        assert_eq!(v.len(), 2);
        assert_eq!(v.id("a"), Some(0));
        assert_eq!(v.id("b"), Some(1));
        assert_eq!(v.count(0), 2);
        assert_eq!(v.count(1), 1);
    }

    #[test]
    fn vocabulary_ties_are_lexicographic() {
        let corpus = vec![toks("zeta alpha mid"), toks("mid")];
        let v = Vocabulary::build(&corpus, 1);
        assert_eq!(v.words(), &["mid", "alpha", "zeta"]);
    }

    #[test]
    fn vocabulary_empty_and_threshold() {
        let empty: Vec<Vec<String>> = vec![];
        assert!(Vocabulary::build(&empty, 1).is_empty());
        let corpus = vec![toks("a b a")];
        assert!(Vocabulary::build(&corpus, 3).is_empty());
    }

    #[test]
    fn tokenized_corpus_drops_unknown_words() {
        let corpus = vec![toks("a b a c")];
        let v = Vocabulary::build(&vec![toks("a b a")], 1);
        let t = TokenizedCorpus::new(&corpus, &v);
        assert_eq!(t.sentences, vec![vec![0, 1, 0]]);
        assert_eq!(t.token_total, 3);
    }

    #[test]
    fn lowercasing_is_optional() {
        assert_eq!(tokenize("The  Cat", true), vec!["the", "cat"]);
        assert_eq!(tokenize("The Cat", false), vec!["The", "Cat"]);
    }

    fn sentence(n: usize, mentions: &[(usize, usize)], rels: &[(usize, usize, &str)]) -> AnnotatedSentence {
        AnnotatedSentence {
            tokens: (0..n).map(|i| format!("w{i}")).collect(),
            mentions: mentions
                .iter()
                .map(|&(b, e)| EntityMention::new(b, e, "PER"))
                .collect(),
            relations: rels
                .iter()
                .map(|&(m1, m2, l)| RelationAnnotation {
                    m1,
                    m2,
                    label: l.into(),
                })
                .collect(),
            doc: None,
        }
    }

    #[test]
    fn read_annotated_empty_input() {
        assert!(read_annotated("".as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn read_annotated_round_trip() {
        let s = sentence(5, &[(0, 1), (3, 4)], &[(0, 1, "r")]);
        let mut buf = Vec::new();
        write_annotated(&mut buf, std::slice::from_ref(&s)).unwrap();
        let back = read_annotated(buf.as_slice()).unwrap();
        assert_eq!(back, vec![s]);
        assert_eq!(back[0].mentions.len(), 2);
        assert_eq!(back[0].relations[0].label, "r");
    }

    #[test]
    fn read_annotated_reports_line_numbers() {
        let good = r#"{"tokens":["a"],"mentions":[],"relations":[]}"#;
        let text = format!("{good}\n{{not json\n");
        match read_annotated(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn read_annotated_rejects_bad_mention_index() {
        let text = r#"{"tokens":["a","b","c"],"mentions":[{"begin":0,"end":0,"type":"X"},{"begin":2,"end":2,"type":"Y"}],"relations":[{"m1":0,"m2":5,"label":"r"}]}"#;
        assert!(matches!(read_annotated(text.as_bytes()), Err(Error::Validation(_))));
    }

    #[test]
    fn validation_catches_spans_and_order() {
        assert!(sentence(3, &[(1, 3)], &[]).validate().is_err());
        assert!(sentence(5, &[(0, 0), (2, 2)], &[(1, 0, "r")]).validate().is_err());
        assert!(sentence(5, &[(0, 0), (2, 2)], &[(0, 1, "r"), (0, 1, "s")])
            .validate()
            .is_err());
    }

    #[test]
    fn candidates_single_pair() {
        let c = generate_candidates(&sentence(4, &[(0, 0), (3, 3)], &[(0, 1, "r")]));
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].label, "r");
    }

    #[test]
    fn candidates_one_mention() {
        assert!(generate_candidates(&sentence(4, &[(1, 2)], &[])).is_empty());
    }

    #[test]
    fn candidates_three_mentions() {
        // Pairs by hand: (0,1) gold r, (0,2) O, (1,2) O.
        let s = sentence(7, &[(0, 0), (3, 3), (6, 6)], &[(0, 1, "r")]);
        let c = generate_candidates(&s);
        assert_eq!(c.len(), 3);
        assert_eq!(c.iter().filter(|e| e.label == NONE_LABEL).count(), 2);
        assert_eq!(c[0].label, "r");
        assert_eq!((c[0].mention1.begin, c[0].mention2.begin), (0, 3));
    }

    #[test]
    fn candidates_are_ordered_left_to_right_and_skip_overlaps() {
        let s = sentence(8, &[(5, 6), (0, 1), (1, 2)], &[]);
        let c = generate_candidates(&s);
        // (0,1)-(1,2) overlap and are skipped.
        assert_eq!(c.len(), 2);
        assert!(c.iter().all(|e| e.mention1.precedes(&e.mention2)));
    }

    #[test]
    fn split_sizes_match_ratios() {
        let docs: Vec<usize> = (0..10).collect();
        let s = split_dataset(&docs, SplitRatios::default(), 7).unwrap();
        assert_eq!((s.train.len(), s.dev.len(), s.test.len()), (8, 1, 1));
    }

    #[test]
    fn split_is_deterministic() {
        let docs: Vec<usize> = (0..37).collect();
        let a = split_dataset(&docs, SplitRatios::default(), 3).unwrap();
        let b = split_dataset(&docs, SplitRatios::default(), 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn split_is_a_disjoint_cover() {
        let docs: Vec<usize> = (0..100).collect();
        let s = split_dataset(&docs, SplitRatios::default(), 11).unwrap();
        let all: HashSet<usize> = s.train.iter().chain(&s.dev).chain(&s.test).copied().collect();
        assert_eq!(all.len(), 100);
        assert_eq!(s.train.len() + s.dev.len() + s.test.len(), 100);
    }

    #[test]
    fn split_rejects_too_few_documents() {
        let docs = vec![1, 2];
        assert!(split_dataset(&docs, SplitRatios::default(), 0).is_err());
        let bad = SplitRatios {
            train: 0.5,
            dev: 0.1,
            test: 0.1,
        };
        assert!(split_dataset(&[1, 2, 3], bad, 0).is_err());
    }

    #[test]
    fn documents_group_by_id() {
        let mut a = sentence(2, &[], &[]);
        a.doc = Some("x".into());
        let b = sentence(2, &[], &[]);
        let mut c = sentence(3, &[], &[]);
        c.doc = Some("x".into());
        let docs = group_documents(vec![a, b, c]);
        assert_eq!(docs.iter().map(Vec::len).collect::<Vec<_>>(), vec![2, 1]);
    }

    #[test]
    fn dictionary_drops_repeated_targets() {
        let text = "cat\tgato\ndog\tperro\nkitty\tgato\n";
        let (d, dropped) = BilingualDictionary::read(text.as_bytes()).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(dropped, 1);
        assert_eq!(d.translation_of("gato"), Some("cat"));
    }

    #[test]
    fn dictionary_rejects_malformed_lines() {
        assert!(BilingualDictionary::read("cat gato\n".as_bytes()).is_err());
    }
}
