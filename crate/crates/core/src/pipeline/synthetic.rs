//! A planted bilingual benchmark. The target language is a word-by-word
//! renaming of the source language, so every source sentence has an exact
//! translation and gold relations carry over unchanged.
//!
//! Source sentences come from a small template grammar: relation sentences
//! `fillers E1 between E2 fillers`, where the between span contains one
//! trigger word of the relation (or only connector words for `O`), and topic
//! filler sentences that give every word a distributional context.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{
    save_annotated, write_corpus, AnnotatedSentence, BilingualDictionary, EntityMention, RelationAnnotation,
    Vocabulary, NONE_LABEL,
};
use crate::error::{Error, Result};

/// Fraction of relation sentences labelled `O`.
const NONE_RATE: f64 = 0.3;
/// Probability that a relation sentence draws fillers from its relation's topic.
const TOPIC_AFFINITY: f64 = 0.7;
/// Every word is planted at least this many times in filler sentences.
const MIN_OCCURRENCES: usize = 2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub vocab_size: usize,
    /// Approximate number of tokens per language.
    pub tokens: usize,
    pub relations: usize,
    pub entity_types: usize,
    /// Annotated relation sentences (also part of the corpus).
    pub re_sentences: usize,
    pub sentences_per_document: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            vocab_size: 2000,
            tokens: 200_000,
            relations: 4,
            entity_types: 3,
            re_sentences: 4000,
            sentences_per_document: 5,
            seed: 1,
        }
    }
}

/// How the vocabulary is divided among word roles.
#[derive(Clone, Debug)]
struct Roles {
    function: Vec<usize>,
    connectors: Vec<usize>,
    /// Per relation.
    triggers: Vec<Vec<usize>>,
    /// Per entity type.
    names: Vec<Vec<usize>>,
    /// Topic clusters; cluster `r` belongs to relation `r`.
    topics: Vec<Vec<usize>>,
}

impl SyntheticConfig {
    fn role_sizes(&self) -> (usize, usize, usize, usize, usize) {
        let v = self.vocab_size;
        let function = (v / 200).max(3);
        let connectors = (v / 200).max(3);
        let triggers = (v / 300).max(2);
        let names = (v / 60).max(3);
        let topics = self.relations + (v / 200).max(2);
        (function, connectors, triggers, names, topics)
    }

    fn filler_words(&self) -> Option<usize> {
        let (f, c, t, n, _) = self.role_sizes();
        self.vocab_size
            .checked_sub(f + c + t * self.relations + n * self.entity_types)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.vocab_size < 100 {
            return bad(format!("vocab_size must be at least 100, got {}", self.vocab_size));
        }
        if self.tokens < 10 * self.vocab_size {
            return bad(format!(
                "tokens must be at least 10 x vocab_size ({}), got {}",
                10 * self.vocab_size,
                self.tokens
            ));
        }
        if self.relations == 0 || self.entity_types == 0 {
            return bad("need at least one relation and one entity type".into());
        }
        if self.re_sentences == 0 || self.sentences_per_document == 0 {
            return bad("re_sentences and sentences_per_document must be positive".into());
        }
        let (_, _, _, _, topics) = self.role_sizes();
        match self.filler_words() {
            Some(n) if n >= 2 * topics => {}
            _ => return bad("vocabulary too small for the requested relations and entity types".into()),
        }
        // A relation sentence has at most 13 tokens.
        if self.re_sentences * 13 > self.tokens {
            return bad(format!("{} relation sentences do not fit in {} tokens", self.re_sentences, self.tokens));
        }
        Ok(())
    }

    fn assign_roles<R: Rng>(&self, rng: &mut R) -> Roles {
        let (f, c, t, n, k) = self.role_sizes();
        let mut ids: Vec<usize> = (0..self.vocab_size).collect();
        ids.shuffle(rng);
        let mut rest = ids.as_slice();
        let mut take = |count: usize| {
            let (head, tail) = rest.split_at(count);
            rest = tail;
            head.to_vec()
        };
        let function = take(f);
        let connectors = take(c);
        let triggers = (0..self.relations).map(|_| take(t)).collect();
        let names = (0..self.entity_types).map(|_| take(n)).collect();
        let fillers = take(self.vocab_size - f - c - t * self.relations - n * self.entity_types);
        let per = fillers.len() / k;
        let topics = (0..k)
            .map(|i| {
                let end = if i + 1 == k { fillers.len() } else { (i + 1) * per };
                fillers[i * per..end].to_vec()
            })
            .collect();
        Roles {
            function,
            connectors,
            triggers,
            names,
            topics,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticBenchmark {
    pub source_corpus: Vec<Vec<String>>,
    pub target_corpus: Vec<Vec<String>>,
    /// Planted translation of every source word.
    pub lexicon: BTreeMap<String, String>,
    pub source_annotated: Vec<AnnotatedSentence>,
    pub target_annotated: Vec<AnnotatedSentence>,
    /// `O` first, then one label per relation.
    pub labels: Vec<String>,
    pub entity_types: Vec<String>,
}

fn word_names(prefix: &str, n: usize) -> Vec<String> {
    let width = (n - 1).to_string().len();
    (0..n).map(|i| format!("{prefix}{i:0width$}")).collect()
}

/// Zipf(1) sampler over each topic cluster.
struct TopicSampler {
    dists: Vec<WeightedIndex<f64>>,
}

impl TopicSampler {
    fn new(roles: &Roles) -> Self {
        let dists = roles
            .topics
            .iter()
            .map(|c| WeightedIndex::new((0..c.len()).map(|r| 1.0 / (r + 1) as f64)).expect("non-empty cluster"))
            .collect();
        TopicSampler { dists }
    }

    fn filler<R: Rng>(&self, roles: &Roles, topic: usize, rng: &mut R) -> usize {
        if rng.random_bool(0.25) {
            *roles.function.choose(rng).expect("function words")
        } else {
            roles.topics[topic][self.dists[topic].sample(rng)]
        }
    }
}

struct RelationSentence {
    ids: Vec<usize>,
    mentions: [EntityMention; 2],
    label: Option<usize>,
}

fn relation_sentence<R: Rng>(
    config: &SyntheticConfig,
    roles: &Roles,
    sampler: &TopicSampler,
    type_names: &[String],
    rng: &mut R,
) -> RelationSentence {
    let label = (!rng.random_bool(NONE_RATE)).then(|| rng.random_range(0..config.relations));
    let topic = match label {
        Some(r) if rng.random_bool(TOPIC_AFFINITY) => r,
        _ => rng.random_range(0..roles.topics.len()),
    };
    let mut ids = Vec::new();
    for _ in 0..rng.random_range(0..=3) {
        ids.push(sampler.filler(roles, topic, rng));
    }
    let mention = |ids: &mut Vec<usize>, rng: &mut R| {
        let ty = rng.random_range(0..config.entity_types);
        let begin = ids.len();
        for _ in 0..rng.random_range(1..=2) {
            ids.push(*roles.names[ty].choose(rng).expect("names"));
        }
        EntityMention::new(begin, ids.len() - 1, type_names[ty].clone())
    };
    let m1 = mention(&mut ids, rng);
    let between = rng.random_range(1..=3);
    let trigger_at = rng.random_range(0..between);
    for i in 0..between {
        let w = match label {
            Some(r) if i == trigger_at => *roles.triggers[r].choose(rng).expect("triggers"),
            Some(_) => *roles.function.choose(rng).expect("function words"),
            None if i == trigger_at => *roles.connectors.choose(rng).expect("connectors"),
            None => *[&roles.connectors, &roles.function].choose(rng).unwrap().choose(rng).unwrap(),
        };
        ids.push(w);
    }
    let m2 = mention(&mut ids, rng);
    for _ in 0..rng.random_range(0..=3) {
        ids.push(sampler.filler(roles, topic, rng));
    }
    RelationSentence {
        ids,
        mentions: [m1, m2],
        label,
    }
}

/// Generates the benchmark. Output depends only on `config`.
pub fn generate_synthetic(config: &SyntheticConfig) -> Result<SyntheticBenchmark> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let roles = config.assign_roles(&mut rng);
    let sampler = TopicSampler::new(&roles);
    let source_words = word_names("s", config.vocab_size);
    let target_names = word_names("t", config.vocab_size);
    let mut perm: Vec<usize> = (0..config.vocab_size).collect();
    perm.shuffle(&mut rng);
    let lexicon: BTreeMap<String, String> = source_words
        .iter()
        .zip(&perm)
        .map(|(s, &p)| (s.clone(), target_names[p].clone()))
        .collect();
    let labels: Vec<String> = std::iter::once(NONE_LABEL.to_string())
        .chain((0..config.relations).map(|r| format!("R{r}")))
        .collect();
    let type_names: Vec<String> = (0..config.entity_types).map(|t| format!("T{t}")).collect();

    let mut corpus_ids: Vec<Vec<usize>> = Vec::new();
    let mut annotated = Vec::with_capacity(config.re_sentences);
    let mut tokens = 0;
    for i in 0..config.re_sentences {
        let s = relation_sentence(config, &roles, &sampler, &type_names, &mut rng);
        tokens += s.ids.len();
        let [m1, m2] = s.mentions;
        annotated.push(AnnotatedSentence {
            tokens: s.ids.iter().map(|&w| source_words[w].clone()).collect(),
            mentions: vec![m1, m2],
            relations: s
                .label
                .map(|r| RelationAnnotation {
                    m1: 0,
                    m2: 1,
                    label: labels[r + 1].clone(),
                })
                .into_iter()
                .collect(),
            doc: Some(format!("doc{:05}", i / config.sentences_per_document)),
        });
        corpus_ids.push(s.ids);
    }

    let mut coverage: Vec<usize> = (0..config.vocab_size).flat_map(|w| [w; MIN_OCCURRENCES]).collect();
    coverage.shuffle(&mut rng);
    while tokens < config.tokens || !coverage.is_empty() {
        let topic = rng.random_range(0..roles.topics.len());
        let len = rng.random_range(6..=14);
        let mut ids: Vec<usize> = (0..len).map(|_| sampler.filler(&roles, topic, &mut rng)).collect();
        for _ in 0..2 {
            if let Some(w) = coverage.pop() {
                let at = rng.random_range(0..ids.len());
                ids[at] = w;
            }
        }
        tokens += ids.len();
        corpus_ids.push(ids);
    }
    corpus_ids.shuffle(&mut rng);

    let source_corpus: Vec<Vec<String>> = corpus_ids
        .iter()
        .map(|s| s.iter().map(|&w| source_words[w].clone()).collect())
        .collect();
    let mut bench = SyntheticBenchmark {
        target_corpus: Vec::new(),
        source_corpus,
        lexicon,
        target_annotated: Vec::new(),
        source_annotated: annotated,
        labels,
        entity_types: type_names,
    };
    bench.rebuild_target();
    Ok(bench)
}

impl SyntheticBenchmark {
    fn rebuild_target(&mut self) {
        let tr = |w: &String| self.lexicon[w].clone();
        self.target_corpus = self.source_corpus.iter().map(|s| s.iter().map(tr).collect()).collect();
        self.target_annotated = self
            .source_annotated
            .iter()
            .map(|s| AnnotatedSentence {
                tokens: s.tokens.iter().map(tr).collect(),
                ..s.clone()
            })
            .collect();
    }

    /// The same benchmark with a freshly drawn target language whose words
    /// start with `prefix` (which must not be `s`).
    pub fn with_target_language(&self, prefix: &str, seed: u64) -> Result<Self> {
        if prefix.is_empty() || prefix.starts_with('s') {
            return Err(Error::Config(format!("target prefix {prefix:?} clashes with source words")));
        }
        let names = word_names(prefix, self.lexicon.len());
        let mut perm: Vec<usize> = (0..names.len()).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut out = self.clone();
        out.lexicon = self.lexicon.keys().zip(&perm).map(|(s, &p)| (s.clone(), names[p].clone())).collect();
        out.rebuild_target();
        Ok(out)
    }

    /// Planted translation pairs `(source, target)`, ordered like
    /// `target_vocab` (most frequent target words first). Target words
    /// outside the lexicon are skipped.
    pub fn dictionary(&self, target_vocab: &Vocabulary) -> BilingualDictionary {
        let inverse: BTreeMap<&str, &str> = self.lexicon.iter().map(|(s, t)| (t.as_str(), s.as_str())).collect();
        let pairs = target_vocab
            .words()
            .iter()
            .filter_map(|t| inverse.get(t.as_str()).map(|s| (s.to_string(), t.clone())));
        BilingualDictionary::from_pairs(pairs).0
    }

    pub fn token_count(&self) -> usize {
        self.source_corpus.iter().map(Vec::len).sum()
    }

    /// Writes `source.txt`, `target.txt`, `source.jsonl`, `target.jsonl` and
    /// `lexicon.tsv` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_corpus(&dir.join("source.txt"), &self.source_corpus)?;
        write_corpus(&dir.join("target.txt"), &self.target_corpus)?;
        save_annotated(&dir.join("source.jsonl"), &self.source_annotated)?;
        save_annotated(&dir.join("target.jsonl"), &self.target_annotated)?;
        let (dict, _) = BilingualDictionary::from_pairs(self.lexicon.iter().map(|(s, t)| (s.clone(), t.clone())));
        dict.save(&dir.join("lexicon.tsv"))
    }
}
