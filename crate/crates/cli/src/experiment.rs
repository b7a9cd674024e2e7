//! `run-experiment`: split, train the source model, learn the mapping,
//! transfer and evaluate, writing every artifact under one directory.

use std::path::{Path, PathBuf};

use log::info;
use serde::{Deserialize, Serialize};

use clre::corpus::{candidates_for, group_documents, load_annotated, read_corpus, split_dataset, BilingualDictionary, SplitRatios};
use clre::embeddings::{train_on_sentences, CbowConfig, WordEmbeddings};
use clre::mapping::{MappingKind, DEFAULT_INDUCTION_CUTOFF};
use clre::metrics::EvalReport;
use clre::pipeline::{
    dictionary_sweep, learn_mapping, Ensemble, EnsembleRule, MappingMethod, MappingOptions, ProjectedTarget,
    SweepResult, SyntheticConfig, DEFAULT_SELF_LEARN_ITERS,
};
use clre::remodel::{train, ContextKind, TrainReport};

use crate::commands::{
    label_sets, load_models, require_file, save_synthetic, score_records, split_candidates, transfer_records, write_json,
    write_records, write_text, ReSettings,
};
use crate::{stage, CliError};

/// Flat experiment settings. Paths are relative to the config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub output_dir: PathBuf,
    pub seed: u64,

    /// Generate the synthetic benchmark instead of reading data files.
    pub synthetic: bool,
    pub synthetic_vocab_size: usize,
    pub synthetic_tokens: usize,
    pub synthetic_relations: usize,
    pub synthetic_entity_types: usize,
    pub synthetic_re_sentences: usize,

    pub source_corpus: Option<PathBuf>,
    pub target_corpus: Option<PathBuf>,
    /// Pretrained embeddings; used instead of training on the corpus.
    pub source_embeddings: Option<PathBuf>,
    pub target_embeddings: Option<PathBuf>,
    /// Annotated sentences (JSON lines).
    pub source_data: Option<PathBuf>,
    pub target_data: Option<PathBuf>,
    /// `source<TAB>target` pairs, most frequent target words first.
    pub dictionary: Option<PathBuf>,
    pub lowercase: bool,

    pub dim: usize,
    pub window: usize,
    pub embedding_epochs: usize,
    pub embedding_learning_rate: f64,
    pub min_count: u64,

    /// `regular`, `orthogonal` or `self-learn`.
    pub mapping: String,
    pub dictionary_size: usize,
    pub self_learn_iters: usize,
    pub induction_cutoff: usize,

    /// `pass`, `bilstm` or `cnn`.
    pub context: String,
    pub hidden_dim: Option<usize>,
    pub entity_dim: usize,
    pub cnn_window: usize,
    pub dropout: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub ensemble_size: usize,
    /// `max` or `average`.
    pub ensemble_rule: String,

    /// Dictionary sizes for a sweep on the target dev split (empty: none).
    pub sweep_sizes: Vec<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let synth = SyntheticConfig::default();
        ExperimentConfig {
            output_dir: PathBuf::from("experiment"),
            seed: crate::DEFAULT_SEED,
            synthetic: false,
            synthetic_vocab_size: synth.vocab_size,
            synthetic_tokens: synth.tokens,
            synthetic_relations: synth.relations,
            synthetic_entity_types: synth.entity_types,
            synthetic_re_sentences: synth.re_sentences,
            source_corpus: None,
            target_corpus: None,
            source_embeddings: None,
            target_embeddings: None,
            source_data: None,
            target_data: None,
            dictionary: None,
            lowercase: false,
            dim: 300,
            window: 5,
            embedding_epochs: 5,
            embedding_learning_rate: 0.025,
            min_count: 1,
            mapping: "regular".into(),
            dictionary_size: 1000,
            self_learn_iters: DEFAULT_SELF_LEARN_ITERS,
            induction_cutoff: DEFAULT_INDUCTION_CUTOFF,
            context: "bilstm".into(),
            hidden_dim: None,
            entity_dim: 50,
            cnn_window: 3,
            dropout: 0.5,
            learning_rate: 1e-3,
            batch_size: 16,
            max_epochs: 50,
            patience: 5,
            ensemble_size: 1,
            ensemble_rule: "max".into(),
            sweep_sizes: Vec::new(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        require_file(path)?;
        let text = std::fs::read_to_string(path).map_err(|e| clre::Error::io(path, e))?;
        let mut config: ExperimentConfig =
            toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut config.output_dir);
        for p in [
            &mut config.source_corpus,
            &mut config.target_corpus,
            &mut config.source_embeddings,
            &mut config.target_embeddings,
            &mut config.source_data,
            &mut config.target_data,
            &mut config.dictionary,
        ]
        .into_iter()
        .flatten()
        {
            resolve(p);
        }
        Ok(config)
    }

    fn cbow(&self, seed: u64) -> CbowConfig {
        CbowConfig {
            dim: self.dim,
            window: self.window,
            epochs: self.embedding_epochs,
            learning_rate: self.embedding_learning_rate,
            min_count: self.min_count,
            seed,
        }
    }

    /// Checks option values and that every referenced input exists.
    fn validate(&self) -> Result<(MappingMethod, ContextKind, EnsembleRule), CliError> {
        let method: MappingMethod = self.mapping.parse()?;
        let context: ContextKind = self.context.parse()?;
        let rule: EnsembleRule = self.ensemble_rule.parse()?;
        if self.ensemble_size == 0 || self.dictionary_size == 0 {
            return Err(CliError::Usage("ensemble_size and dictionary_size must be positive".into()));
        }
        self.cbow(self.seed).validate()?;
        if self.synthetic {
            return Ok((method, context, rule));
        }
        let need = |p: &Option<PathBuf>, key: &str| -> Result<(), CliError> {
            match p {
                Some(p) => require_file(p),
                None => Err(CliError::Usage(format!("config key {key} is required"))),
            }
        };
        need(&self.source_data, "source_data")?;
        need(&self.target_data, "target_data")?;
        need(&self.dictionary, "dictionary")?;
        for (emb, corpus, lang) in [
            (&self.source_embeddings, &self.source_corpus, "source"),
            (&self.target_embeddings, &self.target_corpus, "target"),
        ] {
            match (emb, corpus) {
                (Some(p), _) | (None, Some(p)) => require_file(p)?,
                (None, None) => {
                    return Err(CliError::Usage(format!(
                        "config needs {lang}_embeddings or {lang}_corpus"
                    )))
                }
            }
        }
        Ok((method, context, rule))
    }
}

#[derive(Serialize)]
struct ExperimentReport {
    mapping: String,
    context: String,
    dictionary_pairs: usize,
    orthogonality_error: Option<f64>,
    source_test_examples: usize,
    target_test_examples: usize,
    training: Vec<TrainReport>,
    native: EvalReport,
    transfer: EvalReport,
    /// Transfer F1 over native F1.
    transfer_ratio: Option<f64>,
    sweep: Option<SweepResult>,
}

fn embeddings_for(
    config: &ExperimentConfig,
    pretrained: &Option<PathBuf>,
    corpus: &Option<PathBuf>,
    seed: u64,
    out: &Path,
) -> clre::Result<WordEmbeddings> {
    let emb = match (pretrained, corpus) {
        (Some(p), _) => WordEmbeddings::load(p)?,
        (None, Some(c)) => {
            let sentences = read_corpus(c, config.lowercase)?;
            train_on_sentences(&sentences, &config.cbow(seed))?.embeddings()
        }
        (None, None) => unreachable!("checked by validate"),
    };
    emb.save(out)?;
    Ok(emb)
}

pub(crate) fn run_experiment(path: &Path, seed_flag: Option<u64>) -> Result<(), CliError> {
    let mut config = ExperimentConfig::load(path)?;
    if let Some(seed) = seed_flag {
        config.seed = seed;
    }
    let (method, context, rule) = config.validate()?;
    let out = config.output_dir.clone();
    let seed = config.seed;

    if config.synthetic {
        let dir = out.join("synthetic");
        let synth = SyntheticConfig {
            vocab_size: config.synthetic_vocab_size,
            tokens: config.synthetic_tokens,
            relations: config.synthetic_relations,
            entity_types: config.synthetic_entity_types,
            re_sentences: config.synthetic_re_sentences,
            seed,
            ..SyntheticConfig::default()
        };
        stage("gen-synth", save_synthetic(&synth, &dir))?;
        config.source_corpus = Some(dir.join("source.txt"));
        config.target_corpus = Some(dir.join("target.txt"));
        config.source_data = Some(dir.join("source.jsonl"));
        config.target_data = Some(dir.join("target.jsonl"));
        config.dictionary = Some(dir.join("dictionary.tsv"));
    }

    info!("training embeddings");
    let source = stage(
        "train-embeddings",
        embeddings_for(&config, &config.source_embeddings, &config.source_corpus, seed, &out.join("source.vec")),
    )?;
    let target = stage(
        "train-embeddings",
        embeddings_for(
            &config,
            &config.target_embeddings,
            &config.target_corpus,
            seed.wrapping_add(1),
            &out.join("target.vec"),
        ),
    )?;

    let source_sentences = stage("split", load_annotated(config.source_data.as_deref().unwrap()))?;
    let target_sentences = stage("split", load_annotated(config.target_data.as_deref().unwrap()))?;
    let (labels, types) = label_sets(&source_sentences);
    let (train_set, dev_set, test_set) = stage("split", split_candidates(source_sentences, seed))?;
    let target_split = stage(
        "split",
        split_dataset(&group_documents(target_sentences), SplitRatios::default(), seed),
    )?;
    let target_dev: Vec<_> = target_split.dev.into_iter().flatten().collect();
    let target_test: Vec<_> = target_split.test.into_iter().flatten().collect();

    let settings = ReSettings {
        context,
        hidden_dim: config.hidden_dim,
        entity_dim: config.entity_dim,
        cnn_window: config.cnn_window,
        dropout: config.dropout,
        learning_rate: config.learning_rate,
        batch_size: config.batch_size,
        max_epochs: config.max_epochs,
        patience: config.patience,
        normalize: method != MappingMethod::Regular,
    };
    let mut training = Vec::new();
    let mut model_paths = Vec::new();
    for i in 0..config.ensemble_size {
        let member_seed = seed.wrapping_add(i as u64);
        let re_config = settings.config(labels.clone(), types.clone(), source.dim(), member_seed);
        info!("training source model {}/{}", i + 1, config.ensemble_size);
        let (model, report) = stage("train-re", train(&train_set, &dev_set, &source, re_config))?;
        let path = out.join(format!("model{i}.json"));
        stage("train-re", model.save(&path))?;
        training.push(report);
        model_paths.push(path);
    }
    let models = load_models(&model_paths)?;
    let native = stage("evaluate", Ensemble::new(&models, rule).and_then(|e| e.evaluate(&test_set, None)))?;

    let full_dict = stage("learn-mapping", BilingualDictionary::load(config.dictionary.as_deref().unwrap()))?;
    let dict = full_dict.truncated(config.dictionary_size);
    let options = MappingOptions {
        self_learn_iters: config.self_learn_iters,
        induction_cutoff: (config.induction_cutoff > 0).then_some(config.induction_cutoff),
        normalize: settings.normalize,
    };
    let mapping = stage("learn-mapping", learn_mapping(method, &dict, &source, &target, &options))?;
    stage("learn-mapping", mapping.save(&out.join("mapping.map")))?;

    let projected = stage("transfer", ProjectedTarget::for_model(&mapping, &models[0], &target))?;
    let records = stage("transfer", transfer_records(&models, rule, &projected, &target_test))?;
    write_records(&out.join("predictions.jsonl"), &records)?;
    let transfer = stage("evaluate", score_records(&records))?;

    let sweep = if config.sweep_sizes.is_empty() {
        None
    } else {
        let dev = candidates_for(&target_dev);
        let result = stage(
            "sweep-dict",
            dictionary_sweep(&config.sweep_sizes, &full_dict, &source, &target, &models[0], &dev),
        )?;
        write_text(&out.join("sweep.csv"), &result.to_csv())?;
        Some(result)
    };

    let report = ExperimentReport {
        mapping: method.to_string(),
        context: context.to_string(),
        dictionary_pairs: dict.len(),
        orthogonality_error: (mapping.kind() == MappingKind::Orthogonal).then(|| mapping.orthogonality_error()),
        source_test_examples: test_set.len(),
        target_test_examples: records.len(),
        training,
        transfer_ratio: (native.f1 > 0.0).then(|| transfer.f1 / native.f1),
        native,
        transfer,
        sweep,
    };
    write_json(&out.join("report.json"), &report)?;
    println!("native (source test)\n{}", report.native.table());
    println!("transfer (target test)\n{}", report.transfer.table());
    if let Some(s) = &report.sweep {
        print!("{}", s.table());
    }
    Ok(())
}
