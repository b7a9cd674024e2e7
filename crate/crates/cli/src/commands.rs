use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use log::info;
use serde::{Deserialize, Serialize};

use clre::corpus::{
    candidates_for, generate_candidates, group_documents, load_annotated, read_corpus, split_dataset,
    AnnotatedSentence, BilingualDictionary, RelationExample, SplitRatios, Vocabulary, NONE_LABEL,
};
use clre::embeddings::{train_on_sentences, CbowConfig, WordEmbeddings};
use clre::mapping::MappingMatrix;
use clre::metrics::{evaluate, EvalReport};
use clre::pipeline::{
    dictionary_sweep, generate_synthetic, learn_mapping, Ensemble, EnsembleRule, MappingOptions, ProjectedTarget,
    SyntheticConfig,
};
use clre::remodel::{train, ReConfig, ReModel, TrainReport};
use clre::Error;

use crate::args::{self, Cli, Command};
use crate::{stage, CliError, DEFAULT_SEED};

pub(crate) fn dispatch(cli: Cli) -> Result<(), CliError> {
    let seed = cli.seed;
    let fixed = seed.unwrap_or(DEFAULT_SEED);
    match cli.command {
        Command::TrainEmbeddings(a) => train_embeddings(a, fixed),
        Command::LearnMapping(a) => learn_mapping_cmd(a),
        Command::TrainRe(a) => train_re(a, fixed),
        Command::Transfer(a) => transfer(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::SweepDict(a) => sweep_dict(a),
        Command::GenSynth(a) => gen_synth(a, fixed),
        Command::RunExperiment(a) => crate::experiment::run_experiment(&a.config, seed),
    }
}

pub(crate) fn require_file(path: &Path) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("input file {} does not exist", path.display())))
    }
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Numeric(format!("cannot serialize {}: {e}", path.display())))?;
    text.push('\n');
    write_text(path, &text)
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e).into())
}

/// `O` followed by every other relation label, sorted; entity types sorted.
pub(crate) fn label_sets(sentences: &[AnnotatedSentence]) -> (Vec<String>, Vec<String>) {
    let relations: BTreeSet<&str> = sentences
        .iter()
        .flat_map(|s| s.relations.iter().map(|r| r.label.as_str()))
        .filter(|l| *l != NONE_LABEL)
        .collect();
    let types: BTreeSet<&str> = sentences
        .iter()
        .flat_map(|s| s.mentions.iter().map(|m| m.entity_type.as_str()))
        .collect();
    let labels = std::iter::once(NONE_LABEL).chain(relations).map(String::from).collect();
    (labels, types.into_iter().map(String::from).collect())
}

/// Document-level 80/10/10 split, as relation candidates.
pub(crate) fn split_candidates(
    sentences: Vec<AnnotatedSentence>,
    seed: u64,
) -> clre::Result<(Vec<RelationExample>, Vec<RelationExample>, Vec<RelationExample>)> {
    let docs = group_documents(sentences);
    let split = split_dataset(&docs, SplitRatios::default(), seed)?;
    let flat = |part: Vec<Vec<AnnotatedSentence>>| candidates_for(&part.into_iter().flatten().collect::<Vec<_>>());
    Ok((flat(split.train), flat(split.dev), flat(split.test)))
}

fn train_embeddings(a: args::TrainEmbeddings, seed: u64) -> Result<(), CliError> {
    require_file(&a.corpus)?;
    let config = CbowConfig {
        dim: a.dim,
        window: a.window,
        epochs: a.epochs,
        learning_rate: a.learning_rate,
        min_count: a.min_count,
        seed,
    };
    config.validate()?;
    let sentences = read_corpus(&a.corpus, a.lowercase)?;
    let model = train_on_sentences(&sentences, &config)?;
    model.embeddings().save(&a.out)?;
    info!("wrote {} vectors to {}", model.vocab.len(), a.out.display());
    Ok(())
}

fn learn_mapping_cmd(a: args::LearnMapping) -> Result<(), CliError> {
    for p in [&a.dict, &a.src, &a.tgt] {
        require_file(p)?;
    }
    let mut dict = BilingualDictionary::load(&a.dict)?;
    if let Some(n) = a.size {
        dict = dict.truncated(n);
    }
    let source = WordEmbeddings::load(&a.src)?;
    let target = WordEmbeddings::load(&a.tgt)?;
    let options = MappingOptions {
        self_learn_iters: a.max_iters,
        induction_cutoff: (a.cutoff > 0).then_some(a.cutoff),
        normalize: a.normalize,
    };
    let mapping = learn_mapping(a.kind, &dict, &source, &target, &options)?;
    mapping.save(&a.out)?;
    info!(
        "wrote {} mapping, orthogonality error {:.3e}",
        mapping.kind(),
        mapping.orthogonality_error()
    );
    Ok(())
}

#[derive(Serialize)]
struct TrainReReport<'a> {
    context: String,
    train_examples: usize,
    dev_examples: usize,
    test_examples: usize,
    training: &'a TrainReport,
    test: &'a EvalReport,
}

pub(crate) struct ReSettings {
    pub context: clre::remodel::ContextKind,
    pub hidden_dim: Option<usize>,
    pub entity_dim: usize,
    pub cnn_window: usize,
    pub dropout: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub normalize: bool,
}

impl ReSettings {
    pub(crate) fn config(&self, labels: Vec<String>, types: Vec<String>, word_dim: usize, seed: u64) -> ReConfig {
        let mut c = ReConfig::new(self.context, labels, types);
        if let Some(h) = self.hidden_dim {
            c.hidden_dim = h;
        }
        c.word_dim = word_dim;
        c.entity_dim = self.entity_dim;
        c.cnn_window = self.cnn_window;
        c.dropout = self.dropout;
        c.learning_rate = self.learning_rate;
        c.batch_size = self.batch_size;
        c.max_epochs = self.max_epochs;
        c.patience = self.patience;
        c.normalized_embeddings = self.normalize;
        c.seed = seed;
        c
    }
}

fn train_re(a: args::TrainRe, seed: u64) -> Result<(), CliError> {
    require_file(&a.data)?;
    require_file(&a.embeddings)?;
    let sentences = load_annotated(&a.data)?;
    let words = WordEmbeddings::load(&a.embeddings)?;
    let (labels, types) = label_sets(&sentences);
    let settings = ReSettings {
        context: a.context,
        hidden_dim: a.hidden_dim,
        entity_dim: a.entity_dim,
        cnn_window: a.cnn_window,
        dropout: a.dropout,
        learning_rate: a.learning_rate,
        batch_size: a.batch_size,
        max_epochs: a.max_epochs,
        patience: a.patience,
        normalize: a.normalize,
    };
    let config = settings.config(labels, types, words.dim(), seed);
    config.validate()?;
    let (tr, dev, test) = split_candidates(sentences, seed)?;
    let (model, report) = train(&tr, &dev, &words, config)?;
    model.save(&a.out)?;
    let scores = model.evaluate(&test)?;
    print!("{}", scores.table());
    if let Some(path) = &a.report {
        write_json(
            path,
            &TrainReReport {
                context: a.context.to_string(),
                train_examples: tr.len(),
                dev_examples: dev.len(),
                test_examples: test.len(),
                training: &report,
                test: &scores,
            },
        )?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub(crate) struct PredictionRecord {
    pub sentence: usize,
    pub mention1: [usize; 2],
    pub mention2: [usize; 2],
    pub label: String,
    pub gold: String,
    pub probabilities: BTreeMap<String, f64>,
}

pub(crate) fn load_models(paths: &[impl AsRef<Path>]) -> Result<Vec<ReModel>, CliError> {
    paths
        .iter()
        .map(|p| {
            require_file(p.as_ref())?;
            Ok(ReModel::load(p.as_ref())?)
        })
        .collect()
}

/// Transfer predictions for every candidate of `sentences`.
pub(crate) fn transfer_records(
    models: &[ReModel],
    rule: EnsembleRule,
    target: &ProjectedTarget,
    sentences: &[AnnotatedSentence],
) -> clre::Result<Vec<PredictionRecord>> {
    let ensemble = Ensemble::new(models, rule)?;
    let labels = &models[0].config.labels;
    let mut out = Vec::new();
    for (i, s) in sentences.iter().enumerate() {
        for ex in generate_candidates(s) {
            let p = ensemble.predict_transfer(target, &ex)?;
            out.push(PredictionRecord {
                sentence: i,
                mention1: [ex.mention1.begin, ex.mention1.end],
                mention2: [ex.mention2.begin, ex.mention2.end],
                label: p.label,
                gold: ex.label,
                probabilities: labels.iter().cloned().zip(p.probs.iter().copied()).collect(),
            });
        }
    }
    Ok(out)
}

pub(crate) fn write_records(path: &Path, records: &[PredictionRecord]) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        let line = serde_json::to_string(r).map_err(|e| Error::Numeric(e.to_string()))?;
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e).into())
}

fn read_records(path: &Path) -> Result<Vec<PredictionRecord>, CliError> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let r = serde_json::from_str(&line).map_err(|e| Error::Parse {
            what: "predictions".into(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(r);
    }
    Ok(out)
}

pub(crate) fn score_records(records: &[PredictionRecord]) -> clre::Result<EvalReport> {
    let pred: Vec<&str> = records.iter().map(|r| r.label.as_str()).collect();
    let gold: Vec<&str> = records.iter().map(|r| r.gold.as_str()).collect();
    evaluate(&pred, &gold)
}

fn transfer(a: args::Transfer) -> Result<(), CliError> {
    for p in [&a.mapping, &a.embeddings, &a.data] {
        require_file(p)?;
    }
    let models = load_models(&a.models)?;
    let mapping = MappingMatrix::load(&a.mapping)?;
    let target = WordEmbeddings::load(&a.embeddings)?;
    let sentences = load_annotated(&a.data)?;
    let projected = ProjectedTarget::for_model(&mapping, &models[0], &target)?;
    let records = transfer_records(&models, a.rule, &projected, &sentences)?;
    write_records(&a.out, &records)?;
    if let Some(path) = &a.report {
        let report = score_records(&records)?;
        print!("{}", report.table());
        write_json(path, &report)?;
    }
    Ok(())
}

fn evaluate_cmd(a: args::Evaluate) -> Result<(), CliError> {
    let report = match (&a.predictions, &a.model, &a.data) {
        (Some(p), _, _) => {
            require_file(p)?;
            score_records(&read_records(p)?)?
        }
        (None, Some(m), Some(d)) => {
            require_file(d)?;
            let model = load_models(&[m])?.remove(0);
            model.evaluate(&candidates_for(&load_annotated(d)?))?
        }
        _ => return Err(CliError::Usage("give --predictions, or --model with --data".into())),
    };
    print!("{}", report.table());
    if let Some(path) = &a.out {
        write_json(path, &report)?;
    }
    Ok(())
}

fn sweep_dict(a: args::SweepDict) -> Result<(), CliError> {
    for p in [&a.dict, &a.src, &a.tgt, &a.data] {
        require_file(p)?;
    }
    let dict = BilingualDictionary::load(&a.dict)?;
    let source = WordEmbeddings::load(&a.src)?;
    let target = WordEmbeddings::load(&a.tgt)?;
    let model = load_models(&[&a.model])?.remove(0);
    let dev = candidates_for(&load_annotated(&a.data)?);
    let result = stage("sweep-dict", dictionary_sweep(&a.sizes, &dict, &source, &target, &model, &dev))?;
    print!("{}", result.table());
    write_text(&a.out, &result.to_csv())?;
    if let Some(path) = &a.report {
        write_json(path, &result)?;
    }
    Ok(())
}

/// Writes the benchmark plus `dictionary.tsv`: planted pairs ordered by
/// target-word frequency.
pub(crate) fn save_synthetic(config: &SyntheticConfig, dir: &Path) -> clre::Result<()> {
    let bench = generate_synthetic(config)?;
    bench.save(dir)?;
    let vocab = Vocabulary::build(&bench.target_corpus, 1);
    bench.dictionary(&vocab).save(&dir.join("dictionary.tsv"))
}

fn gen_synth(a: args::GenSynth, seed: u64) -> Result<(), CliError> {
    let config = SyntheticConfig {
        vocab_size: a.vocab_size,
        tokens: a.tokens,
        relations: a.relations,
        entity_types: a.entity_types,
        re_sentences: a.re_sentences,
        seed,
        ..SyntheticConfig::default()
    };
    save_synthetic(&config, &a.out)?;
    info!("wrote synthetic benchmark to {}", a.out.display());
    Ok(())
}
