use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use clre::mapping::DEFAULT_INDUCTION_CUTOFF;
use clre::pipeline::{EnsembleRule, MappingMethod, DEFAULT_SELF_LEARN_ITERS};
use clre::remodel::ContextKind;

#[derive(Parser, Debug)]
#[command(name = "clre", version, about = "Cross-lingual relation extraction via bilingual embedding mapping")]
pub struct Cli {
    /// Seed for every stochastic step (default 1).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train CBOW-variant word embeddings on a tokenized corpus.
    TrainEmbeddings(TrainEmbeddings),
    /// Learn a target-to-source mapping from a bilingual dictionary.
    LearnMapping(LearnMapping),
    /// Train a relation extraction model on annotated source data.
    TrainRe(TrainRe),
    /// Classify target-language candidates with a source-language model.
    Transfer(Transfer),
    /// Score predictions, or a model on annotated data.
    Evaluate(Evaluate),
    /// Transfer F1 as a function of dictionary size.
    SweepDict(SweepDict),
    /// Write the synthetic bilingual benchmark.
    GenSynth(GenSynth),
    /// Run the whole protocol from a config file.
    RunExperiment(RunExperiment),
}

#[derive(Args, Debug)]
pub struct TrainEmbeddings {
    /// Whitespace-tokenized text, one sentence per line.
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 300)]
    pub dim: usize,
    #[arg(long, default_value_t = 5)]
    pub window: usize,
    #[arg(long, default_value_t = 5)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.025)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 1)]
    pub min_count: u64,
    #[arg(long)]
    pub lowercase: bool,
}

#[derive(Args, Debug)]
pub struct LearnMapping {
    /// Tab-separated `source<TAB>target` pairs.
    #[arg(long)]
    pub dict: PathBuf,
    #[arg(long)]
    pub src: PathBuf,
    #[arg(long)]
    pub tgt: PathBuf,
    #[arg(long, default_value = "regular")]
    pub kind: MappingMethod,
    #[arg(long)]
    pub out: PathBuf,
    /// Use only the first N dictionary pairs.
    #[arg(long)]
    pub size: Option<usize>,
    /// Fit a regular mapping between length-normalized spaces.
    #[arg(long)]
    pub normalize: bool,
    #[arg(long, default_value_t = DEFAULT_SELF_LEARN_ITERS)]
    pub max_iters: usize,
    /// Most frequent words considered during induction (0 = all).
    #[arg(long, default_value_t = DEFAULT_INDUCTION_CUTOFF)]
    pub cutoff: usize,
}

#[derive(Args, Debug)]
pub struct TrainRe {
    /// Annotated sentences (JSON lines); split 80/10/10 by document.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long, default_value = "bilstm")]
    pub context: ContextKind,
    #[arg(long)]
    pub out: PathBuf,
    /// Training report and test scores (JSON).
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    #[arg(long, default_value_t = 50)]
    pub entity_dim: usize,
    #[arg(long, default_value_t = 3)]
    pub cnn_window: usize,
    #[arg(long, default_value_t = 0.5)]
    pub dropout: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 16)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 50)]
    pub max_epochs: usize,
    #[arg(long, default_value_t = 5)]
    pub patience: usize,
    /// Train on length-normalized embeddings (for orthogonal mappings).
    #[arg(long)]
    pub normalize: bool,
}

#[derive(Args, Debug)]
pub struct Transfer {
    /// Source-language model; repeat for an ensemble.
    #[arg(long = "model", required = true)]
    pub models: Vec<PathBuf>,
    #[arg(long)]
    pub mapping: PathBuf,
    /// Target-language embeddings.
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Annotated target-language sentences.
    #[arg(long)]
    pub data: PathBuf,
    /// Predictions (JSON lines).
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "max")]
    pub rule: EnsembleRule,
    /// Scores against the gold labels in `--data` (JSON).
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct Evaluate {
    /// Predictions written by `transfer`.
    #[arg(long, conflicts_with_all = ["model", "data"], required_unless_present = "model")]
    pub predictions: Option<PathBuf>,
    #[arg(long, requires = "data")]
    pub model: Option<PathBuf>,
    /// Annotated sentences to score the model on.
    #[arg(long, requires = "model")]
    pub data: Option<PathBuf>,
    /// Report file (JSON); the table always goes to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SweepDict {
    /// Dictionary ordered by target-word frequency.
    #[arg(long)]
    pub dict: PathBuf,
    #[arg(long)]
    pub src: PathBuf,
    #[arg(long)]
    pub tgt: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    /// Annotated target-language dev sentences.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "100,200,500,1000,2000")]
    pub sizes: Vec<usize>,
    /// `size,f1` rows.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct GenSynth {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 2000)]
    pub vocab_size: usize,
    #[arg(long, default_value_t = 200_000)]
    pub tokens: usize,
    #[arg(long, default_value_t = 4)]
    pub relations: usize,
    #[arg(long, default_value_t = 3)]
    pub entity_types: usize,
    #[arg(long, default_value_t = 4000)]
    pub re_sentences: usize,
}

#[derive(Args, Debug)]
pub struct RunExperiment {
    /// TOML file of flat `key = value` settings.
    #[arg(long)]
    pub config: PathBuf,
}
