use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::NONE_LABEL;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextKind {
    /// Word embeddings go straight to the pooling layer.
    PassThrough,
    BiLstm,
    Cnn,
}

impl fmt::Display for ContextKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ContextKind::PassThrough => "pass",
            ContextKind::BiLstm => "bilstm",
            ContextKind::Cnn => "cnn",
        })
    }
}

impl FromStr for ContextKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pass" | "pass_through" | "pass-through" => Ok(ContextKind::PassThrough),
            "bilstm" | "bi_lstm" => Ok(ContextKind::BiLstm),
            "cnn" => Ok(ContextKind::Cnn),
            other => Err(Error::Config(format!("unknown context layer {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReConfig {
    pub context: ContextKind,
    pub word_dim: usize,
    pub entity_dim: usize,
    /// LSTM units per direction, or CNN filters.
    pub hidden_dim: usize,
    pub cnn_window: usize,
    pub dropout: f64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a dev micro-F1 improvement before stopping.
    pub patience: usize,
    pub seed: u64,
    /// Whether the frozen word table was length-normalized (required for
    /// use with orthogonal mappings).
    pub normalized_embeddings: bool,
    /// Relation labels, including `O`. Order fixes label ids.
    pub labels: Vec<String>,
    pub entity_types: Vec<String>,
}

impl ReConfig {
    /// Defaults for `context`: 300-d words, 50-d entity labels, 200 LSTM
    /// units per direction or 300 CNN filters with window 3.
    pub fn new(context: ContextKind, labels: Vec<String>, entity_types: Vec<String>) -> Self {
        let hidden_dim = match context {
            ContextKind::BiLstm => 200,
            ContextKind::Cnn => 300,
            ContextKind::PassThrough => 0,
        };
        ReConfig {
            context,
            word_dim: 300,
            entity_dim: 50,
            hidden_dim,
            cnn_window: 3,
            dropout: 0.5,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 16,
            max_epochs: 50,
            patience: 5,
            seed: 1,
            normalized_embeddings: false,
            labels,
            entity_types,
        }
    }

    /// Width of each context-layer output vector.
    pub fn context_dim(&self) -> usize {
        match self.context {
            ContextKind::PassThrough => self.word_dim,
            ContextKind::BiLstm => 2 * self.hidden_dim,
            ContextKind::Cnn => self.hidden_dim,
        }
    }

    /// Width of the pooled sentence summary (five groups).
    pub fn summary_dim(&self) -> usize {
        5 * self.context_dim()
    }

    pub fn label_id(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn entity_type_id(&self, entity_type: &str) -> Option<usize> {
        self.entity_types.iter().position(|t| t == entity_type)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_owned()));
        if self.word_dim == 0 || self.entity_dim == 0 {
            return bad("word_dim and entity_dim must be at least 1");
        }
        if self.context != ContextKind::PassThrough && self.hidden_dim == 0 {
            return bad("hidden_dim must be at least 1");
        }
        if self.context == ContextKind::Cnn && self.cnn_window.is_multiple_of(2) {
            return bad("cnn_window must be odd");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if !(self.learning_rate > 0.0) || self.batch_size == 0 {
            return bad("learning_rate and batch_size must be positive");
        }
        if self.labels.len() < 2 {
            return bad("need at least two labels");
        }
        if self.label_id(NONE_LABEL).is_none() {
            return bad("label set must contain O");
        }
        if self.entity_types.is_empty() {
            return bad("entity type set is empty");
        }
        let mut seen = std::collections::HashSet::new();
        if !self.labels.iter().all(|l| seen.insert(l)) {
            return bad("duplicate relation label");
        }
        seen.clear();
        if !self.entity_types.iter().all(|t| seen.insert(t)) {
            return bad("duplicate entity type");
        }
        Ok(())
    }
}
