//! JSON checkpoints: configuration, every named parameter tensor and the
//! frozen word table.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::ReConfig;
use super::params::ReParams;
use super::train::ReModel;
use crate::corpus::Vocabulary;
use crate::embeddings::WordEmbeddings;
use crate::error::{Error, Result};

const FORMAT: &str = "clre-relation-model";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Tensor {
    name: String,
    rows: usize,
    cols: usize,
    /// Column-major.
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct WordTable {
    dim: usize,
    words: Vec<String>,
    /// Column-major, one column per word.
    vectors: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    config: ReConfig,
    tensors: Vec<Tensor>,
    words: WordTable,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::Validation(format!("bad checkpoint: {}", msg.into()))
}

impl ReModel {
    pub fn write_checkpoint<W: Write>(&self, writer: W) -> Result<()> {
        let ckpt = Checkpoint {
            format: FORMAT.into(),
            version: VERSION,
            config: self.config.clone(),
            tensors: self
                .params
                .tensors()
                .into_iter()
                .map(|(name, t)| Tensor {
                    name: name.into(),
                    rows: t.nrows(),
                    cols: t.ncols(),
                    data: t.as_slice().to_vec(),
                })
                .collect(),
            words: WordTable {
                dim: self.words.dim(),
                words: self.words.vocab.words().to_vec(),
                vectors: self.words.vectors.as_slice().to_vec(),
            },
        };
        serde_json::to_writer(writer, &ckpt).map_err(|e| Error::Numeric(format!("cannot serialize model: {e}")))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_checkpoint(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_checkpoint<R: Read>(reader: R) -> Result<Self> {
        let ckpt: Checkpoint = serde_json::from_reader(reader).map_err(|e| invalid(e.to_string()))?;
        if ckpt.format != FORMAT {
            return Err(invalid(format!("unknown format {:?}", ckpt.format)));
        }
        if ckpt.version != VERSION {
            return Err(invalid(format!("unsupported version {}", ckpt.version)));
        }
        ckpt.config.validate()?;
        let mut params = ReParams::init(&ckpt.config, &mut ChaCha8Rng::seed_from_u64(0));
        let names: Vec<&str> = params.tensors().into_iter().map(|(n, _)| n).collect();
        if names.len() != ckpt.tensors.len() {
            return Err(invalid(format!("expected {} tensors, found {}", names.len(), ckpt.tensors.len())));
        }
        for ((slot, name), stored) in params.tensors_mut().into_iter().zip(names).zip(&ckpt.tensors) {
            if stored.name != name {
                return Err(invalid(format!("expected tensor {name}, found {}", stored.name)));
            }
            if (stored.rows, stored.cols) != slot.shape() || stored.data.len() != slot.len() {
                return Err(invalid(format!("tensor {name} has the wrong shape")));
            }
            slot.copy_from_slice(&stored.data);
        }
        let table = ckpt.words;
        if table.dim != ckpt.config.word_dim || table.vectors.len() != table.dim * table.words.len() {
            return Err(invalid("word table shape does not match"));
        }
        let vocab = Vocabulary::from_ranked_words(table.words)?;
        let vectors = DMatrix::from_vec(table.dim, vocab.len(), table.vectors);
        Ok(ReModel {
            config: ckpt.config,
            params,
            words: WordEmbeddings::new(vocab, vectors)?,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_checkpoint(BufReader::new(file))
    }
}
