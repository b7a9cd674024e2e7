//! Monolingual word embeddings: a CBOW variant with one input matrix per
//! context offset and `1/|j|` distance weights, trained with a full softmax,
//! plus the word2vec-style text format used to exchange embeddings.
//!
//! Matrices are `d x V` and column `i` belongs to word id `i`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{TokenizedCorpus, Vocabulary};
use crate::error::{Error, Result};
use crate::numeric::{axpy, dot, softmax_in_place};

/// A vocabulary paired with one `d`-dimensional vector per word.
#[derive(Clone, Debug, PartialEq)]
pub struct WordEmbeddings {
    pub vocab: Vocabulary,
    /// `d x V`
    pub vectors: DMatrix<f64>,
}

impl WordEmbeddings {
    pub fn new(vocab: Vocabulary, vectors: DMatrix<f64>) -> Result<Self> {
        if vectors.ncols() != vocab.len() {
            return Err(Error::Dimension(format!(
                "{} vectors for {} words",
                vectors.ncols(),
                vocab.len()
            )));
        }
        Ok(WordEmbeddings { vocab, vectors })
    }

    pub fn dim(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    pub fn vector(&self, id: usize) -> &[f64] {
        let d = self.dim();
        &self.vectors.as_slice()[id * d..(id + 1) * d]
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.vocab.id(word).map(|id| self.vector(id))
    }

    /// Vector of `word`, or the zero vector for out-of-vocabulary words.
    pub fn lookup(&self, word: &str) -> DVector<f64> {
        match self.get(word) {
            Some(v) => DVector::from_column_slice(v),
            None => DVector::zeros(self.dim()),
        }
    }

    /// Unit-length copy. Fails on the first zero vector, naming its word.
    pub fn normalized(&self) -> Result<Self> {
        let vectors = crate::mapping::unit_columns(&self.vectors)
            .map_err(|id| Error::ZeroVector(format!("word {:?}", self.vocab.word(id))))?;
        Ok(WordEmbeddings {
            vocab: self.vocab.clone(),
            vectors,
        })
    }

    pub fn write<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{} {}", self.len(), self.dim())?;
        for (id, word) in self.vocab.words().iter().enumerate() {
            out.write_all(word.as_bytes())?;
            for x in self.vector(id) {
                write!(out, " {x:.8e}")?;
            }
            out.write_all(b"\n")?;
        }
        out.flush()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write(BufWriter::new(file)).map_err(|e| Error::io(path, e))
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        const WHAT: &str = "embedding file";
        let mut lines = reader.lines();
        let header = match lines.next() {
            Some(line) => line.map_err(|e| Error::parse(WHAT, 1, e.to_string()))?,
            None => return Err(Error::parse(WHAT, 1, "missing `V d` header")),
        };
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::parse(WHAT, 1, "header must be two integers `V d`"))?;
        let [n_words, dim] = dims[..] else {
            return Err(Error::parse(WHAT, 1, "header must be two integers `V d`"));
        };

        let mut words = Vec::with_capacity(n_words);
        let mut data = Vec::with_capacity(n_words * dim);
        for (i, line) in lines.enumerate() {
            let line_no = i + 2;
            let line = line.map_err(|e| Error::parse(WHAT, line_no, e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            if words.len() == n_words {
                return Err(Error::parse(WHAT, line_no, format!("more than {n_words} rows")));
            }
            let mut fields = line.split(' ').filter(|f| !f.is_empty());
            let word = fields.next().expect("non-empty line has a field");
            let start = data.len();
            for f in fields {
                let x: f64 = f
                    .parse()
                    .map_err(|_| Error::parse(WHAT, line_no, format!("bad number {f:?}")))?;
                data.push(x);
            }
            if data.len() - start != dim {
                return Err(Error::parse(
                    WHAT,
                    line_no,
                    format!("expected {dim} components, found {}", data.len() - start),
                ));
            }
            words.push(word.to_owned());
        }
        if words.len() != n_words {
            return Err(Error::parse(
                WHAT,
                words.len() + 2,
                format!("header promises {n_words} rows, found {}", words.len()),
            ));
        }
        let vocab = Vocabulary::from_ranked_words(words)?;
        WordEmbeddings::new(vocab, DMatrix::from_vec(dim, n_words, data))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(BufReader::new(file)).map_err(|e| match e {
            Error::Parse { line, message, .. } => Error::Parse {
                what: path.display().to_string(),
                line,
                message,
            },
            other => other,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CbowConfig {
    pub dim: usize,
    /// Context half-width `c`; there are `2c` input matrices.
    pub window: usize,
    pub epochs: usize,
    /// Initial SGD step, decayed linearly towards zero over training.
    pub learning_rate: f64,
    pub min_count: u64,
    pub seed: u64,
}

impl Default for CbowConfig {
    fn default() -> Self {
        CbowConfig {
            dim: 300,
            window: 5,
            epochs: 5,
            learning_rate: 0.025,
            min_count: 1,
            seed: 1,
        }
    }
}

impl CbowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.window == 0 {
            return Err(Error::Config("dim and window must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        Ok(())
    }
}

/// Output matrix `X` (the word embeddings) and the per-offset input matrices
/// `X~_j`, stored in offset order `-c, .., -1, 1, .., c`.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingModel {
    pub vocab: Vocabulary,
    pub window: usize,
    pub output: DMatrix<f64>,
    pub inputs: Vec<DMatrix<f64>>,
}

/// Gradient of the average log-likelihood, shaped like the model.
#[derive(Clone, Debug)]
pub struct CbowGradient {
    pub output: DMatrix<f64>,
    pub inputs: Vec<DMatrix<f64>>,
}

fn slot_of(offset: isize, window: usize) -> usize {
    let c = window as isize;
    (if offset < 0 { offset + c } else { offset + c - 1 }) as usize
}

struct Scratch {
    context: Vec<f64>,
    probs: Vec<f64>,
    grad_context: Vec<f64>,
}

impl EmbeddingModel {
    /// Uniform initialization in `[-0.5/d, 0.5/d]` for every entry.
    pub fn random(vocab: Vocabulary, dim: usize, window: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = vocab.len();
        let bound = 0.5 / dim as f64;
        let draw = |rng: &mut ChaCha8Rng| {
            DMatrix::from_fn(dim, v, |_, _| rng.random_range(-bound..=bound))
        };
        let output = draw(&mut rng);
        let inputs = (0..2 * window).map(|_| draw(&mut rng)).collect();
        EmbeddingModel {
            vocab,
            window,
            output,
            inputs,
        }
    }

    pub fn dim(&self) -> usize {
        self.output.nrows()
    }

    /// Offsets paired with their matrix slot, in storage order.
    pub fn offsets(&self) -> impl Iterator<Item = (usize, isize)> {
        let c = self.window as isize;
        (-c..=c).filter(|&j| j != 0).enumerate()
    }

    pub fn input_matrix(&self, offset: isize) -> &DMatrix<f64> {
        let c = self.window as isize;
        assert!(offset != 0 && offset.abs() <= c, "offset {offset} outside window");
        &self.inputs[slot_of(offset, self.window)]
    }

    /// `sum_{j != 0, |j| <= c} (1/|j|) X~_j[:, w_{t+j}]` over in-sentence offsets.
    pub fn context_vector(&self, sentence: &[usize], t: usize) -> DVector<f64> {
        let mut ctx = vec![0.0; self.dim()];
        self.fill_context(sentence, t, &mut ctx);
        DVector::from_vec(ctx)
    }

    fn fill_context(&self, sentence: &[usize], t: usize, ctx: &mut [f64]) {
        let d = self.dim();
        ctx.fill(0.0);
        for (slot, j) in self.offsets() {
            let Some(pos) = t.checked_add_signed(j).filter(|&p| p < sentence.len()) else {
                continue;
            };
            let w = sentence[pos];
            let col = &self.inputs[slot].as_slice()[w * d..(w + 1) * d];
            axpy(1.0 / j.unsigned_abs() as f64, col, ctx);
        }
    }

    /// Softmax over `x_i . ctx` for every word `i`.
    pub fn target_probability(&self, context: &DVector<f64>) -> DVector<f64> {
        let mut p = self.logits(context.as_slice());
        softmax_in_place(&mut p);
        DVector::from_vec(p)
    }

    fn logits(&self, ctx: &[f64]) -> Vec<f64> {
        let d = self.dim();
        self.output
            .as_slice()
            .chunks_exact(d)
            .map(|x| dot(x, ctx))
            .collect()
    }

    /// Log-probability of `sentence[t]`, leaving the context vector, the
    /// softmax and `d log p / d ctx` in `scratch`.
    fn position(&self, sentence: &[usize], t: usize, s: &mut Scratch) -> f64 {
        let d = self.dim();
        self.fill_context(sentence, t, &mut s.context);
        let out = self.output.as_slice();
        for (p, x) in s.probs.iter_mut().zip(out.chunks_exact(d)) {
            *p = dot(x, &s.context);
        }
        let target = sentence[t];
        let logit = s.probs[target];
        let log_p = logit - softmax_in_place(&mut s.probs);

        s.grad_context.copy_from_slice(&out[target * d..(target + 1) * d]);
        for (p, x) in s.probs.iter().zip(out.chunks_exact(d)) {
            axpy(-p, x, &mut s.grad_context);
        }
        log_p
    }

    fn scratch(&self) -> Scratch {
        Scratch {
            context: vec![0.0; self.dim()],
            probs: vec![0.0; self.vocab.len()],
            grad_context: vec![0.0; self.dim()],
        }
    }

    /// Average log-likelihood `(1/N) sum_t log P(w_t | context)`.
    pub fn log_likelihood(&self, corpus: &TokenizedCorpus) -> f64 {
        if corpus.token_total == 0 {
            return 0.0;
        }
        let mut s = self.scratch();
        let mut total = 0.0;
        for sentence in &corpus.sentences {
            for t in 0..sentence.len() {
                total += self.position(sentence, t, &mut s);
            }
        }
        total / corpus.token_total as f64
    }

    /// Average log-likelihood and its exact gradient.
    pub fn objective_gradient(&self, corpus: &TokenizedCorpus) -> (f64, CbowGradient) {
        let d = self.dim();
        let mut grad = CbowGradient {
            output: DMatrix::zeros(d, self.vocab.len()),
            inputs: vec![DMatrix::zeros(d, self.vocab.len()); self.inputs.len()],
        };
        if corpus.token_total == 0 {
            return (0.0, grad);
        }
        let scale = 1.0 / corpus.token_total as f64;
        let mut s = self.scratch();
        let mut total = 0.0;
        for sentence in &corpus.sentences {
            for t in 0..sentence.len() {
                total += self.position(sentence, t, &mut s);
                let g_out = grad.output.as_mut_slice();
                let target = sentence[t];
                for (i, col) in g_out.chunks_exact_mut(d).enumerate() {
                    let coeff = f64::from(u8::from(i == target)) - s.probs[i];
                    axpy(scale * coeff, &s.context, col);
                }
                for (slot, j) in self.offsets() {
                    let Some(pos) = t.checked_add_signed(j).filter(|&p| p < sentence.len()) else {
                        continue;
                    };
                    let w = sentence[pos];
                    let col = &mut grad.inputs[slot].as_mut_slice()[w * d..(w + 1) * d];
                    axpy(scale / j.unsigned_abs() as f64, &s.grad_context, col);
                }
            }
        }
        (total * scale, grad)
    }

    /// One stochastic ascent step on position `t`; returns its log-probability.
    fn sgd_step(&mut self, sentence: &[usize], t: usize, lr: f64, s: &mut Scratch) -> f64 {
        let d = self.dim();
        let log_p = self.position(sentence, t, s);
        let target = sentence[t];
        for (i, col) in self.output.as_mut_slice().chunks_exact_mut(d).enumerate() {
            let coeff = f64::from(u8::from(i == target)) - s.probs[i];
            axpy(lr * coeff, &s.context, col);
        }
        let c = self.window as isize;
        for j in (-c..=c).filter(|&j| j != 0) {
            let Some(pos) = t.checked_add_signed(j).filter(|&p| p < sentence.len()) else {
                continue;
            };
            let slot = slot_of(j, self.window);
            let w = sentence[pos];
            let col = &mut self.inputs[slot].as_mut_slice()[w * d..(w + 1) * d];
            axpy(lr / j.unsigned_abs() as f64, &s.grad_context, col);
        }
        log_p
    }

    /// The exported word embeddings: the output matrix `X`.
    pub fn embeddings(&self) -> WordEmbeddings {
        WordEmbeddings {
            vocab: self.vocab.clone(),
            vectors: self.output.clone(),
        }
    }
}

/// Trains the CBOW variant by SGD on the average log-likelihood. Deterministic
/// for a fixed seed: sentences are visited in corpus order.
pub fn train_cbow(corpus: &TokenizedCorpus, vocab: Vocabulary, config: &CbowConfig) -> Result<EmbeddingModel> {
    train(corpus, vocab, config, false).map(|(model, _)| model)
}

/// Like [`train_cbow`], also returning the average log-likelihood before
/// training and after every epoch.
pub fn train_cbow_monitored(
    corpus: &TokenizedCorpus,
    vocab: Vocabulary,
    config: &CbowConfig,
) -> Result<(EmbeddingModel, Vec<f64>)> {
    train(corpus, vocab, config, true)
}

fn train(
    corpus: &TokenizedCorpus,
    vocab: Vocabulary,
    config: &CbowConfig,
    monitor: bool,
) -> Result<(EmbeddingModel, Vec<f64>)> {
    config.validate()?;
    if vocab.len() < 2 {
        return Err(Error::Config(format!(
            "CBOW training needs at least 2 vocabulary words, got {}",
            vocab.len()
        )));
    }
    if corpus.token_total == 0 {
        return Err(Error::Validation("empty training corpus".into()));
    }
    if let Some(bad) = corpus.sentences.iter().flatten().find(|&&w| w >= vocab.len()) {
        return Err(Error::Validation(format!("token id {bad} outside vocabulary")));
    }

    let mut model = EmbeddingModel::random(vocab, config.dim, config.window, config.seed);
    let mut trace = Vec::new();
    if monitor {
        trace.push(model.log_likelihood(corpus));
    }
    let total_steps = (config.epochs * corpus.token_total) as f64;
    let floor = config.learning_rate * 1e-4;
    let mut step = 0usize;
    let mut s = model.scratch();
    for epoch in 0..config.epochs {
        let mut running = 0.0;
        for sentence in &corpus.sentences {
            for t in 0..sentence.len() {
                let lr = (config.learning_rate * (1.0 - step as f64 / total_steps)).max(floor);
                running += model.sgd_step(sentence, t, lr, &mut s);
                step += 1;
            }
        }
        log::info!(
            "cbow epoch {}/{}: running log-likelihood {:.5}",
            epoch + 1,
            config.epochs,
            running / corpus.token_total as f64
        );
        if monitor {
            trace.push(model.log_likelihood(corpus));
        }
    }
    Ok((model, trace))
}

/// Builds the vocabulary with `config.min_count` and trains on raw sentences.
pub fn train_on_sentences(sentences: &[Vec<String>], config: &CbowConfig) -> Result<EmbeddingModel> {
    let vocab = Vocabulary::build(sentences, config.min_count);
    let corpus = TokenizedCorpus::new(sentences, &vocab);
    train_cbow(&corpus, vocab, config)
}
