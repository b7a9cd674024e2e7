use log::{debug, info};
use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ReConfig;
use super::network::{backward, check_example, forward, EmbeddedExample};
use super::params::ReParams;
use crate::corpus::RelationExample;
use crate::embeddings::WordEmbeddings;
use crate::error::{Error, Result};
use crate::metrics::{evaluate, EvalReport};
use crate::numeric::argmax;

/// Examples per gradient chunk. Chunks run in parallel and are summed in
/// order, which keeps training deterministic for a fixed seed.
const CHUNK: usize = 4;

/// A trained relation extractor together with its frozen word table.
#[derive(Clone, Debug, PartialEq)]
pub struct ReModel {
    pub config: ReConfig,
    pub params: ReParams,
    pub words: WordEmbeddings,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub label_id: usize,
    pub label: String,
    pub probs: DVector<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean training loss before the first update (no dropout).
    pub initial_loss: f64,
    /// Mean minibatch loss of every epoch.
    pub epoch_losses: Vec<f64>,
    /// Dev micro-F1 after every epoch; empty without a dev set.
    pub dev_f1: Vec<f64>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
    pub epochs_run: usize,
}

/// Embeds `ex` with `lookup` and resolves its entity types against `config`.
pub fn embed_example<F>(config: &ReConfig, ex: &RelationExample, lookup: F) -> Result<EmbeddedExample>
where
    F: Fn(&str) -> DVector<f64>,
{
    let type_id = |t: &str| {
        config
            .entity_type_id(t)
            .ok_or_else(|| Error::Validation(format!("unknown entity type {t:?}")))
    };
    let embedded = EmbeddedExample {
        words: ex.tokens.iter().map(|t| lookup(t)).collect(),
        mention1: (ex.mention1.begin, ex.mention1.end),
        mention2: (ex.mention2.begin, ex.mention2.end),
        type1: type_id(&ex.mention1.entity_type)?,
        type2: type_id(&ex.mention2.entity_type)?,
    };
    check_example(config, &embedded)?;
    Ok(embedded)
}

impl ReModel {
    pub fn embed(&self, ex: &RelationExample) -> Result<EmbeddedExample> {
        embed_example(&self.config, ex, |w| self.words.lookup(w))
    }

    /// Class distribution for an already embedded example.
    pub fn probabilities(&self, ex: &EmbeddedExample) -> Result<DVector<f64>> {
        check_example(&self.config, ex)?;
        Ok(forward::<ChaCha8Rng>(&self.params, &self.config, ex, None).probs)
    }

    pub fn predict_embedded(&self, ex: &EmbeddedExample) -> Result<Prediction> {
        let probs = self.probabilities(ex)?;
        Ok(self.prediction(probs))
    }

    pub fn predict(&self, ex: &RelationExample) -> Result<Prediction> {
        self.predict_embedded(&self.embed(ex)?)
    }

    /// Arg-max label for a class distribution (lowest id on ties).
    pub fn prediction(&self, probs: DVector<f64>) -> Prediction {
        let label_id = argmax(probs.as_slice());
        Prediction {
            label_id,
            label: self.config.labels[label_id].clone(),
            probs,
        }
    }

    pub fn predict_all(&self, examples: &[RelationExample]) -> Result<Vec<Prediction>> {
        examples.par_iter().map(|ex| self.predict(ex)).collect()
    }

    pub fn evaluate(&self, examples: &[RelationExample]) -> Result<EvalReport> {
        let predicted = self.predict_all(examples)?;
        let labels: Vec<&str> = predicted.iter().map(|p| p.label.as_str()).collect();
        let gold: Vec<&str> = examples.iter().map(|e| e.label.as_str()).collect();
        evaluate(&labels, &gold)
    }
}

struct Adam {
    m: ReParams,
    v: ReParams,
    step: i32,
}

impl Adam {
    fn new(params: &ReParams) -> Self {
        Adam {
            m: params.zeros_like(),
            v: params.zeros_like(),
            step: 0,
        }
    }

    fn update(&mut self, params: &mut ReParams, grads: &ReParams, config: &ReConfig) {
        self.step += 1;
        let (b1, b2) = (config.beta1, config.beta2);
        let c1 = 1.0 - b1.powi(self.step);
        let c2 = 1.0 - b2.powi(self.step);
        let tensors = params
            .tensors_mut()
            .into_iter()
            .zip(grads.tensors())
            .zip(self.m.tensors_mut())
            .zip(self.v.tensors_mut());
        for (((p, (_, g)), m), v) in tensors {
            for (((p, &g), m), v) in p.iter_mut().zip(g.iter()).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *p -= config.learning_rate * (*m / c1) / ((*v / c2).sqrt() + config.epsilon);
            }
        }
    }
}

fn add_into(acc: &mut ReParams, other: &ReParams) {
    for (a, (_, b)) in acc.tensors_mut().into_iter().zip(other.tensors()) {
        *a += b;
    }
}

/// Loss and gradient of the mean cross-entropy over `batch`. Each example
/// carries the seed of its dropout mask; `None` disables dropout.
fn batch_gradient(
    params: &ReParams,
    config: &ReConfig,
    batch: &[(&EmbeddedExample, usize, Option<u64>)],
) -> (f64, ReParams) {
    let scale = 1.0 / batch.len() as f64;
    let partial: Vec<(f64, ReParams)> = batch
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut grads = params.zeros_like();
            let mut loss = 0.0;
            for &(ex, label, seed) in chunk {
                let mut rng = seed.map(ChaCha8Rng::seed_from_u64);
                let act = forward(params, config, ex, rng.as_mut());
                loss -= act.probs[label].max(f64::MIN_POSITIVE).ln() * scale;
                backward(params, ex, &act, label, scale, &mut grads);
            }
            (loss, grads)
        })
        .collect();
    let mut iter = partial.into_iter();
    let (mut loss, mut grads) = iter.next().unwrap_or_else(|| (0.0, params.zeros_like()));
    for (l, g) in iter {
        loss += l;
        add_into(&mut grads, &g);
    }
    (loss, grads)
}

/// Mean cross-entropy over `examples` and its gradient, without dropout.
pub fn loss_and_gradient(params: &ReParams, config: &ReConfig, examples: &[(EmbeddedExample, usize)]) -> (f64, ReParams) {
    if examples.is_empty() {
        return (0.0, params.zeros_like());
    }
    let batch: Vec<(&EmbeddedExample, usize, Option<u64>)> = examples.iter().map(|(ex, l)| (ex, *l, None)).collect();
    batch_gradient(params, config, &batch)
}

/// Mean cross-entropy without dropout.
pub fn mean_loss(params: &ReParams, config: &ReConfig, examples: &[(EmbeddedExample, usize)]) -> f64 {
    if examples.is_empty() {
        return 0.0;
    }
    let total: f64 = examples
        .par_iter()
        .map(|(ex, label)| -forward::<ChaCha8Rng>(params, config, ex, None).probs[*label].max(f64::MIN_POSITIVE).ln())
        .sum();
    total / examples.len() as f64
}

fn labelled(model: &ReModel, examples: &[RelationExample]) -> Result<Vec<(EmbeddedExample, usize)>> {
    examples
        .par_iter()
        .map(|ex| {
            let label = model
                .config
                .label_id(&ex.label)
                .ok_or_else(|| Error::Validation(format!("unknown relation label {:?}", ex.label)))?;
            Ok((model.embed(ex)?, label))
        })
        .collect()
}

fn micro_f1(model: &ReModel, examples: &[(EmbeddedExample, usize)]) -> Result<f64> {
    let predicted: Vec<usize> = examples
        .par_iter()
        .map(|(ex, _)| model.predict_embedded(ex).map(|p| p.label_id))
        .collect::<Result<_>>()?;
    let name = |id: usize| model.config.labels[id].as_str();
    let pred: Vec<&str> = predicted.iter().map(|&id| name(id)).collect();
    let gold: Vec<&str> = examples.iter().map(|(_, id)| name(*id)).collect();
    Ok(evaluate(&pred, &gold)?.f1)
}

/// Trains a relation extractor with Adam on minibatches of `train`,
/// keeping the parameters of the epoch with the best dev micro-F1. Without
/// dev data all `max_epochs` epochs run and the final parameters are kept.
///
/// The word table is length-normalized first when
/// `config.normalized_embeddings` is set.
pub fn train(
    train: &[RelationExample],
    dev: &[RelationExample],
    words: &WordEmbeddings,
    config: ReConfig,
) -> Result<(ReModel, TrainReport)> {
    config.validate()?;
    if words.dim() != config.word_dim {
        return Err(Error::Dimension(format!(
            "{}-d word table for a {}-d model",
            words.dim(),
            config.word_dim
        )));
    }
    if train.is_empty() {
        return Err(Error::Validation("no training examples".into()));
    }
    let words = if config.normalized_embeddings {
        words.normalized()?
    } else {
        words.clone()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let params = ReParams::init(&config, &mut rng);
    let mut model = ReModel { config, params, words };
    let train_set = labelled(&model, train)?;
    let dev_set = labelled(&model, dev)?;
    let config = model.config.clone();

    let mut report = TrainReport {
        initial_loss: mean_loss(&model.params, &config, &train_set),
        ..TrainReport::default()
    };
    info!(
        "training {} model on {} examples ({} dev), {} parameters",
        config.context,
        train_set.len(),
        dev_set.len(),
        model.params.parameter_count()
    );
    let mut adam = Adam::new(&model.params);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut best: Option<(f64, ReParams)> = None;
    let mut since_best = 0;
    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0;
        for idx in order.chunks(config.batch_size) {
            let batch: Vec<(&EmbeddedExample, usize, Option<u64>)> = idx
                .iter()
                .map(|&i| {
                    let seed = (config.dropout > 0.0).then(|| rng.random());
                    (&train_set[i].0, train_set[i].1, seed)
                })
                .collect();
            let (loss, grads) = batch_gradient(&model.params, &config, &batch);
            adam.update(&mut model.params, &grads, &config);
            epoch_loss += loss;
            batches += 1;
        }
        let epoch_loss = epoch_loss / batches as f64;
        report.epoch_losses.push(epoch_loss);
        report.epochs_run = epoch;
        if dev_set.is_empty() {
            debug!("epoch {epoch}: loss {epoch_loss:.5}");
            report.best_epoch = epoch;
            continue;
        }
        let f1 = micro_f1(&model, &dev_set)?;
        report.dev_f1.push(f1);
        debug!("epoch {epoch}: loss {epoch_loss:.5}, dev F1 {f1:.2}");
        if best.as_ref().is_none_or(|(b, _)| f1 > *b) {
            best = Some((f1, model.params.clone()));
            report.best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                info!("stopping after epoch {epoch}: no dev improvement for {since_best} epochs");
                break;
            }
        }
    }
    if let Some((f1, params)) = best {
        info!("keeping epoch {} (dev F1 {f1:.2})", report.best_epoch);
        model.params = params;
    }
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::super::config::ContextKind;
    use super::*;
    use crate::corpus::{EntityMention, Vocabulary};
    use nalgebra::DMatrix;

    fn toy() -> (WordEmbeddings, Vec<RelationExample>) {
        let words: Vec<String> = ["a", "b", "likes", "hates", "x"].iter().map(|s| s.to_string()).collect();
        let vocab = Vocabulary::from_ranked_words(words).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let vectors = DMatrix::from_fn(4, 5, |_, _| rng.random_range(-1.0..1.0));
        let emb = WordEmbeddings::new(vocab, vectors).unwrap();
        let mk = |verb: &str, label: &str| RelationExample {
            tokens: vec!["a".into(), verb.into(), "b".into(), "x".into()],
            mention1: EntityMention::new(0, 0, "P"),
            mention2: EntityMention::new(2, 2, "P"),
            label: label.into(),
        };
        let data = (0..6)
            .flat_map(|_| [mk("likes", "like"), mk("hates", "O"), mk("x", "O")])
            .collect();
        (emb, data)
    }

    fn config(kind: ContextKind) -> ReConfig {
        let mut c = ReConfig::new(kind, vec!["O".into(), "like".into()], vec!["P".into()]);
        c.word_dim = 4;
        c.entity_dim = 2;
        c.hidden_dim = 6;
        c.dropout = 0.0;
        c.learning_rate = 0.05;
        c.batch_size = 4;
        c.max_epochs = 40;
        c
    }

    #[test]
    fn fits_a_toy_problem() {
        let (emb, data) = toy();
        for kind in [ContextKind::PassThrough, ContextKind::BiLstm, ContextKind::Cnn] {
            let (model, report) = train(&data, &[], &emb, config(kind)).unwrap();
            assert_eq!(report.epochs_run, 40);
            assert!(report.epoch_losses.last().unwrap() < &report.initial_loss, "{kind}");
            assert_eq!(model.evaluate(&data).unwrap().f1, 100.0, "{kind}");
        }
    }

    #[test]
    fn same_seed_same_model() {
        let (emb, data) = toy();
        let mut c = config(ContextKind::BiLstm);
        c.dropout = 0.3;
        c.max_epochs = 3;
        let a = train(&data, &data, &emb, c.clone()).unwrap();
        let b = train(&data, &data, &emb, c).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn early_stopping_respects_patience() {
        let (emb, data) = toy();
        let mut c = config(ContextKind::PassThrough);
        c.patience = 2;
        c.max_epochs = 200;
        let (_, report) = train(&data, &data, &emb, c).unwrap();
        assert!(report.epochs_run < 200);
        assert_eq!(report.epochs_run, report.best_epoch + 2);
        assert_eq!(report.dev_f1[report.best_epoch - 1], 100.0);
    }

    #[test]
    fn rejects_unknown_labels_and_types() {
        let (emb, mut data) = toy();
        data[0].label = "other".into();
        assert!(matches!(train(&data, &[], &emb, config(ContextKind::Cnn)), Err(Error::Validation(_))));
        let (emb, mut data) = toy();
        data[0].mention1.entity_type = "Q".into();
        assert!(train(&data, &[], &emb, config(ContextKind::Cnn)).is_err());
    }

    #[test]
    fn rejects_dimension_mismatch() {
        let (emb, data) = toy();
        let mut c = config(ContextKind::Cnn);
        c.word_dim = 5;
        assert!(matches!(train(&data, &[], &emb, c), Err(Error::Dimension(_))));
    }
}
