//! Cross-lingual transfer: projecting target text into the source space,
//! ensembling, the dictionary-size sweep and the mapping comparison.

mod synthetic;

use std::fmt;
use std::str::FromStr;

use log::{info, warn};
use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use synthetic::{generate_synthetic, SyntheticBenchmark, SyntheticConfig};

use crate::corpus::{BilingualDictionary, RelationExample};
use crate::embeddings::WordEmbeddings;
use crate::error::{Error, Result};
use crate::mapping::{
    learn_orthogonal, learn_regular, self_learn, AlignedPairSet, MappingKind, MappingMatrix,
    DEFAULT_INDUCTION_CUTOFF,
};
use crate::metrics::{evaluate, EvalReport};
use crate::numeric::argmax;
use crate::remodel::{embed_example, EmbeddedExample, Prediction, ReModel};

pub const DEFAULT_ENSEMBLE_SIZE: usize = 5;
pub const DEFAULT_SELF_LEARN_ITERS: usize = 10;

/// Target-language word vectors mapped into the source space.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectedTarget {
    pub embeddings: WordEmbeddings,
    pub kind: MappingKind,
    /// Whether target vectors were length-normalized before projection.
    pub normalized: bool,
}

impl ProjectedTarget {
    /// Projects every target vector with `mapping`, normalizing first when
    /// `normalize` is set.
    pub fn new(mapping: &MappingMatrix, target: &WordEmbeddings, normalize: bool) -> Result<Self> {
        if mapping.dim() != target.dim() {
            return Err(Error::Dimension(format!(
                "{}x{} mapping applied to {}-d target embeddings",
                mapping.dim(),
                mapping.dim(),
                target.dim()
            )));
        }
        let source = if normalize { target.normalized()? } else { target.clone() };
        let vectors = mapping.matrix() * &source.vectors;
        Ok(ProjectedTarget {
            embeddings: WordEmbeddings::new(source.vocab, vectors)?,
            kind: mapping.kind(),
            normalized: normalize,
        })
    }

    /// Projection matching how `model` saw its source vectors: normalized
    /// exactly when the model was trained on normalized embeddings.
    pub fn for_model(mapping: &MappingMatrix, model: &ReModel, target: &WordEmbeddings) -> Result<Self> {
        let projected = Self::new(mapping, target, model.config.normalized_embeddings)?;
        projected.check(model)?;
        Ok(projected)
    }

    pub fn check(&self, model: &ReModel) -> Result<()> {
        if self.embeddings.dim() != model.config.word_dim {
            return Err(Error::Dimension(format!(
                "{}-d projected embeddings for a {}-d model",
                self.embeddings.dim(),
                model.config.word_dim
            )));
        }
        if self.kind == MappingKind::Orthogonal && !model.config.normalized_embeddings {
            return Err(Error::Config(
                "orthogonal mappings need a model trained on normalized embeddings".into(),
            ));
        }
        if self.normalized != model.config.normalized_embeddings {
            return Err(Error::Config("target normalization does not match the model".into()));
        }
        Ok(())
    }

    /// Embeds a target example; entity label embeddings stay those of the
    /// source model.
    pub fn embed(&self, model: &ReModel, ex: &RelationExample) -> Result<EmbeddedExample> {
        embed_example(&model.config, ex, |w| self.embeddings.lookup(w))
    }

    pub fn predict(&self, model: &ReModel, ex: &RelationExample) -> Result<Prediction> {
        self.check(model)?;
        model.predict_embedded(&self.embed(model, ex)?)
    }

    pub fn evaluate(&self, model: &ReModel, examples: &[RelationExample]) -> Result<EvalReport> {
        self.check(model)?;
        let predicted: Vec<String> = examples
            .par_iter()
            .map(|ex| model.predict_embedded(&self.embed(model, ex)?).map(|p| p.label))
            .collect::<Result<_>>()?;
        evaluate(&predicted, &gold_labels(examples))
    }
}

fn gold_labels(examples: &[RelationExample]) -> Vec<&str> {
    examples.iter().map(|e| e.label.as_str()).collect()
}

/// Classifies one target-language example with a source-language model.
/// Projects the whole target table; use [`ProjectedTarget`] for many examples.
pub fn transfer_predict(
    mapping: &MappingMatrix,
    model: &ReModel,
    example: &RelationExample,
    target: &WordEmbeddings,
) -> Result<Prediction> {
    ProjectedTarget::for_model(mapping, model, target)?.predict(model, example)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleRule {
    /// Label with the highest probability under any member.
    #[default]
    Max,
    /// Label with the highest mean probability.
    Average,
}

impl fmt::Display for EnsembleRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EnsembleRule::Max => "max",
            EnsembleRule::Average => "average",
        })
    }
}

impl FromStr for EnsembleRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" => Ok(EnsembleRule::Max),
            "average" | "mean" => Ok(EnsembleRule::Average),
            other => Err(Error::Config(format!("unknown ensemble rule {other:?}"))),
        }
    }
}

/// Element-wise max or mean of the members' class distributions.
pub fn combine(distributions: &[DVector<f64>], rule: EnsembleRule) -> DVector<f64> {
    let mut out = distributions[0].clone();
    for p in &distributions[1..] {
        match rule {
            EnsembleRule::Max => out.zip_apply(p, |a, b| *a = a.max(b)),
            EnsembleRule::Average => out += p,
        }
    }
    if rule == EnsembleRule::Average {
        out /= distributions.len() as f64;
    }
    out
}

/// Models sharing a label set and entity types, combined per example.
pub struct Ensemble<'a> {
    models: &'a [ReModel],
    rule: EnsembleRule,
}

impl<'a> Ensemble<'a> {
    pub fn new(models: &'a [ReModel], rule: EnsembleRule) -> Result<Self> {
        let Some(first) = models.first() else {
            return Err(Error::Validation("an ensemble needs at least one model".into()));
        };
        for m in &models[1..] {
            if m.config.labels != first.config.labels || m.config.entity_types != first.config.entity_types {
                return Err(Error::Validation("ensemble members disagree on labels or entity types".into()));
            }
        }
        Ok(Ensemble { models, rule })
    }

    fn decide(&self, distributions: Vec<DVector<f64>>) -> Prediction {
        let probs = combine(&distributions, self.rule);
        let label_id = argmax(probs.as_slice());
        Prediction {
            label_id,
            label: self.models[0].config.labels[label_id].clone(),
            probs,
        }
    }

    /// Each member embeds the example with its own word table.
    pub fn predict(&self, ex: &RelationExample) -> Result<Prediction> {
        let dists = self
            .models
            .iter()
            .map(|m| m.probabilities(&m.embed(ex)?))
            .collect::<Result<_>>()?;
        Ok(self.decide(dists))
    }

    pub fn predict_transfer(&self, target: &ProjectedTarget, ex: &RelationExample) -> Result<Prediction> {
        let dists = self
            .models
            .iter()
            .map(|m| {
                target.check(m)?;
                m.probabilities(&target.embed(m, ex)?)
            })
            .collect::<Result<_>>()?;
        Ok(self.decide(dists))
    }

    /// Native evaluation, or transfer evaluation when `target` is given.
    pub fn evaluate(&self, examples: &[RelationExample], target: Option<&ProjectedTarget>) -> Result<EvalReport> {
        let predicted: Vec<String> = examples
            .par_iter()
            .map(|ex| match target {
                Some(t) => self.predict_transfer(t, ex),
                None => self.predict(ex),
            })
            .map(|p| p.map(|p| p.label))
            .collect::<Result<_>>()?;
        evaluate(&predicted, &gold_labels(examples))
    }
}

pub fn ensemble_predict(models: &[ReModel], example: &RelationExample, rule: EnsembleRule) -> Result<Prediction> {
    Ensemble::new(models, rule)?.predict(example)
}

/// How a target-to-source mapping is obtained from a dictionary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MappingMethod {
    Regular,
    Orthogonal,
    /// Orthogonal mapping refined by self-learning from the dictionary as seed.
    SelfLearn,
}

impl MappingMethod {
    pub const ALL: [MappingMethod; 3] = [MappingMethod::Regular, MappingMethod::Orthogonal, MappingMethod::SelfLearn];
}

impl fmt::Display for MappingMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MappingMethod::Regular => "regular",
            MappingMethod::Orthogonal => "orthogonal",
            MappingMethod::SelfLearn => "self-learn",
        })
    }
}

impl FromStr for MappingMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "regular" => Ok(MappingMethod::Regular),
            "orthogonal" => Ok(MappingMethod::Orthogonal),
            "self-learn" | "self_learn" | "semi-supervised" => Ok(MappingMethod::SelfLearn),
            other => Err(Error::Config(format!("unknown mapping method {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MappingOptions {
    pub self_learn_iters: usize,
    pub induction_cutoff: Option<usize>,
    /// Fit regular mappings between length-normalized spaces.
    pub normalize: bool,
}

impl Default for MappingOptions {
    fn default() -> Self {
        MappingOptions {
            self_learn_iters: DEFAULT_SELF_LEARN_ITERS,
            induction_cutoff: Some(DEFAULT_INDUCTION_CUTOFF),
            normalize: false,
        }
    }
}

/// Learns a target-to-source mapping; pairs with an out-of-vocabulary word
/// are skipped with a warning.
pub fn learn_mapping(
    method: MappingMethod,
    dictionary: &BilingualDictionary,
    source: &WordEmbeddings,
    target: &WordEmbeddings,
    options: &MappingOptions,
) -> Result<MappingMatrix> {
    match method {
        MappingMethod::Regular | MappingMethod::Orthogonal => {
            let (pairs, dropped) = if method == MappingMethod::Regular && options.normalize {
                AlignedPairSet::from_dictionary(dictionary, &source.normalized()?, &target.normalized()?)?
            } else {
                AlignedPairSet::from_dictionary(dictionary, source, target)?
            };
            if dropped > 0 {
                warn!("{dropped} dictionary pairs have out-of-vocabulary words");
            }
            if method == MappingMethod::Regular {
                learn_regular(&pairs)
            } else {
                learn_orthogonal(&pairs)
            }
        }
        MappingMethod::SelfLearn => {
            let run = self_learn(dictionary, source, target, options.self_learn_iters, options.induction_cutoff)?;
            info!("self-learning stopped after {} iterations", run.iterations);
            Ok(run.mapping)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub size: usize,
    pub f1: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    /// `size,f1` rows with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("size,f1\n");
        for r in &self.rows {
            out += &format!("{},{:.4}\n", r.size, r.f1);
        }
        out
    }

    pub fn table(&self) -> String {
        let mut out = format!("{:>10} {:>8}\n", "pairs", "F1");
        for r in &self.rows {
            out += &format!("{:>10} {:>8.2}\n", r.size, r.f1);
        }
        out
    }

    pub fn f1_at(&self, size: usize) -> Option<f64> {
        self.rows.iter().find(|r| r.size == size).map(|r| r.f1)
    }
}

/// Dev F1 of transfer with a regular mapping fitted on the first `size`
/// dictionary pairs, for every size. Only the mapping is re-learned.
pub fn dictionary_sweep(
    sizes: &[usize],
    dictionary: &BilingualDictionary,
    source: &WordEmbeddings,
    target: &WordEmbeddings,
    model: &ReModel,
    target_dev: &[RelationExample],
) -> Result<SweepResult> {
    if sizes.is_empty() {
        return Err(Error::Config("no dictionary sizes given".into()));
    }
    if sizes[0] == 0 {
        return Err(Error::Config("dictionary size 0 leaves the mapping undefined".into()));
    }
    if sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("dictionary sizes must be strictly increasing".into()));
    }
    if let Some(&last) = sizes.last().filter(|&&s| s > dictionary.len()) {
        return Err(Error::Config(format!(
            "dictionary size {last} exceeds the {} available pairs",
            dictionary.len()
        )));
    }
    let options = MappingOptions {
        normalize: model.config.normalized_embeddings,
        ..MappingOptions::default()
    };
    let rows = sizes
        .par_iter()
        .map(|&size| {
            let mapping = learn_mapping(MappingMethod::Regular, &dictionary.truncated(size), source, target, &options)?;
            let f1 = ProjectedTarget::for_model(&mapping, model, target)?.evaluate(model, target_dev)?.f1;
            info!("sweep: {size} pairs, F1 {f1:.2}");
            Ok(SweepRow { size, f1 })
        })
        .collect::<Result<_>>()?;
    Ok(SweepResult { rows })
}

/// One target language of a mapping comparison.
pub struct TargetLanguage<'a> {
    pub name: String,
    pub embeddings: &'a WordEmbeddings,
    pub dictionary: &'a BilingualDictionary,
    pub dev: &'a [RelationExample],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub language: String,
    pub method: MappingMethod,
    pub dictionary_size: usize,
    /// `||M^T M - I||_F` for orthogonal mappings.
    pub orthogonality_error: Option<f64>,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
}

impl Comparison {
    pub fn table(&self) -> String {
        let mut out = format!("{:<12} {:<12} {:>6} {:>7} {:>7} {:>7}\n", "language", "mapping", "pairs", "P", "R", "F1");
        for r in &self.rows {
            out += &format!(
                "{:<12} {:<12} {:>6} {:>7.2} {:>7.2} {:>7.2}\n",
                r.language,
                r.method.to_string(),
                r.dictionary_size,
                r.precision,
                r.recall,
                r.f1
            );
        }
        out
    }
}

/// Transfer F1 of every mapping method on every language, using the first
/// `dictionary_size` pairs. Regular mappings use `raw_model`; orthogonal and
/// self-learned ones use `normalized_model`, which must have been trained on
/// normalized embeddings.
pub fn compare_mappings(
    languages: &[TargetLanguage<'_>],
    source: &WordEmbeddings,
    raw_model: &ReModel,
    normalized_model: &ReModel,
    dictionary_size: usize,
    options: &MappingOptions,
) -> Result<Comparison> {
    if !normalized_model.config.normalized_embeddings {
        return Err(Error::Config("the normalized model was trained on raw embeddings".into()));
    }
    let mut rows = Vec::new();
    for lang in languages {
        let dict = lang.dictionary.truncated(dictionary_size);
        for method in MappingMethod::ALL {
            let model = if method == MappingMethod::Regular { raw_model } else { normalized_model };
            let opts = MappingOptions {
                normalize: model.config.normalized_embeddings,
                ..*options
            };
            let mapping = learn_mapping(method, &dict, source, lang.embeddings, &opts)?;
            let report = ProjectedTarget::for_model(&mapping, model, lang.embeddings)?.evaluate(model, lang.dev)?;
            info!("{} / {method}: F1 {:.2}", lang.name, report.f1);
            rows.push(ComparisonRow {
                language: lang.name.clone(),
                method,
                dictionary_size: dict.len(),
                orthogonality_error: (mapping.kind() == MappingKind::Orthogonal).then(|| mapping.orthogonality_error()),
                precision: report.precision,
                recall: report.recall,
                f1: report.f1,
            });
        }
    }
    Ok(Comparison { rows })
}
