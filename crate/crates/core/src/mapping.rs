//! Linear maps from the target embedding space into the source space.
//!
//! * Regular: unconstrained least squares `min_M sum_i |x_i - M y_i|^2`,
//!   solved with an SVD pseudoinverse (minimum-norm when rank deficient).
//! * Orthogonal: both sides length-normalized, then `M = U V^T` from the SVD
//!   of `X' Y'^T`.
//! * Self-learning: alternate the orthogonal fit with nearest-neighbour
//!   dictionary induction under cosine similarity.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, SVD};
use rayon::prelude::*;

use crate::corpus::BilingualDictionary;
use crate::embeddings::WordEmbeddings;
use crate::error::{Error, Result};

/// Default number of most frequent words considered during induction.
pub const DEFAULT_INDUCTION_CUTOFF: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MappingKind {
    Regular,
    Orthogonal,
}

impl fmt::Display for MappingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MappingKind::Regular => "regular",
            MappingKind::Orthogonal => "orthogonal",
        })
    }
}

impl FromStr for MappingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "regular" => Ok(MappingKind::Regular),
            "orthogonal" => Ok(MappingKind::Orthogonal),
            other => Err(Error::Config(format!("unknown mapping kind {other:?}"))),
        }
    }
}

/// A `d x d` map from target to source embeddings.
#[derive(Clone, Debug, PartialEq)]
pub struct MappingMatrix {
    matrix: DMatrix<f64>,
    kind: MappingKind,
}

impl MappingMatrix {
    pub fn new(matrix: DMatrix<f64>, kind: MappingKind) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Dimension(format!(
                "mapping must be square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let m = MappingMatrix { matrix, kind };
        if kind == MappingKind::Orthogonal && m.orthogonality_error() >= 1e-8 {
            return Err(Error::Validation(format!(
                "orthogonal mapping has |M^T M - I|_F = {:e}",
                m.orthogonality_error()
            )));
        }
        Ok(m)
    }

    pub fn identity(dim: usize) -> Self {
        MappingMatrix {
            matrix: DMatrix::identity(dim, dim),
            kind: MappingKind::Orthogonal,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn kind(&self) -> MappingKind {
        self.kind
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// `|M^T M - I|_F`
    pub fn orthogonality_error(&self) -> f64 {
        let d = self.dim();
        (self.matrix.transpose() * &self.matrix - DMatrix::<f64>::identity(d, d)).norm()
    }

    pub fn project(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        if y.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "cannot project a {}-vector with a {}x{} mapping",
                y.len(),
                self.dim(),
                self.dim()
            )));
        }
        Ok(&self.matrix * y)
    }

    pub fn write<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{} {}", self.dim(), self.kind)?;
        for row in self.matrix.row_iter() {
            let line: Vec<String> = row.iter().map(|x| format!("{x:.17e}")).collect();
            writeln!(out, "{}", line.join(" "))?;
        }
        out.flush()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write(BufWriter::new(file)).map_err(|e| Error::io(path, e))
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        const WHAT: &str = "mapping file";
        let mut lines = reader.lines();
        let header = lines
            .next()
            .transpose()
            .map_err(|e| Error::parse(WHAT, 1, e.to_string()))?
            .ok_or_else(|| Error::parse(WHAT, 1, "missing `d kind` header"))?;
        let mut fields = header.split_whitespace();
        let dim: usize = fields
            .next()
            .and_then(|f| f.parse().ok())
            .ok_or_else(|| Error::parse(WHAT, 1, "header must be `d kind`"))?;
        let kind: MappingKind = fields
            .next()
            .ok_or_else(|| Error::parse(WHAT, 1, "header must be `d kind`"))?
            .parse()
            .map_err(|e: Error| Error::parse(WHAT, 1, e.to_string()))?;

        let mut data = Vec::with_capacity(dim * dim);
        let mut rows = 0;
        for (i, line) in lines.enumerate() {
            let line_no = i + 2;
            let line = line.map_err(|e| Error::parse(WHAT, line_no, e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let row: Vec<f64> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::parse(WHAT, line_no, "bad number"))?;
            if row.len() != dim || rows == dim {
                return Err(Error::parse(WHAT, line_no, format!("expected {dim} rows of {dim} values")));
            }
            data.extend(row);
            rows += 1;
        }
        if rows != dim {
            return Err(Error::parse(WHAT, rows + 2, format!("expected {dim} rows, found {rows}")));
        }
        MappingMatrix::new(DMatrix::from_row_slice(dim, dim, &data), kind)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(BufReader::new(file))
    }
}

/// Scales every column to unit Euclidean norm. A zero column is an error
/// naming its index.
pub fn normalize_lengths(vectors: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    unit_columns(vectors).map_err(|i| Error::ZeroVector(format!("column {i}")))
}

pub(crate) fn unit_columns(vectors: &DMatrix<f64>) -> std::result::Result<DMatrix<f64>, usize> {
    let mut out = vectors.clone();
    for (i, mut col) in out.column_iter_mut().enumerate() {
        let norm = col.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(i);
        }
        col /= norm;
    }
    Ok(out)
}

/// Position-aligned translation pairs: column `i` of `source` translates
/// column `i` of `target`.
#[derive(Clone, Debug, PartialEq)]
pub struct AlignedPairSet {
    source: DMatrix<f64>,
    target: DMatrix<f64>,
}

impl AlignedPairSet {
    pub fn new(source: DMatrix<f64>, target: DMatrix<f64>) -> Result<Self> {
        if source.shape() != target.shape() {
            return Err(Error::Dimension(format!(
                "source pairs {:?} vs target pairs {:?}",
                source.shape(),
                target.shape()
            )));
        }
        if source.ncols() == 0 {
            return Err(Error::Validation("no aligned pairs".into()));
        }
        Ok(AlignedPairSet { source, target })
    }

    /// Looks up both sides of every dictionary entry. Entries with a word
    /// missing from either vocabulary are skipped; their count is returned.
    pub fn from_dictionary(
        dict: &BilingualDictionary,
        source: &WordEmbeddings,
        target: &WordEmbeddings,
    ) -> Result<(Self, usize)> {
        if source.dim() != target.dim() {
            return Err(Error::Dimension(format!(
                "source embeddings are {}-dimensional, target {}-dimensional",
                source.dim(),
                target.dim()
            )));
        }
        let mut src = Vec::new();
        let mut tgt = Vec::new();
        let mut dropped = 0;
        for (s, t) in dict.pairs() {
            match (source.get(s), target.get(t)) {
                (Some(x), Some(y)) => {
                    src.extend_from_slice(x);
                    tgt.extend_from_slice(y);
                }
                _ => dropped += 1,
            }
        }
        let d = source.dim();
        let n = src.len() / d.max(1);
        if dropped > 0 {
            log::warn!("{dropped} dictionary entries not covered by the embeddings were skipped");
        }
        let pairs = AlignedPairSet::new(DMatrix::from_vec(d, n, src), DMatrix::from_vec(d, n, tgt))?;
        Ok((pairs, dropped))
    }

    pub fn dim(&self) -> usize {
        self.source.nrows()
    }

    pub fn len(&self) -> usize {
        self.source.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.source.ncols() == 0
    }

    pub fn source(&self) -> &DMatrix<f64> {
        &self.source
    }

    pub fn target(&self) -> &DMatrix<f64> {
        &self.target
    }
}

fn svd(m: DMatrix<f64>) -> Result<SVD<f64, nalgebra::Dyn, nalgebra::Dyn>> {
    SVD::try_new(m, true, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numeric("SVD did not converge".into()))
}

#[derive(Clone, Debug)]
pub struct LeastSquaresFit {
    pub mapping: MappingMatrix,
    /// Numerical rank of the target matrix `Y`.
    pub rank: usize,
    pub rank_deficient: bool,
}

/// Least-squares map `M = X Y^+`.
pub fn learn_regular(pairs: &AlignedPairSet) -> Result<MappingMatrix> {
    learn_regular_with_diagnostics(pairs).map(|fit| fit.mapping)
}

pub fn learn_regular_with_diagnostics(pairs: &AlignedPairSet) -> Result<LeastSquaresFit> {
    let d = pairs.dim();
    let svd = svd(pairs.target.clone())?;
    let u = svd.u.as_ref().expect("requested U");
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let sigma_max = svd.singular_values.max();
    let tol = sigma_max * d.max(pairs.len()) as f64 * f64::EPSILON;

    // X V Sigma^+ U^T, skipping singular values below tolerance.
    let xv = &pairs.source * v_t.transpose();
    let mut scaled_u_t = u.transpose();
    let mut rank = 0;
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > tol {
            scaled_u_t.row_mut(i).scale_mut(1.0 / s);
            rank += 1;
        } else {
            scaled_u_t.row_mut(i).fill(0.0);
        }
    }
    let matrix = xv * scaled_u_t;
    let rank_deficient = rank < d;
    if rank_deficient {
        log::warn!("target vectors have rank {rank} < {d}; using the minimum-norm least-squares map");
    }
    Ok(LeastSquaresFit {
        mapping: MappingMatrix::new(matrix, MappingKind::Regular)?,
        rank,
        rank_deficient,
    })
}

/// Relative residual of the normal equations `|M Y Y^T - X Y^T|_F / |X Y^T|_F`.
pub fn normal_equations_residual(mapping: &MappingMatrix, pairs: &AlignedPairSet) -> f64 {
    let yt = pairs.target.transpose();
    let lhs = mapping.matrix() * (&pairs.target * &yt);
    let rhs = &pairs.source * &yt;
    let scale = rhs.norm();
    let r = (lhs - &rhs).norm();
    if scale == 0.0 {
        r
    } else {
        r / scale
    }
}

/// `sum_i |x_i - M y_i|^2`
pub fn least_squares_objective(mapping: &MappingMatrix, pairs: &AlignedPairSet) -> f64 {
    (&pairs.source - mapping.matrix() * &pairs.target).norm_squared()
}

/// Orthogonal map between the length-normalized pair sets.
pub fn learn_orthogonal(pairs: &AlignedPairSet) -> Result<MappingMatrix> {
    let x = normalize_lengths(&pairs.source)?;
    let y = normalize_lengths(&pairs.target)?;
    let svd = svd(x * y.transpose())?;
    let m = svd.u.expect("requested U") * svd.v_t.expect("requested V^T");
    MappingMatrix::new(m, MappingKind::Orthogonal)
}

/// `sum_i |x'_i - M y'_i|^2` on length-normalized pairs.
pub fn orthogonal_objective(mapping: &MappingMatrix, pairs: &AlignedPairSet) -> Result<f64> {
    let x = normalize_lengths(&pairs.source)?;
    let y = normalize_lengths(&pairs.target)?;
    Ok((x - mapping.matrix() * y).norm_squared())
}

/// Unit columns, leaving zero columns at zero.
fn unit_or_zero(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for mut col in out.column_iter_mut() {
        let n = col.norm();
        if n > 0.0 {
            col /= n;
        }
    }
    out
}

/// Pairs every target word (within the `cutoff` most frequent) with the
/// source word (within the same cutoff) of highest cosine similarity to
/// `M y`. Ties go to the lower source id.
pub fn induce_dictionary(
    mapping: &MappingMatrix,
    source: &WordEmbeddings,
    target: &WordEmbeddings,
    cutoff: Option<usize>,
) -> Result<BilingualDictionary> {
    if source.is_empty() || target.is_empty() {
        return Err(Error::Validation("dictionary induction needs non-empty vocabularies".into()));
    }
    if source.dim() != mapping.dim() || target.dim() != mapping.dim() {
        return Err(Error::Dimension(format!(
            "mapping is {0}x{0} but embeddings are {1} (source) and {2} (target)",
            mapping.dim(),
            source.dim(),
            target.dim()
        )));
    }
    let n_src = cutoff.map_or(source.len(), |k| k.min(source.len()));
    let n_tgt = cutoff.map_or(target.len(), |k| k.min(target.len()));
    let src = unit_or_zero(&source.vectors.columns(0, n_src).into_owned());
    let src_t = src.transpose();
    let live: Vec<bool> = src.column_iter().map(|c| c.norm() > 0.0).collect();

    const CHUNK: usize = 256;
    let starts: Vec<usize> = (0..n_tgt).step_by(CHUNK).collect();
    let best: Vec<usize> = starts
        .par_iter()
        .flat_map_iter(|&start| {
            let len = CHUNK.min(n_tgt - start);
            let projected = unit_or_zero(&(mapping.matrix() * target.vectors.columns(start, len)));
            let sims = &src_t * projected;
            (0..len)
                .map(|j| {
                    let col = sims.column(j);
                    let mut arg = None;
                    for i in 0..n_src {
                        if !live[i] {
                            continue;
                        }
                        match arg {
                            Some(a) if col[i] <= col[a] => {}
                            _ => arg = Some(i),
                        }
                    }
                    arg.unwrap_or(0)
                })
                .collect::<Vec<_>>()
        })
        .collect();

    let pairs = best
        .into_iter()
        .enumerate()
        .map(|(t, s)| (source.vocab.word(s).to_owned(), target.vocab.word(t).to_owned()));
    Ok(BilingualDictionary::from_pairs(pairs).0)
}

#[derive(Clone, Debug)]
pub struct SelfLearning {
    pub mapping: MappingMatrix,
    pub dictionary: BilingualDictionary,
    /// Orthogonal objective of each fitted mapping on the dictionary it was fitted to.
    pub objectives: Vec<f64>,
    /// Number of induction rounds performed.
    pub iterations: usize,
}

/// Alternates orthogonal fitting and dictionary induction, starting from
/// `seed`, until the induced dictionary stops changing or `max_iters`
/// induction rounds have run.
pub fn self_learn(
    seed: &BilingualDictionary,
    source: &WordEmbeddings,
    target: &WordEmbeddings,
    max_iters: usize,
    cutoff: Option<usize>,
) -> Result<SelfLearning> {
    if seed.is_empty() {
        return Err(Error::Validation("self-learning needs a non-empty seed dictionary".into()));
    }
    let fit = |dict: &BilingualDictionary| -> Result<(MappingMatrix, f64)> {
        let (pairs, _) = AlignedPairSet::from_dictionary(dict, source, target)?;
        let m = learn_orthogonal(&pairs)?;
        let obj = orthogonal_objective(&m, &pairs)?;
        Ok((m, obj))
    };

    let mut dictionary = seed.clone();
    let (mut mapping, obj) = fit(&dictionary)?;
    let mut objectives = vec![obj];
    let mut iterations = 0;
    while iterations < max_iters {
        iterations += 1;
        let induced = induce_dictionary(&mapping, source, target, cutoff)?;
        if induced == dictionary {
            break;
        }
        dictionary = induced;
        let (m, obj) = fit(&dictionary)?;
        log::debug!("self-learning round {iterations}: objective {obj:.6}");
        mapping = m;
        objectives.push(obj);
    }
    Ok(SelfLearning {
        mapping,
        dictionary,
        objectives,
        iterations,
    })
}
