//! Forward and backward passes of the four-layer network: embedding lookup,
//! context layer, five-group max pooling and softmax output.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::config::ReConfig;
use super::params::{ContextParams, LstmWeights, ReParams};
use crate::error::{Error, Result};
use crate::numeric::{sigmoid, softmax_in_place};

/// A relation example after the embedding layer.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddedExample {
    pub words: Vec<DVector<f64>>,
    /// Inclusive token spans.
    pub mention1: (usize, usize),
    pub mention2: (usize, usize),
    pub type1: usize,
    pub type2: usize,
}

struct LstmStep {
    t: usize,
    i: DVector<f64>,
    f: DVector<f64>,
    o: DVector<f64>,
    g: DVector<f64>,
    c: DVector<f64>,
    c_prev: DVector<f64>,
    h_prev: DVector<f64>,
}

enum ContextCache {
    PassThrough,
    BiLstm {
        forward: Vec<LstmStep>,
        backward: Vec<LstmStep>,
    },
    Cnn {
        windows: Vec<DVector<f64>>,
        outputs: Vec<DVector<f64>>,
    },
}

pub(crate) struct Activations {
    /// Context outputs after dropout; what the pooling layer saw.
    hidden: Vec<DVector<f64>>,
    mask: Option<Vec<DVector<f64>>>,
    cache: ContextCache,
    /// Source timestep of every summary coordinate (None for empty groups).
    winners: Vec<Option<usize>>,
    summary: DVector<f64>,
    pub probs: DVector<f64>,
}

fn lstm_run(wts: &LstmWeights, xs: &[DVector<f64>], reverse: bool) -> Vec<LstmStep> {
    let h = wts.hidden_dim();
    let mut h_prev = DVector::zeros(h);
    let mut c_prev = DVector::zeros(h);
    let order: Box<dyn Iterator<Item = usize>> = if reverse {
        Box::new((0..xs.len()).rev())
    } else {
        Box::new(0..xs.len())
    };
    let mut steps = Vec::with_capacity(xs.len());
    for t in order {
        let mut a = wts.b.column(0) + &wts.w * &xs[t];
        a.gemv(1.0, &wts.u, &h_prev, 1.0);
        let i = a.rows(0, h).map(sigmoid);
        let f = a.rows(h, h).map(sigmoid);
        let o = a.rows(2 * h, h).map(sigmoid);
        let g = a.rows(3 * h, h).map(f64::tanh);
        let c = f.component_mul(&c_prev) + i.component_mul(&g);
        let h_t = o.component_mul(&c.map(f64::tanh));
        steps.push(LstmStep {
            t,
            i,
            f,
            o,
            g,
            c: c.clone(),
            c_prev,
            h_prev,
        });
        h_prev = h_t;
        c_prev = c;
    }
    steps
}

fn lstm_output(step: &LstmStep) -> DVector<f64> {
    step.o.component_mul(&step.c.map(f64::tanh))
}

/// Backpropagates through one direction. `d_out[t]` is the gradient with
/// respect to this direction's `h_t`.
fn lstm_backward(wts: &LstmWeights, steps: &[LstmStep], xs: &[DVector<f64>], d_out: &[DVector<f64>], grad: &mut LstmWeights) {
    let h = wts.hidden_dim();
    let mut dh_next = DVector::zeros(h);
    let mut dc_next = DVector::zeros(h);
    let mut da = DVector::zeros(4 * h);
    for s in steps.iter().rev() {
        let dh = &d_out[s.t] + &dh_next;
        let tc = s.c.map(f64::tanh);
        let d_o = dh.component_mul(&tc);
        let dc = dh.component_mul(&s.o).component_mul(&tc.map(|x| 1.0 - x * x)) + &dc_next;
        for k in 0..h {
            let (i, f, o, g) = (s.i[k], s.f[k], s.o[k], s.g[k]);
            da[k] = dc[k] * g * i * (1.0 - i);
            da[h + k] = dc[k] * s.c_prev[k] * f * (1.0 - f);
            da[2 * h + k] = d_o[k] * o * (1.0 - o);
            da[3 * h + k] = dc[k] * i * (1.0 - g * g);
        }
        grad.w.ger(1.0, &da, &xs[s.t], 1.0);
        grad.u.ger(1.0, &da, &s.h_prev, 1.0);
        grad.b.column_mut(0).axpy(1.0, &da, 1.0);
        dh_next = wts.u.tr_mul(&da);
        dc_next = dc.component_mul(&s.f);
    }
}

/// `h_t = [forward h_t, backward h_t]` with zero initial states.
pub fn bilstm_forward(forward: &LstmWeights, backward: &LstmWeights, words: &[DVector<f64>]) -> Vec<DVector<f64>> {
    let fw = lstm_run(forward, words, false);
    let bw = lstm_run(backward, words, true);
    join_directions(&fw, &bw, words.len())
}

fn join_directions(fw: &[LstmStep], bw: &[LstmStep], n: usize) -> Vec<DVector<f64>> {
    let mut out = vec![DVector::zeros(0); n];
    let h = fw.first().map_or(0, |s| s.o.len());
    for s in fw {
        let mut v = DVector::zeros(2 * h);
        v.rows_mut(0, h).copy_from(&lstm_output(s));
        out[s.t] = v;
    }
    for s in bw {
        out[s.t].rows_mut(h, h).copy_from(&lstm_output(s));
    }
    out
}

/// Concatenation of the `k` word vectors centred on `t`, zero-padded.
fn window(words: &[DVector<f64>], t: usize, k: usize, dim: usize) -> DVector<f64> {
    let half = (k / 2) as isize;
    let mut z = DVector::zeros(k * dim);
    for (slot, off) in (-half..=half).enumerate() {
        if let Some(p) = t.checked_add_signed(off).filter(|&p| p < words.len()) {
            z.rows_mut(slot * dim, dim).copy_from(&words[p]);
        }
    }
    z
}

/// `h_t = tanh(W z_t + b)` over zero-padded windows of width `k`.
pub fn cnn_forward(w: &DMatrix<f64>, b: &DMatrix<f64>, k: usize, words: &[DVector<f64>]) -> Vec<DVector<f64>> {
    let dim = w.ncols() / k;
    (0..words.len())
        .map(|t| (w * window(words, t, k, dim) + b.column(0)).map(f64::tanh))
        .collect()
}

fn context_forward(params: &ReParams, config: &ReConfig, words: &[DVector<f64>]) -> (Vec<DVector<f64>>, ContextCache) {
    match &params.context {
        ContextParams::PassThrough => (words.to_vec(), ContextCache::PassThrough),
        ContextParams::BiLstm { forward, backward } => {
            let fw = lstm_run(forward, words, false);
            let bw = lstm_run(backward, words, true);
            let out = join_directions(&fw, &bw, words.len());
            (out, ContextCache::BiLstm { forward: fw, backward: bw })
        }
        ContextParams::Cnn { w, b } => {
            let dim = config.word_dim;
            let windows: Vec<_> = (0..words.len())
                .map(|t| window(words, t, config.cnn_window, dim))
                .collect();
            let outputs: Vec<_> = windows
                .iter()
                .map(|z| (w * z + b.column(0)).map(f64::tanh))
                .collect();
            (outputs.clone(), ContextCache::Cnn { windows, outputs })
        }
    }
}

fn context_backward(
    params: &ReParams,
    cache: &ContextCache,
    words: &[DVector<f64>],
    d_hidden: &[DVector<f64>],
    grads: &mut ReParams,
) {
    match (&params.context, cache, &mut grads.context) {
        (ContextParams::PassThrough, ContextCache::PassThrough, _) => {}
        (
            ContextParams::BiLstm { forward, backward },
            ContextCache::BiLstm { forward: fw, backward: bw },
            ContextParams::BiLstm {
                forward: g_fw,
                backward: g_bw,
            },
        ) => {
            let h = forward.hidden_dim();
            let d_fw: Vec<_> = d_hidden.iter().map(|d| d.rows(0, h).into_owned()).collect();
            let d_bw: Vec<_> = d_hidden.iter().map(|d| d.rows(h, h).into_owned()).collect();
            lstm_backward(forward, fw, words, &d_fw, g_fw);
            lstm_backward(backward, bw, words, &d_bw, g_bw);
        }
        (ContextParams::Cnn { .. }, ContextCache::Cnn { windows, outputs }, ContextParams::Cnn { w: g_w, b: g_b }) => {
            for ((z, h), d) in windows.iter().zip(outputs).zip(d_hidden) {
                let da = d.zip_map(h, |d, h| d * (1.0 - h * h));
                g_w.ger(1.0, &da, z, 1.0);
                g_b.column_mut(0).axpy(1.0, &da, 1.0);
            }
        }
        _ => unreachable!("gradient buffers do not match the context layer"),
    }
}

/// Token ranges of the five pooling groups: left of `m1`, `m1`, between,
/// `m2`, right of `m2`.
pub fn pooling_groups(n: usize, m1: (usize, usize), m2: (usize, usize)) -> [Range<usize>; 5] {
    [
        0..m1.0,
        m1.0..m1.1 + 1,
        m1.1 + 1..m2.0,
        m2.0..m2.1 + 1,
        m2.1 + 1..n,
    ]
}

fn check_mentions(n: usize, m1: (usize, usize), m2: (usize, usize)) -> Result<()> {
    if m1.0 > m1.1 || m2.0 > m2.1 || m2.1 >= n {
        return Err(Error::Validation(format!(
            "mention spans {m1:?}, {m2:?} invalid for {n} tokens"
        )));
    }
    if m1.1 >= m2.0 {
        return Err(Error::Validation(format!(
            "mentions {m1:?} and {m2:?} overlap or are out of order"
        )));
    }
    Ok(())
}

fn pool(hidden: &[DVector<f64>], m1: (usize, usize), m2: (usize, usize)) -> (DVector<f64>, Vec<Option<usize>>) {
    let h = hidden.first().map_or(0, |v| v.len());
    let mut summary = DVector::zeros(5 * h);
    let mut winners = vec![None; 5 * h];
    for (g, range) in pooling_groups(hidden.len(), m1, m2).into_iter().enumerate() {
        for t in range {
            for j in 0..h {
                let slot = g * h + j;
                let v = hidden[t][j];
                match winners[slot] {
                    Some(_) if v <= summary[slot] => {}
                    _ => {
                        summary[slot] = v;
                        winners[slot] = Some(t);
                    }
                }
            }
        }
    }
    (summary, winners)
}

/// Element-wise max pooling over the five groups, concatenated. Empty
/// groups contribute zeros.
pub fn summarize(hidden: &[DVector<f64>], mention1: (usize, usize), mention2: (usize, usize)) -> Result<DVector<f64>> {
    check_mentions(hidden.len(), mention1, mention2)?;
    Ok(pool(hidden, mention1, mention2).0)
}

fn logits(params: &ReParams, summary: &DVector<f64>, l1: &DVector<f64>, l2: &DVector<f64>) -> DVector<f64> {
    let mut z = params.b_o.column(0).into_owned();
    z.gemv(1.0, &params.w_s, summary, 1.0);
    z.gemv(1.0, &params.w_m1, l1, 1.0);
    z.gemv(1.0, &params.w_m2, l2, 1.0);
    z
}

/// `softmax(W_s h_s + W_m1 l_m1 + W_m2 l_m2 + b_o)`
pub fn output_layer(params: &ReParams, summary: &DVector<f64>, l1: &DVector<f64>, l2: &DVector<f64>) -> DVector<f64> {
    let mut p = logits(params, summary, l1, l2);
    softmax_in_place(p.as_mut_slice());
    p
}

pub(crate) fn forward<R: Rng>(
    params: &ReParams,
    config: &ReConfig,
    ex: &EmbeddedExample,
    dropout_rng: Option<&mut R>,
) -> Activations {
    let (mut hidden, cache) = context_forward(params, config, &ex.words);
    let mask = match dropout_rng {
        Some(rng) if config.dropout > 0.0 => {
            let keep = 1.0 - config.dropout;
            let mask: Vec<DVector<f64>> = hidden
                .iter()
                .map(|v| DVector::from_fn(v.len(), |_, _| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 }))
                .collect();
            for (v, m) in hidden.iter_mut().zip(&mask) {
                v.component_mul_assign(m);
            }
            Some(mask)
        }
        _ => None,
    };
    let (summary, winners) = pool(&hidden, ex.mention1, ex.mention2);
    let l1 = params.entity_embeddings.column(ex.type1).into_owned();
    let l2 = params.entity_embeddings.column(ex.type2).into_owned();
    let probs = output_layer(params, &summary, &l1, &l2);
    Activations {
        hidden,
        mask,
        cache,
        winners,
        summary,
        probs,
    }
}

/// Accumulates `scale * d(-log p[label])` into `grads`.
pub(crate) fn backward(
    params: &ReParams,
    ex: &EmbeddedExample,
    act: &Activations,
    label: usize,
    scale: f64,
    grads: &mut ReParams,
) {
    let mut d_logits = act.probs.clone() * scale;
    d_logits[label] -= scale;

    grads.w_s.ger(1.0, &d_logits, &act.summary, 1.0);
    let l1 = params.entity_embeddings.column(ex.type1).into_owned();
    let l2 = params.entity_embeddings.column(ex.type2).into_owned();
    grads.w_m1.ger(1.0, &d_logits, &l1, 1.0);
    grads.w_m2.ger(1.0, &d_logits, &l2, 1.0);
    grads.b_o.column_mut(0).axpy(1.0, &d_logits, 1.0);
    let d_l1 = params.w_m1.tr_mul(&d_logits);
    let d_l2 = params.w_m2.tr_mul(&d_logits);
    grads.entity_embeddings.column_mut(ex.type1).axpy(1.0, &d_l1, 1.0);
    grads.entity_embeddings.column_mut(ex.type2).axpy(1.0, &d_l2, 1.0);

    if matches!(params.context, ContextParams::PassThrough) {
        return;
    }
    let d_summary = params.w_s.tr_mul(&d_logits);
    let h = act.hidden.first().map_or(0, |v| v.len());
    let mut d_hidden = vec![DVector::zeros(h); act.hidden.len()];
    for (slot, winner) in act.winners.iter().enumerate() {
        if let Some(t) = *winner {
            d_hidden[t][slot % h] += d_summary[slot];
        }
    }
    if let Some(mask) = &act.mask {
        for (d, m) in d_hidden.iter_mut().zip(mask) {
            d.component_mul_assign(m);
        }
    }
    context_backward(params, &act.cache, &ex.words, &d_hidden, grads);
}

pub(crate) fn check_example(config: &ReConfig, ex: &EmbeddedExample) -> Result<()> {
    check_mentions(ex.words.len(), ex.mention1, ex.mention2)?;
    if let Some(v) = ex.words.iter().find(|v| v.len() != config.word_dim) {
        return Err(Error::Dimension(format!(
            "word vector of length {} fed to a {}-d model",
            v.len(),
            config.word_dim
        )));
    }
    let n_types = config.entity_types.len();
    if ex.type1 >= n_types || ex.type2 >= n_types {
        return Err(Error::Validation("entity type id out of range".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::super::config::ContextKind;
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    type NoRng = ChaCha8Rng;

    fn config(kind: ContextKind, d: usize, h: usize) -> ReConfig {
        let mut c = ReConfig::new(
            kind,
            vec!["O".into(), "r1".into(), "r2".into()],
            vec!["A".into(), "B".into()],
        );
        c.word_dim = d;
        c.entity_dim = 2;
        c.hidden_dim = h;
        c.dropout = 0.0;
        c
    }

    fn random_params(config: &ReConfig, seed: u64, spread: f64) -> ReParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = ReParams::init(config, &mut rng);
        for t in p.tensors_mut() {
            t.apply(|x| *x = rng.random_range(-spread..spread));
        }
        p
    }

    fn words(n: usize, d: usize, seed: u64) -> Vec<DVector<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0)))
            .collect()
    }

    #[test]
    fn zero_lstm_gives_zero_states() {
        let c = config(ContextKind::BiLstm, 3, 4);
        let mut p = random_params(&c, 1, 1.0);
        for t in p.tensors_mut() {
            t.fill(0.0);
        }
        let ContextParams::BiLstm { forward, backward } = &p.context else { unreachable!() };
        for h in bilstm_forward(forward, backward, &words(5, 3, 2)) {
            assert_eq!(h, DVector::zeros(8));
        }
    }

    #[test]
    fn lstm_single_step_by_hand() {
        let ones = |r, c| DMatrix::from_element(r, c, 1.0);
        let wts = LstmWeights {
            w: ones(4, 1),
            u: ones(4, 1),
            b: DMatrix::zeros(4, 1),
        };
        let out = bilstm_forward(&wts, &wts, &[DVector::from_element(1, 1.0)]);
        let s = sigmoid(1.0);
        let c = s * 1f64.tanh();
        let h = s * c.tanh();
        assert!((out[0][0] - h).abs() < 1e-15);
        assert!((out[0][1] - h).abs() < 1e-15);
    }

    #[test]
    fn cnn_zero_weights_and_padding() {
        let w = DMatrix::zeros(2, 6);
        let b = DMatrix::zeros(2, 1);
        for h in cnn_forward(&w, &b, 3, &words(4, 2, 0)) {
            assert_eq!(h, DVector::zeros(2));
        }
        let x = words(1, 2, 3);
        let z = window(&x, 0, 3, 2);
        assert_eq!(z.as_slice(), &[0.0, 0.0, x[0][0], x[0][1], 0.0, 0.0]);
    }

    #[test]
    fn cnn_three_tokens_by_hand() {
        // d = 1, k = 3, one filter with weights (1, 2, 3) and bias 0.5.
        let w = DMatrix::from_row_slice(1, 3, &[1.0, 2.0, 3.0]);
        let b = DMatrix::from_element(1, 1, 0.5);
        let x: Vec<_> = [1.0, -1.0, 2.0].iter().map(|&v| DVector::from_element(1, v)).collect();
        let h = cnn_forward(&w, &b, 3, &x);
        let expected = [
            (0.0 * 1.0 + 1.0 * 2.0 + -1.0 * 3.0 + 0.5f64).tanh(),
            (1.0 * 1.0 + -1.0 * 2.0 + 2.0 * 3.0 + 0.5f64).tanh(),
            (-1.0 * 1.0 + 2.0 * 2.0 + 0.0 * 3.0 + 0.5f64).tanh(),
        ];
        for (got, want) in h.iter().zip(expected) {
            assert!((got[0] - want).abs() < 1e-15);
        }
    }

    #[test]
    fn summarize_single_vector_groups() {
        let h = words(5, 2, 4);
        let s = summarize(&h, (1, 1), (3, 3)).unwrap();
        let expected: Vec<f64> = h.iter().flat_map(|v| v.iter().copied()).collect();
        assert_eq!(s.as_slice(), expected.as_slice());
    }

    #[test]
    fn summarize_empty_middle_group() {
        let h = words(4, 3, 5);
        let s = summarize(&h, (0, 1), (2, 3)).unwrap();
        assert_eq!(s.len(), 15);
        for g in [0, 2, 4] {
            assert!(s.rows(g * 3, 3).iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn summarize_matches_brute_force() {
        let h = words(9, 4, 6);
        let (m1, m2) = ((2, 3), (5, 6));
        let s = summarize(&h, m1, m2).unwrap();
        let groups: [&[usize]; 5] = [&[0, 1], &[2, 3], &[4], &[5, 6], &[7, 8]];
        for (g, members) in groups.iter().enumerate() {
            for j in 0..4 {
                let mut best = f64::NEG_INFINITY;
                for &t in *members {
                    if h[t][j] > best {
                        best = h[t][j];
                    }
                }
                assert_eq!(s[g * 4 + j], best);
            }
        }
    }

    #[test]
    fn summarize_rejects_overlap() {
        let h = words(5, 2, 7);
        assert!(summarize(&h, (0, 2), (2, 3)).is_err());
        assert!(summarize(&h, (3, 3), (0, 0)).is_err());
    }

    #[test]
    fn output_layer_cases() {
        let c = config(ContextKind::PassThrough, 2, 0);
        let mut p = random_params(&c, 8, 1.0);
        let hs = DVector::from_element(10, 0.3);
        let l = DVector::from_element(2, -0.2);
        let probs = output_layer(&p, &hs, &l, &l);
        assert!((probs.sum() - 1.0).abs() < 1e-9);

        for t in p.tensors_mut() {
            t.fill(0.0);
        }
        let probs = output_layer(&p, &hs, &l, &l);
        assert!(probs.iter().all(|&x| (x - 1.0 / 3.0).abs() < 1e-15));

        let p2 = ReParams {
            w_s: DMatrix::zeros(2, 10),
            w_m1: DMatrix::zeros(2, 2),
            w_m2: DMatrix::zeros(2, 2),
            b_o: DMatrix::from_column_slice(2, 1, &[0.0, 3f64.ln()]),
            ..p
        };
        let probs = output_layer(&p2, &hs, &l, &l);
        assert!((probs[0] - 0.25).abs() < 1e-12 && (probs[1] - 0.75).abs() < 1e-12);
    }

    fn loss(params: &ReParams, config: &ReConfig, examples: &[(EmbeddedExample, usize)]) -> f64 {
        examples
            .iter()
            .map(|(ex, y)| -forward::<NoRng>(params, config, ex, None).probs[*y].ln())
            .sum()
    }

    fn analytic(params: &ReParams, config: &ReConfig, examples: &[(EmbeddedExample, usize)]) -> ReParams {
        let mut g = params.zeros_like();
        for (ex, y) in examples {
            let act = forward::<NoRng>(params, config, ex, None);
            backward(params, ex, &act, *y, 1.0, &mut g);
        }
        g
    }

    /// Largest relative error between analytic and central-difference
    /// gradients over every parameter entry.
    fn max_relative_error<F: Fn(&ReParams) -> f64>(params: &ReParams, grads: &ReParams, f: F) -> f64 {
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        let mut probe = params.clone();
        let n_tensors = params.tensors().len();
        for k in 0..n_tensors {
            let len = params.tensors()[k].1.len();
            for idx in 0..len {
                let orig = params.tensors()[k].1[idx];
                probe.tensors_mut()[k][idx] = orig + h;
                let plus = f(&probe);
                probe.tensors_mut()[k][idx] = orig - h;
                let minus = f(&probe);
                probe.tensors_mut()[k][idx] = orig;
                let numeric = (plus - minus) / (2.0 * h);
                let a = grads.tensors()[k].1[idx];
                let denom = a.abs().max(numeric.abs()).max(1e-7);
                worst = worst.max((a - numeric).abs() / denom);
            }
        }
        worst
    }

    fn gradient_examples(d: usize) -> Vec<(EmbeddedExample, usize)> {
        // Length 2 (G1, G3, G5 all empty) and length 7 with every group
        // populated, plus length 7 with an empty middle group.
        vec![
            (
                EmbeddedExample {
                    words: words(2, d, 10),
                    mention1: (0, 0),
                    mention2: (1, 1),
                    type1: 0,
                    type2: 1,
                },
                1,
            ),
            (
                EmbeddedExample {
                    words: words(7, d, 11),
                    mention1: (1, 2),
                    mention2: (4, 5),
                    type1: 1,
                    type2: 1,
                },
                2,
            ),
            (
                EmbeddedExample {
                    words: words(7, d, 12),
                    mention1: (0, 2),
                    mention2: (3, 6),
                    type1: 1,
                    type2: 0,
                },
                0,
            ),
        ]
    }

    fn check_kind(kind: ContextKind) -> f64 {
        let c = config(kind, 3, 3);
        let p = random_params(&c, 20, 0.5);
        let ex = gradient_examples(3);
        let g = analytic(&p, &c, &ex);
        max_relative_error(&p, &g, |q| loss(q, &c, &ex))
    }

    #[test]
    fn gradient_check_pass_through() {
        let e = check_kind(ContextKind::PassThrough);
        assert!(e < 1e-4, "max relative error {e:e}");
    }

    #[test]
    fn gradient_check_bilstm() {
        let e = check_kind(ContextKind::BiLstm);
        assert!(e < 1e-4, "max relative error {e:e}");
    }

    #[test]
    fn gradient_check_cnn() {
        let e = check_kind(ContextKind::Cnn);
        assert!(e < 1e-4, "max relative error {e:e}");
    }

    #[test]
    fn context_gradient_on_single_token() {
        // A one-token sentence cannot hold two mentions; check the context
        // layers alone against a fixed linear read-out of their outputs.
        for kind in [ContextKind::BiLstm, ContextKind::Cnn] {
            let c = config(kind, 3, 3);
            let p = random_params(&c, 30, 0.5);
            let x = words(1, 3, 31);
            let readout = words(1, c.context_dim(), 32).remove(0);
            let f = |q: &ReParams| {
                let (out, _) = context_forward(q, &c, &x);
                out[0].dot(&readout)
            };
            let (_, cache) = context_forward(&p, &c, &x);
            let mut g = p.zeros_like();
            context_backward(&p, &cache, &x, std::slice::from_ref(&readout), &mut g);
            let e = max_relative_error(&p, &g, f);
            assert!(e < 1e-4, "{kind}: max relative error {e:e}");
        }
    }

    #[test]
    fn dropout_gradient_uses_the_same_mask() {
        let mut c = config(ContextKind::Cnn, 3, 3);
        c.dropout = 0.5;
        let p = random_params(&c, 40, 0.5);
        let (ex, y) = gradient_examples(3).remove(1);
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let act = forward(&p, &c, &ex, Some(&mut rng));
        let mask = act.mask.clone().unwrap();
        let mut g = p.zeros_like();
        backward(&p, &ex, &act, y, 1.0, &mut g);
        // Replay the loss with the mask frozen.
        let f = |q: &ReParams| {
            let (mut hidden, _) = context_forward(q, &c, &ex.words);
            for (v, m) in hidden.iter_mut().zip(&mask) {
                v.component_mul_assign(m);
            }
            let (s, _) = pool(&hidden, ex.mention1, ex.mention2);
            let l1 = q.entity_embeddings.column(ex.type1).into_owned();
            let l2 = q.entity_embeddings.column(ex.type2).into_owned();
            -output_layer(q, &s, &l1, &l2)[y].ln()
        };
        let e = max_relative_error(&p, &g, f);
        assert!(e < 1e-4, "max relative error {e:e}");
    }
}
