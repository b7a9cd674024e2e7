use nalgebra::DMatrix;
use rand::Rng;

use super::config::{ContextKind, ReConfig};

const INIT_RANGE: f64 = 0.08;

/// One LSTM direction. Gate blocks are stacked row-wise in the order
/// input, forget, output, cell candidate: `w` is `4h x d`, `u` is `4h x h`
/// and `b` is `4h x 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmWeights {
    pub w: DMatrix<f64>,
    pub u: DMatrix<f64>,
    pub b: DMatrix<f64>,
}

impl LstmWeights {
    fn init<R: Rng>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let mut b = DMatrix::zeros(4 * hidden, 1);
        b.rows_mut(hidden, hidden).fill(1.0);
        LstmWeights {
            w: uniform(4 * hidden, input, rng),
            u: uniform(4 * hidden, hidden, rng),
            b,
        }
    }

    pub fn hidden_dim(&self) -> usize {
        self.u.ncols()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ContextParams {
    PassThrough,
    BiLstm {
        forward: LstmWeights,
        backward: LstmWeights,
    },
    /// `w` is `h x kd`, `b` is `h x 1`.
    Cnn { w: DMatrix<f64>, b: DMatrix<f64> },
}

/// Every trainable tensor of the network. Vectors are stored as one-column
/// matrices so that optimizers and checks can treat all tensors alike.
#[derive(Clone, Debug, PartialEq)]
pub struct ReParams {
    /// `d_m x |entity types|`, one column per type.
    pub entity_embeddings: DMatrix<f64>,
    pub context: ContextParams,
    /// `L x 5h`
    pub w_s: DMatrix<f64>,
    /// `L x d_m`
    pub w_m1: DMatrix<f64>,
    pub w_m2: DMatrix<f64>,
    pub b_o: DMatrix<f64>,
}

fn uniform<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-INIT_RANGE..INIT_RANGE))
}

impl ReParams {
    /// Uniform(-0.08, 0.08) weights, zero biases, forget-gate bias 1.
    pub fn init<R: Rng>(config: &ReConfig, rng: &mut R) -> Self {
        let d = config.word_dim;
        let h = config.hidden_dim;
        let entity_embeddings = uniform(config.entity_dim, config.entity_types.len(), rng);
        let context = match config.context {
            ContextKind::PassThrough => ContextParams::PassThrough,
            ContextKind::BiLstm => ContextParams::BiLstm {
                forward: LstmWeights::init(d, h, rng),
                backward: LstmWeights::init(d, h, rng),
            },
            ContextKind::Cnn => ContextParams::Cnn {
                w: uniform(h, config.cnn_window * d, rng),
                b: DMatrix::zeros(h, 1),
            },
        };
        let l = config.labels.len();
        ReParams {
            entity_embeddings,
            context,
            w_s: uniform(l, config.summary_dim(), rng),
            w_m1: uniform(l, config.entity_dim, rng),
            w_m2: uniform(l, config.entity_dim, rng),
            b_o: DMatrix::zeros(l, 1),
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }

    /// Named tensors in a fixed order.
    pub fn tensors(&self) -> Vec<(&'static str, &DMatrix<f64>)> {
        let mut out = vec![("entity_embeddings", &self.entity_embeddings)];
        match &self.context {
            ContextParams::PassThrough => {}
            ContextParams::BiLstm { forward, backward } => out.extend([
                ("lstm_fw_w", &forward.w),
                ("lstm_fw_u", &forward.u),
                ("lstm_fw_b", &forward.b),
                ("lstm_bw_w", &backward.w),
                ("lstm_bw_u", &backward.u),
                ("lstm_bw_b", &backward.b),
            ]),
            ContextParams::Cnn { w, b } => out.extend([("cnn_w", w), ("cnn_b", b)]),
        }
        out.extend([
            ("out_w_s", &self.w_s),
            ("out_w_m1", &self.w_m1),
            ("out_w_m2", &self.w_m2),
            ("out_b", &self.b_o),
        ]);
        out
    }

    /// Same order as [`ReParams::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut DMatrix<f64>> {
        let mut out = vec![&mut self.entity_embeddings];
        match &mut self.context {
            ContextParams::PassThrough => {}
            ContextParams::BiLstm { forward, backward } => out.extend([
                &mut forward.w,
                &mut forward.u,
                &mut forward.b,
                &mut backward.w,
                &mut backward.u,
                &mut backward.b,
            ]),
            ContextParams::Cnn { w, b } => out.extend([w, b]),
        }
        out.extend([&mut self.w_s, &mut self.w_m1, &mut self.w_m2, &mut self.b_o]);
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn shapes_follow_config() {
        let mut c = ReConfig::new(ContextKind::BiLstm, vec!["O".into(), "r".into(), "s".into()], vec!["A".into(), "B".into()]);
        c.word_dim = 4;
        c.entity_dim = 2;
        c.hidden_dim = 3;
        let p = ReParams::init(&c, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(p.entity_embeddings.shape(), (2, 2));
        assert_eq!(p.w_s.shape(), (3, 30));
        let ContextParams::BiLstm { forward, .. } = &p.context else { panic!() };
        assert_eq!(forward.w.shape(), (12, 4));
        assert_eq!(forward.u.shape(), (12, 3));
        assert!(forward.b.rows(3, 3).iter().all(|&x| x == 1.0));
        assert!(forward.b.rows(0, 3).iter().all(|&x| x == 0.0));
        assert_eq!(p.tensors().len(), p.zeros_like().tensors_mut().len());
    }
}
