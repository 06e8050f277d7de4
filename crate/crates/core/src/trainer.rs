//! Contrastive-divergence and persistent-CD training of small binary RBMs,
//! so end-to-end experiments can regenerate their own test models.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::math::{sigmoid, standard_normal};
use crate::model::RbmParams;

/// Binary training data, one row per example.
#[derive(Debug, Clone)]
pub struct BinaryDataset {
    rows: Vec<Vec<u8>>,
    n_visible: usize,
}

impl BinaryDataset {
    pub fn new(rows: Vec<Vec<u8>>) -> Result<Self> {
        let n_visible = rows.first().map(Vec::len).unwrap_or(0);
        if rows.is_empty() || n_visible == 0 {
            return Err(Error::InvalidDataset("dataset must be nonempty".into()));
        }
        if rows.iter().any(|r| r.len() != n_visible) {
            return Err(Error::InvalidDataset("rows have differing lengths".into()));
        }
        if rows.iter().flatten().any(|&b| b > 1) {
            return Err(Error::InvalidDataset("entries must be 0 or 1".into()));
        }
        Ok(Self { rows, n_visible })
    }

    /// Synthetic bar patterns on an `height x width` grid: every single-row
    /// bar and every single-column bar, each repeated `copies` times.
    pub fn shifted_bars(height: usize, width: usize, copies: usize) -> Self {
        assert!(height >= 1 && width >= 1 && copies >= 1);
        let d = height * width;
        let mut rows = Vec::with_capacity((height + width) * copies);
        for _ in 0..copies {
            for r in 0..height {
                let mut bits = vec![0u8; d];
                for c in 0..width {
                    bits[r * width + c] = 1;
                }
                rows.push(bits);
            }
            for c in 0..width {
                let mut bits = vec![0u8; d];
                for r in 0..height {
                    bits[r * width + c] = 1;
                }
                rows.push(bits);
            }
        }
        Self { rows, n_visible: d }
    }

    /// Reads comma-separated 0/1 rows, one example per line, no header.
    pub fn from_csv_file(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let mut rows = Vec::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let row = line
                .trim()
                .split(',')
                .map(|f| match f.trim() {
                    "0" => Ok(0u8),
                    "1" => Ok(1u8),
                    other => Err(Error::MalformedFile {
                        path: path.display().to_string(),
                        reason: format!("expected 0 or 1, got {other:?}"),
                    }),
                })
                .collect::<Result<Vec<u8>>>()?;
            rows.push(row);
        }
        Self::new(rows)
    }

    pub fn rows(&self) -> &[Vec<u8>] {
        &self.rows
    }

    pub fn n_visible(&self) -> usize {
        self.n_visible
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainAlgorithm {
    /// Contrastive divergence: negative chains restart at the data.
    Cd,
    /// Persistent contrastive divergence: negative chains persist across
    /// updates.
    Pcd,
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub algorithm: TrainAlgorithm,
    /// Gibbs steps per negative-phase update (the k of CD-k).
    pub gibbs_steps: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// L2 penalty applied to the weights only.
    pub l2: f64,
    pub seed: u64,
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.gibbs_steps < 1 {
            return Err(Error::InvalidArgument("gibbs_steps must be >= 1".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(
                "learning_rate must be finite and non-negative".into(),
            ));
        }
        if self.epochs < 1 || self.batch_size < 1 {
            return Err(Error::InvalidArgument(
                "epochs and batch_size must be >= 1".into(),
            ));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::InvalidArgument("l2 must be finite and >= 0".into()));
        }
        Ok(())
    }
}

/// Stochastic-gradient CD-k / PCD training.
///
/// The positive phase uses hidden probabilities; negative chains propagate
/// binary samples and the final gradient uses hidden probabilities at the
/// chain state. Weight init is Gaussian with standard deviation 0.01 (row
/// by row), biases start at zero. All randomness comes from a generator
/// seeded with `config.seed`: initialization first, then per epoch a
/// shuffle of the row order, then per update the hidden draws (unit order)
/// and visible draws (unit order) of each negative chain in chain order.
pub fn train(data: &BinaryDataset, m_hidden: usize, config: &TrainConfig) -> Result<RbmParams> {
    if m_hidden < 1 {
        return Err(Error::InvalidArgument("m_hidden must be >= 1".into()));
    }
    config.validate()?;
    let d = data.n_visible();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut weights: Vec<Vec<f64>> = (0..m_hidden)
        .map(|_| (0..d).map(|_| 0.01 * standard_normal(&mut rng)).collect())
        .collect();
    let mut hidden_bias = vec![0.0; m_hidden];
    let mut visible_bias = vec![0.0; d];

    // persistent chains start at the leading data rows
    let mut persistent: Vec<Vec<u8>> = (0..config.batch_size)
        .map(|i| data.rows()[i % data.len()].clone())
        .collect();

    let mut order: Vec<usize> = (0..data.len()).collect();
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let mut pos_w = vec![vec![0.0; d]; m_hidden];
            let mut pos_a = vec![0.0; m_hidden];
            let mut pos_b = vec![0.0; d];
            for &row_idx in batch {
                let v = &data.rows()[row_idx];
                let ph = hidden_probs(&weights, &hidden_bias, v);
                accumulate(&mut pos_w, &mut pos_a, &mut pos_b, &ph, v);
            }

            let mut chains: Vec<Vec<u8>> = match config.algorithm {
                TrainAlgorithm::Cd => batch.iter().map(|&i| data.rows()[i].clone()).collect(),
                TrainAlgorithm::Pcd => std::mem::take(&mut persistent),
            };
            for chain in &mut chains {
                for _ in 0..config.gibbs_steps {
                    let ph = hidden_probs(&weights, &hidden_bias, chain);
                    let h: Vec<u8> = ph.iter().map(|&p| u8::from(rng.gen::<f64>() < p)).collect();
                    for j in 0..d {
                        let mut act = visible_bias[j];
                        for i in 0..m_hidden {
                            if h[i] == 1 {
                                act += weights[i][j];
                            }
                        }
                        chain[j] = u8::from(rng.gen::<f64>() < sigmoid(act));
                    }
                }
            }
            let mut neg_w = vec![vec![0.0; d]; m_hidden];
            let mut neg_a = vec![0.0; m_hidden];
            let mut neg_b = vec![0.0; d];
            for chain in &chains {
                let ph = hidden_probs(&weights, &hidden_bias, chain);
                accumulate(&mut neg_w, &mut neg_a, &mut neg_b, &ph, chain);
            }
            let n_neg = chains.len() as f64;
            if config.algorithm == TrainAlgorithm::Pcd {
                persistent = chains;
            }

            let n_pos = batch.len() as f64;
            let lr = config.learning_rate;
            for i in 0..m_hidden {
                for j in 0..d {
                    weights[i][j] += lr * (pos_w[i][j] / n_pos - neg_w[i][j] / n_neg)
                        - lr * config.l2 * weights[i][j];
                }
                hidden_bias[i] += lr * (pos_a[i] / n_pos - neg_a[i] / n_neg);
            }
            for j in 0..d {
                visible_bias[j] += lr * (pos_b[j] / n_pos - neg_b[j] / n_neg);
            }
        }
        let finite = weights
            .iter()
            .flatten()
            .chain(&hidden_bias)
            .chain(&visible_bias)
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::TrainingDiverged { epoch });
        }
    }
    RbmParams::new(weights, hidden_bias, visible_bias)
}

fn hidden_probs(weights: &[Vec<f64>], hidden_bias: &[f64], v: &[u8]) -> Vec<f64> {
    weights
        .iter()
        .zip(hidden_bias)
        .map(|(row, &a)| {
            let act = a + row
                .iter()
                .zip(v)
                .map(|(&w, &vj)| w * f64::from(vj))
                .sum::<f64>();
            sigmoid(act)
        })
        .collect()
}

fn accumulate(acc_w: &mut [Vec<f64>], acc_a: &mut [f64], acc_b: &mut [f64], ph: &[f64], v: &[u8]) {
    for (i, &p) in ph.iter().enumerate() {
        acc_a[i] += p;
        for (j, &vj) in v.iter().enumerate() {
            if vj == 1 {
                acc_w[i][j] += p;
            }
        }
    }
    for (j, &vj) in v.iter().enumerate() {
        if vj == 1 {
            acc_b[j] += 1.0;
        }
    }
}
