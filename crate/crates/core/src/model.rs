//! Binary RBM energy model, the geometric annealing path between a
//! tractable base model and a target model, and the Markov transition
//! operator used by the annealed chains.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{sigmoid, softplus};

/// Parameters of a binary restricted Boltzmann machine.
///
/// The joint energy of hidden units `h` and visible units `v` is
/// `-v'W'h - a'h - b'v`, with `weights` stored row-major as one row of
/// length `n_visible` per hidden unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbmParams {
    n_visible: usize,
    n_hidden: usize,
    weights: Vec<Vec<f64>>,
    hidden_bias: Vec<f64>,
    visible_bias: Vec<f64>,
}

impl RbmParams {
    pub fn new(
        weights: Vec<Vec<f64>>,
        hidden_bias: Vec<f64>,
        visible_bias: Vec<f64>,
    ) -> Result<Self> {
        let params = Self {
            n_visible: visible_bias.len(),
            n_hidden: hidden_bias.len(),
            weights,
            hidden_bias,
            visible_bias,
        };
        params.validate()?;
        Ok(params)
    }

    /// Zero-weight, zero-hidden-bias model over `visible_bias.len()` units.
    /// Its visible marginal is factorial, so it can be sampled exactly.
    pub fn zero_weight_base(n_hidden: usize, visible_bias: Vec<f64>) -> Result<Self> {
        let n_visible = visible_bias.len();
        Self::new(
            vec![vec![0.0; n_visible]; n_hidden],
            vec![0.0; n_hidden],
            visible_bias,
        )
    }

    fn validate(&self) -> Result<()> {
        if self.n_visible == 0 || self.n_hidden == 0 {
            return Err(Error::InvalidModel(
                "n_visible and n_hidden must be positive".into(),
            ));
        }
        if self.hidden_bias.len() != self.n_hidden || self.visible_bias.len() != self.n_visible {
            return Err(Error::InvalidModel("bias length mismatch".into()));
        }
        if self.weights.len() != self.n_hidden
            || self.weights.iter().any(|row| row.len() != self.n_visible)
        {
            return Err(Error::InvalidModel(format!(
                "weights must be {}x{}",
                self.n_hidden, self.n_visible
            )));
        }
        let finite = self
            .weights
            .iter()
            .flatten()
            .chain(&self.hidden_bias)
            .chain(&self.visible_bias)
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidModel("non-finite parameter entry".into()));
        }
        Ok(())
    }

    pub fn n_visible(&self) -> usize {
        self.n_visible
    }

    pub fn n_hidden(&self) -> usize {
        self.n_hidden
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn hidden_bias(&self) -> &[f64] {
        &self.hidden_bias
    }

    pub fn visible_bias(&self) -> &[f64] {
        &self.visible_bias
    }

    pub fn has_zero_weights(&self) -> bool {
        self.weights.iter().flatten().all(|&w| w == 0.0)
    }

    /// Hidden pre-activations `a_i + (W v)_i`.
    pub(crate) fn hidden_activations(&self, v: &[u8]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.n_visible);
        self.weights
            .iter()
            .zip(&self.hidden_bias)
            .map(|(row, &a)| {
                a + row
                    .iter()
                    .zip(v)
                    .map(|(&w, &vj)| w * f64::from(vj))
                    .sum::<f64>()
            })
            .collect()
    }

    /// Joint energy `-Σ v_j w_ij h_i - Σ a_i h_i - Σ b_j v_j`.
    pub fn energy(&self, h: &[u8], v: &VisibleState) -> f64 {
        assert_eq!(h.len(), self.n_hidden, "hidden vector length mismatch");
        assert_eq!(v.len(), self.n_visible, "visible vector length mismatch");
        debug_assert!(h.iter().all(|&b| b <= 1));
        let mut e = 0.0;
        for (i, row) in self.weights.iter().enumerate() {
            if h[i] == 1 {
                e -= self.hidden_bias[i];
                for (j, &w) in row.iter().enumerate() {
                    if v.bit(j) == 1 {
                        e -= w;
                    }
                }
            }
        }
        for (j, &b) in self.visible_bias.iter().enumerate() {
            if v.bit(j) == 1 {
                e -= b;
            }
        }
        e
    }

    /// Log unnormalized visible marginal, `log Σ_h e^{-E(h, v)}`, in the
    /// closed form `b'v + Σ_i softplus(a_i + (W v)_i)`.
    pub fn log_pstar(&self, v: &VisibleState) -> f64 {
        assert_eq!(v.len(), self.n_visible, "visible vector length mismatch");
        let bias: f64 = self
            .visible_bias
            .iter()
            .zip(v.bits())
            .map(|(&b, &vj)| b * f64::from(vj))
            .sum();
        bias + self
            .hidden_activations(v.bits())
            .iter()
            .map(|&x| softplus(x))
            .sum::<f64>()
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let params: Self = serde_json::from_str(s)?;
        params.validate()?;
        Ok(params)
    }

    pub fn to_json_file(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string()?)?;
        Ok(())
    }

    pub fn from_json_file(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let text = std::fs::read_to_string(&path).map_err(|e| Error::MalformedFile {
            path: path.as_ref().display().to_string(),
            reason: e.to_string(),
        })?;
        Self::from_json_str(&text).map_err(|e| Error::MalformedFile {
            path: path.as_ref().display().to_string(),
            reason: e.to_string(),
        })
    }
}

/// A configuration of the visible layer, entries in {0, 1}.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VisibleState {
    bits: Vec<u8>,
}

impl VisibleState {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::InvalidArgument(
                "visible entries must be 0 or 1".into(),
            ));
        }
        Ok(Self { bits })
    }

    /// State whose j-th bit is bit j of `index`; inverse of [`Self::index`].
    pub fn from_index(index: usize, n_visible: usize) -> Self {
        let bits = (0..n_visible).map(|j| ((index >> j) & 1) as u8).collect();
        Self { bits }
    }

    pub fn index(&self) -> usize {
        self.bits
            .iter()
            .enumerate()
            .map(|(j, &b)| (b as usize) << j)
            .sum()
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn bit(&self, j: usize) -> u8 {
        self.bits[j]
    }
}

/// Geometric annealing path `log p*_beta = (1-beta) log p*_A + beta log p*_B`
/// between a zero-weight base model and an arbitrary target over the same
/// visible space.
#[derive(Debug, Clone)]
pub struct GeometricPath {
    base: RbmParams,
    target: RbmParams,
    // Σ softplus(a_A): the base hidden layer's constant contribution,
    // valid because the base weights are exactly zero.
    base_hidden_term: f64,
}

impl GeometricPath {
    pub fn new(base: RbmParams, target: RbmParams) -> Result<Self> {
        if base.n_visible() != target.n_visible() {
            return Err(Error::InvalidModel(format!(
                "base and target share the visible space: {} vs {}",
                base.n_visible(),
                target.n_visible()
            )));
        }
        if !base.has_zero_weights() {
            return Err(Error::NonZeroBaseWeights);
        }
        let base_hidden_term = base.hidden_bias().iter().map(|&a| softplus(a)).sum();
        Ok(Self {
            base,
            target,
            base_hidden_term,
        })
    }

    pub fn base(&self) -> &RbmParams {
        &self.base
    }

    pub fn target(&self) -> &RbmParams {
        &self.target
    }

    pub fn n_visible(&self) -> usize {
        self.base.n_visible()
    }

    /// Exact log partition function of the base model,
    /// `Σ softplus(a_A) + Σ softplus(b_A)`.
    pub fn base_log_z(&self) -> f64 {
        self.base_hidden_term
            + self
                .base
                .visible_bias()
                .iter()
                .map(|&b| softplus(b))
                .sum::<f64>()
    }

    /// Log unnormalized density of the intermediate distribution.
    pub fn log_pstar_beta(&self, v: &VisibleState, beta: f64) -> f64 {
        assert!((0.0..=1.0).contains(&beta), "beta must lie in [0, 1]");
        (1.0 - beta) * self.base.log_pstar(v) + beta * self.target.log_pstar(v)
    }

    /// Derivative of `log p*_beta(v)` in beta. The path is affine in beta,
    /// so this is `log p*_B(v) - log p*_A(v)` independent of beta.
    pub fn dlog_pstar_dbeta(&self, v: &VisibleState) -> f64 {
        self.target.log_pstar(v) - self.base.log_pstar(v)
    }

    /// Exact independent draw from the base distribution: each visible unit
    /// is Bernoulli(sigmoid(b_A_j)) since the base weights are zero.
    pub fn sample_base<R: Rng>(&self, rng: &mut R) -> VisibleState {
        let bits = self
            .base
            .visible_bias()
            .iter()
            .map(|&b| u8::from(rng.gen::<f64>() < sigmoid(b)))
            .collect();
        VisibleState { bits }
    }

    /// One systematic-scan Gibbs sweep over the visible units that leaves
    /// p_beta exactly invariant: each site is resampled in index order from
    /// its conditional under `log_pstar_beta`.
    pub fn gibbs_transition<R: Rng>(
        &self,
        v: &VisibleState,
        beta: f64,
        rng: &mut R,
    ) -> VisibleState {
        assert!((0.0..=1.0).contains(&beta), "beta must lie in [0, 1]");
        assert_eq!(v.len(), self.n_visible(), "visible vector length mismatch");
        let mut chain = ChainState::new(self, v.clone());
        chain.sweep(self, beta, rng);
        chain.into_state()
    }
}

/// Working state of one annealed chain: the visible configuration plus the
/// target model's hidden pre-activations, kept in sync so the per-site
/// conditionals and the log-density deltas are cheap.
#[derive(Debug, Clone)]
pub(crate) struct ChainState {
    v: Vec<u8>,
    /// Target hidden pre-activations a_B + W_B v.
    x: Vec<f64>,
    /// Σ softplus(x).
    sp_sum: f64,
}

impl ChainState {
    pub(crate) fn new(path: &GeometricPath, v: VisibleState) -> Self {
        let mut chain = Self {
            v: v.bits,
            x: Vec::new(),
            sp_sum: 0.0,
        };
        chain.refresh(path);
        chain
    }

    fn refresh(&mut self, path: &GeometricPath) {
        self.x = path.target.hidden_activations(&self.v);
        self.sp_sum = self.x.iter().map(|&x| softplus(x)).sum();
    }

    pub(crate) fn into_state(self) -> VisibleState {
        VisibleState { bits: self.v }
    }

    pub(crate) fn state(&self) -> VisibleState {
        VisibleState {
            bits: self.v.clone(),
        }
    }

    fn dot_bias(bias: &[f64], v: &[u8]) -> f64 {
        bias.iter().zip(v).map(|(&b, &vj)| b * f64::from(vj)).sum()
    }

    /// log p*_B(v) - log p*_A(v) for the current configuration.
    pub(crate) fn dlog(&self, path: &GeometricPath) -> f64 {
        let target = Self::dot_bias(path.target.visible_bias(), &self.v) + self.sp_sum;
        let base = Self::dot_bias(path.base.visible_bias(), &self.v) + path.base_hidden_term;
        target - base
    }

    /// One full sweep of single-site Gibbs updates at inverse interpolation
    /// `beta`. Pre-activations are rebuilt at sweep entry so incremental
    /// round-off cannot accumulate across annealing steps.
    pub(crate) fn sweep<R: Rng>(&mut self, path: &GeometricPath, beta: f64, rng: &mut R) {
        self.refresh(path);
        let base_bias = path.base.visible_bias();
        let target_bias = path.target.visible_bias();
        let weights = path.target.weights();
        let m = path.target.n_hidden();
        for j in 0..self.v.len() {
            // Softplus total of the configuration with site j flipped.
            let mut flipped = 0.0;
            if self.v[j] == 1 {
                for i in 0..m {
                    flipped += softplus(self.x[i] - weights[i][j]);
                }
            } else {
                for i in 0..m {
                    flipped += softplus(self.x[i] + weights[i][j]);
                }
            }
            let (sp_on, sp_off) = if self.v[j] == 1 {
                (self.sp_sum, flipped)
            } else {
                (flipped, self.sp_sum)
            };
            let log_odds = (1.0 - beta) * base_bias[j] + beta * (target_bias[j] + sp_on - sp_off);
            let new_bit = u8::from(rng.gen::<f64>() < sigmoid(log_odds));
            if new_bit != self.v[j] {
                let sign = if new_bit == 1 { 1.0 } else { -1.0 };
                for i in 0..m {
                    self.x[i] += sign * weights[i][j];
                }
                self.sp_sum = flipped;
                self.v[j] = new_bit;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn zero_params(m: usize, d: usize) -> RbmParams {
        RbmParams::new(vec![vec![0.0; d]; m], vec![0.0; m], vec![0.0; d]).unwrap()
    }

    fn state(bits: &[u8]) -> VisibleState {
        VisibleState::new(bits.to_vec()).unwrap()
    }

    /// log p* by explicit summation over all 2^M hidden configurations.
    fn log_pstar_bruteforce(params: &RbmParams, v: &VisibleState) -> f64 {
        let m = params.n_hidden();
        let terms: Vec<f64> = (0..1usize << m)
            .map(|idx| {
                let h: Vec<u8> = (0..m).map(|i| ((idx >> i) & 1) as u8).collect();
                -params.energy(&h, v)
            })
            .collect();
        crate::math::logsumexp(&terms)
    }

    #[test]
    fn energy_zero_params_is_zero() {
        let params = zero_params(2, 3);
        assert_eq!(params.energy(&[1, 0], &state(&[1, 1, 0])), 0.0);
    }

    #[test]
    fn energy_term_by_term() {
        // M=1, D=2, W=[[1,2]], a=[0.5], b=[-1,0], h=[1], v=[1,1]
        let params = RbmParams::new(vec![vec![1.0, 2.0]], vec![0.5], vec![-1.0, 0.0]).unwrap();
        let e = params.energy(&[1], &state(&[1, 1]));
        assert!((e - (-2.5)).abs() < 1e-15);
    }

    #[test]
    fn energy_visible_bias_only() {
        let params = RbmParams::new(vec![vec![0.3, -0.7]], vec![0.9], vec![1.0, 1.0]).unwrap();
        let e = params.energy(&[0], &state(&[1, 1]));
        assert_eq!(e, -2.0);
    }

    #[test]
    fn log_pstar_zero_params() {
        let params = zero_params(3, 2);
        let got = params.log_pstar(&state(&[0, 1]));
        assert!((got - 3.0 * std::f64::consts::LN_2).abs() < 1e-14);
    }

    #[test]
    fn log_pstar_single_unit() {
        let params = RbmParams::new(vec![vec![1.0]], vec![0.0], vec![0.0]).unwrap();
        let got = params.log_pstar(&state(&[1]));
        assert!((got - (1.0 + std::f64::consts::E).ln()).abs() < 1e-14);
    }

    #[test]
    fn log_pstar_matches_hidden_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let m = 1 + rng.gen_range(0..6);
            let d = 1 + rng.gen_range(0..5);
            let weights = (0..m)
                .map(|_| (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect())
                .collect();
            let a = (0..m).map(|_| rng.gen_range(-1.5..1.5)).collect();
            let b = (0..d).map(|_| rng.gen_range(-1.5..1.5)).collect();
            let params = RbmParams::new(weights, a, b).unwrap();
            for idx in 0..1usize << d {
                let v = VisibleState::from_index(idx, d);
                let closed = params.log_pstar(&v);
                let brute = log_pstar_bruteforce(&params, &v);
                assert!(
                    (closed - brute).abs() < 1e-10,
                    "closed {closed} vs brute {brute}"
                );
            }
        }
    }

    #[test]
    fn log_pstar_matches_enumeration_at_twelve_hidden_units() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let (d, m) = (4, 12);
        let weights = (0..m)
            .map(|_| (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        let a = (0..m).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let b = (0..d).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let params = RbmParams::new(weights, a, b).unwrap();
        for idx in 0..1usize << d {
            let v = VisibleState::from_index(idx, d);
            let gap = (params.log_pstar(&v) - log_pstar_bruteforce(&params, &v)).abs();
            assert!(gap < 1e-10, "gap {gap}");
        }
    }

    #[test]
    fn log_pstar_stable_for_extreme_activations() {
        let params = RbmParams::new(vec![vec![800.0]], vec![200.0], vec![-500.0]).unwrap();
        let v = state(&[1]);
        let got = params.log_pstar(&v);
        // softplus(1000) = 1000, bias -500
        assert!((got - 500.0).abs() < 1e-9);
        assert!(got.is_finite());
    }

    fn random_path(rng: &mut ChaCha8Rng, d: usize, m: usize) -> GeometricPath {
        let base_bias = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let base = RbmParams::zero_weight_base(2, base_bias).unwrap();
        let weights = (0..m)
            .map(|_| (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        let a = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let target = RbmParams::new(weights, a, b).unwrap();
        GeometricPath::new(base, target).unwrap()
    }

    #[test]
    fn path_requires_zero_base_weights() {
        let base = RbmParams::new(vec![vec![0.1]], vec![0.0], vec![0.0]).unwrap();
        let target = zero_params(1, 1);
        assert!(matches!(
            GeometricPath::new(base, target),
            Err(Error::NonZeroBaseWeights)
        ));
    }

    #[test]
    fn log_pstar_beta_endpoints() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let path = random_path(&mut rng, 4, 3);
        for idx in 0..16 {
            let v = VisibleState::from_index(idx, 4);
            assert_eq!(path.log_pstar_beta(&v, 0.0), path.base().log_pstar(&v));
            assert_eq!(path.log_pstar_beta(&v, 1.0), path.target().log_pstar(&v));
        }
    }

    #[test]
    fn degenerate_path_is_beta_independent() {
        let params = RbmParams::zero_weight_base(2, vec![0.4, -0.3]).unwrap();
        let path = GeometricPath::new(params.clone(), params).unwrap();
        let v = state(&[1, 0]);
        let at0 = path.log_pstar_beta(&v, 0.0);
        for &beta in &[0.2, 0.5, 0.9, 1.0] {
            assert!((path.log_pstar_beta(&v, beta) - at0).abs() < 1e-15);
        }
        assert_eq!(path.dlog_pstar_dbeta(&v), 0.0);
    }

    #[test]
    fn dlog_equals_endpoint_difference_and_finite_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let path = random_path(&mut rng, 5, 3);
        let eps = 1e-4;
        for idx in 0..32 {
            let v = VisibleState::from_index(idx, 5);
            let d = path.dlog_pstar_dbeta(&v);
            let exact = path.log_pstar_beta(&v, 1.0) - path.log_pstar_beta(&v, 0.0);
            assert_eq!(d, exact);
            let fd = (path.log_pstar_beta(&v, 0.5 + eps) - path.log_pstar_beta(&v, 0.5 - eps))
                / (2.0 * eps);
            assert!((d - fd).abs() < 1e-8 * (1.0 + d.abs()));
        }
    }

    #[test]
    fn dlog_reduces_to_visible_bias_for_zero_weight_pair() {
        let base = RbmParams::zero_weight_base(1, vec![0.0]).unwrap();
        let target = RbmParams::zero_weight_base(1, vec![1.0]).unwrap();
        let path = GeometricPath::new(base, target).unwrap();
        assert_eq!(path.dlog_pstar_dbeta(&state(&[0])), 0.0);
        assert_eq!(path.dlog_pstar_dbeta(&state(&[1])), 1.0);
    }

    #[test]
    fn sample_base_matches_bias_frequencies() {
        let bias = vec![0.0, 20.0, -1.0];
        let base = RbmParams::zero_weight_base(1, bias.clone()).unwrap();
        let target = zero_params(2, 3);
        let path = GeometricPath::new(base, target).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        let n = 100_000;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            let v = path.sample_base(&mut rng);
            for j in 0..3 {
                counts[j] += v.bit(j) as usize;
            }
        }
        for j in 0..3 {
            let p = sigmoid(bias[j]);
            let freq = counts[j] as f64 / n as f64;
            let se = (p * (1.0 - p) / n as f64).sqrt().max(1e-6);
            assert!(
                (freq - p).abs() <= 3.0 * se,
                "bit {j}: freq {freq} vs p {p}"
            );
        }
    }

    /// Exact one-sweep transition matrix over all 2^D visible states, built
    /// from log_pstar_beta alone: product of per-site conditional kernels in
    /// scan order.
    fn exact_sweep_kernel(path: &GeometricPath, beta: f64) -> Vec<Vec<f64>> {
        let d = path.n_visible();
        let n = 1usize << d;
        let mut kernel: Vec<Vec<f64>> = (0..n)
            .map(|s| (0..n).map(|t| if s == t { 1.0 } else { 0.0 }).collect())
            .collect();
        for j in 0..d {
            let mut site = vec![vec![0.0; n]; n];
            for s in 0..n {
                let s1 = s | (1 << j);
                let s0 = s & !(1 << j);
                let f1 = path.log_pstar_beta(&VisibleState::from_index(s1, d), beta);
                let f0 = path.log_pstar_beta(&VisibleState::from_index(s0, d), beta);
                let p1 = sigmoid(f1 - f0);
                site[s][s1] = p1;
                site[s][s0] = 1.0 - p1;
            }
            let mut next = vec![vec![0.0; n]; n];
            for s in 0..n {
                for mid in 0..n {
                    let k = kernel[s][mid];
                    if k != 0.0 {
                        for t in 0..n {
                            next[s][t] += k * site[mid][t];
                        }
                    }
                }
            }
            kernel = next;
        }
        kernel
    }

    fn exact_p_beta(path: &GeometricPath, beta: f64) -> Vec<f64> {
        let d = path.n_visible();
        let logs: Vec<f64> = (0..1usize << d)
            .map(|s| path.log_pstar_beta(&VisibleState::from_index(s, d), beta))
            .collect();
        crate::math::log_normalize(&logs).unwrap()
    }

    #[test]
    fn gibbs_sweep_leaves_p_beta_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let path = random_path(&mut rng, 3, 2);
        for &beta in &[0.0, 0.25, 0.5, 0.75, 1.0] {
            let kernel = exact_sweep_kernel(&path, beta);
            let p = exact_p_beta(&path, beta);
            let n = p.len();
            for t in 0..n {
                let pushed: f64 = (0..n).map(|s| p[s] * kernel[s][t]).sum();
                assert!(
                    (pushed - p[t]).abs() < 1e-12,
                    "beta {beta}, state {t}: {pushed} vs {}",
                    p[t]
                );
            }
        }
    }

    #[test]
    fn gibbs_sampler_matches_exact_kernel_row() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let path = random_path(&mut rng, 3, 2);
        let beta = 0.6;
        let kernel = exact_sweep_kernel(&path, beta);
        let start = state(&[1, 0, 1]);
        let row = &kernel[start.index()];
        let n_draws = 200_000;
        let mut counts = vec![0usize; row.len()];
        for _ in 0..n_draws {
            let next = path.gibbs_transition(&start, beta, &mut rng);
            counts[next.index()] += 1;
        }
        for (t, &p) in row.iter().enumerate() {
            let freq = counts[t] as f64 / n_draws as f64;
            let se = (p * (1.0 - p) / n_draws as f64).sqrt().max(1e-6);
            assert!(
                (freq - p).abs() <= 4.5 * se,
                "state {t}: freq {freq} vs exact {p}"
            );
        }
    }

    #[test]
    fn gibbs_at_beta_zero_mixes_in_one_sweep() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let path = random_path(&mut rng, 3, 2);
        let kernel = exact_sweep_kernel(&path, 0.0);
        let p0 = exact_p_beta(&path, 0.0);
        // every row of the kernel is the base distribution
        for row in &kernel {
            for (t, &p) in p0.iter().enumerate() {
                assert!((row[t] - p).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn degenerate_path_kernel_is_beta_independent() {
        let params = RbmParams::zero_weight_base(2, vec![0.5, -0.2, 0.1]).unwrap();
        let path = GeometricPath::new(params.clone(), params).unwrap();
        let k0 = exact_sweep_kernel(&path, 0.0);
        for &beta in &[0.3, 0.7, 1.0] {
            let kb = exact_sweep_kernel(&path, beta);
            for (r0, rb) in k0.iter().zip(&kb) {
                for (a, b) in r0.iter().zip(rb) {
                    assert!((a - b).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn model_json_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let weights = vec![
            (0..4).map(|_| rng.gen_range(-3.0..3.0)).collect::<Vec<_>>(),
            (0..4).map(|_| rng.gen_range(-3.0..3.0)).collect::<Vec<_>>(),
        ];
        let params =
            RbmParams::new(weights, vec![0.25, -1.5], vec![0.0, 1.0, -2.0, 0.125]).unwrap();
        let text = params.to_json_string().unwrap();
        let back = RbmParams::from_json_str(&text).unwrap();
        assert_eq!(params, back);
        // schema keys present exactly as documented
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        for key in [
            "n_visible",
            "n_hidden",
            "weights",
            "hidden_bias",
            "visible_bias",
        ] {
            assert!(value.get(key).is_some(), "missing key {key}");
        }
    }

    #[test]
    fn model_json_rejects_inconsistent_dims() {
        let text = r#"{"n_visible": 2, "n_hidden": 1, "weights": [[0.0]],
                       "hidden_bias": [0.0], "visible_bias": [0.0, 0.0]}"#;
        assert!(RbmParams::from_json_str(text).is_err());
    }

    #[test]
    #[should_panic(expected = "beta must lie in [0, 1]")]
    fn log_pstar_beta_rejects_out_of_range() {
        let params = zero_params(1, 1);
        let path = GeometricPath::new(params.clone(), params).unwrap();
        path.log_pstar_beta(&state(&[0]), 1.5);
    }
}
