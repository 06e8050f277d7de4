//! Small numerically-stable primitives used throughout the crate.

/// Logistic function 1 / (1 + e^-x).
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// log(1 + e^x) without overflow for large |x|.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        // e^-x below f64 epsilon relative to x
        x
    } else if x < -30.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

/// log Σ e^{x_i}; returns -inf on an empty or all -inf input, never NaN.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = xs.iter().map(|&x| (x - m).exp()).sum();
    m + sum.ln()
}

/// Normalizes log weights to probabilities summing to one.
/// Returns `None` when every weight is -inf.
pub fn log_normalize(log_w: &[f64]) -> Option<Vec<f64>> {
    let lse = logsumexp(log_w);
    if !lse.is_finite() {
        return None;
    }
    Some(log_w.iter().map(|&lw| (lw - lse).exp()).collect())
}

/// Unbiased (n-1 denominator) sample variance.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    assert!(n >= 2, "sample variance needs at least two points");
    let mean = xs.iter().sum::<f64>() / n as f64;
    xs.iter().map(|&x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
}

/// Population variance under the given probability vector.
pub fn weighted_variance(probs: &[f64], values: &[f64]) -> f64 {
    debug_assert_eq!(probs.len(), values.len());
    let mean: f64 = probs.iter().zip(values).map(|(&p, &v)| p * v).sum();
    let second: f64 = probs.iter().zip(values).map(|(&p, &v)| p * v * v).sum();
    (second - mean * mean).max(0.0)
}

/// Standard normal draw via Box-Muller.
pub fn standard_normal<R: rand::Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.gen::<f64>().max(1e-300);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Deterministically derives an independent sub-seed from a master seed,
/// so distinct pipeline stages never share random streams (splitmix64).
pub fn derive_seed(master: u64, salt: u64) -> u64 {
    let mut z = master
        .wrapping_add(salt.wrapping_mul(0x9e3779b97f4a7c15))
        .wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}
