//! Exhaustive-enumeration ground truth for small models: exact partition
//! functions, exact intermediate distributions, and the exact variance
//! profile g(beta) along a path.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::math::{logsumexp, softplus, weighted_variance};
use crate::model::{GeometricPath, RbmParams, VisibleState};

/// Default cap on the enumerated layer (2^cap states).
pub const DEFAULT_ENUMERATION_CAP: usize = 20;

/// Largest visible layer for which a full path table is built.
pub const PATH_TABLE_MAX_VISIBLE: usize = 16;

/// Which layer was summed out explicitly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EnumerationMethod {
    EnumerateHidden,
    EnumerateVisible,
}

/// Exact log partition function together with how it was computed.
#[derive(Debug, Clone, Serialize)]
pub struct ExactSummary {
    pub log_z: f64,
    /// (n_visible, n_hidden)
    pub model_dims: (usize, usize),
    pub method: EnumerationMethod,
}

/// Exact log Z, enumerating whichever layer is smaller.
pub fn exact_log_z(params: &RbmParams) -> Result<ExactSummary> {
    exact_log_z_with(params, None, DEFAULT_ENUMERATION_CAP)
}

/// Exact log Z with an explicit enumeration side and state cap.
/// `method = None` picks the smaller layer.
pub fn exact_log_z_with(
    params: &RbmParams,
    method: Option<EnumerationMethod>,
    cap: usize,
) -> Result<ExactSummary> {
    let (d, m) = (params.n_visible(), params.n_hidden());
    let method = method.unwrap_or(if m <= d {
        EnumerationMethod::EnumerateHidden
    } else {
        EnumerationMethod::EnumerateVisible
    });
    let layer = match method {
        EnumerationMethod::EnumerateHidden => m,
        EnumerationMethod::EnumerateVisible => d,
    };
    if layer > cap {
        return Err(Error::EnumerationTooLarge {
            n_visible: d,
            n_hidden: m,
            cap,
        });
    }
    let log_z = match method {
        EnumerationMethod::EnumerateHidden => enumerate_log_z(
            params.n_hidden(),
            params.hidden_bias(),
            params.visible_bias(),
            |i, j| params.weights()[i][j],
        ),
        EnumerationMethod::EnumerateVisible => enumerate_log_z(
            params.n_visible(),
            params.visible_bias(),
            params.hidden_bias(),
            |j, i| params.weights()[i][j],
        ),
    };
    Ok(ExactSummary {
        log_z,
        model_dims: (d, m),
        method,
    })
}

/// log Σ_s exp(outer_bias's + Σ_t softplus(inner_bias_t + (W s)_t)) over all
/// 2^n configurations of the outer layer, walked in Gray-code order so each
/// step updates the inner pre-activations by a single weight column.
fn enumerate_log_z(
    n_outer: usize,
    outer_bias: &[f64],
    inner_bias: &[f64],
    weight: impl Fn(usize, usize) -> f64,
) -> f64 {
    let mut act = inner_bias.to_vec();
    let mut bias_dot = 0.0;
    let mut vals = Vec::with_capacity(1usize << n_outer);
    vals.push(act.iter().map(|&x| softplus(x)).sum::<f64>());
    let mut gray_prev = 0usize;
    for idx in 1..1usize << n_outer {
        let gray = idx ^ (idx >> 1);
        let bit = (gray ^ gray_prev).trailing_zeros() as usize;
        gray_prev = gray;
        if (gray >> bit) & 1 == 1 {
            bias_dot += outer_bias[bit];
            for (t, a) in act.iter_mut().enumerate() {
                *a += weight(bit, t);
            }
        } else {
            bias_dot -= outer_bias[bit];
            for (t, a) in act.iter_mut().enumerate() {
                *a -= weight(bit, t);
            }
        }
        vals.push(bias_dot + act.iter().map(|&x| softplus(x)).sum::<f64>());
    }
    logsumexp(&vals)
}

/// Cached log p*_A and log p*_B over every visible configuration of a path,
/// for repeated exact queries at many beta values.
#[derive(Debug, Clone)]
pub struct PathTable {
    log_base: Vec<f64>,
    log_target: Vec<f64>,
}

impl PathTable {
    pub fn new(path: &GeometricPath) -> Result<Self> {
        let d = path.n_visible();
        if d > PATH_TABLE_MAX_VISIBLE {
            return Err(Error::EnumerationTooLarge {
                n_visible: d,
                n_hidden: path.target().n_hidden(),
                cap: PATH_TABLE_MAX_VISIBLE,
            });
        }
        let n = 1usize << d;
        let mut log_base = Vec::with_capacity(n);
        let mut log_target = Vec::with_capacity(n);
        for idx in 0..n {
            let v = VisibleState::from_index(idx, d);
            log_base.push(path.base().log_pstar(&v));
            log_target.push(path.target().log_pstar(&v));
        }
        Ok(Self {
            log_base,
            log_target,
        })
    }

    pub fn n_states(&self) -> usize {
        self.log_base.len()
    }

    /// log p*_beta for every state.
    pub fn log_weights(&self, beta: f64) -> Vec<f64> {
        assert!((0.0..=1.0).contains(&beta), "beta must lie in [0, 1]");
        self.log_base
            .iter()
            .zip(&self.log_target)
            .map(|(&la, &lb)| (1.0 - beta) * la + beta * lb)
            .collect()
    }

    /// Exact normalized p_beta.
    pub fn distribution(&self, beta: f64) -> Vec<f64> {
        crate::math::log_normalize(&self.log_weights(beta))
            .expect("finite parameters give a finite density")
    }

    /// Exact log Z of the intermediate distribution at beta.
    pub fn log_z_beta(&self, beta: f64) -> f64 {
        logsumexp(&self.log_weights(beta))
    }

    /// Exact g(beta): variance of d/dbeta log p*_beta under p_beta.
    pub fn exact_g(&self, beta: f64) -> f64 {
        let probs = self.distribution(beta);
        let dlog: Vec<f64> = self
            .log_base
            .iter()
            .zip(&self.log_target)
            .map(|(&la, &lb)| lb - la)
            .collect();
        weighted_variance(&probs, &dlog)
    }

    /// Exact variance, under p at `beta_from`, of the log density ratio
    /// between `beta_to` and `beta_from`. On the affine path the ratio is
    /// `(beta_to - beta_from) * (log p*_B - log p*_A)` exactly.
    pub fn var_log_ratio(&self, beta_from: f64, beta_to: f64) -> f64 {
        let probs = self.distribution(beta_from);
        let delta = beta_to - beta_from;
        let ratios: Vec<f64> = self
            .log_base
            .iter()
            .zip(&self.log_target)
            .map(|(&la, &lb)| delta * (lb - la))
            .collect();
        weighted_variance(&probs, &ratios)
    }
}

/// Exact g(beta) by full visible enumeration.
pub fn exact_g(path: &GeometricPath, beta: f64) -> Result<f64> {
    Ok(PathTable::new(path)?.exact_g(beta))
}
