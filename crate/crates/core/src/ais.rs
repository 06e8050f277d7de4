//! Annealed importance sampling: log-domain weight accumulation over a
//! schedule of intermediate distributions, effective sample size, and
//! self-normalized on-the-fly expectations.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::math::{log_normalize, logsumexp, sample_variance};
use crate::model::{ChainState, GeometricPath, VisibleState};
use crate::schedule::Schedule;

/// State functional evaluated on intermediate distributions mid-anneal.
pub type Observer<'a> = &'a (dyn Fn(&VisibleState) -> f64 + Sync);

/// Per-step self-normalized statistics recorded during annealing.
#[derive(Debug, Clone, Serialize)]
pub struct OnTheFlyStats {
    pub beta: f64,
    pub ess: f64,
    /// One importance estimate per observer, in observer order.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub estimates: Vec<f64>,
}

/// Output of one AIS execution.
#[derive(Debug, Clone)]
pub struct AisResult {
    /// Final log importance weight of each chain.
    pub log_weights: Vec<f64>,
    /// log Z_A + logsumexp(log w) - log N.
    pub log_z_hat: f64,
    /// Effective sample size of the final weights.
    pub ess: f64,
    /// Unbiased sample standard deviation of the final log weights.
    pub log_weight_std: f64,
    /// Number of annealing steps K.
    pub k_steps: usize,
    /// Recorded when observers were supplied or tracing was requested;
    /// one row per step including the initial distribution.
    pub on_the_fly: Option<Vec<OnTheFlyStats>>,
}

impl AisResult {
    pub fn n_runs(&self) -> usize {
        self.log_weights.len()
    }

    pub fn summary(&self) -> AisSummary<'_> {
        AisSummary {
            log_z_hat: self.log_z_hat,
            ess: self.ess,
            n_runs: self.n_runs(),
            k: self.k_steps,
            log_weight_std: self.log_weight_std,
            on_the_fly: self.on_the_fly.as_deref(),
        }
    }

    pub fn summary_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.summary())?)
    }

    /// Per-run log weights as a one-column CSV.
    pub fn write_log_weights_csv(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let mut text = String::from("log_w\n");
        for lw in &self.log_weights {
            text.push_str(&format!("{lw}\n"));
        }
        std::fs::write(path, text)?;
        Ok(())
    }
}

/// Serializable view of an [`AisResult`] without the raw weight vector.
#[derive(Debug, Serialize)]
pub struct AisSummary<'a> {
    pub log_z_hat: f64,
    pub ess: f64,
    pub n_runs: usize,
    pub k: usize,
    pub log_weight_std: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub on_the_fly: Option<&'a [OnTheFlyStats]>,
}

struct Chain {
    state: ChainState,
    log_w: f64,
    rng: ChaCha8Rng,
}

/// Runs N annealed chains over the schedule and assembles the partition
/// function estimate.
///
/// Chain `i` draws from a dedicated stream of the seeded generator, so the
/// result is bit-identical no matter how chains are scheduled across
/// threads. Observers are evaluated on the pre-transition states with the
/// weights accumulated through the current step.
pub fn run_ais(
    path: &GeometricPath,
    schedule: &Schedule,
    n_runs: usize,
    seed: u64,
    observers: &[Observer],
    trace_ess: bool,
) -> Result<AisResult> {
    run_ais_impl(
        path, schedule, n_runs, seed, observers, None, trace_ess, true,
    )
}

/// Extra per-step statistic recorded by internal pipelines: the ensemble
/// variance of one observable, appended as the last estimate column.
pub(crate) struct VarianceObserver<'a>(pub &'a (dyn Fn(&VisibleState) -> f64 + Sync));

#[allow(clippy::too_many_arguments)]
pub(crate) fn run_ais_impl(
    path: &GeometricPath,
    schedule: &Schedule,
    n_runs: usize,
    seed: u64,
    observers: &[Observer],
    variance_observer: Option<&VarianceObserver>,
    trace_ess: bool,
    weighted_observers: bool,
) -> Result<AisResult> {
    if n_runs < 2 {
        return Err(Error::InvalidArgument("AIS needs at least two runs".into()));
    }
    let betas = schedule.betas();
    let k_steps = schedule.k_steps();
    let record = trace_ess || !observers.is_empty() || variance_observer.is_some();

    let mut chains: Vec<Chain> = (0..n_runs)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let v = path.sample_base(&mut rng);
            Chain {
                state: ChainState::new(path, v),
                log_w: 0.0,
                rng,
            }
        })
        .collect();

    let mut trace = if record {
        Vec::with_capacity(k_steps + 1)
    } else {
        Vec::new()
    };
    if record {
        trace.push(record_step(
            &chains,
            betas[0],
            observers,
            variance_observer,
            weighted_observers,
            0,
        )?);
    }

    for k in 1..=k_steps {
        let delta_beta = betas[k] - betas[k - 1];
        chains.par_iter_mut().for_each(|chain| {
            chain.log_w += delta_beta * chain.state.dlog(path);
        });
        if record {
            trace.push(record_step(
                &chains,
                betas[k],
                observers,
                variance_observer,
                weighted_observers,
                k,
            )?);
        }
        let beta = betas[k];
        chains.par_iter_mut().for_each(|chain| {
            chain.state.sweep(path, beta, &mut chain.rng);
        });
    }

    let log_weights: Vec<f64> = chains.iter().map(|c| c.log_w).collect();
    let ess_final = ess(&log_weights)?;
    // the estimate depends on the weights only through lse(log w) - log N
    let log_z_hat = path.base_log_z() + (logsumexp(&log_weights) - (n_runs as f64).ln());
    if !log_z_hat.is_finite() {
        return Err(Error::DegenerateWeights { step: None });
    }
    Ok(AisResult {
        log_z_hat,
        ess: ess_final,
        log_weight_std: log_weight_std(&log_weights),
        k_steps,
        on_the_fly: record.then_some(trace),
        log_weights,
    })
}

fn record_step(
    chains: &[Chain],
    beta: f64,
    observers: &[Observer],
    variance_observer: Option<&VarianceObserver>,
    weighted: bool,
    step: usize,
) -> Result<OnTheFlyStats> {
    let log_weights: Vec<f64> = chains.iter().map(|c| c.log_w).collect();
    let probs = log_normalize(&log_weights).ok_or(Error::DegenerateWeights { step: Some(step) })?;
    let ess = ess(&log_weights).map_err(|_| Error::DegenerateWeights { step: Some(step) })?;
    let n = chains.len() as f64;
    let weight_of = |i: usize| if weighted { probs[i] } else { 1.0 / n };
    let mut estimates = Vec::with_capacity(observers.len() + 1);
    if !observers.is_empty() {
        let values: Vec<Vec<f64>> = chains
            .par_iter()
            .map(|c| {
                let v = c.state.state();
                observers.iter().map(|f| f(&v)).collect()
            })
            .collect();
        for oi in 0..observers.len() {
            estimates.push(
                values
                    .iter()
                    .enumerate()
                    .map(|(i, row)| weight_of(i) * row[oi])
                    .sum(),
            );
        }
    }
    if let Some(VarianceObserver(f)) = variance_observer {
        let values: Vec<f64> = chains.par_iter().map(|c| f(&c.state.state())).collect();
        let mean: f64 = values
            .iter()
            .enumerate()
            .map(|(i, &v)| weight_of(i) * v)
            .sum();
        // centered form; the raw second moment cancels catastrophically
        // when the observable is large and nearly constant
        let var: f64 = values
            .iter()
            .enumerate()
            .map(|(i, &v)| weight_of(i) * (v - mean).powi(2))
            .sum();
        estimates.push(var.max(0.0));
    }
    Ok(OnTheFlyStats {
        beta,
        ess,
        estimates,
    })
}

/// Effective sample size N / (1 + s^2(w*)) where w* are the weights
/// normalized to mean one and s^2 is their unbiased sample variance.
pub fn ess(log_weights: &[f64]) -> Result<f64> {
    let n = log_weights.len();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "ess needs at least two weights".into(),
        ));
    }
    let probs = log_normalize(log_weights).ok_or(Error::DegenerateWeights { step: None })?;
    let w_star: Vec<f64> = probs.iter().map(|&p| p * n as f64).collect();
    Ok(n as f64 / (1.0 + sample_variance(&w_star)))
}

/// Self-normalized importance estimate Σ w_i f_i / Σ w_i, normalized in the
/// log domain.
pub fn on_the_fly_expectation(log_weights: &[f64], f_values: &[f64]) -> Result<f64> {
    assert_eq!(
        log_weights.len(),
        f_values.len(),
        "weights and values must have equal length"
    );
    let probs = log_normalize(log_weights).ok_or(Error::DegenerateWeights { step: None })?;
    Ok(probs.iter().zip(f_values).map(|(&p, &f)| p * f).sum())
}

/// Unbiased sample standard deviation of the log weights.
pub fn log_weight_std(log_weights: &[f64]) -> f64 {
    sample_variance(log_weights).sqrt()
}
