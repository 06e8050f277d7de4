//! Annealing schedules and the variance-profile machinery that optimizes
//! them: estimating g(beta) from a cheap AIS pass, smoothing and numerical
//! differentiation, the fixed-point boundary-value solver for the optimal
//! schedule, a first-integral quadrature oracle, schedule deceleration, and
//! the discrete variance functional.

use log::warn;

use crate::ais::{run_ais_impl, VarianceObserver};
use crate::error::{Error, Result};
use crate::model::GeometricPath;
use crate::oracle::PathTable;

/// Monotone quantization 0 = beta_0 <= ... <= beta_K = 1 of the path.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    betas: Vec<f64>,
}

impl Schedule {
    pub fn new(betas: Vec<f64>) -> Result<Self> {
        if betas.len() < 2 {
            return Err(Error::InvalidSchedule(
                "a schedule needs at least two points".into(),
            ));
        }
        if betas.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidSchedule("non-finite beta".into()));
        }
        if betas[0].abs() > 1e-12 {
            return Err(Error::InvalidSchedule(format!(
                "schedule must start at 0, got {}",
                betas[0]
            )));
        }
        let last = *betas.last().unwrap();
        if (last - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidSchedule(format!(
                "schedule must end at 1, got {last}"
            )));
        }
        if betas.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidSchedule(
                "betas must be non-decreasing".into(),
            ));
        }
        Ok(Self { betas })
    }

    /// Uniform schedule beta_k = k / K.
    pub fn linear(k_steps: usize) -> Self {
        assert!(k_steps >= 1, "a schedule needs at least one step");
        let betas = (0..=k_steps).map(|k| k as f64 / k_steps as f64).collect();
        Self { betas }
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn k_steps(&self) -> usize {
        self.betas.len() - 1
    }

    pub fn deltas(&self) -> Vec<f64> {
        self.betas.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn max_delta(&self) -> f64 {
        self.betas
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    /// One-column CSV with header `beta`, lossless round trip.
    pub fn write_csv(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let mut text = String::from("beta\n");
        for b in &self.betas {
            text.push_str(&format!("{b}\n"));
        }
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some("beta") {
            return Err(Error::MalformedFile {
                path: path.display().to_string(),
                reason: "expected header line 'beta'".into(),
            });
        }
        let betas = lines
            .filter(|l| !l.trim().is_empty())
            .map(|l| l.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::MalformedFile {
                path: path.display().to_string(),
                reason: e.to_string(),
            })?;
        Self::new(betas)
    }
}

/// Gridded estimate of the variance profile g(beta) on a uniform grid over
/// [0, 1], plus the smoothed values and the derivative of log g used by the
/// fixed-point solver.
#[derive(Debug, Clone, PartialEq)]
pub struct GTable {
    pub grid: Vec<f64>,
    pub g_raw: Vec<f64>,
    pub g_smoothed: Vec<f64>,
    pub dlog_g: Vec<f64>,
}

impl GTable {
    /// Tabulates an analytic g on a uniform grid with `k_tilde` intervals.
    /// `dlog_g` is left zeroed; differentiate with [`dlog_g`].
    pub fn from_function(g: impl Fn(f64) -> f64, k_tilde: usize) -> Self {
        assert!(k_tilde >= 1);
        let grid: Vec<f64> = (0..=k_tilde).map(|k| k as f64 / k_tilde as f64).collect();
        let g_raw: Vec<f64> = grid.iter().map(|&b| g(b)).collect();
        Self {
            g_smoothed: g_raw.clone(),
            dlog_g: vec![0.0; g_raw.len()],
            grid,
            g_raw,
        }
    }

    pub fn k_tilde(&self) -> usize {
        self.grid.len() - 1
    }

    fn grid_step(&self) -> f64 {
        1.0 / self.k_tilde() as f64
    }

    /// Linear interpolation of a column at `beta` (clamped to [0, 1]).
    fn interp(&self, values: &[f64], beta: f64) -> f64 {
        let pos = beta.clamp(0.0, 1.0) * self.k_tilde() as f64;
        let i = (pos.floor() as usize).min(self.k_tilde() - 1);
        let frac = pos - i as f64;
        values[i] * (1.0 - frac) + values[i + 1] * frac
    }

    pub fn dlog_g_at(&self, beta: f64) -> f64 {
        self.interp(&self.dlog_g, beta)
    }

    fn max_g(&self) -> f64 {
        self.g_smoothed.iter().copied().fold(0.0, f64::max)
    }

    /// Four-column CSV `beta,g_raw,g_smoothed,dlog_g`, lossless round trip.
    pub fn write_csv(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let mut text = String::from("beta,g_raw,g_smoothed,dlog_g\n");
        for k in 0..self.grid.len() {
            text.push_str(&format!(
                "{},{},{},{}\n",
                self.grid[k], self.g_raw[k], self.g_smoothed[k], self.dlog_g[k]
            ));
        }
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let malformed = |reason: String| Error::MalformedFile {
            path: path.display().to_string(),
            reason,
        };
        let text = std::fs::read_to_string(path)?;
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some("beta,g_raw,g_smoothed,dlog_g") {
            return Err(malformed(
                "expected header 'beta,g_raw,g_smoothed,dlog_g'".into(),
            ));
        }
        let mut table = GTable {
            grid: Vec::new(),
            g_raw: Vec::new(),
            g_smoothed: Vec::new(),
            dlog_g: Vec::new(),
        };
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let fields: Vec<&str> = line.trim().split(',').collect();
            if fields.len() != 4 {
                return Err(malformed(format!(
                    "expected 4 fields, got {}",
                    fields.len()
                )));
            }
            let mut parsed = [0.0; 4];
            for (slot, field) in parsed.iter_mut().zip(&fields) {
                *slot = field.parse::<f64>().map_err(|e| malformed(e.to_string()))?;
            }
            table.grid.push(parsed[0]);
            table.g_raw.push(parsed[1]);
            table.g_smoothed.push(parsed[2]);
            table.dlog_g.push(parsed[3]);
        }
        if table.grid.len() < 2 {
            return Err(malformed("table needs at least two grid rows".into()));
        }
        Ok(table)
    }
}

/// Evaluates g(beta) for the variance functional: either an exact function
/// or a tabled estimate.
pub trait GSource {
    fn g_at(&self, beta: f64) -> f64;
}

impl GSource for GTable {
    fn g_at(&self, beta: f64) -> f64 {
        self.interp(&self.g_smoothed, beta)
    }
}

impl<F: Fn(f64) -> f64> GSource for F {
    fn g_at(&self, beta: f64) -> f64 {
        self(beta)
    }
}

/// Estimates g on a uniform grid by running AIS with a linear schedule of
/// `k_tilde` steps and `n_tilde` chains: at every step the self-normalized
/// importance-weighted variance of d/dbeta log p*_beta over the ensemble is
/// recorded. With `weighted = false` the ensemble is averaged without
/// importance weights instead.
pub fn estimate_g_table(
    path: &GeometricPath,
    k_tilde: usize,
    n_tilde: usize,
    seed: u64,
    weighted: bool,
) -> Result<GTable> {
    if k_tilde < 10 {
        return Err(Error::InvalidArgument("k_tilde must be at least 10".into()));
    }
    if n_tilde < 10 {
        return Err(Error::InvalidArgument("n_tilde must be at least 10".into()));
    }
    let dlog = |v: &crate::model::VisibleState| path.dlog_pstar_dbeta(v);
    let result = run_ais_impl(
        path,
        &Schedule::linear(k_tilde),
        n_tilde,
        seed,
        &[],
        Some(&VarianceObserver(&dlog)),
        true,
        weighted,
    )?;
    let trace = result.on_the_fly.expect("observers force a trace");
    let grid: Vec<f64> = trace.iter().map(|row| row.beta).collect();
    let g_raw: Vec<f64> = trace.iter().map(|row| row.estimates[0]).collect();
    Ok(GTable {
        g_smoothed: g_raw.clone(),
        dlog_g: vec![0.0; g_raw.len()],
        grid,
        g_raw,
    })
}

/// Moving-average smoothing of `g_raw` with a symmetric window of
/// `2 * half_width + 1` points, truncated and renormalized at the edges.
/// Leaves `dlog_g` zeroed for a later differentiation pass.
pub fn smooth(table: &GTable, half_width: usize) -> GTable {
    let n = table.g_raw.len();
    let g_smoothed = (0..n)
        .map(|k| {
            let lo = k.saturating_sub(half_width);
            let hi = (k + half_width).min(n - 1);
            let window = &table.g_raw[lo..=hi];
            window.iter().sum::<f64>() / window.len() as f64
        })
        .collect();
    GTable {
        grid: table.grid.clone(),
        g_raw: table.g_raw.clone(),
        g_smoothed,
        dlog_g: vec![0.0; n],
    }
}

/// Numerical derivative of log g_smoothed: central differences in the
/// interior, one-sided at the endpoints. Values of g below
/// `1e-12 * max(g)` are floor-clamped first so the logarithm stays finite;
/// the clamped values are stored back into `g_smoothed`.
pub fn dlog_g(table: &GTable) -> GTable {
    let n = table.g_smoothed.len();
    let max = table.max_g();
    if max <= 0.0 {
        // degenerate profile; solvers fall back to the linear schedule
        return GTable {
            grid: table.grid.clone(),
            g_raw: table.g_raw.clone(),
            g_smoothed: table.g_smoothed.clone(),
            dlog_g: vec![0.0; n],
        };
    }
    let floor = 1e-12 * max;
    let clamped: Vec<f64> = table.g_smoothed.iter().map(|&g| g.max(floor)).collect();
    let logs: Vec<f64> = clamped.iter().map(|&g| g.ln()).collect();
    let h = table.grid_step();
    let dlog = (0..n)
        .map(|k| {
            if k == 0 {
                (logs[1] - logs[0]) / h
            } else if k == n - 1 {
                (logs[n - 1] - logs[n - 2]) / h
            } else {
                (logs[k + 1] - logs[k - 1]) / (2.0 * h)
            }
        })
        .collect();
    GTable {
        grid: table.grid.clone(),
        g_raw: table.g_raw.clone(),
        g_smoothed: clamped,
        dlog_g: dlog,
    }
}

/// Damping factor of the fixed-point steps.
const RELAXATION: f64 = 0.9;

/// Largest per-node correction applied in one fixed-point pass.
const MAX_STEP: f64 = 0.05;

/// Solves the optimal-schedule boundary value problem
/// `beta'' + (beta'^2 / 2) dlog g(beta) = 0`, `beta(0) = 0`, `beta(1) = 1`
/// by damped fixed-point iteration on a uniform time grid of `k_steps`
/// intervals, warm-started from the first-integral quadrature solution.
/// Each pass solves the discrete system
/// `beta_{k+1} - 2 beta_k + beta_{k-1} = -(dt beta'_k)^2 / 2 *
/// dlog_g(beta_k)` linearized around the current iterate (the beta'
/// coupling stays implicit, which keeps the step stable when the optimum
/// races through low-variance regions) with a tridiagonal direct solve, and
/// applies the correction scaled by 0.9. Expects `table` to be smoothed and
/// differentiated.
///
/// Converges when the largest update falls below `tol` and the discrete
/// residual of the differential equation is below `10 * tol` at every
/// interior node; otherwise fails carrying the final residual.
pub fn de_solve(table: &GTable, k_steps: usize, tol: f64, max_iter: usize) -> Result<Schedule> {
    if k_steps < 2 {
        return Err(Error::InvalidArgument(
            "de_solve needs at least two steps".into(),
        ));
    }
    if table.max_g() <= 0.0 {
        warn!("variance profile is zero everywhere; falling back to the linear schedule");
        return Ok(Schedule::linear(k_steps));
    }
    let mut betas = quadrature_schedule(table, k_steps).betas;
    let dt = 1.0 / k_steps as f64;
    let interior = k_steps - 1;
    let mut lower = vec![0.0; interior];
    let mut diag = vec![0.0; interior];
    let mut upper = vec![0.0; interior];
    let mut neg_f = vec![0.0; interior];
    let mut residual = f64::INFINITY;
    let mut converged = false;
    for _ in 0..max_iter {
        for j in 1..k_steps {
            let bdot = (betas[j + 1] - betas[j - 1]) / (2.0 * dt);
            let coupling = dt / 2.0 * bdot * table.dlog_g_at(betas[j]);
            let i = j - 1;
            lower[i] = 1.0 - coupling;
            diag[i] = -2.0;
            upper[i] = 1.0 + coupling;
            neg_f[i] = -(betas[j + 1] - 2.0 * betas[j]
                + betas[j - 1]
                + (dt * bdot).powi(2) / 2.0 * table.dlog_g_at(betas[j]));
        }

        // Thomas solve for the correction
        for i in 1..interior {
            let m = lower[i] / diag[i - 1];
            diag[i] -= m * upper[i - 1];
            neg_f[i] -= m * neg_f[i - 1];
        }
        let mut prev = 0.0;
        let mut largest: f64 = 0.0;
        for i in (0..interior).rev() {
            let correction = (neg_f[i] - upper[i] * prev) / diag[i];
            prev = correction;
            neg_f[i] = correction;
            largest = largest.max(correction.abs());
        }
        if !largest.is_finite() {
            return Err(Error::SolveNotConverged {
                residual: f64::INFINITY,
                iterations: max_iter,
            });
        }
        // step cap keeps passes stable when noisy low-g tails break
        // diagonal dominance
        let scale = RELAXATION * (MAX_STEP / largest).min(1.0);
        let mut max_update: f64 = 0.0;
        for i in 0..interior {
            let update = scale * neg_f[i];
            betas[i + 1] += update;
            max_update = max_update.max(update.abs());
        }
        if max_update < tol {
            residual = max_el_residual(&betas, table, dt);
            if residual < 10.0 * tol {
                converged = true;
                break;
            }
        }
    }
    if !converged {
        if residual.is_infinite() {
            residual = max_el_residual(&betas, table, dt);
        }
        return Err(Error::SolveNotConverged {
            residual,
            iterations: max_iter,
        });
    }

    // monotone cleanup and endpoint rescale
    let mut deltas: Vec<f64> = betas.windows(2).map(|w| w[1] - w[0]).collect();
    let min_delta = deltas.iter().copied().fold(f64::INFINITY, f64::min);
    if min_delta < -tol {
        return Err(Error::NonMonotoneSchedule { min_delta });
    }
    for d in &mut deltas {
        *d = d.max(0.0);
    }
    let total: f64 = deltas.iter().sum();
    if total <= 0.0 {
        return Err(Error::NonMonotoneSchedule { min_delta });
    }
    let mut out = Vec::with_capacity(k_steps + 1);
    out.push(0.0);
    let mut acc = 0.0;
    for d in &deltas {
        acc += d / total;
        out.push(acc.min(1.0));
    }
    out[k_steps] = 1.0;
    Schedule::new(out)
}

/// Largest interior residual of the discretized optimality equation.
fn max_el_residual(betas: &[f64], table: &GTable, dt: f64) -> f64 {
    let k = betas.len() - 1;
    (1..k)
        .map(|j| {
            let bdot = (betas[j + 1] - betas[j - 1]) / (2.0 * dt);
            let bddot = (betas[j + 1] - 2.0 * betas[j] + betas[j - 1]) / (dt * dt);
            (bddot + bdot * bdot / 2.0 * table.dlog_g_at(betas[j])).abs()
        })
        .fold(0.0, f64::max)
}

/// Independent first-integral construction of the optimal schedule: along
/// the optimum `beta'^2 g(beta)` is constant, so beta_k solves
/// `∫_0^{beta_k} sqrt(g) = (k/K) ∫_0^1 sqrt(g)`. Computes the cumulative
/// trapezoidal integral of sqrt(g_smoothed) on the grid and inverts it by
/// monotone linear interpolation.
pub fn quadrature_schedule(table: &GTable, k_steps: usize) -> Schedule {
    assert!(k_steps >= 1, "a schedule needs at least one step");
    let n = table.grid.len();
    let sqrt_g: Vec<f64> = table
        .g_smoothed
        .iter()
        .map(|&g| g.max(0.0).sqrt())
        .collect();
    let mut cumulative = Vec::with_capacity(n);
    cumulative.push(0.0);
    for k in 1..n {
        let step = (table.grid[k] - table.grid[k - 1]) * 0.5 * (sqrt_g[k] + sqrt_g[k - 1]);
        cumulative.push(cumulative[k - 1] + step);
    }
    let total = *cumulative.last().unwrap();
    if total <= 0.0 {
        warn!("sqrt(g) integrates to zero; falling back to the linear schedule");
        return Schedule::linear(k_steps);
    }
    let mut betas = Vec::with_capacity(k_steps + 1);
    let mut seg = 0usize;
    for i in 0..=k_steps {
        let target = total * (i as f64 / k_steps as f64);
        while seg + 2 < n && cumulative[seg + 1] < target {
            seg += 1;
        }
        let span = cumulative[seg + 1] - cumulative[seg];
        let beta = if span > 0.0 {
            table.grid[seg]
                + (target - cumulative[seg]) / span * (table.grid[seg + 1] - table.grid[seg])
        } else {
            table.grid[seg]
        };
        betas.push(beta.clamp(0.0, 1.0));
    }
    betas[0] = 0.0;
    betas[k_steps] = 1.0;
    Schedule::new(betas).expect("quadrature inversion is monotone")
}

/// Hard cap on clip-and-stretch passes.
const MAX_DECELERATION_ITERS: usize = 10_000;

/// Caps every schedule step at `max_delta`: repeatedly clips the deltas and
/// stretches them back to unit total, stopping once the post-clip total is
/// within `tol` of one. The returned schedule satisfies
/// `max delta <= max_delta * (1 + tol)` with endpoints exactly 0 and 1.
pub fn decelerate(schedule: &Schedule, max_delta: f64, tol: f64) -> Result<Schedule> {
    if !(max_delta > 0.0 && max_delta <= 1.0) {
        return Err(Error::InvalidArgument(
            "max_delta must lie in (0, 1]".into(),
        ));
    }
    let k = schedule.k_steps();
    if (k as f64) * max_delta < 1.0 {
        return Err(Error::InfeasibleDeceleration { k, max_delta });
    }
    let mut deltas = schedule.deltas();
    for _ in 0..MAX_DECELERATION_ITERS {
        for d in &mut deltas {
            *d = d.min(max_delta);
        }
        let norm: f64 = deltas.iter().sum();
        if (norm - 1.0).abs() < tol {
            // spread the residual slack over all steps, keeping every delta
            // within max_delta * (1 + tol)
            let mut betas = Vec::with_capacity(k + 1);
            betas.push(0.0);
            let mut acc = 0.0;
            for d in &deltas {
                acc += d / norm;
                betas.push(acc.min(1.0));
            }
            betas[k] = 1.0;
            return Schedule::new(betas);
        }
        for d in &mut deltas {
            *d /= norm;
        }
    }
    Err(Error::DecelerationNotConverged {
        iterations: MAX_DECELERATION_ITERS,
    })
}

/// Discrete variance functional `K Σ (Δbeta_k)^2 g(beta_k)` with g taken at
/// the left endpoint of each interval.
pub fn functional_j<G: GSource + ?Sized>(schedule: &Schedule, g: &G) -> f64 {
    let k = schedule.k_steps() as f64;
    k * schedule
        .betas
        .windows(2)
        .map(|w| (w[1] - w[0]).powi(2) * g.g_at(w[0]))
        .sum::<f64>()
}

/// Exact perfect-transition variance of the log weight: for each interval
/// the variance of the log density ratio under the exact intermediate
/// distribution at the left endpoint, summed over the schedule. Requires a
/// visible layer small enough for full enumeration.
pub fn var_log_w_perfect(path: &GeometricPath, schedule: &Schedule) -> Result<f64> {
    let table = PathTable::new(path)?;
    Ok(schedule
        .betas
        .windows(2)
        .map(|w| table.var_log_ratio(w[0], w[1]))
        .sum())
}
