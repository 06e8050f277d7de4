//! Command-line pipeline around the AIS estimator: train desk-scale RBMs,
//! survey the variance profile, solve and post-process annealing schedules,
//! run the estimator, and compare schedules under shared seeds.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use varopt_ais::math::derive_seed;
use varopt_ais::{
    de_solve, decelerate, dlog_g, estimate_g_table, oracle, quadrature_schedule, run_ais, smooth,
    trainer, AisResult, BinaryDataset, GTable, GeometricPath, RbmParams, Schedule, TrainAlgorithm,
    TrainConfig,
};

#[derive(Parser)]
#[command(
    name = "varopt-ais",
    version,
    about = "Partition-function estimation for binary RBMs with variance-optimized annealing schedules"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an RBM with CD-k or persistent CD and write it as model JSON.
    Train(TrainArgs),
    /// Run AIS between two models and write the estimate as JSON.
    Ais(AisArgs),
    /// Survey the variance profile g(beta) with a cheap AIS pass.
    EstimateG(EstimateGArgs),
    /// Solve the optimal-schedule boundary value problem for a profile table.
    SolveSchedule(SolveScheduleArgs),
    /// Cap the per-step beta increments of an existing schedule.
    Decelerate(DecelerateArgs),
    /// Full pipeline: survey, solve, optionally decelerate, then estimate.
    Varopt(VaroptArgs),
    /// Exact log partition function of a small model by enumeration.
    Exact(ExactArgs),
    /// Re-run AIS under several schedules with a shared seed ladder.
    Compare(CompareArgs),
}

#[derive(Args)]
struct ModelPairArgs {
    /// Base model JSON (must have all-zero weights).
    #[arg(long)]
    model_a: PathBuf,
    /// Target model JSON.
    #[arg(long)]
    model_b: PathBuf,
}

impl ModelPairArgs {
    fn load(&self) -> Result<GeometricPath> {
        let base = RbmParams::from_json_file(&self.model_a)
            .with_context(|| format!("stage load-models: {}", self.model_a.display()))?;
        let target = RbmParams::from_json_file(&self.model_b)
            .with_context(|| format!("stage load-models: {}", self.model_b.display()))?;
        GeometricPath::new(base, target).context("stage load-models")
    }
}

#[derive(Args)]
struct OutArgs {
    /// Output directory (created if missing).
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

impl OutArgs {
    fn prepare(&self) -> Result<&Path> {
        std::fs::create_dir_all(&self.out)
            .with_context(|| format!("stage prepare-output: {}", self.out.display()))?;
        Ok(&self.out)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgorithmArg {
    Cd,
    Pcd,
}

#[derive(Args)]
struct TrainArgs {
    /// CSV of 0/1 values, one example per row.
    #[arg(long, conflicts_with = "bars")]
    data: Option<PathBuf>,
    /// Bundled synthetic bar patterns on an RxC grid, e.g. 4x4.
    #[arg(long, value_parser = parse_grid)]
    bars: Option<(usize, usize)>,
    /// Copies of the bar pattern set.
    #[arg(long, default_value_t = 8)]
    copies: usize,
    /// Number of hidden units.
    #[arg(long)]
    hidden: usize,
    #[arg(long, value_enum, default_value_t = AlgorithmArg::Pcd)]
    algorithm: AlgorithmArg,
    /// Gibbs steps per gradient update (the k of CD-k).
    #[arg(long, default_value_t = 1)]
    gibbs_steps: usize,
    #[arg(long, default_value_t = 0.1)]
    lr: f64,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 10)]
    batch_size: usize,
    /// L2 penalty on the weights.
    #[arg(long, default_value_t = 0.0)]
    l2: f64,
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct AisArgs {
    #[command(flatten)]
    models: ModelPairArgs,
    /// Steps of the linear schedule; ignored when --schedule is given.
    #[arg(short = 'K', long = "k-steps", default_value_t = 10_000)]
    k_steps: usize,
    /// Schedule CSV to anneal over instead of the linear schedule.
    #[arg(long)]
    schedule: Option<PathBuf>,
    /// Number of independent AIS runs.
    #[arg(short = 'N', long = "n-runs", default_value_t = 100)]
    n_runs: usize,
    #[arg(long)]
    seed: u64,
    /// Record the on-the-fly ESS at every annealing step.
    #[arg(long)]
    trace_ess: bool,
    /// Also write the per-run log weights as log_weights.csv.
    #[arg(long)]
    dump_log_w: bool,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct EstimateGArgs {
    #[command(flatten)]
    models: ModelPairArgs,
    /// Grid intervals of the survey schedule.
    #[arg(long, default_value_t = 1000)]
    k_tilde: usize,
    /// Chains of the survey pass.
    #[arg(long, default_value_t = 100)]
    n_tilde: usize,
    /// Moving-average half width; defaults to k_tilde / 100 rounded up.
    #[arg(long)]
    smooth_half_width: Option<usize>,
    /// Average the ensemble without importance weights.
    #[arg(long)]
    unweighted: bool,
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum AnalyticProfile {
    /// g = 1
    Const,
    /// g = exp(2 beta)
    Exp2,
    /// g = (1 + 10 beta)^2
    Poly10,
}

impl AnalyticProfile {
    fn function(self) -> fn(f64) -> f64 {
        match self {
            AnalyticProfile::Const => |_| 1.0,
            AnalyticProfile::Exp2 => |b| (2.0 * b).exp(),
            AnalyticProfile::Poly10 => |b| (1.0 + 10.0 * b).powi(2),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SolveMethod {
    /// Fixed-point iteration on the discretized optimality equation.
    FixedPoint,
    /// First-integral quadrature inversion.
    Quadrature,
}

#[derive(Args)]
struct SolveScheduleArgs {
    /// Profile table CSV (beta,g_raw,g_smoothed,dlog_g).
    #[arg(long, conflicts_with = "analytic")]
    gtable: Option<PathBuf>,
    /// Bundled analytic profile instead of a table file.
    #[arg(long, value_enum)]
    analytic: Option<AnalyticProfile>,
    /// Grid intervals used to tabulate an analytic profile.
    #[arg(long, default_value_t = 1000)]
    grid: usize,
    #[arg(short = 'K', long = "k-steps", default_value_t = 10_000)]
    k_steps: usize,
    #[arg(long, value_enum, default_value_t = SolveMethod::FixedPoint)]
    method: SolveMethod,
    /// Convergence tolerance of the fixed-point iteration.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 100_000)]
    max_iter: usize,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct DecelerateArgs {
    /// Schedule CSV to decelerate.
    #[arg(long)]
    schedule: PathBuf,
    /// Largest allowed per-step beta increment.
    #[arg(long)]
    dbmax: f64,
    /// Termination tolerance on the post-clip total.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct VaroptArgs {
    #[command(flatten)]
    models: ModelPairArgs,
    #[arg(long, default_value_t = 1000)]
    k_tilde: usize,
    #[arg(long, default_value_t = 100)]
    n_tilde: usize,
    #[arg(short = 'K', long = "k-steps", default_value_t = 10_000)]
    k_steps: usize,
    #[arg(short = 'N', long = "n-runs", default_value_t = 100)]
    n_runs: usize,
    /// Decelerate the solved schedule to this largest step.
    #[arg(long)]
    dbmax: Option<f64>,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 100_000)]
    max_iter: usize,
    #[arg(long)]
    smooth_half_width: Option<usize>,
    #[arg(long)]
    unweighted: bool,
    #[arg(long)]
    trace_ess: bool,
    #[arg(long)]
    dump_log_w: bool,
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum EnumerationSide {
    Auto,
    Hidden,
    Visible,
}

#[derive(Args)]
struct ExactArgs {
    /// Model JSON.
    #[arg(long)]
    model: PathBuf,
    #[arg(long, value_enum, default_value_t = EnumerationSide::Auto)]
    method: EnumerationSide,
    /// Cap on the enumerated layer size.
    #[arg(long, default_value_t = oracle::DEFAULT_ENUMERATION_CAP)]
    cap: usize,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    models: ModelPairArgs,
    /// Schedule lengths to sweep, comma separated.
    #[arg(long = "k-list", value_delimiter = ',', default_value = "1000,10000")]
    k_list: Vec<usize>,
    #[arg(short = 'N', long = "n-runs", default_value_t = 100)]
    n_runs: usize,
    /// Independent repetitions per schedule length.
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    #[arg(long, default_value_t = 1000)]
    k_tilde: usize,
    #[arg(long, default_value_t = 100)]
    n_tilde: usize,
    /// Decelerated variants of the optimized schedule (repeatable).
    #[arg(long)]
    dbmax: Vec<f64>,
    /// Extra user-supplied schedule CSVs, rescaled by name (repeatable).
    #[arg(long)]
    schedule_file: Vec<PathBuf>,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 100_000)]
    max_iter: usize,
    #[arg(long)]
    smooth_half_width: Option<usize>,
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    out: OutArgs,
}

fn parse_grid(s: &str) -> std::result::Result<(usize, usize), String> {
    let (r, c) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected RxC, got {s:?}"))?;
    let rows = r.parse().map_err(|e| format!("bad rows: {e}"))?;
    let cols = c.parse().map_err(|e| format!("bad cols: {e}"))?;
    if rows == 0 || cols == 0 {
        return Err("grid dimensions must be positive".into());
    }
    Ok((rows, cols))
}

fn default_half_width(k_tilde: usize) -> usize {
    k_tilde.div_ceil(100)
}

fn write_result(result: &AisResult, out: &Path, dump_log_w: bool) -> Result<()> {
    let json_path = out.join("result.json");
    std::fs::write(&json_path, result.summary_json()?)
        .with_context(|| format!("stage write-result: {}", json_path.display()))?;
    println!("wrote {}", json_path.display());
    if dump_log_w {
        let csv_path = out.join("log_weights.csv");
        result
            .write_log_weights_csv(&csv_path)
            .with_context(|| format!("stage write-result: {}", csv_path.display()))?;
        println!("wrote {}", csv_path.display());
    }
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let out = args.out.prepare()?;
    let data = match (&args.data, args.bars) {
        (Some(path), None) => BinaryDataset::from_csv_file(path).context("stage load-data")?,
        (None, Some((rows, cols))) => BinaryDataset::shifted_bars(rows, cols, args.copies),
        (None, None) => bail!("stage load-data: pass either --data or --bars"),
        (Some(_), Some(_)) => unreachable!("clap enforces the conflict"),
    };
    let config = TrainConfig {
        algorithm: match args.algorithm {
            AlgorithmArg::Cd => TrainAlgorithm::Cd,
            AlgorithmArg::Pcd => TrainAlgorithm::Pcd,
        },
        gibbs_steps: args.gibbs_steps,
        learning_rate: args.lr,
        epochs: args.epochs,
        batch_size: args.batch_size,
        l2: args.l2,
        seed: args.seed,
    };
    let started = Instant::now();
    let model = trainer::train(&data, args.hidden, &config).context("stage train")?;
    println!(
        "stage train: {:.3} s ({} rows, {} visible, {} hidden)",
        started.elapsed().as_secs_f64(),
        data.len(),
        data.n_visible(),
        args.hidden
    );
    let path = out.join("model.json");
    model
        .to_json_file(&path)
        .with_context(|| format!("stage write-model: {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_ais(args: AisArgs) -> Result<()> {
    let out = args.out.prepare()?;
    let path = args.models.load()?;
    let schedule = match &args.schedule {
        Some(file) => Schedule::read_csv(file).context("stage load-schedule")?,
        None => Schedule::linear(args.k_steps),
    };
    let started = Instant::now();
    let result = run_ais(
        &path,
        &schedule,
        args.n_runs,
        args.seed,
        &[],
        args.trace_ess,
    )
    .context("stage ais")?;
    println!("stage ais: {:.3} s", started.elapsed().as_secs_f64());
    println!(
        "log_z_hat = {}, ess = {:.1} of {}, log_weight_std = {:.4}",
        result.log_z_hat,
        result.ess,
        result.n_runs(),
        result.log_weight_std
    );
    write_result(&result, out, args.dump_log_w)
}

fn cmd_estimate_g(args: EstimateGArgs) -> Result<()> {
    let out = args.out.prepare()?;
    let path = args.models.load()?;
    let started = Instant::now();
    let table = estimate_g_table(
        &path,
        args.k_tilde,
        args.n_tilde,
        args.seed,
        !args.unweighted,
    )
    .context("stage survey")?;
    let half_width = args
        .smooth_half_width
        .unwrap_or_else(|| default_half_width(args.k_tilde));
    let table = dlog_g(&smooth(&table, half_width));
    println!(
        "stage survey: {:.3} s (k_tilde = {}, n_tilde = {}, half_width = {half_width})",
        started.elapsed().as_secs_f64(),
        args.k_tilde,
        args.n_tilde
    );
    let file = out.join("gtable.csv");
    table
        .write_csv(&file)
        .with_context(|| format!("stage write-gtable: {}", file.display()))?;
    println!("wrote {}", file.display());
    Ok(())
}

fn cmd_solve_schedule(args: SolveScheduleArgs) -> Result<()> {
    let out = args.out.prepare()?;
    let table = match (&args.gtable, args.analytic) {
        (Some(file), None) => GTable::read_csv(file).context("stage load-gtable")?,
        (None, Some(profile)) => dlog_g(&GTable::from_function(profile.function(), args.grid)),
        (None, None) => bail!("stage load-gtable: pass either --gtable or --analytic"),
        (Some(_), Some(_)) => unreachable!("clap enforces the conflict"),
    };
    let started = Instant::now();
    let schedule = match args.method {
        SolveMethod::FixedPoint => {
            de_solve(&table, args.k_steps, args.tol, args.max_iter).context("stage solve")?
        }
        SolveMethod::Quadrature => quadrature_schedule(&table, args.k_steps),
    };
    println!(
        "stage solve: {:.3} s (K = {}, max delta = {:.6})",
        started.elapsed().as_secs_f64(),
        args.k_steps,
        schedule.max_delta()
    );
    let file = out.join("schedule.csv");
    schedule
        .write_csv(&file)
        .with_context(|| format!("stage write-schedule: {}", file.display()))?;
    println!("wrote {}", file.display());
    Ok(())
}

fn cmd_decelerate(args: DecelerateArgs) -> Result<()> {
    let out = args.out.prepare()?;
    let schedule = Schedule::read_csv(&args.schedule).context("stage load-schedule")?;
    let decelerated = decelerate(&schedule, args.dbmax, args.tol).context("stage decelerate")?;
    println!(
        "max delta {:.6} -> {:.6}",
        schedule.max_delta(),
        decelerated.max_delta()
    );
    let file = out.join("decelerated.csv");
    decelerated
        .write_csv(&file)
        .with_context(|| format!("stage write-schedule: {}", file.display()))?;
    println!("wrote {}", file.display());
    Ok(())
}

fn cmd_varopt(args: VaroptArgs) -> Result<()> {
    let out = args.out.prepare()?;
    let path = args.models.load()?;

    let survey_started = Instant::now();
    let g_seed = derive_seed(args.seed, 0x67);
    let table = estimate_g_table(&path, args.k_tilde, args.n_tilde, g_seed, !args.unweighted)
        .context("stage survey")?;
    let half_width = args
        .smooth_half_width
        .unwrap_or_else(|| default_half_width(args.k_tilde));
    let table = dlog_g(&smooth(&table, half_width));
    let gtable_file = out.join("gtable.csv");
    table
        .write_csv(&gtable_file)
        .with_context(|| format!("stage write-gtable: {}", gtable_file.display()))?;
    println!(
        "stage survey: {:.3} s, wrote {}",
        survey_started.elapsed().as_secs_f64(),
        gtable_file.display()
    );

    let solve_started = Instant::now();
    let mut schedule =
        de_solve(&table, args.k_steps, args.tol, args.max_iter).context("stage solve")?;
    if let Some(dbmax) = args.dbmax {
        schedule = decelerate(&schedule, dbmax, args.tol).context("stage decelerate")?;
    }
    let schedule_file = out.join("schedule.csv");
    schedule
        .write_csv(&schedule_file)
        .with_context(|| format!("stage write-schedule: {}", schedule_file.display()))?;
    println!(
        "stage solve: {:.3} s, wrote {} (max delta {:.6})",
        solve_started.elapsed().as_secs_f64(),
        schedule_file.display(),
        schedule.max_delta()
    );

    let main_started = Instant::now();
    let main_seed = derive_seed(args.seed, 0x6d);
    let result = run_ais(
        &path,
        &schedule,
        args.n_runs,
        main_seed,
        &[],
        args.trace_ess,
    )
    .context("stage ais")?;
    println!("stage ais: {:.3} s", main_started.elapsed().as_secs_f64());
    println!(
        "log_z_hat = {}, ess = {:.1} of {}, log_weight_std = {:.4}",
        result.log_z_hat,
        result.ess,
        result.n_runs(),
        result.log_weight_std
    );
    write_result(&result, out, args.dump_log_w)
}

fn cmd_exact(args: ExactArgs) -> Result<()> {
    let model = RbmParams::from_json_file(&args.model).context("stage load-models")?;
    let method = match args.method {
        EnumerationSide::Auto => None,
        EnumerationSide::Hidden => Some(oracle::EnumerationMethod::EnumerateHidden),
        EnumerationSide::Visible => Some(oracle::EnumerationMethod::EnumerateVisible),
    };
    let started = Instant::now();
    let summary = oracle::exact_log_z_with(&model, method, args.cap).context("stage exact")?;
    eprintln!("stage exact: {:.3} s", started.elapsed().as_secs_f64());
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn cmd_compare(args: CompareArgs) -> Result<()> {
    let out = args.out.prepare()?;
    let path = args.models.load()?;

    let survey_started = Instant::now();
    let g_seed = derive_seed(args.seed, 0x67);
    let table = estimate_g_table(&path, args.k_tilde, args.n_tilde, g_seed, true)
        .context("stage survey")?;
    let half_width = args
        .smooth_half_width
        .unwrap_or_else(|| default_half_width(args.k_tilde));
    let table = dlog_g(&smooth(&table, half_width));
    println!(
        "stage survey: {:.3} s",
        survey_started.elapsed().as_secs_f64()
    );

    let mut rows = Vec::new();
    for (k_idx, &k) in args.k_list.iter().enumerate() {
        // one schedule set per K, shared across repetitions
        let mut schedules: Vec<(String, Schedule)> = vec![("linear".into(), Schedule::linear(k))];
        let optimum = de_solve(&table, k, args.tol, args.max_iter).context("stage solve")?;
        for &dbmax in &args.dbmax {
            let name = format!("varopt{dbmax}");
            let decelerated = decelerate(&optimum, dbmax, args.tol)
                .with_context(|| format!("stage decelerate: {name}"))?;
            schedules.push((name, decelerated));
        }
        schedules.push(("varopt".into(), optimum));
        for file in &args.schedule_file {
            let stem = file
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| file.display().to_string());
            let schedule = Schedule::read_csv(file)
                .with_context(|| format!("stage load-schedule: {}", file.display()))?;
            schedules.push((stem, schedule));
        }

        for rep in 0..args.repeats {
            let seed = derive_seed(args.seed, (k_idx as u64) * 10_000 + rep as u64 + 1);
            for (name, schedule) in &schedules {
                let started = Instant::now();
                let result = run_ais(&path, schedule, args.n_runs, seed, &[], false)
                    .with_context(|| format!("stage ais: {name} K={k}"))?;
                let wall = started.elapsed().as_secs_f64();
                println!(
                    "{name} K={k} seed={seed}: log_z_hat = {:.4}, ess = {:.1} ({wall:.3} s)",
                    result.log_z_hat, result.ess
                );
                rows.push(format!(
                    "{name},{k},{},{seed},{},{},{},{wall:.6}",
                    args.n_runs, result.log_z_hat, result.ess, result.log_weight_std
                ));
            }
        }
    }

    let file = out.join("compare.csv");
    let mut text =
        String::from("schedule_name,K,N,seed,log_z_hat,ess,log_weight_std,wall_time_s\n");
    for row in rows {
        text.push_str(&row);
        text.push('\n');
    }
    std::fs::write(&file, text)
        .with_context(|| format!("stage write-compare: {}", file.display()))?;
    println!("wrote {}", file.display());
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Train(args) => cmd_train(args),
        Command::Ais(args) => cmd_ais(args),
        Command::EstimateG(args) => cmd_estimate_g(args),
        Command::SolveSchedule(args) => cmd_solve_schedule(args),
        Command::Decelerate(args) => cmd_decelerate(args),
        Command::Varopt(args) => cmd_varopt(args),
        Command::Exact(args) => cmd_exact(args),
        Command::Compare(args) => cmd_compare(args),
    }
}
