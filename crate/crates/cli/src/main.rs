use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use sepfilter::criteria::{
    equivalence_from_batch, kallianpur_striebel_check, kazamaki_statistics, CriterionEstimate, Experiment,
};
use sepfilter::filter::{run_particle_filter, FilterRunner, RunnerState};
use sepfilter::io::{to_json, write_density, write_filter, write_json, write_paths, FilterRecord};
use sepfilter::model::{validate, HiddenLaw, ProbePoint, ValidationReport};
use sepfilter::moments::classify;
use sepfilter::mze::{solve_q, MzeSummary};
use sepfilter::rng::{derive_seed, stream_rng};
use sepfilter::scenario::{Overrides, Scenario};
use sepfilter::sde::{run_filter, simulate_joint, simulate_r_original, MeasureTag};
use sepfilter::{Error, ErrorClass};

#[derive(Parser)]
#[command(name = "sepfilter", version, about = "Separated filtering for risk-sensitive benchmarked investment")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dump joint (X, Y, R) paths.
    Simulate(Args),
    /// Filter trajectories, compared against a particle filter.
    Filter(Args),
    /// Monte-Carlo estimate of the original criterion.
    Criterion(Args),
    /// Original against separated criterion on common random numbers.
    Equivalence(Args),
    /// Deterministic density solve, cross-checked by Monte Carlo.
    Mze(Args),
    /// Separability classification of the observation drifts.
    Classify(Args),
    /// Kazamaki diagnostics.
    Kazamaki(Args),
    /// Cluster-wise Kallianpur-Striebel check.
    KsCheck(Args),
}

#[derive(clap::Args)]
struct Args {
    /// Scenario file, TOML or JSON.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Command {
    fn args(&self) -> &Args {
        match self {
            Command::Simulate(a)
            | Command::Filter(a)
            | Command::Criterion(a)
            | Command::Equivalence(a)
            | Command::Mze(a)
            | Command::Classify(a)
            | Command::Kazamaki(a)
            | Command::KsCheck(a) => a,
        }
    }
}

/// Why a run stopped, as printed on stderr.
#[derive(Serialize)]
struct Failure {
    error: &'static str,
    message: String,
    /// Violated invariants, each with the number of probe points that
    /// failed and the first of them.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    violations: Vec<ViolationGroup>,
}

#[derive(Serialize)]
struct ViolationGroup {
    invariant: String,
    count: usize,
    first_probe: ProbePoint,
}

fn group_violations(report: ValidationReport) -> Vec<ViolationGroup> {
    let mut groups: Vec<ViolationGroup> = Vec::new();
    for v in report.violations {
        match groups.iter_mut().find(|g| g.invariant == v.invariant) {
            Some(g) => g.count += 1,
            None => groups.push(ViolationGroup {
                invariant: v.invariant,
                count: 1,
                first_probe: v.probe,
            }),
        }
    }
    groups
}

enum Stop {
    Error(Error),
    Invalid(ValidationReport),
}

impl From<Error> for Stop {
    fn from(e: Error) -> Self {
        Stop::Error(e)
    }
}

impl Stop {
    fn report(self) -> ExitCode {
        let (code, failure) = match self {
            Stop::Invalid(report) => (
                2,
                Failure {
                    error: "validation",
                    message: "model failed validation".into(),
                    violations: group_violations(report),
                },
            ),
            Stop::Error(e) => {
                let (code, class) = match e.class() {
                    ErrorClass::Validation => (2, "validation"),
                    ErrorClass::Numerical => (3, "numerical"),
                    ErrorClass::Io => (1, "io"),
                };
                (
                    code,
                    Failure {
                        error: class,
                        message: e.to_string(),
                        violations: Vec::new(),
                    },
                )
            }
        };
        eprint!("{}", to_json(&failure).unwrap_or_else(|_| failure.message.clone()));
        ExitCode::from(code)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("SEPFILTER_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        // Results never depend on the worker count, only wall time does.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(stop) => stop.report(),
    }
}

fn run(command: &Command) -> Result<(), Stop> {
    let args = command.args();
    let overrides = Overrides {
        seed: args.seed,
        paths: args.paths,
        dt: args.dt,
        theta: args.theta,
        out: args.out.clone(),
    };
    let sc = Scenario::load(&args.config, &overrides)?;
    let report = validate(&sc.spec);
    if !report.ok {
        return Err(Stop::Invalid(report));
    }
    std::fs::create_dir_all(&sc.out).map_err(Error::from)?;
    match command {
        Command::Simulate(_) => simulate(&sc)?,
        Command::Filter(_) => filter(&sc)?,
        Command::Criterion(_) => emit(&sc.out, "criterion.json", &experiment(&sc).j_original()?)?,
        Command::Equivalence(_) => {
            let batch = experiment(&sc).batch(MeasureTag::P)?;
            emit(&sc.out, "equivalence.json", &equivalence_from_batch(&batch)?)?
        }
        Command::Mze(_) => mze(&sc)?,
        Command::Classify(_) => emit(&sc.out, "classify.json", &classify(&sc.spec))?,
        Command::Kazamaki(_) => {
            let ex = experiment(&sc);
            let report = kazamaki_statistics(&ex.batch(MeasureTag::P)?, &ex.batch(MeasureTag::Ph)?)?;
            emit(&sc.out, "kazamaki.json", &report)?
        }
        Command::KsCheck(_) => {
            let report =
                kallianpur_striebel_check(&sc.spec, &sc.strategy, &sc.params, &sc.grid, sc.mc.seed, &sc.ks.into())?;
            emit(&sc.out, "ks.json", &report)?
        }
    }
    Ok(())
}

fn experiment(sc: &Scenario) -> Experiment<'_> {
    Experiment {
        spec: &sc.spec,
        strategy: &sc.strategy,
        params: sc.params,
        grid: sc.grid,
        seed: sc.mc.seed,
        n_paths: sc.mc.n_paths,
        filter_kind: sc.filter_kind,
    }
}

/// Writes the report into the output directory and echoes it on stdout.
fn emit<T: Serialize + ?Sized>(dir: &Path, name: &str, value: &T) -> sepfilter::Result<()> {
    write_json(&dir.join(name), value)?;
    print!("{}", to_json(value)?);
    Ok(())
}

fn csv_file(dir: &Path, name: &str) -> sepfilter::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn runner(sc: &Scenario) -> sepfilter::Result<FilterRunner<'_, f64>> {
    match sc.filter_kind {
        Some(k) => FilterRunner::new(&sc.spec, k, sc.grid.dt, sc.grid.steps),
        None => FilterRunner::auto(&sc.spec, sc.grid.dt, sc.grid.steps),
    }
}

#[derive(Serialize)]
struct SimulateSummary {
    n_paths: usize,
    steps: usize,
    dt: f64,
    seed: u64,
    n_diverged: usize,
    mean_r_terminal: f64,
}

fn simulate(sc: &Scenario) -> sepfilter::Result<()> {
    let bundles = simulate_joint(&sc.spec, &sc.grid, sc.mc.seed, sc.mc.n_paths, None);
    let needs_filter = !sc.strategy.is_constant();
    let runner = if needs_filter { Some(runner(sc)?) } else { None };
    let mut returns = Vec::with_capacity(bundles.len());
    for b in &bundles {
        let traj = match &runner {
            Some(r) if !b.diverged => Some(run_filter(&sc.spec, r, b)?),
            _ => None,
        };
        returns.push(if b.diverged && needs_filter {
            Vec::new()
        } else {
            simulate_r_original(&sc.spec, &sc.strategy, sc.params.r0, b, traj.as_ref())?
        });
    }
    write_paths(csv_file(&sc.out, "paths.csv")?, &bundles, &returns)?;
    let terminal: Vec<f64> = returns.iter().filter_map(|r| r.last().copied()).collect();
    emit(
        &sc.out,
        "simulate.json",
        &SimulateSummary {
            n_paths: bundles.len(),
            steps: sc.grid.steps,
            dt: sc.grid.dt,
            seed: sc.mc.seed,
            n_diverged: bundles.iter().filter(|b| b.diverged).count(),
            mean_r_terminal: terminal.iter().sum::<f64>() / terminal.len().max(1) as f64,
        },
    )
}

#[derive(Serialize)]
struct OracleComparison {
    path_id: u64,
    /// Root mean square gap between the filter mean and the particle mean.
    rmse: f64,
    /// Time average of `sqrt(trace Π)`, or of the posterior spread for Wonham.
    mean_spread: f64,
    relative_rmse: f64,
    resample_count: usize,
}

#[derive(Serialize)]
struct FilterReport {
    filter_kind: sepfilter::filter::FilterKind,
    n_paths: usize,
    particles: usize,
    /// Absent when the hidden law is not Gaussian.
    oracle: Option<Vec<OracleComparison>>,
}

fn filter(sc: &Scenario) -> sepfilter::Result<()> {
    let runner = runner(sc)?;
    let n_paths = sc.filter.paths.min(sc.mc.n_paths).max(1);
    let bundles = simulate_joint(&sc.spec, &sc.grid, sc.mc.seed, n_paths, None);
    let gaussian = matches!(sc.spec.x0(), HiddenLaw::Gaussian { .. });
    let oracle_on = gaussian && sc.filter.particles > 0;
    let mut trajectories = Vec::with_capacity(n_paths);
    let mut traces = Vec::new();
    let mut comparisons = Vec::new();
    for b in &bundles {
        let traj = run_filter(&sc.spec, &runner, b)?;
        if oracle_on {
            let mut rng = stream_rng(derive_seed(sc.mc.seed, 7), b.path_id);
            let (trace, _) =
                run_particle_filter(&sc.spec, sc.spec.x0(), sc.grid.t0, sc.grid.dt, &b.y, sc.filter.particles, &mut rng)?;
            let mut se = 0.0;
            let mut spread = 0.0;
            for (state, pm) in traj.states.iter().zip(&trace.mean) {
                let RunnerState::Gaussian(g) = state else { break };
                se += (&g.m - pm).norm_squared();
                spread += g.pi.trace().max(0.0).sqrt();
            }
            let k = traj.states.len() as f64;
            let (rmse, mean_spread) = ((se / k).sqrt(), spread / k);
            comparisons.push(OracleComparison {
                path_id: b.path_id,
                rmse,
                mean_spread,
                relative_rmse: if mean_spread > 0.0 { rmse / mean_spread } else { f64::INFINITY },
                resample_count: trace.resample_count,
            });
            traces.push(trace.ess);
        }
        trajectories.push(traj);
    }
    let records: Vec<FilterRecord<'_>> = bundles
        .iter()
        .zip(&trajectories)
        .enumerate()
        .map(|(i, (b, t))| FilterRecord {
            path_id: b.path_id,
            trajectory: t,
            ess: traces.get(i).map(Vec::as_slice),
        })
        .collect();
    write_filter(csv_file(&sc.out, "filter.csv")?, &records)?;
    emit(
        &sc.out,
        "filter_report.json",
        &FilterReport {
            filter_kind: runner.kind(),
            n_paths,
            particles: if oracle_on { sc.filter.particles } else { 0 },
            oracle: oracle_on.then_some(comparisons),
        },
    )
}

#[derive(Serialize)]
struct MzeReport {
    #[serde(flatten)]
    summary: MzeSummary,
    monte_carlo: CriterionEstimate,
    /// `I_bar(solver) − I_bar(MC)`.
    gap: f64,
    /// Gap over the Monte-Carlo stderr.
    z: f64,
}

fn mze(sc: &Scenario) -> sepfilter::Result<()> {
    let sol = solve_q(&sc.spec, &sc.strategy, &sc.params, sc.filter_kind, &sc.mze)?;
    let mut grids = sol.density.snapshots.clone();
    grids.push(sol.density.final_grid.clone());
    write_density(csv_file(&sc.out, "density.csv")?, &grids)?;
    let mc = experiment(sc).i_bar()?;
    let gap = sol.summary.I_bar - mc.I_value;
    let z = if mc.stderr_I > 0.0 { gap / mc.stderr_I } else { 0.0 };
    emit(
        &sc.out,
        "mze_summary.json",
        &MzeReport {
            summary: sol.summary,
            monte_carlo: mc,
            gap,
            z,
        },
    )
}
