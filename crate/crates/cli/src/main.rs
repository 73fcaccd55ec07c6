use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};
use swipt_ifc::equilibrium::{existence_check, Verdict};
use swipt_ifc::experiments::{
    isolated_profile, run_convergence_experiment, run_eh_sweep, run_existence_sweep, sidecar_path, write_sweep_outputs,
    write_trace_csv, ExperimentError, SweepSpec, SweepVariable,
};
use swipt_ifc::oracle::{oracle_min_total_power, GridConfig};
use swipt_ifc::scenario::{dbm_to_watt, watt_to_dbm, RNG_ALGORITHM};
use swipt_ifc::{best_response_dynamics, verify_ne, DynamicsOptions, DynamicsResult, Execution, Scenario, Schedule};

const EXIT_PARSE: u8 = 1;
const EXIT_NONEXISTENT: u8 = 2;
const EXIT_BOUNDARY: u8 = 3;
const EXIT_NOT_CONVERGED: u8 = 4;

/// Equilibrium analysis of power splitting SWIPT interference channels.
#[derive(Parser)]
#[command(name = "swipt-ifc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Spectral radius of the coupling matrix and the existence verdict.
    Check { scenario: PathBuf },
    /// Best-response dynamics to the equilibrium.
    Solve {
        scenario: PathBuf,
        #[command(flatten)]
        dynamics: DynamicsArgs,
        /// Run even when no equilibrium exists, to observe divergence.
        #[arg(long)]
        force: bool,
        /// Per-iteration trace CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// JSON report.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Cooperative minimum total power by grid search (at most 3 pairs).
    Oracle {
        scenario: PathBuf,
        /// Search box in dBm; defaults to [NE - 30 dB, NE + 10 dB] per pair.
        #[arg(long, requires = "p_max_dbm")]
        p_min_dbm: Option<f64>,
        #[arg(long, requires = "p_min_dbm")]
        p_max_dbm: Option<f64>,
        #[arg(long, default_value_t = 50)]
        steps_per_decade: usize,
        #[arg(long, default_value_t = 3)]
        refine_rounds: usize,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Existence probability against the cross-link distance.
    SweepExistence {
        #[command(flatten)]
        sweep: SweepArgs,
        #[arg(long, default_value_t = 2)]
        n_pairs: usize,
        #[arg(long, default_value_t = 0.0)]
        sinr_db: f64,
        /// Comma-separated cross-link distances in metres.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        values: Option<Vec<f64>>,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
    },
    /// Mean equilibrium and cooperative total power against the harvesting target.
    SweepEh {
        #[command(flatten)]
        sweep: SweepArgs,
        #[arg(long, default_value_t = 5.0)]
        sinr_db: f64,
        /// Comma-separated harvesting targets in dBm.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        values: Option<Vec<f64>>,
        /// Feasible draws per point.
        #[arg(long, default_value_t = 200)]
        trials: usize,
        /// Admit only draws that also admit an equilibrium at this SINR target,
        /// so curves at different targets share their draws.
        #[arg(long)]
        admit_sinr_db: Option<f64>,
        #[command(flatten)]
        dynamics: DynamicsArgs,
    },
    /// Dynamics from several random starts, one trace CSV for all runs.
    Trace {
        scenario: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 2)]
        inits: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        dynamics: DynamicsArgs,
    },
}

#[derive(Args, Clone)]
struct DynamicsArgs {
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// jacobi or gauss-seidel
    #[arg(long)]
    schedule: Option<Schedule>,
}

impl DynamicsArgs {
    fn apply(&self, mut opts: DynamicsOptions) -> Result<DynamicsOptions, Failure> {
        if let Some(tol) = self.tol {
            if tol.is_nan() || tol <= 0.0 {
                return Err(Failure::parse("tol", "must be positive"));
            }
            opts.tol = tol;
        }
        if let Some(m) = self.max_iter {
            opts.max_iter = m;
        }
        if let Some(s) = self.schedule {
            opts.schedule = s;
        }
        Ok(opts)
    }
}

#[derive(Args)]
struct SweepArgs {
    /// CSV path; the JSON provenance lands next to it.
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Run trials on one thread.
    #[arg(long)]
    sequential: bool,
}

impl SweepArgs {
    fn exec(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn parse(field: &str, reason: impl std::fmt::Display) -> Self {
        Failure { code: EXIT_PARSE, message: format!("invalid `{field}`: {reason}") }
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        Failure { code: EXIT_PARSE, message: e.to_string() }
    }
}

fn load(path: &Path) -> Result<Scenario, Failure> {
    Scenario::from_path(path).map_err(|e| Failure { code: EXIT_PARSE, message: format!("{}: {e}", path.display()) })
}

fn write(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure { code: EXIT_PARSE, message: format!("{}: {e}", path.display()) })
}

fn dbm(w: f64) -> f64 {
    watt_to_dbm(w).unwrap_or(f64::NEG_INFINITY)
}

fn provenance(command: &str, config: Value) -> Value {
    json!({
        "command": command,
        "library_version": env!("CARGO_PKG_VERSION"),
        "rng_algorithm": RNG_ALGORITHM,
        "config": config,
    })
}

/// Refuses to proceed unless an equilibrium exists (or `force` is set).
fn require_existence(s: &Scenario, force: bool) -> Result<(), Failure> {
    let report = existence_check(s);
    let code = match report.verdict {
        Verdict::Exists => return Ok(()),
        Verdict::DoesNotExist => EXIT_NONEXISTENT,
        Verdict::Boundary => EXIT_BOUNDARY,
    };
    if force {
        eprintln!("warning: rho={:.6}, continuing because of --force", report.spectral_radius);
        return Ok(());
    }
    Err(Failure {
        code,
        message: format!("no equilibrium: rho={:.6} (use --force to run the dynamics anyway)", report.spectral_radius),
    })
}

fn check(path: &Path) -> Result<(), Failure> {
    let s = load(path)?;
    let report = existence_check(&s);
    println!("rho={:.6} exists={}", report.spectral_radius, report.exists);
    println!(
        "verdict={:?} method={:?} bound_gap={:.3e} m_matrix_exists={}",
        report.verdict, report.method, report.bound_gap, report.m_matrix_exists
    );
    match report.verdict {
        Verdict::Exists => Ok(()),
        Verdict::DoesNotExist => Err(Failure { code: EXIT_NONEXISTENT, message: String::new() }),
        Verdict::Boundary => Err(Failure { code: EXIT_BOUNDARY, message: String::new() }),
    }
}

fn write_trace(path: &Path, runs: &[DynamicsResult], config: Value) -> Result<(), Failure> {
    let mut buf = Vec::new();
    write_trace_csv(runs, &mut buf)?;
    write(path, &String::from_utf8_lossy(&buf))?;
    write(&sidecar_path(path), &serde_json::to_string_pretty(&config).expect("plain JSON"))
}

fn solve(
    path: &Path,
    dynamics: &DynamicsArgs,
    force: bool,
    trace: Option<&Path>,
    output: Option<&Path>,
) -> Result<(), Failure> {
    let s = load(path)?;
    require_existence(&s, force)?;
    let opts = dynamics.apply(DynamicsOptions::default())?;
    let run = best_response_dynamics(&s, &isolated_profile(&s), &opts)
        .map_err(|e| Failure { code: EXIT_PARSE, message: e.to_string() })?;
    let config = provenance(
        "solve",
        json!({ "scenario": path, "init": "isolated best responses", "dynamics": opts, "force": force }),
    );
    if let Some(t) = trace {
        write_trace(t, std::slice::from_ref(&run), config.clone())?;
    }
    let check = verify_ne(&run.final_profile, &s, opts.verify_tol);
    for (k, (p, a)) in run.final_profile.p.iter().zip(&run.final_profile.alpha).enumerate() {
        println!("pair {}: p={:.4} dBm alpha={:.6}", k + 1, dbm(*p), a);
    }
    println!(
        "iterations={} residual={:.3e} converged={} verified={}",
        run.iterations, run.residual, run.converged, check.holds
    );
    if let Some(out) = output {
        let report = json!({
            "provenance": config,
            "p_dbm": run.final_profile.p.iter().map(|&p| dbm(p)).collect::<Vec<_>>(),
            "p_watts": run.final_profile.p,
            "alpha": run.final_profile.alpha,
            "iterations": run.iterations,
            "residual": if run.residual.is_finite() { json!(run.residual) } else { Value::Null },
            "converged": run.converged,
            "verified": check.holds,
            "pairs": check.pairs,
        });
        write(out, &serde_json::to_string_pretty(&report).expect("plain JSON"))?;
    }
    if run.converged && check.holds {
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_NOT_CONVERGED,
            message: format!(
                "dynamics did not reach a verified equilibrium within {} rounds (residual {:.3e})",
                opts.max_iter, run.residual
            ),
        })
    }
}

fn oracle(
    path: &Path,
    box_dbm: Option<(f64, f64)>,
    steps_per_decade: usize,
    refine_rounds: usize,
    output: Option<&Path>,
) -> Result<(), Failure> {
    let s = load(path)?;
    let mut grid = match box_dbm {
        Some((lo, hi)) => GridConfig::uniform(dbm_to_watt(lo), dbm_to_watt(hi)),
        None => {
            require_existence(&s, false)?;
            let run = best_response_dynamics(&s, &isolated_profile(&s), &DynamicsOptions::default())
                .map_err(|e| Failure { code: EXIT_PARSE, message: e.to_string() })?;
            if !run.converged {
                return Err(Failure {
                    code: EXIT_NOT_CONVERGED,
                    message: "no equilibrium to centre the search box on; give --p-min-dbm/--p-max-dbm".into(),
                });
            }
            GridConfig::around(&run.final_profile.p)
        }
    };
    grid.steps_per_decade = steps_per_decade;
    grid.refine_rounds = refine_rounds;
    let sol = oracle_min_total_power(&s, &grid, Execution::Parallel)
        .map_err(|e| Failure { code: EXIT_PARSE, message: e.to_string() })?;
    for (k, (p, a)) in sol.powers.iter().zip(&sol.alphas).enumerate() {
        println!("pair {}: p={:.4} dBm alpha={:.6}", k + 1, dbm(*p), a);
    }
    println!("total={:.4} dBm evaluated={}", dbm(sol.total), sol.evaluated_points);
    if let Some(out) = output {
        let report = json!({
            "provenance": provenance("oracle", json!({ "scenario": path, "grid": grid })),
            "p_dbm": sol.powers.iter().map(|&p| dbm(p)).collect::<Vec<_>>(),
            "total_dbm": dbm(sol.total),
            "solution": sol,
        });
        write(out, &serde_json::to_string_pretty(&report).expect("plain JSON"))?;
    }
    Ok(())
}

fn print_sweep_summary(path: &Path, points: usize) {
    println!("wrote {} ({} points) and {}", path.display(), points, sidecar_path(path).display());
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Check { scenario } => check(&scenario),
        Command::Solve { scenario, dynamics, force, trace, output } => {
            solve(&scenario, &dynamics, force, trace.as_deref(), output.as_deref())
        }
        Command::Oracle { scenario, p_min_dbm, p_max_dbm, steps_per_decade, refine_rounds, output } => {
            oracle(&scenario, p_min_dbm.zip(p_max_dbm), steps_per_decade, refine_rounds, output.as_deref())
        }
        Command::SweepExistence { sweep, n_pairs, sinr_db, values, trials } => {
            let mut spec = SweepSpec::existence_default(n_pairs, sinr_db, sweep.seed);
            spec.trials = trials;
            if let Some(v) = values {
                spec.values = v;
            }
            let result = run_existence_sweep(&spec, sweep.exec())?;
            write_sweep_outputs(&result, &sweep.output)?;
            print_sweep_summary(&sweep.output, result.points.len());
            Ok(())
        }
        Command::SweepEh { sweep, sinr_db, values, trials, admit_sinr_db, dynamics } => {
            let mut spec = SweepSpec::eh_default(sinr_db, sweep.seed);
            spec.trials = trials;
            spec.admission_sinr_threshold_db = admit_sinr_db;
            spec.dynamics = dynamics.apply(spec.dynamics)?;
            if let Some(v) = values {
                spec.values = v;
            }
            debug_assert_eq!(spec.sweep_variable, SweepVariable::EhThresholdDbm);
            let result = run_eh_sweep(&spec, sweep.exec())?;
            write_sweep_outputs(&result, &sweep.output)?;
            print_sweep_summary(&sweep.output, result.points.len());
            Ok(())
        }
        Command::Trace { scenario, output, inits, seed, dynamics } => {
            let s = load(&scenario)?;
            require_existence(&s, false)?;
            let opts = dynamics.apply(DynamicsOptions::default())?;
            let runs = run_convergence_experiment(&s, inits, seed, &opts, Execution::Parallel)?;
            let config =
                provenance("trace", json!({ "scenario": scenario, "inits": inits, "seed": seed, "dynamics": opts }));
            write_trace(&output, &runs, config)?;
            let unconverged = runs.iter().filter(|r| !r.converged).count();
            println!("wrote {} ({} runs, {} unconverged)", output.display(), runs.len(), unconverged);
            if unconverged > 0 {
                return Err(Failure {
                    code: EXIT_NOT_CONVERGED,
                    message: format!("{unconverged} runs did not converge"),
                });
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_PARSE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            if !f.message.is_empty() {
                eprintln!("error: {}", f.message);
            }
            ExitCode::from(f.code)
        }
    }
}
