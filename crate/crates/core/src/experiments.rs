//! Seeded Monte Carlo harness: existence-probability sweeps, equilibrium vs
//! cooperative-optimum power sweeps and convergence traces, with CSV and
//! JSON provenance output.
//!
//! Trial `t` of a sweep always draws its channel from stream `t` of a
//! ChaCha8 generator seeded with the sweep seed, so every sweep point sees
//! the same fading realizations. Per-trial results are collected in trial
//! order and summed sequentially: output is bit-identical for a given spec
//! whatever the [`Execution`] mode.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::equilibrium::{best_response_dynamics, existence_check, DynamicsOptions, DynamicsResult};
use crate::exec::Execution;
use crate::game::{best_response, GameError, LocalObservation, StrategyProfile};
use crate::oracle::{oracle_min_total_power, GridConfig, OracleError, MAX_ORACLE_PAIRS};
use crate::scenario::{
    db_to_linear, dbm_to_watt, generate_rayleigh_scenario, watt_to_dbm, ChannelConfig, Constraints, Scenario,
    ScenarioError, RNG_ALGORITHM,
};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid sweep: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Generator for trial `trial` of a run seeded with `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    InterDistance,
    EhThresholdDbm,
    SinrThresholdDb,
}

/// Network template shared by every trial of a sweep. Thresholds and noise
/// levels are common to all pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseConfig {
    pub n_pairs: usize,
    pub inner_distance: f64,
    pub inter_distance: f64,
    pub path_loss_exponent: f64,
    pub attenuation_at_1m: f64,
    pub antenna_noise_dbm: f64,
    pub id_noise_dbm: f64,
    pub sinr_threshold_db: f64,
    pub eh_threshold_dbm: f64,
    pub efficiency: f64,
}

impl BaseConfig {
    /// d_nn = 5 m, d_mn = 10 m, ζ = 3, 30 dB loss at 1 m, δ² = −60 dBm,
    /// σ² = −50 dBm, η = 0.5, γ = 0 dB, E = −20 dBm.
    pub fn reference(n_pairs: usize) -> Self {
        BaseConfig {
            n_pairs,
            inner_distance: 5.0,
            inter_distance: 10.0,
            path_loss_exponent: 3.0,
            attenuation_at_1m: 1e-3,
            antenna_noise_dbm: -60.0,
            id_noise_dbm: -50.0,
            sinr_threshold_db: 0.0,
            eh_threshold_dbm: -20.0,
            efficiency: 0.5,
        }
    }

    pub fn with(&self, variable: SweepVariable, value: f64) -> Self {
        let mut out = self.clone();
        match variable {
            SweepVariable::InterDistance => out.inter_distance = value,
            SweepVariable::EhThresholdDbm => out.eh_threshold_dbm = value,
            SweepVariable::SinrThresholdDb => out.sinr_threshold_db = value,
        }
        out
    }

    pub fn channel(&self, seed: u64) -> ChannelConfig {
        let mut cfg = ChannelConfig::uniform(
            self.n_pairs,
            self.inner_distance,
            self.inter_distance,
            self.path_loss_exponent,
            seed,
        );
        cfg.attenuation_at_1m = self.attenuation_at_1m;
        cfg
    }

    pub fn constraints(&self) -> Constraints {
        Constraints::uniform(
            self.n_pairs,
            dbm_to_watt(self.antenna_noise_dbm),
            dbm_to_watt(self.id_noise_dbm),
            db_to_linear(self.sinr_threshold_db),
            dbm_to_watt(self.eh_threshold_dbm),
            self.efficiency,
        )
    }

    /// The scenario of trial `trial` of a run seeded with `seed`.
    pub fn draw(&self, seed: u64, trial: u64) -> Result<Scenario, ScenarioError> {
        generate_rayleigh_scenario(&self.channel(seed), self.constraints(), &mut trial_rng(seed, trial))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub sweep_variable: SweepVariable,
    pub values: Vec<f64>,
    /// Existence sweeps: channel draws per point. Power sweeps: feasible
    /// draws (ρ(Ω) < 1) per point.
    pub trials: usize,
    pub base: BaseConfig,
    pub seed: u64,
    /// Power sweeps give up on a point after `trials * max_draw_factor` draws.
    pub max_draw_factor: usize,
    pub dynamics: DynamicsOptions,
    pub steps_per_decade: usize,
    pub refine_rounds: usize,
    /// Power sweeps: also require ρ(Ω) < 1 at this SINR threshold before
    /// admitting a draw. Curves run at different thresholds then share one
    /// draw set when each uses the largest of them here.
    #[serde(default)]
    pub admission_sinr_threshold_db: Option<f64>,
}

impl SweepSpec {
    /// Existence probability against d_mn ∈ {5, 10, …, 50} m, 1000 draws per point.
    pub fn existence_default(n_pairs: usize, sinr_threshold_db: f64, seed: u64) -> Self {
        let mut base = BaseConfig::reference(n_pairs);
        base.sinr_threshold_db = sinr_threshold_db;
        SweepSpec {
            sweep_variable: SweepVariable::InterDistance,
            values: (1..=10).map(|k| 5.0 * k as f64).collect(),
            trials: 1000,
            base,
            seed,
            max_draw_factor: 1000,
            dynamics: DynamicsOptions::default(),
            steps_per_decade: 50,
            refine_rounds: 3,
            admission_sinr_threshold_db: None,
        }
    }

    /// Two pairs, E ∈ {−30, −25, …, −10} dBm, 200 feasible draws per point.
    pub fn eh_default(sinr_threshold_db: f64, seed: u64) -> Self {
        let mut spec = SweepSpec::existence_default(2, sinr_threshold_db, seed);
        spec.sweep_variable = SweepVariable::EhThresholdDbm;
        spec.values = (0..=4).map(|k| -30.0 + 5.0 * k as f64).collect();
        spec.trials = 200;
        spec.dynamics.tol = 1e-12;
        spec.dynamics.max_iter = 1_000_000;
        spec
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.values.is_empty() {
            return Err(ExperimentError::InvalidSpec("values must be nonempty".into()));
        }
        if self.values.windows(2).any(|w| !(w[0] <= w[1])) {
            return Err(ExperimentError::InvalidSpec("values must be sorted ascending".into()));
        }
        if self.trials == 0 {
            return Err(ExperimentError::InvalidSpec("trials must be >= 1".into()));
        }
        if let Some(db) = self.admission_sinr_threshold_db {
            if !db.is_finite() {
                return Err(ExperimentError::InvalidSpec("admission_sinr_threshold_db must be finite".into()));
            }
        }
        for &v in &self.values {
            let b = self.base.with(self.sweep_variable, v);
            b.channel(self.seed).validate()?;
            b.constraints().validate(b.n_pairs)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub sweep_value: f64,
    /// Fraction of drawn channels with ρ(Ω) < 1.
    pub existence_probability: f64,
    pub mean_total_power_ne_watts: Option<f64>,
    pub mean_total_power_oracle_watts: Option<f64>,
    pub mean_iterations: Option<f64>,
    /// Trials entering the averages.
    pub trials_feasible: usize,
    pub trials_drawn: usize,
    /// Draws discarded because ρ(Ω) >= 1 (at the sweep or admission threshold).
    pub trials_discarded: usize,
    /// Feasible draws whose dynamics failed to converge (excluded from averages).
    pub trials_unconverged: usize,
}

impl SweepPoint {
    /// `10 log10(NE mean / oracle mean)`.
    pub fn gap_db(&self) -> Option<f64> {
        match (self.mean_total_power_ne_watts, self.mean_total_power_oracle_watts) {
            (Some(ne), Some(or)) if ne > 0.0 && or > 0.0 => Some(10.0 * (ne / or).log10()),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub rng_algorithm: String,
    pub library_version: String,
    pub spec: SweepSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    pub provenance: Provenance,
}

fn provenance(spec: &SweepSpec) -> Provenance {
    Provenance {
        seed: spec.seed,
        rng_algorithm: RNG_ALGORITHM.to_string(),
        library_version: env!("CARGO_PKG_VERSION").to_string(),
        spec: spec.clone(),
    }
}

/// Fraction of channel draws admitting an equilibrium at every sweep value.
pub fn run_existence_sweep(spec: &SweepSpec, exec: Execution) -> Result<SweepResult, ExperimentError> {
    spec.validate()?;
    if spec.sweep_variable == SweepVariable::EhThresholdDbm {
        return Err(ExperimentError::InvalidSpec(
            "existence does not depend on the harvesting threshold; sweep inter_distance or sinr_threshold_db".into(),
        ));
    }
    let mut points = Vec::with_capacity(spec.values.len());
    for &value in &spec.values {
        let base = spec.base.with(spec.sweep_variable, value);
        let exists =
            exec.map_indexed(spec.trials, |t| base.draw(spec.seed, t as u64).map(|s| existence_check(&s).exists));
        let mut count = 0usize;
        for e in exists {
            count += e? as usize;
        }
        points.push(SweepPoint {
            sweep_value: value,
            existence_probability: count as f64 / spec.trials as f64,
            mean_total_power_ne_watts: None,
            mean_total_power_oracle_watts: None,
            mean_iterations: None,
            trials_feasible: count,
            trials_drawn: spec.trials,
            trials_discarded: spec.trials - count,
            trials_unconverged: 0,
        });
    }
    Ok(SweepResult { points, provenance: provenance(spec) })
}

/// Every pair answering zero interference: the starting point of the power sweeps.
pub fn isolated_profile(s: &Scenario) -> StrategyProfile {
    let zero = vec![0.0; s.n_pairs()];
    let responses: Vec<_> = (0..s.n_pairs()).map(|k| best_response(&LocalObservation::of_pair(s, k, &zero))).collect();
    StrategyProfile {
        p: responses.iter().map(|r| r.p()).collect(),
        alpha: responses.iter().map(|r| r.alpha()).collect(),
    }
}

struct TrialOutcome {
    ne_total: f64,
    oracle_total: f64,
    iterations: usize,
}

/// Mean equilibrium and cooperative-optimum total power at every sweep
/// value, over the first `trials` draws with ρ(Ω) < 1.
pub fn run_eh_sweep(spec: &SweepSpec, exec: Execution) -> Result<SweepResult, ExperimentError> {
    spec.validate()?;
    if spec.base.n_pairs > MAX_ORACLE_PAIRS {
        return Err(ExperimentError::InvalidSpec(format!(
            "the cooperative oracle handles at most {MAX_ORACLE_PAIRS} pairs"
        )));
    }
    let max_draws = spec.trials.saturating_mul(spec.max_draw_factor.max(1));
    let mut points = Vec::with_capacity(spec.values.len());
    for &value in &spec.values {
        let base = spec.base.with(spec.sweep_variable, value);
        let admission = spec.admission_sinr_threshold_db.map(|db| base.with(SweepVariable::SinrThresholdDb, db));

        // admission: first `trials` existent draws, in trial order
        let mut admitted = Vec::with_capacity(spec.trials);
        let mut drawn = 0usize;
        while admitted.len() < spec.trials && drawn < max_draws {
            let chunk = (spec.trials - admitted.len()).max(64).min(max_draws - drawn);
            let start = drawn;
            let flags = exec.map_indexed(chunk, |i| {
                let t = (start + i) as u64;
                let own = existence_check(&base.draw(spec.seed, t)?).exists;
                match &admission {
                    Some(a) if own => Ok(existence_check(&a.draw(spec.seed, t)?).exists),
                    _ => Ok::<bool, ScenarioError>(own),
                }
            });
            for (i, f) in flags.into_iter().enumerate() {
                drawn = start + i + 1;
                if f? {
                    admitted.push(start + i);
                    if admitted.len() == spec.trials {
                        break;
                    }
                }
            }
        }

        let outcomes = exec.map_indexed(admitted.len(), |i| -> Result<Option<TrialOutcome>, ExperimentError> {
            let s = base.draw(spec.seed, admitted[i] as u64)?;
            let dynamics = best_response_dynamics(&s, &isolated_profile(&s), &spec.dynamics)?;
            if !dynamics.converged {
                return Ok(None);
            }
            let ne = &dynamics.final_profile;
            let grid = GridConfig {
                steps_per_decade: spec.steps_per_decade,
                refine_rounds: spec.refine_rounds,
                ..GridConfig::around(&ne.p)
            };
            // grid points inside one trial run sequentially; trials are the parallel unit
            let oracle = oracle_min_total_power(&s, &grid, Execution::Sequential)?;
            Ok(Some(TrialOutcome {
                ne_total: ne.total_power(),
                oracle_total: oracle.total,
                iterations: dynamics.iterations,
            }))
        });

        let (mut ne_sum, mut oracle_sum, mut iter_sum, mut used, mut unconverged) = (0.0, 0.0, 0usize, 0usize, 0usize);
        for o in outcomes {
            match o? {
                Some(o) => {
                    ne_sum += o.ne_total;
                    oracle_sum += o.oracle_total;
                    iter_sum += o.iterations;
                    used += 1;
                }
                None => unconverged += 1,
            }
        }
        let mean = |sum: f64| if used > 0 { Some(sum / used as f64) } else { None };
        points.push(SweepPoint {
            sweep_value: value,
            existence_probability: if drawn > 0 { admitted.len() as f64 / drawn as f64 } else { 0.0 },
            mean_total_power_ne_watts: mean(ne_sum),
            mean_total_power_oracle_watts: mean(oracle_sum),
            mean_iterations: mean(iter_sum as f64),
            trials_feasible: used,
            trials_drawn: drawn,
            trials_discarded: drawn - admitted.len(),
            trials_unconverged: unconverged,
        });
    }
    Ok(SweepResult { points, provenance: provenance(spec) })
}

/// Random initial powers, uniform in dBm over this range.
pub const INIT_POWER_DBM: (f64, f64) = (0.0, 40.0);

/// Best-response dynamics from `n_inits` random strictly positive starting
/// profiles (initialization `k` uses stream `k` of `seed`).
pub fn run_convergence_experiment(
    s: &Scenario,
    n_inits: usize,
    seed: u64,
    opts: &DynamicsOptions,
    exec: Execution,
) -> Result<Vec<DynamicsResult>, ExperimentError> {
    exec.map_indexed(n_inits, |k| {
        let mut rng = trial_rng(seed, k as u64);
        let p = (0..s.n_pairs()).map(|_| dbm_to_watt(rng.gen_range(INIT_POWER_DBM.0..INIT_POWER_DBM.1))).collect();
        let init = StrategyProfile { p, alpha: vec![0.0; s.n_pairs()] };
        best_response_dynamics(s, &init, opts).map_err(ExperimentError::from)
    })
    .into_iter()
    .collect()
}

/// Draws channels from `base` on successive trial streams of `seed` until
/// one admits an equilibrium. Returns the scenario and its trial index.
pub fn first_existent_scenario(
    base: &BaseConfig,
    constraints: &Constraints,
    seed: u64,
    max_draws: u64,
) -> Result<(Scenario, u64), ExperimentError> {
    for trial in 0..max_draws {
        let s = generate_rayleigh_scenario(&base.channel(seed), constraints.clone(), &mut trial_rng(seed, trial))?;
        if existence_check(&s).exists {
            return Ok((s, trial));
        }
    }
    Err(ExperimentError::InvalidSpec(format!("no existent channel in {max_draws} draws")))
}

/// Optional values are written as empty fields.
fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn fmt_dbm(x: Option<f64>) -> String {
    fmt_opt(x.and_then(|w| watt_to_dbm(w).ok()))
}

pub const SWEEP_CSV_HEADER: [&str; 7] = [
    "sweep_value",
    "existence_probability",
    "ne_total_dbm",
    "oracle_total_dbm",
    "mean_iterations",
    "trials_feasible",
    "ne_oracle_gap_db",
];

pub fn write_sweep_csv<W: Write>(result: &SweepResult, out: W) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_CSV_HEADER)?;
    for p in &result.points {
        w.write_record([
            p.sweep_value.to_string(),
            p.existence_probability.to_string(),
            fmt_dbm(p.mean_total_power_ne_watts),
            fmt_dbm(p.mean_total_power_oracle_watts),
            fmt_opt(p.mean_iterations),
            p.trials_feasible.to_string(),
            fmt_opt(p.gap_db()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn sweep_csv_string(result: &SweepResult) -> Result<String, ExperimentError> {
    let mut buf = Vec::new();
    write_sweep_csv(result, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

/// Sidecar path for a CSV output: same stem, `.json` extension.
pub fn sidecar_path(csv_path: &Path) -> std::path::PathBuf {
    csv_path.with_extension("json")
}

/// Writes the CSV and its JSON provenance sidecar (spec, seed, generator,
/// library version, per-point trial accounting).
pub fn write_sweep_outputs(result: &SweepResult, csv_path: &Path) -> Result<(), ExperimentError> {
    write_sweep_csv(result, std::fs::File::create(csv_path)?)?;
    let sidecar = serde_json::to_string_pretty(result)?;
    std::fs::write(sidecar_path(csv_path), sidecar)?;
    Ok(())
}

pub const TRACE_CSV_HEADER: [&str; 5] = ["run", "iteration", "pair", "p_dbm", "alpha"];

/// One row per (run, iteration, pair); iteration 0 is the initial profile.
pub fn write_trace_csv<W: Write>(runs: &[DynamicsResult], out: W) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_CSV_HEADER)?;
    for (run, result) in runs.iter().enumerate() {
        for (it, profile) in result.trace.iter().enumerate() {
            for (pair, (&p, &alpha)) in profile.p.iter().zip(&profile.alpha).enumerate() {
                let p_dbm = watt_to_dbm(p).map(|v| v.to_string()).unwrap_or_else(|_| "-inf".into());
                w.write_record([run.to_string(), it.to_string(), pair.to_string(), p_dbm, alpha.to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
