//! Brute-force references computed straight from the constraints, without
//! the closed-form best response: the cooperative minimum total power and a
//! grid-search best response for a single pair.
//!
//! For fixed powers the feasible splitting ratios of a pair form an interval
//! (the harvesting floor bounds α from below, the SINR floor from above), so
//! only powers are gridded.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Execution;
use crate::game::{LocalObservation, PairStrategy};
use crate::scenario::Scenario;

/// Largest network the cooperative grid search accepts.
pub const MAX_ORACLE_PAIRS: usize = 3;

/// Each refinement round spans this many previous-round steps on either side
/// of the incumbent.
const REFINE_HALF_WIDTH_STEPS: usize = 5;
const REFINE_ZOOM: usize = 10;
/// Polishing zooms ×5 per round over ±5 new steps until the log step falls
/// below this many decades.
const POLISH_ZOOM: usize = 5;
const POLISH_HALF_WIDTH_STEPS: usize = 5;
const POLISH_LOG_STEP: f64 = 1e-14;
/// Coordinate bisection stops once a full sweep lowers the total by less
/// than this relative amount.
const POLISH_REL_TOL: f64 = 1e-15;
const POLISH_MAX_SWEEPS: usize = 500;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("cooperative grid search supports at most {MAX_ORACLE_PAIRS} pairs, got {0}")]
    TooManyPairs(usize),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("no feasible grid point in the search box (p_min = {p_min:?} W, p_max = {p_max:?} W)")]
    Infeasible { p_min: Vec<f64>, p_max: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchBox {
    /// The same `[p_min, p_max]` for every pair.
    Uniform { p_min: f64, p_max: f64 },
    /// One `(p_min, p_max)` per pair.
    PerPair(Vec<(f64, f64)>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub search_box: SearchBox,
    /// Log-spaced points per decade of power.
    pub steps_per_decade: usize,
    /// Each round zooms ×10 around the incumbent.
    pub refine_rounds: usize,
    /// Finish with small-window zooming down to ~1e-14 relative resolution,
    /// then coordinate bisection.
    #[serde(default = "default_polish")]
    pub polish: bool,
}

fn default_polish() -> bool {
    true
}

impl GridConfig {
    pub fn uniform(p_min: f64, p_max: f64) -> Self {
        GridConfig {
            search_box: SearchBox::Uniform { p_min, p_max },
            steps_per_decade: 50,
            refine_rounds: 3,
            polish: default_polish(),
        }
    }

    /// Box `[p_n / 1000, 10 p_n]` around a reference profile, typically the
    /// equilibrium powers.
    pub fn around(powers: &[f64]) -> Self {
        GridConfig {
            search_box: SearchBox::PerPair(powers.iter().map(|&p| (p * 1e-3, p * 10.0)).collect()),
            steps_per_decade: 50,
            refine_rounds: 3,
            polish: default_polish(),
        }
    }

    fn bounds(&self, n: usize) -> Result<Vec<(f64, f64)>, OracleError> {
        if self.steps_per_decade < 10 {
            return Err(OracleError::InvalidGrid(format!(
                "steps_per_decade must be >= 10, got {}",
                self.steps_per_decade
            )));
        }
        let bounds = match &self.search_box {
            SearchBox::Uniform { p_min, p_max } => vec![(*p_min, *p_max); n],
            SearchBox::PerPair(b) => {
                if b.len() != n {
                    return Err(OracleError::InvalidGrid(format!("box has {} pairs, scenario {n}", b.len())));
                }
                b.clone()
            }
        };
        for &(lo, hi) in &bounds {
            if !(lo > 0.0 && lo < hi && hi.is_finite()) {
                return Err(OracleError::InvalidGrid(format!("need 0 < p_min < p_max, got [{lo}, {hi}]")));
            }
        }
        Ok(bounds)
    }
}

/// Splitting ratios that meet both requirements of one pair at fixed powers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaInterval {
    /// Harvesting floor: `Y / (p G_nn + X_n)`.
    pub lo: f64,
    /// SINR floor: `1 - γσ² / (p G_nn - γ X_n)`.
    pub hi: f64,
    /// `hi - lo`, computed from the complements `1 - lo` and `1 - hi`.
    pub width: f64,
}

/// Interval of feasible α for a pair transmitting at `p` under observation
/// `obs`, or `None` when no α in [0, 1) works.
pub fn local_alpha_interval(p: f64, obs: &LocalObservation) -> Option<AlphaInterval> {
    let signal = p * obs.own_gain;
    let gamma = obs.sinr_threshold;
    let x = obs.interference_plus_noise;
    let margin = signal - gamma * x;
    if !(margin > 0.0) {
        return None;
    }
    let y = obs.harvest_target();
    let received = signal + x;
    let one_minus_lo = (received - y) / received;
    let one_minus_hi = gamma * obs.id_noise / margin;
    if !(one_minus_lo >= one_minus_hi) {
        return None;
    }
    Some(AlphaInterval { lo: y / received, hi: 1.0 - one_minus_hi, width: one_minus_lo - one_minus_hi })
}

/// Feasible α interval of `pair` when every source transmits at `p`.
pub fn feasible_alpha_interval(p: &[f64], pair: usize, s: &Scenario) -> Option<AlphaInterval> {
    local_alpha_interval(p[pair], &LocalObservation::of_pair(s, pair, p))
}

fn all_pairs_feasible(s: &Scenario, p: &[f64]) -> bool {
    (0..s.n_pairs()).all(|k| feasible_alpha_interval(p, k, s).is_some())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSolution {
    pub powers: Vec<f64>,
    /// Smallest α meeting each pair's harvesting floor.
    pub alphas: Vec<f64>,
    pub total: f64,
    /// Incumbent total after the initial grid and after each refinement,
    /// before polishing.
    pub round_totals: Vec<f64>,
    pub evaluated_points: usize,
}

#[derive(Clone)]
struct Candidate {
    total: f64,
    powers: Vec<f64>,
}

fn better(a: Candidate, b: Candidate) -> Candidate {
    match a.total.total_cmp(&b.total) {
        std::cmp::Ordering::Less => a,
        std::cmp::Ordering::Greater => b,
        std::cmp::Ordering::Equal => {
            let a_first = a
                .powers
                .iter()
                .zip(&b.powers)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .is_none_or(|o| o.is_lt());
            if a_first {
                a
            } else {
                b
            }
        }
    }
}

/// Axis `d` of a tensor grid: `start_d * 10^(j * step)` for `j in 0..count`.
struct Axis {
    start: f64,
    log_step: f64,
    count: usize,
}

impl Axis {
    fn point(&self, j: usize) -> f64 {
        self.start * 10f64.powf(j as f64 * self.log_step)
    }
}

fn search_grid<F>(axes: &[Axis], feasible: &F, exec: Execution) -> (Option<Candidate>, usize)
where
    F: Fn(&[f64]) -> bool + Sync,
{
    let total_points: usize = axes.iter().map(|a| a.count).product();
    let best = exec.reduce_indexed(
        total_points,
        |flat| {
            let mut rest = flat;
            let mut powers = vec![0.0; axes.len()];
            for (d, axis) in axes.iter().enumerate().rev() {
                powers[d] = axis.point(rest % axis.count);
                rest /= axis.count;
            }
            if feasible(&powers) {
                Some(Candidate { total: powers.iter().sum(), powers })
            } else {
                None
            }
        },
        better,
    );
    (best, total_points)
}

/// Lowers one coordinate at a time to the edge of the feasible set, by
/// bisection between zero (never feasible) and the current value. For every
/// pair the feasible set along one coordinate is an interval, so the current
/// point stays feasible throughout. Returns the number of evaluations.
fn coordinate_polish<F>(powers: &mut [f64], feasible: &F) -> usize
where
    F: Fn(&[f64]) -> bool,
{
    let mut evaluated = 0;
    let mut trial = powers.to_vec();
    for _ in 0..POLISH_MAX_SWEEPS {
        let before: f64 = powers.iter().sum();
        for k in 0..powers.len() {
            let (mut lo, mut hi) = (0.0, powers[k]);
            trial.copy_from_slice(powers);
            while hi - lo > hi * f64::EPSILON {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                trial[k] = mid;
                evaluated += 1;
                if feasible(&trial) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            powers[k] = hi;
        }
        let after: f64 = powers.iter().sum();
        if before - after <= POLISH_REL_TOL * before {
            break;
        }
    }
    evaluated
}

/// Minimal-sum feasible point over a log grid with successive zooming,
/// finished by coordinate bisection. Returns the incumbent, per-round grid
/// totals and the number of evaluated points.
fn grid_minimize<F>(
    bounds: &[(f64, f64)],
    steps_per_decade: usize,
    refine_rounds: usize,
    polish: bool,
    feasible: F,
    exec: Execution,
) -> Result<(Vec<f64>, Vec<f64>, usize), OracleError>
where
    F: Fn(&[f64]) -> bool + Sync,
{
    let mut log_step = 1.0 / steps_per_decade as f64;
    let axes: Vec<Axis> = bounds
        .iter()
        .map(|&(lo, hi)| Axis {
            start: lo,
            log_step,
            count: ((hi / lo).log10() * steps_per_decade as f64).ceil() as usize + 1,
        })
        .collect();
    let (best, mut evaluated) = search_grid(&axes, &feasible, exec);
    let mut best = best.ok_or_else(|| OracleError::Infeasible {
        p_min: bounds.iter().map(|b| b.0).collect(),
        p_max: bounds.iter().map(|b| b.1).collect(),
    })?;
    let mut round_totals = vec![best.total];

    let mut zoom = |best: Candidate, log_step: f64, half: usize| {
        let axes: Vec<Axis> = best
            .powers
            .iter()
            .map(|&c| Axis { start: c * 10f64.powf(-(half as f64) * log_step), log_step, count: 2 * half + 1 })
            .collect();
        let (found, n) = search_grid(&axes, &feasible, exec);
        evaluated += n;
        match found {
            Some(found) => better(best, found),
            None => best,
        }
    };
    for _ in 0..refine_rounds {
        log_step /= REFINE_ZOOM as f64;
        best = zoom(best, log_step, REFINE_HALF_WIDTH_STEPS * REFINE_ZOOM);
        round_totals.push(best.total);
    }
    if polish {
        while log_step > POLISH_LOG_STEP {
            log_step /= POLISH_ZOOM as f64;
            best = zoom(best, log_step, POLISH_HALF_WIDTH_STEPS);
        }
    }
    let mut powers = best.powers;
    if polish {
        evaluated += coordinate_polish(&mut powers, &feasible);
    }
    Ok((powers, round_totals, evaluated))
}

/// Cooperative optimum: minimum total power such that every pair can meet
/// both of its requirements with some splitting ratio.
pub fn oracle_min_total_power(s: &Scenario, g: &GridConfig, exec: Execution) -> Result<OracleSolution, OracleError> {
    let n = s.n_pairs();
    if n > MAX_ORACLE_PAIRS {
        return Err(OracleError::TooManyPairs(n));
    }
    let bounds = g.bounds(n)?;
    let (powers, round_totals, evaluated_points) =
        grid_minimize(&bounds, g.steps_per_decade, g.refine_rounds, g.polish, |p| all_pairs_feasible(s, p), exec)?;
    let alphas =
        (0..n).map(|k| feasible_alpha_interval(&powers, k, s).map(|i| i.lo).expect("incumbent is feasible")).collect();
    Ok(OracleSolution { total: powers.iter().sum(), powers, alphas, round_totals, evaluated_points })
}

/// Minimum feasible power of one pair by grid search, with the smallest
/// splitting ratio that meets its harvesting floor.
pub fn brute_force_best_response(obs: &LocalObservation, g: &GridConfig) -> Result<PairStrategy, OracleError> {
    let bounds = g.bounds(1)?;
    let (powers, _, _) = grid_minimize(
        &bounds,
        g.steps_per_decade,
        g.refine_rounds,
        g.polish,
        |p| local_alpha_interval(p[0], obs).is_some(),
        Execution::Sequential,
    )?;
    let interval = local_alpha_interval(powers[0], obs).expect("incumbent is feasible");
    Ok(PairStrategy::new(powers[0], interval.lo.min(1.0 - 1e-15)).expect("grid point is a valid strategy"))
}
