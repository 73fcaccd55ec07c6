//! Game-level analysis: the coupling matrix Ω, the existence test, best
//! response dynamics, Nash-equilibrium verification and contraction
//! diagnostics.

use serde::{Deserialize, Serialize};

use crate::exec::Execution;
use crate::game::{
    best_response, harvested_energy, response_terms, sinr, GameError, LocalObservation, PairStrategy, StrategyProfile,
};
use crate::linalg::{solve, spectral_radius, SpectralError, SquareMatrix};
use crate::scenario::Scenario;

pub const SPECTRAL_TOL: f64 = 1e-10;
pub const SPECTRAL_MAX_ITER: usize = 1_000_000;

/// `Ω[n][m] = G_mn γ_n / G_nn` for `m != n`, zero on the diagonal. Rows
/// index destinations.
pub fn build_omega(s: &Scenario) -> SquareMatrix {
    let n = s.n_pairs();
    let mut omega = SquareMatrix::zeros(n);
    for dest in 0..n {
        let scale = s.sinr_threshold(dest) / s.gain(dest, dest);
        for src in 0..n {
            if src != dest {
                omega.set(dest, src, s.gain(src, dest) * scale);
            }
        }
    }
    omega
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExistenceMethod {
    ShiftedPowerIteration,
    MMatrixSolve,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Exists,
    DoesNotExist,
    /// The two tests disagree: ρ(Ω) sits within numerical reach of 1.
    Boundary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExistenceReport {
    pub spectral_radius: f64,
    pub exists: bool,
    pub verdict: Verdict,
    /// Which test produced `spectral_radius` and decided the verdict.
    pub method: ExistenceMethod,
    pub iterations_used: usize,
    /// Collatz–Wielandt upper minus lower bound.
    pub bound_gap: f64,
    /// Outcome of the `(I - Ω) x = 1` positivity test on its own.
    pub m_matrix_exists: bool,
}

/// `(I - Ω) x = 1` has a unique, strictly positive solution.
pub fn m_matrix_test(omega: &SquareMatrix) -> bool {
    let n = omega.dim();
    let mut a = SquareMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let identity = if i == j { 1.0 } else { 0.0 };
            a.set(i, j, identity - omega.get(i, j));
        }
    }
    match solve(&a, &vec![1.0; n]) {
        Some(x) => x.iter().all(|&v| v > 0.0 && v.is_finite()),
        None => false,
    }
}

pub fn existence_check(s: &Scenario) -> ExistenceReport {
    existence_check_with(s, SPECTRAL_TOL, SPECTRAL_MAX_ITER)
}

/// Decides whether a (unique) equilibrium exists, i.e. ρ(Ω) < 1, with two
/// independent tests that must agree.
pub fn existence_check_with(s: &Scenario, tol: f64, max_iter: usize) -> ExistenceReport {
    let omega = build_omega(s);
    let m_matrix_exists = m_matrix_test(&omega);
    let (radius, bound_gap, iterations_used, power_verdict) = match spectral_radius(&omega, tol, max_iter) {
        Ok(est) => (est.radius, est.bound_gap(), est.iterations, Some(est.radius < 1.0)),
        Err(SpectralError::NotConverged { lower, upper, iterations }) => {
            // the bounds are still certified
            let verdict = if upper < 1.0 {
                Some(true)
            } else if lower >= 1.0 {
                Some(false)
            } else {
                None
            };
            (0.5 * (lower + upper), upper - lower, iterations, verdict)
        }
        Err(SpectralError::InvalidEntry { .. }) => unreachable!("Ω of a valid scenario is nonnegative"),
    };
    let (verdict, method) = match power_verdict {
        Some(v) if v == m_matrix_exists => {
            (if v { Verdict::Exists } else { Verdict::DoesNotExist }, ExistenceMethod::ShiftedPowerIteration)
        }
        Some(_) => (Verdict::Boundary, ExistenceMethod::ShiftedPowerIteration),
        None if m_matrix_exists => (Verdict::Exists, ExistenceMethod::MMatrixSolve),
        None => (Verdict::DoesNotExist, ExistenceMethod::MMatrixSolve),
    };
    ExistenceReport {
        spectral_radius: radius,
        exists: verdict == Verdict::Exists,
        verdict,
        method,
        iterations_used,
        bound_gap,
        m_matrix_exists,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Schedule {
    /// All pairs update simultaneously from the previous round's powers.
    #[default]
    Jacobi,
    /// Pairs update in index order using the freshest powers.
    GaussSeidel,
}

impl std::str::FromStr for Schedule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "jacobi" => Ok(Schedule::Jacobi),
            "gauss-seidel" => Ok(Schedule::GaussSeidel),
            other => Err(format!("unknown schedule `{other}` (expected jacobi or gauss-seidel)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicsOptions {
    pub schedule: Schedule,
    /// Stop once `max_n |Δp_n| / p_n` falls below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Tolerance handed to [`verify_ne`] after convergence.
    pub verify_tol: f64,
    pub exec: Execution,
}

impl Default for DynamicsOptions {
    fn default() -> Self {
        DynamicsOptions {
            schedule: Schedule::Jacobi,
            tol: 1e-8,
            max_iter: 1000,
            verify_tol: 1e-6,
            exec: Execution::Sequential,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicsResult {
    /// `trace[0]` is the initial profile, `trace[k]` the profile after round k.
    pub trace: Vec<StrategyProfile>,
    pub converged: bool,
    /// Rounds whose relative power change was at least `tol`. A round that
    /// only confirms the fixed point is in the trace but not counted.
    pub iterations: usize,
    pub final_profile: StrategyProfile,
    /// Relative power change of the last round.
    pub residual: f64,
    /// `verify_ne(final_profile)` when converged, otherwise false.
    pub verified: bool,
}

/// Jacobi updates are only farmed out for networks at least this large.
const PARALLEL_JACOBI_MIN_PAIRS: usize = 256;

/// Best-response dynamics from `init` until the relative power change drops
/// below `opts.tol` or `opts.max_iter` rounds have run. Divergence is
/// reported through `converged = false`, never as an error.
pub fn best_response_dynamics(
    s: &Scenario,
    init: &StrategyProfile,
    opts: &DynamicsOptions,
) -> Result<DynamicsResult, GameError> {
    let n = s.n_pairs();
    if init.n_pairs() != n {
        return Err(GameError::InvalidStrategy("initial profile has the wrong number of pairs"));
    }
    init.validate()?;

    let mut trace = vec![init.clone()];
    let mut current = init.clone();
    let mut residual = f64::INFINITY;
    let mut moved = 0;
    let mut converged = false;

    for _ in 0..opts.max_iter {
        let next = match opts.schedule {
            Schedule::Jacobi => {
                let exec = if n >= PARALLEL_JACOBI_MIN_PAIRS { opts.exec } else { Execution::Sequential };
                let responses = exec.map_indexed(n, |k| best_response(&LocalObservation::of_pair(s, k, &current.p)));
                StrategyProfile {
                    p: responses.iter().map(PairStrategy::p).collect(),
                    alpha: responses.iter().map(PairStrategy::alpha).collect(),
                }
            }
            Schedule::GaussSeidel => {
                let mut next = current.clone();
                for k in 0..n {
                    let br = best_response(&LocalObservation::of_pair(s, k, &next.p));
                    next.p[k] = br.p();
                    next.alpha[k] = br.alpha();
                }
                next
            }
        };
        residual = relative_change(&current.p, &next.p);
        let finite = next.p.iter().all(|p| p.is_finite());
        trace.push(next.clone());
        current = next;
        if !finite {
            residual = f64::INFINITY;
            break;
        }
        if residual < opts.tol {
            converged = true;
            break;
        }
        moved += 1;
    }

    let verified = converged && verify_ne(&current, s, opts.verify_tol).holds;
    Ok(DynamicsResult { trace, converged, iterations: moved, final_profile: current, residual, verified })
}

fn relative_change(old: &[f64], new: &[f64]) -> f64 {
    old.iter().zip(new).map(|(&a, &b)| if a == b { 0.0 } else { (b - a).abs() / a }).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairResidual {
    /// `|p_n - B_n(p_-n)| / p_n`.
    pub power: f64,
    /// `|α_n - f_n(p)|`.
    pub alpha: f64,
    /// `SINR_n / γ_n - 1`.
    pub sinr_gap: f64,
    /// `E_n / threshold - 1`, or 0 when no harvesting is required.
    pub eh_gap: f64,
}

impl PairResidual {
    pub fn worst(&self) -> f64 {
        self.power.max(self.alpha).max(self.sinr_gap.abs()).max(self.eh_gap.abs())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeCheck {
    pub holds: bool,
    pub pairs: Vec<PairResidual>,
}

/// Checks the fixed-point conditions `p_n = B_n(p_-n)`, `α_n = f_n(p)` for
/// every pair, plus the action constraints and constraint tightness.
pub fn verify_ne(profile: &StrategyProfile, s: &Scenario, tol: f64) -> NeCheck {
    let n = s.n_pairs();
    if profile.n_pairs() != n || profile.alpha.len() != n {
        return NeCheck { holds: false, pairs: Vec::new() };
    }
    let mut holds = true;
    let pairs = (0..n)
        .map(|k| {
            let obs = LocalObservation::of_pair(s, k, &profile.p);
            let br = best_response(&obs);
            let (p, alpha) = (profile.p[k], profile.alpha[k]);
            let strategy = PairStrategy::new(p, alpha);
            let (sinr_gap, eh_gap) = match &strategy {
                Ok(st) => {
                    let eh =
                        if obs.eh_threshold > 0.0 { harvested_energy(st, &obs) / obs.eh_threshold - 1.0 } else { 0.0 };
                    (sinr(st, &obs) / obs.sinr_threshold - 1.0, eh)
                }
                Err(_) => (f64::INFINITY, f64::INFINITY),
            };
            let r = PairResidual {
                power: if p > 0.0 { (p - br.p()).abs() / p } else { f64::INFINITY },
                alpha: (alpha - br.alpha()).abs(),
                sinr_gap,
                eh_gap,
            };
            holds &= strategy.is_ok() && r.worst() < tol;
            r
        })
        .collect();
    NeCheck { holds, pairs }
}

/// Componentwise `|T(p) - T(q)|` and `Ω |p - q|`, where `T` applies every
/// pair's best response to the other pairs' powers.
pub fn contraction_gap(s: &Scenario, p: &[f64], q: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = s.n_pairs();
    assert!(p.len() == n && q.len() == n, "power vectors must have one entry per pair");
    let lhs = (0..n)
        .map(|k| {
            let tp = best_response(&LocalObservation::of_pair(s, k, p)).p();
            let tq = best_response(&LocalObservation::of_pair(s, k, q)).p();
            (tp - tq).abs()
        })
        .collect();
    let diff: Vec<f64> = p.iter().zip(q).map(|(a, b)| (a - b).abs()).collect();
    let rhs = build_omega(s).mul_vec(&diff);
    (lhs, rhs)
}

/// `Z_n = (a + a') / (√Δ + √Δ')` with `a = X − Y + γX + γσ²` evaluated at
/// the interference levels produced by `p` and `q`.
pub fn z_factor(s: &Scenario, pair: usize, p: &[f64], q: &[f64]) -> f64 {
    let y = s.eh_threshold(pair) / s.efficiency();
    let gamma = s.sinr_threshold(pair);
    let sigma2 = s.id_noise(pair);
    let t = response_terms(s.interference_plus_noise(pair, p), y, gamma, sigma2);
    let t2 = response_terms(s.interference_plus_noise(pair, q), y, gamma, sigma2);
    (t.a + t2.a) / (t.sqrt_delta + t2.sqrt_delta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Constraints;

    fn symmetric(cross: f64, gamma: f64) -> Scenario {
        let c = Constraints::uniform(2, 1e-9, 1e-8, gamma, 1e-5, 0.5);
        Scenario::new(2, vec![1.0, cross, cross, 1.0], c).unwrap()
    }

    #[test]
    fn omega_single_pair_is_zero() {
        let s = Scenario::new(1, vec![3.0], Constraints::uniform(1, 1e-9, 1e-8, 2.0, 0.0, 0.5)).unwrap();
        assert_eq!(build_omega(&s).as_slice(), &[0.0]);
    }

    #[test]
    fn omega_symmetric_two_pairs() {
        let g = 2e-6;
        let c = Constraints::uniform(2, 1e-9, 1e-8, 0.5, 1e-5, 0.5);
        let s = Scenario::new(2, vec![g; 4], c).unwrap();
        assert_eq!(build_omega(&s).as_slice(), &[0.0, 0.5, 0.5, 0.0]);
    }

    #[test]
    fn omega_uses_destination_rows() {
        // G[m][n]: source m to destination n
        let c = Constraints { sinr_threshold: vec![2.0, 3.0], ..Constraints::uniform(2, 1e-9, 1e-8, 1.0, 0.0, 0.5) };
        let s = Scenario::new(2, vec![4.0, 1.0, 5.0, 10.0], c).unwrap();
        let omega = build_omega(&s);
        // row 0 (destination 0), column 1: G_10 γ_0 / G_00 = 5 * 2 / 4
        assert!((omega.get(0, 1) - 2.5).abs() < 1e-15);
        // row 1, column 0: G_01 γ_1 / G_11 = 1 * 3 / 10
        assert!((omega.get(1, 0) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn existence_examples() {
        let single = Scenario::new(1, vec![1.0], Constraints::uniform(1, 1e-9, 1e-8, 10.0, 1e-5, 0.5)).unwrap();
        let r = existence_check(&single);
        assert!(r.exists);
        assert_eq!(r.spectral_radius, 0.0);

        let r = existence_check(&symmetric(1.0, 2.0));
        assert!(!r.exists);
        assert_eq!(r.verdict, Verdict::DoesNotExist);
        assert!((r.spectral_radius - 2.0).abs() < 1e-9);

        let r = existence_check(&symmetric(0.1, 3.162));
        assert!(r.exists && r.m_matrix_exists);
        assert!((r.spectral_radius - 0.3162).abs() < 1e-9);
        assert!(r.bound_gap < 1e-9);
    }

    #[test]
    fn exact_boundary_is_not_existent_or_flagged() {
        let r = existence_check(&symmetric(1.0, 1.0));
        assert!(!r.exists);
        assert_ne!(r.verdict, Verdict::Exists);
    }

    #[test]
    fn single_pair_dynamics_is_closed_form_in_one_round() {
        let c = Constraints::uniform(1, 1e-9, 1e-8, 3.0, 1e-5, 0.5);
        let s = Scenario::new(1, vec![8e-6], c).unwrap();
        let init = StrategyProfile { p: vec![0.7], alpha: vec![0.0] };
        let res = best_response_dynamics(&s, &init, &DynamicsOptions::default()).unwrap();
        assert!(res.converged && res.verified);
        assert_eq!(res.iterations, 1);
        let expected = best_response(&LocalObservation::of_pair(&s, 0, &[0.0]));
        assert_eq!(res.final_profile.p[0], expected.p());
        assert_eq!(res.trace[1], res.final_profile);
    }

    #[test]
    fn divergence_is_reported_not_raised() {
        let s = symmetric(1.0, 2.0);
        let init = StrategyProfile { p: vec![1.0, 1.0], alpha: vec![0.0, 0.0] };
        let opts = DynamicsOptions { max_iter: 50, ..Default::default() };
        let res = best_response_dynamics(&s, &init, &opts).unwrap();
        assert!(!res.converged);
        assert!(!res.verified);
        assert_eq!(res.trace.len(), 51);
    }

    #[test]
    fn perturbed_equilibrium_fails_at_that_pair() {
        let s = symmetric(0.05, 3.0);
        let init = StrategyProfile { p: vec![1.0, 2.0], alpha: vec![0.0, 0.0] };
        let res = best_response_dynamics(&s, &init, &DynamicsOptions::default()).unwrap();
        assert!(verify_ne(&res.final_profile, &s, 1e-6).holds);
        let mut bad = res.final_profile.clone();
        bad.p[1] *= 2.0;
        let check = verify_ne(&bad, &s, 1e-6);
        assert!(!check.holds);
        assert!(check.pairs[1].power > check.pairs[0].power);
        assert!((check.pairs[1].power - 0.5).abs() < 1e-6);
    }

    #[test]
    fn contraction_gap_trivial_cases() {
        let s = symmetric(0.1, 3.0);
        let p = [0.3, 0.9];
        let (lhs, rhs) = contraction_gap(&s, &p, &p);
        assert_eq!(lhs, vec![0.0, 0.0]);
        assert_eq!(rhs, vec![0.0, 0.0]);
        let single = Scenario::new(1, vec![1.0], Constraints::uniform(1, 1e-9, 1e-8, 3.0, 1e-5, 0.5)).unwrap();
        let (lhs, rhs) = contraction_gap(&single, &[0.1], &[5.0]);
        assert_eq!(lhs, vec![0.0]);
        assert_eq!(rhs, vec![0.0]);
    }

    #[test]
    fn z_factor_symmetric_case() {
        let s = symmetric(0.1, 3.0);
        let p = [0.3, 0.9];
        let z = z_factor(&s, 0, &p, &p);
        let x = s.interference_plus_noise(0, &p);
        let y = 1e-5 / 0.5;
        let a = x - y + 3.0 * x + 3.0 * 1e-8;
        let expected = a / (a * a + 4.0 * 3.0 * y * 1e-8).sqrt();
        assert!((z - expected).abs() < 1e-14);
        assert!(z.abs() < 1.0);
    }
}
