//! Test-only oracles and generators. Nothing here calls the closed-form
//! best response.
#![allow(dead_code)]

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use swipt_ifc::experiments::BaseConfig;
use swipt_ifc::scenario::{db_to_linear, dbm_to_watt, generate_rayleigh_scenario, Constraints};
use swipt_ifc::{LocalObservation, Scenario};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn log_uniform<R: Rng>(rng: &mut R, center: f64, decades: f64) -> f64 {
    center * 10f64.powf(rng.gen_range(-decades..decades))
}

/// Local observation with every parameter log-uniform over ±3 decades
/// around the reference network's magnitudes.
pub fn random_observation<R: Rng>(rng: &mut R) -> LocalObservation {
    LocalObservation {
        own_gain: log_uniform(rng, 8e-6, 3.0),
        interference_plus_noise: log_uniform(rng, 1e-7, 3.0),
        id_noise: log_uniform(rng, 1e-8, 3.0),
        sinr_threshold: log_uniform(rng, db_to_linear(5.0), 3.0),
        eh_threshold: log_uniform(rng, 1e-5, 3.0),
        efficiency: 0.5,
    }
}

/// Rayleigh scenario with the reference geometry, per-pair thresholds drawn
/// uniformly in dB over the given ranges and a random cross-link distance.
pub fn random_scenario<R: Rng>(
    rng: &mut R,
    n_pairs: usize,
    sinr_db: (f64, f64),
    eh_dbm: (f64, f64),
    inter_distance: (f64, f64),
) -> Scenario {
    let mut base = BaseConfig::reference(n_pairs);
    base.inter_distance = rng.gen_range(inter_distance.0..=inter_distance.1);
    let constraints = Constraints {
        sinr_threshold: (0..n_pairs).map(|_| db_to_linear(rng.gen_range(sinr_db.0..=sinr_db.1))).collect(),
        eh_threshold: (0..n_pairs).map(|_| dbm_to_watt(rng.gen_range(eh_dbm.0..=eh_dbm.1))).collect(),
        ..base.constraints()
    };
    let cfg = base.channel(rng.gen());
    generate_rayleigh_scenario(&cfg, constraints, &mut cfg.rng()).unwrap()
}

/// Largest real root of the characteristic polynomial of a nonnegative
/// N×N matrix (N <= 3), by scanning down from an upper bound and bisecting.
pub fn char_poly_perron_root(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    assert!((1..=3).contains(&n));
    let coeffs: Vec<f64> = match n {
        1 => vec![-m[0][0], 1.0],
        2 => {
            let tr = m[0][0] + m[1][1];
            let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            vec![det, -tr, 1.0]
        }
        _ => {
            let tr = m[0][0] + m[1][1] + m[2][2];
            let minor = |i: usize, j: usize| m[i][i] * m[j][j] - m[i][j] * m[j][i];
            let c1 = minor(0, 1) + minor(0, 2) + minor(1, 2);
            let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
            vec![-det, c1, -tr, 1.0]
        }
    };
    let p = |x: f64| coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c);
    let hi0 = m.iter().map(|r| r.iter().sum::<f64>()).fold(0.0, f64::max) + 1.0;
    let steps = 200_000;
    let mut hi = hi0;
    let mut lo = hi0;
    for k in 1..=steps {
        let x = hi0 * (1.0 - k as f64 / steps as f64);
        if p(x) <= 0.0 {
            lo = x;
            break;
        }
        hi = x;
    }
    if lo == hi0 {
        return 0.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if p(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Whether some split α ∈ [0, 1) meets both requirements at power `p`.
/// SINR falls with α, so the smallest α meeting the harvesting floor is the
/// only candidate worth checking.
pub fn feasible_from_constraints(p: f64, obs: &LocalObservation) -> bool {
    let received = p * obs.own_gain + obs.interference_plus_noise;
    let alpha = obs.eh_threshold / (obs.efficiency * received);
    if alpha >= 1.0 {
        return false;
    }
    let share = 1.0 - alpha;
    let sinr = share * p * obs.own_gain / (share * obs.interference_plus_noise + obs.id_noise);
    sinr >= obs.sinr_threshold
}

/// Minimum feasible power by bisection on the constraint check (log scale).
pub fn min_feasible_power(obs: &LocalObservation) -> f64 {
    let (mut lo, mut hi) = (1e-20f64, 1e12f64);
    assert!(feasible_from_constraints(hi, obs) && !feasible_from_constraints(lo, obs));
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if feasible_from_constraints(mid, obs) {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi / lo - 1.0 < 1e-15 {
            break;
        }
    }
    hi
}

/// Equilibrium of a 2-pair scenario from the two simultaneous
/// best-response equations, solved by bisection on
/// `h(p1) = p1 - B1(B2(p1))` with `B` from [`min_feasible_power`].
pub fn two_pair_equilibrium(s: &Scenario) -> [f64; 2] {
    assert_eq!(s.n_pairs(), 2);
    let respond = |k: usize, other: f64| {
        let mut p = [0.0; 2];
        p[1 - k] = other;
        min_feasible_power(&LocalObservation::of_pair(s, k, &p))
    };
    let h = |p1: f64| p1 - respond(0, respond(1, p1));
    let (mut lo, mut hi) = (1e-12f64, 1e8f64);
    assert!(h(lo) < 0.0 && h(hi) > 0.0);
    for _ in 0..300 {
        let mid = (lo * hi).sqrt();
        if h(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi / lo - 1.0 < 1e-14 {
            break;
        }
    }
    let p1 = (lo * hi).sqrt();
    [p1, respond(1, p1)]
}
