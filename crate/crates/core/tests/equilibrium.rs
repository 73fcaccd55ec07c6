mod common;

use rand::Rng;
use swipt_ifc::equilibrium::{existence_check, Schedule};
use swipt_ifc::experiments::{isolated_profile, run_convergence_experiment};
use swipt_ifc::scenario::Constraints;
use swipt_ifc::{best_response_dynamics, contraction_gap, verify_ne, z_factor, DynamicsOptions, Execution, Scenario};

fn existent(seed: u64, count: usize, n: usize, sinr_db: (f64, f64)) -> Vec<Scenario> {
    let mut rng = common::rng(seed);
    let mut out = Vec::new();
    while out.len() < count {
        let n = if n == 0 { rng.gen_range(2..=6) } else { n };
        let s = common::random_scenario(&mut rng, n, sinr_db, (-30.0, -10.0), (5.0, 50.0));
        if existence_check(&s).exists {
            out.push(s);
        }
    }
    out
}

#[test]
fn dynamics_reach_the_two_pair_fixed_point() {
    for s in existent(31, 20, 2, (0.0, 15.0)) {
        let expected = common::two_pair_equilibrium(&s);
        let r = best_response_dynamics(&s, &isolated_profile(&s), &DynamicsOptions::default()).unwrap();
        assert!(r.converged && r.verified);
        for (p, e) in r.final_profile.p.iter().zip(expected) {
            assert!((p / e - 1.0).abs() < 1e-6);
        }
    }
}

#[test]
fn every_start_reaches_the_same_profile() {
    for s in existent(32, 10, 4, (0.0, 10.0)) {
        let runs = run_convergence_experiment(&s, 10, 5, &DynamicsOptions::default(), Execution::Sequential).unwrap();
        let reference = &runs[0].final_profile.p;
        for r in &runs {
            assert!(r.converged && r.verified);
            for (a, b) in r.final_profile.p.iter().zip(reference) {
                assert!((a / b - 1.0).abs() < 1e-6);
            }
        }
    }
}

#[test]
fn jacobi_and_gauss_seidel_agree() {
    for s in existent(33, 50, 0, (0.0, 15.0)) {
        let init = isolated_profile(&s);
        let jacobi = best_response_dynamics(&s, &init, &DynamicsOptions::default()).unwrap();
        let gs_opts = DynamicsOptions { schedule: Schedule::GaussSeidel, ..DynamicsOptions::default() };
        let gs = best_response_dynamics(&s, &init, &gs_opts).unwrap();
        assert!(jacobi.converged && gs.converged);
        for (a, b) in jacobi.final_profile.p.iter().zip(&gs.final_profile.p) {
            assert!((a / b - 1.0).abs() < 1e-6);
        }
    }
}

#[test]
fn gauss_seidel_contracts_at_the_spectral_rate() {
    for s in existent(34, 30, 0, (0.0, 15.0)) {
        let rho = existence_check(&s).spectral_radius;
        let opts = DynamicsOptions { schedule: Schedule::GaussSeidel, tol: 1e-13, ..DynamicsOptions::default() };
        let r = best_response_dynamics(&s, &isolated_profile(&s), &opts).unwrap();
        let fixed = &r.final_profile.p;
        let errors: Vec<f64> = r
            .trace
            .iter()
            .map(|step| step.p.iter().zip(fixed).map(|(a, b)| (a - b).abs() / b).fold(0.0, f64::max))
            .take_while(|&e| e > 1e-10)
            .collect();
        // skip the transient, then compare consecutive error ratios
        for w in errors.windows(2).skip(errors.len() / 2) {
            assert!(w[1] / w[0] <= rho + 0.1, "ratio {} with rho {rho}", w[1] / w[0]);
        }
    }
}

#[test]
fn diverges_without_an_equilibrium() {
    let c = Constraints::uniform(2, 1e-9, 1e-8, 10.0, 1e-5, 0.5);
    let s = Scenario::new(2, vec![1.0, 0.5, 0.5, 1.0], c).unwrap();
    assert!(!existence_check(&s).exists);
    let opts = DynamicsOptions { max_iter: 300, ..DynamicsOptions::default() };
    let r = best_response_dynamics(&s, &isolated_profile(&s), &opts).unwrap();
    assert!(!r.converged && !r.verified);
}

#[test]
fn sub_unity_sinr_targets_can_cycle_despite_small_rho() {
    let s = Scenario::from_json_str(
        r#"{
            "n_pairs": 3,
            "gains": [[2.5272757662614718e-6, 5.7686280721475984e-8, 6.946136292267096e-7],
                      [7.570118634048322e-7, 7.381278803016945e-6, 4.182480458138928e-7],
                      [1.4585073986228532e-6, 1.4092762040215725e-6, 7.004037839586597e-6]],
            "antenna_noise_dbm": -60.0,
            "id_noise_dbm": -50.0,
            "sinr_threshold_db": [-4.263397432672158, -3.509255042137589, 13.24072458449102],
            "eh_threshold_dbm": [-23.40559677518727, -26.16495223965549, -27.437603825438906],
            "efficiency": 0.5
        }"#,
    )
    .unwrap();
    let report = existence_check(&s);
    assert!(report.exists && report.spectral_radius < 0.8);
    for schedule in [Schedule::Jacobi, Schedule::GaussSeidel] {
        let opts = DynamicsOptions { schedule, ..DynamicsOptions::default() };
        let r = best_response_dynamics(&s, &isolated_profile(&s), &opts).unwrap();
        assert!(!r.converged && r.residual > 0.1);
    }
}

#[test]
fn best_response_map_contracts_in_the_omega_norm() {
    let mut rng = common::rng(35);
    for s in existent(36, 20, 0, (0.0, 15.0)) {
        let n = s.n_pairs();
        for _ in 0..50 {
            let p: Vec<f64> = (0..n).map(|_| 10f64.powf(rng.gen_range(-4.0..1.0))).collect();
            let q: Vec<f64> = (0..n).map(|_| 10f64.powf(rng.gen_range(-4.0..1.0))).collect();
            let (lhs, rhs) = contraction_gap(&s, &p, &q);
            for k in 0..n {
                assert!(lhs[k] < rhs[k]);
                assert!(z_factor(&s, k, &p, &q).abs() < 1.0);
            }
        }
    }
}

#[test]
fn sub_unity_sinr_target_can_break_the_omega_bound() {
    // With γ < 1 and harvesting dominant the response slope in X tends to
    // 1/G, which exceeds the γ/G entry of Ω.
    let c = Constraints::uniform(2, 1e-9, 1e-8, 0.1, 1e-2, 0.5);
    let s = Scenario::new(2, vec![1.0, 0.01, 0.01, 1.0], c).unwrap();
    let (lhs, rhs) = contraction_gap(&s, &[1e-3, 1e-3], &[2e-3, 2e-3]);
    assert!(lhs[0] > rhs[0], "{lhs:?} vs {rhs:?}");
    assert!(existence_check(&s).exists);
}

#[test]
fn z_factor_approaches_one_when_information_noise_dominates() {
    let c = Constraints::uniform(2, 1e-9, 1.0, 1.0, 1e-9, 0.5);
    let s = Scenario::new(2, vec![1.0, 0.1, 0.1, 1.0], c).unwrap();
    let z = z_factor(&s, 0, &[1e-3, 1e-3], &[2e-3, 2e-3]);
    assert!(z < 1.0 && z > 0.999, "{z}");
}

#[test]
fn two_pair_oracle_equilibrium_passes_verification() {
    for s in existent(37, 10, 2, (-5.0, 15.0)) {
        let p = common::two_pair_equilibrium(&s);
        let alpha = (0..2)
            .map(|k| {
                let obs = swipt_ifc::LocalObservation::of_pair(&s, k, &p);
                swipt_ifc::game::splitting_ratio(p[k] * (1.0 + 1e-12), &obs).unwrap()
            })
            .collect();
        let profile = swipt_ifc::StrategyProfile { p: p.to_vec(), alpha };
        assert!(verify_ne(&profile, &s, 1e-6).holds);
    }
}
