//! Per-pair physics and the closed-form best response.
//!
//! A pair only needs what its destination can measure: its direct gain
//! `G_nn` and the received interference-plus-antenna-noise power
//! `X_n = sum_{m != n} p_m G_mn + δ²_n` ([`LocalObservation`]).
//!
//! Harvested power is `η α (p G_nn + X_n)`. `X_n` carries the antenna noise,
//! so the harvester is credited with δ² as well; this keeps the best
//! response, the constraint evaluation and the cooperative oracle on one
//! consistent model. [`antenna_noise_harvest`] reports that share.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenario::Scenario;

#[derive(Debug, Error, PartialEq)]
pub enum GameError {
    #[error("invalid observation: {0}")]
    InvalidObservation(&'static str),
    #[error("invalid strategy: {0}")]
    InvalidStrategy(&'static str),
    #[error("no splitting ratio meets both constraints at p = {power} W (minimum feasible power {minimum} W)")]
    Infeasible { power: f64, minimum: f64 },
}

/// What destination n measures locally, plus its own requirements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalObservation {
    /// Direct gain G_nn.
    pub own_gain: f64,
    /// X_n: interference from all other sources plus antenna noise (W).
    pub interference_plus_noise: f64,
    /// σ²_n (W).
    pub id_noise: f64,
    /// γ_n (linear).
    pub sinr_threshold: f64,
    /// Required harvested power (W).
    pub eh_threshold: f64,
    /// η.
    pub efficiency: f64,
}

impl LocalObservation {
    /// The observation destination `n` makes under the power vector `powers`.
    pub fn of_pair(s: &Scenario, n: usize, powers: &[f64]) -> Self {
        LocalObservation {
            own_gain: s.gain(n, n),
            interference_plus_noise: s.interference_plus_noise(n, powers),
            id_noise: s.id_noise(n),
            sinr_threshold: s.sinr_threshold(n),
            eh_threshold: s.eh_threshold(n),
            efficiency: s.efficiency(),
        }
    }

    pub fn validate(&self) -> Result<(), GameError> {
        let pos = |x: f64| x.is_finite() && x > 0.0;
        if !pos(self.own_gain) {
            return Err(GameError::InvalidObservation("own_gain must be > 0"));
        }
        if !pos(self.interference_plus_noise) {
            return Err(GameError::InvalidObservation("interference_plus_noise must be > 0"));
        }
        if !pos(self.id_noise) {
            return Err(GameError::InvalidObservation("id_noise must be > 0"));
        }
        if !pos(self.sinr_threshold) {
            return Err(GameError::InvalidObservation("sinr_threshold must be > 0"));
        }
        if !(self.eh_threshold.is_finite() && self.eh_threshold >= 0.0) {
            return Err(GameError::InvalidObservation("eh_threshold must be >= 0"));
        }
        if !(self.efficiency > 0.0 && self.efficiency < 1.0) {
            return Err(GameError::InvalidObservation("efficiency must be in (0, 1)"));
        }
        Ok(())
    }

    /// Y_n = E_n / η: received power the harvester must see.
    pub fn harvest_target(&self) -> f64 {
        self.eh_threshold / self.efficiency
    }
}

/// One pair's action.
///
/// The information-decoding share `1 - alpha` is stored next to `alpha`:
/// when the split is close to 1 the subtraction loses most of its digits,
/// and the best response can produce the share directly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairStrategy {
    p: f64,
    alpha: f64,
    id_share: f64,
}

impl PairStrategy {
    pub fn new(p: f64, alpha: f64) -> Result<Self, GameError> {
        if !(p.is_finite() && p >= 0.0) {
            return Err(GameError::InvalidStrategy("p must be finite and >= 0"));
        }
        if !(0.0..1.0).contains(&alpha) {
            return Err(GameError::InvalidStrategy("alpha must be in [0, 1)"));
        }
        Ok(PairStrategy { p, alpha, id_share: 1.0 - alpha })
    }

    /// Transmit power (W).
    pub fn p(&self) -> f64 {
        self.p
    }

    /// Fraction of received power routed to the harvester.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Fraction routed to the information decoder, `1 - alpha`.
    pub fn id_share(&self) -> f64 {
        self.id_share
    }
}

/// A power and splitting ratio for every pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyProfile {
    pub p: Vec<f64>,
    pub alpha: Vec<f64>,
}

impl StrategyProfile {
    pub fn n_pairs(&self) -> usize {
        self.p.len()
    }

    pub fn total_power(&self) -> f64 {
        self.p.iter().sum()
    }

    pub fn validate(&self) -> Result<(), GameError> {
        if self.p.len() != self.alpha.len() {
            return Err(GameError::InvalidStrategy("p and alpha lengths differ"));
        }
        for (&p, &a) in self.p.iter().zip(&self.alpha) {
            PairStrategy::new(p, a)?;
        }
        Ok(())
    }

    pub fn pair(&self, n: usize) -> Result<PairStrategy, GameError> {
        PairStrategy::new(self.p[n], self.alpha[n])
    }
}

pub fn sinr(strategy: &PairStrategy, obs: &LocalObservation) -> f64 {
    let share = strategy.id_share;
    share * strategy.p * obs.own_gain / (share * obs.interference_plus_noise + obs.id_noise)
}

/// Power delivered to the harvester, `η α (p G_nn + X_n)`.
pub fn harvested_energy(strategy: &PairStrategy, obs: &LocalObservation) -> f64 {
    obs.efficiency * strategy.alpha * (strategy.p * obs.own_gain + obs.interference_plus_noise)
}

/// The part of [`harvested_energy`] that comes from antenna noise, `η α δ²`.
pub fn antenna_noise_harvest(strategy: &PairStrategy, obs: &LocalObservation, antenna_noise: f64) -> f64 {
    obs.efficiency * strategy.alpha * antenna_noise
}

/// Intermediate quantities of the best-response formula.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ResponseTerms {
    /// X − Y + γX + γσ².
    pub a: f64,
    /// √Δ, Δ = a² + 4γYσ².
    pub sqrt_delta: f64,
}

pub(crate) fn response_terms(x: f64, y: f64, gamma: f64, sigma2: f64) -> ResponseTerms {
    let a = x - y + gamma * x + gamma * sigma2;
    let sqrt_delta = if y == 0.0 { a } else { (a * a + 4.0 * gamma * y * sigma2).sqrt() };
    ResponseTerms { a, sqrt_delta }
}

/// `(p⋆, α⋆, 1 − α⋆)` without validation.
///
/// All three come from cancellation-free rearrangements:
/// `α⋆ = 2Y / (b + √Δ)` with `b = X + Y + γX + γσ²` (the smaller root of
/// `(1+γ)X α² − b α + Y = 0`), `1 − α⋆ = (a + √Δ) / (b + √Δ)` and
/// `p⋆ = (γ(X + σ²) + (√Δ − a)/2) / G`, where `a + √Δ` and `√Δ − a` are
/// evaluated through `4γYσ² / (√Δ ∓ a)` whenever they would cancel.
pub(crate) fn best_response_parts(obs: &LocalObservation) -> (f64, f64, f64) {
    let x = obs.interference_plus_noise;
    let y = obs.harvest_target();
    let gamma = obs.sinr_threshold;
    let sigma2 = obs.id_noise;
    let ResponseTerms { a, sqrt_delta } = response_terms(x, y, gamma, sigma2);
    let c = 4.0 * gamma * y * sigma2;

    let root_minus_a = if a > 0.0 { c / (sqrt_delta + a) } else { sqrt_delta - a };
    let root_plus_a = if a < 0.0 { c / (sqrt_delta - a) } else { sqrt_delta + a };
    let b = x + y + gamma * x + gamma * sigma2;
    let denom = b + sqrt_delta;

    let p = (gamma * (x + sigma2) + 0.5 * root_minus_a) / obs.own_gain;
    let alpha = 2.0 * y / denom;
    let id_share = root_plus_a / denom;
    (p, alpha, id_share)
}

/// Closed-form best response of a pair: the minimum power meeting both its
/// SINR and harvesting requirements, with the splitting ratio that makes
/// both hold with equality.
pub fn best_response(obs: &LocalObservation) -> PairStrategy {
    debug_assert!(obs.validate().is_ok(), "invalid observation {obs:?}");
    let (p, alpha, id_share) = best_response_parts(obs);
    assert!(alpha > -1e-9 && alpha < 1.0 + 1e-9, "best response split {alpha} left [0, 1) for {obs:?}");
    let alpha = alpha.clamp(0.0, 1.0 - 1e-15);
    let id_share = id_share.clamp(1e-300, 1.0);
    PairStrategy { p, alpha, id_share }
}

/// The best-response splitting ratio, reused at a given power.
///
/// At any `p` at or above the best-response power the best-response split
/// keeps both constraints satisfied; below it no split does.
pub fn splitting_ratio(p: f64, obs: &LocalObservation) -> Result<f64, GameError> {
    let (minimum, alpha, _) = best_response_parts(obs);
    if p < minimum * (1.0 - 1e-9) {
        return Err(GameError::Infeasible { power: p, minimum });
    }
    Ok(alpha.clamp(0.0, 1.0 - 1e-15))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn obs(g: f64, x: f64, sigma2: f64, gamma: f64, eh: f64, eta: f64) -> LocalObservation {
        LocalObservation {
            own_gain: g,
            interference_plus_noise: x,
            id_noise: sigma2,
            sinr_threshold: gamma,
            eh_threshold: eh,
            efficiency: eta,
        }
    }

    #[test]
    fn sinr_direct_substitution() {
        let o = obs(1.0, 1.0, 1.0, 1.0, 0.0, 0.5);
        assert_eq!(sinr(&PairStrategy::new(2.0, 0.0).unwrap(), &o), 1.0);
        let s = sinr(&PairStrategy::new(4.0, 0.5).unwrap(), &o);
        assert!((s - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn harvested_energy_direct_substitution() {
        // p G = 3, X = 1 (antenna noise folded into X), η = α = 0.5
        let o = obs(1.0, 1.0, 1.0, 1.0, 0.0, 0.5);
        let e = harvested_energy(&PairStrategy::new(3.0, 0.5).unwrap(), &o);
        assert_eq!(e, 1.0);
        assert_eq!(harvested_energy(&PairStrategy::new(7.0, 0.0).unwrap(), &o), 0.0);
        let noise_part = antenna_noise_harvest(&PairStrategy::new(3.0, 0.5).unwrap(), &o, 0.2);
        assert!((noise_part - 0.05).abs() < 1e-15);
    }

    #[test]
    fn no_harvesting_reduces_to_classic_power_control() {
        let o = obs(1.0, 1.0, 1.0, 1.0, 0.0, 0.5);
        let br = best_response(&o);
        assert_eq!(br.p(), 2.0);
        assert_eq!(br.alpha(), 0.0);
        assert_eq!(br.id_share(), 1.0);
        // p = γ(X + σ²)/G
        let o = obs(2.5, 0.3, 0.7, 4.0, 0.0, 0.5);
        assert!((best_response(&o).p() - 4.0 * 1.0 / 2.5).abs() < 1e-14);
    }

    #[test]
    fn zero_id_noise_closed_form() {
        // σ² = 0 is outside the validated domain but the algebra still holds
        let o = obs(1.0, 1.0, 0.0, 1.0, 0.5, 0.5); // Y = 1
        let (p, alpha, share) = best_response_parts(&o);
        assert!((p - 1.0).abs() < 1e-15);
        assert!((alpha - 0.5).abs() < 1e-15);
        assert!((share - 0.5).abs() < 1e-15);
        // general form p = γX/G, α = Y/(X(1+γ)) when X − Y + γX >= 0
        let o = obs(2.0, 3.0, 0.0, 2.0, 0.5, 0.25); // Y = 2
        let (p, alpha, _) = best_response_parts(&o);
        assert!((p - 3.0).abs() < 1e-14);
        assert!((alpha - 2.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn splitting_ratio_consistent_with_best_response() {
        let o = obs(1.0, 1.0, 1.0, 1.0, 0.0, 0.5);
        assert_eq!(splitting_ratio(2.0, &o).unwrap(), 0.0);
        assert_eq!(splitting_ratio(50.0, &o).unwrap(), 0.0);
        let o = obs(1.0, 1.0, 1e-300, 1.0, 0.5, 0.5);
        assert!((splitting_ratio(1.0, &o).unwrap() - 0.5).abs() < 1e-12);
        assert!(matches!(splitting_ratio(0.5, &o), Err(GameError::Infeasible { .. })));
    }

    #[test]
    fn rejects_invalid_inputs() {
        assert!(PairStrategy::new(-1.0, 0.0).is_err());
        assert!(PairStrategy::new(1.0, 1.0).is_err());
        assert!(obs(0.0, 1.0, 1.0, 1.0, 0.0, 0.5).validate().is_err());
        assert!(obs(1.0, 1.0, 0.0, 1.0, 0.0, 0.5).validate().is_err());
        assert!(obs(1.0, 1.0, 1.0, 1.0, 0.0, 1.0).validate().is_err());
    }

    #[test]
    fn dominant_harvesting_keeps_precision_near_one() {
        // split within 1e-9 of one; the decoding share must still be exact
        let o = obs(8e-6, 1e-9, 1e-11, 1.0, 1e-1, 0.5);
        let br = best_response(&o);
        assert!(br.alpha() > 0.999_999);
        assert!((sinr(&br, &o) / o.sinr_threshold - 1.0).abs() < 1e-12);
        assert!((harvested_energy(&br, &o) / o.eh_threshold - 1.0).abs() < 1e-12);
    }

    fn log_uniform(center: f64, u: f64) -> f64 {
        center * 10f64.powf(u)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]

        #[test]
        fn constraints_are_tight(
            ug in -3.0f64..3.0, ux in -3.0f64..3.0, us in -3.0f64..3.0,
            uc in -3.0f64..3.0, ue in -3.0f64..3.0, eta in 0.05f64..0.95,
        ) {
            let o = obs(log_uniform(8e-6, ug), log_uniform(1e-7, ux), log_uniform(1e-8, us),
                log_uniform(3.16, uc / 2.0), log_uniform(1e-5, ue), eta);
            let br = best_response(&o);
            prop_assert!(br.p() > 0.0);
            prop_assert!(br.alpha() > 0.0 && br.alpha() < 1.0);
            prop_assert!((sinr(&br, &o) / o.sinr_threshold - 1.0).abs() < 1e-10);
            prop_assert!((harvested_energy(&br, &o) / o.eh_threshold - 1.0).abs() < 1e-10);
            prop_assert!((br.alpha() + br.id_share() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn discriminant_dominates_linear_term(
            x in 1e-9f64..1.0, y in 1e-9f64..1.0, gamma in 1e-2f64..1e2, sigma2 in 1e-12f64..1e-3,
        ) {
            let t = response_terms(x, y, gamma, sigma2);
            prop_assert!(t.sqrt_delta * t.sqrt_delta >= 0.0);
            prop_assert!(t.sqrt_delta > t.a.abs());
        }

        #[test]
        fn lower_power_is_infeasible_for_every_split(
            ug in -2.0f64..2.0, ux in -2.0f64..2.0, ue in -2.0f64..2.0, factor in 0.01f64..0.999,
        ) {
            let o = obs(log_uniform(8e-6, ug), log_uniform(1e-7, ux), 1e-8, 3.16, log_uniform(1e-5, ue), 0.5);
            let br = best_response(&o);
            let p = br.p() * factor;
            // scan the split and confirm no value satisfies both constraints
            for k in 0..=1000 {
                let alpha = k as f64 / 1001.0;
                let s = PairStrategy::new(p, alpha).unwrap();
                let ok = sinr(&s, &o) >= o.sinr_threshold && harvested_energy(&s, &o) >= o.eh_threshold;
                prop_assert!(!ok);
            }
        }
    }
}
