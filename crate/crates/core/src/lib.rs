//! Distributed power control for interference channels whose destinations
//! split the received signal between information decoding and RF energy
//! harvesting.
//!
//! Each source-destination pair picks its transmit power and power-splitting
//! ratio to minimize its own power subject to an SINR floor and a harvested
//! power floor. The crate provides:
//!
//! * [`scenario`]: network instances, unit conversion, Rayleigh channel draws
//!   and the JSON scenario format;
//! * [`game`]: the closed-form best response of one pair from local
//!   measurements;
//! * [`equilibrium`]: the coupling matrix Ω, the existence test ρ(Ω) < 1,
//!   best-response dynamics and equilibrium diagnostics;
//! * [`oracle`]: grid-search references (the cooperative minimum total
//!   power, and a brute-force best response);
//! * [`experiments`]: seeded Monte Carlo sweeps with CSV/JSON output.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod equilibrium;
pub mod exec;
pub mod experiments;
pub mod game;
pub mod linalg;
pub mod oracle;
pub mod scenario;

pub use equilibrium::{
    best_response_dynamics, build_omega, contraction_gap, existence_check, verify_ne, z_factor, DynamicsOptions,
    DynamicsResult, ExistenceReport, Schedule, Verdict,
};
pub use exec::Execution;
pub use game::{
    best_response, harvested_energy, sinr, splitting_ratio, LocalObservation, PairStrategy, StrategyProfile,
};
pub use scenario::{dbm_to_watt, watt_to_dbm, ChannelConfig, Constraints, Scenario};
