//! Continuous-time simulated annealing in `R^d`.
//!
//! The dynamics is the inhomogeneous Langevin equation
//!
//! ```text
//! dX_t = dB_t - ½ β_t ∇U(X_t) dt,      β_t = log(e^{c β₀} + t) / c
//! ```
//!
//! This crate provides the integrator ([`sde`]), the cooling schedule
//! ([`schedule`]), a catalog of test potentials ([`potentials`]), and the
//! analytics used to check annealing behaviour against theory: critical depth
//! by sublevel-set sweeps ([`barriers`]), Gibbs quadrature ([`gibbs`]),
//! spectral gaps of the discretized generator ([`spectral`]), a conservative
//! Fokker–Planck solver ([`fokker_planck`]) and a Monte Carlo harness
//! ([`ensemble`]).

pub mod barriers;
pub mod ensemble;
pub mod error;
pub mod fokker_planck;
pub mod gibbs;
pub mod potentials;
pub mod rng;
pub mod schedule;
pub mod sde;
pub mod spectral;
pub mod stats;
pub mod torus;
mod quadrature;
mod union_find;

pub use barriers::{BarrierResult, Graph, GridSpec, Topology};
pub use ensemble::EnsembleStats;
pub use error::{Error, Result};
pub use potentials::{builtin, GrowthClass, Potential, PotentialMeta};
pub use schedule::{BetaSchedule, CoolingSchedule};
pub use sde::{StepPolicy, Trajectory};
pub use torus::TorusSpec;
