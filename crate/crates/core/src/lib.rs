//! n-group behavior-coupled SEIR-type epidemic model: simulation, equilibrium stability,
//! least-squares calibration, Latin hypercube / PRCC sensitivity analysis and scenario sweeps.

pub mod analysis;
pub mod calendar;
pub mod calibration;
pub mod integrator;
pub mod model;
pub mod params;
pub mod scenarios;
pub mod sensitivity;
pub mod state;

pub use integrator::{integrate, wave_metrics, Trajectory, WaveMetrics};
pub use model::{contact_modifier, force_of_infection, influence_flux, rhs, rhs_behavior_free, ModelError};
pub use params::{LockdownSchedule, ModelParams, ThetaSegment};
pub use state::{Compartment, InitialConditions, SystemState};
