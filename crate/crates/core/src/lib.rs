//! Simulation of the SECIR-type integro-differential epidemic model with a
//! positivity-preserving nonstandard discretization, together with the
//! reference ODE model, data-driven initialization and numerical experiments.

pub mod config;
pub mod data;
pub mod distributions;
pub mod error;
pub mod experiments;
pub mod ide;
pub mod ode;
pub mod types;

pub use distributions::{DiscreteKernel, DistributionSet, Family, TransitionDistribution};
pub use error::{Error, Result};
pub use ide::{CompartmentMode, DiscreteModel, IdeSolver};
pub use types::{
    AgeDependentFactor, CompartmentState, ContactSchedule, ContactSegment, FlowHistory,
    InfectionState, Infectiousness, ParameterSet, SimulationResult, TimeGrid, TransitionId,
    TransitionProbabilities,
};
