use chrono::NaiveDate;

use crate::data::{
    build_initial_history, extrapolate_comparison_series, ComparisonSeries, ReportedData,
};
use crate::error::Result;
use crate::ide::{CompartmentMode, IdeSolver};
use crate::ode::{rk_integrate, OdeParameterSet, OdeSolution};
use crate::types::{ParameterSet, SimulationResult};

/// A data-initialized run; contact change points are given in days after
/// `start_date`.
#[derive(Debug, Clone)]
pub struct ScenarioSetup {
    pub params: ParameterSet,
    pub data: ReportedData,
    pub start_date: NaiveDate,
    pub dt: f64,
    pub t_end: f64,
    pub detection_ratio: f64,
}

#[derive(Debug, Clone)]
pub struct ScenarioResult {
    pub ide: SimulationResult,
    pub ode: OdeSolution,
    pub ode_params: OdeParameterSet,
    /// Reported-data estimates, when the data cover the required shifts.
    pub comparison: Option<ComparisonSeries>,
}

/// Runs the IDE model initialized from reported data and the ODE model
/// started from the same compartments.
pub fn scenario_run(setup: &ScenarioSetup) -> Result<ScenarioResult> {
    let (history, initial) = build_initial_history(
        &setup.data,
        &setup.params,
        setup.dt,
        setup.start_date,
        setup.detection_ratio,
    )?;
    let ide = IdeSolver::new(&setup.params, history, initial, CompartmentMode::Update)?
        .simulate(setup.t_end)?;
    let ode_params = OdeParameterSet::weighted_from_ide(&setup.params)?;
    let ode = rk_integrate(&ode_params, initial, 0.0, setup.t_end, setup.dt)?;
    let comparison =
        extrapolate_comparison_series(&setup.data, &setup.params, setup.start_date).ok();
    Ok(ScenarioResult {
        ide,
        ode,
        ode_params,
        comparison,
    })
}
