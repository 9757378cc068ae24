use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{discrete_l2_error, log_log_slope};
use crate::error::{Error, Result};
use crate::ide::{CompartmentMode, IdeSolver};
use crate::ode::{
    extract_ide_flows_from_ode, reduce_ide_to_ode, rk_integrate, rk_integrate_sampled,
    OdeParameterSet, OdeSolution,
};
use crate::types::{
    grid_steps, CompartmentState, FlowHistory, InfectionState, ParameterSet, TransitionId,
};

/// Exponential IDE setup compared against its ODE reduction.
#[derive(Debug, Clone)]
pub struct ConvergenceSetup {
    pub params: ParameterSet,
    /// ODE state at `t = 0`.
    pub initial: CompartmentState,
    /// Step of the ODE ground truth.
    pub reference_dt: f64,
    /// Length of the ODE run that provides the IDE pre-history.
    pub t_history: f64,
    /// End of the comparison window.
    pub t_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantityErrors {
    pub name: String,
    pub errors: Vec<f64>,
    pub slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub dts: Vec<f64>,
    pub reference_dt: f64,
    pub window: [f64; 2],
    pub quantities: Vec<QuantityErrors>,
}

impl ErrorReport {
    pub fn quantity(&self, name: &str) -> Option<&QuantityErrors> {
        self.quantities.iter().find(|q| q.name == name)
    }

    pub fn slopes(&self) -> impl Iterator<Item = (&str, f64)> {
        self.quantities.iter().map(|q| (q.name.as_str(), q.slope))
    }
}

/// Relative errors of the 8 compartments and 10 flows for each step size,
/// with the fitted convergence order.
pub fn convergence_study(dts: &[f64], setup: &ConvergenceSetup) -> Result<ErrorReport> {
    if dts.is_empty() {
        return Err(Error::InvalidParameter("no step sizes given".into()));
    }
    let ode = reduce_ide_to_ode(&setup.params)?;
    let finest = dts.iter().copied().fold(f64::INFINITY, f64::min);
    let stride = grid_steps(finest, setup.reference_dt)
        .filter(|&s| s > 0)
        .ok_or_else(|| {
            Error::InvalidGrid(format!(
                "reference step {} does not divide {finest}",
                setup.reference_dt
            ))
        })? as usize;
    let truth = rk_integrate_sampled(
        &ode,
        setup.initial,
        0.0,
        setup.t_max,
        setup.reference_dt,
        stride,
    )?;

    let per_dt: Vec<[f64; 18]> = dts
        .par_iter()
        .map(|&dt| errors_for_step(dt, setup, &ode, &truth))
        .collect::<Result<_>>()?;

    let names = InfectionState::ALL
        .iter()
        .map(|s| s.label().to_string())
        .chain(TransitionId::ALL.iter().map(|t| t.label().to_string()));
    let quantities = names
        .enumerate()
        .map(|(q, name)| {
            let errors: Vec<f64> = per_dt.iter().map(|e| e[q]).collect();
            let slope = log_log_slope(dts, &errors);
            QuantityErrors {
                name,
                errors,
                slope,
            }
        })
        .collect();
    Ok(ErrorReport {
        dts: dts.to_vec(),
        reference_dt: setup.reference_dt,
        window: [setup.t_history, setup.t_max],
        quantities,
    })
}

/// Pre-history from an ODE run of the reduced model over `[0, t_history]`
/// started at `initial`. The returned parameters carry the contact schedule
/// shifted to the IDE clock, which starts at `t_history`.
pub fn ode_history_initialization(
    params: &ParameterSet,
    initial: CompartmentState,
    t_history: f64,
    dt: f64,
) -> Result<(ParameterSet, FlowHistory, CompartmentState)> {
    let steps = grid_steps(t_history, dt)
        .filter(|&s| s > 0)
        .ok_or_else(|| Error::InvalidGrid(format!("dt = {dt} does not divide t_history")))?;
    let ode = reduce_ide_to_ode(params)?;
    let solution = rk_integrate(&ode, initial, 0.0, t_history, dt)?;
    let history = extract_ide_flows_from_ode(&solution, &ode, -steps)?;
    let state = *solution.states.last().expect("nonempty solution");
    let params = params.with_contact(params.contact().shifted(-t_history)?);
    Ok((params, history, state))
}

fn errors_for_step(
    dt: f64,
    setup: &ConvergenceSetup,
    ode: &OdeParameterSet,
    truth: &OdeSolution,
) -> Result<[f64; 18]> {
    let steps_history = grid_steps(setup.t_history, dt)
        .ok_or_else(|| Error::InvalidGrid(format!("dt = {dt} does not divide t_history")))?;
    let history_samples = truth.resample(dt, 0.0, setup.t_history)?;
    let history = extract_ide_flows_from_ode(&history_samples, ode, -steps_history)?;
    let initial = *history_samples.states.last().expect("nonempty history");

    // The IDE clock starts at t_history; shift the contact schedule with it.
    let params = setup
        .params
        .with_contact(setup.params.contact().shifted(-setup.t_history)?);
    let solver = IdeSolver::new(&params, history, initial, CompartmentMode::Update)?;
    let result = solver.simulate(setup.t_max - setup.t_history)?;
    let reference = truth.resample(dt, setup.t_history, setup.t_max)?;
    if reference.len() != result.compartments.len() {
        return Err(Error::InvalidGrid(format!(
            "reference has {} samples, IDE run {}",
            reference.len(),
            result.compartments.len()
        )));
    }

    let mut errors = [0.0; 18];
    for s in InfectionState::ALL {
        let u: Vec<f64> = result.compartments.iter().map(|c| c[s]).collect();
        let r: Vec<f64> = reference.states.iter().map(|c| c[s]).collect();
        errors[s.index()] = discrete_l2_error(&u, &r, dt)?;
    }
    let ref_flows: Vec<[f64; 10]> = reference
        .states
        .iter()
        .enumerate()
        .map(|(i, y)| ode.flows(y, ode.contact.rate_at(reference.time(i))))
        .collect();
    for t in TransitionId::ALL {
        let u: Vec<f64> = (0..result.compartments.len())
            .map(|k| result.flows.get(t, k as i64))
            .collect();
        let r: Vec<f64> = ref_flows.iter().map(|f| f[t.index()]).collect();
        errors[8 + t.index()] = discrete_l2_error(&u, &r, dt)?;
    }
    Ok(errors)
}
