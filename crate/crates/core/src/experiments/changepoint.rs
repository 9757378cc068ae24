use crate::error::{Error, Result};
use crate::ide::{CompartmentMode, DiscreteModel, IdeSolver};
use crate::ode::{rk_integrate, OdeParameterSet, OdeSolution};
use crate::types::{
    grid_steps, CompartmentState, FlowHistory, ParameterSet, SimulationResult, TransitionId,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChangeDirection {
    Halve,
    Double,
    /// Keeps the contact rate; useful as an equilibrium check.
    Keep,
}

impl ChangeDirection {
    pub fn factor(self) -> f64 {
        match self {
            ChangeDirection::Halve => 0.5,
            ChangeDirection::Double => 2.0,
            ChangeDirection::Keep => 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ChangepointSetup {
    /// IDE parameters with the contact rate before the change.
    pub params: ParameterSet,
    /// ODE parameters with the same contact rate before the change.
    pub ode: OdeParameterSet,
    pub dt: f64,
    pub t_end: f64,
    pub change_time: f64,
    /// New transmissions per day before the change.
    pub new_transmissions: f64,
    /// Dead at `t_0`.
    pub deaths: f64,
}

#[derive(Debug, Clone)]
pub struct ChangepointResult {
    pub ide: SimulationResult,
    pub ode: OdeSolution,
    /// ODE parameters including the change.
    pub ode_params: OdeParameterSet,
    /// `sigma_SE` at every grid point `t_0 ..= t_end`.
    pub ide_new_transmissions: Vec<f64>,
    pub ode_new_transmissions: Vec<f64>,
    pub ide_daily: Vec<f64>,
    pub ode_daily: Vec<f64>,
    /// Ratio across the step with the largest relative change.
    pub ide_jump: f64,
    pub ode_jump: f64,
    /// Largest relative deviation from the post-jump value during the half
    /// day after the jump.
    pub ide_drift: f64,
    pub ode_drift: f64,
}

/// Pre-history with constant new transmissions `c` per day and the
/// compartments consistent with it, such that `sigma_SE(t_1) = c`.
///
/// Each flow column holds its steady-state value over a window longer than
/// every kernel support, so the flow recursion reproduces the same constants.
pub fn equilibrium_initialization(
    params: &ParameterSet,
    dt: f64,
    new_transmissions: f64,
    deaths: f64,
) -> Result<(FlowHistory, CompartmentState)> {
    if !(new_transmissions.is_finite() && new_transmissions > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "new transmissions must be positive, got {new_transmissions}"
        )));
    }
    let model = DiscreteModel::new(params, dt)?;
    let len = model.max_support_steps() + 1;
    let mut level = [0.0; 10];
    level[0] = new_transmissions;
    for t in TransitionId::DISTRIBUTED {
        let inflow = t.inflow().expect("distributed transitions have an inflow");
        let mass = model.kernel(t).map_or(0.0, |k| k.telescoped_mass());
        level[t.index()] = params.probabilities().branch(t) * mass * level[inflow.index()];
    }
    let columns = std::array::from_fn(|i| vec![level[i]; len]);
    let history = FlowHistory::from_columns(dt, 1 - len as i64, columns)?;

    let n = params.population();
    let transient = model.transient_compartments(&history, 0);
    let lambda0 = model.force_of_infection(&history, 0, deaths)?;
    if !(lambda0 > 0.0) {
        return Err(Error::InvalidParameter(
            "no infectious pressure, constant transmissions impossible".into(),
        ));
    }
    let s = new_transmissions * (1.0 + dt * lambda0) / lambda0;
    let recovered = n - s - transient.iter().sum::<f64>() - deaths;
    if recovered < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "constant transmissions of {new_transmissions}/day need more than {n} persons"
        )));
    }
    let mut values = [0.0; 8];
    values[0] = s;
    values[1..6].copy_from_slice(&transient);
    values[6] = recovered;
    values[7] = deaths;
    Ok((history, CompartmentState::new(values)?))
}

/// ODE state with constant new transmissions `c` per day at the contact rate
/// in effect at `t = 0`.
pub fn ode_equilibrium(
    p: &OdeParameterSet,
    new_transmissions: f64,
    deaths: f64,
) -> Result<CompartmentState> {
    let t = &p.stay_times;
    let mu = &p.probabilities;
    let c = new_transmissions;
    let e = c * t.exposed;
    let carrier = c * t.carrier;
    let infected = mu.carrier_to_infected * c * t.infected;
    let h = mu.carrier_to_infected * mu.infected_to_hospitalized * c * t.hospitalized;
    let u =
        mu.carrier_to_infected * mu.infected_to_hospitalized * mu.hospitalized_to_icu * c * t.icu;
    let pressure =
        p.contact.rate_at(0.0) * p.rho * (p.xi_carrier * carrier + p.xi_infected * infected);
    if !(pressure > 0.0) {
        return Err(Error::InvalidParameter(
            "no infectious pressure, constant transmissions impossible".into(),
        ));
    }
    let s = c * (p.population - deaths) / pressure;
    let recovered = p.population - s - e - carrier - infected - h - u - deaths;
    if recovered < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "constant transmissions of {c}/day need more than {} persons",
            p.population
        )));
    }
    CompartmentState::new([s, e, carrier, infected, h, u, recovered, deaths])
}

/// Both models start with constant new transmissions; the contact rate is
/// multiplied by the direction's factor at `change_time`.
pub fn changepoint_experiment(
    direction: ChangeDirection,
    setup: &ChangepointSetup,
) -> Result<ChangepointResult> {
    let dt = setup.dt;
    let change_steps = grid_steps(setup.change_time, dt).ok_or_else(|| {
        Error::InvalidGrid(format!(
            "change time {} is not a multiple of dt = {dt}",
            setup.change_time
        ))
    })?;
    let phi0 = setup.params.contact().rate_at(0.0);
    let new_rate = phi0 * direction.factor();
    let ide_contact = setup
        .params
        .contact()
        .with_change(setup.change_time, new_rate)?;
    let ode_contact = setup.ode.contact.with_change(setup.change_time, new_rate)?;

    let (history, initial) =
        equilibrium_initialization(&setup.params, dt, setup.new_transmissions, setup.deaths)?;
    let params = setup.params.with_contact(ide_contact);
    let ide = IdeSolver::new(&params, history, initial, CompartmentMode::Update)?
        .simulate(setup.t_end)?;
    let ide_series: Vec<f64> = (0..ide.compartments.len())
        .map(|k| ide.flows.get(TransitionId::SusceptibleToExposed, k as i64))
        .collect();

    let ode_params = setup.ode.with_contact(ode_contact);
    let y0 = ode_equilibrium(&setup.ode, setup.new_transmissions, setup.deaths)?;
    let ode = rk_integrate(&ode_params, y0, 0.0, setup.t_end, dt)?;
    let ode_series: Vec<f64> = ode
        .states
        .iter()
        .enumerate()
        .map(|(i, y)| ode_params.flows(y, ode_params.contact.rate_at_step(i as i64, dt))[0])
        .collect();

    let window = grid_steps(0.5, dt).unwrap_or(0).max(1) as usize;
    let (ide_jump, ide_after) = largest_jump(&ide_series);
    let (ode_jump, ode_after) = largest_jump(&ode_series);
    debug_assert!(ide_after as i64 >= change_steps);
    Ok(ChangepointResult {
        ide_daily: ide.daily_new_transmissions.clone(),
        ode_daily: daily_sums(&ode_series, dt),
        ide_drift: drift(&ide_series, ide_after, window),
        ode_drift: drift(&ode_series, ode_after, window),
        ide,
        ode,
        ode_params,
        ide_new_transmissions: ide_series,
        ode_new_transmissions: ode_series,
        ide_jump,
        ode_jump,
    })
}

/// Ratio `x[i] / x[i-1]` farthest from 1 on the log scale and the index `i`.
fn largest_jump(series: &[f64]) -> (f64, usize) {
    let mut best = (1.0f64, 1);
    for i in 1..series.len() {
        let ratio = series[i] / series[i - 1];
        if ratio.ln().abs() > best.0.ln().abs() {
            best = (ratio, i);
        }
    }
    best
}

fn drift(series: &[f64], after: usize, window: usize) -> f64 {
    let base = series[after];
    series[after + 1..series.len().min(after + window + 1)]
        .iter()
        .map(|v| (v / base - 1.0).abs())
        .fold(0.0, f64::max)
}

/// `dt * series` summed over each full day `(d-1, d]`, skipping index 0.
fn daily_sums(series: &[f64], dt: f64) -> Vec<f64> {
    let n = series.len() - 1;
    let days = (n as f64 * dt + 1e-9).floor() as usize;
    let mut out = vec![0.0; days];
    for (k, v) in series.iter().enumerate().skip(1) {
        let day = (k as f64 * dt - 1e-9).ceil() as usize;
        if day >= 1 && day <= days {
            out[day - 1] += dt * v;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jump_detection() {
        let s = [1.0, 1.0, 1.0, 2.0, 2.0, 2.1];
        assert_eq!(largest_jump(&s), (2.0, 3));
        assert!((drift(&s, 3, 2) - 0.05).abs() < 1e-12);
        let h = [4.0, 4.0, 2.0, 2.0];
        assert_eq!(largest_jump(&h), (0.5, 2));
    }

    #[test]
    fn daily_sum_of_constant_series() {
        let s = vec![3.0; 41];
        let d = daily_sums(&s, 0.1);
        assert_eq!(d.len(), 4);
        for v in d {
            assert!((v - 3.0).abs() < 1e-12);
        }
    }
}
