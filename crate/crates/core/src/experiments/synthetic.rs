use chrono::{Days, NaiveDate};

use crate::data::{build_initial_history, synthesize_reported_data, ReportedData};
use crate::error::{Error, Result};
use crate::ide::{CompartmentMode, DiscreteModel, IdeSolver};
use crate::types::{
    grid_steps, CompartmentState, ContactSchedule, ContactSegment, FlowHistory, InfectionState,
    ParameterSet, SimulationResult, TransitionId,
};

/// Synthetic reported data from a seeded forward run.
#[derive(Debug, Clone)]
pub struct SyntheticSetup {
    /// Parameters of the target scenario; contact change points are in days
    /// after `start_date`.
    pub params: ParameterSet,
    pub dt: f64,
    /// Date of the scenario start `t0`.
    pub start_date: NaiveDate,
    /// Whole days the generator runs before `t0`, at the contact rate in
    /// effect at `t0`.
    pub lead_days: u32,
    /// Days simulated after `t0`.
    pub t_end: f64,
    /// New transmissions per day during the seed.
    pub seed_new_transmissions: f64,
    /// The seed covers the last `seed_days` of the pre-history; earlier
    /// flows are zero.
    pub seed_days: f64,
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    /// Generator run; its `t = 0` lies `lead_days` before `t0`.
    pub generator: SimulationResult,
    pub data: ReportedData,
}

#[derive(Debug, Clone)]
pub struct RoundTrip {
    pub synthetic: SyntheticData,
    /// Run initialized from the synthetic data at `t0`.
    pub reconstructed: SimulationResult,
    /// Daily new transmissions of both runs for the days after `t0`.
    pub generator_daily: Vec<f64>,
    pub reconstructed_daily: Vec<f64>,
    pub generator_dead: f64,
    pub reconstructed_dead: f64,
}

impl RoundTrip {
    /// Largest relative deviation of the daily new transmissions, skipping
    /// the first `skip` days.
    pub fn max_relative_deviation(&self, skip: usize) -> f64 {
        self.reconstructed_daily
            .iter()
            .zip(&self.generator_daily)
            .skip(skip)
            .map(|(r, g)| (r / g - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Pre-history with `new_transmissions` per day over the last `seed_days`
/// and no flows before.
pub fn seeded_initialization(
    params: &ParameterSet,
    dt: f64,
    new_transmissions: f64,
    seed_days: f64,
) -> Result<(FlowHistory, CompartmentState)> {
    let seed = grid_steps(seed_days, dt)
        .filter(|&s| s >= 0)
        .ok_or_else(|| {
            Error::InvalidGrid(format!("seed of {seed_days} days is not a multiple of dt"))
        })? as usize;
    history_from_transmissions(params, dt, &vec![new_transmissions; seed])
}

/// Pre-history ending at index 0 whose last `sigma_SE` values are
/// `new_transmissions`, padded with zeros to cover every kernel support.
/// Downstream flows follow by the flow recursion, the compartments by the
/// sum discretization, and `S` makes up the rest of the population.
pub fn history_from_transmissions(
    params: &ParameterSet,
    dt: f64,
    new_transmissions: &[f64],
) -> Result<(FlowHistory, CompartmentState)> {
    let model = DiscreteModel::new(params, dt)?;
    let len = (model.max_support_steps() + 1).max(new_transmissions.len());
    let mut columns: [Vec<f64>; 10] = std::array::from_fn(|_| vec![0.0; len]);
    columns[TransitionId::SusceptibleToExposed.index()][len - new_transmissions.len()..]
        .copy_from_slice(new_transmissions);
    let mut history = FlowHistory::from_columns(dt, 1 - len as i64, columns)?;
    model.fill_flows(&mut history, &TransitionId::DISTRIBUTED);

    let transient = model.transient_compartments(&history, 0);
    let (recovered, dead) = model.accumulated_removed(&history, history.first_index(), 0);
    let n = params.population();
    let s = n - transient.iter().sum::<f64>() - recovered - dead;
    if s < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "{} transmissions in the pre-history exceed the population",
            dt * new_transmissions.iter().sum::<f64>()
        )));
    }
    let mut values = [0.0; 8];
    values[0] = s;
    values[1..6].copy_from_slice(&transient);
    values[6] = recovered;
    values[7] = dead;
    Ok((history, CompartmentState::new(values)?))
}

/// Runs the seeded generator through the lead phase and the scenario and
/// converts it to reported data.
pub fn generate_synthetic_data(setup: &SyntheticSetup) -> Result<SyntheticData> {
    let lead = f64::from(setup.lead_days);
    let scenario = setup.params.contact();
    let mut segments = vec![ContactSegment {
        start: 0.0,
        rate: scenario.rate_at(0.0),
    }];
    segments.extend(
        scenario
            .segments()
            .iter()
            .filter(|s| s.start > 0.0)
            .map(|s| ContactSegment {
                start: s.start + lead,
                rate: s.rate,
            }),
    );
    let params = setup.params.with_contact(ContactSchedule::new(segments)?);
    let (history, initial) = seeded_initialization(
        &params,
        setup.dt,
        setup.seed_new_transmissions,
        setup.seed_days,
    )?;
    let generator = IdeSolver::new(&params, history, initial, CompartmentMode::Update)?
        .simulate(lead + setup.t_end)?;
    let day_zero = setup
        .start_date
        .checked_sub_days(Days::new(u64::from(setup.lead_days)))
        .ok_or_else(|| Error::InvalidParameter("start date out of range".into()))?;
    let data = synthesize_reported_data(&generator, &params, day_zero, lead)?;
    Ok(SyntheticData { generator, data })
}

/// Generates synthetic data, initializes a run from it at `t0` and compares
/// both runs.
pub fn round_trip(setup: &SyntheticSetup) -> Result<RoundTrip> {
    let synthetic = generate_synthetic_data(setup)?;
    let (history, initial) = build_initial_history(
        &synthetic.data,
        &setup.params,
        setup.dt,
        setup.start_date,
        1.0,
    )?;
    let reconstructed = IdeSolver::new(&setup.params, history, initial, CompartmentMode::Update)?
        .simulate(setup.t_end)?;
    let lead = setup.lead_days as usize;
    let generator_daily: Vec<f64> = synthetic
        .generator
        .daily_new_transmissions
        .iter()
        .skip(lead)
        .take(reconstructed.daily_new_transmissions.len())
        .copied()
        .collect();
    let k0 = grid_steps(f64::from(setup.lead_days), setup.dt).unwrap_or(0) as usize;
    Ok(RoundTrip {
        generator_dead: synthetic.generator.compartments[k0][InfectionState::Dead],
        reconstructed_dead: initial[InfectionState::Dead],
        reconstructed_daily: reconstructed.daily_new_transmissions.clone(),
        generator_daily,
        synthetic,
        reconstructed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{DistributionSet, TransitionDistribution};
    use crate::types::{AgeDependentFactor, Infectiousness, TransitionProbabilities};

    fn params() -> ParameterSet {
        let one = AgeDependentFactor::constant(1.0).unwrap();
        ParameterSet::new(
            1e6,
            TransitionProbabilities {
                carrier_to_infected: 0.5,
                infected_to_hospitalized: 0.5,
                hospitalized_to_icu: 0.5,
                icu_to_dead: 0.5,
            },
            ContactSchedule::constant(0.5).unwrap(),
            Infectiousness {
                rho_carrier: one.clone(),
                rho_infected: one.clone(),
                xi_carrier: one.clone(),
                xi_infected: one,
            },
            DistributionSet::uniform(TransitionDistribution::smoother_cosine(2.0).unwrap()),
        )
        .unwrap()
    }

    #[test]
    fn seed_conserves_mass() {
        let p = params();
        let (h, s) = seeded_initialization(&p, 0.1, 100.0, 1.0).unwrap();
        assert!((s.total() - 1e6).abs() < 1e-6);
        assert_eq!(h.last_index(), 0);
        assert_eq!(
            h.get(TransitionId::SusceptibleToExposed, h.first_index()),
            0.0
        );
        assert_eq!(h.get(TransitionId::SusceptibleToExposed, 0), 100.0);
        assert!(s[InfectionState::Exposed] > 0.0);
        assert!(seeded_initialization(&p, 0.1, 100.0, 0.05).is_err());
        assert!(seeded_initialization(&p, 0.1, 1e6, 30.0).is_err());
        assert!(seeded_initialization(&p, 0.1, -1.0, 3.0).is_err());
    }

    #[test]
    fn deaths_reproduced_exactly() {
        let setup = SyntheticSetup {
            params: p_with_change(),
            dt: 0.1,
            start_date: "2021-03-01".parse().unwrap(),
            lead_days: 10,
            t_end: 15.0,
            seed_new_transmissions: 50.0,
            seed_days: 5.0,
        };
        let rt = round_trip(&setup).unwrap();
        assert!(
            (rt.generator_dead - rt.reconstructed_dead).abs() <= 1e-9 * rt.generator_dead.max(1.0)
        );
        assert_eq!(rt.generator_daily.len(), rt.reconstructed_daily.len());
        assert_eq!(
            rt.synthetic.data.day_of(setup.start_date),
            rt.synthetic.data.day_of(setup.start_date - Days::new(10)) + 10
        );
    }

    fn p_with_change() -> ParameterSet {
        let p = params();
        p.with_contact(p.contact().with_change(5.0, 0.3).unwrap())
    }
}
