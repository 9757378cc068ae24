//! The ODE-SECIR model as the exponential special case of the IDE model,
//! with a fixed-step fifth-order Runge-Kutta integrator.

use crate::distributions::{DistributionSet, Family};
use crate::error::{Error, Result};
use crate::types::{
    grid_steps, CompartmentState, ContactSchedule, FlowHistory, InfectionState, ParameterSet,
    TransitionId, TransitionProbabilities,
};

/// Mean stay times `T_E, T_C, T_I, T_H, T_U` of the ODE model in days.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StayTimes {
    pub exposed: f64,
    pub carrier: f64,
    pub infected: f64,
    pub hospitalized: f64,
    pub icu: f64,
}

impl StayTimes {
    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("T_E", self.exposed),
            ("T_C", self.carrier),
            ("T_I", self.infected),
            ("T_H", self.hospitalized),
            ("T_U", self.icu),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct OdeParameterSet {
    pub population: f64,
    pub stay_times: StayTimes,
    pub probabilities: TransitionProbabilities,
    pub contact: ContactSchedule,
    pub rho: f64,
    pub xi_carrier: f64,
    pub xi_infected: f64,
}

impl OdeParameterSet {
    pub fn validate(&self) -> Result<()> {
        if !(self.population.is_finite() && self.population > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "population must be positive, got {}",
                self.population
            )));
        }
        self.stay_times.validate()?;
        self.probabilities.validate()?;
        for (name, v) in [
            ("rho", self.rho),
            ("xi_C", self.xi_carrier),
            ("xi_I", self.xi_infected),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must lie in [0, 1], got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn with_contact(&self, contact: ContactSchedule) -> Self {
        OdeParameterSet {
            contact,
            ..self.clone()
        }
    }

    /// ODE parameters sharing population, probabilities, contacts and
    /// constant transmission factors with `ide`, with the stay times set to
    /// the probability-weighted means of its distributions.
    pub fn weighted_from_ide(ide: &ParameterSet) -> Result<Self> {
        let (rho, xi_c, xi_i) = constant_transmission(ide)?;
        let p = OdeParameterSet {
            population: ide.population(),
            stay_times: weighted_ode_mean_stay_times(ide.distributions(), ide.probabilities()),
            probabilities: *ide.probabilities(),
            contact: ide.contact().clone(),
            rho,
            xi_carrier: xi_c,
            xi_infected: xi_i,
        };
        p.validate()?;
        Ok(p)
    }

    /// `sigma_SE` and the nine distributed flows at state `y` for contact
    /// rate `phi`, in [`TransitionId::ALL`] order.
    pub fn flows(&self, y: &CompartmentState, phi: f64) -> [f64; 10] {
        use InfectionState::*;
        let t = &self.stay_times;
        let mu = &self.probabilities;
        let living = self.population - y[Dead];
        let se = y[Susceptible] / living
            * phi
            * self.rho
            * (self.xi_carrier * y[Carrier] + self.xi_infected * y[Infected]);
        let c = y[Carrier] / t.carrier;
        let i = y[Infected] / t.infected;
        let h = y[Hospitalized] / t.hospitalized;
        let u = y[IntensiveCare] / t.icu;
        [
            se,
            y[Exposed] / t.exposed,
            mu.carrier_to_infected * c,
            (1.0 - mu.carrier_to_infected) * c,
            mu.infected_to_hospitalized * i,
            (1.0 - mu.infected_to_hospitalized) * i,
            mu.hospitalized_to_icu * h,
            (1.0 - mu.hospitalized_to_icu) * h,
            mu.icu_to_dead * u,
            (1.0 - mu.icu_to_dead) * u,
        ]
    }
}

fn constant_transmission(ide: &ParameterSet) -> Result<(f64, f64, f64)> {
    let inf = ide.infectiousness();
    let constant = |f: &crate::types::AgeDependentFactor, name: &str| {
        f.as_constant().ok_or_else(|| {
            Error::NotReducible(format!("{name} must be constant in the infection age"))
        })
    };
    let rho_c = constant(&inf.rho_carrier, "rho_C")?;
    let rho_i = constant(&inf.rho_infected, "rho_I")?;
    if rho_c != rho_i {
        return Err(Error::NotReducible(format!(
            "rho_C = {rho_c} and rho_I = {rho_i} must coincide"
        )));
    }
    Ok((
        rho_c,
        constant(&inf.xi_carrier, "xi_C")?,
        constant(&inf.xi_infected, "xi_I")?,
    ))
}

/// Right-hand side with a given contact rate.
pub fn rhs_with_contact(
    y: &CompartmentState,
    phi: f64,
    p: &OdeParameterSet,
) -> Result<CompartmentState> {
    if y[InfectionState::Dead] >= p.population {
        return Err(Error::CorruptedState(format!(
            "D = {} reached the population {}",
            y[InfectionState::Dead],
            p.population
        )));
    }
    Ok(derivative(&p.flows(y, phi)))
}

fn derivative(flows: &[f64; 10]) -> CompartmentState {
    let mut d = CompartmentState::default();
    for t in TransitionId::ALL {
        let v = flows[t.index()];
        d[t.source()] -= v;
        d[t.target()] += v;
    }
    d
}

/// `dy/dt` of the ODE-SECIR system at time `t`.
pub fn ode_rhs(y: &CompartmentState, t: f64, p: &OdeParameterSet) -> Result<CompartmentState> {
    rhs_with_contact(y, p.contact.rate_at(t), p)
}

/// States of an ODE run at the equidistant times `t0 + i * dt`.
#[derive(Debug, Clone)]
pub struct OdeSolution {
    pub t0: f64,
    pub dt: f64,
    pub states: Vec<CompartmentState>,
}

impl OdeSolution {
    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// State at a sample time `t`.
    pub fn at(&self, t: f64) -> Option<&CompartmentState> {
        let i = grid_steps(t - self.t0, self.dt)?;
        usize::try_from(i).ok().and_then(|i| self.states.get(i))
    }

    /// Every `stride`-th sample, starting with the first.
    pub fn subsample(&self, stride: usize) -> OdeSolution {
        OdeSolution {
            t0: self.t0,
            dt: self.dt * stride as f64,
            states: self.states.iter().step_by(stride).copied().collect(),
        }
    }

    /// Samples on the coarser spacing `dt` over `[t_start, t_end]`.
    pub fn resample(&self, dt: f64, t_start: f64, t_end: f64) -> Result<OdeSolution> {
        let stride = grid_steps(dt, self.dt).filter(|&s| s > 0).ok_or_else(|| {
            Error::InvalidGrid(format!(
                "{dt} is not a multiple of the sample step {}",
                self.dt
            ))
        })? as usize;
        let start = grid_steps(t_start - self.t0, self.dt)
            .filter(|&s| s >= 0)
            .ok_or_else(|| Error::InvalidGrid(format!("{t_start} is not a sample time")))?
            as usize;
        let end = grid_steps(t_end - self.t0, self.dt)
            .filter(|&e| e >= 0 && (e as usize) < self.states.len())
            .ok_or_else(|| Error::InvalidGrid(format!("{t_end} is not a sample time")))?
            as usize;
        Ok(OdeSolution {
            t0: t_start,
            dt,
            states: self.states[start..=end]
                .iter()
                .step_by(stride)
                .copied()
                .collect(),
        })
    }
}

// Dormand-Prince coefficients; the fifth-order weights are used as a
// fixed-step method.
const A: [[f64; 5]; 6] = [
    [0.0; 5],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
    ],
];
const B: [f64; 6] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
];

fn rk_step(
    y: &CompartmentState,
    phi: f64,
    dt: f64,
    p: &OdeParameterSet,
) -> Result<CompartmentState> {
    let mut k = [[0.0f64; 8]; 6];
    for stage in 0..6 {
        let mut ys = *y.values();
        for (j, a) in A[stage].iter().enumerate().take(stage) {
            for (v, kj) in ys.iter_mut().zip(&k[j]) {
                *v += dt * a * kj;
            }
        }
        k[stage] = *rhs_with_contact(&CompartmentState::from_raw(ys), phi, p)?.values();
    }
    let mut next = *y.values();
    for (b, ks) in B.iter().zip(&k) {
        for (v, kv) in next.iter_mut().zip(ks) {
            *v += dt * b * kv;
        }
    }
    Ok(CompartmentState::from_raw(next))
}

/// Fixed-step integration over `[t0, t1]`, keeping every step.
pub fn rk_integrate(
    p: &OdeParameterSet,
    y0: CompartmentState,
    t0: f64,
    t1: f64,
    dt: f64,
) -> Result<OdeSolution> {
    rk_integrate_sampled(p, y0, t0, t1, dt, 1)
}

/// Fixed-step integration over `[t0, t1]`, keeping every `stride`-th step.
///
/// The contact rate is evaluated at the midpoint of each step, which is exact
/// for change points on the step grid.
pub fn rk_integrate_sampled(
    p: &OdeParameterSet,
    y0: CompartmentState,
    t0: f64,
    t1: f64,
    dt: f64,
    stride: usize,
) -> Result<OdeSolution> {
    p.validate()?;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidGrid(format!("dt must be positive, got {dt}")));
    }
    let steps = grid_steps(t1 - t0, dt)
        .filter(|&s| s >= 0)
        .ok_or_else(|| Error::InvalidGrid(format!("dt = {dt} does not divide [{t0}, {t1}]")))?
        as usize;
    let stride = stride.max(1);
    if !steps.is_multiple_of(stride) {
        return Err(Error::InvalidGrid(format!(
            "sampling stride {stride} does not divide {steps} steps"
        )));
    }
    let mut states = Vec::with_capacity(steps / stride + 1);
    states.push(y0);
    let mut y = y0;
    for n in 0..steps {
        let t = t0 + n as f64 * dt;
        let phi = p.contact.rate_at(t + 0.5 * dt);
        y = rk_step(&y, phi, dt, p)?;
        if (n + 1) % stride == 0 {
            states.push(y);
        }
    }
    Ok(OdeSolution {
        t0,
        dt: dt * stride as f64,
        states,
    })
}

/// ODE parameters of an IDE parameter set built from exponential
/// distributions with one shared mean per compartment.
pub fn reduce_ide_to_ode(ide: &ParameterSet) -> Result<OdeParameterSet> {
    let d = ide.distributions();
    let mean = |dist: &crate::distributions::TransitionDistribution| match dist.family() {
        Family::Exponential { mean } => Ok(mean),
        other => Err(Error::NotReducible(format!(
            "non-exponential distribution {other:?}"
        ))),
    };
    let pair = |a, b, name: &str| -> Result<f64> {
        let (ma, mb) = (mean(a)?, mean(b)?);
        if ma != mb {
            return Err(Error::NotReducible(format!(
                "pair mismatch in {name}: means {ma} and {mb}"
            )));
        }
        Ok(ma)
    };
    let stay_times = StayTimes {
        exposed: mean(&d.exposed_to_carrier)?,
        carrier: pair(&d.carrier_to_infected, &d.carrier_to_recovered, "C")?,
        infected: pair(&d.infected_to_hospitalized, &d.infected_to_recovered, "I")?,
        hospitalized: pair(&d.hospitalized_to_icu, &d.hospitalized_to_recovered, "H")?,
        icu: pair(&d.icu_to_dead, &d.icu_to_recovered, "U")?,
    };
    let (rho, xi_carrier, xi_infected) = constant_transmission(ide)?;
    let p = OdeParameterSet {
        population: ide.population(),
        stay_times,
        probabilities: *ide.probabilities(),
        contact: ide.contact().clone(),
        rho,
        xi_carrier,
        xi_infected,
    };
    p.validate()?;
    Ok(p)
}

/// Probability-weighted mean stay times per compartment.
pub fn weighted_ode_mean_stay_times(
    distributions: &DistributionSet,
    mu: &TransitionProbabilities,
) -> StayTimes {
    let d = distributions;
    let mix = |m: f64,
               a: &crate::distributions::TransitionDistribution,
               b: &crate::distributions::TransitionDistribution| {
        m * a.mean_stay_time() + (1.0 - m) * b.mean_stay_time()
    };
    StayTimes {
        exposed: d.exposed_to_carrier.mean_stay_time(),
        carrier: mix(
            mu.carrier_to_infected,
            &d.carrier_to_infected,
            &d.carrier_to_recovered,
        ),
        infected: mix(
            mu.infected_to_hospitalized,
            &d.infected_to_hospitalized,
            &d.infected_to_recovered,
        ),
        hospitalized: mix(
            mu.hospitalized_to_icu,
            &d.hospitalized_to_icu,
            &d.hospitalized_to_recovered,
        ),
        icu: mix(mu.icu_to_dead, &d.icu_to_dead, &d.icu_to_recovered),
    }
}

/// Flows of an ODE solution at its sample times, stored as an IDE flow
/// history whose first entry has grid index `first_index`.
pub fn extract_ide_flows_from_ode(
    solution: &OdeSolution,
    p: &OdeParameterSet,
    first_index: i64,
) -> Result<FlowHistory> {
    let mut columns: [Vec<f64>; 10] = std::array::from_fn(|_| Vec::with_capacity(solution.len()));
    for (i, y) in solution.states.iter().enumerate() {
        let phi = p.contact.rate_at(solution.time(i) + 0.5 * solution.dt);
        for (col, v) in columns.iter_mut().zip(p.flows(y, phi)) {
            col.push(v.max(0.0));
        }
    }
    FlowHistory::from_columns(solution.dt, first_index, columns)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::TransitionDistribution;
    use crate::types::{AgeDependentFactor, Infectiousness};

    fn half_probabilities() -> TransitionProbabilities {
        TransitionProbabilities {
            carrier_to_infected: 0.5,
            infected_to_hospitalized: 0.5,
            hospitalized_to_icu: 0.5,
            icu_to_dead: 0.5,
        }
    }

    fn table_b5() -> OdeParameterSet {
        OdeParameterSet {
            population: 10000.0,
            stay_times: StayTimes {
                exposed: 1.4,
                carrier: 1.2,
                infected: 0.3,
                hospitalized: 0.3,
                icu: 0.3,
            },
            probabilities: half_probabilities(),
            contact: ContactSchedule::constant(1.0).unwrap(),
            rho: 1.0,
            xi_carrier: 1.0,
            xi_infected: 1.0,
        }
    }

    fn appendix_b_state() -> CompartmentState {
        CompartmentState::new([9945.0, 20.0, 20.0, 3.0, 1.0, 1.0, 10.0, 0.0]).unwrap()
    }

    #[test]
    fn rhs_initial_susceptible_slope() {
        let d = ode_rhs(&appendix_b_state(), 0.0, &table_b5()).unwrap();
        assert!((d[InfectionState::Susceptible] + 22.8735).abs() < 1e-10);
        assert!(d.values().iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn rhs_without_infectious_only_drains_exposed() {
        let y = CompartmentState::new([100.0, 10.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let d = ode_rhs(&y, 0.0, &table_b5()).unwrap();
        assert_eq!(d[InfectionState::Susceptible], 0.0);
        assert!((d[InfectionState::Exposed] + 10.0 / 1.4).abs() < 1e-14);
    }

    #[test]
    fn rhs_rejects_everyone_dead() {
        let y = CompartmentState::new([0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 10000.0]).unwrap();
        assert!(ode_rhs(&y, 0.0, &table_b5()).is_err());
    }

    #[test]
    fn integrator_conserves_mass_and_is_high_order() {
        let p = table_b5();
        let y0 = appendix_b_state();
        let reference = rk_integrate(&p, y0, 0.0, 2.0, 1e-3).unwrap();
        let exact = reference.states.last().unwrap();
        let err = |dt: f64| {
            let sol = rk_integrate(&p, y0, 0.0, 2.0, dt).unwrap();
            for y in &sol.states {
                assert!((y.total() - 10000.0).abs() < 1e-10 * 10000.0);
            }
            let last = sol.states.last().unwrap();
            last.values()
                .iter()
                .zip(exact.values())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(0.1), err(0.05));
        assert!(e1 / e2 >= 16.0, "ratio {}", e1 / e2);
    }

    #[test]
    fn sampled_integration_matches_full() {
        let p = table_b5();
        let full = rk_integrate(&p, appendix_b_state(), 0.0, 1.0, 0.01).unwrap();
        let sampled = rk_integrate_sampled(&p, appendix_b_state(), 0.0, 1.0, 0.01, 10).unwrap();
        assert_eq!(sampled.len(), 11);
        assert_eq!(sampled.states[10], full.states[100]);
        assert_eq!(full.subsample(10).states, sampled.states);
        assert!(rk_integrate(&p, appendix_b_state(), 0.0, 1.0, 0.3).is_err());
    }

    fn ide_params(dists: DistributionSet, rho_i: f64) -> ParameterSet {
        let one = AgeDependentFactor::constant(1.0).unwrap();
        ParameterSet::new(
            10000.0,
            half_probabilities(),
            ContactSchedule::constant(1.0).unwrap(),
            Infectiousness {
                rho_carrier: one.clone(),
                rho_infected: AgeDependentFactor::constant(rho_i).unwrap(),
                xi_carrier: one.clone(),
                xi_infected: one,
            },
            dists,
        )
        .unwrap()
    }

    fn b5_distributions() -> DistributionSet {
        let exp = |m| TransitionDistribution::exponential(m).unwrap();
        DistributionSet {
            exposed_to_carrier: exp(1.4),
            carrier_to_infected: exp(1.2),
            carrier_to_recovered: exp(1.2),
            infected_to_hospitalized: exp(0.3),
            infected_to_recovered: exp(0.3),
            hospitalized_to_icu: exp(0.3),
            hospitalized_to_recovered: exp(0.3),
            icu_to_dead: exp(0.3),
            icu_to_recovered: exp(0.3),
        }
    }

    #[test]
    fn reduction_of_exponential_setup() {
        let p = reduce_ide_to_ode(&ide_params(b5_distributions(), 1.0)).unwrap();
        assert_eq!(p.stay_times, table_b5().stay_times);
        assert_eq!(p.rho, 1.0);

        let mut d = b5_distributions();
        d.carrier_to_recovered = TransitionDistribution::exponential(2.0).unwrap();
        let err = reduce_ide_to_ode(&ide_params(d, 1.0)).unwrap_err();
        assert!(err.to_string().contains("pair mismatch"));

        let mut d = b5_distributions();
        d.exposed_to_carrier = TransitionDistribution::lognormal(1.4, 0.5).unwrap();
        let err = reduce_ide_to_ode(&ide_params(d, 1.0)).unwrap_err();
        assert!(err.to_string().contains("non-exponential"));

        assert!(reduce_ide_to_ode(&ide_params(b5_distributions(), 0.5)).is_err());
    }

    #[test]
    fn weighted_stay_times_collapse_for_certain_branch() {
        let mut d = b5_distributions();
        d.carrier_to_recovered = TransitionDistribution::exponential(8.0).unwrap();
        let mut mu = half_probabilities();
        mu.carrier_to_infected = 1.0;
        let t = weighted_ode_mean_stay_times(&d, &mu);
        assert!((t.carrier - 1.2).abs() < 1e-12);
        mu.carrier_to_infected = 0.25;
        let t = weighted_ode_mean_stay_times(&d, &mu);
        assert!((t.carrier - (0.25 * 1.2 + 0.75 * 8.0)).abs() < 1e-12);
    }

    #[test]
    fn extracted_flows_respect_branch_identity() {
        let p = table_b5();
        let sol = rk_integrate(&p, appendix_b_state(), 0.0, 1.0, 0.1).unwrap();
        let h = extract_ide_flows_from_ode(&sol, &p, -10).unwrap();
        assert_eq!(h.last_index(), 0);
        for k in -10..=0 {
            let c = sol.states[(k + 10) as usize][InfectionState::Carrier];
            let sum = h.get(TransitionId::CarrierToInfected, k)
                + h.get(TransitionId::CarrierToRecovered, k);
            assert!((sum - c / 1.2).abs() < 1e-12);
        }
    }
}
