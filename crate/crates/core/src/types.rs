//! Domain vocabulary shared by the solvers: compartments, transitions, the
//! uniform time grid, model parameters and result containers.

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::distributions::DistributionSet;
use crate::error::{Error, Result};

/// The eight compartments of the SECIR-type model, in fixed iteration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum InfectionState {
    Susceptible,
    Exposed,
    Carrier,
    Infected,
    Hospitalized,
    IntensiveCare,
    Recovered,
    Dead,
}

impl InfectionState {
    pub const COUNT: usize = 8;

    pub const ALL: [InfectionState; 8] = [
        InfectionState::Susceptible,
        InfectionState::Exposed,
        InfectionState::Carrier,
        InfectionState::Infected,
        InfectionState::Hospitalized,
        InfectionState::IntensiveCare,
        InfectionState::Recovered,
        InfectionState::Dead,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// One-letter label used in output headers.
    pub fn label(self) -> &'static str {
        match self {
            InfectionState::Susceptible => "S",
            InfectionState::Exposed => "E",
            InfectionState::Carrier => "C",
            InfectionState::Infected => "I",
            InfectionState::Hospitalized => "H",
            InfectionState::IntensiveCare => "U",
            InfectionState::Recovered => "R",
            InfectionState::Dead => "D",
        }
    }
}

impl fmt::Display for InfectionState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// The ten directed transitions of the model flow chart.
///
/// The declaration order is also the order in which flows are computed
/// within a time step: every flow only depends on flows declared before it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TransitionId {
    SusceptibleToExposed,
    ExposedToCarrier,
    CarrierToInfected,
    CarrierToRecovered,
    InfectedToHospitalized,
    InfectedToRecovered,
    HospitalizedToIntensiveCare,
    HospitalizedToRecovered,
    IntensiveCareToDead,
    IntensiveCareToRecovered,
}

impl TransitionId {
    pub const COUNT: usize = 10;

    pub const ALL: [TransitionId; 10] = [
        TransitionId::SusceptibleToExposed,
        TransitionId::ExposedToCarrier,
        TransitionId::CarrierToInfected,
        TransitionId::CarrierToRecovered,
        TransitionId::InfectedToHospitalized,
        TransitionId::InfectedToRecovered,
        TransitionId::HospitalizedToIntensiveCare,
        TransitionId::HospitalizedToRecovered,
        TransitionId::IntensiveCareToDead,
        TransitionId::IntensiveCareToRecovered,
    ];

    /// The nine transitions whose rate is governed by a stay-time distribution.
    pub const DISTRIBUTED: [TransitionId; 9] = [
        TransitionId::ExposedToCarrier,
        TransitionId::CarrierToInfected,
        TransitionId::CarrierToRecovered,
        TransitionId::InfectedToHospitalized,
        TransitionId::InfectedToRecovered,
        TransitionId::HospitalizedToIntensiveCare,
        TransitionId::HospitalizedToRecovered,
        TransitionId::IntensiveCareToDead,
        TransitionId::IntensiveCareToRecovered,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn source(self) -> InfectionState {
        use InfectionState::*;
        use TransitionId::*;
        match self {
            SusceptibleToExposed => Susceptible,
            ExposedToCarrier => Exposed,
            CarrierToInfected | CarrierToRecovered => Carrier,
            InfectedToHospitalized | InfectedToRecovered => Infected,
            HospitalizedToIntensiveCare | HospitalizedToRecovered => Hospitalized,
            IntensiveCareToDead | IntensiveCareToRecovered => IntensiveCare,
        }
    }

    pub fn target(self) -> InfectionState {
        use InfectionState::*;
        use TransitionId::*;
        match self {
            SusceptibleToExposed => Exposed,
            ExposedToCarrier => Carrier,
            CarrierToInfected => Infected,
            InfectedToHospitalized => Hospitalized,
            HospitalizedToIntensiveCare => IntensiveCare,
            IntensiveCareToDead => Dead,
            CarrierToRecovered
            | InfectedToRecovered
            | HospitalizedToRecovered
            | IntensiveCareToRecovered => Recovered,
        }
    }

    /// The flow entering the source compartment of this transition, if any.
    pub fn inflow(self) -> Option<TransitionId> {
        use TransitionId::*;
        match self {
            SusceptibleToExposed => None,
            ExposedToCarrier => Some(SusceptibleToExposed),
            CarrierToInfected | CarrierToRecovered => Some(ExposedToCarrier),
            InfectedToHospitalized | InfectedToRecovered => Some(CarrierToInfected),
            HospitalizedToIntensiveCare | HospitalizedToRecovered => Some(InfectedToHospitalized),
            IntensiveCareToDead | IntensiveCareToRecovered => Some(HospitalizedToIntensiveCare),
        }
    }

    /// Column label, e.g. `sigma_SE`.
    pub fn label(self) -> &'static str {
        use TransitionId::*;
        match self {
            SusceptibleToExposed => "sigma_SE",
            ExposedToCarrier => "sigma_EC",
            CarrierToInfected => "sigma_CI",
            CarrierToRecovered => "sigma_CR",
            InfectedToHospitalized => "sigma_IH",
            InfectedToRecovered => "sigma_IR",
            HospitalizedToIntensiveCare => "sigma_HU",
            HospitalizedToRecovered => "sigma_HR",
            IntensiveCareToDead => "sigma_UD",
            IntensiveCareToRecovered => "sigma_UR",
        }
    }
}

impl fmt::Display for TransitionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}", self.source(), self.target())
    }
}

/// Number of `dt` steps in `t`, if `t` lies on the grid.
pub fn grid_steps(t: f64, dt: f64) -> Option<i64> {
    let ratio = t / dt;
    let k = ratio.round();
    if (ratio - k).abs() <= 1e-9 * ratio.abs().max(1.0) {
        Some(k as i64)
    } else {
        None
    }
}

/// Uniform mesh `t_k = k * dt` with pre-history starting after index `a`.
///
/// Flows at indices `<= a` are zero by assumption.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    dt: f64,
    a: i64,
    n_max: usize,
}

impl TimeGrid {
    pub fn new(dt: f64, a: i64, n_max: usize) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidGrid(format!("dt must be positive, got {dt}")));
        }
        if a > 0 {
            return Err(Error::InvalidGrid(format!("a must be <= 0, got {a}")));
        }
        Ok(TimeGrid { dt, a, n_max })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn a(&self) -> i64 {
        self.a
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn time(&self, k: i64) -> f64 {
        k as f64 * self.dt
    }

    pub fn with_n_max(self, n_max: usize) -> Self {
        TimeGrid { n_max, ..self }
    }

    /// Steps needed to reach `t`, failing when `t` is not a grid point.
    pub fn steps_to(&self, t: f64) -> Result<i64> {
        grid_steps(t, self.dt).ok_or_else(|| {
            Error::InvalidGrid(format!("time {t} is not a multiple of dt = {}", self.dt))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactSegment {
    pub start: f64,
    pub rate: f64,
}

/// Piecewise constant daily contact rate, right-continuous at change points.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactSchedule {
    segments: Vec<ContactSegment>,
}

impl ContactSchedule {
    pub fn new(segments: Vec<ContactSegment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::InvalidParameter(
                "contact schedule needs at least one segment".into(),
            ));
        }
        for seg in &segments {
            if !seg.start.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "contact segment start must be finite, got {}",
                    seg.start
                )));
            }
            if !seg.rate.is_finite() || seg.rate < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "negative contact rate {} at t = {}",
                    seg.rate, seg.start
                )));
            }
        }
        if segments.windows(2).any(|w| w[1].start <= w[0].start) {
            return Err(Error::InvalidParameter(
                "contact segments must be sorted strictly by start time".into(),
            ));
        }
        Ok(ContactSchedule { segments })
    }

    pub fn constant(rate: f64) -> Result<Self> {
        Self::new(vec![ContactSegment { start: 0.0, rate }])
    }

    /// Rate of the last segment starting at or before `t`. Times before the
    /// first segment use the first segment's rate.
    pub fn rate_at(&self, t: f64) -> f64 {
        let idx = self.segments.partition_point(|s| s.start <= t);
        self.segments[idx.saturating_sub(1)].rate
    }

    /// Rate at grid point `t_k`, robust to rounding in `k * dt` for change
    /// points on the grid.
    pub fn rate_at_step(&self, k: i64, dt: f64) -> f64 {
        self.rate_at((k as f64 + 0.5) * dt)
    }

    pub fn segments(&self) -> &[ContactSegment] {
        &self.segments
    }

    /// Copy with an additional change point; later segments are replaced.
    pub fn with_change(&self, start: f64, rate: f64) -> Result<Self> {
        let mut segments: Vec<_> = self
            .segments
            .iter()
            .copied()
            .filter(|s| s.start < start)
            .collect();
        segments.push(ContactSegment { start, rate });
        Self::new(segments)
    }

    /// Copy with every change point moved by `offset` days.
    pub fn shifted(&self, offset: f64) -> Result<Self> {
        Self::new(
            self.segments
                .iter()
                .map(|s| ContactSegment {
                    start: s.start + offset,
                    rate: s.rate,
                })
                .collect(),
        )
    }

    /// Checks that every change point after the first segment lies on the grid.
    pub fn check_grid_aligned(&self, dt: f64) -> Result<()> {
        for seg in self.segments.iter().skip(1) {
            if grid_steps(seg.start, dt).is_none() {
                return Err(Error::InvalidGrid(format!(
                    "contact change at t = {} is not a multiple of dt = {dt}",
                    seg.start
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum FactorKind {
    Constant(f64),
    Tabulated { taus: Vec<f64>, values: Vec<f64> },
}

/// A proportion in `[0, 1]` depending on the infection age `tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct AgeDependentFactor {
    kind: FactorKind,
}

impl AgeDependentFactor {
    pub fn constant(value: f64) -> Result<Self> {
        check_proportion("age-dependent factor", value)?;
        Ok(AgeDependentFactor {
            kind: FactorKind::Constant(value),
        })
    }

    /// Piecewise linear curve through `(taus[i], values[i])`, held constant
    /// outside the sampled range.
    pub fn tabulated(taus: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if taus.is_empty() || taus.len() != values.len() {
            return Err(Error::InvalidParameter(
                "tabulated factor needs matching, non-empty tau and value arrays".into(),
            ));
        }
        if taus[0] < 0.0 || taus.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidParameter(
                "tabulated factor ages must be finite and >= 0".into(),
            ));
        }
        if taus.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter(
                "tabulated factor ages must be strictly increasing".into(),
            ));
        }
        for &v in &values {
            check_proportion("age-dependent factor", v)?;
        }
        Ok(AgeDependentFactor {
            kind: FactorKind::Tabulated { taus, values },
        })
    }

    pub fn eval(&self, tau: f64) -> f64 {
        match &self.kind {
            FactorKind::Constant(v) => *v,
            FactorKind::Tabulated { taus, values } => {
                let tau = tau.max(0.0);
                if tau <= taus[0] {
                    return values[0];
                }
                let idx = taus.partition_point(|&t| t <= tau);
                if idx >= taus.len() {
                    return values[values.len() - 1];
                }
                let (t0, t1) = (taus[idx - 1], taus[idx]);
                let w = (tau - t0) / (t1 - t0);
                values[idx - 1] + w * (values[idx] - values[idx - 1])
            }
        }
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self.kind {
            FactorKind::Constant(v) => Some(v),
            FactorKind::Tabulated { .. } => None,
        }
    }
}

fn check_proportion(name: &str, value: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::InvalidParameter(format!(
            "{name} must lie in [0, 1], got {value}"
        )));
    }
    Ok(())
}

/// Branching probabilities `mu_C^I, mu_I^H, mu_H^U, mu_U^D`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionProbabilities {
    pub carrier_to_infected: f64,
    pub infected_to_hospitalized: f64,
    pub hospitalized_to_icu: f64,
    pub icu_to_dead: f64,
}

impl TransitionProbabilities {
    pub fn validate(&self) -> Result<()> {
        check_proportion("mu_CI", self.carrier_to_infected)?;
        check_proportion("mu_IH", self.infected_to_hospitalized)?;
        check_proportion("mu_HU", self.hospitalized_to_icu)?;
        check_proportion("mu_UD", self.icu_to_dead)?;
        let product = self.carrier_to_infected
            * self.infected_to_hospitalized
            * self.hospitalized_to_icu
            * self.icu_to_dead;
        if product >= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "mu product not < 1 (got {product})"
            )));
        }
        Ok(())
    }

    /// Share of the source compartment's inflow that takes `transition`.
    pub fn branch(&self, transition: TransitionId) -> f64 {
        use TransitionId::*;
        match transition {
            SusceptibleToExposed | ExposedToCarrier => 1.0,
            CarrierToInfected => self.carrier_to_infected,
            CarrierToRecovered => 1.0 - self.carrier_to_infected,
            InfectedToHospitalized => self.infected_to_hospitalized,
            InfectedToRecovered => 1.0 - self.infected_to_hospitalized,
            HospitalizedToIntensiveCare => self.hospitalized_to_icu,
            HospitalizedToRecovered => 1.0 - self.hospitalized_to_icu,
            IntensiveCareToDead => self.icu_to_dead,
            IntensiveCareToRecovered => 1.0 - self.icu_to_dead,
        }
    }
}

/// Transmission risks `rho` and non-isolated proportions `xi` for the two
/// infectious compartments.
#[derive(Debug, Clone, PartialEq)]
pub struct Infectiousness {
    pub rho_carrier: AgeDependentFactor,
    pub rho_infected: AgeDependentFactor,
    pub xi_carrier: AgeDependentFactor,
    pub xi_infected: AgeDependentFactor,
}

/// All constants and age-of-infection-dependent functions of the IDE model.
#[derive(Debug, Clone)]
pub struct ParameterSet {
    population: f64,
    probabilities: TransitionProbabilities,
    contact: ContactSchedule,
    infectiousness: Infectiousness,
    distributions: DistributionSet,
}

impl ParameterSet {
    pub fn new(
        population: f64,
        probabilities: TransitionProbabilities,
        contact: ContactSchedule,
        infectiousness: Infectiousness,
        distributions: DistributionSet,
    ) -> Result<Self> {
        validate_parameters(ParameterSet {
            population,
            probabilities,
            contact,
            infectiousness,
            distributions,
        })
    }

    pub fn population(&self) -> f64 {
        self.population
    }

    pub fn probabilities(&self) -> &TransitionProbabilities {
        &self.probabilities
    }

    pub fn contact(&self) -> &ContactSchedule {
        &self.contact
    }

    pub fn infectiousness(&self) -> &Infectiousness {
        &self.infectiousness
    }

    pub fn distributions(&self) -> &DistributionSet {
        &self.distributions
    }

    pub fn with_contact(&self, contact: ContactSchedule) -> Self {
        ParameterSet {
            contact,
            ..self.clone()
        }
    }
}

/// Re-checks every invariant of a parameter set and hands it back unchanged.
pub fn validate_parameters(p: ParameterSet) -> Result<ParameterSet> {
    if !(p.population.is_finite() && p.population > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "population must be positive, got {}",
            p.population
        )));
    }
    p.probabilities.validate()?;
    // ContactSchedule, AgeDependentFactor and the distributions validate on
    // construction; nothing else can break them afterwards.
    Ok(p)
}

/// One real-valued population count per compartment.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CompartmentState([f64; 8]);

impl CompartmentState {
    pub fn new(values: [f64; 8]) -> Result<Self> {
        for (state, v) in InfectionState::ALL.iter().zip(values) {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "compartment {state} must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(CompartmentState(values))
    }

    /// Wraps solver output without checks; invariants are asserted by the
    /// solver's own invariant suite.
    pub(crate) fn from_raw(values: [f64; 8]) -> Self {
        CompartmentState(values)
    }

    pub fn values(&self) -> &[f64; 8] {
        &self.0
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }
}

impl Index<InfectionState> for CompartmentState {
    type Output = f64;

    fn index(&self, state: InfectionState) -> &f64 {
        &self.0[state.index()]
    }
}

impl IndexMut<InfectionState> for CompartmentState {
    fn index_mut(&mut self, state: InfectionState) -> &mut f64 {
        &mut self.0[state.index()]
    }
}

/// Flow rates (persons/day) for all ten transitions on a contiguous index
/// range `first_index ..= last_index`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowHistory {
    dt: f64,
    first_index: i64,
    columns: [Vec<f64>; 10],
    // Position of the first nonzero entry per column (column length if none).
    first_nonzero: [usize; 10],
}

impl FlowHistory {
    /// All-zero history on the indices `a+1 ..= 0`.
    pub fn zeros(dt: f64, a: i64) -> Result<Self> {
        TimeGrid::new(dt, a, 0)?;
        let len = (-a) as usize;
        Ok(FlowHistory {
            dt,
            first_index: a + 1,
            columns: std::array::from_fn(|_| vec![0.0; len]),
            first_nonzero: [len; 10],
        })
    }

    pub fn from_columns(dt: f64, first_index: i64, columns: [Vec<f64>; 10]) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidGrid(format!("dt must be positive, got {dt}")));
        }
        let len = columns[0].len();
        if columns.iter().any(|c| c.len() != len) {
            return Err(Error::InvalidParameter(
                "flow columns must share one index range".into(),
            ));
        }
        for (tr, col) in TransitionId::ALL.iter().zip(&columns) {
            if let Some(v) = col.iter().find(|v| !v.is_finite() || **v < 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "flow {tr} must be finite and >= 0, got {v}"
                )));
            }
        }
        let first_nonzero = std::array::from_fn(|i| leading_zeros(&columns[i]));
        Ok(FlowHistory {
            dt,
            first_index,
            columns,
            first_nonzero,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn first_index(&self) -> i64 {
        self.first_index
    }

    pub fn len(&self) -> usize {
        self.columns[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn last_index(&self) -> i64 {
        self.first_index + self.len() as i64 - 1
    }

    /// Flow at grid index `k`; zero outside the stored range.
    pub fn get(&self, transition: TransitionId, k: i64) -> f64 {
        let pos = k - self.first_index;
        if pos < 0 {
            return 0.0;
        }
        self.columns[transition.index()]
            .get(pos as usize)
            .copied()
            .unwrap_or(0.0)
    }

    pub fn series(&self, transition: TransitionId) -> &[f64] {
        &self.columns[transition.index()]
    }

    /// Flows at one index, in [`TransitionId::ALL`] order.
    pub fn at(&self, k: i64) -> [f64; 10] {
        std::array::from_fn(|i| self.get(TransitionId::ALL[i], k))
    }

    /// Appends to one column only; callers keep the columns aligned.
    pub(crate) fn push_value(&mut self, transition: TransitionId, value: f64) {
        let i = transition.index();
        let col = &mut self.columns[i];
        if self.first_nonzero[i] == col.len() && value == 0.0 {
            self.first_nonzero[i] += 1;
        }
        col.push(value);
    }

    pub(crate) fn replace_column(&mut self, transition: TransitionId, values: Vec<f64>) {
        let i = transition.index();
        debug_assert_eq!(values.len(), self.columns[i].len());
        self.first_nonzero[i] = leading_zeros(&values);
        self.columns[i] = values;
    }

    /// Position of the first nonzero entry of a column.
    pub(crate) fn first_nonzero(&self, transition: TransitionId) -> usize {
        self.first_nonzero[transition.index()]
    }

    pub(crate) fn position(&self, k: i64) -> usize {
        debug_assert!(k >= self.first_index);
        (k - self.first_index) as usize
    }
}

fn leading_zeros(values: &[f64]) -> usize {
    values
        .iter()
        .position(|&v| v != 0.0)
        .unwrap_or(values.len())
}

/// Aligned output of one IDE run on the indices `0 ..= n_max`.
#[derive(Debug, Clone)]
pub struct SimulationResult {
    pub grid: TimeGrid,
    pub compartments: Vec<CompartmentState>,
    /// Flows from the first pre-history index through `n_max`.
    pub flows: FlowHistory,
    pub force_of_infection: Vec<f64>,
    /// `dt * sigma_SE` summed over each full day of simulated time.
    pub daily_new_transmissions: Vec<f64>,
    /// Compartments from the sum discretization, when requested.
    pub sum_compartments: Option<Vec<CompartmentState>>,
}

impl SimulationResult {
    pub fn time(&self, k: usize) -> f64 {
        self.grid.time(k as i64)
    }

    pub fn final_state(&self) -> &CompartmentState {
        self.compartments
            .last()
            .expect("result holds the initial state")
    }

    /// Largest `|sum - update|` over all compartments and steps.
    pub fn max_discretization_divergence(&self) -> Option<f64> {
        let sums = self.sum_compartments.as_ref()?;
        let mut max = 0.0f64;
        for (s, u) in sums.iter().zip(&self.compartments) {
            for (a, b) in s.values().iter().zip(u.values()) {
                max = max.max((a - b).abs());
            }
        }
        Some(max)
    }

    /// Largest `|sum_Z Z(t_n) - N|` over all steps.
    pub fn max_mass_residual(&self, population: f64) -> f64 {
        self.compartments
            .iter()
            .map(|c| (c.total() - population).abs())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumerations_have_fixed_order() {
        assert_eq!(InfectionState::ALL.len(), 8);
        for (i, s) in InfectionState::ALL.iter().enumerate() {
            assert_eq!(s.index(), i);
        }
        assert_eq!(TransitionId::ALL.len(), 10);
        for (i, t) in TransitionId::ALL.iter().enumerate() {
            assert_eq!(t.index(), i);
        }
    }

    #[test]
    fn every_inflow_precedes_its_transition() {
        for t in TransitionId::ALL {
            if let Some(src) = t.inflow() {
                assert!(src.index() < t.index());
                assert_eq!(src.target(), t.source());
            }
        }
    }

    #[test]
    fn grid_time_is_exact_product() {
        let grid = TimeGrid::new(0.1, -5, 10).unwrap();
        for k in -5..=10 {
            assert_eq!(grid.time(k), k as f64 * 0.1);
        }
        assert!(TimeGrid::new(0.0, 0, 1).is_err());
        assert!(TimeGrid::new(0.1, 1, 1).is_err());
    }

    #[test]
    fn contact_schedule_lookup() {
        let s = ContactSchedule::new(vec![
            ContactSegment {
                start: 0.0,
                rate: 1.0,
            },
            ContactSegment {
                start: 2.0,
                rate: 2.0,
            },
        ])
        .unwrap();
        assert_eq!(s.rate_at(-1.0), 1.0);
        assert_eq!(s.rate_at(1.99), 1.0);
        assert_eq!(s.rate_at(2.0), 2.0);
        assert_eq!(s.rate_at(50.0), 2.0);
        assert!(s.check_grid_aligned(0.01).is_ok());
        assert!(s.check_grid_aligned(0.3).is_err());
    }

    #[test]
    fn contact_schedule_rejects_bad_segments() {
        let err = ContactSchedule::constant(-1.0).unwrap_err();
        assert!(err.to_string().contains("negative contact rate"));
        assert!(ContactSchedule::new(vec![
            ContactSegment {
                start: 1.0,
                rate: 1.0
            },
            ContactSegment {
                start: 1.0,
                rate: 2.0
            },
        ])
        .is_err());
        assert!(ContactSchedule::new(vec![]).is_err());
    }

    #[test]
    fn tabulated_factor_interpolates_and_clamps() {
        let f = AgeDependentFactor::tabulated(vec![0.0, 2.0], vec![1.0, 0.0]).unwrap();
        assert_eq!(f.eval(-3.0), 1.0);
        assert_eq!(f.eval(1.0), 0.5);
        assert_eq!(f.eval(5.0), 0.0);
        assert!(AgeDependentFactor::constant(1.5).is_err());
        assert!(AgeDependentFactor::tabulated(vec![0.0, 0.0], vec![0.1, 0.2]).is_err());
    }

    #[test]
    fn probability_product_must_stay_below_one() {
        let half = TransitionProbabilities {
            carrier_to_infected: 0.5,
            infected_to_hospitalized: 0.5,
            hospitalized_to_icu: 0.5,
            icu_to_dead: 0.5,
        };
        assert!(half.validate().is_ok());
        let ones = TransitionProbabilities {
            carrier_to_infected: 1.0,
            infected_to_hospitalized: 1.0,
            hospitalized_to_icu: 1.0,
            icu_to_dead: 1.0,
        };
        assert!(ones
            .validate()
            .unwrap_err()
            .to_string()
            .contains("mu product"));
        let covid = TransitionProbabilities {
            carrier_to_infected: 0.793099,
            infected_to_hospitalized: 0.078643,
            hospitalized_to_icu: 0.173176,
            icu_to_dead: 0.387803,
        };
        assert!(covid.validate().is_ok());
    }

    #[test]
    fn compartments_reject_negative_entries() {
        assert!(CompartmentState::new([1.0; 8]).is_ok());
        let mut v = [1.0; 8];
        v[3] = -1.0;
        assert!(CompartmentState::new(v).is_err());
    }

    #[test]
    fn flow_history_indexing() {
        let mut h = FlowHistory::zeros(0.5, -3).unwrap();
        assert_eq!(h.first_index(), -2);
        assert_eq!(h.last_index(), 0);
        for t in TransitionId::ALL {
            h.push_value(t, 1.0);
        }
        assert_eq!(h.last_index(), 1);
        assert_eq!(h.get(TransitionId::ExposedToCarrier, 1), 1.0);
        assert_eq!(h.get(TransitionId::ExposedToCarrier, -10), 0.0);
        assert!(FlowHistory::from_columns(
            1.0,
            0,
            std::array::from_fn(|i| if i == 0 { vec![-1.0] } else { vec![0.0] })
        )
        .is_err());
    }
}
