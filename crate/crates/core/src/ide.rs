//! Nonstandard discretization of the integro-differential SECIR model.
//!
//! The susceptibles are advanced implicitly, all other flows follow from
//! discrete convolutions of earlier flows with backwards-difference kernels.

use crate::distributions::DiscreteKernel;
use crate::error::{Error, Result};
use crate::types::{
    CompartmentState, FlowHistory, InfectionState, ParameterSet, SimulationResult, TimeGrid,
    TransitionId,
};

/// How compartments other than `S` are obtained from the flows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompartmentMode {
    /// Incremental `Z_{n+1} = Z_n + dt * (inflow - outflow)`.
    Update,
    /// Convolution of the inflow history with the survival functions.
    Sum,
    /// Run both; the update result is primary, the sum result is kept for
    /// comparison.
    Both,
}

/// Transient compartments in the order they are reached by an infection.
const TRANSIENT: [(InfectionState, TransitionId); 5] = [
    (InfectionState::Exposed, TransitionId::SusceptibleToExposed),
    (InfectionState::Carrier, TransitionId::ExposedToCarrier),
    (InfectionState::Infected, TransitionId::CarrierToInfected),
    (
        InfectionState::Hospitalized,
        TransitionId::InfectedToHospitalized,
    ),
    (
        InfectionState::IntensiveCare,
        TransitionId::HospitalizedToIntensiveCare,
    ),
];

const TO_RECOVERED: [TransitionId; 4] = [
    TransitionId::CarrierToRecovered,
    TransitionId::InfectedToRecovered,
    TransitionId::HospitalizedToRecovered,
    TransitionId::IntensiveCareToRecovered,
];

/// Time-independent weights of the scheme for one parameter set and step
/// size. All weight vectors are stored in reversed lag order so that every
/// convolution is a contiguous dot product with the flow history.
#[derive(Debug, Clone)]
pub struct DiscreteModel {
    params: ParameterSet,
    dt: f64,
    kernels: Vec<Option<DiscreteKernel>>,
    // -mu * dt * gamma'(t_j) for j = K..1.
    flow_weights: Vec<Vec<f64>>,
    // dt * xi * rho * (mixture survival) at t_j for j = K..1.
    foi_carrier: Vec<f64>,
    foi_infected: Vec<f64>,
    // dt * (mixture survival) at t_j for j = K..1, per transient compartment.
    occupancy: Vec<Vec<f64>>,
}

impl DiscreteModel {
    pub fn new(params: &ParameterSet, dt: f64) -> Result<Self> {
        TimeGrid::new(dt, 0, 0)?;
        params.contact().check_grid_aligned(dt)?;
        let mu = params.probabilities();
        let kernels: Vec<Option<DiscreteKernel>> = TransitionId::ALL
            .iter()
            .map(|&t| params.distributions().get(t).map(|d| d.kernel(dt)))
            .collect();

        let flow_weights = TransitionId::ALL
            .iter()
            .map(|&t| match &kernels[t.index()] {
                Some(k) => {
                    let scale = -mu.branch(t) * dt;
                    k.derivatives().iter().rev().map(|d| scale * d).collect()
                }
                None => Vec::new(),
            })
            .collect();

        let mixture = |a: TransitionId, b: Option<TransitionId>| -> Vec<f64> {
            let ka = kernels[a.index()].as_ref().expect("distributed transition");
            let kb = b.map(|b| kernels[b.index()].as_ref().expect("distributed transition"));
            let len = ka.len().max(kb.map_or(0, |k| k.len()));
            (1..=len)
                .map(|j| {
                    let mut v = mu.branch(a) * ka.survival_at(j);
                    if let (Some(b), Some(kb)) = (b, kb) {
                        v += mu.branch(b) * kb.survival_at(j);
                    }
                    v
                })
                .collect()
        };

        use TransitionId::*;
        let mixtures = [
            mixture(ExposedToCarrier, None),
            mixture(CarrierToInfected, Some(CarrierToRecovered)),
            mixture(InfectedToHospitalized, Some(InfectedToRecovered)),
            mixture(HospitalizedToIntensiveCare, Some(HospitalizedToRecovered)),
            mixture(IntensiveCareToDead, Some(IntensiveCareToRecovered)),
        ];

        let inf = params.infectiousness();
        let weighted = |mix: &[f64],
                        xi: &crate::types::AgeDependentFactor,
                        rho: &crate::types::AgeDependentFactor|
         -> Vec<f64> {
            mix.iter()
                .enumerate()
                .rev()
                .map(|(i, m)| {
                    let tau = (i + 1) as f64 * dt;
                    dt * xi.eval(tau) * rho.eval(tau) * m
                })
                .collect()
        };
        let foi_carrier = weighted(&mixtures[1], &inf.xi_carrier, &inf.rho_carrier);
        let foi_infected = weighted(&mixtures[2], &inf.xi_infected, &inf.rho_infected);
        let occupancy = mixtures
            .iter()
            .map(|m| m.iter().rev().map(|v| dt * v).collect())
            .collect();

        Ok(DiscreteModel {
            params: params.clone(),
            dt,
            kernels,
            flow_weights,
            foi_carrier,
            foi_infected,
            occupancy,
        })
    }

    pub fn params(&self) -> &ParameterSet {
        &self.params
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn kernel(&self, transition: TransitionId) -> Option<&DiscreteKernel> {
        self.kernels[transition.index()].as_ref()
    }

    /// Longest kernel support in steps.
    pub fn max_support_steps(&self) -> usize {
        self.kernels
            .iter()
            .flatten()
            .map(DiscreteKernel::len)
            .max()
            .unwrap_or(0)
    }

    /// `-mu * dt * sum_m gamma'(t_{k-m+1}) * sigma_in(t_m)` for a distributed
    /// transition; the inflow must already be known at `k`.
    pub fn flow(&self, history: &FlowHistory, transition: TransitionId, k: i64) -> f64 {
        let Some(inflow) = transition.inflow() else {
            return 0.0;
        };
        convolve_history(&self.flow_weights[transition.index()], history, inflow, k)
    }

    /// `dt * sum_m (w_C(t_{k-m+1}) sigma_EC(t_m) + w_I(t_{k-m+1}) sigma_CI(t_m))`,
    /// the infectious pressure at `t_k` before scaling by contacts and the
    /// living population.
    pub fn infectious_pressure(&self, history: &FlowHistory, k: i64) -> f64 {
        convolve_history(
            &self.foi_carrier,
            history,
            TransitionId::ExposedToCarrier,
            k,
        ) + convolve_history(
            &self.foi_infected,
            history,
            TransitionId::CarrierToInfected,
            k,
        )
    }

    /// Force of infection at `t_k` given the dead at the previous step.
    pub fn force_of_infection(&self, history: &FlowHistory, k: i64, dead_prev: f64) -> Result<f64> {
        let n = self.params.population();
        let living = n - dead_prev;
        if !(living > 0.0) {
            return Err(Error::CorruptedState(format!(
                "dead {dead_prev} reached the population {n} at t = {}",
                (k - 1) as f64 * self.dt
            )));
        }
        let phi = self.params.contact().rate_at_step(k, self.dt);
        Ok(phi / living * self.infectious_pressure(history, k))
    }

    /// `E, C, I, H, U` at `t_k` by the sum discretization.
    pub fn transient_compartments(&self, history: &FlowHistory, k: i64) -> [f64; 5] {
        std::array::from_fn(|i| convolve_history(&self.occupancy[i], history, TRANSIENT[i].1, k))
    }

    /// `dt * sum` of the flows into `R` and `D` over the indices `from ..= to`.
    pub fn accumulated_removed(&self, history: &FlowHistory, from: i64, to: i64) -> (f64, f64) {
        let mut r = 0.0;
        let mut d = 0.0;
        for k in from.max(history.first_index())..=to.min(history.last_index()) {
            r += TO_RECOVERED.iter().map(|&t| history.get(t, k)).sum::<f64>();
            d += history.get(TransitionId::IntensiveCareToDead, k);
        }
        (self.dt * r, self.dt * d)
    }

    /// Fills every column listed in `transitions` over the whole history by
    /// the flow recursion, in the given order.
    pub fn fill_flows(&self, history: &mut FlowHistory, transitions: &[TransitionId]) {
        for &t in transitions {
            let values = (history.first_index()..=history.last_index())
                .map(|k| self.flow(history, t, k))
                .collect();
            history.replace_column(t, values);
        }
    }
}

/// `S_{n+1} = S_n / (1 + dt * lambda_n)` together with the resulting
/// `sigma_SE(t_{n+1}) = S_{n+1} * lambda_n`.
pub fn step_susceptible(s: f64, lambda: f64, dt: f64) -> (f64, f64) {
    let next = s / (1.0 + dt * lambda);
    (next, next * lambda)
}

/// Advances `E, C, I, H, U, R, D` by `dt * (inflow - outflow)` using the flows
/// at the new time point. `S` is taken as `prev_S - dt * sigma_SE`.
pub fn compartments_update_discretization(
    prev: &CompartmentState,
    flows: &[f64; 10],
    dt: f64,
) -> CompartmentState {
    let mut next = *prev;
    for t in TransitionId::ALL {
        let v = dt * flows[t.index()];
        next[t.source()] -= v;
        next[t.target()] += v;
    }
    next
}

fn convolve_history(rev: &[f64], history: &FlowHistory, inflow: TransitionId, k: i64) -> f64 {
    if k < history.first_index() || k > history.last_index() {
        if k > history.last_index() {
            panic!("flow {inflow} requested at {k} beyond the known history");
        }
        return 0.0;
    }
    let series = history.series(inflow);
    let end = history.position(k);
    convolve(rev, series, end, history.first_nonzero(inflow))
}

/// `sum_p rev[K - 1 - (end - p)] * series[p]` over the window of length `K`
/// ending at `end`, skipping everything before `start`.
fn convolve(rev: &[f64], series: &[f64], end: usize, start: usize) -> f64 {
    let k = rev.len();
    if k == 0 || start > end {
        return 0.0;
    }
    let lo = start.max((end + 1).saturating_sub(k));
    let n = end + 1 - lo;
    dot(&rev[k - n..], &series[lo..=end])
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let chunks_a = a.chunks_exact(4);
    let chunks_b = b.chunks_exact(4);
    let tail: f64 = chunks_a
        .remainder()
        .iter()
        .zip(chunks_b.remainder())
        .map(|(x, y)| x * y)
        .sum();
    let mut acc = [0.0f64; 4];
    for (x, y) in chunks_a.zip(chunks_b) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Time-stepping state of the IDE model.
#[derive(Debug, Clone)]
pub struct IdeSolver {
    model: DiscreteModel,
    history: FlowHistory,
    compartments: Vec<CompartmentState>,
    sum_compartments: Option<Vec<CompartmentState>>,
    lambda: Vec<f64>,
    mode: CompartmentMode,
}

impl IdeSolver {
    /// Starts a run at `t_0 = 0` from flows on `a+1 ..= 0` and the
    /// compartments at `t_0`.
    pub fn new(
        params: &ParameterSet,
        history: FlowHistory,
        initial: CompartmentState,
        mode: CompartmentMode,
    ) -> Result<Self> {
        let model = DiscreteModel::new(params, history.dt())?;
        Self::with_model(model, history, initial, mode)
    }

    pub fn with_model(
        model: DiscreteModel,
        history: FlowHistory,
        initial: CompartmentState,
        mode: CompartmentMode,
    ) -> Result<Self> {
        if history.is_empty() || history.last_index() != 0 {
            return Err(Error::InvalidParameter(format!(
                "flow history must end at index 0, ends at {}",
                history.last_index()
            )));
        }
        if (history.dt() - model.dt()).abs() > 1e-12 * model.dt() {
            return Err(Error::InvalidGrid(format!(
                "history step {} differs from solver step {}",
                history.dt(),
                model.dt()
            )));
        }
        let n = model.params().population();
        CompartmentState::new(*initial.values())?;
        if (initial.total() - n).abs() > 1e-9 * n {
            return Err(Error::InvalidParameter(format!(
                "compartments sum to {}, population is {n}",
                initial.total()
            )));
        }
        let dead = initial[InfectionState::Dead];
        if dead >= n {
            return Err(Error::InvalidParameter(format!(
                "dead {dead} must stay below the population {n}"
            )));
        }

        let lambda0 = model.force_of_infection(&history, 0, dead)?;
        let sum_compartments = match mode {
            CompartmentMode::Update => None,
            CompartmentMode::Sum | CompartmentMode::Both => {
                Some(vec![sum_state(&model, &history, 0, &initial, &initial)])
            }
        };
        Ok(IdeSolver {
            model,
            history,
            compartments: vec![initial],
            sum_compartments,
            lambda: vec![lambda0],
            mode,
        })
    }

    pub fn model(&self) -> &DiscreteModel {
        &self.model
    }

    pub fn history(&self) -> &FlowHistory {
        &self.history
    }

    /// Index of the latest computed time point.
    pub fn current_index(&self) -> i64 {
        self.compartments.len() as i64 - 1
    }

    pub fn current_state(&self) -> &CompartmentState {
        self.primary().last().expect("initial state present")
    }

    fn primary(&self) -> &[CompartmentState] {
        match (self.mode, &self.sum_compartments) {
            (CompartmentMode::Sum, Some(s)) => s,
            _ => &self.compartments,
        }
    }

    /// Force of infection at `t_k` for an already computed index `k`.
    pub fn force_of_infection(&self, k: i64) -> f64 {
        self.lambda[k as usize]
    }

    /// Computes and appends all flows at `t_{n+1}` given `sigma_SE(t_{n+1})`.
    pub fn step_flows(&mut self, sigma_se: f64) -> [f64; 10] {
        let k = self.current_index() + 1;
        let mut flows = [0.0; 10];
        flows[0] = sigma_se;
        self.history
            .push_value(TransitionId::SusceptibleToExposed, sigma_se);
        for t in TransitionId::DISTRIBUTED {
            let v = self.model.flow(&self.history, t, k);
            flows[t.index()] = v;
            self.history.push_value(t, v);
        }
        flows
    }

    /// Compartments at an already computed index `k` by the sum
    /// discretization. `S` is the value from the implicit step; `R` and `D`
    /// accumulate their inflows from the initial values at `t_0`.
    pub fn compartments_sum_discretization(&self, k: i64) -> CompartmentState {
        let initial = self.compartments[0];
        let current = self.primary()[k as usize];
        sum_state(&self.model, &self.history, k, &initial, &current)
    }

    /// Advances the solution by one step.
    pub fn step(&mut self) -> Result<()> {
        let n = self.current_index();
        let dt = self.model.dt();
        let prev = *self.current_state();
        let (s_next, sigma_se) = step_susceptible(
            prev[InfectionState::Susceptible],
            self.lambda[n as usize],
            dt,
        );
        let flows = self.step_flows(sigma_se);

        let mut updated =
            compartments_update_discretization(&self.compartments[n as usize], &flows, dt);
        updated[InfectionState::Susceptible] = s_next;
        self.compartments.push(updated);

        if let Some(sums) = &mut self.sum_compartments {
            let initial = self.compartments[0];
            sums.push(sum_state(
                &self.model,
                &self.history,
                n + 1,
                &initial,
                &updated,
            ));
        }

        let dead_prev = self.primary()[n as usize][InfectionState::Dead];
        let lambda = self
            .model
            .force_of_infection(&self.history, n + 1, dead_prev)?;
        self.lambda.push(lambda);

        if cfg!(debug_assertions) {
            self.check_invariants(n + 1)?;
        }
        Ok(())
    }

    fn check_invariants(&self, k: i64) -> Result<()> {
        let n = self.model.params().population();
        let flows = self.history.at(k);
        if let Some((t, v)) = TransitionId::ALL
            .iter()
            .zip(flows)
            .find(|(_, v)| !(*v >= 0.0))
        {
            return Err(Error::CorruptedState(format!(
                "flow {t} = {v} at index {k}"
            )));
        }
        let lambda = self.lambda[k as usize];
        if !(lambda >= 0.0) {
            return Err(Error::CorruptedState(format!(
                "lambda = {lambda} at index {k}"
            )));
        }
        let state = self.primary()[k as usize];
        let prev = self.primary()[k as usize - 1];
        // Roundoff in the incremental update can push an emptied compartment
        // a few ulps of N below zero.
        let tol = 1e-12 * n;
        for s in InfectionState::ALL {
            let v = state[s];
            if !(v >= -tol && v <= n + tol) {
                return Err(Error::CorruptedState(format!("{s} = {v} at index {k}")));
            }
        }
        if state[InfectionState::Susceptible] > prev[InfectionState::Susceptible] {
            return Err(Error::CorruptedState(format!("S increased at index {k}")));
        }
        for s in [InfectionState::Recovered, InfectionState::Dead] {
            if state[s] < prev[s] {
                return Err(Error::CorruptedState(format!("{s} decreased at index {k}")));
            }
        }
        if state[InfectionState::Dead] >= n {
            return Err(Error::CorruptedState(format!("D reached N at index {k}")));
        }
        let residual = (state.total() - n).abs();
        if residual > 1e-9 * n {
            return Err(Error::CorruptedState(format!(
                "mass residual {residual} at index {k}"
            )));
        }
        Ok(())
    }

    /// Runs until `t_end` and collects the result.
    pub fn simulate(mut self, t_end: f64) -> Result<SimulationResult> {
        let dt = self.model.dt();
        let n_max = crate::types::grid_steps(t_end, dt).ok_or_else(|| {
            Error::InvalidGrid(format!("t_end = {t_end} is not a multiple of dt = {dt}"))
        })?;
        if n_max < 0 {
            return Err(Error::InvalidGrid(format!(
                "t_end = {t_end} lies before t_0"
            )));
        }
        while self.current_index() < n_max {
            self.step()?;
        }
        Ok(self.into_result())
    }

    /// Runs until `stop` returns true for the latest state, or `max_steps`
    /// steps have been taken.
    pub fn simulate_until<F>(mut self, max_steps: usize, mut stop: F) -> Result<SimulationResult>
    where
        F: FnMut(&IdeSolver) -> bool,
    {
        for _ in 0..max_steps {
            self.step()?;
            if stop(&self) {
                break;
            }
        }
        Ok(self.into_result())
    }

    pub fn into_result(self) -> SimulationResult {
        let dt = self.model.dt();
        let n_max = self.current_index();
        let grid = TimeGrid::new(dt, self.history.first_index() - 1, n_max as usize)
            .expect("grid validated at construction");
        let daily = daily_sums(&self.history, dt, n_max);
        let (compartments, sum_compartments) = match self.mode {
            CompartmentMode::Update => (self.compartments, None),
            CompartmentMode::Sum => (self.sum_compartments.expect("sum mode keeps sums"), None),
            CompartmentMode::Both => (self.compartments, self.sum_compartments),
        };
        SimulationResult {
            grid,
            compartments,
            flows: self.history,
            force_of_infection: self.lambda,
            daily_new_transmissions: daily,
            sum_compartments,
        }
    }
}

fn sum_state(
    model: &DiscreteModel,
    history: &FlowHistory,
    k: i64,
    initial: &CompartmentState,
    current: &CompartmentState,
) -> CompartmentState {
    let transient = model.transient_compartments(history, k);
    let (r, d) = model.accumulated_removed(history, 1, k);
    let mut state = CompartmentState::default();
    state[InfectionState::Susceptible] = current[InfectionState::Susceptible];
    for (i, (s, _)) in TRANSIENT.iter().enumerate() {
        state[*s] = transient[i];
    }
    state[InfectionState::Recovered] = initial[InfectionState::Recovered] + r;
    state[InfectionState::Dead] = initial[InfectionState::Dead] + d;
    state
}

/// `dt * sigma_SE` summed over each full day `(d-1, d]` of `(0, t_{n_max}]`.
fn daily_sums(history: &FlowHistory, dt: f64, n_max: i64) -> Vec<f64> {
    let days = (n_max as f64 * dt + 1e-9).floor() as usize;
    let mut out = vec![0.0; days];
    for k in 1..=n_max {
        let t = k as f64 * dt;
        let day = (t - 1e-9).ceil() as usize;
        if day >= 1 && day <= days {
            out[day - 1] += dt * history.get(TransitionId::SusceptibleToExposed, k);
        }
    }
    out
}
