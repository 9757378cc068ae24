//! Initialization of the IDE model from reported cumulative case and death
//! counts, and the extrapolated comparison series derived from them.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ide::DiscreteModel;
use crate::types::{
    CompartmentState, FlowHistory, InfectionState, ParameterSet, SimulationResult, TransitionId,
};

/// Daily cumulative counts starting at `start_date`; entry `i` belongs to
/// `start_date + i` days.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportedData {
    start_date: NaiveDate,
    cumulative_confirmed: Vec<f64>,
    cumulative_deaths: Vec<f64>,
    icu_occupancy: Option<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CaseRecord {
    date: NaiveDate,
    cumulative_confirmed: f64,
    cumulative_deaths: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct IcuRecord {
    date: NaiveDate,
    icu_occupancy: f64,
}

impl ReportedData {
    pub fn new(
        start_date: NaiveDate,
        cumulative_confirmed: Vec<f64>,
        cumulative_deaths: Vec<f64>,
    ) -> Result<Self> {
        if cumulative_confirmed.len() != cumulative_deaths.len() {
            return Err(Error::InconsistentData(format!(
                "{} confirmed values but {} death values",
                cumulative_confirmed.len(),
                cumulative_deaths.len()
            )));
        }
        if cumulative_confirmed.is_empty() {
            return Err(Error::InconsistentData("no reported data".into()));
        }
        check_cumulative("cumulative_confirmed", &cumulative_confirmed)?;
        check_cumulative("cumulative_deaths", &cumulative_deaths)?;
        Ok(ReportedData {
            start_date,
            cumulative_confirmed,
            cumulative_deaths,
            icu_occupancy: None,
        })
    }

    /// Attaches an ICU census covering the same days.
    pub fn with_icu(mut self, icu: Vec<f64>) -> Result<Self> {
        if icu.len() != self.len() {
            return Err(Error::InconsistentData(format!(
                "ICU series has {} days, case data {}",
                icu.len(),
                self.len()
            )));
        }
        if let Some(v) = icu.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InconsistentData(format!(
                "icu_occupancy must be finite and >= 0, got {v}"
            )));
        }
        self.icu_occupancy = Some(icu);
        Ok(self)
    }

    /// Reads `date,cumulative_confirmed,cumulative_deaths`.
    pub fn from_csv_path(path: &Path) -> Result<Self> {
        let file = open_input(path)?;
        Self::from_csv_reader(file)
    }

    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let records: Vec<CaseRecord> = read_records(reader)?;
        let dates: Vec<NaiveDate> = records.iter().map(|r| r.date).collect();
        check_contiguous(&dates)?;
        Self::new(
            dates[0],
            records.iter().map(|r| r.cumulative_confirmed).collect(),
            records.iter().map(|r| r.cumulative_deaths).collect(),
        )
    }

    /// Reads `date,icu_occupancy`; the dates must match the case data.
    pub fn with_icu_csv(self, path: &Path) -> Result<Self> {
        let records: Vec<IcuRecord> = read_records(open_input(path)?)?;
        let dates: Vec<NaiveDate> = records.iter().map(|r| r.date).collect();
        check_contiguous(&dates)?;
        if dates[0] != self.start_date {
            return Err(Error::InconsistentData(format!(
                "ICU data starts {} but case data starts {}",
                dates[0], self.start_date
            )));
        }
        self.with_icu(records.iter().map(|r| r.icu_occupancy).collect())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for i in 0..self.len() {
            w.serialize(CaseRecord {
                date: self.date(i),
                cumulative_confirmed: self.cumulative_confirmed[i],
                cumulative_deaths: self.cumulative_deaths[i],
            })?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn start_date(&self) -> NaiveDate {
        self.start_date
    }

    pub fn len(&self) -> usize {
        self.cumulative_confirmed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cumulative_confirmed.is_empty()
    }

    pub fn date(&self, i: usize) -> NaiveDate {
        self.start_date + Days::new(i as u64)
    }

    pub fn cumulative_confirmed(&self) -> &[f64] {
        &self.cumulative_confirmed
    }

    pub fn cumulative_deaths(&self) -> &[f64] {
        &self.cumulative_deaths
    }

    pub fn icu_occupancy(&self) -> Option<&[f64]> {
        self.icu_occupancy.as_deref()
    }

    /// Days from the first reported date to `date`.
    pub fn day_of(&self, date: NaiveDate) -> i64 {
        (date - self.start_date).num_days()
    }

    /// Confirmed cases at day `tau` (days since the start date), linearly
    /// interpolated.
    pub fn confirmed_at(&self, tau: f64) -> Result<f64> {
        interpolate(&self.cumulative_confirmed, tau, "cumulative_confirmed")
    }

    pub fn deaths_at(&self, tau: f64) -> Result<f64> {
        interpolate(&self.cumulative_deaths, tau, "cumulative_deaths")
    }
}

fn open_input(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => {
            Error::Config(format!("input file not found: {}", path.display()))
        }
        _ => Error::Io(e),
    })
}

fn read_records<R: Read, T: for<'de> Deserialize<'de>>(reader: R) -> Result<Vec<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let records = rdr
        .deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()?;
    if records.is_empty() {
        return Err(Error::InconsistentData("CSV file has no data rows".into()));
    }
    Ok(records)
}

fn check_contiguous(dates: &[NaiveDate]) -> Result<()> {
    for w in dates.windows(2) {
        let gap = (w[1] - w[0]).num_days();
        if gap != 1 {
            let what = if gap <= 0 { "out-of-order" } else { "gap in" };
            return Err(Error::InconsistentData(format!(
                "{what} dates between {} and {}",
                w[0], w[1]
            )));
        }
    }
    Ok(())
}

fn check_cumulative(name: &str, values: &[f64]) -> Result<()> {
    if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::InconsistentData(format!(
            "{name} must be finite and >= 0, got {v}"
        )));
    }
    if let Some(i) = values.windows(2).position(|w| w[1] < w[0]) {
        return Err(Error::InconsistentData(format!(
            "{name} decreases from {} to {} at day {}",
            values[i],
            values[i + 1],
            i + 1
        )));
    }
    Ok(())
}

fn interpolate(values: &[f64], tau: f64, name: &str) -> Result<f64> {
    let last = (values.len() - 1) as f64;
    // Allow arguments a rounding error outside the covered range.
    let tol = 1e-9;
    if !(tau >= -tol && tau <= last + tol) {
        return Err(Error::Coverage(format!(
            "{name} needed at day {tau}, data covers days 0..={last}"
        )));
    }
    let tau = tau.clamp(0.0, last);
    let lo = tau.floor() as usize;
    let w = tau - lo as f64;
    if w == 0.0 || lo + 1 >= values.len() {
        return Ok(values[lo]);
    }
    Ok((1.0 - w) * values[lo] + w * values[lo + 1])
}

/// New cases per day as first differences of a cumulative series.
pub fn daily_flow_from_cumulative(cum: &[f64]) -> Result<Vec<f64>> {
    check_cumulative("cumulative series", cum)?;
    Ok(cum.windows(2).map(|w| w[1] - w[0]).collect())
}

/// Number of grid steps per day; `dt` must divide one day.
pub fn steps_per_day(dt: f64) -> Result<usize> {
    crate::types::grid_steps(1.0, dt)
        .filter(|&m| m >= 1)
        .map(|m| m as usize)
        .ok_or_else(|| Error::InvalidGrid(format!("dt = {dt} does not divide one day")))
}

/// Spreads daily interval counts onto the intervals of length `dt`.
///
/// Within day `n` the values follow the line between the previous and the
/// current daily count and are rescaled to add up to the daily count; the
/// first day is spread evenly.
pub fn interpolate_subdaily(daily: &[f64], dt: f64) -> Result<Vec<f64>> {
    let m = steps_per_day(dt)?;
    if let Some(v) = daily.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::InconsistentData(format!(
            "daily counts must be finite and >= 0, got {v}"
        )));
    }
    let mut out = Vec::with_capacity(daily.len() * m);
    let mut raw = vec![0.0; m];
    for (n, &v) in daily.iter().enumerate() {
        let prev = if n == 0 { v } else { daily[n - 1] };
        for (k, r) in raw.iter_mut().enumerate() {
            let frac = (k + 1) as f64 / m as f64;
            *r = prev + frac * (v - prev);
        }
        let total: f64 = raw.iter().sum();
        if total > 0.0 {
            out.extend(raw.iter().map(|r| r * v / total));
        } else {
            out.extend(std::iter::repeat_n(0.0, m));
        }
    }
    Ok(out)
}

/// Mean stay time rounded to the nearest number of steps, ties rounded up.
pub fn mean_shift_steps(t: f64, dt: f64) -> usize {
    let ratio = t / dt;
    // Snap values within rounding noise of a half-integer before rounding up.
    let snapped = if ((ratio - ratio.floor()) - 0.5).abs() < 1e-9 {
        ratio.floor() + 0.5
    } else {
        ratio
    };
    (snapped + 0.5).floor().max(0.0) as usize
}

/// Interval flows into `C` and `E` obtained by shifting the flow into `I`.
#[derive(Debug, Clone, PartialEq)]
pub struct BackshiftedFlows {
    /// Steps of the shift `[T_C^I]`.
    pub shift_ec: usize,
    /// Steps of the shift `[T_E^C + T_C^I]`.
    pub shift_se: usize,
    /// `sigma_CI(t_i + [T_C^I]) / mu_C^I` for every `i` with data.
    pub exposed_to_carrier: Vec<f64>,
    pub susceptible_to_exposed: Vec<f64>,
}

/// Shifts the `C -> I` interval flows back by the mean stay times and scales
/// by `1 / mu_C^I`. Entry `i` of each output belongs to grid point `i` of the
/// input.
pub fn backshift_flows(
    sigma_ci: &[f64],
    params: &ParameterSet,
    dt: f64,
) -> Result<BackshiftedFlows> {
    let mu = params.probabilities().carrier_to_infected;
    if mu <= 0.0 {
        return Err(Error::InvalidParameter(
            "mu_CI must be positive to infer earlier flows from cases".into(),
        ));
    }
    let d = params.distributions();
    let t_ci = d.carrier_to_infected.mean_stay_time();
    let t_ec = d.exposed_to_carrier.mean_stay_time();
    let shift_ec = mean_shift_steps(t_ci, dt);
    let shift_se = mean_shift_steps(t_ec + t_ci, dt);
    if sigma_ci.len() <= shift_se {
        return Err(Error::Coverage(format!(
            "{} case values cannot be shifted by {shift_se} steps",
            sigma_ci.len()
        )));
    }
    let shifted = |s: usize| sigma_ci[s..].iter().map(|v| v / mu).collect::<Vec<f64>>();
    Ok(BackshiftedFlows {
        shift_ec,
        shift_se,
        exposed_to_carrier: shifted(shift_ec),
        susceptible_to_exposed: shifted(shift_se),
    })
}

/// Flows on the pre-history and compartments at `t0_date` derived from the
/// reported data.
///
/// Reported counts are divided by `detection_ratio` (1 means every case is
/// reported). The pre-history spans the longest kernel support plus the
/// longest backwards shift.
pub fn build_initial_history(
    data: &ReportedData,
    params: &ParameterSet,
    dt: f64,
    t0_date: NaiveDate,
    detection_ratio: f64,
) -> Result<(FlowHistory, CompartmentState)> {
    if !(detection_ratio > 0.0 && detection_ratio <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "detection ratio must lie in (0, 1], got {detection_ratio}"
        )));
    }
    let m = steps_per_day(dt)?;
    let model = DiscreteModel::new(params, dt)?;
    let daily: Vec<f64> = daily_flow_from_cumulative(data.cumulative_confirmed())?
        .into_iter()
        .map(|v| v / detection_ratio)
        .collect();
    let sub = interpolate_subdaily(&daily, dt)?;
    let back = backshift_flows(&sub, params, dt)?;

    let len = model.max_support_steps() + back.shift_se;
    let tau0 = data.day_of(t0_date);
    // Sub-daily entry p covers the interval ending at (p + 1) * dt days after
    // the start date, so grid index j maps to p = tau0 * m + j - 1.
    let p_first = tau0 * m as i64 - len as i64;
    let p_last = tau0 * m as i64 + back.shift_se as i64 - 1;
    if p_first < 0 || p_last >= sub.len() as i64 {
        let first_day = t0_date - Days::new(len.div_ceil(m) as u64);
        return Err(Error::Coverage(format!(
            "initialization at {t0_date} needs case data from {first_day} to {}; data covers {} to {}",
            t0_date + Days::new((back.shift_se.div_ceil(m)) as u64),
            data.start_date(),
            data.date(data.len() - 1)
        )));
    }
    let p0 = p_first as usize;
    let mut columns: [Vec<f64>; 10] = std::array::from_fn(|_| vec![0.0; len]);
    for i in 0..len {
        let p = p0 + i;
        columns[TransitionId::CarrierToInfected.index()][i] = sub[p] / dt;
        columns[TransitionId::ExposedToCarrier.index()][i] = back.exposed_to_carrier[p] / dt;
        columns[TransitionId::SusceptibleToExposed.index()][i] =
            back.susceptible_to_exposed[p] / dt;
    }
    let mut history = FlowHistory::from_columns(dt, 1 - len as i64, columns)?;
    use TransitionId::*;
    model.fill_flows(
        &mut history,
        &[
            CarrierToRecovered,
            InfectedToHospitalized,
            InfectedToRecovered,
            HospitalizedToIntensiveCare,
            HospitalizedToRecovered,
            IntensiveCareToDead,
            IntensiveCareToRecovered,
        ],
    );

    let n = params.population();
    let transient = model.transient_compartments(&history, 0);
    let (recovered, _) = model.accumulated_removed(&history, history.first_index(), 0);
    let dead = data.deaths_at(tau0 as f64 - death_shift(params))?;
    if dead >= n {
        return Err(Error::InconsistentData(format!(
            "{dead} deaths at the start exceed the population {n}"
        )));
    }
    let occupied = transient.iter().sum::<f64>() + recovered + dead;
    let susceptible = n - occupied;
    if susceptible < 0.0 {
        return Err(Error::InconsistentData(format!(
            "reported data imply {occupied} non-susceptible persons, more than the population {n}"
        )));
    }
    let mut values = [0.0; 8];
    values[InfectionState::Susceptible.index()] = susceptible;
    values[1..6].copy_from_slice(&transient);
    values[InfectionState::Recovered.index()] = recovered;
    values[InfectionState::Dead.index()] = dead;
    Ok((history, CompartmentState::new(values)?))
}

/// `T_I^H + T_H^U + T_U^D`, the mean time from symptom onset to death.
pub fn death_shift(params: &ParameterSet) -> f64 {
    let d = params.distributions();
    d.infected_to_hospitalized.mean_stay_time()
        + d.hospitalized_to_icu.mean_stay_time()
        + d.icu_to_dead.mean_stay_time()
}

/// Reported-data estimates to compare simulations against, on the days
/// covered by every shift.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonSeries {
    /// Days relative to the reference date.
    pub t: Vec<f64>,
    pub new_transmissions: Vec<f64>,
    pub infected: Vec<f64>,
    pub deaths: Vec<f64>,
    /// ICU census on the same days, when reported.
    pub icu: Option<Vec<f64>>,
}

/// Extrapolated new transmissions, symptomatic infected and deaths derived
/// from the reported series by mean stay-time shifts.
pub fn extrapolate_comparison_series(
    data: &ReportedData,
    params: &ParameterSet,
    reference_date: NaiveDate,
) -> Result<ComparisonSeries> {
    let mu = params.probabilities();
    if mu.carrier_to_infected <= 0.0 {
        return Err(Error::InvalidParameter(
            "mu_CI must be positive to infer transmissions from cases".into(),
        ));
    }
    let d = params.distributions();
    let ahead = d.exposed_to_carrier.mean_stay_time() + d.carrier_to_infected.mean_stay_time();
    let t_ih = d.infected_to_hospitalized.mean_stay_time();
    let t_ir = d.infected_to_recovered.mean_stay_time();
    let back = death_shift(params).max(t_ih).max(t_ir).max(1.0 - ahead);
    let last = (data.len() - 1) as f64;
    let first_day = back.ceil() as i64;
    let last_day = (last - ahead).floor() as i64;
    if first_day > last_day {
        return Err(Error::Coverage(
            "reported data too short for the comparison shifts".into(),
        ));
    }
    let offset = data.day_of(reference_date) as f64;
    let mut out = ComparisonSeries {
        t: Vec::new(),
        new_transmissions: Vec::new(),
        infected: Vec::new(),
        deaths: Vec::new(),
        icu: data.icu_occupancy().map(|_| Vec::new()),
    };
    for day in first_day..=last_day {
        let tau = day as f64;
        let sigma = (data.confirmed_at(tau + ahead)? - data.confirmed_at(tau + ahead - 1.0)?)
            / mu.carrier_to_infected;
        let now = data.confirmed_at(tau)?;
        let infected = mu.infected_to_hospitalized * (now - data.confirmed_at(tau - t_ih)?)
            + (1.0 - mu.infected_to_hospitalized) * (now - data.confirmed_at(tau - t_ir)?);
        out.t.push(tau - offset);
        out.new_transmissions.push(sigma);
        out.infected.push(infected);
        out.deaths.push(data.deaths_at(tau - death_shift(params))?);
        if let (Some(icu), Some(series)) = (data.icu_occupancy(), out.icu.as_mut()) {
            series.push(icu[day as usize]);
        }
    }
    Ok(out)
}

/// Reported data consistent with a simulated run.
///
/// Cumulative confirmed cases are the integrated `C -> I` flow of the run,
/// one row per day of simulated time (day 0 is the run's `t = 0`, dated
/// `start_date`), beginning one day before the pre-history. Cumulative
/// deaths are the run's `D` moved back by the mean time from symptom onset
/// to death, with the two rows around `t0 - shift` adjusted so that linear
/// interpolation reproduces `D(t0)` exactly.
pub fn synthesize_reported_data(
    run: &SimulationResult,
    params: &ParameterSet,
    start_date: NaiveDate,
    t0: f64,
) -> Result<ReportedData> {
    let dt = run.grid.dt();
    let m = steps_per_day(dt)? as i64;
    let first_k = run.flows.first_index();
    let n_max = run.compartments.len() as i64 - 1;
    let shift = death_shift(params);
    let first_day = (first_k as f64 * dt).floor() as i64 - 1;
    let last_day = ((n_max as f64 * dt - shift).floor() as i64).min(n_max / m);
    if last_day <= first_day || t0 < 0.0 || t0 > last_day as f64 {
        return Err(Error::Coverage(format!(
            "run of {} days is too short to synthesize data up to t0 = {t0}",
            n_max as f64 * dt
        )));
    }

    let dead_at = |t: f64| -> f64 {
        let x = t / dt;
        if x <= 0.0 {
            return run.compartments[0][InfectionState::Dead];
        }
        let lo = (x.floor() as usize).min(n_max as usize);
        let w = x - lo as f64;
        let d_lo = run.compartments[lo][InfectionState::Dead];
        if w < 1e-9 || lo as i64 >= n_max {
            d_lo
        } else {
            (1.0 - w) * d_lo + w * run.compartments[lo + 1][InfectionState::Dead]
        }
    };

    let mut confirmed = Vec::new();
    let mut deaths = Vec::new();
    let mut total = 0.0;
    let mut k = first_k;
    for day in first_day..=last_day {
        while k <= day * m {
            total += dt * run.flows.get(TransitionId::CarrierToInfected, k);
            k += 1;
        }
        confirmed.push(total);
        deaths.push(dead_at(day as f64 + shift));
    }

    // Make D_rep(t0) = D(t0) exact.
    let target = t0 - shift;
    let lo = target.floor();
    let w = target - lo;
    let i_lo = (lo as i64 - first_day) as usize;
    let d0 = dead_at(t0);
    if w < 1e-12 {
        deaths[i_lo] = d0;
    } else if i_lo + 1 < deaths.len() {
        deaths[i_lo] = (d0 - w * deaths[i_lo + 1]) / (1.0 - w);
    }

    let start = if first_day < 0 {
        start_date.checked_sub_days(Days::new(first_day.unsigned_abs()))
    } else {
        start_date.checked_add_days(Days::new(first_day as u64))
    }
    .ok_or_else(|| Error::InvalidParameter("start date out of range".into()))?;
    ReportedData::new(start, confirmed, deaths)
}
