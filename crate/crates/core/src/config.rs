//! JSON run configuration mirroring the parameter types.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::data::ReportedData;
use crate::distributions::{DistributionSet, TransitionDistribution, DEFAULT_EPSILON};
use crate::error::{Error, Result};
use crate::experiments::{
    ChangeDirection, ChangepointSetup, ConvergenceSetup, ScenarioSetup, SyntheticSetup,
};
use crate::ode::{reduce_ide_to_ode, OdeParameterSet, StayTimes};
use crate::types::{
    AgeDependentFactor, CompartmentState, ContactSchedule, ContactSegment, Infectiousness,
    ParameterSet, TransitionProbabilities,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dt: f64,
    pub t_end: f64,
    #[serde(default)]
    pub epsilon: Option<f64>,
    pub population: f64,
    pub probabilities: ProbabilitiesConfig,
    pub transmission: TransmissionConfig,
    pub distributions: DistributionsConfig,
    pub contact: Vec<ContactConfig>,
    #[serde(default)]
    pub initialization: Option<InitializationConfig>,
    /// Stay times for the ODE model; derived from the distributions if absent.
    #[serde(default)]
    pub ode_stay_times: Option<StayTimesConfig>,
    #[serde(default)]
    pub convergence: Option<ConvergenceConfig>,
    #[serde(default)]
    pub changepoint: Option<ChangepointConfig>,
    #[serde(default)]
    pub synthetic: Option<SyntheticConfig>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbabilitiesConfig {
    pub c_i: f64,
    pub i_h: f64,
    pub h_u: f64,
    pub u_d: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FactorConfig {
    Constant(f64),
    Tabulated { tau: Vec<f64>, value: Vec<f64> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransmissionConfig {
    pub rho_c: FactorConfig,
    pub rho_i: FactorConfig,
    pub xi_c: FactorConfig,
    pub xi_i: FactorConfig,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistributionConfig {
    Exponential { mean: f64 },
    Lognormal { mean: f64, std: f64 },
    SmootherCosine { support: f64 },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionsConfig {
    pub e_c: DistributionConfig,
    pub c_i: DistributionConfig,
    pub c_r: DistributionConfig,
    pub i_h: DistributionConfig,
    pub i_r: DistributionConfig,
    pub h_u: DistributionConfig,
    pub h_r: DistributionConfig,
    pub u_d: DistributionConfig,
    pub u_r: DistributionConfig,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContactConfig {
    pub start: f64,
    pub rate: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StayTimesConfig {
    pub e: f64,
    pub c: f64,
    pub i: f64,
    pub h: f64,
    pub u: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitializationConfig {
    /// Run the ODE model from `compartments` for `history_days` and use its
    /// flows as pre-history.
    OdeHistory {
        compartments: [f64; 8],
        history_days: f64,
    },
    /// Constant new transmissions per day.
    ConstantFlows {
        new_transmissions: f64,
        #[serde(default)]
        deaths: f64,
    },
    ReportedData {
        cases: PathBuf,
        #[serde(default)]
        icu: Option<PathBuf>,
        start_date: NaiveDate,
        #[serde(default = "one")]
        detection_ratio: f64,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceConfig {
    pub dts: Vec<f64>,
    pub reference_dt: f64,
    pub initial: [f64; 8],
    pub t_history: f64,
    pub t_max: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionConfig {
    Halve,
    Double,
    Keep,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChangepointConfig {
    pub direction: DirectionConfig,
    pub change_time: f64,
    pub new_transmissions: f64,
    #[serde(default)]
    pub deaths: f64,
}

/// Seeded generator for synthetic reported data.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    pub lead_days: u32,
    pub seed_new_transmissions: f64,
    pub seed_days: f64,
}

fn field<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Config(format!("{name}: {e}")))
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => {
                Error::Config(format!("config file not found: {}", path.display()))
            }
            _ => Error::Io(e),
        })?;
        let mut config: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        config.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(config)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    fn epsilon(&self) -> f64 {
        self.epsilon.unwrap_or(DEFAULT_EPSILON)
    }

    pub fn contact_schedule(&self) -> Result<ContactSchedule> {
        field(
            "contact",
            ContactSchedule::new(
                self.contact
                    .iter()
                    .map(|c| ContactSegment {
                        start: c.start,
                        rate: c.rate,
                    })
                    .collect(),
            ),
        )
    }

    pub fn probabilities(&self) -> Result<TransitionProbabilities> {
        let p = TransitionProbabilities {
            carrier_to_infected: self.probabilities.c_i,
            infected_to_hospitalized: self.probabilities.i_h,
            hospitalized_to_icu: self.probabilities.h_u,
            icu_to_dead: self.probabilities.u_d,
        };
        field("probabilities", p.validate())?;
        Ok(p)
    }

    pub fn distribution_set(&self) -> Result<DistributionSet> {
        let eps = self.epsilon();
        let build = |name: &str, d: DistributionConfig| {
            let dist = match d {
                DistributionConfig::Exponential { mean } => {
                    TransitionDistribution::exponential(mean)
                }
                DistributionConfig::Lognormal { mean, std } => {
                    TransitionDistribution::lognormal(mean, std)
                }
                DistributionConfig::SmootherCosine { support } => {
                    TransitionDistribution::smoother_cosine(support)
                }
            };
            field(
                &format!("distributions.{name}"),
                dist.and_then(|d| d.with_epsilon(eps)),
            )
        };
        let d = &self.distributions;
        Ok(DistributionSet {
            exposed_to_carrier: build("e_c", d.e_c)?,
            carrier_to_infected: build("c_i", d.c_i)?,
            carrier_to_recovered: build("c_r", d.c_r)?,
            infected_to_hospitalized: build("i_h", d.i_h)?,
            infected_to_recovered: build("i_r", d.i_r)?,
            hospitalized_to_icu: build("h_u", d.h_u)?,
            hospitalized_to_recovered: build("h_r", d.h_r)?,
            icu_to_dead: build("u_d", d.u_d)?,
            icu_to_recovered: build("u_r", d.u_r)?,
        })
    }

    pub fn parameters(&self) -> Result<ParameterSet> {
        let factor = |name: &str, f: &FactorConfig| {
            field(
                &format!("transmission.{name}"),
                match f {
                    FactorConfig::Constant(v) => AgeDependentFactor::constant(*v),
                    FactorConfig::Tabulated { tau, value } => {
                        AgeDependentFactor::tabulated(tau.clone(), value.clone())
                    }
                },
            )
        };
        let t = &self.transmission;
        let infectiousness = Infectiousness {
            rho_carrier: factor("rho_c", &t.rho_c)?,
            rho_infected: factor("rho_i", &t.rho_i)?,
            xi_carrier: factor("xi_c", &t.xi_c)?,
            xi_infected: factor("xi_i", &t.xi_i)?,
        };
        field(
            "population",
            ParameterSet::new(
                self.population,
                self.probabilities()?,
                self.contact_schedule()?,
                infectiousness,
                self.distribution_set()?,
            ),
        )
    }

    /// ODE parameters: explicit stay times if configured, the exact reduction
    /// for exponential setups, probability-weighted means otherwise.
    pub fn ode_parameters(&self) -> Result<OdeParameterSet> {
        let ide = self.parameters()?;
        let mut p = match reduce_ide_to_ode(&ide) {
            Ok(p) => p,
            Err(Error::NotReducible(_)) => {
                field("transmission", OdeParameterSet::weighted_from_ide(&ide))?
            }
            Err(e) => return Err(e),
        };
        if let Some(t) = self.ode_stay_times {
            p.stay_times = StayTimes {
                exposed: t.e,
                carrier: t.c,
                infected: t.i,
                hospitalized: t.h,
                icu: t.u,
            };
            field("ode_stay_times", p.validate())?;
        }
        Ok(p)
    }

    pub fn initialization(&self) -> Result<&InitializationConfig> {
        self.initialization
            .as_ref()
            .ok_or_else(|| Error::Config("initialization: missing block".into()))
    }

    pub fn reported_data(&self) -> Result<(ReportedData, NaiveDate, f64)> {
        match self.initialization()? {
            InitializationConfig::ReportedData {
                cases,
                icu,
                start_date,
                detection_ratio,
            } => {
                let mut data = ReportedData::from_csv_path(&self.resolve(cases))?;
                if let Some(icu) = icu {
                    data = data.with_icu_csv(&self.resolve(icu))?;
                }
                Ok((data, *start_date, *detection_ratio))
            }
            _ => Err(Error::Config(
                "initialization: reported_data method required".into(),
            )),
        }
    }

    pub fn convergence_setup(&self) -> Result<(Vec<f64>, ConvergenceSetup)> {
        let c = self
            .convergence
            .as_ref()
            .ok_or_else(|| Error::Config("convergence: missing block".into()))?;
        let initial = field("convergence.initial", CompartmentState::new(c.initial))?;
        Ok((
            c.dts.clone(),
            ConvergenceSetup {
                params: self.parameters()?,
                initial,
                reference_dt: c.reference_dt,
                t_history: c.t_history,
                t_max: c.t_max,
            },
        ))
    }

    pub fn changepoint_setup(&self) -> Result<(ChangeDirection, ChangepointSetup)> {
        let c = self
            .changepoint
            .ok_or_else(|| Error::Config("changepoint: missing block".into()))?;
        let direction = match c.direction {
            DirectionConfig::Halve => ChangeDirection::Halve,
            DirectionConfig::Double => ChangeDirection::Double,
            DirectionConfig::Keep => ChangeDirection::Keep,
        };
        Ok((
            direction,
            ChangepointSetup {
                params: self.parameters()?,
                ode: self.ode_parameters()?,
                dt: self.dt,
                t_end: self.t_end,
                change_time: c.change_time,
                new_transmissions: c.new_transmissions,
                deaths: c.deaths,
            },
        ))
    }

    /// The scenario start date comes from the reported-data initialization.
    pub fn synthetic_setup(&self) -> Result<SyntheticSetup> {
        let c = self
            .synthetic
            .ok_or_else(|| Error::Config("synthetic: missing block".into()))?;
        let start_date = match self.initialization()? {
            InitializationConfig::ReportedData { start_date, .. } => *start_date,
            _ => {
                return Err(Error::Config(
                    "initialization: reported_data method required".into(),
                ))
            }
        };
        Ok(SyntheticSetup {
            params: self.parameters()?,
            dt: self.dt,
            start_date,
            lead_days: c.lead_days,
            t_end: self.t_end,
            seed_new_transmissions: c.seed_new_transmissions,
            seed_days: c.seed_days,
        })
    }

    pub fn scenario_setup(&self) -> Result<ScenarioSetup> {
        let (data, start_date, detection_ratio) = self.reported_data()?;
        Ok(ScenarioSetup {
            params: self.parameters()?,
            data,
            start_date,
            dt: self.dt,
            t_end: self.t_end,
            detection_ratio,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "dt": 0.1,
        "t_end": 1.0,
        "population": 1000,
        "probabilities": {"c_i": 0.5, "i_h": 0.5, "h_u": 0.5, "u_d": 0.5},
        "transmission": {"rho_c": 1.0, "rho_i": 1.0, "xi_c": 1.0,
                         "xi_i": {"tau": [0.0, 5.0], "value": [1.0, 0.2]}},
        "distributions": {
            "e_c": {"family": "exponential", "mean": 1.4},
            "c_i": {"family": "exponential", "mean": 1.2},
            "c_r": {"family": "exponential", "mean": 1.2},
            "i_h": {"family": "lognormal", "mean": 6.6, "std": 4.9},
            "i_r": {"family": "exponential", "mean": 0.3},
            "h_u": {"family": "smoother_cosine", "support": 2.0},
            "h_r": {"family": "exponential", "mean": 0.3},
            "u_d": {"family": "exponential", "mean": 0.3},
            "u_r": {"family": "exponential", "mean": 0.3}
        },
        "contact": [{"start": 0.0, "rate": 1.0}, {"start": 0.5, "rate": 2.0}]
    }"#;

    #[test]
    fn parses_minimal_config() {
        let c = RunConfig::from_json(MINIMAL).unwrap();
        let p = c.parameters().unwrap();
        assert_eq!(p.population(), 1000.0);
        assert_eq!(p.contact().rate_at(0.7), 2.0);
        assert_eq!(p.infectiousness().xi_infected.eval(2.5), 0.6);
        // Age-dependent infectiousness has no ODE counterpart.
        assert!(c.ode_parameters().is_err());
        let constant = MINIMAL.replace(r#"{"tau": [0.0, 5.0], "value": [1.0, 0.2]}"#, "0.3");
        let c2 = RunConfig::from_json(&constant).unwrap();
        let ode = c2.ode_parameters().unwrap();
        assert_eq!(ode.xi_infected, 0.3);
        assert!((ode.stay_times.exposed - 1.4).abs() < 1e-12);
        assert!(c.initialization().is_err());
    }

    #[test]
    fn reports_failing_field() {
        let bad = MINIMAL.replace("\"c_i\": 0.5", "\"c_i\": 1.5");
        let err = RunConfig::from_json(&bad)
            .unwrap()
            .parameters()
            .unwrap_err();
        assert!(err.to_string().starts_with("probabilities"), "{err}");

        let bad = MINIMAL.replace("\"mean\": 1.4", "\"mean\": -1.4");
        let err = RunConfig::from_json(&bad)
            .unwrap()
            .parameters()
            .unwrap_err();
        assert!(err.to_string().contains("distributions.e_c"), "{err}");

        let bad = MINIMAL.replace("\"dt\": 0.1,", "");
        let err = RunConfig::from_json(&bad).unwrap_err();
        assert!(err.to_string().contains("dt"), "{err}");
    }
}
