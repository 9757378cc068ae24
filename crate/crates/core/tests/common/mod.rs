#![allow(dead_code)]

use std::path::PathBuf;

use proptest::prelude::*;
use secir_ide::config::RunConfig;
use secir_ide::experiments::history_from_transmissions;
use secir_ide::{
    AgeDependentFactor, CompartmentState, ContactSchedule, DistributionSet, FlowHistory,
    InfectionState, Infectiousness, ParameterSet, SimulationResult, TransitionDistribution,
    TransitionId, TransitionProbabilities,
};

pub fn bundled_config(name: &str) -> RunConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name);
    RunConfig::from_path(&path).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[derive(Debug, Clone)]
pub struct Case {
    pub params: ParameterSet,
    pub dt: f64,
    pub history: FlowHistory,
    pub initial: CompartmentState,
    pub t_end: f64,
}

pub fn arb_distribution() -> impl Strategy<Value = TransitionDistribution> {
    prop_oneof![
        (0.1f64..8.0).prop_map(|m| TransitionDistribution::exponential(m).unwrap()),
        (0.3f64..5.0, 0.1f64..0.75).prop_map(|(m, cv)| TransitionDistribution::lognormal(
            m,
            cv * m
        )
        .unwrap()),
        (0.2f64..8.0).prop_map(|s| TransitionDistribution::smoother_cosine(s).unwrap()),
    ]
}

fn arb_probability() -> impl Strategy<Value = f64> {
    prop_oneof![1 => Just(0.0), 1 => Just(1.0), 6 => 0.0f64..1.0]
}

fn arb_probabilities() -> impl Strategy<Value = TransitionProbabilities> {
    (
        arb_probability(),
        arb_probability(),
        arb_probability(),
        arb_probability(),
    )
        .prop_map(|(a, b, c, d)| TransitionProbabilities {
            carrier_to_infected: a,
            infected_to_hospitalized: b,
            hospitalized_to_icu: c,
            icu_to_dead: d,
        })
        .prop_filter("all deaths", |p| p.validate().is_ok())
}

fn arb_distribution_set() -> impl Strategy<Value = DistributionSet> {
    proptest::collection::vec(arb_distribution(), 9).prop_map(|d| DistributionSet {
        exposed_to_carrier: d[0],
        carrier_to_infected: d[1],
        carrier_to_recovered: d[2],
        infected_to_hospitalized: d[3],
        infected_to_recovered: d[4],
        hospitalized_to_icu: d[5],
        hospitalized_to_recovered: d[6],
        icu_to_dead: d[7],
        icu_to_recovered: d[8],
    })
}

pub fn arb_params() -> impl Strategy<Value = ParameterSet> {
    (
        2.0f64..7.0,
        arb_probabilities(),
        0.0f64..10.0,
        proptest::array::uniform4(0.0f64..1.0),
        arb_distribution_set(),
    )
        .prop_map(|(log_n, mu, phi, f, dists)| {
            let factor = |v: f64| AgeDependentFactor::constant(v).unwrap();
            ParameterSet::new(
                10f64.powf(log_n),
                mu,
                ContactSchedule::constant(phi).unwrap(),
                Infectiousness {
                    rho_carrier: factor(f[0]),
                    rho_infected: factor(f[1]),
                    xi_carrier: factor(f[2]),
                    xi_infected: factor(f[3]),
                },
                dists,
            )
            .unwrap()
        })
}

/// Random parameters with a random pre-history of new transmissions that
/// infected up to 90 % of the population.
pub fn arb_case() -> impl Strategy<Value = Case> {
    (
        arb_params(),
        prop::sample::select(vec![0.1, 0.2, 0.25, 0.5, 1.0]),
        proptest::collection::vec(0.0f64..1.0, 1..60),
        0.0f64..0.9,
        5.0f64..30.0,
    )
        .prop_map(|(params, dt, shape, infected, t_end)| {
            let total: f64 = shape.iter().sum();
            let scale = if total > 0.0 {
                infected * params.population() / (dt * total)
            } else {
                0.0
            };
            let se: Vec<f64> = shape.iter().map(|v| v * scale).collect();
            let (history, initial) = history_from_transmissions(&params, dt, &se).unwrap();
            Case {
                params,
                dt,
                history,
                initial,
                t_end: (t_end / dt).round() * dt,
            }
        })
}

/// Checks positivity, boundedness, monotonicity and mass conservation of a
/// run; compartments may dip below zero by `1e-12 N` of roundoff.
pub fn check_invariants(result: &SimulationResult, n: f64) -> Result<(), String> {
    let roundoff = 1e-12 * n;
    for t in TransitionId::ALL {
        if let Some(v) = result.flows.series(t).iter().find(|v| !(**v >= 0.0)) {
            return Err(format!("flow {t} = {v}"));
        }
    }
    if let Some(l) = result.force_of_infection.iter().find(|l| !(**l >= 0.0)) {
        return Err(format!("lambda = {l}"));
    }
    for (k, y) in result.compartments.iter().enumerate() {
        for s in InfectionState::ALL {
            if !(y[s] >= -roundoff && y[s] <= n + roundoff) {
                return Err(format!("{s} = {} at step {k}", y[s]));
            }
        }
        if !(y[InfectionState::Dead] < n) {
            return Err(format!("D = {} at step {k}", y[InfectionState::Dead]));
        }
    }
    for (k, w) in result.compartments.windows(2).enumerate() {
        use InfectionState::*;
        if w[1][Susceptible] > w[0][Susceptible] {
            return Err(format!("S increases at step {}", k + 1));
        }
        if w[1][Recovered] < w[0][Recovered] || w[1][Dead] < w[0][Dead] {
            return Err(format!("R or D decreases at step {}", k + 1));
        }
    }
    let residual = result.max_mass_residual(n);
    if residual > 1e-9 * n {
        return Err(format!("mass residual {residual}"));
    }
    Ok(())
}

/// Most negative compartment value relative to `N` over a run.
pub fn min_relative_compartment(result: &SimulationResult, n: f64) -> f64 {
    result
        .compartments
        .iter()
        .flat_map(|y| y.values().iter().copied())
        .fold(f64::INFINITY, f64::min)
        / n
}
