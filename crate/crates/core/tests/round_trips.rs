mod common;

use approx::assert_relative_eq;
use common::bundled_config;
use secir_ide::config::RunConfig;
use secir_ide::data::{build_initial_history, ReportedData};
use secir_ide::experiments::{generate_synthetic_data, SyntheticSetup};
use secir_ide::ode::reduce_ide_to_ode;
use secir_ide::{ContactSchedule, TransitionId};

#[test]
fn bundled_configs_build() {
    for name in [
        "exponential_convergence.json",
        "covid_changepoint.json",
        "covid_scenario.json",
    ] {
        let config = bundled_config(name);
        config.parameters().unwrap();
        config.ode_parameters().unwrap();
        config.initialization().unwrap();
    }
    assert!(bundled_config("exponential_convergence.json")
        .convergence_setup()
        .is_ok());
    assert!(bundled_config("covid_changepoint.json")
        .changepoint_setup()
        .is_ok());
    assert!(bundled_config("covid_scenario.json")
        .scenario_setup()
        .is_ok());
}

#[test]
fn config_json_round_trip() {
    let config = bundled_config("covid_scenario.json");
    let text = serde_json::to_string(&config).unwrap();
    let again = RunConfig::from_json(&text).unwrap();
    assert_eq!(
        format!("{:?}", config.parameters().unwrap()),
        format!("{:?}", again.parameters().unwrap())
    );
    assert_eq!(
        config.synthetic.unwrap().lead_days,
        again.synthetic.unwrap().lead_days
    );
}

#[test]
fn exponential_config_reduces_to_its_means() {
    let p = reduce_ide_to_ode(
        &bundled_config("exponential_convergence.json")
            .parameters()
            .unwrap(),
    )
    .unwrap();
    assert_eq!(p.stay_times.exposed, 1.4);
    assert_eq!(p.stay_times.carrier, 1.2);
    assert_eq!(p.stay_times.icu, 0.3);
}

#[test]
fn reported_data_csv_round_trip() {
    let data = ReportedData::from_csv_path(
        &std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/synthetic_cases.csv"),
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cases.csv");
    data.write_csv(&path).unwrap();
    assert_eq!(ReportedData::from_csv_path(&path).unwrap(), data);
}

#[test]
fn reconstructed_cases_match_generator_per_day() {
    let config = bundled_config("covid_scenario.json");
    let dt = 0.1;
    let params = config.parameters().unwrap();
    let params =
        params.with_contact(ContactSchedule::constant(params.contact().rate_at(0.0)).unwrap());
    let setup = SyntheticSetup {
        params: params.clone(),
        dt,
        start_date: "2020-10-01".parse().unwrap(),
        lead_days: 20,
        t_end: 30.0,
        seed_new_transmissions: 500.0,
        seed_days: 10.0,
    };
    let synthetic = generate_synthetic_data(&setup).unwrap();
    let (history, _) =
        build_initial_history(&synthetic.data, &params, dt, setup.start_date, 1.0).unwrap();

    let m = 10;
    let lead = setup.lead_days as i64 * m;
    let daily = |f: &dyn Fn(i64) -> f64, day: i64| -> f64 {
        (1..=m).map(|j| dt * f((day - 1) * m + j)).sum()
    };
    let generator = &synthetic.generator.flows;
    let mut compared = 0;
    for day in -15..=0 {
        let rec = daily(&|k| history.get(TransitionId::CarrierToInfected, k), day);
        let gen = daily(
            &|k| generator.get(TransitionId::CarrierToInfected, k + lead),
            day,
        );
        assert_relative_eq!(rec, gen, max_relative = 1e-9);
        compared += 1;
    }
    assert_eq!(compared, 16);
}
