use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use secir_ide::config::{InitializationConfig, RunConfig};
use secir_ide::data::build_initial_history;
use secir_ide::experiments::{
    changepoint_experiment, convergence_study, equilibrium_initialization, generate_synthetic_data,
    ode_equilibrium, ode_history_initialization, scenario_run, write_changepoint_csv,
    write_comparison_csv, write_error_report, write_ode_csv, write_simulation_csv,
};
use secir_ide::ode::rk_integrate;
use secir_ide::{CompartmentMode, CompartmentState, IdeSolver, InfectionState, SimulationResult};

/// Simulates the SECIR integro-differential model and its ODE counterpart.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    experiment: Experiment,
}

#[derive(Subcommand)]
enum Experiment {
    /// Single IDE run from the configured initialization.
    SimulateIde(Options),
    /// Single ODE run from the configured initialization.
    SimulateOde(Options),
    /// Convergence order of the IDE scheme against the ODE reduction.
    Convergence(Options),
    /// Both models with a contact change after equilibrium.
    Changepoint(Options),
    /// IDE and ODE runs initialized from reported data.
    Scenario(Options),
    /// Reported data from a seeded forward run.
    Synthesize(Options),
}

#[derive(Args)]
struct Options {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured step size.
    #[arg(long)]
    dt: Option<f64>,
    /// Overrides the configured end time in days.
    #[arg(long)]
    t_end: Option<f64>,
    /// Output directory; defaults to the configured one, then `out`.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Options {
    fn load(&self) -> Result<(RunConfig, PathBuf)> {
        let mut config = RunConfig::from_path(&self.config)?;
        if let Some(dt) = self.dt {
            config.dt = dt;
        }
        if let Some(t_end) = self.t_end {
            config.t_end = t_end;
        }
        let out = self
            .out
            .clone()
            .or_else(|| config.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("out"));
        std::fs::create_dir_all(&out)
            .with_context(|| format!("cannot create output directory {}", out.display()))?;
        Ok((config, out))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.experiment {
        Experiment::SimulateIde(o) => simulate_ide(o),
        Experiment::SimulateOde(o) => simulate_ode(o),
        Experiment::Convergence(o) => convergence(o),
        Experiment::Changepoint(o) => changepoint(o),
        Experiment::Scenario(o) => scenario(o),
        Experiment::Synthesize(o) => synthesize(o),
    };
    match outcome {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn final_summary(result: &SimulationResult) -> String {
    let y = result.final_state();
    format!(
        "t = {:.4}: S = {:.6e}, R = {:.6e}, D = {:.6e}",
        result.time(result.compartments.len() - 1),
        y[InfectionState::Susceptible],
        y[InfectionState::Recovered],
        y[InfectionState::Dead]
    )
}

fn simulate_ide(o: &Options) -> Result<String> {
    let (config, out) = o.load()?;
    let params = config.parameters()?;
    let (params, history, initial) = match config.initialization()? {
        InitializationConfig::OdeHistory {
            compartments,
            history_days,
        } => ode_history_initialization(
            &params,
            CompartmentState::new(*compartments)?,
            *history_days,
            config.dt,
        )?,
        InitializationConfig::ConstantFlows {
            new_transmissions,
            deaths,
        } => {
            let (h, s) =
                equilibrium_initialization(&params, config.dt, *new_transmissions, *deaths)?;
            (params, h, s)
        }
        InitializationConfig::ReportedData { .. } => {
            let (data, start, ratio) = config.reported_data()?;
            let (h, s) = build_initial_history(&data, &params, config.dt, start, ratio)?;
            (params, h, s)
        }
    };
    let result = IdeSolver::new(&params, history, initial, CompartmentMode::Update)?
        .simulate(config.t_end)?;
    let path = out.join("ide.csv");
    write_simulation_csv(&path, &result)?;
    Ok(format!(
        "simulate-ide: {} steps, {}; wrote {}",
        result.compartments.len() - 1,
        final_summary(&result),
        path.display()
    ))
}

fn simulate_ode(o: &Options) -> Result<String> {
    let (config, out) = o.load()?;
    let p = config.ode_parameters()?;
    let y0 = match config.initialization()? {
        InitializationConfig::OdeHistory { compartments, .. } => {
            CompartmentState::new(*compartments)?
        }
        InitializationConfig::ConstantFlows {
            new_transmissions,
            deaths,
        } => ode_equilibrium(&p, *new_transmissions, *deaths)?,
        InitializationConfig::ReportedData { .. } => {
            let (data, start, ratio) = config.reported_data()?;
            build_initial_history(&data, &config.parameters()?, config.dt, start, ratio)?.1
        }
    };
    let solution = rk_integrate(&p, y0, 0.0, config.t_end, config.dt)?;
    let path = out.join("ode.csv");
    write_ode_csv(&path, &solution, &p)?;
    let y = solution.states.last().expect("nonempty solution");
    Ok(format!(
        "simulate-ode: {} steps, t = {:.4}: S = {:.6e}, R = {:.6e}, D = {:.6e}; wrote {}",
        solution.len() - 1,
        solution.time(solution.len() - 1),
        y[InfectionState::Susceptible],
        y[InfectionState::Recovered],
        y[InfectionState::Dead],
        path.display()
    ))
}

fn convergence(o: &Options) -> Result<String> {
    let (config, out) = o.load()?;
    let (dts, setup) = config.convergence_setup()?;
    let report = convergence_study(&dts, &setup)?;
    write_error_report(&out, &report)?;
    let (lo, hi) = report
        .slopes()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, s)| {
            (lo.min(s), hi.max(s))
        });
    Ok(format!(
        "convergence: {} step sizes, slopes in [{lo:.4}, {hi:.4}]; wrote {}",
        dts.len(),
        out.join("convergence.csv").display()
    ))
}

fn changepoint(o: &Options) -> Result<String> {
    let (config, out) = o.load()?;
    let (direction, setup) = config.changepoint_setup()?;
    let result = changepoint_experiment(direction, &setup)?;
    write_changepoint_csv(&out, &result)?;
    write_simulation_csv(&out.join("ide.csv"), &result.ide)?;
    write_ode_csv(&out.join("ode.csv"), &result.ode, &result.ode_params)?;
    Ok(format!(
        "changepoint: jump IDE {:.4} ODE {:.4}, half-day drift IDE {:.3e} ODE {:.3e}; wrote {}",
        result.ide_jump,
        result.ode_jump,
        result.ide_drift,
        result.ode_drift,
        out.join("changepoint.csv").display()
    ))
}

fn scenario(o: &Options) -> Result<String> {
    let (config, out) = o.load()?;
    let setup = config.scenario_setup()?;
    let result = scenario_run(&setup)?;
    write_simulation_csv(&out.join("ide.csv"), &result.ide)?;
    write_ode_csv(&out.join("ode.csv"), &result.ode, &result.ode_params)?;
    if let Some(series) = &result.comparison {
        write_comparison_csv(&out.join("reported.csv"), series)?;
    }
    Ok(format!(
        "scenario from {}: IDE {}; wrote {}",
        setup.start_date,
        final_summary(&result.ide),
        out.display()
    ))
}

fn synthesize(o: &Options) -> Result<String> {
    let (config, out) = o.load()?;
    let setup = config.synthetic_setup()?;
    let synthetic = generate_synthetic_data(&setup)?;
    let cases = out.join("synthetic_cases.csv");
    synthetic.data.write_csv(&cases)?;
    write_simulation_csv(&out.join("generator.csv"), &synthetic.generator)?;
    Ok(format!(
        "synthesize: {} days from {}; wrote {}",
        synthetic.data.len(),
        synthetic.data.start_date(),
        cases.display()
    ))
}
