use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{ChangepointResult, ErrorReport};
use crate::data::ComparisonSeries;
use crate::error::Result;
use crate::ode::{OdeParameterSet, OdeSolution};
use crate::types::{InfectionState, SimulationResult, TransitionId};

pub const OUTPUT_HEADER: [&str; 20] = [
    "t", "S", "E", "C", "I", "H", "U", "R", "D", "lambda", "sigma_SE", "sigma_EC", "sigma_CI",
    "sigma_CR", "sigma_IH", "sigma_IR", "sigma_HU", "sigma_HR", "sigma_UD", "sigma_UR",
];

fn write_rows<W: Write>(out: W, rows: impl Iterator<Item = [f64; 20]>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(OUTPUT_HEADER)?;
    for row in rows {
        w.write_record(row.iter().map(|&v| fmt(v)))?;
    }
    w.flush()?;
    Ok(())
}

/// One row per grid point `t_0 ..= t_end` of an IDE run.
pub fn write_simulation_csv(path: &Path, result: &SimulationResult) -> Result<()> {
    let file = BufWriter::new(File::create(path)?);
    let rows = result.compartments.iter().enumerate().map(|(k, c)| {
        let mut row = [0.0; 20];
        row[0] = result.time(k);
        for s in InfectionState::ALL {
            row[1 + s.index()] = c[s];
        }
        row[9] = result.force_of_infection[k];
        for t in TransitionId::ALL {
            row[10 + t.index()] = result.flows.get(t, k as i64);
        }
        row
    });
    write_rows(file, rows)
}

/// One row per sample of an ODE run; `lambda` is `sigma_SE / S`.
pub fn write_ode_csv(path: &Path, solution: &OdeSolution, p: &OdeParameterSet) -> Result<()> {
    let file = BufWriter::new(File::create(path)?);
    let rows = solution.states.iter().enumerate().map(|(i, y)| {
        let t = solution.time(i);
        let flows = p.flows(y, p.contact.rate_at(t + 0.5 * solution.dt));
        let mut row = [0.0; 20];
        row[0] = t;
        for s in InfectionState::ALL {
            row[1 + s.index()] = y[s];
        }
        let s = y[InfectionState::Susceptible];
        row[9] = if s > 0.0 { flows[0] / s } else { 0.0 };
        row[10..].copy_from_slice(&flows);
        row
    });
    write_rows(file, rows)
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

/// `convergence.json` with the full report and `convergence.csv` with one
/// row per quantity: errors for each step size, then the fitted slope.
pub fn write_error_report(dir: &Path, report: &ErrorReport) -> Result<()> {
    let json = BufWriter::new(File::create(dir.join("convergence.json"))?);
    serde_json::to_writer_pretty(json, report)?;
    let mut w = csv::Writer::from_path(dir.join("convergence.csv"))?;
    let mut header = vec!["quantity".to_string()];
    header.extend(report.dts.iter().map(|dt| format!("dt={dt}")));
    header.push("slope".into());
    w.write_record(&header)?;
    for q in &report.quantities {
        let mut row = vec![q.name.clone()];
        row.extend(q.errors.iter().map(|&e| fmt(e)));
        row.push(fmt(q.slope));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// New transmissions of both models per grid point, and per day.
pub fn write_changepoint_csv(dir: &Path, result: &ChangepointResult) -> Result<()> {
    let dt = result.ide.grid.dt();
    let mut w = csv::Writer::from_path(dir.join("changepoint.csv"))?;
    w.write_record(["t", "ide_sigma_SE", "ode_sigma_SE"])?;
    for (k, (a, b)) in result
        .ide_new_transmissions
        .iter()
        .zip(&result.ode_new_transmissions)
        .enumerate()
    {
        w.write_record([fmt(k as f64 * dt), fmt(*a), fmt(*b)])?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(dir.join("changepoint_daily.csv"))?;
    w.write_record(["day", "ide_new_transmissions", "ode_new_transmissions"])?;
    for (d, (a, b)) in result.ide_daily.iter().zip(&result.ode_daily).enumerate() {
        w.write_record([(d + 1).to_string(), fmt(*a), fmt(*b)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_comparison_csv(path: &Path, series: &ComparisonSeries) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["t", "new_transmissions", "infected", "deaths"];
    if series.icu.is_some() {
        header.push("icu");
    }
    w.write_record(&header)?;
    for i in 0..series.t.len() {
        let mut row = vec![
            fmt(series.t[i]),
            fmt(series.new_transmissions[i]),
            fmt(series.infected[i]),
            fmt(series.deaths[i]),
        ];
        if let Some(icu) = &series.icu {
            row.push(fmt(icu[i]));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
