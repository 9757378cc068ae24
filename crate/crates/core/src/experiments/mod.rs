//! Numerical experiments: convergence order against the ODE model, contact
//! change points and the data-initialized scenario.

mod changepoint;
mod convergence;
mod output;
mod scenario;
mod synthetic;

pub use changepoint::{
    changepoint_experiment, equilibrium_initialization, ode_equilibrium, ChangeDirection,
    ChangepointResult, ChangepointSetup,
};
pub use convergence::{
    convergence_study, ode_history_initialization, ConvergenceSetup, ErrorReport, QuantityErrors,
};
pub use output::{
    write_changepoint_csv, write_comparison_csv, write_error_report, write_ode_csv,
    write_simulation_csv, OUTPUT_HEADER,
};
pub use scenario::{scenario_run, ScenarioResult, ScenarioSetup};
pub use synthetic::{
    generate_synthetic_data, history_from_transmissions, round_trip, seeded_initialization,
    RoundTrip, SyntheticData, SyntheticSetup,
};

use crate::error::{Error, Result};

/// `||u - u_ref||_2 / ||u_ref||_2` with `||u||_2 = (dt * sum u_i^2)^(1/2)`.
///
/// Both series must hold the values at the same grid points.
pub fn discrete_l2_error(u: &[f64], u_ref: &[f64], dt: f64) -> Result<f64> {
    if u.len() != u_ref.len() {
        return Err(Error::InvalidParameter(format!(
            "series lengths differ: {} vs {}",
            u.len(),
            u_ref.len()
        )));
    }
    let diff: f64 = u.iter().zip(u_ref).map(|(a, b)| (a - b) * (a - b)).sum();
    let norm: f64 = u_ref.iter().map(|b| b * b).sum();
    if norm == 0.0 {
        return Err(Error::InvalidParameter(
            "reference series has zero norm".into(),
        ));
    }
    Ok((dt * diff).sqrt() / (dt * norm).sqrt())
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn l2_error_examples() {
        let r = [1.0, 2.0, 3.0];
        assert_eq!(discrete_l2_error(&r, &r, 0.1).unwrap(), 0.0);
        let doubled = [2.0, 4.0, 6.0];
        assert!((discrete_l2_error(&doubled, &r, 0.1).unwrap() - 1.0).abs() < 1e-15);
        let ten = [10.0; 7];
        let eleven = [11.0; 7];
        assert!((discrete_l2_error(&eleven, &ten, 0.5).unwrap() - 0.1).abs() < 1e-15);
        assert!(discrete_l2_error(&r, &[0.0; 3], 0.1).is_err());
    }

    #[test]
    fn slope_of_power_law() {
        let x = [0.1, 0.05, 0.01];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(1.5)).collect();
        assert!((log_log_slope(&x, &y) - 1.5).abs() < 1e-12);
    }
}
