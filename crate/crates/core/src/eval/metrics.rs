use crate::error::{Error, Result};

/// Coefficient of determination against the mean of `y`.
pub fn r2(y: &[f64], yhat: &[f64]) -> Result<f64> {
    if y.len() != yhat.len() || y.len() < 2 {
        return Err(Error::Metric(format!(
            "R² needs two equal-length vectors of at least 2 values, got {} and {}",
            y.len(),
            yhat.len()
        )));
    }
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_res: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum();
    let ss_tot: f64 = y.iter().map(|a| (a - mean) * (a - mean)).sum();
    if ss_tot == 0.0 {
        return Err(Error::Metric("R² is undefined for a constant target".into()));
    }
    Ok(1.0 - ss_res / ss_tot)
}

/// Root mean squared error, in the units of `y`.
pub fn rmse(y: &[f64], yhat: &[f64]) -> Result<f64> {
    if y.len() != yhat.len() || y.is_empty() {
        return Err(Error::Metric(format!("RMSE needs equal non-empty vectors, got {} and {}", y.len(), yhat.len())));
    }
    let ss: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((ss / y.len() as f64).sqrt())
}
