use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

use super::linear::{column_means, LinearFit};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElasticNetParams {
    pub alpha: f64,
    pub l1_ratio: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for ElasticNetParams {
    fn default() -> Self {
        Self { alpha: 1.0, l1_ratio: 0.5, max_iter: 10_000, tol: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElasticNetFit {
    pub linear: LinearFit,
    pub iterations: usize,
    pub converged: bool,
}

fn soft_threshold(z: f64, g: f64) -> f64 {
    if z > g {
        z - g
    } else if z < -g {
        z + g
    } else {
        0.0
    }
}

/// (1/2n)‖r‖² + α(ρ‖β‖₁ + (1−ρ)/2‖β‖²) for residual `r`.
fn objective(r: &[f64], beta: &[f64], p: &ElasticNetParams) -> f64 {
    let n = r.len() as f64;
    let rss: f64 = r.iter().map(|v| v * v).sum();
    let l1: f64 = beta.iter().map(|b| b.abs()).sum();
    let l2: f64 = beta.iter().map(|b| b * b).sum();
    rss / (2.0 * n) + p.alpha * (p.l1_ratio * l1 + (1.0 - p.l1_ratio) / 2.0 * l2)
}

pub fn fit_elastic_net(x: &Matrix, y: &[f64], params: &ElasticNetParams) -> Result<ElasticNetFit> {
    fit_elastic_net_observed(x, y, params, |_, _| {})
}

/// Cyclic coordinate descent; `observe(sweep, objective)` runs after every sweep.
/// The intercept is handled by centring and is not penalised.
pub fn fit_elastic_net_observed(
    x: &Matrix,
    y: &[f64],
    params: &ElasticNetParams,
    mut observe: impl FnMut(usize, f64),
) -> Result<ElasticNetFit> {
    let ElasticNetParams { alpha, l1_ratio, max_iter, tol } = *params;
    if !(alpha >= 0.0) || !(0.0..=1.0).contains(&l1_ratio) || !(tol > 0.0) {
        return Err(Error::Model(format!("invalid elastic-net parameters {params:?}")));
    }
    let (n, p) = (x.nrows(), x.ncols());
    if n != y.len() || n == 0 {
        return Err(Error::Model(format!("{n} rows but {} targets", y.len())));
    }
    let xm = column_means(x);
    let ym = y.iter().sum::<f64>() / n as f64;
    // Column-major centred copy.
    let cols: Vec<Vec<f64>> = (0..p).map(|c| (0..n).map(|r| x.get(r, c) - xm[c]).collect()).collect();
    let z: Vec<f64> = cols.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>() / n as f64).collect();
    let mut resid: Vec<f64> = y.iter().map(|v| v - ym).collect();
    let mut beta = vec![0.0; p];
    let (l1, l2) = (alpha * l1_ratio, alpha * (1.0 - l1_ratio));
    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < max_iter {
        sweeps += 1;
        let mut max_step = 0.0f64;
        for j in 0..p {
            let denom = z[j] + l2;
            let old = beta[j];
            let col = &cols[j];
            let rho = col.iter().zip(&resid).map(|(a, r)| a * r).sum::<f64>() / n as f64 + z[j] * old;
            let new = if denom > 0.0 { soft_threshold(rho, l1) / denom } else { 0.0 };
            if new != old {
                let d = new - old;
                for (r, a) in resid.iter_mut().zip(col) {
                    *r -= a * d;
                }
                beta[j] = new;
                max_step = max_step.max(d.abs());
            }
        }
        observe(sweeps, objective(&resid, &beta, params));
        if max_step < tol {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("elastic net stopped after {max_iter} sweeps without converging");
    }
    let intercept = ym - beta.iter().zip(&xm).map(|(b, m)| b * m).sum::<f64>();
    Ok(ElasticNetFit {
        linear: LinearFit { coef: beta, intercept, rank_deficient: false },
        iterations: sweeps,
        converged,
    })
}
