use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Affine predictor `intercept + coef · x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub coef: Vec<f64>,
    pub intercept: f64,
    /// Set when the centred design had lower rank than its column count.
    #[serde(default)]
    pub rank_deficient: bool,
}

impl LinearFit {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        self.intercept + self.coef.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }
}

pub(crate) fn column_means(x: &Matrix) -> Vec<f64> {
    let mut m = vec![0.0; x.ncols()];
    for row in x.rows_iter() {
        for (a, v) in m.iter_mut().zip(row) {
            *a += v;
        }
    }
    let n = x.nrows().max(1) as f64;
    m.iter_mut().for_each(|a| *a /= n);
    m
}

fn centered(x: &Matrix, y: &[f64]) -> Result<(DMatrix<f64>, DVector<f64>, Vec<f64>, f64)> {
    if x.nrows() != y.len() {
        return Err(Error::Model(format!("{} rows but {} targets", x.nrows(), y.len())));
    }
    if y.is_empty() {
        return Err(Error::Model("cannot fit on zero rows".into()));
    }
    let xm = column_means(x);
    let ym = y.iter().sum::<f64>() / y.len() as f64;
    let a = DMatrix::from_fn(x.nrows(), x.ncols(), |r, c| x.get(r, c) - xm[c]);
    let b = DVector::from_iterator(y.len(), y.iter().map(|v| v - ym));
    Ok((a, b, xm, ym))
}

fn finish(coef: Vec<f64>, xm: &[f64], ym: f64, rank_deficient: bool) -> LinearFit {
    let intercept = ym - coef.iter().zip(xm).map(|(c, m)| c * m).sum::<f64>();
    LinearFit { coef, intercept, rank_deficient }
}

/// Minimum-norm least squares through an SVD of the centred design.
fn svd_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> (Vec<f64>, bool) {
    let p = a.ncols();
    if p == 0 {
        return (Vec::new(), false);
    }
    let svd = a.clone().svd(true, true);
    let (u, vt) = (svd.u.as_ref().expect("u requested"), svd.v_t.as_ref().expect("v_t requested"));
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let tol = smax * a.nrows().max(p) as f64 * f64::EPSILON;
    let mut coef = DVector::zeros(p);
    let mut rank = 0;
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > tol && s > 0.0 {
            rank += 1;
            let w = u.column(i).dot(b) / s;
            coef += vt.row(i).transpose() * w;
        }
    }
    (coef.iter().copied().collect(), rank < p)
}

/// Ordinary least squares with intercept.
pub fn fit_linear(x: &Matrix, y: &[f64]) -> Result<LinearFit> {
    let (a, b, xm, ym) = centered(x, y)?;
    let (coef, deficient) = svd_solve(&a, &b);
    if deficient {
        log::warn!("design matrix is rank deficient; using the minimum-norm solution");
    }
    Ok(finish(coef, &xm, ym, deficient))
}

/// Solves (XᵀX + λI)β = Xᵀy on centred data, leaving the intercept unpenalised.
pub fn fit_ridge(x: &Matrix, y: &[f64], lambda: f64) -> Result<LinearFit> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::Model(format!("ridge penalty must be finite and >= 0, got {lambda}")));
    }
    let (a, b, xm, ym) = centered(x, y)?;
    if lambda == 0.0 {
        let (coef, deficient) = svd_solve(&a, &b);
        return Ok(finish(coef, &xm, ym, deficient));
    }
    let p = a.ncols();
    let gram = a.transpose() * &a + DMatrix::identity(p, p) * lambda;
    let rhs = a.transpose() * &b;
    if let Some(ch) = gram.cholesky() {
        let sol = ch.solve(&rhs);
        if sol.iter().all(|v| v.is_finite()) {
            return Ok(finish(sol.iter().copied().collect(), &xm, ym, false));
        }
    }
    let (coef, deficient) = svd_solve(&a, &b);
    Ok(finish(coef, &xm, ym, deficient))
}
