use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;

/// Per-column mean and population standard deviation from training rows.
/// Constant columns keep a unit scale so they pass through centred only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &Matrix) -> Self {
        let (n, p) = (x.nrows(), x.ncols());
        let mut mean = vec![0.0; p];
        for row in x.rows_iter() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        let nf = n.max(1) as f64;
        mean.iter_mut().for_each(|m| *m /= nf);
        let mut var = vec![0.0; p];
        for row in x.rows_iter() {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var
            .into_iter()
            .map(|s| {
                let sd = (s / nf).sqrt();
                if sd > 0.0 && sd.is_finite() {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, std }
    }

    pub fn transform(&self, x: &Matrix) -> Matrix {
        let mut out = x.clone();
        for r in 0..out.nrows() {
            for ((v, m), s) in out.row_mut(r).iter_mut().zip(&self.mean).zip(&self.std) {
                *v = (*v - m) / s;
            }
        }
        out
    }

    pub fn transform_row(&self, row: &mut [f64]) {
        for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
            *v = (*v - m) / s;
        }
    }

    pub fn inverse_transform(&self, x: &Matrix) -> Matrix {
        let mut out = x.clone();
        for r in 0..out.nrows() {
            for ((v, m), s) in out.row_mut(r).iter_mut().zip(&self.mean).zip(&self.std) {
                *v = *v * s + m;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn population_statistics() {
        let x = Matrix::from_rows(&[vec![1.0, 5.0], vec![3.0, 5.0]]).unwrap();
        let s = Standardizer::fit(&x);
        assert_eq!(s.mean, vec![2.0, 5.0]);
        assert_eq!(s.std, vec![1.0, 1.0]);
        assert_eq!(s.transform(&x).as_slice(), &[-1.0, 0.0, 1.0, 0.0]);
    }

    proptest! {
        #[test]
        fn round_trip_identity(vals in proptest::collection::vec(-1e3f64..1e3, 12), constant in -5.0f64..5.0) {
            let rows: Vec<Vec<f64>> = vals.chunks(3).map(|c| vec![c[0], c[1], constant, c[2]]).collect();
            let x = Matrix::from_rows(&rows).unwrap();
            let s = Standardizer::fit(&x);
            prop_assert_eq!(s.std[2], 1.0);
            let back = s.inverse_transform(&s.transform(&x));
            for (a, b) in back.as_slice().iter().zip(x.as_slice()) {
                prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
            }
        }
    }
}
