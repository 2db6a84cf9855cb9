use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Inverse-distance weighted k-nearest-neighbour regressor (Euclidean).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnFit {
    pub k: usize,
    pub x: Matrix,
    pub y: Vec<f64>,
}

pub fn fit_knn(x: &Matrix, y: &[f64], k: usize) -> Result<KnnFit> {
    if x.nrows() != y.len() {
        return Err(Error::Model(format!("{} rows but {} targets", x.nrows(), y.len())));
    }
    if k == 0 || k > y.len() {
        return Err(Error::Domain(format!("k = {k} with {} training rows", y.len())));
    }
    Ok(KnnFit { k, x: x.clone(), y: y.to_vec() })
}

impl KnnFit {
    pub fn predict_row(&self, q: &[f64]) -> f64 {
        let mut d: Vec<(f64, usize)> = self
            .x
            .rows_iter()
            .enumerate()
            .map(|(i, r)| (r.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt(), i))
            .collect();
        let exact: Vec<f64> = d.iter().filter(|(dist, _)| *dist == 0.0).map(|&(_, i)| self.y[i]).collect();
        if !exact.is_empty() {
            return exact.iter().sum::<f64>() / exact.len() as f64;
        }
        let by_dist = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < d.len() {
            d.select_nth_unstable_by(self.k - 1, by_dist);
            d.truncate(self.k);
        }
        d.sort_by(by_dist);
        let (mut num, mut den) = (0.0, 0.0);
        for (dist, i) in d {
            let w = 1.0 / dist;
            num += w * self.y[i];
            den += w;
        }
        num / den
    }
}
