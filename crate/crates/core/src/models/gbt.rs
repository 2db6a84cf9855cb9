use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

use super::tree::{grow_tree, GrowParams, Tree};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbtParams {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub lambda_l2: f64,
    pub gamma_min_gain: f64,
    pub min_child_weight: f64,
    /// Row fraction drawn without replacement each round; 1.0 disables sampling.
    pub subsample: f64,
    pub seed: u64,
}

impl Default for GbtParams {
    fn default() -> Self {
        Self::xgb()
    }
}

impl GbtParams {
    /// Defaults in the style of XGBoost.
    pub fn xgb() -> Self {
        Self {
            n_rounds: 100,
            learning_rate: 0.3,
            max_depth: 6,
            lambda_l2: 1.0,
            gamma_min_gain: 0.0,
            min_child_weight: 1.0,
            subsample: 1.0,
            seed: 0,
        }
    }

    /// Defaults in the style of LightGBM (no L2, 20-sample leaves).
    pub fn lbm() -> Self {
        Self { learning_rate: 0.1, lambda_l2: 0.0, min_child_weight: 20.0, ..Self::xgb() }
    }

    /// Defaults in the style of CatBoost (more, smaller steps and stronger L2).
    pub fn cat() -> Self {
        Self { n_rounds: 200, learning_rate: 0.08, lambda_l2: 3.0, ..Self::xgb() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtFit {
    pub base_score: f64,
    pub learning_rate: f64,
    pub trees: Vec<Tree>,
}

impl GbtFit {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        self.base_score + self.learning_rate * self.trees.iter().map(|t| t.predict_row(x)).sum::<f64>()
    }
}

pub fn fit_gbt(x: &Matrix, y: &[f64], params: &GbtParams) -> Result<GbtFit> {
    fit_gbt_observed(x, y, params, |_, _| {})
}

/// Second-order boosting on squared error. `observe(round, train_mse)` runs
/// after each round.
pub fn fit_gbt_observed(x: &Matrix, y: &[f64], params: &GbtParams, mut observe: impl FnMut(usize, f64)) -> Result<GbtFit> {
    let n = y.len();
    if x.nrows() != n || n == 0 {
        return Err(Error::Model(format!("{} rows but {n} targets", x.nrows())));
    }
    if !(params.learning_rate > 0.0) || !(params.lambda_l2 >= 0.0) || !(params.subsample > 0.0 && params.subsample <= 1.0)
    {
        return Err(Error::Model(format!("invalid boosting parameters {params:?}")));
    }
    let base_score = y.iter().sum::<f64>() / n as f64;
    let mut pred = vec![base_score; n];
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let grow = GrowParams {
        max_depth: Some(params.max_depth),
        min_child_weight: params.min_child_weight,
        lambda: params.lambda_l2,
        gamma: params.gamma_min_gain,
        max_features: None,
    };
    let h = vec![1.0; n];
    let mut trees = Vec::with_capacity(params.n_rounds);
    for round in 0..params.n_rounds {
        let g: Vec<f64> = pred.iter().zip(y).map(|(p, t)| p - t).collect();
        let rows: Vec<usize> = if params.subsample < 1.0 {
            let m = ((n as f64 * params.subsample).round() as usize).clamp(1, n);
            let mut r = sample(&mut rng, n, m).into_vec();
            r.sort_unstable();
            r
        } else {
            (0..n).collect()
        };
        let tree = grow_tree(x, &g, &h, rows, grow, &mut rng);
        for (r, p) in pred.iter_mut().enumerate() {
            *p += params.learning_rate * tree.predict_row(x.row(r));
        }
        trees.push(tree);
        let mse = pred.iter().zip(y).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / n as f64;
        observe(round + 1, mse);
    }
    Ok(GbtFit { base_score, learning_rate: params.learning_rate, trees })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn zero_rounds_predict_mean() {
        let x = Matrix::new(3, 1, vec![0.0, 1.0, 2.0]).unwrap();
        let f = fit_gbt(&x, &[1.0, 2.0, 6.0], &GbtParams { n_rounds: 0, ..Default::default() }).unwrap();
        assert_eq!(f.predict_row(&[5.0]), 3.0);
    }

    #[test]
    fn single_split_leaf_values() {
        let x = Matrix::new(6, 1, vec![0.0, 0.1, 0.2, 0.8, 0.9, 1.0]).unwrap();
        let y = [1.0, 2.0, 3.0, 10.0, 11.0, 15.0];
        let p = GbtParams { n_rounds: 1, learning_rate: 1.0, max_depth: 1, lambda_l2: 0.0, ..Default::default() };
        let f = fit_gbt(&x, &y, &p).unwrap();
        let base = 42.0 / 6.0;
        assert_eq!(f.base_score, base);
        let (l, r) = (f.trees[0].predict_row(&[0.0]), f.trees[0].predict_row(&[1.0]));
        assert!((l - (2.0 - base)).abs() < 1e-12);
        assert!((r - (12.0 - base)).abs() < 1e-12);
    }

    #[test]
    fn training_loss_never_increases() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = Matrix::new(80, 4, (0..320).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let y: Vec<f64> = x.rows_iter().map(|r| r[0].sin() + r[1] * r[2] + rng.gen_range(-0.2..0.2)).collect();
        for p in [GbtParams::xgb(), GbtParams::lbm(), GbtParams::cat()] {
            let mut losses = Vec::new();
            fit_gbt_observed(&x, &y, &GbtParams { n_rounds: 50, ..p }, |_, l| losses.push(l)).unwrap();
            assert_eq!(losses.len(), 50);
            assert!(losses.windows(2).all(|w| w[1] <= w[0]), "{losses:?}");
        }
    }

    #[test]
    fn deterministic_with_subsampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = Matrix::new(40, 2, (0..80).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let y: Vec<f64> = x.rows_iter().map(|r| r[0] - r[1]).collect();
        let p = GbtParams { n_rounds: 10, subsample: 0.5, seed: 1, ..Default::default() };
        assert_eq!(fit_gbt(&x, &y, &p).unwrap(), fit_gbt(&x, &y, &p).unwrap());
        assert!(fit_gbt(&x, &y, &GbtParams { subsample: 0.0, ..p }).is_err());
    }
}
