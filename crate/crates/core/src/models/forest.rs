use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

use super::tree::{grow_tree, GrowParams, Tree};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Features tried per split; `None` tries all.
    pub max_features: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self { n_trees: 100, max_depth: None, min_samples_leaf: 1, max_features: None, bootstrap: true, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestFit {
    pub trees: Vec<Tree>,
}

impl ForestFit {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict_row(x)).sum::<f64>() / self.trees.len() as f64
    }
}

/// Bagged variance-reduction trees. Each tree draws from its own generator
/// seeded from `seed`, so results do not depend on the thread pool.
pub fn fit_random_forest(x: &Matrix, y: &[f64], params: &ForestParams) -> Result<ForestFit> {
    let n = y.len();
    if x.nrows() != n || n == 0 {
        return Err(Error::Model(format!("{} rows but {n} targets", x.nrows())));
    }
    if params.n_trees == 0 || params.min_samples_leaf == 0 {
        return Err(Error::Model("forest needs n_trees >= 1 and min_samples_leaf >= 1".into()));
    }
    let mut master = ChaCha8Rng::seed_from_u64(params.seed);
    let seeds: Vec<u64> = (0..params.n_trees).map(|_| master.gen()).collect();
    let g: Vec<f64> = y.iter().map(|v| -v).collect();
    let h = vec![1.0; n];
    let grow = GrowParams {
        max_depth: params.max_depth,
        min_child_weight: params.min_samples_leaf as f64,
        lambda: 0.0,
        gamma: 0.0,
        max_features: params.max_features,
    };
    let trees = seeds
        .par_iter()
        .map(|&s| {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let samples = if params.bootstrap {
                (0..n).map(|_| rng.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            grow_tree(x, &g, &h, samples, grow, &mut rng)
        })
        .collect();
    Ok(ForestFit { trees })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{any, prop_assert, proptest, ProptestConfig};

    fn data(n: usize, seed: u64) -> (Matrix, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Matrix::new(n, 3, (0..n * 3).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap();
        let y = x.rows_iter().map(|r| 3.0 * r[0] - r[1] * r[2] + rng.gen_range(-0.1..0.1)).collect();
        (x, y)
    }

    #[test]
    fn depth_zero_predicts_mean() {
        let (x, y) = data(30, 1);
        let p = ForestParams { n_trees: 1, max_depth: Some(0), bootstrap: false, ..Default::default() };
        let f = fit_random_forest(&x, &y, &p).unwrap();
        let mean = y.iter().sum::<f64>() / 30.0;
        assert!((f.predict_row(&[0.3, 0.3, 0.3]) - mean).abs() < 1e-12);
    }

    #[test]
    fn step_function_fit_exactly() {
        let xs: Vec<f64> = (0..40).map(|i| if i < 20 { i as f64 * 0.01 } else { 0.8 + i as f64 * 0.001 }).collect();
        let y: Vec<f64> = xs.iter().map(|v| if *v > 0.5 { 1.0 } else { 0.0 }).collect();
        let x = Matrix::new(40, 1, xs).unwrap();
        for bootstrap in [false, true] {
            let p = ForestParams { n_trees: 25, bootstrap, seed: 3, ..Default::default() };
            let f = fit_random_forest(&x, &y, &p).unwrap();
            for (r, t) in y.iter().enumerate() {
                assert!((f.predict_row(x.row(r)) - t).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn same_seed_bit_identical() {
        let (x, y) = data(50, 2);
        let p = ForestParams { n_trees: 20, max_features: Some(2), seed: 9, ..Default::default() };
        let a = fit_random_forest(&x, &y, &p).unwrap();
        let b = fit_random_forest(&x, &y, &p).unwrap();
        assert_eq!(a, b);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let c = pool.install(|| fit_random_forest(&x, &y, &p).unwrap());
        assert_eq!(a, c);
        let other = fit_random_forest(&x, &y, &ForestParams { seed: 10, ..p }).unwrap();
        assert_ne!(a, other);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn predictions_within_target_range(seed in any::<u64>(), q in proptest::collection::vec(-1.0f64..2.0, 3)) {
            let (x, y) = data(25, seed);
            let f = fit_random_forest(&x, &y, &ForestParams { n_trees: 10, seed, ..Default::default() }).unwrap();
            let lo = y.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let p = f.predict_row(&q);
            prop_assert!(p >= lo - 1e-12 && p <= hi + 1e-12);
        }
    }
}
