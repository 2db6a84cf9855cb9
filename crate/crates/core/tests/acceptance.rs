//! Acceptance criteria, one PASS/FAIL line each.

use std::collections::HashMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use lagoon_chl::eval::{
    cross_validate, evaluate_ensemble, r2, rmse, stack_ridge, stratified_kfold, CvOptions, EvalReport, SplitPlan,
    REPORT_MODELS,
};
use lagoon_chl::features::{
    enumerate_positions, window_mean, FeatureTable, IndexFamily, RowKey, SpectralIndex,
};
use lagoon_chl::ingest::{DepthBin, Processor};
use lagoon_chl::mapping::read_predictions_csv;
use lagoon_chl::matrix::Matrix;
use lagoon_chl::models::{
    fit_elastic_net, fit_gbt_observed, fit_knn, fit_linear, fit_random_forest, Activation, ElasticNetParams, ForestParams,
    GbtParams, Mlp, ModelSpec, TrainedModel,
};
use lagoon_chl::pipeline::{Pipeline, PipelineConfig};
use lagoon_chl::raster::{rasterize_polygon, Band, BandStack, GeoTransform, Polygon};
use lagoon_chl::synthetic::{SyntheticInputs, SyntheticWorld};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

const METRIC_REL_TOL: f64 = 1e-12;
const METRIC_BUDGET: Duration = Duration::from_secs(1);
const INDEX_TOL: f64 = 1e-12;
const INDEX_BUDGET: Duration = Duration::from_secs(10);
const WINDOW_TOL: f64 = 1e-12;
const OLS_TOL: f64 = 1e-10;
const ELN_OLS_TOL: f64 = 1e-6;
const MLP_GRAD_REL_TOL: f64 = 1e-4;
const PASS_THROUGH_TOL: f64 = 1e-6;
const E2E_MIN_TEST_R2: f64 = 0.99;
const MAP_TOL: f64 = 1e-9;
const E2E_BUDGET: Duration = Duration::from_secs(120);
const GRID_FILES: usize = 140;
const TABLE_ROWS: usize = 10;
const TABLE_COLS: usize = 10;

type Check = std::result::Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn ok<T, E: std::fmt::Display>(r: std::result::Result<T, E>) -> std::result::Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * a.abs().max(b.abs())
}

fn c1_metrics() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..1000 {
        let n = rng.gen_range(2..60);
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..30.0)).collect();
        let s = rng.gen_range(0.01..5.0);
        let yhat: Vec<f64> = y.iter().map(|v| v + rng.gen_range(-s..s)).collect();
        let mut mean = 0.0;
        for v in &y {
            mean += v;
        }
        mean /= n as f64;
        let (mut sse, mut sst) = (0.0, 0.0);
        for i in 0..n {
            sse += (y[i] - yhat[i]).powi(2);
            sst += (y[i] - mean).powi(2);
        }
        let want_r2 = 1.0 - sse / sst;
        let want_rmse = (sse / n as f64).sqrt();
        let (got_r2, got_rmse) = (ok(r2(&y, &yhat))?, ok(rmse(&y, &yhat))?);
        ensure(rel_close(got_r2, want_r2, METRIC_REL_TOL), || format!("r2 {got_r2} vs {want_r2}"))?;
        ensure(rel_close(got_rmse, want_rmse, METRIC_REL_TOL), || format!("rmse {got_rmse} vs {want_rmse}"))?;
        ensure(ok(r2(&y, &y))? == 1.0 && ok(rmse(&y, &y))? == 0.0, || "identity metrics not exact".into())?;
    }
    let t = start.elapsed();
    ensure(t < METRIC_BUDGET, || format!("took {t:?}"))?;
    Ok(format!("1000 pairs in {t:.2?}"))
}

fn binom(n: usize, k: usize) -> usize {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// Counts from first principles: ordered/unordered band choices minus the
/// combinations that coincide with another family.
fn expected_count(family: IndexFamily, n: usize) -> usize {
    let pairs = binom(n, 2);
    match family {
        IndexFamily::Nd | IndexFamily::InvDiff => pairs,
        IndexFamily::DallGitelson => pairs * (n - 2),
        // Unordered pair numerator, multiset denominator, minus the ND case.
        IndexFamily::Nd4 => pairs * (binom(n, 2) + n) - pairs,
        // Unordered pairs of distinct ordered ratios, minus shared numerators.
        IndexFamily::RatioDiff => binom(n * (n - 1), 2) - n * binom(n - 1, 2),
        IndexFamily::ThreeBandSum => binom(n, 3),
    }
}

fn c2_indices() -> Check {
    let start = Instant::now();
    ensure(IndexFamily::Nd.count(6) == 15 && IndexFamily::ThreeBandSum.count(6) == 20, || "anchor counts".into())?;
    let mut total = 0;
    for n in [6, 9, 12] {
        let mut feats: Vec<(IndexFamily, Vec<usize>)> = Vec::new();
        for f in IndexFamily::ALL {
            let pos = ok(enumerate_positions(f, n))?;
            ensure(pos.len() == expected_count(f, n) && pos.len() == f.count(n), || {
                format!("{f} over {n}: {} generated, {} expected", pos.len(), expected_count(f, n))
            })?;
            feats.extend(pos.into_iter().map(|p| (f, p)));
        }
        let m = 1000;
        let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
        let vectors: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| rng.gen_range(0.001..0.5)).collect()).collect();
        let values: Vec<Vec<f64>> = feats
            .iter()
            .map(|(f, p)| {
                vectors
                    .iter()
                    .map(|v| f.apply(&p.iter().map(|&i| v[i]).collect::<Vec<_>>()))
                    .collect()
            })
            .collect();
        // Sort signed first values; any duplicate or negated pair must sit within tol there.
        let mut keys: Vec<(f64, usize)> =
            values.iter().enumerate().flat_map(|(i, v)| [(v[0], i), (-v[0], i)]).collect();
        keys.sort_by(|a, b| a.0.total_cmp(&b.0));
        for a in 0..keys.len() {
            let mut b = a + 1;
            while b < keys.len() && keys[b].0 - keys[a].0 <= INDEX_TOL {
                let (i, j) = (keys[a].1, keys[b].1);
                if i != j {
                    for sign in [1.0, -1.0] {
                        let same = values[i].iter().zip(&values[j]).all(|(x, y)| (x - sign * y).abs() <= INDEX_TOL);
                        ensure(!same, || format!("{:?} and {:?} coincide (sign {sign})", feats[i], feats[j]))?;
                    }
                }
                b += 1;
            }
        }
        total += feats.len();
    }
    let t = start.elapsed();
    ensure(t < INDEX_BUDGET, || format!("took {t:?}"))?;
    Ok(format!("{total} features checked in {t:.2?}"))
}

fn random_stack(rng: &mut ChaCha8Rng) -> BandStack {
    let (w, h) = (rng.gen_range(1..14), rng.gen_range(1..14));
    let nb = rng.gen_range(1..4);
    let nan_p = rng.gen_range(0.0..0.6);
    let bands = (0..nb)
        .map(|b| {
            let data = (0..w * h).map(|_| if rng.gen_bool(nan_p) { f32::NAN } else { rng.gen_range(-1.0f32..1.0) }).collect();
            Band::new(format!("b{b}"), data)
        })
        .collect();
    BandStack::new(w, h, bands, GeoTransform::new(0.0, 0.0, 1.0, -1.0, "EPSG:4326").unwrap()).unwrap()
}

fn c3_windows() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut nan_cases = 0;
    for _ in 0..10_000 {
        let st = random_stack(&mut rng);
        let (r0, c0) = (rng.gen_range(0..st.height()), rng.gen_range(0..st.width()));
        let w = [1, 3, 5, 9, 15][rng.gen_range(0..5)];
        let bands: Vec<usize> = (0..st.bands().len()).collect();
        let got = ok(window_mean(&st, (r0, c0), w, &bands))?;
        let half = (w / 2) as i64;
        for b in bands {
            let (mut sum, mut n) = (0.0, 0);
            for r in 0..st.height() {
                for c in 0..st.width() {
                    let v = st.value(b, r, c);
                    if (r as i64 - r0 as i64).abs() <= half && (c as i64 - c0 as i64).abs() <= half && !v.is_nan() {
                        sum += v as f64;
                        n += 1;
                    }
                }
            }
            if n == 0 {
                nan_cases += 1;
                ensure(got[b].is_nan(), || format!("expected NaN, got {}", got[b]))?;
            } else {
                let want = sum / n as f64;
                ensure((got[b] - want).abs() <= WINDOW_TOL, || format!("{} vs {want}", got[b]))?;
            }
        }
    }
    Ok(format!("10000 cases, {nan_cases} all-NaN windows"))
}

/// Winding number of a closed ring around a point; nonzero means inside.
fn winding(ring: &[(f64, f64)], px: f64, py: f64) -> i32 {
    let mut wn = 0;
    for e in ring.windows(2) {
        let ((x0, y0), (x1, y1)) = (e[0], e[1]);
        let side = (x1 - x0) * (py - y0) - (px - x0) * (y1 - y0);
        if y0 <= py {
            if y1 > py && side > 0.0 {
                wn += 1;
            }
        } else if y1 <= py && side < 0.0 {
            wn -= 1;
        }
    }
    wn
}

fn star(rng: &mut ChaCha8Rng, cx: f64, cy: f64, rmin: f64, rmax: f64) -> Vec<(f64, f64)> {
    let k = rng.gen_range(3..14);
    let mut angles: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();
    angles.sort_by(f64::total_cmp);
    let mut ring: Vec<(f64, f64)> = angles
        .iter()
        .map(|a| {
            let r = rng.gen_range(rmin..rmax);
            (cx + r * a.cos(), cy + r * a.sin())
        })
        .collect();
    ring.push(ring[0]);
    ring
}

fn c4_geometry() -> Check {
    let (ox, oy, px) = (-1.0, 38.0, 0.005);
    let tf = GeoTransform::new(ox, oy, px, -px, "EPSG:4326").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut inside = 0;
    for i in 0..100 {
        let (cx, cy) = (ox + rng.gen_range(0.05..0.27), oy - rng.gen_range(0.05..0.27));
        let outer = star(&mut rng, cx, cy, 0.03, 0.2);
        let mut rings = vec![outer];
        if i % 3 == 0 {
            // Hole radius stays below the smallest possible outer radius.
            rings.push(star(&mut rng, cx, cy, 0.005, 0.02));
        }
        let poly = ok(Polygon::new(rings.clone()))?;
        let mask = ok(rasterize_polygon(&poly, &tf, 64, 64))?;
        for r in 0..64 {
            for c in 0..64 {
                let (x, y) = (ox + (c as f64 + 0.5) * px, oy - (r as f64 + 0.5) * px);
                let want = winding(&rings[0], x, y) != 0 && rings[1..].iter().all(|h| winding(h, x, y) == 0);
                inside += want as usize;
                ensure(mask.get(r, c) == want, || format!("polygon {i}, pixel ({r},{c})"))?;
            }
        }
    }
    Ok(format!("100 polygons, {inside} interior pixels"))
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Matrix {
    Matrix::new(n, p, (0..n * p).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

fn c5_models() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = random_matrix(&mut rng, 60, 5);
    let beta = [1.5, -2.0, 0.25, 3.0, -0.75];
    let y: Vec<f64> = x.rows_iter().map(|r| 4.0 + r.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>()).collect();
    let ols = ok(fit_linear(&x, &y))?;
    ensure(ols.coef.iter().zip(&beta).all(|(a, b)| (a - b).abs() < OLS_TOL) && (ols.intercept - 4.0).abs() < OLS_TOL, || {
        format!("OLS recovered {:?} + {}", ols.coef, ols.intercept)
    })?;

    let noisy: Vec<f64> = y.iter().map(|v| v + rng.gen_range(-0.3..0.3)).collect();
    let ols = ok(fit_linear(&x, &noisy))?;
    let p0 = ElasticNetParams { alpha: 0.0, l1_ratio: 0.5, max_iter: 100_000, tol: 1e-14 };
    let e0 = ok(fit_elastic_net(&x, &noisy, &p0))?;
    ensure(e0.linear.coef.iter().zip(&ols.coef).all(|(a, b)| (a - b).abs() < ELN_OLS_TOL), || {
        format!("ELN(0) {:?} vs OLS {:?}", e0.linear.coef, ols.coef)
    })?;
    let n = noisy.len() as f64;
    let ym = noisy.iter().sum::<f64>() / n;
    let l1_ratio = 0.5;
    let bound = (0..5)
        .map(|c| {
            let col = x.column(c);
            let xm = col.iter().sum::<f64>() / n;
            col.iter().zip(&noisy).map(|(a, b)| (a - xm) * (b - ym)).sum::<f64>().abs() / (n * l1_ratio)
        })
        .fold(0.0, f64::max);
    let at = ok(fit_elastic_net(&x, &noisy, &ElasticNetParams { alpha: bound, l1_ratio, ..Default::default() }))?;
    ensure(at.linear.coef.iter().all(|c| *c == 0.0), || format!("coefficients at bound {:?}", at.linear.coef))?;
    let below = ok(fit_elastic_net(&x, &noisy, &ElasticNetParams { alpha: 0.95 * bound, l1_ratio, ..Default::default() }))?;
    ensure(below.linear.coef.iter().any(|c| *c != 0.0), || "all zero below the bound".into())?;

    let train = Matrix::new(3, 1, vec![0.0, 3.0, 10.0]).unwrap();
    let knn = ok(fit_knn(&train, &[0.0, 3.0, 10.0], 2))?;
    ensure(knn.predict_row(&[1.0]) == 1.0, || format!("KNN gave {}", knn.predict_row(&[1.0])))?;

    let xg = random_matrix(&mut rng, 120, 4);
    let yg: Vec<f64> = xg.rows_iter().map(|r| (2.0 * r[0]).sin() + r[1] * r[2] + rng.gen_range(-0.1..0.1)).collect();
    let mut losses = Vec::new();
    ok(fit_gbt_observed(&xg, &yg, &GbtParams { n_rounds: 50, ..GbtParams::xgb() }, |_, l| losses.push(l)))?;
    ensure(losses.len() == 50 && losses.windows(2).all(|w| w[1] <= w[0]), || format!("losses {losses:?}"))?;

    let fp = ForestParams { n_trees: 30, max_features: Some(2), seed: 11, ..Default::default() };
    let a = ok(fit_random_forest(&xg, &yg, &fp))?;
    let b = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap().install(|| fit_random_forest(&xg, &yg, &fp));
    ensure(ok(serde_json::to_string(&a))? == ok(serde_json::to_string(&ok(b)?))?, || "forest differs".into())?;

    let xm = random_matrix(&mut rng, 16, 3);
    let ym: Vec<f64> = xm.rows_iter().map(|r| r[0] - 2.0 * r[2]).collect();
    let mut net = Mlp::new(3, &[5, 4], Activation::Tanh, &mut rng);
    let rows: Vec<usize> = (0..16).collect();
    let (_, grad) = net.loss_and_grad(&xm, &ym, &rows);
    let base = net.params();
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for i in 0..base.len() {
        let mut p = base.clone();
        p[i] = base[i] + h;
        net.set_params(&p);
        let up = net.loss_and_grad(&xm, &ym, &rows).0;
        p[i] = base[i] - h;
        net.set_params(&p);
        let down = net.loss_and_grad(&xm, &ym, &rows).0;
        let numeric = (up - down) / (2.0 * h);
        worst = worst.max((grad[i] - numeric).abs() / grad[i].abs().max(numeric.abs()).max(1e-7));
    }
    ensure(worst < MLP_GRAD_REL_TOL, || format!("MLP gradient relative error {worst:e}"))?;
    Ok(format!("all suites hold; MLP gradient error {worst:.1e}"))
}

/// Table with three raw columns, one index column and a linear target plus noise.
fn small_table(n: usize, seed: u64) -> FeatureTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::new();
    let mut y = Vec::new();
    let mut keys = Vec::new();
    for i in 0..n {
        let (a, b, c): (f64, f64, f64) = (rng.gen_range(0.05..0.3), rng.gen_range(0.05..0.3), rng.gen_range(0.0..1.0));
        let nd = (a - b) / (a + b);
        data.extend([a, b, c, nd]);
        y.push(6.0 + 20.0 * nd + 2.0 * c + rng.gen_range(-0.2..0.2));
        keys.push(RowKey::Pixel { row: i, col: 0 });
    }
    let cols = ["a", "b", "c", "ND(a,b)"].map(String::from).to_vec();
    FeatureTable::new("leak", cols, keys, Matrix::new(n, 4, data).unwrap(), Some(y)).unwrap()
}

fn c6_leakage() -> Check {
    let table = small_table(120, 6);
    let y = table.target().unwrap().to_vec();
    let plan = ok(SplitPlan::standard(&y, 6))?;
    let mut perturbed = y.clone();
    for &r in &plan.test_rows {
        perturbed[r] = if y[r] > 5.0 { y[r] + 100.0 } else { y[r] * 0.5 };
    }
    let cols = table.columns().to_vec();
    let shifted = ok(FeatureTable::new("leak", cols, table.keys().to_vec(), table.values().clone(), Some(perturbed)))?;
    let opts = CvOptions { top_k: Some(2), keep_models: true };
    let specs = [
        ok(ModelSpec::preset("LR"))?,
        ok(ModelSpec::preset("ELN"))?,
        ok(ModelSpec::preset("KNN"))?,
        ok(ModelSpec::preset("RF"))?.with("n_trees", 20),
        ok(ModelSpec::preset("XGB"))?.with("n_rounds", 20),
        ok(ModelSpec::preset("MLP"))?.with("epochs", 20),
    ];
    let fingerprints = |m: &[TrainedModel]| m.iter().map(|t| t.fingerprint().unwrap()).collect::<Vec<_>>();
    let mut compared = 0;
    for spec in &specs {
        let a = ok(cross_validate(spec, &table, &plan, &opts))?;
        let b = ok(cross_validate(spec, &shifted, &plan, &opts))?;
        ensure(a.models.len() == plan.k, || format!("{} kept {} models", spec.label, a.models.len()))?;
        ensure(fingerprints(&a.models) == fingerprints(&b.models), || format!("{} fold models moved", spec.label))?;
        compared += a.models.len();
    }
    Ok(format!("{compared} fold models unchanged"))
}

fn c7_stratification() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..200 {
        let n = rng.gen_range(10..400);
        let p = rng.gen_range(0.0..1.0);
        let y: Vec<f64> = (0..n).map(|_| if rng.gen_bool(p) { 12.0 } else { 1.0 }).collect();
        let plan = ok(SplitPlan::standard(&y, case))?;
        let (mut size, mut high) = (vec![0; plan.k], vec![0; plan.k]);
        for (r, f) in plan.folds.iter().enumerate() {
            if let Some(f) = f {
                size[*f] += 1;
                high[*f] += plan.labels[r] as usize;
            }
        }
        let spread = |v: &[usize]| v.iter().max().unwrap() - v.iter().min().unwrap();
        ensure(spread(&size) <= 1 && spread(&high) <= 1, || format!("case {case}: sizes {size:?}, High {high:?}"))?;
        let labels: Vec<bool> = y.iter().map(|v| *v > 5.0).collect();
        let direct = ok(stratified_kfold(&labels, 5, case))?;
        let mut hi = [0usize; 5];
        let mut sz = [0usize; 5];
        for (l, f) in labels.iter().zip(&direct) {
            sz[*f] += 1;
            hi[*f] += *l as usize;
        }
        ensure(spread(&sz) <= 1 && spread(&hi) <= 1, || format!("case {case}: direct folds {sz:?} {hi:?}"))?;
    }
    Ok("200 label vectors".into())
}

fn c8_ensemble() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n = 200;
    let labels: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.3)).collect();
    let folds = ok(stratified_kfold(&labels, 5, 8))?;
    let base: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..20.0)).collect();
    let test = Matrix::new(10, 1, (0..10).map(|i| i as f64).collect()).unwrap();
    let out = ok(stack_ridge(&Matrix::new(n, 1, base.clone()).unwrap(), &base, &folds, 5, &test, 1e-9))?;
    let worst = out.oof.iter().zip(&base).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    ensure(worst < PASS_THROUGH_TOL, || format!("pass-through error {worst:e}"))?;
    ensure(out.test.iter().enumerate().all(|(i, v)| (v - i as f64).abs() < PASS_THROUGH_TOL), || "test pass-through".into())?;

    // Noise-free linear target: the LR base is exact and the stack must not move it.
    let mut rng2 = ChaCha8Rng::seed_from_u64(80);
    let rows: Vec<Vec<f64>> = (0..100).map(|_| vec![rng2.gen_range(0.0..1.0), rng2.gen_range(0.0..1.0)]).collect();
    let yy: Vec<f64> = rows.iter().map(|r| 1.0 + 9.0 * r[0] - 2.0 * r[1]).collect();
    let keys = (0..100).map(|i| RowKey::Pixel { row: i, col: 0 }).collect();
    let t = ok(FeatureTable::new("lin", vec!["a".into(), "b".into()], keys, Matrix::from_rows(&rows).unwrap(), Some(yy.clone())))?;
    let plan = ok(SplitPlan::standard(&yy, 3))?;
    let lr = ok(cross_validate(&ok(ModelSpec::preset("LR"))?, &t, &plan, &CvOptions { top_k: None, keep_models: false }))?;
    let ens = ok(evaluate_ensemble(std::slice::from_ref(&lr), &t, &plan, 1e-9))?;
    let gap = ens.oof.iter().zip(&lr.oof).chain(ens.test.iter().zip(&lr.test)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    ensure(gap < PASS_THROUGH_TOL, || format!("ensemble moved LR predictions by {gap:e}"))?;

    let truth: Vec<f64> = (0..n).map(|_| rng.gen_range(1.0..15.0)).collect();
    let y: Vec<f64> = truth.iter().map(|v| v + rng.gen_range(-0.5..0.5)).collect();
    let noise: Vec<f64> = (0..n).map(|_| rng.gen_range(1.0..15.0)).collect();
    let oof = Matrix::new(n, 2, truth.iter().zip(&noise).flat_map(|(a, b)| [*a, *b]).collect()).unwrap();
    let out = ok(stack_ridge(&oof, &y, &folds, 5, &Matrix::zeros(0, 2), 1.0))?;
    let (ens_rmse, noise_rmse) = (ok(rmse(&y, &out.oof))?, ok(rmse(&y, &noise))?);
    ensure(ens_rmse <= noise_rmse, || format!("ensemble RMSE {ens_rmse} > noise RMSE {noise_rmse}"))?;
    Ok(format!("pass-through error {worst:.1e}; two-model RMSE {ens_rmse:.3} vs noise {noise_rmse:.3}"))
}

fn pipeline(inputs: &SyntheticInputs, out: &Path, extra: Value) -> Pipeline {
    let mut cfg = json!({
        "schema_version": 1,
        "paths": {"catalog": inputs.catalog, "upct": [inputs.upct], "output": out},
        "seed": 42,
    });
    for (k, v) in extra.as_object().unwrap() {
        cfg[k] = v.clone();
    }
    let cfg = PipelineConfig::from_json(&cfg.to_string(), Path::new("/")).unwrap();
    Pipeline::new(cfg).unwrap()
}

fn e2e_settings() -> Value {
    json!({
        "bbox": null,
        "sets": ["C2RCC_rhow"],
        "windows": [1],
        "depth_bins": ["0-1"],
        "models": ["LR", "XGB"],
        "search": {"budget": 0},
        "final_models": {"0-1": {"dataset": "C2RCC_rhow_1x1", "model": "LR"}},
    })
}

fn run_all(p: &Pipeline, date: chrono::NaiveDate) -> std::result::Result<(), String> {
    ok(p.ingest())?;
    ok(p.features())?;
    ok(p.train())?;
    ok(p.select())?;
    ok(p.infer(date))?;
    Ok(())
}

struct World {
    _dir: tempfile::TempDir,
    root: PathBuf,
    world: SyntheticWorld,
    inputs: SyntheticInputs,
}

fn world() -> World {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_path_buf();
    let world = SyntheticWorld::default();
    let inputs = world.write(&root.join("inputs")).unwrap();
    World { _dir: dir, root, world, inputs }
}

fn c9_end_to_end(w: &World) -> Check {
    let start = Instant::now();
    let p = pipeline(&w.inputs, &w.root.join("run1"), e2e_settings());
    let date = w.inputs.dates[0];
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    pool.install(|| run_all(&p, date))?;
    let elapsed = start.elapsed();

    let reports = ok(p.final_reports(DepthBin::D0_1))?;
    let mut summary = Vec::new();
    for model in ["LR", "XGB"] {
        let r = reports
            .iter()
            .find(|r| r.model == model && r.dataset_id == "C2RCC_rhow_1x1_depth_in_0_1")
            .ok_or_else(|| format!("no {model} report"))?;
        let t = r.test_r2.ok_or_else(|| format!("{model} has no test R²"))?;
        ensure(t >= E2E_MIN_TEST_R2, || format!("{model} test R² {t}"))?;
        summary.push(format!("{model} R² {t:.4}"));
    }

    let sel = &ok(p.selections())?[0];
    let model = ok(TrainedModel::load(p.stage_dir("select").join(&sel.model_file)))?;
    let scene = ok(w.world.scene(0))?;
    let names: Vec<String> = scene.band_names().map(String::from).collect();
    let rows: Vec<Vec<f64>> = (0..scene.height())
        .flat_map(|r| (0..scene.width()).map(move |c| (r, c)))
        .map(|(r, c)| {
            let refl: HashMap<String, f64> =
                names.iter().enumerate().map(|(b, n)| (n.clone(), scene.value(b, r, c) as f64)).collect();
            model
                .feature_names
                .iter()
                .map(|f| match refl.get(f) {
                    Some(v) => *v,
                    None => SpectralIndex::parse(f).unwrap().eval(&refl),
                })
                .collect()
        })
        .collect();
    let direct = ok(model.predict_named(&model.feature_names, &ok(Matrix::from_rows(&rows))?))?;
    let csv = p.map_dir(date).join("chl_depth_0_1_predictions.csv");
    let mapped = ok(read_predictions_csv(&csv))?;
    ensure(mapped.len() == scene.width() * scene.height(), || format!("{} mapped pixels", mapped.len()))?;
    let mut worst: f64 = 0.0;
    for (r, c, v) in mapped {
        let want = direct[r * scene.width() + c].max(0.0);
        worst = worst.max((v - want).abs());
    }
    ensure(worst <= MAP_TOL, || format!("map deviates from direct prediction by {worst:e}"))?;
    ensure(elapsed < E2E_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!("{}; map error {worst:.1e}; {elapsed:.1?} on one thread", summary.join(", ")))
}

fn c10_grid() -> Check {
    let dir = tempfile::tempdir().unwrap();
    let world = SyntheticWorld {
        width: 16,
        height: 16,
        dates: 3,
        processors: vec![Processor::C2rcc, Processor::C2x, Processor::C2xComplex],
        ..Default::default()
    };
    let inputs = ok(world.write(&dir.path().join("inputs")))?;
    let p = pipeline(&inputs, &dir.path().join("out"), json!({}));
    ok(p.ingest())?;
    let outcome = ok(p.features())?;
    let files: Vec<PathBuf> = ok(fs::read_dir(p.stage_dir("features")))?
        .map(|e| e.unwrap().path())
        .filter(|f| f.extension().is_some_and(|e| e == "csv"))
        .collect();
    ensure(files.len() == GRID_FILES, || format!("{} dataset files", files.len()))?;
    let csv_outputs = outcome.outputs.iter().filter(|f| f.extension().is_some_and(|e| e == "csv")).count();
    ensure(csv_outputs == GRID_FILES, || format!("stage reported {csv_outputs} dataset files"))?;
    Ok(format!("{} dataset files", files.len()))
}

fn artefacts(p: &Pipeline, date: chrono::NaiveDate) -> Vec<(String, Vec<u8>)> {
    let train = p.stage_dir("train").join("depth_0_1");
    let maps = p.map_dir(date);
    let mut files = vec![
        train.join("preliminary.json"),
        train.join("ranking.json"),
        train.join("reports.json"),
        train.join("session.json"),
        p.stage_dir("select").join("model_depth_0_1.json"),
    ];
    for ext in ["tif", "bsf", "png", "colorbar.json"] {
        files.push(maps.join(format!("chl_depth_0_1.{ext}")));
    }
    files.push(maps.join("chl_depth_0_1_predictions.csv"));
    files.into_iter().map(|f| (f.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&f).unwrap())).collect()
}

fn c11_determinism(w: &World) -> Check {
    let date = w.inputs.dates[0];
    let settings = {
        let mut s = e2e_settings();
        s["models"] = json!(["LR", "XGB", "RF", "KNN"]);
        s
    };
    let mut runs = Vec::new();
    for threads in [1, 8] {
        let p = pipeline(&w.inputs, &w.root.join(format!("threads{threads}")), settings.clone());
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| run_all(&p, date))?;
        runs.push(artefacts(&p, date));
    }
    for ((name, a), (_, b)) in runs[0].iter().zip(&runs[1]) {
        ensure(a == b, || format!("{name} differs between 1 and 8 threads"))?;
    }
    Ok(format!("{} artefacts byte-identical", runs[0].len()))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn fmt2(v: Option<f64>) -> String {
    v.map_or("NA".into(), |v| format!("{v:.2}").replace("-0.00", "0.00"))
}

fn c12_report(w: &World) -> Check {
    let settings = json!({
        "bbox": null,
        "sets": ["C2RCC_rhow", "C2RCC_rhown"],
        "depth_bins": ["0-1"],
        "top_k": 20,
        "models": ["CAT", "ELN", "KNN", "LBM", "LR", "MLP", "RF", "XGB"],
        "search": {"budget": 0},
    });
    let p = pipeline(&w.inputs, &w.root.join("report"), settings);
    ok(p.ingest())?;
    ok(p.features())?;
    ok(p.train())?;
    ok(p.report())?;
    let reports: Vec<EvalReport> = ok(p.final_reports(DepthBin::D0_1))?;
    let mut checked = 0;
    for (slug, pick) in [("r2", (|r: &EvalReport| r.test_r2) as fn(&EvalReport) -> Option<f64>), ("rmse", |r| r.test_rmse)] {
        let name = format!("test_{slug}_depth_0_1.csv");
        let text = ok(fs::read_to_string(p.stage_dir("report").join(&name)))?;
        let lines: Vec<&str> = text.lines().collect();
        let header: Vec<&str> = lines[0].split(',').collect();
        ensure(header.len() == TABLE_COLS + 1 && header[1..] == REPORT_MODELS[..], || format!("{name} header {header:?}"))?;
        ensure(lines.len() == TABLE_ROWS + 1, || format!("{name} has {} rows", lines.len() - 1))?;
        for line in &lines[1..] {
            let cells: Vec<&str> = line.split(',').collect();
            ensure(cells.len() == TABLE_COLS + 1, || format!("ragged row {line}"))?;
            for (model, cell) in REPORT_MODELS.iter().zip(&cells[1..]) {
                let want = fmt2(reports.iter().find(|r| r.dataset_id == cells[0] && r.model == *model).and_then(pick));
                ensure(*cell == want, || format!("{name}: {} {model} is {cell}, report says {want}", cells[0]))?;
            }
        }
        let golden = fixture(&format!("synthetic_{name}"));
        if std::env::var_os("LAGOON_CHL_BLESS").is_some() {
            ok(fs::write(&golden, &text))?;
        }
        let want = ok(fs::read_to_string(&golden))?;
        ensure(text == want, || format!("{name} differs from {}", golden.display()))?;
        checked += 1;
    }
    Ok(format!("{checked} tables of {TABLE_ROWS}x{TABLE_COLS} match the fixtures"))
}

fn run(id: usize, name: &str, f: impl FnOnce() -> Check) -> bool {
    let start = Instant::now();
    let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        Err(e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
    });
    let t = start.elapsed();
    match &result {
        Ok(m) => println!("PASS {id:>2} {name}: {m} [{t:.1?}]"),
        Err(m) => println!("FAIL {id:>2} {name}: {m} [{t:.1?}]"),
    }
    result.is_ok()
}

fn main() {
    let w = world();
    let results = [
        run(1, "metric oracle", c1_metrics),
        run(2, "index enumeration", c2_indices),
        run(3, "window aggregation", c3_windows),
        run(4, "polygon rasterization", c4_geometry),
        run(5, "model suites", c5_models),
        run(6, "leakage guard", c6_leakage),
        run(7, "stratification", c7_stratification),
        run(8, "ensemble pass-through", c8_ensemble),
        run(9, "synthetic end-to-end", || c9_end_to_end(&w)),
        run(10, "grid cardinality", c10_grid),
        run(11, "determinism under parallelism", || c11_determinism(&w)),
        run(12, "report fidelity", || c12_report(&w)),
    ];
    let failed: Vec<usize> = results.iter().enumerate().filter(|(_, ok)| !**ok).map(|(i, _)| i + 1).collect();
    println!("acceptance: {} of {} criteria passed", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
