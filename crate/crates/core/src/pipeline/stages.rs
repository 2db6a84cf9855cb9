use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{
    build_tables, cross_validate, default_space, evaluate_ensemble, rank_datasets, random_search, CvOptions, CvResult,
    EvalReport, RankedDataset, SearchOutcome, SplitPlan, ENSEMBLE_LABEL, N_FOLDS, REPORT_ROWS, TEST_FRACTION,
};
use crate::features::{
    build_dataset_with, dataset_id, parse_dataset_id, screen_features, FeaturePlan, FeatureTable, ReflectanceSet,
};
use crate::ingest::{
    bin_depths, filter_scenes, load_buoy_source, load_catalog, merge_sources, read_exclusion_list, valid_pixel_fraction,
    BuoyDepthTable, DepthBin, Processor, SceneCatalogEntry, Source,
};
use crate::mapping::{extract_pixels, percentile, predict_map, render_png, Palette};
use crate::models::{fit_model, ModelSpec, TrainedModel};
use crate::raster::{crop_geo, read_band_stack, read_geojson, rasterize_polygons, BandStack, Mask, RasterFormat};

use super::config::PipelineConfig;
use super::manifest::{hash_all, Manifest, MANIFEST_FILE};

/// What a stage did.
#[derive(Debug, Clone, PartialEq)]
pub struct StageOutcome {
    pub stage: String,
    /// The manifest matched, so nothing was recomputed.
    pub skipped: bool,
    pub outputs: Vec<PathBuf>,
}

/// Chosen model for one depth bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub depth: DepthBin,
    pub dataset_id: String,
    pub model: String,
    pub spec: ModelSpec,
    pub test_r2: Option<f64>,
    pub test_rmse: Option<f64>,
    pub val_r2: Option<f64>,
    /// Model file name inside the select directory.
    pub model_file: String,
    pub fingerprint: String,
    /// `configured` or `best_test_r2`.
    pub reason: String,
}

/// Everything needed to reproduce one depth bin's final evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub depth: DepthBin,
    pub seed: u64,
    pub plans: BTreeMap<String, SplitPlan>,
    pub results: Vec<CvResult>,
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<PathBuf> {
    std::fs::write(path, serde_json::to_string_pretty(value)?).map_err(|e| Error::io(path, e))?;
    Ok(path.to_path_buf())
}

fn missing(path: &Path, stage: &str) -> Error {
    Error::MissingInput(format!("{} does not exist; run `lagoon-chl {stage}` first", path.display()))
}

fn read_json<T: DeserializeOwned>(path: &Path, stage: &str) -> Result<T> {
    if !path.exists() {
        return Err(missing(path, stage));
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

fn require(paths: &[PathBuf], stage: &str) -> Result<()> {
    match paths.iter().find(|p| !p.exists()) {
        Some(p) => Err(missing(p, stage)),
        None => Ok(()),
    }
}

fn mkdir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Stage runner over one configuration.
pub struct Pipeline {
    cfg: PipelineConfig,
    config_hash: String,
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig) -> Result<Self> {
        cfg.validate()?;
        let config_hash = cfg.hash()?;
        Ok(Self { cfg, config_hash })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    fn root(&self) -> &Path {
        &self.cfg.paths.output
    }

    pub fn stage_dir(&self, stage: &str) -> PathBuf {
        self.root().join(stage)
    }

    fn buoy_file(&self, bin: DepthBin) -> PathBuf {
        self.stage_dir("ingest").join(format!("buoys_depth_{}.csv", bin.slug()))
    }

    fn scenes_file(&self) -> PathBuf {
        self.stage_dir("ingest").join("scenes.json")
    }

    pub fn dataset_file(&self, id: &str) -> PathBuf {
        self.stage_dir("features").join(format!("{id}.csv"))
    }

    fn bin_ids(&self, bin: DepthBin) -> Vec<String> {
        self.cfg.sets.iter().flat_map(|&s| self.cfg.windows.iter().map(move |&w| dataset_id(s, w, bin))).collect()
    }

    fn train_dir(&self, bin: DepthBin) -> PathBuf {
        self.stage_dir("train").join(format!("depth_{}", bin.slug()))
    }

    fn selection_file(&self) -> PathBuf {
        self.stage_dir("select").join("selection.json")
    }

    fn cv_options(&self) -> CvOptions {
        CvOptions { top_k: Some(self.cfg.top_k), keep_models: false }
    }

    fn plan_for(&self, table: &FeatureTable) -> Result<SplitPlan> {
        let y = table
            .target()
            .ok_or_else(|| Error::Contract(format!("dataset {} has no target column", table.dataset_id)))?;
        SplitPlan::new(y, self.cfg.thresholds.high_chl, TEST_FRACTION, N_FOLDS, self.cfg.seed)
    }

    fn load_stack(&self, path: &Path) -> Result<BandStack> {
        let stack = read_band_stack(path, RasterFormat::from_path(path))?;
        match &self.cfg.bbox {
            Some(b) => crop_geo(&stack, b.north, b.west, b.south, b.east),
            None => Ok(stack),
        }
    }

    fn run(
        &self,
        stage: &str,
        dir: &Path,
        inputs: &[PathBuf],
        body: impl FnOnce() -> Result<Vec<PathBuf>>,
    ) -> Result<StageOutcome> {
        let input_hashes = hash_all(inputs, self.root())?;
        let mpath = dir.join(MANIFEST_FILE);
        if let Some(m) = Manifest::read(&mpath)? {
            if m.stage == stage && m.config_hash == self.config_hash && m.inputs == input_hashes && m.outputs_intact(self.root())
            {
                log::info!("{stage}: inputs unchanged, nothing to do");
                let outputs = m.outputs.keys().map(|k| self.root().join(k)).collect();
                return Ok(StageOutcome { stage: stage.into(), skipped: true, outputs });
            }
        }
        mkdir(dir)?;
        let outputs = body()?;
        let manifest = Manifest {
            stage: stage.into(),
            config_hash: self.config_hash.clone(),
            inputs: input_hashes,
            outputs: hash_all(&outputs, self.root())?,
        };
        manifest.write(&mpath)?;
        Ok(StageOutcome { stage: stage.into(), skipped: false, outputs })
    }

    /// Depth-binned buoy tables and the filtered scene list.
    pub fn ingest(&self) -> Result<StageOutcome> {
        let p = &self.cfg.paths;
        let mut inputs: Vec<PathBuf> = p.upct.iter().chain(&p.imida).chain(&p.exclusions).cloned().collect();
        inputs.push(p.catalog.clone());
        require(&inputs, "ingest")?;
        let catalog = load_catalog(&p.catalog)?;
        let scene_paths: Vec<PathBuf> = catalog.iter().map(|e| e.path.clone()).collect();
        require(&scene_paths, "ingest")?;
        inputs.extend(scene_paths);
        let dir = self.stage_dir("ingest");
        self.run("ingest", &dir, &inputs, || {
            let load = |files: &[PathBuf], src: Source| -> Result<BuoyDepthTable> {
                let mut recs = Vec::new();
                for f in files {
                    recs.extend(load_buoy_source(f, src)?);
                }
                Ok(bin_depths(&recs))
            };
            let merged = merge_sources(&load(&p.upct, Source::Upct)?, &load(&p.imida, Source::Imida)?);
            let mut outputs = Vec::new();
            for &bin in &self.cfg.depth_bins {
                let f = self.buoy_file(bin);
                merged.write_bin_csv(bin, &f)?;
                outputs.push(f);
            }
            let scored: Vec<SceneCatalogEntry> = catalog
                .par_iter()
                .map(|e| {
                    let stack = read_band_stack(&e.path, RasterFormat::from_path(&e.path))?;
                    let frac = match &self.cfg.bbox {
                        Some(b) => valid_pixel_fraction(&stack, b)?,
                        None => whole_grid_valid_fraction(&stack)?,
                    };
                    let bytes = std::fs::metadata(&e.path).map_err(|err| Error::io(&e.path, err))?.len();
                    Ok(SceneCatalogEntry { valid_pixel_fraction: Some(frac), file_bytes: bytes, ..e.clone() })
                })
                .collect::<Result<_>>()?;
            let excluded = match &p.exclusions {
                Some(f) => read_exclusion_list(f)?,
                None => BTreeSet::new(),
            };
            let t = &self.cfg.thresholds;
            let kept = filter_scenes(&scored, t.max_cloud_pct, t.min_valid_fraction, &excluded)?;
            log::info!("kept {} of {} scenes", kept.len(), scored.len());
            outputs.push(write_json(&self.scenes_file(), &kept)?);
            Ok(outputs)
        })
    }

    fn kept_scenes(&self) -> Result<Vec<SceneCatalogEntry>> {
        read_json(&self.scenes_file(), "ingest")
    }

    /// One feature table per (set, window, depth bin).
    pub fn features(&self) -> Result<StageOutcome> {
        let mut inputs: Vec<PathBuf> = self.cfg.depth_bins.iter().map(|&b| self.buoy_file(b)).collect();
        inputs.push(self.scenes_file());
        require(&inputs, "ingest")?;
        let scenes = self.kept_scenes()?;
        inputs.extend(scenes.iter().map(|e| e.path.clone()));
        require(&inputs, "ingest")?;
        let dir = self.stage_dir("features");
        self.run("features", &dir, &inputs, || {
            let buoys: BTreeMap<DepthBin, BuoyDepthTable> = self
                .cfg
                .depth_bins
                .iter()
                .map(|&b| Ok((b, BuoyDepthTable::read_bin_csv(b, self.buoy_file(b))?)))
                .collect::<Result<_>>()?;
            let needed: BTreeSet<Processor> = self.cfg.sets.iter().map(|s| s.processor()).collect();
            let mut stacks: BTreeMap<Processor, Vec<(NaiveDate, BandStack)>> = BTreeMap::new();
            for e in scenes.iter().filter(|e| needed.contains(&e.processor)) {
                stacks.entry(e.processor).or_default().push((e.date, self.load_stack(&e.path)?));
            }
            let mut outputs = Vec::new();
            for &set in &self.cfg.sets {
                let plan = FeaturePlan::full(set);
                let refs: Vec<(NaiveDate, &BandStack)> =
                    stacks.get(&set.processor()).map(|v| v.iter().map(|(d, s)| (*d, s)).collect()).unwrap_or_default();
                for &w in &self.cfg.windows {
                    for (&bin, table) in &buoys {
                        let ds = build_dataset_with(table, &refs, &plan, w, bin)?;
                        let f = self.dataset_file(&ds.dataset_id);
                        ds.write_csv(&f)?;
                        outputs.push(f);
                    }
                }
            }
            Ok(outputs)
        })
    }

    fn load_tables(&self, ids: &[String]) -> Result<Vec<FeatureTable>> {
        let files: Vec<PathBuf> = ids.iter().map(|id| self.dataset_file(id)).collect();
        require(&files, "features")?;
        files.iter().map(FeatureTable::read_csv).collect()
    }

    fn spec_for(&self, label: &str) -> Result<ModelSpec> {
        Ok(ModelSpec::preset(label)?.with_seed(self.cfg.seed))
    }

    fn train_bin(&self, bin: DepthBin, dir: &Path) -> Result<Vec<PathBuf>> {
        mkdir(dir)?;
        let ids = self.bin_ids(bin);
        let mut data: Vec<(FeatureTable, SplitPlan)> = Vec::new();
        for t in self.load_tables(&ids)? {
            match self.plan_for(&t) {
                Ok(p) => data.push((t, p)),
                Err(e) => log::warn!("skipping {}: {e}", t.dataset_id),
            }
        }
        let opts = self.cv_options();
        let first_pass: Vec<Vec<CvResult>> = data
            .par_iter()
            .map(|(t, plan)| {
                self.cfg.models.iter().map(|m| cross_validate(&self.spec_for(m)?, t, plan, &opts)).collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        let preliminary: Vec<EvalReport> = first_pass.iter().flatten().map(|r| r.report.clone()).collect();
        let by_dataset: BTreeMap<&str, &Vec<CvResult>> =
            data.iter().map(|(t, _)| t.dataset_id.as_str()).zip(&first_pass).collect();
        let ranking = rank_datasets(&preliminary, self.cfg.top_datasets);
        let mut finalists: BTreeSet<String> = ranking.iter().map(|r| r.dataset_id.clone()).collect();
        if let Some(c) = self.cfg.final_models.get(&bin) {
            finalists.insert(format!("{}_depth_in_{}", c.dataset, bin.slug()));
        }
        let chosen: Vec<&(FeatureTable, SplitPlan)> = data.iter().filter(|(t, _)| finalists.contains(&t.dataset_id)).collect();
        let evaluated: Vec<(Vec<(String, SearchOutcome)>, Vec<CvResult>)> = chosen
            .par_iter()
            .map(|(t, plan)| {
                let mut searches = Vec::new();
                let mut results = Vec::new();
                for (i, m) in self.cfg.models.iter().enumerate() {
                    let base = self.spec_for(m)?;
                    let space = self.cfg.search.spaces.get(m).cloned().unwrap_or_else(|| default_space(base.kind));
                    let spec = if self.cfg.search.budget > 0 && !space.is_empty() {
                        match random_search(&base, &space, self.cfg.search.budget, t, plan, &opts, self.cfg.seed) {
                            Ok(out) => {
                                let best = out.best.clone();
                                searches.push((format!("{}/{m}", t.dataset_id), out));
                                best
                            }
                            Err(e) => {
                                log::warn!("search for {m} on {} failed: {e}", t.dataset_id);
                                base.clone()
                            }
                        }
                    } else {
                        base.clone()
                    };
                    // An unchanged spec on the same plan reproduces the first pass exactly.
                    let earlier = by_dataset[t.dataset_id.as_str()].get(i).filter(|_| spec == base);
                    match earlier {
                        Some(r) => results.push(r.clone()),
                        None => results.push(cross_validate(&spec, t, plan, &opts)?),
                    }
                }
                let ens = evaluate_ensemble(&results, t, plan, self.cfg.ensemble_lambda)?;
                results.push(ens);
                Ok((searches, results))
            })
            .collect::<Result<_>>()?;
        let mut searches: BTreeMap<String, SearchOutcome> = BTreeMap::new();
        let mut results = Vec::new();
        for (s, r) in evaluated {
            searches.extend(s);
            results.extend(r);
        }
        let reports: Vec<&EvalReport> = results.iter().map(|r| &r.report).collect();
        let session = Session {
            depth: bin,
            seed: self.cfg.seed,
            plans: chosen.iter().map(|(t, p)| (t.dataset_id.clone(), p.clone())).collect(),
            results: results.clone(),
        };
        Ok(vec![
            write_json(&dir.join("preliminary.json"), &preliminary)?,
            write_json(&dir.join("ranking.json"), &ranking)?,
            write_json(&dir.join("search.json"), &searches)?,
            write_json(&dir.join("reports.json"), &reports)?,
            write_json(&dir.join("session.json"), &session)?,
        ])
    }

    /// Preliminary screening of every dataset, ranking, search and final
    /// cross-validation with the stacked ensemble.
    pub fn train(&self) -> Result<StageOutcome> {
        let inputs: Vec<PathBuf> =
            self.cfg.depth_bins.iter().flat_map(|&b| self.bin_ids(b)).map(|id| self.dataset_file(&id)).collect();
        require(&inputs, "features")?;
        let dir = self.stage_dir("train");
        self.run("train", &dir, &inputs, || {
            let mut outputs = Vec::new();
            for &bin in &self.cfg.depth_bins {
                outputs.extend(self.train_bin(bin, &self.train_dir(bin))?);
            }
            Ok(outputs)
        })
    }

    fn reports_file(&self, bin: DepthBin) -> PathBuf {
        self.train_dir(bin).join("reports.json")
    }

    pub fn final_reports(&self, bin: DepthBin) -> Result<Vec<EvalReport>> {
        read_json(&self.reports_file(bin), "train")
    }

    pub fn ranking(&self, bin: DepthBin) -> Result<Vec<RankedDataset>> {
        read_json(&self.train_dir(bin).join("ranking.json"), "train")
    }

    fn select_bin(&self, bin: DepthBin, dir: &Path) -> Result<Option<(Selection, PathBuf)>> {
        let reports = self.final_reports(bin)?;
        let usable = |r: &&EvalReport| r.failed.is_none() && r.model != ENSEMBLE_LABEL;
        let configured = self.cfg.final_models.get(&bin).and_then(|c| {
            let id = format!("{}_depth_in_{}", c.dataset, bin.slug());
            let hit = reports.iter().filter(usable).find(|r| r.dataset_id == id && r.model == c.model);
            if hit.is_none() {
                log::warn!("configured model {} on {id} has no successful report; using the best test R²", c.model);
            }
            hit
        });
        let (report, reason) = match configured {
            Some(r) => (r, "configured"),
            None => {
                let best = reports.iter().filter(usable).filter(|r| r.test_r2.is_some()).max_by(|a, b| {
                    a.test_r2
                        .unwrap_or(f64::NEG_INFINITY)
                        .total_cmp(&b.test_r2.unwrap_or(f64::NEG_INFINITY))
                        .then_with(|| b.dataset_id.cmp(&a.dataset_id))
                        .then_with(|| b.model.cmp(&a.model))
                });
                match best {
                    Some(r) => (r, "best_test_r2"),
                    None => {
                        log::warn!("depth {bin}: no successful model to select");
                        return Ok(None);
                    }
                }
            }
        };
        let mut spec = ModelSpec::preset(&report.model)?;
        spec.params = report.params.clone();
        spec.seed = report.seed;
        let table = FeatureTable::read_csv(self.dataset_file(&report.dataset_id))?;
        let plan = self.plan_for(&table)?;
        let train = plan.train_rows();
        let names = screen_features(&table, &train, self.cfg.top_k)?;
        let x = table.select(&names)?.select_rows(&train);
        let target = table.target().unwrap_or_default();
        let y: Vec<f64> = train.iter().map(|&r| target[r]).collect();
        let model = fit_model(&spec, &x, &y, &names)?;
        let model_file = format!("model_depth_{}.json", bin.slug());
        let path = dir.join(&model_file);
        model.save(&path)?;
        let sel = Selection {
            depth: bin,
            dataset_id: report.dataset_id.clone(),
            model: report.model.clone(),
            spec,
            test_r2: report.test_r2,
            test_rmse: report.test_rmse,
            val_r2: report.val_r2,
            model_file,
            fingerprint: model.fingerprint()?,
            reason: reason.into(),
        };
        Ok(Some((sel, path)))
    }

    /// Picks and fits the mapped model of each depth bin.
    pub fn select(&self) -> Result<StageOutcome> {
        let mut inputs: Vec<PathBuf> = self.cfg.depth_bins.iter().map(|&b| self.reports_file(b)).collect();
        require(&inputs, "train")?;
        inputs.extend(self.cfg.depth_bins.iter().flat_map(|&b| self.bin_ids(b)).map(|id| self.dataset_file(&id)));
        require(&inputs, "features")?;
        let dir = self.stage_dir("select");
        self.run("select", &dir, &inputs, || {
            let mut selections = Vec::new();
            let mut outputs = Vec::new();
            for &bin in &self.cfg.depth_bins {
                if let Some((s, p)) = self.select_bin(bin, &dir)? {
                    selections.push(s);
                    outputs.push(p);
                }
            }
            outputs.push(write_json(&self.selection_file(), &selections)?);
            Ok(outputs)
        })
    }

    pub fn selections(&self) -> Result<Vec<Selection>> {
        read_json(&self.selection_file(), "select")
    }

    pub fn map_dir(&self, date: NaiveDate) -> PathBuf {
        self.stage_dir("maps").join(date.format("%Y-%m-%d").to_string())
    }

    fn water_mask(&self, stack: &BandStack) -> Result<Mask> {
        let mask = match &self.cfg.paths.water_mask {
            Some(f) => rasterize_polygons(&read_geojson(f)?, stack.transform(), stack.width(), stack.height())?,
            None => Mask::filled(stack.width(), stack.height(), true),
        };
        Ok(mask.erode(self.cfg.map.erosion_radius))
    }

    /// Chlorophyll maps of every selected depth bin on `date`.
    pub fn infer(&self, date: NaiveDate) -> Result<StageOutcome> {
        let sel_file = self.selection_file();
        require(&[sel_file.clone(), self.scenes_file()], "select")?;
        let selections = self.selections()?;
        let scenes = self.kept_scenes()?;
        let mut inputs = vec![sel_file, self.scenes_file()];
        let mut jobs = Vec::new();
        for s in &selections {
            let (set, w, _) = parse_dataset_id(&s.dataset_id)?;
            let processor = set.processor();
            let scene = scenes.iter().find(|e| e.date == date && e.processor == processor).ok_or_else(|| {
                Error::MissingInput(format!("no {processor} scene on {date} among the ingested scenes"))
            })?;
            inputs.push(self.stage_dir("select").join(&s.model_file));
            require(&[scene.path.clone()], "ingest")?;
            inputs.push(scene.path.clone());
            jobs.push((s, set, w, scene.path.clone()));
        }
        inputs.extend(self.cfg.paths.water_mask.clone());
        require(&inputs, "select")?;
        inputs.sort();
        inputs.dedup();
        let dir = self.map_dir(date);
        self.run("infer", &dir, &inputs, || {
            let mut outputs = Vec::new();
            let mut cache: BTreeMap<PathBuf, BandStack> = BTreeMap::new();
            for (s, set, w, scene) in jobs {
                if !cache.contains_key(&scene) {
                    let st = self.load_stack(&scene)?;
                    cache.insert(scene.clone(), st);
                }
                let stack = &cache[&scene];
                outputs.extend(self.map_one(s, set, w, stack, date, &dir)?);
            }
            Ok(outputs)
        })
    }

    fn map_one(
        &self,
        s: &Selection,
        set: ReflectanceSet,
        w: usize,
        stack: &BandStack,
        date: NaiveDate,
        dir: &Path,
    ) -> Result<Vec<PathBuf>> {
        let model = TrainedModel::load(self.stage_dir("select").join(&s.model_file))?;
        let plan = FeaturePlan::for_columns(set, &model.feature_names)?;
        let table = extract_pixels(stack, &self.water_mask(stack)?, &plan, w)?;
        let mut map = predict_map(&model, &table, stack.width(), stack.height(), stack.transform())?;
        map.provenance.date = Some(date);
        map.provenance.depth = s.depth.slug();
        map.provenance.dataset_id = s.dataset_id.clone();
        map.provenance.config_hash = Some(self.config_hash.clone());
        let stem = dir.join(format!("chl_depth_{}", s.depth.slug()));
        let with = |ext: &str| PathBuf::from(format!("{}.{ext}", stem.display()));
        let mut out = Vec::new();
        for ext in ["tif", "bsf"] {
            map.write_raster(with(ext))?;
            out.push(with(ext));
        }
        let csv = PathBuf::from(format!("{}_predictions.csv", stem.display()));
        map.write_predictions_csv(&csv)?;
        out.push(csv);
        map.write_provenance(with("provenance.json"))?;
        out.push(with("provenance.json"));
        let palette = self.cfg.map.palette.clone().unwrap_or_else(Palette::default_chl);
        let vmax = percentile(&map.values, self.cfg.map.percentile);
        let rendered = render_png(&map, &palette, self.cfg.map.gamma, vmax)?;
        rendered.write(with("png"))?;
        out.push(with("png"));
        out.push(with("colorbar.json"));
        Ok(out)
    }

    /// Result tables of datasets × models per metric and depth bin.
    pub fn report(&self) -> Result<StageOutcome> {
        let inputs: Vec<PathBuf> = self.cfg.depth_bins.iter().map(|&b| self.reports_file(b)).collect();
        require(&inputs, "train")?;
        let dir = self.stage_dir("report");
        self.run("report", &dir, &inputs, || {
            let mut all = Vec::new();
            for &bin in &self.cfg.depth_bins {
                all.extend(self.final_reports(bin)?);
            }
            let tables = build_tables(&all, REPORT_ROWS);
            let mut outputs = Vec::new();
            for t in &tables {
                let f = dir.join(t.file_name());
                std::fs::write(&f, t.to_csv()).map_err(|e| Error::io(&f, e))?;
                outputs.push(f);
            }
            outputs.push(write_json(&dir.join("tables.json"), &tables)?);
            outputs.push(write_json(&dir.join("reports.json"), &all)?);
            Ok(outputs)
        })
    }
}

/// Valid fraction of `TOA_B3` over the whole grid.
fn whole_grid_valid_fraction(stack: &BandStack) -> Result<f64> {
    let b = stack.band("TOA_B3").ok_or_else(|| Error::Contract("scene lacks band TOA_B3".into()))?;
    let valid = b.data.iter().filter(|v| !v.is_nan() && **v != 0.0).count();
    Ok(valid as f64 / b.data.len().max(1) as f64)
}
