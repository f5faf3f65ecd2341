//! The subcommands, callable without the argument parser.

use std::path::{Path, PathBuf};
use std::time::Instant;

use lon_core::analysis::{
    boundary_mass_ratio, gaussian_radius, local_histogram, saliency as saliency_map, BOUNDARY_BAND,
};
use lon_core::datasets::ManifestRow;
use lon_core::image::gaussian_kernel;
use lon_core::image::io::{load_image, save_raster, write_pgm_preview};
use lon_core::layers::{load_checkpoint, save_checkpoint, HeadSpec, Layer, LayerSpec};
use lon_core::train::{argmax, evaluate, loss, run_suite, train as fit, Label, LossKind, Metrics, Split, TrainConfig};
use lon_core::{Image, Kernel};
use serde::Serialize;

use crate::artifacts::{ensure_dir, fmt_opt, hash_text, write_csv};
use crate::config::{ExperimentConfig, Task};
use crate::dataset::{self, Dataset, Sample};
use crate::error::{CliError, Result};

pub fn loss_kind(task: Task) -> LossKind {
    match task {
        Task::Grad2Regression => LossKind::PixelwiseMse,
        Task::AreaRegression | Task::PerimeterRegression => LossKind::ScalarMse,
        Task::AreaClassification | Task::PerimeterClassification => LossKind::SoftmaxCrossEntropy,
    }
}

/// Short label such as `lon-2x8` or `cnn-2-relu`, read from a layer.
pub fn spec_label(spec: &LayerSpec) -> String {
    use lon_core::layers::Activation;
    match spec.activation {
        Activation::GaussBell => format!("lon-{}x{}", spec.kernels, spec.bins),
        a => format!("cnn-{}-{}", spec.kernels, a.name()),
    }
}

pub fn generate(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<ManifestRow>> {
    dataset::generate(cfg, out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamCounts {
    pub formula: usize,
    pub actual: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricSummary {
    pub loss: f64,
    pub accuracy: Option<f64>,
}

impl From<Metrics> for MetricSummary {
    fn from(m: Metrics) -> Self {
        MetricSummary { loss: m.loss, accuracy: m.accuracy }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LrRun {
    pub lr: f64,
    pub failed: bool,
    pub divergence: Option<String>,
    pub final_train: Option<MetricSummary>,
    pub final_val: Option<MetricSummary>,
    pub test: Option<MetricSummary>,
    pub metrics_csv: PathBuf,
    pub checkpoint: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub config_hash: String,
    pub model: String,
    pub task: Task,
    pub seed: u64,
    pub params: ParamCounts,
    pub runs: Vec<LrRun>,
    /// Index into `runs` of the best validation result, if any run finished.
    pub best: Option<usize>,
    pub best_checkpoint: Option<PathBuf>,
    pub wall_clock_secs: f64,
}

impl RunReport {
    pub fn best_run(&self) -> Option<&LrRun> {
        self.best.map(|i| &self.runs[i])
    }
}

fn metrics_cells(m: &Metrics) -> [String; 2] {
    [m.loss.to_string(), fmt_opt(m.accuracy)]
}

/// Validation ordering: higher accuracy, then lower loss.
fn better(a: &MetricSummary, b: &MetricSummary) -> bool {
    match (a.accuracy, b.accuracy) {
        (Some(x), Some(y)) if x != y => x > y,
        _ => a.loss < b.loss,
    }
}

/// Checks that the dataset was generated for the same task and samples.
fn check_dataset(cfg: &ExperimentConfig, ds: &Dataset) -> Result<()> {
    if cfg.task != ds.config.task || cfg.dataset != ds.config.dataset {
        return Err(CliError::Usage(format!(
            "dataset was generated for task {:?} with a different dataset section",
            ds.config.task
        )));
    }
    Ok(())
}

/// Trains one model per learning rate and writes `metrics_lr{i}.csv`,
/// `model_lr{i}.lonc`, the best model as `model.lonc`, `config.toml` and
/// `report.json` into `out`.
pub fn train(cfg: &ExperimentConfig, data: &Path, out: &Path) -> Result<RunReport> {
    let start = Instant::now();
    let ds = dataset::load(data)?;
    check_dataset(cfg, &ds)?;
    ensure_dir(out)?;
    let hash = cfg.hash();
    let config_path = out.join("config.toml");
    std::fs::write(&config_path, cfg.canonical()).map_err(|e| CliError::io(&config_path, e))?;

    let (w, h) = ds.image_size();
    let spec = cfg.layer_spec(w, h);
    let train_set = ds.examples(Split::Train);
    let val_set = ds.examples(Split::Val);
    let test_set = ds.examples(Split::Test);
    let inputs: Vec<Image> = train_set.iter().map(|e| e.input.clone()).collect();
    let init = Layer::initialise(spec, cfg.seed, &inputs)?;
    let counts = init.count_params();
    let kind = loss_kind(cfg.task);

    let mut runs = Vec::with_capacity(cfg.train.lrs.len());
    let mut best: Option<usize> = None;
    for (i, &lr) in cfg.train.lrs.iter().enumerate() {
        let tc =
            TrainConfig { epochs: cfg.train.epochs, batch_size: cfg.train.batch_size, lr, loss: kind, seed: cfg.seed };
        let outcome = fit(init.clone(), &train_set, &val_set, &tc)?;
        let last = |split: Split| outcome.rows.iter().rev().find(|r| r.split == split).map(|r| r.metrics);
        let (final_train, final_val) = (last(Split::Train), last(Split::Val));
        let failed = outcome.diverged.is_some();
        let test = if failed { None } else { Some(evaluate(&outcome.layer, &test_set, kind)?) };

        let mut rows: Vec<Vec<String>> = outcome
            .rows
            .iter()
            .map(|r| {
                let [l, a] = metrics_cells(&r.metrics);
                vec![r.epoch.to_string(), r.split.as_str().to_string(), l, a]
            })
            .collect();
        if let Some(t) = &test {
            let epoch = outcome.rows.last().map_or(0, |r| r.epoch);
            let [l, a] = metrics_cells(t);
            rows.push(vec![epoch.to_string(), Split::Test.as_str().to_string(), l, a]);
        }
        let metrics_csv = out.join(format!("metrics_lr{i}.csv"));
        write_csv(&metrics_csv, &hash, &["epoch", "split", "loss", "accuracy"], &rows)?;
        let checkpoint = out.join(format!("model_lr{i}.lonc"));
        save_checkpoint(&checkpoint, &outcome.layer)?;

        if !failed {
            if let Some(v) = final_val {
                let v = MetricSummary::from(v);
                let improves = match best {
                    None => true,
                    Some(b) => runs_val(&runs, b).is_none_or(|bv| better(&v, &bv)),
                };
                if improves {
                    best = Some(i);
                }
            }
        }
        runs.push(LrRun {
            lr,
            failed,
            divergence: outcome.diverged.map(|d| format!("epoch {}: {}", d.epoch, d.message)),
            final_train: final_train.map(Into::into),
            final_val: final_val.map(Into::into),
            test: test.map(Into::into),
            metrics_csv,
            checkpoint,
        });
    }

    let best_checkpoint = match best {
        Some(b) => {
            let dst = out.join("model.lonc");
            std::fs::copy(&runs[b].checkpoint, &dst).map_err(|e| CliError::io(&dst, e))?;
            Some(dst)
        }
        None => None,
    };
    let report = RunReport {
        config_hash: hash,
        model: cfg.model_label(),
        task: cfg.task,
        seed: cfg.seed,
        params: ParamCounts { formula: counts.formula, actual: counts.actual },
        runs,
        best,
        best_checkpoint,
        wall_clock_secs: start.elapsed().as_secs_f64(),
    };
    let report_path = out.join("report.json");
    let json = serde_json::to_string_pretty(&report).expect("report serialises");
    std::fs::write(&report_path, json).map_err(|e| CliError::io(&report_path, e))?;
    if report.best.is_none() {
        return Err(CliError::Numeric("every learning rate diverged".into()));
    }
    Ok(report)
}

fn runs_val(runs: &[LrRun], i: usize) -> Option<MetricSummary> {
    runs.get(i).and_then(|r| r.final_val)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub model: String,
    pub split: Split,
    pub samples: usize,
    pub params: ParamCounts,
    pub metrics: Metrics,
}

fn load_layer(path: &Path) -> Result<Layer> {
    load_checkpoint(path).map_err(|e| match e {
        lon_core::Error::Io(source) => CliError::io(path, source),
        e => e.into(),
    })
}

fn check_layer(layer: &Layer, ds: &Dataset) -> Result<()> {
    let (w, h) = ds.image_size();
    let spec = layer.spec();
    if let HeadSpec::Dense { outputs, width, height } = spec.head {
        if (width, height) != (w, h) {
            return Err(CliError::Usage(format!("checkpoint expects {width}x{height} inputs, dataset has {w}x{h}")));
        }
        if outputs != ds.config.task.outputs() {
            return Err(CliError::Usage(format!(
                "checkpoint has {outputs} outputs, task needs {}",
                ds.config.task.outputs()
            )));
        }
    }
    let map_head = matches!(spec.head, HeadSpec::OneByOne { pooled: false });
    if map_head != (ds.config.task == Task::Grad2Regression) {
        return Err(CliError::Usage("checkpoint head does not fit the dataset task".into()));
    }
    Ok(())
}

/// Evaluates a checkpoint on one split, writing `eval.csv` (parameter count
/// and metric) and `predictions.csv` (one row per sample) into `out`.
pub fn eval(checkpoint: &Path, data: &Path, split: Split, out: &Path) -> Result<EvalResult> {
    let layer = load_layer(checkpoint)?;
    let ds = dataset::load(data)?;
    check_layer(&layer, &ds)?;
    ensure_dir(out)?;
    let hash = ds.config.hash();
    let kind = loss_kind(ds.config.task);
    let samples = ds.split(split);
    let examples = ds.examples(split);
    let metrics = evaluate(&layer, &examples, kind)?;
    let counts = layer.count_params();
    let result = EvalResult {
        model: spec_label(layer.spec()),
        split,
        samples: samples.len(),
        params: ParamCounts { formula: counts.formula, actual: counts.actual },
        metrics,
    };
    let [l, a] = metrics_cells(&metrics);
    write_csv(
        &out.join("eval.csv"),
        &hash,
        &["model", "split", "samples", "param_count", "formula_param_count", "loss", "accuracy"],
        &[vec![
            result.model.clone(),
            split.as_str().to_string(),
            samples.len().to_string(),
            counts.actual.to_string(),
            counts.formula.to_string(),
            l,
            a,
        ]],
    )?;
    let rows = samples.iter().map(|s| prediction_row(&layer, s, kind, ds.target_scale)).collect::<Result<Vec<_>>>()?;
    write_csv(&out.join("predictions.csv"), &hash, &["file", "target", "prediction", "loss"], &rows)?;
    Ok(result)
}

fn prediction_row(layer: &Layer, s: &Sample, kind: LossKind, target_scale: f64) -> Result<Vec<String>> {
    let out = layer.predict(&s.example.input)?;
    let (value, _) = loss(kind, out.values(), s.example.label.target())?;
    let (target, prediction) = match &s.example.label {
        Label::Class(c) => (c.to_string(), argmax(out.values()).to_string()),
        Label::Values(v) => ((v[0] * target_scale).to_string(), (out.values()[0] * target_scale).to_string()),
        Label::Map(_) => (String::new(), String::new()),
    };
    Ok(vec![s.file.clone(), target, prediction, value.to_string()])
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyRow {
    pub id: usize,
    pub file: String,
    pub true_class: Option<usize>,
    pub predicted_class: Option<usize>,
    pub loss: f64,
    pub boundary_mass: f64,
    pub map: Image,
}

/// Global sample ids of the test split.
pub fn test_ids(data: &Path) -> Result<Vec<usize>> {
    let ds = dataset::load(data)?;
    let start = ds.train.len() + ds.val.len();
    Ok((start..start + ds.test.len()).collect())
}

/// Saliency maps `|dE/dI|` for the samples `ids` (indices in manifest
/// order). Writes `saliency/<id>.lonr`, a min-max scaled
/// `saliency/<id>.pgm`, `saliency_scale.csv`, `boundary_mass.csv` and the
/// per-model mean in `boundary_mass_summary.csv`.
pub fn saliency(checkpoint: &Path, data: &Path, ids: &[usize], out: &Path) -> Result<Vec<SaliencyRow>> {
    let layer = load_layer(checkpoint)?;
    let ds = dataset::load(data)?;
    if !ds.config.task.is_classification() {
        return Err(CliError::Usage("saliency needs a classification dataset".into()));
    }
    check_layer(&layer, &ds)?;
    let all: Vec<&Sample> = ds.train.iter().chain(&ds.val).chain(&ds.test).collect();
    let maps_dir = out.join("saliency");
    ensure_dir(&maps_dir)?;
    let hash = ds.config.hash();
    let model = spec_label(layer.spec());

    let mut rows = Vec::with_capacity(ids.len());
    let mut scale_rows = Vec::with_capacity(ids.len());
    for &id in ids {
        let s =
            all.get(id).ok_or_else(|| CliError::Usage(format!("unknown sample id {id} ({} samples)", all.len())))?;
        let m = saliency_map(&layer, &s.example.input, &s.example.label, LossKind::SoftmaxCrossEntropy)?;
        let mask = s.example.input.map(|v| if v > 0.5 { 1.0 } else { 0.0 });
        let ratio = boundary_mass_ratio(&m.map, &mask)?;
        save_raster(maps_dir.join(format!("{id:05}.lonr")), &m.map)?;
        let pgm = maps_dir.join(format!("{id:05}.pgm"));
        let file = std::fs::File::create(&pgm).map_err(|e| CliError::io(&pgm, e))?;
        let (lo, hi) = write_pgm_preview(std::io::BufWriter::new(file), &m.map)?;
        scale_rows.push(vec![id.to_string(), lo.to_string(), hi.to_string()]);
        rows.push(SaliencyRow {
            id,
            file: s.file.clone(),
            true_class: m.true_class,
            predicted_class: m.predicted_class,
            loss: m.loss,
            boundary_mass: ratio,
            map: m.map,
        });
    }
    write_csv(&out.join("saliency_scale.csv"), &hash, &["id", "min", "max"], &scale_rows)?;
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.id.to_string(),
                r.file.clone(),
                model.clone(),
                fmt_opt(r.true_class),
                fmt_opt(r.predicted_class),
                r.loss.to_string(),
                r.boundary_mass.to_string(),
            ]
        })
        .collect();
    write_csv(
        &out.join("boundary_mass.csv"),
        &hash,
        &["id", "file", "model", "true_class", "predicted_class", "loss", "boundary_mass_ratio"],
        &csv_rows,
    )?;
    let mean = if rows.is_empty() {
        String::new()
    } else {
        (rows.iter().map(|r| r.boundary_mass).sum::<f64>() / rows.len() as f64).to_string()
    };
    write_csv(
        &out.join("boundary_mass_summary.csv"),
        &hash,
        &["model", "samples", "band", "mean_boundary_mass_ratio"],
        &[vec![model, rows.len().to_string(), BOUNDARY_BAND.to_string(), mean]],
    )?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckRow {
    pub case: String,
    pub group: String,
    pub entries: usize,
    pub max_rel_error: f64,
    pub passed: bool,
}

/// Runs the finite-difference suite over every architecture variant and
/// writes `gradcheck.csv`. Any failing group gives a numeric error after the
/// file is written.
pub fn gradcheck(seed: u64, step: f64, tolerance: f64, out: &Path) -> Result<Vec<GradcheckRow>> {
    ensure_dir(out)?;
    let hash = hash_text(&format!("gradcheck\nseed = {seed}\nstep = {step}\ntolerance = {tolerance}\n"));
    let mut rows = Vec::new();
    for (case, report) in run_suite(seed, step, tolerance)? {
        for g in report.groups {
            rows.push(GradcheckRow {
                case: case.clone(),
                passed: g.max_rel_error < tolerance,
                group: g.group,
                entries: g.entries,
                max_rel_error: g.max_rel_error,
            });
        }
    }
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.case.clone(),
                r.group.clone(),
                r.entries.to_string(),
                r.max_rel_error.to_string(),
                r.passed.to_string(),
            ]
        })
        .collect();
    write_csv(&out.join("gradcheck.csv"), &hash, &["case", "group", "entries", "max_rel_error", "passed"], &cells)?;
    let failed: Vec<String> = rows.iter().filter(|r| !r.passed).map(|r| format!("{}:{}", r.case, r.group)).collect();
    if let Some(first) = failed.first() {
        return Err(CliError::Numeric(format!(
            "gradient check failed for {} of {} groups, first {first}",
            failed.len(),
            rows.len()
        )));
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeParams {
    pub x: usize,
    pub y: usize,
    /// Scale of the Gaussian `K`; 0 uses the identity.
    pub k_scale: f64,
    /// Scale of the aggregation window `W`; 0 is a single pixel.
    pub w_scale: f64,
    pub bins: usize,
    /// Tonal scale; defaults to the bin spacing.
    pub sigma: Option<f64>,
}

/// Digest of an image's size and samples, so the probe hash does not depend
/// on where the file lives.
fn image_digest(img: &Image) -> String {
    let mut text = format!("{}x{}", img.width(), img.height());
    for v in img.data() {
        text.push(' ');
        text.push_str(&v.to_string());
    }
    hash_text(&text)
}

/// Local histogram at one pixel over a grid spanning the filtered image's
/// range, written to `probe.csv` as `bin,center,value`.
pub fn probe(image: &Path, p: &ProbeParams, out: &Path) -> Result<Vec<(f64, f64)>> {
    let img = load_image(image)?;
    if p.x >= img.width() || p.y >= img.height() {
        return Err(CliError::Usage(format!(
            "pixel ({}, {}) is outside the {}x{} image",
            p.x,
            p.y,
            img.width(),
            img.height()
        )));
    }
    if p.bins < 2 {
        return Err(CliError::Usage("probe needs at least 2 bins".into()));
    }
    let k =
        if p.k_scale > 0.0 { gaussian_kernel(p.k_scale, gaussian_radius(p.k_scale))? } else { Kernel::identity(1)? };
    let (lo, hi) = (img.min(), img.max());
    let span = if hi > lo { hi - lo } else { 1.0 };
    let db = span / (p.bins - 1) as f64;
    let grid: Vec<f64> = (0..p.bins).map(|i| lo + i as f64 * db).collect();
    let sigma = p.sigma.unwrap_or(db);
    let stack = local_histogram(&img, &k, p.w_scale, &grid, sigma)?;
    let probe = stack.probe(p.x, p.y);
    ensure_dir(out)?;
    let hash = hash_text(&format!(
        "probe\nimage = {}\nx = {}\ny = {}\nk_scale = {}\nw_scale = {}\nbins = {}\nsigma = {sigma}\n",
        image_digest(&img),
        p.x,
        p.y,
        p.k_scale,
        p.w_scale,
        p.bins
    ));
    let rows: Vec<Vec<String>> = probe
        .grid
        .iter()
        .zip(&probe.values)
        .enumerate()
        .map(|(i, (b, v))| vec![i.to_string(), b.to_string(), v.to_string()])
        .collect();
    write_csv(&out.join("probe.csv"), &hash, &["bin", "center", "value"], &rows)?;
    Ok(probe.grid.into_iter().zip(probe.values).collect())
}
