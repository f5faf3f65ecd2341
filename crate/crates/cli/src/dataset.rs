//! Dataset directories: `dataset.toml` (the canonical experiment config),
//! `manifest.csv` and one LONR raster per sample under `train/`, `val/` and
//! `test/`.

use std::path::Path;

use lon_core::datasets::{
    add_noise, assign_classes, generate_blobs, generate_ellipses, grad2_target, load_idx, make_grad_samples,
    read_manifest, synthetic_digits, write_manifest, ClassKey, ManifestRow, ShapeSample,
};
use lon_core::image::io::{load_raster, save_raster};
use lon_core::rng::{stream_rng, Stream};
use lon_core::train::{Example, Label, Split};
use lon_core::Image;

use crate::artifacts::ensure_dir;
use crate::config::{ExperimentConfig, Generator, Task};
use crate::error::{CliError, Result};

pub const CONFIG_FILE: &str = "dataset.toml";
pub const MANIFEST_FILE: &str = "manifest.csv";
pub const SPLITS: [Split; 3] = [Split::Train, Split::Val, Split::Test];

/// Noise substreams start here so they never coincide with the noise fields
/// drawn by the blob generator.
const NOISE_STREAM_OFFSET: u64 = 1 << 40;

/// Split of sample `i` in generation order.
fn split_of(cfg: &ExperimentConfig, i: usize) -> Split {
    let d = &cfg.dataset;
    if i < d.train_count {
        Split::Train
    } else if i < d.train_count + d.val_count {
        Split::Val
    } else {
        Split::Test
    }
}

fn file_name(split: Split, i: usize) -> String {
    format!("{}/{i:05}.lonr", split.as_str())
}

fn shape_samples(cfg: &ExperimentConfig) -> Result<Vec<ShapeSample>> {
    let d = &cfg.dataset;
    let n = d.total();
    let mut samples = match d.generator {
        Generator::Blobs => generate_blobs(cfg.seed, n)?,
        Generator::Ellipses => {
            let c = d.constraint.ok_or_else(|| CliError::Config("ellipses need a constraint".into()))?;
            generate_ellipses(cfg.seed, n, c.to_constraint())?
        }
        _ => unreachable!("validated"),
    };
    match cfg.task {
        Task::AreaClassification => assign_classes(&mut samples, ClassKey::Area)?,
        Task::PerimeterClassification => assign_classes(&mut samples, ClassKey::Perimeter)?,
        _ => {}
    }
    if d.noise_sigma > 0.0 {
        samples = samples
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let mut rng = stream_rng(cfg.seed, Stream::Noise, NOISE_STREAM_OFFSET + i as u64);
                add_noise(s, d.noise_sigma, &mut rng)
            })
            .collect::<lon_core::Result<_>>()?;
    }
    Ok(samples)
}

fn digit_images(cfg: &ExperimentConfig) -> Result<Vec<Image>> {
    let n = cfg.dataset.total();
    match cfg.dataset.generator {
        Generator::Digits => Ok(synthetic_digits(cfg.seed, n)?.0),
        Generator::Idx => {
            let path = cfg.dataset.idx_path.as_deref().expect("validated");
            let mut imgs = load_idx(path)?;
            if imgs.len() < n {
                return Err(CliError::Config(format!("{path} holds {} images, {n} requested", imgs.len())));
            }
            imgs.truncate(n);
            Ok(imgs)
        }
        _ => unreachable!("validated"),
    }
}

/// Writes the dataset for `cfg` into `dir`. Re-running overwrites it with
/// identical bytes.
pub fn generate(cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<ManifestRow>> {
    for split in SPLITS {
        ensure_dir(&dir.join(split.as_str()))?;
    }
    let config_path = dir.join(CONFIG_FILE);
    std::fs::write(&config_path, cfg.canonical()).map_err(|e| CliError::io(&config_path, e))?;
    let mut rows = Vec::with_capacity(cfg.dataset.total());
    if cfg.task.is_shape_task() {
        for (i, s) in shape_samples(cfg)?.into_iter().enumerate() {
            let file = file_name(split_of(cfg, i), i);
            save_raster(dir.join(&file), &s.image)?;
            rows.push(ManifestRow {
                file,
                area: Some(s.area),
                perimeter: Some(s.perimeter),
                class: s.class_label,
                scale: None,
                noise_sigma: s.noise_sigma,
            });
        }
    } else {
        for (i, s) in make_grad_samples(&digit_images(cfg)?, cfg.seed)?.into_iter().enumerate() {
            let file = file_name(split_of(cfg, i), i);
            save_raster(dir.join(&file), &s.input)?;
            rows.push(ManifestRow {
                file,
                area: None,
                perimeter: None,
                class: None,
                scale: Some(s.scale_factor),
                noise_sigma: 0.0,
            });
        }
    }
    write_manifest(dir.join(MANIFEST_FILE), &rows)?;
    Ok(rows)
}

#[derive(Debug, Clone)]
pub struct Sample {
    pub file: String,
    pub row: ManifestRow,
    pub example: Example,
}

/// A loaded dataset directory.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub config: ExperimentConfig,
    pub train: Vec<Sample>,
    pub val: Vec<Sample>,
    pub test: Vec<Sample>,
    /// Scalar regression targets are divided by this (the training mean).
    pub target_scale: f64,
}

impl Dataset {
    pub fn split(&self, split: Split) -> &[Sample] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    pub fn examples(&self, split: Split) -> Vec<Example> {
        self.split(split).iter().map(|s| s.example.clone()).collect()
    }

    pub fn image_size(&self) -> (usize, usize) {
        let img = &self.train[0].example.input;
        (img.width(), img.height())
    }
}

fn scalar_target(task: Task, row: &ManifestRow) -> Result<f64> {
    let v = match task {
        Task::AreaRegression => row.area,
        Task::PerimeterRegression => row.perimeter,
        _ => unreachable!("scalar task"),
    };
    v.ok_or_else(|| CliError::Usage(format!("{}: manifest lacks the regression target", row.file)))
}

pub fn load(dir: &Path) -> Result<Dataset> {
    let config = ExperimentConfig::load(dir.join(CONFIG_FILE))?;
    let rows = read_manifest(dir.join(MANIFEST_FILE))?;
    if rows.len() != config.dataset.total() {
        return Err(CliError::Usage(format!(
            "manifest has {} rows, config expects {}",
            rows.len(),
            config.dataset.total()
        )));
    }
    let task = config.task;
    let target_scale = if matches!(task, Task::AreaRegression | Task::PerimeterRegression) {
        let train: Vec<f64> =
            rows[..config.dataset.train_count].iter().map(|r| scalar_target(task, r)).collect::<Result<_>>()?;
        train.iter().sum::<f64>() / train.len() as f64
    } else {
        1.0
    };
    let mut ds = Dataset { config, train: Vec::new(), val: Vec::new(), test: Vec::new(), target_scale };
    for (i, row) in rows.into_iter().enumerate() {
        let input = load_raster(dir.join(&row.file))?;
        let label = match task {
            Task::Grad2Regression => Label::Map(grad2_target(&input)?),
            Task::AreaRegression | Task::PerimeterRegression => {
                Label::Values(vec![scalar_target(task, &row)? / target_scale])
            }
            _ => {
                Label::Class(row.class.ok_or_else(|| CliError::Usage(format!("{}: manifest lacks a class", row.file)))?)
            }
        };
        let sample = Sample { file: row.file.clone(), row, example: Example { input, label } };
        match split_of(&ds.config, i) {
            Split::Train => ds.train.push(sample),
            Split::Val => ds.val.push(sample),
            Split::Test => ds.test.push(sample),
        }
    }
    Ok(ds)
}
