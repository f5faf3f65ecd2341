use std::path::Path;
use std::process::Command;

use lon_cli::artifacts::read_csv;
use lon_cli::commands::{self, ProbeParams};
use lon_cli::{dataset, CliError, ExperimentConfig};
use lon_core::datasets::read_manifest;
use lon_core::layers::{load_checkpoint, Layer};
use lon_core::train::Split;
use lon_core::Image;
use tempfile::tempdir;

fn ellipse_config(task: &str, train: usize, test: usize, epochs: usize, lrs: &str) -> String {
    format!(
        r#"
seed = 7
task = "{task}"

[model]
kind = "lon"
kernels = 2
bins = 2

[train]
epochs = {epochs}
batch_size = 8
lrs = {lrs}

[dataset]
generator = "ellipses"
train_count = {train}
val_count = 6
test_count = {test}
constraint = {{ kind = "constant_area", value = 2000.0 }}
"#
    )
}

fn grad2_config(bins: usize, epochs: usize) -> String {
    format!(
        r#"
seed = 3
task = "grad2_regression"

[model]
kind = "lon"
kernels = 2
bins = {bins}
head = "one_by_one"

[train]
epochs = {epochs}
batch_size = 4
lrs = [0.005]

[dataset]
generator = "digits"
train_count = 8
val_count = 2
test_count = 2
"#
    )
}

fn cfg(text: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml(text).unwrap()
}

fn bytes(p: impl AsRef<Path>) -> Vec<u8> {
    std::fs::read(p).unwrap()
}

#[test]
fn config_hash_ignores_formatting_and_defaults() {
    let a = cfg(&ellipse_config("perimeter_classification", 12, 6, 1, "[1e-3]"));
    let mut text = ellipse_config("perimeter_classification", 12, 6, 1, "[0.001]");
    text = text.replace("bins = 2", "bins = 2 # comment\nkernel_side = 3\nboundary = \"reflect\"");
    let b = cfg(&text);
    assert_eq!(a.hash(), b.hash());
    assert_eq!(a.hash().len(), 64);
    let c = cfg(&ellipse_config("perimeter_classification", 12, 6, 2, "[1e-3]"));
    assert_ne!(a.hash(), c.hash());
    assert_eq!(ExperimentConfig::from_toml(&a.canonical()).unwrap(), a);
}

#[test]
fn invalid_configs_are_rejected() {
    let base = ellipse_config("perimeter_classification", 12, 6, 1, "[1e-3]");
    let bad = [
        base.replace("lrs = [1e-3]", "lrs = []"),
        base.replace("train_count = 12", "train_count = 0"),
        base.replace("batch_size = 8", "batch_size = 0"),
        base.replace("bins = 2", "bins = 2\nactivation = \"relu\""),
        base.replace("kind = \"lon\"", "kind = \"cnn\""),
        base.replace("bins = 2", "bins = 2\nhead = \"one_by_one\""),
        base.replace("seed = 7", "seed = 7\ncolour = \"red\""),
        base.replace("generator = \"ellipses\"", "generator = \"digits\""),
        grad2_config(8, 1).replace("head = \"one_by_one\"", "head = \"dense\""),
        grad2_config(8, 1).replace("bins = 8", "bins = 8\nkernel_side = 5"),
    ];
    for text in &bad {
        assert!(matches!(ExperimentConfig::from_toml(text), Err(CliError::Config(_))), "{text}");
    }
}

#[test]
fn generate_is_byte_identical_across_runs() {
    let c = cfg(&ellipse_config("perimeter_classification", 12, 6, 1, "[1e-3]"));
    let (a, b) = (tempdir().unwrap(), tempdir().unwrap());
    commands::generate(&c, a.path()).unwrap();
    commands::generate(&c, b.path()).unwrap();
    commands::generate(&c, b.path()).unwrap();
    assert_eq!(bytes(a.path().join("manifest.csv")), bytes(b.path().join("manifest.csv")));
    assert_eq!(bytes(a.path().join("test/00023.lonr")), bytes(b.path().join("test/00023.lonr")));
}

#[test]
fn blob_dataset_has_balanced_tertiles() {
    let text = ellipse_config("area_classification", 180, 14, 1, "[1e-3]")
        .replace("generator = \"ellipses\"", "generator = \"blobs\"")
        .replace("constraint = { kind = \"constant_area\", value = 2000.0 }", "");
    let dir = tempdir().unwrap();
    let rows = commands::generate(&cfg(&text), dir.path()).unwrap();
    assert_eq!(rows.len(), 200);
    assert_eq!(read_manifest(dir.path().join("manifest.csv")).unwrap(), rows);
    let mut sizes = [0; 3];
    for r in &rows {
        sizes[r.class.unwrap()] += 1;
    }
    assert_eq!(sizes, [67, 67, 66]);
}

#[test]
fn constant_area_manifest() {
    let dir = tempdir().unwrap();
    let rows =
        commands::generate(&cfg(&ellipse_config("perimeter_classification", 12, 6, 1, "[1e-3]")), dir.path()).unwrap();
    for r in &rows {
        assert_eq!(r.area, Some(2000.0));
        let img = lon_core::image::io::load_raster(dir.path().join(&r.file)).unwrap();
        let pixels = img.data().iter().filter(|&&v| v > 0.5).count() as f64;
        assert!((pixels / 2000.0 - 1.0).abs() < 0.015, "{pixels}");
    }
}

#[test]
fn grad2_parameter_counts() {
    for (bins, lo, hi) in [(8, 21, 35), (2, 21, 35)] {
        let c = cfg(&grad2_config(bins, 0));
        let count = Layer::zeroed(c.layer_spec(28, 28)).unwrap().count_params();
        assert!((lo..=hi).contains(&count.formula), "{count:?}");
    }
}

#[test]
fn zero_epoch_run_keeps_the_initialisation() {
    let c = cfg(&grad2_config(8, 0));
    let (data, out) = (tempdir().unwrap(), tempdir().unwrap());
    commands::generate(&c, data.path()).unwrap();
    let report = commands::train(&c, data.path(), out.path()).unwrap();
    let ds = dataset::load(data.path()).unwrap();
    let inputs: Vec<Image> = ds.train.iter().map(|s| s.example.input.clone()).collect();
    let init = Layer::initialise(c.layer_spec(28, 28), c.seed, &inputs).unwrap();
    assert_eq!(load_checkpoint(out.path().join("model.lonc")).unwrap(), init);
    assert_eq!(report.params.formula, 35);

    // the epoch-0 training row and an evaluation on the training split share a code path
    let ev = tempdir().unwrap();
    let r = commands::eval(&out.path().join("model.lonc"), data.path(), Split::Train, ev.path()).unwrap();
    let train_loss = report.runs[0].final_train.unwrap().loss;
    assert!((r.metrics.loss - train_loss).abs() <= 1e-12 * train_loss.abs().max(1.0));
}

#[test]
fn two_learning_rates_give_two_runs_and_one_best() {
    let c = cfg(&ellipse_config("perimeter_classification", 12, 6, 1, "[1e-3, 5e-4]"));
    let (data, out) = (tempdir().unwrap(), tempdir().unwrap());
    commands::generate(&c, data.path()).unwrap();
    let report = commands::train(&c, data.path(), out.path()).unwrap();
    assert_eq!(report.runs.len(), 2);
    for (i, run) in report.runs.iter().enumerate() {
        let (hash, rows) = read_csv(&out.path().join(format!("metrics_lr{i}.csv"))).unwrap();
        assert_eq!(hash, c.hash());
        // epochs 0 and 1 on train and val, then the test row
        assert_eq!(rows.len(), 5);
        assert_eq!(rows[4][1], "test");
        assert!(!run.failed);
    }
    let best = report.best_run().unwrap();
    assert_eq!(bytes(out.path().join("model.lonc")), bytes(&best.checkpoint));
    let json: serde_json::Value = serde_json::from_slice(&bytes(out.path().join("report.json"))).unwrap();
    assert_eq!(json["config_hash"], c.hash());
    assert_eq!(json["runs"].as_array().unwrap().len(), 2);

    // the final validation metric is reproduced by eval on the same split
    let ev = tempdir().unwrap();
    let r = commands::eval(&best.checkpoint, data.path(), Split::Val, ev.path()).unwrap();
    assert!((r.metrics.loss - best.final_val.unwrap().loss).abs() < 1e-12);
}

#[test]
fn training_rejects_a_mismatched_dataset() {
    let c = cfg(&ellipse_config("perimeter_classification", 12, 6, 1, "[1e-3]"));
    let data = tempdir().unwrap();
    commands::generate(&c, data.path()).unwrap();
    let other = cfg(&ellipse_config("perimeter_classification", 14, 6, 1, "[1e-3]"));
    assert!(matches!(commands::train(&other, data.path(), tempdir().unwrap().path()), Err(CliError::Usage(_))));
}

#[test]
fn untrained_classifier_is_near_chance() {
    let text = ellipse_config("perimeter_classification", 30, 600, 0, "[1e-3]");
    let c = cfg(&text);
    let (data, out, ev) = (tempdir().unwrap(), tempdir().unwrap(), tempdir().unwrap());
    commands::generate(&c, data.path()).unwrap();
    commands::train(&c, data.path(), out.path()).unwrap();
    let r = commands::eval(&out.path().join("model.lonc"), data.path(), Split::Test, ev.path()).unwrap();
    let acc = r.metrics.accuracy.unwrap();
    assert!((acc - 1.0 / 3.0).abs() <= 0.05, "accuracy {acc}");
    let (_, rows) = read_csv(&ev.path().join("predictions.csv")).unwrap();
    assert_eq!(rows.len(), 600);
}

#[test]
fn saliency_outputs() {
    let c = cfg(&ellipse_config("perimeter_classification", 12, 6, 0, "[1e-3]"));
    let (data, out) = (tempdir().unwrap(), tempdir().unwrap());
    commands::generate(&c, data.path()).unwrap();
    commands::train(&c, data.path(), out.path()).unwrap();
    let ckpt = out.path().join("model.lonc");

    let empty = tempdir().unwrap();
    assert!(commands::saliency(&ckpt, data.path(), &[], empty.path()).unwrap().is_empty());
    let (hash, rows) = read_csv(&empty.path().join("boundary_mass.csv")).unwrap();
    assert_eq!((hash, rows.len()), (c.hash(), 0));

    match commands::saliency(&ckpt, data.path(), &[4242], tempdir().unwrap().path()) {
        Err(CliError::Usage(msg)) => assert!(msg.contains("4242"), "{msg}"),
        other => panic!("{other:?}"),
    }

    let ids = commands::test_ids(data.path()).unwrap();
    assert_eq!(ids, (18..24).collect::<Vec<_>>());
    let s = tempdir().unwrap();
    let rows = commands::saliency(&ckpt, data.path(), &ids, s.path()).unwrap();
    for r in &rows {
        assert_eq!((r.map.width(), r.map.height()), (128, 128));
        assert!((0.0..=1.0).contains(&r.boundary_mass));
        assert!(s.path().join(format!("saliency/{:05}.pgm", r.id)).exists());
    }
}

#[test]
fn gradcheck_lists_every_group() {
    let out = tempdir().unwrap();
    let rows = commands::gradcheck(0, 1e-5, 1e-5, out.path()).unwrap();
    for arch in ["lon-bell", "cnn-sigmoid", "cnn-relu"] {
        for head in ["dense", "1x1"] {
            let case = format!("{arch}/{head}");
            let groups: Vec<&str> = rows.iter().filter(|r| r.case == case).map(|r| r.group.as_str()).collect();
            for g in ["K", "b", "sigma", "A", "input"] {
                if arch == "cnn-relu" && g == "sigma" {
                    assert!(!groups.contains(&g));
                    continue;
                }
                assert!(groups.contains(&g), "{case} lacks {g}: {groups:?}");
            }
        }
    }
    assert!(rows.iter().all(|r| r.max_rel_error < 1e-5));
    // an impossible tolerance fails after writing the report
    let strict = tempdir().unwrap();
    assert!(matches!(commands::gradcheck(0, 1e-5, 0.0, strict.path()), Err(CliError::Numeric(_))));
    assert!(strict.path().join("gradcheck.csv").exists());
}

#[test]
fn probe_recovers_a_constant_image() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("flat.lonr");
    let img = Image::from_fn(9, 9, |x, _| if x < 4 { 0.2 } else { 0.8 }).unwrap();
    lon_core::image::io::save_raster(&path, &img).unwrap();
    let p = ProbeParams { x: 1, y: 4, k_scale: 0.0, w_scale: 0.0, bins: 4, sigma: Some(0.05) };
    let hist = commands::probe(&path, &p, dir.path()).unwrap();
    assert_eq!(hist[0], (0.2, 1.0));
    assert!(hist[3].1 < 1e-12);
    let (_, rows) = read_csv(&dir.path().join("probe.csv")).unwrap();
    assert_eq!(rows.len(), 4);
}

fn lon() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lon"))
}

#[test]
fn binary_exit_codes_and_determinism() {
    let dir = tempdir().unwrap();
    let config = dir.path().join("c.toml");
    std::fs::write(&config, ellipse_config("area_classification", 12, 6, 1, "[1e-3]")).unwrap();
    let run = |args: &[&str]| lon().current_dir(dir.path()).args(args).status().unwrap().code().unwrap();

    assert_eq!(run(&["--config", "c.toml", "--out", "data", "generate"]), 0);
    assert_eq!(run(&["--out", "a", "train", "--data", "data"]), 0);
    assert_eq!(run(&["--out", "b", "train", "--data", "data"]), 0);
    for f in ["metrics_lr0.csv", "model.lonc"] {
        assert_eq!(bytes(dir.path().join("a").join(f)), bytes(dir.path().join("b").join(f)), "{f}");
    }
    // a seed override retrains on the same dataset under a new config hash
    assert_eq!(run(&["--config", "c.toml", "--seed", "8", "--out", "c", "train", "--data", "data"]), 0);
    let (hash, _) = read_csv(&dir.path().join("c/metrics_lr0.csv")).unwrap();
    assert_ne!(hash, read_csv(&dir.path().join("a/metrics_lr0.csv")).unwrap().0);

    assert_eq!(run(&["--out", "e", "saliency", "--checkpoint", "a/model.lonc", "--data", "data", "--ids", ""]), 0);
    assert_eq!(run(&["--out", "e", "saliency", "--checkpoint", "a/model.lonc", "--data", "data", "--ids", "99"]), 1);
    assert_eq!(run(&["frobnicate"]), 1);
    assert_eq!(run(&["generate"]), 1);
    assert_eq!(run(&["--out", "x", "train", "--data", "missing"]), 3);
    assert_eq!(run(&["--out", "x", "eval", "--checkpoint", "nope.lonc", "--data", "data"]), 3);
    assert_eq!(run(&["--out", "g", "gradcheck", "--tolerance", "0"]), 2);
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        n += 1;
    }
    assert!(n >= 8);
}
