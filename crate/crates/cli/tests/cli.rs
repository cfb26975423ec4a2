use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sacnet::data::{load_gray, load_image, read_pnm, save_tensor};
use sacnet::metrics::ImageMetrics;
use sacnet::Tensor;
use serde_json::Value;

const TINY: &str = r#"
[net]
input_size = 32
stage_channels = [4, 6, 6, 6]
width = 6

[net.sac]
attention_hidden = 4

[train]
checkpoint_every = 1

[train.optimizer]
max_iterations = 20
"#;

fn sacnet(args: &[&dyn AsRef<std::ffi::OsStr>]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_sacnet"));
    for a in args {
        cmd.arg(a);
    }
    cmd.env_remove("SACNET_THREADS").output().expect("binary runs")
}

fn status(out: &Output) -> Value {
    let stdout = String::from_utf8_lossy(&out.stdout);
    let last = stdout.lines().last().expect("stdout is not empty");
    serde_json::from_str(last).unwrap_or_else(|e| panic!("last line is not JSON ({e}): {last}"))
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    fn new() -> Self {
        let f = Fixture {
            dir: tempfile::tempdir().unwrap(),
        };
        fs::write(f.path("tiny.toml"), TINY).unwrap();
        let out = sacnet(&[&"synth", &"--out", &f.path("data"), &"--count", &"6", &"--size", &"32", &"--seed", &"3"]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        f
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    fn train(&self, out: &str, seed: &str) -> Output {
        sacnet(&[
            &"train",
            &"--config",
            &self.path("tiny.toml"),
            &"--data",
            &self.path("data"),
            &"--out",
            &self.path(out),
            &"--seed",
            &seed,
        ])
    }
}

/// Loss CSV with the wall-clock column removed.
fn losses(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.rsplit_once(',').unwrap().0.to_string())
        .collect()
}

#[test]
fn train_writes_artifacts_and_is_reproducible() {
    let f = Fixture::new();
    let a = f.train("a", "7");
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
    let s = status(&a);
    assert_eq!(s["status"], "ok");
    assert_eq!(s["command"], "train");
    assert_eq!(s["updates"], 2);
    for file in ["a/loss.csv", "a/weights.bin", "a/config.resolved.toml", "a/checkpoints/update_000002.bin"] {
        assert!(f.path(file).is_file(), "{file}");
    }
    let csv = fs::read_to_string(f.path("a/loss.csv")).unwrap();
    assert!(csv.starts_with("update_index,loss,lr,wall_ms\n"));
    let resolved = fs::read_to_string(f.path("a/config.resolved.toml")).unwrap();
    assert!(resolved.contains("seed = 7"));

    assert_eq!(code(&f.train("b", "7")), 0);
    assert_eq!(losses(&f.path("a/loss.csv")), losses(&f.path("b/loss.csv")));
    assert_eq!(fs::read(f.path("a/weights.bin")).unwrap(), fs::read(f.path("b/weights.bin")).unwrap());
    assert_eq!(code(&f.train("c", "8")), 0);
    assert_ne!(losses(&f.path("a/loss.csv")), losses(&f.path("c/loss.csv")));
}

#[test]
fn optimizer_flag_selects_preset() {
    let f = Fixture::new();
    let out = sacnet(&[
        &"train", &"--config", &f.path("tiny.toml"), &"--data", &f.path("data"), &"--out", &f.path("o"),
        &"--optimizer", &"paper-sgd", &"--iterations", &"10",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let resolved = fs::read_to_string(f.path("o/config.resolved.toml")).unwrap();
    assert!(resolved.contains("kind = \"sgd\""), "{resolved}");
    let cfg: toml::Value = toml::from_str(&resolved).unwrap();
    assert_eq!(cfg["train"]["optimizer"]["lr"].as_float(), Some(1e-8));
    assert_eq!(cfg["train"]["optimizer"]["max_iterations"].as_integer(), Some(10));
    let bad = sacnet(&[&"train", &"--data", &f.path("data"), &"--out", &f.path("p"), &"--optimizer", &"rmsprop"]);
    assert_eq!(code(&bad), 2);
}

#[test]
fn missing_dataset_exits_with_data_error() {
    let f = Fixture::new();
    let out = sacnet(&[&"train", &"--config", &f.path("tiny.toml"), &"--data", &f.path("nowhere"), &"--out", &f.path("x")]);
    assert_eq!(code(&out), 3);
    let s = status(&out);
    assert_eq!(s["status"], "error");
    assert_eq!(s["code"], 3);
    assert!(s["error"].as_str().unwrap().contains("nowhere"));
}

#[test]
fn config_errors_exit_with_two() {
    let f = Fixture::new();
    fs::write(f.path("bad.toml"), "[net]\nwidht = 8\n").unwrap();
    let out = sacnet(&[&"train", &"--config", &f.path("bad.toml"), &"--data", &f.path("data"), &"--out", &f.path("x")]);
    assert_eq!(code(&out), 2);
    assert!(status(&out)["error"].as_str().unwrap().contains("widht"));
    // The default 64x64 network does not fit 32x32 images.
    let out = sacnet(&[&"train", &"--data", &f.path("data"), &"--out", &f.path("y")]);
    assert_eq!(code(&out), 3);
}

#[test]
fn diverging_training_exits_with_numeric_error() {
    let f = Fixture::new();
    let text = TINY.replace("max_iterations = 20", "max_iterations = 40\nlr = 1e30");
    fs::write(f.path("hot.toml"), text).unwrap();
    let out = sacnet(&[&"train", &"--config", &f.path("hot.toml"), &"--data", &f.path("data"), &"--out", &f.path("x")]);
    assert_eq!(code(&out), 4, "{}", String::from_utf8_lossy(&out.stdout));
    assert!(status(&out)["error"].as_str().unwrap().contains("non-finite"));
}

#[test]
fn infer_writes_maps_and_attention() {
    let f = Fixture::new();
    assert_eq!(code(&f.train("run", "1")), 0);
    let infer = |out: &str, dump: bool| {
        let o = f.path(out);
        let w = f.path("run/weights.bin");
        let input = f.path("data");
        let mut args: Vec<&dyn AsRef<std::ffi::OsStr>> = vec![&"infer", &"--weights", &w, &"--input", &input, &"--out", &o];
        if dump {
            args.push(&"--dump-attention");
        }
        sacnet(&args)
    };
    let out = infer("pred", true);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let s = status(&out);
    assert_eq!(s["images"], 6);
    assert_eq!(s["attention_maps"], 6 * 18);
    let maps: Vec<_> = fs::read_dir(f.path("pred/attention/s00000")).unwrap().collect();
    assert_eq!(maps.len(), 18);
    assert!(f.path("pred/attention/s00000/level2_round1_k3.pgm").is_file());

    let img = load_image(&f.path("data/images/s00002.ppm")).unwrap();
    let map = read_pnm(&f.path("pred/s00002.pgm")).unwrap();
    assert_eq!((map.width, map.height, map.channels), (img.shape().w, img.shape().h, 1));

    assert_eq!(code(&infer("again", false)), 0);
    for id in ["s00000", "s00005"] {
        let a = fs::read(f.path(&format!("pred/{id}.pgm"))).unwrap();
        let b = fs::read(f.path(&format!("again/{id}.pgm"))).unwrap();
        assert_eq!(a, b);
    }

    // A checkpoint finds the resolved config one directory up.
    let ck = sacnet(&[&"infer", &"--weights", &f.path("run/checkpoints/update_000001.bin"), &"--input", &f.path("data"), &"--out", &f.path("ck")]);
    assert_eq!(code(&ck), 0);
    let lone = f.path("lone.bin");
    fs::copy(f.path("run/weights.bin"), &lone).unwrap();
    let out = sacnet(&[&"infer", &"--weights", &lone, &"--input", &f.path("data"), &"--out", &f.path("z")]);
    assert_eq!(code(&out), 2);
}

#[test]
fn eval_of_ground_truth_against_itself_is_perfect() {
    let f = Fixture::new();
    let out = sacnet(&[&"eval", &"--pred", &f.path("data/masks"), &"--gt", &f.path("data"), &"--out", &f.path("rep")]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let s = status(&out);
    assert_eq!(s["fbeta_max"], 1.0);
    assert_eq!(s["mae"], 0.0);
    // The reference's eps terms keep self-similarity a hair below 1.
    assert!((s["smeasure"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert_eq!(s["ber"], 0.0);
    let csv = fs::read_to_string(f.path("rep/metrics.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "image,fbeta_max,fbeta_adaptive,smeasure,mae,ber");
    assert_eq!(csv.lines().count(), 7);
    let summary: Value = serde_json::from_str(&fs::read_to_string(f.path("rep/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["undefined"], 0);
}

#[test]
fn eval_names_unmatched_ids() {
    let f = Fixture::new();
    let pred = f.path("pred");
    fs::create_dir(&pred).unwrap();
    for id in ["s00000", "s00001", "s00002", "s00003", "s00004"] {
        fs::copy(f.path(&format!("data/masks/{id}.pgm")), pred.join(format!("{id}.pgm"))).unwrap();
    }
    let out = sacnet(&[&"eval", &"--pred", &pred, &"--gt", &f.path("data/masks"), &"--out", &f.path("rep")]);
    assert_eq!(code(&out), 3);
    assert!(status(&out)["error"].as_str().unwrap().contains("s00005"));
}

fn checkerboard(v: impl Fn(f32) -> f32) -> Tensor<f32> {
    Tensor::from_fn((1, 1, 16, 16), |[_, _, r, c]| v(if (r < 8) == (c < 8) { 1.0 } else { 0.0 }))
}

#[test]
fn eval_report_matches_library_metrics() {
    let f = Fixture::new();
    let (pred, gt) = (f.path("p"), f.path("g"));
    fs::create_dir(&pred).unwrap();
    fs::create_dir(&gt).unwrap();
    let fixtures = [
        ("complement", checkerboard(|g| 1.0 - g)),
        ("soft", checkerboard(|g| 0.75 * g + 0.125)),
        ("ramp", Tensor::from_fn((1, 1, 16, 16), |[_, _, r, c]| (r + c) as f32 / 30.0)),
    ];
    for (id, p) in &fixtures {
        save_tensor(&pred.join(format!("{id}.pgm")), p).unwrap();
        save_tensor(&gt.join(format!("{id}.pgm")), &checkerboard(|g| g)).unwrap();
    }
    let out = sacnet(&[&"eval", &"--pred", &pred, &"--gt", &gt, &"--out", &f.path("rep")]);
    assert_eq!(code(&out), 0);
    let csv = fs::read_to_string(f.path("rep/metrics.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        let p = load_gray(&pred.join(format!("{}.pgm", cols[0]))).unwrap();
        let m = ImageMetrics::evaluate(cols[0], &p, &checkerboard(|g| g)).unwrap();
        assert_eq!(cols[3].parse::<f64>().unwrap(), m.smeasure, "{line}");
        assert_eq!(cols[4].parse::<f64>().unwrap(), m.mae);
        assert_eq!(cols[1].parse::<f64>().unwrap(), m.fbeta_max.unwrap());
        if cols[0] == "complement" {
            assert_eq!(m.smeasure, 0.0);
            assert_eq!(m.ber, 100.0);
        }
    }
}

#[test]
fn gradcheck_reports_groups_and_status() {
    let out = sacnet(&[&"gradcheck", &"--scope", &"scan", &"--seed", &"1"]);
    assert_eq!(code(&out), 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.lines().any(|l| l.starts_with("input ")));
    let s = status(&out);
    assert_eq!(s["scope"], "scan");
    assert!(s["max_rel_error"].as_f64().unwrap() <= 1e-5);
    let out = sacnet(&[&"gradcheck", &"--scope", &"sac"]);
    assert_eq!(code(&out), 0);
    assert_eq!(code(&sacnet(&[&"gradcheck", &"--scope", &"everything"])), 2);
}

#[test]
fn ablate_emits_table() {
    let f = Fixture::new();
    let out = sacnet(&[
        &"ablate", &"--axis", &"rounds", &"--config", &f.path("tiny.toml"), &"--data", &f.path("data"),
        &"--out", &f.path("abl"), &"--iterations", &"10",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let table = fs::read_to_string(f.path("abl/ablation.csv")).unwrap();
    let names: Vec<&str> = table.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(names, ["fpn", "rounds=1", "rounds=2", "rounds=3"]);
    assert!(table.starts_with("variant,fbeta_max,fbeta_adaptive,smeasure,mae,ber,final_loss\n"));
    let s = status(&out);
    assert_eq!((s["train"].as_u64(), s["eval"].as_u64()), (Some(5), Some(1)));
    let bad = sacnet(&[&"ablate", &"--axis", &"depth", &"--data", &f.path("data"), &"--out", &f.path("x")]);
    assert_eq!(code(&bad), 2);
}

#[test]
fn thread_setting_is_validated() {
    let ok = sacnet(&[&"--threads", &"1", &"gradcheck", &"--scope", &"scan"]);
    assert_eq!(code(&ok), 0);
    let out = Command::new(env!("CARGO_BIN_EXE_sacnet"))
        .args(["gradcheck", "--scope", "scan"])
        .env("SACNET_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
}

#[test]
fn synth_is_deterministic() {
    let f = Fixture::new();
    let out = sacnet(&[&"synth", &"--out", &f.path("again"), &"--count", &"6", &"--size", &"32", &"--seed", &"3"]);
    assert_eq!(code(&out), 0);
    for sub in ["images/s00004.ppm", "masks/s00004.pgm", "index.txt"] {
        assert_eq!(fs::read(f.path(&format!("data/{sub}"))).unwrap(), fs::read(f.path(&format!("again/{sub}"))).unwrap());
    }
    fs::write(f.path("synth.toml"), "sizee = 3\n").unwrap();
    let bad = sacnet(&[&"synth", &"--out", &f.path("z"), &"--config", &f.path("synth.toml")]);
    assert_eq!(code(&bad), 2);
}
