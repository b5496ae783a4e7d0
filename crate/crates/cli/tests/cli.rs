//! End-to-end runs of the `active-diffusion` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use active_diffusion::datasets::{read_lattice_dir, write_lattice_dir};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_active-diffusion"))
}

struct Run {
    dir: tempfile::TempDir,
}

impl Run {
    fn new(config: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("run.toml"), config).unwrap();
        Self { dir }
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    fn cmd(&self, sub: &str, extra: &[&str]) -> Output {
        let mut c = bin();
        c.arg(sub)
            .arg("--config")
            .arg(self.path("run.toml"))
            .arg("--out")
            .arg(self.path("out"))
            .args(extra);
        c.output().unwrap()
    }

    fn ok(&self, sub: &str, extra: &[&str]) -> String {
        let o = self.cmd(sub, extra);
        assert!(o.status.success(), "{sub} failed: {}", String::from_utf8_lossy(&o.stderr));
        String::from_utf8(o.stdout).unwrap()
    }

    fn read(&self, rel: &str) -> String {
        fs::read_to_string(self.path(rel)).unwrap()
    }
}

const DIAMOND_PASSIVE: &str = r#"
seed = 4
[process]
kind = "passive"
k = 2.0
t_p = 0.1
t_f = 1.0
[dataset]
kind = "diamond"
r = 0.7071067811865476
sigma = 0.04
n_samples = 10000
[metrics]
min_mode_frequency = 0.089
max_unassigned_fraction = 0.01
"#;

const DIAMOND_ACTIVE: &str = r#"
seed = 4
[process]
kind = "active"
k = 2.0
t_a = 0.15
tau = 0.25
t_f = 1.0
[dataset]
kind = "diamond"
r = 0.7071067811865476
sigma = 0.04
n_samples = 2000
[net]
hidden = [32, 32]
[train]
iterations = 600
batch_size = 128
log_every = 50
[checkpoint]
every = 200
[sampler]
n_steps = 50
n_samples = 300
"#;

fn csv_rows(text: &str) -> Vec<Vec<f64>> {
    text.lines().skip(1).map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect()
}

#[test]
fn gen_data_diamond_writes_samples_and_manifest() {
    let r = Run::new(DIAMOND_PASSIVE);
    r.ok("gen-data", &[]);
    let csv = r.read("out/data.csv");
    assert_eq!(csv.lines().next(), Some("x0,x1"));
    assert_eq!(csv_rows(&csv).len(), 10_000);
    let manifest: serde_json::Value = serde_json::from_str(&r.read("out/manifest.json")).unwrap();
    let entry = &manifest["files"]["data.csv"];
    assert_eq!(entry["command"], "gen-data");
    assert_eq!(entry["seed"], 4);
    assert_eq!(entry["provenance"]["mixture"].as_array().unwrap().len(), 9);
    assert!(!entry["config_hash"].as_str().unwrap().is_empty());
}

#[test]
fn gen_data_is_reproducible_and_thread_independent() {
    let r = Run::new(DIAMOND_PASSIVE);
    r.ok("gen-data", &[]);
    let first = r.read("out/data.csv");
    r.ok("gen-data", &["--threads", "1"]);
    assert_eq!(first, r.read("out/data.csv"));
    r.ok("gen-data", &["--seed", "5"]);
    assert_ne!(first, r.read("out/data.csv"));
}

#[test]
fn gen_data_ising_writes_valid_lattices() {
    let r = Run::new(
        r#"
[process]
kind = "passive"
k = 1.0
t_p = 1.0
t_f = 1.0
[dataset]
kind = "ising"
side = 4
temperature = 2.0
steps = 2000
count = 100
"#,
    );
    r.ok("gen-data", &[]);
    let dir = r.path("out/lattices");
    let files: Vec<_> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.starts_with("lattice_"))
        .collect();
    assert_eq!(files.len(), 100);
    for f in &files {
        let text = fs::read_to_string(dir.join(f)).unwrap();
        let tokens: Vec<&str> = text.split_whitespace().collect();
        assert_eq!(tokens.len(), 16, "{f}");
        assert!(tokens.iter().all(|t| *t == "1" || *t == "-1"), "{f}: {text}");
        assert_eq!(text.lines().count(), 4);
    }
    assert_eq!(read_lattice_dir(&dir).unwrap().len(), 100);
}

#[test]
fn malformed_config_reports_the_key_path() {
    let r = Run::new(&DIAMOND_PASSIVE.replace("sigma = 0.04", "sigma = \"wide\""));
    let o = r.cmd("gen-data", &[]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("dataset"), "{err}");

    let r = Run::new(&DIAMOND_PASSIVE.replace("seed = 4", "seed = 4\ncolour = 1"));
    let o = r.cmd("gen-data", &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("colour"));

    let r = Run::new(&DIAMOND_PASSIVE.replace("k = 2.0", "k = -2.0"));
    assert_eq!(r.cmd("gen-data", &[]).status.code(), Some(2));

    let o = bin().args(["theory", "--config", "/nonexistent/run.toml"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn train_resume_and_hash_check() {
    let r = Run::new(DIAMOND_ACTIVE);
    r.ok("train", &[]);
    let ck = r.read("out/checkpoint.json");
    let loss = csv_rows(&r.read("out/loss.csv"));
    assert_eq!(loss.len(), 12);
    assert!(loss.last().unwrap()[1] < loss[0][1], "{loss:?}");

    // Zero extra iterations reproduce the checkpoint exactly.
    r.ok("train", &["--resume"]);
    assert_eq!(ck, r.read("out/checkpoint.json"));

    // A run resumed from an intermediate checkpoint matches an
    // uninterrupted one.
    let short = Run::new(&DIAMOND_ACTIVE.replace("iterations = 600", "iterations = 400"));
    short.ok("train", &[]);
    fs::write(short.path("run.toml"), DIAMOND_ACTIVE).unwrap();
    short.ok("train", &["--resume"]);
    assert_eq!(ck, short.read("out/checkpoint.json"));

    // A different training configuration is refused.
    fs::write(r.path("run.toml"), DIAMOND_ACTIVE.replace("batch_size = 128", "batch_size = 64")).unwrap();
    let o = r.cmd("train", &["--resume"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("different configuration"));
}

#[test]
fn divergence_exits_with_a_diagnostic_checkpoint() {
    let r = Run::new(&DIAMOND_ACTIVE.replace("batch_size = 128", "batch_size = 128\nlearning_rate = 1e300"));
    let o = r.cmd("train", &[]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(r.path("out/checkpoint.diverged.json").exists());
}

#[test]
fn sample_with_trained_checkpoint_and_architecture_check() {
    let r = Run::new(DIAMOND_ACTIVE);
    r.ok("train", &[]);
    r.ok("sample", &[]);
    let rows = csv_rows(&r.read("out/samples.csv"));
    assert_eq!(rows.len(), 300);
    assert!(rows.iter().flatten().all(|v| v.is_finite()));
    fs::write(r.path("run.toml"), DIAMOND_ACTIVE.replace("hidden = [32, 32]", "hidden = [16]")).unwrap();
    assert_eq!(r.cmd("sample", &[]).status.code(), Some(2));
}

#[test]
fn analytic_diamond_sampling_passes_recovery_thresholds() {
    let r = Run::new(DIAMOND_PASSIVE);
    r.ok("sample", &["--analytic", "--dt", "0.002", "--n-samples", "10000"]);
    assert_eq!(csv_rows(&r.read("out/samples.csv")).len(), 10_000);
    let report = r.ok("eval", &["--reference", r.path("out/samples.csv").to_str().unwrap()]);
    assert!(report.contains("min_mode_frequency"), "{report}");
    assert!(!report.contains("fail"), "{report}");
    assert!(r.read("out/eval.csv").contains("unassigned_fraction"));
}

#[test]
fn denoise_toggle_affects_passive_but_not_active_positions() {
    let p = Run::new(DIAMOND_PASSIVE);
    p.ok("sample", &["--analytic", "--n-steps", "100", "--n-samples", "200", "--denoise-last", "false"]);
    let plain = p.read("out/samples.csv");
    p.ok("sample", &["--analytic", "--n-steps", "100", "--n-samples", "200", "--denoise-last", "true"]);
    assert_ne!(plain, p.read("out/samples.csv"));

    let a = Run::new(DIAMOND_ACTIVE);
    let args = ["--analytic", "--n-steps", "100", "--with-eta"];
    a.ok("sample", &[&args[..], &["--denoise-last", "false"]].concat());
    let plain = csv_rows(&a.read("out/samples.csv"));
    a.ok("sample", &[&args[..], &["--denoise-last", "true"]].concat());
    let den = csv_rows(&a.read("out/samples.csv"));
    // With T_p = 0 the last step injects noise only into eta, so the
    // positions agree and the eta columns differ.
    for (u, v) in plain.iter().zip(&den) {
        assert_eq!(u[..2], v[..2]);
    }
    assert!(plain.iter().zip(&den).any(|(u, v)| u[2..] != v[2..]));
}

#[test]
fn zero_samples_give_a_header_only_csv() {
    let r = Run::new(DIAMOND_ACTIVE);
    r.ok("sample", &["--analytic", "--n-samples", "0", "--with-eta"]);
    assert_eq!(r.read("out/samples.csv"), "x0,x1,eta0,eta1\n");
}

#[test]
fn eval_of_identical_files_is_zero() {
    let r = Run::new(DIAMOND_PASSIVE);
    r.ok("gen-data", &[]);
    let data = r.path("out/data.csv");
    let report = r.ok("eval", &["--samples", data.to_str().unwrap()]);
    assert!(report.contains("energy_distance,0,"), "{report}");
    let eval = r.read("out/eval.csv");
    assert!(eval.starts_with("metric,value,threshold,status\n"));
    let manifest = r.read("out/manifest.json");
    assert!(manifest.contains("eval.csv") && manifest.contains("data.csv"));
}

#[test]
fn eval_rejects_dimension_mismatch() {
    let r = Run::new(DIAMOND_PASSIVE);
    r.ok("gen-data", &[]);
    fs::write(r.path("three.csv"), "x0,x1,x2\n1,2,3\n").unwrap();
    let o = r.cmd("eval", &["--samples", r.path("three.csv").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

fn split_half(src: &Path, a: &Path, b: &Path) {
    let all = read_lattice_dir(src).unwrap();
    let (x, y) = all.split_at(all.len() / 2);
    write_lattice_dir(a, x).unwrap();
    write_lattice_dir(b, y).unwrap();
}

#[test]
fn ising_split_half_convolution_curves_agree() {
    let r = Run::new(
        r#"
seed = 8
[process]
kind = "passive"
k = 1.0
t_p = 1.0
t_f = 1.0
[dataset]
kind = "ising"
side = 16
temperature = 1.0
[metrics]
max_convolution_gap = 0.02
"#,
    );
    r.ok("gen-data", &[]);
    let (a, b) = (r.path("half_a"), r.path("half_b"));
    split_half(&r.path("out/lattices"), &a, &b);
    let report = r.ok("eval", &["--samples", a.to_str().unwrap(), "--reference", b.to_str().unwrap()]);
    assert!(report.contains("convolution_gap"), "{report}");
    assert!(report.contains(",pass"), "{report}");
    let conv = r.read("out/convolution.csv");
    assert_eq!(conv.lines().count(), 1 + 2 * 8);

    let same = r.ok("eval", &["--samples", a.to_str().unwrap(), "--reference", a.to_str().unwrap()]);
    assert!(same.contains("convolution_gap,0,"), "{same}");
}

#[test]
fn theory_prints_both_tables() {
    let r = Run::new(DIAMOND_ACTIVE);
    let out = r.ok("theory", &[]);
    assert!(out.starts_with("lambda_max,t_p,t_a,tau,t_s_passive,t_s_active\n"));
    let spec: Vec<f64> = out.lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    // Active speciation comes later than passive at equal temperatures.
    assert!(spec[5] > spec[4], "{out}");
    assert!(out.contains("mode,t,passive_real"));
    assert!(r.path("out/theory_fourier.csv").exists() && r.path("out/theory_speciation.csv").exists());
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for e in fs::read_dir(&dir).unwrap() {
        let p = e.unwrap().path();
        let text = fs::read_to_string(&p).unwrap();
        active_diffusion_cli::RunConfig::from_toml(&text).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        n += 1;
    }
    assert!(n >= 4);
}
