//! The five subcommands.

use std::fs;
use std::path::{Path, PathBuf};

use active_diffusion::datasets::{
    diamond_mixture, discretize_spins, ingest_csv_2d, ising_ensemble, read_lattice_dir, swiss_roll,
    write_lattice_dir, IsingLattice,
};
use active_diffusion::metrics::{
    convolution_metric, default_filter_sizes, energy_distance, fourier_decay_rates, max_gap, mixture_recovery,
    speciation_times,
};
use active_diffusion::mixture::GaussianMixture;
use active_diffusion::net::{Checkpoint, ScoreNet, Trainer, TrainingData};
use active_diffusion::rng::{self, derive_seed};
use active_diffusion::samplers::{
    sample_probability_flow, sample_reverse_sde, AnalyticScore, SampleSet, SamplerKind, ScoreModel,
};
use log::info;
use ndarray::{Array2, Axis};
use serde_json::json;

use crate::config::{DatasetSpec, RunConfig};
use crate::error::CliError;
use crate::output::{f, read_samples, write_samples, write_table, Manifest, ManifestEntry};

pub const DATA_CSV: &str = "data.csv";
pub const DATA_LATTICES: &str = "lattices";
pub const CHECKPOINT: &str = "checkpoint.json";
pub const DIVERGED: &str = "checkpoint.diverged.json";
pub const LOSS_CSV: &str = "loss.csv";
pub const SAMPLES_CSV: &str = "samples.csv";
pub const SAMPLE_LATTICES: &str = "sample_lattices";
pub const EVAL_CSV: &str = "eval.csv";
pub const CONVOLUTION_CSV: &str = "convolution.csv";
pub const SPECIATION_CSV: &str = "theory_speciation.csv";
pub const FOURIER_CSV: &str = "theory_fourier.csv";

/// Options that only exist on the command line.
#[derive(Clone, Debug, Default)]
pub struct CommandOptions {
    /// Use exact mixture scores instead of a trained network.
    pub analytic: bool,
    /// Continue training from the checkpoint in the output directory.
    pub resume: bool,
    pub checkpoint: Option<PathBuf>,
    /// Also write the final `eta` coordinates of active samples.
    pub with_eta: bool,
    pub samples: Option<PathBuf>,
    pub reference: Option<PathBuf>,
}

/// A generated or ingested data set.
pub enum Data {
    Points { samples: Array2<f64>, mixture: Option<GaussianMixture>, provenance: serde_json::Value },
    Lattices(Vec<IsingLattice>),
}

impl Data {
    pub fn dim(&self) -> usize {
        match self {
            Data::Points { samples, .. } => samples.ncols(),
            Data::Lattices(l) => l.first().map_or(0, |l| l.spins.len()),
        }
    }

    fn training_data(&self) -> TrainingData {
        match self {
            Data::Points { mixture: Some(m), .. } => TrainingData::Mixture(m.clone()),
            Data::Points { samples, .. } => TrainingData::Samples(samples.clone()),
            Data::Lattices(l) => TrainingData::Samples(flatten(l)),
        }
    }
}

fn flatten(lattices: &[IsingLattice]) -> Array2<f64> {
    let d = lattices.first().map_or(0, |l| l.spins.len());
    let mut out = Array2::zeros((lattices.len(), d));
    for (mut row, l) in out.rows_mut().into_iter().zip(lattices) {
        row.iter_mut().zip(l.spins.iter()).for_each(|(o, &s)| *o = f64::from(s));
    }
    out
}

fn mixture_of(cfg: &RunConfig) -> Result<Option<GaussianMixture>, CliError> {
    Ok(match &cfg.dataset {
        DatasetSpec::Diamond { r, sigma, .. } => Some(diamond_mixture(*r, *sigma)?),
        DatasetSpec::Mixture { components, .. } => Some(GaussianMixture::new(components.clone())?),
        _ => None,
    })
}

/// Builds the configured data set deterministically from the run seed.
pub fn load_dataset(cfg: &RunConfig) -> Result<Data, CliError> {
    let seed = derive_seed(cfg.seed, "data");
    let spec = serde_json::to_value(&cfg.dataset).map_err(|e| CliError::Other(e.to_string()))?;
    Ok(match &cfg.dataset {
        DatasetSpec::Diamond { n_samples, .. } | DatasetSpec::Mixture { n_samples, .. } => {
            let mix = mixture_of(cfg)?.expect("mixture dataset");
            let samples = mix.sample(*n_samples, &mut rng::stream(seed, 0));
            let provenance = json!({ "dataset": spec, "mixture": mix });
            Data::Points { samples, mixture: Some(mix), provenance }
        }
        DatasetSpec::SwissRoll { variant, n_samples, noise } => {
            let d = swiss_roll(*n_samples, *noise, *variant, seed)?;
            Data::Points { samples: d.samples, mixture: None, provenance: json!({ "dataset": spec }) }
        }
        DatasetSpec::Ising { side, temperature, steps, count } => {
            Data::Lattices(ising_ensemble(*side, *temperature, *steps, *count, seed)?)
        }
        DatasetSpec::Csv { path, normalize } => {
            let d = ingest_csv_2d(path, *normalize).map_err(|e| CliError::Other(format!("{}: {e}", path.display())))?;
            let provenance = json!({ "dataset": spec, "normalization": d.normalization });
            Data::Points { samples: d.samples, mixture: None, provenance }
        }
    })
}

fn ensure_out(cfg: &RunConfig) -> Result<&Path, CliError> {
    fs::create_dir_all(&cfg.out).map_err(|e| CliError::Other(format!("cannot create {}: {e}", cfg.out.display())))?;
    Ok(&cfg.out)
}

fn entry(cfg: &RunConfig, command: &str, provenance: serde_json::Value) -> ManifestEntry {
    ManifestEntry { command: command.into(), config_hash: cfg.hash(), seed: cfg.seed, provenance }
}

pub fn gen_data(cfg: &RunConfig) -> Result<Vec<String>, CliError> {
    let out = ensure_out(cfg)?;
    let data = load_dataset(cfg)?;
    let (files, provenance) = match &data {
        Data::Points { samples, provenance, .. } => {
            write_samples(&out.join(DATA_CSV), samples, None)?;
            (vec![DATA_CSV.to_string()], provenance.clone())
        }
        Data::Lattices(l) => {
            let names = write_lattice_dir(&out.join(DATA_LATTICES), l)?;
            let mut files: Vec<String> = names.into_iter().map(|n| format!("{DATA_LATTICES}/{n}")).collect();
            files.push(format!("{DATA_LATTICES}/{}", active_diffusion::datasets::LATTICE_MANIFEST));
            (files, json!({ "dataset": cfg.dataset }))
        }
    };
    Manifest::record(out, &files, entry(cfg, "gen-data", provenance))?;
    info!("wrote {} files to {}", files.len(), out.display());
    Ok(files)
}

fn write_checkpoint(path: &Path, trainer: &Trainer, hash: &str) -> Result<(), CliError> {
    fs::write(path, Checkpoint::from_trainer(trainer, hash.to_string()).to_json())?;
    Ok(())
}

pub fn train(cfg: &RunConfig, opts: &CommandOptions) -> Result<Vec<String>, CliError> {
    let out = ensure_out(cfg)?;
    let train_cfg = cfg.train_config()?;
    let hash = cfg.training_hash()?;
    let data = load_dataset(cfg)?.training_data();
    let ck_path = out.join(CHECKPOINT);
    let mut trainer = if opts.resume && ck_path.exists() {
        let ck = Checkpoint::from_json(&fs::read_to_string(&ck_path)?)?;
        if ck.config_hash != hash {
            return Err(CliError::Config(format!(
                "checkpoint {} was produced by a different configuration (hash {} , expected {hash})",
                ck_path.display(),
                ck.config_hash
            )));
        }
        let mut t = ck.trainer()?;
        t.config = train_cfg;
        info!("resuming at iteration {}", t.iteration);
        t
    } else {
        let mut init = rng::stream(derive_seed(train_cfg.seed, "init"), 0);
        let net = ScoreNet::new(cfg.process, data.dim(), data.per_dim_variance(), cfg.net.clone(), &mut init)?;
        Trainer::new(net, train_cfg)?
    };
    let every = cfg.checkpoint.every;
    let result = trainer.run_with(&data, |t| {
        if t.iteration % t.config.log_every == 0 {
            if let Some(&(i, l)) = t.trace.last() {
                info!("iteration {i}: loss {l:.6}");
            }
        }
        if every > 0 && t.iteration % every == 0 {
            write_checkpoint(&ck_path, t, &hash).map_err(|e| active_diffusion::Error::Checkpoint(e.to_string()))?;
        }
        Ok(())
    });
    if let Err(e) = result {
        if e.is_numeric() {
            write_checkpoint(&out.join(DIVERGED), &trainer, &hash)?;
            Manifest::record(out, &[DIVERGED.to_string()], entry(cfg, "train", json!({ "error": e.to_string() })))?;
        }
        return Err(e.into());
    }
    write_checkpoint(&ck_path, &trainer, &hash)?;
    let rows: Vec<Vec<String>> = trainer.trace.iter().map(|&(i, l)| vec![i.to_string(), f(l)]).collect();
    write_table(&out.join(LOSS_CSV), &["iteration", "loss"], &rows)?;
    let files = vec![CHECKPOINT.to_string(), LOSS_CSV.to_string()];
    Manifest::record(out, &files, entry(cfg, "train", json!({ "iterations": trainer.iteration, "training_hash": hash })))?;
    Ok(files)
}

/// Loads a checkpoint and checks that it matches the configuration.
fn load_net(cfg: &RunConfig, path: &Path, dim: usize) -> Result<ScoreNet, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Other(format!("{}: {e}", path.display())))?;
    let ck = Checkpoint::from_json(&text).map_err(|e| CliError::Other(format!("{}: {e}", path.display())))?;
    if ck.process != cfg.process || ck.net != cfg.net || ck.dim != dim {
        return Err(CliError::Config(format!(
            "checkpoint {} does not match the configured process, network or data dimension",
            path.display()
        )));
    }
    Ok(ck.net()?)
}

pub fn sample(cfg: &RunConfig, opts: &CommandOptions) -> Result<Vec<String>, CliError> {
    let out = ensure_out(cfg)?;
    let sc = cfg.sampler_config();
    let data = load_dataset(cfg)?;
    let model: Box<dyn ScoreModel> = if opts.analytic {
        let mix = mixture_of(cfg)?
            .ok_or_else(|| CliError::Config("--analytic needs a diamond or mixture dataset".into()))?;
        Box::new(AnalyticScore::new(mix, cfg.process)?)
    } else {
        let path = opts.checkpoint.clone().unwrap_or_else(|| out.join(CHECKPOINT));
        Box::new(load_net(cfg, &path, data.dim())?)
    };
    let samples: SampleSet = match sc.kind {
        SamplerKind::EulerMaruyama => sample_reverse_sde(model.as_ref(), &sc)?,
        SamplerKind::OdeAdaptive => {
            let (s, stats) = sample_probability_flow(model.as_ref(), &sc)?;
            info!("flow: {} accepted, {} rejected steps, {} evaluations", stats.accepted, stats.rejected, stats.evaluations);
            s
        }
    };
    let eta = if opts.with_eta { samples.eta.as_ref() } else { None };
    write_samples(&out.join(SAMPLES_CSV), &samples.x, eta)?;
    let mut files = vec![SAMPLES_CSV.to_string()];
    if let Data::Lattices(l) = &data {
        let side = l[0].spins.nrows();
        let spins = discretize_spins(&samples.x);
        let lattices: Vec<IsingLattice> = spins
            .outer_iter()
            .enumerate()
            .map(|(c, row)| IsingLattice {
                spins: row.to_owned().into_shape_with_order((side, side)).expect("square lattice"),
                temperature: l[0].temperature,
                seed: sc.seed,
                chain: c as u64,
            })
            .collect();
        let names = write_lattice_dir(&out.join(SAMPLE_LATTICES), &lattices)?;
        files.extend(names.into_iter().map(|n| format!("{SAMPLE_LATTICES}/{n}")));
        files.push(format!("{SAMPLE_LATTICES}/{}", active_diffusion::datasets::LATTICE_MANIFEST));
    }
    let prov = json!({ "sampler": sc, "analytic": opts.analytic });
    Manifest::record(out, &files, entry(cfg, "sample", prov))?;
    Ok(files)
}

/// One line of the evaluation report.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub metric: String,
    pub value: f64,
    pub threshold: Option<f64>,
    /// `true` when the value must stay at or below the threshold.
    pub upper: bool,
}

impl Check {
    pub fn status(&self) -> &'static str {
        match self.threshold {
            None => "report",
            Some(th) if (self.upper && self.value <= th) || (!self.upper && self.value >= th) => "pass",
            Some(_) => "fail",
        }
    }
}

pub fn eval(cfg: &RunConfig, opts: &CommandOptions) -> Result<Vec<Check>, CliError> {
    let out = ensure_out(cfg)?;
    let m = &cfg.metrics;
    let mut checks = Vec::new();
    let mut files = vec![EVAL_CSV.to_string()];
    let is_lattice = matches!(cfg.dataset, DatasetSpec::Ising { .. });
    if is_lattice {
        let s = opts.samples.clone().unwrap_or_else(|| out.join(SAMPLE_LATTICES));
        let r = opts.reference.clone().unwrap_or_else(|| out.join(DATA_LATTICES));
        let load = |p: &Path| -> Result<Vec<ndarray::Array2<i8>>, CliError> {
            let l = read_lattice_dir(p).map_err(|e| CliError::Other(format!("{}: {e}", p.display())))?;
            Ok(l.into_iter().map(|l| l.spins).collect())
        };
        let (sl, rl) = (load(&s)?, load(&r)?);
        let side = rl.first().map_or(0, |l| l.nrows());
        if sl.first().map_or(0, |l| l.nrows()) != side {
            return Err(CliError::Config("sample and reference lattices differ in size".into()));
        }
        let ls = m.l_values.clone().unwrap_or_else(|| default_filter_sizes(side));
        let (cs, cr) = (convolution_metric(&sl, &ls)?, convolution_metric(&rl, &ls)?);
        let rows: Vec<Vec<String>> = [("samples", &cs), ("reference", &cr)]
            .iter()
            .flat_map(|(tag, c)| c.l_values.iter().zip(&c.values).map(move |(l, v)| vec![tag.to_string(), l.to_string(), f(*v)]))
            .collect();
        write_table(&out.join(CONVOLUTION_CSV), &["dataset", "l", "value"], &rows)?;
        files.push(CONVOLUTION_CSV.to_string());
        checks.push(Check { metric: "convolution_gap".into(), value: max_gap(&cs, &cr)?, threshold: m.max_convolution_gap, upper: true });
    } else {
        let s = opts.samples.clone().unwrap_or_else(|| out.join(SAMPLES_CSV));
        let r = opts.reference.clone().unwrap_or_else(|| out.join(DATA_CSV));
        let (xs, xr) = (read_samples(&s)?, read_samples(&r)?);
        if xs.ncols() != xr.ncols() {
            return Err(CliError::Config(format!("samples have {} columns, reference has {}", xs.ncols(), xr.ncols())));
        }
        if xs.nrows() > 0 && xr.nrows() > 0 {
            let e = energy_distance(xs.view(), xr.view(), derive_seed(cfg.seed, "eval"))?;
            checks.push(Check { metric: "energy_distance".into(), value: e, threshold: m.max_energy_distance, upper: true });
        }
        if let (Some(mix), true) = (mixture_of(cfg)?, xs.nrows() > 0) {
            let rep = mixture_recovery(xs.view(), &mix)?;
            let freqs = rep.frequencies();
            let min_f = freqs.iter().copied().fold(f64::INFINITY, f64::min);
            checks.push(Check { metric: "min_mode_frequency".into(), value: min_f, threshold: m.min_mode_frequency, upper: false });
            checks.push(Check { metric: "unassigned_fraction".into(), value: rep.unassigned_fraction(), threshold: m.max_unassigned_fraction, upper: true });
            for (i, (fr, sd)) in freqs.iter().zip(&rep.stds).enumerate() {
                checks.push(Check { metric: format!("peak{i}_frequency"), value: *fr, threshold: None, upper: false });
                checks.push(Check { metric: format!("peak{i}_std"), value: *sd, threshold: None, upper: true });
            }
        }
    }
    let rows: Vec<Vec<String>> = checks
        .iter()
        .map(|c| vec![c.metric.clone(), f(c.value), c.threshold.map(f).unwrap_or_default(), c.status().to_string()])
        .collect();
    write_table(&out.join(EVAL_CSV), &["metric", "value", "threshold", "status"], &rows)?;
    Manifest::record(out, &files, entry(cfg, "eval", json!({ "metrics": cfg.metrics })))?;
    Ok(checks)
}

/// Tables of the closed-form theory for the configured process.
pub struct Theory {
    pub speciation: Vec<Vec<String>>,
    pub fourier: Vec<Vec<String>>,
}

pub fn theory(cfg: &RunConfig) -> Result<Theory, CliError> {
    let out = ensure_out(cfg)?;
    let spec = cfg.theory.clone().unwrap_or_default();
    let p = &cfg.process;
    let base_t = if p.is_active() { p.t_a } else { p.t_p };
    let t_p = spec.t_p.unwrap_or(base_t);
    let t_a = spec.t_a.unwrap_or(base_t);
    let tau = spec.tau.unwrap_or(if p.is_active() { p.tau } else { 0.5 });
    let c0 = match (mixture_of(cfg)?, load_dataset(cfg)?) {
        (Some(m), _) => m.covariance(),
        (None, Data::Points { samples, .. }) => covariance(&samples),
        (None, Data::Lattices(l)) => covariance(&flatten(&l)),
    };
    let s = speciation_times(c0.view(), t_p, t_a, tau)?;
    let speciation = vec![vec![f(s.lambda_max), f(t_p), f(t_a), f(tau), f(s.passive), f(s.active)]];
    write_table(&out.join(SPECIATION_CSV), &["lambda_max", "t_p", "t_a", "tau", "t_s_passive", "t_s_active"], &speciation)?;
    let mut fourier = Vec::new();
    let modes = if spec.modes.is_empty() { vec![1.0, 4.0, 16.0] } else { spec.modes.clone() };
    let times = if spec.times.is_empty() { vec![0.0, 0.1, 0.25, 0.5, 1.0] } else { spec.times.clone() };
    for &q in &modes {
        for &t in &times {
            let r = fourier_decay_rates(q, spec.x0, t, t_p, t_a, tau);
            fourier.push(vec![
                f(q),
                f(t),
                f(r.passive.real),
                f(r.passive.real_small_t),
                f(r.active.real),
                f(r.active.real_small_t),
            ]);
        }
    }
    write_table(
        &out.join(FOURIER_CSV),
        &["mode", "t", "passive_real", "passive_real_small_t", "active_real", "active_real_small_t"],
        &fourier,
    )?;
    let files = vec![SPECIATION_CSV.to_string(), FOURIER_CSV.to_string()];
    Manifest::record(out, &files, entry(cfg, "theory", json!({ "t_p": t_p, "t_a": t_a, "tau": tau })))?;
    Ok(Theory { speciation, fourier })
}

fn covariance(x: &Array2<f64>) -> Array2<f64> {
    let n = x.nrows().max(1) as f64;
    let mean = x.sum_axis(Axis(0)) / n;
    let c = x - &mean;
    c.t().dot(&c) / n
}
