//! Argument parsing and dispatch.

use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands::{self, CommandOptions};
use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "active-diffusion", version, about = "Active and passive score-based diffusion")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate (or ingest) the configured data set.
    GenData(Common),
    /// Train a score network on the configured data set.
    Train {
        #[command(flatten)]
        common: Common,
        /// Continue from the checkpoint in the output directory.
        #[arg(long)]
        resume: bool,
    },
    /// Generate samples with a trained network or exact mixture scores.
    Sample {
        #[command(flatten)]
        common: Common,
        /// Use exact scores of the configured mixture (no checkpoint).
        #[arg(long)]
        analytic: bool,
        /// Checkpoint to load (default: `<out>/checkpoint.json`).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Also write the final `eta` coordinates of active samples.
        #[arg(long)]
        with_eta: bool,
        /// Number of samples (overrides `sampler.n_samples`).
        #[arg(long)]
        n_samples: Option<usize>,
    },
    /// Compare samples with reference data and apply the configured thresholds.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Sample CSV or lattice directory (default: the output of `sample`).
        #[arg(long)]
        samples: Option<PathBuf>,
        /// Reference CSV or lattice directory (default: the output of `gen-data`).
        #[arg(long)]
        reference: Option<PathBuf>,
    },
    /// Print speciation-time and Fourier-decay tables for the configured process.
    Theory(Common),
}

/// Flags shared by every subcommand. Flags override the configuration file.
#[derive(Debug, Args)]
pub struct Common {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Apply only the drift on the final reverse step.
    #[arg(long, value_name = "BOOL", action = clap::ArgAction::Set)]
    pub denoise_last: Option<bool>,
    /// Reverse step size; the step count becomes `round(t_f / dt)`.
    #[arg(long, conflicts_with = "n_steps")]
    pub dt: Option<f64>,
    #[arg(long)]
    pub n_steps: Option<usize>,
    /// Worker threads (1 gives a fully sequential run).
    #[arg(long)]
    pub threads: Option<usize>,
}

impl Common {
    /// Reads the configuration and applies the command-line overrides.
    pub fn load(&self) -> Result<RunConfig, CliError> {
        let text = fs::read_to_string(&self.config)
            .map_err(|e| CliError::Config(format!("{}: {e}", self.config.display())))?;
        let mut cfg = RunConfig::from_toml(&text)?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        if self.denoise_last.is_some() || self.dt.is_some() || self.n_steps.is_some() {
            let mut s = cfg.sampler.clone().unwrap_or_else(|| cfg.sampler_config());
            if let Some(d) = self.denoise_last {
                s.denoise_last = d;
            }
            if let Some(dt) = self.dt {
                if !(dt > 0.0 && dt.is_finite()) {
                    return Err(CliError::Config("--dt must be positive".into()));
                }
                s.n_steps = ((cfg.process.t_f / dt).round() as usize).max(1);
            }
            if let Some(n) = self.n_steps {
                s.n_steps = n;
            }
            cfg.sampler = Some(s);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn install_threads(&self) -> Result<(), CliError> {
        if let Some(n) = self.threads {
            if n == 0 {
                return Err(CliError::Config("--threads must be at least 1".into()));
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| CliError::Other(format!("cannot configure threads: {e}")))?;
        }
        Ok(())
    }
}

/// Runs one command; the returned text is printed to standard output.
pub fn run(cli: Cli) -> Result<String, CliError> {
    let common = match &cli.command {
        Command::GenData(c) | Command::Theory(c) => c,
        Command::Train { common, .. } | Command::Sample { common, .. } | Command::Eval { common, .. } => common,
    };
    common.install_threads()?;
    let mut cfg = common.load()?;
    let lines = |files: Vec<String>| files.join("\n");
    match cli.command {
        Command::GenData(_) => commands::gen_data(&cfg).map(lines),
        Command::Train { resume, .. } => commands::train(&cfg, &CommandOptions { resume, ..Default::default() }).map(lines),
        Command::Sample { analytic, checkpoint, with_eta, n_samples, .. } => {
            if let Some(n) = n_samples {
                let mut s = cfg.sampler.clone().unwrap_or_else(|| cfg.sampler_config());
                s.n_samples = n;
                cfg.sampler = Some(s);
            }
            let opts = CommandOptions { analytic, checkpoint, with_eta, ..Default::default() };
            commands::sample(&cfg, &opts).map(lines)
        }
        Command::Eval { samples, reference, .. } => {
            let checks = commands::eval(&cfg, &CommandOptions { samples, reference, ..Default::default() })?;
            let mut out = String::from("metric,value,threshold,status");
            for c in &checks {
                let th = c.threshold.map(crate::output::f).unwrap_or_default();
                out.push_str(&format!("\n{},{},{},{}", c.metric, crate::output::f(c.value), th, c.status()));
            }
            if checks.iter().any(|c| c.status() == "fail") {
                println!("{out}");
                return Err(CliError::Threshold);
            }
            Ok(out)
        }
        Command::Theory(_) => {
            let t = commands::theory(&cfg)?;
            let mut out = String::from("lambda_max,t_p,t_a,tau,t_s_passive,t_s_active");
            for r in &t.speciation {
                out.push('\n');
                out.push_str(&r.join(","));
            }
            out.push_str("\n\nmode,t,passive_real,passive_real_small_t,active_real,active_real_small_t");
            for r in &t.fourier {
                out.push('\n');
                out.push_str(&r.join(","));
            }
            Ok(out)
        }
    }
}
