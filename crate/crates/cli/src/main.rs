use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dualband::balance::BalanceInputs;
use dualband_cli::config::{parse_batch, parse_eta_sweep, parse_tf_sweep, parse_tune, Batch, TuneConfig};
use dualband_cli::error::{CliError, Result};
use dualband_cli::presets::Preset;
use dualband_cli::report::OutDir;
use dualband_cli::run::{run_balance, run_eta_sweep, run_tf_sweep, run_tune, simulate, Overrides};

#[derive(Parser)]
#[command(name = "dualband", version, about = "Traffic balancing and coexistence runs for dual-band small cells")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Args, Clone)]
struct Common {
    /// Versioned JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in configuration: scenario-1, realistic, fig4, fig5, fig6, fig8.
    #[arg(long)]
    preset: Option<String>,
    /// Replaces the seed list with this one seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Simulated seconds per run.
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Verb {
    /// Closed-form time share for one set of rates.
    Balance {
        /// Licensed sDevice rate, bits/s.
        #[arg(long)]
        r_l: f64,
        /// Unlicensed sDevice rate, bits/s.
        #[arg(long)]
        r_u: f64,
        #[arg(long, default_value_t = 1)]
        n_w: u32,
        #[arg(long, default_value_t = 0.9)]
        t_max: f64,
        #[arg(long)]
        t_w_bar: f64,
        /// Downlink part of t_w_bar.
        #[arg(long)]
        t_w_dl: Option<f64>,
    },
    /// Optimal share and sum utility over licensed bandwidths.
    SweepTf(Common),
    /// DBF usage against η, analysis and simulation.
    SweepEta(Common),
    /// Scenario runs.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Write per-house event logs.
        #[arg(long)]
        events: bool,
    },
    /// Initial-window tuning against saturated WiFi.
    TuneIfw(Common),
}

fn preset(c: &Common) -> Result<Option<Preset>> {
    if c.config.is_some() && c.preset.is_some() {
        return Err(CliError::Config("--config and --preset are mutually exclusive".into()));
    }
    c.preset.as_deref().map(str::parse).transpose()
}

fn wrong_preset(p: Preset, verb: &str) -> CliError {
    CliError::Config(format!("preset {p} does not apply to {verb}"))
}

fn run(cli: Cli) -> Result<()> {
    match cli.verb {
        Verb::Balance { r_l, r_u, n_w, t_max, t_w_bar, t_w_dl } => {
            let mut inputs = BalanceInputs::new(r_l, r_u, n_w, t_max, t_w_bar)?;
            if let Some(dl) = t_w_dl {
                inputs = inputs.with_dl(dl)?;
            }
            let report = run_balance(inputs)?;
            println!("{}", serde_json::to_string_pretty(&report).map_err(|e| CliError::Runtime(e.to_string()))?);
        }
        Verb::SweepTf(c) => {
            let spec = match (preset(&c)?, &c.config) {
                (Some(p), _) => p.tf_sweep().ok_or_else(|| wrong_preset(p, "sweep-tf"))?,
                (None, Some(path)) => parse_tf_sweep(path)?,
                (None, None) => Preset::Fig4.tf_sweep().expect("fig4 is a share sweep"),
            };
            let r = run_tf_sweep(&spec, &OutDir::create(&c.out)?)?;
            print!("{}", r.summary);
        }
        Verb::SweepEta(c) => {
            let mut cfg = match (preset(&c)?, &c.config) {
                (Some(p), _) => p.eta_sweep().ok_or_else(|| wrong_preset(p, "sweep-eta"))?,
                (None, Some(path)) => parse_eta_sweep(path)?,
                (None, None) => Preset::Fig8.eta_sweep().expect("fig8 is an η sweep"),
            };
            if let Some(s) = c.seed {
                cfg.seed = s;
            }
            if let Some(h) = c.horizon {
                cfg.setup.horizon_s = h;
            }
            let r = run_eta_sweep(&cfg, &OutDir::create(&c.out)?)?;
            print!("{}", r.summary);
        }
        Verb::Simulate { common: c, events } => {
            let p = preset(&c)?;
            let mut batch = match (p, &c.config) {
                (Some(p), _) => Batch { runs: p.runs().ok_or_else(|| wrong_preset(p, "simulate"))? },
                (None, Some(path)) => parse_batch(path)?,
                (None, None) => return Err(CliError::Config("simulate needs --config or --preset".into())),
            };
            Overrides { seed: c.seed, horizon_s: c.horizon, log_events: events }.apply(&mut batch);
            let r = simulate(&batch, &OutDir::create(&c.out)?, p == Some(Preset::Scenario1))?;
            print!("{}", r.summary);
        }
        Verb::TuneIfw(c) => {
            let mut cfg = match (preset(&c)?, &c.config) {
                (Some(p), _) => return Err(wrong_preset(p, "tune-ifw")),
                (None, Some(path)) => parse_tune(path)?,
                (None, None) => TuneConfig::default(),
            };
            if let Some(s) = c.seed {
                cfg.seed = s;
            }
            if let Some(h) = c.horizon {
                cfg.setup.verify_s = h;
            }
            let r = run_tune(&cfg, &OutDir::create(&c.out)?)?;
            print!("{}", r.summary);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
