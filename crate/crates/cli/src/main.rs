// `!(x <= y)` is used on purpose: it also catches NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use swipt_core::experiments::{Figure, Scenario};
use swipt_core::protocol::{BitBudget, Objective};

mod commands;
mod config;
mod manifest;

use config::{fmt_num, parse_config_text, Resolved, Source, UsageError};
use manifest::RunManifest;

/// Optimal power splitting for multi-hop SWIPT relay chains.
///
/// Settings resolve as flag > config file > built-in default. Powers are in
/// dBm, SNRs in dB.
#[derive(Parser, Debug)]
#[command(name = "swipt", version, allow_negative_numbers = true)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Flat `key = value` config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Output file; the manifest goes next to it. Defaults to stdout, with
    /// the manifest on stderr.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for Monte Carlo trials (0: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Mean small-scale power gain used by the relay-count estimate.
    #[arg(long, global = true)]
    fading_mean: Option<f64>,
    /// Number of relays.
    #[arg(long = "k", global = true)]
    relays: Option<usize>,
    #[arg(long, global = true)]
    e0_dbm: Option<f64>,
    /// SNR threshold for every node.
    #[arg(long, global = true)]
    gamma_db: Option<f64>,
    /// Information decoding noise.
    #[arg(long, global = true)]
    noise_dbm: Option<f64>,
    #[arg(long, global = true)]
    antenna_noise_dbm: Option<f64>,
    #[arg(long, global = true)]
    beta: Option<f64>,
    /// Inter-node distance in meters.
    #[arg(long, global = true)]
    d: Option<f64>,
    #[arg(long, global = true)]
    d0: Option<f64>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    #[arg(long, global = true)]
    c_db: Option<f64>,
    /// PS ratio of the fixed baseline.
    #[arg(long, global = true)]
    rho_fixed: Option<f64>,
}

impl Global {
    fn pairs(&self) -> Vec<(String, String)> {
        let mut v = Vec::new();
        let mut put = |k: &str, x: Option<String>| {
            if let Some(x) = x {
                v.push((k.to_string(), x));
            }
        };
        put("seed", self.seed.map(|x| x.to_string()));
        put("trials", self.trials.map(|x| x.to_string()));
        put("threads", self.threads.map(|x| x.to_string()));
        put("k", self.relays.map(|x| x.to_string()));
        let nums = [
            ("fading_mean", self.fading_mean),
            ("e0_dbm", self.e0_dbm),
            ("gamma_db", self.gamma_db),
            ("noise_dbm", self.noise_dbm),
            ("antenna_noise_dbm", self.antenna_noise_dbm),
            ("beta", self.beta),
            ("d", self.d),
            ("d0", self.d0),
            ("alpha", self.alpha),
            ("c_db", self.c_db),
            ("rho_fixed", self.rho_fixed),
        ];
        for (k, x) in nums {
            put(k, x.map(|x| format!("{x}")));
        }
        v
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Least source power meeting every threshold, for one channel.
    MinPower,
    /// Largest bottleneck rate at the source power, for one channel.
    MaxRate,
    /// Closed-form and exact supportable relay counts.
    NodeCount,
    /// Centralized against distributed dissemination of the ratios.
    ProtocolCompare {
        #[arg(long, value_enum, default_value_t = ObjectiveArg::MinPower)]
        objective: ObjectiveArg,
        #[arg(long, default_value_t = 1024)]
        info_bits: u64,
        #[arg(long, default_value_t = 32)]
        real_bits: u64,
        #[arg(long, default_value_t = 16)]
        index_bits: u64,
    },
    /// Monte Carlo sweep for one figure preset, as CSV.
    Sweep {
        /// fig3 to fig11, nodes-power or nodes-snr.
        figure: String,
        #[command(flatten)]
        values: ValuesArg,
    },
    /// Rate under imperfect channel estimates, as CSV.
    Icsi {
        /// Estimation error variances.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        sigma_e2: Option<Vec<f64>>,
    },
    /// Harvested power per relay, as CSV.
    Harvest {
        #[command(flatten)]
        values: ValuesArg,
    },
    /// Run the oracle suite on seeded random chains.
    Verify {
        /// Random chains per relay count.
        #[arg(long, default_value_t = 100)]
        instances: usize,
        #[arg(long, default_value_t = 3)]
        max_relays: usize,
        #[arg(long, default_value_t = 0.01)]
        grid_step: f64,
    },
}

#[derive(Args, Debug)]
struct ValuesArg {
    /// Swept values, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    values: Option<Vec<f64>>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ObjectiveArg {
    MinPower,
    MaxRate,
}

impl From<ObjectiveArg> for Objective {
    fn from(o: ObjectiveArg) -> Self {
        match o {
            ObjectiveArg::MinPower => Objective::MinSourcePower,
            ObjectiveArg::MaxRate => Objective::MaxMinRate,
        }
    }
}

fn list_value(v: &[f64]) -> String {
    v.iter()
        .map(|x| format!("{x}"))
        .collect::<Vec<_>>()
        .join(",")
}

impl Command {
    fn name(&self) -> String {
        match self {
            Command::MinPower => "min-power".into(),
            Command::MaxRate => "max-rate".into(),
            Command::NodeCount => "node-count".into(),
            Command::ProtocolCompare { .. } => "protocol-compare".into(),
            Command::Sweep { figure, .. } => format!("sweep {figure}"),
            Command::Icsi { .. } => "icsi".into(),
            Command::Harvest { .. } => "harvest".into(),
            Command::Verify { .. } => "verify".into(),
        }
    }

    fn figure(&self) -> Result<Option<Figure>> {
        Ok(match self {
            Command::Sweep { figure, .. } => Some(
                figure
                    .parse::<Figure>()
                    .map_err(|e| UsageError(e.to_string()))?,
            ),
            Command::Harvest { .. } => Some(Figure::Fig3),
            Command::Icsi { .. } => Some(Figure::Fig11),
            _ => None,
        })
    }

    /// Subcommand flags that behave like config keys.
    fn pairs(&self) -> Vec<(String, String)> {
        match self {
            Command::Sweep { values, .. } | Command::Harvest { values } => values
                .values
                .as_ref()
                .map(|v| vec![("values".to_string(), list_value(v))])
                .unwrap_or_default(),
            Command::Icsi { sigma_e2 } => sigma_e2
                .as_ref()
                .map(|v| vec![("sigma_e2".to_string(), list_value(v))])
                .unwrap_or_default(),
            _ => Vec::new(),
        }
    }

    fn options(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        match self {
            Command::ProtocolCompare {
                objective,
                info_bits,
                real_bits,
                index_bits,
            } => {
                let name = objective.to_possible_value().expect("not skipped");
                m.insert("objective".into(), name.get_name().to_string());
                m.insert("info_bits".into(), info_bits.to_string());
                m.insert("real_bits".into(), real_bits.to_string());
                m.insert("index_bits".into(), index_bits.to_string());
            }
            Command::Verify {
                instances,
                max_relays,
                grid_step,
            } => {
                m.insert("instances".into(), instances.to_string());
                m.insert("max_relays".into(), max_relays.to_string());
                m.insert("grid_step".into(), fmt_num(*grid_step));
            }
            _ => {}
        }
        m
    }
}

fn resolve(cli: &Cli) -> Result<Resolved> {
    let figure = cli.command.figure()?;
    let mut base = Scenario::default();
    let mut values = Vec::new();
    if let Some(fig) = figure {
        fig.preset_defaults(&mut base);
        values = fig.default_values();
    }
    let mut resolved = Resolved::from_defaults(&base, &values);
    if let Some(path) = &cli.global.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        resolved.apply(&parse_config_text(&text)?, Source::Config)?;
    }
    let mut flags = cli.global.pairs();
    flags.extend(cli.command.pairs());
    resolved.apply(&flags, Source::Flag)?;
    Ok(resolved)
}

fn execute(cli: &Cli, resolved: &Resolved) -> Result<commands::Output> {
    match &cli.command {
        Command::MinPower => commands::min_power(resolved),
        Command::MaxRate => commands::max_rate(resolved),
        Command::NodeCount => commands::node_count(resolved),
        Command::ProtocolCompare {
            objective,
            info_bits,
            real_bits,
            index_bits,
        } => {
            let budget = BitBudget::new(*info_bits, *real_bits, *index_bits)?;
            commands::protocol_compare(resolved, (*objective).into(), budget)
        }
        Command::Sweep { .. } => {
            let figure = cli.command.figure()?.expect("sweep has a figure");
            commands::sweep(resolved, figure)
        }
        Command::Icsi { .. } => commands::icsi(resolved),
        Command::Harvest { .. } => commands::harvest(resolved),
        Command::Verify {
            instances,
            max_relays,
            grid_step,
        } => commands::verify(resolved, *instances, *max_relays, *grid_step),
    }
}

fn run(cli: Cli, argv: Vec<String>) -> Result<bool> {
    let resolved = resolve(&cli)?;
    let threads = resolved.threads()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .context("building the worker pool")?;
    let output = pool.install(|| execute(&cli, &resolved))?;

    let mut manifest = RunManifest {
        command: cli.command.name(),
        version: env!("CARGO_PKG_VERSION"),
        seed: resolved.seed()?,
        argv,
        options: cli.command.options(),
        outputs: Vec::new(),
    };
    match &cli.global.out {
        Some(path) => {
            let manifest_path = PathBuf::from(format!("{}.manifest.jsonl", path.display()));
            manifest.outputs = vec![
                path.display().to_string(),
                manifest_path.display().to_string(),
            ];
            std::fs::write(path, &output.body)
                .with_context(|| format!("writing {}", path.display()))?;
            std::fs::write(&manifest_path, manifest.to_jsonl(&resolved))
                .with_context(|| format!("writing {}", manifest_path.display()))?;
        }
        None => {
            manifest.outputs = vec!["-".to_string()];
            std::io::stdout().write_all(output.body.as_bytes())?;
            std::io::stderr().write_all(manifest.to_jsonl(&resolved).as_bytes())?;
        }
    }
    Ok(output.ok)
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(u8::try_from(e.exit_code()).unwrap_or(2));
        }
    };
    match run(cli, argv) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
