//! Command-line front end: sweeps, threshold calibration, false-alarm
//! injection, characteristic-value histograms and pilot dumps.

use std::error::Error as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gfscma::ce::CeMethod;
use gfscma::config::{parse_snr_range, ChannelChoice, DataGain, PriorChoice, SimConfig};
use gfscma::harness::{
    experiment_false_alarm_injection, experiment_histograms, histogram_csv, injection_csv, overlap_csv, run_sweep,
    write_text, ChainKind, ReceiverChain, SimContext,
};
use gfscma::pilots::{build_pilot_pool, write_pilot_csv};
use gfscma::raud::{calibrate_threshold, NormKind, ThresholdCurve};
use gfscma::{Error, Result};

#[derive(Parser)]
#[command(name = "gfscma", version, about = "Uplink grant-free SCMA receiver simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep SNR for one or more receiver chains and write one CSV per
    /// chain and channel.
    Run(RunArgs),
    /// Calibrate the refinement threshold curve.
    Calibrate(CommonArgs),
    /// BER with genie detection plus forced inactive UEs.
    InjectFa(InjectArgs),
    /// Characteristic-value histograms of both receivers.
    Histograms(CommonArgs),
    /// Write the pilot pool as CSV.
    DumpPilots(CommonArgs),
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// JSON configuration file; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// SNR grid in dB, `start:step:stop` or a single value.
    #[arg(long)]
    snr: Option<String>,
    /// Trials per SNR point.
    #[arg(long)]
    trials: Option<u64>,
    /// Channel model (`epa`, `eva`, `flat`, `custom:<file>`); repeatable.
    #[arg(long)]
    channel: Vec<ChannelChoice>,
    /// Output directory (or `.json` file for `calibrate`).
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// AUD threshold of the one-step chains.
    #[arg(long)]
    aud_threshold: Option<f64>,
    /// AUD threshold of the two-step chain.
    #[arg(long)]
    aud_threshold_two_step: Option<f64>,
    #[arg(long)]
    focuss_iters: Option<usize>,
    #[arg(long, value_parser = parse_ce_method)]
    ce_method: Option<CeMethod>,
    #[arg(long, value_parser = parse_prior)]
    ce_prior: Option<PriorChoice>,
    #[arg(long, value_parser = parse_data_gain)]
    data_gain: Option<DataGain>,
    #[arg(long)]
    mpa_iters: Option<usize>,
    #[arg(long)]
    jmpa_theta: Option<f64>,
    /// Data symbols per UE per frame.
    #[arg(long)]
    payload: Option<usize>,
    /// Refinement norm (`l1` or `l2`).
    #[arg(long)]
    norm: Option<NormKind>,
    /// Calibration quantile.
    #[arg(long)]
    q: Option<f64>,
    /// AUD threshold used while calibrating.
    #[arg(long)]
    calibration_aud_threshold: Option<f64>,
    /// Worker threads; defaults to all cores. Results do not depend on it.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Receiver chain; repeatable.
    #[arg(long, default_value = "one-step-mpa")]
    chain: Vec<ChainKind>,
    /// Threshold curve for two-step chains: a file for every channel, or
    /// `<channel>=<file>`; repeatable.
    #[arg(long)]
    curve: Vec<String>,
}

#[derive(Args)]
struct InjectArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Numbers of inactive UEs forced into the decoder list.
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3")]
    n_injected: Vec<usize>,
}

fn parse_ce_method(s: &str) -> std::result::Result<CeMethod, String> {
    serde_json::from_value(serde_json::Value::String(s.into())).map_err(|_| format!("expected mmse or ls, got `{s}`"))
}

fn parse_prior(s: &str) -> std::result::Result<PriorChoice, String> {
    serde_json::from_value(serde_json::Value::String(s.into()))
        .map_err(|_| format!("expected genie, epa, eva or flat, got `{s}`"))
}

fn parse_data_gain(s: &str) -> std::result::Result<DataGain, String> {
    serde_json::from_value(serde_json::Value::String(s.into()))
        .map_err(|_| format!("expected genie or extrapolate, got `{s}`"))
}

impl CommonArgs {
    /// Config file (or defaults) with the flags applied.
    fn config(&self) -> Result<SimConfig> {
        let mut c = match &self.config {
            Some(path) => SimConfig::from_json_file(path)?,
            None => SimConfig::default(),
        };
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(s) = &self.snr {
            c.snr_db = parse_snr_range(s)?;
        }
        if let Some(v) = self.trials {
            c.trials = v;
        }
        if let Some(v) = self.aud_threshold {
            c.aud.threshold = v;
        }
        if let Some(v) = self.aud_threshold_two_step {
            c.aud.threshold_two_step = v;
        }
        if let Some(v) = self.focuss_iters {
            c.aud.max_iter = v;
        }
        if let Some(v) = self.ce_method {
            c.ce.method = v;
        }
        if let Some(v) = self.ce_prior {
            c.ce.prior = v;
        }
        if let Some(v) = self.data_gain {
            c.ce.data_gain = v;
        }
        if let Some(v) = self.mpa_iters {
            c.mpa.iters = v;
        }
        if let Some(v) = self.jmpa_theta {
            c.mpa.jmpa_theta = v;
        }
        if let Some(v) = self.payload {
            c.payload_symbols = v;
        }
        if let Some(v) = self.norm {
            c.raud.norm = v;
        }
        if let Some(v) = self.q {
            c.raud.q = v;
        }
        if let Some(v) = self.calibration_aud_threshold {
            c.raud.calibration_aud_threshold = v;
        }
        c.validate()?;
        Ok(c)
    }

    /// One config per requested channel (the configured one if none).
    fn per_channel(&self, fallback: &[ChannelChoice]) -> Result<Vec<SimConfig>> {
        let base = self.config()?;
        let channels = match (self.channel.is_empty(), fallback.is_empty()) {
            (false, _) => self.channel.clone(),
            (true, false) => fallback.to_vec(),
            (true, true) => vec![base.channel.clone()],
        };
        Ok(channels
            .into_iter()
            .map(|channel| SimConfig {
                channel,
                ..base.clone()
            })
            .collect())
    }

    fn out_dir(&self) -> Result<&Path> {
        std::fs::create_dir_all(&self.out).map_err(|e| Error::io(&self.out, e))?;
        Ok(&self.out)
    }
}

/// Picks the curve for `channel` from `--curve` entries.
fn curve_for(entries: &[String], channel: &ChannelChoice) -> Result<Option<ThresholdCurve>> {
    let label = channel.label();
    let mut fallback = None;
    for entry in entries {
        match entry.split_once('=') {
            Some((ch, path)) => {
                if ch.parse::<ChannelChoice>()?.label() == label {
                    return ThresholdCurve::load(path).map(Some);
                }
            }
            None => fallback = Some(entry),
        }
    }
    fallback.map(ThresholdCurve::load).transpose()
}

fn cmd_run(args: &RunArgs) -> Result<()> {
    let common = &args.common;
    let out = common.out_dir()?;
    for cfg in common.per_channel(&[])? {
        let curve = curve_for(&args.curve, &cfg.channel)?;
        let chains = args
            .chain
            .iter()
            .map(|&kind| {
                if kind == ChainKind::TwoStep && curve.is_none() {
                    return Err(Error::Config(format!(
                        "missing curve file for the two-step chain on channel {}",
                        cfg.channel
                    )));
                }
                ReceiverChain::from_config(kind, &cfg, curve.clone())
            })
            .collect::<Result<Vec<_>>>()?;
        let ctx = SimContext::new(cfg)?;
        for result in run_sweep(&ctx, &chains, common.workers)? {
            let path = out.join(format!("{}_{}.csv", result.chain, result.channel));
            write_text(&path, &result.to_csv())?;
            eprintln!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn cmd_calibrate(args: &CommonArgs) -> Result<()> {
    let configs = args.per_channel(&[])?;
    let single_file = args.out.extension().is_some_and(|e| e == "json");
    if single_file && configs.len() > 1 {
        return Err(Error::Config("a single --out file needs a single --channel".into()));
    }
    for cfg in configs {
        let path = if single_file {
            if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
            args.out.clone()
        } else {
            let norm = serde_json::to_value(cfg.raud.norm)?;
            args.out_dir()?.join(format!(
                "curve_{}_{}.json",
                cfg.channel.label(),
                norm.as_str().unwrap_or("norm")
            ))
        };
        let curve = calibrate_threshold(&SimContext::new(cfg)?, args.workers)?;
        curve.save(&path)?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_inject(args: &InjectArgs) -> Result<()> {
    let common = &args.common;
    let out = common.out_dir()?;
    for mut cfg in common.per_channel(&[])? {
        // phantom UEs get their own channel gains unless told otherwise
        if common.data_gain.is_none() {
            cfg.ce.data_gain = DataGain::Genie;
        }
        let label = cfg.channel.label();
        let rows = experiment_false_alarm_injection(&SimContext::new(cfg)?, &args.n_injected, common.workers)?;
        let path = out.join(format!("inject_fa_{label}.csv"));
        write_text(&path, &injection_csv(&label, &rows))?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_histograms(args: &CommonArgs) -> Result<()> {
    let out = args.out_dir()?;
    let mut sets = Vec::new();
    for cfg in args.per_channel(&[ChannelChoice::Epa, ChannelChoice::Eva])? {
        sets.extend(experiment_histograms(&SimContext::new(cfg)?, args.workers)?);
    }
    for (name, text) in [("histograms.csv", histogram_csv(&sets)), ("overlap.csv", overlap_csv(&sets))] {
        let path = out.join(name);
        write_text(&path, &text)?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_dump_pilots(args: &CommonArgs) -> Result<()> {
    let cfg = args.config()?;
    let pool = build_pilot_pool(cfg.groups, cfg.pilots_per_group, cfg.rb_count)?;
    let path = args.out_dir()?.join("pilots.csv");
    write_pilot_csv(&pool, &path)?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Calibrate(a) => cmd_calibrate(a),
        Command::InjectFa(a) => cmd_inject(a),
        Command::Histograms(a) => cmd_histograms(a),
        Command::DumpPilots(a) => cmd_dump_pilots(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = e.source();
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
