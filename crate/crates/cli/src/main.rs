mod config;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use fogecg_core::analysis::analyze;
use fogecg_core::eval::{load_components, load_tables, power_budget, round2, table_summary};
use fogecg_core::hrv::{HrvMeasures, PeakList, VitalStatus};
use fogecg_core::netsim::{random_schedule, DisconnectWindow};
use fogecg_core::signal::{load_csv, synthesize, write_annotations, write_csv, write_samples_csv_to};
use fogecg_core::sim::simulate;
use serde::Serialize;

use crate::config::FileConfig;

#[derive(Parser, Debug)]
#[command(name = "fogecg", version, about = "Fog-layer ECG monitoring pipeline")]
struct Cli {
    /// Directory for all output artifacts.
    #[arg(long, global = true, env = "FOGECG_OUT_DIR", default_value = "out")]
    out_dir: PathBuf,
    /// TOML file overriding any default (sections: synth, adc, peak,
    /// delineation, ranges, vital_bounds, fog, link).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for synthesis noise and link jitter.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic ECG stream and its beat annotations.
    Synth(SynthArgs),
    /// Run HRV, delineation and classification on a sample CSV.
    Analyze(AnalyzeArgs),
    /// Run the fog node and flaky link end to end on a virtual clock.
    Simulate(SimulateArgs),
    /// Recompute the interval error tables.
    Evaluate(EvaluateArgs),
    /// Compute the power and energy budget.
    Power(PowerArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long)]
    rr: Option<f64>,
    #[arg(long)]
    pr: Option<f64>,
    #[arg(long)]
    qrs: Option<f64>,
    #[arg(long)]
    qt: Option<f64>,
    /// Noise standard deviation in units of the R amplitude.
    #[arg(long)]
    noise: Option<f64>,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    #[arg(long)]
    input: PathBuf,
    /// Sample rate of the input; defaults to the fog rate.
    #[arg(long)]
    fs: Option<f64>,
    #[arg(long, default_value_t = 4)]
    periods: usize,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Sample CSV to replay instead of synthesizing.
    #[arg(long, conflicts_with = "duration")]
    input: Option<PathBuf>,
    /// Seconds of synthetic signal.
    #[arg(long)]
    duration: Option<f64>,
    /// Outages as `start-end` second pairs, e.g. `30-60,90-100`.
    #[arg(long, value_delimiter = ',', value_parser = parse_window)]
    disconnects: Option<Vec<DisconnectWindow>>,
    /// Draw this many random outages over the run instead.
    #[arg(long, conflicts_with = "disconnects")]
    random_disconnects: Option<usize>,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long, default_value = "data/tables_2_5.csv")]
    tables: PathBuf,
}

#[derive(Args, Debug)]
struct PowerArgs {
    #[arg(long, default_value = "data/table7_components.csv")]
    components: PathBuf,
    #[arg(long, default_value_t = 24.0)]
    hours: f64,
}

fn parse_window(pair: &str) -> Result<DisconnectWindow, String> {
    let (a, b) = pair.split_once('-').ok_or_else(|| format!("`{pair}` is not start-end"))?;
    let start: f64 = a.trim().parse().map_err(|e| format!("`{a}`: {e}"))?;
    let end: f64 = b.trim().parse().map_err(|e| format!("`{b}`: {e}"))?;
    if !(start >= 0.0 && start < end) {
        return Err(format!("`{pair}` must satisfy 0 <= start < end"));
    }
    Ok(DisconnectWindow { start_ms: start * 1000.0, end_ms: end * 1000.0 })
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    argv: Vec<String>,
    seed: u64,
    config: &'a FileConfig,
    outputs: Vec<String>,
}

struct Out {
    dir: PathBuf,
    written: Vec<String>,
}

impl Out {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self { dir: dir.to_path_buf(), written: Vec::new() })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.written.push(name.to_string());
        self.dir.join(name)
    }

    fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        let path = self.path(name);
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }
}

#[derive(Serialize)]
struct HrvReport<'a> {
    peaks: &'a PeakList,
    measures: &'a HrvMeasures,
    vital: &'a VitalStatus,
}

fn run(cli: Cli) -> Result<&'static str> {
    let mut cfg = FileConfig::load(cli.config.as_deref())?;
    cfg.synth.seed = cli.seed;
    cfg.link.seed = cli.seed;
    let mut out = Out::new(&cli.out_dir)?;
    let command = match &cli.command {
        Command::Synth(a) => {
            let p = &mut cfg.synth;
            p.duration_s = a.duration.unwrap_or(p.duration_s);
            p.rr_ms = a.rr.unwrap_or(p.rr_ms);
            p.pr_ms = a.pr.unwrap_or(p.pr_ms);
            p.qrs_ms = a.qrs.unwrap_or(p.qrs_ms);
            p.qt_ms = a.qt.unwrap_or(p.qt_ms);
            p.noise_std = a.noise.unwrap_or(p.noise_std);
            let ecg = synthesize(&cfg.synth, &cfg.adc)?;
            write_csv(&ecg.stream, out.path("samples.csv"))?;
            write_annotations(&ecg.annotations, out.path("annotations.json"))?;
            println!("synth: {} samples, {} beats", ecg.stream.len(), ecg.annotations.len());
            "synth"
        }
        Command::Analyze(a) => {
            let fs_hz = a.fs.unwrap_or(cfg.fog.fs_hz);
            let stream = load_csv(&a.input, fs_hz).with_context(|| format!("reading samples from {}", a.input.display()))?;
            let result = analyze(&stream, &cfg.analysis(), a.periods)?;
            out.json("hrv.json", &HrvReport { peaks: &result.peaks, measures: &result.hrv, vital: &result.vital })?;
            if let Some(intervals) = &result.intervals {
                out.json("intervals.json", intervals)?;
            }
            let Some(verdict) = &result.verdict else {
                let reason = result.interval_error.map(|e| e.to_string()).unwrap_or_default();
                bail!("no interval verdict: {reason}");
            };
            out.json("verdict.json", verdict)?;
            println!(
                "analyze: {:.1} bpm, sdnn {:.2} ms, rmssd {:.2} ms, vital {:?}, heart {:?}",
                result.hrv.bpm, result.hrv.sdnn_ms, result.hrv.rmssd_ms, result.vital.state, verdict.verdict.status
            );
            "analyze"
        }
        Command::Simulate(a) => {
            let source = match &a.input {
                Some(path) => load_csv(path, cfg.fog.fs_hz).with_context(|| format!("reading samples from {}", path.display()))?,
                None => {
                    cfg.synth.duration_s = a.duration.unwrap_or(cfg.synth.duration_s);
                    cfg.synth.fs_hz = cfg.fog.fs_hz;
                    let ecg = synthesize(&cfg.synth, &cfg.adc)?;
                    write_csv(&ecg.stream, out.path("source.csv"))?;
                    ecg.stream
                }
            };
            if let Some(windows) = &a.disconnects {
                cfg.link.disconnect_windows = windows.clone();
            }
            if let Some(n) = a.random_disconnects {
                let horizon_ms = source.len() as f64 * source.sample_period_ms();
                cfg.link.disconnect_windows = random_schedule(cli.seed, horizon_ms, n, 5_000.0, 30_000.0);
            }
            let outcome = simulate(&source, &cfg.simulation())?;
            let trace_path = out.path("trace.csv");
            outcome.trace.write_csv(BufWriter::new(File::create(&trace_path)?))?;
            out.json("bandwidth.json", &outcome.bandwidth)?;
            write_samples_csv_to(&outcome.reassembled, File::create(out.path("reassembled.csv"))?)?;
            out.json("diff.json", &outcome.diff)?;
            out.json("alerts.json", &outcome.alerts)?;
            let d = &outcome.diff;
            println!(
                "simulate: {}/{} batches delivered, {} missing, {} reordered samples, identical: {}",
                d.delivered_batches, d.expected_batches, d.missing_samples, d.reordered_samples, d.identical
            );
            "simulate"
        }
        Command::Evaluate(a) => {
            let rows = load_tables(&a.tables).with_context(|| format!("reading tables from {}", a.tables.display()))?;
            let summary = table_summary(&rows)?;
            out.json("summary.json", &summary)?;
            println!(
                "evaluate: overall device error {:.2}%, accuracy {:.2}% (recomputed {:.2}%)",
                round2(summary.overall_device_error_pct),
                round2(summary.accuracy_pct),
                round2(summary.accuracy_recomputed_pct)
            );
            "evaluate"
        }
        Command::Power(a) => {
            let components = load_components(&a.components)
                .with_context(|| format!("reading components from {}", a.components.display()))?;
            let budget = power_budget(&components, a.hours)?;
            out.json("budget.json", &budget)?;
            println!("power: {:.2} W, {:.2} Wh over {} h", budget.watts, budget.watt_hours, budget.hours);
            "power"
        }
    };
    let manifest = Manifest {
        tool: "fogecg",
        version: env!("CARGO_PKG_VERSION"),
        command,
        argv: std::env::args().skip(1).collect(),
        seed: cli.seed,
        config: &cfg,
        outputs: out.written.clone(),
    };
    out.json("manifest.json", &manifest)?;
    Ok(command)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
