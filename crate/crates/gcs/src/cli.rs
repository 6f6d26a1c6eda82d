//! `gmob` subcommands. Every flag is listed in `docs/cli.md`.

use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use gmob_core::cost::{comp_cost, count_operations, ConvKind, CostMeasurements, LayerShape};
use gmob_core::data::write_pgm;
use gmob_core::gabor::{build_filter_bank, BankSpec};
use gmob_core::model::{build_network, model_report, ModelReport, NetConfig, StemSpec};
use gmob_core::sim::{run_missions, track_displacement, Classifier, Mission, NoiseConfig, PipelineConfig};
use gmob_core::{Exec, Tensor};
use serde::Serialize;

use crate::server::{serve, AppState, ServiceConfig};
use crate::session::StreamOptions;

pub type CliResult<T> = Result<T, Box<dyn std::error::Error + Send + Sync>>;

#[derive(Debug, Parser)]
#[command(
    name = "gmob",
    version,
    about = "Gesture-driven drone simulator: missions, reports and the ground-control service"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fly a mission and print tracking metrics
    Mission(MissionArgs),
    /// Model summary, convolution op table and computational cost
    Report(ReportArgs),
    /// Write the Gabor stem kernels as PGM images
    GaborDump(GaborDumpArgs),
    /// Start the HTTP/websocket service
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MissionKind {
    Rectangle,
    LShape,
}

#[derive(Debug, Args)]
pub struct MissionArgs {
    /// mission TOML (`kind`, `w`, `h`, `alt`); overrides --kind/--width/--height/--alt
    #[arg(long)]
    pub mission: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "rectangle")]
    pub kind: MissionKind,
    #[arg(long, default_value_t = 8.0)]
    pub width: f64,
    #[arg(long, default_value_t = 4.0)]
    pub height: f64,
    #[arg(long, default_value_t = 1.5)]
    pub alt: f64,
    /// pipeline config TOML
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// first seed
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// number of consecutive seeds to fly
    #[arg(long, default_value_t = 1)]
    pub runs: u64,
    /// disable actuation and IMU noise
    #[arg(long)]
    pub zero_noise: bool,
    /// fly the seeds on one thread
    #[arg(long)]
    pub sequential: bool,
    /// write each flight log as `seed_<n>.log` here
    #[arg(long)]
    pub log_dir: Option<PathBuf>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// network config TOML; default is the desk-scale G-MobNet
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// also report the depthwise MobileNet baseline at matched widths
    #[arg(long)]
    pub baseline: bool,
    /// op table kernel side
    #[arg(long, default_value_t = 3)]
    pub kernel: usize,
    /// op table input channels
    #[arg(long, default_value_t = 3)]
    pub channels: usize,
    /// op table input side
    #[arg(long, default_value_t = 8)]
    pub size: usize,
    /// TOML with runtime, gpuload, gpumem, data_cores, windows_process, training_epochs
    #[arg(long)]
    pub measurements: Option<PathBuf>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct GaborDumpArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// filter bank TOML; default is the bank of the desk-scale G-MobNet stem
    #[arg(long)]
    pub bank: Option<PathBuf>,
    /// nearest-neighbour upscaling factor
    #[arg(long, default_value_t = 16)]
    pub scale: usize,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
    /// where session and mission logs are written
    #[arg(long, env = "GMOB_DATA_DIR", default_value = "gmob-data")]
    pub data_dir: PathBuf,
    /// frames a stream subscriber may lag before losing the oldest
    #[arg(long, default_value_t = 4096)]
    pub stream_capacity: usize,
    /// frames kept per session for resuming subscribers
    #[arg(long, default_value_t = 65536)]
    pub history: usize,
}

pub fn run(cli: Cli, out: &mut dyn Write) -> CliResult<()> {
    match cli.command {
        Command::Mission(a) => mission(&a, out),
        Command::Report(a) => report(&a, out),
        Command::GaborDump(a) => gabor_dump(&a, out),
        Command::Serve(a) => {
            let state = AppState::new(ServiceConfig {
                data_dir: a.data_dir,
                stream: StreamOptions {
                    capacity: a.stream_capacity,
                    history: a.history,
                },
            });
            writeln!(out, "listening on http://{}", a.addr)?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(serve(a.addr, state))?;
            Ok(())
        }
    }
}

#[derive(Debug, Serialize)]
struct SeedReport {
    seed: u64,
    rows: usize,
    gestures: usize,
    skipped: usize,
    max_abs_error: [f64; 3],
    rmse: [f64; 3],
    path_length: f64,
}

fn mission(a: &MissionArgs, out: &mut dyn Write) -> CliResult<()> {
    let m = match &a.mission {
        Some(p) => Mission::load(p)?,
        None => match a.kind {
            MissionKind::Rectangle => Mission::Rectangle {
                w: a.width,
                h: a.height,
                alt: a.alt,
            },
            MissionKind::LShape => Mission::LShape {
                w: a.width,
                h: a.height,
                alt: a.alt,
            },
        },
    };
    let mut cfg = match &a.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if a.zero_noise {
        cfg.noise = NoiseConfig::ZERO;
    }
    if a.runs == 0 {
        return Err("--runs must be at least 1".into());
    }
    let classifier = Classifier::from_config(&cfg)?;
    let seeds: Vec<u64> = (a.seed..a.seed + a.runs).collect();
    let exec = if a.sequential { Exec::Sequential } else { Exec::auto() };
    let runs = run_missions(exec, &m, &cfg, &classifier, &seeds);
    let mut reports = Vec::with_capacity(runs.len());
    for (&seed, run) in seeds.iter().zip(runs) {
        let run = run?;
        let tm = track_displacement(&run.log, &run.reference)?;
        if let Some(dir) = &a.log_dir {
            std::fs::create_dir_all(dir)?;
            run.log.save(dir.join(format!("seed_{seed}.log")))?;
        }
        reports.push(SeedReport {
            seed,
            rows: run.log.len(),
            gestures: run.outcomes.len(),
            skipped: run.skipped,
            max_abs_error: tm.max_abs_error,
            rmse: tm.rmse,
            path_length: tm.path_length,
        });
    }
    if a.json {
        serde_json::to_writer_pretty(&mut *out, &reports)?;
        writeln!(out)?;
        return Ok(());
    }
    writeln!(out, "mission {m:?}")?;
    writeln!(
        out,
        "{:>6} {:>6} {:>5} {:>4}  {:>28}  {:>28}  {:>8}",
        "seed", "rows", "gest", "skip", "max |err| x/y/z (m)", "rmse x/y/z (m)", "path (m)"
    )?;
    let mut worst = [0.0f64; 3];
    for r in &reports {
        for (w, e) in worst.iter_mut().zip(r.max_abs_error) {
            *w = w.max(e);
        }
        writeln!(
            out,
            "{:>6} {:>6} {:>5} {:>4}  {:>8.4} {:>9.4} {:>9.4}  {:>8.4} {:>9.4} {:>9.4}  {:>8.3}",
            r.seed,
            r.rows,
            r.gestures,
            r.skipped,
            r.max_abs_error[0],
            r.max_abs_error[1],
            r.max_abs_error[2],
            r.rmse[0],
            r.rmse[1],
            r.rmse[2],
            r.path_length
        )?;
    }
    writeln!(
        out,
        "worst max |err|: x {:.4} y {:.4} z {:.4} m",
        worst[0], worst[1], worst[2]
    )?;
    Ok(())
}

fn load_toml<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?)
}

#[derive(Debug, Serialize)]
struct OpRow {
    kind: ConvKind,
    per_site_ops: u64,
    stages: u32,
    total_ops: u64,
}

#[derive(Debug, Serialize)]
struct FullReport {
    model: ModelReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    baseline: Option<ModelReport>,
    op_table: Vec<OpRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    comp_cost: Option<gmob_core::cost::CompCost>,
}

fn report(a: &ReportArgs, out: &mut dyn Write) -> CliResult<()> {
    let cfg: NetConfig = match &a.model {
        Some(p) => load_toml(p)?,
        None => NetConfig::gmobnet_desk(),
    };
    cfg.validate()?;
    let model = model_report(&build_network(&cfg)?)?;
    let baseline = if a.baseline {
        Some(model_report(&build_network(&NetConfig::mobilenet_baseline_desk())?)?)
    } else {
        None
    };
    let mut op_table = Vec::new();
    for kind in [
        ConvKind::Full2d,
        ConvKind::SpatialSeparable,
        ConvKind::DepthwiseSeparable,
    ] {
        let c = count_operations(&LayerShape {
            in_h: a.size,
            in_w: a.size,
            in_c: a.channels,
            kernel_h: a.kernel,
            kernel_w: a.kernel,
            out_c: 1,
            stride: 1,
            conv_kind: kind,
        })?;
        op_table.push(OpRow {
            kind,
            per_site_ops: c.per_site_ops,
            stages: c.stages,
            total_ops: c.total_ops,
        });
    }
    let comp = match &a.measurements {
        Some(p) => Some(comp_cost(&load_toml::<CostMeasurements>(p)?)?),
        None => None,
    };
    let full = FullReport {
        model,
        baseline,
        op_table,
        comp_cost: comp,
    };
    if a.json {
        serde_json::to_writer_pretty(&mut *out, &full)?;
        writeln!(out)?;
        return Ok(());
    }
    write_model(out, "model", &full.model)?;
    if let Some(b) = &full.baseline {
        write_model(out, "baseline", b)?;
    }
    writeln!(
        out,
        "\nop table (k={}, C={}, {}x{} input, one output channel)",
        a.kernel, a.channels, a.size, a.size
    )?;
    writeln!(out, "{:<22} {:>9} {:>7} {:>10}", "kind", "per-site", "stages", "total")?;
    for r in &full.op_table {
        writeln!(
            out,
            "{:<22} {:>9} {:>7} {:>10}",
            r.kind.as_str(),
            r.per_site_ops,
            r.stages,
            r.total_ops
        )?;
    }
    if let Some(c) = full.comp_cost {
        writeln!(out, "\ncost {}\ncomp_cost {}", c.cost, c.comp_cost)?;
    }
    Ok(())
}

fn write_model(out: &mut dyn Write, title: &str, m: &ModelReport) -> CliResult<()> {
    writeln!(out, "{title}: {} layers", m.layer_count)?;
    writeln!(out, "  trainable params  {}", m.trainable_params)?;
    writeln!(out, "  fixed params      {}", m.fixed_params)?;
    writeln!(out, "  ops / inference   {}", m.total_ops_per_inference)?;
    writeln!(out, "  size (bytes)      {}", m.model_size_bytes)?;
    writeln!(out, "  dropout p         {}", m.dropout_p)?;
    writeln!(
        out,
        "  {:<10} {:<20} {:>14} {:>6} {:>10} {:>8} {:>12}",
        "stage", "kind", "out", "layers", "trainable", "fixed", "ops"
    )?;
    for s in &m.stages {
        let shape = format!("{}x{}x{}", s.out_shape[0], s.out_shape[1], s.out_shape[2]);
        writeln!(
            out,
            "  {:<10} {:<20} {:>14} {:>6} {:>10} {:>8} {:>12}",
            s.name, s.kind, shape, s.layers, s.trainable_params, s.fixed_params, s.ops
        )?;
    }
    Ok(())
}

fn gabor_dump(a: &GaborDumpArgs, out: &mut dyn Write) -> CliResult<()> {
    let spec: BankSpec = match &a.bank {
        Some(p) => load_toml(p)?,
        None => match NetConfig::gmobnet_desk().stem {
            StemSpec::Gabor { bank, .. } => bank,
            StemSpec::Full2d { .. } => BankSpec::default(),
        },
    };
    if a.scale == 0 {
        return Err("--scale must be at least 1".into());
    }
    let bank = build_filter_bank(&spec)?;
    let k = spec.ksize;
    let m = spec.n_filters();
    std::fs::create_dir_all(&a.out)?;
    let mut index = String::from("file,theta_rad,lambda,min,max\n");
    for (j, p) in spec.params().iter().enumerate() {
        let vals: Vec<f64> = (0..k * k).map(|i| bank.data()[i * m + j]).collect();
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let span = hi - lo;
        let side = k * a.scale;
        let img = Tensor::from_fn(&[side, side, 1], |i| {
            let v = vals[(i[0] / a.scale) * k + i[1] / a.scale];
            if span > 0.0 {
                (v - lo) / span
            } else {
                0.5
            }
        })?;
        let name = format!("gabor_{j:02}.pgm");
        write_pgm(a.out.join(&name), &img)?;
        index.push_str(&format!("{name},{},{},{lo},{hi}\n", p.theta, p.lambda));
    }
    std::fs::write(a.out.join("bank.csv"), index)?;
    writeln!(
        out,
        "wrote {m} kernels ({k}x{k}, x{} upscale) to {}",
        a.scale,
        a.out.display()
    )?;
    Ok(())
}
