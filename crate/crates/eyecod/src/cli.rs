//! Command-line front end. Exit codes: 0 success, 1 usage, 2 input
//! validation, 3 simulation or runtime failure.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{read_matrix_csv, read_pgm, write_atomic, write_matrix_csv, write_pgm};
use crate::optics::{generate_mask, load_masks, reconstruct, save_masks, simulate_capture, MaskFamily, ReconSettings, SceneImage};
use crate::roi::{predict_roi, RoiPolicy, SegMask};
use crate::sim::{self, load_config, HardwareConfig, OrchestrationMode, SimReport};
use crate::workload::{self, load_network, load_workload, PipelineSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

/// Everything needed to reproduce an output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub config_paths: Vec<String>,
    pub seeds: Vec<u64>,
    pub output_paths: Vec<String>,
    pub tool_version: String,
}

impl RunManifest {
    fn new(command: &str, args: &[String]) -> Self {
        RunManifest {
            command: command.into(),
            args: args.to_vec(),
            config_paths: Vec::new(),
            seeds: Vec::new(),
            output_paths: Vec::new(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
        }
    }

    fn config(mut self, p: &Path) -> Self {
        self.config_paths.push(p.display().to_string());
        self
    }

    fn output(mut self, p: &Path) -> Self {
        self.output_paths.push(p.display().to_string());
        self
    }
}

#[derive(Debug, Parser)]
#[command(name = "eyecod", version, about = "Lensless eye-tracking pipeline and accelerator simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Generate a coded mask pair (sidecar JSON plus two CSV files).
    Masks(MasksArgs),
    /// Simulate a lensless capture of a PGM scene.
    Capture(CaptureArgs),
    /// Reconstruct a scene from a measurement CSV.
    Reconstruct(ReconstructArgs),
    /// Extract the gaze ROI from a segmentation mask.
    Roi(RoiArgs),
    /// Simulate the accelerator on a pipeline.
    Sim(SimArgs),
    /// Run the optimization ladder and all orchestration modes.
    Sweep(SweepArgs),
    /// Validate or regenerate workload files.
    #[command(subcommand)]
    Workload(WorkloadCmd),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Family {
    Mls,
    Bernoulli,
}

#[derive(Debug, Args)]
struct MasksArgs {
    #[arg(long, value_enum, default_value = "mls")]
    family: Family,
    /// Sensor side length.
    #[arg(long)]
    sensor: usize,
    /// Scene side length.
    #[arg(long)]
    scene: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Sidecar path; the CSV files are written beside it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct CaptureArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long)]
    masks: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ReconstructArgs {
    #[arg(long)]
    measurement: PathBuf,
    #[arg(long)]
    masks: PathBuf,
    #[arg(long, default_value_t = 1e-3)]
    epsilon: f64,
    /// `.pgm` for an 8-bit image, `.csv` for raw values.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct RoiArgs {
    #[arg(long)]
    mask: PathBuf,
    #[arg(long)]
    policy: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    Tm,
    Cc,
    Ptm,
}

impl Mode {
    fn orchestration(self) -> OrchestrationMode {
        match self {
            Mode::Tm => OrchestrationMode::TimeMultiplexing,
            Mode::Cc => OrchestrationMode::concurrent(),
            Mode::Ptm => OrchestrationMode::partial(),
        }
    }
}

#[derive(Debug, Args)]
struct SimArgs {
    #[arg(long)]
    hw: Option<PathBuf>,
    #[arg(long)]
    pipeline: PathBuf,
    #[arg(long, value_enum, default_value = "ptm")]
    mode: Mode,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    frames: u64,
    /// Report JSON; the per-interval CSV goes next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    pipeline: PathBuf,
    #[arg(long)]
    hw: Option<PathBuf>,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    frames: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum WorkloadCmd {
    /// Validate network, pipeline or hardware-config files.
    Validate {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Write the shipped workload, config and policy files.
    Gen {
        #[arg(long)]
        out: PathBuf,
    },
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    let args: Vec<String> = argv.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    match dispatch(cli.cmd, &args) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_input_error() {
        EXIT_VALIDATION
    } else {
        EXIT_RUNTIME
    }
}

fn dispatch(cmd: Cmd, args: &[String]) -> Result<()> {
    match cmd {
        Cmd::Masks(a) => cmd_masks(a),
        Cmd::Capture(a) => cmd_capture(a),
        Cmd::Reconstruct(a) => cmd_reconstruct(a),
        Cmd::Roi(a) => cmd_roi(a),
        Cmd::Sim(a) => cmd_sim(a, args),
        Cmd::Sweep(a) => cmd_sweep(a, args),
        Cmd::Workload(WorkloadCmd::Validate { files }) => cmd_validate(&files),
        Cmd::Workload(WorkloadCmd::Gen { out }) => cmd_gen(&out),
    }
}

fn cmd_masks(a: MasksArgs) -> Result<()> {
    let family = match a.family {
        Family::Mls => MaskFamily::Mls,
        Family::Bernoulli => MaskFamily::Bernoulli,
    };
    let (masks, cond) = generate_mask(family, a.sensor, a.scene, a.seed)?;
    save_masks(&masks, Some(family), Some(a.seed), &a.out)?;
    println!("condition numbers: left {:.3e} right {:.3e}", cond.left, cond.right);
    Ok(())
}

fn cmd_capture(a: CaptureArgs) -> Result<()> {
    let scene = SceneImage::from_gray(&read_pgm(&a.scene)?);
    let (masks, _) = load_masks(&a.masks)?;
    let y = simulate_capture(&scene, &masks, a.sigma, a.seed)?;
    write_matrix_csv(&a.out, &y.channels[0])
}

fn cmd_reconstruct(a: ReconstructArgs) -> Result<()> {
    let y = read_matrix_csv(&a.measurement)?;
    let (masks, _) = load_masks(&a.masks)?;
    let x = reconstruct(&y, &masks, ReconSettings::new(a.epsilon)?)?;
    if a.out.extension().is_some_and(|e| e == "csv") {
        write_matrix_csv(&a.out, &x.values)
    } else {
        write_pgm(&a.out, &x.to_gray())
    }
}

fn cmd_roi(a: RoiArgs) -> Result<()> {
    let mask = SegMask::read_pgm(&a.mask)?;
    let policy = match &a.policy {
        Some(p) => RoiPolicy::load(p)?,
        None => RoiPolicy::default(),
    };
    let rect = predict_roi(&mask, &policy)?;
    let text = serde_json::to_string(&rect).expect("rect serializes") + "\n";
    print!("{text}");
    write_atomic(&a.out, text.as_bytes())
}

fn config(path: Option<&Path>) -> Result<HardwareConfig> {
    match path {
        Some(p) => load_config(p),
        None => Ok(HardwareConfig::default()),
    }
}

fn with_manifest(mut r: SimReport, m: &RunManifest) -> SimReport {
    r.manifest = Some(serde_json::to_value(m).expect("manifest serializes"));
    r
}

fn cmd_sim(a: SimArgs, args: &[String]) -> Result<()> {
    let cfg = config(a.hw.as_deref())?;
    let p = load_workload(&a.pipeline)?;
    let csv = a.out.with_extension("csv");
    let mut m = RunManifest::new("sim", args).config(&a.pipeline).output(&a.out).output(&csv);
    if let Some(hw) = &a.hw {
        m = m.config(hw);
    }
    let r = sim::run(&p, a.mode.orchestration(), &cfg, a.frames as usize)?;
    let r = with_manifest(r, &m);
    let json = serde_json::to_string_pretty(&r).expect("report serializes") + "\n";
    write_atomic(&a.out, json.as_bytes())?;
    write_atomic(&csv, sim::report_csv(&r).as_bytes())?;
    println!(
        "mode {} fps {:.2} (average {:.2}) utilization {:.3} energy/frame {:.4e}",
        r.mode.short(),
        r.fps,
        r.fps_average,
        r.utilization,
        r.energy.per_frame
    );
    Ok(())
}

/// Worker count for sweeps: `EYECOD_THREADS` when set, else the machine's
/// parallelism.
pub fn sweep_threads() -> usize {
    std::env::var("EYECOD_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

/// Maps `f` over `jobs` on at most `threads` scoped workers, keeping order.
pub fn par_map<J: Sync, R: Send>(jobs: &[J], threads: usize, f: impl Fn(&J) -> R + Sync) -> Vec<R> {
    let next = AtomicUsize::new(0);
    let workers = threads.clamp(1, jobs.len().max(1));
    let mut out: Vec<(usize, R)> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                s.spawn(|| {
                    let mut done = Vec::new();
                    loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        if i >= jobs.len() {
                            break done;
                        }
                        done.push((i, f(&jobs[i])));
                    }
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("sweep worker panicked")).collect()
    });
    out.sort_by_key(|(i, _)| *i);
    out.into_iter().map(|(_, r)| r).collect()
}

/// Summary of one orchestration mode in a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeRow {
    pub mode: String,
    pub fps: f64,
    pub fps_average: f64,
    pub utilization: f64,
    pub energy_per_frame: f64,
    pub peak_corun_speedup: f64,
    pub seg_lanes: usize,
}

#[derive(Debug, Serialize)]
struct SweepReport<'a> {
    manifest: &'a RunManifest,
    ladder: &'a [sim::LadderRow],
    modes: &'a [ModeRow],
}

fn cmd_sweep(a: SweepArgs, args: &[String]) -> Result<()> {
    let base = config(a.hw.as_deref())?;
    let main = load_workload(&a.pipeline)?;
    let lens = workload::lens_baseline(&main, crate::networks::LENS_FRAME)?;
    std::fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    let frames = a.frames as usize;

    let mut jobs: Vec<(String, &PipelineSpec, OrchestrationMode, HardwareConfig)> = sim::ladder_configs(&base)
        .into_iter()
        .map(|(name, is_lens, mode, cfg)| (name.to_string(), if is_lens { &lens } else { &main }, mode, cfg))
        .collect();
    for m in [Mode::Tm, Mode::Cc, Mode::Ptm] {
        let mode = m.orchestration();
        jobs.push((format!("mode {}", mode.short()), &main, mode, base.clone()));
    }
    let results = par_map(&jobs, sweep_threads(), |(name, p, mode, cfg)| {
        sim::run(p, *mode, cfg, frames).map_err(|e| Error::Simulation(format!("{name}: {e}")))
    });
    let mut reports = Vec::with_capacity(results.len());
    for r in results {
        reports.push(r?);
    }
    let named: Vec<(&str, SimReport)> = jobs[..5].iter().map(|j| j.0.as_str()).zip(reports.drain(..5)).collect();
    let ladder = sim::ladder_rows(&named);
    let modes: Vec<ModeRow> = reports
        .iter()
        .map(|r| ModeRow {
            mode: r.mode.short().into(),
            fps: r.fps,
            fps_average: r.fps_average,
            utilization: r.utilization,
            energy_per_frame: r.energy.per_frame,
            peak_corun_speedup: r.peak_corun_speedup,
            seg_lanes: r.seg_lanes,
        })
        .collect();

    let ladder_path = a.out.join("ladder.csv");
    let modes_path = a.out.join("modes.csv");
    let json_path = a.out.join("sweep.json");
    let mut m = RunManifest::new("sweep", args)
        .config(&a.pipeline)
        .output(&ladder_path)
        .output(&modes_path)
        .output(&json_path);
    if let Some(hw) = &a.hw {
        m = m.config(hw);
    }
    write_atomic(&ladder_path, sim::ladder_csv(&ladder).as_bytes())?;
    write_atomic(&modes_path, modes_csv(&modes).as_bytes())?;
    let report = SweepReport {
        manifest: &m,
        ladder: &ladder,
        modes: &modes,
    };
    let json = serde_json::to_string_pretty(&report).expect("sweep serializes") + "\n";
    write_atomic(&json_path, json.as_bytes())?;
    for r in &ladder {
        println!("{:20} fps {:9.2} x{:.3} eff {:.3}", r.name, r.fps, r.step_ratio, r.norm_energy_eff);
    }
    Ok(())
}

pub fn modes_csv(rows: &[ModeRow]) -> String {
    let mut s = String::from("mode,fps,fps_average,utilization,energy_per_frame,peak_corun_speedup,seg_lanes\n");
    for r in rows {
        s.push_str(&format!(
            "{},{:.4},{:.4},{:.6},{:.6e},{:.4},{}\n",
            r.mode, r.fps, r.fps_average, r.utilization, r.energy_per_frame, r.peak_corun_speedup, r.seg_lanes
        ));
    }
    s
}

fn cmd_validate(files: &[PathBuf]) -> Result<()> {
    for f in files {
        let text = std::fs::read_to_string(f).map_err(|e| Error::io(f, e))?;
        let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::format(f, e.to_string()))?;
        let kind = if v.get("layers").is_some() {
            load_network(f)?;
            "network"
        } else if v.get("seg_net").is_some() {
            load_workload(f)?;
            "pipeline"
        } else if v.get("refresh_n").is_some() {
            RoiPolicy::load(f)?;
            "roi policy"
        } else {
            load_config(f)?;
            "hardware config"
        };
        println!("{}: valid {kind}", f.display());
    }
    Ok(())
}

/// File names written by `workload gen`.
pub const GENERATED: [&str; 6] = [
    "ritnet_128.json",
    "fbnet_c100_96x160.json",
    "pipeline.json",
    "pipeline_optical.json",
    "hw_default.json",
    "roi_policy.json",
];

fn cmd_gen(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let p = crate::networks::shipped_pipeline();
    workload::save_workload(&p, out.join(GENERATED[2]))?;
    let mut optical = p.clone();
    optical.name = format!("{}_optical", p.name);
    optical.optical_first_layer = true;
    write_atomic(&out.join(GENERATED[3]), workload::pipeline_to_json(&optical).as_bytes())?;
    sim::save_config(&HardwareConfig::default(), out.join(GENERATED[4]))?;
    let policy = serde_json::to_string_pretty(&RoiPolicy::default()).expect("policy serializes") + "\n";
    write_atomic(&out.join(GENERATED[5]), policy.as_bytes())?;
    for f in GENERATED {
        println!("wrote {}", out.join(f).display());
    }
    Ok(())
}
