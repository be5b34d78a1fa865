#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use gmcr::bench::measure_costs;
use gmcr::checkpoint::{read_checkpoint, summarize, write_checkpoint, CheckpointFile, CompressionStats};
use gmcr::dump::{read_dump, write_dump, DumpFormat};
use gmcr::pic::diagnostics::{
    cold_two_stream_growth_rate, fit_growth_rate, log_curve_deviation, read_csv, write_phase_dump, CsvSink,
    DiagnosticsRow, Event,
};
use gmcr::pic::restart::{checkpoint_now, restart_from_file, write_checkpoint_now, RestartOptions};
use gmcr::pic::{init_two_stream, Simulation};
use gmcr::pipeline::{compress_particles, reconstruct_file, ReconstructOptions};
use gmcr::Particle;

use config::RunConfig;

#[derive(Parser)]
#[command(name = "gmcr", version, about = "Gaussian-mixture checkpoint compression for particle-in-cell runs")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct ConfigArgs {
    /// key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one configuration key, e.g. `--set nx=64`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args, Clone)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// End time (overrides `end_time`).
    #[arg(long)]
    until: Option<f64>,
    /// Checkpoint times, comma separated (overrides `checkpoint_at`).
    #[arg(long, value_name = "T[,T...]")]
    checkpoint_at: Option<String>,
    /// Output directory (overrides `output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the two-stream simulation from its initial state.
    Run(RunArgs),
    /// Resume a run from a checkpoint.
    Restart {
        checkpoint: PathBuf,
        #[command(flatten)]
        run: RunArgs,
        /// Skip the moment correction after resampling.
        #[arg(long)]
        no_lemons: bool,
        /// Resampling seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compress a particle dump into a checkpoint.
    Compress {
        dump: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Reconstruct particles from a checkpoint.
    Decompress {
        checkpoint: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Defaults to binary for `.bin`/`.gmpd`, CSV otherwise.
        #[arg(long, value_enum)]
        format: Option<Format>,
        #[arg(long)]
        no_lemons: bool,
        /// Resampling seed (default: the checkpoint seed).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print a checkpoint summary.
    Inspect { checkpoint: PathBuf },
    /// Compare the unit cost of mixture fitting with the particle push.
    BenchEm {
        dump: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        /// Implicit steps to time (overrides `bench_steps`).
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Post-process diagnostics CSV files.
    #[command(subcommand)]
    Diag(Diag),
}

#[derive(Subcommand)]
enum Diag {
    /// Fit the linear growth rate of the field energy.
    Growth {
        csv: PathBuf,
        #[arg(long, default_value_t = 3.0)]
        t0: f64,
        #[arg(long, default_value_t = 9.0)]
        t1: f64,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Compare a restarted history against a reference.
    Compare {
        reference: PathBuf,
        restarted: PathBuf,
        /// Start of the comparison window (default: the restart time).
        #[arg(long)]
        t0: Option<f64>,
        #[arg(long)]
        t1: Option<f64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Bin,
}

/// Error with its exit code: 2 for usage, config and unreadable input, 3
/// for failures while computing.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(e: impl fmt::Display) -> Self {
        Self {
            code: 2,
            message: e.to_string(),
        }
    }

    fn runtime(e: impl fmt::Display) -> Self {
        Self {
            code: 3,
            message: e.to_string(),
        }
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn dispatch(cmd: Command) -> CliResult {
    match cmd {
        Command::Run(args) => cmd_run(&args),
        Command::Restart {
            checkpoint,
            run,
            no_lemons,
            seed,
        } => cmd_restart(&checkpoint, &run, no_lemons, seed),
        Command::Compress { dump, output, config } => cmd_compress(&dump, &output, &config),
        Command::Decompress {
            checkpoint,
            output,
            format,
            no_lemons,
            seed,
        } => cmd_decompress(&checkpoint, &output, format, no_lemons, seed),
        Command::Inspect { checkpoint } => {
            let file = read_checkpoint(&checkpoint).map_err(Failure::usage)?;
            print!("{}", summarize(&file));
            Ok(())
        }
        Command::BenchEm { dump, config, steps } => cmd_bench(&dump, &config, steps),
        Command::Diag(d) => cmd_diag(d),
    }
}

fn load_config(args: &ConfigArgs) -> CliResult<RunConfig> {
    let mut rc = RunConfig::default();
    if let Some(p) = &args.config {
        rc.apply_file(p).map_err(Failure::usage)?;
    }
    rc.apply_overrides(&args.overrides).map_err(Failure::usage)?;
    Ok(rc)
}

fn load_run_config(args: &RunArgs) -> CliResult<RunConfig> {
    let mut rc = load_config(&args.config)?;
    if let Some(t) = args.until {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Failure::usage(format!("--until must be finite and nonnegative, got {t}")));
        }
        rc.sim.end_time = t;
    }
    if let Some(s) = &args.checkpoint_at {
        rc.checkpoint_at = config::times(s).map_err(|e| Failure::usage(format!("--checkpoint-at: {e}")))?;
    }
    if let Some(o) = &args.out {
        rc.output_dir = o.clone();
    }
    rc.sim.validate().map_err(Failure::usage)?;
    std::fs::create_dir_all(&rc.output_dir)
        .map_err(|e| Failure::usage(format!("{}: {e}", rc.output_dir.display())))?;
    Ok(rc)
}

fn print_checkpoint(path: &Path, file: &CheckpointFile, stats: &CompressionStats) {
    let s = summarize(file);
    let mean_k: Vec<String> = s.species.iter().map(|sp| format!("{:.2}", sp.mean_k())).collect();
    println!(
        "checkpoint t={} step={} -> {}: {} particles, {} bytes in cell records ({} file), ratio {:.2}, mean K {}",
        file.header.time,
        file.header.step,
        path.display(),
        stats.particles,
        stats.compressed_bytes,
        stats.file_bytes,
        stats.ratio(),
        mean_k.join("/")
    );
}

/// Steps to `end_time`, writing one diagnostics row per step plus the
/// scheduled checkpoints and phase dumps. On a step failure the last good
/// state is checkpointed and its path reported.
fn drive(sim: &mut Simulation, rc: &RunConfig, sink: &mut CsvSink) -> CliResult {
    let end = sim.cfg.step_at(rc.sim.end_time);
    let ckpt: BTreeSet<u64> = rc.checkpoint_at.iter().map(|&t| sim.cfg.step_at(t)).collect();
    let phase: BTreeSet<u64> = rc.phase_dump_at.iter().map(|&t| sim.cfg.step_at(t)).collect();
    let dumps: BTreeSet<u64> = rc.particle_dump_at.iter().map(|&t| sim.cfg.step_at(t)).collect();
    let mut last_good: Option<PathBuf> = None;
    loop {
        if ckpt.contains(&sim.step) {
            let path = rc.checkpoint_path(sim.step);
            let (file, _) = checkpoint_now(sim).map_err(Failure::runtime)?;
            let stats = write_checkpoint(&file, &path).map_err(Failure::runtime)?;
            print_checkpoint(&path, &file, &stats);
            last_good = Some(path);
        }
        if phase.contains(&sim.step) || dumps.contains(&sim.step) {
            let all: Vec<Particle> = sim.species.iter().flat_map(|s| s.particles.iter().copied()).collect();
            if phase.contains(&sim.step) {
                write_phase_dump(&rc.phase_dump_path(sim.step), &all).map_err(Failure::runtime)?;
            }
            if dumps.contains(&sim.step) {
                write_dump(&rc.particle_dump_path(sim.step), &all, DumpFormat::Csv).map_err(Failure::runtime)?;
            }
        }
        if sim.step >= end {
            break;
        }
        if let Err(e) = sim.step().and_then(|()| sim.diagnostics(Event::Step)).and_then(|r| sink.write(&r)) {
            let _ = sink.flush();
            let rescue = rc.output_dir.join(format!("{}_{:06}_last_good.gmcr", rc.checkpoint_prefix, sim.step));
            let saved = match write_checkpoint_now(sim, &rescue) {
                Ok(_) => Some(rescue),
                Err(w) => {
                    log::error!("could not write {}: {w}", rescue.display());
                    last_good
                }
            };
            let where_ = saved.map_or("none".to_string(), |p| p.display().to_string());
            return Err(Failure::runtime(format!(
                "step {} failed: {e}\nlast good checkpoint: {where_}",
                sim.step + 1
            )));
        }
    }
    sink.flush().map_err(Failure::runtime)?;
    Ok(())
}

fn print_final(sim: &Simulation, last: Option<DiagnosticsRow>) {
    println!(
        "done: t={} step={} E_E={:e} total energy {:e}",
        sim.time(),
        sim.step,
        sim.field_energy(),
        sim.total_energy()
    );
    if let Some(r) = last {
        println!("last row: {}", r.to_csv());
    }
}

fn cmd_run(args: &RunArgs) -> CliResult {
    let rc = load_run_config(args)?;
    let mut sim = init_two_stream(&rc.sim).map_err(Failure::usage)?;
    let csv = rc.diagnostics_path();
    if csv.exists() {
        std::fs::remove_file(&csv).map_err(|e| Failure::runtime(format!("{}: {e}", csv.display())))?;
    }
    let mut sink = CsvSink::open(&csv).map_err(Failure::runtime)?;
    sink.write(&sim.diagnostics(Event::Init).map_err(Failure::runtime)?)
        .map_err(Failure::runtime)?;
    drive(&mut sim, &rc, &mut sink)?;
    print_final(&sim, sim.diagnostics(Event::Step).ok().filter(|_| sim.step > 0));
    Ok(())
}

fn cmd_restart(path: &Path, args: &RunArgs, no_lemons: bool, seed: Option<u64>) -> CliResult {
    let rc = load_run_config(args)?;
    let file = read_checkpoint(path).map_err(Failure::usage)?;
    let opts = RestartOptions {
        lemons: rc.lemons && !no_lemons,
        seed,
    };
    let (mut sim, report) =
        restart_from_file(file, &rc.sim, opts).map_err(Failure::runtime)?;
    println!(
        "restarted from {} at t={} step={} (lemons {}), dE at restart {:e}, gauss rms {:e}",
        path.display(),
        sim.time(),
        sim.step,
        if opts.lemons { "on" } else { "off" },
        report.row.energy_change,
        report.row.gauss_rms
    );
    if report.field_resolved {
        println!("stored field disagreed with the corrected charge and was re-solved");
    }
    let mut sink = CsvSink::open(&rc.diagnostics_path()).map_err(Failure::runtime)?;
    sink.write(&report.row).map_err(Failure::runtime)?;
    drive(&mut sim, &rc, &mut sink)?;
    print_final(&sim, None);
    Ok(())
}

fn cmd_compress(dump: &Path, output: &Path, args: &ConfigArgs) -> CliResult {
    let rc = load_config(args)?;
    rc.sim.validate().map_err(Failure::usage)?;
    let particles = read_dump(dump).map_err(|e| Failure::usage(format!("{}: {e}", dump.display())))?;
    let grid = rc.sim.grid().map_err(Failure::usage)?;
    let fit = gmcr::em::FitConfig {
        seed: rc.sim.seed,
        ..rc.sim.fit.clone()
    };
    let (file, reports) = compress_particles(&particles, grid, rc.species, &fit, rc.sim.min_particles)
        .map_err(|e| match e {
            gmcr::Error::InvalidParticle { .. } | gmcr::Error::InvalidSample(_) => {
                Failure::usage(format!("{}: {e}", dump.display()))
            }
            e => Failure::runtime(e),
        })?;
    let stats = write_checkpoint(&file, output).map_err(Failure::runtime)?;
    print_checkpoint(output, &file, &stats);
    if !reports.is_empty() {
        let sweeps: usize = reports.iter().map(|r| r.em_iterations).sum();
        println!(
            "fitted cells {}, EM sweeps per fitted cell {:.1}",
            reports.len(),
            sweeps as f64 / reports.len() as f64
        );
    }
    Ok(())
}

fn cmd_decompress(ckpt: &Path, output: &Path, format: Option<Format>, no_lemons: bool, seed: Option<u64>) -> CliResult {
    let file = read_checkpoint(ckpt).map_err(Failure::usage)?;
    let opts = ReconstructOptions {
        lemons: !no_lemons,
        ..ReconstructOptions::default()
    };
    let seed = seed.unwrap_or(file.header.seed);
    let species = reconstruct_file(&file, opts, seed).map_err(Failure::runtime)?;
    let mut particles = Vec::new();
    for (s, r) in species.into_iter().enumerate() {
        if r.lemons_fallbacks + r.lemons_skipped > 0 {
            log::warn!(
                "species {s}: {} cells matched to rescaled moments, {} uncorrected",
                r.lemons_fallbacks,
                r.lemons_skipped
            );
        }
        particles.extend(r.particles);
    }
    let fmt = match format {
        Some(Format::Csv) => DumpFormat::Csv,
        Some(Format::Bin) => DumpFormat::Binary,
        None => DumpFormat::from_path(output),
    };
    write_dump(output, &particles, fmt).map_err(Failure::runtime)?;
    println!("wrote {} particles to {}", particles.len(), output.display());
    Ok(())
}

fn cmd_bench(dump: &Path, args: &ConfigArgs, steps: Option<usize>) -> CliResult {
    let rc = load_config(args)?;
    rc.sim.validate().map_err(Failure::usage)?;
    let particles = read_dump(dump).map_err(|e| Failure::usage(format!("{}: {e}", dump.display())))?;
    if particles.is_empty() {
        return Err(Failure::usage(format!("{}: dump contains no particles", dump.display())));
    }
    let report = measure_costs(&particles, &rc.sim, rc.species, steps.unwrap_or(rc.bench_steps))
        .map_err(Failure::runtime)?;
    println!("{report}");
    Ok(())
}

fn cmd_diag(d: Diag) -> CliResult {
    match d {
        Diag::Growth { csv, t0, t1, config } => {
            let rc = load_config(&config)?;
            let rows = read_csv(&csv).map_err(|e| Failure::usage(format!("{}: {e}", csv.display())))?;
            let fitted = fit_growth_rate(&rows, t0, t1)
                .ok_or_else(|| Failure::runtime(format!("fewer than two rows with E_E > 0 in [{t0}, {t1}]")))?;
            let k = 2.0 * std::f64::consts::PI / rc.sim.length;
            let theory = cold_two_stream_growth_rate(k, rc.sim.beam_speed);
            println!("fitted growth rate  {fitted:.5} over [{t0}, {t1}]");
            println!("cold-beam theory    {theory:.5} (k={k:.5}, v_b={:.5})", rc.sim.beam_speed);
            if theory > 0.0 {
                println!("relative difference {:.4}", (fitted - theory).abs() / theory);
            }
            Ok(())
        }
        Diag::Compare {
            reference,
            restarted,
            t0,
            t1,
        } => {
            let read = |p: &Path| read_csv(p).map_err(|e| Failure::usage(format!("{}: {e}", p.display())));
            let (a, b) = (read(&reference)?, read(&restarted)?);
            let restart = b.iter().find(|r| r.event == Event::Restart).copied();
            let t_end = a.iter().chain(&b).map(|r| r.time).fold(0.0, f64::max);
            let t0 = t0.or(restart.map(|r| r.time)).unwrap_or(0.0);
            let t1 = t1.unwrap_or(t_end);
            match log_curve_deviation(&a, &b, t0, t1) {
                Some(d) => println!("ln E_E deviation    {d:.4} of the reference range over [{t0}, {t1}]"),
                None => println!("ln E_E deviation    n/a (no overlapping rows)"),
            }
            let max_abs = |rows: &[DiagnosticsRow], f: fn(&DiagnosticsRow) -> f64| {
                rows.iter().map(f).map(f64::abs).fold(0.0, f64::max)
            };
            let steps = |rows: &[DiagnosticsRow]| -> Vec<DiagnosticsRow> {
                rows.iter().filter(|r| r.event == Event::Step).copied().collect()
            };
            println!(
                "max continuity rms  reference {:e}, restarted {:e}",
                max_abs(&a, |r| r.continuity_rms),
                max_abs(&b, |r| r.continuity_rms)
            );
            let pre: Vec<DiagnosticsRow> = steps(&a).into_iter().filter(|r| r.time <= t0 + 1e-9).collect();
            println!("max |dE| before     {:e}", max_abs(&pre, |r| r.energy_change));
            if let Some(r) = restart {
                println!("dE at restart       {:e}", r.energy_change);
                let before = a.iter().find(|u| (u.time - r.time).abs() < 1e-9);
                if let Some(u) = before {
                    println!("gauss rms across    {:e} -> {:e}", u.gauss_rms, r.gauss_rms);
                }
            }
            println!(
                "max |dE| after      {:e}",
                max_abs(&steps(&b), |r| r.energy_change)
            );
            Ok(())
        }
    }
}
