//! Command-line harness behind the `tokprune` binary.
//!
//! Exit codes: 0 success, 1 usage error, 2 I/O or format error, 3 shape or config error.
//! Every failure prints one diagnostic line to the error stream.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::error::{Error, Result};
use crate::io::{self, netpbm, trace, LoadedRun, TraceRow};
use crate::pipeline::{PruneResult, Pruner, PrunerConfig};
use crate::sim::{self, EpisodeSpec, Scenario, TextAlignment};
use crate::types::{BinaryMask, TokenGrid};

#[derive(Debug, Parser)]
#[command(name = "tokprune", version, about = "Visual token pruning harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the pruner over an episode described by a manifest.
    Prune {
        /// Episode manifest written by `gen` or by hand.
        #[arg(long)]
        manifest: PathBuf,
        /// Output directory; created if missing.
        #[arg(long)]
        out: PathBuf,
        /// Also write one PGM keep-mask per step.
        #[arg(long)]
        masks: bool,
    },
    /// Generate a synthetic episode and its manifest.
    Gen {
        /// One of static, linearpan, approach.
        #[arg(long, value_parser = parse_scenario)]
        scenario: Scenario,
        #[arg(long)]
        seed: u64,
        /// Token grid as ROWSxCOLS.
        #[arg(long, value_parser = parse_grid)]
        grid: (usize, usize),
        /// Patch side length in pixels.
        #[arg(long)]
        patch: usize,
        /// Feature dimension.
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        steps: usize,
        /// Episode directory; created if missing.
        #[arg(long)]
        out: PathBuf,
        /// Amplitude of the per-step feature noise.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        /// Point the instruction embedding at the distractor instead of the target.
        #[arg(long)]
        misaligned: bool,
    },
    /// Summarize a trace CSV.
    Stats {
        #[arg(long)]
        trace: PathBuf,
    },
    /// Darken pruned patches of a frame.
    Overlay {
        /// Binary PPM frame.
        #[arg(long)]
        frame: PathBuf,
        /// Binary PGM keep-mask with one pixel per token.
        #[arg(long)]
        mask: PathBuf,
        /// Output PPM path.
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_scenario(s: &str) -> std::result::Result<Scenario, String> {
    Scenario::parse(s).ok_or_else(|| format!("unknown scenario `{s}` (static|linearpan|approach)"))
}

fn parse_grid(s: &str) -> std::result::Result<(usize, usize), String> {
    let (r, c) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("grid must look like 8x8, got `{s}`"))?;
    let r = r.parse().map_err(|_| format!("bad row count `{r}`"))?;
    let c = c.parse().map_err(|_| format!("bad column count `{c}`"))?;
    Ok((r, c))
}

/// Run the harness with explicit output streams; returns the exit code.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return 0;
            }
            let msg = e.to_string();
            let line = msg.lines().next().unwrap_or("usage error");
            let _ = writeln!(stderr, "{line}");
            return 1;
        }
    };
    let outcome = match cli.command {
        Command::Prune {
            manifest,
            out,
            masks,
        } => cmd_prune(&manifest, &out, masks),
        Command::Gen {
            scenario,
            seed,
            grid,
            patch,
            dim,
            steps,
            out,
            noise,
            misaligned,
        } => cmd_gen(
            scenario, seed, grid, patch, dim, steps, noise, misaligned, &out,
        ),
        Command::Stats { trace } => cmd_stats(&trace),
        Command::Overlay { frame, mask, out } => cmd_overlay(&frame, &mask, &out),
    };
    match outcome {
        Ok(text) => {
            let _ = write!(stdout, "{text}");
            0
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

/// Run the harness against the process's standard streams.
pub fn cli_run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run(argv, &mut std::io::stdout(), &mut std::io::stderr())
}

/// Runs the pruner over a loaded episode, one result per step.
pub fn prune_run(run: &LoadedRun) -> Result<Vec<PruneResult>> {
    let mut pruner = Pruner::new(run.manifest.config, run.manifest.grid)?;
    run.images
        .iter()
        .zip(&run.features)
        .map(|(img, f)| pruner.step(img, f, &run.text))
        .collect()
}

/// Trace rows for a sequence of results.
pub fn trace_rows(results: &[PruneResult], truth: Option<&[sim::StepTruth]>) -> Vec<TraceRow> {
    results
        .iter()
        .enumerate()
        .map(|(i, r)| TraceRow {
            step: r.step,
            iou: r.mode.iou,
            mode: r.mode.mode,
            retention: r.retention,
            target_recall: truth.map(|t| sim::target_recall(r, &t[i])),
        })
        .collect()
}

fn write_out(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn cmd_prune(manifest: &Path, out: &Path, masks: bool) -> Result<String> {
    // everything is decoded and computed before the first write
    let run = io::load_run(manifest)?;
    let results = prune_run(&run)?;
    let rows = trace_rows(&results, run.truth.as_deref());

    let m = &run.manifest;
    for (r, o) in results.iter().zip(&m.outputs) {
        let mut kept = String::new();
        for i in r.kept.iter() {
            let _ = writeln!(kept, "{i}");
        }
        write_out(&out.join(&o.kept), kept.as_bytes())?;
        if masks {
            let mask = BinaryMask::from_indices(m.grid, &r.kept);
            write_out(
                &out.join(&o.mask),
                &netpbm::encode_pgm(&netpbm::mask_to_gray(&mask)),
            )?;
        }
    }
    write_out(&out.join(&m.trace), trace::trace_to_csv(&rows).as_bytes())?;
    let stats = trace::trace_stats(&rows)?;
    Ok(stats.render())
}

#[allow(clippy::too_many_arguments)]
fn cmd_gen(
    scenario: Scenario,
    seed: u64,
    (rows, cols): (usize, usize),
    patch: usize,
    dim: usize,
    steps: usize,
    noise: f64,
    misaligned: bool,
    out: &Path,
) -> Result<String> {
    let grid = TokenGrid::new(rows, cols, patch)?;
    let mut spec = EpisodeSpec::new(seed, steps, grid, dim, scenario);
    spec.noise_scale = noise;
    if misaligned {
        spec.text = TextAlignment::Distractor;
    }
    let episode = sim::generate(&spec)?;
    let path = io::write_episode(out, &episode, &PrunerConfig::default())?;
    Ok(format!("{}\n", path.display()))
}

fn cmd_stats(path: &Path) -> Result<String> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let rows = trace::parse_trace(&text)?;
    Ok(trace::trace_stats(&rows)?.render())
}

fn cmd_overlay(frame: &Path, mask: &Path, out: &Path) -> Result<String> {
    let frame = netpbm::read_ppm(frame)?;
    let mask = netpbm::read_pgm(mask)?;
    let img = io::overlay(&frame, &mask)?;
    write_out(out, &netpbm::encode_ppm(&img))?;
    Ok(String::new())
}
