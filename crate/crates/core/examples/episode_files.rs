//! Writes a simulated episode to disk, reloads it through the manifest and prints the
//! trace statistics, the same path the `gen` and `prune` subcommands take.
//!
//! `cargo run --example episode_files [-- <dir>]`

use std::path::PathBuf;

use tokprune::cli::{prune_run, trace_rows};
use tokprune::io::{self, trace};
use tokprune::{sim, EpisodeSpec, PrunerConfig, Scenario, TokenGrid};

fn main() -> tokprune::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("tokprune-episode"));
    let grid = TokenGrid::new(6, 6, 8)?;
    let ep = sim::generate(&EpisodeSpec::new(11, 10, grid, 8, Scenario::Approach))?;
    let manifest = io::write_episode(&dir, &ep, &PrunerConfig::default())?;
    println!("wrote {}", manifest.display());

    let run = io::load_run(&manifest)?;
    let results = prune_run(&run)?;
    let rows = trace_rows(&results, run.truth.as_deref());
    print!("{}", trace::trace_to_csv(&rows));
    print!("{}", trace::trace_stats(&rows)?.render());
    Ok(())
}
