//! Renders the kept tokens of one pruning step over its frame and writes both as netpbm
//! files.
//!
//! `cargo run --example overlay [-- <out-dir>]`

use std::path::PathBuf;

use tokprune::io::{self, netpbm, Image};
use tokprune::types::BinaryMask;
use tokprune::{sim, EpisodeSpec, Pruner, PrunerConfig, Scenario, TokenGrid};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("tokprune-overlay"));
    std::fs::create_dir_all(&out)?;

    let grid = TokenGrid::new(8, 8, 8)?;
    let ep = sim::generate(&EpisodeSpec::new(42, 12, grid, 8, Scenario::Approach))?;
    let mut pruner = Pruner::new(PrunerConfig::default(), grid)?;
    let mut last = None;
    for (img, f) in ep.images.iter().zip(&ep.features) {
        last = Some(pruner.step(img, f, &ep.text)?);
    }
    let r = last.expect("episode has steps");

    let mask = netpbm::mask_to_gray(&BinaryMask::from_indices(grid, &r.kept));
    let frame = ep.images.last().expect("episode has frames");
    let shaded = io::overlay(frame, &mask)?;
    netpbm::write_image(out.join("mask.pgm"), &Image::Gray(mask))?;
    netpbm::write_image(out.join("overlay.ppm"), &Image::Rgb(shaded))?;
    println!(
        "step {} ({}) kept {} of {} tokens; wrote {}",
        r.step,
        r.mode.mode.as_str(),
        r.kept.len(),
        grid.total(),
        out.display()
    );
    Ok(())
}
