//! Full pruning loop on a simulated approach episode. Early on the instruction and the
//! motion disagree, so the pruner stays conservative; once the gripper closes in on the
//! target the two priors overlap and it switches to aggressive pruning.
//!
//! `cargo run --example mode_transition`

use tokprune::sim::{self, target_recall};
use tokprune::{EpisodeSpec, Pruner, PrunerConfig, Scenario, TokenGrid};

fn main() -> tokprune::Result<()> {
    let grid = TokenGrid::new(8, 8, 8)?;
    let ep = sim::generate(&EpisodeSpec::new(42, 20, grid, 8, Scenario::Approach))?;
    let mut pruner = Pruner::new(PrunerConfig::default(), grid)?;

    println!("step  mode          iou     kept  recall");
    for ((img, feats), truth) in ep.images.iter().zip(&ep.features).zip(&ep.truth) {
        let r = pruner.step(img, feats, &ep.text)?;
        println!(
            "{:>4}  {:<12}  {:.4}  {:>4}  {:.2}",
            r.step,
            r.mode.mode.as_str(),
            r.mode.iou,
            r.kept.len(),
            target_recall(&r, truth)
        );
    }
    Ok(())
}
