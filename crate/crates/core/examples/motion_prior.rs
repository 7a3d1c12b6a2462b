//! The motion prior reacts to acceleration, not velocity: a token drifting at constant speed
//! stays silent while a token that suddenly jumps lights up. The normalized score keeps the
//! jump on top; the raw history shows the response fading at rate `gamma`.
//!
//! `cargo run --example motion_prior`

use tokprune::motion::motion_prior;
use tokprune::{FeatureMatrix, MotionState, TokenGrid};

fn main() -> tokprune::Result<()> {
    let grid = TokenGrid::new(8, 8, 1)?;
    let drifting = grid.index(1, 1);
    let jumping = grid.index(4, 5);
    let mut state = MotionState::new();

    for t in 0..10 {
        let data: Vec<f64> = (0..grid.total())
            .map(|i| match i {
                i if i == drifting => 0.5 * t as f64,
                i if i == jumping && t == 4 => 3.0,
                _ => 0.0,
            })
            .collect();
        let feats = FeatureMatrix::new(grid, 1, data)?;
        let s = motion_prior(&feats, &mut state, 0.7, 1.0)?;
        let peak = state
            .history()
            .map_or(0.0, |h| h.data().iter().copied().fold(0.0, f64::max));
        println!(
            "step {t}: drifting {:.3}  jumping {:.3}  history peak {peak:.4}",
            s.get(drifting),
            s.get(jumping)
        );
    }
    Ok(())
}
