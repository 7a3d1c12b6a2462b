//! IoU-gated choice between conservative and aggressive base retention.
//!
//! Both priors are binarized at `mean + k * std`. When the overlap of the two masks is at
//! most `theta_iou` only tokens weak in both priors are dropped; above it the semantic mask
//! is contracted to a disc around its peak and unioned with the motion mask.

use std::fmt;

use crate::error::{Error, Result};
use crate::types::{mean_std, BinaryMask, IndexSet, ScoreVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrategyConfig {
    /// Binarization sensitivity for both priors.
    pub k: f64,
    /// Background exclusion coefficient, strictly negative.
    pub k_bg: f64,
    /// Mode threshold on the semantic/motion IoU.
    pub theta_iou: f64,
    /// Core-region radius in grid cells.
    pub radius_r: f64,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        Self {
            k: 0.5,
            k_bg: -0.5,
            theta_iou: 0.05,
            radius_r: 3.0,
        }
    }
}

impl StrategyConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.k.is_finite() {
            return Err(Error::config("k", "must be finite"));
        }
        check_k_bg(self.k_bg)?;
        if !(0.0..=1.0).contains(&self.theta_iou) {
            return Err(Error::config(
                "theta_iou",
                format!("must lie in [0, 1], got {}", self.theta_iou),
            ));
        }
        if !(self.radius_r > 0.0 && self.radius_r.is_finite()) {
            return Err(Error::config(
                "radius_r",
                format!("must be positive, got {}", self.radius_r),
            ));
        }
        Ok(())
    }
}

fn check_k_bg(k_bg: f64) -> Result<()> {
    if k_bg < 0.0 && k_bg.is_finite() {
        Ok(())
    } else {
        Err(Error::config(
            "k_bg",
            format!("must be negative, got {k_bg}"),
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Conservative,
    Aggressive,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Conservative => "conservative",
            Mode::Aggressive => "aggressive",
        }
    }

    pub fn parse(s: &str) -> Option<Mode> {
        match s {
            "conservative" => Some(Mode::Conservative),
            "aggressive" => Some(Mode::Aggressive),
            _ => None,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeDecision {
    pub mode: Mode,
    pub iou: f64,
}

impl ModeDecision {
    /// Aggressive exactly when `iou > theta_iou`.
    pub fn gate(iou: f64, theta_iou: f64) -> Self {
        let mode = if iou > theta_iou {
            Mode::Aggressive
        } else {
            Mode::Conservative
        };
        Self { mode, iou }
    }
}

/// `scores_i > mean + coeff * std`, population statistics.
pub fn binarize_adaptive(scores: &ScoreVector, coeff: f64) -> BinaryMask {
    let (mu, sd) = mean_std(scores);
    let threshold = mu + coeff * sd;
    let bits = scores.values().iter().map(|&s| s > threshold).collect();
    BinaryMask::new(scores.grid(), bits).expect("length preserved")
}

/// Intersection over union; two empty masks give 0.
pub fn mask_iou(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    a.grid().check_same(&b.grid(), "mask_iou")?;
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in a.bits().iter().zip(b.bits()) {
        inter += usize::from(x && y);
        union += usize::from(x || y);
    }
    if union == 0 {
        return Ok(0.0);
    }
    Ok(inter as f64 / union as f64)
}

/// Keep every token that is not weak in both priors.
pub fn conservative_retention(
    s_sem: &ScoreVector,
    s_temp: &ScoreVector,
    k_bg: f64,
) -> Result<IndexSet> {
    check_k_bg(k_bg)?;
    s_sem
        .grid()
        .check_same(&s_temp.grid(), "conservative_retention")?;
    let (mu_s, sd_s) = mean_std(s_sem);
    let (mu_t, sd_t) = mean_std(s_temp);
    let low_s = mu_s + k_bg * sd_s;
    let low_t = mu_t + k_bg * sd_t;
    let kept = s_sem
        .values()
        .iter()
        .zip(s_temp.values())
        .enumerate()
        .filter_map(|(i, (&s, &t))| {
            let background = s < low_s && t < low_t;
            (!background).then_some(i)
        })
        .collect();
    Ok(IndexSet::from_sorted_unchecked(kept))
}

/// Restrict `b_sem` to cells within Euclidean grid distance `radius_r` of the semantic peak.
pub fn core_semantic_mask(s_sem: &ScoreVector, b_sem: &BinaryMask, radius_r: f64) -> BinaryMask {
    let grid = s_sem.grid();
    let (cr, cc) = grid.position(s_sem.argmax());
    let r2 = radius_r * radius_r;
    let bits = b_sem
        .bits()
        .iter()
        .enumerate()
        .map(|(i, &b)| {
            let (r, c) = grid.position(i);
            let dr = r as f64 - cr as f64;
            let dc = c as f64 - cc as f64;
            b && dr * dr + dc * dc <= r2
        })
        .collect();
    BinaryMask::new(grid, bits).expect("length preserved")
}

/// Base retention set `K_t` and the mode that produced it.
pub fn retention_set(
    s_sem: &ScoreVector,
    s_temp: &ScoreVector,
    cfg: &StrategyConfig,
) -> Result<(IndexSet, ModeDecision)> {
    cfg.validate()?;
    s_sem.grid().check_same(&s_temp.grid(), "retention_set")?;
    let b_sem = binarize_adaptive(s_sem, cfg.k);
    let b_temp = binarize_adaptive(s_temp, cfg.k);
    let decision = ModeDecision::gate(mask_iou(&b_sem, &b_temp)?, cfg.theta_iou);
    let kept = match decision.mode {
        Mode::Conservative => conservative_retention(s_sem, s_temp, cfg.k_bg)?,
        Mode::Aggressive => {
            let core = core_semantic_mask(s_sem, &b_sem, cfg.radius_r);
            let kept = core
                .bits()
                .iter()
                .zip(b_temp.bits())
                .enumerate()
                .filter_map(|(i, (&a, &b))| (a || b).then_some(i))
                .collect();
            IndexSet::from_sorted_unchecked(kept)
        }
    };
    Ok((kept, decision))
}
