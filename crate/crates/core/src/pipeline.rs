//! Per-episode pruner: one [`Pruner::step`] per observation.

use crate::error::{Error, Result};
use crate::geometry::{geometric_prior, RgbImage};
use crate::motion::MotionState;
use crate::selection::{gather_final, priority_score, retention_ratio, SelectionConfig};
use crate::semantic::{semantic_prior, FeatureMatrix, TextEmbedding};
use crate::strategy::{retention_set, ModeDecision, StrategyConfig};
use crate::types::{IndexSet, ScoreVector, TokenGrid};

/// All pruning hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrunerConfig {
    /// Softmax temperature of the semantic prior.
    pub tau: f64,
    /// Odd side length of the semantic pooling window.
    pub pool_window: usize,
    /// History decay of the motion prior, in `[0, 1)`.
    pub gamma: f64,
    /// Standard deviation of the motion smoothing kernel, in grid cells.
    pub sigma: f64,
    pub strategy: StrategyConfig,
    pub selection: SelectionConfig,
}

impl Default for PrunerConfig {
    fn default() -> Self {
        Self {
            tau: 0.01,
            pool_window: 3,
            gamma: 0.7,
            sigma: 1.0,
            strategy: StrategyConfig::default(),
            selection: SelectionConfig::default(),
        }
    }
}

impl PrunerConfig {
    /// Validates every field; `tokens` bounds the optional budget.
    pub fn validate(&self, tokens: Option<usize>) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::config(
                "tau",
                format!("must be positive, got {}", self.tau),
            ));
        }
        if self.pool_window == 0 || self.pool_window.is_multiple_of(2) {
            return Err(Error::config(
                "pool_window",
                format!("must be a positive odd integer, got {}", self.pool_window),
            ));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::config(
                "gamma",
                format!("must lie in [0, 1), got {}", self.gamma),
            ));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::config(
                "sigma",
                format!("must be positive, got {}", self.sigma),
            ));
        }
        self.strategy.validate()?;
        self.selection.validate(tokens)
    }
}

/// Output of one pruning step.
#[derive(Debug, Clone, PartialEq)]
pub struct PruneResult {
    /// Retained token indices, ascending.
    pub kept: IndexSet,
    pub mode: ModeDecision,
    pub s_sem: ScoreVector,
    pub s_temp: ScoreVector,
    pub e: ScoreVector,
    pub score: ScoreVector,
    pub retention: f64,
    /// Zero-based step index within the episode.
    pub step: u64,
}

/// Stateful pruner for one camera stream. Not shareable across threads while stepping.
#[derive(Debug, Clone)]
pub struct Pruner {
    cfg: PrunerConfig,
    grid: TokenGrid,
    motion: MotionState,
}

impl Pruner {
    pub fn new(cfg: PrunerConfig, grid: TokenGrid) -> Result<Self> {
        cfg.validate(Some(grid.total()))?;
        Ok(Self {
            cfg,
            grid,
            motion: MotionState::new(),
        })
    }

    pub fn config(&self) -> &PrunerConfig {
        &self.cfg
    }

    pub fn grid(&self) -> TokenGrid {
        self.grid
    }

    /// Steps consumed since construction or the last reset.
    pub fn steps_taken(&self) -> u64 {
        self.motion.step()
    }

    pub fn motion_state(&self) -> &MotionState {
        &self.motion
    }

    /// Runs both stages on one observation. On error the pruner is unchanged.
    pub fn step(
        &mut self,
        img: &RgbImage,
        feats: &FeatureMatrix,
        text: &TextEmbedding,
    ) -> Result<PruneResult> {
        self.check_inputs(img, feats, text)?;
        let cfg = &self.cfg;

        let e = geometric_prior(img, &self.grid)?;
        let s_sem = semantic_prior(feats, text, cfg.tau, cfg.pool_window)?;
        let (s_temp, next_motion) = self.motion.advance(feats, cfg.gamma, cfg.sigma)?;
        let (base, mode) = retention_set(&s_sem, &s_temp, &cfg.strategy)?;
        let score = priority_score(&s_sem, &s_temp, &e, cfg.selection.w_edge)?;
        let kept = gather_final(&base, &score, &cfg.selection)?;
        let retention = retention_ratio(&kept, &self.grid);

        let step = self.motion.step();
        self.motion = next_motion;
        Ok(PruneResult {
            kept,
            mode,
            s_sem,
            s_temp,
            e,
            score,
            retention,
            step,
        })
    }

    /// Forget all episode history.
    pub fn reset(&mut self) {
        self.motion = MotionState::new();
    }

    fn check_inputs(
        &self,
        img: &RgbImage,
        feats: &FeatureMatrix,
        text: &TextEmbedding,
    ) -> Result<()> {
        img.check_bound(&self.grid)?;
        self.grid.check_same(&feats.grid(), "features")?;
        if text.dim() != feats.dim() {
            return Err(Error::Shape(format!(
                "text embedding has D={}, features have D={}",
                text.dim(),
                feats.dim()
            )));
        }
        Ok(())
    }
}
