//! Training-free pruning of visual tokens for vision-language-action policies.
//!
//! Each control step scores every patch token with three priors:
//!
//! * a **geometric** prior from Sobel edge energy of the RGB frame ([`geometry`]),
//! * a **semantic** prior from cross-modal attention between patch features and the
//!   instruction embedding ([`semantic`]),
//! * a **motion** prior from second-order feature differences accumulated over time
//!   ([`motion`]).
//!
//! The overlap between the semantic and motion hot-spots decides whether the step prunes
//! conservatively or aggressively ([`strategy`]); the result is then widened with
//! high-scoring tokens and optionally capped to a budget ([`selection`]). [`Pruner`]
//! wires all of it together and carries the motion history between steps.
//!
//! ```
//! use tokprune::{Pruner, PrunerConfig, TokenGrid, EpisodeSpec, Scenario, sim};
//!
//! let grid = TokenGrid::new(6, 6, 4).unwrap();
//! let episode = sim::generate(&EpisodeSpec::new(7, 5, grid, 8, Scenario::Approach)).unwrap();
//! let mut pruner = Pruner::new(PrunerConfig::default(), grid).unwrap();
//! for (img, feats) in episode.images.iter().zip(&episode.features) {
//!     let out = pruner.step(img, feats, &episode.text).unwrap();
//!     assert!(out.kept.len() <= grid.total());
//! }
//! ```

pub mod cli;
pub mod error;
pub mod geometry;
pub mod io;
pub mod motion;
pub mod pipeline;
pub mod selection;
pub mod semantic;
pub mod sim;
pub mod strategy;
pub mod types;

pub use error::{Error, Result};
pub use geometry::{GrayImage, RgbImage};
pub use motion::MotionState;
pub use pipeline::{PruneResult, Pruner, PrunerConfig};
pub use selection::{BudgetPolicy, SelectionConfig};
pub use semantic::{FeatureMatrix, TextEmbedding};
pub use sim::{Episode, EpisodeSpec, Scenario, TextAlignment};
pub use strategy::{Mode, ModeDecision, StrategyConfig};
pub use types::{BinaryMask, IndexSet, ScalarGrid, ScoreVector, TokenGrid};
