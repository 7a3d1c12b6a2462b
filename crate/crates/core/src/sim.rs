//! Deterministic synthetic episodes with known target and mover cells.
//!
//! All randomness comes from [`SimRng`] (xorshift64* seeded through splitmix64), and all
//! feature values are dyadic rationals (multiples of 1/1024) well inside f32 range. Every
//! arithmetic step is therefore exact, so the same [`EpisodeSpec`] yields bit-identical
//! episodes on every platform and survives a round-trip through 32-bit tensor dumps.
//!
//! Scene layout (all scenarios):
//! - background: mid-gray; token features drawn uniformly from `[-1, 1]^D`, then
//!   projected onto the complement of the two prototype directions;
//! - target: 2x2 cells at rows `R-3..=R-2`, cols `C-3..=C-2`, drawn near-white, features
//!   clustered around one prototype;
//! - distractor: 2x2 cells in the top-right corner, drawn brown, features clustered around
//!   a second prototype orthogonal to the first.
//!
//! Scenarios:
//! - `Static`: the same frame every step; features are the base plus uniform noise.
//! - `LinearPan`: the frame scrolls left one pixel per step (wrapping); features follow
//!   `X_s = A + s B` exactly, so their second difference is identically zero.
//! - `Approach`: a dark 2x2 "gripper" starts in the top-left corner and moves one cell per
//!   step (diagonally while both axes have distance left) until it overlaps the target's
//!   top-left cell; afterwards it alternates between that pose and one row lower. Tokens
//!   under the gripper have a fixed offset, orthogonal to the target prototype, added to
//!   their features.

use crate::error::{Error, Result};
use crate::geometry::RgbImage;
use crate::pipeline::PruneResult;
use crate::semantic::{FeatureMatrix, TextEmbedding};
use crate::types::{IndexSet, TokenGrid};

/// xorshift64* generator; output is identical on every platform.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimRng {
    state: u64,
}

impl SimRng {
    pub fn new(seed: u64) -> Self {
        // splitmix64 scramble so nearby seeds diverge; never yields the all-zero state
        let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
        Self {
            state: if z == 0 { 0x9E37_79B9_7F4A_7C15 } else { z },
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.state;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.state = x;
        x.wrapping_mul(0x2545_F491_4F6C_DD1D)
    }

    /// Uniform integer in `[-n, n]`.
    pub fn symmetric_int(&mut self, n: u32) -> i64 {
        let span = 2 * u64::from(n) + 1;
        (self.next_u64() % span) as i64 - i64::from(n)
    }

    /// Uniform multiple of `1/denominator` in `[-1, 1]`.
    pub fn dyadic_unit(&mut self, denominator: u32) -> f64 {
        self.symmetric_int(denominator) as f64 / f64::from(denominator)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    Static,
    LinearPan,
    Approach,
}

impl Scenario {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scenario::Static => "static",
            Scenario::LinearPan => "linearpan",
            Scenario::Approach => "approach",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "static" => Some(Scenario::Static),
            "linearpan" => Some(Scenario::LinearPan),
            "approach" => Some(Scenario::Approach),
            _ => None,
        }
    }
}

/// Which scene region the instruction embedding points at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub enum TextAlignment {
    #[default]
    Target,
    Distractor,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeSpec {
    pub seed: u64,
    pub steps: usize,
    pub grid: TokenGrid,
    pub feat_dim: usize,
    pub scenario: Scenario,
    pub noise_scale: f64,
    pub text: TextAlignment,
}

impl EpisodeSpec {
    pub fn new(
        seed: u64,
        steps: usize,
        grid: TokenGrid,
        feat_dim: usize,
        scenario: Scenario,
    ) -> Self {
        Self {
            seed,
            steps,
            grid,
            feat_dim,
            scenario,
            noise_scale: 0.0,
            text: TextAlignment::Target,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps < 4 {
            return Err(Error::config(
                "steps",
                format!("must be at least 4, got {}", self.steps),
            ));
        }
        if self.feat_dim < 2 {
            return Err(Error::config(
                "dim",
                format!("must be at least 2, got {}", self.feat_dim),
            ));
        }
        if !(self.noise_scale >= 0.0 && self.noise_scale <= 1000.0) {
            return Err(Error::config(
                "noise",
                format!("must lie in [0, 1000], got {}", self.noise_scale),
            ));
        }
        if self.grid.rows() < 4 || self.grid.cols() < 4 {
            return Err(Error::config(
                "grid",
                format!("scenes need at least 4x4 cells, got {}", self.grid),
            ));
        }
        if self.grid.image_width() < 3 || self.grid.image_height() < 3 {
            return Err(Error::config("patch", "image must be at least 3x3 pixels"));
        }
        Ok(())
    }
}

/// Ground truth for one step.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct StepTruth {
    pub target: Vec<usize>,
    pub mover: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub grid: TokenGrid,
    pub images: Vec<RgbImage>,
    pub features: Vec<FeatureMatrix>,
    pub text: TextEmbedding,
    pub truth: Vec<StepTruth>,
}

impl Episode {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }
}

const BACKGROUND: [u8; 3] = [110, 110, 110];
const TARGET: [u8; 3] = [240, 240, 240];
const DISTRACTOR: [u8; 3] = [150, 120, 90];
const GRIPPER: [u8; 3] = [20, 20, 30];

const BASE_DENOM: u32 = 256;
const FINE_DENOM: u32 = 1024;

fn quantize(v: f64, denom: u32) -> f64 {
    (v * f64::from(denom)).round() / f64::from(denom)
}

fn block(grid: &TokenGrid, row: usize, col: usize) -> Vec<usize> {
    let mut cells = Vec::with_capacity(4);
    for r in row..(row + 2).min(grid.rows()) {
        for c in col..(col + 2).min(grid.cols()) {
            cells.push(grid.index(r, c));
        }
    }
    cells
}

pub fn target_cells(grid: &TokenGrid) -> Vec<usize> {
    block(grid, grid.rows() - 3, grid.cols() - 3)
}

pub fn distractor_cells(grid: &TokenGrid) -> Vec<usize> {
    block(grid, 0, grid.cols() - 2)
}

/// Top-left cell of the gripper at `step`.
pub fn gripper_position(grid: &TokenGrid, step: usize) -> (usize, usize) {
    let end = (grid.rows() - 4, grid.cols() - 4);
    let arrival = end.0.max(end.1);
    if step <= arrival {
        (step.min(end.0), step.min(end.1))
    } else if (step - arrival) % 2 == 1 {
        (end.0 + 1, end.1)
    } else {
        end
    }
}

fn paint_cells(img: &mut RgbImage, grid: &TokenGrid, cells: &[usize], rgb: [u8; 3]) {
    let p = grid.patch_size();
    for &i in cells {
        let (r, c) = grid.position(i);
        img.fill_rect(c * p, r * p, (c + 1) * p, (r + 1) * p, rgb);
    }
}

fn scene(grid: &TokenGrid) -> Result<RgbImage> {
    let mut img = RgbImage::filled(grid.image_width(), grid.image_height(), BACKGROUND)?;
    paint_cells(&mut img, grid, &distractor_cells(grid), DISTRACTOR);
    paint_cells(&mut img, grid, &target_cells(grid), TARGET);
    Ok(img)
}

fn scroll_left(img: &RgbImage, shift: usize) -> Result<RgbImage> {
    let (w, h) = (img.width(), img.height());
    let mut out = img.clone();
    for y in 0..h {
        for x in 0..w {
            out.set_pixel(x, y, img.pixel((x + shift) % w, y));
        }
    }
    Ok(out)
}

fn random_vector(rng: &mut SimRng, dim: usize, denom: u32) -> Vec<f64> {
    (0..dim).map(|_| rng.dyadic_unit(denom)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn unit(v: &[f64]) -> Vec<f64> {
    let n = dot(v, v).sqrt();
    v.iter().map(|x| x / n).collect()
}

/// `v` minus its components along the orthonormal `basis`.
fn reject(v: &[f64], basis: &[Vec<f64>]) -> Vec<f64> {
    let mut out = v.to_vec();
    for b in basis {
        let c = dot(&out, b);
        out.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
    }
    out
}

/// Draws until the part of a random vector outside `basis` has norm at least `min_norm`.
fn random_outside(rng: &mut SimRng, dim: usize, basis: &[Vec<f64>], min_norm: f64) -> Vec<f64> {
    loop {
        let v = reject(&random_vector(rng, dim, BASE_DENOM), basis);
        if dot(&v, &v).sqrt() >= min_norm {
            return v;
        }
    }
}

/// Prototype directions and static per-token features `A`.
///
/// The distractor prototype is orthogonal to the target prototype, and background
/// features live in the complement of both, so the target is the unique best match for
/// its own mean feature in any dimension `D >= 2`.
struct Layout {
    base: Vec<Vec<f64>>,
    target_dir: Vec<f64>,
}

fn base_features(rng: &mut SimRng, grid: &TokenGrid, dim: usize) -> Layout {
    let target_proto: Vec<f64> = random_outside(rng, dim, &[], 0.5)
        .iter()
        .map(|&v| quantize(v, BASE_DENOM))
        .collect();
    let target_dir = unit(&target_proto);
    let distractor_proto: Vec<f64> =
        random_outside(rng, dim, std::slice::from_ref(&target_dir), 0.5)
            .iter()
            .map(|&v| quantize(v, BASE_DENOM))
            .collect();
    let basis = [
        target_dir.clone(),
        unit(&reject(
            &distractor_proto,
            std::slice::from_ref(&target_dir),
        )),
    ];
    let targets = target_cells(grid);
    let distractors = distractor_cells(grid);
    let base = (0..grid.total())
        .map(|i| {
            let proto = if targets.contains(&i) {
                Some(&target_proto)
            } else if distractors.contains(&i) {
                Some(&distractor_proto)
            } else {
                None
            };
            match proto {
                Some(p) => p
                    .iter()
                    .map(|&v| quantize(v + 0.1 * rng.dyadic_unit(BASE_DENOM), BASE_DENOM))
                    .collect(),
                None => reject(&random_vector(rng, dim, BASE_DENOM), &basis)
                    .iter()
                    .map(|&v| quantize(v, BASE_DENOM))
                    .collect(),
            }
        })
        .collect();
    Layout { base, target_dir }
}

fn to_matrix(grid: TokenGrid, dim: usize, rows: &[Vec<f64>]) -> Result<FeatureMatrix> {
    FeatureMatrix::new(grid, dim, rows.concat())
}

/// Centered, unit-norm mean feature of `cells`, rounded to f32 precision.
fn region_text(feats: &FeatureMatrix, cells: &[usize]) -> Result<TextEmbedding> {
    let d = feats.dim();
    let n = feats.tokens() as f64;
    let mut col_mean = vec![0.0; d];
    for row in feats.rows() {
        for (m, &v) in col_mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    col_mean.iter_mut().for_each(|m| *m /= n);
    let mut v = vec![0.0; d];
    for &i in cells {
        for (acc, (&x, &m)) in v.iter_mut().zip(feats.row(i).iter().zip(&col_mean)) {
            *acc += x - m;
        }
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    TextEmbedding::new(v.into_iter().map(|x| x as f32 as f64).collect())
}

/// Build an episode. Identical specs give bit-identical episodes.
pub fn generate(spec: &EpisodeSpec) -> Result<Episode> {
    spec.validate()?;
    let grid = spec.grid;
    let dim = spec.feat_dim;
    let mut rng = SimRng::new(spec.seed);
    let Layout { base, target_dir } = base_features(&mut rng, &grid, dim);
    let targets = target_cells(&grid);
    let still = scene(&grid)?;

    // slope for the pan, offset vector for the gripper
    let slope: Vec<Vec<f64>> = (0..grid.total())
        .map(|_| {
            random_vector(&mut rng, dim, FINE_DENOM)
                .iter()
                .map(|v| quantize(v / 16.0, FINE_DENOM))
                .collect()
        })
        .collect();
    // the gripper never looks like the target
    let offset = {
        let dir = unit(&random_outside(&mut rng, dim, &[target_dir], 0.25));
        let magnitude = 10.0 * spec.noise_scale.max(0.1);
        dir.iter()
            .map(|v| quantize(v * magnitude, FINE_DENOM))
            .collect::<Vec<f64>>()
    };

    let mut images = Vec::with_capacity(spec.steps);
    let mut features = Vec::with_capacity(spec.steps);
    let mut truth = Vec::with_capacity(spec.steps);
    for s in 0..spec.steps {
        let mut rows: Vec<Vec<f64>> = match spec.scenario {
            Scenario::LinearPan => base
                .iter()
                .zip(&slope)
                .map(|(a, b)| a.iter().zip(b).map(|(&a, &b)| a + s as f64 * b).collect())
                .collect(),
            Scenario::Static | Scenario::Approach => base.clone(),
        };
        let mut mover = Vec::new();
        let image = match spec.scenario {
            Scenario::Static => still.clone(),
            Scenario::LinearPan => scroll_left(&still, s)?,
            Scenario::Approach => {
                let (r, c) = gripper_position(&grid, s);
                mover = block(&grid, r, c);
                for &i in &mover {
                    for (x, &o) in rows[i].iter_mut().zip(&offset) {
                        *x += o;
                    }
                }
                let mut img = still.clone();
                paint_cells(&mut img, &grid, &mover, GRIPPER);
                img
            }
        };
        if spec.noise_scale > 0.0 {
            for row in rows.iter_mut() {
                for x in row.iter_mut() {
                    *x = quantize(
                        *x + spec.noise_scale * rng.dyadic_unit(FINE_DENOM),
                        FINE_DENOM,
                    );
                }
            }
        }
        mover.sort_unstable();
        images.push(image);
        features.push(to_matrix(grid, dim, &rows)?);
        truth.push(StepTruth {
            target: targets.clone(),
            mover,
        });
    }

    let region = match spec.text {
        TextAlignment::Target => targets,
        TextAlignment::Distractor => distractor_cells(&grid),
    };
    let text = region_text(&features[0], &region)?;
    Ok(Episode {
        grid,
        images,
        features,
        text,
        truth,
    })
}

/// Fraction of `target` cells present in `kept`; an empty target counts as fully recalled.
pub fn target_recall_of(kept: &IndexSet, target: &[usize]) -> f64 {
    if target.is_empty() {
        return 1.0;
    }
    let hit = target.iter().filter(|&&i| kept.contains(i)).count();
    hit as f64 / target.len() as f64
}

pub fn target_recall(result: &PruneResult, truth: &StepTruth) -> f64 {
    target_recall_of(&result.kept, &truth.target)
}
