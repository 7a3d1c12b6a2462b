//! Kinematic saliency from the second-order temporal difference of token features.
//!
//! Per step: `d = ||X_t - 2 X_{t-1} + X_{t-2}||`, reshaped to the token grid, folded into
//! an exponential history `H_t = (1 - gamma) M_t + gamma H_{t-1}`, closed with a 3x3
//! square, smoothed with a Gaussian and min-max normalized. Until two previous frames
//! exist the prior is identically zero.

use crate::error::{Error, Result};
use crate::semantic::FeatureMatrix;
use crate::types::{minmax_normalize, ScalarGrid, ScoreVector};

/// Rolling per-episode state.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MotionState {
    prev1: Option<FeatureMatrix>,
    prev2: Option<FeatureMatrix>,
    history: Option<ScalarGrid>,
    step: u64,
}

impl MotionState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of frames consumed so far.
    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn history(&self) -> Option<&ScalarGrid> {
        self.history.as_ref()
    }

    pub fn previous(&self) -> Option<&FeatureMatrix> {
        self.prev1.as_ref()
    }

    /// Computes `S_temp` for `xt` and returns it with the successor state; `self` is untouched.
    pub fn advance(
        &self,
        xt: &FeatureMatrix,
        gamma: f64,
        sigma: f64,
    ) -> Result<(ScoreVector, MotionState)> {
        check_gamma(gamma)?;
        check_sigma(sigma)?;
        if let Some(prev) = &self.prev1 {
            if !prev.same_shape(xt) {
                return Err(Error::Shape(format!(
                    "features changed shape mid-episode: {} tokens x D={} after {} x D={}",
                    xt.tokens(),
                    xt.dim(),
                    prev.tokens(),
                    prev.dim()
                )));
            }
        }
        let grid = xt.grid();
        let (scores, history) = match (&self.prev1, &self.prev2) {
            (Some(x1), Some(x2)) => {
                let d = second_order_diff(xt, x1, x2)?;
                let m = d.to_grid();
                let h = accumulate(&m, self.history.as_ref(), gamma)?;
                let closed =
                    morph_erode(&morph_dilate(&h, &StructuringElement), &StructuringElement);
                let smoothed = gaussian_smooth(&closed, sigma)?;
                let s = minmax_normalize(&smoothed.flatten(grid)?)?;
                (s, Some(h))
            }
            _ => (ScoreVector::zeros(grid), self.history.clone()),
        };
        let next = MotionState {
            prev2: self.prev1.clone(),
            prev1: Some(xt.clone()),
            history,
            step: self.step + 1,
        };
        Ok((scores, next))
    }
}

/// The fixed 3x3 all-ones structuring element.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StructuringElement;

impl StructuringElement {
    pub const RADIUS: isize = 1;
}

fn check_gamma(gamma: f64) -> Result<()> {
    if (0.0..1.0).contains(&gamma) {
        Ok(())
    } else {
        Err(Error::config(
            "gamma",
            format!("must lie in [0, 1), got {gamma}"),
        ))
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::config(
            "sigma",
            format!("must be positive, got {sigma}"),
        ))
    }
}

/// Per-token L2 norm of `X_t - 2 X_{t-1} + X_{t-2}` over the feature dimension.
pub fn second_order_diff(
    xt: &FeatureMatrix,
    xt1: &FeatureMatrix,
    xt2: &FeatureMatrix,
) -> Result<ScoreVector> {
    if !xt.same_shape(xt1) || !xt.same_shape(xt2) {
        return Err(Error::Shape(
            "second-order difference needs three frames of identical shape".into(),
        ));
    }
    let values = xt
        .rows()
        .zip(xt1.rows())
        .zip(xt2.rows())
        .map(|((a, b), c)| {
            a.iter()
                .zip(b)
                .zip(c)
                .map(|((&a, &b), &c)| {
                    let v = a - 2.0 * b + c;
                    v * v
                })
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    ScoreVector::new(xt.grid(), values)
}

/// Exponential history update; the new history is stored in `state`.
pub fn history_accumulate(
    mt: &ScalarGrid,
    state: &mut MotionState,
    gamma: f64,
) -> Result<ScalarGrid> {
    check_gamma(gamma)?;
    let h = accumulate(mt, state.history.as_ref(), gamma)?;
    state.history = Some(h.clone());
    Ok(h)
}

fn accumulate(mt: &ScalarGrid, prev: Option<&ScalarGrid>, gamma: f64) -> Result<ScalarGrid> {
    let data = match prev {
        None => mt
            .data()
            .iter()
            .map(|&m| (1.0 - gamma) * m + gamma * 0.0)
            .collect(),
        Some(h) => {
            if !h.same_shape(mt) {
                return Err(Error::Shape(format!(
                    "history {}x{} does not match motion map {}x{}",
                    h.rows(),
                    h.cols(),
                    mt.rows(),
                    mt.cols()
                )));
            }
            mt.data()
                .iter()
                .zip(h.data())
                .map(|(&m, &h)| (1.0 - gamma) * m + gamma * h)
                .collect()
        }
    };
    ScalarGrid::new(mt.rows(), mt.cols(), data)
}

fn neighborhood_fold(m: &ScalarGrid, init: f64, f: fn(f64, f64) -> f64) -> ScalarGrid {
    let r = StructuringElement::RADIUS;
    let mut out = Vec::with_capacity(m.data().len());
    for row in 0..m.rows() as isize {
        for col in 0..m.cols() as isize {
            let mut acc = init;
            for dr in -r..=r {
                for dc in -r..=r {
                    acc = f(acc, m.get_clamped(row + dr, col + dc));
                }
            }
            out.push(acc);
        }
    }
    ScalarGrid::new(m.rows(), m.cols(), out).expect("shape preserved")
}

/// Grayscale dilation: 3x3 neighborhood maximum with replicate padding.
pub fn morph_dilate(m: &ScalarGrid, _se: &StructuringElement) -> ScalarGrid {
    neighborhood_fold(m, f64::NEG_INFINITY, f64::max)
}

/// Grayscale erosion: 3x3 neighborhood minimum with replicate padding.
pub fn morph_erode(m: &ScalarGrid, _se: &StructuringElement) -> ScalarGrid {
    neighborhood_fold(m, f64::INFINITY, f64::min)
}

/// Normalized 2D Gaussian weights, `(2r+1)^2` row-major with `r = ceil(2 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Result<(usize, Vec<f64>)> {
    check_sigma(sigma)?;
    let radius = (2.0 * sigma).ceil() as usize;
    let r = radius as isize;
    let two_s2 = 2.0 * sigma * sigma;
    let mut weights = Vec::with_capacity((2 * radius + 1).pow(2));
    for dy in -r..=r {
        for dx in -r..=r {
            weights.push((-((dx * dx + dy * dy) as f64) / two_s2).exp());
        }
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    Ok((radius, weights))
}

/// Gaussian smoothing with replicate padding.
pub fn gaussian_smooth(m: &ScalarGrid, sigma: f64) -> Result<ScalarGrid> {
    let (radius, weights) = gaussian_kernel(sigma)?;
    let r = radius as isize;
    let width = 2 * radius + 1;
    let mut out = Vec::with_capacity(m.data().len());
    for row in 0..m.rows() as isize {
        for col in 0..m.cols() as isize {
            let mut acc = 0.0;
            for dy in -r..=r {
                let wrow = &weights[(dy + r) as usize * width..];
                for dx in -r..=r {
                    acc += wrow[(dx + r) as usize] * m.get_clamped(row + dy, col + dx);
                }
            }
            out.push(acc);
        }
    }
    ScalarGrid::new(m.rows(), m.cols(), out)
}

/// Computes `S_temp` for `xt` and advances `state`. Leaves `state` unchanged on error.
pub fn motion_prior(
    xt: &FeatureMatrix,
    state: &mut MotionState,
    gamma: f64,
    sigma: f64,
) -> Result<ScoreVector> {
    let (scores, next) = state.advance(xt, gamma, sigma)?;
    *state = next;
    Ok(scores)
}
