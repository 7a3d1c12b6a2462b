//! Token grid geometry, per-token containers and the statistics shared by all priors.
//!
//! Every container carries the [`TokenGrid`] it was built for so that binary operations
//! can reject operands from different grids. Flat token indices are row-major:
//! `index = row * cols + col`.

use std::fmt;

use crate::error::{Error, Result};

/// Dense `rows x cols` patch layout over an image of `rows*patch` by `cols*patch` pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TokenGrid {
    rows: usize,
    cols: usize,
    patch_size: usize,
}

impl TokenGrid {
    pub fn new(rows: usize, cols: usize, patch_size: usize) -> Result<Self> {
        if rows == 0 {
            return Err(Error::config("rows", "must be at least 1"));
        }
        if cols == 0 {
            return Err(Error::config("cols", "must be at least 1"));
        }
        if patch_size == 0 {
            return Err(Error::config("patch_size", "must be at least 1"));
        }
        Ok(Self {
            rows,
            cols,
            patch_size,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn patch_size(&self) -> usize {
        self.patch_size
    }

    /// Number of tokens `N`.
    pub fn total(&self) -> usize {
        self.rows * self.cols
    }

    /// Image width in pixels this grid binds to.
    pub fn image_width(&self) -> usize {
        self.cols * self.patch_size
    }

    /// Image height in pixels this grid binds to.
    pub fn image_height(&self) -> usize {
        self.rows * self.patch_size
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize) -> usize {
        debug_assert!(row < self.rows && col < self.cols);
        row * self.cols + col
    }

    #[inline]
    pub fn position(&self, index: usize) -> (usize, usize) {
        debug_assert!(index < self.total());
        (index / self.cols, index % self.cols)
    }

    /// True when two grids have the same token layout (patch size is ignored).
    pub fn same_layout(&self, other: &TokenGrid) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }

    pub(crate) fn check_same(&self, other: &TokenGrid, what: &str) -> Result<()> {
        if self.same_layout(other) {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "{what}: grid {}x{} does not match {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )))
        }
    }
}

impl fmt::Display for TokenGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{} (patch {})", self.rows, self.cols, self.patch_size)
    }
}

/// Per-token real-valued score.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    grid: TokenGrid,
    values: Vec<f64>,
}

impl ScoreVector {
    pub fn new(grid: TokenGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.total() {
            return Err(Error::Shape(format!(
                "score vector has {} values, grid {grid} needs {}",
                values.len(),
                grid.total()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: TokenGrid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.total()],
        }
    }

    pub fn grid(&self) -> TokenGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, index: usize) -> f64 {
        self.values[index]
    }

    /// Lowest index holding the maximum value.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate().skip(1) {
            if v > self.values[best] {
                best = i;
            }
        }
        best
    }

    /// Reshape into a row-major 2D grid.
    pub fn to_grid(&self) -> ScalarGrid {
        ScalarGrid {
            rows: self.grid.rows,
            cols: self.grid.cols,
            data: self.values.clone(),
        }
    }
}

/// Per-token boolean mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    grid: TokenGrid,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(grid: TokenGrid, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != grid.total() {
            return Err(Error::Shape(format!(
                "mask has {} bits, grid {grid} needs {}",
                bits.len(),
                grid.total()
            )));
        }
        Ok(Self { grid, bits })
    }

    pub fn empty(grid: TokenGrid) -> Self {
        Self {
            grid,
            bits: vec![false; grid.total()],
        }
    }

    pub fn from_indices(grid: TokenGrid, indices: &IndexSet) -> Self {
        let mut bits = vec![false; grid.total()];
        for &i in indices.as_slice() {
            bits[i] = true;
        }
        Self { grid, bits }
    }

    pub fn grid(&self) -> TokenGrid {
        self.grid
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, index: usize) -> bool {
        self.bits[index]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn to_index_set(&self) -> IndexSet {
        IndexSet(
            self.bits
                .iter()
                .enumerate()
                .filter_map(|(i, &b)| b.then_some(i))
                .collect(),
        )
    }
}

/// Strictly increasing set of token indices.
#[derive(Debug, Clone, PartialEq, Eq, Default, Hash)]
pub struct IndexSet(Vec<usize>);

impl IndexSet {
    /// Builds a set from arbitrary indices; sorts and removes duplicates.
    pub fn from_unsorted(mut indices: Vec<usize>, grid: &TokenGrid) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        if let Some(&last) = indices.last() {
            if last >= grid.total() {
                return Err(Error::Shape(format!(
                    "index {last} out of range for grid {grid}"
                )));
            }
        }
        Ok(Self(indices))
    }

    pub fn all(grid: &TokenGrid) -> Self {
        Self((0..grid.total()).collect())
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.0.binary_search(&index).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub(crate) fn from_sorted_unchecked(indices: Vec<usize>) -> Self {
        debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));
        Self(indices)
    }
}

/// Row-major 2D grid of reals, used where the motion prior works spatially.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarGrid {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl ScalarGrid {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Shape(format!("grid {rows}x{cols} is empty")));
        }
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "grid {rows}x{cols} needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    /// Value at a possibly out-of-range position, clamped to the nearest edge cell.
    #[inline]
    pub fn get_clamped(&self, row: isize, col: isize) -> f64 {
        let r = row.clamp(0, self.rows as isize - 1) as usize;
        let c = col.clamp(0, self.cols as isize - 1) as usize;
        self.data[r * self.cols + c]
    }

    /// Flatten back into a score vector bound to `grid`.
    pub fn flatten(self, grid: TokenGrid) -> Result<ScoreVector> {
        if grid.rows() != self.rows || grid.cols() != self.cols {
            return Err(Error::Shape(format!(
                "cannot flatten {}x{} grid onto {grid}",
                self.rows, self.cols
            )));
        }
        ScoreVector::new(grid, self.data)
    }

    pub(crate) fn same_shape(&self, other: &ScalarGrid) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }
}

/// Rescale to `[0, 1]`. A vector whose values are all equal maps to all zeros.
pub fn minmax_normalize(v: &ScoreVector) -> Result<ScoreVector> {
    let values = minmax_values(v.values())?;
    Ok(ScoreVector {
        grid: v.grid,
        values,
    })
}

pub(crate) fn minmax_values(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::InvalidInput(
            "cannot normalize an empty vector".into(),
        ));
    }
    if let Some(i) = values.iter().position(|x| !x.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "non-finite value {} at index {i}",
            values[i]
        )));
    }
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });
    if hi == lo {
        return Ok(vec![0.0; values.len()]);
    }
    let range = hi - lo;
    Ok(values.iter().map(|&x| (x - lo) / range).collect())
}

/// Arithmetic mean and population standard deviation.
pub fn mean_std(v: &ScoreVector) -> (f64, f64) {
    mean_std_values(v.values())
}

pub(crate) fn mean_std_values(values: &[f64]) -> (f64, f64) {
    assert!(!values.is_empty(), "mean_std of an empty vector");
    // A constant vector has exactly zero spread; summation would leave rounding residue.
    let first = values[0];
    if values.iter().all(|&x| x == first) {
        return (first, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}
