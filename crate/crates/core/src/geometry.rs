//! Edge-strength prior computed from the raw observation image.
//!
//! Pipeline: BT.601 luma, 3x3 Sobel correlation with clamp-to-edge borders,
//! per-pixel gradient magnitude, mean over each token's `P x P` pixel block,
//! then min-max normalization.

use crate::error::{Error, Result};
use crate::types::{minmax_normalize, ScoreVector, TokenGrid};

/// 8-bit interleaved RGB image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidInput(format!(
                "image dimensions {width}x{height} must be positive"
            )));
        }
        if data.len() != width * height * 3 {
            return Err(Error::Shape(format!(
                "rgb image {width}x{height} needs {} bytes, got {}",
                width * height * 3,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self> {
        let data = rgb
            .iter()
            .copied()
            .cycle()
            .take(width * height * 3)
            .collect();
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Interleaved `R,G,B` bytes, row-major.
    pub fn as_bytes(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let o = (y * self.width + x) * 3;
        [self.data[o], self.data[o + 1], self.data[o + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let o = (y * self.width + x) * 3;
        self.data[o..o + 3].copy_from_slice(&rgb);
    }

    /// Fill the axis-aligned rectangle `[x0, x1) x [y0, y1)`, clipped to the image.
    pub fn fill_rect(&mut self, x0: usize, y0: usize, x1: usize, y1: usize, rgb: [u8; 3]) {
        for y in y0..y1.min(self.height) {
            for x in x0..x1.min(self.width) {
                self.set_pixel(x, y, rgb);
            }
        }
    }

    /// Checks the image covers `grid` exactly.
    pub fn check_bound(&self, grid: &TokenGrid) -> Result<()> {
        check_dims(self.width, self.height, grid)
    }
}

/// Real-valued single-channel image, values nominally in `[0, 255]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidInput(format!(
                "image dimensions {width}x{height} must be positive"
            )));
        }
        if values.len() != width * height {
            return Err(Error::Shape(format!(
                "gray image {width}x{height} needs {} values, got {}",
                width * height,
                values.len()
            )));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn transpose(&self) -> GrayImage {
        let mut values = Vec::with_capacity(self.values.len());
        for x in 0..self.width {
            for y in 0..self.height {
                values.push(self.get(x, y));
            }
        }
        GrayImage {
            width: self.height,
            height: self.width,
            values,
        }
    }
}

/// Horizontal and vertical Sobel responses.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientPair {
    pub gx: GrayImage,
    pub gy: GrayImage,
}

fn check_dims(width: usize, height: usize, grid: &TokenGrid) -> Result<()> {
    if width != grid.image_width() || height != grid.image_height() {
        return Err(Error::Shape(format!(
            "image {width}x{height} does not match grid {grid} ({}x{} pixels)",
            grid.image_width(),
            grid.image_height()
        )));
    }
    Ok(())
}

pub fn to_grayscale(img: &RgbImage) -> GrayImage {
    let values = img
        .data
        .chunks_exact(3)
        .map(|p| {
            let y = 0.299 * f64::from(p[0]) + 0.587 * f64::from(p[1]) + 0.114 * f64::from(p[2]);
            y.clamp(0.0, 255.0)
        })
        .collect();
    GrayImage {
        width: img.width,
        height: img.height,
        values,
    }
}

/// 3x3 Sobel correlation with replicate padding; output has the input's size.
///
/// Evaluated in separable form, `gx = col(x+1) - col(x-1)` with `col = top + 2 mid + bottom`
/// (and transposed for `gy`), so flat regions give exactly zero.
pub fn sobel_gradients(img: &GrayImage) -> Result<GradientPair> {
    let (w, h) = (img.width, img.height);
    if w < 3 || h < 3 {
        return Err(Error::InvalidInput(format!(
            "sobel needs at least 3x3 pixels, got {w}x{h}"
        )));
    }
    let at = |x: usize, y: usize| img.values[y * w + x];
    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    for y in 0..h {
        let (up, down) = (y.saturating_sub(1), (y + 1).min(h - 1));
        for x in 0..w {
            let (left, right) = (x.saturating_sub(1), (x + 1).min(w - 1));
            let col = |c: usize| (at(c, up) + at(c, down)) + 2.0 * at(c, y);
            let row = |r: usize| (at(left, r) + at(right, r)) + 2.0 * at(x, r);
            gx[y * w + x] = col(right) - col(left);
            gy[y * w + x] = row(down) - row(up);
        }
    }
    Ok(GradientPair {
        gx: GrayImage {
            width: w,
            height: h,
            values: gx,
        },
        gy: GrayImage {
            width: w,
            height: h,
            values: gy,
        },
    })
}

pub fn edge_magnitude(g: &GradientPair) -> Result<GrayImage> {
    if g.gx.width != g.gy.width || g.gx.height != g.gy.height {
        return Err(Error::Shape(format!(
            "gradient images differ: {}x{} vs {}x{}",
            g.gx.width, g.gx.height, g.gy.width, g.gy.height
        )));
    }
    let values =
        g.gx.values
            .iter()
            .zip(&g.gy.values)
            .map(|(&a, &b)| (a * a + b * b).sqrt())
            .collect();
    Ok(GrayImage {
        width: g.gx.width,
        height: g.gx.height,
        values,
    })
}

/// Mean edge magnitude inside each token's pixel block.
///
/// Pixels are summed in ascending order, so two blocks holding the same values in any
/// arrangement get bit-identical means.
pub fn aggregate_patches(edges: &GrayImage, grid: &TokenGrid) -> Result<ScoreVector> {
    check_dims(edges.width, edges.height, grid)?;
    let p = grid.patch_size();
    let area = (p * p) as f64;
    let mut out = Vec::with_capacity(grid.total());
    let mut patch = Vec::with_capacity(p * p);
    for r in 0..grid.rows() {
        for c in 0..grid.cols() {
            patch.clear();
            for y in r * p..(r + 1) * p {
                let row = &edges.values[y * edges.width..(y + 1) * edges.width];
                patch.extend_from_slice(&row[c * p..(c + 1) * p]);
            }
            patch.sort_unstable_by(f64::total_cmp);
            out.push(patch.iter().sum::<f64>() / area);
        }
    }
    ScoreVector::new(*grid, out)
}

/// Normalized per-token edge prior `E`.
pub fn geometric_prior(img: &RgbImage, grid: &TokenGrid) -> Result<ScoreVector> {
    img.check_bound(grid)?;
    let gray = to_grayscale(img);
    let grads = sobel_gradients(&gray)?;
    let edges = edge_magnitude(&grads)?;
    let raw = aggregate_patches(&edges, grid)?;
    minmax_normalize(&raw)
}
