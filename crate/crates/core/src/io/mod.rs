//! File formats and whole-run loading/saving.

pub mod manifest;
pub mod netpbm;
pub mod tensor;
pub mod trace;

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::geometry::{GrayImage, RgbImage};
use crate::pipeline::PrunerConfig;
use crate::semantic::{FeatureMatrix, TextEmbedding};
use crate::sim::{Episode, StepTruth};
use crate::types::TokenGrid;

pub use manifest::{RunManifest, StepOutputs};
pub use netpbm::{read_image, write_image, Image};
pub use tensor::{read_tensor, write_tensor, Tensor};
pub use trace::{TraceRow, TraceStats};

/// Inputs of a run, fully decoded.
#[derive(Debug, Clone)]
pub struct LoadedRun {
    pub manifest: RunManifest,
    pub images: Vec<RgbImage>,
    pub features: Vec<FeatureMatrix>,
    pub text: TextEmbedding,
    pub truth: Option<Vec<StepTruth>>,
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        create_dir(parent)?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Write frames, feature dumps, text, truth and a manifest under `dir`.
/// Returns the manifest path.
pub fn write_episode(dir: &Path, episode: &Episode, config: &PrunerConfig) -> Result<PathBuf> {
    let manifest = RunManifest::with_defaults(*config, episode.grid, episode.len(), true);
    for (i, img) in episode.images.iter().enumerate() {
        write_file(&dir.join(&manifest.frames[i]), &netpbm::encode_ppm(img))?;
    }
    for (i, f) in episode.features.iter().enumerate() {
        let t = Tensor::from_features(f);
        write_file(&dir.join(&manifest.features[i]), &tensor::encode_tensor(&t))?;
    }
    write_file(
        &dir.join(&manifest.text),
        &tensor::encode_tensor(&Tensor::from_text(&episode.text)),
    )?;
    if let Some(t) = &manifest.truth {
        write_file(
            &dir.join(t),
            manifest::truth_to_text(&episode.truth).as_bytes(),
        )?;
    }
    let path = dir.join("manifest.txt");
    write_file(&path, manifest.to_text().as_bytes())?;
    Ok(path)
}

/// Load a manifest and decode every input it names. Fails before anything is written.
pub fn load_run(manifest_path: &Path) -> Result<LoadedRun> {
    let manifest = RunManifest::load(manifest_path)?;
    manifest.config.validate(Some(manifest.grid.total()))?;
    let grid = manifest.grid;
    let images = manifest
        .frames
        .iter()
        .map(|p| {
            let img = netpbm::read_ppm(p)?;
            img.check_bound(&grid)?;
            Ok(img)
        })
        .collect::<Result<Vec<_>>>()?;
    let features = manifest
        .features
        .iter()
        .map(|p| read_tensor(p)?.to_features(grid))
        .collect::<Result<Vec<_>>>()?;
    let text = read_tensor(&manifest.text)?.to_text()?;
    if let Some(f) = features.first() {
        if features.iter().any(|x| x.dim() != f.dim()) {
            return Err(Error::Shape("feature dimension varies across steps".into()));
        }
        if text.dim() != f.dim() {
            return Err(Error::Shape(format!(
                "text embedding has D={}, features have D={}",
                text.dim(),
                f.dim()
            )));
        }
    }
    let truth = match &manifest.truth {
        Some(p) => {
            let s = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            let t = manifest::parse_truth(&s, &grid)?;
            if t.len() != manifest.steps() {
                return Err(Error::Shape(format!(
                    "truth covers {} steps, manifest has {}",
                    t.len(),
                    manifest.steps()
                )));
            }
            Some(t)
        }
        None => None,
    };
    Ok(LoadedRun {
        manifest,
        images,
        features,
        text,
        truth,
    })
}

/// Darken pruned patches to a quarter of their brightness.
///
/// `mask` has one pixel per token (nonzero = kept); the patch size is inferred from the
/// ratio of frame to mask dimensions, which must be an exact common integer.
pub fn overlay(frame: &RgbImage, mask: &GrayImage) -> Result<RgbImage> {
    let (fw, fh) = (frame.width(), frame.height());
    let (mw, mh) = (mask.width(), mask.height());
    let patch = fw / mw;
    if patch == 0 || fw % mw != 0 || fh % mh != 0 || fh / mh != patch {
        return Err(Error::Shape(format!(
            "frame {fw}x{fh} is not an integer upscale of mask {mw}x{mh}"
        )));
    }
    let grid = TokenGrid::new(mh, mw, patch)?;
    let mut out = frame.clone();
    for y in 0..fh {
        for x in 0..fw {
            let kept = mask.get(x / patch, y / patch) > 127.0;
            if !kept {
                let p = frame.pixel(x, y);
                out.set_pixel(x, y, p.map(|v| (f64::from(v) * 0.25).round() as u8));
            }
        }
    }
    debug_assert!(out.check_bound(&grid).is_ok());
    Ok(out)
}
