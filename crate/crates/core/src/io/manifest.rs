//! Run manifests: line-oriented `key = value` text grouped under `[section]` headers.
//!
//! ```text
//! [config]
//! tau = 0.01
//! pool_window = 3
//! gamma = 0.7
//! sigma = 1
//! k = 0.5
//! k_bg = -0.5
//! theta_iou = 0.05
//! radius_r = 3
//! w_edge = 1
//! theta_geo = 1.5
//! budget_policy = off
//! # budget = 32
//!
//! [grid]
//! rows = 8
//! cols = 8
//! patch = 8
//!
//! [episode]
//! steps = 2
//! text = text.iapt
//! truth = truth.txt
//! frame.0 = frames/frame_000.ppm
//! features.0 = features/feat_000.iapt
//! frame.1 = frames/frame_001.ppm
//! features.1 = features/feat_001.iapt
//!
//! [outputs]
//! trace = trace.csv
//! kept.0 = kept/kept_000.txt
//! mask.0 = masks/mask_000.pgm
//! ```
//!
//! Input paths are relative to the manifest's directory, output paths to the run's output
//! directory. Missing `[config]` keys take their defaults and missing outputs take the names
//! shown above. Unknown sections or keys and duplicates are format errors.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::pipeline::PrunerConfig;
use crate::selection::BudgetPolicy;
use crate::sim::StepTruth;
use crate::types::TokenGrid;

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutputs {
    pub kept: PathBuf,
    pub mask: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub config: PrunerConfig,
    pub grid: TokenGrid,
    pub text: PathBuf,
    pub truth: Option<PathBuf>,
    pub frames: Vec<PathBuf>,
    pub features: Vec<PathBuf>,
    pub trace: PathBuf,
    pub outputs: Vec<StepOutputs>,
}

pub fn default_frame_name(step: usize) -> String {
    format!("frames/frame_{step:03}.ppm")
}

pub fn default_feature_name(step: usize) -> String {
    format!("features/feat_{step:03}.iapt")
}

pub fn default_outputs(step: usize) -> StepOutputs {
    StepOutputs {
        kept: PathBuf::from(format!("kept/kept_{step:03}.txt")),
        mask: PathBuf::from(format!("masks/mask_{step:03}.pgm")),
    }
}

impl RunManifest {
    /// Manifest with default file names for `steps` steps.
    pub fn with_defaults(config: PrunerConfig, grid: TokenGrid, steps: usize, truth: bool) -> Self {
        Self {
            config,
            grid,
            text: PathBuf::from("text.iapt"),
            truth: truth.then(|| PathBuf::from("truth.txt")),
            frames: (0..steps).map(|s| default_frame_name(s).into()).collect(),
            features: (0..steps).map(|s| default_feature_name(s).into()).collect(),
            trace: PathBuf::from("trace.csv"),
            outputs: (0..steps).map(default_outputs).collect(),
        }
    }

    pub fn steps(&self) -> usize {
        self.frames.len()
    }

    pub fn to_text(&self) -> String {
        let c = &self.config;
        let mut s = String::new();
        let _ = writeln!(s, "[config]");
        let _ = writeln!(s, "tau = {}", c.tau);
        let _ = writeln!(s, "pool_window = {}", c.pool_window);
        let _ = writeln!(s, "gamma = {}", c.gamma);
        let _ = writeln!(s, "sigma = {}", c.sigma);
        let _ = writeln!(s, "k = {}", c.strategy.k);
        let _ = writeln!(s, "k_bg = {}", c.strategy.k_bg);
        let _ = writeln!(s, "theta_iou = {}", c.strategy.theta_iou);
        let _ = writeln!(s, "radius_r = {}", c.strategy.radius_r);
        let _ = writeln!(s, "w_edge = {}", c.selection.w_edge);
        let _ = writeln!(s, "theta_geo = {}", c.selection.theta_geo);
        let _ = writeln!(s, "budget_policy = {}", c.selection.budget_policy.as_str());
        if let Some(b) = c.selection.budget {
            let _ = writeln!(s, "budget = {b}");
        }
        let _ = writeln!(s, "\n[grid]");
        let _ = writeln!(s, "rows = {}", self.grid.rows());
        let _ = writeln!(s, "cols = {}", self.grid.cols());
        let _ = writeln!(s, "patch = {}", self.grid.patch_size());
        let _ = writeln!(s, "\n[episode]");
        let _ = writeln!(s, "steps = {}", self.steps());
        let _ = writeln!(s, "text = {}", self.text.display());
        if let Some(t) = &self.truth {
            let _ = writeln!(s, "truth = {}", t.display());
        }
        for (i, (f, x)) in self.frames.iter().zip(&self.features).enumerate() {
            let _ = writeln!(s, "frame.{i} = {}", f.display());
            let _ = writeln!(s, "features.{i} = {}", x.display());
        }
        let _ = writeln!(s, "\n[outputs]");
        let _ = writeln!(s, "trace = {}", self.trace.display());
        for (i, o) in self.outputs.iter().enumerate() {
            let _ = writeln!(s, "kept.{i} = {}", o.kept.display());
            let _ = writeln!(s, "mask.{i} = {}", o.mask.display());
        }
        s
    }

    /// Parse manifest text. Relative paths are returned unresolved.
    pub fn parse(text: &str) -> Result<Self> {
        let entries = parse_entries(text)?;
        let get = |section: &str, key: &str| entries.get(&(section.to_string(), key.to_string()));

        let mut config = PrunerConfig::default();
        for ((section, key), (offset, value)) in &entries {
            let at = *offset;
            match section.as_str() {
                "config" => match key.as_str() {
                    "tau" => config.tau = parse_num(value, at)?,
                    "pool_window" => config.pool_window = parse_num(value, at)?,
                    "gamma" => config.gamma = parse_num(value, at)?,
                    "sigma" => config.sigma = parse_num(value, at)?,
                    "k" => config.strategy.k = parse_num(value, at)?,
                    "k_bg" => config.strategy.k_bg = parse_num(value, at)?,
                    "theta_iou" => config.strategy.theta_iou = parse_num(value, at)?,
                    "radius_r" => config.strategy.radius_r = parse_num(value, at)?,
                    "w_edge" => config.selection.w_edge = parse_num(value, at)?,
                    "theta_geo" => config.selection.theta_geo = parse_num(value, at)?,
                    "budget" => config.selection.budget = Some(parse_num(value, at)?),
                    "budget_policy" => {
                        config.selection.budget_policy =
                            BudgetPolicy::parse(value).ok_or_else(|| {
                                Error::format(at, format!("unknown budget_policy `{value}`"))
                            })?
                    }
                    _ => return Err(unknown(section, key, at)),
                },
                "grid" => {
                    if !matches!(key.as_str(), "rows" | "cols" | "patch") {
                        return Err(unknown(section, key, at));
                    }
                }
                "episode" => {
                    if !matches!(key.as_str(), "steps" | "text" | "truth")
                        && indexed(key, "frame").is_none()
                        && indexed(key, "features").is_none()
                    {
                        return Err(unknown(section, key, at));
                    }
                }
                "outputs" => {
                    if key != "trace"
                        && indexed(key, "kept").is_none()
                        && indexed(key, "mask").is_none()
                    {
                        return Err(unknown(section, key, at));
                    }
                }
                _ => return Err(unknown(section, key, at)),
            }
        }

        let required = |section: &str, key: &str| {
            get(section, key).ok_or_else(|| {
                Error::format(text.len() as u64, format!("missing `{key}` in [{section}]"))
            })
        };
        let num = |section: &str, key: &str| -> Result<usize> {
            let (at, v) = required(section, key)?;
            parse_num(v, *at)
        };
        let grid = TokenGrid::new(
            num("grid", "rows")?,
            num("grid", "cols")?,
            num("grid", "patch")?,
        )?;
        let steps = num("episode", "steps")?;
        let text_path = PathBuf::from(&required("episode", "text")?.1);
        let truth = get("episode", "truth").map(|(_, v)| PathBuf::from(v));

        let mut frames = Vec::with_capacity(steps);
        let mut features = Vec::with_capacity(steps);
        let mut outputs = Vec::with_capacity(steps);
        for i in 0..steps {
            frames.push(PathBuf::from(
                &required("episode", &format!("frame.{i}"))?.1,
            ));
            features.push(PathBuf::from(
                &required("episode", &format!("features.{i}"))?.1,
            ));
            let d = default_outputs(i);
            outputs.push(StepOutputs {
                kept: get("outputs", &format!("kept.{i}")).map_or(d.kept, |(_, v)| v.into()),
                mask: get("outputs", &format!("mask.{i}")).map_or(d.mask, |(_, v)| v.into()),
            });
        }
        for ((section, key), (at, _)) in &entries {
            let idx = match section.as_str() {
                "episode" => indexed(key, "frame").or_else(|| indexed(key, "features")),
                "outputs" => indexed(key, "kept").or_else(|| indexed(key, "mask")),
                _ => None,
            };
            if matches!(idx, Some(i) if i >= steps) {
                return Err(Error::format(
                    *at,
                    format!("`{key}` beyond steps = {steps}"),
                ));
            }
        }
        let trace =
            get("outputs", "trace").map_or_else(|| PathBuf::from("trace.csv"), |(_, v)| v.into());

        Ok(Self {
            config,
            grid,
            text: text_path,
            truth,
            frames,
            features,
            trace,
            outputs,
        })
    }

    /// Read and parse a manifest, resolve inputs against its directory, check they exist.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| *p = base.join(&*p);
        resolve(&mut m.text);
        if let Some(t) = m.truth.as_mut() {
            resolve(t);
        }
        m.frames.iter_mut().for_each(resolve);
        m.features.iter_mut().for_each(resolve);
        let inputs = std::iter::once(&m.text)
            .chain(m.truth.iter())
            .chain(m.frames.iter())
            .chain(m.features.iter());
        for p in inputs {
            if !p.is_file() {
                return Err(Error::io(
                    p,
                    std::io::Error::new(std::io::ErrorKind::NotFound, "referenced file not found"),
                ));
            }
        }
        Ok(m)
    }
}

type Entries = BTreeMap<(String, String), (u64, String)>;

fn parse_entries(text: &str) -> Result<Entries> {
    let mut entries = Entries::new();
    let mut section: Option<String> = None;
    let mut offset = 0u64;
    for raw in text.split_inclusive('\n') {
        let at = offset;
        offset += raw.len() as u64;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| Error::format(at, "unterminated section header"))?
                .trim();
            if !matches!(name, "config" | "grid" | "episode" | "outputs") {
                return Err(Error::format(at, format!("unknown section [{name}]")));
            }
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::format(at, format!("expected `key = value`, got `{line}`")))?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(Error::format(at, "empty key"));
        }
        let section = section
            .clone()
            .ok_or_else(|| Error::format(at, format!("`{key}` outside any section")))?;
        if entries
            .insert((section.clone(), key.to_string()), (at, value.to_string()))
            .is_some()
        {
            return Err(Error::format(
                at,
                format!("duplicate key `{key}` in [{section}]"),
            ));
        }
    }
    Ok(entries)
}

fn indexed(key: &str, prefix: &str) -> Option<usize> {
    key.strip_prefix(prefix)?.strip_prefix('.')?.parse().ok()
}

fn unknown(section: &str, key: &str, at: u64) -> Error {
    Error::format(at, format!("unknown key `{key}` in [{section}]"))
}

fn parse_num<T: std::str::FromStr>(value: &str, at: u64) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::format(at, format!("cannot parse `{value}` as a number")))
}

/// Truth file: one line per step, `step<TAB>target indices<TAB>mover indices`,
/// indices separated by single spaces. Lines starting with `#` are comments.
pub fn truth_to_text(truth: &[StepTruth]) -> String {
    let join = |v: &[usize]| {
        v.iter()
            .map(|i| i.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    };
    let mut s = String::from("# step\ttarget\tmover\n");
    for (i, t) in truth.iter().enumerate() {
        let _ = writeln!(s, "{i}\t{}\t{}", join(&t.target), join(&t.mover));
    }
    s
}

pub fn parse_truth(text: &str, grid: &TokenGrid) -> Result<Vec<StepTruth>> {
    let mut out = Vec::new();
    let mut offset = 0u64;
    for raw in text.split_inclusive('\n') {
        let at = offset;
        offset += raw.len() as u64;
        let line = raw.trim_end_matches(['\n', '\r']);
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::format(at, "truth line needs 3 tab-separated fields"));
        }
        let step: usize = parse_num(fields[0].trim(), at)?;
        if step != out.len() {
            return Err(Error::format(
                at,
                format!("expected step {}, got {step}", out.len()),
            ));
        }
        let cells = |f: &str| -> Result<Vec<usize>> {
            let v = f
                .split_whitespace()
                .map(|s| parse_num::<usize>(s, at))
                .collect::<Result<Vec<_>>>()?;
            if let Some(&bad) = v.iter().find(|&&i| i >= grid.total()) {
                return Err(Error::Shape(format!(
                    "truth index {bad} outside grid {grid}"
                )));
            }
            Ok(v)
        };
        out.push(StepTruth {
            target: cells(fields[1])?,
            mover: cells(fields[2])?,
        });
    }
    Ok(out)
}
