//! Per-step trace CSV and its summary statistics.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::strategy::Mode;

pub const HEADER: &str = "step,iou,mode,retention,target_recall";

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub step: u64,
    pub iou: f64,
    pub mode: Mode,
    pub retention: f64,
    /// `None` when no ground truth was available; written as `-1`.
    pub target_recall: Option<f64>,
}

pub fn trace_to_csv(rows: &[TraceRow]) -> String {
    let mut s = String::from(HEADER);
    s.push('\n');
    for r in rows {
        let recall = r.target_recall.unwrap_or(-1.0);
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.step, r.iou, r.mode, r.retention, recall
        );
    }
    s
}

pub fn parse_trace(text: &str) -> Result<Vec<TraceRow>> {
    let mut lines = text.split_inclusive('\n');
    let header = lines.next().unwrap_or("");
    if header.trim_end() != HEADER {
        return Err(Error::format(0, format!("trace header must be `{HEADER}`")));
    }
    let mut offset = header.len() as u64;
    let mut rows = Vec::new();
    for raw in lines {
        let at = offset;
        offset += raw.len() as u64;
        let line = raw.trim_end();
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(Error::format(at, "trace row needs 5 fields"));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::format(at, format!("bad number `{s}`")))
        };
        let step: u64 = f[0]
            .parse()
            .map_err(|_| Error::format(at, format!("bad step `{}`", f[0])))?;
        if step != rows.len() as u64 {
            return Err(Error::format(
                at,
                format!("steps must run 0,1,2,... without gaps; got {step}"),
            ));
        }
        let mode =
            Mode::parse(f[2]).ok_or_else(|| Error::format(at, format!("bad mode `{}`", f[2])))?;
        let recall = num(f[4])?;
        rows.push(TraceRow {
            step,
            iou: num(f[1])?,
            mode,
            retention: num(f[3])?,
            target_recall: (recall >= 0.0).then_some(recall),
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceStats {
    /// First step in aggressive mode.
    pub transition_step: Option<u64>,
    pub mean_retention_conservative: Option<f64>,
    pub mean_retention_aggressive: Option<f64>,
    pub iou_min: f64,
    pub iou_mean: f64,
    pub iou_max: f64,
    pub steps: usize,
}

fn mean(v: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

pub fn trace_stats(rows: &[TraceRow]) -> Result<TraceStats> {
    if rows.is_empty() {
        return Err(Error::InvalidInput("trace has no rows".into()));
    }
    let by_mode = |m: Mode| mean(rows.iter().filter(|r| r.mode == m).map(|r| r.retention));
    Ok(TraceStats {
        transition_step: rows
            .iter()
            .find(|r| r.mode == Mode::Aggressive)
            .map(|r| r.step),
        mean_retention_conservative: by_mode(Mode::Conservative),
        mean_retention_aggressive: by_mode(Mode::Aggressive),
        iou_min: rows.iter().map(|r| r.iou).fold(f64::INFINITY, f64::min),
        iou_mean: mean(rows.iter().map(|r| r.iou)).unwrap_or(0.0),
        iou_max: rows.iter().map(|r| r.iou).fold(f64::NEG_INFINITY, f64::max),
        steps: rows.len(),
    })
}

impl TraceStats {
    pub fn render(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "none".to_string(), |x| format!("{x:.6}"));
        let mut s = String::new();
        let _ = writeln!(s, "steps={}", self.steps);
        let _ = writeln!(
            s,
            "transition_step={}",
            self.transition_step
                .map_or_else(|| "none".to_string(), |t| t.to_string())
        );
        let _ = writeln!(
            s,
            "mean_retention_conservative={}",
            opt(self.mean_retention_conservative)
        );
        let _ = writeln!(
            s,
            "mean_retention_aggressive={}",
            opt(self.mean_retention_aggressive)
        );
        let _ = writeln!(s, "iou_min={:.6}", self.iou_min);
        let _ = writeln!(s, "iou_mean={:.6}", self.iou_mean);
        let _ = writeln!(s, "iou_max={:.6}", self.iou_max);
        s
    }
}
