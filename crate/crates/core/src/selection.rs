//! Priority scoring and final index gathering.
//!
//! `Score = S_sem + S_temp + w_edge * E`, left on its raw `[0, 2 + w_edge]` scale. The final
//! set is the base set plus every token whose score exceeds `theta_geo`. Budget policies
//! optionally cap or pin the result size; eviction and top-up are purely score ordered.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::types::{IndexSet, ScoreVector, TokenGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BudgetPolicy {
    #[default]
    Off,
    CapOnly,
    Exact,
}

impl BudgetPolicy {
    pub fn as_str(&self) -> &'static str {
        match self {
            BudgetPolicy::Off => "off",
            BudgetPolicy::CapOnly => "cap",
            BudgetPolicy::Exact => "exact",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "off" => Some(BudgetPolicy::Off),
            "cap" => Some(BudgetPolicy::CapOnly),
            "exact" => Some(BudgetPolicy::Exact),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionConfig {
    pub w_edge: f64,
    pub theta_geo: f64,
    /// Target token count for the budget policies.
    pub budget: Option<usize>,
    pub budget_policy: BudgetPolicy,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            w_edge: 1.0,
            theta_geo: 1.5,
            budget: None,
            budget_policy: BudgetPolicy::Off,
        }
    }
}

impl SelectionConfig {
    /// Checks the fields; `tokens` bounds the budget when given.
    pub fn validate(&self, tokens: Option<usize>) -> Result<()> {
        check_w_edge(self.w_edge)?;
        if self.theta_geo.is_nan() {
            return Err(Error::config("theta_geo", "must not be NaN"));
        }
        if self.budget_policy != BudgetPolicy::Off && self.budget.is_none() {
            return Err(Error::config(
                "budget",
                format!(
                    "required by budget policy `{}`",
                    self.budget_policy.as_str()
                ),
            ));
        }
        if let Some(b) = self.budget {
            if b == 0 {
                return Err(Error::config("budget", "must be at least 1"));
            }
            if let Some(n) = tokens {
                if b > n {
                    return Err(Error::config(
                        "budget",
                        format!("{b} exceeds the {n} tokens of the grid"),
                    ));
                }
            }
        }
        Ok(())
    }
}

fn check_w_edge(w_edge: f64) -> Result<()> {
    if w_edge >= 0.0 && w_edge.is_finite() {
        Ok(())
    } else {
        Err(Error::config(
            "w_edge",
            format!("must be non-negative, got {w_edge}"),
        ))
    }
}

/// `S_sem + S_temp + w_edge * E`, not renormalized.
pub fn priority_score(
    s_sem: &ScoreVector,
    s_temp: &ScoreVector,
    e: &ScoreVector,
    w_edge: f64,
) -> Result<ScoreVector> {
    check_w_edge(w_edge)?;
    s_sem.grid().check_same(&s_temp.grid(), "priority_score")?;
    s_sem.grid().check_same(&e.grid(), "priority_score")?;
    let values = s_sem
        .values()
        .iter()
        .zip(s_temp.values())
        .zip(e.values())
        .map(|((&s, &t), &g)| s + t + w_edge * g)
        .collect();
    ScoreVector::new(s_sem.grid(), values)
}

/// Higher score first, then lower index.
fn by_priority(scores: &[f64]) -> impl Fn(&usize, &usize) -> Ordering + '_ {
    move |&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b))
}

/// Union of `base` with the structural anchors, then the budget policy.
pub fn gather_final(
    base: &IndexSet,
    scores: &ScoreVector,
    cfg: &SelectionConfig,
) -> Result<IndexSet> {
    let n = scores.len();
    cfg.validate(Some(n))?;
    if let Some(&last) = base.as_slice().last() {
        if last >= n {
            return Err(Error::Shape(format!(
                "base index {last} out of range for {n} tokens"
            )));
        }
    }
    let s = scores.values();
    let mut member = vec![false; n];
    for i in base.iter() {
        member[i] = true;
    }
    for (i, &v) in s.iter().enumerate() {
        if v > cfg.theta_geo {
            member[i] = true;
        }
    }
    let mut kept: Vec<usize> = (0..n).filter(|&i| member[i]).collect();

    let budget = match (cfg.budget_policy, cfg.budget) {
        (BudgetPolicy::Off, _) | (_, None) => return Ok(IndexSet::from_sorted_unchecked(kept)),
        (_, Some(b)) => b,
    };
    if kept.len() > budget {
        kept.sort_by(by_priority(s));
        kept.truncate(budget);
    } else if cfg.budget_policy == BudgetPolicy::Exact && kept.len() < budget {
        let mut rest: Vec<usize> = (0..n).filter(|&i| !member[i]).collect();
        rest.sort_by(by_priority(s));
        kept.extend(rest.into_iter().take(budget - kept.len()));
    }
    kept.sort_unstable();
    Ok(IndexSet::from_sorted_unchecked(kept))
}

/// `|result| / N`.
pub fn retention_ratio(result: &IndexSet, grid: &TokenGrid) -> f64 {
    result.len() as f64 / grid.total() as f64
}
