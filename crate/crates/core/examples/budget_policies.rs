//! Compares the three budget policies on one frame of a simulated episode.
//!
//! `cargo run --example budget_policies`

use tokprune::{sim, BudgetPolicy, EpisodeSpec, Pruner, PrunerConfig, Scenario, TokenGrid};

fn main() -> tokprune::Result<()> {
    let grid = TokenGrid::new(8, 8, 8)?;
    let ep = sim::generate(&EpisodeSpec::new(3, 12, grid, 8, Scenario::Approach))?;

    for (policy, budget) in [
        (BudgetPolicy::Off, None),
        (BudgetPolicy::CapOnly, Some(12)),
        (BudgetPolicy::Exact, Some(12)),
        (BudgetPolicy::Exact, Some(40)),
    ] {
        let mut cfg = PrunerConfig::default();
        cfg.selection.budget_policy = policy;
        cfg.selection.budget = budget;
        let mut pruner = Pruner::new(cfg, grid)?;
        let last = ep
            .images
            .iter()
            .zip(&ep.features)
            .map(|(img, f)| pruner.step(img, f, &ep.text))
            .last()
            .expect("episode has steps")?;
        println!(
            "{:<8} budget {:<4} -> {:>2} tokens kept ({:.1}%)",
            policy.as_str(),
            budget.map_or("-".to_string(), |b| b.to_string()),
            last.kept.len(),
            100.0 * last.retention
        );
    }
    Ok(())
}
