//! Regime law: dispatches between the greedy and gradient solvers from the
//! pool-richness score and the latency budget, and the greedy-init /
//! gradient-refine combination with slack-penalized arbitration.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::feasibility::{AdmissiblePool, RichnessScore};
use crate::gradient::{optimize_from, round_and_repair, GradientConfig};
use crate::greedy::{self, GreedyConfig};
use crate::model::{
    capped_coverage_single, AssignmentSlate, ContentItem, LearnerState, ObjectiveWeights,
    PrereqGraph, TraceEvent,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMode {
    Auto,
    ForceGreedy,
    ForceGradient,
    ForceHybrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverChoice {
    Greedy,
    Gradient,
    Hybrid,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RegimePolicy {
    /// Richness threshold below which greedy wins outright.
    pub rho_star: f64,
    /// Per-learner latency budget in milliseconds; None means unbounded.
    pub lambda_budget_ms: Option<f64>,
    /// Latency threshold; budgets under it force greedy, budgets of at
    /// least four times it open the gradient solver.
    pub lambda_star_ms: f64,
    pub mode: SolverMode,
}

impl Default for RegimePolicy {
    fn default() -> Self {
        RegimePolicy {
            rho_star: 0.5,
            lambda_budget_ms: None,
            lambda_star_ms: 50.0,
            mode: SolverMode::Auto,
        }
    }
}

/// Pure dispatch: which solver to run, and why.
pub fn choose_solver(rho: &RichnessScore, policy: &RegimePolicy) -> (SolverChoice, String) {
    match policy.mode {
        SolverMode::ForceGreedy => return (SolverChoice::Greedy, "mode=force_greedy".into()),
        SolverMode::ForceGradient => {
            return (SolverChoice::Gradient, "mode=force_gradient".into())
        }
        SolverMode::ForceHybrid => return (SolverChoice::Hybrid, "mode=force_hybrid".into()),
        SolverMode::Auto => {}
    }
    let budget = policy.lambda_budget_ms.unwrap_or(f64::INFINITY);
    if rho.composite < policy.rho_star {
        return (
            SolverChoice::Greedy,
            format!("rho {:.3} < rho* {:.3}", rho.composite, policy.rho_star),
        );
    }
    if budget < policy.lambda_star_ms {
        return (
            SolverChoice::Greedy,
            format!("latency budget {budget}ms < lambda* {}ms", policy.lambda_star_ms),
        );
    }
    if budget >= 4.0 * policy.lambda_star_ms {
        return (
            SolverChoice::Gradient,
            format!(
                "rho {:.3} >= rho* {:.3} and budget {budget}ms >= 4*lambda* {}ms",
                rho.composite,
                policy.rho_star,
                4.0 * policy.lambda_star_ms
            ),
        );
    }
    (
        SolverChoice::Hybrid,
        format!(
            "rho {:.3} >= rho* {:.3} with budget {budget}ms in [lambda*, 4*lambda*)",
            rho.composite, policy.rho_star
        ),
    )
}

/// Slack-penalized scalar objective used for final arbitration:
/// alpha * capped coverage - beta * (count + eps * minutes) - gamma * slack.
pub fn slate_value(
    slate: &AssignmentSlate,
    learner: &LearnerState,
    content: &[ContentItem],
    weights: &ObjectiveWeights,
) -> f64 {
    let by_id: HashMap<&str, &ContentItem> =
        content.iter().map(|c| (c.id.as_str(), c)).collect();
    let selected: Vec<&ContentItem> = slate
        .selected
        .iter()
        .filter_map(|id| by_id.get(id.as_str()).copied())
        .collect();
    let covered = capped_coverage_single(learner.gaps(), &selected) as f64;
    let burden: f64 = selected
        .iter()
        .map(|c| 1.0 + weights.epsilon * c.duration_minutes)
        .sum();
    let slack: f64 = learner
        .gaps()
        .iter()
        .filter(|&k| {
            !selected.iter().any(|c| c.coverage.contains(k))
        })
        .count() as f64;
    weights.alpha * covered - weights.beta * burden - weights.gamma_slack * slack
}

/// Greedy first, then gradient refinement warm-started at the greedy slate;
/// the slate with the higher slack-penalized value wins (ties → greedy, for
/// transparency).
pub fn solve_hybrid(
    learner: &LearnerState,
    pool: &AdmissiblePool,
    content: &[ContentItem],
    prereqs: &PrereqGraph,
    greedy_cfg: &GreedyConfig,
    grad_cfg: &GradientConfig,
) -> Result<AssignmentSlate> {
    let greedy_slate = greedy::solve(learner, pool, content, prereqs, greedy_cfg)?;
    let relaxed = optimize_from(
        learner,
        pool,
        content,
        prereqs,
        grad_cfg,
        Some(&greedy_slate.selected),
    )?;
    let refined = round_and_repair(&relaxed, learner, content, prereqs, grad_cfg)?;

    let weights = &greedy_cfg.weights;
    let z_greedy = slate_value(&greedy_slate, learner, content, weights);
    let z_refined = slate_value(&refined, learner, content, weights);
    let mut winner = if z_refined > z_greedy { refined } else { greedy_slate };
    winner.trace.push(TraceEvent::Note {
        message: format!(
            "hybrid arbitration: greedy Z {z_greedy:.6}, refined Z {z_refined:.6}, kept {}",
            if z_refined > z_greedy { "refined" } else { "greedy" }
        ),
    });
    Ok(winner)
}
