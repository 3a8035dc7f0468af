//! Greedy slate construction: iterative net-gain selection with a
//! redundancy penalty and a three-tier difficulty fallback.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feasibility::{prerequisite_ok, AdmissiblePool};
use crate::model::{
    AssignmentSlate, ContentItem, LearnerState, ObjectiveWeights, PrereqGraph, SkillSet,
    TraceEvent,
};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct GreedyConfig {
    pub weights: ObjectiveWeights,
    /// Open tiers 1 and 2 (one- and two-level difficulty deviations) when
    /// coverage stalls at the preferred level.
    pub fallback_enabled: bool,
    /// Pick-count guard; None means the pool size.
    pub max_iterations: Option<usize>,
}

impl Default for GreedyConfig {
    fn default() -> Self {
        GreedyConfig {
            weights: ObjectiveWeights::default(),
            fallback_enabled: true,
            max_iterations: None,
        }
    }
}

/// Net-gain score F for one candidate at the given fallback tier:
/// new-coverage count minus duration, difficulty-distance, and overlap
/// penalties. The item must lie within the tier (caller enforces candidacy).
pub fn score(
    item: &ContentItem,
    uncovered: SkillSet,
    covered_so_far: SkillSet,
    learner: &LearnerState,
    weights: &ObjectiveWeights,
    tier: u8,
) -> Result<f64> {
    let dist = item.level.dist(learner.preferred_level);
    if dist > tier as i32 {
        return Err(Error::InvalidParameter {
            name: "tier",
            reason: format!(
                "item {} at distance {dist} scored at tier {tier}",
                item.id
            ),
        });
    }
    let gain = uncovered.intersection(item.coverage).count() as f64;
    let overlap = covered_so_far.intersection(item.coverage).count() as f64;
    Ok(gain
        - (weights.epsilon * item.duration_minutes
            + weights.omega * dist as f64
            + weights.gamma_overlap * overlap))
}

/// Greedy solve for one learner. Every intermediate state satisfies the
/// time/cardinality budgets and prerequisite coherence; candidates must add
/// at least one uncovered skill. Ties break toward the lowest content id;
/// the difficulty tier escalates globally only when no candidate at the
/// current tier can extend coverage within budgets.
pub fn solve(
    learner: &LearnerState,
    pool: &AdmissiblePool,
    content: &[ContentItem],
    prereqs: &PrereqGraph,
    config: &GreedyConfig,
) -> Result<AssignmentSlate> {
    learner.validate()?;
    let by_id: HashMap<&str, &ContentItem> =
        content.iter().map(|c| (c.id.as_str(), c)).collect();
    let items: Vec<&ContentItem> = pool
        .nonredundant_ids
        .iter()
        .filter_map(|id| by_id.get(id.as_str()).copied())
        .collect();
    let max_picks = config.max_iterations.unwrap_or(items.len());
    let max_tier: u8 = if config.fallback_enabled { 2 } else { 0 };

    let mut slate = AssignmentSlate::empty(learner.id.clone(), learner.n_skills);
    let mut picked: Vec<&ContentItem> = Vec::new();
    let mut covered = SkillSet::empty();
    let mut uncovered = learner.gaps();
    let mut tier: u8 = 0;

    while !uncovered.is_empty() && picked.len() < learner.slate_cap.min(max_picks) {
        let mut best: Option<(&ContentItem, f64)> = None;
        for &item in &items {
            if picked.iter().any(|p| p.id == item.id) {
                continue;
            }
            if item.level.dist(learner.preferred_level) > tier as i32 {
                continue;
            }
            if uncovered.intersection(item.coverage).is_empty() {
                continue;
            }
            if slate.total_minutes + item.duration_minutes > learner.time_budget_minutes {
                continue;
            }
            let mut trial = picked.clone();
            trial.push(item);
            if !prerequisite_ok(&trial, learner, prereqs) {
                continue;
            }
            let f = score(item, uncovered, covered, learner, &config.weights, tier)?;
            let take = match best {
                None => true,
                Some((b, bf)) => f > bf || (f == bf && item.id < b.id),
            };
            if take {
                best = Some((item, f));
            }
        }
        match best {
            Some((item, f)) => {
                let marginal = uncovered.intersection(item.coverage);
                slate.trace.push(TraceEvent::Pick {
                    content_id: item.id.clone(),
                    marginal_skills: marginal,
                    score: f,
                    tier,
                });
                slate.selected.push(item.id.clone());
                slate.total_minutes += item.duration_minutes;
                covered = covered.union(item.coverage);
                uncovered = uncovered.difference(item.coverage);
                picked.push(item);
            }
            None if tier < max_tier => {
                tier += 1;
                slate.trace.push(TraceEvent::Note {
                    message: format!("tier_escalation: opening difficulty distance {tier}"),
                });
            }
            None => break,
        }
    }
    if !uncovered.is_empty() {
        // Audit reason for the residual slack entries.
        slate.trace.push(TraceEvent::Note {
            message: format!(
                "no_candidates: residual gaps {:?}",
                uncovered.iter().collect::<Vec<_>>()
            ),
        });
    }

    slate.recompute_slack(learner, content);
    Ok(slate)
}
