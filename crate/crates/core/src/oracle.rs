//! Exhaustive exact solver for tiny instances — the ground-truth baseline
//! for approximation-bound tests. Obviously correct over fast.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feasibility::{prerequisite_ok, AdmissiblePool, SimilarityPolicy};
use crate::model::{
    capped_coverage_single, AssignmentSlate, ContentItem, LearnerState, ObjectiveWeights,
    PrereqGraph,
};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct OracleLimits {
    /// Enumeration budget: 2^max_content subsets.
    pub max_content: usize,
}

/// Enumeration beyond 2^24 subsets is never allowed.
pub const ORACLE_HARD_CAP: usize = 24;

impl Default for OracleLimits {
    fn default() -> Self {
        OracleLimits { max_content: 20 }
    }
}

/// Exact optimum by full subset enumeration over the admissible pool.
///
/// Feasible subsets satisfy the time/cardinality budgets, the difficulty
/// window, prerequisite coherence, and pairwise anti-redundancy; the
/// objective is alpha * capped coverage - beta * (count + eps*minutes)
/// - gamma_slack * residual gap count. Among ties the subset with the
/// lowest enumeration mask (lexicographically earliest in id order) wins.
pub fn solve_exact(
    learner: &LearnerState,
    pool: &AdmissiblePool,
    content: &[ContentItem],
    prereqs: &PrereqGraph,
    weights: &ObjectiveWeights,
    sim: &SimilarityPolicy,
    limits: &OracleLimits,
) -> Result<(AssignmentSlate, f64)> {
    learner.validate()?;
    sim.validate()?;
    let max = limits.max_content.min(ORACLE_HARD_CAP);
    let by_id: HashMap<&str, &ContentItem> =
        content.iter().map(|c| (c.id.as_str(), c)).collect();
    let items: Vec<&ContentItem> = pool
        .admissible_ids
        .iter()
        .filter_map(|id| by_id.get(id.as_str()).copied())
        .collect();
    let m = items.len();
    if m > max {
        return Err(Error::PoolTooLarge { size: m, max });
    }
    let gaps = learner.gaps();

    // Precompute the redundant pairs once.
    let mut redundant_pairs: Vec<(usize, usize)> = Vec::new();
    for j in 0..m {
        for l in (j + 1)..m {
            if sim.redundant(items[j].coverage, items[l].coverage) {
                redundant_pairs.push((j, l));
            }
        }
    }

    let mut best: Option<(u32, f64, Vec<usize>)> = None;
    for mask in 0u32..(1u32 << m) {
        let chosen: Vec<usize> = (0..m).filter(|j| mask & (1 << j) != 0).collect();
        let slate_items: Vec<&ContentItem> = chosen.iter().map(|&j| items[j]).collect();

        let minutes: f64 = slate_items.iter().map(|c| c.duration_minutes).sum();
        if minutes > learner.time_budget_minutes || slate_items.len() > learner.slate_cap {
            continue;
        }
        if !slate_items.iter().all(|c| learner.window_admits(c.level)) {
            continue;
        }
        if redundant_pairs
            .iter()
            .any(|&(j, l)| mask & (1 << j) != 0 && mask & (1 << l) != 0)
        {
            continue;
        }
        if !prerequisite_ok(&slate_items, learner, prereqs) {
            continue;
        }

        let covered = capped_coverage_single(gaps, &slate_items) as f64;
        let burden: f64 = slate_items
            .iter()
            .map(|c| 1.0 + weights.epsilon * c.duration_minutes)
            .sum();
        let slack = gaps.count() as f64 - covered;
        let z = weights.alpha * covered - weights.beta * burden - weights.gamma_slack * slack;

        let better = match &best {
            None => true,
            Some((_, bz, _)) => z > *bz,
        };
        if better {
            best = Some((mask, z, chosen));
        }
    }

    let (_, z, chosen) = best.expect("empty subset is always feasible");
    let mut slate = AssignmentSlate::empty(learner.id.clone(), learner.n_skills);
    for &j in &chosen {
        slate.selected.push(items[j].id.clone());
        slate.total_minutes += items[j].duration_minutes;
    }
    slate.recompute_slack(learner, content);
    Ok((slate, z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feasibility::build_pool;
    use crate::model::Difficulty::{self, *};
    use crate::model::SkillSet;
    use rand::Rng;

    fn learner(mastery: &[usize], n_skills: usize) -> LearnerState {
        LearnerState {
            id: "s0".into(),
            theta: 0.0,
            mastery: SkillSet::from_indices(mastery),
            n_skills,
            time_budget_minutes: 45.0,
            slate_cap: 10,
            difficulty_window: (Basic, Hard),
            preferred_level: Medium,
        }
    }

    fn item(id: &str, skills: &[usize], dur: f64, level: Difficulty) -> ContentItem {
        ContentItem::new(id, SkillSet::from_indices(skills), dur, level).unwrap()
    }

    fn pool_of(content: &[ContentItem]) -> AdmissiblePool {
        AdmissiblePool {
            learner_id: "s0".into(),
            admissible_ids: content.iter().map(|c| c.id.clone()).collect(),
            nonredundant_ids: content.iter().map(|c| c.id.clone()).collect(),
            excluded: vec![],
        }
    }

    fn random_instance(
        case: u64,
        n_items: usize,
    ) -> (LearnerState, Vec<ContentItem>, PrereqGraph) {
        let mut rng = crate::rng::substream(81, crate::rng::Domain::Instance, case);
        let n_skills = 5;
        let content: Vec<ContentItem> = (0..n_items)
            .map(|i| {
                let skills: Vec<usize> = (0..n_skills).filter(|_| rng.gen::<bool>()).collect();
                let skills = if skills.is_empty() { vec![i % n_skills] } else { skills };
                let level = [Basic, Medium, Hard][rng.gen_range(0..3)];
                item(&format!("i{i:02}"), &skills, rng.gen_range(5.0..15.0), level)
            })
            .collect();
        let mastery: Vec<usize> = (0..n_skills).filter(|_| rng.gen::<bool>()).collect();
        let mut l = learner(&mastery, n_skills);
        l.time_budget_minutes = rng.gen_range(15.0..45.0);
        let prereqs = PrereqGraph::new(vec![(0, 1)]).unwrap();
        (l, content, prereqs)
    }

    #[test]
    fn empty_pool_returns_pure_slack_value() {
        let l = learner(&[0], 3);
        let w = ObjectiveWeights::default();
        let (slate, z) = solve_exact(
            &l,
            &pool_of(&[]),
            &[],
            &PrereqGraph::empty(),
            &w,
            &SimilarityPolicy::default(),
            &OracleLimits::default(),
        )
        .unwrap();
        assert!(slate.selected.is_empty());
        assert_eq!(z, -w.gamma_slack * 2.0);
    }

    #[test]
    fn singleton_exact_cover() {
        let l = learner(&[0, 1], 3);
        let content = vec![item("a", &[2], 10.0, Medium)];
        let (slate, _) = solve_exact(
            &l,
            &pool_of(&content),
            &content,
            &PrereqGraph::empty(),
            &ObjectiveWeights::default(),
            &SimilarityPolicy::default(),
            &OracleLimits::default(),
        )
        .unwrap();
        assert_eq!(slate.selected, vec!["a"]);
    }

    #[test]
    fn rejects_oversized_pool() {
        let content: Vec<ContentItem> =
            (0..6).map(|i| item(&format!("i{i}"), &[0], 10.0, Medium)).collect();
        let limits = OracleLimits { max_content: 5 };
        assert!(matches!(
            solve_exact(
                &learner(&[], 3),
                &pool_of(&content),
                &content,
                &PrereqGraph::empty(),
                &ObjectiveWeights::default(),
                &SimilarityPolicy::default(),
                &limits,
            ),
            Err(Error::PoolTooLarge { .. })
        ));
    }

    #[test]
    fn dominates_random_feasible_subsets() {
        let w = ObjectiveWeights::default();
        let sim = SimilarityPolicy::default();
        let mut total_checked = 0usize;
        for case in 0..20 {
            let (l, content, prereqs) = random_instance(case, 10);
            let pool = build_pool(&l, &content, &prereqs, &sim).unwrap();
            let (_, z_opt) = solve_exact(
                &l,
                &pool,
                &content,
                &prereqs,
                &w,
                &sim,
                &OracleLimits::default(),
            )
            .unwrap();
            let items: Vec<&ContentItem> = content
                .iter()
                .filter(|c| pool.admissible_ids.contains(&c.id))
                .collect();
            let mut rng = crate::rng::substream(82, crate::rng::Domain::Instance, case);
            for _ in 0..500 {
                let chosen: Vec<&ContentItem> =
                    items.iter().filter(|_| rng.gen::<bool>()).copied().collect();
                let minutes: f64 = chosen.iter().map(|c| c.duration_minutes).sum();
                if minutes > l.time_budget_minutes
                    || chosen.len() > l.slate_cap
                    || !chosen.iter().all(|c| l.window_admits(c.level))
                    || !prerequisite_ok(&chosen, &l, &prereqs)
                {
                    continue;
                }
                let mut pair_ok = true;
                for a in 0..chosen.len() {
                    for b in (a + 1)..chosen.len() {
                        if sim.redundant(chosen[a].coverage, chosen[b].coverage) {
                            pair_ok = false;
                        }
                    }
                }
                if !pair_ok {
                    continue;
                }
                let covered = capped_coverage_single(l.gaps(), &chosen) as f64;
                let burden: f64 =
                    chosen.iter().map(|c| 1.0 + w.epsilon * c.duration_minutes).sum();
                let slack = l.gaps().count() as f64 - covered;
                let z = w.alpha * covered - w.beta * burden - w.gamma_slack * slack;
                assert!(z <= z_opt + 1e-9, "case {case}: feasible {z} beats oracle {z_opt}");
                total_checked += 1;
            }
        }
        assert!(total_checked > 1000, "checked {total_checked}");
    }

    #[test]
    fn add_one_monotonicity_of_capped_coverage() {
        // Adding one item never decreases the optimal covered-gap count.
        let w = ObjectiveWeights {
            beta: 0.0,
            ..Default::default()
        };
        let sim = SimilarityPolicy::default();
        for case in 0..50 {
            let (l, content, prereqs) = random_instance(case + 100, 9);
            let base = &content[..8];
            let pool_base = build_pool(&l, base, &prereqs, &sim).unwrap();
            let pool_full = build_pool(&l, &content, &prereqs, &sim).unwrap();
            let limits = OracleLimits::default();
            let cov = |pool: &AdmissiblePool, content: &[ContentItem]| {
                let (slate, _) =
                    solve_exact(&l, pool, content, &prereqs, &w, &sim, &limits).unwrap();
                let gaps = l.gaps();
                gaps.count() - slate.slack.iter().filter(|&&s| s > 0.0).count()
            };
            assert!(
                cov(&pool_full, &content) >= cov(&pool_base, base),
                "case {case}"
            );
        }
    }

    #[test]
    fn tie_break_prefers_earliest_mask() {
        // Two identical-value singles: lower-indexed admissible id wins.
        let l = learner(&[0, 2], 3);
        let content = vec![
            item("a", &[1], 10.0, Medium),
            item("b", &[1], 10.0, Medium),
        ];
        let sim = SimilarityPolicy { threshold: 1.0 };
        // Exact duplicates are infeasible together, but each alone is
        // feasible and equal-valued; mask order keeps "a".
        let (slate, _) = solve_exact(
            &l,
            &pool_of(&content),
            &content,
            &PrereqGraph::empty(),
            &ObjectiveWeights::default(),
            &sim,
            &OracleLimits::default(),
        )
        .unwrap();
        assert_eq!(slate.selected, vec!["a"]);
    }
}
