//! Per-learner admissible pools, structural constraint predicates, the
//! richness composite, and infeasibility certificates.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ContentItem, Difficulty, LearnerState, PrereqGraph, SkillSet};

/// Why an item was removed from a learner's pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionReason {
    DifficultyWindow,
    Overlong,
    Prerequisite,
    Duplicate,
}

impl ExclusionReason {
    pub fn as_str(self) -> &'static str {
        match self {
            ExclusionReason::DifficultyWindow => "difficulty_window",
            ExclusionReason::Overlong => "overlong",
            ExclusionReason::Prerequisite => "prerequisite",
            ExclusionReason::Duplicate => "duplicate",
        }
    }
}

/// Near-duplicate detection over coverage vectors.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SimilarityPolicy {
    /// Jaccard threshold in (0, 1]; 1.0 flags exact duplicates only.
    pub threshold: f64,
}

impl Default for SimilarityPolicy {
    fn default() -> Self {
        SimilarityPolicy { threshold: 1.0 }
    }
}

impl SimilarityPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "threshold",
                reason: format!("must lie in (0,1], got {}", self.threshold),
            });
        }
        Ok(())
    }

    pub fn redundant(&self, a: SkillSet, b: SkillSet) -> bool {
        a.jaccard(b) >= self.threshold
    }
}

/// Maps diagnosed ability to a preferred level and an admissible window.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct WindowPolicy {
    /// theta below this → basic preference.
    pub basic_below: f64,
    /// theta above this → hard preference.
    pub hard_above: f64,
    /// Window half-width in difficulty steps around the preference.
    pub radius: i32,
}

impl Default for WindowPolicy {
    fn default() -> Self {
        WindowPolicy {
            basic_below: -0.5,
            hard_above: 0.5,
            radius: 0,
        }
    }
}

impl WindowPolicy {
    pub fn preferred(&self, theta: f64) -> Difficulty {
        if theta < self.basic_below {
            Difficulty::Basic
        } else if theta > self.hard_above {
            Difficulty::Hard
        } else {
            Difficulty::Medium
        }
    }

    /// Inclusive window clipped to the difficulty scale.
    pub fn window(&self, theta: f64) -> (Difficulty, Difficulty) {
        let p = self.preferred(theta).encode();
        let lo = Difficulty::from_code((p - self.radius).clamp(0, 2)).unwrap();
        let hi = Difficulty::from_code((p + self.radius).clamp(0, 2)).unwrap();
        (lo, hi)
    }
}

/// The per-learner pools after structural prefilters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdmissiblePool {
    pub learner_id: String,
    /// Survivors of the window / duration / prerequisite prefilters.
    pub admissible_ids: Vec<String>,
    /// Admissible items with near-duplicates removed.
    pub nonredundant_ids: Vec<String>,
    /// One first-failing reason per removed item; complements
    /// nonredundant_ids over the full pool.
    pub excluded: Vec<(String, ExclusionReason)>,
}

impl AdmissiblePool {
    pub fn items<'a>(&self, content: &'a [ContentItem]) -> Vec<&'a ContentItem> {
        let by_id: HashMap<&str, &ContentItem> =
            content.iter().map(|c| (c.id.as_str(), c)).collect();
        self.nonredundant_ids
            .iter()
            .filter_map(|id| by_id.get(id.as_str()).copied())
            .collect()
    }
}

/// Builds the admissible pool for one learner.
///
/// Exclusion order (first failing reason recorded): difficulty window,
/// duration exceeding the whole time budget, statically-unsatisfiable
/// prerequisite, near-duplicate. The static prerequisite screen drops an
/// item only when selecting it could never satisfy the per-edge coherence
/// condition: it covers a skill k' with an unmastered prerequisite k that no
/// window-admissible item (itself included) covers. The dynamic form is
/// re-checked by solvers per slate.
pub fn build_pool(
    learner: &LearnerState,
    pool: &[ContentItem],
    prereqs: &PrereqGraph,
    sim: &SimilarityPolicy,
) -> Result<AdmissiblePool> {
    learner.validate()?;
    sim.validate()?;

    let mut excluded: Vec<(String, ExclusionReason)> = Vec::new();
    let mut survivors: Vec<&ContentItem> = Vec::new();
    for item in pool {
        if !learner.window_admits(item.level) {
            excluded.push((item.id.clone(), ExclusionReason::DifficultyWindow));
        } else if item.duration_minutes > learner.time_budget_minutes {
            excluded.push((item.id.clone(), ExclusionReason::Overlong));
        } else {
            survivors.push(item);
        }
    }

    // Skills reachable through some window-admissible item.
    let coverable = survivors
        .iter()
        .fold(SkillSet::empty(), |acc, c| acc.union(c.coverage));
    let mut admissible: Vec<&ContentItem> = Vec::new();
    for item in survivors {
        let blocked = prereqs.edges().iter().any(|&(k, kp)| {
            item.coverage.contains(kp) && !learner.mastery.contains(k) && !coverable.contains(k)
        });
        if blocked {
            excluded.push((item.id.clone(), ExclusionReason::Prerequisite));
        } else {
            admissible.push(item);
        }
    }

    // Group near-duplicates by transitive closure of the similarity
    // relation; keep the best item per group for this learner: nearest the
    // preferred difficulty, then shortest, then lowest id. Interchangeable
    // coverage must not cost the solvers a tier escalation or extra minutes.
    let n = admissible.len();
    let mut group = (0..n).collect::<Vec<usize>>();
    fn find(group: &mut Vec<usize>, i: usize) -> usize {
        if group[i] != i {
            let root = find(group, group[i]);
            group[i] = root;
        }
        group[i]
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if sim.redundant(admissible[i].coverage, admissible[j].coverage) {
                let (ri, rj) = (find(&mut group, i), find(&mut group, j));
                if ri != rj {
                    group[rj] = ri;
                }
            }
        }
    }
    let mut best: HashMap<usize, usize> = HashMap::new();
    for i in 0..n {
        let root = find(&mut group, i);
        let entry = best.entry(root).or_insert(i);
        let (cur, cand) = (admissible[*entry], admissible[i]);
        let key = |c: &ContentItem| {
            (
                c.level.dist(learner.preferred_level),
                c.duration_minutes,
                c.id.clone(),
            )
        };
        if key(cand) < key(cur) {
            *entry = i;
        }
    }
    let mut nonredundant_ids: Vec<String> = Vec::new();
    for i in 0..n {
        let root = find(&mut group, i);
        if best[&root] == i {
            nonredundant_ids.push(admissible[i].id.clone());
        } else {
            excluded.push((admissible[i].id.clone(), ExclusionReason::Duplicate));
        }
    }

    Ok(AdmissiblePool {
        learner_id: learner.id.clone(),
        admissible_ids: admissible.iter().map(|c| c.id.clone()).collect(),
        nonredundant_ids,
        excluded,
    })
}

/// Per-edge prerequisite coherence: for every edge (k → k'), the number of
/// selected items covering k' may not exceed mastery of k plus the number of
/// selected items covering k.
pub fn prerequisite_ok(
    slate: &[&ContentItem],
    learner: &LearnerState,
    prereqs: &PrereqGraph,
) -> bool {
    prereqs.edges().iter().all(|&(k, kp)| {
        let covering_kp = slate.iter().filter(|c| c.coverage.contains(kp)).count();
        let covering_k = slate.iter().filter(|c| c.coverage.contains(k)).count();
        let mastered = usize::from(learner.mastery.contains(k));
        covering_kp <= mastered + covering_k
    })
}

/// At least `delta` distinct representation forms appear in the slate.
/// delta = 1 passes vacuously, including for untagged content.
pub fn diversity_ok(slate: &[&ContentItem], delta: usize) -> bool {
    if delta <= 1 {
        return true;
    }
    let n_forms = slate
        .iter()
        .map(|c| c.representation_tags.len())
        .max()
        .unwrap_or(0);
    if delta > n_forms {
        return false;
    }
    let mut seen = vec![false; n_forms];
    for item in slate {
        for (r, &tag) in item.representation_tags.iter().enumerate() {
            if tag {
                seen[r] = true;
            }
        }
    }
    seen.iter().filter(|&&s| s).count() >= delta
}

/// Components of the option-variety composite for one learner.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RichnessScore {
    pub breadth: f64,
    pub median_count: f64,
    pub representation_entropy: f64,
    pub difficulty_spread: f64,
    pub weights: [f64; 4],
    pub composite: f64,
    /// Learner had no gaps; composite fixed at 1.
    pub no_gaps: bool,
}

/// Composite variety score over the learner's nonredundant pool.
pub fn richness(
    learner: &LearnerState,
    pool: &AdmissiblePool,
    content: &[ContentItem],
    weights: [f64; 4],
) -> Result<RichnessScore> {
    let sum: f64 = weights.iter().sum();
    if weights.iter().any(|&w| w < 0.0) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter {
            name: "weights",
            reason: format!("must be nonnegative and sum to 1, got {weights:?}"),
        });
    }
    let gaps = learner.gaps();
    if gaps.is_empty() {
        return Ok(RichnessScore {
            breadth: 1.0,
            median_count: 1.0,
            representation_entropy: 1.0,
            difficulty_spread: 1.0,
            weights,
            composite: 1.0,
            no_gaps: true,
        });
    }
    let by_id: HashMap<&str, &ContentItem> =
        content.iter().map(|c| (c.id.as_str(), c)).collect();
    let admissible: Vec<&ContentItem> = pool
        .admissible_ids
        .iter()
        .filter_map(|id| by_id.get(id.as_str()).copied())
        .collect();
    let nonredundant: Vec<&ContentItem> = pool
        .nonredundant_ids
        .iter()
        .filter_map(|id| by_id.get(id.as_str()).copied())
        .collect();

    // b: share of gap skills reachable through any admissible item.
    let covered_gaps = gaps
        .iter()
        .filter(|&k| admissible.iter().any(|c| c.coverage.contains(k)))
        .count();
    let breadth = covered_gaps as f64 / gaps.count() as f64;

    // c~: median nonredundant count per gap skill, squashed by c/(1+c).
    let mut counts: Vec<usize> = gaps
        .iter()
        .map(|k| nonredundant.iter().filter(|c| c.coverage.contains(k)).count())
        .collect();
    counts.sort_unstable();
    let median = if counts.is_empty() {
        0.0
    } else if counts.len() % 2 == 1 {
        counts[counts.len() / 2] as f64
    } else {
        (counts[counts.len() / 2 - 1] + counts[counts.len() / 2]) as f64 / 2.0
    };
    let median_count = median / (1.0 + median);

    // H~: normalized Shannon entropy of the form distribution.
    let n_forms = nonredundant
        .iter()
        .map(|c| c.representation_tags.len())
        .max()
        .unwrap_or(0);
    let representation_entropy = if n_forms <= 1 {
        0.0
    } else {
        let mut form_counts = vec![0usize; n_forms];
        for item in &nonredundant {
            for (r, &tag) in item.representation_tags.iter().enumerate() {
                if tag {
                    form_counts[r] += 1;
                }
            }
        }
        let total: usize = form_counts.iter().sum();
        if total == 0 {
            0.0
        } else {
            let h: f64 = form_counts
                .iter()
                .filter(|&&c| c > 0)
                .map(|&c| {
                    let p = c as f64 / total as f64;
                    -p * p.ln()
                })
                .sum();
            h / (n_forms as f64).ln()
        }
    };

    // sigma~: difficulty-index spread normalized by half the window width.
    let (lo, hi) = learner.difficulty_window;
    let half_width = (hi.encode() - lo.encode()) as f64 / 2.0;
    let difficulty_spread = if half_width <= 0.0 || nonredundant.is_empty() {
        0.0
    } else {
        let ds: Vec<f64> = nonredundant.iter().map(|c| c.difficulty_index()).collect();
        let mean = ds.iter().sum::<f64>() / ds.len() as f64;
        let var = ds.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / ds.len() as f64;
        (var.sqrt() / half_width).min(1.0)
    };

    let composite = weights[0] * breadth
        + weights[1] * median_count
        + weights[2] * representation_entropy
        + weights[3] * difficulty_spread;
    Ok(RichnessScore {
        breadth,
        median_count,
        representation_entropy,
        difficulty_spread,
        weights,
        composite,
        no_gaps: false,
    })
}

/// (learner, skill) pairs where a gap has no covering admissible content.
/// Empty output certifies that full gap coverage is attainable when budgets
/// are ignored.
pub fn infeasibility_certificate(
    learners: &[LearnerState],
    pools: &[AdmissiblePool],
    content: &[ContentItem],
) -> Result<Vec<(String, usize)>> {
    if learners.len() != pools.len() {
        return Err(Error::DimensionMismatch {
            axis: "learners",
            expected: learners.len(),
            got: pools.len(),
        });
    }
    let by_id: HashMap<&str, &ContentItem> =
        content.iter().map(|c| (c.id.as_str(), c)).collect();
    let mut out = Vec::new();
    for (learner, pool) in learners.iter().zip(pools) {
        let admissible: Vec<&ContentItem> = pool
            .admissible_ids
            .iter()
            .filter_map(|id| by_id.get(id.as_str()).copied())
            .collect();
        for k in learner.gaps().iter() {
            if !admissible.iter().any(|c| c.coverage.contains(k)) {
                out.push((learner.id.clone(), k));
            }
        }
    }
    Ok(out)
}
