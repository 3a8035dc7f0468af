//! Continuous relaxation of the slate problem: smooth capped coverage,
//! penalty barriers for budgets / difficulty / prerequisites / redundancy,
//! projected gradient descent, and threshold rounding with repair.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feasibility::{AdmissiblePool, SimilarityPolicy};
use crate::model::{
    AssignmentSlate, ContentItem, LearnerState, ObjectiveWeights, PrereqGraph, TraceEvent,
};

/// Smooth coverage surrogate choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverageSurrogate {
    /// sigma(z) = 1 - exp(-tau z); smooth everywhere (primary form).
    Sigma,
    /// min(1, z); piecewise-linear cap.
    Hinge,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct GradientConfig {
    pub weights: ObjectiveWeights,
    /// Sharpness of the sigma coverage surrogate.
    pub tau_cov: f64,
    pub coverage_surrogate: CoverageSurrogate,
    pub lambda_time: f64,
    pub lambda_card: f64,
    pub lambda_diff: f64,
    pub lambda_pre: f64,
    pub lambda_div: f64,
    pub eta_step: f64,
    pub grad_tol: f64,
    pub max_iters: usize,
    pub round_threshold: f64,
    /// Near-duplicate relation feeding the lambda_div pairwise penalty.
    pub similarity: SimilarityPolicy,
}

impl Default for GradientConfig {
    fn default() -> Self {
        GradientConfig {
            weights: ObjectiveWeights::default(),
            tau_cov: 3.0,
            coverage_surrogate: CoverageSurrogate::Sigma,
            lambda_time: 10.0,
            lambda_card: 10.0,
            lambda_diff: 1.0,
            lambda_pre: 10.0,
            lambda_div: 1.0,
            eta_step: 0.01,
            grad_tol: 1e-5,
            max_iters: 5000,
            round_threshold: 0.5,
            similarity: SimilarityPolicy::default(),
        }
    }
}

impl GradientConfig {
    pub fn validate(&self) -> Result<()> {
        let lambdas = [
            self.lambda_time,
            self.lambda_card,
            self.lambda_diff,
            self.lambda_pre,
            self.lambda_div,
        ];
        if lambdas.iter().any(|&l| l < 0.0 || !l.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "lambda",
                reason: format!("penalty weights must be finite and nonnegative: {lambdas:?}"),
            });
        }
        if !(self.round_threshold > 0.0 && self.round_threshold < 1.0) {
            return Err(Error::InvalidParameter {
                name: "round_threshold",
                reason: format!("must lie in (0,1), got {}", self.round_threshold),
            });
        }
        if !(self.eta_step > 0.0) {
            return Err(Error::InvalidParameter {
                name: "eta_step",
                reason: "must be positive".into(),
            });
        }
        if !(self.tau_cov > 0.0) {
            return Err(Error::InvalidParameter {
                name: "tau_cov",
                reason: "must be positive".into(),
            });
        }
        Ok(())
    }
}

fn check_box(x: &[f64]) -> Result<()> {
    if x.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
        return Err(Error::InvalidParameter {
            name: "x",
            reason: "relaxed vector must lie in [0,1]^M".into(),
        });
    }
    Ok(())
}

/// Per-item unit cost in the burden term: 1 + eps*L_j + omega*dist_j.
fn unit_cost(item: &ContentItem, learner: &LearnerState, w: &ObjectiveWeights) -> f64 {
    1.0 + w.epsilon * item.duration_minutes
        + w.omega * item.level.dist(learner.preferred_level).abs() as f64
}

/// Quadratic two-sided window hinge on the difficulty index.
fn window_hinge(item: &ContentItem, learner: &LearnerState) -> f64 {
    let d = item.difficulty_index();
    let (lo, hi) = learner.difficulty_window;
    let over = (d - hi.encode() as f64).max(0.0);
    let under = (lo.encode() as f64 - d).max(0.0);
    over * over + under * under
}

/// Individual loss terms, exposed for diagnostics and the non-finite error
/// breakdown.
#[derive(Debug, Clone, Serialize)]
pub struct LossTerms {
    pub coverage: f64,
    pub burden: f64,
    pub time_penalty: f64,
    pub cardinality_penalty: f64,
    pub difficulty_penalty: f64,
    pub prerequisite_penalty: f64,
    pub diversity_penalty: f64,
}

impl LossTerms {
    pub fn total(&self) -> f64 {
        self.coverage
            + self.burden
            + self.time_penalty
            + self.cardinality_penalty
            + self.difficulty_penalty
            + self.prerequisite_penalty
            + self.diversity_penalty
    }
}

/// Penalized relaxed loss at x (items aligned with x by position).
pub fn loss_terms(
    x: &[f64],
    items: &[&ContentItem],
    learner: &LearnerState,
    prereqs: &PrereqGraph,
    config: &GradientConfig,
) -> Result<LossTerms> {
    check_box(x)?;
    if x.len() != items.len() {
        return Err(Error::DimensionMismatch {
            axis: "content",
            expected: items.len(),
            got: x.len(),
        });
    }
    let w = &config.weights;
    let gaps = learner.gaps();

    // -alpha * sum_k U_k * surrogate(z_k), z_k = sum_j C_jk x_j.
    let mut coverage = 0.0;
    for k in gaps.iter() {
        let z: f64 = items
            .iter()
            .zip(x)
            .filter(|(c, _)| c.coverage.contains(k))
            .map(|(_, &v)| v)
            .sum();
        let s = match config.coverage_surrogate {
            CoverageSurrogate::Sigma => 1.0 - (-config.tau_cov * z).exp(),
            CoverageSurrogate::Hinge => z.min(1.0),
        };
        coverage -= w.alpha * s;
    }

    let burden: f64 =
        w.beta * items.iter().zip(x).map(|(c, &v)| unit_cost(c, learner, w) * v).sum::<f64>();

    let minutes: f64 = items.iter().zip(x).map(|(c, &v)| c.duration_minutes * v).sum();
    let time_excess = (minutes - learner.time_budget_minutes).max(0.0);
    let time_penalty = config.lambda_time * time_excess * time_excess;

    let mass: f64 = x.iter().sum();
    let card_excess = (mass - learner.slate_cap as f64).max(0.0);
    let cardinality_penalty = config.lambda_card * card_excess * card_excess;

    let difficulty_penalty: f64 = config.lambda_diff
        * items.iter().zip(x).map(|(c, &v)| window_hinge(c, learner) * v).sum::<f64>();

    let mut prerequisite_penalty = 0.0;
    for &(k, kp) in prereqs.edges() {
        let succ: f64 = items
            .iter()
            .zip(x)
            .filter(|(c, _)| c.coverage.contains(kp))
            .map(|(_, &v)| v)
            .sum();
        let pre: f64 = items
            .iter()
            .zip(x)
            .filter(|(c, _)| c.coverage.contains(k))
            .map(|(_, &v)| v)
            .sum();
        let mastered = f64::from(learner.mastery.contains(k));
        let r = (succ - mastered - pre).max(0.0);
        prerequisite_penalty += config.lambda_pre * r * r;
    }

    let mut diversity_penalty = 0.0;
    for j in 0..items.len() {
        for l in (j + 1)..items.len() {
            if config.similarity.redundant(items[j].coverage, items[l].coverage) {
                diversity_penalty += config.lambda_div * x[j] * x[l];
            }
        }
    }

    let terms = LossTerms {
        coverage,
        burden,
        time_penalty,
        cardinality_penalty,
        difficulty_penalty,
        prerequisite_penalty,
        diversity_penalty,
    };
    if !terms.total().is_finite() {
        return Err(Error::NonFiniteLoss(
            serde_json::to_string(&terms).unwrap_or_else(|_| "unserializable".into()),
        ));
    }
    Ok(terms)
}

pub fn loss(
    x: &[f64],
    items: &[&ContentItem],
    learner: &LearnerState,
    prereqs: &PrereqGraph,
    config: &GradientConfig,
) -> Result<f64> {
    Ok(loss_terms(x, items, learner, prereqs, config)?.total())
}

/// Analytic gradient of the penalized loss.
pub fn gradient(
    x: &[f64],
    items: &[&ContentItem],
    learner: &LearnerState,
    prereqs: &PrereqGraph,
    config: &GradientConfig,
) -> Result<Vec<f64>> {
    check_box(x)?;
    if x.len() != items.len() {
        return Err(Error::DimensionMismatch {
            axis: "content",
            expected: items.len(),
            got: x.len(),
        });
    }
    let w = &config.weights;
    let gaps = learner.gaps();
    let m = items.len();
    let mut g = vec![0.0; m];

    for k in gaps.iter() {
        let z: f64 = items
            .iter()
            .zip(x)
            .filter(|(c, _)| c.coverage.contains(k))
            .map(|(_, &v)| v)
            .sum();
        let dsigma = match config.coverage_surrogate {
            CoverageSurrogate::Sigma => config.tau_cov * (-config.tau_cov * z).exp(),
            CoverageSurrogate::Hinge => {
                if z < 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
        };
        for (j, item) in items.iter().enumerate() {
            if item.coverage.contains(k) {
                g[j] -= w.alpha * dsigma;
            }
        }
    }

    for (j, item) in items.iter().enumerate() {
        g[j] += w.beta * unit_cost(item, learner, w);
        g[j] += config.lambda_diff * window_hinge(item, learner);
    }

    let minutes: f64 = items.iter().zip(x).map(|(c, &v)| c.duration_minutes * v).sum();
    let time_excess = (minutes - learner.time_budget_minutes).max(0.0);
    if time_excess > 0.0 {
        for (j, item) in items.iter().enumerate() {
            g[j] += 2.0 * config.lambda_time * time_excess * item.duration_minutes;
        }
    }

    let mass: f64 = x.iter().sum();
    let card_excess = (mass - learner.slate_cap as f64).max(0.0);
    if card_excess > 0.0 {
        for gj in g.iter_mut() {
            *gj += 2.0 * config.lambda_card * card_excess;
        }
    }

    for &(k, kp) in prereqs.edges() {
        let succ: f64 = items
            .iter()
            .zip(x)
            .filter(|(c, _)| c.coverage.contains(kp))
            .map(|(_, &v)| v)
            .sum();
        let pre: f64 = items
            .iter()
            .zip(x)
            .filter(|(c, _)| c.coverage.contains(k))
            .map(|(_, &v)| v)
            .sum();
        let mastered = f64::from(learner.mastery.contains(k));
        let r = (succ - mastered - pre).max(0.0);
        if r > 0.0 {
            for (j, item) in items.iter().enumerate() {
                let dir = f64::from(item.coverage.contains(kp))
                    - f64::from(item.coverage.contains(k));
                g[j] += 2.0 * config.lambda_pre * r * dir;
            }
        }
    }

    for j in 0..m {
        for l in (j + 1)..m {
            if config.similarity.redundant(items[j].coverage, items[l].coverage) {
                g[j] += config.lambda_div * x[l];
                g[l] += config.lambda_div * x[j];
            }
        }
    }

    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("gradient"));
    }
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientStop {
    GradientTolerance,
    MaxIterations,
    /// Projected step could no longer decrease the loss.
    StepVanished,
}

/// Result of the projected descent, before rounding.
#[derive(Debug, Clone, Serialize)]
pub struct RelaxedSolution {
    /// Content ids aligned with x by position.
    pub ids: Vec<String>,
    pub x: Vec<f64>,
    pub iterations: usize,
    pub stop_reason: GradientStop,
    pub loss_trajectory: Vec<f64>,
}

/// Projected gradient descent from x = 0 with step halving on any loss
/// increase, so the recorded trajectory is monotone nonincreasing.
pub fn optimize(
    learner: &LearnerState,
    pool: &AdmissiblePool,
    content: &[ContentItem],
    prereqs: &PrereqGraph,
    config: &GradientConfig,
) -> Result<RelaxedSolution> {
    optimize_from(learner, pool, content, prereqs, config, None)
}

/// As `optimize`, but warm-started from x = 1 on the given content ids
/// (e.g. a greedy slate) when provided.
pub fn optimize_from(
    learner: &LearnerState,
    pool: &AdmissiblePool,
    content: &[ContentItem],
    prereqs: &PrereqGraph,
    config: &GradientConfig,
    warm_ids: Option<&[String]>,
) -> Result<RelaxedSolution> {
    config.validate()?;
    learner.validate()?;
    let by_id: HashMap<&str, &ContentItem> =
        content.iter().map(|c| (c.id.as_str(), c)).collect();
    // Optimize over the deduplicated pool: exact-coverage duplicates would
    // otherwise split relaxed mass symmetrically and both fall below the
    // rounding threshold.
    let items: Vec<&ContentItem> = pool
        .nonredundant_ids
        .iter()
        .filter_map(|id| by_id.get(id.as_str()).copied())
        .collect();
    let m = items.len();
    let mut x = vec![0.0; m];
    if let Some(warm) = warm_ids {
        for (j, item) in items.iter().enumerate() {
            if warm.iter().any(|id| id == &item.id) {
                x[j] = 1.0;
            }
        }
    }
    let mut eta = config.eta_step;
    let mut current = loss(&x, &items, learner, prereqs, config)?;
    let mut trajectory = vec![current];
    let mut stop = GradientStop::MaxIterations;
    let mut iterations = 0;

    for it in 0..config.max_iters {
        iterations = it + 1;
        let g = gradient(&x, &items, learner, prereqs, config)?;
        let g_inf = g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if g_inf < config.grad_tol {
            stop = GradientStop::GradientTolerance;
            iterations = it;
            break;
        }
        // Halve the step until the projected move does not increase loss.
        let mut accepted = false;
        while eta > 1e-14 {
            let cand: Vec<f64> = x
                .iter()
                .zip(&g)
                .map(|(&v, &gj)| (v - eta * gj).clamp(0.0, 1.0))
                .collect();
            let cand_loss = loss(&cand, &items, learner, prereqs, config)?;
            if cand_loss <= current + 1e-12 {
                x = cand;
                current = cand_loss;
                accepted = true;
                break;
            }
            eta *= 0.5;
        }
        if !accepted {
            stop = GradientStop::StepVanished;
            break;
        }
        trajectory.push(current);
    }

    Ok(RelaxedSolution {
        ids: items.iter().map(|c| c.id.clone()).collect(),
        x,
        iterations,
        stop_reason: stop,
        loss_trajectory: trajectory,
    })
}

/// Threshold the relaxed vector and repair until the slate satisfies the
/// time/cardinality budgets, the difficulty window, and prerequisite
/// coherence. Repairs are traced.
pub fn round_and_repair(
    relaxed: &RelaxedSolution,
    learner: &LearnerState,
    content: &[ContentItem],
    prereqs: &PrereqGraph,
    config: &GradientConfig,
) -> Result<AssignmentSlate> {
    config.validate()?;
    let by_id: HashMap<&str, &ContentItem> =
        content.iter().map(|c| (c.id.as_str(), c)).collect();
    let mut slate = AssignmentSlate::empty(learner.id.clone(), learner.n_skills);
    // (item, relaxed value) for everything above threshold.
    let mut chosen: Vec<(&ContentItem, f64)> = Vec::new();
    for (id, &v) in relaxed.ids.iter().zip(&relaxed.x) {
        if v >= config.round_threshold {
            if let Some(&item) = by_id.get(id.as_str()) {
                chosen.push((item, v));
            }
        }
    }
    slate.trace.push(TraceEvent::Note {
        message: format!(
            "rounded {} of {} relaxed variables at threshold {}",
            chosen.len(),
            relaxed.ids.len(),
            config.round_threshold
        ),
    });

    // Adequacy promotion: thresholding can strand a gap skill whose relaxed
    // mass is split across near-tied items (each below the threshold even
    // though the skill as a whole is covered fractionally), leaving slack
    // that neither the certificate nor a repair would explain. For each gap
    // skill with total relaxed mass at or above the threshold but no
    // selected item, promote the highest-valued supporting item (ties →
    // lowest id); the budget repairs below still get the last word.
    let gaps = learner.gaps();
    for k in gaps.iter() {
        if chosen.iter().any(|(c, _)| c.coverage.contains(k)) {
            continue;
        }
        let supporters: Vec<(&str, f64)> = relaxed
            .ids
            .iter()
            .zip(&relaxed.x)
            .filter(|&(id, _)| {
                by_id
                    .get(id.as_str())
                    .map(|c| c.coverage.contains(k))
                    .unwrap_or(false)
            })
            .map(|(id, &v)| (id.as_str(), v))
            .collect();
        let mass: f64 = supporters.iter().map(|&(_, v)| v).sum();
        if mass < config.round_threshold {
            continue;
        }
        let promoted = supporters
            .iter()
            .max_by(|(ida, va), (idb, vb)| va.partial_cmp(vb).unwrap().then(idb.cmp(ida)));
        if let Some(&(id, v)) = promoted {
            let item = by_id[id];
            chosen.push((item, v));
            slate.trace.push(TraceEvent::Repair {
                content_id: item.id.clone(),
                reason: "adequacy".into(),
            });
        }
    }

    // (2) Budgets: drop the weakest relaxed value first; break value ties by
    // longest duration, then highest id.
    let over_budget = |sel: &[(&ContentItem, f64)]| {
        let minutes: f64 = sel.iter().map(|(c, _)| c.duration_minutes).sum();
        minutes > learner.time_budget_minutes || sel.len() > learner.slate_cap
    };
    while over_budget(&chosen) {
        let victim = (0..chosen.len())
            .min_by(|&a, &b| {
                let (ca, va) = chosen[a];
                let (cb, vb) = chosen[b];
                va.partial_cmp(&vb)
                    .unwrap()
                    .then(cb.duration_minutes.partial_cmp(&ca.duration_minutes).unwrap())
                    .then(cb.id.cmp(&ca.id))
            })
            .expect("nonempty while over budget");
        let (item, _) = chosen.remove(victim);
        slate.trace.push(TraceEvent::Repair {
            content_id: item.id.clone(),
            reason: "budget".into(),
        });
    }

    // (3) Difficulty window.
    chosen.retain(|(item, _)| {
        let ok = learner.window_admits(item.level);
        if !ok {
            slate.trace.push(TraceEvent::Repair {
                content_id: item.id.clone(),
                reason: "difficulty_window".into(),
            });
        }
        ok
    });

    // (4) Prerequisite coherence: walk target skills in reverse topological
    // order, dropping successors whose edge is violated, to a fixpoint.
    let topo = prereqs.toposort_skills()?;
    loop {
        let mut dropped = false;
        for &kp in topo.iter().rev() {
            for &(k, kp2) in prereqs.edges() {
                if kp2 != kp {
                    continue;
                }
                let covering_kp =
                    chosen.iter().filter(|(c, _)| c.coverage.contains(kp)).count();
                let covering_k =
                    chosen.iter().filter(|(c, _)| c.coverage.contains(k)).count();
                let mastered = usize::from(learner.mastery.contains(k));
                if covering_kp > mastered + covering_k {
                    // Drop an item covering k' but not k (lowest relaxed
                    // value first).
                    if let Some(victim) = (0..chosen.len())
                        .filter(|&i| {
                            chosen[i].0.coverage.contains(kp)
                                && !chosen[i].0.coverage.contains(k)
                        })
                        .min_by(|&a, &b| chosen[a].1.partial_cmp(&chosen[b].1).unwrap())
                    {
                        let (item, _) = chosen.remove(victim);
                        slate.trace.push(TraceEvent::Repair {
                            content_id: item.id.clone(),
                            reason: "prerequisite".into(),
                        });
                        dropped = true;
                    }
                }
            }
        }
        if !dropped {
            break;
        }
    }

    // Final picks in descending relaxed value (ties → lowest id), so the
    // trace carries per-pick marginal gains like a greedy trace.
    chosen.sort_by(|(ca, va), (cb, vb)| {
        vb.partial_cmp(va).unwrap().then(ca.id.cmp(&cb.id))
    });
    let mut covered = crate::model::SkillSet::empty();
    for (item, v) in &chosen {
        let marginal = gaps.difference(covered).intersection(item.coverage);
        slate.trace.push(TraceEvent::Pick {
            content_id: item.id.clone(),
            marginal_skills: marginal,
            score: *v,
            tier: 0,
        });
        covered = covered.union(item.coverage);
        slate.selected.push(item.id.clone());
        slate.total_minutes += item.duration_minutes;
    }
    slate.recompute_slack(learner, content);
    Ok(slate)
}

/// Convenience: optimize then round-and-repair.
pub fn solve(
    learner: &LearnerState,
    pool: &AdmissiblePool,
    content: &[ContentItem],
    prereqs: &PrereqGraph,
    config: &GradientConfig,
) -> Result<AssignmentSlate> {
    let relaxed = optimize(learner, pool, content, prereqs, config)?;
    round_and_repair(&relaxed, learner, content, prereqs, config)
}
