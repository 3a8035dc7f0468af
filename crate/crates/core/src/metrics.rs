//! Cohort-level evaluation: satisfactory rate, gain decay, utility, total
//! penalty, coverage categories, and content-usage summaries.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AssignmentSlate, ContentItem, LearnerState, SkillSet, TraceEvent};

fn mean_sd(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn selected_items<'a>(
    slate: &AssignmentSlate,
    by_id: &HashMap<&str, &'a ContentItem>,
) -> Vec<&'a ContentItem> {
    slate
        .selected
        .iter()
        .filter_map(|id| by_id.get(id.as_str()).copied())
        .collect()
}

fn check_paired(slates: &[AssignmentSlate], learners: &[LearnerState]) -> Result<()> {
    if slates.len() != learners.len() {
        return Err(Error::DimensionMismatch {
            axis: "learners",
            expected: learners.len(),
            got: slates.len(),
        });
    }
    Ok(())
}

/// Percent of learners whose every gap skill is covered by at least one
/// selected item.
pub fn satisfactory_rate(
    slates: &[AssignmentSlate],
    learners: &[LearnerState],
    content: &[ContentItem],
) -> Result<f64> {
    check_paired(slates, learners)?;
    if learners.is_empty() {
        return Err(Error::EmptyInput("learners"));
    }
    let by_id: HashMap<&str, &ContentItem> =
        content.iter().map(|c| (c.id.as_str(), c)).collect();
    let satisfied = slates
        .iter()
        .zip(learners)
        .filter(|(slate, learner)| {
            let covered = selected_items(slate, &by_id)
                .iter()
                .fold(SkillSet::empty(), |acc, c| acc.union(c.coverage));
            learner.gaps().iter().all(|k| covered.contains(k))
        })
        .count();
    Ok(satisfied as f64 / learners.len() as f64 * 100.0)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GainDecayStats {
    pub mean: f64,
    pub sd: f64,
    /// Learners skipped for lack of any pick event.
    pub excluded_empty: usize,
}

/// Marginal-gain decay per learner: sum over picks of (G_v - G_1),
/// normalized by pick count; G_1 is the learner's own first-pick gain.
/// Aggregated as mean/sd over learners with at least one pick.
pub fn gain_decay(slates: &[AssignmentSlate]) -> GainDecayStats {
    let mut per_learner = Vec::new();
    let mut excluded_empty = 0usize;
    for slate in slates {
        let gains: Vec<f64> = slate
            .trace
            .iter()
            .filter_map(|e| match e {
                TraceEvent::Pick { marginal_skills, .. } => {
                    Some(marginal_skills.count() as f64)
                }
                _ => None,
            })
            .collect();
        if gains.is_empty() {
            excluded_empty += 1;
            continue;
        }
        let g_opt = gains[0];
        let decay: f64 = gains.iter().map(|g| g - g_opt).sum::<f64>() / gains.len() as f64;
        per_learner.push(decay);
    }
    let (mean, sd) = mean_sd(&per_learner);
    GainDecayStats { mean, sd, excluded_empty }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UtilityStats {
    pub mean: f64,
    pub sd: f64,
    /// Learners with gaps but zero assigned minutes (scored 0).
    pub zero_minutes_flagged: usize,
    /// Learners with no gaps and an empty slate (not scored).
    pub excluded: usize,
}

/// Coverage-per-minute: needed-and-covered skill count over assigned
/// minutes, averaged across scored learners.
pub fn utility(
    slates: &[AssignmentSlate],
    learners: &[LearnerState],
    content: &[ContentItem],
) -> Result<UtilityStats> {
    check_paired(slates, learners)?;
    let by_id: HashMap<&str, &ContentItem> =
        content.iter().map(|c| (c.id.as_str(), c)).collect();
    let mut values = Vec::new();
    let mut zero_minutes_flagged = 0usize;
    let mut excluded = 0usize;
    for (slate, learner) in slates.iter().zip(learners) {
        let items = selected_items(slate, &by_id);
        let minutes: f64 = items.iter().map(|c| c.duration_minutes).sum();
        let gaps = learner.gaps();
        if gaps.is_empty() && items.is_empty() {
            excluded += 1;
            continue;
        }
        if minutes <= 0.0 {
            zero_minutes_flagged += 1;
            values.push(0.0);
            continue;
        }
        let covered_needed = gaps
            .iter()
            .filter(|&k| items.iter().any(|c| c.coverage.contains(k)))
            .count();
        values.push(covered_needed as f64 / minutes);
    }
    let (mean, sd) = mean_sd(&values);
    Ok(UtilityStats { mean, sd, zero_minutes_flagged, excluded })
}

/// Per-item redundant incidences in pick order: a selected item is charged
/// one incidence for each skill it covers that is already mastered or
/// already covered by an earlier pick.
fn overcover_incidences(
    slate: &AssignmentSlate,
    learner: &LearnerState,
    by_id: &HashMap<&str, &ContentItem>,
) -> usize {
    let mut covered = SkillSet::empty();
    let mut incidences = 0usize;
    for id in &slate.selected {
        let Some(item) = by_id.get(id.as_str()) else { continue };
        for k in item.coverage.iter() {
            if learner.mastery.contains(k) || covered.contains(k) {
                incidences += 1;
            }
        }
        covered = covered.union(item.coverage);
    }
    incidences
}

/// TP = w1 * (redundant coverage incidences) + w2 * (unused content count).
pub fn total_penalty(
    slates: &[AssignmentSlate],
    learners: &[LearnerState],
    content: &[ContentItem],
    w1: f64,
    w2: f64,
) -> Result<f64> {
    check_paired(slates, learners)?;
    if w1 < 0.0 || w2 < 0.0 {
        return Err(Error::InvalidParameter {
            name: "penalty_weights",
            reason: format!("must be nonnegative, got ({w1},{w2})"),
        });
    }
    let by_id: HashMap<&str, &ContentItem> =
        content.iter().map(|c| (c.id.as_str(), c)).collect();
    let overcover: usize = slates
        .iter()
        .zip(learners)
        .map(|(s, l)| overcover_incidences(s, l, &by_id))
        .sum();
    let used: std::collections::HashSet<&str> = slates
        .iter()
        .flat_map(|s| s.selected.iter().map(|id| id.as_str()))
        .collect();
    let nonused = content.iter().filter(|c| !used.contains(c.id.as_str())).count();
    Ok(w1 * overcover as f64 + w2 * nonused as f64)
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq, Eq)]
pub struct CoverageCategories {
    /// All gaps covered with zero redundant incidences.
    pub fully_covered: usize,
    /// All gaps covered, at least one redundant incidence.
    pub over_covered: usize,
    /// At least one gap left uncovered.
    pub unsatisfied: usize,
    /// Learners with no gaps (not categorized).
    pub no_gaps: usize,
    /// Content items appearing in no slate.
    pub non_used_content: usize,
}

pub fn coverage_categories(
    slates: &[AssignmentSlate],
    learners: &[LearnerState],
    content: &[ContentItem],
) -> Result<CoverageCategories> {
    check_paired(slates, learners)?;
    let by_id: HashMap<&str, &ContentItem> =
        content.iter().map(|c| (c.id.as_str(), c)).collect();
    let mut out = CoverageCategories::default();
    for (slate, learner) in slates.iter().zip(learners) {
        let gaps = learner.gaps();
        if gaps.is_empty() {
            out.no_gaps += 1;
            continue;
        }
        let items = selected_items(slate, &by_id);
        let covered = items
            .iter()
            .fold(SkillSet::empty(), |acc, c| acc.union(c.coverage));
        let all_covered = gaps.iter().all(|k| covered.contains(k));
        if !all_covered {
            out.unsatisfied += 1;
        } else if overcover_incidences(slate, learner, &by_id) > 0 {
            out.over_covered += 1;
        } else {
            out.fully_covered += 1;
        }
    }
    let used: std::collections::HashSet<&str> = slates
        .iter()
        .flat_map(|s| s.selected.iter().map(|id| id.as_str()))
        .collect();
    out.non_used_content = content.iter().filter(|c| !used.contains(c.id.as_str())).count();
    Ok(out)
}

/// Everything the evaluation pipeline reports for one (solver, scenario).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub satisfactory_rate: f64,
    pub gain_decay_mean: f64,
    pub gain_decay_sd: f64,
    pub utility_mean: f64,
    pub utility_sd: f64,
    pub total_penalty: f64,
    pub fully_covered: usize,
    pub over_covered: usize,
    pub unsatisfied: usize,
    pub no_gap_learners: usize,
    pub non_used_content: usize,
    pub unique_content_assigned: usize,
    /// content id → number of slates containing it.
    pub per_content_usage: BTreeMap<String, usize>,
    /// skill index → learners with positive slack on it.
    pub slack_summary: BTreeMap<usize, usize>,
}

impl EvaluationReport {
    pub fn compute(
        slates: &[AssignmentSlate],
        learners: &[LearnerState],
        content: &[ContentItem],
        w1: f64,
        w2: f64,
    ) -> Result<Self> {
        let sr = satisfactory_rate(slates, learners, content)?;
        let gd = gain_decay(slates);
        let util = utility(slates, learners, content)?;
        let tp = total_penalty(slates, learners, content, w1, w2)?;
        let cats = coverage_categories(slates, learners, content)?;

        let mut per_content_usage: BTreeMap<String, usize> = BTreeMap::new();
        for slate in slates {
            for id in &slate.selected {
                *per_content_usage.entry(id.clone()).or_insert(0) += 1;
            }
        }
        let unique_content_assigned = per_content_usage.len();

        let mut slack_summary: BTreeMap<usize, usize> = BTreeMap::new();
        for slate in slates {
            for (k, &xi) in slate.slack.iter().enumerate() {
                if xi > 0.0 {
                    *slack_summary.entry(k).or_insert(0) += 1;
                }
            }
        }

        Ok(EvaluationReport {
            satisfactory_rate: sr,
            gain_decay_mean: gd.mean,
            gain_decay_sd: gd.sd,
            utility_mean: util.mean,
            utility_sd: util.sd,
            total_penalty: tp,
            fully_covered: cats.fully_covered,
            over_covered: cats.over_covered,
            unsatisfied: cats.unsatisfied,
            no_gap_learners: cats.no_gaps,
            non_used_content: cats.non_used_content,
            unique_content_assigned,
            per_content_usage,
            slack_summary,
        })
    }
}
