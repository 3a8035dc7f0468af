//! Shared domain vocabulary: skill sets, the Q-matrix, content and learner
//! descriptions, assignment slates, and the objective-function evaluators.
//!
//! All types here are immutable after construction and safe to share across
//! parallel workers; the objective evaluators are pure functions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A set of skills, stored as a bitmask. Skill indices are 0-based and must
/// stay below [`SkillSet::MAX_SKILLS`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct SkillSet(u32);

impl SkillSet {
    pub const MAX_SKILLS: usize = 32;

    pub fn empty() -> Self {
        SkillSet(0)
    }

    pub fn from_indices(indices: &[usize]) -> Self {
        let mut s = SkillSet(0);
        for &i in indices {
            s.insert(i);
        }
        s
    }

    pub fn from_flags(flags: &[bool]) -> Self {
        let mut s = SkillSet(0);
        for (i, &f) in flags.iter().enumerate() {
            if f {
                s.insert(i);
            }
        }
        s
    }

    /// All skills 0..k set.
    pub fn full(k: usize) -> Self {
        assert!(k <= Self::MAX_SKILLS);
        if k == 32 {
            SkillSet(u32::MAX)
        } else {
            SkillSet((1u32 << k) - 1)
        }
    }

    pub fn insert(&mut self, skill: usize) {
        assert!(skill < Self::MAX_SKILLS);
        self.0 |= 1 << skill;
    }

    pub fn contains(&self, skill: usize) -> bool {
        skill < Self::MAX_SKILLS && self.0 & (1 << skill) != 0
    }

    pub fn union(&self, other: SkillSet) -> SkillSet {
        SkillSet(self.0 | other.0)
    }

    pub fn intersection(&self, other: SkillSet) -> SkillSet {
        SkillSet(self.0 & other.0)
    }

    pub fn difference(&self, other: SkillSet) -> SkillSet {
        SkillSet(self.0 & !other.0)
    }

    /// Complement within the first `k` skills.
    pub fn complement(&self, k: usize) -> SkillSet {
        SkillSet(!self.0).intersection(SkillSet::full(k))
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn count(&self) -> usize {
        self.0.count_ones() as usize
    }

    /// True when `self` contains every skill in `other`.
    pub fn is_superset(&self, other: SkillSet) -> bool {
        self.0 & other.0 == other.0
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        let bits = self.0;
        (0..Self::MAX_SKILLS).filter(move |i| bits & (1 << i) != 0)
    }

    pub fn jaccard(&self, other: SkillSet) -> f64 {
        let union = self.union(other).count();
        if union == 0 {
            return 1.0;
        }
        self.intersection(other).count() as f64 / union as f64
    }

    pub fn bits(&self) -> u32 {
        self.0
    }

    pub fn from_bits(bits: u32) -> Self {
        SkillSet(bits)
    }
}

impl Serialize for SkillSet {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        self.iter().collect::<Vec<usize>>().serialize(ser)
    }
}

impl<'de> Deserialize<'de> for SkillSet {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<usize>::deserialize(de)?;
        Ok(SkillSet::from_indices(&v))
    }
}

/// Ordinal difficulty scale: basic < medium < hard.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, Hash)]
#[serde(rename_all = "lowercase")]
pub enum Difficulty {
    Basic,
    Medium,
    Hard,
}

impl Difficulty {
    /// Integer encoding: basic=0, medium=1, hard=2.
    pub fn encode(self) -> i32 {
        match self {
            Difficulty::Basic => 0,
            Difficulty::Medium => 1,
            Difficulty::Hard => 2,
        }
    }

    pub fn from_code(code: i32) -> Option<Self> {
        match code {
            0 => Some(Difficulty::Basic),
            1 => Some(Difficulty::Medium),
            2 => Some(Difficulty::Hard),
            _ => None,
        }
    }

    /// Absolute level gap between two ordinals (0, 1, or 2).
    pub fn dist(self, other: Difficulty) -> i32 {
        (self.encode() - other.encode()).abs()
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "basic" => Some(Difficulty::Basic),
            "medium" => Some(Difficulty::Medium),
            "hard" => Some(Difficulty::Hard),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Difficulty::Basic => "basic",
            Difficulty::Medium => "medium",
            Difficulty::Hard => "hard",
        }
    }
}

/// Binary item-by-skill requirement matrix.
///
/// Rows with no required skill are legal but flagged as untagged; they carry
/// no class information in conjunctive likelihoods.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QMatrix {
    n_items: usize,
    n_skills: usize,
    rows: Vec<SkillSet>,
}

impl QMatrix {
    pub fn new(n_skills: usize, rows: Vec<SkillSet>) -> Result<Self> {
        if n_skills == 0 || rows.is_empty() {
            return Err(Error::InvalidParameter {
                name: "qmatrix",
                reason: "dimensions must be strictly positive".into(),
            });
        }
        if n_skills > SkillSet::MAX_SKILLS {
            return Err(Error::InvalidParameter {
                name: "n_skills",
                reason: format!("at most {} skills supported", SkillSet::MAX_SKILLS),
            });
        }
        for row in &rows {
            if !SkillSet::full(n_skills).is_superset(*row) {
                return Err(Error::DimensionMismatch {
                    axis: "skills",
                    expected: n_skills,
                    got: row.iter().max().map_or(0, |m| m + 1),
                });
            }
        }
        Ok(QMatrix {
            n_items: rows.len(),
            n_skills,
            rows,
        })
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn n_skills(&self) -> usize {
        self.n_skills
    }

    pub fn row(&self, item: usize) -> SkillSet {
        self.rows[item]
    }

    pub fn rows(&self) -> &[SkillSet] {
        &self.rows
    }

    /// Items requiring no skill at all (legal, but excluded from conjunctive
    /// likelihood discrimination).
    pub fn untagged_items(&self) -> Vec<usize> {
        self.rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r.is_empty())
            .map(|(i, _)| i)
            .collect()
    }
}

/// One micro-intervention in the repository.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContentItem {
    pub id: String,
    pub coverage: SkillSet,
    pub duration_minutes: f64,
    pub level: Difficulty,
    /// Representation-form flags (symbolic, diagrammatic, ...). May be empty.
    pub representation_tags: Vec<bool>,
}

impl ContentItem {
    pub fn new(
        id: impl Into<String>,
        coverage: SkillSet,
        duration_minutes: f64,
        level: Difficulty,
    ) -> Result<Self> {
        if !(duration_minutes > 0.0) {
            return Err(Error::InvalidParameter {
                name: "duration_minutes",
                reason: format!("must be positive, got {duration_minutes}"),
            });
        }
        if coverage.is_empty() {
            return Err(Error::InvalidParameter {
                name: "coverage",
                reason: "content must cover at least one skill".into(),
            });
        }
        Ok(ContentItem {
            id: id.into(),
            coverage,
            duration_minutes,
            level,
            representation_tags: Vec::new(),
        })
    }

    pub fn with_tags(mut self, tags: Vec<bool>) -> Self {
        self.representation_tags = tags;
        self
    }

    /// Numeric difficulty index (basic=0, medium=1, hard=2).
    pub fn difficulty_index(&self) -> f64 {
        self.level.encode() as f64
    }
}

/// Diagnosed state and budgets for one learner.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LearnerState {
    pub id: String,
    pub theta: f64,
    pub mastery: SkillSet,
    pub n_skills: usize,
    pub time_budget_minutes: f64,
    pub slate_cap: usize,
    /// Inclusive ordinal readiness window.
    pub difficulty_window: (Difficulty, Difficulty),
    pub preferred_level: Difficulty,
}

impl LearnerState {
    /// Gap vector, always derived from mastery so the two cannot drift.
    pub fn gaps(&self) -> SkillSet {
        self.mastery.complement(self.n_skills)
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.difficulty_window;
        if lo > self.preferred_level || self.preferred_level > hi {
            return Err(Error::InvalidParameter {
                name: "preferred_level",
                reason: "must lie inside the difficulty window".into(),
            });
        }
        if !(self.time_budget_minutes > 0.0) {
            return Err(Error::InvalidParameter {
                name: "time_budget_minutes",
                reason: "must be positive".into(),
            });
        }
        if self.slate_cap == 0 {
            return Err(Error::InvalidParameter {
                name: "slate_cap",
                reason: "must be at least 1".into(),
            });
        }
        Ok(())
    }

    /// True when the content's level falls inside this learner's window.
    pub fn window_admits(&self, level: Difficulty) -> bool {
        let (lo, hi) = self.difficulty_window;
        lo <= level && level <= hi
    }
}

/// Directed skill prerequisite graph; edge (k, k') means k precedes k'.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PrereqGraph {
    edges: Vec<(usize, usize)>,
}

impl PrereqGraph {
    pub fn empty() -> Self {
        PrereqGraph { edges: Vec::new() }
    }

    /// Builds the graph, rejecting cycles.
    pub fn new(mut edges: Vec<(usize, usize)>) -> Result<Self> {
        edges.sort_unstable();
        edges.dedup();
        let g = PrereqGraph { edges };
        g.toposort_skills()?;
        Ok(g)
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Topological order of every skill mentioned in an edge (Kahn's
    /// algorithm); errors on a cycle.
    pub fn toposort_skills(&self) -> Result<Vec<usize>> {
        let nodes: Vec<usize> = {
            let mut v: Vec<usize> = self
                .edges
                .iter()
                .flat_map(|&(a, b)| [a, b])
                .collect();
            v.sort_unstable();
            v.dedup();
            v
        };
        let mut indeg: std::collections::BTreeMap<usize, usize> =
            nodes.iter().map(|&n| (n, 0)).collect();
        for &(_, to) in &self.edges {
            *indeg.get_mut(&to).unwrap() += 1;
        }
        let mut queue: Vec<usize> = indeg
            .iter()
            .filter(|(_, &d)| d == 0)
            .map(|(&n, _)| n)
            .collect();
        let mut order = Vec::with_capacity(nodes.len());
        while let Some(n) = queue.pop() {
            order.push(n);
            for &(from, to) in &self.edges {
                if from == n {
                    let d = indeg.get_mut(&to).unwrap();
                    *d -= 1;
                    if *d == 0 {
                        queue.push(to);
                    }
                }
            }
        }
        if order.len() != nodes.len() {
            let stuck = nodes
                .iter()
                .find(|n| !order.contains(n))
                .copied()
                .unwrap_or(0);
            return Err(Error::CyclicPrereqs(stuck));
        }
        Ok(order)
    }
}

/// What a trace record documents.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TraceEvent {
    /// A solver pick: greedy score or relaxed value at selection time.
    Pick {
        content_id: String,
        marginal_skills: SkillSet,
        score: f64,
        tier: u8,
    },
    /// An item dropped during rounding repair.
    Repair { content_id: String, reason: String },
    /// Free-form annotation (fallback escalation, solver rationale, ...).
    Note { message: String },
}

/// Decision vector for one learner plus slack and an audit trail.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssignmentSlate {
    pub learner_id: String,
    /// Selected content ids, in pick order.
    pub selected: Vec<String>,
    /// Per-skill slack; positive only where a gap stays uncovered.
    pub slack: Vec<f64>,
    pub total_minutes: f64,
    /// Set when the slate could not be made budget-feasible.
    pub infeasible: bool,
    pub trace: Vec<TraceEvent>,
}

impl AssignmentSlate {
    pub fn empty(learner_id: impl Into<String>, n_skills: usize) -> Self {
        AssignmentSlate {
            learner_id: learner_id.into(),
            selected: Vec::new(),
            slack: vec![0.0; n_skills],
            total_minutes: 0.0,
            infeasible: false,
            trace: Vec::new(),
        }
    }

    pub fn slack_mass(&self) -> f64 {
        self.slack.iter().sum()
    }

    /// Union of coverage over the selected items.
    pub fn covered(&self, content: &[ContentItem]) -> SkillSet {
        let by_id: std::collections::HashMap<&str, &ContentItem> =
            content.iter().map(|c| (c.id.as_str(), c)).collect();
        self.selected
            .iter()
            .filter_map(|id| by_id.get(id.as_str()))
            .fold(SkillSet::empty(), |acc, c| acc.union(c.coverage))
    }

    /// Recompute slack from the learner's gaps and the selected coverage.
    pub fn recompute_slack(&mut self, learner: &LearnerState, content: &[ContentItem]) {
        let covered = self.covered(content);
        let gaps = learner.gaps();
        self.slack = (0..learner.n_skills)
            .map(|k| {
                if gaps.contains(k) && !covered.contains(k) {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
    }
}

/// Scalarization weights for the assignment objective.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ObjectiveWeights {
    /// Coverage reward.
    pub alpha: f64,
    /// Burden penalty.
    pub beta: f64,
    /// Time-scaling inside the burden term.
    pub epsilon: f64,
    /// Difficulty-distance penalty.
    pub omega: f64,
    /// Redundancy penalty in the greedy score.
    pub gamma_overlap: f64,
    /// Slack penalty; must dominate `alpha * K` so adequacy has lexical
    /// priority over everything else.
    pub gamma_slack: f64,
}

impl Default for ObjectiveWeights {
    fn default() -> Self {
        ObjectiveWeights {
            alpha: 1.0,
            beta: 0.1,
            epsilon: 0.1,
            omega: 0.25,
            gamma_overlap: 0.25,
            gamma_slack: 1000.0,
        }
    }
}

impl ObjectiveWeights {
    pub fn validate(&self, n_skills: usize) -> Result<()> {
        for (name, v) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("omega", self.omega),
            ("gamma_overlap", self.gamma_overlap),
            ("gamma_slack", self.gamma_slack),
        ] {
            if !(v >= 0.0) {
                return Err(Error::InvalidParameter {
                    name: "weights",
                    reason: format!("{name} must be nonnegative, got {v}"),
                });
            }
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidParameter {
                name: "epsilon",
                reason: "must be strictly positive".into(),
            });
        }
        if self.gamma_slack <= self.alpha * n_skills as f64 {
            return Err(Error::InvalidParameter {
                name: "gamma_slack",
                reason: format!(
                    "must exceed alpha * K = {} to keep adequacy lexically prior",
                    self.alpha * n_skills as f64
                ),
            });
        }
        Ok(())
    }
}

fn check_assignment_dims(
    gaps: &[SkillSet],
    assignment: &[Vec<bool>],
    n_content: usize,
) -> Result<()> {
    if assignment.len() != gaps.len() {
        return Err(Error::DimensionMismatch {
            axis: "learners",
            expected: gaps.len(),
            got: assignment.len(),
        });
    }
    for row in assignment {
        if row.len() != n_content {
            return Err(Error::DimensionMismatch {
                axis: "content",
                expected: n_content,
                got: row.len(),
            });
        }
    }
    Ok(())
}

/// Raw coverage reward: every (learner, content, skill) match of a gap with
/// a covered skill counts once, with multiplicity.
pub fn coverage_reward(
    gaps: &[SkillSet],
    coverage: &[SkillSet],
    assignment: &[Vec<bool>],
) -> Result<f64> {
    check_assignment_dims(gaps, assignment, coverage.len())?;
    let mut total = 0usize;
    for (u, row) in gaps.iter().zip(assignment) {
        for (c, &x) in coverage.iter().zip(row) {
            if x {
                total += u.intersection(*c).count();
            }
        }
    }
    Ok(total as f64)
}

/// Burden: item count plus epsilon-scaled total duration.
pub fn burden_cost(assignment: &[Vec<bool>], durations: &[f64], epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter {
            name: "epsilon",
            reason: "must be strictly positive".into(),
        });
    }
    let mut count = 0usize;
    let mut minutes = 0.0;
    for row in assignment {
        if row.len() != durations.len() {
            return Err(Error::DimensionMismatch {
                axis: "content",
                expected: durations.len(),
                got: row.len(),
            });
        }
        for (j, &x) in row.iter().enumerate() {
            if x {
                count += 1;
                minutes += durations[j];
            }
        }
    }
    Ok(count as f64 + epsilon * minutes)
}

/// Capped coverage: each (learner, gap skill) pair counts at most once.
/// Monotone submodular in the selected set.
pub fn capped_coverage(
    gaps: &[SkillSet],
    coverage: &[SkillSet],
    assignment: &[Vec<bool>],
) -> Result<f64> {
    check_assignment_dims(gaps, assignment, coverage.len())?;
    let mut total = 0usize;
    for (u, row) in gaps.iter().zip(assignment) {
        let covered = coverage
            .iter()
            .zip(row)
            .filter(|(_, &x)| x)
            .fold(SkillSet::empty(), |acc, (c, _)| acc.union(*c));
        total += u.intersection(covered).count();
    }
    Ok(total as f64)
}

/// Single-learner capped coverage over a set of selected content.
pub fn capped_coverage_single(gaps: SkillSet, selected: &[&ContentItem]) -> usize {
    let covered = selected
        .iter()
        .fold(SkillSet::empty(), |acc, c| acc.union(c.coverage));
    gaps.intersection(covered).count()
}
