//! Run orchestration: declarative run configuration, per-learner parallel
//! assignment, report documents, and the pool-size sweep. Every emitted
//! artifact carries the config hash and seed for replay.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feasibility::{
    build_pool, infeasibility_certificate, richness, AdmissiblePool, SimilarityPolicy,
    WindowPolicy,
};
use crate::gradient::{self, CoverageSurrogate, GradientConfig};
use crate::greedy::{self, GreedyConfig};
use crate::hybrid::{choose_solver, solve_hybrid, RegimePolicy, SolverChoice, SolverMode};
use crate::io::config_hash;
use crate::metrics::EvaluationReport;
use crate::model::{
    AssignmentSlate, ContentItem, LearnerState, ObjectiveWeights, PrereqGraph, QMatrix,
    SkillSet,
};
use crate::oracle::OracleLimits;
use crate::psychometrics::{
    estimate_theta_eap, fit_dina_em, run_cat, CatConfig, CatTranscript, DinaEmConfig,
    ItemParams3PL, StopReason,
};
use crate::rng::{substream, Domain};
use crate::synth::{gen_cohort, gen_content_pool, CohortSpec, ContentPoolSpec};

/// Environment variable consulted for the default seed when the config
/// leaves it unset.
pub const SEED_ENV_VAR: &str = "REMEDIA_SEED";

pub fn env_seed() -> Option<u64> {
    std::env::var(SEED_ENV_VAR).ok().and_then(|v| v.parse().ok())
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct GreedyOptions {
    pub fallback_enabled: bool,
    pub max_iterations: Option<usize>,
}

impl Default for GreedyOptions {
    fn default() -> Self {
        GreedyOptions {
            fallback_enabled: true,
            max_iterations: None,
        }
    }
}

/// Gradient solver knobs, minus the shared objective weights and similarity
/// policy (those live at the top level of the run config).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct GradientOptions {
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
}

impl Default for GradientOptions {
    fn default() -> Self {
        let g = GradientConfig::default();
        GradientOptions {
            tau_cov: g.tau_cov,
            coverage_surrogate: g.coverage_surrogate,
            lambda_time: g.lambda_time,
            lambda_card: g.lambda_card,
            lambda_diff: g.lambda_diff,
            lambda_pre: g.lambda_pre,
            lambda_div: g.lambda_div,
            eta_step: g.eta_step,
            grad_tol: g.grad_tol,
            max_iters: g.max_iters,
            round_threshold: g.round_threshold,
        }
    }
}

/// Weights of the two aggregate-penalty ingredients: redundant-coverage
/// incidences and unused repository items.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct PenaltyWeights {
    pub w1: f64,
    pub w2: f64,
}

impl Default for PenaltyWeights {
    fn default() -> Self {
        PenaltyWeights { w1: 1.0, w2: 1.0 }
    }
}

/// Settings for the pool-size sweep.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct CompareOptions {
    pub pool_sizes: Vec<usize>,
    pub n_students: usize,
    pub n_skills: usize,
}

impl Default for CompareOptions {
    fn default() -> Self {
        CompareOptions {
            pool_sizes: vec![5, 10, 15, 20],
            n_students: 1000,
            n_skills: 5,
        }
    }
}

/// The whole declarative run configuration. Unknown keys are rejected on
/// load; defaults are published through the config hash carried by every
/// output artifact.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Per-learner time budget in minutes.
    pub t_max_minutes: f64,
    /// Slate cardinality cap; None means the pool size (no binding cap).
    pub slate_cap: Option<usize>,
    pub weights: ObjectiveWeights,
    pub greedy: GreedyOptions,
    pub gradient: GradientOptions,
    pub similarity: SimilarityPolicy,
    pub window: WindowPolicy,
    pub regime: RegimePolicy,
    pub cat: CatConfig,
    pub em: DinaEmConfig,
    pub oracle: OracleLimits,
    pub penalties: PenaltyWeights,
    pub richness_weights: [f64; 4],
    pub compare: CompareOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: env_seed().unwrap_or(0),
            t_max_minutes: 45.0,
            slate_cap: None,
            weights: ObjectiveWeights::default(),
            greedy: GreedyOptions::default(),
            gradient: GradientOptions::default(),
            similarity: SimilarityPolicy::default(),
            window: WindowPolicy::default(),
            regime: RegimePolicy::default(),
            cat: CatConfig::default(),
            em: DinaEmConfig::default(),
            oracle: OracleLimits::default(),
            penalties: PenaltyWeights::default(),
            richness_weights: [0.25; 4],
            compare: CompareOptions::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_max_minutes > 0.0) {
            return Err(Error::Config(format!(
                "t_max_minutes must be positive, got {}",
                self.t_max_minutes
            )));
        }
        self.similarity.validate()?;
        self.cat.validate()?;
        self.gradient_config().validate()?;
        if self.compare.pool_sizes.is_empty() {
            return Err(Error::Config("compare.pool_sizes must be nonempty".into()));
        }
        Ok(())
    }

    pub fn hash(&self) -> Result<String> {
        config_hash(self)
    }

    pub fn greedy_config(&self) -> GreedyConfig {
        GreedyConfig {
            weights: self.weights.clone(),
            fallback_enabled: self.greedy.fallback_enabled,
            max_iterations: self.greedy.max_iterations,
        }
    }

    pub fn gradient_config(&self) -> GradientConfig {
        let g = &self.gradient;
        GradientConfig {
            weights: self.weights.clone(),
            tau_cov: g.tau_cov,
            coverage_surrogate: g.coverage_surrogate,
            lambda_time: g.lambda_time,
            lambda_card: g.lambda_card,
            lambda_diff: g.lambda_diff,
            lambda_pre: g.lambda_pre,
            lambda_div: g.lambda_div,
            eta_step: g.eta_step,
            grad_tol: g.grad_tol,
            max_iters: g.max_iters,
            round_threshold: g.round_threshold,
            similarity: self.similarity.clone(),
        }
    }

    /// Fill in the policy-derived learner fields: time budget, slate cap
    /// (pool size when unset), and the difficulty window from theta.
    pub fn materialize_learner(
        &self,
        id: impl Into<String>,
        theta: f64,
        mastery: SkillSet,
        n_skills: usize,
        pool_size: usize,
    ) -> LearnerState {
        LearnerState {
            id: id.into(),
            theta,
            mastery,
            n_skills,
            time_budget_minutes: self.t_max_minutes,
            slate_cap: self.slate_cap.unwrap_or_else(|| pool_size.max(1)),
            difficulty_window: self.window.window(theta),
            preferred_level: self.window.preferred(theta),
        }
    }
}

/// One learner's solved slate plus the dispatch decision behind it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LearnerAssignment {
    pub solver: SolverChoice,
    pub rationale: String,
    pub richness: f64,
    #[serde(flatten)]
    pub slate: AssignmentSlate,
}

/// The in-memory result of an assignment run over a cohort.
#[derive(Debug, Clone)]
pub struct AssignRun {
    pub assignments: Vec<LearnerAssignment>,
    pub pools: Vec<AdmissiblePool>,
    /// (learner, skill) pairs no admissible content can cover.
    pub certificate: Vec<(String, usize)>,
}

fn solve_one(
    learner: &LearnerState,
    pool: &AdmissiblePool,
    content: &[ContentItem],
    prereqs: &PrereqGraph,
    config: &RunConfig,
) -> Result<LearnerAssignment> {
    let rho = richness(learner, pool, content, config.richness_weights)?;
    let (choice, rationale) = choose_solver(&rho, &config.regime);
    let greedy_cfg = config.greedy_config();
    let grad_cfg = config.gradient_config();
    let slate = match choice {
        SolverChoice::Greedy => greedy::solve(learner, pool, content, prereqs, &greedy_cfg)?,
        SolverChoice::Gradient => gradient::solve(learner, pool, content, prereqs, &grad_cfg)?,
        SolverChoice::Hybrid => {
            solve_hybrid(learner, pool, content, prereqs, &greedy_cfg, &grad_cfg)?
        }
    };
    Ok(LearnerAssignment {
        solver: choice,
        rationale,
        richness: rho.composite,
        slate,
    })
}

/// Solve every learner in parallel (order-stable) and attach the
/// infeasibility certificate.
pub fn assign_all(
    learners: &[LearnerState],
    content: &[ContentItem],
    prereqs: &PrereqGraph,
    config: &RunConfig,
) -> Result<AssignRun> {
    let pools: Vec<AdmissiblePool> = learners
        .par_iter()
        .map(|l| build_pool(l, content, prereqs, &config.similarity))
        .collect::<Result<_>>()?;
    let assignments: Vec<LearnerAssignment> = learners
        .par_iter()
        .zip(pools.par_iter())
        .map(|(l, p)| solve_one(l, p, content, prereqs, config))
        .collect::<Result<_>>()?;
    let certificate = infeasibility_certificate(learners, &pools, content)?;
    Ok(AssignRun {
        assignments,
        pools,
        certificate,
    })
}

/// Slates artifact: one record per learner with the full audit trace.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SlatesDocument {
    pub config_hash: String,
    pub seed: u64,
    pub solver_mode: SolverMode,
    pub slates: Vec<LearnerAssignment>,
}

pub fn slates_document(run: &AssignRun, config: &RunConfig) -> Result<SlatesDocument> {
    Ok(SlatesDocument {
        config_hash: config.hash()?,
        seed: config.seed,
        solver_mode: config.regime.mode,
        slates: run.assignments.clone(),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct UncoveredPair {
    pub learner_id: String,
    pub skill: usize,
}

/// The repository-insufficiency certificate: gap skills no admissible
/// content covers, per learner. Empty means adequacy is guaranteed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SlackReport {
    pub config_hash: String,
    pub seed: u64,
    pub uncovered: Vec<UncoveredPair>,
}

pub fn slack_report(run: &AssignRun, config: &RunConfig) -> Result<SlackReport> {
    Ok(SlackReport {
        config_hash: config.hash()?,
        seed: config.seed,
        uncovered: run
            .certificate
            .iter()
            .map(|(learner_id, skill)| UncoveredPair {
                learner_id: learner_id.clone(),
                skill: *skill,
            })
            .collect(),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluationDocument {
    pub config_hash: String,
    pub seed: u64,
    pub report: EvaluationReport,
}

pub fn evaluate_run(
    slates: &[AssignmentSlate],
    learners: &[LearnerState],
    content: &[ContentItem],
    config: &RunConfig,
) -> Result<EvaluationDocument> {
    Ok(EvaluationDocument {
        config_hash: config.hash()?,
        seed: config.seed,
        report: EvaluationReport::compute(
            slates,
            learners,
            content,
            config.penalties.w1,
            config.penalties.w2,
        )?,
    })
}

/// Flat one-row CSV of the headline metrics, for spreadsheets.
pub fn write_evaluation_csv(path: &std::path::Path, doc: &EvaluationDocument) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record([
        "config_hash",
        "seed",
        "satisfactory_rate",
        "gain_decay_mean",
        "gain_decay_sd",
        "utility_mean",
        "utility_sd",
        "total_penalty",
        "fully_covered",
        "over_covered",
        "unsatisfied",
        "no_gap_learners",
        "non_used_content",
        "unique_content_assigned",
    ])?;
    let r = &doc.report;
    writer.write_record([
        doc.config_hash.clone(),
        doc.seed.to_string(),
        r.satisfactory_rate.to_string(),
        r.gain_decay_mean.to_string(),
        r.gain_decay_sd.to_string(),
        r.utility_mean.to_string(),
        r.utility_sd.to_string(),
        r.total_penalty.to_string(),
        r.fully_covered.to_string(),
        r.over_covered.to_string(),
        r.unsatisfied.to_string(),
        r.no_gap_learners.to_string(),
        r.non_used_content.to_string(),
        r.unique_content_assigned.to_string(),
    ])?;
    writer.flush()?;
    Ok(())
}

/// One row of the pool-size sweep table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompareRow {
    pub config_hash: String,
    pub seed: u64,
    pub pool_size: usize,
    pub solver: String,
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
}

/// Sweep: one simulated cohort, one synthesized pool per size, both solvers
/// on each pool. Rows come out sorted by (pool_size, solver).
pub fn compare_run(config: &RunConfig) -> Result<Vec<CompareRow>> {
    config.validate()?;
    let hash = config.hash()?;
    let cohort_spec = CohortSpec {
        n_students: config.compare.n_students,
        n_skills: config.compare.n_skills,
        seed: config.seed,
        ..Default::default()
    };
    let cohort = gen_cohort(&cohort_spec)?;
    let prereqs = PrereqGraph::empty();

    let mut rows = Vec::new();
    for &pool_size in &config.compare.pool_sizes {
        let pool_spec = ContentPoolSpec {
            n_content: pool_size,
            n_skills: config.compare.n_skills,
            seed: config.seed,
            ..Default::default()
        };
        let content = gen_content_pool(&pool_spec)?;
        let learners: Vec<LearnerState> = cohort
            .mastery
            .iter()
            .enumerate()
            .map(|(i, &mastery)| {
                config.materialize_learner(
                    format!("s{i:04}"),
                    0.0,
                    mastery,
                    config.compare.n_skills,
                    pool_size,
                )
            })
            .collect();
        let pools: Vec<AdmissiblePool> = learners
            .par_iter()
            .map(|l| build_pool(l, &content, &prereqs, &config.similarity))
            .collect::<Result<_>>()?;

        for solver in ["gh", "gd"] {
            let slates: Vec<AssignmentSlate> = learners
                .par_iter()
                .zip(pools.par_iter())
                .map(|(l, p)| match solver {
                    "gh" => greedy::solve(l, p, &content, &prereqs, &config.greedy_config()),
                    _ => gradient::solve(l, p, &content, &prereqs, &config.gradient_config()),
                })
                .collect::<Result<_>>()?;
            let report = EvaluationReport::compute(
                &slates,
                &learners,
                &content,
                config.penalties.w1,
                config.penalties.w2,
            )?;
            rows.push(CompareRow {
                config_hash: hash.clone(),
                seed: config.seed,
                pool_size,
                solver: solver.to_string(),
                satisfactory_rate: report.satisfactory_rate,
                gain_decay_mean: report.gain_decay_mean,
                gain_decay_sd: report.gain_decay_sd,
                utility_mean: report.utility_mean,
                utility_sd: report.utility_sd,
                total_penalty: report.total_penalty,
                fully_covered: report.fully_covered,
                over_covered: report.over_covered,
                unsatisfied: report.unsatisfied,
                no_gap_learners: report.no_gap_learners,
                non_used_content: report.non_used_content,
            });
        }
    }
    Ok(rows)
}

pub fn write_compare_csv(path: &std::path::Path, rows: &[CompareRow]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

/// Skill-diagnosis artifact: fitted item parameters, MAP profiles, and
/// optional per-learner ability estimates when 3PL parameters are supplied.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagnoseDocument {
    pub config_hash: String,
    pub seed: u64,
    pub learner_ids: Vec<String>,
    pub map_profiles: Vec<SkillSet>,
    pub item_ids: Vec<String>,
    pub slip: Vec<f64>,
    pub guess: Vec<f64>,
    pub log_likelihood: Vec<f64>,
    pub flagged_items: Vec<usize>,
    /// (theta_hat, se) per learner, when 3PL parameters were supplied.
    pub theta: Option<Vec<(f64, f64)>>,
}

pub fn diagnose_run(
    learner_ids: &[String],
    item_ids: &[String],
    responses: &[Vec<u8>],
    qmatrix: &QMatrix,
    irt_params: Option<&[ItemParams3PL]>,
    config: &RunConfig,
) -> Result<DiagnoseDocument> {
    let fit = fit_dina_em(responses, qmatrix, &config.em)?;
    let theta = irt_params
        .map(|params| {
            if params.len() != qmatrix.n_items() {
                return Err(Error::DimensionMismatch {
                    axis: "items",
                    expected: qmatrix.n_items(),
                    got: params.len(),
                });
            }
            responses
                .iter()
                .map(|row| {
                    let paired: Vec<(ItemParams3PL, u8)> =
                        params.iter().copied().zip(row.iter().copied()).collect();
                    estimate_theta_eap(&paired, &config.cat.theta_grid)
                })
                .collect::<Result<Vec<_>>>()
        })
        .transpose()?;
    Ok(DiagnoseDocument {
        config_hash: config.hash()?,
        seed: config.seed,
        learner_ids: learner_ids.to_vec(),
        map_profiles: fit.map_profiles,
        item_ids: item_ids.to_vec(),
        slip: fit.params.iter().map(|p| p.slip).collect(),
        guess: fit.params.iter().map(|p| p.guess).collect(),
        log_likelihood: fit.log_likelihood,
        flagged_items: fit.flagged_items,
        theta,
    })
}

/// Adaptive-testing simulation artifact.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CatSimDocument {
    pub config_hash: String,
    pub seed: u64,
    pub theta_true: Vec<f64>,
    pub transcripts: Vec<CatTranscript>,
    pub mean_length: f64,
    pub stopped_by_se: usize,
    pub stopped_by_max_items: usize,
    pub stopped_by_exhaustion: usize,
}

/// Simulate `n_learners` adaptive sessions against a fixed bank, with true
/// abilities drawn standard-normal from a dedicated substream.
pub fn cat_sim_run(
    bank: &[ItemParams3PL],
    n_learners: usize,
    config: &RunConfig,
) -> Result<CatSimDocument> {
    if n_learners == 0 {
        return Err(Error::EmptyInput("n_learners"));
    }
    let theta_true: Vec<f64> = (0..n_learners)
        .map(|i| {
            let mut rng = substream(config.seed, Domain::Instance, i as u64);
            rng.sample(StandardNormal)
        })
        .collect();
    let transcripts: Vec<CatTranscript> = theta_true
        .par_iter()
        .enumerate()
        .map(|(i, &theta)| run_cat(theta, bank, &config.cat, config.seed, i as u64))
        .collect::<Result<_>>()?;
    let mean_length = transcripts.iter().map(|t| t.administered.len() as f64).sum::<f64>()
        / n_learners as f64;
    let count = |r: StopReason| transcripts.iter().filter(|t| t.stop_reason == r).count();
    Ok(CatSimDocument {
        config_hash: config.hash()?,
        seed: config.seed,
        theta_true,
        mean_length,
        stopped_by_se: count(StopReason::SeThreshold),
        stopped_by_max_items: count(StopReason::MaxItems),
        stopped_by_exhaustion: count(StopReason::BankExhausted),
        transcripts,
    })
}
