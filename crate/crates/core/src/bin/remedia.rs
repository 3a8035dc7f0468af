//! Command-line front end: synthesis, diagnosis, adaptive-testing
//! simulation, slate assignment, evaluation, the pool-size sweep, and the
//! exact baseline. Failures exit nonzero with a machine-readable error JSON
//! on stderr.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use remedia_core::error::{Error, Result};
use remedia_core::feasibility::build_pool;
use remedia_core::hybrid::SolverMode;
use remedia_core::io;
use remedia_core::model::{ContentItem, LearnerState, PrereqGraph};
use remedia_core::oracle::solve_exact;
use remedia_core::pipeline::{
    self, assign_all, cat_sim_run, compare_run, diagnose_run, evaluate_run, RunConfig,
};
use remedia_core::psychometrics::ItemParams3PL;
use remedia_core::synth::{gen_cohort, gen_content_pool, CohortSpec, ContentPoolSpec};

#[derive(Parser)]
#[command(
    name = "remedia",
    about = "Remedial content assignment: diagnosis, solvers, and evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonOpts {
    /// Run configuration file (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed override (beats the config file and the environment).
    #[arg(long, global = true)]
    seed: Option<u64>,
}

impl CommonOpts {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Auto,
    Greedy,
    Gd,
    Hybrid,
}

impl From<SolverArg> for SolverMode {
    fn from(s: SolverArg) -> Self {
        match s {
            SolverArg::Auto => SolverMode::Auto,
            SolverArg::Greedy => SolverMode::ForceGreedy,
            SolverArg::Gd => SolverMode::ForceGradient,
            SolverArg::Hybrid => SolverMode::ForceHybrid,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a simulated cohort: Q-matrix, item parameters, responses,
    /// and true mastery profiles.
    SynthCohort {
        #[command(flatten)]
        common: CommonOpts,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 1000)]
        students: usize,
        #[arg(long, default_value_t = 60)]
        items: usize,
        #[arg(long, default_value_t = 5)]
        skills: usize,
    },
    /// Generate a synthetic content pool CSV.
    SynthContent {
        #[command(flatten)]
        common: CommonOpts,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 20)]
        n: usize,
        #[arg(long, default_value_t = 5)]
        skills: usize,
        /// Representation forms; 0 leaves content untagged.
        #[arg(long, default_value_t = 0)]
        forms: usize,
    },
    /// Fit the conjunctive diagnosis model by EM and (optionally) estimate
    /// ability from supplied 3PL item parameters.
    Diagnose {
        #[command(flatten)]
        common: CommonOpts,
        #[arg(long)]
        responses: PathBuf,
        #[arg(long)]
        qmatrix: PathBuf,
        #[arg(long)]
        item_params: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Also write a learners CSV (MAP mastery + ability estimate).
        #[arg(long)]
        learners_out: Option<PathBuf>,
    },
    /// Simulate adaptive testing sessions against a 3PL item bank.
    CatSim {
        #[command(flatten)]
        common: CommonOpts,
        #[arg(long)]
        item_params: PathBuf,
        #[arg(long, default_value_t = 200)]
        learners: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve one slate per learner; writes slates.json and
    /// slack_report.json into --out-dir.
    Assign {
        #[command(flatten)]
        common: CommonOpts,
        #[arg(long)]
        content: PathBuf,
        #[arg(long)]
        learners: PathBuf,
        #[arg(long)]
        prereqs: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = SolverArg::Auto)]
        solver: SolverArg,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Score an existing slates.json against its cohort and content.
    Evaluate {
        #[command(flatten)]
        common: CommonOpts,
        #[arg(long)]
        content: PathBuf,
        #[arg(long)]
        learners: PathBuf,
        #[arg(long)]
        slates: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Optional flat CSV of the headline metrics.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Sweep pool sizes with both solvers and emit the metrics CSV.
    Compare {
        #[command(flatten)]
        common: CommonOpts,
        #[arg(long)]
        out: PathBuf,
    },
    /// Exact subset-enumeration baseline (small pools only).
    Oracle {
        #[command(flatten)]
        common: CommonOpts,
        #[arg(long)]
        content: PathBuf,
        #[arg(long)]
        learners: PathBuf,
        #[arg(long)]
        prereqs: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_learners(
    path: &Path,
    content: &[ContentItem],
    cfg: &RunConfig,
) -> Result<Vec<LearnerState>> {
    let rows = io::load_learners_csv(path)?;
    Ok(rows
        .into_iter()
        .map(|(id, theta, mastery, n_skills)| {
            cfg.materialize_learner(id, theta, mastery, n_skills, content.len())
        })
        .collect())
}

fn load_prereqs(path: &Option<PathBuf>) -> Result<PrereqGraph> {
    match path {
        Some(p) => io::load_prereqs_csv(p),
        None => Ok(PrereqGraph::empty()),
    }
}

fn load_irt_bank(path: &Path) -> Result<Vec<ItemParams3PL>> {
    let records = io::load_item_params_csv(path)?;
    records
        .iter()
        .map(|r| {
            r.irt.ok_or_else(|| Error::Config(format!(
                "item `{}` has no a/d columns; the 3PL bank requires them",
                r.item_id
            )))
        })
        .collect()
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::SynthCohort {
            common,
            out_dir,
            students,
            items,
            skills,
        } => {
            let cfg = common.load()?;
            let spec = CohortSpec {
                n_students: students,
                n_items: items,
                n_skills: skills,
                seed: cfg.seed,
                ..Default::default()
            };
            let cohort = gen_cohort(&spec)?;
            std::fs::create_dir_all(&out_dir)?;
            let item_ids: Vec<String> = (0..items).map(|i| format!("i{i:02}")).collect();
            let learner_ids: Vec<String> = (0..students).map(|i| format!("s{i:04}")).collect();
            io::write_qmatrix_csv(&out_dir.join("qmatrix.csv"), &item_ids, &cohort.qmatrix)?;
            io::write_responses_csv(
                &out_dir.join("responses.csv"),
                &learner_ids,
                &item_ids,
                &cohort.responses,
            )?;
            let params: Vec<io::ItemParamsRecord> = item_ids
                .iter()
                .zip(&cohort.item_params)
                .map(|(id, p)| io::ItemParamsRecord {
                    item_id: id.clone(),
                    irt: None,
                    dina: Some(*p),
                })
                .collect();
            io::write_item_params_csv(&out_dir.join("item_params.csv"), &params)?;
            let learners: Vec<LearnerState> = learner_ids
                .iter()
                .zip(&cohort.mastery)
                .map(|(id, &m)| cfg.materialize_learner(id.clone(), 0.0, m, skills, 1))
                .collect();
            io::write_learners_csv(&out_dir.join("learners_true.csv"), &learners)?;
            io::write_json(
                &out_dir.join("manifest.json"),
                &serde_json::json!({
                    "config_hash": cfg.hash()?,
                    "seed": cfg.seed,
                    "spec": spec,
                }),
            )?;
            Ok(())
        }
        Command::SynthContent {
            common,
            out,
            n,
            skills,
            forms,
        } => {
            let cfg = common.load()?;
            let spec = ContentPoolSpec {
                n_content: n,
                n_skills: skills,
                n_forms: forms,
                seed: cfg.seed,
                ..Default::default()
            };
            let pool = gen_content_pool(&spec)?;
            io::write_content_csv(&out, &pool, skills)?;
            io::write_json(
                &out.with_extension("manifest.json"),
                &serde_json::json!({
                    "config_hash": cfg.hash()?,
                    "seed": cfg.seed,
                    "spec": spec,
                }),
            )?;
            Ok(())
        }
        Command::Diagnose {
            common,
            responses,
            qmatrix,
            item_params,
            out,
            learners_out,
        } => {
            let cfg = common.load()?;
            let (learner_ids, item_ids, matrix) = io::load_responses_csv(&responses)?;
            let (q_item_ids, q) = io::load_qmatrix_csv(&qmatrix)?;
            if q_item_ids != item_ids {
                return Err(Error::Config(
                    "response columns and q-matrix rows name different items".into(),
                ));
            }
            let bank = item_params.as_deref().map(load_irt_bank).transpose()?;
            let doc = diagnose_run(
                &learner_ids,
                &item_ids,
                &matrix,
                &q,
                bank.as_deref(),
                &cfg,
            )?;
            io::write_json(&out, &doc)?;
            if let Some(path) = learners_out {
                let learners: Vec<LearnerState> = doc
                    .learner_ids
                    .iter()
                    .enumerate()
                    .map(|(i, id)| {
                        let theta = doc.theta.as_ref().map(|t| t[i].0).unwrap_or(0.0);
                        cfg.materialize_learner(
                            id.clone(),
                            theta,
                            doc.map_profiles[i],
                            q.n_skills(),
                            1,
                        )
                    })
                    .collect();
                io::write_learners_csv(&path, &learners)?;
            }
            Ok(())
        }
        Command::CatSim {
            common,
            item_params,
            learners,
            out,
        } => {
            let cfg = common.load()?;
            let bank = load_irt_bank(&item_params)?;
            let doc = cat_sim_run(&bank, learners, &cfg)?;
            io::write_json(&out, &doc)?;
            Ok(())
        }
        Command::Assign {
            common,
            content,
            learners,
            prereqs,
            solver,
            out_dir,
        } => {
            let mut cfg = common.load()?;
            cfg.regime.mode = SolverMode::from(solver);
            let pool = io::load_content_csv(&content)?;
            let cohort = load_learners(&learners, &pool, &cfg)?;
            let graph = load_prereqs(&prereqs)?;
            let run = assign_all(&cohort, &pool, &graph, &cfg)?;
            std::fs::create_dir_all(&out_dir)?;
            io::write_json(
                &out_dir.join("slates.json"),
                &pipeline::slates_document(&run, &cfg)?,
            )?;
            io::write_json(
                &out_dir.join("slack_report.json"),
                &pipeline::slack_report(&run, &cfg)?,
            )?;
            Ok(())
        }
        Command::Evaluate {
            common,
            content,
            learners,
            slates,
            out,
            csv,
        } => {
            let cfg = common.load()?;
            let pool = io::load_content_csv(&content)?;
            let cohort = load_learners(&learners, &pool, &cfg)?;
            let text = std::fs::read_to_string(&slates)?;
            let doc: pipeline::SlatesDocument = serde_json::from_str(&text)?;
            let slate_vec: Vec<_> = doc.slates.into_iter().map(|a| a.slate).collect();
            let report = evaluate_run(&slate_vec, &cohort, &pool, &cfg)?;
            io::write_json(&out, &report)?;
            if let Some(path) = csv {
                pipeline::write_evaluation_csv(&path, &report)?;
            }
            Ok(())
        }
        Command::Compare { common, out } => {
            let cfg = common.load()?;
            let rows = compare_run(&cfg)?;
            pipeline::write_compare_csv(&out, &rows)?;
            Ok(())
        }
        Command::Oracle {
            common,
            content,
            learners,
            prereqs,
            out,
        } => {
            let cfg = common.load()?;
            let pool = io::load_content_csv(&content)?;
            let cohort = load_learners(&learners, &pool, &cfg)?;
            let graph = load_prereqs(&prereqs)?;
            let mut results = Vec::new();
            for learner in &cohort {
                let admissible = build_pool(learner, &pool, &graph, &cfg.similarity)?;
                let (slate, z) = solve_exact(
                    learner,
                    &admissible,
                    &pool,
                    &graph,
                    &cfg.weights,
                    &cfg.similarity,
                    &cfg.oracle,
                )?;
                results.push(serde_json::json!({
                    "learner_id": learner.id,
                    "selected": slate.selected,
                    "total_minutes": slate.total_minutes,
                    "slack": slate.slack,
                    "objective": z,
                }));
            }
            io::write_json(
                &out,
                &serde_json::json!({
                    "config_hash": cfg.hash()?,
                    "seed": cfg.seed,
                    "results": results,
                }),
            )?;
            Ok(())
        }
    }
}

/// Stable machine-readable tag per error variant.
fn error_kind(err: &Error) -> &'static str {
    match err {
        Error::DimensionMismatch { .. } => "dimension_mismatch",
        Error::InvalidParameter { .. } => "invalid_parameter",
        Error::NonFinite(_) => "non_finite",
        Error::EmptyInput(_) => "empty_input",
        Error::BankExhausted => "bank_exhausted",
        Error::CoverageUnsatisfiable(_) => "coverage_unsatisfiable",
        Error::PoolTooLarge { .. } => "pool_too_large",
        Error::CyclicPrereqs(_) => "cyclic_prereqs",
        Error::NonFiniteLoss(_) => "non_finite_loss",
        Error::Parse { .. } => "parse",
        Error::Config(_) => "config",
        Error::Io(_) => "io",
        Error::Csv(_) => "csv",
        Error::Json(_) => "json",
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli.command) {
        let payload = serde_json::json!({
            "error": {
                "kind": error_kind(&err),
                "message": err.to_string(),
            }
        });
        eprintln!("{payload}");
        std::process::exit(1);
    }
}
