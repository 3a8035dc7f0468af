//! Seeded generators for synthetic cohorts, item banks, and content pools.
//!
//! Everything here is pure given (spec, seed): per-entity RNG substreams make
//! outputs independent of generation order.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Beta, Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ContentItem, Difficulty, QMatrix, SkillSet};
use crate::psychometrics::{simulate_responses, ItemParamsDINA};
use crate::rng::{substream, Domain};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct CohortSpec {
    pub n_students: usize,
    pub n_items: usize,
    pub n_skills: usize,
    /// Bernoulli mastery probability per (learner, skill).
    pub mastery_rate: f64,
    /// Beta(alpha, beta) prior for item guessing parameters.
    pub guess_prior: (f64, f64),
    /// Beta(alpha, beta) prior for item slip parameters.
    pub slip_prior: (f64, f64),
    pub single_skill_item_fraction: f64,
    pub seed: u64,
}

impl Default for CohortSpec {
    fn default() -> Self {
        CohortSpec {
            n_students: 1000,
            n_items: 60,
            n_skills: 5,
            mastery_rate: 0.6,
            guess_prior: (7.0, 18.0),
            slip_prior: (5.0, 15.0),
            single_skill_item_fraction: 0.6,
            seed: 0,
        }
    }
}

impl CohortSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_students == 0 || self.n_items == 0 || self.n_skills == 0 {
            return Err(Error::InvalidParameter {
                name: "counts",
                reason: "n_students, n_items, n_skills must be positive".into(),
            });
        }
        if self.n_skills > 20 {
            return Err(Error::InvalidParameter {
                name: "n_skills",
                reason: format!("at most 20 supported, got {}", self.n_skills),
            });
        }
        for (name, f) in [
            ("mastery_rate", self.mastery_rate),
            ("single_skill_item_fraction", self.single_skill_item_fraction),
        ] {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::InvalidParameter {
                    name: "fraction",
                    reason: format!("{name} must lie in [0,1], got {f}"),
                });
            }
        }
        for (name, (a, b)) in [("guess_prior", self.guess_prior), ("slip_prior", self.slip_prior)]
        {
            if !(a > 0.0 && b > 0.0) {
                return Err(Error::InvalidParameter {
                    name: "beta_prior",
                    reason: format!("{name} shape parameters must be positive, got ({a},{b})"),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ContentPoolSpec {
    pub n_content: usize,
    pub n_skills: usize,
    /// Log-normal duration law: median minutes and sigma, clipped into
    /// [clip_min, clip_max]. The clip bounds become atoms by design.
    pub duration_median_min: f64,
    pub duration_sigma: f64,
    pub duration_clip: (f64, f64),
    /// Share of basic / medium / hard items; must sum to 1.
    pub difficulty_mix: [f64; 3],
    pub single_skill_fraction: f64,
    /// Require the pool union to cover every skill.
    pub full_coverage: bool,
    /// Number of representation forms; 0 leaves content untagged.
    pub n_forms: usize,
    pub seed: u64,
}

impl Default for ContentPoolSpec {
    fn default() -> Self {
        ContentPoolSpec {
            n_content: 20,
            n_skills: 5,
            duration_median_min: 20.0,
            duration_sigma: 2.0,
            duration_clip: (5.0, 15.0),
            difficulty_mix: [0.3, 0.5, 0.2],
            single_skill_fraction: 0.8,
            full_coverage: true,
            n_forms: 0,
            seed: 0,
        }
    }
}

impl ContentPoolSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_content == 0 || self.n_skills == 0 {
            return Err(Error::InvalidParameter {
                name: "counts",
                reason: "n_content and n_skills must be positive".into(),
            });
        }
        if self.n_skills > 20 {
            return Err(Error::InvalidParameter {
                name: "n_skills",
                reason: format!("at most 20 supported, got {}", self.n_skills),
            });
        }
        let mix_sum: f64 = self.difficulty_mix.iter().sum();
        if (mix_sum - 1.0).abs() > 1e-9 || self.difficulty_mix.iter().any(|&p| p < 0.0) {
            return Err(Error::InvalidParameter {
                name: "difficulty_mix",
                reason: format!("must be nonnegative and sum to 1, got {:?}", self.difficulty_mix),
            });
        }
        if !(0.0..=1.0).contains(&self.single_skill_fraction) {
            return Err(Error::InvalidParameter {
                name: "single_skill_fraction",
                reason: format!("must lie in [0,1], got {}", self.single_skill_fraction),
            });
        }
        if !(self.duration_median_min > 0.0 && self.duration_sigma > 0.0) {
            return Err(Error::InvalidParameter {
                name: "duration",
                reason: "median and sigma must be positive".into(),
            });
        }
        let (lo, hi) = self.duration_clip;
        if !(lo > 0.0 && hi > lo) {
            return Err(Error::InvalidParameter {
                name: "duration_clip",
                reason: format!("need 0 < min < max, got ({lo},{hi})"),
            });
        }
        if self.full_coverage && self.n_content < self.n_skills {
            return Err(Error::InvalidParameter {
                name: "n_content",
                reason: format!(
                    "full coverage of {} skills impossible with {} items",
                    self.n_skills, self.n_content
                ),
            });
        }
        Ok(())
    }
}

/// A fully synthesized cohort: item bank structure, true states, and the
/// simulated response matrix.
#[derive(Debug, Clone)]
pub struct Cohort {
    pub qmatrix: QMatrix,
    pub mastery: Vec<SkillSet>,
    pub item_params: Vec<ItemParamsDINA>,
    pub responses: Vec<Vec<u8>>,
}

/// Integer apportionment by largest remainder; preserves the total exactly.
pub fn largest_remainder(total: usize, shares: &[f64]) -> Vec<usize> {
    let quotas: Vec<f64> = shares.iter().map(|s| s * total as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..shares.len()).collect();
    // Stable by construction: ties go to the earlier share.
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for &i in order.iter().take(total - assigned) {
        counts[i] += 1;
    }
    counts
}

/// Q-matrix with an exact single/multi split and guaranteed column coverage.
pub fn gen_qmatrix(spec: &CohortSpec) -> Result<QMatrix> {
    spec.validate()?;
    let k = spec.n_skills;
    let n = spec.n_items;
    let n_single =
        (spec.single_skill_item_fraction * n as f64).round().min(n as f64) as usize;
    if n_single < n && k < 3 {
        return Err(Error::InvalidParameter {
            name: "n_skills",
            reason: format!("multi-skill items need n_skills >= 3, got {k}"),
        });
    }
    if n < k {
        return Err(Error::CoverageUnsatisfiable((0..k).collect()));
    }
    let mut rows: Vec<SkillSet> = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = substream(spec.seed, Domain::QMatrix, i as u64);
        let size = if i < n_single {
            1
        } else if rng.gen::<bool>() {
            2
        } else {
            3
        };
        let mut skills: Vec<usize> = (0..k).collect();
        skills.shuffle(&mut rng);
        rows.push(SkillSet::from_indices(&skills[..size]));
    }
    repair_column_coverage(&mut rows, k);
    QMatrix::new(k, rows)
}

/// Rewrites rows until every skill appears in at least one row. Donor rows
/// are taken from the most-covered skill so no column drops to zero.
fn repair_column_coverage(rows: &mut [SkillSet], k: usize) {
    loop {
        let mut col = vec![0usize; k];
        for row in rows.iter() {
            for s in row.iter() {
                col[s] += 1;
            }
        }
        let Some(missing) = (0..k).find(|&s| col[s] == 0) else {
            return;
        };
        // Donor skill: highest column count, lowest index on ties.
        let donor = (0..k).max_by_key(|&s| (col[s], usize::MAX - s)).unwrap();
        let row_idx = rows
            .iter()
            .position(|r| r.contains(donor) && !r.contains(missing))
            .expect("donor column is nonempty");
        let mut new_row = rows[row_idx].difference(SkillSet::from_indices(&[donor]));
        new_row.insert(missing);
        rows[row_idx] = new_row;
    }
}

/// True mastery profiles, item parameters from the Beta priors, and the
/// simulated response matrix.
pub fn gen_cohort(spec: &CohortSpec) -> Result<Cohort> {
    spec.validate()?;
    let qmatrix = gen_qmatrix(spec)?;
    let mastery: Vec<SkillSet> = (0..spec.n_students)
        .map(|i| {
            let mut rng = substream(spec.seed, Domain::Mastery, i as u64);
            let flags: Vec<bool> =
                (0..spec.n_skills).map(|_| rng.gen::<f64>() < spec.mastery_rate).collect();
            SkillSet::from_flags(&flags)
        })
        .collect();
    let guess_dist = Beta::new(spec.guess_prior.0, spec.guess_prior.1).map_err(|e| {
        Error::InvalidParameter { name: "guess_prior", reason: e.to_string() }
    })?;
    let slip_dist = Beta::new(spec.slip_prior.0, spec.slip_prior.1).map_err(|e| {
        Error::InvalidParameter { name: "slip_prior", reason: e.to_string() }
    })?;
    let item_params: Vec<ItemParamsDINA> = (0..spec.n_items)
        .map(|j| {
            let mut rng = substream(spec.seed, Domain::DinaParams, j as u64);
            // Redraw on the (rare) non-monotone draw so 1 - s > g holds.
            loop {
                let guess = guess_dist.sample(&mut rng).clamp(1e-6, 1.0 - 1e-6);
                let slip = slip_dist.sample(&mut rng).clamp(1e-6, 1.0 - 1e-6);
                let item = ItemParamsDINA::new(slip, guess)?;
                if item.is_monotone() {
                    return Ok(item);
                }
            }
        })
        .collect::<Result<_>>()?;
    let responses = simulate_responses(&mastery, &qmatrix, &item_params, spec.seed)?;
    Ok(Cohort { qmatrix, mastery, item_params, responses })
}

/// One clipped log-normal duration draw.
fn draw_duration<R: Rng>(spec: &ContentPoolSpec, rng: &mut R) -> f64 {
    let law = LogNormal::new(spec.duration_median_min.ln(), spec.duration_sigma)
        .expect("validated sigma");
    law.sample(rng).clamp(spec.duration_clip.0, spec.duration_clip.1)
}

/// Synthesize a content pool: clipped log-normal durations, an exact
/// difficulty mix, mostly single-skill coverage, and (optionally) a
/// guaranteed full-coverage union.
pub fn gen_content_pool(spec: &ContentPoolSpec) -> Result<Vec<ContentItem>> {
    spec.validate()?;
    let n = spec.n_content;
    let k = spec.n_skills;

    // Difficulty labels: exact counts, then a seeded shuffle over positions.
    let counts = largest_remainder(n, &spec.difficulty_mix);
    let mut levels: Vec<Difficulty> = Vec::with_capacity(n);
    for (lvl, &c) in [Difficulty::Basic, Difficulty::Medium, Difficulty::Hard]
        .iter()
        .zip(&counts)
    {
        levels.extend(std::iter::repeat(*lvl).take(c));
    }
    let mut shuffle_rng = substream(spec.seed, Domain::ContentPool, u64::MAX);
    levels.shuffle(&mut shuffle_rng);

    let n_single = (spec.single_skill_fraction * n as f64).round().min(n as f64) as usize;
    let mut items: Vec<ContentItem> = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = substream(spec.seed, Domain::ContentPool, i as u64);
        let duration = draw_duration(spec, &mut rng);
        let size = if i < n_single {
            1
        } else {
            // Multi-skill content spans 2 or 3 skills (capped by K).
            (if rng.gen::<bool>() { 2 } else { 3 }).min(k)
        };
        let mut skills: Vec<usize> = (0..k).collect();
        skills.shuffle(&mut rng);
        let coverage = SkillSet::from_indices(&skills[..size]);
        let mut item = ContentItem::new(format!("c{i:02}"), coverage, duration, levels[i])?;
        if spec.n_forms > 0 {
            let form = rng.gen_range(0..spec.n_forms);
            let mut tags = vec![false; spec.n_forms];
            tags[form] = true;
            item = item.with_tags(tags);
        }
        items.push(item);
    }

    if spec.full_coverage {
        repair_pool_coverage(&mut items, k)?;
    }
    Ok(items)
}

/// Reassigns single-skill items away from over-covered skills until the
/// pool union spans every skill.
fn repair_pool_coverage(items: &mut [ContentItem], k: usize) -> Result<()> {
    loop {
        let mut col = vec![0usize; k];
        for item in items.iter() {
            for s in item.coverage.iter() {
                col[s] += 1;
            }
        }
        let Some(missing) = (0..k).find(|&s| col[s] == 0) else {
            return Ok(());
        };
        let donor_item = items
            .iter()
            .enumerate()
            .filter(|(_, it)| {
                it.coverage.count() == 1 && col[it.coverage.iter().next().unwrap()] > 1
            })
            .map(|(i, _)| i)
            .next()
            .or_else(|| {
                // Fall back to shrinking a multi-skill item whose every
                // skill is covered elsewhere too.
                items
                    .iter()
                    .position(|it| it.coverage.iter().all(|s| col[s] > 1))
            });
        match donor_item {
            Some(i) => {
                items[i].coverage = SkillSet::from_indices(&[missing]);
            }
            None => {
                let uncovered: Vec<usize> = (0..k).filter(|&s| col[s] == 0).collect();
                return Err(Error::CoverageUnsatisfiable(uncovered));
            }
        }
    }
}
