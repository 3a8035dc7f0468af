//! Adaptive testing loop: information-maximizing item selection with an
//! SE-threshold stopping rule.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::irt::{estimate_theta_eap, fisher_information, p_3pl, ItemParams3PL};
use crate::error::{Error, Result};
use crate::rng::{substream, Domain};

/// Quadrature grid for EAP estimation.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ThetaGrid {
    pub min: f64,
    pub max: f64,
    pub n_points: usize,
}

impl Default for ThetaGrid {
    fn default() -> Self {
        ThetaGrid {
            min: -4.0,
            max: 4.0,
            n_points: 61,
        }
    }
}

impl ThetaGrid {
    pub fn points(&self) -> Vec<f64> {
        let step = self.step();
        (0..self.n_points).map(|i| self.min + step * i as f64).collect()
    }

    pub fn step(&self) -> f64 {
        if self.n_points <= 1 {
            return 0.0;
        }
        (self.max - self.min) / (self.n_points - 1) as f64
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct CatConfig {
    pub se_threshold: f64,
    pub max_items: usize,
    pub theta_grid: ThetaGrid,
}

impl Default for CatConfig {
    fn default() -> Self {
        CatConfig {
            se_threshold: 0.2,
            max_items: 30,
            theta_grid: ThetaGrid::default(),
        }
    }
}

impl CatConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.se_threshold > 0.0) {
            return Err(Error::InvalidParameter {
                name: "se_threshold",
                reason: "must be positive".into(),
            });
        }
        if self.max_items == 0 {
            return Err(Error::InvalidParameter {
                name: "max_items",
                reason: "must be at least 1".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    SeThreshold,
    MaxItems,
    BankExhausted,
}

/// Replayable record of one adaptive testing session.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CatTranscript {
    pub administered: Vec<usize>,
    pub responses: Vec<u8>,
    /// (theta_hat, se) after each administered item.
    pub theta_trajectory: Vec<(f64, f64)>,
    pub stop_reason: StopReason,
}

impl CatTranscript {
    pub fn final_estimate(&self) -> Option<(f64, f64)> {
        self.theta_trajectory.last().copied()
    }
}

/// Next item: argmax of Fisher information at the current estimate among
/// unadministered items, ties broken toward the lowest item index.
pub fn select_next_item(
    theta_hat: f64,
    administered: &[usize],
    bank: &[ItemParams3PL],
) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (j, item) in bank.iter().enumerate() {
        if administered.contains(&j) {
            continue;
        }
        let info = fisher_information(theta_hat, item);
        match best {
            Some((_, bi)) if info <= bi => {}
            _ => best = Some((j, info)),
        }
    }
    best.map(|(j, _)| j).ok_or(Error::BankExhausted)
}

/// Run one adaptive testing session against a simulated examinee with the
/// given true ability. Stops at the first of: SE at or below threshold,
/// max_items administered, bank exhausted.
pub fn run_cat(
    theta_true: f64,
    bank: &[ItemParams3PL],
    config: &CatConfig,
    seed: u64,
    learner_index: u64,
) -> Result<CatTranscript> {
    config.validate()?;
    if bank.is_empty() {
        return Err(Error::EmptyInput("bank"));
    }
    let mut rng = substream(seed, Domain::Cat, learner_index);
    let mut administered: Vec<usize> = Vec::new();
    let mut responses: Vec<(ItemParams3PL, u8)> = Vec::new();
    let mut raw_responses: Vec<u8> = Vec::new();
    let mut trajectory: Vec<(f64, f64)> = Vec::new();
    let mut theta_hat = 0.0;

    loop {
        let j = match select_next_item(theta_hat, &administered, bank) {
            Ok(j) => j,
            Err(Error::BankExhausted) => {
                return Ok(CatTranscript {
                    administered,
                    responses: raw_responses,
                    theta_trajectory: trajectory,
                    stop_reason: StopReason::BankExhausted,
                })
            }
            Err(e) => return Err(e),
        };
        administered.push(j);
        let p = p_3pl(theta_true, &bank[j])?;
        let y = u8::from(rng.gen::<f64>() < p);
        raw_responses.push(y);
        responses.push((bank[j], y));

        let (hat, se) = estimate_theta_eap(&responses, &config.theta_grid)?;
        theta_hat = hat;
        trajectory.push((hat, se));

        if se <= config.se_threshold {
            return Ok(CatTranscript {
                administered,
                responses: raw_responses,
                theta_trajectory: trajectory,
                stop_reason: StopReason::SeThreshold,
            });
        }
        if administered.len() >= config.max_items {
            return Ok(CatTranscript {
                administered,
                responses: raw_responses,
                theta_trajectory: trajectory,
                stop_reason: StopReason::MaxItems,
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bank(n: usize) -> Vec<ItemParams3PL> {
        (0..n)
            .map(|i| {
                let b = -2.0 + 4.0 * (i as f64) / (n.max(2) - 1) as f64;
                ItemParams3PL::new(2.5 + 0.1 * (i % 7) as f64, b, 0.0).unwrap()
            })
            .collect()
    }

    #[test]
    fn select_single_item_bank() {
        let b = bank(1);
        assert_eq!(select_next_item(0.0, &[], &b).unwrap(), 0);
        assert!(matches!(
            select_next_item(0.0, &[0], &b),
            Err(Error::BankExhausted)
        ));
    }

    #[test]
    fn select_prefers_matched_difficulty_when_c_zero() {
        // c=0, equal a: information peaks at b = theta.
        let b = vec![
            ItemParams3PL::new(1.2, 0.5, 0.0).unwrap(),
            ItemParams3PL::new(1.2, 2.5, 0.0).unwrap(),
        ];
        assert_eq!(select_next_item(0.5, &[], &b).unwrap(), 0);
    }

    #[test]
    fn select_matches_exhaustive_scan() {
        let b: Vec<ItemParams3PL> = (0..12)
            .map(|i| {
                ItemParams3PL::new(
                    0.5 + 0.2 * (i % 5) as f64,
                    -1.5 + 0.3 * i as f64,
                    0.05 * (i % 4) as f64,
                )
                .unwrap()
            })
            .collect();
        for theta in [-1.5, 0.0, 0.8] {
            let administered = vec![2, 5];
            let picked = select_next_item(theta, &administered, &b).unwrap();
            let best = (0..b.len())
                .filter(|j| !administered.contains(j))
                .max_by(|&x, &y| {
                    fisher_information(theta, &b[x])
                        .partial_cmp(&fisher_information(theta, &b[y]))
                        .unwrap()
                })
                .unwrap();
            assert_eq!(
                fisher_information(theta, &b[picked]),
                fisher_information(theta, &b[best])
            );
        }
    }

    #[test]
    fn cat_stops_at_max_items() {
        let cfg = CatConfig {
            max_items: 1,
            ..Default::default()
        };
        let t = run_cat(0.3, &bank(10), &cfg, 1, 0).unwrap();
        assert_eq!(t.administered.len(), 1);
        assert_eq!(t.stop_reason, StopReason::MaxItems);
    }

    #[test]
    fn cat_stops_immediately_on_huge_threshold() {
        let cfg = CatConfig {
            se_threshold: 100.0,
            ..Default::default()
        };
        let t = run_cat(0.0, &bank(10), &cfg, 1, 0).unwrap();
        assert_eq!(t.administered.len(), 1);
        assert_eq!(t.stop_reason, StopReason::SeThreshold);
    }

    #[test]
    fn cat_deterministic_for_seed() {
        let cfg = CatConfig::default();
        let a = run_cat(0.7, &bank(60), &cfg, 42, 3).unwrap();
        let b = run_cat(0.7, &bank(60), &cfg, 42, 3).unwrap();
        assert_eq!(a.administered, b.administered);
        assert_eq!(a.responses, b.responses);
        assert_eq!(a.theta_trajectory, b.theta_trajectory);
    }

    #[test]
    fn cat_mean_length_below_max_on_default_config() {
        let cfg = CatConfig::default();
        let b = bank(60);
        let mut total = 0usize;
        for seed in 0..200u64 {
            let t = run_cat(0.0, &b, &cfg, seed, seed).unwrap();
            assert!(t.administered.len() <= cfg.max_items);
            total += t.administered.len();
        }
        let mean = total as f64 / 200.0;
        assert!(mean < 30.0, "mean administered = {mean}");
    }
}
