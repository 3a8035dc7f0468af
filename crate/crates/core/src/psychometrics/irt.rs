//! 3PL item response model and EAP ability estimation.

use serde::{Deserialize, Serialize};

use super::cat::ThetaGrid;
use crate::error::{Error, Result};

/// 3PL item parameters in slope-difficulty form. 2PL items use `c = 0`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct ItemParams3PL {
    /// Discrimination a > 0.
    pub a: f64,
    /// Difficulty b (location of the logistic midpoint).
    pub b: f64,
    /// Pseudo-guessing asymptote, 0 <= c < 1.
    pub c: f64,
}

impl ItemParams3PL {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        if !(a > 0.0) {
            return Err(Error::InvalidParameter {
                name: "a",
                reason: format!("discrimination must be positive, got {a}"),
            });
        }
        if !(0.0..1.0).contains(&c) {
            return Err(Error::InvalidParameter {
                name: "c",
                reason: format!("guessing must lie in [0,1), got {c}"),
            });
        }
        if !b.is_finite() {
            return Err(Error::NonFinite("b"));
        }
        Ok(ItemParams3PL { a, b, c })
    }

    /// Construct from slope-intercept form (a, d): b = -d / a.
    pub fn from_slope_intercept(a: f64, d: f64, c: f64) -> Result<Self> {
        if !(a > 0.0) {
            return Err(Error::InvalidParameter {
                name: "a",
                reason: format!("discrimination must be positive, got {a}"),
            });
        }
        ItemParams3PL::new(a, -d / a, c)
    }
}

fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// P(correct | theta) under the 3PL model.
pub fn p_3pl(theta: f64, item: &ItemParams3PL) -> Result<f64> {
    if !theta.is_finite() {
        return Err(Error::NonFinite("theta"));
    }
    Ok(item.c + (1.0 - item.c) * logistic(item.a * (theta - item.b)))
}

/// Exact 3PL Fisher information at theta.
///
/// I(theta) = a^2 * (Q/P) * ((P - c)/(1 - c))^2, evaluated exactly even when
/// c > 0 (no 2PL shortcut).
pub fn fisher_information(theta: f64, item: &ItemParams3PL) -> f64 {
    let p = item.c + (1.0 - item.c) * logistic(item.a * (theta - item.b));
    let q = 1.0 - p;
    let ratio = (p - item.c) / (1.0 - item.c);
    item.a * item.a * (q / p) * ratio * ratio
}

/// EAP ability estimate over a quadrature grid with a standard-normal prior.
///
/// Returns (theta_hat, posterior standard deviation). Responses pair each
/// administered item's parameters with the observed 0/1 outcome.
pub fn estimate_theta_eap(
    responses: &[(ItemParams3PL, u8)],
    grid: &ThetaGrid,
) -> Result<(f64, f64)> {
    if responses.is_empty() {
        return Err(Error::EmptyInput("responses"));
    }
    let points = grid.points();
    // Work in log space: log prior + log likelihood per grid point.
    let log_post: Vec<f64> = points
        .iter()
        .map(|&theta| {
            let mut lp = -0.5 * theta * theta;
            for (item, y) in responses {
                let p = item.c + (1.0 - item.c) * logistic(item.a * (theta - item.b));
                let p = p.clamp(1e-12, 1.0 - 1e-12);
                lp += if *y == 1 { p.ln() } else { (1.0 - p).ln() };
            }
            lp
        })
        .collect();
    let max_lp = log_post.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = log_post.iter().map(|lp| (lp - max_lp).exp()).collect();
    let norm: f64 = weights.iter().sum();
    let mean: f64 = points
        .iter()
        .zip(&weights)
        .map(|(t, w)| t * w)
        .sum::<f64>()
        / norm;
    let var: f64 = points
        .iter()
        .zip(&weights)
        .map(|(t, w)| (t - mean) * (t - mean) * w)
        .sum::<f64>()
        / norm;
    // Grid resolution bounds the reported SE away from zero.
    let se = var.sqrt().max(grid.step() / 2.0);
    Ok((mean, se))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn p_3pl_at_difficulty_is_midpoint() {
        let item = ItemParams3PL::new(1.3, 0.4, 0.2).unwrap();
        assert_relative_eq!(p_3pl(0.4, &item).unwrap(), 0.6, epsilon = 1e-12);
    }

    #[test]
    fn p_3pl_saturates() {
        let item = ItemParams3PL::new(1.5, -0.2, 0.1).unwrap();
        let theta = item.b + 10.0 / item.a;
        assert!((1.0 - p_3pl(theta, &item).unwrap()).abs() < 1e-4);
    }

    #[test]
    fn p_3pl_slope_intercept_conversion() {
        // a=2.451, d=1.107, c=0 at theta=0: logistic(1.107).
        let item = ItemParams3PL::from_slope_intercept(2.451, 1.107, 0.0).unwrap();
        let expected = 1.0 / (1.0 + (-1.107f64).exp());
        assert_relative_eq!(p_3pl(0.0, &item).unwrap(), expected, epsilon = 1e-12);
    }

    #[test]
    fn p_3pl_strictly_increasing_and_lower_asymptote() {
        let item = ItemParams3PL::new(1.1, 0.3, 0.25).unwrap();
        let mut prev = p_3pl(-6.0, &item).unwrap();
        let mut theta = -6.0 + 0.25;
        while theta <= 6.0 {
            let p = p_3pl(theta, &item).unwrap();
            assert!(p > prev);
            prev = p;
            theta += 0.25;
        }
        // Lower asymptote is exactly c far in the left tail.
        assert_relative_eq!(p_3pl(-50.0, &item).unwrap(), item.c, epsilon = 1e-9);
        assert!(p_3pl(f64::NAN, &item).is_err());
    }

    #[test]
    fn eap_directional_sanity() {
        let grid = ThetaGrid::default();
        let easy: Vec<(ItemParams3PL, u8)> = (0..10)
            .map(|_| (ItemParams3PL::new(1.5, -1.0, 0.0).unwrap(), 1))
            .collect();
        let (theta, se) = estimate_theta_eap(&easy, &grid).unwrap();
        assert!(theta > 0.0);
        assert!(se > 0.0);
    }

    #[test]
    fn eap_symmetric_half_correct_is_near_zero() {
        let grid = ThetaGrid::default();
        let item = ItemParams3PL::new(1.2, 0.0, 0.0).unwrap();
        let responses: Vec<(ItemParams3PL, u8)> =
            (0..10).map(|i| (item, (i % 2) as u8)).collect();
        let (theta, _) = estimate_theta_eap(&responses, &grid).unwrap();
        assert!(theta.abs() < grid.step());
    }

    #[test]
    fn eap_rejects_empty() {
        assert!(estimate_theta_eap(&[], &ThetaGrid::default()).is_err());
    }
}
