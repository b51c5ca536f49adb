//! Exact correlations for the semidisk rule, with a brute-force grid
//! integrator as an independent cross-check.
//!
//! Under the uniform disk measure only the polar angle of the point matters:
//! each response is +1 on an open half-circle of angles, so joint outcomes
//! reduce to arc overlaps. For settings at angular distance Δ the two
//! half-circles overlap on an arc of length π − Δ, giving concordance
//! probability (π − Δ)/(2π) per sign and ⟨S⁽¹⁾S⁽²⁾⟩ = −1 + 4·p₋₋ = 1 − 2Δ/π.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{Direction, Point};
use crate::response::{PreparedSetting, ResponseRule, Sign, StationId};

/// Joint outcome probabilities for one pair of settings: concordance
/// (+,+), (−,−) and discordance (+,−), (−,+).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointStats {
    pub p_pp: f64,
    pub p_pm: f64,
    pub p_mp: f64,
    pub p_mm: f64,
}

impl JointStats {
    pub fn total(&self) -> f64 {
        self.p_pp + self.p_pm + self.p_mp + self.p_mm
    }

    /// ⟨S⁽¹⁾S⁽²⁾⟩ reconstructed from the four cells.
    pub fn correlation(&self) -> f64 {
        self.p_pp + self.p_mm - self.p_pm - self.p_mp
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("grid step must lie in (0, 0.01], got {0}")]
    InvalidGridStep(f64),
}

/// Closed-form joint probabilities: with Δ = angular_distance(a, b),
/// p₋₋ = p₊₊ = (π − Δ)/(2π) and p₊₋ = p₋₊ = Δ/(2π).
pub fn exact_joint(a: Direction, b: Direction) -> JointStats {
    let delta = a.angular_distance(&b);
    let concordant = (PI - delta) / TAU;
    let discordant = delta / TAU;
    JointStats {
        p_pp: concordant,
        p_pm: discordant,
        p_mp: discordant,
        p_mm: concordant,
    }
}

/// Closed-form correlation −1 + 4·p₋₋ = 1 − 2Δ/π.
pub fn exact_corr(a: Direction, b: Direction) -> f64 {
    1.0 - 2.0 * a.angular_distance(&b) / PI
}

/// Brute-force cross-check: tallies the response sign pairs over the lattice
/// of spacing `grid_step` restricted to the disk. Agrees with
/// [`exact_joint`] within 2·grid_step per cell.
pub fn grid_joint(a: Direction, b: Direction, grid_step: f64) -> Result<JointStats, OracleError> {
    if !(grid_step > 0.0 && grid_step <= 0.01) {
        return Err(OracleError::InvalidGridStep(grid_step));
    }
    let resp_a = PreparedSetting::new(a);
    let resp_b = PreparedSetting::new(b);
    let n = (2.0 / grid_step).round() as i64;

    // integer tallies per row, summed exactly, so the result is independent
    // of how rayon partitions the lattice
    let counts = (0..=n)
        .into_par_iter()
        .map(|i| {
            let y = -1.0 + i as f64 * grid_step;
            let mut local = [0u64; 4];
            for j in 0..=n {
                let x = -1.0 + j as f64 * grid_step;
                if x * x + y * y > 1.0 {
                    continue;
                }
                let p = Point::new_unchecked(x, y);
                let cell = match (resp_a.respond(p), resp_b.respond(p)) {
                    (Sign::Plus, Sign::Plus) => 0,
                    (Sign::Plus, Sign::Minus) => 1,
                    (Sign::Minus, Sign::Plus) => 2,
                    (Sign::Minus, Sign::Minus) => 3,
                };
                local[cell] += 1;
            }
            local
        })
        .reduce(
            || [0u64; 4],
            |mut acc, local| {
                for (a, l) in acc.iter_mut().zip(local) {
                    *a += l;
                }
                acc
            },
        );

    let total = counts.iter().sum::<u64>() as f64;
    Ok(JointStats {
        p_pp: counts[0] as f64 / total,
        p_pm: counts[1] as f64 / total,
        p_mp: counts[2] as f64 / total,
        p_mm: counts[3] as f64 / total,
    })
}

/// Same lattice tally, but through an arbitrary response rule. Slower than
/// [`grid_joint`]; meant for plugged-in alternative rules.
pub fn grid_joint_with_rule(
    rule: &(dyn ResponseRule + Sync),
    a: Direction,
    b: Direction,
    grid_step: f64,
) -> Result<JointStats, OracleError> {
    if !(grid_step > 0.0 && grid_step <= 0.01) {
        return Err(OracleError::InvalidGridStep(grid_step));
    }
    let n = (2.0 / grid_step).round() as i64;
    let counts = (0..=n)
        .into_par_iter()
        .map(|i| {
            let y = -1.0 + i as f64 * grid_step;
            let mut local = [0u64; 4];
            for j in 0..=n {
                let x = -1.0 + j as f64 * grid_step;
                if x * x + y * y > 1.0 {
                    continue;
                }
                let p = Point::new_unchecked(x, y);
                let s1 = rule.respond(StationId::Station1, a, p);
                let s2 = rule.respond(StationId::Station2, b, p);
                let cell = match (s1, s2) {
                    (Sign::Plus, Sign::Plus) => 0,
                    (Sign::Plus, Sign::Minus) => 1,
                    (Sign::Minus, Sign::Plus) => 2,
                    (Sign::Minus, Sign::Minus) => 3,
                };
                local[cell] += 1;
            }
            local
        })
        .reduce(
            || [0u64; 4],
            |mut acc, local| {
                for (a, l) in acc.iter_mut().zip(local) {
                    *a += l;
                }
                acc
            },
        );
    let total = counts.iter().sum::<u64>() as f64;
    Ok(JointStats {
        p_pp: counts[0] as f64 / total,
        p_pm: counts[1] as f64 / total,
        p_mp: counts[2] as f64 / total,
        p_mm: counts[3] as f64 / total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::response::SemidiskRule;
    use crate::source;

    fn dir(a: f64) -> Direction {
        Direction::from_radians(a).unwrap()
    }

    #[test]
    fn joint_for_equal_settings() {
        let a = dir(0.7);
        let j = exact_joint(a, a);
        assert_eq!(j.p_mm, 0.5);
        assert_eq!(j.p_pm, 0.0);
        assert!((j.total() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn joint_for_orthogonal_settings() {
        let j = exact_joint(dir(0.0), dir(PI / 2.0));
        for p in [j.p_pp, j.p_pm, j.p_mp, j.p_mm] {
            assert!((p - 0.25).abs() <= 1e-12);
        }
    }

    #[test]
    fn joint_for_table_angles() {
        let j = exact_joint(dir(0.0), dir(0.3141593));
        assert!((j.p_mm - 0.45).abs() < 1e-6, "p_mm = {}", j.p_mm);
        assert!((j.total() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn corr_endpoints() {
        let a = dir(1.234);
        assert_eq!(exact_corr(a, a), 1.0);
        assert_eq!(exact_corr(a, a.reflect()), -1.0);
        assert!((exact_corr(dir(0.0), dir(0.3141593)) - 0.8).abs() < 1e-6);
    }

    #[test]
    fn corr_symmetries() {
        let mut state = 5u64;
        let mut rand_dir = || {
            let (s, bits) = source::prng_next(state);
            state = s;
            dir(source::uniform01(bits) * TAU)
        };
        for _ in 0..200 {
            let (a, b) = (rand_dir(), rand_dir());
            assert_eq!(exact_corr(a, b), exact_corr(b, a));
            assert!((exact_corr(a, b.reflect()) + exact_corr(a, b)).abs() <= 1e-12);
            let e = exact_corr(a, b);
            assert!((-1.0..=1.0).contains(&e));
        }
    }

    #[test]
    fn grid_agrees_for_equal_settings() {
        let a = dir(0.4);
        let j = grid_joint(a, a, 0.002).unwrap();
        assert!(j.p_pm <= 0.002, "p_pm = {}", j.p_pm);
        assert!(j.p_mp <= 0.002);
    }

    #[test]
    fn grid_agrees_with_closed_form() {
        let j = grid_joint(dir(0.0), dir(0.3141593), 0.001).unwrap();
        assert!((j.p_mm - 0.45).abs() <= 0.002, "p_mm = {}", j.p_mm);

        let j = grid_joint(dir(0.0), dir(1.989675), 0.001).unwrap();
        assert!((j.p_mm - 0.18333).abs() <= 0.002, "p_mm = {}", j.p_mm);
    }

    #[test]
    fn grid_matches_rule_path() {
        let (a, b) = (dir(0.3), dir(2.1));
        let fast = grid_joint(a, b, 0.01).unwrap();
        let slow = grid_joint_with_rule(&SemidiskRule, a, b, 0.01).unwrap();
        assert_eq!(fast, slow);
    }

    #[test]
    fn grid_rejects_bad_steps() {
        let a = dir(0.0);
        assert!(matches!(
            grid_joint(a, a, 0.02),
            Err(OracleError::InvalidGridStep(_))
        ));
        assert!(grid_joint(a, a, 0.0).is_err());
        assert!(grid_joint(a, a, -0.001).is_err());
        assert!(grid_joint(a, a, f64::NAN).is_err());
    }

    #[test]
    fn grid_vs_exact_on_random_pairs() {
        let mut state = 2024u64;
        let mut rand_dir = || {
            let (s, bits) = source::prng_next(state);
            state = s;
            dir(source::uniform01(bits) * TAU)
        };
        for _ in 0..10 {
            let (a, b) = (rand_dir(), rand_dir());
            let g = grid_joint(a, b, 0.001).unwrap();
            let e = exact_joint(a, b);
            assert!((g.p_mm - e.p_mm).abs() <= 0.002);
            assert!((exact_corr(a, b) - (-1.0 + 4.0 * g.p_mm)).abs() <= 2e-3);
        }
    }
}
