//! Planar primitives: points of the closed unit disk, directions on the
//! circle, the clockwise rotation matrix and reflection through the origin.

use std::f64::consts::{PI, TAU};

use thiserror::Error;

/// Slack allowed on the squared norm when testing disk membership.
pub const DISK_EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("{name} is not finite: {value}")]
    NonFinite { name: &'static str, value: f64 },
    #[error("point ({x}, {y}) lies outside the closed unit disk (x^2+y^2 = {norm_sq})")]
    OutsideDisk { x: f64, y: f64, norm_sq: f64 },
}

/// A point of the closed unit disk. One point plays the role of one emitted
/// pair, shared by both stations; it is the hidden parameter of the model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    x: f64,
    y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    /// Checked constructor: coordinates must be finite and satisfy
    /// x² + y² ≤ 1 + [`DISK_EPS`].
    pub fn new(x: f64, y: f64) -> Result<Self, GeometryError> {
        if !x.is_finite() {
            return Err(GeometryError::NonFinite { name: "x", value: x });
        }
        if !y.is_finite() {
            return Err(GeometryError::NonFinite { name: "y", value: y });
        }
        let norm_sq = x * x + y * y;
        if norm_sq > 1.0 + DISK_EPS {
            return Err(GeometryError::OutsideDisk { x, y, norm_sq });
        }
        Ok(Point { x, y })
    }

    /// Used where the coordinates are already known to lie in the disk up to
    /// rounding (rotation output).
    pub(crate) fn new_unchecked(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn norm_sq(&self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }
}

/// A measurement setting: a unit vector stored by its canonical angle in
/// [0, 2π), measured counterclockwise from the positive x-axis.
///
/// Internally the angle is kept as a half-circle angle in [0, π) plus a
/// lower-half flag, so that reflection through the origin is a bit flip and
/// therefore an exact involution (adding and subtracting π in floating point
/// is not).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction {
    half_angle: f64,
    lower: bool,
}

impl Direction {
    /// Canonicalizes an arbitrary finite angle into [0, 2π).
    pub fn from_radians(angle_rad: f64) -> Result<Self, GeometryError> {
        if !angle_rad.is_finite() {
            return Err(GeometryError::NonFinite {
                name: "angle_rad",
                value: angle_rad,
            });
        }
        let mut a = angle_rad.rem_euclid(TAU);
        if a >= TAU {
            // rem_euclid of a tiny negative angle can round up to 2π itself
            a = 0.0;
        }
        Ok(if a < PI {
            Direction {
                half_angle: a,
                lower: false,
            }
        } else {
            // exact for a in [π, 2π) by the Sterbenz lemma
            Direction {
                half_angle: a - PI,
                lower: true,
            }
        })
    }

    /// Canonical angle in [0, 2π).
    pub fn angle_rad(&self) -> f64 {
        if self.lower {
            let a = self.half_angle + PI;
            // half_angle one ulp below π can round the sum up to exactly 2π
            if a >= TAU {
                TAU.next_down()
            } else {
                a
            }
        } else {
            self.half_angle
        }
    }

    /// Whether the angle lies in [0, π).
    pub fn is_upper_half(&self) -> bool {
        !self.lower
    }

    /// Reflection through the origin: the angle shifted by π, reduced
    /// mod 2π. An exact involution.
    pub fn reflect(&self) -> Direction {
        Direction {
            half_angle: self.half_angle,
            lower: !self.lower,
        }
    }

    /// Unsigned angle between two directions, in [0, π].
    pub fn angular_distance(&self, other: &Direction) -> f64 {
        let d = (self.angle_rad() - other.angle_rad()).abs();
        d.min(TAU - d)
    }
}

/// Applies the rotation matrix [[cos α, sin α], [−sin α, cos α]] to `p`,
/// mapping (x, y) to (x cos α + y sin α, −x sin α + y cos α). The norm is
/// preserved to within [`DISK_EPS`].
pub fn rotate_cw(p: Point, alpha_rad: f64) -> Result<Point, GeometryError> {
    if !alpha_rad.is_finite() {
        return Err(GeometryError::NonFinite {
            name: "alpha_rad",
            value: alpha_rad,
        });
    }
    Ok(rotate_cw_sincos(p, alpha_rad.sin(), alpha_rad.cos()))
}

/// Rotation with the trigonometric factors precomputed; the single code path
/// shared by [`rotate_cw`] and the hot response loops.
pub(crate) fn rotate_cw_sincos(p: Point, sin_a: f64, cos_a: f64) -> Point {
    Point::new_unchecked(
        p.x * cos_a + p.y * sin_a,
        -p.x * sin_a + p.y * cos_a,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn rotate_identity() {
        let p = Point::new(1.0, 0.0).unwrap();
        let r = rotate_cw(p, 0.0).unwrap();
        assert_eq!((r.x(), r.y()), (1.0, 0.0));
    }

    #[test]
    fn rotate_quarter_turn() {
        let p = Point::new(1.0, 0.0).unwrap();
        let r = rotate_cw(p, PI / 2.0).unwrap();
        assert_close(r.x(), 0.0, 1e-12);
        assert_close(r.y(), -1.0, 1e-12);

        let p = Point::new(0.5, 0.1).unwrap();
        let r = rotate_cw(p, PI / 2.0).unwrap();
        assert_close(r.x(), 0.1, 1e-12);
        assert_close(r.y(), -0.5, 1e-12);
    }

    #[test]
    fn rotate_rejects_non_finite() {
        let p = Point::new(0.5, 0.1).unwrap();
        assert!(matches!(
            rotate_cw(p, f64::NAN),
            Err(GeometryError::NonFinite { .. })
        ));
        assert!(rotate_cw(p, f64::INFINITY).is_err());
    }

    #[test]
    fn point_membership() {
        assert!(Point::new(1.0, 0.0).is_ok());
        assert!(Point::new(0.6, 0.8).is_ok()); // exactly on the boundary
        assert!(matches!(
            Point::new(1.1, 0.0),
            Err(GeometryError::OutsideDisk { .. })
        ));
        assert!(matches!(
            Point::new(f64::NAN, 0.0),
            Err(GeometryError::NonFinite { .. })
        ));
        assert!(Point::new(0.0, f64::INFINITY).is_err());
    }

    #[test]
    fn reflect_examples() {
        let d = Direction::from_radians(0.0).unwrap();
        assert_eq!(d.reflect().angle_rad(), PI);

        let d = Direction::from_radians(PI / 4.0).unwrap();
        assert_close(d.reflect().angle_rad(), 5.0 * PI / 4.0, 1e-12);

        let d = Direction::from_radians(3.0 * PI / 2.0).unwrap();
        assert_close(d.reflect().angle_rad(), PI / 2.0, 1e-12);
    }

    #[test]
    fn reflect_is_exact_involution() {
        let mut state = 0x51c0_7e57u64;
        for _ in 0..1000 {
            let (s, bits) = source::prng_next(state);
            state = s;
            let angle = source::uniform01(bits) * TAU;
            let d = Direction::from_radians(angle).unwrap();
            let rr = d.reflect().reflect();
            assert_eq!(rr, d);
            assert_eq!(rr.angle_rad().to_bits(), d.angle_rad().to_bits());
        }
        // boundary candidates
        for angle in [0.0, PI, PI.next_down(), PI.next_up(), TAU.next_down()] {
            let d = Direction::from_radians(angle).unwrap();
            assert_eq!(d.reflect().reflect(), d);
        }
    }

    #[test]
    fn canonical_angle_in_range() {
        for angle in [-10.0, -1e-18, 0.0, 1.0, PI, TAU, TAU + 0.5, 123.456] {
            let d = Direction::from_radians(angle).unwrap();
            let a = d.angle_rad();
            assert!((0.0..TAU).contains(&a), "angle {angle} -> {a}");
            // canonical form round-trips exactly
            let d2 = Direction::from_radians(a).unwrap();
            assert_eq!(d, d2);
        }
        assert!(Direction::from_radians(f64::NAN).is_err());
    }

    #[test]
    fn angular_distance_examples() {
        let d0 = Direction::from_radians(0.0).unwrap();
        let db = Direction::from_radians(0.3141593).unwrap();
        assert_eq!(d0.angular_distance(&db), 0.3141593);

        let dpi = Direction::from_radians(PI).unwrap();
        assert_eq!(d0.angular_distance(&dpi), PI);

        let d1 = Direction::from_radians(0.1).unwrap();
        let d2 = Direction::from_radians(TAU - 0.1).unwrap();
        assert_close(d1.angular_distance(&d2), 0.2, 1e-12);
    }

    #[test]
    fn rotation_round_trip_and_norm() {
        let mut state = 0xf00du64;
        let mut rand = || {
            let (s, bits) = source::prng_next(state);
            state = s;
            source::uniform01(bits)
        };
        for _ in 0..1000 {
            let x = rand() - 0.5;
            let y = rand() - 0.5;
            let alpha = (rand() - 0.5) * 4.0 * TAU;
            let p = Point::new(x, y).unwrap();
            let q = rotate_cw(rotate_cw(p, alpha).unwrap(), -alpha).unwrap();
            assert_close(q.x(), p.x(), 1e-12);
            assert_close(q.y(), p.y(), 1e-12);
            assert_close(rotate_cw(p, alpha).unwrap().norm(), p.norm(), 1e-12);
        }
    }

    #[test]
    fn angular_distance_symmetry_and_triangle() {
        let mut state = 0xabcdu64;
        let mut rand_dir = || {
            let (s, bits) = source::prng_next(state);
            state = s;
            Direction::from_radians(source::uniform01(bits) * TAU).unwrap()
        };
        for _ in 0..1000 {
            let (a, b, c) = (rand_dir(), rand_dir(), rand_dir());
            assert_eq!(a.angular_distance(&b), b.angular_distance(&a));
            let (ab, bc, ac) = (
                a.angular_distance(&b),
                b.angular_distance(&c),
                a.angular_distance(&c),
            );
            assert!(ac <= ab + bc + 1e-12, "triangle: {ac} > {ab} + {bc}");
            assert!((0.0..=PI).contains(&ab));
        }
    }
}
