//! The hidden ±1 response functions and the station observables built on
//! them, plus the measurement-flip bookkeeping rule.
//!
//! For an upper-half direction with angle α the hidden function rotates the
//! point clockwise by α and answers the sign of the semidisk the rotated
//! point lands in; lower-half directions answer the negation of their
//! reflected partner. Both stations evaluate the same function of their own
//! local setting, which makes answers for reflected settings opposite with
//! certainty (the singlet law) while each answer depends on nothing but the
//! local setting and the shared point.

use std::ops::{Mul, Neg};

use crate::geometry::{rotate_cw_sincos, Direction, Point};

/// A measurement answer. Nothing but −1 and +1 is representable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> i32 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }

    pub fn from_value(v: i64) -> Option<Sign> {
        match v {
            1 => Some(Sign::Plus),
            -1 => Some(Sign::Minus),
            _ => None,
        }
    }
}

impl Neg for Sign {
    type Output = Sign;
    fn neg(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

impl Mul for Sign {
    type Output = Sign;
    fn mul(self, rhs: Sign) -> Sign {
        if self == rhs {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }
}

impl std::fmt::Display for Sign {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.value())
    }
}

/// One of the two measuring computers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StationId {
    Station1,
    Station2,
}

impl StationId {
    pub fn id(self) -> u8 {
        match self {
            StationId::Station1 => 1,
            StationId::Station2 => 2,
        }
    }

    pub fn from_id(id: u8) -> Option<StationId> {
        match id {
            1 => Some(StationId::Station1),
            2 => Some(StationId::Station2),
            _ => None,
        }
    }

    pub fn other(self) -> StationId {
        match self {
            StationId::Station1 => StationId::Station2,
            StationId::Station2 => StationId::Station1,
        }
    }
}

impl std::fmt::Display for StationId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "station{}", self.id())
    }
}

/// A station's answer rule. The signature admits no channel for the other
/// station's setting; an alternative rule can be plugged in without touching
/// callers.
pub trait ResponseRule {
    fn respond(&self, station: StationId, setting: Direction, p: Point) -> Sign;
}

/// The semidisk sign rule: rotate clockwise by the setting angle, read the
/// sign of the half-disk.
#[derive(Debug, Clone, Copy, Default)]
pub struct SemidiskRule;

impl ResponseRule for SemidiskRule {
    fn respond(&self, _station: StationId, setting: Direction, p: Point) -> Sign {
        hidden_s(setting, p)
    }
}

/// A setting with its trigonometric factors precomputed, for loops that
/// evaluate one direction against many points. Produces bit-identical
/// answers to [`hidden_s`].
#[derive(Debug, Clone, Copy)]
pub struct PreparedSetting {
    sin: f64,
    cos: f64,
    negate: bool,
}

impl PreparedSetting {
    pub fn new(setting: Direction) -> Self {
        let upper = if setting.is_upper_half() {
            setting
        } else {
            setting.reflect()
        };
        let alpha = upper.angle_rad();
        PreparedSetting {
            sin: alpha.sin(),
            cos: alpha.cos(),
            negate: !setting.is_upper_half(),
        }
    }

    pub fn respond(&self, p: Point) -> Sign {
        let s = semidisk_sign(rotate_cw_sincos(p, self.sin, self.cos));
        if self.negate {
            -s
        } else {
            s
        }
    }
}

// Boundary tie-break: rotated y exactly 0 answers the sign of rotated x,
// and the origin answers +1. Deterministic, and antisymmetric under
// reflection because reflection negates both coordinates.
fn semidisk_sign(r: Point) -> Sign {
    if r.y() > 0.0 {
        Sign::Plus
    } else if r.y() < 0.0 {
        Sign::Minus
    } else if r.x() > 0.0 {
        Sign::Plus
    } else if r.x() < 0.0 {
        Sign::Minus
    } else {
        Sign::Plus
    }
}

/// The hidden function S of a direction, evaluated at a disk point. Disk
/// membership is enforced by the [`Point`] constructor.
pub fn hidden_s(a: Direction, p: Point) -> Sign {
    PreparedSetting::new(a).respond(p)
}

/// The answer a station computes: the hidden function of its own local
/// setting at the shared point, for either station.
pub fn station_response(station: StationId, setting: Direction, p: Point) -> Sign {
    SemidiskRule.respond(station, setting, p)
}

/// Measuring `measured` flips every other observable of the same particle:
/// the recorded raw value stands only when `other` is the measured
/// observable itself. Bookkeeping for the pointwise diagnostics; trial data
/// is never mutated.
pub fn chameleon_flip(measured: Direction, other: Direction, raw: Sign) -> Sign {
    if other == measured {
        raw
    } else {
        -raw
    }
}
