//! Seeded helper for tests that need random directions and disk points.

use std::f64::consts::TAU;

use crate::geometry::{Direction, Point};
use crate::source::{prng_next, sample_disk, uniform01};

pub struct TestRng(u64);

impl TestRng {
    pub fn new(seed: u64) -> Self {
        TestRng(seed)
    }

    pub fn next_f64(&mut self) -> f64 {
        let (s, bits) = prng_next(self.0);
        self.0 = s;
        uniform01(bits)
    }

    pub fn direction(&mut self) -> Direction {
        Direction::from_radians(self.next_f64() * TAU).unwrap()
    }

    pub fn disk_point(&mut self) -> Point {
        let (s, p) = sample_disk(self.0).unwrap();
        self.0 = s;
        p
    }
}
