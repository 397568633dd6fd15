//! Points and distances in the cell volume.
//!
//! Everything downstream (channel gains, sensing feasibility, movement)
//! works on [`Vec3`]. Ground entities sit at `z = 0`, the base station
//! antenna and the UAVs at positive altitude.

use std::ops::{Add, Mul, Sub};

/// A point or displacement in metres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    /// Point on the ground plane.
    pub const fn ground(x: f64, y: f64) -> Self {
        Vec3 { x, y, z: 0.0 }
    }

    pub const ORIGIN: Vec3 = Vec3::new(0.0, 0.0, 0.0);

    /// Euclidean norm.
    pub fn norm(self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    /// Norm of the projection onto the ground plane.
    pub fn horizontal_norm(self) -> f64 {
        (self.x * self.x + self.y * self.y).sqrt()
    }

    /// Straight-line distance to `other`.
    pub fn dist(self, other: Vec3) -> f64 {
        (self - other).norm()
    }

    /// Ground-plane distance to `other`, ignoring altitude.
    pub fn horizontal_dist(self, other: Vec3) -> f64 {
        (self - other).horizontal_norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, rhs: Vec3) -> Vec3 {
        Vec3::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, rhs: Vec3) -> Vec3 {
        Vec3::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}
