//! The 90° forwarding cone between a source and a destination.
//!
//! Rotating the ray `s -> d` by 45° each way bounds a quadrant with apex at
//! `s`. A point belongs to it iff its bearing from `s` is within 45° of the
//! bearing of `d`.

use std::f64::consts::FRAC_PI_4;

use crate::error::{Error, Result};
use crate::topology::Point;

/// Slack on the boundary rays, radians.
pub const BOUNDARY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForwardingRegion {
    apex: Point,
    direction: (f64, f64),
}

impl ForwardingRegion {
    pub fn apex(&self) -> Point {
        self.apex
    }

    /// Unit vector from the apex toward the destination.
    pub fn direction(&self) -> (f64, f64) {
        self.direction
    }

    pub fn half_angle(&self) -> f64 {
        FRAC_PI_4
    }

    /// Angle in radians between `p - apex` and the cone axis.
    pub fn angle_to(&self, p: Point) -> Option<f64> {
        let (vx, vy) = (p.x - self.apex.x, p.y - self.apex.y);
        let norm = vx.hypot(vy);
        if norm == 0.0 {
            return None;
        }
        let cos = (vx * self.direction.0 + vy * self.direction.1) / norm;
        Some(cos.clamp(-1.0, 1.0).acos())
    }

    /// Boundary rays are inside; the apex is not.
    pub fn contains(&self, p: Point) -> bool {
        self.angle_to(p).is_some_and(|a| a <= FRAC_PI_4 + BOUNDARY_TOLERANCE)
    }
}

pub fn forwarding_region(source: Point, destination: Point) -> Result<ForwardingRegion> {
    let (dx, dy) = (destination.x - source.x, destination.y - source.y);
    let norm = dx.hypot(dy);
    if norm == 0.0 {
        return Err(Error::DegeneratePair);
    }
    if !norm.is_finite() {
        return Err(Error::InvalidParameter("non-finite endpoint".into()));
    }
    Ok(ForwardingRegion { apex: source, direction: (dx / norm, dy / norm) })
}

pub fn in_region(region: &ForwardingRegion, p: Point) -> bool {
    region.contains(p)
}
