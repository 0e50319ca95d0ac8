//! Canonical planar domains: a disk centered at the origin and an
//! axis-aligned rectangle with a corner at the origin.
//!
//! Points on the boundary are treated as outside. Survival probability is
//! zero there, so a particle that touches the boundary is absorbed.

use core::f64::consts::PI;

use crate::error::{invalid, Error, Result};

pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disk {
    radius: f64,
}

impl Disk {
    pub fn new(radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(invalid("disk radius must be positive and finite"));
        }
        Ok(Self { radius })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rectangle {
    side_x: f64,
    side_y: f64,
}

impl Rectangle {
    pub fn new(side_x: f64, side_y: f64) -> Result<Self> {
        if !(side_x > 0.0 && side_y > 0.0 && side_x.is_finite() && side_y.is_finite()) {
            return Err(invalid("rectangle sides must be positive and finite"));
        }
        Ok(Self { side_x, side_y })
    }

    pub fn side_x(&self) -> f64 {
        self.side_x
    }

    pub fn side_y(&self) -> f64 {
        self.side_y
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    Disk(Disk),
    Rectangle(Rectangle),
}

impl From<Disk> for Domain {
    fn from(d: Disk) -> Self {
        Domain::Disk(d)
    }
}

impl From<Rectangle> for Domain {
    fn from(r: Rectangle) -> Self {
        Domain::Rectangle(r)
    }
}

impl Domain {
    pub fn disk(radius: f64) -> Result<Self> {
        Disk::new(radius).map(Domain::Disk)
    }

    pub fn rectangle(side_x: f64, side_y: f64) -> Result<Self> {
        Rectangle::new(side_x, side_y).map(Domain::Rectangle)
    }

    /// Strict interior test, consistent with [`Domain::signed_distance`].
    pub fn contains(&self, p: Point) -> bool {
        self.signed_distance(p) > 0.0
    }

    /// Exact signed distance to the boundary, positive inside.
    pub fn signed_distance(&self, p: Point) -> f64 {
        match self {
            Domain::Disk(d) => d.radius - libm::hypot(p[0], p[1]),
            Domain::Rectangle(r) => {
                let dx = (-p[0]).max(p[0] - r.side_x);
                let dy = (-p[1]).max(p[1] - r.side_y);
                if dx <= 0.0 && dy <= 0.0 {
                    -(dx.max(dy))
                } else {
                    -libm::hypot(dx.max(0.0), dy.max(0.0))
                }
            }
        }
    }

    /// Outward unit normal of the boundary piece nearest to `p`.
    ///
    /// For the rectangle only the closest face counts, so corners resolve to
    /// a single axis. At the disk center every direction is equally near and
    /// the x axis is returned.
    pub fn nearest_normal(&self, p: Point) -> Point {
        match self {
            Domain::Disk(_) => {
                let n = libm::hypot(p[0], p[1]);
                if n > 0.0 {
                    [p[0] / n, p[1] / n]
                } else {
                    [1.0, 0.0]
                }
            }
            Domain::Rectangle(r) => {
                let faces = [
                    (p[0], [-1.0, 0.0]),
                    (r.side_x - p[0], [1.0, 0.0]),
                    (p[1], [0.0, -1.0]),
                    (r.side_y - p[1], [0.0, 1.0]),
                ];
                let mut best = faces[0];
                for f in &faces[1..] {
                    if f.0 < best.0 {
                        best = *f;
                    }
                }
                best.1
            }
        }
    }

    pub fn area(&self) -> f64 {
        match self {
            Domain::Disk(d) => PI * d.radius * d.radius,
            Domain::Rectangle(r) => r.side_x * r.side_y,
        }
    }

    /// Axis-aligned bounding box as `(min, max)` corners.
    pub fn bounding_box(&self) -> (Point, Point) {
        match self {
            Domain::Disk(d) => ([-d.radius, -d.radius], [d.radius, d.radius]),
            Domain::Rectangle(r) => ([0.0, 0.0], [r.side_x, r.side_y]),
        }
    }

    /// Radius for the disk, `None` for the rectangle.
    pub fn radius(&self) -> Option<f64> {
        match self {
            Domain::Disk(d) => Some(d.radius),
            Domain::Rectangle(_) => None,
        }
    }
}

/// Concentric rings `K_ni = { r i / n <= |x| < r (i + 1) / n }` of a disk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RingPartition {
    radius: f64,
    rings: usize,
}

impl RingPartition {
    pub fn new(radius: f64, rings: usize) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(invalid("ring partition radius must be positive"));
        }
        if rings == 0 {
            return Err(invalid("ring partition needs at least one ring"));
        }
        Ok(Self { radius, rings })
    }

    pub fn rings(&self) -> usize {
        self.rings
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Area of the concentric disk of relative radius `rho`, `g(rho) = pi r^2 rho^2`.
    pub fn g(&self, rho: f64) -> f64 {
        PI * self.radius * self.radius * rho * rho
    }

    /// Inner and outer radius of ring `i`.
    pub fn bounds(&self, i: usize) -> Result<(f64, f64)> {
        self.check(i)?;
        let n = self.rings as f64;
        Ok((
            self.radius * i as f64 / n,
            self.radius * (i + 1) as f64 / n,
        ))
    }

    pub fn ring_measure(&self, i: usize) -> Result<f64> {
        self.check(i)?;
        let n = self.rings as f64;
        Ok(self.g((i + 1) as f64 / n) - self.g(i as f64 / n))
    }

    fn check(&self, i: usize) -> Result<()> {
        if i >= self.rings {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: self.rings,
            });
        }
        Ok(())
    }
}
