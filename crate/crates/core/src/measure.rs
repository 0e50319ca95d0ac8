//! Limit measures `nu` for the initial particle cloud, and the test regions
//! used to compare a rescaled cloud against its limit.

use core::f64::consts::PI;

use alloc::format;
use alloc::vec::Vec;

use crate::domain::{Domain, Point, RingPartition};
use crate::error::{invalid, Error, Result};

/// A finite measure on the domain with piecewise-constant density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Measure {
    /// `density` times Lebesgue measure on the whole domain.
    Lebesgue { density: f64 },
    /// `density` times Lebesgue measure on ring `index` of the `rings`-ring
    /// partition of a disk.
    Ring {
        rings: usize,
        index: usize,
        density: f64,
    },
}

impl Measure {
    pub const LEBESGUE: Measure = Measure::Lebesgue { density: 1.0 };

    pub fn density(&self) -> f64 {
        match *self {
            Measure::Lebesgue { density } | Measure::Ring { density, .. } => density,
        }
    }

    pub fn validate(&self, domain: &Domain) -> Result<()> {
        if !(self.density() >= 0.0 && self.density().is_finite()) {
            return Err(invalid("measure density must be finite and non-negative"));
        }
        if let Measure::Ring { rings, index, .. } = *self {
            let r = domain.radius().ok_or_else(|| {
                Error::UnsupportedMeasure(format!("ring measure on non-disk domain {domain:?}"))
            })?;
            RingPartition::new(r, rings)?.bounds(index)?;
        }
        Ok(())
    }

    /// Where the density is non-zero.
    pub fn support(&self, domain: &Domain) -> Result<Support> {
        self.validate(domain)?;
        Ok(match (*self, domain) {
            (Measure::Lebesgue { .. }, Domain::Disk(d)) => Support::Annulus {
                inner: 0.0,
                outer: d.radius(),
            },
            (Measure::Lebesgue { .. }, Domain::Rectangle(r)) => Support::Rectangle {
                side_x: r.side_x(),
                side_y: r.side_y(),
            },
            (Measure::Ring { rings, index, .. }, Domain::Disk(d)) => {
                let (inner, outer) = RingPartition::new(d.radius(), rings)?.bounds(index)?;
                Support::Annulus { inner, outer }
            }
            (Measure::Ring { .. }, Domain::Rectangle(_)) => unreachable!("rejected by validate"),
        })
    }

    /// `nu(Q)`.
    pub fn total(&self, domain: &Domain) -> Result<f64> {
        Ok(self.density() * self.support(domain)?.area())
    }

    /// `nu(B)` for a test region `B`.
    pub fn of_region(&self, domain: &Domain, region: &Region) -> Result<f64> {
        let support = self.support(domain)?;
        let area = match (support, *region) {
            (Support::Annulus { inner, outer }, Region::Annulus { inner: a, outer: b }) => {
                let (lo, hi) = (inner.max(a), outer.min(b));
                if hi > lo {
                    PI * (hi * hi - lo * lo)
                } else {
                    0.0
                }
            }
            (s @ Support::Annulus { .. }, Region::Sector { from, to }) => {
                s.area() * (to - from) / (2.0 * PI)
            }
            (Support::Rectangle { side_x, side_y }, Region::StripX { lo, hi }) => {
                (hi.min(side_x) - lo.max(0.0)).max(0.0) * side_y
            }
            (Support::Rectangle { side_x, side_y }, Region::StripY { lo, hi }) => {
                (hi.min(side_y) - lo.max(0.0)).max(0.0) * side_x
            }
            (s, r) => {
                return Err(Error::UnsupportedMeasure(format!(
                    "region {r:?} against support {s:?}"
                )))
            }
        };
        Ok(self.density() * area)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Support {
    Annulus { inner: f64, outer: f64 },
    Rectangle { side_x: f64, side_y: f64 },
}

impl Support {
    pub fn area(&self) -> f64 {
        match *self {
            Support::Annulus { inner, outer } => PI * (outer * outer - inner * inner),
            Support::Rectangle { side_x, side_y } => side_x * side_y,
        }
    }
}

/// Test sets `B` for comparing `scale * count(B)` with `nu(B)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Region {
    /// `inner <= |x| < outer`.
    Annulus { inner: f64, outer: f64 },
    /// Polar angle in `[from, to)`, angles measured in `[0, 2 pi)`.
    Sector { from: f64, to: f64 },
    /// `lo <= x < hi`.
    StripX { lo: f64, hi: f64 },
    /// `lo <= y < hi`.
    StripY { lo: f64, hi: f64 },
}

impl Region {
    pub fn contains(&self, p: Point) -> bool {
        match *self {
            Region::Annulus { inner, outer } => {
                let r = libm::hypot(p[0], p[1]);
                r >= inner && r < outer
            }
            Region::Sector { from, to } => {
                let mut theta = libm::atan2(p[1], p[0]);
                if theta < 0.0 {
                    theta += 2.0 * PI;
                }
                theta >= from && theta < to
            }
            Region::StripX { lo, hi } => p[0] >= lo && p[0] < hi,
            Region::StripY { lo, hi } => p[1] >= lo && p[1] < hi,
        }
    }

    /// Twenty fixed test regions: ten rings and ten sectors for the disk,
    /// ten vertical and ten horizontal strips for the rectangle.
    pub fn family(domain: &Domain) -> Vec<Region> {
        match domain {
            Domain::Disk(d) => {
                let r = d.radius();
                let rings = (0..10).map(|i| Region::Annulus {
                    inner: r * i as f64 / 10.0,
                    outer: r * (i + 1) as f64 / 10.0,
                });
                let sectors = (0..10).map(|i| Region::Sector {
                    from: 2.0 * PI * i as f64 / 10.0,
                    to: 2.0 * PI * (i + 1) as f64 / 10.0,
                });
                rings.chain(sectors).collect()
            }
            Domain::Rectangle(rect) => {
                let (ax, ay) = (rect.side_x(), rect.side_y());
                let xs = (0..10).map(|i| Region::StripX {
                    lo: ax * i as f64 / 10.0,
                    hi: ax * (i + 1) as f64 / 10.0,
                });
                let ys = (0..10).map(|i| Region::StripY {
                    lo: ay * i as f64 / 10.0,
                    hi: ay * (i + 1) as f64 / 10.0,
                });
                xs.chain(ys).collect()
            }
        }
    }
}
