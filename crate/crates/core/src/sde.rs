//! Euler-Maruyama paths of `dX = diag(sigma_x, sigma_y) dW` killed on the
//! boundary, with an optional Brownian-bridge crossing test between steps.
//!
//! With additive noise and zero drift each Euler step is exact in law; the
//! only discretization error is missed boundary crossings inside a step.
//! The bridge test recovers most of them: for consecutive interior
//! positions at distances `d1`, `d2` from the nearest boundary piece, a
//! pinned Brownian motion crosses the tangent line with probability
//! `exp(-2 d1 d2 / (sigma_n^2 h))`, where `sigma_n` is the noise scale along
//! the boundary normal. This is exact for rectangle faces and first order
//! in the curvature for the disk.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::domain::{Domain, Point};
use crate::error::{invalid, Error, Result};
use crate::exec::Executor;
use crate::rng::{Purpose, RngStream};
use crate::sq;
use crate::stats::wilson_interval;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct DiffusionSpec {
    sigma_x: f64,
    sigma_y: f64,
}

impl DiffusionSpec {
    pub fn new(sigma_x: f64, sigma_y: f64) -> Result<Self> {
        for s in [sigma_x, sigma_y] {
            if !(s > 0.0 && s.is_finite()) {
                return Err(invalid("noise scales must be positive and finite"));
            }
        }
        Ok(Self { sigma_x, sigma_y })
    }

    pub fn isotropic(sigma: f64) -> Result<Self> {
        Self::new(sigma, sigma)
    }

    pub fn sigma_x(&self) -> f64 {
        self.sigma_x
    }

    pub fn sigma_y(&self) -> f64 {
        self.sigma_y
    }

    /// The disk model assumes rotational symmetry of the noise.
    pub fn check_domain(&self, domain: &Domain) -> Result<()> {
        if matches!(domain, Domain::Disk(_)) && self.sigma_x != self.sigma_y {
            return Err(invalid("the disk requires isotropic noise (sigma_x == sigma_y)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParticleOutcome {
    Absorbed { time: f64 },
    Survived { position: Point },
}

impl ParticleOutcome {
    pub fn absorbed(&self) -> bool {
        matches!(self, ParticleOutcome::Absorbed { .. })
    }

    pub fn absorption_time(&self) -> Option<f64> {
        match *self {
            ParticleOutcome::Absorbed { time } => Some(time),
            ParticleOutcome::Survived { .. } => None,
        }
    }

    pub fn final_position(&self) -> Option<Point> {
        match *self {
            ParticleOutcome::Survived { position } => Some(position),
            ParticleOutcome::Absorbed { .. } => None,
        }
    }
}

/// Time discretization shared by every path of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stepping {
    pub tau: f64,
    pub dt: f64,
    pub bridge: bool,
}

impl Stepping {
    pub fn new(tau: f64, dt: f64, bridge: bool) -> Result<Self> {
        if !(tau >= 0.0 && tau.is_finite()) {
            return Err(invalid("tau must be finite and non-negative"));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid("dt must be positive"));
        }
        if tau > 0.0 && dt > tau {
            return Err(invalid("dt must not exceed tau"));
        }
        Ok(Self { tau, dt, bridge })
    }

    /// Number of steps; the last one is shortened to end exactly at `tau`.
    fn steps(&self) -> u64 {
        if self.tau == 0.0 {
            return 0;
        }
        let n = libm::ceil(self.tau / self.dt - 1e-9);
        (n as u64).max(1)
    }
}

/// Bridge crossings with probability below `exp(-CROSSING_CUTOFF)` are not drawn.
const CROSSING_CUTOFF: f64 = 40.0;

/// Runs one path. `start` must already be known to lie in the closed domain.
fn run_path(
    diffusion: &DiffusionSpec,
    domain: &Domain,
    start: Point,
    stepping: &Stepping,
    rng: &mut ChaCha8Rng,
) -> ParticleOutcome {
    let mut d = domain.signed_distance(start);
    if d <= 0.0 {
        return ParticleOutcome::Absorbed { time: 0.0 };
    }
    let steps = stepping.steps();
    let mut x = start;
    for k in 0..steps {
        let t0 = k as f64 * stepping.dt;
        let t1 = if k + 1 == steps {
            stepping.tau
        } else {
            (k + 1) as f64 * stepping.dt
        };
        let h = t1 - t0;
        let sqrt_h = libm::sqrt(h);
        let zx: f64 = rng.sample(StandardNormal);
        let zy: f64 = rng.sample(StandardNormal);
        let next = [
            x[0] + diffusion.sigma_x * sqrt_h * zx,
            x[1] + diffusion.sigma_y * sqrt_h * zy,
        ];
        let d_next = domain.signed_distance(next);
        if d_next <= 0.0 {
            return ParticleOutcome::Absorbed { time: t1 };
        }
        if stepping.bridge {
            let n = domain.nearest_normal(x);
            let var = sq(diffusion.sigma_x * n[0]) + sq(diffusion.sigma_y * n[1]);
            let exponent = 2.0 * d * d_next / (var * h);
            if exponent < CROSSING_CUTOFF {
                let u: f64 = rng.random();
                if u < libm::exp(-exponent) {
                    return ParticleOutcome::Absorbed { time: t1 };
                }
            }
        }
        x = next;
        d = d_next;
    }
    ParticleOutcome::Survived { position: x }
}

fn check_start(domain: &Domain, start: Point) -> Result<()> {
    if domain.signed_distance(start) < 0.0 || !start.iter().all(|v| v.is_finite()) {
        return Err(Error::StartOutside {
            x: start[0],
            y: start[1],
        });
    }
    Ok(())
}

/// One absorbed path. A start on the boundary is absorbed at time zero.
pub fn simulate_particle(
    diffusion: &DiffusionSpec,
    domain: &Domain,
    start: Point,
    stepping: &Stepping,
    stream: &RngStream,
) -> Result<ParticleOutcome> {
    diffusion.check_domain(domain)?;
    check_start(domain, start)?;
    Ok(run_path(diffusion, domain, start, stepping, &mut stream.rng()))
}

/// Monte Carlo estimate of a survival probability.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SurvivalEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n: u64,
}

impl SurvivalEstimate {
    /// Mean, binomial standard error and 95% Wilson interval.
    pub fn from_counts(successes: u64, n: u64) -> Result<Self> {
        let (ci_low, ci_high) = wilson_interval(successes, n, 0.95)?;
        let p = successes as f64 / n as f64;
        Ok(Self {
            estimate: p,
            stderr: libm::sqrt(p * (1.0 - p) / n as f64),
            ci_low,
            ci_high,
            n,
        })
    }
}

/// Survival fraction of `n_paths` independent paths from `start`; path `i`
/// uses stream `(seed, i)`.
#[allow(clippy::too_many_arguments)]
pub fn mc_survival(
    diffusion: &DiffusionSpec,
    domain: &Domain,
    start: Point,
    stepping: &Stepping,
    n_paths: u64,
    seed: u64,
    exec: &dyn Executor,
) -> Result<SurvivalEstimate> {
    diffusion.check_domain(domain)?;
    check_start(domain, start)?;
    if n_paths == 0 {
        return Err(invalid("at least one path is required"));
    }
    RngStream::new(seed, Purpose::Path, 0, n_paths - 1)?;
    let survivors = exec.sum(n_paths, &|i| {
        let mut rng = RngStream::at(seed, Purpose::Path, 0, i).rng();
        u64::from(!run_path(diffusion, domain, start, stepping, &mut rng).absorbed())
    });
    SurvivalEstimate::from_counts(survivors, n_paths)
}

/// Survivor count of one ensemble trial; particle `k` uses stream
/// `(seed, trial, k)`.
pub fn survive_ensemble(
    diffusion: &DiffusionSpec,
    domain: &Domain,
    points: &[Point],
    stepping: &Stepping,
    seed: u64,
    trial: u64,
    exec: &dyn Executor,
) -> Result<u64> {
    diffusion.check_domain(domain)?;
    for &p in points {
        check_start(domain, p)?;
    }
    if points.is_empty() {
        return Ok(0);
    }
    RngStream::new(seed, Purpose::Path, trial, points.len() as u64 - 1)?;
    Ok(exec.sum(points.len() as u64, &|k| {
        ensemble_particle(diffusion, domain, points[k as usize], stepping, seed, trial, k)
    }))
}

/// Survival indicator for particle `k` of `trial`, without validation.
pub(crate) fn ensemble_particle(
    diffusion: &DiffusionSpec,
    domain: &Domain,
    start: Point,
    stepping: &Stepping,
    seed: u64,
    trial: u64,
    k: u64,
) -> u64 {
    let mut rng = RngStream::at(seed, Purpose::Path, trial, k).rng();
    u64::from(!run_path(diffusion, domain, start, stepping, &mut rng).absorbed())
}
