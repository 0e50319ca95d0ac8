//! Rarefied particle clouds and the Poisson limit of their survivor counts.
//!
//! At rarefaction time `tau` the cloud holds `N = round(exp(tau lambda1 / 2) nu(Q))`
//! particles, each carrying mass `exp(-tau lambda1 / 2)`, so the rescaled
//! empirical measure approximates `nu`. The number of particles still alive
//! at time `tau` converges in law to a Poisson variable with mean
//! `a = int F d(nu)`.

use core::f64::consts::PI;

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::domain::{Domain, Point};
use crate::error::{invalid, Error, Result};
use crate::exec::Executor;
use crate::measure::{Measure, Region, Support};
use crate::rng::{Purpose, RngStream};
use crate::sde::{ensemble_particle, DiffusionSpec, Stepping};
use crate::spectral::{
    poisson_parameter, principal_mode, PoissonParameter, PrincipalMode, Spectrum, SurvivalModel,
};
use crate::stats::{
    chi_square_gof, poisson_pmf, poisson_support, tv_distance, ChiSquare, DiscreteDistribution,
};
use crate::sq;

/// Default ceiling on the number of particles in one cloud.
pub const DEFAULT_MAX_PARTICLES: u64 = 5_000_000;

/// Bootstrap resamples used for the standard error of the TV distance.
pub const BOOTSTRAP_RESAMPLES: u64 = 200;

/// How initial positions are placed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum CloudScheme {
    /// Deterministic equal-area lattice.
    Grid,
    /// One uniform point in each cell of the same lattice.
    Stratified,
    /// Independent uniform points.
    Iid,
}

/// Positions of a rarefied cloud and the mass each particle carries.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialCloud {
    domain: Domain,
    measure: Measure,
    tau: f64,
    scale: f64,
    requested: f64,
    points: Vec<Point>,
}

impl InitialCloud {
    /// A cloud with explicit positions, each carrying mass `scale`.
    pub fn from_points(
        domain: &Domain,
        measure: &Measure,
        tau: f64,
        scale: f64,
        points: Vec<Point>,
    ) -> Result<Self> {
        measure.validate(domain)?;
        if !(tau >= 0.0 && tau.is_finite()) {
            return Err(invalid("tau must be finite and non-negative"));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(invalid("scale must be positive"));
        }
        if let Some(p) = points.iter().find(|&&p| !domain.contains(p)) {
            return Err(Error::StartOutside { x: p[0], y: p[1] });
        }
        Ok(Self {
            domain: *domain,
            measure: *measure,
            tau,
            scale,
            requested: points.len() as f64,
            points,
        })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Mass per particle, `exp(-tau lambda1 / 2)`.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// `exp(tau lambda1 / 2) nu(Q)` before rounding.
    pub fn requested(&self) -> f64 {
        self.requested
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn measure(&self) -> &Measure {
        &self.measure
    }

    /// `nu_tau(B)`.
    pub fn rescaled_measure(&self, region: &Region) -> f64 {
        self.scale * self.points.iter().filter(|&&p| region.contains(p)).count() as f64
    }

    /// `max_B |nu_tau(B) - nu(B)|` over `regions`.
    pub fn discrepancy(&self, regions: &[Region]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for region in regions {
            let target = self.measure.of_region(&self.domain, region)?;
            worst = worst.max((self.rescaled_measure(region) - target).abs());
        }
        Ok(worst)
    }

    /// `nu_tau(g) = scale * sum g(x_k)`.
    pub fn integrate(&self, g: impl Fn(Point) -> f64) -> f64 {
        self.scale * self.points.iter().map(|&p| g(p)).sum::<f64>()
    }
}

/// Builds the cloud for rarefaction time `tau`. Fails with
/// [`Error::CountGuard`] when more than `max_particles` would be needed.
pub fn build_cloud(
    domain: &Domain,
    measure: &Measure,
    lambda1: f64,
    tau: f64,
    scheme: CloudScheme,
    seed: u64,
    max_particles: u64,
) -> Result<InitialCloud> {
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(invalid("tau must be finite and non-negative"));
    }
    if !(lambda1 > 0.0) {
        return Err(invalid("lambda1 must be positive"));
    }
    let support = measure.support(domain)?;
    let growth = libm::exp(0.5 * tau * lambda1);
    let requested = growth * measure.total(domain)?;
    if !(requested <= max_particles as f64) {
        return Err(Error::CountGuard {
            requested,
            max: max_particles,
        });
    }
    let n = libm::round(requested) as u64;
    let mut rng = RngStream::new(seed, Purpose::Cloud, 0, 0)?.rng();
    let points = if n == 0 {
        Vec::new()
    } else {
        match (support, scheme) {
            (Support::Annulus { inner, outer }, CloudScheme::Iid) => (0..n)
                .map(|_| {
                    resample(domain, &mut rng, |rng| {
                        annulus_point(sq(inner), sq(outer), rng.random(), rng.random())
                    })
                })
                .collect(),
            (Support::Rectangle { side_x, side_y }, CloudScheme::Iid) => (0..n)
                .map(|_| {
                    resample(domain, &mut rng, |rng| {
                        [side_x * rng.random::<f64>(), side_y * rng.random::<f64>()]
                    })
                })
                .collect(),
            (Support::Annulus { inner, outer }, _) => {
                annulus_lattice(domain, inner, outer, n, scheme, &mut rng)
            }
            (Support::Rectangle { side_x, side_y }, _) => {
                rectangle_lattice(domain, side_x, side_y, n, scheme, &mut rng)
            }
        }
    };
    Ok(InitialCloud {
        domain: *domain,
        measure: *measure,
        tau,
        scale: 1.0 / growth,
        requested,
        points,
    })
}

/// Redraws until the point is strictly inside the domain.
fn resample(domain: &Domain, rng: &mut ChaCha8Rng, draw: impl Fn(&mut ChaCha8Rng) -> Point) -> Point {
    loop {
        let p = draw(rng);
        if domain.contains(p) {
            return p;
        }
    }
}

/// Point with squared radius `s_lo + a (s_hi - s_lo)` and angle `2 pi b`.
fn annulus_point(s_lo: f64, s_hi: f64, a: f64, b: f64) -> Point {
    let rho = libm::sqrt(s_lo + a * (s_hi - s_lo));
    let theta = 2.0 * PI * b;
    [rho * libm::cos(theta), rho * libm::sin(theta)]
}

/// Integer counts summing to `total`, proportional to `shares`, by largest
/// remainder.
fn apportion(shares: &[f64], total: u64) -> Vec<u64> {
    let sum: f64 = shares.iter().sum();
    let exact: Vec<f64> = shares.iter().map(|s| s / sum * total as f64).collect();
    let mut counts: Vec<u64> = exact.iter().map(|e| libm::floor(*e) as u64).collect();
    let assigned: u64 = counts.iter().sum();
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&i, &j| {
        let (fi, fj) = (exact[i] - libm::floor(exact[i]), exact[j] - libm::floor(exact[j]));
        fj.total_cmp(&fi).then(i.cmp(&j))
    });
    for &i in order.iter().cycle().take(total.saturating_sub(assigned) as usize) {
        counts[i] += 1;
    }
    counts
}

/// Fractional part of `b / golden ratio`; staggers the angular phase of
/// successive bands.
fn band_phase(b: usize) -> f64 {
    let x = b as f64 * 0.618_033_988_749_894_9;
    x - libm::floor(x)
}

/// Concentric bands of roughly square cells. Band boundaries are placed so
/// that every cell has area exactly `|support| / n`; grid points sit at the
/// area midpoint of each cell.
fn annulus_lattice(
    domain: &Domain,
    inner: f64,
    outer: f64,
    n: u64,
    scheme: CloudScheme,
    rng: &mut ChaCha8Rng,
) -> Vec<Point> {
    let area = PI * (sq(outer) - sq(inner));
    let h = libm::sqrt(area / n as f64);
    let bands = (libm::round((outer - inner) / h) as u64).clamp(1, n) as usize;
    let width = (outer - inner) / bands as f64;
    let shares: Vec<f64> = (0..bands)
        .map(|b| sq(inner + (b + 1) as f64 * width) - sq(inner + b as f64 * width))
        .collect();
    let counts = apportion(&shares, n);
    let cell = (sq(outer) - sq(inner)) / n as f64;
    let mut points = Vec::with_capacity(n as usize);
    let mut s_lo = sq(inner);
    let mut placed = 0u64;
    for (b, &c) in counts.iter().enumerate() {
        placed += c;
        let s_hi = if placed == n {
            sq(outer)
        } else {
            sq(inner) + placed as f64 * cell
        };
        let phase = band_phase(b);
        for j in 0..c {
            let p = match scheme {
                CloudScheme::Grid => {
                    let turn = (j as f64 + phase) / c as f64;
                    annulus_point(s_lo, s_hi, 0.5, turn)
                }
                _ => resample(domain, rng, |rng| {
                    let turn = (j as f64 + rng.random::<f64>()) / c as f64;
                    annulus_point(s_lo, s_hi, rng.random(), turn)
                }),
            };
            points.push(p);
        }
        s_lo = s_hi;
    }
    points
}

/// Rows of equal-width cells; row heights are proportional to their counts
/// so every cell has area `side_x side_y / n`.
fn rectangle_lattice(
    domain: &Domain,
    side_x: f64,
    side_y: f64,
    n: u64,
    scheme: CloudScheme,
    rng: &mut ChaCha8Rng,
) -> Vec<Point> {
    let h = libm::sqrt(side_x * side_y / n as f64);
    let rows = (libm::round(side_y / h) as u64).clamp(1, n) as usize;
    let counts = apportion(&vec![1.0; rows], n);
    let mut points = Vec::with_capacity(n as usize);
    let mut placed = 0u64;
    let mut y_lo = 0.0;
    for &c in &counts {
        placed += c;
        let y_hi = side_y * placed as f64 / n as f64;
        let w = side_x / c as f64;
        for j in 0..c {
            let p = match scheme {
                CloudScheme::Grid => [(j as f64 + 0.5) * w, 0.5 * (y_lo + y_hi)],
                _ => resample(domain, rng, |rng| {
                    [
                        (j as f64 + rng.random::<f64>()) * w,
                        y_lo + rng.random::<f64>() * (y_hi - y_lo),
                    ]
                }),
            };
            points.push(p);
        }
        y_lo = y_hi;
    }
    points
}

/// How survival of each particle is decided in a trial.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum TrialMode {
    /// Independent Bernoulli(`u(tau, x_k)`) draws from the certified series.
    Thinning,
    /// Full SDE paths.
    Sde {
        diffusion: DiffusionSpec,
        dt: f64,
        bridge: bool,
    },
}

/// Survival probabilities `u(tau, x_k)` of every particle.
pub fn survival_probabilities(cloud: &InitialCloud, model: &SurvivalModel) -> Result<Vec<f64>> {
    cloud
        .points
        .iter()
        .map(|&p| Ok(model.survival_probability(cloud.tau, p)?.probability()))
        .collect()
}

/// Number of successes among independent Bernoulli(`u_k`) draws. When every
/// `u_k` is small, candidates are visited with geometric skips at rate
/// `p_max` and accepted with probability `u_k / p_max`, which gives the same
/// law in `O(n p_max)` expected draws.
fn thinning_trial(u: &[f64], p_max: f64, rng: &mut ChaCha8Rng) -> u64 {
    if p_max <= 0.0 {
        return 0;
    }
    if p_max > 0.25 {
        return u.iter().filter(|&&p| rng.random::<f64>() < p).count() as u64;
    }
    let log_q = libm::log1p(-p_max);
    let mut survivors = 0;
    let mut i = 0usize;
    loop {
        let v: f64 = rng.random();
        let skip = libm::floor(libm::log1p(-v) / log_q);
        if skip >= (u.len() - i) as f64 {
            break;
        }
        i += skip as usize;
        if rng.random::<f64>() * p_max < u[i] {
            survivors += 1;
        }
        i += 1;
        if i >= u.len() {
            break;
        }
    }
    survivors
}

/// Survivor counts of `trials` independent trials on one cloud. Thinning
/// trial `t` draws from stream `(seed, t)`; SDE particle `k` of trial `t` from
/// stream `(seed, t, k)`.
pub fn run_trials(
    cloud: &InitialCloud,
    model: &SurvivalModel,
    mode: &TrialMode,
    trials: u64,
    seed: u64,
    exec: &dyn Executor,
) -> Result<Vec<u64>> {
    if trials == 0 {
        return Err(invalid("at least one trial is required"));
    }
    RngStream::new(seed, Purpose::Path, trials - 1, cloud.len().saturating_sub(1) as u64)?;
    match *mode {
        TrialMode::Thinning => {
            let u = survival_probabilities(cloud, model)?;
            let p_max = u.iter().copied().fold(0.0, f64::max);
            Ok(exec.map(trials, &|t| {
                let mut rng = RngStream::at(seed, Purpose::Thinning, t, 0).rng();
                thinning_trial(&u, p_max, &mut rng)
            }))
        }
        TrialMode::Sde {
            diffusion,
            dt,
            bridge,
        } => {
            diffusion.check_domain(&cloud.domain)?;
            let stepping = Stepping::new(cloud.tau, dt, bridge)?;
            let n = cloud.len() as u64;
            let points = &cloud.points;
            let per_trial = |t: u64| {
                exec.sum(n, &|k| {
                    ensemble_particle(&diffusion, &cloud.domain, points[k as usize], &stepping, seed, t, k)
                })
            };
            Ok((0..trials).map(per_trial).collect())
        }
    }
}

/// Distance between `log E[s^eta]` for the exact survivor count and
/// `-a (1 - s)`, with the three terms that bound it.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct PgfGap {
    pub s: f64,
    /// `sum_k log(1 - u_k (1 - s))`.
    pub exact_log_pgf: f64,
    /// `-a (1 - s)`.
    pub limit_log_pgf: f64,
    pub gap: f64,
    /// `sum_k u_k^2`, valid while every `u_k <= 1/2`.
    pub quadratic_bound: f64,
    /// `(1 - s) |nu_tau(F) - a|`.
    pub measure_term: f64,
    /// `(1 - s) |sum_k u_k - nu_tau(F)|`.
    pub tail_term: f64,
    /// `quadratic_bound + measure_term + tail_term`.
    pub bound: f64,
    /// Effect of series truncation on `exact_log_pgf`; not part of `bound`.
    pub truncation_term: f64,
    pub max_u: f64,
}

/// Largest survival probability for which the quadratic bound
/// `|log(1 - x) + x| <= x^2` is used.
pub const PGF_MAX_PROBABILITY: f64 = 0.5;

pub fn exact_pgf_gap(
    cloud: &InitialCloud,
    model: &SurvivalModel,
    pm: &PrincipalMode,
    a: f64,
    s: f64,
) -> Result<PgfGap> {
    if !(0.0..=1.0).contains(&s) {
        return Err(invalid("pgf argument must lie in [0, 1]"));
    }
    let u = survival_probabilities(cloud, model)?;
    let max_u = u.iter().copied().fold(0.0, f64::max);
    if max_u > PGF_MAX_PROBABILITY {
        return Err(invalid("pgf bound needs every survival probability <= 1/2; increase tau"));
    }
    let w = 1.0 - s;
    let exact_log_pgf: f64 = u.iter().map(|&p| libm::log1p(-p * w)).sum();
    let limit_log_pgf = -a * w;
    let sum_u: f64 = u.iter().sum();
    let nu_f = cloud.integrate(|p| pm.eval(p));
    let quadratic_bound: f64 = u.iter().map(|&p| p * p).sum();
    let measure_term = w * (nu_f - a).abs();
    let tail_term = w * (sum_u - nu_f).abs();
    let eps = model.truncation_bound(cloud.tau);
    let truncation_term = cloud.len() as f64 * eps * w / (1.0 - max_u - eps).max(f64::MIN_POSITIVE);
    Ok(PgfGap {
        s,
        exact_log_pgf,
        limit_log_pgf,
        gap: (exact_log_pgf - limit_log_pgf).abs(),
        quadratic_bound,
        measure_term,
        tail_term,
        bound: quadratic_bound + measure_term + tail_term,
        truncation_term,
        max_u,
    })
}

/// Everything measured at one rarefaction time.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ExperimentReport {
    pub tau: f64,
    pub mode: TrialMode,
    pub scheme: CloudScheme,
    pub trials: u64,
    pub particles: u64,
    pub scale: f64,
    /// `a` from the closed form.
    pub a: f64,
    /// `a` by quadrature, as a cross-check.
    pub a_quadrature: f64,
    /// `histogram[k]` trials ended with exactly `k` survivors.
    pub histogram: Vec<u64>,
    /// Comparison support `{0, ..., k_max}`; mass above it is lumped.
    pub k_max: usize,
    pub empirical: Vec<f64>,
    pub empirical_tail: f64,
    pub poisson: Vec<f64>,
    pub poisson_tail: f64,
    pub tv: f64,
    /// Bootstrap standard error of `tv`.
    pub tv_stderr: f64,
    pub chi_square: Option<ChiSquare>,
    pub mean: f64,
    pub mean_stderr: f64,
    pub variance: f64,
    pub variance_stderr: f64,
    /// `sum_k u(tau, x_k)`, the exact expected survivor count; absent when
    /// `tau` is below the certified range.
    pub expected_mean: Option<f64>,
    /// Gap at `s = 0`; absent when `tau` is uncertified or some `u_k > 1/2`.
    pub pgf: Option<PgfGap>,
    /// `max_B |nu_tau(B) - nu(B)|` over the standard test regions.
    pub discrepancy: f64,
    pub t_min: f64,
}

impl ExperimentReport {
    /// Variance over mean; one for a Poisson law.
    pub fn dispersion(&self) -> f64 {
        self.variance / self.mean
    }
}

/// Sample mean and unbiased variance with standard errors.
fn moments(outcomes: &[u64]) -> (f64, f64, f64, f64) {
    let n = outcomes.len() as f64;
    let mean = outcomes.iter().map(|&x| x as f64).sum::<f64>() / n;
    let m2 = outcomes.iter().map(|&x| sq(x as f64 - mean)).sum::<f64>() / n;
    let m4 = outcomes.iter().map(|&x| sq(sq(x as f64 - mean))).sum::<f64>() / n;
    let variance = if outcomes.len() > 1 { m2 * n / (n - 1.0) } else { 0.0 };
    let mean_stderr = libm::sqrt(variance / n);
    let variance_stderr = libm::sqrt(((m4 - m2 * m2) / n).max(0.0));
    (mean, mean_stderr, variance, variance_stderr)
}

fn histogram(outcomes: &[u64]) -> Vec<u64> {
    let top = outcomes.iter().copied().max().unwrap_or(0) as usize;
    let mut h = vec![0u64; top + 1];
    for &x in outcomes {
        h[x as usize] += 1;
    }
    h
}

/// Standard deviation of the TV distance over bootstrap resamples of the
/// trial outcomes; resample `b` draws from stream `(seed, b)`.
fn bootstrap_tv(
    outcomes: &[u64],
    poisson: &DiscreteDistribution,
    seed: u64,
    exec: &dyn Executor,
) -> Result<f64> {
    let k_max = poisson.k_max();
    let n = outcomes.len();
    let reps = exec.map(BOOTSTRAP_RESAMPLES, &|b| {
        let mut rng = RngStream::at(seed, Purpose::Bootstrap, b, 0).rng();
        let mut h = vec![0u64; k_max + 2];
        for _ in 0..n {
            let x = outcomes[rng.random_range(0..n)] as usize;
            h[x.min(k_max + 1)] += 1;
        }
        let emp = DiscreteDistribution::from_counts(&h, k_max).expect("non-empty resample");
        tv_distance(&emp, poisson).expect("matching support").to_bits()
    });
    let values: Vec<f64> = reps.into_iter().map(f64::from_bits).collect();
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let var = values.iter().map(|v| sq(v - mean)).sum::<f64>() / (values.len() - 1) as f64;
    Ok(libm::sqrt(var))
}

/// Parameters shared by every rarefaction time of an experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentSettings {
    pub scheme: CloudScheme,
    pub mode: TrialMode,
    pub trials: u64,
    pub seed: u64,
    pub max_particles: u64,
}

/// Spectral data for one domain, noise and limit measure, reused across
/// rarefaction times.
#[derive(Debug, Clone)]
pub struct Experiment {
    measure: Measure,
    model: SurvivalModel,
    principal: PrincipalMode,
    a: PoissonParameter,
    settings: ExperimentSettings,
}

/// 64-bit mixer used to derive independent per-`tau` seeds.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl Experiment {
    /// `modes` eigenmodes are summed; the certificate cap fixes `t_min`.
    pub fn new(
        domain: &Domain,
        diffusion: &DiffusionSpec,
        measure: &Measure,
        modes: usize,
        cap: f64,
        settings: ExperimentSettings,
    ) -> Result<Self> {
        diffusion.check_domain(domain)?;
        measure.validate(domain)?;
        if let TrialMode::Sde { diffusion: d, .. } = settings.mode {
            if d != *diffusion {
                return Err(invalid("trial noise differs from the spectral noise"));
            }
        }
        if settings.trials == 0 {
            return Err(invalid("at least one trial is required"));
        }
        let spectrum = Spectrum::for_domain(domain, diffusion.sigma_x(), diffusion.sigma_y(), modes)?;
        let principal = principal_mode(&spectrum)?;
        let a = poisson_parameter(&principal, measure)?;
        let model = SurvivalModel::with_cap(spectrum, cap)?;
        Ok(Self {
            measure: *measure,
            model,
            principal,
            a,
            settings,
        })
    }

    pub fn model(&self) -> &SurvivalModel {
        &self.model
    }

    pub fn principal(&self) -> &PrincipalMode {
        &self.principal
    }

    pub fn poisson_parameter(&self) -> PoissonParameter {
        self.a
    }

    pub fn settings(&self) -> &ExperimentSettings {
        &self.settings
    }

    fn tau_seed(&self, tau: f64) -> u64 {
        splitmix64(self.settings.seed ^ tau.to_bits())
    }

    pub fn cloud(&self, tau: f64) -> Result<InitialCloud> {
        build_cloud(
            self.model.spectrum().domain(),
            &self.measure,
            self.principal.lambda1(),
            tau,
            self.settings.scheme,
            self.tau_seed(tau),
            self.settings.max_particles,
        )
    }

    pub fn run(&self, tau: f64, exec: &dyn Executor) -> Result<ExperimentReport> {
        let cloud = self.cloud(tau)?;
        let seed = self.tau_seed(tau);
        let outcomes = run_trials(&cloud, &self.model, &self.settings.mode, self.settings.trials, seed, exec)?;
        let a = self.a.value();
        let k_max = poisson_support(a);
        let hist = histogram(&outcomes);
        let empirical = DiscreteDistribution::from_counts(&hist, k_max)?;
        let poisson = poisson_pmf(a, k_max)?;
        let tv = tv_distance(&empirical, &poisson)?;
        let tv_stderr = bootstrap_tv(&outcomes, &poisson, seed, exec)?;
        let chi_square = match chi_square_gof(&hist, &poisson) {
            Ok(c) => Some(c),
            Err(Error::TooFewBins) => None,
            Err(e) => return Err(e),
        };
        let (mean, mean_stderr, variance, variance_stderr) = moments(&outcomes);
        let certified = tau >= self.model.t_min();
        let expected_mean = if certified {
            Some(survival_probabilities(&cloud, &self.model)?.iter().sum())
        } else {
            None
        };
        let pgf = if certified {
            exact_pgf_gap(&cloud, &self.model, &self.principal, a, 0.0).ok()
        } else {
            None
        };
        let discrepancy = cloud.discrepancy(&Region::family(cloud.domain()))?;
        Ok(ExperimentReport {
            tau,
            mode: self.settings.mode,
            scheme: self.settings.scheme,
            trials: self.settings.trials,
            particles: cloud.len() as u64,
            scale: cloud.scale(),
            a,
            a_quadrature: self.a.quadrature,
            histogram: hist,
            k_max,
            empirical: empirical.probs().to_vec(),
            empirical_tail: empirical.tail(),
            poisson: poisson.probs().to_vec(),
            poisson_tail: poisson.tail(),
            tv,
            tv_stderr,
            chi_square,
            mean,
            mean_stderr,
            variance,
            variance_stderr,
            expected_mean,
            pgf,
            discrepancy,
            t_min: self.model.t_min(),
        })
    }
}

/// One report per rarefaction time, in the given order.
pub fn convergence_sweep(
    experiment: &Experiment,
    taus: &[f64],
    exec: &dyn Executor,
) -> Result<Vec<ExperimentReport>> {
    taus.iter().map(|&tau| experiment.run(tau, exec)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;
    use crate::domain::RingPartition;
    use crate::spectral::DEFAULT_CERTIFICATE_CAP;

    const LAMBDA1_UNIT_DISK: f64 = 5.783_185_962_946_784;

    fn unit_disk() -> Domain {
        Domain::disk(1.0).unwrap()
    }

    fn thinning(trials: u64, seed: u64) -> ExperimentSettings {
        ExperimentSettings {
            scheme: CloudScheme::Grid,
            mode: TrialMode::Thinning,
            trials,
            seed,
            max_particles: DEFAULT_MAX_PARTICLES,
        }
    }

    #[test]
    fn cloud_count_matches_rounding_rule() {
        for scheme in [CloudScheme::Grid, CloudScheme::Stratified, CloudScheme::Iid] {
            for tau in [0.0, 0.5, 1.0, 2.0] {
                let c = build_cloud(&unit_disk(), &Measure::LEBESGUE, LAMBDA1_UNIT_DISK, tau, scheme, 1, 1 << 20).unwrap();
                let want = libm::round(libm::exp(tau * LAMBDA1_UNIT_DISK / 2.0) * PI) as usize;
                assert_eq!(c.len(), want, "{scheme:?} tau={tau}");
                assert!(c.points().iter().all(|&p| unit_disk().contains(p)));
            }
        }
        let rect = Domain::rectangle(2.0, 0.5).unwrap();
        for scheme in [CloudScheme::Grid, CloudScheme::Stratified, CloudScheme::Iid] {
            let c = build_cloud(&rect, &Measure::LEBESGUE, 10.0, 1.0, scheme, 1, 1 << 20).unwrap();
            assert_eq!(c.len(), libm::round(libm::exp(5.0)) as usize);
            assert!(c.points().iter().all(|&p| rect.contains(p)));
        }
    }

    #[test]
    fn tau_zero_unit_disk_has_three_particles() {
        let c = build_cloud(&unit_disk(), &Measure::LEBESGUE, LAMBDA1_UNIT_DISK, 0.0, CloudScheme::Grid, 0, 10).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.scale(), 1.0);
    }

    #[test]
    fn count_guard_trips() {
        let err = build_cloud(&unit_disk(), &Measure::LEBESGUE, LAMBDA1_UNIT_DISK, 4.0, CloudScheme::Grid, 0, 1000);
        assert!(matches!(err, Err(Error::CountGuard { max: 1000, .. })));
    }

    #[test]
    fn grid_left_half_plane_converges() {
        let left = Region::Sector { from: PI / 2.0, to: 1.5 * PI };
        let c = build_cloud(&unit_disk(), &Measure::LEBESGUE, LAMBDA1_UNIT_DISK, 3.0, CloudScheme::Grid, 0, 1 << 20).unwrap();
        let est = c.rescaled_measure(&left);
        assert!((est - PI / 2.0).abs() < 0.02 * PI / 2.0, "{est}");
    }

    #[test]
    fn discrepancy_shrinks_with_tau() {
        for domain in [unit_disk(), Domain::rectangle(1.0, 2.0).unwrap()] {
            let fam = Region::family(&domain);
            let lam = if domain.radius().is_some() { LAMBDA1_UNIT_DISK } else { 5.0 };
            let d: Vec<f64> = [1.0, 2.0, 3.0]
                .iter()
                .map(|&tau| {
                    build_cloud(&domain, &Measure::LEBESGUE, lam, tau, CloudScheme::Grid, 0, 1 << 22)
                        .unwrap()
                        .discrepancy(&fam)
                        .unwrap()
                })
                .collect();
            assert!(d[0] > d[1] && d[1] > d[2], "{d:?}");
        }
    }

    #[test]
    fn ring_cloud_stays_in_its_ring() {
        let ring = Measure::Ring { rings: 4, index: 2, density: 2.0 };
        let c = build_cloud(&unit_disk(), &ring, LAMBDA1_UNIT_DISK, 1.0, CloudScheme::Stratified, 4, 1 << 20).unwrap();
        let (inner, outer) = RingPartition::new(1.0, 4).unwrap().bounds(2).unwrap();
        assert!(c.points().iter().all(|p| {
            let r = libm::hypot(p[0], p[1]);
            r >= inner - 1e-12 && r <= outer + 1e-12
        }));
        let want = ring.total(&unit_disk()).unwrap();
        assert!((c.len() as f64 * c.scale() - want).abs() <= c.scale());
    }

    #[test]
    fn apportion_is_exact() {
        assert_eq!(apportion(&[1.0, 1.0, 1.0], 10), vec![4, 3, 3]);
        assert_eq!(apportion(&[0.1, 0.9], 1), vec![0, 1]);
        assert_eq!(apportion(&[2.0, 3.0], 0), vec![0, 0]);
    }

    #[test]
    fn thinning_trials_are_reproducible_and_unbiased() {
        let exp = Experiment::new(
            &unit_disk(),
            &DiffusionSpec::isotropic(1.0).unwrap(),
            &Measure::LEBESGUE,
            10,
            DEFAULT_CERTIFICATE_CAP,
            thinning(2000, 42),
        )
        .unwrap();
        let cloud = exp.cloud(1.0).unwrap();
        let first = run_trials(&cloud, exp.model(), &TrialMode::Thinning, 2000, 5, &Sequential).unwrap();
        let again = run_trials(&cloud, exp.model(), &TrialMode::Thinning, 2000, 5, &Sequential).unwrap();
        assert_eq!(first, again);
        let expected: f64 = survival_probabilities(&cloud, exp.model()).unwrap().iter().sum();
        let (mean, se, _, _) = moments(&first);
        assert!((mean - expected).abs() < 4.0 * se, "{mean} vs {expected}");
    }

    #[test]
    fn geometric_skipping_matches_direct_bernoulli() {
        let u: Vec<f64> = (0..400).map(|i| 0.2 * (i % 7) as f64 / 6.0).collect();
        let expected: f64 = u.iter().sum();
        let var: f64 = u.iter().map(|p| p * (1.0 - p)).sum();
        let n = 4000;
        let total: u64 = (0..n)
            .map(|t| {
                let mut rng = RngStream::new(3, Purpose::Thinning, t, 0).unwrap().rng();
                thinning_trial(&u, 0.2, &mut rng)
            })
            .sum();
        let mean = total as f64 / n as f64;
        assert!((mean - expected).abs() < 4.0 * libm::sqrt(var / n as f64), "{mean} {expected}");
    }

    #[test]
    fn pgf_gap_bound_holds() {
        let exp = Experiment::new(
            &unit_disk(),
            &DiffusionSpec::isotropic(1.0).unwrap(),
            &Measure::LEBESGUE,
            10,
            DEFAULT_CERTIFICATE_CAP,
            thinning(10, 0),
        )
        .unwrap();
        let a = exp.poisson_parameter().value();
        let mut last = f64::INFINITY;
        for tau in [1.5, 2.0, 2.5, 3.0] {
            let cloud = exp.cloud(tau).unwrap();
            for s in [0.0, 0.5, 1.0] {
                let g = exact_pgf_gap(&cloud, exp.model(), exp.principal(), a, s).unwrap();
                assert!(g.gap <= g.bound * (1.0 + 1e-9) + 1e-14, "{g:?}");
                if s == 1.0 {
                    assert_eq!(g.gap, 0.0);
                }
            }
            let g = exact_pgf_gap(&cloud, exp.model(), exp.principal(), a, 0.0).unwrap();
            assert!(g.gap < last, "tau={tau} {g:?}");
            last = g.gap;
        }
        assert!(exact_pgf_gap(&exp.cloud(1.0).unwrap(), exp.model(), exp.principal(), a, 1.5).is_err());
    }

    #[test]
    fn report_is_self_consistent() {
        let exp = Experiment::new(
            &unit_disk(),
            &DiffusionSpec::isotropic(1.0).unwrap(),
            &Measure::LEBESGUE,
            10,
            DEFAULT_CERTIFICATE_CAP,
            thinning(500, 8),
        )
        .unwrap();
        let r = exp.run(2.0, &Sequential).unwrap();
        assert_eq!(r.histogram.iter().sum::<u64>(), 500);
        let total: f64 = r.empirical.iter().sum::<f64>() + r.empirical_tail;
        assert!((total - 1.0).abs() < 1e-12);
        assert!((0.0..=1.0).contains(&r.tv));
        assert!(r.tv_stderr > 0.0);
        assert!(r.expected_mean.is_some());
        assert_eq!(r, exp.run(2.0, &Sequential).unwrap());
    }

    #[test]
    fn sde_trials_are_reproducible() {
        let d = DiffusionSpec::isotropic(1.0).unwrap();
        let settings = ExperimentSettings {
            mode: TrialMode::Sde { diffusion: d, dt: 1e-2, bridge: true },
            ..thinning(20, 3)
        };
        let exp = Experiment::new(&unit_disk(), &d, &Measure::LEBESGUE, 10, DEFAULT_CERTIFICATE_CAP, settings).unwrap();
        let cloud = exp.cloud(0.5).unwrap();
        let a = run_trials(&cloud, exp.model(), &settings.mode, 20, 1, &Sequential).unwrap();
        let b = run_trials(&cloud, exp.model(), &settings.mode, 20, 1, &Sequential).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|&x| x as usize <= cloud.len()));
    }

    #[test]
    fn mismatched_trial_noise_is_rejected() {
        let d = DiffusionSpec::isotropic(1.0).unwrap();
        let other = DiffusionSpec::isotropic(2.0).unwrap();
        let settings = ExperimentSettings {
            mode: TrialMode::Sde { diffusion: other, dt: 1e-2, bridge: true },
            ..thinning(20, 3)
        };
        assert!(Experiment::new(&unit_disk(), &d, &Measure::LEBESGUE, 10, DEFAULT_CERTIFICATE_CAP, settings).is_err());
    }
}
