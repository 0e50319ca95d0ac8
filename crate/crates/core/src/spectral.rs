//! Dirichlet spectra of the generator on the disk and the rectangle, the
//! survival-probability series built from them, and its truncation
//! certificate.
//!
//! The survival probability of a path started at `x` is
//!
//! ```text
//! u(t, x) = sum_k exp(-t lambda_k / 2) sum_j c_kj f_kj(x),   c_kj = int_Q f_kj
//! ```
//!
//! with `f_kj` orthonormal in `L2(Q)`. Only modes with `c_kj != 0` matter for
//! the unit initial condition, so only those are stored:
//!
//! * Disk of radius `r`, noise `sigma`: angular order zero only. Mode `m`
//!   has `lambda_m = (sigma mu_m / r)^2`, `f_m = J0(mu_m |x| / r) / (sqrt(pi) r |J1(mu_m)|)`
//!   and `c_m = 2 sqrt(pi) r / mu_m`, where `mu_m` is the `m`-th zero of `J0`.
//!   The sign of `f_m` is chosen so that `c_m > 0`. Modes with angular
//!   dependence are orthogonal to constants and are not part of [`Spectrum`].
//! * Rectangle `[0, ax] x [0, ay]`, noise `(sigma_x, sigma_y)`: odd `(m, n)`
//!   only, `lambda_mn = sigma_x^2 (m pi / ax)^2 + sigma_y^2 (n pi / ay)^2`,
//!   `f_mn = 2 / sqrt(ax ay) sin(m pi x / ax) sin(n pi y / ay)` and
//!   `c_mn = 8 sqrt(ax ay) / (pi^2 m n)`.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::domain::{Domain, Point, RingPartition};
use crate::sq;
use crate::error::{invalid, Error, Result};
use crate::measure::{Measure, Support};
use crate::quadrature;
use crate::special::{bessel_j0, bessel_j1, j0_roots};

/// Largest number of modes a spectrum (including certificate modes) may hold.
pub const MODE_CAPACITY: usize = 1_000_000;

/// Default cap on the truncation certificate that defines `t_min`.
pub const DEFAULT_CERTIFICATE_CAP: f64 = 1e-6;

/// Rings used by disk quadrature.
pub const DISK_QUADRATURE_RINGS: usize = 4096;

/// Panels per axis used by rectangle quadrature.
pub const RECTANGLE_QUADRATURE_PANELS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    /// `norm * J0(mu |x| / radius)`.
    Radial { mu: f64, radius: f64, norm: f64 },
    /// `norm * sin(m pi x / ax) sin(n pi y / ay)`.
    Product {
        m: u32,
        n: u32,
        kx: f64,
        ky: f64,
        norm: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mode {
    pub lambda: f64,
    pub coefficient: f64,
    /// `sup |f|` over the domain.
    pub sup_norm: f64,
    /// One-based index of the distinct eigenvalue this mode belongs to.
    pub level: usize,
    pub shape: Shape,
}

impl Mode {
    pub fn eval(&self, p: Point) -> f64 {
        match self.shape {
            Shape::Radial { mu, radius, norm } => {
                norm * bessel_j0(mu * libm::hypot(p[0], p[1]) / radius)
            }
            Shape::Product { kx, ky, norm, .. } => {
                norm * libm::sin(kx * p[0]) * libm::sin(ky * p[1])
            }
        }
    }

    /// `|c| * sup |f|`, the weight of this mode in the truncation certificate.
    pub fn weight(&self) -> f64 {
        self.coefficient.abs() * self.sup_norm
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    domain: Domain,
    sigma: [f64; 2],
    modes: Vec<Mode>,
}

/// Modes of the disk of radius `r` with isotropic noise `sigma`.
pub fn disk_spectrum(r: f64, sigma: f64, count: usize) -> Result<Spectrum> {
    let domain = Domain::disk(r)?;
    check_sigma(sigma)?;
    let modes = disk_modes(r, sigma, count)?;
    Ok(Spectrum {
        domain,
        sigma: [sigma, sigma],
        modes,
    })
}

/// The `count` lowest modes with non-zero coefficient on the rectangle.
pub fn rectangle_spectrum(
    side_x: f64,
    side_y: f64,
    sigma_x: f64,
    sigma_y: f64,
    count: usize,
) -> Result<Spectrum> {
    let domain = Domain::rectangle(side_x, side_y)?;
    check_sigma(sigma_x)?;
    check_sigma(sigma_y)?;
    let modes = rectangle_modes(side_x, side_y, sigma_x, sigma_y, count)?;
    Ok(Spectrum {
        domain,
        sigma: [sigma_x, sigma_y],
        modes,
    })
}

/// Rectangle modes for every odd `m, n <= max_index`, sorted by eigenvalue.
pub fn rectangle_spectrum_box(
    side_x: f64,
    side_y: f64,
    sigma_x: f64,
    sigma_y: f64,
    max_index: u32,
) -> Result<Spectrum> {
    let domain = Domain::rectangle(side_x, side_y)?;
    check_sigma(sigma_x)?;
    check_sigma(sigma_y)?;
    if max_index == 0 {
        return Err(invalid("index box must contain at least (1, 1)"));
    }
    let mut modes = Vec::new();
    for m in (1..=max_index).step_by(2) {
        for n in (1..=max_index).step_by(2) {
            modes.push(product_mode(side_x, side_y, sigma_x, sigma_y, m, n));
        }
    }
    sort_and_level(&mut modes);
    Ok(Spectrum {
        domain,
        sigma: [sigma_x, sigma_y],
        modes,
    })
}

fn check_sigma(s: f64) -> Result<()> {
    if s > 0.0 && s.is_finite() {
        Ok(())
    } else {
        Err(invalid("diffusion scale must be positive and finite"))
    }
}

fn check_count(count: usize) -> Result<()> {
    if count == 0 {
        return Err(invalid("spectrum needs at least one mode"));
    }
    if count > MODE_CAPACITY {
        return Err(invalid(format!(
            "{count} modes exceed the capacity of {MODE_CAPACITY}"
        )));
    }
    Ok(())
}

fn disk_modes(r: f64, sigma: f64, count: usize) -> Result<Vec<Mode>> {
    check_count(count)?;
    let roots = j0_roots(count)?;
    Ok(roots
        .roots()
        .iter()
        .enumerate()
        .map(|(i, &mu)| {
            let j1 = bessel_j1(mu);
            let norm = 1.0 / (libm::sqrt(PI) * r * j1);
            Mode {
                lambda: sq(sigma * mu / r),
                coefficient: 2.0 * libm::sqrt(PI) * r / mu,
                sup_norm: norm.abs(),
                level: i + 1,
                shape: Shape::Radial { mu, radius: r, norm },
            }
        })
        .collect())
}

fn product_mode(ax: f64, ay: f64, sx: f64, sy: f64, m: u32, n: u32) -> Mode {
    let kx = m as f64 * PI / ax;
    let ky = n as f64 * PI / ay;
    let norm = 2.0 / libm::sqrt(ax * ay);
    Mode {
        lambda: sq(sx * kx) + sq(sy * ky),
        coefficient: 8.0 * libm::sqrt(ax * ay) / (PI * PI * m as f64 * n as f64),
        sup_norm: norm,
        level: 0,
        shape: Shape::Product {
            m,
            n,
            kx,
            ky,
            norm,
        },
    }
}

fn sort_and_level(modes: &mut [Mode]) {
    modes.sort_by(|a, b| {
        a.lambda.total_cmp(&b.lambda).then_with(|| match (a.shape, b.shape) {
            (Shape::Product { m: am, n: an, .. }, Shape::Product { m: bm, n: bn, .. }) => {
                (am, an).cmp(&(bm, bn))
            }
            _ => core::cmp::Ordering::Equal,
        })
    });
    let mut level = 0;
    let mut prev = f64::NAN;
    for mode in modes.iter_mut() {
        if !((mode.lambda - prev).abs() <= 1e-12 * mode.lambda) {
            level += 1;
            prev = mode.lambda;
        }
        mode.level = level;
    }
}

fn rectangle_modes(ax: f64, ay: f64, sx: f64, sy: f64, count: usize) -> Result<Vec<Mode>> {
    check_count(count)?;
    // Enumerate odd indices below a box bound until every mode outside the
    // box is provably above the count-th eigenvalue.
    let mut bound: u32 = 1;
    while ((bound as usize + 1) / 2).pow(2) < count {
        bound = bound * 2 + 1;
    }
    loop {
        let mut modes = Vec::new();
        for m in (1..=bound).step_by(2) {
            for n in (1..=bound).step_by(2) {
                modes.push(product_mode(ax, ay, sx, sy, m, n));
            }
        }
        sort_and_level(&mut modes);
        modes.truncate(count);
        let last = modes[count - 1].lambda;
        let outside = product_mode(ax, ay, sx, sy, bound + 2, 1)
            .lambda
            .min(product_mode(ax, ay, sx, sy, 1, bound + 2).lambda);
        if outside > last {
            return Ok(modes);
        }
        bound = bound * 2 + 1;
    }
}

impl Spectrum {
    /// Spectrum of the generator for `domain` with per-axis noise scales.
    /// The disk requires isotropic noise.
    pub fn for_domain(domain: &Domain, sigma_x: f64, sigma_y: f64, count: usize) -> Result<Self> {
        match domain {
            Domain::Disk(d) => {
                if sigma_x != sigma_y {
                    return Err(invalid("the disk spectrum requires isotropic noise"));
                }
                disk_spectrum(d.radius(), sigma_x, count)
            }
            Domain::Rectangle(r) => {
                rectangle_spectrum(r.side_x(), r.side_y(), sigma_x, sigma_y, count)
            }
        }
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn sigma(&self) -> [f64; 2] {
        self.sigma
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn lambda1(&self) -> f64 {
        self.modes[0].lambda
    }

    /// Number of stored modes sharing the eigenvalue of `mode`.
    pub fn multiplicity(&self, mode: &Mode) -> usize {
        self.modes.iter().filter(|m| m.level == mode.level).count()
    }

    /// Truncated series `sum_k exp(-t lambda_k / 2) c_k f_k(x)`.
    pub fn series(&self, t: f64, p: Point) -> f64 {
        self.modes
            .iter()
            .map(|m| libm::exp(-0.5 * t * m.lambda) * m.coefficient * m.eval(p))
            .sum()
    }

    /// `|Q| - sum c_kj^2`; non-negative up to rounding, shrinks as modes are added.
    pub fn parseval_defect(&self) -> f64 {
        self.domain.area() - self.modes.iter().map(|m| sq(m.coefficient)).sum::<f64>()
    }

    /// The same family with `count` modes.
    fn resized(&self, count: usize) -> Result<Self> {
        match self.domain {
            Domain::Disk(d) => disk_spectrum(d.radius(), self.sigma[0], count),
            Domain::Rectangle(r) => rectangle_spectrum(
                r.side_x(),
                r.side_y(),
                self.sigma[0],
                self.sigma[1],
                count,
            ),
        }
    }

    /// `int_Q g(x) dx` with the rule matching this domain.
    pub fn integrate(&self, g: impl Fn(Point) -> f64) -> f64 {
        match self.domain {
            Domain::Disk(d) => {
                // Only radial integrands are integrated over the disk here.
                let part = RingPartition::new(d.radius(), DISK_QUADRATURE_RINGS)
                    .expect("positive radius");
                quadrature::radial_integral(&part, |rho| g([rho, 0.0]))
            }
            Domain::Rectangle(r) => quadrature::rectangle_integral(
                r.side_x(),
                r.side_y(),
                RECTANGLE_QUADRATURE_PANELS,
                |x, y| g([x, y]),
            ),
        }
    }
}

/// Value of the truncated series together with its certificate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurvivalValue {
    /// Raw partial sum; may stray outside `[0, 1]` by at most `bound`.
    pub value: f64,
    /// Upper bound on `|u - value|`.
    pub bound: f64,
}

impl SurvivalValue {
    pub fn probability(&self) -> f64 {
        self.value.clamp(0.0, 1.0)
    }
}

/// Majorant for modes beyond the explicitly summed certificate modes.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Majorant {
    /// Uses `mu_j > (j - 1/4) pi` and `sqrt(mu) |J1(mu)| >= sqrt(2 / pi)` at the
    /// zeros of `J0`, for `j >= first`.
    Disk { first: usize, decay: f64 },
    /// Every omitted mode has `lambda >= lambda_cut`; split
    /// `exp(-t lambda / 2) <= exp(-t lambda_cut / 4) exp(-t lambda / 4)` and sum
    /// the second factor over all odd indices as a product of 1-D series.
    Rectangle { lambda_cut: f64, alpha: f64, beta: f64 },
}

impl Majorant {
    fn at(&self, t: f64) -> f64 {
        match *self {
            Majorant::Disk { first, decay } => {
                let c = t * decay;
                let beta = (first as f64 - 0.25) * PI;
                let q = libm::exp(-2.0 * PI * c * beta);
                if q >= 1.0 {
                    return f64::INFINITY;
                }
                libm::sqrt(2.0 * PI / beta) * libm::exp(-c * beta * beta) / (1.0 - q)
            }
            Majorant::Rectangle {
                lambda_cut,
                alpha,
                beta,
            } => {
                let sx = odd_series(t * alpha / 4.0);
                let sy = odd_series(t * beta / 4.0);
                16.0 / (PI * PI) * libm::exp(-t * lambda_cut / 4.0) * sx * sy
            }
        }
    }
}

/// Upper bound on `sum_{m odd} exp(-b m^2) / m`.
fn odd_series(b: f64) -> f64 {
    if !(b > 0.0) {
        return f64::INFINITY;
    }
    let mut sum = 0.0;
    let mut m = 1u64;
    loop {
        let mf = m as f64;
        let term = libm::exp(-b * mf * mf) / mf;
        sum += term;
        let ratio = libm::exp(-4.0 * b * (mf + 1.0));
        // Remaining terms shrink at least geometrically with `ratio`.
        if term * ratio < 1e-18 * sum || m > 20_000_000 {
            return sum + term * ratio / (1.0 - ratio);
        }
        m += 2;
    }
}

/// Truncated series for `u(t, x)` with a certified error bound.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalModel {
    spectrum: Spectrum,
    /// `(lambda, weight)` of the modes following the stored ones.
    certificate_modes: Vec<(f64, f64)>,
    majorant: Majorant,
    cap: f64,
    t_min: f64,
}

impl SurvivalModel {
    pub fn new(spectrum: Spectrum) -> Result<Self> {
        Self::with_cap(spectrum, DEFAULT_CERTIFICATE_CAP)
    }

    /// The certificate sums the next `10 K` modes explicitly and bounds the
    /// rest by a geometric majorant. `t_min` is the smallest time at which
    /// the certificate is at most `cap`.
    pub fn with_cap(spectrum: Spectrum, cap: f64) -> Result<Self> {
        if !(cap > 0.0) {
            return Err(invalid("certificate cap must be positive"));
        }
        let k = spectrum.len();
        let total = k.checked_mul(11).filter(|&n| n <= MODE_CAPACITY).ok_or_else(|| {
            invalid(format!(
                "certificate for {k} modes exceeds the capacity of {MODE_CAPACITY}"
            ))
        })?;
        let extended = spectrum.resized(total)?;
        let certificate_modes = extended.modes[k..]
            .iter()
            .map(|m| (m.lambda, m.weight()))
            .collect();
        let majorant = match spectrum.domain {
            Domain::Disk(d) => Majorant::Disk {
                first: total + 1,
                decay: sq(spectrum.sigma[0] / d.radius()) / 2.0,
            },
            Domain::Rectangle(r) => Majorant::Rectangle {
                lambda_cut: extended.modes[total - 1].lambda,
                alpha: sq(spectrum.sigma[0] * PI / r.side_x()),
                beta: sq(spectrum.sigma[1] * PI / r.side_y()),
            },
        };
        let mut model = Self {
            spectrum,
            certificate_modes,
            majorant,
            cap,
            t_min: f64::INFINITY,
        };
        model.t_min = model.find_t_min()?;
        Ok(model)
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    pub fn cap(&self) -> f64 {
        self.cap
    }

    pub fn t_min(&self) -> f64 {
        self.t_min
    }

    /// Bound on `sup_x |u(t, x) - u_K(t, x)|`:
    /// `sum_{k > K} exp(-t lambda_k / 2) |c_k| sup |f_k|`.
    pub fn truncation_bound(&self, t: f64) -> f64 {
        if !(t > 0.0) {
            return f64::INFINITY;
        }
        let explicit: f64 = self
            .certificate_modes
            .iter()
            .map(|&(lambda, w)| w * libm::exp(-0.5 * t * lambda))
            .sum();
        explicit + self.majorant.at(t)
    }

    fn find_t_min(&self) -> Result<f64> {
        let mut hi = 1e-3;
        while self.truncation_bound(hi) > self.cap {
            hi *= 2.0;
            if hi > 1e9 {
                return Err(Error::Numeric(format!(
                    "certificate never drops below {}",
                    self.cap
                )));
            }
        }
        let mut lo = hi / 2.0;
        if self.truncation_bound(lo) <= self.cap {
            // Walk down until the bound exceeds the cap.
            while self.truncation_bound(lo) <= self.cap {
                if lo < 1e-12 {
                    return Ok(lo);
                }
                hi = lo;
                lo /= 2.0;
            }
        }
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if self.truncation_bound(mid) <= self.cap {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }

    /// `u(t, x)` from the truncated series. Points on or outside the
    /// boundary have survival probability zero.
    pub fn survival_probability(&self, t: f64, p: Point) -> Result<SurvivalValue> {
        if !(t >= self.t_min) {
            return Err(Error::Uncertified {
                t,
                t_min: self.t_min,
                bound: self.truncation_bound(t),
            });
        }
        if !self.spectrum.domain.contains(p) {
            return Ok(SurvivalValue {
                value: 0.0,
                bound: 0.0,
            });
        }
        Ok(SurvivalValue {
            value: self.spectrum.series(t, p),
            bound: self.truncation_bound(t),
        })
    }
}

/// `F = sum_i c_1i f_1i`, the projection of the unit function on the first
/// eigenspace.
#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalMode {
    domain: Domain,
    lambda1: f64,
    modes: Vec<Mode>,
    max: f64,
    argmax: Point,
}

pub fn principal_mode(spectrum: &Spectrum) -> Result<PrincipalMode> {
    let first = spectrum
        .modes
        .first()
        .ok_or_else(|| invalid("empty spectrum"))?;
    let modes: Vec<Mode> = spectrum
        .modes
        .iter()
        .filter(|m| m.level == first.level)
        .copied()
        .collect();
    let mut pm = PrincipalMode {
        domain: spectrum.domain,
        lambda1: first.lambda,
        modes,
        max: 0.0,
        argmax: [0.0, 0.0],
    };
    let (argmax, max) = pm.locate_max();
    pm.argmax = argmax;
    pm.max = max;
    Ok(pm)
}

impl PrincipalMode {
    pub fn eval(&self, p: Point) -> f64 {
        if !self.domain.contains(p) {
            return 0.0;
        }
        self.modes.iter().map(|m| m.coefficient * m.eval(p)).sum()
    }

    pub fn coefficients(&self) -> impl Iterator<Item = f64> + '_ {
        self.modes.iter().map(|m| m.coefficient)
    }

    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    /// `M = max F`.
    pub fn max(&self) -> f64 {
        self.max
    }

    pub fn argmax(&self) -> Point {
        self.argmax
    }

    /// Dense 64 x 64 grid over the bounding box, then alternating
    /// golden-section searches along each axis.
    fn locate_max(&self) -> (Point, f64) {
        const GRID: usize = 64;
        let (lo, hi) = self.domain.bounding_box();
        let h = [(hi[0] - lo[0]) / GRID as f64, (hi[1] - lo[1]) / GRID as f64];
        let mut best = ([0.0, 0.0], f64::NEG_INFINITY);
        for i in 0..GRID {
            for j in 0..GRID {
                let p = [lo[0] + (i as f64 + 0.5) * h[0], lo[1] + (j as f64 + 0.5) * h[1]];
                let v = self.eval(p);
                if v > best.1 {
                    best = (p, v);
                }
            }
        }
        let mut p = best.0;
        for _ in 0..8 {
            for axis in 0..2 {
                let f = |s: f64| {
                    let mut q = p;
                    q[axis] = s;
                    self.eval(q)
                };
                p[axis] = golden_max(f, p[axis] - h[axis], p[axis] + h[axis]);
            }
        }
        let v = self.eval(p);
        if v >= best.1 {
            (p, v)
        } else {
            best
        }
    }
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = (libm::sqrt(5.0) - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// `a = int_Q F d(nu)` computed two ways.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonParameter {
    /// Closed form: `density * sum c_1i^2` for Lebesgue measure, or the
    /// exact ring integral of `J0` for ring measures on the disk.
    pub closed_form: f64,
    /// Composite Gauss-Legendre quadrature of `F` against `nu`.
    pub quadrature: f64,
}

impl PoissonParameter {
    pub fn value(&self) -> f64 {
        self.closed_form
    }
}

pub fn poisson_parameter(pm: &PrincipalMode, nu: &Measure) -> Result<PoissonParameter> {
    let support = nu.support(&pm.domain)?;
    let density = nu.density();
    match (support, pm.domain) {
        (Support::Annulus { inner, outer }, Domain::Disk(d)) => {
            let r = d.radius();
            let (closed, quad) = {
                let mode = &pm.modes[0];
                let Shape::Radial { mu, norm, .. } = mode.shape else {
                    unreachable!("disk modes are radial")
                };
                // int J0(mu rho / r) 2 pi rho d rho = 2 pi (r / mu) [rho J1(mu rho / r)]
                let antiderivative = |rho: f64| 2.0 * PI * r / mu * rho * bessel_j1(mu * rho / r);
                let closed = if inner == 0.0 && outer == r {
                    pm.coefficients().map(|c| c * c).sum::<f64>()
                } else {
                    mode.coefficient * norm * (antiderivative(outer) - antiderivative(inner))
                };
                let part = RingPartition::new(r, DISK_QUADRATURE_RINGS)?;
                let quad = quadrature::annulus_integral(&part, inner, outer, |rho| pm.eval([rho, 0.0]));
                (closed, quad)
            };
            Ok(PoissonParameter {
                closed_form: density * closed,
                quadrature: density * quad,
            })
        }
        (Support::Rectangle { side_x, side_y }, Domain::Rectangle(_)) => {
            let closed = pm.coefficients().map(|c| c * c).sum::<f64>();
            let quad = quadrature::rectangle_integral(
                side_x,
                side_y,
                RECTANGLE_QUADRATURE_PANELS,
                |x, y| pm.modes.iter().map(|m| m.coefficient * m.eval([x, y])).sum(),
            );
            Ok(PoissonParameter {
                closed_form: density * closed,
                quadrature: density * quad,
            })
        }
        (s, d) => Err(Error::UnsupportedMeasure(format!("{s:?} on {d:?}"))),
    }
}
