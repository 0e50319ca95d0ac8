//! Poisson law, total variation, Pearson chi-square and Wilson intervals.

use alloc::vec;
use alloc::vec::Vec;

use crate::sq;
use crate::error::{invalid, Error, Result};

/// Distribution on `{0, ..., k_max}` plus a lumped tail `P(X > k_max)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    probs: Vec<f64>,
    tail: f64,
}

impl DiscreteDistribution {
    pub fn new(probs: Vec<f64>, tail: f64) -> Result<Self> {
        if probs.is_empty() {
            return Err(invalid("distribution needs at least one support point"));
        }
        if probs.iter().chain(core::iter::once(&tail)).any(|&p| !(p >= 0.0)) {
            return Err(invalid("probabilities must be non-negative"));
        }
        let total: f64 = probs.iter().sum::<f64>() + tail;
        if (total - 1.0).abs() > 1e-9 {
            return Err(invalid("probabilities must sum to one"));
        }
        Ok(Self { probs, tail })
    }

    /// Empirical law of integer observations; `counts[k]` is the number of
    /// observations equal to `k`. Entries past `k_max` go to the tail.
    pub fn from_counts(counts: &[u64], k_max: usize) -> Result<Self> {
        let n: u64 = counts.iter().sum();
        if n == 0 {
            return Err(invalid("empirical distribution of zero observations"));
        }
        let mut probs = vec![0.0; k_max + 1];
        let mut tail = 0u64;
        for (k, &c) in counts.iter().enumerate() {
            if k <= k_max {
                probs[k] = c as f64 / n as f64;
            } else {
                tail += c;
            }
        }
        Ok(Self {
            probs,
            tail: tail as f64 / n as f64,
        })
    }

    /// Point mass at `k`, which must lie inside the support.
    pub fn point_mass(k: usize, k_max: usize) -> Result<Self> {
        if k > k_max {
            return Err(Error::IndexOutOfRange {
                index: k,
                len: k_max + 1,
            });
        }
        let mut probs = vec![0.0; k_max + 1];
        probs[k] = 1.0;
        Ok(Self { probs, tail: 0.0 })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn tail(&self) -> f64 {
        self.tail
    }

    pub fn k_max(&self) -> usize {
        self.probs.len() - 1
    }

    /// `sum_k k p_k` over the explicit support (tail excluded).
    pub fn truncated_mean(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(k, p)| k as f64 * p)
            .sum()
    }
}

/// Support bound `ceil(a + 10 sqrt(a))` used for Poisson comparisons.
pub fn poisson_support(a: f64) -> usize {
    libm::ceil(a + 10.0 * libm::sqrt(a)) as usize
}

/// `p_k = e^{-a} a^k / k!` by the recurrence `p_{k+1} = p_k a / (k + 1)`.
pub fn poisson_pmf(a: f64, k_max: usize) -> Result<DiscreteDistribution> {
    if !(a >= 0.0 && a.is_finite()) {
        return Err(invalid("Poisson parameter must be finite and non-negative"));
    }
    let mut probs = Vec::with_capacity(k_max + 1);
    let mut p = libm::exp(-a);
    for k in 0..=k_max {
        probs.push(p);
        p *= a / (k + 1) as f64;
    }
    let tail = if a == 0.0 {
        0.0
    } else {
        regularized_gamma_p((k_max + 1) as f64, a)
    };
    Ok(DiscreteDistribution { probs, tail })
}

/// `1/2 sum |p_k - q_k| + 1/2 |tail_p - tail_q|`.
pub fn tv_distance(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<f64> {
    if p.probs.len() != q.probs.len() {
        return Err(Error::MismatchedSupport {
            left: p.probs.len(),
            right: q.probs.len(),
        });
    }
    let body: f64 = p
        .probs
        .iter()
        .zip(&q.probs)
        .map(|(a, b)| (a - b).abs())
        .sum();
    Ok((0.5 * (body + (p.tail - q.tail).abs())).min(1.0))
}

const GAMMA_EPS: f64 = 1e-15;

/// Regularized lower incomplete gamma `P(s, x)`.
pub fn regularized_gamma_p(s: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x < s + 1.0 {
        gamma_series(s, x)
    } else {
        1.0 - gamma_continued_fraction(s, x)
    }
}

/// Regularized upper incomplete gamma `Q(s, x) = 1 - P(s, x)`.
pub fn regularized_gamma_q(s: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < s + 1.0 {
        1.0 - gamma_series(s, x)
    } else {
        gamma_continued_fraction(s, x)
    }
}

fn log_prefactor(s: f64, x: f64) -> f64 {
    s * libm::log(x) - x - libm::lgamma(s)
}

fn gamma_series(s: f64, x: f64) -> f64 {
    let mut term = 1.0 / s;
    let mut sum = term;
    let mut denom = s;
    for _ in 0..10_000 {
        denom += 1.0;
        term *= x / denom;
        sum += term;
        if term.abs() < sum.abs() * GAMMA_EPS {
            break;
        }
    }
    sum * libm::exp(log_prefactor(s, x))
}

/// Modified Lentz evaluation of the continued fraction for `Q(s, x)`.
fn gamma_continued_fraction(s: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - s;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let an = -(i as f64) * (i as f64 - s);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < GAMMA_EPS {
            break;
        }
    }
    libm::exp(log_prefactor(s, x)) * h
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

impl ChiSquare {
    fn from_statistic(statistic: f64, bins: usize) -> Self {
        let dof = bins - 1;
        Self {
            statistic,
            dof,
            p_value: regularized_gamma_q(dof as f64 / 2.0, statistic / 2.0),
        }
    }
}

/// Groups consecutive cells left to right until each group's weight is at
/// least `min`; a short final group joins its neighbour. Returns group
/// boundaries as half-open index ranges.
fn pool(weights: &[f64], min: f64) -> Vec<(usize, usize)> {
    let mut groups: Vec<(usize, usize)> = Vec::new();
    let mut start = 0;
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if acc >= min {
            groups.push((start, i + 1));
            start = i + 1;
            acc = 0.0;
        }
    }
    if start < weights.len() {
        match groups.last_mut() {
            Some(last) => last.1 = weights.len(),
            None => groups.push((start, weights.len())),
        }
    }
    groups
}

/// Pearson goodness of fit of observed counts against `expected`, pooling
/// cells so every expected count is at least 5.
pub fn chi_square_gof(observed: &[u64], expected: &DiscreteDistribution) -> Result<ChiSquare> {
    let n: u64 = observed.iter().sum();
    let k_max = expected.k_max();
    let mut obs = vec![0u64; k_max + 2];
    for (k, &c) in observed.iter().enumerate() {
        obs[k.min(k_max + 1)] += c;
    }
    let exp: Vec<f64> = expected
        .probs
        .iter()
        .chain(core::iter::once(&expected.tail))
        .map(|p| p * n as f64)
        .collect();
    let groups = pool(&exp, 5.0);
    if groups.len() < 2 || groups.iter().any(|&(a, b)| exp[a..b].iter().sum::<f64>() < 5.0) {
        return Err(Error::TooFewBins);
    }
    let statistic = groups
        .iter()
        .map(|&(a, b)| {
            let e: f64 = exp[a..b].iter().sum();
            let o: u64 = obs[a..b].iter().sum();
            sq(o as f64 - e) / e
        })
        .sum();
    Ok(ChiSquare::from_statistic(statistic, groups.len()))
}

/// Two-sample chi-square homogeneity test on count histograms (`left[k]` is
/// the number of observations equal to `k`).
pub fn chi_square_two_sample(left: &[u64], right: &[u64]) -> Result<ChiSquare> {
    let len = left.len().max(right.len());
    let get = |v: &[u64], k: usize| v.get(k).copied().unwrap_or(0) as f64;
    let n1: f64 = left.iter().sum::<u64>() as f64;
    let n2: f64 = right.iter().sum::<u64>() as f64;
    let total = n1 + n2;
    if n1 == 0.0 || n2 == 0.0 {
        return Err(Error::TooFewBins);
    }
    // Pool on the smaller of the two expected counts in each cell.
    let min_share = n1.min(n2) / total;
    let weights: Vec<f64> = (0..len)
        .map(|k| (get(left, k) + get(right, k)) * min_share)
        .collect();
    let groups = pool(&weights, 5.0);
    if groups.len() < 2
        || groups
            .iter()
            .any(|&(a, b)| weights[a..b].iter().sum::<f64>() < 5.0)
    {
        return Err(Error::TooFewBins);
    }
    let mut statistic = 0.0;
    for &(a, b) in &groups {
        let o1: f64 = (a..b).map(|k| get(left, k)).sum();
        let o2: f64 = (a..b).map(|k| get(right, k)).sum();
        let col = o1 + o2;
        let e1 = n1 * col / total;
        let e2 = n2 * col / total;
        statistic += sq(o1 - e1) / e1 + sq(o2 - e2) / e2;
    }
    Ok(ChiSquare::from_statistic(statistic, groups.len()))
}

/// Standard normal quantile (Acklam's rational approximation, one Halley
/// refinement step against `erfc`).
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(invalid("normal quantile needs 0 < p < 1"));
    }
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.024_25;
    let x = if p < P_LOW {
        let q = libm::sqrt(-2.0 * libm::log(p));
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = libm::sqrt(-2.0 * libm::log(1.0 - p));
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    let e = 0.5 * libm::erfc(-x / core::f64::consts::SQRT_2) - p;
    let u = e * libm::sqrt(2.0 * core::f64::consts::PI) * libm::exp(x * x / 2.0);
    Ok(x - u / (1.0 + x * u / 2.0))
}

/// Wilson score interval for a binomial proportion at two-sided `level`.
pub fn wilson_interval(successes: u64, n: u64, level: f64) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(invalid("Wilson interval needs at least one trial"));
    }
    if successes > n {
        return Err(invalid("more successes than trials"));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(invalid("confidence level must lie in (0, 1)"));
    }
    let z = normal_quantile(0.5 + level / 2.0)?;
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z * libm::sqrt(p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)) / denom;
    let low = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let high = if successes == n { 1.0 } else { (center + half).min(1.0) };
    Ok((low, high))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Poisson};

    #[test]
    fn poisson_examples() {
        let d = poisson_pmf(0.0, 5).unwrap();
        assert_eq!(d.probs()[0], 1.0);
        assert_eq!(d.tail(), 0.0);
        let a = 2.172_914_842_246_584;
        let d = poisson_pmf(a, 10).unwrap();
        assert!((d.probs()[0] - 0.11385).abs() < 5e-6);
        assert!((d.probs().iter().sum::<f64>() + d.tail() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn truncated_mean_plus_tail_correction_is_a() {
        for &a in &[0.3, 2.17295, 7.5, 31.0] {
            let k_max = poisson_support(a);
            let d = poisson_pmf(a, k_max).unwrap();
            // E[X; X > k_max] = a P(X >= k_max)
            let tail_mean = a * regularized_gamma_p(k_max as f64, a);
            assert!((d.truncated_mean() + tail_mean - a).abs() < 1e-9, "a = {a}");
        }
    }

    #[test]
    fn recurrence_matches_log_gamma() {
        for &a in &[0.01, 1.0, 2.5, 10.0, 33.3, 50.0] {
            let d = poisson_pmf(a, 200).unwrap();
            for k in 0..=200usize {
                let direct = libm::exp(
                    k as f64 * libm::log(a) - a - libm::lgamma(k as f64 + 1.0),
                );
                let got = d.probs()[k];
                assert!(
                    (got - direct).abs() <= 1e-12 * direct + 1e-300,
                    "a = {a}, k = {k}: {got} vs {direct}"
                );
            }
        }
    }

    #[test]
    fn tv_examples() {
        let p = poisson_pmf(2.0, 100).unwrap();
        assert_eq!(tv_distance(&p, &p).unwrap(), 0.0);
        let a = DiscreteDistribution::point_mass(0, 3).unwrap();
        let b = DiscreteDistribution::point_mass(2, 3).unwrap();
        assert_eq!(tv_distance(&a, &b).unwrap(), 1.0);

        let q = poisson_pmf(2.1, 100).unwrap();
        // direct summation oracle, all mass within k <= 100
        let mut oracle = 0.0;
        for k in 0..=100i32 {
            let lp = |m: f64| libm::exp(k as f64 * libm::log(m) - m - libm::lgamma(k as f64 + 1.0));
            oracle += (lp(2.0) - lp(2.1)).abs();
        }
        let tv = tv_distance(&p, &q).unwrap();
        assert!((tv - oracle / 2.0).abs() < 1e-12);
        assert_eq!(tv, tv_distance(&p, &q).unwrap());

        let short = poisson_pmf(2.0, 5).unwrap();
        assert!(matches!(
            tv_distance(&p, &short),
            Err(Error::MismatchedSupport { .. })
        ));
    }

    #[test]
    fn incomplete_gamma_known_values() {
        // P(1, x) = 1 - e^{-x}; chi-square with 2 dof at 5.991 has p = 0.05.
        assert!((regularized_gamma_p(1.0, 0.7) - (1.0 - libm::exp(-0.7))).abs() < 1e-14);
        assert!((regularized_gamma_q(1.0, 5.991_464_547_107_979 / 2.0) - 0.05).abs() < 1e-12);
        // chi-square 10 dof, 23.209 -> 0.01
        assert!((regularized_gamma_q(5.0, 23.209_251_158_954_36 / 2.0) - 0.01).abs() < 1e-11);
        for &(s, x) in &[(0.5, 0.2), (3.0, 2.0), (3.0, 8.0), (40.0, 35.0)] {
            assert!((regularized_gamma_p(s, x) + regularized_gamma_q(s, x) - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn chi_square_exact_proportions() {
        let expected = poisson_pmf(2.0, 12).unwrap();
        let n = 1_000_000.0;
        // Counts exactly proportional up to rounding of the tiny tail cells.
        let mut counts: Vec<u64> = expected.probs().iter().map(|p| libm::round(p * n) as u64).collect();
        counts.push(libm::round(expected.tail() * n) as u64);
        let r = chi_square_gof(&counts, &expected).unwrap();
        // Only the rounding of each cell to an integer contributes.
        assert!(r.statistic < 0.05, "{r:?}");
        assert!(r.p_value > 0.999_999);

        let ideal = DiscreteDistribution::new(vec![0.25, 0.25, 0.5], 0.0).unwrap();
        let r = chi_square_gof(&[25, 25, 50], &ideal).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn chi_square_needs_two_bins() {
        let expected = poisson_pmf(2.0, 10).unwrap();
        assert_eq!(chi_square_gof(&[1, 2, 1], &expected), Err(Error::TooFewBins));
    }

    fn poisson_counts(rng: &mut rand_chacha::ChaCha8Rng, mean: f64, n: usize, shift: u64) -> Vec<u64> {
        let dist = Poisson::new(mean).unwrap();
        let mut counts = vec![0u64; 64];
        for _ in 0..n {
            let k = dist.sample(rng) as u64 + shift;
            counts[(k as usize).min(63)] += 1;
        }
        counts
    }

    #[test]
    fn chi_square_calibration_and_power() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
        let expected = poisson_pmf(2.0, poisson_support(2.0)).unwrap();
        let mut p_values = Vec::new();
        for _ in 0..500 {
            let counts = poisson_counts(&mut rng, 2.0, 10_000, 0);
            p_values.push(chi_square_gof(&counts, &expected).unwrap().p_value);
        }
        // Rejection rate at 1% over the first 200 replicates.
        let rejections = p_values[..200].iter().filter(|&&p| p < 0.01).count();
        assert!(rejections <= 6, "{rejections} rejections of 200");

        // Kolmogorov-Smirnov against U(0,1); critical value at alpha = 0.01.
        p_values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = p_values.len() as f64;
        let d = p_values
            .iter()
            .enumerate()
            .map(|(i, &p)| (p - i as f64 / n).max((i + 1) as f64 / n - p))
            .fold(0.0, f64::max);
        assert!(d < 1.628 / libm::sqrt(n), "KS D = {d}");

        let shifted = poisson_counts(&mut rng, 2.0, 10_000, 1);
        assert!(chi_square_gof(&shifted, &expected).unwrap().p_value < 1e-6);
    }

    #[test]
    fn two_sample_homogeneity() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let a = poisson_counts(&mut rng, 2.0, 2000, 0);
        let b = poisson_counts(&mut rng, 2.0, 2000, 0);
        assert!(chi_square_two_sample(&a, &b).unwrap().p_value > 0.01);
        let c = poisson_counts(&mut rng, 2.0, 2000, 1);
        assert!(chi_square_two_sample(&a, &c).unwrap().p_value < 1e-6);
        assert_eq!(chi_square_two_sample(&a, &[]), Err(Error::TooFewBins));
    }

    #[test]
    fn normal_quantile_values() {
        assert!((normal_quantile(0.975).unwrap() - 1.959_963_984_540_054).abs() < 1e-13);
        assert!(normal_quantile(0.5).unwrap().abs() < 1e-15);
        assert!((normal_quantile(0.001).unwrap() + 3.090_232_306_167_813_5).abs() < 1e-12);
        assert!(normal_quantile(1.0).is_err());
    }

    #[test]
    fn wilson_examples() {
        let (lo, _) = wilson_interval(0, 40, 0.95).unwrap();
        assert_eq!(lo, 0.0);
        let (_, hi) = wilson_interval(40, 40, 0.95).unwrap();
        assert_eq!(hi, 1.0);
        let (lo, hi) = wilson_interval(50, 100, 0.95).unwrap();
        assert!(((lo + hi) / 2.0 - 0.5).abs() < 1e-15);
        let normal_width = 2.0 * 1.959_963_984_540_054 * libm::sqrt(0.25 / 100.0);
        assert!(((hi - lo) - normal_width).abs() < 0.1 * normal_width);
        assert!(wilson_interval(0, 0, 0.95).is_err());
    }

    fn random_dist(len: usize) -> impl Strategy<Value = DiscreteDistribution> {
        proptest::collection::vec(0.0f64..1.0, len + 1).prop_filter_map("nonzero mass", |w| {
            let total: f64 = w.iter().sum();
            (total > 1e-6).then(|| {
                let mut p: Vec<f64> = w.iter().map(|x| x / total).collect();
                let tail = p.pop().unwrap();
                DiscreteDistribution { probs: p, tail }
            })
        })
    }

    proptest! {
        #[test]
        fn tv_is_a_metric(p in random_dist(6), q in random_dist(6), r in random_dist(6)) {
            let pq = tv_distance(&p, &q).unwrap();
            let qp = tv_distance(&q, &p).unwrap();
            let pr = tv_distance(&p, &r).unwrap();
            let qr = tv_distance(&q, &r).unwrap();
            prop_assert!((pq - qp).abs() < 1e-15);
            prop_assert!(pr <= pq + qr + 1e-12);
            prop_assert!((0.0..=1.0).contains(&pq));
        }
    }
}
