//! Composite Gauss-Legendre rules on the ring partition (disk) and on a
//! tensor grid (rectangle).

use crate::domain::RingPartition;

/// Five-point Gauss-Legendre nodes and weights on `[-1, 1]`.
const NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

/// Composite rule for `int_lo^hi f` over `panels` equal panels.
pub fn integrate(f: impl Fn(f64) -> f64, lo: f64, hi: f64, panels: usize) -> f64 {
    let panels = panels.max(1);
    let h = (hi - lo) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let mid = lo + (p as f64 + 0.5) * h;
        let mut s = 0.0;
        for (x, w) in NODES.iter().zip(WEIGHTS.iter()) {
            s += w * f(mid + 0.5 * h * x);
        }
        total += 0.5 * h * s;
    }
    total
}

/// `int f(|x|) dx` over the disk, one panel per ring of `partition`, with
/// polar weight `2 pi rho`.
pub fn radial_integral(partition: &RingPartition, f: impl Fn(f64) -> f64) -> f64 {
    annulus_integral(partition, 0.0, partition.radius(), f)
}

/// Same as [`radial_integral`] restricted to `inner <= |x| < outer`, with
/// panel width taken from the partition.
pub fn annulus_integral(
    partition: &RingPartition,
    inner: f64,
    outer: f64,
    f: impl Fn(f64) -> f64,
) -> f64 {
    let width = partition.radius() / partition.rings() as f64;
    let panels = libm::ceil((outer - inner) / width) as usize;
    integrate(
        |rho| 2.0 * core::f64::consts::PI * rho * f(rho),
        inner,
        outer,
        panels,
    )
}

/// Tensor-product rule over `[0, ax] x [0, ay]`.
pub fn rectangle_integral(
    ax: f64,
    ay: f64,
    panels: usize,
    f: impl Fn(f64, f64) -> f64,
) -> f64 {
    integrate(|x| integrate(|y| f(x, y), 0.0, ay, panels), 0.0, ax, panels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    #[test]
    fn exact_for_polynomials_up_to_degree_nine() {
        let v = integrate(|x| x.powi(9) + 3.0 * x.powi(4), 0.0, 2.0, 1);
        let exact = 2f64.powi(10) / 10.0 + 3.0 * 2f64.powi(5) / 5.0;
        assert!((v - exact).abs() < 1e-11 * exact);
    }

    #[test]
    fn disk_area_and_second_moment() {
        let p = RingPartition::new(2.0, 16).unwrap();
        assert!((radial_integral(&p, |_| 1.0) - 4.0 * PI).abs() < 1e-12);
        // int |x|^2 dx = pi r^4 / 2
        assert!((radial_integral(&p, |r| r * r) - 8.0 * PI).abs() < 1e-12);
        let ring = annulus_integral(&p, 1.0, 2.0, |_| 1.0);
        assert!((ring - 3.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn rectangle_sine_product() {
        let v = rectangle_integral(1.0, 2.0, 32, |x, y| {
            libm::sin(PI * x) * libm::sin(PI * y / 2.0)
        });
        assert!((v - 8.0 / (PI * PI)).abs() < 1e-12);
    }
}
