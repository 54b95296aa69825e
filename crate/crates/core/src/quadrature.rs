//! Composite Gauss–Legendre quadrature with tabulated 5-point nodes.
//!
//! Used as an independent numerical check on identities of the basis
//! functions and on density normalization. Node values are tabulated rather
//! than generated so the integrator shares no code with [`crate::basis`].

const NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683_1,
    0.0,
    0.538_469_310_105_683_1,
    0.906_179_845_938_664,
];
const WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    128.0 / 225.0,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

/// Integrates `f` over `[a, b]` with `panels` equal sub-intervals.
pub fn gauss_legendre<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        let half = 0.5 * h;
        let panel: f64 = NODES
            .iter()
            .zip(WEIGHTS)
            .map(|(x, w)| w * f(mid + half * x))
            .sum();
        total += half * panel;
    }
    total
}

/// Doubles the panel count from 32 (160 nodes) until successive estimates
/// agree to `tol`, up to 2^14 panels.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    let mut panels = 32;
    let mut prev = gauss_legendre(&f, a, b, panels);
    while panels < (1 << 14) {
        panels *= 2;
        let next = gauss_legendre(&f, a, b, panels);
        if (next - prev).abs() <= tol {
            return next;
        }
        prev = next;
    }
    prev
}

/// Tensor-product rule over `[a, b]^2`.
pub fn integrate_2d<F: Fn(f64, f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    gauss_legendre(|x| gauss_legendre(|y| f(x, y), a, b, panels), a, b, panels)
}
