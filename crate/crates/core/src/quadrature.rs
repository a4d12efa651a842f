//! Composite Simpson quadrature on a uniform quality grid, split at
//! caller-supplied breakpoints where the integrand jumps or turns sharply.

use serde::{Deserialize, Serialize};

/// Number of grid nodes on `[0, 1]` used for quadrature and threshold scans.
pub const DEFAULT_GRID: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QualityGrid {
    nodes: usize,
}

impl Default for QualityGrid {
    fn default() -> Self {
        QualityGrid { nodes: DEFAULT_GRID }
    }
}

impl QualityGrid {
    /// Grids need at least three nodes (two intervals).
    pub fn new(nodes: usize) -> Self {
        QualityGrid { nodes: nodes.max(3) }
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn step(&self) -> f64 {
        1.0 / (self.nodes - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i + 1 >= self.nodes {
            1.0
        } else {
            i as f64 / (self.nodes - 1) as f64
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.nodes).map(move |i| self.node(i))
    }

    /// Index of the grid node nearest to `x`.
    pub fn nearest_index(&self, x: f64) -> usize {
        let i = (x.clamp(0.0, 1.0) * (self.nodes - 1) as f64).round() as usize;
        i.min(self.nodes - 1)
    }

    pub fn snap(&self, x: f64) -> f64 {
        self.node(self.nearest_index(x))
    }

    /// Integrates `f` over `[0, 1]`.
    ///
    /// The interval is cut at every breakpoint strictly inside `(0, 1)`. Each
    /// piece gets composite Simpson with an even number of sub-intervals no
    /// coarser than the grid spacing. Piece endpoints are evaluated a hair
    /// inside the piece, so a jump located exactly at a breakpoint is
    /// integrated with the correct one-sided values.
    pub fn integrate<F>(&self, breakpoints: &[f64], f: F) -> f64
    where
        F: Fn(f64) -> f64,
    {
        self.integrate_density(breakpoints, (1.0, 1.0), f)
    }

    /// Like [`integrate`](Self::integrate) for integrands that behave like
    /// `q^(a-1)` near 0 and `(1-q)^(b-1)` near 1. An end piece next to an
    /// integrable singularity (`a < 1` or `b < 1`) is integrated in `x` with
    /// `q = lo + (hi - lo) x^(1/a)` (mirrored at 1), where it is smooth.
    pub fn integrate_density<F>(&self, breakpoints: &[f64], (a, b): (f64, f64), f: F) -> f64
    where
        F: Fn(f64) -> f64,
    {
        let mut cuts: Vec<f64> = Vec::with_capacity(breakpoints.len() + 2);
        cuts.push(0.0);
        cuts.extend(breakpoints.iter().copied().filter(|&x| x > 0.0 && x < 1.0));
        cuts.push(1.0);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();

        let per_unit = (self.nodes - 1) as f64;
        let last = cuts.len() - 2;
        cuts.windows(2)
            .enumerate()
            .map(|(i, w)| {
                let (lo, hi) = (w[0], w[1]);
                let len = hi - lo;
                let mut m = ((len * per_unit).ceil() as usize).max(2);
                if m % 2 == 1 {
                    m += 1;
                }
                if i == 0 && a < 1.0 {
                    let p = 1.0 / a;
                    gauss_open(m, &|x: f64| f(lo + len * x.powf(p)) * len * p * x.powf(p - 1.0))
                } else if i == last && b < 1.0 {
                    let p = 1.0 / b;
                    gauss_open(m, &|x: f64| f(hi - len * x.powf(p)) * len * p * x.powf(p - 1.0))
                } else {
                    simpson(lo, hi, m, &f)
                }
            })
            .sum()
    }
}

/// `inf * 0` where `x^p` underflows for very small shapes.
fn finite(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        0.0
    }
}

fn simpson<F: Fn(f64) -> f64>(lo: f64, hi: f64, m: usize, f: &F) -> f64 {
    let h = (hi - lo) / m as f64;
    let nudge = (hi - lo) * 1e-12;
    let mut acc = f(lo + nudge) + f(hi - nudge);
    for i in 1..m {
        let x = lo + i as f64 * h;
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
    }
    acc * h / 3.0
}

/// Composite 4-point Gauss-Legendre on `[0, 1]` with `m` panels. Used where
/// the integrand is smooth but cannot be evaluated at `x = 0`.
fn gauss_open<F: Fn(f64) -> f64>(m: usize, g: &F) -> f64 {
    const NODES: [f64; 2] = [0.339_981_043_584_856_26, 0.861_136_311_594_052_6];
    const WEIGHTS: [f64; 2] = [0.652_145_154_862_546_1, 0.347_854_845_137_453_9];
    let h = 1.0 / m as f64;
    let mut acc = 0.0;
    for k in 0..m {
        let mid = (k as f64 + 0.5) * h;
        for (x, w) in NODES.iter().zip(WEIGHTS) {
            acc += w * (finite(g(mid - 0.5 * h * x)) + finite(g(mid + 0.5 * h * x)));
        }
    }
    acc * 0.5 * h
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn grid_nodes() {
        let g = QualityGrid::default();
        assert_eq!(g.nodes(), 50);
        assert_eq!(g.node(0), 0.0);
        assert_eq!(g.node(49), 1.0);
        assert_abs_diff_eq!(g.snap(0.5), 25.0 / 49.0, epsilon = 1e-15);
    }

    #[test]
    fn cubic_is_exact() {
        let g = QualityGrid::default();
        let v = g.integrate(&[0.37], |x| 4.0 * x * x * x - x + 2.0);
        assert_abs_diff_eq!(v, 1.0 - 0.5 + 2.0, epsilon = 1e-12);
    }

    #[test]
    fn endpoint_singularities() {
        let g = QualityGrid::default();
        // Beta(0.5, 0.5) density: 1 / (pi sqrt(q (1 - q))), total mass 1.
        let pdf = |q: f64| 1.0 / (std::f64::consts::PI * (q * (1.0 - q)).sqrt());
        assert_abs_diff_eq!(g.integrate_density(&[0.3], (0.5, 0.5), pdf), 1.0, epsilon = 1e-9);
        // Mass below 0.25 is 1/3.
        let v = g.integrate_density(&[0.25], (0.5, 0.5), |q| if q <= 0.25 { pdf(q) } else { 0.0 });
        assert_abs_diff_eq!(v, 1.0 / 3.0, epsilon = 1e-9);
    }

    #[test]
    fn step_at_breakpoint_is_exact() {
        let g = QualityGrid::default();
        let tau = 0.4123;
        let v = g.integrate(&[tau], |x| if x <= tau { 1.0 } else { 0.0 });
        assert_abs_diff_eq!(v, tau, epsilon = 1e-10);
    }
}
