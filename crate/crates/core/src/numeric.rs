//! Small numerics toolkit: quadrature, root finding, 1-D maximization,
//! derivatives, and order-stable summation.

/// Composite Simpson rule on [a, b] with `panels` panels (doubled internally
/// to an even subdivision).
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    assert!(panels >= 1);
    let n = 2 * panels;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + k as f64 * h);
    }
    acc * h / 3.0
}

/// Bisection for a continuous function with f(lo) and f(hi) of opposite sign.
/// Returns the midpoint after `iters` halvings.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, iters: usize) -> f64 {
    let flo = f(lo);
    debug_assert!(flo == 0.0 || flo.signum() != f(hi).signum() || f(hi) == 0.0);
    let sign_lo = flo >= 0.0;
    for _ in 0..iters {
        let mid = 0.5 * (lo + hi);
        if (f(mid) >= 0.0) == sign_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Golden-section search for the maximum of a unimodal-enough function on
/// [lo, hi]. Also probes the endpoints so boundary maxima are not missed.
pub fn golden_max<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, iters: usize) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iters {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let mut best = (c, fc);
    for (x, v) in [(d, fd), (lo, f(lo)), (hi, f(hi))] {
        if v > best.1 {
            best = (x, v);
        }
    }
    best
}

/// Fourth-order central difference for f'(x).
pub fn derivative<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    (-f(x + 2.0 * h) + 8.0 * f(x + h) - 8.0 * f(x - h) + f(x - 2.0 * h)) / (12.0 * h)
}

/// Pairwise summation: deterministic and order-stable for a fixed input
/// order, with O(log n) error growth.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
        }
    }
}

/// Uniform-grid cubic interpolation table over [0, span]. Values are sampled
/// once; lookups interpolate through the 4 surrounding nodes (O(h^4) error).
#[derive(Debug, Clone)]
pub struct GridTable {
    pub h: f64,
    pub values: Vec<f64>,
}

impl GridTable {
    pub fn build<F: Fn(f64) -> f64>(f: F, span: f64, nodes: usize) -> Self {
        assert!(nodes >= 4);
        let h = span / (nodes - 1) as f64;
        let values = (0..nodes).map(|k| f(k as f64 * h)).collect();
        GridTable { h, values }
    }

    pub fn span(&self) -> f64 {
        self.h * (self.values.len() - 1) as f64
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.values.len();
        let x = x.clamp(0.0, self.span());
        let mut k = (x / self.h).floor() as usize;
        // Shift the 4-point stencil inward at the boundaries.
        k = k.min(n - 2);
        let i0 = k.saturating_sub(1).min(n - 4);
        let t = x / self.h - i0 as f64;
        // Lagrange cubic through nodes i0..i0+3 at local coordinate t in [0,3].
        let y = &self.values[i0..i0 + 4];
        let l0 = -(t - 1.0) * (t - 2.0) * (t - 3.0) / 6.0;
        let l1 = t * (t - 2.0) * (t - 3.0) / 2.0;
        let l2 = -t * (t - 1.0) * (t - 3.0) / 2.0;
        let l3 = t * (t - 1.0) * (t - 2.0) / 6.0;
        y[0] * l0 + y[1] * l1 + y[2] * l2 + y[3] * l3
    }
}
