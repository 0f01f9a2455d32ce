//! Closed-form convergence-rate curves g(y), competitive-ratio constants,
//! and the univariate inequality/concavity/monotonicity certifications.

use crate::error::{Result, SocsError};
use crate::numeric::{golden_max, simpson, GridTable};
use serde::Serialize;
use std::sync::OnceLock;

/// Default large-one-way-mass constant of the general AdWords rate.
pub const GENERAL_ADWORDS_C: f64 = 0.417;

/// Constant used by the concavity certification of the AdWords rate.
pub const GENERAL_ADWORDS_CONCAVITY_C: f64 = 0.413;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateKind {
    Baseline,
    TwoWayMatching,
    GeneralMatching,
    RandomOrderMatching,
    TwoWayAdWords,
    /// Carries the one-way-mass constant; defaults to 0.417.
    GeneralAdWords(f64),
    MultiwayOcsAdWords,
    TwoWayDisplay,
    GeneralDisplay,
}

impl RateKind {
    pub fn general_adwords_default() -> RateKind {
        RateKind::GeneralAdWords(GENERAL_ADWORDS_C)
    }

    pub fn name(&self) -> &'static str {
        match self {
            RateKind::Baseline => "baseline",
            RateKind::TwoWayMatching => "two-way-matching",
            RateKind::GeneralMatching => "general-matching",
            RateKind::RandomOrderMatching => "random-order-matching",
            RateKind::TwoWayAdWords => "two-way-adwords",
            RateKind::GeneralAdWords(_) => "general-adwords",
            RateKind::MultiwayOcsAdWords => "multiway-ocs-adwords",
            RateKind::TwoWayDisplay => "two-way-display",
            RateKind::GeneralDisplay => "general-display",
        }
    }

    pub fn parse(s: &str) -> Result<RateKind> {
        Ok(match s {
            "baseline" => RateKind::Baseline,
            "two-way-matching" => RateKind::TwoWayMatching,
            "general-matching" => RateKind::GeneralMatching,
            "random-order-matching" => RateKind::RandomOrderMatching,
            "two-way-adwords" => RateKind::TwoWayAdWords,
            "general-adwords" => RateKind::general_adwords_default(),
            "multiway-ocs-adwords" => RateKind::MultiwayOcsAdWords,
            "two-way-display" => RateKind::TwoWayDisplay,
            "general-display" => RateKind::GeneralDisplay,
            other => return Err(SocsError::UnknownRateKind(other.to_string())),
        })
    }

    /// g(y); defined for y >= 0, with the display curves meaningful on `[0,1]`.
    pub fn g(&self, y: f64) -> f64 {
        convergence_rate(*self, y)
    }
}

/// Evaluate the convergence rate g(y) of an algorithm kind.
pub fn convergence_rate(kind: RateKind, y: f64) -> f64 {
    debug_assert!(y >= 0.0);
    match kind {
        RateKind::Baseline => (-y).exp(),
        RateKind::TwoWayMatching => (1.0 + y) * (-2.0 * y).exp(),
        RateKind::GeneralMatching => {
            if y <= 0.5 {
                0.25 * ((-2.0 * y).exp() + 3.0 - 2.0 * y)
            } else {
                (-2.0 * y).exp() * ((1.0 + E) / 4.0 + 0.5 * E * y)
            }
        }
        RateKind::RandomOrderMatching => {
            if y <= 0.5 {
                (1.0 + 0.5 * y) * (-2.0 * y).exp() + 0.5 * y * (1.0 - y)
            } else {
                (-2.0 * y).exp() * (1.0 + (0.5 + 0.25 * E) * y)
            }
        }
        RateKind::TwoWayAdWords => {
            let term = 0.75 + 0.25 * (1.0 + 0.25 * y) * (-0.25 * y).exp();
            (-y).exp() * term * term
        }
        RateKind::GeneralAdWords(c) => {
            let z = (y - c).max(0.0) / 4.0;
            let term = 0.75 + 0.25 * (1.0 + z) * (-z).exp();
            (-y).exp() * term * term
        }
        RateKind::MultiwayOcsAdWords => {
            let table = multiway_table();
            if y <= table.span() {
                (-y).exp() * table.eval(y)
            } else {
                (-y).exp() * multiway_inner_max(y)
            }
        }
        RateKind::TwoWayDisplay => {
            let corr = (1.0 + 0.5 * y) * (-1.5 * y).exp() + (1.0 - y) / 15.0;
            corr.min((-y).exp())
        }
        RateKind::GeneralDisplay => {
            let z = (y - 0.44).max(0.0);
            let corr = (-y).exp() * (1.0 + 0.5 * z) * (-0.5 * z).exp() + (1.0 - y) / 15.0;
            corr.min((-y).exp())
        }
    }
}

const E: f64 = std::f64::consts::E;

/// The earlier blackbox reduction's rate for matching, kept only as a
/// comparison curve: (1 + (y-1+ln2)^+) e^{-y-(y-1+ln2)^+}.
pub fn basic_general_matching_rate(y: f64) -> f64 {
    let z = (y - 1.0 + std::f64::consts::LN_2).max(0.0);
    (1.0 + z) * (-y - z).exp()
}

// ---------------------------------------------------------------------------
// Multiway OCS for AdWords: constrained maximization over the simplex
// y_S + y_L1 + y_L2 = y.
// ---------------------------------------------------------------------------

#[inline]
fn small_factor(ys: f64) -> f64 {
    (1.0 + 0.5 * ys) * (-0.5 * ys).exp()
}

#[inline]
fn large_two_way_factor(l2: f64) -> f64 {
    0.75 + 0.25 * (1.0 + 0.5 * l2) * (-0.5 * l2).exp()
}

/// exp(-l1^2 / (3 l1 + 6 l2)) with its continuity limits: 1 at l1 = 0 and
/// e^{-l1/3} when l2 = 0.
#[inline]
fn large_one_way_factor(l1: f64, l2: f64) -> f64 {
    if l1 <= 0.0 {
        1.0
    } else if l2 <= 0.0 {
        (-l1 / 3.0).exp()
    } else {
        (-(l1 * l1) / (3.0 * l1 + 6.0 * l2)).exp()
    }
}

#[inline]
fn multiway_objective(y: f64, l1: f64, l2: f64) -> f64 {
    let ys = y - l1 - l2;
    if ys < 0.0 {
        return f64::NEG_INFINITY;
    }
    small_factor(ys) * large_two_way_factor(l2) * large_one_way_factor(l1, l2)
}

fn refine_from(y: f64, start: (f64, f64), rounds: usize, iters: usize) -> (f64, (f64, f64)) {
    let (mut l1, mut l2) = start;
    l1 = l1.clamp(0.0, y);
    l2 = l2.clamp(0.0, y - l1);
    for _ in 0..rounds {
        let (x1, _) = golden_max(|a| multiway_objective(y, a, l2), 0.0, y - l2, iters);
        l1 = x1;
        let (x2, _) = golden_max(|b| multiway_objective(y, l1, b), 0.0, y - l1, iters);
        l2 = x2;
    }
    (multiway_objective(y, l1, l2), (l1, l2))
}

/// Inner maximum of the multiway-OCS rate at a given y: simplex grid scan
/// followed by coordinate-wise golden-section refinement from the best
/// candidates. Accurate to well under 1e-6.
pub fn multiway_inner_max(y: f64) -> f64 {
    if y <= 0.0 {
        return 1.0;
    }
    let n = 24usize;
    let step = y / n as f64;
    let mut candidates: Vec<(f64, f64, f64)> = Vec::new();
    for a in 0..=n {
        for b in 0..=(n - a) {
            let (l1, l2) = (a as f64 * step, b as f64 * step);
            let v = multiway_objective(y, l1, l2);
            candidates.push((v, l1, l2));
        }
    }
    candidates.sort_by(|x, z| z.0.total_cmp(&x.0));
    let mut best = candidates[0].0;
    for &(_, l1, l2) in candidates.iter().take(3) {
        best = best.max(refine_from(y, (l1, l2), 5, 50).0);
    }
    best
}

/// Sampled inner maximum over [0, 40]; built once and shared. The per-node
/// maximizer is warm-started from the previous node's argmax, with a coarse
/// scan guarding against argmax jumps.
fn multiway_table() -> &'static GridTable {
    static TABLE: OnceLock<GridTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let nodes = 20_001usize;
        let h = 40.0 / (nodes - 1) as f64;
        let mut values = Vec::with_capacity(nodes);
        let mut warm = (0.0f64, 0.0f64);
        for k in 0..nodes {
            let y = k as f64 * h;
            if y <= 0.0 {
                values.push(1.0);
                continue;
            }
            let n = 8usize;
            let step = y / n as f64;
            let mut coarse = (f64::NEG_INFINITY, 0.0, 0.0);
            for a in 0..=n {
                for b in 0..=(n - a) {
                    let (l1, l2) = (a as f64 * step, b as f64 * step);
                    let v = multiway_objective(y, l1, l2);
                    if v > coarse.0 {
                        coarse = (v, l1, l2);
                    }
                }
            }
            let (v1, p1) = refine_from(y, (coarse.1, coarse.2), 3, 26);
            let (v2, p2) = refine_from(y, warm, 3, 26);
            if v1 >= v2 {
                warm = p1;
                values.push(v1);
            } else {
                warm = p2;
                values.push(v2);
            }
        }
        GridTable { h, values }
    })
}

// ---------------------------------------------------------------------------
// Competitive-ratio constants
// ---------------------------------------------------------------------------

/// Gamma = 1 - integral_0^inf g(z) e^{-z} dz, truncated at z = 40 (the tail
/// is below e^{-40} since g <= 1).
pub fn gamma_constant<F: Fn(f64) -> f64>(g: F) -> f64 {
    1.0 - simpson(|z| g(z) * (-z).exp(), 0.0, 40.0, 10_000)
}

/// Minimum of (1 - g(y)) / y over (0, 1]: grid scan plus golden refinement.
pub fn min_chord_ratio<F: Fn(f64) -> f64 + Copy>(g: F) -> f64 {
    let ratio = |y: f64| (1.0 - g(y)) / y;
    let mut best = ratio(1.0);
    let mut best_y = 1.0;
    for k in 1..=1000 {
        let y = k as f64 * 1e-3;
        let v = ratio(y);
        if v < best {
            best = v;
            best_y = y;
        }
    }
    let lo = (best_y - 2e-3).max(1e-6);
    let hi = (best_y + 2e-3).min(1.0);
    let (_, neg_max) = golden_max(|y| -ratio(y), lo, hi, 80);
    best.min(-neg_max)
}

/// Competitive-ratio constant of a kind: the concave-chord bound (1-g(1))
/// for the matching and AdWords SOCS kinds, the min chord ratio for the
/// Display kinds (whose 1-g is not concave), and Gamma for the adversarial
/// multiway OCS.
pub fn ratio_constant(kind: RateKind) -> f64 {
    static MULTIWAY_GAMMA: OnceLock<f64> = OnceLock::new();
    match kind {
        RateKind::MultiwayOcsAdWords => {
            *MULTIWAY_GAMMA.get_or_init(|| gamma_constant(|z| convergence_rate(kind, z)))
        }
        RateKind::TwoWayDisplay | RateKind::GeneralDisplay => {
            min_chord_ratio(|y| convergence_rate(kind, y))
        }
        _ => 1.0 - convergence_rate(kind, 1.0),
    }
}

// ---------------------------------------------------------------------------
// Univariate certifications
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct CheckItem {
    pub name: String,
    pub worst_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct AppendixBReport {
    pub items: Vec<CheckItem>,
}

impl AppendixBReport {
    pub fn all_pass(&self) -> bool {
        self.items.iter().all(|i| i.pass)
    }
}

const GRID_STEP: f64 = 1e-3;

fn grid(lo: f64, hi: f64) -> impl Iterator<Item = f64> {
    let n = ((hi - lo) / GRID_STEP).round() as usize;
    (0..=n).map(move |k| lo + k as f64 * GRID_STEP)
}

/// Worst (most positive) second difference of f over [lo, hi]; concavity
/// requires it to stay below tolerance.
fn worst_second_difference<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64) -> f64 {
    let h = GRID_STEP;
    let mut worst = f64::NEG_INFINITY;
    for y in grid(lo + h, hi - h) {
        let d2 = f(y - h) - 2.0 * f(y) + f(y + h);
        worst = worst.max(d2);
    }
    worst
}

fn worst_decrease<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64) -> f64 {
    let mut worst = f64::INFINITY;
    let mut prev = f(lo);
    for y in grid(lo + GRID_STEP, hi) {
        let cur = f(y);
        worst = worst.min(cur - prev);
        prev = cur;
    }
    worst
}

/// |left derivative - right derivative| at a piecewise joint, by one-sided
/// second-order differences.
fn joint_derivative_gap<F: Fn(f64) -> f64>(f: F, x: f64) -> f64 {
    let h = 1e-5;
    let left = (3.0 * f(x) - 4.0 * f(x - h) + f(x - 2.0 * h)) / (2.0 * h);
    let right = (-3.0 * f(x) + 4.0 * f(x + h) - f(x + 2.0 * h)) / (2.0 * h);
    (left - right).abs()
}

/// Numeric certification of the univariate facts used by the analyses:
/// the (1+bx)e^{-(a+b)x} product bound, concavity of the matched-probability
/// curves, log-concavity of the AdWords factor, monotonicity of the display
/// slack coefficient, and the 0.644 chord bound.
pub fn appendix_b_checks() -> AppendixBReport {
    let mut items = Vec::new();
    let mut push = |name: &str, worst_residual: f64, tolerance: f64, pass: bool| {
        items.push(CheckItem {
            name: name.to_string(),
            worst_residual,
            tolerance,
            pass,
        });
    };

    // B.1: 1 - ax <= (1+bx) e^{-(a+b)x} for a >= b >= 0, x >= 0. The grid
    // includes x = 0, where the two sides agree exactly.
    {
        let mut worst = f64::INFINITY;
        for (a, b) in [(2.0, 1.0), (1.0, 1.0), (1.5, 0.5), (2.0, 0.0), (3.0, 1.0)] {
            for x in grid(0.0, 4.0) {
                let r = (1.0 + b * x) * (-(a + b) * x).exp() - (1.0 - a * x);
                worst = worst.min(r);
            }
        }
        push("B.1 product bound residual", worst, -1e-12, worst >= -1e-12);
    }

    // B.2: concavity of 1 - (1+(y-1+ln2)^+) e^{-y-(y-1+ln2)^+} on [0,1].
    let basic = |y: f64| 1.0 - basic_general_matching_rate(y);
    {
        let d2 = worst_second_difference(basic, 0.0, 1.0);
        push("B.2 basic matching bound concavity", d2, 1e-10, d2 <= 1e-10);
        let gap = joint_derivative_gap(basic, 1.0 - std::f64::consts::LN_2);
        push("B.2 joint derivative at y=1-ln2", gap, 1e-6, gap <= 1e-6);
    }

    // B.3: concavity of the general matching matched probability.
    let general = |y: f64| 1.0 - convergence_rate(RateKind::GeneralMatching, y);
    {
        let d2 = worst_second_difference(general, 0.0, 1.0);
        push("B.3 general matching concavity", d2, 1e-10, d2 <= 1e-10);
        let gap = joint_derivative_gap(general, 0.5);
        push("B.3 joint derivative at y=1/2", gap, 1e-6, gap <= 1e-6);
    }

    // B.4: concavity of the random-order matched probability.
    let random_order = |y: f64| 1.0 - convergence_rate(RateKind::RandomOrderMatching, y);
    {
        let d2 = worst_second_difference(random_order, 0.0, 1.0);
        push("B.4 random-order concavity", d2, 1e-10, d2 <= 1e-10);
        let gap = joint_derivative_gap(random_order, 0.5);
        push("B.4 joint derivative at y=1/2", gap, 1e-6, gap <= 1e-6);
    }

    // B.5: concavity of ln(3 + (1+x) e^{-x}) on [0,1].
    {
        let f = |x: f64| (3.0 + (1.0 + x) * (-x).exp()).ln();
        let d2 = worst_second_difference(f, 0.0, 1.0);
        push("B.5 log-concavity of AdWords factor", d2, 1e-10, d2 <= 1e-10);
    }

    // B.6: concavity of the general AdWords matched budget with c = 0.413.
    {
        let c = GENERAL_ADWORDS_CONCAVITY_C;
        let f = move |y: f64| 1.0 - convergence_rate(RateKind::GeneralAdWords(c), y);
        let d2 = worst_second_difference(f, 0.0, 1.0);
        push("B.6 general AdWords concavity (c=0.413)", d2, 1e-10, d2 <= 1e-10);
        let gap = joint_derivative_gap(f, c);
        push("B.6 joint derivative at y=c", gap, 1e-6, gap <= 1e-6);
    }

    // B.7: e^{-x} (1 - e^{-x/2}(1+x/2)) non-decreasing on [0,1] and f(1) < 1/30.
    {
        let f = |x: f64| (-x).exp() * (1.0 - (-0.5 * x).exp() * (1.0 + 0.5 * x));
        let worst = worst_decrease(f, 0.0, 1.0);
        push("B.7 display slack monotonicity", worst, -1e-12, worst >= -1e-12);
        let f1 = f(1.0);
        push("B.7 bound f(1) < 1/30", f1 - 1.0 / 30.0, 0.0, f1 < 1.0 / 30.0);
    }

    // B.8: (1-g(y))/y >= 0.644 for the display rate on the [0.9, 1] grid.
    {
        let mut worst = f64::INFINITY;
        for y in grid(0.9, 1.0) {
            let r = (1.0 - convergence_rate(RateKind::GeneralDisplay, y)) / y;
            worst = worst.min(r);
        }
        push("B.8 display chord ratio on [0.9,1]", worst - 0.644, 0.0, worst >= 0.644);
    }

    AppendixBReport { items }
}
