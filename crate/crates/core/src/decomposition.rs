//! Type decomposition: converting a fractional allocation into a one-way or
//! two-way surrogate type while conserving expected allocation.
//!
//! Agents are laid out left-to-right as left-closed right-open subintervals
//! of [0,1) in index order, the unassigned remainder belonging to the dummy
//! agent. A uniform eta in [0, 1/2) and its shift eta + 1/2 pick the two
//! candidate agents; equal picks collapse to a one-way type.

use crate::error::{Result, SocsError};

/// A surrogate outcome. `None` in an agent slot is the dummy agent: one-way
/// dummy means no meaningful arrival, and a dummy inside a two-way type is a
/// fresh never-matched choice with zero value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SurrogateType {
    OneWay(Option<usize>),
    /// Unordered pair, stored as (left interval agent, right interval agent);
    /// the two slots are always distinct.
    TwoWay(Option<usize>, Option<usize>),
}

impl SurrogateType {
    pub fn involves(&self, agent: usize) -> bool {
        match self {
            SurrogateType::OneWay(a) => *a == Some(agent),
            SurrogateType::TwoWay(a, b) => *a == Some(agent) || *b == Some(agent),
        }
    }
}

fn check_mu(mu: &[f64]) -> Result<f64> {
    let mut sum = 0.0;
    for (j, &m) in mu.iter().enumerate() {
        if m < 0.0 || m.is_nan() {
            return Err(SocsError::InvalidArgument(format!(
                "mu[{j}] = {m} must be non-negative"
            )));
        }
        sum += m;
    }
    if sum > 1.0 + 1e-9 {
        return Err(SocsError::InvalidArgument(format!(
            "mu sums to {sum} > 1"
        )));
    }
    Ok(sum)
}

/// Locate the agent whose interval contains x, with prefix sums `ends`
/// (ends[j] = right endpoint of agent j's interval). Returns None for the
/// residual dummy interval.
fn locate(ends: &[f64], x: f64) -> Option<usize> {
    ends.iter().position(|&e| x < e)
}

/// Deterministic in eta: the left pick reads eta, the right pick reads
/// eta + 1/2.
pub fn sample_surrogate(mu: &[f64], eta: f64) -> Result<SurrogateType> {
    check_mu(mu)?;
    if !(0.0..0.5).contains(&eta) {
        return Err(SocsError::InvalidArgument(format!(
            "eta = {eta} outside [0, 1/2)"
        )));
    }
    let mut ends = Vec::with_capacity(mu.len());
    let mut acc = 0.0;
    for &m in mu {
        acc += m;
        ends.push(acc);
    }
    let j = locate(&ends, eta);
    let k = locate(&ends, eta + 0.5);
    Ok(if j == k {
        SurrogateType::OneWay(j)
    } else {
        SurrogateType::TwoWay(j, k)
    })
}

/// Exact surrogate-type distribution from the interval geometry. The
/// probabilities sum to 1 including dummy outcomes.
pub fn surrogate_distribution(mu: &[f64]) -> Result<Vec<(SurrogateType, f64)>> {
    check_mu(mu)?;
    let mut ends = Vec::with_capacity(mu.len());
    let mut acc = 0.0;
    for &m in mu {
        acc += m;
        ends.push(acc);
    }
    // Cells of [0, 1/2) on which both picks are constant: cut at every
    // interval endpoint and every endpoint shifted left by 1/2.
    let mut cuts = vec![0.0, 0.5];
    for &e in &ends {
        if e > 0.0 && e < 0.5 {
            cuts.push(e);
        }
        let s = e - 0.5;
        if s > 0.0 && s < 0.5 {
            cuts.push(s);
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut out: Vec<(SurrogateType, f64)> = Vec::new();
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let mid = 0.5 * (a + b);
        let j = locate(&ends, mid);
        let k = locate(&ends, mid + 0.5);
        let ty = if j == k {
            SurrogateType::OneWay(j)
        } else {
            SurrogateType::TwoWay(j, k)
        };
        let p = 2.0 * (b - a);
        if let Some(slot) = out.iter_mut().find(|(t, _)| *t == ty) {
            slot.1 += p;
        } else {
            out.push((ty, p));
        }
    }
    Ok(out)
}

/// Max over agents of |mu_j - (Pr[one-way j] + 1/2 sum_k Pr[two-way {j,k}])|,
/// the allocation-conservation residual. Scaling both sides by the arrival
/// probability f_i^t leaves the residual bound unchanged.
pub fn conservation_residual(mu: &[f64], distribution: &[(SurrogateType, f64)]) -> f64 {
    let mut worst: f64 = 0.0;
    for (j, &m) in mu.iter().enumerate() {
        let mut mass = 0.0;
        for &(ty, p) in distribution {
            match ty {
                SurrogateType::OneWay(a) if a == Some(j) => mass += p,
                SurrogateType::TwoWay(a, b) if a == Some(j) || b == Some(j) => mass += 0.5 * p,
                _ => {}
            }
        }
        worst = worst.max((m - mass).abs());
    }
    worst
}

/// Closed-form marginals of the decomposition: Pr[one-way j] = (2 mu_j - 1)^+
/// and Pr[j in a two-way type] = 2 min{mu_j, 1 - mu_j}.
pub fn one_way_probability(mu_j: f64) -> f64 {
    (2.0 * mu_j - 1.0).max(0.0)
}

pub fn two_way_probability(mu_j: f64) -> f64 {
    2.0 * mu_j.min(1.0 - mu_j)
}
