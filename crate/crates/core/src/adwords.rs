//! AdWords SOCS: the mark-and-oppose two-way stepper, the general runner via
//! type decomposition, the adversarial multi-way OCS, and the Balance
//! fractional allocator driven by the alpha/beta gain-splitting curves.

use crate::allocation::{step_schedule, FractionalAllocation};
use crate::decomposition::{sample_surrogate, SurrogateType};
use crate::error::{Result, SocsError};
use crate::instance::{ArrivalSequence, Instance, ProblemClass};
use crate::numeric::{bisect, GridTable};
use crate::rng::{coin, uniform, Purpose};
use serde::Serialize;

/// Large-bid threshold: at least two-thirds of the budget.
#[inline]
pub fn is_large_bid(bid: f64, budget: f64) -> bool {
    bid >= (2.0 / 3.0) * budget - 1e-12
}

#[derive(Debug, Clone, Copy, Default)]
struct MarkState {
    /// Saturating mark count: 0, 1, 2+.
    marks: u8,
    /// Whether the agent was selected in its first marked step.
    first_selected: bool,
}

/// Runtime state of the AdWords/Display two-way algorithms.
#[derive(Debug, Clone)]
pub struct AdWordsState {
    pub spent: Vec<f64>,
    pub y: Vec<f64>,
    marks: Vec<MarkState>,
}

impl AdWordsState {
    pub fn new(n_agents: usize) -> Self {
        AdWordsState {
            spent: vec![0.0; n_agents],
            y: vec![0.0; n_agents],
            marks: vec![MarkState::default(); n_agents],
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TwoWayTrace {
    pub step: usize,
    /// Originating online type (the step index for OCS sequences); lets
    /// diagnostics attribute interference from low-weight types.
    pub type_key: u64,
    /// Agent slots of the pair (u64::MAX for the dummy).
    pub pair: (u64, u64),
    /// The uniformly picked mark candidate.
    pub pick: u64,
    pub marked: bool,
    /// Whether the selection was the forced opposite of a first mark.
    pub forced: bool,
    pub selected: u64,
}

fn slot_key(slot: Option<usize>) -> u64 {
    slot.map(|j| j as u64).unwrap_or(u64::MAX)
}

/// One two-way step shared by the AdWords and Display algorithms. `mark_all`
/// marks every step (Display); otherwise only steps whose picked agent has a
/// large bid are marked (AdWords). Returns the selected slot.
#[allow(clippy::too_many_arguments)]
pub(crate) fn step_two_way_marked(
    state: &mut AdWordsState,
    pair: (Option<usize>, Option<usize>),
    bids: (f64, f64),
    budgets: &[f64],
    mark_all: bool,
    seed: u64,
    step: usize,
    type_key: u64,
    trace: &mut Vec<TwoWayTrace>,
) -> Option<usize> {
    let (a, b) = pair;
    let ka = slot_key(a);
    let kb = slot_key(b);
    let pick_a = coin(seed, Purpose::Mark, step as u64, type_key, ka ^ kb.rotate_left(17));
    let (m, bid_m) = if pick_a { (a, bids.0) } else { (b, bids.1) };
    let markable = match m {
        Some(j) => mark_all || is_large_bid(bid_m, budgets[j]),
        // The dummy never carries a bid; Display marks it anyway (a mark on
        // a dummy never forces anything since each dummy occurrence is
        // fresh).
        None => mark_all,
    };
    let mut forced = false;
    let selected = if markable {
        if let Some(j) = m {
            let prior = state.marks[j].marks;
            if prior == 1 {
                // Second mark: the opposite selection w.r.t. m.
                state.marks[j].marks = 2;
                forced = true;
                if state.marks[j].first_selected {
                    if pick_a { b } else { a }
                } else {
                    m
                }
            } else {
                if prior == 0 {
                    state.marks[j].marks = 1;
                }
                let pick_first =
                    coin(seed, Purpose::Choice, step as u64, type_key, ka ^ kb.rotate_left(17));
                let sel = if pick_first { a } else { b };
                if prior == 0 {
                    state.marks[j].first_selected = sel == m;
                }
                sel
            }
        } else {
            // Marked dummy: plain uniform selection.
            let pick_first =
                coin(seed, Purpose::Choice, step as u64, type_key, ka ^ kb.rotate_left(17));
            if pick_first {
                a
            } else {
                b
            }
        }
    } else {
        let pick_first =
            coin(seed, Purpose::Choice, step as u64, type_key, ka ^ kb.rotate_left(17));
        if pick_first {
            a
        } else {
            b
        }
    };
    trace.push(TwoWayTrace {
        step,
        type_key,
        pair: (ka, kb),
        pick: slot_key(m),
        marked: markable && m.is_some(),
        forced,
        selected: slot_key(selected),
    });
    selected
}

/// Two-way SOCS step for AdWords: pick m uniformly, mark if m's bid is
/// large, oppose m's first-marked selection on its second mark, otherwise
/// select uniformly. Updates spend.
#[allow(clippy::too_many_arguments)]
pub fn step_two_way_adwords(
    state: &mut AdWordsState,
    pair: (Option<usize>, Option<usize>),
    bids: (f64, f64),
    budgets: &[f64],
    seed: u64,
    step: usize,
    type_key: u64,
    trace: &mut Vec<TwoWayTrace>,
) -> Option<usize> {
    let selected = step_two_way_marked(
        state, pair, bids, budgets, false, seed, step, type_key, trace,
    );
    if let Some(j) = selected {
        let bid = if Some(j) == pair.0 { bids.0 } else { bids.1 };
        state.spent[j] += bid;
    }
    selected
}

#[derive(Debug, Clone, Serialize)]
pub struct AssignRecord {
    pub step: usize,
    pub type_idx: usize,
    pub agent: usize,
    pub amount: f64,
}

#[derive(Debug, Clone)]
pub struct AdWordsOutcome {
    pub assigned: Vec<AssignRecord>,
    pub spent: Vec<f64>,
    pub trace: Vec<TwoWayTrace>,
}

impl AdWordsOutcome {
    /// Per-agent value min{spent, budget}.
    pub fn values(&self, budgets: &[f64]) -> Vec<f64> {
        self.spent
            .iter()
            .zip(budgets)
            .map(|(s, b)| s.min(*b))
            .collect()
    }
}

/// General SOCS for AdWords: type decomposition per step, one-way surrogates
/// allocate outright, two-way surrogates go through the mark-and-oppose
/// stepper. Agent value is min{sum of allocated bids, budget}.
pub fn run_general_adwords(
    instance: &Instance,
    alloc: &FractionalAllocation,
    arrivals: &ArrivalSequence,
    seed: u64,
) -> Result<AdWordsOutcome> {
    if instance.class != ProblemClass::AdWords {
        return Err(SocsError::InvalidArgument("AdWords instance required".into()));
    }
    if !alloc.matches_instance(instance) {
        return Err(SocsError::InvalidAllocation(
            "allocation dimensions do not match instance".into(),
        ));
    }
    let budgets: Vec<f64> = instance.agents.iter().map(|a| a.budget).collect();
    let schedule = step_schedule(instance, alloc);
    let mut state = AdWordsState::new(instance.n_agents());
    let mut assigned = Vec::new();
    let mut trace = Vec::new();
    for t in 0..instance.horizon {
        if let Some(i) = arrivals.0[t] {
            let f = instance.arrival_prob(t, i);
            let mu = alloc.mu_vector(t, i, f);
            let eta = 0.5 * uniform(seed, Purpose::Eta, t as u64, 0, 0);
            let bid_of = |slot: Option<usize>| -> f64 {
                slot.and_then(|j| instance.types[i].edge_value(j)).unwrap_or(0.0)
            };
            match sample_surrogate(&mu, eta)? {
                SurrogateType::OneWay(Some(j)) => {
                    let bid = bid_of(Some(j));
                    state.spent[j] += bid;
                    assigned.push(AssignRecord { step: t, type_idx: i, agent: j, amount: bid });
                }
                SurrogateType::OneWay(None) => {}
                SurrogateType::TwoWay(a, b) => {
                    let bids = (bid_of(a), bid_of(b));
                    if let Some(j) = step_two_way_adwords(
                        &mut state, (a, b), bids, &budgets, seed, t, i as u64, &mut trace,
                    ) {
                        assigned.push(AssignRecord {
                            step: t,
                            type_idx: i,
                            agent: j,
                            amount: bid_of(Some(j)),
                        });
                    }
                }
            }
        }
        for (y, inc) in state.y.iter_mut().zip(&schedule[t]) {
            *y += inc;
        }
    }
    Ok(AdWordsOutcome { assigned, spent: state.spent, trace })
}

/// One step of an adversarial OCS sequence: per-agent bids and a fractional
/// allocation summing to one.
#[derive(Debug, Clone)]
pub struct OcsStep {
    pub bids: Vec<f64>,
    pub mu: Vec<f64>,
}

/// Multi-way OCS for AdWords on an adversarial deterministic sequence: the
/// only stochasticity is the internal surrogate sampling and the two-way
/// coins; nothing inspects future steps.
pub fn run_multiway_ocs_adwords(
    sequence: &[OcsStep],
    budgets: &[f64],
    seed: u64,
) -> Result<AdWordsOutcome> {
    let n = budgets.len();
    for (t, step) in sequence.iter().enumerate() {
        if step.bids.len() != n || step.mu.len() != n {
            return Err(SocsError::InvalidArgument(format!(
                "step {t} has wrong dimensions"
            )));
        }
        let total: f64 = step.mu.iter().sum();
        if (total - 1.0).abs() > 1e-9 || step.mu.iter().any(|&m| m < 0.0) {
            return Err(SocsError::InvalidArgument(format!(
                "step {t} fractional allocation is not a distribution (sum {total})"
            )));
        }
    }
    let mut state = AdWordsState::new(n);
    let mut assigned = Vec::new();
    let mut trace = Vec::new();
    for (t, item) in sequence.iter().enumerate() {
        let eta = 0.5 * uniform(seed, Purpose::Eta, t as u64, 0, 0);
        match sample_surrogate(&item.mu, eta)? {
            SurrogateType::OneWay(Some(j)) => {
                state.spent[j] += item.bids[j];
                assigned.push(AssignRecord { step: t, type_idx: t, agent: j, amount: item.bids[j] });
            }
            SurrogateType::OneWay(None) => {}
            SurrogateType::TwoWay(a, b) => {
                let bid_of =
                    |slot: Option<usize>| -> f64 { slot.map(|j| item.bids[j]).unwrap_or(0.0) };
                let bids = (bid_of(a), bid_of(b));
                if let Some(j) = step_two_way_adwords(
                    &mut state, (a, b), bids, budgets, seed, t, t as u64, &mut trace,
                ) {
                    assigned.push(AssignRecord {
                        step: t,
                        type_idx: t,
                        agent: j,
                        amount: item.bids[j],
                    });
                }
            }
        }
        for j in 0..n {
            state.y[j] += item.mu[j] * item.bids[j] / budgets[j];
        }
    }
    Ok(AdWordsOutcome { assigned, spent: state.spent, trace })
}

// ---------------------------------------------------------------------------
// Balance-OCS
// ---------------------------------------------------------------------------

const BALANCE_SPAN: f64 = 40.0;
const BALANCE_NODES: usize = 20_001;

/// The gain-splitting curves of the Balance allocator:
/// Gamma = 1 - int_0^inf g(z) e^{-z} dz,
/// beta(y) = g(y) - e^y int_y^inf g(z) e^{-z} dz, alpha = -g' - beta.
#[derive(Debug, Clone)]
pub struct BalanceParams {
    gamma: f64,
    g_table: GridTable,
    beta_table: GridTable,
}

impl BalanceParams {
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn beta(&self, y: f64) -> f64 {
        self.beta_table.eval(y)
    }

    /// Numeric inverse of the strictly decreasing beta, clamped to the
    /// tabulated range.
    pub fn beta_inv(&self, v: f64) -> f64 {
        let b0 = self.beta(0.0);
        if v >= b0 {
            return 0.0;
        }
        if v <= self.beta(BALANCE_SPAN) {
            return BALANCE_SPAN;
        }
        bisect(|y| self.beta(y) - v, 0.0, BALANCE_SPAN, 80)
    }

    pub fn alpha(&self, y: f64) -> f64 {
        -self.g_derivative(y) - self.beta(y)
    }

    fn g_derivative(&self, y: f64) -> f64 {
        let h = 1e-5;
        let g = |z: f64| self.g_table.eval(z);
        if y < 2.0 * h {
            // One-sided third-order stencil at the left boundary.
            (-11.0 * g(y) + 18.0 * g(y + h) - 9.0 * g(y + 2.0 * h) + 2.0 * g(y + 3.0 * h))
                / (6.0 * h)
        } else if y > BALANCE_SPAN - 2.0 * h {
            (11.0 * g(y) - 18.0 * g(y - h) + 9.0 * g(y - 2.0 * h) - 2.0 * g(y - 3.0 * h))
                / (6.0 * h)
        } else {
            crate::numeric::derivative(g, y, h)
        }
    }
}

/// Build the Balance parameters from a convergence-rate curve. The tail of
/// the Gamma/beta quadrature is truncated at z = 40 (error under e^{-40}
/// since g <= 1).
pub fn balance_parameters<F: Fn(f64) -> f64>(g: F) -> Result<BalanceParams> {
    let g_table = GridTable::build(&g, BALANCE_SPAN, BALANCE_NODES);
    if (g_table.values[0] - 1.0).abs() > 1e-9 {
        return Err(SocsError::InvalidArgument(format!(
            "g(0) = {} must be 1",
            g_table.values[0]
        )));
    }
    for w in g_table.values.windows(2) {
        if w[1] > w[0] + 1e-9 {
            return Err(SocsError::InvalidArgument(
                "g must be non-increasing".into(),
            ));
        }
    }
    let h = g_table.h;
    let k_count = g_table.values.len();
    let phi: Vec<f64> = g_table
        .values
        .iter()
        .enumerate()
        .map(|(k, &gv)| gv * (-(k as f64) * h).exp())
        .collect();
    // Backward cumulative tail integral on the grid with per-panel cubic
    // quadrature (4-node Newton-Cotes), O(h^4) composite accuracy.
    let mut tail = vec![0.0f64; k_count];
    for k in (0..k_count - 1).rev() {
        let panel = if k == 0 {
            h / 24.0 * (9.0 * phi[0] + 19.0 * phi[1] - 5.0 * phi[2] + phi[3])
        } else if k + 2 < k_count {
            h / 24.0 * (-phi[k - 1] + 13.0 * phi[k] + 13.0 * phi[k + 1] - phi[k + 2])
        } else {
            h / 24.0 * (phi[k - 2] - 5.0 * phi[k - 1] + 19.0 * phi[k] + 9.0 * phi[k + 1])
        };
        tail[k] = tail[k + 1] + panel;
    }
    let beta_vals: Vec<f64> = (0..k_count)
        .map(|k| g_table.values[k] - ((k as f64) * h).exp() * tail[k])
        .collect();
    for w in beta_vals.windows(2) {
        if w[1] > w[0] + 1e-9 {
            return Err(SocsError::InvalidArgument(
                "beta is not decreasing; g is too flat for Balance".into(),
            ));
        }
    }
    let beta_table = GridTable { h, values: beta_vals };
    Ok(BalanceParams {
        gamma: 1.0 - tail[0],
        g_table,
        beta_table,
    })
}

/// Water-filling step of Balance: find the threshold theta with
/// sum_j (B_j / b_j) (beta^{-1}(theta / b_j) - y_j)^+ = 1 and return the
/// per-agent fractional allocation.
pub fn balance_fractional_step(
    y: &[f64],
    bids: &[f64],
    budgets: &[f64],
    params: &BalanceParams,
) -> Result<Vec<f64>> {
    let n = bids.len();
    let share = |theta: f64, j: usize| -> f64 {
        if bids[j] <= 0.0 {
            return 0.0;
        }
        (budgets[j] / bids[j]) * (params.beta_inv(theta / bids[j]) - y[j]).max(0.0)
    };
    let total = |theta: f64| -> f64 { (0..n).map(|j| share(theta, j)).sum() };
    let mut hi: f64 = 0.0;
    for j in 0..n {
        if bids[j] > 0.0 {
            hi = hi.max(bids[j] * params.beta(y[j]));
        }
    }
    if hi <= 0.0 {
        return Err(SocsError::InvalidArgument(
            "no positive bid with remaining beta mass".into(),
        ));
    }
    let mut lo = hi;
    let mut guard = 0;
    while total(lo) < 1.0 {
        lo *= 0.5;
        guard += 1;
        if guard > 400 {
            return Err(SocsError::InvalidArgument(
                "cannot allocate a full unit: all agents saturated".into(),
            ));
        }
    }
    let theta = bisect(|th| total(th) - 1.0, lo, hi, 100);
    let mut mu: Vec<f64> = (0..n).map(|j| share(theta, j)).collect();
    let sum: f64 = mu.iter().sum();
    if sum <= 0.0 {
        return Err(SocsError::InvalidArgument("empty allocation".into()));
    }
    for m in &mut mu {
        *m /= sum;
    }
    Ok(mu)
}

/// The deterministic fractional pass of Balance over a whole bid sequence.
pub fn balance_fractional_sequence(
    bids: &[Vec<f64>],
    budgets: &[f64],
    params: &BalanceParams,
) -> Result<Vec<OcsStep>> {
    let n = budgets.len();
    let mut y = vec![0.0; n];
    let mut steps = Vec::with_capacity(bids.len());
    for step_bids in bids {
        if step_bids.len() != n {
            return Err(SocsError::InvalidArgument("bid row dimension mismatch".into()));
        }
        let mu = balance_fractional_step(&y, step_bids, budgets, params)?;
        for j in 0..n {
            y[j] += mu[j] * step_bids[j] / budgets[j];
        }
        steps.push(OcsStep { bids: step_bids.clone(), mu });
    }
    Ok(steps)
}

/// Balance-OCS end to end: the fractional water-filling pass chained into
/// the multi-way OCS rounding.
pub fn run_balance_ocs_end_to_end(
    bids: &[Vec<f64>],
    budgets: &[f64],
    params: &BalanceParams,
    seed: u64,
) -> Result<AdWordsOutcome> {
    let steps = balance_fractional_sequence(bids, budgets, params)?;
    run_multiway_ocs_adwords(&steps, budgets, seed)
}

/// Offline optimum of an adversarial AdWords sequence by exhaustive
/// assignment with budget caps (items <= 14).
pub fn ocs_sequence_optimum(bids: &[Vec<f64>], budgets: &[f64]) -> Result<f64> {
    if bids.len() > 14 {
        return Err(SocsError::SizeCap(bids.len(), 14));
    }
    fn rec(bids: &[Vec<f64>], budgets: &[f64], t: usize, spent: &mut [f64]) -> f64 {
        if t == bids.len() {
            return spent
                .iter()
                .zip(budgets)
                .map(|(s, b)| s.min(*b))
                .sum();
        }
        let mut best = rec(bids, budgets, t + 1, spent);
        for j in 0..budgets.len() {
            if bids[t][j] > 0.0 {
                spent[j] += bids[t][j];
                best = best.max(rec(bids, budgets, t + 1, spent));
                spent[j] -= bids[t][j];
            }
        }
        best
    }
    let mut spent = vec![0.0; budgets.len()];
    Ok(rec(bids, budgets, 0, &mut spent))
}
