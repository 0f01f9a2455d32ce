//! Exact oracles for small instances: the subset recurrence table, forward
//! state DPs for the matching / AdWords / Display algorithms, the Converse
//! Jensen checker, and the discretized tightness instance.

use crate::adwords::is_large_bid;
use crate::allocation::FractionalAllocation;
use crate::decomposition::{surrogate_distribution, SurrogateType};
use crate::display::weight_levels;
use crate::error::{Result, SocsError};
use crate::instance::{AgentInfo, Instance, OnlineType, ProblemClass};
use std::collections::BTreeMap;

pub const RECURRENCE_AGENT_CAP: usize = 16;
pub const DP_STATE_CAP: usize = 1_000_000;

/// Per-step distribution over surrogate outcomes, aggregated over online
/// types (sufficient for matching, where the type identity is irrelevant).
#[derive(Debug, Clone, Default)]
pub struct SurrogateStep {
    pub one_way: Vec<(usize, f64)>,
    /// Real pairs, stored with a < b.
    pub two_way: Vec<((usize, usize), f64)>,
    /// Pairs of a real agent with a fresh dummy.
    pub two_way_dummy: Vec<(usize, f64)>,
}

impl SurrogateStep {
    /// Expected allocation y_j^t = f_j + (1/2) sum of pair masses with j.
    pub fn step_allocation(&self, n_agents: usize) -> Vec<f64> {
        let mut y = vec![0.0; n_agents];
        for &(j, f) in &self.one_way {
            y[j] += f;
        }
        for &((a, b), f) in &self.two_way {
            y[a] += 0.5 * f;
            y[b] += 0.5 * f;
        }
        for &(j, f) in &self.two_way_dummy {
            y[j] += 0.5 * f;
        }
        y
    }

    fn total_mass(&self) -> f64 {
        self.one_way.iter().map(|&(_, f)| f).sum::<f64>()
            + self.two_way.iter().map(|&(_, f)| f).sum::<f64>()
            + self.two_way_dummy.iter().map(|&(_, f)| f).sum::<f64>()
    }
}

#[derive(Debug, Clone)]
pub struct SurrogateInstance {
    pub n_agents: usize,
    pub steps: Vec<SurrogateStep>,
}

impl SurrogateInstance {
    /// Cumulative allocation schedule y_j^{1:t} with `y[t]` covering steps
    /// 1..=t (so `y[0]` is all zeros).
    pub fn cumulative(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.n_agents]];
        for step in &self.steps {
            let mut next = out.last().unwrap().clone();
            for (v, inc) in next.iter_mut().zip(step.step_allocation(self.n_agents)) {
                *v += inc;
            }
            out.push(next);
        }
        out
    }

    /// Whether every step is purely two-way (no one-way mass).
    pub fn is_two_way(&self) -> bool {
        self.steps.iter().all(|s| s.one_way.is_empty())
    }
}

/// Aggregate an instance and allocation into per-step surrogate
/// distributions (matching classes only: the original type identity drops
/// out).
pub fn build_surrogate_instance(
    instance: &Instance,
    alloc: &FractionalAllocation,
) -> Result<SurrogateInstance> {
    if !alloc.matches_instance(instance) {
        return Err(SocsError::InvalidAllocation(
            "allocation dimensions do not match instance".into(),
        ));
    }
    let n = instance.n_agents();
    let mut steps = Vec::with_capacity(instance.horizon);
    for t in 0..instance.horizon {
        let mut step = SurrogateStep::default();
        let mut one_way: BTreeMap<usize, f64> = BTreeMap::new();
        let mut two_way: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        let mut dummy: BTreeMap<usize, f64> = BTreeMap::new();
        for &(i, f) in &instance.arrivals[t] {
            if f <= 0.0 {
                continue;
            }
            let mu = alloc.mu_vector(t, i, f);
            for (ty, p) in surrogate_distribution(&mu)? {
                let mass = f * p;
                match ty {
                    SurrogateType::OneWay(Some(j)) => *one_way.entry(j).or_insert(0.0) += mass,
                    SurrogateType::OneWay(None) => {}
                    SurrogateType::TwoWay(Some(a), Some(b)) => {
                        let key = (a.min(b), a.max(b));
                        *two_way.entry(key).or_insert(0.0) += mass;
                    }
                    SurrogateType::TwoWay(Some(j), None)
                    | SurrogateType::TwoWay(None, Some(j)) => {
                        *dummy.entry(j).or_insert(0.0) += mass;
                    }
                    SurrogateType::TwoWay(None, None) => {}
                }
            }
        }
        step.one_way = one_way.into_iter().collect();
        step.two_way = two_way.into_iter().collect();
        step.two_way_dummy = dummy.into_iter().collect();
        debug_assert!(step.total_mass() <= 1.0 + 1e-9);
        steps.push(step);
    }
    Ok(SurrogateInstance { n_agents: n, steps })
}

// ---------------------------------------------------------------------------
// Subset recurrence table
// ---------------------------------------------------------------------------

/// u_S^t for every subset S of agents and every prefix length t.
#[derive(Debug, Clone)]
pub struct SubsetTable {
    pub n_agents: usize,
    pub horizon: usize,
    /// `u[t][mask]`, t in 0..=horizon.
    pub u: Vec<Vec<f64>>,
    /// Cumulative y schedule, `y[t][j]` = y_j^{1:t}.
    pub y: Vec<Vec<f64>>,
}

impl SubsetTable {
    pub fn unmatched_probability(&self, agent: usize) -> f64 {
        self.u[self.horizon][1 << agent]
    }

    /// CSV dump: one row per (subset bitmask, t) with the value u_S^t.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("mask,t,u\n");
        for mask in 0..(1usize << self.n_agents) {
            for t in 0..=self.horizon {
                out.push_str(&format!("{mask},{t},{}\n", self.u[t][mask]));
            }
        }
        out
    }
}

/// Exact u_S^t via the selection-rule recurrence with weights
/// e^{2 y^{1:(t-1)}}. One-way types and dummy pairs are handled by the
/// general form.
pub fn recurrence_table(surr: &SurrogateInstance) -> Result<SubsetTable> {
    let n = surr.n_agents;
    if n > RECURRENCE_AGENT_CAP {
        return Err(SocsError::SizeCap(n, RECURRENCE_AGENT_CAP));
    }
    let masks = 1usize << n;
    let horizon = surr.steps.len();
    let y = surr.cumulative();
    let mut u = vec![vec![1.0f64; masks]; horizon + 1];
    for t in 1..=horizon {
        let step = &surr.steps[t - 1];
        let w: Vec<f64> = (0..n).map(|j| (2.0 * y[t - 1][j]).exp()).collect();
        for mask in 0..masks {
            if mask == 0 {
                u[t][0] = 1.0;
                continue;
            }
            let prev = &u[t - 1];
            let mut touched = 0.0;
            let mut acc = 0.0;
            for &(j, f) in &step.one_way {
                if mask >> j & 1 == 1 {
                    touched += f;
                }
            }
            for &((a, b), f) in &step.two_way {
                let ina = mask >> a & 1 == 1;
                let inb = mask >> b & 1 == 1;
                if ina || inb {
                    touched += f;
                }
                if ina && !inb {
                    acc += f * prev[mask | (1 << b)] * w[b] / (w[a] + w[b]);
                } else if inb && !ina {
                    acc += f * prev[mask | (1 << a)] * w[a] / (w[a] + w[b]);
                }
            }
            for &(j, f) in &step.two_way_dummy {
                if mask >> j & 1 == 1 {
                    touched += f;
                    // The fresh dummy has weight e^0; S+dummy is unmatched
                    // exactly when S is.
                    acc += f * prev[mask] / (w[j] + 1.0);
                }
            }
            u[t][mask] = (1.0 - touched) * prev[mask] + acc;
        }
    }
    Ok(SubsetTable { n_agents: n, horizon, u, y })
}

// ---------------------------------------------------------------------------
// Forward DP for matching
// ---------------------------------------------------------------------------

/// Distribution over matched-agent masks after each step, processed in the
/// given order with y accumulated along that order. An independent oracle
/// for the runners: it evolves the joint matched-set distribution forward
/// instead of using the per-subset recurrence.
pub fn matching_mask_dp_with_order(
    surr: &SurrogateInstance,
    order: &[usize],
) -> Result<Vec<Vec<f64>>> {
    let n = surr.n_agents;
    if (1usize << n) > DP_STATE_CAP {
        return Err(SocsError::SizeCap(1 << n, DP_STATE_CAP));
    }
    let masks = 1usize << n;
    let mut dist = vec![0.0f64; masks];
    dist[0] = 1.0;
    let mut history = vec![dist.clone()];
    let mut y = vec![0.0f64; n];
    for &t in order {
        let step = &surr.steps[t];
        let w: Vec<f64> = (0..n).map(|j| (2.0 * y[j]).exp()).collect();
        let mut next = vec![0.0f64; masks];
        for (mask, &p) in dist.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let mut stay = 1.0;
            for &(j, f) in &step.one_way {
                stay -= f;
                if mask >> j & 1 == 0 {
                    next[mask | (1 << j)] += p * f;
                } else {
                    next[mask] += p * f;
                }
            }
            for &((a, b), f) in &step.two_way {
                stay -= f;
                let ina = mask >> a & 1 == 1;
                let inb = mask >> b & 1 == 1;
                match (ina, inb) {
                    (true, true) => next[mask] += p * f,
                    (true, false) => next[mask | (1 << b)] += p * f,
                    (false, true) => next[mask | (1 << a)] += p * f,
                    (false, false) => {
                        let pa = w[a] / (w[a] + w[b]);
                        next[mask | (1 << a)] += p * f * pa;
                        next[mask | (1 << b)] += p * f * (1.0 - pa);
                    }
                }
            }
            for &(j, f) in &step.two_way_dummy {
                stay -= f;
                if mask >> j & 1 == 0 {
                    let pj = w[j] / (w[j] + 1.0);
                    next[mask | (1 << j)] += p * f * pj;
                    next[mask] += p * f * (1.0 - pj);
                } else {
                    next[mask] += p * f;
                }
            }
            next[mask] += p * stay;
        }
        dist = next;
        history.push(dist.clone());
        for (yj, inc) in y.iter_mut().zip(step.step_allocation(n)) {
            *yj += inc;
        }
    }
    Ok(history)
}

/// Per-agent unmatched probabilities of the general matching SOCS in
/// arrival order.
pub fn exact_matching_dp(surr: &SurrogateInstance) -> Result<Vec<f64>> {
    let order: Vec<usize> = (0..surr.steps.len()).collect();
    let history = matching_mask_dp_with_order(surr, &order)?;
    let last = history.last().unwrap();
    Ok((0..surr.n_agents)
        .map(|j| {
            last.iter()
                .enumerate()
                .filter(|(mask, _)| mask >> j & 1 == 0)
                .map(|(_, &p)| p)
                .sum()
        })
        .collect())
}

/// Exact per-agent unmatched probabilities in the random-order model by
/// averaging the mask DP over all T! orders (T <= 7).
pub fn exact_random_order_dp(surr: &SurrogateInstance) -> Result<Vec<f64>> {
    let horizon = surr.steps.len();
    if horizon > 7 {
        return Err(SocsError::SizeCap(horizon, 7));
    }
    let mut order: Vec<usize> = (0..horizon).collect();
    let mut acc = vec![0.0f64; surr.n_agents];
    let mut count = 0u64;
    permute(&mut order, 0, &mut |perm| {
        let history = matching_mask_dp_with_order(surr, perm)?;
        let last = history.last().unwrap();
        for (j, slot) in acc.iter_mut().enumerate() {
            *slot += last
                .iter()
                .enumerate()
                .filter(|(mask, _)| mask >> j & 1 == 0)
                .map(|(_, &p)| p)
                .sum::<f64>();
        }
        count += 1;
        Ok(())
    })?;
    for slot in &mut acc {
        *slot /= count as f64;
    }
    Ok(acc)
}

fn permute<F: FnMut(&[usize]) -> Result<()>>(
    items: &mut Vec<usize>,
    k: usize,
    visit: &mut F,
) -> Result<()> {
    if k == items.len() {
        return visit(items);
    }
    for i in k..items.len() {
        items.swap(k, i);
        permute(items, k + 1, visit)?;
        items.swap(k, i);
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Forward DP for AdWords and Display Ads
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct AgentCode {
    /// Counts of received distinct values (AdWords) or the best weight-level
    /// index + 1 (Display).
    payload: [u8; 3],
    /// 0, 1, or 2 saturating marks.
    marks: u8,
    /// Selected in the first marked step (meaningful only at marks == 1).
    first_selected: bool,
}

impl AgentCode {
    fn fresh() -> AgentCode {
        AgentCode { payload: [0; 3], marks: 0, first_selected: false }
    }
}

type JointState = Vec<AgentCode>;

struct Transition {
    /// probability, involved slots and their values.
    prob: f64,
    kind: SurrogateType,
    values: (f64, f64),
}

fn step_transitions(
    instance: &Instance,
    alloc: &FractionalAllocation,
    t: usize,
) -> Result<Vec<Transition>> {
    let mut out = Vec::new();
    for &(i, f) in &instance.arrivals[t] {
        if f <= 0.0 {
            continue;
        }
        let mu = alloc.mu_vector(t, i, f);
        for (ty, p) in surrogate_distribution(&mu)? {
            let value_of = |slot: Option<usize>| -> f64 {
                slot.and_then(|j| instance.types[i].edge_value(j)).unwrap_or(0.0)
            };
            let values = match ty {
                SurrogateType::OneWay(a) => (value_of(a), 0.0),
                SurrogateType::TwoWay(a, b) => (value_of(a), value_of(b)),
            };
            out.push(Transition { prob: f * p, kind: ty, values });
        }
    }
    Ok(out)
}

/// What happens to the involved agents in a two-way step, in probability:
/// a list of (probability, select_first_slot, mark_update). Mirrors the
/// mark-and-oppose stepper exactly.
fn two_way_branches(
    code_m: AgentCode,
    markable: bool,
    m_is_first: bool,
) -> Vec<(f64, bool, Option<AgentCode>)> {
    // Returns (prob, selected == first slot?, updated code of m).
    if markable {
        match code_m.marks {
            1 => {
                let select_m = !code_m.first_selected;
                let updated = AgentCode { marks: 2, first_selected: false, ..code_m };
                vec![(1.0, select_m == m_is_first, Some(updated))]
            }
            0 => {
                let sel_first = AgentCode {
                    marks: 1,
                    first_selected: m_is_first,
                    ..code_m
                };
                let sel_second = AgentCode {
                    marks: 1,
                    first_selected: !m_is_first,
                    ..code_m
                };
                vec![(0.5, true, Some(sel_first)), (0.5, false, Some(sel_second))]
            }
            _ => vec![(0.5, true, Some(code_m)), (0.5, false, Some(code_m))],
        }
    } else {
        vec![(0.5, true, None), (0.5, false, None)]
    }
}

enum DpKind {
    AdWords { budgets: Vec<f64>, bids: Vec<Vec<f64>> },
    Display { levels: Vec<Vec<f64>> },
}

fn payload_apply(
    kind: &DpKind,
    agent: usize,
    value: f64,
    code: &mut AgentCode,
) -> Result<()> {
    match kind {
        DpKind::AdWords { bids, .. } => {
            if value <= 0.0 {
                return Ok(());
            }
            let Some(slot) = bids[agent].iter().position(|&b| (b - value).abs() < 1e-12) else {
                return Err(SocsError::InvalidArgument(
                    "bid value not in the agent's distinct-bid table".into(),
                ));
            };
            code.payload[slot] = code.payload[slot].saturating_add(1);
        }
        DpKind::Display { levels } => {
            let idx = levels[agent]
                .iter()
                .position(|&w| (w - value).abs() < 1e-12)
                .map(|k| k as u8 + 1)
                .unwrap_or(0);
            code.payload[0] = code.payload[0].max(idx);
        }
    }
    Ok(())
}

fn run_value_dp(
    instance: &Instance,
    alloc: &FractionalAllocation,
    kind: &DpKind,
) -> Result<BTreeMap<JointState, f64>> {
    let n = instance.n_agents();
    let mut dist: BTreeMap<JointState, f64> = BTreeMap::new();
    dist.insert(vec![AgentCode::fresh(); n], 1.0);
    let mark_all = matches!(kind, DpKind::Display { .. });
    for t in 0..instance.horizon {
        let transitions = step_transitions(instance, alloc, t)?;
        let mut next: BTreeMap<JointState, f64> = BTreeMap::new();
        for (state, &p) in &dist {
            let mut stay = 1.0;
            for tr in &transitions {
                stay -= tr.prob;
                match tr.kind {
                    SurrogateType::OneWay(None) | SurrogateType::TwoWay(None, None) => {
                        *next.entry(state.clone()).or_insert(0.0) += p * tr.prob;
                    }
                    SurrogateType::OneWay(Some(j)) => {
                        let mut st = state.clone();
                        payload_apply(kind, j, tr.values.0, &mut st[j])?;
                        *next.entry(st).or_insert(0.0) += p * tr.prob;
                    }
                    SurrogateType::TwoWay(a, b) => {
                        // Pick m uniformly between the two slots.
                        for (m_slot, m_is_first) in [(a, true), (b, false)] {
                            let half = 0.5 * p * tr.prob;
                            let m_value = if m_is_first { tr.values.0 } else { tr.values.1 };
                            let markable = match (m_slot, kind) {
                                (Some(j), DpKind::AdWords { budgets, .. }) => {
                                    is_large_bid(m_value, budgets[j])
                                }
                                (Some(_), DpKind::Display { .. }) => true,
                                (None, _) => mark_all,
                            };
                            let code_m = m_slot.map(|j| state[j]).unwrap_or(AgentCode::fresh());
                            let branches = if m_slot.is_some() {
                                two_way_branches(code_m, markable, m_is_first)
                            } else {
                                // Dummy pick: uniform selection, no marks.
                                vec![(0.5, true, None), (0.5, false, None)]
                            };
                            for (q, select_first, updated_m) in branches {
                                let mut st = state.clone();
                                if let (Some(j), Some(code)) = (m_slot, updated_m) {
                                    st[j] = code;
                                }
                                let selected = if select_first { a } else { b };
                                let value = if select_first { tr.values.0 } else { tr.values.1 };
                                if let Some(j) = selected {
                                    payload_apply(kind, j, value, &mut st[j])?;
                                }
                                *next.entry(st).or_insert(0.0) += half * q;
                            }
                        }
                    }
                }
            }
            if stay > 1e-15 {
                *next.entry(state.clone()).or_insert(0.0) += p * stay;
            }
        }
        if next.len() > DP_STATE_CAP {
            return Err(SocsError::SizeCap(next.len(), DP_STATE_CAP));
        }
        dist = next;
    }
    Ok(dist)
}

/// Exact per-agent expected unspent budget fraction of the general AdWords
/// SOCS. Each agent may receive at most 3 distinct bid values.
pub fn exact_adwords_dp(instance: &Instance, alloc: &FractionalAllocation) -> Result<Vec<f64>> {
    if instance.class != ProblemClass::AdWords {
        return Err(SocsError::InvalidArgument("AdWords instance required".into()));
    }
    let n = instance.n_agents();
    let mut bids = vec![Vec::new(); n];
    for ty in &instance.types {
        for &(j, b) in &ty.edges {
            if b > 0.0 && !bids[j].iter().any(|&x: &f64| (x - b).abs() < 1e-12) {
                bids[j].push(b);
            }
        }
    }
    for (j, list) in bids.iter().enumerate() {
        if list.len() > 3 {
            return Err(SocsError::SizeCap(list.len(), 3)).map_err(|_| {
                SocsError::InvalidArgument(format!(
                    "agent {j} has {} distinct bids; the DP oracle allows 3",
                    list.len()
                ))
            });
        }
    }
    let budgets: Vec<f64> = instance.agents.iter().map(|a| a.budget).collect();
    let kind = DpKind::AdWords { budgets: budgets.clone(), bids: bids.clone() };
    let dist = run_value_dp(instance, alloc, &kind)?;
    let mut unspent = vec![0.0f64; n];
    for (state, &p) in &dist {
        for j in 0..n {
            let spent: f64 = state[j]
                .payload
                .iter()
                .zip(bids[j].iter().chain([0.0, 0.0, 0.0].iter()))
                .map(|(&c, &b)| c as f64 * b)
                .sum();
            unspent[j] += p * (1.0 - spent.min(budgets[j]) / budgets[j]);
        }
    }
    Ok(unspent)
}

/// Exact per-(agent, weight-level) probabilities of receiving no edge of
/// weight >= w under the general Display SOCS.
pub fn exact_display_dp(
    instance: &Instance,
    alloc: &FractionalAllocation,
) -> Result<Vec<Vec<(f64, f64)>>> {
    if instance.class != ProblemClass::DisplayAds {
        return Err(SocsError::InvalidArgument("Display Ads instance required".into()));
    }
    let n = instance.n_agents();
    let levels: Vec<Vec<f64>> = (0..n).map(|j| weight_levels(instance, j)).collect();
    for (j, list) in levels.iter().enumerate() {
        if list.len() > 3 {
            return Err(SocsError::InvalidArgument(format!(
                "agent {j} has {} weight levels; the DP oracle allows 3",
                list.len()
            )));
        }
    }
    let kind = DpKind::Display { levels: levels.clone() };
    let dist = run_value_dp(instance, alloc, &kind)?;
    let mut out = vec![Vec::new(); n];
    for (j, out_j) in out.iter_mut().enumerate() {
        for (k, &w) in levels[j].iter().enumerate() {
            let mut miss = 0.0;
            for (state, &p) in &dist {
                if (state[j].payload[0] as usize) < k + 1 {
                    miss += p;
                }
            }
            out_j.push((w, miss));
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Converse Jensen and tightness
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct ConverseJensen {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// lhs = sum over the subset of (2x - f)^+, rhs = 1 - ln 2 +
/// 2 sum_t (sum_i x)^2; holds iff lhs <= rhs + 1e-10.
pub fn converse_jensen_check(
    instance: &Instance,
    alloc: &FractionalAllocation,
    subset: &[usize],
    agent: usize,
) -> Result<ConverseJensen> {
    if agent >= instance.n_agents() {
        return Err(SocsError::UnknownAgent(agent));
    }
    let mut lhs = 0.0;
    let mut second_moment = 0.0;
    for t in 0..instance.horizon {
        let mut step_mass = 0.0;
        for &i in subset {
            let f = instance.arrival_prob(t, i);
            let x = alloc.get(t, i, agent);
            lhs += (2.0 * x - f).max(0.0);
            step_mass += x;
        }
        second_moment += step_mass * step_mass;
    }
    let rhs = 1.0 - std::f64::consts::LN_2 + 2.0 * second_moment;
    Ok(ConverseJensen { lhs, rhs, holds: lhs <= rhs + 1e-10 })
}

/// The discretized Poisson pair instance: a single pair {1,2} arriving with
/// probability 2y/T in each of T steps, split half-half. As T grows the
/// unmatched probability approaches (1+y) e^{-2y}.
pub fn tightness_instance(y: f64, horizon: usize) -> Result<(Instance, FractionalAllocation)> {
    if y < 0.0 || horizon == 0 {
        return Err(SocsError::InvalidArgument("need y >= 0 and T >= 1".into()));
    }
    let rate = 2.0 * y / horizon as f64;
    if rate > 1.0 {
        return Err(SocsError::InvalidArgument(format!(
            "arrival rate 2y/T = {rate} exceeds 1"
        )));
    }
    let instance = Instance {
        class: ProblemClass::Unweighted,
        horizon,
        agents: vec![
            AgentInfo { id: 1, weight: 1.0, budget: 1.0 },
            AgentInfo { id: 2, weight: 1.0, budget: 1.0 },
        ],
        types: vec![OnlineType { id: 1, edges: vec![(0, 1.0), (1, 1.0)] }],
        arrivals: (0..horizon).map(|_| vec![(0, rate)]).collect(),
    };
    let mut alloc = FractionalAllocation::for_instance(&instance);
    for t in 0..horizon {
        alloc.set(t, 0, 0, 0.5 * rate);
        alloc.set(t, 0, 1, 0.5 * rate);
    }
    Ok((instance, alloc))
}

/// Random two-way matching corpus instance: every type is a pair with
/// half-half allocation.
pub fn random_two_way_instance(
    n_agents: usize,
    horizon: usize,
    seed: u64,
) -> (Instance, FractionalAllocation) {
    use crate::rng::{Purpose, Stream};
    let mut s = Stream::keyed(seed, Purpose::Generate, 7, 0, 0);
    let mut types = Vec::new();
    let mut arrivals = Vec::new();
    for t in 0..horizon {
        let a = (s.next_u64() % n_agents as u64) as usize;
        let mut b = (s.next_u64() % n_agents as u64) as usize;
        if b == a {
            b = (a + 1) % n_agents;
        }
        types.push(OnlineType { id: t as u32 + 1, edges: vec![(a.min(b), 1.0), (a.max(b), 1.0)] });
        arrivals.push(vec![(t, 0.2 + 0.8 * s.next_f64())]);
    }
    let instance = Instance {
        class: ProblemClass::Unweighted,
        horizon,
        agents: (0..n_agents)
            .map(|j| AgentInfo { id: j as u32 + 1, weight: 1.0, budget: 1.0 })
            .collect(),
        types,
        arrivals,
    };
    let mut alloc = FractionalAllocation::for_instance(&instance);
    for t in 0..horizon {
        let f = instance.arrivals[t][0].1;
        for &(j, _) in &instance.types[t].edges {
            alloc.set(t, t, j, 0.5 * f);
        }
    }
    (instance, alloc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rates::{convergence_rate, RateKind};

    fn deterministic_pairs(pairs: &[(usize, usize)], n_agents: usize) -> SurrogateInstance {
        SurrogateInstance {
            n_agents,
            steps: pairs
                .iter()
                .map(|&(a, b)| SurrogateStep {
                    one_way: vec![],
                    two_way: vec![((a.min(b), a.max(b)), 1.0)],
                    two_way_dummy: vec![],
                })
                .collect(),
        }
    }

    #[test]
    fn single_pair_recurrence_values() {
        let surr = deterministic_pairs(&[(0, 1)], 2);
        let table = recurrence_table(&surr).unwrap();
        assert!((table.u[1][0b01] - 0.5).abs() < 1e-15);
        assert!((table.u[1][0b11] - 0.0).abs() < 1e-15);
        assert_eq!(table.u[1][0b00], 1.0);
    }

    #[test]
    fn table_csv_round_trips_values() {
        let surr = deterministic_pairs(&[(0, 1)], 2);
        let table = recurrence_table(&surr).unwrap();
        let csv = table.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("mask,t,u"));
        // mask=1 (agent 0) at t=1 is 0.5.
        assert!(csv.lines().any(|l| l == "1,1,0.5"));
    }

    #[test]
    fn two_step_recurrence_matches_hand_computation() {
        // {1,2} then {1,3}: u_1^2 = 1/2 * 1/(e+1).
        let surr = deterministic_pairs(&[(0, 1), (0, 2)], 3);
        let table = recurrence_table(&surr).unwrap();
        let expect = 0.5 / (std::f64::consts::E + 1.0);
        assert!((table.unmatched_probability(0) - expect).abs() < 1e-15);
    }

    #[test]
    fn table_invariants_on_random_instances() {
        for seed in 0..60 {
            let (inst, alloc) = random_two_way_instance(2 + (seed as usize % 4), 5, seed);
            let surr = build_surrogate_instance(&inst, &alloc).unwrap();
            let table = recurrence_table(&surr).unwrap();
            let masks = 1usize << surr.n_agents;
            for t in 0..=table.horizon {
                assert_eq!(table.u[t][0], 1.0);
                for mask in 0..masks {
                    // Monotone in t.
                    if t > 0 {
                        assert!(table.u[t][mask] <= table.u[t - 1][mask] + 1e-12);
                    }
                    // Subset-monotone: adding agents cannot raise u.
                    for j in 0..surr.n_agents {
                        if mask >> j & 1 == 0 {
                            assert!(
                                table.u[t][mask | (1 << j)] <= table.u[t][mask] + 1e-12
                            );
                        }
                    }
                    // Baseline bound.
                    let ysum: f64 = (0..surr.n_agents)
                        .filter(|&j| mask >> j & 1 == 1)
                        .map(|j| table.y[t][j])
                        .sum();
                    assert!(
                        table.u[t][mask] <= (-ysum).exp() + 1e-12,
                        "baseline violated seed {seed}"
                    );
                }
            }
            // Singleton bound: u_j^T <= (1+y) e^{-2y}.
            for j in 0..surr.n_agents {
                let y = table.y[table.horizon][j];
                assert!(
                    table.unmatched_probability(j)
                        <= convergence_rate(RateKind::TwoWayMatching, y) + 1e-12
                );
            }
        }
    }

    #[test]
    fn recurrence_consistency_residual_is_zero() {
        // Recomputing every entry from the stored previous row reproduces
        // the table bit-for-bit.
        for seed in 0..10 {
            let (inst, alloc) = random_two_way_instance(4, 5, seed + 300);
            let surr = build_surrogate_instance(&inst, &alloc).unwrap();
            let table = recurrence_table(&surr).unwrap();
            let n = surr.n_agents;
            for t in 1..=table.horizon {
                let step = &surr.steps[t - 1];
                let w: Vec<f64> = (0..n).map(|j| (2.0 * table.y[t - 1][j]).exp()).collect();
                for mask in 1..(1usize << n) {
                    let prev = &table.u[t - 1];
                    let mut touched = 0.0;
                    let mut acc = 0.0;
                    for &(j, f) in &step.one_way {
                        if mask >> j & 1 == 1 {
                            touched += f;
                        }
                    }
                    for &((a, b), f) in &step.two_way {
                        let ina = mask >> a & 1 == 1;
                        let inb = mask >> b & 1 == 1;
                        if ina || inb {
                            touched += f;
                        }
                        if ina && !inb {
                            acc += f * prev[mask | (1 << b)] * w[b] / (w[a] + w[b]);
                        } else if inb && !ina {
                            acc += f * prev[mask | (1 << a)] * w[a] / (w[a] + w[b]);
                        }
                    }
                    for &(j, f) in &step.two_way_dummy {
                        if mask >> j & 1 == 1 {
                            touched += f;
                            acc += f * prev[mask] / (w[j] + 1.0);
                        }
                    }
                    let recomputed = (1.0 - touched) * prev[mask] + acc;
                    assert_eq!(recomputed, table.u[t][mask], "residual must be exactly 0");
                }
            }
        }
    }

    #[test]
    fn am_gm_relaxation_holds_entrywise() {
        // The 1/2 e^{y_k - y_j} coefficient dominates the exact selection
        // probability everywhere in the table recomputation.
        for seed in 0..20 {
            let (inst, alloc) = random_two_way_instance(4, 5, seed + 100);
            let surr = build_surrogate_instance(&inst, &alloc).unwrap();
            let table = recurrence_table(&surr).unwrap();
            let n = surr.n_agents;
            for t in 1..=table.horizon {
                let step = &surr.steps[t - 1];
                for mask in 1..(1usize << n) {
                    let prev = &table.u[t - 1];
                    let mut touched = 0.0;
                    let mut relaxed = 0.0;
                    for &((a, b), f) in &step.two_way {
                        let ina = mask >> a & 1 == 1;
                        let inb = mask >> b & 1 == 1;
                        if ina || inb {
                            touched += f;
                        }
                        if ina && !inb {
                            relaxed += 0.5
                                * f
                                * prev[mask | (1 << b)]
                                * (table.y[t - 1][b] - table.y[t - 1][a]).exp();
                        } else if inb && !ina {
                            relaxed += 0.5
                                * f
                                * prev[mask | (1 << a)]
                                * (table.y[t - 1][a] - table.y[t - 1][b]).exp();
                        }
                    }
                    let bound = (1.0 - touched) * prev[mask] + relaxed;
                    assert!(table.u[t][mask] <= bound + 1e-12);
                }
            }
        }
    }

    #[test]
    fn dp_agrees_with_recurrence_to_machine_precision() {
        // 100 random two-way instances, |J| <= 5, T <= 6.
        for seed in 0..100 {
            let n_agents = 2 + (seed as usize % 4);
            let horizon = 2 + (seed as usize % 5);
            let (inst, alloc) = random_two_way_instance(n_agents, horizon, seed + 500);
            let surr = build_surrogate_instance(&inst, &alloc).unwrap();
            let table = recurrence_table(&surr).unwrap();
            let order: Vec<usize> = (0..horizon).collect();
            let history = matching_mask_dp_with_order(&surr, &order).unwrap();
            for t in 0..=horizon {
                for mask in 0..(1usize << n_agents) {
                    // u_S^t from the mask distribution: sum over matched
                    // masks disjoint from S.
                    let u: f64 = history[t]
                        .iter()
                        .enumerate()
                        .filter(|(m, _)| m & mask == 0)
                        .map(|(_, &p)| p)
                        .sum();
                    assert!(
                        (u - table.u[t][mask]).abs() < 1e-12,
                        "seed {seed} t {t} mask {mask}: {u} vs {}",
                        table.u[t][mask]
                    );
                }
            }
        }
    }

    #[test]
    fn dp_handles_one_way_and_dummy_mass() {
        // General allocation: mu entries above 1/2 produce one-way types,
        // residual mass produces dummy pairs; DP and recurrence must agree.
        use crate::instance::{generate, GenSpec};
        for seed in 0..40 {
            let inst = generate(GenSpec {
                class: ProblemClass::Unweighted,
                n_types: 3,
                n_agents: 3,
                horizon: 4,
                density: 0.8,
                seed,
            });
            let mut alloc = FractionalAllocation::for_instance(&inst);
            let mut s = crate::rng::Stream::keyed(seed, crate::rng::Purpose::Generate, 9, 0, 0);
            for t in 0..inst.horizon {
                for &(i, f) in &inst.arrivals[t] {
                    let edges = &inst.types[i].edges;
                    let mut left = 1.0f64;
                    for &(j, _) in edges {
                        let share = left * s.next_f64();
                        alloc.set(t, i, j, f * share);
                        left -= share;
                    }
                }
            }
            let surr = build_surrogate_instance(&inst, &alloc).unwrap();
            let table = recurrence_table(&surr).unwrap();
            let dp = exact_matching_dp(&surr).unwrap();
            for j in 0..inst.n_agents() {
                assert!(
                    (dp[j] - table.unmatched_probability(j)).abs() < 1e-12,
                    "seed {seed} agent {j}"
                );
            }
        }
    }

    #[test]
    fn conservation_links_surrogate_and_allocation() {
        use crate::allocation::step_schedule;
        for seed in 0..20 {
            let (inst, alloc) = random_two_way_instance(4, 5, seed + 900);
            let surr = build_surrogate_instance(&inst, &alloc).unwrap();
            let sched = step_schedule(&inst, &alloc);
            for t in 0..inst.horizon {
                let from_surr = surr.steps[t].step_allocation(4);
                for j in 0..4 {
                    assert!((from_surr[j] - sched[t][j]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn converse_jensen_examples() {
        use crate::instance::{AgentInfo, OnlineType};
        let inst = Instance {
            class: ProblemClass::Unweighted,
            horizon: 1,
            agents: vec![AgentInfo { id: 1, weight: 1.0, budget: 1.0 }],
            types: vec![OnlineType { id: 1, edges: vec![(0, 1.0)] }],
            arrivals: vec![vec![(0, 1.0)]],
        };
        let mut alloc = FractionalAllocation::for_instance(&inst);
        alloc.set(0, 0, 0, 1.0);
        let r = converse_jensen_check(&inst, &alloc, &[0], 0).unwrap();
        assert!((r.lhs - 1.0).abs() < 1e-15);
        assert!((r.rhs - (3.0 - std::f64::consts::LN_2)).abs() < 1e-12);
        assert!(r.holds);
        // x = f/2 everywhere: lhs vanishes.
        alloc.set(0, 0, 0, 0.5);
        let r = converse_jensen_check(&inst, &alloc, &[0], 0).unwrap();
        assert_eq!(r.lhs, 0.0);
        assert!(r.holds);
    }

    #[test]
    fn tightness_instance_shape() {
        let (inst, alloc) = tightness_instance(0.5, 100).unwrap();
        assert_eq!(inst.horizon, 100);
        assert!(inst.validate().is_valid());
        let y = crate::allocation::cumulative_allocation(&inst, &alloc, 0, 100, None).unwrap();
        assert!((y - 0.5).abs() < 1e-12);
        assert!(tightness_instance(0.6, 1).is_err());
        let (inst, _) = tightness_instance(0.0, 5).unwrap();
        assert!(inst.arrivals.iter().all(|d| d[0].1 == 0.0));
    }

    #[test]
    fn tightness_limit_approaches_closed_form_in_dp() {
        // With T = 400 the exact DP is already within 2e-3 of (1+y)e^{-2y}.
        for &y in &[0.25, 0.5, 1.0] {
            let (inst, alloc) = tightness_instance(y, 400).unwrap();
            let surr = build_surrogate_instance(&inst, &alloc).unwrap();
            let dp = exact_matching_dp(&surr).unwrap();
            let limit = (1.0 + y) * (-2.0 * y).exp();
            assert!(
                (dp[0] - limit).abs() < 2e-3,
                "y={y}: dp {} vs limit {limit}",
                dp[0]
            );
            // The closed-form bound holds at every T; the discrete value
            // approaches the limit from below.
            assert!(dp[0] <= limit + 1e-12);
        }
    }

    #[test]
    fn random_order_dp_is_permutation_average() {
        let surr = deterministic_pairs(&[(0, 1), (0, 2), (1, 2)], 3);
        let ro = exact_random_order_dp(&surr).unwrap();
        // Symmetric instance: all agents share the same unmatched
        // probability under the shuffle.
        assert!((ro[0] - ro[1]).abs() < 1e-12);
        assert!((ro[1] - ro[2]).abs() < 1e-12);
    }

    #[test]
    fn adwords_dp_small_instance_sanity() {
        use crate::instance::{AgentInfo, OnlineType};
        // Deterministic one-way allocation: unspent = 1 - min(b*T, B)/B.
        let inst = Instance {
            class: ProblemClass::AdWords,
            horizon: 2,
            agents: vec![AgentInfo { id: 1, weight: 1.0, budget: 1.0 }],
            types: vec![OnlineType { id: 1, edges: vec![(0, 0.7)] }],
            arrivals: vec![vec![(0, 1.0)]; 2],
        };
        let mut alloc = FractionalAllocation::for_instance(&inst);
        alloc.set(0, 0, 0, 1.0);
        alloc.set(1, 0, 0, 1.0);
        let unspent = exact_adwords_dp(&inst, &alloc).unwrap();
        assert!((unspent[0] - 0.0).abs() < 1e-12, "{}", unspent[0]);
        // Half allocation: two-way against the dummy each step.
        let mut alloc = FractionalAllocation::for_instance(&inst);
        alloc.set(0, 0, 0, 0.5);
        alloc.set(1, 0, 0, 0.5);
        let unspent = exact_adwords_dp(&inst, &alloc).unwrap();
        // Enumerate by hand: marks with prob 1/2 per step (pick m = agent),
        // selection uniform except forced opposition on second mark.
        // P[no item] = 1/4 - adjustment; just check against Monte Carlo.
        let arr = ArrivalSequence(vec![Some(0); 2]);
        let n = 200_000u64;
        let mut acc = 0.0;
        for seed in 0..n {
            let out = crate::adwords::run_general_adwords(&inst, &alloc, &arr, seed).unwrap();
            acc += 1.0 - out.values(&[1.0])[0];
        }
        let mc = acc / n as f64;
        assert!((mc - unspent[0]).abs() < 0.005, "mc {mc} dp {}", unspent[0]);
    }

    use crate::instance::ArrivalSequence;

    /// A random general allocation over an instance's edges (arbitrary mu,
    /// one-way and dummy mass included).
    fn random_allocation(inst: &Instance, seed: u64) -> FractionalAllocation {
        let mut alloc = FractionalAllocation::for_instance(inst);
        let mut s = crate::rng::Stream::keyed(seed, crate::rng::Purpose::Generate, 9, 0, 0);
        for t in 0..inst.horizon {
            for &(i, f) in &inst.arrivals[t] {
                let mut left = 1.0f64;
                for &(j, _) in &inst.types[i].edges {
                    let share = left * s.next_f64();
                    alloc.set(t, i, j, f * share);
                    left -= share;
                }
            }
        }
        alloc
    }

    #[test]
    fn monte_carlo_agrees_with_dp_across_kinds() {
        use crate::instance::{generate, GenSpec};
        let n = 40_000u64;
        // General matching with one-way and dummy mass.
        for seed in 0..4 {
            let inst = generate(GenSpec {
                class: ProblemClass::Unweighted,
                n_types: 3,
                n_agents: 3,
                horizon: 4,
                density: 0.8,
                seed: 3_100 + seed,
            });
            let alloc = random_allocation(&inst, seed);
            let surr = build_surrogate_instance(&inst, &alloc).unwrap();
            let dp = exact_matching_dp(&surr).unwrap();
            let mut miss = vec![0u64; inst.n_agents()];
            for trial in 0..n {
                let arr = inst.sample_arrivals_unchecked(trial);
                let out = crate::matching::run_general(&inst, &alloc, &arr, trial).unwrap();
                for j in 0..inst.n_agents() {
                    if !out.matched[j] {
                        miss[j] += 1;
                    }
                }
            }
            for j in 0..inst.n_agents() {
                let est = miss[j] as f64 / n as f64;
                let sigma = (dp[j] * (1.0 - dp[j]) / n as f64).sqrt().max(1e-9);
                assert!((est - dp[j]).abs() <= 4.0 * sigma, "matching seed {seed} agent {j}");
            }
        }
        // AdWords with a mix of large (marking) and small bids.
        for seed in 0..3 {
            let inst = generate(GenSpec {
                class: ProblemClass::AdWords,
                n_types: 3,
                n_agents: 2,
                horizon: 4,
                density: 0.9,
                seed: 3_200 + seed,
            });
            let alloc = random_allocation(&inst, seed);
            let dp = exact_adwords_dp(&inst, &alloc).unwrap();
            let budgets: Vec<f64> = inst.agents.iter().map(|a| a.budget).collect();
            let mut sums = vec![0.0f64; inst.n_agents()];
            let mut sumsq = vec![0.0f64; inst.n_agents()];
            for trial in 0..n {
                let arr = inst.sample_arrivals_unchecked(trial);
                let out = crate::adwords::run_general_adwords(&inst, &alloc, &arr, trial).unwrap();
                for (j, v) in out.values(&budgets).iter().enumerate() {
                    let unspent = 1.0 - v / budgets[j];
                    sums[j] += unspent;
                    sumsq[j] += unspent * unspent;
                }
            }
            for j in 0..inst.n_agents() {
                let est = sums[j] / n as f64;
                let var = (sumsq[j] / n as f64 - est * est).max(0.0);
                let sigma = (var / n as f64).sqrt().max(1e-9);
                assert!((est - dp[j]).abs() <= 4.0 * sigma, "adwords seed {seed} agent {j}: {est} vs {}", dp[j]);
            }
        }
        // Display Ads, per weight-level.
        for seed in 0..3 {
            let inst = generate(GenSpec {
                class: ProblemClass::DisplayAds,
                n_types: 3,
                n_agents: 2,
                horizon: 4,
                density: 0.9,
                seed: 3_300 + seed,
            });
            let alloc = random_allocation(&inst, seed);
            let dp = exact_display_dp(&inst, &alloc).unwrap();
            let mut miss: Vec<Vec<u64>> = dp.iter().map(|lv| vec![0; lv.len()]).collect();
            for trial in 0..n {
                let arr = inst.sample_arrivals_unchecked(trial);
                let out = crate::display::run_general_display(&inst, &alloc, &arr, trial).unwrap();
                for j in 0..inst.n_agents() {
                    for (k, &(w, _)) in dp[j].iter().enumerate() {
                        if out.best_weight[j] < w - 1e-15 {
                            miss[j][k] += 1;
                        }
                    }
                }
            }
            for j in 0..inst.n_agents() {
                for (k, &(_, p)) in dp[j].iter().enumerate() {
                    let est = miss[j][k] as f64 / n as f64;
                    let sigma = (p * (1.0 - p) / n as f64).sqrt().max(1e-9);
                    assert!(
                        (est - p).abs() <= 4.0 * sigma,
                        "display seed {seed} agent {j} level {k}: {est} vs {p}"
                    );
                }
            }
        }
    }

    #[test]
    fn display_dp_levels_sanity() {
        use crate::instance::{AgentInfo, OnlineType};
        let inst = Instance {
            class: ProblemClass::DisplayAds,
            horizon: 2,
            agents: vec![AgentInfo { id: 1, weight: 1.0, budget: 1.0 }],
            types: vec![
                OnlineType { id: 1, edges: vec![(0, 1.0)] },
                OnlineType { id: 2, edges: vec![(0, 0.3)] },
            ],
            arrivals: vec![vec![(0, 1.0)], vec![(1, 1.0)]],
        };
        let mut alloc = FractionalAllocation::for_instance(&inst);
        alloc.set(0, 0, 0, 1.0);
        alloc.set(1, 1, 0, 1.0);
        let miss = exact_display_dp(&inst, &alloc).unwrap();
        // Both items allocated deterministically: every level covered.
        for &(_, p) in &miss[0] {
            assert!(p.abs() < 1e-12);
        }
    }
}
