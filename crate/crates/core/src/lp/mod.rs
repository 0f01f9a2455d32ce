//! The Stochastic Matching LP, the Fluid and Stochastic AdWords LPs, and
//! their separation oracles.
//!
//! Both exponential constraint families (the matching polymatroid and the
//! v-bar family) are handled by cutting planes: solve over the materialized
//! rows, call the separation oracle per agent, add the most violated subset,
//! repeat. Separation is exact by exhaustive enumeration over the positive
//! support, with a branch-and-prune search.

pub mod simplex;

use crate::adwords::is_large_bid;
use crate::allocation::FractionalAllocation;
use crate::error::{Result, SocsError};
use crate::instance::{Instance, ProblemClass};
use crate::rng::{Purpose, Stream};
use serde::Serialize;
use simplex::Simplex;
use std::collections::BTreeMap;

/// Enumeration cap for separation supports.
pub const SEPARATION_CAP: usize = 22;
/// Enumeration cap for exact v-bar evaluation.
pub const VBAR_EXACT_CAP: usize = 20;
/// Default cutting-plane tolerance.
pub const DEFAULT_LP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VbarMode {
    /// Exact enumeration of realizations (|S| <= 20).
    Exact,
    /// Exact via the large-bid observation: two or more large bids always
    /// exhaust the budget, so only |S| + 2 outcomes matter.
    LargeBidsExact,
    /// Monte Carlo estimate with standard error.
    MonteCarlo(u64),
}

#[derive(Debug, Clone, Copy)]
pub struct Vbar {
    pub value: f64,
    pub stderr: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ActiveCut {
    pub agent: u32,
    /// (step 1-based, external type id) pairs of the binding subset.
    pub subset: Vec<(usize, u32)>,
    pub slack: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LpSolveReport {
    pub objective: f64,
    pub pivots: usize,
    pub cut_rounds: usize,
    pub cuts_added: usize,
    pub max_violation: f64,
    pub active_cuts: Vec<ActiveCut>,
    pub inconclusive: bool,
}

// ---------------------------------------------------------------------------
// Variable bookkeeping
// ---------------------------------------------------------------------------

struct VarMap {
    vars: Vec<(usize, usize, usize)>,
    index: BTreeMap<(usize, usize, usize), usize>,
}

impl VarMap {
    fn build(instance: &Instance) -> VarMap {
        let mut vars = Vec::new();
        for (t, dist) in instance.arrivals.iter().enumerate() {
            for &(i, f) in dist {
                if f <= 0.0 {
                    continue;
                }
                for &(j, v) in &instance.types[i].edges {
                    // Zero-valued AdWords/Display edges cannot contribute.
                    if instance.class.is_matching() || v > 0.0 {
                        vars.push((t, i, j));
                    }
                }
            }
        }
        let index = vars.iter().enumerate().map(|(k, &v)| (v, k)).collect();
        VarMap { vars, index }
    }

    fn get(&self, t: usize, i: usize, j: usize) -> Option<usize> {
        self.index.get(&(t, i, j)).copied()
    }
}

fn to_allocation(instance: &Instance, vm: &VarMap, x: &[f64]) -> FractionalAllocation {
    let mut alloc = FractionalAllocation::for_instance(instance);
    for (k, &(t, i, j)) in vm.vars.iter().enumerate() {
        alloc.set(t, i, j, x[k].max(0.0));
    }
    alloc
}

// ---------------------------------------------------------------------------
// Matching LP
// ---------------------------------------------------------------------------

/// Right-hand side of the matching polymatroid constraint for a subset of
/// (step, type) pairs: 1 - prod_t (1 - sum of f over the subset's types at t).
pub fn matching_subset_rhs(instance: &Instance, subset: &[(usize, usize)]) -> f64 {
    let mut per_step: BTreeMap<usize, f64> = BTreeMap::new();
    for &(t, i) in subset {
        *per_step.entry(t).or_insert(0.0) += instance.arrival_prob(t, i);
    }
    1.0 - per_step.values().map(|s| 1.0 - s).product::<f64>()
}

struct Element {
    t: usize,
    i: usize,
    /// x weight in the constraint (x or b*x).
    gain: f64,
    f: f64,
}

/// Exhaustive max-violation search for the matching family of one agent:
/// maximize x(S) - (1 - prod(1 - F)) by DFS over the support, pruning with
/// the remaining-gain bound.
fn matching_separation_core(elements: &[Element], tol: f64) -> Option<(Vec<usize>, f64)> {
    let n = elements.len();
    let mut suffix = vec![0.0; n + 1];
    for k in (0..n).rev() {
        suffix[k] = suffix[k + 1] + elements[k].gain;
    }
    struct Search<'a> {
        elements: &'a [Element],
        suffix: &'a [f64],
        best: f64,
        best_set: Vec<usize>,
        chosen: Vec<usize>,
    }
    impl Search<'_> {
        fn dfs(&mut self, k: usize, x: f64, p_closed: f64, cur_t: usize, cur_sum: f64) {
            let p = p_closed * (1.0 - cur_sum);
            let viol = x + p - 1.0;
            if viol > self.best {
                self.best = viol;
                self.best_set = self.chosen.clone();
            }
            if k == self.elements.len() {
                return;
            }
            // Adding elements can only shrink the product, so x + suffix + p - 1
            // bounds every extension of the current choice.
            if x + self.suffix[k] + p - 1.0 <= self.best + 1e-15 {
                return;
            }
            let el = &self.elements[k];
            let (p_next, sum_next) = if el.t == cur_t {
                (p_closed, cur_sum)
            } else {
                (p, 0.0)
            };
            // Include element k.
            self.chosen.push(k);
            self.dfs(k + 1, x + el.gain, p_next, el.t, sum_next + el.f);
            self.chosen.pop();
            // Exclude element k.
            self.dfs(k + 1, x, p_next, el.t, sum_next);
        }
    }
    let mut search = Search {
        elements,
        suffix: &suffix,
        best: 0.0,
        best_set: Vec::new(),
        chosen: Vec::new(),
    };
    // cur_t = usize::MAX acts as "no open step".
    search.dfs(0, 0.0, 1.0, usize::MAX, 0.0);
    if search.best > tol {
        Some((search.best_set, search.best))
    } else {
        None
    }
}

fn agent_support(
    instance: &Instance,
    alloc: &FractionalAllocation,
    agent: usize,
    tol: f64,
    large_only: bool,
) -> Vec<Element> {
    let mut out = Vec::new();
    for (t, dist) in instance.arrivals.iter().enumerate() {
        for &(i, f) in dist {
            if f <= 0.0 {
                continue;
            }
            let Some(bid) = instance.types[i].edge_value(agent) else {
                continue;
            };
            if large_only && !is_large_bid(bid, instance.agents[agent].budget) {
                continue;
            }
            let x = alloc.get(t, i, agent);
            if x > tol {
                let gain = if instance.class == ProblemClass::AdWords {
                    bid * x
                } else {
                    x
                };
                out.push(Element { t, i, gain, f });
            }
        }
    }
    out
}

/// Most violated matching subset constraint for one agent, or None. The
/// search is restricted to the positive support and exact up to the
/// enumeration cap.
pub fn matching_separation(
    instance: &Instance,
    alloc: &FractionalAllocation,
    agent: usize,
    tol: f64,
) -> Result<Option<(Vec<(usize, usize)>, f64)>> {
    let elements = agent_support(instance, alloc, agent, tol, false);
    if elements.len() > SEPARATION_CAP {
        return Err(SocsError::SeparationCap(elements.len(), SEPARATION_CAP));
    }
    Ok(matching_separation_core(&elements, tol).map(|(set, viol)| {
        (
            set.iter().map(|&k| (elements[k].t, elements[k].i)).collect(),
            viol,
        )
    }))
}

// ---------------------------------------------------------------------------
// v-bar evaluation
// ---------------------------------------------------------------------------

fn group_by_step(instance: &Instance, agent: usize, subset: &[(usize, usize)]) -> Vec<Vec<(f64, f64)>> {
    let mut groups: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
    for &(t, i) in subset {
        let f = instance.arrival_prob(t, i);
        let b = instance.types[i].edge_value(agent).unwrap_or(0.0);
        groups.entry(t).or_default().push((f, b));
    }
    groups.into_values().collect()
}

fn exact_vbar(groups: &[Vec<(f64, f64)>], budget: f64) -> f64 {
    fn rec(groups: &[Vec<(f64, f64)>], k: usize, prob: f64, spent: f64, budget: f64) -> f64 {
        if spent >= budget {
            return prob * budget;
        }
        if k == groups.len() {
            return prob * spent;
        }
        let none: f64 = 1.0 - groups[k].iter().map(|&(f, _)| f).sum::<f64>();
        let mut acc = rec(groups, k + 1, prob * none, spent, budget);
        for &(f, b) in &groups[k] {
            acc += rec(groups, k + 1, prob * f, spent + b, budget);
        }
        acc
    }
    rec(groups, 0, 1.0, 0.0, budget)
}

/// v-bar via the large-bid shortcut: value is 0 with no arrival, min(b, B)
/// with exactly one, and B with two or more.
fn large_bids_vbar(groups: &[Vec<(f64, f64)>], budget: f64) -> f64 {
    let step_sums: Vec<f64> = groups
        .iter()
        .map(|g| g.iter().map(|&(f, _)| f).sum())
        .collect();
    let p_none: f64 = step_sums.iter().map(|s| 1.0 - s).product();
    // Exclusion products prod_{t' != t} (1 - S_{t'}) without division.
    let n = groups.len();
    let mut prefix = vec![1.0; n + 1];
    for k in 0..n {
        prefix[k + 1] = prefix[k] * (1.0 - step_sums[k]);
    }
    let mut suffix = vec![1.0; n + 1];
    for k in (0..n).rev() {
        suffix[k] = suffix[k + 1] * (1.0 - step_sums[k]);
    }
    let mut single = 0.0;
    let mut p_single = 0.0;
    for (k, g) in groups.iter().enumerate() {
        let excl = prefix[k] * suffix[k + 1];
        for &(f, b) in g {
            single += f * excl * b.min(budget);
            p_single += f * excl;
        }
    }
    single + (1.0 - p_none - p_single).max(0.0) * budget
}

/// E[min{sum of realized bids in S, B_j}] in the requested mode.
pub fn evaluate_vbar(
    instance: &Instance,
    agent: usize,
    subset: &[(usize, usize)],
    mode: VbarMode,
) -> Result<Vbar> {
    if agent >= instance.n_agents() {
        return Err(SocsError::UnknownAgent(agent));
    }
    let budget = instance.agents[agent].budget;
    let groups = group_by_step(instance, agent, subset);
    match mode {
        VbarMode::Exact => {
            if subset.len() > VBAR_EXACT_CAP {
                return Err(SocsError::SizeCap(subset.len(), VBAR_EXACT_CAP));
            }
            Ok(Vbar { value: exact_vbar(&groups, budget), stderr: None })
        }
        VbarMode::LargeBidsExact => {
            for g in &groups {
                for &(_, b) in g {
                    if !is_large_bid(b, budget) {
                        return Err(SocsError::InvalidArgument(format!(
                            "large-bids mode requires every bid >= 2/3 budget; got {b} vs {budget}"
                        )));
                    }
                }
            }
            Ok(Vbar { value: large_bids_vbar(&groups, budget), stderr: None })
        }
        VbarMode::MonteCarlo(n) => {
            let n = n.max(1);
            let mut sum = 0.0;
            let mut sumsq = 0.0;
            for sample in 0..n {
                let mut spent = 0.0;
                for (k, g) in groups.iter().enumerate() {
                    let u = Stream::keyed(sample, Purpose::VbarSample, k as u64, agent as u64, 0)
                        .next_f64();
                    let mut acc = 0.0;
                    for &(f, b) in g {
                        acc += f;
                        if u < acc {
                            spent += b;
                            break;
                        }
                    }
                }
                let v = spent.min(budget);
                sum += v;
                sumsq += v * v;
            }
            let mean = sum / n as f64;
            let var = (sumsq / n as f64 - mean * mean).max(0.0);
            Ok(Vbar {
                value: mean,
                stderr: Some((var / n as f64).sqrt()),
            })
        }
    }
}

/// Max-violation search for the AdWords v-bar family of one agent.
fn adwords_separation(
    instance: &Instance,
    alloc: &FractionalAllocation,
    agent: usize,
    tol: f64,
    mode: VbarMode,
    inconclusive: &mut bool,
) -> Result<Option<(Vec<(usize, usize)>, f64)>> {
    let large_only = mode == VbarMode::LargeBidsExact;
    let elements = agent_support(instance, alloc, agent, tol, large_only);
    if elements.len() > SEPARATION_CAP {
        return Err(SocsError::SeparationCap(elements.len(), SEPARATION_CAP));
    }
    let n = elements.len();
    let mut suffix = vec![0.0; n + 1];
    for k in (0..n).rev() {
        suffix[k] = suffix[k + 1] + elements[k].gain;
    }
    // DFS over inclusion; v-bar is monotone in S, so the remaining-gain
    // bound prunes.
    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut chosen: Vec<usize> = Vec::new();
    let mut stack_err: Option<SocsError> = None;
    fn vbar_of(
        instance: &Instance,
        agent: usize,
        elements: &[Element],
        chosen: &[usize],
        mode: VbarMode,
    ) -> Result<Vbar> {
        let subset: Vec<(usize, usize)> =
            chosen.iter().map(|&k| (elements[k].t, elements[k].i)).collect();
        evaluate_vbar(instance, agent, &subset, mode)
    }
    #[allow(clippy::too_many_arguments)]
    fn dfs(
        instance: &Instance,
        agent: usize,
        elements: &[Element],
        suffix: &[f64],
        tol: f64,
        mode: VbarMode,
        chosen: &mut Vec<usize>,
        k: usize,
        gain: f64,
        best: &mut Option<(Vec<usize>, f64)>,
        inconclusive: &mut bool,
        stack_err: &mut Option<SocsError>,
    ) {
        if stack_err.is_some() {
            return;
        }
        if !chosen.is_empty() {
            let vb = match vbar_of(instance, agent, elements, chosen, mode) {
                Ok(v) => v,
                Err(e) => {
                    *stack_err = Some(e);
                    return;
                }
            };
            let viol = gain - vb.value;
            if viol > tol {
                if let Some(se) = vb.stderr {
                    if viol <= 3.0 * se {
                        *inconclusive = true;
                    }
                }
                if best.as_ref().map_or(true, |(_, b)| viol > *b) {
                    *best = Some((chosen.clone(), viol));
                }
            }
            // Prune: v-bar only grows with S, so gains are capped by suffix.
            let cap = gain + suffix[k] - vb.value;
            if cap <= best.as_ref().map_or(tol, |(_, b)| *b) + 1e-15 {
                return;
            }
        }
        if k == elements.len() {
            return;
        }
        chosen.push(k);
        dfs(
            instance, agent, elements, suffix, tol, mode, chosen, k + 1,
            gain + elements[k].gain, best, inconclusive, stack_err,
        );
        chosen.pop();
        dfs(
            instance, agent, elements, suffix, tol, mode, chosen, k + 1, gain, best,
            inconclusive, stack_err,
        );
    }
    dfs(
        instance, agent, &elements, &suffix, tol, mode, &mut chosen, 0, 0.0, &mut best,
        inconclusive, &mut stack_err,
    );
    if let Some(e) = stack_err {
        return Err(e);
    }
    Ok(best.map(|(set, viol)| {
        (
            set.iter().map(|&k| (elements[k].t, elements[k].i)).collect(),
            viol,
        )
    }))
}

// ---------------------------------------------------------------------------
// Cutting-plane drivers
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
struct Cut {
    agent: usize,
    subset: Vec<(usize, usize)>,
    rhs: f64,
}

enum Family {
    Matching,
    AdWords(VbarMode),
}

fn build_and_solve(
    instance: &Instance,
    vm: &VarMap,
    cuts: &[Cut],
    fluid: bool,
) -> Result<(Vec<f64>, usize)> {
    let mut lp = Simplex::new(vm.vars.len());
    for (k, &(_t, i, j)) in vm.vars.iter().enumerate() {
        lp.set_objective(k, instance.objective_weight(i, j));
    }
    // Per-(t,i) mass constraints.
    for (t, dist) in instance.arrivals.iter().enumerate() {
        for &(i, f) in dist {
            if f <= 0.0 {
                continue;
            }
            let coeffs: Vec<(usize, f64)> = instance.types[i]
                .edges
                .iter()
                .filter_map(|&(j, _)| vm.get(t, i, j).map(|k| (k, 1.0)))
                .collect();
            if !coeffs.is_empty() {
                lp.add_le(&coeffs, f);
            }
        }
    }
    if fluid {
        for j in 0..instance.n_agents() {
            let mut coeffs = Vec::new();
            for (k, &(_t, i, jj)) in vm.vars.iter().enumerate() {
                if jj == j {
                    coeffs.push((k, instance.types[i].edge_value(j).unwrap_or(0.0)));
                }
            }
            if !coeffs.is_empty() {
                lp.add_le(&coeffs, instance.agents[j].budget);
            }
        }
    }
    let adwords = instance.class == ProblemClass::AdWords;
    for cut in cuts {
        let coeffs: Vec<(usize, f64)> = cut
            .subset
            .iter()
            .filter_map(|&(t, i)| {
                vm.get(t, i, cut.agent).map(|k| {
                    let w = if adwords {
                        instance.types[i].edge_value(cut.agent).unwrap_or(0.0)
                    } else {
                        1.0
                    };
                    (k, w)
                })
            })
            .collect();
        if !coeffs.is_empty() {
            lp.add_le(&coeffs, cut.rhs);
        }
    }
    let sol = lp.solve()?;
    Ok((sol.x, sol.pivots))
}

fn cutting_plane(
    instance: &Instance,
    tol: f64,
    family: Family,
) -> Result<(FractionalAllocation, LpSolveReport)> {
    let report = instance.validate();
    if !report.is_valid() {
        return Err(SocsError::InvalidInstance(format!(
            "{} violation(s)",
            report.violations.len()
        )));
    }
    let vm = VarMap::build(instance);
    let fluid = matches!(family, Family::AdWords(_));
    let mut inconclusive = false;
    let mut cuts: Vec<Cut> = Vec::new();
    // Singleton subset constraints seed the family.
    for &(t, i, j) in &vm.vars {
        let subset = vec![(t, i)];
        let rhs = match &family {
            Family::Matching => matching_subset_rhs(instance, &subset),
            Family::AdWords(mode) => {
                let bid = instance.types[i].edge_value(j).unwrap_or(0.0);
                if *mode == VbarMode::LargeBidsExact
                    && !is_large_bid(bid, instance.agents[j].budget)
                {
                    continue;
                }
                evaluate_vbar(instance, j, &subset, *mode)?.value
            }
        };
        cuts.push(Cut { agent: j, subset, rhs });
    }
    let seed_cuts = cuts.len();
    let round_cap = 10 * vm.vars.len().max(1);
    let mut total_pivots = 0usize;
    let mut rounds = 0usize;
    let alloc = loop {
        let (x, pivots) = build_and_solve(instance, &vm, &cuts, fluid)?;
        total_pivots += pivots;
        let alloc = to_allocation(instance, &vm, &x);
        let mut added = false;
        for j in 0..instance.n_agents() {
            let found = match &family {
                Family::Matching => matching_separation(instance, &alloc, j, tol)?,
                Family::AdWords(mode) => {
                    adwords_separation(instance, &alloc, j, tol, *mode, &mut inconclusive)?
                }
            };
            if let Some((subset, _viol)) = found {
                let rhs = match &family {
                    Family::Matching => matching_subset_rhs(instance, &subset),
                    Family::AdWords(mode) => evaluate_vbar(instance, j, &subset, *mode)?.value,
                };
                cuts.push(Cut { agent: j, subset, rhs });
                added = true;
            }
        }
        if !added {
            break alloc;
        }
        rounds += 1;
        if rounds > round_cap {
            return Err(SocsError::NoConvergence(round_cap));
        }
    };

    // Post-solve audit and binding-cut listing.
    let mut max_violation: f64 = 0.0;
    for j in 0..instance.n_agents() {
        let found = match &family {
            Family::Matching => matching_separation(instance, &alloc, j, 0.0)?,
            Family::AdWords(mode) => {
                adwords_separation(instance, &alloc, j, 0.0, *mode, &mut inconclusive)?
            }
        };
        if let Some((_, viol)) = found {
            max_violation = max_violation.max(viol);
        }
    }
    let adwords = instance.class == ProblemClass::AdWords;
    let mut active_cuts = Vec::new();
    for cut in &cuts {
        let lhs: f64 = cut
            .subset
            .iter()
            .map(|&(t, i)| {
                let w = if adwords {
                    instance.types[i].edge_value(cut.agent).unwrap_or(0.0)
                } else {
                    1.0
                };
                w * alloc.get(t, i, cut.agent)
            })
            .sum();
        let slack = cut.rhs - lhs;
        if slack.abs() <= 1e-7 {
            active_cuts.push(ActiveCut {
                agent: instance.agents[cut.agent].id,
                subset: cut
                    .subset
                    .iter()
                    .map(|&(t, i)| (t + 1, instance.types[i].id))
                    .collect(),
                slack,
            });
        }
    }
    let report = LpSolveReport {
        objective: alloc.objective(instance),
        pivots: total_pivots,
        cut_rounds: rounds,
        cuts_added: cuts.len() - seed_cuts,
        max_violation,
        active_cuts,
        inconclusive,
    };
    Ok((alloc, report))
}

/// Stochastic Matching LP (also used for Display Ads objectives).
pub fn solve_matching_lp(
    instance: &Instance,
    tol: f64,
) -> Result<(FractionalAllocation, LpSolveReport)> {
    if instance.class == ProblemClass::AdWords {
        return Err(SocsError::InvalidArgument(
            "matching LP requires a matching or display instance".into(),
        ));
    }
    cutting_plane(instance, tol, Family::Matching)
}

/// Fluid Stochastic AdWords LP: per-(t,i) mass plus the per-agent budget
/// row only.
pub fn solve_adwords_fluid_lp(
    instance: &Instance,
    _tol: f64,
) -> Result<(FractionalAllocation, LpSolveReport)> {
    if instance.class != ProblemClass::AdWords {
        return Err(SocsError::InvalidArgument("fluid LP requires an AdWords instance".into()));
    }
    let vm = VarMap::build(instance);
    let (x, pivots) = build_and_solve(instance, &vm, &[], true)?;
    let alloc = to_allocation(instance, &vm, &x);
    Ok((
        alloc.clone(),
        LpSolveReport {
            objective: alloc.objective(instance),
            pivots,
            cut_rounds: 0,
            cuts_added: 0,
            max_violation: 0.0,
            active_cuts: Vec::new(),
            inconclusive: false,
        },
    ))
}

/// Stochastic AdWords LP: v-bar subset family (cutting plane) plus the fluid
/// budget row, which bounds the small-bid contribution when the subset
/// family is restricted to large bids.
pub fn solve_adwords_lp(
    instance: &Instance,
    tol: f64,
    mode: VbarMode,
) -> Result<(FractionalAllocation, LpSolveReport)> {
    if instance.class != ProblemClass::AdWords {
        return Err(SocsError::InvalidArgument(
            "stochastic AdWords LP requires an AdWords instance".into(),
        ));
    }
    cutting_plane(instance, tol, Family::AdWords(mode))
}

/// Re-audits every constraint family of an allocation via the separation
/// oracles; the report's `max_violation` is the worst violation found.
pub fn check_feasibility(
    instance: &Instance,
    alloc: &FractionalAllocation,
    tol: f64,
) -> Result<LpSolveReport> {
    let mut worst: f64 = 0.0;
    for t in 0..instance.horizon {
        for &(i, f) in &instance.arrivals[t] {
            let mut sum = 0.0;
            for j in 0..instance.n_agents() {
                let x = alloc.get(t, i, j);
                worst = worst.max(-x);
                sum += x;
            }
            worst = worst.max(sum - f);
        }
    }
    let mut inconclusive = false;
    let mut violated = Vec::new();
    for j in 0..instance.n_agents() {
        let found = match instance.class {
            ProblemClass::AdWords => {
                // Fluid row.
                let mut spent = 0.0;
                for t in 0..instance.horizon {
                    for &(i, _) in &instance.arrivals[t] {
                        spent +=
                            alloc.get(t, i, j) * instance.types[i].edge_value(j).unwrap_or(0.0);
                    }
                }
                worst = worst.max(spent - instance.agents[j].budget);
                adwords_separation(instance, alloc, j, 0.0, VbarMode::LargeBidsExact, &mut inconclusive)?
            }
            _ => matching_separation(instance, alloc, j, 0.0)?,
        };
        if let Some((subset, viol)) = found {
            worst = worst.max(viol);
            // Violations above the caller's tolerance are listed in full.
            if viol > tol {
                violated.push(ActiveCut {
                    agent: instance.agents[j].id,
                    subset: subset
                        .iter()
                        .map(|&(t, i)| (t + 1, instance.types[i].id))
                        .collect(),
                    slack: -viol,
                });
            }
        }
    }
    Ok(LpSolveReport {
        objective: alloc.objective(instance),
        pivots: 0,
        cut_rounds: 0,
        cuts_added: 0,
        max_violation: worst,
        active_cuts: violated,
        inconclusive,
    })
}
