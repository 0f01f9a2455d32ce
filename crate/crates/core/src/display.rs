//! Display Ads SOCS: every two-way step is marked, opposite selections on an
//! agent's first two marked steps, value accounted per weight-level with
//! free disposal.

use crate::adwords::{step_two_way_marked, AdWordsState, AssignRecord, TwoWayTrace};
use crate::allocation::{step_schedule, FractionalAllocation};
use crate::decomposition::{sample_surrogate, SurrogateType};
use crate::error::{Result, SocsError};
use crate::instance::{ArrivalSequence, Instance, ProblemClass};
use crate::rng::{uniform, Purpose};

#[derive(Debug, Clone)]
pub struct DisplayOutcome {
    pub assigned: Vec<AssignRecord>,
    /// Max allocated edge-weight per agent (0 if none): free disposal.
    pub best_weight: Vec<f64>,
    pub trace: Vec<TwoWayTrace>,
}

impl DisplayOutcome {
    pub fn total_value(&self) -> f64 {
        self.best_weight.iter().sum()
    }
}

/// Two-way SOCS step for Display Ads: identical to the AdWords stepper
/// except that every two-way step is marked.
#[allow(clippy::too_many_arguments)]
pub fn step_two_way_display(
    state: &mut AdWordsState,
    pair: (Option<usize>, Option<usize>),
    weights: (f64, f64),
    seed: u64,
    step: usize,
    type_key: u64,
    trace: &mut Vec<TwoWayTrace>,
) -> Option<usize> {
    // Budgets are irrelevant with mark_all.
    let budgets = vec![0.0; state.spent.len()];
    let selected = step_two_way_marked(
        state, pair, weights, &budgets, true, seed, step, type_key, trace,
    );
    if let Some(j) = selected {
        let w = if Some(j) == pair.0 { weights.0 } else { weights.1 };
        state.spent[j] = state.spent[j].max(w);
    }
    selected
}

/// General SOCS for Display Ads via type decomposition; agent value is the
/// maximum allocated edge-weight.
pub fn run_general_display(
    instance: &Instance,
    alloc: &FractionalAllocation,
    arrivals: &ArrivalSequence,
    seed: u64,
) -> Result<DisplayOutcome> {
    if instance.class != ProblemClass::DisplayAds {
        return Err(SocsError::InvalidArgument("Display Ads instance required".into()));
    }
    if !alloc.matches_instance(instance) {
        return Err(SocsError::InvalidAllocation(
            "allocation dimensions do not match instance".into(),
        ));
    }
    let schedule = step_schedule(instance, alloc);
    let mut state = AdWordsState::new(instance.n_agents());
    let mut assigned = Vec::new();
    let mut trace = Vec::new();
    for t in 0..instance.horizon {
        if let Some(i) = arrivals.0[t] {
            let f = instance.arrival_prob(t, i);
            let mu = alloc.mu_vector(t, i, f);
            let eta = 0.5 * uniform(seed, Purpose::Eta, t as u64, 0, 0);
            let weight_of = |slot: Option<usize>| -> f64 {
                slot.and_then(|j| instance.types[i].edge_value(j)).unwrap_or(0.0)
            };
            match sample_surrogate(&mu, eta)? {
                SurrogateType::OneWay(Some(j)) => {
                    let w = weight_of(Some(j));
                    state.spent[j] = state.spent[j].max(w);
                    assigned.push(AssignRecord { step: t, type_idx: i, agent: j, amount: w });
                }
                SurrogateType::OneWay(None) => {}
                SurrogateType::TwoWay(a, b) => {
                    let weights = (weight_of(a), weight_of(b));
                    if let Some(j) = step_two_way_display(
                        &mut state, (a, b), weights, seed, t, i as u64, &mut trace,
                    ) {
                        assigned.push(AssignRecord {
                            step: t,
                            type_idx: i,
                            agent: j,
                            amount: weight_of(Some(j)),
                        });
                    }
                }
            }
        }
        for (y, inc) in state.y.iter_mut().zip(&schedule[t]) {
            *y += inc;
        }
    }
    Ok(DisplayOutcome {
        assigned,
        best_weight: state.spent,
        trace,
    })
}

/// Assignment wire format: the matching JSON rows with a weight field.
pub fn assignment_to_json(instance: &Instance, outcome: &DisplayOutcome) -> serde_json::Value {
    let rows: Vec<serde_json::Value> = outcome
        .assigned
        .iter()
        .map(|a| {
            serde_json::json!({
                "t": a.step + 1,
                "type": instance.types[a.type_idx].id,
                "agent": instance.agents[a.agent].id,
                "weight": a.amount,
            })
        })
        .collect();
    serde_json::Value::Array(rows)
}

/// The finitely many distinct positive edge-weights an agent can receive,
/// ascending. y_j(w) is a step function of w, so these are the only
/// weight-levels worth evaluating.
pub fn weight_levels(instance: &Instance, agent: usize) -> Vec<f64> {
    let mut levels: Vec<f64> = instance
        .types
        .iter()
        .filter_map(|ty| ty.edge_value(agent))
        .filter(|&w| w > 0.0)
        .collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
    levels
}

/// Per weight-level coverage flags for one agent, and the telescoping value
/// reconstruction sum over consecutive levels of width x flag.
pub fn value_profile(
    instance: &Instance,
    outcome: &DisplayOutcome,
    agent: usize,
) -> Result<(Vec<(f64, bool)>, f64)> {
    if agent >= instance.n_agents() {
        return Err(SocsError::UnknownAgent(agent));
    }
    let levels = weight_levels(instance, agent);
    let best = outcome.best_weight[agent];
    let mut profile = Vec::with_capacity(levels.len());
    let mut value = 0.0;
    let mut prev = 0.0;
    for &w in &levels {
        let got = best >= w - 1e-15;
        profile.push((w, got));
        if got {
            value += w - prev;
        }
        prev = w;
    }
    Ok((profile, value))
}
