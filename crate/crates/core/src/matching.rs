//! SOCS runners for unweighted and vertex-weighted matching: the two-way
//! stepper, the general runner (opened blackbox: selection exponents use the
//! total cumulative allocation), and the random-order runner.

use crate::allocation::{step_schedule, FractionalAllocation};
use crate::decomposition::{sample_surrogate, SurrogateType};
use crate::error::{Result, SocsError};
use crate::instance::{ArrivalSequence, Instance, ProblemClass};
use crate::rng::{uniform, Purpose};
use serde::Serialize;

/// Per-run matching state. `y` is the deterministic cumulative fractional
/// allocation y_j^{1:t} driven by the allocation schedule, not by realized
/// arrivals; matched flags are absorbing.
#[derive(Debug, Clone)]
pub struct MatchState {
    pub matched: Vec<bool>,
    pub y: Vec<f64>,
    pub step: usize,
}

impl MatchState {
    pub fn new(n_agents: usize) -> Self {
        MatchState {
            matched: vec![false; n_agents],
            y: vec![0.0; n_agents],
            step: 0,
        }
    }

    fn available(&self, slot: Option<usize>) -> Result<bool> {
        match slot {
            // A dummy slot is a fresh zero-value vertex: always available.
            None => Ok(true),
            Some(j) if j < self.matched.len() => Ok(!self.matched[j]),
            Some(j) => Err(SocsError::UnknownAgent(j)),
        }
    }

    fn weight(&self, slot: Option<usize>) -> f64 {
        match slot {
            None => 1.0,
            Some(j) => (2.0 * self.y[j]).exp(),
        }
    }
}

/// One two-way step: with both candidates unmatched, select with weights
/// e^{2 y^{1:(t-1)}}; with one unmatched, select it; with both matched,
/// select nobody. Afterwards the state's clock and y advance by the step's
/// expected allocation.
pub fn step_two_way(
    state: &mut MatchState,
    pair: Option<(Option<usize>, Option<usize>)>,
    increments: &[f64],
    u: f64,
) -> Result<Option<usize>> {
    let selected = match pair {
        None => None,
        Some((a, b)) => {
            let av_a = state.available(a)?;
            let av_b = state.available(b)?;
            match (av_a, av_b) {
                (false, false) => None,
                (true, false) => a,
                (false, true) => b,
                (true, true) => {
                    let wa = state.weight(a);
                    let wb = state.weight(b);
                    if u * (wa + wb) < wa {
                        a
                    } else {
                        b
                    }
                }
            }
        }
    };
    if let Some(j) = selected {
        state.matched[j] = true;
    }
    for (y, inc) in state.y.iter_mut().zip(increments) {
        *y += inc;
    }
    state.step += 1;
    Ok(selected)
}

#[derive(Debug, Clone, Serialize)]
pub struct MatchRecord {
    pub step: usize,
    pub type_idx: usize,
    pub agent: usize,
}

#[derive(Debug, Clone)]
pub struct MatchingOutcome {
    pub matches: Vec<MatchRecord>,
    pub matched: Vec<bool>,
}

fn slot_key(slot: Option<usize>) -> u64 {
    slot.map(|j| j as u64).unwrap_or(u64::MAX)
}

/// Run the general SOCS along a given processing order of the time steps.
/// `y` accumulates along that order, so the selection exponent at each
/// position reflects exactly the steps already revealed.
pub fn run_with_order(
    instance: &Instance,
    alloc: &FractionalAllocation,
    order: &[usize],
    arrivals: &ArrivalSequence,
    seed: u64,
) -> Result<MatchingOutcome> {
    if !alloc.matches_instance(instance) {
        return Err(SocsError::InvalidAllocation(
            "allocation dimensions do not match instance".into(),
        ));
    }
    let schedule = step_schedule(instance, alloc);
    run_with_order_scheduled(instance, alloc, &schedule, order, arrivals, seed)
}

/// The same runner with a precomputed per-step allocation schedule, for hot
/// Monte Carlo loops that reuse one schedule across trials.
pub fn run_with_order_scheduled(
    instance: &Instance,
    alloc: &FractionalAllocation,
    schedule: &[Vec<f64>],
    order: &[usize],
    arrivals: &ArrivalSequence,
    seed: u64,
) -> Result<MatchingOutcome> {
    if arrivals.0.len() != instance.horizon {
        return Err(SocsError::InvalidArgument(format!(
            "arrival sequence has length {}, expected {}",
            arrivals.0.len(),
            instance.horizon
        )));
    }
    let mut state = MatchState::new(instance.n_agents());
    let mut matches = Vec::new();
    for &t in order {
        let selected = match arrivals.0[t] {
            None => None,
            Some(i) => {
                let f = instance.arrival_prob(t, i);
                let mu = alloc.mu_vector(t, i, f);
                let eta = 0.5 * uniform(seed, Purpose::Eta, t as u64, 0, 0);
                match sample_surrogate(&mu, eta)? {
                    SurrogateType::OneWay(Some(j)) => {
                        if !state.matched[j] {
                            Some(j)
                        } else {
                            None
                        }
                    }
                    SurrogateType::OneWay(None) => None,
                    SurrogateType::TwoWay(a, b) => {
                        let av_a = state.available(a)?;
                        let av_b = state.available(b)?;
                        match (av_a, av_b) {
                            (false, false) => None,
                            (true, false) => a,
                            (false, true) => b,
                            (true, true) => {
                                let u = uniform(
                                    seed,
                                    Purpose::Select,
                                    t as u64,
                                    slot_key(a),
                                    slot_key(b),
                                );
                                let wa = state.weight(a);
                                let wb = state.weight(b);
                                if u * (wa + wb) < wa {
                                    a
                                } else {
                                    b
                                }
                            }
                        }
                    }
                }
            }
        };
        if let Some(j) = selected {
            state.matched[j] = true;
            matches.push(MatchRecord {
                step: t,
                type_idx: arrivals.0[t].expect("selected implies arrival"),
                agent: j,
            });
        }
        for (y, inc) in state.y.iter_mut().zip(&schedule[t]) {
            *y += inc;
        }
        state.step += 1;
    }
    Ok(MatchingOutcome {
        matches,
        matched: state.matched,
    })
}

/// General SOCS in arrival order.
pub fn run_general(
    instance: &Instance,
    alloc: &FractionalAllocation,
    arrivals: &ArrivalSequence,
    seed: u64,
) -> Result<MatchingOutcome> {
    let order: Vec<usize> = (0..instance.horizon).collect();
    run_with_order(instance, alloc, &order, arrivals, seed)
}

/// Uniform shuffle of the time steps via i.i.d. theta keys, then the general
/// runner along the shuffled order.
pub fn shuffle_order(horizon: usize, seed: u64) -> Vec<usize> {
    let mut keyed: Vec<(f64, usize)> = (0..horizon)
        .map(|t| (uniform(seed, Purpose::Shuffle, t as u64, 0, 0), t))
        .collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    keyed.into_iter().map(|(_, t)| t).collect()
}

pub fn run_random_order(
    instance: &Instance,
    alloc: &FractionalAllocation,
    seed: u64,
) -> Result<MatchingOutcome> {
    let arrivals = instance.sample_arrivals(seed)?;
    let order = shuffle_order(instance.horizon, seed);
    run_with_order(instance, alloc, &order, &arrivals, seed)
}

/// Cardinality or vertex-weight value of a matching; each agent counts once.
pub fn matched_value(instance: &Instance, outcome: &MatchingOutcome) -> Result<f64> {
    let mut seen = vec![false; instance.n_agents()];
    let mut value = 0.0;
    for m in &outcome.matches {
        if m.agent >= instance.n_agents() {
            return Err(SocsError::UnknownAgent(m.agent));
        }
        if seen[m.agent] {
            return Err(SocsError::InvalidArgument(format!(
                "agent {} matched twice",
                instance.agents[m.agent].id
            )));
        }
        seen[m.agent] = true;
        value += match instance.class {
            ProblemClass::Unweighted => 1.0,
            ProblemClass::VertexWeighted => instance.agents[m.agent].weight,
            _ => {
                return Err(SocsError::InvalidArgument(
                    "matched_value requires a matching-class instance".into(),
                ))
            }
        };
    }
    Ok(value)
}

pub fn matching_to_json(instance: &Instance, outcome: &MatchingOutcome) -> serde_json::Value {
    let entries: Vec<serde_json::Value> = outcome
        .matches
        .iter()
        .map(|m| {
            serde_json::json!({
                "t": m.step + 1,
                "type": instance.types[m.type_idx].id,
                "agent": instance.agents[m.agent].id,
            })
        })
        .collect();
    serde_json::Value::Array(entries)
}
