//! Fractional allocations x_{ij}^t and the cumulative allocation y.

use crate::error::{Result, SocsError};
use crate::instance::{Instance, ProblemClass, PROB_TOL};
use serde::{Deserialize, Serialize};

/// Dense x_{ij}^t >= 0 indexed by (step, type, agent). The derived view
/// mu_{ij}^t = x_{ij}^t / f_i^t is available wherever f_i^t > 0.
#[derive(Debug, Clone)]
pub struct FractionalAllocation {
    pub horizon: usize,
    pub n_types: usize,
    pub n_agents: usize,
    x: Vec<f64>,
}

impl FractionalAllocation {
    pub fn zeros(horizon: usize, n_types: usize, n_agents: usize) -> Self {
        FractionalAllocation {
            horizon,
            n_types,
            n_agents,
            x: vec![0.0; horizon * n_types * n_agents],
        }
    }

    pub fn for_instance(instance: &Instance) -> Self {
        Self::zeros(instance.horizon, instance.n_types(), instance.n_agents())
    }

    #[inline]
    fn idx(&self, t: usize, i: usize, j: usize) -> usize {
        (t * self.n_types + i) * self.n_agents + j
    }

    #[inline]
    pub fn get(&self, t: usize, i: usize, j: usize) -> f64 {
        self.x[self.idx(t, i, j)]
    }

    #[inline]
    pub fn set(&mut self, t: usize, i: usize, j: usize, v: f64) {
        let k = self.idx(t, i, j);
        self.x[k] = v;
    }

    /// mu_{ij}^t for a given arrival probability f_i^t.
    #[inline]
    pub fn mu(&self, t: usize, i: usize, j: usize, f: f64) -> f64 {
        if f > 0.0 {
            self.get(t, i, j) / f
        } else {
            0.0
        }
    }

    /// The mu vector over all agents for a realized (t, i).
    pub fn mu_vector(&self, t: usize, i: usize, f: f64) -> Vec<f64> {
        (0..self.n_agents).map(|j| self.mu(t, i, j, f)).collect()
    }

    pub fn matches_instance(&self, instance: &Instance) -> bool {
        self.horizon == instance.horizon
            && self.n_types == instance.n_types()
            && self.n_agents == instance.n_agents()
    }

    /// Checks dimension agreement, x >= 0, per-(t,i) mass, and mu <= 1.
    pub fn validate(&self, instance: &Instance, tol: f64) -> Result<()> {
        if !self.matches_instance(instance) {
            return Err(SocsError::InvalidAllocation(
                "allocation dimensions do not match instance".into(),
            ));
        }
        for t in 0..self.horizon {
            for i in 0..self.n_types {
                let f = instance.arrival_prob(t, i);
                let mut sum = 0.0;
                for j in 0..self.n_agents {
                    let v = self.get(t, i, j);
                    if v < -tol || v.is_nan() {
                        return Err(SocsError::InvalidAllocation(format!(
                            "x[{t}][{i}][{j}] = {v} negative"
                        )));
                    }
                    if v > f * (1.0 + tol) + tol {
                        return Err(SocsError::InvalidAllocation(format!(
                            "mu[{t}][{i}][{j}] = {} exceeds 1",
                            if f > 0.0 { v / f } else { f64::INFINITY }
                        )));
                    }
                    sum += v;
                }
                if sum > f + tol {
                    return Err(SocsError::InvalidAllocation(format!(
                        "sum_j x[{t}][{i}] = {sum} exceeds f = {f}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Per-step expected allocation to an agent: y_j^t for matching,
    /// scaled by b/B for AdWords, restricted to edges of weight >= level
    /// for Display Ads.
    pub fn step_contribution(
        &self,
        instance: &Instance,
        t: usize,
        agent: usize,
        weight_level: Option<f64>,
    ) -> f64 {
        let mut acc = 0.0;
        for &(i, _f) in &instance.arrivals[t] {
            let x = self.get(t, i, agent);
            if x == 0.0 {
                continue;
            }
            match instance.class {
                ProblemClass::Unweighted | ProblemClass::VertexWeighted => acc += x,
                ProblemClass::AdWords => {
                    let bid = instance.types[i].edge_value(agent).unwrap_or(0.0);
                    acc += x * bid / instance.agents[agent].budget;
                }
                ProblemClass::DisplayAds => {
                    let w = instance.types[i].edge_value(agent).unwrap_or(0.0);
                    if weight_level.map_or(true, |level| w >= level) {
                        acc += x;
                    }
                }
            }
        }
        acc
    }

    /// LP objective value of this allocation.
    pub fn objective(&self, instance: &Instance) -> f64 {
        let mut acc = 0.0;
        for t in 0..self.horizon {
            for &(i, _) in &instance.arrivals[t] {
                for &(j, _) in &instance.types[i].edges {
                    acc += self.get(t, i, j) * instance.objective_weight(i, j);
                }
            }
        }
        acc
    }
}

/// y_j^{1:t} (or y_j(w) up to t): additive over steps.
pub fn cumulative_allocation(
    instance: &Instance,
    allocation: &FractionalAllocation,
    agent: usize,
    horizon: usize,
    weight_level: Option<f64>,
) -> Result<f64> {
    if agent >= instance.n_agents() {
        return Err(SocsError::UnknownAgent(agent));
    }
    if !allocation.matches_instance(instance) {
        return Err(SocsError::InvalidAllocation(
            "allocation dimensions do not match instance".into(),
        ));
    }
    let horizon = horizon.min(instance.horizon);
    let mut acc = 0.0;
    for t in 0..horizon {
        acc += allocation.step_contribution(instance, t, agent, weight_level);
    }
    Ok(acc)
}

/// The per-step schedule y_j^t for every agent, used by the runners as the
/// deterministic exponent bookkeeping.
pub fn step_schedule(instance: &Instance, allocation: &FractionalAllocation) -> Vec<Vec<f64>> {
    (0..instance.horizon)
        .map(|t| {
            (0..instance.n_agents())
                .map(|j| allocation.step_contribution(instance, t, j, None))
                .collect()
        })
        .collect()
}

// JSON wire format: array of {t, type, agent, x} with external ids.
#[derive(Serialize, Deserialize)]
struct AllocEntry {
    t: usize,
    #[serde(rename = "type")]
    type_id: u32,
    agent: u32,
    x: f64,
}

pub fn allocation_to_json(instance: &Instance, alloc: &FractionalAllocation) -> serde_json::Value {
    let mut entries = Vec::new();
    for t in 0..alloc.horizon {
        for i in 0..alloc.n_types {
            for j in 0..alloc.n_agents {
                let x = alloc.get(t, i, j);
                if x > 0.0 {
                    entries.push(AllocEntry {
                        t: t + 1,
                        type_id: instance.types[i].id,
                        agent: instance.agents[j].id,
                        x,
                    });
                }
            }
        }
    }
    serde_json::to_value(entries).expect("allocation serialization cannot fail")
}

pub fn allocation_from_json(
    instance: &Instance,
    value: &serde_json::Value,
) -> Result<FractionalAllocation> {
    let entries: Vec<AllocEntry> = serde_json::from_value(value.clone())?;
    let mut alloc = FractionalAllocation::for_instance(instance);
    let type_idx = |id: u32| instance.types.iter().position(|ty| ty.id == id);
    let agent_idx = |id: u32| instance.agents.iter().position(|a| a.id == id);
    for e in entries {
        let (Some(i), Some(j)) = (type_idx(e.type_id), agent_idx(e.agent)) else {
            return Err(SocsError::InvalidAllocation(format!(
                "unknown type/agent ids ({}, {})",
                e.type_id, e.agent
            )));
        };
        if e.t < 1 || e.t > instance.horizon {
            return Err(SocsError::InvalidAllocation(format!("step {} out of range", e.t)));
        }
        alloc.set(e.t - 1, i, j, e.x);
    }
    Ok(alloc)
}

/// Half-integer allocation check (used by two-way corpora): every positive
/// mu entry equals 1/2.
pub fn is_half_integer(instance: &Instance, alloc: &FractionalAllocation) -> bool {
    for t in 0..alloc.horizon {
        for &(i, f) in &instance.arrivals[t] {
            for j in 0..alloc.n_agents {
                let mu = alloc.mu(t, i, j, f);
                if mu > PROB_TOL && (mu - 0.5).abs() > 1e-9 {
                    return false;
                }
            }
        }
    }
    true
}
