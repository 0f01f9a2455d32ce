//! Problem instances for the four special cases, arrival sampling, and
//! random instance generation.
//!
//! An instance has offline agents, online item types, and one arrival
//! distribution per time step. Per-step probabilities may sum to less than
//! one; the remaining mass is "no arrival" (a dummy type worth zero to every
//! agent). Repeated online types across steps are kept distinct by the
//! (step, type) key everywhere downstream.

use crate::error::{Result, SocsError};
use crate::rng::{Purpose, Stream};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Absolute tolerance for probability validation.
pub const PROB_TOL: f64 = 1e-12;

/// Schema version tag written to instance files.
pub const SCHEMA_VERSION: &str = "socs-lab/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemClass {
    Unweighted,
    VertexWeighted,
    AdWords,
    DisplayAds,
}

impl ProblemClass {
    pub fn is_matching(self) -> bool {
        matches!(self, ProblemClass::Unweighted | ProblemClass::VertexWeighted)
    }
}

#[derive(Debug, Clone)]
pub struct AgentInfo {
    pub id: u32,
    /// Vertex weight (vertex-weighted matching); 1 otherwise.
    pub weight: f64,
    /// Budget (AdWords); 1 otherwise.
    pub budget: f64,
}

/// An online item type and its incident edges. The per-edge value is 1 for
/// unweighted and vertex-weighted matching, the bid for AdWords, and the
/// edge-weight for Display Ads.
#[derive(Debug, Clone)]
pub struct OnlineType {
    pub id: u32,
    pub edges: Vec<(usize, f64)>,
}

impl OnlineType {
    pub fn edge_value(&self, agent: usize) -> Option<f64> {
        self.edges.iter().find(|(j, _)| *j == agent).map(|&(_, v)| v)
    }
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub class: ProblemClass,
    pub horizon: usize,
    pub agents: Vec<AgentInfo>,
    pub types: Vec<OnlineType>,
    /// Per step: list of (type index, arrival probability f_i^t).
    pub arrivals: Vec<Vec<(usize, f64)>>,
}

/// Realized arrivals; one entry per step, `None` meaning no arrival.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArrivalSequence(pub Vec<Option<usize>>);

#[derive(Debug, Clone, Serialize)]
pub struct Violation {
    pub location: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, location: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            location: location.into(),
            message: message.into(),
        });
    }
}

impl Instance {
    pub fn n_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn n_types(&self) -> usize {
        self.types.len()
    }

    /// Arrival probability f_i^t.
    pub fn arrival_prob(&self, t: usize, type_idx: usize) -> f64 {
        self.arrivals[t]
            .iter()
            .find(|(i, _)| *i == type_idx)
            .map(|&(_, f)| f)
            .unwrap_or(0.0)
    }

    /// Objective weight of assigning an item of the given type to an agent:
    /// 1 / w_j / b_ij / w_ij depending on the class, 0 for non-edges.
    pub fn objective_weight(&self, type_idx: usize, agent: usize) -> f64 {
        let Some(v) = self.types[type_idx].edge_value(agent) else {
            return 0.0;
        };
        match self.class {
            ProblemClass::Unweighted => 1.0,
            ProblemClass::VertexWeighted => self.agents[agent].weight,
            ProblemClass::AdWords | ProblemClass::DisplayAds => v,
        }
    }

    /// Lists every invariant violation with its location.
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        if self.arrivals.len() != self.horizon {
            report.push(
                "arrivals",
                format!(
                    "expected {} per-step distributions, found {}",
                    self.horizon,
                    self.arrivals.len()
                ),
            );
        }
        for (t, dist) in self.arrivals.iter().enumerate() {
            let mut sum = 0.0;
            let mut seen = std::collections::BTreeSet::new();
            for &(i, f) in dist {
                if i >= self.types.len() {
                    report.push(format!("t={}", t + 1), format!("unknown type index {i}"));
                    continue;
                }
                if !seen.insert(i) {
                    report.push(
                        format!("t={}", t + 1),
                        format!("duplicate type {} in distribution", self.types[i].id),
                    );
                }
                if !(0.0..=1.0 + PROB_TOL).contains(&f) || f.is_nan() {
                    report.push(
                        format!("t={}", t + 1),
                        format!("probability out of range at t={}: f={}", t + 1, f),
                    );
                }
                sum += f;
            }
            if sum > 1.0 + PROB_TOL {
                report.push(
                    format!("t={}", t + 1),
                    format!("per-step probabilities sum to {sum} > 1"),
                );
            }
        }
        for a in &self.agents {
            if self.class == ProblemClass::VertexWeighted && !(a.weight > 0.0) {
                report.push(format!("agent {}", a.id), "weight must be positive");
            }
            if self.class == ProblemClass::AdWords && !(a.budget > 0.0) {
                report.push(format!("agent {}", a.id), "budget must be positive");
            }
        }
        for ty in &self.types {
            let mut seen = std::collections::BTreeSet::new();
            for &(j, v) in &ty.edges {
                if j >= self.agents.len() {
                    report.push(format!("type {}", ty.id), format!("unknown agent index {j}"));
                    continue;
                }
                if !seen.insert(j) {
                    report.push(
                        format!("type {}", ty.id),
                        format!("duplicate edge to agent {}", self.agents[j].id),
                    );
                }
                if v < 0.0 || v.is_nan() {
                    report.push(
                        format!("type {}", ty.id),
                        format!("edge value must be non-negative, got {v}"),
                    );
                }
                if self.class.is_matching() && (v - 1.0).abs() > PROB_TOL {
                    report.push(
                        format!("type {}", ty.id),
                        format!("matching edge value must be 1, got {v}"),
                    );
                }
            }
        }
        report
    }

    /// Independent per-step draws from F^t; deterministic given the seed.
    pub fn sample_arrivals(&self, seed: u64) -> Result<ArrivalSequence> {
        let report = self.validate();
        if !report.is_valid() {
            return Err(SocsError::InvalidInstance(format!(
                "{} violation(s), first: {} — {}",
                report.violations.len(),
                report.violations[0].location,
                report.violations[0].message
            )));
        }
        Ok(self.sample_arrivals_unchecked(seed))
    }

    /// Arrival sampling without re-validating; for hot loops that have
    /// validated the instance once up front.
    pub fn sample_arrivals_unchecked(&self, seed: u64) -> ArrivalSequence {
        let mut seq = Vec::with_capacity(self.horizon);
        for t in 0..self.horizon {
            let u = Stream::keyed(seed, Purpose::Arrival, t as u64, 0, 0).next_f64();
            let mut acc = 0.0;
            let mut hit = None;
            for &(i, f) in &self.arrivals[t] {
                acc += f;
                if u < acc {
                    hit = Some(i);
                    break;
                }
            }
            seq.push(hit);
        }
        ArrivalSequence(seq)
    }
}

/// Parameters for random instance generation.
#[derive(Debug, Clone, Copy)]
pub struct GenSpec {
    pub class: ProblemClass,
    pub n_types: usize,
    pub n_agents: usize,
    pub horizon: usize,
    pub density: f64,
    pub seed: u64,
}

/// Random instance of the requested class; deterministic given the seed and
/// guaranteed to pass `validate`.
pub fn generate(spec: GenSpec) -> Instance {
    assert!(spec.n_types >= 1 && spec.n_agents >= 1 && spec.horizon >= 1);
    let mut s = Stream::keyed(spec.seed, Purpose::Generate, 0, 0, 0);
    let agents: Vec<AgentInfo> = (0..spec.n_agents)
        .map(|j| AgentInfo {
            id: j as u32 + 1,
            weight: if spec.class == ProblemClass::VertexWeighted {
                0.25 + 1.75 * s.next_f64()
            } else {
                1.0
            },
            budget: if spec.class == ProblemClass::AdWords {
                0.5 + s.next_f64()
            } else {
                1.0
            },
        })
        .collect();
    let mut types = Vec::with_capacity(spec.n_types);
    for i in 0..spec.n_types {
        let mut edges = Vec::new();
        for j in 0..spec.n_agents {
            if s.next_f64() < spec.density {
                let v = match spec.class {
                    ProblemClass::Unweighted | ProblemClass::VertexWeighted => 1.0,
                    // Bids always within (0, B_j] so min{b, B} never truncates
                    // a single item.
                    ProblemClass::AdWords => agents[j].budget * (0.05 + 0.95 * s.next_f64()),
                    ProblemClass::DisplayAds => 0.05 + 0.95 * s.next_f64(),
                };
                edges.push((j, v));
            }
        }
        if edges.is_empty() {
            // Keep every type useful: attach one random edge.
            let j = (s.next_u64() % spec.n_agents as u64) as usize;
            let v = match spec.class {
                ProblemClass::Unweighted | ProblemClass::VertexWeighted => 1.0,
                ProblemClass::AdWords => agents[j].budget * (0.05 + 0.95 * s.next_f64()),
                ProblemClass::DisplayAds => 0.05 + 0.95 * s.next_f64(),
            };
            edges.push((j, v));
        }
        types.push(OnlineType {
            id: i as u32 + 1,
            edges,
        });
    }
    let mut arrivals = Vec::with_capacity(spec.horizon);
    for _ in 0..spec.horizon {
        // Random masses normalized to a random total <= 1, leaving
        // no-arrival mass most steps.
        let total = 0.3 + 0.7 * s.next_f64();
        let raw: Vec<f64> = (0..spec.n_types).map(|_| 0.05 + s.next_f64()).collect();
        let raw_sum: f64 = raw.iter().sum();
        arrivals.push(
            raw.iter()
                .enumerate()
                .map(|(i, r)| (i, total * r / raw_sum))
                .collect(),
        );
    }
    Instance {
        class: spec.class,
        horizon: spec.horizon,
        agents,
        types,
        arrivals,
    }
}

// ---------------------------------------------------------------------------
// JSON schema (version "socs-lab/1")
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct AgentJson {
    id: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    weight: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    budget: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct TypeJson {
    id: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    edges: Option<Vec<u32>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bids: Option<BTreeMap<String, f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    weights: Option<BTreeMap<String, f64>>,
}

#[derive(Serialize, Deserialize)]
struct ArrivalJson {
    #[serde(rename = "type")]
    type_id: u32,
    prob: f64,
}

#[derive(Serialize, Deserialize)]
struct InstanceJson {
    version: String,
    class: ProblemClass,
    #[serde(rename = "T")]
    horizon: usize,
    agents: Vec<AgentJson>,
    types: Vec<TypeJson>,
    arrivals: Vec<Vec<ArrivalJson>>,
}

impl Instance {
    pub fn to_json(&self) -> serde_json::Value {
        let agents = self
            .agents
            .iter()
            .map(|a| AgentJson {
                id: a.id,
                weight: (self.class == ProblemClass::VertexWeighted).then_some(a.weight),
                budget: (self.class == ProblemClass::AdWords).then_some(a.budget),
            })
            .collect();
        let types = self
            .types
            .iter()
            .map(|ty| {
                let mut t = TypeJson {
                    id: ty.id,
                    edges: None,
                    bids: None,
                    weights: None,
                };
                match self.class {
                    ProblemClass::Unweighted | ProblemClass::VertexWeighted => {
                        t.edges = Some(ty.edges.iter().map(|&(j, _)| self.agents[j].id).collect());
                    }
                    ProblemClass::AdWords => {
                        t.bids = Some(
                            ty.edges
                                .iter()
                                .map(|&(j, v)| (self.agents[j].id.to_string(), v))
                                .collect(),
                        );
                    }
                    ProblemClass::DisplayAds => {
                        t.weights = Some(
                            ty.edges
                                .iter()
                                .map(|&(j, v)| (self.agents[j].id.to_string(), v))
                                .collect(),
                        );
                    }
                }
                t
            })
            .collect();
        let arrivals = self
            .arrivals
            .iter()
            .map(|dist| {
                dist.iter()
                    .map(|&(i, f)| ArrivalJson {
                        type_id: self.types[i].id,
                        prob: f,
                    })
                    .collect()
            })
            .collect();
        serde_json::to_value(InstanceJson {
            version: SCHEMA_VERSION.to_string(),
            class: self.class,
            horizon: self.horizon,
            agents,
            types,
            arrivals,
        })
        .expect("instance serialization cannot fail")
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Instance> {
        let raw: InstanceJson = serde_json::from_value(value.clone())?;
        if raw.version != SCHEMA_VERSION {
            return Err(SocsError::InvalidInstance(format!(
                "unsupported schema version {}",
                raw.version
            )));
        }
        let agents: Vec<AgentInfo> = raw
            .agents
            .iter()
            .map(|a| AgentInfo {
                id: a.id,
                weight: a.weight.unwrap_or(1.0),
                budget: a.budget.unwrap_or(1.0),
            })
            .collect();
        let agent_idx: BTreeMap<u32, usize> =
            agents.iter().enumerate().map(|(k, a)| (a.id, k)).collect();
        if agent_idx.len() != agents.len() {
            return Err(SocsError::InvalidInstance("duplicate agent ids".into()));
        }
        let lookup = |id: u32| -> Result<usize> {
            agent_idx
                .get(&id)
                .copied()
                .ok_or_else(|| SocsError::InvalidInstance(format!("unknown agent id {id}")))
        };
        let mut types = Vec::with_capacity(raw.types.len());
        for ty in &raw.types {
            let mut edges = Vec::new();
            if let Some(list) = &ty.edges {
                for &id in list {
                    edges.push((lookup(id)?, 1.0));
                }
            }
            let map = ty.bids.as_ref().or(ty.weights.as_ref());
            if let Some(map) = map {
                for (id, v) in map {
                    let id: u32 = id.parse().map_err(|_| {
                        SocsError::InvalidInstance(format!("bad agent key {id}"))
                    })?;
                    edges.push((lookup(id)?, *v));
                }
            }
            types.push(OnlineType { id: ty.id, edges });
        }
        let type_idx: BTreeMap<u32, usize> =
            types.iter().enumerate().map(|(k, t)| (t.id, k)).collect();
        if type_idx.len() != types.len() {
            return Err(SocsError::InvalidInstance("duplicate type ids".into()));
        }
        let mut arrivals = Vec::with_capacity(raw.arrivals.len());
        for dist in &raw.arrivals {
            let mut row = Vec::with_capacity(dist.len());
            for a in dist {
                let i = type_idx.get(&a.type_id).copied().ok_or_else(|| {
                    SocsError::InvalidInstance(format!("unknown type id {}", a.type_id))
                })?;
                row.push((i, a.prob));
            }
            arrivals.push(row);
        }
        Ok(Instance {
            class: raw.class,
            horizon: raw.horizon,
            agents,
            types,
            arrivals,
        })
    }
}
