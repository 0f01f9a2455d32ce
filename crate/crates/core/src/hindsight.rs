//! Offline optimum on realized arrivals: exact maximum-weight bipartite
//! matching by bitmask DP for the matching-style classes, exhaustive
//! assignment with budget caps for AdWords.

use crate::error::{Result, SocsError};
use crate::instance::{ArrivalSequence, Instance, ProblemClass};

pub const ADWORDS_BRUTE_CAP: usize = 14;
pub const MATCHING_AGENT_CAP: usize = 20;

/// Realized (step, type) items carrying at least one edge.
fn realized_items(instance: &Instance, arrivals: &ArrivalSequence) -> Vec<usize> {
    arrivals
        .0
        .iter()
        .flatten()
        .copied()
        .filter(|&i| !instance.types[i].edges.is_empty())
        .collect()
}

fn matching_optimum(instance: &Instance, items: &[usize]) -> Result<f64> {
    let n = instance.n_agents();
    if n > MATCHING_AGENT_CAP {
        return Err(SocsError::SizeCap(n, MATCHING_AGENT_CAP));
    }
    let mut dp = vec![0.0f64; 1 << n];
    for &i in items {
        let prev = dp.clone();
        for (mask, &base) in prev.iter().enumerate() {
            for &(j, _) in &instance.types[i].edges {
                if mask >> j & 1 == 0 {
                    let w = instance.objective_weight(i, j);
                    let slot = &mut dp[mask | (1 << j)];
                    if base + w > *slot {
                        *slot = base + w;
                    }
                }
            }
        }
    }
    Ok(dp.iter().copied().fold(0.0, f64::max))
}

fn adwords_optimum(instance: &Instance, items: &[usize]) -> Result<f64> {
    if items.len() > ADWORDS_BRUTE_CAP {
        return Err(SocsError::SizeCap(items.len(), ADWORDS_BRUTE_CAP));
    }
    let n = instance.n_agents();
    let budgets: Vec<f64> = instance.agents.iter().map(|a| a.budget).collect();
    // Upper bound for pruning: the largest bid each remaining item could add.
    let max_bid: Vec<f64> = items
        .iter()
        .map(|&i| {
            instance.types[i]
                .edges
                .iter()
                .map(|&(_, b)| b)
                .fold(0.0, f64::max)
        })
        .collect();
    let mut suffix = vec![0.0; items.len() + 1];
    for k in (0..items.len()).rev() {
        suffix[k] = suffix[k + 1] + max_bid[k];
    }
    struct Search<'a> {
        instance: &'a Instance,
        items: &'a [usize],
        budgets: &'a [f64],
        suffix: &'a [f64],
        best: f64,
    }
    impl Search<'_> {
        fn value(&self, spent: &[f64]) -> f64 {
            spent.iter().zip(self.budgets).map(|(s, b)| s.min(*b)).sum()
        }
        fn rec(&mut self, k: usize, spent: &mut [f64]) {
            let value = self.value(spent);
            if value > self.best {
                self.best = value;
            }
            if k == self.items.len() || value + self.suffix[k] <= self.best {
                return;
            }
            // Skip the item.
            self.rec(k + 1, spent);
            let i = self.items[k];
            for e in 0..self.instance.types[i].edges.len() {
                let (j, b) = self.instance.types[i].edges[e];
                spent[j] += b;
                self.rec(k + 1, spent);
                spent[j] -= b;
            }
        }
    }
    let mut search = Search { instance, items, budgets: &budgets, suffix: &suffix, best: 0.0 };
    let mut spent = vec![0.0; n];
    search.rec(0, &mut spent);
    Ok(search.best)
}

/// Offline optimal welfare for the realized arrivals.
pub fn hindsight_optimum(instance: &Instance, arrivals: &ArrivalSequence) -> Result<f64> {
    if arrivals.0.len() != instance.horizon {
        return Err(SocsError::InvalidArgument(
            "arrival sequence length does not match the horizon".into(),
        ));
    }
    let items = realized_items(instance, arrivals);
    match instance.class {
        ProblemClass::AdWords => adwords_optimum(instance, &items),
        _ => matching_optimum(instance, &items),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{generate, AgentInfo, GenSpec, OnlineType};

    fn unweighted(types: Vec<OnlineType>, n_agents: usize, arrivals: Vec<Option<usize>>) -> (Instance, ArrivalSequence) {
        let horizon = arrivals.len();
        (
            Instance {
                class: ProblemClass::Unweighted,
                horizon,
                agents: (0..n_agents)
                    .map(|j| AgentInfo { id: j as u32 + 1, weight: 1.0, budget: 1.0 })
                    .collect(),
                types,
                arrivals: vec![vec![]; horizon],
            },
            ArrivalSequence(arrivals),
        )
    }

    #[test]
    fn one_item_two_agents() {
        let (inst, arr) = unweighted(
            vec![OnlineType { id: 1, edges: vec![(0, 1.0), (1, 1.0)] }],
            2,
            vec![Some(0)],
        );
        assert_eq!(hindsight_optimum(&inst, &arr).unwrap(), 1.0);
    }

    #[test]
    fn two_items_one_agent() {
        let (inst, arr) = unweighted(
            vec![OnlineType { id: 1, edges: vec![(0, 1.0)] }],
            1,
            vec![Some(0), Some(0)],
        );
        assert_eq!(hindsight_optimum(&inst, &arr).unwrap(), 1.0);
    }

    #[test]
    fn adwords_budget_caps_value() {
        let inst = Instance {
            class: ProblemClass::AdWords,
            horizon: 2,
            agents: vec![AgentInfo { id: 1, weight: 1.0, budget: 1.0 }],
            types: vec![OnlineType { id: 1, edges: vec![(0, 0.9)] }],
            arrivals: vec![vec![]; 2],
        };
        let arr = ArrivalSequence(vec![Some(0), Some(0)]);
        assert_eq!(hindsight_optimum(&inst, &arr).unwrap(), 1.0);
    }

    #[test]
    fn matching_dp_matches_brute_force_permutations() {
        // Oracle: try every assignment of items to agents by DFS without
        // pruning, on random vertex-weighted instances.
        for seed in 0..30 {
            let inst = generate(GenSpec {
                class: ProblemClass::VertexWeighted,
                n_types: 4,
                n_agents: 4,
                horizon: 5,
                density: 0.6,
                seed,
            });
            let arr = inst.sample_arrivals(seed * 7 + 1).unwrap();
            let dp = hindsight_optimum(&inst, &arr).unwrap();
            fn brute(inst: &Instance, items: &[usize], k: usize, used: u32) -> f64 {
                if k == items.len() {
                    return 0.0;
                }
                let mut best = brute(inst, items, k + 1, used);
                for &(j, _) in &inst.types[items[k]].edges {
                    if used >> j & 1 == 0 {
                        let v = inst.objective_weight(items[k], j)
                            + brute(inst, items, k + 1, used | (1 << j));
                        best = best.max(v);
                    }
                }
                best
            }
            let items: Vec<usize> = arr.0.iter().flatten().copied().collect();
            let reference = brute(&inst, &items, 0, 0);
            assert!((dp - reference).abs() < 1e-12, "seed {seed}");
        }
    }

    #[test]
    fn adwords_matches_exhaustive_reference() {
        for seed in 0..20 {
            let inst = generate(GenSpec {
                class: ProblemClass::AdWords,
                n_types: 3,
                n_agents: 2,
                horizon: 5,
                density: 0.8,
                seed,
            });
            let arr = inst.sample_arrivals(seed + 31).unwrap();
            let fast = hindsight_optimum(&inst, &arr).unwrap();
            // Reference: plain exhaustive assignment without pruning.
            fn brute(inst: &Instance, items: &[usize], k: usize, spent: &mut [f64]) -> f64 {
                if k == items.len() {
                    return spent
                        .iter()
                        .zip(inst.agents.iter())
                        .map(|(s, a)| s.min(a.budget))
                        .sum();
                }
                let mut best = brute(inst, items, k + 1, spent);
                for e in 0..inst.types[items[k]].edges.len() {
                    let (j, b) = inst.types[items[k]].edges[e];
                    spent[j] += b;
                    best = best.max(brute(inst, items, k + 1, spent));
                    spent[j] -= b;
                }
                best
            }
            let items: Vec<usize> = arr.0.iter().flatten().copied().collect();
            let mut spent = vec![0.0; inst.n_agents()];
            let reference = brute(&inst, &items, 0, &mut spent);
            assert!((fast - reference).abs() < 1e-12, "seed {seed}");
        }
    }

    #[test]
    fn optimum_is_monotone_in_edges_and_weights() {
        for seed in 0..20 {
            let inst = generate(GenSpec {
                class: ProblemClass::DisplayAds,
                n_types: 3,
                n_agents: 3,
                horizon: 4,
                density: 0.5,
                seed,
            });
            let arr = inst.sample_arrivals(seed + 77).unwrap();
            let base = hindsight_optimum(&inst, &arr).unwrap();
            // Raise one existing weight.
            let mut raised = inst.clone();
            if let Some(ty) = raised.types.iter_mut().find(|t| !t.edges.is_empty()) {
                ty.edges[0].1 += 0.5;
            }
            assert!(hindsight_optimum(&raised, &arr).unwrap() >= base - 1e-12);
            // Add an edge.
            let mut extended = inst.clone();
            let j = seed as usize % extended.n_agents();
            if extended.types[0].edge_value(j).is_none() {
                extended.types[0].edges.push((j, 0.4));
            }
            assert!(hindsight_optimum(&extended, &arr).unwrap() >= base - 1e-12);
        }
    }

    #[test]
    fn adwords_cap_is_enforced() {
        let inst = Instance {
            class: ProblemClass::AdWords,
            horizon: 15,
            agents: vec![AgentInfo { id: 1, weight: 1.0, budget: 1.0 }],
            types: vec![OnlineType { id: 1, edges: vec![(0, 0.5)] }],
            arrivals: vec![vec![]; 15],
        };
        let arr = ArrivalSequence(vec![Some(0); 15]);
        assert!(matches!(
            hindsight_optimum(&inst, &arr),
            Err(SocsError::SizeCap(15, ADWORDS_BRUTE_CAP))
        ));
    }
}
