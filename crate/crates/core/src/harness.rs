//! Monte Carlo experiment driver: seeded independent trials, deterministic
//! block aggregation (bit-reproducible under any thread count), Wilson
//! intervals, and verdicts against the convergence-rate curves.

use crate::adwords::{run_general_adwords, run_multiway_ocs_adwords, OcsStep};
use crate::allocation::{cumulative_allocation, is_half_integer, FractionalAllocation};
use crate::display::{run_general_display, weight_levels};
use crate::error::{Result, SocsError};
use crate::hindsight::hindsight_optimum;
use crate::instance::{Instance, ProblemClass};
use crate::matching::{run_with_order_scheduled, shuffle_order};
use crate::oracles::{build_surrogate_instance, exact_adwords_dp, exact_display_dp, exact_matching_dp};
use crate::querycommit::QcSimulator;
use crate::rates::{convergence_rate, RateKind};
use crate::rng::trial_seed;
use crate::stats::{binomial_stderr, mean_stderr, wilson_interval, Z_99};
use rayon::prelude::*;
use serde::Serialize;

const BLOCK: u64 = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlgorithmKind {
    TwoWayMatching,
    GeneralMatching,
    RandomOrderMatching,
    TwoWayAdWords,
    GeneralAdWords,
    MultiwayOcsAdWords,
    TwoWayDisplay,
    GeneralDisplay,
    QueryCommit,
}

impl AlgorithmKind {
    pub fn name(self) -> &'static str {
        match self {
            AlgorithmKind::TwoWayMatching => "two-way-matching",
            AlgorithmKind::GeneralMatching => "general-matching",
            AlgorithmKind::RandomOrderMatching => "random-order-matching",
            AlgorithmKind::TwoWayAdWords => "two-way-adwords",
            AlgorithmKind::GeneralAdWords => "general-adwords",
            AlgorithmKind::MultiwayOcsAdWords => "multiway-ocs-adwords",
            AlgorithmKind::TwoWayDisplay => "two-way-display",
            AlgorithmKind::GeneralDisplay => "general-display",
            AlgorithmKind::QueryCommit => "query-commit",
        }
    }

    pub fn parse(s: &str) -> Result<AlgorithmKind> {
        Ok(match s {
            "two-way-matching" => AlgorithmKind::TwoWayMatching,
            "general-matching" => AlgorithmKind::GeneralMatching,
            "random-order-matching" => AlgorithmKind::RandomOrderMatching,
            "two-way-adwords" => AlgorithmKind::TwoWayAdWords,
            "general-adwords" => AlgorithmKind::GeneralAdWords,
            "multiway-ocs-adwords" => AlgorithmKind::MultiwayOcsAdWords,
            "two-way-display" => AlgorithmKind::TwoWayDisplay,
            "general-display" => AlgorithmKind::GeneralDisplay,
            "query-commit" => AlgorithmKind::QueryCommit,
            other => return Err(SocsError::UnknownRateKind(other.to_string())),
        })
    }

    /// The convergence-rate curve this kind is compared against.
    pub fn rate_kind(self) -> RateKind {
        match self {
            AlgorithmKind::TwoWayMatching => RateKind::TwoWayMatching,
            AlgorithmKind::GeneralMatching => RateKind::GeneralMatching,
            AlgorithmKind::RandomOrderMatching | AlgorithmKind::QueryCommit => {
                RateKind::RandomOrderMatching
            }
            AlgorithmKind::TwoWayAdWords => RateKind::TwoWayAdWords,
            AlgorithmKind::GeneralAdWords => RateKind::general_adwords_default(),
            AlgorithmKind::MultiwayOcsAdWords => RateKind::MultiwayOcsAdWords,
            AlgorithmKind::TwoWayDisplay => RateKind::TwoWayDisplay,
            AlgorithmKind::GeneralDisplay => RateKind::GeneralDisplay,
        }
    }

    fn wants_half_integer(self) -> bool {
        matches!(
            self,
            AlgorithmKind::TwoWayMatching
                | AlgorithmKind::TwoWayAdWords
                | AlgorithmKind::TwoWayDisplay
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Benchmark {
    None,
    /// The LP objective of the rounded allocation (deterministic).
    Lp,
    /// Paired hindsight optimum on the sampled arrivals.
    HindsightMc,
    /// Exact expected algorithm value from the state DP.
    ExactDp,
}

impl Benchmark {
    pub fn name(self) -> &'static str {
        match self {
            Benchmark::None => "none",
            Benchmark::Lp => "lp",
            Benchmark::HindsightMc => "hindsight-mc",
            Benchmark::ExactDp => "exact-dp",
        }
    }

    pub fn parse(s: &str) -> Result<Benchmark> {
        Ok(match s {
            "none" => Benchmark::None,
            "lp" => Benchmark::Lp,
            "hindsight-mc" => Benchmark::HindsightMc,
            "exact-dp" => Benchmark::ExactDp,
            other => {
                return Err(SocsError::InvalidArgument(format!("unknown benchmark {other}")))
            }
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ExperimentConfig {
    pub kind: AlgorithmKind,
    pub trials: u64,
    pub seed: u64,
    pub benchmark: Benchmark,
}

#[derive(Debug, Clone, Serialize)]
pub struct AgentStat {
    pub agent: u32,
    /// Unmatched probability (matching) or expected unspent budget fraction
    /// (AdWords).
    pub estimate: f64,
    pub stderr: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelStat {
    pub agent: u32,
    pub level: f64,
    /// Probability of receiving no edge of weight >= level.
    pub estimate: f64,
    pub stderr: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StatSummary {
    pub kind: String,
    pub benchmark_kind: String,
    pub trials: u64,
    pub seed: u64,
    pub agents: Vec<AgentStat>,
    pub levels: Vec<LevelStat>,
    pub alg_mean: f64,
    pub alg_stderr: f64,
    pub benchmark: Option<f64>,
    pub benchmark_stderr: f64,
    /// alg_mean / benchmark when a benchmark is present.
    pub ratio: Option<f64>,
    pub ratio_stderr: Option<f64>,
}

#[derive(Default, Clone)]
struct BlockAgg {
    trials: u64,
    miss_counts: Vec<u64>,
    unspent_sum: Vec<f64>,
    unspent_sumsq: Vec<f64>,
    level_miss: Vec<u64>,
    alg_sum: f64,
    alg_sumsq: f64,
    bench_sum: f64,
    bench_sumsq: f64,
}

impl BlockAgg {
    fn new(n_agents: usize, n_levels: usize) -> BlockAgg {
        BlockAgg {
            trials: 0,
            miss_counts: vec![0; n_agents],
            unspent_sum: vec![0.0; n_agents],
            unspent_sumsq: vec![0.0; n_agents],
            level_miss: vec![0; n_levels],
            alg_sum: 0.0,
            alg_sumsq: 0.0,
            bench_sum: 0.0,
            bench_sumsq: 0.0,
        }
    }

    fn fold(mut self, other: &BlockAgg) -> BlockAgg {
        self.trials += other.trials;
        for (a, b) in self.miss_counts.iter_mut().zip(&other.miss_counts) {
            *a += b;
        }
        for (a, b) in self.unspent_sum.iter_mut().zip(&other.unspent_sum) {
            *a += b;
        }
        for (a, b) in self.unspent_sumsq.iter_mut().zip(&other.unspent_sumsq) {
            *a += b;
        }
        for (a, b) in self.level_miss.iter_mut().zip(&other.level_miss) {
            *a += b;
        }
        self.alg_sum += other.alg_sum;
        self.alg_sumsq += other.alg_sumsq;
        self.bench_sum += other.bench_sum;
        self.bench_sumsq += other.bench_sumsq;
        self
    }
}

fn level_index(instance: &Instance) -> Vec<(usize, f64)> {
    let mut out = Vec::new();
    for j in 0..instance.n_agents() {
        for w in weight_levels(instance, j) {
            out.push((j, w));
        }
    }
    out
}

/// N independent trials with seeds base + trial index, aggregated in
/// deterministic block order regardless of rayon's execution order.
pub fn monte_carlo(
    instance: &Instance,
    alloc: &FractionalAllocation,
    config: &ExperimentConfig,
) -> Result<StatSummary> {
    if config.trials == 0 {
        return Err(SocsError::InvalidArgument("need at least one trial".into()));
    }
    match (config.kind, instance.class) {
        (AlgorithmKind::TwoWayMatching | AlgorithmKind::GeneralMatching
            | AlgorithmKind::RandomOrderMatching, c) if c.is_matching() => {}
        (AlgorithmKind::TwoWayAdWords | AlgorithmKind::GeneralAdWords, ProblemClass::AdWords) => {}
        (AlgorithmKind::TwoWayDisplay | AlgorithmKind::GeneralDisplay, ProblemClass::DisplayAds) => {}
        (kind, class) => {
            return Err(SocsError::InvalidArgument(format!(
                "algorithm {} cannot run on a {:?} instance",
                kind.name(),
                class
            )))
        }
    }
    if !alloc.matches_instance(instance) {
        return Err(SocsError::InvalidAllocation(
            "allocation dimensions do not match instance".into(),
        ));
    }
    if config.kind.wants_half_integer() && !is_half_integer(instance, alloc) {
        return Err(SocsError::InvalidArgument(
            "two-way kinds require a half-integer allocation".into(),
        ));
    }
    // Hindsight brute force is capped for AdWords; beyond the cap compare
    // against the LP objective only (a valid upper bound).
    let mut config = *config;
    if config.benchmark == Benchmark::HindsightMc
        && instance.class == ProblemClass::AdWords
        && instance.horizon > crate::hindsight::ADWORDS_BRUTE_CAP
    {
        config.benchmark = Benchmark::Lp;
    }
    let config = &config;
    let report = instance.validate();
    if !report.is_valid() {
        return Err(SocsError::InvalidInstance(format!(
            "{} violation(s)",
            report.violations.len()
        )));
    }
    let levels = if instance.class == ProblemClass::DisplayAds {
        level_index(instance)
    } else {
        Vec::new()
    };
    let n_agents = instance.n_agents();
    let budgets: Vec<f64> = instance.agents.iter().map(|a| a.budget).collect();
    let schedule = crate::allocation::step_schedule(instance, alloc);
    let identity_order: Vec<usize> = (0..instance.horizon).collect();
    let n_blocks = config.trials.div_ceil(BLOCK);
    let blocks: Vec<Result<BlockAgg>> = (0..n_blocks)
        .into_par_iter()
        .map(|block| {
            let lo = block * BLOCK;
            let hi = ((block + 1) * BLOCK).min(config.trials);
            let mut agg = BlockAgg::new(n_agents, levels.len());
            for trial in lo..hi {
                let seed = trial_seed(config.seed, trial);
                let mut bench: Option<f64> = None;
                let alg = match config.kind {
                    AlgorithmKind::TwoWayMatching | AlgorithmKind::GeneralMatching
                    | AlgorithmKind::RandomOrderMatching => {
                        let arr = instance.sample_arrivals_unchecked(seed);
                        let outcome = if config.kind == AlgorithmKind::RandomOrderMatching {
                            let order = shuffle_order(instance.horizon, seed);
                            run_with_order_scheduled(
                                instance, alloc, &schedule, &order, &arr, seed,
                            )?
                        } else {
                            run_with_order_scheduled(
                                instance, alloc, &schedule, &identity_order, &arr, seed,
                            )?
                        };
                        for (j, &m) in outcome.matched.iter().enumerate() {
                            if !m {
                                agg.miss_counts[j] += 1;
                            }
                        }
                        if config.benchmark == Benchmark::HindsightMc {
                            bench = Some(hindsight_optimum(instance, &arr)?);
                        }
                        crate::matching::matched_value(instance, &outcome)?
                    }
                    AlgorithmKind::TwoWayAdWords | AlgorithmKind::GeneralAdWords => {
                        let arr = instance.sample_arrivals_unchecked(seed);
                        let outcome = run_general_adwords(instance, alloc, &arr, seed)?;
                        let values = outcome.values(&budgets);
                        for j in 0..n_agents {
                            let unspent = 1.0 - values[j] / budgets[j];
                            agg.unspent_sum[j] += unspent;
                            agg.unspent_sumsq[j] += unspent * unspent;
                        }
                        if config.benchmark == Benchmark::HindsightMc {
                            bench = Some(hindsight_optimum(instance, &arr)?);
                        }
                        values.iter().sum()
                    }
                    AlgorithmKind::TwoWayDisplay | AlgorithmKind::GeneralDisplay => {
                        let arr = instance.sample_arrivals_unchecked(seed);
                        let outcome = run_general_display(instance, alloc, &arr, seed)?;
                        for (k, &(j, w)) in levels.iter().enumerate() {
                            if outcome.best_weight[j] < w - 1e-15 {
                                agg.level_miss[k] += 1;
                            }
                        }
                        if config.benchmark == Benchmark::HindsightMc {
                            bench = Some(hindsight_optimum(instance, &arr)?);
                        }
                        outcome.total_value()
                    }
                    AlgorithmKind::MultiwayOcsAdWords | AlgorithmKind::QueryCommit => {
                        return Err(SocsError::InvalidArgument(
                            "use run_ocs_experiment / run_qc_experiment".into(),
                        ))
                    }
                };
                agg.trials += 1;
                agg.alg_sum += alg;
                agg.alg_sumsq += alg * alg;
                if let Some(b) = bench {
                    agg.bench_sum += b;
                    agg.bench_sumsq += b * b;
                }
            }
            Ok(agg)
        })
        .collect();
    let mut total = BlockAgg::new(n_agents, levels.len());
    for b in blocks {
        total = total.fold(&b?);
    }
    summarize(instance, alloc, config, &levels, total)
}

fn summarize(
    instance: &Instance,
    alloc: &FractionalAllocation,
    config: &ExperimentConfig,
    levels: &[(usize, f64)],
    total: BlockAgg,
) -> Result<StatSummary> {
    let n = total.trials;
    let n_agents = instance.n_agents();
    let mut agents = Vec::with_capacity(n_agents);
    for j in 0..n_agents {
        let y = cumulative_allocation(instance, alloc, j, instance.horizon, None)?;
        let (estimate, stderr, lo, hi) = if instance.class == ProblemClass::AdWords {
            let (m, se) = mean_stderr(total.unspent_sum[j], total.unspent_sumsq[j], n);
            (m, se, (m - Z_99 * se).max(0.0), (m + Z_99 * se).min(1.0))
        } else {
            let c = total.miss_counts[j];
            let (lo, hi) = wilson_interval(c, n, Z_99);
            (c as f64 / n as f64, binomial_stderr(c, n), lo, hi)
        };
        agents.push(AgentStat {
            agent: instance.agents[j].id,
            estimate,
            stderr,
            wilson_lo: lo,
            wilson_hi: hi,
            y,
        });
    }
    let mut level_stats = Vec::with_capacity(levels.len());
    for (k, &(j, w)) in levels.iter().enumerate() {
        let c = total.level_miss[k];
        let (lo, hi) = wilson_interval(c, n, Z_99);
        let y = cumulative_allocation(instance, alloc, j, instance.horizon, Some(w))?;
        level_stats.push(LevelStat {
            agent: instance.agents[j].id,
            level: w,
            estimate: c as f64 / n as f64,
            stderr: binomial_stderr(c, n),
            wilson_lo: lo,
            wilson_hi: hi,
            y,
        });
    }
    let (alg_mean, alg_stderr) = mean_stderr(total.alg_sum, total.alg_sumsq, n);
    let (benchmark, benchmark_stderr) = match config.benchmark {
        Benchmark::None => (None, 0.0),
        Benchmark::Lp => (Some(alloc.objective(instance)), 0.0),
        Benchmark::HindsightMc => {
            let (m, se) = mean_stderr(total.bench_sum, total.bench_sumsq, n);
            (Some(m), se)
        }
        Benchmark::ExactDp => {
            let v = exact_alg_value(instance, alloc)?;
            (Some(v), 0.0)
        }
    };
    let (ratio, ratio_stderr) = match benchmark {
        Some(b) if b > 0.0 => {
            let r = alg_mean / b;
            let se = if benchmark_stderr > 0.0 {
                r * ((alg_stderr / alg_mean).powi(2) + (benchmark_stderr / b).powi(2)).sqrt()
            } else {
                alg_stderr / b
            };
            (Some(r), Some(se))
        }
        _ => (None, None),
    };
    Ok(StatSummary {
        kind: config.kind.name().to_string(),
        benchmark_kind: config.benchmark.name().to_string(),
        trials: n,
        seed: config.seed,
        agents,
        levels: level_stats,
        alg_mean,
        alg_stderr,
        benchmark,
        benchmark_stderr,
        ratio,
        ratio_stderr,
    })
}

/// Exact expected algorithm value from the state DP oracles.
pub fn exact_alg_value(instance: &Instance, alloc: &FractionalAllocation) -> Result<f64> {
    match instance.class {
        ProblemClass::Unweighted | ProblemClass::VertexWeighted => {
            let surr = build_surrogate_instance(instance, alloc)?;
            let unmatched = exact_matching_dp(&surr)?;
            Ok(unmatched
                .iter()
                .enumerate()
                .map(|(j, &u)| instance.agents[j].weight * (1.0 - u))
                .sum())
        }
        ProblemClass::AdWords => {
            let unspent = exact_adwords_dp(instance, alloc)?;
            Ok(unspent
                .iter()
                .enumerate()
                .map(|(j, &u)| instance.agents[j].budget * (1.0 - u))
                .sum())
        }
        ProblemClass::DisplayAds => {
            let miss = exact_display_dp(instance, alloc)?;
            let mut value = 0.0;
            for levels in miss {
                let mut prev = 0.0;
                for (w, m) in levels {
                    value += (w - prev) * (1.0 - m);
                    prev = w;
                }
            }
            Ok(value)
        }
    }
}

/// Adversarial-sequence experiment for the multi-way OCS (and Balance-OCS
/// once the fractional pass is done).
pub fn run_ocs_experiment(
    steps: &[OcsStep],
    budgets: &[f64],
    trials: u64,
    seed: u64,
) -> Result<StatSummary> {
    let n_agents = budgets.len();
    let ys: Vec<f64> = (0..n_agents)
        .map(|j| {
            steps
                .iter()
                .map(|s| s.mu[j] * s.bids[j] / budgets[j])
                .sum()
        })
        .collect();
    let n_blocks = trials.div_ceil(BLOCK);
    let blocks: Vec<Result<BlockAgg>> = (0..n_blocks)
        .into_par_iter()
        .map(|block| {
            let lo = block * BLOCK;
            let hi = ((block + 1) * BLOCK).min(trials);
            let mut agg = BlockAgg::new(n_agents, 0);
            for trial in lo..hi {
                let s = trial_seed(seed, trial);
                let outcome = run_multiway_ocs_adwords(steps, budgets, s)?;
                let values = outcome.values(budgets);
                for j in 0..n_agents {
                    let unspent = 1.0 - values[j] / budgets[j];
                    agg.unspent_sum[j] += unspent;
                    agg.unspent_sumsq[j] += unspent * unspent;
                }
                let alg: f64 = values.iter().sum();
                agg.trials += 1;
                agg.alg_sum += alg;
                agg.alg_sumsq += alg * alg;
            }
            Ok(agg)
        })
        .collect();
    let mut total = BlockAgg::new(n_agents, 0);
    for b in blocks {
        total = total.fold(&b?);
    }
    let n = total.trials;
    let agents = (0..n_agents)
        .map(|j| {
            let (m, se) = mean_stderr(total.unspent_sum[j], total.unspent_sumsq[j], n);
            AgentStat {
                agent: j as u32 + 1,
                estimate: m,
                stderr: se,
                wilson_lo: (m - Z_99 * se).max(0.0),
                wilson_hi: (m + Z_99 * se).min(1.0),
                y: ys[j],
            }
        })
        .collect();
    let (alg_mean, alg_stderr) = mean_stderr(total.alg_sum, total.alg_sumsq, n);
    let benchmark = crate::adwords::ocs_sequence_optimum(
        &steps.iter().map(|s| s.bids.clone()).collect::<Vec<_>>(),
        budgets,
    )
    .ok();
    let ratio = benchmark.filter(|&b| b > 0.0).map(|b| alg_mean / b);
    let ratio_stderr = benchmark.filter(|&b| b > 0.0).map(|b| alg_stderr / b);
    Ok(StatSummary {
        kind: AlgorithmKind::MultiwayOcsAdWords.name().to_string(),
        benchmark_kind: "sequence-optimum".to_string(),
        trials: n,
        seed,
        agents,
        levels: Vec::new(),
        alg_mean,
        alg_stderr,
        benchmark,
        benchmark_stderr: 0.0,
        ratio,
        ratio_stderr,
    })
}

/// Query-commit experiment. Trials share the simulator's probe-plan memo,
/// so they run sequentially; the per-trial seeding keeps the output
/// identical to any parallel schedule.
pub fn run_qc_experiment(
    sim: &mut QcSimulator,
    trials: u64,
    seed: u64,
) -> Result<StatSummary> {
    let n_agents = sim.qc.n_offline;
    let mut agg = BlockAgg::new(n_agents, 0);
    for trial in 0..trials {
        let s = trial_seed(seed, trial);
        let out = sim.run_trial(s)?;
        let mut matched = vec![false; n_agents];
        for &(_, j) in &out.matches {
            matched[j] = true;
        }
        for (j, &m) in matched.iter().enumerate() {
            if !m {
                agg.miss_counts[j] += 1;
            }
        }
        let alg = sim.trial_value(&out);
        agg.trials += 1;
        agg.alg_sum += alg;
        agg.alg_sumsq += alg * alg;
    }
    let n = agg.trials;
    let instance = sim.instance.clone();
    let alloc = sim.alloc.clone();
    let agents = (0..n_agents)
        .map(|j| {
            let c = agg.miss_counts[j];
            let (lo, hi) = wilson_interval(c, n, Z_99);
            let y = cumulative_allocation(&instance, &alloc, j, instance.horizon, None)
                .unwrap_or(f64::NAN);
            AgentStat {
                agent: j as u32 + 1,
                estimate: c as f64 / n as f64,
                stderr: binomial_stderr(c, n),
                wilson_lo: lo,
                wilson_hi: hi,
                y,
            }
        })
        .collect();
    let (alg_mean, alg_stderr) = mean_stderr(agg.alg_sum, agg.alg_sumsq, n);
    let benchmark = Some(sim.lp_report.objective);
    Ok(StatSummary {
        kind: AlgorithmKind::QueryCommit.name().to_string(),
        benchmark_kind: "lp".to_string(),
        trials: n,
        seed,
        agents,
        levels: Vec::new(),
        alg_mean,
        alg_stderr,
        benchmark,
        benchmark_stderr: 0.0,
        ratio: benchmark.map(|b| alg_mean / b),
        ratio_stderr: benchmark.map(|b| alg_stderr / b),
    })
}

// ---------------------------------------------------------------------------
// Rate verdicts
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Pass,
    Fail,
    /// y outside the guarantee's domain (y > 1): no comparison made.
    Skip,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerdictRow {
    pub agent: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level: Option<f64>,
    pub estimate: f64,
    pub sigma: f64,
    pub y: f64,
    pub g: f64,
    /// g + 3 sigma - estimate; non-negative iff Pass.
    pub margin: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerdictTable {
    pub rate: String,
    pub rows: Vec<VerdictRow>,
}

impl VerdictTable {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.verdict != Verdict::Fail)
    }
}

/// Compare per-agent (and per weight-level) estimates against g(y):
/// PASS iff estimate <= g(y) + 3 sigma.
pub fn compare_to_rate(summary: &StatSummary, rate: RateKind) -> VerdictTable {
    let mut rows = Vec::new();
    let mut push = |agent: u32, level: Option<f64>, estimate: f64, sigma: f64, y: f64| {
        if y > 1.0 + 1e-9 {
            rows.push(VerdictRow {
                agent,
                level,
                estimate,
                sigma,
                y,
                g: f64::NAN,
                margin: f64::NAN,
                verdict: Verdict::Skip,
            });
            return;
        }
        let g = convergence_rate(rate, y);
        let margin = g + 3.0 * sigma - estimate;
        rows.push(VerdictRow {
            agent,
            level,
            estimate,
            sigma,
            y,
            g,
            margin,
            verdict: if margin >= 0.0 { Verdict::Pass } else { Verdict::Fail },
        });
    };
    if summary.levels.is_empty() {
        for a in &summary.agents {
            push(a.agent, None, a.estimate, a.stderr, a.y);
        }
    } else {
        // Display Ads: the guarantee is per weight-level.
        for l in &summary.levels {
            push(l.agent, Some(l.level), l.estimate, l.stderr, l.y);
        }
    }
    VerdictTable { rate: rate.name().to_string(), rows }
}
