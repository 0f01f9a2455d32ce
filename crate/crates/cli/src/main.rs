//! socs-lab: generate, solve, decompose, simulate, and verify.
//!
//! Exit codes: 0 on PASS, 1 on any FAIL, 2 on usage errors.

use clap::{Args, Parser, Subcommand};
use socs_core::adwords::{balance_fractional_sequence, balance_parameters, OcsStep};
use socs_core::allocation::{
    allocation_from_json, allocation_to_json, FractionalAllocation,
};
use socs_core::harness::{
    compare_to_rate, monte_carlo, run_ocs_experiment, run_qc_experiment, AlgorithmKind,
    Benchmark, ExperimentConfig, StatSummary,
};
use socs_core::instance::{generate, GenSpec, Instance, ProblemClass};
use socs_core::lp::{
    check_feasibility, solve_adwords_fluid_lp, solve_adwords_lp, solve_matching_lp, VbarMode,
    DEFAULT_LP_TOL,
};
use socs_core::oracles::{
    build_surrogate_instance, converse_jensen_check, exact_matching_dp, random_two_way_instance,
    recurrence_table,
};
use socs_core::querycommit::{QcSimulator, QueryCommitInstance};
use socs_core::rates::{appendix_b_checks, convergence_rate, ratio_constant, RateKind};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "socs-lab", version, about = "Stochastic online matching laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct OutputArgs {
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random instance.
    Gen {
        #[arg(long, value_parser = parse_class)]
        class: ProblemClass,
        #[arg(long, default_value_t = 3)]
        types: usize,
        #[arg(long, default_value_t = 3)]
        agents: usize,
        #[arg(long, default_value_t = 5)]
        horizon: usize,
        #[arg(long, default_value_t = 0.5)]
        density: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Validate an instance file and report every violation.
    Validate {
        #[arg(long)]
        instance: PathBuf,
    },
    /// Linear-program relaxations.
    Lp {
        #[command(subcommand)]
        command: LpCommand,
    },
    /// Surrogate-type distribution of a fractional allocation vector.
    Decompose {
        /// Comma-separated mu entries, e.g. "0.1,0.2,0.3,0.4".
        #[arg(long)]
        mu: String,
        /// Optionally also sample at a specific eta in [0, 0.5).
        #[arg(long)]
        eta: Option<f64>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Monte Carlo simulation of a rounding algorithm.
    Simulate {
        /// Instance file (instance-driven kinds).
        #[arg(long)]
        instance: Option<PathBuf>,
        /// Allocation file; solved by LP when omitted.
        #[arg(long)]
        alloc: Option<PathBuf>,
        /// Adversarial sequence file (multiway-ocs-adwords).
        #[arg(long)]
        sequence: Option<PathBuf>,
        /// Comma-separated budgets for sequence runs (default all 1).
        #[arg(long)]
        budgets: Option<String>,
        #[arg(long, value_parser = AlgorithmKind::parse)]
        kind: AlgorithmKind,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "lp", value_parser = Benchmark::parse)]
        benchmark: Benchmark,
        /// Compare per-agent estimates against the convergence rate; any
        /// FAIL flips the exit code.
        #[arg(long)]
        compare_rate: bool,
        #[arg(long, default_value_t = DEFAULT_LP_TOL)]
        tol: f64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Convergence-rate curves.
    Rates {
        #[command(subcommand)]
        command: RatesCommand,
    },
    /// Numeric verifications.
    Verify {
        #[command(subcommand)]
        command: VerifyCommand,
    },
    /// Query-commit simulation.
    Qc {
        #[command(subcommand)]
        command: QcCommand,
    },
}

#[derive(Subcommand)]
enum LpCommand {
    /// Solve the LP relaxation matching the instance's class.
    Solve {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value_t = DEFAULT_LP_TOL)]
        tol: f64,
        /// Solve the fluid AdWords LP instead of the subset family.
        #[arg(long)]
        fluid: bool,
        /// v-bar evaluation mode for the AdWords LP.
        #[arg(long, default_value = "large-bids", value_parser = parse_vbar)]
        vbar: VbarMode,
        /// Where to write the allocation; the report goes to --out.
        #[arg(long)]
        alloc_out: Option<PathBuf>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Re-audit an allocation against every constraint family.
    Check {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        alloc: PathBuf,
        #[arg(long, default_value_t = DEFAULT_LP_TOL)]
        tol: f64,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Subcommand)]
enum RatesCommand {
    /// Emit (y, g, 1-g) on a grid as CSV.
    Dump {
        #[arg(long, value_parser = RateKind::parse)]
        kind: RateKind,
        /// start:end:step
        #[arg(long, default_value = "0:1:0.01")]
        grid: String,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Print the competitive-ratio constants.
    Constants,
}

#[derive(Subcommand)]
enum VerifyCommand {
    /// Univariate inequality / concavity / monotonicity certifications.
    AppendixB,
    /// Converse Jensen inequality over LP solutions.
    ConverseJensen {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value_t = DEFAULT_LP_TOL)]
        tol: f64,
        /// Number of random type subsets per agent (plus the full set).
        #[arg(long, default_value_t = 20)]
        subsets: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Recurrence table vs forward DP vs Monte Carlo on random two-way
    /// instances.
    Oracles {
        #[arg(long, default_value_t = 50)]
        instances: u64,
        #[arg(long, default_value_t = 20_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum QcCommand {
    /// Run the probe-and-commit simulation.
    Run {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_LP_TOL)]
        tol: f64,
        #[command(flatten)]
        output: OutputArgs,
    },
}

fn parse_class(s: &str) -> Result<ProblemClass, String> {
    match s {
        "unweighted" => Ok(ProblemClass::Unweighted),
        "vertex-weighted" => Ok(ProblemClass::VertexWeighted),
        "adwords" => Ok(ProblemClass::AdWords),
        "display-ads" => Ok(ProblemClass::DisplayAds),
        other => Err(format!("unknown class {other}")),
    }
}

fn parse_vbar(s: &str) -> Result<VbarMode, String> {
    match s {
        "exact" => Ok(VbarMode::Exact),
        "large-bids" => Ok(VbarMode::LargeBidsExact),
        other => {
            if let Some(n) = other.strip_prefix("monte-carlo:") {
                n.parse()
                    .map(VbarMode::MonteCarlo)
                    .map_err(|e| format!("bad sample count: {e}"))
            } else {
                Err(format!(
                    "unknown v-bar mode {other} (exact | large-bids | monte-carlo:N)"
                ))
            }
        }
    }
}

fn emit(output: &OutputArgs, text: String) -> socs_core::Result<()> {
    match &output.out {
        Some(path) => std::fs::write(path, text)?,
        None => println!("{text}"),
    }
    Ok(())
}

fn read_json(path: &PathBuf) -> socs_core::Result<serde_json::Value> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

fn load_instance(path: &PathBuf) -> socs_core::Result<Instance> {
    Instance::from_json(&read_json(path)?)
}

fn summary_csv(summary: &StatSummary) -> String {
    let mut out = String::from("agent,level,y,estimate,stderr,wilson_lo,wilson_hi\n");
    if summary.levels.is_empty() {
        for a in &summary.agents {
            out.push_str(&format!(
                "{},,{},{},{},{},{}\n",
                a.agent, a.y, a.estimate, a.stderr, a.wilson_lo, a.wilson_hi
            ));
        }
    } else {
        for l in &summary.levels {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                l.agent, l.level, l.y, l.estimate, l.stderr, l.wilson_lo, l.wilson_hi
            ));
        }
    }
    out.push_str(&format!(
        "# alg_mean={} alg_stderr={} benchmark={:?} ratio={:?}\n",
        summary.alg_mean, summary.alg_stderr, summary.benchmark, summary.ratio
    ));
    out
}

fn solve_for_class(
    instance: &Instance,
    tol: f64,
) -> socs_core::Result<FractionalAllocation> {
    let (alloc, _) = match instance.class {
        ProblemClass::AdWords => solve_adwords_lp(instance, tol, VbarMode::LargeBidsExact)?,
        _ => solve_matching_lp(instance, tol)?,
    };
    Ok(alloc)
}

fn parse_sequence(
    value: &serde_json::Value,
    budgets: &[f64],
) -> socs_core::Result<(Vec<Vec<f64>>, Vec<Option<Vec<f64>>>)> {
    use socs_core::SocsError;
    let rows = value
        .as_array()
        .ok_or_else(|| SocsError::InvalidArgument("sequence must be a JSON array".into()))?;
    let n = budgets.len();
    let mut bids = Vec::new();
    let mut mus = Vec::new();
    for row in rows {
        let bid_map = row
            .get("bids")
            .and_then(|b| b.as_object())
            .ok_or_else(|| SocsError::InvalidArgument("each step needs a bids object".into()))?;
        let mut b = vec![0.0; n];
        for (k, v) in bid_map {
            let j: usize = k
                .parse()
                .map_err(|_| SocsError::InvalidArgument(format!("bad agent key {k}")))?;
            if j == 0 || j > n {
                return Err(SocsError::InvalidArgument(format!("agent {j} out of range")));
            }
            b[j - 1] = v.as_f64().unwrap_or(0.0);
        }
        let mu = match row.get("mu").and_then(|m| m.as_object()) {
            None => None,
            Some(map) => {
                let mut m = vec![0.0; n];
                for (k, v) in map {
                    let j: usize = k
                        .parse()
                        .map_err(|_| SocsError::InvalidArgument(format!("bad agent key {k}")))?;
                    if j == 0 || j > n {
                        return Err(SocsError::InvalidArgument(format!("agent {j} out of range")));
                    }
                    m[j - 1] = v.as_f64().unwrap_or(0.0);
                }
                Some(m)
            }
        };
        bids.push(b);
        mus.push(mu);
    }
    Ok((bids, mus))
}

fn run() -> socs_core::Result<bool> {
    let cli = Cli::parse();
    match cli.command {
        Command::Gen { class, types, agents, horizon, density, seed, output } => {
            let instance = generate(GenSpec {
                class,
                n_types: types,
                n_agents: agents,
                horizon,
                density,
                seed,
            });
            emit(&output, serde_json::to_string_pretty(&instance.to_json())?)?;
            Ok(true)
        }
        Command::Validate { instance } => {
            let inst = load_instance(&instance)?;
            let report = inst.validate();
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(report.is_valid())
        }
        Command::Lp { command } => match command {
            LpCommand::Solve { instance, tol, fluid, vbar, alloc_out, output } => {
                let inst = load_instance(&instance)?;
                let (alloc, report) = match (inst.class, fluid) {
                    (ProblemClass::AdWords, true) => solve_adwords_fluid_lp(&inst, tol)?,
                    (ProblemClass::AdWords, false) => solve_adwords_lp(&inst, tol, vbar)?,
                    (_, _) => solve_matching_lp(&inst, tol)?,
                };
                if let Some(path) = alloc_out {
                    std::fs::write(
                        path,
                        serde_json::to_string_pretty(&allocation_to_json(&inst, &alloc))?,
                    )?;
                }
                emit(&output, serde_json::to_string_pretty(&report)?)?;
                Ok(report.max_violation <= tol)
            }
            LpCommand::Check { instance, alloc, tol, output } => {
                let inst = load_instance(&instance)?;
                let alloc = allocation_from_json(&inst, &read_json(&alloc)?)?;
                let report = check_feasibility(&inst, &alloc, tol)?;
                emit(&output, serde_json::to_string_pretty(&report)?)?;
                Ok(report.max_violation <= tol)
            }
        },
        Command::Decompose { mu, eta, output } => {
            let mu: Vec<f64> = mu
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| socs_core::SocsError::InvalidArgument(format!("bad mu: {e}")))?;
            let dist = socs_core::decomposition::surrogate_distribution(&mu)?;
            let mut rows: Vec<serde_json::Value> = dist
                .iter()
                .map(|(ty, p)| serde_json::json!({ "surrogate": format!("{ty:?}"), "prob": p }))
                .collect();
            if let Some(eta) = eta {
                let sampled = socs_core::decomposition::sample_surrogate(&mu, eta)?;
                rows.push(serde_json::json!({ "sampled_at_eta": format!("{sampled:?}") }));
            }
            let residual = socs_core::decomposition::conservation_residual(&mu, &dist);
            rows.push(serde_json::json!({ "conservation_residual": residual }));
            match output.format {
                Format::Json => emit(&output, serde_json::to_string_pretty(&rows)?)?,
                Format::Csv => {
                    let mut text = String::from("surrogate,prob\n");
                    for (ty, p) in &dist {
                        text.push_str(&format!("{ty:?},{p}\n"));
                    }
                    emit(&output, text)?;
                }
            }
            Ok(residual <= 1e-12)
        }
        Command::Simulate {
            instance,
            alloc,
            sequence,
            budgets,
            kind,
            trials,
            seed,
            benchmark,
            compare_rate,
            tol,
            output,
        } => {
            let summary = match kind {
                AlgorithmKind::MultiwayOcsAdWords => {
                    let path = sequence.ok_or_else(|| {
                        socs_core::SocsError::InvalidArgument(
                            "multiway-ocs-adwords needs --sequence".into(),
                        )
                    })?;
                    let value = read_json(&path)?;
                    let budgets = budgets
                        .as_deref()
                        .map(parse_floats)
                        .transpose()?
                        .unwrap_or_else(|| infer_budgets(&value));
                    let (bids, mus) = parse_sequence(&value, &budgets)?;
                    let steps: Vec<OcsStep> = if mus.iter().all(|m| m.is_some()) {
                        bids.iter()
                            .zip(mus)
                            .map(|(b, m)| OcsStep { bids: b.clone(), mu: m.unwrap() })
                            .collect()
                    } else {
                        // Missing fractional allocations: run Balance first.
                        let params = balance_parameters(|z| {
                            convergence_rate(RateKind::MultiwayOcsAdWords, z)
                        })?;
                        balance_fractional_sequence(&bids, &budgets, &params)?
                    };
                    run_ocs_experiment(&steps, &budgets, trials, seed)?
                }
                AlgorithmKind::QueryCommit => {
                    return Err(socs_core::SocsError::InvalidArgument(
                        "use `qc run` for the query-commit model".into(),
                    ))
                }
                _ => {
                    let path = instance.ok_or_else(|| {
                        socs_core::SocsError::InvalidArgument("--instance is required".into())
                    })?;
                    let inst = load_instance(&path)?;
                    let allocation = match alloc {
                        Some(p) => allocation_from_json(&inst, &read_json(&p)?)?,
                        None => solve_for_class(&inst, tol)?,
                    };
                    let config = ExperimentConfig { kind, trials, seed, benchmark };
                    monte_carlo(&inst, &allocation, &config)?
                }
            };
            let mut pass = true;
            if compare_rate {
                let table = compare_to_rate(&summary, kind.rate_kind());
                pass = table.all_pass();
                eprintln!("{}", serde_json::to_string_pretty(&table)?);
            }
            match output.format {
                Format::Json => emit(&output, serde_json::to_string_pretty(&summary)?)?,
                Format::Csv => emit(&output, summary_csv(&summary))?,
            }
            Ok(pass)
        }
        Command::Rates { command } => match command {
            RatesCommand::Dump { kind, grid, output } => {
                let parts: Vec<&str> = grid.split(':').collect();
                if parts.len() != 3 {
                    return Err(socs_core::SocsError::InvalidArgument(
                        "grid must be start:end:step".into(),
                    ));
                }
                let (start, end, step): (f64, f64, f64) = (
                    parts[0].parse().unwrap_or(0.0),
                    parts[1].parse().unwrap_or(1.0),
                    parts[2].parse().unwrap_or(0.01),
                );
                let mut text = String::from("y,g,one_minus_g\n");
                let n = ((end - start) / step).round() as usize;
                for k in 0..=n {
                    let y = start + k as f64 * step;
                    let g = convergence_rate(kind, y);
                    text.push_str(&format!("{y},{g},{}\n", 1.0 - g));
                }
                emit(&output, text)?;
                Ok(true)
            }
            RatesCommand::Constants => {
                for kind in [
                    RateKind::Baseline,
                    RateKind::TwoWayMatching,
                    RateKind::GeneralMatching,
                    RateKind::RandomOrderMatching,
                    RateKind::TwoWayAdWords,
                    RateKind::general_adwords_default(),
                    RateKind::MultiwayOcsAdWords,
                    RateKind::TwoWayDisplay,
                    RateKind::GeneralDisplay,
                ] {
                    println!("{:<24} {:.6}", kind.name(), ratio_constant(kind));
                }
                Ok(true)
            }
        },
        Command::Verify { command } => match command {
            VerifyCommand::AppendixB => {
                let report = appendix_b_checks();
                for item in &report.items {
                    println!(
                        "{}: {} (residual {:.3e}, tol {:.1e})",
                        if item.pass { "PASS" } else { "FAIL" },
                        item.name,
                        item.worst_residual,
                        item.tolerance
                    );
                }
                Ok(report.all_pass())
            }
            VerifyCommand::ConverseJensen { instance, tol, subsets, seed } => {
                let inst = load_instance(&instance)?;
                if inst.class == ProblemClass::AdWords {
                    return Err(socs_core::SocsError::InvalidArgument(
                        "converse Jensen applies to matching LP solutions".into(),
                    ));
                }
                let (alloc, _) = solve_matching_lp(&inst, tol)?;
                let mut pass = true;
                let all: Vec<usize> = (0..inst.n_types()).collect();
                for j in 0..inst.n_agents() {
                    let mut worst: f64 = f64::NEG_INFINITY;
                    let full = converse_jensen_check(&inst, &alloc, &all, j)?;
                    pass &= full.holds;
                    worst = worst.max(full.lhs - full.rhs);
                    let mut s =
                        socs_core::rng::Stream::keyed(seed, socs_core::rng::Purpose::Generate, j as u64, 0, 0);
                    for _ in 0..subsets {
                        let sub: Vec<usize> =
                            all.iter().copied().filter(|_| s.next_bool()).collect();
                        let r = converse_jensen_check(&inst, &alloc, &sub, j)?;
                        pass &= r.holds;
                        worst = worst.max(r.lhs - r.rhs);
                    }
                    println!(
                        "{}: agent {} worst lhs-rhs {:.3e}",
                        if worst <= 1e-10 { "PASS" } else { "FAIL" },
                        inst.agents[j].id,
                        worst
                    );
                }
                Ok(pass)
            }
            VerifyCommand::Oracles { instances, trials, seed, .. } => {
                let mut pass = true;
                for k in 0..instances {
                    let (inst, alloc) = random_two_way_instance(
                        2 + (k as usize % 4),
                        2 + (k as usize % 5),
                        seed.wrapping_add(k),
                    );
                    let surr = build_surrogate_instance(&inst, &alloc)?;
                    let table = recurrence_table(&surr)?;
                    let dp = exact_matching_dp(&surr)?;
                    let mut worst: f64 = 0.0;
                    for j in 0..inst.n_agents() {
                        worst = worst.max((dp[j] - table.unmatched_probability(j)).abs());
                    }
                    let ok_exact = worst <= 1e-12;
                    let config = ExperimentConfig {
                        kind: AlgorithmKind::TwoWayMatching,
                        trials,
                        seed: seed.wrapping_add(k),
                        benchmark: Benchmark::None,
                    };
                    let summary = monte_carlo(&inst, &alloc, &config)?;
                    let ok_mc = summary.agents.iter().enumerate().all(|(j, a)| {
                        (a.estimate - dp[j]).abs() <= 4.0 * a.stderr.max(1e-9)
                    });
                    if !(ok_exact && ok_mc) {
                        pass = false;
                    }
                    println!(
                        "{}: instance {k} recurrence-vs-dp {worst:.2e}, mc {}",
                        if ok_exact && ok_mc { "PASS" } else { "FAIL" },
                        if ok_mc { "within 4 sigma" } else { "out of range" }
                    );
                }
                Ok(pass)
            }
        },
        Command::Qc { command } => match command {
            QcCommand::Run { instance, trials, seed, tol, output } => {
                let qc: QueryCommitInstance = serde_json::from_value(read_json(&instance)?)?;
                let mut sim = QcSimulator::new(qc, tol)?;
                let summary = run_qc_experiment(&mut sim, trials, seed)?;
                match output.format {
                    Format::Json => emit(&output, serde_json::to_string_pretty(&summary)?)?,
                    Format::Csv => emit(&output, summary_csv(&summary))?,
                }
                Ok(true)
            }
        },
    }
}

fn parse_floats(s: &str) -> socs_core::Result<Vec<f64>> {
    s.split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| socs_core::SocsError::InvalidArgument(format!("bad float list: {e}")))
}

fn infer_budgets(sequence: &serde_json::Value) -> Vec<f64> {
    let n = sequence
        .as_array()
        .map(|rows| {
            rows.iter()
                .filter_map(|r| r.get("bids").and_then(|b| b.as_object()))
                .flat_map(|m| m.keys())
                .filter_map(|k| k.parse::<usize>().ok())
                .max()
                .unwrap_or(0)
        })
        .unwrap_or(0);
    vec![1.0; n]
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
