//! Batch sweeps over (instance, formulation, breakpoint) with CSV output.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::{Duration, Instant};

use log::{info, warn};
use rayon::prelude::*;

use crate::bigm::compute_bigm;
use crate::cuts::{solve_with_vfcs_cuts, DEFAULT_MAX_ROUNDS};
use crate::enumeration::{default_perturbation, enumerate_all, perturb_costs, UNBOUNDED};
use crate::formulation::{assemble_hybrid, FormulationKind, HybridOptions};
use crate::network::ProblemInstance;
use crate::solver::{MilpBackend, SolveStatus};

pub const CSV_HEADER: [&str; 9] = [
    "instance", "kind", "N", "status", "objective", "gap_pct", "enum_s", "solve_s", "total_s",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub instance: String,
    pub kind: FormulationKind,
    pub breakpoint: usize,
    /// A solve status label, or `error` when the run failed.
    pub status: String,
    pub objective: Option<f64>,
    /// Relative gap in percent; infinite without an incumbent.
    pub gap_pct: f64,
    pub enum_time: Duration,
    pub solve_time: Duration,
    pub total_time: Duration,
    pub error: Option<String>,
}

impl RunRecord {
    pub fn solved(&self) -> bool {
        self.status == SolveStatus::Optimal.label()
    }
}

pub fn breakpoint_label(n: usize) -> String {
    if n == UNBOUNDED {
        "inf".into()
    } else {
        n.to_string()
    }
}

pub fn parse_breakpoint(s: &str) -> Option<usize> {
    match s.trim() {
        "inf" | "Inf" | "INF" | "∞" => Some(UNBOUNDED),
        t => t.parse().ok().filter(|&n| n >= 1),
    }
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub kinds: Vec<FormulationKind>,
    pub breakpoints: Vec<usize>,
    /// Per run, enumeration included.
    pub budget: Duration,
    pub fallback: FormulationKind,
    /// Worker threads; 0 uses all cores.
    pub workers: usize,
    /// Seed for cost perturbation, `None` to use costs as given.
    pub perturb_seed: Option<u64>,
    pub max_cut_rounds: usize,
}

impl SweepConfig {
    pub fn new(kinds: Vec<FormulationKind>, breakpoints: Vec<usize>, budget: Duration) -> Self {
        SweepConfig {
            kinds,
            breakpoints,
            budget,
            fallback: FormulationKind::Std,
            workers: 0,
            perturb_seed: None,
            max_cut_rounds: DEFAULT_MAX_ROUNDS,
        }
    }
}

/// One run: enumerate with cap `N + 1`, assemble, solve.
pub fn run_one(
    instance: &ProblemInstance,
    kind: FormulationKind,
    breakpoint: usize,
    config: &SweepConfig,
    backend: &dyn MilpBackend,
) -> RunRecord {
    let start = Instant::now();
    let mut record = RunRecord {
        instance: instance.label.clone(),
        kind,
        breakpoint,
        status: "error".into(),
        objective: None,
        gap_pct: f64::INFINITY,
        enum_time: Duration::ZERO,
        solve_time: Duration::ZERO,
        total_time: Duration::ZERO,
        error: None,
    };
    let outcome = (|| -> Result<(), String> {
        let cap = breakpoint.saturating_add(1);
        let sets = enumerate_all(&instance.network, &instance.commodities, cap);
        record.enum_time = start.elapsed();
        let bigm = compute_bigm(&instance.network, &instance.commodities, &sets).map_err(|e| e.to_string())?;
        let options = HybridOptions::new(breakpoint, kind, config.fallback);
        let mut hybrid = assemble_hybrid(instance, &options, &bigm, &sets).map_err(|e| e.to_string())?;
        let remaining = config.budget.saturating_sub(start.elapsed());
        let solve_start = Instant::now();
        let out = solve_with_vfcs_cuts(&mut hybrid, &bigm, remaining, backend, config.max_cut_rounds)
            .map_err(|e| e.to_string())?;
        record.solve_time = solve_start.elapsed();
        let mut status = out.result.status;
        if status == SolveStatus::Optimal && !out.converged {
            // Cut loop stopped with violated cuts: the value is only a bound.
            status = SolveStatus::BudgetExhausted;
        }
        record.status = status.label().into();
        record.objective = out.result.objective;
        record.gap_pct = if status == SolveStatus::Optimal { 0.0 } else { out.result.gap * 100.0 };
        Ok(())
    })();
    if let Err(e) = outcome {
        warn!("{} {kind} N={}: {e}", instance.label, breakpoint_label(breakpoint));
        record.error = Some(e);
    }
    record.total_time = start.elapsed();
    record
}

/// Runs every (instance, kind, breakpoint) combination. Failures become
/// `error` rows; the sweep never aborts. Rows come back in input order.
pub fn run_sweep(
    instances: &[ProblemInstance],
    config: &SweepConfig,
    backend: &dyn MilpBackend,
) -> Vec<RunRecord> {
    let prepared: Vec<ProblemInstance> = instances
        .iter()
        .map(|inst| match (config.perturb_seed, default_perturbation(&inst.network)) {
            (Some(seed), Some(size)) => {
                let network = perturb_costs(&inst.network, size, seed).expect("positive magnitude");
                ProblemInstance { network, ..inst.clone() }
            }
            _ => inst.clone(),
        })
        .collect();
    let jobs: Vec<(usize, FormulationKind, usize)> = (0..prepared.len())
        .flat_map(|i| {
            config
                .kinds
                .iter()
                .flat_map(move |&k| config.breakpoints.iter().map(move |&n| (i, k, n)))
        })
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .expect("thread pool");
    pool.install(|| {
        jobs.par_iter()
            .map(|&(i, kind, n)| {
                let r = run_one(&prepared[i], kind, n, config, backend);
                info!(
                    "{} {} N={} {} obj={:?} {:.3}s",
                    r.instance,
                    r.kind,
                    breakpoint_label(r.breakpoint),
                    r.status,
                    r.objective,
                    r.total_time.as_secs_f64()
                );
                r
            })
            .collect()
    })
}

fn fmt_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        "inf".into()
    }
}

pub fn write_csv<W: Write>(records: &[RunRecord], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.instance.clone(),
            r.kind.to_string(),
            breakpoint_label(r.breakpoint),
            r.status.clone(),
            r.objective.map(fmt_float).unwrap_or_default(),
            fmt_float(r.gap_pct),
            format!("{:.6}", r.enum_time.as_secs_f64()),
            format!("{:.6}", r.solve_time.as_secs_f64()),
            format!("{:.6}", r.total_time.as_secs_f64()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub kind: FormulationKind,
    pub breakpoint: usize,
    pub runs: usize,
    pub solved: usize,
    /// Mean total time over the easy group, `None` if it is empty.
    pub easy_mean_time: Option<f64>,
    /// Mean gap (percent) over the hard group, `None` if it is empty.
    pub hard_mean_gap_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    /// Instances solved to optimality by at least one run.
    pub easy: Vec<String>,
    pub hard: Vec<String>,
    pub rows: Vec<SummaryRow>,
}

/// Splits instances into easy and hard after the fact and aggregates per
/// (kind, N).
pub fn summarize(records: &[RunRecord]) -> Summary {
    let mut solved_by: BTreeMap<&str, bool> = BTreeMap::new();
    for r in records {
        *solved_by.entry(&r.instance).or_default() |= r.solved();
    }
    let easy: Vec<String> = solved_by.iter().filter(|(_, &s)| s).map(|(i, _)| i.to_string()).collect();
    let hard: Vec<String> = solved_by.iter().filter(|(_, &s)| !s).map(|(i, _)| i.to_string()).collect();
    let mut groups: Vec<((FormulationKind, usize), Vec<&RunRecord>)> = Vec::new();
    for r in records {
        let key = (r.kind, r.breakpoint);
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(r),
            None => groups.push((key, vec![r])),
        }
    }
    let mean = |v: Vec<f64>| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    let rows = groups
        .into_iter()
        .map(|((kind, breakpoint), rs)| SummaryRow {
            kind,
            breakpoint,
            runs: rs.len(),
            solved: rs.iter().filter(|r| r.solved()).count(),
            easy_mean_time: mean(
                rs.iter()
                    .filter(|r| easy.contains(&r.instance))
                    .map(|r| r.total_time.as_secs_f64())
                    .collect(),
            ),
            hard_mean_gap_pct: mean(
                rs.iter()
                    .filter(|r| hard.contains(&r.instance))
                    .map(|r| r.gap_pct)
                    .collect(),
            ),
        })
        .collect();
    Summary { easy, hard, rows }
}

pub fn write_summary_csv<W: Write>(summary: &Summary, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["kind", "N", "runs", "solved", "easy_mean_total_s", "hard_mean_gap_pct"])?;
    for r in &summary.rows {
        w.write_record([
            r.kind.to_string(),
            breakpoint_label(r.breakpoint),
            r.runs.to_string(),
            r.solved.to_string(),
            r.easy_mean_time.map(|t| format!("{t:.6}")).unwrap_or_default(),
            r.hard_mean_gap_pct.map(fmt_float).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
