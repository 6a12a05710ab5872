//! The ten acceptance criteria, one PASS/FAIL line each. Built without the
//! test harness so the lines always reach the output.

mod common;

use std::time::{Duration, Instant};

use npp_core::bigm::{compute_bigm, BigMParams};
use npp_core::cuts::{solve_with_vfcs_cuts, CutLoopOutcome, DEFAULT_MAX_ROUNDS};
use npp_core::enumeration::{
    dominance_filter, enumerate_all, enumerate_paths, is_bilevel_feasible, BilevelFeasibleSet, Path, UNBOUNDED,
};
use npp_core::formulation::{assemble_hybrid, FormulationKind, HybridOptions};
use npp_core::generator::{generate, GenConfig, Topology};
use npp_core::network::{parse_instance, ProblemInstance};
use npp_core::preprocess::{path_based_reduce, spgm_transform};
use npp_core::solver::{oracle_solve, BuiltinBackend, OracleResult, SolveStatus, DEFAULT_ORACLE_CAP};
use npp_core::Fixed;

const BUDGET: Duration = Duration::from_secs(120);

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(failures: &[String], elapsed: Duration, limit: Option<Duration>, summary: String) -> Verdict {
        let in_time = limit.is_none_or(|l| elapsed < l);
        let mut detail = format!("{summary}; {elapsed:.2?}");
        if let Some(l) = limit {
            detail += &format!(" (limit {l:?})");
        }
        if !failures.is_empty() {
            detail += &format!("; {} failure(s), first: {}", failures.len(), failures[0]);
        }
        Verdict {
            pass: failures.is_empty() && in_time,
            detail,
        }
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-6 * a.abs().max(b.abs()).max(1.0)
}

/// Solves one hybrid model to optimality through the cut loop and returns
/// the objective, or a description of what went wrong.
fn solve_options(
    inst: &ProblemInstance,
    options: &HybridOptions,
    bigm: &BigMParams,
    sets: &[BilevelFeasibleSet],
) -> Result<(f64, CutLoopOutcome), String> {
    let mut hybrid = assemble_hybrid(inst, options, bigm, sets).map_err(|e| e.to_string())?;
    let out = solve_with_vfcs_cuts(&mut hybrid, bigm, BUDGET, &BuiltinBackend::default(), DEFAULT_MAX_ROUNDS)
        .map_err(|e| e.to_string())?;
    if out.result.status != SolveStatus::Optimal || !out.converged {
        return Err(format!("status {} converged {}", out.result.status, out.converged));
    }
    let v = out.result.objective.ok_or("no objective")?;
    Ok((v, out))
}

fn costs(paths: &[Path]) -> Vec<Fixed> {
    paths.iter().map(|p| p.base_cost).collect()
}

fn nondecreasing(paths: &[Path]) -> bool {
    paths.windows(2).all(|w| w[0].base_cost <= w[1].base_cost)
}

/// Everything the model-level criteria share for one instance.
struct Prepared {
    inst: ProblemInstance,
    sets: Vec<BilevelFeasibleSet>,
    bigm: BigMParams,
    oracle: OracleResult,
}

fn criterion1(toy5: &ProblemInstance, monotone: &mut Vec<String>) -> Verdict {
    let c = &toy5.commodities[0];
    let start = Instant::now();
    let e = enumerate_paths(&toy5.network, c, UNBOUNDED);
    let kept = dominance_filter(&e.paths).unwrap();
    let elapsed = start.elapsed();
    let mut failures = Vec::new();
    let emitted = costs(&e.paths);
    let filtered = costs(&kept);
    let want = |v: &[i64]| v.iter().map(|&x| Fixed::from_int(x)).collect::<Vec<_>>();
    if emitted != want(&[3, 4, 6, 10]) {
        failures.push(format!("emitted costs {emitted:?}"));
    }
    if filtered != want(&[3, 4, 10]) {
        failures.push(format!("filtered costs {filtered:?}"));
    }
    if !nondecreasing(&e.paths) {
        monotone.push("toy5".into());
    }
    let summary = format!("emitted {} paths, kept {}", e.paths.len(), kept.len());
    Verdict::new(&failures, elapsed, Some(Duration::from_millis(1)), summary)
}

fn criterion2(toy5: &ProblemInstance) -> Verdict {
    let start = Instant::now();
    let sets = enumerate_all(&toy5.network, &toy5.commodities, UNBOUNDED);
    let bigm = compute_bigm(&toy5.network, &toy5.commodities, &sets).unwrap();
    let oracle = oracle_solve(toy5, &sets, DEFAULT_ORACLE_CAP).unwrap();
    let mut failures = Vec::new();
    if !close(oracle.revenue_f64(), 7.0) {
        failures.push(format!("oracle {}", oracle.revenue_f64()));
    }
    for kind in FormulationKind::ALL {
        match solve_options(toy5, &HybridOptions::pure(kind), &bigm, &sets) {
            Ok((v, _)) if (v - 7.0).abs() <= 1e-6 && close(v, oracle.revenue_f64()) => {}
            Ok((v, _)) => failures.push(format!("{kind}: {v}")),
            Err(e) => failures.push(format!("{kind}: {e}")),
        }
    }
    Verdict::new(&failures, start.elapsed(), Some(Duration::from_secs(5)), "12 kinds vs oracle revenue 7".into())
}

fn criteria3and4(pool: &[ProblemInstance], monotone: &mut Vec<String>) -> (Verdict, Verdict) {
    let start = Instant::now();
    let mut failures3 = Vec::new();
    let mut failures4 = Vec::new();
    let mut checked = 0;
    for inst in pool {
        for (k, c) in inst.commodities.iter().enumerate() {
            let e = enumerate_paths(&inst.network, c, UNBOUNDED);
            if !nondecreasing(&e.paths) {
                monotone.push(format!("{} k={k}", inst.label));
            }
            let set = BilevelFeasibleSet::from_enumeration(k, &e);
            let mut dfs = common::all_simple_paths(&inst.network, c);
            dfs.sort_by(|a, b| a.base_cost.cmp(&b.base_cost).then_with(|| a.arcs.cmp(&b.arcs)));
            let from_dfs = dominance_filter(&dfs).unwrap();
            let ours = common::arc_sequences(&set.paths);
            if !set.exhaustive || ours != common::arc_sequences(&from_dfs) {
                failures3.push(format!("{} k={k}: enumeration and DFS disagree", inst.label));
            }
            if ours != common::arc_sequences(&common::dominance_reference(&dfs)) {
                failures3.push(format!("{} k={k}: reference dominance disagrees", inst.label));
            }
            for p in &set.paths {
                checked += 1;
                if !is_bilevel_feasible(&inst.network, c, p) {
                    failures4.push(format!("{} k={k}: {:?}", inst.label, p.arcs));
                }
            }
        }
    }
    let elapsed = start.elapsed();
    (
        Verdict::new(&failures3, elapsed, Some(Duration::from_secs(60)), format!("{} random digraphs", pool.len())),
        Verdict::new(&failures4, elapsed, None, format!("{checked} paths witnessed")),
    )
}

fn criterion5(prepared: &[Prepared], elapsed_setup: Duration) -> Verdict {
    let start = Instant::now();
    let mut failures = Vec::new();
    for p in prepared {
        let want = p.oracle.revenue_f64();
        for kind in FormulationKind::ALL {
            match solve_options(&p.inst, &HybridOptions::pure(kind), &p.bigm, &p.sets) {
                Ok((v, _)) if close(v, want) => {}
                Ok((v, _)) => failures.push(format!("{} {kind}: {v} vs oracle {want}", p.inst.label)),
                Err(e) => failures.push(format!("{} {kind}: {e}", p.inst.label)),
            }
        }
    }
    let summary = format!("{} instances x 12 kinds", prepared.len());
    Verdict::new(&failures, start.elapsed() + elapsed_setup, Some(Duration::from_secs(600)), summary)
}

/// Unreduced CS1 and VFCS1 models run for minutes (VFCS1 needs over a
/// hundred cut rounds) with the built-in backend; the toy5 integration
/// test covers them unreduced.
const UNREDUCED_TOO_SLOW: [FormulationKind; 2] = [FormulationKind::Cs1, FormulationKind::Vfcs1];

fn criterion6(prepared: &[Prepared]) -> Verdict {
    let start = Instant::now();
    let mut failures = Vec::new();
    let kinds: Vec<FormulationKind> =
        FormulationKind::ALL.into_iter().filter(|k| !UNREDUCED_TOO_SLOW.contains(k)).collect();
    for p in prepared {
        for &kind in &kinds {
            let mut results = Vec::new();
            for preprocess in [true, false] {
                let mut options = HybridOptions::pure(kind);
                options.preprocess = preprocess;
                results.push(solve_options(&p.inst, &options, &p.bigm, &p.sets));
            }
            match (&results[0], &results[1]) {
                (Ok((a, _)), Ok((b, _))) if close(*a, *b) => {}
                (a, b) => failures.push(format!(
                    "{} {kind}: reduced {:?} unreduced {:?}",
                    p.inst.label,
                    a.as_ref().map(|r| r.0),
                    b.as_ref().map(|r| r.0)
                )),
            }
        }
        for (k, c) in p.inst.commodities.iter().enumerate() {
            let reduced = path_based_reduce(&p.inst.network, c, &p.sets[k]).unwrap();
            let spgm = spgm_transform(&p.inst.network, c);
            let (a, b) = (reduced.network.tolled_count(), spgm.network.tolled_count());
            if a > b {
                failures.push(format!("{} k={k}: {a} tolled arcs after reduce, {b} after SPGM", p.inst.label));
            }
        }
    }
    let summary = format!(
        "{} kinds reduced vs unreduced ({} and {} excluded), tolled arc counts",
        kinds.len(),
        UNREDUCED_TOO_SLOW[0],
        UNREDUCED_TOO_SLOW[1]
    );
    Verdict::new(&failures, start.elapsed(), None, summary)
}

fn criterion7(prepared: &[Prepared], monotone: &[String]) -> Verdict {
    let start = Instant::now();
    let mut failures: Vec<String> = monotone.iter().map(|m| format!("cost order broken: {m}")).collect();
    let std = FormulationKind::Std;
    for p in prepared {
        let short = enumerate_all(&p.inst.network, &p.inst.commodities, 2);
        let bigm_short = compute_bigm(&p.inst.network, &p.inst.commodities, &short).unwrap();
        let one = solve_options(&p.inst, &HybridOptions::new(1, std, std), &bigm_short, &short);
        let all = solve_options(&p.inst, &HybridOptions::new(UNBOUNDED, std, std), &p.bigm, &p.sets);
        match (one, all) {
            (Ok((a, _)), Ok((b, _))) if (a - b).abs() <= 1e-6 => {}
            (a, b) => failures.push(format!(
                "{}: N=1 {:?} N=inf {:?}",
                p.inst.label,
                a.map(|r| r.0),
                b.map(|r| r.0)
            )),
        }
    }
    Verdict::new(&failures, start.elapsed(), None, "STD/STD at N=1 vs N=inf, emission order".into())
}

fn criterion8(prepared: &[Prepared]) -> Verdict {
    let start = Instant::now();
    let mut failures = Vec::new();
    for p in prepared {
        for arc in p.inst.network.tolled_arcs() {
            if p.oracle.tolls[arc.id] > p.bigm.n(arc.id).to_rational() {
                failures.push(format!("{} arc {}: toll above N", p.inst.label, arc.id));
            }
        }
        let doubled = p.bigm.scaled(2);
        let want = p.oracle.revenue_f64();
        for kind in FormulationKind::ALL {
            match solve_options(&p.inst, &HybridOptions::pure(kind), &doubled, &p.sets) {
                Ok((v, _)) if close(v, want) => {}
                Ok((v, _)) => failures.push(format!("{} {kind} doubled: {v} vs {want}", p.inst.label)),
                Err(e) => failures.push(format!("{} {kind} doubled: {e}", p.inst.label)),
            }
        }
    }
    Verdict::new(&failures, start.elapsed(), None, "T* <= N and doubled big-Ms for 12 kinds".into())
}

fn criterion9(prepared: &[Prepared]) -> Verdict {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut max_rounds = 0;
    for p in prepared {
        for kind in [FormulationKind::Vfcs1, FormulationKind::Vfcs2] {
            let options = HybridOptions::pure(kind);
            assert!(options.preprocess && options.cut_loop);
            match solve_options(&p.inst, &options, &p.bigm, &p.sets) {
                Ok((v, out)) if close(v, p.oracle.revenue_f64()) && out.rounds <= DEFAULT_MAX_ROUNDS => {
                    max_rounds = max_rounds.max(out.rounds);
                }
                Ok((v, out)) => failures.push(format!("{} {kind}: {v} in {} rounds", p.inst.label, out.rounds)),
                Err(e) => failures.push(format!("{} {kind}: {e}", p.inst.label)),
            }
        }
    }
    Verdict::new(&failures, start.elapsed(), None, format!("most rounds used {max_rounds}"))
}

fn criterion10() -> Verdict {
    let start = Instant::now();
    let mut failures = Vec::new();
    let (mut arcs, mut fraction) = (0.0, 0.0);
    let count = 30;
    for seed in 0..count {
        let commodities = 30 + (seed as usize * 7) % 21;
        let config = GenConfig::new(Topology::Grid { rows: 5, cols: 12 }, commodities, seed);
        match generate(&config) {
            Ok(inst) => {
                let m = inst.network.arc_count() as f64;
                arcs += m;
                fraction += inst.network.tolled_count() as f64 / m;
            }
            Err(e) => failures.push(format!("seed {seed}: {e}")),
        }
    }
    let mean_arcs = arcs / count as f64;
    let mean_fraction = fraction / count as f64;
    if (mean_arcs - 206.0).abs() > 0.15 * 206.0 {
        failures.push(format!("mean arcs {mean_arcs}"));
    }
    if (mean_fraction - 0.20).abs() > 0.02 {
        failures.push(format!("tolled fraction {mean_fraction}"));
    }
    let summary = format!("mean |A| {mean_arcs:.1}, tolled fraction {:.2}%", 100.0 * mean_fraction);
    Verdict::new(&failures, start.elapsed(), None, summary)
}

fn main() {
    let toy5 = parse_instance(common::TOY5).unwrap();
    let mut monotone = Vec::new();
    let mut verdicts = vec![criterion1(&toy5, &mut monotone), criterion2(&toy5)];

    let random: Vec<ProblemInstance> = (0..100).map(common::random_instance).collect();
    let (v3, v4) = criteria3and4(&random, &mut monotone);
    verdicts.push(v3);
    verdicts.push(v4);

    let setup = Instant::now();
    let prepared: Vec<Prepared> = common::agreement_pool()
        .into_iter()
        .map(|inst| {
            let sets = enumerate_all(&inst.network, &inst.commodities, UNBOUNDED);
            for (k, s) in sets.iter().enumerate() {
                let e = enumerate_paths(&inst.network, &inst.commodities[k], UNBOUNDED);
                if !nondecreasing(&e.paths) {
                    monotone.push(format!("{} k={k}", inst.label));
                }
                assert!(s.exhaustive);
            }
            let bigm = compute_bigm(&inst.network, &inst.commodities, &sets).unwrap();
            // oracle on independently built sets
            let oracle = oracle_solve(&inst, &common::reference_bfsets(&inst), DEFAULT_ORACLE_CAP).unwrap();
            Prepared { inst, sets, bigm, oracle }
        })
        .collect();
    verdicts.push(criterion5(&prepared, setup.elapsed()));
    verdicts.push(criterion6(&prepared));
    verdicts.push(criterion7(&prepared, &monotone));
    verdicts.push(criterion8(&prepared));
    verdicts.push(criterion9(&prepared));
    verdicts.push(criterion10());

    for (i, v) in verdicts.iter().enumerate() {
        println!("criterion {}: {} {}", i + 1, if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }
    let failed: Vec<usize> = verdicts.iter().enumerate().filter(|(_, v)| !v.pass).map(|(i, _)| i + 1).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
