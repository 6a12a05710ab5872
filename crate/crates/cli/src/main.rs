use std::fs;
use std::io::Write;
use std::path::{Path as FsPath, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use npp_core::bigm::compute_bigm;
use npp_core::cuts::{solve_with_vfcs_cuts, DEFAULT_MAX_ROUNDS};
use npp_core::enumeration::{dominance_filter, enumerate_all, enumerate_paths, UNBOUNDED};
use npp_core::experiment::{
    breakpoint_label, parse_breakpoint, run_sweep, summarize, write_csv, write_summary_csv, SweepConfig,
};
use npp_core::formulation::{assemble_hybrid, FormulationKind, HybridOptions};
use npp_core::generator::{generate, GenConfig, Topology};
use npp_core::network::{parse_instance, validate_instance, ProblemInstance};
use npp_core::preprocess::{path_based_reduce, spgm_transform, GraphSize};
use npp_core::solver::lp::{read_lp, write_lp};
use npp_core::solver::{
    format_solution, oracle_solve, solve, BuiltinBackend, ExternalBackend, MilpBackend, DEFAULT_ORACLE_CAP,
};

#[derive(Parser)]
#[command(name = "npp", version, about = "Network pricing problem toolkit")]
struct Cli {
    /// TOML configuration; `solver.cmd` selects an external MILP solver.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the paths enumerated for one commodity as `cost<TAB>nodes`.
    Enumerate {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value_t = 0)]
        commodity: usize,
        /// Maximum number of emitted paths, or `inf`.
        #[arg(long, default_value = "inf", value_parser = breakpoint_arg)]
        cap: usize,
        /// Print only the paths that survive dominance filtering.
        #[arg(long)]
        filter: bool,
    },
    /// Shrink every commodity's graph and print its size.
    Reduce {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, value_enum)]
        method: Method,
        /// Print a table of counts before and after instead of the kept arcs.
        #[arg(long)]
        report: bool,
    },
    /// Write the MILP of a (hybrid) formulation in LP format.
    Build {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build and solve a formulation, running the cut loop where needed.
    Solve {
        #[command(flatten)]
        model: ModelArgs,
        /// Seconds.
        #[arg(long, default_value_t = 60.0)]
        budget: f64,
        /// Also write the solution file here.
        #[arg(long)]
        solution: Option<PathBuf>,
    },
    /// Exact optimum by enumerating path assignments.
    Oracle {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value_t = DEFAULT_ORACLE_CAP)]
        cap: u128,
    },
    /// Generate a random instance.
    Generate {
        /// `grid:RxC`, `delaunay:N` or `voronoi:N`.
        #[arg(long)]
        topology: Topology,
        #[arg(long)]
        commodities: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        toll_ratio: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every (instance, kind, breakpoint) combination and write a CSV.
    Sweep {
        /// Directory of `.npp` files.
        #[arg(long)]
        instances: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "STD")]
        kinds: Vec<FormulationKind>,
        #[arg(long, value_delimiter = ',', default_value = "1", value_parser = breakpoint_arg)]
        breakpoints: Vec<usize>,
        /// Seconds per run, enumeration included.
        #[arg(long, default_value_t = 60.0)]
        budget: f64,
        #[arg(long, default_value = "STD")]
        fallback: FormulationKind,
        /// Worker threads (0 = one per core).
        #[arg(long, default_value_t = 0)]
        workers: usize,
        /// Perturb arc costs with this seed before running.
        #[arg(long)]
        perturb_seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Per (kind, N) summary CSV.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Solve an LP file with the built-in backend and write a solution file.
    /// Matches the external solver protocol, so it can stand in for one.
    SolveLp {
        lp: PathBuf,
        sol: PathBuf,
        #[arg(long, default_value_t = 60.0)]
        budget: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Paths,
    Spgm,
}

#[derive(clap::Args)]
struct ModelArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Main formulation kind.
    #[arg(long, alias = "main", default_value = "STD")]
    kind: FormulationKind,
    /// Commodities with more bilevel-feasible paths than this use the
    /// fallback; `inf` builds a pure model.
    #[arg(long, default_value = "inf", value_parser = breakpoint_arg)]
    breakpoint: usize,
    #[arg(long, default_value = "STD")]
    fallback: FormulationKind,
    /// Skip path-based reduction of main blocks.
    #[arg(long)]
    no_preprocess: bool,
}

#[derive(Deserialize, Default)]
struct Config {
    #[serde(default)]
    solver: SolverConfig,
}

#[derive(Deserialize, Default)]
struct SolverConfig {
    /// Command template with `{lp}`, `{sol}` and `{budget}` placeholders.
    cmd: Option<String>,
    node_limit: Option<u64>,
}

fn breakpoint_arg(s: &str) -> Result<usize, String> {
    parse_breakpoint(s).ok_or_else(|| format!("expected a non-negative integer or `inf`, got `{s}`"))
}

fn seconds(s: f64) -> Result<Duration> {
    Duration::try_from_secs_f64(s).with_context(|| format!("invalid budget {s}"))
}

fn load_config(path: Option<&FsPath>) -> Result<Config> {
    let Some(path) = path else { return Ok(Config::default()) };
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn backend(config: &Config) -> Box<dyn MilpBackend> {
    match &config.solver.cmd {
        Some(cmd) => Box::new(ExternalBackend::new(cmd.clone())),
        None => Box::new(BuiltinBackend {
            node_limit: config.solver.node_limit,
        }),
    }
}

fn load_instance(path: &FsPath) -> Result<ProblemInstance> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut inst = parse_instance(&text).with_context(|| format!("parsing {}", path.display()))?;
    if inst.label.is_empty() {
        inst.label = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    }
    for d in validate_instance(&inst) {
        log::warn!("{}: {d}", path.display());
    }
    Ok(inst)
}

fn hybrid_options(args: &ModelArgs) -> HybridOptions {
    let mut options = HybridOptions::new(args.breakpoint, args.kind, args.fallback);
    options.preprocess = !args.no_preprocess;
    options
}

fn enumerate_cmd(instance: &FsPath, k: usize, cap: usize, filter: bool) -> Result<()> {
    let inst = load_instance(instance)?;
    let Some(c) = inst.commodities.get(k) else {
        bail!("commodity {k} does not exist ({} commodities)", inst.commodities.len());
    };
    let e = enumerate_paths(&inst.network, c, cap);
    let paths = if filter { dominance_filter(&e.paths)? } else { e.paths };
    let mut out = std::io::stdout().lock();
    for p in &paths {
        let nodes: Vec<String> = p.nodes(&inst.network).iter().map(|n| n.to_string()).collect();
        writeln!(out, "{}\t{}", p.base_cost, nodes.join(","))?;
    }
    Ok(())
}

fn reduce_cmd(instance: &FsPath, method: Method, report: bool) -> Result<()> {
    let inst = load_instance(instance)?;
    let sets = enumerate_all(&inst.network, &inst.commodities, UNBOUNDED);
    let before = GraphSize::of(&inst.network);
    let mut out = std::io::stdout().lock();
    if report {
        writeln!(out, "commodity\tnodes\tarcs\ttolled\tnodes_after\tarcs_after\ttolled_after")?;
    }
    for (k, c) in inst.commodities.iter().enumerate() {
        let reduced = match method {
            Method::Paths => path_based_reduce(&inst.network, c, &sets[k])?,
            Method::Spgm => spgm_transform(&inst.network, c),
        };
        let after = GraphSize::of(&reduced.network);
        if report {
            writeln!(
                out,
                "{k}\t{}\t{}\t{}\t{}\t{}\t{}",
                before.nodes, before.arcs, before.tolled, after.nodes, after.arcs, after.tolled
            )?;
        } else {
            writeln!(out, "commodity {k}: {} nodes, {} arcs ({} tolled)", after.nodes, after.arcs, after.tolled)?;
            for (a, arc) in reduced.network.arcs().iter().enumerate() {
                let origin: Vec<String> = reduced.arc_origin[a].iter().map(|x| x.to_string()).collect();
                writeln!(
                    out,
                    "  {} -> {}\t{}\t{}\t[{}]",
                    reduced.node_origin[arc.tail],
                    reduced.node_origin[arc.head],
                    arc.cost,
                    if arc.tolled { "T" } else { "F" },
                    origin.join(",")
                )?;
            }
        }
    }
    Ok(())
}

fn assemble(args: &ModelArgs) -> Result<(ProblemInstance, npp_core::formulation::HybridModel, npp_core::bigm::BigMParams)> {
    let inst = load_instance(&args.instance)?;
    let sets = enumerate_all(&inst.network, &inst.commodities, args.breakpoint.saturating_add(1));
    let bigm = compute_bigm(&inst.network, &inst.commodities, &sets)?;
    let hybrid = assemble_hybrid(&inst, &hybrid_options(args), &bigm, &sets)?;
    Ok((inst, hybrid, bigm))
}

fn build_cmd(args: &ModelArgs, out: &FsPath) -> Result<()> {
    let (_, hybrid, _) = assemble(args)?;
    fs::write(out, write_lp(&hybrid.model)?).with_context(|| format!("writing {}", out.display()))?;
    eprintln!(
        "{} variables, {} constraints, assignments {:?}",
        hybrid.model.variables().len(),
        hybrid.model.constraints().len(),
        hybrid.assignments
    );
    Ok(())
}

fn solve_cmd(args: &ModelArgs, budget: f64, solution: Option<&FsPath>, config: &Config) -> Result<()> {
    let (inst, mut hybrid, bigm) = assemble(args)?;
    let backend = backend(config);
    let out = solve_with_vfcs_cuts(&mut hybrid, &bigm, seconds(budget)?, backend.as_ref(), DEFAULT_MAX_ROUNDS)?;
    let r = &out.result;
    println!("status {}", r.status);
    match r.objective {
        Some(v) => println!("objective {v}"),
        None => println!("objective none"),
    }
    println!("gap_pct {}", r.gap * 100.0);
    println!("rounds {} (path cuts {}, cycle cuts {}, converged {})", out.rounds, out.path_cuts, out.cycle_cuts, out.converged);
    if r.has_incumbent() {
        for arc in inst.network.tolled_arcs() {
            let name = npp_core::formulation::var_t_toll(arc.id);
            println!("{name} {}", r.value(&name).unwrap_or(0.0));
        }
    }
    if let Some(path) = solution {
        fs::write(path, format_solution(r)).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn oracle_cmd(instance: &FsPath, cap: u128) -> Result<()> {
    let inst = load_instance(instance)?;
    let sets = enumerate_all(&inst.network, &inst.commodities, UNBOUNDED);
    let r = oracle_solve(&inst, &sets, cap)?;
    println!("revenue {}", r.revenue);
    println!("lps {}", r.lps_solved);
    for arc in inst.network.tolled_arcs() {
        println!("T[{}] {}", arc.id, r.tolls[arc.id]);
    }
    for (k, &i) in r.choice.iter().enumerate() {
        let nodes: Vec<String> = sets[k].paths[i].nodes(&inst.network).iter().map(|n| n.to_string()).collect();
        println!("commodity {k}: {}", nodes.join(","));
    }
    Ok(())
}

fn generate_cmd(topology: Topology, commodities: usize, seed: u64, toll_ratio: Option<f64>, out: &FsPath) -> Result<()> {
    let mut config = GenConfig::new(topology, commodities, seed);
    if let Some(r) = toll_ratio {
        config.toll_ratio = r;
    }
    let inst = generate(&config)?;
    fs::write(out, inst.to_text()).with_context(|| format!("writing {}", out.display()))?;
    eprintln!(
        "{}: {} nodes, {} arcs, {} tolled, {} commodities",
        inst.label,
        inst.network.node_count(),
        inst.network.arc_count(),
        inst.network.tolled_count(),
        inst.commodities.len()
    );
    Ok(())
}

fn instance_files(dir: &FsPath) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "npp"))
        .collect();
    files.sort();
    if files.is_empty() {
        bail!("no .npp files in {}", dir.display());
    }
    Ok(files)
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let config = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Enumerate { instance, commodity, cap, filter } => enumerate_cmd(&instance, commodity, cap, filter),
        Command::Reduce { instance, method, report } => reduce_cmd(&instance, method, report),
        Command::Build { model, out } => build_cmd(&model, &out),
        Command::Solve { model, budget, solution } => solve_cmd(&model, budget, solution.as_deref(), &config),
        Command::Oracle { instance, cap } => oracle_cmd(&instance, cap),
        Command::Generate { topology, commodities, seed, toll_ratio, out } => {
            generate_cmd(topology, commodities, seed, toll_ratio, &out)
        }
        Command::Sweep {
            instances,
            kinds,
            breakpoints,
            budget,
            fallback,
            workers,
            perturb_seed,
            out,
            summary,
        } => {
            let instances = instance_files(&instances)?
                .iter()
                .map(|p| load_instance(p))
                .collect::<Result<Vec<_>>>()?;
            let mut sweep = SweepConfig::new(kinds, breakpoints, seconds(budget)?);
            sweep.fallback = fallback;
            sweep.workers = workers;
            sweep.perturb_seed = perturb_seed;
            let records = run_sweep(&instances, &sweep, backend(&config).as_ref());
            write_csv(&records, fs::File::create(&out).with_context(|| format!("creating {}", out.display()))?)?;
            let s = summarize(&records);
            if let Some(path) = summary {
                write_summary_csv(&s, fs::File::create(&path)?)?;
            }
            eprintln!("{} runs, {} easy instances, {} hard", records.len(), s.easy.len(), s.hard.len());
            for row in &s.rows {
                eprintln!(
                    "{} N={}: solved {}/{}",
                    row.kind,
                    breakpoint_label(row.breakpoint),
                    row.solved,
                    row.runs
                );
            }
            Ok(())
        }
        Command::SolveLp { lp, sol, budget } => {
            let text = fs::read_to_string(&lp).with_context(|| format!("reading {}", lp.display()))?;
            let model = read_lp(&text)?;
            let result = solve(&model, seconds(budget)?, &BuiltinBackend::default())?;
            fs::write(&sol, format_solution(&result)).with_context(|| format!("writing {}", sol.display()))?;
            Ok(())
        }
    }
}
