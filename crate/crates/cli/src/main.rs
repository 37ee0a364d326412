use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use galloc_core::choice::axioms::CheckLimits;
use galloc_core::genrand::{generate, make_appendix_instance, Family, GeneratorConfig};
use galloc_core::io::{instance_to_json, parse_assignment, parse_costs, parse_instance, solution_json};
use galloc_core::lattice::{
    build_full_route, route_from, stage1_find_stable, stage2_descend_to_xmin, xmin, xmin_ag_iteration, Monitor,
    Policy,
};
use galloc_core::market::CallCount;
use galloc_core::oracle::{enumerate_closed_functions, enumerate_stable, verify_lattice_properties, DEFAULT_LIMIT};
use galloc_core::poset::{
    build_poset_gapless, build_poset_general, gapless_status, min_cost_stable, omega, omega_inverse, GaplessStatus,
    PosetOptions, RotationPoset,
};
use galloc_core::rotation::{build_auxiliary, clean, max_feasible_weight, rotations};
use galloc_core::stability::check_stability;
use galloc_core::{Error, Instance, Market};

#[derive(Parser)]
#[command(name = "galloc", version, about = "Stable generalized allocations: solve, enumerate and optimize")]
struct Cli {
    /// Enumeration limit for brute-force checks (also GALLOC_LIMIT).
    #[arg(long, global = true)]
    limit: Option<u128>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the least or greatest stable assignment for the firms.
    Solve {
        instance: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Min)]
        mode: Mode,
        #[arg(long)]
        verify: bool,
    },
    /// Print a full route from the minimum to the maximum.
    Route {
        instance: PathBuf,
        #[arg(long, value_enum, default_value_t = PolicyArg::Smallest)]
        policy: PolicyArg,
        /// Seed for `--policy seeded`.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        verify: bool,
    },
    /// Print the rotations of a stable assignment with their weights.
    Rotations {
        instance: PathBuf,
        assignment: PathBuf,
        /// Emit the active graph in DOT.
        #[arg(long)]
        dot: bool,
    },
    /// Print the rotation poset.
    Poset {
        instance: PathBuf,
        /// Build the occurrence poset, without the gapless condition.
        #[arg(long)]
        general: bool,
        #[arg(long)]
        dot: bool,
        #[arg(long)]
        verify: bool,
        /// Accept firms whose gapless condition is too large to check.
        #[arg(long)]
        trust_gapless: bool,
    },
    /// Print a minimum-cost stable assignment.
    Mincost { instance: PathBuf, costs: PathBuf },
    /// Print the stability report of an assignment.
    Check { instance: PathBuf, assignment: PathBuf },
    /// Enumerate all stable assignments and check the lattice properties.
    Brute { instance: PathBuf },
    /// Generate an instance.
    Gen(GenArgs),
    /// Print oracle-call counts and timings per phase.
    Bench { instance: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Min,
    Max,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Smallest,
    Largest,
    Seeded,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 3)]
    workers: usize,
    #[arg(long, default_value_t = 3)]
    firms: usize,
    #[arg(long, default_value_t = 0.7)]
    density: f64,
    #[arg(long, default_value_t = 3)]
    max_capacity: u64,
    #[arg(long, default_value_t = 4)]
    max_quota: u64,
    /// linear, tableau, tableau-a3 or mixed.
    #[arg(long, default_value = "linear")]
    family: Family,
    /// Cap every capacity.
    #[arg(long)]
    b_cap: Option<u64>,
    #[arg(long)]
    opposed: bool,
    #[arg(long)]
    fixed_quota: bool,
    /// Write the alternating-tableau instance with this even quota instead.
    #[arg(long)]
    appendix: Option<u64>,
    #[arg(short = 'o', long)]
    output: Option<PathBuf>,
}

#[derive(Serialize)]
struct RunReport {
    command: &'static str,
    instance_digest: String,
    timings_us: Vec<(String, u128)>,
    oracle_calls: Vec<CallCount>,
    oracle_calls_total: u64,
    result: Value,
}

struct Run {
    command: &'static str,
    digest: String,
    timings: Vec<(String, u128)>,
    begun: Instant,
    started: Instant,
}

impl Run {
    fn lap(&mut self, phase: &str) {
        let now = Instant::now();
        self.timings.push((phase.to_string(), (now - self.started).as_micros()));
        self.started = now;
    }

    fn report(mut self, market: &Market, result: Value) -> RunReport {
        self.timings.push(("total".to_string(), self.begun.elapsed().as_micros()));
        let oracle_calls = market.calls_by_vertex();
        let total = oracle_calls.iter().map(|c| c.calls).sum();
        debug_assert_eq!(total, market.oracle_calls());
        RunReport {
            command: self.command,
            instance_digest: self.digest,
            timings_us: self.timings,
            oracle_calls,
            oracle_calls_total: total,
            result,
        }
    }
}

fn read(path: &Path) -> Result<String, Error> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn load(command: &'static str, path: &Path) -> Result<(Market, Run), Error> {
    let text = read(path)?;
    let now = Instant::now();
    let digest = Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect();
    let inst = parse_instance(&text)?;
    Ok((Market::new(inst), Run { command, digest, timings: Vec::new(), begun: now, started: Instant::now() }))
}

/// Accepts a bare edge map, `{"assignment": …}`, or a report whose result
/// holds one.
fn load_assignment(inst: &Instance, path: &Path) -> Result<galloc_core::Assignment, Error> {
    let text = read(path)?;
    let value: Value = serde_json::from_str(&text)?;
    match value.get("result") {
        Some(inner) => parse_assignment(inst, &inner.to_string()),
        None => parse_assignment(inst, &text),
    }
}

fn monitor_for(inst: &Instance) -> Result<Monitor, Error> {
    Ok(match gapless_status(inst, &CheckLimits::default())? {
        GaplessStatus::Holds => Monitor { gapless: true, proven: true },
        _ => Monitor::general(),
    })
}

/// Brute-force comparison; `None` when the box is too large.
fn verify<T>(
    market: &Market,
    limit: u128,
    check: impl FnOnce(&galloc_core::oracle::EnumeratedLattice) -> Result<T, Error>,
) -> Result<Value, Error> {
    let fresh = Market::new(market.instance().clone());
    match enumerate_stable(&fresh, limit) {
        Ok(lat) => {
            check(&lat)?;
            Ok(json!({ "checked": true, "stable_count": lat.len() }))
        }
        Err(Error::LimitExceeded { size, limit }) => {
            Ok(json!({ "checked": false, "reason": format!("box of {size} points exceeds {limit}") }))
        }
        Err(e) => Err(e),
    }
}

fn mismatch(what: impl Into<String>) -> Error {
    Error::Invariant(format!("brute-force check failed: {}", what.into()))
}

fn poset_matches(market: &Market, poset: &RotationPoset, lat: &galloc_core::oracle::EnumeratedLattice, limit: u128) -> Result<(), Error> {
    let closed = enumerate_closed_functions(poset, limit)?;
    if closed.len() != lat.len() {
        return Err(mismatch(format!("{} closed functions, {} stable assignments", closed.len(), lat.len())));
    }
    for xi in &closed {
        let x = omega_inverse(market, poset, xi)?;
        if lat.index_of(&x).is_none() || omega(market, poset, &x)? != *xi {
            return Err(mismatch(format!("closed function {:?}", xi.values)));
        }
    }
    Ok(())
}

enum Output {
    Json(Value),
    Text(String),
}

fn run(cli: Cli) -> Result<Output, Error> {
    let limit = cli
        .limit
        .or_else(|| std::env::var("GALLOC_LIMIT").ok().and_then(|v| v.trim().parse().ok()))
        .unwrap_or(DEFAULT_LIMIT);
    let report = |r: RunReport| -> Result<Output, Error> { Ok(Output::Json(serde_json::to_value(r)?)) };
    match cli.command {
        Command::Solve { instance, mode, verify: check } => {
            let (market, mut run) = load("solve", &instance)?;
            let inst = market.instance();
            let x = match mode {
                Mode::Min => xmin(&market)?,
                Mode::Max => build_full_route(&market, Policy::Smallest, &monitor_for(inst)?)?.end().clone(),
            };
            run.lap("solve");
            let mut result = solution_json(inst, &x, true);
            if check {
                result["verify"] = verify(&market, limit, |lat| {
                    let want = &lat.elements[match mode {
                        Mode::Min => lat.min,
                        Mode::Max => lat.max,
                    }];
                    if want == &x {
                        Ok(())
                    } else {
                        Err(mismatch(format!("brute force gives {want}")))
                    }
                })?;
                run.lap("verify");
            }
            report(run.report(&market, result))
        }
        Command::Route { instance, policy, seed, verify: check } => {
            let (market, mut run) = load("route", &instance)?;
            let policy = match policy {
                PolicyArg::Smallest => Policy::Smallest,
                PolicyArg::Largest => Policy::Largest,
                PolicyArg::Seeded => Policy::Seeded(seed),
            };
            let inst = market.instance();
            let route = route_from(&market, xmin(&market)?, policy, &monitor_for(inst)?)?;
            run.lap("route");
            let mut result = route.to_json(inst);
            if check {
                result["verify"] = verify(&market, limit, |lat| {
                    if route.start == lat.elements[lat.min] && route.end() == &lat.elements[lat.max] {
                        Ok(())
                    } else {
                        Err(mismatch("route endpoints differ from the lattice extremes"))
                    }
                })?;
                run.lap("verify");
            }
            report(run.report(&market, result))
        }
        Command::Rotations { instance, assignment, dot } => {
            let (market, mut run) = load("rotations", &instance)?;
            let inst = market.instance();
            let x = load_assignment(inst, &assignment)?;
            if dot {
                return Ok(Output::Text(clean(inst, &build_auxiliary(&market, &x)?)?.to_dot(inst)));
            }
            let list = rotations(&market, &x)?
                .iter()
                .map(|r| {
                    let w = max_feasible_weight(&market, &x, r)?;
                    Ok(json!({
                        "rotation": r.label(inst),
                        "plus": inst.edge_names(&r.plus_edges()),
                        "minus": inst.edge_names(&r.minus_edges()),
                        "tau": w.tau,
                    }))
                })
                .collect::<Result<Vec<_>, Error>>()?;
            run.lap("rotations");
            report(run.report(&market, json!({ "rotations": list })))
        }
        Command::Poset { instance, general, dot, verify: check, trust_gapless } => {
            let (market, mut run) = load("poset", &instance)?;
            let opts = PosetOptions { trust_gapless, ..PosetOptions::default() };
            let poset = if general { build_poset_general(&market, &opts)? } else { build_poset_gapless(&market, &opts)? };
            run.lap("poset");
            let inst = market.instance();
            if dot {
                return Ok(Output::Text(poset.to_dot(inst)));
            }
            let mut result = poset.to_json(inst);
            if check {
                result["verify"] = verify(&market, limit, |lat| poset_matches(&market, &poset, lat, limit))?;
                run.lap("verify");
            }
            report(run.report(&market, result))
        }
        Command::Mincost { instance, costs } => {
            let (market, mut run) = load("mincost", &instance)?;
            let inst = market.instance();
            let costs = parse_costs(inst, &read(&costs)?)?;
            let poset = build_poset_gapless(&market, &PosetOptions::default())?;
            run.lap("poset");
            let best = min_cost_stable(&market, &poset, &costs)?;
            run.lap("mincost");
            let mut result = solution_json(inst, &best.x, true);
            result["cost"] = json!(best.cost.to_string());
            result["ideal"] = json!(best.ideal.iter().map(|&i| poset.element_label(inst, i)).collect::<Vec<_>>());
            report(run.report(&market, result))
        }
        Command::Check { instance, assignment } => {
            let (market, mut run) = load("check", &instance)?;
            let x = load_assignment(market.instance(), &assignment)?;
            let result = check_stability(&market, &x)?.to_json(market.instance());
            run.lap("check");
            report(run.report(&market, result))
        }
        Command::Brute { instance } => {
            let (market, mut run) = load("brute", &instance)?;
            let inst = market.instance();
            let lat = enumerate_stable(&market, limit)?;
            run.lap("enumerate");
            let props = verify_lattice_properties(&market, &lat)?;
            run.lap("properties");
            let result = json!({
                "stable_count": lat.len(),
                "xmin": inst.assignment_json(&lat.elements[lat.min]),
                "xmax": inst.assignment_json(&lat.elements[lat.max]),
                "properties": props,
            });
            report(run.report(&market, result))
        }
        Command::Gen(args) => {
            let inst = match args.appendix {
                Some(q) => make_appendix_instance(q)?,
                None => generate(&GeneratorConfig {
                    seed: args.seed,
                    workers: args.workers,
                    firms: args.firms,
                    density: args.density,
                    max_capacity: args.max_capacity,
                    max_quota: args.max_quota,
                    family: args.family,
                    b_cap_for_gapless: args.b_cap,
                    opposed: args.opposed,
                    fixed_quota: args.fixed_quota,
                })?,
            };
            let text = instance_to_json(&inst);
            match args.output {
                Some(path) => {
                    std::fs::write(&path, text + "\n")?;
                    Ok(Output::Json(json!({ "written": path.display().to_string() })))
                }
                None => Ok(Output::Text(text + "\n")),
            }
        }
        Command::Bench { instance } => {
            let (market, mut run) = load("bench", &instance)?;
            let inst = market.instance().clone();
            let mut phases = Vec::new();
            let mut phase = |name: &str, f: &dyn Fn(&Market) -> Result<Value, Error>| -> Result<(), Error> {
                let fresh = Market::new(inst.clone());
                let t = Instant::now();
                let detail = f(&fresh)?;
                phases.push(json!({
                    "phase": name,
                    "oracle_calls": fresh.oracle_calls(),
                    "firm_oracle_calls": fresh.firm_oracle_calls(),
                    "time_us": t.elapsed().as_micros() as u64,
                    "detail": detail,
                }));
                Ok(())
            };
            phase("iteration", &|m| Ok(json!({ "bound_updates": xmin_ag_iteration(m)?.iterations })))?;
            phase("stage1+stage2", &|m| {
                let s1 = stage1_find_stable(m)?;
                let s2 = stage2_descend_to_xmin(m, &s1.x)?;
                Ok(json!({ "stage1_steps": s1.iterations, "stage2_steps": s2.iterations }))
            })?;
            phase("full route", &|m| {
                Ok(json!({ "length": build_full_route(m, Policy::Smallest, &monitor_for(m.instance())?)?.len() }))
            })?;
            let gapless = matches!(gapless_status(&inst, &CheckLimits::default())?, GaplessStatus::Holds);
            phase(if gapless { "poset" } else { "general poset" }, &|m| {
                let opts = PosetOptions::default();
                let p = if gapless { build_poset_gapless(m, &opts)? } else { build_poset_general(m, &opts)? };
                Ok(json!({ "elements": p.len(), "hasse_edges": p.hasse_edges.len() }))
            })?;
            run.lap("bench");
            report(run.report(&market, json!({ "phases": phases })))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(out) => {
            let text = match out {
                Output::Json(v) => serde_json::to_string_pretty(&v).expect("json values serialize") + "\n",
                Output::Text(t) => t,
            };
            // a closed pipe is not an error
            let _ = std::io::stdout().lock().write_all(text.as_bytes());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("galloc: {e}");
            ExitCode::from(if e.is_internal() { 2 } else { 1 })
        }
    }
}
