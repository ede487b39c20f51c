use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use pivotlab::constructions::recognize_canonical;
use pivotlab::engine::{default_max_iters, run as run_pi, PivotRuleSpec, Trace};
use pivotlab::io::mdp_to_json;
use pivotlab::lp::{basis_of_policy, build_flux_lp, compare, export_lp, simplex_run, ExportMode};
use pivotlab::mdp::{solve_values, value_sum};
use pivotlab::rational::{self, ratio};
use pivotlab::verify::{all_passed, verify_suite, SuiteConfig};
use serde_json::json;

use crate::instance::{Family, Instance, InstanceArgs, Order};
use crate::CliError;

/// Writes next to `path` and renames, so readers never see a partial file.
fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    fs::write(&tmp, contents).map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

/// `sched:<file>` reads the schedule from a file when one exists at that path.
pub fn parse_rule(text: &str) -> Result<PivotRuleSpec, CliError> {
    if let Some(rest) = text.strip_prefix("sched:") {
        let path = Path::new(rest);
        if path.is_file() {
            let body = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            return Ok(PivotRuleSpec::parse_schedule(&body)?);
        }
    }
    Ok(text.parse()?)
}

fn iteration_cap(family: Family, n: u32, given: Option<usize>) -> usize {
    given.unwrap_or(match family {
        Family::B => default_max_iters(n),
        Family::D => 4 * default_max_iters(n),
    })
}

pub fn gen(args: &InstanceArgs, out: &Path, gadget_map: Option<&Path>) -> Result<u8, CliError> {
    let inst = Instance::build(args)?;
    write_atomic(out, &mdp_to_json(inst.mdp()))?;
    let mut summary = json!({
        "family": args.family.to_string(),
        "n": args.n,
        "vertices": inst.mdp().num_vertices(),
        "edges": inst.mdp().num_edges(),
        "agent_edges": inst.mdp().agent_edges().count(),
        "out": out.display().to_string(),
    });
    if let Instance::D(d) = &inst {
        let path = gadget_map.map(Path::to_path_buf).unwrap_or_else(|| {
            let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            out.with_file_name(format!("{stem}.gadgets.json"))
        });
        write_atomic(&path, &d.gadget_map().to_json(d.base()))?;
        summary["gadget_map"] = json!(path.display().to_string());
    }
    println!("{summary}");
    Ok(0)
}

fn canonical_visited(inst: &Instance, trace: &Trace) -> usize {
    let seen: BTreeSet<u64> = inst
        .base_policies(trace)
        .iter()
        .filter_map(|p| recognize_canonical(inst.base(), p))
        .collect();
    seen.len()
}

pub fn run(args: &InstanceArgs, rule: &str, max_iters: Option<usize>, out: Option<&Path>) -> Result<u8, CliError> {
    let spec = parse_rule(rule)?;
    let inst = Instance::build(args)?;
    let cap = iteration_cap(args.family, args.n, max_iters);
    let trace = run_pi(inst.mdp(), &inst.start()?, &spec, cap)?;
    if let Some(path) = out {
        write_atomic(path, &trace.to_jsonl(inst.mdp(), |e| inst.mdp().edge_label(e)))?;
    }
    let summary = json!({
        "config": {
            "family": args.family.to_string(),
            "n": args.n,
            "rule": spec.to_string(),
            "max_iters": cap,
            "p_override": args.p_override.as_ref().map(|p| p.display().to_string()),
            "prepend": if args.prepend == Order::Asc { "asc" } else { "desc" },
        },
        "total_switches": trace.total_switches(),
        "ties_seen": trace.ties_seen(),
        "terminal_optimal": trace.terminal == inst.optimum()?,
        "terminal_value_sum": rational::format(&value_sum(inst.mdp(), &trace.terminal_values)),
        "canonical_policies_visited": canonical_visited(&inst, &trace),
    });
    println!("{summary}");
    Ok(0)
}

pub struct SweepPlan {
    pub families: Vec<Family>,
    pub rules: Vec<String>,
    pub n_min: u32,
    pub n_max: u32,
    pub seeds: Vec<u64>,
    pub max_iters: Option<usize>,
    pub csv: PathBuf,
}

pub const SWEEP_COLUMNS: [&str; 9] =
    ["family", "n", "rule", "seed", "total_switches", "runtime_ms", "ties_seen", "doubling_ratio", "status"];

/// Expands `mix` over the seeds; returns (spec, seed column).
fn expand_rules(rules: &[String], seeds: &[u64]) -> Result<Vec<(PivotRuleSpec, Option<u64>)>, CliError> {
    if rules.iter().all(|r| r.trim().is_empty()) {
        return Err(CliError::Usage("--rules needs at least one rule".into()));
    }
    let mut out = Vec::new();
    for r in rules {
        let r = r.trim();
        if r.is_empty() {
            return Err(CliError::Usage("empty entry in --rules".into()));
        }
        if r == "mix" {
            if seeds.is_empty() {
                return Err(CliError::Usage("mix needs --seeds".into()));
            }
            out.extend(seeds.iter().map(|&s| (PivotRuleSpec::seeded(s), Some(s))));
            continue;
        }
        let spec = parse_rule(r)?;
        let seed = r.strip_prefix("mix:").and_then(|s| s.parse().ok());
        out.push((spec, seed));
    }
    Ok(out)
}

pub fn sweep(plan: &SweepPlan) -> Result<u8, CliError> {
    if plan.families.is_empty() {
        return Err(CliError::Usage("--families needs at least one family".into()));
    }
    if plan.n_min == 0 || plan.n_min > plan.n_max {
        return Err(CliError::Usage(format!("empty n range {}..={}", plan.n_min, plan.n_max)));
    }
    let rules = expand_rules(&plan.rules, &plan.seeds)?;
    let file = fs::File::create(&plan.csv).map_err(|e| CliError::io(&plan.csv, e))?;
    let mut w = csv::Writer::from_writer(file);
    let csv_err = |e: csv::Error| CliError::Io(format!("{}: {e}", plan.csv.display()));
    w.write_record(SWEEP_COLUMNS).map_err(csv_err)?;
    w.flush().map_err(|e| CliError::io(&plan.csv, e))?;

    let (mut cells, mut failed) = (0, 0);
    for &family in &plan.families {
        for (spec, seed) in &rules {
            let mut previous: HashMap<u32, usize> = HashMap::new();
            for n in plan.n_min..=plan.n_max {
                let started = Instant::now();
                let outcome = Instance::new(family, n, None, Order::Asc).and_then(|inst| {
                    let cap = iteration_cap(family, n, plan.max_iters);
                    Ok(run_pi(inst.mdp(), &inst.start()?, spec, cap)?)
                });
                let ms = started.elapsed().as_millis().to_string();
                let seed = seed.map(|s| s.to_string()).unwrap_or_default();
                let row = match outcome {
                    Ok(trace) => {
                        let total = trace.total_switches();
                        previous.insert(n, total);
                        let doubling = match previous.get(&(n - 1)) {
                            Some(&prev) if prev > 0 => rational::format(&ratio(total as i64, prev as i64)),
                            _ => String::new(),
                        };
                        [family.to_string(), n.to_string(), spec.to_string(), seed, total.to_string(), ms,
                            trace.ties_seen().to_string(), doubling, "ok".into()]
                    }
                    Err(e) => {
                        failed += 1;
                        [family.to_string(), n.to_string(), spec.to_string(), seed, String::new(), ms,
                            String::new(), String::new(), format!("error: {e}")]
                    }
                };
                cells += 1;
                w.write_record(&row).map_err(csv_err)?;
                w.flush().map_err(|e| CliError::io(&plan.csv, e))?;
            }
        }
    }
    println!("sweep: {cells} cells, {failed} failed, written to {}", plan.csv.display());
    Ok(if failed == 0 { 0 } else { 3 })
}

pub fn verify(n_max: u32, d_max: Option<u32>, li_max: Option<u32>, samples: usize, seed: u64) -> Result<u8, CliError> {
    let mut cfg = SuiteConfig::new(n_max);
    if let Some(d) = d_max {
        cfg.d_max = d;
    }
    if let Some(l) = li_max {
        cfg.li_max = l;
    }
    cfg.twin_samples = samples;
    cfg.triple_samples = samples.div_ceil(4);
    cfg.seed = seed;
    let reports = verify_suite(&cfg)?;
    for r in &reports {
        println!("{r}");
    }
    let passed = reports.iter().filter(|r| r.passed).count();
    println!("verify: {passed}/{} properties passed", reports.len());
    Ok(if all_passed(&reports) { 0 } else { 2 })
}

pub fn lp_export(args: &InstanceArgs, exact: bool, out: &Path) -> Result<u8, CliError> {
    let inst = Instance::build(args)?;
    let flux = build_flux_lp(inst.mdp())?;
    let mode = if exact { ExportMode::ExactJson } else { ExportMode::LossyText };
    write_atomic(out, &export_lp(&flux.lp, mode))?;
    println!("{}", json!({ "vars": flux.lp.num_vars(), "rows": flux.lp.num_rows(), "out": out.display().to_string() }));
    Ok(0)
}

pub fn lp_run(
    args: &InstanceArgs,
    rule: &str,
    from_optimum: bool,
    max_pivots: Option<usize>,
    out: Option<&Path>,
) -> Result<u8, CliError> {
    let spec = parse_rule(rule)?;
    let inst = Instance::build(args)?;
    let flux = build_flux_lp(inst.mdp())?;
    let start = if from_optimum { inst.optimum()? } else { inst.start()? };
    let basis = basis_of_policy(&flux, inst.mdp(), &start)?;
    let trace = simplex_run(&flux.lp, &basis, &spec, iteration_cap(args.family, args.n, max_pivots))?;
    if let Some(path) = out {
        let mut text = String::new();
        for p in &trace.pivots {
            let line = json!({
                "pivot": p.pivot,
                "entering": flux.lp.var_names[p.entering],
                "leaving": flux.lp.var_names[p.leaving],
                "reduced_cost": rational::format(&p.reduced_cost),
                "objective_after": rational::format(&p.objective_after),
                "ties": p.ties,
                "rule": p.rule.to_string(),
            });
            text.push_str(&line.to_string());
            text.push('\n');
        }
        write_atomic(path, &text)?;
    }
    let optimum = solve_values(inst.mdp(), &inst.optimum()?)?;
    println!(
        "{}",
        json!({
            "pivots": trace.pivots.len(),
            "objective": rational::format(&trace.objective),
            "terminal_optimal": trace.objective == value_sum(inst.mdp(), &optimum),
        })
    );
    Ok(0)
}

pub fn lp_compare(args: &InstanceArgs, rule: &str, max_iters: Option<usize>) -> Result<u8, CliError> {
    let spec = parse_rule(rule)?;
    let inst = Instance::build(args)?;
    let report = compare(inst.mdp(), &inst.start()?, &spec, iteration_cap(args.family, args.n, max_iters))?;
    let first_mismatch = report.switches.iter().zip(&report.entering).position(|(a, b)| a != b);
    println!(
        "{}",
        json!({
            "switches": report.switches.len(),
            "pivots": report.entering.len(),
            "sequences_match": report.switches == report.entering,
            "first_mismatch": first_mismatch,
            "correspondence_failures": report.correspondence_failures.len(),
            "non_increasing_pivots": report.non_increasing_pivots,
            "agrees": report.agrees(),
        })
    );
    let _ = std::io::stdout().flush();
    Ok(if report.agrees() { 0 } else { 2 })
}
