//! Executable versions of the structural claims about both families.
//!
//! Each check returns a [`PropertyReport`]; nothing here panics on a failed
//! property so that callers can print a full table.

use std::collections::HashSet;
use std::fmt;

use num_traits::Signed;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::constructions::{
    canonical_phases, canonical_policy, canonical_violations, even_transition, optimal_policy_b,
    predicted_bland_trace, recognize_canonical, EdgeKind, EdgeName, EdgeRole, FamilyB, FamilyD,
};
use crate::engine::{run_with_observer, verify_trace_against, PivotRule, PivotRuleSpec, Trace};
use crate::mdp::{
    improving_switches, is_weak_unichain, reduced_cost, solve_values, EdgeId, Mdp, Policy, Values, VertexId,
};
use crate::rational::{self, int, pow2, ratio, Rational};
use crate::Result;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PropertyReport {
    pub name: String,
    pub n: u32,
    pub passed: bool,
    /// Number of individual instances checked.
    pub checked: usize,
    /// First failure, if any.
    pub detail: String,
}

impl fmt::Display for PropertyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{status} n={} {} ({} checked)", self.n, self.name, self.checked)?;
        if !self.detail.is_empty() {
            write!(f, ": {}", self.detail)?;
        }
        Ok(())
    }
}

/// Collects instance results for one property.
struct Check {
    name: String,
    n: u32,
    checked: usize,
    failure: Option<String>,
}

impl Check {
    fn new(name: impl Into<String>, n: u32) -> Self {
        Check { name: name.into(), n, checked: 0, failure: None }
    }

    fn expect(&mut self, ok: bool, detail: impl FnOnce() -> String) {
        self.checked += 1;
        if !ok && self.failure.is_none() {
            self.failure = Some(detail());
        }
    }

    fn fail(&mut self, detail: String) {
        self.expect(false, || detail);
    }

    fn report(self) -> PropertyReport {
        PropertyReport {
            name: self.name,
            n: self.n,
            passed: self.failure.is_none(),
            checked: self.checked,
            detail: self.failure.unwrap_or_default(),
        }
    }
}

fn aborted(name: &str, n: u32, err: impl fmt::Display) -> PropertyReport {
    PropertyReport { name: name.into(), n, passed: false, checked: 0, detail: format!("aborted: {err}") }
}

/// Uniform random choice per switchable vertex, resampled until weak
/// unichain.
pub fn random_weak_unichain_policy(mdp: &Mdp, rng: &mut impl Rng) -> Policy {
    loop {
        let edges: Vec<EdgeId> = mdp
            .agent_vertices()
            .filter(|&v| mdp.is_switchable(v))
            .map(|v| *mdp.out_edges(v).choose(rng).expect("switchable"))
            .collect();
        let p = Policy::from_edges(mdp, edges).expect("one edge per vertex");
        if is_weak_unichain(mdp, &p) {
            return p;
        }
    }
}

/// `2^(n+1) - 5/4`.
pub fn optimal_transport_value(n: u32) -> Rational {
    pow2(n as i64 + 1) - ratio(5, 4)
}

fn z_of(b: &FamilyB, values: &Values, name: EdgeName) -> Rational {
    reduced_cost(b.mdp(), values, b.edge(name)).expect("agent edge")
}

/// Claims about canonical policies and their transitions that need no run.
pub fn check_canonical_structure(b: &FamilyB) -> Vec<PropertyReport> {
    let n = b.n();
    let mut defined = Check::new("canonical_policies_well_defined", n);
    let mut travel = Check::new("travel_never_improving_at_canonical", n);
    let mut transitions = Check::new("transitions_reach_successor", n);
    let top = (1u64 << n) - 1;
    for x in 0..=top {
        let p = match canonical_policy(b, x) {
            Ok(p) => p,
            Err(e) => {
                defined.fail(format!("x={x}: {e}"));
                continue;
            }
        };
        let violations = canonical_violations(b, &p, x).unwrap_or_default();
        let back = recognize_canonical(b, &p);
        defined.expect(violations.is_empty() && back == Some(x), || {
            format!("x={x}: violations {violations:?}, recognized {back:?}")
        });
        match solve_values(b.mdp(), &p) {
            Ok(values) => {
                for i in 1..=n {
                    let z = z_of(b, &values, EdgeName::travel(i));
                    travel.expect(!z.is_positive(), || format!("x={x}: z(travel({i})) = {}", rational::format(&z)));
                }
            }
            Err(e) => travel.fail(format!("x={x}: {e}")),
        }
        if x < top {
            let steps = if x % 2 == 0 { even_transition(n, x) } else { canonical_phases(n, x) };
            let reached = steps.and_then(|steps| {
                steps.iter().try_fold(p.clone(), |q, s| q.apply_switch(b.mdp(), b.edge(*s)))
            });
            let ok = matches!((&reached, canonical_policy(b, x + 1)), (Ok(q), Ok(next)) if *q == next);
            transitions.expect(ok, || format!("x={x} does not reach pi_{}", x + 1));
        }
    }
    vec![defined.report(), travel.report(), transitions.report()]
}

/// Bland's rule on the level family from `pi_0`, with every per-step claim.
pub fn check_bland_on_b(b: &FamilyB, max_iters: usize) -> Vec<PropertyReport> {
    let n = b.n();
    let mdp = b.mdp();
    let mut one_travel = Check::new("at_most_one_improving_travel", n);
    let mut orderings = Check::new("applied_switch_orderings", n);
    let mut quarters = Check::new("values_quarter_multiples", n);
    let four = int(4);
    let start = match canonical_policy(b, 0) {
        Ok(p) => p,
        Err(e) => return vec![aborted("bland_visits_all_canonical", n, e)],
    };
    let spec = PivotRuleSpec::Single(PivotRule::Bland);
    let trace = run_with_observer(mdp, &start, &spec, max_iters, |view| {
        let travels = view
            .improving
            .iter()
            .filter(|(e, _)| b.name(*e).kind == EdgeKind::Travel)
            .count();
        one_travel.expect(travels <= 1, || format!("iteration {}: {travels} improving travel edges", view.iteration));
        let all_quarter = view.values.as_slice().iter().all(|v| (v * &four).is_integer());
        quarters.expect(all_quarter, || format!("iteration {}", view.iteration));
        let name = b.name(view.selection.edge);
        let z = |k: fn(u32) -> EdgeName| z_of(b, view.values, k(name.level));
        match name.kind {
            EdgeKind::Skip => {
                orderings.expect(z(EdgeName::skip) > z(EdgeName::board), || {
                    format!("iteration {}: {name} applied with z <= z(board)", view.iteration)
                });
            }
            EdgeKind::Enter => {
                let ze = z(EdgeName::enter);
                orderings.expect(ze > z(EdgeName::skip) && ze > z(EdgeName::board), || {
                    format!("iteration {}: {name} applied without dominating skip/board", view.iteration)
                });
            }
            _ => {}
        }
        Ok(())
    });
    let trace = match trace {
        Ok(t) => t,
        Err(e) => {
            return ["bland_visits_all_canonical", "bland_matches_prediction", "terminates_at_optimum"]
                .iter()
                .map(|name| aborted(name, n, &e))
                .collect()
        }
    };
    let mut out = vec![one_travel.report(), orderings.report(), quarters.report()];
    out.extend(check_b_trace(b, &trace));
    out
}

/// Claims about a finished Bland run on the level family.
pub fn check_b_trace(b: &FamilyB, trace: &Trace) -> Vec<PropertyReport> {
    let n = b.n();
    let mdp = b.mdp();
    let mut visits = Check::new("bland_visits_all_canonical", n);
    let seen: HashSet<u64> = trace.policies(mdp).filter_map(|p| recognize_canonical(b, &p)).collect();
    visits.expect(seen.len() == 1usize << n, || format!("visited {} of {}", seen.len(), 1usize << n));

    let mut sequence = Check::new("bland_matches_prediction", n);
    match predicted_bland_trace(n) {
        Ok(pred) => {
            let actual: Vec<EdgeName> = trace.edges().iter().take(pred.len()).map(|&e| b.name(e)).collect();
            let diff = verify_trace_against(&actual, &pred);
            sequence.expect(diff.is_empty(), || diff.to_string());
        }
        Err(e) => sequence.fail(e.to_string()),
    }
    let mut out = vec![visits.report(), sequence.report()];
    out.extend(check_run_generic(mdp, trace, n));
    out.push(check_terminal(mdp, &trace.terminal, &optimal_policy_b(b), b.t(), n, "terminates_at_optimum"));
    out
}

/// Monotonicity and repetition claims valid for any run.
pub fn check_run_generic(mdp: &Mdp, trace: &Trace, n: u32) -> Vec<PropertyReport> {
    let mut mono = Check::new("switch_monotonicity", n);
    let mut repeats = Check::new("no_policy_repeats", n);
    let mut seen = HashSet::new();
    let mut prev: Option<(Policy, Values)> = None;
    for (k, p) in trace.policies(mdp).enumerate() {
        repeats.expect(seen.insert(p.clone()), || format!("policy after {k} switches repeats"));
        let values = match solve_values(mdp, &p) {
            Ok(v) => v,
            Err(e) => {
                mono.fail(format!("step {k}: {e}"));
                break;
            }
        };
        if let Some((_, old)) = &prev {
            let src = mdp.edge(trace.steps[k - 1].edge).source;
            let ok = old.as_slice().iter().zip(values.as_slice()).all(|(a, b)| a <= b) && values[src] > old[src];
            mono.expect(ok, || format!("switch {k} lowered a value or kept its source"));
        }
        prev = Some((p, values));
    }
    vec![mono.report(), repeats.report()]
}

fn check_terminal(mdp: &Mdp, terminal: &Policy, optimum: &Policy, t: VertexId, n: u32, name: &str) -> PropertyReport {
    let mut c = Check::new(name, n);
    match solve_values(mdp, terminal) {
        Ok(values) => {
            let left = improving_switches(mdp, &values).len();
            c.expect(terminal == optimum && left == 0 && values[t] == optimal_transport_value(n), || {
                format!(
                    "terminal optimal: {}, improving left: {left}, Val(t) = {}",
                    terminal == optimum,
                    rational::format(&values[t])
                )
            });
        }
        Err(e) => c.fail(e.to_string()),
    }
    c.report()
}

/// Twin claims over random weak unichain base policies.
pub fn check_twins(d: &FamilyD, samples: usize, seed: u64) -> Vec<PropertyReport> {
    let n = d.n();
    let base = d.base();
    let mut coincide = Check::new("twin_values_coincide", n);
    let mut unichain = Check::new("twin_weak_unichain", n);
    let mut only_commit = Check::new("twin_only_commit_improving", n);
    let mut scaling = Check::new("reduced_cost_scaling", n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for k in 0..samples {
        let pi = if k == 0 {
            canonical_policy(base, 0).expect("pi_0")
        } else {
            random_weak_unichain_policy(base.mdp(), &mut rng)
        };
        let twin = match d.twin_policy(&pi) {
            Ok(t) => t,
            Err(e) => {
                unichain.fail(e.to_string());
                continue;
            }
        };
        unichain.expect(is_weak_unichain(d.mdp(), &twin), || format!("sample {k}"));
        let (Ok(bv), Ok(dv)) = (solve_values(base.mdp(), &pi), solve_values(d.mdp(), &twin)) else {
            coincide.fail(format!("sample {k}: solve failed"));
            continue;
        };
        let same = base.mdp().agent_vertices().all(|v| bv[v] == dv[v]);
        coincide.expect(same, || format!("sample {k}"));
        for (e, _) in improving_switches(d.mdp(), &dv) {
            only_commit.expect(matches!(d.role(e), EdgeRole::Commit(_)), || {
                format!("sample {k}: {} improving", d.mdp().edge_label(e))
            });
        }
        for g in d.gadget_map().gadgets() {
            let zt = reduced_cost(d.mdp(), &dv, g.commit).expect("agent edge");
            let zb = reduced_cost(base.mdp(), &bv, g.base_edge).expect("agent edge");
            scaling.expect(zt == &g.p * &zb, || {
                format!("sample {k}: {} gives {} vs p*{}", base.name(g.base_edge), rational::format(&zt), rational::format(&zb))
            });
        }
    }
    vec![coincide.report(), unichain.report(), only_commit.report(), scaling.report()]
}

/// Reorienting a gadget through its three switches sees the same reduced
/// cost three times.
pub fn check_reorientation_triples(d: &FamilyD, samples: usize, seed: u64) -> PropertyReport {
    let n = d.n();
    let base = d.base();
    let mdp = d.mdp();
    let mut c = Check::new("reorientation_triple", n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut attempts = 0;
    while c.checked < samples && attempts < samples * 50 {
        attempts += 1;
        let pi = random_weak_unichain_policy(base.mdp(), &mut rng);
        let Ok(bv) = solve_values(base.mdp(), &pi) else { continue };
        let improving = improving_switches(base.mdp(), &bv);
        let Some((e, _)) = improving.choose(&mut rng) else { continue };
        let g = d.gadget(*e);
        let old = d.gadget(pi.active_edge(base.mdp(), g.source).expect("agent"));
        let result: Result<(Rational, Rational, Rational)> = (|| {
            let p1 = d.twin_policy(&pi)?;
            let z1 = reduced_cost(mdp, &solve_values(mdp, &p1)?, g.commit)?;
            let p2 = p1.apply_switch(mdp, g.commit)?;
            let z2 = reduced_cost(mdp, &solve_values(mdp, &p2)?, g.enter)?;
            let p3 = p2.apply_switch(mdp, g.enter)?;
            let z3 = reduced_cost(mdp, &solve_values(mdp, &p3)?, old.back)?;
            Ok((z1, z2, z3))
        })();
        match result {
            Ok((z1, z2, z3)) => c.expect(z1 == z2 && z2 == z3 && z1.is_positive(), || {
                format!(
                    "{}: {} / {} / {}",
                    base.name(*e),
                    rational::format(&z1),
                    rational::format(&z2),
                    rational::format(&z3)
                )
            }),
            Err(err) => c.fail(format!("{}: {err}", base.name(*e))),
        }
    }
    if c.checked < samples {
        c.fail(format!("only {} reorientations found", c.checked));
    }
    c.report()
}

/// A run on the gadget family from `twin(pi_0)` with its per-step claims.
pub fn check_d_run(d: &FamilyD, spec: &PivotRuleSpec, max_iters: usize) -> Vec<PropertyReport> {
    let n = d.n();
    let base = d.base();
    let mdp = d.mdp();
    let tag = spec.to_string();
    let mut bounds = Check::new(format!("reduced_cost_bounds[{tag}]"), n);
    let mut cond_b = Check::new(format!("condition_b[{tag}]"), n);
    let mut ties = Check::new(format!("no_ties[{tag}]"), n);
    let scale_hi = pow2(n as i64 + 2);
    let quarter = ratio(1, 4);
    let start = match canonical_policy(base, 0).and_then(|p| d.twin_policy(&p)) {
        Ok(p) => p,
        Err(e) => return vec![aborted(&format!("d_run[{tag}]"), n, e)],
    };
    let vnum = |v: VertexId| base.vertex_number(v);
    let trace = run_with_observer(mdp, &start, spec, max_iters, |view| {
        for (e, z) in view.improving {
            if let Some(v) = d.owner(*e) {
                let p = d.probability(v).expect("gadget source");
                let ok = z >= &(p * &quarter) && z <= &(p * &scale_hi);
                bounds.expect(ok, || {
                    format!("iteration {}: z({}) = {}", view.iteration, mdp.edge_label(*e), rational::format(z))
                });
            }
        }
        if let Some(u) = d.commit_base_edge(view.selection.edge).map(|e| base.mdp().edge(e).source) {
            let blocker = view
                .improving
                .iter()
                .filter(|(e, _)| matches!(d.role(*e), EdgeRole::Back(_)))
                .filter_map(|(e, _)| d.owner(*e))
                .find(|&v| vnum(u) > vnum(v));
            cond_b.expect(blocker.is_none(), || {
                format!(
                    "iteration {}: applied {} while a back edge of {} is improving",
                    view.iteration,
                    mdp.edge_label(view.selection.edge),
                    mdp.vertex(blocker.unwrap()).label
                )
            });
        } else {
            cond_b.expect(true, String::new);
        }
        if view.rule != PivotRule::Bland {
            ties.expect(view.selection.ties == 0, || {
                format!("iteration {}: {} ties", view.iteration, view.selection.ties)
            });
        }
        Ok(())
    });
    let trace = match trace {
        Ok(t) => t,
        Err(e) => return vec![aborted(&format!("d_run[{tag}]"), n, e)],
    };
    let mut out = vec![bounds.report(), cond_b.report()];
    if *spec != PivotRuleSpec::Single(PivotRule::Bland) {
        out.push(ties.report());
    }

    let mut lower = Check::new(format!("lower_bound[{tag}]"), n);
    lower.expect(trace.total_switches() >= 1usize << n, || {
        format!("{} switches < 2^{n}", trace.total_switches())
    });
    out.push(lower.report());

    let mut projection = Check::new(format!("commit_projection_matches_bland[{tag}]"), n);
    let base_start = canonical_policy(base, 0).expect("pi_0");
    match crate::engine::run(base.mdp(), &base_start, &PivotRuleSpec::Single(PivotRule::Bland), max_iters) {
        Ok(bt) => {
            let expected: Vec<EdgeName> = bt.edges().iter().map(|&e| base.name(e)).collect();
            let got: Vec<EdgeName> = trace
                .edges()
                .iter()
                .filter_map(|&e| d.commit_base_edge(e))
                .map(|e| base.name(e))
                .collect();
            let diff = verify_trace_against(&got, &expected);
            projection.expect(diff.is_empty(), || diff.to_string());
        }
        Err(e) => projection.fail(e.to_string()),
    }
    out.push(projection.report());

    let optimum = d.twin_policy(&optimal_policy_b(base)).expect("twin of optimum");
    out.push(check_terminal(mdp, &trace.terminal, &optimum, base.t(), n, &format!("terminates_at_twin_optimum[{tag}]")));
    out
}

/// Which checks [`verify_suite`] runs.
#[derive(Clone, Debug)]
pub struct SuiteConfig {
    pub n_max: u32,
    /// Largest `n` for runs on the gadget family.
    pub d_max: u32,
    /// Largest `n` for Largest Increase runs on the gadget family.
    pub li_max: u32,
    pub twin_samples: usize,
    pub triple_samples: usize,
    pub mix_seeds: Vec<u64>,
    pub seed: u64,
}

impl SuiteConfig {
    pub fn new(n_max: u32) -> Self {
        SuiteConfig {
            n_max,
            d_max: n_max.min(5),
            li_max: n_max.min(4),
            twin_samples: 200,
            triple_samples: 50,
            mix_seeds: vec![7],
            seed: 1,
        }
    }
}

pub fn verify_suite(cfg: &SuiteConfig) -> Result<Vec<PropertyReport>> {
    let mut out = Vec::new();
    for n in 1..=cfg.n_max {
        let b = FamilyB::new(n)?;
        out.extend(check_canonical_structure(&b));
        out.extend(check_bland_on_b(&b, crate::engine::default_max_iters(n)));
    }
    for n in 1..=cfg.n_max.min(cfg.d_max) {
        let d = FamilyD::new(n, &crate::constructions::Probabilities::Default)?;
        out.extend(check_twins(&d, cfg.twin_samples, cfg.seed + n as u64));
        out.push(check_reorientation_triples(&d, cfg.triple_samples, cfg.seed + 100 + n as u64));
        let mut specs = vec![PivotRuleSpec::Single(PivotRule::Bland), PivotRuleSpec::Single(PivotRule::Dantzig)];
        if n <= cfg.li_max {
            specs.push(PivotRuleSpec::Single(PivotRule::LargestIncrease));
        }
        specs.extend(cfg.mix_seeds.iter().map(|&s| PivotRuleSpec::seeded(s)));
        for spec in specs {
            out.extend(check_d_run(&d, &spec, 4 * crate::engine::default_max_iters(n)));
        }
    }
    Ok(out)
}

/// Whether every report passed.
pub fn all_passed(reports: &[PropertyReport]) -> bool {
    reports.iter().all(|r| r.passed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::Probabilities;

    #[test]
    fn small_suite_passes() {
        let reports = verify_suite(&SuiteConfig { twin_samples: 20, triple_samples: 10, ..SuiteConfig::new(3) }).unwrap();
        for r in &reports {
            assert!(r.passed, "{r}");
        }
        assert!(reports.iter().all(|r| r.checked > 0), "every property checks something");
    }

    #[test]
    fn one_level_phase_checks_are_vacuous() {
        let b = FamilyB::new(1).unwrap();
        let reports = check_canonical_structure(&b);
        assert!(all_passed(&reports));
    }

    #[test]
    fn tampered_reward_breaks_canonical_visits() {
        let b = FamilyB::new(3).unwrap().with_reward(EdgeName::enter(2), int(100)).unwrap();
        let reports = check_bland_on_b(&b, 1000);
        let visits = reports.iter().find(|r| r.name == "bland_visits_all_canonical").unwrap();
        assert!(!visits.passed);
    }

    #[test]
    fn random_policies_are_weak_unichain() {
        let d = FamilyD::new(2, &Probabilities::Default).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let p = random_weak_unichain_policy(d.base().mdp(), &mut rng);
            assert!(is_weak_unichain(d.base().mdp(), &p));
        }
        assert_eq!(optimal_transport_value(4), ratio(123, 4));
    }
}
