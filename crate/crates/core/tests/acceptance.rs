//! Acceptance suite. Runs every criterion at its pinned range and prints one
//! PASS/FAIL line per criterion; exits non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use pivotlab::constructions::{canonical_policy, FamilyB, FamilyD, Probabilities};
use pivotlab::engine::{default_max_iters, run, PivotRule, PivotRuleSpec};
use pivotlab::lp;
use pivotlab::verify::{
    check_bland_on_b, check_canonical_structure, check_d_run, check_reorientation_triples, check_twins,
    PropertyReport,
};

const B_MAX: u32 = 8;
const D_MAX: u32 = 7;
const SCALING_MAX: u32 = 6;
const SCALING_SAMPLES: usize = 1000;
const TRIPLE_MAX: u32 = 5;
const TRIPLE_SAMPLES: usize = 200;
const LP_B_MAX: u32 = 6;
const LP_D_MAX: u32 = 4;
const MIX_SEEDS: [u64; 5] = [7, 11, 23, 42, 1009];

struct Criterion {
    id: u32,
    title: &'static str,
    failures: Vec<String>,
    checked: usize,
}

impl Criterion {
    fn new(id: u32, title: &'static str) -> Self {
        Criterion { id, title, failures: Vec::new(), checked: 0 }
    }

    fn absorb<'a>(&mut self, reports: impl IntoIterator<Item = &'a PropertyReport>) {
        for r in reports {
            self.checked += 1;
            if !r.passed {
                self.failures.push(r.to_string());
            }
        }
    }

    fn expect(&mut self, ok: bool, detail: impl FnOnce() -> String) {
        self.checked += 1;
        if !ok {
            self.failures.push(detail());
        }
    }

    fn print(&self) -> bool {
        let ok = self.failures.is_empty() && self.checked > 0;
        let status = if ok { "PASS" } else { "FAIL" };
        println!("[{status}] criterion {}: {} ({} checks)", self.id, self.title, self.checked);
        for f in self.failures.iter().take(5) {
            println!("        {f}");
        }
        ok
    }
}

fn named<'a>(reports: &'a [PropertyReport], prefix: &'a str) -> impl Iterator<Item = &'a PropertyReport> + 'a {
    reports.iter().filter(move |r| r.name == prefix || r.name.starts_with(&format!("{prefix}[")))
}

fn main() -> ExitCode {
    let started = Instant::now();
    let mut b_reports = Vec::new();
    for n in 1..=B_MAX {
        let b = FamilyB::new(n).expect("level family");
        b_reports.extend(check_canonical_structure(&b));
        b_reports.extend(check_bland_on_b(&b, default_max_iters(n)));
    }

    let mut specs: Vec<PivotRuleSpec> = PivotRule::ALL.iter().map(|&r| PivotRuleSpec::Single(r)).collect();
    specs.extend(MIX_SEEDS.iter().map(|&s| PivotRuleSpec::seeded(s)));
    let mut d_reports = Vec::new();
    for n in 1..=D_MAX {
        let d = FamilyD::new(n, &Probabilities::Default).expect("gadget family");
        for spec in &specs {
            d_reports.extend(check_d_run(&d, spec, 4 * default_max_iters(n)));
        }
        if n <= SCALING_MAX {
            d_reports.extend(check_twins(&d, SCALING_SAMPLES, 1000 + n as u64));
        }
        if n <= TRIPLE_MAX {
            d_reports.push(check_reorientation_triples(&d, TRIPLE_SAMPLES, 2000 + n as u64));
        }
    }

    let mut c1 = Criterion::new(1, "Bland on B_n visits all 2^n canonical policies, n = 1..8");
    c1.absorb(named(&b_reports, "bland_visits_all_canonical"));

    let mut c2 = Criterion::new(2, "Bland on B_n equals the predicted sequence up to pi_{2^n-1}, n = 1..8");
    c2.absorb(named(&b_reports, "bland_matches_prediction"));

    let mut c3 = Criterion::new(3, "D_n needs >= 2^n switches for Bland/Dantzig/LI/5 MIX seeds, n = 1..7, (x,y) projection = B_n Bland");
    c3.absorb(named(&d_reports, "lower_bound"));
    c3.absorb(named(&d_reports, "commit_projection_matches_bland"));

    let mut c4 = Criterion::new(4, "every run ends at pi_* / twin(pi_*) with Val(t) = 2^(n+1) - 5/4");
    c4.absorb(named(&b_reports, "terminates_at_optimum"));
    c4.absorb(named(&d_reports, "terminates_at_twin_optimum"));
    for n in 1..=B_MAX {
        let b = FamilyB::new(n).expect("level family");
        let start = canonical_policy(&b, 0).expect("pi_0");
        for rule in [PivotRule::Dantzig, PivotRule::LargestIncrease] {
            let reports = match run(b.mdp(), &start, &PivotRuleSpec::Single(rule), default_max_iters(n)) {
                Ok(t) => pivotlab::verify::check_b_trace(&b, &t),
                Err(e) => {
                    c4.expect(false, || format!("B_{n} {rule}: {e}"));
                    continue;
                }
            };
            c4.absorb(reports.iter().filter(|r| r.name == "terminates_at_optimum"));
        }
    }

    let mut c5 = Criterion::new(5, "lemma suite: travel, orderings, scaling, bounds, condition (b), reorientation triples");
    for name in [
        "canonical_policies_well_defined",
        "travel_never_improving_at_canonical",
        "transitions_reach_successor",
        "at_most_one_improving_travel",
        "applied_switch_orderings",
        "values_quarter_multiples",
        "switch_monotonicity",
        "no_policy_repeats",
    ] {
        c5.absorb(named(&b_reports, name));
    }
    for name in [
        "twin_values_coincide",
        "twin_weak_unichain",
        "twin_only_commit_improving",
        "reduced_cost_scaling",
        "reduced_cost_bounds",
        "condition_b",
        "reorientation_triple",
    ] {
        c5.absorb(named(&d_reports, name));
    }

    let mut c6 = Criterion::new(6, "exact simplex pivots = policy iteration switches, B_n n <= 6, D_n n <= 4, no degenerate pivot");
    for n in 1..=LP_B_MAX {
        let b = FamilyB::new(n).expect("level family");
        let start = canonical_policy(&b, 0).expect("pi_0");
        for rule in PivotRule::ALL {
            match lp::compare(b.mdp(), &start, &PivotRuleSpec::Single(rule), default_max_iters(n)) {
                Ok(r) => c6.expect(r.agrees(), || format!("B_{n} {rule}: {r:?}")),
                Err(e) => c6.expect(false, || format!("B_{n} {rule}: {e}")),
            }
        }
    }
    for n in 1..=LP_D_MAX {
        let d = FamilyD::new(n, &Probabilities::Default).expect("gadget family");
        let start = d.twin_policy(&canonical_policy(d.base(), 0).expect("pi_0")).expect("twin");
        for rule in PivotRule::ALL {
            match lp::compare(d.mdp(), &start, &PivotRuleSpec::Single(rule), 4 * default_max_iters(n)) {
                Ok(r) => c6.expect(r.agrees(), || {
                    format!("D_{n} {rule}: {} failures", r.correspondence_failures.len())
                }),
                Err(e) => c6.expect(false, || format!("D_{n} {rule}: {e}")),
            }
        }
    }

    let mut c7 = Criterion::new(7, "Dantzig and Largest Increase never see a tie on D_n");
    c7.absorb(named(&d_reports, "no_ties"));

    let results = [c1, c2, c3, c4, c5, c6, c7].iter().map(Criterion::print).collect::<Vec<_>>();
    let passed = results.iter().filter(|&&ok| ok).count();
    println!("acceptance: {passed}/{} criteria passed in {:.1?}", results.len(), started.elapsed());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
