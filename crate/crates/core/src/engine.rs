//! Single-switch policy iteration with pluggable pivot rules.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_traits::Signed;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::mdp::{improving_switches, is_weak_unichain, first_stuck_vertex, solve_values, value_sum, EdgeId, Mdp, Policy, Values};
use crate::rational::{self, Rational};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PivotRule {
    Bland,
    Dantzig,
    LargestIncrease,
}

impl PivotRule {
    pub const ALL: [PivotRule; 3] = [PivotRule::Bland, PivotRule::Dantzig, PivotRule::LargestIncrease];
}

impl fmt::Display for PivotRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PivotRule::Bland => "bland",
            PivotRule::Dantzig => "dantzig",
            PivotRule::LargestIncrease => "li",
        })
    }
}

impl FromStr for PivotRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bland" => Ok(PivotRule::Bland),
            "dantzig" => Ok(PivotRule::Dantzig),
            "li" | "largest_increase" | "largest-increase" => Ok(PivotRule::LargestIncrease),
            other => Err(Error::Parse(format!("unknown pivot rule {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MixSchedule {
    /// Rule `k mod len` at iteration `k`.
    Explicit(Vec<PivotRule>),
    /// Uniform choice among `rules` per iteration, from a ChaCha8 stream.
    Seeded { seed: u64, rules: Vec<PivotRule> },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PivotRuleSpec {
    Single(PivotRule),
    Mix(MixSchedule),
}

impl PivotRuleSpec {
    pub fn seeded(seed: u64) -> Self {
        PivotRuleSpec::Mix(MixSchedule::Seeded { seed, rules: PivotRule::ALL.to_vec() })
    }

    /// Rules separated by commas or whitespace; `#` starts a comment.
    pub fn parse_schedule(text: &str) -> Result<Self> {
        let rules = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or(""))
            .flat_map(|l| l.split([',', ' ', '\t']))
            .filter(|t| !t.is_empty())
            .map(str::parse)
            .collect::<Result<Vec<PivotRule>>>()?;
        if rules.is_empty() {
            return Err(Error::Parse("empty schedule".into()));
        }
        Ok(PivotRuleSpec::Mix(MixSchedule::Explicit(rules)))
    }

    pub fn stream(&self) -> RuleStream {
        RuleStream::new(self)
    }
}

impl fmt::Display for PivotRuleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PivotRuleSpec::Single(r) => write!(f, "{r}"),
            PivotRuleSpec::Mix(MixSchedule::Seeded { seed, .. }) => write!(f, "mix:{seed}"),
            PivotRuleSpec::Mix(MixSchedule::Explicit(list)) => {
                let names: Vec<String> = list.iter().map(|r| r.to_string()).collect();
                write!(f, "sched:{}", names.join(","))
            }
        }
    }
}

/// `bland`, `dantzig`, `li` or `mix:<seed>`.
impl FromStr for PivotRuleSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(seed) = s.strip_prefix("mix:") {
            let seed = seed.parse().map_err(|_| Error::Parse(format!("bad seed {seed:?}")))?;
            return Ok(PivotRuleSpec::seeded(seed));
        }
        if let Some(list) = s.strip_prefix("sched:") {
            return PivotRuleSpec::parse_schedule(list);
        }
        Ok(PivotRuleSpec::Single(s.parse()?))
    }
}

/// Per-iteration rule choice for a spec.
pub struct RuleStream {
    kind: StreamKind,
    next: usize,
}

enum StreamKind {
    Fixed(Vec<PivotRule>),
    Random(ChaCha8Rng, Vec<PivotRule>),
}

impl RuleStream {
    fn new(spec: &PivotRuleSpec) -> Self {
        let kind = match spec {
            PivotRuleSpec::Single(r) => StreamKind::Fixed(vec![*r]),
            PivotRuleSpec::Mix(MixSchedule::Explicit(list)) => StreamKind::Fixed(list.clone()),
            PivotRuleSpec::Mix(MixSchedule::Seeded { seed, rules }) => {
                StreamKind::Random(ChaCha8Rng::seed_from_u64(*seed), rules.clone())
            }
        };
        RuleStream { kind, next: 0 }
    }
}

impl Iterator for RuleStream {
    type Item = PivotRule;

    fn next(&mut self) -> Option<PivotRule> {
        let k = self.next;
        self.next += 1;
        match &mut self.kind {
            StreamKind::Fixed(list) => list.get(k % list.len().max(1)).copied(),
            StreamKind::Random(rng, rules) => rules.choose(rng).copied(),
        }
    }
}

/// A chosen switch with its selection telemetry.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Selection {
    pub edge: EdgeId,
    pub z: Rational,
    /// Other candidates that attained the same score.
    pub ties: usize,
}

fn bland_key(mdp: &Mdp, e: EdgeId) -> (u32, EdgeId) {
    (mdp.edge(e).bland.unwrap_or(u32::MAX), e)
}

/// The candidate with the smallest Bland number.
pub fn select_bland(mdp: &Mdp, candidates: &[(EdgeId, Rational)]) -> Result<Selection> {
    let mut best: Option<&(EdgeId, Rational)> = None;
    for c in candidates {
        let num = mdp.edge(c.0).bland.ok_or(Error::MissingNumber { edge: c.0 .0 })?;
        if best.is_none_or(|b| num < mdp.edge(b.0).bland.unwrap()) {
            best = Some(c);
        }
    }
    let (edge, z) = best.ok_or_else(|| Error::Invariant("no candidates".into()))?.clone();
    Ok(Selection { edge, z, ties: 0 })
}

/// Picks the maximum of `score`, ties to the smallest Bland number.
fn argmax_by_score(mdp: &Mdp, candidates: &[(EdgeId, Rational)], scores: &[Rational]) -> Result<Selection> {
    let mut best: Option<usize> = None;
    let mut ties = 0;
    for i in 0..candidates.len() {
        match best {
            None => best = Some(i),
            Some(b) => match scores[i].cmp(&scores[b]) {
                Ordering::Greater => {
                    best = Some(i);
                    ties = 0;
                }
                Ordering::Equal => {
                    ties += 1;
                    if bland_key(mdp, candidates[i].0) < bland_key(mdp, candidates[b].0) {
                        best = Some(i);
                    }
                }
                Ordering::Less => {}
            },
        }
    }
    let b = best.ok_or_else(|| Error::Invariant("no candidates".into()))?;
    Ok(Selection { edge: candidates[b].0, z: candidates[b].1.clone(), ties })
}

/// The candidate with the largest reduced cost.
pub fn select_dantzig(mdp: &Mdp, candidates: &[(EdgeId, Rational)]) -> Result<Selection> {
    let scores: Vec<Rational> = candidates.iter().map(|c| c.1.clone()).collect();
    argmax_by_score(mdp, candidates, &scores)
}

/// The candidate whose application yields the largest value sum.
pub fn select_largest_increase(mdp: &Mdp, policy: &Policy, candidates: &[(EdgeId, Rational)]) -> Result<Selection> {
    let scores = candidates
        .iter()
        .map(|(e, _)| {
            let next = policy.apply_switch(mdp, *e)?;
            Ok(value_sum(mdp, &solve_values(mdp, &next)?))
        })
        .collect::<Result<Vec<_>>>()?;
    argmax_by_score(mdp, candidates, &scores)
}

pub fn select(rule: PivotRule, mdp: &Mdp, policy: &Policy, candidates: &[(EdgeId, Rational)]) -> Result<Selection> {
    match rule {
        PivotRule::Bland => select_bland(mdp, candidates),
        PivotRule::Dantzig => select_dantzig(mdp, candidates),
        PivotRule::LargestIncrease => select_largest_increase(mdp, policy, candidates),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Step {
    pub iteration: usize,
    pub edge: EdgeId,
    pub z: Rational,
    pub value_sum_after: Rational,
    pub improving: usize,
    pub ties: usize,
    pub rule: PivotRule,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    pub initial: Policy,
    pub steps: Vec<Step>,
    pub terminal: Policy,
    pub terminal_values: Values,
}

impl Trace {
    pub fn total_switches(&self) -> usize {
        self.steps.len()
    }

    pub fn edges(&self) -> Vec<EdgeId> {
        self.steps.iter().map(|s| s.edge).collect()
    }

    pub fn ties_seen(&self) -> usize {
        self.steps.iter().map(|s| s.ties).sum()
    }

    /// Every policy of the run, initial and terminal included.
    pub fn policies<'a>(&'a self, mdp: &'a Mdp) -> impl Iterator<Item = Policy> + 'a {
        let mut current = Some(self.initial.clone());
        let mut steps = self.steps.iter();
        std::iter::from_fn(move || {
            let out = current.take()?;
            current = steps.next().map(|s| out.apply_switch(mdp, s.edge).expect("recorded switch"));
            Some(out)
        })
    }

    /// JSON lines: one object per step followed by a summary object.
    pub fn to_jsonl(&self, mdp: &Mdp, name: impl Fn(EdgeId) -> String) -> String {
        let mut out = String::new();
        for s in &self.steps {
            let line = json!({
                "iteration": s.iteration,
                "edge": name(s.edge),
                "z": rational::format(&s.z),
                "value_sum_after": rational::format(&s.value_sum_after),
                "improving": s.improving,
                "ties": s.ties,
                "rule": s.rule.to_string(),
            });
            out.push_str(&line.to_string());
            out.push('\n');
        }
        let summary = json!({
            "summary": true,
            "total_switches": self.total_switches(),
            "ties_seen": self.ties_seen(),
            "terminal_value_sum": rational::format(&value_sum(mdp, &self.terminal_values)),
            "terminal_policy_sha256": policy_hash(mdp, &self.terminal),
        });
        out.push_str(&summary.to_string());
        out.push('\n');
        out
    }
}

/// SHA-256 over the active agent edges as `src->dst` lines.
pub fn policy_hash(mdp: &Mdp, policy: &Policy) -> String {
    let mut h = Sha256::new();
    for e in policy.active_edges(mdp) {
        let edge = mdp.edge(e);
        h.update(format!("{}->{}\n", edge.source.0, edge.target.0).as_bytes());
    }
    hex::encode(h.finalize())
}

/// What an observer sees before each switch is applied.
pub struct StepView<'a> {
    pub iteration: usize,
    pub policy: &'a Policy,
    pub values: &'a Values,
    pub improving: &'a [(EdgeId, Rational)],
    pub rule: PivotRule,
    pub selection: &'a Selection,
}

/// `2^(n+6)`.
pub fn default_max_iters(n: u32) -> usize {
    1usize << (n + 6).min(40)
}

pub fn run(mdp: &Mdp, initial: &Policy, spec: &PivotRuleSpec, max_iters: usize) -> Result<Trace> {
    run_with_observer(mdp, initial, spec, max_iters, |_| Ok(()))
}

/// Applies one improving switch per iteration until none is left. Every
/// visited policy must be weak unichain and every switch must raise the
/// value sum.
pub fn run_with_observer(
    mdp: &Mdp,
    initial: &Policy,
    spec: &PivotRuleSpec,
    max_iters: usize,
    mut observer: impl FnMut(&StepView<'_>) -> Result<()>,
) -> Result<Trace> {
    if let Some(v) = first_stuck_vertex(mdp, initial) {
        return Err(Error::NotWeakUnichain { vertex: v.0 });
    }
    let mut rules = spec.stream();
    let mut policy = initial.clone();
    let mut values = solve_values(mdp, &policy)?;
    let mut sum = value_sum(mdp, &values);
    let mut steps = Vec::new();
    loop {
        let improving = improving_switches(mdp, &values);
        if improving.is_empty() {
            break;
        }
        if steps.len() >= max_iters {
            return Err(Error::IterationCap(max_iters));
        }
        let rule = rules.next().expect("rule stream is infinite");
        let selection = select(rule, mdp, &policy, &improving)?;
        observer(&StepView {
            iteration: steps.len() + 1,
            policy: &policy,
            values: &values,
            improving: &improving,
            rule,
            selection: &selection,
        })?;
        let next = policy.apply_switch(mdp, selection.edge)?;
        if !is_weak_unichain(mdp, &next) {
            let v = first_stuck_vertex(mdp, &next).unwrap();
            return Err(Error::NotWeakUnichain { vertex: v.0 });
        }
        let next_values = solve_values(mdp, &next)?;
        let next_sum = value_sum(mdp, &next_values);
        if !(&next_sum - &sum).is_positive() {
            return Err(Error::Invariant(format!(
                "value sum did not increase at iteration {}: {} -> {}",
                steps.len() + 1,
                rational::format(&sum),
                rational::format(&next_sum)
            )));
        }
        steps.push(Step {
            iteration: steps.len() + 1,
            edge: selection.edge,
            z: selection.z,
            value_sum_after: next_sum.clone(),
            improving: improving.len(),
            ties: selection.ties,
            rule,
        });
        policy = next;
        values = next_values;
        sum = next_sum;
    }
    Ok(Trace { initial: initial.clone(), steps, terminal: policy, terminal_values: values })
}

/// Positional comparison of an actual sequence with a prediction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceDiff<T> {
    /// `(position, actual, predicted)` for every disagreeing position.
    pub mismatches: Vec<(usize, Option<T>, Option<T>)>,
    pub actual_len: usize,
    pub predicted_len: usize,
}

impl<T> TraceDiff<T> {
    pub fn is_empty(&self) -> bool {
        self.mismatches.is_empty()
    }
}

impl<T: fmt::Display> fmt::Display for TraceDiff<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return write!(f, "{} positions agree", self.actual_len);
        }
        let show = |x: &Option<T>| x.as_ref().map_or("-".to_string(), |v| v.to_string());
        writeln!(f, "{} mismatches (actual {}, predicted {})", self.mismatches.len(), self.actual_len, self.predicted_len)?;
        for (i, a, p) in self.mismatches.iter().take(10) {
            writeln!(f, "  #{i}: {} vs {}", show(a), show(p))?;
        }
        Ok(())
    }
}

pub fn verify_trace_against<T: PartialEq + Clone>(actual: &[T], predicted: &[T]) -> TraceDiff<T> {
    let len = actual.len().max(predicted.len());
    let mismatches = (0..len)
        .filter_map(|i| {
            let (a, p) = (actual.get(i), predicted.get(i));
            (a != p).then(|| (i, a.cloned(), p.cloned()))
        })
        .collect();
    TraceDiff { mismatches, actual_len: actual.len(), predicted_len: predicted.len() }
}
