//! Building a family instance from command-line options.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, ValueEnum};
use pivotlab::constructions::{canonical_policy, optimal_policy_b, FamilyB, FamilyD, PrependOrder, Probabilities};
use pivotlab::engine::Trace;
use pivotlab::{rational, Label, Mdp, Policy};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Family {
    #[value(name = "B", alias = "b")]
    B,
    #[value(name = "D", alias = "d")]
    D,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::B => "B",
            Family::D => "D",
        })
    }
}

impl FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        <Family as ValueEnum>::from_str(s, true)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Order {
    Asc,
    Desc,
}

#[derive(Args, Clone, Debug)]
pub struct InstanceArgs {
    #[arg(long, value_enum)]
    pub family: Family,
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=40))]
    pub n: u32,
    /// JSON object mapping base vertex labels to probabilities, e.g. {"a2": "1/3"}.
    #[arg(long, value_name = "FILE")]
    pub p_override: Option<PathBuf>,
    /// Numbering of the prepended back edges in D.
    #[arg(long, value_enum, default_value = "asc")]
    pub prepend: Order,
}

pub enum Instance {
    B(FamilyB),
    D(FamilyD),
}

impl Instance {
    pub fn build(args: &InstanceArgs) -> Result<Self, CliError> {
        Self::new(args.family, args.n, args.p_override.as_deref(), args.prepend)
    }

    pub fn new(family: Family, n: u32, p_override: Option<&Path>, order: Order) -> Result<Self, CliError> {
        let b = FamilyB::new(n)?;
        if family == Family::B {
            if p_override.is_some() {
                return Err(CliError::Usage("--p-override only applies to family D".into()));
            }
            return Ok(Instance::B(b));
        }
        let probs = match p_override {
            None => Probabilities::Default,
            Some(path) => read_overrides(&b, path)?,
        };
        let order = match order {
            Order::Asc => PrependOrder::Ascending,
            Order::Desc => PrependOrder::Descending,
        };
        Ok(Instance::D(FamilyD::with_order(n, &probs, order)?))
    }

    pub fn mdp(&self) -> &Mdp {
        match self {
            Instance::B(b) => b.mdp(),
            Instance::D(d) => d.mdp(),
        }
    }

    pub fn base(&self) -> &FamilyB {
        match self {
            Instance::B(b) => b,
            Instance::D(d) => d.base(),
        }
    }

    pub fn start(&self) -> Result<Policy, CliError> {
        self.lift(canonical_policy(self.base(), 0)?)
    }

    pub fn optimum(&self) -> Result<Policy, CliError> {
        self.lift(optimal_policy_b(self.base()))
    }

    fn lift(&self, p: Policy) -> Result<Policy, CliError> {
        Ok(match self {
            Instance::B(_) => p,
            Instance::D(d) => d.twin_policy(&p)?,
        })
    }

    /// Level-family policies along a run: every policy on B, and on D the
    /// base policy after each commit switch.
    pub fn base_policies(&self, trace: &Trace) -> Vec<Policy> {
        match self {
            Instance::B(b) => trace.policies(b.mdp()).collect(),
            Instance::D(d) => {
                let mut current = d.base_of_twin(&trace.initial).expect("runs start at a twin");
                let mut out = vec![current.clone()];
                for e in trace.edges().into_iter().filter_map(|e| d.commit_base_edge(e)) {
                    current = current.apply_switch(d.base().mdp(), e).expect("base edge");
                    out.push(current.clone());
                }
                out
            }
        }
    }
}

fn read_overrides(b: &FamilyB, path: &Path) -> Result<Probabilities, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let doc: HashMap<String, String> =
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let mut map = HashMap::new();
    for (label, p) in doc {
        let v = b
            .mdp()
            .find_vertex(&label.parse::<Label>()?)
            .ok_or_else(|| CliError::Usage(format!("no vertex named {label:?}")))?;
        map.insert(v, rational::parse(&p)?);
    }
    Ok(Probabilities::Custom(map))
}
