//! Python bindings. Rationals cross the boundary as `fractions.Fraction`.

use std::collections::HashMap;
use std::sync::Arc;

use pivotlab::constructions::{
    canonical_policy, optimal_policy_b, recognize_canonical, EdgeName, FamilyB, FamilyD, Probabilities,
};
use pivotlab::engine::{self, policy_hash, PivotRuleSpec};
use pivotlab::io::mdp_to_json;
use pivotlab::mdp::{improving_switches, solve_values, value_sum};
use pivotlab::verify::{all_passed, verify_suite, SuiteConfig};
use pivotlab::{lp, rational, EdgeId, Label, Mdp, Rational};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(pivotlab, PivotlabError, PyException);

fn err(e: pivotlab::Error) -> PyErr {
    PivotlabError::new_err(e.to_string())
}

fn fraction<'py>(py: Python<'py>, q: &Rational) -> PyResult<Bound<'py, PyAny>> {
    py.import("fractions")?.getattr("Fraction")?.call1((rational::format(q),))
}

enum Family {
    B(FamilyB),
    D(FamilyD),
}

impl Family {
    fn mdp(&self) -> &Mdp {
        match self {
            Family::B(b) => b.mdp(),
            Family::D(d) => d.mdp(),
        }
    }

    fn base(&self) -> &FamilyB {
        match self {
            Family::B(b) => b,
            Family::D(d) => d.base(),
        }
    }

    fn lift(&self, p: pivotlab::Policy) -> PyResult<pivotlab::Policy> {
        match self {
            Family::B(_) => Ok(p),
            Family::D(d) => d.twin_policy(&p).map_err(err),
        }
    }

    fn find_edge(&self, name: &str) -> PyResult<EdgeId> {
        let mdp = self.mdp();
        if let Some(e) = mdp.agent_edges().find(|&e| mdp.edge_label(e) == name) {
            return Ok(e);
        }
        if let Family::B(b) = self {
            if let Ok(n) = name.parse::<EdgeName>() {
                if b.contains(n) {
                    return Ok(b.edge(n));
                }
            }
        }
        Err(PyValueError::new_err(format!("no agent edge named {name:?}")))
    }
}

/// A level (`"B"`) or gadget (`"D"`) instance.
#[pyclass(frozen, module = "pivotlab")]
struct Instance {
    inner: Arc<Family>,
}

#[pymethods]
impl Instance {
    /// `overrides` maps base vertex labels such as `"a2"` to probabilities
    /// (Fraction or `"num/den"` string); only valid for D.
    #[new]
    #[pyo3(signature = (family, n, overrides = None))]
    fn new(family: &str, n: u32, overrides: Option<HashMap<String, Bound<'_, PyAny>>>) -> PyResult<Self> {
        let b = FamilyB::new(n).map_err(err)?;
        let inner = match (family, overrides) {
            ("B" | "b", None) => Family::B(b),
            ("B" | "b", Some(_)) => return Err(PyValueError::new_err("overrides only apply to family D")),
            ("D" | "d", overrides) => {
                let probs = match overrides {
                    None => Probabilities::Default,
                    Some(map) => {
                        let mut out = HashMap::new();
                        for (label, p) in map {
                            let label: Label = label.parse().map_err(err)?;
                            let v = b
                                .mdp()
                                .find_vertex(&label)
                                .ok_or_else(|| PyValueError::new_err(format!("no vertex named {label}")))?;
                            out.insert(v, rational::parse(&p.str()?.to_cow()?).map_err(err)?);
                        }
                        Probabilities::Custom(out)
                    }
                };
                Family::D(FamilyD::new(n, &probs).map_err(err)?)
            }
            (other, _) => return Err(PyValueError::new_err(format!("unknown family {other:?}"))),
        };
        Ok(Instance { inner: Arc::new(inner) })
    }

    #[getter]
    fn family(&self) -> &'static str {
        match *self.inner {
            Family::B(_) => "B",
            Family::D(_) => "D",
        }
    }

    #[getter]
    fn n(&self) -> u32 {
        self.inner.base().n()
    }

    #[getter]
    fn num_vertices(&self) -> usize {
        self.inner.mdp().num_vertices()
    }

    #[getter]
    fn num_edges(&self) -> usize {
        self.inner.mdp().num_edges()
    }

    fn to_json(&self) -> String {
        mdp_to_json(self.inner.mdp())
    }

    fn gadget_map_json(&self) -> Option<String> {
        match &*self.inner {
            Family::B(_) => None,
            Family::D(d) => Some(d.gadget_map().to_json(d.base())),
        }
    }

    /// The canonical policy for `x` (its twin on D).
    fn canonical_policy(&self, x: u64) -> PyResult<Policy> {
        let p = canonical_policy(self.inner.base(), x).map_err(err)?;
        Ok(self.wrap(self.inner.lift(p)?))
    }

    fn optimal_policy(&self) -> PyResult<Policy> {
        Ok(self.wrap(self.inner.lift(optimal_policy_b(self.inner.base()))?))
    }

    /// `x` when `policy` is (the twin of) a canonical policy.
    fn recognize(&self, policy: &Policy) -> Option<u64> {
        let base = match &*self.inner {
            Family::B(_) => Some(policy.policy.clone()),
            Family::D(d) => d.base_of_twin(&policy.policy),
        }?;
        recognize_canonical(self.inner.base(), &base)
    }

    fn __repr__(&self) -> String {
        format!("Instance({:?}, {})", self.family(), self.n())
    }
}

impl Instance {
    fn wrap(&self, policy: pivotlab::Policy) -> Policy {
        Policy { family: self.inner.clone(), policy }
    }
}

#[pyclass(frozen, module = "pivotlab")]
struct Policy {
    family: Arc<Family>,
    policy: pivotlab::Policy,
}

#[pymethods]
impl Policy {
    /// Active agent edges as `src->dst` labels.
    fn active_edges(&self) -> Vec<String> {
        let mdp = self.family.mdp();
        self.policy.active_edges(mdp).into_iter().map(|e| mdp.edge_label(e)).collect()
    }

    /// Vertex label to value.
    fn values<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let mdp = self.family.mdp();
        let vals = solve_values(mdp, &self.policy).map_err(err)?;
        let out = PyDict::new(py);
        for (v, q) in vals.as_slice().iter().enumerate() {
            out.set_item(mdp.vertices()[v].label.to_string(), fraction(py, q)?)?;
        }
        Ok(out)
    }

    fn value_sum<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let mdp = self.family.mdp();
        let vals = solve_values(mdp, &self.policy).map_err(err)?;
        fraction(py, &value_sum(mdp, &vals))
    }

    /// `(edge, reduced cost)` for every improving switch.
    fn improving_switches<'py>(&self, py: Python<'py>) -> PyResult<Vec<(String, Bound<'py, PyAny>)>> {
        let mdp = self.family.mdp();
        let vals = solve_values(mdp, &self.policy).map_err(err)?;
        improving_switches(mdp, &vals)
            .iter()
            .map(|(e, z)| Ok((mdp.edge_label(*e), fraction(py, z)?)))
            .collect()
    }

    /// The policy with `edge` made active; `edge` is `src->dst` or, on B, a
    /// name such as `enter(2)`.
    fn switch(&self, edge: &str) -> PyResult<Policy> {
        let e = self.family.find_edge(edge)?;
        let policy = self.policy.apply_switch(self.family.mdp(), e).map_err(err)?;
        Ok(Policy { family: self.family.clone(), policy })
    }

    fn sha256(&self) -> String {
        policy_hash(self.family.mdp(), &self.policy)
    }

    fn __eq__(&self, other: &Policy) -> bool {
        Arc::ptr_eq(&self.family, &other.family) && self.policy == other.policy
    }

    fn __repr__(&self) -> String {
        format!("Policy({})", &self.sha256()[..12])
    }
}

#[pyclass(frozen, module = "pivotlab")]
struct Trace {
    family: Arc<Family>,
    trace: engine::Trace,
}

#[pymethods]
impl Trace {
    #[getter]
    fn total_switches(&self) -> usize {
        self.trace.total_switches()
    }

    #[getter]
    fn ties_seen(&self) -> usize {
        self.trace.ties_seen()
    }

    /// Applied switches as `src->dst` labels.
    fn edges(&self) -> Vec<String> {
        let mdp = self.family.mdp();
        self.trace.edges().into_iter().map(|e| mdp.edge_label(e)).collect()
    }

    fn reduced_costs<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyAny>>> {
        self.trace.steps.iter().map(|s| fraction(py, &s.z)).collect()
    }

    fn terminal(&self) -> Policy {
        Policy { family: self.family.clone(), policy: self.trace.terminal.clone() }
    }

    fn to_jsonl(&self) -> String {
        let mdp = self.family.mdp();
        self.trace.to_jsonl(mdp, |e| mdp.edge_label(e))
    }
}

fn parse_rule(rule: &str) -> PyResult<PivotRuleSpec> {
    rule.parse().map_err(err)
}

/// Policy iteration from `start` (default: the initial canonical policy).
#[pyfunction]
#[pyo3(signature = (instance, rule = "bland", start = None, max_iters = None))]
fn run(py: Python<'_>, instance: &Instance, rule: &str, start: Option<&Policy>, max_iters: Option<usize>) -> PyResult<Trace> {
    let spec = parse_rule(rule)?;
    let family = instance.inner.clone();
    let start = match start {
        Some(p) => p.policy.clone(),
        None => instance.canonical_policy(0)?.policy.clone(),
    };
    let cap = max_iters.unwrap_or_else(|| match *family {
        Family::B(_) => engine::default_max_iters(family.base().n()),
        Family::D(_) => 4 * engine::default_max_iters(family.base().n()),
    });
    let trace = py.detach(|| engine::run(family.mdp(), &start, &spec, cap)).map_err(err)?;
    Ok(Trace { family, trace })
}

/// Runs policy iteration and the flux LP simplex side by side.
#[pyfunction]
#[pyo3(signature = (instance, rule = "bland", max_iters = 100_000))]
fn lp_compare<'py>(py: Python<'py>, instance: &Instance, rule: &str, max_iters: usize) -> PyResult<Bound<'py, PyDict>> {
    let spec = parse_rule(rule)?;
    let start = instance.canonical_policy(0)?.policy.clone();
    let family = instance.inner.clone();
    let report = py.detach(|| lp::compare(family.mdp(), &start, &spec, max_iters)).map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("switches", report.switches.len())?;
    out.set_item("pivots", report.entering.len())?;
    out.set_item("sequences_match", report.switches == report.entering)?;
    out.set_item("correspondence_failures", report.correspondence_failures.len())?;
    out.set_item("agrees", report.agrees())?;
    Ok(out)
}

/// The LP as exact JSON (`exact=True`) or rounded text.
#[pyfunction]
#[pyo3(signature = (instance, exact = true))]
fn lp_export(instance: &Instance, exact: bool) -> PyResult<String> {
    let flux = lp::build_flux_lp(instance.inner.mdp()).map_err(err)?;
    let mode = if exact { lp::ExportMode::ExactJson } else { lp::ExportMode::LossyText };
    Ok(lp::export_lp(&flux.lp, mode))
}

type ReportRow = (String, u32, bool, String);

/// Property suite up to `n_max`: `(all passed, [(name, n, passed, detail)])`.
#[pyfunction]
#[pyo3(signature = (n_max, samples = 200))]
fn verify(py: Python<'_>, n_max: u32, samples: usize) -> PyResult<(bool, Vec<ReportRow>)> {
    let cfg = SuiteConfig { twin_samples: samples, triple_samples: samples.div_ceil(4), ..SuiteConfig::new(n_max) };
    let reports = py.detach(|| verify_suite(&cfg)).map_err(err)?;
    let rows = reports.iter().map(|r| (r.name.clone(), r.n, r.passed, r.detail.clone())).collect();
    Ok((all_passed(&reports), rows))
}

#[pymodule]
#[pyo3(name = "pivotlab")]
fn pivotlab_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("PivotlabError", m.py().get_type::<PivotlabError>())?;
    m.add_class::<Instance>()?;
    m.add_class::<Policy>()?;
    m.add_class::<Trace>()?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(lp_compare, m)?)?;
    m.add_function(wrap_pyfunction!(lp_export, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}
