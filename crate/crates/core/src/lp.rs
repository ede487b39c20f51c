//! The flux LP of a process and an exact revised simplex over it.
//!
//! One variable per agent edge (sink loop excluded), ordered by Bland
//! number; one unit-supply equality per non-sink agent vertex. A column for
//! `(u,v)` has `+1` at `u` and minus the probability of landing at each agent
//! row after at most one randomization step.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::engine::{PivotRule, PivotRuleSpec};
use crate::mdp::{self, is_weak_unichain, EdgeId, Mdp, Policy, VertexId};
use crate::rational::{self, Rational};
use crate::{Error, Result};

/// `max c^T x` s.t. `A x = b`, `x >= 0`, stored by sparse columns.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinearProgram {
    pub var_names: Vec<String>,
    pub objective: Vec<Rational>,
    pub row_names: Vec<String>,
    pub rhs: Vec<Rational>,
    /// `columns[j]` lists `(row, coefficient)` with ascending rows.
    pub columns: Vec<Vec<(usize, Rational)>>,
}

impl LinearProgram {
    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rhs.len()
    }

    /// `c_j - a_j^T y`.
    pub fn reduced_cost(&self, j: usize, duals: &[Rational]) -> Rational {
        let mut d = self.objective[j].clone();
        for (i, a) in &self.columns[j] {
            d -= a * &duals[*i];
        }
        d
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FluxLp {
    pub lp: LinearProgram,
    pub var_edge: Vec<EdgeId>,
    pub row_vertex: Vec<VertexId>,
    edge_var: HashMap<EdgeId, usize>,
    vertex_row: HashMap<VertexId, usize>,
}

impl FluxLp {
    pub fn var_of_edge(&self, e: EdgeId) -> Option<usize> {
        self.edge_var.get(&e).copied()
    }

    pub fn row_of_vertex(&self, v: VertexId) -> Option<usize> {
        self.vertex_row.get(&v).copied()
    }
}

pub fn build_flux_lp(mdp: &Mdp) -> Result<FluxLp> {
    let sink = mdp.sink();
    let row_vertex: Vec<VertexId> = mdp.agent_vertices().filter(|&v| v != sink).collect();
    let vertex_row: HashMap<VertexId, usize> = row_vertex.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut var_edge: Vec<EdgeId> = mdp.agent_edges().filter(|&e| mdp.edge(e).source != sink).collect();
    var_edge.sort_by_key(|&e| (mdp.edge(e).bland.unwrap_or(u32::MAX), e));
    let edge_var = var_edge.iter().enumerate().map(|(j, &e)| (e, j)).collect();

    let mut columns = Vec::with_capacity(var_edge.len());
    for &e in &var_edge {
        let edge = mdp.edge(e);
        let mut col: BTreeMap<usize, Rational> = BTreeMap::new();
        *col.entry(vertex_row[&edge.source]).or_insert_with(Rational::zero) += Rational::one();
        let mut land = |w: VertexId, p: &Rational| {
            if let Some(&r) = vertex_row.get(&w) {
                *col.entry(r).or_insert_with(Rational::zero) -= p;
            }
        };
        if mdp.is_agent(edge.target) {
            land(edge.target, &Rational::one());
        } else {
            for &f in mdp.out_edges(edge.target) {
                let fe = mdp.edge(f);
                if !mdp.is_agent(fe.target) {
                    return Err(Error::UnsupportedTopology(edge.target.0));
                }
                land(fe.target, &fe.payload);
            }
        }
        columns.push(col.into_iter().filter(|(_, a)| !a.is_zero()).collect());
    }
    let lp = LinearProgram {
        var_names: var_edge.iter().map(|&e| mdp.edge_label(e)).collect(),
        objective: var_edge.iter().map(|&e| mdp.edge(e).payload.clone()).collect(),
        row_names: row_vertex.iter().map(|&v| mdp.vertex(v).label.to_string()).collect(),
        rhs: vec![Rational::one(); row_vertex.len()],
        columns,
    };
    Ok(FluxLp { lp, var_edge, row_vertex, edge_var, vertex_row })
}

/// Basic variables, `vars[i]` being the basic variable of row `i`'s vertex.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Basis {
    pub vars: Vec<usize>,
}

pub fn basis_of_policy(flux: &FluxLp, mdp: &Mdp, policy: &Policy) -> Result<Basis> {
    if !is_weak_unichain(mdp, policy) {
        return Err(Error::InfeasibleBasis("policy is not weak unichain".into()));
    }
    let vars = flux
        .row_vertex
        .iter()
        .map(|&v| {
            let e = policy.active_edge(mdp, v).expect("agent vertex");
            flux.edge_var[&e]
        })
        .collect();
    Ok(Basis { vars })
}

pub fn policy_of_basis(flux: &FluxLp, mdp: &Mdp, basis: &Basis) -> Result<Policy> {
    if basis.vars.len() != flux.row_vertex.len() {
        return Err(Error::InfeasibleBasis(format!(
            "{} basic variables for {} rows",
            basis.vars.len(),
            flux.row_vertex.len()
        )));
    }
    let mut seen = vec![false; flux.row_vertex.len()];
    for &j in &basis.vars {
        let e = *flux.var_edge.get(j).ok_or_else(|| Error::InfeasibleBasis(format!("no variable {j}")))?;
        let row = flux.vertex_row[&mdp.edge(e).source];
        if std::mem::replace(&mut seen[row], true) {
            return Err(Error::InfeasibleBasis(format!("two basic variables leave {}", flux.lp.row_names[row])));
        }
    }
    let policy = Policy::from_edges(mdp, basis.vars.iter().map(|&j| flux.var_edge[j]))
        .map_err(|e| Error::InfeasibleBasis(e.to_string()))?;
    if !is_weak_unichain(mdp, &policy) {
        return Err(Error::InfeasibleBasis("basis matrix is singular".into()));
    }
    Ok(policy)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pivot {
    pub pivot: usize,
    pub entering: usize,
    pub leaving: usize,
    pub reduced_cost: Rational,
    pub objective_after: Rational,
    pub ties: usize,
    pub rule: PivotRule,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimplexTrace {
    pub pivots: Vec<Pivot>,
    pub basis: Basis,
    pub objective: Rational,
}

impl SimplexTrace {
    pub fn entering(&self) -> Vec<usize> {
        self.pivots.iter().map(|p| p.entering).collect()
    }
}

/// State handed to an observer before each pivot (and once at the end).
pub struct SimplexView<'a> {
    pub pivot: usize,
    pub basis: &'a [usize],
    pub primal: &'a [Rational],
    pub duals: &'a [Rational],
    pub reduced: &'a [Rational],
    pub objective: &'a Rational,
}

struct Tableau<'a> {
    lp: &'a LinearProgram,
    basis: Vec<usize>,
    binv: Vec<Vec<Rational>>,
    primal: Vec<Rational>,
}

impl<'a> Tableau<'a> {
    fn new(lp: &'a LinearProgram, basis: &[usize]) -> Result<Self> {
        let m = lp.num_rows();
        let mut mat = vec![vec![Rational::zero(); 2 * m]; m];
        for (k, &j) in basis.iter().enumerate() {
            for (i, a) in &lp.columns[j] {
                mat[*i][k] = a.clone();
            }
        }
        for (i, row) in mat.iter_mut().enumerate() {
            row[m + i] = Rational::one();
        }
        for col in 0..m {
            let p = (col..m)
                .find(|&r| !mat[r][col].is_zero())
                .ok_or_else(|| Error::InfeasibleBasis("basis matrix is singular".into()))?;
            mat.swap(col, p);
            let inv = Rational::one() / &mat[col][col];
            for c in 0..2 * m {
                mat[col][c] = &mat[col][c] * &inv;
            }
            for r in 0..m {
                if r != col && !mat[r][col].is_zero() {
                    let f = mat[r][col].clone();
                    for c in 0..2 * m {
                        let d = &f * &mat[col][c];
                        mat[r][c] -= d;
                    }
                }
            }
        }
        let binv: Vec<Vec<Rational>> = mat.into_iter().map(|row| row[m..].to_vec()).collect();
        let primal: Vec<Rational> = (0..m)
            .map(|k| binv[k].iter().zip(&lp.rhs).map(|(a, b)| a * b).sum())
            .collect();
        if primal.iter().any(|x| x.is_negative()) {
            return Err(Error::InfeasibleBasis("negative basic variable".into()));
        }
        Ok(Tableau { lp, basis: basis.to_vec(), binv, primal })
    }

    fn duals(&self) -> Vec<Rational> {
        let m = self.lp.num_rows();
        let mut y = vec![Rational::zero(); m];
        for (k, &j) in self.basis.iter().enumerate() {
            let c = &self.lp.objective[j];
            if c.is_zero() {
                continue;
            }
            for (i, yi) in y.iter_mut().enumerate() {
                if !self.binv[k][i].is_zero() {
                    *yi += c * &self.binv[k][i];
                }
            }
        }
        y
    }

    /// `B^{-1} a_j`.
    fn direction(&self, j: usize) -> Vec<Rational> {
        let m = self.lp.num_rows();
        let mut d = vec![Rational::zero(); m];
        for (i, a) in &self.lp.columns[j] {
            for (k, dk) in d.iter_mut().enumerate() {
                if !self.binv[k][*i].is_zero() {
                    *dk += a * &self.binv[k][*i];
                }
            }
        }
        d
    }

    /// Minimum ratio, ties to the smallest leaving variable index.
    fn ratio_test(&self, dir: &[Rational]) -> Option<(usize, Rational)> {
        let mut best: Option<(usize, Rational)> = None;
        for (k, dk) in dir.iter().enumerate() {
            if !dk.is_positive() {
                continue;
            }
            let theta = &self.primal[k] / dk;
            let better = match &best {
                None => true,
                Some((b, t)) => match theta.cmp(t) {
                    Ordering::Less => true,
                    Ordering::Equal => self.basis[k] < self.basis[*b],
                    Ordering::Greater => false,
                },
            };
            if better {
                best = Some((k, theta));
            }
        }
        best
    }

    fn pivot(&mut self, j: usize, r: usize, dir: &[Rational], theta: &Rational) {
        let m = self.lp.num_rows();
        let inv = Rational::one() / &dir[r];
        for c in 0..m {
            self.binv[r][c] = &self.binv[r][c] * &inv;
        }
        let pivot_row = self.binv[r].clone();
        for k in 0..m {
            if k == r || dir[k].is_zero() {
                continue;
            }
            for c in 0..m {
                if !pivot_row[c].is_zero() {
                    let d = &dir[k] * &pivot_row[c];
                    self.binv[k][c] -= d;
                }
            }
            let d = &dir[k] * theta;
            self.primal[k] -= d;
        }
        self.primal[r] = theta.clone();
        self.basis[r] = j;
    }

    fn objective(&self) -> Rational {
        self.basis.iter().zip(&self.primal).map(|(&j, x)| &self.lp.objective[j] * x).sum()
    }
}

pub fn simplex_run(lp: &LinearProgram, start: &Basis, spec: &PivotRuleSpec, max_pivots: usize) -> Result<SimplexTrace> {
    simplex_run_with_observer(lp, start, spec, max_pivots, |_| Ok(()))
}

/// Primal simplex from a feasible basis. The entering variable is chosen by
/// the rule: Bland takes the smallest index, Dantzig the largest reduced
/// cost, Largest Increase the largest objective gain of the full step. Ties
/// go to the smallest index. A zero-length step aborts.
pub fn simplex_run_with_observer(
    lp: &LinearProgram,
    start: &Basis,
    spec: &PivotRuleSpec,
    max_pivots: usize,
    mut observer: impl FnMut(&SimplexView<'_>) -> Result<()>,
) -> Result<SimplexTrace> {
    let mut tab = Tableau::new(lp, &start.vars)?;
    let mut rules = spec.stream();
    let mut pivots = Vec::new();
    loop {
        let duals = tab.duals();
        let mut is_basic = vec![false; lp.num_vars()];
        for &j in &tab.basis {
            is_basic[j] = true;
        }
        let reduced: Vec<Rational> = (0..lp.num_vars())
            .map(|j| if is_basic[j] { Rational::zero() } else { lp.reduced_cost(j, &duals) })
            .collect();
        let objective = tab.objective();
        observer(&SimplexView {
            pivot: pivots.len(),
            basis: &tab.basis,
            primal: &tab.primal,
            duals: &duals,
            reduced: &reduced,
            objective: &objective,
        })?;
        let candidates: Vec<usize> = (0..lp.num_vars()).filter(|&j| reduced[j].is_positive()).collect();
        if candidates.is_empty() {
            return Ok(SimplexTrace { pivots, basis: Basis { vars: tab.basis }, objective });
        }
        if pivots.len() >= max_pivots {
            return Err(Error::PivotCap(max_pivots));
        }
        let rule = rules.next().expect("rule stream is infinite");
        let (entering, ties) = match rule {
            PivotRule::Bland => (candidates[0], 0),
            PivotRule::Dantzig => {
                let scores: Vec<Rational> = candidates.iter().map(|&j| reduced[j].clone()).collect();
                argmax(&candidates, &scores)
            }
            PivotRule::LargestIncrease => {
                let scores = candidates
                    .iter()
                    .map(|&j| {
                        let dir = tab.direction(j);
                        let (_, theta) = tab
                            .ratio_test(&dir)
                            .ok_or_else(|| Error::Unbounded(lp.var_names[j].clone()))?;
                        Ok(theta * &reduced[j])
                    })
                    .collect::<Result<Vec<_>>>()?;
                argmax(&candidates, &scores)
            }
        };
        let dir = tab.direction(entering);
        let (r, theta) = tab
            .ratio_test(&dir)
            .ok_or_else(|| Error::Unbounded(lp.var_names[entering].clone()))?;
        if theta.is_zero() {
            return Err(Error::DegeneratePivot { step: pivots.len() + 1, var: lp.var_names[entering].clone() });
        }
        let leaving = tab.basis[r];
        tab.pivot(entering, r, &dir, &theta);
        pivots.push(Pivot {
            pivot: pivots.len() + 1,
            entering,
            leaving,
            reduced_cost: reduced[entering].clone(),
            objective_after: tab.objective(),
            ties,
            rule,
        });
    }
}

fn argmax(candidates: &[usize], scores: &[Rational]) -> (usize, usize) {
    let mut best = 0;
    let mut ties = 0;
    for i in 1..candidates.len() {
        match scores[i].cmp(&scores[best]) {
            Ordering::Greater => {
                best = i;
                ties = 0;
            }
            Ordering::Equal => ties += 1,
            Ordering::Less => {}
        }
    }
    (candidates[best], ties)
}

/// Outcome of running policy iteration and the simplex side by side.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoupledReport {
    pub switches: Vec<EdgeId>,
    pub entering: Vec<EdgeId>,
    /// Visited bases whose LP reduced costs, duals or objective disagree with
    /// the process quantities of the corresponding policy.
    pub correspondence_failures: Vec<String>,
    /// Pivots that did not strictly increase the objective.
    pub non_increasing_pivots: usize,
}

impl CoupledReport {
    pub fn agrees(&self) -> bool {
        self.switches == self.entering && self.correspondence_failures.is_empty() && self.non_increasing_pivots == 0
    }
}

/// Runs policy iteration and the simplex from the same start with the same
/// rule, checking the basis/policy correspondence at every simplex basis.
pub fn compare(mdp: &Mdp, start: &Policy, spec: &PivotRuleSpec, max_iters: usize) -> Result<CoupledReport> {
    let trace = crate::engine::run(mdp, start, spec, max_iters)?;
    let flux = build_flux_lp(mdp)?;
    let basis = basis_of_policy(&flux, mdp, start)?;
    let mut failures = Vec::new();
    let lp_trace = simplex_run_with_observer(&flux.lp, &basis, spec, max_iters, |view| {
        let policy = policy_of_basis(&flux, mdp, &Basis { vars: view.basis.to_vec() })?;
        let values = mdp::solve_values(mdp, &policy)?;
        if view.objective != &mdp::value_sum(mdp, &values) {
            failures.push(format!("objective at pivot {}", view.pivot));
        }
        for (i, &v) in flux.row_vertex.iter().enumerate() {
            if view.duals[i] != values[v] {
                failures.push(format!("dual of {} at pivot {}", flux.lp.row_names[i], view.pivot));
            }
        }
        for (j, &e) in flux.var_edge.iter().enumerate() {
            if view.reduced[j] != mdp::reduced_cost(mdp, &values, e)? {
                failures.push(format!("reduced cost of {} at pivot {}", flux.lp.var_names[j], view.pivot));
            }
        }
        Ok(())
    })?;
    let mut previous = rational::int(0);
    let mut non_increasing = 0;
    let start_values = mdp::solve_values(mdp, start)?;
    previous += mdp::value_sum(mdp, &start_values);
    for p in &lp_trace.pivots {
        if p.objective_after <= previous {
            non_increasing += 1;
        }
        previous = p.objective_after.clone();
    }
    Ok(CoupledReport {
        switches: trace.edges(),
        entering: lp_trace.pivots.iter().map(|p| flux.var_edge[p.entering]).collect(),
        correspondence_failures: failures,
        non_increasing_pivots: non_increasing,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExportMode {
    ExactJson,
    LossyText,
}

#[derive(Serialize, Deserialize)]
struct LpDoc {
    vars: Vec<VarDoc>,
    rows: Vec<RowDoc>,
    sense: String,
}

#[derive(Serialize, Deserialize)]
struct VarDoc {
    name: String,
    #[serde(with = "rational::serde_str")]
    obj: Rational,
}

#[derive(Serialize, Deserialize)]
struct RowDoc {
    name: String,
    #[serde(with = "rational::serde_str")]
    rhs: Rational,
    coeffs: BTreeMap<String, String>,
}

/// Decimal digits beyond which the text export is flagged as lossy.
pub const LOSSY_DIGITS: usize = 40;

pub fn export_lp(lp: &LinearProgram, mode: ExportMode) -> String {
    match mode {
        ExportMode::ExactJson => export_json(lp),
        ExportMode::LossyText => export_text(lp),
    }
}

fn export_json(lp: &LinearProgram) -> String {
    let mut rows: Vec<RowDoc> = lp
        .row_names
        .iter()
        .zip(&lp.rhs)
        .map(|(name, rhs)| RowDoc { name: name.clone(), rhs: rhs.clone(), coeffs: BTreeMap::new() })
        .collect();
    for (j, col) in lp.columns.iter().enumerate() {
        for (i, a) in col {
            rows[*i].coeffs.insert(lp.var_names[j].clone(), rational::format(a));
        }
    }
    let doc = LpDoc {
        vars: lp
            .var_names
            .iter()
            .zip(&lp.objective)
            .map(|(name, obj)| VarDoc { name: name.clone(), obj: obj.clone() })
            .collect(),
        rows,
        sense: "max".into(),
    };
    serde_json::to_string_pretty(&doc).expect("serializable")
}

pub fn import_lp_json(text: &str) -> Result<LinearProgram> {
    let doc: LpDoc = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    if doc.sense != "max" {
        return Err(Error::Parse(format!("unsupported sense {:?}", doc.sense)));
    }
    let index: HashMap<&str, usize> = doc.vars.iter().enumerate().map(|(j, v)| (v.name.as_str(), j)).collect();
    if index.len() != doc.vars.len() {
        return Err(Error::Parse("duplicate variable names".into()));
    }
    let mut columns = vec![Vec::new(); doc.vars.len()];
    for (i, row) in doc.rows.iter().enumerate() {
        for (name, coef) in &row.coeffs {
            let j = *index.get(name.as_str()).ok_or_else(|| Error::Parse(format!("unknown variable {name}")))?;
            columns[j].push((i, rational::parse(coef)?));
        }
    }
    Ok(LinearProgram {
        var_names: doc.vars.iter().map(|v| v.name.clone()).collect(),
        objective: doc.vars.into_iter().map(|v| v.obj).collect(),
        row_names: doc.rows.iter().map(|r| r.name.clone()).collect(),
        rhs: doc.rows.into_iter().map(|r| r.rhs).collect(),
        columns,
    })
}

/// Whether any coefficient lacks a decimal expansion of at most
/// [`LOSSY_DIGITS`] digits.
pub fn needs_lossy_banner(lp: &LinearProgram) -> bool {
    let long = |q: &Rational| rational::exact_decimal_digits(q).is_none_or(|d| d > LOSSY_DIGITS);
    lp.objective.iter().any(long)
        || lp.rhs.iter().any(long)
        || lp.columns.iter().flatten().any(|(_, a)| long(a))
}

fn export_text(lp: &LinearProgram) -> String {
    let dec = |q: &Rational| rational::to_decimal(&q.abs(), LOSSY_DIGITS, 12);
    let term = |first: bool, q: &Rational, var: usize| {
        let sign = if q.is_negative() { "-" } else if first { "" } else { "+" };
        let mag = if q.abs().is_one() { String::new() } else { format!("{} ", dec(q)) };
        if first && sign.is_empty() {
            format!("{mag}x{}", var + 1)
        } else {
            format!("{sign} {mag}x{}", var + 1)
        }
    };
    let mut out = String::new();
    if needs_lossy_banner(lp) {
        out.push_str("\\ ************************************************************\n");
        out.push_str("\\ LOSSY EXPORT: some exact coefficients exceed 40 decimal digits\n");
        out.push_str("\\ and are shown rounded. Use the exact JSON export for solving.\n");
        out.push_str("\\ ************************************************************\n");
    }
    for (j, name) in lp.var_names.iter().enumerate() {
        let _ = writeln!(out, "\\ x{} = {name}", j + 1);
    }
    out.push_str("Maximize\n obj:");
    let mut first = true;
    for (j, c) in lp.objective.iter().enumerate() {
        if !c.is_zero() {
            let _ = write!(out, " {}", term(first, c, j));
            first = false;
        }
    }
    if first {
        out.push_str(" 0 x1");
    }
    out.push_str("\nSubject To\n");
    let mut rows: Vec<Vec<(usize, &Rational)>> = vec![Vec::new(); lp.num_rows()];
    for (j, col) in lp.columns.iter().enumerate() {
        for (i, a) in col {
            rows[*i].push((j, a));
        }
    }
    for (i, row) in rows.iter().enumerate() {
        let _ = write!(out, " r{}:", i + 1);
        for (k, (j, a)) in row.iter().enumerate() {
            let _ = write!(out, " {}", term(k == 0, a, *j));
        }
        let _ = writeln!(out, " = {}", rational::to_decimal(&lp.rhs[i], LOSSY_DIGITS, 12));
    }
    out.push_str("Bounds\n");
    for j in 0..lp.num_vars() {
        let _ = writeln!(out, " x{} >= 0", j + 1);
    }
    out.push_str("End\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::{canonical_policy, optimal_policy_b, EdgeName, FamilyB, FamilyD, Probabilities};
    use crate::engine::PivotRuleSpec;
    use crate::mdp::{reduced_cost, solve_values, value_sum};

    #[test]
    fn sizes_for_four_levels() {
        let b = FamilyB::new(4).unwrap();
        let f = build_flux_lp(b.mdp()).unwrap();
        assert_eq!(f.lp.num_vars(), 25);
        assert_eq!(f.lp.num_rows(), 10);
        // variable order is Bland order
        assert_eq!(f.var_edge[0], b.edge(EdgeName::travel(1)));
        assert_eq!(f.var_edge[4], b.edge(EdgeName::enter(1)));
    }

    #[test]
    fn gadget_columns_fold_the_randomization_step() {
        let d = FamilyD::new(1, &Probabilities::Default).unwrap();
        let f = build_flux_lp(d.mdp()).unwrap();
        let g = &d.gadget_map().gadgets()[0];
        let col = &f.lp.columns[f.var_of_edge(g.commit).unwrap()];
        let at = |v| col.iter().find(|(i, _)| *i == f.row_of_vertex(v).unwrap()).map(|(_, a)| a.clone());
        assert_eq!(at(g.x), Some(Rational::one()));
        assert_eq!(at(g.source), Some(&g.p - Rational::one()));
        assert_eq!(at(g.z), Some(-g.p.clone()));
    }

    #[test]
    fn objective_and_reduced_costs_match_the_process() {
        let b = FamilyB::new(3).unwrap();
        let f = build_flux_lp(b.mdp()).unwrap();
        for x in [0, 3, 5] {
            let p = canonical_policy(&b, x).unwrap();
            let vals = solve_values(b.mdp(), &p).unwrap();
            let basis = basis_of_policy(&f, b.mdp(), &p).unwrap();
            let tab = Tableau::new(&f.lp, &basis.vars).unwrap();
            assert_eq!(tab.objective(), value_sum(b.mdp(), &vals));
            let y = tab.duals();
            for (j, &e) in f.var_edge.iter().enumerate() {
                assert_eq!(f.lp.reduced_cost(j, &y), reduced_cost(b.mdp(), &vals, e).unwrap());
            }
            assert_eq!(policy_of_basis(&f, b.mdp(), &basis).unwrap(), p);
        }
    }

    #[test]
    fn infeasible_bases_are_rejected() {
        let b = FamilyB::new(2).unwrap();
        let f = build_flux_lp(b.mdp()).unwrap();
        let p0 = canonical_policy(&b, 0).unwrap();
        let stuck = p0.apply_switch(b.mdp(), b.edge(EdgeName::board(1))).unwrap();
        assert!(matches!(basis_of_policy(&f, b.mdp(), &stuck), Err(Error::InfeasibleBasis(_))));
        let mut basis = basis_of_policy(&f, b.mdp(), &p0).unwrap();
        let a1_row = f.row_of_vertex(b.a(1)).unwrap();
        basis.vars[a1_row] = f.var_of_edge(b.edge(EdgeName::board(1))).unwrap();
        assert!(matches!(policy_of_basis(&f, b.mdp(), &basis), Err(Error::InfeasibleBasis(_))));
        assert!(Tableau::new(&f.lp, &basis.vars).is_err());
        basis.vars[0] = basis.vars[1];
        assert!(matches!(policy_of_basis(&f, b.mdp(), &basis), Err(Error::InfeasibleBasis(_))));
    }

    #[test]
    fn optimal_start_needs_no_pivots() {
        let b = FamilyB::new(3).unwrap();
        let f = build_flux_lp(b.mdp()).unwrap();
        let basis = basis_of_policy(&f, b.mdp(), &optimal_policy_b(&b)).unwrap();
        let t = simplex_run(&f.lp, &basis, &PivotRuleSpec::Single(PivotRule::Bland), 10).unwrap();
        assert!(t.pivots.is_empty());
    }

    #[test]
    fn coupled_runs_agree_on_small_instances() {
        let b = FamilyB::new(3).unwrap();
        let p0 = canonical_policy(&b, 0).unwrap();
        for rule in [PivotRule::Bland, PivotRule::Dantzig, PivotRule::LargestIncrease] {
            let r = compare(b.mdp(), &p0, &PivotRuleSpec::Single(rule), 1000).unwrap();
            assert!(r.agrees(), "{rule}: {r:?}");
        }
        let d = FamilyD::new(2, &Probabilities::Default).unwrap();
        let tw = d.twin_policy(&p0_of(d.base())).unwrap();
        let r = compare(d.mdp(), &tw, &PivotRuleSpec::seeded(1), 1000).unwrap();
        assert!(r.agrees());
    }

    fn p0_of(b: &FamilyB) -> Policy {
        canonical_policy(b, 0).unwrap()
    }

    #[test]
    fn pivot_cap() {
        let b = FamilyB::new(3).unwrap();
        let f = build_flux_lp(b.mdp()).unwrap();
        let basis = basis_of_policy(&f, b.mdp(), &p0_of(&b)).unwrap();
        assert_eq!(
            simplex_run(&f.lp, &basis, &PivotRuleSpec::Single(PivotRule::Bland), 2),
            Err(Error::PivotCap(2))
        );
    }

    #[test]
    fn degenerate_step_aborts() {
        // max x1 + x2 s.t. x1 - x2 = 0: from basis {x1} the step is zero
        let lp = LinearProgram {
            var_names: vec!["a".into(), "b".into()],
            objective: vec![rational::int(0), rational::int(1)],
            row_names: vec!["r".into()],
            rhs: vec![rational::int(0)],
            columns: vec![vec![(0, rational::int(1))], vec![(0, rational::int(1))]],
        };
        let r = simplex_run(&lp, &Basis { vars: vec![0] }, &PivotRuleSpec::Single(PivotRule::Bland), 5);
        assert_eq!(r, Err(Error::DegeneratePivot { step: 1, var: "b".into() }));
    }

    #[test]
    fn json_round_trip_and_text() {
        let b = FamilyB::new(4).unwrap();
        let f = build_flux_lp(b.mdp()).unwrap();
        let text = export_lp(&f.lp, ExportMode::ExactJson);
        let back = import_lp_json(&text).unwrap();
        assert_eq!(back, f.lp);
        assert_eq!(export_lp(&back, ExportMode::ExactJson), text);
        let lossy = export_lp(&f.lp, ExportMode::LossyText);
        let decls = lossy.lines().filter(|l| l.trim_end().ends_with(">= 0")).count();
        assert_eq!(decls, 25);
        assert!(!lossy.contains("LOSSY"));
        assert!(lossy.contains("obj: 2 x5 - 0.75 x7 + 0.75 x8 + 4 x10"));

        let d = FamilyD::new(2, &Probabilities::Default).unwrap();
        let f = build_flux_lp(d.mdp()).unwrap();
        assert!(needs_lossy_banner(&f.lp));
        assert!(export_lp(&f.lp, ExportMode::LossyText).contains("LOSSY EXPORT"));
        let back = import_lp_json(&export_lp(&f.lp, ExportMode::ExactJson)).unwrap();
        assert_eq!(back, f.lp);
    }
}
