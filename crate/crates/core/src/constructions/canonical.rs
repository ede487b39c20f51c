//! Canonical policies `pi_x` of the level family, their phases and the
//! predicted Bland trajectory.

use std::fmt;

use super::bits::{big_l, bit, ell0, ell1, msb};
use super::family_b::{EdgeName, FamilyB};
use crate::mdp::Policy;
use crate::{Error, Result};

/// The defining conditions of a canonical policy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Clause {
    /// `x = 0`: travel(1) plus every skip and leave.
    Zero,
    /// travel towards the least significant set bit.
    Travel,
    /// leave(m) and every level above the most significant set bit idle.
    AboveTop,
    /// enter(i) for a set bit.
    Enter(u32),
    /// bit 2 set.
    Second(u32),
    /// bit i set, bit i-1 set.
    Chained(u32),
    /// bit i set, bit i-1 clear.
    Gap(u32),
    /// boarding below the gap of bit i.
    Board(u32),
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Clause::Zero => write!(f, "<0>"),
            Clause::Travel => write!(f, "<1>"),
            Clause::AboveTop => write!(f, "<2>"),
            Clause::Enter(i) => write!(f, "<a:{i}>"),
            Clause::Second(i) => write!(f, "<b:{i}>"),
            Clause::Chained(i) => write!(f, "<c:{i}>"),
            Clause::Gap(i) => write!(f, "<d1:{i}>"),
            Clause::Board(i) => write!(f, "<d2:{i}>"),
        }
    }
}

fn check_range(n: u32, x: u64) -> Result<()> {
    if n == 0 || n > 60 || x >= 1u64 << n {
        return Err(Error::Domain(format!("x = {x} out of range for n = {n}")));
    }
    Ok(())
}

/// Every edge a canonical policy must contain, tagged with the clause
/// demanding it.
pub fn canonical_requirements(n: u32, x: u64) -> Result<Vec<(Clause, EdgeName)>> {
    check_range(n, x)?;
    let mut req = Vec::new();
    if x == 0 {
        req.push((Clause::Zero, EdgeName::travel(1)));
        for i in 1..=n {
            req.push((Clause::Zero, EdgeName::skip(i)));
            req.push((Clause::Zero, EdgeName::leave(i)));
        }
        return Ok(req);
    }
    req.push((Clause::Travel, EdgeName::travel(ell1(x)?)));
    let m = msb(x)?;
    req.push((Clause::AboveTop, EdgeName::leave(m)));
    for i in m + 1..=n {
        req.push((Clause::AboveTop, EdgeName::skip(i)));
        req.push((Clause::AboveTop, EdgeName::leave(i)));
    }
    for i in (1..=n).filter(|&i| bit(x, i)) {
        req.push((Clause::Enter(i), EdgeName::enter(i)));
        if i == 2 {
            req.push((Clause::Second(i), EdgeName::leave(1)));
            if !bit(x, 1) {
                req.push((Clause::Second(i), EdgeName::skip(1)));
            }
        }
        if i >= 3 {
            if bit(x, i - 1) {
                req.push((Clause::Chained(i), EdgeName::leave(i - 1)));
            } else {
                req.push((Clause::Gap(i), EdgeName::stay(i - 1)));
                req.push((Clause::Gap(i), EdgeName::skip(i - 1)));
                req.push((Clause::Gap(i), EdgeName::leave(i - 2)));
                let l = big_l(i, x)?;
                for j in l + 1..=i - 2 {
                    req.push((Clause::Board(i), EdgeName::board(j)));
                    req.push((Clause::Board(i), EdgeName::stay(j - 1)));
                }
                if l == 1 && !bit(x, 1) {
                    req.push((Clause::Board(i), EdgeName::board(1)));
                }
            }
        }
    }
    Ok(req)
}

/// The canonical policy `pi_x`. Fails if the conditions assign some vertex
/// twice or leave one unassigned.
pub fn canonical_policy(b: &FamilyB, x: u64) -> Result<Policy> {
    let req = canonical_requirements(b.n(), x)?;
    let mdp = b.mdp();
    let mut seen = vec![None; mdp.num_vertices()];
    for (_, name) in &req {
        let e = b.edge(*name);
        let v = mdp.edge(e).source;
        match seen[v.0] {
            Some(prev) if prev != e => {
                return Err(Error::Invariant(format!(
                    "canonical policy {x}: {} and {} leave the same vertex",
                    b.name(prev),
                    name
                )))
            }
            _ => seen[v.0] = Some(e),
        }
    }
    Policy::from_edges(mdp, req.iter().map(|(_, name)| b.edge(*name))).map_err(|e| {
        Error::Invariant(format!("canonical policy {x} is incomplete: {e}"))
    })
}

/// Requirements of `pi_x` that `policy` fails.
pub fn canonical_violations(b: &FamilyB, policy: &Policy, x: u64) -> Result<Vec<(Clause, EdgeName)>> {
    Ok(canonical_requirements(b.n(), x)?
        .into_iter()
        .filter(|(_, name)| !policy.is_active(b.mdp(), b.edge(*name)))
        .collect())
}

/// `Some(x)` if `policy` is `pi_x`.
pub fn recognize_canonical(b: &FamilyB, policy: &Policy) -> Option<u64> {
    let x = (1..=b.n())
        .filter(|&i| policy.is_active(b.mdp(), b.edge(EdgeName::enter(i))))
        .fold(0u64, |acc, i| acc | 1 << (i - 1));
    let candidate = canonical_policy(b, x).ok()?;
    (candidate == *policy).then_some(x)
}

/// Switches turning `pi_x` into `pi_{x+1}` for odd `x <= 2^n - 3`.
pub fn canonical_phases(n: u32, x: u64) -> Result<Vec<EdgeName>> {
    check_range(n, x)?;
    if x.is_multiple_of(2) || x + 3 > 1u64 << n {
        return Err(Error::Domain(format!("phases need an odd x <= 2^n - 3, got {x}")));
    }
    let l = ell0(x);
    let m = msb(x)?;
    let mut out = Vec::new();
    if bit(x, l + 1) {
        out.push(EdgeName::leave(l));
    }
    if bit(x, l + 1) || l > m {
        out.push(EdgeName::stay(l - 1));
    }
    out.push(EdgeName::enter(l));
    out.push(EdgeName::travel(l));
    if l >= 3 {
        out.extend((1..=l - 2).map(EdgeName::board));
    }
    out.push(EdgeName::skip(l - 1));
    if l >= 4 {
        out.extend((1..=l - 3).rev().map(EdgeName::stay));
    }
    if l == 2 {
        out.push(EdgeName::leave(1));
    }
    Ok(out)
}

/// Switches turning `pi_x` into `pi_{x+1}` for even `x`.
pub fn even_transition(n: u32, x: u64) -> Result<Vec<EdgeName>> {
    check_range(n, x)?;
    if x % 2 == 1 || x == (1u64 << n) - 1 {
        return Err(Error::Domain(format!("even transition needs an even x < 2^n - 1, got {x}")));
    }
    Ok(if x == 0 {
        vec![EdgeName::enter(1)]
    } else {
        vec![EdgeName::enter(1), EdgeName::travel(1)]
    })
}

/// Predicted Bland sequence from `pi_0` to `pi_{2^n - 1}`.
pub fn predicted_bland_trace(n: u32) -> Result<Vec<EdgeName>> {
    check_range(n, 0)?;
    let mut out = Vec::new();
    for x in 0..(1u64 << n) - 1 {
        if x % 2 == 0 {
            out.extend(even_transition(n, x)?);
        } else {
            out.extend(canonical_phases(n, x)?);
        }
    }
    Ok(out)
}

/// stay(n), travel(1), every enter and leave(1..n-1).
pub fn optimal_policy_b(b: &FamilyB) -> Policy {
    let n = b.n();
    let mut names = vec![EdgeName::stay(n), EdgeName::travel(1)];
    names.extend((1..=n).map(EdgeName::enter));
    names.extend((1..n).map(EdgeName::leave));
    b.policy(&names).expect("complete policy")
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn names(list: &[&str]) -> BTreeSet<EdgeName> {
        list.iter().map(|s| s.parse().unwrap()).collect()
    }

    #[test]
    fn pi_7_and_pi_8() {
        let b = FamilyB::new(4).unwrap();
        let p7: BTreeSet<_> = b.active_names(&canonical_policy(&b, 7).unwrap()).into_iter().collect();
        let want = names(&[
            "enter(1)", "enter(2)", "enter(3)", "leave(1)", "leave(2)", "leave(3)", "skip(4)", "leave(4)",
            "travel(1)",
        ]);
        assert_eq!(p7, want);
        let p8: BTreeSet<_> = b.active_names(&canonical_policy(&b, 8).unwrap()).into_iter().collect();
        let want = names(&[
            "travel(4)", "enter(4)", "leave(4)", "stay(3)", "skip(3)", "leave(2)", "board(2)", "stay(1)",
            "board(1)",
        ]);
        assert_eq!(p8, want);
    }

    #[test]
    fn pi_0() {
        let b = FamilyB::new(3).unwrap();
        let p0: BTreeSet<_> = b.active_names(&canonical_policy(&b, 0).unwrap()).into_iter().collect();
        let want = names(&[
            "travel(1)", "skip(1)", "skip(2)", "skip(3)", "leave(1)", "leave(2)", "leave(3)",
        ]);
        assert_eq!(p0, want);
    }

    #[test]
    fn every_canonical_policy_is_well_defined_and_recognized() {
        for n in 1..=8 {
            let b = FamilyB::new(n).unwrap();
            for x in 0..1u64 << n {
                let p = canonical_policy(&b, x).unwrap();
                assert!(canonical_violations(&b, &p, x).unwrap().is_empty());
                assert_eq!(recognize_canonical(&b, &p), Some(x), "n={n} x={x}");
            }
        }
    }

    #[test]
    fn recognition_rejects_non_canonical() {
        let b = FamilyB::new(4).unwrap();
        assert_eq!(recognize_canonical(&b, &optimal_policy_b(&b)), None);
        let p7 = canonical_policy(&b, 7).unwrap();
        let flipped = p7.apply_switch(b.mdp(), b.edge(EdgeName::stay(1))).unwrap();
        assert_eq!(recognize_canonical(&b, &flipped), None);
        for n in 1..=6 {
            let b = FamilyB::new(n).unwrap();
            assert_eq!(recognize_canonical(&b, &optimal_policy_b(&b)), None);
        }
    }

    #[test]
    fn phases_examples() {
        let got: Vec<String> = canonical_phases(4, 7).unwrap().iter().map(|e| e.to_string()).collect();
        assert_eq!(got, ["stay(3)", "enter(4)", "travel(4)", "board(1)", "board(2)", "skip(3)", "stay(1)"]);
        let got: Vec<String> = canonical_phases(2, 1).unwrap().iter().map(|e| e.to_string()).collect();
        assert_eq!(got, ["stay(1)", "enter(2)", "travel(2)", "skip(1)", "leave(1)"]);
        assert!(canonical_phases(4, 8).is_err());
        assert!(canonical_phases(4, 15).is_err());
        assert!(canonical_phases(4, 16).is_err());
        assert!(canonical_phases(1, 1).is_err());
    }

    #[test]
    fn transitions_reach_the_successor() {
        for n in 1..=8 {
            let b = FamilyB::new(n).unwrap();
            for x in 0..(1u64 << n) - 1 {
                let steps = if x % 2 == 0 { even_transition(n, x) } else { canonical_phases(n, x) }.unwrap();
                let mut p = canonical_policy(&b, x).unwrap();
                for s in steps {
                    p = p.apply_switch(b.mdp(), b.edge(s)).unwrap();
                }
                assert_eq!(p, canonical_policy(&b, x + 1).unwrap(), "n={n} x={x}");
            }
        }
    }

    #[test]
    fn predicted_traces() {
        let got: Vec<String> = predicted_bland_trace(1).unwrap().iter().map(|e| e.to_string()).collect();
        assert_eq!(got, ["enter(1)"]);
        let got: Vec<String> = predicted_bland_trace(2).unwrap().iter().map(|e| e.to_string()).collect();
        assert_eq!(
            got,
            ["enter(1)", "stay(1)", "enter(2)", "travel(2)", "skip(1)", "leave(1)", "enter(1)", "travel(1)"]
        );
        // x = 0..6 by hand: 1, 5, 2, 5, 2, 6, 2
        assert_eq!(predicted_bland_trace(3).unwrap().len(), 23);
        let oracle: usize = (0..7u64)
            .map(|x| match x {
                0 => 1,
                _ if x % 2 == 0 => 2,
                _ => canonical_phases(3, x).unwrap().len(),
            })
            .sum();
        assert_eq!(oracle, 23);
    }
}
