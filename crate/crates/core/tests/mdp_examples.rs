use num_traits::{One, Signed, Zero};
use pivotlab::constructions::{canonical_policy, optimal_policy_b, EdgeName, EdgeRole, FamilyB, FamilyD, Probabilities};
use pivotlab::mdp::{improving_switches, is_weak_unichain, reduced_cost, solve_values, value_sum};
use pivotlab::rational::{int, pow2, ratio};
use pivotlab::{Error, Mdp, Policy, Rational, VertexId};

/// Dense Bellman system over every vertex, solved by plain elimination.
fn oracle_values(mdp: &Mdp, policy: &Policy) -> Vec<Rational> {
    let n = mdp.num_vertices();
    let mut a = vec![vec![Rational::zero(); n + 1]; n];
    for (u, row) in a.iter_mut().enumerate() {
        let v = VertexId(u);
        row[u] = Rational::one();
        if v == mdp.sink() {
            continue;
        }
        if mdp.is_agent(v) {
            let e = mdp.edge(policy.active_edge(mdp, v).unwrap());
            row[e.target.0] -= Rational::one();
            row[n] = e.payload.clone();
        } else {
            for &f in mdp.out_edges(v) {
                let e = mdp.edge(f);
                row[e.target.0] -= &e.payload;
            }
        }
    }
    for c in 0..n {
        let p = (c..n).find(|&r| !a[r][c].is_zero()).expect("non-singular");
        a.swap(c, p);
        let pivot = a[c][c].clone();
        for x in a[c].iter_mut() {
            *x /= &pivot;
        }
        let prow = a[c].clone();
        for (r, row) in a.iter_mut().enumerate() {
            if r != c && !row[c].is_zero() {
                let f = row[c].clone();
                for (x, p) in row.iter_mut().zip(&prow) {
                    *x -= &f * p;
                }
            }
        }
    }
    a.into_iter().map(|row| row[n].clone()).collect()
}

#[test]
fn values_at_pi_0_are_zero() {
    let b = FamilyB::new(4).unwrap();
    let vals = solve_values(b.mdp(), &canonical_policy(&b, 0).unwrap()).unwrap();
    assert!(vals.as_slice().iter().all(Zero::is_zero));
    assert!(value_sum(b.mdp(), &vals).is_zero());
}

#[test]
fn optimal_transport_value_and_value_sum() {
    let b = FamilyB::new(4).unwrap();
    let opt = optimal_policy_b(&b);
    let vals = solve_values(b.mdp(), &opt).unwrap();
    assert_eq!(vals[b.t()], ratio(123, 4));
    let oracle = oracle_values(b.mdp(), &opt);
    assert_eq!(vals.as_slice(), &oracle[..]);
    let sum: Rational = b.mdp().agent_vertices().map(|v| oracle[v.0].clone()).sum();
    assert_eq!(b.mdp().agent_vertices().count(), 11);
    assert_eq!(sum, ratio(811, 4));
    assert_eq!(value_sum(b.mdp(), &vals), sum);
    assert!(improving_switches(b.mdp(), &vals).is_empty());
}

#[test]
fn twin_of_optimum_matches_dense_oracle() {
    let d = FamilyD::new(4, &Probabilities::Default).unwrap();
    let twin = d.twin_policy(&optimal_policy_b(d.base())).unwrap();
    let vals = solve_values(d.mdp(), &twin).unwrap();
    assert_eq!(vals[d.base().t()], ratio(123, 4));
    assert_eq!(vals.as_slice(), &oracle_values(d.mdp(), &twin)[..]);
    assert!(improving_switches(d.mdp(), &vals).is_empty());
}

#[test]
fn reduced_costs_at_pi_0() {
    let b = FamilyB::new(4).unwrap();
    let p0 = canonical_policy(&b, 0).unwrap();
    let vals = solve_values(b.mdp(), &p0).unwrap();
    assert_eq!(reduced_cost(b.mdp(), &vals, b.edge(EdgeName::enter(1))).unwrap(), int(2));
    for e in p0.active_edges(b.mdp()) {
        assert!(reduced_cost(b.mdp(), &vals, e).unwrap().is_zero());
    }
    // every agent edge by brute force: z = r because all values vanish
    let improving = improving_switches(b.mdp(), &vals);
    let brute: Vec<_> = b
        .mdp()
        .agent_edges()
        .filter(|&e| b.mdp().edge(e).payload.is_positive() && !p0.is_active(b.mdp(), e))
        .map(|e| (e, b.mdp().edge(e).payload.clone()))
        .collect();
    assert_eq!(improving.len(), 8);
    let mut sorted = improving.clone();
    sorted.sort_by_key(|(e, _)| *e);
    assert_eq!(sorted, brute);
    for i in 1..=4 {
        let z = |name| improving.iter().find(|(e, _)| b.name(*e) == name).map(|(_, z)| z.clone());
        assert_eq!(z(EdgeName::enter(i)), Some(pow2(i as i64)));
        assert_eq!(z(EdgeName::stay(i)), Some(ratio(3, 4)));
    }
}

#[test]
fn gadget_reduced_cost_at_twin_of_pi_0() {
    let d = FamilyD::new(4, &Probabilities::Default).unwrap();
    let twin = d.twin_policy(&canonical_policy(d.base(), 0).unwrap()).unwrap();
    let vals = solve_values(d.mdp(), &twin).unwrap();
    let g = d.gadget_by_name(EdgeName::enter(1));
    assert_eq!(reduced_cost(d.mdp(), &vals, g.commit).unwrap(), pow2(-17));
    assert_eq!(vals.as_slice(), &oracle_values(d.mdp(), &twin)[..]);
    for (e, _) in improving_switches(d.mdp(), &vals) {
        assert!(matches!(d.role(e), EdgeRole::Commit(_)));
    }
    assert!(d.base().mdp().agent_vertices().all(|v| vals[v].is_zero()));
}

#[test]
fn switches_change_one_vertex() {
    let b = FamilyB::new(4).unwrap();
    let p0 = canonical_policy(&b, 0).unwrap();
    let p1 = p0.apply_switch(b.mdp(), b.edge(EdgeName::enter(1))).unwrap();
    assert_eq!(p1, canonical_policy(&b, 1).unwrap());
    let same = p0.apply_switch(b.mdp(), b.edge(EdgeName::travel(1))).unwrap();
    assert_eq!(same, p0);
    assert_eq!(
        p0.apply_switch(b.mdp(), b.edge(EdgeName::DUMMY_TO_SINK)),
        Err(Error::NotSwitchable { vertex: b.d().0 })
    );

    let d = FamilyD::new(4, &Probabilities::Default).unwrap();
    let twin = d.twin_policy(&canonical_policy(d.base(), 0).unwrap()).unwrap();
    assert!(d.base_of_twin(&twin).is_some());
    let g = d.gadget_by_name(EdgeName::enter(1));
    let moved = twin.apply_switch(d.mdp(), g.commit).unwrap();
    assert_eq!(d.base_of_twin(&moved), None);
}

#[test]
fn weak_unichain_examples() {
    let b = FamilyB::new(4).unwrap();
    assert!(is_weak_unichain(b.mdp(), &canonical_policy(&b, 0).unwrap()));
    let mut names = vec![EdgeName::travel(1)];
    names.extend((1..=4).flat_map(|i| [EdgeName::skip(i), EdgeName::stay(i)]));
    let chain = b.policy(&names).unwrap();
    assert!(is_weak_unichain(b.mdp(), &chain));
    assert!(solve_values(b.mdp(), &chain).is_ok());

    let stuck = canonical_policy(&b, 0).unwrap().apply_switch(b.mdp(), b.edge(EdgeName::board(1))).unwrap();
    assert!(!is_weak_unichain(b.mdp(), &stuck));
    assert!(matches!(solve_values(b.mdp(), &stuck), Err(Error::NotWeakUnichain { .. })));
}

#[test]
fn not_agent_edge_is_an_error() {
    let d = FamilyD::new(1, &Probabilities::Default).unwrap();
    let vals = solve_values(d.mdp(), &d.twin_policy(&canonical_policy(d.base(), 0).unwrap()).unwrap()).unwrap();
    let y = d.gadget_map().gadgets()[0].y;
    let e = d.mdp().out_edges(y)[0];
    assert_eq!(reduced_cost(d.mdp(), &vals, e), Err(Error::NotAgentEdge { edge: e.0 }));
}
