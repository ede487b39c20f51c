use pivotlab::constructions::{canonical_policy, optimal_policy_b, FamilyB, FamilyD, Probabilities};
use pivotlab::engine::{run, PivotRule, PivotRuleSpec};
use pivotlab::lp::{
    basis_of_policy, build_flux_lp, compare, export_lp, import_lp_json, policy_of_basis, simplex_run, Basis, ExportMode,
};
use pivotlab::verify::random_weak_unichain_policy;
use pivotlab::{Edge, Error, Label, Mdp, Vertex, VertexId};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn bland_pivot_count_equals_switch_count() {
    for n in 1..=5 {
        let b = FamilyB::new(n).unwrap();
        let f = build_flux_lp(b.mdp()).unwrap();
        let p0 = canonical_policy(&b, 0).unwrap();
        let spec = PivotRuleSpec::Single(PivotRule::Bland);
        let t = simplex_run(&f.lp, &basis_of_policy(&f, b.mdp(), &p0).unwrap(), &spec, 1 << 12).unwrap();
        let pi = run(b.mdp(), &p0, &spec, 1 << 12).unwrap();
        assert_eq!(t.pivots.len(), pi.total_switches());
        assert!(t.pivots.iter().all(|p| p.ties == 0));
        assert_eq!(policy_of_basis(&f, b.mdp(), &t.basis).unwrap(), optimal_policy_b(&b));
    }
}

#[test]
fn entering_sequences_follow_switches_on_gadgets() {
    let d = FamilyD::new(3, &Probabilities::Default).unwrap();
    let start = d.twin_policy(&canonical_policy(d.base(), 0).unwrap()).unwrap();
    let r = compare(d.mdp(), &start, &PivotRuleSpec::Single(PivotRule::Dantzig), 10_000).unwrap();
    assert!(r.agrees());
    assert_eq!(r.entering.len(), 72);
}

#[test]
fn basis_round_trip_on_random_policies() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for n in 1..=5 {
        let b = FamilyB::new(n).unwrap();
        let f = build_flux_lp(b.mdp()).unwrap();
        for _ in 0..200 {
            let p = random_weak_unichain_policy(b.mdp(), &mut rng);
            let basis = basis_of_policy(&f, b.mdp(), &p).unwrap();
            assert_eq!(policy_of_basis(&f, b.mdp(), &basis).unwrap(), p);
        }
    }
}

#[test]
fn optimal_basis_needs_no_pivot() {
    let b = FamilyB::new(4).unwrap();
    let f = build_flux_lp(b.mdp()).unwrap();
    let basis = basis_of_policy(&f, b.mdp(), &optimal_policy_b(&b)).unwrap();
    for rule in PivotRule::ALL {
        assert!(simplex_run(&f.lp, &basis, &PivotRuleSpec::Single(rule), 5).unwrap().pivots.is_empty());
    }
}

#[test]
fn wrong_sized_basis_is_rejected() {
    let b = FamilyB::new(2).unwrap();
    let f = build_flux_lp(b.mdp()).unwrap();
    assert!(matches!(policy_of_basis(&f, b.mdp(), &Basis { vars: vec![0] }), Err(Error::InfeasibleBasis(_))));
}

#[test]
fn chained_randomization_is_unsupported() {
    // a -> r1 -> r2 -> s
    let vertices = vec![
        Vertex::agent(Label::Sink),
        Vertex::agent(Label::Named("a".into())),
        Vertex::random(Label::Named("r1".into())),
        Vertex::random(Label::Named("r2".into())),
    ];
    let e = |s: usize, t: usize| Edge { source: VertexId(s), target: VertexId(t), payload: pivotlab::rational::int(if s == 1 { 0 } else { 1 }), bland: None };
    let mut edges = vec![e(0, 0), e(1, 2), e(2, 3), e(3, 0)];
    edges[0].payload = pivotlab::rational::int(0);
    let mdp = Mdp::new(vertices, edges, VertexId(0)).unwrap();
    assert_eq!(build_flux_lp(&mdp).err(), Some(Error::UnsupportedTopology(2)));
}

#[test]
fn exports() {
    let b = FamilyB::new(4).unwrap();
    let f = build_flux_lp(b.mdp()).unwrap();
    let json = export_lp(&f.lp, ExportMode::ExactJson);
    assert_eq!(import_lp_json(&json).unwrap(), f.lp);
    let text = export_lp(&f.lp, ExportMode::LossyText);
    let bounds = text.split("Bounds\n").nth(1).unwrap();
    assert_eq!(bounds.lines().filter(|l| l.ends_with(">= 0")).count(), 25);
    assert!(text.starts_with("\\ x1 = t->a1"));

    let d = FamilyD::new(4, &Probabilities::Default).unwrap();
    let f = build_flux_lp(d.mdp()).unwrap();
    let text = export_lp(&f.lp, ExportMode::LossyText);
    assert!(text.starts_with("\\ ****"));
    assert!(text.contains("LOSSY EXPORT"));
    assert!(import_lp_json("{\"vars\":[],\"rows\":[],\"sense\":\"min\"}").is_err());
}
