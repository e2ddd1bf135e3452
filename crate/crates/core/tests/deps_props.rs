//! Dependency prediction: the matrix formula against the rewrite engine,
//! constructions against the flow found for them, and tamper sensitivity.

mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::sequential_flow_pattern;
use oneway::construct::{construct, ConstructionMode, Variant};
use oneway::deps::{
    check_dependencies, dependency_matrices, gf2_solve, test_dependencies, Gf2Matrix,
};
use oneway::fixtures;
use oneway::flow::{find_mod_star_decomp, FlowProblem};
use oneway::gen;
use oneway::pattern::{geometry_of, Angle, Command, Pattern, Plane, QubitId, SignalExpr};
use oneway::rewrite::{is_normal_form, normalize};
use proptest::prelude::*;

/// A pattern's content up to the order of commands within each phase.
#[derive(Debug, PartialEq, Eq)]
struct Canon {
    prepared: BTreeSet<QubitId>,
    edges: BTreeSet<(QubitId, QubitId)>,
    measures: BTreeMap<QubitId, (Plane, Angle, SignalExpr)>,
    x: BTreeMap<QubitId, SignalExpr>,
    z: BTreeMap<QubitId, SignalExpr>,
}

fn canon(p: &Pattern) -> Canon {
    let mut c = Canon {
        prepared: BTreeSet::new(),
        edges: BTreeSet::new(),
        measures: BTreeMap::new(),
        x: BTreeMap::new(),
        z: BTreeMap::new(),
    };
    for cmd in &p.commands {
        match cmd {
            Command::Prepare(q) => {
                c.prepared.insert(q.clone());
            }
            Command::Entangle(a, b) => {
                c.edges.insert(if a < b {
                    (a.clone(), b.clone())
                } else {
                    (b.clone(), a.clone())
                });
            }
            Command::Measure {
                qubit,
                plane,
                angle,
                sign,
            } => {
                c.measures
                    .insert(qubit.clone(), (*plane, *angle, sign.clone()));
            }
            Command::CorrectX(q, s) => c.x.entry(q.clone()).or_default().xor_with(s),
            Command::CorrectZ(q, s) => c.z.entry(q.clone()).or_default().xor_with(s),
            Command::Shift(..) => panic!("shift in a normal form"),
        }
    }
    c.x.retain(|_, s| !s.is_empty());
    c.z.retain(|_, s| !s.is_empty());
    c
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn predicted_normal_form_matches_rewriting_the_sequential_pattern(
        seed in any::<u64>(), wires in 1usize..=3, extra in 0usize..=8,
    ) {
        let mut rng = gen::rng(seed);
        let inst = gen::random_flow_instance(&mut rng, wires, wires + extra);
        let predicted = inst.pattern().unwrap();
        prop_assert!(is_normal_form(&predicted));
        let rewritten = normalize(&sequential_flow_pattern(&inst.geometry, &inst.f, &inst.angles)).unwrap();
        prop_assert_eq!(canon(&predicted), canon(&rewritten));
        prop_assert!(test_dependencies(&predicted, &inst.f).unwrap());
    }

    #[test]
    fn gf2_solve_inverts_i_plus_t(seed in any::<u64>(), wires in 1usize..=3, extra in 0usize..=8) {
        let mut rng = gen::rng(seed);
        let inst = gen::random_flow_instance(&mut rng, wires, wires + extra);
        let d = dependency_matrices(&inst.geometry, &inst.f, &inst.angles);
        let n = d.names.len();
        let i_plus_t = Gf2Matrix::identity(n).add(&d.t);
        // T is nilpotent for a flow, so (I+T)⁻¹ = Σ T^k.
        let mut walk = Gf2Matrix::identity(n);
        let mut power = Gf2Matrix::identity(n);
        for _ in 0..n {
            power = power.mul(&d.t);
            walk = walk.add(&power);
        }
        prop_assert!(power.is_zero());
        let target = walk.mul(&d.f);
        for col in 0..n {
            let x = gf2_solve(&i_plus_t, &d.f.column(col)).unwrap();
            prop_assert_eq!(x, target.column(col));
        }
    }

    #[test]
    fn constructions_pass_with_the_flow_found_for_them(seed in any::<u64>(), lnn in any::<bool>()) {
        let mut rng = gen::rng(seed);
        let c = gen::random_circuit(&mut rng, if lnn { 3 } else { 4 }, 12, lnn);
        let variant = if lnn { Variant::Rbb } else { Variant::Dkp };
        let p = construct(&c, ConstructionMode { variant, normalize: true }).unwrap();
        let flow = find_mod_star_decomp(&FlowProblem::from_pattern(&p));
        prop_assert!(flow.is_some());
        prop_assert_eq!(check_dependencies(&p, &flow.unwrap().f).unwrap(), None);
    }
}

/// Every normal-form pattern obtained by toggling one qubit in one
/// dependency set (creating or dropping a correction as needed).
fn single_bit_tampers(p: &Pattern) -> Vec<(String, Pattern)> {
    let mut out = Vec::new();
    let mut measured_before = Vec::new();
    for (i, cmd) in p.commands.iter().enumerate() {
        if let Command::Measure { qubit, .. } = cmd {
            for q in &measured_before {
                let mut t = p.clone();
                t.commands[i]
                    .signal_mut()
                    .unwrap()
                    .toggle(QubitId::clone(q));
                out.push((format!("sign of {qubit} toggles {q}"), t));
            }
            measured_before.push(qubit.clone());
        }
    }
    for o in p.outputs() {
        for kind in ["X", "Z"] {
            for q in &measured_before {
                let mut t = p.clone();
                let pos = t.commands.iter().position(|c| match (kind, c) {
                    ("X", Command::CorrectX(x, _)) | ("Z", Command::CorrectZ(x, _)) => *x == o,
                    _ => false,
                });
                match pos {
                    Some(i) => t.commands[i].signal_mut().unwrap().toggle(q.clone()),
                    None => t.commands.push(match kind {
                        "X" => Command::CorrectX(o.clone(), SignalExpr::single(q.clone())),
                        _ => Command::CorrectZ(o.clone(), SignalExpr::single(q.clone())),
                    }),
                }
                out.push((format!("{kind} on {o} toggles {q}"), t));
            }
        }
    }
    out
}

#[test]
fn every_single_bit_tamper_is_caught() {
    let normal_forms = [
        fixtures::f_j(Angle::from_units(1)),
        fixtures::f_zz(),
        fixtures::f_zzz3(),
        normalize(&fixtures::two_gate_chain(
            Angle::from_units(1),
            Angle::from_units(-2),
        ))
        .unwrap(),
        fixtures::saturating(),
    ];
    for p in normal_forms {
        let f = find_mod_star_decomp(&FlowProblem::from_pattern(&p))
            .unwrap()
            .f;
        assert!(test_dependencies(&p, &f).unwrap());
        let tampers = single_bit_tampers(&p);
        assert!(!tampers.is_empty());
        for (what, t) in tampers {
            // A tamper leaving normal form is refused outright.
            let caught = !matches!(test_dependencies(&t, &f), Ok(true));
            assert!(
                caught,
                "{what} went unnoticed in\n{}",
                oneway::text::print_pattern(&p)
            );
        }
    }
}

#[test]
fn tampered_fixtures_are_rejected_semantically() {
    let p = fixtures::saturating();
    for (what, t) in single_bit_tampers(&p) {
        assert!(
            oneway::extract::semantic(&t).is_none() || !is_normal_form(&t),
            "{what}"
        );
    }
    let (g, _) = geometry_of(&p);
    assert_eq!(g.len(), 5);
}
