//! Rewriting preserves the branch-summed channel and lands in the promised
//! shape.

use oneway::construct::{construct, construction_expr, phi, ConstructionMode, Variant};
use oneway::fixtures;
use oneway::gen;
use oneway::pattern::{validate_pattern, Angle, Command, Pattern};
use oneway::rewrite::{
    is_normal_form, is_standard_form, normalize, normalize_traced, pauli_simplify, signal_shift,
    standardize, RewriteError,
};
use oneway::sim::{run_pattern, same_channel};
use proptest::prelude::*;

const TOL: f64 = 1e-10;

fn unnormalized(seed: u64, lnn: bool) -> Pattern {
    let mut rng = gen::rng(seed);
    let c = gen::random_circuit(&mut rng, 3, 6, lnn);
    let variant = if lnn { Variant::Rbb } else { Variant::Dkp };
    phi(&construction_expr(&c, variant).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn every_stage_preserves_the_channel(seed in any::<u64>(), lnn in any::<bool>()) {
        let p = unnormalized(seed, lnn);
        prop_assume!(p.qubits().len() <= 10);
        let reference = run_pattern(&p).unwrap();

        let s = standardize(&p).unwrap();
        prop_assert!(is_standard_form(&s));
        prop_assert!(validate_pattern(&s).is_ok());
        prop_assert!(same_channel(&reference, &run_pattern(&s).unwrap(), TOL));

        let ps = pauli_simplify(&s).unwrap();
        prop_assert!(is_standard_form(&ps));
        prop_assert!(same_channel(&reference, &run_pattern(&ps).unwrap(), TOL));

        let ss = signal_shift(&ps).unwrap();
        prop_assert!(is_standard_form(&ss));
        prop_assert!(!ss.commands.iter().any(|c| matches!(c, Command::Shift(..))));
        prop_assert!(same_channel(&reference, &run_pattern(&ss).unwrap(), TOL));

        let n = normalize(&p).unwrap();
        prop_assert!(is_normal_form(&n));
        prop_assert!(same_channel(&reference, &run_pattern(&n).unwrap(), TOL));
        prop_assert_eq!(normalize(&n).unwrap(), n);
    }

    #[test]
    fn normalizing_a_normalized_construction_changes_nothing(seed in any::<u64>()) {
        let mut rng = gen::rng(seed);
        let c = gen::random_circuit(&mut rng, 4, 12, false);
        let p = construct(&c, ConstructionMode { variant: Variant::Dkp, normalize: true }).unwrap();
        prop_assert!(is_normal_form(&p));
        let (again, trace) = normalize_traced(&p).unwrap();
        prop_assert_eq!(again, p);
        prop_assert!(trace.steps.iter().all(|s| !s.rule.is_empty()));
    }
}

#[test]
fn chain_normalizes_to_measurements_with_a_sign() {
    let chain = fixtures::two_gate_chain(Angle::from_units(1), Angle::from_units(-1));
    assert!(!is_standard_form(&chain));
    let n = normalize(&chain).unwrap();
    assert!(is_normal_form(&n));
    // v's X correction on w turns into a sign dependency of w's measurement.
    let w_sign = n.commands.iter().find_map(|c| match c {
        Command::Measure { qubit, sign, .. } if qubit.as_str() == "w" => Some(sign.clone()),
        _ => None,
    });
    assert_eq!(w_sign.unwrap(), oneway::pattern::SignalExpr::single("v"));
    assert!(same_channel(
        &run_pattern(&chain).unwrap(),
        &run_pattern(&n).unwrap(),
        TOL
    ));
}

#[test]
fn pauli_measurements_lose_their_sign() {
    // At −θ2 = π/2 the second measurement is Pauli Y: the sign becomes an
    // outcome flip, absorbed into the output corrections.
    let chain = fixtures::two_gate_chain(Angle::from_units(1), Angle::from_units(-2));
    let n = normalize(&chain).unwrap();
    assert!(is_normal_form(&n));
    assert!(n
        .commands
        .iter()
        .all(|c| !matches!(c, Command::Measure { sign, .. } if !sign.is_empty())));
    assert!(same_channel(
        &run_pattern(&chain).unwrap(),
        &run_pattern(&n).unwrap(),
        TOL
    ));
}

#[test]
fn ill_formed_input_is_refused() {
    let p = Pattern::new(
        ["v"],
        vec![
            Command::measure("v", Angle::ZERO),
            Command::measure("v", Angle::ZERO),
        ],
    );
    assert!(matches!(normalize(&p), Err(RewriteError::IllFormed(_))));
}

#[test]
fn later_stages_demand_standard_form() {
    let chain = fixtures::two_gate_chain(Angle::from_units(1), Angle::from_units(1));
    assert!(matches!(
        signal_shift(&chain),
        Err(RewriteError::NotStandardForm(_))
    ));
}
