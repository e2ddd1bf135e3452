//! Circuit → pattern → circuit: the extracted circuit is isomorphic to the
//! input's normal form, no larger, and computes the same unitary.

mod common;

use common::{circuit_matrix, phase_distance};
use oneway::circuit::{Circuit, Gate};
use oneway::cli::{roundtrip, Config, Counts};
use oneway::construct::{construct, ConstructionMode, Variant};
use oneway::extract::{reference_expr, semantic, semantic_report, NoFlowStage, Rejection};
use oneway::fixtures;
use oneway::gen;
use oneway::pattern::QubitId;
use oneway::stable_index::{isomorphic, to_circuit};
use proptest::prelude::*;

/// The extracted circuit with its wires renamed back to the source
/// circuit's (each pattern input is `<wire>.0`) and listed in the same
/// order.
fn rename_to_source(extracted: &Circuit, source: &Circuit) -> Circuit {
    let back =
        |q: &QubitId| QubitId::new(q.as_str().strip_suffix(".0").expect("pattern input name"));
    let gates = extracted
        .gates
        .iter()
        .map(|g| match g {
            Gate::H(q) => Gate::H(back(q)),
            Gate::T(q) => Gate::T(back(q)),
            Gate::Tdg(q) => Gate::Tdg(back(q)),
            Gate::J(t, q) => Gate::J(*t, back(q)),
            Gate::CZ(a, b) => Gate::CZ(back(a), back(b)),
            Gate::ZZ(a, b) => Gate::ZZ(back(a), back(b)),
            Gate::KetPlus(q) => Gate::KetPlus(back(q)),
        })
        .collect();
    let mut renamed: Vec<QubitId> = extracted.inputs.iter().map(back).collect();
    renamed.sort();
    let mut expected = source.inputs.clone();
    expected.sort();
    assert_eq!(
        renamed, expected,
        "extracted wires differ from the source's"
    );
    Circuit {
        inputs: source.inputs.clone(),
        gates,
    }
}

fn check(c: &Circuit, variant: Variant) -> Result<(), TestCaseError> {
    let p = construct(
        c,
        ConstructionMode {
            variant,
            normalize: true,
        },
    )
    .unwrap();
    let report = semantic_report(&p);
    prop_assert!(report.is_ok(), "rejected: {}", report.unwrap_err());
    let x = report.unwrap();
    let reference = reference_expr(c, variant).unwrap();
    prop_assert!(
        isomorphic(&x.expr, &reference).is_some(),
        "not isomorphic to the normal form"
    );
    prop_assert!(Counts::of(&x.expr).within(&Counts::of(&reference)));
    let extracted = rename_to_source(&to_circuit(&x.expr).unwrap(), c);
    let d = phase_distance(&circuit_matrix(&extracted), &circuit_matrix(c)).unwrap();
    prop_assert!(d <= 1e-9, "unitaries differ by {d}");
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dkp_round_trips(seed in any::<u64>()) {
        let mut rng = gen::rng(seed);
        check(&gen::random_circuit(&mut rng, 4, 12, false), Variant::Dkp)?;
    }

    #[test]
    fn rbb_round_trips(seed in any::<u64>()) {
        let mut rng = gen::rng(seed);
        check(&gen::random_circuit(&mut rng, 3, 12, true), Variant::Rbb)?;
    }
}

#[test]
fn fixture_circuits_round_trip_with_the_library_checker() {
    let cfg = Config::default();
    for (name, c) in fixtures::circuit_corpus() {
        for variant in [Variant::Dkp, Variant::Rbb] {
            let r = roundtrip(&c, variant, &cfg).unwrap();
            assert!(r.passed(), "{name} {variant:?}: {}", r.to_text());
        }
    }
}

#[test]
fn empty_circuit_round_trips() {
    let c = Circuit::new(["a", "b"], vec![]);
    check(&c, Variant::Dkp).unwrap();
}

#[test]
fn single_gate_pattern_extracts_to_t_then_h() {
    let e = semantic(&fixtures::f_j(oneway::pattern::Angle::from_units(1))).unwrap();
    let c = to_circuit(&e).unwrap();
    assert_eq!(c.gates, vec![Gate::T("v".into()), Gate::H("v".into())]);
}

#[test]
fn rejections_name_their_stage() {
    assert_eq!(
        semantic_report(&fixtures::k2()).unwrap_err(),
        Rejection::NoFlow(NoFlowStage::EdgeBound)
    );
    assert_eq!(
        semantic_report(&fixtures::reversal_grid(7, 7)).unwrap_err(),
        Rejection::NoFlow(NoFlowStage::StarDecomposition)
    );
    let two_outputs =
        oneway::pattern::Pattern::new(["a"], vec![oneway::pattern::Command::Prepare("b".into())]);
    assert_eq!(
        semantic_report(&two_outputs).unwrap_err(),
        Rejection::UnequalIo {
            inputs: 1,
            outputs: 2
        }
    );
}
