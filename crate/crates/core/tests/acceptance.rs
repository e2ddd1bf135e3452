//! Acceptance run: one PASS/FAIL line per criterion, with its runtime
//! against its budget. Exits non-zero if any criterion fails.

mod common;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use common::*;
use oneway::circuit::{Circuit, Gate};
use oneway::cli::Counts;
use oneway::construct::{
    construct, construction_expr, phi, zzz_procedure, ConstructionMode, Variant,
};
use oneway::deps::test_dependencies;
use oneway::extract::{reference_expr, semantic, semantic_report, NoFlowStage, Rejection};
use oneway::fixtures;
use oneway::flow::{brute_force_flows, find_mod_star_decomp, FlowProblem};
use oneway::gen::{
    self, bare_pattern, connected_graphs, over_dense_geometry, random_interface, small_geometry,
};
use oneway::pattern::{Angle, Command, Pattern, QubitId, SignalExpr};
use oneway::rewrite::{normalize, pauli_simplify, signal_shift, standardize};
use oneway::sim::{gates_unitary, run_pattern, same_channel};
use oneway::stable_index::{isomorphic, to_circuit};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome, u64);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn q(s: &str) -> QubitId {
    QubitId::from(s)
}

fn gate_identities() -> Outcome {
    let mut worst: f64 = 0.0;
    for m in -3..=4 {
        let lib = to_mat(
            &gates_unitary(&Circuit::new(
                ["a"],
                vec![Gate::J(Angle::from_units(m), q("a"))],
            ))
            .unwrap(),
        );
        let t_m = to_mat(
            &gates_unitary(&Circuit::new(
                ["a"],
                (0..m.rem_euclid(16)).map(|_| Gate::T(q("a"))).collect(),
            ))
            .unwrap(),
        );
        let hadamard = to_mat(&gates_unitary(&Circuit::new(["a"], vec![Gate::H(q("a"))])).unwrap());
        worst = worst.max(max_diff(&lib, &mul(&hadamard, &t_m)));
        worst = worst.max(max_diff(&lib, &j(m)));
        worst = worst.max(max_diff(&j(m), &mul(&h(), &t_pow(m))));
    }
    let zz =
        to_mat(&gates_unitary(&Circuit::new(["a", "b"], vec![Gate::ZZ(q("a"), q("b"))])).unwrap());
    let rhs = scale(
        &mul(&kron(&t_pow(2), &t_pow(2)), &cz()),
        num_complex::Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_4),
    );
    worst = worst.max(max_diff(&zz, &rhs));
    let cnot_lib = to_mat(
        &gates_unitary(&Circuit::new(
            ["a", "b"],
            vec![Gate::H(q("b")), Gate::CZ(q("a"), q("b")), Gate::H(q("b"))],
        ))
        .unwrap(),
    );
    worst = worst.max(max_diff(&cnot_lib, &cnot()));
    ensure(worst <= 1e-12, || format!("max entry error {worst:e}"))?;
    Ok(format!("max entry error {worst:.1e}"))
}

fn elementary_procedures() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    let mut record = |u: Option<oneway::sim::DenseOperator>,
                      expected: &Mat,
                      what: String|
     -> Result<(), String> {
        let u = u.ok_or_else(|| format!("{what} is not deterministic"))?;
        let d = phase_distance(&to_mat(&u), expected)
            .ok_or_else(|| format!("{what} has the wrong shape"))?;
        worst = worst.max(d);
        count += 1;
        ensure(d <= 1e-10, || format!("{what} is off by {d:e}"))
    };
    for t in -3..=4 {
        let bm = run_pattern(&fixtures::f_j(Angle::from_units(t))).unwrap();
        record(bm.as_unitary(1e-10), &j(t), format!("J({t}π/4)"))?;
    }
    record(
        run_pattern(&fixtures::f_zz()).unwrap().as_unitary(1e-10),
        &zzz(2, 2),
        "ZZ".into(),
    )?;
    for d in 1..=4usize {
        let targets: Vec<QubitId> = (0..d).map(|i| QubitId::new(format!("t{i}"))).collect();
        for t in -3..=4 {
            let p = Pattern::new(
                targets.clone(),
                zzz_procedure(&q("m"), &targets, Angle::from_units(t)),
            );
            record(
                run_pattern(&p).unwrap().as_unitary(1e-10),
                &zzz(d, t),
                format!("Z^{d}({t}π/4)"),
            )?;
        }
    }
    Ok(format!("{count} procedures, max error {worst:.1e}"))
}

fn rewrite_soundness() -> Outcome {
    let mut rng = gen::rng(3);
    let mut done = 0;
    let mut dkp = 0;
    while done < 200 {
        let lnn = done % 2 == 1;
        let c = gen::random_circuit(&mut rng, 3, 6, lnn);
        let variant = if lnn { Variant::Rbb } else { Variant::Dkp };
        let p = phi(&construction_expr(&c, variant).unwrap()).unwrap();
        if p.qubits().len() > 10 {
            continue;
        }
        let reference = run_pattern(&p).unwrap();
        let s = standardize(&p).map_err(|e| e.to_string())?;
        let ps = pauli_simplify(&s).map_err(|e| e.to_string())?;
        let ss = signal_shift(&ps).map_err(|e| e.to_string())?;
        let n = normalize(&p).map_err(|e| e.to_string())?;
        for (stage, r) in [
            ("standardize", &s),
            ("pauli_simplify", &ps),
            ("signal_shift", &ss),
            ("normalize", &n),
        ] {
            ensure(
                same_channel(&reference, &run_pattern(r).unwrap(), 1e-10),
                || {
                    format!(
                        "{stage} changed the channel of\n{}",
                        oneway::text::print_circuit(&c)
                    )
                },
            )?;
        }
        ensure(normalize(&n).unwrap() == n, || {
            "normalize is not idempotent".into()
        })?;
        done += 1;
        dkp += usize::from(!lnn);
    }
    Ok(format!(
        "{done} patterns ({dkp} DKP, {} RBB), 4 stages each",
        done - dkp
    ))
}

fn flow_oracle_agreement() -> Outcome {
    let mut rng = gen::rng(4);
    let (mut graphs, mut cases, mut with_flow, mut equal) = (0, 0, 0, 0);
    for n in 1..=6 {
        for graph in connected_graphs(n) {
            graphs += 1;
            for trial in 0..4 {
                let (i, o, m) = random_interface(&mut rng, n, trial % 2 == 0);
                let g = small_geometry(&graph, &i, &o);
                let mediators: BTreeSet<QubitId> = m.iter().map(|&v| g.name(v).clone()).collect();
                let problem = FlowProblem::new(g, mediators);
                let all = brute_force_flows(&problem).map_err(|e| e.to_string())?;
                let found = find_mod_star_decomp(&problem);
                cases += 1;
                ensure(found.is_some() == !all.is_empty(), || {
                    format!("presence differs on {graph:?} I={i:?} O={o:?} M={m:?}")
                })?;
                if let Some(flow) = found {
                    with_flow += 1;
                    ensure(all.contains(&flow.f), || {
                        format!("witness is not a flow on {graph:?}")
                    })?;
                    if i.len() == o.len() {
                        equal += 1;
                        ensure(all.len() == 1, || {
                            format!(
                                "{} flows with |I| = |O| on {graph:?} I={i:?} O={o:?}",
                                all.len()
                            )
                        })?;
                    }
                }
            }
        }
    }
    Ok(format!(
        "{graphs} graphs, {cases} interfaces, {with_flow} with a flow ({equal} with |I| = |O|)"
    ))
}

fn extremal_bound() -> Outcome {
    let mut rng = gen::rng(5);
    for k in 0..500 {
        let (g, angles) = over_dense_geometry(&mut rng, 8);
        let problem = FlowProblem::new(g.clone(), BTreeSet::new());
        ensure(brute_force_flows(&problem).unwrap().is_empty(), || {
            format!("instance {k} has a flow")
        })?;
        let r = semantic_report(&bare_pattern(&g, &angles));
        ensure(
            matches!(r, Err(Rejection::NoFlow(NoFlowStage::EdgeBound))),
            || {
                format!(
                    "instance {k} was not rejected by the edge bound: {:?}",
                    r.map(|_| ())
                )
            },
        )?;
    }
    Ok("500 geometries, all rejected by the edge bound".into())
}

fn dependency_check() -> Outcome {
    let mut rng = gen::rng(6);
    for k in 0..100 {
        let lnn = k % 2 == 1;
        let c = gen::random_circuit(&mut rng, if lnn { 3 } else { 4 }, 12, lnn);
        let variant = if lnn { Variant::Rbb } else { Variant::Dkp };
        let p = construct(
            &c,
            ConstructionMode {
                variant,
                normalize: true,
            },
        )
        .unwrap();
        let flow = find_mod_star_decomp(&FlowProblem::from_pattern(&p))
            .ok_or("construction without a flow")?;
        ensure(test_dependencies(&p, &flow.f) == Ok(true), || {
            format!(
                "construction of\n{}fails the check",
                oneway::text::print_circuit(&c)
            )
        })?;
    }
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
    let mut tampers = 0;
    for p in normal_forms {
        let f = find_mod_star_decomp(&FlowProblem::from_pattern(&p))
            .unwrap()
            .f;
        for t in single_bit_tampers(&p) {
            tampers += 1;
            ensure(test_dependencies(&t, &f) != Ok(true), || {
                format!("undetected tamper:\n{}", oneway::text::print_pattern(&t))
            })?;
        }
    }
    Ok(format!(
        "100 constructions consistent, {tampers} tampers caught"
    ))
}

fn single_bit_tampers(p: &Pattern) -> Vec<Pattern> {
    let mut out = Vec::new();
    let mut before: Vec<QubitId> = Vec::new();
    for (i, cmd) in p.commands.iter().enumerate() {
        if let Command::Measure { qubit, .. } = cmd {
            for m in &before {
                let mut t = p.clone();
                t.commands[i].signal_mut().unwrap().toggle(m.clone());
                out.push(t);
            }
            before.push(qubit.clone());
        }
    }
    for o in p.outputs() {
        for x_kind in [true, false] {
            for m in &before {
                let mut t = p.clone();
                let pos = t.commands.iter().position(|c| match c {
                    Command::CorrectX(v, _) => x_kind && *v == o,
                    Command::CorrectZ(v, _) => !x_kind && *v == o,
                    _ => false,
                });
                match pos {
                    Some(i) => t.commands[i].signal_mut().unwrap().toggle(m.clone()),
                    None if x_kind => t
                        .commands
                        .push(Command::CorrectX(o.clone(), SignalExpr::single(m.clone()))),
                    None => t
                        .commands
                        .push(Command::CorrectZ(o.clone(), SignalExpr::single(m.clone()))),
                }
                out.push(t);
            }
        }
    }
    out
}

fn rename_back(extracted: &Circuit) -> Circuit {
    let back = |w: &QubitId| QubitId::new(w.as_str().strip_suffix(".0").unwrap_or(w.as_str()));
    let gates = extracted
        .gates
        .iter()
        .map(|g| match g {
            Gate::H(a) => Gate::H(back(a)),
            Gate::T(a) => Gate::T(back(a)),
            Gate::Tdg(a) => Gate::Tdg(back(a)),
            Gate::J(t, a) => Gate::J(*t, back(a)),
            Gate::CZ(a, b) => Gate::CZ(back(a), back(b)),
            Gate::ZZ(a, b) => Gate::ZZ(back(a), back(b)),
            Gate::KetPlus(a) => Gate::KetPlus(back(a)),
        })
        .collect();
    Circuit {
        inputs: extracted.inputs.iter().map(back).collect(),
        gates,
    }
}

fn round_trip_one(c: &Circuit, variant: Variant) -> Result<(), String> {
    let p = construct(
        c,
        ConstructionMode {
            variant,
            normalize: true,
        },
    )
    .map_err(|e| e.to_string())?;
    let x = semantic_report(&p).map_err(|r| format!("rejected: {r}"))?;
    let reference = reference_expr(c, variant).map_err(|e| e.to_string())?;
    ensure(isomorphic(&x.expr, &reference).is_some(), || {
        "not isomorphic".into()
    })?;
    ensure(Counts::of(&x.expr).within(&Counts::of(&reference)), || {
        "larger than the input".into()
    })?;
    let mut back = rename_back(&to_circuit(&x.expr).map_err(|e| e.to_string())?);
    back.inputs = c.inputs.clone();
    let d = phase_distance(&circuit_matrix(&back), &circuit_matrix(c)).ok_or("shape")?;
    ensure(d <= 1e-9, || format!("unitaries differ by {d:e}"))
}

fn round_trips() -> Outcome {
    let mut rng = gen::rng(7);
    for k in 0..100 {
        let c = gen::random_circuit(&mut rng, 4, 12, false);
        round_trip_one(&c, Variant::Dkp)
            .map_err(|e| format!("DKP #{k}: {e}\n{}", oneway::text::print_circuit(&c)))?;
    }
    for k in 0..50 {
        let c = gen::random_circuit(&mut rng, 3, 12, true);
        round_trip_one(&c, Variant::Rbb)
            .map_err(|e| format!("RBB #{k}: {e}\n{}", oneway::text::print_circuit(&c)))?;
    }
    Ok("100 DKP and 50 RBB circuits".into())
}

fn unitarity_certificate() -> Outcome {
    let mut rng = gen::rng(8);
    let mut mediators = 0;
    for k in 0..50 {
        use rand::Rng;
        let wires = rng.gen_range(1..=3);
        let size = rng.gen_range(wires..=10);
        let inst = gen::random_flow_instance(&mut rng, wires, size);
        mediators += inst.f.iter().filter(|(v, w)| v == w).count();
        let p = inst.pattern().map_err(|e| e.to_string())?;
        let bm = run_pattern(&p).map_err(|e| e.to_string())?;
        ensure(bm.as_unitary(1e-9).is_some(), || {
            format!("instance {k} is not deterministic")
        })?;
    }
    Ok(format!("50 instances ({mediators} mediators in total)"))
}

fn rejection_fixtures() -> Outcome {
    for (name, p) in [
        ("k2", fixtures::k2()),
        ("reversal", fixtures::reversal_grid(7, 7)),
    ] {
        ensure(semantic(&p).is_none(), || format!("{name} was extracted"))?;
        let r = semantic_report(&p).unwrap_err();
        ensure(r.reason() == "no-flow", || {
            format!("{name} rejected as {r}")
        })?;
    }
    Ok("k2 and the reversal grid rejected with no-flow".into())
}

fn scaling_smoke() -> Outcome {
    let p = gen::chain_pattern(&mut gen::rng(9), 2000);
    let start = Instant::now();
    let e = semantic(&p).ok_or("chain rejected")?;
    let t = start.elapsed();
    ensure(e.wire_count() == 1, || {
        "chain did not extract to one wire".into()
    })?;
    Ok(format!("semantic took {:.2} s", t.as_secs_f64()))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("gate identities", gate_identities, 1),
        ("elementary procedures", elementary_procedures, 5),
        ("rewrite soundness", rewrite_soundness, 120),
        (
            "flow search agrees with enumeration",
            flow_oracle_agreement,
            300,
        ),
        ("over-dense geometries", extremal_bound, 60),
        ("dependency check", dependency_check, 60),
        ("round trips", round_trips, 300),
        ("flow patterns are unitary", unitarity_certificate, 300),
        ("rejection fixtures", rejection_fixtures, 1),
        ("2000-qubit chain", scaling_smoke, 10),
    ];
    let mut failed = 0;
    for (k, (name, run, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let result = result.and_then(|detail| {
            if elapsed <= Duration::from_secs(*budget) {
                Ok(detail)
            } else {
                Err(format!("{detail}; over the {budget} s budget"))
            }
        });
        match result {
            Ok(detail) => println!(
                "PASS {:>2} {name}: {detail} [{:.2} s]",
                k + 1,
                elapsed.as_secs_f64()
            ),
            Err(why) => {
                failed += 1;
                println!(
                    "FAIL {:>2} {name}: {why} [{:.2} s]",
                    k + 1,
                    elapsed.as_secs_f64()
                );
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
