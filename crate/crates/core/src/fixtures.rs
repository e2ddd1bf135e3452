//! The fixture corpus: small patterns exercising each branch of the
//! semantic map, and the directory they are stored in.
//!
//! Each builder here has a counterpart file in `fixtures/`; the corpus
//! tests check that the two agree.

use std::path::{Path, PathBuf};

use crate::circuit::{Circuit, Gate};
use crate::deps::predicted_normal_form;
use crate::pattern::{Angle, AngleMap, Command, Geometry, Pattern, Plane, QubitId, SignalExpr};

/// Environment variable overriding the fixture directory.
pub const FIXTURE_DIR_VAR: &str = "ONEWAY_FIXTURES";

/// The fixture directory: `$ONEWAY_FIXTURES`, or the corpus shipped with
/// the crate.
pub fn fixture_dir() -> PathBuf {
    std::env::var_os(FIXTURE_DIR_VAR)
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures"))
}

/// Resolves a fixture name, trying the `.mcal` and `.qc` extensions when
/// the bare name does not exist.
pub fn resolve(name: &str) -> PathBuf {
    let dir = fixture_dir();
    let bare = dir.join(name);
    if bare.exists() {
        return bare;
    }
    for ext in ["mcal", "qc"] {
        let p = dir.join(format!("{name}.{ext}"));
        if p.exists() {
            return p;
        }
    }
    bare
}

/// Every pattern fixture: (file stem, builder output).
pub fn corpus() -> Vec<(&'static str, Pattern)> {
    vec![
        ("fj", f_j(Angle::from_units(1))),
        ("fzz", f_zz()),
        ("fzzz3", f_zzz3()),
        (
            "chain",
            two_gate_chain(Angle::from_units(1), Angle::from_units(-2)),
        ),
        ("k2", k2()),
        ("saturating", saturating()),
        ("reversal", reversal_grid(7, 7)),
    ]
}

/// Every circuit fixture: (file stem, circuit).
pub fn circuit_corpus() -> Vec<(&'static str, Circuit)> {
    vec![
        (
            "h_t",
            Circuit::new(["q"], vec![Gate::H(q("q")), Gate::T(q("q"))]),
        ),
        (
            "lnn3",
            Circuit::new(
                ["a", "b", "c"],
                vec![
                    Gate::H(q("a")),
                    Gate::CZ(q("a"), q("b")),
                    Gate::T(q("b")),
                    Gate::H(q("c")),
                    Gate::CZ(q("b"), q("c")),
                    Gate::H(q("b")),
                    Gate::T(q("c")),
                ],
            ),
        ),
    ]
}

fn q(s: &str) -> QubitId {
    QubitId::from(s)
}

/// J(θ) from input `v` to output `w`.
pub fn f_j(theta: Angle) -> Pattern {
    Pattern::new(
        ["v"],
        vec![
            Command::Prepare(q("w")),
            Command::Entangle(q("v"), q("w")),
            Command::measure("v", -theta),
            Command::CorrectX(q("w"), SignalExpr::single("v")),
        ],
    )
}

/// e^{−iπ Z⊗Z/4} on `v, w` through the mediator `a`.
pub fn f_zz() -> Pattern {
    Pattern::new(
        ["v", "w"],
        vec![
            Command::Prepare(q("a")),
            Command::Entangle(q("a"), q("v")),
            Command::Entangle(q("a"), q("w")),
            Command::measure("a", Angle::HALF_PI),
            Command::CorrectZ(q("v"), SignalExpr::single("a")),
            Command::CorrectZ(q("w"), SignalExpr::single("a")),
        ],
    )
}

/// e^{−iπ Z⊗Z⊗Z/4} on `u, v, w` through the mediator `a`.
pub fn f_zzz3() -> Pattern {
    let mut cmds = vec![Command::Prepare(q("a"))];
    cmds.extend(["u", "v", "w"].map(|t| Command::Entangle(q("a"), q(t))));
    cmds.push(Command::measure("a", Angle::HALF_PI));
    cmds.extend(["u", "v", "w"].map(|t| Command::CorrectZ(q(t), SignalExpr::single("a"))));
    Pattern::new(["u", "v", "w"], cmds)
}

/// J(θ1) on `v → w` followed by J(θ2) on `w → x`, as a plain
/// concatenation (not standardized).
pub fn two_gate_chain(theta1: Angle, theta2: Angle) -> Pattern {
    Pattern::new(
        ["v"],
        vec![
            Command::Prepare(q("w")),
            Command::Entangle(q("v"), q("w")),
            Command::measure("v", -theta1),
            Command::CorrectX(q("w"), SignalExpr::single("v")),
            Command::Prepare(q("x")),
            Command::Entangle(q("w"), q("x")),
            Command::measure("w", -theta2),
            Command::CorrectX(q("x"), SignalExpr::single("w")),
        ],
    )
}

/// Two prepared qubits joined by an edge and both measured: no inputs, no
/// outputs, no flow.
pub fn k2() -> Pattern {
    Pattern::new(
        Vec::<QubitId>::new(),
        vec![
            Command::Prepare(q("a")),
            Command::Prepare(q("b")),
            Command::Entangle(q("a"), q("b")),
            Command::measure("a", Angle::ZERO),
            Command::measure("b", Angle::ZERO),
        ],
    )
}

/// A five-qubit geometry with two inputs, two outputs and seven edges —
/// exactly as many as a flow allows — in the normal form of its flow
/// `a→c, b→d, c→e`.
pub fn saturating() -> Pattern {
    let g = Geometry::new(
        ["a", "b", "c", "d", "e"],
        [
            ("a", "b"),
            ("a", "c"),
            ("b", "c"),
            ("b", "d"),
            ("c", "d"),
            ("c", "e"),
            ("d", "e"),
        ],
        ["a", "b"],
        ["d", "e"],
    )
    .expect("well formed");
    let angles: AngleMap = [("a", 1), ("b", -1), ("c", 3)]
        .into_iter()
        .map(|(v, t)| (q(v), (Plane::XY, Angle::from_units(t))))
        .collect();
    let f = [("a", "c"), ("b", "d"), ("c", "e")]
        .into_iter()
        .map(|(v, w)| (q(v), q(w)))
        .collect();
    predicted_normal_form(&g, &f, &angles).expect("the flow is valid")
}

/// Name of the grid qubit in row `r`, column `c`.
pub fn grid_name(r: usize, c: usize) -> QubitId {
    QubitId::new(format!("r{r}c{c}"))
}

/// A `rows × cols` grid with inputs at column 0 and outputs at the last
/// column on the even rows, every other qubit measured in the XY plane at
/// angle 0 without dependencies. When every outcome is 0 the logical
/// qubits come out in reverse vertical order; the geometry has no flow.
///
/// Commands are emitted column by column (prepare, entangle, measure the
/// previous column) so that a simulator deferring preparations keeps only
/// two columns live.
pub fn reversal_grid(rows: usize, cols: usize) -> Pattern {
    let is_input = |r: usize, c: usize| c == 0 && r % 2 == 0;
    let is_output = |r: usize, c: usize| c + 1 == cols && r % 2 == 0;
    let mut cmds = Vec::new();
    for c in 0..cols {
        cmds.extend(
            (0..rows)
                .filter(|&r| !is_input(r, c))
                .map(|r| Command::Prepare(grid_name(r, c))),
        );
        for r in 0..rows {
            if r + 1 < rows {
                cmds.push(Command::Entangle(grid_name(r, c), grid_name(r + 1, c)));
            }
            if c > 0 {
                cmds.push(Command::Entangle(grid_name(r, c - 1), grid_name(r, c)));
            }
        }
        if c > 0 {
            cmds.extend((0..rows).map(|r| Command::measure(grid_name(r, c - 1), Angle::ZERO)));
        }
    }
    cmds.extend(
        (0..rows)
            .filter(|&r| !is_output(r, cols - 1))
            .map(|r| Command::measure(grid_name(r, cols - 1), Angle::ZERO)),
    );
    Pattern::new((0..rows).step_by(2).map(|r| grid_name(r, 0)), cmds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::{geometry_of, validate_pattern};

    #[test]
    fn builders_are_well_formed() {
        for (name, p) in corpus() {
            assert!(validate_pattern(&p).is_ok(), "{name}");
        }
    }

    #[test]
    fn saturating_geometry_meets_the_bound() {
        let (g, _) = geometry_of(&saturating());
        let (n, k, m) = (g.len(), g.output_count(), g.edge_count());
        assert_eq!((n, k, m), (5, 2, 7));
        assert_eq!(m, n * k - k * (k + 1) / 2);
    }

    #[test]
    fn reversal_grid_interface() {
        let (g, _) = geometry_of(&reversal_grid(7, 7));
        assert_eq!(g.len(), 49);
        assert_eq!(g.input_count(), 4);
        assert_eq!(g.output_count(), 4);
        assert_eq!(g.edge_count(), 84);
    }
}
