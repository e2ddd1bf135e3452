//! Gate-list circuits: the input language of the constructions.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::pattern::{Angle, QubitId};

/// A gate applied to named qubits.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Gate {
    H(QubitId),
    T(QubitId),
    Tdg(QubitId),
    CZ(QubitId, QubitId),
    /// e^{−iπ Z⊗Z/4}.
    ZZ(QubitId, QubitId),
    /// J(θ) = H·e^{−iZθ/2}.
    J(Angle, QubitId),
    /// Introduces a fresh qubit in the state |+⟩.
    KetPlus(QubitId),
}

impl Gate {
    pub fn qubits(&self) -> Vec<&QubitId> {
        match self {
            Gate::H(q) | Gate::T(q) | Gate::Tdg(q) | Gate::J(_, q) | Gate::KetPlus(q) => vec![q],
            Gate::CZ(a, b) | Gate::ZZ(a, b) => vec![a, b],
        }
    }

    /// Whether the gate preserves the standard basis states of its operands.
    pub fn is_diagonal(&self) -> bool {
        matches!(
            self,
            Gate::T(_) | Gate::Tdg(_) | Gate::CZ(..) | Gate::ZZ(..)
        )
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gate::H(q) => write!(f, "H {q}"),
            Gate::T(q) => write!(f, "T {q}"),
            Gate::Tdg(q) => write!(f, "Tdg {q}"),
            Gate::CZ(a, b) => write!(f, "CZ {a} {b}"),
            Gate::ZZ(a, b) => write!(f, "ZZ {a} {b}"),
            Gate::J(t, q) => write!(f, "J {t} {q}"),
            Gate::KetPlus(q) => write!(f, "KET+ {q}"),
        }
    }
}

/// A circuit: declared input wires (in register order) and a gate list in
/// execution order. Qubits introduced by `KetPlus` are wires too, ordered
/// after the inputs by first appearance.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Circuit {
    pub inputs: Vec<QubitId>,
    pub gates: Vec<Gate>,
}

impl Circuit {
    pub fn new<Q: Into<QubitId>>(inputs: impl IntoIterator<Item = Q>, gates: Vec<Gate>) -> Circuit {
        Circuit {
            inputs: inputs.into_iter().map(Into::into).collect(),
            gates,
        }
    }

    /// All wires in register order: inputs, then fresh qubits.
    pub fn wires(&self) -> Vec<QubitId> {
        let mut seen: BTreeSet<&QubitId> = self.inputs.iter().collect();
        let mut wires = self.inputs.clone();
        for g in &self.gates {
            if let Gate::KetPlus(q) = g {
                if seen.insert(q) {
                    wires.push(q.clone());
                }
            }
        }
        wires
    }

    /// Whether every two-qubit gate acts on neighbouring wires.
    pub fn is_nearest_neighbor(&self) -> bool {
        let wires = self.wires();
        let pos = |q: &QubitId| wires.iter().position(|w| w == q);
        self.gates.iter().all(|g| match g {
            Gate::CZ(a, b) | Gate::ZZ(a, b) => match (pos(a), pos(b)) {
                (Some(i), Some(j)) => i.abs_diff(j) == 1,
                _ => false,
            },
            _ => true,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wires_put_fresh_qubits_after_inputs() {
        let c = Circuit::new(
            ["b", "a"],
            vec![Gate::KetPlus("z".into()), Gate::CZ("a".into(), "z".into())],
        );
        assert_eq!(c.wires(), vec![QubitId::from("b"), "a".into(), "z".into()]);
    }

    #[test]
    fn nearest_neighbor_follows_declaration_order() {
        let c = Circuit::new(["a", "b", "c"], vec![Gate::CZ("a".into(), "b".into())]);
        assert!(c.is_nearest_neighbor());
        let c = Circuit::new(["a", "b", "c"], vec![Gate::CZ("a".into(), "c".into())]);
        assert!(!c.is_nearest_neighbor());
    }
}
