//! Circuit-to-pattern constructions: the circuit normal form, the term-wise
//! map from stable-index expressions to patterns, and the full pipelines.
//!
//! Two variants are supported. `Dkp` places no constraint on the circuit and
//! entangles with CZ directly. `Rbb` requires nearest-neighbour two-qubit
//! gates, replaces CZ by ZZ (realised with a mediator qubit), and pads wires
//! so that the pattern geometry embeds in a grid.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{Circuit, Gate};
use crate::pattern::{canonical_units, Angle, Command, Pattern, Plane, QubitId, SignalExpr};
use crate::rewrite::{normalize, standardize, RewriteError};
use crate::stable_index::{
    from_gates_free, from_gates_grid, StableIndexError, StableIndexExpr, TermGate,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    Dkp,
    Rbb,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Dkp => "dkp",
            Variant::Rbb => "rbb",
        })
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "dkp" => Ok(Variant::Dkp),
            "rbb" => Ok(Variant::Rbb),
            other => Err(format!("unknown construction variant `{other}`")),
        }
    }
}

/// Which construction to run and whether to bring the result to normal form
/// (otherwise it is only standardized).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConstructionMode {
    pub variant: Variant,
    pub normalize: bool,
}

impl ConstructionMode {
    pub const DKP: ConstructionMode = ConstructionMode {
        variant: Variant::Dkp,
        normalize: true,
    };
    pub const RBB: ConstructionMode = ConstructionMode {
        variant: Variant::Rbb,
        normalize: true,
    };

    pub fn unnormalized(self) -> ConstructionMode {
        ConstructionMode {
            normalize: false,
            ..self
        }
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum ConstructError {
    #[error("the RBB construction needs nearest-neighbour two-qubit gates")]
    NotNearestNeighbor,
    #[error("gate {0} acts on an undeclared qubit")]
    UnknownQubit(String),
    #[error("term {0} has no pattern counterpart")]
    UnsupportedTerm(String),
    #[error(transparent)]
    StableIndex(#[from] StableIndexError),
    #[error(transparent)]
    Rewrite(#[from] RewriteError),
}

/// Cancels CZ pairs separated only by gates commuting with them, then
/// collects T powers per wire and parks them immediately before the next H
/// (or at the end). For RBB every CZ becomes ZZ·(T†⊗T†)². The result is a
/// product of CZ (or ZZ) gates and T^r·H blocks, with trailing T^r blocks.
/// A `J t` gate is treated as the block T^t·H.
pub fn circuit_normal_form(c: &Circuit, variant: Variant) -> Result<Circuit, ConstructError> {
    if variant == Variant::Rbb && !c.is_nearest_neighbor() {
        return Err(ConstructError::NotNearestNeighbor);
    }
    let wires = c.wires();
    let known: BTreeSet<&QubitId> = wires.iter().collect();
    for g in &c.gates {
        if g.qubits().iter().any(|q| !known.contains(q)) {
            return Err(ConstructError::UnknownQubit(g.to_string()));
        }
    }

    // CZ cancellation: a CZ stays open until an H-type gate touches either
    // operand; a second CZ on an open pair annihilates both.
    let mut keep = vec![true; c.gates.len()];
    let mut open: HashMap<(QubitId, QubitId), usize> = HashMap::new();
    for (i, g) in c.gates.iter().enumerate() {
        match g {
            Gate::CZ(a, b) => {
                let key = if a <= b {
                    (a.clone(), b.clone())
                } else {
                    (b.clone(), a.clone())
                };
                if let Some(j) = open.remove(&key) {
                    keep[i] = false;
                    keep[j] = false;
                } else {
                    open.insert(key, i);
                }
            }
            Gate::H(q) | Gate::J(_, q) => open.retain(|(a, b), _| a != q && b != q),
            _ => {}
        }
    }

    let mut power: BTreeMap<QubitId, i64> = BTreeMap::new();
    let mut out = Vec::new();
    let emit_power = |out: &mut Vec<Gate>, q: &QubitId, r: i64| {
        let r = canonical_units(r);
        for _ in 0..r.abs() {
            out.push(if r > 0 {
                Gate::T(q.clone())
            } else {
                Gate::Tdg(q.clone())
            });
        }
    };
    for (g, _) in c.gates.iter().zip(&keep).filter(|(_, k)| **k) {
        match g {
            Gate::T(q) => *power.entry(q.clone()).or_default() += 1,
            Gate::Tdg(q) => *power.entry(q.clone()).or_default() -= 1,
            Gate::H(q) | Gate::J(_, q) => {
                let extra = if let Gate::J(t, _) = g { t.units() } else { 0 };
                let r = power.remove(q).unwrap_or(0) + extra;
                emit_power(&mut out, q, r);
                out.push(Gate::H(q.clone()));
            }
            Gate::CZ(a, b) if variant == Variant::Rbb => {
                out.push(Gate::ZZ(a.clone(), b.clone()));
                *power.entry(a.clone()).or_default() -= 2;
                *power.entry(b.clone()).or_default() -= 2;
            }
            Gate::CZ(..) | Gate::ZZ(..) | Gate::KetPlus(_) => out.push(g.clone()),
        }
    }
    for q in &wires {
        if let Some(&r) = power.get(q) {
            emit_power(&mut out, q, r);
        }
    }
    Ok(Circuit {
        inputs: c.inputs.clone(),
        gates: out,
    })
}

/// Rewrites a normal-form circuit over J, CZ, ZZ and KET+: each T^r·H block
/// becomes J(r); a trailing T^m becomes J(m) followed by J(0).
pub fn j_blocks(c: &Circuit) -> Circuit {
    let mut power: BTreeMap<QubitId, i64> = BTreeMap::new();
    let mut out = Vec::new();
    for g in &c.gates {
        match g {
            Gate::T(q) => *power.entry(q.clone()).or_default() += 1,
            Gate::Tdg(q) => *power.entry(q.clone()).or_default() -= 1,
            Gate::H(q) => {
                let r = power.remove(q).unwrap_or(0);
                out.push(Gate::J(Angle::from_units(r), q.clone()));
            }
            Gate::J(t, q) => {
                let r = power.remove(q).unwrap_or(0) + t.units();
                out.push(Gate::J(Angle::from_units(r), q.clone()));
            }
            _ => out.push(g.clone()),
        }
    }
    for q in c.wires() {
        if let Some(r) = power.remove(&q) {
            let a = Angle::from_units(r);
            if a != Angle::ZERO {
                out.push(Gate::J(a, q.clone()));
                out.push(Gate::J(Angle::ZERO, q));
            }
        }
    }
    Circuit {
        inputs: c.inputs.clone(),
        gates: out,
    }
}

fn mediator_name(stable: &[QubitId], position: usize, taken: &BTreeSet<QubitId>) -> QubitId {
    let base = stable
        .iter()
        .map(|q| q.as_str())
        .collect::<Vec<_>>()
        .join("~");
    let name = QubitId::new(base.clone());
    if taken.contains(&name) {
        QubitId::new(format!("{base}~{position}"))
    } else {
        name
    }
}

/// The elementary pattern for exp(−iθ Z^{⊗d}/2) on `targets`, using mediator `m`.
pub fn zzz_procedure(m: &QubitId, targets: &[QubitId], theta: Angle) -> Vec<Command> {
    let mut cmds = vec![Command::Prepare(m.clone())];
    cmds.extend(
        targets
            .iter()
            .map(|t| Command::Entangle(m.clone(), t.clone())),
    );
    let plane = if theta == Angle::HALF_PI {
        Plane::XY
    } else {
        Plane::YZ
    };
    cmds.push(Command::Measure {
        qubit: m.clone(),
        plane,
        angle: theta,
        sign: SignalExpr::empty(),
    });
    cmds.extend(
        targets
            .iter()
            .map(|t| Command::CorrectZ(t.clone(), SignalExpr::single(m.clone()))),
    );
    cmds
}

/// The elementary pattern for J(θ) from `v` to the fresh output `w`.
pub fn j_procedure(w: &QubitId, v: &QubitId, theta: Angle) -> Vec<Command> {
    vec![
        Command::Prepare(w.clone()),
        Command::Entangle(v.clone(), w.clone()),
        Command::measure(v.clone(), -theta),
        Command::CorrectX(w.clone(), SignalExpr::single(v.clone())),
    ]
}

/// Maps each term to its elementary pattern, in pattern order. Index `v_j`
/// becomes the qubit named `v.j`; ZZ and ZZZ terms introduce a mediator.
pub fn phi(e: &StableIndexExpr) -> Result<Pattern, ConstructError> {
    let order = e.to_pattern_order()?;
    let mut taken: BTreeSet<QubitId> = e.indices().iter().map(|i| i.name()).collect();
    let mut commands = Vec::new();
    for (pos, i) in order.into_iter().enumerate() {
        let t = &e.terms[i];
        let unsupported = || ConstructError::UnsupportedTerm(t.to_string());
        match t.gate {
            TermGate::KetPlus => {
                let a = t.advanced[0].as_ref().ok_or_else(unsupported)?;
                commands.push(Command::Prepare(a.name()));
            }
            TermGate::J(theta) => {
                let d = t.deprecated[0].as_ref().ok_or_else(unsupported)?;
                let a = t.advanced[0].as_ref().ok_or_else(unsupported)?;
                commands.extend(j_procedure(&a.name(), &d.name(), theta));
            }
            TermGate::CZ => {
                commands.push(Command::Entangle(t.stable[0].name(), t.stable[1].name()))
            }
            TermGate::ZZ | TermGate::Zzz { .. } => {
                let theta = match t.gate {
                    TermGate::Zzz { angle, .. } => angle,
                    _ => Angle::HALF_PI,
                };
                let targets: Vec<QubitId> = t.stable.iter().map(|x| x.name()).collect();
                let m = mediator_name(&targets, pos, &taken);
                taken.insert(m.clone());
                commands.extend(zzz_procedure(&m, &targets, theta));
            }
            TermGate::H | TermGate::Tpow(_) | TermGate::ProjPlusHalfPi => return Err(unsupported()),
        }
    }
    Ok(Pattern {
        inputs: e.free_in.iter().map(|x| x.name()).collect(),
        commands,
    })
}

/// The stable-index expression a construction starts from.
pub fn construction_expr(c: &Circuit, variant: Variant) -> Result<StableIndexExpr, ConstructError> {
    let nf = j_blocks(&circuit_normal_form(c, variant)?);
    Ok(match variant {
        Variant::Dkp => from_gates_free(&nf)?,
        Variant::Rbb => from_gates_grid(&nf)?.0,
    })
}

/// Runs a construction. Circuit wire `q` enters the pattern as qubit `q.0`;
/// [`interface_names`] gives the output names.
pub fn construct(c: &Circuit, mode: ConstructionMode) -> Result<Pattern, ConstructError> {
    let e = construction_expr(c, mode.variant)?;
    let raw = phi(&e)?;
    Ok(if mode.normalize {
        normalize(&raw)?
    } else {
        standardize(&raw)?
    })
}

/// The pattern qubits carrying each circuit wire at the start and the end of
/// a construction: (wire, input name, output name), in wire order.
pub fn interface_names(
    c: &Circuit,
    variant: Variant,
) -> Result<Vec<(QubitId, QubitId, QubitId)>, ConstructError> {
    let e = construction_expr(c, variant)?;
    let wires = c.wires();
    Ok(wires
        .iter()
        .zip(&e.free_out)
        .map(|(w, out)| (w.clone(), QubitId::new(format!("{w}.0")), out.name()))
        .collect())
}
