//! Standardization, Pauli simplification and signal shifting.
//!
//! The rules are applied as a single left-to-right accumulation: every
//! qubit keeps a buffer of pending X and Z corrections. Entangling commands
//! move ahead of the buffered corrections (turning X on one end into an
//! extra Z on the other), and a measurement absorbs its qubit's buffer into
//! its sign expression and an outcome shift.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;
use thiserror::Error;

use crate::pattern::{validate_pattern, Command, Pattern, Plane, QubitId, SignalExpr};

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum RewriteError {
    #[error("pattern is not well formed: {0}")]
    IllFormed(String),
    #[error("pattern is not in standard form (command {0} is out of place)")]
    NotStandardForm(usize),
}

/// One logical rule application: the rule name and the index of the
/// command (in the source pattern) it was applied to.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RewriteStep {
    pub rule: &'static str,
    pub index: usize,
}

/// The log of rule applications performed by a rewrite.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct RewriteTrace {
    pub steps: Vec<RewriteStep>,
}

impl RewriteTrace {
    fn push(&mut self, rule: &'static str, index: usize) {
        self.steps.push(RewriteStep { rule, index });
    }
}

fn phase(c: &Command) -> u8 {
    match c {
        Command::Prepare(_) => 0,
        Command::Entangle(..) => 1,
        Command::Measure { .. } | Command::Shift(..) => 2,
        Command::CorrectX(..) | Command::CorrectZ(..) => 3,
    }
}

/// Whether the commands run preparations, then entanglings, then
/// measurements and shifts, then corrections.
pub fn is_standard_form(p: &Pattern) -> bool {
    first_out_of_place(p).is_none()
}

fn first_out_of_place(p: &Pattern) -> Option<usize> {
    let mut last = 0;
    for (i, c) in p.commands.iter().enumerate() {
        let k = phase(c);
        if k < last {
            return Some(i);
        }
        last = k;
    }
    None
}

/// Standard form with no shifts and no sign dependencies on Pauli measurements.
pub fn is_normal_form(p: &Pattern) -> bool {
    is_standard_form(p)
        && p.commands.iter().all(|c| match c {
            Command::Shift(..) => false,
            Command::Measure { angle, sign, .. } => !angle.is_pauli() || sign.is_empty(),
            _ => true,
        })
}

fn check_well_formed(p: &Pattern) -> Result<(), RewriteError> {
    match validate_pattern(p).violations.first() {
        Some(v) => Err(RewriteError::IllFormed(v.to_string())),
        None => Ok(()),
    }
}

/// Brings a well-formed pattern into standard form.
pub fn standardize(p: &Pattern) -> Result<Pattern, RewriteError> {
    standardize_traced(p).map(|(q, _)| q)
}

/// [`standardize`], also returning the rule log.
pub fn standardize_traced(p: &Pattern) -> Result<(Pattern, RewriteTrace), RewriteError> {
    check_well_formed(p)?;
    let mut trace = RewriteTrace::default();
    let mut preps: BTreeSet<QubitId> = BTreeSet::new();
    // (sorted pair, pair as written): sorted by the former, emitted as the latter.
    let mut entangles: Vec<((QubitId, QubitId), (QubitId, QubitId))> = Vec::new();
    let mut middle: Vec<Command> = Vec::new();
    let mut pending_x: BTreeMap<QubitId, SignalExpr> = BTreeMap::new();
    let mut pending_z: BTreeMap<QubitId, SignalExpr> = BTreeMap::new();
    let mut seen_other = false;
    let mut seen_correction = false;

    for (i, c) in p.commands.iter().enumerate() {
        match c {
            Command::Prepare(v) => {
                if seen_other {
                    trace.push("commute-prepare", i);
                }
                preps.insert(v.clone());
            }
            Command::Entangle(v, w) => {
                seen_other = true;
                for (a, b) in [(v, w), (w, v)] {
                    if let Some(x) = pending_x.get(a).filter(|x| !x.is_empty()).cloned() {
                        pending_z.entry(b.clone()).or_default().xor_with(&x);
                        trace.push("commute-entangle-x", i);
                    }
                }
                if seen_correction {
                    trace.push("commute-entangle-z", i);
                }
                entangles.push(((v.min(w).clone(), v.max(w).clone()), (v.clone(), w.clone())));
            }
            Command::CorrectX(v, s) => {
                seen_other = true;
                seen_correction = true;
                pending_x.entry(v.clone()).or_default().xor_with(s);
            }
            Command::CorrectZ(v, s) => {
                seen_other = true;
                seen_correction = true;
                pending_z.entry(v.clone()).or_default().xor_with(s);
            }
            Command::Measure {
                qubit,
                plane,
                angle,
                sign,
            } => {
                seen_other = true;
                let x = pending_x.remove(qubit).unwrap_or_default();
                let z = pending_z.remove(qubit).unwrap_or_default();
                // In the XY plane X negates the angle and Z flips the outcome;
                // in the YZ plane the roles are exchanged.
                let (to_sign, to_shift) = match plane {
                    Plane::XY => (x, z),
                    Plane::YZ => (z, x),
                };
                if !to_sign.is_empty() {
                    trace.push("absorb-into-sign", i);
                }
                middle.push(Command::Measure {
                    qubit: qubit.clone(),
                    plane: *plane,
                    angle: *angle,
                    sign: sign.xor(&to_sign),
                });
                if !to_shift.is_empty() {
                    trace.push("absorb-into-shift", i);
                    middle.push(Command::Shift(qubit.clone(), to_shift));
                }
            }
            Command::Shift(..) => {
                seen_other = true;
                middle.push(c.clone());
            }
        }
    }

    entangles.sort_by(|a, b| a.0.cmp(&b.0));
    let mut commands: Vec<Command> = preps.into_iter().map(Command::Prepare).collect();
    commands.extend(
        entangles
            .into_iter()
            .map(|(_, (v, w))| Command::Entangle(v, w)),
    );
    commands.extend(middle);
    let targets: BTreeSet<QubitId> = pending_x.keys().chain(pending_z.keys()).cloned().collect();
    for q in targets {
        if let Some(x) = pending_x.get(&q).filter(|x| !x.is_empty()) {
            commands.push(Command::CorrectX(q.clone(), x.clone()));
        }
        if let Some(z) = pending_z.get(&q).filter(|z| !z.is_empty()) {
            commands.push(Command::CorrectZ(q.clone(), z.clone()));
        }
    }
    Ok((
        Pattern {
            inputs: p.inputs.clone(),
            commands,
        },
        trace,
    ))
}

/// Removes sign dependencies from Pauli measurements: angles 0 and π drop
/// theirs; ±π/2 turn theirs into an outcome shift right after the measurement.
pub fn pauli_simplify(p: &Pattern) -> Result<Pattern, RewriteError> {
    pauli_simplify_traced(p).map(|(q, _)| q)
}

pub fn pauli_simplify_traced(p: &Pattern) -> Result<(Pattern, RewriteTrace), RewriteError> {
    if let Some(i) = first_out_of_place(p) {
        return Err(RewriteError::NotStandardForm(i));
    }
    let mut trace = RewriteTrace::default();
    let mut commands = Vec::with_capacity(p.commands.len());
    for (i, c) in p.commands.iter().enumerate() {
        match c {
            Command::Measure {
                qubit,
                plane,
                angle,
                sign,
            } if !sign.is_empty() && angle.is_pauli() => {
                commands.push(Command::Measure {
                    qubit: qubit.clone(),
                    plane: *plane,
                    angle: *angle,
                    sign: SignalExpr::empty(),
                });
                if angle.is_pauli_y() {
                    trace.push("pauli-y-to-shift", i);
                    commands.push(Command::Shift(qubit.clone(), sign.clone()));
                } else {
                    trace.push("pauli-x-drop-sign", i);
                }
            }
            _ => commands.push(c.clone()),
        }
    }
    Ok((
        Pattern {
            inputs: p.inputs.clone(),
            commands,
        },
        trace,
    ))
}

/// Eliminates every shift by substituting `s[v] + β` for `s[v]` in all later
/// expressions.
pub fn signal_shift(p: &Pattern) -> Result<Pattern, RewriteError> {
    signal_shift_traced(p).map(|(q, _)| q)
}

pub fn signal_shift_traced(p: &Pattern) -> Result<(Pattern, RewriteTrace), RewriteError> {
    if let Some(i) = first_out_of_place(p) {
        return Err(RewriteError::NotStandardForm(i));
    }
    let mut trace = RewriteTrace::default();
    // sub[v]: the accumulated shift of v, over raw outcomes.
    let mut sub: HashMap<QubitId, SignalExpr> = HashMap::new();
    let subst = |sub: &HashMap<QubitId, SignalExpr>, e: &SignalExpr| {
        let mut out = SignalExpr::empty();
        for u in e.iter() {
            out.toggle(u.clone());
            if let Some(s) = sub.get(u) {
                out.xor_with(s);
            }
        }
        out
    };
    let mut commands = Vec::with_capacity(p.commands.len());
    for (i, c) in p.commands.iter().enumerate() {
        match c {
            Command::Shift(v, beta) => {
                let e = subst(&sub, beta);
                sub.entry(v.clone()).or_default().xor_with(&e);
                trace.push("signal-shift", i);
            }
            _ => {
                let mut c = c.clone();
                if let Some(s) = c.signal_mut() {
                    let t = subst(&sub, s);
                    if t != *s {
                        trace.push("substitute", i);
                    }
                    *s = t;
                }
                if !matches!(&c, Command::CorrectX(_, s) | Command::CorrectZ(_, s) if s.is_empty())
                {
                    commands.push(c);
                }
            }
        }
    }
    Ok((
        Pattern {
            inputs: p.inputs.clone(),
            commands,
        },
        trace,
    ))
}

/// signal_shift ∘ pauli_simplify ∘ standardize.
pub fn normalize(p: &Pattern) -> Result<Pattern, RewriteError> {
    normalize_traced(p).map(|(q, _)| q)
}

pub fn normalize_traced(p: &Pattern) -> Result<(Pattern, RewriteTrace), RewriteError> {
    let (a, mut trace) = standardize_traced(p)?;
    let (b, t2) = pauli_simplify_traced(&a)?;
    let (c, t3) = signal_shift_traced(&b)?;
    trace.steps.extend(t2.steps);
    trace.steps.extend(t3.steps);
    Ok((c, trace))
}
