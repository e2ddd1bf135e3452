//! The measurement-calculus command language: qubit names, angles, signal
//! expressions, commands, patterns, and the geometry underlying a pattern.
//!
//! Commands are stored in execution order: the first command in
//! [`Pattern::commands`] is performed first. (Written compositions of maps
//! read right to left; files and in-memory sequences read left to right.)

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// An opaque, totally ordered qubit name.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QubitId(String);

impl QubitId {
    pub fn new(name: impl Into<String>) -> Self {
        QubitId(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Whether `name` can be written in the pattern and circuit text formats.
    pub fn is_valid_name(name: &str) -> bool {
        !name.is_empty()
            && name.chars().all(|c| {
                c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '~' | '\'' | '-' | '@')
            })
    }
}

impl fmt::Debug for QubitId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for QubitId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for QubitId {
    fn from(s: &str) -> Self {
        QubitId(s.to_string())
    }
}

impl From<String> for QubitId {
    fn from(s: String) -> Self {
        QubitId(s)
    }
}

/// An angle that is an integer multiple of π/4, stored canonically as
/// `units ∈ {−3, …, 4}` with θ = units·π/4.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "i64", from = "i64")]
pub struct Angle(i8);

impl Angle {
    pub const ZERO: Angle = Angle(0);
    pub const HALF_PI: Angle = Angle(2);
    pub const PI: Angle = Angle(4);

    /// The canonical angle `units·π/4`, reduced modulo 2π.
    pub fn from_units(units: i64) -> Angle {
        Angle(canonical_units(units) as i8)
    }

    /// The canonical representative in `{−3, …, 4}`.
    pub fn units(self) -> i64 {
        self.0 as i64
    }

    pub fn radians(self) -> f64 {
        self.0 as f64 * std::f64::consts::FRAC_PI_4
    }

    /// θ ∈ {0, π}.
    pub fn is_pauli_x(self) -> bool {
        self.0 == 0 || self.0 == 4
    }

    /// θ ∈ {±π/2}.
    pub fn is_pauli_y(self) -> bool {
        self.0 == 2 || self.0 == -2
    }

    pub fn is_pauli(self) -> bool {
        self.is_pauli_x() || self.is_pauli_y()
    }
}

impl std::ops::Neg for Angle {
    type Output = Angle;

    fn neg(self) -> Angle {
        Angle::from_units(-self.units())
    }
}

impl std::ops::Add for Angle {
    type Output = Angle;

    fn add(self, other: Angle) -> Angle {
        Angle::from_units(self.units() + other.units())
    }
}

/// Reduces `t` modulo 8 into `{−3, …, 4}`.
pub fn canonical_units(t: i64) -> i64 {
    let r = t.rem_euclid(8);
    if r > 4 {
        r - 8
    } else {
        r
    }
}

impl From<i64> for Angle {
    fn from(t: i64) -> Self {
        Angle::from_units(t)
    }
}

impl From<Angle> for i64 {
    fn from(a: Angle) -> Self {
        a.units()
    }
}

impl fmt::Debug for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}π/4", self.0)
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A parity of measurement outcomes `s[a] + s[b] + …` (mod 2). The empty
/// expression is the constant 0.
#[derive(Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SignalExpr(BTreeSet<QubitId>);

impl SignalExpr {
    pub fn empty() -> Self {
        SignalExpr(BTreeSet::new())
    }

    pub fn single(q: impl Into<QubitId>) -> Self {
        let mut s = BTreeSet::new();
        s.insert(q.into());
        SignalExpr(s)
    }

    pub fn from_qubits<I, Q>(qs: I) -> Self
    where
        I: IntoIterator<Item = Q>,
        Q: Into<QubitId>,
    {
        let mut e = SignalExpr::empty();
        for q in qs {
            e.toggle(q.into());
        }
        e
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn contains(&self, q: &QubitId) -> bool {
        self.0.contains(q)
    }

    pub fn iter(&self) -> impl Iterator<Item = &QubitId> {
        self.0.iter()
    }

    /// Adds `q` to the parity (removing it if already present).
    pub fn toggle(&mut self, q: QubitId) {
        if !self.0.remove(&q) {
            self.0.insert(q);
        }
    }

    /// In-place symmetric difference.
    pub fn xor_with(&mut self, other: &SignalExpr) {
        for q in &other.0 {
            self.toggle(q.clone());
        }
    }

    pub fn xor(&self, other: &SignalExpr) -> SignalExpr {
        let mut r = self.clone();
        r.xor_with(other);
        r
    }

    /// Evaluates the parity against a map of outcomes; missing outcomes read 0.
    pub fn eval(&self, outcomes: &impl Fn(&QubitId) -> bool) -> bool {
        self.0.iter().fold(false, |acc, q| acc ^ outcomes(q))
    }

    /// Renames every qubit through `rename`.
    pub fn map(&self, rename: &impl Fn(&QubitId) -> QubitId) -> SignalExpr {
        SignalExpr::from_qubits(self.0.iter().map(rename))
    }
}

impl fmt::Debug for SignalExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self)
    }
}

impl fmt::Display for SignalExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("0");
        }
        let mut first = true;
        for q in &self.0 {
            if !first {
                f.write_str("+")?;
            }
            first = false;
            write!(f, "{q}")?;
        }
        Ok(())
    }
}

/// Measurement plane.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Plane {
    XY,
    YZ,
}

impl fmt::Display for Plane {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Plane::XY => f.write_str("XY"),
            Plane::YZ => f.write_str("YZ"),
        }
    }
}

/// One measurement-calculus command.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Command {
    /// Adjoin a fresh qubit in the state |+⟩.
    Prepare(QubitId),
    /// Controlled-Z between two distinct qubits.
    Entangle(QubitId, QubitId),
    /// Destructive measurement at angle (−1)^sign·angle in the given plane.
    Measure {
        qubit: QubitId,
        plane: Plane,
        angle: Angle,
        sign: SignalExpr,
    },
    /// X^dep.
    CorrectX(QubitId, SignalExpr),
    /// Z^dep.
    CorrectZ(QubitId, SignalExpr),
    /// Toggles the recorded outcome of an already measured qubit by dep.
    Shift(QubitId, SignalExpr),
}

impl Command {
    pub fn measure(qubit: impl Into<QubitId>, angle: Angle) -> Command {
        Command::Measure {
            qubit: qubit.into(),
            plane: Plane::XY,
            angle,
            sign: SignalExpr::empty(),
        }
    }

    pub fn measure_signed(qubit: impl Into<QubitId>, angle: Angle, sign: SignalExpr) -> Command {
        Command::Measure {
            qubit: qubit.into(),
            plane: Plane::XY,
            angle,
            sign,
        }
    }

    /// The qubits the command acts on (for a shift, the shifted qubit).
    pub fn targets(&self) -> Vec<&QubitId> {
        match self {
            Command::Prepare(v)
            | Command::CorrectX(v, _)
            | Command::CorrectZ(v, _)
            | Command::Shift(v, _) => vec![v],
            Command::Entangle(v, w) => vec![v, w],
            Command::Measure { qubit, .. } => vec![qubit],
        }
    }

    /// The classical expression the command reads, if any.
    pub fn signal(&self) -> Option<&SignalExpr> {
        match self {
            Command::Measure { sign, .. } => Some(sign),
            Command::CorrectX(_, s) | Command::CorrectZ(_, s) | Command::Shift(_, s) => Some(s),
            _ => None,
        }
    }

    pub fn signal_mut(&mut self) -> Option<&mut SignalExpr> {
        match self {
            Command::Measure { sign, .. } => Some(sign),
            Command::CorrectX(_, s) | Command::CorrectZ(_, s) | Command::Shift(_, s) => Some(s),
            _ => None,
        }
    }

    /// Renames every qubit (targets and signal references).
    pub fn map_qubits(&self, rename: &impl Fn(&QubitId) -> QubitId) -> Command {
        match self {
            Command::Prepare(v) => Command::Prepare(rename(v)),
            Command::Entangle(v, w) => Command::Entangle(rename(v), rename(w)),
            Command::Measure {
                qubit,
                plane,
                angle,
                sign,
            } => Command::Measure {
                qubit: rename(qubit),
                plane: *plane,
                angle: *angle,
                sign: sign.map(rename),
            },
            Command::CorrectX(v, s) => Command::CorrectX(rename(v), s.map(rename)),
            Command::CorrectZ(v, s) => Command::CorrectZ(rename(v), s.map(rename)),
            Command::Shift(v, s) => Command::Shift(rename(v), s.map(rename)),
        }
    }
}

/// An ordered sequence of commands together with the set of input qubits.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pattern {
    pub inputs: BTreeSet<QubitId>,
    pub commands: Vec<Command>,
}

impl Pattern {
    pub fn new<I, Q>(inputs: I, commands: Vec<Command>) -> Pattern
    where
        I: IntoIterator<Item = Q>,
        Q: Into<QubitId>,
    {
        Pattern {
            inputs: inputs.into_iter().map(Into::into).collect(),
            commands,
        }
    }

    /// Every qubit named by the pattern: inputs and command targets.
    pub fn qubits(&self) -> BTreeSet<QubitId> {
        let mut qs = self.inputs.clone();
        for c in &self.commands {
            for q in c.targets() {
                qs.insert(q.clone());
            }
        }
        qs
    }

    /// Qubits that are measured somewhere in the pattern.
    pub fn measured(&self) -> BTreeSet<QubitId> {
        self.commands
            .iter()
            .filter_map(|c| match c {
                Command::Measure { qubit, .. } => Some(qubit.clone()),
                _ => None,
            })
            .collect()
    }

    /// Qubits that are not measured anywhere in the pattern.
    pub fn outputs(&self) -> BTreeSet<QubitId> {
        let measured = self.measured();
        self.qubits()
            .into_iter()
            .filter(|q| !measured.contains(q))
            .collect()
    }

    pub fn map_qubits(&self, rename: &impl Fn(&QubitId) -> QubitId) -> Pattern {
        Pattern {
            inputs: self.inputs.iter().map(rename).collect(),
            commands: self.commands.iter().map(|c| c.map_qubits(rename)).collect(),
        }
    }
}

/// A single well-formedness violation, located at a command index.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub index: usize,
    pub qubit: QubitId,
    pub kind: ViolationKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ViolationKind {
    DuplicatePrepare,
    DuplicateMeasure,
    UsedAfterMeasure,
    UsedBeforePrepare,
    ForwardSignalReference,
    SelfEntangle,
    ShiftBeforeMeasure,
    ShiftAfterUse,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "command {}: {:?} on {}",
            self.index, self.kind, self.qubit
        )
    }
}

/// The well-formedness report: empty means the pattern is well formed.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct WellFormedReport {
    pub violations: Vec<Violation>,
}

impl WellFormedReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the composition conventions: every qubit prepared at most once and
/// before use, measured at most once and untouched afterwards, and every
/// signal referring only to outcomes that already exist.
pub fn validate_pattern(p: &Pattern) -> WellFormedReport {
    let mut live: BTreeSet<&QubitId> = p.inputs.iter().collect();
    let mut prepared: BTreeSet<&QubitId> = BTreeSet::new();
    let mut measured: BTreeSet<&QubitId> = BTreeSet::new();
    let mut read: BTreeSet<&QubitId> = BTreeSet::new();
    let mut violations = Vec::new();
    let mut flag = |index: usize, qubit: &QubitId, kind| {
        violations.push(Violation {
            index,
            qubit: qubit.clone(),
            kind,
        })
    };

    for (i, c) in p.commands.iter().enumerate() {
        if let Some(sig) = c.signal() {
            for q in sig.iter() {
                if !measured.contains(q) {
                    flag(i, q, ViolationKind::ForwardSignalReference);
                }
            }
        }
        match c {
            Command::Prepare(v) => {
                if p.inputs.contains(v) || prepared.contains(v) || measured.contains(v) {
                    flag(i, v, ViolationKind::DuplicatePrepare);
                } else {
                    prepared.insert(v);
                    live.insert(v);
                }
            }
            Command::Shift(v, _) => {
                if !measured.contains(v) {
                    flag(i, v, ViolationKind::ShiftBeforeMeasure);
                } else if read.contains(v) {
                    flag(i, v, ViolationKind::ShiftAfterUse);
                }
            }
            Command::Measure { qubit, .. } => {
                if measured.contains(qubit) {
                    flag(i, qubit, ViolationKind::DuplicateMeasure);
                } else if !live.contains(qubit) {
                    flag(i, qubit, ViolationKind::UsedBeforePrepare);
                } else {
                    measured.insert(qubit);
                    live.remove(qubit);
                }
            }
            _ => {
                if let Command::Entangle(v, w) = c {
                    if v == w {
                        flag(i, v, ViolationKind::SelfEntangle);
                    }
                }
                for q in c.targets() {
                    if measured.contains(q) {
                        flag(i, q, ViolationKind::UsedAfterMeasure);
                    } else if !live.contains(q) {
                        flag(i, q, ViolationKind::UsedBeforePrepare);
                    }
                }
            }
        }
        if let Some(sig) = c.signal() {
            read.extend(sig.iter());
        }
    }
    WellFormedReport { violations }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum GeometryError {
    #[error("edge endpoint {0} is not a vertex")]
    UnknownVertex(QubitId),
    #[error("self-loop on {0}")]
    SelfLoop(QubitId),
    #[error("geometries are not composable: {0} is shared but is not both an input of the later and an output of the earlier geometry")]
    NotComposable(QubitId),
}

/// An open graph (G, I, O) on named qubits. Vertices are kept sorted and
/// addressed internally by position.
#[derive(Clone, PartialEq, Eq)]
pub struct Geometry {
    names: Vec<QubitId>,
    index: HashMap<QubitId, usize>,
    adj: Vec<Vec<usize>>,
    is_input: Vec<bool>,
    is_output: Vec<bool>,
}

impl fmt::Debug for Geometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Geometry")
            .field("vertices", &self.names)
            .field("edges", &self.edges())
            .field("inputs", &self.inputs())
            .field("outputs", &self.outputs())
            .finish()
    }
}

impl Geometry {
    /// Builds a geometry; inputs and outputs are added as vertices if missing.
    pub fn new<Q: Into<QubitId> + Clone>(
        vertices: impl IntoIterator<Item = Q>,
        edges: impl IntoIterator<Item = (Q, Q)>,
        inputs: impl IntoIterator<Item = Q>,
        outputs: impl IntoIterator<Item = Q>,
    ) -> Result<Geometry, GeometryError> {
        let inputs: BTreeSet<QubitId> = inputs.into_iter().map(Into::into).collect();
        let outputs: BTreeSet<QubitId> = outputs.into_iter().map(Into::into).collect();
        let mut vs: BTreeSet<QubitId> = vertices.into_iter().map(Into::into).collect();
        vs.extend(inputs.iter().cloned());
        vs.extend(outputs.iter().cloned());
        let names: Vec<QubitId> = vs.into_iter().collect();
        let index: HashMap<QubitId, usize> = names
            .iter()
            .enumerate()
            .map(|(i, q)| (q.clone(), i))
            .collect();
        let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); names.len()];
        for (a, b) in edges {
            let (a, b): (QubitId, QubitId) = (a.into(), b.into());
            let ia = *index
                .get(&a)
                .ok_or_else(|| GeometryError::UnknownVertex(a.clone()))?;
            let ib = *index
                .get(&b)
                .ok_or_else(|| GeometryError::UnknownVertex(b.clone()))?;
            if ia == ib {
                return Err(GeometryError::SelfLoop(a));
            }
            adj[ia].insert(ib);
            adj[ib].insert(ia);
        }
        let is_input = names.iter().map(|q| inputs.contains(q)).collect();
        let is_output = names.iter().map(|q| outputs.contains(q)).collect();
        Ok(Geometry {
            names,
            index,
            adj: adj.into_iter().map(|s| s.into_iter().collect()).collect(),
            is_input,
            is_output,
        })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, i: usize) -> &QubitId {
        &self.names[i]
    }

    pub fn names(&self) -> &[QubitId] {
        &self.names
    }

    pub fn index_of(&self, q: &QubitId) -> Option<usize> {
        self.index.get(q).copied()
    }

    /// Sorted neighbor positions of vertex `i`.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adj[i]
    }

    pub fn is_adjacent(&self, i: usize, j: usize) -> bool {
        self.adj[i].binary_search(&j).is_ok()
    }

    pub fn is_input(&self, i: usize) -> bool {
        self.is_input[i]
    }

    pub fn is_output(&self, i: usize) -> bool {
        self.is_output[i]
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn input_count(&self) -> usize {
        self.is_input.iter().filter(|&&b| b).count()
    }

    pub fn output_count(&self) -> usize {
        self.is_output.iter().filter(|&&b| b).count()
    }

    pub fn vertices(&self) -> BTreeSet<QubitId> {
        self.names.iter().cloned().collect()
    }

    /// Edges as name pairs `(a, b)` with `a < b`, sorted.
    pub fn edges(&self) -> BTreeSet<(QubitId, QubitId)> {
        let mut es = BTreeSet::new();
        for (i, ns) in self.adj.iter().enumerate() {
            for &j in ns {
                if i < j {
                    es.insert((self.names[i].clone(), self.names[j].clone()));
                }
            }
        }
        es
    }

    pub fn inputs(&self) -> BTreeSet<QubitId> {
        (0..self.len())
            .filter(|&i| self.is_input[i])
            .map(|i| self.names[i].clone())
            .collect()
    }

    pub fn outputs(&self) -> BTreeSet<QubitId> {
        (0..self.len())
            .filter(|&i| self.is_output[i])
            .map(|i| self.names[i].clone())
            .collect()
    }

    /// Composition `g2 ∘ g1` (g1 performed first): vertex union, edge
    /// symmetric difference, Ī = I1 ∪ (I2∖O1), Ō = O2 ∪ (O1∖I2).
    pub fn compose(g2: &Geometry, g1: &Geometry) -> Result<Geometry, GeometryError> {
        let (i1, o1) = (g1.inputs(), g1.outputs());
        let (i2, o2) = (g2.inputs(), g2.outputs());
        for q in g2.vertices().intersection(&g1.vertices()) {
            if !(i2.contains(q) && o1.contains(q)) {
                return Err(GeometryError::NotComposable(q.clone()));
            }
        }
        let mut vs = g1.vertices();
        vs.extend(g2.vertices());
        let edges: BTreeSet<_> = g1
            .edges()
            .symmetric_difference(&g2.edges())
            .cloned()
            .collect();
        let inputs: BTreeSet<QubitId> = i1.iter().chain(i2.difference(&o1)).cloned().collect();
        let outputs: BTreeSet<QubitId> = o2.iter().chain(o1.difference(&i2)).cloned().collect();
        Geometry::new(vs, edges, inputs, outputs)
    }

    pub fn to_json(&self, angles: Option<&BTreeMap<QubitId, (Plane, Angle)>>) -> serde_json::Value {
        let edges: Vec<[String; 2]> = self
            .edges()
            .into_iter()
            .map(|(a, b)| [a.to_string(), b.to_string()])
            .collect();
        let mut v = serde_json::json!({
            "vertices": self.names,
            "edges": edges,
            "inputs": self.inputs(),
            "outputs": self.outputs(),
        });
        if let Some(angles) = angles {
            let a: BTreeMap<String, serde_json::Value> = angles
                .iter()
                .map(|(q, (plane, angle))| {
                    (
                        q.to_string(),
                        serde_json::json!({"plane": plane.to_string(), "angle": angle.units()}),
                    )
                })
                .collect();
            v["angles"] = serde_json::to_value(a).expect("angle map serializes");
        }
        v
    }
}

/// Measurement annotations of a pattern: plane and default angle per measured qubit.
pub type AngleMap = BTreeMap<QubitId, (Plane, Angle)>;

/// The geometry underlying a pattern. Entangling commands are collapsed by
/// parity: an even number of `E v w` yields no edge.
pub fn geometry_of(p: &Pattern) -> (Geometry, AngleMap) {
    let mut parity: BTreeMap<(QubitId, QubitId), bool> = BTreeMap::new();
    let mut angles = AngleMap::new();
    for c in &p.commands {
        match c {
            Command::Entangle(v, w) => {
                let key = if v < w {
                    (v.clone(), w.clone())
                } else {
                    (w.clone(), v.clone())
                };
                *parity.entry(key).or_insert(false) ^= true;
            }
            Command::Measure {
                qubit,
                plane,
                angle,
                ..
            } => {
                angles.insert(qubit.clone(), (*plane, *angle));
            }
            _ => {}
        }
    }
    let vertices = p.qubits();
    let outputs: Vec<QubitId> = vertices
        .iter()
        .filter(|q| !angles.contains_key(*q))
        .cloned()
        .collect();
    let edges = parity.into_iter().filter(|(_, odd)| *odd).map(|(e, _)| e);
    let g = Geometry::new(vertices, edges, p.inputs.iter().cloned(), outputs)
        .expect("pattern edges name pattern qubits and are loop-free after validation");
    (g, angles)
}

/// Composition `p2 ∘ p1`: p1's commands followed by p2's. Qubits of p2 that
/// are not inputs of p2 but collide with names in p1 are renamed fresh.
pub fn compose_pattern(p2: &Pattern, p1: &Pattern) -> Result<Pattern, GeometryError> {
    let v1 = p1.qubits();
    let o1 = p1.outputs();
    for q in &p2.inputs {
        if v1.contains(q) && !o1.contains(q) {
            return Err(GeometryError::NotComposable(q.clone()));
        }
    }
    let v2 = p2.qubits();
    let mut taken: BTreeSet<QubitId> = v1.union(&v2).cloned().collect();
    let mut renames: HashMap<QubitId, QubitId> = HashMap::new();
    for q in &v2 {
        if !p2.inputs.contains(q) && v1.contains(q) {
            let mut k = 1;
            let fresh = loop {
                let cand = QubitId::new(format!("{q}'{k}"));
                if !taken.contains(&cand) {
                    break cand;
                }
                k += 1;
            };
            taken.insert(fresh.clone());
            renames.insert(q.clone(), fresh);
        }
    }
    let p2 = p2.map_qubits(&|q| renames.get(q).cloned().unwrap_or_else(|| q.clone()));
    let mut inputs = p1.inputs.clone();
    inputs.extend(p2.inputs.iter().filter(|q| !o1.contains(*q)).cloned());
    let mut commands = p1.commands.clone();
    commands.extend(p2.commands);
    Ok(Pattern { inputs, commands })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(s: &str) -> QubitId {
        QubitId::from(s)
    }

    pub(crate) fn fj(w: &str, v: &str, theta: i64) -> Vec<Command> {
        vec![
            Command::Prepare(q(w)),
            Command::Entangle(q(v), q(w)),
            Command::measure(v, Angle::from_units(-theta)),
            Command::CorrectX(q(w), SignalExpr::single(v)),
        ]
    }

    #[test]
    fn angle_canonicalization_is_mod_eight() {
        for t in -40..40 {
            let a = Angle::from_units(t);
            assert!((-3..=4).contains(&a.units()));
            assert_eq!((a.units() - t).rem_euclid(8), 0);
        }
        assert!(Angle::from_units(4).is_pauli_x());
        assert!(Angle::from_units(-2).is_pauli_y());
        assert!(!Angle::from_units(1).is_pauli());
    }

    #[test]
    fn signal_expressions_form_a_group_under_xor() {
        let a = SignalExpr::from_qubits(["a", "b"]);
        let b = SignalExpr::from_qubits(["b", "c"]);
        assert_eq!(a.xor(&b), SignalExpr::from_qubits(["a", "c"]));
        assert!(a.xor(&a).is_empty());
        assert_eq!(SignalExpr::from_qubits(["a", "a"]), SignalExpr::empty());
    }

    #[test]
    fn fj_pattern_is_well_formed() {
        let p = Pattern::new(["v"], fj("w", "v", 1));
        assert!(validate_pattern(&p).is_ok());
        assert!(validate_pattern(&Pattern::default()).is_ok());
    }

    #[test]
    fn double_measurement_is_flagged() {
        let p = Pattern::new(
            ["v"],
            vec![
                Command::measure("v", Angle::ZERO),
                Command::measure("v", Angle::ZERO),
            ],
        );
        let r = validate_pattern(&p);
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.violations[0].kind, ViolationKind::DuplicateMeasure);
        assert_eq!(r.violations[0].index, 1);
    }

    #[test]
    fn other_violations_are_flagged() {
        let kinds = |p: Pattern| -> Vec<ViolationKind> {
            validate_pattern(&p)
                .violations
                .into_iter()
                .map(|v| v.kind)
                .collect()
        };
        assert_eq!(
            kinds(Pattern::new(["v"], vec![Command::Prepare(q("v"))])),
            vec![ViolationKind::DuplicatePrepare]
        );
        assert_eq!(
            kinds(Pattern::new(
                Vec::<QubitId>::new(),
                vec![Command::Entangle(q("a"), q("b"))]
            )),
            vec![
                ViolationKind::UsedBeforePrepare,
                ViolationKind::UsedBeforePrepare
            ]
        );
        assert_eq!(
            kinds(Pattern::new(
                ["v"],
                vec![
                    Command::measure("v", Angle::ZERO),
                    Command::CorrectX(q("v"), SignalExpr::empty())
                ]
            )),
            vec![ViolationKind::UsedAfterMeasure]
        );
        assert_eq!(
            kinds(Pattern::new(
                ["v", "w"],
                vec![Command::CorrectX(q("w"), SignalExpr::single("v"))]
            )),
            vec![ViolationKind::ForwardSignalReference]
        );
        assert_eq!(
            kinds(Pattern::new(
                ["v", "w"],
                vec![
                    Command::measure("v", Angle::ZERO),
                    Command::CorrectX(q("w"), SignalExpr::single("v")),
                    Command::Shift(q("v"), SignalExpr::empty()),
                ]
            )),
            vec![ViolationKind::ShiftAfterUse]
        );
    }

    #[test]
    fn geometry_of_fj_is_a_single_edge() {
        let p = Pattern::new(["v"], fj("w", "v", 3));
        let (g, angles) = geometry_of(&p);
        assert_eq!(g.edges(), [(q("v"), q("w"))].into_iter().collect());
        assert_eq!(g.inputs(), [q("v")].into_iter().collect());
        assert_eq!(g.outputs(), [q("w")].into_iter().collect());
        assert_eq!(angles[&q("v")], (Plane::XY, Angle::from_units(-3)));
    }

    #[test]
    fn geometry_of_fzz_is_a_star() {
        let p = Pattern::new(
            ["v", "w"],
            vec![
                Command::Prepare(q("a")),
                Command::Entangle(q("a"), q("v")),
                Command::Entangle(q("a"), q("w")),
                Command::measure("a", Angle::HALF_PI),
                Command::CorrectZ(q("v"), SignalExpr::single("a")),
                Command::CorrectZ(q("w"), SignalExpr::single("a")),
            ],
        );
        let (g, _) = geometry_of(&p);
        let a = g.index_of(&q("a")).unwrap();
        assert_eq!(g.neighbors(a).len(), 2);
        assert_eq!(g.edge_count(), 2);
        assert_eq!(g.inputs(), g.outputs());
    }

    #[test]
    fn repeated_entanglement_cancels_in_the_geometry() {
        let p = Pattern::new(
            ["u", "w"],
            vec![
                Command::Entangle(q("u"), q("w")),
                Command::Entangle(q("w"), q("u")),
            ],
        );
        assert_eq!(geometry_of(&p).0.edge_count(), 0);
        assert_eq!(p.commands.len(), 2);
    }

    #[test]
    fn composing_two_fj_geometries_gives_a_path() {
        let g1 = geometry_of(&Pattern::new(["v"], fj("w", "v", 1))).0;
        let g2 = geometry_of(&Pattern::new(["w"], fj("x", "w", 2))).0;
        let g = Geometry::compose(&g2, &g1).unwrap();
        assert_eq!(
            g.edges(),
            [(q("v"), q("w")), (q("w"), q("x"))].into_iter().collect()
        );
        assert_eq!(g.inputs(), [q("v")].into_iter().collect());
        assert_eq!(g.outputs(), [q("x")].into_iter().collect());
    }

    #[test]
    fn disjoint_geometries_compose_to_a_disjoint_union() {
        let g1 = Geometry::new(["a", "b"], [("a", "b")], ["a"], ["b"]).unwrap();
        let g2 = Geometry::new(["c", "d"], [("c", "d")], ["c"], ["d"]).unwrap();
        let g = Geometry::compose(&g2, &g1).unwrap();
        assert_eq!(g.edge_count(), 2);
        assert_eq!(g.inputs().len(), 2);
        assert_eq!(g.outputs().len(), 2);
    }

    #[test]
    fn sharing_a_non_interface_vertex_is_not_composable() {
        let g1 = Geometry::new(["a", "b"], [("a", "b")], ["a"], ["b"]).unwrap();
        let g2 = Geometry::new(["a", "c"], [("a", "c")], ["c"], ["a"]).unwrap();
        assert_eq!(
            Geometry::compose(&g2, &g1),
            Err(GeometryError::NotComposable(q("a")))
        );
    }

    #[test]
    fn composing_patterns_matches_composing_geometries() {
        let p1 = Pattern::new(["v"], fj("w", "v", 1));
        let p2 = Pattern::new(["w"], fj("x", "w", 2));
        let p = compose_pattern(&p2, &p1).unwrap();
        assert!(validate_pattern(&p).is_ok());
        let g = Geometry::compose(&geometry_of(&p2).0, &geometry_of(&p1).0).unwrap();
        assert_eq!(geometry_of(&p).0, g);
    }

    #[test]
    fn internal_name_clashes_are_renamed() {
        let p1 = Pattern::new(["v"], fj("w", "v", 1));
        // p2 reuses "v" as an internal (prepared) qubit.
        let p2 = Pattern::new(["w"], fj("v", "w", 2));
        let p = compose_pattern(&p2, &p1).unwrap();
        assert!(validate_pattern(&p).is_ok());
        assert!(p.outputs().contains(&q("v'1")));
    }

    #[test]
    fn input_clashing_with_a_measured_qubit_is_not_composable() {
        let p1 = Pattern::new(["v"], fj("w", "v", 1));
        let p2 = Pattern::new(["v"], fj("x", "v", 2));
        assert!(compose_pattern(&p2, &p1).is_err());
    }
}
