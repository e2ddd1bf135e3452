//! Stable-index tensor expressions: the circuit IR.
//!
//! Each term carries the indices it leaves unchanged (stable), the indices it
//! retires (deprecated) and the fresh indices it introduces (advanced).
//! Basis-preserving gates only take stable indices, so commuting diagonal
//! gates can be reordered without changing the expression's structure.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{Circuit, Gate};
use crate::pattern::{canonical_units, Angle, QubitId};

/// A tensor index `v_j`: the `generation`-th segment of wire `qubit`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct IndexId {
    pub qubit: QubitId,
    pub generation: u32,
}

impl IndexId {
    pub fn new(qubit: impl Into<QubitId>, generation: u32) -> IndexId {
        IndexId {
            qubit: qubit.into(),
            generation,
        }
    }

    /// The name used when the index becomes a qubit of a pattern.
    pub fn name(&self) -> QubitId {
        QubitId::new(format!("{}.{}", self.qubit, self.generation))
    }
}

impl fmt::Debug for IndexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.qubit, self.generation)
    }
}

impl fmt::Display for IndexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.qubit, self.generation)
    }
}

/// The operator carried by a term.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TermGate {
    H,
    /// T^k with k reduced into {−3, …, 4}.
    Tpow(i8),
    J(Angle),
    CZ,
    ZZ,
    /// exp(−iθ Z^{⊗d}/2) on `arity` stable indices.
    Zzz {
        arity: u8,
        angle: Angle,
    },
    /// Preparation of |+⟩ on a fresh index.
    KetPlus,
    /// The projection ⟨+_{π/2}| retiring an index.
    ProjPlusHalfPi,
}

impl TermGate {
    pub fn tpow(k: i64) -> TermGate {
        TermGate::Tpow(canonical_units(k) as i8)
    }

    /// Gates whose stable operands are interchangeable.
    pub fn is_symmetric(self) -> bool {
        matches!(self, TermGate::CZ | TermGate::ZZ | TermGate::Zzz { .. })
    }

    fn rank(self) -> u8 {
        match self {
            TermGate::KetPlus => 0,
            TermGate::Tpow(_) => 1,
            TermGate::CZ => 2,
            TermGate::ZZ => 3,
            TermGate::Zzz { .. } => 4,
            TermGate::H => 5,
            TermGate::J(_) => 6,
            TermGate::ProjPlusHalfPi => 7,
        }
    }
}

impl fmt::Display for TermGate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TermGate::H => f.write_str("H"),
            TermGate::Tpow(k) => write!(f, "T^{k}"),
            TermGate::J(a) => write!(f, "J({a})"),
            TermGate::CZ => f.write_str("CZ"),
            TermGate::ZZ => f.write_str("ZZ"),
            TermGate::Zzz { arity, angle } => write!(f, "ZZZ{arity}({angle})"),
            TermGate::KetPlus => f.write_str("KET+"),
            TermGate::ProjPlusHalfPi => f.write_str("P+"),
        }
    }
}

/// One factor `U[s⃗ : a⃗ / d⃗]`. `None` entries are placeholders.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Term {
    pub gate: TermGate,
    pub stable: Vec<IndexId>,
    pub deprecated: Vec<Option<IndexId>>,
    pub advanced: Vec<Option<IndexId>>,
}

impl Term {
    /// A single-wire basis-changing term `U[: a / d]`.
    pub fn moving(gate: TermGate, deprecated: IndexId, advanced: IndexId) -> Term {
        Term {
            gate,
            stable: vec![],
            deprecated: vec![Some(deprecated)],
            advanced: vec![Some(advanced)],
        }
    }

    /// A diagonal term on stable indices only.
    pub fn diagonal(gate: TermGate, stable: Vec<IndexId>) -> Term {
        Term {
            gate,
            stable,
            deprecated: vec![],
            advanced: vec![],
        }
    }

    pub fn ket_plus(advanced: IndexId) -> Term {
        Term {
            gate: TermGate::KetPlus,
            stable: vec![],
            deprecated: vec![None],
            advanced: vec![Some(advanced)],
        }
    }

    pub fn proj_plus_half_pi(deprecated: IndexId) -> Term {
        Term {
            gate: TermGate::ProjPlusHalfPi,
            stable: vec![],
            deprecated: vec![Some(deprecated)],
            advanced: vec![None],
        }
    }

    /// Every index named by the term.
    pub fn indices(&self) -> impl Iterator<Item = &IndexId> {
        self.stable
            .iter()
            .chain(self.deprecated.iter().flatten())
            .chain(self.advanced.iter().flatten())
    }

    fn shape_ok(&self) -> bool {
        let (s, d, a) = (
            self.stable.len(),
            self.deprecated.len(),
            self.advanced.len(),
        );
        let full = |v: &Vec<Option<IndexId>>| v.iter().all(Option::is_some);
        match self.gate {
            TermGate::H | TermGate::J(_) => {
                s == 0 && d == 1 && a == 1 && full(&self.deprecated) && full(&self.advanced)
            }
            TermGate::Tpow(_) => s == 1 && d == 0 && a == 0,
            TermGate::CZ | TermGate::ZZ => {
                s == 2 && d == 0 && a == 0 && self.stable[0] != self.stable[1]
            }
            TermGate::Zzz { arity, .. } => {
                s == arity as usize && d == 0 && a == 0 && {
                    let set: BTreeSet<_> = self.stable.iter().collect();
                    set.len() == s
                }
            }
            TermGate::KetPlus => {
                s == 0 && self.deprecated == vec![None] && a == 1 && full(&self.advanced)
            }
            TermGate::ProjPlusHalfPi => {
                s == 0 && d == 1 && full(&self.deprecated) && self.advanced == vec![None]
            }
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |v: &[Option<IndexId>]| {
            v.iter()
                .map(|x| x.as_ref().map_or("_".to_string(), |i| i.to_string()))
                .collect::<Vec<_>>()
                .join(",")
        };
        let stable: Vec<String> = self.stable.iter().map(|i| i.to_string()).collect();
        write!(
            f,
            "{}[{}:{}/{}]",
            self.gate,
            stable.join(","),
            list(&self.advanced),
            list(&self.deprecated)
        )
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum StableIndexError {
    #[error("gate {0} acts on an undeclared qubit")]
    UnknownQubit(String),
    #[error("gate {0} is not supported by this construction")]
    UnsupportedGate(String),
    #[error("KET+ on {0}, which already exists")]
    DuplicateFresh(QubitId),
    #[error("two-qubit gate on non-neighbouring wires {0} and {1}")]
    NotNearestNeighbor(QubitId, QubitId),
    #[error("the term precedence relation has a cycle")]
    CyclicExpression,
    #[error("malformed expression: {0}")]
    Malformed(String),
}

/// A product of terms with its free input and output indices.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StableIndexExpr {
    pub terms: Vec<Term>,
    /// Indices never advanced (the input interface), in register order.
    pub free_in: Vec<IndexId>,
    /// Indices never deprecated (the output interface), in register order.
    pub free_out: Vec<IndexId>,
}

/// Role bookkeeping for one index.
#[derive(Clone, Debug, Default)]
struct Roles {
    advanced_by: Option<usize>,
    deprecated_by: Option<usize>,
    stable_in: Vec<usize>,
}

impl StableIndexExpr {
    /// Every index appearing in a term or on the interface.
    pub fn indices(&self) -> BTreeSet<IndexId> {
        let mut s: BTreeSet<IndexId> = self
            .terms
            .iter()
            .flat_map(|t| t.indices().cloned())
            .collect();
        s.extend(self.free_in.iter().cloned());
        s.extend(self.free_out.iter().cloned());
        s
    }

    fn roles(&self) -> Result<HashMap<&IndexId, Roles>, StableIndexError> {
        let mut roles: HashMap<&IndexId, Roles> = HashMap::new();
        for (i, t) in self.terms.iter().enumerate() {
            if !t.shape_ok() {
                return Err(StableIndexError::Malformed(format!(
                    "term {i} ({t}) has the wrong shape"
                )));
            }
            for x in t.advanced.iter().flatten() {
                let r = roles.entry(x).or_default();
                if r.advanced_by.replace(i).is_some() {
                    return Err(StableIndexError::Malformed(format!("{x} advanced twice")));
                }
            }
            for x in t.deprecated.iter().flatten() {
                let r = roles.entry(x).or_default();
                if r.deprecated_by.replace(i).is_some() {
                    return Err(StableIndexError::Malformed(format!("{x} deprecated twice")));
                }
            }
            for x in &t.stable {
                roles.entry(x).or_default().stable_in.push(i);
            }
        }
        Ok(roles)
    }

    /// Checks the structural invariants: each index advanced and deprecated at
    /// most once, term shapes per gate, an acyclic precedence relation, and
    /// free lists matching the never-advanced / never-deprecated indices.
    pub fn validate(&self) -> Result<(), StableIndexError> {
        let roles = self.roles()?;
        self.precedence(&roles)?;
        let never_adv: BTreeSet<&IndexId> = roles
            .iter()
            .filter(|(_, r)| r.advanced_by.is_none())
            .map(|(x, _)| *x)
            .collect();
        let never_dep: BTreeSet<&IndexId> = roles
            .iter()
            .filter(|(_, r)| r.deprecated_by.is_none())
            .map(|(x, _)| *x)
            .collect();
        let fin: BTreeSet<&IndexId> = self
            .free_in
            .iter()
            .filter(|x| roles.contains_key(x))
            .collect();
        let fout: BTreeSet<&IndexId> = self
            .free_out
            .iter()
            .filter(|x| roles.contains_key(x))
            .collect();
        if fin != never_adv || fout != never_dep {
            return Err(StableIndexError::Malformed(
                "free index lists disagree with the terms".into(),
            ));
        }
        if self.free_in.len() != self.free_in.iter().collect::<BTreeSet<_>>().len()
            || self.free_out.len() != self.free_out.iter().collect::<BTreeSet<_>>().len()
        {
            return Err(StableIndexError::Malformed("repeated free index".into()));
        }
        Ok(())
    }

    /// Successor lists of the term precedence relation (advancer before
    /// stable users before deprecator), or an error if it has a cycle.
    fn precedence(
        &self,
        roles: &HashMap<&IndexId, Roles>,
    ) -> Result<Vec<Vec<usize>>, StableIndexError> {
        let n = self.terms.len();
        let mut succ: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        for r in roles.values() {
            if let Some(a) = r.advanced_by {
                for &s in &r.stable_in {
                    succ[a].insert(s);
                }
                if let Some(d) = r.deprecated_by {
                    succ[a].insert(d);
                }
            }
            if let Some(d) = r.deprecated_by {
                for &s in &r.stable_in {
                    succ[s].insert(d);
                }
            }
        }
        let succ: Vec<Vec<usize>> = succ
            .into_iter()
            .enumerate()
            .map(|(i, s)| s.into_iter().filter(|&j| j != i).collect())
            .collect();
        let mut indeg = vec![0usize; n];
        for s in &succ {
            for &j in s {
                indeg[j] += 1;
            }
        }
        let mut queue: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut seen = 0;
        while let Some(i) = queue.pop() {
            seen += 1;
            for &j in &succ[i] {
                indeg[j] -= 1;
                if indeg[j] == 0 {
                    queue.push(j);
                }
            }
        }
        if seen != n {
            return Err(StableIndexError::CyclicExpression);
        }
        Ok(succ)
    }

    /// Index successor function: deprecated ↦ advanced index on the same wire.
    pub fn successor_fn(&self) -> BTreeMap<IndexId, IndexId> {
        let mut f = BTreeMap::new();
        for t in &self.terms {
            for (d, a) in t.deprecated.iter().zip(&t.advanced) {
                if let (Some(d), Some(a)) = (d, a) {
                    if d.qubit == a.qubit {
                        f.insert(d.clone(), a.clone());
                    }
                }
            }
        }
        f
    }

    /// The interaction graph: vertices are indices; edges join the deprecated
    /// and advanced index of each H/J term and the stable pairs of each
    /// multi-qubit diagonal term.
    pub fn interaction_graph(&self) -> InteractionGraph {
        let mut edges = BTreeSet::new();
        for t in &self.terms {
            match t.gate {
                TermGate::H | TermGate::J(_) => {
                    if let (Some(Some(d)), Some(Some(a))) =
                        (t.deprecated.first(), t.advanced.first())
                    {
                        edges.insert(ordered(d.clone(), a.clone()));
                    }
                }
                TermGate::CZ | TermGate::ZZ | TermGate::Zzz { .. } => {
                    for (i, x) in t.stable.iter().enumerate() {
                        for y in &t.stable[i + 1..] {
                            edges.insert(ordered(x.clone(), y.clone()));
                        }
                    }
                }
                _ => {}
            }
        }
        InteractionGraph {
            vertices: self.indices(),
            edges,
        }
    }

    /// A deterministic linear extension of the term precedence relation.
    /// Among available terms the smallest (generation, wire, gate) goes
    /// first, which lays grid-shaped expressions out column by column.
    pub fn to_pattern_order(&self) -> Result<Vec<usize>, StableIndexError> {
        let roles = self.roles()?;
        let succ = self.precedence(&roles)?;
        let n = self.terms.len();
        let mut indeg = vec![0usize; n];
        for s in &succ {
            for &j in s {
                indeg[j] += 1;
            }
        }
        let key = |i: usize| {
            let t = &self.terms[i];
            let anchor = t
                .stable
                .iter()
                .chain(t.deprecated.iter().flatten())
                .min_by(|a, b| (a.generation, &a.qubit).cmp(&(b.generation, &b.qubit)))
                .or_else(|| t.advanced.iter().flatten().next())
                .cloned()
                .unwrap_or_else(|| IndexId::new("", 0));
            (anchor.generation, anchor.qubit, t.gate.rank(), i)
        };
        let mut heap: BinaryHeap<Reverse<(u32, QubitId, u8, usize)>> = (0..n)
            .filter(|&i| indeg[i] == 0)
            .map(|i| Reverse(key(i)))
            .collect();
        let mut order = Vec::with_capacity(n);
        while let Some(Reverse((_, _, _, i))) = heap.pop() {
            order.push(i);
            for &j in &succ[i] {
                indeg[j] -= 1;
                if indeg[j] == 0 {
                    heap.push(Reverse(key(j)));
                }
            }
        }
        Ok(order)
    }

    /// Length (in terms) of the longest chain of the precedence relation.
    pub fn depth(&self) -> usize {
        let Ok(order) = self.to_pattern_order() else {
            return 0;
        };
        let roles = self.roles().expect("ordered expressions are well formed");
        let succ = self
            .precedence(&roles)
            .expect("ordered expressions are acyclic");
        let mut longest = vec![1usize; self.terms.len()];
        for &i in &order {
            for &j in &succ[i] {
                longest[j] = longest[j].max(longest[i] + 1);
            }
        }
        longest.into_iter().max().unwrap_or(0)
    }

    /// Term counts keyed by the number of distinct wires a term acts on.
    pub fn gate_counts_by_arity(&self) -> BTreeMap<usize, usize> {
        let mut counts = BTreeMap::new();
        for t in &self.terms {
            let wires: BTreeSet<&QubitId> = t.indices().map(|x| &x.qubit).collect();
            *counts.entry(wires.len().max(1)).or_insert(0) += 1;
        }
        counts
    }

    /// Number of wires: chains starting at a free input or a fresh preparation.
    pub fn wire_count(&self) -> usize {
        self.free_in.len()
            + self
                .terms
                .iter()
                .filter(|t| t.gate == TermGate::KetPlus)
                .count()
    }

    /// Renames indices through `map` (indices absent from `map` are kept).
    pub fn rename(&self, map: &HashMap<IndexId, IndexId>) -> StableIndexExpr {
        let r = |x: &IndexId| map.get(x).cloned().unwrap_or_else(|| x.clone());
        let ro = |x: &Option<IndexId>| x.as_ref().map(r);
        StableIndexExpr {
            terms: self
                .terms
                .iter()
                .map(|t| Term {
                    gate: t.gate,
                    stable: t.stable.iter().map(r).collect(),
                    deprecated: t.deprecated.iter().map(ro).collect(),
                    advanced: t.advanced.iter().map(ro).collect(),
                })
                .collect(),
            free_in: self.free_in.iter().map(r).collect(),
            free_out: self.free_out.iter().map(r).collect(),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let idx = |v: &[Option<IndexId>]| -> Vec<Option<String>> {
            v.iter()
                .map(|x| x.as_ref().map(|i| i.to_string()))
                .collect()
        };
        let terms: Vec<serde_json::Value> = self
            .terms
            .iter()
            .map(|t| {
                serde_json::json!({
                    "gate": t.gate.to_string(),
                    "stable": t.stable.iter().map(|i| i.to_string()).collect::<Vec<_>>(),
                    "advanced": idx(&t.advanced),
                    "deprecated": idx(&t.deprecated),
                })
            })
            .collect();
        serde_json::json!({
            "terms": terms,
            "free_in": self.free_in.iter().map(|i| i.to_string()).collect::<Vec<_>>(),
            "free_out": self.free_out.iter().map(|i| i.to_string()).collect::<Vec<_>>(),
        })
    }
}

impl fmt::Display for StableIndexExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let order = self
            .to_pattern_order()
            .unwrap_or_else(|_| (0..self.terms.len()).collect());
        let parts: Vec<String> = order.iter().map(|&i| self.terms[i].to_string()).collect();
        write!(f, "{}", parts.join(" ; "))
    }
}

fn ordered(a: IndexId, b: IndexId) -> (IndexId, IndexId) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// A simple graph on tensor indices.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct InteractionGraph {
    pub vertices: BTreeSet<IndexId>,
    pub edges: BTreeSet<(IndexId, IndexId)>,
}

/// Reads an expression back as a gate list in pattern order. Each wire is
/// named after the index that starts it (its qubit name when that is
/// unambiguous). Fails on terms the circuit language cannot express.
pub fn to_circuit(e: &StableIndexExpr) -> Result<Circuit, StableIndexError> {
    let order = e.to_pattern_order()?;
    let mut starts: Vec<&IndexId> = e.free_in.iter().collect();
    starts.extend(
        e.terms
            .iter()
            .filter(|t| t.gate == TermGate::KetPlus)
            .flat_map(|t| t.advanced.iter().flatten()),
    );
    let mut counts: HashMap<&QubitId, usize> = HashMap::new();
    for x in &starts {
        *counts.entry(&x.qubit).or_insert(0) += 1;
    }
    let wire_name = |x: &IndexId| {
        if counts.get(&x.qubit) == Some(&1) {
            x.qubit.clone()
        } else {
            x.name()
        }
    };
    let mut wire: HashMap<IndexId, QubitId> = e
        .free_in
        .iter()
        .map(|x| (x.clone(), wire_name(x)))
        .collect();
    let inputs: Vec<QubitId> = e.free_in.iter().map(|x| wire[x].clone()).collect();
    let lookup = |wire: &HashMap<IndexId, QubitId>, x: &IndexId| {
        wire.get(x).cloned().ok_or_else(|| {
            StableIndexError::Malformed(format!("index {x} is used before it is introduced"))
        })
    };
    let mut gates = Vec::new();
    for i in order {
        let t = &e.terms[i];
        match (
            t.gate,
            t.stable.as_slice(),
            t.deprecated.as_slice(),
            t.advanced.as_slice(),
        ) {
            (TermGate::Tpow(k), [x], [], []) => {
                let w = lookup(&wire, x)?;
                let g = if k >= 0 { Gate::T(w) } else { Gate::Tdg(w) };
                gates.extend(std::iter::repeat(g).take(k.unsigned_abs() as usize));
            }
            (TermGate::CZ, [a, b], [], []) => {
                gates.push(Gate::CZ(lookup(&wire, a)?, lookup(&wire, b)?))
            }
            (TermGate::ZZ, [a, b], [], []) => {
                gates.push(Gate::ZZ(lookup(&wire, a)?, lookup(&wire, b)?))
            }
            (TermGate::H | TermGate::J(_), [], [Some(d)], [Some(a)]) => {
                let w = lookup(&wire, d)?;
                gates.push(match t.gate {
                    TermGate::J(theta) => Gate::J(theta, w.clone()),
                    _ => Gate::H(w.clone()),
                });
                wire.insert(a.clone(), w);
            }
            (TermGate::KetPlus, [], [None], [Some(a)]) => {
                let w = wire_name(a);
                gates.push(Gate::KetPlus(w.clone()));
                wire.insert(a.clone(), w);
            }
            _ => {
                return Err(StableIndexError::UnsupportedGate(format!(
                    "{t} has no gate-list form"
                )))
            }
        }
    }
    Ok(Circuit { inputs, gates })
}

/// Transliterates a gate list into a stable-index expression, allocating
/// indices `v_0, v_1, …` per wire. Diagonal gates take stable indices;
/// H and J retire the current index and advance the next.
pub fn from_gates_free(c: &Circuit) -> Result<StableIndexExpr, StableIndexError> {
    let mut current: HashMap<QubitId, u32> = c.inputs.iter().map(|q| (q.clone(), 0)).collect();
    let mut terms = Vec::new();
    let cur = |current: &HashMap<QubitId, u32>, q: &QubitId, g: &Gate| {
        current
            .get(q)
            .map(|&j| IndexId::new(q.clone(), j))
            .ok_or_else(|| StableIndexError::UnknownQubit(g.to_string()))
    };
    for g in &c.gates {
        match g {
            Gate::KetPlus(q) => {
                if current.contains_key(q) {
                    return Err(StableIndexError::DuplicateFresh(q.clone()));
                }
                current.insert(q.clone(), 0);
                terms.push(Term::ket_plus(IndexId::new(q.clone(), 0)));
            }
            Gate::H(q) | Gate::J(_, q) => {
                let d = cur(&current, q, g)?;
                let a = IndexId::new(q.clone(), d.generation + 1);
                current.insert(q.clone(), a.generation);
                let gate = match g {
                    Gate::J(t, _) => TermGate::J(*t),
                    _ => TermGate::H,
                };
                terms.push(Term::moving(gate, d, a));
            }
            Gate::T(q) => terms.push(Term::diagonal(
                TermGate::Tpow(1),
                vec![cur(&current, q, g)?],
            )),
            Gate::Tdg(q) => terms.push(Term::diagonal(
                TermGate::Tpow(-1),
                vec![cur(&current, q, g)?],
            )),
            Gate::CZ(a, b) | Gate::ZZ(a, b) => {
                if a == b {
                    return Err(StableIndexError::Malformed(format!(
                        "{g} acts twice on one wire"
                    )));
                }
                let gate = if matches!(g, Gate::CZ(..)) {
                    TermGate::CZ
                } else {
                    TermGate::ZZ
                };
                terms.push(Term::diagonal(
                    gate,
                    vec![cur(&current, a, g)?, cur(&current, b, g)?],
                ));
            }
        }
    }
    let free_in = c
        .inputs
        .iter()
        .map(|q| IndexId::new(q.clone(), 0))
        .collect();
    let free_out = c
        .wires()
        .iter()
        .map(|q| IndexId::new(q.clone(), current[q]))
        .collect();
    Ok(StableIndexExpr {
        terms,
        free_in,
        free_out,
    })
}

/// Transliterates a nearest-neighbour circuit over {J(θ), ZZ} so that every
/// ZZ acts on two indices of equal depth, never directly after another ZZ
/// on the same pair. Depths are matched by padding with the identity blocks
/// J(0)J(0) and J(π/2)J(π/2)J(π/2). Returns the expression and its
/// interaction graph.
pub fn from_gates_grid(
    c: &Circuit,
) -> Result<(StableIndexExpr, InteractionGraph), StableIndexError> {
    let wires = c.wires();
    if wires.len() != c.inputs.len() {
        return Err(StableIndexError::UnsupportedGate("KET+".into()));
    }
    let row: HashMap<&QubitId, usize> = wires.iter().enumerate().map(|(i, q)| (q, i)).collect();
    let mut current: HashMap<QubitId, u32> = wires.iter().map(|q| (q.clone(), 0)).collect();
    let mut terms: Vec<Term> = Vec::new();
    let mut zz_at: BTreeSet<(IndexId, IndexId)> = BTreeSet::new();

    fn push_j(terms: &mut Vec<Term>, current: &mut HashMap<QubitId, u32>, q: &QubitId, t: Angle) {
        let j = current[q];
        terms.push(Term::moving(
            TermGate::J(t),
            IndexId::new(q.clone(), j),
            IndexId::new(q.clone(), j + 1),
        ));
        current.insert(q.clone(), j + 1);
    }
    let pad2 = |terms: &mut Vec<Term>, current: &mut HashMap<QubitId, u32>, q: &QubitId| {
        push_j(terms, current, q, Angle::ZERO);
        push_j(terms, current, q, Angle::ZERO);
    };
    let pad3 = |terms: &mut Vec<Term>, current: &mut HashMap<QubitId, u32>, q: &QubitId| {
        for _ in 0..3 {
            push_j(terms, current, q, Angle::HALF_PI);
        }
    };

    for g in &c.gates {
        match g {
            Gate::J(t, q) => {
                if !row.contains_key(q) {
                    return Err(StableIndexError::UnknownQubit(g.to_string()));
                }
                push_j(&mut terms, &mut current, q, *t);
            }
            Gate::ZZ(v, w) => {
                let (Some(&rv), Some(&rw)) = (row.get(v), row.get(w)) else {
                    return Err(StableIndexError::UnknownQubit(g.to_string()));
                };
                if rv.abs_diff(rw) != 1 {
                    return Err(StableIndexError::NotNearestNeighbor(v.clone(), w.clone()));
                }
                loop {
                    let (j, k) = (current[v], current[w]);
                    if j == k {
                        let prior = |d: u32| {
                            zz_at.contains(&ordered(
                                IndexId::new(v.clone(), d),
                                IndexId::new(w.clone(), d),
                            ))
                        };
                        if prior(j) || (j > 0 && prior(j - 1)) {
                            pad2(&mut terms, &mut current, v);
                            pad2(&mut terms, &mut current, w);
                            continue;
                        }
                        let (a, b) = (IndexId::new(v.clone(), j), IndexId::new(w.clone(), j));
                        zz_at.insert(ordered(a.clone(), b.clone()));
                        terms.push(Term::diagonal(TermGate::ZZ, vec![a, b]));
                        break;
                    }
                    let lagging = if k > j { v } else { w };
                    if j.abs_diff(k) % 2 == 0 {
                        pad2(&mut terms, &mut current, lagging);
                    } else {
                        pad3(&mut terms, &mut current, lagging);
                    }
                }
            }
            other => return Err(StableIndexError::UnsupportedGate(other.to_string())),
        }
    }
    let expr = StableIndexExpr {
        terms,
        free_in: wires.iter().map(|q| IndexId::new(q.clone(), 0)).collect(),
        free_out: wires
            .iter()
            .map(|q| IndexId::new(q.clone(), current[q]))
            .collect(),
    };
    let graph = expr.interaction_graph();
    Ok((expr, graph))
}

/// An isomorphism between two expressions: an index bijection `lambda` and a
/// term bijection `tau` (term i of the first maps to term `tau[i]`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Isomorphism {
    pub lambda: BTreeMap<IndexId, IndexId>,
    pub tau: Vec<usize>,
}

/// Searches for a relabelling of indices and a matching of terms that
/// carries `e1` onto `e2`, respecting gate kinds and index roles.
pub fn isomorphic(e1: &StableIndexExpr, e2: &StableIndexExpr) -> Option<Isomorphism> {
    IsoSearch::new(e1, e2, &[])?.run()
}

/// As [`isomorphic`], but additionally requires the free inputs and outputs
/// to correspond position by position.
pub fn isomorphic_on_interface(e1: &StableIndexExpr, e2: &StableIndexExpr) -> Option<Isomorphism> {
    if e1.free_in.len() != e2.free_in.len() || e1.free_out.len() != e2.free_out.len() {
        return None;
    }
    let seed: Vec<(IndexId, IndexId)> = e1
        .free_in
        .iter()
        .cloned()
        .zip(e2.free_in.iter().cloned())
        .chain(e1.free_out.iter().cloned().zip(e2.free_out.iter().cloned()))
        .collect();
    IsoSearch::new(e1, e2, &seed)?.run()
}

struct CompactTerm {
    gate: TermGate,
    stable: Vec<usize>,
    deprecated: Vec<Option<usize>>,
    advanced: Vec<Option<usize>>,
}

struct Compact {
    names: Vec<IndexId>,
    terms: Vec<CompactTerm>,
    /// Terms touching each index.
    touching: Vec<Vec<usize>>,
}

impl Compact {
    fn new(e: &StableIndexExpr) -> Compact {
        let names: Vec<IndexId> = e.indices().into_iter().collect();
        let pos: HashMap<&IndexId, usize> = names.iter().enumerate().map(|(i, x)| (x, i)).collect();
        let p = |x: &IndexId| pos[x];
        let terms: Vec<CompactTerm> = e
            .terms
            .iter()
            .map(|t| CompactTerm {
                gate: t.gate,
                stable: t.stable.iter().map(p).collect(),
                deprecated: t.deprecated.iter().map(|x| x.as_ref().map(p)).collect(),
                advanced: t.advanced.iter().map(|x| x.as_ref().map(p)).collect(),
            })
            .collect();
        let mut touching = vec![Vec::new(); names.len()];
        for (i, t) in terms.iter().enumerate() {
            for &x in t
                .stable
                .iter()
                .chain(t.deprecated.iter().flatten())
                .chain(t.advanced.iter().flatten())
            {
                touching[x].push(i);
            }
        }
        Compact {
            names,
            terms,
            touching,
        }
    }
}

struct IsoSearch {
    a: Compact,
    b: Compact,
    order: Vec<usize>,
    fwd: Vec<Option<usize>>,
    bwd: Vec<Option<usize>>,
    used: Vec<bool>,
    tau: Vec<usize>,
    buckets: HashMap<TermGate, Vec<usize>>,
}

impl IsoSearch {
    fn new(
        e1: &StableIndexExpr,
        e2: &StableIndexExpr,
        seed: &[(IndexId, IndexId)],
    ) -> Option<IsoSearch> {
        let a = Compact::new(e1);
        let b = Compact::new(e2);
        if a.names.len() != b.names.len() || a.terms.len() != b.terms.len() {
            return None;
        }
        let kinds = |c: &Compact| {
            let mut m: BTreeMap<TermGate, usize> = BTreeMap::new();
            for t in &c.terms {
                *m.entry(t.gate).or_default() += 1;
            }
            m
        };
        if kinds(&a) != kinds(&b) {
            return None;
        }
        let mut buckets: HashMap<TermGate, Vec<usize>> = HashMap::new();
        for (i, t) in b.terms.iter().enumerate() {
            buckets.entry(t.gate).or_default().push(i);
        }
        let mut fwd = vec![None; a.names.len()];
        let mut bwd = vec![None; b.names.len()];
        for (x, y) in seed {
            let xi = a.names.iter().position(|n| n == x)?;
            let yi = b.names.iter().position(|n| n == y)?;
            match (fwd[xi], bwd[yi]) {
                (None, None) => {
                    fwd[xi] = Some(yi);
                    bwd[yi] = Some(xi);
                }
                (Some(f), Some(g)) if f == yi && g == xi => {}
                _ => return None,
            }
        }
        // Visit terms breadth-first through shared indices so that each new
        // term is constrained by already matched neighbours.
        let mut order = Vec::with_capacity(a.terms.len());
        let mut seen = vec![false; a.terms.len()];
        for start in 0..a.terms.len() {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut queue = VecDeque::from([start]);
            while let Some(t) = queue.pop_front() {
                order.push(t);
                let ct = &a.terms[t];
                for &x in ct
                    .stable
                    .iter()
                    .chain(ct.deprecated.iter().flatten())
                    .chain(ct.advanced.iter().flatten())
                {
                    for &u in &a.touching[x] {
                        if !seen[u] {
                            seen[u] = true;
                            queue.push_back(u);
                        }
                    }
                }
            }
        }
        let n = a.terms.len();
        Some(IsoSearch {
            a,
            b,
            order,
            fwd,
            bwd,
            used: vec![false; n],
            tau: vec![usize::MAX; n],
            buckets,
        })
    }

    fn run(mut self) -> Option<Isomorphism> {
        if !self.search(0) {
            return None;
        }
        // Indices touched by no term (idle wires) are paired up in order.
        let mut spare_b = (0..self.b.names.len()).filter(|&y| self.bwd[y].is_none());
        for x in 0..self.a.names.len() {
            if self.fwd[x].is_none() {
                let y = spare_b.next()?;
                self.fwd[x] = Some(y);
            }
        }
        let lambda = self
            .fwd
            .iter()
            .enumerate()
            .map(|(x, y)| {
                (
                    self.a.names[x].clone(),
                    self.b.names[y.expect("complete map")].clone(),
                )
            })
            .collect();
        Some(Isomorphism {
            lambda,
            tau: self.tau,
        })
    }

    fn bind(&mut self, x: usize, y: usize, log: &mut Vec<usize>) -> bool {
        match (self.fwd[x], self.bwd[y]) {
            (Some(f), _) => f == y,
            (None, Some(_)) => false,
            (None, None) => {
                self.fwd[x] = Some(y);
                self.bwd[y] = Some(x);
                log.push(x);
                true
            }
        }
    }

    fn unbind(&mut self, log: &[usize]) {
        for &x in log {
            if let Some(y) = self.fwd[x].take() {
                self.bwd[y] = None;
            }
        }
    }

    fn bind_slots(
        &mut self,
        xs: &[Option<usize>],
        ys: &[Option<usize>],
        log: &mut Vec<usize>,
    ) -> bool {
        xs.len() == ys.len()
            && xs.iter().zip(ys).all(|(x, y)| match (x, y) {
                (None, None) => true,
                (Some(x), Some(y)) => self.bind(*x, *y, log),
                _ => false,
            })
    }

    fn search(&mut self, k: usize) -> bool {
        if k == self.order.len() {
            return true;
        }
        let t1 = self.order[k];
        let gate = self.a.terms[t1].gate;
        let candidates = self.buckets.get(&gate).cloned().unwrap_or_default();
        for t2 in candidates {
            if self.used[t2] {
                continue;
            }
            let mut log = Vec::new();
            let (d1, d2) = (
                self.a.terms[t1].deprecated.clone(),
                self.b.terms[t2].deprecated.clone(),
            );
            let (a1, a2) = (
                self.a.terms[t1].advanced.clone(),
                self.b.terms[t2].advanced.clone(),
            );
            if self.bind_slots(&d1, &d2, &mut log) && self.bind_slots(&a1, &a2, &mut log) {
                let s1 = self.a.terms[t1].stable.clone();
                let s2 = self.b.terms[t2].stable.clone();
                self.used[t2] = true;
                self.tau[t1] = t2;
                let ok = if gate.is_symmetric() {
                    self.match_set(&s1, s2, k)
                } else {
                    let mut slog = Vec::new();
                    let s1o: Vec<Option<usize>> = s1.iter().map(|&x| Some(x)).collect();
                    let s2o: Vec<Option<usize>> = s2.iter().map(|&x| Some(x)).collect();
                    let r = self.bind_slots(&s1o, &s2o, &mut slog) && self.search(k + 1);
                    if !r {
                        self.unbind(&slog);
                    }
                    r
                };
                if ok {
                    return true;
                }
                self.used[t2] = false;
                self.tau[t1] = usize::MAX;
            }
            self.unbind(&log);
        }
        false
    }

    /// Matches the stable set `xs` onto the set `ys` in every consistent way,
    /// continuing the search after each complete assignment.
    fn match_set(&mut self, xs: &[usize], ys: Vec<usize>, k: usize) -> bool {
        if xs.len() != ys.len() {
            return false;
        }
        let Some((&x, rest)) = xs.split_first() else {
            return self.search(k + 1);
        };
        if let Some(y) = self.fwd[x] {
            let Some(p) = ys.iter().position(|&c| c == y) else {
                return false;
            };
            let mut ys2 = ys;
            ys2.swap_remove(p);
            return self.match_set(rest, ys2, k);
        }
        for (p, &y) in ys.iter().enumerate() {
            if self.bwd[y].is_some() {
                continue;
            }
            let mut log = Vec::new();
            if self.bind(x, y, &mut log) {
                let mut ys2 = ys.clone();
                ys2.swap_remove(p);
                if self.match_set(rest, ys2, k) {
                    return true;
                }
            }
            self.unbind(&log);
        }
        false
    }
}
