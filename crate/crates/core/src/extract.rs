//! From patterns back to circuits: candidate-circuit construction from a
//! star decomposition, identity cleanup, and the complete semantic map.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::circuit::{Circuit, Gate};
use crate::construct::{circuit_normal_form, ConstructError, Variant};
use crate::deps::{check_dependencies, DependencyKind};
use crate::flow::{
    edge_bound_ok, find_mod_star_decomp, replay_star_decomposition, FlowProblem, ModifiedFlow,
};
use crate::pattern::{
    canonical_units, geometry_of, validate_pattern, AngleMap, Geometry, Pattern, Plane, QubitId,
};
use crate::rewrite::{is_normal_form, normalize};
use crate::stable_index::{from_gates_free, IndexId, StableIndexExpr, Term, TermGate};

/// t(u) = −θ_u in units of π/4, for each measured qubit.
pub type TPowerTable = BTreeMap<QubitId, i8>;

pub fn t_powers(angles: &AngleMap) -> TPowerTable {
    angles
        .iter()
        .map(|(q, (_, a))| (q.clone(), canonical_units(-a.units()) as i8))
        .collect()
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum ExtractError {
    #[error("invalid star decomposition: {0}")]
    InvalidDecomposition(String),
}

/// Emits the candidate circuit of a star decomposition. Each vertex becomes
/// an index on the wire that starts at the beginning of its successor
/// chain. Stars are emitted from the latest measurement back; a star with
/// root `u` and centre `c = f(u)` contributes T^{t(u)} on `u`, H from `u`
/// to `c`, and CZ from `c` to each neighbour not yet taken by a later star.
/// A mediator contributes CZ on all pairs of its neighbours and T² on each.
/// The residual vertices outside the image of `f` contribute their induced
/// edges as CZ and a KET+ for each non-input.
pub fn build_circuit(
    p: &FlowProblem,
    flow: &ModifiedFlow,
    t: &TPowerTable,
) -> Result<StableIndexExpr, ExtractError> {
    replay_star_decomposition(p, flow).map_err(ExtractError::InvalidDecomposition)?;
    let g = &p.geometry;
    let n = g.len();
    let idx = |q: &QubitId| g.index_of(q).expect("replay checked every name");
    let mut f: Vec<Option<usize>> = vec![None; n];
    for (u, c) in &flow.f {
        f[idx(u)] = Some(idx(c));
    }
    let in_image: BTreeSet<usize> = f.iter().flatten().copied().collect();
    let residual: Vec<usize> = (0..n).filter(|v| !in_image.contains(v)).collect();

    let mut index: Vec<Option<IndexId>> = vec![None; n];
    for &start in &residual {
        let wire = g.name(start).clone();
        let mut v = start;
        let mut depth = 0;
        loop {
            index[v] = Some(IndexId::new(wire.clone(), depth));
            match f[v] {
                Some(w) if w != v => {
                    v = w;
                    depth += 1;
                }
                _ => break,
            }
        }
    }
    let ix = |v: usize| {
        index[v]
            .clone()
            .expect("every non-mediator lies on a chain")
    };

    let mut terms = Vec::new();
    for &v in &residual {
        if !g.is_input(v) {
            terms.push(Term::ket_plus(ix(v)));
        }
    }
    for &v in &residual {
        for &w in g.neighbors(v) {
            if v < w && !in_image.contains(&w) {
                terms.push(Term::diagonal(TermGate::CZ, vec![ix(v), ix(w)]));
            }
        }
    }

    let mut stars = Vec::new();
    let mut removed = vec![false; n];
    for u in flow.order.iter().rev() {
        let u = idx(u);
        let c = f[u].expect("roots have successors");
        let mut star = Vec::new();
        if c == u {
            let nb: Vec<usize> = g.neighbors(u).to_vec();
            for (i, &a) in nb.iter().enumerate() {
                for &b in &nb[i + 1..] {
                    star.push(Term::diagonal(TermGate::CZ, vec![ix(a), ix(b)]));
                }
                star.push(Term::diagonal(TermGate::tpow(2), vec![ix(a)]));
            }
        } else {
            let tu = t.get(g.name(u)).copied().unwrap_or(0);
            if tu != 0 {
                star.push(Term::diagonal(TermGate::tpow(tu as i64), vec![ix(u)]));
            }
            star.push(Term::moving(TermGate::H, ix(u), ix(c)));
            for &w in g.neighbors(c) {
                if w != u && !removed[w] {
                    star.push(Term::diagonal(TermGate::CZ, vec![ix(c), ix(w)]));
                }
            }
        }
        removed[c] = true;
        stars.push(star);
    }
    for star in stars.into_iter().rev() {
        terms.extend(star);
    }

    let mut free_in: Vec<usize> = (0..n).filter(|&v| g.is_input(v)).collect();
    free_in.sort_by(|a, b| g.name(*a).cmp(g.name(*b)));
    let free_out: Vec<usize> = (0..n).filter(|&v| g.is_output(v)).collect();
    Ok(StableIndexExpr {
        terms,
        free_in: free_in.into_iter().map(ix).collect(),
        free_out: free_out.into_iter().map(ix).collect(),
    })
}

/// Per-pass index bookkeeping for [`remove_idops`].
struct Uses {
    deprecated_by: HashMap<IndexId, usize>,
    tpow: HashMap<IndexId, (usize, i8)>,
    /// Number of non-T stable uses.
    other: HashMap<IndexId, usize>,
}

impl Uses {
    fn new(terms: &[Term]) -> Uses {
        let mut u = Uses {
            deprecated_by: HashMap::new(),
            tpow: HashMap::new(),
            other: HashMap::new(),
        };
        for (i, t) in terms.iter().enumerate() {
            match t.gate {
                TermGate::H => {
                    if let Some(Some(d)) = t.deprecated.first() {
                        u.deprecated_by.insert(d.clone(), i);
                    }
                }
                TermGate::Tpow(k) => {
                    u.tpow.insert(t.stable[0].clone(), (i, k));
                }
                _ => {
                    for s in &t.stable {
                        *u.other.entry(s.clone()).or_default() += 1;
                    }
                }
            }
        }
        u
    }

    fn power(&self, x: &IndexId) -> i8 {
        self.tpow.get(x).map_or(0, |p| p.1)
    }

    fn is_quiet(&self, x: &IndexId) -> bool {
        !self.other.contains_key(x)
    }
}

fn merge_t_powers(terms: Vec<Term>) -> (Vec<Term>, bool) {
    let mut power: BTreeMap<IndexId, i64> = BTreeMap::new();
    let mut count: HashMap<IndexId, usize> = HashMap::new();
    let mut out = Vec::with_capacity(terms.len());
    for t in terms {
        if let TermGate::Tpow(k) = t.gate {
            *power.entry(t.stable[0].clone()).or_default() += k as i64;
            *count.entry(t.stable[0].clone()).or_default() += 1;
        } else {
            out.push(t);
        }
    }
    let mut changed = false;
    for (x, k) in power {
        let k = canonical_units(k);
        if count[&x] != 1 || k == 0 {
            changed = true;
        }
        if k != 0 {
            out.push(Term::diagonal(TermGate::tpow(k), vec![x]));
        }
    }
    (out, changed)
}

fn resolve(renames: &HashMap<IndexId, IndexId>, x: &IndexId) -> IndexId {
    let mut x = x.clone();
    while let Some(y) = renames.get(&x) {
        x = y.clone();
    }
    x
}

/// Deletes identity blocks wire by wire until none remain: H·H, the block
/// (H·T²)³, and T powers that vanish mod 8. The index before a deleted block
/// is unified with the index after it.
pub fn remove_idops(e: &StableIndexExpr) -> StableIndexExpr {
    let mut terms = e.terms.clone();
    let mut free_in = e.free_in.clone();
    let mut free_out = e.free_out.clone();
    loop {
        let (merged, mut changed) = merge_t_powers(terms);
        terms = merged;
        let uses = Uses::new(&terms);
        let mut drop = vec![false; terms.len()];
        let mut renames: HashMap<IndexId, IndexId> = HashMap::new();
        let mut power_delta: HashMap<IndexId, i64> = HashMap::new();
        let next_h = |x: &IndexId| uses.deprecated_by.get(x).copied();
        let target = |i: usize| terms[i].advanced[0].clone().expect("H advances");
        for i in 0..terms.len() {
            if terms[i].gate != TermGate::H || drop[i] {
                continue;
            }
            let a = terms[i].deprecated[0].clone().expect("H deprecates");
            let b = target(i);
            let Some(j) = next_h(&b).filter(|&j| !drop[j]) else {
                continue;
            };
            if !uses.is_quiet(&b) {
                continue;
            }
            if uses.power(&b) == 0 {
                // H·H on a segment with no other use.
                drop[i] = true;
                drop[j] = true;
                renames.insert(target(j), a);
                changed = true;
                continue;
            }
            let c = target(j);
            let Some(k) = next_h(&c).filter(|&k| !drop[k]) else {
                continue;
            };
            if uses.power(&b) == 2 && uses.power(&c) == 2 && uses.is_quiet(&c) {
                // (H·T²)³: the T² before the first H is taken from a.
                for (h, x) in [(i, &b), (j, &c)] {
                    drop[h] = true;
                    drop[uses.tpow[x].0] = true;
                }
                drop[k] = true;
                *power_delta.entry(a.clone()).or_default() -= 2;
                renames.insert(target(k), a);
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut next: Vec<Term> = terms
            .into_iter()
            .zip(drop)
            .filter(|(_, d)| !d)
            .map(|(t, _)| t)
            .collect();
        for (x, k) in power_delta {
            next.push(Term::diagonal(TermGate::tpow(k), vec![x]));
        }
        let r = |x: &IndexId| resolve(&renames, x);
        for t in &mut next {
            for s in &mut t.stable {
                *s = r(s);
            }
            for x in t
                .deprecated
                .iter_mut()
                .chain(t.advanced.iter_mut())
                .flatten()
            {
                *x = r(x);
            }
        }
        free_in = free_in.iter().map(r).collect();
        free_out = free_out.iter().map(r).collect();
        terms = next;
    }
    StableIndexExpr {
        terms,
        free_in,
        free_out,
    }
}

/// Rewrites a circuit over {H, T, T†, CZ, ZZ, J} into the gate set the
/// extraction emits: ZZ becomes CZ·(T²⊗T²) and J(θ) becomes T^θ·H.
pub fn to_extraction_gates(c: &Circuit) -> Circuit {
    let mut gates = Vec::new();
    let t_run = |gates: &mut Vec<Gate>, q: &QubitId, k: i64| {
        let k = canonical_units(k);
        for _ in 0..k.abs() {
            gates.push(if k > 0 {
                Gate::T(q.clone())
            } else {
                Gate::Tdg(q.clone())
            });
        }
    };
    for g in &c.gates {
        match g {
            Gate::ZZ(a, b) => {
                gates.push(Gate::CZ(a.clone(), b.clone()));
                t_run(&mut gates, a, 2);
                t_run(&mut gates, b, 2);
            }
            Gate::J(t, q) => {
                t_run(&mut gates, q, t.units());
                gates.push(Gate::H(q.clone()));
            }
            _ => gates.push(g.clone()),
        }
    }
    Circuit {
        inputs: c.inputs.clone(),
        gates,
    }
}

/// The expression an extraction is compared against: the circuit's normal
/// form in the extraction gate set, with identity blocks removed.
pub fn reference_expr(c: &Circuit, variant: Variant) -> Result<StableIndexExpr, ConstructError> {
    let nf = circuit_normal_form(c, variant)?;
    Ok(remove_idops(&from_gates_free(&to_extraction_gates(&nf))?))
}

/// Where the flow search gave up.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoFlowStage {
    /// Too many edges for any flow to exist.
    EdgeBound,
    /// The star-decomposition search found none.
    StarDecomposition,
}

/// Why a pattern was not certified.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Rejection {
    IllFormed(String),
    UnsupportedPlane(QubitId),
    UnequalIo {
        inputs: usize,
        outputs: usize,
    },
    NoFlow(NoFlowStage),
    Dependencies {
        qubit: QubitId,
        kind: DependencyKind,
    },
}

impl Rejection {
    /// Short machine-readable reason.
    pub fn reason(&self) -> &'static str {
        match self {
            Rejection::IllFormed(_) => "ill-formed",
            Rejection::UnsupportedPlane(_) => "unsupported-plane",
            Rejection::UnequalIo { .. } => "unequal-io",
            Rejection::NoFlow(_) => "no-flow",
            Rejection::Dependencies { .. } => "dependencies",
        }
    }
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rejection::IllFormed(e) => write!(f, "ill-formed: {e}"),
            Rejection::UnsupportedPlane(q) => {
                write!(f, "unsupported-plane: {q} is measured in the YZ plane")
            }
            Rejection::UnequalIo { inputs, outputs } => {
                write!(f, "unequal-io: {inputs} inputs but {outputs} outputs")
            }
            Rejection::NoFlow(NoFlowStage::EdgeBound) => {
                f.write_str("no-flow: too many edges for a flow")
            }
            Rejection::NoFlow(NoFlowStage::StarDecomposition) => {
                f.write_str("no-flow: no star decomposition")
            }
            Rejection::Dependencies { qubit, kind } => {
                write!(f, "dependencies: {kind} of {qubit} is inconsistent")
            }
        }
    }
}

/// A certified extraction.
#[derive(Clone, Debug)]
pub struct Extraction {
    pub expr: StableIndexExpr,
    pub flow: ModifiedFlow,
    /// Whether the input had to be normalized first.
    pub normalized_input: bool,
}

/// The semantic map: a circuit no larger than the pattern's construction,
/// or the reason the pattern is not certified.
pub fn semantic_report(p: &Pattern) -> Result<Extraction, Rejection> {
    if let Some(v) = validate_pattern(p).violations.first() {
        return Err(Rejection::IllFormed(v.to_string()));
    }
    let normalized_input = !is_normal_form(p);
    let owned;
    let p = if normalized_input {
        owned = normalize(p).map_err(|e| Rejection::IllFormed(e.to_string()))?;
        &owned
    } else {
        p
    };
    let (g, angles) = geometry_of(p);
    if let Some((q, _)) = angles.iter().find(|(_, (plane, _))| *plane == Plane::YZ) {
        return Err(Rejection::UnsupportedPlane(q.clone()));
    }
    if g.input_count() != g.output_count() {
        return Err(Rejection::UnequalIo {
            inputs: g.input_count(),
            outputs: g.output_count(),
        });
    }
    if !edge_bound_ok(g.len(), g.output_count(), g.edge_count()) {
        return Err(Rejection::NoFlow(NoFlowStage::EdgeBound));
    }
    let problem = FlowProblem::from_pattern(p);
    let flow =
        find_mod_star_decomp(&problem).ok_or(Rejection::NoFlow(NoFlowStage::StarDecomposition))?;
    if let Some((qubit, kind)) = check_dependencies(p, &flow.f).expect("input is in normal form") {
        return Err(Rejection::Dependencies { qubit, kind });
    }
    let expr = build_circuit(&problem, &flow, &t_powers(&angles))
        .expect("search output is a valid decomposition");
    Ok(Extraction {
        expr: remove_idops(&expr),
        flow,
        normalized_input,
    })
}

/// [`semantic_report`] without the diagnostics.
pub fn semantic(p: &Pattern) -> Option<StableIndexExpr> {
    semantic_report(p).ok().map(|x| x.expr)
}

/// Geometry accessor shared with the CLI.
pub fn geometry_summary(g: &Geometry) -> (usize, usize, usize) {
    (g.len(), g.output_count(), g.edge_count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::{Angle, Command, SignalExpr};
    use crate::stable_index::isomorphic;

    fn q(s: &str) -> QubitId {
        QubitId::from(s)
    }

    fn ix(s: &str, g: u32) -> IndexId {
        IndexId::new(s, g)
    }

    #[test]
    fn single_edge_gives_j() {
        let g = Geometry::new(["v", "w"], [("v", "w")], ["v"], ["w"]).unwrap();
        let p = FlowProblem::new(g, BTreeSet::new());
        let flow = find_mod_star_decomp(&p).unwrap();
        let t: TPowerTable = [(q("v"), 1)].into_iter().collect();
        let e = build_circuit(&p, &flow, &t).unwrap();
        assert_eq!(
            e.terms,
            vec![
                Term::diagonal(TermGate::Tpow(1), vec![ix("v", 0)]),
                Term::moving(TermGate::H, ix("v", 0), ix("v", 1))
            ]
        );
        assert_eq!(e.free_out, vec![ix("v", 1)]);
    }

    #[test]
    fn mediator_star_gives_cz_and_t_squares() {
        let g = Geometry::new(
            ["a", "v", "w"],
            [("a", "v"), ("a", "w")],
            ["v", "w"],
            ["v", "w"],
        )
        .unwrap();
        let p = FlowProblem::new(g, [q("a")].into_iter().collect());
        let flow = find_mod_star_decomp(&p).unwrap();
        let e = build_circuit(&p, &flow, &TPowerTable::new()).unwrap();
        let gates: BTreeSet<TermGate> = e.terms.iter().map(|t| t.gate).collect();
        assert_eq!(
            gates,
            [TermGate::CZ, TermGate::Tpow(2)].into_iter().collect()
        );
        assert_eq!(e.terms.len(), 3);
    }

    #[test]
    fn residual_block_only() {
        let g = Geometry::new(["u", "v"], [("u", "v")], ["u", "v"], ["u", "v"]).unwrap();
        let p = FlowProblem::new(g, BTreeSet::new());
        let flow = find_mod_star_decomp(&p).unwrap();
        let e = build_circuit(&p, &flow, &TPowerTable::new()).unwrap();
        assert_eq!(
            e.terms,
            vec![Term::diagonal(TermGate::CZ, vec![ix("u", 0), ix("v", 0)])]
        );
    }

    #[test]
    fn double_hadamard_is_removed() {
        let c = Circuit::new(["a"], vec![Gate::H(q("a")), Gate::H(q("a"))]);
        let e = remove_idops(&from_gates_free(&c).unwrap());
        assert!(e.terms.is_empty());
        assert_eq!(e.free_in, e.free_out);
    }

    #[test]
    fn ht2_cubed_is_removed() {
        let mut gates = Vec::new();
        for _ in 0..3 {
            gates.extend([Gate::T(q("a")), Gate::T(q("a")), Gate::H(q("a"))]);
        }
        let e = remove_idops(&from_gates_free(&Circuit::new(["a"], gates)).unwrap());
        assert!(e.terms.is_empty(), "{e}");
    }

    #[test]
    fn eight_t_gates_vanish() {
        let e =
            remove_idops(&from_gates_free(&Circuit::new(["a"], vec![Gate::T(q("a")); 8])).unwrap());
        assert!(e.terms.is_empty());
    }

    #[test]
    fn blocked_hadamards_survive() {
        let c = Circuit::new(
            ["a", "b"],
            vec![Gate::H(q("a")), Gate::CZ(q("a"), q("b")), Gate::H(q("a"))],
        );
        let e = remove_idops(&from_gates_free(&c).unwrap());
        assert_eq!(e.terms.len(), 3);
    }

    #[test]
    fn k2_is_rejected_as_no_flow() {
        let p = Pattern::new(
            Vec::<QubitId>::new(),
            vec![
                Command::Prepare(q("v")),
                Command::Prepare(q("w")),
                Command::Entangle(q("v"), q("w")),
                Command::measure("v", Angle::ZERO),
                Command::measure("w", Angle::ZERO),
            ],
        );
        assert_eq!(semantic_report(&p).unwrap_err().reason(), "no-flow");
    }

    #[test]
    fn fj_round_trips_to_j() {
        for theta in -3..=4 {
            let p = Pattern::new(
                ["v"],
                vec![
                    Command::Prepare(q("w")),
                    Command::Entangle(q("v"), q("w")),
                    Command::measure("v", Angle::from_units(-theta)),
                    Command::CorrectX(q("w"), SignalExpr::single("v")),
                ],
            );
            let e = semantic(&p).unwrap();
            let c = Circuit::new(["v"], vec![Gate::J(Angle::from_units(theta), q("v"))]);
            let reference = remove_idops(&from_gates_free(&to_extraction_gates(&c)).unwrap());
            assert!(
                isomorphic(&e, &reference).is_some(),
                "theta {theta}: {e} vs {reference}"
            );
        }
    }

    #[test]
    fn missing_correction_is_rejected_by_dependencies() {
        let p = Pattern::new(
            ["v"],
            vec![
                Command::Prepare(q("w")),
                Command::Entangle(q("v"), q("w")),
                Command::measure("v", Angle::from_units(1)),
            ],
        );
        assert_eq!(semantic_report(&p).unwrap_err().reason(), "dependencies");
    }
}
