//! Modified-flow discovery by star decomposition, the natural pre-order,
//! the extremal edge bound, and an exhaustive oracle.
//!
//! A modified flow assigns to each measured qubit `v` a successor `f(v)`:
//! either a neighbour that receives the byproduct correction, or `v` itself
//! when `v` is a mediator measured at π/2 whose byproduct lands on all of its
//! neighbours.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::Serialize;
use thiserror::Error;

use crate::pattern::{geometry_of, Angle, Geometry, Pattern, Plane, QubitId};

/// Measurement-plane sets for the extended search: qubits that may take a
/// neighbour as successor (`xy`) and qubits that may be their own successor
/// (`yz`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExtendedPlanes {
    pub xy: BTreeSet<QubitId>,
    pub yz: BTreeSet<QubitId>,
}

/// A geometry with the set of qubits allowed to be their own successor.
#[derive(Clone, Debug)]
pub struct FlowProblem {
    pub geometry: Geometry,
    pub mediators: BTreeSet<QubitId>,
    pub extended: Option<ExtendedPlanes>,
}

impl FlowProblem {
    pub fn new(geometry: Geometry, mediators: BTreeSet<QubitId>) -> FlowProblem {
        FlowProblem {
            geometry,
            mediators,
            extended: None,
        }
    }

    pub fn extended(geometry: Geometry, planes: ExtendedPlanes) -> FlowProblem {
        FlowProblem {
            mediators: planes.yz.clone(),
            geometry,
            extended: Some(planes),
        }
    }

    /// The flow problem of a pattern: mediators are the XY measurements at π/2.
    pub fn from_pattern(p: &Pattern) -> FlowProblem {
        let (g, angles) = geometry_of(p);
        let mediators = angles
            .iter()
            .filter(|(_, (plane, angle))| *plane == Plane::XY && *angle == Angle::HALF_PI)
            .map(|(q, _)| q.clone())
            .collect();
        FlowProblem::new(g, mediators)
    }

    /// The extended problem of a pattern: YZ measurements (and XY at π/2,
    /// which is the same basis) may be fixed points; XY measurements may
    /// take a neighbour.
    pub fn extended_from_pattern(p: &Pattern) -> FlowProblem {
        let (g, angles) = geometry_of(p);
        let mut planes = ExtendedPlanes {
            xy: BTreeSet::new(),
            yz: BTreeSet::new(),
        };
        for (q, (plane, angle)) in &angles {
            match plane {
                Plane::XY => {
                    planes.xy.insert(q.clone());
                    if *angle == Angle::HALF_PI {
                        planes.yz.insert(q.clone());
                    }
                }
                Plane::YZ => {
                    planes.yz.insert(q.clone());
                    if *angle == Angle::HALF_PI {
                        planes.xy.insert(q.clone());
                    }
                }
            }
        }
        FlowProblem::extended(g, planes)
    }

    fn may_fix(&self, i: usize) -> bool {
        let g = &self.geometry;
        !g.is_input(i) && self.mediators.contains(g.name(i))
    }

    fn may_move(&self, i: usize) -> bool {
        match &self.extended {
            Some(planes) => planes.xy.contains(self.geometry.name(i)),
            None => true,
        }
    }
}

/// A successor function with a measurement order witnessing it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ModifiedFlow {
    pub f: BTreeMap<QubitId, QubitId>,
    /// Roots in measurement order, earliest measured first.
    pub order: Vec<QubitId>,
    /// Roots grouped by search layer; layer 0 is measured last.
    pub layers: Vec<Vec<QubitId>>,
}

impl ModifiedFlow {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "f": self.f.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect::<BTreeMap<_, _>>(),
            "L": self.order,
            "layers": self.layers,
        })
    }
}

/// Placeholder for Pauli flows, which are represented but not searched for.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PauliFlow {
    pub correction_sets: BTreeMap<QubitId, BTreeSet<QubitId>>,
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum FlowError {
    #[error("{0} vertices is too many for exhaustive search")]
    TooLarge(usize),
}

/// Whether a geometry with `n` vertices, `k` outputs and `m` edges can carry
/// a flow: m ≤ n·k − k(k+1)/2.
pub fn edge_bound_ok(n: usize, k: usize, m: usize) -> bool {
    let (n, k, m) = (n as i128, k as i128, m as i128);
    m <= n * k - k * (k + 1) / 2
}

/// Searches for a modified flow by peeling star geometries off the outputs,
/// layer by layer. Returns `None` iff no modified flow exists.
pub fn find_mod_star_decomp(p: &FlowProblem) -> Option<ModifiedFlow> {
    let g = &p.geometry;
    let n = g.len();
    // D: arc v→w for every non-output neighbour w of v. Arcs are deleted
    // lazily; only live counts are tracked.
    let mut arc_live: Vec<Vec<bool>> = (0..n)
        .map(|v| g.neighbors(v).iter().map(|&w| !g.is_output(w)).collect())
        .collect();
    let mut out_deg: Vec<usize> = arc_live
        .iter()
        .map(|live| live.iter().filter(|&&b| b).count())
        .collect();
    let mut unprocessed: Vec<bool> = (0..n).map(|v| !g.is_output(v)).collect();
    let mut remaining = unprocessed.iter().filter(|&&b| b).count();
    let mut f: Vec<Option<usize>> = vec![None; n];
    let mut order_rev: Vec<usize> = Vec::new();
    let mut layers: Vec<Vec<usize>> = Vec::new();

    let mut current: BTreeSet<usize> = BTreeSet::new();
    for v in 0..n {
        if g.is_output(v) && !g.is_input(v) {
            current.insert(v);
        }
        if unprocessed[v] && p.may_fix(v) && out_deg[v] == 0 {
            current.insert(v);
        }
    }

    loop {
        let mut next: BTreeSet<usize> = BTreeSet::new();
        let mut layer: Vec<usize> = Vec::new();
        // Positions are unique names sorted, so index order is name order.
        for &w in &current {
            let mut remove_star = |v: usize,
                                   center: usize,
                                   unprocessed: &mut Vec<bool>,
                                   out_deg: &mut Vec<usize>,
                                   arc_live: &mut Vec<Vec<bool>>,
                                   next: &mut BTreeSet<usize>| {
                layer.push(v);
                unprocessed[v] = false;
                f[v] = Some(center);
                order_rev.push(v);
                for &z in g.neighbors(v) {
                    // The arc z→v sits in z's list at v's position.
                    let pos = g
                        .neighbors(z)
                        .binary_search(&v)
                        .expect("adjacency is symmetric");
                    if arc_live[z][pos] {
                        arc_live[z][pos] = false;
                        out_deg[z] -= 1;
                        if out_deg[z] == 0 && unprocessed[z] && p.may_fix(z) {
                            next.insert(z);
                        }
                    }
                }
            };
            if unprocessed[w] {
                if p.may_fix(w) && out_deg[w] == 0 {
                    remove_star(
                        w,
                        w,
                        &mut unprocessed,
                        &mut out_deg,
                        &mut arc_live,
                        &mut next,
                    );
                    remaining -= 1;
                }
            } else if out_deg[w] == 1 {
                let pos = arc_live[w].iter().position(|&b| b).expect("one live arc");
                let v = g.neighbors(w)[pos];
                if unprocessed[v] && p.may_move(v) {
                    remove_star(
                        v,
                        w,
                        &mut unprocessed,
                        &mut out_deg,
                        &mut arc_live,
                        &mut next,
                    );
                    remaining -= 1;
                    if !g.is_input(v) {
                        next.insert(v);
                    }
                } else {
                    next.insert(w);
                }
            } else if out_deg[w] > 1 {
                next.insert(w);
            }
        }
        if layer.is_empty() {
            break;
        }
        layers.push(layer);
        current = next;
    }

    if remaining != 0 {
        return None;
    }
    let name = |i: usize| g.name(i).clone();
    Some(ModifiedFlow {
        f: (0..n)
            .filter_map(|v| f[v].map(|w| (name(v), name(w))))
            .collect(),
        order: order_rev.iter().rev().map(|&v| name(v)).collect(),
        layers: layers
            .into_iter()
            .map(|l| l.into_iter().map(name).collect())
            .collect(),
    })
}

/// The extended variant: fixed points come from the YZ set and neighbour
/// successors only from the XY set.
pub fn find_extended_star_decomp(p: &FlowProblem) -> Option<ModifiedFlow> {
    debug_assert!(p.extended.is_some(), "extended search needs plane sets");
    find_mod_star_decomp(p)
}

/// The natural pre-order of a successor function, as a DAG on qubits.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NaturalPreorder {
    names: Vec<QubitId>,
    succ: Vec<Vec<usize>>,
}

impl NaturalPreorder {
    /// Whether `a ≼ b`.
    pub fn precedes(&self, a: &QubitId, b: &QubitId) -> bool {
        let (Ok(a), Ok(b)) = (self.names.binary_search(a), self.names.binary_search(b)) else {
            return false;
        };
        if a == b {
            return true;
        }
        let mut seen = vec![false; self.names.len()];
        let mut queue = VecDeque::from([a]);
        seen[a] = true;
        while let Some(x) = queue.pop_front() {
            for &y in &self.succ[x] {
                if y == b {
                    return true;
                }
                if !seen[y] {
                    seen[y] = true;
                    queue.push_back(y);
                }
            }
        }
        false
    }

    /// Direct relations `a ≺ b` generating the order.
    pub fn generators(&self) -> Vec<(QubitId, QubitId)> {
        self.succ
            .iter()
            .enumerate()
            .flat_map(|(a, bs)| bs.iter().map(move |&b| (a, b)))
            .map(|(a, b)| (self.names[a].clone(), self.names[b].clone()))
            .collect()
    }
}

fn preorder_edges(g: &Geometry, f: &[Option<usize>]) -> Vec<Vec<usize>> {
    let mut succ: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); g.len()];
    for (v, fv) in f.iter().enumerate() {
        if let Some(w) = *fv {
            if w != v {
                succ[v].insert(w);
            }
            for &x in g.neighbors(w) {
                if x != v {
                    succ[v].insert(x);
                }
            }
        }
    }
    succ.into_iter().map(|s| s.into_iter().collect()).collect()
}

fn is_acyclic(succ: &[Vec<usize>]) -> bool {
    let n = succ.len();
    let mut indeg = vec![0usize; n];
    for s in succ {
        for &j in s {
            indeg[j] += 1;
        }
    }
    let mut stack: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
    let mut seen = 0;
    while let Some(i) = stack.pop() {
        seen += 1;
        for &j in &succ[i] {
            indeg[j] -= 1;
            if indeg[j] == 0 {
                stack.push(j);
            }
        }
    }
    seen == n
}

fn to_positions(g: &Geometry, f: &BTreeMap<QubitId, QubitId>) -> Option<Vec<Option<usize>>> {
    let mut out = vec![None; g.len()];
    for (v, w) in f {
        out[g.index_of(v)?] = Some(g.index_of(w)?);
    }
    Some(out)
}

/// The reflexive-transitive closure of v ≼ f(v) and v ≼ w for w ∼ f(v),
/// if it is antisymmetric.
pub fn natural_preorder(g: &Geometry, f: &BTreeMap<QubitId, QubitId>) -> Option<NaturalPreorder> {
    let pos = to_positions(g, f)?;
    let succ = preorder_edges(g, &pos);
    is_acyclic(&succ).then(|| NaturalPreorder {
        names: g.names().to_vec(),
        succ,
    })
}

/// Whether `f` is a modified flow of the problem: defined exactly on the
/// measured qubits, injective, successors are non-input neighbours (or the
/// qubit itself when allowed), and the natural pre-order is antisymmetric.
pub fn is_modified_flow(p: &FlowProblem, f: &BTreeMap<QubitId, QubitId>) -> bool {
    let g = &p.geometry;
    let Some(pos) = to_positions(g, f) else {
        return false;
    };
    let mut used = vec![false; g.len()];
    for (v, &fv) in pos.iter().enumerate() {
        match fv {
            None if !g.is_output(v) => return false,
            Some(_) if g.is_output(v) => return false,
            Some(w) => {
                let ok = if w == v {
                    p.may_fix(v)
                } else {
                    p.may_move(v) && !g.is_input(w) && g.is_adjacent(v, w)
                };
                if !ok || std::mem::replace(&mut used[w], true) {
                    return false;
                }
            }
            None => {}
        }
    }
    is_acyclic(&preorder_edges(g, &pos))
}

/// Largest geometry [`brute_force_flows`] accepts.
pub const BRUTE_FORCE_LIMIT: usize = 12;

/// Every modified flow of the problem, by exhaustive enumeration.
pub fn brute_force_flows(p: &FlowProblem) -> Result<Vec<BTreeMap<QubitId, QubitId>>, FlowError> {
    let g = &p.geometry;
    let n = g.len();
    if n > BRUTE_FORCE_LIMIT {
        return Err(FlowError::TooLarge(n));
    }
    let measured: Vec<usize> = (0..n).filter(|&v| !g.is_output(v)).collect();
    let candidates: Vec<Vec<usize>> = measured
        .iter()
        .map(|&v| {
            let mut c: Vec<usize> = if p.may_move(v) {
                g.neighbors(v)
                    .iter()
                    .copied()
                    .filter(|&w| !g.is_input(w))
                    .collect()
            } else {
                vec![]
            };
            if p.may_fix(v) {
                c.push(v);
            }
            c
        })
        .collect();
    let mut found = Vec::new();
    let mut assign: Vec<Option<usize>> = vec![None; n];
    let mut used = vec![false; n];
    fn rec(
        k: usize,
        measured: &[usize],
        candidates: &[Vec<usize>],
        assign: &mut Vec<Option<usize>>,
        used: &mut Vec<bool>,
        g: &Geometry,
        found: &mut Vec<BTreeMap<QubitId, QubitId>>,
    ) {
        if k == measured.len() {
            if is_acyclic(&preorder_edges(g, assign)) {
                found.push(
                    assign
                        .iter()
                        .enumerate()
                        .filter_map(|(v, w)| w.map(|w| (g.name(v).clone(), g.name(w).clone())))
                        .collect(),
                );
            }
            return;
        }
        let v = measured[k];
        for &w in &candidates[k] {
            if used[w] {
                continue;
            }
            used[w] = true;
            assign[v] = Some(w);
            rec(k + 1, measured, candidates, assign, used, g, found);
            assign[v] = None;
            used[w] = false;
        }
    }
    rec(
        0,
        &measured,
        &candidates,
        &mut assign,
        &mut used,
        g,
        &mut found,
    );
    Ok(found)
}

/// Replays a flow as a sequence of star geometries, latest measurement
/// first: the centre of each star must currently be an output whose other
/// neighbours are all outputs; a mediator's neighbours must all be outputs.
/// Peeling every star must leave exactly the vertices outside the image of
/// `f`, all of them outputs.
pub fn replay_star_decomposition(p: &FlowProblem, flow: &ModifiedFlow) -> Result<(), String> {
    let g = &p.geometry;
    let n = g.len();
    let idx = |q: &QubitId| g.index_of(q).ok_or_else(|| format!("unknown qubit {q}"));
    let mut present = vec![true; n];
    let mut output: Vec<bool> = (0..n).map(|v| g.is_output(v)).collect();
    if flow.order.len() != flow.f.len()
        || flow.order.iter().collect::<BTreeSet<_>>().len() != flow.order.len()
    {
        return Err("the root order does not list each root once".into());
    }
    for u in flow.order.iter().rev() {
        let ui = idx(u)?;
        let c = flow
            .f
            .get(u)
            .ok_or_else(|| format!("{u} has no successor"))?;
        let ci = idx(c)?;
        if !present[ui] || output[ui] {
            return Err(format!(
                "root {u} is not a measured vertex of the remaining geometry"
            ));
        }
        let live_neighbors = |x: usize| {
            g.neighbors(x)
                .iter()
                .copied()
                .filter(|&y| present[y])
                .collect::<Vec<_>>()
        };
        if ci == ui {
            if !p.may_fix(ui) {
                return Err(format!("{u} may not be its own successor"));
            }
            if live_neighbors(ui).iter().any(|&y| !output[y]) {
                return Err(format!(
                    "mediator {u} has a measured neighbour still pending"
                ));
            }
            present[ui] = false;
        } else {
            if !present[ci] || !output[ci] || g.is_input(ci) || !g.is_adjacent(ui, ci) {
                return Err(format!(
                    "{c} cannot be the centre of the star rooted at {u}"
                ));
            }
            if live_neighbors(ci).iter().any(|&y| y != ui && !output[y]) {
                return Err(format!(
                    "centre {c} has a measured neighbour other than {u}"
                ));
            }
            present[ci] = false;
            output[ui] = true;
        }
    }
    let image: BTreeSet<usize> = flow.f.values().map(idx).collect::<Result<_, _>>()?;
    for v in 0..n {
        let expect = !image.contains(&v);
        if present[v] != expect || (present[v] && !output[v]) {
            return Err(format!("residual geometry is wrong at {}", g.name(v)));
        }
    }
    Ok(())
}
