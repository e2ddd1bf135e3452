//! Seeded random instances: circuits, small connected graphs, geometries
//! carrying a modified flow, over-dense geometries, and long chains.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::circuit::{Circuit, Gate};
use crate::deps::{predicted_normal_form, DepsError};
use crate::pattern::{Angle, AngleMap, Command, Geometry, Pattern, Plane, QubitId};

/// The deterministic generator used everywhere a seed is accepted.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn wire(i: usize) -> QubitId {
    QubitId::new(format!("q{i}"))
}

/// A random circuit over {H, T, CZ} with 1..=`max_qubits` wires and
/// 0..=`max_gates` gates. With `nearest_neighbor`, CZ only joins wires that
/// are adjacent in declaration order.
pub fn random_circuit(
    rng: &mut impl Rng,
    max_qubits: usize,
    max_gates: usize,
    nearest_neighbor: bool,
) -> Circuit {
    let n = rng.gen_range(1..=max_qubits.max(1));
    let len = rng.gen_range(0..=max_gates);
    let mut gates = Vec::with_capacity(len);
    for _ in 0..len {
        let kind = if n >= 2 {
            rng.gen_range(0..3)
        } else {
            rng.gen_range(0..2)
        };
        gates.push(match kind {
            0 => Gate::H(wire(rng.gen_range(0..n))),
            1 => Gate::T(wire(rng.gen_range(0..n))),
            _ => {
                let (a, b) = if nearest_neighbor {
                    let a = rng.gen_range(0..n - 1);
                    (a, a + 1)
                } else {
                    let a = rng.gen_range(0..n);
                    let b = (a + rng.gen_range(1..n)) % n;
                    (a, b)
                };
                Gate::CZ(wire(a), wire(b))
            }
        });
    }
    Circuit::new((0..n).map(wire), gates)
}

/// An undirected simple graph on vertices `0..n` as an edge bitmask over
/// the pairs `(i, j)`, `i < j`, in lexicographic order.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SmallGraph {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
}

fn pair_index(n: usize) -> Vec<(usize, usize)> {
    (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect()
}

fn is_connected(n: usize, edges: &[(usize, usize)]) -> bool {
    if n == 0 {
        return false;
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(v) = stack.pop() {
        for &(a, b) in edges {
            let w = if a == v {
                b
            } else if b == v {
                a
            } else {
                continue;
            };
            if !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    seen.iter().all(|&s| s)
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut p: Vec<usize> = (0..n).collect();
    fn heap(k: usize, p: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k <= 1 {
            out.push(p.clone());
            return;
        }
        for i in 0..k {
            heap(k - 1, p, out);
            if k % 2 == 0 {
                p.swap(i, k - 1);
            } else {
                p.swap(0, k - 1);
            }
        }
    }
    heap(n, &mut p, &mut out);
    out
}

/// One representative of every isomorphism class of connected graphs on
/// exactly `n` vertices (the least edge mask under relabelling).
pub fn connected_graphs(n: usize) -> Vec<SmallGraph> {
    let pairs = pair_index(n);
    let slot: BTreeMap<(usize, usize), usize> =
        pairs.iter().enumerate().map(|(i, &p)| (p, i)).collect();
    let perms = permutations(n);
    let mut classes: BTreeSet<u64> = BTreeSet::new();
    for mask in 0u64..(1 << pairs.len()) {
        if (mask.count_ones() as usize) + 1 < n {
            continue;
        }
        let edges: Vec<(usize, usize)> = (0..pairs.len())
            .filter(|&i| mask >> i & 1 == 1)
            .map(|i| pairs[i])
            .collect();
        if !is_connected(n, &edges) {
            continue;
        }
        let canonical = perms
            .iter()
            .map(|p| {
                edges.iter().fold(0u64, |acc, &(a, b)| {
                    let (x, y) = (p[a].min(p[b]), p[a].max(p[b]));
                    acc | 1 << slot[&(x, y)]
                })
            })
            .min()
            .expect("at least one permutation");
        classes.insert(canonical);
    }
    classes
        .into_iter()
        .map(|mask| SmallGraph {
            n,
            edges: (0..pairs.len())
                .filter(|&i| mask >> i & 1 == 1)
                .map(|i| pairs[i])
                .collect(),
        })
        .collect()
}

fn vertex(i: usize) -> QubitId {
    QubitId::new(format!("v{i}"))
}

/// A geometry over a small graph with the given input and output positions.
pub fn small_geometry(
    g: &SmallGraph,
    inputs: &BTreeSet<usize>,
    outputs: &BTreeSet<usize>,
) -> Geometry {
    Geometry::new(
        (0..g.n).map(vertex),
        g.edges.iter().map(|&(a, b)| (vertex(a), vertex(b))),
        inputs.iter().map(|&i| vertex(i)),
        outputs.iter().map(|&i| vertex(i)),
    )
    .expect("generated geometry is well formed")
}

/// A uniformly random subset of `0..n` with exactly `k` elements.
pub fn random_subset(rng: &mut impl Rng, n: usize, k: usize) -> BTreeSet<usize> {
    let all: Vec<usize> = (0..n).collect();
    all.choose_multiple(rng, k).copied().collect()
}

/// Interface and mediator choices for a small graph: `(I, O, M)` with
/// `M` drawn from the measured vertices.
pub fn random_interface(
    rng: &mut impl Rng,
    n: usize,
    equal_io: bool,
) -> (BTreeSet<usize>, BTreeSet<usize>, BTreeSet<usize>) {
    let k = rng.gen_range(1..=n);
    let outputs = random_subset(rng, n, k);
    let i = if equal_io { k } else { rng.gen_range(0..=n) };
    let inputs = random_subset(rng, n, i);
    let mediators = (0..n)
        .filter(|v| !outputs.contains(v) && rng.gen_bool(0.3))
        .collect();
    (inputs, outputs, mediators)
}

/// A measurement-free pattern over a geometry: prepare the non-inputs,
/// entangle every edge, measure each non-output at its angle with no
/// dependencies (in name order).
pub fn bare_pattern(g: &Geometry, angles: &AngleMap) -> Pattern {
    let mut commands: Vec<Command> = (0..g.len())
        .filter(|&v| !g.is_input(v))
        .map(|v| Command::Prepare(g.name(v).clone()))
        .collect();
    commands.extend(g.edges().into_iter().map(|(a, b)| Command::Entangle(a, b)));
    for (q, (plane, angle)) in angles {
        commands.push(Command::Measure {
            qubit: q.clone(),
            plane: *plane,
            angle: *angle,
            sign: Default::default(),
        });
    }
    Pattern {
        inputs: g.inputs(),
        commands,
    }
}

/// An over-dense geometry: `m > nk − k(k+1)/2` edges, `k` outputs and `k`
/// inputs, every measured qubit at angle 0.
pub fn over_dense_geometry(rng: &mut impl Rng, max_n: usize) -> (Geometry, AngleMap) {
    let n = rng.gen_range(3..=max_n.max(3));
    let k = rng.gen_range(1..=n - 2);
    let bound = n * k - k * (k + 1) / 2;
    let pairs = pair_index(n);
    let m = rng.gen_range(bound + 1..=pairs.len());
    let edges: Vec<(usize, usize)> = pairs.choose_multiple(rng, m).copied().collect();
    let outputs = random_subset(rng, n, k);
    let inputs = random_subset(rng, n, k);
    let g = small_geometry(&SmallGraph { n, edges }, &inputs, &outputs);
    let angles = (0..n)
        .filter(|v| !outputs.contains(v))
        .map(|v| (vertex(v), (Plane::XY, Angle::ZERO)))
        .collect();
    (g, angles)
}

/// A geometry with a modified flow, built by composing random stars onto
/// `wires` input qubits until it has `size` vertices: either a wire moves
/// to a fresh qubit (which may also touch other current outputs), or a
/// fresh mediator joins two or more current outputs.
#[derive(Clone, Debug)]
pub struct FlowInstance {
    pub geometry: Geometry,
    pub angles: AngleMap,
    pub f: BTreeMap<QubitId, QubitId>,
}

impl FlowInstance {
    /// The normal-form pattern the flow determines.
    pub fn pattern(&self) -> Result<Pattern, DepsError> {
        predicted_normal_form(&self.geometry, &self.f, &self.angles)
    }
}

pub fn random_flow_instance(rng: &mut impl Rng, wires: usize, size: usize) -> FlowInstance {
    let mut current: Vec<usize> = (0..wires).collect();
    let mut edges: Vec<(usize, usize)> = Vec::new();
    let mut f: BTreeMap<usize, usize> = BTreeMap::new();
    let mut mediators = BTreeSet::new();
    let mut next = wires;
    while next < size {
        let fresh = next;
        next += 1;
        if current.len() >= 2 && rng.gen_bool(0.3) {
            let k = rng.gen_range(2..=current.len());
            for &x in current.choose_multiple(rng, k) {
                edges.push((x, fresh));
            }
            f.insert(fresh, fresh);
            mediators.insert(fresh);
        } else {
            let slot = rng.gen_range(0..current.len());
            let root = current[slot];
            edges.push((root, fresh));
            for (i, &x) in current.iter().enumerate() {
                if i != slot && rng.gen_bool(0.3) {
                    edges.push((x, fresh));
                }
            }
            f.insert(root, fresh);
            current[slot] = fresh;
        }
    }
    let outputs: BTreeSet<usize> = current.iter().copied().collect();
    let g = small_geometry(
        &SmallGraph { n: size, edges },
        &(0..wires).collect(),
        &outputs,
    );
    let angles = (0..size)
        .filter(|v| !outputs.contains(v))
        .map(|v| {
            let a = if mediators.contains(&v) {
                Angle::HALF_PI
            } else {
                Angle::from_units(rng.gen_range(-3..=4))
            };
            (vertex(v), (Plane::XY, a))
        })
        .collect();
    FlowInstance {
        geometry: g,
        angles,
        f: f.into_iter().map(|(a, b)| (vertex(a), vertex(b))).collect(),
    }
}

/// A path `c0 – c1 – … – c(n−1)` with input `c0` and output `c(n−1)`,
/// every measured qubit at a random angle, in normal form with the
/// dependencies its flow requires.
pub fn chain_pattern(rng: &mut impl Rng, n: usize) -> Pattern {
    assert!(n >= 1);
    let name = |i: usize| QubitId::new(format!("c{i}"));
    let g = Geometry::new(
        (0..n).map(name),
        (1..n).map(|i| (name(i - 1), name(i))),
        [name(0)],
        [name(n - 1)],
    )
    .expect("chain geometry is well formed");
    let angles: AngleMap = (0..n - 1)
        .map(|i| {
            (
                name(i),
                (Plane::XY, Angle::from_units(rng.gen_range(-3..=4))),
            )
        })
        .collect();
    let f = (0..n - 1).map(|i| (name(i), name(i + 1))).collect();
    predicted_normal_form(&g, &f, &angles).expect("a chain has a flow")
}
