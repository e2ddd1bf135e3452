//! Test-side oracles: a tiny dense-matrix kit written independently of the
//! library simulator, plus helpers shared by the integration tests.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64 as C;
use oneway::circuit::{Circuit, Gate};
use oneway::pattern::{AngleMap, Command, Geometry, Pattern, Plane, QubitId, SignalExpr};
use oneway::sim::DenseOperator;

pub type Mat = Vec<Vec<C>>;

pub fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

pub fn eye(dim: usize) -> Mat {
    (0..dim)
        .map(|i| (0..dim).map(|j| c((i == j) as u8 as f64, 0.0)).collect())
        .collect()
}

pub fn mul(a: &Mat, b: &Mat) -> Mat {
    let (n, k, m) = (a.len(), b.len(), b[0].len());
    (0..n)
        .map(|i| {
            (0..m)
                .map(|j| (0..k).map(|l| a[i][l] * b[l][j]).sum())
                .collect()
        })
        .collect()
}

pub fn kron(a: &Mat, b: &Mat) -> Mat {
    let (ra, ca, rb, cb) = (a.len(), a[0].len(), b.len(), b[0].len());
    (0..ra * rb)
        .map(|i| {
            (0..ca * cb)
                .map(|j| a[i / rb][j / cb] * b[i % rb][j % cb])
                .collect()
        })
        .collect()
}

pub fn scale(a: &Mat, s: C) -> Mat {
    a.iter()
        .map(|r| r.iter().map(|x| x * s).collect())
        .collect()
}

pub fn h() -> Mat {
    let s = FRAC_1_SQRT_2;
    vec![vec![c(s, 0.0), c(s, 0.0)], vec![c(s, 0.0), c(-s, 0.0)]]
}

/// T^k = diag(e^{−ikπ/8}, e^{ikπ/8}).
pub fn t_pow(k: i64) -> Mat {
    let a = k as f64 * PI / 8.0;
    vec![
        vec![C::from_polar(1.0, -a), c(0.0, 0.0)],
        vec![c(0.0, 0.0), C::from_polar(1.0, a)],
    ]
}

/// J(θ) = H·e^{−iZθ/2}, θ = units·π/4.
pub fn j(units: i64) -> Mat {
    let half = units as f64 * PI / 8.0;
    mul(
        &h(),
        &vec![
            vec![C::from_polar(1.0, -half), c(0.0, 0.0)],
            vec![c(0.0, 0.0), C::from_polar(1.0, half)],
        ],
    )
}

/// A diagonal matrix on `d` qubits from a phase function of the basis bits
/// (first qubit most significant).
pub fn diag(d: usize, phase: impl Fn(&[bool]) -> C) -> Mat {
    let dim = 1 << d;
    let mut m = vec![vec![c(0.0, 0.0); dim]; dim];
    for (i, row) in m.iter_mut().enumerate() {
        let bits: Vec<bool> = (0..d).map(|k| i >> (d - 1 - k) & 1 == 1).collect();
        row[i] = phase(&bits);
    }
    m
}

pub fn cz() -> Mat {
    diag(2, |b| {
        if b[0] && b[1] {
            c(-1.0, 0.0)
        } else {
            c(1.0, 0.0)
        }
    })
}

/// exp(−iθ Z^{⊗d}/2) with θ = units·π/4.
pub fn zzz(d: usize, units: i64) -> Mat {
    let theta = units as f64 * PI / 4.0;
    diag(d, |b| {
        let parity = b.iter().filter(|&&x| x).count() % 2;
        C::from_polar(
            1.0,
            if parity == 1 {
                theta / 2.0
            } else {
                -theta / 2.0
            },
        )
    })
}

pub fn cnot() -> Mat {
    let mut m = vec![vec![c(0.0, 0.0); 4]; 4];
    for (r, col) in [(0, 0), (1, 1), (2, 3), (3, 2)] {
        m[r][col] = c(1.0, 0.0);
    }
    m
}

/// A single-qubit matrix acting on position `p` of an `n`-qubit register.
pub fn on_qubit(n: usize, p: usize, u: &Mat) -> Mat {
    let id = eye(2);
    let mut m = vec![vec![c(1.0, 0.0)]];
    for k in 0..n {
        m = kron(&m, if k == p { u } else { &id });
    }
    m
}

/// The unitary of a gate list over its declared inputs (no fresh qubits),
/// built gate by gate from full-register matrices.
pub fn circuit_matrix(circ: &Circuit) -> Mat {
    let n = circ.inputs.len();
    let pos = |q: &QubitId| {
        circ.inputs
            .iter()
            .position(|x| x == q)
            .expect("declared wire")
    };
    let mut u = eye(1 << n);
    for g in &circ.gates {
        let step = match g {
            Gate::H(q) => on_qubit(n, pos(q), &h()),
            Gate::T(q) => on_qubit(n, pos(q), &t_pow(1)),
            Gate::Tdg(q) => on_qubit(n, pos(q), &t_pow(-1)),
            Gate::J(t, q) => on_qubit(n, pos(q), &j(t.units())),
            Gate::CZ(a, b) | Gate::ZZ(a, b) => {
                let (pa, pb) = (pos(a), pos(b));
                let is_zz = matches!(g, Gate::ZZ(..));
                diag(n, |bits| {
                    if is_zz {
                        let odd = bits[pa] ^ bits[pb];
                        C::from_polar(1.0, if odd { PI / 4.0 } else { -PI / 4.0 })
                    } else if bits[pa] && bits[pb] {
                        c(-1.0, 0.0)
                    } else {
                        c(1.0, 0.0)
                    }
                })
            }
            Gate::KetPlus(_) => panic!("the oracle handles unitary circuits only"),
        };
        u = mul(&step, &u);
    }
    u
}

pub fn to_mat(op: &DenseOperator) -> Mat {
    (0..op.rows)
        .map(|r| (0..op.cols).map(|col| op.get(r, col)).collect())
        .collect()
}

/// max |a − λb| over entries, with λ the unit phase aligning the largest
/// entry of `b`; `None` if the shapes differ.
pub fn phase_distance(a: &Mat, b: &Mat) -> Option<f64> {
    if a.len() != b.len() || a[0].len() != b[0].len() {
        return None;
    }
    let (mut bi, mut bj, mut best) = (0, 0, -1.0);
    for (i, row) in b.iter().enumerate() {
        for (jx, x) in row.iter().enumerate() {
            if x.norm() > best {
                (bi, bj, best) = (i, jx, x.norm());
            }
        }
    }
    let ratio = a[bi][bj] / b[bi][bj];
    let lambda = ratio / ratio.norm();
    let mut worst: f64 = 0.0;
    for (ra, rb) in a.iter().zip(b) {
        for (x, y) in ra.iter().zip(rb) {
            worst = worst.max((x - lambda * y).norm());
        }
    }
    Some(worst)
}

pub fn max_diff(a: &Mat, b: &Mat) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| (x - y).norm()))
        .fold(0.0, f64::max)
}

/// A pattern written in the shape a modified flow prescribes before any
/// rewriting: prepare everything, entangle every edge, then for each
/// measured qubit in a linear extension of the natural pre-order measure it
/// and immediately correct — X on its successor and Z on the successor's
/// other neighbours (a fixed point corrects only with Z on its neighbours).
pub fn sequential_flow_pattern(
    g: &Geometry,
    f: &BTreeMap<QubitId, QubitId>,
    angles: &AngleMap,
) -> Pattern {
    let names: Vec<QubitId> = g.names().to_vec();
    let idx = |q: &QubitId| g.index_of(q).expect("vertex");
    // v precedes f(v) and the neighbours of f(v).
    let mut succ: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); names.len()];
    for (v, w) in f {
        let (v, w) = (idx(v), idx(w));
        if v != w {
            succ[v].insert(w);
        }
        for &x in g.neighbors(w) {
            if x != v {
                succ[v].insert(x);
            }
        }
    }
    let mut indeg = vec![0; names.len()];
    for s in &succ {
        for &x in s {
            indeg[x] += 1;
        }
    }
    let mut ready: BTreeSet<usize> = (0..names.len()).filter(|&v| indeg[v] == 0).collect();
    let mut order = Vec::new();
    while let Some(v) = ready.pop_first() {
        order.push(v);
        for &x in &succ[v] {
            indeg[x] -= 1;
            if indeg[x] == 0 {
                ready.insert(x);
            }
        }
    }
    assert_eq!(
        order.len(),
        names.len(),
        "the natural pre-order must be acyclic"
    );

    let mut cmds: Vec<Command> = (0..names.len())
        .filter(|&v| !g.is_input(v))
        .map(|v| Command::Prepare(names[v].clone()))
        .collect();
    cmds.extend(g.edges().into_iter().map(|(a, b)| Command::Entangle(a, b)));
    for v in order {
        let Some(w) = f.get(&names[v]) else { continue };
        let (plane, angle) = angles[&names[v]];
        assert_eq!(plane, Plane::XY);
        cmds.push(Command::measure(names[v].clone(), angle));
        let s = SignalExpr::single(names[v].clone());
        let wi = idx(w);
        if wi != v {
            cmds.push(Command::CorrectX(w.clone(), s.clone()));
        }
        for &x in g.neighbors(wi) {
            if x != v {
                cmds.push(Command::CorrectZ(names[x].clone(), s.clone()));
            }
        }
    }
    Pattern {
        inputs: g.inputs(),
        commands: cmds,
    }
}
