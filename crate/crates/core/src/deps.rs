//! Dependency algebra over GF(2).
//!
//! For a geometry with successor function `f`, the matrix `F` records the
//! direct byproduct of each measurement (row = source, column = target) and
//! `T` records how byproducts turn into outcome shifts that propagate to
//! later dependencies. The dependency set of a target `w` in a normal-form
//! pattern must be the column `(I+T)⁻¹F e_w` (signs and X corrections) or
//! `(I+T)⁻¹T e_w` (Z corrections).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::flow::natural_preorder;
use crate::pattern::{
    geometry_of, Angle, AngleMap, Command, Geometry, Pattern, Plane, QubitId, SignalExpr,
};
use crate::rewrite::is_normal_form;

/// A square matrix over GF(2) with bit-packed rows.
#[derive(Clone, PartialEq, Eq)]
pub struct Gf2Matrix {
    n: usize,
    words: usize,
    data: Vec<u64>,
}

impl Gf2Matrix {
    pub fn zeros(n: usize) -> Gf2Matrix {
        let words = n.div_ceil(64).max(1);
        Gf2Matrix {
            n,
            words,
            data: vec![0; n * words],
        }
    }

    pub fn identity(n: usize) -> Gf2Matrix {
        let mut m = Gf2Matrix::zeros(n);
        for i in 0..n {
            m.set(i, i, true);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        self.data[r * self.words + c / 64] >> (c % 64) & 1 == 1
    }

    pub fn set(&mut self, r: usize, c: usize, v: bool) {
        let w = &mut self.data[r * self.words + c / 64];
        if v {
            *w |= 1 << (c % 64);
        } else {
            *w &= !(1 << (c % 64));
        }
    }

    /// Row `dst` ^= row `src`.
    fn xor_rows(&mut self, dst: usize, src: usize) {
        if dst == src {
            self.data[dst * self.words..(dst + 1) * self.words].fill(0);
            return;
        }
        for k in 0..self.words {
            let s = self.data[src * self.words + k];
            self.data[dst * self.words + k] ^= s;
        }
    }

    pub fn add(&self, other: &Gf2Matrix) -> Gf2Matrix {
        assert_eq!(self.n, other.n);
        Gf2Matrix {
            n: self.n,
            words: self.words,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a ^ b)
                .collect(),
        }
    }

    pub fn mul(&self, other: &Gf2Matrix) -> Gf2Matrix {
        assert_eq!(self.n, other.n);
        let mut out = Gf2Matrix::zeros(self.n);
        for i in 0..self.n {
            for k in 0..self.n {
                if self.get(i, k) {
                    for w in 0..self.words {
                        out.data[i * self.words + w] ^= other.data[k * self.words + w];
                    }
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Gf2Matrix {
        let mut out = Gf2Matrix::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                if self.get(i, j) {
                    out.set(j, i, true);
                }
            }
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&w| w == 0)
    }

    pub fn column(&self, c: usize) -> Vec<bool> {
        (0..self.n).map(|r| self.get(r, c)).collect()
    }

    /// Positions of the ones in row `r`.
    pub fn row_support(&self, r: usize) -> Vec<usize> {
        (0..self.n).filter(|&c| self.get(r, c)).collect()
    }

    pub fn mul_vec(&self, x: &[bool]) -> Vec<bool> {
        (0..self.n)
            .map(|r| (0..self.n).filter(|&c| x[c] && self.get(r, c)).count() % 2 == 1)
            .collect()
    }
}

impl fmt::Debug for Gf2Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in 0..self.n {
            let line: String = (0..self.n)
                .map(|c| if self.get(r, c) { '1' } else { '.' })
                .collect();
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}

/// Solves `A x = b` over GF(2) by Gaussian elimination, returning one solution.
pub fn gf2_solve(a: &Gf2Matrix, b: &[bool]) -> Option<Vec<bool>> {
    let n = a.dim();
    assert_eq!(b.len(), n);
    // Augment with b as an extra column.
    let mut m = Gf2Matrix::zeros(n + 1);
    for (r, &br) in b.iter().enumerate() {
        for c in 0..n {
            if a.get(r, c) {
                m.set(r, c, true);
            }
        }
        m.set(r, n, br);
    }
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..n {
        let Some(p) = (row..n).find(|&r| m.get(r, col)) else {
            continue;
        };
        if p != row {
            for k in 0..m.words {
                m.data.swap(p * m.words + k, row * m.words + k);
            }
        }
        for r in 0..n {
            if r != row && m.get(r, col) {
                m.xor_rows(r, row);
            }
        }
        pivots.push(col);
        row += 1;
    }
    if (row..n).any(|r| m.get(r, n)) {
        return None;
    }
    let mut x = vec![false; n];
    for (r, &c) in pivots.iter().enumerate() {
        x[c] = m.get(r, n);
    }
    Some(x)
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum DepsError {
    #[error("pattern is not in normal form")]
    NotNormalForm,
    #[error("the successor function is not a modified flow")]
    NotAFlow,
    #[error("{0} is its own successor but is not measured in the XY plane at π/2")]
    BadMediatorAngle(QubitId),
    #[error("YZ-plane measurement of {0} is outside the dependency characterization")]
    UnsupportedPlane(QubitId),
}

/// F and T over the vertices of a geometry (in the geometry's vertex order).
#[derive(Clone, Debug)]
pub struct DependencyMatrices {
    pub names: Vec<QubitId>,
    pub f: Gf2Matrix,
    pub t: Gf2Matrix,
    pub a_x: BTreeSet<QubitId>,
    pub a_y: BTreeSet<QubitId>,
}

/// Sparse form of the same data, used by the fast paths.
struct SparseDeps {
    n: usize,
    measured: Vec<bool>,
    /// F row v: the single target, if any.
    f_target: Vec<Option<usize>>,
    /// T rows.
    t_rows: Vec<Vec<usize>>,
}

fn pauli_sets(angles: &AngleMap) -> (BTreeSet<QubitId>, BTreeSet<QubitId>) {
    let a_x = angles
        .iter()
        .filter(|(_, (_, a))| a.is_pauli_x())
        .map(|(q, _)| q.clone())
        .collect();
    let a_y = angles
        .iter()
        .filter(|(_, (_, a))| a.is_pauli_y())
        .map(|(q, _)| q.clone())
        .collect();
    (a_x, a_y)
}

fn sparse(g: &Geometry, f: &BTreeMap<QubitId, QubitId>, angles: &AngleMap) -> SparseDeps {
    let n = g.len();
    let measured: Vec<bool> = (0..n).map(|v| !g.is_output(v)).collect();
    let pauli = |w: usize, y_only: bool| {
        angles
            .get(g.name(w))
            .is_some_and(|(_, a)| if y_only { a.is_pauli_y() } else { a.is_pauli() })
    };
    let mut f_target = vec![None; n];
    let mut t_rows = vec![Vec::new(); n];
    for (v, w) in f {
        let (Some(v), Some(w)) = (g.index_of(v), g.index_of(w)) else {
            continue;
        };
        if !measured[v] {
            continue;
        }
        if !pauli(w, false) {
            f_target[v] = Some(w);
        }
        let mut row: BTreeSet<usize> = g.neighbors(w).iter().copied().filter(|&x| x != v).collect();
        if w != v && measured[w] && pauli(w, true) {
            row.insert(w);
        }
        t_rows[v] = row.into_iter().collect();
    }
    SparseDeps {
        n,
        measured,
        f_target,
        t_rows,
    }
}

/// Builds F and T for a geometry, successor function and measurement angles.
pub fn dependency_matrices(
    g: &Geometry,
    f: &BTreeMap<QubitId, QubitId>,
    angles: &AngleMap,
) -> DependencyMatrices {
    let s = sparse(g, f, angles);
    let mut fm = Gf2Matrix::zeros(s.n);
    let mut tm = Gf2Matrix::zeros(s.n);
    for v in 0..s.n {
        if let Some(w) = s.f_target[v] {
            fm.set(v, w, true);
        }
        for &w in &s.t_rows[v] {
            tm.set(v, w, true);
        }
    }
    let (a_x, a_y) = pauli_sets(angles);
    DependencyMatrices {
        names: g.names().to_vec(),
        f: fm,
        t: tm,
        a_x,
        a_y,
    }
}

/// Which dependency of a qubit failed the check.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum DependencyKind {
    Sign,
    CorrectX,
    CorrectZ,
}

impl fmt::Display for DependencyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DependencyKind::Sign => "sign",
            DependencyKind::CorrectX => "X correction",
            DependencyKind::CorrectZ => "Z correction",
        })
    }
}

/// The outcome of a dependency check: `None` if consistent, else the first
/// failing qubit and dependency.
pub type DependencyFailure = Option<(QubitId, DependencyKind)>;

/// Whether every dependency in a normal-form pattern matches the columns
/// predicted by `f`. Absent corrections count as empty dependency sets.
pub fn test_dependencies(p: &Pattern, f: &BTreeMap<QubitId, QubitId>) -> Result<bool, DepsError> {
    check_dependencies(p, f).map(|r| r.is_none())
}

/// As [`test_dependencies`], reporting the first failure.
pub fn check_dependencies(
    p: &Pattern,
    f: &BTreeMap<QubitId, QubitId>,
) -> Result<DependencyFailure, DepsError> {
    if !is_normal_form(p) {
        return Err(DepsError::NotNormalForm);
    }
    let (g, angles) = geometry_of(p);
    let s = sparse(&g, f, &angles);
    let n = s.n;
    let mut sign: Vec<Option<&SignalExpr>> = vec![None; n];
    let mut xs: Vec<SignalExpr> = vec![SignalExpr::empty(); n];
    let mut zs: Vec<SignalExpr> = vec![SignalExpr::empty(); n];
    for c in &p.commands {
        match c {
            Command::Measure {
                qubit, sign: sg, ..
            } => sign[g.index_of(qubit).expect("pattern qubit")] = Some(sg),
            Command::CorrectX(q, d) => xs[g.index_of(q).expect("pattern qubit")].xor_with(d),
            Command::CorrectZ(q, d) => zs[g.index_of(q).expect("pattern qubit")].xor_with(d),
            _ => {}
        }
    }
    for v in 0..n {
        if s.measured[v] && !f.contains_key(g.name(v)) {
            return Ok(Some((g.name(v).clone(), DependencyKind::Sign)));
        }
    }
    let mut d = vec![false; n];
    // (I+T)d = b, checked row by row in O(n + Σ|T rows|).
    let mut check = |expr: &SignalExpr, target: &dyn Fn(usize) -> bool| -> bool {
        d.fill(false);
        for q in expr.iter() {
            match g.index_of(q) {
                Some(i) if s.measured[i] => d[i] = true,
                _ => return false,
            }
        }
        (0..n).filter(|&v| s.measured[v]).all(|v| {
            let lhs = s.t_rows[v].iter().filter(|&&u| d[u]).count() % 2 == 1;
            (d[v] ^ lhs) == target(v)
        })
    };
    let f_target = &s.f_target;
    let t_rows = &s.t_rows;
    let f_col = |w: usize| move |v: usize| f_target[v] == Some(w);
    let t_col = |w: usize| move |v: usize| t_rows[v].binary_search(&w).is_ok();
    for w in 0..n {
        if s.measured[w] {
            let e = sign[w].cloned().unwrap_or_default();
            if !check(&e, &f_col(w)) {
                return Ok(Some((g.name(w).clone(), DependencyKind::Sign)));
            }
        } else {
            if !check(&xs[w], &f_col(w)) {
                return Ok(Some((g.name(w).clone(), DependencyKind::CorrectX)));
            }
            if !check(&zs[w], &t_col(w)) {
                return Ok(Some((g.name(w).clone(), DependencyKind::CorrectZ)));
            }
        }
    }
    Ok(None)
}

/// The normal-form pattern a modified flow determines: all preparations and
/// entanglings, measurements in a linear extension of the natural pre-order
/// with sign dependencies `(I+T)⁻¹F`, and output corrections `(I+T)⁻¹F`
/// (X) and `(I+T)⁻¹T` (Z).
pub fn predicted_normal_form(
    g: &Geometry,
    f: &BTreeMap<QubitId, QubitId>,
    angles: &AngleMap,
) -> Result<Pattern, DepsError> {
    let n = g.len();
    for v in 0..n {
        let name = g.name(v);
        if g.is_output(v) != !f.contains_key(name) || g.is_output(v) == angles.contains_key(name) {
            return Err(DepsError::NotAFlow);
        }
    }
    for (q, (plane, angle)) in angles {
        if *plane == Plane::YZ {
            return Err(DepsError::UnsupportedPlane(q.clone()));
        }
        if f.get(q) == Some(q) && *angle != Angle::HALF_PI {
            return Err(DepsError::BadMediatorAngle(q.clone()));
        }
    }
    let order = natural_preorder(g, f).ok_or(DepsError::NotAFlow)?;
    let s = sparse(g, f, angles);

    // Measurement order: Kahn over the generators, ties by name.
    let gens = order.generators();
    let mut succ = vec![Vec::new(); n];
    let mut indeg = vec![0usize; n];
    for (a, b) in &gens {
        let (a, b) = (
            g.index_of(a).expect("vertex"),
            g.index_of(b).expect("vertex"),
        );
        succ[a].push(b);
        indeg[b] += 1;
    }
    let mut ready: BTreeSet<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
    let mut topo = Vec::with_capacity(n);
    while let Some(v) = ready.pop_first() {
        topo.push(v);
        for &w in &succ[v] {
            indeg[w] -= 1;
            if indeg[w] == 0 {
                ready.insert(w);
            }
        }
    }

    // Columns of R = (I+T)⁻¹ from R = I + R·T: column u is e_u plus the
    // columns x with T[x][u] = 1, all of which precede u.
    let words = n.div_ceil(64).max(1);
    let mut t_cols = vec![Vec::new(); n];
    for v in 0..n {
        for &u in &s.t_rows[v] {
            t_cols[u].push(v);
        }
    }
    let mut r_cols: Vec<Vec<u64>> = vec![vec![0; words]; n];
    for &u in &topo {
        let mut col = vec![0u64; words];
        col[u / 64] |= 1 << (u % 64);
        for &x in &t_cols[u] {
            for k in 0..words {
                col[k] ^= r_cols[x][k];
            }
        }
        r_cols[u] = col;
    }
    let to_expr = |col: &[u64]| {
        SignalExpr::from_qubits(
            (0..n)
                .filter(|&v| col[v / 64] >> (v % 64) & 1 == 1 && s.measured[v])
                .map(|v| g.name(v).clone()),
        )
    };
    let mut f_inv = vec![None; n];
    for v in 0..n {
        if let Some(w) = s.f_target[v] {
            f_inv[w] = Some(v);
        }
    }
    let rf = |w: usize| f_inv[w].map_or_else(SignalExpr::empty, |u| to_expr(&r_cols[u]));
    let rt = |w: usize| {
        let mut col = vec![0u64; words];
        for &u in &t_cols[w] {
            for k in 0..words {
                col[k] ^= r_cols[u][k];
            }
        }
        to_expr(&col)
    };

    let mut commands: Vec<Command> = (0..n)
        .filter(|&v| !g.is_input(v))
        .map(|v| Command::Prepare(g.name(v).clone()))
        .collect();
    commands.extend(g.edges().into_iter().map(|(a, b)| Command::Entangle(a, b)));
    for &v in &topo {
        if let Some((plane, angle)) = angles.get(g.name(v)) {
            commands.push(Command::Measure {
                qubit: g.name(v).clone(),
                plane: *plane,
                angle: *angle,
                sign: rf(v),
            });
        }
    }
    for w in (0..n).filter(|&w| g.is_output(w)) {
        let x = rf(w);
        if !x.is_empty() {
            commands.push(Command::CorrectX(g.name(w).clone(), x));
        }
        let z = rt(w);
        if !z.is_empty() {
            commands.push(Command::CorrectZ(g.name(w).clone(), z));
        }
    }
    Ok(Pattern {
        inputs: g.inputs(),
        commands,
    })
}
