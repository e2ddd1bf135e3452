//! Dense state-vector simulation of circuits, stable-index expressions and
//! patterns. Intended as a reference oracle for small instances.
//!
//! Registers list qubits in order; the first qubit is the most significant
//! bit of a basis-state index. Operators are stored row-major.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::circuit::{Circuit, Gate};
use crate::pattern::{validate_pattern, Angle, Command, Pattern, Plane, QubitId};
use crate::stable_index::{IndexId, StableIndexExpr, TermGate};

/// Largest register (live qubits plus input columns, in bits) the simulator accepts.
pub const MAX_SIM_BITS: usize = 24;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum SimError {
    #[error("pattern is not well formed: {0}")]
    IllFormed(String),
    #[error("register of {0} bits exceeds the simulator limit")]
    TooLarge(usize),
    #[error("unknown qubit {0}")]
    UnknownQubit(String),
    #[error("more than {0} measurement branches")]
    TooManyBranches(usize),
    #[error("expression is not simulable: {0}")]
    BadExpression(String),
}

/// A dense complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseOperator {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<C64>,
}

impl DenseOperator {
    pub fn zeros(rows: usize, cols: usize) -> DenseOperator {
        DenseOperator {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> DenseOperator {
        let mut m = DenseOperator::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_rows(rows: &[&[C64]]) -> DenseOperator {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        DenseOperator {
            rows: r,
            cols: c,
            data: rows.iter().flat_map(|x| x.iter().copied()).collect(),
        }
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: C64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn matmul(&self, other: &DenseOperator) -> DenseOperator {
        assert_eq!(self.cols, other.rows, "dimension mismatch");
        let mut out = DenseOperator::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                let row = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn adjoint(&self) -> DenseOperator {
        let mut out = DenseOperator::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j].conj();
            }
        }
        out
    }

    pub fn kron(&self, other: &DenseOperator) -> DenseOperator {
        let mut out = DenseOperator::zeros(self.rows * other.rows, self.cols * other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self.get(i, j);
                for k in 0..other.rows {
                    for l in 0..other.cols {
                        out.set(i * other.rows + k, j * other.cols + l, a * other.get(k, l));
                    }
                }
            }
        }
        out
    }

    pub fn scale(&self, s: C64) -> DenseOperator {
        DenseOperator {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    pub fn frobenius_sqr(&self) -> f64 {
        self.data.iter().map(|x| x.norm_sqr()).sum()
    }

    /// Largest entrywise modulus of `self − other`; infinite on shape mismatch.
    pub fn max_abs_diff(&self, other: &DenseOperator) -> f64 {
        if self.rows != other.rows || self.cols != other.cols {
            return f64::INFINITY;
        }
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Whether `self† self = I` within `tol`.
    pub fn is_isometry(&self, tol: f64) -> bool {
        self.adjoint()
            .matmul(self)
            .max_abs_diff(&DenseOperator::identity(self.cols))
            <= tol
    }
}

/// Whether `a = λ b` for some unit-modulus λ, entrywise within `tol`. The
/// phase is read off the largest entry of `b`.
pub fn equal_up_to_phase(a: &DenseOperator, b: &DenseOperator, tol: f64) -> bool {
    if a.rows != b.rows || a.cols != b.cols {
        return false;
    }
    let Some((i, bi)) = b
        .data
        .iter()
        .enumerate()
        .max_by(|x, y| x.1.norm_sqr().total_cmp(&y.1.norm_sqr()))
    else {
        return true;
    };
    if bi.norm() <= tol {
        return a.data.iter().all(|x| x.norm() <= tol);
    }
    let lambda = a.data[i] / bi;
    if (lambda.norm() - 1.0).abs() > tol {
        return false;
    }
    a.max_abs_diff(&b.scale(lambda)) <= tol
}

/// Maps a register position `i` of `want` to the bit mask of the same name
/// in `have` (most significant bit first).
fn register_masks(have: &[QubitId], want: &[QubitId]) -> Result<Vec<usize>, SimError> {
    if have.len() != want.len() {
        return Err(SimError::BadExpression(format!(
            "registers {have:?} and {want:?} differ"
        )));
    }
    let n = have.len();
    want.iter()
        .map(|q| {
            have.iter()
                .position(|x| x == q)
                .map(|p| 1 << (n - 1 - p))
                .ok_or_else(|| SimError::UnknownQubit(q.to_string()))
        })
        .collect()
}

fn gather(index: usize, masks: &[usize]) -> usize {
    let n = masks.len();
    masks
        .iter()
        .enumerate()
        .filter(|(i, _)| index & (1 << (n - 1 - i)) != 0)
        .fold(0, |acc, (_, m)| acc | m)
}

/// Re-labels an operator whose rows are indexed by the register `rows_have`
/// and columns by `cols_have` so that they follow `rows_want` and
/// `cols_want` instead (each a permutation of the original names).
pub fn align_registers(
    op: &DenseOperator,
    rows_have: &[QubitId],
    rows_want: &[QubitId],
    cols_have: &[QubitId],
    cols_want: &[QubitId],
) -> Result<DenseOperator, SimError> {
    let rm = register_masks(rows_have, rows_want)?;
    let cm = register_masks(cols_have, cols_want)?;
    if op.rows != 1 << rm.len() || op.cols != 1 << cm.len() {
        return Err(SimError::BadExpression(
            "operator shape does not match its registers".into(),
        ));
    }
    let mut out = DenseOperator::zeros(op.rows, op.cols);
    for r in 0..op.rows {
        let src_r = gather(r, &rm);
        for col in 0..op.cols {
            out.set(r, col, op.get(src_r, gather(col, &cm)));
        }
    }
    Ok(out)
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn cis(theta: f64) -> C64 {
    C64::from_polar(1.0, theta)
}

/// The Hadamard matrix.
pub fn hadamard() -> [[C64; 2]; 2] {
    let h = c(FRAC_1_SQRT_2, 0.0);
    [[h, h], [h, -h]]
}

/// J(θ) = H·e^{−iZθ/2}.
pub fn j_matrix(theta: Angle) -> [[C64; 2]; 2] {
    let t = theta.radians();
    let h = FRAC_1_SQRT_2;
    let (a, b) = (cis(-t / 2.0) * h, cis(t / 2.0) * h);
    [[a, b], [a, -b]]
}

/// Phase of T^k on basis bit `bit`.
fn tpow_phase(k: i64, bit: bool) -> C64 {
    let s = if bit { 1.0 } else { -1.0 };
    cis(s * k as f64 * PI / 8.0)
}

/// Phase of exp(−iθ Z^{⊗d}/2) on a basis state of the given parity.
fn zzz_phase(theta: f64, odd: bool) -> C64 {
    if odd {
        cis(theta / 2.0)
    } else {
        cis(-theta / 2.0)
    }
}

/// A register of named qubits holding an operator from `2^cols` input basis
/// states to `2^len` register states.
#[derive(Clone, Debug)]
struct Register<K> {
    qubits: Vec<K>,
    cols: usize,
    data: Vec<C64>,
}

impl<K: PartialEq + Clone + std::fmt::Debug> Register<K> {
    fn identity(qubits: Vec<K>) -> Result<Register<K>, SimError> {
        let n = qubits.len();
        if 2 * n > MAX_SIM_BITS {
            return Err(SimError::TooLarge(2 * n));
        }
        let dim = 1usize << n;
        let mut data = vec![c(0.0, 0.0); dim * dim];
        for i in 0..dim {
            data[i * dim + i] = c(1.0, 0.0);
        }
        Ok(Register {
            qubits,
            cols: dim,
            data,
        })
    }

    fn rows(&self) -> usize {
        1 << self.qubits.len()
    }

    fn mask(&self, q: &K) -> Result<usize, SimError> {
        let p = self
            .qubits
            .iter()
            .position(|x| x == q)
            .ok_or_else(|| SimError::UnknownQubit(format!("{q:?}")))?;
        Ok(1 << (self.qubits.len() - 1 - p))
    }

    /// Appends a qubit in |+⟩ as the least significant bit.
    fn prepare(&mut self, q: K) -> Result<(), SimError> {
        let bits = self.qubits.len() + 1 + self.cols.trailing_zeros() as usize;
        if bits > MAX_SIM_BITS {
            return Err(SimError::TooLarge(bits));
        }
        let (rows, cols) = (self.rows(), self.cols);
        let mut data = vec![c(0.0, 0.0); 2 * rows * cols];
        for r in 0..rows {
            for col in 0..cols {
                let v = self.data[r * cols + col] * FRAC_1_SQRT_2;
                data[(2 * r) * cols + col] = v;
                data[(2 * r + 1) * cols + col] = v;
            }
        }
        self.qubits.push(q);
        self.data = data;
        Ok(())
    }

    fn apply_1q(&mut self, q: &K, m: [[C64; 2]; 2]) -> Result<(), SimError> {
        let mask = self.mask(q)?;
        let cols = self.cols;
        for r in 0..self.rows() {
            if r & mask != 0 {
                continue;
            }
            let r1 = r | mask;
            for col in 0..cols {
                let a = self.data[r * cols + col];
                let b = self.data[r1 * cols + col];
                self.data[r * cols + col] = m[0][0] * a + m[0][1] * b;
                self.data[r1 * cols + col] = m[1][0] * a + m[1][1] * b;
            }
        }
        Ok(())
    }

    /// Multiplies each row by `phase(bits of qs)`.
    fn apply_diag(&mut self, qs: &[&K], phase: impl Fn(&[bool]) -> C64) -> Result<(), SimError> {
        let masks: Vec<usize> = qs.iter().map(|q| self.mask(q)).collect::<Result<_, _>>()?;
        let cols = self.cols;
        let mut bits = vec![false; masks.len()];
        for r in 0..self.rows() {
            for (b, m) in bits.iter_mut().zip(&masks) {
                *b = r & m != 0;
            }
            let p = phase(&bits);
            for x in &mut self.data[r * cols..(r + 1) * cols] {
                *x *= p;
            }
        }
        Ok(())
    }

    /// Contracts qubit `q` with the bra ⟨φ| where φ = (φ0, φ1), removing it.
    fn project(&mut self, q: &K, phi: [C64; 2]) -> Result<(), SimError> {
        let mask = self.mask(q)?;
        let p = self
            .qubits
            .iter()
            .position(|x| x == q)
            .expect("mask found it");
        let cols = self.cols;
        let rows = self.rows();
        let low = mask - 1;
        let mut data = vec![c(0.0, 0.0); rows / 2 * cols];
        for r in 0..rows / 2 {
            let r0 = ((r & !low) << 1) | (r & low);
            let r1 = r0 | mask;
            for col in 0..cols {
                data[r * cols + col] = phi[0].conj() * self.data[r0 * cols + col]
                    + phi[1].conj() * self.data[r1 * cols + col];
            }
        }
        self.qubits.remove(p);
        self.data = data;
        Ok(())
    }

    /// The operator with rows permuted into the register order `order`.
    fn operator_in_order(&self, order: &[K]) -> Result<DenseOperator, SimError> {
        let n = self.qubits.len();
        let src: Vec<usize> = order
            .iter()
            .map(|q| self.mask(q))
            .collect::<Result<_, _>>()?;
        if order.len() != n {
            return Err(SimError::BadExpression("output register mismatch".into()));
        }
        let cols = self.cols;
        let mut out = DenseOperator::zeros(self.rows(), cols);
        for r in 0..self.rows() {
            let mut s = 0;
            for (i, m) in src.iter().enumerate() {
                if r & (1 << (n - 1 - i)) != 0 {
                    s |= m;
                }
            }
            out.data[r * cols..(r + 1) * cols]
                .copy_from_slice(&self.data[s * cols..(s + 1) * cols]);
        }
        Ok(out)
    }
}

/// Applies a gate-list operation shared by circuits and expressions.
fn pauli_x() -> [[C64; 2]; 2] {
    [[c(0.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]]
}

/// The operator of a circuit from its inputs (declared order) to all of its
/// wires (inputs, then fresh qubits).
pub fn gates_unitary(circ: &Circuit) -> Result<DenseOperator, SimError> {
    let mut reg = Register::identity(circ.inputs.clone())?;
    for g in &circ.gates {
        match g {
            Gate::H(q) => reg.apply_1q(q, hadamard())?,
            Gate::J(t, q) => reg.apply_1q(q, j_matrix(*t))?,
            Gate::T(q) => reg.apply_diag(&[q], |b| tpow_phase(1, b[0]))?,
            Gate::Tdg(q) => reg.apply_diag(&[q], |b| tpow_phase(-1, b[0]))?,
            Gate::CZ(a, b) => reg.apply_diag(&[a, b], |x| {
                if x[0] && x[1] {
                    c(-1.0, 0.0)
                } else {
                    c(1.0, 0.0)
                }
            })?,
            Gate::ZZ(a, b) => reg.apply_diag(&[a, b], |x| zzz_phase(PI / 2.0, x[0] ^ x[1]))?,
            Gate::KetPlus(q) => reg.prepare(q.clone())?,
        }
    }
    reg.operator_in_order(&circ.wires())
}

/// The operator of a stable-index expression from its free inputs to its
/// free outputs (in list order), evaluating terms in pattern order.
pub fn circuit_unitary(e: &StableIndexExpr) -> Result<DenseOperator, SimError> {
    let order = e
        .to_pattern_order()
        .map_err(|x| SimError::BadExpression(x.to_string()))?;
    let mut reg: Register<IndexId> = Register::identity(e.free_in.clone())?;
    let minus_i_half_pi = [c(FRAC_1_SQRT_2, 0.0), c(0.0, FRAC_1_SQRT_2)];
    for i in order {
        let t = &e.terms[i];
        let bad = || SimError::BadExpression(format!("term {t}"));
        match t.gate {
            TermGate::H | TermGate::J(_) => {
                let d = t.deprecated[0].as_ref().ok_or_else(bad)?;
                let a = t.advanced[0].as_ref().ok_or_else(bad)?;
                let m = match t.gate {
                    TermGate::J(th) => j_matrix(th),
                    _ => hadamard(),
                };
                reg.apply_1q(d, m)?;
                let p = reg.qubits.iter().position(|x| x == d).ok_or_else(bad)?;
                reg.qubits[p] = a.clone();
            }
            TermGate::Tpow(k) => {
                let s: Vec<&IndexId> = t.stable.iter().collect();
                reg.apply_diag(&s, |b| tpow_phase(k as i64, b[0]))?;
            }
            TermGate::CZ => {
                let s: Vec<&IndexId> = t.stable.iter().collect();
                reg.apply_diag(&s, |x| {
                    if x[0] && x[1] {
                        c(-1.0, 0.0)
                    } else {
                        c(1.0, 0.0)
                    }
                })?;
            }
            TermGate::ZZ => {
                let s: Vec<&IndexId> = t.stable.iter().collect();
                reg.apply_diag(&s, |x| zzz_phase(PI / 2.0, x[0] ^ x[1]))?;
            }
            TermGate::Zzz { angle, .. } => {
                let s: Vec<&IndexId> = t.stable.iter().collect();
                let th = angle.radians();
                reg.apply_diag(&s, |x| {
                    zzz_phase(th, x.iter().filter(|b| **b).count() % 2 == 1)
                })?;
            }
            TermGate::KetPlus => reg.prepare(t.advanced[0].clone().ok_or_else(bad)?)?,
            TermGate::ProjPlusHalfPi => {
                // ⟨+_{π/2}| = (⟨0| − i⟨1|)/√2, i.e. the bra of (|0⟩ + i|1⟩)/√2.
                reg.project(t.deprecated[0].as_ref().ok_or_else(bad)?, minus_i_half_pi)?;
            }
        }
    }
    reg.operator_in_order(&e.free_out)
}

/// One measurement branch: the recorded outcomes (after shifts) and the
/// resulting operator from the sorted inputs to the sorted outputs.
#[derive(Clone, Debug)]
pub struct Branch {
    pub outcomes: BTreeMap<QubitId, bool>,
    pub operator: DenseOperator,
}

/// The Kraus decomposition of a pattern, one operator per outcome branch.
#[derive(Clone, Debug)]
pub struct BranchMap {
    pub inputs: Vec<QubitId>,
    pub outputs: Vec<QubitId>,
    pub branches: Vec<Branch>,
}

/// The measured state for outcome `o` in `plane` at effective angle `alpha`.
pub fn measurement_state(plane: Plane, alpha: f64, outcome: bool) -> [C64; 2] {
    let s = if outcome { -1.0 } else { 1.0 };
    match plane {
        Plane::XY => [c(FRAC_1_SQRT_2, 0.0), cis(alpha) * (s * FRAC_1_SQRT_2)],
        Plane::YZ => {
            let z = cis(-alpha) * s;
            [(c(1.0, 0.0) + z) * 0.5, (c(1.0, 0.0) - z) * 0.5]
        }
    }
}

struct PatternRun<'a> {
    cmds: &'a [Command],
    /// Index of the first command touching each prepared qubit.
    first_use: HashMap<usize, Vec<QubitId>>,
    prepared_late: Vec<QubitId>,
    outputs: Vec<QubitId>,
    max_branches: usize,
    branches: Vec<Branch>,
    choose: Option<&'a dyn Fn(&QubitId) -> bool>,
}

impl PatternRun<'_> {
    fn step(
        &mut self,
        mut k: usize,
        mut reg: Register<QubitId>,
        mut out: BTreeMap<QubitId, bool>,
    ) -> Result<(), SimError> {
        while k < self.cmds.len() {
            if let Some(qs) = self.first_use.get(&k) {
                for q in qs {
                    reg.prepare(q.clone())?;
                }
            }
            let eval = |out: &BTreeMap<QubitId, bool>, s: &crate::pattern::SignalExpr| {
                s.eval(&|q: &QubitId| out.get(q).copied().unwrap_or(false))
            };
            match &self.cmds[k] {
                Command::Prepare(_) => {}
                Command::Entangle(a, b) => reg.apply_diag(&[a, b], |x| {
                    if x[0] && x[1] {
                        c(-1.0, 0.0)
                    } else {
                        c(1.0, 0.0)
                    }
                })?,
                Command::CorrectX(q, s) => {
                    if eval(&out, s) {
                        reg.apply_1q(q, pauli_x())?;
                    }
                }
                Command::CorrectZ(q, s) => {
                    if eval(&out, s) {
                        reg.apply_diag(&[q], |b| if b[0] { c(-1.0, 0.0) } else { c(1.0, 0.0) })?;
                    }
                }
                Command::Shift(q, s) => {
                    if eval(&out, s) {
                        *out.get_mut(q)
                            .ok_or_else(|| SimError::UnknownQubit(q.to_string()))? ^= true;
                    }
                }
                Command::Measure {
                    qubit,
                    plane,
                    angle,
                    sign,
                } => {
                    let alpha = if eval(&out, sign) {
                        -angle.radians()
                    } else {
                        angle.radians()
                    };
                    let fixed = self.choose.map(|f| f(qubit));
                    let outcomes: Vec<bool> = match fixed {
                        Some(o) => vec![o],
                        None => vec![false, true],
                    };
                    for (n, o) in outcomes.iter().enumerate() {
                        let mut r = if n + 1 == outcomes.len() {
                            std::mem::replace(
                                &mut reg,
                                Register {
                                    qubits: vec![],
                                    cols: 0,
                                    data: vec![],
                                },
                            )
                        } else {
                            reg.clone()
                        };
                        r.project(qubit, measurement_state(*plane, alpha, *o))?;
                        let mut out2 = out.clone();
                        out2.insert(qubit.clone(), *o);
                        if n + 1 == outcomes.len() {
                            reg = r;
                            out = out2;
                        } else {
                            self.step(k + 1, r, out2)?;
                        }
                    }
                }
            }
            k += 1;
        }
        for q in &self.prepared_late {
            if !reg.qubits.contains(q) {
                reg.prepare(q.clone())?;
            }
        }
        if self.branches.len() >= self.max_branches {
            return Err(SimError::TooManyBranches(self.max_branches));
        }
        let operator = reg.operator_in_order(&self.outputs)?;
        self.branches.push(Branch {
            outcomes: out,
            operator,
        });
        Ok(())
    }
}

fn run(
    p: &Pattern,
    max_branches: usize,
    choose: Option<&dyn Fn(&QubitId) -> bool>,
) -> Result<BranchMap, SimError> {
    let report = validate_pattern(p);
    if let Some(v) = report.violations.first() {
        return Err(SimError::IllFormed(v.to_string()));
    }
    // Preparations are deferred to the first command touching the qubit,
    // which keeps the live register small for patterns written column by
    // column.
    let mut first_use: HashMap<usize, Vec<QubitId>> = HashMap::new();
    let mut pending: Vec<QubitId> = Vec::new();
    for c in &p.commands {
        if let Command::Prepare(q) = c {
            pending.push(q.clone());
        }
    }
    let mut unplaced: std::collections::BTreeSet<QubitId> = pending.iter().cloned().collect();
    for (k, c) in p.commands.iter().enumerate() {
        if matches!(c, Command::Prepare(_) | Command::Shift(..)) {
            continue;
        }
        for q in c.targets() {
            if unplaced.remove(q) {
                first_use.entry(k).or_default().push(q.clone());
            }
        }
    }
    let inputs: Vec<QubitId> = p.inputs.iter().cloned().collect();
    let outputs: Vec<QubitId> = p.outputs().into_iter().collect();
    let mut runner = PatternRun {
        cmds: &p.commands,
        first_use,
        prepared_late: unplaced.into_iter().collect(),
        outputs: outputs.clone(),
        max_branches,
        branches: Vec::new(),
        choose,
    };
    runner.step(0, Register::identity(inputs.clone())?, BTreeMap::new())?;
    Ok(BranchMap {
        inputs,
        outputs,
        branches: runner.branches,
    })
}

/// Enumerates every measurement branch of a well-formed pattern.
pub fn run_pattern(p: &Pattern) -> Result<BranchMap, SimError> {
    run(p, 1 << 16, None)
}

/// Follows the single branch where each measurement yields `outcome(q)`.
pub fn run_pattern_branch(
    p: &Pattern,
    outcome: &dyn Fn(&QubitId) -> bool,
) -> Result<Branch, SimError> {
    let mut bm = run(p, 1, Some(outcome))?;
    Ok(bm.branches.pop().expect("one branch"))
}

impl BranchMap {
    /// The Choi matrix Σ_b vec(K_b) vec(K_b)† of the channel.
    pub fn choi(&self) -> DenseOperator {
        let Some(first) = self.branches.first() else {
            return DenseOperator::zeros(0, 0);
        };
        let n = first.operator.data.len();
        let mut out = DenseOperator::zeros(n, n);
        for b in &self.branches {
            let v = &b.operator.data;
            for i in 0..n {
                if v[i].norm_sqr() == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += v[i] * v[j].conj();
                }
            }
        }
        out
    }

    /// Whether Σ K† K = I within `tol`.
    pub fn is_trace_preserving(&self, tol: f64) -> bool {
        let Some(first) = self.branches.first() else {
            return false;
        };
        let cols = first.operator.cols;
        let mut sum = DenseOperator::zeros(cols, cols);
        for b in &self.branches {
            let p = b.operator.adjoint().matmul(&b.operator);
            for (s, x) in sum.data.iter_mut().zip(&p.data) {
                *s += x;
            }
        }
        sum.max_abs_diff(&DenseOperator::identity(cols)) <= tol
    }

    /// The isometry implemented deterministically by the pattern, if every
    /// branch is a scalar multiple of one isometry and the branches sum to
    /// a trace-preserving map.
    pub fn as_unitary(&self, tol: f64) -> Option<DenseOperator> {
        let reference = self.branches.iter().max_by(|a, b| {
            a.operator
                .frobenius_sqr()
                .total_cmp(&b.operator.frobenius_sqr())
        })?;
        let norm = reference.operator.frobenius_sqr();
        if norm <= tol {
            return None;
        }
        let cols = reference.operator.cols as f64;
        let u = reference.operator.scale(c((cols / norm).sqrt(), 0.0));
        if !u.is_isometry(tol) || !self.is_trace_preserving(tol) {
            return None;
        }
        for b in &self.branches {
            let w = b.operator.frobenius_sqr();
            if w <= tol * tol {
                continue;
            }
            let lambda = (w / cols).sqrt();
            let k = b.operator.scale(c(1.0 / lambda, 0.0));
            if !equal_up_to_phase(&k, &u, tol) {
                return None;
            }
        }
        Some(u)
    }
}

/// Whether two patterns on the same inputs and outputs implement the same
/// channel (Choi matrices within `tol`).
pub fn same_channel(a: &BranchMap, b: &BranchMap, tol: f64) -> bool {
    a.inputs == b.inputs && a.outputs == b.outputs && a.choi().max_abs_diff(&b.choi()) <= tol
}
