//! Reverse mode via an explicit tape.
//!
//! Recording instantiates a function with [`Var`] scalars; every elementary
//! operation involving at least one active variable appends one node holding
//! its opcode, operand references and the local partial derivatives
//! evaluated at the recording point. The backward sweep is then pure
//! multiply-accumulate over the stored partials. Operations between two
//! constants fold and never reach the tape.
//!
//! Tapes are immutable after [`record`] and can be shared across threads;
//! each sweep works in its own [`AdjointBuffer`]. Branch-dependent
//! operations (`max_val`, `abs`, comparisons through `value()`) freeze the
//! branch taken at the recording point.

use crate::error::{AdError, AdResult};
use crate::func::VectorFn;
use crate::scalar::Scalar;
use std::cell::RefCell;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Operand slot: node index, constant-pool index (high bit set) or absent.
const NONE: u32 = u32::MAX;
const CONST_BIT: u32 = 1 << 31;

#[inline]
fn is_node(op: u32) -> bool {
    op & CONST_BIT == 0
}

/// One opcode per elementary operation in the supported vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Opcode {
    Input = 0,
    Add = 1,
    Sub = 2,
    Mul = 3,
    Div = 4,
    Neg = 5,
    Exp = 6,
    Ln = 7,
    Sqrt = 8,
    Sin = 9,
    Cos = 10,
    Abs = 11,
    Max = 12,
}

impl Opcode {
    fn from_u8(b: u8) -> Option<Opcode> {
        use Opcode::*;
        Some(match b {
            0 => Input,
            1 => Add,
            2 => Sub,
            3 => Mul,
            4 => Div,
            5 => Neg,
            6 => Exp,
            7 => Ln,
            8 => Sqrt,
            9 => Sin,
            10 => Cos,
            11 => Abs,
            12 => Max,
            _ => return None,
        })
    }
}

#[derive(Default)]
struct TapeData {
    ops: Vec<u8>,
    lhs: Vec<u32>,
    rhs: Vec<u32>,
    dl: Vec<f64>,
    dr: Vec<f64>,
    consts: Vec<f64>,
}

impl TapeData {
    #[inline]
    fn push(&mut self, op: Opcode, lhs: u32, rhs: u32, dl: f64, dr: f64) -> u32 {
        let idx = self.ops.len();
        assert!(idx < CONST_BIT as usize, "tape node limit exceeded");
        self.ops.push(op as u8);
        self.lhs.push(lhs);
        self.rhs.push(rhs);
        self.dl.push(dl);
        self.dr.push(dr);
        idx as u32
    }

    #[inline]
    fn push_const(&mut self, v: f64) -> u32 {
        let idx = self.consts.len();
        assert!(idx < (CONST_BIT - 1) as usize, "tape constant limit exceeded");
        self.consts.push(v);
        idx as u32 | CONST_BIT
    }
}

/// Recording arena. Create one, lift the inputs, run the function, then
/// [`TapeBuilder::finish`]. [`record`] wraps those steps for any [`VectorFn`].
pub struct TapeBuilder {
    data: RefCell<TapeData>,
    n_inputs: std::cell::Cell<usize>,
}

impl TapeBuilder {
    pub fn new() -> Self {
        TapeBuilder {
            data: RefCell::new(TapeData::default()),
            n_inputs: std::cell::Cell::new(0),
        }
    }

    /// Register the next input variable. Inputs occupy the first nodes of
    /// the tape in registration order.
    pub fn input(&self, val: f64) -> Var<'_> {
        let idx = {
            let mut d = self.data.borrow_mut();
            debug_assert_eq!(
                d.ops.len(),
                self.n_inputs.get(),
                "inputs must be registered before any arithmetic"
            );
            d.push(Opcode::Input, NONE, NONE, 0.0, 0.0)
        };
        self.n_inputs.set(self.n_inputs.get() + 1);
        Var {
            val,
            node: Some((self, idx)),
        }
    }

    #[inline]
    fn operand_of(&self, v: Var<'_>) -> u32 {
        match v.node {
            Some((owner, idx)) => {
                debug_assert!(
                    std::ptr::eq(owner, self),
                    "variables from different tapes mixed in one expression"
                );
                idx
            }
            None => self.data.borrow_mut().push_const(v.val),
        }
    }

    /// Freeze the recording into an immutable tape with the given outputs.
    pub fn finish(&self, outputs: &[Var<'_>]) -> Tape {
        let encoded: Vec<u32> = outputs.iter().map(|&v| self.operand_of(v)).collect();
        let output_vals: Vec<f64> = outputs.iter().map(|v| v.val).collect();
        let data = self.data.take();
        Tape {
            n_inputs: self.n_inputs.get(),
            ops: data.ops,
            lhs: data.lhs,
            rhs: data.rhs,
            dl: data.dl,
            dr: data.dr,
            consts: data.consts,
            outputs: encoded,
            output_vals,
        }
    }
}

impl Default for TapeBuilder {
    fn default() -> Self {
        Self::new()
    }
}

/// Active scalar recorded on a tape. Copyable; operations between two
/// constants (no tape reference) fold without recording.
#[derive(Clone, Copy)]
pub struct Var<'t> {
    val: f64,
    node: Option<(&'t TapeBuilder, u32)>,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node {
            Some((_, idx)) => write!(f, "Var({} @ node {})", self.val, idx),
            None => write!(f, "Var({} const)", self.val),
        }
    }
}

impl PartialEq for Var<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.val == other.val
    }
}

#[inline]
fn builder_of<'t>(a: Var<'t>, b: Var<'t>) -> Option<&'t TapeBuilder> {
    match (a.node, b.node) {
        (Some((t, _)), _) => Some(t),
        (_, Some((t, _))) => Some(t),
        (None, None) => None,
    }
}

#[inline]
fn binary<'t>(a: Var<'t>, b: Var<'t>, op: Opcode, val: f64, dl: f64, dr: f64) -> Var<'t> {
    match builder_of(a, b) {
        None => Var { val, node: None },
        Some(t) => {
            let la = t.operand_of(a);
            let rb = t.operand_of(b);
            let idx = t.data.borrow_mut().push(op, la, rb, dl, dr);
            Var {
                val,
                node: Some((t, idx)),
            }
        }
    }
}

#[inline]
fn unary<'t>(a: Var<'t>, op: Opcode, val: f64, dl: f64) -> Var<'t> {
    match a.node {
        None => Var { val, node: None },
        Some((t, ia)) => {
            let idx = t.data.borrow_mut().push(op, ia, NONE, dl, 0.0);
            Var {
                val,
                node: Some((t, idx)),
            }
        }
    }
}

impl<'t> Add for Var<'t> {
    type Output = Self;

    #[inline]
    fn add(self, rhs: Self) -> Self {
        binary(self, rhs, Opcode::Add, self.val + rhs.val, 1.0, 1.0)
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Self;

    #[inline]
    fn sub(self, rhs: Self) -> Self {
        binary(self, rhs, Opcode::Sub, self.val - rhs.val, 1.0, -1.0)
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Self;

    #[inline]
    fn mul(self, rhs: Self) -> Self {
        binary(self, rhs, Opcode::Mul, self.val * rhs.val, rhs.val, self.val)
    }
}

impl<'t> Div for Var<'t> {
    type Output = Self;

    #[inline]
    fn div(self, rhs: Self) -> Self {
        let inv = 1.0 / rhs.val;
        let val = self.val / rhs.val;
        binary(self, rhs, Opcode::Div, val, inv, -val * inv)
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Self;

    #[inline]
    fn neg(self) -> Self {
        unary(self, Opcode::Neg, -self.val, -1.0)
    }
}

impl<'t> Scalar for Var<'t> {
    #[inline]
    fn from_f64(v: f64) -> Self {
        Var { val: v, node: None }
    }

    #[inline]
    fn value(self) -> f64 {
        self.val
    }

    #[inline]
    fn exp(self) -> Self {
        let v = self.val.exp();
        unary(self, Opcode::Exp, v, v)
    }

    #[inline]
    fn ln(self) -> Self {
        unary(self, Opcode::Ln, self.val.ln(), 1.0 / self.val)
    }

    #[inline]
    fn sqrt(self) -> Self {
        let v = self.val.sqrt();
        unary(self, Opcode::Sqrt, v, 0.5 / v)
    }

    #[inline]
    fn sin(self) -> Self {
        unary(self, Opcode::Sin, self.val.sin(), self.val.cos())
    }

    #[inline]
    fn cos(self) -> Self {
        unary(self, Opcode::Cos, self.val.cos(), -self.val.sin())
    }

    #[inline]
    fn abs(self) -> Self {
        let sign = if self.val < 0.0 { -1.0 } else { 1.0 };
        unary(self, Opcode::Abs, self.val.abs(), sign)
    }

    #[inline]
    fn max_val(self, other: Self) -> Self {
        if other.val > self.val {
            binary(self, other, Opcode::Max, other.val, 0.0, 1.0)
        } else {
            binary(self, other, Opcode::Max, self.val, 1.0, 0.0)
        }
    }
}

/// Immutable recorded operation sequence.
///
/// Inputs occupy the first `n_inputs` nodes; every later node stores its
/// opcode, operand slots and local partials evaluated at the recording
/// point, so the backward sweep never re-touches the primal code.
pub struct Tape {
    n_inputs: usize,
    ops: Vec<u8>,
    lhs: Vec<u32>,
    rhs: Vec<u32>,
    dl: Vec<f64>,
    dr: Vec<f64>,
    consts: Vec<f64>,
    outputs: Vec<u32>,
    output_vals: Vec<f64>,
}

impl Tape {
    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn n_outputs(&self) -> usize {
        self.outputs.len()
    }

    /// Total node count, inputs included.
    pub fn node_count(&self) -> usize {
        self.ops.len()
    }

    /// Recorded elementary operations (nodes minus inputs).
    pub fn arithmetic_node_count(&self) -> usize {
        self.ops.len() - self.n_inputs
    }

    /// Output values captured at recording time.
    pub fn output_values(&self) -> &[f64] {
        &self.output_vals
    }

    #[inline]
    fn operand_value(&self, slot: u32, buf: &[f64]) -> f64 {
        if is_node(slot) {
            buf[slot as usize]
        } else {
            self.consts[(slot & !CONST_BIT) as usize]
        }
    }

    /// Re-run the recorded operations on fresh inputs. At the recording
    /// inputs this reproduces the outputs bit for bit; at other inputs the
    /// branches stay frozen as recorded (the stored partials are not
    /// updated; gradients always refer to the recording point).
    pub fn replay(&self, x: &[f64]) -> AdResult<Vec<f64>> {
        if x.len() != self.n_inputs {
            return Err(AdError::DimensionMismatch {
                what: "tape replay inputs",
                expected: self.n_inputs,
                got: x.len(),
            });
        }
        let mut buf = vec![0.0f64; self.ops.len()];
        for i in 0..self.ops.len() {
            let op = Opcode::from_u8(self.ops[i])
                .ok_or(AdError::UnsupportedOp { opcode: self.ops[i] })?;
            let a = if self.lhs[i] != NONE {
                self.operand_value(self.lhs[i], &buf)
            } else {
                0.0
            };
            let b = if self.rhs[i] != NONE {
                self.operand_value(self.rhs[i], &buf)
            } else {
                0.0
            };
            buf[i] = match op {
                Opcode::Input => x[i],
                Opcode::Add => a + b,
                Opcode::Sub => a - b,
                Opcode::Mul => a * b,
                Opcode::Div => a / b,
                Opcode::Neg => -a,
                Opcode::Exp => a.exp(),
                Opcode::Ln => a.ln(),
                Opcode::Sqrt => a.sqrt(),
                Opcode::Sin => a.sin(),
                Opcode::Cos => a.cos(),
                // Frozen branches: follow the recorded selection.
                Opcode::Abs => {
                    if self.dl[i] < 0.0 {
                        -a
                    } else {
                        a
                    }
                }
                Opcode::Max => {
                    if self.dl[i] == 1.0 {
                        a
                    } else {
                        b
                    }
                }
            };
        }
        Ok(self
            .outputs
            .iter()
            .map(|&slot| self.operand_value(slot, &buf))
            .collect())
    }

    /// `out_seed^T * J` in one backward multiply-accumulate sweep.
    pub fn grad_reverse(&self, out_seed: &[f64]) -> AdResult<Vec<f64>> {
        let mut buf = AdjointBuffer::for_tape(self);
        self.grad_reverse_with(out_seed, &mut buf)?;
        Ok(buf.input_adjoints(self).to_vec())
    }

    /// As [`Tape::grad_reverse`], reusing a caller-owned adjoint buffer.
    /// The gradient is left in `buf.input_adjoints(self)`.
    pub fn grad_reverse_with(&self, out_seed: &[f64], buf: &mut AdjointBuffer) -> AdResult<()> {
        if out_seed.len() != self.outputs.len() {
            return Err(AdError::DimensionMismatch {
                what: "reverse output seed",
                expected: self.outputs.len(),
                got: out_seed.len(),
            });
        }
        let n = self.ops.len();
        buf.reset(n);
        let adj = &mut buf.adj;
        for (k, &slot) in self.outputs.iter().enumerate() {
            if is_node(slot) {
                adj[slot as usize] += out_seed[k];
            }
        }
        for i in (self.n_inputs..n).rev() {
            let a = adj[i];
            if a == 0.0 {
                continue;
            }
            let l = self.lhs[i];
            if l != NONE && is_node(l) {
                adj[l as usize] += a * self.dl[i];
            }
            let r = self.rhs[i];
            if r != NONE && is_node(r) {
                adj[r as usize] += a * self.dr[i];
            }
        }
        Ok(())
    }

    /// Test-only corruption hook for the unsupported-opcode path.
    #[doc(hidden)]
    pub fn poison_opcode_for_test(&mut self, node: usize, raw: u8) {
        self.ops[node] = raw;
    }
}

/// Reverse-sweep workspace: one adjoint per tape node, zeroed before each
/// sweep. Separate from the tape so concurrent sweeps never share state.
pub struct AdjointBuffer {
    adj: Vec<f64>,
}

impl AdjointBuffer {
    pub fn for_tape(tape: &Tape) -> Self {
        AdjointBuffer {
            adj: vec![0.0; tape.node_count()],
        }
    }

    fn reset(&mut self, n: usize) {
        self.adj.clear();
        self.adj.resize(n, 0.0);
    }

    /// Adjoints of the input nodes, i.e. the gradient after a sweep.
    pub fn input_adjoints(&self, tape: &Tape) -> &[f64] {
        &self.adj[..tape.n_inputs()]
    }
}

/// Record `f` at `x`, returning the tape and the output values.
pub fn record<F: VectorFn + ?Sized>(f: &F, x: &[f64]) -> AdResult<(Tape, Vec<f64>)> {
    if x.len() != f.n_inputs() {
        return Err(AdError::DimensionMismatch {
            what: "record inputs",
            expected: f.n_inputs(),
            got: x.len(),
        });
    }
    let builder = TapeBuilder::new();
    let inputs: Vec<Var<'_>> = x.iter().map(|&v| builder.input(v)).collect();
    let mut out = Vec::with_capacity(f.n_outputs());
    f.eval(&inputs, &mut out);
    let tape = builder.finish(&out);
    let outputs = tape.output_values().to_vec();
    Ok((tape, outputs))
}

/// Scalar-function gradient: record then one backward sweep with seed 1.
pub fn gradient_reverse<F: VectorFn + ?Sized>(f: &F, x: &[f64]) -> AdResult<Vec<f64>> {
    let (tape, _) = record(f, x)?;
    tape.grad_reverse(&[1.0])
}
