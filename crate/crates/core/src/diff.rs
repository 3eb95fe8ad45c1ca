//! Reverse-mode automatic differentiation over a recorded scalar expression
//! graph, plus the flat parameter vector used by the optimizers and a
//! finite-difference gradient verifier.
//!
//! Losses here map a few hundred parameters to one scalar over thousands of
//! grid points, so reverse accumulation is the only sensible mode. Operations
//! record local partials at forward time; [`Tape::backward`] is a single
//! reverse sweep with no per-op dispatch. Values ride along inside [`Var`],
//! so the forward pass never reads the tape back.

use std::cell::RefCell;
use std::ops::{Add, Mul, Neg, Range, Sub};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Recording tape. One tape per loss evaluation; not shared across threads.
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

#[derive(Clone, Copy)]
struct Node {
    parents: [u32; 2],
    partials: [f64; 2],
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            nodes: RefCell::new(Vec::new()),
        }
    }

    pub fn with_capacity(nodes: usize) -> Self {
        Tape {
            nodes: RefCell::new(Vec::with_capacity(nodes)),
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.borrow().len()
    }

    /// Creates an independent (leaf) variable.
    pub fn var(&self, value: f64) -> Var<'_> {
        let index = self.push_leaf();
        Var {
            tape: self,
            index,
            value,
        }
    }

    /// Creates one leaf per entry, in order.
    pub fn vars(&self, values: &[f64]) -> Vec<Var<'_>> {
        values.iter().map(|&v| self.var(v)).collect()
    }

    /// A constant participates in the graph but its adjoint is discarded.
    pub fn constant(&self, value: f64) -> Var<'_> {
        self.var(value)
    }

    fn push_leaf(&self) -> u32 {
        let mut nodes = self.nodes.borrow_mut();
        let index = nodes.len() as u32;
        nodes.push(Node {
            parents: [index, index],
            partials: [0.0, 0.0],
        });
        index
    }

    fn push(&self, parents: [u32; 2], partials: [f64; 2]) -> u32 {
        let mut nodes = self.nodes.borrow_mut();
        let index = nodes.len() as u32;
        nodes.push(Node { parents, partials });
        index
    }

    /// Adjoints of every node up to `output`, seeded with ∂output/∂output = 1.
    pub fn backward(&self, output: Var<'_>) -> Vec<f64> {
        let nodes = self.nodes.borrow();
        let top = output.index as usize;
        let mut adjoint = vec![0.0; top + 1];
        adjoint[top] = 1.0;
        for i in (0..=top).rev() {
            let a = adjoint[i];
            if a == 0.0 {
                continue;
            }
            let node = nodes[i];
            adjoint[node.parents[0] as usize] += node.partials[0] * a;
            adjoint[node.parents[1] as usize] += node.partials[1] * a;
        }
        adjoint
    }
}

/// A scalar recorded on a [`Tape`]. Cheap to copy; arithmetic records nodes.
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    index: u32,
    value: f64,
}

impl<'t> Var<'t> {
    pub fn value(self) -> f64 {
        self.value
    }

    fn unary(self, value: f64, partial: f64) -> Var<'t> {
        let index = self.tape.push([self.index, self.index], [partial, 0.0]);
        Var {
            tape: self.tape,
            index,
            value,
        }
    }

    fn binary(self, other: Var<'t>, value: f64, da: f64, db: f64) -> Var<'t> {
        debug_assert!(
            std::ptr::eq(self.tape, other.tape),
            "variables from different tapes"
        );
        let index = self.tape.push([self.index, other.index], [da, db]);
        Var {
            tape: self.tape,
            index,
            value,
        }
    }

    pub fn exp(self) -> Var<'t> {
        let e = self.value.exp();
        self.unary(e, e)
    }
}

impl<'t> Add for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: Var<'t>) -> Var<'t> {
        self.binary(rhs, self.value + rhs.value, 1.0, 1.0)
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: Var<'t>) -> Var<'t> {
        self.binary(rhs, self.value - rhs.value, 1.0, -1.0)
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: Var<'t>) -> Var<'t> {
        self.binary(rhs, self.value * rhs.value, rhs.value, self.value)
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Var<'t> {
        self.unary(-self.value, -1.0)
    }
}

impl<'t> Add<f64> for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: f64) -> Var<'t> {
        self.unary(self.value + rhs, 1.0)
    }
}

impl<'t> Sub<f64> for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: f64) -> Var<'t> {
        self.unary(self.value - rhs, 1.0)
    }
}

impl<'t> Mul<f64> for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: f64) -> Var<'t> {
        self.unary(self.value * rhs, rhs)
    }
}

impl<'t> Scalar for Var<'t> {
    fn value(self) -> f64 {
        self.value
    }

    fn sq(self) -> Var<'t> {
        self.unary(self.value * self.value, 2.0 * self.value)
    }

    fn sigmoid(self) -> Var<'t> {
        let s = 1.0 / (1.0 + (-self.value).exp());
        self.unary(s, s * (1.0 - s))
    }

    fn sigmoid_prime(self) -> Var<'t> {
        // Input is s = σ(z); value s(1−s), derivative w.r.t. s is 1−2s.
        let s = self.value;
        self.unary(s * (1.0 - s), 1.0 - 2.0 * s)
    }
}

/// One named block of a flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockSpec {
    pub name: String,
    pub shape: Vec<usize>,
}

impl BlockSpec {
    pub fn new(name: impl Into<String>, shape: &[usize]) -> Self {
        BlockSpec {
            name: name.into(),
            shape: shape.to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Maps slices of a flat parameter vector to named blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    blocks: Vec<BlockSpec>,
}

impl Layout {
    pub fn new(blocks: Vec<BlockSpec>) -> Self {
        Layout { blocks }
    }

    pub fn blocks(&self) -> &[BlockSpec] {
        &self.blocks
    }

    pub fn total_len(&self) -> usize {
        self.blocks.iter().map(BlockSpec::len).sum()
    }

    pub fn range_of(&self, name: &str) -> Option<Range<usize>> {
        let mut offset = 0;
        for block in &self.blocks {
            let len = block.len();
            if block.name == name {
                return Some(offset..offset + len);
            }
            offset += len;
        }
        None
    }

    /// Name of the block containing flat index `i`.
    pub fn block_of(&self, i: usize) -> Option<&str> {
        let mut offset = 0;
        for block in &self.blocks {
            offset += block.len();
            if i < offset {
                return Some(&block.name);
            }
        }
        None
    }
}

/// All trainable scalars of a model as one flat vector plus its layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    pub values: Vec<f64>,
    pub layout: Layout,
}

impl ParamVector {
    pub fn new(values: Vec<f64>, layout: Layout) -> Result<Self> {
        if values.len() != layout.total_len() {
            return Err(Error::Input(format!(
                "parameter vector has {} values but layout describes {}",
                values.len(),
                layout.total_len()
            )));
        }
        Ok(ParamVector { values, layout })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn slice(&self, name: &str) -> Option<&[f64]> {
        self.layout.range_of(name).map(|r| &self.values[r])
    }

    /// Splits into named blocks; inverse of [`ParamVector::pack`].
    pub fn unpack(&self) -> Vec<(BlockSpec, Vec<f64>)> {
        let mut out = Vec::with_capacity(self.layout.blocks.len());
        let mut offset = 0;
        for block in &self.layout.blocks {
            let len = block.len();
            out.push((block.clone(), self.values[offset..offset + len].to_vec()));
            offset += len;
        }
        out
    }

    pub fn pack(blocks: Vec<(BlockSpec, Vec<f64>)>) -> Result<Self> {
        let mut specs = Vec::with_capacity(blocks.len());
        let mut values = Vec::new();
        for (spec, data) in blocks {
            if spec.len() != data.len() {
                return Err(Error::Input(format!(
                    "block `{}` declares {} entries but carries {}",
                    spec.name,
                    spec.len(),
                    data.len()
                )));
            }
            specs.push(spec);
            values.extend_from_slice(&data);
        }
        ParamVector::new(values, Layout::new(specs))
    }
}

/// Loss value and its gradient with respect to every parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct GradResult {
    pub loss: f64,
    pub grad: Vec<f64>,
}

/// A scalar loss that can be recorded on a tape.
///
/// A loss may decompose into independent parts (here: one per initial
/// condition); parts are evaluated independently — possibly in parallel —
/// and reduced in index order, so results are identical for any thread count.
pub trait DiffLoss: Sync {
    fn parts(&self) -> usize {
        1
    }

    /// Records part `part` of the loss on `tape`. `phi` holds one leaf per
    /// parameter, in flat order.
    fn eval_part<'t>(&self, part: usize, tape: &'t Tape, phi: &[Var<'t>]) -> Var<'t>;

    /// Plain-`f64` evaluation of part `part`, used by finite differences.
    ///
    /// The default routes through the tape forward pass; implementations with
    /// a native `f64` path should override it so the verifier stays
    /// independent of the recorded graph.
    fn eval_part_f64(&self, part: usize, values: &[f64]) -> f64 {
        let tape = Tape::new();
        let phi = tape.vars(values);
        self.eval_part(part, &tape, &phi).value()
    }
}

/// Wraps a plain function as a single-part [`DiffLoss`].
pub struct FnLoss<F>(pub F);

impl<F> DiffLoss for FnLoss<F>
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Var<'t> + Sync,
{
    fn eval_part<'t>(&self, _part: usize, tape: &'t Tape, phi: &[Var<'t>]) -> Var<'t> {
        (self.0)(tape, phi)
    }
}

/// Total loss value at `values` (sum of parts in index order).
pub fn loss_value<L: DiffLoss + ?Sized>(loss: &L, values: &[f64]) -> f64 {
    let mut total = 0.0;
    for part in 0..loss.parts() {
        total += loss.eval_part_f64(part, values);
    }
    total
}

/// Loss and exact gradient of `loss` at `at`.
///
/// Parts are differentiated on independent tapes and reduced in part order;
/// two calls with identical inputs produce bitwise-identical results.
pub fn grad_of<L: DiffLoss + ?Sized>(loss: &L, at: &ParamVector) -> Result<GradResult> {
    let n = at.values.len();
    let parts: Vec<(f64, Vec<f64>)> = (0..loss.parts())
        .into_par_iter()
        .map(|part| {
            let tape = Tape::new();
            let phi = tape.vars(&at.values);
            let out = loss.eval_part(part, &tape, &phi);
            let mut adjoint = tape.backward(out);
            adjoint.truncate(n);
            (out.value(), adjoint)
        })
        .collect();

    let mut total = 0.0;
    let mut grad = vec![0.0; n];
    for (value, part_grad) in &parts {
        total += value;
        for (g, pg) in grad.iter_mut().zip(part_grad) {
            *g += pg;
        }
    }

    if !total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        let context = grad
            .iter()
            .position(|g| !g.is_finite())
            .and_then(|i| at.layout.block_of(i).map(str::to_owned))
            .map(|name| format!("parameter block `{name}`"))
            .unwrap_or_else(|| "loss value".to_owned());
        return Err(Error::Numerical { context });
    }

    Ok(GradResult { loss: total, grad })
}

/// Outcome of a gradient check: the worst componentwise disagreement between
/// the recorded gradient and central finite differences.
#[derive(Debug, Clone)]
pub struct GradCheck {
    pub worst_rel_err: f64,
    pub worst_index: usize,
    pub worst_block: String,
    pub pass: bool,
}

/// Compares [`grad_of`] against central differences componentwise.
///
/// The step for parameter i is `step · max(1, |Φᵢ|)`; relative error is
/// `|a − b| / max(1e−8, |a| + |b|)`.
pub fn check_grad<L: DiffLoss + ?Sized>(
    loss: &L,
    at: &ParamVector,
    step: f64,
    tol: f64,
) -> Result<GradCheck> {
    if step <= 0.0 || tol <= 0.0 {
        return Err(Error::Input(format!(
            "check_grad requires positive step and tolerance (got {step}, {tol})"
        )));
    }
    let analytic = grad_of(loss, at)?;
    let mut values = at.values.clone();
    let mut worst = GradCheck {
        worst_rel_err: 0.0,
        worst_index: 0,
        worst_block: String::new(),
        pass: true,
    };
    for i in 0..values.len() {
        let original = values[i];
        let h = step * original.abs().max(1.0);
        values[i] = original + h;
        let plus = loss_value(loss, &values);
        values[i] = original - h;
        let minus = loss_value(loss, &values);
        values[i] = original;
        let fd = (plus - minus) / (2.0 * h);
        let a = analytic.grad[i];
        let rel = (a - fd).abs() / (a.abs() + fd.abs()).max(1e-8);
        if rel > worst.worst_rel_err {
            worst.worst_rel_err = rel;
            worst.worst_index = i;
            worst.worst_block = at.layout.block_of(i).unwrap_or("").to_owned();
        }
    }
    worst.pass = worst.worst_rel_err <= tol;
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic<'t>(_tape: &'t Tape, phi: &[Var<'t>]) -> Var<'t> {
        let mut acc = phi[0].sq();
        for p in &phi[1..] {
            acc = acc + p.sq();
        }
        acc
    }

    fn constant_seven<'t>(tape: &'t Tape, _phi: &[Var<'t>]) -> Var<'t> {
        tape.constant(7.0)
    }

    fn two_block_layout() -> Layout {
        Layout::new(vec![
            BlockSpec::new("first", &[1]),
            BlockSpec::new("second", &[1]),
        ])
    }

    #[test]
    fn quadratic_loss_and_grad() {
        let at = ParamVector::new(vec![1.0, 2.0], two_block_layout()).unwrap();
        let result = grad_of(&FnLoss(quadratic), &at).unwrap();
        assert_eq!(result.loss, 5.0);
        assert_eq!(result.grad, vec![2.0, 4.0]);
    }

    #[test]
    fn constant_loss_has_zero_grad() {
        let at = ParamVector::new(vec![1.0, 2.0], two_block_layout()).unwrap();
        let result = grad_of(&FnLoss(constant_seven), &at).unwrap();
        assert_eq!(result.loss, 7.0);
        assert_eq!(result.grad, vec![0.0, 0.0]);
    }

    #[test]
    fn quadratic_check_grad_is_tight() {
        let at = ParamVector::new(vec![0.3, -1.7], two_block_layout()).unwrap();
        let report = check_grad(&FnLoss(quadratic), &at, 1e-6, 1e-10).unwrap();
        assert!(report.pass, "worst rel err {}", report.worst_rel_err);
    }

    #[test]
    fn grad_is_deterministic_bitwise() {
        fn wiggly<'t>(_t: &'t Tape, phi: &[Var<'t>]) -> Var<'t> {
            let a = phi[0].sigmoid() * phi[1];
            let b = (phi[0] * 0.25).exp();
            a * b + (phi[1] - 0.5).sq()
        }
        let at = ParamVector::new(vec![0.37, -0.91], two_block_layout()).unwrap();
        let r1 = grad_of(&FnLoss(wiggly), &at).unwrap();
        let r2 = grad_of(&FnLoss(wiggly), &at).unwrap();
        assert_eq!(r1.loss.to_bits(), r2.loss.to_bits());
        for (a, b) in r1.grad.iter().zip(&r2.grad) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn grad_linearity() {
        fn l1<'t>(_t: &'t Tape, phi: &[Var<'t>]) -> Var<'t> {
            phi[0].sigmoid() * phi[1]
        }
        fn l2<'t>(_t: &'t Tape, phi: &[Var<'t>]) -> Var<'t> {
            (phi[0] * phi[1]).sq()
        }
        fn combined<'t>(t: &'t Tape, phi: &[Var<'t>]) -> Var<'t> {
            l1(t, phi) * 2.5 + l2(t, phi) * (-0.75)
        }
        let at = ParamVector::new(vec![0.8, -0.4], two_block_layout()).unwrap();
        let g1 = grad_of(&FnLoss(l1), &at).unwrap();
        let g2 = grad_of(&FnLoss(l2), &at).unwrap();
        let gc = grad_of(&FnLoss(combined), &at).unwrap();
        for i in 0..2 {
            let expect = 2.5 * g1.grad[i] - 0.75 * g2.grad[i];
            assert!((gc.grad[i] - expect).abs() <= 1e-12);
        }
    }

    #[test]
    fn nonfinite_loss_names_offending_block() {
        fn explode<'t>(_t: &'t Tape, phi: &[Var<'t>]) -> Var<'t> {
            phi[1].exp().exp().exp()
        }
        let at = ParamVector::new(vec![0.0, 800.0], two_block_layout()).unwrap();
        let err = grad_of(&FnLoss(explode), &at).unwrap_err();
        match err {
            Error::Numerical { context } => assert!(context.contains("second"), "{context}"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn corrupted_gradient_entry_is_reported_at_its_index() {
        // Tape records an extra phi[1]*0.5 term that the f64 route omits, so
        // the finite-difference oracle disagrees exactly at index 1.
        struct Corrupted;
        impl DiffLoss for Corrupted {
            fn eval_part<'t>(&self, _p: usize, _tape: &'t Tape, phi: &[Var<'t>]) -> Var<'t> {
                phi[0].sq() + phi[1].sq() + phi[1] * 0.5
            }
            fn eval_part_f64(&self, _p: usize, values: &[f64]) -> f64 {
                values[0] * values[0] + values[1] * values[1]
            }
        }
        let at = ParamVector::new(vec![0.2, 0.4], two_block_layout()).unwrap();
        let report = check_grad(&Corrupted, &at, 1e-6, 1e-6).unwrap();
        assert!(!report.pass);
        assert_eq!(report.worst_index, 1);
        assert_eq!(report.worst_block, "second");
    }

    #[test]
    fn check_grad_rejects_nonpositive_step() {
        let at = ParamVector::new(vec![1.0, 1.0], two_block_layout()).unwrap();
        assert!(check_grad(&FnLoss(quadratic), &at, 0.0, 1e-6).is_err());
    }

    #[test]
    fn pack_unpack_round_trip() {
        let layout = Layout::new(vec![
            BlockSpec::new("a", &[2, 3]),
            BlockSpec::new("b", &[4]),
        ]);
        let values: Vec<f64> = (0..10).map(|i| i as f64 * 0.5 - 2.0).collect();
        let pv = ParamVector::new(values, layout).unwrap();
        let repacked = ParamVector::pack(pv.unpack()).unwrap();
        assert_eq!(pv, repacked);
    }

    #[test]
    fn layout_length_mismatch_is_rejected() {
        let layout = Layout::new(vec![BlockSpec::new("a", &[3])]);
        assert!(ParamVector::new(vec![1.0, 2.0], layout).is_err());
    }

    #[test]
    fn block_of_resolves_flat_indices() {
        let layout = Layout::new(vec![
            BlockSpec::new("a", &[2]),
            BlockSpec::new("b", &[3]),
        ]);
        assert_eq!(layout.block_of(0), Some("a"));
        assert_eq!(layout.block_of(1), Some("a"));
        assert_eq!(layout.block_of(2), Some("b"));
        assert_eq!(layout.block_of(4), Some("b"));
        assert_eq!(layout.block_of(5), None);
    }
}
