//! Tape-based reverse-mode differentiation over dense `f64` tensors.
//!
//! The tape records a straight-line program. Every node stores its forward
//! value; [`Tape::backward`] sweeps the nodes in reverse and accumulates
//! adjoints. There is no broadcasting: elementwise operands must have identical
//! shapes, and the only scalar-by-tensor operation is [`OpKind::Scale`] by a
//! constant. Bias rows are expanded by multiplying with a constant ones column.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// A dense row-major tensor. Scalars have shape `[]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    /// Checked constructor: shape must match the data length and every value must be finite.
    pub fn new(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::Dimension {
                context: "tensor data length",
                expected,
                found: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("tensor"));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    fn raw(shape: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Tensor { shape, data }
    }

    pub fn scalar(value: f64) -> Self {
        Tensor::raw(Vec::new(), vec![value])
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Tensor::filled(shape, 0.0)
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        let n = shape.iter().product();
        Tensor::raw(shape.to_vec(), vec![value; n])
    }

    /// Column vector of shape `[n, 1]`.
    pub fn column(data: Vec<f64>) -> Self {
        let n = data.len();
        Tensor::raw(vec![n, 1], data)
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Tensor::new(&[rows, cols], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    /// The single value of a one-element tensor.
    pub fn item(&self) -> f64 {
        self.data[0]
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Primitive operations the tape can record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OpKind {
    Add,
    Subtract,
    Multiply,
    MatMul,
    Relu,
    Sigmoid,
    /// `max(x, 0)`; same values as relu, kept separate for loss and clamp terms.
    Hinge,
    Square,
    Sum,
    Scale(f64),
}

impl OpKind {
    fn arity(self) -> usize {
        match self {
            OpKind::Add | OpKind::Subtract | OpKind::Multiply | OpKind::MatMul => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone)]
enum Source {
    Leaf { trainable: bool },
    Op { kind: OpKind, inputs: [NodeId; 2] },
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    source: Source,
}

/// Adjoints produced by [`Tape::backward`], indexed by node.
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient of the output with respect to `id`, if any path reaches it.
    pub fn get(&self, id: NodeId) -> Option<&Tensor> {
        self.grads.get(id.0).and_then(Option::as_ref)
    }

    /// Gradient with respect to `id`, zero-filled when no path reaches it.
    pub fn get_or_zeros(&self, id: NodeId, shape: &[usize]) -> Tensor {
        self.get(id).cloned().unwrap_or_else(|| Tensor::zeros(shape))
    }
}

#[derive(Debug, Clone, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Registers a trainable input.
    pub fn leaf(&mut self, value: Tensor) -> NodeId {
        self.push(value, Source::Leaf { trainable: true })
    }

    /// Registers an input that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.push(value, Source::Leaf { trainable: false })
    }

    fn push(&mut self, value: Tensor, source: Source) -> NodeId {
        self.nodes.push(Node { value, source });
        NodeId(self.nodes.len() - 1)
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    /// Overwrites the value of a leaf. Call [`Tape::replay`] to refresh dependents.
    pub fn set_leaf(&mut self, id: NodeId, value: Tensor) -> Result<()> {
        let node = &mut self.nodes[id.0];
        if !matches!(node.source, Source::Leaf { .. }) {
            return Err(Error::contract("set_leaf on a non-leaf node"));
        }
        if node.value.shape != value.shape {
            return Err(Error::Dimension {
                context: "set_leaf shape",
                expected: node.value.len(),
                found: value.len(),
            });
        }
        node.value = value;
        Ok(())
    }

    /// Records `kind` applied to `inputs` and returns the id of the result.
    pub fn record(&mut self, kind: OpKind, inputs: &[NodeId]) -> Result<NodeId> {
        if inputs.len() != kind.arity() {
            return Err(Error::Dimension {
                context: "operation arity",
                expected: kind.arity(),
                found: inputs.len(),
            });
        }
        if let Some(bad) = inputs.iter().find(|id| id.0 >= self.nodes.len()) {
            return Err(Error::contract(alloc::format!(
                "unknown input node {}",
                bad.0
            )));
        }
        let a = inputs[0];
        let b = inputs.get(1).copied().unwrap_or(a);
        let value = evaluate(kind, &self.nodes[a.0].value, &self.nodes[b.0].value)?;
        Ok(self.push(
            value,
            Source::Op {
                kind,
                inputs: [a, b],
            },
        ))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.record(OpKind::Add, &[a, b])
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.record(OpKind::Subtract, &[a, b])
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.record(OpKind::Multiply, &[a, b])
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.record(OpKind::MatMul, &[a, b])
    }

    pub fn relu(&mut self, a: NodeId) -> Result<NodeId> {
        self.record(OpKind::Relu, &[a])
    }

    pub fn sigmoid(&mut self, a: NodeId) -> Result<NodeId> {
        self.record(OpKind::Sigmoid, &[a])
    }

    pub fn hinge(&mut self, a: NodeId) -> Result<NodeId> {
        self.record(OpKind::Hinge, &[a])
    }

    pub fn square(&mut self, a: NodeId) -> Result<NodeId> {
        self.record(OpKind::Square, &[a])
    }

    pub fn sum(&mut self, a: NodeId) -> Result<NodeId> {
        self.record(OpKind::Sum, &[a])
    }

    pub fn scale(&mut self, a: NodeId, factor: f64) -> Result<NodeId> {
        self.record(OpKind::Scale(factor), &[a])
    }

    /// Recomputes every operation node from the current leaf values.
    pub fn replay(&mut self) -> Result<()> {
        for i in 0..self.nodes.len() {
            if let Source::Op { kind, inputs } = self.nodes[i].source {
                let value = evaluate(
                    kind,
                    &self.nodes[inputs[0].0].value,
                    &self.nodes[inputs[1].0].value,
                )?;
                self.nodes[i].value = value;
            }
        }
        Ok(())
    }

    /// Reverse sweep from a scalar-shaped `output`.
    pub fn backward(&self, output: NodeId) -> Result<Gradients> {
        let out = &self.nodes[output.0].value;
        if !out.is_scalar() {
            return Err(Error::contract("backward requires a scalar output"));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; output.0 + 1];
        grads[output.0] = Some(vec![1.0]);

        for i in (0..=output.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match node.source {
                Source::Leaf { trainable } => {
                    if trainable {
                        grads[i] = Some(g);
                    }
                }
                Source::Op { kind, inputs } => {
                    let a = &self.nodes[inputs[0].0].value;
                    let b = &self.nodes[inputs[1].0].value;
                    propagate(kind, a, b, &node.value, &g, inputs, &mut grads);
                }
            }
        }

        let grads = grads
            .into_iter()
            .enumerate()
            .map(|(i, g)| g.map(|d| Tensor::raw(self.nodes[i].value.shape.clone(), d)))
            .collect();
        Ok(Gradients { grads })
    }
}

fn same_shape(a: &Tensor, b: &Tensor, context: &'static str) -> Result<()> {
    if a.shape != b.shape {
        return Err(Error::Dimension {
            context,
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(())
}

fn map(a: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    Tensor::raw(a.shape.clone(), a.data.iter().map(|&v| f(v)).collect())
}

fn zip(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    Tensor::raw(
        a.shape.clone(),
        a.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)).collect(),
    )
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

fn matmul_dims(a: &Tensor, b: &Tensor) -> Result<(usize, usize, usize)> {
    if a.shape.len() != 2 || b.shape.len() != 2 {
        return Err(Error::Dimension {
            context: "matmul operand rank",
            expected: 2,
            found: if a.shape.len() != 2 {
                a.shape.len()
            } else {
                b.shape.len()
            },
        });
    }
    let (m, k) = (a.shape[0], a.shape[1]);
    let (k2, n) = (b.shape[0], b.shape[1]);
    if k != k2 {
        return Err(Error::Dimension {
            context: "matmul inner dimension",
            expected: k,
            found: k2,
        });
    }
    Ok((m, k, n))
}

fn evaluate(kind: OpKind, a: &Tensor, b: &Tensor) -> Result<Tensor> {
    Ok(match kind {
        OpKind::Add => {
            same_shape(a, b, "add operands")?;
            zip(a, b, |x, y| x + y)
        }
        OpKind::Subtract => {
            same_shape(a, b, "subtract operands")?;
            zip(a, b, |x, y| x - y)
        }
        OpKind::Multiply => {
            same_shape(a, b, "multiply operands")?;
            zip(a, b, |x, y| x * y)
        }
        OpKind::MatMul => {
            let (m, k, n) = matmul_dims(a, b)?;
            let mut out = vec![0.0; m * n];
            for i in 0..m {
                let row = &mut out[i * n..(i + 1) * n];
                for p in 0..k {
                    let av = a.data[i * k + p];
                    if av != 0.0 {
                        for (o, bv) in row.iter_mut().zip(&b.data[p * n..(p + 1) * n]) {
                            *o += av * bv;
                        }
                    }
                }
            }
            Tensor::raw(vec![m, n], out)
        }
        OpKind::Relu | OpKind::Hinge => map(a, |x| if x > 0.0 { x } else { 0.0 }),
        OpKind::Sigmoid => map(a, sigmoid),
        OpKind::Square => map(a, |x| x * x),
        OpKind::Sum => Tensor::scalar(a.data.iter().sum()),
        OpKind::Scale(k) => map(a, |x| k * x),
    })
}

fn accumulate(grads: &mut [Option<Vec<f64>>], id: NodeId, delta: Vec<f64>) {
    match &mut grads[id.0] {
        Some(existing) => {
            for (e, d) in existing.iter_mut().zip(delta) {
                *e += d;
            }
        }
        slot => *slot = Some(delta),
    }
}

fn propagate(
    kind: OpKind,
    a: &Tensor,
    b: &Tensor,
    out: &Tensor,
    g: &[f64],
    inputs: [NodeId; 2],
    grads: &mut [Option<Vec<f64>>],
) {
    let [ia, ib] = inputs;
    match kind {
        OpKind::Add => {
            accumulate(grads, ia, g.to_vec());
            accumulate(grads, ib, g.to_vec());
        }
        OpKind::Subtract => {
            accumulate(grads, ia, g.to_vec());
            accumulate(grads, ib, g.iter().map(|v| -v).collect());
        }
        OpKind::Multiply => {
            let ga = g.iter().zip(&b.data).map(|(g, y)| g * y).collect();
            let gb = g.iter().zip(&a.data).map(|(g, x)| g * x).collect();
            accumulate(grads, ia, ga);
            accumulate(grads, ib, gb);
        }
        OpKind::MatMul => {
            let (m, k, n) = (a.shape[0], a.shape[1], b.shape[1]);
            // dA = G B^T, dB = A^T G
            let mut ga = vec![0.0; m * k];
            let mut gb = vec![0.0; k * n];
            for i in 0..m {
                let grow = &g[i * n..(i + 1) * n];
                for p in 0..k {
                    let brow = &b.data[p * n..(p + 1) * n];
                    ga[i * k + p] = grow.iter().zip(brow).map(|(x, y)| x * y).sum();
                    let av = a.data[i * k + p];
                    if av != 0.0 {
                        for (o, gv) in gb[p * n..(p + 1) * n].iter_mut().zip(grow) {
                            *o += av * gv;
                        }
                    }
                }
            }
            accumulate(grads, ia, ga);
            accumulate(grads, ib, gb);
        }
        OpKind::Relu | OpKind::Hinge => {
            let ga = g
                .iter()
                .zip(&a.data)
                .map(|(g, &x)| if x > 0.0 { *g } else { 0.0 })
                .collect();
            accumulate(grads, ia, ga);
        }
        OpKind::Sigmoid => {
            let ga = g
                .iter()
                .zip(&out.data)
                .map(|(g, s)| g * s * (1.0 - s))
                .collect();
            accumulate(grads, ia, ga);
        }
        OpKind::Square => {
            let ga = g.iter().zip(&a.data).map(|(g, x)| 2.0 * g * x).collect();
            accumulate(grads, ia, ga);
        }
        OpKind::Sum => {
            accumulate(grads, ia, vec![g[0]; a.len()]);
        }
        OpKind::Scale(k) => {
            accumulate(grads, ia, g.iter().map(|v| k * v).collect());
        }
    }
}

/// Compares reverse-mode gradients of `f` at `point` with central finite
/// differences. Returns the maximum over components of
/// `|a - b| / max(1, |a|, |b|)`.
pub fn check_gradient<F>(f: F, point: &Tensor, step: f64) -> Result<f64>
where
    F: Fn(&mut Tape, NodeId) -> Result<NodeId>,
{
    if step <= 0.0 {
        return Err(Error::contract("finite-difference step must be positive"));
    }
    let mut tape = Tape::new();
    let x = tape.leaf(point.clone());
    let out = f(&mut tape, x)?;
    let analytic = tape.backward(out)?.get_or_zeros(x, point.shape());

    let mut worst = 0.0_f64;
    for i in 0..point.len() {
        let mut probe = point.clone();
        probe.data[i] = point.data[i] + step;
        tape.set_leaf(x, probe.clone())?;
        tape.replay()?;
        let plus = tape.value(out).item();
        probe.data[i] = point.data[i] - step;
        tape.set_leaf(x, probe)?;
        tape.replay()?;
        let minus = tape.value(out).item();
        let numeric = (plus - minus) / (2.0 * step);
        let a = analytic.data[i];
        let err = (a - numeric).abs() / 1.0_f64.max(a.abs()).max(numeric.abs());
        worst = worst.max(err);
    }
    tape.set_leaf(x, point.clone())?;
    tape.replay()?;
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_tape(v: f64) -> (Tape, NodeId) {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::scalar(v));
        (t, x)
    }

    #[test]
    fn sigmoid_midpoint() {
        let (mut t, x) = scalar_tape(0.0);
        let y = t.sigmoid(x).unwrap();
        assert_eq!(t.value(y).item(), 0.5);
    }

    #[test]
    fn hinge_values() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::column(vec![-3.0, 3.0]));
        let y = t.hinge(x).unwrap();
        assert_eq!(t.value(y).data(), &[0.0, 3.0]);
    }

    #[test]
    fn matmul_hand_arithmetic() {
        let mut t = Tape::new();
        let a = t.leaf(Tensor::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap());
        let b = t.leaf(Tensor::matrix(2, 1, vec![1.0, 1.0]).unwrap());
        let c = t.matmul(a, b).unwrap();
        assert_eq!(t.value(c).shape(), &[2, 1]);
        assert_eq!(t.value(c).data(), &[3.0, 7.0]);
    }

    #[test]
    fn shape_mismatch_is_dimension_error() {
        let mut t = Tape::new();
        let a = t.leaf(Tensor::column(vec![1.0, 2.0]));
        let b = t.leaf(Tensor::column(vec![1.0, 2.0, 3.0]));
        assert!(matches!(t.add(a, b), Err(Error::Dimension { .. })));
        assert!(matches!(t.matmul(a, b), Err(Error::Dimension { .. })));
    }

    #[test]
    fn nan_rejected_in_checked_constructor() {
        assert!(matches!(
            Tensor::new(&[2], vec![1.0, f64::NAN]),
            Err(Error::NonFinite(_))
        ));
        assert!(Tensor::new(&[3], vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn square_gradient() {
        let (mut t, x) = scalar_tape(3.0);
        let y = t.square(x).unwrap();
        let g = t.backward(y).unwrap();
        assert_eq!(g.get(x).unwrap().item(), 6.0);
    }

    #[test]
    fn relu_subgradient_at_kink_is_zero() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::column(vec![-1.0, 2.0, 0.0]));
        let r = t.relu(x).unwrap();
        let s = t.sum(r).unwrap();
        let g = t.backward(s).unwrap();
        assert_eq!(g.get(x).unwrap().data(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn non_scalar_backward_is_contract_error() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::column(vec![1.0, 2.0]));
        let y = t.square(x).unwrap();
        assert!(matches!(t.backward(y), Err(Error::Contract(_))));
    }

    #[test]
    fn constants_receive_no_gradient() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::scalar(2.0));
        let c = t.constant(Tensor::scalar(5.0));
        let y = t.mul(x, c).unwrap();
        let g = t.backward(y).unwrap();
        assert_eq!(g.get(x).unwrap().item(), 5.0);
        assert!(g.get(c).is_none());
    }

    #[test]
    fn matmul_gradient_matches_finite_differences() {
        let v = Tensor::matrix(2, 1, vec![1.0, 1.0]).unwrap();
        let w = Tensor::matrix(3, 2, vec![0.3, -1.2, 2.0, 0.1, -0.7, 0.9]).unwrap();
        let f = |t: &mut Tape, x: NodeId| {
            let c = t.constant(v.clone());
            let p = t.matmul(x, c)?;
            t.sum(p)
        };
        let mut t = Tape::new();
        let x = t.leaf(w.clone());
        let out = f(&mut t, x).unwrap();
        let g = t.backward(out).unwrap();
        assert_eq!(g.get(x).unwrap().data(), &[1.0; 6]);
        assert!(check_gradient(f, &w, 1e-5).unwrap() < 1e-8);
    }

    #[test]
    fn quadratic_form_gradient_check() {
        let a = Tensor::matrix(2, 2, vec![2.0, 0.5, 0.5, 1.0]).unwrap();
        let f = |t: &mut Tape, x: NodeId| {
            let am = t.constant(a.clone());
            let ax = t.matmul(am, x)?;
            let p = t.mul(ax, x)?;
            t.sum(p)
        };
        let point = Tensor::matrix(2, 1, vec![0.7, -1.3]).unwrap();
        assert!(check_gradient(f, &point, 1e-5).unwrap() < 1e-6);
    }

    #[test]
    fn constant_function_has_zero_error() {
        let f = |t: &mut Tape, _x: NodeId| {
            let c = t.constant(Tensor::scalar(4.0));
            t.scale(c, 2.0)
        };
        assert_eq!(check_gradient(f, &Tensor::scalar(1.5), 1e-3).unwrap(), 0.0);
    }

    #[test]
    fn replay_is_deterministic() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::column(vec![0.2, -0.4, 1.1]));
        let s = t.sigmoid(x).unwrap();
        let q = t.square(s).unwrap();
        let o = t.sum(q).unwrap();
        let v1 = t.value(o).item();
        let g1 = t.backward(o).unwrap().get(x).unwrap().clone();
        t.replay().unwrap();
        let v2 = t.value(o).item();
        let g2 = t.backward(o).unwrap().get(x).unwrap().clone();
        assert_eq!(v1.to_bits(), v2.to_bits());
        assert_eq!(g1, g2);
    }
}
