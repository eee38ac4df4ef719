//! Wengert tape over scalar nodes.
//!
//! Every node stores its parents and the local partial derivative with
//! respect to each parent, so `backward` is a single reverse sweep. Node
//! kinds are kept alongside so the tape can be replayed forward against a
//! different parameter vector.

use std::sync::atomic::{AtomicU32, Ordering};

use super::jet::Activation;
use super::AutodiffError;

static NEXT_TAPE_ID: AtomicU32 = AtomicU32::new(1);

/// Handle to a node on a particular tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var {
    tape: u32,
    index: u32,
}

impl Var {
    pub fn index(self) -> usize {
        self.index as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Op {
    Const(f64),
    Param(usize),
    Add,
    Sub,
    Mul,
    Neg,
    Scale(f64),
    Offset(f64),
    Square,
    /// `order`-th derivative of the activation.
    Act(Activation, u8),
    /// `Σ wᵢ·xᵢ (+ b)`; parents are `x₀..xₙ, w₀..wₙ[, b]`.
    Dot { n: u32, bias: bool },
    Sum,
}

#[derive(Clone, Copy, Debug)]
struct Node {
    op: Op,
    start: u32,
    len: u32,
}

/// A recorded computation. Topological order holds by construction: a node
/// can only reference handles that already exist.
#[derive(Debug)]
pub struct Tape {
    id: u32,
    nodes: Vec<Node>,
    values: Vec<f64>,
    parents: Vec<u32>,
    partials: Vec<f64>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::with_capacity(0)
    }

    pub fn with_capacity(nodes: usize) -> Self {
        Self {
            id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::with_capacity(nodes),
            values: Vec::with_capacity(nodes),
            parents: Vec::with_capacity(2 * nodes),
            partials: Vec::with_capacity(2 * nodes),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Drops all nodes. Handles issued before the call become invalid.
    pub fn clear(&mut self) {
        self.id = NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed);
        self.nodes.clear();
        self.values.clear();
        self.parents.clear();
        self.partials.clear();
    }

    pub fn contains(&self, v: Var) -> bool {
        v.tape == self.id && v.index() < self.nodes.len()
    }

    pub fn value(&self, v: Var) -> f64 {
        debug_assert!(self.contains(v), "variable from another tape");
        self.values[v.index()]
    }

    fn push(&mut self, op: Op, value: f64, edges: &[(Var, f64)]) -> Var {
        let start = self.parents.len() as u32;
        for &(p, d) in edges {
            debug_assert!(self.contains(p), "parent from another tape");
            self.parents.push(p.index);
            self.partials.push(d);
        }
        self.nodes.push(Node { op, start, len: edges.len() as u32 });
        self.values.push(value);
        Var { tape: self.id, index: (self.nodes.len() - 1) as u32 }
    }

    pub fn constant(&mut self, c: f64) -> Var {
        self.push(Op::Const(c), c, &[])
    }

    /// A leaf bound to slot `slot` of the parameter vector.
    pub fn param(&mut self, slot: usize, value: f64) -> Var {
        self.push(Op::Param(slot), value, &[])
    }

    /// One leaf per entry of `values`, bound to slots `0..values.len()`.
    pub fn params(&mut self, values: &[f64]) -> Vec<Var> {
        values.iter().enumerate().map(|(i, &v)| self.param(i, v)).collect()
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) + self.value(b);
        self.push(Op::Add, v, &[(a, 1.0), (b, 1.0)])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) - self.value(b);
        self.push(Op::Sub, v, &[(a, 1.0), (b, -1.0)])
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let (x, y) = (self.value(a), self.value(b));
        self.push(Op::Mul, x * y, &[(a, y), (b, x)])
    }

    pub fn neg(&mut self, a: Var) -> Var {
        let v = -self.value(a);
        self.push(Op::Neg, v, &[(a, -1.0)])
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let v = c * self.value(a);
        self.push(Op::Scale(c), v, &[(a, c)])
    }

    pub fn offset(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a) + c;
        self.push(Op::Offset(c), v, &[(a, 1.0)])
    }

    pub fn square(&mut self, a: Var) -> Var {
        let x = self.value(a);
        self.push(Op::Square, x * x, &[(a, 2.0 * x)])
    }

    /// `order`-th derivative of `act` at `a`, for `order` in 0..=2.
    pub fn activation(&mut self, a: Var, act: Activation, order: u8) -> Var {
        assert!(order <= 2, "activation derivative order {order} not supported");
        let d = act.derivatives(self.value(a));
        let k = order as usize;
        self.push(Op::Act(act, order), d[k], &[(a, d[k + 1])])
    }

    /// `Σ wᵢ·xᵢ + b`, recorded as one node.
    pub fn dot(&mut self, xs: &[Var], ws: &[Var], bias: Option<Var>) -> Var {
        assert_eq!(xs.len(), ws.len(), "dot: {} inputs but {} weights", xs.len(), ws.len());
        let mut v = 0.0;
        for (&x, &w) in xs.iter().zip(ws) {
            v += self.value(w) * self.value(x);
        }
        // ∂/∂xᵢ = wᵢ, ∂/∂wᵢ = xᵢ
        let mut edges: Vec<(Var, f64)> = Vec::with_capacity(2 * xs.len() + 1);
        edges.extend(xs.iter().zip(ws).map(|(&x, &w)| (x, self.value(w))));
        edges.extend(xs.iter().zip(ws).map(|(&x, &w)| (w, self.value(x))));
        if let Some(b) = bias {
            v += self.value(b);
            edges.push((b, 1.0));
        }
        self.push(Op::Dot { n: xs.len() as u32, bias: bias.is_some() }, v, &edges)
    }

    pub fn sum(&mut self, xs: &[Var]) -> Var {
        let v = xs.iter().map(|&x| self.value(x)).sum();
        let edges: Vec<(Var, f64)> = xs.iter().map(|&x| (x, 1.0)).collect();
        self.push(Op::Sum, v, &edges)
    }

    /// Reverse sweep from `seed`. Returns ∂seed/∂slot for every slot in
    /// `0..n_params`; slots that never appear on the tape get exactly zero.
    pub fn backward(&self, seed: Var, n_params: usize) -> Result<Vec<f64>, AutodiffError> {
        if !self.contains(seed) {
            return Err(AutodiffError::SeedNotOnTape);
        }
        let mut adjoint = vec![0.0; seed.index() + 1];
        adjoint[seed.index()] = 1.0;
        let mut grad = vec![0.0; n_params];
        for i in (0..=seed.index()).rev() {
            let a = adjoint[i];
            if a == 0.0 {
                continue;
            }
            let node = self.nodes[i];
            if let Op::Param(slot) = node.op {
                if slot >= n_params {
                    return Err(AutodiffError::SlotOutOfRange { slot, len: n_params });
                }
                grad[slot] += a;
                continue;
            }
            let (s, e) = (node.start as usize, (node.start + node.len) as usize);
            for (&p, &d) in self.parents[s..e].iter().zip(&self.partials[s..e]) {
                adjoint[p as usize] += a * d;
            }
        }
        Ok(grad)
    }

    /// Recomputes every node from the leaves, reading parameter leaves from
    /// `params`. With the recorded parameter values the result equals the
    /// recorded values bit-for-bit.
    pub fn replay(&self, params: &[f64]) -> Vec<f64> {
        let mut vals: Vec<f64> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let ps = &self.parents[node.start as usize..(node.start + node.len) as usize];
            let x = |k: usize| vals[ps[k] as usize];
            let v = match node.op {
                Op::Const(c) => c,
                Op::Param(slot) => params[slot],
                Op::Add => x(0) + x(1),
                Op::Sub => x(0) - x(1),
                Op::Mul => x(0) * x(1),
                Op::Neg => -x(0),
                Op::Scale(c) => c * x(0),
                Op::Offset(c) => x(0) + c,
                Op::Square => x(0) * x(0),
                Op::Act(act, k) => act.derivatives(x(0))[k as usize],
                Op::Dot { n, bias } => {
                    let n = n as usize;
                    let mut acc = 0.0;
                    for i in 0..n {
                        acc += x(n + i) * x(i);
                    }
                    if bias {
                        acc += x(2 * n);
                    }
                    acc
                }
                Op::Sum => (0..ps.len()).map(x).sum(),
            };
            vals.push(v);
        }
        vals
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// True when every node's parents precede it.
    pub fn is_topologically_ordered(&self) -> bool {
        self.nodes.iter().enumerate().all(|(i, n)| {
            self.parents[n.start as usize..(n.start + n.len) as usize]
                .iter()
                .all(|&p| (p as usize) < i)
        })
    }
}

/// A second-order jet whose components live on a tape.
#[derive(Clone, Copy, Debug)]
pub struct TapeJet {
    pub value: Var,
    pub d1: Var,
    pub d2: Var,
}

impl Tape {
    pub fn jet_constant(&mut self, v: f64) -> TapeJet {
        let value = self.constant(v);
        let zero = self.constant(0.0);
        TapeJet { value, d1: zero, d2: zero }
    }

    pub fn jet_values(&self, j: TapeJet) -> super::Jet2 {
        super::Jet2::new(self.value(j.value), self.value(j.d1), self.value(j.d2))
    }

    /// Tape counterpart of [`super::jet_affine`].
    pub fn jet_affine(&mut self, inputs: &[TapeJet], weights: &[Var], bias: Option<Var>) -> TapeJet {
        let vs: Vec<Var> = inputs.iter().map(|j| j.value).collect();
        let d1s: Vec<Var> = inputs.iter().map(|j| j.d1).collect();
        let d2s: Vec<Var> = inputs.iter().map(|j| j.d2).collect();
        TapeJet {
            value: self.dot(&vs, weights, bias),
            d1: self.dot(&d1s, weights, None),
            d2: self.dot(&d2s, weights, None),
        }
    }

    /// Tape counterpart of [`super::jet_activation`].
    pub fn jet_activation(&mut self, x: TapeJet, act: Activation) -> TapeJet {
        let f0 = self.activation(x.value, act, 0);
        let f1 = self.activation(x.value, act, 1);
        let f2 = self.activation(x.value, act, 2);
        let d1 = self.mul(f1, x.d1);
        let sq = self.square(x.d1);
        let a = self.mul(f2, sq);
        let b = self.mul(f1, x.d2);
        let d2 = self.add(a, b);
        TapeJet { value: f0, d1, d2 }
    }
}
