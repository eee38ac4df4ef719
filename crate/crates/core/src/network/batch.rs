//! Batched forward/backward over many collocation points.
//!
//! Jets for `P` points are stacked as a `3P × width` matrix (values, first
//! derivatives, second derivatives) so each layer is one matrix product.
//! The backward pass is the layer-level transcription of the scalar tape:
//! it produces the same gradient as recording every jet component on a
//! [`crate::autodiff::Tape`], at a fraction of the cost.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2, Axis};

use super::{Head, Mlp};
use crate::autodiff::Activation;

/// Per-point jets, stored componentwise.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BatchJets {
    pub value: Vec<f64>,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
}

impl BatchJets {
    pub fn zeros(n: usize) -> Self {
        Self { value: vec![0.0; n], d1: vec![0.0; n], d2: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }
}

/// Intermediates saved by [`Mlp::forward_batch`].
#[derive(Clone, Debug)]
pub struct BatchCache {
    points: usize,
    /// Input to each hidden layer and, last, to the head.
    inputs: Vec<Array2<f64>>,
    /// Stacked pre-activations of each hidden layer.
    preacts: Vec<Array2<f64>>,
    /// `(f', f'', f''')` at each hidden value pre-activation, `P × width × 3`.
    derivs: Vec<Vec<f64>>,
    head_pre: Array1<f64>,
}

/// Matrix products may come back column-major; the loops index rows.
fn standard(a: Array2<f64>) -> Array2<f64> {
    if a.is_standard_layout() {
        a
    } else {
        a.as_standard_layout().into_owned()
    }
}

/// Gradient of a second-order activation jet with respect to its input jet.
#[inline]
fn activation_backward(a1: f64, a2: f64, g: [f64; 3], f: [f64; 3]) -> [f64; 3] {
    let [gv, g1, g2] = g;
    let [f1, f2, f3] = f;
    [
        gv * f1 + g1 * f2 * a1 + g2 * (f3 * a1 * a1 + f2 * a2),
        g1 * f1 + 2.0 * g2 * f2 * a1,
        g2 * f1,
    ]
}

impl Mlp {
    /// Evaluates the network at input jets `(zᵢ, 1, 0)`.
    pub fn forward_batch(&self, params: &[f64], zs: &[f64]) -> (BatchJets, BatchCache) {
        let p = zs.len();
        let act = self.cfg.activation;
        let mut x = Array2::<f64>::zeros((3 * p, 1));
        for (i, &z) in zs.iter().enumerate() {
            x[[i, 0]] = z;
            x[[p + i, 0]] = 1.0;
        }
        let mut inputs = Vec::with_capacity(self.layers.len() + 1);
        let mut preacts = Vec::with_capacity(self.layers.len());
        let mut derivs = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (fi, fo) = (layer.fan_in, layer.fan_out);
            let w = ArrayView2::from_shape((fi, fo), &params[layer.weight.clone()]).expect("weight shape");
            let b = &params[layer.bias.clone()];
            let mut a = standard(x.dot(&w));
            let mut n = Array2::<f64>::zeros((3 * p, fo));
            let mut d = vec![0.0; p * fo * 3];
            {
                let a_s = a.as_slice_mut().expect("contiguous");
                let n_s = n.as_slice_mut().expect("contiguous");
                for i in 0..p {
                    for j in 0..fo {
                        let r0 = i * fo + j;
                        let (r1, r2) = (r0 + p * fo, r0 + 2 * p * fo);
                        a_s[r0] += b[j];
                        let [f0, f1, f2, f3] = act.derivatives(a_s[r0]);
                        let (a1, a2) = (a_s[r1], a_s[r2]);
                        n_s[r0] = f0;
                        n_s[r1] = f1 * a1;
                        n_s[r2] = f2 * a1 * a1 + f1 * a2;
                        d[3 * r0] = f1;
                        d[3 * r0 + 1] = f2;
                        d[3 * r0 + 2] = f3;
                    }
                }
            }
            inputs.push(x);
            preacts.push(a);
            derivs.push(d);
            x = n;
        }
        let wh = ArrayView1::from(&params[self.head.clone()]);
        let y = x.dot(&wh);
        inputs.push(x);
        let mut out = BatchJets::zeros(p);
        for i in 0..p {
            let pre = crate::autodiff::Jet2::new(y[i], y[p + i], y[2 * p + i]);
            let o = super::apply_head(self.cfg.head, pre);
            out.value[i] = o.value;
            out.d1[i] = o.d1;
            out.d2[i] = o.d2;
        }
        (out, BatchCache { points: p, inputs, preacts, derivs, head_pre: y })
    }

    /// Accumulates `∂L/∂params` into `grad` given `∂L/∂output` per point and
    /// returns `∂L/∂zᵢ` (through the value component of each input).
    pub fn backward_batch(&self, params: &[f64], cache: &BatchCache, grad_out: &BatchJets, grad: &mut [f64]) -> Vec<f64> {
        let p = cache.points;
        let y = &cache.head_pre;
        let mut gy = Array1::<f64>::zeros(3 * p);
        for i in 0..p {
            let g = [grad_out.value[i], grad_out.d1[i], grad_out.d2[i]];
            let gi = match self.cfg.head {
                Head::Linear => g,
                Head::Bounded { lo, hi } => {
                    let c = 3.0 * (hi - lo);
                    let [_, f1, f2, f3] = Activation::Sigmoid.derivatives(y[i]);
                    activation_backward(y[p + i], y[2 * p + i], [c * g[0], c * g[1], c * g[2]], [f1, f2, f3])
                }
            };
            gy[i] = gi[0];
            gy[p + i] = gi[1];
            gy[2 * p + i] = gi[2];
        }
        let head_in = cache.inputs.last().expect("head input");
        {
            let mut gwh = ArrayViewMut1::from(&mut grad[self.head.clone()]);
            gwh.scaled_add(1.0, &head_in.t().dot(&gy));
        }
        let wh = ArrayView1::from(&params[self.head.clone()]);
        // outer product gy ⊗ wh
        let mut gx = standard(gy.insert_axis(Axis(1)).dot(&wh.insert_axis(Axis(0))));

        for (l, layer) in self.layers.iter().enumerate().rev() {
            let (fi, fo) = (layer.fan_in, layer.fan_out);
            let a = &cache.preacts[l];
            let d = &cache.derivs[l];
            let mut ga = Array2::<f64>::zeros((3 * p, fo));
            {
                let a_s = a.as_slice().expect("contiguous");
                let g_s = gx.as_slice().expect("contiguous");
                let ga_s = ga.as_slice_mut().expect("contiguous");
                for r0 in 0..p * fo {
                    let (r1, r2) = (r0 + p * fo, r0 + 2 * p * fo);
                    let out = activation_backward(
                        a_s[r1],
                        a_s[r2],
                        [g_s[r0], g_s[r1], g_s[r2]],
                        [d[3 * r0], d[3 * r0 + 1], d[3 * r0 + 2]],
                    );
                    ga_s[r0] = out[0];
                    ga_s[r1] = out[1];
                    ga_s[r2] = out[2];
                }
            }
            let xin = &cache.inputs[l];
            {
                let mut gw = ArrayViewMut2::from_shape((fi, fo), &mut grad[layer.weight.clone()]).expect("weight shape");
                general_mat_mul(1.0, &xin.t(), &ga, 1.0, &mut gw);
            }
            {
                let gb = &mut grad[layer.bias.clone()];
                let ga_s = ga.as_slice().expect("contiguous");
                for i in 0..p {
                    for (j, g) in gb.iter_mut().enumerate() {
                        *g += ga_s[i * fo + j];
                    }
                }
            }
            let w = ArrayView2::from_shape((fi, fo), &params[layer.weight.clone()]).expect("weight shape");
            gx = standard(ga.dot(&w.t()));
        }
        (0..p).map(|i| gx[[i, 0]]).collect()
    }
}
