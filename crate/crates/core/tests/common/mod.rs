//! Helpers shared by the integration tests.
#![allow(dead_code)]

use rand::Rng;
use travelwave::autodiff::{Activation, Jet2};
use travelwave::models::{Boundary, ModelSpec};
use travelwave::network::{Head, InitScheme, NetworkConfig, Networks};
use travelwave::trainer::profile_networks;

pub fn ks_eps0() -> ModelSpec {
    ModelSpec::ks(0.0, 2.0, 0.5, Boundary { u_minus: 2.0, v_minus: -1.0, u_plus: 1.0, v_plus: 0.0 })
}

pub fn ks_eps01() -> ModelSpec {
    ModelSpec::ks(0.1, 2.0, 0.9, Boundary { u_minus: 1.0, v_minus: -1.0, u_plus: 0.0, v_plus: 0.0 })
}

/// One of KS, AC, LV with parameters drawn from their valid ranges.
pub fn random_model<R: Rng>(rng: &mut R) -> ModelSpec {
    match rng.gen_range(0..3) {
        0 => {
            let u_plus = rng.gen_range(0.0..2.0);
            let b = Boundary { u_minus: u_plus + rng.gen_range(0.1..2.0), v_minus: -rng.gen_range(0.1..2.0), u_plus, v_plus: 0.0 };
            ModelSpec::ks(rng.gen_range(0.0..1.0), rng.gen_range(0.2..3.0), rng.gen_range(0.2..3.0), b)
        }
        1 => ModelSpec::ac(rng.gen_range(0.0..3.0), rng.gen_range(0.55..0.95)),
        _ => ModelSpec::lv(rng.gen_range(0.5..3.0), rng.gen_range(1.2..4.0), rng.gen_range(1.2..4.0), rng.gen_range(0.5..3.0)),
    }
}

pub fn net_config(depth: usize, width: usize, activation: Activation, seed: u64) -> NetworkConfig {
    NetworkConfig { depth, width, activation, head: Head::Linear, init: InitScheme::FanInUniform, seed }
}

pub fn random_activation<R: Rng>(rng: &mut R) -> Activation {
    if rng.gen_bool(0.5) {
        Activation::Tanh
    } else {
        Activation::Sigmoid
    }
}

/// Profile networks for `model` with random architecture and weights.
pub fn random_networks<R: Rng>(rng: &mut R, model: &ModelSpec, depths: (usize, usize), widths: (usize, usize)) -> (Networks, Vec<f64>) {
    let cfg = net_config(rng.gen_range(depths.0..=depths.1), rng.gen_range(widths.0..=widths.1), random_activation(rng), rng.gen());
    let nets = profile_networks(model, &cfg).unwrap();
    let mut params = nets.init_params(rng.gen_range(-1.0..1.0)).as_slice().to_vec();
    // nonzero biases so every code path carries signal
    for p in params.iter_mut().filter(|p| **p == 0.0) {
        *p = rng.gen_range(-0.5..0.5);
    }
    (nets, params)
}

/// Agreement of an analytic derivative with a finite difference: relative
/// error below `rel`, or absolute error below `abs` when both are tiny.
pub fn agrees(analytic: f64, numeric: f64, rel: f64, abs: f64) -> bool {
    let d = (analytic - numeric).abs();
    d <= abs || d <= rel * analytic.abs().max(numeric.abs())
}

/// Relative errors of `d1` and `d2` of `f` at `z` against central
/// differences: of the value for `d1`, and of the exact `d1` for `d2`.
/// Denominators are floored at `floor` so near-zero derivatives compare
/// absolutely.
pub fn jet_errors(f: impl Fn(Jet2) -> Jet2, z: f64, h: f64, floor: f64) -> (f64, f64) {
    let j = f(Jet2::variable(z));
    let p = f(Jet2::variable(z + h));
    let m = f(Jet2::variable(z - h));
    let fd1 = (p.value - m.value) / (2.0 * h);
    let fd2 = (p.d1 - m.d1) / (2.0 * h);
    let err = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(floor);
    (err(j.d1, fd1), err(j.d2, fd2))
}
