//! Dense networks with a characteristic input layer and optional bounded
//! sigmoid head.
//!
//! Each profile gets its own [`Mlp`]; all of them live in one
//! [`ParamStore`] together with the shared speed slot.

mod batch;
pub mod checkpoint;

pub use batch::{BatchCache, BatchJets};

use std::ops::Range;

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{jet_activation, jet_affine, sigmoid, Activation, AutodiffError, Jet2, ParamStore, Tape, TapeJet, Var, SPEED};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("depth must be at least 2, got {0}")]
    Depth(usize),
    #[error("width must be at least 1, got {0}")]
    Width(usize),
    #[error("bounded head needs distinct limits, got lo = hi = {0}")]
    DegenerateHead(f64),
    #[error("characteristic direction must have unit norm, got {0}")]
    NotUnit(f64),
    #[error("input dimension {got} does not match direction dimension {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("parameter vector of length {got} does not fit layout of length {expected}")]
    Shape { expected: usize, got: usize },
    #[error(transparent)]
    Params(#[from] AutodiffError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitScheme {
    /// Uniform on ±√(1/fan_in).
    FanInUniform,
    /// Uniform on ±√(6/(fan_in + fan_out)).
    FanSumUniform,
}

impl InitScheme {
    pub fn bound(self, fan_in: usize, fan_out: usize) -> f64 {
        match self {
            InitScheme::FanInUniform => (1.0 / fan_in as f64).sqrt(),
            InitScheme::FanSumUniform => (6.0 / (fan_in + fan_out) as f64).sqrt(),
        }
    }
}

/// Output layer of a profile network.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum Head {
    Linear,
    /// `3(hi − lo)·S(x) + (2lo − hi)`, with range `(2lo − hi, 2hi − lo)`.
    Bounded { lo: f64, hi: f64 },
}

impl Head {
    /// Open output interval, `None` for the linear head.
    pub fn range(self) -> Option<(f64, f64)> {
        match self {
            Head::Linear => None,
            Head::Bounded { lo, hi } => {
                let (a, b) = (2.0 * lo - hi, 2.0 * hi - lo);
                Some((a.min(b), a.max(b)))
            }
        }
    }
}

/// Architecture of a single profile network.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    /// Total layer count L: L − 1 hidden layers plus the output layer.
    pub depth: usize,
    pub width: usize,
    pub activation: Activation,
    pub head: Head,
    pub init: InitScheme,
    pub seed: u64,
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<(), NetworkError> {
        if self.depth < 2 {
            return Err(NetworkError::Depth(self.depth));
        }
        if self.width < 1 {
            return Err(NetworkError::Width(self.width));
        }
        if let Head::Bounded { lo, hi } = self.head {
            if lo == hi {
                return Err(NetworkError::DegenerateHead(lo));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CharacteristicMode {
    /// Input is the traveling coordinate itself.
    Ansatz,
    /// Input is `(t, x)`, mapped to `k·x − s·t`.
    Spacetime,
}

/// First layer of every profile network: `(t, x) ↦ k·x − s·t`.
#[derive(Clone, Debug, PartialEq)]
pub struct CharacteristicMap {
    k: Vec<f64>,
    mode: CharacteristicMode,
}

impl CharacteristicMap {
    pub fn ansatz() -> Self {
        Self { k: vec![1.0], mode: CharacteristicMode::Ansatz }
    }

    pub fn spacetime(k: Vec<f64>) -> Result<Self, NetworkError> {
        let norm = k.iter().map(|c| c * c).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(NetworkError::NotUnit(norm));
        }
        Ok(Self { k, mode: CharacteristicMode::Spacetime })
    }

    /// `k = (1, …, 1)/√n`.
    pub fn diagonal(n: usize) -> Self {
        let c = 1.0 / (n as f64).sqrt();
        Self { k: vec![c; n], mode: CharacteristicMode::Spacetime }
    }

    pub fn direction(&self) -> &[f64] {
        &self.k
    }

    pub fn mode(&self) -> CharacteristicMode {
        self.mode
    }

    pub fn dim(&self) -> usize {
        self.k.len()
    }

    /// `k·x`, the part of `z` independent of the speed.
    pub fn project(&self, x: &[f64]) -> Result<f64, NetworkError> {
        if x.len() != self.k.len() {
            return Err(NetworkError::Dimension { expected: self.k.len(), got: x.len() });
        }
        Ok(self.k.iter().zip(x).map(|(k, x)| k * x).sum())
    }

    /// Returns the input jet in `z` and ∂z/∂s.
    pub fn characteristic(&self, t: f64, x: &[f64], s: f64) -> Result<(Jet2, f64), NetworkError> {
        let kx = self.project(x)?;
        Ok(match self.mode {
            CharacteristicMode::Ansatz => (Jet2::variable(kx), 0.0),
            CharacteristicMode::Spacetime => (Jet2::variable(kx - s * t), -t),
        })
    }

    /// Tape version; in spacetime mode the value node depends on `speed`.
    pub fn characteristic_tape(&self, tape: &mut Tape, t: f64, x: &[f64], speed: Var) -> Result<TapeJet, NetworkError> {
        let kx = self.project(x)?;
        let value = match self.mode {
            CharacteristicMode::Ansatz => tape.constant(kx),
            CharacteristicMode::Spacetime => {
                let st = tape.scale(speed, -t);
                tape.offset(st, kx)
            }
        };
        Ok(TapeJet { value, d1: tape.constant(1.0), d2: tape.constant(0.0) })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct LayerSlots {
    pub weight: Range<usize>,
    pub bias: Range<usize>,
    pub fan_in: usize,
    pub fan_out: usize,
}

/// One profile network and the location of its parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    name: String,
    cfg: NetworkConfig,
    layers: Vec<LayerSlots>,
    head: Range<usize>,
}

impl Mlp {
    fn register(name: &str, cfg: NetworkConfig, store: &mut ParamStore) -> Result<Self, NetworkError> {
        cfg.validate()?;
        let mut layers = Vec::with_capacity(cfg.depth - 1);
        let mut fan_in = 1;
        for l in 1..cfg.depth {
            let weight = store.push_segment(&format!("{name}.l{l}.weight"), fan_in * cfg.width)?;
            let bias = store.push_segment(&format!("{name}.l{l}.bias"), cfg.width)?;
            layers.push(LayerSlots { weight, bias, fan_in, fan_out: cfg.width });
            fan_in = cfg.width;
        }
        let head = store.push_segment(&format!("{name}.head.weight"), cfg.width)?;
        Ok(Self { name: name.to_string(), cfg, layers, head })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.cfg
    }

    fn init(&self, rng: &mut ChaCha8Rng, data: &mut [f64]) {
        let mut fill = |range: Range<usize>, fan_in: usize, fan_out: usize| {
            let b = self.cfg.init.bound(fan_in, fan_out);
            let dist = Uniform::new_inclusive(-b, b);
            for w in &mut data[range] {
                *w = dist.sample(rng);
            }
        };
        for layer in &self.layers {
            fill(layer.weight.clone(), layer.fan_in, layer.fan_out);
        }
        fill(self.head.clone(), self.cfg.width, 1);
    }

    /// Pre-activation of the output layer: `Σ wᵢ·N_{L−1}⁽ⁱ⁾`.
    pub fn pre_head(&self, params: &[f64], z: Jet2) -> Jet2 {
        let mut h = vec![z];
        for layer in &self.layers {
            let w = &params[layer.weight.clone()];
            let b = &params[layer.bias.clone()];
            let mut next = Vec::with_capacity(layer.fan_out);
            let mut col = vec![0.0; layer.fan_in];
            for j in 0..layer.fan_out {
                for (i, c) in col.iter_mut().enumerate() {
                    *c = w[i * layer.fan_out + j];
                }
                next.push(jet_activation(jet_affine(&h, &col, b[j]), self.cfg.activation));
            }
            h = next;
        }
        jet_affine(&h, &params[self.head.clone()], 0.0)
    }

    /// Network output with exact first and second `z` derivatives.
    pub fn forward(&self, params: &[f64], z: Jet2) -> Jet2 {
        apply_head(self.cfg.head, self.pre_head(params, z))
    }

    pub fn forward_tape(&self, tape: &mut Tape, leaves: &[Var], z: TapeJet) -> TapeJet {
        let mut h = vec![z];
        for layer in &self.layers {
            let w = &leaves[layer.weight.clone()];
            let b = &leaves[layer.bias.clone()];
            let mut next = Vec::with_capacity(layer.fan_out);
            let mut col = Vec::with_capacity(layer.fan_in);
            for j in 0..layer.fan_out {
                col.clear();
                col.extend((0..layer.fan_in).map(|i| w[i * layer.fan_out + j]));
                let a = tape.jet_affine(&h, &col, Some(b[j]));
                next.push(tape.jet_activation(a, self.cfg.activation));
            }
            h = next;
        }
        let pre = tape.jet_affine(&h, &leaves[self.head.clone()], None);
        match self.cfg.head {
            Head::Linear => pre,
            Head::Bounded { lo, hi } => {
                let s = tape.jet_activation(pre, Activation::Sigmoid);
                let c = 3.0 * (hi - lo);
                let v = tape.scale(s.value, c);
                TapeJet {
                    value: tape.offset(v, 2.0 * lo - hi),
                    d1: tape.scale(s.d1, c),
                    d2: tape.scale(s.d2, c),
                }
            }
        }
    }
}

/// Applies the output head to the pre-activation jet.
pub fn apply_head(head: Head, pre: Jet2) -> Jet2 {
    match head {
        Head::Linear => pre,
        Head::Bounded { lo, hi } => {
            let s = jet_activation(pre, Activation::Sigmoid);
            let c = 3.0 * (hi - lo);
            Jet2::new(c * s.value + (2.0 * lo - hi), c * s.d1, c * s.d2)
        }
    }
}

/// Value of the bounded head for a scalar pre-activation.
pub fn bounded_value(lo: f64, hi: f64, x: f64) -> f64 {
    3.0 * (hi - lo) * sigmoid(x) + (2.0 * lo - hi)
}

/// A family of profile networks sharing one speed slot.
#[derive(Clone, Debug, PartialEq)]
pub struct Networks {
    nets: Vec<Mlp>,
    layout: ParamStore,
    speed: usize,
}

impl Networks {
    pub fn new(specs: &[(&str, NetworkConfig)]) -> Result<Self, NetworkError> {
        let mut layout = ParamStore::new();
        let mut nets = Vec::with_capacity(specs.len());
        for (name, cfg) in specs {
            nets.push(Mlp::register(name, *cfg, &mut layout)?);
        }
        let speed = layout.push_segment(SPEED, 1)?.start;
        Ok(Self { nets, layout, speed })
    }

    pub fn nets(&self) -> &[Mlp] {
        &self.nets
    }

    pub fn net(&self, i: usize) -> &Mlp {
        &self.nets[i]
    }

    pub fn speed_index(&self) -> usize {
        self.speed
    }

    pub fn n_params(&self) -> usize {
        self.layout.len()
    }

    /// Zero-filled store with this layout.
    pub fn layout(&self) -> &ParamStore {
        &self.layout
    }

    pub fn check_shape(&self, params: &[f64]) -> Result<(), NetworkError> {
        if params.len() != self.layout.len() {
            return Err(NetworkError::Shape { expected: self.layout.len(), got: params.len() });
        }
        Ok(())
    }

    /// Draws weights per each network's init scheme (one stream seeded from
    /// the first network's seed), zero biases, and the given speed.
    pub fn init_params(&self, speed_init: f64) -> ParamStore {
        let seed = self.nets.first().map(|n| n.cfg.seed).unwrap_or(0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = self.layout.clone();
        for net in &self.nets {
            net.init(&mut rng, store.as_mut_slice());
        }
        store.set_speed(speed_init);
        store
    }
}

/// `n_outputs` identical networks named `net0`, `net1`, … with speed 0.
pub fn init_params(cfg: &NetworkConfig, n_outputs: usize) -> Result<(Networks, ParamStore), NetworkError> {
    let names: Vec<String> = (0..n_outputs).map(|i| format!("net{i}")).collect();
    let specs: Vec<(&str, NetworkConfig)> = names.iter().map(|n| (n.as_str(), *cfg)).collect();
    let nets = Networks::new(&specs)?;
    let params = nets.init_params(0.0);
    Ok((nets, params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::relative_error;
    use rand::Rng;

    fn cfg(depth: usize, width: usize, head: Head) -> NetworkConfig {
        NetworkConfig { depth, width, activation: Activation::Tanh, head, init: InitScheme::FanInUniform, seed: 11 }
    }

    #[test]
    fn validation() {
        assert_eq!(cfg(1, 4, Head::Linear).validate(), Err(NetworkError::Depth(1)));
        assert_eq!(cfg(2, 0, Head::Linear).validate(), Err(NetworkError::Width(0)));
        assert!(cfg(2, 3, Head::Bounded { lo: 1.0, hi: 1.0 }).validate().is_err());
        assert!(cfg(2, 3, Head::Bounded { lo: 1.0, hi: 2.0 }).validate().is_ok());
    }

    #[test]
    fn layout_has_one_speed_slot() {
        let (nets, p) = init_params(&cfg(3, 5, Head::Linear), 2).unwrap();
        // per net: 1·5 + 5 + 5·5 + 5 + 5 = 45
        assert_eq!(p.len(), 2 * 45 + 1);
        assert_eq!(p.segments().iter().filter(|s| s.name == SPEED).count(), 1);
        assert_eq!(nets.speed_index(), 90);
        assert_eq!(p.speed(), 0.0);
    }

    #[test]
    fn first_layer_weights_within_unit_bound() {
        let (_, p) = init_params(&cfg(3, 512, Head::Linear), 1).unwrap();
        let w = p.segment("net0.l1.weight").unwrap();
        assert_eq!(w.len(), 512);
        assert!(w.iter().all(|x| (-1.0..=1.0).contains(x)));
        assert!(p.segment("net0.l1.bias").unwrap().iter().all(|&b| b == 0.0));
    }

    #[test]
    fn init_is_deterministic() {
        let a = init_params(&cfg(4, 16, Head::Linear), 2).unwrap().1;
        let b = init_params(&cfg(4, 16, Head::Linear), 2).unwrap().1;
        assert_eq!(a, b);
        let mut c2 = cfg(4, 16, Head::Linear);
        c2.seed = 12;
        assert_ne!(a, init_params(&c2, 2).unwrap().1);
    }

    #[test]
    fn empirical_variance_matches_scheme() {
        for scheme in [InitScheme::FanInUniform, InitScheme::FanSumUniform] {
            let mut c = cfg(3, 512, Head::Linear);
            c.init = scheme;
            let (_, p) = init_params(&c, 1).unwrap();
            let w = p.segment("net0.l2.weight").unwrap();
            let mean = w.iter().sum::<f64>() / w.len() as f64;
            let var = w.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / w.len() as f64;
            let b = scheme.bound(512, 512);
            let expected = b * b / 3.0;
            assert!((var - expected).abs() < 0.1 * expected, "{scheme:?}: {var} vs {expected}");
        }
    }

    #[test]
    fn characteristic_examples() {
        let a = CharacteristicMap::ansatz();
        assert_eq!(a.characteristic(0.0, &[2.0], 5.0).unwrap(), (Jet2::new(2.0, 1.0, 0.0), 0.0));
        let d = CharacteristicMap::diagonal(4);
        let (z, _) = d.characteristic(0.0, &[4.0, 0.0, 0.0, 0.0], 1.0).unwrap();
        assert!((z.value - 2.0).abs() < 1e-15);
        let one = CharacteristicMap::spacetime(vec![1.0]).unwrap();
        assert_eq!(one.characteristic(3.0, &[5.0], 1.0).unwrap(), (Jet2::new(2.0, 1.0, 0.0), -3.0));
        assert!(matches!(d.characteristic(0.0, &[1.0], 0.0), Err(NetworkError::Dimension { .. })));
        assert!(matches!(CharacteristicMap::spacetime(vec![1.0, 1.0]), Err(NetworkError::NotUnit(_))));
    }

    #[test]
    fn characteristic_tape_records_speed_dependence() {
        let one = CharacteristicMap::spacetime(vec![1.0]).unwrap();
        let mut t = Tape::new();
        let s = t.param(0, 1.0);
        let z = one.characteristic_tape(&mut t, 3.0, &[5.0], s).unwrap();
        assert_eq!(t.value(z.value), 2.0);
        assert_eq!(t.backward(z.value, 1).unwrap(), vec![-3.0]);
        let mut t = Tape::new();
        let s = t.param(0, 1.0);
        let z = CharacteristicMap::ansatz().characteristic_tape(&mut t, 3.0, &[2.0], s).unwrap();
        assert_eq!(t.backward(z.value, 1).unwrap(), vec![0.0]);
    }

    #[test]
    fn zero_weight_linear_net_is_zero() {
        let nets = Networks::new(&[("u", cfg(3, 8, Head::Linear))]).unwrap();
        let p = nets.layout().clone();
        assert_eq!(nets.net(0).forward(p.as_slice(), Jet2::variable(0.3)), Jet2::new(0.0, 0.0, 0.0));
    }

    #[test]
    fn bounded_head_endpoints() {
        // (u₋, u₊) = (2, 1): lo = 1, hi = 2
        assert_eq!(bounded_value(1.0, 2.0, 1e3), 3.0);
        assert_eq!(bounded_value(1.0, 2.0, -1e3), 0.0);
        assert_eq!(Head::Bounded { lo: 1.0, hi: 2.0 }.range(), Some((0.0, 3.0)));
    }

    #[test]
    fn forward_derivatives_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..20 {
            let head = if trial % 2 == 0 { Head::Linear } else { Head::Bounded { lo: -0.5, hi: 1.5 } };
            let mut c = cfg(rng.gen_range(2..6), rng.gen_range(1..12), head);
            c.seed = trial;
            let nets = Networks::new(&[("u", c)]).unwrap();
            let p = nets.init_params(0.0);
            let net = nets.net(0);
            let z = rng.gen_range(-3.0..3.0);
            let f = |z: f64| net.forward(p.as_slice(), Jet2::variable(z)).value;
            let jet = net.forward(p.as_slice(), Jet2::variable(z));
            let d1 = (f(z + 1e-5) - f(z - 1e-5)) / 2e-5;
            let d2 = (f(z + 1e-4) - 2.0 * f(z) + f(z - 1e-4)) / 1e-8;
            assert!(relative_error(jet.d1, d1) < 1e-6 || (jet.d1 - d1).abs() < 1e-10, "trial {trial}");
            assert!(relative_error(jet.d2, d2) < 1e-5 || (jet.d2 - d2).abs() < 1e-6, "trial {trial}: {} vs {d2}", jet.d2);
        }
    }

    #[test]
    fn tape_forward_matches_plain_forward() {
        let c = cfg(4, 6, Head::Bounded { lo: 0.0, hi: 1.0 });
        let nets = Networks::new(&[("u", c)]).unwrap();
        let p = nets.init_params(0.0);
        let mut t = Tape::new();
        let leaves = t.params(p.as_slice());
        let z = CharacteristicMap::ansatz().characteristic_tape(&mut t, 0.0, &[0.7], leaves[nets.speed_index()]).unwrap();
        let out = nets.net(0).forward_tape(&mut t, &leaves, z);
        let plain = nets.net(0).forward(p.as_slice(), Jet2::variable(0.7));
        let taped = t.jet_values(out);
        assert!((taped.value - plain.value).abs() < 1e-14);
        assert!((taped.d1 - plain.d1).abs() < 1e-14);
        assert!((taped.d2 - plain.d2).abs() < 1e-14);
    }
}
