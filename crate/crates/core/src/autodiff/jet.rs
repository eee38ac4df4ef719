//! Second-order forward jets in the traveling coordinate `z`.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// A value together with its first and second derivative in `z`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Jet2 {
    pub value: f64,
    /// d/dz
    pub d1: f64,
    /// d²/dz²
    pub d2: f64,
}

impl Jet2 {
    pub const fn new(value: f64, d1: f64, d2: f64) -> Self {
        Self { value, d1, d2 }
    }

    /// A quantity that does not depend on `z`.
    pub const fn constant(value: f64) -> Self {
        Self::new(value, 0.0, 0.0)
    }

    /// The independent variable itself, seeded with dz/dz = 1.
    pub const fn variable(z: f64) -> Self {
        Self::new(z, 1.0, 0.0)
    }

    pub fn scale(self, c: f64) -> Self {
        Self::new(c * self.value, c * self.d1, c * self.d2)
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite() && self.d1.is_finite() && self.d2.is_finite()
    }
}

impl Add for Jet2 {
    type Output = Jet2;
    fn add(self, rhs: Jet2) -> Jet2 {
        Jet2::new(self.value + rhs.value, self.d1 + rhs.d1, self.d2 + rhs.d2)
    }
}

impl Sub for Jet2 {
    type Output = Jet2;
    fn sub(self, rhs: Jet2) -> Jet2 {
        Jet2::new(self.value - rhs.value, self.d1 - rhs.d1, self.d2 - rhs.d2)
    }
}

impl Neg for Jet2 {
    type Output = Jet2;
    fn neg(self) -> Jet2 {
        Jet2::new(-self.value, -self.d1, -self.d2)
    }
}

/// Leibniz rule to second order.
impl Mul for Jet2 {
    type Output = Jet2;
    fn mul(self, rhs: Jet2) -> Jet2 {
        Jet2::new(
            self.value * rhs.value,
            self.d1 * rhs.value + self.value * rhs.d1,
            self.d2 * rhs.value + 2.0 * self.d1 * rhs.d1 + self.value * rhs.d2,
        )
    }
}

/// Smooth scalar nonlinearities supported by the network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Sigmoid,
}

impl Activation {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => sigmoid(x),
        }
    }

    /// `(f, f', f'', f''')` at `x`. The third derivative is needed when
    /// back-propagating through a second-order jet.
    pub fn derivatives(self, x: f64) -> [f64; 4] {
        match self {
            Activation::Tanh => {
                let t = x.tanh();
                let d = 1.0 - t * t;
                [t, d, -2.0 * t * d, d * (6.0 * t * t - 2.0)]
            }
            Activation::Sigmoid => {
                let s = sigmoid(x);
                let d = s * (1.0 - s);
                let dd = d * (1.0 - 2.0 * s);
                [s, d, dd, d * (1.0 - 6.0 * d)]
            }
        }
    }
}

/// Logistic function, evaluated without overflow for large |x|.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `Σ wᵢ·inputᵢ + bias`, applied componentwise; the bias only shifts the value.
///
/// Panics if `weights` and `inputs` differ in length.
pub fn jet_affine(inputs: &[Jet2], weights: &[f64], bias: f64) -> Jet2 {
    assert_eq!(
        inputs.len(),
        weights.len(),
        "jet_affine: {} inputs but {} weights",
        inputs.len(),
        weights.len()
    );
    let mut out = Jet2::constant(bias);
    for (x, &w) in inputs.iter().zip(weights) {
        out.value += w * x.value;
        out.d1 += w * x.d1;
        out.d2 += w * x.d2;
    }
    out
}

/// Chain rule to second order: `(f(v), f'(v)·v', f''(v)·v'² + f'(v)·v'')`.
pub fn jet_activation(x: Jet2, f: Activation) -> Jet2 {
    let [f0, f1, f2, _] = f.derivatives(x.value);
    Jet2::new(f0, f1 * x.d1, f2 * x.d1 * x.d1 + f1 * x.d2)
}
