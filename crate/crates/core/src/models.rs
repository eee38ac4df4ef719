//! Traveling-wave ODE systems: residual operators, boundary data and the
//! analytic facts known about their speeds.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{Arith, Eval, Jet2};
use crate::network::Head;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid model parameter `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("{0}")]
    Domain(String),
    #[error("operation `{op}` is not defined for the {system} system")]
    WrongSystem { op: &'static str, system: &'static str },
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ModelError {
    ModelError::Invalid { field, reason: reason.into() }
}

/// Hopf–Cole transformed Keller–Segel system.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsParams {
    pub epsilon: f64,
    pub diffusion: f64,
    pub chi: f64,
}

/// Allen–Cahn with relaxation, `h(u) = u(1 − u)(u − α)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcParams {
    pub tau: f64,
    pub alpha: f64,
}

/// Two-species Lotka–Volterra competition.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LvParams {
    pub b: f64,
    pub h: f64,
    pub k: f64,
    pub d: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "system", rename_all = "lowercase")]
pub enum System {
    Ks(KsParams),
    Ac(AcParams),
    Lv(LvParams),
}

impl System {
    pub fn name(&self) -> &'static str {
        match self {
            System::Ks(_) => "ks",
            System::Ac(_) => "ac",
            System::Lv(_) => "lv",
        }
    }
}

/// Limits `(U, V)(−∞) = (u₋, v₋)`, `(U, V)(+∞) = (u₊, v₊)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Boundary {
    pub u_minus: f64,
    pub v_minus: f64,
    pub u_plus: f64,
    pub v_plus: f64,
}

/// Profile pinned to the mean of its limits at `z = 0`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Anchor {
    #[default]
    U,
    V,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Monotone {
    Increasing,
    Decreasing,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sign {
    Negative,
    Zero,
    Positive,
    Unknown,
}

impl Sign {
    pub fn of(x: f64) -> Sign {
        if x > 0.0 {
            Sign::Positive
        } else if x < 0.0 {
            Sign::Negative
        } else {
            Sign::Zero
        }
    }
}

/// Residuals of the two equations at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResidualPair {
    pub p: f64,
    pub q: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelSpec {
    pub system: System,
    pub boundary: Boundary,
    pub anchor: Anchor,
}

const AC_BOUNDARY: Boundary = Boundary { u_minus: 0.0, v_minus: 0.0, u_plus: 1.0, v_plus: 0.0 };
const LV_BOUNDARY: Boundary = Boundary { u_minus: 0.0, v_minus: 1.0, u_plus: 1.0, v_plus: 0.0 };

impl ModelSpec {
    pub fn ks(epsilon: f64, diffusion: f64, chi: f64, boundary: Boundary) -> Self {
        Self { system: System::Ks(KsParams { epsilon, diffusion, chi }), boundary, anchor: Anchor::U }
    }

    pub fn ac(tau: f64, alpha: f64) -> Self {
        Self { system: System::Ac(AcParams { tau, alpha }), boundary: AC_BOUNDARY, anchor: Anchor::U }
    }

    pub fn lv(b: f64, h: f64, k: f64, d: f64) -> Self {
        Self { system: System::Lv(LvParams { b, h, k, d }), boundary: LV_BOUNDARY, anchor: Anchor::U }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bd = &self.boundary;
        for (name, v) in [("u_minus", bd.u_minus), ("v_minus", bd.v_minus), ("u_plus", bd.u_plus), ("v_plus", bd.v_plus)] {
            if !v.is_finite() {
                return Err(invalid(name_static(name), "must be finite"));
            }
        }
        match self.system {
            System::Ks(p) => {
                if bd.u_minus < 0.0 {
                    return Err(invalid("u_minus", format!("must be >= 0, got {}", bd.u_minus)));
                }
                if bd.u_plus < 0.0 {
                    return Err(invalid("u_plus", format!("must be >= 0, got {}", bd.u_plus)));
                }
                if bd.v_minus > 0.0 {
                    return Err(invalid("v_minus", format!("must be <= 0, got {}", bd.v_minus)));
                }
                if bd.v_plus > 0.0 {
                    return Err(invalid("v_plus", format!("must be <= 0, got {}", bd.v_plus)));
                }
                if !(p.epsilon >= 0.0) {
                    return Err(invalid("epsilon", format!("must be >= 0, got {}", p.epsilon)));
                }
                if !(p.diffusion > 0.0) {
                    return Err(invalid("diffusion", format!("must be > 0, got {}", p.diffusion)));
                }
                if !(p.chi > 0.0) {
                    return Err(invalid("chi", format!("must be > 0, got {}", p.chi)));
                }
            }
            System::Ac(p) => {
                if *bd != AC_BOUNDARY {
                    return Err(invalid("boundary", "Allen-Cahn limits are fixed to (0,0) -> (1,0)"));
                }
                if !(p.alpha > 0.0 && p.alpha < 1.0) {
                    return Err(invalid("alpha", format!("must lie in (0, 1), got {}", p.alpha)));
                }
                if !(p.tau >= 0.0) {
                    return Err(invalid("tau", format!("must be >= 0, got {}", p.tau)));
                }
                let sup = p.tau * ac_max_dh(p.alpha);
                if !(sup < 1.0) {
                    return Err(invalid("tau", format!("admissibility sup tau*h'(u) = {sup} must be < 1")));
                }
            }
            System::Lv(p) => {
                if *bd != LV_BOUNDARY {
                    return Err(invalid("boundary", "Lotka-Volterra limits are fixed to (0,1) -> (1,0)"));
                }
                for (name, v) in [("b", p.b), ("h", p.h), ("k", p.k), ("d", p.d)] {
                    if !(v > 0.0) {
                        return Err(invalid(name_static(name), format!("must be > 0, got {v}")));
                    }
                }
                if !(p.h.min(p.k) > 1.0) {
                    return Err(invalid("h", format!("min(h, k) must exceed 1, got {}", p.h.min(p.k))));
                }
            }
        }
        Ok(())
    }

    /// Residuals written once over any [`Arith`]; `u` and `v` are
    /// `[value, d/dz, d²/dz²]`.
    pub fn residual_with<A: Arith>(&self, ar: &mut A, u: [A::S; 3], v: [A::S; 3], s: A::S) -> (A::S, A::S) {
        match self.system {
            System::Ks(p) => ks_residual_with(ar, &p, u, v, s),
            System::Ac(p) => ac_residual_with(ar, &p, u, v, s),
            System::Lv(p) => lv_residual_with(ar, &p, u, v, s),
        }
    }

    pub fn residual(&self, u: Jet2, v: Jet2, s: f64) -> ResidualPair {
        let (p, q) = self.residual_with(&mut Eval, [u.value, u.d1, u.d2], [v.value, v.d1, v.d2], s);
        ResidualPair { p, q }
    }

    /// Value `Loss_Trans` pins the anchored profile to at `z = 0`.
    pub fn anchor_target(&self) -> f64 {
        match self.anchor {
            Anchor::U => 0.5 * (self.boundary.u_minus + self.boundary.u_plus),
            Anchor::V => 0.5 * (self.boundary.v_minus + self.boundary.v_plus),
        }
    }

    /// Output heads for the U and V networks.
    pub fn default_heads(&self) -> (Head, Head) {
        let bounded = |a: f64, b: f64| Head::Bounded { lo: a.min(b), hi: a.max(b) };
        let bd = &self.boundary;
        let u = bounded(bd.u_minus, bd.u_plus);
        match self.system {
            // V is only known to be positive, not bounded by its limits
            System::Ac(_) => (u, Head::Linear),
            _ => (u, bounded(bd.v_minus, bd.v_plus)),
        }
    }

    /// Known monotonicity of (U, V).
    pub fn monotonicity(&self) -> (Option<Monotone>, Option<Monotone>) {
        use Monotone::*;
        match self.system {
            System::Ks(_) => (Some(Decreasing), Some(Increasing)),
            System::Ac(_) => (Some(Increasing), None),
            System::Lv(_) => (Some(Increasing), Some(Decreasing)),
        }
    }

    /// Closed-form speed when one is known.
    pub fn exact_speed(&self) -> Option<f64> {
        match self.system {
            System::Ks(_) => ks_exact_speed(self).ok(),
            System::Ac(p) if p.tau == 0.0 => Some(ac_speed_tau0(p.alpha)),
            System::Lv(p) if p.h == p.k && p.b == p.d => Some(0.0),
            _ => None,
        }
    }
}

fn name_static(name: &str) -> &'static str {
    match name {
        "u_minus" => "u_minus",
        "v_minus" => "v_minus",
        "u_plus" => "u_plus",
        "v_plus" => "v_plus",
        "b" => "b",
        "h" => "h",
        "k" => "k",
        "d" => "d",
        _ => "model",
    }
}

fn ks_residual_with<A: Arith>(ar: &mut A, p: &KsParams, u: [A::S; 3], v: [A::S; 3], s: A::S) -> (A::S, A::S) {
    // P = s U' + χ (U'V + UV') + D U''
    let su = ar.mul(s, u[1]);
    let a = ar.mul(u[1], v[0]);
    let b = ar.mul(u[0], v[1]);
    let uv1 = ar.add(a, b);
    let chi_uv = ar.scale(uv1, p.chi);
    let du = ar.scale(u[2], p.diffusion);
    let t = ar.add(su, chi_uv);
    let res_p = ar.add(t, du);
    // Q = s V' − (2ε V V' − U') + ε V''
    let sv = ar.mul(s, v[1]);
    let vv = ar.mul(v[0], v[1]);
    let evv = ar.scale(vv, 2.0 * p.epsilon);
    let flux = ar.sub(evv, u[1]);
    let ev = ar.scale(v[2], p.epsilon);
    let t = ar.sub(sv, flux);
    let res_q = ar.add(t, ev);
    (res_p, res_q)
}

fn ac_residual_with<A: Arith>(ar: &mut A, p: &AcParams, u: [A::S; 3], v: [A::S; 3], s: A::S) -> (A::S, A::S) {
    // P = s U' + V' + U(1 − U)(U − α)
    let su = ar.mul(s, u[1]);
    let t = ar.add(su, v[1]);
    let neg = ar.scale(u[0], -1.0);
    let one_minus = ar.offset(neg, 1.0);
    let shifted = ar.offset(u[0], -p.alpha);
    let w = ar.mul(u[0], one_minus);
    let h = ar.mul(w, shifted);
    let res_p = ar.add(t, h);
    // Q = U' + τ s V' − V
    let sv = ar.mul(s, v[1]);
    let tsv = ar.scale(sv, p.tau);
    let t = ar.add(u[1], tsv);
    let res_q = ar.sub(t, v[0]);
    (res_p, res_q)
}

fn lv_residual_with<A: Arith>(ar: &mut A, p: &LvParams, u: [A::S; 3], v: [A::S; 3], s: A::S) -> (A::S, A::S) {
    // P = U'' + s U' + U(1 − U − kV)
    let su = ar.mul(s, u[1]);
    let t = ar.add(u[2], su);
    let kv = ar.scale(v[0], p.k);
    let sum = ar.add(u[0], kv);
    let neg = ar.scale(sum, -1.0);
    let f = ar.offset(neg, 1.0);
    let r = ar.mul(u[0], f);
    let res_p = ar.add(t, r);
    // Q = d V'' + s V' + b V(1 − V − hU)
    let dv = ar.scale(v[2], p.d);
    let sv = ar.mul(s, v[1]);
    let t = ar.add(dv, sv);
    let hu = ar.scale(u[0], p.h);
    let sum = ar.add(v[0], hu);
    let neg = ar.scale(sum, -1.0);
    let g = ar.offset(neg, 1.0);
    let r = ar.mul(v[0], g);
    let br = ar.scale(r, p.b);
    let res_q = ar.add(t, br);
    (res_p, res_q)
}

fn wrong(op: &'static str, spec: &ModelSpec) -> ModelError {
    ModelError::WrongSystem { op, system: spec.system.name() }
}

pub fn ks_residual(u: Jet2, v: Jet2, s: f64, spec: &ModelSpec) -> Result<ResidualPair, ModelError> {
    match spec.system {
        System::Ks(_) => Ok(spec.residual(u, v, s)),
        _ => Err(wrong("ks_residual", spec)),
    }
}

pub fn ac_residual(u: Jet2, v: Jet2, s: f64, spec: &ModelSpec) -> Result<ResidualPair, ModelError> {
    match spec.system {
        System::Ac(_) => Ok(spec.residual(u, v, s)),
        _ => Err(wrong("ac_residual", spec)),
    }
}

pub fn lv_residual(u: Jet2, v: Jet2, s: f64, spec: &ModelSpec) -> Result<ResidualPair, ModelError> {
    match spec.system {
        System::Lv(_) => Ok(spec.residual(u, v, s)),
        _ => Err(wrong("lv_residual", spec)),
    }
}

/// Unique Keller–Segel speed for admissible limits.
pub fn ks_exact_speed(spec: &ModelSpec) -> Result<f64, ModelError> {
    let System::Ks(p) = spec.system else {
        return Err(wrong("ks_exact_speed", spec));
    };
    let Boundary { u_minus, v_minus, u_plus, v_plus } = spec.boundary;
    if u_plus == u_minus {
        return Err(ModelError::Domain("ks_exact_speed: u_plus equals u_minus".into()));
    }
    let bracket = 1.0 - p.epsilon * (v_plus * v_plus - v_minus * v_minus) / (u_plus - u_minus);
    let radicand = p.chi * p.chi * v_minus * v_minus + 4.0 * u_plus * p.chi * bracket;
    if radicand < 0.0 {
        return Err(ModelError::Domain(format!("ks_exact_speed: negative radicand {radicand}")));
    }
    Ok(-p.chi * v_minus / 2.0 + 0.5 * radicand.sqrt())
}

/// Residual of the limit-compatibility constraint; zero when admissible.
pub fn ks_compatibility(spec: &ModelSpec) -> Result<f64, ModelError> {
    let System::Ks(p) = spec.system else {
        return Err(wrong("ks_compatibility", spec));
    };
    let Boundary { u_minus, v_minus, u_plus, v_plus } = spec.boundary;
    let denom = p.epsilon * v_plus * v_plus - p.epsilon * v_minus * v_minus + u_minus - u_plus;
    if v_plus == v_minus || denom == 0.0 {
        return Err(ModelError::Domain("ks_compatibility: zero denominator".into()));
    }
    Ok((u_plus - u_minus) / (v_plus - v_minus) - p.chi * (u_minus * v_minus - u_plus * v_plus) / denom)
}

/// `h(u) = u(1 − u)(u − α)`.
pub fn ac_reaction(u: f64, alpha: f64) -> f64 {
    u * (1.0 - u) * (u - alpha)
}

pub fn ac_reaction_derivative(u: f64, alpha: f64) -> f64 {
    -3.0 * u * u + 2.0 * (1.0 + alpha) * u - alpha
}

/// `sup_{u∈[0,1]} h'(u)`, attained at `u = (1 + α)/3`.
pub fn ac_max_dh(alpha: f64) -> f64 {
    (1.0 - alpha + alpha * alpha) / 3.0
}

/// Exact speed of the relaxation-free (τ = 0) Allen–Cahn front.
pub fn ac_speed_tau0(alpha: f64) -> f64 {
    std::f64::consts::SQRT_2 * (alpha - 0.5)
}

/// Lower and (exclusive) upper bound on the Allen–Cahn relaxation speed.
/// The upper bound is infinite for τ = 0.
pub fn ac_speed_bounds(tau: f64, alpha: f64) -> (f64, f64) {
    let c = 1.0 - 2.0 * alpha + 2.0 * alpha * alpha;
    let a = 1.0 - 0.2 * c * tau;
    let b = 1.0 - 2.0 * alpha;
    let lower = ac_speed_tau0(alpha) / (a * a + 0.5 * tau * b * b).sqrt();
    let upper = if tau > 0.0 { 1.0 / tau.sqrt() } else { f64::INFINITY };
    (lower, upper)
}

/// `−∫₀¹ h(u) du = (2α − 1)/12`.
pub fn ac_neg_reaction_integral(alpha: f64) -> f64 {
    (2.0 * alpha - 1.0) / 12.0
}

pub fn speed_sign(spec: &ModelSpec) -> Result<Sign, ModelError> {
    match spec.system {
        System::Ac(p) => Ok(Sign::of(ac_neg_reaction_integral(p.alpha))),
        System::Lv(p) if p.b == p.d => Ok(Sign::of(p.k - p.h)),
        System::Lv(_) => Ok(Sign::Unknown),
        System::Ks(_) => Err(wrong("speed_sign", spec)),
    }
}

/// Lipschitz constant of the first-order traveling-wave system, used in
/// the Gronwall error bound.
pub fn lipschitz_k(spec: &ModelSpec, s: f64) -> Result<f64, ModelError> {
    match spec.system {
        System::Ks(p) => {
            if p.epsilon == 0.0 {
                return Err(ModelError::Domain("lipschitz_k: undefined for epsilon = 0".into()));
            }
            let bd = &spec.boundary;
            let e = p.epsilon;
            let d = p.diffusion;
            Ok((((s + p.chi * bd.v_plus) / d).powi(2)
                + (p.chi * bd.u_plus / d).powi(2)
                + (1.0 / e).powi(2)
                + ((-s + 2.0 * e * bd.v_minus) / e).powi(2))
            .sqrt())
        }
        System::Ac(p) => {
            let denom = 1.0 - p.tau * s * s;
            if denom <= 0.0 {
                return Err(ModelError::Domain(format!("lipschitz_k: tau*s^2 = {} >= 1", p.tau * s * s)));
            }
            let a = p.alpha;
            Ok(((p.tau * s * a).powi(2) + a * a + s * s + 1.0).sqrt() / denom)
        }
        System::Lv(p) => {
            // the growth-rate coefficient written `a` in the bound is b here
            let (a, b, h, k, d) = (p.b, p.b, p.h, p.k, p.d);
            Ok(((s + 2.0 * a * b - 2.0 * a * k).powi(2)
                + (2.0 * a * k).powi(2)
                + (2.0 * a * b * h).powi(2) / (d * d)
                + (s.abs() + 2.0 * b * h + 2.0 * a * b * h).powi(2) / (d * d))
                .sqrt())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn ks0() -> ModelSpec {
        ModelSpec::ks(0.0, 2.0, 0.5, Boundary { u_minus: 2.0, v_minus: -1.0, u_plus: 1.0, v_plus: 0.0 })
    }

    fn ks01() -> ModelSpec {
        ModelSpec::ks(0.1, 2.0, 0.9, Boundary { u_minus: 1.0, v_minus: -1.0, u_plus: 0.0, v_plus: 0.0 })
    }

    fn c(v: f64) -> Jet2 {
        Jet2::constant(v)
    }

    #[test]
    fn ks_residual_examples() {
        let spec = ks0();
        for s in [-1.0, 0.0, 0.7] {
            let r = ks_residual(c(2.0), c(-1.0), s, &spec).unwrap();
            assert_eq!((r.p, r.q), (0.0, 0.0));
        }
        let r = ks_residual(Jet2::new(1.5, -0.1, 0.02), Jet2::new(-0.5, 0.2, 0.01), 1.0, &spec).unwrap();
        assert_abs_diff_eq!(r.p, 0.115, epsilon = 1e-15);
        assert_abs_diff_eq!(r.q, 0.1, epsilon = 1e-15);
        let r = ks_residual(Jet2::new(1.5, 0.0, 0.0), Jet2::new(-0.5, 0.0, 0.0), 1.0, &spec).unwrap();
        assert_eq!((r.p, r.q), (0.0, 0.0));
        assert!(ks_residual(c(0.0), c(0.0), 0.0, &ModelSpec::ac(0.0, 0.7)).is_err());
    }

    #[test]
    fn ac_residual_examples() {
        let spec = ModelSpec::ac(0.0, 0.7);
        let r = ac_residual(c(0.0), c(0.0), 0.3, &spec).unwrap();
        assert_eq!((r.p, r.q), (0.0, 0.0));
        let r = ac_residual(c(1.0), c(0.0), 0.3, &spec).unwrap();
        assert_eq!((r.p, r.q), (0.0, 0.0));
        let r = ac_residual(Jet2::new(0.5, 0.1, 0.0), Jet2::new(0.02, -0.01, 0.0), 0.283, &spec).unwrap();
        assert_abs_diff_eq!(r.p, -0.0317, epsilon = 1e-12);
        assert_abs_diff_eq!(r.q, 0.08, epsilon = 1e-15);
    }

    #[test]
    fn lv_residual_examples() {
        let spec = ModelSpec::lv(2.0, 2.0, 3.0, 2.0);
        let r = lv_residual(c(0.0), c(1.0), 0.36, &spec).unwrap();
        assert_eq!((r.p, r.q), (0.0, 0.0));
        let r = lv_residual(c(1.0), c(0.0), 0.36, &spec).unwrap();
        assert_eq!((r.p, r.q), (0.0, 0.0));
        let r = lv_residual(Jet2::new(0.5, 0.2, 0.01), Jet2::new(0.5, -0.2, 0.01), 0.36, &spec).unwrap();
        assert_abs_diff_eq!(r.p, -0.418, epsilon = 1e-12);
        assert_abs_diff_eq!(r.q, -0.552, epsilon = 1e-12);
    }

    #[test]
    fn equilibria_give_exact_zero() {
        for spec in [ks0(), ks01(), ModelSpec::ac(1.0, 0.8), ModelSpec::lv(2.0, 3.0, 2.0, 2.0)] {
            let bd = spec.boundary;
            for (u, v) in [(bd.u_minus, bd.v_minus), (bd.u_plus, bd.v_plus)] {
                for s in [-0.5, 0.0, 0.9] {
                    let r = spec.residual(c(u), c(v), s);
                    assert_eq!((r.p, r.q), (0.0, 0.0), "{spec:?}");
                }
            }
        }
    }

    #[test]
    fn ks_speed_examples() {
        assert_abs_diff_eq!(ks_exact_speed(&ks0()).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(ks_exact_speed(&ks01()).unwrap(), 0.9, epsilon = 1e-15);
        let mut s = ks0();
        s.system = System::Ks(KsParams { epsilon: 0.0, diffusion: 2.0, chi: 0.0 });
        assert_eq!(ks_exact_speed(&s).unwrap(), 0.0);
        // ε = 0: u₋ enters only through the ε term
        let mut moved = ks0();
        moved.boundary.u_minus = 5.0;
        assert_eq!(ks_exact_speed(&moved).unwrap(), ks_exact_speed(&ks0()).unwrap());
        let mut neg = ks0();
        neg.system = System::Ks(KsParams { epsilon: 10.0, diffusion: 2.0, chi: 0.5 });
        neg.boundary.v_minus = -3.0;
        assert!(matches!(ks_exact_speed(&neg), Err(ModelError::Domain(_))));
    }

    #[test]
    fn ks_compatibility_examples() {
        assert_abs_diff_eq!(ks_compatibility(&ks0()).unwrap(), 0.0, epsilon = 1e-15);
        let mismatched = ModelSpec::ks(0.0, 2.0, 0.9, ks01().boundary);
        assert_abs_diff_eq!(ks_compatibility(&mismatched).unwrap(), -0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(ks_compatibility(&ks01()).unwrap(), 0.0, epsilon = 1e-15);
        let mut degenerate = ks0();
        degenerate.boundary.v_plus = -1.0;
        assert!(ks_compatibility(&degenerate).is_err());
    }

    #[test]
    fn ac_speed_values() {
        assert_eq!(ac_speed_tau0(0.5), 0.0);
        assert_abs_diff_eq!(ac_speed_tau0(0.6), 0.141, epsilon = 5e-4);
        assert_abs_diff_eq!(ac_speed_tau0(0.9), 0.566, epsilon = 5e-4);
        assert_abs_diff_eq!(ac_speed_bounds(1.0, 0.6).0, 0.156, epsilon = 5e-4);
        assert_abs_diff_eq!(ac_speed_bounds(2.0, 0.7).1, 0.707, epsilon = 5e-4);
        let (lo, hi) = ac_speed_bounds(0.0, 0.8);
        assert_eq!(lo, ac_speed_tau0(0.8));
        assert!(hi.is_infinite());
    }

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut acc = f(a) + f(b);
        for i in 1..n {
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
        }
        acc * h / 3.0
    }

    #[test]
    fn reaction_integral_matches_quadrature() {
        for alpha in [0.1, 0.3, 0.5, 0.6, 0.7, 0.9] {
            let q = -simpson(|u| ac_reaction(u, alpha), 0.0, 1.0, 1000);
            assert_abs_diff_eq!(ac_neg_reaction_integral(alpha), q, epsilon = 1e-14);
        }
        let q = -simpson(|u| ac_reaction(u, 0.7), 0.0, 1.0, 1000);
        assert!(q > 0.0);
        assert_eq!(speed_sign(&ModelSpec::ac(0.0, 0.7)).unwrap(), Sign::Positive);
        assert_eq!(speed_sign(&ModelSpec::ac(0.0, 0.5)).unwrap(), Sign::Zero);
    }

    #[test]
    fn max_reaction_slope_matches_scan() {
        for alpha in [0.2, 0.6, 0.9] {
            let scan = (0..=10_000).map(|i| ac_reaction_derivative(i as f64 / 1e4, alpha)).fold(f64::MIN, f64::max);
            assert_abs_diff_eq!(ac_max_dh(alpha), scan, epsilon = 1e-7);
        }
    }

    #[test]
    fn lv_signs() {
        assert_eq!(speed_sign(&ModelSpec::lv(2.0, 2.0, 2.0, 2.0)).unwrap(), Sign::Zero);
        assert_eq!(speed_sign(&ModelSpec::lv(2.0, 2.0, 3.0, 2.0)).unwrap(), Sign::Positive);
        assert_eq!(speed_sign(&ModelSpec::lv(2.0, 3.0, 2.0, 2.0)).unwrap(), Sign::Negative);
        assert_eq!(speed_sign(&ModelSpec::lv(1.0, 3.0, 2.0, 2.0)).unwrap(), Sign::Unknown);
        assert!(speed_sign(&ks0()).is_err());
    }

    #[test]
    fn lipschitz_examples() {
        let k = lipschitz_k(&ModelSpec::ac(0.0, 0.7), 0.283).unwrap();
        assert_abs_diff_eq!(k, (0.49f64 + 0.080089 + 1.0).sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(k, 1.2530, epsilon = 5e-5);
        assert!(matches!(lipschitz_k(&ks0(), 1.0), Err(ModelError::Domain(_))));
        assert!(matches!(lipschitz_k(&ModelSpec::ac(1.0, 0.7), 1.0), Err(ModelError::Domain(_))));
        let ks = lipschitz_k(&ks01(), 0.9).unwrap();
        let expected = ((0.9f64 / 2.0).powi(2) + 0.0 + 100.0 + ((-0.9 - 0.2) / 0.1f64).powi(2)).sqrt();
        assert_abs_diff_eq!(ks, expected, epsilon = 1e-12);
        assert!(lipschitz_k(&ModelSpec::lv(2.0, 2.0, 3.0, 2.0), 0.36).unwrap() > 0.0);
    }

    #[test]
    fn validation_rules() {
        assert!(ks0().validate().is_ok());
        let mut bad = ks0();
        bad.boundary.u_minus = -1.0;
        assert!(matches!(bad.validate(), Err(ModelError::Invalid { field: "u_minus", .. })));
        let mut bad = ks0();
        bad.boundary.v_plus = 0.5;
        assert!(bad.validate().is_err());
        assert!(ModelSpec::ac(3.0, 0.9).validate().is_ok());
        assert!(ModelSpec::ac(4.0, 0.9).validate().is_err());
        assert!(ModelSpec::ac(0.0, 1.0).validate().is_err());
        assert!(ModelSpec::lv(2.0, 1.0, 3.0, 2.0).validate().is_err());
        let mut shifted = ModelSpec::lv(2.0, 2.0, 3.0, 2.0);
        shifted.boundary.u_plus = 2.0;
        assert!(shifted.validate().is_err());
    }

    #[test]
    fn heads_follow_limits() {
        let (u, v) = ks0().default_heads();
        assert_eq!(u, Head::Bounded { lo: 1.0, hi: 2.0 });
        assert_eq!(v, Head::Bounded { lo: -1.0, hi: 0.0 });
        let (u, v) = ModelSpec::ac(1.0, 0.7).default_heads();
        assert_eq!(u, Head::Bounded { lo: 0.0, hi: 1.0 });
        assert_eq!(v, Head::Linear);
        assert_eq!(ModelSpec::lv(2.0, 2.0, 2.0, 2.0).anchor_target(), 0.5);
        assert_eq!(ks0().anchor_target(), 1.5);
    }
}
