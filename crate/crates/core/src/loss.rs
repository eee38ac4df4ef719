//! Collocation losses: equation residuals, endpoint limits, endpoint
//! Neumann conditions and the translation anchor.
//!
//! Three evaluation paths share the same formulas:
//! [`Objective::evaluate`] (values only), [`Objective::value_and_grad`]
//! (batched backprop, used in training) and [`Objective::record_total`]
//! (scalar tape, the reference the fast path is checked against).

use rand::distributions::{Distribution, Uniform};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{Arith, Eval, Jet2, Tape, TapeJet, Var};
use crate::models::{Anchor, ModelSpec, System};
use crate::network::{BatchJets, CharacteristicMap, NetworkError, Networks};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LossError {
    #[error("collocation batch is empty")]
    EmptyBatch,
    #[error("collocation point {index} = {value} lies outside [-{half_width}, {half_width}]")]
    OutOfRange { index: usize, value: f64, half_width: f64 },
    #[error("half-width must be positive, got {0}")]
    HalfWidth(f64),
    #[error("times length {got} does not match {expected} points")]
    Times { expected: usize, got: usize },
    #[error("expected two profile networks (U, V), got {0}")]
    NetCount(usize),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// `ge1 + ge2 + limit + bc + trans`.
    #[default]
    Uniform,
    /// `(ge1 + ge2)/(2a) + limit + bc + trans`.
    GeScaled,
}

impl Weighting {
    /// Keller–Segel sums the parts as they are; the others scale the
    /// equation terms by the interval length.
    pub fn default_for(model: &ModelSpec) -> Self {
        match model.system {
            System::Ks(_) => Weighting::Uniform,
            System::Ac(_) | System::Lv(_) => Weighting::GeScaled,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossOptions {
    pub weighting: Weighting,
    /// Whether the Neumann term enters the total (it is always reported).
    pub use_bc: bool,
}

impl Default for LossOptions {
    fn default() -> Self {
        Self { weighting: Weighting::Uniform, use_bc: true }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub ge1: f64,
    pub ge2: f64,
    pub limit: f64,
    pub bc: f64,
    pub trans: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn new(ge1: f64, ge2: f64, limit: f64, bc: f64, trans: f64, opts: LossOptions, a: f64) -> Self {
        let mut b = Self { ge1, ge2, limit, bc, trans, total: 0.0 };
        b.total = loss_total(&b, opts, a);
        b
    }

    pub fn is_finite(&self) -> bool {
        [self.ge1, self.ge2, self.limit, self.bc, self.trans, self.total].iter().all(|x| x.is_finite())
    }
}

/// Weighted total of the parts; `parts.total` is ignored.
pub fn loss_total(parts: &LossBreakdown, opts: LossOptions, a: f64) -> f64 {
    let ge = match opts.weighting {
        Weighting::Uniform => parts.ge1 + parts.ge2,
        Weighting::GeScaled => (parts.ge1 + parts.ge2) / (2.0 * a),
    };
    let bc = if opts.use_bc { parts.bc } else { 0.0 };
    ge + parts.limit + bc + parts.trans
}

/// Collocation points in the traveling coordinate.
///
/// `points` hold the speed-independent part of `z` (`k·x`); when `times`
/// is non-empty the network input is `zᵢ = pointsᵢ − s·tᵢ`.
#[derive(Clone, Debug, PartialEq)]
pub struct CollocationBatch {
    points: Vec<f64>,
    times: Vec<f64>,
    half_width: f64,
}

impl CollocationBatch {
    pub fn new(points: Vec<f64>, half_width: f64) -> Result<Self, LossError> {
        Self::with_times(points, Vec::new(), half_width)
    }

    pub fn with_times(points: Vec<f64>, times: Vec<f64>, half_width: f64) -> Result<Self, LossError> {
        if !(half_width > 0.0) {
            return Err(LossError::HalfWidth(half_width));
        }
        if points.is_empty() {
            return Err(LossError::EmptyBatch);
        }
        if !times.is_empty() && times.len() != points.len() {
            return Err(LossError::Times { expected: points.len(), got: times.len() });
        }
        if let Some((index, &value)) = points.iter().enumerate().find(|(_, p)| !(p.abs() <= half_width)) {
            return Err(LossError::OutOfRange { index, value, half_width });
        }
        Ok(Self { points, times, half_width })
    }

    /// `m` i.i.d. uniform points on `[−a, a]`.
    pub fn uniform<R: Rng>(rng: &mut R, m: usize, a: f64) -> Result<Self, LossError> {
        if !(a > 0.0) {
            return Err(LossError::HalfWidth(a));
        }
        let dist = Uniform::new_inclusive(-a, a);
        Self::new((0..m).map(|_| dist.sample(rng)).collect(), a)
    }

    /// `m` evenly spaced points from `−a` to `a` inclusive.
    pub fn grid(m: usize, a: f64) -> Result<Self, LossError> {
        Self::new(linspace(-a, a, m), a)
    }

    /// `m` space-time samples: `x` uniform in `[−a, a]ⁿ`, `t` uniform in
    /// `[t0, t1]`. The z half-width becomes `a·‖k‖₁`.
    pub fn spacetime<R: Rng>(
        rng: &mut R,
        map: &CharacteristicMap,
        m: usize,
        a: f64,
        (t0, t1): (f64, f64),
    ) -> Result<Self, LossError> {
        if !(a > 0.0) {
            return Err(LossError::HalfWidth(a));
        }
        let xd = Uniform::new_inclusive(-a, a);
        let td = Uniform::new_inclusive(t0, t1);
        let mut x = vec![0.0; map.dim()];
        let mut points = Vec::with_capacity(m);
        let mut times = Vec::with_capacity(m);
        for _ in 0..m {
            for c in x.iter_mut() {
                *c = xd.sample(rng);
            }
            points.push(map.project(&x)?);
            times.push(td.sample(rng));
        }
        let reach = a * map.direction().iter().map(|k| k.abs()).sum::<f64>();
        Self::with_times(points, times, reach)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn time(&self, i: usize) -> f64 {
        self.times.get(i).copied().unwrap_or(0.0)
    }

    /// Network inputs at speed `s`.
    pub fn inputs(&self, s: f64) -> Vec<f64> {
        (0..self.points.len()).map(|i| self.points[i] - s * self.time(i)).collect()
    }
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| if i == n - 1 { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 }).collect(),
    }
}

fn check_nets(nets: &Networks, params: &[f64]) -> Result<(), LossError> {
    if nets.nets().len() != 2 {
        return Err(LossError::NetCount(nets.nets().len()));
    }
    nets.check_shape(params)?;
    Ok(())
}

fn profile_at(nets: &Networks, params: &[f64], z: f64) -> (Jet2, Jet2) {
    let z = Jet2::variable(z);
    (nets.net(0).forward(params, z), nets.net(1).forward(params, z))
}

/// `(2a/m)·Σ pᵢ²` and `(2a/m)·Σ qᵢ²`.
pub fn loss_ge(model: &ModelSpec, nets: &Networks, params: &[f64], batch: &CollocationBatch) -> Result<(f64, f64), LossError> {
    check_nets(nets, params)?;
    if batch.is_empty() {
        return Err(LossError::EmptyBatch);
    }
    let s = params[nets.speed_index()];
    let zs = batch.inputs(s);
    let (u, _) = nets.net(0).forward_batch(params, &zs);
    let (v, _) = nets.net(1).forward_batch(params, &zs);
    Ok(ge_from_jets(model, &u, &v, s, batch.half_width()))
}

fn ge_from_jets(model: &ModelSpec, u: &BatchJets, v: &BatchJets, s: f64, a: f64) -> (f64, f64) {
    let m = u.len();
    let (mut sp, mut sq) = (0.0, 0.0);
    for i in 0..m {
        let (p, q) = model.residual_with(&mut Eval, [u.value[i], u.d1[i], u.d2[i]], [v.value[i], v.d1[i], v.d2[i]], s);
        sp += p * p;
        sq += q * q;
    }
    let c = 2.0 * a / m as f64;
    (c * sp, c * sq)
}

/// Squared deviation of both profiles from their limits at `z = ±a`.
pub fn loss_limit(model: &ModelSpec, nets: &Networks, params: &[f64], a: f64) -> Result<f64, LossError> {
    check_nets(nets, params)?;
    let bd = &model.boundary;
    let (ul, vl) = profile_at(nets, params, -a);
    let (ur, vr) = profile_at(nets, params, a);
    Ok(sq(ul.value - bd.u_minus) + sq(ur.value - bd.u_plus) + sq(vl.value - bd.v_minus) + sq(vr.value - bd.v_plus))
}

/// Squared first derivatives of both profiles at `z = ±a`.
pub fn loss_bc(nets: &Networks, params: &[f64], a: f64) -> Result<f64, LossError> {
    check_nets(nets, params)?;
    let (ul, vl) = profile_at(nets, params, -a);
    let (ur, vr) = profile_at(nets, params, a);
    Ok(sq(ul.d1) + sq(ur.d1) + sq(vl.d1) + sq(vr.d1))
}

/// Squared deviation of the anchored profile at `z = 0` from the mean of
/// its limits.
pub fn loss_trans(model: &ModelSpec, nets: &Networks, params: &[f64]) -> Result<f64, LossError> {
    check_nets(nets, params)?;
    let (u, v) = profile_at(nets, params, 0.0);
    let x = match model.anchor {
        Anchor::U => u.value,
        Anchor::V => v.value,
    };
    Ok(sq(x - model.anchor_target()))
}

#[inline]
fn sq(x: f64) -> f64 {
    x * x
}

/// Value plus gradient with respect to `(u, u', u'', v, v', v'', s)`.
#[derive(Clone, Copy, Debug)]
struct Lin {
    v: f64,
    g: [f64; 7],
}

impl Lin {
    fn seed(v: f64, slot: usize) -> Self {
        let mut g = [0.0; 7];
        g[slot] = 1.0;
        Self { v, g }
    }
}

/// Forward-mode linearization of the residual at one point.
struct Linearize;

impl Arith for Linearize {
    type S = Lin;

    fn cst(&mut self, c: f64) -> Lin {
        Lin { v: c, g: [0.0; 7] }
    }
    fn add(&mut self, a: Lin, b: Lin) -> Lin {
        Lin { v: a.v + b.v, g: std::array::from_fn(|k| a.g[k] + b.g[k]) }
    }
    fn sub(&mut self, a: Lin, b: Lin) -> Lin {
        Lin { v: a.v - b.v, g: std::array::from_fn(|k| a.g[k] - b.g[k]) }
    }
    fn mul(&mut self, a: Lin, b: Lin) -> Lin {
        Lin { v: a.v * b.v, g: std::array::from_fn(|k| a.g[k] * b.v + a.v * b.g[k]) }
    }
    fn scale(&mut self, a: Lin, c: f64) -> Lin {
        Lin { v: c * a.v, g: std::array::from_fn(|k| c * a.g[k]) }
    }
    fn offset(&mut self, a: Lin, c: f64) -> Lin {
        Lin { v: a.v + c, g: a.g }
    }
}

/// Loss of one model/network pair with fixed options.
#[derive(Clone, Copy, Debug)]
pub struct Objective<'a> {
    pub model: &'a ModelSpec,
    pub nets: &'a Networks,
    pub opts: LossOptions,
}

impl<'a> Objective<'a> {
    pub fn new(model: &'a ModelSpec, nets: &'a Networks, opts: LossOptions) -> Self {
        Self { model, nets, opts }
    }

    /// Appends the boundary evaluation points `−a, a, 0` to the batch inputs.
    fn inputs(&self, params: &[f64], batch: &CollocationBatch) -> Vec<f64> {
        let s = params[self.nets.speed_index()];
        let a = batch.half_width();
        let mut zs = batch.inputs(s);
        zs.extend([-a, a, 0.0]);
        zs
    }

    fn boundary_parts(&self, u: &BatchJets, v: &BatchJets, m: usize) -> (f64, f64, f64) {
        let bd = &self.model.boundary;
        let (l, r, o) = (m, m + 1, m + 2);
        let limit = sq(u.value[l] - bd.u_minus) + sq(u.value[r] - bd.u_plus) + sq(v.value[l] - bd.v_minus) + sq(v.value[r] - bd.v_plus);
        let bc = sq(u.d1[l]) + sq(u.d1[r]) + sq(v.d1[l]) + sq(v.d1[r]);
        let anchored = match self.model.anchor {
            Anchor::U => u.value[o],
            Anchor::V => v.value[o],
        };
        (limit, bc, sq(anchored - self.model.anchor_target()))
    }

    pub fn evaluate(&self, params: &[f64], batch: &CollocationBatch) -> Result<LossBreakdown, LossError> {
        check_nets(self.nets, params)?;
        let s = params[self.nets.speed_index()];
        let m = batch.len();
        let zs = self.inputs(params, batch);
        let (u, _) = self.nets.net(0).forward_batch(params, &zs);
        let (v, _) = self.nets.net(1).forward_batch(params, &zs);
        let (mut sp, mut sq_) = (0.0, 0.0);
        for i in 0..m {
            let (p, q) = self.model.residual_with(&mut Eval, [u.value[i], u.d1[i], u.d2[i]], [v.value[i], v.d1[i], v.d2[i]], s);
            sp += p * p;
            sq_ += q * q;
        }
        let c = 2.0 * batch.half_width() / m as f64;
        let (limit, bc, trans) = self.boundary_parts(&u, &v, m);
        Ok(LossBreakdown::new(c * sp, c * sq_, limit, bc, trans, self.opts, batch.half_width()))
    }

    /// Loss parts and `∂total/∂params`, written into `grad` (overwritten).
    pub fn value_and_grad(&self, params: &[f64], batch: &CollocationBatch, grad: &mut [f64]) -> Result<LossBreakdown, LossError> {
        check_nets(self.nets, params)?;
        if grad.len() != params.len() {
            return Err(NetworkError::Shape { expected: params.len(), got: grad.len() }.into());
        }
        grad.iter_mut().for_each(|g| *g = 0.0);
        let si = self.nets.speed_index();
        let s = params[si];
        let m = batch.len();
        let a = batch.half_width();
        let zs = self.inputs(params, batch);
        let (u, cu) = self.nets.net(0).forward_batch(params, &zs);
        let (v, cv) = self.nets.net(1).forward_batch(params, &zs);

        let c = 2.0 * a / m as f64;
        let w_ge = match self.opts.weighting {
            Weighting::Uniform => c,
            Weighting::GeScaled => c / (2.0 * a),
        };
        let mut gu = BatchJets::zeros(m + 3);
        let mut gv = BatchJets::zeros(m + 3);
        let (mut sp, mut sq_) = (0.0, 0.0);
        let mut gs = 0.0;
        for i in 0..m {
            let ui = [Lin::seed(u.value[i], 0), Lin::seed(u.d1[i], 1), Lin::seed(u.d2[i], 2)];
            let vi = [Lin::seed(v.value[i], 3), Lin::seed(v.d1[i], 4), Lin::seed(v.d2[i], 5)];
            let (p, q) = self.model.residual_with(&mut Linearize, ui, vi, Lin::seed(s, 6));
            sp += p.v * p.v;
            sq_ += q.v * q.v;
            let (wp, wq) = (2.0 * w_ge * p.v, 2.0 * w_ge * q.v);
            let g: [f64; 7] = std::array::from_fn(|k| wp * p.g[k] + wq * q.g[k]);
            gu.value[i] = g[0];
            gu.d1[i] = g[1];
            gu.d2[i] = g[2];
            gv.value[i] = g[3];
            gv.d1[i] = g[4];
            gv.d2[i] = g[5];
            gs += g[6];
        }

        let bd = &self.model.boundary;
        let (l, r, o) = (m, m + 1, m + 2);
        gu.value[l] = 2.0 * (u.value[l] - bd.u_minus);
        gu.value[r] = 2.0 * (u.value[r] - bd.u_plus);
        gv.value[l] = 2.0 * (v.value[l] - bd.v_minus);
        gv.value[r] = 2.0 * (v.value[r] - bd.v_plus);
        if self.opts.use_bc {
            gu.d1[l] = 2.0 * u.d1[l];
            gu.d1[r] = 2.0 * u.d1[r];
            gv.d1[l] = 2.0 * v.d1[l];
            gv.d1[r] = 2.0 * v.d1[r];
        }
        let target = self.model.anchor_target();
        match self.model.anchor {
            Anchor::U => gu.value[o] = 2.0 * (u.value[o] - target),
            Anchor::V => gv.value[o] = 2.0 * (v.value[o] - target),
        }

        let gzu = self.nets.net(0).backward_batch(params, &cu, &gu, grad);
        let gzv = self.nets.net(1).backward_batch(params, &cv, &gv, grad);
        if !batch.times().is_empty() {
            for i in 0..m {
                gs -= (gzu[i] + gzv[i]) * batch.times()[i];
            }
        }
        grad[si] += gs;

        let (limit, bc, trans) = self.boundary_parts(&u, &v, m);
        Ok(LossBreakdown::new(c * sp, c * sq_, limit, bc, trans, self.opts, a))
    }

    /// Records the five parts on a tape whose leaves are the parameters.
    /// The equation terms carry the factor `2a/m` but no weighting.
    pub fn record_terms(&self, tape: &mut Tape, leaves: &[Var], batch: &CollocationBatch) -> TermVars {
        let speed = leaves[self.nets.speed_index()];
        let m = batch.len();
        let a = batch.half_width();
        let c = 2.0 * a / m as f64;
        let forward = |tape: &mut Tape, z: TapeJet| {
            (self.nets.net(0).forward_tape(tape, leaves, z), self.nets.net(1).forward_tape(tape, leaves, z))
        };
        let mut ps = Vec::with_capacity(m);
        let mut qs = Vec::with_capacity(m);
        for i in 0..m {
            let st = tape.scale(speed, -batch.time(i));
            let value = tape.offset(st, batch.points()[i]);
            let z = TapeJet { value, d1: tape.constant(1.0), d2: tape.constant(0.0) };
            let (u, v) = forward(tape, z);
            let (p, q) = self.model.residual_with(tape, [u.value, u.d1, u.d2], [v.value, v.d1, v.d2], speed);
            ps.push(tape.square(p));
            qs.push(tape.square(q));
        }
        let sp = tape.sum(&ps);
        let sq_ = tape.sum(&qs);
        let ge1 = tape.scale(sp, c);
        let ge2 = tape.scale(sq_, c);

        let bd = self.model.boundary;
        let at = |tape: &mut Tape, z: f64| {
            let z = TapeJet { value: tape.constant(z), d1: tape.constant(1.0), d2: tape.constant(0.0) };
            forward(tape, z)
        };
        let dev = |tape: &mut Tape, x: Var, target: f64| {
            let d = tape.offset(x, -target);
            tape.square(d)
        };
        let (ul, vl) = at(tape, -a);
        let (ur, vr) = at(tape, a);
        let lim = [dev(tape, ul.value, bd.u_minus), dev(tape, ur.value, bd.u_plus), dev(tape, vl.value, bd.v_minus), dev(tape, vr.value, bd.v_plus)];
        let limit = tape.sum(&lim);
        let bcs: Vec<Var> = [ul.d1, ur.d1, vl.d1, vr.d1].into_iter().map(|d| tape.square(d)).collect();
        let bc = tape.sum(&bcs);
        let (u0, v0) = at(tape, 0.0);
        let anchored = match self.model.anchor {
            Anchor::U => u0.value,
            Anchor::V => v0.value,
        };
        let trans = dev(tape, anchored, self.model.anchor_target());
        TermVars { ge1, ge2, limit, bc, trans }
    }

    /// Records the weighted total on a tape whose leaves are the parameters.
    pub fn record_total(&self, tape: &mut Tape, leaves: &[Var], batch: &CollocationBatch) -> Var {
        let t = self.record_terms(tape, leaves, batch);
        let ge = tape.add(t.ge1, t.ge2);
        let ge = match self.opts.weighting {
            Weighting::Uniform => ge,
            Weighting::GeScaled => tape.scale(ge, 1.0 / (2.0 * batch.half_width())),
        };
        let mut parts = vec![ge, t.limit];
        if self.opts.use_bc {
            parts.push(t.bc);
        }
        parts.push(t.trans);
        tape.sum(&parts)
    }
}

/// Tape handles of the loss parts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TermVars {
    pub ge1: Var,
    pub ge2: Var,
    pub limit: Var,
    pub bc: Var,
    pub trans: Var,
}
