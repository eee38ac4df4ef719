//! Adam training loop with per-epoch collocation resampling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{Jet2, ParamStore};
use crate::loss::{CollocationBatch, LossBreakdown, LossError, LossOptions, Objective, Weighting};
use crate::models::{ks_compatibility, Monotone, ModelError, ModelSpec, System};
use crate::network::{CharacteristicMap, NetworkConfig, NetworkError, Networks};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainError {
    #[error("invalid training parameter `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("non-finite gradient at parameter {index}")]
    NonFiniteGradient { index: usize },
    #[error("state of length {got} does not match {expected} parameters")]
    StateShape { expected: usize, got: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Loss(#[from] LossError),
}

fn invalid(field: &'static str, reason: impl Into<String>) -> TrainError {
    TrainError::Invalid { field, reason: reason.into() }
}

/// How collocation points are drawn.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum Sampling {
    /// `z` uniform on `[−a, a]`.
    #[default]
    Ansatz,
    /// `x` uniform on `[−a, a]ⁿ`, `t` uniform on `t_window`, network input
    /// `k·x − s·t`.
    Spacetime { direction: Vec<f64>, t_window: (f64, f64) },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub half_width: f64,
    pub collocation: usize,
    pub epochs: usize,
    pub lr_weights: f64,
    pub lr_speed: f64,
    pub decay_factor: f64,
    pub decay_interval: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_adam: f64,
    pub weighting: Weighting,
    pub use_bc: bool,
    pub eval_grid: usize,
    pub trace_interval: usize,
    pub seed: u64,
    pub speed_init: f64,
    pub sampling: Sampling,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            half_width: 200.0,
            collocation: 201,
            epochs: 100_000,
            lr_weights: 1e-6,
            lr_speed: 1e-4,
            decay_factor: 0.9,
            decay_interval: 5000,
            beta1: 0.9,
            beta2: 0.999,
            eps_adam: 1e-8,
            weighting: Weighting::Uniform,
            use_bc: true,
            eval_grid: 201,
            trace_interval: 100,
            seed: 0,
            speed_init: 0.0,
            sampling: Sampling::Ansatz,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if !(self.half_width > 0.0 && self.half_width.is_finite()) {
            return Err(invalid("half_width", format!("must be positive, got {}", self.half_width)));
        }
        if self.collocation < 2 {
            return Err(invalid("collocation", format!("must be at least 2, got {}", self.collocation)));
        }
        if !(self.lr_weights > 0.0) {
            return Err(invalid("lr_weights", format!("must be positive, got {}", self.lr_weights)));
        }
        if !(self.lr_speed > 0.0) {
            return Err(invalid("lr_speed", format!("must be positive, got {}", self.lr_speed)));
        }
        if !(self.decay_factor > 0.0 && self.decay_factor <= 1.0) {
            return Err(invalid("decay_factor", format!("must lie in (0, 1], got {}", self.decay_factor)));
        }
        if self.decay_interval == 0 {
            return Err(invalid("decay_interval", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(invalid("beta1", "Adam betas must lie in [0, 1)"));
        }
        if !(self.eps_adam > 0.0) {
            return Err(invalid("eps_adam", "must be positive"));
        }
        if self.eval_grid < 1 {
            return Err(invalid("eval_grid", "must be at least 1"));
        }
        if self.trace_interval == 0 {
            return Err(invalid("trace_interval", "must be positive"));
        }
        if !self.speed_init.is_finite() {
            return Err(invalid("speed_init", "must be finite"));
        }
        if let Sampling::Spacetime { direction, t_window } = &self.sampling {
            CharacteristicMap::spacetime(direction.clone())?;
            if !(t_window.0 <= t_window.1) {
                return Err(invalid("t_window", "start must not exceed end"));
            }
        }
        Ok(())
    }

    pub fn loss_options(&self) -> LossOptions {
        LossOptions { weighting: self.weighting, use_bc: self.use_bc }
    }

    /// Half-width in `z` at which the boundary terms are imposed.
    pub fn z_half_width(&self) -> f64 {
        match &self.sampling {
            Sampling::Ansatz => self.half_width,
            Sampling::Spacetime { direction, .. } => self.half_width * direction.iter().map(|k| k.abs()).sum::<f64>(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LearningRates {
    pub weights: f64,
    pub speed: f64,
}

/// `base · factor^⌊epoch / interval⌋` for both groups.
pub fn lr_schedule(epoch: usize, cfg: &TrainConfig) -> LearningRates {
    let k = (epoch / cfg.decay_interval) as i32;
    let f = cfg.decay_factor.powi(k);
    LearningRates { weights: cfg.lr_weights * f, speed: cfg.lr_speed * f }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], step: 0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamHyper {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// One bias-corrected Adam update; slot `speed_index` uses `lr.speed`.
/// Nothing is modified if any gradient is non-finite.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    lr: LearningRates,
    speed_index: usize,
    hyper: AdamHyper,
) -> Result<(), TrainError> {
    let n = params.len();
    if grads.len() != n {
        return Err(TrainError::StateShape { expected: n, got: grads.len() });
    }
    if state.m.len() != n || state.v.len() != n {
        return Err(TrainError::StateShape { expected: n, got: state.m.len().min(state.v.len()) });
    }
    if let Some(index) = grads.iter().position(|g| !g.is_finite()) {
        return Err(TrainError::NonFiniteGradient { index });
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - hyper.beta1.powi(t);
    let bc2 = 1.0 - hyper.beta2.powi(t);
    for i in 0..n {
        let g = grads[i];
        let m = hyper.beta1 * state.m[i] + (1.0 - hyper.beta1) * g;
        let v = hyper.beta2 * state.v[i] + (1.0 - hyper.beta2) * g * g;
        state.m[i] = m;
        state.v[i] = v;
        let rate = if i == speed_index { lr.speed } else { lr.weights };
        params[i] -= rate * (m / bc1) / ((v / bc2).sqrt() + hyper.eps);
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub epoch: usize,
    pub s_est: f64,
    pub losses: LossBreakdown,
}

#[derive(Clone, Debug, PartialEq)]
pub enum TrainStatus {
    Completed,
    /// Stopped at `epoch` because the loss or gradient went non-finite;
    /// the returned parameters are the last finite ones.
    Aborted { epoch: usize, reason: String },
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub nets: Networks,
    pub params: ParamStore,
    pub trace: Vec<TraceRecord>,
    pub status: TrainStatus,
    pub warnings: Vec<String>,
}

impl TrainOutcome {
    pub fn speed(&self) -> f64 {
        self.params.speed()
    }

    pub fn final_record(&self) -> &TraceRecord {
        self.trace.last().expect("trace always holds the initial record")
    }
}

/// U and V networks sharing `ncfg`'s architecture; output heads come from
/// the model's boundary limits and replace `ncfg.head`. V's weights are
/// drawn with seed `ncfg.seed` continuing U's stream.
pub fn profile_networks(model: &ModelSpec, ncfg: &NetworkConfig) -> Result<Networks, NetworkError> {
    let (hu, hv) = model.default_heads();
    Networks::new(&[("u", NetworkConfig { head: hu, ..*ncfg }), ("v", NetworkConfig { head: hv, ..*ncfg })])
}

pub fn train(model: &ModelSpec, ncfg: &NetworkConfig, tcfg: &TrainConfig) -> Result<TrainOutcome, TrainError> {
    train_with(model, ncfg, tcfg, |_| {})
}

/// [`train`] with a callback invoked on every trace record.
pub fn train_with(
    model: &ModelSpec,
    ncfg: &NetworkConfig,
    tcfg: &TrainConfig,
    mut on_record: impl FnMut(&TraceRecord),
) -> Result<TrainOutcome, TrainError> {
    model.validate()?;
    ncfg.validate()?;
    tcfg.validate()?;
    let mut warnings = Vec::new();
    if let System::Ks(_) = model.system {
        match ks_compatibility(model) {
            Ok(r) if r.abs() < 1e-8 => {}
            Ok(r) => warnings.push(format!("limits violate the Keller-Segel compatibility relation (residual {r:.3e})")),
            Err(e) => warnings.push(e.to_string()),
        }
    }

    let nets = profile_networks(model, ncfg)?;
    let mut params = nets.init_params(tcfg.speed_init);
    let obj = Objective::new(model, &nets, tcfg.loss_options());
    let grid = CollocationBatch::grid(tcfg.eval_grid, tcfg.z_half_width())?;
    let map = match &tcfg.sampling {
        Sampling::Ansatz => None,
        Sampling::Spacetime { direction, .. } => Some(CharacteristicMap::spacetime(direction.clone())?),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(tcfg.seed);
    let hyper = AdamHyper { beta1: tcfg.beta1, beta2: tcfg.beta2, eps: tcfg.eps_adam };
    let mut state = AdamState::new(params.len());
    let mut grad = vec![0.0; params.len()];
    let mut trace = Vec::new();
    let si = nets.speed_index();

    let mut record = |epoch: usize, params: &ParamStore, trace: &mut Vec<TraceRecord>| -> Result<bool, TrainError> {
        let losses = obj.evaluate(params.as_slice(), &grid)?;
        let r = TraceRecord { epoch, s_est: params.speed(), losses };
        on_record(&r);
        trace.push(r);
        Ok(losses.is_finite())
    };

    let mut status = TrainStatus::Completed;
    for epoch in 0..tcfg.epochs {
        if epoch % tcfg.trace_interval == 0 && !record(epoch, &params, &mut trace)? {
            status = TrainStatus::Aborted { epoch, reason: "non-finite fixed-grid loss".into() };
            break;
        }
        let batch = match (&tcfg.sampling, &map) {
            (Sampling::Spacetime { t_window, .. }, Some(map)) => {
                CollocationBatch::spacetime(&mut rng, map, tcfg.collocation, tcfg.half_width, *t_window)?
            }
            _ => CollocationBatch::uniform(&mut rng, tcfg.collocation, tcfg.half_width)?,
        };
        let parts = obj.value_and_grad(params.as_slice(), &batch, &mut grad)?;
        if !parts.is_finite() {
            status = TrainStatus::Aborted { epoch, reason: format!("non-finite training loss {:?}", parts.total) };
            break;
        }
        let before = params.clone();
        match adam_step(params.as_mut_slice(), &grad, &mut state, lr_schedule(epoch, tcfg), si, hyper) {
            Ok(()) => {}
            Err(TrainError::NonFiniteGradient { index }) => {
                status = TrainStatus::Aborted { epoch, reason: format!("non-finite gradient at parameter {index}") };
                break;
            }
            Err(e) => return Err(e),
        }
        if !params.as_slice().iter().all(|p| p.is_finite()) {
            params = before;
            status = TrainStatus::Aborted { epoch, reason: "update produced non-finite parameters".into() };
            break;
        }
    }
    if status == TrainStatus::Completed && trace.last().map(|r| r.epoch) != Some(tcfg.epochs) {
        record(tcfg.epochs, &params, &mut trace)?;
    }
    Ok(TrainOutcome { nets, params, trace, status, warnings })
}

/// Tabulated profiles and first derivatives.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Profiles {
    pub z: Vec<f64>,
    pub u: Vec<f64>,
    pub u_z: Vec<f64>,
    pub v: Vec<f64>,
    pub v_z: Vec<f64>,
}

pub fn evaluate(nets: &Networks, params: &[f64], grid: &[f64]) -> Result<Profiles, NetworkError> {
    nets.check_shape(params)?;
    let mut out = Profiles::default();
    for &z in grid {
        let u = nets.net(0).forward(params, Jet2::variable(z));
        let v = nets.net(1).forward(params, Jet2::variable(z));
        out.z.push(z);
        out.u.push(u.value);
        out.u_z.push(u.d1);
        out.v.push(v.value);
        out.v_z.push(v.d1);
    }
    Ok(out)
}

fn violations(xs: &[f64], dir: Option<Monotone>) -> usize {
    match dir {
        None => 0,
        Some(Monotone::Increasing) => xs.windows(2).filter(|w| w[1] < w[0]).count(),
        Some(Monotone::Decreasing) => xs.windows(2).filter(|w| w[1] > w[0]).count(),
    }
}

/// Adjacent grid pairs that break the model's known monotonicity.
pub fn monotonicity_report(profiles: &Profiles, model: &ModelSpec) -> usize {
    let (du, dv) = model.monotonicity();
    violations(&profiles.u, du) + violations(&profiles.v, dv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Activation;
    use crate::loss::linspace;
    use crate::models::Boundary;
    use crate::network::{Head, InitScheme};
    use approx::assert_abs_diff_eq;

    fn ks0() -> ModelSpec {
        ModelSpec::ks(0.0, 2.0, 0.5, Boundary { u_minus: 2.0, v_minus: -1.0, u_plus: 1.0, v_plus: 0.0 })
    }

    fn small_net() -> NetworkConfig {
        NetworkConfig { depth: 3, width: 8, activation: Activation::Tanh, head: Head::Linear, init: InitScheme::FanInUniform, seed: 1 }
    }

    #[test]
    fn schedule_examples() {
        let cfg = TrainConfig::default();
        assert_eq!(lr_schedule(0, &cfg), LearningRates { weights: 1e-6, speed: 1e-4 });
        assert_abs_diff_eq!(lr_schedule(5000, &cfg).speed, 0.9e-4, epsilon = 1e-18);
        assert_abs_diff_eq!(lr_schedule(12_500, &cfg).weights, 0.81e-6, epsilon = 1e-20);
        assert_eq!(lr_schedule(4999, &cfg), lr_schedule(0, &cfg));
    }

    #[test]
    fn adam_first_step_is_sign() {
        let mut p = vec![0.0, 0.0];
        let mut st = AdamState::new(2);
        let lr = LearningRates { weights: 0.01, speed: 0.5 };
        adam_step(&mut p, &[3.0, -7.0], &mut st, lr, 1, AdamHyper::default()).unwrap();
        assert_abs_diff_eq!(p[0], -0.01, epsilon = 1e-9);
        assert_abs_diff_eq!(p[1], 0.5, epsilon = 1e-9);
    }

    #[test]
    fn adam_zero_grad_keeps_params_and_decays_moments() {
        let mut p = vec![1.0];
        let mut st = AdamState { m: vec![1.0], v: vec![1.0], step: 3 };
        let lr = LearningRates { weights: 0.1, speed: 0.1 };
        let before = p.clone();
        adam_step(&mut p, &[0.0], &mut st, lr, 5, AdamHyper { eps: 1e-8, ..AdamHyper::default() }).unwrap();
        assert_eq!(st.m[0], 0.9);
        assert_eq!(st.v[0], 0.999);
        // with nonzero moments the parameter still moves; with fresh moments it does not
        assert_ne!(p, before);
        let mut q = vec![1.0];
        let mut fresh = AdamState::new(1);
        adam_step(&mut q, &[0.0], &mut fresh, lr, 5, AdamHyper::default()).unwrap();
        assert_eq!(q, vec![1.0]);
    }

    #[test]
    fn adam_minimizes_quadratic() {
        let mut w = vec![1.0];
        let mut st = AdamState::new(1);
        let lr = LearningRates { weights: 0.1, speed: 0.1 };
        for _ in 0..100 {
            let g = [2.0 * w[0]];
            adam_step(&mut w, &g, &mut st, lr, 9, AdamHyper::default()).unwrap();
        }
        assert!(w[0].abs() < 0.5);
    }

    #[test]
    fn adam_rejects_non_finite() {
        let mut p = vec![1.0, 2.0];
        let mut st = AdamState::new(2);
        let lr = LearningRates { weights: 0.1, speed: 0.1 };
        let err = adam_step(&mut p, &[0.0, f64::NAN], &mut st, lr, 0, AdamHyper::default());
        assert_eq!(err, Err(TrainError::NonFiniteGradient { index: 1 }));
        assert_eq!(p, vec![1.0, 2.0]);
        assert_eq!(st.step, 0);
    }

    #[test]
    fn zero_epochs_returns_initial_state() {
        let tcfg = TrainConfig { epochs: 0, ..TrainConfig::default() };
        let out = train(&ks0(), &small_net(), &tcfg).unwrap();
        assert_eq!(out.trace.len(), 1);
        assert_eq!(out.trace[0].epoch, 0);
        assert_eq!(out.params, profile_networks(&ks0(), &small_net()).unwrap().init_params(0.0));
        assert_eq!(out.status, TrainStatus::Completed);
        // zero biases put the bounded head at the mean of the limits
        assert_abs_diff_eq!(out.trace[0].losses.trans, 0.0, epsilon = 1e-28);
    }

    #[test]
    fn training_is_deterministic() {
        let tcfg = TrainConfig { epochs: 30, trace_interval: 10, lr_weights: 1e-3, lr_speed: 1e-2, ..TrainConfig::default() };
        let a = train(&ks0(), &small_net(), &tcfg).unwrap();
        let b = train(&ks0(), &small_net(), &tcfg).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.params, b.params);
        assert_eq!(a.trace.iter().map(|r| r.epoch).collect::<Vec<_>>(), vec![0, 10, 20, 30]);
        let c = train(&ks0(), &small_net(), &TrainConfig { seed: 1, ..tcfg }).unwrap();
        assert_ne!(a.params, c.params);
    }

    #[test]
    fn speed_moves_toward_exact_value_early() {
        let tcfg = TrainConfig { epochs: 200, trace_interval: 200, lr_weights: 1e-3, lr_speed: 1e-2, ..TrainConfig::default() };
        let out = train(&ks0(), &small_net(), &tcfg).unwrap();
        assert!(out.speed() > 0.0);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad = TrainConfig { collocation: 1, ..TrainConfig::default() };
        assert!(matches!(bad.validate(), Err(TrainError::Invalid { field: "collocation", .. })));
        let bad = TrainConfig { decay_factor: 1.5, ..TrainConfig::default() };
        assert!(bad.validate().is_err());
        let bad = TrainConfig { sampling: Sampling::Spacetime { direction: vec![1.0, 1.0], t_window: (0.0, 1.0) }, ..TrainConfig::default() };
        assert!(bad.validate().is_err());
        let mut model = ks0();
        model.boundary.u_minus = -1.0;
        assert!(matches!(train(&model, &small_net(), &TrainConfig { epochs: 0, ..TrainConfig::default() }), Err(TrainError::Model(_))));
    }

    #[test]
    fn incompatible_limits_warn() {
        let model = ModelSpec::ks(0.0, 2.0, 0.9, Boundary { u_minus: 1.0, v_minus: -1.0, u_plus: 0.0, v_plus: 0.0 });
        let out = train(&model, &small_net(), &TrainConfig { epochs: 0, ..TrainConfig::default() }).unwrap();
        assert_eq!(out.warnings.len(), 1);
    }

    #[test]
    fn divergent_run_aborts_with_finite_params() {
        // s·U' overflows once squared
        let tcfg = TrainConfig { epochs: 50, speed_init: 1e200, ..TrainConfig::default() };
        let out = train(&ModelSpec::lv(2.0, 2.0, 3.0, 2.0), &small_net(), &tcfg).unwrap();
        assert!(matches!(out.status, TrainStatus::Aborted { epoch: 0, .. }), "{:?}", out.status);
        assert!(out.params.as_slice().iter().all(|p| p.is_finite()));
    }

    #[test]
    fn monotonicity_counts() {
        let z = linspace(-1.0, 1.0, 11);
        let step: Vec<f64> = z.iter().map(|&z| if z < 0.0 { 2.0 } else { 1.0 }).collect();
        let vstep: Vec<f64> = z.iter().map(|&z| if z < 0.0 { -1.0 } else { 0.0 }).collect();
        let p = Profiles { z: z.clone(), u: step.clone(), u_z: vec![0.0; 11], v: vstep, v_z: vec![0.0; 11] };
        assert_eq!(monotonicity_report(&p, &ks0()), 0);
        let rev = Profiles { u: z.clone(), v: vec![0.0; 11], ..p.clone() };
        assert_eq!(monotonicity_report(&rev, &ks0()), 10);
        // AC has no constraint on V
        let ac = Profiles { u: z.clone(), v: z.iter().map(|z| z.sin() * 5.0).collect(), ..p };
        assert_eq!(monotonicity_report(&ac, &ModelSpec::ac(1.0, 0.7)), 0);
    }

    #[test]
    fn untrained_bounded_outputs_stay_in_range() {
        let nets = profile_networks(&ks0(), &small_net()).unwrap();
        let params = nets.init_params(0.0);
        let prof = evaluate(&nets, params.as_slice(), &linspace(-50.0, 50.0, 101)).unwrap();
        assert!(prof.u.iter().all(|&u| u > 0.0 && u < 3.0));
        assert!(prof.v.iter().all(|&v| v > -2.0 && v < 1.0));
        assert_abs_diff_eq!(evaluate(&nets, params.as_slice(), &[0.0]).unwrap().u[0], 1.5, epsilon = 1e-15);
    }
}
