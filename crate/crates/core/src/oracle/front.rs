//! Front tracking on the time-dependent parent systems.
//!
//! Method of lines on a uniform grid (centered differences), explicit RK4
//! in time, Dirichlet data equal to the boundary limits. The speed is the
//! least-squares slope of the level-crossing position over a late window.
//!
//! Parent systems:
//!
//! ```text
//! KS  u_t = D u_xx + χ (u v)_x          v_t = ε v_xx − (ε v² − u)_x
//! AC  u_t = v_x + h(u)                  τ v_t = u_x − v      (τ = 0: u_t = u_xx + h(u))
//! LV  u_t = u_xx + u(1 − u − k v)       v_t = d v_xx + b v(1 − v − h u)
//! ```

use super::rk4::Rk4;
use super::{Method, OracleError, SpeedEstimate};
use crate::models::{ac_reaction, Anchor, ModelSpec, System};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrontTrackConfig {
    /// Domain `[−half_length, half_length]`.
    pub half_length: f64,
    pub dx: f64,
    /// Time step; `None` picks the stability default for the model.
    pub dt: Option<f64>,
    pub t_end: f64,
    /// Positions recorded in `[window.0, window.1]` enter the fit.
    pub window: (f64, f64),
    /// Time between recorded positions.
    pub sample_every: f64,
    /// The front may not come closer than this to either edge.
    pub edge_margin: f64,
}

impl Default for FrontTrackConfig {
    fn default() -> Self {
        Self { half_length: 100.0, dx: 0.2, dt: None, t_end: 100.0, window: (50.0, 100.0), sample_every: 0.5, edge_margin: 10.0 }
    }
}

/// Largest diffusivity (or, for the hyperbolic system, `None`).
fn max_diffusivity(model: &ModelSpec) -> Option<f64> {
    match model.system {
        System::Ks(p) => Some(p.diffusion.max(p.epsilon)),
        System::Ac(p) if p.tau == 0.0 => Some(1.0),
        System::Ac(_) => None,
        System::Lv(p) => Some(1.0f64.max(p.d)),
    }
}

/// Default step: `0.2·dx²/max diffusivity` for parabolic systems and
/// `0.5·dx·√τ` for the hyperbolic relaxation system.
pub fn default_dt(model: &ModelSpec, dx: f64) -> f64 {
    match (max_diffusivity(model), model.system) {
        (Some(d), _) => 0.2 * dx * dx / d,
        (None, System::Ac(p)) => 0.5 * dx * p.tau.sqrt(),
        _ => unreachable!(),
    }
}

fn check_stability(model: &ModelSpec, dx: f64, dt: f64) -> Result<(), OracleError> {
    // RK4 is stable on [−2.78, 0] and on the imaginary axis up to 2.83;
    // diffusion eigenvalues reach −4D/dx², advection ±i/(√τ dx), relaxation −1/τ
    let limit = match (max_diffusivity(model), model.system) {
        (Some(d), _) => 0.69 * dx * dx / d,
        (None, System::Ac(p)) => (2.8 * dx * p.tau.sqrt()).min(2.78 * p.tau),
        _ => unreachable!(),
    };
    if dt > limit {
        return Err(OracleError::Stability(format!("dt = {dt} exceeds the explicit limit {limit:.3e} for dx = {dx}")));
    }
    Ok(())
}

struct Grid {
    n: usize,
    dx: f64,
    left: [f64; 2],
    right: [f64; 2],
}

impl Grid {
    #[inline]
    fn at(&self, y: &[f64], comp: usize, i: isize) -> f64 {
        if i < 0 {
            self.left[comp]
        } else if i as usize >= self.n {
            self.right[comp]
        } else {
            y[comp * self.n + i as usize]
        }
    }

    #[inline]
    fn dxx(&self, y: &[f64], c: usize, i: isize) -> f64 {
        (self.at(y, c, i - 1) - 2.0 * self.at(y, c, i) + self.at(y, c, i + 1)) / (self.dx * self.dx)
    }

    #[inline]
    fn dx1<F: Fn(f64, f64) -> f64>(&self, y: &[f64], flux: F, i: isize) -> f64 {
        let f = |j: isize| flux(self.at(y, 0, j), self.at(y, 1, j));
        (f(i + 1) - f(i - 1)) / (2.0 * self.dx)
    }
}

fn rhs(model: &ModelSpec, g: &Grid, y: &[f64], dy: &mut [f64]) {
    let n = g.n;
    for i in 0..n {
        let ii = i as isize;
        let (u, v) = (y[i], y[n + i]);
        let (du, dv) = match model.system {
            System::Ks(p) => (
                p.diffusion * g.dxx(y, 0, ii) + p.chi * g.dx1(y, |u, v| u * v, ii),
                p.epsilon * g.dxx(y, 1, ii) - g.dx1(y, |u, v| p.epsilon * v * v - u, ii),
            ),
            System::Ac(p) if p.tau == 0.0 => (g.dxx(y, 0, ii) + ac_reaction(u, p.alpha), 0.0),
            System::Ac(p) => (
                g.dx1(y, |_, v| v, ii) + ac_reaction(u, p.alpha),
                (g.dx1(y, |u, _| u, ii) - v) / p.tau,
            ),
            System::Lv(p) => (
                g.dxx(y, 0, ii) + u * (1.0 - u - p.k * v),
                p.d * g.dxx(y, 1, ii) + p.b * v * (1.0 - v - p.h * u),
            ),
        };
        dy[i] = du;
        dy[n + i] = dv;
    }
}

/// Interpolated position of the first sign change of `xs − level`.
fn crossing(xs: &[f64], level: f64, x0: f64, dx: f64) -> Option<f64> {
    xs.windows(2).enumerate().find_map(|(i, w)| {
        let (a, b) = (w[0] - level, w[1] - level);
        if a == 0.0 {
            Some(x0 + dx * i as f64)
        } else if a * b < 0.0 {
            Some(x0 + dx * (i as f64 + a / (a - b)))
        } else {
            None
        }
    })
}

/// Least-squares line through `(t, x)`; returns slope and RMS residual.
pub fn fit_line(t: &[f64], x: &[f64]) -> (f64, f64) {
    let n = t.len() as f64;
    let mt = t.iter().sum::<f64>() / n;
    let mx = x.iter().sum::<f64>() / n;
    let stt: f64 = t.iter().map(|t| (t - mt).powi(2)).sum();
    let stx: f64 = t.iter().zip(x).map(|(t, x)| (t - mt) * (x - mx)).sum();
    let slope = stx / stt;
    let rms = (t.iter().zip(x).map(|(t, x)| (x - mx - slope * (t - mt)).powi(2)).sum::<f64>() / n).sqrt();
    (slope, rms)
}

pub fn fdm_speed(model: &ModelSpec, cfg: &FrontTrackConfig) -> Result<SpeedEstimate, OracleError> {
    model.validate()?;
    if let System::Ks(p) = model.system {
        if p.epsilon == 0.0 {
            return Err(OracleError::Config("front tracking needs epsilon > 0 for Keller-Segel".into()));
        }
    }
    if !(cfg.dx > 0.0 && cfg.half_length > cfg.edge_margin && cfg.sample_every > 0.0) {
        return Err(OracleError::Config("grid spacing, domain and sampling interval must be positive".into()));
    }
    if !(0.0 <= cfg.window.0 && cfg.window.0 < cfg.window.1 && cfg.window.1 <= cfg.t_end) {
        return Err(OracleError::Config(format!("window {:?} must lie inside [0, {}]", cfg.window, cfg.t_end)));
    }
    let dt = cfg.dt.unwrap_or_else(|| default_dt(model, cfg.dx));
    check_stability(model, cfg.dx, dt)?;

    let bd = model.boundary;
    let n = (2.0 * cfg.half_length / cfg.dx).round() as usize - 1;
    let x0 = -cfg.half_length + cfg.dx;
    let grid = Grid { n, dx: cfg.dx, left: [bd.u_minus, bd.v_minus], right: [bd.u_plus, bd.v_plus] };
    let mut y = vec![0.0; 2 * n];
    for i in 0..n {
        // smoothed step centred at the origin
        let w = 0.5 * (1.0 + (x0 + cfg.dx * i as f64).tanh());
        y[i] = bd.u_minus + (bd.u_plus - bd.u_minus) * w;
        y[n + i] = bd.v_minus + (bd.v_plus - bd.v_minus) * w;
    }
    let (comp, level) = match model.anchor {
        Anchor::U => (0, 0.5 * (bd.u_minus + bd.u_plus)),
        Anchor::V => (1, 0.5 * (bd.v_minus + bd.v_plus)),
    };
    let mut rk = Rk4::new(2 * n);
    let mut field = |_: f64, y: &[f64], dy: &mut [f64]| rhs(model, &grid, y, dy);
    let steps = (cfg.t_end / dt).ceil() as usize;
    let sample_stride = ((cfg.sample_every / dt).round() as usize).max(1);
    let (mut ts, mut xs) = (Vec::new(), Vec::new());
    for k in 1..=steps {
        let t = (k - 1) as f64 * dt;
        let h = if k == steps { cfg.t_end - t } else { dt };
        rk.step(&mut field, t, &mut y, h);
        if k % sample_stride != 0 && k != steps {
            continue;
        }
        let t = t + h;
        if !y.iter().all(|v| v.is_finite()) {
            return Err(OracleError::Stability(format!("solution blew up by t = {t}")));
        }
        let pos = crossing(&y[comp * n..(comp + 1) * n], level, x0, cfg.dx)
            .ok_or_else(|| OracleError::Integration(format!("front lost at t = {t}")))?;
        if pos.abs() > cfg.half_length - cfg.edge_margin {
            return Err(OracleError::DomainTooSmall { t, position: pos });
        }
        if t >= cfg.window.0 && t <= cfg.window.1 {
            ts.push(t);
            xs.push(pos);
        }
    }
    if ts.len() < 2 {
        return Err(OracleError::Config("measurement window holds fewer than two samples".into()));
    }
    let (slope, rms) = fit_line(&ts, &xs);
    Ok(SpeedEstimate { value: slope, method: Method::FrontTracking, diagnostic: rms, iterations: steps })
}
