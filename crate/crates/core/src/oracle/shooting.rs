//! Phase-plane shooting for the Allen–Cahn relaxation front.
//!
//! The wave ODE solved for the derivatives reads
//!
//! ```text
//! U' = (V + τ s h(U)) / (1 − τ s²)
//! V' = −(s V + h(U)) / (1 − τ s²)
//! ```
//!
//! Both equilibria `(0,0)` and `(1,0)` are saddles. One trajectory leaves
//! `(0,0)` along its unstable direction, the other arrives at `(1,0)` along
//! its stable direction (integrated backwards); the speed is the `s` at
//! which they cross the line `U = α` at the same `V`.

use super::rk4::Rk4;
use super::{Method, OracleError, SpeedEstimate};
use crate::models::{ac_reaction, ac_reaction_derivative, ac_speed_bounds, ModelSpec};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShootingConfig {
    pub s_lo: f64,
    pub s_hi: f64,
    pub step: f64,
    /// Offset from the equilibrium along the eigenvector.
    pub delta: f64,
    /// Bisection stops once the bracket is narrower than this.
    pub tol: f64,
    /// Trajectories leaving `|V| ≤ v_max`, `U ∈ [−1, 2]` are rejected.
    pub v_max: f64,
    /// Longest z-interval integrated before giving up on a crossing.
    pub max_length: f64,
    /// Probes in the coarse scan that locates the sign change.
    pub scan: usize,
}

impl ShootingConfig {
    /// Bracket from the analytic bounds: widened by `0.05` below, and kept
    /// away from the singular line `τs² = 1` above.
    pub fn for_params(tau: f64, alpha: f64) -> Self {
        let (lo, hi) = ac_speed_bounds(tau, alpha);
        let s_hi = (lo + 1.0).min(0.98 * hi);
        Self { s_lo: lo - 0.05, s_hi, step: 1e-3, delta: 1e-6, tol: 1e-7, v_max: 10.0, max_length: 500.0, scan: 16 }
    }

    fn validate(&self, tau: f64) -> Result<(), OracleError> {
        if !(self.s_lo < self.s_hi) {
            return Err(OracleError::Config(format!("empty bracket [{}, {}]", self.s_lo, self.s_hi)));
        }
        if !(self.delta > 0.0 && self.delta < 1e-2) {
            return Err(OracleError::Config(format!("manifold offset {} must be small and positive", self.delta)));
        }
        if !(self.step > 0.0 && self.tol > 0.0 && self.scan >= 1) {
            return Err(OracleError::Config("step, tolerance and scan count must be positive".into()));
        }
        let worst = self.s_lo.abs().max(self.s_hi.abs());
        if tau * worst * worst >= 1.0 {
            return Err(OracleError::Config(format!("bracket reaches tau*s^2 >= 1 (s = {worst})")));
        }
        Ok(())
    }
}

struct Phase {
    tau: f64,
    alpha: f64,
    s: f64,
}

impl Phase {
    fn field(&self, y: &[f64], dy: &mut [f64]) {
        let d = 1.0 - self.tau * self.s * self.s;
        let h = ac_reaction(y[0], self.alpha);
        dy[0] = (y[1] + self.tau * self.s * h) / d;
        dy[1] = -(self.s * y[1] + h) / d;
    }

    /// Eigenpairs of the linearization at `(u, 0)`, larger eigenvalue first.
    fn eigen(&self, u: f64) -> [(f64, [f64; 2]); 2] {
        let d = 1.0 - self.tau * self.s * self.s;
        let hp = ac_reaction_derivative(u, self.alpha);
        let (a, b, c, e) = (self.tau * self.s * hp / d, 1.0 / d, -hp / d, -self.s / d);
        let tr = a + e;
        let det = a * e - b * c;
        let disc = (tr * tr - 4.0 * det).sqrt();
        let pair = |lam: f64| {
            let (x, y) = (b, lam - a);
            let n = x.hypot(y);
            (lam, [x / n, y / n])
        };
        [pair(0.5 * (tr + disc)), pair(0.5 * (tr - disc))]
    }

    /// V where the trajectory starting at `y0` first meets `U = α`,
    /// integrating with signed step `h`; `None` if it turns back or leaves
    /// the box first.
    fn crossing(&self, mut y: [f64; 2], h: f64, cfg: &ShootingConfig) -> Option<f64> {
        let mut rk = Rk4::new(2);
        let mut field = |_: f64, y: &[f64], dy: &mut [f64]| self.field(y, dy);
        let steps = (cfg.max_length / cfg.step).ceil() as usize;
        let side = (y[0] - self.alpha).signum();
        for _ in 0..steps {
            let prev = y;
            rk.step(&mut field, 0.0, &mut y, h);
            if !(y[1].abs() <= cfg.v_max && (-1.0..=2.0).contains(&y[0])) {
                return None;
            }
            if (y[0] - self.alpha).signum() != side {
                let w = (self.alpha - prev[0]) / (y[0] - prev[0]);
                return Some(prev[1] + w * (y[1] - prev[1]));
            }
        }
        None
    }

    /// `V₀(α) − V₁(α)`: left trajectory minus right trajectory. A left
    /// trajectory that never reaches the line means `s` is too large (gap
    /// −∞), a right one that never reaches it means `s` is too small (+∞).
    fn gap(&self, cfg: &ShootingConfig) -> Result<f64, OracleError> {
        let [(lu, eu), _] = self.eigen(0.0);
        debug_assert!(lu > 0.0);
        let sgn = if eu[0] < 0.0 { -1.0 } else { 1.0 };
        let left = self.crossing([cfg.delta * sgn * eu[0], cfg.delta * sgn * eu[1]], cfg.step, cfg);
        let [_, (ls, es)] = self.eigen(1.0);
        debug_assert!(ls < 0.0);
        let sgn = if es[0] > 0.0 { -1.0 } else { 1.0 };
        let right = self.crossing([1.0 + cfg.delta * sgn * es[0], cfg.delta * sgn * es[1]], -cfg.step, cfg);
        match (left, right) {
            (Some(l), Some(r)) => Ok(l - r),
            (None, Some(_)) => Ok(f64::NEG_INFINITY),
            (Some(_), None) => Ok(f64::INFINITY),
            (None, None) => Err(OracleError::Integration(format!("neither trajectory reaches U = {} at s = {}", self.alpha, self.s))),
        }
    }
}

pub fn ac_shooting_speed(tau: f64, alpha: f64, cfg: &ShootingConfig) -> Result<SpeedEstimate, OracleError> {
    ModelSpec::ac(tau, alpha).validate()?;
    cfg.validate(tau)?;
    let gap = |s: f64| Phase { tau, alpha, s }.gap(cfg);
    // coarse scan; probes where neither trajectory reaches the line are skipped
    let probes: Vec<(f64, f64)> = (0..=cfg.scan)
        .map(|k| cfg.s_lo + (cfg.s_hi - cfg.s_lo) * k as f64 / cfg.scan as f64)
        .filter_map(|s| gap(s).ok().map(|g| (s, g)))
        .collect();
    let (first, last) = match (probes.first(), probes.last()) {
        (Some(&f), Some(&l)) => (f, l),
        _ => return Err(OracleError::Integration("no usable probe in the bracket".into())),
    };
    let Some(pair) = probes.windows(2).find(|w| w[0].1.signum() != w[1].1.signum()) else {
        return Err(OracleError::Bracket { lo: first.0, hi: last.0, g_lo: first.1, g_hi: last.1 });
    };
    let (mut lo, mut g_lo) = pair[0];
    let mut hi = pair[1].0;
    let mut iterations = 0;
    while hi - lo > cfg.tol {
        let mid = 0.5 * (lo + hi);
        let g = gap(mid)?;
        if g == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if g.signum() == g_lo.signum() {
            lo = mid;
            g_lo = g;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    let s = 0.5 * (lo + hi);
    let residual = gap(s)?;
    Ok(SpeedEstimate { value: s, method: Method::Shooting, diagnostic: residual.abs(), iterations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ac_speed_tau0;

    #[test]
    fn saddles_have_opposite_eigenvalues() {
        let p = Phase { tau: 1.0, alpha: 0.7, s: 0.3 };
        for u in [0.0, 1.0] {
            let [(l1, _), (l2, _)] = p.eigen(u);
            assert!(l1 > 0.0 && l2 < 0.0);
        }
    }

    #[test]
    fn eigenvectors_satisfy_linearization() {
        let p = Phase { tau: 2.0, alpha: 0.8, s: 0.4 };
        for u in [0.0, 1.0] {
            for (lam, v) in p.eigen(u) {
                // J v − λ v via finite differences of the field
                let eps = 1e-7;
                let mut f0 = [0.0; 2];
                let mut f1 = [0.0; 2];
                p.field(&[u, 0.0], &mut f0);
                p.field(&[u + eps * v[0], eps * v[1]], &mut f1);
                for k in 0..2 {
                    let jv = (f1[k] - f0[k]) / eps;
                    assert!((jv - lam * v[k]).abs() < 1e-5);
                }
            }
        }
    }

    #[test]
    fn recovers_closed_form_at_tau_zero() {
        for alpha in [0.6, 0.7, 0.8, 0.9] {
            let est = ac_shooting_speed(0.0, alpha, &ShootingConfig::for_params(0.0, alpha)).unwrap();
            assert!((est.value - ac_speed_tau0(alpha)).abs() < 5e-3, "{alpha}: {}", est.value);
        }
    }

    #[test]
    fn table_cells() {
        for (tau, alpha, want) in [(0.0, 0.7, 0.283), (1.0, 0.8, 0.44), (3.0, 0.9, 0.52)] {
            let est = ac_shooting_speed(tau, alpha, &ShootingConfig::for_params(tau, alpha)).unwrap();
            assert!((est.value - want).abs() <= 0.01, "({tau},{alpha}): {}", est.value);
        }
    }

    #[test]
    fn bad_bracket() {
        let cfg = ShootingConfig { s_lo: 0.5, s_hi: 0.6, ..ShootingConfig::for_params(0.0, 0.7) };
        assert!(matches!(ac_shooting_speed(0.0, 0.7, &cfg), Err(OracleError::Bracket { .. })));
        let cfg = ShootingConfig { s_lo: 0.6, s_hi: 0.5, ..cfg };
        assert!(matches!(ac_shooting_speed(0.0, 0.7, &cfg), Err(OracleError::Config(_))));
        assert!(ac_shooting_speed(4.0, 0.9, &ShootingConfig::for_params(1.0, 0.9)).is_err());
    }
}
