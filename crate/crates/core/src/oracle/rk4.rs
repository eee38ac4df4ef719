//! Classical fixed-step Runge–Kutta.

use super::OracleError;

/// Reusable stage buffers for systems of a fixed dimension.
#[derive(Clone, Debug)]
pub struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    pub fn new(dim: usize) -> Self {
        Self { k1: vec![0.0; dim], k2: vec![0.0; dim], k3: vec![0.0; dim], k4: vec![0.0; dim], tmp: vec![0.0; dim] }
    }

    /// Advances `y` from `t` to `t + h` in place. `h` may be negative.
    pub fn step<F>(&mut self, field: &mut F, t: f64, y: &mut [f64], h: f64)
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        let n = y.len();
        field(t, y, &mut self.k1);
        for i in 0..n {
            self.tmp[i] = y[i] + 0.5 * h * self.k1[i];
        }
        field(t + 0.5 * h, &self.tmp, &mut self.k2);
        for i in 0..n {
            self.tmp[i] = y[i] + 0.5 * h * self.k2[i];
        }
        field(t + 0.5 * h, &self.tmp, &mut self.k3);
        for i in 0..n {
            self.tmp[i] = y[i] + h * self.k3[i];
        }
        field(t + h, &self.tmp, &mut self.k4);
        for i in 0..n {
            y[i] += h / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub y: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn last(&self) -> Option<&[f64]> {
        self.y.last().map(|y| y.as_slice())
    }
}

/// Integrates from `t_span.0` to `t_span.1` (either direction) with steps of
/// size `step`, shortening the last one to land on the end point.
pub fn rk4_integrate<F>(mut field: F, y0: &[f64], t_span: (f64, f64), step: f64) -> Result<Trajectory, OracleError>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    if !(step > 0.0) {
        return Err(OracleError::Config(format!("step must be positive, got {step}")));
    }
    let (t0, t1) = t_span;
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let span = (t1 - t0).abs();
    let n = (span / step).ceil() as usize;
    let mut rk = Rk4::new(y0.len());
    let mut y = y0.to_vec();
    let mut out = Trajectory { t: Vec::with_capacity(n + 1), y: Vec::with_capacity(n + 1) };
    out.t.push(t0);
    out.y.push(y.clone());
    for k in 0..n {
        let t = t0 + dir * step * k as f64;
        let h = if k + 1 == n { t1 - t } else { dir * step };
        rk.step(&mut field, t, &mut y, h);
        if !y.iter().all(|v| v.is_finite()) {
            return Err(OracleError::Integration(format!("non-finite state at t = {}", t + h)));
        }
        out.t.push(if k + 1 == n { t1 } else { t + h });
        out.y.push(y.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_growth() {
        let tr = rk4_integrate(|_, y, dy| dy[0] = y[0], &[1.0], (0.0, 1.0), 1e-3).unwrap();
        assert!((tr.last().unwrap()[0] - std::f64::consts::E).abs() < 1e-9);
        assert_eq!(tr.t.len(), 1001);
        assert_eq!(*tr.t.last().unwrap(), 1.0);
    }

    #[test]
    fn zero_field_is_constant() {
        let tr = rk4_integrate(|_, _, dy| dy.fill(0.0), &[3.0, -2.0], (0.0, 5.0), 0.1).unwrap();
        assert!(tr.y.iter().all(|y| y == &[3.0, -2.0]));
    }

    #[test]
    fn oscillator_energy_drift() {
        let period = 2.0 * std::f64::consts::PI;
        let tr = rk4_integrate(
            |_, y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0];
            },
            &[1.0, 0.0],
            (0.0, 10.0 * period),
            1e-3,
        )
        .unwrap();
        let e0 = 0.5;
        let drift = tr.y.iter().map(|y| (0.5 * (y[0] * y[0] + y[1] * y[1]) - e0).abs()).fold(0.0, f64::max);
        assert!(drift < 1e-8, "{drift}");
    }

    #[test]
    fn backward_integration_and_partial_step() {
        let tr = rk4_integrate(|_, y, dy| dy[0] = y[0], &[1.0], (0.0, -0.25), 0.1).unwrap();
        assert_eq!(tr.t, vec![0.0, -0.1, -0.2, -0.25]);
        assert!((tr.last().unwrap()[0] - (-0.25f64).exp()).abs() < 1e-6);
        assert!(rk4_integrate(|_, _, _| {}, &[0.0], (0.0, 1.0), 0.0).is_err());
    }
}
