//! Finite-difference validation of reverse-mode gradients.

use super::params::ParamStore;
use super::tape::{Tape, Var};
use super::AutodiffError;

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Flat index with the largest relative error.
    pub worst_index: usize,
    pub checked: usize,
}

/// Relative error with the denominator floored at 1e-12.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-12)
}

/// Compares `analytic` against central differences of `eval` at the given
/// flat indices (all indices when `indices` is `None`).
pub fn compare_with_central_differences<F>(
    eval: F,
    x: &[f64],
    analytic: &[f64],
    indices: Option<&[usize]>,
    step: f64,
) -> Result<GradCheckReport, AutodiffError>
where
    F: Fn(&[f64]) -> f64,
{
    if !(step > 0.0) {
        return Err(AutodiffError::BadStep(step));
    }
    if analytic.len() != x.len() {
        return Err(AutodiffError::LengthMismatch { expected: x.len(), got: analytic.len() });
    }
    let all: Vec<usize>;
    let idx = match indices {
        Some(i) => i,
        None => {
            all = (0..x.len()).collect();
            &all
        }
    };
    let mut probe = x.to_vec();
    let mut report = GradCheckReport { max_rel_error: 0.0, worst_index: 0, checked: 0 };
    for &i in idx {
        let orig = probe[i];
        probe[i] = orig + step;
        let fp = eval(&probe);
        probe[i] = orig - step;
        let fm = eval(&probe);
        probe[i] = orig;
        if !fp.is_finite() || !fm.is_finite() || !analytic[i].is_finite() {
            return Err(AutodiffError::NonFinite { index: i });
        }
        let numeric = (fp - fm) / (2.0 * step);
        let err = relative_error(analytic[i], numeric);
        if report.checked == 0 || err > report.max_rel_error {
            report.max_rel_error = err;
            report.worst_index = i;
        }
        report.checked += 1;
    }
    Ok(report)
}

/// Relative error of the directional derivative `analytic · direction`
/// against a central difference along `direction`.
pub fn directional_error<F>(eval: F, x: &[f64], analytic: &[f64], direction: &[f64], step: f64) -> Result<f64, AutodiffError>
where
    F: Fn(&[f64]) -> f64,
{
    if !(step > 0.0) {
        return Err(AutodiffError::BadStep(step));
    }
    let shifted = |sign: f64| -> Vec<f64> { x.iter().zip(direction).map(|(a, d)| a + sign * step * d).collect() };
    let fp = eval(&shifted(1.0));
    let fm = eval(&shifted(-1.0));
    if !fp.is_finite() || !fm.is_finite() {
        return Err(AutodiffError::NonFinite { index: usize::MAX });
    }
    let numeric = (fp - fm) / (2.0 * step);
    let exact: f64 = analytic.iter().zip(direction).map(|(g, d)| g * d).sum();
    Ok(relative_error(exact, numeric))
}

/// Builds `f` on a tape with every parameter as a leaf, back-propagates, and
/// checks each component against central differences of `f` re-recorded on
/// a fresh tape.
pub fn grad_check<F>(f: F, params: &ParamStore, step: f64) -> Result<GradCheckReport, AutodiffError>
where
    F: Fn(&mut Tape, &[Var]) -> Var,
{
    grad_check_subset(f, params, None, step)
}

pub fn grad_check_subset<F>(f: F, params: &ParamStore, indices: Option<&[usize]>, step: f64) -> Result<GradCheckReport, AutodiffError>
where
    F: Fn(&mut Tape, &[Var]) -> Var,
{
    let x = params.as_slice();
    let mut tape = Tape::new();
    let leaves = tape.params(x);
    let out = f(&mut tape, &leaves);
    if !tape.value(out).is_finite() {
        return Err(AutodiffError::NonFinite { index: usize::MAX });
    }
    let analytic = tape.backward(out, x.len())?;
    let eval = |p: &[f64]| {
        let mut t = Tape::new();
        let leaves = t.params(p);
        let y = f(&mut t, &leaves);
        t.value(y)
    };
    compare_with_central_differences(eval, x, &analytic, indices, step)
}
