use crate::error::{Error, Result};

use super::Matrix;

/// Entries whose gradients are smaller than this are compared absolutely.
pub const GRAD_CHECK_FLOOR: f64 = 1e-2;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub checked: usize,
}

/// Compares `analytic` gradients against central differences of `f`.
///
/// `f` is evaluated at perturbed copies of `params`. Relative error per entry
/// is `|a - n| / max(|a|, |n|, GRAD_CHECK_FLOOR)`; the step actually taken
/// after rounding to `f32` is used as the denominator of the difference.
pub fn grad_check<F>(f: F, params: &[Matrix], analytic: &[Matrix], epsilon: f32) -> Result<GradCheckReport>
where
    F: Fn(&[Matrix]) -> f64,
{
    if params.len() != analytic.len() || params.iter().zip(analytic).any(|(p, g)| p.shape() != g.shape()) {
        return Err(Error::shape("grad_check", "analytic gradients do not match parameters"));
    }
    let base = f(params);
    if !base.is_finite() {
        return Err(Error::Evaluation(format!("f is not finite at params ({base})")));
    }

    let mut work: Vec<Matrix> = params.to_vec();
    let mut report = GradCheckReport { max_rel_error: 0.0, max_abs_error: 0.0, checked: 0 };
    for t in 0..params.len() {
        for i in 0..params[t].len() {
            let orig = params[t].data()[i];
            let plus = orig + epsilon;
            let minus = orig - epsilon;
            work[t].data_mut()[i] = plus;
            let fp = f(&work);
            work[t].data_mut()[i] = minus;
            let fm = f(&work);
            work[t].data_mut()[i] = orig;
            if !fp.is_finite() || !fm.is_finite() {
                return Err(Error::Evaluation(format!("f is not finite near tensor {t} entry {i}")));
            }
            let numeric = (fp - fm) / (plus as f64 - minus as f64);
            let a = analytic[t].data()[i] as f64;
            let abs = (a - numeric).abs();
            let rel = abs / a.abs().max(numeric.abs()).max(GRAD_CHECK_FLOOR);
            report.max_abs_error = report.max_abs_error.max(abs);
            report.max_rel_error = report.max_rel_error.max(rel);
            report.checked += 1;
        }
    }
    Ok(report)
}
