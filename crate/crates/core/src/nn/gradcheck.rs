//! Central finite-difference checks against analytic gradients.

use super::{Grads, ParamId, Params};

/// Scale below which errors are measured absolutely rather than relatively.
pub const REL_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GradReport {
    pub checked: usize,
    pub max_rel_error: f64,
}

impl GradReport {
    fn record(&mut self, analytic: f64, numeric: f64) {
        self.checked += 1;
        self.max_rel_error = self.max_rel_error.max(relative_error(analytic, numeric));
    }

    pub fn merge(&mut self, other: GradReport) {
        self.checked += other.checked;
        self.max_rel_error = self.max_rel_error.max(other.max_rel_error);
    }
}

/// Compares every scalar of the listed parameters against central
/// differences of `loss`.
pub fn check_params(
    params: &mut Params,
    ids: &[ParamId],
    analytic: &Grads,
    eps: f64,
    loss: impl Fn(&Params) -> f64,
) -> GradReport {
    let mut report = GradReport::default();
    for &id in ids {
        for j in 0..params.get(id).len() {
            let orig = params.get(id).data()[j];
            params.get_mut(id).data_mut()[j] = orig + eps;
            let up = loss(params);
            params.get_mut(id).data_mut()[j] = orig - eps;
            let down = loss(params);
            params.get_mut(id).data_mut()[j] = orig;
            report.record(analytic.get(id).data()[j], (up - down) / (2.0 * eps));
        }
    }
    report
}

/// Same check for a plain input vector.
pub fn check_input(x: &mut [f64], analytic: &[f64], eps: f64, loss: impl Fn(&[f64]) -> f64) -> GradReport {
    let mut report = GradReport::default();
    for j in 0..x.len() {
        let orig = x[j];
        x[j] = orig + eps;
        let up = loss(x);
        x[j] = orig - eps;
        let down = loss(x);
        x[j] = orig;
        report.record(analytic[j], (up - down) / (2.0 * eps));
    }
    report
}
