//! The sufficient condition for a non-decreasing CCP on the covariate ball of
//! radius eta, and the weight-rescaling projection that enforces it.

use serde::Serialize;

use crate::model::N3pomModel;

/// Slack applied to the satisfied flag; absorbs rounding from the sqrt(c)
/// rescaling.
pub const CONDITION_TOL: f64 = 1e-12;

/// Outcome of evaluating the sufficient condition
/// min_r s_r >= eta * rho'_sup * sqrt(sum_k (sum_l |w2 w1|)^2).
#[derive(Debug, Clone, Serialize)]
pub struct MonotonicityReport {
    /// Minimum intercept segment slope.
    pub lhs: f64,
    /// Weight-product bound scaled by eta and the activation slope supremum.
    pub rhs: f64,
    pub satisfied: bool,
    /// Rescaling coefficient min(1, lhs/rhs); 1 when rhs = 0.
    pub c: f64,
}

/// Evaluate the sufficient condition for `model`.
pub fn check_condition(model: &N3pomModel) -> MonotonicityReport {
    let lhs = model.intercept.min_slope();
    let net = &model.net;
    let mut sum_sq = 0.0;
    for k in 0..net.dim() {
        let mut products = 0.0;
        for l in 0..net.hidden() {
            products += (net.w2[k][l] * net.w1[k][l]).abs();
        }
        sum_sq += products * products;
    }
    let rhs = model.eta() * net.activation().slope_sup() * sum_sq.sqrt();
    let c = if rhs == 0.0 { 1.0 } else { (lhs / rhs).min(1.0) };
    MonotonicityReport { lhs, rhs, satisfied: lhs >= rhs - CONDITION_TOL, c }
}

/// Rescale both hidden-layer weight families by sqrt(c) so the condition
/// holds afterwards. With c = 1 the weights are untouched bit-for-bit.
/// Returns the report that determined the applied coefficient.
pub fn project(model: &mut N3pomModel) -> MonotonicityReport {
    let report = check_condition(model);
    if report.c < 1.0 {
        let scale = report.c.sqrt();
        for block in [&mut model.net.w1, &mut model.net.w2] {
            for row in block.iter_mut() {
                for w in row.iter_mut() {
                    *w *= scale;
                }
            }
        }
    }
    report
}
