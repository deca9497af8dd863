//! Central finite-difference gradient checking in double precision.

/// Components whose numerical gradient is smaller than this are compared on
/// an absolute scale.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Component where the maximum was attained.
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

/// Compares the analytic gradient returned by `f` at `params` with central
/// differences `(f(θ+ε) − f(θ−ε)) / 2ε`, one component at a time.
///
/// The relative error of a component is `|a − n| / max(|n|, floor)` with the
/// numerical estimate `n` as reference.
pub fn gradient_check<F>(mut f: F, params: &[f64], eps: f64) -> GradCheckReport
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let (_, analytic) = f(params);
    assert_eq!(
        analytic.len(),
        params.len(),
        "gradient length must match parameter count"
    );
    let mut theta = params.to_vec();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
    };
    for i in 0..theta.len() {
        let orig = theta[i];
        theta[i] = orig + eps;
        let up = f(&theta).0;
        theta[i] = orig - eps;
        let down = f(&theta).0;
        theta[i] = orig;
        let numeric = (up - down) / (2.0 * eps);
        let err = (analytic[i] - numeric).abs() / numeric.abs().max(RELATIVE_ERROR_FLOOR);
        if err > report.max_relative_error || i == 0 {
            report = GradCheckReport {
                max_relative_error: err.max(report.max_relative_error),
                worst_index: i,
                analytic: analytic[i],
                numeric,
            };
        }
    }
    report
}
