//! Finite-difference gradient verification.
//!
//! All checks run in f64 with central differences. The default step of
//! `1e-4` balances truncation error (O(step^2)) against round-off for
//! losses of magnitude around 1.

/// Default perturbation step for central differences.
pub const DEFAULT_STEP: f64 = 1e-4;

/// Default relative-error tolerance for 64-bit checks.
pub const DEFAULT_TOL: f64 = 1e-4;

/// Relative error with a small absolute floor so structurally-zero
/// gradient pairs compare by absolute difference instead of blowing up.
pub fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs()).max(1e-6);
    (a - b).abs() / scale
}

/// Central difference of `f` along one coordinate: `(f(x+h) - f(x-h)) / 2h`.
pub fn central_diff<F: FnMut(f64) -> f64>(mut f: F, x: f64, step: f64) -> f64 {
    (f(x + step) - f(x - step)) / (2.0 * step)
}

/// Numeric gradient of a scalar function of a parameter vector,
/// evaluated coordinate by coordinate with central differences.
///
/// `f` must be a pure function of its argument; it is called `2 * len`
/// times on perturbed copies of `params`.
pub fn numeric_gradient<F>(mut f: F, params: &[f64], step: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut work = params.to_vec();
    let mut grad = vec![0.0; params.len()];
    for i in 0..params.len() {
        let orig = work[i];
        work[i] = orig + step;
        let up = f(&work);
        work[i] = orig - step;
        let down = f(&work);
        work[i] = orig;
        grad[i] = (up - down) / (2.0 * step);
    }
    grad
}

/// Largest relative error between paired analytic and numeric values.
///
/// # Panics
/// Panics if the slices differ in length; that is a harness bug, not a
/// gradient failure.
pub fn max_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len(), "gradient length mismatch");
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &b)| rel_err(a, b))
        .fold(0.0, f64::max)
}

/// Convenience wrapper: numeric gradient of `f` at `params` compared to
/// `analytic`, returning `Err` with a diagnostic when any coordinate
/// exceeds `tol`.
pub fn check_gradient<F>(f: F, params: &[f64], analytic: &[f64], tol: f64) -> Result<(), String>
where
    F: FnMut(&[f64]) -> f64,
{
    let numeric = numeric_gradient(f, params, DEFAULT_STEP);
    assert_eq!(analytic.len(), numeric.len(), "gradient length mismatch");
    let mut worst = (0usize, 0.0f64);
    for (i, (&a, &n)) in analytic.iter().zip(&numeric).enumerate() {
        let e = rel_err(a, n);
        if e > worst.1 {
            worst = (i, e);
        }
    }
    if worst.1 > tol {
        let i = worst.0;
        return Err(format!(
            "gradient mismatch at coordinate {i}: analytic {a}, numeric {n}, rel err {e:.3e} > {tol:.1e}",
            a = analytic[i],
            n = numeric[i],
            e = worst.1,
        ));
    }
    Ok(())
}
