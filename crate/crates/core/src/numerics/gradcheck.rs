//! Central finite-difference oracles for verifying hand-derived gradients.
//!
//! The checkers only ever call forward evaluations, so they stay independent
//! of the backward implementations they validate.

use crate::numerics::array::Array;

pub const FD_STEP: f64 = 1e-5;

/// Central finite-difference gradient of a scalar function at `x`.
pub fn fd_gradient(f: &mut dyn FnMut(&Array) -> f64, x: &Array, h: f64) -> Array {
    let mut grad = Array::zeros(x.shape());
    for i in 0..x.len() {
        let mut plus = x.clone();
        plus.values_mut()[i] += h;
        let mut minus = x.clone();
        minus.values_mut()[i] -= h;
        grad.values_mut()[i] = (f(&plus) - f(&minus)) / (2.0 * h);
    }
    grad
}

/// Relative error between an analytic gradient and its FD estimate:
/// ‖a − b‖ / max(‖a‖, ‖b‖, 1e-12).
pub fn relative_error(analytic: &Array, numeric: &Array) -> f64 {
    let mut diff = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (a, b) in analytic.values().iter().zip(numeric.values()) {
        diff += (a - b) * (a - b);
        na += a * a;
        nb += b * b;
    }
    diff.sqrt() / na.sqrt().max(nb.sqrt()).max(1e-12)
}

/// Checks an analytic gradient against central differences; panics with a
/// diagnostic if the relative error exceeds `tol`.
pub fn assert_gradient_matches(
    label: &str,
    f: &mut dyn FnMut(&Array) -> f64,
    x: &Array,
    analytic: &Array,
    tol: f64,
) {
    let numeric = fd_gradient(f, x, FD_STEP);
    let err = relative_error(analytic, &numeric);
    assert!(
        err < tol,
        "{label}: gradient relative error {err:.3e} exceeds {tol:.1e}"
    );
}
