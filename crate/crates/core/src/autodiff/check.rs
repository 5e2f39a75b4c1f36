use super::{Tape, Tensor, Var};
use crate::error::{Error, Result};

/// `|a - n| / max(1e-8, |a| + |n|)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

/// Compares the tape gradient of the scalar `f` at `point` with central differences of step
/// `eps` and returns the largest per-coordinate relative error.
///
/// `f` receives a fresh tape and the input recorded as a parameter; it must be deterministic.
pub fn gradient_check<F>(point: &Tensor<f64>, eps: f64, f: F) -> Result<f64>
where
    F: Fn(&mut Tape<f64>, Var) -> Result<Var>,
{
    let eval = |t: &Tensor<f64>| -> Result<f64> {
        let mut tape = Tape::new();
        let x = tape.param(t.clone());
        let y = f(&mut tape, x)?;
        let v = tape.value(y);
        if v.shape() != (1, 1) {
            return Err(Error::shape("gradient_check", format!("function value has shape {:?}", v.shape())));
        }
        Ok(v.data[0])
    };

    let mut tape = Tape::new();
    let x = tape.param(point.clone());
    let y = f(&mut tape, x)?;
    if tape.shape(y) != (1, 1) {
        return Err(Error::shape("gradient_check", format!("function value has shape {:?}", tape.shape(y))));
    }
    if !tape.value(y).all_finite() {
        return Err(Error::NonFinite("function value at the check point".into()));
    }
    tape.backward(y)?;
    let analytic = tape.grad(x).cloned().unwrap_or_else(|| Tensor::zeros(point.rows, point.cols));

    let mut worst = 0.0f64;
    let mut probe = point.clone();
    for i in 0..point.len() {
        let orig = probe.data[i];
        probe.data[i] = orig + eps;
        let up = eval(&probe)?;
        probe.data[i] = orig - eps;
        let down = eval(&probe)?;
        probe.data[i] = orig;
        let numeric = (up - down) / (2.0 * eps);
        let a = analytic.data[i];
        if !numeric.is_finite() || !a.is_finite() {
            return Err(Error::NonFinite(format!("gradient coordinate {i}")));
        }
        worst = worst.max(relative_error(a, numeric));
    }
    Ok(worst)
}
