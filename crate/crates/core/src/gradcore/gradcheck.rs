use crate::error::{dim_err, Error, Result};

pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Compares `analytic` against central differences of `f` at `point`.
///
/// Returns the largest per-coordinate error `|fd − an| / max(1, |fd|, |an|)`.
pub fn finite_diff_check<F>(mut f: F, point: &[f64], analytic: &[f64], h: f64) -> Result<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    if point.len() != analytic.len() {
        return dim_err(format!(
            "point has {} coordinates, gradient {}",
            point.len(),
            analytic.len()
        ));
    }
    if h.is_nan() || h <= 0.0 {
        return Err(Error::Config(format!("step must be positive, got {h}")));
    }
    let mut x = point.to_vec();
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + h;
        let up = eval(&mut f, &x)?;
        x[i] = orig - h;
        let down = eval(&mut f, &x)?;
        x[i] = orig;
        let fd = (up - down) / (2.0 * h);
        let an = analytic[i];
        let err = (fd - an).abs() / 1f64.max(fd.abs()).max(an.abs());
        worst = worst.max(err);
    }
    Ok(worst)
}

fn eval<F: FnMut(&[f64]) -> f64>(f: &mut F, x: &[f64]) -> Result<f64> {
    let y = f(x);
    if !y.is_finite() {
        return Err(Error::Numerics(format!("objective returned {y}")));
    }
    Ok(y)
}
