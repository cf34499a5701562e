use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

fn check(d: usize, alpha: f64) -> Result<()> {
    if d == 0 {
        return Err(Error::Config("biased init needs d >= 1".into()));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::Config(format!("alpha must be >= 0, got {alpha}")));
    }
    Ok(())
}

/// `g + α·1` with `g` a standard-Gaussian draw of length `d+1`. With
/// non-negative inputs this pushes initial scores towards `+1` (normal).
pub fn biased_init<F: Scalar, R: Rng + ?Sized>(d: usize, alpha: f64, rng: &mut R) -> Result<Array1<F>> {
    check(d, alpha)?;
    Ok((0..=d)
        .map(|_| F::lit(rng.sample::<f64, _>(StandardNormal) + alpha))
        .collect())
}

/// Multi-class counterpart: `+α` on the normal column, `−α` on every
/// anomaly column. Draws are taken row-major.
pub fn biased_init_multiclass<F: Scalar, R: Rng + ?Sized>(
    d: usize,
    classes: usize,
    alpha: f64,
    rng: &mut R,
) -> Result<Array2<F>> {
    check(d, alpha)?;
    if classes < 2 {
        return Err(Error::Config(format!("need C >= 2, got {classes}")));
    }
    let mut w = Array2::zeros((d + 1, classes));
    for ((_, c), v) in w.indexed_iter_mut() {
        let bias = if c == 0 { alpha } else { -alpha };
        *v = F::lit(rng.sample::<f64, _>(StandardNormal) + bias);
    }
    Ok(w)
}
