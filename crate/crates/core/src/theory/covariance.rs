use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::theory::{require_regime, Regime};

fn check_times(s: f64, t: f64) -> Result<()> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::InvalidArgument(format!("time s = {s} must be positive")));
    }
    if !(t >= s && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("time t = {t} must be at least s = {s}")));
    }
    Ok(())
}

/// `E(W_s W_t^T)` of the Gaussian limit of the centred, `sqrt(n)`-scaled
/// walk in the diffusive regime.
pub fn diffusive_covariance(params: &ModelParams, s: f64, t: f64) -> Result<DMatrix<f64>> {
    require_regime(params, "diffusive", Regime::is_diffusive)?;
    check_times(s, t)?;
    let k = params.k() as f64;
    let p = params.p();
    let theta = params.theta();
    let alpha = (k - 1.0) * p + theta * (1.0 - k * p);
    let beta = k - 1.0 + theta * (1.0 - k * p);
    let omega = (k - 1.0) * (1.0 - p) / (beta * beta * (k - 1.0 + 2.0 * theta * (1.0 - k * p)));
    let scale = s * (t / s).powf(params.lambda2()) * omega;
    let mut diag = vec![2.0 * beta; params.d()];
    diag[0] = (k + 1.0) * alpha + beta + p - 1.0;
    Ok(DMatrix::from_diagonal(&(nalgebra::DVector::from_vec(diag) * scale)))
}

/// `E(W_s W_t^T)` of the Gaussian limit at the critical point, with
/// `sqrt(n log n)` scaling.
///
/// For `K >= 3` this is the diagonal-eigenspace form; see
/// [`crate::theory::sigma_ii`].
pub fn critical_covariance(params: &ModelParams, s: f64, t: f64) -> Result<DMatrix<f64>> {
    require_regime(params, "critical", |r| r == Regime::Critical)?;
    check_times(s, t)?;
    let k = params.k() as f64;
    let p = params.p();
    let scale = 4.0 * s * (1.0 - p) / (k - 1.0).powi(2) * (p + (k - 3.0) / 2.0);
    let mut diag = vec![2.0; params.d()];
    diag[0] = k + 2.0;
    Ok(DMatrix::from_diagonal(&(nalgebra::DVector::from_vec(diag) * scale)))
}
