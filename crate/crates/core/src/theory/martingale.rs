use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::special::{ln_gamma, ln_gamma_ratio};
use crate::theory::{classify_regime, Regime};

/// Absolute accuracy of [`squared_coefficient_sum`].
pub const SERIES_TOL: f64 = 1e-10;
const SERIES_MAX_TERMS: u64 = 100_000_000;
/// Partial products are re-anchored on the log-gamma form this often.
const REANCHOR_EVERY: u64 = 4096;

/// `a_k = prod_{l < k} l / (l + b) = Gamma(b + 1) Gamma(k) / Gamma(b + k)`.
///
/// Returns infinity for `k >= 2` when `b = -1`, where the product hits a
/// zero denominator.
pub fn martingale_coefficient(b: f64, k: u64) -> f64 {
    assert!(k >= 1, "coefficients are indexed from 1");
    if k == 1 {
        return 1.0;
    }
    if b <= -1.0 {
        return f64::INFINITY;
    }
    (ln_gamma(b + 1.0) - ln_gamma_ratio(k as f64, b)).exp()
}

/// `(a_1, ..., a_n)` for `b = a * theta`.
pub fn martingale_coefficients(params: &ModelParams, n: usize) -> Vec<f64> {
    let b = params.a() * params.theta();
    (1..=n as u64).map(|k| martingale_coefficient(b, k)).collect()
}

/// `sum_{l >= 1} a_l^2 = 3F2(1, 1, 1; b + 1, b + 1; 1)` for `b > 1/2`.
///
/// Terms are summed until the remaining tail is bracketed to within
/// [`SERIES_TOL`]; the midpoint of the bracket is added. With
/// `r_m = a_{m+1} / a_m = m / (m + b)`, for `l > N`:
///
/// ```text
/// a_N e^{-b/N} (N / (l - 1))^b  <=  a_l  <=  a_N ((N + b) / (l + b))^b
/// ```
///
/// so the tail lies between `a_N^2 e^{-2b/N} N / (2b - 1)` and
/// `a_N^2 (N + b) / (2b - 1)`.
pub fn squared_coefficient_sum(b: f64) -> Result<f64> {
    if 2.0 * b <= 1.0 || b.is_nan() {
        return Err(Error::DivergentSeries(2.0 * b));
    }
    let mut sum = 0.0;
    let mut coeff = 1.0;
    let mut n = 1u64;
    loop {
        sum += coeff * coeff;
        let nf = n as f64;
        let scale = coeff * coeff / (2.0 * b - 1.0);
        let upper = scale * (nf + b);
        let lower = scale * nf * (-2.0 * b / nf).exp();
        if 0.5 * (upper - lower) < SERIES_TOL {
            return Ok(sum + 0.5 * (upper + lower));
        }
        if n >= SERIES_MAX_TERMS {
            return Err(Error::NotConverged(format!(
                "tail bracket {} after {n} terms (b = {b})",
                upper - lower
            )));
        }
        n += 1;
        coeff = if n.is_multiple_of(REANCHOR_EVERY) {
            martingale_coefficient(b, n)
        } else {
            coeff * (nf / (nf + b))
        };
    }
}

/// `3F2(1, 1, 1; a theta + 1, a theta + 1; 1)`, the bound on the martingale
/// bracket in the superdiffusive regime.
pub fn hyper_3f2_bound(params: &ModelParams) -> Result<f64> {
    let b = params.a() * params.theta();
    if classify_regime(params) != Regime::Superdiffusive {
        return Err(Error::DivergentSeries(2.0 * b));
    }
    squared_coefficient_sum(b)
}

/// Mean of one tendency-branch step over the `K` colours,
/// `(p, (1 - p)/(K - 1), ...)`.
pub fn tendency_mean(params: &ModelParams) -> Vec<f64> {
    let k = params.k();
    let mut v = vec![(1.0 - params.p()) / (k as f64 - 1.0); k];
    v[0] = params.p();
    v
}

/// Diagonal second moment of one tendency-branch step over the `K` colours.
///
/// A colour indicator is its own square, so this is `diag(tendency_mean)`.
/// Exact moment propagation works with the per-colour replacement laws
/// directly and does not need it.
pub fn tendency_second_moment(params: &ModelParams) -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_vec(tendency_mean(params)))
}
