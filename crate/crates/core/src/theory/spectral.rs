use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::theory::{require_regime, Regime};
use crate::urn::mean_replacement_matrix;

/// Eigen-structure of the mean replacement matrix in closed form.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralData {
    pub a: DMatrix<f64>,
    pub lambda1: f64,
    /// Shared by eigenvectors `2..=K`.
    pub lambda2: f64,
    /// Left eigenvectors, `u[0] = (1, ..., 1)`.
    pub u: Vec<DVector<f64>>,
    /// Right eigenvectors, biorthogonal to `u`.
    pub v: Vec<DVector<f64>>,
}

impl SpectralData {
    pub fn eigenvalue(&self, i: usize) -> f64 {
        if i == 0 {
            self.lambda1
        } else {
            self.lambda2
        }
    }
}

pub fn spectral_decomposition(params: &ModelParams) -> Result<SpectralData> {
    let lambda2 = params.lambda2();
    if (1.0 - lambda2).abs() < 1e-12 {
        return Err(Error::DegenerateSpectrum);
    }
    let k = params.k();
    let kf = k as f64;
    let p = params.p();
    let norm = 1.0 / ((kf - 1.0) * (1.0 - lambda2));

    let mut u = Vec::with_capacity(k);
    let mut v = Vec::with_capacity(k);
    u.push(DVector::from_element(k, 1.0));
    let mut v1 = DVector::from_element(k, (1.0 - p) * norm);
    v1[0] = (kf - 1.0) * (p - lambda2) * norm;
    v.push(v1);
    for j in 1..k {
        let mut uj = DVector::from_element(k, (1.0 - p) * norm);
        uj[j] = ((kf - 1.0) * lambda2 - (kf - 2.0) - p) * norm;
        u.push(uj);
        let mut vj = DVector::zeros(k);
        vj[0] = 1.0;
        vj[j] = -1.0;
        v.push(vj);
    }
    Ok(SpectralData {
        a: mean_replacement_matrix(params),
        lambda1: 1.0,
        lambda2,
        u,
        v,
    })
}

/// The `K x K` "rows" pattern shared by both limiting covariances:
/// `corner` at (1,1), `edge` on the rest of row/column 1, `diag` on the
/// remaining diagonal and `off` elsewhere.
fn bordered(k: usize, corner: f64, edge: f64, diag: f64, off: f64) -> DMatrix<f64> {
    DMatrix::from_fn(k, k, |i, j| match (i, j) {
        (0, 0) => corner,
        (0, _) | (_, 0) => edge,
        _ if i == j => diag,
        _ => off,
    })
}

/// Limiting covariance of `U_n / sqrt(n)` for the urn counts in the
/// diffusive regime (second eigenvalue below one half).
pub fn sigma_i(params: &ModelParams) -> Result<DMatrix<f64>> {
    require_regime(params, "diffusive", Regime::is_diffusive)?;
    let k = params.k();
    let kf = k as f64;
    let p = params.p();
    let l2 = params.lambda2();
    let a = (kf - 1.0) * (p - l2);
    let b = (p - 1.0) + (kf - 1.0) * (1.0 - l2);
    let c = (1.0 - p) / ((kf - 1.0).powi(2) * (1.0 - l2).powi(2) * (1.0 - 2.0 * l2));
    Ok(bordered(k, (kf - 1.0) * a, -a, b, p - 1.0) * c)
}

/// Limiting covariance of `U_n / sqrt(n log n)` at the critical point, as
/// given by the diagonal terms of the critical eigenspace.
pub fn sigma_ii(params: &ModelParams) -> Result<DMatrix<f64>> {
    require_regime(params, "critical", |r| r == Regime::Critical)?;
    let k = params.k();
    let kf = k as f64;
    let p = params.p();
    let c = 4.0 * (1.0 - p) / (kf - 1.0).powi(2) * (p + (kf - 3.0) / 2.0);
    Ok(bordered(k, kf - 1.0, -1.0, 1.0, 0.0) * c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::theory::{classify_regime, critical_covariance, critical_probability, diffusive_covariance};
    use crate::urn::{pairing_matrix, second_moment_matrices};

    fn grid() -> Vec<ModelParams> {
        let mut out = Vec::new();
        for k in 2..=5 {
            for p in [0.05, 0.3, 0.5, 0.72, 0.95] {
                for theta in [0.0, 0.35, 0.6, 0.85, 1.0] {
                    out.push(ModelParams::from_choices(k, p, theta).unwrap());
                }
            }
        }
        out
    }

    #[test]
    fn closed_forms_are_eigenvectors() {
        for m in grid() {
            let s = spectral_decomposition(&m).unwrap();
            for i in 0..m.k() {
                let lam = s.eigenvalue(i);
                assert!((&s.a * &s.v[i] - &s.v[i] * lam).amax() < 1e-12);
                assert!((s.u[i].transpose() * &s.a - s.u[i].transpose() * lam).amax() < 1e-12);
                for j in 0..m.k() {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((s.u[i].dot(&s.v[j]) - want).abs() < 1e-12);
                }
            }
            assert!((s.v[0].sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn biorthogonality_example() {
        let m = ModelParams::from_choices(4, 0.7, 0.8).unwrap();
        let s = spectral_decomposition(&m).unwrap();
        let gram = DMatrix::from_fn(4, 4, |i, j| s.u[i].dot(&s.v[j]));
        assert!((gram - DMatrix::identity(4, 4)).amax() < 1e-12);
        assert_eq!(s.u[0], DVector::from_element(4, 1.0));
        assert_eq!(s.v[2].as_slice(), &[1.0, 0.0, -1.0, 0.0]);
    }

    #[test]
    fn degenerate_spectrum() {
        let m = ModelParams::new(2, false, 1.0, 1.0).unwrap();
        assert_eq!(spectral_decomposition(&m), Err(Error::DegenerateSpectrum));
    }

    /// Janson's sum over the small-eigenvalue eigenspace, written out from
    /// the eigenvectors and `B` directly.
    fn sigma_i_by_spectral_sum(m: &ModelParams) -> DMatrix<f64> {
        let s = spectral_decomposition(m).unwrap();
        let (_, b) = second_moment_matrices(m).unwrap();
        let k = m.k();
        let mut sum = DMatrix::zeros(k, k);
        for j in 1..k {
            for l in 1..k {
                let w = (s.u[j].transpose() * &b * &s.u[l])[(0, 0)] / (1.0 - 2.0 * s.lambda2);
                sum += &s.v[j] * s.v[l].transpose() * w;
            }
        }
        sum
    }

    #[test]
    fn sigma_i_matches_spectral_sum() {
        for m in grid().into_iter().filter(|m| classify_regime(m).is_diffusive()) {
            let closed = sigma_i(&m).unwrap();
            let summed = sigma_i_by_spectral_sum(&m);
            assert!((&closed - &summed).amax() < 1e-10, "{m:?}");
            for r in 0..m.k() {
                assert!(closed.row(r).sum().abs() < 1e-12);
            }
        }
    }

    #[test]
    fn projection_of_sigma_i_is_diffusive_covariance() {
        let mut checked = 0;
        for m in grid().into_iter().filter(|m| classify_regime(m).is_diffusive()) {
            let l = pairing_matrix(m.d(), m.lazy());
            let projected = &l * sigma_i(&m).unwrap() * l.transpose();
            let cov = diffusive_covariance(&m, 1.0, 1.0).unwrap();
            assert!((projected - cov).amax() < 1e-10, "{m:?}");
            checked += 1;
        }
        assert!(checked >= 50, "only {checked} grid points");
    }

    #[test]
    fn projection_of_sigma_ii_is_critical_covariance() {
        for k in 2..=7 {
            for theta in [0.55, 0.7, 0.9, 1.0] {
                let pc = critical_probability(k, theta).unwrap();
                let m = ModelParams::from_choices(k, pc, theta).unwrap();
                let l = pairing_matrix(m.d(), m.lazy());
                let projected = &l * sigma_ii(&m).unwrap() * l.transpose();
                let cov = critical_covariance(&m, 1.0, 1.0).unwrap();
                assert!((projected - cov).amax() < 1e-10);
            }
        }
    }

    #[test]
    fn sigma_ii_vanishes_at_p_one() {
        let m = ModelParams::from_choices(3, 1.0, 0.5).unwrap();
        assert_eq!(classify_regime(&m), Regime::Critical);
        assert!(sigma_ii(&m).unwrap().amax() == 0.0);
    }

    #[test]
    fn regime_guards() {
        let diffusive = ModelParams::new(1, false, 0.6, 1.0).unwrap();
        let critical = ModelParams::new(1, false, 0.75, 1.0).unwrap();
        let superdiffusive = ModelParams::new(1, false, 0.9, 1.0).unwrap();
        assert!(sigma_i(&diffusive).is_ok());
        assert!(sigma_i(&critical).is_err());
        assert!(sigma_i(&superdiffusive).is_err());
        assert!(sigma_ii(&critical).is_ok());
        assert!(sigma_ii(&diffusive).is_err());
        assert!(sigma_i(&ModelParams::new(2, false, 0.9, 0.0).unwrap()).is_ok());
    }
}
