//! Closed-form asymptotic predictions and exact moment computations.

mod covariance;
mod martingale;
mod moments;
mod spectral;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;

pub use covariance::{critical_covariance, diffusive_covariance};
pub use martingale::{
    hyper_3f2_bound, martingale_coefficient, martingale_coefficients, squared_coefficient_sum, tendency_mean,
    tendency_second_moment,
};
pub use moments::{
    exact_moment_propagation, limit_moment_matrix, LimitMoments, MomentPropagator, MomentRow, MomentTable,
};
pub use spectral::{sigma_i, sigma_ii, spectral_decomposition, SpectralData};

/// `|p - p_c|` below which parameters count as critical.
pub const CRITICAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    Diffusive,
    Critical,
    Superdiffusive,
    NoTransition,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Diffusive => "diffusive",
            Regime::Critical => "critical",
            Regime::Superdiffusive => "superdiffusive",
            Regime::NoTransition => "no-transition",
        }
    }

    /// Whether `Var(S_n)` grows linearly, i.e. the second eigenvalue is
    /// below one half. Memoryless walks (`theta = 0`) qualify.
    pub fn is_diffusive(self) -> bool {
        matches!(self, Regime::Diffusive | Regime::NoTransition)
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Critical memory strength `p_c = (K + 2 theta - 1) / (2 theta K)`.
///
/// Values above one mean there is no superdiffusive phase for this `theta`.
pub fn critical_probability(k: usize, theta: f64) -> Result<f64> {
    if k < 2 {
        return Err(Error::InvalidParams(format!("K = {k} must be at least 2")));
    }
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::NoTransition);
    }
    let k = k as f64;
    Ok((k + 2.0 * theta - 1.0) / (2.0 * theta * k))
}

pub fn classify_regime(params: &ModelParams) -> Regime {
    match critical_probability(params.k(), params.theta()) {
        Err(_) => Regime::NoTransition,
        Ok(pc) if (params.p() - pc).abs() < CRITICAL_TOL => Regime::Critical,
        Ok(pc) if params.p() < pc => Regime::Diffusive,
        Ok(_) => Regime::Superdiffusive,
    }
}

pub(crate) fn require_regime(params: &ModelParams, expected: &'static str, ok: impl Fn(Regime) -> bool) -> Result<()> {
    let actual = classify_regime(params);
    if ok(actual) {
        Ok(())
    } else {
        Err(Error::RegimeMismatch { expected, actual })
    }
}

/// Almost-sure limit of `S_n / n`.
pub fn lln_limit(params: &ModelParams) -> Vec<f64> {
    let k = params.k() as f64;
    let p = params.p();
    let theta = params.theta();
    let denom = k - 1.0 + theta * (1.0 - k * p);
    assert!(denom > 0.0, "K - 1 + theta (1 - Kp) must be positive, got {denom}");
    let mut v = vec![0.0; params.d()];
    v[0] = (1.0 - theta) * (k * p - 1.0) / denom;
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn thresholds() {
        assert_eq!(critical_probability(2, 1.0).unwrap(), 0.75);
        assert_abs_diff_eq!(critical_probability(3, 1.0).unwrap(), 2.0 / 3.0, epsilon = 1e-15);
        for k in 2..=12 {
            assert_eq!(critical_probability(k, 0.5).unwrap(), 1.0);
        }
        assert_eq!(critical_probability(4, 0.0), Err(Error::NoTransition));
    }

    #[test]
    fn threshold_bounds() {
        for k in 2..=9 {
            for i in 1..=100 {
                let theta = i as f64 / 100.0;
                let pc = critical_probability(k, theta).unwrap();
                assert!(pc >= 0.5);
                assert_eq!(pc < 1.0, theta > 0.5, "K = {k}, theta = {theta}");
            }
        }
    }

    #[test]
    fn regimes() {
        let at = |p| classify_regime(&ModelParams::new(1, false, p, 1.0).unwrap());
        assert_eq!(at(0.6), Regime::Diffusive);
        assert_eq!(at(0.75), Regime::Critical);
        assert_eq!(at(0.9), Regime::Superdiffusive);
        assert_eq!(
            classify_regime(&ModelParams::new(2, true, 0.9, 0.0).unwrap()),
            Regime::NoTransition
        );
    }

    #[test]
    fn regime_matches_second_eigenvalue() {
        for k in 2..=7 {
            for pi in 0..=20 {
                for ti in 1..=10 {
                    let m = ModelParams::from_choices(k, pi as f64 / 20.0, ti as f64 / 10.0).unwrap();
                    let lambda2 = m.lambda2();
                    match classify_regime(&m) {
                        Regime::Diffusive => assert!(lambda2 < 0.5),
                        Regime::Superdiffusive => assert!(lambda2 > 0.5),
                        Regime::Critical => assert!((lambda2 - 0.5).abs() < 1e-12),
                        Regime::NoTransition => unreachable!(),
                    }
                }
            }
        }
    }

    #[test]
    fn lln_cases() {
        assert_eq!(
            lln_limit(&ModelParams::new(2, false, 0.8, 1.0).unwrap()),
            vec![0.0, 0.0]
        );
        let m = ModelParams::new(2, true, 0.2, 0.4).unwrap();
        assert_abs_diff_eq!(lln_limit(&m)[0], 0.0, epsilon = 1e-15);
        let m = ModelParams::new(1, false, 0.7, 0.0).unwrap();
        assert_abs_diff_eq!(lln_limit(&m)[0], 0.4, epsilon = 1e-15);
    }

    #[test]
    fn lln_is_fixed_point_of_mean_drift() {
        // c = a theta c + (1 - theta) a
        for k in 2..=6 {
            for p in [0.1, 0.4, 0.8, 1.0] {
                for theta in [0.0, 0.3, 0.7] {
                    let m = ModelParams::from_choices(k, p, theta).unwrap();
                    let c = lln_limit(&m)[0];
                    assert_abs_diff_eq!(c, m.lambda2() * c + (1.0 - theta) * m.a(), epsilon = 1e-14);
                }
            }
        }
    }
}
