//! Exact first and second moments by forward propagation on the urn counts.
//!
//! With `U_n` the count vector after `n` steps, `A` the mean replacement
//! matrix and `xi` the added colour,
//!
//! ```text
//! E[U_{n+1} | U_n]     = (I + A/n) U_n
//! Cov(xi | U_n)         = diag(A U_n / n) - (A U_n / n)(A U_n / n)^T
//! ```
//!
//! so the mean `m_n` and covariance `V_n` evolve as
//!
//! ```text
//! m_{n+1} = m_n + A m_n / n
//! V_{n+1} = V_n + (A V_n + V_n A^T) / n + diag(A m_n) / n - (A m_n)(A m_n)^T / n^2
//! ```
//!
//! `diag(A m_n) = sum_j E[xi_j xi_j^T] m_{n,j}` because each `xi_j` is a basis
//! vector. Propagating the covariance rather than the raw second moment
//! avoids cancelling two `O(n^2)` quantities when the walk has a drift.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{InitialSpec, ModelParams};
use crate::special::ln_gamma_ratio;
use crate::theory::{require_regime, Regime};
use crate::urn::{mean_replacement_matrix, pairing_matrix};

/// Exact moments after `n` steps.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentRow {
    pub n: u64,
    pub mean_counts: DVector<f64>,
    /// `E(U_n U_n^T)`.
    pub counts_second: DMatrix<f64>,
    pub mean_position: DVector<f64>,
    pub position_cov: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentTable {
    pub rows: Vec<MomentRow>,
}

impl MomentTable {
    /// Row for step `n` (1-based).
    pub fn at(&self, n: u64) -> Option<&MomentRow> {
        n.checked_sub(1).and_then(|i| self.rows.get(i as usize))
    }
}

/// Steps the exact count moments forward one step at a time.
#[derive(Debug, Clone)]
pub struct MomentPropagator {
    a: DMatrix<f64>,
    pairing: DMatrix<f64>,
    n: u64,
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    drift: DVector<f64>,
    scratch: DMatrix<f64>,
}

impl MomentPropagator {
    /// Moments after the first step.
    pub fn new(params: &ModelParams, init: &InitialSpec) -> Result<Self> {
        let first = DVector::from_vec(init.law(params)?);
        let cov = DMatrix::from_diagonal(&first) - &first * first.transpose();
        let k = params.k();
        Ok(MomentPropagator {
            a: mean_replacement_matrix(params),
            pairing: pairing_matrix(params.d(), params.lazy()),
            n: 1,
            mean: first,
            cov,
            drift: DVector::zeros(k),
            scratch: DMatrix::zeros(k, k),
        })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn advance(&mut self) {
        let n = self.n as f64;
        self.drift.gemv(1.0, &self.a, &self.mean, 0.0);
        self.scratch.gemm(1.0 / n, &self.a, &self.cov, 0.0);
        let k = self.cov.nrows();
        for i in 0..k {
            for j in 0..k {
                self.cov[(i, j)] +=
                    self.scratch[(i, j)] + self.scratch[(j, i)] - self.drift[i] * self.drift[j] / (n * n);
            }
            self.cov[(i, i)] += self.drift[i] / n;
        }
        self.mean.axpy(1.0 / n, &self.drift, 1.0);
        self.n += 1;
    }

    pub fn advance_to(&mut self, n: u64) {
        while self.n < n {
            self.advance();
        }
    }

    pub fn mean_counts(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn counts_cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn mean_position(&self) -> DVector<f64> {
        &self.pairing * &self.mean
    }

    pub fn position_cov(&self) -> DMatrix<f64> {
        &self.pairing * &self.cov * self.pairing.transpose()
    }

    pub fn row(&self) -> MomentRow {
        MomentRow {
            n: self.n,
            mean_counts: self.mean.clone(),
            counts_second: &self.cov + &self.mean * self.mean.transpose(),
            mean_position: self.mean_position(),
            position_cov: self.position_cov(),
        }
    }
}

/// Exact moments for `n = 1..=n_max`.
pub fn exact_moment_propagation(params: &ModelParams, init: &InitialSpec, n_max: u64) -> Result<MomentTable> {
    if n_max < 1 {
        return Err(Error::InvalidArgument("n_max must be at least 1".into()));
    }
    let mut prop = MomentPropagator::new(params, init)?;
    let mut rows = Vec::with_capacity(n_max as usize);
    rows.push(prop.row());
    while prop.n() < n_max {
        prop.advance();
        rows.push(prop.row());
    }
    Ok(MomentTable { rows })
}

/// First and second moments of the superdiffusive limit `L`.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitMoments {
    /// `E(L)`, zero because `a_n Ŝ_n` is a centred martingale.
    pub mean: DVector<f64>,
    /// Extrapolated `E(L L^T)`.
    pub second: DMatrix<f64>,
    /// Largest `n` propagated.
    pub n_max: u64,
    /// Raw `(Gamma(n) / Gamma(n + a theta))^2 Cov(S_n)` at each `n = 2^k`.
    pub raw: Vec<(u64, DMatrix<f64>)>,
}

/// Convergence threshold on successive extrapolated estimates (max norm).
pub const LIMIT_TOL: f64 = 1e-4;
const LIMIT_MIN_LOG2: u32 = 4;
const LIMIT_MAX_LOG2: u32 = 26;

/// Aitken's delta-squared on three successive iterates, entrywise.
fn aitken(x0: &DMatrix<f64>, x1: &DMatrix<f64>, x2: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(x0.nrows(), x0.ncols(), |i, j| {
        let (a, b, c) = (x0[(i, j)], x1[(i, j)], x2[(i, j)]);
        let d1 = c - b;
        let d0 = b - a;
        let denom = d1 - d0;
        // Accelerate only when the differences shrink geometrically.
        if denom.abs() > 1e-300 && d0 != 0.0 && (d1 / d0).abs() < 1.0 && d1 / d0 > 0.0 {
            c - d1 * d1 / denom
        } else {
            c
        }
    })
}

/// `E(L L^T) = lim (Gamma(n) / Gamma(n + a theta))^2 Cov(S_n)` by exact
/// propagation to `n = 2^k` and Aitken extrapolation over the last three
/// iterates. Converged once two successive extrapolations agree to
/// [`LIMIT_TOL`] in max norm.
pub fn limit_moment_matrix(params: &ModelParams, init: &InitialSpec) -> Result<LimitMoments> {
    require_regime(params, "superdiffusive", |r| r == Regime::Superdiffusive)?;
    let b = params.a() * params.theta();
    let mut prop = MomentPropagator::new(params, init)?;
    let mut raw: Vec<(u64, DMatrix<f64>)> = Vec::new();
    let mut accelerated: Vec<DMatrix<f64>> = Vec::new();
    for log2 in LIMIT_MIN_LOG2..=LIMIT_MAX_LOG2 {
        let n = 1u64 << log2;
        prop.advance_to(n);
        let scale = (-2.0 * ln_gamma_ratio(n as f64, b)).exp();
        raw.push((n, prop.position_cov() * scale));
        if raw.len() >= 3 {
            let l = raw.len();
            accelerated.push(aitken(&raw[l - 3].1, &raw[l - 2].1, &raw[l - 1].1));
        }
        if accelerated.len() >= 2 {
            let l = accelerated.len();
            if (&accelerated[l - 1] - &accelerated[l - 2]).amax() < LIMIT_TOL {
                return Ok(LimitMoments {
                    mean: DVector::zeros(params.d()),
                    second: accelerated[l - 1].clone(),
                    n_max: n,
                    raw,
                });
            }
        }
    }
    Err(Error::NotConverged(format!(
        "limit second moment did not settle by n = 2^{LIMIT_MAX_LOG2}"
    )))
}
