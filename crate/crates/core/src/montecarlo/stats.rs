use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};

use super::CheckpointSummary;

/// Exact integer sums of positions and their outer products.
///
/// Covariances are formed from the exact numerator
/// `R * sum(x x^T) - sum(x) sum(x)^T`, so any merge order gives the same
/// result to the bit.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct IntMoments {
    count: u64,
    sum: Vec<i128>,
    /// Row-major `d x d`.
    outer: Vec<i128>,
}

impl IntMoments {
    pub fn new(dim: usize) -> Self {
        IntMoments {
            count: 0,
            sum: vec![0; dim],
            outer: vec![0; dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.sum.len()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn sum(&self) -> &[i128] {
        &self.sum
    }

    pub fn add(&mut self, x: &[i64]) {
        let d = self.dim();
        debug_assert_eq!(x.len(), d);
        self.count += 1;
        for i in 0..d {
            let xi = x[i] as i128;
            self.sum[i] += xi;
            for (o, &xj) in self.outer[i * d..(i + 1) * d].iter_mut().zip(x) {
                *o += xi * xj as i128;
            }
        }
    }

    pub fn merge(&mut self, other: &IntMoments) {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch");
        self.count += other.count;
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        for (a, b) in self.outer.iter_mut().zip(&other.outer) {
            *a += b;
        }
    }

    pub fn mean(&self) -> Vec<f64> {
        let r = self.count as f64;
        self.sum.iter().map(|&s| s as f64 / r).collect()
    }

    /// Unbiased sample covariance; zero with fewer than two samples.
    pub fn covariance(&self) -> DMatrix<f64> {
        let d = self.dim();
        let r = self.count as i128;
        if r < 2 {
            return DMatrix::zeros(d, d);
        }
        let denom = (r * (r - 1)) as f64;
        DMatrix::from_fn(d, d, |i, j| {
            let num = r * self.outer[i * d + j] - self.sum[i] * self.sum[j];
            num as f64 / denom
        })
    }
}

/// Least-squares fit of `log trace Cov(S_n)` against `log n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentFit {
    pub slope: f64,
    pub stderr: f64,
    pub intercept: f64,
    pub points: usize,
}

pub fn scaling_exponent(summaries: &[CheckpointSummary]) -> Result<ExponentFit> {
    let m = summaries.len();
    if m < 3 {
        return Err(Error::InvalidArgument(format!("need at least 3 checkpoints, got {m}")));
    }
    if summaries.windows(2).any(|w| w[0].n >= w[1].n) {
        return Err(Error::InvalidArgument("checkpoints must be increasing".into()));
    }
    let span = summaries[m - 1].n as f64 / summaries[0].n as f64;
    if span < 100.0 {
        return Err(Error::InvalidArgument(format!(
            "checkpoints span a factor {span}, need at least two decades"
        )));
    }
    let mut xs = Vec::with_capacity(m);
    let mut ys = Vec::with_capacity(m);
    for s in summaries {
        let tr = s.cov.trace();
        if tr <= 0.0 || tr.is_nan() {
            return Err(Error::Degenerate(format!("zero variance at n = {}", s.n)));
        }
        xs.push((s.n as f64).ln());
        ys.push(tr.ln());
    }
    let mf = m as f64;
    let xbar = xs.iter().sum::<f64>() / mf;
    let ybar = ys.iter().sum::<f64>() / mf;
    let sxx: f64 = xs.iter().map(|x| (x - xbar).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xbar) * (y - ybar)).sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let rss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let stderr = (rss / (mf - 2.0) / sxx).sqrt();
    Ok(ExponentFit {
        slope,
        stderr,
        intercept,
        points: m,
    })
}

/// Standard error of the sample covariance of `x` and `y`:
/// `sd((x - x̄)(y - ȳ)) / sqrt(R)`.
pub fn covariance_entry_se(x: &[f64], y: &[f64]) -> f64 {
    let r = x.len() as f64;
    let mx = x.iter().sum::<f64>() / r;
    let my = y.iter().sum::<f64>() / r;
    let prods: Vec<f64> = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).collect();
    let mp = prods.iter().sum::<f64>() / r;
    let var = prods.iter().map(|z| (z - mp).powi(2)).sum::<f64>() / (r - 1.0);
    (var / r).sqrt()
}

fn column(samples: &[Vec<i64>], i: usize) -> Vec<f64> {
    samples.iter().map(|s| s[i] as f64).collect()
}

/// Sample `Cov(X, Y)` of paired samples and the standard error of each entry.
pub fn cross_covariance(xs: &[Vec<i64>], ys: &[Vec<i64>]) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidArgument(
            "need at least two paired samples of equal count".into(),
        ));
    }
    let d = xs[0].len();
    let r = xs.len() as f64;
    let xc: Vec<Vec<f64>> = (0..d).map(|i| column(xs, i)).collect();
    let yc: Vec<Vec<f64>> = (0..d).map(|i| column(ys, i)).collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / r;
    let mut cov = DMatrix::zeros(d, d);
    let mut se = DMatrix::zeros(d, d);
    for i in 0..d {
        let mx = mean(&xc[i]);
        for j in 0..d {
            let my = mean(&yc[j]);
            let c: f64 = xc[i].iter().zip(&yc[j]).map(|(a, b)| (a - mx) * (b - my)).sum();
            cov[(i, j)] = c / (r - 1.0);
            se[(i, j)] = covariance_entry_se(&xc[i], &yc[j]);
        }
    }
    Ok((cov, se))
}

/// Per-coordinate shape statistics against a Gaussian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussianityStats {
    pub coordinate: usize,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    /// `sqrt(6 / R)`.
    pub skewness_se: f64,
    /// `sqrt(24 / R)`.
    pub kurtosis_se: f64,
}

impl GaussianityStats {
    pub fn skewness_z(&self) -> f64 {
        self.skewness / self.skewness_se
    }

    pub fn kurtosis_z(&self) -> f64 {
        self.excess_kurtosis / self.kurtosis_se
    }
}

/// Smallest sample for which the asymptotic standard errors are used.
pub const GAUSSIANITY_MIN_SAMPLES: usize = 1000;

pub fn gaussianity_check(samples: &[Vec<i64>]) -> Result<Vec<GaussianityStats>> {
    let r = samples.len();
    if r < GAUSSIANITY_MIN_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "gaussianity check needs at least {GAUSSIANITY_MIN_SAMPLES} samples, got {r}"
        )));
    }
    let d = samples[0].len();
    let rf = r as f64;
    (0..d)
        .map(|i| {
            let x = column(samples, i);
            let m = x.iter().sum::<f64>() / rf;
            let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
            for v in &x {
                let c = v - m;
                let c2 = c * c;
                m2 += c2;
                m3 += c2 * c;
                m4 += c2 * c2;
            }
            m2 /= rf;
            m3 /= rf;
            m4 /= rf;
            if m2 == 0.0 {
                return Err(Error::Degenerate(format!("coordinate {} is constant", i + 1)));
            }
            Ok(GaussianityStats {
                coordinate: i,
                skewness: m3 / m2.powf(1.5),
                excess_kurtosis: m4 / (m2 * m2) - 3.0,
                skewness_se: (6.0 / rf).sqrt(),
                kurtosis_se: (24.0 / rf).sqrt(),
            })
        })
        .collect()
}
