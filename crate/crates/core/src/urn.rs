//! Generalized Pólya urn representation of the walk.
//!
//! Ball colours are directions. Drawing colour `j` adds one ball whose colour
//! follows the replacement law `xi_j`; the walk's counts after `n` steps have
//! the same law as the urn composition after `n - 1` draws started from the
//! first step.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{Direction, ModelParams};
use crate::theory::spectral_decomposition;

/// Law of the colour added after drawing colour `j`.
pub fn replacement_distribution(params: &ModelParams, j: usize) -> Vec<f64> {
    let k = params.k();
    assert!(j < k, "colour index {j} out of range for K = {k}");
    let kf = k as f64;
    let p = params.p();
    let theta = params.theta();
    let base = (1.0 - p) / (kf - 1.0);
    let mut law = vec![base; k];
    if j == 0 {
        law[0] = p;
    } else {
        law[0] = p + theta * (1.0 - kf * p) / (kf - 1.0);
        law[j] = (1.0 - p - theta * (1.0 - kf * p)) / (kf - 1.0);
    }
    law
}

/// Mean replacement matrix `A`, whose column `j` is `E xi_j`.
pub fn mean_replacement_matrix(params: &ModelParams) -> DMatrix<f64> {
    let k = params.k();
    let mut a = DMatrix::zeros(k, k);
    for j in 0..k {
        for (i, w) in replacement_distribution(params, j).into_iter().enumerate() {
            a[(i, j)] = w;
        }
    }
    a
}

/// `E[xi_j xi_j^T]` for every colour, and their `v1`-weighted mix `B`.
///
/// Each `xi_j` is a canonical basis vector, so `B_j` is the diagonal matrix
/// of its law.
pub fn second_moment_matrices(params: &ModelParams) -> Result<(Vec<DMatrix<f64>>, DMatrix<f64>)> {
    let spectral = spectral_decomposition(params)?;
    let k = params.k();
    let bj: Vec<DMatrix<f64>> = (0..k)
        .map(|j| DMatrix::from_diagonal(&replacement_distribution(params, j).into()))
        .collect();
    let v1 = &spectral.v[0];
    let b = bj
        .iter()
        .zip(v1.iter())
        .fold(DMatrix::zeros(k, k), |acc, (m, w)| acc + m * *w);
    Ok((bj, b))
}

/// Signed pairing of counts into a position:
/// `(U1 - U2, U3 - U4, ...)`, ignoring the stay count when `K` is odd.
pub fn counts_to_position(counts: &[u64], d: usize, lazy: bool) -> Result<Vec<i64>> {
    let k = 2 * d + usize::from(lazy);
    if counts.len() != k {
        return Err(Error::InvalidArgument(format!(
            "expected {k} counts, got {}",
            counts.len()
        )));
    }
    Ok(counts
        .chunks_exact(2)
        .map(|pair| pair[0] as i64 - pair[1] as i64)
        .collect())
}

/// The `d x K` matrix of the pairing projection.
pub fn pairing_matrix(d: usize, lazy: bool) -> DMatrix<f64> {
    let k = 2 * d + usize::from(lazy);
    let mut l = DMatrix::zeros(d, k);
    for x in 0..2 * d {
        if let Some((axis, sign)) = Direction(x).axis_sign(d) {
            l[(axis, x)] = sign as f64;
        }
    }
    l
}

/// Urn composition after `n - 1` draws, holding `n` balls.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UrnState {
    n: u64,
    balls: Vec<u64>,
}

impl UrnState {
    pub fn new(balls: Vec<u64>) -> Self {
        UrnState {
            n: balls.iter().sum(),
            balls,
        }
    }

    /// One ball of the colour of the walk's first step.
    pub fn from_first_step(params: &ModelParams, first: Direction) -> Self {
        let mut balls = vec![0; params.k()];
        balls[first.0] = 1;
        Self::new(balls)
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn balls(&self) -> &[u64] {
        &self.balls
    }

    pub fn position(&self, params: &ModelParams) -> Vec<i64> {
        counts_to_position(&self.balls, params.d(), params.lazy()).expect("urn has K colours")
    }

    /// Draws a ball and adds one of the replacement colour, which is returned.
    pub fn step<R: Rng + ?Sized>(&mut self, params: &ModelParams, rng: &mut R) -> Result<usize> {
        if self.n == 0 {
            return Err(Error::InvalidArgument("cannot draw from an empty urn".into()));
        }
        let mut t = rng.random_range(0..self.n);
        let mut drawn = self.balls.len() - 1;
        for (j, &b) in self.balls.iter().enumerate() {
            if t < b {
                drawn = j;
                break;
            }
            t -= b;
        }
        let law = replacement_distribution(params, drawn);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut added = law.iter().rposition(|&w| w > 0.0).unwrap_or(0);
        for (c, w) in law.iter().enumerate() {
            acc += w;
            if *w > 0.0 && u < acc {
                added = c;
                break;
            }
        }
        self.balls[added] += 1;
        self.n += 1;
        Ok(added)
    }
}

/// Exact law of the urn composition holding `n` balls, started from one ball
/// drawn from `first_law`, by enumerating every draw and replacement.
pub fn exact_composition_law(params: &ModelParams, first_law: &[f64], n: u64) -> Result<BTreeMap<Vec<u64>, f64>> {
    let k = params.k();
    if first_law.len() != k {
        return Err(Error::InvalidArgument("initial law must have K entries".into()));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("urn must hold at least one ball".into()));
    }
    let laws: Vec<Vec<f64>> = (0..k).map(|j| replacement_distribution(params, j)).collect();
    let mut current: BTreeMap<Vec<u64>, f64> = BTreeMap::new();
    for (c, &w) in first_law.iter().enumerate() {
        let mut balls = vec![0; k];
        balls[c] = 1;
        *current.entry(balls).or_default() += w;
    }
    for m in 1..n {
        let mut next: BTreeMap<Vec<u64>, f64> = BTreeMap::new();
        for (balls, w) in &current {
            for (j, &b) in balls.iter().enumerate() {
                if b == 0 {
                    continue;
                }
                let draw = w * b as f64 / m as f64;
                for (c, &r) in laws[j].iter().enumerate() {
                    let mut after = balls.clone();
                    after[c] += 1;
                    *next.entry(after).or_default() += draw * r;
                }
            }
        }
        current = next;
    }
    Ok(current)
}
