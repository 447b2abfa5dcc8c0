//! Brute-force law of the walk for tiny instances.
//!
//! Every length-`n` step sequence is enumerated and weighted by the chain
//! rule over the one-step conditional law. Paths are indexed by their
//! base-`K` digits (first step most significant), so index order is
//! lexicographic order.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{law_from_counts, Direction, InitialSpec, ModelParams};
use crate::urn::counts_to_position;

/// Largest number of paths `enumerate_paths` will build.
pub const MAX_PATHS: u128 = 10_000_000;

/// Probabilities of all `K^n` paths, zero-probability paths included.
#[derive(Debug, Clone, PartialEq)]
pub struct PathDistribution {
    k: usize,
    n: u32,
    probs: Vec<f64>,
}

impl PathDistribution {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    /// The step sequence with lexicographic index `index`.
    pub fn path(&self, index: usize) -> Vec<Direction> {
        let mut steps = vec![Direction(0); self.n as usize];
        let mut rest = index;
        for slot in steps.iter_mut().rev() {
            *slot = Direction(rest % self.k);
            rest /= self.k;
        }
        steps
    }

    /// Lexicographic index of a step sequence of length `n`.
    pub fn index_of(&self, path: &[Direction]) -> usize {
        path.iter().fold(0, |acc, d| acc * self.k + d.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Vec<Direction>, f64)> + '_ {
        self.probs.iter().enumerate().map(|(i, &w)| (self.path(i), w))
    }

    /// Law of the final count vector.
    pub fn count_law(&self) -> BTreeMap<Vec<u64>, f64> {
        let mut law = BTreeMap::new();
        for (i, &w) in self.probs.iter().enumerate() {
            let mut counts = vec![0u64; self.k];
            for d in self.path(i) {
                counts[d.0] += 1;
            }
            *law.entry(counts).or_default() += w;
        }
        law
    }
}

fn check_size(k: usize, n: u32) -> Result<()> {
    let size = (k as u128).checked_pow(n).unwrap_or(u128::MAX);
    if size > MAX_PATHS {
        return Err(Error::InstanceTooLarge(size));
    }
    Ok(())
}

pub fn enumerate_paths(params: &ModelParams, init: &InitialSpec, n: u32) -> Result<PathDistribution> {
    if n == 0 {
        return Err(Error::InvalidArgument("path length must be at least 1".into()));
    }
    let k = params.k();
    check_size(k, n)?;
    let first = init.law(params)?;
    let mut probs = vec![0.0; k.pow(n)];
    let mut counts = vec![0u64; k];
    // One law buffer of length K per depth.
    let mut scratch = vec![0.0; k * n as usize];

    fn descend(
        params: &ModelParams,
        remaining: u32,
        weight: f64,
        index: usize,
        counts: &mut [u64],
        scratch: &mut [f64],
        probs: &mut [f64],
    ) {
        if remaining == 0 {
            probs[index] = weight;
            return;
        }
        let k = counts.len();
        let (law, rest) = scratch.split_at_mut(k);
        law_from_counts(params, counts, counts.iter().sum(), law);
        for x in 0..k {
            counts[x] += 1;
            descend(
                params,
                remaining - 1,
                weight * law[x],
                index * k + x,
                counts,
                rest,
                probs,
            );
            counts[x] -= 1;
        }
    }

    for (x, &w) in first.iter().enumerate() {
        counts[x] += 1;
        descend(params, n - 1, w, x, &mut counts, &mut scratch, &mut probs);
        counts[x] -= 1;
    }
    Ok(PathDistribution { k, n, probs })
}

/// Exact moments of the walk after `n` steps.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactMarginals {
    pub n: u32,
    pub mean_position: Vec<f64>,
    /// Row-major `d x d`.
    pub position_cov: Vec<Vec<f64>>,
    /// `E N^X_n(i)`: expected number of steps along each axis.
    pub mean_axis_counts: Vec<f64>,
}

impl ExactMarginals {
    pub fn cov_matrix(&self) -> DMatrix<f64> {
        let d = self.position_cov.len();
        DMatrix::from_fn(d, d, |i, j| self.position_cov[i][j])
    }
}

pub fn marginals_of(params: &ModelParams, dist: &PathDistribution) -> ExactMarginals {
    let d = params.d();
    let mut mean = DVector::zeros(d);
    let mut second = DMatrix::zeros(d, d);
    let mut axis = vec![0.0; d];
    for (i, &w) in dist.probs.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let mut counts = vec![0u64; dist.k];
        for step in dist.path(i) {
            counts[step.0] += 1;
        }
        let pos = counts_to_position(&counts, d, params.lazy()).expect("K matches params");
        let pos = DVector::from_iterator(d, pos.iter().map(|&x| x as f64));
        mean += &pos * w;
        second += &pos * pos.transpose() * w;
        for (a, pair) in axis.iter_mut().zip(counts.chunks_exact(2)) {
            *a += w * (pair[0] + pair[1]) as f64;
        }
    }
    let cov = second - &mean * mean.transpose();
    ExactMarginals {
        n: dist.n,
        mean_position: mean.iter().copied().collect(),
        position_cov: (0..d).map(|i| cov.row(i).iter().copied().collect()).collect(),
        mean_axis_counts: axis,
    }
}

pub fn exact_marginals(params: &ModelParams, init: &InitialSpec, n: u32) -> Result<ExactMarginals> {
    Ok(marginals_of(params, &enumerate_paths(params, init, n)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn single_step() {
        let m = ModelParams::new(1, false, 0.75, 1.0).unwrap();
        let dist = enumerate_paths(&m, &InitialSpec::Uniform, 1).unwrap();
        assert_eq!(dist.probabilities(), &[0.5, 0.5]);
    }

    #[test]
    fn two_steps_by_hand() {
        let m = ModelParams::new(1, false, 0.75, 1.0).unwrap();
        let dist = enumerate_paths(&m, &InitialSpec::Uniform, 2).unwrap();
        let want = [0.375, 0.125, 0.125, 0.375];
        for (got, want) in dist.probabilities().iter().zip(want) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-15);
        }
        assert_eq!(dist.path(1), vec![Direction(0), Direction(1)]);
        assert_eq!(dist.index_of(&[Direction(1), Direction(0)]), 2);
    }

    #[test]
    fn zero_probability_paths_are_kept() {
        let m = ModelParams::new(1, true, 1.0, 1.0).unwrap();
        let dist = enumerate_paths(&m, &InitialSpec::Fixed(0), 3).unwrap();
        assert_eq!(dist.len(), 27);
        assert_eq!(dist.probabilities()[0], 1.0);
        assert_eq!(dist.probabilities().iter().filter(|&&w| w == 0.0).count(), 26);
    }

    #[test]
    fn size_guard() {
        let m = ModelParams::new(3, true, 0.5, 0.5).unwrap();
        assert!(enumerate_paths(&m, &InitialSpec::Uniform, 8).is_ok());
        assert!(matches!(
            enumerate_paths(&m, &InitialSpec::Uniform, 9),
            Err(Error::InstanceTooLarge(40_353_607))
        ));
    }

    #[test]
    fn symmetric_memory_walk_is_centred() {
        for (d, lazy) in [(1, false), (2, false), (1, true)] {
            let m = ModelParams::new(d, lazy, 0.8, 1.0).unwrap();
            let e = exact_marginals(&m, &InitialSpec::Uniform, 5).unwrap();
            assert!(e.mean_position.iter().all(|x| x.abs() < 1e-15));
        }
    }

    #[test]
    fn axis_counts_split_evenly() {
        for n in 1..=5 {
            let m = ModelParams::new(2, false, 0.7, 1.0).unwrap();
            let e = exact_marginals(&m, &InitialSpec::Uniform, n).unwrap();
            for c in &e.mean_axis_counts {
                assert_abs_diff_eq!(*c, n as f64 / 2.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn iid_walk_mean() {
        // theta = 0: first step uniform (mean 0), two more steps with mean 2p - 1 = 0.4 each
        let m = ModelParams::new(1, false, 0.7, 0.0).unwrap();
        let e = exact_marginals(&m, &InitialSpec::Uniform, 3).unwrap();
        assert_abs_diff_eq!(e.mean_position[0], 0.8, epsilon = 1e-14);
        // i.i.d. start as well: three steps of mean 0.4
        let e = exact_marginals(&m, &InitialSpec::Custom(vec![0.7, 0.3]), 3).unwrap();
        assert_abs_diff_eq!(e.mean_position[0], 1.2, epsilon = 1e-14);
        assert_abs_diff_eq!(e.position_cov[0][0], 3.0 * 4.0 * 0.7 * 0.3, epsilon = 1e-13);
    }

    proptest! {
        #[test]
        fn total_mass_is_one(k in 2usize..=5, p in 0.0..=1.0f64, theta in 0.0..=1.0f64, n in 1u32..=5) {
            let m = ModelParams::from_choices(k, p, theta).unwrap();
            let dist = enumerate_paths(&m, &InitialSpec::Uniform, n).unwrap();
            prop_assert_eq!(dist.len(), k.pow(n));
            prop_assert!((dist.probabilities().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
