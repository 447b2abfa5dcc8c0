//! Reproducible ensembles of independent walks and the estimators built on
//! them.
//!
//! Replica `i` of a run with seed `s` draws from
//! `ChaCha8Rng::seed_from_u64(replica_seed(s, i))`, independent of how the
//! replicas are split across workers. Positions are integers, so ensemble
//! moments are accumulated as exact integer sums: merging partial results in
//! any grouping or order gives bit-identical summaries.

mod stats;
mod verify;

use std::ops::Range;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{run_walk, validate_checkpoints, InitialSpec, ModelParams};
use crate::theory::{require_regime, Regime};

pub use stats::{
    covariance_entry_se, cross_covariance, gaussianity_check, scaling_exponent, ExponentFit, GaussianityStats,
    IntMoments,
};
pub use verify::{verify, Budget, Check, TheoremTag, Unit, VerificationReport};

/// Replicas per work item.
const CHUNK: u64 = 64;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finaliser.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replica `replica`: `mix64(seed + (replica + 1) * 0x9E3779B97F4A7C15)`
/// with wrapping arithmetic, i.e. the `(replica + 1)`-th SplitMix64 output
/// of a generator started at `seed`.
pub fn replica_seed(seed: u64, replica: u64) -> u64 {
    mix64(seed.wrapping_add(replica.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

pub fn replica_rng(seed: u64, replica: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(replica_seed(seed, replica))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub n_steps: u64,
    /// Strictly increasing steps in `[1, n_steps]`; empty means `[n_steps]`.
    pub checkpoints: Vec<u64>,
    pub replicas: u64,
    pub seed: u64,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
    /// Keep every replica's position at each checkpoint.
    pub retain_samples: bool,
}

impl EnsembleConfig {
    pub fn new(n_steps: u64, replicas: u64, seed: u64) -> Self {
        EnsembleConfig {
            n_steps,
            checkpoints: Vec::new(),
            replicas,
            seed,
            workers: None,
            retain_samples: false,
        }
    }

    pub fn checkpoints(mut self, checkpoints: Vec<u64>) -> Self {
        self.checkpoints = checkpoints;
        self
    }

    pub fn workers(mut self, workers: Option<usize>) -> Self {
        self.workers = workers;
        self
    }

    pub fn retain_samples(mut self, retain: bool) -> Self {
        self.retain_samples = retain;
        self
    }

    fn effective_checkpoints(&self) -> Vec<u64> {
        if self.checkpoints.is_empty() {
            vec![self.n_steps]
        } else {
            self.checkpoints.clone()
        }
    }
}

/// Statistics of all replicas at one checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointSummary {
    pub n: u64,
    pub mean: Vec<f64>,
    pub cov: DMatrix<f64>,
    /// Standard error of each mean coordinate.
    pub se: Vec<f64>,
    pub moments: IntMoments,
    /// Replica-major positions, `replicas x d`, when retained.
    pub samples: Option<Vec<Vec<i64>>>,
}

impl CheckpointSummary {
    fn from_parts(n: u64, moments: IntMoments, samples: Option<Vec<Vec<i64>>>) -> Self {
        let cov = moments.covariance();
        let r = moments.count() as f64;
        let se = (0..cov.nrows()).map(|i| (cov[(i, i)] / r).sqrt()).collect();
        CheckpointSummary {
            n,
            mean: moments.mean(),
            cov,
            se,
            moments,
            samples,
        }
    }

    pub fn samples(&self) -> Result<&[Vec<i64>]> {
        self.samples
            .as_deref()
            .ok_or_else(|| Error::InvalidArgument(format!("samples at n = {} were not retained", self.n)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSummary {
    pub params: ModelParams,
    pub init: InitialSpec,
    pub replicas: u64,
    pub seed: u64,
    pub checkpoints: Vec<CheckpointSummary>,
}

impl EnsembleSummary {
    pub fn at(&self, n: u64) -> Option<&CheckpointSummary> {
        self.checkpoints.iter().find(|c| c.n == n)
    }
}

/// Moments (and optionally samples) of a contiguous block of replicas.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialEnsemble {
    pub moments: Vec<IntMoments>,
    pub samples: Option<Vec<Vec<Vec<i64>>>>,
}

impl PartialEnsemble {
    fn empty(checkpoints: usize, dim: usize, retain: bool) -> Self {
        PartialEnsemble {
            moments: vec![IntMoments::new(dim); checkpoints],
            samples: retain.then(|| vec![Vec::new(); checkpoints]),
        }
    }

    /// Appends `other`, which must cover the replicas following `self`'s
    /// when samples are retained. Moments merge in any order.
    pub fn merge(mut self, other: PartialEnsemble) -> Self {
        for (a, b) in self.moments.iter_mut().zip(&other.moments) {
            a.merge(b);
        }
        if let (Some(mine), Some(theirs)) = (self.samples.as_mut(), other.samples) {
            for (a, b) in mine.iter_mut().zip(theirs) {
                a.extend(b);
            }
        }
        self
    }
}

/// Runs replicas `range` of an ensemble.
pub fn run_replicas(
    params: &ModelParams,
    init: &InitialSpec,
    cfg: &EnsembleConfig,
    range: Range<u64>,
) -> Result<PartialEnsemble> {
    let checkpoints = cfg.effective_checkpoints();
    let mut part = PartialEnsemble::empty(checkpoints.len(), params.d(), cfg.retain_samples);
    for replica in range {
        let mut rng = replica_rng(cfg.seed, replica);
        run_walk(params, init, cfg.n_steps, &checkpoints, &mut rng, |idx, state| {
            part.moments[idx].add(state.position());
            if let Some(samples) = part.samples.as_mut() {
                samples[idx].push(state.position().to_vec());
            }
        })?;
    }
    Ok(part)
}

fn with_workers<T: Send>(workers: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(job()),
        Some(0) => Err(Error::InvalidArgument("workers must be positive".into())),
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
            Ok(pool.install(job))
        }
    }
}

fn chunks(replicas: u64) -> Vec<Range<u64>> {
    (0..replicas.div_ceil(CHUNK))
        .map(|c| c * CHUNK..((c + 1) * CHUNK).min(replicas))
        .collect()
}

pub fn run_ensemble(params: &ModelParams, init: &InitialSpec, cfg: &EnsembleConfig) -> Result<EnsembleSummary> {
    if cfg.replicas < 2 {
        return Err(Error::InvalidArgument("at least two replicas are needed".into()));
    }
    validate_checkpoints(&cfg.checkpoints, cfg.n_steps)?;
    init.law(params)?;
    let checkpoints = cfg.effective_checkpoints();
    let parts: Vec<Result<PartialEnsemble>> = with_workers(cfg.workers, || {
        chunks(cfg.replicas)
            .into_par_iter()
            .map(|range| run_replicas(params, init, cfg, range))
            .collect()
    })?;
    let mut total = PartialEnsemble::empty(checkpoints.len(), params.d(), cfg.retain_samples);
    for part in parts {
        total = total.merge(part?);
    }
    let PartialEnsemble { moments, samples } = total;
    let mut samples = samples.map(|s| s.into_iter().map(Some).collect::<Vec<_>>());
    let summaries = checkpoints
        .iter()
        .zip(moments)
        .enumerate()
        .map(|(i, (&n, m))| {
            let s = samples.as_mut().and_then(|s| s[i].take());
            CheckpointSummary::from_parts(n, m, s)
        })
        .collect();
    Ok(EnsembleSummary {
        params: *params,
        init: init.clone(),
        replicas: cfg.replicas,
        seed: cfg.seed,
        checkpoints: summaries,
    })
}

/// Empirical `Cov(S_{floor(s n)}, S_{floor(t n)}) / n` over `replicas` walks.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossTimeEstimate {
    pub s_steps: u64,
    pub t_steps: u64,
    /// `Cov(S_s, S_t) / n_scale`.
    pub cross: DMatrix<f64>,
    /// `Cov(S_s, S_s) / n_scale`.
    pub at_s: DMatrix<f64>,
    /// Standard errors of the entries of `cross`.
    pub cross_se: DMatrix<f64>,
}

#[allow(clippy::too_many_arguments)]
pub fn cross_time_covariance(
    params: &ModelParams,
    init: &InitialSpec,
    s: f64,
    t: f64,
    n_scale: u64,
    replicas: u64,
    seed: u64,
    workers: Option<usize>,
) -> Result<CrossTimeEstimate> {
    require_regime(params, "diffusive", Regime::is_diffusive)?;
    if !(s > 0.0 && t >= s) {
        return Err(Error::InvalidArgument(format!("need 0 < s <= t, got s = {s}, t = {t}")));
    }
    let s_steps = (s * n_scale as f64).floor() as u64;
    let t_steps = (t * n_scale as f64).floor() as u64;
    if s_steps < 1 {
        return Err(Error::InvalidArgument("s * n_scale must be at least one step".into()));
    }
    let checkpoints = if s_steps == t_steps {
        vec![s_steps]
    } else {
        vec![s_steps, t_steps]
    };
    let cfg = EnsembleConfig::new(t_steps, replicas, seed)
        .checkpoints(checkpoints)
        .workers(workers)
        .retain_samples(true);
    let summary = run_ensemble(params, init, &cfg)?;
    cross_time_from_summary(&summary, s_steps, t_steps, n_scale)
}

/// Cross-time estimate from an ensemble that retained samples at both times.
pub fn cross_time_from_summary(
    summary: &EnsembleSummary,
    s_steps: u64,
    t_steps: u64,
    n_scale: u64,
) -> Result<CrossTimeEstimate> {
    let missing = |n| Error::InvalidArgument(format!("ensemble has no checkpoint at n = {n}"));
    let early = summary.at(s_steps).ok_or_else(|| missing(s_steps))?;
    let late = summary.at(t_steps).ok_or_else(|| missing(t_steps))?;
    let (cross, cross_se) = cross_covariance(early.samples()?, late.samples()?)?;
    let scale = 1.0 / n_scale as f64;
    Ok(CrossTimeEstimate {
        s_steps,
        t_steps,
        cross: cross * scale,
        at_s: &early.cov * scale,
        cross_se: cross_se * scale,
    })
}

/// Log-spaced checkpoints from `min` to `max`, `per_decade` per factor of ten.
pub fn log_checkpoints(min: u64, max: u64, per_decade: u32) -> Vec<u64> {
    let lo = (min.max(1) as f64).log10();
    let hi = (max as f64).log10();
    let count = ((hi - lo) * per_decade as f64).round().max(1.0) as u32;
    let mut out: Vec<u64> = (0..=count)
        .map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / count as f64).round() as u64)
        .collect();
    out.dedup();
    if let Some(last) = out.last_mut() {
        *last = max;
    }
    out
}
