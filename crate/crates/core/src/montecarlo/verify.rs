//! Theorem-level Monte Carlo checks.
//!
//! Each scalar check has its own gate; no family-wise correction is applied
//! across the checks of one report. A report passes when every check does.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{InitialSpec, ModelParams};
use crate::theory::{
    classify_regime, critical_covariance, diffusive_covariance, limit_moment_matrix, lln_limit, require_regime,
    sigma_i, Regime,
};
use crate::urn::pairing_matrix;

use super::stats::GAUSSIANITY_MIN_SAMPLES;
use super::{
    cross_time_from_summary, gaussianity_check, log_checkpoints, run_ensemble, scaling_exponent, EnsembleConfig,
};

/// Two-sided gate in standard errors.
pub const SE_GATE: f64 = 4.0;
pub const CROSS_TIME_REL_TOL: f64 = 0.10;
pub const CRITICAL_REL_TOL: f64 = 0.15;
pub const EXPONENT_TOL: f64 = 0.1;
pub const MOMENTS_REL_TOL: f64 = 0.05;
pub const IDENTITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TheoremTag {
    #[serde(rename = "LLN")]
    Lln,
    #[serde(rename = "CLT-diffusive")]
    CltDiffusive,
    #[serde(rename = "CLT-critical")]
    CltCritical,
    #[serde(rename = "Superdiffusive")]
    Superdiffusive,
    #[serde(rename = "Moments")]
    Moments,
}

impl TheoremTag {
    pub const ALL: [TheoremTag; 5] = [
        TheoremTag::Lln,
        TheoremTag::CltDiffusive,
        TheoremTag::CltCritical,
        TheoremTag::Superdiffusive,
        TheoremTag::Moments,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TheoremTag::Lln => "LLN",
            TheoremTag::CltDiffusive => "CLT-diffusive",
            TheoremTag::CltCritical => "CLT-critical",
            TheoremTag::Superdiffusive => "Superdiffusive",
            TheoremTag::Moments => "Moments",
        }
    }

    fn check_regime(self, params: &ModelParams) -> Result<()> {
        match self {
            TheoremTag::Lln => Ok(()),
            TheoremTag::CltDiffusive => require_regime(params, "diffusive", Regime::is_diffusive),
            TheoremTag::CltCritical => require_regime(params, "critical", |r| r == Regime::Critical),
            TheoremTag::Superdiffusive | TheoremTag::Moments => {
                require_regime(params, "superdiffusive", |r| r == Regime::Superdiffusive)
            }
        }
    }
}

impl fmt::Display for TheoremTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TheoremTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TheoremTag::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown theorem tag {s:?}")))
    }
}

/// Size of the experiment behind a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    pub n_steps: u64,
    pub replicas: u64,
    pub seed: u64,
    pub workers: Option<usize>,
}

impl Budget {
    /// Budget used by the acceptance suite for each tag.
    pub fn default_for(tag: TheoremTag) -> Self {
        let (n_steps, replicas) = match tag {
            TheoremTag::Lln => (100_000, 200),
            TheoremTag::CltDiffusive => (10_000, 10_000),
            TheoremTag::CltCritical => (10_000, 10_000),
            TheoremTag::Superdiffusive => (100_000, 2_000),
            TheoremTag::Moments => (100_000, 10_000),
        };
        Budget {
            n_steps,
            replicas,
            seed: 0,
            workers: None,
        }
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Unit {
    /// `|empirical - theoretical| / standard error`.
    StandardErrors,
    /// `|empirical / theoretical - 1|`.
    Relative,
    /// `|empirical - theoretical|`.
    Absolute,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub theoretical: f64,
    pub empirical: f64,
    pub discrepancy: f64,
    pub unit: Unit,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn new(
        name: impl Into<String>,
        theoretical: f64,
        empirical: f64,
        discrepancy: f64,
        unit: Unit,
        tolerance: f64,
    ) -> Self {
        Check {
            name: name.into(),
            theoretical,
            empirical,
            discrepancy,
            unit,
            tolerance,
            pass: discrepancy <= tolerance,
        }
    }

    /// Gate in standard errors; a zero standard error demands exact equality.
    pub fn within_se(name: impl Into<String>, theoretical: f64, empirical: f64, se: f64) -> Self {
        let diff = (empirical - theoretical).abs();
        let z = if se > 0.0 {
            diff / se
        } else if diff <= 1e-12 * (1.0 + theoretical.abs()) {
            0.0
        } else {
            f64::INFINITY
        };
        Check::new(name, theoretical, empirical, z, Unit::StandardErrors, SE_GATE)
    }

    pub fn relative(name: impl Into<String>, theoretical: f64, empirical: f64, tolerance: f64) -> Self {
        let rel = (empirical / theoretical - 1.0).abs();
        Check::new(name, theoretical, empirical, rel, Unit::Relative, tolerance)
    }

    pub fn absolute(name: impl Into<String>, theoretical: f64, empirical: f64, tolerance: f64) -> Self {
        Check::new(
            name,
            theoretical,
            empirical,
            (empirical - theoretical).abs(),
            Unit::Absolute,
            tolerance,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub tag: TheoremTag,
    pub params: ModelParams,
    pub regime: Regime,
    pub budget: Budget,
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl VerificationReport {
    fn new(tag: TheoremTag, params: &ModelParams, budget: Budget, checks: Vec<Check>) -> Self {
        let pass = checks.iter().all(|c| c.pass);
        VerificationReport {
            tag,
            params: *params,
            regime: classify_regime(params),
            budget,
            checks,
            pass,
        }
    }
}

fn config(budget: &Budget, checkpoints: Vec<u64>) -> EnsembleConfig {
    EnsembleConfig::new(budget.n_steps, budget.replicas, budget.seed)
        .checkpoints(checkpoints)
        .workers(budget.workers)
}

pub fn verify(
    tag: TheoremTag,
    params: &ModelParams,
    init: &InitialSpec,
    budget: &Budget,
) -> Result<VerificationReport> {
    tag.check_regime(params)?;
    let checks = match tag {
        TheoremTag::Lln => verify_lln(params, init, budget)?,
        TheoremTag::CltDiffusive => verify_diffusive(params, init, budget)?,
        TheoremTag::CltCritical => verify_critical(params, init, budget)?,
        TheoremTag::Superdiffusive => verify_superdiffusive(params, init, budget)?,
        TheoremTag::Moments => verify_moments(params, init, budget)?,
    };
    Ok(VerificationReport::new(tag, params, *budget, checks))
}

fn verify_lln(params: &ModelParams, init: &InitialSpec, budget: &Budget) -> Result<Vec<Check>> {
    let summary = run_ensemble(params, init, &config(budget, vec![]))?;
    let c = &summary.checkpoints[0];
    let n = c.n as f64;
    Ok(lln_limit(params)
        .iter()
        .enumerate()
        .map(|(i, &limit)| Check::within_se(format!("mean_{}/n", i + 1), limit, c.mean[i] / n, c.se[i] / n))
        .collect())
}

/// Covariance at `n` and at `n / 4` for the cross-time factor, shape
/// statistics (from 1000 replicas up) and the exact projection identity.
fn verify_diffusive(params: &ModelParams, init: &InitialSpec, budget: &Budget) -> Result<Vec<Check>> {
    let n = budget.n_steps;
    let early = n / 4;
    if early < 1 {
        return Err(Error::InvalidArgument("need at least 4 steps".into()));
    }
    let cfg = config(budget, vec![early, n]).retain_samples(true);
    let summary = run_ensemble(params, init, &cfg)?;
    let last = &summary.checkpoints[1];
    let d = params.d();
    let theory = diffusive_covariance(params, 1.0, 1.0)?;
    let nf = n as f64;
    let (_, cov_se) = super::cross_covariance(last.samples()?, last.samples()?)?;
    let mut checks = Vec::new();
    for i in 0..d {
        for j in i..d {
            checks.push(Check::within_se(
                format!("cov_{}_{}/n", i + 1, j + 1),
                theory[(i, j)],
                last.cov[(i, j)] / nf,
                cov_se[(i, j)] / nf,
            ));
        }
    }

    let cross = cross_time_from_summary(&summary, early, n, early)?;
    let want = (n as f64 / early as f64).powf(params.lambda2());
    checks.push(Check::relative(
        "cross-time factor",
        want,
        cross.cross.trace() / cross.at_s.trace(),
        CROSS_TIME_REL_TOL,
    ));

    let shape = if budget.replicas >= GAUSSIANITY_MIN_SAMPLES as u64 {
        gaussianity_check(last.samples()?)?
    } else {
        Vec::new()
    };
    for g in shape {
        let k = g.coordinate + 1;
        checks.push(Check::within_se(
            format!("skewness_{k}"),
            0.0,
            g.skewness,
            g.skewness_se,
        ));
        checks.push(Check::within_se(
            format!("excess_kurtosis_{k}"),
            0.0,
            g.excess_kurtosis,
            g.kurtosis_se,
        ));
    }

    let pairing = pairing_matrix(d, params.lazy());
    let projected = &pairing * sigma_i(params)? * pairing.transpose();
    checks.push(Check::absolute(
        "projection identity",
        0.0,
        (projected - &theory).amax(),
        IDENTITY_TOL,
    ));
    Ok(checks)
}

fn verify_critical(params: &ModelParams, init: &InitialSpec, budget: &Budget) -> Result<Vec<Check>> {
    let n = budget.n_steps;
    let early = n / 10;
    if early < 2 {
        return Err(Error::InvalidArgument("need at least 20 steps".into()));
    }
    let summary = run_ensemble(params, init, &config(budget, vec![early, n]))?;
    let scaled = |k: usize| {
        let c = &summary.checkpoints[k];
        let nf = c.n as f64;
        c.cov.trace() / (nf * nf.ln())
    };
    let (at_early, at_n) = (scaled(0), scaled(1));
    let theory = critical_covariance(params, 1.0, 1.0)?.trace();
    Ok(vec![
        Check::relative("trace cov/(n log n) ratio", 1.0, at_early / at_n, CRITICAL_REL_TOL),
        Check::relative("trace cov/(n log n)", theory, at_n, CRITICAL_REL_TOL),
    ])
}

fn verify_superdiffusive(params: &ModelParams, init: &InitialSpec, budget: &Budget) -> Result<Vec<Check>> {
    let checkpoints = log_checkpoints(budget.n_steps / 1000, budget.n_steps, 3);
    let summary = run_ensemble(params, init, &config(budget, checkpoints))?;
    let fit = scaling_exponent(&summary.checkpoints)?;
    let want = 2.0 * params.a() * params.theta();
    Ok(vec![Check::absolute("scaling exponent", want, fit.slope, EXPONENT_TOL)])
}

fn verify_moments(params: &ModelParams, init: &InitialSpec, budget: &Budget) -> Result<Vec<Check>> {
    let limit = limit_moment_matrix(params, init)?;
    let cfg = config(budget, vec![]).retain_samples(true);
    let summary = run_ensemble(params, init, &cfg)?;
    let c = &summary.checkpoints[0];
    let scale = (c.n as f64).powf(params.a() * params.theta());
    let mut checks = Vec::new();
    for i in 0..params.d() {
        checks.push(Check::relative(
            format!("var L_{}", i + 1),
            limit.second[(i, i)],
            c.cov[(i, i)] / (scale * scale),
            MOMENTS_REL_TOL,
        ));
    }
    // E(L) = 0 holds for the centred walk; E(S_n) is removed exactly via the
    // propagated mean.
    let mean = crate::theory::MomentPropagator::new(params, init).map(|mut p| {
        p.advance_to(c.n);
        p.mean_position()
    })?;
    for i in 0..params.d() {
        checks.push(Check::within_se(
            format!("mean L_{}", i + 1),
            0.0,
            (c.mean[i] - mean[i]) / scale,
            c.se[i] / scale,
        ));
    }
    Ok(checks)
}
