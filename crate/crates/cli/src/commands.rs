use anyhow::{bail, Context};
use memwalk::montecarlo::{
    log_checkpoints, replica_seed, run_ensemble, scaling_exponent, verify as run_verify, Budget, EnsembleConfig,
    EnsembleSummary, VerificationReport,
};
use memwalk::oracle::{enumerate_paths, marginals_of, ExactMarginals};
use memwalk::theory::{
    classify_regime, critical_covariance, critical_probability, diffusive_covariance, hyper_3f2_bound,
    limit_moment_matrix, lln_limit, sigma_i, sigma_ii,
};
use memwalk::{InitialSpec, ModelParams, Regime};
use serde::Serialize;

use crate::config::{Format, RunConfig};
use crate::output::{csv_bytes, emit, json, num, rows};

pub enum Outcome {
    Pass,
    StatisticalFailure,
}

const DEFAULT_STEPS: u64 = 1000;
const DEFAULT_REPS: u64 = 1000;
const DEFAULT_PHASE_STEPS: u64 = 10_000;
const DEFAULT_PHASE_REPS: u64 = 200;

fn json_only(cfg: &RunConfig, command: &str) -> anyhow::Result<()> {
    if cfg.format == Some(Format::Csv) {
        bail!("{command} only writes JSON");
    }
    Ok(())
}

#[derive(Serialize)]
struct LimitDoc {
    mean: Vec<f64>,
    second: Vec<Vec<f64>>,
    n_max: u64,
}

#[derive(Serialize)]
struct TheoryDoc {
    params: ModelParams,
    init: InitialSpec,
    k: usize,
    a: f64,
    a_theta: f64,
    lambda2: f64,
    p_c: Option<f64>,
    regime: Regime,
    lln_limit: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    diffusive_covariance: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma_i: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    critical_covariance: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma_ii: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    hyper_3f2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    limit_moments: Option<LimitDoc>,
}

pub fn theory(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    json_only(cfg, "theory")?;
    let m = cfg.model()?;
    let init = cfg.init();
    init.law(&m)?;
    let regime = classify_regime(&m);
    let mut doc = TheoryDoc {
        params: m,
        init: init.clone(),
        k: m.k(),
        a: m.a(),
        a_theta: m.a() * m.theta(),
        lambda2: m.lambda2(),
        p_c: critical_probability(m.k(), m.theta()).ok(),
        regime,
        lln_limit: lln_limit(&m),
        diffusive_covariance: None,
        sigma_i: None,
        critical_covariance: None,
        sigma_ii: None,
        hyper_3f2: None,
        limit_moments: None,
    };
    match regime {
        Regime::Diffusive | Regime::NoTransition => {
            doc.diffusive_covariance = Some(rows(&diffusive_covariance(&m, 1.0, 1.0)?));
            doc.sigma_i = Some(rows(&sigma_i(&m)?));
        }
        Regime::Critical => {
            doc.critical_covariance = Some(rows(&critical_covariance(&m, 1.0, 1.0)?));
            doc.sigma_ii = Some(rows(&sigma_ii(&m)?));
        }
        Regime::Superdiffusive => {
            doc.hyper_3f2 = Some(hyper_3f2_bound(&m)?);
            let limit = limit_moment_matrix(&m, &init)?;
            doc.limit_moments = Some(LimitDoc {
                mean: limit.mean.iter().copied().collect(),
                second: rows(&limit.second),
                n_max: limit.n_max,
            });
        }
    }
    emit(cfg.out.as_deref(), &json(&doc)?)?;
    Ok(Outcome::Pass)
}

#[derive(Serialize)]
struct CheckpointDoc {
    n: u64,
    rep_count: u64,
    mean: Vec<f64>,
    cov: Vec<Vec<f64>>,
    se: Vec<f64>,
}

#[derive(Serialize)]
struct SimulationDoc {
    params: ModelParams,
    init: InitialSpec,
    n_steps: u64,
    replicas: u64,
    seed: u64,
    checkpoints: Vec<CheckpointDoc>,
}

fn simulation_csv(summary: &EnsembleSummary) -> anyhow::Result<Vec<u8>> {
    let d = summary.params.d();
    let mut header = vec!["n".to_string(), "rep_count".to_string()];
    header.extend((1..=d).map(|i| format!("mean_{i}")));
    for i in 1..=d {
        header.extend((i..=d).map(|j| format!("cov_{i}_{j}")));
    }
    header.extend((1..=d).map(|i| format!("se_{i}")));
    let records: Vec<Vec<String>> = summary
        .checkpoints
        .iter()
        .map(|c| {
            let mut r = vec![c.n.to_string(), summary.replicas.to_string()];
            r.extend(c.mean.iter().map(|&x| num(Some(x))));
            for i in 0..d {
                r.extend((i..d).map(|j| num(Some(c.cov[(i, j)]))));
            }
            r.extend(c.se.iter().map(|&x| num(Some(x))));
            r
        })
        .collect();
    csv_bytes(&header, &records)
}

pub fn simulate(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let m = cfg.model()?;
    let init = cfg.init();
    let n_steps = cfg.n_steps.unwrap_or(DEFAULT_STEPS);
    let ensemble = EnsembleConfig::new(n_steps, cfg.replicas.unwrap_or(DEFAULT_REPS), cfg.seed.unwrap_or(0))
        .checkpoints(cfg.checkpoints.clone().unwrap_or_default())
        .workers(cfg.workers);
    let summary = run_ensemble(&m, &init, &ensemble)?;
    let bytes = match cfg.format.unwrap_or(Format::Csv) {
        Format::Csv => simulation_csv(&summary)?,
        Format::Json => json(&SimulationDoc {
            params: m,
            init,
            n_steps,
            replicas: summary.replicas,
            seed: summary.seed,
            checkpoints: summary
                .checkpoints
                .iter()
                .map(|c| CheckpointDoc {
                    n: c.n,
                    rep_count: summary.replicas,
                    mean: c.mean.clone(),
                    cov: rows(&c.cov),
                    se: c.se.clone(),
                })
                .collect(),
        })?,
    };
    emit(cfg.out.as_deref(), &bytes)?;
    Ok(Outcome::Pass)
}

pub fn verify(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    json_only(cfg, "verify")?;
    let tag = cfg.tag.context("verify needs --tag")?;
    let m = cfg.model()?;
    let defaults = Budget::default_for(tag);
    let budget = Budget {
        n_steps: cfg.n_steps.unwrap_or(defaults.n_steps),
        replicas: cfg.replicas.unwrap_or(defaults.replicas),
        seed: cfg.seed.unwrap_or(defaults.seed),
        workers: cfg.workers,
    };
    let report: VerificationReport = run_verify(tag, &m, &cfg.init(), &budget)?;
    emit(cfg.out.as_deref(), &json(&report)?)?;
    Ok(if report.pass {
        Outcome::Pass
    } else {
        Outcome::StatisticalFailure
    })
}

#[derive(Serialize)]
struct PhasePoint {
    p: f64,
    theta: f64,
    regime: Regime,
    p_c: Option<f64>,
    exponent_hat: Option<f64>,
    exponent_se: Option<f64>,
}

fn default_p_grid() -> Vec<f64> {
    (1..=19).map(|i| i as f64 / 20.0).collect()
}

fn default_theta_grid() -> Vec<f64> {
    vec![0.25, 0.5, 0.75, 1.0]
}

pub fn phase_diagram(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let p_grid = cfg.p_grid.clone().unwrap_or_else(default_p_grid);
    let theta_grid = cfg.theta_grid.clone().unwrap_or_else(default_theta_grid);
    if p_grid.is_empty() || theta_grid.is_empty() {
        bail!("p and theta grids must be non-empty");
    }
    let (d, lazy) = cfg.dims();
    let n_steps = cfg.n_steps.unwrap_or(DEFAULT_PHASE_STEPS);
    if n_steps < 1000 {
        bail!("phase diagrams need at least 1000 steps for a two-decade fit");
    }
    let checkpoints = log_checkpoints((n_steps / 1000).max(10), n_steps, 3);
    let replicas = cfg.replicas.unwrap_or(DEFAULT_PHASE_REPS);
    let seed = cfg.seed.unwrap_or(0);
    let init = cfg.init();
    let mut points = Vec::with_capacity(p_grid.len() * theta_grid.len());
    for &theta in &theta_grid {
        for &p in &p_grid {
            let m = ModelParams::new(d, lazy, p, theta)?;
            let ensemble = EnsembleConfig::new(n_steps, replicas, replica_seed(seed, points.len() as u64))
                .checkpoints(checkpoints.clone())
                .workers(cfg.workers);
            let summary = run_ensemble(&m, &init, &ensemble)?;
            let fit = scaling_exponent(&summary.checkpoints).ok();
            points.push(PhasePoint {
                p,
                theta,
                regime: classify_regime(&m),
                p_c: critical_probability(m.k(), theta).ok(),
                exponent_hat: fit.map(|f| f.slope),
                exponent_se: fit.map(|f| f.stderr),
            });
        }
    }
    let bytes = match cfg.format.unwrap_or(Format::Csv) {
        Format::Json => json(&points)?,
        Format::Csv => {
            let header: Vec<String> = ["p", "theta", "regime", "p_c", "exponent_hat", "exponent_se"]
                .map(String::from)
                .to_vec();
            let records: Vec<Vec<String>> = points
                .iter()
                .map(|pt| {
                    vec![
                        num(Some(pt.p)),
                        num(Some(pt.theta)),
                        pt.regime.as_str().to_string(),
                        num(pt.p_c),
                        num(pt.exponent_hat),
                        num(pt.exponent_se),
                    ]
                })
                .collect();
            csv_bytes(&header, &records)?
        }
    };
    emit(cfg.out.as_deref(), &bytes)?;
    Ok(Outcome::Pass)
}

#[derive(Serialize)]
struct PathDoc {
    steps: Vec<usize>,
    probability: f64,
}

#[derive(Serialize)]
struct OracleDoc {
    params: ModelParams,
    init: InitialSpec,
    n: u32,
    k: usize,
    paths: Vec<PathDoc>,
    marginals: ExactMarginals,
}

pub fn oracle(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    json_only(cfg, "oracle")?;
    let m = cfg.model()?;
    let init = cfg.init();
    let n = cfg.n_steps.context("oracle needs --steps")?;
    let n = u32::try_from(n).context("--steps is too large")?;
    let dist = enumerate_paths(&m, &init, n)?;
    let doc = OracleDoc {
        params: m,
        init,
        n,
        k: m.k(),
        paths: dist
            .iter()
            .map(|(path, probability)| PathDoc {
                steps: path.iter().map(|d| d.0).collect(),
                probability,
            })
            .collect(),
        marginals: marginals_of(&m, &dist),
    };
    emit(cfg.out.as_deref(), &json(&doc)?)?;
    Ok(Outcome::Pass)
}
