//! Process parameters, walk state and the exact two-stage sampler.
//!
//! The conditional law of the next step depends on the past only through the
//! per-direction step counts, so a walk is stored as `K` counters plus the
//! current position and never as a step history.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::urn::counts_to_position;

/// Tolerance used when checking that a probability vector sums to one.
pub const PROBABILITY_SUM_TOL: f64 = 1e-12;

/// Validated model parameters.
///
/// `K = 2d` moving directions, plus one "stay" direction when `lazy`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct ModelParams {
    d: usize,
    lazy: bool,
    p: f64,
    theta: f64,
}

/// Unvalidated parameter tuple, as read from a config file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawParams {
    pub d: usize,
    #[serde(default)]
    pub lazy: bool,
    pub p: f64,
    pub theta: f64,
}

impl TryFrom<RawParams> for ModelParams {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        ModelParams::new(raw.d, raw.lazy, raw.p, raw.theta)
    }
}

impl From<ModelParams> for RawParams {
    fn from(m: ModelParams) -> Self {
        RawParams {
            d: m.d,
            lazy: m.lazy,
            p: m.p,
            theta: m.theta,
        }
    }
}

fn in_unit_interval(x: f64) -> bool {
    (0.0..=1.0).contains(&x)
}

impl ModelParams {
    pub fn new(d: usize, lazy: bool, p: f64, theta: f64) -> Result<Self> {
        if d < 1 {
            return Err(Error::InvalidParams(format!("dimension d = {d} must be at least 1")));
        }
        if !in_unit_interval(p) {
            return Err(Error::InvalidParams(format!("p = {p} is outside [0, 1]")));
        }
        if !in_unit_interval(theta) {
            return Err(Error::InvalidParams(format!("theta = {theta} is outside [0, 1]")));
        }
        Ok(ModelParams { d, lazy, p, theta })
    }

    /// Builds parameters from a choice count `K` instead of `(d, lazy)`.
    pub fn from_choices(k: usize, p: f64, theta: f64) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidParams(format!("K = {k} must be at least 2")));
        }
        Self::new(k / 2, k % 2 == 1, p, theta)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn lazy(&self) -> bool {
        self.lazy
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Number of choices `K`.
    pub fn k(&self) -> usize {
        2 * self.d + usize::from(self.lazy)
    }

    /// `a = (Kp - 1) / (K - 1)`.
    pub fn a(&self) -> f64 {
        let k = self.k() as f64;
        (k * self.p - 1.0) / (k - 1.0)
    }

    /// Second eigenvalue of the mean replacement matrix, `theta * a`.
    pub fn lambda2(&self) -> f64 {
        self.theta * self.a()
    }

    pub fn with_p(&self, p: f64) -> Result<Self> {
        Self::new(self.d, self.lazy, p, self.theta)
    }

    pub fn with_theta(&self, theta: f64) -> Result<Self> {
        Self::new(self.d, self.lazy, self.p, theta)
    }
}

/// Index into the ordered direction set `(e1, -e1, ..., ed, -ed[, 0])`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Direction(pub usize);

impl Direction {
    pub const E1: Direction = Direction(0);

    /// Axis and sign of the move, or `None` for the stay direction.
    pub fn axis_sign(self, d: usize) -> Option<(usize, i64)> {
        if self.0 >= 2 * d {
            None
        } else {
            Some((self.0 / 2, if self.0.is_multiple_of(2) { 1 } else { -1 }))
        }
    }

    pub fn to_vector(self, d: usize) -> Vec<i64> {
        let mut v = vec![0; d];
        if let Some((axis, sign)) = self.axis_sign(d) {
            v[axis] = sign;
        }
        v
    }
}

/// Law of the first step `X1`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum InitialSpec {
    /// Uniform over the `2d` moving directions; gives `E(S1 S1^T) = I/d`.
    #[default]
    Uniform,
    Fixed(usize),
    Custom(Vec<f64>),
}

impl InitialSpec {
    /// The distribution of `X1` as a length-`K` probability vector.
    pub fn law(&self, params: &ModelParams) -> Result<Vec<f64>> {
        let k = params.k();
        match self {
            InitialSpec::Uniform => {
                let moving = 2 * params.d();
                let mut law = vec![1.0 / moving as f64; moving];
                law.resize(k, 0.0);
                Ok(law)
            }
            InitialSpec::Fixed(idx) => {
                if *idx >= k {
                    return Err(Error::InvalidInitial(format!(
                        "direction index {idx} out of range for K = {k}"
                    )));
                }
                let mut law = vec![0.0; k];
                law[*idx] = 1.0;
                Ok(law)
            }
            InitialSpec::Custom(law) => {
                if law.len() != k {
                    return Err(Error::InvalidInitial(format!(
                        "custom law has {} entries, expected K = {k}",
                        law.len()
                    )));
                }
                if law.iter().any(|&w| !(w >= 0.0 && w.is_finite())) {
                    return Err(Error::InvalidInitial(
                        "custom law has a negative or non-finite entry".into(),
                    ));
                }
                let total: f64 = law.iter().sum();
                if (total - 1.0).abs() > PROBABILITY_SUM_TOL {
                    return Err(Error::InvalidInitial(format!("custom law sums to {total}, not 1")));
                }
                Ok(law.clone())
            }
        }
    }
}

/// Counts-only state of one walk after `n` steps.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WalkState {
    n: u64,
    counts: Vec<u64>,
    position: Vec<i64>,
}

impl WalkState {
    /// The state before any step has been taken.
    pub fn empty(params: &ModelParams) -> Self {
        WalkState {
            n: 0,
            counts: vec![0; params.k()],
            position: vec![0; params.d()],
        }
    }

    /// Rebuilds a state from per-direction counts.
    pub fn from_counts(params: &ModelParams, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != params.k() {
            return Err(Error::InvalidArgument(format!(
                "expected {} counts, got {}",
                params.k(),
                counts.len()
            )));
        }
        let position = counts_to_position(&counts, params.d(), params.lazy())?;
        Ok(WalkState {
            n: counts.iter().sum(),
            counts,
            position,
        })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn position(&self) -> &[i64] {
        &self.position
    }

    /// Records a step in direction `dir`.
    pub fn push(&mut self, dir: Direction) {
        self.counts[dir.0] += 1;
        self.n += 1;
        if let Some((axis, sign)) = dir.axis_sign(self.position.len()) {
            self.position[axis] += sign;
        }
    }

    /// Samples and records the next step, returning its direction.
    pub fn step<R: Rng + ?Sized>(&mut self, params: &ModelParams, rng: &mut R) -> Result<Direction> {
        if self.n == 0 {
            return Err(Error::EmptyHistory);
        }
        let dir = sample_next(params, &self.counts, self.n, rng);
        self.push(dir);
        Ok(dir)
    }
}

/// Uniform draw among the `k - 1` directions different from `exclude`.
fn other_direction<R: Rng + ?Sized>(k: usize, exclude: usize, rng: &mut R) -> usize {
    let r = rng.random_range(0..k - 1);
    if r >= exclude {
        r + 1
    } else {
        r
    }
}

/// Two-stage draw of the next direction given the counts after `n >= 1` steps.
fn sample_next<R: Rng + ?Sized>(params: &ModelParams, counts: &[u64], n: u64, rng: &mut R) -> Direction {
    let k = counts.len();
    let anchor = if rng.random_bool(params.theta) {
        // A uniform past time t falls on direction x with probability counts[x] / n.
        let mut t = rng.random_range(0..n);
        let mut remembered = k - 1;
        for (x, &c) in counts.iter().enumerate() {
            if t < c {
                remembered = x;
                break;
            }
            t -= c;
        }
        remembered
    } else {
        Direction::E1.0
    };
    if rng.random_bool(params.p) {
        Direction(anchor)
    } else {
        Direction(other_direction(k, anchor, rng))
    }
}

/// Writes the one-step conditional law given `counts` after `n >= 1` steps.
pub(crate) fn law_from_counts(params: &ModelParams, counts: &[u64], n: u64, out: &mut [f64]) {
    let k = params.k() as f64;
    let p = params.p;
    let theta = params.theta;
    let n = n as f64;
    let memory = theta * (k * p - 1.0) / (k - 1.0);
    let base = (1.0 - p) / (k - 1.0);
    out[0] = p - memory * (1.0 - counts[0] as f64 / n);
    for (o, &c) in out.iter_mut().zip(counts).skip(1) {
        *o = base + memory * c as f64 / n;
    }
}

/// Law of `X_{n+1}` given the state after `n >= 1` steps.
pub fn conditional_law(params: &ModelParams, state: &WalkState) -> Result<Vec<f64>> {
    if state.n == 0 {
        return Err(Error::EmptyHistory);
    }
    let mut law = vec![0.0; params.k()];
    law_from_counts(params, &state.counts, state.n, &mut law);
    Ok(law)
}

/// Samples `X1` and returns the state after one step.
pub fn initial_step<R: Rng + ?Sized>(params: &ModelParams, init: &InitialSpec, rng: &mut R) -> Result<WalkState> {
    let mut state = WalkState::empty(params);
    let dir = match init {
        InitialSpec::Uniform => Direction(rng.random_range(0..2 * params.d())),
        InitialSpec::Fixed(_) | InitialSpec::Custom(_) => {
            let law = init.law(params)?;
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut chosen = None;
            for (x, w) in law.iter().enumerate() {
                acc += w;
                if *w > 0.0 && u < acc {
                    chosen = Some(x);
                    break;
                }
            }
            // Rounding can leave u just above the accumulated mass.
            Direction(chosen.unwrap_or_else(|| law.iter().rposition(|&w| w > 0.0).unwrap_or(0)))
        }
    };
    state.push(dir);
    Ok(state)
}

/// Position of a walk recorded at a checkpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Record {
    pub n: u64,
    pub position: Vec<i64>,
}

/// Checks that checkpoints are strictly increasing and lie in `[1, n_steps]`.
pub fn validate_checkpoints(checkpoints: &[u64], n_steps: u64) -> Result<()> {
    if n_steps == 0 {
        return Err(Error::InvalidArgument("n_steps must be positive".into()));
    }
    if checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("checkpoints must be strictly increasing".into()));
    }
    if let (Some(&first), Some(&last)) = (checkpoints.first(), checkpoints.last()) {
        if first < 1 || last > n_steps {
            return Err(Error::InvalidArgument(format!(
                "checkpoints must lie in [1, {n_steps}]"
            )));
        }
    }
    Ok(())
}

/// Runs one walk for `n_steps` steps, recording the position at each
/// checkpoint. With no checkpoints only the final state is recorded.
pub fn simulate<R: Rng + ?Sized>(
    params: &ModelParams,
    init: &InitialSpec,
    n_steps: u64,
    checkpoints: &[u64],
    rng: &mut R,
) -> Result<Vec<Record>> {
    validate_checkpoints(checkpoints, n_steps)?;
    let mut records = Vec::with_capacity(checkpoints.len().max(1));
    let mut state = initial_step(params, init, rng)?;
    let mut next = checkpoints.iter().peekable();
    loop {
        if next.peek() == Some(&&state.n) {
            next.next();
            records.push(Record {
                n: state.n,
                position: state.position.clone(),
            });
        }
        if state.n == n_steps {
            break;
        }
        state.step(params, rng)?;
    }
    if checkpoints.is_empty() {
        records.push(Record {
            n: state.n,
            position: state.position.clone(),
        });
    }
    Ok(records)
}

/// Runs one walk, invoking `observe` with the state at each checkpoint.
///
/// Allocation-free variant of [`simulate`] used by ensemble code.
pub(crate) fn run_walk<R, F>(
    params: &ModelParams,
    init: &InitialSpec,
    n_steps: u64,
    checkpoints: &[u64],
    rng: &mut R,
    mut observe: F,
) -> Result<()>
where
    R: Rng + ?Sized,
    F: FnMut(usize, &WalkState),
{
    let mut state = initial_step(params, init, rng)?;
    let mut idx = 0;
    loop {
        if idx < checkpoints.len() && checkpoints[idx] == state.n {
            observe(idx, &state);
            idx += 1;
        }
        if state.n == n_steps {
            break;
        }
        let dir = sample_next(params, &state.counts, state.n, rng);
        state.push(dir);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params(k: usize, p: f64, theta: f64) -> ModelParams {
        ModelParams::from_choices(k, p, theta).unwrap()
    }

    /// One-step law obtained by enumerating the verbal two-stage dynamics:
    /// coin Y, then either a uniform past time or the e1 anchor, then keep or
    /// deviate uniformly.
    fn two_stage_enumeration(k: usize, p: f64, theta: f64, counts: &[u64]) -> Vec<f64> {
        let n: u64 = counts.iter().sum();
        let other = (1.0 - p) / (k as f64 - 1.0);
        let mut law = vec![0.0; k];
        for (anchor, branch_weight) in (0..k)
            .map(|x| (x, theta * counts[x] as f64 / n as f64))
            .chain(std::iter::once((0, 1.0 - theta)))
        {
            for (x, l) in law.iter_mut().enumerate() {
                *l += branch_weight * if x == anchor { p } else { other };
            }
        }
        law
    }

    #[test]
    fn validates_parameters() {
        let m = ModelParams::new(1, false, 0.75, 1.0).unwrap();
        assert_eq!(m.k(), 2);
        let m = ModelParams::new(2, true, 0.5, 0.5).unwrap();
        assert_eq!(m.k(), 5);
        assert!(ModelParams::new(1, false, 1.2, 1.0).is_err());
        assert!(ModelParams::new(1, false, 0.5, -0.1).is_err());
        assert!(ModelParams::new(0, false, 0.5, 0.5).is_err());
        assert!(ModelParams::new(1, false, f64::NAN, 0.5).is_err());
    }

    #[test]
    fn a_lies_in_range() {
        for k in 2..=7 {
            for p in [0.0, 0.3, 1.0] {
                let a = params(k, p, 0.5).a();
                assert!(a >= -1.0 / (k as f64 - 1.0) - 1e-15 && a <= 1.0);
            }
        }
    }

    #[test]
    fn direction_vectors() {
        assert_eq!(Direction(0).to_vector(2), vec![1, 0]);
        assert_eq!(Direction(1).to_vector(2), vec![-1, 0]);
        assert_eq!(Direction(3).to_vector(2), vec![0, -1]);
        assert_eq!(Direction(4).to_vector(2), vec![0, 0]);
    }

    #[test]
    fn law_without_memory_is_tendency() {
        let m = params(4, 0.4, 0.0);
        let state = WalkState::from_counts(&m, vec![0, 3, 2, 1]).unwrap();
        let law = conditional_law(&m, &state).unwrap();
        assert_abs_diff_eq!(law[0], 0.4, epsilon = 1e-15);
        for x in &law[1..] {
            assert_abs_diff_eq!(*x, 0.2, epsilon = 1e-15);
        }
    }

    #[test]
    fn law_is_uniform_at_one_over_k() {
        let m = params(5, 0.2, 0.7);
        let state = WalkState::from_counts(&m, vec![4, 0, 1, 0, 2]).unwrap();
        for x in conditional_law(&m, &state).unwrap() {
            assert_abs_diff_eq!(x, 0.2, epsilon = 1e-15);
        }
    }

    #[test]
    fn law_matches_hand_enumeration() {
        let m = params(2, 0.75, 1.0);
        let state = WalkState::from_counts(&m, vec![3, 1]).unwrap();
        let law = conditional_law(&m, &state).unwrap();
        assert_abs_diff_eq!(law[0], 0.625, epsilon = 1e-15);
        assert_abs_diff_eq!(law[1], 0.375, epsilon = 1e-15);
    }

    #[test]
    fn mixed_branches_match_enumeration() {
        let m = params(3, 0.6, 0.5);
        let state = WalkState::from_counts(&m, vec![1, 1, 0]).unwrap();
        let law = conditional_law(&m, &state).unwrap();
        let expected = two_stage_enumeration(3, 0.6, 0.5, &[1, 1, 0]);
        // memory: (0.4, 0.4, 0.2); tendency: (0.6, 0.2, 0.2); mixture: (0.5, 0.3, 0.2)
        for (got, want) in law.iter().zip([0.5, 0.3, 0.2]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-15);
        }
        for (got, want) in law.iter().zip(&expected) {
            assert_abs_diff_eq!(got, want, epsilon = 1e-15);
        }
    }

    #[test]
    fn law_rejects_empty_history() {
        let m = params(2, 0.5, 0.5);
        assert_eq!(conditional_law(&m, &WalkState::empty(&m)), Err(Error::EmptyHistory));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(WalkState::empty(&m).step(&m, &mut rng), Err(Error::EmptyHistory));
    }

    #[test]
    fn initial_step_variants() {
        let m = params(4, 0.5, 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = initial_step(&m, &InitialSpec::Fixed(0), &mut rng).unwrap();
        assert_eq!(s.counts(), &[1, 0, 0, 0]);
        assert_eq!(s.position(), &[1, 0]);
        let bad = InitialSpec::Custom(vec![0.3, 0.3, 0.3, 0.0]);
        assert!(matches!(
            initial_step(&m, &bad, &mut rng),
            Err(Error::InvalidInitial(_))
        ));
        let neg = InitialSpec::Custom(vec![1.1, -0.1, 0.0, 0.0]);
        assert!(initial_step(&m, &neg, &mut rng).is_err());
        assert!(initial_step(&m, &InitialSpec::Fixed(4), &mut rng).is_err());
        let custom = InitialSpec::Custom(vec![0.0, 0.0, 1.0, 0.0]);
        let s = initial_step(&m, &custom, &mut rng).unwrap();
        assert_eq!(s.position(), &[0, 1]);
    }

    #[test]
    fn uniform_initial_law_has_identity_over_d_second_moment() {
        for (d, lazy) in [(1, false), (2, true), (3, false)] {
            let m = ModelParams::new(d, lazy, 0.5, 0.5).unwrap();
            let law = InitialSpec::Uniform.law(&m).unwrap();
            let mut second = vec![0.0; d];
            for (x, w) in law.iter().enumerate() {
                if let Some((axis, _)) = Direction(x).axis_sign(d) {
                    second[axis] += w;
                }
            }
            for s in second {
                assert_abs_diff_eq!(s, 1.0 / d as f64, epsilon = 1e-15);
            }
        }
        let m = params(2, 0.5, 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let plus = (0..20_000)
            .filter(|_| initial_step(&m, &InitialSpec::Uniform, &mut rng).unwrap().position()[0] == 1)
            .count();
        assert!((plus as f64 / 20_000.0 - 0.5).abs() < 0.015);
    }

    #[test]
    fn persistent_walk_repeats_its_direction() {
        let m = params(4, 1.0, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut s = WalkState::from_counts(&m, vec![0, 0, 7, 0]).unwrap();
        for _ in 0..100 {
            assert_eq!(s.step(&m, &mut rng).unwrap(), Direction(2));
        }
    }

    #[test]
    fn pure_tendency_always_steps_e1() {
        let m = params(3, 1.0, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut s = WalkState::from_counts(&m, vec![0, 2, 5]).unwrap();
        for _ in 0..100 {
            assert_eq!(s.step(&m, &mut rng).unwrap(), Direction::E1);
        }
    }

    #[test]
    fn simulate_records_and_determinism() {
        let m = params(2, 1.0, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let out = simulate(&m, &InitialSpec::Fixed(0), 100, &[], &mut rng).unwrap();
        assert_eq!(
            out,
            vec![Record {
                n: 100,
                position: vec![100]
            }]
        );

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let out = simulate(&m, &InitialSpec::Uniform, 1, &[], &mut rng).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].n, 1);

        let m = params(5, 0.55, 0.8);
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            simulate(&m, &InitialSpec::Uniform, 500, &[1, 10, 250, 500], &mut rng).unwrap()
        };
        let a = run(99);
        assert_eq!(a, run(99));
        assert_eq!(a.iter().map(|r| r.n).collect::<Vec<_>>(), vec![1, 10, 250, 500]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(simulate(&m, &InitialSpec::Uniform, 10, &[0, 5], &mut rng).is_err());
        assert!(simulate(&m, &InitialSpec::Uniform, 10, &[5, 11], &mut rng).is_err());
        assert!(simulate(&m, &InitialSpec::Uniform, 10, &[5, 5], &mut rng).is_err());
    }

    #[test]
    fn step_frequencies_match_conditional_law() {
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        let cases = [
            (2, 0.75, 1.0, vec![3, 1]),
            (3, 0.6, 0.5, vec![1, 1, 0]),
            (5, 0.9, 0.7, vec![2, 0, 5, 1, 2]),
            (4, 0.1, 0.3, vec![0, 4, 4, 2]),
        ];
        for (case, (k, p, theta, counts)) in cases.into_iter().enumerate() {
            let m = params(k, p, theta);
            let state = WalkState::from_counts(&m, counts).unwrap();
            let law = conditional_law(&m, &state).unwrap();
            let draws = 100_000;
            let mut freq = vec![0u64; k];
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + case as u64);
            for _ in 0..draws {
                let mut s = state.clone();
                freq[s.step(&m, &mut rng).unwrap().0] += 1;
            }
            let mut stat = 0.0;
            let mut dof = 0;
            for (f, w) in freq.iter().zip(&law) {
                let e = w * draws as f64;
                if e > 0.0 {
                    stat += (*f as f64 - e).powi(2) / e;
                    dof += 1;
                } else {
                    assert_eq!(*f, 0);
                }
            }
            let pval = 1.0 - ChiSquared::new((dof - 1) as f64).unwrap().cdf(stat);
            assert!(pval > 1e-3, "case {case}: chi2 = {stat}, p = {pval}");
        }
    }

    fn arb_state() -> impl Strategy<Value = (ModelParams, Vec<u64>)> {
        (2usize..=7, 0.0..=1.0f64, 0.0..=1.0f64).prop_flat_map(|(k, p, theta)| {
            proptest::collection::vec(0u64..50, k)
                .prop_filter("non-empty history", |c| c.iter().sum::<u64>() > 0)
                .prop_map(move |c| (params(k, p, theta), c))
        })
    }

    proptest! {
        #[test]
        fn law_is_a_probability_vector((m, counts) in arb_state()) {
            let state = WalkState::from_counts(&m, counts).unwrap();
            let law = conditional_law(&m, &state).unwrap();
            prop_assert!(law.iter().all(|&x| (-1e-15..=1.0 + 1e-15).contains(&x)));
            prop_assert!((law.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn law_matches_two_stage_definition((m, counts) in arb_state()) {
            let state = WalkState::from_counts(&m, counts.clone()).unwrap();
            let law = conditional_law(&m, &state).unwrap();
            let expected = two_stage_enumeration(m.k(), m.p(), m.theta(), &counts);
            for (a, b) in law.iter().zip(&expected) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn drift_identity((m, counts) in arb_state()) {
            let state = WalkState::from_counts(&m, counts).unwrap();
            let law = conditional_law(&m, &state).unwrap();
            let n = state.n() as f64;
            let mut drift = vec![0.0; m.d()];
            for (x, w) in law.iter().enumerate() {
                if let Some((axis, sign)) = Direction(x).axis_sign(m.d()) {
                    drift[axis] += sign as f64 * w;
                }
            }
            let at = m.a() * m.theta();
            for (axis, got) in drift.iter().enumerate() {
                let mut want = at / n * state.position()[axis] as f64;
                if axis == 0 {
                    want += (1.0 - m.theta()) * m.a();
                }
                prop_assert!((got - want).abs() < 1e-12);
            }
        }

        #[test]
        fn position_tracks_counts(k in 2usize..=7, p in 0.0..=1.0f64, theta in 0.0..=1.0f64, seed in any::<u64>()) {
            let m = params(k, p, theta);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut s = initial_step(&m, &InitialSpec::Uniform, &mut rng).unwrap();
            for _ in 0..200 {
                s.step(&m, &mut rng).unwrap();
                let rebuilt = WalkState::from_counts(&m, s.counts().to_vec()).unwrap();
                prop_assert_eq!(&rebuilt, &s);
            }
            prop_assert_eq!(s.n(), 201);
        }
    }
}
