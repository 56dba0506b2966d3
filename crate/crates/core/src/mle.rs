//! Photon-counting simulations and maximum-likelihood estimation of the
//! channel strengths.
//!
//! Every trial draws from its own ChaCha8 stream: the master seed picks the
//! key and the trial index picks the stream, so results do not depend on how
//! trials are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Normal};
use rayon::prelude::*;

use crate::channels::{output_distribution, ChannelKind, ChannelParams, ProbeState, WeakLimitWeights};
use crate::error::{Error, Result};
use crate::fisher::{fisher_matrix_lossy, multiparam_bounds, pipeline_fi};
use crate::hilbert::{log_binomial, FockCutoff, PhotonDistribution};

/// Generator for one trial of a run seeded with `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Multinomial draw of `probes` outcomes by successive conditional binomials.
pub fn sample_counts_with(probs: &[f64], probes: usize, rng: &mut ChaCha8Rng) -> Vec<u64> {
    let mut counts = vec![0; probs.len()];
    let Some(last) = probs.iter().rposition(|&p| p > 0.0) else {
        return counts;
    };
    let mut left = probes as u64;
    let mut mass: f64 = probs[..=last].iter().sum();
    for (k, &p) in probs[..=last].iter().enumerate() {
        if left == 0 {
            break;
        }
        let q = (p / mass).clamp(0.0, 1.0);
        let draw = if k == last || q >= 1.0 {
            left
        } else if q <= 0.0 {
            0
        } else {
            Binomial::new(left, q).expect("q in (0, 1)").sample(rng)
        };
        counts[k] = draw;
        left -= draw;
        mass -= p;
    }
    counts
}

/// Outcome counts of `probes` detections, reproducible from `seed`.
pub fn sample_counts(dist: &PhotonDistribution, probes: usize, seed: u64) -> Result<Vec<u64>> {
    if probes == 0 {
        return Err(Error::invalid("M", "must be at least 1"));
    }
    Ok(sample_counts_with(dist.probs(), probes, &mut trial_rng(seed, 0)))
}

/// Outcome counts of many independent trials.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialEnsemble {
    pub counts: Vec<Vec<u64>>,
    pub probes: usize,
    pub seed: u64,
}

impl TrialEnsemble {
    pub fn simulate(dist: &PhotonDistribution, probes: usize, trials: usize, seed: u64) -> Result<Self> {
        if probes == 0 {
            return Err(Error::invalid("M", "must be at least 1"));
        }
        let counts = (0..trials as u64)
            .into_par_iter()
            .map(|t| sample_counts_with(dist.probs(), probes, &mut trial_rng(seed, t)))
            .collect();
        Ok(TrialEnsemble { counts, probes, seed })
    }

    pub fn trials(&self) -> usize {
        self.counts.len()
    }
}

/// `Σ_k n_k ln p(k)`; an observed outcome of probability zero gives `−∞`.
pub fn log_likelihood(counts: &[u64], dist: &PhotonDistribution) -> f64 {
    let mut total = 0.0;
    for (k, &n) in counts.iter().enumerate().filter(|(_, n)| **n > 0) {
        let p = dist.get(k);
        if p <= 0.0 {
            return f64::NEG_INFINITY;
        }
        total += n as f64 * p.ln();
    }
    total
}

/// Search interval for an estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prior {
    pub lo: f64,
    pub hi: f64,
}

impl Prior {
    pub const FLOOR: f64 = 1e-4;
    pub const CEILING: f64 = 10.0;

    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return Err(Error::invalid("prior", format!("need 0 < lo < hi, got [{lo}, {hi}]")));
        }
        Ok(Prior { lo, hi })
    }

    /// `[truth/10, truth·10]` clipped to `[1e-4, 10]`.
    pub fn around(truth: f64) -> Result<Self> {
        Prior::new((truth / 10.0).max(Self::FLOOR), (truth * 10.0).min(Self::CEILING))
    }

    fn tolerance(&self) -> f64 {
        1e-6 * self.hi
    }

    fn touches(&self, x: f64) -> bool {
        x - self.lo <= self.tolerance() || self.hi - x <= self.tolerance()
    }
}

/// Single-strength model: Fock probe `|m⟩`, known transmissivity, the other
/// strength fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleModel {
    pub kind: ChannelKind,
    pub m: usize,
    /// Values of both strengths; the one named by `kind` is replaced by the
    /// candidate during the search.
    pub params: ChannelParams,
}

impl SingleModel {
    pub fn new(kind: ChannelKind, m: usize, eta: f64) -> Result<Self> {
        let params = ChannelParams::new(0.0, 0.0, eta)?;
        Ok(SingleModel { kind, m, params })
    }

    /// Basis wide enough for every strength up to `hi`.
    pub fn cutoff_for(&self, hi: f64) -> Result<FockCutoff> {
        Ok(self.distribution(hi, None)?.cutoff())
    }

    pub fn distribution(&self, theta: f64, cutoff: Option<FockCutoff>) -> Result<PhotonDistribution> {
        output_distribution(&ProbeState::Fock(self.m), &self.params.with_strength(self.kind, theta), cutoff)
    }
}

/// A maximum-likelihood estimate and whether it sits on the prior boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub log_likelihood: f64,
    pub at_boundary: bool,
}

const GOLDEN: f64 = 0.618_033_988_749_894_8;
const GRID_POINTS: usize = 64;

/// Golden-section maximization on `[a, b]`. Ties move toward `a`.
fn golden_max<F>(f: F, mut a: f64, mut b: f64, tol: f64) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while b - a > tol {
        if fc >= fd {
            (b, d, fd) = (d, c, fc);
            c = b - GOLDEN * (b - a);
            fc = f(c)?;
        } else {
            (a, c, fc) = (c, d, fd);
            d = a + GOLDEN * (b - a);
            fd = f(d)?;
        }
    }
    // The endpoints are never evaluated inside the loop; include them so a
    // monotone likelihood lands on the boundary.
    let mut best = if fc >= fd { (c, fc) } else { (d, fd) };
    for x in [a, b] {
        let fx = f(x)?;
        if fx > best.1 || (fx == best.1 && x < best.0) {
            best = (x, fx);
        }
    }
    Ok(best)
}

/// Maximize `f` over the prior: a 64-point log grid locates the peak, then
/// golden section refines it inside the neighbouring grid cells.
fn maximize_on_prior<F>(f: F, prior: Prior) -> Result<Estimate>
where
    F: Fn(f64) -> Result<f64>,
{
    let ratio = (prior.hi / prior.lo).ln() / (GRID_POINTS - 1) as f64;
    let grid: Vec<f64> = (0..GRID_POINTS).map(|i| prior.lo * (ratio * i as f64).exp()).collect();
    let mut best = (0, f64::NEG_INFINITY);
    for (i, &x) in grid.iter().enumerate() {
        let v = f(x)?;
        if v > best.1 {
            best = (i, v);
        }
    }
    if best.1 == f64::NEG_INFINITY {
        return Err(Error::NonConvergence("likelihood is zero across the whole prior".into()));
    }
    let a = grid[best.0.saturating_sub(1)];
    let b = grid[(best.0 + 1).min(GRID_POINTS - 1)];
    let (value, log_likelihood) = golden_max(&f, a, b, prior.tolerance())?;
    Ok(Estimate { value, log_likelihood, at_boundary: prior.touches(value) })
}

/// Maximum-likelihood estimate of the model's strength within `prior`.
pub fn mle_single(counts: &[u64], model: &SingleModel, prior: Prior) -> Result<Estimate> {
    let cutoff = Some(model.cutoff_for(prior.hi)?);
    maximize_on_prior(|x| Ok(log_likelihood(counts, &model.distribution(x, cutoff)?)), prior)
}

/// Closed-form weak-limit estimates `(N_c, N_s)` from the counts around `m`.
/// `M` is the total number of detections, including outcomes outside
/// `m−2..m+2`.
pub fn mle_weak(counts: &[u64], m: usize) -> (f64, f64) {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return (0.0, 0.0);
    }
    let at = |n: Option<usize>| n.and_then(|n| counts.get(n)).copied().unwrap_or(0) as f64;
    let mf = m as f64;
    let single = at(m.checked_sub(1)) + at(Some(m + 1));
    let double = at(m.checked_sub(2)) + at(Some(m + 2));
    let total = total as f64;
    (single / (total * (2.0 * mf + 1.0)), 2.0 * double / (total * (mf * mf + mf + 1.0)))
}

/// Exact mean and mean squared error of the weak-limit estimators when the
/// counts follow the five-level weights, by summing over the binomial law of
/// the relevant count totals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakEstimatorMoments {
    pub mean_c: f64,
    pub mean_s: f64,
    pub mse_c: f64,
    pub mse_s: f64,
}

pub fn weak_estimator_moments(weights: &WeakLimitWeights, probes: usize) -> Result<WeakEstimatorMoments> {
    if probes == 0 {
        return Err(Error::invalid("M", "must be at least 1"));
    }
    let m = weights.m as f64;
    let w = &weights.weights;
    // Recover the strengths the weights were built from.
    let n_c = (w[1] + w[3]) / (2.0 * m + 1.0);
    let n_s = 2.0 * (w[0] + w[4]) / (m * m + m + 1.0);
    let mm = probes as f64;
    let moments = |q: f64, scale: f64, truth: f64| -> (f64, f64) {
        let (mut mean, mut mse) = (0.0, 0.0);
        for k in 0..=probes {
            let pmf = binomial_pmf(probes, k, q);
            let est = k as f64 * scale / mm;
            mean += pmf * est;
            mse += pmf * (est - truth).powi(2);
        }
        (mean, mse)
    };
    let (mean_c, mse_c) = moments(w[1] + w[3], 1.0 / (2.0 * m + 1.0), n_c);
    let (mean_s, mse_s) = moments(w[0] + w[4], 2.0 / (m * m + m + 1.0), n_s);
    Ok(WeakEstimatorMoments { mean_c, mean_s, mse_c, mse_s })
}

fn binomial_pmf(n: usize, k: usize, q: f64) -> f64 {
    if q <= 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if q >= 1.0 {
        return if k == n { 1.0 } else { 0.0 };
    }
    (log_binomial(n, k) + k as f64 * q.ln() + (n - k) as f64 * (1.0 - q).ln()).exp()
}

/// Joint estimate of both strengths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointEstimate {
    pub n_c: f64,
    pub n_s: f64,
    pub boundary_c: bool,
    pub boundary_s: bool,
    pub sweeps: usize,
}

const MAX_SWEEPS: usize = 100;

/// Coordinate-wise golden-section maximization of the joint likelihood,
/// started from the weak-limit estimates.
pub fn mle_joint(counts: &[u64], m: usize, eta: f64, prior_c: Prior, prior_s: Prior) -> Result<JointEstimate> {
    let base = ChannelParams::new(prior_c.hi, prior_s.hi, eta)?;
    let cutoff = Some(output_distribution(&ProbeState::Fock(m), &base, None)?.cutoff());
    let ll = |c: f64, s: f64| -> Result<f64> {
        let params = ChannelParams { n_c: c, n_s: s, eta };
        Ok(log_likelihood(counts, &output_distribution(&ProbeState::Fock(m), &params, cutoff)?))
    };
    let (wc, ws) = mle_weak(counts, m);
    let (mut c, mut s) = (wc.clamp(prior_c.lo, prior_c.hi), ws.clamp(prior_s.lo, prior_s.hi));
    for sweep in 1..=MAX_SWEEPS {
        let (nc, _) = golden_max(|x| ll(x, s), prior_c.lo, prior_c.hi, prior_c.tolerance())?;
        let (ns, _) = golden_max(|x| ll(nc, x), prior_s.lo, prior_s.hi, prior_s.tolerance())?;
        let moved = (nc - c).abs() > prior_c.tolerance() || (ns - s).abs() > prior_s.tolerance();
        (c, s) = (nc, ns);
        if !moved {
            return Ok(JointEstimate {
                n_c: c,
                n_s: s,
                boundary_c: prior_c.touches(c),
                boundary_s: prior_s.touches(s),
                sweeps: sweep,
            });
        }
    }
    Err(Error::NonConvergence(format!("joint likelihood after {MAX_SWEEPS} sweeps")))
}

/// Summary of squared estimation errors over trials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorStats {
    /// `⟨(θ_est − θ)²⟩`.
    pub mse: f64,
    /// `⟨θ_est⟩ − θ`.
    pub bias: f64,
    /// Twice the standard deviation of the squared errors over `√trials`.
    pub stderr_bar: f64,
    /// Trials that produced an estimate.
    pub trials: usize,
    /// Trials whose estimator returned an error.
    pub failures: usize,
    /// Estimates flagged at the prior boundary.
    pub boundary_hits: usize,
}

impl ErrorStats {
    pub fn from_estimates(estimates: &[f64], truth: f64, failures: usize, boundary_hits: usize) -> Result<Self> {
        let n = estimates.len();
        if n < 2 {
            return Err(Error::NonConvergence(format!("only {n} trials produced estimates")));
        }
        let nf = n as f64;
        let sq: Vec<f64> = estimates.iter().map(|e| (e - truth).powi(2)).collect();
        let mse = sq.iter().sum::<f64>() / nf;
        let var = sq.iter().map(|v| (v - mse).powi(2)).sum::<f64>() / (nf - 1.0);
        let bias = estimates.iter().sum::<f64>() / nf - truth;
        Ok(ErrorStats { mse, bias, stderr_bar: 2.0 * var.sqrt() / nf.sqrt(), trials: n, failures, boundary_hits })
    }

    /// One standard error of `mse`.
    pub fn stderr(&self) -> f64 {
        self.stderr_bar / 2.0
    }

    /// `(mse − reference)` in units of the standard error.
    pub fn z_score(&self, reference: f64) -> f64 {
        (self.mse - reference) / self.stderr()
    }
}

/// Which estimator a simulation applies to each trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Estimator {
    #[default]
    Mle,
    /// The closed-form weak-limit estimator; ignores loss.
    Weak,
}

/// One Monte Carlo configuration for a single strength.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McScenario {
    pub kind: ChannelKind,
    pub m: usize,
    /// True strengths and transmissivity.
    pub params: ChannelParams,
    pub probes: usize,
    pub trials: usize,
    pub seed: u64,
    /// Defaults to `Prior::around` the true strength.
    pub prior: Option<Prior>,
    pub estimator: Estimator,
}

impl McScenario {
    pub fn new(kind: ChannelKind, m: usize, params: ChannelParams, probes: usize, trials: usize, seed: u64) -> Self {
        McScenario { kind, m, params, probes, trials, seed, prior: None, estimator: Estimator::Mle }
    }

    pub fn truth(&self) -> f64 {
        self.params.strength(self.kind)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.truth() <= 0.0 {
            return Err(Error::invalid(self.kind.strength_name(), "the estimated strength must be positive"));
        }
        if self.probes == 0 {
            return Err(Error::invalid("M", "must be at least 1"));
        }
        if self.trials < 2 {
            return Err(Error::invalid("trials", "need at least 2"));
        }
        Ok(())
    }

    fn prior(&self) -> Result<Prior> {
        self.prior.map_or_else(|| Prior::around(self.truth()), Ok)
    }

    fn model(&self) -> SingleModel {
        SingleModel { kind: self.kind, m: self.m, params: self.params }
    }

    /// Photon-counting Fisher information per probe at the true strength.
    pub fn fisher(&self) -> Result<f64> {
        pipeline_fi(&ProbeState::Fock(self.m), &self.params, self.kind)
    }

    /// `1/(M·F)`.
    pub fn cr_bound(&self) -> Result<f64> {
        Ok(1.0 / (self.probes as f64 * self.fisher()?))
    }
}

/// Outcome of one trial: estimate and boundary flag, or a failure.
type TrialOutcome = Result<(f64, bool)>;

fn estimate_one(scenario: &McScenario, counts: &[u64], prior: Prior) -> TrialOutcome {
    match scenario.estimator {
        Estimator::Mle => {
            let est = mle_single(counts, &scenario.model(), prior)?;
            Ok((est.value, est.at_boundary))
        }
        Estimator::Weak => {
            let (c, s) = mle_weak(counts, scenario.m);
            Ok((if scenario.kind == ChannelKind::Displacement { c } else { s }, false))
        }
    }
}

fn summarize(outcomes: Vec<TrialOutcome>, truth: f64) -> Result<ErrorStats> {
    let mut estimates = Vec::with_capacity(outcomes.len());
    let (mut failures, mut boundary) = (0, 0);
    for outcome in outcomes {
        match outcome {
            Ok((value, flagged)) => {
                estimates.push(value);
                boundary += usize::from(flagged);
            }
            Err(_) => failures += 1,
        }
    }
    ErrorStats::from_estimates(&estimates, truth, failures, boundary)
}

/// Simulate `trials` runs of `M` detections each (through loss when
/// `eta < 1`) and summarize the errors of the configured estimator.
pub fn monte_carlo_error(scenario: &McScenario) -> Result<ErrorStats> {
    scenario.validate()?;
    let dist = output_distribution(&ProbeState::Fock(scenario.m), &scenario.params, None)?;
    let prior = scenario.prior()?;
    let outcomes = (0..scenario.trials as u64)
        .into_par_iter()
        .map(|t| {
            let counts = sample_counts_with(dist.probs(), scenario.probes, &mut trial_rng(scenario.seed, t));
            estimate_one(scenario, &counts, prior)
        })
        .collect();
    summarize(outcomes, scenario.truth())
}

/// Joint estimation of both strengths from the same counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointStats {
    pub n_c: ErrorStats,
    pub n_s: ErrorStats,
    /// Multiparameter bounds on the two variances.
    pub bound_c: f64,
    pub bound_s: f64,
}

pub fn monte_carlo_joint(
    m: usize,
    params: ChannelParams,
    probes: usize,
    trials: usize,
    seed: u64,
    priors: Option<(Prior, Prior)>,
) -> Result<JointStats> {
    params.validate()?;
    if !(params.n_c > 0.0 && params.n_s > 0.0) {
        return Err(Error::invalid("N_c, N_s", "both strengths must be positive"));
    }
    if trials < 2 || probes == 0 {
        return Err(Error::invalid("trials", "need M ≥ 1 and at least 2 trials"));
    }
    let (prior_c, prior_s) = match priors {
        Some(p) => p,
        None => (Prior::around(params.n_c)?, Prior::around(params.n_s)?),
    };
    let dist = output_distribution(&ProbeState::Fock(m), &params, None)?;
    let outcomes: Vec<Result<JointEstimate>> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let counts = sample_counts_with(dist.probs(), probes, &mut trial_rng(seed, t));
            mle_joint(&counts, m, params.eta, prior_c, prior_s)
        })
        .collect();
    let split = |pick: fn(&JointEstimate) -> (f64, bool)| -> Vec<TrialOutcome> {
        outcomes.iter().map(|o| o.as_ref().map(pick).map_err(Clone::clone)).collect()
    };
    let n_c = summarize(split(|e| (e.n_c, e.boundary_c)), params.n_c)?;
    let n_s = summarize(split(|e| (e.n_s, e.boundary_s)), params.n_s)?;
    let h = fisher_matrix_lossy(m, &params, None)?;
    let (bound_c, bound_s) = multiparam_bounds(&h, probes)?;
    Ok(JointStats { n_c, n_s, bound_c, bound_s })
}

/// How a fluctuating strength is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FluctuationMode {
    /// Every probe sees its own draw, so each detection follows the
    /// strength-averaged distribution.
    #[default]
    PerProbe,
    /// One draw per trial, shared by all `M` probes of that trial.
    PerEnsemble,
}

impl std::str::FromStr for FluctuationMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-probe" => Ok(FluctuationMode::PerProbe),
            "per-ensemble" => Ok(FluctuationMode::PerEnsemble),
            other => Err(Error::invalid("mode", format!("expected per-probe|per-ensemble, got {other}"))),
        }
    }
}

/// Result of a fluctuation run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluctuationResult {
    pub stats: ErrorStats,
    /// `1/(M·F)` at the mean strength.
    pub cr_bound: f64,
    /// `mse − cr_bound`.
    pub excess: f64,
}

/// Normal draw truncated to nonnegative values by redrawing.
fn truncated_normal(normal: &Normal<f64>, rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let x = normal.sample(rng);
        if x >= 0.0 {
            return x;
        }
    }
}

/// Nodes in the strength average of the per-probe distribution.
const MIXTURE_NODES: usize = 801;

/// `E[p(n|θ)]` over `θ ~ N(mean, σ²)` truncated at 0, by the trapezoid rule
/// on `mean ± 8σ`.
pub fn fluctuation_mixture(model: &SingleModel, mean: f64, sigma: f64, cutoff: Option<FockCutoff>) -> Result<PhotonDistribution> {
    if sigma == 0.0 {
        return model.distribution(mean, cutoff);
    }
    let lo = (mean - 8.0 * sigma).max(0.0);
    let hi = mean + 8.0 * sigma;
    let cutoff = match cutoff {
        Some(c) => c,
        None => model.cutoff_for(hi)?,
    };
    let step = (hi - lo) / (MIXTURE_NODES - 1) as f64;
    let mut probs = vec![0.0; cutoff.dim()];
    let mut weight_sum = 0.0;
    for i in 0..MIXTURE_NODES {
        let x = lo + step * i as f64;
        let edge = if i == 0 || i + 1 == MIXTURE_NODES { 0.5 } else { 1.0 };
        let w = edge * (-0.5 * ((x - mean) / sigma).powi(2)).exp();
        let dist = model.distribution(x, Some(cutoff))?;
        for (slot, p) in probs.iter_mut().zip(dist.probs()) {
            *slot += w * p;
        }
        weight_sum += w;
    }
    for slot in probs.iter_mut() {
        *slot /= weight_sum;
    }
    Ok(PhotonDistribution::from_raw(probs))
}

/// Estimate the mean strength when the true strength fluctuates with
/// standard deviation `sigma`, and report the error beyond `1/(M·F(mean))`.
pub fn fluctuation_study(sigma: f64, scenario: &McScenario, mode: FluctuationMode) -> Result<FluctuationResult> {
    scenario.validate()?;
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::invalid("sigma", format!("must be finite and ≥ 0, got {sigma}")));
    }
    let mean = scenario.truth();
    let model = scenario.model();
    let prior = scenario.prior()?;
    let cr_bound = scenario.cr_bound()?;
    let outcomes: Vec<TrialOutcome> = match mode {
        FluctuationMode::PerProbe => {
            let dist = fluctuation_mixture(&model, mean, sigma, None)?;
            (0..scenario.trials as u64)
                .into_par_iter()
                .map(|t| {
                    let counts = sample_counts_with(dist.probs(), scenario.probes, &mut trial_rng(scenario.seed, t));
                    estimate_one(scenario, &counts, prior)
                })
                .collect()
        }
        FluctuationMode::PerEnsemble => {
            let normal = Normal::new(mean, sigma).map_err(|e| Error::invalid("sigma", e.to_string()))?;
            let cutoff = Some(model.cutoff_for(prior.hi.max(mean + 8.0 * sigma))?);
            (0..scenario.trials as u64)
                .into_par_iter()
                .map(|t| {
                    let mut rng = trial_rng(scenario.seed, t);
                    let drawn = truncated_normal(&normal, &mut rng);
                    let dist = model.distribution(drawn, cutoff)?;
                    let counts = sample_counts_with(dist.probs(), scenario.probes, &mut rng);
                    estimate_one(scenario, &counts, prior)
                })
                .collect()
        }
    };
    let stats = summarize(outcomes, mean)?;
    Ok(FluctuationResult { stats, cr_bound, excess: stats.mse - cr_bound })
}
