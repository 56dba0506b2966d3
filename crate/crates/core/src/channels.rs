//! Probe-to-output maps: phase-randomized displacement and squeezing, their
//! composition, the five-level weak-strength model, and photon loss.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hilbert::{
    displacement_element, log_binomial, squeeze_element, squeeze_matrix, CMatrix, DensityOperator,
    FockCutoff, PhotonDistribution,
};

/// Truncation loss tolerated when a caller fixes the cutoff.
pub const FIXED_CUTOFF_LIMIT: f64 = 1e-8;
/// Target truncation loss for automatically chosen cutoffs.
pub const AUTO_CUTOFF_TARGET: f64 = 1e-10;
/// Largest basis the automatic policy will grow to.
pub const MAX_AUTO_DIM: usize = 4096;

const MAX_QUADRATURE_POINTS: usize = 4096;
const QUADRATURE_TOLERANCE: f64 = 1e-9;

/// Which phase-randomized operation acts on the probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChannelKind {
    Displacement,
    Squeezing,
}

impl ChannelKind {
    pub fn name(self) -> &'static str {
        match self {
            ChannelKind::Displacement => "displacement",
            ChannelKind::Squeezing => "squeezing",
        }
    }

    /// Name of the strength parameter, `N_c` or `N_s`.
    pub fn strength_name(self) -> &'static str {
        match self {
            ChannelKind::Displacement => "N_c",
            ChannelKind::Squeezing => "N_s",
        }
    }
}

impl std::str::FromStr for ChannelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "displacement" => Ok(ChannelKind::Displacement),
            "squeezing" => Ok(ChannelKind::Squeezing),
            other => Err(Error::invalid("channel", format!("unknown channel `{other}`"))),
        }
    }
}

/// Strengths of the two operations and the transmissivity of the loss that
/// precedes them. The squeezing parameter is `r = √N_s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    pub n_c: f64,
    pub n_s: f64,
    pub eta: f64,
}

impl ChannelParams {
    pub fn new(n_c: f64, n_s: f64, eta: f64) -> Result<Self> {
        let params = ChannelParams { n_c, n_s, eta };
        params.validate()?;
        Ok(params)
    }

    pub fn displacement(n_c: f64) -> Result<Self> {
        Self::new(n_c, 0.0, 1.0)
    }

    pub fn squeezing(n_s: f64) -> Result<Self> {
        Self::new(0.0, n_s, 1.0)
    }

    pub fn single(kind: ChannelKind, strength: f64) -> Result<Self> {
        match kind {
            ChannelKind::Displacement => Self::displacement(strength),
            ChannelKind::Squeezing => Self::squeezing(strength),
        }
    }

    pub fn with_eta(self, eta: f64) -> Result<Self> {
        Self::new(self.n_c, self.n_s, eta)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.n_c.is_finite() && self.n_c >= 0.0) {
            return Err(Error::invalid("N_c", format!("must be finite and ≥ 0, got {}", self.n_c)));
        }
        if !(self.n_s.is_finite() && self.n_s >= 0.0) {
            return Err(Error::invalid("N_s", format!("must be finite and ≥ 0, got {}", self.n_s)));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::invalid("eta", format!("must lie in (0, 1], got {}", self.eta)));
        }
        Ok(())
    }

    pub fn strength(&self, kind: ChannelKind) -> f64 {
        match kind {
            ChannelKind::Displacement => self.n_c,
            ChannelKind::Squeezing => self.n_s,
        }
    }

    /// Copy with one strength replaced; no validation.
    pub fn with_strength(mut self, kind: ChannelKind, value: f64) -> Self {
        match kind {
            ChannelKind::Displacement => self.n_c = value,
            ChannelKind::Squeezing => self.n_s = value,
        }
        self
    }

    /// Mean photon number after loss, squeezing and displacement, for a
    /// number-diagonal input of mean `input_mean`.
    pub fn output_mean(&self, input_mean: f64) -> f64 {
        let r = self.n_s.sqrt();
        self.eta * input_mean * (2.0 * r).cosh() + r.sinh().powi(2) + self.n_c
    }

    /// Σ of the four off-center weak-limit weights for probe `m`.
    pub fn weak_limit_spread(&self, m: usize) -> f64 {
        let m = m as f64;
        self.n_c * (2.0 * m + 1.0) + self.n_s * (m * m + m + 1.0) / 2.0
    }
}

/// Input to the channel.
#[derive(Debug, Clone, PartialEq)]
pub enum ProbeState {
    Fock(usize),
    DiagonalMixture(PhotonDistribution),
    /// `D(beta) S(zeta)|0⟩` with real, nonnegative parameters.
    Gaussian { beta: f64, zeta: f64 },
}

impl ProbeState {
    /// Photon-number statistics of the probe. For a Gaussian probe this is
    /// everything a phase-averaged channel followed by counting can see.
    pub fn number_distribution(&self) -> Result<PhotonDistribution> {
        match self {
            ProbeState::Fock(m) => PhotonDistribution::delta(*m, FockCutoff::new(m + 1)?),
            ProbeState::DiagonalMixture(dist) => Ok(dist.clone()),
            ProbeState::Gaussian { beta, zeta } => {
                crate::gaussian::GaussianProbe::new(*beta, *zeta)?.number_distribution()
            }
        }
    }

    pub fn mean_photon(&self) -> Result<f64> {
        Ok(match self {
            ProbeState::Fock(m) => *m as f64,
            ProbeState::DiagonalMixture(dist) => dist.mean(),
            ProbeState::Gaussian { beta, zeta } => beta * beta + zeta.sinh().powi(2),
        })
    }
}

/// Photons added to vacuum by the operation: `N_c`, or `sinh²√N_s`.
pub fn mean_photon_added(kind: ChannelKind, strength: f64) -> f64 {
    match kind {
        ChannelKind::Displacement => strength,
        ChannelKind::Squeezing => strength.sqrt().sinh().powi(2),
    }
}

/// Build at a fixed cutoff (checked against `FIXED_CUTOFF_LIMIT`) or grow the
/// default cutoff until the loss drops below `AUTO_CUTOFF_TARGET`.
pub(crate) fn with_cutoff<F>(cutoff: Option<FockCutoff>, start: FockCutoff, build: F) -> Result<PhotonDistribution>
where
    F: Fn(FockCutoff) -> Result<PhotonDistribution>,
{
    if let Some(cutoff) = cutoff {
        let dist = build(cutoff)?;
        if dist.truncation_loss() > FIXED_CUTOFF_LIMIT {
            return Err(Error::Truncation {
                loss: dist.truncation_loss(),
                dim: cutoff.dim(),
                limit: FIXED_CUTOFF_LIMIT,
            });
        }
        return Ok(dist);
    }
    let mut cutoff = start;
    loop {
        let dist = build(cutoff)?;
        if dist.truncation_loss() <= AUTO_CUTOFF_TARGET {
            return Ok(dist);
        }
        if cutoff.dim() >= MAX_AUTO_DIM {
            return Err(Error::Truncation {
                loss: dist.truncation_loss(),
                dim: cutoff.dim(),
                limit: AUTO_CUTOFF_TARGET,
            });
        }
        cutoff = FockCutoff::new(cutoff.grown().dim().min(MAX_AUTO_DIM))?;
    }
}

fn check_strength(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be finite and ≥ 0, got {value}")))
    }
}

/// Number statistics of the phase-randomized displacement `√N_c` acting on `|m⟩`.
pub fn displacement_distribution(m: usize, n_c: f64, cutoff: Option<FockCutoff>) -> Result<PhotonDistribution> {
    check_strength("N_c", n_c)?;
    let start = FockCutoff::for_probe(m, m as f64 + n_c);
    with_cutoff(cutoff, start, |c| {
        let amp = n_c.sqrt();
        let probs = (0..c.dim()).map(|n| displacement_element(n, m, amp).powi(2)).collect();
        Ok(PhotonDistribution::from_raw(probs))
    })
}

/// Number statistics of the phase-randomized squeezing `r = √N_s` acting on `|m⟩`.
pub fn squeezing_distribution(m: usize, n_s: f64, cutoff: Option<FockCutoff>) -> Result<PhotonDistribution> {
    check_strength("N_s", n_s)?;
    let r = n_s.sqrt();
    let mean = m as f64 + (2.0 * m as f64 + 1.0) * r.sinh().powi(2);
    with_cutoff(cutoff, FockCutoff::for_probe(m, mean), |c| {
        let probs = (0..c.dim()).map(|n| squeeze_element(n, m, r).powi(2)).collect();
        Ok(PhotonDistribution::from_raw(probs))
    })
}

/// Squeeze `input` by `r`, then displace by `amp`, on a basis of `dim`
/// levels. Both steps use exact matrix elements, so the mass missing from
/// the result is exactly what left the basis.
pub(crate) fn channel_probs(input: &[f64], n_c: f64, n_s: f64, dim: usize) -> Vec<f64> {
    let squeezed = if n_s > 0.0 {
        let r = n_s.sqrt();
        let mut out = vec![0.0; dim];
        for (k, &w) in input.iter().enumerate().filter(|(_, w)| **w > 0.0) {
            for (n, slot) in out.iter_mut().enumerate().skip(k % 2).step_by(2) {
                *slot += w * squeeze_element(n, k, r).powi(2);
            }
        }
        out
    } else {
        let mut out = input.to_vec();
        out.resize(dim, 0.0);
        out
    };
    if n_c == 0.0 {
        return squeezed;
    }
    let amp = n_c.sqrt();
    let mut out = vec![0.0; dim];
    for (k, &w) in squeezed.iter().enumerate().filter(|(_, w)| **w > 0.0) {
        for (n, slot) in out.iter_mut().enumerate() {
            *slot += w * displacement_element(n, k, amp).powi(2);
        }
    }
    out
}

/// Full pipeline for a probe: loss with transmissivity `eta`, then squeezing,
/// then displacement, read out in the number basis.
pub fn output_distribution(
    probe: &ProbeState,
    params: &ChannelParams,
    cutoff: Option<FockCutoff>,
) -> Result<PhotonDistribution> {
    params.validate()?;
    let input = probe.number_distribution()?;
    let input = loss_distribution(&input, params.eta)?;
    let top = input.cutoff().dim() - 1;
    let start = FockCutoff::for_probe(top, params.output_mean(input.mean() / params.eta));
    let start = FockCutoff::new(start.dim().max(input.cutoff().dim()))?;
    let inherited = input.truncation_loss();
    with_cutoff(cutoff, start, |c| {
        let probs = channel_probs(input.probs(), params.n_c, params.n_s, c.dim());
        let dist = PhotonDistribution::from_raw(probs);
        let loss = dist.truncation_loss();
        Ok(PhotonDistribution::with_loss(dist.probs().to_vec(), loss + inherited))
    })
}

/// `|m⟩` through loss, squeezing, then displacement.
pub fn combined_distribution(m: usize, params: &ChannelParams, cutoff: Option<FockCutoff>) -> Result<PhotonDistribution> {
    output_distribution(&ProbeState::Fock(m), params, cutoff)
}

/// Loss applied after the channel instead of before it.
pub fn loss_after_channel(m: usize, params: &ChannelParams, cutoff: Option<FockCutoff>) -> Result<PhotonDistribution> {
    let lossless = ChannelParams { eta: 1.0, ..*params };
    let out = combined_distribution(m, &lossless, cutoff)?;
    loss_distribution(&out, params.eta)
}

/// The five-level output of the channel at weak strengths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakLimitWeights {
    pub m: usize,
    /// Weights on `m−2, m−1, m, m+1, m+2`; entries below zero photons are 0.
    pub weights: [f64; 5],
}

impl WeakLimitWeights {
    pub fn get(&self, n: usize) -> f64 {
        let offset = n as i64 - self.m as i64 + 2;
        if (0..5).contains(&offset) {
            self.weights[offset as usize]
        } else {
            0.0
        }
    }

    pub fn to_distribution(&self) -> PhotonDistribution {
        let mut probs = vec![0.0; self.m + 3];
        for (n, slot) in probs.iter_mut().enumerate() {
            *slot = self.get(n);
        }
        PhotonDistribution::from_raw(probs)
    }
}

/// Weights `N_c·m`, `N_c(m+1)`, `N_s·m(m−1)/4`, `N_s(m+1)(m+2)/4`, with the
/// center taking the remainder.
pub fn weak_limit_distribution(m: usize, n_c: f64, n_s: f64) -> Result<WeakLimitWeights> {
    let params = ChannelParams::new(n_c, n_s, 1.0)?;
    let spread = params.weak_limit_spread(m);
    if spread >= 0.5 {
        return Err(Error::WeakLimit(format!(
            "N_c(2m+1) + N_s(m²+m+1)/2 = {spread} is not below 0.5"
        )));
    }
    let mf = m as f64;
    let mut weights = [
        (n_s * mf * (mf - 1.0) / 4.0).max(0.0),
        (n_c * mf).max(0.0),
        0.0,
        (n_c * (mf + 1.0)).max(0.0),
        (n_s * (mf + 1.0) * (mf + 2.0) / 4.0).max(0.0),
    ];
    weights[2] = 1.0 - (weights[0] + weights[1] + weights[3] + weights[4]);
    Ok(WeakLimitWeights { m, weights })
}

fn check_eta(eta: f64) -> Result<()> {
    if eta > 0.0 && eta <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid("eta", format!("must lie in (0, 1], got {eta}")))
    }
}

/// Binomial thinning of a number distribution.
pub fn loss_distribution(dist: &PhotonDistribution, eta: f64) -> Result<PhotonDistribution> {
    check_eta(eta)?;
    if eta == 1.0 {
        return Ok(dist.clone());
    }
    let (ln_eta, ln_loss) = (eta.ln(), (1.0 - eta).ln());
    let src = dist.probs();
    let probs = (0..src.len())
        .map(|k| {
            src.iter()
                .enumerate()
                .skip(k)
                .filter(|(_, p)| **p > 0.0)
                .map(|(n, p)| p * (log_binomial(n, k) + k as f64 * ln_eta + (n - k) as f64 * ln_loss).exp())
                .sum()
        })
        .collect();
    Ok(PhotonDistribution::with_loss(probs, dist.truncation_loss()))
}

/// Kraus sum of the loss channel on a density operator.
pub fn loss_density(rho: &DensityOperator, eta: f64) -> Result<DensityOperator> {
    check_eta(eta)?;
    if eta == 1.0 {
        return Ok(rho.clone());
    }
    let dim = rho.cutoff().dim();
    let src = rho.matrix();
    let (ln_eta, ln_loss) = (eta.ln(), (1.0 - eta).ln());
    let out = CMatrix::from_fn(dim, dim, |a, b| {
        let top = dim - a.max(b);
        (0..top)
            .map(|k| {
                let weight = 0.5 * (log_binomial(a + k, k) + log_binomial(b + k, k))
                    + k as f64 * ln_loss
                    + 0.5 * (a + b) as f64 * ln_eta;
                src[(a + k, b + k)] * weight.exp()
            })
            .sum()
    });
    Ok(DensityOperator::from_parts(out, rho.truncation_loss()))
}

/// Trapezoidal average of `f` over `φ ∈ [0, 2π)`, doubling the number of
/// points from `k0` and reusing previous evaluations until successive
/// averages agree within `QUADRATURE_TOLERANCE` in max norm. Returns the
/// average and the number of points used.
pub(crate) fn doubling_phase_average<F>(k0: usize, f: F) -> Result<(CMatrix, usize)>
where
    F: Fn(f64) -> CMatrix,
{
    check_quadrature(k0)?;
    let mut k = k0;
    let mut sum = (0..k).map(|j| f(2.0 * PI * j as f64 / k as f64)).reduce(|a, b| a + b).expect("k ≥ 8");
    let mut average = &sum / Complex64::from(k as f64);
    while k < MAX_QUADRATURE_POINTS {
        let doubled = 2 * k;
        for j in 0..k {
            sum += f(2.0 * PI * (2 * j + 1) as f64 / doubled as f64);
        }
        k = doubled;
        let next = &sum / Complex64::from(k as f64);
        let change = (&next - &average).camax();
        average = next;
        if change < QUADRATURE_TOLERANCE {
            return Ok((average, k));
        }
    }
    Err(Error::NonConvergence(format!("phase quadrature at K = {MAX_QUADRATURE_POINTS}")))
}

/// Trapezoidal average at exactly `k` points.
pub(crate) fn fixed_phase_average<F>(k: usize, f: F) -> CMatrix
where
    F: Fn(f64) -> CMatrix,
{
    let sum = (0..k).map(|j| f(2.0 * PI * j as f64 / k as f64)).reduce(|a, b| a + b).expect("k ≥ 1");
    sum / Complex64::from(k as f64)
}

fn check_quadrature(k: usize) -> Result<()> {
    if k >= 8 && k.is_power_of_two() {
        Ok(())
    } else {
        Err(Error::invalid("K", format!("must be a power of two ≥ 8, got {k}")))
    }
}

/// Real operator matrix with `dim` rows and `cols` input columns.
fn operator_columns(kind: ChannelKind, strength: f64, dim: usize, cols: usize) -> nalgebra::DMatrix<f64> {
    let amp = strength.sqrt();
    match kind {
        ChannelKind::Displacement => {
            nalgebra::DMatrix::from_fn(dim, cols, |n, k| displacement_element(n, k, amp))
        }
        ChannelKind::Squeezing => squeeze_matrix(amp, dim).columns(0, cols).into_owned(),
    }
}

/// The phase-randomized channel applied at a single phase `φ`:
/// `R(φ) U R(φ)† ρ R(φ) U† R(φ)†` with `R(φ) = exp(−iφ n)`.
fn rotated_channel(rho: &CMatrix, op: &CMatrix, op_t: &CMatrix, phi: f64) -> CMatrix {
    let din = rho.nrows();
    let dout = op.nrows();
    let phases_in: Vec<Complex64> = (0..din).map(|c| Complex64::from_polar(1.0, phi * c as f64)).collect();
    let rotated = CMatrix::from_fn(din, din, |c, d| rho[(c, d)] * phases_in[c] * phases_in[d].conj());
    let mut out = op * rotated * op_t;
    let phases_out: Vec<Complex64> = (0..dout).map(|a| Complex64::from_polar(1.0, -phi * a as f64)).collect();
    for a in 0..dout {
        for b in 0..dout {
            out[(a, b)] *= phases_out[a] * phases_out[b].conj();
        }
    }
    out
}

/// Phase-averaged channel output of a density operator on a fixed output
/// basis with `k` quadrature points; `None` doubles `k` to convergence.
/// Returns the state and the number of points used.
pub fn phase_randomized_output_at(
    probe: &DensityOperator,
    kind: ChannelKind,
    strength: f64,
    quadrature: Quadrature,
    cutoff: FockCutoff,
) -> Result<(DensityOperator, usize)> {
    check_strength("strength", strength)?;
    let din = probe.cutoff().dim();
    if cutoff.dim() < din {
        return Err(Error::CutoffMismatch { left: din, right: cutoff.dim() });
    }
    if strength == 0.0 {
        let mut matrix = CMatrix::zeros(cutoff.dim(), cutoff.dim());
        matrix.view_mut((0, 0), (din, din)).copy_from(probe.matrix());
        return Ok((DensityOperator::from_parts(matrix, probe.truncation_loss()), 1));
    }
    let op = operator_columns(kind, strength, cutoff.dim(), din).map(Complex64::from);
    let op_t = op.transpose();
    let f = |phi: f64| rotated_channel(probe.matrix(), &op, &op_t, phi);
    let (matrix, k) = match quadrature {
        Quadrature::Adaptive(k0) => doubling_phase_average(k0, f)?,
        Quadrature::Fixed(k) => {
            check_quadrature(k)?;
            (fixed_phase_average(k, f), k)
        }
    };
    let deficit = (1.0 - matrix.trace().re).max(0.0);
    Ok((DensityOperator::from_parts(matrix, probe.truncation_loss() + deficit), k))
}

/// How many phase points to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quadrature {
    /// Start here and double until converged.
    Adaptive(usize),
    /// Exactly this many points.
    Fixed(usize),
}

/// Phase-averaged channel output of a density operator. The output basis is
/// grown until the trace lost beyond it is below `AUTO_CUTOFF_TARGET`.
pub fn phase_randomized_output(
    probe: &DensityOperator,
    kind: ChannelKind,
    strength: f64,
    k: usize,
) -> Result<DensityOperator> {
    check_quadrature(k)?;
    let din = probe.cutoff().dim();
    let input_mean = probe.number_distribution().mean();
    let params = ChannelParams::single(kind, strength)?;
    let start = FockCutoff::for_probe(din - 1, params.output_mean(input_mean));
    let mut cutoff = FockCutoff::new(start.dim().max(din))?;
    loop {
        let (out, _) = phase_randomized_output_at(probe, kind, strength, Quadrature::Adaptive(k), cutoff)?;
        let deficit = 1.0 - out.trace();
        if deficit <= AUTO_CUTOFF_TARGET {
            return Ok(out);
        }
        if cutoff.dim() >= MAX_AUTO_DIM {
            return Err(Error::Truncation { loss: deficit, dim: cutoff.dim(), limit: AUTO_CUTOFF_TARGET });
        }
        cutoff = cutoff.grown();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn displacement_examples() {
        let d = displacement_distribution(0, 1.0, None).unwrap();
        assert_relative_eq!(d.get(0), (-1.0f64).exp(), max_relative = 1e-14);
        let d = displacement_distribution(3, 0.0, None).unwrap();
        assert_eq!(d.get(3), 1.0);
        assert_eq!(d.total(), 1.0);
        let d = displacement_distribution(3, 1e-4, None).unwrap();
        assert_relative_eq!(d.get(2), 3e-4, max_relative = 1e-2);
        assert_relative_eq!(d.get(4), 4e-4, max_relative = 1e-2);
    }

    #[test]
    fn squeezing_examples() {
        let d = squeezing_distribution(0, 0.25, None).unwrap();
        assert_relative_eq!(d.get(2), 0.5f64.tanh().powi(2) / (2.0 * 0.5f64.cosh()), max_relative = 1e-12);
        assert_eq!(squeezing_distribution(3, 0.0, None).unwrap().get(3), 1.0);
        let d = squeezing_distribution(3, 1e-4, None).unwrap();
        assert_relative_eq!(d.get(1), 1.5e-4, max_relative = 1e-2);
        assert_relative_eq!(d.get(5), 5e-4, max_relative = 1e-2);
    }

    #[test]
    fn squeezing_parity() {
        for m in 0..8 {
            let d = squeezing_distribution(m, 0.4, None).unwrap();
            for n in ((m + 1) % 2..d.probs().len()).step_by(2) {
                assert_eq!(d.get(n), 0.0);
            }
        }
    }

    #[test]
    fn combined_examples() {
        let zero = ChannelParams::new(0.0, 0.0, 1.0).unwrap();
        assert_eq!(combined_distribution(4, &zero, None).unwrap().get(4), 1.0);
        let disp = displacement_distribution(3, 0.7, None).unwrap();
        let comb = combined_distribution(3, &ChannelParams::displacement(0.7).unwrap(), Some(disp.cutoff())).unwrap();
        assert_eq!(disp.probs(), comb.probs());
        // Away from first order the five-level weights are off by O(N·m²),
        // so the tolerance scales with the strength.
        for (n, tol) in [(0.01, 0.15), (0.001, 0.015)] {
            let both = combined_distribution(2, &ChannelParams::new(n, n, 1.0).unwrap(), None).unwrap();
            assert_relative_eq!(both.get(1), 2.0 * n, max_relative = tol);
            assert_relative_eq!(both.get(0), 0.5 * n, max_relative = tol);
            assert_relative_eq!(both.get(4), 3.0 * n, max_relative = tol);
        }
    }

    #[test]
    fn weak_limit_examples() {
        let w = weak_limit_distribution(3, 0.001, 0.0).unwrap();
        assert_relative_eq!(w.get(2), 0.003, epsilon = 1e-15);
        assert_relative_eq!(w.get(4), 0.004, epsilon = 1e-15);
        assert_relative_eq!(w.get(3), 0.993, epsilon = 1e-15);
        let w = weak_limit_distribution(0, 0.0, 0.001).unwrap();
        assert_relative_eq!(w.get(2), 0.0005, epsilon = 1e-15);
        assert_relative_eq!(w.get(0), 0.9995, epsilon = 1e-15);
        let w = weak_limit_distribution(5, 0.0, 0.0).unwrap();
        assert_eq!(w.get(5), 1.0);
        assert!(matches!(weak_limit_distribution(3, 0.1, 0.0), Err(Error::WeakLimit(_))));
    }

    fn weak_limit_deviation(m: usize, n_c: f64, n_s: f64) -> f64 {
        let w = weak_limit_distribution(m, n_c, n_s).unwrap();
        let exact = combined_distribution(m, &ChannelParams::new(n_c, n_s, 1.0).unwrap(), None).unwrap();
        let mut worst = 0.0f64;
        for k in m.saturating_sub(2)..=m + 2 {
            let e = exact.get(k);
            if w.get(k) == 0.0 {
                // Absent at first order; only second-order mass may appear.
                assert!(e < ((m + 2) * (m + 2)) as f64 * (n_c + n_s).powi(2), "m={m} k={k} exact={e}");
                continue;
            }
            worst = worst.max((w.get(k) - e).abs() / e);
        }
        worst
    }

    #[test]
    fn weak_limit_tracks_exact_distribution() {
        // The deviation is first order in the strength: deviation/N is the
        // same at N = 1e-3 and 1e-4. Its constant grows with m (about 25 at
        // m = 5 with both operations on).
        for m in 0..6 {
            for (c, s) in [(1.0, 0.0), (0.0, 1.0), (1.0, 1.0)] {
                let coarse = weak_limit_deviation(m, 1e-3 * c, 1e-3 * s) / 1e-3;
                let fine = weak_limit_deviation(m, 1e-4 * c, 1e-4 * s) / 1e-4;
                assert!(coarse < 30.0, "m={m} deviation/N={coarse}");
                assert!((coarse / fine - 1.0).abs() < 0.03, "m={m} {coarse} vs {fine}");
            }
        }
        assert!(weak_limit_deviation(1, 1e-3, 0.0) < 5.0 * 1e-3);
        assert!(weak_limit_deviation(1, 0.0, 1e-3) < 5.0 * 1e-3);
    }

    #[test]
    fn loss_examples() {
        let c = FockCutoff::new(4).unwrap();
        let d1 = PhotonDistribution::delta(1, c).unwrap();
        assert_eq!(loss_distribution(&d1, 1.0).unwrap(), d1);
        let out = loss_distribution(&d1, 0.7).unwrap();
        assert_relative_eq!(out.get(1), 0.7, epsilon = 1e-15);
        assert_relative_eq!(out.get(0), 0.3, epsilon = 1e-15);
        let out = loss_distribution(&PhotonDistribution::delta(3, c).unwrap(), 0.9).unwrap();
        for (k, expected) in [0.001, 0.027, 0.243, 0.729].into_iter().enumerate() {
            assert_relative_eq!(out.get(k), expected, max_relative = 1e-12);
        }
    }

    #[test]
    fn loss_distribution_matches_explicit_kraus_sum() {
        // A_k = Σ_n √C(n,k) √((1−η)^k η^(n−k)) |n−k⟩⟨n|, summed on a diagonal input.
        let probs = vec![0.1, 0.2, 0.3, 0.15, 0.25];
        let dist = PhotonDistribution::new(probs.clone()).unwrap();
        let eta: f64 = 0.63;
        let mut kraus = vec![0.0; 5];
        for k in 0..5 {
            for n in k..5 {
                let amp = (log_binomial(n, k).exp() * (1.0 - eta).powi(k as i32) * eta.powi((n - k) as i32)).sqrt();
                kraus[n - k] += amp * amp * probs[n];
            }
        }
        let out = loss_distribution(&dist, eta).unwrap();
        for n in 0..5 {
            assert_relative_eq!(out.get(n), kraus[n], epsilon = 1e-15);
        }
    }

    #[test]
    fn loss_density_examples() {
        let c = FockCutoff::new(5).unwrap();
        let vac = DensityOperator::fock(0, c).unwrap();
        let out = loss_density(&vac, 0.4).unwrap();
        assert!((out.matrix() - vac.matrix()).camax() < 1e-15);
        let dist = PhotonDistribution::new(vec![0.1, 0.2, 0.3, 0.15, 0.25]).unwrap();
        let rho = DensityOperator::diagonal(&dist);
        assert!((loss_density(&rho, 1.0).unwrap().matrix() - rho.matrix()).camax() < 1e-12);
        let diag = loss_density(&rho, 0.7).unwrap().number_distribution();
        let expected = loss_distribution(&dist, 0.7).unwrap();
        assert!(diag.total_variation(&expected) < 1e-10);
    }

    #[test]
    fn loss_commutes_with_displacement() {
        for m in 0..=5 {
            for &eta in &[0.5, 0.7, 0.9] {
                let n_c = 0.8;
                let after = loss_after_channel(m, &ChannelParams::new(n_c, 0.0, eta).unwrap(), None).unwrap();
                let before = combined_distribution(m, &ChannelParams::new(eta * n_c, 0.0, eta).unwrap(), None).unwrap();
                assert!(after.total_variation(&before) < 1e-8, "m={m} eta={eta}");
            }
        }
    }

    #[test]
    fn mean_photon_examples() {
        assert_eq!(mean_photon_added(ChannelKind::Displacement, 0.3), 0.3);
        assert_eq!(mean_photon_added(ChannelKind::Squeezing, 0.0), 0.0);
        assert_relative_eq!(mean_photon_added(ChannelKind::Squeezing, 1.0), 1.0f64.sinh().powi(2), max_relative = 1e-15);
    }

    #[test]
    fn phase_randomized_fock_probe_matches_closed_forms() {
        let probe = DensityOperator::fock(2, FockCutoff::new(3).unwrap()).unwrap();
        let out = phase_randomized_output(&probe, ChannelKind::Displacement, 0.6, 8).unwrap();
        let closed = displacement_distribution(2, 0.6, Some(out.cutoff())).unwrap();
        assert!(out.number_distribution().total_variation(&closed) < 1e-9);
        let dim = out.cutoff().dim();
        for a in 0..dim {
            for b in 0..dim {
                if a != b {
                    assert!(out.matrix()[(a, b)].norm() < 1e-9);
                }
            }
        }
        let out = phase_randomized_output(&probe, ChannelKind::Squeezing, 0.2, 8).unwrap();
        let closed = squeezing_distribution(2, 0.2, Some(out.cutoff())).unwrap();
        assert!(out.number_distribution().total_variation(&closed) < 1e-9);
    }

    #[test]
    fn phase_randomized_vacuum_is_poissonian() {
        let vac = DensityOperator::fock(0, FockCutoff::new(1).unwrap()).unwrap();
        let out = phase_randomized_output(&vac, ChannelKind::Displacement, 0.5, 8).unwrap();
        let mut log_fact = 0.0;
        for n in 0..out.cutoff().dim() {
            if n > 0 {
                log_fact += (n as f64).ln();
            }
            let poisson = (-0.5 + n as f64 * 0.5f64.ln() - log_fact).exp();
            assert!((out.matrix()[(n, n)].re - poisson).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_strength_leaves_probe_unchanged() {
        let psi = nalgebra::DVector::from_vec(vec![
            Complex64::new(0.6, 0.0),
            Complex64::new(0.0, 0.8),
        ]);
        let probe = DensityOperator::pure(&psi).unwrap();
        let out = phase_randomized_output(&probe, ChannelKind::Squeezing, 0.0, 8).unwrap();
        assert!((out.matrix().view((0, 0), (2, 2)) - probe.matrix()).camax() < 1e-15);
    }

    #[test]
    fn quadrature_must_be_power_of_two() {
        let vac = DensityOperator::fock(0, FockCutoff::new(1).unwrap()).unwrap();
        assert!(phase_randomized_output(&vac, ChannelKind::Displacement, 0.5, 12).is_err());
        assert!(phase_randomized_output(&vac, ChannelKind::Displacement, 0.5, 4).is_err());
    }

    proptest::proptest! {
        #[test]
        fn distributions_are_normalized(m in 0usize..8, n_c in 0.0f64..2.0, n_s in 0.0f64..0.5, eta in 0.5f64..=1.0) {
            let params = ChannelParams::new(n_c, n_s, eta).unwrap();
            let d = combined_distribution(m, &params, None).unwrap();
            proptest::prop_assert!(d.truncation_loss() < 1e-8);
            proptest::prop_assert!((d.total() + d.truncation_loss() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn displacement_mean_is_m_plus_n_c(m in 0usize..8, n_c in 0.0f64..2.0) {
            let d = displacement_distribution(m, n_c, None).unwrap();
            proptest::prop_assert!((d.mean() - (m as f64 + n_c)).abs() < 1e-8);
        }
    }
}
