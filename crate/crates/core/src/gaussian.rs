//! Displaced squeezed vacuum probes and their quantum Fisher information
//! under the phase-randomized channels, or at a fixed channel phase.
//!
//! A pure Gaussian state is carried as `D(α)|τ⟩`, where `|τ⟩` is the squeezed
//! vacuum annihilated by `a + τ a†`. Both channels map this family to itself
//! at every phase, so number-basis amplitudes come from a three-term
//! recurrence and no operator matrix is ever formed.

use num_complex::Complex64;

use crate::channels::{doubling_phase_average, fixed_phase_average, ChannelKind, AUTO_CUTOFF_TARGET, MAX_AUTO_DIM};
use crate::error::{Error, Result};
use crate::fisher::{default_step, qfi_fidelity, qfi_sld};
use crate::hilbert::{CMatrix, CVector, DensityOperator, FockCutoff, PhotonDistribution};

/// `D(beta) S(zeta)|0⟩` with real, nonnegative parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianProbe {
    pub beta: f64,
    pub zeta: f64,
}

impl GaussianProbe {
    pub fn new(beta: f64, zeta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(Error::invalid("beta", format!("must be finite and ≥ 0, got {beta}")));
        }
        if !(zeta.is_finite() && zeta >= 0.0) {
            return Err(Error::invalid("zeta", format!("must be finite and ≥ 0, got {zeta}")));
        }
        Ok(GaussianProbe { beta, zeta })
    }

    /// Squeezed vacuum with `sinh²ζ = n̄`.
    pub fn squeezed(mean_photon: f64) -> Result<Self> {
        Self::new(0.0, mean_photon.max(0.0).sqrt().asinh())
    }

    /// Coherent state with `β² = n̄`.
    pub fn coherent(mean_photon: f64) -> Result<Self> {
        Self::new(mean_photon.max(0.0).sqrt(), 0.0)
    }

    pub fn mean_photon(&self) -> f64 {
        self.beta * self.beta + self.zeta.sinh().powi(2)
    }

    fn pair(&self) -> GaussianPair {
        GaussianPair { alpha: Complex64::from(self.beta), tau: Complex64::from(self.zeta.tanh()) }
    }

    /// Number-basis amplitudes on a basis that holds all but `AUTO_CUTOFF_TARGET`
    /// of the norm.
    pub fn number_distribution(&self) -> Result<PhotonDistribution> {
        let pair = self.pair();
        let dim = pair.required_dim()?;
        let psi = pair.amplitudes(dim);
        Ok(PhotonDistribution::from_raw(psi.iter().map(|a| a.norm_sqr()).collect()))
    }
}

/// Displacement `alpha` and squeezing `tau` of `D(α)|τ⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct GaussianPair {
    pub alpha: Complex64,
    pub tau: Complex64,
}

impl GaussianPair {
    /// `⟨n|D(α)|τ⟩` for `n < dim`, up to a global phase.
    pub fn amplitudes(&self, dim: usize) -> CVector {
        let (alpha, tau) = (self.alpha, self.tau);
        let lambda = alpha + tau * alpha.conj();
        let mut psi = CVector::zeros(dim);
        psi[0] = Complex64::from((1.0 - tau.norm_sqr()).powf(0.25))
            * (-0.5 * alpha.norm_sqr() - 0.5 * tau * alpha.conj() * alpha.conj()).exp();
        if dim > 1 {
            psi[1] = lambda * psi[0];
        }
        for n in 1..dim.saturating_sub(1) {
            let nf = n as f64;
            psi[n + 1] = (lambda * psi[n] - tau * nf.sqrt() * psi[n - 1]) / (nf + 1.0).sqrt();
        }
        psi
    }

    pub fn mean_photon(&self) -> f64 {
        let t2 = self.tau.norm_sqr();
        self.alpha.norm_sqr() + t2 / (1.0 - t2)
    }

    /// Smallest basis that holds all but `AUTO_CUTOFF_TARGET` of the norm.
    pub fn required_dim(&self) -> Result<usize> {
        let mut dim = FockCutoff::for_probe(0, self.mean_photon()).dim();
        loop {
            let deficit = 1.0 - self.amplitudes(dim).norm_squared();
            if deficit <= AUTO_CUTOFF_TARGET {
                return Ok(dim);
            }
            if dim >= MAX_AUTO_DIM {
                return Err(Error::Truncation { loss: deficit, dim, limit: AUTO_CUTOFF_TARGET });
            }
            dim = (dim + dim / 2).min(MAX_AUTO_DIM);
        }
    }

    /// The channel at phase `φ`, i.e. the operation conjugated by `R(φ) = exp(−iφn)`.
    pub fn through(&self, kind: ChannelKind, strength: f64, phi: f64) -> GaussianPair {
        let amp = strength.sqrt();
        match kind {
            ChannelKind::Displacement => {
                GaussianPair { alpha: self.alpha + Complex64::from_polar(amp, -phi), tau: self.tau }
            }
            ChannelKind::Squeezing => {
                let rot = Complex64::from_polar(1.0, -2.0 * phi);
                let (c, s, t) = (amp.cosh(), amp.sinh(), amp.tanh());
                let alpha = self.alpha * c - self.alpha.conj() * rot * s;
                let tau = (rot * t + self.tau) / (Complex64::from(1.0) + self.tau * t * rot.conj());
                GaussianPair { alpha, tau }
            }
        }
    }
}

/// Parameters that bound the reach of every phase's output, used to size the basis.
fn envelope(probe: &GaussianProbe, kind: ChannelKind, strength: f64) -> GaussianPair {
    let amp = strength.sqrt();
    match kind {
        ChannelKind::Displacement => GaussianPair {
            alpha: Complex64::from(probe.beta + amp),
            tau: Complex64::from(probe.zeta.tanh()),
        },
        ChannelKind::Squeezing => GaussianPair {
            alpha: Complex64::from(probe.beta * amp.exp()),
            tau: Complex64::from((probe.zeta + amp).tanh()),
        },
    }
}

/// Pure-state density operator of the probe on the given basis.
pub fn gaussian_probe_density(probe: &GaussianProbe, cutoff: FockCutoff) -> Result<DensityOperator> {
    let psi = probe.pair().amplitudes(cutoff.dim());
    let deficit = 1.0 - psi.norm_squared();
    if deficit > 1e-8 {
        return Err(Error::Truncation { loss: deficit, dim: cutoff.dim(), limit: 1e-8 });
    }
    DensityOperator::pure(&psi)
}

/// Number-basis marginal of the probe: all that survives phase randomization.
pub fn phase_randomized_gaussian_distribution(probe: &GaussianProbe) -> Result<PhotonDistribution> {
    probe.number_distribution()
}

/// Channel outputs of one probe as a function of the channel strength, on a
/// basis and quadrature fixed once for the whole family.
pub(crate) struct GaussianFamily {
    probe: GaussianProbe,
    kind: ChannelKind,
    dim: usize,
    points: usize,
}

impl GaussianFamily {
    /// Size the basis and quadrature at `max_strength`, the largest strength
    /// the family will be evaluated at.
    pub fn new(probe: GaussianProbe, kind: ChannelKind, max_strength: f64) -> Result<Self> {
        let dim = envelope(&probe, kind, max_strength).required_dim()?;
        let mut family = GaussianFamily { probe, kind, dim, points: 0 };
        let (_, points) = doubling_phase_average(8, |phi| family.projector(max_strength, phi))?;
        family.points = points;
        Ok(family)
    }

    fn projector(&self, strength: f64, phi: f64) -> CMatrix {
        let psi = self.probe.pair().through(self.kind, strength, phi).amplitudes(self.dim);
        &psi * psi.adjoint()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn quadrature_points(&self) -> usize {
        self.points
    }

    pub fn state(&self, strength: f64) -> DensityOperator {
        let matrix = fixed_phase_average(self.points, |phi| self.projector(strength, phi));
        let deficit = (1.0 - matrix.trace().re).max(0.0);
        DensityOperator::from_parts(matrix, deficit)
    }
}

/// Both QFI evaluations for one probe and channel, with the numerical
/// resources they used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QfiEstimate {
    pub fidelity: f64,
    pub sld: f64,
    pub dim: usize,
    pub quadrature_points: usize,
}

impl QfiEstimate {
    pub fn relative_disagreement(&self) -> f64 {
        (self.fidelity - self.sld).abs() / self.fidelity.abs().max(self.sld.abs())
    }
}

/// How the channel phase relates to the probe and the measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PhaseReference {
    /// The channel phase is uniformly random and averaged over.
    #[default]
    Randomized,
    /// The channel phase is fixed relative to the probe at its most
    /// favourable value, so the output stays pure.
    Stable,
}

impl std::str::FromStr for PhaseReference {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "randomized" => Ok(PhaseReference::Randomized),
            "stable" => Ok(PhaseReference::Stable),
            other => Err(Error::invalid("phase_reference", format!("expected randomized|stable, got {other}"))),
        }
    }
}

/// Quantum Fisher information of the channel output about its strength,
/// from fidelity and from the SLD.
pub fn qfi_gaussian_detail(probe: &GaussianProbe, kind: ChannelKind, strength: f64) -> Result<QfiEstimate> {
    qfi_gaussian_detail_with(probe, kind, strength, PhaseReference::Randomized)
}

pub fn qfi_gaussian_detail_with(
    probe: &GaussianProbe,
    kind: ChannelKind,
    strength: f64,
    reference: PhaseReference,
) -> Result<QfiEstimate> {
    if !(strength > 0.0 && strength.is_finite()) {
        return Err(Error::invalid("strength", format!("must be positive, got {strength}")));
    }
    match reference {
        PhaseReference::Randomized => {
            let h = default_step(strength);
            let family = GaussianFamily::new(*probe, kind, strength + h)?;
            let state = |x: f64| Ok(family.state(x));
            let fidelity = qfi_fidelity(state, strength, h)?;
            let sld = qfi_sld(state, strength, h)?;
            Ok(QfiEstimate { fidelity, sld, dim: family.dim(), quadrature_points: family.quadrature_points() })
        }
        PhaseReference::Stable => stable_qfi(probe, kind, strength),
    }
}

/// Fidelity-based QFI, rejected if the SLD evaluation disagrees by more than 1%.
pub fn qfi_gaussian(probe: &GaussianProbe, kind: ChannelKind, strength: f64) -> Result<f64> {
    qfi_gaussian_with(probe, kind, strength, PhaseReference::Randomized)
}

pub fn qfi_gaussian_with(probe: &GaussianProbe, kind: ChannelKind, strength: f64, reference: PhaseReference) -> Result<f64> {
    let est = qfi_gaussian_detail_with(probe, kind, strength, reference)?;
    if est.relative_disagreement() > 1e-2 {
        return Err(Error::NonConvergence(format!(
            "fidelity QFI {} and SLD QFI {} disagree",
            est.fidelity, est.sld
        )));
    }
    Ok(est.fidelity)
}

/// Pure output family `θ ↦ |ψ(θ)⟩` at one fixed channel phase.
struct PureFamily {
    pair: GaussianPair,
    kind: ChannelKind,
    phi: f64,
    dim: usize,
}

impl PureFamily {
    fn psi(&self, strength: f64) -> CVector {
        self.pair.through(self.kind, strength, self.phi).amplitudes(self.dim)
    }

    /// `4(1 − |⟨ψ(θ)|ψ(θ+h)⟩|²)/h²`, extrapolated as `2H(h/2) − H(h)`.
    fn fidelity_qfi(&self, theta: f64, h: f64) -> Result<f64> {
        let center = self.psi(theta);
        let at = |step: f64| {
            let moved = self.psi(theta + step);
            let overlap = center.dotc(&moved).norm_sqr() / (center.norm_squared() * moved.norm_squared());
            4.0 * (1.0 - overlap) / (step * step)
        };
        let (coarse, fine) = (at(h), at(h / 2.0));
        halving_check(coarse, fine, "fidelity")?;
        Ok((2.0 * fine - coarse).max(0.0))
    }

    /// `4(⟨∂ψ|∂ψ⟩ − |⟨ψ|∂ψ⟩|²)` with a Richardson central difference for `∂ψ`.
    fn derivative_qfi(&self, theta: f64, h: f64) -> Result<f64> {
        let center = self.psi(theta);
        let central = |step: f64| (self.psi(theta + step) - self.psi(theta - step)) / Complex64::from(2.0 * step);
        let eval = |d: &CVector| 4.0 * (d.norm_squared() - center.dotc(d).norm_sqr());
        let (d_h, d_half) = (central(h), central(h / 2.0));
        let (coarse, fine) = (eval(&d_h), eval(&d_half));
        halving_check(coarse, fine, "SLD")?;
        let d = (d_half * Complex64::from(4.0) - d_h) / Complex64::from(3.0);
        Ok(eval(&d))
    }
}

fn halving_check(coarse: f64, fine: f64, what: &str) -> Result<()> {
    let scale = coarse.abs().max(fine.abs());
    if scale > 1e-6 && (coarse - fine).abs() > 1e-2 * scale {
        return Err(Error::NonConvergence(format!("{what} QFI: {coarse} at dθ, {fine} at dθ/2")));
    }
    Ok(())
}

/// Stable-phase QFI maximized over the channel phase: a coarse scan of
/// `[0, π)` followed by golden-section refinement around the best point.
fn stable_qfi(probe: &GaussianProbe, kind: ChannelKind, strength: f64) -> Result<QfiEstimate> {
    const SCAN: usize = 24;
    let h = default_step(strength);
    let dim = envelope(probe, kind, strength + h).required_dim()?;
    let family = |phi: f64| PureFamily { pair: probe.pair(), kind, phi, dim };
    let value = |phi: f64| family(phi).fidelity_qfi(strength, h);
    let width = std::f64::consts::PI / SCAN as f64;
    let mut best = (0.0, f64::NEG_INFINITY);
    for i in 0..SCAN {
        let phi = i as f64 * width;
        let q = value(phi)?;
        if q > best.1 {
            best = (phi, q);
        }
    }
    let golden = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (best.0 - width, best.0 + width);
    let mut c = b - golden * (b - a);
    let mut d = a + golden * (b - a);
    let (mut qc, mut qd) = (value(c)?, value(d)?);
    while b - a > 1e-6 {
        if qc > qd {
            (b, d, qd) = (d, c, qc);
            c = b - golden * (b - a);
            qc = value(c)?;
        } else {
            (a, c, qc) = (c, d, qd);
            d = a + golden * (b - a);
            qd = value(d)?;
        }
    }
    let refined = 0.5 * (a + b);
    let q = value(refined)?;
    let (phi, fidelity) = if q >= best.1 { (refined, q) } else { best };
    let sld = family(phi).derivative_qfi(strength, h)?;
    Ok(QfiEstimate { fidelity, sld, dim, quadrature_points: 1 })
}

/// One-parameter Gaussian probe families indexed by mean photon number.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GaussianFamilyKind {
    Coherent,
    Squeezed,
}

impl GaussianFamilyKind {
    pub fn probe(self, mean_photon: f64) -> Result<GaussianProbe> {
        match self {
            GaussianFamilyKind::Coherent => GaussianProbe::coherent(mean_photon),
            GaussianFamilyKind::Squeezed => GaussianProbe::squeezed(mean_photon),
        }
    }
}

/// Scan probes of fixed mean photon number, splitting it between
/// displacement (`β² = f·n̄`) and squeezing for `points` values of `f` in
/// `[0, 1]`. Returns the best probe and its QFI.
pub fn best_gaussian_at_energy(
    mean_photon: f64,
    kind: ChannelKind,
    strength: f64,
    points: usize,
) -> Result<(GaussianProbe, f64)> {
    if points < 2 {
        return Err(Error::invalid("points", "need at least 2"));
    }
    let mut best: Option<(GaussianProbe, f64)> = None;
    for i in 0..points {
        let fraction = i as f64 / (points - 1) as f64;
        let beta = (fraction * mean_photon).sqrt();
        let zeta = ((1.0 - fraction) * mean_photon).max(0.0).sqrt().asinh();
        let probe = GaussianProbe::new(beta, zeta)?;
        let qfi = qfi_gaussian(&probe, kind, strength)?;
        if best.map_or(true, |(_, q)| qfi > q) {
            best = Some((probe, qfi));
        }
    }
    Ok(best.expect("points ≥ 2"))
}

/// Upper end of the mean-photon search bracket.
pub const ENERGY_SEARCH_LIMIT: f64 = 50.0;

/// Mean photon number at which the family's QFI reaches `target` (within 1%).
///
/// The bracket starts at `[0, 1]` and doubles its upper end until the
/// target is enclosed or `ENERGY_SEARCH_LIMIT` is passed; bisection then
/// checks that the QFI rises monotonically across the bracket.
pub fn equivalent_energy(target: f64, family: GaussianFamilyKind, kind: ChannelKind, strength: f64) -> Result<f64> {
    if !(target > 0.0 && target.is_finite()) {
        return Err(Error::invalid("target", format!("must be positive, got {target}")));
    }
    let qfi = |n: f64| qfi_gaussian(&family.probe(n)?, kind, strength);
    let close = |q: f64| (q - target).abs() <= 1e-2 * target;
    let (mut lo, mut q_lo) = (0.0, qfi(0.0)?);
    if q_lo >= target || close(q_lo) {
        return Ok(0.0);
    }
    let (mut hi, mut q_hi) = (1.0, qfi(1.0)?);
    while q_hi < target && !close(q_hi) {
        if q_hi < q_lo {
            return Err(Error::NonConvergence(format!("QFI not monotone in mean photon number near n̄ = {hi}")));
        }
        if hi >= ENERGY_SEARCH_LIMIT {
            return Err(Error::Unreachable { target, limit: ENERGY_SEARCH_LIMIT });
        }
        (lo, q_lo) = (hi, q_hi);
        hi = (2.0 * hi).min(ENERGY_SEARCH_LIMIT);
        q_hi = qfi(hi)?;
    }
    if close(q_hi) {
        return Ok(hi);
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let q_mid = qfi(mid)?;
        if q_mid < q_lo || q_mid > q_hi {
            return Err(Error::NonConvergence(format!("QFI not monotone in mean photon number on [{lo}, {hi}]")));
        }
        if close(q_mid) {
            return Ok(mid);
        }
        if q_mid < target {
            (lo, q_lo) = (mid, q_mid);
        } else {
            (hi, q_hi) = (mid, q_mid);
        }
    }
    Err(Error::NonConvergence("energy bisection".into()))
}

/// `10·log₁₀(e^{2r})` for the squeezed vacuum carrying `m` photons.
pub fn squeezing_db(m: f64) -> f64 {
    let r = m.max(0.0).sqrt().asinh();
    10.0 * (2.0 * r).exp().log10()
}
