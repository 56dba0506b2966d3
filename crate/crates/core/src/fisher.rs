//! Classical and quantum Fisher information, single- and two-parameter
//! Cramér–Rao bounds, and moment-based sensitivities.

use crate::channels::{combined_distribution, output_distribution, ChannelKind, ChannelParams, ProbeState};
use crate::error::{Error, Result};
use crate::hilbert::{hermitian_eigen, joint_support, DensityOperator, FidelityReference, PhotonDistribution};

/// Probabilities below this are treated as zero in Fisher sums.
pub const TINY_PROBABILITY: f64 = 1e-14;

const CLASSICAL_HALVING_TOLERANCE: f64 = 1e-3;
const QUANTUM_HALVING_TOLERANCE: f64 = 1e-2;
const SLD_EIGEN_FLOOR: f64 = 1e-12;

/// Default finite-difference step `max(1e-5, θ·1e-3)`, never above `θ/100`.
pub fn default_step(theta: f64) -> f64 {
    (theta * 1e-3).max(1e-5).min(theta / 100.0)
}

/// Symmetric 2×2 Fisher matrix over `(N_c, N_s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisherMatrix {
    pub h_cc: f64,
    pub h_ss: f64,
    pub h_cs: f64,
}

impl FisherMatrix {
    pub fn new(h_cc: f64, h_ss: f64, h_cs: f64) -> Result<Self> {
        let h = FisherMatrix { h_cc, h_ss, h_cs };
        if !(h_cc >= 0.0 && h_ss >= 0.0 && h.det() >= -1e-10) {
            return Err(Error::invalid("fisher", format!("{h:?} is not positive semidefinite")));
        }
        Ok(h)
    }

    pub fn det(&self) -> f64 {
        self.h_cc * self.h_ss - self.h_cs * self.h_cs
    }

    /// `h_cs² / (h_cc·h_ss)`, the squared correlation of the two estimators.
    pub fn offdiag_ratio(&self) -> f64 {
        self.h_cs * self.h_cs / (self.h_cc * self.h_ss)
    }
}

/// Variance bound `1/(M·F)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CRBound {
    pub variance_bound: f64,
    pub trials: usize,
    pub fisher: f64,
}

impl CRBound {
    pub fn new(fisher: f64, trials: usize) -> Result<Self> {
        if !(fisher > 0.0 && fisher.is_finite()) {
            return Err(Error::invalid("F", format!("must be positive and finite, got {fisher}")));
        }
        if trials == 0 {
            return Err(Error::invalid("M", "must be at least 1"));
        }
        Ok(CRBound { variance_bound: 1.0 / (trials as f64 * fisher), trials, fisher })
    }
}

fn check_step(theta: f64, dtheta: f64) -> Result<()> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::invalid("theta", format!("must be positive, got {theta}")));
    }
    if !(dtheta > 0.0 && dtheta <= theta / 100.0) {
        return Err(Error::invalid("dtheta", format!("must lie in (0, θ/100], got {dtheta} at θ = {theta}")));
    }
    Ok(())
}

/// One outcome's contribution `(∂p)²/p` from values at `θ−h, θ, θ+h`.
///
/// A probability that vanishes at `θ` while its neighbours do not is the
/// bottom of a double zero, `p ≈ a(θ−θ₀)²`, where `(∂p)²/p → 2p''`.
fn fisher_term(minus: f64, center: f64, plus: f64, h: f64) -> Result<f64> {
    if center >= TINY_PROBABILITY {
        let d = (plus - minus) / (2.0 * h);
        return Ok(d * d / center);
    }
    if minus < TINY_PROBABILITY && plus < TINY_PROBABILITY {
        return Ok(0.0);
    }
    if minus.max(plus) > 1e-6 {
        return Err(Error::StepSize(format!(
            "outcome with p = {center:.3e} has neighbours {minus:.3e}, {plus:.3e}; the step crosses an edge of the support"
        )));
    }
    Ok((2.0 * (plus - 2.0 * center + minus) / (h * h)).max(0.0))
}

fn classical_fi_at<F>(dist_at: &F, theta: f64, center: &PhotonDistribution, h: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<PhotonDistribution>,
{
    let minus = dist_at(theta - h)?;
    let plus = dist_at(theta + h)?;
    let len = center.probs().len().max(minus.probs().len()).max(plus.probs().len());
    let mut total = 0.0;
    for n in 0..len {
        total += fisher_term(minus.get(n), center.get(n), plus.get(n), h)?;
    }
    Ok(total)
}

fn richardson_second_order(coarse: f64, fine: f64) -> f64 {
    (4.0 * fine - coarse) / 3.0
}

/// `Σ_n (∂p/∂θ)²/p` by central differences at `dθ` and `dθ/2`, combined by
/// Richardson extrapolation.
pub fn classical_fi<F>(dist_at: F, theta: f64, dtheta: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<PhotonDistribution>,
{
    check_step(theta, dtheta)?;
    let center = dist_at(theta)?;
    let coarse = classical_fi_at(&dist_at, theta, &center, dtheta)?;
    let fine = classical_fi_at(&dist_at, theta, &center, dtheta / 2.0)?;
    if (fine - coarse).abs() > CLASSICAL_HALVING_TOLERANCE * fine.abs().max(1e-12) {
        return Err(Error::StepSize(format!("Fisher information moved from {coarse} to {fine} on halving dθ = {dtheta}")));
    }
    Ok(richardson_second_order(coarse, fine))
}

fn check_positive(name: &str, value: f64) -> Result<()> {
    if value == 0.0 {
        return Err(Error::DivergentFisher);
    }
    if !(value > 0.0 && value.is_finite()) {
        return Err(Error::invalid(name, format!("must be positive, got {value}")));
    }
    Ok(())
}

/// Photon-counting Fisher information about one strength for any probe
/// through the full pipeline (loss, squeezing, displacement), on a cutoff
/// fixed at the largest strength evaluated.
pub fn pipeline_fi(probe: &ProbeState, params: &ChannelParams, kind: ChannelKind) -> Result<f64> {
    let theta = params.strength(kind);
    let h = default_step(theta);
    let widest = output_distribution(probe, &params.with_strength(kind, theta + h), None)?;
    let cutoff = Some(widest.cutoff());
    classical_fi(|x| output_distribution(probe, &params.with_strength(kind, x), cutoff), theta, h)
}

/// `(2m+1)/N_c`.
pub fn fi_displacement_exact(m: usize, n_c: f64) -> Result<f64> {
    check_positive("N_c", n_c)?;
    Ok((2 * m + 1) as f64 / n_c)
}

/// `(m²+m+1)/(2N_s)`.
pub fn fi_squeezing_exact(m: usize, n_s: f64) -> Result<f64> {
    check_positive("N_s", n_s)?;
    let m = m as f64;
    Ok((m * m + m + 1.0) / (2.0 * n_s))
}

/// Fisher information about `N = amp²` from the information about `amp`.
pub fn chain_rule_fi(f_amplitude: f64, n: f64) -> Result<f64> {
    check_positive("N", n)?;
    Ok(f_amplitude / (4.0 * n))
}

fn fidelity_qfi_at<F>(state_at: &F, reference: &FidelityReference, theta: f64, h: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<DensityOperator>,
{
    let shifted = state_at(theta + h)?.renormalized();
    let f = reference.fidelity(&shifted)?;
    Ok(4.0 * (1.0 - f) / (h * h))
}

/// Quantum Fisher information from the fidelity between `ρ(θ)` and
/// `ρ(θ+h)`. The one-sided difference carries an O(h) error, removed by
/// combining `h` and `h/2`.
pub fn qfi_fidelity<F>(state_at: F, theta: f64, dtheta: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<DensityOperator>,
{
    check_step(theta, dtheta)?;
    let center = state_at(theta)?.renormalized();
    let far = state_at(theta + dtheta)?;
    let support = joint_support(&[center.matrix(), far.matrix()]);
    let reference = FidelityReference::new(&center, support)?;
    let coarse = fidelity_qfi_at(&state_at, &reference, theta, dtheta)?;
    let fine = fidelity_qfi_at(&state_at, &reference, theta, dtheta / 2.0)?;
    check_quantum_halving(coarse, fine, "fidelity")?;
    Ok((2.0 * fine - coarse).max(0.0))
}

fn check_quantum_halving(coarse: f64, fine: f64, what: &str) -> Result<()> {
    let scale = fine.abs().max(coarse.abs());
    if scale < 1e-6 {
        return Ok(());
    }
    if (fine - coarse).abs() > QUANTUM_HALVING_TOLERANCE * scale {
        return Err(Error::NonConvergence(format!("{what} QFI: {coarse} at dθ, {fine} at dθ/2")));
    }
    Ok(())
}

/// Quantum Fisher information `2 Σ |⟨ψ_n|∂ρ|ψ_m⟩|²/(λ_n+λ_m)` over the
/// eigenbasis of `ρ(θ)`, with the derivative from central differences.
pub fn qfi_sld<F>(state_at: F, theta: f64, dtheta: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<DensityOperator>,
{
    check_step(theta, dtheta)?;
    let center = state_at(theta)?.renormalized();
    let eig = hermitian_eigen(center.matrix())?;
    let derivative = |h: f64| -> Result<crate::hilbert::CMatrix> {
        let plus = state_at(theta + h)?.renormalized();
        let minus = state_at(theta - h)?.renormalized();
        Ok((plus.matrix() - minus.matrix()) / num_complex::Complex64::from(2.0 * h))
    };
    let sld_sum = |d: &crate::hilbert::CMatrix| -> f64 {
        let g = eig.vectors.adjoint() * d * &eig.vectors;
        let dim = g.nrows();
        let mut total = 0.0;
        for i in 0..dim {
            for j in 0..dim {
                let denom = eig.values[i].max(0.0) + eig.values[j].max(0.0);
                if denom >= SLD_EIGEN_FLOOR {
                    total += g[(i, j)].norm_sqr() / denom;
                }
            }
        }
        2.0 * total
    };
    let coarse_d = derivative(dtheta)?;
    let fine_d = derivative(dtheta / 2.0)?;
    let coarse = sld_sum(&coarse_d);
    let fine = sld_sum(&fine_d);
    check_quantum_halving(coarse, fine, "SLD")?;
    let extrapolated = (fine_d * num_complex::Complex64::from(4.0) - coarse_d) / num_complex::Complex64::from(3.0);
    Ok(sld_sum(&extrapolated))
}

/// Fisher matrix of photon counting over `(N_c, N_s)` for the probe `|m⟩`.
/// `steps` defaults to `default_step` of each strength.
pub fn fisher_matrix(m: usize, n_c: f64, n_s: f64, steps: Option<(f64, f64)>) -> Result<FisherMatrix> {
    fisher_matrix_lossy(m, &ChannelParams::new(n_c, n_s, 1.0)?, steps)
}

/// As `fisher_matrix`, with loss before the channel.
pub fn fisher_matrix_lossy(m: usize, params: &ChannelParams, steps: Option<(f64, f64)>) -> Result<FisherMatrix> {
    let (n_c, n_s) = (params.n_c, params.n_s);
    let (hc, hs) = steps.unwrap_or((default_step(n_c), default_step(n_s)));
    check_step(n_c, hc)?;
    check_step(n_s, hs)?;
    let widest = combined_distribution(m, &ChannelParams { n_c: n_c + hc, n_s: n_s + hs, ..*params }, None)?;
    let cutoff = Some(widest.cutoff());
    let dist = |c: f64, s: f64| combined_distribution(m, &ChannelParams { n_c: c, n_s: s, ..*params }, cutoff);
    let center = dist(n_c, n_s)?;
    let at_step = |scale: f64| -> Result<[f64; 3]> {
        let (dc, ds) = (hc * scale, hs * scale);
        let (cp, cm) = (dist(n_c + dc, n_s)?, dist(n_c - dc, n_s)?);
        let (sp, sm) = (dist(n_c, n_s + ds)?, dist(n_c, n_s - ds)?);
        let mut h = [0.0; 3];
        let mut mixed: Option<[PhotonDistribution; 4]> = None;
        for n in 0..center.probs().len() {
            let p = center.get(n);
            if p >= TINY_PROBABILITY {
                let gc = (cp.get(n) - cm.get(n)) / (2.0 * dc);
                let gs = (sp.get(n) - sm.get(n)) / (2.0 * ds);
                h[0] += gc * gc / p;
                h[1] += gs * gs / p;
                h[2] += gc * gs / p;
                continue;
            }
            h[0] += fisher_term(cm.get(n), p, cp.get(n), dc)?;
            h[1] += fisher_term(sm.get(n), p, sp.get(n), ds)?;
            if cm.get(n).max(cp.get(n)) >= TINY_PROBABILITY && sm.get(n).max(sp.get(n)) >= TINY_PROBABILITY {
                if mixed.is_none() {
                    mixed = Some([
                        dist(n_c + dc, n_s + ds)?,
                        dist(n_c + dc, n_s - ds)?,
                        dist(n_c - dc, n_s + ds)?,
                        dist(n_c - dc, n_s - ds)?,
                    ]);
                }
                let q = mixed.as_ref().expect("filled above");
                let cross = (q[0].get(n) - q[1].get(n) - q[2].get(n) + q[3].get(n)) / (4.0 * dc * ds);
                h[2] += 2.0 * cross;
            }
        }
        Ok(h)
    };
    let coarse = at_step(1.0)?;
    let fine = at_step(0.5)?;
    for i in 0..2 {
        if (fine[i] - coarse[i]).abs() > CLASSICAL_HALVING_TOLERANCE * fine[i].abs().max(1e-12) {
            return Err(Error::StepSize(format!("Fisher matrix entry moved from {} to {} on halving", coarse[i], fine[i])));
        }
    }
    FisherMatrix::new(
        richardson_second_order(coarse[0], fine[0]),
        richardson_second_order(coarse[1], fine[1]),
        richardson_second_order(coarse[2], fine[2]),
    )
}

/// Lower bounds on the variances of joint estimators of `(N_c, N_s)` from `M` probes.
pub fn multiparam_bounds(h: &FisherMatrix, trials: usize) -> Result<(f64, f64)> {
    if trials == 0 {
        return Err(Error::invalid("M", "must be at least 1"));
    }
    let det = h.det();
    if !(det > 1e-12 * h.h_cc * h.h_ss) || det <= 0.0 {
        return Err(Error::SingularFisher { det });
    }
    let scale = trials as f64 * det;
    Ok((h.h_ss / scale, h.h_cc / scale))
}

/// Which moment of the photon number is read out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Moment {
    First,
    Second,
}

/// `(⟨n⟩ − m)/√(Δ²n)` with the printed variance `2N_c(m+1)`.
pub fn snr_displacement(m: usize, n_c: f64) -> Result<f64> {
    check_positive("N_c", n_c)?;
    Ok((n_c / (2.0 * (m as f64 + 1.0))).sqrt())
}

/// `Δ²O / (∂⟨O⟩/∂N_c)²` for `O = n` or `O = n²`, using the printed moment
/// expressions.
pub fn linearized_sensitivity(m: usize, n_c: f64, moment: Moment) -> Result<f64> {
    check_positive("N_c", n_c)?;
    let mf = m as f64;
    Ok(match moment {
        Moment::First => 2.0 * n_c * (mf + 1.0),
        Moment::Second => {
            let numerator = 2.0 * (4.0 * mf + 1.0) * n_c.powi(3)
                + (18.0 * mf * mf + 2.0 * mf + 3.0) * n_c * n_c
                + (8.0 * mf.powi(3) + 2.0 * mf * mf + 6.0 * mf + 1.0) * n_c;
            let slope = 2.0 * (2.0 * mf + 1.0) + 2.0 * n_c;
            numerator / (slope * slope)
        }
    })
}

/// `1/(F·N)`: the bound's standard deviation squared, relative to the signal.
pub fn relative_error(fisher: f64, n: f64) -> Result<f64> {
    if !(fisher > 0.0 && n > 0.0) {
        return Err(Error::invalid("F, N", format!("must be positive, got F = {fisher}, N = {n}")));
    }
    Ok(1.0 / (fisher * n))
}

/// Low-order moments of a photon-number distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotonMoments {
    pub mean: f64,
    pub second: f64,
    pub variance: f64,
    /// `⟨n⁴⟩ − ⟨n²⟩²`.
    pub second_moment_variance: f64,
}

pub fn photon_moments(dist: &PhotonDistribution) -> PhotonMoments {
    let mean = dist.raw_moment(1);
    let second = dist.raw_moment(2);
    PhotonMoments {
        mean,
        second,
        variance: dist.variance(),
        second_moment_variance: dist.raw_moment(4) - second * second,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{displacement_distribution, squeezing_distribution};
    use crate::hilbert::FockCutoff;
    use approx::assert_relative_eq;

    fn fock_fi(kind: ChannelKind, m: usize, theta: f64) -> f64 {
        let params = ChannelParams::single(kind, theta * 1.002).unwrap();
        let cutoff = Some(combined_distribution(m, &params, None).unwrap().cutoff());
        let dist = |x: f64| match kind {
            ChannelKind::Displacement => displacement_distribution(m, x, cutoff),
            ChannelKind::Squeezing => squeezing_distribution(m, x, cutoff),
        };
        classical_fi(dist, theta, default_step(theta)).unwrap()
    }

    #[test]
    fn classical_fi_examples() {
        assert_relative_eq!(fock_fi(ChannelKind::Displacement, 3, 1.0), 7.0, max_relative = 1e-3);
        assert_relative_eq!(fock_fi(ChannelKind::Displacement, 0, 0.5), 2.0, max_relative = 1e-3);
        assert_relative_eq!(fock_fi(ChannelKind::Squeezing, 3, 0.1), 65.0, max_relative = 1e-3);
    }

    #[test]
    fn classical_fi_handles_double_zero() {
        // L_1^(0)(1) = 0, so p(1) vanishes quadratically at N_c = 1 for m = 1.
        assert_relative_eq!(fock_fi(ChannelKind::Displacement, 1, 1.0), 3.0, max_relative = 1e-3);
    }

    #[test]
    fn classical_fi_rejects_bad_steps() {
        let dist = |x: f64| displacement_distribution(0, x, Some(FockCutoff::new(30).unwrap()));
        assert!(classical_fi(dist, 1.0, 0.5).is_err());
        assert!(classical_fi(dist, 0.0, 1e-5).is_err());
    }

    #[test]
    fn closed_forms() {
        assert_eq!(fi_displacement_exact(3, 1.0).unwrap(), 7.0);
        assert_eq!(fi_squeezing_exact(0, 0.2).unwrap(), 2.5);
        assert_relative_eq!(fi_squeezing_exact(3, 0.1).unwrap(), 65.0, max_relative = 1e-15);
        assert_eq!(fi_displacement_exact(3, 0.0), Err(Error::DivergentFisher));
        assert_eq!(fi_squeezing_exact(3, 0.0), Err(Error::DivergentFisher));
        assert_eq!(chain_rule_fi(28.0, 1.0).unwrap(), 7.0);
        assert_relative_eq!(chain_rule_fi(26.0, 0.1).unwrap(), 65.0, max_relative = 1e-15);
        assert_eq!(chain_rule_fi(4.0, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn qfi_of_diagonal_family_equals_classical() {
        let cutoff = FockCutoff::new(40).unwrap();
        let dist = |x: f64| displacement_distribution(3, x, Some(cutoff));
        let state = |x: f64| dist(x).map(|d| DensityOperator::diagonal(&d));
        let classical = classical_fi(dist, 1.0, 1e-3).unwrap();
        let fid = qfi_fidelity(state, 1.0, 1e-3).unwrap();
        let sld = qfi_sld(state, 1.0, 1e-3).unwrap();
        assert_relative_eq!(fid, 7.0, max_relative = 1e-2);
        assert_relative_eq!(sld, classical, max_relative = 1e-2);
        assert_relative_eq!(fid, classical, max_relative = 1e-2);
    }

    #[test]
    fn qfi_of_constant_family_is_zero() {
        let psi = nalgebra::DVector::from_vec(vec![
            num_complex::Complex64::new(0.6, 0.0),
            num_complex::Complex64::new(0.0, 0.8),
        ]);
        let state = |_: f64| DensityOperator::pure(&psi);
        assert!(qfi_fidelity(state, 1.0, 1e-3).unwrap().abs() < 1e-6);
        assert!(qfi_sld(state, 1.0, 1e-3).unwrap().abs() < 1e-6);
    }

    #[test]
    fn fisher_matrix_reduces_to_single_parameter() {
        let h = fisher_matrix(2, 0.5, 1e-4, None).unwrap();
        assert_relative_eq!(h.h_cc, 5.0 / 0.5, max_relative = 1e-2);
    }

    #[test]
    fn fisher_matrix_offdiagonal_is_small_at_weak_strengths() {
        for m in 0..=5 {
            let h = fisher_matrix(m, 0.01, 0.01, None).unwrap();
            assert!(h.offdiag_ratio() < 1e-3, "m={m} ratio={}", h.offdiag_ratio());
            assert!(h.h_cc <= fi_displacement_exact(m, 0.01).unwrap() + 1e-6);
            assert!(h.h_ss <= fi_squeezing_exact(m, 0.01).unwrap() + 1e-6);
        }
    }

    #[test]
    fn multiparam_bound_examples() {
        let (bc, bs) = multiparam_bounds(&FisherMatrix::new(7.0, 65.0, 0.0).unwrap(), 500).unwrap();
        assert_relative_eq!(bc, 2.857142857e-4, max_relative = 1e-9);
        assert_relative_eq!(bs, 3.076923077e-5, max_relative = 1e-9);
        let (cc, cs) = multiparam_bounds(&FisherMatrix::new(7.0, 65.0, 5.0).unwrap(), 500).unwrap();
        assert!(cc >= bc && cs >= bs);
        assert!(matches!(
            multiparam_bounds(&FisherMatrix::new(1.0, 1.0, 1.0).unwrap(), 10),
            Err(Error::SingularFisher { .. })
        ));
    }

    #[test]
    fn moment_formulas_as_printed() {
        assert_relative_eq!(snr_displacement(0, 2.0).unwrap(), 1.0, max_relative = 1e-15);
        assert_eq!(linearized_sensitivity(3, 1.0, Moment::First).unwrap(), 8.0);
        let vacuum = linearized_sensitivity(0, 1.0, Moment::First).unwrap();
        assert_eq!(vacuum, 2.0);
        for m in 1..10 {
            assert!(linearized_sensitivity(m, 1.0, Moment::First).unwrap() > vacuum);
        }
        // Large m, small N_c: the second-moment form approaches m·N_c/2.
        let big = linearized_sensitivity(2000, 1e-3, Moment::Second).unwrap();
        assert_relative_eq!(big, 2000.0 * 1e-3 / 2.0, max_relative = 1e-3);
    }

    #[test]
    fn relative_error_examples() {
        for &n in &[0.1, 1.0, 2.0] {
            let r = relative_error(fi_displacement_exact(3, n).unwrap(), n).unwrap();
            assert_relative_eq!(r, 1.0 / 7.0, max_relative = 1e-14);
            let r = relative_error(fi_squeezing_exact(0, n).unwrap(), n).unwrap();
            assert_relative_eq!(r, 2.0, max_relative = 1e-14);
            assert_relative_eq!(relative_error(1.0 / n, n).unwrap(), 1.0, max_relative = 1e-14);
        }
    }

    #[test]
    fn photon_moments_of_displaced_fock_state() {
        for m in 0..6 {
            let n_c = 0.7;
            let d = displacement_distribution(m, n_c, None).unwrap();
            let mo = photon_moments(&d);
            assert_relative_eq!(mo.mean, m as f64 + n_c, max_relative = 1e-9);
            // The number variance of D(α)|m⟩ is (2m+1)|α|².
            assert_relative_eq!(mo.variance, (2 * m + 1) as f64 * n_c, max_relative = 1e-9);
        }
    }

    proptest::proptest! {
        #[test]
        fn displacement_fi_identity(m in 0usize..8, n_c in 0.01f64..2.0) {
            let f = fock_fi(ChannelKind::Displacement, m, n_c);
            proptest::prop_assert!((f * n_c / (2 * m + 1) as f64 - 1.0).abs() < 1e-3);
        }

        #[test]
        fn lossy_fi_never_exceeds_lossless(m in 0usize..6, n_c in 0.05f64..2.0, eta in 0.5f64..1.0) {
            let params = ChannelParams::new(n_c, 0.0, eta).unwrap();
            let lossy = pipeline_fi(&ProbeState::Fock(m), &params, ChannelKind::Displacement).unwrap();
            proptest::prop_assert!(lossy <= fi_displacement_exact(m, n_c).unwrap() * (1.0 + 1e-6));
        }
    }
}
