//! Truncated Fock-space kernel: special functions, operator matrix elements,
//! Hermitian decompositions and state fidelity.
//!
//! Conventions: `D(α) = exp(α a† − α* a)`, `S(ξ) = exp[(ξ* a² − ξ a†²)/2]`,
//! `R(φ) = exp(−iφ n)`. Matrix elements are taken for real, nonnegative
//! amplitudes; phases enter through rotation conjugation.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Eigenvalues below this (and above `-NEGATIVE_EIGEN_LIMIT`) are treated as zero.
pub const NEGATIVE_EIGEN_LIMIT: f64 = 1e-10;

const FACTORIAL_TABLE_LEN: usize = 171;

fn log_factorial_table() -> &'static [f64; FACTORIAL_TABLE_LEN] {
    static TABLE: OnceLock<[f64; FACTORIAL_TABLE_LEN]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = [0.0; FACTORIAL_TABLE_LEN];
        let mut fact = 1.0f64;
        for (n, slot) in table.iter_mut().enumerate().skip(2) {
            fact *= n as f64;
            *slot = fact.ln();
        }
        table
    })
}

/// `ln(n!)`. Tabulated from the exact product up to 170, Stirling series beyond.
pub fn log_factorial(n: usize) -> f64 {
    if n < FACTORIAL_TABLE_LEN {
        return log_factorial_table()[n];
    }
    let x = n as f64;
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    x * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI * x).ln()
        + inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 / 1260.0))
}

/// `ln C(n, k)`.
pub fn log_binomial(n: usize, k: usize) -> f64 {
    debug_assert!(k <= n);
    log_factorial(n) - log_factorial(k) - log_factorial(n - k)
}

/// Associated Laguerre polynomial `L_m^{(a)}(x)` by upward recurrence in the degree.
///
/// Valid for any integer `a ≥ −m`; the recurrence is a polynomial identity so
/// negative orders need no special treatment.
pub fn laguerre_assoc(m: usize, a: i64, x: f64) -> f64 {
    debug_assert!(a >= -(m as i64));
    let a = a as f64;
    let mut prev = 1.0;
    if m == 0 {
        return prev;
    }
    let mut curr = 1.0 + a - x;
    for k in 1..m {
        let k = k as f64;
        let next = ((2.0 * k + 1.0 + a - x) * curr - (k + a) * prev) / (k + 1.0);
        prev = curr;
        curr = next;
    }
    curr
}

/// `⟨n|D(amp)|m⟩` for real `amp ≥ 0`.
pub fn displacement_element(n: usize, m: usize, amp: f64) -> f64 {
    if amp == 0.0 {
        return if n == m { 1.0 } else { 0.0 };
    }
    if n < m {
        let sign = if (m - n) % 2 == 0 { 1.0 } else { -1.0 };
        return sign * displacement_element(m, n, amp);
    }
    let x = amp * amp;
    let log_prefactor = 0.5 * (log_factorial(m) - log_factorial(n))
        + (n - m) as f64 * amp.ln()
        - 0.5 * x;
    log_prefactor.exp() * laguerre_assoc(m, (n - m) as i64, x)
}

/// `⟨n|S(r)|m⟩` for real `r ≥ 0`; exactly zero when `n − m` is odd.
///
/// Evaluated from the normal-ordered disentangling of `S(r)` as a signed sum
/// in log space. The sum alternates, so accuracy degrades once `r·max(n, m)`
/// becomes large; Gaussian-state amplitudes use a separate recurrence.
pub fn squeeze_element(n: usize, m: usize, r: f64) -> f64 {
    if (n + m) % 2 == 1 {
        return 0.0;
    }
    if r == 0.0 {
        return if n == m { 1.0 } else { 0.0 };
    }
    let half_t = 0.5 * r.tanh();
    let log_half_t = half_t.ln();
    let log_c = r.cosh().ln();
    let base = 0.5 * (log_factorial(n) + log_factorial(m));
    // l = (n − m)/2 + k must stay nonnegative, as must m − 2k.
    let k_min = if m > n { (m - n) / 2 } else { 0 };
    let k_max = m / 2;
    let mut terms: Vec<(f64, f64)> = Vec::with_capacity(k_max + 1 - k_min.min(k_max + 1));
    for k in k_min..=k_max {
        let l = (n + 2 * k - m) / 2;
        let j = m - 2 * k;
        let log_mag = base + (k + l) as f64 * log_half_t - (j as f64 + 0.5) * log_c
            - log_factorial(k)
            - log_factorial(l)
            - log_factorial(j);
        let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
        terms.push((sign, log_mag));
    }
    signed_log_sum(&terms)
}

/// `Σ sign·exp(log_mag)` with the largest magnitude factored out.
fn signed_log_sum(terms: &[(f64, f64)]) -> f64 {
    let max = terms.iter().map(|t| t.1).fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return 0.0;
    }
    let sum: f64 = terms.iter().map(|&(s, l)| s * (l - max).exp()).sum();
    sum * max.exp()
}

/// Real matrix `⟨n|D(amp)|k⟩` on `0..dim`.
pub fn displacement_matrix(amp: f64, dim: usize) -> DMatrix<f64> {
    DMatrix::from_fn(dim, dim, |n, k| displacement_element(n, k, amp))
}

/// Real matrix `⟨n|S(r)|k⟩` on `0..dim`. Entries keep ~1e-9 absolute accuracy
/// for indices up to about 60 at r ≤ 0.7.
pub fn squeeze_matrix(r: f64, dim: usize) -> DMatrix<f64> {
    DMatrix::from_fn(dim, dim, |n, k| squeeze_element(n, k, r))
}

/// Basis size for a truncated Fock space spanning photon numbers `0..dim`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FockCutoff(usize);

impl FockCutoff {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("cutoff", "dimension must be at least 1"));
        }
        Ok(FockCutoff(dim))
    }

    pub fn dim(self) -> usize {
        self.0
    }

    /// Default policy: `max(m, ⌈n̄⌉) + 10 + ⌈6·√(n̄ + 1)⌉`.
    pub fn for_probe(m: usize, mean_photon: f64) -> Self {
        let mean = mean_photon.max(0.0);
        let base = m.max(mean.ceil() as usize);
        FockCutoff(base + 10 + (6.0 * (mean + 1.0).sqrt()).ceil() as usize)
    }

    /// Grow geometrically by half.
    pub fn grown(self) -> Self {
        FockCutoff(self.0 + (self.0 / 2).max(4))
    }
}

/// Probability vector over photon numbers `0..dim` with the mass lost beyond
/// the cutoff tracked explicitly.
#[derive(Debug, Clone, PartialEq)]
pub struct PhotonDistribution {
    probs: Vec<f64>,
    truncation_loss: f64,
}

impl PhotonDistribution {
    /// Validates nonnegativity and `Σ p ≤ 1`; the deficit becomes the truncation loss.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::invalid("probs", "empty distribution"));
        }
        if let Some(p) = probs.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(Error::invalid("probs", format!("entry {p} is not a probability")));
        }
        let total: f64 = probs.iter().sum();
        if total > 1.0 + 1e-9 {
            return Err(Error::invalid("probs", format!("total mass {total} exceeds 1")));
        }
        Ok(Self::from_raw(probs))
    }

    /// Clamps rounding-level negatives; loss is `1 − Σ p` floored at zero.
    pub(crate) fn from_raw(mut probs: Vec<f64>) -> Self {
        for p in probs.iter_mut() {
            if *p < 0.0 {
                *p = 0.0;
            }
        }
        let total: f64 = probs.iter().sum();
        PhotonDistribution { probs, truncation_loss: (1.0 - total).max(0.0) }
    }

    pub(crate) fn with_loss(probs: Vec<f64>, truncation_loss: f64) -> Self {
        let mut dist = Self::from_raw(probs);
        dist.truncation_loss = dist.truncation_loss.max(truncation_loss);
        dist
    }

    /// Point mass on `n` within `0..dim`.
    pub fn delta(n: usize, cutoff: FockCutoff) -> Result<Self> {
        if n >= cutoff.dim() {
            return Err(Error::invalid("n", format!("{n} outside cutoff {}", cutoff.dim())));
        }
        let mut probs = vec![0.0; cutoff.dim()];
        probs[n] = 1.0;
        Ok(PhotonDistribution { probs, truncation_loss: 0.0 })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Probability of `n`, zero beyond the cutoff.
    pub fn get(&self, n: usize) -> f64 {
        self.probs.get(n).copied().unwrap_or(0.0)
    }

    pub fn cutoff(&self) -> FockCutoff {
        FockCutoff(self.probs.len())
    }

    pub fn truncation_loss(&self) -> f64 {
        self.truncation_loss
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.probs.iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }

    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        self.probs
            .iter()
            .enumerate()
            .map(|(n, p)| (n as f64 - mean).powi(2) * p)
            .sum()
    }

    /// `E[n^k]`.
    pub fn raw_moment(&self, k: i32) -> f64 {
        self.probs.iter().enumerate().map(|(n, p)| (n as f64).powi(k) * p).sum()
    }

    /// Probabilities rescaled to unit mass.
    pub fn renormalized(&self) -> Vec<f64> {
        let total = self.total();
        self.probs.iter().map(|p| p / total).collect()
    }

    /// Total-variation distance, zero-padding the shorter vector.
    pub fn total_variation(&self, other: &PhotonDistribution) -> f64 {
        let len = self.probs.len().max(other.probs.len());
        0.5 * (0..len).map(|n| (self.get(n) - other.get(n)).abs()).sum::<f64>()
    }

    /// Same probabilities on a different basis size. Mass dropped by
    /// shrinking is added to the truncation loss.
    pub fn resized(&self, cutoff: FockCutoff) -> Self {
        let mut probs = self.probs.clone();
        probs.resize(cutoff.dim(), 0.0);
        let dropped: f64 = self.probs.iter().skip(cutoff.dim()).sum();
        PhotonDistribution { probs, truncation_loss: self.truncation_loss + dropped }
    }
}

/// Hermitian, positive-semidefinite, unit-trace operator on a truncated Fock space.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    matrix: CMatrix,
    truncation_loss: f64,
}

impl DensityOperator {
    /// Validated construction: Hermitian within 1e-12, trace within 1e-8 of 1,
    /// eigenvalues no more negative than `-NEGATIVE_EIGEN_LIMIT`.
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::invalid("matrix", "must be square and nonempty"));
        }
        let deviation = hermitian_deviation(&matrix);
        if deviation > 1e-12 {
            return Err(Error::NotHermitian { deviation });
        }
        let trace = matrix.trace().re;
        if (trace - 1.0).abs() > 1e-8 {
            return Err(Error::NotNormalized { trace });
        }
        let eig = hermitian_eigen(&matrix)?;
        if let Some(&low) = eig.values.iter().find(|v| **v < -NEGATIVE_EIGEN_LIMIT) {
            return Err(Error::NotPositive { eigenvalue: low });
        }
        Ok(DensityOperator { matrix, truncation_loss: 0.0 })
    }

    pub(crate) fn from_parts(matrix: CMatrix, truncation_loss: f64) -> Self {
        DensityOperator { matrix, truncation_loss }
    }

    /// `|ψ⟩⟨ψ|` normalized; `1 − ‖ψ‖²` is recorded as truncation loss.
    pub fn pure(psi: &CVector) -> Result<Self> {
        let norm2 = psi.norm_squared();
        if !(norm2 > 0.0) {
            return Err(Error::invalid("psi", "zero vector"));
        }
        if norm2 > 1.0 + 1e-9 {
            return Err(Error::invalid("psi", format!("norm² {norm2} exceeds 1")));
        }
        let unit = psi / Complex64::from(norm2.sqrt());
        let matrix = &unit * unit.adjoint();
        Ok(DensityOperator { matrix, truncation_loss: (1.0 - norm2).max(0.0) })
    }

    /// Number-diagonal operator with the (renormalized) distribution on the diagonal.
    pub fn diagonal(dist: &PhotonDistribution) -> Self {
        let probs = dist.renormalized();
        let dim = probs.len();
        let mut matrix = CMatrix::zeros(dim, dim);
        for (n, p) in probs.into_iter().enumerate() {
            matrix[(n, n)] = Complex64::from(p);
        }
        DensityOperator { matrix, truncation_loss: dist.truncation_loss() }
    }

    pub fn fock(n: usize, cutoff: FockCutoff) -> Result<Self> {
        Ok(Self::diagonal(&PhotonDistribution::delta(n, cutoff)?))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn cutoff(&self) -> FockCutoff {
        FockCutoff(self.matrix.nrows())
    }

    pub fn truncation_loss(&self) -> f64 {
        self.truncation_loss
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    /// Photon-number statistics of the state.
    pub fn number_distribution(&self) -> PhotonDistribution {
        let probs = (0..self.matrix.nrows()).map(|n| self.matrix[(n, n)].re).collect();
        PhotonDistribution::with_loss(probs, self.truncation_loss)
    }

    pub fn is_diagonal(&self) -> bool {
        let dim = self.matrix.nrows();
        (0..dim).all(|i| (0..dim).all(|j| i == j || self.matrix[(i, j)] == Complex64::new(0.0, 0.0)))
    }

    /// Divide by the trace, moving the trace deficit into the truncation loss.
    pub fn renormalized(mut self) -> Self {
        let trace = self.trace();
        self.truncation_loss += (1.0 - trace).max(0.0);
        self.matrix /= Complex64::from(trace);
        self
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }
}

pub(crate) fn hermitian_deviation(a: &CMatrix) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..a.nrows() {
        for j in i..a.ncols() {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Spectral decomposition `A = U diag(λ) U†`, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: DVector<f64>,
    pub vectors: CMatrix,
}

impl HermitianEigen {
    pub fn reconstruct(&self) -> CMatrix {
        let scaled = CMatrix::from_fn(self.vectors.nrows(), self.vectors.ncols(), |i, j| {
            self.vectors[(i, j)] * self.values[j]
        });
        scaled * self.vectors.adjoint()
    }
}

/// Diagonalize a Hermitian matrix; rejects input that is not Hermitian within 1e-10.
pub fn hermitian_eigen(a: &CMatrix) -> Result<HermitianEigen> {
    if !a.is_square() {
        return Err(Error::invalid("matrix", "must be square"));
    }
    let deviation = hermitian_deviation(a);
    if deviation > 1e-10 {
        return Err(Error::NotHermitian { deviation });
    }
    let symmetric = (a + a.adjoint()) * Complex64::from(0.5);
    let eig = nalgebra::SymmetricEigen::new(symmetric);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = DVector::from_iterator(order.len(), order.iter().map(|&i| eig.eigenvalues[i]));
    let vectors = CMatrix::from_fn(a.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(HermitianEigen { values, vectors })
}

/// Eigenvalues clipped to zero inside `(-NEGATIVE_EIGEN_LIMIT, 0)`.
pub(crate) fn clip_spectrum(values: &DVector<f64>) -> Result<DVector<f64>> {
    values
        .iter()
        .map(|&v| {
            if v < -NEGATIVE_EIGEN_LIMIT {
                Err(Error::NotPositive { eigenvalue: v })
            } else {
                Ok(v.max(0.0))
            }
        })
        .collect::<Result<Vec<_>>>()
        .map(DVector::from_vec)
}

/// Principal square root of a positive-semidefinite matrix.
pub fn psd_sqrt(a: &CMatrix) -> Result<CMatrix> {
    let eig = hermitian_eigen(a)?;
    let clipped = clip_spectrum(&eig.values)?;
    Ok(HermitianEigen { values: clipped.map(f64::sqrt), vectors: eig.vectors }.reconstruct())
}

/// Indices whose diagonal entry is nonzero in at least one operand. Rows and
/// columns outside this set vanish identically in a PSD matrix.
pub(crate) fn joint_support(ops: &[&CMatrix]) -> Vec<usize> {
    let dim = ops[0].nrows();
    (0..dim).filter(|&i| ops.iter().any(|m| m[(i, i)].re > 0.0)).collect()
}

pub(crate) fn restrict(a: &CMatrix, support: &[usize]) -> CMatrix {
    CMatrix::from_fn(support.len(), support.len(), |i, j| a[(support[i], support[j])])
}

/// Square root of one operand kept around for repeated fidelity evaluations
/// against nearby states.
pub(crate) struct FidelityReference {
    sqrt: CMatrix,
    diagonal: Option<Vec<f64>>,
    support: Vec<usize>,
}

impl FidelityReference {
    pub(crate) fn new(rho: &DensityOperator, support: Vec<usize>) -> Result<Self> {
        if rho.is_diagonal() {
            let diag = (0..rho.matrix.nrows()).map(|i| rho.matrix[(i, i)].re).collect();
            return Ok(FidelityReference { sqrt: CMatrix::zeros(0, 0), diagonal: Some(diag), support });
        }
        let sqrt = psd_sqrt(&restrict(&rho.matrix, &support))?;
        Ok(FidelityReference { sqrt, diagonal: None, support })
    }

    pub(crate) fn fidelity(&self, other: &DensityOperator) -> Result<f64> {
        if let Some(diag) = &self.diagonal {
            if other.is_diagonal() {
                let root_sum: f64 = diag
                    .iter()
                    .enumerate()
                    .map(|(i, p)| (p.max(0.0) * other.matrix[(i, i)].re.max(0.0)).sqrt())
                    .sum();
                return Ok((root_sum * root_sum).clamp(0.0, 1.0));
            }
            let sqrt = CMatrix::from_fn(self.support.len(), self.support.len(), |i, j| {
                if i == j {
                    Complex64::from(diag[self.support[i]].max(0.0).sqrt())
                } else {
                    Complex64::new(0.0, 0.0)
                }
            });
            return trace_norm_fidelity(&sqrt, &restrict(&other.matrix, &self.support));
        }
        trace_norm_fidelity(&self.sqrt, &restrict(&other.matrix, &self.support))
    }
}

/// `‖√ρ0 √ρ1‖₁²`. The nuclear norm is read from singular values, which keeps
/// absolute accuracy at machine precision even where `√ρ0 ρ1 √ρ0` has
/// eigenvalues at the rounding floor.
fn trace_norm_fidelity(sqrt0: &CMatrix, rho1: &CMatrix) -> Result<f64> {
    let sqrt1 = psd_sqrt(rho1)?;
    let product = sqrt0 * sqrt1;
    let singular = product.singular_values();
    let nuclear: f64 = singular.iter().sum();
    Ok((nuclear * nuclear).clamp(0.0, 1.0))
}

/// Uhlmann fidelity `(Tr√(√ρ0 ρ1 √ρ0))²`.
pub fn fidelity(rho0: &DensityOperator, rho1: &DensityOperator) -> Result<f64> {
    if rho0.cutoff() != rho1.cutoff() {
        return Err(Error::CutoffMismatch { left: rho0.cutoff().dim(), right: rho1.cutoff().dim() });
    }
    let support = joint_support(&[&rho0.matrix, &rho1.matrix]);
    if support.is_empty() {
        return Ok(0.0);
    }
    FidelityReference::new(rho0, support)?.fidelity(rho1)
}

/// Matrix exponential by scaling and squaring of a Taylor series. Test oracle
/// for the closed-form matrix elements; not used on any production path.
pub fn expm_oracle(a: &DMatrix<f64>) -> DMatrix<f64> {
    let norm = a.iter().map(|x| x.abs()).fold(0.0, f64::max) * a.nrows() as f64;
    let mut squarings = 0;
    let mut scale = 1.0;
    while norm * scale > 0.5 {
        scale *= 0.5;
        squarings += 1;
    }
    let scaled = a * scale;
    let dim = a.nrows();
    let mut result = DMatrix::<f64>::identity(dim, dim);
    let mut term = DMatrix::<f64>::identity(dim, dim);
    for k in 1..=30 {
        term = &term * &scaled / k as f64;
        result += &term;
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// Annihilation operator on `0..dim`.
pub fn annihilation(dim: usize) -> DMatrix<f64> {
    DMatrix::from_fn(dim, dim, |i, j| if j == i + 1 { (j as f64).sqrt() } else { 0.0 })
}
