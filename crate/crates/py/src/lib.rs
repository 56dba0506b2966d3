use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use fock_metrology::channels::{self, ChannelKind, ChannelParams, ProbeState};
use fock_metrology::cli::{self, Value};
use fock_metrology::fisher;
use fock_metrology::gaussian::{self, GaussianFamilyKind, PhaseReference};
use fock_metrology::hilbert::FockCutoff;
use fock_metrology::mle::{self, Estimator, FluctuationMode, McScenario, Prior, SingleModel};

fn err(e: fock_metrology::Error) -> PyErr {
    if e.is_numerical() {
        PyRuntimeError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn parse<T: std::str::FromStr<Err = fock_metrology::Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(err)
}

fn family(name: &str) -> PyResult<GaussianFamilyKind> {
    match name {
        "coherent" => Ok(GaussianFamilyKind::Coherent),
        "squeezed" => Ok(GaussianFamilyKind::Squeezed),
        other => Err(PyValueError::new_err(format!("unknown family `{other}`; expected coherent or squeezed"))),
    }
}

fn cutoff(dim: Option<usize>) -> PyResult<Option<FockCutoff>> {
    dim.map(FockCutoff::new).transpose().map_err(err)
}

/// `D(β)S(ζ)|0⟩` with real, nonnegative β and ζ.
#[pyclass(name = "GaussianProbe", frozen)]
struct PyGaussianProbe {
    inner: gaussian::GaussianProbe,
}

#[pymethods]
impl PyGaussianProbe {
    #[new]
    fn new(beta: f64, zeta: f64) -> PyResult<Self> {
        Ok(Self { inner: gaussian::GaussianProbe::new(beta, zeta).map_err(err)? })
    }

    #[staticmethod]
    fn coherent(mean_photon: f64) -> PyResult<Self> {
        Ok(Self { inner: gaussian::GaussianProbe::coherent(mean_photon).map_err(err)? })
    }

    #[staticmethod]
    fn squeezed(mean_photon: f64) -> PyResult<Self> {
        Ok(Self { inner: gaussian::GaussianProbe::squeezed(mean_photon).map_err(err)? })
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.inner.beta
    }

    #[getter]
    fn zeta(&self) -> f64 {
        self.inner.zeta
    }

    #[getter]
    fn mean_photon(&self) -> f64 {
        self.inner.mean_photon()
    }

    /// Quantum Fisher information of the channel output.
    #[pyo3(signature = (kind, strength, phase_reference = "randomized"))]
    fn qfi(&self, kind: &str, strength: f64, phase_reference: &str) -> PyResult<f64> {
        let reference: PhaseReference = parse(phase_reference)?;
        gaussian::qfi_gaussian_with(&self.inner, parse(kind)?, strength, reference).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("GaussianProbe(beta={}, zeta={})", self.inner.beta, self.inner.zeta)
    }
}

#[pyclass(name = "FisherMatrix", frozen)]
struct PyFisherMatrix {
    inner: fisher::FisherMatrix,
}

#[pymethods]
impl PyFisherMatrix {
    #[getter]
    fn h_cc(&self) -> f64 {
        self.inner.h_cc
    }

    #[getter]
    fn h_ss(&self) -> f64 {
        self.inner.h_ss
    }

    #[getter]
    fn h_cs(&self) -> f64 {
        self.inner.h_cs
    }

    fn offdiag_ratio(&self) -> f64 {
        self.inner.offdiag_ratio()
    }

    /// Lower bounds on the variances of N_c and N_s from `probes` copies.
    fn bounds(&self, probes: usize) -> PyResult<(f64, f64)> {
        fisher::multiparam_bounds(&self.inner, probes).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("FisherMatrix(h_cc={}, h_ss={}, h_cs={})", self.inner.h_cc, self.inner.h_ss, self.inner.h_cs)
    }
}

#[pyclass(name = "ErrorStats", frozen, get_all)]
struct PyErrorStats {
    mse: f64,
    bias: f64,
    stderr_bar: f64,
    trials: usize,
    failures: usize,
    boundary_hits: usize,
    cr_bound: f64,
}

#[pymethods]
impl PyErrorStats {
    fn z_score(&self) -> f64 {
        (self.mse - self.cr_bound) / (self.stderr_bar / 2.0)
    }

    fn __repr__(&self) -> String {
        format!("ErrorStats(mse={:.4e}, cr_bound={:.4e}, trials={})", self.mse, self.cr_bound, self.trials)
    }
}

/// Photon-number distribution after a single channel acting on `|m⟩`.
#[pyfunction]
#[pyo3(signature = (kind, m, strength, eta = 1.0, cutoff_dim = None))]
fn output_distribution(kind: &str, m: usize, strength: f64, eta: f64, cutoff_dim: Option<usize>) -> PyResult<Vec<f64>> {
    let kind: ChannelKind = parse(kind)?;
    let params = ChannelParams::single(kind, strength).and_then(|p| p.with_eta(eta)).map_err(err)?;
    let dist = channels::output_distribution(&ProbeState::Fock(m), &params, cutoff(cutoff_dim)?).map_err(err)?;
    Ok(dist.probs().to_vec())
}

/// Both channels (squeezing then displacement), with loss first.
#[pyfunction]
#[pyo3(signature = (m, n_c, n_s, eta = 1.0, cutoff_dim = None))]
fn combined_distribution(m: usize, n_c: f64, n_s: f64, eta: f64, cutoff_dim: Option<usize>) -> PyResult<Vec<f64>> {
    let params = ChannelParams::new(n_c, n_s, eta).map_err(err)?;
    let dist = channels::combined_distribution(m, &params, cutoff(cutoff_dim)?).map_err(err)?;
    Ok(dist.probs().to_vec())
}

/// Closed-form Fock-probe Fisher information.
#[pyfunction]
fn fisher_exact(kind: &str, m: usize, strength: f64) -> PyResult<f64> {
    match parse(kind)? {
        ChannelKind::Displacement => fisher::fi_displacement_exact(m, strength),
        ChannelKind::Squeezing => fisher::fi_squeezing_exact(m, strength),
    }
    .map_err(err)
}

/// Classical Fisher information of the counted output, by finite differences.
#[pyfunction]
#[pyo3(signature = (kind, m, strength, eta = 1.0))]
fn fisher_numeric(kind: &str, m: usize, strength: f64, eta: f64) -> PyResult<f64> {
    let kind: ChannelKind = parse(kind)?;
    let params = ChannelParams::single(kind, strength).and_then(|p| p.with_eta(eta)).map_err(err)?;
    fisher::pipeline_fi(&ProbeState::Fock(m), &params, kind).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (m, n_c, n_s, eta = 1.0))]
fn fisher_matrix(m: usize, n_c: f64, n_s: f64, eta: f64) -> PyResult<PyFisherMatrix> {
    let params = ChannelParams::new(n_c, n_s, eta).map_err(err)?;
    Ok(PyFisherMatrix { inner: fisher::fisher_matrix_lossy(m, &params, None).map_err(err)? })
}

/// Best same-energy Gaussian probe and its QFI.
#[pyfunction]
#[pyo3(signature = (mean_photon, kind, strength, points = 41))]
fn best_gaussian_at_energy(mean_photon: f64, kind: &str, strength: f64, points: usize) -> PyResult<(PyGaussianProbe, f64)> {
    let (probe, qfi) = gaussian::best_gaussian_at_energy(mean_photon, parse(kind)?, strength, points).map_err(err)?;
    Ok((PyGaussianProbe { inner: probe }, qfi))
}

/// Mean photon number a Gaussian family needs to reach `target` QFI.
#[pyfunction]
fn equivalent_energy(target: f64, family_name: &str, kind: &str, strength: f64) -> PyResult<f64> {
    gaussian::equivalent_energy(target, family(family_name)?, parse(kind)?, strength).map_err(err)
}

/// Multinomial counts for `probes` copies, reproducible from `seed`.
#[pyfunction]
fn sample_counts(probs: Vec<f64>, probes: usize, seed: u64) -> PyResult<Vec<u64>> {
    let dist = fock_metrology::hilbert::PhotonDistribution::new(probs).map_err(err)?;
    mle::sample_counts(&dist, probes, seed).map_err(err)
}

/// Maximum-likelihood strength from photon counts. Returns
/// `(value, at_boundary)`.
#[pyfunction]
#[pyo3(signature = (counts, kind, m, lo, hi, eta = 1.0))]
fn mle_single(counts: Vec<u64>, kind: &str, m: usize, lo: f64, hi: f64, eta: f64) -> PyResult<(f64, bool)> {
    let model = SingleModel::new(parse(kind)?, m, eta).map_err(err)?;
    let est = mle::mle_single(&counts, &model, Prior::new(lo, hi).map_err(err)?).map_err(err)?;
    Ok((est.value, est.at_boundary))
}

/// Closed-form weak-limit estimates `(N_c, N_s)`.
#[pyfunction]
fn mle_weak(counts: Vec<u64>, m: usize) -> (f64, f64) {
    mle::mle_weak(&counts, m)
}

/// Joint maximum-likelihood `(N_c, N_s)` with both channels present.
#[pyfunction]
#[pyo3(signature = (counts, m, prior_c, prior_s, eta = 1.0))]
fn mle_joint(counts: Vec<u64>, m: usize, prior_c: (f64, f64), prior_s: (f64, f64), eta: f64) -> PyResult<(f64, f64)> {
    let pc = Prior::new(prior_c.0, prior_c.1).map_err(err)?;
    let ps = Prior::new(prior_s.0, prior_s.1).map_err(err)?;
    let est = mle::mle_joint(&counts, m, eta, pc, ps).map_err(err)?;
    Ok((est.n_c, est.n_s))
}

fn scenario(kind: &str, m: usize, strength: f64, probes: usize, trials: usize, seed: u64, eta: f64) -> PyResult<McScenario> {
    let kind: ChannelKind = parse(kind)?;
    let params = ChannelParams::single(kind, strength).and_then(|p| p.with_eta(eta)).map_err(err)?;
    Ok(McScenario::new(kind, m, params, probes, trials, seed))
}

fn stats(s: mle::ErrorStats, cr_bound: f64) -> PyErrorStats {
    PyErrorStats {
        mse: s.mse,
        bias: s.bias,
        stderr_bar: s.stderr_bar,
        trials: s.trials,
        failures: s.failures,
        boundary_hits: s.boundary_hits,
        cr_bound,
    }
}

/// Monte Carlo estimation error against the Cramér-Rao bound.
#[pyfunction]
#[pyo3(signature = (kind, m, strength, probes, trials, seed, eta = 1.0, estimator = "mle"))]
#[allow(clippy::too_many_arguments)]
fn monte_carlo_error(
    kind: &str,
    m: usize,
    strength: f64,
    probes: usize,
    trials: usize,
    seed: u64,
    eta: f64,
    estimator: &str,
) -> PyResult<PyErrorStats> {
    let mut sc = scenario(kind, m, strength, probes, trials, seed, eta)?;
    sc.estimator = match estimator {
        "mle" => Estimator::Mle,
        "weak" => Estimator::Weak,
        other => return Err(PyValueError::new_err(format!("unknown estimator `{other}`; expected mle or weak"))),
    };
    let bound = sc.cr_bound().map_err(err)?;
    let s = py_detach(|| mle::monte_carlo_error(&sc))?;
    Ok(stats(s, bound))
}

/// Monte Carlo error when the strength fluctuates with standard deviation
/// `sigma`. Returns `(stats, excess)`.
#[pyfunction]
#[pyo3(signature = (kind, m, mean, sigma, probes, trials, seed, mode = "per-probe"))]
#[allow(clippy::too_many_arguments)]
fn fluctuation_study(
    kind: &str,
    m: usize,
    mean: f64,
    sigma: f64,
    probes: usize,
    trials: usize,
    seed: u64,
    mode: &str,
) -> PyResult<(PyErrorStats, f64)> {
    let sc = scenario(kind, m, mean, probes, trials, seed, 1.0)?;
    let mode: FluctuationMode = parse(mode)?;
    let res = py_detach(|| mle::fluctuation_study(sigma, &sc, mode))?;
    Ok((stats(res.stats, res.cr_bound), res.excess))
}

fn py_detach<T: Send>(f: impl FnOnce() -> fock_metrology::Result<T> + Send) -> PyResult<T> {
    Python::attach(|py| py.detach(f)).map_err(err)
}

/// Run a named figure preset and return `(columns, rows, metadata)`.
#[pyfunction]
#[pyo3(signature = (name, seed = None, trials = None))]
fn run_preset(
    py: Python<'_>,
    name: &str,
    seed: Option<u64>,
    trials: Option<usize>,
) -> PyResult<(Vec<String>, Vec<Vec<Py<PyAny>>>, Vec<(String, String)>)> {
    let mut sc = cli::preset(name).map_err(err)?;
    if let Some(seed) = seed {
        sc.seed = seed;
    }
    if let Some(trials) = trials {
        sc.trials = trials;
    }
    sc.validate().map_err(err)?;
    let table = py.detach(|| cli::run(&sc)).map_err(err)?;
    let rows = table
        .rows
        .into_iter()
        .map(|row| {
            row.into_iter()
                .map(|v| {
                    Ok(match v {
                        Value::Int(i) => i.into_pyobject(py)?.into_any().unbind(),
                        Value::Float(x) => x.into_pyobject(py)?.into_any().unbind(),
                        Value::Text(s) => s.into_pyobject(py)?.into_any().unbind(),
                    })
                })
                .collect::<PyResult<Vec<_>>>()
        })
        .collect::<PyResult<Vec<_>>>()?;
    Ok((table.columns, rows, table.metadata.into_iter().collect()))
}

#[pymodule]
fn fock_metrology_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGaussianProbe>()?;
    m.add_class::<PyFisherMatrix>()?;
    m.add_class::<PyErrorStats>()?;
    m.add_function(wrap_pyfunction!(output_distribution, m)?)?;
    m.add_function(wrap_pyfunction!(combined_distribution, m)?)?;
    m.add_function(wrap_pyfunction!(fisher_exact, m)?)?;
    m.add_function(wrap_pyfunction!(fisher_numeric, m)?)?;
    m.add_function(wrap_pyfunction!(fisher_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(best_gaussian_at_energy, m)?)?;
    m.add_function(wrap_pyfunction!(equivalent_energy, m)?)?;
    m.add_function(wrap_pyfunction!(sample_counts, m)?)?;
    m.add_function(wrap_pyfunction!(mle_single, m)?)?;
    m.add_function(wrap_pyfunction!(mle_weak, m)?)?;
    m.add_function(wrap_pyfunction!(mle_joint, m)?)?;
    m.add_function(wrap_pyfunction!(monte_carlo_error, m)?)?;
    m.add_function(wrap_pyfunction!(fluctuation_study, m)?)?;
    m.add_function(wrap_pyfunction!(run_preset, m)?)?;
    Ok(())
}
