//! Scenario files, figure presets and CSV output for the command-line runner.
//!
//! A scenario is a flat `key = value` file. Grid axes take comma-separated
//! lists (`N_c = 0.1, 1.0, 2.0`); every other key takes a single value.

use std::fmt::Write as _;

use indexmap::IndexMap;
use rayon::prelude::*;

use crate::channels::{displacement_distribution, output_distribution, ChannelKind, ChannelParams, ProbeState};
use crate::error::{Error, Result};
use crate::fisher::{
    fi_displacement_exact, fi_squeezing_exact, fisher_matrix_lossy, linearized_sensitivity, multiparam_bounds,
    photon_moments, pipeline_fi, Moment,
};
use crate::gaussian::{equivalent_energy, qfi_gaussian_with, squeezing_db, GaussianFamilyKind, GaussianProbe, PhaseReference};
use crate::hilbert::FockCutoff;
use crate::mle::{fluctuation_study, monte_carlo_error, monte_carlo_joint, Estimator, FluctuationMode, McScenario, Prior};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    FisherScan,
    MleSim,
    LossSim,
    GaussianCompare,
    Multiparam,
    Fluctuation,
    Moments,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 7] = [
        ScenarioKind::FisherScan,
        ScenarioKind::MleSim,
        ScenarioKind::LossSim,
        ScenarioKind::GaussianCompare,
        ScenarioKind::Multiparam,
        ScenarioKind::Fluctuation,
        ScenarioKind::Moments,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::FisherScan => "fisher-scan",
            ScenarioKind::MleSim => "mle-sim",
            ScenarioKind::LossSim => "loss-sim",
            ScenarioKind::GaussianCompare => "gaussian-compare",
            ScenarioKind::Multiparam => "multiparam",
            ScenarioKind::Fluctuation => "fluctuation",
            ScenarioKind::Moments => "moments",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

/// A fully specified run. List-valued fields are grid axes.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub kind: ScenarioKind,
    pub channel: Vec<ChannelKind>,
    pub m: Vec<usize>,
    pub n_c: Vec<f64>,
    pub n_s: Vec<f64>,
    pub eta: Vec<f64>,
    pub probes: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub prior_lo: Option<f64>,
    pub prior_hi: Option<f64>,
    /// Standard deviations of the strength fluctuation.
    pub sigma: Vec<f64>,
    pub cutoff_override: Option<usize>,
    pub estimator: Estimator,
    /// Switches `gaussian-compare` to the energy-equivalence search.
    pub family: Option<GaussianFamilyKind>,
    pub fluctuation: Vec<FluctuationMode>,
    pub phase_reference: PhaseReference,
}

impl Scenario {
    pub fn new(name: &str, kind: ScenarioKind) -> Self {
        Scenario {
            name: name.to_string(),
            kind,
            channel: vec![ChannelKind::Displacement],
            m: vec![3],
            n_c: vec![1.0],
            n_s: vec![0.1],
            eta: vec![1.0],
            probes: vec![500],
            trials: 3000,
            seed: 42,
            prior_lo: None,
            prior_hi: None,
            sigma: vec![0.0],
            cutoff_override: None,
            estimator: Estimator::Mle,
            family: None,
            fluctuation: vec![FluctuationMode::PerProbe],
            phase_reference: PhaseReference::Randomized,
        }
    }

    /// Strength values for a single-channel run.
    fn strengths(&self, kind: ChannelKind) -> &[f64] {
        match kind {
            ChannelKind::Displacement => &self.n_c,
            ChannelKind::Squeezing => &self.n_s,
        }
    }

    fn prior(&self) -> Result<Option<Prior>> {
        match (self.prior_lo, self.prior_hi) {
            (None, None) => Ok(None),
            (Some(lo), Some(hi)) => Prior::new(lo, hi).map(Some),
            _ => Err(Error::invalid("prior_lo", "prior_lo and prior_hi must be given together")),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let nonempty = |name: &str, len: usize| {
            if len == 0 {
                Err(Error::invalid(name, "needs at least one value"))
            } else {
                Ok(())
            }
        };
        nonempty("channel", self.channel.len())?;
        nonempty("m", self.m.len())?;
        nonempty("N_c", self.n_c.len())?;
        nonempty("N_s", self.n_s.len())?;
        nonempty("eta", self.eta.len())?;
        nonempty("M", self.probes.len())?;
        nonempty("sigma", self.sigma.len())?;
        for (name, values) in [("N_c", &self.n_c), ("N_s", &self.n_s)] {
            if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
                return Err(Error::invalid(name, format!("must be finite and ≥ 0, got {v}")));
            }
        }
        if let Some(v) = self.eta.iter().find(|v| !(**v > 0.0 && **v <= 1.0)) {
            return Err(Error::invalid("eta", format!("must lie in (0, 1], got {v}")));
        }
        if self.probes.contains(&0) {
            return Err(Error::invalid("M", "must be at least 1"));
        }
        if let Some(v) = self.sigma.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::invalid("sigma", format!("must be finite and ≥ 0, got {v}")));
        }
        if let Some(c) = self.cutoff_override {
            FockCutoff::new(c)?;
        }
        self.prior()?;
        let simulates = matches!(self.kind, ScenarioKind::MleSim | ScenarioKind::LossSim | ScenarioKind::Fluctuation);
        if simulates && self.trials < 2 {
            return Err(Error::invalid("trials", "need at least 2"));
        }
        let single = !matches!(self.kind, ScenarioKind::Multiparam | ScenarioKind::Moments);
        if single {
            for &kind in &self.channel {
                if let Some(v) = self.strengths(kind).iter().find(|v| **v <= 0.0) {
                    return Err(Error::invalid(kind.strength_name(), format!("estimated strength must be positive, got {v}")));
                }
            }
        }
        if self.kind == ScenarioKind::Moments && self.n_c.iter().any(|v| *v <= 0.0) {
            return Err(Error::invalid("N_c", "must be positive"));
        }
        Ok(())
    }

    /// `key = value` lines that reproduce this scenario.
    pub fn echo(&self) -> IndexMap<&'static str, String> {
        fn list<T: ToString>(v: &[T]) -> String {
            v.iter().map(T::to_string).collect::<Vec<_>>().join(", ")
        }
        let mut map = IndexMap::new();
        map.insert("name", self.name.clone());
        map.insert("kind", self.kind.name().to_string());
        map.insert("channel", self.channel.iter().map(|c| c.name()).collect::<Vec<_>>().join(", "));
        map.insert("m", list(&self.m));
        map.insert("N_c", list(&self.n_c));
        map.insert("N_s", list(&self.n_s));
        map.insert("eta", list(&self.eta));
        map.insert("M", list(&self.probes));
        map.insert("trials", self.trials.to_string());
        map.insert("seed", self.seed.to_string());
        if let (Some(lo), Some(hi)) = (self.prior_lo, self.prior_hi) {
            map.insert("prior_lo", lo.to_string());
            map.insert("prior_hi", hi.to_string());
        }
        map.insert("sigma", list(&self.sigma));
        if let Some(c) = self.cutoff_override {
            map.insert("cutoff_override", c.to_string());
        }
        map.insert("estimator", estimator_name(self.estimator).to_string());
        if let Some(f) = self.family {
            map.insert("family", family_name(f).to_string());
        }
        map.insert("fluctuation", self.fluctuation.iter().map(|f| fluctuation_name(*f)).collect::<Vec<_>>().join(", "));
        map.insert("phase_reference", phase_name(self.phase_reference).to_string());
        map
    }
}

fn estimator_name(e: Estimator) -> &'static str {
    match e {
        Estimator::Mle => "mle",
        Estimator::Weak => "weak",
    }
}

fn family_name(f: GaussianFamilyKind) -> &'static str {
    match f {
        GaussianFamilyKind::Coherent => "coherent",
        GaussianFamilyKind::Squeezed => "squeezed",
    }
}

fn fluctuation_name(f: FluctuationMode) -> &'static str {
    match f {
        FluctuationMode::PerProbe => "per-probe",
        FluctuationMode::PerEnsemble => "per-ensemble",
    }
}

fn phase_name(p: PhaseReference) -> &'static str {
    match p {
        PhaseReference::Randomized => "randomized",
        PhaseReference::Stable => "stable",
    }
}

const KEYS: [&str; 18] = [
    "name",
    "kind",
    "channel",
    "m",
    "N_c",
    "N_s",
    "eta",
    "M",
    "trials",
    "seed",
    "prior_lo",
    "prior_hi",
    "sigma",
    "cutoff_override",
    "estimator",
    "family",
    "fluctuation",
    "phase_reference",
];

fn parse_error(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn parse_list<T>(line: usize, key: &str, value: &str, parse: impl Fn(&str) -> Option<T>) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .map(|item| parse(item).ok_or_else(|| parse_error(line, format!("key `{key}`: cannot parse `{item}`"))))
        .collect()
}

fn parse_one<T>(line: usize, key: &str, value: &str, parse: impl Fn(&str) -> Option<T>) -> Result<T> {
    parse(value.trim()).ok_or_else(|| parse_error(line, format!("key `{key}`: cannot parse `{}`", value.trim())))
}

fn parse_usize(key: &'static str) -> impl Fn(&str) -> Option<Result<usize>> {
    move |s: &str| {
        let v: i64 = s.parse().ok()?;
        Some(usize::try_from(v).map_err(|_| Error::invalid(key, format!("must be a nonnegative integer, got {v}"))))
    }
}

fn parse_f64(s: &str) -> Option<f64> {
    s.parse().ok()
}

/// Parse a scenario file. Unknown keys, repeated keys and malformed values
/// are errors carrying the line number; `kind` is required.
pub fn parse_config(text: &str) -> Result<Scenario> {
    let mut entries: IndexMap<String, (usize, String)> = IndexMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| parse_error(line, format!("expected `key = value`, got `{content}`")))?;
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(parse_error(line, format!("unknown key `{key}`")));
        }
        if entries.contains_key(key) {
            return Err(parse_error(line, format!("key `{key}` given twice")));
        }
        entries.insert(key.to_string(), (line, value.trim().to_string()));
    }
    let (kind_line, kind_value) = entries.get("kind").ok_or_else(|| parse_error(0, "`kind` is required"))?;
    let kind = ScenarioKind::parse(kind_value).ok_or_else(|| {
        let names: Vec<_> = ScenarioKind::ALL.iter().map(|k| k.name()).collect();
        parse_error(*kind_line, format!("unknown kind `{kind_value}`; expected one of {}", names.join(", ")))
    })?;
    let mut sc = Scenario::new("config", kind);
    for (key, (line, value)) in &entries {
        let line = *line;
        let key = key.as_str();
        match key {
            "kind" => {}
            "name" => sc.name = value.clone(),
            "channel" => sc.channel = parse_list(line, key, value, |s| s.parse().ok())?,
            "m" => sc.m = parse_list(line, key, value, parse_usize("m"))?.into_iter().collect::<Result<_>>()?,
            "N_c" => sc.n_c = parse_list(line, key, value, parse_f64)?,
            "N_s" => sc.n_s = parse_list(line, key, value, parse_f64)?,
            "eta" => sc.eta = parse_list(line, key, value, parse_f64)?,
            "M" => sc.probes = parse_list(line, key, value, parse_usize("M"))?.into_iter().collect::<Result<_>>()?,
            "trials" => sc.trials = parse_one(line, key, value, parse_usize("trials"))??,
            "seed" => sc.seed = parse_one(line, key, value, |s| s.parse().ok())?,
            "prior_lo" => sc.prior_lo = Some(parse_one(line, key, value, parse_f64)?),
            "prior_hi" => sc.prior_hi = Some(parse_one(line, key, value, parse_f64)?),
            "sigma" => sc.sigma = parse_list(line, key, value, parse_f64)?,
            "cutoff_override" => sc.cutoff_override = Some(parse_one(line, key, value, parse_usize("cutoff_override"))??),
            "estimator" => {
                sc.estimator = parse_one(line, key, value, |s| match s {
                    "mle" => Some(Estimator::Mle),
                    "weak" => Some(Estimator::Weak),
                    _ => None,
                })?
            }
            "family" => {
                sc.family = Some(parse_one(line, key, value, |s| match s {
                    "coherent" => Some(GaussianFamilyKind::Coherent),
                    "squeezed" => Some(GaussianFamilyKind::Squeezed),
                    _ => None,
                })?)
            }
            "fluctuation" => sc.fluctuation = parse_list(line, key, value, |s| s.parse().ok())?,
            "phase_reference" => sc.phase_reference = parse_one(line, key, value, |s| s.parse().ok())?,
            _ => unreachable!("checked against KEYS"),
        }
    }
    sc.validate()?;
    Ok(sc)
}

/// Names accepted by `preset`.
pub const PRESETS: [&str; 14] = [
    "fig1a", "fig1b", "fig2", "fig3a", "fig3b", "fig4a", "fig4b", "fig5a", "fig5b", "fig6a", "fig6b", "fig7a", "fig7b",
    "flucC",
];

const COPIES_AXIS: [usize; 7] = [50, 100, 200, 500, 1000, 2000, 5000];
const LOSS_AXIS: [f64; 6] = [1.0, 0.9, 0.8, 0.7, 0.6, 0.5];

/// The scenario grid behind a figure.
pub fn preset(name: &str) -> Result<Scenario> {
    use ScenarioKind::*;
    let mut sc = match name {
        "fig1a" => Scenario { probes: COPIES_AXIS.to_vec(), n_c: vec![0.1, 1.0, 2.0], ..Scenario::new(name, MleSim) },
        "fig1b" => Scenario {
            m: (0..=4).collect(),
            n_c: vec![0.1, 0.25, 0.5, 1.0, 1.5, 2.0],
            ..Scenario::new(name, MleSim)
        },
        "fig2" => Scenario {
            m: (1..=8).collect(),
            n_c: vec![0.1, 0.3, 0.5, 1.0, 2.0],
            ..Scenario::new(name, GaussianCompare)
        },
        "fig3a" => Scenario { probes: COPIES_AXIS.to_vec(), eta: vec![1.0, 0.9, 0.7], ..Scenario::new(name, LossSim) },
        "fig3b" => Scenario { eta: LOSS_AXIS.to_vec(), n_c: vec![0.1, 1.0, 2.0], ..Scenario::new(name, LossSim) },
        "fig4a" => Scenario {
            channel: vec![ChannelKind::Squeezing],
            probes: COPIES_AXIS.to_vec(),
            n_s: vec![0.1, 0.3, 0.5],
            ..Scenario::new(name, MleSim)
        },
        "fig4b" => Scenario {
            channel: vec![ChannelKind::Squeezing],
            m: (0..=4).collect(),
            n_s: vec![0.05, 0.1, 0.2, 0.3, 0.4, 0.5],
            ..Scenario::new(name, MleSim)
        },
        "fig5a" | "fig5b" => Scenario {
            channel: vec![ChannelKind::Squeezing],
            m: (1..=4).collect(),
            n_s: vec![0.1, 0.3, 0.5],
            family: Some(if name == "fig5a" { GaussianFamilyKind::Squeezed } else { GaussianFamilyKind::Coherent }),
            ..Scenario::new(name, GaussianCompare)
        },
        "fig6a" => Scenario {
            channel: vec![ChannelKind::Squeezing],
            n_s: vec![0.25],
            probes: COPIES_AXIS.to_vec(),
            eta: vec![1.0, 0.9, 0.7],
            trials: 1000,
            ..Scenario::new(name, LossSim)
        },
        "fig6b" => Scenario {
            channel: vec![ChannelKind::Squeezing],
            n_s: vec![0.25],
            eta: LOSS_AXIS.to_vec(),
            trials: 1000,
            ..Scenario::new(name, LossSim)
        },
        "fig7a" | "fig7b" => {
            let n = if name == "fig7a" { 0.01 } else { 0.05 };
            Scenario { m: (0..=5).collect(), n_c: vec![n], n_s: vec![n], trials: 0, ..Scenario::new(name, Multiparam) }
        }
        "flucC" => Scenario {
            channel: vec![ChannelKind::Displacement, ChannelKind::Squeezing],
            n_c: vec![1.0],
            n_s: vec![0.1],
            sigma: vec![0.0, 0.003, 0.01, 0.03, 0.1, 0.3],
            trials: 1000,
            fluctuation: vec![FluctuationMode::PerProbe, FluctuationMode::PerEnsemble],
            ..Scenario::new(name, Fluctuation)
        },
        other => {
            return Err(Error::invalid("preset", format!("unknown preset `{other}`; available: {}", PRESETS.join(", "))))
        }
    };
    sc.name = name.to_string();
    Ok(sc)
}

/// One CSV cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Value {
    fn render(&self) -> String {
        match self {
            Value::Int(v) => v.to_string(),
            Value::Float(v) => format!("{v:.8e}"),
            Value::Text(v) => v.clone(),
        }
    }
}

impl From<usize> for Value {
    fn from(v: usize) -> Self {
        Value::Int(v as i64)
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Float(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Text(v.to_string())
    }
}

/// Column names, rows in grid order and a metadata block.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
    pub metadata: IndexMap<String, String>,
}

impl ResultTable {
    fn new(columns: &[&str]) -> Self {
        ResultTable { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new(), metadata: IndexMap::new() }
    }

    /// `#`-prefixed metadata, a header line, then one line per row.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.metadata {
            let _ = writeln!(out, "# {k}: {v}");
        }
        let _ = writeln!(out, "{}", self.columns.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Value::render).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }
}

/// Seed of the `index`-th grid cell.
fn cell_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_add(index as u64)
}

fn single_params(kind: ChannelKind, strength: f64, eta: f64) -> Result<ChannelParams> {
    ChannelParams::single(kind, strength)?.with_eta(eta)
}

fn mc_scenario(sc: &Scenario, kind: ChannelKind, m: usize, params: ChannelParams, probes: usize, index: usize) -> Result<McScenario> {
    let mut mc = McScenario::new(kind, m, params, probes, sc.trials, cell_seed(sc.seed, index));
    mc.prior = sc.prior()?;
    mc.estimator = sc.estimator;
    Ok(mc)
}

/// Execute a scenario. Rows follow the grid order regardless of how the
/// cells are scheduled.
pub fn run(sc: &Scenario) -> Result<ResultTable> {
    sc.validate()?;
    let mut table = match sc.kind {
        ScenarioKind::FisherScan => run_fisher_scan(sc)?,
        ScenarioKind::MleSim => run_mle_sim(sc)?,
        ScenarioKind::LossSim => run_loss_sim(sc)?,
        ScenarioKind::GaussianCompare => match sc.family {
            None => run_gaussian_compare(sc)?,
            Some(family) => run_energy_equivalence(sc, family)?,
        },
        ScenarioKind::Multiparam => run_multiparam(sc)?,
        ScenarioKind::Fluctuation => run_fluctuation(sc)?,
        ScenarioKind::Moments => run_moments(sc)?,
    };
    let mut metadata = IndexMap::new();
    metadata.insert("tool".to_string(), format!("fock-metrology {}", env!("CARGO_PKG_VERSION")));
    for (k, v) in sc.echo() {
        metadata.insert(format!("scenario.{k}"), v);
    }
    metadata.insert(
        "truncation".to_string(),
        format!("auto cutoff until loss <= {:.0e}; fixed cutoffs rejected above {:.0e}", crate::channels::AUTO_CUTOFF_TARGET, crate::channels::FIXED_CUTOFF_LIMIT),
    );
    metadata.extend(table.metadata.drain(..));
    table.metadata = metadata;
    Ok(table)
}

fn collect_rows<T, F>(cells: Vec<T>, f: F) -> Result<Vec<Vec<Value>>>
where
    T: Send + Sync,
    F: Fn(usize, &T) -> Result<Vec<Value>> + Send + Sync,
{
    cells.par_iter().enumerate().map(|(i, c)| f(i, c)).collect()
}

fn run_fisher_scan(sc: &Scenario) -> Result<ResultTable> {
    let mut table = ResultTable::new(&["channel", "m", "eta", "strength", "fi", "fi_exact", "cr_bound"]);
    let cutoff = sc.cutoff_override.map(FockCutoff::new).transpose()?;
    let probes = sc.probes[0];
    let mut cells = Vec::new();
    for &kind in &sc.channel {
        for &m in &sc.m {
            for &eta in &sc.eta {
                for &s in sc.strengths(kind) {
                    cells.push((kind, m, eta, s));
                }
            }
        }
    }
    let mut max_loss: f64 = 0.0;
    table.rows = collect_rows(cells.clone(), |_, &(kind, m, eta, s)| {
        let params = single_params(kind, s, eta)?;
        let fi = match cutoff {
            None => pipeline_fi(&ProbeState::Fock(m), &params, kind)?,
            Some(c) => crate::fisher::classical_fi(
                |x| output_distribution(&ProbeState::Fock(m), &params.with_strength(kind, x), Some(c)),
                s,
                crate::fisher::default_step(s),
            )?,
        };
        let exact = if eta == 1.0 {
            match kind {
                ChannelKind::Displacement => fi_displacement_exact(m, s)?,
                ChannelKind::Squeezing => fi_squeezing_exact(m, s)?,
            }
        } else {
            f64::NAN
        };
        Ok(vec![kind.name().into(), m.into(), eta.into(), s.into(), fi.into(), exact.into(), (1.0 / (probes as f64 * fi)).into()])
    })?;
    for &(kind, m, eta, s) in &cells {
        let dist = output_distribution(&ProbeState::Fock(m), &single_params(kind, s, eta)?, cutoff)?;
        max_loss = max_loss.max(dist.truncation_loss());
    }
    table.metadata.insert("max_truncation_loss".into(), format!("{max_loss:.3e}"));
    table.metadata.insert("cr_bound_M".into(), probes.to_string());
    Ok(table)
}

fn run_mle_sim(sc: &Scenario) -> Result<ResultTable> {
    let mut table = ResultTable::new(&["M", "strength", "mse", "stderr_bar", "cr_bound", "channel", "m", "bias", "boundary_hits", "failures"]);
    let mut index = 0;
    for &kind in &sc.channel {
        for &m in &sc.m {
            for &s in sc.strengths(kind) {
                for &probes in &sc.probes {
                    let params = single_params(kind, s, sc.eta[0])?;
                    let mc = mc_scenario(sc, kind, m, params, probes, index)?;
                    index += 1;
                    let stats = monte_carlo_error(&mc)?;
                    table.rows.push(vec![
                        probes.into(),
                        s.into(),
                        stats.mse.into(),
                        stats.stderr_bar.into(),
                        mc.cr_bound()?.into(),
                        kind.name().into(),
                        m.into(),
                        stats.bias.into(),
                        stats.boundary_hits.into(),
                        stats.failures.into(),
                    ]);
                }
            }
        }
    }
    table.columns[1] = strength_column(sc);
    Ok(table)
}

fn strength_column(sc: &Scenario) -> String {
    if sc.channel.len() == 1 {
        sc.channel[0].strength_name().to_string()
    } else {
        "strength".to_string()
    }
}

/// Lossless QFI of the Gaussian probes with `m` photons, as `1/(M·H)`.
fn gaussian_bounds(sc: &Scenario, kind: ChannelKind, m: usize, s: f64, probes: usize) -> Result<(f64, f64)> {
    let coherent = qfi_gaussian_with(&GaussianProbe::coherent(m as f64)?, kind, s, sc.phase_reference)?;
    let squeezed = qfi_gaussian_with(&GaussianProbe::squeezed(m as f64)?, kind, s, sc.phase_reference)?;
    let p = probes as f64;
    Ok((1.0 / (p * coherent), 1.0 / (p * squeezed)))
}

fn run_loss_sim(sc: &Scenario) -> Result<ResultTable> {
    let mut table = ResultTable::new(&[
        "M", "eta", "strength", "mse", "stderr_bar", "cr_bound", "lossless_bound", "coherent_bound", "squeezed_bound", "channel", "m",
        "bias", "boundary_hits", "failures",
    ]);
    let mut index = 0;
    for &kind in &sc.channel {
        for &m in &sc.m {
            for &s in sc.strengths(kind) {
                let lossless = pipeline_fi(&ProbeState::Fock(m), &ChannelParams::single(kind, s)?, kind)?;
                let unit = gaussian_bounds(sc, kind, m, s, 1)?;
                for &eta in &sc.eta {
                    for &probes in &sc.probes {
                        let params = single_params(kind, s, eta)?;
                        let mc = mc_scenario(sc, kind, m, params, probes, index)?;
                        index += 1;
                        let stats = monte_carlo_error(&mc)?;
                        let p = probes as f64;
                        table.rows.push(vec![
                            probes.into(),
                            eta.into(),
                            s.into(),
                            stats.mse.into(),
                            stats.stderr_bar.into(),
                            mc.cr_bound()?.into(),
                            (1.0 / (p * lossless)).into(),
                            (unit.0 / p).into(),
                            (unit.1 / p).into(),
                            kind.name().into(),
                            m.into(),
                            stats.bias.into(),
                            stats.boundary_hits.into(),
                            stats.failures.into(),
                        ]);
                    }
                }
            }
        }
    }
    table.columns[2] = strength_column(sc);
    Ok(table)
}

fn run_gaussian_compare(sc: &Scenario) -> Result<ResultTable> {
    let mut table = ResultTable::new(&["channel", "m", "strength", "fock_fi", "squeezed_qfi", "coherent_qfi", "vacuum_qfi", "squeezing_db"]);
    let mut cells = Vec::new();
    for &kind in &sc.channel {
        for &s in sc.strengths(kind) {
            for &m in &sc.m {
                cells.push((kind, s, m));
            }
        }
    }
    table.rows = collect_rows(cells, |_, &(kind, s, m)| {
        let params = single_params(kind, s, sc.eta[0])?;
        let fock = pipeline_fi(&ProbeState::Fock(m), &params, kind)?;
        let q = |probe: GaussianProbe| qfi_gaussian_with(&probe, kind, s, sc.phase_reference);
        Ok(vec![
            kind.name().into(),
            m.into(),
            s.into(),
            fock.into(),
            q(GaussianProbe::squeezed(m as f64)?)?.into(),
            q(GaussianProbe::coherent(m as f64)?)?.into(),
            q(GaussianProbe::new(0.0, 0.0)?)?.into(),
            squeezing_db(m as f64).into(),
        ])
    })?;
    Ok(table)
}

fn run_energy_equivalence(sc: &Scenario, family: GaussianFamilyKind) -> Result<ResultTable> {
    let mut table = ResultTable::new(&["channel", "m", "strength", "fock_fi", "family", "equivalent_mean_photon"]);
    let mut cells = Vec::new();
    for &kind in &sc.channel {
        for &s in sc.strengths(kind) {
            for &m in &sc.m {
                cells.push((kind, s, m));
            }
        }
    }
    if sc.phase_reference != PhaseReference::Randomized {
        return Err(Error::invalid("phase_reference", "the energy search uses the randomized channel phase"));
    }
    table.rows = collect_rows(cells, |_, &(kind, s, m)| {
        let fock = pipeline_fi(&ProbeState::Fock(m), &single_params(kind, s, sc.eta[0])?, kind)?;
        let n = equivalent_energy(fock, family, kind, s)?;
        Ok(vec![kind.name().into(), m.into(), s.into(), fock.into(), family_name(family).into(), n.into()])
    })?;
    Ok(table)
}

fn run_multiparam(sc: &Scenario) -> Result<ResultTable> {
    let mut columns = vec![
        "m", "bound_Nc", "bound_Ns", "single_param_bound_Nc", "single_param_bound_Ns", "offdiag_ratio", "N_c", "N_s", "eta", "M",
    ];
    let simulate = sc.trials >= 2;
    if simulate {
        columns.extend(["mse_Nc", "stderr_bar_Nc", "mse_Ns", "stderr_bar_Ns"]);
    }
    let mut table = ResultTable::new(&columns);
    let mut index = 0;
    for &n_c in &sc.n_c {
        for &n_s in &sc.n_s {
            for &eta in &sc.eta {
                for &m in &sc.m {
                    let params = ChannelParams::new(n_c, n_s, eta)?;
                    let probes = sc.probes[0];
                    let h = fisher_matrix_lossy(m, &params, None)?;
                    let (bc, bs) = multiparam_bounds(&h, probes)?;
                    let p = probes as f64;
                    let mut row: Vec<Value> = vec![
                        m.into(),
                        bc.into(),
                        bs.into(),
                        (1.0 / (p * fi_displacement_exact(m, n_c)?)).into(),
                        (1.0 / (p * fi_squeezing_exact(m, n_s)?)).into(),
                        h.offdiag_ratio().into(),
                        n_c.into(),
                        n_s.into(),
                        eta.into(),
                        probes.into(),
                    ];
                    if simulate {
                        let priors = match sc.prior()? {
                            Some(p) => Some((p, p)),
                            None => None,
                        };
                        let joint = monte_carlo_joint(m, params, probes, sc.trials, cell_seed(sc.seed, index), priors)?;
                        row.extend([
                            joint.n_c.mse.into(),
                            joint.n_c.stderr_bar.into(),
                            joint.n_s.mse.into(),
                            joint.n_s.stderr_bar.into(),
                        ]);
                    }
                    index += 1;
                    table.rows.push(row);
                }
            }
        }
    }
    Ok(table)
}

fn run_fluctuation(sc: &Scenario) -> Result<ResultTable> {
    let mut table = ResultTable::new(&["channel", "mode", "sigma", "sigma2", "mse", "stderr_bar", "cr_bound", "excess"]);
    let mut index = 0;
    for &kind in &sc.channel {
        for &mode in &sc.fluctuation {
            for &m in &sc.m {
                for &s in sc.strengths(kind) {
                    for &sigma in &sc.sigma {
                        let params = single_params(kind, s, sc.eta[0])?;
                        let mc = mc_scenario(sc, kind, m, params, sc.probes[0], index)?;
                        index += 1;
                        let res = fluctuation_study(sigma, &mc, mode)?;
                        table.rows.push(vec![
                            kind.name().into(),
                            fluctuation_name(mode).into(),
                            sigma.into(),
                            (sigma * sigma).into(),
                            res.stats.mse.into(),
                            res.stats.stderr_bar.into(),
                            res.cr_bound.into(),
                            res.excess.into(),
                        ]);
                    }
                }
            }
        }
    }
    Ok(table)
}

fn run_moments(sc: &Scenario) -> Result<ResultTable> {
    let mut table = ResultTable::new(&[
        "m",
        "N_c",
        "mean",
        "variance",
        "printed_variance",
        "second_moment_variance",
        "sensitivity_first",
        "sensitivity_second",
        "sensitivity_second_numeric",
    ]);
    let cutoff = sc.cutoff_override.map(FockCutoff::new).transpose()?;
    let mut max_loss: f64 = 0.0;
    for &m in &sc.m {
        for &n_c in &sc.n_c {
            let dist = displacement_distribution(m, n_c, cutoff)?;
            max_loss = max_loss.max(dist.truncation_loss());
            let mom = photon_moments(&dist);
            // Slope of ⟨n²⟩ by central difference on a shared basis.
            let h = crate::fisher::default_step(n_c);
            let c = Some(displacement_distribution(m, n_c + h, cutoff)?.cutoff());
            let up = photon_moments(&displacement_distribution(m, n_c + h, c)?).second;
            let down = photon_moments(&displacement_distribution(m, n_c - h, c)?).second;
            let slope = (up - down) / (2.0 * h);
            table.rows.push(vec![
                m.into(),
                n_c.into(),
                mom.mean.into(),
                mom.variance.into(),
                (2.0 * n_c * (m as f64 + 1.0)).into(),
                mom.second_moment_variance.into(),
                linearized_sensitivity(m, n_c, Moment::First)?.into(),
                linearized_sensitivity(m, n_c, Moment::Second)?.into(),
                (mom.second_moment_variance / (slope * slope)).into(),
            ]);
        }
    }
    table.metadata.insert("max_truncation_loss".into(), format!("{max_loss:.3e}"));
    Ok(table)
}
