use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;

use gendermix::estimator::{self, CompositionParam, PartialMethod};
use gendermix::experiments::{self, SweepConfig};
use gendermix::reference::{self, canonical_key, IngestOptions, LetterPosition, YearRange};
use gendermix::simulator::{self, LabeledPopulation, PipelineMode, Sampling};
use gendermix::{Error, Method, PipelineRatio, TableMode};
use pyo3::create_exception;
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(
    gendermix,
    GendermixError,
    PyValueError,
    "Invalid input or contract violation."
);
create_exception!(
    gendermix,
    EstimationImpossible,
    GendermixError,
    "No usable names for an estimate."
);

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        e if e.is_estimation_impossible() => EstimationImpossible::new_err(e.to_string()),
        e => GendermixError::new_err(e.to_string()),
    }
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(to_py)
}

fn letter_position(s: &str) -> PyResult<LetterPosition> {
    match s {
        "initial" => Ok(LetterPosition::Initial),
        "last" => Ok(LetterPosition::Last),
        _ => Err(GendermixError::new_err(format!(
            "letter position must be `initial` or `last`, got `{s}`"
        ))),
    }
}

fn resolve_method(name: &str, cutoff: Option<f64>, gamma_star: Option<f64>) -> PyResult<Method> {
    let method = match (name, cutoff, gamma_star) {
        ("m1" | "method1", Some(cutoff), None) => Method::Method1 { cutoff },
        ("m2" | "method2", Some(cutoff), None) => Method::Method2 { cutoff },
        ("ggem", None, Some(gamma_star)) => Method::Ggem { gamma_star },
        (_, None, None) => parse(name)?,
        _ => {
            return Err(GendermixError::new_err(format!(
                "method `{name}` does not take the given cutoff or gamma_star"
            )))
        }
    };
    method.validate().map_err(to_py)?;
    Ok(method)
}

/// Per-name female and male counts keyed by normalized name or letter.
#[pyclass(frozen, from_py_object, module = "gendermix")]
#[derive(Clone)]
struct ReferenceTable(gendermix::ReferenceTable);

#[pymethods]
impl ReferenceTable {
    /// Build from a mapping of name to `(female, male)`; names are normalized.
    #[new]
    #[pyo3(signature = (counts, source_id = "python", mode = "full-name"))]
    fn new(counts: HashMap<String, (u64, u64)>, source_id: &str, mode: &str) -> PyResult<Self> {
        let mode: TableMode = parse(mode)?;
        let entries = counts.into_iter().filter_map(|(name, (f, m))| {
            let key = match mode {
                TableMode::FullName => canonical_key(&name, false)?,
                _ => name.trim().to_lowercase(),
            };
            Some((key, gendermix::GenderCounts::new(f, m)))
        });
        Ok(Self(gendermix::ReferenceTable::from_counts(
            entries, source_id, mode,
        )))
    }

    /// Read a `name,female,male` CSV and drop names below `min_count`.
    #[staticmethod]
    #[pyo3(signature = (path, min_count = 0, first_token = false))]
    fn from_csv(path: PathBuf, min_count: u64, first_token: bool) -> PyResult<Self> {
        let table = reference::ingest_canonical_csv(&path, IngestOptions { first_token })
            .map_err(to_py)?
            .value;
        Ok(Self(
            reference::filter_min_count(&table, min_count).map_err(to_py)?,
        ))
    }

    /// Aggregate a directory of `yobYYYY.txt` files, optionally over a year range.
    #[staticmethod]
    #[pyo3(signature = (directory, years = None, min_count = 0))]
    fn from_ssa(directory: PathBuf, years: Option<(u16, u16)>, min_count: u64) -> PyResult<Self> {
        let range = years.map(|(first, last)| YearRange { first, last });
        let table = reference::ingest_ssa_year_files(&directory, range, IngestOptions::default())
            .map_err(to_py)?
            .value;
        Ok(Self(
            reference::filter_min_count(&table, min_count).map_err(to_py)?,
        ))
    }

    /// Pool several tables of the same mode by summing counts.
    #[staticmethod]
    fn merge(tables: Vec<ReferenceTable>) -> PyResult<Self> {
        let tables: Vec<_> = tables.into_iter().map(|t| t.0).collect();
        Ok(Self(reference::merge(&tables).map_err(to_py)?))
    }

    fn filter_min_count(&self, threshold: u64) -> PyResult<Self> {
        Ok(Self(
            reference::filter_min_count(&self.0, threshold).map_err(to_py)?,
        ))
    }

    /// Reduce to `initial` or `last` letter buckets.
    fn to_letters(&self, position: &str) -> PyResult<Self> {
        let position = letter_position(position)?;
        Ok(Self(
            reference::letter_table(&self.0, position)
                .map_err(to_py)?
                .value,
        ))
    }

    fn write_csv(&self, path: PathBuf) -> PyResult<()> {
        reference::write_canonical_csv(&self.0, &path).map_err(to_py)
    }

    fn get(&self, name: &str) -> Option<(u64, u64)> {
        self.0.get(name).map(|c| (c.female, c.male))
    }

    fn p_female(&self, name: &str) -> Option<f64> {
        self.0.p_female(name)
    }

    fn names(&self) -> Vec<String> {
        self.0.entries().keys().cloned().collect()
    }

    fn entropy_bits(&self) -> f64 {
        reference::name_entropy(&self.0)
    }

    #[getter]
    fn source_id(&self) -> &str {
        self.0.source_id()
    }

    #[getter]
    fn mode(&self) -> String {
        self.0.mode().to_string()
    }

    #[getter]
    fn total_individuals(&self) -> u64 {
        self.0.total_individuals()
    }

    #[getter]
    fn female_individuals(&self) -> u64 {
        self.0.female_individuals()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __contains__(&self, name: &str) -> bool {
        self.0.contains(name)
    }

    fn __repr__(&self) -> String {
        format!(
            "ReferenceTable(source_id={:?}, mode={}, names={}, individuals={})",
            self.0.source_id(),
            self.0.mode(),
            self.0.len(),
            self.0.total_individuals()
        )
    }
}

/// Occurrence counts of names in the group being measured.
#[pyclass(frozen, from_py_object, module = "gendermix")]
#[derive(Clone)]
struct TargetList(gendermix::TargetList);

#[pymethods]
impl TargetList {
    /// Build from a mapping of name to count; names are normalized.
    #[new]
    #[pyo3(signature = (counts, first_token = false))]
    fn new(counts: HashMap<String, f64>, first_token: bool) -> PyResult<Self> {
        let entries = counts
            .into_iter()
            .filter_map(|(name, n)| Some((canonical_key(&name, first_token)?, n)));
        Ok(Self(
            gendermix::TargetList::from_weights(entries).map_err(to_py)?,
        ))
    }

    /// Count raw names, one occurrence each.
    #[staticmethod]
    #[pyo3(signature = (names, first_token = false))]
    fn from_names(names: Vec<String>, first_token: bool) -> PyResult<Self> {
        Ok(Self(
            gendermix::TargetList::from_names(names, first_token)
                .map_err(to_py)?
                .value,
        ))
    }

    /// Read a `name,count` CSV.
    #[staticmethod]
    #[pyo3(signature = (path, first_token = false))]
    fn from_csv(path: PathBuf, first_token: bool) -> PyResult<Self> {
        Ok(Self(
            reference::read_target_csv(&path, IngestOptions { first_token })
                .map_err(to_py)?
                .value,
        ))
    }

    fn to_letters(&self, position: &str) -> PyResult<Self> {
        let position = letter_position(position)?;
        Ok(Self(self.0.to_letters(position).map_err(to_py)?.value))
    }

    fn get(&self, name: &str) -> Option<f64> {
        self.0.get(name)
    }

    fn to_dict(&self) -> BTreeMap<String, f64> {
        self.0.iter().map(|(k, n)| (k.to_owned(), n)).collect()
    }

    #[getter]
    fn total_individuals(&self) -> f64 {
        self.0.total_individuals()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "TargetList(names={}, individuals={})",
            self.0.len(),
            self.0.total_individuals()
        )
    }
}

/// Result of one estimate: composition, attribution and coverage.
#[pyclass(frozen, module = "gendermix")]
struct EstimateReport(gendermix::EstimateReport);

#[pymethods]
impl EstimateReport {
    #[getter]
    fn method(&self) -> String {
        self.0.method.to_string()
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.0.beta()
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.0.gamma()
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.0.composition.alpha()
    }

    #[getter]
    fn clamped(&self) -> bool {
        self.0.clamped
    }

    #[getter]
    fn attributed_female(&self) -> f64 {
        self.0.attributed_female
    }

    #[getter]
    fn attributed_male(&self) -> f64 {
        self.0.attributed_male
    }

    /// `(low, high)` of the bootstrap interval, when one was requested.
    #[getter]
    fn interval(&self) -> Option<(f64, f64)> {
        self.0.bootstrap.map(|b| (b.low, b.high))
    }

    fn coverage<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let c = &self.0.coverage;
        let d = PyDict::new(py);
        d.set_item("individuals_total", c.individuals_total)?;
        d.set_item("individuals_matched", c.individuals_matched)?;
        d.set_item("individuals_used", c.individuals_used)?;
        d.set_item("unique_names_total", c.unique_names_total)?;
        d.set_item("unique_names_matched", c.unique_names_matched)?;
        Ok(d)
    }

    /// The report as JSON, numbers rounded to 12 significant digits.
    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.0).map_err(|e| to_py(e.into()))
    }

    fn __repr__(&self) -> String {
        format!(
            "EstimateReport(method={}, beta={}, gamma={})",
            self.0.method,
            self.0.beta(),
            self.0.gamma()
        )
    }
}

/// A synthetic population with known per-name gender counts.
#[pyclass(frozen, module = "gendermix")]
struct Population(LabeledPopulation);

#[pymethods]
impl Population {
    #[getter]
    fn beta_true(&self) -> f64 {
        self.0.beta_true()
    }

    #[getter]
    fn gamma_true(&self) -> f64 {
        self.0.gamma_true()
    }

    #[getter]
    fn total(&self) -> f64 {
        self.0.total()
    }

    /// Name to `(true_female, true_male)`.
    fn counts(&self) -> BTreeMap<String, (f64, f64)> {
        self.0
            .iter()
            .map(|(k, c)| (k.to_owned(), (c.female, c.male)))
            .collect()
    }

    /// Drop the labels, keeping name counts only.
    fn to_target(&self) -> PyResult<TargetList> {
        Ok(TargetList(self.0.to_target().map_err(to_py)?))
    }

    fn to_letters(&self, position: &str) -> PyResult<Self> {
        let position = letter_position(position)?;
        Ok(Self(self.0.to_letters(position).map_err(to_py)?.value))
    }

    fn export(&self, target_path: PathBuf, truth_path: PathBuf) -> PyResult<()> {
        self.0.export(&target_path, &truth_path).map_err(to_py)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Population(names={}, total={}, beta_true={})",
            self.0.len(),
            self.0.total(),
            self.0.beta_true()
        )
    }
}

/// Estimate the female fraction of `target` against `reference`.
///
/// `method` is `m0`, `m1`, `m2` or `ggem`, or a full spec such as `m2:0.9`.
/// A `bootstrap` of at least 100 adds a 95% percentile interval.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (target, reference, method = "ggem", cutoff = None, gamma_star = None, bootstrap = 0, seed = 0))]
fn estimate(
    py: Python<'_>,
    target: &TargetList,
    reference: &ReferenceTable,
    method: &str,
    cutoff: Option<f64>,
    gamma_star: Option<f64>,
    bootstrap: u32,
    seed: u64,
) -> PyResult<EstimateReport> {
    let method = resolve_method(method, cutoff, gamma_star)?;
    let (t, r) = (&target.0, &reference.0);
    py.detach(|| {
        let mut report = gendermix::estimate(t, r, method)?;
        if bootstrap > 0 {
            report.bootstrap = Some(estimator::bootstrap_interval(
                t, r, method, bootstrap, seed,
            )?);
        }
        Ok(report)
    })
    .map(EstimateReport)
    .map_err(to_py)
}

/// Solve the global estimator to tolerance `tol` on the imbalance.
#[pyfunction]
#[pyo3(signature = (target, reference, gamma_star = 0.0, tol = estimator::DEFAULT_TOLERANCE))]
fn solve_ggem(
    target: &TargetList,
    reference: &ReferenceTable,
    gamma_star: f64,
    tol: f64,
) -> PyResult<EstimateReport> {
    estimator::solve_ggem(&target.0, &reference.0, gamma_star, tol)
        .map(EstimateReport)
        .map_err(to_py)
}

/// Self-consistency residual of the global estimator at `gamma`.
#[pyfunction]
#[pyo3(signature = (gamma, target, reference, gamma_star = 0.0))]
fn ggem_residual(
    gamma: f64,
    target: &TargetList,
    reference: &ReferenceTable,
    gamma_star: f64,
) -> PyResult<f64> {
    estimator::residual(gamma, &target.0, &reference.0, gamma_star).map_err(to_py)
}

/// Female probability of a name after a pipeline with ratio `eta`.
#[pyfunction]
#[pyo3(signature = (p_female, eta, gamma_star = 0.0))]
fn transform_conditional(p_female: f64, eta: f64, gamma_star: f64) -> PyResult<f64> {
    let pipeline = PipelineRatio::new(eta, gamma_star).map_err(to_py)?;
    Ok(estimator::transform_conditional(p_female, &pipeline))
}

/// Convert between `beta`, `gamma` and `alpha`; returns all three.
#[pyfunction]
fn convert_composition(value: f64, param: &str) -> PyResult<(f64, f64, f64)> {
    let param: CompositionParam = parse(param)?;
    let c = estimator::convert_composition(value, param).map_err(to_py)?;
    Ok((c.beta(), c.gamma(), c.alpha()))
}

/// `(low, high, beta_partial, individuals)` of one inclination bin.
type PartialRow = (f64, f64, Option<f64>, f64);

/// Female fraction of each `|delta|` bin, weighted by `m0` or `ggem`.
#[pyfunction]
#[pyo3(signature = (target, reference, method = "m0", bin_edges = None))]
fn partial_contributions(
    target: &TargetList,
    reference: &ReferenceTable,
    method: &str,
    bin_edges: Option<Vec<f64>>,
) -> PyResult<Vec<PartialRow>> {
    let method: PartialMethod = match method {
        "m0" | "method0" => PartialMethod::Method0,
        "ggem" => PartialMethod::Ggem { gamma_star: 0.0 },
        _ => {
            return Err(GendermixError::new_err(format!(
                "unknown partial method `{method}`"
            )))
        }
    };
    let edges = bin_edges.unwrap_or_else(estimator::default_bin_edges);
    let bins =
        estimator::partial_contributions(&target.0, &reference.0, &edges, method).map_err(to_py)?;
    Ok(bins
        .into_iter()
        .map(|b| (b.low, b.high, b.beta_partial, b.individuals))
        .collect())
}

/// Draw a population of `size` with female share `beta0`.
#[pyfunction]
#[pyo3(signature = (reference, beta0, size, sampling = "natural", seed = 0))]
fn generate(
    reference: &ReferenceTable,
    beta0: f64,
    size: u64,
    sampling: &str,
    seed: u64,
) -> PyResult<Population> {
    let sampling: Sampling = parse(sampling)?;
    simulator::generate(&reference.0, beta0, size, sampling, seed)
        .map(Population)
        .map_err(to_py)
}

/// Pass a reference population through a pipeline with ratio `eta`.
#[pyfunction]
#[pyo3(signature = (reference, eta, mode = "expected", seed = 0))]
fn apply_pipeline(
    reference: &ReferenceTable,
    eta: f64,
    mode: &str,
    seed: u64,
) -> PyResult<Population> {
    let mode: PipelineMode = parse(mode)?;
    let pipeline = PipelineRatio::balanced(eta).map_err(to_py)?;
    simulator::apply_pipeline(&reference.0, &pipeline, mode, seed)
        .map(Population)
        .map_err(to_py)
}

/// Absolute error `beta - beta0`.
#[pyfunction]
fn abs_error(beta: f64, beta0: f64) -> f64 {
    experiments::abs_error(beta, beta0)
}

/// Error relative to the minority share, or `None` when it is zero.
#[pyfunction]
fn rel_error(beta: f64, beta0: f64) -> Option<f64> {
    experiments::rel_error(beta, beta0)
}

/// Run a seeded Monte Carlo sweep and return one dict per (beta0, method).
///
/// `tables` maps ids to reference tables; `build` generates populations and
/// `analyze` estimates them.
#[pyfunction]
#[pyo3(signature = (
    tables, build, analyze, methods, beta0_grid = None, repeats = 1000,
    population_size = 10_000, sampling = "natural", seed = 0, mode = "full-name"
))]
#[allow(clippy::too_many_arguments)]
fn run_sweep<'py>(
    py: Python<'py>,
    tables: HashMap<String, ReferenceTable>,
    build: String,
    analyze: String,
    methods: Vec<String>,
    beta0_grid: Option<Vec<f64>>,
    repeats: u32,
    population_size: u64,
    sampling: &str,
    seed: u64,
    mode: &str,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let config = SweepConfig {
        reference_build: build,
        reference_analyze: analyze,
        methods: methods.iter().map(|m| parse(m)).collect::<PyResult<_>>()?,
        beta0_grid: beta0_grid.unwrap_or_else(simulator::default_beta0_grid),
        repeats,
        population_size,
        sampling: parse(sampling)?,
        seed,
        mode: parse(mode)?,
    };
    let tables: BTreeMap<String, gendermix::ReferenceTable> =
        tables.into_iter().map(|(k, t)| (k, t.0)).collect();
    let report = py
        .detach(|| experiments::run_sweep(&config, &tables))
        .map_err(to_py)?;
    report
        .cells
        .iter()
        .map(|c| {
            let d = PyDict::new(py);
            d.set_item("beta0", c.beta0)?;
            d.set_item("method", c.method.to_string())?;
            d.set_item("mean_beta", c.mean_beta)?;
            d.set_item("sigma_beta", c.sigma_beta)?;
            d.set_item("abs_error", c.abs_error)?;
            d.set_item("rel_error_pct", c.rel_error_pct)?;
            d.set_item("names_matched_frac", c.names_matched_frac)?;
            d.set_item("individuals_matched_frac", c.individuals_matched_frac)?;
            d.set_item("female_matched_frac", c.female_matched_frac)?;
            d.set_item("male_matched_frac", c.male_matched_frac)?;
            d.set_item("repeats", c.repeats)?;
            d.set_item("failures", c.failures)?;
            Ok(d)
        })
        .collect()
}

#[pymodule(name = "gendermix")]
fn gendermix_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("GendermixError", m.py().get_type::<GendermixError>())?;
    m.add(
        "EstimationImpossible",
        m.py().get_type::<EstimationImpossible>(),
    )?;
    m.add_class::<ReferenceTable>()?;
    m.add_class::<TargetList>()?;
    m.add_class::<EstimateReport>()?;
    m.add_class::<Population>()?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    m.add_function(wrap_pyfunction!(solve_ggem, m)?)?;
    m.add_function(wrap_pyfunction!(ggem_residual, m)?)?;
    m.add_function(wrap_pyfunction!(transform_conditional, m)?)?;
    m.add_function(wrap_pyfunction!(convert_composition, m)?)?;
    m.add_function(wrap_pyfunction!(partial_contributions, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(apply_pipeline, m)?)?;
    m.add_function(wrap_pyfunction!(abs_error, m)?)?;
    m.add_function(wrap_pyfunction!(rel_error, m)?)?;
    m.add_function(wrap_pyfunction!(run_sweep, m)?)?;
    Ok(())
}
