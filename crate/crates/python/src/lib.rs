//! Python module `bornlab`.
//!
//! Probability vectors cross the boundary as 8-element lists in the order
//! 0, A, B, C, AB, BC, CA, ABC; amplitudes as Python complex numbers.

use std::path::PathBuf;

use bornlab::cli::{self, Command};
use bornlab::config::{self, OutputFormat};
use bornlab::experiment::{self, EstimateOptions};
use bornlab::measure::{self, PathAmplitudes, PathSet, ProbabilityRule};
use bornlab::optics;
use bornlab::systematics::{self, RhoPoint};
use bornlab::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn err(e: bornlab::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn rule(name: &str, alpha: f64) -> PyResult<ProbabilityRule> {
    match name {
        "born" => Ok(ProbabilityRule::Born),
        "perturbed_cubic" => Ok(ProbabilityRule::PerturbedCubic { alpha }),
        other => Err(PyValueError::new_err(format!(
            "unknown rule {other:?} (expected \"born\" or \"perturbed_cubic\")"
        ))),
    }
}

fn vector(values: [f64; 8]) -> PyResult<measure::ProbabilityVector> {
    measure::ProbabilityVector::new(values).map_err(err)
}

#[pyclass(name = "SorkinResult", frozen)]
struct PySorkinResult(measure::SorkinResult);

#[pymethods]
impl PySorkinResult {
    #[getter]
    fn epsilon(&self) -> f64 {
        self.0.epsilon
    }
    #[getter]
    fn delta(&self) -> f64 {
        self.0.delta
    }
    /// None when δ fell below the guard.
    #[getter]
    fn rho(&self) -> Option<f64> {
        self.0.rho
    }
    #[getter]
    fn pair_terms(&self) -> (f64, f64, f64) {
        (self.0.i_ab, self.0.i_bc, self.0.i_ca)
    }
    #[getter]
    fn signs(&self) -> (i8, i8, i8) {
        (self.0.s_ab, self.0.s_bc, self.0.s_ca)
    }
    fn __repr__(&self) -> String {
        format!(
            "SorkinResult(epsilon={:e}, delta={:e}, rho={})",
            self.0.epsilon,
            self.0.delta,
            self.0.rho.map_or("None".into(), |r| format!("{r:e}"))
        )
    }
}

#[pyclass(name = "DetectorModel")]
struct PyDetectorModel(systematics::DetectorModel);

#[pymethods]
impl PyDetectorModel {
    #[new]
    #[pyo3(signature = (dead_time=0.0, nonlinearity_beta=0.0, full_scale_rate=80_000.0, dark_rate=0.0, dwell_time=37.5))]
    fn new(
        dead_time: f64,
        nonlinearity_beta: f64,
        full_scale_rate: f64,
        dark_rate: f64,
        dwell_time: f64,
    ) -> PyResult<Self> {
        let model = systematics::DetectorModel {
            dead_time,
            nonlinearity_beta,
            full_scale_rate,
            dark_rate,
            dwell_time,
        };
        model.validate().map_err(err)?;
        Ok(Self(model))
    }

    fn response(&self, true_rate: f64) -> f64 {
        self.0.response(true_rate)
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.0)
    }
}

/// Validated run configuration; build with `parse_config` or `RunConfig()`.
#[pyclass(name = "RunConfig")]
struct PyRunConfig(config::RunConfig);

#[pymethods]
impl PyRunConfig {
    #[new]
    fn new() -> Self {
        Self(config::RunConfig::default())
    }

    /// The configuration as key-value text that `parse_config` reads back.
    fn to_text(&self) -> String {
        self.0.to_text()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.0.seed
    }

    #[getter]
    fn grid(&self) -> Vec<f64> {
        self.0.grid()
    }

    fn __repr__(&self) -> String {
        format!("RunConfig(seed={}, points={})", self.0.seed, self.0.points)
    }
}

#[pyfunction]
fn parse_config(text: &str) -> PyResult<PyRunConfig> {
    config::parse_config(text).map(PyRunConfig).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (values, guard=measure::DEFAULT_GUARD))]
fn sorkin(values: [f64; 8], guard: f64) -> PyResult<PySorkinResult> {
    Ok(PySorkinResult(measure::sorkin(&vector(values)?, guard)))
}

#[pyfunction]
fn epsilon(values: [f64; 8]) -> PyResult<f64> {
    Ok(measure::epsilon(&vector(values)?))
}

/// Order-k interference term of the listed paths (indices into `amplitudes`).
#[pyfunction]
#[pyo3(signature = (amplitudes, paths, rule_name="born", alpha=0.0))]
fn interference_term(
    amplitudes: Vec<Complex64>,
    paths: Vec<usize>,
    rule_name: &str,
    alpha: f64,
) -> PyResult<f64> {
    let amps = PathAmplitudes::new(amplitudes).map_err(err)?;
    measure::interference_term(&rule(rule_name, alpha)?, &amps, &paths).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (amplitudes, paths, rule_name="born", alpha=0.0))]
fn rule_probability(
    amplitudes: Vec<Complex64>,
    paths: Vec<usize>,
    rule_name: &str,
    alpha: f64,
) -> PyResult<f64> {
    let amps = PathAmplitudes::new(amplitudes).map_err(err)?;
    let subset = PathSet::from_indices(paths).map_err(err)?;
    measure::rule_probability(&rule(rule_name, alpha)?, &amps, subset).map_err(err)
}

/// Eight probabilities for three path amplitudes plus a background.
#[pyfunction]
#[pyo3(signature = (amplitudes, rule_name="born", alpha=0.0, background=0.0))]
fn probability_vector(
    amplitudes: Vec<Complex64>,
    rule_name: &str,
    alpha: f64,
    background: f64,
) -> PyResult<[f64; 8]> {
    let amps = PathAmplitudes::new(amplitudes).map_err(err)?;
    measure::ProbabilityVector::from_amplitudes(&rule(rule_name, alpha)?, &amps, background)
        .map(|pv| pv.values())
        .map_err(err)
}

#[pyfunction]
#[pyo3(signature = (values, dp, guard=measure::DEFAULT_GUARD))]
fn power_sigma(values: [f64; 8], dp: f64, guard: f64) -> PyResult<Option<f64>> {
    let pv = vector(values)?;
    Ok(systematics::power_sigma(
        &pv,
        &measure::sorkin(&pv, guard),
        dp,
    ))
}

#[pyfunction]
#[pyo3(signature = (counts, guard=measure::DEFAULT_GUARD))]
fn poisson_sigma(counts: [f64; 8], guard: f64) -> PyResult<Option<f64>> {
    let pv = vector(counts)?;
    Ok(systematics::poisson_sigma(
        &pv,
        &measure::sorkin(&pv, guard),
    ))
}

#[pyfunction]
fn detector_response(model: &PyDetectorModel, true_rate: f64) -> f64 {
    systematics::detector_response(&model.0, true_rate)
}

/// Relative intensities of the eight combinations on the configured grid.
#[pyfunction]
fn patterns(cfg: &PyRunConfig) -> PyResult<(Vec<f64>, Vec<[f64; 8]>)> {
    let c = &cfg.0;
    let set = optics::pattern_set(&c.plate().map_err(err)?, &c.mask().map_err(err)?, &c.grid())
        .map_err(err)?;
    let reference = systematics::reference_intensity(&c.plate().map_err(err)?);
    let rel = set
        .intensities
        .iter()
        .map(|v| v.map(|i| i / reference))
        .collect();
    Ok((set.grid, rel))
}

type Curve = (Vec<f64>, Vec<Option<f64>>);
type Displacements = [f64; 8];

fn curve(points: &[RhoPoint]) -> Curve {
    points.iter().map(|p| (p.u, p.result.rho)).unzip()
}

/// ρ(u) of the configured optics with ideal power and detector.
#[pyfunction]
fn rho_curve(cfg: &PyRunConfig) -> PyResult<Curve> {
    let c = &cfg.0;
    let points = systematics::rho_curve(
        &c.plate().map_err(err)?,
        &c.mask().map_err(err)?,
        &c.grid(),
        c.guard,
    )
    .map_err(err)?;
    Ok(curve(&points))
}

/// ρ(u) from the configured detector model on ideal optics.
#[pyfunction]
fn detector_rho_sweep(cfg: &PyRunConfig) -> PyResult<Curve> {
    let c = &cfg.0;
    let plate = c.plate().map_err(err)?.with_leakage(0.0).map_err(err)?;
    let mask = optics::OpeningMask::for_plate(&plate, c.mask_scheme, c.mask_window_width, 0.0)
        .map_err(err)?;
    let points = systematics::detector_rho_sweep(
        &plate,
        &mask,
        &c.detector(),
        &c.scaling(),
        &c.grid(),
        c.guard,
    )
    .map_err(err)?;
    Ok(curve(&points))
}

/// Seeded ρ(u) with per-combination mask displacements; also returns the
/// eight sampled displacements.
#[pyfunction]
fn misalignment_rho_sweep(
    cfg: &PyRunConfig,
) -> PyResult<(Vec<f64>, Vec<Option<f64>>, Displacements)> {
    let c = &cfg.0;
    let sweep = systematics::misalignment_rho_sweep(
        &c.plate().map_err(err)?,
        &c.mask().map_err(err)?,
        &c.displacement_distribution(),
        &c.grid(),
        c.seed,
        c.guard,
    )
    .map_err(err)?;
    let (u, rho) = curve(&sweep.points);
    Ok((u, rho, sweep.displacements))
}

#[pyclass(name = "RhoSeries", frozen)]
struct PyRhoSeries(experiment::RhoSeries);

#[pymethods]
impl PyRhoSeries {
    #[getter]
    fn values(&self) -> Vec<Option<f64>> {
        self.0.values.clone()
    }
    #[getter]
    fn mean(&self) -> f64 {
        self.0.mean
    }
    #[getter]
    fn sample_std(&self) -> f64 {
        self.0.sample_std
    }
    #[getter]
    fn standard_error(&self) -> f64 {
        self.0.standard_error
    }
    #[getter]
    fn defined(&self) -> usize {
        self.0.defined
    }
    #[getter]
    fn undefined(&self) -> usize {
        self.0.undefined
    }
    fn __repr__(&self) -> String {
        format!(
            "RhoSeries(mean={:e}, standard_error={:e}, defined={})",
            self.0.mean, self.0.standard_error, self.0.defined
        )
    }
}

/// Virtual counting run followed by per-repetition ρ estimation.
#[pyfunction]
fn run_experiment(cfg: &PyRunConfig) -> PyResult<PyRhoSeries> {
    let c = &cfg.0;
    let records = experiment::run_experiment(
        &c.plate().map_err(err)?,
        &c.mask().map_err(err)?,
        &c.power_model(),
        &c.detector(),
        &c.experiment(),
    )
    .map_err(err)?;
    let opts = EstimateOptions {
        dead_time_correction: c.dead_time_correction.then_some(c.dead_time),
        ..EstimateOptions::with_guard(c.guard)
    };
    experiment::estimate_rho_series_with(&records, &opts)
        .map(PyRhoSeries)
        .map_err(err)
}

/// Runs a CLI command, writing into `output_dir`; returns the written paths.
#[pyfunction]
#[pyo3(signature = (command, cfg, output_dir=None, json=false))]
fn run_command(
    command: &str,
    cfg: &PyRunConfig,
    output_dir: Option<PathBuf>,
    json: bool,
) -> PyResult<Vec<PathBuf>> {
    let command: Command = command.parse().map_err(err)?;
    let mut c = cfg.0.clone();
    if let Some(dir) = output_dir {
        c.output_dir = dir;
    }
    if json {
        c.format = OutputFormat::Json;
    }
    cli::dispatch(command, &c).map(|o| o.files).map_err(err)
}

#[pymodule]
#[pyo3(name = "bornlab")]
fn bornlab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("DEFAULT_GUARD", measure::DEFAULT_GUARD)?;
    m.add_class::<PySorkinResult>()?;
    m.add_class::<PyDetectorModel>()?;
    m.add_class::<PyRunConfig>()?;
    m.add_class::<PyRhoSeries>()?;
    m.add_function(wrap_pyfunction!(parse_config, m)?)?;
    m.add_function(wrap_pyfunction!(sorkin, m)?)?;
    m.add_function(wrap_pyfunction!(epsilon, m)?)?;
    m.add_function(wrap_pyfunction!(interference_term, m)?)?;
    m.add_function(wrap_pyfunction!(rule_probability, m)?)?;
    m.add_function(wrap_pyfunction!(probability_vector, m)?)?;
    m.add_function(wrap_pyfunction!(power_sigma, m)?)?;
    m.add_function(wrap_pyfunction!(poisson_sigma, m)?)?;
    m.add_function(wrap_pyfunction!(detector_response, m)?)?;
    m.add_function(wrap_pyfunction!(patterns, m)?)?;
    m.add_function(wrap_pyfunction!(rho_curve, m)?)?;
    m.add_function(wrap_pyfunction!(detector_rho_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(misalignment_rho_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(run_command, m)?)?;
    Ok(())
}
