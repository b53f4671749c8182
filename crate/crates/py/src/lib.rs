//! Python bindings for the opmeter toolkit.
//!
//! The module mirrors the Rust pipeline: a [`Trace`] bundles a signal
//! catalog with per-cycle toggle rows (and optional power labels), a
//! [`Design`] generates synthetic fixtures, [`Model::train`] selects sparse
//! proxies and fits weights, and [`QuantizedModel`] rounds a model to B-bit
//! integers and simulates the fixed-point meter exactly as the hardware
//! description specifies.

use std::io::BufReader;
use std::path::Path;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBool, PyDict, PyList};

use opmeter_core::error::Error as CoreError;
use opmeter_core::solver::Penalty;
use opmeter_core::syngen::{self, DesignConfig, WorkloadProfile};
use opmeter_core::trace::vcd::{parse_vcd, VcdOptions};
use opmeter_core::trace::{ptrc, PowerTrace, SignalCatalog, ToggleMatrix};
use opmeter_core::{metrics, model, opm};

fn to_py_err(e: CoreError) -> PyErr {
    match &e {
        CoreError::Param(_) | CoreError::Data(_) | CoreError::Parse { .. } | CoreError::Format(_) => {
            PyValueError::new_err(e.to_string())
        }
        CoreError::Io(_) => PyIOError::new_err(e.to_string()),
        CoreError::Internal(_) => PyRuntimeError::new_err(e.to_string()),
    }
}

trait IntoPyResult<T> {
    fn pyify(self) -> PyResult<T>;
}

impl<T> IntoPyResult<T> for Result<T, CoreError> {
    fn pyify(self) -> PyResult<T> {
        self.map_err(to_py_err)
    }
}

fn json_to_py(py: Python<'_>, value: &serde_json::Value) -> PyResult<Py<PyAny>> {
    use serde_json::Value;
    Ok(match value {
        Value::Null => py.None(),
        Value::Bool(b) => PyBool::new(py, *b).to_owned().into_any().unbind(),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                i.into_pyobject(py)?.into_any().unbind()
            } else if let Some(u) = n.as_u64() {
                u.into_pyobject(py)?.into_any().unbind()
            } else {
                n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any().unbind()
            }
        }
        Value::String(s) => s.into_pyobject(py)?.into_any().unbind(),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(json_to_py(py, item)?)?;
            }
            list.into_any().unbind()
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (key, val) in map {
                dict.set_item(key, json_to_py(py, val)?)?;
            }
            dict.into_any().unbind()
        }
    })
}

fn report_to_py<T: serde::Serialize>(py: Python<'_>, report: &T) -> PyResult<Py<PyAny>> {
    let value = serde_json::to_value(report)
        .map_err(|e| PyRuntimeError::new_err(format!("report serialization failed: {e}")))?;
    json_to_py(py, &value)
}

fn parse_penalty(name: &str) -> PyResult<Penalty> {
    match name.to_ascii_lowercase().as_str() {
        "mcp" => Ok(Penalty::Mcp),
        "lasso" | "l1" => Ok(Penalty::Lasso),
        other => Err(PyValueError::new_err(format!(
            "unknown penalty {other:?}; expected \"mcp\" or \"lasso\""
        ))),
    }
}

fn parse_profile(name: &str) -> PyResult<WorkloadProfile> {
    match name.to_ascii_lowercase().as_str() {
        "uniform" => Ok(WorkloadProfile::Uniform),
        "diverse" => Ok(WorkloadProfile::Diverse),
        other => Err(PyValueError::new_err(format!(
            "unknown workload profile {other:?}; expected \"uniform\" or \"diverse\""
        ))),
    }
}

/// A signal catalog plus one toggle bit per signal per cycle, with optional
/// per-cycle power labels. The on-disk form is the packed trace container.
#[pyclass(module = "opmeter", skip_from_py_object)]
#[derive(Clone)]
struct Trace {
    catalog: SignalCatalog,
    toggles: ToggleMatrix,
    power: Option<PowerTrace>,
}

#[pymethods]
impl Trace {
    /// Load a packed trace file.
    #[staticmethod]
    fn read(path: &str) -> PyResult<Trace> {
        let (catalog, toggles, power) = ptrc::read_ptrc_file(Path::new(path)).pyify()?;
        Ok(Trace { catalog, toggles, power })
    }

    /// Ingest a value-change-dump waveform, sampling on rising clock edges.
    #[staticmethod]
    #[pyo3(signature = (path, clock, period=None))]
    fn read_vcd(path: &str, clock: &str, period: Option<u64>) -> PyResult<Trace> {
        let file = std::fs::File::open(path).map_err(|e| to_py_err(e.into()))?;
        let mut opts = VcdOptions::new(clock);
        opts.period = period;
        let (catalog, toggles) = parse_vcd(BufReader::new(file), &opts).pyify()?;
        Ok(Trace { catalog, toggles, power: None })
    }

    /// Write the packed trace file (labels included when present).
    fn write(&self, path: &str) -> PyResult<()> {
        ptrc::write_ptrc_file(Path::new(path), &self.catalog, &self.toggles, self.power.as_ref())
            .pyify()
    }

    #[getter]
    fn n_cycles(&self) -> usize {
        self.toggles.n_cycles()
    }

    #[getter]
    fn n_signals(&self) -> usize {
        self.toggles.n_signals()
    }

    #[getter]
    fn signal_names(&self) -> Vec<String> {
        self.catalog.names()
    }

    /// Per-cycle power labels, or None for an unlabeled trace.
    #[getter]
    fn power(&self) -> Option<Vec<f64>> {
        self.power.as_ref().map(|p| p.values().to_vec())
    }

    /// Attach per-cycle power labels (one value per cycle).
    fn set_power(&mut self, values: Vec<f64>) -> PyResult<()> {
        let trace = PowerTrace::new(values).pyify()?;
        if trace.len() != self.toggles.n_cycles() {
            return Err(PyValueError::new_err(format!(
                "{} labels for {} cycles",
                trace.len(),
                self.toggles.n_cycles()
            )));
        }
        self.power = Some(trace);
        Ok(())
    }

    /// Cycle indices at which one signal toggles.
    fn toggle_positions(&self, signal: usize) -> PyResult<Vec<u32>> {
        if signal >= self.toggles.n_signals() {
            return Err(PyValueError::new_err(format!(
                "signal {signal} out of range (trace has {})",
                self.toggles.n_signals()
            )));
        }
        Ok(self.toggles.column_positions(signal))
    }

    /// A new trace restricted to the given signal columns, in the given order.
    fn select(&self, indices: Vec<usize>) -> PyResult<Trace> {
        let toggles = self.toggles.select_columns(&indices).pyify()?;
        let specs = indices
            .iter()
            .map(|&j| self.catalog.get(j).cloned().expect("select_columns checked bounds"))
            .collect();
        let catalog = SignalCatalog::new(specs).pyify()?;
        Ok(Trace { catalog, toggles, power: self.power.clone() })
    }

    fn __repr__(&self) -> String {
        format!(
            "Trace({} cycles, {} signals, {})",
            self.toggles.n_cycles(),
            self.toggles.n_signals(),
            if self.power.is_some() { "labeled" } else { "unlabeled" }
        )
    }
}

/// A synthetic design: clustered toggle behavior and a sparse ground-truth
/// power law, for generating workload traces and labels.
#[pyclass(module = "opmeter")]
struct Design {
    inner: syngen::Design,
}

#[pymethods]
impl Design {
    #[new]
    fn new(
        n_signals: usize,
        n_contributors: usize,
        n_clusters: usize,
        rho: f64,
        seed: u64,
    ) -> PyResult<Design> {
        let config = DesignConfig { n_signals, n_contributors, n_clusters, rho, seed };
        Ok(Design { inner: syngen::gen_design(&config).pyify()? })
    }

    /// The standard benchmark: 2000 signals, 50 contributors, 100 clusters.
    #[staticmethod]
    fn benchmark(seed: u64) -> PyResult<Design> {
        Ok(Design { inner: syngen::gen_design(&DesignConfig::benchmark(seed)).pyify()? })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Design> {
        let bytes = std::fs::read(path).map_err(|e| to_py_err(e.into()))?;
        let inner: syngen::Design = serde_json::from_slice(&bytes)
            .map_err(|e| PyValueError::new_err(format!("bad design document: {e}")))?;
        Ok(Design { inner })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        let mut bytes = serde_json::to_vec_pretty(&self.inner)
            .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        bytes.push(b'\n');
        std::fs::write(path, bytes).map_err(|e| to_py_err(e.into()))
    }

    /// Indices of the signals that truly carry power weight, ascending.
    #[getter]
    fn support(&self) -> Vec<usize> {
        self.inner.support.clone()
    }

    /// Ground-truth weight per contributor, aligned with `support`.
    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.inner.weights.clone()
    }

    #[getter]
    fn n_signals(&self) -> usize {
        self.inner.config.n_signals
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.config.seed
    }

    /// Generate an unlabeled workload trace.
    #[pyo3(signature = (n_cycles, seed, profile="uniform"))]
    fn workload(&self, n_cycles: usize, seed: u64, profile: &str) -> PyResult<Trace> {
        let profile = parse_profile(profile)?;
        let toggles = syngen::gen_workload(&self.inner, n_cycles, &profile, seed).pyify()?;
        Ok(Trace { catalog: self.inner.catalog.clone(), toggles, power: None })
    }

    /// Per-cycle power labels for a trace, with Gaussian noise whose sigma
    /// is `noise_frac` times the expected mean power.
    fn power_labels(&self, trace: &Trace, noise_frac: f64, seed: u64) -> PyResult<Vec<f64>> {
        let labels =
            syngen::gen_power_labels(&self.inner, &trace.toggles, noise_frac, seed).pyify()?;
        Ok(labels.values().to_vec())
    }

    fn __repr__(&self) -> String {
        format!(
            "Design({} signals, {} contributors, {} clusters, seed {})",
            self.inner.config.n_signals,
            self.inner.config.n_contributors,
            self.inner.config.n_clusters,
            self.inner.config.seed
        )
    }
}

/// A trained sparse linear power model over proxy signals.
#[pyclass(module = "opmeter", skip_from_py_object)]
#[derive(Clone)]
struct Model {
    inner: model::PowerModel,
}

#[pymethods]
impl Model {
    /// Select proxies and fit weights on a labeled trace. Returns
    /// `(model, info)` where `info` holds the selection and screening
    /// reports as plain dicts.
    #[staticmethod]
    #[pyo3(signature = (
        trace, target_q, *, penalty="mcp", gamma=10.0, tau=1, slack=None,
        validation_frac=0.2, ridge_ratio=0.01, max_iter=200, tol=1e-6,
        max_probes=32, lambda_min_ratio=1e-6,
    ))]
    #[allow(clippy::too_many_arguments)]
    fn train(
        py: Python<'_>,
        trace: &Trace,
        target_q: usize,
        penalty: &str,
        gamma: f64,
        tau: usize,
        slack: Option<usize>,
        validation_frac: f64,
        ridge_ratio: f64,
        max_iter: usize,
        tol: f64,
        max_probes: usize,
        lambda_min_ratio: f64,
    ) -> PyResult<(Model, Py<PyAny>)> {
        let labels = trace
            .power
            .as_ref()
            .ok_or_else(|| PyValueError::new_err("training needs a labeled trace"))?;
        let mut opts = model::TrainOptions::new(target_q);
        opts.penalty = parse_penalty(penalty)?;
        opts.gamma = gamma;
        opts.tau = tau;
        if let Some(s) = slack {
            opts.slack = s;
        }
        opts.validation_frac = validation_frac;
        opts.ridge_ratio = ridge_ratio;
        opts.max_iter = max_iter;
        opts.tol = tol;
        opts.max_probes = max_probes;
        opts.lambda_min_ratio = lambda_min_ratio;
        let trained = model::train(&trace.catalog, &trace.toggles, labels, &opts).pyify()?;
        let info = PyDict::new(py);
        info.set_item("selection", report_to_py(py, &trained.selection)?)?;
        info.set_item("screen", report_to_py(py, &trained.screen)?)?;
        Ok((Model { inner: trained.model }, info.into_any().unbind()))
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Model> {
        Ok(Model { inner: model::load_model(Path::new(path)).pyify()? })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        model::save_model(Path::new(path), &self.inner).pyify()
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Model> {
        Ok(Model { inner: model::model_from_json(text).pyify()? })
    }

    fn to_json(&self) -> PyResult<String> {
        model::model_to_json(&self.inner).pyify()
    }

    /// Catalog indices of the selected proxy signals, ascending.
    #[getter]
    fn proxy_indices(&self) -> Vec<usize> {
        self.inner.proxy_indices.clone()
    }

    #[getter]
    fn proxy_names(&self) -> Vec<String> {
        self.inner.proxy_names.clone()
    }

    /// Relaxed (refitted) weight per proxy.
    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.inner.weights.clone()
    }

    /// Interval length the weights were fitted on (1 = per-cycle).
    #[getter]
    fn tau(&self) -> usize {
        self.inner.flavor.tau()
    }

    /// Training provenance (penalty, strengths, screening) as a dict.
    #[getter]
    fn meta(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        report_to_py(py, &self.inner.meta)
    }

    /// Predicted power for every cycle of a trace.
    fn predict(&self, trace: &Trace) -> PyResult<Vec<f64>> {
        let pred = model::predict_per_cycle(&self.inner, &trace.toggles).pyify()?;
        Ok(pred.values().to_vec())
    }

    /// Mean predicted power per T-cycle window (T a power of two).
    fn predict_window(&self, trace: &Trace, window: usize) -> PyResult<Vec<f64>> {
        let pred = model::predict_window(&self.inner, &trace.toggles, window).pyify()?;
        Ok(pred.values)
    }

    /// Accuracy report against the trace's labels, as a dict; per-window
    /// metrics are added for each requested window size.
    #[pyo3(signature = (trace, windows=vec![]))]
    fn evaluate(&self, py: Python<'_>, trace: &Trace, windows: Vec<usize>) -> PyResult<Py<PyAny>> {
        let labels = trace
            .power
            .as_ref()
            .ok_or_else(|| PyValueError::new_err("evaluation needs a labeled trace"))?;
        let report = model::evaluate(&self.inner, &trace.toggles, labels, &windows).pyify()?;
        report_to_py(py, &report)
    }

    /// Round the weights to B-bit unsigned integers.
    fn quantize(&self, bits: u32) -> PyResult<QuantizedModel> {
        Ok(QuantizedModel { inner: opm::quantize(&self.inner, bits).pyify()? })
    }

    fn __repr__(&self) -> String {
        format!(
            "Model({} proxies, tau {})",
            self.inner.proxy_indices.len(),
            self.inner.flavor.tau()
        )
    }
}

/// A power model rounded to B-bit integer weights, plus the integer
/// datapath widths of the corresponding on-chip meter.
#[pyclass(module = "opmeter", name = "QuantizedModel", skip_from_py_object)]
#[derive(Clone)]
struct QuantizedModel {
    inner: opm::QuantizedModel,
}

#[pymethods]
impl QuantizedModel {
    /// Load a meter document; returns `(model, window_size)`.
    #[staticmethod]
    fn load(path: &str) -> PyResult<(QuantizedModel, usize)> {
        let bytes = std::fs::read(path).map_err(|e| to_py_err(e.into()))?;
        let doc: opm::OpmSpecDoc = serde_json::from_slice(&bytes)
            .map_err(|e| PyValueError::new_err(format!("bad meter document: {e}")))?;
        let (inner, window) = doc.into_model().pyify()?;
        Ok((QuantizedModel { inner }, window))
    }

    /// Write the meter document for a given window size.
    fn save(&self, path: &str, window: usize) -> PyResult<()> {
        let doc = opm::OpmSpecDoc::new(&self.inner, window).pyify()?;
        let mut bytes = serde_json::to_vec_pretty(&doc)
            .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        bytes.push(b'\n');
        std::fs::write(path, bytes).map_err(|e| to_py_err(e.into()))
    }

    #[getter]
    fn q_weights(&self) -> Vec<u64> {
        self.inner.q_weights.clone()
    }

    #[getter]
    fn bits(&self) -> u32 {
        self.inner.bits
    }

    /// Integer units per power unit; divide raw meter output by this.
    #[getter]
    fn scale(&self) -> f64 {
        self.inner.scale
    }

    #[getter]
    fn proxy_indices(&self) -> Vec<usize> {
        self.inner.proxy_indices.clone()
    }

    #[getter]
    fn proxy_names(&self) -> Vec<String> {
        self.inner.proxy_names.clone()
    }

    /// Width of the per-cycle adder output in bits.
    #[getter]
    fn cycle_sum_width(&self) -> u32 {
        self.inner.cycle_sum_width
    }

    /// Accumulator width needed for a T-cycle window.
    fn acc_width(&self, window: usize) -> u32 {
        self.inner.window_acc_width(window)
    }

    /// Worst-case absolute error of the dequantized window mean, covering
    /// weight rounding and the final right shift.
    fn error_bound(&self, window: usize) -> PyResult<f64> {
        opm::dequant_error_bound(self.inner.q_weights.len(), window, self.inner.scale).pyify()
    }

    /// Run the fixed-point meter over a trace. The trace may carry either
    /// exactly the proxy columns or the full catalog the model was trained
    /// on (proxy columns are then selected by index, names checked).
    /// Returns a dict with raw integer outputs and dequantized values.
    fn simulate(&self, py: Python<'_>, trace: &Trace, window: usize) -> PyResult<Py<PyAny>> {
        let q = self.inner.q_weights.len();
        let selected;
        let toggles = if trace.toggles.n_signals() == q {
            &trace.toggles
        } else {
            let names = trace.catalog.names();
            for (&j, want) in self.inner.proxy_indices.iter().zip(&self.inner.proxy_names) {
                match names.get(j) {
                    Some(have) if have == want => {}
                    Some(have) => {
                        return Err(PyValueError::new_err(format!(
                            "trace signal {j} is {have:?}, model expects {want:?}"
                        )));
                    }
                    None => {
                        return Err(PyValueError::new_err(format!(
                            "trace has no signal {j} ({want:?})"
                        )));
                    }
                }
            }
            selected = trace.toggles.select_columns(&self.inner.proxy_indices).pyify()?;
            &selected
        };
        let out = opm::simulate_opm(&self.inner, toggles, window).pyify()?;
        let values = opm::dequantize_output(&out, self.inner.scale).pyify()?;
        let dict = PyDict::new(py);
        dict.set_item("window_size", out.window_size)?;
        dict.set_item("latency_cycles", out.latency_cycles)?;
        dict.set_item("raw", out.raw.clone())?;
        dict.set_item("values", values.values().to_vec())?;
        Ok(dict.into_any().unbind())
    }

    fn __repr__(&self) -> String {
        format!(
            "QuantizedModel({} proxies, {} bits, scale {:.6})",
            self.inner.q_weights.len(),
            self.inner.bits,
            self.inner.scale
        )
    }
}

/// Root-mean-square error normalized by the label mean.
#[pyfunction]
fn nrmse(labels: Vec<f64>, predictions: Vec<f64>) -> PyResult<f64> {
    metrics::nrmse(&labels, &predictions).pyify()
}

/// Mean absolute error normalized by the label mean.
#[pyfunction]
fn nmae(labels: Vec<f64>, predictions: Vec<f64>) -> PyResult<f64> {
    metrics::nmae(&labels, &predictions).pyify()
}

/// Coefficient of determination.
#[pyfunction]
fn r_squared(labels: Vec<f64>, predictions: Vec<f64>) -> PyResult<f64> {
    metrics::r_squared(&labels, &predictions).pyify()
}

/// Pearson correlation coefficient.
#[pyfunction]
fn pearson(labels: Vec<f64>, predictions: Vec<f64>) -> PyResult<f64> {
    metrics::pearson(&labels, &predictions).pyify()
}

/// First differences of a series, for cycle-to-cycle step analysis.
#[pyfunction]
fn delta_current(values: Vec<f64>) -> PyResult<Vec<f64>> {
    metrics::delta_current(&values).pyify()
}

/// Toolkit version string.
#[pyfunction]
fn version() -> &'static str {
    opmeter_core::VERSION
}

#[pymodule]
fn opmeter(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Trace>()?;
    m.add_class::<Design>()?;
    m.add_class::<Model>()?;
    m.add_class::<QuantizedModel>()?;
    m.add_function(wrap_pyfunction!(nrmse, m)?)?;
    m.add_function(wrap_pyfunction!(nmae, m)?)?;
    m.add_function(wrap_pyfunction!(r_squared, m)?)?;
    m.add_function(wrap_pyfunction!(pearson, m)?)?;
    m.add_function(wrap_pyfunction!(delta_current, m)?)?;
    m.add_function(wrap_pyfunction!(version, m)?)?;
    m.add("__version__", opmeter_core::VERSION)?;
    Ok(())
}
