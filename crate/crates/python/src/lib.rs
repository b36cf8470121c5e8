//! Python bindings: libraries, heads, pattern files, consistency scores,
//! AUROC and the toy demo.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use libnet_core::dataio;
use libnet_core::pipeline::{run_demo, DemoConfig, Scenario};
use libnet_core::vecmath::DEFAULT_TEMPERATURE;
use libnet_core::{ActivationRecord, Error};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(io) => PyIOError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn records(
    patterns: Vec<Vec<f64>>,
    answers: Option<Vec<usize>>,
) -> PyResult<Vec<ActivationRecord>> {
    if let Some(a) = &answers {
        if a.len() != patterns.len() {
            return Err(PyValueError::new_err(format!(
                "{} answers for {} patterns",
                a.len(),
                patterns.len()
            )));
        }
    }
    Ok(patterns
        .into_iter()
        .enumerate()
        .map(|(i, f)| {
            let r = ActivationRecord::new(i as u64, f);
            match &answers {
                Some(a) => r.with_answer(a[i]),
                None => r,
            }
        })
        .collect())
}

/// A frozen library of unit-normalized patterns.
#[pyclass(name = "LibraryNetwork", module = "libnet", frozen)]
struct PyLibrary(libnet_core::LibraryNetwork);

#[pymethods]
impl PyLibrary {
    /// Builds a library from patterns in order with novelty threshold `theta`.
    #[staticmethod]
    fn build(patterns: Vec<Vec<f64>>, theta: f64) -> PyResult<Self> {
        let recs = records(patterns, None)?;
        libnet_core::LibraryNetwork::build(&recs, theta)
            .map(Self)
            .map_err(to_py)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        dataio::load_library(path).map(Self).map_err(to_py)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        dataio::save_library(path, &self.0).map_err(to_py)
    }

    /// Cosine of the pattern to every stored row.
    fn respond(&self, pattern: Vec<f64>) -> PyResult<Vec<f64>> {
        self.0
            .respond(&pattern)
            .map(|r| r.activations)
            .map_err(to_py)
    }

    fn rows(&self) -> Vec<Vec<f64>> {
        self.0.rows().map(<[f64]>::to_vec).collect()
    }

    #[getter]
    fn theta(&self) -> f64 {
        self.0.theta()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn __len__(&self) -> usize {
        self.0.size()
    }

    fn __repr__(&self) -> String {
        format!(
            "LibraryNetwork(theta={}, dim={}, size={})",
            self.0.theta(),
            self.0.dim(),
            self.0.size()
        )
    }
}

/// Hebbian prediction head over a library.
#[pyclass(name = "PredictionHead", module = "libnet", frozen)]
struct PyHead(libnet_core::PredictionHead);

#[pymethods]
impl PyHead {
    /// Trains a head in one pass over `patterns` labelled with the model's `answers`.
    #[staticmethod]
    #[pyo3(signature = (library, patterns, answers, num_classes, top_a = 3, temperature = DEFAULT_TEMPERATURE))]
    fn train(
        library: &PyLibrary,
        patterns: Vec<Vec<f64>>,
        answers: Vec<usize>,
        num_classes: usize,
        top_a: usize,
        temperature: f64,
    ) -> PyResult<Self> {
        let recs = records(patterns, Some(answers))?;
        libnet_core::train_head(&library.0, &recs, num_classes, temperature, top_a)
            .map(Self)
            .map_err(to_py)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        dataio::load_head(path).map(Self).map_err(to_py)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        dataio::save_head(path, &self.0).map_err(to_py)
    }

    /// Class likelihoods for one pattern.
    fn likelihood(&self, library: &PyLibrary, pattern: Vec<f64>) -> PyResult<Vec<f64>> {
        self.0
            .likelihood(&library.0, &pattern)
            .map(|p| p.values)
            .map_err(to_py)
    }

    /// The `k` most likely classes, most likely first.
    #[pyo3(signature = (library, pattern, k = 1))]
    fn predict(&self, library: &PyLibrary, pattern: Vec<f64>, k: usize) -> PyResult<Vec<usize>> {
        self.0.predict_topk(&library.0, &pattern, k).map_err(to_py)
    }

    /// Row-major `num_classes x library_size` weights.
    fn weights(&self) -> Vec<f64> {
        self.0.weights().to_vec()
    }

    #[getter]
    fn num_classes(&self) -> usize {
        self.0.num_classes()
    }

    #[getter]
    fn top_a(&self) -> usize {
        self.0.top_a()
    }

    fn __repr__(&self) -> String {
        format!(
            "PredictionHead(num_classes={}, library_size={}, top_a={})",
            self.0.num_classes(),
            self.0.library_size(),
            self.0.top_a()
        )
    }
}

/// Reads a HAP1 file as `(num_classes, [(sample_id, answer, label, features)])`,
/// with `None` for absent labels.
#[pyfunction]
#[allow(clippy::type_complexity)]
fn read_haps(path: PathBuf) -> PyResult<(u16, Vec<(u64, Option<usize>, Option<usize>, Vec<f64>)>)> {
    let file = dataio::read_hap_file(path).map_err(to_py)?;
    let rows = file
        .records
        .into_iter()
        .map(|r| (r.sample_id, r.model_answer, r.true_label, r.features))
        .collect();
    Ok((file.num_classes, rows))
}

/// Writes a HAP1 file from `(sample_id, answer, label, features)` tuples.
#[pyfunction]
#[allow(clippy::type_complexity)]
fn write_haps(
    path: PathBuf,
    num_classes: u16,
    rows: Vec<(u64, Option<usize>, Option<usize>, Vec<f64>)>,
) -> PyResult<()> {
    let recs = rows
        .into_iter()
        .map(|(id, answer, label, f)| ActivationRecord {
            sample_id: id,
            layer_id: 0,
            features: f,
            model_answer: answer,
            true_label: label,
        })
        .collect();
    dataio::write_hap_file(path, &dataio::HapFile::new(num_classes, recs)).map_err(to_py)
}

/// Consistency of one sample's predictions across layers.
#[pyfunction]
#[pyo3(signature = (layers, patterns, top_a = 20))]
fn cpl(
    layers: Vec<(PyRef<'_, PyHead>, PyRef<'_, PyLibrary>)>,
    patterns: Vec<Vec<f64>>,
    top_a: usize,
) -> PyResult<f64> {
    let pairs: Vec<_> = layers.iter().map(|(h, l)| (&h.0, &l.0)).collect();
    let features: Vec<&[f64]> = patterns.iter().map(Vec::as_slice).collect();
    libnet_core::cpl_with_top_a(0, &pairs, &features, top_a)
        .map(|s| s.value)
        .map_err(to_py)
}

/// Area under the ROC curve, normal scores expected high.
#[pyfunction]
fn auroc(normal: Vec<f64>, adversarial: Vec<f64>) -> PyResult<f64> {
    libnet_core::auroc(&normal, &adversarial)
        .map(|r| r.auroc)
        .map_err(to_py)
}

/// Runs the toy demo into `out_dir` and returns `[(epsilon, auroc)]`.
#[pyfunction]
#[pyo3(signature = (out_dir, scenario = "toy-digits", seed = 42))]
fn demo(out_dir: PathBuf, scenario: &str, seed: u64) -> PyResult<Vec<(f64, f64)>> {
    let scenario = match scenario {
        "synthetic" => Scenario::Synthetic,
        "toy-digits" => Scenario::ToyDigits,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown scenario {other:?}, expected synthetic or toy-digits"
            )))
        }
    };
    std::fs::create_dir_all(&out_dir)?;
    let report = run_demo(&DemoConfig::new(scenario, seed), &out_dir).map_err(to_py)?;
    Ok(report
        .attacks
        .iter()
        .map(|a| (a.epsilon, a.auroc))
        .collect())
}

#[pymodule]
fn libnet(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyLibrary>()?;
    m.add_class::<PyHead>()?;
    m.add_function(wrap_pyfunction!(read_haps, m)?)?;
    m.add_function(wrap_pyfunction!(write_haps, m)?)?;
    m.add_function(wrap_pyfunction!(cpl, m)?)?;
    m.add_function(wrap_pyfunction!(auroc, m)?)?;
    m.add_function(wrap_pyfunction!(demo, m)?)?;
    m.add("DEFAULT_TEMPERATURE", DEFAULT_TEMPERATURE)?;
    Ok(())
}
