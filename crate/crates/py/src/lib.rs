//! Python bindings for `xfbd-core`, importable as `xfbd`.
//!
//! Images and masks cross the boundary as raw row-major `bytes`; structured
//! results (reports, manifests) come back as plain dicts.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyKeyError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;
use xfbd_core::blend::{self, make_blend_region, BlendConfig};
use xfbd_core::losses::{gradient_suite as core_suite, Loss, LossConfig, LossTensor, SuiteConfig};
use xfbd_core::metrics::{self, evaluate_scene as core_evaluate, MetricConfig};
use xfbd_core::objects::{self, Connectivity, DetectionConfig};
use xfbd_core::pipeline::{self, RunConfig};
use xfbd_core::raster::{build_target_masks, BuildingPolygon, ClassMask, DamageClass, ImageBuffer, SceneAnnotation};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Serializes `value` and hands it to Python's `json.loads`.
fn to_py<T: serde::Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(value_err)?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn connectivity(value: u8) -> PyResult<Connectivity> {
    Connectivity::try_from(value).map_err(value_err)
}

/// 8-bit image with interleaved channels.
#[pyclass(name = "Image", module = "xfbd", from_py_object)]
#[derive(Clone)]
pub struct PyImage {
    inner: ImageBuffer,
}

#[pymethods]
impl PyImage {
    #[new]
    fn new(width: u32, height: u32, channels: u8, data: &[u8]) -> PyResult<Self> {
        Ok(Self { inner: ImageBuffer::from_raw(width, height, channels, data.to_vec()).map_err(value_err)? })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: ImageBuffer::load_png(path).map_err(|e| PyIOError::new_err(e.to_string()))? })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save_png(path).map_err(|e| PyIOError::new_err(e.to_string()))
    }

    #[getter]
    fn width(&self) -> u32 {
        self.inner.width()
    }

    #[getter]
    fn height(&self) -> u32 {
        self.inner.height()
    }

    #[getter]
    fn channels(&self) -> u8 {
        self.inner.channels()
    }

    fn data<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, self.inner.data())
    }

    fn get(&self, x: u32, y: u32, c: u8) -> PyResult<u8> {
        if x >= self.inner.width() || y >= self.inner.height() || c >= self.inner.channels() {
            return Err(PyValueError::new_err("pixel index out of range"));
        }
        Ok(self.inner.get(x, y, c))
    }

    fn __repr__(&self) -> String {
        format!("Image({}x{}x{})", self.inner.width(), self.inner.height(), self.inner.channels())
    }
}

/// Building polygons of one scene.
#[pyclass(name = "Annotation", module = "xfbd", from_py_object)]
#[derive(Clone)]
pub struct PyAnnotation {
    inner: SceneAnnotation,
}

#[pymethods]
impl PyAnnotation {
    #[new]
    fn new(scene_id: &str, width: u32, height: u32) -> Self {
        Self { inner: SceneAnnotation::new(scene_id, width, height) }
    }

    /// Parses an xBD label document; returns the annotation and its warnings.
    #[staticmethod]
    fn from_label_json(py: Python<'_>, scene_id: &str, json: &str, width: u32, height: u32) -> PyResult<(Self, Py<PyAny>)> {
        let (inner, warnings) = SceneAnnotation::from_label_json(scene_id, json, width, height).map_err(value_err)?;
        Ok((Self { inner }, to_py(py, &warnings)?))
    }

    fn to_label_json(&self) -> String {
        self.inner.to_label_json().to_string()
    }

    /// Adds an axis-aligned rectangular building.
    fn add_rect(&mut self, uid: &str, x0: f64, y0: f64, x1: f64, y1: f64, label: &str) -> PyResult<()> {
        let label: DamageClass = label.parse().map_err(value_err)?;
        self.inner.buildings.push(BuildingPolygon::rect(uid, x0, y0, x1, y1, label));
        Ok(())
    }

    #[getter]
    fn scene_id(&self) -> &str {
        &self.inner.scene_id
    }

    #[getter]
    fn width(&self) -> u32 {
        self.inner.width
    }

    #[getter]
    fn height(&self) -> u32 {
        self.inner.height
    }

    /// `(uid, label, wkt)` per building.
    fn buildings(&self) -> Vec<(String, String, String)> {
        self.inner.buildings.iter().map(|b| (b.uid.clone(), b.label.to_string(), b.to_wkt())).collect()
    }

    /// Localization and damage target masks as raw bytes.
    fn target_masks<'py>(&self, py: Python<'py>) -> (Bound<'py, PyBytes>, Bound<'py, PyBytes>) {
        let t = build_target_masks(&self.inner);
        (PyBytes::new(py, t.loc.data()), PyBytes::new(py, t.dam.data()))
    }

    fn __len__(&self) -> usize {
        self.inner.buildings.len()
    }
}

/// Poisson-blends building `uid` from `source` into `target`.
///
/// Returns the composite and the solver report.
#[pyfunction]
#[pyo3(signature = (target, source, annotation, uid, dilation_px=2, cg_tolerance=1e-6, cg_max_iters=10000, window_margin_px=8))]
#[allow(clippy::too_many_arguments)]
fn blend_building(
    py: Python<'_>,
    target: &PyImage,
    source: &PyImage,
    annotation: &PyAnnotation,
    uid: &str,
    dilation_px: u32,
    cg_tolerance: f64,
    cg_max_iters: usize,
    window_margin_px: u32,
) -> PyResult<(PyImage, Py<PyAny>)> {
    let ann = &annotation.inner;
    let building = ann.building(uid).ok_or_else(|| PyKeyError::new_err(uid.to_string()))?;
    let cfg = BlendConfig { dilation_px, cg_tolerance, cg_max_iters, window_margin_px };
    let region = make_blend_region(building, ann.width, ann.height, dilation_px).map_err(value_err)?;
    let (composite, report) = py.detach(|| blend::blend(&target.inner, &source.inner, &region, &cfg)).map_err(value_err)?;
    Ok((PyImage { inner: composite }, to_py(py, &report)?))
}

type BoxArea = ((u32, u32, u32, u32), usize);

/// Connected components of the nonzero pixels of a mask, as `(bbox, area)`
/// with `bbox = (x0, y0, x1, y1)` inclusive.
#[pyfunction]
#[pyo3(signature = (mask, width, height, connectivity=8))]
fn connected_components(mask: &[u8], width: u32, height: u32, connectivity: u8) -> PyResult<Vec<BoxArea>> {
    let mask = ClassMask::from_raw(width, height, mask.to_vec()).map_err(value_err)?;
    let conn = self::connectivity(connectivity)?;
    Ok(objects::connected_components(&mask, conn)
        .iter()
        .map(|c| ((c.bbox.x0, c.bbox.y0, c.bbox.x1, c.bbox.y1), c.area()))
        .collect())
}

/// Object detections from localization and damage masks.
#[pyfunction]
#[pyo3(signature = (loc, dam, width, height, connectivity=8, min_area=0))]
fn masks_to_detections(py: Python<'_>, loc: &[u8], dam: &[u8], width: u32, height: u32, connectivity: u8, min_area: u64) -> PyResult<Py<PyAny>> {
    let loc = ClassMask::from_raw(width, height, loc.to_vec()).map_err(value_err)?;
    let dam = ClassMask::from_raw(width, height, dam.to_vec()).map_err(value_err)?;
    let cfg = DetectionConfig { connectivity: self::connectivity(connectivity)?, min_area };
    let set = objects::masks_to_detections("scene", &loc, &dam, &cfg).map_err(value_err)?;
    to_py(py, &set)
}

/// Pixel and object scores of one scene.
#[pyfunction]
#[pyo3(signature = (pred_loc, pred_dam, annotation, iou_threshold=0.5, connectivity=8, min_area=0, collapse=false))]
#[allow(clippy::too_many_arguments)]
fn evaluate_scene(
    py: Python<'_>,
    pred_loc: &[u8],
    pred_dam: &[u8],
    annotation: &PyAnnotation,
    iou_threshold: f64,
    connectivity: u8,
    min_area: u64,
    collapse: bool,
) -> PyResult<Py<PyAny>> {
    let (w, h) = (annotation.inner.width, annotation.inner.height);
    let loc = ClassMask::from_raw(w, h, pred_loc.to_vec()).map_err(value_err)?;
    let dam = ClassMask::from_raw(w, h, pred_dam.to_vec()).map_err(value_err)?;
    let cfg = MetricConfig { iou_threshold, connectivity: self::connectivity(connectivity)?, min_area, collapse };
    let report = core_evaluate(&loc, &dam, &annotation.inner, &cfg).map_err(value_err)?;
    to_py(py, &report)
}

/// `(overall_damage_f1, score)` from a localization F1 and four per-class F1s.
#[pyfunction]
fn xview2_score(localization_f1: f64, damage_f1: [f64; 4]) -> (f64, f64) {
    metrics::xview2_score(localization_f1, &damage_f1)
}

#[pyfunction]
fn harmonic_mean(values: [f64; 4]) -> f64 {
    metrics::harmonic_mean(&values)
}

/// Names accepted by `loss`.
#[pyfunction]
fn loss_names() -> Vec<&'static str> {
    Loss::ALL.iter().map(|l| l.name()).collect()
}

/// Evaluates a loss; returns `(value, gradient, degenerate)`.
#[pyfunction]
#[pyo3(signature = (name, y, y_hat, gamma=2.0, beta=1.0, lambda_contour=1.0, lambda_1=1.0, lambda_4=1.0, epsilon_dice=1.0))]
#[allow(clippy::too_many_arguments)]
fn loss(
    name: &str,
    y: Vec<f64>,
    y_hat: Vec<f64>,
    gamma: f64,
    beta: f64,
    lambda_contour: f64,
    lambda_1: f64,
    lambda_4: f64,
    epsilon_dice: f64,
) -> PyResult<(f64, Vec<f64>, bool)> {
    let kind: Loss = name.parse().map_err(value_err)?;
    let t = LossTensor::new(y, y_hat).map_err(value_err)?;
    let cfg = LossConfig { gamma, beta, lambda_contour, lambda_1, lambda_4, epsilon_dice };
    let r = kind.evaluate(&t, &cfg).map_err(value_err)?;
    Ok((r.value, r.gradient, r.degenerate))
}

/// Randomized finite-difference check of every loss gradient.
#[pyfunction]
#[pyo3(signature = (instances=100, length=64, seed=0x5eed))]
fn gradient_suite(py: Python<'_>, instances: usize, length: usize, seed: u64) -> PyResult<Py<PyAny>> {
    let suite = SuiteConfig { instances, length, seed, ..Default::default() };
    let rows = py.detach(|| core_suite(&LossConfig::default(), &suite)).map_err(value_err)?;
    to_py(py, &rows)
}

/// Runs dataset generation from a TOML config file; returns the manifest.
#[pyfunction]
fn generate_dataset(py: Python<'_>, config_path: PathBuf) -> PyResult<Py<PyAny>> {
    let cfg = RunConfig::load(&config_path).map_err(value_err)?;
    let manifest = py.detach(|| pipeline::generate_dataset(&cfg)).map_err(value_err)?;
    to_py(py, &manifest)
}

/// Scores a directory of predictions against a directory of labels.
#[pyfunction]
#[pyo3(signature = (pred_dir, gt_dir, iou_threshold=0.5, connectivity=8, min_area=0, collapse=false))]
fn score_run(py: Python<'_>, pred_dir: PathBuf, gt_dir: PathBuf, iou_threshold: f64, connectivity: u8, min_area: u64, collapse: bool) -> PyResult<Py<PyAny>> {
    let cfg = MetricConfig { iou_threshold, connectivity: self::connectivity(connectivity)?, min_area, collapse };
    let run = py.detach(|| pipeline::score_run(&pred_dir, &gt_dir, &cfg)).map_err(value_err)?;
    to_py(py, &run)
}

#[pymodule]
fn xfbd(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyImage>()?;
    m.add_class::<PyAnnotation>()?;
    m.add_function(wrap_pyfunction!(blend_building, m)?)?;
    m.add_function(wrap_pyfunction!(connected_components, m)?)?;
    m.add_function(wrap_pyfunction!(masks_to_detections, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_scene, m)?)?;
    m.add_function(wrap_pyfunction!(xview2_score, m)?)?;
    m.add_function(wrap_pyfunction!(harmonic_mean, m)?)?;
    m.add_function(wrap_pyfunction!(loss_names, m)?)?;
    m.add_function(wrap_pyfunction!(loss, m)?)?;
    m.add_function(wrap_pyfunction!(gradient_suite, m)?)?;
    m.add_function(wrap_pyfunction!(generate_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(score_run, m)?)?;
    Ok(())
}
