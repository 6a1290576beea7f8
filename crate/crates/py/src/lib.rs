//! Python bindings: images, masks, degradation, metrics and checkpointed
//! models. Images cross the boundary as `Tensor` objects built from flat
//! lists.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use mript_core::dataio;
use mript_core::degradation::{self, MaskFamily, MaskSpec};
use mript_core::metrics::{self, SsimParams};
use mript_core::model::{Model as CoreModel, ModelConfig, TaskLabel};
use mript_core::numerics::Tensor as CoreTensor;
use mript_core::training;
use mript_core::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn family(name: &str) -> PyResult<MaskFamily> {
    name.parse().map_err(to_py)
}

/// A dense f32 array with explicit dimensions.
#[pyclass(module = "mript")]
pub struct Tensor {
    inner: CoreTensor<f32>,
}

impl Tensor {
    fn wrap(inner: CoreTensor<f32>) -> Self {
        Tensor { inner }
    }
}

#[pymethods]
impl Tensor {
    #[new]
    fn new(shape: Vec<usize>, data: Vec<f32>) -> PyResult<Self> {
        CoreTensor::new(shape, data).map(Tensor::wrap).map_err(to_py)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        dataio::load_raster(path).map(Tensor::wrap).map_err(to_py)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        dataio::save_raster(path, &self.inner).map_err(to_py)
    }

    #[getter]
    fn shape(&self) -> Vec<usize> {
        self.inner.dims().to_vec()
    }

    /// Flat row-major values.
    fn tolist(&self) -> Vec<f32> {
        self.inner.data().to_vec()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Tensor(shape={:?})", self.inner.dims())
    }
}

/// A k-space sampling mask of the given family and acceleration.
#[pyfunction]
#[pyo3(signature = (family_name, acceleration, size, seed = 0))]
fn make_mask(family_name: &str, acceleration: f64, size: usize, seed: u64) -> PyResult<Tensor> {
    let spec = MaskSpec::new(family(family_name)?, acceleration, seed);
    let m = degradation::make_mask(&spec, (size, size)).map_err(to_py)?;
    Ok(Tensor::wrap(m.to_tensor()))
}

/// Ratio of total to kept k-space samples for a mask tensor.
#[pyfunction]
fn achieved_acceleration(mask: PyRef<'_, Tensor>) -> PyResult<f64> {
    let m = degradation::Mask::from_tensor(&mask.inner).map_err(to_py)?;
    Ok(degradation::achieved_acceleration(&m))
}

/// Zero-filled reconstruction of `image` under `mask`.
#[pyfunction]
fn degrade(image: PyRef<'_, Tensor>, mask: PyRef<'_, Tensor>) -> PyResult<Tensor> {
    let m = degradation::Mask::from_tensor(&mask.inner).map_err(to_py)?;
    degradation::degrade(&image.inner, &m).map(Tensor::wrap).map_err(to_py)
}

#[pyfunction]
fn psnr(x: PyRef<'_, Tensor>, clean: PyRef<'_, Tensor>) -> PyResult<f64> {
    metrics::psnr(&x.inner, &clean.inner).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (x, clean, windowed = true))]
fn ssim(x: PyRef<'_, Tensor>, clean: PyRef<'_, Tensor>, windowed: bool) -> PyResult<f64> {
    let params = if windowed { SsimParams::default() } else { SsimParams::global() };
    metrics::ssim(&x.inner, &clean.inner, &params).map_err(to_py)
}

/// `n` synthetic phantoms of `size`², values in [0, 1].
#[pyfunction]
#[pyo3(signature = (n, size, seed = 0))]
fn phantoms(n: usize, size: usize, seed: u64) -> PyResult<Vec<Tensor>> {
    let set = dataio::phantom_set(n, size, seed).map_err(to_py)?;
    Ok(set.into_iter().map(Tensor::wrap).collect())
}

/// A reconstruction network, freshly initialized or read from a checkpoint.
#[pyclass(module = "mript")]
pub struct Model {
    inner: CoreModel<f32>,
}

#[pymethods]
impl Model {
    #[new]
    #[pyo3(signature = (preset = "tiny", seed = 0))]
    fn new(preset: &str, seed: u64) -> PyResult<Self> {
        let config = ModelConfig::preset(preset).map_err(to_py)?;
        let inner = CoreModel::new(config, seed).map_err(to_py)?;
        Ok(Model { inner })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let ck = training::load_checkpoint(std::path::Path::new(path)).map_err(to_py)?;
        Ok(Model { inner: ck.model })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        training::save_checkpoint(&self.inner, None, &[], 0, std::path::Path::new(path)).map_err(to_py)
    }

    #[getter]
    fn image_size(&self) -> usize {
        self.inner.config().image_size
    }

    #[getter]
    fn parameter_count(&self) -> usize {
        self.inner.params().iter().map(|p| p.len()).sum()
    }

    /// Reconstructs a zero-filled image degraded by the given task.
    fn predict(&self, image: PyRef<'_, Tensor>, family_name: &str, acceleration: f64) -> PyResult<Tensor> {
        let label = TaskLabel::new(family(family_name)?, acceleration).map_err(to_py)?;
        self.inner.predict(&image.inner, &label).map(Tensor::wrap).map_err(to_py)
    }
}

#[pymodule]
fn mript(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Tensor>()?;
    m.add_class::<Model>()?;
    m.add_function(wrap_pyfunction!(make_mask, m)?)?;
    m.add_function(wrap_pyfunction!(achieved_acceleration, m)?)?;
    m.add_function(wrap_pyfunction!(degrade, m)?)?;
    m.add_function(wrap_pyfunction!(psnr, m)?)?;
    m.add_function(wrap_pyfunction!(ssim, m)?)?;
    m.add_function(wrap_pyfunction!(phantoms, m)?)?;
    Ok(())
}
