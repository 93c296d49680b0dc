//! Python bindings for the soilfusion pipeline.
//!
//! Build the cdylib and drop it on the Python path as `soilfusion_py.so`;
//! see python/smoke_test.py for an end-to-end exercise.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use soilfusion::forest::{fit_extra_trees, predict_forest, ForestModel, ForestParams};
use soilfusion::linear::{fit_linear, predict_linear, LinearModel};
use soilfusion::synthgen::{generate_campaign, write_campaign, CampaignConfig};

fn to_py_err(e: soilfusion::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyfunction]
fn r2(y_true: Vec<f64>, y_pred: Vec<f64>) -> PyResult<f64> {
    soilfusion::metrics::r2(&y_true, &y_pred).map_err(to_py_err)
}

#[pyfunction]
fn rmse(y_true: Vec<f64>, y_pred: Vec<f64>) -> PyResult<f64> {
    soilfusion::metrics::rmse(&y_true, &y_pred).map_err(to_py_err)
}

#[pyfunction]
fn pearson(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    soilfusion::metrics::pearson(&a, &b).map_err(to_py_err)
}

#[pyfunction]
fn interp1(xs: Vec<f64>, ys: Vec<f64>, queries: Vec<f64>) -> PyResult<Vec<f64>> {
    soilfusion::interp::interp1(&xs, &ys, &queries).map_err(to_py_err)
}

#[pyfunction]
fn add_gaussian_noise(values: Vec<f64>, sigma: f64, seed: u64) -> PyResult<Vec<f64>> {
    soilfusion::interp::add_gaussian_noise(&values, sigma, seed).map_err(to_py_err)
}

/// Drop the unstable leading and trailing bands of a raw 125-band spectrum.
#[pyfunction]
fn trim_spectrum(bands: Vec<f64>) -> PyResult<Vec<f64>> {
    let raw = soilfusion::RawSpectrum::new(bands).map_err(to_py_err)?;
    Ok(soilfusion::trim_spectrum(&raw).bands().to_vec())
}

/// Extremely randomized trees regressor.
#[pyclass]
struct ExtraTrees {
    params: ForestParams,
    model: Option<ForestModel>,
}

#[pymethods]
impl ExtraTrees {
    #[new]
    #[pyo3(signature = (n_trees=100, k_features=None, min_samples_split=5, seed=0))]
    fn new(n_trees: usize, k_features: Option<usize>, min_samples_split: usize, seed: u64) -> Self {
        Self {
            params: ForestParams { n_trees, k_features, min_samples_split, seed },
            model: None,
        }
    }

    fn fit(&mut self, x: Vec<Vec<f64>>, y: Vec<f64>) -> PyResult<()> {
        self.model = Some(fit_extra_trees(&x, &y, self.params).map_err(to_py_err)?);
        Ok(())
    }

    fn predict(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        let model = self.model.as_ref().ok_or_else(|| PyValueError::new_err("fit first"))?;
        predict_forest(model, &x).map_err(to_py_err)
    }

    fn feature_importances(&self) -> PyResult<Vec<f64>> {
        let model = self.model.as_ref().ok_or_else(|| PyValueError::new_err("fit first"))?;
        Ok(model.feature_importances.clone())
    }

    fn to_json(&self) -> PyResult<String> {
        let model = self.model.as_ref().ok_or_else(|| PyValueError::new_err("fit first"))?;
        model.to_json().map_err(to_py_err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let model = ForestModel::from_json(text).map_err(to_py_err)?;
        Ok(Self { params: model.params, model: Some(model) })
    }
}

/// Least squares with a tiny ridge term for numerical stability.
#[pyclass]
struct Linear {
    model: Option<LinearModel>,
}

#[pymethods]
impl Linear {
    #[new]
    fn new() -> Self {
        Self { model: None }
    }

    fn fit(&mut self, x: Vec<Vec<f64>>, y: Vec<f64>) -> PyResult<()> {
        self.model = Some(fit_linear(&x, &y).map_err(to_py_err)?);
        Ok(())
    }

    fn predict(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        let model = self.model.as_ref().ok_or_else(|| PyValueError::new_err("fit first"))?;
        predict_linear(model, &x).map_err(to_py_err)
    }

    fn coefficients(&self) -> PyResult<(Vec<f64>, f64)> {
        let model = self.model.as_ref().ok_or_else(|| PyValueError::new_err("fit first"))?;
        Ok((model.weights.clone(), model.intercept))
    }
}

/// Write a synthetic measurement campaign (hsi.csv, gpr.csv, tdr.csv,
/// manifest.json) into `out_dir`. Returns (frames, profiles, tdr samples).
#[pyfunction]
#[pyo3(signature = (out_dir, seed=0, config_json=None))]
fn generate_campaign_files(
    out_dir: &str,
    seed: u64,
    config_json: Option<&str>,
) -> PyResult<(usize, usize, usize)> {
    let cfg = match config_json {
        Some(text) => serde_json::from_str(text)
            .map_err(|e| PyValueError::new_err(format!("bad campaign config: {e}")))?,
        None => CampaignConfig { seed, ..Default::default() },
    };
    let campaign = generate_campaign(&cfg).map_err(to_py_err)?;
    std::fs::create_dir_all(out_dir)?;
    write_campaign(&campaign, std::path::Path::new(out_dir)).map_err(to_py_err)?;
    Ok((
        campaign.frames.len(),
        campaign.profiles.len(),
        campaign.tdr_samples.len(),
    ))
}

#[pymodule]
fn soilfusion_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(r2, m)?)?;
    m.add_function(wrap_pyfunction!(rmse, m)?)?;
    m.add_function(wrap_pyfunction!(pearson, m)?)?;
    m.add_function(wrap_pyfunction!(interp1, m)?)?;
    m.add_function(wrap_pyfunction!(add_gaussian_noise, m)?)?;
    m.add_function(wrap_pyfunction!(trim_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(generate_campaign_files, m)?)?;
    m.add_class::<ExtraTrees>()?;
    m.add_class::<Linear>()?;
    Ok(())
}
