//! The two dataset-extension approaches.
//!
//! Approach 1 fills the temporal gaps of the sparse GPR record: for every
//! TDR reading without a measured delta-theta, a value is interpolated
//! along the time axis (plus Gaussian noise) or predicted by a regression
//! from theta. Approach 2 goes the other way and simulates soil-moisture
//! targets along the GPR profile from a delta-theta -> theta map, at the
//! nine cells per plot not covered by the TDR probe.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::data_model::{
    resample_profile, trim_spectrum, Datapoint, Dataset, GprProfile, HyperspectralFrame,
    Provenance, TdrSample, BANDS, CELLS,
};
use crate::error::{Error, Result};
use crate::forest::{fit_extra_trees, predict_forest, ForestParams};
use crate::interp::{add_gaussian_noise, interp1};
use crate::linear::{fit_linear, predict_linear};
use crate::seeding::derive_seed2;

/// Gaps longer than this split the interpolation into separate spans when
/// gap bridging is off (the overnight break between measurement days).
pub const OVERNIGHT_GAP_S: i64 = 6 * 3600;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimMethod {
    Interpolation,
    LinearRegression,
    EtRegression,
}

impl std::fmt::Display for SimMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SimMethod::Interpolation => "interpolation",
            SimMethod::LinearRegression => "linreg",
            SimMethod::EtRegression => "et",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for SimMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "interpolation" => Ok(SimMethod::Interpolation),
            "linreg" | "linear_regression" => Ok(SimMethod::LinearRegression),
            "et" | "et_regression" => Ok(SimMethod::EtRegression),
            other => Err(Error::InvalidParam(format!("unknown simulation method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SimConfig {
    pub method: SimMethod,
    /// Noise added to interpolated delta-theta (approach 1 only).
    /// `None` means 0.1 x the per-plot standard deviation of measured
    /// delta-theta.
    pub noise_sigma: Option<f64>,
    pub seed: u64,
    /// Add the spectrum to the theta -> delta-theta regression inputs
    /// (approach-1 ML variants only).
    pub use_spectrum_features: bool,
    /// Interpolate across the overnight gap as one span.
    pub bridge_gaps: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            method: SimMethod::Interpolation,
            noise_sigma: None,
            seed: 0,
            use_spectrum_features: false,
            bridge_gaps: true,
        }
    }
}

impl SimConfig {
    fn validate(&self) -> Result<()> {
        if let Some(s) = self.noise_sigma {
            if !(s >= 0.0) {
                return Err(Error::InvalidParam(format!("noise sigma must be >= 0, got {s}")));
            }
        }
        Ok(())
    }
}

/// One point of a plot-ready GPR time series (Fig.-3-style export).
#[derive(Debug, Clone, Serialize)]
pub struct TimeseriesPoint {
    pub timestamp: i64,
    pub measured_dtheta: Option<f64>,
    pub simulated_dtheta: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SimSkips {
    pub no_frame_match: usize,
    pub missing_pixel: usize,
    pub outside_span: usize,
}

#[derive(Debug)]
pub struct SimOutput {
    pub dataset: Dataset,
    pub skips: SimSkips,
    /// Keyed by (plot, probe cell); approach 1 only.
    pub timeseries: BTreeMap<(u32, usize), Vec<TimeseriesPoint>>,
}

#[derive(Debug, Serialize)]
pub struct SimulationManifest {
    pub approach: String,
    pub method: SimMethod,
    pub seed: u64,
    pub noise_sigma: Option<f64>,
    pub use_spectrum_features: bool,
    pub bridge_gaps: bool,
    pub rows_measured: usize,
    pub rows_simulated: usize,
    pub skips: SimSkips,
}

impl SimulationManifest {
    pub fn for_output(approach: &str, cfg: &SimConfig, out: &SimOutput) -> Self {
        let measured = out
            .dataset
            .rows
            .iter()
            .filter(|r| r.provenance == Provenance::Measured)
            .count();
        Self {
            approach: approach.into(),
            method: cfg.method,
            seed: cfg.seed,
            noise_sigma: cfg.noise_sigma,
            use_spectrum_features: cfg.use_spectrum_features,
            bridge_gaps: cfg.bridge_gaps,
            rows_measured: measured,
            rows_simulated: out.dataset.rows.len() - measured,
            skips: out.skips.clone(),
        }
    }
}

fn nearest_frame<'a>(
    frames: &'a [HyperspectralFrame],
    plot_id: u32,
    t: i64,
    tol: i64,
) -> Option<&'a HyperspectralFrame> {
    frames
        .iter()
        .filter(|f| f.plot_id == plot_id)
        .map(|f| ((f.timestamp - t).abs(), f))
        .filter(|(dt, _)| *dt <= tol)
        .min_by_key(|(dt, _)| *dt)
        .map(|(_, f)| f)
}

/// Measured delta-theta knots per (plot, probe cell), sorted by time.
fn measured_knots(measured: &Dataset) -> BTreeMap<(u32, usize), Vec<(i64, f64)>> {
    let mut knots: BTreeMap<(u32, usize), Vec<(i64, f64)>> = BTreeMap::new();
    for row in &measured.rows {
        let dtheta = *row.features.last().expect("dtheta feature");
        knots
            .entry((row.plot_id, row.position_index))
            .or_default()
            .push((row.timestamp, dtheta));
    }
    for series in knots.values_mut() {
        series.sort_by_key(|k| k.0);
        series.dedup_by_key(|k| k.0);
    }
    knots
}

/// Split a knot series at gaps longer than [`OVERNIGHT_GAP_S`].
fn split_spans(knots: &[(i64, f64)]) -> Vec<&[(i64, f64)]> {
    let mut spans = Vec::new();
    let mut start = 0;
    for i in 1..knots.len() {
        if knots[i].0 - knots[i - 1].0 > OVERNIGHT_GAP_S {
            spans.push(&knots[start..i]);
            start = i;
        }
    }
    spans.push(&knots[start..]);
    spans
}

/// Approach 1: extend the measured dataset with simulated delta-theta at
/// every TDR reading that has no measured one. Measured rows pass through
/// unchanged.
pub fn simulate_gpr(
    measured: &Dataset,
    tdr_samples: &[TdrSample],
    frames: &[HyperspectralFrame],
    cfg: &SimConfig,
    time_tolerance_s: i64,
) -> Result<SimOutput> {
    cfg.validate()?;
    if !measured.has_dtheta_feature() {
        return Err(Error::Schema(
            "approach 1 needs a measured dataset with the gpr_dtheta feature".into(),
        ));
    }
    if measured.rows.is_empty() {
        return Err(Error::EmptyInput("measured dataset".into()));
    }

    let knots = measured_knots(measured);
    let covered: BTreeSet<(u32, usize, i64)> = measured
        .rows
        .iter()
        .map(|r| (r.plot_id, r.position_index, r.timestamp))
        .collect();

    // TDR readings still lacking a delta-theta, grouped per (plot, cell).
    let mut pending: BTreeMap<(u32, usize), Vec<&TdrSample>> = BTreeMap::new();
    for s in tdr_samples {
        let key = (s.plot_id, s.position_index);
        if !knots.contains_key(&key) {
            continue;
        }
        if covered.contains(&(s.plot_id, s.position_index, s.timestamp)) {
            continue;
        }
        pending.entry(key).or_default().push(s);
    }
    for series in pending.values_mut() {
        series.sort_by_key(|s| s.timestamp);
    }

    // Per-plot sigma default: 0.1 x std of the measured delta-theta.
    let plot_sigma = |plot: u32| -> f64 {
        if let Some(s) = cfg.noise_sigma {
            return s;
        }
        let values: Vec<f64> = measured
            .rows
            .iter()
            .filter(|r| r.plot_id == plot)
            .map(|r| *r.features.last().unwrap())
            .collect();
        if values.len() < 2 {
            return 0.0;
        }
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / values.len() as f64;
        0.1 * var.sqrt()
    };

    let regressor = match cfg.method {
        SimMethod::Interpolation => None,
        _ => Some(fit_dtheta_regressor(measured, cfg)?),
    };

    let mut skips = SimSkips::default();
    let mut rows = measured.rows.clone();
    let mut timeseries: BTreeMap<(u32, usize), Vec<TimeseriesPoint>> = BTreeMap::new();

    for ((plot, pos), samples) in &pending {
        let series = &knots[&(*plot, *pos)];
        let mut points: Vec<TimeseriesPoint> = series
            .iter()
            .map(|&(t, v)| TimeseriesPoint {
                timestamp: t,
                measured_dtheta: Some(v),
                simulated_dtheta: None,
            })
            .collect();

        let simulated: Vec<Option<f64>> = match cfg.method {
            SimMethod::Interpolation => {
                if series.len() < 2 {
                    return Err(Error::Simulation(format!(
                        "plot {plot} cell {pos}: need >= 2 measured GPR timestamps to interpolate, have {}",
                        series.len()
                    )));
                }
                let spans: Vec<&[(i64, f64)]> = if cfg.bridge_gaps {
                    vec![&series[..]]
                } else {
                    split_spans(series)
                };
                let mut values = Vec::with_capacity(samples.len());
                for s in samples.iter() {
                    let span = spans
                        .iter()
                        .find(|sp| s.timestamp >= sp[0].0 && s.timestamp <= sp[sp.len() - 1].0);
                    match span {
                        Some(sp) if sp.len() >= 2 => {
                            let xs: Vec<f64> = sp.iter().map(|k| k.0 as f64).collect();
                            let ys: Vec<f64> = sp.iter().map(|k| k.1).collect();
                            let v = interp1(&xs, &ys, &[s.timestamp as f64])?[0];
                            values.push(Some(v));
                        }
                        _ => {
                            skips.outside_span += 1;
                            values.push(None);
                        }
                    }
                }
                // Noise stream fixed per (plot, cell) so parallel plot
                // processing would not reorder draws.
                let sigma = plot_sigma(*plot);
                let noise_seed = derive_seed2(cfg.seed, *plot as u64, *pos as u64);
                let present: Vec<f64> = values.iter().filter_map(|v| *v).collect();
                let noisy = add_gaussian_noise(&present, sigma, noise_seed)?;
                let mut it = noisy.into_iter();
                values
                    .into_iter()
                    .map(|v| v.map(|_| it.next().unwrap()))
                    .collect()
            }
            SimMethod::LinearRegression | SimMethod::EtRegression => {
                let regressor = regressor.as_ref().unwrap();
                let mut values = Vec::with_capacity(samples.len());
                for s in samples.iter() {
                    let inputs = if cfg.use_spectrum_features {
                        let Some(frame) = nearest_frame(frames, *plot, s.timestamp, time_tolerance_s)
                        else {
                            skips.no_frame_match += 1;
                            values.push(None);
                            continue;
                        };
                        let Some(pixel) = frame.pixels.get(pos) else {
                            skips.missing_pixel += 1;
                            values.push(None);
                            continue;
                        };
                        let mut row = vec![s.theta];
                        row.extend_from_slice(trim_spectrum(pixel).bands());
                        row
                    } else {
                        vec![s.theta]
                    };
                    values.push(Some(regressor.predict_one(&inputs)?));
                }
                values
            }
        };

        for (s, dtheta) in samples.iter().zip(&simulated) {
            let Some(dtheta) = dtheta else { continue };
            points.push(TimeseriesPoint {
                timestamp: s.timestamp,
                measured_dtheta: None,
                simulated_dtheta: Some(*dtheta),
            });
            let Some(frame) = nearest_frame(frames, *plot, s.timestamp, time_tolerance_s) else {
                skips.no_frame_match += 1;
                continue;
            };
            let Some(pixel) = frame.pixels.get(pos) else {
                skips.missing_pixel += 1;
                continue;
            };
            let mut features = trim_spectrum(pixel).bands().to_vec();
            features.push(*dtheta);
            rows.push(Datapoint {
                plot_id: *plot,
                timestamp: s.timestamp,
                position_index: *pos,
                features,
                target: s.theta,
                provenance: Provenance::SimulatedGpr,
                source_dtheta: None,
            });
        }
        points.sort_by_key(|p| p.timestamp);
        timeseries.insert((*plot, *pos), points);
    }

    rows.sort_by_key(|r| (r.plot_id, r.timestamp, r.position_index));
    Ok(SimOutput {
        dataset: Dataset::new(rows, true)?,
        skips,
        timeseries,
    })
}

enum DthetaRegressor {
    Linear(crate::linear::LinearModel),
    Forest(crate::forest::ForestModel),
}

impl DthetaRegressor {
    fn predict_one(&self, inputs: &[f64]) -> Result<f64> {
        let x = vec![inputs.to_vec()];
        let y = match self {
            DthetaRegressor::Linear(m) => predict_linear(m, &x)?,
            DthetaRegressor::Forest(m) => predict_forest(m, &x)?,
        };
        Ok(y[0])
    }
}

/// Fit theta (+ spectrum) -> delta-theta on the measured rows.
fn fit_dtheta_regressor(measured: &Dataset, cfg: &SimConfig) -> Result<DthetaRegressor> {
    let x: Vec<Vec<f64>> = measured
        .rows
        .iter()
        .map(|r| {
            let mut row = vec![r.target];
            if cfg.use_spectrum_features {
                row.extend_from_slice(&r.features[..BANDS]);
            }
            row
        })
        .collect();
    let y: Vec<f64> = measured
        .rows
        .iter()
        .map(|r| *r.features.last().unwrap())
        .collect();
    match cfg.method {
        SimMethod::LinearRegression => Ok(DthetaRegressor::Linear(fit_linear(&x, &y)?)),
        SimMethod::EtRegression => {
            let params = ForestParams { seed: cfg.seed, ..Default::default() };
            Ok(DthetaRegressor::Forest(fit_extra_trees(&x, &y, params)?))
        }
        SimMethod::Interpolation => unreachable!("interpolation has no regressor"),
    }
}

/// The delta-theta -> theta map at the heart of approach 2.
pub enum ThetaMap {
    /// Knots sorted by delta-theta; duplicate delta-theta values collapse
    /// to the mean theta.
    Interpolation { xs: Vec<f64>, ys: Vec<f64> },
    Linear(crate::linear::LinearModel),
    Forest(crate::forest::ForestModel),
}

impl ThetaMap {
    pub fn fit(pairs: &[(f64, f64)], method: SimMethod, seed: u64) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::EmptyInput("delta-theta -> theta training pairs".into()));
        }
        match method {
            SimMethod::Interpolation => {
                let mut sorted = pairs.to_vec();
                sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
                let mut xs = Vec::new();
                let mut ys = Vec::new();
                let mut i = 0;
                while i < sorted.len() {
                    let mut j = i;
                    let mut sum = 0.0;
                    while j < sorted.len() && sorted[j].0 == sorted[i].0 {
                        sum += sorted[j].1;
                        j += 1;
                    }
                    xs.push(sorted[i].0);
                    ys.push(sum / (j - i) as f64);
                    i = j;
                }
                if xs.len() < 2 {
                    return Err(Error::Simulation(format!(
                        "need >= 2 distinct delta-theta training values, have {}",
                        xs.len()
                    )));
                }
                Ok(ThetaMap::Interpolation { xs, ys })
            }
            SimMethod::LinearRegression => {
                let x: Vec<Vec<f64>> = pairs.iter().map(|p| vec![p.0]).collect();
                let y: Vec<f64> = pairs.iter().map(|p| p.1).collect();
                Ok(ThetaMap::Linear(fit_linear(&x, &y)?))
            }
            SimMethod::EtRegression => {
                let x: Vec<Vec<f64>> = pairs.iter().map(|p| vec![p.0]).collect();
                let y: Vec<f64> = pairs.iter().map(|p| p.1).collect();
                let params = ForestParams { seed, ..Default::default() };
                Ok(ThetaMap::Forest(fit_extra_trees(&x, &y, params)?))
            }
        }
    }

    pub fn predict(&self, dtheta: f64) -> Result<f64> {
        match self {
            ThetaMap::Interpolation { xs, ys } => Ok(interp1(xs, ys, &[dtheta])?[0]),
            ThetaMap::Linear(m) => Ok(predict_linear(m, &[vec![dtheta]])?[0]),
            ThetaMap::Forest(m) => Ok(predict_forest(m, &[vec![dtheta]])?[0]),
        }
    }
}

/// Approach 2: simulate soil-moisture targets along the GPR profiles at
/// the cells not covered by the TDR probe (9 of 10 per plot). The output
/// rows carry spectrum-only features; the source delta-theta is kept as
/// row metadata.
pub fn simulate_tdr(
    measured: &Dataset,
    profiles: &[GprProfile],
    frames: &[HyperspectralFrame],
    cfg: &SimConfig,
    time_tolerance_s: i64,
) -> Result<SimOutput> {
    cfg.validate()?;
    if !measured.has_dtheta_feature() {
        return Err(Error::Schema(
            "approach 2 needs a measured dataset with the gpr_dtheta feature".into(),
        ));
    }
    if measured.rows.is_empty() {
        return Err(Error::EmptyInput("measured dataset".into()));
    }

    let pairs: Vec<(f64, f64)> = measured
        .rows
        .iter()
        .map(|r| (*r.features.last().unwrap(), r.target))
        .collect();
    let map = ThetaMap::fit(&pairs, cfg.method, cfg.seed)?;

    let mut probe_cells: BTreeMap<u32, BTreeSet<usize>> = BTreeMap::new();
    for r in &measured.rows {
        probe_cells.entry(r.plot_id).or_default().insert(r.position_index);
    }

    let mut skips = SimSkips::default();
    let mut rows = Vec::new();
    for profile in profiles {
        let Some(probes) = probe_cells.get(&profile.plot_id) else {
            continue;
        };
        let cells = resample_profile(profile)?;
        let frame = nearest_frame(frames, profile.plot_id, profile.timestamp, time_tolerance_s);
        for (cell, &dtheta) in cells.iter().enumerate().take(CELLS) {
            if probes.contains(&cell) {
                continue;
            }
            let Some(frame) = frame else {
                skips.no_frame_match += 1;
                continue;
            };
            let Some(pixel) = frame.pixels.get(&cell) else {
                skips.missing_pixel += 1;
                continue;
            };
            let theta = map.predict(dtheta)?;
            rows.push(Datapoint {
                plot_id: profile.plot_id,
                timestamp: profile.timestamp,
                position_index: cell,
                features: trim_spectrum(pixel).bands().to_vec(),
                target: theta,
                provenance: Provenance::SimulatedTdr,
                source_dtheta: Some(dtheta),
            });
        }
    }
    rows.sort_by_key(|r| (r.plot_id, r.timestamp, r.position_index));
    Ok(SimOutput {
        dataset: Dataset::new(rows, false)?,
        skips,
        timeseries: BTreeMap::new(),
    })
}
