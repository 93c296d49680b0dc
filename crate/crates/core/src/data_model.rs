//! Measurement types for the fused soil-moisture dataset: hyperspectral
//! pixels, GPR soil-moisture-variation profiles and TDR reference probes,
//! plus the operations that fuse them into one feature table.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bands delivered by the snapshot camera before trimming.
pub const RAW_BANDS: usize = 125;
/// Bands kept after dropping the first and last five.
pub const BANDS: usize = 115;
/// First raw band kept (0-based).
pub const TRIM_START: usize = 5;
/// 10 cm cells along the 1 m profile line.
pub const CELLS: usize = 10;
/// 1 cm GPR sample positions along the line.
pub const PROFILE_CM: usize = 100;

/// Untrimmed 125-band reflectance spectrum of one pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSpectrum {
    bands: Vec<f64>,
}

impl RawSpectrum {
    pub fn new(bands: Vec<f64>) -> Result<Self> {
        if bands.len() != RAW_BANDS {
            return Err(Error::Schema(format!(
                "raw spectrum has {} bands, expected {}",
                bands.len(),
                RAW_BANDS
            )));
        }
        if !bands.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("raw spectrum".into()));
        }
        Ok(Self { bands })
    }

    pub fn bands(&self) -> &[f64] {
        &self.bands
    }
}

/// Trimmed 115-band spectrum (raw bands 5..=119).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    bands: Vec<f64>,
}

impl Spectrum {
    pub fn new(bands: Vec<f64>) -> Result<Self> {
        if bands.len() != BANDS {
            return Err(Error::Schema(format!(
                "spectrum has {} bands, expected {}",
                bands.len(),
                BANDS
            )));
        }
        if !bands.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("spectrum".into()));
        }
        Ok(Self { bands })
    }

    pub fn bands(&self) -> &[f64] {
        &self.bands
    }
}

/// Drop the first five and last five raw bands to suppress sensor artifacts.
pub fn trim_spectrum(raw: &RawSpectrum) -> Spectrum {
    Spectrum {
        bands: raw.bands[TRIM_START..TRIM_START + BANDS].to_vec(),
    }
}

/// One hyperspectral snapshot of a plot: raw spectra keyed by the 10 cm
/// cell index along the profile line.
#[derive(Debug, Clone)]
pub struct HyperspectralFrame {
    pub plot_id: u32,
    pub timestamp: i64,
    pub pixels: BTreeMap<usize, RawSpectrum>,
}

impl HyperspectralFrame {
    pub fn new(plot_id: u32, timestamp: i64, pixels: BTreeMap<usize, RawSpectrum>) -> Result<Self> {
        if timestamp < 0 {
            return Err(Error::Schema(format!(
                "frame plot {plot_id}: negative timestamp {timestamp}"
            )));
        }
        if let Some(pos) = pixels.keys().find(|&&p| p >= CELLS) {
            return Err(Error::Schema(format!(
                "frame plot {plot_id} t={timestamp}: position index {pos} out of range 0..{CELLS}"
            )));
        }
        Ok(Self {
            plot_id,
            timestamp,
            pixels,
        })
    }
}

/// Soil-moisture variations derived from one GPR pass, at 1 cm spacing.
#[derive(Debug, Clone)]
pub struct GprProfile {
    pub plot_id: u32,
    pub timestamp: i64,
    pub positions_cm: Vec<u32>,
    pub delta_theta: Vec<f64>,
}

impl GprProfile {
    pub fn new(
        plot_id: u32,
        timestamp: i64,
        positions_cm: Vec<u32>,
        delta_theta: Vec<f64>,
    ) -> Result<Self> {
        if positions_cm.len() != delta_theta.len() {
            return Err(Error::Schema(format!(
                "profile plot {plot_id} t={timestamp}: {} positions but {} values",
                positions_cm.len(),
                delta_theta.len()
            )));
        }
        if !positions_cm.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Schema(format!(
                "profile plot {plot_id} t={timestamp}: positions not strictly increasing"
            )));
        }
        if positions_cm.iter().any(|&p| p as usize >= PROFILE_CM) {
            return Err(Error::Schema(format!(
                "profile plot {plot_id} t={timestamp}: position beyond {PROFILE_CM} cm line"
            )));
        }
        if !delta_theta.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite(format!("profile plot {plot_id} t={timestamp}")));
        }
        Ok(Self {
            plot_id,
            timestamp,
            positions_cm,
            delta_theta,
        })
    }
}

/// Mean delta-theta per 10 cm cell, matching the hyperspectral resolution.
pub fn resample_profile(profile: &GprProfile) -> Result<[f64; CELLS]> {
    let mut sums = [0.0; CELLS];
    let mut counts = [0usize; CELLS];
    for (&pos, &v) in profile.positions_cm.iter().zip(&profile.delta_theta) {
        let cell = pos as usize / CELLS;
        sums[cell] += v;
        counts[cell] += 1;
    }
    let mut out = [0.0; CELLS];
    for cell in 0..CELLS {
        if counts[cell] == 0 {
            return Err(Error::EmptyCell {
                plot_id: profile.plot_id,
                timestamp: profile.timestamp,
                cell,
            });
        }
        out[cell] = sums[cell] / counts[cell] as f64;
    }
    Ok(out)
}

/// One TDR reading: soil moisture in mm at 5 cm depth at a fixed probe cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TdrSample {
    pub plot_id: u32,
    pub timestamp: i64,
    pub depth_cm: u32,
    pub position_index: usize,
    pub theta: f64,
}

impl TdrSample {
    pub fn validate(&self) -> Result<()> {
        if self.depth_cm != 5 {
            return Err(Error::Schema(format!(
                "tdr plot {} t={}: depth {} cm, expected 5",
                self.plot_id, self.timestamp, self.depth_cm
            )));
        }
        if !self.theta.is_finite() || self.theta < 0.0 {
            return Err(Error::Schema(format!(
                "tdr plot {} t={}: invalid theta {}",
                self.plot_id, self.timestamp, self.theta
            )));
        }
        if self.position_index >= CELLS {
            return Err(Error::Schema(format!(
                "tdr plot {} t={}: position index {} out of range",
                self.plot_id, self.timestamp, self.position_index
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Measured,
    SimulatedGpr,
    SimulatedTdr,
}

impl std::fmt::Display for Provenance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Provenance::Measured => "measured",
            Provenance::SimulatedGpr => "simulated_gpr",
            Provenance::SimulatedTdr => "simulated_tdr",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Provenance {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "measured" => Ok(Provenance::Measured),
            "simulated_gpr" => Ok(Provenance::SimulatedGpr),
            "simulated_tdr" => Ok(Provenance::SimulatedTdr),
            other => Err(Error::Schema(format!("unknown provenance '{other}'"))),
        }
    }
}

/// One fused row: 115 spectral bands, optionally one delta-theta feature,
/// and a soil-moisture target.
#[derive(Debug, Clone)]
pub struct Datapoint {
    pub plot_id: u32,
    pub timestamp: i64,
    pub position_index: usize,
    pub features: Vec<f64>,
    pub target: f64,
    pub provenance: Provenance,
    /// Delta-theta the row was simulated from (approach-2 metadata only).
    pub source_dtheta: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub rows: Vec<Datapoint>,
    pub schema: Vec<String>,
    pub target_name: String,
}

/// Feature-column names: b005..b119, plus gpr_dtheta when present.
pub fn feature_schema(with_dtheta: bool) -> Vec<String> {
    let mut schema: Vec<String> = (TRIM_START..TRIM_START + BANDS)
        .map(|b| format!("b{b:03}"))
        .collect();
    if with_dtheta {
        schema.push("gpr_dtheta".into());
    }
    schema
}

impl Dataset {
    pub fn new(rows: Vec<Datapoint>, with_dtheta: bool) -> Result<Self> {
        let schema = feature_schema(with_dtheta);
        let ds = Self {
            rows,
            schema,
            target_name: "theta".into(),
        };
        ds.check_uniform()?;
        Ok(ds)
    }

    fn check_uniform(&self) -> Result<()> {
        let d = self.schema.len();
        for row in &self.rows {
            if row.features.len() != d {
                return Err(Error::Schema(format!(
                    "row plot {} t={} has {} features, schema has {}",
                    row.plot_id,
                    row.timestamp,
                    row.features.len(),
                    d
                )));
            }
            if !row.features.iter().all(|v| v.is_finite()) || !row.target.is_finite() {
                return Err(Error::NonFinite(format!(
                    "row plot {} t={}",
                    row.plot_id, row.timestamp
                )));
            }
        }
        Ok(())
    }

    pub fn n_features(&self) -> usize {
        self.schema.len()
    }

    pub fn has_dtheta_feature(&self) -> bool {
        self.schema.last().map(String::as_str) == Some("gpr_dtheta")
    }

    pub fn feature_matrix(&self) -> Vec<Vec<f64>> {
        self.rows.iter().map(|r| r.features.clone()).collect()
    }

    pub fn targets(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.target).collect()
    }

    /// Copy of the dataset with the trailing delta-theta column removed.
    pub fn without_dtheta(&self) -> Dataset {
        if !self.has_dtheta_feature() {
            return self.clone();
        }
        let rows = self
            .rows
            .iter()
            .map(|r| {
                let mut row = r.clone();
                row.features.truncate(BANDS);
                row
            })
            .collect();
        Dataset {
            rows,
            schema: feature_schema(false),
            target_name: self.target_name.clone(),
        }
    }
}

/// Pairs dropped during assembly, with the reason.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SkipReport {
    pub no_tdr_match: usize,
    pub no_frame_match: usize,
    pub missing_pixel: usize,
}

impl SkipReport {
    pub fn total(&self) -> usize {
        self.no_tdr_match + self.no_frame_match + self.missing_pixel
    }
}

fn nearest_by_time<'a, T>(items: impl Iterator<Item = &'a T>, time: impl Fn(&T) -> i64, t: i64, tol: i64) -> Option<&'a T> {
    items
        .map(|item| ((time(item) - t).abs(), item))
        .filter(|(dt, _)| *dt <= tol)
        .min_by_key(|(dt, _)| *dt)
        .map(|(_, item)| item)
}

/// Fuse GPR profiles with nearest-in-time TDR readings and hyperspectral
/// frames of the same plot. One row per (profile, probe cell) pair that
/// matches within the tolerance; unmatched pairs are counted, not fatal.
pub fn assemble_measured_dataset(
    frames: &[HyperspectralFrame],
    profiles: &[GprProfile],
    tdr_samples: &[TdrSample],
    time_tolerance_s: i64,
) -> Result<(Dataset, SkipReport)> {
    if time_tolerance_s <= 0 {
        return Err(Error::InvalidParam(format!(
            "time tolerance must be positive, got {time_tolerance_s}"
        )));
    }
    for s in tdr_samples {
        s.validate()?;
    }

    // Probe cells per plot, taken from where TDR readings exist.
    let mut probe_cells: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for s in tdr_samples {
        let cells = probe_cells.entry(s.plot_id).or_default();
        if !cells.contains(&s.position_index) {
            cells.push(s.position_index);
        }
    }

    let mut skips = SkipReport::default();
    let mut rows = Vec::new();
    for profile in profiles {
        let cells = resample_profile(profile)?;
        let Some(positions) = probe_cells.get(&profile.plot_id) else {
            continue;
        };
        for &pos in positions {
            let tdr = nearest_by_time(
                tdr_samples
                    .iter()
                    .filter(|s| s.plot_id == profile.plot_id && s.position_index == pos),
                |s| s.timestamp,
                profile.timestamp,
                time_tolerance_s,
            );
            let Some(tdr) = tdr else {
                skips.no_tdr_match += 1;
                continue;
            };
            let frame = nearest_by_time(
                frames.iter().filter(|f| f.plot_id == profile.plot_id),
                |f| f.timestamp,
                profile.timestamp,
                time_tolerance_s,
            );
            let Some(frame) = frame else {
                skips.no_frame_match += 1;
                continue;
            };
            let Some(pixel) = frame.pixels.get(&pos) else {
                skips.missing_pixel += 1;
                continue;
            };
            let mut features = trim_spectrum(pixel).bands().to_vec();
            features.push(cells[pos]);
            rows.push(Datapoint {
                plot_id: profile.plot_id,
                timestamp: profile.timestamp,
                position_index: pos,
                features,
                target: tdr.theta,
                provenance: Provenance::Measured,
                source_dtheta: None,
            });
        }
    }
    rows.sort_by_key(|r| (r.plot_id, r.timestamp, r.position_index));
    Ok((Dataset::new(rows, true)?, skips))
}
