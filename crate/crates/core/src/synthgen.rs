//! Deterministic synthetic field-campaign generator.
//!
//! Stands in for the unavailable field data: soil moisture follows a
//! smooth per-day irrigation-and-drydown curve plus a small spatial
//! field, delta-theta is coupled to standardized theta with a per-plot
//! target correlation, and spectra encode theta through a fixed
//! water-absorption-like dip plus band noise.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::csv_io;
use crate::data_model::{GprProfile, HyperspectralFrame, RawSpectrum, TdrSample, CELLS, PROFILE_CM, RAW_BANDS};
use crate::error::{Error, Result};
use crate::seeding::derive_seed2;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub n_plots: usize,
    /// TDR probe cell per plot.
    pub probe_positions: Vec<usize>,
    pub n_days: usize,
    /// GPR passes per day and their spacing.
    pub gpr_per_day: usize,
    pub gpr_period_s: i64,
    /// TDR sampling period; defaults to a tenth of the GPR period.
    pub tdr_period_s: Option<i64>,
    pub day_offset_s: i64,
    /// Target Pearson correlation between delta-theta and theta, per plot.
    pub coupling: Vec<f64>,
    /// Reflectance dip per mm of theta at the absorption bands.
    pub dip_scale: f64,
    /// I.i.d. noise per spectral band.
    pub band_noise_sigma: f64,
    /// Within-cell jitter of the 1 cm delta-theta samples.
    pub dtheta_jitter_sigma: f64,
    /// Amplitude of the spatial theta field across cells, in mm.
    pub spatial_amp_mm: f64,
    pub seed: u64,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            n_plots: 4,
            probe_positions: vec![2, 4, 5, 7],
            n_days: 2,
            gpr_per_day: 50,
            gpr_period_s: 600,
            tdr_period_s: None,
            day_offset_s: 86_400,
            coupling: vec![0.95, 0.93, 0.65, 0.0],
            dip_scale: 0.004,
            band_noise_sigma: 0.05,
            dtheta_jitter_sigma: 0.01,
            spatial_amp_mm: 0.2,
            seed: 0,
        }
    }
}

impl CampaignConfig {
    /// Small campaign for quick tests: one day, few passes.
    pub fn small(seed: u64) -> Self {
        Self {
            n_days: 1,
            gpr_per_day: 10,
            seed,
            ..Default::default()
        }
    }

    pub fn tdr_period(&self) -> i64 {
        self.tdr_period_s.unwrap_or(self.gpr_period_s / 10)
    }

    fn validate(&self) -> Result<()> {
        if self.n_plots == 0 || self.n_days == 0 || self.gpr_per_day < 2 {
            return Err(Error::InvalidParam(
                "campaign needs >= 1 plot, >= 1 day and >= 2 GPR passes per day".into(),
            ));
        }
        if self.probe_positions.len() != self.n_plots || self.coupling.len() != self.n_plots {
            return Err(Error::InvalidParam(
                "probe_positions and coupling must have one entry per plot".into(),
            ));
        }
        if self.probe_positions.iter().any(|&p| p >= CELLS) {
            return Err(Error::InvalidParam("probe position out of range 0..10".into()));
        }
        if self.coupling.iter().any(|c| !(-1.0..=1.0).contains(c)) {
            return Err(Error::InvalidParam("couplings must lie in [-1, 1]".into()));
        }
        if self.gpr_period_s <= 0 || self.tdr_period() <= 0 {
            return Err(Error::InvalidParam("periods must be positive".into()));
        }
        Ok(())
    }

    pub fn gpr_times(&self) -> Vec<i64> {
        let mut times = Vec::new();
        for day in 0..self.n_days {
            let start = day as i64 * self.day_offset_s;
            for i in 0..self.gpr_per_day {
                times.push(start + i as i64 * self.gpr_period_s);
            }
        }
        times
    }

    pub fn tdr_times(&self) -> Vec<i64> {
        let span = (self.gpr_per_day as i64 - 1) * self.gpr_period_s;
        let period = self.tdr_period();
        let mut times = Vec::new();
        for day in 0..self.n_days {
            let start = day as i64 * self.day_offset_s;
            let mut t = 0;
            while t <= span {
                times.push(start + t);
                t += period;
            }
        }
        times
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CampaignManifest {
    pub config: CampaignConfig,
    /// Expected rows after assembling the measured dataset.
    pub expected_measured_rows: usize,
    /// Expected rows of the approach-1 extended dataset.
    pub expected_approach1_rows: usize,
    /// Expected rows of the approach-2 dataset.
    pub expected_approach2_rows: usize,
    pub n_gpr_profiles: usize,
    pub n_tdr_samples: usize,
    pub n_frames: usize,
    pub target_couplings: BTreeMap<u32, f64>,
}

#[derive(Debug)]
pub struct Campaign {
    pub frames: Vec<HyperspectralFrame>,
    pub profiles: Vec<GprProfile>,
    pub tdr_samples: Vec<TdrSample>,
    pub manifest: CampaignManifest,
}

/// Ground-truth soil moisture in mm, smooth in time and cell.
fn theta(cfg: &CampaignConfig, plot: u32, cell: usize, t: i64) -> f64 {
    let day_start = (t / cfg.day_offset_s) * cfg.day_offset_s;
    let elapsed = (t - day_start) as f64;
    let tau = 10_800.0;
    let base = 8.0 + 1.5 * plot as f64;
    let drydown = 6.0 * (-elapsed / tau).exp();
    let spatial = cfg.spatial_amp_mm
        * (2.0 * std::f64::consts::PI * cell as f64 / CELLS as f64 + plot as f64).sin();
    base + drydown + spatial
}

/// Raw reflectance of one band before noise: rising soil continuum with a
/// theta-dependent absorption dip around raw band 80.
fn reflectance(cfg: &CampaignConfig, band: usize, theta_mm: f64) -> f64 {
    let continuum = 0.25 + 0.3 * band as f64 / (RAW_BANDS - 1) as f64;
    let dip = (-0.5 * ((band as f64 - 80.0) / 8.0).powi(2)).exp();
    continuum - cfg.dip_scale * dip * theta_mm
}

/// Zero-mean, unit-sample-variance copy of `v`; all-zero if constant.
fn standardize(v: &[f64]) -> Vec<f64> {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    if var == 0.0 {
        return vec![0.0; v.len()];
    }
    let std = var.sqrt();
    v.iter().map(|x| (x - mean) / std).collect()
}

/// Residualize `eps` against the (standardized) `z`, then standardize.
/// The result has zero in-sample correlation with `z`, which pins the
/// mixture correlation to the coupling exactly.
fn orthonormalize(eps: &[f64], z: &[f64]) -> Vec<f64> {
    let n = eps.len() as f64;
    let proj = eps.iter().zip(z).map(|(e, zi)| e * zi).sum::<f64>() / n;
    let resid: Vec<f64> = eps.iter().zip(z).map(|(e, zi)| e - proj * zi).collect();
    let out = standardize(&resid);
    if out.iter().all(|&x| x == 0.0) {
        return eps.to_vec();
    }
    out
}

pub fn generate_campaign(cfg: &CampaignConfig) -> Result<Campaign> {
    cfg.validate()?;
    let gpr_times = cfg.gpr_times();
    let tdr_times = cfg.tdr_times();

    let mut frames = Vec::new();
    let mut profiles = Vec::new();
    let mut tdr_samples = Vec::new();
    let mut target_couplings = BTreeMap::new();

    for plot_idx in 0..cfg.n_plots {
        let plot = plot_idx as u32 + 1;
        let coupling = cfg.coupling[plot_idx];
        let probe = cfg.probe_positions[plot_idx];
        target_couplings.insert(plot, coupling);

        // Per (cell, time-series): standardized theta plus a noise series
        // residualized against it, so the in-sample correlation of the
        // mixture equals the configured coupling exactly (up to jitter).
        let mut eps_rng = ChaCha8Rng::seed_from_u64(derive_seed2(cfg.seed, 1, plot as u64));
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        let n_times = gpr_times.len();
        let mut z_series = vec![vec![0.0; n_times]; CELLS];
        let mut e_series = vec![vec![0.0; n_times]; CELLS];
        for cell in 0..CELLS {
            let th: Vec<f64> = gpr_times.iter().map(|&t| theta(cfg, plot, cell, t)).collect();
            z_series[cell] = standardize(&th);
            let eps: Vec<f64> = (0..n_times).map(|_| normal.sample(&mut eps_rng)).collect();
            e_series[cell] = orthonormalize(&eps, &z_series[cell]);
        }

        // TDR record at the probe cell.
        for &t in &tdr_times {
            tdr_samples.push(TdrSample {
                plot_id: plot,
                timestamp: t,
                depth_cm: 5,
                position_index: probe,
                theta: theta(cfg, plot, probe, t),
            });
        }

        // GPR profiles: the coupled mixture per (time, cell) is shared by
        // the ten 1 cm samples of the cell, plus tiny per-sample jitter.
        let mut jitter_rng = ChaCha8Rng::seed_from_u64(derive_seed2(cfg.seed, 2, plot as u64));
        for (ti, &t) in gpr_times.iter().enumerate() {
            let mut values = Vec::with_capacity(PROFILE_CM);
            for cell in 0..CELLS {
                let mixed = coupling * z_series[cell][ti]
                    + (1.0 - coupling * coupling).sqrt() * e_series[cell][ti];
                for _ in 0..CELLS {
                    let jitter = cfg.dtheta_jitter_sigma * normal.sample(&mut jitter_rng);
                    values.push(mixed + jitter);
                }
            }
            profiles.push(GprProfile::new(plot, t, (0..PROFILE_CM as u32).collect(), values)?);
        }

        // One hyperspectral frame per TDR time, all ten cells.
        let mut band_rng = ChaCha8Rng::seed_from_u64(derive_seed2(cfg.seed, 3, plot as u64));
        for &t in &tdr_times {
            let mut pixels = BTreeMap::new();
            for cell in 0..CELLS {
                let th = theta(cfg, plot, cell, t);
                let bands: Vec<f64> = (0..RAW_BANDS)
                    .map(|b| {
                        let noise = cfg.band_noise_sigma * normal.sample(&mut band_rng);
                        (reflectance(cfg, b, th) + noise).max(0.0)
                    })
                    .collect();
                pixels.insert(cell, RawSpectrum::new(bands)?);
            }
            frames.push(HyperspectralFrame::new(plot, t, pixels)?);
        }
    }

    let n_gpr = gpr_times.len();
    let n_tdr = tdr_times.len();
    let manifest = CampaignManifest {
        config: cfg.clone(),
        expected_measured_rows: cfg.n_plots * n_gpr,
        expected_approach1_rows: cfg.n_plots * n_tdr,
        expected_approach2_rows: cfg.n_plots * n_gpr * (CELLS - 1),
        n_gpr_profiles: cfg.n_plots * n_gpr,
        n_tdr_samples: cfg.n_plots * n_tdr,
        n_frames: cfg.n_plots * n_tdr,
        target_couplings,
    };
    Ok(Campaign {
        frames,
        profiles,
        tdr_samples,
        manifest,
    })
}

/// Emit hsi.csv, gpr.csv, tdr.csv and manifest.json into `dir`.
pub fn write_campaign(campaign: &Campaign, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    csv_io::write_hsi(&dir.join("hsi.csv"), &campaign.frames)?;
    csv_io::write_gpr(&dir.join("gpr.csv"), &campaign.profiles)?;
    csv_io::write_tdr(&dir.join("tdr.csv"), &campaign.tdr_samples)?;
    fs::write(
        dir.join("manifest.json"),
        serde_json::to_string_pretty(&campaign.manifest)?,
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_model::{assemble_measured_dataset, resample_profile, trim_spectrum};
    use crate::metrics::pearson;

    #[test]
    fn same_seed_same_campaign() {
        let cfg = CampaignConfig::small(5);
        let a = generate_campaign(&cfg).unwrap();
        let b = generate_campaign(&cfg).unwrap();
        assert_eq!(a.profiles[3].delta_theta, b.profiles[3].delta_theta);
        assert_eq!(
            a.frames[2].pixels[&0].bands(),
            b.frames[2].pixels[&0].bands()
        );
        assert_eq!(a.tdr_samples.len(), b.tdr_samples.len());
    }

    #[test]
    fn exact_coupling_with_zero_noise() {
        let cfg = CampaignConfig {
            coupling: vec![1.0; 4],
            dtheta_jitter_sigma: 0.0,
            ..CampaignConfig::small(1)
        };
        let campaign = generate_campaign(&cfg).unwrap();
        for plot in 1..=4u32 {
            let probe = cfg.probe_positions[plot as usize - 1];
            let mut d = Vec::new();
            let mut th = Vec::new();
            for p in campaign.profiles.iter().filter(|p| p.plot_id == plot) {
                d.push(resample_profile(p).unwrap()[probe]);
                th.push(theta(&cfg, plot, probe, p.timestamp));
            }
            let r = pearson(&d, &th).unwrap();
            assert!((r - 1.0).abs() < 1e-9, "plot {plot}: r = {r}");
        }
    }

    #[test]
    fn zero_coupling_stays_near_zero() {
        let cfg = CampaignConfig {
            n_plots: 1,
            probe_positions: vec![4],
            coupling: vec![0.0],
            n_days: 2,
            gpr_per_day: 100,
            ..CampaignConfig::default()
        };
        let campaign = generate_campaign(&cfg).unwrap();
        let probe = 4;
        let mut d = Vec::new();
        let mut th = Vec::new();
        for p in &campaign.profiles {
            d.push(resample_profile(p).unwrap()[probe]);
            th.push(theta(&cfg, 1, probe, p.timestamp));
        }
        assert_eq!(d.len(), 200);
        let r = pearson(&d, &th).unwrap();
        assert!(r.abs() < 0.15, "r = {r}");
    }

    #[test]
    fn assembled_row_count_matches_manifest() {
        let cfg = CampaignConfig::small(3);
        let campaign = generate_campaign(&cfg).unwrap();
        let (ds, skips) = assemble_measured_dataset(
            &campaign.frames,
            &campaign.profiles,
            &campaign.tdr_samples,
            600,
        )
        .unwrap();
        assert_eq!(skips.total(), 0);
        assert_eq!(ds.rows.len(), campaign.manifest.expected_measured_rows);
    }

    #[test]
    fn spectra_monotone_in_theta_at_absorption_bands() {
        let cfg = CampaignConfig {
            band_noise_sigma: 0.0,
            ..CampaignConfig::small(0)
        };
        for band in 65..=95 {
            let lo = reflectance(&cfg, band, 8.0);
            let hi = reflectance(&cfg, band, 16.0);
            assert!(hi < lo, "band {band}: no dip response");
        }
        // and the trimmed feature indices line up with raw bands 65..=95
        let campaign = generate_campaign(&cfg).unwrap();
        let s = trim_spectrum(&campaign.frames[0].pixels[&0]);
        assert_eq!(s.bands().len(), 115);
    }

    #[test]
    fn empirical_coupling_close_to_target() {
        let cfg = CampaignConfig::default();
        let campaign = generate_campaign(&cfg).unwrap();
        let (ds, _) = assemble_measured_dataset(
            &campaign.frames,
            &campaign.profiles,
            &campaign.tdr_samples,
            300,
        )
        .unwrap();
        let report = crate::eval::correlate_plots(&ds).unwrap();
        for (plot, &target) in &campaign.manifest.target_couplings {
            let r = report.per_plot[plot];
            assert!(
                (r - target).abs() <= 0.1,
                "plot {plot}: r = {r}, target {target}"
            );
        }
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut cfg = CampaignConfig::default();
        cfg.coupling = vec![2.0; 4];
        assert!(generate_campaign(&cfg).is_err());
        let mut cfg = CampaignConfig::default();
        cfg.probe_positions = vec![4];
        assert!(generate_campaign(&cfg).is_err());
    }
}
