//! Flat CSV ingestion and emission for the field-campaign file formats.
//!
//! All files are UTF-8, comma-delimited, '.' decimal separator, with a
//! header row:
//! - `tdr.csv`:  plot_id,timestamp,depth_cm,position_index,theta
//! - `gpr.csv`:  plot_id,timestamp,position_cm,delta_theta (one row per 1 cm sample)
//! - `hsi.csv`:  plot_id,timestamp,position_index,band_000..band_124
//! - `dataset.csv`: plot_id,timestamp,position_index,provenance,b005..b119[,gpr_dtheta],theta

use std::collections::BTreeMap;
use std::path::Path;

use crate::data_model::{
    Datapoint, Dataset, GprProfile, HyperspectralFrame, Provenance, RawSpectrum, TdrSample,
    BANDS, RAW_BANDS,
};
use crate::error::{Error, Result};

pub fn read_tdr(path: &Path) -> Result<Vec<TdrSample>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut samples = Vec::new();
    for record in reader.deserialize() {
        let sample: TdrSample = record?;
        sample.validate()?;
        samples.push(sample);
    }
    Ok(samples)
}

pub fn write_tdr(path: &Path, samples: &[TdrSample]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    for s in samples {
        writer.serialize(s)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_gpr(path: &Path) -> Result<Vec<GprProfile>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut grouped: BTreeMap<(u32, i64), Vec<(u32, f64)>> = BTreeMap::new();
    for record in reader.deserialize() {
        let (plot_id, timestamp, position_cm, delta_theta): (u32, i64, u32, f64) = record?;
        grouped
            .entry((plot_id, timestamp))
            .or_default()
            .push((position_cm, delta_theta));
    }
    grouped
        .into_iter()
        .map(|((plot_id, timestamp), mut rows)| {
            rows.sort_by_key(|r| r.0);
            let (positions, values) = rows.into_iter().unzip();
            GprProfile::new(plot_id, timestamp, positions, values)
        })
        .collect()
}

pub fn write_gpr(path: &Path, profiles: &[GprProfile]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["plot_id", "timestamp", "position_cm", "delta_theta"])?;
    for p in profiles {
        for (&pos, &v) in p.positions_cm.iter().zip(&p.delta_theta) {
            writer.write_record(&[
                p.plot_id.to_string(),
                p.timestamp.to_string(),
                pos.to_string(),
                v.to_string(),
            ])?;
        }
    }
    writer.flush()?;
    Ok(())
}

pub fn read_hsi(path: &Path) -> Result<Vec<HyperspectralFrame>> {
    let mut reader = csv::Reader::from_path(path)?;
    let header = reader.headers()?.clone();
    if header.len() != 3 + RAW_BANDS {
        return Err(Error::Schema(format!(
            "{}: expected {} columns, found {}",
            path.display(),
            3 + RAW_BANDS,
            header.len()
        )));
    }
    let mut grouped: BTreeMap<(u32, i64), BTreeMap<usize, RawSpectrum>> = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        let plot_id: u32 = parse_field(&record, 0, path)?;
        let timestamp: i64 = parse_field(&record, 1, path)?;
        let position: usize = parse_field(&record, 2, path)?;
        let bands = (0..RAW_BANDS)
            .map(|b| parse_field(&record, 3 + b, path))
            .collect::<Result<Vec<f64>>>()?;
        grouped
            .entry((plot_id, timestamp))
            .or_default()
            .insert(position, RawSpectrum::new(bands)?);
    }
    grouped
        .into_iter()
        .map(|((plot_id, timestamp), pixels)| HyperspectralFrame::new(plot_id, timestamp, pixels))
        .collect()
}

fn parse_field<T: std::str::FromStr>(record: &csv::StringRecord, i: usize, path: &Path) -> Result<T> {
    let raw = record
        .get(i)
        .ok_or_else(|| Error::Schema(format!("{}: missing column {i}", path.display())))?;
    raw.parse().map_err(|_| {
        Error::Schema(format!("{}: cannot parse '{raw}' in column {i}", path.display()))
    })
}

pub fn write_hsi(path: &Path, frames: &[HyperspectralFrame]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    let mut header = vec!["plot_id".to_string(), "timestamp".into(), "position_index".into()];
    header.extend((0..RAW_BANDS).map(|b| format!("band_{b:03}")));
    writer.write_record(&header)?;
    for f in frames {
        for (pos, spectrum) in &f.pixels {
            let mut record = vec![
                f.plot_id.to_string(),
                f.timestamp.to_string(),
                pos.to_string(),
            ];
            record.extend(spectrum.bands().iter().map(|v| v.to_string()));
            writer.write_record(&record)?;
        }
    }
    writer.flush()?;
    Ok(())
}

pub fn write_dataset(path: &Path, ds: &Dataset) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    let mut header = vec![
        "plot_id".to_string(),
        "timestamp".into(),
        "position_index".into(),
        "provenance".into(),
    ];
    header.extend(ds.schema.iter().cloned());
    header.push(ds.target_name.clone());
    writer.write_record(&header)?;
    for row in &ds.rows {
        let mut record = vec![
            row.plot_id.to_string(),
            row.timestamp.to_string(),
            row.position_index.to_string(),
            row.provenance.to_string(),
        ];
        record.extend(row.features.iter().map(|v| v.to_string()));
        record.push(row.target.to_string());
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let mut reader = csv::Reader::from_path(path)?;
    let header = reader.headers()?.clone();
    let with_dtheta = match header.len() {
        n if n == 5 + BANDS => false,
        n if n == 6 + BANDS => true,
        n => {
            return Err(Error::Schema(format!(
                "{}: unexpected column count {n} for a dataset file",
                path.display()
            )))
        }
    };
    let n_features = BANDS + usize::from(with_dtheta);
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let plot_id: u32 = parse_field(&record, 0, path)?;
        let timestamp: i64 = parse_field(&record, 1, path)?;
        let position_index: usize = parse_field(&record, 2, path)?;
        let provenance: Provenance = parse_field(&record, 3, path)?;
        let features = (0..n_features)
            .map(|i| parse_field(&record, 4 + i, path))
            .collect::<Result<Vec<f64>>>()?;
        let target: f64 = parse_field(&record, 4 + n_features, path)?;
        rows.push(Datapoint {
            plot_id,
            timestamp,
            position_index,
            features,
            target,
            provenance,
            source_dtheta: None,
        });
    }
    Dataset::new(rows, with_dtheta)
}
