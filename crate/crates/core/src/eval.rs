//! Train/test splitting, per-plot correlation analysis, and the
//! experiment drivers producing the evaluation reports.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data_model::Dataset;
use crate::error::{Error, Result};
use crate::forest::{fit_extra_trees, predict_forest, ForestParams};
use crate::metrics::{pearson, r2, rmse};
use crate::seeding::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Baseline,
    Approach1,
    Approach2,
}

impl std::fmt::Display for Experiment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Experiment::Baseline => "baseline",
            Experiment::Approach1 => "approach1",
            Experiment::Approach2 => "approach2",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Experiment {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(Experiment::Baseline),
            "approach1" => Ok(Experiment::Approach1),
            "approach2" => Ok(Experiment::Approach2),
            other => Err(Error::InvalidParam(format!("unknown experiment '{other}'"))),
        }
    }
}

/// Seeded 1:1 split: uniform shuffle, first ceil(n/2) rows train.
pub fn train_test_split(ds: &Dataset, seed: u64) -> Result<(Dataset, Dataset)> {
    split_with_fraction(ds, seed, 0.5)
}

/// Seeded split with a configurable training fraction.
pub fn split_with_fraction(ds: &Dataset, seed: u64, train_fraction: f64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidParam(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let n = ds.rows.len();
    if n < 2 {
        return Err(Error::EmptyInput(format!("split needs >= 2 rows, have {n}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let n_train = ((n as f64 * train_fraction).ceil() as usize).clamp(1, n - 1);
    let pick = |ids: &[usize]| Dataset {
        rows: ids.iter().map(|&i| ds.rows[i].clone()).collect(),
        schema: ds.schema.clone(),
        target_name: ds.target_name.clone(),
    };
    Ok((pick(&order[..n_train]), pick(&order[n_train..])))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrelationReport {
    /// Pearson r between delta-theta and theta, per plot.
    pub per_plot: BTreeMap<u32, f64>,
    /// Plots where the correlation is undefined, with the reason.
    pub omitted: BTreeMap<u32, String>,
    pub overall: f64,
}

/// Correlation between the measured delta-theta
/// feature and the theta target, per plot and pooled.
pub fn correlate_plots(ds: &Dataset) -> Result<CorrelationReport> {
    if !ds.has_dtheta_feature() {
        return Err(Error::Schema(
            "correlation analysis needs the gpr_dtheta feature".into(),
        ));
    }
    let mut by_plot: BTreeMap<u32, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    let mut all_d = Vec::new();
    let mut all_t = Vec::new();
    for row in &ds.rows {
        let d = *row.features.last().unwrap();
        let entry = by_plot.entry(row.plot_id).or_default();
        entry.0.push(d);
        entry.1.push(row.target);
        all_d.push(d);
        all_t.push(row.target);
    }
    let mut per_plot = BTreeMap::new();
    let mut omitted = BTreeMap::new();
    for (plot, (d, t)) in by_plot {
        if d.len() < 2 {
            omitted.insert(plot, format!("only {} datapoint(s)", d.len()));
            continue;
        }
        match pearson(&d, &t) {
            Ok(r) => {
                per_plot.insert(plot, r);
            }
            Err(Error::UndefinedMetric(_)) => {
                omitted.insert(plot, "undefined (zero variance)".into());
            }
            Err(e) => return Err(e),
        }
    }
    let overall = pearson(&all_d, &all_t)?;
    Ok(CorrelationReport { per_plot, omitted, overall })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub experiment: Experiment,
    /// Simulation method behind the evaluated dataset, when known.
    pub method: Option<String>,
    pub r2: f64,
    pub rmse: f64,
    /// Importance of the delta-theta feature; present iff that feature
    /// entered the regression.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fi_gpr: Option<f64>,
    /// Pearson r between predictions and targets on the test rows.
    pub pearson_per_plot: BTreeMap<u32, f64>,
    pub pearson_all: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
}

/// Split, fit the extra-trees regressor on the training half, and score
/// the held-out half. The split and the forest consume seeds derived from
/// the one experiment seed.
pub fn run_experiment(
    ds: &Dataset,
    experiment: Experiment,
    seed: u64,
    forest: ForestParams,
    method: Option<String>,
) -> Result<EvalReport> {
    run_experiment_with(ds, experiment, seed, forest, method, 0.5)
}

/// [`run_experiment`] with a non-default training fraction.
pub fn run_experiment_with(
    ds: &Dataset,
    experiment: Experiment,
    seed: u64,
    forest: ForestParams,
    method: Option<String>,
    train_fraction: f64,
) -> Result<EvalReport> {
    let ds = match experiment {
        Experiment::Baseline => ds.without_dtheta(),
        Experiment::Approach1 => {
            if !ds.has_dtheta_feature() {
                return Err(Error::Schema(
                    "approach 1 evaluation needs the gpr_dtheta feature".into(),
                ));
            }
            ds.clone()
        }
        Experiment::Approach2 => {
            if ds.has_dtheta_feature() {
                return Err(Error::Schema(
                    "approach 2 evaluation expects spectrum-only features".into(),
                ));
            }
            ds.clone()
        }
    };

    let (train, test) = split_with_fraction(&ds, derive_seed(seed, 1), train_fraction)?;
    let params = ForestParams { seed: derive_seed(seed, 2), ..forest };
    let model = fit_extra_trees(&train.feature_matrix(), &train.targets(), params)?;
    let y_true = test.targets();
    let y_pred = predict_forest(&model, &test.feature_matrix())?;

    let fi_gpr = ds
        .has_dtheta_feature()
        .then(|| *model.feature_importances.last().unwrap());

    let mut by_plot: BTreeMap<u32, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for (row, (&t, &p)) in test.rows.iter().zip(y_true.iter().zip(&y_pred)) {
        let entry = by_plot.entry(row.plot_id).or_default();
        entry.0.push(t);
        entry.1.push(p);
    }
    let mut pearson_per_plot = BTreeMap::new();
    for (plot, (t, p)) in by_plot {
        if t.len() >= 2 {
            if let Ok(r) = pearson(&t, &p) {
                pearson_per_plot.insert(plot, r);
            }
        }
    }

    Ok(EvalReport {
        experiment,
        method,
        r2: r2(&y_true, &y_pred)?,
        rmse: rmse(&y_true, &y_pred)?,
        fi_gpr,
        pearson_all: pearson(&y_true, &y_pred)?,
        pearson_per_plot,
        n_train: train.rows.len(),
        n_test: test.rows.len(),
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_model::{Datapoint, Provenance, BANDS};
    use rand::Rng;

    fn make_dataset(n: usize, with_dtheta: bool, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = (0..n)
            .map(|i| {
                let theta = rng.random::<f64>() * 10.0 + 5.0;
                let mut features: Vec<f64> =
                    (0..BANDS).map(|_| rng.random::<f64>()).collect();
                if with_dtheta {
                    // strongly informative last feature
                    features.push(theta + 0.01 * rng.random::<f64>());
                }
                Datapoint {
                    plot_id: (i % 4) as u32 + 1,
                    timestamp: i as i64,
                    position_index: 4,
                    features,
                    target: theta,
                    provenance: Provenance::Measured,
                    source_dtheta: None,
                }
            })
            .collect();
        Dataset::new(rows, with_dtheta).unwrap()
    }

    #[test]
    fn split_sizes_and_partition() {
        for n in [10, 11] {
            let ds = make_dataset(n, true, 1);
            let (train, test) = train_test_split(&ds, 5).unwrap();
            assert_eq!(train.rows.len(), n.div_ceil(2));
            assert_eq!(test.rows.len(), n / 2);
            let mut ts: Vec<i64> = train
                .rows
                .iter()
                .chain(&test.rows)
                .map(|r| r.timestamp)
                .collect();
            ts.sort();
            assert_eq!(ts, (0..n as i64).collect::<Vec<_>>());
        }
    }

    #[test]
    fn split_is_deterministic() {
        let ds = make_dataset(20, true, 2);
        let (a, _) = train_test_split(&ds, 7).unwrap();
        let (b, _) = train_test_split(&ds, 7).unwrap();
        let ids = |d: &Dataset| d.rows.iter().map(|r| r.timestamp).collect::<Vec<_>>();
        assert_eq!(ids(&a), ids(&b));
    }

    #[test]
    fn split_rejects_tiny_dataset() {
        let ds = make_dataset(1, true, 3);
        assert!(train_test_split(&ds, 0).is_err());
    }

    #[test]
    fn correlate_exact_affine_relation() {
        let mut ds = make_dataset(40, true, 4);
        for r in &mut ds.rows {
            let last = r.features.len() - 1;
            r.features[last] = r.target - 5.0;
        }
        let report = correlate_plots(&ds).unwrap();
        for (_, r) in &report.per_plot {
            assert!((r - 1.0).abs() < 1e-9);
        }
        assert!((report.overall - 1.0).abs() < 1e-9);
    }

    #[test]
    fn correlate_omits_constant_plot() {
        let mut ds = make_dataset(40, true, 5);
        for r in &mut ds.rows {
            if r.plot_id == 2 {
                r.target = 7.0;
            }
        }
        let report = correlate_plots(&ds).unwrap();
        assert!(!report.per_plot.contains_key(&2));
        assert!(report.omitted[&2].contains("undefined"));
    }

    #[test]
    fn experiment_with_perfect_feature_scores_high() {
        let ds = make_dataset(500, true, 6);
        let params = ForestParams { n_trees: 50, ..Default::default() };
        let report =
            run_experiment(&ds, Experiment::Approach1, 11, params, Some("et".into())).unwrap();
        assert!(report.r2 >= 0.9, "r2 = {}", report.r2);
        assert!(report.fi_gpr.unwrap() > 0.5);
        assert_eq!(report.n_train + report.n_test, 500);
    }

    #[test]
    fn approach2_report_has_no_fi() {
        let ds = make_dataset(60, false, 7);
        let params = ForestParams { n_trees: 10, ..Default::default() };
        let report = run_experiment(&ds, Experiment::Approach2, 3, params, None).unwrap();
        assert!(report.fi_gpr.is_none());
        let json = serde_json::to_string(&report).unwrap();
        assert!(!json.contains("fi_gpr"));
    }

    #[test]
    fn experiment_schema_mismatch_errors() {
        let with = make_dataset(20, true, 8);
        let without = make_dataset(20, false, 9);
        let params = ForestParams { n_trees: 2, ..Default::default() };
        assert!(run_experiment(&without, Experiment::Approach1, 0, params, None).is_err());
        assert!(run_experiment(&with, Experiment::Approach2, 0, params, None).is_err());
    }

    #[test]
    fn baseline_strips_dtheta() {
        let ds = make_dataset(40, true, 10);
        let params = ForestParams { n_trees: 5, ..Default::default() };
        let report = run_experiment(&ds, Experiment::Baseline, 1, params, None).unwrap();
        assert!(report.fi_gpr.is_none());
    }
}
