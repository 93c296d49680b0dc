//! Soil-moisture estimation from fused hyperspectral, GPR and TDR data.
//!
//! The pipeline ingests a sparse multi-sensor campaign, extends it by
//! simulating either GPR delta-theta along the time axis or TDR soil
//! moisture along the GPR profiles, trains an extremely-randomized-trees
//! regressor and reports R², RMSE, Pearson correlations and feature
//! importance.

pub mod csv_io;
pub mod data_model;
pub mod error;
pub mod eval;
pub mod forest;
pub mod interp;
pub mod linear;
pub mod metrics;
pub mod seeding;
pub mod simulate;
pub mod synthgen;

pub use data_model::{
    assemble_measured_dataset, resample_profile, trim_spectrum, Datapoint, Dataset, GprProfile,
    HyperspectralFrame, Provenance, RawSpectrum, Spectrum, TdrSample,
};
pub use error::{Error, Result};
pub use eval::{
    correlate_plots, run_experiment, run_experiment_with, split_with_fraction, train_test_split,
    EvalReport, Experiment,
};
pub use forest::{
    feature_importance, fit_extra_trees, fit_extra_trees_sequential, predict_forest, ForestModel,
    ForestParams,
};
pub use interp::{add_gaussian_noise, interp1};
pub use linear::{fit_linear, predict_linear, LinearModel};
pub use metrics::{pearson, r2, rmse};
pub use simulate::{simulate_gpr, simulate_tdr, SimConfig, SimMethod};
pub use synthgen::{generate_campaign, write_campaign, CampaignConfig};
