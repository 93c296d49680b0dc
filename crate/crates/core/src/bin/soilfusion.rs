//! Command-line entry point: generate synthetic campaigns, run the
//! correlation analysis, extend datasets by simulation, and evaluate the
//! soil-moisture regression.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use soilfusion::csv_io;
use soilfusion::data_model::{assemble_measured_dataset, Dataset};
use soilfusion::error::{Error, Result};
use soilfusion::eval::{correlate_plots, run_experiment_with, Experiment};
use soilfusion::forest::ForestParams;
use soilfusion::simulate::{
    simulate_gpr, simulate_tdr, SimConfig, SimMethod, SimOutput, SimulationManifest,
};
use soilfusion::synthgen::{generate_campaign, write_campaign, CampaignConfig};

#[derive(Parser)]
#[command(name = "soilfusion", version, about = "Soil-moisture estimation from fused hyperspectral, GPR and TDR data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic field campaign (hsi.csv, gpr.csv, tdr.csv, manifest.json)
    Generate(GenerateArgs),
    /// Pearson correlation between measured delta-theta and theta, per plot
    Correlate(CorrelateArgs),
    /// Extend the measured dataset by simulating GPR or TDR data
    Simulate(SimulateArgs),
    /// Train the extra-trees regressor on a dataset and report R2/RMSE
    Eval(EvalArgs),
    /// Run generate, both simulations and all evaluations in one go
    Pipeline(PipelineArgs),
}

#[derive(Args, Clone, Serialize)]
struct SeedArg {
    /// Root random seed; falls back to $SOILFUSION_SEED, then 0
    #[arg(long)]
    seed: Option<u64>,
}

impl SeedArg {
    fn resolve(&self) -> Result<u64> {
        if let Some(seed) = self.seed {
            return Ok(seed);
        }
        match std::env::var("SOILFUSION_SEED") {
            Ok(v) => v
                .parse()
                .map_err(|_| Error::InvalidParam(format!("SOILFUSION_SEED='{v}' is not a valid seed"))),
            Err(_) => Ok(0),
        }
    }
}

#[derive(Args, Clone, Serialize)]
struct GenerateArgs {
    /// Output directory for the campaign files
    #[arg(long = "out")]
    out_dir: PathBuf,
    /// Campaign configuration JSON; defaults to the built-in campaign
    #[arg(long)]
    campaign_config: Option<PathBuf>,
    #[command(flatten)]
    seed: SeedArg,
}

#[derive(Args, Clone, Serialize)]
struct CorrelateArgs {
    /// Directory holding hsi.csv, gpr.csv and tdr.csv
    #[arg(long = "in")]
    in_dir: PathBuf,
    #[arg(long = "out")]
    out_dir: PathBuf,
    /// Matching window between GPR, TDR and hyperspectral timestamps
    #[arg(long = "time-tolerance", default_value_t = 600)]
    time_tolerance_s: i64,
}

#[derive(Args, Clone, Serialize)]
struct SimulateArgs {
    /// Directory holding hsi.csv, gpr.csv and tdr.csv
    #[arg(long = "in")]
    in_dir: PathBuf,
    #[arg(long = "out")]
    out_dir: PathBuf,
    /// Which data to simulate: gpr (approach 1) or tdr (approach 2)
    #[arg(long)]
    approach: ApproachArg,
    /// interpolation, linreg or et
    #[arg(long = "sim-method", default_value = "interpolation")]
    sim_method: SimMethod,
    /// Noise added to interpolated delta-theta; default 0.1 x per-plot std
    #[arg(long = "noise-sigma")]
    noise_sigma: Option<f64>,
    /// Feed the spectrum into the theta -> delta-theta regression
    #[arg(long = "use-spectrum-features")]
    use_spectrum_features: bool,
    /// Keep interpolation within single measurement days
    #[arg(long = "no-bridge-gaps")]
    no_bridge_gaps: bool,
    #[arg(long = "time-tolerance", default_value_t = 600)]
    time_tolerance_s: i64,
    #[command(flatten)]
    seed: SeedArg,
}

#[derive(Clone, Copy, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
enum ApproachArg {
    Gpr,
    Tdr,
}

#[derive(Args, Clone, Serialize)]
struct EvalArgs {
    /// Directory holding dataset.csv (a simulate or assemble output)
    #[arg(long = "in")]
    in_dir: PathBuf,
    #[arg(long = "out")]
    out_dir: PathBuf,
    /// baseline, approach1 or approach2
    #[arg(long)]
    experiment: Experiment,
    #[command(flatten)]
    forest: ForestArgs,
    /// Training fraction of the train/test split
    #[arg(long, default_value_t = 0.5)]
    ratio: f64,
    #[command(flatten)]
    seed: SeedArg,
}

#[derive(Args, Clone, Serialize)]
struct ForestArgs {
    /// Number of trees in the ensemble
    #[arg(long = "trees", default_value_t = 100)]
    n_trees: usize,
    /// Candidate features per split; default: all
    #[arg(long = "kfeat")]
    k_features: Option<usize>,
    /// Minimum node size eligible for splitting
    #[arg(long = "min-split", default_value_t = 5)]
    min_samples_split: usize,
}

impl ForestArgs {
    fn params(&self, seed: u64) -> ForestParams {
        ForestParams {
            n_trees: self.n_trees,
            k_features: self.k_features,
            min_samples_split: self.min_samples_split,
            seed,
        }
    }
}

#[derive(Args, Clone, Serialize)]
struct PipelineArgs {
    #[arg(long = "out")]
    out_dir: PathBuf,
    #[arg(long)]
    campaign_config: Option<PathBuf>,
    #[command(flatten)]
    forest: ForestArgs,
    #[arg(long = "time-tolerance", default_value_t = 600)]
    time_tolerance_s: i64,
    #[command(flatten)]
    seed: SeedArg,
}

fn main() {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Generate(args) => cmd_generate(&args),
        Command::Correlate(args) => cmd_correlate(&args),
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Eval(args) => cmd_eval(&args),
        Command::Pipeline(args) => cmd_pipeline(&args),
    };
    if let Err(e) = outcome {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

/// Serialize to a temp file, then rename into place.
fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn write_config_echo<T: Serialize>(dir: &Path, subcommand: &str, args: &T, seed: u64) -> Result<()> {
    let mut args = serde_json::to_value(args)?;
    if let Some(map) = args.as_object_mut() {
        // The echo lives inside the output directory, and recording
        // absolute paths would break byte-identical reruns elsewhere.
        map.remove("out_dir");
        if let Some(in_dir) = map.get_mut("in_dir") {
            let name = in_dir
                .as_str()
                .map(|s| Path::new(s).file_name().unwrap_or_default().to_string_lossy().into_owned());
            *in_dir = serde_json::json!(name);
        }
    }
    let echo = serde_json::json!({
        "subcommand": subcommand,
        "args": args,
        "resolved_seed": seed,
        "version": env!("CARGO_PKG_VERSION"),
    });
    write_atomic(&dir.join("config_echo.json"), &serde_json::to_string_pretty(&echo)?)
}

fn load_campaign_config(path: &Option<PathBuf>, seed: u64) -> Result<CampaignConfig> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p)?;
            Ok(serde_json::from_str(&text)?)
        }
        None => Ok(CampaignConfig { seed, ..Default::default() }),
    }
}

fn cmd_generate(args: &GenerateArgs) -> Result<()> {
    let seed = args.seed.resolve()?;
    let cfg = load_campaign_config(&args.campaign_config, seed)?;
    let campaign = generate_campaign(&cfg)?;
    fs::create_dir_all(&args.out_dir)?;
    write_campaign(&campaign, &args.out_dir)?;
    write_config_echo(&args.out_dir, "generate", args, seed)?;
    println!(
        "wrote campaign: {} frames, {} profiles, {} TDR samples -> {}",
        campaign.frames.len(),
        campaign.profiles.len(),
        campaign.tdr_samples.len(),
        args.out_dir.display()
    );
    Ok(())
}

struct Inputs {
    frames: Vec<soilfusion::HyperspectralFrame>,
    profiles: Vec<soilfusion::GprProfile>,
    tdr_samples: Vec<soilfusion::TdrSample>,
}

fn read_inputs(dir: &Path) -> Result<Inputs> {
    Ok(Inputs {
        frames: csv_io::read_hsi(&dir.join("hsi.csv"))?,
        profiles: csv_io::read_gpr(&dir.join("gpr.csv"))?,
        tdr_samples: csv_io::read_tdr(&dir.join("tdr.csv"))?,
    })
}

fn assemble(inputs: &Inputs, tolerance: i64) -> Result<Dataset> {
    let (ds, skips) = assemble_measured_dataset(
        &inputs.frames,
        &inputs.profiles,
        &inputs.tdr_samples,
        tolerance,
    )?;
    if skips.total() > 0 {
        eprintln!("note: {} unmatched (profile, probe) pairs skipped", skips.total());
    }
    Ok(ds)
}

fn cmd_correlate(args: &CorrelateArgs) -> Result<()> {
    let inputs = read_inputs(&args.in_dir)?;
    let ds = assemble(&inputs, args.time_tolerance_s)?;
    let report = correlate_plots(&ds)?;

    let mut out = String::from("plot,r\n");
    for (plot, r) in &report.per_plot {
        out.push_str(&format!("{plot},{r}\n"));
    }
    for (plot, note) in &report.omitted {
        eprintln!("note: plot {plot} omitted: {note}");
    }
    out.push_str(&format!("all,{}\n", report.overall));
    fs::create_dir_all(&args.out_dir)?;
    write_atomic(&args.out_dir.join("correlation.csv"), &out)?;
    write_atomic(
        &args.out_dir.join("correlation.json"),
        &serde_json::to_string_pretty(&report)?,
    )?;
    write_config_echo(&args.out_dir, "correlate", args, 0)?;
    println!("pooled r = {:.4} over {} rows", report.overall, ds.rows.len());
    Ok(())
}

fn run_simulation(args: &SimulateArgs, seed: u64) -> Result<(SimOutput, SimConfig, &'static str)> {
    let inputs = read_inputs(&args.in_dir)?;
    let measured = assemble(&inputs, args.time_tolerance_s)?;
    let cfg = SimConfig {
        method: args.sim_method,
        noise_sigma: args.noise_sigma,
        seed,
        use_spectrum_features: args.use_spectrum_features,
        bridge_gaps: !args.no_bridge_gaps,
    };
    match args.approach {
        ApproachArg::Gpr => {
            let out = simulate_gpr(
                &measured,
                &inputs.tdr_samples,
                &inputs.frames,
                &cfg,
                args.time_tolerance_s,
            )?;
            Ok((out, cfg, "gpr"))
        }
        ApproachArg::Tdr => {
            let out = simulate_tdr(
                &measured,
                &inputs.profiles,
                &inputs.frames,
                &cfg,
                args.time_tolerance_s,
            )?;
            Ok((out, cfg, "tdr"))
        }
    }
}

fn write_simulation(out_dir: &Path, output: &SimOutput, cfg: &SimConfig, approach: &str) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    let dataset_path = out_dir.join("dataset.csv");
    let tmp = dataset_path.with_extension("tmp");
    csv_io::write_dataset(&tmp, &output.dataset)?;
    fs::rename(&tmp, &dataset_path)?;

    let manifest = SimulationManifest::for_output(approach, cfg, output);
    write_atomic(
        &out_dir.join("simulation_manifest.json"),
        &serde_json::to_string_pretty(&manifest)?,
    )?;

    for ((plot, pos), points) in &output.timeseries {
        let mut text = String::from("time,measured_dtheta,simulated_dtheta\n");
        for p in points {
            let fmt = |v: &Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            text.push_str(&format!(
                "{},{},{}\n",
                p.timestamp,
                fmt(&p.measured_dtheta),
                fmt(&p.simulated_dtheta)
            ));
        }
        write_atomic(&out_dir.join(format!("timeseries_{plot}_{pos}.csv")), &text)?;
    }
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let seed = args.seed.resolve()?;
    let (output, cfg, approach) = run_simulation(args, seed)?;
    write_simulation(&args.out_dir, &output, &cfg, approach)?;
    write_config_echo(&args.out_dir, "simulate", args, seed)?;
    println!(
        "wrote {} rows ({} skips) -> {}",
        output.dataset.rows.len(),
        output.skips.no_frame_match + output.skips.missing_pixel + output.skips.outside_span,
        args.out_dir.display()
    );
    Ok(())
}

fn sim_method_of(dir: &Path) -> Option<String> {
    let text = fs::read_to_string(dir.join("simulation_manifest.json")).ok()?;
    let v: serde_json::Value = serde_json::from_str(&text).ok()?;
    Some(v.get("method")?.as_str()?.to_string())
}

fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let seed = args.seed.resolve()?;
    let ds = csv_io::read_dataset(&args.in_dir.join("dataset.csv"))?;
    let report = run_experiment_with(
        &ds,
        args.experiment,
        seed,
        args.forest.params(seed),
        sim_method_of(&args.in_dir),
        args.ratio,
    )?;
    fs::create_dir_all(&args.out_dir)?;
    write_atomic(
        &args.out_dir.join("report.json"),
        &serde_json::to_string_pretty(&report)?,
    )?;
    append_report_csv(&args.out_dir.join("report.csv"), &report)?;
    write_config_echo(&args.out_dir, "eval", args, seed)?;
    println!(
        "{} r2={:.4} rmse={:.4} n_train={} n_test={}",
        report.experiment, report.r2, report.rmse, report.n_train, report.n_test
    );
    Ok(())
}

fn append_report_csv(path: &Path, report: &soilfusion::EvalReport) -> Result<()> {
    let header = "experiment,method,r2,rmse,fi_gpr,pearson_all,n_train,n_test,seed\n";
    let mut text = if path.exists() {
        fs::read_to_string(path)?
    } else {
        header.to_string()
    };
    text.push_str(&format!(
        "{},{},{},{},{},{},{},{},{}\n",
        report.experiment,
        report.method.clone().unwrap_or_default(),
        report.r2,
        report.rmse,
        report.fi_gpr.map(|v| v.to_string()).unwrap_or_default(),
        report.pearson_all,
        report.n_train,
        report.n_test,
        report.seed
    ));
    write_atomic(path, &text)
}

fn cmd_pipeline(args: &PipelineArgs) -> Result<()> {
    let seed = args.seed.resolve()?;
    let out = &args.out_dir;
    fs::create_dir_all(out)?;

    let campaign_dir = out.join("campaign");
    cmd_generate(&GenerateArgs {
        out_dir: campaign_dir.clone(),
        campaign_config: args.campaign_config.clone(),
        seed: SeedArg { seed: Some(seed) },
    })?;
    cmd_correlate(&CorrelateArgs {
        in_dir: campaign_dir.clone(),
        out_dir: out.join("correlation"),
        time_tolerance_s: args.time_tolerance_s,
    })?;

    let methods = [SimMethod::Interpolation, SimMethod::LinearRegression, SimMethod::EtRegression];
    for (approach, experiment) in [(ApproachArg::Gpr, Experiment::Approach1), (ApproachArg::Tdr, Experiment::Approach2)] {
        for method in methods {
            let tag = match approach {
                ApproachArg::Gpr => "approach1",
                ApproachArg::Tdr => "approach2",
            };
            let sim_dir = out.join(format!("sim_{tag}_{method}"));
            cmd_simulate(&SimulateArgs {
                in_dir: campaign_dir.clone(),
                out_dir: sim_dir.clone(),
                approach,
                sim_method: method,
                noise_sigma: None,
                use_spectrum_features: false,
                no_bridge_gaps: false,
                time_tolerance_s: args.time_tolerance_s,
                seed: SeedArg { seed: Some(seed) },
            })?;
            cmd_eval(&EvalArgs {
                in_dir: sim_dir,
                out_dir: out.join(format!("eval_{tag}_{method}")),
                experiment,
                forest: args.forest.clone(),
                ratio: 0.5,
                seed: SeedArg { seed: Some(seed) },
            })?;
        }
    }

    // Baseline: approach-1 rows, delta-theta column dropped.
    cmd_eval(&EvalArgs {
        in_dir: out.join("sim_approach1_interpolation"),
        out_dir: out.join("eval_baseline"),
        experiment: Experiment::Baseline,
        forest: args.forest.clone(),
        ratio: 0.5,
        seed: SeedArg { seed: Some(seed) },
    })?;

    write_config_echo(out, "pipeline", args, seed)?;
    println!("pipeline complete -> {}", out.display());
    Ok(())
}
