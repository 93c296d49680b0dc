//! Acceptance suite: one test per criterion, each printing a pass/fail
//! line. Run with `cargo test --test acceptance -- --nocapture`.

use std::path::Path;
use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use soilfusion::data_model::{assemble_measured_dataset, Dataset};
use soilfusion::eval::{correlate_plots, run_experiment, Experiment};
use soilfusion::forest::{
    fit_extra_trees, fit_extra_trees_sequential, predict_forest, ForestParams,
};
use soilfusion::interp::interp1;
use soilfusion::linear::{fit_linear, RIDGE_LAMBDA};
use soilfusion::metrics::{pearson, r2, rmse};
use soilfusion::simulate::{simulate_gpr, simulate_tdr, SimConfig, SimMethod};
use soilfusion::synthgen::{generate_campaign, Campaign, CampaignConfig};
use soilfusion::EvalReport;

fn report(criterion: &str, pass: bool, detail: &str) {
    println!(
        "[{}] criterion {criterion}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} failed: {detail}");
}

// ---------- criterion 1: metric oracle equivalence ----------

fn brute_r2(y: &[f64], p: &[f64]) -> f64 {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for i in 0..y.len() {
        ss_res += (y[i] - p[i]) * (y[i] - p[i]);
        ss_tot += (y[i] - mean) * (y[i] - mean);
    }
    1.0 - ss_res / ss_tot
}

fn brute_rmse(y: &[f64], p: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..y.len() {
        acc += (y[i] - p[i]) * (y[i] - p[i]);
    }
    (acc / y.len() as f64).sqrt()
}

fn brute_pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for i in 0..a.len() {
        cov += (a[i] - ma) * (b[i] - mb);
        va += (a[i] - ma) * (a[i] - ma);
        vb += (b[i] - mb) * (b[i] - mb);
    }
    cov / (va.sqrt() * vb.sqrt())
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

#[test]
fn criterion_1_metric_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let len = rng.random_range(3..=500);
        let a: Vec<f64> = (0..len).map(|_| rng.random::<f64>() * 20.0 - 10.0).collect();
        let b: Vec<f64> = (0..len).map(|_| rng.random::<f64>() * 20.0 - 10.0).collect();
        for (ours, oracle) in [
            (r2(&a, &b).unwrap(), brute_r2(&a, &b)),
            (rmse(&a, &b).unwrap(), brute_rmse(&a, &b)),
            (pearson(&a, &b).unwrap(), brute_pearson(&a, &b)),
        ] {
            let rel = (ours - oracle).abs() / ours.abs().max(oracle.abs()).max(1.0);
            worst = worst.max(rel);
            assert!(rel_close(ours, oracle, 1e-12), "{ours} vs {oracle}");
        }
    }
    let elapsed = start.elapsed();
    report(
        "1",
        elapsed.as_secs_f64() < 5.0,
        &format!(
            "metrics match brute-force oracles on 1000 pairs (worst rel {worst:.2e}) in {:.2}s",
            elapsed.as_secs_f64()
        ),
    );
}

// ---------- criterion 2: ET correctness suite ----------

#[test]
fn criterion_2_extra_trees_suite() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let n = 500;
    let x: Vec<Vec<f64>> = (0..n)
        .map(|_| vec![rng.random::<f64>(), rng.random::<f64>()])
        .collect();
    let y: Vec<f64> = x.iter().map(|r| r[0]).collect();

    // (a) predictions bounded by training targets on 10,000 random queries
    let params = ForestParams { n_trees: 100, seed: 5, ..Default::default() };
    let model = fit_extra_trees(&x, &y, params).unwrap();
    let lo = y.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let queries: Vec<Vec<f64>> = (0..10_000)
        .map(|_| vec![rng.random::<f64>() * 6.0 - 3.0, rng.random::<f64>() * 6.0 - 3.0])
        .collect();
    let bounded = predict_forest(&model, &queries)
        .unwrap()
        .iter()
        .all(|&p| p >= lo && p <= hi);

    // (b) n_min >= n collapses to the exact mean
    let big_min = ForestParams { n_trees: 1, min_samples_split: n + 1, seed: 6, ..Default::default() };
    let stump = fit_extra_trees(&x, &y, big_min).unwrap();
    let mean = y.iter().sum::<f64>() / n as f64;
    let exact_mean = predict_forest(&stump, &queries[..100].to_vec())
        .unwrap()
        .iter()
        .all(|&p| p == mean);

    // (c) sequential == parallel
    let deterministic =
        fit_extra_trees_sequential(&x, &y, params).unwrap() == model;

    // (d) informative feature recovered on held-out data
    let x_test: Vec<Vec<f64>> = (0..200)
        .map(|_| vec![rng.random::<f64>(), rng.random::<f64>()])
        .collect();
    let y_test: Vec<f64> = x_test.iter().map(|r| r[0]).collect();
    let held_out_r2 = r2(&y_test, &predict_forest(&model, &x_test).unwrap()).unwrap();
    let fi = &model.feature_importances;
    let fi_ok = fi[0] >= 0.8 && (fi.iter().sum::<f64>() - 1.0).abs() < 1e-9;

    let elapsed = start.elapsed();
    report(
        "2",
        bounded && exact_mean && deterministic && held_out_r2 >= 0.9 && fi_ok
            && elapsed.as_secs_f64() < 30.0,
        &format!(
            "bounded={bounded} exact_mean={exact_mean} deterministic={deterministic} \
             r2={held_out_r2:.3} fi0={:.3} in {:.2}s",
            fi[0],
            elapsed.as_secs_f64()
        ),
    );
}

// ---------- criterion 3: OLS oracle ----------

/// Ridge normal equations on the augmented [X | 1] system, with the
/// intercept unpenalized, solved by plain Gauss-Jordan elimination.
fn ols_oracle(x: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let d = x[0].len();
    let m = d + 1;
    let mut a = vec![vec![0.0; m + 1]; m];
    for row in 0..n {
        let aug: Vec<f64> = x[row].iter().cloned().chain([1.0]).collect();
        for i in 0..m {
            for j in 0..m {
                a[i][j] += aug[i] * aug[j];
            }
            a[i][m] += aug[i] * y[row];
        }
    }
    for (i, row) in a.iter_mut().enumerate().take(d) {
        row[i] += RIDGE_LAMBDA;
    }
    for col in 0..m {
        let pivot = (col..m).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, pivot);
        let div = a[col][col];
        for v in &mut a[col] {
            *v /= div;
        }
        for row in 0..m {
            if row != col {
                let f = a[row][col];
                for j in 0..=m {
                    a[row][j] -= f * a[col][j];
                }
            }
        }
    }
    a.iter().map(|row| row[m]).collect()
}

#[test]
fn criterion_3_ols_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let d = rng.random_range(1..=8);
        let n = rng.random_range(d * 3 + 2..=60);
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect())
            .collect();
        let true_w: Vec<f64> = (0..d).map(|_| rng.random::<f64>() * 3.0 - 1.5).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|row| {
                row.iter().zip(&true_w).map(|(v, w)| v * w).sum::<f64>()
                    + 0.5
                    + 0.1 * (rng.random::<f64>() - 0.5)
            })
            .collect();
        let model = fit_linear(&x, &y).unwrap();
        let oracle = ols_oracle(&x, &y);
        for i in 0..d {
            let rel = (model.weights[i] - oracle[i]).abs()
                / model.weights[i].abs().max(oracle[i].abs()).max(1.0);
            worst = worst.max(rel);
            assert!(rel < 1e-6, "weight {i}: {} vs {}", model.weights[i], oracle[i]);
        }
        let rel_b = (model.intercept - oracle[d]).abs() / oracle[d].abs().max(1.0);
        worst = worst.max(rel_b);
        assert!(rel_b < 1e-6);
    }
    report(
        "3",
        true,
        &format!("coefficients match ridge-normal-equations oracle on 100 problems (worst rel {worst:.2e})"),
    );
}

// ---------- criterion 4: interpolation exactness ----------

#[test]
fn criterion_4_interpolation_exactness() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut ok = true;
    for _ in 0..200 {
        let slope = rng.random::<f64>() * 10.0 - 5.0;
        let offset = rng.random::<f64>() * 10.0 - 5.0;
        let mut xs: Vec<f64> = (0..20).map(|_| rng.random::<f64>() * 100.0).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        let ys: Vec<f64> = xs.iter().map(|x| slope * x + offset).collect();
        let queries: Vec<f64> = (0..50)
            .map(|_| xs[0] + rng.random::<f64>() * (xs[xs.len() - 1] - xs[0]))
            .collect();
        let got = interp1(&xs, &ys, &queries).unwrap();
        for (q, g) in queries.iter().zip(&got) {
            let expect = slope * q + offset;
            if (g - expect).abs() > 1e-12 * expect.abs().max(1.0) {
                ok = false;
            }
        }
        let clamped = interp1(&xs, &ys, &[-1e300, 1e300]).unwrap();
        if clamped != vec![ys[0], ys[ys.len() - 1]] {
            ok = false;
        }
    }
    report("4", ok, "affine functions reproduced at interior queries; endpoints clamp");
}

// ---------- shared default campaign for criteria 5-8 ----------

struct CampaignFixture {
    campaign: Campaign,
    measured: Dataset,
    reports: Vec<(Experiment, SimMethod, EvalReport)>,
}

fn fixture() -> &'static CampaignFixture {
    static FIXTURE: OnceLock<CampaignFixture> = OnceLock::new();
    FIXTURE.get_or_init(|| {
        let cfg = CampaignConfig::default();
        let campaign = generate_campaign(&cfg).unwrap();
        let (measured, skips) = assemble_measured_dataset(
            &campaign.frames,
            &campaign.profiles,
            &campaign.tdr_samples,
            600,
        )
        .unwrap();
        assert_eq!(skips.total(), 0);

        let methods = [SimMethod::Interpolation, SimMethod::LinearRegression, SimMethod::EtRegression];
        let forest = ForestParams::default();
        let mut reports = Vec::new();
        for method in methods {
            let sim_cfg = SimConfig { method, seed: 0, ..Default::default() };
            let a1 = simulate_gpr(&measured, &campaign.tdr_samples, &campaign.frames, &sim_cfg, 600)
                .unwrap();
            let r = run_experiment(&a1.dataset, Experiment::Approach1, 0, forest, None).unwrap();
            reports.push((Experiment::Approach1, method, r));
            if method == SimMethod::Interpolation {
                let r = run_experiment(&a1.dataset, Experiment::Baseline, 0, forest, None).unwrap();
                reports.push((Experiment::Baseline, method, r));
            }
            let a2 = simulate_tdr(&measured, &campaign.profiles, &campaign.frames, &sim_cfg, 600)
                .unwrap();
            let r = run_experiment(&a2.dataset, Experiment::Approach2, 0, forest, None).unwrap();
            reports.push((Experiment::Approach2, method, r));
        }
        CampaignFixture { campaign, measured, reports }
    })
}

fn r2_of(fx: &CampaignFixture, experiment: Experiment, method: SimMethod) -> f64 {
    fx.reports
        .iter()
        .find(|(e, m, _)| *e == experiment && *m == method)
        .map(|(_, _, r)| r.r2)
        .unwrap()
}

// ---------- criterion 5: simulation determinism and identity ----------

#[test]
fn criterion_5_simulation_determinism() {
    let fx = fixture();
    let cfg = SimConfig { noise_sigma: Some(0.0), seed: 1, ..Default::default() };
    let out = simulate_gpr(&fx.measured, &fx.campaign.tdr_samples, &fx.campaign.frames, &cfg, 600)
        .unwrap();

    // measured knots reproduced exactly
    let mut identity = true;
    let knots: std::collections::HashMap<(u32, usize, i64), f64> = fx
        .measured
        .rows
        .iter()
        .map(|r| ((r.plot_id, r.position_index, r.timestamp), *r.features.last().unwrap()))
        .collect();
    for row in &out.dataset.rows {
        if let Some(&v) = knots.get(&(row.plot_id, row.position_index, row.timestamp)) {
            if *row.features.last().unwrap() != v {
                identity = false;
            }
        }
    }

    // byte-identical repeated runs
    let dir = tempfile::tempdir().unwrap();
    let cfg = SimConfig { seed: 3, ..Default::default() };
    let write = |name: &str| {
        let out = simulate_gpr(
            &fx.measured,
            &fx.campaign.tdr_samples,
            &fx.campaign.frames,
            &cfg,
            600,
        )
        .unwrap();
        let path = dir.path().join(name);
        soilfusion::csv_io::write_dataset(&path, &out.dataset).unwrap();
        std::fs::read(path).unwrap()
    };
    let byte_identical = write("a.csv") == write("b.csv");

    report(
        "5",
        identity && byte_identical,
        &format!("knot identity={identity}, repeated runs byte-identical={byte_identical}"),
    );
}

// ---------- criterion 6: delta-theta lifts accuracy over spectra alone ----------

#[test]
fn criterion_6_approach1_beats_baseline() {
    let start = Instant::now();
    let fx = fixture();
    let baseline = r2_of(fx, Experiment::Baseline, SimMethod::Interpolation);
    assert!(fx.measured.rows.len() >= 400, "campaign too small");
    let mut ok = true;
    let mut detail = format!("baseline r2={baseline:.3}");
    for method in [SimMethod::Interpolation, SimMethod::LinearRegression, SimMethod::EtRegression] {
        let r2 = r2_of(fx, Experiment::Approach1, method);
        let fi = fx
            .reports
            .iter()
            .find(|(e, m, _)| *e == Experiment::Approach1 && *m == method)
            .and_then(|(_, _, r)| r.fi_gpr)
            .unwrap();
        detail.push_str(&format!(", {method}: r2={r2:.3} fi={fi:.3}"));
        if r2 - baseline < 0.10 || fi <= 0.1 {
            ok = false;
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    report("6", ok && elapsed < 60.0, &format!("{detail} ({elapsed:.1}s)"));
}

// ---------- criterion 7: approach 2 performs worse ----------

#[test]
fn criterion_7_approach2_below_approach1() {
    let fx = fixture();
    let mut ok = true;
    let mut detail = String::new();
    for method in [SimMethod::Interpolation, SimMethod::LinearRegression, SimMethod::EtRegression] {
        let a1 = r2_of(fx, Experiment::Approach1, method);
        let a2 = r2_of(fx, Experiment::Approach2, method);
        detail.push_str(&format!("{method}: {a2:.3} < {a1:.3}; "));
        if a2 >= a1 {
            ok = false;
        }
    }
    report("7", ok, &detail);
}

// ---------- criterion 8: correlation structure ----------

#[test]
fn criterion_8_correlation_structure() {
    let fx = fixture();
    let corr = correlate_plots(&fx.measured).unwrap();
    let couplings = &fx.campaign.manifest.target_couplings;
    let mut ok = true;
    let mut detail = String::new();
    for (plot, &target) in couplings {
        let r = corr.per_plot[plot];
        detail.push_str(&format!("plot {plot}: r={r:.3} (target {target}); "));
        if (r - target).abs() > 0.1 {
            ok = false;
        }
    }
    let lo = couplings.values().cloned().fold(f64::INFINITY, f64::min);
    let hi = couplings.values().cloned().fold(f64::NEG_INFINITY, f64::max);
    detail.push_str(&format!("pooled r={:.3} in ({lo}, {hi})", corr.overall));
    if !(corr.overall > lo && corr.overall < hi) {
        ok = false;
    }
    report("8", ok, &detail);
}

// ---------- criterion 9: end-to-end pipeline ----------

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                files.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    files.sort();
    files
}

#[test]
fn criterion_9_end_to_end_pipeline() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let run = |out: &Path| {
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_soilfusion"))
            .args(["pipeline", "--seed", "0", "--out"])
            .arg(out)
            .output()
            .unwrap();
        assert!(
            status.status.success(),
            "pipeline failed: {}",
            String::from_utf8_lossy(&status.stderr)
        );
    };
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run(&a);
    run(&b);

    // all six (approach x method) cells emit parsable reports
    let mut reports_ok = true;
    for tag in [
        "approach1_interpolation",
        "approach1_linreg",
        "approach1_et",
        "approach2_interpolation",
        "approach2_linreg",
        "approach2_et",
    ] {
        let path = a.join(format!("eval_{tag}")).join("report.json");
        let parsed: Result<EvalReport, _> =
            serde_json::from_str(&std::fs::read_to_string(&path).unwrap());
        if parsed.is_err() {
            reports_ok = false;
        }
    }
    let echo_ok = a.join("config_echo.json").exists();
    let reproducible = snapshot(&a) == snapshot(&b);
    let elapsed = start.elapsed().as_secs_f64();
    report(
        "9",
        reports_ok && echo_ok && reproducible && elapsed < 120.0,
        &format!(
            "reports_ok={reports_ok} config_echo={echo_ok} byte_identical_rerun={reproducible} ({elapsed:.1}s for two runs)"
        ),
    );
}
