//! Acceptance suite: one PASS/FAIL line per criterion, details indented below.
//! Exits non-zero when any criterion fails.

mod published;

use std::path::PathBuf;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use tobitm::bootstrap::bootstrap_bmse;
use tobitm::first_stage::fit_first_stage;
use tobitm::monte_carlo::{child_seed, grid_seed, SimReport, PARAM_NAMES};
use tobitm::{fit, generate, run_experiment, Dataset64, DgpConfig, ErrorFamily, Intercept, LossSpec, SimOptions, SimplexConfig};
use tobitm_cli::{
    commands::bootstrap_columns, bootstrap_command, fit_command, simulate_command, BootstrapRequest, DataSource, FitRequest,
    OptimizerOverrides, Roles, SimulateRequest,
};

struct Outcome {
    pass: bool,
    summary: String,
    details: Vec<String>,
}

impl Outcome {
    fn new(pass: bool, summary: impl Into<String>) -> Self {
        Self { pass, summary: summary.into(), details: Vec::new() }
    }
}

fn report(id: &str, title: &str, elapsed: Duration, o: &Outcome) {
    let tag = if o.pass { "PASS" } else { "FAIL" };
    println!("[{tag}] {id} {title}: {} ({:.1}s)", o.summary, elapsed.as_secs_f64());
    for d in &o.details {
        println!("       {d}");
    }
}

fn losses() -> [LossSpec<f64>; 3] {
    [LossSpec::clad(), LossSpec::wme(1.35).unwrap(), LossSpec::log_cosh()]
}

// ---- independent oracles ----

fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

fn normal_equations(rows: &[Vec<f64>], y: &[f64]) -> Option<Vec<f64>> {
    let k = rows[0].len();
    let mut a = vec![vec![0.0; k]; k];
    let mut b = vec![0.0; k];
    for (r, &yi) in rows.iter().zip(y) {
        for i in 0..k {
            b[i] += r[i] * yi;
            for j in 0..k {
                a[i][j] += r[i] * r[j];
            }
        }
    }
    solve(a, b)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// L1 regression minimum over all basic solutions (exact for LAD).
fn lad_by_enumeration(rows: &[Vec<f64>], y: &[f64]) -> f64 {
    let (n, k) = (rows.len(), rows[0].len());
    let mut idx: Vec<usize> = (0..k).collect();
    let mut best = f64::INFINITY;
    loop {
        let a = idx.iter().map(|&i| rows[i].clone()).collect();
        let b = idx.iter().map(|&i| y[i]).collect();
        if let Some(beta) = solve(a, b) {
            let f = rows.iter().zip(y).map(|(r, yi)| (yi - dot(r, &beta)).abs()).sum::<f64>() / n as f64;
            best = best.min(f);
        }
        let mut j = k;
        loop {
            if j == 0 {
                return best;
            }
            j -= 1;
            if idx[j] < n - k + j {
                break;
            }
        }
        idx[j] += 1;
        for m in j + 1..k {
            idx[m] = idx[m - 1] + 1;
        }
    }
}

fn design_rows(f: &tobitm::MEstimateFit64) -> Vec<Vec<f64>> {
    (0..f.design.nrows()).map(|i| f.design.row(i).to_vec()).collect()
}

// ---- criteria ----

fn c1_first_stage() -> Outcome {
    let mut worst = 0.0f64;
    let mut state = 0x9e37_79b9_7f4a_7c15u64;
    let mut unif = move || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    for t in 0..100 {
        let p = 1 + t % 3;
        let n = 8 + (unif() * 42.0) as usize;
        let x = DMatrix::from_fn(n, p, |_, _| unif() * 4.0 - 2.0);
        let z1 = DVector::from_fn(n, |_, _| unif());
        let w = DVector::from_fn(n, |i, _| 1.3 * z1[i] + x[(i, 0)] + unif() - 0.5);
        let y = DVector::from_fn(n, |_, _| unif());
        let ds = Dataset64::from_columns(y, x, w.clone(), z1, 0.0, Intercept::Prepend).unwrap();
        let fs = fit_first_stage(&ds).unwrap();
        let z = ds.instrument_matrix();
        let rows: Vec<Vec<f64>> = z.row_iter().map(|r| r.iter().copied().collect()).collect();
        let oracle = normal_equations(&rows, w.as_slice()).unwrap();
        for (a, b) in fs.delta_hat.delta.iter().zip(&oracle) {
            worst = worst.max((a - b).abs() / b.abs().max(1e-12));
        }
    }
    Outcome::new(worst < 1e-9, format!("100 datasets, max relative error {worst:.2e} (tol 1e-9)"))
}

fn grid_min(rows: &[Vec<f64>], y: &[f64], center: [f64; 4], rho: &(dyn Fn(f64) -> f64 + Sync)) -> f64 {
    let steps: Vec<f64> = (0..=40).map(|k| -1.0 + 0.05 * k as f64).collect();
    let n = y.len() as f64;
    let mut best = f64::INFINITY;
    for &a in &steps {
        for &b in &steps {
            for &c in &steps {
                for &d in &steps {
                    let beta = [center[0] + a, center[1] + b, center[2] + c, center[3] + d];
                    let mut q = 0.0;
                    for (r, &yi) in rows.iter().zip(y) {
                        q += rho(yi - dot(r, &beta).max(0.0));
                    }
                    best = best.min(q / n);
                }
            }
        }
    }
    best
}

fn c2_grid() -> Outcome {
    let cases: Vec<(usize, usize)> = (0..20).flat_map(|i| (0..3).map(move |l| (i, l))).collect();
    let results: Vec<(usize, usize, f64, f64)> = cases
        .par_iter()
        .map(|&(i, l)| {
            let cfg = DgpConfig::new(20, ErrorFamily::NormalStd, child_seed(2, i as u64));
            let ds: Dataset64 = generate(&cfg).unwrap();
            let loss = losses()[l].clone();
            let f = fit(&ds, &loss, &SimplexConfig::default(), None).unwrap();
            let rows = design_rows(&f);
            let rho = |r: f64| loss.rho(r);
            let t = cfg.truth();
            let g = grid_min(&rows, f.response.as_slice(), [t[0], t[1], t[2], t[3]], &rho);
            (i, l, f.objective_value, g)
        })
        .collect();
    let bad: Vec<String> = results
        .iter()
        .filter(|r| r.2 > r.3 + 1e-4)
        .map(|r| format!("instance {} loss {}: simplex {:.6} grid {:.6}", r.0, losses()[r.1].label(), r.2, r.3))
        .collect();
    let worst = results.iter().map(|r| r.2 - r.3).fold(f64::NEG_INFINITY, f64::max);
    let mut o = Outcome::new(
        bad.is_empty(),
        format!("60 fits, max (simplex - grid) {worst:.2e} (tol 1e-4), {} above tolerance", bad.len()),
    );
    o.details = bad;
    o
}

fn c3_losses() -> Outcome {
    let mut details = Vec::new();
    let mut worst_fd = 0.0f64;
    let h = 1e-5;
    for loss in losses() {
        for k in 0..4000 {
            let x = -20.0 + 0.01 * k as f64 + 0.003;
            let kink = match loss.name() {
                "clad" => x.abs() < 1e-3,
                "wme" => (x.abs() - 1.35).abs() < 1e-3,
                _ => false,
            };
            if kink || x.abs() < 1e-2 {
                continue;
            }
            let fd = (loss.rho(x + h) - loss.rho(x - h)) / (2.0 * h);
            worst_fd = worst_fd.max((fd - loss.psi(x)).abs() / loss.psi(x).abs());
        }
    }
    details.push(format!("psi vs central difference: max relative error {worst_fd:.2e} (tol 1e-6)"));

    let uncensored = |n: usize, seed: u64| {
        let mut cfg = DgpConfig::new(n, ErrorFamily::NormalStd, seed);
        cfg.beta_true[0] = 20.0;
        generate::<f64>(&cfg).unwrap()
    };
    let ds = uncensored(300, 31);
    let fs = fit(&ds, &LossSpec::log_cosh(), &SimplexConfig::default(), None).unwrap();
    let rows = design_rows(&fs);
    let ls = normal_equations(&rows, ds.y().as_slice()).unwrap();
    let big = 1e3 * rows.iter().zip(ds.y().iter()).map(|(r, y)| (y - dot(r, &ls)).abs()).fold(0.0, f64::max);
    let w = fit(&ds, &LossSpec::wme(big).unwrap(), &SimplexConfig::default(), None).unwrap();
    let ls_err = w.beta().iter().zip(&ls).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    details.push(format!("WME large d vs least squares: max abs difference {ls_err:.2e} (tol 1e-4)"));

    let ds = uncensored(50, 32);
    let c = fit(&ds, &LossSpec::clad(), &SimplexConfig::default(), None).unwrap();
    let lad = lad_by_enumeration(&design_rows(&c), ds.y().as_slice());
    let lad_err = (c.objective_value - lad).abs();
    details.push(format!("CLAD vs LAD enumeration: objective difference {lad_err:.2e} (tol 1e-6)"));

    let pass = worst_fd < 1e-6 && ls_err < 1e-4 && lad_err < 1e-6;
    let mut o = Outcome::new(pass, "derivatives, WME/least squares, CLAD/LAD");
    o.details = details;
    o
}

const NS: [usize; 3] = [100, 500, 1000];

fn run_grid() -> Vec<Vec<Vec<SimReport>>> {
    let opts = SimOptions::default();
    losses()
        .iter()
        .map(|loss| {
            ErrorFamily::ALL
                .iter()
                .map(|&fam| {
                    NS.iter()
                        .map(|&n| {
                            let cfg = DgpConfig::new(n, fam, grid_seed(1, fam, n));
                            run_experiment(&cfg, loss, 200, &opts).unwrap()
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

fn c4_tables(grid: &[Vec<Vec<SimReport>>]) -> Outcome {
    let mut details = Vec::new();
    let (mut mse_bad, mut bias_bad, mut cells) = (0, 0, 0);
    for (l, per_loss) in grid.iter().enumerate() {
        for (f, per_fam) in per_loss.iter().enumerate() {
            for (k, rep) in per_fam.iter().enumerate() {
                for j in 0..4 {
                    cells += 1;
                    let (pb, pm) = published::SIM[l][f][k][j];
                    let ratio = rep.mse[j] / pm;
                    let mse_ok = (0.5..=2.0).contains(&ratio);
                    let bias_ok = rep.bias[j].abs() <= (2.0 * pb.abs()).max(0.08);
                    mse_bad += usize::from(!mse_ok);
                    bias_bad += usize::from(!bias_ok);
                    if !(mse_ok && bias_ok) {
                        details.push(format!(
                            "{} {} n={} {}: mse {:.4} vs {:.4} (x{:.2}){} bias {:+.4} vs {:+.4}{}",
                            rep.loss,
                            rep.family,
                            rep.n,
                            PARAM_NAMES[j],
                            rep.mse[j],
                            pm,
                            ratio,
                            if mse_ok { "" } else { " !" },
                            rep.bias[j],
                            pb,
                            if bias_ok { "" } else { " !" },
                        ));
                    }
                }
            }
        }
    }
    let mut o = Outcome::new(
        mse_bad == 0 && bias_bad == 0,
        format!("{cells} cells at r=200: {mse_bad} MSE outside x2, {bias_bad} bias outside max(2|b|, 0.08)"),
    );
    o.details = details;
    o
}

fn c5_trend(grid: &[Vec<Vec<SimReport>>]) -> Outcome {
    let mut details = Vec::new();
    for per_loss in grid {
        for per_fam in per_loss {
            let (small, large) = (&per_fam[0], &per_fam[2]);
            for j in 0..4 {
                if large.mse[j] >= small.mse[j] {
                    details.push(format!(
                        "{} {} {}: mse n=1000 {:.4} >= n=100 {:.4}",
                        small.loss, small.family, PARAM_NAMES[j], large.mse[j], small.mse[j]
                    ));
                }
            }
        }
    }
    let mut o = Outcome::new(details.is_empty(), format!("48 loss x family x parameter comparisons, {} violations", details.len()));
    o.details = details;
    o
}

fn c6_coverage() -> (Outcome, Vec<SimReport>) {
    let opts = SimOptions { coverage_level: Some(0.95), ..SimOptions::default() };
    let cfg = DgpConfig::new(1000, ErrorFamily::NormalStd, grid_seed(6, ErrorFamily::NormalStd, 1000));
    let mut pass = true;
    let mut details = Vec::new();
    let mut reps = Vec::new();
    for loss in [LossSpec::wme(1.35).unwrap(), LossSpec::log_cosh()] {
        let rep = run_experiment(&cfg, &loss, 500, &opts).unwrap();
        let cov = rep.coverage.clone().unwrap();
        let in_band = cov.adjusted.iter().all(|c| (0.91..=0.98).contains(c));
        let narrower = cov.unadjusted[2] < cov.adjusted[2];
        pass &= in_band && narrower;
        details.push(format!(
            "{}: adjusted {:?}{}, unadjusted {:?}; beta2 unadjusted < adjusted: {} ({} failures)",
            rep.loss,
            cov.adjusted,
            if in_band { "" } else { " !" },
            cov.unadjusted,
            narrower,
            rep.failures
        ));
        reps.push(rep);
    }
    let mut o = Outcome::new(pass, "Wald 95% coverage in [0.91, 0.98], adjustment widens beta2 intervals");
    o.details = details;
    (o, reps)
}

fn c7_structure(reports: &[&SimReport]) -> Outcome {
    let fits: usize = reports.iter().map(|r| r.estimates.len()).sum();
    let failures: usize = reports.iter().map(|r| r.failures).sum();
    let psd: usize = reports.iter().map(|r| r.audit.psd_violations).sum();
    let joint = reports.iter().map(|r| r.audit.max_joint_deviation).fold(0.0, f64::max);
    Outcome::new(
        psd == 0 && joint <= 1e-8,
        format!(
            "{fits} fits audited: {psd} PSD violations, max joint deviation {joint:.2e} (tol 1e-8); {failures} excluded replications"
        ),
    )
}

fn mroz_source() -> DataSource {
    let roles = Roles {
        response: "hours".into(),
        exogenous: ["age", "educ", "exper", "expersq", "kidslt6", "kidsge6"].map(String::from).to_vec(),
        endogenous: "nwifeinc".into(),
        instrument: "huseduc".into(),
    };
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mroz.csv");
    DataSource::new(path, &roles, 0.0, true)
}

fn fit_request(loss: &str) -> FitRequest {
    FitRequest {
        data: mroz_source(),
        loss: loss.into(),
        ci_level: 0.95,
        optimizer: OptimizerOverrides::default(),
        seed: 0,
    }
}

fn c8_mroz() -> Outcome {
    let mut details = Vec::new();
    let mut pass = true;
    let mut clad = None;
    for loss in ["clad", "wme:d=1.35", "logcosh"] {
        match fit_command(&fit_request(loss)) {
            Ok(r) => {
                let est: Vec<String> = r.coefficients.iter().map(|c| format!("{} {:+.3}", c.name, c.estimate)).collect();
                details.push(format!("{loss}: {}", est.join(", ")));
                if loss == "clad" {
                    clad = Some(r);
                }
            }
            Err(e) => {
                pass = false;
                details.push(format!("{loss}: fit failed: {e}"));
            }
        }
    }
    if let Some(r) = &clad {
        let get = |n: &str| r.coefficients.iter().find(|c| c.name == n).unwrap().estimate;
        let signs = get("exper") > 0.0 && get("expersq") < 0.0 && get("kidslt6") < 0.0;
        pass &= signs;
        details.push(format!("CLAD sign pattern exper(+) expersq(-) kidslt6(-): {signs}"));
    }
    let req = BootstrapRequest {
        data: mroz_source(),
        losses: vec!["clad".into()],
        resamples: vec![500],
        seed: 1,
        optimizer: OptimizerOverrides::default(),
    };
    let (names, cols) = bootstrap_columns(&req).unwrap();
    let col = &cols[0];
    let mut within = 0;
    for (j, &reference) in published::MROZ_CLAD_BMSE.iter().enumerate() {
        let ours = col.bmse[j + 1];
        let ratio = ours / reference;
        let ok = (1.0 / 3.0..=3.0).contains(&ratio);
        within += usize::from(ok);
        details.push(format!("BMSE {}: {:.4} vs {:.4} (x{:.3}){}", names[j + 1], ours, reference, ratio, if ok { "" } else { " !" }));
    }
    pass &= within == 8;
    let mut o = Outcome::new(
        pass,
        format!("3 losses fitted, B=500 CLAD BMSE within x3 for {within}/8 ({} failed resamples)", col.failures),
    );
    o.details = details;
    o
}

fn in_pool<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> R {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

fn c9_determinism() -> Outcome {
    let sim = SimulateRequest {
        losses: vec!["clad".into(), "wme:d=1.35".into(), "logcosh".into()],
        families: ErrorFamily::ALL.to_vec(),
        ns: vec![100],
        reps: 20,
        seed: 9,
        optimizer: OptimizerOverrides::default(),
        ci_level: Some(0.95),
    };
    let boot = BootstrapRequest {
        data: mroz_source(),
        losses: vec!["clad".into(), "logcosh".into()],
        resamples: vec![20],
        seed: 9,
        optimizer: OptimizerOverrides::default(),
    };
    let run = |threads| {
        in_pool(threads, || {
            (
                format!("{:?}", fit_command(&fit_request("wme:d=1.35")).unwrap()),
                simulate_command(&sim).unwrap(),
                bootstrap_command(&boot).unwrap(),
            )
        })
    };
    let base = run(1);
    let mut details = Vec::new();
    for threads in [1, 2, 8] {
        let other = run(threads);
        for (name, a, b) in [("fit", &base.0, &other.0), ("simulate", &base.1, &other.1), ("bootstrap", &base.2, &other.2)] {
            if a != b {
                details.push(format!("{name} differs between 1 and {threads} threads"));
            }
        }
    }
    let mut o = Outcome::new(details.is_empty(), "fit, simulate and bootstrap identical with 1, 2 and 8 threads");
    o.details = details;
    o
}

fn supplementary_bootstrap_stability() -> Outcome {
    let ds: Dataset64 = generate(&DgpConfig::new(100, ErrorFamily::NormalStd, 8)).unwrap();
    let loss = LossSpec::wme(1.35).unwrap();
    let a = bootstrap_bmse(&ds, &loss, 200, 21, &SimplexConfig::default()).unwrap();
    let b = bootstrap_bmse(&ds, &loss, 400, 22, &SimplexConfig::default()).unwrap();
    let ratios: Vec<f64> = (0..4).map(|j| a.bmse[j] / b.bmse[j]).collect();
    let pass = ratios.iter().all(|r| (1.0 / 1.5..=1.5).contains(r));
    Outcome::new(pass, format!("n=100 WME BMSE ratio B=200/B=400 per parameter {ratios:.3?} (within 50%)"))
}

fn main() {
    let mut failed = Vec::new();
    let mut record = |id: &'static str, title: &str, limit: Option<Duration>, run: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let mut o = run();
        let elapsed = t.elapsed();
        if let Some(limit) = limit {
            if elapsed > limit {
                o.pass = false;
                o.details.push(format!("runtime {:.1}s exceeds {:.0}s", elapsed.as_secs_f64(), limit.as_secs_f64()));
            }
        }
        report(id, title, elapsed, &o);
        if !o.pass {
            failed.push(id);
        }
    };
    let min = |m: u64| Some(Duration::from_secs(60 * m));

    record("1", "first-stage oracle", Some(Duration::from_secs(1)), &mut c1_first_stage);
    record("2", "second-stage grid oracle", min(2), &mut c2_grid);
    record("3", "loss correctness", None, &mut c3_losses);

    let t = Instant::now();
    let grid = run_grid();
    let grid_time = t.elapsed();
    record("4", "simulation tables", min(30), &mut || {
        let mut o = c4_tables(&grid);
        o.summary.push_str(&format!(", grid run {:.0}s", grid_time.as_secs_f64()));
        o
    });
    record("5", "consistency trend", None, &mut || c5_trend(&grid));

    let mut coverage_reports = Vec::new();
    record("6", "coverage", None, &mut || {
        let (o, reps) = c6_coverage();
        coverage_reports = reps;
        o
    });
    let all: Vec<&SimReport> = grid.iter().flatten().flatten().chain(coverage_reports.iter()).collect();
    record("7", "covariance structure", None, &mut || c7_structure(&all));
    record("8", "real data", min(10), &mut c8_mroz);
    record("9", "determinism", None, &mut c9_determinism);
    record("S1", "supplementary: bootstrap stability", None, &mut supplementary_bootstrap_stability);

    if failed.is_empty() {
        println!("acceptance: all criteria passed");
    } else {
        println!("acceptance: failed {}", failed.join(", "));
        std::process::exit(1);
    }
}
