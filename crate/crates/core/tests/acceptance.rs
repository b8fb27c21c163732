//! Acceptance gate. Each criterion prints one PASS/FAIL line; the process
//! exits nonzero when any fails.

mod common;

use std::process::Command;
use std::sync::OnceLock;
use std::time::Instant;

use addhaz::dataset::{save_csv, CsvSchema, SurvivalDataset, SurvivalRecord};
use addhaz::estimators::{
    assemble_at_points, assemble_global_system, discrete_block_estimate, estimate_cumhaz,
    expanded_covariates, fit_varying_coefficient, lin_ying, lin_ying_with, local_kernel_fit,
    solve_global, Covariates, FitOptions,
};
use addhaz::grid::{build_grid, EstimationGrid, GridKind};
use addhaz::inference::{
    alpha_perturbation_map, build_band, perturb_beta, sandwich_variance, BandOptions,
    PerturbationDraw,
};
use addhaz::kernel::{silverman_bandwidth, Bandwidth, KernelWeighting};
use addhaz::rng::stream_rng;
use addhaz::simgen::study::{run_study, Method, StudyBand, StudyConfig, StudyReport};
use addhaz::simgen::{
    calibrate_censoring, cumulative_hazard, draw_event_time, simulate_replicate, SimDesign,
};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;

use common::{lattice_dataset, max_abs_diff, random_dataset, random_discrete_dataset};

type Check = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

// ---------------------------------------------------------------- 1

fn reductions() -> Check {
    let start = Instant::now();
    let (mut worst_a, mut worst_b, mut worst_c) = (0.0f64, 0.0f64, 0.0f64);
    for seed in 0..50u64 {
        let r = (seed % 2) as usize;

        let ds = random_dataset(seed, 100, 2, r);
        let local = local_kernel_fit(&ds, &[0.5], &KernelWeighting::Constant(0.7)).map_err(err)?;
        let ly = lin_ying(&ds, Covariates::XZ).map_err(err)?;
        let joint: Vec<f64> = local
            .beta
            .iter()
            .chain(local.alpha.iter())
            .copied()
            .collect();
        worst_a = worst_a.max(max_abs_diff(&joint, ly.as_slice()));

        let kernel = KernelWeighting::Gaussian(Bandwidth::uniform(0.2, 1).map_err(err)?);
        let node = vec![0.3 + 0.4 * (seed as f64 / 50.0)];
        let sys = assemble_at_points(&ds, std::slice::from_ref(&node), &kernel).map_err(err)?;
        let sol = solve_global(&sys, 0.0).map_err(err)?;
        let local = local_kernel_fit(&ds, &node, &kernel).map_err(err)?;
        worst_b = worst_b
            .max(max_abs_diff(
                sol.beta_grid[0].as_slice(),
                local.beta.as_slice(),
            ))
            .max(max_abs_diff(
                sol.alpha_joint.as_slice(),
                local.alpha.as_slice(),
            ));

        let ds = random_discrete_dataset(seed, 100, 2, r, 3);
        let fit = discrete_block_estimate(&ds, None).map_err(err)?;
        let oracle = lin_ying_with(&ds, &expanded_covariates(&ds, &fit.levels))
            .map_err(err)?
            .coef;
        let blocks: Vec<f64> = fit
            .beta
            .iter()
            .flat_map(|b| b.iter().copied())
            .chain(fit.alpha.iter().copied())
            .collect();
        worst_c = worst_c.max(max_abs_diff(&blocks, oracle.as_slice()));
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(
        worst_a < 1e-10 && worst_b < 1e-10 && worst_c < 1e-10 && secs < 10.0,
        format!("max |Δ| constant-kernel {worst_a:.2e}, m=1 {worst_b:.2e}, discrete {worst_c:.2e}; {secs:.2}s"),
    )
}

// ---------------------------------------------------------------- 2

fn hand_oracle() -> Check {
    let rec = |time, x| SurvivalRecord {
        time,
        status: true,
        w: vec![0.5],
        x: vec![x],
        z: vec![],
    };
    let ds = SurvivalDataset::new(vec![rec(1.0, 0.0), rec(2.0, 1.0)]).map_err(err)?;
    let beta = lin_ying(&ds, Covariates::X).map_err(err)?[0];
    let ch = estimate_cumhaz(
        &ds,
        &[DVector::zeros(1), DVector::zeros(1)],
        &DVector::zeros(0),
    )
    .map_err(err)?;
    let (l1, l2) = (ch.eval(1.0).map_err(err)?, ch.eval(2.0).map_err(err)?);
    ensure(
        (beta + 1.0).abs() < 1e-12 && l1 == 0.5 && l2 == 1.5,
        format!("beta = {beta}, Lambda(1) = {l1}, Lambda(2) = {l2}"),
    )
}

// ---------------------------------------------------------------- 3

const STEP: f64 = 1e-4;

/// Midpoint sum of `f` over `[0, tau]` with step `STEP`.
fn riemann<F: Fn(f64) -> DMatrix<f64>>(tau: f64, f: F) -> DMatrix<f64> {
    let steps = (tau / STEP).round() as usize;
    let mut acc = f(0.5 * STEP) * STEP;
    for j in 1..steps {
        acc += f((j as f64 + 0.5) * STEP) * STEP;
    }
    acc
}

fn relative(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax() / b.amax().max(1e-300)
}

/// `Σ ∫ Yᵢ (Cᵢ − C̄)⊗² dt` by time stepping.
fn denominator_oracle(ds: &SurvivalDataset, cov: &DMatrix<f64>) -> DMatrix<f64> {
    let d = cov.ncols();
    riemann(ds.tau(), |t| {
        let risk: Vec<usize> = (0..ds.n()).filter(|&i| ds.time(i) >= t).collect();
        let mut out = DMatrix::zeros(d, d);
        if risk.is_empty() {
            return out;
        }
        let mean = risk
            .iter()
            .map(|&i| cov.row(i).transpose())
            .sum::<DVector<f64>>()
            / risk.len() as f64;
        for &i in &risk {
            let c = cov.row(i).transpose() - &mean;
            out += &c * c.transpose();
        }
        out
    })
}

/// The joint global matrix by time stepping.
fn global_oracle(
    ds: &SurvivalDataset,
    nodes: &[Vec<f64>],
    kernel: &KernelWeighting,
) -> DMatrix<f64> {
    let (n, p, r, m) = (ds.n(), ds.p(), ds.r(), nodes.len());
    let kmat = kernel.weight_matrix(ds, nodes).unwrap();
    let omega: Vec<f64> = (0..n).map(|i| kmat.row(i).sum()).collect();
    let order = m * p + r;
    let integral = riemann(ds.tau(), |t| {
        let mut out = DMatrix::zeros(order, order);
        let risk: Vec<usize> = (0..n).filter(|&i| ds.time(i) >= t).collect();
        let s: f64 = risk.iter().map(|&i| omega[i]).sum();
        if s == 0.0 {
            return out;
        }
        // stacked (X̄₁, …, X̄ₘ, Z̄) and Σ over the risk set of the weighted outer products
        let mut mean = DVector::zeros(order);
        for &i in &risk {
            let x = ds.x_row(i);
            let z = ds.z_row(i);
            let mut v = DVector::zeros(order);
            for k in 0..m {
                v.rows_mut(k * p, p).copy_from(&(&x * kmat[(i, k)]));
            }
            v.rows_mut(m * p, r).copy_from(&(&z * omega[i]));
            mean += v;

            for k in 0..m {
                let kik = kmat[(i, k)];
                let mut blk = out.view_mut((k * p, k * p), (p, p));
                blk += &x * x.transpose() * kik;
                let xz = &x * z.transpose() * kik;
                out.view_mut((k * p, m * p), (p, r)).add_assign(&xz);
                out.view_mut((m * p, k * p), (r, p))
                    .add_assign(&xz.transpose());
            }
            let mut blk = out.view_mut((m * p, m * p), (r, r));
            blk += &z * z.transpose() * omega[i];
        }
        mean /= s;
        out -= &mean * mean.transpose() * s;
        out
    });
    integral / (n as f64 * m as f64)
}

trait AddAssign {
    fn add_assign(self, other: &DMatrix<f64>);
}

impl AddAssign for nalgebra::DMatrixViewMut<'_, f64> {
    fn add_assign(mut self, other: &DMatrix<f64>) {
        self += other;
    }
}

fn integration_oracle() -> Check {
    let mut worst = [0.0f64; 3];
    for seed in 0..20u64 {
        let ds = lattice_dataset(seed, 30, 2, 1);

        let cov = Covariates::XZ.matrix(&ds);
        let fit = lin_ying_with(&ds, &cov).map_err(err)?;
        let oracle = denominator_oracle(&ds, &cov);
        let scale = ds.n() as f64;
        let rel =
            relative(&fit.denominator, &oracle).min(relative(&(&fit.denominator * scale), &oracle));
        worst[0] = worst[0].max(rel);

        let kernel = KernelWeighting::Gaussian(Bandwidth::uniform(0.3, 1).map_err(err)?);
        let grid = EstimationGrid::even(&[(0.2, 0.8)], &[3]).map_err(err)?;
        let sys = assemble_global_system(&ds, &grid, &kernel).map_err(err)?;
        worst[1] = worst[1].max(relative(
            &sys.matrix,
            &global_oracle(&ds, &grid.points(), &kernel),
        ));

        let beta = vec![DVector::from_vec(vec![0.3, -0.2]); ds.n()];
        let ch = estimate_cumhaz(&ds, &beta, &DVector::from_vec(vec![0.1])).map_err(err)?;
        let exact = ch.integral(ds.tau()).map_err(err)?;
        let brute = riemann(ds.tau(), |t| {
            DMatrix::from_element(1, 1, ch.eval(t).unwrap())
        })[(0, 0)];
        worst[2] = worst[2].max((exact - brute).abs() / brute.abs().max(1e-300));
    }
    ensure(
        worst.iter().all(|w| *w < 1e-6),
        format!(
            "max relative error: denominator {:.2e}, global matrix {:.2e}, cumulative-hazard integral {:.2e}",
            worst[0], worst[1], worst[2]
        ),
    )
}

// ---------------------------------------------------------------- 4-6

fn study() -> &'static Result<StudyReport, String> {
    static REPORT: OnceLock<Result<StudyReport, String>> = OnceLock::new();
    REPORT.get_or_init(|| {
        let mut config = StudyConfig::new(1, vec![500], 100, 2024).map_err(err)?;
        config.grid_size = 5;
        config.band = Some(StudyBand {
            interval: (0.05, 0.95),
            alpha_level: 0.05,
            replicates: 500,
        });
        let start = Instant::now();
        let report = run_study(&config).map_err(err)?;
        eprintln!(
            "    study finished in {:.1}s",
            start.elapsed().as_secs_f64()
        );
        Ok(report)
    })
}

fn table_mse_cindex() -> Check {
    let report = study().as_ref().map_err(Clone::clone)?;
    let global = report
        .summary(Method::Global, 500)
        .ok_or("no global summary")?;
    let local = report
        .summary(Method::Local, 500)
        .ok_or("no local summary")?;
    ensure(
        (0.09..=0.16).contains(&global.mse)
            && (0.17..=0.30).contains(&local.mse)
            && global.mse < local.mse
            && (0.56..=0.60).contains(&global.c_index),
        format!(
            "MSE global {:.4}, local {:.4}; C-index global {:.4} ({} + {} failed replicates)",
            global.mse, local.mse, global.c_index, global.failed, local.failed
        ),
    )
}

fn table_alpha() -> Check {
    let report = study().as_ref().map_err(Clone::clone)?;
    let global = report
        .summary(Method::Global, 500)
        .ok_or("no global summary")?;
    let a1 = global.alpha.first().ok_or("no alpha summary")?;
    let coverage = a1.coverage.ok_or("no coverage")?;
    ensure(
        a1.bias.abs() < 0.05 && (0.17..=0.27).contains(&a1.sd) && (0.90..=1.00).contains(&coverage),
        format!(
            "alpha1 bias {:+.4}, SD {:.4}, mean SE {:.4}, coverage {:.2}",
            a1.bias,
            a1.sd,
            a1.mean_se.unwrap_or(f64::NAN),
            coverage
        ),
    )
}

fn table_band() -> Check {
    let report = study().as_ref().map_err(Clone::clone)?;
    let global = report
        .summary(Method::Global, 500)
        .ok_or("no global summary")?;
    let cov = global.band_coverage.as_ref().ok_or("no band coverage")?;
    ensure(
        cov.len() == 3 && cov.iter().all(|c| *c >= 0.93),
        format!("simultaneous coverage beta1..3 = {cov:.2?}"),
    )
}

// ---------------------------------------------------------------- 7

fn perturbation_invariants() -> Check {
    let design = SimDesign::new(1)
        .map_err(err)?
        .with_censoring_mean(2.0)
        .map_err(err)?;
    let mut zero_max = 0.0f64;
    let mut min_eig = f64::INFINITY;
    let mut asym = 0.0f64;
    let mut dominated = true;
    for index in 0..5u64 {
        let ds = simulate_replicate(&design, 300, 77, index).map_err(err)?;
        let grid = build_grid(&ds, GridKind::Even, &[5]).map_err(err)?;
        let kernel = KernelWeighting::Gaussian(silverman_bandwidth(&ds).map_err(err)?);
        let fit =
            fit_varying_coefficient(&ds, &grid, &kernel, &FitOptions::default()).map_err(err)?;

        let zeros = PerturbationDraw::zeros(ds.n());
        for w in [0.1, 0.5, 0.9] {
            let v = perturb_beta(&ds, &fit, &[w], &zeros).map_err(err)?;
            zero_max = zero_max.max(v.amax());
            let s = sandwich_variance(&ds, &fit, &[w]).map_err(err)?;
            asym = asym.max((&s - s.transpose()).amax());
            min_eig = min_eig.min(SymmetricEigen::new(s).eigenvalues.min());
        }
        let map = alpha_perturbation_map(&ds, &fit).map_err(err)?;
        zero_max = zero_max.max((map * DVector::from_column_slice(&zeros.psi)).amax());

        let band = build_band(
            &ds,
            &fit,
            &BandOptions {
                interval: Some((0.05, 0.95)),
                replicates: 200,
                seed: index,
                ..BandOptions::default()
            },
        )
        .map_err(err)?;
        for row in &band.pointwise_critical {
            for (k, c) in row.iter().enumerate() {
                dominated &= band.critical[k] >= *c;
            }
        }
    }
    ensure(
        zero_max == 0.0 && dominated && asym == 0.0 && min_eig >= -1e-10,
        format!(
            "zero-draw max {zero_max:e}; critical >= pointwise: {dominated}; sandwich asymmetry {asym:e}, min eigenvalue {min_eig:.3e}"
        ),
    )
}

// ---------------------------------------------------------------- 8

fn generator() -> Check {
    let mut rng = stream_rng(8, 8, 8);
    let mut worst = 0.0f64;
    for _ in 0..100_000 {
        let c = rng.random_range(0.0..5.0);
        let e: f64 = -(1.0 - rng.random::<f64>()).ln();
        let t = addhaz::simgen::invert_cumulative_hazard(c, e).map_err(err)?;
        worst = worst.max((cumulative_hazard(t, c) - e).abs());
    }
    // the sampler itself goes through the same inversion
    let t = draw_event_time(0.7, &mut rng).map_err(err)?;

    let design = SimDesign::new(1).map_err(err)?;
    let mu = calibrate_censoring(&design, 0.30, 100_000, 2024).map_err(err)?;
    let ds = simulate_replicate(
        &design.with_censoring_mean(mu).map_err(err)?,
        100_000,
        2024,
        0,
    )
    .map_err(err)?;
    let rate = 1.0 - ds.n_events() as f64 / ds.n() as f64;
    ensure(
        worst <= 1e-12 && t >= 0.0 && (0.28..=0.32).contains(&rate),
        format!("max |Lambda(T) - E| = {worst:.2e}; censoring mean {mu:.4}, rate {rate:.4} on 1e5 subjects"),
    )
}

// ---------------------------------------------------------------- 9

fn run_cli(args: &[&str], threads: &str) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_addhaz"))
        .args(args)
        .args(["--threads", threads])
        .output()
        .map_err(err)?;
    if out.status.success() {
        Ok(())
    } else {
        Err(String::from_utf8_lossy(&out.stderr).into_owned())
    }
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(err)?;
    let path = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    let design = SimDesign::new(1)
        .map_err(err)?
        .with_censoring_mean(2.0)
        .map_err(err)?;
    let ds = simulate_replicate(&design, 300, 9, 0).map_err(err)?;
    save_csv(&ds, &CsvSchema::default_names(1, 3, 2), path("data.csv")).map_err(err)?;

    let mut files = Vec::new();
    for (tag, threads) in [("a", "1"), ("b", "8"), ("c", "1")] {
        let data = path("data.csv");
        let band_out = path(&format!("band_{tag}"));
        run_cli(
            &[
                "band",
                "--data",
                &data,
                "--w-cols",
                "w1",
                "--x-cols",
                "x1,x2,x3",
                "--z-cols",
                "z1,z2",
                "--seed",
                "5",
                "--replicates",
                "200",
                "--out",
                &band_out,
            ],
            threads,
        )?;
        let sim_out = path(&format!("sim_{tag}"));
        run_cli(
            &[
                "simulate",
                "--n",
                "150",
                "--replicates",
                "4",
                "--seed",
                "11",
                "--pilot-n",
                "20000",
                "--test-size",
                "2000",
                "--alpha-se-replicates",
                "100",
                "--band-replicates",
                "100",
                "--out",
                &sim_out,
            ],
            threads,
        )?;
        let read = |p: String| std::fs::read(p).map_err(err);
        files.push([
            read(format!("{band_out}.json"))?,
            read(format!("{band_out}.csv"))?,
            read(format!("{sim_out}.json"))?,
            read(format!("{sim_out}.csv"))?,
        ]);
    }
    let same = files[0] == files[1] && files[0] == files[2];
    ensure(
        same,
        format!("band and simulate outputs identical across reruns and --threads 1/8: {same}"),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Check); 9] = [
        ("1 exact reductions", reductions),
        ("2 hand oracle", hand_oracle),
        ("3 integration oracle", integration_oracle),
        ("4 MSE and C-index, q=1 n=500", table_mse_cindex),
        ("5 constant-effect bias, SD, coverage", table_alpha),
        ("6 simultaneous band coverage", table_band),
        ("7 perturbation invariants", perturbation_invariants),
        ("8 generator correctness", generator),
        ("9 CLI determinism", determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
