//! Monte Carlo comparison of the constant, local, and global estimators.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use log::{info, warn};
use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::dataset::SurvivalDataset;
use crate::error::{Error, Result};
use crate::estimators::{
    fit_local_method, fit_varying_coefficient, AlphaWeighting, CoefficientSurface, ConstantFit,
    FitOptions,
};
use crate::grid::EstimationGrid;
use crate::inference::{build_band, perturb_alpha_se, BandOptions, InfluenceContext};
use crate::kernel::{silverman_bandwidth, KernelWeighting};
use crate::metrics::{c_index, mse, PredictionRecord};
use crate::simgen::{
    calibrate_censoring, simulate_replicate, test_sample, true_beta, SimDesign, P,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Constant,
    Local,
    Global,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Constant => "constant",
            Self::Local => "local",
            Self::Global => "global",
        })
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "constant" => Ok(Self::Constant),
            "local" => Ok(Self::Local),
            "global" | "proposed" => Ok(Self::Global),
            other => Err(Error::InvalidArgument(format!("unknown method `{other}`"))),
        }
    }
}

/// Simultaneous band settings used inside a study (scalar `W` only).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyBand {
    pub interval: (f64, f64),
    pub alpha_level: f64,
    pub replicates: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyConfig {
    pub design: SimDesign,
    pub sizes: Vec<usize>,
    pub replicates: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    /// Even grid over `[0, 1]` per axis for the global method.
    pub grid_size: usize,
    /// Used when the design has no censoring mean yet.
    pub target_censoring: f64,
    pub pilot_n: usize,
    pub test_size: usize,
    /// Evaluation grid per axis for the local method's `β`.
    pub local_eval_size: usize,
    /// Perturbation draws for the standard error of `α̃`; zero skips it.
    pub alpha_se_replicates: usize,
    pub band: Option<StudyBand>,
    pub ci_level: f64,
}

impl StudyConfig {
    /// Defaults for a scalar or bivariate modifier.
    pub fn new(q: usize, sizes: Vec<usize>, replicates: usize, seed: u64) -> Result<Self> {
        Ok(Self {
            design: SimDesign::new(q)?,
            sizes,
            replicates,
            seed,
            methods: vec![Method::Constant, Method::Local, Method::Global],
            grid_size: 5,
            target_censoring: 0.30,
            pilot_n: 100_000,
            test_size: 10_000,
            local_eval_size: if q == 1 { 101 } else { 21 },
            alpha_se_replicates: 500,
            band: None,
            ci_level: 0.95,
        })
    }

    /// Points where `β` is summarized.
    pub fn report_points(&self) -> Vec<Vec<f64>> {
        if self.design.q == 1 {
            [0.2, 0.4, 0.6, 0.8].iter().map(|&w| vec![w]).collect()
        } else {
            let axis = [0.25, 0.75];
            axis.iter()
                .flat_map(|&a| axis.iter().map(move |&b| vec![a, b]))
                .collect()
        }
    }
}

/// Summary of one estimated quantity across replicates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParameterSummary {
    pub parameter: String,
    pub point: Option<Vec<f64>>,
    pub truth: f64,
    pub mean: f64,
    pub bias: f64,
    pub sd: f64,
    pub mean_se: Option<f64>,
    pub coverage: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub n: usize,
    pub succeeded: usize,
    pub failed: usize,
    pub failures: Vec<String>,
    pub mse: f64,
    pub c_index: f64,
    pub alpha: Vec<ParameterSummary>,
    pub beta: Vec<ParameterSummary>,
    /// Simultaneous band coverage per component of `β`.
    pub band_coverage: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyReport {
    pub config: StudyConfig,
    pub censoring_mean: f64,
    /// Observed censoring fraction averaged over replicates, per sample size.
    pub censoring_rate: Vec<(usize, f64)>,
    pub summaries: Vec<MethodSummary>,
}

impl StudyReport {
    pub fn summary(&self, method: Method, n: usize) -> Option<&MethodSummary> {
        self.summaries
            .iter()
            .find(|s| s.method == method && s.n == n)
    }

    /// Long-format table: `n,method,quantity,parameter,point,value`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["n", "method", "quantity", "parameter", "point", "value"])?;
        let fmt_point = |p: &Option<Vec<f64>>| {
            p.as_ref()
                .map(|v| {
                    v.iter()
                        .map(|x| x.to_string())
                        .collect::<Vec<_>>()
                        .join(" ")
                })
                .unwrap_or_default()
        };
        for s in &self.summaries {
            let n = s.n.to_string();
            let m = s.method.to_string();
            let mut row = |q: &str, param: &str, point: String, v: f64| {
                out.write_record([
                    n.as_str(),
                    m.as_str(),
                    q,
                    param,
                    point.as_str(),
                    v.to_string().as_str(),
                ])
            };
            row("mse", "", String::new(), s.mse)?;
            row("c_index", "", String::new(), s.c_index)?;
            row("failed", "", String::new(), s.failed as f64)?;
            for p in s.alpha.iter().chain(&s.beta) {
                let point = fmt_point(&p.point);
                row("mean", &p.parameter, point.clone(), p.mean)?;
                row("bias", &p.parameter, point.clone(), p.bias)?;
                row("sd", &p.parameter, point.clone(), p.sd)?;
                if let Some(se) = p.mean_se {
                    row("se", &p.parameter, point.clone(), se)?;
                }
                if let Some(cr) = p.coverage {
                    row("cr", &p.parameter, point.clone(), cr)?;
                }
            }
            if let Some(cov) = &s.band_coverage {
                for (k, c) in cov.iter().enumerate() {
                    row(
                        "band_coverage",
                        &format!("beta{}", k + 1),
                        String::new(),
                        *c,
                    )?;
                }
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// What one method produced on one replicate.
#[derive(Debug, Clone)]
struct Outcome {
    mse: f64,
    c_index: f64,
    alpha: Vec<f64>,
    alpha_se: Option<Vec<f64>>,
    /// `beta[j][k]` at report point `j`.
    beta: Vec<Vec<f64>>,
    beta_se: Option<Vec<Vec<f64>>>,
    band_cover: Option<Vec<bool>>,
}

type Attempt = std::result::Result<Outcome, String>;

fn even_unit_grid(q: usize, size: usize) -> Result<EstimationGrid> {
    EstimationGrid::even(&vec![(0.0, 1.0); q], &vec![size; q])
}

fn score<S: CoefficientSurface>(
    fit: &S,
    test: &[PredictionRecord],
    design: &SimDesign,
) -> Result<(f64, f64)> {
    let err = mse(fit, test, true_beta, &design.alpha)?;
    let scores = test
        .iter()
        .map(|t| fit.linear_predictor(&t.w, &t.x, &t.z))
        .collect::<Result<Vec<_>>>()?;
    let times: Vec<f64> = test.iter().map(|t| t.true_event_time).collect();
    Ok((err, c_index(&scores, &times)?))
}

fn run_method(
    method: Method,
    ds: &SurvivalDataset,
    test: &[PredictionRecord],
    config: &StudyConfig,
    replicate: u64,
) -> Result<Outcome> {
    let points = config.report_points();
    let design = &config.design;
    let beta_rows = |f: &dyn Fn(&[f64]) -> Result<DVector<f64>>| -> Result<Vec<Vec<f64>>> {
        points
            .iter()
            .map(|w| f(w).map(|b| b.iter().copied().collect()))
            .collect()
    };
    match method {
        Method::Constant => {
            let fit = ConstantFit::fit(ds)?;
            let (mse, c) = score(&fit, test, design)?;
            Ok(Outcome {
                mse,
                c_index: c,
                alpha: fit.alpha.iter().copied().collect(),
                alpha_se: None,
                beta: beta_rows(&|w| fit.beta_at(w))?,
                beta_se: None,
                band_cover: None,
            })
        }
        Method::Local => {
            let kernel = KernelWeighting::Gaussian(silverman_bandwidth(ds)?);
            let grid = even_unit_grid(design.q, config.local_eval_size)?;
            let fit = fit_local_method(ds, &kernel, &grid, AlphaWeighting::InverseVariance)?;
            let (mse, c) = score(&fit, test, design)?;
            Ok(Outcome {
                mse,
                c_index: c,
                alpha: fit.alpha.iter().copied().collect(),
                alpha_se: None,
                beta: beta_rows(&|w| fit.beta_at(w))?,
                beta_se: None,
                band_cover: None,
            })
        }
        Method::Global => {
            let kernel = KernelWeighting::Gaussian(silverman_bandwidth(ds)?);
            let grid = even_unit_grid(design.q, config.grid_size)?;
            let fit = fit_varying_coefficient(ds, &grid, &kernel, &FitOptions::default())?;
            let (mse, c) = score(&fit, test, design)?;
            let alpha_se = if config.alpha_se_replicates >= 2 {
                let seed = crate::rng::derive_seed(config.seed, ds.n() as u64, replicate);
                Some(
                    perturb_alpha_se(ds, &fit, config.alpha_se_replicates, seed)?
                        .iter()
                        .copied()
                        .collect(),
                )
            } else {
                None
            };
            let ctx = InfluenceContext::for_fit(ds, &fit)?;
            let beta_se = points
                .iter()
                .map(|w| {
                    ctx.at(w)
                        .map(|b| b.standard_errors().iter().copied().collect())
                })
                .collect::<Result<Vec<Vec<f64>>>>()?;
            let band_cover = match (&config.band, design.q) {
                (Some(band), 1) => {
                    let seed =
                        crate::rng::derive_seed(config.seed ^ 0xB0, ds.n() as u64, replicate);
                    let res = build_band(
                        ds,
                        &fit,
                        &BandOptions {
                            interval: Some(band.interval),
                            alpha_level: band.alpha_level,
                            replicates: band.replicates,
                            seed,
                            eval_points: 101,
                        },
                    )?;
                    Some(res.covers(|w| true_beta(&[w])))
                }
                _ => None,
            };
            Ok(Outcome {
                mse,
                c_index: c,
                alpha: fit.alpha_refit.iter().copied().collect(),
                alpha_se,
                beta: beta_rows(&|w| fit.beta_at(w))?,
                beta_se: Some(beta_se),
                band_cover,
            })
        }
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sd(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return f64::NAN;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

fn summarize(
    parameter: String,
    point: Option<Vec<f64>>,
    truth: f64,
    estimates: &[f64],
    ses: Option<Vec<f64>>,
    z: f64,
) -> ParameterSummary {
    let m = mean(estimates);
    let (mean_se, coverage) = match ses {
        Some(se) => {
            let covered = estimates
                .iter()
                .zip(&se)
                .filter(|(e, s)| (*e - truth).abs() <= z * **s)
                .count();
            (Some(mean(&se)), Some(covered as f64 / se.len() as f64))
        }
        None => (None, None),
    };
    ParameterSummary {
        parameter,
        point,
        truth,
        mean: m,
        bias: m - truth,
        sd: sd(estimates),
        mean_se,
        coverage,
    }
}

fn aggregate(
    method: Method,
    n: usize,
    results: &[&Attempt],
    config: &StudyConfig,
) -> MethodSummary {
    let ok: Vec<&Outcome> = results.iter().filter_map(|r| r.as_ref().ok()).collect();
    let failures: Vec<String> = results
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.as_ref().err().map(|e| format!("replicate {i}: {e}")))
        .collect();
    for f in failures.iter().take(5) {
        warn!("{method} n={n}: {f}");
    }
    let z = Normal::new(0.0, 1.0)
        .expect("standard normal")
        .inverse_cdf(0.5 + config.ci_level / 2.0);
    let points = config.report_points();
    let mut alpha = Vec::new();
    let mut beta = Vec::new();
    let mut band_coverage = None;
    if !ok.is_empty() {
        for (j, truth) in config.design.alpha.iter().enumerate() {
            let est: Vec<f64> = ok.iter().map(|o| o.alpha[j]).collect();
            let se = ok
                .iter()
                .map(|o| o.alpha_se.as_ref().map(|s| s[j]))
                .collect::<Option<Vec<f64>>>();
            alpha.push(summarize(
                format!("alpha{}", j + 1),
                None,
                *truth,
                &est,
                se,
                z,
            ));
        }
        for (pi, w) in points.iter().enumerate() {
            let truth = true_beta(w);
            for k in 0..P {
                let est: Vec<f64> = ok.iter().map(|o| o.beta[pi][k]).collect();
                let se = ok
                    .iter()
                    .map(|o| o.beta_se.as_ref().map(|s| s[pi][k]))
                    .collect::<Option<Vec<f64>>>();
                beta.push(summarize(
                    format!("beta{}", k + 1),
                    Some(w.clone()),
                    truth[k],
                    &est,
                    se,
                    z,
                ));
            }
        }
        let covers: Option<Vec<&Vec<bool>>> = ok.iter().map(|o| o.band_cover.as_ref()).collect();
        if let Some(c) = covers {
            band_coverage = Some(
                (0..P)
                    .map(|k| c.iter().filter(|v| v[k]).count() as f64 / c.len() as f64)
                    .collect(),
            );
        }
    }
    MethodSummary {
        method,
        n,
        succeeded: ok.len(),
        failed: failures.len(),
        failures,
        mse: mean(&ok.iter().map(|o| o.mse).collect::<Vec<_>>()),
        c_index: mean(&ok.iter().map(|o| o.c_index).collect::<Vec<_>>()),
        alpha,
        beta,
        band_coverage,
    }
}

/// Runs every method on `replicates` datasets per sample size.
pub fn run_study(config: &StudyConfig) -> Result<StudyReport> {
    if config.replicates == 0 {
        return Err(Error::InvalidArgument(
            "at least one replicate is required".into(),
        ));
    }
    if config.sizes.iter().any(|&n| n < 2) {
        return Err(Error::InvalidArgument(
            "sample sizes must be at least 2".into(),
        ));
    }
    let censoring_mean = match config.design.censoring_mean {
        Some(mu) => mu,
        None => calibrate_censoring(
            &config.design,
            config.target_censoring,
            config.pilot_n,
            config.seed,
        )?,
    };
    info!("censoring mean {censoring_mean}");
    let design = config.design.clone().with_censoring_mean(censoring_mean)?;
    let mut resolved = config.clone();
    resolved.design = design.clone();

    let mut summaries = Vec::new();
    let mut censoring_rate = Vec::new();
    for &n in &config.sizes {
        let per_replicate: Vec<(f64, Vec<Attempt>)> = (0..config.replicates as u64)
            .into_par_iter()
            .map(|rep| {
                let index = rep + ((n as u64) << 32);
                let fail_all =
                    |e: Error| config.methods.iter().map(|_| Err(e.to_string())).collect();
                let ds = match simulate_replicate(&design, n, config.seed, index) {
                    Ok(ds) => ds,
                    Err(e) => return (f64::NAN, fail_all(e)),
                };
                let censored = 1.0 - ds.n_events() as f64 / n as f64;
                let outcomes = match test_sample(&design, config.test_size, config.seed, index) {
                    Ok(test) => config
                        .methods
                        .iter()
                        .map(|&m| {
                            run_method(m, &ds, &test, &resolved, index).map_err(|e| e.to_string())
                        })
                        .collect(),
                    Err(e) => fail_all(e),
                };
                (censored, outcomes)
            })
            .collect();
        let rates: Vec<f64> = per_replicate
            .iter()
            .map(|r| r.0)
            .filter(|r| r.is_finite())
            .collect();
        censoring_rate.push((n, mean(&rates)));
        for (mi, &method) in config.methods.iter().enumerate() {
            let results: Vec<&Attempt> = per_replicate.iter().map(|(_, o)| &o[mi]).collect();
            summaries.push(aggregate(method, n, &results, &resolved));
        }
    }
    Ok(StudyReport {
        config: resolved,
        censoring_mean,
        censoring_rate,
        summaries,
    })
}
