//! Command-line front end: `fit`, `band`, `predict`, and `simulate`.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::dataset::{load_csv, CsvSchema, SurvivalDataset};
use crate::error::{Error, Result};
use crate::estimators::{
    fit_varying_coefficient, CoefficientSurface, FitOptions, VaryingCoefficientFit,
};
use crate::grid::{build_grid, EstimationGrid, GridKind};
use crate::inference::{build_band, perturb_alpha_se, BandOptions};
use crate::kernel::{silverman_bandwidth, Bandwidth, KernelWeighting};
use crate::metrics::{c_index, c_index_harrell};
use crate::simgen::study::{run_study, Method, StudyBand, StudyConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NUMERICAL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "addhaz",
    version,
    about = "Varying-coefficient additive hazards models"
)]
pub struct Cli {
    /// Worker threads (defaults to available parallelism).
    #[arg(long, global = true, env = "ADDHAZ_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the global kernel estimator and write coefficients and the cumulative hazard.
    Fit(FitArgs),
    /// Simultaneous confidence bands for β(·) with a scalar modifier.
    Band(BandArgs),
    /// Score new rows with a saved fit.
    Predict(PredictArgs),
    /// Monte Carlo comparison on data from the built-in design.
    Simulate(SimulateArgs),
}

fn comma_list(s: &str) -> Vec<String> {
    s.split(',')
        .map(|v| v.trim().to_string())
        .filter(|v| !v.is_empty())
        .collect()
}

fn parse_f64_list(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}")))
        .collect()
}

fn parse_sizes(s: &str) -> std::result::Result<Vec<usize>, String> {
    let sizes = s
        .split(',')
        .map(|v| v.trim().parse::<usize>().map_err(|e| format!("`{v}`: {e}")))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    if sizes.iter().any(|&k| k < 2) {
        return Err("grid sizes must be at least 2".into());
    }
    Ok(sizes)
}

fn parse_interval(s: &str) -> std::result::Result<(f64, f64), String> {
    match parse_f64_list(s)?.as_slice() {
        [a, b] if a < b => Ok((*a, *b)),
        _ => Err("expected `a,b` with a < b".into()),
    }
}

#[derive(Debug, Args, Clone)]
pub struct DataArgs {
    /// Input CSV with a header row.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "time")]
    pub time_col: String,
    #[arg(long, default_value = "status")]
    pub status_col: String,
    /// Effect-modifier columns, comma separated.
    #[arg(long, required = true, value_parser = |s: &str| Ok::<_, String>(comma_list(s)))]
    pub w_cols: std::vec::Vec<String>,
    /// Varying-effect covariate columns, comma separated.
    #[arg(long, required = true, value_parser = |s: &str| Ok::<_, String>(comma_list(s)))]
    pub x_cols: std::vec::Vec<String>,
    /// Constant-effect covariate columns, comma separated.
    #[arg(long, default_value = "", value_parser = |s: &str| Ok::<_, String>(comma_list(s)))]
    pub z_cols: std::vec::Vec<String>,
    /// Integration horizon; defaults to the largest observed time.
    #[arg(long)]
    pub tau: Option<f64>,
}

impl DataArgs {
    fn schema(&self) -> CsvSchema {
        let flat = |v: &[String]| v.to_vec();
        CsvSchema {
            time: self.time_col.clone(),
            status: self.status_col.clone(),
            w: flat(&self.w_cols),
            x: flat(&self.x_cols),
            z: flat(&self.z_cols),
        }
    }

    fn load(&self) -> Result<SurvivalDataset> {
        if self.w_cols.is_empty() || self.x_cols.is_empty() {
            return Err(Error::InvalidArgument(
                "--w-cols and --x-cols must name at least one column".into(),
            ));
        }
        let ds = load_csv(&self.data, &self.schema())?;
        match self.tau {
            Some(t) => ds.with_tau(t),
            None => Ok(ds),
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum GridChoice {
    Quantile,
    Even,
}

#[derive(Debug, Args, Clone)]
pub struct ModelArgs {
    #[arg(long, value_enum, default_value = "quantile")]
    pub grid: GridChoice,
    /// Points per axis (one value, or one per modifier column).
    #[arg(long, default_value = "5", value_parser = parse_sizes)]
    pub grid_size: std::vec::Vec<usize>,
    /// CSV of explicit grid points (one column per modifier, header required).
    #[arg(long)]
    pub grid_file: Option<PathBuf>,
    /// Bandwidths, comma separated; Silverman's rule when omitted.
    #[arg(long, value_parser = parse_f64_list)]
    pub bandwidth: Option<std::vec::Vec<f64>>,
    /// Diagonal ridge for the joint system (exploratory use only).
    #[arg(long, default_value_t = 0.0)]
    pub ridge: f64,
}

impl ModelArgs {
    fn grid_sizes(&self) -> Vec<usize> {
        self.grid_size.clone()
    }

    fn grid(&self, ds: &SurvivalDataset) -> Result<EstimationGrid> {
        if let Some(path) = &self.grid_file {
            return read_grid_file(path, ds.q());
        }
        let mut sizes = self.grid_sizes();
        if sizes.len() == 1 {
            sizes = vec![sizes[0]; ds.q()];
        }
        if sizes.len() != ds.q() {
            return Err(Error::InvalidArgument(format!(
                "--grid-size needs 1 or {} values, got {}",
                ds.q(),
                sizes.len()
            )));
        }
        let kind = match self.grid {
            GridChoice::Quantile => GridKind::Quantile,
            GridChoice::Even => GridKind::Even,
        };
        build_grid(ds, kind, &sizes)
    }

    fn kernel(&self, ds: &SurvivalDataset) -> Result<KernelWeighting> {
        let bw = match &self.bandwidth {
            Some(h) if h.len() == 1 => Bandwidth::uniform(h[0], ds.q())?,
            Some(h) => Bandwidth::new(h.clone())?,
            None => silverman_bandwidth(ds)?,
        };
        Ok(KernelWeighting::Gaussian(bw))
    }

    fn fit(&self, ds: &SurvivalDataset) -> Result<VaryingCoefficientFit> {
        if !(self.ridge >= 0.0) {
            return Err(Error::InvalidArgument("--ridge must be nonnegative".into()));
        }
        fit_varying_coefficient(
            ds,
            &self.grid(ds)?,
            &self.kernel(ds)?,
            &FitOptions { ridge: self.ridge },
        )
    }
}

fn read_grid_file(path: &Path, q: usize) -> Result<EstimationGrid> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut points = Vec::new();
    for (k, row) in rdr.records().enumerate() {
        let row = row?;
        let p: Vec<f64> = row
            .iter()
            .map(|c| c.trim().parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect::<Option<_>>()
            .ok_or_else(|| Error::NonFiniteValue {
                row: k + 1,
                column: "grid".into(),
            })?;
        if p.len() != q {
            return Err(Error::DimensionMismatch {
                expected: q,
                found: p.len(),
            });
        }
        points.push(p);
    }
    EstimationGrid::from_points(&points)
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Output prefix: writes PREFIX.json, PREFIX_beta.csv and PREFIX_cumhaz.csv.
    #[arg(long)]
    pub out: PathBuf,
    /// Perturbation standard errors for the constant effects (needs --seed).
    #[arg(long)]
    pub se: bool,
    #[arg(long, default_value_t = 1000)]
    pub replicates: usize,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct BandArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Band interval `a,b`; defaults to the 5th and 95th percentiles of W.
    #[arg(long, value_parser = parse_interval)]
    pub interval: Option<(f64, f64)>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1000)]
    pub replicates: usize,
    #[arg(long)]
    pub seed: u64,
    /// Output prefix: writes PREFIX.json and PREFIX.csv.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Fit JSON written by `fit`.
    #[arg(long)]
    pub fit: PathBuf,
    /// Rows to score.
    #[arg(long)]
    pub data: PathBuf,
    /// Output CSV of scores.
    #[arg(long)]
    pub out: PathBuf,
    /// Time column; with it the C-index is reported.
    #[arg(long)]
    pub time_col: Option<String>,
    /// Status column; with it Harrell's censored C-index is used.
    #[arg(long)]
    pub status_col: Option<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DesignChoice {
    Q1,
    Q2,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value = "q1")]
    pub design: DesignChoice,
    /// Sample sizes, comma separated.
    #[arg(long, default_value = "500", value_delimiter = ',')]
    pub n: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    pub replicates: usize,
    #[arg(long, default_value = "constant,local,global", value_delimiter = ',')]
    pub methods: Vec<String>,
    /// Even grid size per axis for the global method.
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(2..))]
    pub grid_size: u64,
    #[arg(long)]
    pub seed: u64,
    /// Perturbation draws per replicate for band coverage (q1 only; 0 disables).
    #[arg(long, default_value_t = 0)]
    pub band_replicates: usize,
    #[arg(long, default_value_t = 500)]
    pub alpha_se_replicates: usize,
    #[arg(long, default_value_t = 10_000)]
    pub test_size: usize,
    #[arg(long, default_value_t = 100_000)]
    pub pilot_n: usize,
    /// Output prefix: writes PREFIX.csv and PREFIX.json.
    #[arg(long)]
    pub out: PathBuf,
}

/// Everything `predict` needs from a fit, as stored in the fit JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitArtifact {
    pub columns: Columns,
    pub grid_axes: Vec<Vec<f64>>,
    pub grid_points: Vec<Vec<f64>>,
    pub beta_grid: Vec<Vec<f64>>,
    pub alpha_joint: Vec<f64>,
    pub alpha_refit: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub alpha_se: Option<Vec<f64>>,
    pub cumhaz: CumhazTable,
    pub bandwidth: Vec<f64>,
    pub condition: f64,
    pub tau: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Columns {
    pub w: Vec<String>,
    pub x: Vec<String>,
    pub z: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CumhazTable {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

fn to_vec(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

impl FitArtifact {
    pub fn new(
        fit: &VaryingCoefficientFit,
        schema: &CsvSchema,
        tau: f64,
        alpha_se: Option<Vec<f64>>,
    ) -> Self {
        Self {
            columns: Columns {
                w: schema.w.clone(),
                x: schema.x.clone(),
                z: schema.z.clone(),
            },
            grid_axes: fit.grid.axes().to_vec(),
            grid_points: fit.grid.points(),
            beta_grid: fit.beta_grid.iter().map(to_vec).collect(),
            alpha_joint: to_vec(&fit.alpha_joint),
            alpha_refit: to_vec(&fit.alpha_refit),
            alpha_se,
            cumhaz: CumhazTable {
                times: fit.cumhaz.times().to_vec(),
                values: fit.cumhaz.values().to_vec(),
            },
            bandwidth: fit
                .bandwidth()
                .map(|b| b.values().to_vec())
                .unwrap_or_default(),
            condition: fit.system_condition,
            tau,
            warnings: fit.warnings.clone(),
        }
    }
}

/// A saved fit as a coefficient surface.
pub struct SavedFit {
    grid: EstimationGrid,
    beta_grid: Vec<DVector<f64>>,
    alpha: DVector<f64>,
}

impl SavedFit {
    pub fn from_artifact(a: &FitArtifact) -> Result<Self> {
        let grid = EstimationGrid::from_axes(a.grid_axes.clone(), GridKind::Explicit)?;
        if a.beta_grid.len() != grid.len() {
            return Err(Error::IncompleteValues {
                expected: grid.len(),
                found: a.beta_grid.len(),
            });
        }
        Ok(Self {
            grid,
            beta_grid: a
                .beta_grid
                .iter()
                .map(|b| DVector::from_column_slice(b))
                .collect(),
            alpha: DVector::from_column_slice(&a.alpha_refit),
        })
    }
}

impl CoefficientSurface for SavedFit {
    fn beta_at(&self, w: &[f64]) -> Result<DVector<f64>> {
        self.grid.interpolate(&self.beta_grid, w)
    }
    fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter()
        .map(|x| format!("{x:.6}"))
        .collect::<Vec<_>>()
        .join(", ")
}

fn cmd_fit(args: &FitArgs) -> Result<()> {
    if args.se && args.seed.is_none() {
        return Err(Error::InvalidArgument("--se needs --seed".into()));
    }
    let ds = args.data.load()?;
    let schema = args.data.schema();
    let fit = args.model.fit(&ds)?;
    let alpha_se = match (args.se, ds.r()) {
        (true, r) if r > 0 => Some(to_vec(&perturb_alpha_se(
            &ds,
            &fit,
            args.replicates,
            args.seed.unwrap_or(0),
        )?)),
        _ => None,
    };
    let artifact = FitArtifact::new(&fit, &schema, ds.tau(), alpha_se.clone());
    write_json(&with_suffix(&args.out, ".json"), &artifact)?;

    let mut beta = csv::Writer::from_writer(create(&with_suffix(&args.out, "_beta.csv"))?);
    let mut header: Vec<String> = schema.w.clone();
    header.extend(schema.x.iter().map(|x| format!("beta_{x}")));
    beta.write_record(&header)?;
    for (point, b) in artifact.grid_points.iter().zip(&artifact.beta_grid) {
        beta.write_record(point.iter().chain(b).map(|v| v.to_string()))?;
    }
    beta.flush()?;

    let mut ch = csv::Writer::from_writer(create(&with_suffix(&args.out, "_cumhaz.csv"))?);
    ch.write_record(["time", "cumhaz"])?;
    for (t, v) in artifact.cumhaz.times.iter().zip(&artifact.cumhaz.values) {
        ch.write_record([t.to_string(), v.to_string()])?;
    }
    ch.flush()?;

    println!(
        "subjects      {} ({} events)",
        ds.n(),
        ds.n_counted_events()
    );
    println!("grid points   {}", fit.grid.len());
    println!("bandwidth     {}", fmt_vec(&artifact.bandwidth));
    println!("condition     {:.3e}", fit.system_condition);
    for (k, name) in schema.z.iter().enumerate() {
        match &alpha_se {
            Some(se) => println!(
                "alpha[{name}]  {:.6} ({:.6})",
                artifact.alpha_refit[k], se[k]
            ),
            None => println!("alpha[{name}]  {:.6}", artifact.alpha_refit[k]),
        }
    }
    for w in &fit.warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}

#[derive(Serialize)]
struct BandJson<'a> {
    eval_points: &'a [f64],
    beta_hat: &'a [Vec<f64>],
    se: &'a [Vec<f64>],
    lower_pointwise: Vec<Vec<f64>>,
    upper_pointwise: Vec<Vec<f64>>,
    lower_band: Vec<Vec<f64>>,
    upper_band: Vec<Vec<f64>>,
    critical: &'a [f64],
    alpha_level: f64,
    replicates: usize,
}

fn cmd_band(args: &BandArgs) -> Result<()> {
    let ds = args.data.load()?;
    if ds.q() != 1 {
        return Err(Error::UnsupportedDimension(ds.q()));
    }
    if args.replicates < 100 {
        return Err(Error::TooFewReplicates(args.replicates));
    }
    let fit = args.model.fit(&ds)?;
    let band = build_band(
        &ds,
        &fit,
        &BandOptions {
            interval: args.interval,
            alpha_level: args.alpha,
            replicates: args.replicates,
            seed: args.seed,
            eval_points: 101,
        },
    )?;
    let json = BandJson {
        eval_points: &band.eval_points,
        beta_hat: &band.beta_hat,
        se: &band.se,
        lower_pointwise: band.lower_pointwise(),
        upper_pointwise: band.upper_pointwise(),
        lower_band: band.lower_band(),
        upper_band: band.upper_band(),
        critical: &band.critical,
        alpha_level: band.alpha_level,
        replicates: band.replicates,
    };
    write_json(&with_suffix(&args.out, ".json"), &json)?;

    let x = &args.data.x_cols;
    let mut out = csv::Writer::from_writer(create(&with_suffix(&args.out, ".csv"))?);
    let mut header = vec!["w".to_string()];
    for name in x {
        for part in [
            "beta",
            "se",
            "lower_pointwise",
            "upper_pointwise",
            "lower_band",
            "upper_band",
        ] {
            header.push(format!("{part}_{name}"));
        }
    }
    out.write_record(&header)?;
    for (j, w) in band.eval_points.iter().enumerate() {
        let mut row = vec![w.to_string()];
        for k in 0..x.len() {
            for v in [
                json.beta_hat[j][k],
                json.se[j][k],
                json.lower_pointwise[j][k],
                json.upper_pointwise[j][k],
                json.lower_band[j][k],
                json.upper_band[j][k],
            ] {
                row.push(v.to_string());
            }
        }
        out.write_record(&row)?;
    }
    out.flush()?;
    for (name, c) in x.iter().zip(&band.critical) {
        println!("critical[{name}]  {c:.6}");
    }
    Ok(())
}

fn cmd_predict(args: &PredictArgs) -> Result<()> {
    let artifact: FitArtifact =
        serde_json::from_reader(std::io::BufReader::new(File::open(&args.fit)?))?;
    let saved = SavedFit::from_artifact(&artifact)?;
    let mut rdr = csv::Reader::from_path(&args.data)?;
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let idx = |names: &[String]| names.iter().map(|n| find(n)).collect::<Result<Vec<_>>>();
    let (wi, xi, zi) = (
        idx(&artifact.columns.w)?,
        idx(&artifact.columns.x)?,
        idx(&artifact.columns.z)?,
    );
    let ti = args.time_col.as_deref().map(find).transpose()?;
    let si = args.status_col.as_deref().map(find).transpose()?;

    let mut scores = Vec::new();
    let mut times = Vec::new();
    let mut status = Vec::new();
    for (k, row) in rdr.records().enumerate() {
        let row = row?;
        let cell = |c: usize| -> Result<f64> {
            row.get(c)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::NonFiniteValue {
                    row: k + 1,
                    column: headers.get(c).unwrap_or("").to_string(),
                })
        };
        let block = |cs: &[usize]| cs.iter().map(|&c| cell(c)).collect::<Result<Vec<f64>>>();
        scores.push(saved.linear_predictor(&block(&wi)?, &block(&xi)?, &block(&zi)?)?);
        if let Some(c) = ti {
            times.push(cell(c)?);
        }
        if let Some(c) = si {
            match cell(c)? {
                s if s == 0.0 => status.push(false),
                s if s == 1.0 => status.push(true),
                _ => return Err(Error::NonBinaryStatus(k + 1)),
            }
        }
    }
    let mut out = csv::Writer::from_writer(create(&args.out)?);
    out.write_record(["row", "score"])?;
    for (i, s) in scores.iter().enumerate() {
        out.write_record([(i + 1).to_string(), s.to_string()])?;
    }
    out.flush()?;
    if ti.is_some() {
        let c = if si.is_some() {
            c_index_harrell(&scores, &times, &status)?
        } else {
            c_index(&scores, &times)?
        };
        println!("c_index  {c:.6}");
    }
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let q = match args.design {
        DesignChoice::Q1 => 1,
        DesignChoice::Q2 => 2,
    };
    let mut config = StudyConfig::new(q, args.n.clone(), args.replicates, args.seed)?;
    config.methods = args
        .methods
        .iter()
        .map(|m| m.parse())
        .collect::<Result<Vec<Method>>>()?;
    config.grid_size = args.grid_size as usize;
    config.alpha_se_replicates = args.alpha_se_replicates;
    config.test_size = args.test_size;
    config.pilot_n = args.pilot_n;
    if args.band_replicates > 0 {
        if q != 1 {
            return Err(Error::UnsupportedDimension(q));
        }
        if args.band_replicates < 100 {
            return Err(Error::TooFewReplicates(args.band_replicates));
        }
        config.band = Some(StudyBand {
            interval: (0.05, 0.95),
            alpha_level: 0.05,
            replicates: args.band_replicates,
        });
    }
    let report = run_study(&config)?;
    report.write_csv(create(&with_suffix(&args.out, ".csv"))?)?;
    write_json(&with_suffix(&args.out, ".json"), &report)?;
    println!("censoring mean {:.6}", report.censoring_mean);
    for s in &report.summaries {
        println!(
            "n={:<6} {:<9} mse={:.4} c_index={:.4} failed={}",
            s.n,
            s.method.to_string(),
            s.mse,
            s.c_index,
            s.failed
        );
    }
    Ok(())
}

/// Exit status for an error: usage problems 2, everything else 1.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::UnsupportedDimension(_) | Error::TooFewReplicates(_) | Error::InvalidArgument(_) => {
            EXIT_USAGE
        }
        _ => EXIT_NUMERICAL,
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Band(a) => cmd_band(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Simulate(a) => cmd_simulate(a),
    }
}

/// Parses `args`, runs the command, and returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let threads = cli.threads.unwrap_or(0);
    if let Err(e) = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
    {
        log::debug!("thread pool already configured: {e}");
    }
    match run(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
