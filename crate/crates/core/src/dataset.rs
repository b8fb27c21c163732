//! Right-censored survival data with effect modifiers `W`, varying-effect
//! covariates `X`, and constant-effect covariates `Z`.

use std::io::{Read, Write};
use std::path::Path;

use log::warn;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::stepfun::{StepFunction, StepValue};

/// One subject's observation.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalRecord {
    pub time: f64,
    pub status: bool,
    pub w: Vec<f64>,
    pub x: Vec<f64>,
    pub z: Vec<f64>,
}

/// Sorted distinct observed times with event and exit counts.
///
/// Interval `d` is `(times[d-1], times[d]]` (with `times[-1] = 0`); every
/// subject with `T ≥ times[d]` is at risk throughout it.
#[derive(Debug, Clone)]
pub struct Timeline {
    times: Vec<f64>,
    events: Vec<usize>,
    at_risk: Vec<usize>,
    /// subject -> index of its observed time in `times`
    slot: Vec<usize>,
    /// subjects grouped by slot, in slot order
    order: Vec<usize>,
    group_start: Vec<usize>,
}

impl Timeline {
    fn new(time: &[f64], status: &[bool]) -> Self {
        let n = time.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| time[a].total_cmp(&time[b]).then(a.cmp(&b)));
        let mut times = Vec::new();
        let mut events = Vec::new();
        let mut group_start = Vec::new();
        let mut slot = vec![0; n];
        for (pos, &i) in order.iter().enumerate() {
            if times.last() != Some(&time[i]) {
                times.push(time[i]);
                events.push(0);
                group_start.push(pos);
            }
            let d = times.len() - 1;
            slot[i] = d;
            if status[i] {
                events[d] += 1;
            }
        }
        group_start.push(n);
        let at_risk = group_start[..times.len()].iter().map(|&s| n - s).collect();
        Self {
            times,
            events,
            at_risk,
            slot,
            order,
            group_start,
        }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Number of events at each distinct time.
    pub fn events(&self) -> &[usize] {
        &self.events
    }

    /// `Y(tₖ) = #{i : Tᵢ ≥ tₖ}` at each distinct time.
    pub fn at_risk(&self) -> &[usize] {
        &self.at_risk
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Index of subject `i`'s observed time.
    pub fn slot(&self, i: usize) -> usize {
        self.slot[i]
    }

    /// Subjects whose observed time is `times[d]`.
    pub fn subjects_at(&self, d: usize) -> &[usize] {
        &self.order[self.group_start[d]..self.group_start[d + 1]]
    }

    /// Length of each interval `(t_{d-1}, t_d]` after truncation at `tau`.
    pub fn interval_lengths(&self, tau: f64) -> Vec<f64> {
        let mut prev = 0.0;
        self.times
            .iter()
            .map(|&t| {
                let end = t.min(tau);
                let len = (end - prev).max(0.0);
                prev = prev.max(end);
                len
            })
            .collect()
    }

    /// `Σ_{i : Tᵢ ≥ t_d} f(i)` for every distinct time, by backward accumulation.
    pub fn risk_sums<V: StepValue>(&self, zero: V, f: impl Fn(usize) -> V) -> Vec<V> {
        let mut out = vec![zero.clone(); self.len()];
        let mut acc = zero;
        for d in (0..self.len()).rev() {
            for &i in self.subjects_at(d) {
                acc.add_scaled(&f(i), 1.0);
            }
            out[d] = acc.clone();
        }
        out
    }

    /// Materializes per-interval values as a right-continuous step function
    /// with breakpoints at the distinct times; zero past the last time.
    pub fn to_step_function<V: StepValue>(&self, per_interval: &[V]) -> Result<StepFunction<V>> {
        let Some(first) = per_interval.first() else {
            return Err(Error::EmptyDataset);
        };
        let mut breakpoints = vec![0.0];
        let mut values = Vec::with_capacity(per_interval.len() + 1);
        for (d, v) in per_interval.iter().enumerate() {
            if self.times[d] == 0.0 {
                continue;
            }
            values.push(v.clone());
            breakpoints.push(self.times[d]);
        }
        values.push(first.zero_like());
        StepFunction::new(breakpoints, values)
    }
}

/// A validated right-censored dataset.
///
/// Covariate blocks are stored row-per-subject: `w` is `n × q`, `x` is
/// `n × p`, `z` is `n × r` (possibly `r = 0`).
#[derive(Debug, Clone)]
pub struct SurvivalDataset {
    time: Vec<f64>,
    status: Vec<bool>,
    w: DMatrix<f64>,
    x: DMatrix<f64>,
    z: DMatrix<f64>,
    tau: f64,
    timeline: Timeline,
}

impl SurvivalDataset {
    pub fn new(records: Vec<SurvivalRecord>) -> Result<Self> {
        let Some(first) = records.first() else {
            return Err(Error::EmptyDataset);
        };
        let (q, p, r) = (first.w.len(), first.x.len(), first.z.len());
        if q == 0 || p == 0 {
            return Err(Error::InvalidRecord("w and x must be non-empty".into()));
        }
        let n = records.len();
        if n < 2 {
            return Err(Error::InvalidRecord(
                "at least two subjects are required".into(),
            ));
        }
        let mut w = DMatrix::zeros(n, q);
        let mut x = DMatrix::zeros(n, p);
        let mut z = DMatrix::zeros(n, r);
        let mut time = Vec::with_capacity(n);
        let mut status = Vec::with_capacity(n);
        for (i, rec) in records.iter().enumerate() {
            if rec.w.len() != q || rec.x.len() != p || rec.z.len() != r {
                return Err(Error::InvalidRecord(format!(
                    "record {} has block sizes ({}, {}, {}), expected ({q}, {p}, {r})",
                    i + 1,
                    rec.w.len(),
                    rec.x.len(),
                    rec.z.len()
                )));
            }
            if !rec.time.is_finite() || rec.time < 0.0 {
                return Err(Error::InvalidRecord(format!(
                    "record {} has invalid time {}",
                    i + 1,
                    rec.time
                )));
            }
            let all = rec.w.iter().chain(&rec.x).chain(&rec.z);
            if all.into_iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteValue {
                    row: i + 1,
                    column: "covariate".into(),
                });
            }
            time.push(rec.time);
            status.push(rec.status);
            w.row_mut(i).copy_from_slice(&rec.w);
            x.row_mut(i).copy_from_slice(&rec.x);
            z.row_mut(i).copy_from_slice(&rec.z);
        }
        let tau = time.iter().copied().fold(0.0, f64::max);
        let timeline = Timeline::new(&time, &status);
        Ok(Self {
            time,
            status,
            w,
            x,
            z,
            tau,
            timeline,
        })
    }

    /// Lowers (or restores) the integration horizon. Subjects observed past
    /// `tau` are truncated there: at risk until `tau`, with no event mass.
    pub fn with_tau(mut self, tau: f64) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "tau must be positive, got {tau}"
            )));
        }
        self.tau = tau;
        let beyond = self.n_beyond_tau();
        if beyond > 0 {
            warn!("{beyond} subjects observed past tau = {tau} are truncated at tau");
        }
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.time.len()
    }
    pub fn q(&self) -> usize {
        self.w.ncols()
    }
    pub fn p(&self) -> usize {
        self.x.ncols()
    }
    pub fn r(&self) -> usize {
        self.z.ncols()
    }
    pub fn tau(&self) -> f64 {
        self.tau
    }
    pub fn time(&self, i: usize) -> f64 {
        self.time[i]
    }
    pub fn times(&self) -> &[f64] {
        &self.time
    }
    pub fn status(&self, i: usize) -> bool {
        self.status[i]
    }
    pub fn statuses(&self) -> &[bool] {
        &self.status
    }
    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }
    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }
    pub fn z(&self) -> &DMatrix<f64> {
        &self.z
    }
    pub fn timeline(&self) -> &Timeline {
        &self.timeline
    }

    pub fn w_row(&self, i: usize) -> Vec<f64> {
        self.w.row(i).iter().copied().collect()
    }
    pub fn x_row(&self, i: usize) -> DVector<f64> {
        self.x.row(i).transpose()
    }
    pub fn z_row(&self, i: usize) -> DVector<f64> {
        self.z.row(i).transpose()
    }

    pub fn record(&self, i: usize) -> SurvivalRecord {
        SurvivalRecord {
            time: self.time[i],
            status: self.status[i],
            w: self.w_row(i),
            x: self.x.row(i).iter().copied().collect(),
            z: self.z.row(i).iter().copied().collect(),
        }
    }

    /// Whether subject `i` contributes a jump to `∫₀^τ dNᵢ`.
    pub fn counts_event(&self, i: usize) -> bool {
        self.status[i] && self.time[i] <= self.tau
    }

    /// `∫₀^τ Yᵢ(t) dt`.
    pub fn exposure(&self, i: usize) -> f64 {
        self.time[i].min(self.tau)
    }

    pub fn n_events(&self) -> usize {
        self.status.iter().filter(|s| **s).count()
    }

    pub fn n_counted_events(&self) -> usize {
        (0..self.n()).filter(|&i| self.counts_event(i)).count()
    }

    pub fn n_beyond_tau(&self) -> usize {
        self.time.iter().filter(|&&t| t > self.tau).count()
    }

    /// Copy with a different constant-effect block (used by estimators that
    /// treat covariates generically).
    pub fn with_covariates(&self, x: DMatrix<f64>, z: DMatrix<f64>) -> Result<Self> {
        if x.nrows() != self.n() || z.nrows() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                found: x.nrows().min(z.nrows()),
            });
        }
        Ok(Self {
            x,
            z,
            ..self.clone()
        })
    }
}

/// `Y(t) = Σᵢ I(Tᵢ ≥ t)`.
pub fn risk_set_size(ds: &SurvivalDataset, t: f64) -> usize {
    let tl = ds.timeline();
    let d = tl.times().partition_point(|&s| s < t);
    tl.at_risk().get(d).copied().unwrap_or(0)
}

/// Column mapping for CSV input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvSchema {
    pub time: String,
    pub status: String,
    pub w: Vec<String>,
    pub x: Vec<String>,
    pub z: Vec<String>,
}

impl CsvSchema {
    /// `time,status,w1..,x1..,z1..` names for the given block sizes.
    pub fn default_names(q: usize, p: usize, r: usize) -> Self {
        let names = |prefix: &str, k: usize| (1..=k).map(|j| format!("{prefix}{j}")).collect();
        Self {
            time: "time".into(),
            status: "status".into(),
            w: names("w", q),
            x: names("x", p),
            z: names("z", r),
        }
    }
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::MissingColumn(name.to_string()))
}

/// Reads a headed CSV. Row numbers in errors count data rows from 1.
pub fn read_csv<R: Read>(reader: R, schema: &CsvSchema) -> Result<SurvivalDataset> {
    if schema.w.is_empty() {
        return Err(Error::MissingColumn("w columns".into()));
    }
    if schema.x.is_empty() {
        return Err(Error::MissingColumn("x columns".into()));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let t_col = column(&headers, &schema.time)?;
    let s_col = column(&headers, &schema.status)?;
    let cols = |names: &[String]| -> Result<Vec<(usize, String)>> {
        names
            .iter()
            .map(|n| column(&headers, n).map(|c| (c, n.clone())))
            .collect()
    };
    let (w_cols, x_cols, z_cols) = (cols(&schema.w)?, cols(&schema.x)?, cols(&schema.z)?);

    let mut records = Vec::new();
    for (k, row) in rdr.records().enumerate() {
        let row = row?;
        let line = k + 1;
        let cell = |c: usize, name: &str| -> Result<f64> {
            row.get(c)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::NonFiniteValue {
                    row: line,
                    column: name.to_string(),
                })
        };
        let time = cell(t_col, &schema.time)?;
        if time < 0.0 {
            return Err(Error::InvalidRecord(format!("negative time in row {line}")));
        }
        let status = match cell(s_col, &schema.status)? {
            s if s == 0.0 => false,
            s if s == 1.0 => true,
            _ => return Err(Error::NonBinaryStatus(line)),
        };
        let block = |cs: &[(usize, String)]| -> Result<Vec<f64>> {
            cs.iter().map(|(c, name)| cell(*c, name)).collect()
        };
        records.push(SurvivalRecord {
            time,
            status,
            w: block(&w_cols)?,
            x: block(&x_cols)?,
            z: block(&z_cols)?,
        });
    }
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    SurvivalDataset::new(records)
}

pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<SurvivalDataset> {
    let file = std::fs::File::open(path)?;
    read_csv(std::io::BufReader::new(file), schema)
}

/// Writes the dataset with the schema's column names. Values use Rust's
/// shortest round-trip formatting, so reloading is bit-exact.
pub fn write_csv<W: Write>(ds: &SurvivalDataset, schema: &CsvSchema, writer: W) -> Result<()> {
    if schema.w.len() != ds.q() || schema.x.len() != ds.p() || schema.z.len() != ds.r() {
        return Err(Error::InvalidArgument(
            "schema does not match dataset shape".into(),
        ));
    }
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec![schema.time.clone(), schema.status.clone()];
    header.extend(schema.w.iter().chain(&schema.x).chain(&schema.z).cloned());
    wtr.write_record(&header)?;
    for i in 0..ds.n() {
        let mut row = vec![
            ds.time(i).to_string(),
            if ds.status(i) { "1" } else { "0" }.to_string(),
        ];
        let rec = ds.record(i);
        row.extend(
            rec.w
                .iter()
                .chain(&rec.x)
                .chain(&rec.z)
                .map(|v| v.to_string()),
        );
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn save_csv(ds: &SurvivalDataset, schema: &CsvSchema, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv(ds, schema, std::io::BufWriter::new(file))
}
