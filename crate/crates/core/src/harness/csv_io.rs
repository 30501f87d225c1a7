//! CSV emission and parsing. Floats are written in scientific notation with
//! 17 significant digits, which round-trips every `f64`; rows end in LF.

use std::io::{Read, Write};

use crate::error::{Error, Result};

use super::bench::BenchRecord;
use super::rate::RatePoint;
use super::train::TrainLog;

pub const BENCH_HEADER: [&str; 7] = [
    "kind",
    "m",
    "n",
    "repeats",
    "total_seconds",
    "seconds_per_call",
    "flop_estimate",
];

pub const TRAIN_HEADER: [&str; 6] = ["step", "lr", "loss", "grad_norm_f", "grad_norm_12", "update_norm_f"];

pub const DOMINANCE_HEADER: [&str; 7] = ["param_id", "r_avg", "r_min", "r_max", "rbar_avg", "rbar_min", "rbar_max"];

pub const RATE_HEADER: [&str; 5] = ["total_steps", "eta", "beta", "avg_grad_norm_f", "avg_grad_norm_12"];

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().has_headers(true).from_reader(r)
}

fn parse<T: std::str::FromStr>(field: Option<&str>, name: &str) -> Result<T> {
    let s = field.ok_or_else(|| Error::Parse(format!("missing column '{name}'")))?;
    s.parse()
        .map_err(|_| Error::Parse(format!("bad value '{s}' in column '{name}'")))
}

fn check_header(found: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    if found.iter().ne(expected.iter().copied()) {
        return Err(Error::Parse(format!(
            "unexpected header {:?}, wanted {expected:?}",
            found.iter().collect::<Vec<_>>()
        )));
    }
    Ok(())
}

/// The seven serialized bench columns.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub kind: String,
    pub m: usize,
    pub n: usize,
    pub repeats: usize,
    pub total_seconds: f64,
    pub seconds_per_call: f64,
    pub flop_estimate: f64,
}

impl From<&BenchRecord> for BenchRow {
    fn from(r: &BenchRecord) -> Self {
        Self {
            kind: r.kind.clone(),
            m: r.m,
            n: r.n,
            repeats: r.repeats,
            total_seconds: r.total_seconds,
            seconds_per_call: r.seconds_per_call,
            flop_estimate: r.flop_estimate,
        }
    }
}

pub fn write_bench_rows<W: Write>(w: W, rows: &[BenchRow]) -> Result<()> {
    let mut out = writer(w);
    out.write_record(BENCH_HEADER)?;
    for r in rows {
        out.write_record([
            r.kind.clone(),
            r.m.to_string(),
            r.n.to_string(),
            r.repeats.to_string(),
            fmt_f64(r.total_seconds),
            fmt_f64(r.seconds_per_call),
            fmt_f64(r.flop_estimate),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_bench_csv<W: Write>(w: W, records: &[BenchRecord]) -> Result<()> {
    let rows: Vec<BenchRow> = records.iter().map(BenchRow::from).collect();
    write_bench_rows(w, &rows)
}

pub fn read_bench_csv<R: Read>(r: R) -> Result<Vec<BenchRow>> {
    let mut rd = reader(r);
    check_header(rd.headers()?, &BENCH_HEADER)?;
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        rows.push(BenchRow {
            kind: parse(rec.get(0), "kind")?,
            m: parse(rec.get(1), "m")?,
            n: parse(rec.get(2), "n")?,
            repeats: parse(rec.get(3), "repeats")?,
            total_seconds: parse(rec.get(4), "total_seconds")?,
            seconds_per_call: parse(rec.get(5), "seconds_per_call")?,
            flop_estimate: parse(rec.get(6), "flop_estimate")?,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DominanceCols {
    pub param_id: usize,
    pub r_avg: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub rbar_avg: f64,
    pub rbar_min: f64,
    pub rbar_max: f64,
}

/// One serialized train row. With dominance logging there is one row per
/// matrix parameter per logged step.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainRow {
    pub step: u64,
    pub lr: f64,
    pub loss: f64,
    pub grad_norm_f: f64,
    pub grad_norm_12: f64,
    pub update_norm_f: f64,
    pub dominance: Option<DominanceCols>,
}

pub fn train_rows(log: &TrainLog) -> Vec<TrainRow> {
    let mut rows = Vec::new();
    for r in &log.records {
        let base = TrainRow {
            step: r.step,
            lr: r.lr,
            loss: r.loss,
            grad_norm_f: r.grad_norm_f,
            grad_norm_12: r.grad_norm_12,
            update_norm_f: r.update_norm_f,
            dominance: None,
        };
        match (&r.global, log.dominance) {
            (Some(g), true) => {
                for d in &r.dominance {
                    rows.push(TrainRow {
                        dominance: Some(DominanceCols {
                            param_id: d.param_id,
                            r_avg: d.r_avg,
                            r_min: d.r_min,
                            r_max: d.r_max,
                            rbar_avg: g.rbar_avg,
                            rbar_min: g.rbar_min,
                            rbar_max: g.rbar_max,
                        }),
                        ..base.clone()
                    });
                }
            }
            _ => rows.push(base),
        }
    }
    rows
}

/// Writes train rows; `dominance` selects the wide header and every row must
/// then carry dominance columns.
pub fn write_train_rows<W: Write>(w: W, rows: &[TrainRow], dominance: bool) -> Result<()> {
    let mut out = writer(w);
    let mut header: Vec<&str> = TRAIN_HEADER.to_vec();
    if dominance {
        header.extend(DOMINANCE_HEADER);
    }
    out.write_record(&header)?;
    for r in rows {
        let mut fields = vec![
            r.step.to_string(),
            fmt_f64(r.lr),
            fmt_f64(r.loss),
            fmt_f64(r.grad_norm_f),
            fmt_f64(r.grad_norm_12),
            fmt_f64(r.update_norm_f),
        ];
        match (&r.dominance, dominance) {
            (Some(d), true) => fields.extend([
                d.param_id.to_string(),
                fmt_f64(d.r_avg),
                fmt_f64(d.r_min),
                fmt_f64(d.r_max),
                fmt_f64(d.rbar_avg),
                fmt_f64(d.rbar_min),
                fmt_f64(d.rbar_max),
            ]),
            (None, false) => {}
            _ => {
                return Err(Error::Config(format!(
                    "row for step {} does not match the {} header",
                    r.step,
                    if dominance { "dominance" } else { "plain" }
                )))
            }
        }
        out.write_record(&fields)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_train_csv<W: Write>(w: W, log: &TrainLog) -> Result<()> {
    write_train_rows(w, &train_rows(log), log.dominance)
}

/// Parses a train file; the returned flag says whether it has dominance columns.
pub fn read_train_csv<R: Read>(r: R) -> Result<(Vec<TrainRow>, bool)> {
    let mut rd = reader(r);
    let header = rd.headers()?.clone();
    let dominance = header.len() == TRAIN_HEADER.len() + DOMINANCE_HEADER.len();
    let expected: Vec<&str> = if dominance {
        TRAIN_HEADER.iter().chain(DOMINANCE_HEADER.iter()).copied().collect()
    } else {
        TRAIN_HEADER.to_vec()
    };
    check_header(&header, &expected)?;
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let g = |i: usize| rec.get(i);
        rows.push(TrainRow {
            step: parse(g(0), "step")?,
            lr: parse(g(1), "lr")?,
            loss: parse(g(2), "loss")?,
            grad_norm_f: parse(g(3), "grad_norm_f")?,
            grad_norm_12: parse(g(4), "grad_norm_12")?,
            update_norm_f: parse(g(5), "update_norm_f")?,
            dominance: if dominance {
                Some(DominanceCols {
                    param_id: parse(g(6), "param_id")?,
                    r_avg: parse(g(7), "r_avg")?,
                    r_min: parse(g(8), "r_min")?,
                    r_max: parse(g(9), "r_max")?,
                    rbar_avg: parse(g(10), "rbar_avg")?,
                    rbar_min: parse(g(11), "rbar_min")?,
                    rbar_max: parse(g(12), "rbar_max")?,
                })
            } else {
                None
            },
        });
    }
    Ok((rows, dominance))
}

pub fn write_rate_csv<W: Write>(w: W, points: &[RatePoint]) -> Result<()> {
    let mut out = writer(w);
    out.write_record(RATE_HEADER)?;
    for p in points {
        out.write_record([
            p.total_steps.to_string(),
            fmt_f64(p.eta),
            fmt_f64(p.beta),
            fmt_f64(p.avg_grad_norm_f),
            fmt_f64(p.avg_grad_norm_12),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_rate_csv<R: Read>(r: R) -> Result<Vec<RatePoint>> {
    let mut rd = reader(r);
    check_header(rd.headers()?, &RATE_HEADER)?;
    let mut points = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        points.push(RatePoint {
            total_steps: parse(rec.get(0), "total_steps")?,
            eta: parse(rec.get(1), "eta")?,
            beta: parse(rec.get(2), "beta")?,
            avg_grad_norm_f: parse(rec.get(3), "avg_grad_norm_f")?,
            avg_grad_norm_12: parse(rec.get(4), "avg_grad_norm_12")?,
        });
    }
    Ok(points)
}
