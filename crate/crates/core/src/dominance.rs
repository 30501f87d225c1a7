//! Diagonal-dominance diagnostics of the momentum Gram matrix `G = VVᵀ`.
//!
//! For row `i`, `r_i = G_ii / ((1/(m-1)) Σ_{j≠i} |G_ij|)`. Values above one
//! mean the row's own energy dominates its average coupling to other rows,
//! which is when dropping the off-diagonal blocks of the Muon preconditioner
//! loses little.
//!
//! Exactly orthogonal rows give `r_i = +∞`; aggregates clamp those to a cap
//! and flag the report. A zero row gives `r_i = 0` and is flagged degenerate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{dot, Matrix};

/// Cap substituted for infinite ratios when aggregating.
pub const DEFAULT_RATIO_CAP: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct RowRatios {
    pub r: Vec<f64>,
    /// Rows whose Gram diagonal and off-diagonals are all zero.
    pub degenerate_rows: Vec<usize>,
}

impl RowRatios {
    pub fn has_infinite(&self) -> bool {
        self.r.iter().any(|x| x.is_infinite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub r_avg: f64,
    pub r_min: f64,
    pub r_max: f64,
    /// At least one ratio (typically an infinite one) was replaced by the cap.
    pub clamped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DominanceReport {
    pub step: u64,
    pub param_id: usize,
    pub r_avg: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub clamped: bool,
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlobalDominance {
    pub step: u64,
    pub rbar_avg: f64,
    pub rbar_min: f64,
    pub rbar_max: f64,
}

fn ratio(diag: f64, off_sum: f64, m: usize) -> f64 {
    let off_mean = off_sum / (m - 1) as f64;
    if off_mean > 0.0 {
        diag / off_mean
    } else if diag > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

fn require_rows(v: &Matrix) -> Result<()> {
    if v.rows() < 2 {
        return Err(Error::UndefinedMetric(format!(
            "dominance ratio needs at least two rows, got {}",
            v.rows()
        )));
    }
    Ok(())
}

/// Ratios from the explicit m×m Gram matrix.
pub fn row_ratios(v: &Matrix) -> Result<RowRatios> {
    require_rows(v)?;
    let m = v.rows();
    let g = v.gram();
    let mut r = Vec::with_capacity(m);
    let mut degenerate_rows = Vec::new();
    for i in 0..m {
        let gi = g.row(i);
        let off: f64 = gi
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, x)| x.abs())
            .sum();
        let ri = ratio(gi[i], off, m);
        if gi[i] == 0.0 && off == 0.0 {
            degenerate_rows.push(i);
        }
        r.push(ri);
    }
    Ok(RowRatios { r, degenerate_rows })
}

/// Same ratios from per-row dot products, never materializing the Gram matrix.
pub fn row_ratios_streaming(v: &Matrix) -> Result<RowRatios> {
    require_rows(v)?;
    let m = v.rows();
    let mut r = Vec::with_capacity(m);
    let mut degenerate_rows = Vec::new();
    for i in 0..m {
        let vi = v.row(i);
        let diag = dot(vi, vi);
        let mut off = 0.0;
        for j in (0..m).filter(|&j| j != i) {
            off += dot(vi, v.row(j)).abs();
        }
        if diag == 0.0 && off == 0.0 {
            degenerate_rows.push(i);
        }
        r.push(ratio(diag, off, m));
    }
    Ok(RowRatios { r, degenerate_rows })
}

/// Mean, min and max of the ratios with infinities replaced by `cap`.
pub fn aggregate(rr: &RowRatios, cap: f64) -> Result<Aggregate> {
    if rr.r.is_empty() {
        return Err(Error::EmptyInput("row ratios"));
    }
    let mut clamped = false;
    let mut sum = 0.0;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &x in &rr.r {
        let x = if x > cap {
            clamped = true;
            cap
        } else {
            x
        };
        sum += x;
        lo = lo.min(x);
        hi = hi.max(x);
    }
    let avg = (sum / rr.r.len() as f64).clamp(lo, hi);
    Ok(Aggregate {
        r_avg: avg,
        r_min: lo,
        r_max: hi,
        clamped,
    })
}

/// Per-parameter report for momentum `v` at `step`.
pub fn report(step: u64, param_id: usize, v: &Matrix, cap: f64) -> Result<DominanceReport> {
    let rr = row_ratios(v)?;
    let agg = aggregate(&rr, cap)?;
    Ok(DominanceReport {
        step,
        param_id,
        r_avg: agg.r_avg,
        r_min: agg.r_min,
        r_max: agg.r_max,
        clamped: agg.clamped,
        degenerate: !rr.degenerate_rows.is_empty(),
    })
}

/// Unweighted means over parameters of the per-parameter statistics.
pub fn global_aggregate(reports: &[DominanceReport]) -> Result<GlobalDominance> {
    let first = reports.first().ok_or(Error::EmptyInput("dominance reports"))?;
    if let Some(r) = reports.iter().find(|r| r.step != first.step) {
        return Err(Error::Config(format!(
            "reports mix steps {} and {}",
            first.step, r.step
        )));
    }
    let k = reports.len() as f64;
    let mean = |f: fn(&DominanceReport) -> f64| reports.iter().map(f).sum::<f64>() / k;
    Ok(GlobalDominance {
        step: first.step,
        rbar_avg: mean(|r| r.r_avg),
        rbar_min: mean(|r| r.r_min),
        rbar_max: mean(|r| r.r_max),
    })
}

/// Trailing simple moving average; the first `window - 1` outputs average the
/// available prefix.
pub fn smooth(series: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut out = Vec::with_capacity(series.len());
    let mut acc = 0.0;
    for (i, &x) in series.iter().enumerate() {
        acc += x;
        if i >= window {
            acc -= series[i - window];
        }
        let count = (i + 1).min(window);
        out.push(acc / count as f64);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn hand_examples() {
        assert_eq!(row_ratios(&m(&[&[1.0, 0.0], &[1.0, 0.0]])).unwrap().r, vec![1.0, 1.0]);
        // Gram [[1,1],[1,2]]
        assert_eq!(row_ratios(&m(&[&[1.0, 0.0], &[1.0, 1.0]])).unwrap().r, vec![1.0, 2.0]);
        let rr = row_ratios(&Matrix::identity(3)).unwrap();
        assert!(rr.r.iter().all(|x| *x == f64::INFINITY));
        assert!(rr.has_infinite());
    }

    #[test]
    fn single_row_is_undefined() {
        assert!(matches!(
            row_ratios(&m(&[&[1.0, 2.0]])),
            Err(Error::UndefinedMetric(_))
        ));
        assert!(row_ratios_streaming(&m(&[&[1.0, 2.0]])).is_err());
    }

    #[test]
    fn zero_row_is_degenerate() {
        let rr = row_ratios(&m(&[&[0.0, 0.0], &[1.0, 2.0], &[0.0, 0.0]])).unwrap();
        assert_eq!(rr.r[0], 0.0);
        assert_eq!(rr.r[1], f64::INFINITY);
        assert_eq!(rr.degenerate_rows, vec![0, 2]);
        let rep = report(3, 1, &m(&[&[0.0, 0.0], &[1.0, 1.0]]), DEFAULT_RATIO_CAP).unwrap();
        assert!(rep.degenerate && rep.clamped);
        assert_eq!(rep.r_max, DEFAULT_RATIO_CAP);
    }

    #[test]
    fn aggregate_examples() {
        let agg = |r: Vec<f64>| aggregate(&RowRatios { r, degenerate_rows: vec![] }, DEFAULT_RATIO_CAP).unwrap();
        let a = agg(vec![1.0, 2.0]);
        assert_eq!((a.r_avg, a.r_min, a.r_max), (1.5, 1.0, 2.0));
        let a = agg(vec![4.25; 5]);
        assert_eq!((a.r_avg, a.r_min, a.r_max), (4.25, 4.25, 4.25));
        let a = agg(vec![1.0, 3.0, 5.0]);
        assert_eq!((a.r_avg, a.r_min, a.r_max, a.clamped), (3.0, 1.0, 5.0, false));
        let a = agg(vec![1.0, f64::INFINITY]);
        assert!(a.clamped);
        assert_eq!(a.r_max, DEFAULT_RATIO_CAP);
        assert!(aggregate(&RowRatios { r: vec![], degenerate_rows: vec![] }, 1.0).is_err());
    }

    fn rep(step: u64, id: usize, avg: f64, lo: f64, hi: f64) -> DominanceReport {
        DominanceReport {
            step,
            param_id: id,
            r_avg: avg,
            r_min: lo,
            r_max: hi,
            clamped: false,
            degenerate: false,
        }
    }

    #[test]
    fn global_examples() {
        let one = rep(7, 0, 2.0, 1.0, 3.0);
        let g = global_aggregate(&[one]).unwrap();
        assert_eq!((g.step, g.rbar_avg, g.rbar_min, g.rbar_max), (7, 2.0, 1.0, 3.0));
        let g = global_aggregate(&[rep(1, 0, 2.0, 1.0, 3.0), rep(1, 1, 4.0, 2.0, 9.0)]).unwrap();
        assert_eq!((g.rbar_avg, g.rbar_min, g.rbar_max), (3.0, 1.5, 6.0));
        assert!(matches!(global_aggregate(&[]), Err(Error::EmptyInput(_))));
        assert!(global_aggregate(&[rep(1, 0, 1.0, 1.0, 1.0), rep(2, 1, 1.0, 1.0, 1.0)]).is_err());
    }

    #[test]
    fn smoothing_examples() {
        let s = [3.0, -1.0, 7.5];
        assert_eq!(smooth(&s, 1), s.to_vec());
        assert_eq!(smooth(&[2.0; 6], 4), vec![2.0; 6]);
        assert_eq!(smooth(&[0.0, 2.0, 4.0], 2), vec![0.0, 1.0, 3.0]);
        assert_eq!(smooth(&[], 3), Vec::<f64>::new());
    }
}
