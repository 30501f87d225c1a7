//! Wall-clock microbenchmarks of the preconditioner call alone.
//!
//! Inputs and output buffers are created, and the workspace warmed, before
//! the clock starts; the timed region contains only preconditioner calls.
//! Each measurement is `OUTER_REPS` blocks of `repeats` calls, and the
//! reported total is the median block.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::precond::{NsCoefficients, Preconditioner, PreconditionerKind, DEFAULT_RN_EPS};

pub const OUTER_REPS: usize = 5;
pub const DEFAULT_REPEATS: usize = 100;

/// Coefficient of variation across outer blocks above which a size is flagged.
pub const NOISY_CV: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub kind: String,
    pub m: usize,
    pub n: usize,
    pub repeats: usize,
    /// Median over the outer blocks of the time for `repeats` calls.
    pub total_seconds: f64,
    pub seconds_per_call: f64,
    pub flop_estimate: f64,
    /// Every outer block's total, in measurement order.
    pub block_seconds: Vec<f64>,
}

impl BenchRecord {
    pub fn mean_total(&self) -> f64 {
        self.block_seconds.iter().sum::<f64>() / self.block_seconds.len() as f64
    }

    pub fn coefficient_of_variation(&self) -> f64 {
        let k = self.block_seconds.len() as f64;
        if k < 2.0 {
            return 0.0;
        }
        let mean = self.mean_total();
        let var = self
            .block_seconds
            .iter()
            .map(|x| (x - mean) * (x - mean))
            .sum::<f64>()
            / (k - 1.0);
        var.sqrt() / mean
    }

    pub fn is_noisy(&self) -> bool {
        self.coefficient_of_variation() > NOISY_CV
    }
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// Times `call` on a pre-generated m×n input. `call` must not allocate once
/// warmed.
pub fn bench_with(
    label: &str,
    m: usize,
    n: usize,
    repeats: usize,
    flop_estimate: f64,
    seed: u64,
    mut call: impl FnMut(&Matrix, &mut Matrix),
) -> Result<BenchRecord> {
    if repeats == 0 {
        return Err(Error::Config("repeats must be positive".into()));
    }
    if m == 0 || n == 0 {
        return Err(Error::Config("benchmark shape must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let input = Matrix::random_normal(m, n, &mut rng);
    let mut output = Matrix::zeros(m, n);
    call(&input, &mut output);

    let mut blocks = Vec::with_capacity(OUTER_REPS);
    for _ in 0..OUTER_REPS {
        let start = Instant::now();
        for _ in 0..repeats {
            call(std::hint::black_box(&input), &mut output);
        }
        std::hint::black_box(&output);
        blocks.push(start.elapsed().as_secs_f64());
    }
    let total = median(&blocks).max(f64::MIN_POSITIVE);
    Ok(BenchRecord {
        kind: label.to_string(),
        m,
        n,
        repeats,
        total_seconds: total,
        seconds_per_call: total / repeats as f64,
        flop_estimate,
        block_seconds: blocks,
    })
}

pub fn bench_preconditioner(kind: PreconditionerKind, m: usize, n: usize, repeats: usize, seed: u64) -> Result<BenchRecord> {
    let mut p = Preconditioner::new(kind, DEFAULT_RN_EPS, NsCoefficients::default());
    let flops = p.flop_estimate(m, n);
    bench_with(kind.label(), m, n, repeats, flops, seed, |v, out| p.apply_into(v, out))
}

#[derive(Debug, Clone)]
pub struct ScalingFit {
    pub records: Vec<BenchRecord>,
    /// Least-squares slope of ln(seconds per call) against ln(size).
    pub exponent: f64,
}

impl ScalingFit {
    pub fn noisy_sizes(&self) -> Vec<usize> {
        self.records.iter().filter(|r| r.is_noisy()).map(|r| r.m).collect()
    }
}

/// Least-squares slope of `ln y` on `ln x`.
pub fn fit_loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Calls per block so one block lasts roughly `target` seconds, within [1, 100].
fn auto_repeats(single_call: f64, target: f64) -> usize {
    ((target / single_call.max(1e-9)).ceil() as usize).clamp(1, DEFAULT_REPEATS)
}

/// Benchmarks `make(size)` on square sizes and fits the time exponent.
pub fn bench_scaling_with<C>(
    label: &str,
    sizes: &[usize],
    seed: u64,
    mut make: impl FnMut(usize) -> (f64, C),
) -> Result<ScalingFit>
where
    C: FnMut(&Matrix, &mut Matrix),
{
    if sizes.len() < 4 {
        return Err(Error::Config(format!(
            "scaling fit needs at least 4 sizes, got {}",
            sizes.len()
        )));
    }
    let mut records = Vec::with_capacity(sizes.len());
    for &s in sizes {
        let (flops, mut call) = make(s);
        // one untimed probe decides the block length
        let probe = {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let v = Matrix::random_normal(s, s, &mut rng);
            let mut out = Matrix::zeros(s, s);
            let start = Instant::now();
            call(&v, &mut out);
            start.elapsed().as_secs_f64()
        };
        let repeats = auto_repeats(probe, 0.05);
        records.push(bench_with(label, s, s, repeats, flops, seed, &mut call)?);
    }
    let xs: Vec<f64> = records.iter().map(|r| r.m as f64).collect();
    let ys: Vec<f64> = records.iter().map(|r| r.seconds_per_call).collect();
    Ok(ScalingFit {
        exponent: fit_loglog_slope(&xs, &ys),
        records,
    })
}

pub fn bench_scaling(kind: PreconditionerKind, sizes: &[usize], seed: u64) -> Result<ScalingFit> {
    bench_scaling_with(kind.label(), sizes, seed, |s| {
        let mut p = Preconditioner::new(kind, DEFAULT_RN_EPS, NsCoefficients::default());
        let flops = p.flop_estimate(s, s);
        (flops, move |v: &Matrix, out: &mut Matrix| p.apply_into(v, out))
    })
}
