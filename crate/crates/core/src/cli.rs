//! Command-line front end. `main` parses with [`Cli`] and hands off to [`run`].

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::dominance;
use crate::error::{Error, Result};
use crate::harness::{self, csv_io, ProblemKind, RateGeometry, RunConfig};
use crate::optim::OptimizerKind;
use crate::precond::PreconditionerKind;
use crate::problems::{derive_seed, NoiseModel, Quadratic};
use crate::verify;

/// Process exit status for a finished command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// A check ran to completion and failed.
    Failed,
}

impl Outcome {
    pub fn code(self) -> i32 {
        match self {
            Self::Success => 0,
            Self::Failed => 1,
        }
    }
}

/// Exit code for an error that aborted a command.
pub fn error_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Parse(_) => 2,
        _ => 1,
    }
}

#[derive(Debug, Parser)]
#[command(name = "rmnp", version, about = "Row-normalized momentum optimizer toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Time one preconditioner on one shape.
    Bench(BenchArgs),
    /// Time a preconditioner over square sizes and fit the growth exponent.
    Scale(ScaleArgs),
    /// Run an optimizer on a synthetic problem and log per-step metrics.
    Train(TrainArgs),
    /// Average gradient norm across horizons with the prescribed step size and momentum.
    RateCheck(RateArgs),
    /// Train an MLP while logging momentum diagonal-dominance ratios.
    DominanceDemo(DemoArgs),
    /// Run the built-in invariant suites.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, default_value = "rn")]
    pub precond: PreconditionerKind,
    #[arg(long, default_value_t = 1024)]
    pub m: usize,
    #[arg(long, default_value_t = 4096)]
    pub n: usize,
    #[arg(long, default_value_t = harness::bench::DEFAULT_REPEATS)]
    pub repeats: usize,
    /// Time both rn and ns5 on this shape (ignores --precond) and report
    /// the ratio. NS5 is slow on large shapes, so lower --repeats.
    #[arg(long)]
    pub compare: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScaleArgs {
    #[arg(long, default_value = "rn")]
    pub precond: PreconditionerKind,
    /// Comma-separated square sizes; defaults to 256..4096 (256..2048 for ns5).
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// TOML run config; flags below override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub problem: Option<ProblemKind>,
    #[arg(long)]
    pub optimizer: Option<OptimizerKind>,
    #[arg(long)]
    pub steps: Option<u64>,
    #[arg(long)]
    pub lr_matrix: Option<f64>,
    #[arg(long)]
    pub lr_adamw: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub log_every: Option<u64>,
    #[arg(long)]
    pub dominance: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Geometry {
    Frobenius,
    Inf2,
}

impl From<Geometry> for RateGeometry {
    fn from(g: Geometry) -> Self {
        match g {
            Geometry::Frobenius => RateGeometry::Frobenius,
            Geometry::Inf2 => RateGeometry::InfTwo,
        }
    }
}

#[derive(Debug, Args)]
pub struct RateArgs {
    #[arg(long, default_value = "rmnp")]
    pub optimizer: OptimizerKind,
    #[arg(long, default_value_t = 16)]
    pub m: usize,
    #[arg(long, default_value_t = 64)]
    pub n: usize,
    #[arg(long, default_value_t = 10.0)]
    pub condition: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 1)]
    pub batch: usize,
    #[arg(long, value_delimiter = ',', default_value = "1000,4000,16000")]
    pub horizons: Vec<u64>,
    /// Allowed relative increase between consecutive horizons.
    #[arg(long, default_value_t = 0.1)]
    pub slack: f64,
    /// Smoothness geometry: `frobenius` tracks ‖∇f‖_F, `inf2` tracks ‖∇f‖_{1,2}
    /// with a sampled L_(inf,2).
    #[arg(long, value_enum, default_value = "frobenius")]
    pub geometry: Geometry,
    /// Sample pairs for the L_(inf,2) estimate.
    #[arg(long, default_value_t = 256)]
    pub pairs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    #[arg(long, default_value = "muon")]
    pub optimizer: OptimizerKind,
    #[arg(long, value_delimiter = ',', default_value = "16,64,64,8")]
    pub widths: Vec<usize>,
    #[arg(long, default_value_t = 128)]
    pub samples: usize,
    #[arg(long, default_value_t = 300)]
    pub steps: u64,
    /// Trailing moving-average window for the printed summary.
    #[arg(long, default_value_t = 50)]
    pub window: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Optional CSV of per-suite results.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn with_output(path: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match path {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p)?);
            f(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            f(&mut lock)?;
            lock.flush()?;
        }
    }
    Ok(())
}

pub fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Bench(a) => bench(a),
        Command::Scale(a) => scale(a),
        Command::Train(a) => train(a),
        Command::RateCheck(a) => rate_check(a),
        Command::DominanceDemo(a) => dominance_demo(a),
        Command::Verify(a) => run_verify(a),
    }
}

fn bench(a: BenchArgs) -> Result<Outcome> {
    let kinds = if a.compare {
        vec![PreconditionerKind::RowNormalize, PreconditionerKind::NewtonSchulz5]
    } else {
        vec![a.precond]
    };
    let records = kinds
        .iter()
        .map(|&k| harness::bench_preconditioner(k, a.m, a.n, a.repeats, a.seed))
        .collect::<Result<Vec<_>>>()?;
    with_output(a.out.as_deref(), |w| csv_io::write_bench_csv(w, &records))?;
    for rec in &records {
        eprintln!(
            "{} {}x{}: {:.6e} s/call (median of {} blocks, mean block {:.6e} s, cv {:.1}%)",
            rec.kind,
            rec.m,
            rec.n,
            rec.seconds_per_call,
            rec.block_seconds.len(),
            rec.mean_total(),
            100.0 * rec.coefficient_of_variation()
        );
    }
    if let [rn, ns] = &records[..] {
        eprintln!("ns5/rn time ratio at {}x{}: {:.1}x", a.m, a.n, ns.seconds_per_call / rn.seconds_per_call);
    }
    Ok(Outcome::Success)
}

fn scale(a: ScaleArgs) -> Result<Outcome> {
    let sizes = a.sizes.unwrap_or_else(|| match a.precond {
        PreconditionerKind::NewtonSchulz5 => vec![256, 512, 1024, 2048],
        _ => vec![256, 512, 1024, 2048, 4096],
    });
    let fit = harness::bench_scaling(a.precond, &sizes, a.seed)?;
    with_output(a.out.as_deref(), |w| csv_io::write_bench_csv(w, &fit.records))?;
    eprintln!("{} fitted exponent {:.3}", a.precond, fit.exponent);
    let noisy = fit.noisy_sizes();
    if !noisy.is_empty() {
        eprintln!("warning: timing noise above 20% at sizes {noisy:?}");
    }
    Ok(Outcome::Success)
}

fn train_config(a: &TrainArgs) -> Result<RunConfig> {
    let mut cfg = match &a.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    macro_rules! set {
        ($($field:ident),*) => {$(
            if let Some(v) = a.$field.clone() {
                cfg.$field = v;
            }
        )*};
    }
    set!(problem, optimizer, steps, lr_matrix, lr_adamw, beta, weight_decay, sigma, batch, seed, log_every);
    if a.dominance {
        cfg.dominance = true;
    }
    if a.out.is_some() {
        cfg.out = a.out.clone();
    }
    Ok(cfg)
}

fn train(a: TrainArgs) -> Result<Outcome> {
    let cfg = train_config(&a)?;
    let log = harness::run_training(&cfg)?;
    with_output(cfg.out.as_deref(), |w| csv_io::write_train_csv(w, &log))?;
    if let Some(last) = log.records.last() {
        eprintln!(
            "{} on {:?}: step {} loss {:.6e} grad_norm_f {:.6e}",
            cfg.optimizer, cfg.problem, last.step, last.loss, last.grad_norm_f
        );
    }
    Ok(Outcome::Success)
}

fn rate_check(a: RateArgs) -> Result<Outcome> {
    let problem = Quadratic::new(a.m, a.n, a.condition)?;
    let noise = NoiseModel {
        sigma: a.sigma,
        batch: a.batch,
        seed: derive_seed(a.seed, 3),
    };
    let init_seed = derive_seed(a.seed, 2);
    let geometry = RateGeometry::from(a.geometry);
    let points = match geometry {
        RateGeometry::Frobenius => harness::rate_trend_check(&problem, a.optimizer, &a.horizons, &noise, init_seed)?,
        RateGeometry::InfTwo => {
            let (l, pts) =
                harness::rate_trend_check_inf2(&problem, a.optimizer, &a.horizons, &noise, init_seed, a.pairs)?;
            eprintln!("L_(inf,2) ~ {l:.6e} (sampled estimate over {} pairs, a lower bound)", a.pairs);
            pts
        }
    };
    with_output(a.out.as_deref(), |w| csv_io::write_rate_csv(w, &points))?;
    let label = match geometry {
        RateGeometry::Frobenius => "avg|grad|_F",
        RateGeometry::InfTwo => "avg|grad|_(1,2)",
    };
    for p in &points {
        eprintln!(
            "T={:>7} eta={:.4e} beta={:.6} {label}={:.6e}",
            p.total_steps,
            p.eta,
            p.beta,
            geometry.tracked(p)
        );
    }
    if harness::is_nonincreasing_in(&points, a.slack, geometry) {
        eprintln!("trend: nonincreasing within {:.0}% slack", 100.0 * a.slack);
        Ok(Outcome::Success)
    } else {
        eprintln!("trend: FAILED, average gradient norm grew by more than {:.0}%", 100.0 * a.slack);
        Ok(Outcome::Failed)
    }
}

fn dominance_demo(a: DemoArgs) -> Result<Outcome> {
    let cfg = RunConfig {
        problem: ProblemKind::Mlp,
        widths: a.widths.clone(),
        samples: a.samples,
        optimizer: a.optimizer,
        steps: a.steps,
        seed: a.seed,
        dominance: true,
        out: a.out.clone(),
        ..RunConfig::default()
    };
    let log = harness::run_training(&cfg)?;
    with_output(cfg.out.as_deref(), |w| csv_io::write_train_csv(w, &log))?;
    let series = |f: fn(&dominance::GlobalDominance) -> f64| -> Vec<f64> {
        log.records.iter().filter_map(|r| r.global.as_ref().map(f)).collect()
    };
    let avg = dominance::smooth(&series(|g| g.rbar_avg), a.window);
    let min = dominance::smooth(&series(|g| g.rbar_min), a.window);
    if let (Some(first), Some(last)) = (avg.first(), avg.last()) {
        eprintln!(
            "{}: smoothed mean ratio {:.4} -> {:.4}, smoothed min ratio {:.4} -> {:.4}",
            cfg.optimizer,
            first,
            last,
            min.first().copied().unwrap_or(f64::NAN),
            min.last().copied().unwrap_or(f64::NAN)
        );
    }
    Ok(Outcome::Success)
}

fn run_verify(a: VerifyArgs) -> Result<Outcome> {
    let results = verify::verify(a.seed);
    for r in &results {
        match &r.failure {
            None => eprintln!("PASS  {} ({} cases, worst {:.3e})", r.name, r.cases, r.worst),
            Some(msg) => eprintln!("FAIL  {}: {msg}", r.name),
        }
    }
    if let Some(path) = &a.out {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(path)?;
        w.write_record(["suite", "passed", "cases", "worst"])?;
        for r in &results {
            w.write_record([
                r.name.to_string(),
                r.passed().to_string(),
                r.cases.to_string(),
                csv_io::fmt_f64(r.worst),
            ])?;
        }
        w.flush()?;
    }
    let failed = results.iter().filter(|r| !r.passed()).count();
    if failed == 0 {
        eprintln!("all {} suites passed", results.len());
        Ok(Outcome::Success)
    } else {
        eprintln!("{failed} of {} suites failed", results.len());
        Ok(Outcome::Failed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> std::result::Result<Cli, clap::Error> {
        Cli::try_parse_from(std::iter::once("rmnp").chain(args.iter().copied()))
    }

    #[test]
    fn bench_flags() {
        let cli = parse(&["bench", "--precond", "rn", "--m", "1024", "--n", "4096", "--repeats", "100"]).unwrap();
        match cli.command {
            Command::Bench(b) => {
                assert_eq!(b.precond, PreconditionerKind::RowNormalize);
                assert_eq!((b.m, b.n, b.repeats), (1024, 4096, 100));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn train_flags() {
        let cli = parse(&["train", "--config", "run.toml", "--out", "run.csv"]).unwrap();
        match cli.command {
            Command::Train(t) => {
                assert_eq!(t.config.as_deref(), Some(Path::new("run.toml")));
                assert_eq!(t.out.as_deref(), Some(Path::new("run.csv")));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_flag_is_usage_error() {
        let e = parse(&["--bogus"]).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert_eq!(parse(&["bench", "--precond", "svd"]).unwrap_err().exit_code(), 2);
        assert_eq!(parse(&[]).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn flags_override_config() {
        let a = TrainArgs {
            config: None,
            problem: Some(ProblemKind::Logreg),
            optimizer: None,
            steps: Some(5),
            lr_matrix: None,
            lr_adamw: Some(0.5),
            beta: None,
            weight_decay: None,
            sigma: None,
            batch: None,
            seed: Some(11),
            log_every: None,
            dominance: false,
            out: None,
        };
        let cfg = train_config(&a).unwrap();
        assert_eq!(cfg.problem, ProblemKind::Logreg);
        assert_eq!((cfg.steps, cfg.seed, cfg.lr_adamw), (5, 11, 0.5));
        assert_eq!(cfg.lr_matrix, RunConfig::default().lr_matrix);
    }
}
