mod args;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;

use args::{Cli, Command, PointArgs};
use memcap::sweep::{self, DPolicy, Knobs, SweepSpec};
use memcap::{blackwell, ChannelParams, Error};

const EXIT_INVALID: u8 = 1;
const EXIT_NON_CONVERGENCE: u8 = 2;
const EXIT_BUDGET: u8 = 3;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_INVALID)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(EXIT_INVALID);
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>().map(Error::root) {
        Some(Error::NonConvergence { .. }) => EXIT_NON_CONVERGENCE,
        Some(Error::AtomBudget { .. }) => EXIT_BUDGET,
        _ => EXIT_INVALID,
    }
}

/// `MEMCAP_THREADS` caps the size of the worker pool.
fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("MEMCAP_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .with_context(|| format!("MEMCAP_THREADS={raw:?} is not a thread count"))?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .context("configuring the thread pool")?;
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
    Ok(())
}

fn params_from(point: &PointArgs) -> Result<ChannelParams> {
    let params = match (point.s, point.a, point.d) {
        (Some(s), Some(a), Some(d)) => ChannelParams::from_physical(s, a, d)?,
        _ => match (point.q00, point.q10, point.x0, point.x1) {
            (Some(q00), Some(q10), Some(x0), Some(x1)) => {
                ChannelParams::from_raw([[q00, 1.0 - q00], [q10, 1.0 - q10]], x0, x1)?
            }
            _ => {
                return Err(Error::InvalidParameter(
                    "give either --s --a --d or --q00 --q10 --x0 --x1".into(),
                )
                .into())
            }
        },
    };
    Ok(params)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Capacity { point, knobs } => {
            let params = params_from(&point)?;
            let knobs = knobs.apply(Knobs::default());
            let (capacity, est) = blackwell::capacity_with_estimate(&params, &knobs.solver)?;
            let stdout = io::stdout();
            let mut out = stdout.lock();
            for (key, value) in params.record() {
                writeln!(out, "{key} = {}", sweep::format_number(value))?;
            }
            writeln!(out, "entropy_rate = {}", sweep::format_number(est.value))?;
            writeln!(out, "capacity = {}", sweep::format_number(capacity))?;
            writeln!(out, "iterations = {}", est.meta)?;
            writeln!(out, "delta = {}", sweep::format_number(est.delta))?;
        }
        Command::Sweep(args) => {
            let d = match (args.d_range, args.d_max) {
                (Some(axis), false) => DPolicy::Explicit(axis),
                (None, true) => DPolicy::MaxAllowed,
                (None, false) => {
                    return Err(Error::InvalidParameter("give --d-range or --d-max".into()).into())
                }
                (Some(_), true) => unreachable!("clap rejects --d-range with --d-max"),
            };
            let spec = SweepSpec {
                s: args.s_range,
                a_bar: args.a_range,
                d,
                methods: args.methods,
                knobs: args.knobs.apply(Knobs::default()),
            };
            emit(&spec, args.out.as_deref())?;
        }
        Command::Compare { point, knobs } => {
            let params = params_from(&point)?;
            let knobs = knobs.apply(Knobs::default());
            let report = sweep::compare_methods(&params, &knobs)?;
            println!("{report}");
            println!("overall: {}", if report.passed() { "PASS" } else { "FAIL" });
        }
        Command::Figure { number, out, knobs } => {
            let mut spec = sweep::presets::figure(number)?;
            spec.knobs = knobs.apply(spec.knobs);
            emit(&spec, out.as_deref())?;
        }
    }
    Ok(())
}

fn emit(spec: &SweepSpec, out: Option<&Path>) -> Result<()> {
    let rows = sweep::run_sweep(spec)?;
    match out {
        Some(path) => {
            let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
            let mut w = BufWriter::new(file);
            sweep::write_csv(spec, &rows, &mut w)?;
            w.flush()?;
            eprintln!("wrote {} rows to {}", rows.len(), path.display());
        }
        None => sweep::write_csv(spec, &rows, io::stdout().lock())?,
    }
    Ok(())
}
