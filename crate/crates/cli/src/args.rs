use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

use memcap::sweep::{Axis, Knobs, Methods};
use memcap::SolverConfig;

#[derive(Debug, Parser)]
#[command(name = "memcap", version, about = "Capacity of a Markov-switched depolarizing qubit channel")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Capacity at a single parameter point.
    Capacity {
        #[command(flatten)]
        point: PointArgs,
        #[command(flatten)]
        knobs: KnobArgs,
    },
    /// Grid sweep over (s, a_bar, d) written as CSV.
    Sweep(SweepArgs),
    /// Blackwell iteration vs block-entropy oracle vs Monte Carlo at one point.
    Compare {
        #[command(flatten)]
        point: PointArgs,
        #[command(flatten)]
        knobs: KnobArgs,
    },
    /// Regenerate the data behind one of the published figures.
    Figure {
        /// Figure number.
        #[arg(value_parser = clap::value_parser!(u8).range(1..=3))]
        number: u8,
        /// Output file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        knobs: KnobArgs,
    },
}

/// A parameter point, physical (`--s --a --d`) or raw (`--q00 --q10 --x0 --x1`).
#[derive(Debug, Args)]
pub struct PointArgs {
    /// Switching eigenvalue, |s| < 1.
    #[arg(long, allow_hyphen_values = true, requires_all = ["a", "d"], conflicts_with_all = ["q00", "q10", "x0", "x1"])]
    pub s: Option<f64>,
    /// Average no-error probability.
    #[arg(long)]
    pub a: Option<f64>,
    /// Half-difference of the sub-channel no-error probabilities.
    #[arg(long, allow_hyphen_values = true)]
    pub d: Option<f64>,
    /// Probability of staying on sub-channel 0.
    #[arg(long, requires_all = ["q10", "x0", "x1"])]
    pub q00: Option<f64>,
    /// Probability of switching from sub-channel 1 to 0.
    #[arg(long)]
    pub q10: Option<f64>,
    /// No-error probability of sub-channel 0.
    #[arg(long)]
    pub x0: Option<f64>,
    /// No-error probability of sub-channel 1.
    #[arg(long)]
    pub x1: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// s axis, VALUE or START:STOP:COUNT.
    #[arg(long, allow_hyphen_values = true, default_value = "0:0.9:10")]
    pub s_range: Axis,
    /// a_bar axis, VALUE or START:STOP:COUNT.
    #[arg(long, default_value = "0.6666666666666666")]
    pub a_range: Axis,
    /// d axis, VALUE or START:STOP:COUNT.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "d_max")]
    pub d_range: Option<Axis>,
    /// Use the largest d allowed at each a_bar: min(a_bar - 1/3, 1 - a_bar).
    #[arg(long)]
    pub d_max: bool,
    /// Comma-separated subset of blackwell, oracle, mc, references (or all).
    #[arg(long, default_value = "blackwell,references")]
    pub methods: Methods,
    /// Output file (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub knobs: KnobArgs,
}

/// Solver and estimator overrides; unset flags keep the defaults.
#[derive(Debug, Args, Default)]
pub struct KnobArgs {
    /// Convergence threshold on successive entropies [default: 1e-10].
    #[arg(long)]
    pub tol: Option<f64>,
    /// Iteration cap for the measure iteration [default: 10000].
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Atom merge tolerance in belief position [default: 1e-5].
    #[arg(long)]
    pub merge_tol: Option<f64>,
    /// Atoms lighter than this are pruned [default: 1e-15].
    #[arg(long)]
    pub prune: Option<f64>,
    /// Maximum atoms per iterate [default: 4194304].
    #[arg(long)]
    pub atom_budget: Option<usize>,
    /// Block length of the oracle [default: 16].
    #[arg(long)]
    pub oracle_n: Option<usize>,
    /// Largest admissible oracle block length [default: 24].
    #[arg(long)]
    pub n_max: Option<usize>,
    /// Monte-Carlo steps [default: 1000000].
    #[arg(long)]
    pub mc_steps: Option<u64>,
    /// Monte-Carlo seed [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Allowed |blackwell - oracle| in bits [default: 1e-4].
    #[arg(long)]
    pub cross_check_tol: Option<f64>,
}

impl KnobArgs {
    pub fn apply(&self, base: Knobs) -> Knobs {
        let s = base.solver;
        Knobs {
            solver: SolverConfig {
                tol: self.tol.unwrap_or(s.tol),
                max_iter: self.max_iter.unwrap_or(s.max_iter),
                merge_tol: self.merge_tol.unwrap_or(s.merge_tol),
                prune: self.prune.unwrap_or(s.prune),
                atom_budget: self.atom_budget.unwrap_or(s.atom_budget),
                exec: s.exec,
            },
            oracle_n: self.oracle_n.unwrap_or(base.oracle_n),
            oracle_n_max: self.n_max.unwrap_or(base.oracle_n_max),
            mc_steps: self.mc_steps.map_or(base.mc_steps, |n| n as usize),
            seed: self.seed.unwrap_or(base.seed),
            cross_check_tol: self.cross_check_tol.unwrap_or(base.cross_check_tol),
            exec: base.exec,
        }
    }
}
