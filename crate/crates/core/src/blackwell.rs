//! Entropy rate through the invariant measure of the belief filter.
//!
//! The predictive state of the hidden process is confined to the segment
//! between the two distinct rows of `E`, parametrized by the belief
//! `β ∈ [0, 1]` (posterior probability that the last channel use went
//! through sub-channel 0). Observing symbol `k` from belief `β` happens with
//! probability `c_k(β)` and moves the belief to `f_k(β)`, where
//!
//! ```text
//! A(β) = β q00 + (1-β) q10        B(β) = β q01 + (1-β) q11
//! c_k(β) = A(β) x_0^k + B(β) x_1^k
//! f_k(β) = A(β) x_0^k / c_k(β)
//! ```
//!
//! The stationary belief distribution λ is the fixed point of
//! `λ ↦ Σ_k c_k · (f_k)_* λ`. Starting from Dirac atoms at the fixed points
//! of `f_1`, `f_2`, the iteration is carried out on finitely supported
//! measures, and the entropy rate is `∫ [η(c_1) + η(c_2)] dλ`.

use std::cmp::Ordering;

use crate::channel_model::ChannelParams;
use crate::error::{Error, Result};
use crate::exact_oracle::{EntropyEstimate, Method};
use crate::exec::Execution;
use crate::{eta, CompensatedSum};

const CHUNK: usize = 4096;
const ROOT_SLACK: f64 = 1e-12;

/// Knobs for the measure iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Convergence threshold on successive entropy values (bits).
    pub tol: f64,
    pub max_iter: usize,
    /// Atoms whose positions lie within this distance of a cluster's
    /// leftmost atom are coalesced.
    pub merge_tol: f64,
    /// Atoms lighter than this are dropped and the rest renormalized.
    pub prune: f64,
    pub atom_budget: usize,
    pub exec: Execution,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 10_000,
            merge_tol: 1e-5,
            prune: 1e-15,
            atom_budget: 1 << 22,
            exec: Execution::default(),
        }
    }
}

/// `num(β) / weight(β)` with both numerator and weight affine in β.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShrinkMap {
    num: [f64; 2],
    weight: [f64; 2],
    inert: bool,
    fixed_point: Option<f64>,
}

impl ShrinkMap {
    fn new(num: [f64; 2], weight: [f64; 2], branch: usize) -> Result<Self> {
        let inert = weight[0] <= 0.0 && weight[0] + weight[1] <= 0.0;
        let mut map = Self {
            num,
            weight,
            inert,
            fixed_point: None,
        };
        if !inert {
            map.fixed_point = Some(map.solve_fixed_point().ok_or(Error::NoFixedPoint { branch })?);
        }
        Ok(map)
    }

    /// Probability of emitting this branch's symbol from belief `beta`.
    #[inline]
    pub fn weight(&self, beta: f64) -> f64 {
        self.weight[0] + self.weight[1] * beta
    }

    /// Updated belief; only meaningful where `weight(beta) > 0`.
    #[inline]
    pub fn apply(&self, beta: f64) -> f64 {
        ((self.num[0] + self.num[1] * beta) / self.weight(beta)).clamp(0.0, 1.0)
    }

    pub fn derivative(&self, beta: f64) -> f64 {
        let w = self.weight(beta);
        (self.num[1] * self.weight[0] - self.num[0] * self.weight[1]) / (w * w)
    }

    /// True when `c ≡ 0` on `[0, 1]`: the symbol never occurs.
    pub fn is_inert(&self) -> bool {
        self.inert
    }

    pub fn fixed_point(&self) -> Option<f64> {
        self.fixed_point
    }

    /// Root of `w1 β² + (w0 - n1) β - n0 = 0` in `[0, 1]`.
    fn solve_fixed_point(&self) -> Option<f64> {
        let [n0, n1] = self.num;
        let [w0, w1] = self.weight;
        let det = n1 * w0 - n0 * w1;
        let scale = (n1.abs() * w0.abs()).max((n0 * w1).abs()).max(f64::MIN_POSITIVE);
        if det.abs() <= 1e-14 * scale {
            // constant map
            let at = if w0 > 0.0 { 0.0 } else { 1.0 };
            return Some(self.apply(at));
        }
        let (a, b, c) = (w1, w0 - n1, -n0);
        let mut roots = Vec::with_capacity(2);
        if a.abs() <= 1e-15 * (b.abs() + c.abs()) {
            if b != 0.0 {
                roots.push(-c / b);
            }
        } else {
            let mut disc = b * b - 4.0 * a * c;
            if disc < 0.0 {
                if disc < -1e-14 * (b * b + (4.0 * a * c).abs()) {
                    return None;
                }
                disc = 0.0;
            }
            let q = -0.5 * (b + b.signum() * disc.sqrt());
            if q != 0.0 {
                roots.push(q / a);
                roots.push(c / q);
            } else {
                roots.push(0.0);
            }
        }
        roots
            .into_iter()
            .filter(|r| (-ROOT_SLACK..=1.0 + ROOT_SLACK).contains(r))
            .map(|r| r.clamp(0.0, 1.0))
            .filter(|&r| self.weight(r) > 0.0)
            .min_by(|x, y| {
                self.derivative(*x)
                    .abs()
                    .total_cmp(&self.derivative(*y).abs())
            })
    }
}

/// The two filter branches of a channel, indexed by observed symbol
/// (0 = no flip, 1 = flip).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterSystem {
    q: [[f64; 2]; 2],
    maps: [ShrinkMap; 2],
}

impl FilterSystem {
    pub fn build(params: &ChannelParams) -> Result<Self> {
        let q = params.q();
        let mut maps = Vec::with_capacity(2);
        for k in 0..2 {
            let (x0, x1) = (params.x(0, k), params.x(1, k));
            let num = [q[1][0] * x0, (q[0][0] - q[1][0]) * x0];
            let weight = [
                q[1][0] * x0 + q[1][1] * x1,
                (q[0][0] - q[1][0]) * x0 + (q[0][1] - q[1][1]) * x1,
            ];
            maps.push(ShrinkMap::new(num, weight, k + 1)?);
        }
        Ok(Self {
            q,
            maps: [maps[0], maps[1]],
        })
    }

    /// `A(β)`: predicted probability that the next use goes through sub-channel 0.
    pub fn a(&self, beta: f64) -> f64 {
        beta * self.q[0][0] + (1.0 - beta) * self.q[1][0]
    }

    /// `B(β) = 1 - A(β)`.
    pub fn b(&self, beta: f64) -> f64 {
        beta * self.q[0][1] + (1.0 - beta) * self.q[1][1]
    }

    pub fn map(&self, symbol: usize) -> &ShrinkMap {
        &self.maps[symbol]
    }

    /// `c_{symbol+1}(β)`.
    #[inline]
    pub fn c(&self, symbol: usize, beta: f64) -> f64 {
        if self.maps[symbol].inert {
            0.0
        } else {
            self.maps[symbol].weight(beta).max(0.0)
        }
    }

    /// `f_{symbol+1}(β)`.
    #[inline]
    pub fn f(&self, symbol: usize, beta: f64) -> f64 {
        self.maps[symbol].apply(beta)
    }

    /// Fixed points of `f_1` and `f_2`; `None` for an inert branch.
    pub fn fixed_points(&self) -> (Option<f64>, Option<f64>) {
        (self.maps[0].fixed_point, self.maps[1].fixed_point)
    }

    /// Entropy of the next symbol given belief `beta`.
    #[inline]
    pub fn symbol_entropy(&self, beta: f64) -> f64 {
        eta(self.c(0, beta)) + eta(self.c(1, beta))
    }

    /// Belief before any observation: the stationary switching law.
    pub fn stationary_belief(&self) -> f64 {
        self.q[1][0] / (self.q[0][1] + self.q[1][0])
    }
}

/// Free-function form of [`FilterSystem::build`].
pub fn build_filter_system(params: &ChannelParams) -> Result<FilterSystem> {
    FilterSystem::build(params)
}

/// Free-function form of [`FilterSystem::fixed_points`].
pub fn fixed_points(system: &FilterSystem) -> (Option<f64>, Option<f64>) {
    system.fixed_points()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub position: f64,
    pub weight: f64,
}

impl Atom {
    fn total_cmp(&self, other: &Self) -> Ordering {
        self.position
            .total_cmp(&other.position)
            .then(self.weight.total_cmp(&other.weight))
    }
}

/// Finitely supported probability measure on the belief interval.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomicMeasure {
    atoms: Vec<Atom>,
    generation: usize,
}

impl AtomicMeasure {
    /// Sorts, coalesces identical positions and normalizes the given atoms.
    pub fn from_atoms(mut atoms: Vec<Atom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidParameter("measure needs at least one atom".into()));
        }
        if atoms
            .iter()
            .any(|a| !(0.0..=1.0).contains(&a.position) || a.weight.is_nan() || a.weight < 0.0)
        {
            return Err(Error::InvalidParameter("atom outside [0,1] or with negative weight".into()));
        }
        atoms.sort_unstable_by(Atom::total_cmp);
        let mut atoms = coalesce(&atoms, 0.0);
        normalize(&mut atoms)?;
        Ok(Self { atoms, generation: 0 })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn generation(&self) -> usize {
        self.generation
    }

    pub fn total_weight(&self) -> f64 {
        let mut acc = CompensatedSum::default();
        self.atoms.iter().for_each(|a| acc.add(a.weight));
        acc.value()
    }

    /// Smallest interval containing every atom.
    pub fn hull(&self) -> (f64, f64) {
        (
            self.atoms.first().map_or(f64::NAN, |a| a.position),
            self.atoms.last().map_or(f64::NAN, |a| a.position),
        )
    }

    /// `∫ g dλ`, summed in fixed chunks so the result does not depend on the
    /// execution mode.
    pub fn integrate<G>(&self, exec: Execution, g: G) -> f64
    where
        G: Fn(f64) -> f64 + Sync + Send,
    {
        let partials = exec.map_chunks(&self.atoms, CHUNK, |chunk| {
            let mut acc = CompensatedSum::default();
            for a in chunk {
                acc.add(a.weight * g(a.position));
            }
            acc
        });
        let mut total = CompensatedSum::default();
        partials.into_iter().for_each(|p| total.merge(p));
        total.value()
    }
}

/// Greedy left-to-right clustering of sorted atoms: an atom joins the current
/// cluster while it is within `tol` of the cluster's first atom.
fn coalesce(sorted: &[Atom], tol: f64) -> Vec<Atom> {
    let mut out: Vec<Atom> = Vec::with_capacity(sorted.len());
    let mut iter = sorted.iter();
    let Some(first) = iter.next() else {
        return out;
    };
    let mut start = first.position;
    let mut weight = CompensatedSum::default();
    let mut moment = CompensatedSum::default();
    weight.add(first.weight);
    let flush = |out: &mut Vec<Atom>, start: f64, w: &CompensatedSum, m: &CompensatedSum| {
        let w = w.value();
        let shift = if w > 0.0 { m.value() / w } else { 0.0 };
        out.push(Atom {
            position: (start + shift).clamp(0.0, 1.0),
            weight: w,
        });
    };
    for a in iter {
        if a.position - start <= tol {
            weight.add(a.weight);
            moment.add(a.weight * (a.position - start));
        } else {
            flush(&mut out, start, &weight, &moment);
            start = a.position;
            weight = CompensatedSum::default();
            moment = CompensatedSum::default();
            weight.add(a.weight);
        }
    }
    flush(&mut out, start, &weight, &moment);
    out
}

fn normalize(atoms: &mut [Atom]) -> Result<f64> {
    let mut acc = CompensatedSum::default();
    atoms.iter().for_each(|a| acc.add(a.weight));
    let total = acc.value();
    if total.is_nan() || total <= 0.0 {
        return Err(Error::InvalidParameter("measure has no mass".into()));
    }
    atoms.iter_mut().for_each(|a| a.weight /= total);
    Ok(total)
}

/// Two atoms of weight ½ at the fixed points of `f_1` and `f_2`.
pub fn initial_measure(system: &FilterSystem) -> AtomicMeasure {
    initial_measure_weighted(system, 0.5)
}

/// Atoms at the fixed points with weights `(w1, 1 - w1)`; an inert branch
/// hands its share to the other one, coincident points become one atom.
pub fn initial_measure_weighted(system: &FilterSystem, w1: f64) -> AtomicMeasure {
    let atoms = match system.fixed_points() {
        (Some(a1), Some(a2)) => vec![
            Atom {
                position: a1,
                weight: w1,
            },
            Atom {
                position: a2,
                weight: 1.0 - w1,
            },
        ],
        (Some(a), None) | (None, Some(a)) => vec![Atom {
            position: a,
            weight: 1.0,
        }],
        (None, None) => unreachable!("c1 + c2 = 1 leaves at least one live branch"),
    };
    let mut atoms: Vec<Atom> = atoms.into_iter().filter(|a| a.weight > 0.0).collect();
    atoms.sort_unstable_by(Atom::total_cmp);
    let mut atoms = coalesce(&atoms, 1e-12);
    normalize(&mut atoms).expect("fixed-point atoms carry unit mass");
    AtomicMeasure { atoms, generation: 0 }
}

/// Bookkeeping from one application of the transfer operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStats {
    /// Atoms spawned before merging.
    pub spawned: usize,
    /// Atoms after merging, before pruning.
    pub merged: usize,
    pub pruned: usize,
    /// Total mass after merging and pruning, before renormalization.
    pub mass_before_normalization: f64,
}

/// One application of the transfer operator with statistics.
pub fn step_measure(
    system: &FilterSystem,
    measure: &AtomicMeasure,
    config: &SolverConfig,
) -> Result<(AtomicMeasure, StepStats)> {
    let children = config.exec.map_chunks(&measure.atoms, CHUNK, |chunk| {
        let mut out = Vec::with_capacity(2 * chunk.len());
        for atom in chunk {
            for symbol in 0..2 {
                let c = system.c(symbol, atom.position);
                if c > 0.0 {
                    out.push(Atom {
                        position: system.f(symbol, atom.position),
                        weight: atom.weight * c,
                    });
                }
            }
        }
        out
    });
    let mut spawned: Vec<Atom> = children.concat();
    let n_spawned = spawned.len();
    config.exec.sort_by(&mut spawned, Atom::total_cmp);
    let merged = coalesce(&spawned, config.merge_tol);
    let n_merged = merged.len();
    let mut kept: Vec<Atom> = if config.prune > 0.0 {
        merged.into_iter().filter(|a| a.weight >= config.prune).collect()
    } else {
        merged
    };
    if kept.is_empty() {
        return Err(Error::InvalidParameter(
            "prune threshold removed every atom".into(),
        ));
    }
    if kept.len() > config.atom_budget {
        return Err(Error::AtomBudget {
            atoms: kept.len(),
            budget: config.atom_budget,
        });
    }
    let pruned = n_merged - kept.len();
    let mass = normalize(&mut kept)?;
    Ok((
        AtomicMeasure {
            atoms: kept,
            generation: measure.generation + 1,
        },
        StepStats {
            spawned: n_spawned,
            merged: n_merged,
            pruned,
            mass_before_normalization: mass,
        },
    ))
}

/// `λ ↦ c_1 · (f_1)_* λ + c_2 · (f_2)_* λ`, followed by merging, pruning and
/// normalization.
pub fn iterate_measure(
    system: &FilterSystem,
    measure: &AtomicMeasure,
    config: &SolverConfig,
) -> Result<AtomicMeasure> {
    step_measure(system, measure, config).map(|(m, _)| m)
}

/// Mean symbol entropy `∫ [η(c_1(β)) + η(c_2(β))] dλ(β)` in bits.
pub fn entropy_functional(system: &FilterSystem, measure: &AtomicMeasure, exec: Execution) -> f64 {
    measure.integrate(exec, |beta| system.symbol_entropy(beta))
}

/// Converged entropy estimate together with the final measure.
#[derive(Debug, Clone)]
pub struct Solution {
    pub estimate: EntropyEstimate,
    pub measure: AtomicMeasure,
}

/// Remaining distance to the limit if the increments keep shrinking at the
/// ratio of the last two; infinite when they do not shrink.
fn geometric_tail(delta: f64, last_delta: f64) -> f64 {
    if delta == 0.0 {
        return 0.0;
    }
    if !last_delta.is_finite() {
        return delta;
    }
    let r = delta / last_delta;
    if r < 1.0 {
        delta * r / (1.0 - r)
    } else {
        f64::INFINITY
    }
}

/// Iterates from `initial` until successive entropies differ by less than
/// `config.tol` and the extrapolated remaining change is below it too.
pub fn solve(system: &FilterSystem, initial: AtomicMeasure, config: &SolverConfig) -> Result<Solution> {
    let mut measure = initial;
    let mut previous = entropy_functional(system, &measure, config.exec);
    let mut before_previous = f64::NAN;
    let mut last_delta = f64::NAN;
    for iteration in 1..=config.max_iter {
        measure = iterate_measure(system, &measure, config)?;
        let current = entropy_functional(system, &measure, config.exec);
        let delta = (current - previous).abs();
        if delta < config.tol && geometric_tail(delta, last_delta) < config.tol {
            return Ok(Solution {
                estimate: EntropyEstimate {
                    value: current,
                    method: Method::Blackwell,
                    meta: iteration,
                    delta,
                    stderr: None,
                },
                measure,
            });
        }
        before_previous = previous;
        previous = current;
        last_delta = delta;
    }
    Err(Error::NonConvergence {
        iterations: config.max_iter,
        last: previous,
        previous: before_previous,
    })
}

/// Entropy rate of the flip process in bits per channel use.
pub fn entropy_rate_blackwell(params: &ChannelParams, config: &SolverConfig) -> Result<EntropyEstimate> {
    let system = FilterSystem::build(params)?;
    solve(&system, initial_measure(&system), config).map(|s| s.estimate)
}

/// Product-state capacity `1 - S` in bits per channel use.
///
/// Sub-channel labels are put in a canonical order first, so the result is
/// exactly invariant under `d -> -d`.
pub fn capacity(params: &ChannelParams, config: &SolverConfig) -> Result<f64> {
    capacity_with_estimate(params, config).map(|(c, _)| c)
}

/// [`capacity`] together with the entropy estimate it was derived from.
pub fn capacity_with_estimate(params: &ChannelParams, config: &SolverConfig) -> Result<(f64, EntropyEstimate)> {
    if params.relax_cp() {
        return Err(Error::RelaxedParams);
    }
    let canonical = if params.x0_noerr() < params.x1_noerr() {
        params.relabeled()
    } else {
        *params
    };
    let est = entropy_rate_blackwell(&canonical, config)?;
    Ok(((1.0 - est.value).clamp(0.0, 1.0), est))
}
