//! Reference computations for the entropy rate.
//!
//! Word probabilities are `⟨τ| F_{k1} ⋯ F_{kn} |1⟩`, with an independent path
//! sum over channel sequences as a cross-check. Block entropies `S_n` come
//! from a depth-first walk of the prefix tree carrying the row vector
//! `τᵀ F_{k1} ⋯ F_{km}`, so memory stays `O(n)` while time is `O(2ⁿ)`. The
//! Monte-Carlo estimator simulates the joint chain and averages the exact
//! filter surprisal of each emitted symbol.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::blackwell::FilterSystem;
use crate::channel_model::JointChainModel;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::{eta, CompensatedSum};

/// Default upper limit on the block length of [`block_entropy`].
pub const DEFAULT_N_MAX: usize = 24;
/// Upper limit on the word length of [`word_probability_pathsum`].
pub const PATHSUM_MAX: usize = 20;
/// Batches used for the Monte-Carlo standard error.
pub const MC_BATCHES: usize = 100;

const SPLIT_DEPTH: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    BlockRatio,
    BlockDifference,
    Blackwell,
    MonteCarlo,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::BlockRatio => "block_ratio",
            Method::BlockDifference => "block_difference",
            Method::Blackwell => "blackwell",
            Method::MonteCarlo => "monte_carlo",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// An entropy-rate value in bits per channel use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyEstimate {
    pub value: f64,
    pub method: Method,
    /// Block length, iteration count or number of simulated steps.
    pub meta: usize,
    /// Last convergence increment.
    pub delta: f64,
    /// Standard error; Monte-Carlo only.
    pub stderr: Option<f64>,
}

/// A flip pattern: 0 = no flip, 1 = flip.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct ErrorWord(Vec<u8>);

impl ErrorWord {
    pub fn new(symbols: Vec<u8>) -> Result<Self> {
        if let Some(bad) = symbols.iter().find(|&&s| s > 1) {
            return Err(Error::InvalidParameter(format!("symbol {bad} is not binary")));
        }
        Ok(Self(symbols))
    }

    /// The `len` low bits of `bits`, most significant first.
    pub fn from_bits(bits: u64, len: usize) -> Self {
        Self((0..len).rev().map(|i| ((bits >> i) & 1) as u8).collect())
    }

    pub fn symbols(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn appended(&self, symbol: u8) -> Self {
        let mut v = self.0.clone();
        v.push(symbol);
        Self(v)
    }

    pub fn prepended(&self, symbol: u8) -> Self {
        let mut v = Vec::with_capacity(self.0.len() + 1);
        v.push(symbol);
        v.extend_from_slice(&self.0);
        Self(v)
    }
}

impl FromStr for ErrorWord {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(Error::InvalidParameter(format!("invalid symbol {other:?}"))),
            })
            .collect::<Result<Vec<u8>>>()
            .map(Self)
    }
}

impl fmt::Display for ErrorWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.iter().try_for_each(|s| write!(f, "{s}"))
    }
}

/// `⟨τ| F_{k1} ⋯ F_{kn} |1⟩`.
pub fn word_probability(model: &JointChainModel, word: &ErrorWord) -> f64 {
    word.symbols()
        .iter()
        .fold(model.tau(), |v, &k| model.step(&v, k as usize))
        .iter()
        .sum()
}

/// Direct sum over channel paths
/// `Σ γ_{i1} q_{i1 i2} ⋯ q_{i(n-1) in} x_{i1}^{k1} ⋯ x_{in}^{kn}`.
pub fn word_probability_pathsum(model: &JointChainModel, word: &ErrorWord) -> Result<f64> {
    let n = word.len();
    if n > PATHSUM_MAX {
        return Err(Error::PathSumLength {
            len: n,
            max: PATHSUM_MAX,
        });
    }
    if n == 0 {
        return Ok(1.0);
    }
    let params = model.params();
    let q = params.q();
    let gamma = model.gamma();
    let k = word.symbols();
    let mut total = CompensatedSum::default();
    for path in 0u64..(1u64 << n) {
        let channel = |t: usize| ((path >> t) & 1) as usize;
        let mut p = gamma[channel(0)] * params.x(channel(0), k[0] as usize);
        for t in 1..n {
            if p == 0.0 {
                break;
            }
            p *= q[channel(t - 1)][channel(t)] * params.x(channel(t), k[t] as usize);
        }
        total.add(p);
    }
    Ok(total.value())
}

/// Oracle knobs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig {
    pub n_max: usize,
    pub exec: Execution,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            n_max: DEFAULT_N_MAX,
            exec: Execution::default(),
        }
    }
}

/// Walks the subtree below row vector `v` (a node at `depth`), adding
/// `η(p)` of every node into `acc[depth - 1]`. Nodes at the depth named in
/// `frontier` are pushed to its list instead of being expanded.
fn walk(
    model: &JointChainModel,
    v: &[f64; 4],
    depth: usize,
    n: usize,
    acc: &mut [CompensatedSum],
    frontier: &mut Option<(usize, &mut Vec<[f64; 4]>)>,
) {
    let p: f64 = v.iter().sum();
    if p <= 0.0 {
        return;
    }
    acc[depth - 1].add(eta(p));
    if depth == n {
        return;
    }
    if let Some((at, out)) = frontier {
        if depth == *at {
            out.push(*v);
            return;
        }
    }
    for k in 0..2 {
        walk(model, &model.step(v, k), depth + 1, n, acc, frontier);
    }
}

/// `S_1, …, S_n` in bits from one prefix-tree traversal.
pub fn block_entropies(model: &JointChainModel, n: usize, config: &OracleConfig) -> Result<Vec<f64>> {
    if n == 0 || n > config.n_max {
        return Err(Error::BlockLength { n, max: config.n_max });
    }
    let split = n.min(SPLIT_DEPTH);
    let mut acc = vec![CompensatedSum::default(); n];

    // Levels 1..=split sequentially; subtrees below them in parallel.
    let mut frontier: Vec<[f64; 4]> = Vec::new();
    let tau = model.tau();
    for k in 0..2 {
        let mut handoff = Some((split, &mut frontier));
        walk(model, &model.step(&tau, k), 1, n, &mut acc, &mut handoff);
    }
    if split < n {
        let partials = config.exec.map_slice(&frontier, |v| {
            let mut local = vec![CompensatedSum::default(); n];
            for k in 0..2 {
                walk(model, &model.step(v, k), split + 1, n, &mut local, &mut None);
            }
            local
        });
        for local in partials {
            for (a, l) in acc.iter_mut().zip(local) {
                a.merge(l);
            }
        }
    }
    Ok(acc.iter().map(CompensatedSum::value).collect())
}

/// Block entropy `S_n = -Σ_{|w|=n} p(w) log2 p(w)` in bits.
pub fn block_entropy(model: &JointChainModel, n: usize, config: &OracleConfig) -> Result<f64> {
    block_entropies(model, n, config).map(|s| s[n - 1])
}

/// Both finite-`n` estimates of the entropy rate.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockEstimates {
    /// `S_n - S_{n-1}`.
    pub difference: EntropyEstimate,
    /// `S_n / n`.
    pub ratio: EntropyEstimate,
    /// `S_1, …, S_n`.
    pub entropies: Vec<f64>,
}

pub fn entropy_rate_oracle(model: &JointChainModel, n: usize, config: &OracleConfig) -> Result<BlockEstimates> {
    if n < 2 || n > config.n_max {
        return Err(Error::BlockLength { n, max: config.n_max });
    }
    let s = block_entropies(model, n, config)?;
    let increment = |m: usize| if m == 1 { s[0] } else { s[m - 1] - s[m - 2] };
    let diff = increment(n);
    let ratio = s[n - 1] / n as f64;
    Ok(BlockEstimates {
        difference: EntropyEstimate {
            value: diff,
            method: Method::BlockDifference,
            meta: n,
            delta: (increment(n - 1) - diff).abs(),
            stderr: None,
        },
        ratio: EntropyEstimate {
            value: ratio,
            method: Method::BlockRatio,
            meta: n,
            delta: (ratio - s[n - 2] / (n - 1) as f64).abs(),
            stderr: None,
        },
        entropies: s,
    })
}

/// Seeded Monte-Carlo estimate of the entropy rate.
///
/// The joint chain is started from its stationary law and run for `steps`
/// uses; each emitted symbol contributes `-log2 c_k(β)`, where `β` is the
/// exact filter belief given all earlier symbols. The standard error comes
/// from batch means over [`MC_BATCHES`] consecutive batches.
pub fn mc_entropy_rate(model: &JointChainModel, steps: usize, seed: u64) -> Result<EntropyEstimate> {
    if steps == 0 {
        return Err(Error::InvalidParameter("Monte-Carlo needs at least one step".into()));
    }
    let params = model.params();
    let system = FilterSystem::build(params)?;
    let q = params.q();
    let gamma = model.gamma();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let batches = MC_BATCHES.min(steps);
    let mut batch_sums = vec![0.0; batches];
    let mut channel = usize::from(rng.random::<f64>() >= gamma[0]);
    let mut belief = system.stationary_belief();
    let mut batch = 0;
    let mut batch_end = steps / batches;
    for t in 0..steps {
        if t > 0 {
            channel = usize::from(rng.random::<f64>() >= q[channel][0]);
        }
        let symbol = usize::from(rng.random::<f64>() >= params.x(channel, 0));
        let c = system.c(symbol, belief);
        batch_sums[batch] -= c.log2();
        belief = system.f(symbol, belief);
        if t + 1 == batch_end && batch + 1 < batches {
            batch += 1;
            batch_end = (batch + 1) * steps / batches;
        }
    }

    let total: f64 = batch_sums.iter().sum();
    let value = total / steps as f64;
    let stderr = if batches < 2 {
        f64::INFINITY
    } else {
        let means: Vec<f64> = (0..batches)
            .map(|b| {
                let len = (b + 1) * steps / batches - b * steps / batches;
                batch_sums[b] / len as f64
            })
            .collect();
        let mean = means.iter().sum::<f64>() / batches as f64;
        let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (batches - 1) as f64;
        (var / batches as f64).sqrt()
    };
    Ok(EntropyEstimate {
        value,
        method: Method::MonteCarlo,
        meta: steps,
        delta: 0.0,
        stderr: Some(stderr),
    })
}
