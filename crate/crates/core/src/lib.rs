//! Classical product-state capacity of a qubit depolarizing channel whose
//! noise level is switched by a two-state Markov chain.
//!
//! The observed error pattern of the channel is a function of a four-state
//! Markov chain (which sub-channel is active, whether the qubit was flipped),
//! so the capacity is `1 - S`, where `S` is the entropy rate of that hidden
//! Markov process. [`blackwell`] evaluates `S` by iterating an atomic measure
//! on the filter belief interval; [`exact_oracle`] provides block-entropy and
//! Monte-Carlo references; [`sweep`] drives grid evaluations and CSV output.
//!
//! ```
//! use memcap::{blackwell, ChannelParams, SolverConfig};
//!
//! let params = ChannelParams::from_physical(0.0, 2.0 / 3.0, 1.0 / 3.0).unwrap();
//! let c = blackwell::capacity(&params, &SolverConfig::default()).unwrap();
//! assert!((c - 0.081704).abs() < 1e-6);
//! ```

pub mod blackwell;
pub mod channel_model;
mod error;
pub mod exact_oracle;
pub mod exec;
pub mod sweep;

pub use blackwell::{AtomicMeasure, FilterSystem, SolverConfig};
pub use channel_model::{ChannelParams, JointChainModel, Physical};
pub use error::{Error, Result};
pub use exact_oracle::{EntropyEstimate, ErrorWord, Method};
pub use exec::Execution;

/// Binary entropy in bits, with `0 log 0 = 0`.
pub fn binary_entropy(p: f64) -> f64 {
    eta(p) + eta(1.0 - p)
}

/// `-p log2 p`, zero at `p <= 0`.
#[inline]
pub fn eta(p: f64) -> f64 {
    if p <= 0.0 {
        0.0
    } else {
        -p * p.log2()
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    #[inline]
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn merge(&mut self, other: CompensatedSum) {
        self.add(other.sum);
        self.add(other.comp);
    }

    #[inline]
    pub(crate) fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_entropy_reference_values() {
        assert_eq!(binary_entropy(0.0), 0.0);
        assert_eq!(binary_entropy(1.0), 0.0);
        assert!((binary_entropy(0.5) - 1.0).abs() < 1e-15);
        // log2(3) - 2/3
        let h = 3f64.log2() - 2.0 / 3.0;
        assert!((binary_entropy(2.0 / 3.0) - h).abs() < 1e-15);
        assert!((binary_entropy(2.0 / 3.0) - 0.918296).abs() < 1e-6);
        assert!((binary_entropy(0.8) - 0.721928).abs() < 1e-6);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut acc = CompensatedSum::default();
        acc.add(1.0);
        for _ in 0..1000 {
            acc.add(1e-17);
        }
        acc.add(-1.0);
        assert!((acc.value() - 1e-14).abs() < 1e-20);
    }
}
