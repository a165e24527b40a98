//! The switched depolarizing channel and its hidden-Markov representation.
//!
//! Sub-channel `i` leaves the qubit alone with probability `x_i^0` and flips
//! its Bloch vector with probability `x_i^1 = 1 - x_i^0`. Which sub-channel
//! acts is chosen by a two-state Markov chain with row-stochastic matrix `q`.
//! The joint (channel, flip) process is a four-state Markov chain; the
//! observed flip pattern is the function `(i, j) -> j` of it.
//!
//! Joint states are always ordered `(0,0), (0,1), (1,0), (1,1)`, i.e. state
//! `(i, j)` has index `2 i + j`.

use std::fmt;

use crate::error::{Error, Result};

/// Lower end of the completely positive window for `x_i^0`.
pub const CP_MIN: f64 = 1.0 / 3.0;

const STOCHASTIC_TOL: f64 = 1e-12;
const CP_TOL: f64 = 1e-12;
const DOUBLY_STOCHASTIC_TOL: f64 = 1e-12;

/// Index of joint state `(channel, flip)`.
#[inline]
pub const fn state_index(channel: usize, flip: usize) -> usize {
    2 * channel + flip
}

/// Construction constraints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constraints {
    /// Allow `x_i^0` anywhere in `[0, 1]`. Entropy computations accept such
    /// parameters; capacity reports refuse them.
    pub relax_cp: bool,
    /// Required distance of the switching eigenvalue from `±1`.
    pub forgetful_margin: f64,
    /// Distance from `±1` below which a valid chain is flagged as nearly
    /// non-forgetful.
    pub near_forgetful_warning: f64,
}

impl Default for Constraints {
    fn default() -> Self {
        Self {
            relax_cp: false,
            forgetful_margin: 1e-9,
            near_forgetful_warning: 1e-5,
        }
    }
}

impl Constraints {
    pub fn relaxed() -> Self {
        Self {
            relax_cp: true,
            ..Self::default()
        }
    }
}

/// Symmetric-switching view of the parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Physical {
    /// Non-unit eigenvalue of the switching matrix.
    pub s: f64,
    /// Average no-error probability.
    pub a_bar: f64,
    /// Half the difference of the sub-channel no-error probabilities.
    pub d: f64,
}

/// Findings of [`validate_physical`] / [`validate_raw`].
#[derive(Debug, Clone, PartialEq)]
pub enum Diagnostic {
    NotFinite(&'static str),
    NotStochastic { row: usize, detail: String },
    NonForgetful { s: f64 },
    NearNonForgetful { s: f64 },
    CpViolation { channel: usize, value: f64 },
    OutOfUnitInterval { channel: usize, value: f64 },
}

impl Diagnostic {
    /// Warnings do not prevent construction.
    pub fn is_violation(&self) -> bool {
        !matches!(self, Diagnostic::NearNonForgetful { .. })
    }

    fn into_error(self, margin: f64) -> Error {
        match self {
            Diagnostic::NotFinite(what) => Error::InvalidParameter(format!("{what} is not finite")),
            Diagnostic::NotStochastic { row, detail } => Error::NotStochastic { row, detail },
            Diagnostic::NonForgetful { s } => Error::NonForgetful { s, margin },
            Diagnostic::CpViolation { channel, value } => Error::CpViolation { channel, value },
            Diagnostic::OutOfUnitInterval { channel, value } => Error::InvalidParameter(format!(
                "x{channel}_noerr = {value} is not a probability"
            )),
            Diagnostic::NearNonForgetful { .. } => unreachable!("warnings are not errors"),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::NotFinite(what) => write!(f, "{what} is not finite"),
            Diagnostic::NotStochastic { row, detail } => {
                write!(f, "switching row {row} not stochastic: {detail}")
            }
            Diagnostic::NonForgetful { s } => write!(f, "non-forgetful switching (s = {s})"),
            Diagnostic::NearNonForgetful { s } => write!(f, "near non-forgetful (s = {s})"),
            Diagnostic::CpViolation { channel, value } => {
                write!(f, "CP violation: x{channel}_noerr = {value} outside [1/3, 1]")
            }
            Diagnostic::OutOfUnitInterval { channel, value } => {
                write!(f, "x{channel}_noerr = {value} outside [0, 1]")
            }
        }
    }
}

fn check_x(channel: usize, value: f64, c: &Constraints, out: &mut Vec<Diagnostic>) {
    if !value.is_finite() {
        out.push(Diagnostic::NotFinite(if channel == 0 {
            "x0_noerr"
        } else {
            "x1_noerr"
        }));
    } else if !c.relax_cp && !(CP_MIN - CP_TOL..=1.0 + CP_TOL).contains(&value) {
        out.push(Diagnostic::CpViolation { channel, value });
    } else if !(-CP_TOL..=1.0 + CP_TOL).contains(&value) {
        out.push(Diagnostic::OutOfUnitInterval { channel, value });
    }
}

fn check_eigenvalue(s: f64, c: &Constraints, out: &mut Vec<Diagnostic>) {
    if s.abs() > 1.0 - c.forgetful_margin {
        out.push(Diagnostic::NonForgetful { s });
    } else if s.abs() > 1.0 - c.near_forgetful_warning {
        out.push(Diagnostic::NearNonForgetful { s });
    }
}

/// Checks a physical parameter triple without constructing anything.
pub fn validate_physical(s: f64, a_bar: f64, d: f64, c: &Constraints) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    for (name, v) in [("s", s), ("a_bar", a_bar), ("d", d)] {
        if !v.is_finite() {
            out.push(Diagnostic::NotFinite(name));
        }
    }
    if !out.is_empty() {
        return out;
    }
    check_eigenvalue(s, c, &mut out);
    check_x(0, a_bar + d, c, &mut out);
    check_x(1, a_bar - d, c, &mut out);
    out
}

/// Checks a raw `(q, x0_noerr, x1_noerr)` record without constructing anything.
pub fn validate_raw(q: [[f64; 2]; 2], x0_noerr: f64, x1_noerr: f64, c: &Constraints) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    if q.iter().flatten().any(|v| !v.is_finite()) {
        out.push(Diagnostic::NotFinite("q"));
        return out;
    }
    for (row, r) in q.iter().enumerate() {
        if r.iter().any(|&v| v < 0.0) {
            out.push(Diagnostic::NotStochastic {
                row,
                detail: format!("negative entry in {r:?}"),
            });
        } else if (r[0] + r[1] - 1.0).abs() > STOCHASTIC_TOL {
            out.push(Diagnostic::NotStochastic {
                row,
                detail: format!("sums to {}", r[0] + r[1]),
            });
        }
    }
    if out.is_empty() {
        check_eigenvalue(q[0][0] - q[1][0], c, &mut out);
    }
    check_x(0, x0_noerr, c, &mut out);
    check_x(1, x1_noerr, c, &mut out);
    out
}

/// Validated channel parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    q: [[f64; 2]; 2],
    x_noerr: [f64; 2],
    physical: Option<Physical>,
    relax_cp: bool,
}

impl ChannelParams {
    /// Symmetric switching `q00 = q11 = (1+s)/2`, `x0_noerr = a_bar + d`,
    /// `x1_noerr = a_bar - d`.
    pub fn from_physical(s: f64, a_bar: f64, d: f64) -> Result<Self> {
        Self::from_physical_with(s, a_bar, d, &Constraints::default())
    }

    pub fn from_physical_with(s: f64, a_bar: f64, d: f64, c: &Constraints) -> Result<Self> {
        first_violation(validate_physical(s, a_bar, d, c), c)?;
        let stay = (1.0 + s) / 2.0;
        let leave = (1.0 - s) / 2.0;
        Ok(Self {
            q: [[stay, leave], [leave, stay]],
            x_noerr: [clamp_unit(a_bar + d), clamp_unit(a_bar - d)],
            physical: Some(Physical { s, a_bar, d }),
            relax_cp: c.relax_cp,
        })
    }

    /// General row-stochastic switching. The physical view is available only
    /// when `q` is doubly stochastic.
    pub fn from_raw(q: [[f64; 2]; 2], x0_noerr: f64, x1_noerr: f64) -> Result<Self> {
        Self::from_raw_with(q, x0_noerr, x1_noerr, &Constraints::default())
    }

    pub fn from_raw_with(q: [[f64; 2]; 2], x0_noerr: f64, x1_noerr: f64, c: &Constraints) -> Result<Self> {
        first_violation(validate_raw(q, x0_noerr, x1_noerr, c), c)?;
        let physical = ((q[0][0] - q[1][1]).abs() <= DOUBLY_STOCHASTIC_TOL).then(|| Physical {
            s: q[0][0] - q[1][0],
            a_bar: (x0_noerr + x1_noerr) / 2.0,
            d: (x0_noerr - x1_noerr) / 2.0,
        });
        Ok(Self {
            q,
            x_noerr: [clamp_unit(x0_noerr), clamp_unit(x1_noerr)],
            physical,
            relax_cp: c.relax_cp,
        })
    }

    pub fn to_physical(&self) -> Option<Physical> {
        self.physical
    }

    pub fn s(&self) -> Option<f64> {
        self.physical.map(|p| p.s)
    }

    pub fn a_bar(&self) -> Option<f64> {
        self.physical.map(|p| p.a_bar)
    }

    pub fn d(&self) -> Option<f64> {
        self.physical.map(|p| p.d)
    }

    pub fn q(&self) -> [[f64; 2]; 2] {
        self.q
    }

    pub fn x0_noerr(&self) -> f64 {
        self.x_noerr[0]
    }

    pub fn x1_noerr(&self) -> f64 {
        self.x_noerr[1]
    }

    /// Probability `x_channel^flip` that `channel` produces `flip`.
    #[inline]
    pub fn x(&self, channel: usize, flip: usize) -> f64 {
        if flip == 0 {
            self.x_noerr[channel]
        } else {
            1.0 - self.x_noerr[channel]
        }
    }

    pub fn relax_cp(&self) -> bool {
        self.relax_cp
    }

    /// Second eigenvalue of `q`, equal to `s` in the symmetric case.
    pub fn switching_eigenvalue(&self) -> f64 {
        self.q[0][0] - self.q[1][0]
    }

    /// The same channel with sub-channel labels 0 and 1 exchanged; maps
    /// `(s, a_bar, d)` to `(s, a_bar, -d)`.
    pub fn relabeled(&self) -> Self {
        let q = self.q;
        Self {
            q: [[q[1][1], q[1][0]], [q[0][1], q[0][0]]],
            x_noerr: [self.x_noerr[1], self.x_noerr[0]],
            physical: self.physical.map(|p| Physical { d: -p.d, ..p }),
            relax_cp: self.relax_cp,
        }
    }

    /// The same channel with flip / no-flip output symbols exchanged. Only
    /// constructible with relaxed CP constraints.
    pub fn symbol_flipped(&self) -> Result<Self> {
        let c = Constraints::relaxed();
        Self::from_raw_with(self.q, 1.0 - self.x_noerr[0], 1.0 - self.x_noerr[1], &c)
    }

    /// Stationary distribution of the switching chain.
    pub fn stationary_switch_distribution(&self) -> [f64; 2] {
        stationary_switch_distribution(self)
    }

    /// Flat key-value record used by the CLI and CSV output.
    pub fn record(&self) -> Vec<(&'static str, f64)> {
        let p = self.physical;
        vec![
            ("s", p.map_or(f64::NAN, |p| p.s)),
            ("a_bar", p.map_or(f64::NAN, |p| p.a_bar)),
            ("d", p.map_or(f64::NAN, |p| p.d)),
            ("q00", self.q[0][0]),
            ("q10", self.q[1][0]),
            ("x0_noerr", self.x_noerr[0]),
            ("x1_noerr", self.x_noerr[1]),
        ]
    }
}

fn clamp_unit(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

fn first_violation(diags: Vec<Diagnostic>, c: &Constraints) -> Result<()> {
    match diags.into_iter().find(Diagnostic::is_violation) {
        Some(d) => Err(d.into_error(c.forgetful_margin)),
        None => Ok(()),
    }
}

/// `gamma_0 = q10 / (q01 + q10)`.
pub fn stationary_switch_distribution(params: &ChannelParams) -> [f64; 2] {
    let q01 = params.q[0][1];
    let q10 = params.q[1][0];
    let g0 = q10 / (q01 + q10);
    [g0, 1.0 - g0]
}

/// Four-state joint (channel, flip) chain with its observation matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct JointChainModel {
    params: ChannelParams,
    e: [[f64; 4]; 4],
    f: [[[f64; 4]; 4]; 2],
    gamma: [f64; 2],
    tau: [f64; 4],
}

impl JointChainModel {
    /// `E[(i,j)][(i',j')] = q[i][i'] x_{i'}^{j'}`; `F_a` keeps the rows of `E`
    /// leaving states that emitted `a`.
    pub fn build(params: &ChannelParams) -> Self {
        let mut e = [[0.0; 4]; 4];
        let mut f = [[[0.0; 4]; 4]; 2];
        for i in 0..2 {
            for j in 0..2 {
                let row = state_index(i, j);
                for ip in 0..2 {
                    for jp in 0..2 {
                        let col = state_index(ip, jp);
                        let v = params.q[i][ip] * params.x(ip, jp);
                        e[row][col] = v;
                        f[j][row][col] = v;
                    }
                }
            }
        }
        let gamma = stationary_switch_distribution(params);
        let mut tau = [0.0; 4];
        for i in 0..2 {
            for k in 0..2 {
                tau[state_index(i, k)] = gamma[i] * params.x(i, k);
            }
        }
        Self {
            params: *params,
            e,
            f,
            gamma,
            tau,
        }
    }

    pub fn params(&self) -> &ChannelParams {
        &self.params
    }

    pub fn e(&self) -> &[[f64; 4]; 4] {
        &self.e
    }

    /// Observation matrix `F_symbol`.
    pub fn f(&self, symbol: usize) -> &[[f64; 4]; 4] {
        &self.f[symbol]
    }

    pub fn gamma(&self) -> [f64; 2] {
        self.gamma
    }

    pub fn tau(&self) -> [f64; 4] {
        self.tau
    }

    pub fn ones(&self) -> [f64; 4] {
        [1.0; 4]
    }

    /// Row vector times `F_symbol`.
    #[inline]
    pub fn step(&self, v: &[f64; 4], symbol: usize) -> [f64; 4] {
        let m = &self.f[symbol];
        let mut out = [0.0; 4];
        for (r, &vr) in v.iter().enumerate() {
            if vr != 0.0 {
                for (o, &mc) in out.iter_mut().zip(m[r].iter()) {
                    *o += vr * mc;
                }
            }
        }
        out
    }
}

/// Stationary distribution of the joint chain, `tau_(i,k) = gamma_i x_i^k`.
pub fn stationary_joint_distribution(model: &JointChainModel) -> [f64; 4] {
    model.tau
}
