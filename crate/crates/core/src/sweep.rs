//! Grid evaluation, method comparison and CSV output.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::binary_entropy;
use crate::blackwell::{self, SolverConfig};
use crate::channel_model::{validate_physical, ChannelParams, Constraints, Diagnostic, CP_MIN};
use crate::error::{Error, Result};
use crate::exact_oracle::{self, EntropyEstimate, OracleConfig};
use crate::exec::Execution;

/// Evenly spaced values `start..=stop`; `count == 1` yields `start` only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl Axis {
    pub fn new(start: f64, stop: f64, count: usize) -> Self {
        Self { start, stop, count }
    }

    pub fn point(value: f64) -> Self {
        Self::new(value, value, 1)
    }

    pub fn values(&self) -> Vec<f64> {
        match self.count {
            0 => Vec::new(),
            1 => vec![self.start],
            n => {
                let step = (self.stop - self.start) / (n - 1) as f64;
                (0..n)
                    .map(|i| if i == n - 1 { self.stop } else { self.start + step * i as f64 })
                    .collect()
            }
        }
    }
}

impl FromStr for Axis {
    type Err = Error;

    /// `value` or `start:stop:count`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("axis {s:?}: expected VALUE or START:STOP:COUNT"));
        let parts: Vec<&str> = s.split(':').collect();
        match parts[..] {
            [v] => v.trim().parse().map(Axis::point).map_err(|_| bad()),
            [a, b, n] => {
                let start = a.trim().parse().map_err(|_| bad())?;
                let stop = b.trim().parse().map_err(|_| bad())?;
                let count: usize = n.trim().parse().map_err(|_| bad())?;
                if count == 0 {
                    return Err(Error::InvalidParameter(format!("axis {s:?}: count must be >= 1")));
                }
                Ok(Axis::new(start, stop, count))
            }
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.start, self.stop, self.count)
    }
}

/// How `d` is chosen at each grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DPolicy {
    Explicit(Axis),
    /// `d = min(a_bar - 1/3, 1 - a_bar)`.
    MaxAllowed,
}

/// Largest `d` keeping both sub-channels completely positive.
pub fn max_allowed_d(a_bar: f64) -> f64 {
    (a_bar - CP_MIN).min(1.0 - a_bar).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Methods {
    pub blackwell: bool,
    pub oracle: bool,
    pub monte_carlo: bool,
    pub references: bool,
}

impl Methods {
    pub fn all() -> Self {
        Self {
            blackwell: true,
            oracle: true,
            monte_carlo: true,
            references: true,
        }
    }

    fn names(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.blackwell {
            out.push("blackwell");
        }
        if self.oracle {
            out.push("oracle");
        }
        if self.monte_carlo {
            out.push("monte_carlo");
        }
        if self.references {
            out.push("references");
        }
        out
    }
}

impl FromStr for Methods {
    type Err = Error;

    /// Comma-separated subset of `blackwell, oracle, monte_carlo (mc), references (refs), all`.
    fn from_str(s: &str) -> Result<Self> {
        let mut m = Methods::default();
        for name in s.split(',').map(str::trim).filter(|n| !n.is_empty()) {
            match name {
                "blackwell" => m.blackwell = true,
                "oracle" | "oracle_n" => m.oracle = true,
                "monte_carlo" | "mc" => m.monte_carlo = true,
                "references" | "refs" => m.references = true,
                "all" => m = Methods::all(),
                other => return Err(Error::InvalidParameter(format!("unknown method {other:?}"))),
            }
        }
        if m == Methods::default() {
            return Err(Error::InvalidParameter("no methods selected".into()));
        }
        Ok(m)
    }
}

impl fmt::Display for Methods {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.names().join(","))
    }
}

/// Solver and estimator settings shared by every grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Knobs {
    pub solver: SolverConfig,
    pub oracle_n: usize,
    pub oracle_n_max: usize,
    pub mc_steps: usize,
    pub seed: u64,
    /// Allowed `|blackwell - oracle|` in bits.
    pub cross_check_tol: f64,
    /// Parallelism across grid points.
    pub exec: Execution,
}

impl Default for Knobs {
    fn default() -> Self {
        Self {
            solver: SolverConfig::default(),
            oracle_n: 16,
            oracle_n_max: exact_oracle::DEFAULT_N_MAX,
            mc_steps: 1_000_000,
            seed: 0,
            cross_check_tol: 1e-4,
            exec: Execution::default(),
        }
    }
}

impl Knobs {
    fn oracle_config(&self) -> OracleConfig {
        OracleConfig {
            n_max: self.oracle_n_max,
            exec: self.solver.exec,
        }
    }

    fn describe(&self) -> String {
        let s = &self.solver;
        format!(
            "tol={:e} max_iter={} merge_tol={:e} prune={:e} atom_budget={} oracle_n={} mc_steps={} seed={} cross_check_tol={:e}",
            s.tol, s.max_iter, s.merge_tol, s.prune, s.atom_budget, self.oracle_n, self.mc_steps, self.seed, self.cross_check_tol
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub s: Axis,
    pub a_bar: Axis,
    pub d: DPolicy,
    pub methods: Methods,
    pub knobs: Knobs,
}

/// Closed-form capacities bracketing the memory channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceCurves {
    /// Mean of the sub-channel capacities: the `|s| -> 1` limit.
    pub avg_capacity: f64,
    /// Capacity of the averaged channel: the `s = 0` value.
    pub avg_channel: f64,
    /// `1 - H2(a_bar + d)`.
    pub sub0_capacity: f64,
    /// `1 - H2(a_bar - d)`.
    pub sub1_capacity: f64,
    /// Capacity at the non-forgetful endpoint itself.
    pub min_capacity: f64,
}

pub fn reference_curves(a_bar: f64, d: f64) -> Result<ReferenceCurves> {
    let c = Constraints::default();
    if let Some(diag) = validate_physical(0.0, a_bar, d, &c).into_iter().find(Diagnostic::is_violation) {
        return Err(match diag {
            Diagnostic::CpViolation { channel, value } => Error::CpViolation { channel, value },
            other => Error::InvalidParameter(other.to_string()),
        });
    }
    let sub0 = 1.0 - binary_entropy(a_bar + d);
    let sub1 = 1.0 - binary_entropy(a_bar - d);
    Ok(ReferenceCurves {
        avg_capacity: 0.5 * (sub0 + sub1),
        avg_channel: 1.0 - binary_entropy(a_bar),
        sub0_capacity: sub0,
        sub1_capacity: sub1,
        min_capacity: sub0.min(sub1),
    })
}

/// Entropy estimate with its capacity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodResult {
    pub estimate: EntropyEstimate,
    pub capacity: f64,
}

impl MethodResult {
    fn new(estimate: EntropyEstimate) -> Self {
        Self {
            estimate,
            capacity: (1.0 - estimate.value).clamp(0.0, 1.0),
        }
    }
}

/// One evaluated grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub params: ChannelParams,
    pub blackwell: Option<MethodResult>,
    /// Block difference `S_n - S_{n-1}`.
    pub oracle: Option<MethodResult>,
    /// Block ratio `S_n / n`.
    pub oracle_ratio: Option<EntropyEstimate>,
    pub monte_carlo: Option<MethodResult>,
    pub references: Option<ReferenceCurves>,
}

impl ResultRow {
    /// `|blackwell - oracle|` in bits when both were computed.
    pub fn blackwell_oracle_gap(&self) -> Option<f64> {
        Some((self.blackwell?.estimate.value - self.oracle?.estimate.value).abs())
    }
}

fn at_point(params: &ChannelParams, e: Error) -> Error {
    match params.to_physical() {
        Some(p) => Error::AtPoint {
            s: p.s,
            a_bar: p.a_bar,
            d: p.d,
            source: Box::new(e),
        },
        None => e,
    }
}

/// Evaluates every requested method at one parameter point.
pub fn run_point(params: &ChannelParams, methods: Methods, knobs: &Knobs, seed: u64) -> Result<ResultRow> {
    let inner = || -> Result<ResultRow> {
        let blackwell = if methods.blackwell {
            let (capacity, estimate) = blackwell::capacity_with_estimate(params, &knobs.solver)?;
            Some(MethodResult { estimate, capacity })
        } else {
            None
        };
        let (oracle, oracle_ratio) = if methods.oracle {
            let model = crate::JointChainModel::build(params);
            let est = exact_oracle::entropy_rate_oracle(&model, knobs.oracle_n, &knobs.oracle_config())?;
            (Some(MethodResult::new(est.difference)), Some(est.ratio))
        } else {
            (None, None)
        };
        let monte_carlo = if methods.monte_carlo {
            let model = crate::JointChainModel::build(params);
            Some(MethodResult::new(exact_oracle::mc_entropy_rate(&model, knobs.mc_steps, seed)?))
        } else {
            None
        };
        let references = match (methods.references, params.to_physical()) {
            (true, Some(p)) => Some(reference_curves(p.a_bar, p.d)?),
            _ => None,
        };
        Ok(ResultRow {
            params: *params,
            blackwell,
            oracle,
            oracle_ratio,
            monte_carlo,
            references,
        })
    };
    inner().map_err(|e| at_point(params, e))
}

/// Grid points in row order (`s` outermost, then `a_bar`, then `d`).
/// Every point is validated before anything is computed.
pub fn grid(spec: &SweepSpec) -> Result<Vec<ChannelParams>> {
    let c = Constraints::default();
    let mut points = Vec::new();
    let mut invalid = Vec::new();
    let d_values = match spec.d {
        DPolicy::Explicit(axis) => Some(axis.values()),
        DPolicy::MaxAllowed => None,
    };
    for s in spec.s.values() {
        for a in spec.a_bar.values() {
            let ds = d_values.clone().unwrap_or_else(|| vec![max_allowed_d(a)]);
            for d in ds {
                match ChannelParams::from_physical_with(s, a, d, &c) {
                    Ok(p) => points.push(p),
                    Err(e) => invalid.push(format!("(s={s}, a_bar={a}, d={d}): {e}")),
                }
            }
        }
    }
    if !invalid.is_empty() {
        return Err(Error::InvalidGrid(invalid));
    }
    if points.is_empty() {
        return Err(Error::InvalidParameter("empty grid".into()));
    }
    Ok(points)
}

/// Evaluates the whole grid. Point `i` uses Monte-Carlo seed `seed + i`.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<ResultRow>> {
    let points = grid(spec)?;
    let knobs = spec.knobs;
    let results = knobs.exec.map_range(points.len(), |i| {
        run_point(&points[i], spec.methods, &knobs, knobs.seed.wrapping_add(i as u64))
    });
    results.into_iter().collect()
}

/// Fixed 12-significant-digit rendering.
pub fn format_number(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..12).contains(&exp) {
        format!("{:.*}", (11 - exp).max(0) as usize, x)
    } else {
        format!("{x:.11e}")
    }
}

fn header(methods: Methods) -> Vec<&'static str> {
    let mut h = vec!["s", "a_bar", "d", "q00", "q10", "x0_noerr", "x1_noerr"];
    if methods.blackwell {
        h.extend(["blackwell_entropy", "blackwell_capacity", "blackwell_iterations", "blackwell_delta"]);
    }
    if methods.oracle {
        h.extend(["oracle_n", "oracle_entropy", "oracle_capacity", "oracle_ratio_entropy"]);
    }
    if methods.blackwell && methods.oracle {
        h.push("blackwell_oracle_gap");
    }
    if methods.monte_carlo {
        h.extend(["mc_steps", "mc_entropy", "mc_capacity", "mc_stderr"]);
    }
    if methods.references {
        h.extend([
            "ref_avg_capacity",
            "ref_avg_channel",
            "ref_sub0_capacity",
            "ref_sub1_capacity",
            "ref_min_capacity",
        ]);
    }
    h
}

fn record(row: &ResultRow, methods: Methods) -> Vec<String> {
    let num = |x: Option<f64>| x.map_or_else(String::new, format_number);
    let mut out: Vec<String> = row.params.record().into_iter().map(|(_, v)| num(Some(v))).collect();
    if methods.blackwell {
        let b = row.blackwell;
        out.push(num(b.map(|b| b.estimate.value)));
        out.push(num(b.map(|b| b.capacity)));
        out.push(b.map_or_else(String::new, |b| b.estimate.meta.to_string()));
        out.push(num(b.map(|b| b.estimate.delta)));
    }
    if methods.oracle {
        let o = row.oracle;
        out.push(o.map_or_else(String::new, |o| o.estimate.meta.to_string()));
        out.push(num(o.map(|o| o.estimate.value)));
        out.push(num(o.map(|o| o.capacity)));
        out.push(num(row.oracle_ratio.map(|r| r.value)));
    }
    if methods.blackwell && methods.oracle {
        out.push(num(row.blackwell_oracle_gap()));
    }
    if methods.monte_carlo {
        let m = row.monte_carlo;
        out.push(m.map_or_else(String::new, |m| m.estimate.meta.to_string()));
        out.push(num(m.map(|m| m.estimate.value)));
        out.push(num(m.map(|m| m.capacity)));
        out.push(num(m.and_then(|m| m.estimate.stderr)));
    }
    if methods.references {
        let r = row.references;
        out.push(num(r.map(|r| r.avg_capacity)));
        out.push(num(r.map(|r| r.avg_channel)));
        out.push(num(r.map(|r| r.sub0_capacity)));
        out.push(num(r.map(|r| r.sub1_capacity)));
        out.push(num(r.map(|r| r.min_capacity)));
    }
    out
}

/// Writes `#` comment lines recording the spec, a header, then one line per row.
pub fn write_csv<W: Write>(spec: &SweepSpec, rows: &[ResultRow], mut out: W) -> std::io::Result<()> {
    let d_policy = match spec.d {
        DPolicy::Explicit(axis) => format!("explicit {axis}"),
        DPolicy::MaxAllowed => "max_allowed".into(),
    };
    writeln!(out, "# memcap sweep: s={} a_bar={} d={} methods={}", spec.s, spec.a_bar, d_policy, spec.methods)?;
    writeln!(out, "# knobs: {}", spec.knobs.describe())?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(spec.methods))?;
    for row in rows {
        w.write_record(record(row, spec.methods))?;
    }
    w.flush()
}

/// Pairwise differences between the three entropy estimators at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub blackwell: EntropyEstimate,
    pub oracle: EntropyEstimate,
    pub monte_carlo: EntropyEstimate,
    pub blackwell_oracle: f64,
    pub blackwell_mc: f64,
    pub oracle_mc: f64,
    /// `|blackwell - oracle| <= cross_check_tol`.
    pub oracle_agrees: bool,
    /// `|blackwell - mc| <= 3 stderr`.
    pub mc_agrees: bool,
}

impl Comparison {
    pub fn passed(&self) -> bool {
        self.oracle_agrees && self.mc_agrees
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = |ok: bool| if ok { "PASS" } else { "FAIL" };
        writeln!(f, "blackwell     {:.12} bits ({} iterations)", self.blackwell.value, self.blackwell.meta)?;
        writeln!(f, "oracle n={:<4} {:.12} bits", self.oracle.meta, self.oracle.value)?;
        writeln!(
            f,
            "monte carlo   {:.12} bits ± {:.2e} ({} steps)",
            self.monte_carlo.value,
            self.monte_carlo.stderr.unwrap_or(f64::NAN),
            self.monte_carlo.meta
        )?;
        writeln!(f, "|blackwell - oracle| = {:.3e}  {}", self.blackwell_oracle, verdict(self.oracle_agrees))?;
        writeln!(f, "|blackwell - mc|     = {:.3e}  {}", self.blackwell_mc, verdict(self.mc_agrees))?;
        write!(f, "|oracle - mc|        = {:.3e}", self.oracle_mc)
    }
}

pub fn compare_methods(params: &ChannelParams, knobs: &Knobs) -> Result<Comparison> {
    let row = run_point(
        params,
        Methods {
            blackwell: true,
            oracle: true,
            monte_carlo: true,
            references: false,
        },
        knobs,
        knobs.seed,
    )?;
    let (b, o, m) = (
        row.blackwell.expect("requested").estimate,
        row.oracle.expect("requested").estimate,
        row.monte_carlo.expect("requested").estimate,
    );
    let blackwell_mc = (b.value - m.value).abs();
    let blackwell_oracle = (b.value - o.value).abs();
    Ok(Comparison {
        blackwell: b,
        oracle: o,
        monte_carlo: m,
        blackwell_oracle,
        blackwell_mc,
        oracle_mc: (o.value - m.value).abs(),
        oracle_agrees: blackwell_oracle <= knobs.cross_check_tol,
        mc_agrees: blackwell_mc <= 3.0 * m.stderr.unwrap_or(f64::INFINITY),
    })
}

/// Parameter families behind the published figures.
pub mod presets {
    use super::*;

    /// Capacity surface over `(s, a_bar)` with maximal sub-channel separation.
    pub fn figure1() -> SweepSpec {
        SweepSpec {
            s: Axis::new(-0.95, 0.95, 39),
            a_bar: Axis::new(CP_MIN, 1.0, 27),
            d: DPolicy::MaxAllowed,
            methods: Methods {
                blackwell: true,
                references: true,
                ..Methods::default()
            },
            knobs: Knobs::default(),
        }
    }

    /// Capacity against `a_bar` at `s = 2/3`, with the reference curves.
    pub fn figure2() -> SweepSpec {
        SweepSpec {
            s: Axis::point(2.0 / 3.0),
            a_bar: Axis::new(CP_MIN, 1.0, 61),
            ..figure1()
        }
    }

    /// Capacity against `s` for `a_bar = 2/3`, `d = 1/3`.
    pub fn figure3() -> SweepSpec {
        SweepSpec {
            s: Axis::new(0.0, 0.99, 100),
            a_bar: Axis::point(2.0 / 3.0),
            d: DPolicy::Explicit(Axis::point(1.0 / 3.0)),
            methods: Methods {
                blackwell: true,
                monte_carlo: true,
                references: true,
                ..Methods::default()
            },
            knobs: Knobs {
                mc_steps: 100_000,
                ..Knobs::default()
            },
        }
    }

    pub fn figure(n: u8) -> Result<SweepSpec> {
        match n {
            1 => Ok(figure1()),
            2 => Ok(figure2()),
            3 => Ok(figure3()),
            other => Err(Error::InvalidParameter(format!("no figure {other}; expected 1, 2 or 3"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn axis_values_and_parsing() {
        assert_eq!(Axis::point(0.3).values(), vec![0.3]);
        let v = Axis::new(0.0, 0.9, 10).values();
        assert_eq!(v.len(), 10);
        assert_eq!(v[9], 0.9);
        assert_abs_diff_eq!(v[3], 0.3, epsilon = 1e-15);
        assert_eq!("0.5".parse::<Axis>().unwrap(), Axis::point(0.5));
        assert_eq!("0:0.9:10".parse::<Axis>().unwrap(), Axis::new(0.0, 0.9, 10));
        assert!("0:1".parse::<Axis>().is_err());
        assert!("0:1:0".parse::<Axis>().is_err());
        assert!("x".parse::<Axis>().is_err());
    }

    #[test]
    fn methods_parsing() {
        let m: Methods = "blackwell,mc".parse().unwrap();
        assert!(m.blackwell && m.monte_carlo && !m.oracle && !m.references);
        assert_eq!("all".parse::<Methods>().unwrap(), Methods::all());
        assert!("".parse::<Methods>().is_err());
        assert!("spectral".parse::<Methods>().is_err());
        assert_eq!(Methods::all().to_string(), "blackwell,oracle,monte_carlo,references");
    }

    #[test]
    fn max_allowed_d_values() {
        assert_eq!(max_allowed_d(CP_MIN), 0.0);
        assert_abs_diff_eq!(max_allowed_d(0.5), 1.0 / 6.0, epsilon = 1e-15);
        assert_abs_diff_eq!(max_allowed_d(2.0 / 3.0), 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(max_allowed_d(0.8), 0.2, epsilon = 1e-15);
        assert_eq!(max_allowed_d(1.0), 0.0);
    }

    #[test]
    fn reference_curve_examples() {
        let r = reference_curves(2.0 / 3.0, 1.0 / 3.0).unwrap();
        assert_abs_diff_eq!(r.avg_capacity, 0.540852, epsilon = 1e-6);
        assert_abs_diff_eq!(r.avg_channel, 0.081704, epsilon = 1e-6);
        assert_eq!(r.sub0_capacity, 1.0);
        assert_eq!(r.min_capacity, r.sub1_capacity);

        let r = reference_curves(0.75, 0.0).unwrap();
        let c = 1.0 - binary_entropy(0.75);
        for v in [r.avg_capacity, r.avg_channel, r.sub0_capacity, r.sub1_capacity, r.min_capacity] {
            assert_abs_diff_eq!(v, c, epsilon = 1e-15);
        }
        let r = reference_curves(1.0, 0.0).unwrap();
        assert_eq!(
            [r.avg_capacity, r.avg_channel, r.sub0_capacity, r.sub1_capacity, r.min_capacity],
            [1.0; 5]
        );
        assert!(matches!(reference_curves(0.6, 0.5), Err(Error::CpViolation { .. })));
    }

    #[test]
    fn number_formatting() {
        assert_eq!(format_number(0.0), "0");
        assert_eq!(format_number(0.081704165945510), "0.0817041659455");
        assert_eq!(format_number(1.0), "1.00000000000");
        assert_eq!(format_number(-0.5), "-0.500000000000");
        assert_eq!(format_number(1.5e-10), "1.50000000000e-10");
        assert_eq!(format_number(f64::NAN), "NaN");
    }

    #[test]
    fn invalid_grid_lists_every_bad_point() {
        let spec = SweepSpec {
            s: Axis::new(0.0, 1.0, 3),
            a_bar: Axis::new(0.3, 0.6, 2),
            d: DPolicy::Explicit(Axis::point(0.0)),
            methods: Methods {
                references: true,
                ..Default::default()
            },
            knobs: Knobs::default(),
        };
        match grid(&spec) {
            Err(Error::InvalidGrid(points)) => assert_eq!(points.len(), 4),
            other => panic!("expected invalid grid, got {other:?}"),
        }
    }

    #[test]
    fn row_order_is_lexicographic() {
        let spec = SweepSpec {
            s: Axis::new(0.0, 0.5, 2),
            a_bar: Axis::new(0.5, 0.8, 3),
            d: DPolicy::Explicit(Axis::new(0.0, 0.1, 2)),
            methods: Methods {
                references: true,
                ..Default::default()
            },
            knobs: Knobs::default(),
        };
        let pts = grid(&spec).unwrap();
        assert_eq!(pts.len(), 12);
        let keys: Vec<(f64, f64, f64)> = pts
            .iter()
            .map(|p| {
                let p = p.to_physical().unwrap();
                (p.s, p.a_bar, p.d)
            })
            .collect();
        let mut sorted = keys.clone();
        sorted.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert_eq!(keys, sorted);
    }

    #[test]
    fn presets_have_expected_sizes() {
        assert_eq!(grid(&presets::figure1()).unwrap().len(), 39 * 27);
        assert_eq!(grid(&presets::figure2()).unwrap().len(), 61);
        assert_eq!(grid(&presets::figure3()).unwrap().len(), 100);
        assert!(presets::figure(4).is_err());
    }

    #[test]
    fn run_point_memoryless() {
        let p = ChannelParams::from_physical(0.0, 2.0 / 3.0, 1.0 / 3.0).unwrap();
        let knobs = Knobs {
            mc_steps: 200_000,
            ..Knobs::default()
        };
        let row = run_point(&p, Methods::all(), &knobs, 3).unwrap();
        let exact = 1.0 - binary_entropy(2.0 / 3.0);
        assert_abs_diff_eq!(row.blackwell.unwrap().capacity, exact, epsilon = 1e-12);
        assert_abs_diff_eq!(row.oracle.unwrap().capacity, exact, epsilon = 1e-12);
        let mc = row.monte_carlo.unwrap();
        assert!((mc.capacity - exact).abs() <= 3.0 * mc.estimate.stderr.unwrap());
        assert_abs_diff_eq!(row.references.unwrap().avg_channel, exact, epsilon = 1e-15);
    }

    #[test]
    fn solver_errors_carry_the_point() {
        let p = ChannelParams::from_physical(0.9, 0.5, 1.0 / 6.0).unwrap();
        let knobs = Knobs {
            solver: SolverConfig {
                max_iter: 2,
                ..SolverConfig::default()
            },
            ..Knobs::default()
        };
        let methods = Methods {
            blackwell: true,
            ..Default::default()
        };
        let err = run_point(&p, methods, &knobs, 0).unwrap_err();
        assert!(matches!(err, Error::AtPoint { s, .. } if s == 0.9));
        assert!(matches!(err.root(), Error::NonConvergence { iterations: 2, .. }));
        assert!(err.to_string().contains("s=0.9"));
    }

    #[test]
    fn csv_layout() {
        let spec = SweepSpec {
            s: Axis::new(0.0, 0.5, 2),
            a_bar: Axis::point(0.75),
            d: DPolicy::MaxAllowed,
            methods: "blackwell,oracle,references".parse().unwrap(),
            knobs: Knobs {
                oracle_n: 8,
                ..Knobs::default()
            },
        };
        let rows = run_sweep(&spec).unwrap();
        let mut buf = Vec::new();
        write_csv(&spec, &rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("# memcap sweep"));
        assert!(lines[1].starts_with("# knobs: tol=1e-10"));
        assert!(lines[2].starts_with("s,a_bar,d,q00,q10,x0_noerr,x1_noerr,blackwell_entropy"));
        assert!(lines[2].ends_with("ref_min_capacity"));
        assert_eq!(lines.len(), 5);
        let ncols = lines[2].split(',').count();
        assert!(lines[3..].iter().all(|l| l.split(',').count() == ncols));
        assert!(lines[3].starts_with("0,0.750000000000,0.250000000000,"));
    }
}
