//! Càdlàg piecewise-constant curves in a finite metric space.
//!
//! A [`StepCurve`] holds its initial value and the jumps that follow. It is
//! constant on `[t_k, t_{k+1})`, so right-continuous by construction. A
//! jump at exactly `t = 1` means the value at the terminal time differs
//! from the left limit there; such a curve is not left-continuous at 1.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::MetricSpace;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "CurveDescriptor", try_from = "CurveDescriptor")]
pub struct StepCurve {
    jump_times: Vec<f64>,
    values: Vec<usize>,
}

impl StepCurve {
    pub fn constant(x: usize) -> Self {
        StepCurve { jump_times: Vec::new(), values: vec![x] }
    }

    /// Strict constructor: times strictly increasing in `(0, 1]`, one more
    /// value than jumps, consecutive values distinct.
    pub fn new(jump_times: Vec<f64>, values: Vec<usize>) -> Result<Self> {
        if values.len() != jump_times.len() + 1 {
            return Err(Error::structural(format!(
                "{} values for {} jumps",
                values.len(),
                jump_times.len()
            )));
        }
        if let Some(t) = jump_times.iter().find(|t| !(**t > 0.0 && **t <= 1.0)) {
            return Err(Error::input(format!("jump time {t} outside (0, 1]")));
        }
        if jump_times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::input("jump times must be strictly increasing"));
        }
        if let Some(k) = values.windows(2).position(|w| w[0] == w[1]) {
            return Err(Error::input(format!("spurious breakpoint at jump {k}: value unchanged")));
        }
        Ok(StepCurve { jump_times, values })
    }

    /// Càdlàg normalisation of `initial` followed by `(time, value)` steps.
    ///
    /// Steps must be time-ordered; repeated times keep the last value, and
    /// steps that do not change the value are dropped.
    pub fn normalize(initial: usize, steps: impl IntoIterator<Item = (f64, usize)>) -> Result<Self> {
        let mut jump_times: Vec<f64> = Vec::new();
        let mut values = vec![initial];
        let mut last_t = 0.0;
        for (t, x) in steps {
            if !(t > 0.0 && t <= 1.0) {
                return Err(Error::input(format!("step time {t} outside (0, 1]")));
            }
            if t < last_t {
                return Err(Error::input("step times must be nondecreasing"));
            }
            last_t = t;
            if jump_times.last() == Some(&t) {
                jump_times.pop();
                values.pop();
            }
            if *values.last().unwrap() != x {
                jump_times.push(t);
                values.push(x);
            }
        }
        Ok(StepCurve { jump_times, values })
    }

    /// The filling map: value `path[i]` on `[grid[i], grid[i+1])` and
    /// `path[last]` at `grid[last] = 1`.
    pub fn from_grid_path(grid: &[f64], path: &[usize]) -> Result<Self> {
        if grid.len() != path.len() || path.is_empty() {
            return Err(Error::structural("grid and path must have the same nonzero length"));
        }
        Self::normalize(path[0], grid[1..].iter().copied().zip(path[1..].iter().copied()))
    }

    pub fn jump_times(&self) -> &[f64] {
        &self.jump_times
    }

    pub fn values(&self) -> &[usize] {
        &self.values
    }

    pub fn n_jumps(&self) -> usize {
        self.jump_times.len()
    }

    pub fn initial(&self) -> usize {
        self.values[0]
    }

    /// Value at `t = 1`.
    pub fn terminal(&self) -> usize {
        *self.values.last().unwrap()
    }

    pub fn left_continuous_at_1(&self) -> bool {
        self.jump_times.last() != Some(&1.0)
    }

    pub fn value_at(&self, t: f64) -> usize {
        let k = self.jump_times.partition_point(|&s| s <= t);
        self.values[k]
    }

    /// `lim_{s -> t-} u(s)` for `t > 0`.
    pub fn left_limit(&self, t: f64) -> usize {
        let k = self.jump_times.partition_point(|&s| s < t);
        self.values[k]
    }

    /// `(time, from, to)` for every jump.
    pub fn jumps(&self) -> impl Iterator<Item = (f64, usize, usize)> + '_ {
        self.jump_times.iter().enumerate().map(|(k, &t)| (t, self.values[k], self.values[k + 1]))
    }

    pub fn to_descriptor(&self) -> CurveDescriptor {
        CurveDescriptor {
            jumps: self.jump_times.clone(),
            values: self.values.clone(),
            lc1: self.left_continuous_at_1(),
        }
    }

    pub fn check_space(&self, space: &MetricSpace) -> Result<()> {
        match self.values.iter().find(|&&x| x >= space.len()) {
            Some(x) => Err(Error::input(format!("curve value {x} outside the {}-point space", space.len()))),
            None => Ok(()),
        }
    }
}

/// JSON form `{"jumps": [...], "values": [...], "lc1": bool}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveDescriptor {
    pub jumps: Vec<f64>,
    pub values: Vec<usize>,
    pub lc1: bool,
}

impl CurveDescriptor {
    pub fn build(&self) -> Result<StepCurve> {
        let c = StepCurve::new(self.jumps.clone(), self.values.clone())?;
        if c.left_continuous_at_1() != self.lc1 {
            return Err(Error::input(format!(
                "lc1 = {} contradicts the jump list (jump at t = 1: {})",
                self.lc1,
                !c.left_continuous_at_1()
            )));
        }
        Ok(c)
    }
}

impl From<StepCurve> for CurveDescriptor {
    fn from(c: StepCurve) -> Self {
        c.to_descriptor()
    }
}

impl TryFrom<CurveDescriptor> for StepCurve {
    type Error = Error;

    fn try_from(d: CurveDescriptor) -> Result<Self> {
        d.build()
    }
}

/// Which endpoints an interval contains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalKind {
    /// `(a, b)`
    Open,
    /// `[a, b]`
    Closed,
    /// `(a, b]`
    OpenClosed,
    /// `[a, b)`
    ClosedOpen,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub a: f64,
    pub b: f64,
    pub kind: IntervalKind,
}

impl Interval {
    pub fn new(a: f64, b: f64, kind: IntervalKind) -> Result<Self> {
        if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) {
            return Err(Error::input(format!("interval [{a}, {b}] leaves [0, 1]")));
        }
        if a > b {
            return Err(Error::input(format!("interval endpoints reversed: {a} > {b}")));
        }
        Ok(Interval { a, b, kind })
    }

    pub fn open(a: f64, b: f64) -> Result<Self> {
        Self::new(a, b, IntervalKind::Open)
    }

    pub fn closed(a: f64, b: f64) -> Result<Self> {
        Self::new(a, b, IntervalKind::Closed)
    }

    pub fn open_closed(a: f64, b: f64) -> Result<Self> {
        Self::new(a, b, IntervalKind::OpenClosed)
    }

    pub fn contains(&self, t: f64) -> bool {
        let left = match self.kind {
            IntervalKind::Closed | IntervalKind::ClosedOpen => t >= self.a,
            _ => t > self.a,
        };
        let right = match self.kind {
            IntervalKind::Closed | IntervalKind::OpenClosed => t <= self.b,
            _ => t < self.b,
        };
        left && right
    }

    fn includes_right(&self) -> bool {
        matches!(self.kind, IntervalKind::Closed | IntervalKind::OpenClosed)
    }
}

/// Pointwise variation of the curve restricted to the interval.
///
/// Only jumps strictly inside count, plus a jump at `b` when `b` belongs to
/// the interval. A jump at a closed left endpoint does not count: the
/// curve is right-continuous there, so its restriction does not see it.
pub fn pointwise_variation(curve: &StepCurve, space: &MetricSpace, interval: Interval) -> f64 {
    curve
        .jumps()
        .filter(|&(t, _, _)| t > interval.a && (t < interval.b || (t == interval.b && interval.includes_right())))
        .map(|(_, x, y)| space.d(x, y))
        .sum()
}

/// `Var(u; [0, 1])`, including a terminal jump at `t = 1`.
pub fn total_variation(curve: &StepCurve, space: &MetricSpace) -> f64 {
    curve.jumps().map(|(_, x, y)| space.d(x, y)).sum()
}

/// The variation measure `|Du|` of a step curve: one atom per jump.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AtomicVariationMeasure {
    pub atoms: Vec<(f64, f64)>,
}

impl AtomicVariationMeasure {
    pub fn mass(&self, interval: Interval) -> f64 {
        self.atoms.iter().filter(|(t, _)| interval.contains(*t)).map(|a| a.1).sum()
    }

    pub fn total(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }
}

pub fn variation_measure(curve: &StepCurve, space: &MetricSpace) -> AtomicVariationMeasure {
    AtomicVariationMeasure {
        atoms: curve.jumps().map(|(t, x, y)| (t, space.d(x, y))).collect(),
    }
}

/// `integral_a^{b-h} d(u(t+h), u(t)) / h dt`, evaluated exactly.
///
/// The integrand is piecewise constant with breakpoints at the jump times
/// and the jump times shifted by `-h`.
pub fn diff_quotient_integral_on(curve: &StepCurve, space: &MetricSpace, a: f64, b: f64, h: f64) -> Result<f64> {
    if !(0.0 <= a && a < b && b <= 1.0) {
        return Err(Error::input(format!("bad window [{a}, {b}]")));
    }
    if !(h > 0.0 && h < b - a) {
        return Err(Error::input(format!("step h = {h} outside (0, {})", b - a)));
    }
    let end = b - h;
    let mut cuts = vec![a, end];
    for &t in curve.jump_times() {
        for c in [t, t - h] {
            if c > a && c < end {
                cuts.push(c);
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut acc = 0.0;
    for w in cuts.windows(2) {
        let len = w[1] - w[0];
        if len <= 0.0 {
            continue;
        }
        let mid = 0.5 * (w[0] + w[1]);
        acc += len * space.d(curve.value_at(mid), curve.value_at(mid + h));
    }
    Ok(acc / h)
}

pub fn diff_quotient_integral(curve: &StepCurve, space: &MetricSpace, h: f64) -> Result<f64> {
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::input(format!("step h = {h} outside (0, 1)")));
    }
    diff_quotient_integral_on(curve, space, 0.0, 1.0, h)
}

/// Smallest dyadic step used by [`check_bv_equivalences`].
pub const MIN_DYADIC_EXP: u32 = 16;

#[derive(Debug, Clone, Serialize)]
pub struct BvReport {
    /// `Var(u; (0, 1))`.
    pub variation: f64,
    /// `(h, integral)` for `h = 2^-1 .. 2^-16`.
    pub dyadic_quotients: Vec<(f64, f64)>,
    pub sup_quotient: f64,
    pub halving_monotone: bool,
    pub sup_matches_variation: bool,
    pub distance_bound: bool,
    /// Distance-function family: `|D d(u(.), x)| <= |Du|` for every point `x`.
    pub distance_functions: bool,
    pub violations: Vec<String>,
}

impl BvReport {
    pub fn passed(&self) -> bool {
        self.halving_monotone && self.sup_matches_variation && self.distance_bound && self.distance_functions
    }
}

/// Numerical check of the equivalent characterisations of BV curves.
pub fn check_bv_equivalences(curve: &StepCurve, space: &MetricSpace, tol: f64) -> Result<BvReport> {
    curve.check_space(space)?;
    let mut violations = Vec::new();
    let variation = pointwise_variation(curve, space, Interval::open(0.0, 1.0)?);

    // (a) h -> l(h) grows under halving, for dyadic and off-grid steps
    let mut halving_monotone = true;
    let mut dyadic_quotients = Vec::new();
    for k in 1..=MIN_DYADIC_EXP {
        for base in [1.0, 0.7, 0.3] {
            let h = base * 0.5f64.powi(k as i32);
            let l = diff_quotient_integral(curve, space, h)?;
            let l_half = diff_quotient_integral(curve, space, h / 2.0)?;
            if l > l_half + tol {
                halving_monotone = false;
                violations.push(format!("halving: l({h}) = {l} > l({}) = {l_half}", h / 2.0));
            }
            if base == 1.0 {
                dyadic_quotients.push((h, l));
            }
        }
    }

    // (b) sup over dyadic h against the pointwise variation
    let sup_quotient = dyadic_quotients.iter().map(|q| q.1).fold(0.0, f64::max);
    let sup_matches_variation = sup_quotient <= variation + tol && variation <= sup_quotient + tol;
    if !sup_matches_variation {
        violations.push(format!("sup_h quotient {sup_quotient} vs variation {variation}"));
    }

    // (c) d(u(s), u(t)) <= |Du|((s, t]) on a grid refined at every jump
    let vm = variation_measure(curve, space);
    let mut times: Vec<f64> = (0..=64).map(|k| k as f64 / 64.0).collect();
    let jt = curve.jump_times();
    times.extend_from_slice(jt);
    for (k, &t) in jt.iter().enumerate() {
        let prev = if k == 0 { 0.0 } else { jt[k - 1] };
        times.push(0.5 * (prev + t));
    }
    times.sort_by(f64::total_cmp);
    times.dedup();
    let mut distance_bound = true;
    for (i, &s) in times.iter().enumerate() {
        for &t in &times[i + 1..] {
            let lhs = space.d(curve.value_at(s), curve.value_at(t));
            let rhs = vm.mass(Interval::open_closed(s, t)?);
            if lhs > rhs + tol {
                distance_bound = false;
                violations.push(format!("d(u({s}), u({t})) = {lhs} > |Du|(({s}, {t}]) = {rhs}"));
            }
        }
    }

    // (d) distance-function family
    let mut distance_functions = true;
    for x in 0..space.len() {
        for (t, from, to) in curve.jumps() {
            let jump = (space.d(to, x) - space.d(from, x)).abs();
            if jump > space.d(from, to) + tol {
                distance_functions = false;
                violations.push(format!("d(., {x}) jumps by {jump} at {t}, more than |Du|({{t}})"));
            }
        }
    }

    Ok(BvReport {
        variation,
        dyadic_quotients,
        sup_quotient,
        halving_monotone,
        sup_matches_variation,
        distance_bound,
        distance_functions,
        violations,
    })
}
