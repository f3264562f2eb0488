//! Superposition lifts of curves of measures.
//!
//! A [`Lift`] is a finite probability measure on step curves. [`build_lift`]
//! samples a curve at the dyadic times `i / 2^N`, glues optimal couplings of
//! consecutive samples into one plan over paths and turns each path into a
//! step curve. The checks below compare a lift with the curve it claims to
//! represent: marginals, variation, jumps, geodesic structure.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curves::{total_variation, variation_measure, Interval, StepCurve};
use crate::error::{Error, Result};
use crate::space::{DiscreteMeasure, MetricSpace};
use crate::transport::{glue_chain, glue_chain_quantile, proportional_support_size, w1, w1_distance, Coupling};
use crate::wcurves::{dyadic_grid, increments, MeasureCurve, PeriodicSigma, VariationProfile};

/// Largest marginal error a lift may have and still be certified.
pub const MARGINAL_TOL: f64 = 1e-9;

/// Tolerance for the variation identities of built lifts.
pub const IDENTITY_TOL: f64 = 1e-8;

/// Above this many paths the proportional plan gives way to the quantile one.
pub const AUTO_GLUE_ATOMS: u64 = 200_000;

/// How consecutive couplings are glued into a plan over paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gluing {
    /// `c12(x, y) c23(y, z) / m(y)`: independent conditionals.
    Proportional,
    /// Monotone matching of the conditionals at each interface.
    Quantile,
}

/// Grid times closer than this are the same time.
const TIME_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftAtom {
    pub curve: StepCurve,
    pub weight: f64,
}

/// Weighted step curves with total weight one.
///
/// Serialises as a plain list of `{curve, weight}`; pruned mass is kept in
/// memory only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<LiftAtom>", try_from = "Vec<LiftAtom>")]
pub struct Lift {
    atoms: Vec<LiftAtom>,
    pruned_mass: f64,
    gluing: Option<Gluing>,
}

impl From<Lift> for Vec<LiftAtom> {
    fn from(l: Lift) -> Self {
        l.atoms
    }
}

impl TryFrom<Vec<LiftAtom>> for Lift {
    type Error = Error;

    fn try_from(atoms: Vec<LiftAtom>) -> Result<Self> {
        Lift::new(atoms)
    }
}

impl Lift {
    pub fn new(atoms: Vec<LiftAtom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::input("a lift needs at least one atom"));
        }
        if let Some(a) = atoms.iter().find(|a| !a.weight.is_finite() || a.weight < 0.0) {
            return Err(Error::input(format!("atom weight {} is not a nonnegative number", a.weight)));
        }
        let total: f64 = atoms.iter().map(|a| a.weight).sum();
        if (total - 1.0).abs() > MARGINAL_TOL {
            return Err(Error::input(format!("lift weights sum to {total}, expected 1")));
        }
        Ok(Lift { atoms, pruned_mass: 0.0, gluing: None })
    }

    /// Renormalise positive weights; `pruned_mass` records what was lost
    /// before normalisation.
    fn normalized(atoms: Vec<LiftAtom>, pruned_mass: f64) -> Result<Self> {
        let total: f64 = atoms.iter().map(|a| a.weight).sum();
        if !(total > 0.0) {
            return Err(Error::Solver("lift has no mass left".into()));
        }
        let atoms = atoms.into_iter().map(|a| LiftAtom { weight: a.weight / total, ..a }).collect();
        Ok(Lift { atoms, pruned_mass, gluing: None })
    }

    pub fn atoms(&self) -> &[LiftAtom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Mass dropped while gluing, before renormalisation.
    pub fn pruned_mass(&self) -> f64 {
        self.pruned_mass
    }

    /// The gluing rule, for lifts built from couplings.
    pub fn gluing(&self) -> Option<Gluing> {
        self.gluing
    }

    pub fn check_space(&self, space: &MetricSpace) -> Result<()> {
        self.atoms.iter().try_for_each(|a| a.curve.check_space(space))
    }

    /// `(e_t)_# lift` as raw masses.
    pub fn marginal_at(&self, t: f64, n: usize) -> Vec<f64> {
        let mut m = vec![0.0; n];
        for a in &self.atoms {
            m[a.curve.value_at(t)] += a.weight;
        }
        m
    }

    /// `(e_s, e_t)_# lift`.
    pub fn joint(&self, s: f64, t: f64, n: usize) -> Result<Coupling> {
        let mut map: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for a in &self.atoms {
            *map.entry((a.curve.value_at(s), a.curve.value_at(t))).or_insert(0.0) += a.weight;
        }
        Coupling::from_entries(n, map.into_iter().map(|((x, y), m)| (x, y, m)))
    }

    /// Same curves with the same weights, in any order.
    pub fn same_atoms(&self, other: &Lift, tol: f64) -> bool {
        fn key(c: &StepCurve) -> (Vec<u64>, Vec<usize>) {
            (c.jump_times().iter().map(|t| t.to_bits()).collect(), c.values().to_vec())
        }
        let collect = |l: &Lift| {
            let mut m: BTreeMap<_, f64> = BTreeMap::new();
            for a in &l.atoms {
                *m.entry(key(&a.curve)).or_insert(0.0) += a.weight;
            }
            m
        };
        let (a, b) = (collect(self), collect(other));
        a.len() == b.len() && a.iter().zip(&b).all(|((ka, wa), (kb, wb))| ka == kb && (wa - wb).abs() <= tol)
    }
}

fn on_dyadic_grid(mc: &MeasureCurve, level: u32) -> Result<MeasureCurve> {
    if level > 20 {
        return Err(Error::input(format!("level {level} is too fine")));
    }
    mc.resample(dyadic_grid(level)).map_err(|e| match e {
        Error::Unsupported(m) => Error::input(format!("curve is not sampled at every dyadic time of level {level}: {m}")),
        e => e,
    })
}

/// Optimal couplings between consecutive samples.
pub fn chain_couplings(mc: &MeasureCurve) -> Result<Vec<Coupling>> {
    let space = mc.space();
    mc.measures().par_windows(2).map(|w| Ok(w1(space, &w[0], &w[1])?.coupling)).collect()
}

/// The filling map applied to a glued chain of couplings on `grid`.
///
/// With `gluing = None` the proportional plan is used unless it would carry
/// more than [`AUTO_GLUE_ATOMS`] paths.
pub fn lift_from_couplings(grid: &[f64], couplings: &[Coupling], gluing: Option<Gluing>) -> Result<Lift> {
    if couplings.len() + 1 != grid.len() {
        return Err(Error::structural(format!(
            "{} couplings for a grid of {} times",
            couplings.len(),
            grid.len()
        )));
    }
    let rule = gluing.unwrap_or(if proportional_support_size(couplings) > AUTO_GLUE_ATOMS {
        Gluing::Quantile
    } else {
        Gluing::Proportional
    });
    let plan = match rule {
        Gluing::Proportional => glue_chain(couplings)?,
        Gluing::Quantile => glue_chain_quantile(couplings)?,
    };
    let atoms = plan
        .atoms
        .par_iter()
        .map(|(path, m)| Ok(LiftAtom { curve: StepCurve::from_grid_path(grid, path)?, weight: *m }))
        .collect::<Result<Vec<_>>>()?;
    let mut lift = Lift::normalized(atoms, plan.pruned_mass)?;
    lift.gluing = Some(rule);
    Ok(lift)
}

/// Lift of `mc` at the dyadic level `level`.
pub fn build_lift(mc: &MeasureCurve, level: u32) -> Result<Lift> {
    build_lift_on_grid(&on_dyadic_grid(mc, level)?)
}

/// Lift built on the curve's own grid.
pub fn build_lift_on_grid(mc: &MeasureCurve) -> Result<Lift> {
    lift_from_couplings(mc.grid(), &chain_couplings(mc)?, None)
}

/// [`build_lift_on_grid`] with a fixed gluing rule.
pub fn build_lift_with(mc: &MeasureCurve, gluing: Gluing) -> Result<Lift> {
    lift_from_couplings(mc.grid(), &chain_couplings(mc)?, Some(gluing))
}

/// A feasible coupling with the same marginals as `c` and, when one
/// exists, strictly higher cost.
///
/// Takes the pair of atoms `(i, j)`, `(k, l)` whose swap to `(i, l)`,
/// `(k, j)` raises the cost the most and moves the smaller of the two
/// masses. Falls back to the product of the marginals.
pub fn shuffle_coupling(c: &Coupling, space: &MetricSpace) -> Result<Coupling> {
    let entries: Vec<(usize, usize, f64)> = c.iter().collect();
    let mut best: Option<(f64, usize, usize)> = None;
    for (p, &(i, j, _)) in entries.iter().enumerate() {
        for (q, &(k, l, _)) in entries.iter().enumerate().skip(p + 1) {
            if i == k || j == l {
                continue;
            }
            let gain = space.d(i, l) + space.d(k, j) - space.d(i, j) - space.d(k, l);
            if gain > 0.0 && best.is_none_or(|b| gain > b.0) {
                best = Some((gain, p, q));
            }
        }
    }
    if let Some((_, p, q)) = best {
        let (i, j, m1) = entries[p];
        let (k, l, m2) = entries[q];
        let m = m1.min(m2);
        let mut out: Vec<(usize, usize, f64)> = entries
            .iter()
            .enumerate()
            .map(|(r, &(x, y, w))| if r == p || r == q { (x, y, w - m) } else { (x, y, w) })
            .filter(|e| e.2 > 0.0)
            .collect();
        out.push((i, l, m));
        out.push((k, j, m));
        return Coupling::from_entries(c.n_points(), out);
    }
    let mu = DiscreteMeasure::from_masses(c.row_sums())?;
    let nu = DiscreteMeasure::from_masses(c.col_sums())?;
    Ok(Coupling::product(&mu, &nu))
}

/// A marginal-correct lift whose `link`-th coupling is replaced by
/// [`shuffle_coupling`].
pub fn adversarial_lift(mc: &MeasureCurve, level: u32, link: usize) -> Result<Lift> {
    let mc = on_dyadic_grid(mc, level)?;
    let mut couplings = chain_couplings(&mc)?;
    if link >= couplings.len() {
        return Err(Error::input(format!("link {link} out of range for {} couplings", couplings.len())));
    }
    couplings[link] = shuffle_coupling(&couplings[link], mc.space())?;
    lift_from_couplings(mc.grid(), &couplings, None)
}

/// Curves that jump from `x` to `map[x]` at the uniformly spread times
/// `k / 2^level`, each with weight `mu0(x) / 2^level`. Pushes forward to
/// `(1 - t) mu0 + t map_# mu0` at every dyadic time.
pub fn map_lift(mu0: &DiscreteMeasure, map: &[usize], level: u32) -> Result<Lift> {
    if map.len() != mu0.len() {
        return Err(Error::structural(format!("map has {} entries for {} points", map.len(), mu0.len())));
    }
    if let Some(&y) = map.iter().find(|&&y| y >= mu0.len()) {
        return Err(Error::input(format!("map target {y} out of range")));
    }
    let parts = 1usize << level;
    let mut atoms = Vec::new();
    for x in mu0.support() {
        let w = mu0.get(x);
        if map[x] == x {
            atoms.push(LiftAtom { curve: StepCurve::constant(x), weight: w });
            continue;
        }
        for k in 1..=parts {
            let t = k as f64 / parts as f64;
            atoms.push(LiftAtom { curve: StepCurve::new(vec![t], vec![x, map[x]])?, weight: w / parts as f64 });
        }
    }
    Lift::normalized(atoms, 0.0)
}

/// The translation lift `gamma_a(t) = sigma((a, a + t])` of a periodic
/// sigma curve.
pub fn canonical_lift(sigma: &PeriodicSigma) -> Result<Lift> {
    let atoms = sigma.lift_curves().into_iter().map(|(curve, weight)| LiftAtom { curve, weight }).collect();
    Lift::normalized(atoms, 0.0)
}

/// Largest total-variation distance between `(e_t)_# lift` and `mu_t` over
/// the grid of `mc`.
pub fn check_marginals(lift: &Lift, mc: &MeasureCurve) -> f64 {
    let n = mc.space().len();
    mc.grid()
        .par_iter()
        .zip(mc.measures())
        .map(|(&t, mu)| {
            let m = lift.marginal_at(t, n);
            0.5 * m.iter().zip(mu.weights()).map(|(a, b)| (a - b).abs()).sum::<f64>()
        })
        .reduce(|| 0.0, f64::max)
}

/// The curve `t -> (e_t)_# lift` sampled on `grid`.
pub fn pushforward_curve(lift: &Lift, space: &MetricSpace, grid: Vec<f64>) -> Result<MeasureCurve> {
    lift.check_space(space)?;
    let measures = grid
        .iter()
        .map(|&t| DiscreteMeasure::from_masses(lift.marginal_at(t, space.len())))
        .collect::<Result<Vec<_>>>()?;
    MeasureCurve::explicit(space.clone(), grid, measures)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LiftVariation {
    /// `sum weight * Var(curve; [0, 1])`.
    pub total: f64,
    pub per_atom: Vec<f64>,
}

pub fn lift_variation(lift: &Lift, space: &MetricSpace) -> LiftVariation {
    let per_atom: Vec<f64> = lift.atoms.par_iter().map(|a| total_variation(&a.curve, space)).collect();
    let total = per_atom.iter().zip(&lift.atoms).map(|(v, a)| v * a.weight).sum();
    LiftVariation { total, per_atom }
}

/// `sum weight * |D curve|(interval)`.
pub fn lift_variation_on(lift: &Lift, space: &MetricSpace, interval: Interval) -> f64 {
    lift.atoms
        .iter()
        .map(|a| a.weight * variation_measure(&a.curve, space).mass(interval))
        .sum()
}

/// `sum weight * d(gamma_s, gamma_t) / (t - s)`.
///
/// Takes both endpoints so that grid times are hit exactly.
pub fn lift_metric_speed(lift: &Lift, space: &MetricSpace, s: f64, t: f64) -> f64 {
    lift.atoms
        .iter()
        .map(|a| a.weight * space.d(a.curve.value_at(s), a.curve.value_at(t)))
        .sum::<f64>()
        / (t - s)
}

/// Every `[k 2^-j, (k+1) 2^-j]` with `j <= level`.
pub fn dyadic_intervals(level: u32) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for j in 0..=level {
        let parts = 1usize << j;
        for k in 0..parts {
            out.push((k as f64 / parts as f64, (k + 1) as f64 / parts as f64));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalCheck {
    pub a: f64,
    pub b: f64,
    /// `W1`-variation of the curve over the grid cells inside `[a, b]`.
    pub curve_variation: f64,
    /// `sum weight * |D gamma|((a, b])`.
    pub lift_mass: f64,
    /// `lift_mass - curve_variation`.
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuperpositionReport {
    pub marginal_error: f64,
    /// False when the marginals do not match and nothing was checked.
    pub certified: bool,
    pub intervals: Vec<IntervalCheck>,
    pub inequality_holds: bool,
    /// Full-interval comparison, when equality was requested.
    pub equality_gap: Option<f64>,
    /// The interval that breaks the check, or the one with the largest
    /// slack when equality fails.
    pub witness: Option<IntervalCheck>,
    pub tolerance: f64,
    pub passed: bool,
}

fn grid_position(grid: &[f64], t: f64) -> Result<usize> {
    let k = grid.partition_point(|&s| s < t - TIME_TOL);
    if k < grid.len() && (grid[k] - t).abs() <= TIME_TOL {
        Ok(k)
    } else {
        Err(Error::input(format!("interval endpoint {t} is not a grid time")))
    }
}

/// Compare the curve's variation with the lift's variation measure on each
/// interval; with `require_equality`, also demand equality on `[0, 1]`.
pub fn check_superposition_bound(
    lift: &Lift,
    mc: &MeasureCurve,
    intervals: &[(f64, f64)],
    require_equality: bool,
) -> Result<SuperpositionReport> {
    let space = mc.space();
    lift.check_space(space)?;
    let tolerance = IDENTITY_TOL + lift.pruned_mass * space.diameter();
    let positions = intervals
        .iter()
        .map(|&(a, b)| Ok((grid_position(mc.grid(), a)?, grid_position(mc.grid(), b)?)))
        .collect::<Result<Vec<_>>>()?;
    let marginal_error = check_marginals(lift, mc);
    if marginal_error > MARGINAL_TOL {
        return Ok(SuperpositionReport {
            marginal_error,
            certified: false,
            intervals: Vec::new(),
            inequality_holds: false,
            equality_gap: None,
            witness: None,
            tolerance,
            passed: false,
        });
    }

    let inc = increments(mc)?;
    let checks: Vec<IntervalCheck> = intervals
        .par_iter()
        .zip(&positions)
        .map(|(&(a, b), &(i, j))| {
            let curve_variation: f64 = inc[i.min(j)..j.max(i)].iter().sum();
            let lift_mass = Interval::open_closed(a, b).map(|iv| lift_variation_on(lift, space, iv)).unwrap_or(0.0);
            IntervalCheck { a, b, curve_variation, lift_mass, slack: lift_mass - curve_variation }
        })
        .collect();

    let violation = checks.iter().find(|c| c.slack < -tolerance).cloned();
    let inequality_holds = violation.is_none();
    let mut witness = violation;
    let mut equality_gap = None;
    let mut equality_ok = true;
    if require_equality {
        let var: f64 = inc.iter().sum();
        let gap = lift_variation(lift, space).total - var;
        equality_gap = Some(gap);
        equality_ok = gap.abs() <= tolerance;
        if !equality_ok && witness.is_none() {
            witness = checks
                .iter()
                .filter(|c| c.slack > tolerance)
                .min_by(|x, y| (x.b - x.a).total_cmp(&(y.b - y.a)).then(y.slack.total_cmp(&x.slack)))
                .cloned();
        }
    }
    Ok(SuperpositionReport {
        marginal_error,
        certified: true,
        intervals: checks,
        inequality_holds,
        equality_gap,
        witness,
        tolerance,
        passed: inequality_holds && equality_ok,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JumpBalance {
    pub t: f64,
    /// The window `(t - delta, t + delta]` in which jumps are collected.
    pub window: (f64, f64),
    /// Jump mass of the curve near `t`, from the decomposition.
    pub lhs: f64,
    /// `sum weight * |D gamma|(window)`.
    pub rhs: f64,
}

impl JumpBalance {
    pub fn difference(&self) -> f64 {
        (self.lhs - self.rhs).abs()
    }
}

/// Jump mass of the curve at `t` against the jump mass of the lift.
///
/// `delta` is the time resolution of the lift: at level `N` its jumps sit at
/// grid times, so a jump of the curve at `t` shows up within `2^-N`.
pub fn jump_balance(lift: &Lift, space: &MetricSpace, profile: &VariationProfile, t: f64, delta: f64) -> Result<JumpBalance> {
    let (a, b) = ((t - delta).max(0.0), (t + delta).min(1.0));
    let lhs = profile
        .atom_estimates
        .iter()
        .filter(|e| e.lo <= b && e.hi >= a)
        .map(|e| e.mass)
        .sum();
    let rhs = lift_variation_on(lift, space, Interval::open_closed(a, b)?);
    Ok(JumpBalance { t, window: (a, b), lhs, rhs })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeodesicLiftReport {
    /// Weight of atoms with `|d(gamma_0, gamma_1) - Var(gamma)| <= tol`.
    pub fraction: f64,
    /// `sum weight * d(gamma_0, gamma_1)`.
    pub endpoint_cost: f64,
    pub w1: f64,
    /// `|endpoint_cost - w1|`.
    pub gap: f64,
    /// `(t, sum weight * jump size at t)` over all jump times.
    pub jump_profile: Vec<(f64, f64)>,
    pub max_jump_mass: f64,
    pub tolerance: f64,
    pub passed: bool,
}

pub fn geodesic_lift_check(lift: &Lift, mc: &MeasureCurve, tol: f64) -> Result<GeodesicLiftReport> {
    let space = mc.space();
    lift.check_space(space)?;
    let var = lift_variation(lift, space);
    let mut on_geodesics = 0.0;
    let mut endpoint_cost = 0.0;
    let mut profile: BTreeMap<u64, f64> = BTreeMap::new();
    for (a, v) in lift.atoms.iter().zip(&var.per_atom) {
        let d = space.d(a.curve.initial(), a.curve.terminal());
        endpoint_cost += a.weight * d;
        if (d - v).abs() <= tol {
            on_geodesics += a.weight;
        }
        for (t, x, y) in a.curve.jumps() {
            *profile.entry(t.to_bits()).or_insert(0.0) += a.weight * space.d(x, y);
        }
    }
    let total: f64 = lift.atoms.iter().map(|a| a.weight).sum();
    let w1 = w1_distance(space, mc.first(), mc.last())?;
    let jump_profile: Vec<(f64, f64)> = profile.into_iter().map(|(t, m)| (f64::from_bits(t), m)).collect();
    let max_jump_mass = jump_profile.iter().map(|p| p.1).fold(0.0, f64::max);
    let fraction = on_geodesics / total;
    let gap = (endpoint_cost - w1).abs();
    Ok(GeodesicLiftReport {
        fraction,
        endpoint_cost,
        w1,
        gap,
        jump_profile,
        max_jump_mass,
        tolerance: tol,
        passed: fraction >= 1.0 - MARGINAL_TOL && gap <= tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::line_space;
    use crate::wcurves::{curve_variation, decompose_variation, uniform_grid, Generator, Knot};

    fn linear01(grid: Vec<f64>) -> MeasureCurve {
        let space = line_space(&[0.0, 1.0]).unwrap();
        let g = Generator::Linear { mu0: DiscreteMeasure::dirac(2, 0), mu1: DiscreteMeasure::dirac(2, 1) };
        MeasureCurve::from_generator(g, Some(space), grid).unwrap()
    }

    fn backtrack() -> MeasureCurve {
        let space = line_space(&[0.0, 1.0]).unwrap();
        let knots = vec![
            Knot { t: 0.0, measure: DiscreteMeasure::dirac(2, 0) },
            Knot { t: 0.5, measure: DiscreteMeasure::dirac(2, 1) },
            Knot { t: 1.0, measure: DiscreteMeasure::dirac(2, 0) },
        ];
        MeasureCurve::from_generator(Generator::Piecewise { knots }, Some(space), dyadic_grid(2)).unwrap()
    }

    #[test]
    fn constant_curve_gives_one_constant_atom() {
        let space = line_space(&[0.0, 1.0, 2.0]).unwrap();
        let mu = DiscreteMeasure::dirac(3, 1);
        let mc = MeasureCurve::explicit(space.clone(), dyadic_grid(3), vec![mu; 9]).unwrap();
        let lift = build_lift(&mc, 3).unwrap();
        assert_eq!(lift.atoms(), &[LiftAtom { curve: StepCurve::constant(1), weight: 1.0 }]);
        assert_eq!(lift_variation(&lift, &space).total, 0.0);
        assert_eq!(check_marginals(&lift, &mc), 0.0);
    }

    #[test]
    fn linear_level_two_has_four_quarter_atoms() {
        let lift = build_lift(&linear01(dyadic_grid(2)), 2).unwrap();
        let mut times: Vec<f64> = lift
            .atoms()
            .iter()
            .map(|a| {
                assert_eq!(a.curve.values(), &[0, 1]);
                assert!((a.weight - 0.25).abs() < 1e-15);
                a.curve.jump_times()[0]
            })
            .collect();
        times.sort_by(f64::total_cmp);
        assert_eq!(times, vec![0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn linear_lift_variation_is_one() {
        for n in 1..=8 {
            let mc = linear01(dyadic_grid(n));
            let lift = build_lift(&mc, n).unwrap();
            let space = mc.space();
            assert!((lift_variation(&lift, space).total - 1.0).abs() < 1e-12);
            assert!(check_marginals(&lift, &mc) < 1e-12);
            let r = geodesic_lift_check(&lift, &mc, 1e-9).unwrap();
            assert!(r.passed && r.fraction == 1.0, "{r:?}");
            assert!((r.max_jump_mass - 1.0 / (1u64 << n) as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn dropped_atom_breaks_marginals() {
        let mc = linear01(dyadic_grid(2));
        let lift = build_lift(&mc, 2).unwrap();
        let wrong = Lift::normalized(lift.atoms()[1..].to_vec(), 0.0).unwrap();
        assert!(check_marginals(&wrong, &mc) > 0.1);
        let r = check_superposition_bound(&wrong, &mc, &dyadic_intervals(2), true).unwrap();
        assert!(!r.certified && !r.passed);
    }

    #[test]
    fn backtracking_lift_is_not_geodesic() {
        let mc = backtrack();
        let lift = build_lift(&mc, 2).unwrap();
        let r = geodesic_lift_check(&lift, &mc, 1e-9).unwrap();
        assert_eq!(r.fraction, 0.0);
        assert!((lift_variation(&lift, mc.space()).total - 2.0).abs() < 1e-12);
    }

    #[test]
    fn superposition_equality_and_adversarial_slack() {
        let mc = linear01(dyadic_grid(3));
        let lift = build_lift(&mc, 3).unwrap();
        let r = check_superposition_bound(&lift, &mc, &dyadic_intervals(3), true).unwrap();
        assert!(r.passed, "{r:?}");
        assert!(r.equality_gap.unwrap().abs() < 1e-12);

        let bad = adversarial_lift(&mc, 3, 4).unwrap();
        assert!(check_marginals(&bad, &mc) < 1e-12);
        let r = check_superposition_bound(&bad, &mc, &dyadic_intervals(3), false).unwrap();
        assert!(r.passed);
        let r = check_superposition_bound(&bad, &mc, &dyadic_intervals(3), true).unwrap();
        assert!(!r.passed);
        assert!(r.equality_gap.unwrap() > 1e-3);
        let w = r.witness.unwrap();
        assert_eq!((w.a, w.b), (0.5, 0.625));
    }

    #[test]
    fn shuffle_keeps_marginals_and_raises_cost() {
        let space = line_space(&[0.0, 1.0, 3.0]).unwrap();
        let c = Coupling::from_entries(3, [(0, 0, 0.3), (1, 2, 0.2), (2, 2, 0.5)]).unwrap();
        let s = shuffle_coupling(&c, &space).unwrap();
        let (r0, c0) = (c.row_sums(), c.col_sums());
        for (a, b) in s.row_sums().iter().zip(&r0).chain(s.col_sums().iter().zip(&c0)) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(s.cost(&space) > c.cost(&space) + 0.1);
    }

    #[test]
    fn map_lift_pushes_forward_to_linear_interpolation() {
        let space = line_space(&[-2.0, -1.5, -1.0, 1.0, 1.5, 2.0]).unwrap();
        let mu0 = DiscreteMeasure::uniform_on(6, &[0, 1, 2]).unwrap();
        let mu1 = DiscreteMeasure::uniform_on(6, &[3, 4, 5]).unwrap();
        let mc = MeasureCurve::from_generator(Generator::Linear { mu0: mu0.clone(), mu1 }, Some(space.clone()), dyadic_grid(3))
            .unwrap();
        let mono = map_lift(&mu0, &[3, 4, 5, 3, 4, 5], 3).unwrap();
        let rev = map_lift(&mu0, &[5, 4, 3, 3, 4, 5], 3).unwrap();
        assert!(!mono.same_atoms(&rev, 1e-12));
        for l in [&mono, &rev] {
            assert!(check_marginals(l, &mc) < 1e-12);
            assert!((lift_variation(l, &space).total - 3.0).abs() < 1e-12);
        }
        let built = build_lift(&mc, 3).unwrap();
        assert!((lift_variation(&built, &space).total - 3.0).abs() < 1e-12);
    }

    #[test]
    fn canonical_periodic_lift_matches_curve() {
        let sigma = PeriodicSigma::cantor(3).unwrap();
        let lift = canonical_lift(&sigma).unwrap();
        let mc = MeasureCurve::from_generator(Generator::PeriodicSigma(sigma), None, uniform_grid(27)).unwrap();
        assert!(check_marginals(&lift, &mc) < 1e-12);
        let r = geodesic_lift_check(&lift, &mc, 1e-9).unwrap();
        assert!(r.passed, "{r:?}");
        assert!((lift_variation(&lift, mc.space()).total - curve_variation(&mc).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn slice_jump_balance() {
        let g = Generator::Slice2d { eps: 0.25, y: 0.6, cells: 8 };
        let mc = MeasureCurve::from_generator(g, None, uniform_grid(5)).unwrap();
        let profile = decompose_variation(&mc, 6).unwrap();
        let lift = build_lift(&mc, 6).unwrap();
        let jb = jump_balance(&lift, mc.space(), &profile, 0.6, 1.0 / 64.0).unwrap();
        assert!((jb.lhs - 0.375).abs() < 1e-9 && (jb.rhs - 0.375).abs() < 1e-9, "{jb:?}");
        for a in lift.atoms() {
            assert!(a.curve.n_jumps() <= 1);
        }
    }

    #[test]
    fn quantile_gluing_gives_the_same_identities() {
        let sigma = PeriodicSigma::cantor(3).unwrap();
        let mc = MeasureCurve::from_generator(Generator::PeriodicSigma(sigma), None, dyadic_grid(5)).unwrap();
        let p = build_lift_with(&mc, Gluing::Proportional).unwrap();
        let q = build_lift_with(&mc, Gluing::Quantile).unwrap();
        assert!(q.len() < p.len());
        let var = curve_variation(&mc).unwrap();
        for l in [&p, &q] {
            assert!(check_marginals(l, &mc) < 1e-12);
            assert!((lift_variation(l, mc.space()).total - var).abs() < 1e-12);
        }
    }

    #[test]
    fn lift_json_round_trip() {
        let lift = build_lift(&linear01(dyadic_grid(2)), 2).unwrap();
        let s = serde_json::to_string(&lift).unwrap();
        let back: Lift = serde_json::from_str(&s).unwrap();
        assert!(back.same_atoms(&lift, 0.0));
    }
}
