//! Discrete current equation.
//!
//! On a grid step `[t_i, t_i + h]` a velocity field assigns to each point
//! `x` with `mu(x) > 0` a nonnegative measure `v^x` on the other points.
//! The pair `(mu, v)` satisfies the current equation when
//!
//! ```text
//! (mu_{i+1}(x) - mu_i(x)) / h = sum_y v^y(x) mu_i(y) - mu_i(x) sum_y v^x(y)
//! ```
//!
//! at every point. Fields extracted from a lift satisfy it exactly.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::lift::{Lift, MARGINAL_TOL};
use crate::space::{DiscreteMeasure, MetricSpace};
use crate::transport::{w1_distance, Coupling};
use crate::wcurves::MeasureCurve;

/// Tolerance on the discrete mass balance.
pub const RESIDUAL_TOL: f64 = 1e-9;

/// Velocity field on one grid step, off-diagonal entries only.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepVelocity {
    pub step: usize,
    pub t: f64,
    pub h: f64,
    /// `mu_{t_i}` the field is defined against.
    pub mu: Vec<f64>,
    /// `(x, y) -> v^x(y)` for `x != y`; a list of `{x, y, v}` in JSON.
    #[serde(serialize_with = "entries_as_list")]
    pub entries: BTreeMap<(usize, usize), f64>,
}

#[derive(Serialize)]
struct Rate {
    x: usize,
    y: usize,
    v: f64,
}

fn entries_as_list<S: Serializer>(entries: &BTreeMap<(usize, usize), f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(entries.iter().map(|(&(x, y), &v)| Rate { x, y, v }))
}

impl StepVelocity {
    /// `v^x(y) = c(x, y) / (h mu(x))` off the diagonal.
    pub fn from_coupling(step: usize, t: f64, h: f64, c: &Coupling) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::input(format!("step length {h} must be positive")));
        }
        let mu = c.row_sums();
        let entries = c
            .iter()
            .filter(|&(x, y, m)| x != y && m > 0.0 && mu[x] > 0.0)
            .map(|(x, y, m)| ((x, y), m / (h * mu[x])))
            .collect();
        Ok(StepVelocity { step, t, h, mu, entries })
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.entries.get(&(x, y)).copied().unwrap_or(0.0)
    }

    /// `sum_{x,y} d(x, y) v^x(y) mu(x)`.
    pub fn action(&self, space: &MetricSpace) -> f64 {
        self.entries.iter().map(|(&(x, y), v)| space.d(x, y) * v * self.mu[x]).sum()
    }

    /// Mass rate carried on pairs outside `edges` (unordered).
    pub fn off_edge_rate(&self, edges: &BTreeSet<(usize, usize)>) -> f64 {
        self.entries
            .iter()
            .filter(|(&(x, y), _)| !edges.contains(&(x.min(y), x.max(y))))
            .map(|(&(x, _), v)| v * self.mu[x])
            .sum()
    }
}

/// The per-step fields of a whole curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VelocityField {
    pub steps: Vec<StepVelocity>,
}

fn check_step(mc: &MeasureCurve, i: usize) -> Result<(f64, f64)> {
    let g = mc.grid();
    if i + 1 >= g.len() {
        return Err(Error::input(format!("step {i} out of range for {} grid times", g.len())));
    }
    Ok((g[i], g[i + 1] - g[i]))
}

/// Disintegrate the lift at `t_i`: the share of atoms at `x` that sit at
/// `y != x` at `t_{i+1}`, per unit time.
pub fn extract_velocity(lift: &Lift, mc: &MeasureCurve, i: usize) -> Result<StepVelocity> {
    let (t, h) = check_step(mc, i)?;
    let n = mc.space().len();
    lift.check_space(mc.space())?;
    for (k, s) in [(i, t), (i + 1, mc.grid()[i + 1])] {
        let m = lift.marginal_at(s, n);
        let err = 0.5 * m.iter().zip(mc.measures()[k].weights()).map(|(a, b)| (a - b).abs()).sum::<f64>();
        if err > MARGINAL_TOL {
            return Err(Error::input(format!(
                "lift marginal at t = {s} differs from the curve by {err:e}; refusing to extract"
            )));
        }
    }
    let joint = lift.joint(t, t + h, n)?;
    let mu = mc.measures()[i].weights();
    let entries = joint
        .iter()
        .filter(|&(x, y, m)| x != y && m > 0.0 && mu[x] > 0.0)
        .map(|(x, y, m)| ((x, y), m / (h * mu[x])))
        .collect();
    Ok(StepVelocity { step: i, t, h, mu: mu.to_vec(), entries })
}

/// Fields for every step, extracted in parallel.
pub fn extract_all(lift: &Lift, mc: &MeasureCurve) -> Result<VelocityField> {
    let steps = (0..mc.grid().len() - 1)
        .into_par_iter()
        .map(|i| extract_velocity(lift, mc, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(VelocityField { steps })
}

/// Left side minus right side of the current equation at every point.
pub fn current_residual(mc: &MeasureCurve, v: &StepVelocity) -> Result<Vec<f64>> {
    let i = v.step;
    let (_, h) = check_step(mc, i)?;
    let before = mc.measures()[i].weights();
    let after = mc.measures()[i + 1].weights();
    let mut inflow = vec![0.0; before.len()];
    let mut outflow = vec![0.0; before.len()];
    for (&(x, y), &rate) in &v.entries {
        inflow[y] += rate * before[x];
        outflow[x] += rate * before[x];
    }
    Ok((0..before.len())
        .map(|x| (after[x] - before[x]) / h - (inflow[x] - outflow[x]))
        .collect())
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().map(|r| r.abs()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpeedIdentity {
    /// `W1(mu_{t_i}, mu_{t_{i+1}}) / h`.
    pub lhs: f64,
    /// `sum_{x,y} d(x, y) v^x(y) mu_{t_i}(x)`.
    pub rhs: f64,
}

pub fn speed_identity(mc: &MeasureCurve, v: &StepVelocity) -> Result<SpeedIdentity> {
    let i = v.step;
    let (_, h) = check_step(mc, i)?;
    let space = mc.space();
    let lhs = w1_distance(space, &mc.measures()[i], &mc.measures()[i + 1])? / h;
    let rhs = v
        .entries
        .iter()
        .map(|(&(x, y), rate)| space.d(x, y) * rate * mc.measures()[i].get(x))
        .sum();
    Ok(SpeedIdentity { lhs, rhs })
}

/// A curve together with a field on each of its steps.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub name: String,
    pub curve: MeasureCurve,
    pub field: VelocityField,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateCost {
    pub name: String,
    /// `sum_i h sum_{x,y} d(x, y) v_i^x(y) mu_i(x)`.
    pub cost: f64,
    pub max_residual: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenamouBrenierReport {
    pub w1: f64,
    pub candidates: Vec<CandidateCost>,
    pub minimum: Option<f64>,
    /// Accepted candidates whose cost equals `w1` within the tolerance.
    pub attained_by: Vec<String>,
    pub tolerance: f64,
    pub passed: bool,
}

/// Compare the action of each admissible candidate with `W1(mu0, mu1)`.
pub fn benamou_brenier_compare(
    space: &MetricSpace,
    mu0: &DiscreteMeasure,
    mu1: &DiscreteMeasure,
    candidates: &[Candidate],
    tol: f64,
) -> Result<BenamouBrenierReport> {
    let w1 = w1_distance(space, mu0, mu1)?;
    let mut costs = Vec::with_capacity(candidates.len());
    for c in candidates {
        let ends = c.curve.first().tv_distance(mu0).max(c.curve.last().tv_distance(mu1));
        if c.field.steps.len() + 1 != c.curve.grid().len() {
            return Err(Error::structural(format!("candidate {} has a field for the wrong number of steps", c.name)));
        }
        let mut max_residual: f64 = 0.0;
        let mut cost = 0.0;
        for v in &c.field.steps {
            max_residual = max_residual.max(max_abs(&current_residual(&c.curve, v)?));
            cost += v.h * speed_identity(&c.curve, v)?.rhs;
        }
        costs.push(CandidateCost {
            name: c.name.clone(),
            cost,
            max_residual,
            accepted: max_residual <= tol && ends <= MARGINAL_TOL,
        });
    }
    let minimum = costs.iter().filter(|c| c.accepted).map(|c| c.cost).min_by(f64::total_cmp);
    let attained_by = costs
        .iter()
        .filter(|c| c.accepted && (c.cost - w1).abs() <= tol)
        .map(|c| c.name.clone())
        .collect::<Vec<_>>();
    let passed = minimum.is_some_and(|m| m >= w1 - tol) && !attained_by.is_empty();
    Ok(BenamouBrenierReport { w1, candidates: costs, minimum, attained_by, tolerance: tol, passed })
}

/// A random probability vector on `n` points with at least one atom.
pub fn random_measure<R: Rng>(rng: &mut R, n: usize) -> DiscreteMeasure {
    loop {
        let w: Vec<f64> = (0..n)
            .map(|_| if rng.gen_bool(0.7) { rng.gen_range(1..=20) as f64 } else { 0.0 })
            .collect();
        if let Ok(m) = DiscreteMeasure::from_masses(w) {
            return m;
        }
    }
}

/// A random feasible coupling of `mu` and `nu`: a north-west corner
/// solution under random row and column orders, mixed with the product
/// coupling.
pub fn random_coupling<R: Rng>(rng: &mut R, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<Coupling> {
    let n = mu.len();
    let mut rows: Vec<usize> = mu.support().collect();
    let mut cols: Vec<usize> = nu.support().collect();
    rows.shuffle(rng);
    cols.shuffle(rng);
    let mut a: Vec<f64> = rows.iter().map(|&x| mu.get(x)).collect();
    let mut b: Vec<f64> = cols.iter().map(|&y| nu.get(y)).collect();
    let mut corner = Vec::new();
    let (mut r, mut c) = (0, 0);
    while r < rows.len() && c < cols.len() {
        let m = a[r].min(b[c]);
        if m > 0.0 {
            corner.push((rows[r], cols[c], m));
        }
        a[r] -= m;
        b[c] -= m;
        if a[r] <= b[c] {
            r += 1;
        } else {
            c += 1;
        }
    }
    let s: f64 = rng.gen_range(0.0..=1.0);
    let product = Coupling::product(mu, nu);
    let entries = corner
        .into_iter()
        .map(|(x, y, m)| (x, y, s * m))
        .chain(product.iter().map(|(x, y, m)| (x, y, (1.0 - s) * m)));
    Coupling::from_entries(n, entries)
}

/// A random metric space: `n` points in the unit square.
pub fn random_plane_space<R: Rng>(rng: &mut R, n: usize) -> Result<MetricSpace> {
    loop {
        let coords: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)]).collect();
        let labels = (0..n).map(|i| format!("p{i}")).collect();
        match MetricSpace::from_coords(labels, coords) {
            Ok(s) => return Ok(s),
            Err(Error::Input(_)) => continue,
            Err(e) => return Err(e),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lift::{adversarial_lift, build_lift};
    use crate::space::line_space;
    use crate::wcurves::{dyadic_grid, Generator};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn linear01(level: u32) -> MeasureCurve {
        let space = line_space(&[0.0, 1.0]).unwrap();
        let g = Generator::Linear { mu0: DiscreteMeasure::dirac(2, 0), mu1: DiscreteMeasure::dirac(2, 1) };
        MeasureCurve::from_generator(g, Some(space), dyadic_grid(level)).unwrap()
    }

    #[test]
    fn constant_lift_has_zero_field() {
        let space = line_space(&[0.0, 1.0]).unwrap();
        let mc = MeasureCurve::explicit(space, dyadic_grid(2), vec![DiscreteMeasure::dirac(2, 1); 5]).unwrap();
        let lift = build_lift(&mc, 2).unwrap();
        for i in 0..4 {
            let v = extract_velocity(&lift, &mc, i).unwrap();
            assert!(v.entries.is_empty());
            assert_eq!(max_abs(&current_residual(&mc, &v).unwrap()), 0.0);
            let s = speed_identity(&mc, &v).unwrap();
            assert_eq!((s.lhs, s.rhs), (0.0, 0.0));
        }
    }

    #[test]
    fn linear_field_is_one_over_remaining_mass() {
        let n = 4;
        let mc = linear01(n);
        let lift = build_lift(&mc, n).unwrap();
        for i in 0..(1 << n) {
            let v = extract_velocity(&lift, &mc, i).unwrap();
            let t = mc.grid()[i];
            assert!((v.get(0, 1) - 1.0 / (1.0 - t)).abs() < 1e-9, "step {i}: {}", v.get(0, 1));
            assert!(max_abs(&current_residual(&mc, &v).unwrap()) < 1e-9);
            let s = speed_identity(&mc, &v).unwrap();
            assert!((s.lhs - 1.0).abs() < 1e-9 && (s.rhs - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn perturbation_shows_at_two_points() {
        let mc = linear01(2);
        let lift = build_lift(&mc, 2).unwrap();
        let mut v = extract_velocity(&lift, &mc, 1).unwrap();
        *v.entries.get_mut(&(0, 1)).unwrap() += 1.0;
        let r = current_residual(&mc, &v).unwrap();
        let mu0 = mc.measures()[1].get(0);
        assert!((r[0] - mu0).abs() < 1e-12 && (r[1] + mu0).abs() < 1e-12);
        assert!(r.iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn refuses_mismatched_lift() {
        let mc = linear01(2);
        let other = linear01(3);
        let lift = build_lift(&other, 3).unwrap();
        let shifted = crate::lift::Lift::new(vec![crate::lift::LiftAtom {
            curve: crate::curves::StepCurve::constant(0),
            weight: 1.0,
        }])
        .unwrap();
        assert!(extract_velocity(&lift, &mc, 0).is_ok());
        assert!(extract_velocity(&shifted, &mc, 1).is_err());
    }

    #[test]
    fn adversarial_field_costs_more() {
        let mc = linear01(3);
        let bad = adversarial_lift(&mc, 3, 4).unwrap();
        let v = extract_velocity(&bad, &mc, 4).unwrap();
        assert!(max_abs(&current_residual(&mc, &v).unwrap()) < 1e-9);
        let s = speed_identity(&mc, &v).unwrap();
        assert!(s.rhs > s.lhs + 1e-3);
    }

    #[test]
    fn benamou_brenier_minimum_is_w1() {
        let mc = linear01(3);
        let good = extract_all(&build_lift(&mc, 3).unwrap(), &mc).unwrap();
        let bad = extract_all(&adversarial_lift(&mc, 3, 2).unwrap(), &mc).unwrap();
        let cands = vec![
            Candidate { name: "optimal".into(), curve: mc.clone(), field: good },
            Candidate { name: "shuffled".into(), curve: mc.clone(), field: bad },
        ];
        let r = benamou_brenier_compare(mc.space(), mc.first(), mc.last(), &cands, 1e-8).unwrap();
        assert!(r.passed, "{r:?}");
        assert_eq!(r.attained_by, vec!["optimal".to_string()]);
        assert!(r.candidates[1].cost > 1.0 + 1e-3);
    }

    #[test]
    fn random_couplings_are_feasible_and_bounded_below() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let n = rng.gen_range(2..=8);
            let space = random_plane_space(&mut rng, n).unwrap();
            let mu = random_measure(&mut rng, n);
            let nu = random_measure(&mut rng, n);
            let c = random_coupling(&mut rng, &mu, &nu).unwrap();
            assert!(c.marginal_error(&mu, &nu) < 1e-12);
            let w = w1_distance(&space, &mu, &nu).unwrap();
            assert!(w <= c.cost(&space) + 1e-12);
        }
    }

    #[test]
    fn field_serialises_as_a_list() {
        let c = Coupling::from_entries(2, [(0, 1, 0.5), (1, 1, 0.5)]).unwrap();
        let v = StepVelocity::from_coupling(0, 0.0, 0.5, &c).unwrap();
        let json = serde_json::to_value(&v).unwrap();
        assert_eq!(json["entries"], serde_json::json!([{"x": 0, "y": 1, "v": 2.0}]));
    }

    #[test]
    fn edge_filter_counts_off_edge_mass() {
        let c = Coupling::from_entries(3, [(0, 1, 0.25), (0, 2, 0.25), (1, 1, 0.5)]).unwrap();
        let v = StepVelocity::from_coupling(0, 0.0, 0.5, &c).unwrap();
        let edges: BTreeSet<(usize, usize)> = [(0, 1)].into_iter().collect();
        assert!((v.off_edge_rate(&edges) - 0.5).abs() < 1e-15);
    }
}
