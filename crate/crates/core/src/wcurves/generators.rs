//! Exact generators for the example curves of measures.
//!
//! Each generator evaluates `mu_t` at any time, so a curve built from it
//! can be refined to arbitrarily fine grids and restricted back without
//! changing any sample.

use serde::{Deserialize, Serialize};

use crate::curves::StepCurve;
use crate::error::{Error, Result};
use crate::space::{line_space, DiscreteMeasure, MetricSpace};

/// Slack used when locating `t * G` on an integer grid.
const GRID_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Generator {
    /// `(1 - t) mu0 + t mu1`.
    Linear { mu0: DiscreteMeasure, mu1: DiscreteMeasure },
    /// `(1 - c(t)) delta_0 + c(t) delta_1` with the depth-`depth`
    /// piecewise-linear Cantor approximant `c`, on the two-point line `{0, 1}`.
    Cantor { depth: u32 },
    /// Horizontal slice of the two-dimensional strip example, discretised on
    /// `cells` cell midpoints of `[0, 1]`.
    Slice2d { eps: f64, y: f64, cells: usize },
    /// Periodic-translation geodesic between `delta_0` and `delta_1`.
    PeriodicSigma(PeriodicSigma),
    /// Linear interpolation between consecutive knots.
    Piecewise { knots: Vec<Knot> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Knot {
    pub t: f64,
    pub measure: DiscreteMeasure,
}

impl Generator {
    /// The space this generator lives on, when it defines its own.
    pub fn own_space(&self) -> Result<Option<MetricSpace>> {
        match self {
            Generator::Cantor { .. } => Ok(Some(line_space(&[0.0, 1.0])?)),
            Generator::Slice2d { cells, .. } => {
                let xs: Vec<f64> = (0..*cells).map(|i| (i as f64 + 0.5) / *cells as f64).collect();
                Ok(Some(line_space(&xs)?))
            }
            Generator::PeriodicSigma(p) => Ok(Some(p.space()?)),
            Generator::Linear { .. } | Generator::Piecewise { .. } => Ok(None),
        }
    }

    pub fn validate(&self, space: &MetricSpace) -> Result<()> {
        let n = space.len();
        let check = |m: &DiscreteMeasure| {
            if m.len() == n {
                Ok(())
            } else {
                Err(Error::structural(format!("generator measure has {} weights for {n} points", m.len())))
            }
        };
        match self {
            Generator::Linear { mu0, mu1 } => {
                check(mu0)?;
                check(mu1)
            }
            Generator::Cantor { depth } => {
                if *depth > 30 {
                    return Err(Error::input(format!("cantor depth {depth} too large")));
                }
                Ok(())
            }
            Generator::Slice2d { eps, y, cells } => {
                if !(*eps > 0.0 && *eps < 0.5) {
                    return Err(Error::input(format!("eps = {eps} must lie in (0, 1/2)")));
                }
                if !(0.0..=1.0).contains(y) {
                    return Err(Error::input(format!("y = {y} must lie in [0, 1]")));
                }
                let strip = eps * *cells as f64;
                if *cells == 0 || (strip - strip.round()).abs() > 1e-9 || strip.round() < 1.0 {
                    return Err(Error::input(format!("eps * cells = {strip} must be a positive integer")));
                }
                if n != *cells {
                    return Err(Error::structural("slice2d space does not match its cell count"));
                }
                Ok(())
            }
            Generator::PeriodicSigma(p) => {
                if n != p.total() as usize + 1 {
                    return Err(Error::structural("periodic sigma space does not match its total count"));
                }
                Ok(())
            }
            Generator::Piecewise { knots } => {
                if knots.len() < 2 {
                    return Err(Error::input("piecewise curve needs at least two knots"));
                }
                if knots[0].t != 0.0 || knots.last().unwrap().t != 1.0 {
                    return Err(Error::input("piecewise knots must start at 0 and end at 1"));
                }
                if knots.windows(2).any(|w| w[1].t <= w[0].t) {
                    return Err(Error::input("piecewise knot times must be strictly increasing"));
                }
                knots.iter().try_for_each(|k| check(&k.measure))
            }
        }
    }

    pub fn eval(&self, t: f64) -> Result<DiscreteMeasure> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::input(format!("time {t} outside [0, 1]")));
        }
        match self {
            Generator::Linear { mu0, mu1 } => DiscreteMeasure::mix(mu0, mu1, t),
            Generator::Cantor { depth } => {
                let c = cantor(t, *depth);
                DiscreteMeasure::new(vec![1.0 - c, c])
            }
            Generator::Slice2d { eps, y, cells } => Ok(slice2d_measure(*eps, *cells, t > *y)),
            Generator::PeriodicSigma(p) => Ok(p.measure_at(t)),
            Generator::Piecewise { knots } => {
                let k = knots.partition_point(|k| k.t <= t).clamp(1, knots.len() - 1);
                let (a, b) = (&knots[k - 1], &knots[k]);
                let s = ((t - a.t) / (b.t - a.t)).clamp(0.0, 1.0);
                DiscreteMeasure::mix(&a.measure, &b.measure, s)
            }
        }
    }
}

/// Depth-`depth` piecewise-linear approximant of the Cantor function:
/// `c_0(t) = t`, and `c_k` is `c_{k-1}(3t)/2` on `[0, 1/3]`, `1/2` on the
/// middle third and `1/2 + c_{k-1}(3t - 2)/2` on `[2/3, 1]`.
pub fn cantor(t: f64, depth: u32) -> f64 {
    let mut t = t.clamp(0.0, 1.0);
    let mut offset = 0.0;
    let mut scale = 1.0;
    for _ in 0..depth {
        if t <= 1.0 / 3.0 {
            t = (3.0 * t).min(1.0);
        } else if t < 2.0 / 3.0 {
            return offset + 0.5 * scale;
        } else {
            offset += 0.5 * scale;
            t = (3.0 * t - 2.0).max(0.0);
        }
        scale *= 0.5;
    }
    offset + scale * t
}

fn slice2d_measure(eps: f64, cells: usize, after: bool) -> DiscreteMeasure {
    let strip = (eps * cells as f64).round() as usize;
    let mut w = vec![0.5 / cells as f64; cells];
    let range = if after { cells - strip..cells } else { 0..strip };
    for i in range {
        w[i] += 0.5 / strip as f64;
    }
    DiscreteMeasure::new(w).expect("slice measure is a probability vector")
}

/// A probability `sigma0` on the grid `{j / G}` of `[0, 1)` with integer
/// weights `counts[j] / Q`, extended periodically to the line.
///
/// Curves `gamma_a(t) = sigma((a/G, a/G + t])` for `a = 0..G` (equal
/// weights) push forward to a constant-speed geodesic from `delta_0` to
/// `delta_1`. Values are multiples of `1/Q`, so the curve lives on the
/// line space `{k / Q : k = 0..=Q}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicSigma {
    pub counts: Vec<u64>,
}

impl PeriodicSigma {
    pub fn new(counts: Vec<u64>) -> Result<Self> {
        if counts.is_empty() || counts.iter().sum::<u64>() == 0 {
            return Err(Error::input("sigma0 needs a nonempty grid with positive total count"));
        }
        Ok(PeriodicSigma { counts })
    }

    /// Discrete uniform measure on `grid` points.
    pub fn uniform(grid: usize) -> Result<Self> {
        Self::new(vec![1; grid])
    }

    /// Unit mass at the origin, with offsets sampled on `grid` points.
    pub fn dirac(grid: usize) -> Result<Self> {
        if grid == 0 {
            return Err(Error::input("sigma0 grid must have at least one point"));
        }
        let mut counts = vec![0; grid];
        counts[0] = 1;
        Self::new(counts)
    }

    /// Depth-`depth` Cantor–Lebesgue measure: mass `2^-depth` at the left
    /// end of each surviving interval, on the grid of `3^depth` points.
    pub fn cantor(depth: u32) -> Result<Self> {
        if depth > 12 {
            return Err(Error::input(format!("cantor depth {depth} too large for a 3^depth grid")));
        }
        let g = 3usize.pow(depth);
        let mut counts = vec![0u64; g];
        for (j, c) in counts.iter_mut().enumerate() {
            // left endpoints of surviving intervals: base-3 digits in {0, 2}
            let mut x = j;
            let mut ok = true;
            for _ in 0..depth {
                if x % 3 == 1 {
                    ok = false;
                    break;
                }
                x /= 3;
            }
            if ok {
                *c = 1;
            }
        }
        Self::new(counts)
    }

    pub fn grid(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn space(&self) -> Result<MetricSpace> {
        let q = self.total();
        let xs: Vec<f64> = (0..=q).map(|k| k as f64 / q as f64).collect();
        line_space(&xs)
    }

    /// `p[n] = sum_{j = 1..=n} counts[j mod G]` for `n <= 2G`.
    fn prefix(&self) -> Vec<u64> {
        let g = self.grid();
        let mut p = vec![0u64; 2 * g + 1];
        for n in 1..=2 * g {
            p[n] = p[n - 1] + self.counts[n % g];
        }
        p
    }

    /// Index of `gamma_a(t)` in the value space.
    fn value_index(&self, prefix: &[u64], a: usize, t: f64) -> usize {
        let g = self.grid();
        let reach = ((a as f64 + t * g as f64) + GRID_SLACK).floor() as usize;
        (prefix[reach.min(a + g)] - prefix[a]) as usize
    }

    pub fn measure_at(&self, t: f64) -> DiscreteMeasure {
        let g = self.grid();
        let prefix = self.prefix();
        let mut w = vec![0.0; self.total() as usize + 1];
        for a in 0..g {
            w[self.value_index(&prefix, a, t)] += 1.0;
        }
        let w = w.into_iter().map(|c| c / g as f64).collect();
        DiscreteMeasure::new(w).expect("counts normalise to a probability vector")
    }

    /// The translation lift: one curve per grid offset `a / G`, weight `1/G`.
    pub fn lift_curves(&self) -> Vec<(StepCurve, f64)> {
        let g = self.grid();
        let prefix = self.prefix();
        (0..g)
            .map(|a| {
                let steps = (a + 1..=a + g).filter(|j| self.counts[j % g] > 0).map(|j| {
                    let t = (j - a) as f64 / g as f64;
                    (t, (prefix[j] - prefix[a]) as usize)
                });
                let curve = StepCurve::normalize(0, steps).expect("translation curves are valid step curves");
                (curve, 1.0 / g as f64)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cantor_values() {
        for depth in 0..10 {
            assert_eq!(cantor(0.0, depth), 0.0);
            assert_eq!(cantor(1.0, depth), 1.0);
        }
        for depth in 1..10 {
            assert_eq!(cantor(1.0 / 3.0, depth), 0.5);
            assert_eq!(cantor(0.5, depth), 0.5);
            assert_eq!(cantor(2.0 / 3.0, depth), 0.5);
        }
        assert_eq!(cantor(1.0 / 9.0, 3), 0.25);
        assert_eq!(cantor(0.25, 0), 0.25);
    }

    #[test]
    fn cantor_matches_recursive_definition() {
        fn rec(t: f64, k: u32) -> f64 {
            if k == 0 {
                t
            } else if t <= 1.0 / 3.0 {
                0.5 * rec(3.0 * t, k - 1)
            } else if t < 2.0 / 3.0 {
                0.5
            } else {
                0.5 + 0.5 * rec(3.0 * t - 2.0, k - 1)
            }
        }
        for i in 0..=997 {
            let t = i as f64 / 997.0;
            for k in 0..7 {
                assert!((cantor(t, k) - rec(t, k)).abs() < 1e-12, "t = {t}, k = {k}");
            }
        }
    }

    #[test]
    fn cantor_measure_support() {
        let c = PeriodicSigma::cantor(2).unwrap();
        assert_eq!(c.counts, vec![1, 0, 1, 0, 0, 0, 1, 0, 1]);
        assert_eq!(c.total(), 4);
    }

    #[test]
    fn periodic_dirac_is_linear_interpolation() {
        let p = PeriodicSigma::dirac(8).unwrap();
        for m in 0..=8 {
            let t = m as f64 / 8.0;
            assert_eq!(p.measure_at(t).weights(), &[1.0 - t, t]);
        }
        // offset a jumps once, at t = (8 - a) / 8
        let lift = p.lift_curves();
        assert_eq!(lift.len(), 8);
        assert_eq!(lift[0].0.jump_times(), &[1.0]);
        assert_eq!(lift[3].0.jump_times(), &[0.625]);
        // a single offset only sees the jump at t = 1
        let one = PeriodicSigma::dirac(1).unwrap();
        assert_eq!(one.measure_at(0.5).weights(), &[1.0, 0.0]);
    }

    #[test]
    fn periodic_uniform_moves_a_point_mass() {
        let p = PeriodicSigma::uniform(4).unwrap();
        for m in 0..=4 {
            let mu = p.measure_at(m as f64 / 4.0);
            assert_eq!(mu.get(m), 1.0, "m = {m}");
        }
        let mu = p.measure_at(0.3);
        assert_eq!(mu.get(1), 1.0);
    }

    #[test]
    fn lift_curves_reproduce_measures() {
        let p = PeriodicSigma::cantor(2).unwrap();
        let lift = p.lift_curves();
        for m in 0..=9 {
            let t = m as f64 / 9.0;
            let mu = p.measure_at(t);
            let mut w = vec![0.0; mu.len()];
            for (c, wt) in &lift {
                w[c.value_at(t)] += wt;
            }
            for (a, b) in w.iter().zip(mu.weights()) {
                assert!((a - b).abs() < 1e-15, "t = {t}");
            }
        }
        for (c, _) in &lift {
            assert_eq!(c.initial(), 0);
            assert_eq!(c.terminal(), 4);
        }
    }

    #[test]
    fn slice_measures() {
        let g = Generator::Slice2d { eps: 0.25, y: 0.6, cells: 8 };
        let space = g.own_space().unwrap().unwrap();
        g.validate(&space).unwrap();
        let before = g.eval(0.6).unwrap();
        // 1/(2 eps) on [0, eps] plus 1/2 everywhere
        assert!((before.get(0) - (0.5 / 8.0 + 0.25)).abs() < 1e-15);
        assert!((before.get(7) - 0.5 / 8.0).abs() < 1e-15);
        let after = g.eval(0.61).unwrap();
        assert!((after.get(7) - (0.5 / 8.0 + 0.25)).abs() < 1e-15);
        assert!(Generator::Slice2d { eps: 0.3, y: 0.6, cells: 8 }.validate(&space).is_err());
    }
}
