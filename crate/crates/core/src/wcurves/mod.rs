//! Curves of probability measures sampled on a time grid.
//!
//! A [`MeasureCurve`] stores samples `mu_{t_i}` and, when it comes from a
//! [`Generator`], can be evaluated at any other time. Variation is measured
//! with exact `W1` increments between consecutive samples.

mod generators;

use rayon::prelude::*;
use serde::Serialize;

pub use generators::{cantor, Generator, Knot, PeriodicSigma};

use crate::error::{Error, Result};
use crate::space::{DiscreteMeasure, MetricSpace};
use crate::transport::w1_distance;

/// Relative tolerance for "same step size" on uniform grids.
const GRID_TOL: f64 = 1e-12;

/// `{ k / cells : k = 0..=cells }`.
pub fn uniform_grid(cells: usize) -> Vec<f64> {
    (0..=cells).map(|k| k as f64 / cells as f64).collect()
}

/// Dyadic grid `{ i / 2^level }`.
pub fn dyadic_grid(level: u32) -> Vec<f64> {
    uniform_grid(1usize << level)
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 2 {
        return Err(Error::input("time grid needs at least two points"));
    }
    if grid[0] != 0.0 || *grid.last().unwrap() != 1.0 {
        return Err(Error::input("time grid must start at 0 and end at 1"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::input("time grid must be strictly increasing"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasureCurve {
    space: MetricSpace,
    grid: Vec<f64>,
    measures: Vec<DiscreteMeasure>,
    generator: Option<Generator>,
}

impl MeasureCurve {
    pub fn explicit(space: MetricSpace, grid: Vec<f64>, measures: Vec<DiscreteMeasure>) -> Result<Self> {
        check_grid(&grid)?;
        if measures.len() != grid.len() {
            return Err(Error::structural(format!(
                "{} measures for {} grid times",
                measures.len(),
                grid.len()
            )));
        }
        if let Some(m) = measures.iter().find(|m| m.len() != space.len()) {
            return Err(Error::structural(format!(
                "measure with {} weights on a {}-point space",
                m.len(),
                space.len()
            )));
        }
        Ok(MeasureCurve { space, grid, measures, generator: None })
    }

    /// Sample a generator on `grid`. Generators that define their own space
    /// ignore `space`; the others require it.
    pub fn from_generator(generator: Generator, space: Option<MetricSpace>, grid: Vec<f64>) -> Result<Self> {
        check_grid(&grid)?;
        let space = match generator.own_space()? {
            Some(s) => s,
            None => space.ok_or_else(|| Error::input("this generator needs an explicit space"))?,
        };
        generator.validate(&space)?;
        let measures = grid.iter().map(|&t| generator.eval(t)).collect::<Result<Vec<_>>>()?;
        Ok(MeasureCurve { space, grid, measures, generator: Some(generator) })
    }

    pub fn space(&self) -> &MetricSpace {
        &self.space
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn measures(&self) -> &[DiscreteMeasure] {
        &self.measures
    }

    pub fn generator(&self) -> Option<&Generator> {
        self.generator.as_ref()
    }

    pub fn first(&self) -> &DiscreteMeasure {
        &self.measures[0]
    }

    pub fn last(&self) -> &DiscreteMeasure {
        self.measures.last().unwrap()
    }

    fn grid_index(&self, t: f64) -> Option<usize> {
        let k = self.grid.partition_point(|&s| s < t - GRID_TOL);
        (k < self.grid.len() && (self.grid[k] - t).abs() <= GRID_TOL).then_some(k)
    }

    /// `mu_t`, from the generator or from the stored sample at `t`.
    pub fn measure_at(&self, t: f64) -> Result<DiscreteMeasure> {
        if let Some(k) = self.grid_index(t) {
            return Ok(self.measures[k].clone());
        }
        match &self.generator {
            Some(g) => g.eval(t),
            None => Err(Error::unsupported(format!("time {t} is off the grid and the curve has no generator"))),
        }
    }

    /// Resample on another grid.
    pub fn resample(&self, grid: Vec<f64>) -> Result<Self> {
        check_grid(&grid)?;
        let measures = grid.iter().map(|&t| self.measure_at(t)).collect::<Result<Vec<_>>>()?;
        Ok(MeasureCurve { space: self.space.clone(), grid, measures, generator: self.generator.clone() })
    }

    /// Split every cell into `2^levels` equal pieces.
    pub fn refine(&self, levels: u32) -> Result<Self> {
        let parts = 1usize << levels;
        let mut grid = Vec::with_capacity((self.grid.len() - 1) * parts + 1);
        for w in self.grid.windows(2) {
            for k in 0..parts {
                grid.push(w[0] + (w[1] - w[0]) * k as f64 / parts as f64);
            }
        }
        grid.push(1.0);
        self.resample(grid)
    }

    pub fn is_uniform(&self) -> bool {
        let h = self.grid[1] - self.grid[0];
        self.grid.windows(2).all(|w| ((w[1] - w[0]) - h).abs() <= GRID_TOL * h.max(1.0))
    }
}

/// `W1(mu_{t_i}, mu_{t_{i+1}})` for every grid cell.
pub fn increments(mc: &MeasureCurve) -> Result<Vec<f64>> {
    mc.measures
        .par_windows(2)
        .map(|w| w1_distance(&mc.space, &w[0], &w[1]))
        .collect()
}

/// `sum_i W1(mu_{t_i}, mu_{t_{i+1}})`.
pub fn curve_variation(mc: &MeasureCurve) -> Result<f64> {
    Ok(increments(mc)?.iter().sum())
}

/// `W1(mu_t, mu_{t+h}) / |h|`.
pub fn metric_derivative(mc: &MeasureCurve, t: f64, h: f64) -> Result<f64> {
    if h == 0.0 || !(0.0..=1.0).contains(&t) || !(0.0..=1.0).contains(&(t + h)) {
        return Err(Error::input(format!("need t, t + h in [0, 1] and h != 0 (t = {t}, h = {h})")));
    }
    let a = mc.measure_at(t)?;
    let b = mc.measure_at(t + h)?;
    Ok(w1_distance(&mc.space, &a, &b)? / h.abs())
}

/// `|curve_variation - W1(mu_0, mu_1)| <= tol`.
pub fn is_bv_geodesic(mc: &MeasureCurve, tol: f64) -> Result<bool> {
    let var = curve_variation(mc)?;
    let direct = w1_distance(&mc.space, mc.first(), mc.last())?;
    Ok((var - direct).abs() <= tol)
}

/// Every increment equals `dt * W1(mu_0, mu_1)` and the curve is a geodesic.
pub fn is_constant_speed(mc: &MeasureCurve, tol: f64) -> Result<bool> {
    if !mc.is_uniform() {
        return Err(Error::unsupported("constant-speed check needs a uniform grid"));
    }
    let dt = mc.grid[1] - mc.grid[0];
    let direct = w1_distance(&mc.space, mc.first(), mc.last())?;
    let inc = increments(mc)?;
    let var: f64 = inc.iter().sum();
    Ok(inc.iter().all(|&d| (d - dt * direct).abs() <= tol) && (var - direct).abs() <= tol)
}

/// Halvings that must leave an increment unchanged before a cell is a jump.
pub const JUMP_HALVINGS: u32 = 5;

/// Relative stability threshold for jump and density detection.
pub const STABILITY_TOL: f64 = 1e-6;

/// Increments below this are treated as zero when classifying.
const NEGLIGIBLE: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AtomEstimate {
    /// The finest cell `[lo, hi]` that still carries the whole jump.
    pub lo: f64,
    pub hi: f64,
    pub mass: f64,
}

impl AtomEstimate {
    pub fn time(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

/// Finite-resolution split of the variation into jump, density and rest.
#[derive(Debug, Clone, Serialize)]
pub struct VariationProfile {
    pub grid: Vec<f64>,
    /// `W1` increment of every base grid cell.
    pub interval_masses: Vec<f64>,
    pub atom_estimates: Vec<AtomEstimate>,
    /// Density of the absolutely continuous part on each base cell.
    pub ac_estimate: Vec<f64>,
    /// Variation that is neither jump nor density (Cantor-type proxy).
    pub residual_estimate: f64,
    pub atom_mass: f64,
    pub ac_mass: f64,
    /// Variation on the base grid.
    pub base_variation: f64,
    /// Variation after `levels` halvings; atoms + ac + residual sum to this.
    pub refined_variation: f64,
    /// `refined_variation - base_variation`.
    pub tolerance: f64,
    pub levels: u32,
}

fn uniform_within(values: &[f64]) -> bool {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    if mean <= NEGLIGIBLE {
        return values.iter().all(|v| *v <= NEGLIGIBLE);
    }
    values.iter().all(|v| (v - mean).abs() <= STABILITY_TOL * mean)
}

/// Classify the variation of a generator-backed curve at `levels` halvings
/// of every base cell.
///
/// Cells are grouped in blocks of `2^5` finest cells. Within a block the
/// cell is followed down five halvings, always into the half with the
/// larger increment; if the increment never changes by more than
/// [`STABILITY_TOL`] relative, that finest cell carries a jump. Blocks
/// whose finest increments are all equal contribute density; everything
/// else is residual.
pub fn decompose_variation(mc: &MeasureCurve, levels: u32) -> Result<VariationProfile> {
    if mc.generator.is_none() {
        return Err(Error::unsupported("decomposition needs a generator to refine the curve"));
    }
    if levels < JUMP_HALVINGS {
        return Err(Error::input(format!("need at least {JUMP_HALVINGS} refinement levels")));
    }
    let base = increments(mc)?;
    let block = 1usize << JUMP_HALVINGS;
    let parts = 1usize << levels;

    let mut atom_estimates = Vec::new();
    let mut ac_estimate = Vec::with_capacity(base.len());
    let mut ac_mass = 0.0;
    let mut residual = 0.0;
    let mut refined = 0.0;

    for w in mc.grid.windows(2) {
        let (a, b) = (w[0], w[1]);
        let times: Vec<f64> = (0..=parts).map(|k| a + (b - a) * k as f64 / parts as f64).collect();
        let times = {
            let mut t = times;
            *t.last_mut().unwrap() = b;
            t
        };
        let measures = times.par_iter().map(|&t| mc.measure_at(t)).collect::<Result<Vec<_>>>()?;
        let inc = |i: usize, j: usize| w1_distance(&mc.space, &measures[i], &measures[j]);
        let finest: Vec<f64> = (0..parts).into_par_iter().map(|k| inc(k, k + 1)).collect::<Result<_>>()?;
        refined += finest.iter().sum::<f64>();

        let mut cell_ac = 0.0;
        for s in (0..parts).step_by(block) {
            let cells = &finest[s..s + block];
            let total: f64 = cells.iter().sum();

            // follow the heavier half down five halvings
            let (mut lo, mut hi) = (s, s + block);
            let mut current = inc(lo, hi)?;
            let mut stable = current > NEGLIGIBLE;
            while hi - lo > 1 {
                let mid = (lo + hi) / 2;
                let left = inc(lo, mid)?;
                let right = inc(mid, hi)?;
                let next = if right > left {
                    lo = mid;
                    right
                } else {
                    hi = mid;
                    left
                };
                if (next - current).abs() > STABILITY_TOL * current {
                    stable = false;
                }
                current = next;
            }

            if stable {
                let mass = finest[lo];
                atom_estimates.push(AtomEstimate { lo: times[lo], hi: times[hi], mass });
                let rest: Vec<f64> = cells.iter().enumerate().filter(|(k, _)| s + k != lo).map(|x| *x.1).collect();
                let rest_mass = total - mass;
                if uniform_within(&rest) {
                    cell_ac += rest_mass;
                } else {
                    residual += rest_mass;
                }
            } else if uniform_within(cells) {
                cell_ac += total;
            } else {
                residual += total;
            }
        }
        ac_mass += cell_ac;
        ac_estimate.push(cell_ac / (b - a));
    }

    let atom_mass = atom_estimates.iter().fold(0.0, |s, a| s + a.mass);
    let base_variation = base.iter().sum();
    Ok(VariationProfile {
        grid: mc.grid.clone(),
        interval_masses: base,
        atom_estimates,
        ac_estimate,
        residual_estimate: residual,
        atom_mass,
        ac_mass,
        base_variation,
        refined_variation: refined,
        tolerance: refined - base_variation,
        levels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::line_space;

    fn linear01(cells: usize) -> MeasureCurve {
        let space = line_space(&[0.0, 1.0]).unwrap();
        let g = Generator::Linear { mu0: DiscreteMeasure::dirac(2, 0), mu1: DiscreteMeasure::dirac(2, 1) };
        MeasureCurve::from_generator(g, Some(space), uniform_grid(cells)).unwrap()
    }

    #[test]
    fn linear_curve_variation_is_one() {
        for cells in [1, 3, 8, 17] {
            let mc = linear01(cells);
            assert!((curve_variation(&mc).unwrap() - 1.0).abs() < 1e-12);
            assert!(is_bv_geodesic(&mc, 1e-9).unwrap());
            assert!(is_constant_speed(&mc, 1e-9).unwrap());
        }
        let mc = linear01(4);
        assert!((metric_derivative(&mc, 0.25, 0.5).unwrap() - 1.0).abs() < 1e-12);
        assert!((metric_derivative(&mc, 0.3, 0.01).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn constant_curve() {
        let space = line_space(&[0.0, 1.0]).unwrap();
        let mu = DiscreteMeasure::dirac(2, 1);
        let mc = MeasureCurve::explicit(space, uniform_grid(2), vec![mu.clone(), mu.clone(), mu]).unwrap();
        assert_eq!(curve_variation(&mc).unwrap(), 0.0);
        assert_eq!(metric_derivative(&mc, 0.0, 0.5).unwrap(), 0.0);
        assert!(matches!(metric_derivative(&mc, 0.1, 0.2), Err(Error::Unsupported(_))));
        assert!(matches!(decompose_variation(&mc, 6), Err(Error::Unsupported(_))));
    }

    #[test]
    fn backtracking_is_not_geodesic() {
        let space = line_space(&[0.0, 1.0]).unwrap();
        let (a, b) = (DiscreteMeasure::dirac(2, 0), DiscreteMeasure::dirac(2, 1));
        let mc = MeasureCurve::explicit(space, uniform_grid(2), vec![a.clone(), b, a]).unwrap();
        assert_eq!(curve_variation(&mc).unwrap(), 2.0);
        assert!(!is_bv_geodesic(&mc, 1e-9).unwrap());
    }

    #[test]
    fn cantor_plateau_has_zero_speed() {
        let mc = MeasureCurve::from_generator(Generator::Cantor { depth: 8 }, None, uniform_grid(8)).unwrap();
        assert_eq!(metric_derivative(&mc, 0.5, 0.125).unwrap(), 0.0);
        assert!((curve_variation(&mc).unwrap() - 1.0).abs() < 1e-9);
        assert!(!is_constant_speed(&mc, 1e-9).unwrap());
    }

    #[test]
    fn nonuniform_grid_rejected_for_speed() {
        let space = line_space(&[0.0, 1.0]).unwrap();
        let g = Generator::Linear { mu0: DiscreteMeasure::dirac(2, 0), mu1: DiscreteMeasure::dirac(2, 1) };
        let mc = MeasureCurve::from_generator(g, Some(space), vec![0.0, 0.25, 1.0]).unwrap();
        assert!(is_bv_geodesic(&mc, 1e-9).unwrap());
        assert!(matches!(is_constant_speed(&mc, 1e-9), Err(Error::Unsupported(_))));
    }

    #[test]
    fn refinement_restricts_back_exactly() {
        let mc = MeasureCurve::from_generator(Generator::Cantor { depth: 5 }, None, uniform_grid(4)).unwrap();
        let fine = mc.refine(3).unwrap();
        for (k, m) in mc.measures().iter().enumerate() {
            assert_eq!(&fine.measures()[k * 8], m);
        }
        assert!(curve_variation(&fine).unwrap() >= curve_variation(&mc).unwrap() - 1e-15);
    }

    #[test]
    fn linear_decomposes_to_density_one() {
        let p = decompose_variation(&linear01(2), 7).unwrap();
        assert!(p.atom_estimates.is_empty());
        assert!((p.ac_mass - 1.0).abs() < 1e-9);
        assert!(p.residual_estimate.abs() < 1e-9);
        for d in &p.ac_estimate {
            assert!((d - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn slice_decomposes_to_single_jump() {
        let g = Generator::Slice2d { eps: 0.25, y: 0.6, cells: 8 };
        let mc = MeasureCurve::from_generator(g, None, uniform_grid(4)).unwrap();
        let p = decompose_variation(&mc, 10).unwrap();
        assert_eq!(p.atom_estimates.len(), 1);
        let atom = &p.atom_estimates[0];
        assert!((atom.mass - 0.375).abs() < 1e-12);
        assert!(atom.lo <= 0.6 && 0.6 < atom.hi);
        assert!(p.ac_mass.abs() < 1e-12 && p.residual_estimate.abs() < 1e-12);
    }

    #[test]
    fn cantor_variation_is_residual() {
        let mc = MeasureCurve::from_generator(Generator::Cantor { depth: 8 }, None, uniform_grid(2)).unwrap();
        let p = decompose_variation(&mc, 10).unwrap();
        assert!(p.atom_mass < 1e-9);
        assert!(p.residual_estimate >= 1.0 - (2.0f64 / 3.0).powi(8) - 1e-6, "{p:?}");
        let sum = p.atom_mass + p.ac_mass + p.residual_estimate;
        assert!((sum - p.refined_variation).abs() < 1e-12);
    }
}
