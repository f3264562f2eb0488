//! JSON curve files and CSV output.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::current::StepVelocity;
use crate::error::{Error, Result};
use crate::lift::Lift;
use crate::space::{DiscreteMeasure, MetricSpace, SpaceDescriptor};
use crate::wcurves::{uniform_grid, Generator, MeasureCurve, VariationProfile};

/// Grid used for generator curves when the file gives none.
pub const DEFAULT_GRID_CELLS: usize = 16;

/// A curve on disk: either explicit samples or a generator.
///
/// ```json
/// {"space": {...}, "grid": [0, 0.5, 1], "measures": [[1, 0], [0.5, 0.5], [0, 1]]}
/// {"generator": {"kind": "cantor", "depth": 8}, "grid_size": 81}
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct CurveFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub space: Option<SpaceDescriptor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<f64>>,
    /// Uniform grid with this many cells, for generator curves.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measures: Option<Vec<DiscreteMeasure>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<Generator>,
}

impl CurveFile {
    /// Build the curve; `cells` overrides the grid of generator curves.
    pub fn build(&self, cells: Option<usize>) -> Result<MeasureCurve> {
        let space = self.space.as_ref().map(SpaceDescriptor::build).transpose()?;
        match (&self.generator, &self.measures) {
            (Some(_), Some(_)) => Err(Error::input("give either measures or a generator, not both")),
            (None, None) => Err(Error::input("curve file needs measures or a generator")),
            (Some(g), None) => {
                let grid = match (cells, &self.grid, self.grid_size) {
                    (Some(k), _, _) | (None, None, Some(k)) => {
                        if k == 0 {
                            return Err(Error::input("grid needs at least one cell"));
                        }
                        uniform_grid(k)
                    }
                    (None, Some(g), _) => g.clone(),
                    (None, None, None) => uniform_grid(DEFAULT_GRID_CELLS),
                };
                MeasureCurve::from_generator(g.clone(), space, grid)
            }
            (None, Some(m)) => {
                if cells.is_some() {
                    return Err(Error::input("--grid only applies to generator curves"));
                }
                let space = space.ok_or_else(|| Error::input("explicit curve needs a space"))?;
                let grid = self.grid.clone().ok_or_else(|| Error::input("explicit curve needs a grid"))?;
                MeasureCurve::explicit(space, grid, m.clone())
            }
        }
    }

    /// Generator curves keep their rule; explicit curves store samples.
    pub fn from_curve(mc: &MeasureCurve) -> Self {
        let own_space = mc.generator().and_then(|g| g.own_space().ok().flatten()).is_some();
        CurveFile {
            space: (!own_space).then(|| mc.space().descriptor()),
            grid: Some(mc.grid().to_vec()),
            grid_size: None,
            measures: mc.generator().is_none().then(|| mc.measures().to_vec()),
            generator: mc.generator().cloned(),
        }
    }
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, to_json(value)?)?;
    Ok(())
}

/// Twelve significant digits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.11e}")
}

pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

/// Rows `(t_i, x, y, v, contribution)` with `contribution = d(x, y) v mu(x)`.
pub fn velocity_rows(space: &MetricSpace, fields: &[StepVelocity]) -> Vec<Vec<String>> {
    fields
        .iter()
        .flat_map(|f| {
            f.entries.iter().map(move |(&(x, y), &v)| {
                vec![
                    fmt_float(f.t),
                    x.to_string(),
                    y.to_string(),
                    fmt_float(v),
                    fmt_float(space.d(x, y) * v * f.mu[x]),
                ]
            })
        })
        .collect()
}

pub const VELOCITY_HEADER: [&str; 5] = ["t", "x", "y", "v", "contribution"];

/// Rows `(t_lo, t_hi, increment, density)` over the base cells.
pub fn profile_rows(profile: &VariationProfile) -> Vec<Vec<String>> {
    profile
        .grid
        .windows(2)
        .zip(profile.interval_masses.iter().zip(&profile.ac_estimate))
        .map(|(w, (m, d))| vec![fmt_float(w[0]), fmt_float(w[1]), fmt_float(*m), fmt_float(*d)])
        .collect()
}

pub const PROFILE_HEADER: [&str; 4] = ["t_lo", "t_hi", "increment", "density"];

/// Rows `(t, point, mass)` for every positive mass of every sample.
pub fn measure_rows(mc: &MeasureCurve) -> Vec<Vec<String>> {
    mc.grid()
        .iter()
        .zip(mc.measures())
        .flat_map(|(&t, mu)| mu.support().map(move |x| vec![fmt_float(t), x.to_string(), fmt_float(mu.get(x))]))
        .collect()
}

pub const MEASURE_HEADER: [&str; 3] = ["t", "point", "mass"];

/// Rows `(atom, weight, t, from, to)`, one per jump; constant atoms get a
/// single row with empty jump fields.
pub fn lift_rows(lift: &Lift) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for (k, a) in lift.atoms().iter().enumerate() {
        if a.curve.n_jumps() == 0 {
            rows.push(vec![k.to_string(), fmt_float(a.weight), String::new(), a.curve.initial().to_string(), String::new()]);
        }
        for (t, x, y) in a.curve.jumps() {
            rows.push(vec![k.to_string(), fmt_float(a.weight), fmt_float(t), x.to_string(), y.to_string()]);
        }
    }
    rows
}

pub const LIFT_HEADER: [&str; 5] = ["atom", "weight", "t", "from", "to"];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::line_space;

    #[test]
    fn explicit_round_trip() {
        let space = line_space(&[0.0, 1.0]).unwrap();
        let mus = vec![DiscreteMeasure::dirac(2, 0), DiscreteMeasure::new(vec![0.5, 0.5]).unwrap(), DiscreteMeasure::dirac(2, 1)];
        let mc = MeasureCurve::explicit(space, vec![0.0, 0.5, 1.0], mus).unwrap();
        let file = CurveFile::from_curve(&mc);
        let text = to_json(&file).unwrap();
        let back: CurveFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back.build(None).unwrap(), mc);
    }

    #[test]
    fn generator_file() {
        let f: CurveFile = serde_json::from_str(r#"{"generator": {"kind": "cantor", "depth": 3}, "grid_size": 9}"#).unwrap();
        let mc = f.build(None).unwrap();
        assert_eq!(mc.grid().len(), 10);
        assert_eq!(f.build(Some(4)).unwrap().grid().len(), 5);
        let again = CurveFile::from_curve(&mc);
        assert!(again.space.is_none() && again.measures.is_none());
    }

    #[test]
    fn rejects_ambiguous_files() {
        let f: CurveFile = serde_json::from_str(r#"{"grid": [0, 1]}"#).unwrap();
        assert!(f.build(None).unwrap_err().is_input_error());
        assert!(serde_json::from_str::<CurveFile>(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn twelve_digits() {
        assert_eq!(fmt_float(0.375), "3.75000000000e-1");
        assert_eq!(fmt_float(1.0 / 3.0), "3.33333333333e-1");
    }
}
