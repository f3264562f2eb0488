//! Finite metric spaces and discrete probability measures on them.
//!
//! Every measure, coupling and curve in the crate refers to points of a
//! [`MetricSpace`] by index. Spaces are validated on construction: the
//! distance matrix must be a genuine metric whose induced topology is
//! discrete (distinct points at strictly positive distance).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mass comparisons for measures.
pub const MASS_TOL: f64 = 1e-12;

/// Tolerance for coordinate/distance consistency.
pub const COORD_TOL: f64 = 1e-12;

/// A failed metric axiom together with the indices that witness it.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "axiom", rename_all = "snake_case")]
pub enum Violation {
    NonzeroDiagonal { i: usize, value: f64 },
    NotPositive { i: usize, j: usize, value: f64 },
    NotFinite { i: usize, j: usize },
    Asymmetric { i: usize, j: usize },
    Triangle { i: usize, j: usize, k: usize, excess: f64 },
    CoordMismatch { i: usize, j: usize, dist: f64, euclidean: f64 },
}

impl Violation {
    pub fn axiom(&self) -> &'static str {
        match self {
            Violation::NonzeroDiagonal { .. } => "identity",
            Violation::NotPositive { .. } => "positivity",
            Violation::NotFinite { .. } => "finiteness",
            Violation::Asymmetric { .. } => "symmetry",
            Violation::Triangle { .. } => "triangle",
            Violation::CoordMismatch { .. } => "coordinate consistency",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonzeroDiagonal { i, value } => write!(f, "identity: d({i},{i}) = {value}"),
            Violation::NotPositive { i, j, value } => {
                write!(f, "positivity: d({i},{j}) = {value} for distinct points")
            }
            Violation::NotFinite { i, j } => write!(f, "finiteness: d({i},{j}) is not finite"),
            Violation::Asymmetric { i, j } => write!(f, "symmetry: d({i},{j}) != d({j},{i})"),
            Violation::Triangle { i, j, k, excess } => {
                write!(f, "triangle at ({i},{j},{k}): d({i},{k}) exceeds d({i},{j}) + d({j},{k}) by {excess}")
            }
            Violation::CoordMismatch { i, j, dist, euclidean } => write!(
                f,
                "coordinate consistency: d({i},{j}) = {dist} but euclidean distance is {euclidean}"
            ),
        }
    }
}

/// Check all metric axioms on a raw distance matrix.
///
/// Returns an empty list iff the matrix is a metric with strictly positive
/// off-diagonal entries. A non-square matrix is a structural error.
pub fn validate_metric(dist: &[Vec<f64>]) -> Result<Vec<Violation>> {
    let n = dist.len();
    if let Some((r, row)) = dist.iter().enumerate().find(|(_, row)| row.len() != n) {
        return Err(Error::structural(format!(
            "distance matrix is not square: row {r} has length {} but there are {n} rows",
            row.len()
        )));
    }
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let d = dist[i][j];
            if !d.is_finite() {
                out.push(Violation::NotFinite { i, j });
                continue;
            }
            if i == j {
                if d != 0.0 {
                    out.push(Violation::NonzeroDiagonal { i, value: d });
                }
            } else {
                if d <= 0.0 {
                    out.push(Violation::NotPositive { i, j, value: d });
                }
                if j > i && d != dist[j][i] {
                    out.push(Violation::Asymmetric { i, j });
                }
            }
        }
    }
    let scale = dist
        .iter()
        .flatten()
        .filter(|d| d.is_finite())
        .fold(0.0f64, |m, &d| m.max(d.abs()));
    let slack = COORD_TOL * (1.0 + scale);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                if i == j || j == k || i == k {
                    continue;
                }
                let excess = dist[i][k] - (dist[i][j] + dist[j][k]);
                if excess > slack {
                    out.push(Violation::Triangle { i, j, k, excess });
                }
            }
        }
    }
    Ok(out)
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// A finite metric space with a validated distance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSpace {
    labels: Vec<String>,
    coords: Option<Vec<Vec<f64>>>,
    dist: Vec<f64>,
    n: usize,
}

impl MetricSpace {
    /// Build from an explicit distance matrix. Fails with the full list of
    /// violated axioms if the matrix is not a discrete metric.
    pub fn from_dist(labels: Vec<String>, dist: Vec<Vec<f64>>) -> Result<Self> {
        Self::build(labels, None, Some(dist))
    }

    /// Build from point coordinates with the Euclidean distance.
    pub fn from_coords(labels: Vec<String>, coords: Vec<Vec<f64>>) -> Result<Self> {
        Self::build(labels, Some(coords), None)
    }

    fn build(
        labels: Vec<String>,
        coords: Option<Vec<Vec<f64>>>,
        dist: Option<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::input("metric space must have at least one point"));
        }
        if let Some(c) = &coords {
            if c.len() != n {
                return Err(Error::structural(format!(
                    "{} coordinate vectors for {n} labels",
                    c.len()
                )));
            }
            let dim = c[0].len();
            if c.iter().any(|p| p.len() != dim) {
                return Err(Error::structural("coordinate vectors have different dimensions"));
            }
        }
        let matrix = match (&coords, dist) {
            (None, None) => return Err(Error::input("exactly one of coords/dist is required")),
            (Some(c), None) => c
                .iter()
                .map(|a| c.iter().map(|b| euclidean(a, b)).collect())
                .collect::<Vec<Vec<f64>>>(),
            (_, Some(d)) => d,
        };
        if matrix.len() != n {
            return Err(Error::structural(format!(
                "distance matrix has {} rows for {n} labels",
                matrix.len()
            )));
        }
        let mut violations = validate_metric(&matrix)?;
        if let Some(c) = &coords {
            for i in 0..n {
                for j in (i + 1)..n {
                    let e = euclidean(&c[i], &c[j]);
                    if (e - matrix[i][j]).abs() > COORD_TOL {
                        violations.push(Violation::CoordMismatch { i, j, dist: matrix[i][j], euclidean: e });
                    }
                }
            }
        }
        if !violations.is_empty() {
            let msg: Vec<String> = violations.iter().take(8).map(|v| v.to_string()).collect();
            return Err(Error::input(format!(
                "{} metric violation(s): {}",
                violations.len(),
                msg.join("; ")
            )));
        }
        Ok(MetricSpace {
            labels,
            coords,
            dist: matrix.into_iter().flatten().collect(),
            n,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn d(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.n + j]
    }

    pub fn diameter(&self) -> f64 {
        self.dist.iter().copied().fold(0.0, f64::max)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn coords(&self) -> Option<&[Vec<f64>]> {
        self.coords.as_deref()
    }

    /// Coordinates of a one-dimensional embedding, if the space has one.
    pub fn line_coords(&self) -> Option<Vec<f64>> {
        let c = self.coords.as_ref()?;
        if c.iter().all(|p| p.len() == 1) {
            Some(c.iter().map(|p| p[0]).collect())
        } else {
            None
        }
    }

    pub fn dist_rows(&self) -> Vec<Vec<f64>> {
        self.dist.chunks(self.n).map(|r| r.to_vec()).collect()
    }

    /// Re-run the full axiom check on the stored matrix.
    pub fn violations(&self) -> Vec<Violation> {
        validate_metric(&self.dist_rows()).unwrap_or_default()
    }

    /// `min_{y != x} d(x, y)`, positive by construction.
    pub fn isolation_radius(&self, x: usize) -> f64 {
        (0..self.n)
            .filter(|&y| y != x)
            .map(|y| self.d(x, y))
            .fold(f64::INFINITY, f64::min)
    }

    /// Index of the point with exactly this line coordinate.
    pub fn index_of_coord(&self, x: f64) -> Option<usize> {
        let c = self.coords.as_ref()?;
        c.iter().position(|p| p.len() == 1 && (p[0] - x).abs() <= COORD_TOL)
    }

    pub fn descriptor(&self) -> SpaceDescriptor {
        SpaceDescriptor {
            labels: self.labels.clone(),
            coords: self.coords.clone(),
            dist: if self.coords.is_some() { None } else { Some(self.dist_rows()) },
        }
    }
}

/// Points on the real line at the given strictly increasing coordinates.
pub fn line_space(xs: &[f64]) -> Result<MetricSpace> {
    if xs.is_empty() {
        return Err(Error::input("line_space needs at least one coordinate"));
    }
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::input("line coordinates must be finite"));
    }
    if let Some(w) = xs.windows(2).find(|w| w[1] <= w[0]) {
        return Err(Error::input(format!(
            "line coordinates must be strictly increasing, got {} then {}",
            w[0], w[1]
        )));
    }
    let labels = xs.iter().map(|x| format!("{x}")).collect();
    let coords = xs.iter().map(|&x| vec![x]).collect();
    MetricSpace::from_coords(labels, coords)
}

/// JSON form of a space: exactly one of `coords`/`dist` is required; when
/// both are present they must agree.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SpaceDescriptor {
    pub labels: Vec<String>,
    #[serde(default)]
    pub coords: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub dist: Option<Vec<Vec<f64>>>,
}

impl SpaceDescriptor {
    pub fn build(&self) -> Result<MetricSpace> {
        MetricSpace::build(self.labels.clone(), self.coords.clone(), self.dist.clone())
    }

    /// Axiom violations of the described matrix without failing on them.
    pub fn violations(&self) -> Result<Vec<Violation>> {
        let n = self.labels.len();
        let dist = match (&self.coords, &self.dist) {
            (_, Some(d)) => d.clone(),
            (Some(c), None) => c.iter().map(|a| c.iter().map(|b| euclidean(a, b)).collect()).collect(),
            (None, None) => return Err(Error::input("exactly one of coords/dist is required")),
        };
        if dist.len() != n {
            return Err(Error::structural(format!("distance matrix has {} rows for {n} labels", dist.len())));
        }
        let mut v = validate_metric(&dist)?;
        if let (Some(c), Some(_)) = (&self.coords, &self.dist) {
            if c.len() != n {
                return Err(Error::structural(format!("{} coordinate vectors for {n} labels", c.len())));
            }
            for i in 0..n {
                for j in (i + 1)..n {
                    let e = euclidean(&c[i], &c[j]);
                    if (e - dist[i][j]).abs() > COORD_TOL {
                        v.push(Violation::CoordMismatch { i, j, dist: dist[i][j], euclidean: e });
                    }
                }
            }
        }
        Ok(v)
    }
}

/// A probability vector indexed by the points of a space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<f64>", try_from = "Vec<f64>")]
pub struct DiscreteMeasure {
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::input("measure needs at least one weight"));
        }
        if let Some((i, w)) = weights.iter().enumerate().find(|(_, w)| !w.is_finite() || **w < 0.0) {
            return Err(Error::input(format!("weight {i} = {w} is not a nonnegative number")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::input(format!("weights sum to {total}, expected 1")));
        }
        Ok(DiscreteMeasure { weights })
    }

    /// Build on a specific space, checking the length.
    pub fn on(space: &MetricSpace, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != space.len() {
            return Err(Error::structural(format!(
                "measure has {} weights but the space has {} points",
                weights.len(),
                space.len()
            )));
        }
        Self::new(weights)
    }

    pub fn dirac(n: usize, at: usize) -> Self {
        let mut weights = vec![0.0; n];
        weights[at] = 1.0;
        DiscreteMeasure { weights }
    }

    /// Uniform mass on the listed (distinct) points.
    pub fn uniform_on(n: usize, support: &[usize]) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::input("uniform measure needs a nonempty support"));
        }
        let mut weights = vec![0.0; n];
        let w = 1.0 / support.len() as f64;
        for &i in support {
            if i >= n {
                return Err(Error::input(format!("support index {i} out of range")));
            }
            weights[i] += w;
        }
        Self::new(weights)
    }

    /// Normalise nonnegative masses to a probability vector.
    pub fn from_masses(masses: Vec<f64>) -> Result<Self> {
        let total: f64 = masses.iter().sum();
        if !(total > 0.0) {
            return Err(Error::input("masses must have positive total"));
        }
        Self::new(masses.into_iter().map(|m| m / total).collect())
    }

    /// `(1 - s) * a + s * b`.
    pub fn mix(a: &Self, b: &Self, s: f64) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::structural("mixing measures of different lengths"));
        }
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::input(format!("mixing parameter {s} outside [0,1]")));
        }
        let weights = a.weights.iter().zip(&b.weights).map(|(x, y)| (1.0 - s) * x + s * y).collect();
        Ok(DiscreteMeasure { weights })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.weights.iter().enumerate().filter(|(_, w)| **w > 0.0).map(|(i, _)| i)
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Total-variation distance `1/2 sum |a - b|`.
    pub fn tv_distance(&self, other: &Self) -> f64 {
        0.5 * self.weights.iter().zip(&other.weights).map(|(a, b)| (a - b).abs()).sum::<f64>()
    }
}

impl From<DiscreteMeasure> for Vec<f64> {
    fn from(m: DiscreteMeasure) -> Self {
        m.weights
    }
}

impl TryFrom<Vec<f64>> for DiscreteMeasure {
    type Error = Error;

    fn try_from(w: Vec<f64>) -> Result<Self> {
        DiscreteMeasure::new(w)
    }
}

/// `sum_x d(base, x) mu(x)`.
pub fn first_moment(space: &MetricSpace, mu: &DiscreteMeasure, base: usize) -> Result<f64> {
    if base >= space.len() {
        return Err(Error::input(format!("base index {base} out of range for {} points", space.len())));
    }
    if mu.len() != space.len() {
        return Err(Error::structural("measure length does not match the space"));
    }
    Ok(mu.weights().iter().enumerate().map(|(x, w)| space.d(base, x) * w).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_space_is_valid() {
        assert!(validate_metric(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap().is_empty());
    }

    #[test]
    fn triangle_violation_is_named() {
        let d = vec![vec![0.0, 1.0, 5.0], vec![1.0, 0.0, 1.0], vec![5.0, 1.0, 0.0]];
        let v = validate_metric(&d).unwrap();
        assert!(v.contains(&Violation::Triangle { i: 0, j: 1, k: 2, excess: 3.0 }));
        assert!(v.iter().all(|x| x.axiom() == "triangle"));
    }

    #[test]
    fn non_square_is_structural() {
        let err = validate_metric(&[vec![0.0, 1.0], vec![1.0]]).unwrap_err();
        assert!(matches!(err, Error::Structural(_)));
    }

    #[test]
    fn zero_off_diagonal_breaks_discreteness() {
        let v = validate_metric(&[vec![0.0, 0.0], vec![0.0, 0.0]]).unwrap();
        assert_eq!(v.len(), 2);
        assert!(v.iter().all(|x| x.axiom() == "positivity"));
    }

    #[test]
    fn asymmetric_matrix_is_flagged() {
        let v = validate_metric(&[vec![0.0, 1.0], vec![2.0, 0.0]]).unwrap();
        assert!(v.iter().any(|x| x.axiom() == "symmetry"));
    }

    #[test]
    fn line_space_distances() {
        let s = line_space(&[0.0, 1.0]).unwrap();
        assert_eq!(s.dist_rows(), vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        let s = line_space(&[-2.0, -1.5, -1.0, 1.0, 1.5, 2.0]).unwrap();
        assert_eq!(s.len(), 6);
        assert_eq!(s.d(0, 5), 4.0);
        let s = line_space(&[0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0]).unwrap();
        assert!((s.d(1, 2) - 1.0 / 3.0).abs() < 1e-15);
        assert!(line_space(&[-2.0, -1.0, 1.0, 2.0]).unwrap().violations().is_empty());
    }

    #[test]
    fn line_space_rejects_duplicates() {
        assert!(matches!(line_space(&[0.0, 1.0, 1.0]), Err(Error::Input(_))));
        assert!(line_space(&[]).is_err());
    }

    #[test]
    fn descriptor_consistency() {
        let good = SpaceDescriptor {
            labels: vec!["a".into(), "b".into()],
            coords: Some(vec![vec![0.0], vec![2.0]]),
            dist: Some(vec![vec![0.0, 2.0], vec![2.0, 0.0]]),
        };
        assert!(good.build().is_ok());
        let bad = SpaceDescriptor { dist: Some(vec![vec![0.0, 3.0], vec![3.0, 0.0]]), ..good.clone() };
        assert!(bad.build().is_err());
        assert_eq!(bad.violations().unwrap()[0].axiom(), "coordinate consistency");
        let neither = SpaceDescriptor { coords: None, dist: None, ..good };
        assert!(neither.build().is_err());
    }

    #[test]
    fn first_moment_examples() {
        let s = line_space(&[0.0, 1.0]).unwrap();
        let delta = DiscreteMeasure::dirac(2, 0);
        assert_eq!(first_moment(&s, &delta, 0).unwrap(), 0.0);
        let u = DiscreteMeasure::uniform_on(2, &[0, 1]).unwrap();
        assert!((first_moment(&s, &u, 0).unwrap() - 0.5).abs() < 1e-15);

        let s = line_space(&[-2.0, -1.5, -1.0, 0.0]).unwrap();
        let u = DiscreteMeasure::uniform_on(4, &[0, 1, 2]).unwrap();
        assert!((first_moment(&s, &u, 3).unwrap() - 1.5).abs() < 1e-12);
        assert!(first_moment(&s, &u, 4).is_err());
    }

    #[test]
    fn measure_validation() {
        assert!(DiscreteMeasure::new(vec![0.5, 0.4]).is_err());
        assert!(DiscreteMeasure::new(vec![1.5, -0.5]).is_err());
        let s = line_space(&[0.0, 1.0, 2.0]).unwrap();
        assert!(DiscreteMeasure::on(&s, vec![0.5, 0.5]).is_err());
    }
}
