//! Exact 1-Wasserstein distances between discrete measures.
//!
//! [`w1`] solves the transportation problem by min-cost flow and returns an
//! optimal coupling together with a 1-Lipschitz dual potential whose
//! Kantorovich–Rubinstein value certifies the distance. [`w1_line_oracle`]
//! is an independent closed form for measures on the real line.

mod flow;
mod glue;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use glue::{glue, glue_chain, glue_chain_quantile, proportional_support_size, MultiCoupling, MAX_ATOMS, PRUNE_MASS};

use crate::error::{Error, Result};
use crate::space::{DiscreteMeasure, MetricSpace};

/// Tolerance on marginals and duality gaps.
pub const EPS: f64 = 1e-9;

/// Sparse joint mass over `X x X`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Coupling {
    entries: BTreeMap<(usize, usize), f64>,
    n: usize,
}

/// JSON atom of a coupling.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct CouplingEntry {
    pub i: usize,
    pub j: usize,
    pub m: f64,
}

impl Coupling {
    /// Entries with nonpositive mass are dropped; negative mass is an error.
    pub fn from_entries(n: usize, entries: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, j, m) in entries {
            if i >= n || j >= n {
                return Err(Error::input(format!("coupling entry ({i},{j}) outside {n} points")));
            }
            if !m.is_finite() || m < 0.0 {
                return Err(Error::input(format!("coupling entry ({i},{j}) has mass {m}")));
            }
            if m > 0.0 {
                *map.entry((i, j)).or_insert(0.0) += m;
            }
        }
        Ok(Coupling { entries: map, n })
    }

    /// The coupling that leaves every point in place.
    pub fn diagonal(mu: &DiscreteMeasure) -> Self {
        let entries = mu.support().map(|i| ((i, i), mu.get(i))).collect();
        Coupling { entries, n: mu.len() }
    }

    pub fn product(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Self {
        let mut entries = BTreeMap::new();
        for i in mu.support() {
            for j in nu.support() {
                entries.insert((i, j), mu.get(i) * nu.get(j));
            }
        }
        Coupling { entries, n: mu.len() }
    }

    pub fn n_points(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries.get(&(i, j)).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.entries.iter().map(|(&(i, j), &m)| (i, j, m))
    }

    pub fn support_len(&self) -> usize {
        self.entries.len()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        let mut r = vec![0.0; self.n];
        for (i, _, m) in self.iter() {
            r[i] += m;
        }
        r
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.n];
        for (_, j, m) in self.iter() {
            c[j] += m;
        }
        c
    }

    pub fn total_mass(&self) -> f64 {
        self.entries.values().sum()
    }

    pub fn cost(&self, space: &MetricSpace) -> f64 {
        self.iter().map(|(i, j, m)| space.d(i, j) * m).sum()
    }

    /// Largest absolute deviation of either marginal from the given weights.
    pub fn marginal_error(&self, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> f64 {
        let r = self.row_sums();
        let c = self.col_sums();
        let e1 = r.iter().zip(mu.weights()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let e2 = c.iter().zip(nu.weights()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        e1.max(e2)
    }

    pub fn is_feasible(&self, mu: &DiscreteMeasure, nu: &DiscreteMeasure, tol: f64) -> bool {
        mu.len() == self.n && nu.len() == self.n && self.marginal_error(mu, nu) <= tol
    }

    pub fn to_entries(&self) -> Vec<CouplingEntry> {
        self.iter().map(|(i, j, m)| CouplingEntry { i, j, m }).collect()
    }
}

/// A 1-Lipschitz potential `phi` with `sum phi d(mu - nu)` close to `W1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualCertificate {
    pub potential: Vec<f64>,
    /// `|primal cost - dual value|`.
    pub reported_gap: f64,
}

impl DualCertificate {
    pub fn value(&self, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> f64 {
        self.potential
            .iter()
            .zip(mu.weights().iter().zip(nu.weights()))
            .map(|(p, (a, b))| p * (a - b))
            .sum()
    }

    /// Worst violation of `|phi(x) - phi(y)| <= d(x, y)`.
    pub fn lipschitz_excess(&self, space: &MetricSpace) -> f64 {
        let n = self.potential.len();
        let mut worst: f64 = 0.0;
        for x in 0..n {
            for y in 0..n {
                worst = worst.max((self.potential[x] - self.potential[y]).abs() - space.d(x, y));
            }
        }
        worst
    }
}

#[derive(Debug, Clone)]
pub struct Transport {
    pub distance: f64,
    pub coupling: Coupling,
    pub certificate: DualCertificate,
}

/// Optimal transport between two raw mass vectors of equal total.
///
/// Common mass stays in place: for a metric cost some optimal plan keeps
/// `min(a(x), b(x))` on the diagonal, so only the excess of `a` over `b`
/// enters the flow problem.
fn solve_masses(space: &MetricSpace, a: &[f64], b: &[f64]) -> Result<Transport> {
    let n = space.len();
    let mut entries = BTreeMap::new();
    let mut sources = Vec::new();
    let mut sinks = Vec::new();
    for x in 0..n {
        let common = a[x].min(b[x]);
        if common > 0.0 {
            entries.insert((x, x), common);
        }
        let diff = a[x] - b[x];
        if diff > 0.0 {
            sources.push((x, diff));
        } else if diff < 0.0 {
            sinks.push((x, -diff));
        }
    }

    let mut potential = vec![0.0; n];
    if !sources.is_empty() && !sinks.is_empty() {
        let supply: Vec<f64> = sources.iter().map(|s| s.1).collect();
        let demand: Vec<f64> = sinks.iter().map(|s| s.1).collect();
        let cost: Vec<Vec<f64>> = sources
            .iter()
            .map(|&(x, _)| sinks.iter().map(|&(y, _)| space.d(x, y)).collect())
            .collect();
        let sol = flow::solve(&supply, &demand, &cost)?;
        for (si, &(x, _)) in sources.iter().enumerate() {
            for (dj, &(y, _)) in sinks.iter().enumerate() {
                let f = sol.flow[si][dj];
                if f > 0.0 {
                    *entries.entry((x, y)).or_insert(0.0) += f;
                }
            }
        }
        // c-transform of the sink potentials: 1-Lipschitz on the whole space
        for (z, p) in potential.iter_mut().enumerate() {
            *p = sinks
                .iter()
                .zip(&sol.demand_potential)
                .map(|(&(y, _), pd)| space.d(z, y) - pd)
                .fold(f64::INFINITY, f64::min);
        }
        let shift = potential.iter().copied().fold(f64::INFINITY, f64::min);
        for p in potential.iter_mut() {
            *p -= shift;
        }
    }

    let coupling = Coupling { entries, n };
    let distance = coupling.cost(space);
    let dual: f64 = potential.iter().zip(a.iter().zip(b)).map(|(p, (x, y))| p * (x - y)).sum();
    Ok(Transport {
        distance,
        coupling,
        certificate: DualCertificate { potential, reported_gap: (distance - dual).abs() },
    })
}

/// `W1(mu, nu)` with an optimal coupling and a dual certificate.
pub fn w1(space: &MetricSpace, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<Transport> {
    if mu.len() != space.len() || nu.len() != space.len() {
        return Err(Error::structural("measures do not live on the given space"));
    }
    let mismatch = (mu.total() - nu.total()).abs();
    if mismatch > EPS {
        return Err(Error::input(format!("total masses differ by {mismatch}")));
    }
    solve_masses(space, mu.weights(), nu.weights())
}

/// Just the distance.
pub fn w1_distance(space: &MetricSpace, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    Ok(w1(space, mu, nu)?.distance)
}

/// Closed-form `W1` on a line-embedded space: `integral |F_mu - F_nu|`.
pub fn w1_line_oracle(space: &MetricSpace, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    let xs = space
        .line_coords()
        .ok_or_else(|| Error::unsupported("space has no one-dimensional embedding"))?;
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut cdf_gap = 0.0;
    let mut area = 0.0;
    for w in order.windows(2) {
        cdf_gap += mu.get(w[0]) - nu.get(w[0]);
        area += cdf_gap.abs() * (xs[w[1]] - xs[w[0]]);
    }
    Ok(area)
}

/// Whether the coupling attains `W1` between its own marginals within `tol`.
pub fn is_optimal(space: &MetricSpace, coupling: &Coupling, tol: f64) -> Result<bool> {
    if coupling.n_points() != space.len() {
        return Err(Error::structural("coupling does not live on the given space"));
    }
    let best = solve_masses(space, &coupling.row_sums(), &coupling.col_sums())?;
    Ok(coupling.cost(space) - best.distance <= tol)
}
