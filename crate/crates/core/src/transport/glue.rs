//! Gluing consecutive couplings into a multi-marginal plan.
//!
//! For couplings `c12` on `X x Y` and `c23` on `Y x Z` sharing the marginal
//! `m` on `Y`, the glued plan is `w(x, y, z) = c12(x, y) c23(y, z) / m(y)`
//! with `0/0 = 0`. Iterating this along a chain gives a plan whose
//! consecutive pairwise projections are exactly the input couplings.
//!
//! The proportional plan splits every path at every branching point, so its
//! support can grow geometrically along a chain. [`glue_chain_quantile`]
//! couples the conditional laws at each interface monotonically instead
//! (north-west corner on the cumulative masses); it has the same pairwise
//! projections and its support grows additively.

use std::collections::BTreeMap;

use super::{Coupling, EPS};
use crate::error::{Error, Result};

/// Atoms lighter than this are dropped during gluing.
pub const PRUNE_MASS: f64 = 1e-15;

/// Upper bound on the number of atoms a glued plan may carry.
pub const MAX_ATOMS: usize = 4_000_000;

/// A sparse plan over `X^k`: each atom is a path of `k` point indices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MultiCoupling {
    pub atoms: Vec<(Vec<usize>, f64)>,
    /// Total mass removed by pruning.
    pub pruned_mass: f64,
    n: usize,
}

impl MultiCoupling {
    pub fn from_coupling(c: &Coupling) -> Self {
        MultiCoupling {
            atoms: c.iter().map(|(i, j, m)| (vec![i, j], m)).collect(),
            pruned_mass: 0.0,
            n: c.n_points(),
        }
    }

    /// Number of marginals (path length).
    pub fn arity(&self) -> usize {
        self.atoms.first().map_or(0, |a| a.0.len())
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }

    pub fn marginal(&self, k: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (path, m) in &self.atoms {
            out[path[k]] += m;
        }
        out
    }

    /// Pushforward under `(x_0..x_k) -> (x_a, x_b)`.
    pub fn projection(&self, a: usize, b: usize) -> Coupling {
        let mut map: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (path, m) in &self.atoms {
            *map.entry((path[a], path[b])).or_insert(0.0) += m;
        }
        Coupling::from_entries(self.n, map.into_iter().map(|((i, j), m)| (i, j, m)))
            .expect("projection of a valid plan is a valid coupling")
    }

    /// Extend every path by one step drawn from the conditional law of `next`.
    fn extend(&mut self, next: &Coupling) -> Result<()> {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.n];
        for (y, z, m) in next.iter() {
            rows[y].push((z, m));
        }
        let row_mass: Vec<f64> = rows.iter().map(|r| r.iter().map(|e| e.1).sum()).collect();

        let mut out = Vec::with_capacity(self.atoms.len());
        for (mut path, mass) in std::mem::take(&mut self.atoms) {
            let y = *path.last().expect("paths are nonempty");
            let succ = &rows[y];
            if row_mass[y] <= 0.0 {
                // interface marginal vanishes here: 0/0 = 0
                self.pruned_mass += mass;
                continue;
            }
            let live: Vec<(usize, f64)> = succ
                .iter()
                .map(|&(z, m)| (z, mass * m / row_mass[y]))
                .filter(|&(_, w)| {
                    if w < PRUNE_MASS {
                        self.pruned_mass += w;
                        false
                    } else {
                        true
                    }
                })
                .collect();
            if out.len() + live.len() > MAX_ATOMS {
                return Err(Error::Solver(format!(
                    "glued plan exceeds {MAX_ATOMS} atoms; lower the level or coarsen the curve"
                )));
            }
            match live.len() {
                0 => {}
                1 => {
                    path.push(live[0].0);
                    out.push((path, live[0].1));
                }
                _ => {
                    for &(z, w) in &live {
                        let mut p = path.clone();
                        p.push(z);
                        out.push((p, w));
                    }
                }
            }
        }
        self.atoms = out;
        Ok(())
    }

    /// Like [`extend`](Self::extend), but the incoming paths at `y` and the
    /// outgoing row of `next` are matched as consecutive pieces of `[0, 1]`.
    fn extend_quantile(&mut self, next: &Coupling) -> Result<()> {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.n];
        for (y, z, m) in next.iter() {
            rows[y].push((z, m));
        }
        let mut by_end: Vec<Vec<usize>> = vec![Vec::new(); self.n];
        for (k, (path, _)) in self.atoms.iter().enumerate() {
            by_end[*path.last().expect("paths are nonempty")].push(k);
        }
        let old = std::mem::take(&mut self.atoms);
        let mut out = Vec::with_capacity(old.len() + next.support_len());
        for (y, incoming) in by_end.iter().enumerate() {
            if incoming.is_empty() {
                continue;
            }
            let in_total: f64 = incoming.iter().map(|&k| old[k].1).sum();
            let row = &rows[y];
            let row_total: f64 = row.iter().map(|e| e.1).sum();
            if row_total <= 0.0 {
                self.pruned_mass += in_total;
                continue;
            }
            let piece_end = |cum: f64, idx: usize, len: usize| if idx + 1 == len { 1.0 } else { cum };
            let (mut i, mut j) = (0, 0);
            let mut a_cum = old[incoming[0]].1 / in_total;
            let mut b_cum = row[0].1 / row_total;
            let mut pos = 0.0;
            while i < incoming.len() && j < row.len() {
                let a_end = piece_end(a_cum, i, incoming.len());
                let b_end = piece_end(b_cum, j, row.len());
                let end = a_end.min(b_end);
                let w = (end - pos).max(0.0) * in_total;
                if w >= PRUNE_MASS {
                    let mut p = old[incoming[i]].0.clone();
                    p.push(row[j].0);
                    out.push((p, w));
                } else {
                    self.pruned_mass += w;
                }
                pos = end;
                if a_end <= b_end {
                    i += 1;
                    if i < incoming.len() {
                        a_cum += old[incoming[i]].1 / in_total;
                    }
                } else {
                    j += 1;
                    if j < row.len() {
                        b_cum += row[j].1 / row_total;
                    }
                }
            }
            if out.len() > MAX_ATOMS {
                return Err(Error::Solver(format!("glued plan exceeds {MAX_ATOMS} atoms")));
            }
        }
        self.atoms = out;
        Ok(())
    }
}

fn check_interface(c12: &Coupling, c23: &Coupling, at: usize) -> Result<()> {
    if c12.n_points() != c23.n_points() {
        return Err(Error::structural("couplings live on spaces of different sizes"));
    }
    let left = c12.col_sums();
    let right = c23.row_sums();
    let gap = left.iter().zip(&right).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    if gap > EPS {
        return Err(Error::input(format!(
            "interface marginal mismatch {gap:e} between couplings {at} and {}",
            at + 1
        )));
    }
    Ok(())
}

/// Three-marginal plan with `Pr^{1,2} = c12` and `Pr^{2,3} = c23`.
pub fn glue(c12: &Coupling, c23: &Coupling) -> Result<MultiCoupling> {
    glue_chain(&[c12.clone(), c23.clone()])
}

/// Plan over `k + 1` marginals whose `(i, i+1)` projection is the i-th coupling.
pub fn glue_chain(couplings: &[Coupling]) -> Result<MultiCoupling> {
    let first = couplings
        .first()
        .ok_or_else(|| Error::input("glue_chain needs at least one coupling"))?;
    for (k, w) in couplings.windows(2).enumerate() {
        check_interface(&w[0], &w[1], k)?;
    }
    let mut plan = MultiCoupling::from_coupling(first);
    for c in &couplings[1..] {
        plan.extend(c)?;
    }
    Ok(plan)
}

/// Plan over `k + 1` marginals built with the monotone interface matching.
pub fn glue_chain_quantile(couplings: &[Coupling]) -> Result<MultiCoupling> {
    let first = couplings
        .first()
        .ok_or_else(|| Error::input("glue_chain needs at least one coupling"))?;
    for (k, w) in couplings.windows(2).enumerate() {
        check_interface(&w[0], &w[1], k)?;
    }
    let mut plan = MultiCoupling::from_coupling(first);
    for c in &couplings[1..] {
        plan.extend_quantile(c)?;
    }
    Ok(plan)
}

/// Number of paths the proportional plan would have before pruning,
/// saturating at `u64::MAX`.
pub fn proportional_support_size(couplings: &[Coupling]) -> u64 {
    let Some(first) = couplings.first() else { return 0 };
    let n = first.n_points();
    let mut count = vec![0u64; n];
    for (_, j, _) in first.iter() {
        count[j] += 1;
    }
    for c in &couplings[1..] {
        let mut next = vec![0u64; n];
        for (y, z, _) in c.iter() {
            next[z] = next[z].saturating_add(count[y]);
        }
        count = next;
    }
    count.iter().fold(0u64, |a, &b| a.saturating_add(b))
}
