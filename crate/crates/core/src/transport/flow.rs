//! Successive-shortest-path min-cost flow on a bipartite transportation graph.
//!
//! Nodes are a super source, the supply points, the demand points and a
//! super sink. Each phase runs a dense Dijkstra over reduced costs (Johnson
//! potentials) and augments along the cheapest source-sink path. Ties are
//! broken towards the lowest node index so the output is a deterministic
//! function of the input.

use crate::error::{Error, Result};

/// Residual capacities below this are treated as exhausted.
const CAP_EPS: f64 = 1e-15;

#[derive(Debug, Clone)]
pub(crate) struct FlowSolution {
    /// `flow[i][j]` between the i-th supply and j-th demand node.
    pub flow: Vec<Vec<f64>>,
    /// Node potentials: supply nodes first, then demand nodes. Every
    /// residual arc `a -> b` satisfies `c(a,b) + p[a] - p[b] >= 0` up to
    /// rounding, so `p_demand[j] - p_supply[i] <= c(i, j)`.
    #[allow(dead_code)]
    pub supply_potential: Vec<f64>,
    pub demand_potential: Vec<f64>,
}

pub(crate) fn solve(supply: &[f64], demand: &[f64], cost: &[Vec<f64>]) -> Result<FlowSolution> {
    let m = supply.len();
    let n = demand.len();
    debug_assert!(cost.len() == m && cost.iter().all(|r| r.len() == n));

    // node layout: 0 = source, 1..=m supply, m+1..=m+n demand, m+n+1 sink
    let source = 0;
    let sink = m + n + 1;
    let nodes = m + n + 2;
    let sup = |i: usize| 1 + i;
    let dem = |j: usize| 1 + m + j;

    let mut rem_supply = supply.to_vec();
    let mut rem_demand = demand.to_vec();
    let mut flow = vec![vec![0.0; n]; m];
    let mut pot = vec![0.0f64; nodes];

    let mut dist = vec![f64::INFINITY; nodes];
    let mut done = vec![false; nodes];
    let mut parent = vec![usize::MAX; nodes];

    let max_iter = 8 * (m + n) * (m + n) + 64;
    let mut augmentations = 0;

    loop {
        let remaining: f64 = rem_supply.iter().sum();
        if remaining <= CAP_EPS * (m.max(1) as f64) || m == 0 || n == 0 {
            break;
        }
        if augmentations >= max_iter {
            return Err(Error::Solver(format!(
                "no convergence after {augmentations} augmentations ({remaining} mass left)"
            )));
        }

        dist.fill(f64::INFINITY);
        done.fill(false);
        parent.fill(usize::MAX);
        dist[source] = 0.0;

        loop {
            let mut u = usize::MAX;
            let mut best = f64::INFINITY;
            for v in 0..nodes {
                if !done[v] && dist[v] < best {
                    best = dist[v];
                    u = v;
                }
            }
            if u == usize::MAX {
                break;
            }
            done[u] = true;
            if u == sink {
                break;
            }
            let mut relax = |v: usize, c: f64| {
                let reduced = (c + pot[u] - pot[v]).max(0.0);
                let cand = dist[u] + reduced;
                if cand < dist[v] && !done[v] {
                    dist[v] = cand;
                    parent[v] = u;
                }
            };
            if u == source {
                for i in 0..m {
                    if rem_supply[i] > CAP_EPS {
                        relax(sup(i), 0.0);
                    }
                }
            } else if u <= m {
                let i = u - 1;
                for j in 0..n {
                    relax(dem(j), cost[i][j]);
                }
            } else {
                let j = u - 1 - m;
                for i in 0..m {
                    if flow[i][j] > CAP_EPS {
                        relax(sup(i), -cost[i][j]);
                    }
                }
                if rem_demand[j] > CAP_EPS {
                    relax(sink, 0.0);
                }
            }
        }

        if !dist[sink].is_finite() {
            // Remaining supply is rounding residue with no demand left to absorb it.
            break;
        }

        let dt = dist[sink];
        for v in 0..nodes {
            pot[v] += dist[v].min(dt);
        }

        // bottleneck along the path
        let mut bottleneck = f64::INFINITY;
        let mut v = sink;
        while v != source {
            let u = parent[v];
            if u == source {
                bottleneck = bottleneck.min(rem_supply[v - 1]);
            } else if v == sink {
                bottleneck = bottleneck.min(rem_demand[u - 1 - m]);
            } else if u > m {
                // backward arc demand -> supply cancels flow
                bottleneck = bottleneck.min(flow[v - 1][u - 1 - m]);
            }
            v = u;
        }

        let mut v = sink;
        while v != source {
            let u = parent[v];
            if u == source {
                let i = v - 1;
                rem_supply[i] -= bottleneck;
                if rem_supply[i] < CAP_EPS {
                    rem_supply[i] = 0.0;
                }
            } else if v == sink {
                let j = u - 1 - m;
                rem_demand[j] -= bottleneck;
                if rem_demand[j] < CAP_EPS {
                    rem_demand[j] = 0.0;
                }
            } else if u <= m {
                flow[u - 1][v - 1 - m] += bottleneck;
            } else {
                let (i, j) = (v - 1, u - 1 - m);
                flow[i][j] -= bottleneck;
                if flow[i][j] < CAP_EPS {
                    flow[i][j] = 0.0;
                }
            }
            v = u;
        }
        augmentations += 1;
    }

    Ok(FlowSolution {
        flow,
        supply_potential: (0..m).map(|i| pot[sup(i)]).collect(),
        demand_potential: (0..n).map(|j| pot[dem(j)]).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_supply_single_demand() {
        let s = solve(&[1.0], &[1.0], &[vec![2.5]]).unwrap();
        assert_eq!(s.flow, vec![vec![1.0]]);
    }

    #[test]
    fn picks_cheaper_assignment() {
        // crossing assignment costs 2, straight costs 20
        let cost = vec![vec![10.0, 1.0], vec![1.0, 10.0]];
        let s = solve(&[0.5, 0.5], &[0.5, 0.5], &cost).unwrap();
        assert_eq!(s.flow, vec![vec![0.0, 0.5], vec![0.5, 0.0]]);
    }

    #[test]
    fn needs_flow_cancellation() {
        // Greedy first path 0->0 (cost 0) must be partially undone.
        let cost = vec![vec![0.0, 1.0], vec![1.0, 100.0]];
        let s = solve(&[0.5, 0.5], &[0.5, 0.5], &cost).unwrap();
        let total: f64 = (0..2).flat_map(|i| (0..2).map(move |j| (i, j))).map(|(i, j)| s.flow[i][j] * cost[i][j]).sum();
        assert!((total - 1.0).abs() < 1e-15, "cost {total}");
        for i in 0..2 {
            for j in 0..2 {
                let reduced = cost[i][j] + s.supply_potential[i] - s.demand_potential[j];
                assert!(reduced >= -1e-12);
            }
        }
    }
}
