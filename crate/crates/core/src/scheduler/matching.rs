//! Capacity-constrained max-weight bipartite matching of non-head vehicles
//! to heads, solved exactly as a min-cost flow.

use serde::{Deserialize, Serialize};

/// Relationship-strength tolerance for the shortest-path relaxations.
const EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchInstance {
    /// `weights[v][h]`: relationship of non-head `v` with head `h`, in `[0, 1]`.
    pub weights: Vec<Vec<f64>>,
    /// `zeta[v][h]`: whether the pair meets both time constraints.
    pub zeta: Vec<Vec<bool>>,
    /// Maximum members per head.
    pub capacity: usize,
}

impl MatchInstance {
    pub fn num_vehicles(&self) -> usize {
        self.weights.len()
    }

    pub fn num_heads(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    /// Effective edge weight `R * zeta`.
    pub fn edge(&self, v: usize, h: usize) -> f64 {
        if self.zeta[v][h] {
            self.weights[v][h]
        } else {
            0.0
        }
    }

    /// Objective of a set of pairs, summed in lexicographic pair order.
    pub fn objective(&self, pairs: &[(usize, usize)]) -> f64 {
        let mut sorted = pairs.to_vec();
        sorted.sort_unstable();
        sorted.iter().map(|&(v, h)| self.edge(v, h)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ClusterAssignment {
    /// `(vehicle, head)` index pairs, sorted.
    pub pairs: Vec<(usize, usize)>,
}

impl ClusterAssignment {
    pub fn head_of(&self, v: usize) -> Option<usize> {
        self.pairs.iter().find(|p| p.0 == v).map(|p| p.1)
    }

    pub fn members(&self, h: usize) -> Vec<usize> {
        self.pairs.iter().filter(|p| p.1 == h).map(|p| p.0).collect()
    }

    /// Each vehicle at most once, each head within capacity, no infeasible
    /// or worthless pair.
    pub fn violations(&self, inst: &MatchInstance) -> Vec<String> {
        let mut out = Vec::new();
        let mut per_vehicle = vec![0usize; inst.num_vehicles()];
        let mut per_head = vec![0usize; inst.num_heads()];
        for &(v, h) in &self.pairs {
            if v >= inst.num_vehicles() || h >= inst.num_heads() {
                out.push(format!("pair ({v}, {h}) out of bounds"));
                continue;
            }
            per_vehicle[v] += 1;
            per_head[h] += 1;
            if inst.edge(v, h) <= 0.0 {
                out.push(format!("pair ({v}, {h}) has zero weight"));
            }
        }
        for (v, &n) in per_vehicle.iter().enumerate() {
            if n > 1 {
                out.push(format!("vehicle {v} matched {n} times"));
            }
        }
        for (h, &n) in per_head.iter().enumerate() {
            if n > inst.capacity {
                out.push(format!("head {h} has {n} members, capacity {}", inst.capacity));
            }
        }
        out
    }
}

/// `t_h^train + delta`: how long a head waits for its members.
pub fn head_deadline(t_train_head: f64, delta: f64) -> f64 {
    t_train_head + delta
}

/// `zeta[v][h]` holds iff `t_train[v] + t_up[v][h]` fits both the link
/// lifetime and the head's deadline (inclusive).
pub fn compute_zeta(t_train: &[f64], t_up: &[Vec<f64>], llt: &[Vec<f64>], head_deadlines: &[f64]) -> Vec<Vec<bool>> {
    t_train
        .iter()
        .enumerate()
        .map(|(v, &tt)| {
            head_deadlines
                .iter()
                .enumerate()
                .map(|(h, &deadline)| {
                    let busy = tt + t_up[v][h];
                    busy <= llt[v][h] && busy <= deadline
                })
                .collect()
        })
        .collect()
}

struct Edge {
    to: usize,
    cap: i32,
    cost: f64,
    rev: usize,
}

struct FlowGraph {
    adj: Vec<Vec<Edge>>,
}

impl FlowGraph {
    fn new(n: usize) -> Self {
        FlowGraph {
            adj: (0..n).map(|_| Vec::new()).collect(),
        }
    }

    fn add_edge(&mut self, from: usize, to: usize, cap: i32, cost: f64) {
        let rev_from = self.adj[to].len();
        let rev_to = self.adj[from].len();
        self.adj[from].push(Edge { to, cap, cost, rev: rev_from });
        self.adj[to].push(Edge {
            to: from,
            cap: 0,
            cost: -cost,
            rev: rev_to,
        });
    }

    /// Bellman-Ford shortest path on the residual graph. Returns the path
    /// cost and `(node, edge)` predecessors.
    fn shortest_path(&self, source: usize, sink: usize) -> Option<(f64, Vec<Option<(usize, usize)>>)> {
        let n = self.adj.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut prev = vec![None; n];
        dist[source] = 0.0;
        for _ in 0..n {
            let mut changed = false;
            for u in 0..n {
                if dist[u].is_infinite() {
                    continue;
                }
                for (i, e) in self.adj[u].iter().enumerate() {
                    if e.cap > 0 && dist[u] + e.cost < dist[e.to] - EPS {
                        dist[e.to] = dist[u] + e.cost;
                        prev[e.to] = Some((u, i));
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        dist[sink].is_finite().then(|| (dist[sink], prev))
    }
}

/// Exact maximum of `sum R * zeta * m` subject to one head per vehicle and
/// `capacity` members per head. Pairs with zero weight are never matched.
///
/// Vehicles and heads become unit / `capacity` arcs from a source and into a
/// sink, pairs become unit arcs of cost `-R`. Successive shortest paths give
/// the min-cost flow for each flow value; the cost is convex in the flow, so
/// augmentation stops at the first path that no longer lowers it.
pub fn match_vehicles(inst: &MatchInstance) -> ClusterAssignment {
    let nv = inst.num_vehicles();
    let nh = inst.num_heads();
    if nv == 0 || nh == 0 || inst.capacity == 0 {
        return ClusterAssignment::default();
    }
    let source = 0;
    let sink = nv + nh + 1;
    let vehicle = |v: usize| 1 + v;
    let head = |h: usize| 1 + nv + h;
    let mut g = FlowGraph::new(nv + nh + 2);
    for v in 0..nv {
        g.add_edge(source, vehicle(v), 1, 0.0);
    }
    for v in 0..nv {
        for h in 0..nh {
            let w = inst.edge(v, h);
            if w > 0.0 {
                g.add_edge(vehicle(v), head(h), 1, -w);
            }
        }
    }
    for h in 0..nh {
        g.add_edge(head(h), sink, inst.capacity as i32, 0.0);
    }

    while let Some((cost, prev)) = g.shortest_path(source, sink) {
        if cost >= -EPS {
            break;
        }
        let mut node = sink;
        while node != source {
            let (u, i) = prev[node].expect("path reaches the sink");
            let rev = g.adj[u][i].rev;
            g.adj[u][i].cap -= 1;
            g.adj[node][rev].cap += 1;
            node = u;
        }
    }

    let mut pairs = Vec::new();
    for v in 0..nv {
        for e in &g.adj[vehicle(v)] {
            if e.to > nv && e.to <= nv + nh && e.cap == 0 && e.cost < 0.0 {
                pairs.push((v, e.to - nv - 1));
            }
        }
    }
    pairs.sort_unstable();
    ClusterAssignment { pairs }
}
