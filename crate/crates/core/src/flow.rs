//! Max-weight integral buyer-to-seller assignment at unit price.
//!
//! Nodes are numbered source, buyers `1..=m`, sellers `m+1..=m+n`, sink.
//! Arc weights are unit-price purchase probabilities in fixed point, so the
//! optimum is computed exactly in integer arithmetic. The solver is
//! successive shortest paths on negated weights: Bellman-Ford for the first
//! potentials, then Dijkstra on reduced costs, one unit per augmentation.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::network::BipartiteMarket;

/// Fixed-point units per unit of weight.
pub const WEIGHT_SCALE: f64 = 1e9;

/// Purchase probability of a lone buyer facing one seller at price 1.
pub fn unit_price_weight(theta: f64) -> f64 {
    let x = theta - 1.0;
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn fixed_point_weight(theta: f64) -> i64 {
    (WEIGHT_SCALE * unit_price_weight(theta)).round() as i64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowArc {
    pub from: usize,
    pub to: usize,
    pub capacity: i64,
    pub weight: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowNetwork {
    pub buyers: usize,
    pub sellers: usize,
    /// Source arcs, then buyer-seller arcs in buyer-major order, then sink arcs.
    pub arcs: Vec<FlowArc>,
}

impl FlowNetwork {
    pub const SOURCE: usize = 0;

    pub fn node_count(&self) -> usize {
        self.buyers + self.sellers + 2
    }

    pub fn sink(&self) -> usize {
        self.buyers + self.sellers + 1
    }

    pub fn buyer_node(&self, k: usize) -> usize {
        1 + k
    }

    pub fn seller_node(&self, i: usize) -> usize {
        1 + self.buyers + i
    }

    /// `min{m, Σ c_i}`.
    pub fn target(&self) -> i64 {
        let supply: i64 = self.arcs.iter().filter(|a| a.to == self.sink()).map(|a| a.capacity).sum();
        supply.min(self.buyers as i64)
    }
}

pub fn build_flow_network(market: &BipartiteMarket) -> FlowNetwork {
    let (m, n) = (market.buyers(), market.sellers());
    let mut arcs: Vec<FlowArc> = (0..m).map(|k| FlowArc { from: 0, to: 1 + k, capacity: 1, weight: 0 }).collect();
    arcs.extend(market.visible_pairs().map(|(k, i)| FlowArc {
        from: 1 + k,
        to: 1 + m + i,
        capacity: 1,
        weight: fixed_point_weight(market.theta(k, i)),
    }));
    arcs.extend((0..n).map(|i| FlowArc {
        from: 1 + m + i,
        to: m + n + 1,
        capacity: market.capacity(i) as i64,
        weight: 0,
    }));
    FlowNetwork { buyers: m, sellers: n, arcs }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowAssignment {
    /// Seller assigned to each buyer.
    pub seller_of: Vec<Option<usize>>,
    /// Total weight in fixed-point units.
    pub weight_fixed: i64,
    pub units: i64,
    pub target: i64,
}

impl FlowAssignment {
    pub fn weight(&self) -> f64 {
        self.weight_fixed as f64 / WEIGHT_SCALE
    }

    /// Fewer units than `min{m, Σc}` could be routed (partial visibility).
    pub fn shortfall(&self) -> bool {
        self.units < self.target
    }
}

struct Residual {
    head: Vec<usize>,
    cap: Vec<i64>,
    cost: Vec<i64>,
    adj: Vec<Vec<usize>>,
}

impl Residual {
    fn new(net: &FlowNetwork) -> Self {
        let mut r = Self { head: vec![], cap: vec![], cost: vec![], adj: vec![vec![]; net.node_count()] };
        for a in &net.arcs {
            r.push(a.from, a.to, a.capacity, -a.weight);
            r.push(a.to, a.from, 0, a.weight);
        }
        r
    }

    fn push(&mut self, from: usize, to: usize, cap: i64, cost: i64) {
        self.adj[from].push(self.head.len());
        self.head.push(to);
        self.cap.push(cap);
        self.cost.push(cost);
    }

    /// Label-correcting distances from the source over arcs with capacity.
    fn bellman_ford(&self, source: usize) -> Vec<Option<i64>> {
        let mut dist = vec![None; self.adj.len()];
        dist[source] = Some(0);
        for _ in 0..self.adj.len() {
            let mut changed = false;
            for u in 0..self.adj.len() {
                let Some(du) = dist[u] else { continue };
                for &e in &self.adj[u] {
                    let v = self.head[e];
                    if self.cap[e] > 0 && dist[v].is_none_or(|dv| du + self.cost[e] < dv) {
                        dist[v] = Some(du + self.cost[e]);
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        dist
    }

    /// Dijkstra on reduced costs; returns distances and the arc entering each node.
    fn dijkstra(&self, source: usize, potential: &[i64]) -> (Vec<Option<i64>>, Vec<Option<usize>>) {
        let n = self.adj.len();
        let mut dist = vec![None; n];
        let mut via = vec![None; n];
        let mut heap = BinaryHeap::new();
        dist[source] = Some(0);
        heap.push(Reverse((0i64, source)));
        while let Some(Reverse((d, u))) = heap.pop() {
            if dist[u] != Some(d) {
                continue;
            }
            for &e in &self.adj[u] {
                if self.cap[e] == 0 {
                    continue;
                }
                let v = self.head[e];
                let reduced = self.cost[e] + potential[u] - potential[v];
                debug_assert!(reduced >= 0);
                let nd = d + reduced;
                if dist[v].is_none_or(|dv| nd < dv) {
                    dist[v] = Some(nd);
                    via[v] = Some(e);
                    heap.push(Reverse((nd, v)));
                }
            }
        }
        (dist, via)
    }
}

/// Maximum-weight flow of `min{m, Σc}` units, or as many as visibility allows.
pub fn max_weight_flow(net: &FlowNetwork) -> FlowAssignment {
    let source = FlowNetwork::SOURCE;
    let sink = net.sink();
    let target = net.target();
    let mut res = Residual::new(net);

    let initial = res.bellman_ford(source);
    let far = initial.iter().flatten().copied().max().unwrap_or(0);
    let mut potential: Vec<i64> = initial.iter().map(|d| d.unwrap_or(far)).collect();

    let mut units = 0;
    while units < target {
        let (dist, via) = res.dijkstra(source, &potential);
        if dist[sink].is_none() {
            break;
        }
        for (p, d) in potential.iter_mut().zip(&dist) {
            if let Some(d) = d {
                *p += d;
            }
        }
        let mut v = sink;
        while v != source {
            let e = via[v].expect("path arc");
            res.cap[e] -= 1;
            res.cap[e ^ 1] += 1;
            v = res.head[e ^ 1];
        }
        units += 1;
    }

    let mut seller_of = vec![None; net.buyers];
    let mut weight_fixed = 0;
    for (idx, a) in net.arcs.iter().enumerate() {
        let is_pair = a.from != source && a.to != sink;
        if is_pair && res.cap[2 * idx] == 0 {
            seller_of[a.from - 1] = Some(a.to - 1 - net.buyers);
            weight_fixed += a.weight;
        }
    }
    FlowAssignment { seller_of, weight_fixed, units, target }
}
