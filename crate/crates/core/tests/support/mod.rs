//! Test-only helpers shared by the integration targets.

#![allow(dead_code)]

use gkm_core::measure::{circle_distance, CircleMeasure};
use rand::Rng;

/// Optimal transport cost between two atomic measures, solved as a
/// min-cost flow with successive shortest paths (Bellman–Ford on the
/// residual graph). Independent of the CDF-based closed form.
pub fn lp_transport(mu: &CircleMeasure, eta: &CircleMeasure) -> f64 {
    let (a, b) = (mu.len(), eta.len());
    // nodes: 0 = source, 1..=a sources atoms, a+1..=a+b sink atoms, a+b+1 = sink
    let nodes = a + b + 2;
    let sink = nodes - 1;
    let mut edges: Vec<Edge> = Vec::new();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nodes];
    let mut add = |from: usize, to: usize, cap: f64, cost: f64, edges: &mut Vec<Edge>| {
        adj[from].push(edges.len());
        edges.push(Edge { to, cap, cost });
        adj[to].push(edges.len());
        edges.push(Edge { to: from, cap: 0.0, cost: -cost });
    };
    for (i, &m) in mu.masses().iter().enumerate() {
        add(0, 1 + i, m, 0.0, &mut edges);
    }
    for (j, &m) in eta.masses().iter().enumerate() {
        add(1 + a + j, sink, m, 0.0, &mut edges);
    }
    for (i, &p) in mu.positions().iter().enumerate() {
        for (j, &q) in eta.positions().iter().enumerate() {
            add(1 + i, 1 + a + j, f64::INFINITY, circle_distance(p, q), &mut edges);
        }
    }

    const EPS: f64 = 1e-15;
    let mut total = 0.0;
    let mut shipped = 0.0;
    while shipped < 1.0 - 1e-13 {
        let mut dist = vec![f64::INFINITY; nodes];
        let mut via = vec![usize::MAX; nodes];
        dist[0] = 0.0;
        for _ in 0..nodes {
            let mut changed = false;
            for v in 0..nodes {
                if dist[v].is_infinite() {
                    continue;
                }
                for &e in &adj[v] {
                    let edge = &edges[e];
                    if edge.cap > EPS && dist[v] + edge.cost < dist[edge.to] - 1e-15 {
                        dist[edge.to] = dist[v] + edge.cost;
                        via[edge.to] = e;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        if dist[sink].is_infinite() {
            break;
        }
        let mut push = f64::INFINITY;
        let mut v = sink;
        while v != 0 {
            let e = via[v];
            push = push.min(edges[e].cap);
            v = edges[e ^ 1].to;
        }
        let mut v = sink;
        while v != 0 {
            let e = via[v];
            edges[e].cap -= push;
            edges[e ^ 1].cap += push;
            v = edges[e ^ 1].to;
        }
        total += push * dist[sink];
        shipped += push;
    }
    total
}

struct Edge {
    to: usize,
    cap: f64,
    cost: f64,
}

/// Random measure with `1..=max_atoms` atoms and masses bounded away from 0.
pub fn random_measure<R: Rng>(rng: &mut R, max_atoms: usize) -> CircleMeasure {
    let k = rng.random_range(1..=max_atoms);
    let pos: Vec<f64> = (0..k).map(|_| rng.random::<f64>() * std::f64::consts::TAU).collect();
    let raw: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 0.05).collect();
    let total: f64 = raw.iter().sum();
    let mut masses: Vec<f64> = raw.iter().map(|m| m / total).collect();
    let drift = 1.0 - masses.iter().sum::<f64>();
    masses[0] += drift;
    CircleMeasure::new(pos, masses).expect("normalized by construction")
}
