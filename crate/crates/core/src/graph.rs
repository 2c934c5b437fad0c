//! Finite graphs materialized from graphons.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graphon::{cell_average, Graphon, StepGraphon};
use crate::io;

/// Largest node count stored as a dense matrix.
pub const MAX_NODES: usize = 8192;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Deterministic,
    Sampled { seed: u64 },
}

/// Dense symmetric weight matrix on `n` nodes. Diagonal entries are kept.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    n: usize,
    weights: Vec<f64>,
    provenance: Provenance,
}

impl WeightedGraph {
    /// Wraps an arbitrary symmetric matrix with entries in `[−1, 1]`.
    pub fn from_matrix(n: usize, weights: Vec<f64>) -> Result<Self> {
        check_capacity(n)?;
        let step = StepGraphon::new(n, weights)?;
        Ok(Self::from_step(step))
    }

    pub fn from_step(step: StepGraphon) -> Self {
        Self {
            n: step.n(),
            weights: step.values().to_vec(),
            provenance: Provenance::Deterministic,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.weights[i * self.n..(i + 1) * self.n]
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.weight(i, j) != 0.0
    }

    /// Fraction of unordered pairs `i < j` joined by an edge.
    pub fn edge_density(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let mut count = 0usize;
        for i in 0..self.n {
            for j in i + 1..self.n {
                if self.has_edge(i, j) {
                    count += 1;
                }
            }
        }
        count as f64 / (self.n * (self.n - 1) / 2) as f64
    }

    /// The weight matrix as a step graphon on `n` cells.
    pub fn to_step(&self) -> StepGraphon {
        StepGraphon::new(self.n, self.weights.clone()).expect("graph weights satisfy step invariants")
    }

    pub fn to_csv(&self) -> String {
        io::matrix_to_csv(self.n, &self.weights)
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let (n, values) = io::matrix_from_csv(text)?;
        Self::from_matrix(n, values)
    }
}

fn check_capacity(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter("graph needs n >= 1".into()));
    }
    if n > MAX_NODES {
        return Err(Error::Capacity {
            what: "nodes",
            value: n,
            limit: MAX_NODES,
        });
    }
    Ok(())
}

/// `G(W, X_n)`: weights are the cell averages `W_{n,ij}`.
pub fn deterministic_graph(w: &Graphon, n: usize) -> Result<WeightedGraph> {
    check_capacity(n)?;
    Ok(WeightedGraph::from_step(cell_average(w, n)?))
}

/// `G_r(X_n, W)`: each pair `{i, j}`, `i ≤ j`, is an edge with probability `W_{n,ij}`.
///
/// Row `i` draws from the ChaCha8 stream `i` of the generator seeded by
/// `seed`, one uniform per `j ≥ i`, so rows can be sampled in any order.
pub fn sample_w_random(w: &Graphon, n: usize, seed: u64) -> Result<WeightedGraph> {
    check_capacity(n)?;
    let probs = cell_average(w, n)?;
    for i in 0..n {
        for j in i..n {
            let p = probs.get(i, j);
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::NotAProbability {
                    row: i,
                    col: j,
                    value: p,
                });
            }
        }
    }
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            (i..n)
                .map(|j| {
                    let u: f64 = rng.random();
                    if u < probs.get(i, j) {
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    let mut weights = vec![0.0; n * n];
    for (i, row) in upper.iter().enumerate() {
        for (k, &e) in row.iter().enumerate() {
            weights[i * n + i + k] = e;
            weights[(i + k) * n + i] = e;
        }
    }
    Ok(WeightedGraph {
        n,
        weights,
        provenance: Provenance::Sampled { seed },
    })
}

/// 8-bit grayscale raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl GrayImage {
    /// Binary PGM (P5), maxval 255.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn black_fraction(&self) -> f64 {
        self.pixels.iter().filter(|&&p| p == 0).count() as f64 / self.pixels.len() as f64
    }
}

/// Intensity `255·(1 − |w|)`: black for weight 1, white for weight 0.
pub fn pixel_intensity(w: f64) -> u8 {
    (255.0 * (1.0 - w.abs().min(1.0))).round() as u8
}

/// Pixel picture of a row-major `n × n` matrix.
pub fn matrix_picture(n: usize, values: &[f64]) -> GrayImage {
    GrayImage {
        width: n,
        height: n,
        pixels: values.iter().map(|&w| pixel_intensity(w)).collect(),
    }
}

pub fn pixel_picture(g: &WeightedGraph) -> GrayImage {
    matrix_picture(g.n, &g.weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_examples() {
        let g = deterministic_graph(&Graphon::constant(0.5).unwrap(), 3).unwrap();
        assert!(g.weights().iter().all(|&w| w == 0.5));
        assert_eq!(g.provenance(), Provenance::Deterministic);

        let w = Graphon::nearest_neighbor(0.25).unwrap();
        let g = deterministic_graph(&w, 4).unwrap();
        assert_eq!(g.weight(0, 0), 1.0);
        assert_eq!(g.weights(), cell_average(&w, 4).unwrap().values());
        assert!(!g.has_edge(0, 2));
        assert!(g.has_edge(0, 3));
    }

    #[test]
    fn deterministic_is_symmetric() {
        let g = deterministic_graph(&Graphon::small_world(0.1, 0.17).unwrap(), 33).unwrap();
        for i in 0..33 {
            for j in 0..33 {
                assert_eq!(g.weight(i, j), g.weight(j, i));
            }
        }
    }

    #[test]
    fn capacity_and_range_errors() {
        let w = Graphon::constant(0.5).unwrap();
        assert!(matches!(
            deterministic_graph(&w, MAX_NODES + 1),
            Err(Error::Capacity { .. })
        ));
        let neg = Graphon::constant(-0.2).unwrap();
        assert!(deterministic_graph(&neg, 3).is_ok());
        assert!(matches!(
            sample_w_random(&neg, 3, 1),
            Err(Error::NotAProbability { .. })
        ));
    }

    #[test]
    fn extreme_probabilities() {
        for seed in [0, 1, 99] {
            let full = sample_w_random(&Graphon::constant(1.0).unwrap(), 5, seed).unwrap();
            assert!(full.weights().iter().all(|&w| w == 1.0));
            let empty = sample_w_random(&Graphon::constant(0.0).unwrap(), 5, seed).unwrap();
            assert!(empty.weights().iter().all(|&w| w == 0.0));
        }
    }

    #[test]
    fn sampled_graph_is_symmetric_binary_and_reproducible() {
        let w = Graphon::small_world(0.2, 0.2).unwrap();
        let a = sample_w_random(&w, 50, 42).unwrap();
        let b = sample_w_random(&w, 50, 42).unwrap();
        let c = sample_w_random(&w, 50, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.weights(), c.weights());
        assert_eq!(a.provenance(), Provenance::Sampled { seed: 42 });
        for i in 0..50 {
            for j in 0..50 {
                assert_eq!(a.weight(i, j), a.weight(j, i));
                assert!(a.weight(i, j) == 0.0 || a.weight(i, j) == 1.0);
            }
        }
    }

    #[test]
    fn edge_density_concentrates() {
        let w = Graphon::constant(0.5).unwrap();
        let pairs = (1000 * 999 / 2) as f64;
        let band = 4.0 * (0.25 / pairs).sqrt();
        for seed in 0..10 {
            let g = sample_w_random(&w, 1000, seed).unwrap();
            let d = g.edge_density();
            assert!((d - 0.5).abs() <= band, "seed {seed}: density {d}");
        }
    }

    #[test]
    fn empirical_edge_frequencies_match_cell_averages() {
        let w = Graphon::small_world(0.1, 0.3).unwrap();
        let n = 5;
        let probs = cell_average(&w, n).unwrap();
        let seeds = 10_000;
        let mut counts = vec![0.0; n * n];
        for seed in 0..seeds {
            let g = sample_w_random(&w, n, seed).unwrap();
            for (c, &e) in counts.iter_mut().zip(g.weights()) {
                *c += e;
            }
        }
        for i in 0..n {
            for j in 0..n {
                let p = probs.get(i, j);
                let mean = counts[i * n + j] / seeds as f64;
                let se = (p * (1.0 - p) / seeds as f64).sqrt();
                assert!((mean - p).abs() <= 4.0 * se, "({i}, {j}): {mean} vs {p}");
            }
        }
    }

    #[test]
    fn pixel_pictures() {
        let full = sample_w_random(&Graphon::constant(1.0).unwrap(), 6, 0).unwrap();
        assert!(pixel_picture(&full).pixels.iter().all(|&p| p == 0));
        let empty = sample_w_random(&Graphon::constant(0.0).unwrap(), 6, 0).unwrap();
        assert!(pixel_picture(&empty).pixels.iter().all(|&p| p == 255));

        let g = deterministic_graph(&Graphon::nearest_neighbor(0.25).unwrap(), 64).unwrap();
        let img = pixel_picture(&g);
        for i in 0..64usize {
            for j in 0..64usize {
                let d = i.abs_diff(j);
                let d = d.min(64 - d);
                let px = img.pixels[i * 64 + j];
                if d < 16 {
                    assert_eq!(px, 0, "({i}, {j})");
                } else if d > 16 {
                    assert_eq!(px, 255, "({i}, {j})");
                } else {
                    // the band edge runs along the diagonal of these cells
                    assert_eq!(px, 128, "({i}, {j})");
                }
            }
        }
        let pgm = img.to_pgm();
        assert!(pgm.starts_with(b"P5\n64 64\n255\n"));
        assert_eq!(pgm.len(), "P5\n64 64\n255\n".len() + 64 * 64);
    }

    #[test]
    fn csv_round_trip() {
        let g = sample_w_random(&Graphon::constant(0.3).unwrap(), 7, 5).unwrap();
        let back = WeightedGraph::from_csv(&g.to_csv()).unwrap();
        assert_eq!(back.weights(), g.weights());
    }
}
