//! Undirected weighted graphs, Laplacian construction, random-graph
//! generation, and topology perturbation.

use nalgebra::DMatrix;
use rand::rngs::StdRng;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::seeding::derive_seed;

const GENERATION_RETRIES: usize = 64;
const PERTURBATION_RETRIES: usize = 100_000;

/// Connected undirected graph with nonnegative edge weights and no self-loops.
///
/// Immutable after construction; all invariants are checked by the
/// constructor.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    weights: DMatrix<f64>,
}

impl Graph {
    /// Builds a graph from a symmetric nonnegative weight matrix with zero
    /// diagonal; rejects disconnected graphs.
    pub fn from_weights(weights: DMatrix<f64>) -> Result<Self> {
        let n = weights.nrows();
        if weights.ncols() != n || n == 0 {
            return Err(Error::DimensionMismatch {
                expected: n.max(1),
                found: weights.ncols(),
            });
        }
        for i in 0..n {
            if weights[(i, i)] != 0.0 {
                return Err(Error::NonzeroDiagonal { vertex: i });
            }
            for j in (i + 1)..n {
                let w = weights[(i, j)];
                if w != weights[(j, i)] {
                    return Err(Error::AsymmetricWeights { row: i, col: j });
                }
                if w < 0.0 {
                    return Err(Error::NegativeWeight {
                        row: i,
                        col: j,
                        weight: w,
                    });
                }
            }
        }
        if !is_connected(&weights) {
            return Err(Error::DisconnectedGraph);
        }
        Ok(Self { weights })
    }

    pub fn n_vertices(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    /// Combinatorial Laplacian `L = diag(W 1) - W`.
    ///
    /// Symmetric positive semidefinite with zero row sums and nonpositive
    /// off-diagonal entries.
    pub fn laplacian(&self) -> DMatrix<f64> {
        build_laplacian(&self.weights)
    }

    /// Edges as `(i, j, weight)` with `i < j`, in row-major order.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let n = self.n_vertices();
        let mut out = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let w = self.weights[(i, j)];
                if w > 0.0 {
                    out.push((i, j, w));
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.edges().len()
    }

    /// Writes the graph as JSON (`{"n_vertices": ..., "edges": [[i, j, w], ...]}`).
    pub fn to_writer<W: Write>(&self, writer: W) -> Result<()> {
        let file = GraphFile {
            n_vertices: self.n_vertices(),
            edges: self.edges(),
        };
        serde_json::to_writer_pretty(writer, &file)
            .map_err(|e| Error::ParseError { line: 0, message: e.to_string() })
    }

    /// Reads a graph from the JSON edge-list format.
    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let file: GraphFile = serde_json::from_reader(reader)
            .map_err(|e| Error::ParseError { line: 0, message: e.to_string() })?;
        let mut weights = DMatrix::zeros(file.n_vertices, file.n_vertices);
        for &(i, j, w) in &file.edges {
            if i >= file.n_vertices || j >= file.n_vertices || i == j {
                return Err(Error::ParseError {
                    line: 0,
                    message: format!("invalid edge ({i}, {j})"),
                });
            }
            weights[(i, j)] = w;
            weights[(j, i)] = w;
        }
        Self::from_weights(weights)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_writer(std::fs::File::create(path)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_reader(std::fs::File::open(path)?)
    }
}

#[derive(Serialize, Deserialize)]
struct GraphFile {
    n_vertices: usize,
    edges: Vec<(usize, usize, f64)>,
}

/// `L = diag(W 1) - W` for a validated weight matrix.
pub fn build_laplacian(weights: &DMatrix<f64>) -> DMatrix<f64> {
    let n = weights.nrows();
    let mut lap = -weights.clone();
    for i in 0..n {
        lap[(i, i)] = weights.row(i).sum();
    }
    lap
}

fn is_connected(weights: &DMatrix<f64>) -> bool {
    let n = weights.nrows();
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    let mut count = 1;
    while let Some(u) = stack.pop() {
        for v in 0..n {
            if !seen[v] && weights[(u, v)] > 0.0 {
                seen[v] = true;
                count += 1;
                stack.push(v);
            }
        }
    }
    count == n
}

/// Watts-Strogatz small-world graph with unit edge weights.
///
/// Builds a ring lattice with `mean_degree / 2` neighbors per side; an odd
/// `mean_degree` adds a random near-perfect matching on top so every vertex
/// gains one extra incident edge. Lattice edges are then rewired with
/// probability `rewire_prob`. Disconnected draws are regenerated from a
/// derived seed, up to a bounded retry budget.
pub fn watts_strogatz(
    n: usize,
    mean_degree: usize,
    rewire_prob: f64,
    seed: u64,
) -> Result<Graph> {
    if mean_degree < 2 || n <= mean_degree {
        return Err(Error::InvalidConfig(format!(
            "watts_strogatz requires n > mean_degree >= 2, got n={n}, mean_degree={mean_degree}"
        )));
    }
    if !(0.0..=1.0).contains(&rewire_prob) {
        return Err(Error::InvalidConfig(format!(
            "rewire probability must be in [0, 1], got {rewire_prob}"
        )));
    }
    for attempt in 0..GENERATION_RETRIES {
        let mut rng = StdRng::seed_from_u64(derive_seed(seed, attempt as u64, 0));
        let weights = ws_candidate(n, mean_degree, rewire_prob, &mut rng);
        if is_connected(&weights) {
            return Ok(Graph { weights });
        }
    }
    Err(Error::GenerationFailure { attempts: GENERATION_RETRIES })
}

fn ws_candidate(n: usize, mean_degree: usize, rewire_prob: f64, rng: &mut StdRng) -> DMatrix<f64> {
    let half = mean_degree / 2;
    let mut w = DMatrix::zeros(n, n);
    for u in 0..n {
        for j in 1..=half {
            let v = (u + j) % n;
            w[(u, v)] = 1.0;
            w[(v, u)] = 1.0;
        }
    }
    if mean_degree % 2 == 1 {
        // Random matching: each vertex gains at most one extra edge, so the
        // mean degree lands at 2*half + 1 up to parity.
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        let mut matched = vec![false; n];
        for &u in &order {
            if matched[u] {
                continue;
            }
            let candidates: Vec<usize> = (0..n)
                .filter(|&v| v != u && !matched[v] && w[(u, v)] == 0.0)
                .collect();
            if let Some(&v) = candidates.as_slice().choose(rng) {
                w[(u, v)] = 1.0;
                w[(v, u)] = 1.0;
                matched[u] = true;
                matched[v] = true;
            }
        }
    }
    // Classic rewiring pass over the lattice edges.
    for u in 0..n {
        for j in 1..=half {
            let v = (u + j) % n;
            if w[(u, v)] == 0.0 || rng.random::<f64>() >= rewire_prob {
                continue;
            }
            let candidates: Vec<usize> =
                (0..n).filter(|&t| t != u && w[(u, t)] == 0.0).collect();
            if let Some(&t) = candidates.as_slice().choose(rng) {
                w[(u, v)] = 0.0;
                w[(v, u)] = 0.0;
                w[(u, t)] = 1.0;
                w[(t, u)] = 1.0;
            }
        }
    }
    w
}

/// Removes `count` edges chosen uniformly at random, resampling the removal
/// set (bounded retries) until the remaining graph is connected.
///
/// Large removal counts on sparse graphs make connectivity-preserving
/// subsets rare, so the rejection loop works on an edge mask with an
/// adjacency-list reachability check rather than rebuilding the weight
/// matrix per attempt.
pub fn remove_edges(graph: &Graph, count: usize, seed: u64) -> Result<Graph> {
    let edges = graph.edges();
    if count >= edges.len() {
        return Err(Error::InvalidConfig(format!(
            "cannot remove {count} of {} edges",
            edges.len()
        )));
    }
    if count == 0 {
        return Ok(graph.clone());
    }
    let n = graph.n_vertices();
    let mut adjacency: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (idx, &(i, j, _)) in edges.iter().enumerate() {
        adjacency[i].push((j, idx));
        adjacency[j].push((i, idx));
    }
    let mut removed = vec![false; edges.len()];
    for attempt in 0..PERTURBATION_RETRIES {
        let mut rng = StdRng::seed_from_u64(derive_seed(seed, attempt as u64, 1));
        let chosen = rand::seq::index::sample(&mut rng, edges.len(), count);
        removed.fill(false);
        for idx in chosen.iter() {
            removed[idx] = true;
        }
        if connected_with_mask(&adjacency, &removed, n) {
            let mut weights = graph.weights().clone();
            for idx in chosen.iter() {
                let (i, j, _) = edges[idx];
                weights[(i, j)] = 0.0;
                weights[(j, i)] = 0.0;
            }
            return Ok(Graph { weights });
        }
    }
    Err(Error::PerturbationFailure { attempts: PERTURBATION_RETRIES })
}

fn connected_with_mask(
    adjacency: &[Vec<(usize, usize)>],
    removed: &[bool],
    n: usize,
) -> bool {
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    let mut reached = 1;
    while let Some(u) = stack.pop() {
        for &(v, edge) in &adjacency[u] {
            if !removed[edge] && !seen[v] {
                seen[v] = true;
                reached += 1;
                stack.push(v);
            }
        }
    }
    reached == n
}
