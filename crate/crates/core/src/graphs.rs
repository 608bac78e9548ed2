//! Cycle graphs, classical random-walk transition matrices, and the classical
//! evolution used as the incoherent reference dynamics.
//!
//! Convention: probability vectors are columns and evolution is `p ← S p`, so
//! the transition matrix is column-stochastic with `S[i][j] = A[i][j] / d_j`
//! (normalized by the source-node degree).

use ndarray::{Array1, Array2};

use crate::{Error, Result};

/// Undirected, unweighted graph given by its adjacency matrix.
#[derive(Debug, Clone)]
pub struct Graph {
    adjacency: Array2<u8>,
    degrees: Vec<usize>,
}

impl Graph {
    /// Build a graph from an adjacency matrix, validating symmetry, a zero
    /// diagonal, and 0/1 entries.
    pub fn from_adjacency(adjacency: Array2<u8>) -> Result<Self> {
        let n = adjacency.nrows();
        if adjacency.ncols() != n {
            return Err(Error::InvalidGraph("adjacency must be square".into()));
        }
        for i in 0..n {
            if adjacency[[i, i]] != 0 {
                return Err(Error::InvalidGraph(format!("nonzero diagonal at node {i}")));
            }
            for j in 0..n {
                if adjacency[[i, j]] > 1 {
                    return Err(Error::InvalidGraph("entries must be 0 or 1".into()));
                }
                if adjacency[[i, j]] != adjacency[[j, i]] {
                    return Err(Error::InvalidGraph(format!(
                        "adjacency not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let degrees: Vec<usize> = (0..n)
            .map(|i| adjacency.row(i).iter().map(|&a| a as usize).sum())
            .collect();
        Ok(Self { adjacency, degrees })
    }

    pub fn n_nodes(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn adjacency(&self) -> &Array2<u8> {
        &self.adjacency
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    /// True when every node can reach every other node.
    pub fn is_connected(&self) -> bool {
        let n = self.n_nodes();
        if n == 0 {
            return false;
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for u in 0..n {
                if self.adjacency[[v, u]] == 1 && !seen[u] {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

/// Column-stochastic matrix: every column sums to 1.
#[derive(Debug, Clone)]
pub struct StochasticMatrix {
    entries: Array2<f64>,
}

impl StochasticMatrix {
    /// Validate non-negativity and column sums (tolerance 1e-12).
    pub fn new(entries: Array2<f64>) -> Result<Self> {
        let n = entries.nrows();
        if entries.ncols() != n {
            return Err(Error::Shape("stochastic matrix must be square".into()));
        }
        for j in 0..n {
            let mut sum = 0.0;
            for i in 0..n {
                let e = entries[[i, j]];
                if e < 0.0 {
                    return Err(Error::Parameter(format!("negative entry at ({i}, {j})")));
                }
                sum += e;
            }
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::Parameter(format!(
                    "column {j} sums to {sum}, expected 1"
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }
}

/// Non-negative vector summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector {
    probs: Array1<f64>,
}

impl ProbabilityVector {
    pub fn new(probs: Array1<f64>) -> Result<Self> {
        let sum: f64 = probs.sum();
        if probs.iter().any(|&p| p < 0.0) {
            return Err(Error::Parameter("negative probability".into()));
        }
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::Parameter(format!("probabilities sum to {sum}")));
        }
        Ok(Self { probs })
    }

    /// Point mass at `node`.
    pub fn delta(n: usize, node: usize) -> Self {
        let mut probs = Array1::zeros(n);
        probs[node] = 1.0;
        Self { probs }
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            probs: Array1::from_elem(n, 1.0 / n as f64),
        }
    }

    pub fn probs(&self) -> &Array1<f64> {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        self.probs.as_slice().expect("contiguous")
    }
}

/// Cycle graph: node `i` adjacent to `(i ± 1) mod n`.
pub fn cycle_graph(n: usize) -> Result<Graph> {
    if n < 3 {
        return Err(Error::InvalidGraph(format!(
            "cycle graph needs at least 3 nodes, got {n}"
        )));
    }
    let mut adjacency = Array2::<u8>::zeros((n, n));
    for i in 0..n {
        adjacency[[i, (i + 1) % n]] = 1;
        adjacency[[i, (i + n - 1) % n]] = 1;
    }
    Graph::from_adjacency(adjacency)
}

/// Column-stochastic hop matrix of the graph: `S[i][j] = A[i][j] / d_j`.
pub fn transition_matrix(g: &Graph) -> Result<StochasticMatrix> {
    let n = g.n_nodes();
    if let Some(node) = g.degrees().iter().position(|&d| d == 0) {
        return Err(Error::InvalidGraph(format!("isolated node {node}")));
    }
    if !g.is_connected() {
        return Err(Error::InvalidGraph("graph is not connected".into()));
    }
    let mut entries = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let dj = g.degrees()[j] as f64;
        for i in 0..n {
            entries[[i, j]] = g.adjacency()[[i, j]] as f64 / dj;
        }
    }
    StochasticMatrix::new(entries)
}

/// One step of the classical random walk: `p ← S p`.
pub fn crw_step(p: &ProbabilityVector, s: &StochasticMatrix) -> Result<ProbabilityVector> {
    if p.len() != s.dim() {
        return Err(Error::Shape(format!(
            "vector of length {} vs matrix of dim {}",
            p.len(),
            s.dim()
        )));
    }
    let next = s.entries().dot(p.probs());
    // Mass is conserved by column-stochasticity; renormalize roundoff only.
    let sum: f64 = next.sum();
    ProbabilityVector::new(next / sum)
}

/// Degree-proportional stationary distribution `d_i / Σ_j d_j`; uniform on
/// regular graphs.
pub fn stationary_distribution(g: &Graph) -> Result<ProbabilityVector> {
    if !g.is_connected() {
        return Err(Error::InvalidGraph("graph is not connected".into()));
    }
    let total: usize = g.degrees().iter().sum();
    let probs = Array1::from_iter(g.degrees().iter().map(|&d| d as f64 / total as f64));
    ProbabilityVector::new(probs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn cycle_adjacency_row_zero() {
        let g = cycle_graph(8).unwrap();
        for j in 0..8 {
            let want = u8::from(j == 1 || j == 7);
            assert_eq!(g.adjacency()[[0, j]], want, "column {j}");
        }
    }

    #[test]
    fn cycle_is_two_regular() {
        let g = cycle_graph(8).unwrap();
        assert!(g.degrees().iter().all(|&d| d == 2));
    }

    #[test]
    fn cycle_three_is_triangle() {
        let g = cycle_graph(3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = u8::from(i != j);
                assert_eq!(g.adjacency()[[i, j]], want);
            }
        }
    }

    #[test]
    fn cycle_too_small_rejected() {
        assert!(matches!(cycle_graph(2), Err(Error::InvalidGraph(_))));
    }

    #[test]
    fn transition_matrix_cycle_entries() {
        let s = transition_matrix(&cycle_graph(8).unwrap()).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                let e = s.entries()[[i, j]];
                if e != 0.0 {
                    assert_eq!(e, 0.5);
                }
            }
        }
    }

    #[test]
    fn transition_matrix_triangle_entries() {
        let s = transition_matrix(&cycle_graph(3).unwrap()).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 0.0 } else { 0.5 };
                assert_eq!(s.entries()[[i, j]], want);
            }
        }
    }

    #[test]
    fn transition_matrix_cycle_is_circulant() {
        let s = transition_matrix(&cycle_graph(8).unwrap()).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                let a = s.entries()[[i, j]];
                let b = s.entries()[[(i + 1) % 8, (j + 1) % 8]];
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn transition_matrix_rejects_isolated_node() {
        let mut adj = Array2::<u8>::zeros((3, 3));
        adj[[0, 1]] = 1;
        adj[[1, 0]] = 1;
        let g = Graph::from_adjacency(adj).unwrap();
        assert!(matches!(transition_matrix(&g), Err(Error::InvalidGraph(_))));
    }

    #[test]
    fn crw_one_hop_from_delta() {
        let g = cycle_graph(8).unwrap();
        let s = transition_matrix(&g).unwrap();
        let p = crw_step(&ProbabilityVector::delta(8, 0), &s).unwrap();
        for i in 0..8 {
            let want = if i == 1 || i == 7 { 0.5 } else { 0.0 };
            assert!((p.probs()[i] - want).abs() < 1e-15);
        }
    }

    #[test]
    fn crw_uniform_is_fixed_point() {
        let g = cycle_graph(8).unwrap();
        let s = transition_matrix(&g).unwrap();
        let p = crw_step(&ProbabilityVector::uniform(8), &s).unwrap();
        for i in 0..8 {
            assert!((p.probs()[i] - 0.125).abs() < 1e-15);
        }
    }

    // Two hops from node 0 visit four equally likely paths:
    // 0→1→0, 0→1→2, 0→7→0, 0→7→6, giving {0: 1/2, 2: 1/4, 6: 1/4}.
    #[test]
    fn crw_two_hops_enumerated() {
        let g = cycle_graph(8).unwrap();
        let s = transition_matrix(&g).unwrap();
        let p1 = crw_step(&ProbabilityVector::delta(8, 0), &s).unwrap();
        let p2 = crw_step(&p1, &s).unwrap();
        let want = [0.5, 0.0, 0.25, 0.0, 0.0, 0.0, 0.25, 0.0];
        for i in 0..8 {
            assert!((p2.probs()[i] - want[i]).abs() < 1e-15, "node {i}");
        }
    }

    #[test]
    fn crw_rejects_dimension_mismatch() {
        let s = transition_matrix(&cycle_graph(8).unwrap()).unwrap();
        let p = ProbabilityVector::delta(5, 0);
        assert!(matches!(crw_step(&p, &s), Err(Error::Shape(_))));
    }

    #[test]
    fn stationary_uniform_on_cycle() {
        let pi = stationary_distribution(&cycle_graph(8).unwrap()).unwrap();
        for i in 0..8 {
            assert!((pi.probs()[i] - 0.125).abs() < 1e-15);
        }
    }

    #[test]
    fn stationary_uniform_on_triangle() {
        let pi = stationary_distribution(&cycle_graph(3).unwrap()).unwrap();
        for i in 0..3 {
            assert!((pi.probs()[i] - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    // Path on 3 nodes has degrees (1, 2, 1), so d_i / Σ d_j = (1/4, 1/2, 1/4).
    #[test]
    fn stationary_on_path_graph() {
        let mut adj = Array2::<u8>::zeros((3, 3));
        adj[[0, 1]] = 1;
        adj[[1, 0]] = 1;
        adj[[1, 2]] = 1;
        adj[[2, 1]] = 1;
        let g = Graph::from_adjacency(adj).unwrap();
        let pi = stationary_distribution(&g).unwrap();
        assert_eq!(pi.probs()[0], 0.25);
        assert_eq!(pi.probs()[1], 0.5);
        assert_eq!(pi.probs()[2], 0.25);
    }

    #[test]
    fn stationary_is_crw_fixed_point() {
        for n in [3usize, 5, 8] {
            let g = cycle_graph(n).unwrap();
            let s = transition_matrix(&g).unwrap();
            let pi = stationary_distribution(&g).unwrap();
            let next = crw_step(&pi, &s).unwrap();
            for i in 0..n {
                assert!((next.probs()[i] - pi.probs()[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn crw_step_preserves_mass_on_random_stochastic_matrices() {
        let mut rng = crate::rng::seeded(2024);
        for _ in 0..100 {
            let n = rng.gen_range(2..=16);
            let mut entries = Array2::<f64>::zeros((n, n));
            for j in 0..n {
                let mut col: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
                let sum: f64 = col.iter().sum();
                for c in col.iter_mut() {
                    *c /= sum;
                }
                // Push roundoff onto one entry so the column sums exactly.
                let partial: f64 = col[..n - 1].iter().sum();
                col[n - 1] = 1.0 - partial;
                for i in 0..n {
                    entries[[i, j]] = col[i];
                }
            }
            let s = StochasticMatrix::new(entries).unwrap();
            let mut p = ProbabilityVector::delta(n, rng.gen_range(0..n));
            for _ in 0..5 {
                p = crw_step(&p, &s).unwrap();
            }
            let sum: f64 = p.probs().sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }

    // Even cycles are bipartite: p_t oscillates and never converges pointwise,
    // but the running average does.
    #[test]
    fn cesaro_average_converges_on_even_cycle() {
        let g = cycle_graph(8).unwrap();
        let s = transition_matrix(&g).unwrap();
        let t_max = 10_000;
        let mut p = ProbabilityVector::delta(8, 0);
        let mut acc = [0.0f64; 8];
        for _ in 0..t_max {
            for i in 0..8 {
                acc[i] += p.probs()[i];
            }
            p = crw_step(&p, &s).unwrap();
        }
        let l1: f64 = acc
            .iter()
            .map(|a| (a / t_max as f64 - 0.125).abs())
            .sum();
        assert!(l1 < 1e-3, "Cesàro L1 distance {l1}");
    }
}
