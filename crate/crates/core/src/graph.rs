//! Dense directed weighted graphs and the scalar statistics used by the
//! evaluation pipeline.
//!
//! A graph is a square nonnegative weight matrix; an edge exists iff its
//! weight is strictly positive. All structural statistics (density,
//! reciprocity, degrees) are computed on the binarized view.

use crate::error::GraphError;
use ndarray::Array2;

/// A directed weighted graph over a fixed node set.
///
/// Immutable after construction; self-loops are permitted by the type but
/// absent from all synthetic data.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectedGraph {
    n: usize,
    weights: Array2<f64>,
}

/// Empirical distribution of node degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeDistribution {
    /// Sorted distinct degrees with nonzero probability.
    pub support: Vec<usize>,
    /// Probability of each support point; sums to 1.
    pub probabilities: Vec<f64>,
}

impl DirectedGraph {
    /// Builds a graph from an explicit edge list.
    ///
    /// Duplicate (source, target) entries, out-of-range endpoints, and
    /// negative weights are rejected.
    pub fn new(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::TooFewNodes { n, min: 1 });
        }
        let mut weights = Array2::zeros((n, n));
        let mut seen = vec![false; n * n];
        for &(src, dst, w) in edges {
            if src >= n {
                return Err(GraphError::IndexOutOfRange { index: src, n });
            }
            if dst >= n {
                return Err(GraphError::IndexOutOfRange { index: dst, n });
            }
            if w < 0.0 {
                return Err(GraphError::NegativeWeight { src, dst, weight: w });
            }
            if seen[src * n + dst] {
                return Err(GraphError::DuplicateEdge { src, dst });
            }
            seen[src * n + dst] = true;
            weights[[src, dst]] = w;
        }
        Ok(Self { n, weights })
    }

    /// Wraps an existing weight matrix, validating squareness and sign.
    pub fn from_weights(weights: Array2<f64>) -> Result<Self, GraphError> {
        let (rows, cols) = weights.dim();
        if rows != cols {
            return Err(GraphError::NotSquare { rows, cols });
        }
        if rows == 0 {
            return Err(GraphError::TooFewNodes { n: 0, min: 1 });
        }
        for ((i, j), &w) in weights.indexed_iter() {
            if w < 0.0 {
                return Err(GraphError::NegativeWeight { src: i, dst: j, weight: w });
            }
        }
        Ok(Self { n: rows, weights })
    }

    /// An edgeless graph on `n` nodes.
    pub fn empty(n: usize) -> Self {
        Self { n, weights: Array2::zeros((n, n)) }
    }

    /// Node count.
    pub fn n(&self) -> usize {
        self.n
    }

    /// The weight matrix (row i, column j = weight of edge i -> j).
    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    /// Weight of edge `src -> dst`.
    pub fn weight(&self, src: usize, dst: usize) -> f64 {
        self.weights[[src, dst]]
    }

    /// True iff the edge has strictly positive weight.
    pub fn has_edge(&self, src: usize, dst: usize) -> bool {
        self.weights[[src, dst]] > 0.0
    }

    /// Iterates over edges as (source, target, weight) in row-major order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.weights
            .indexed_iter()
            .filter(|(_, &w)| w > 0.0)
            .map(|((i, j), &w)| (i, j, w))
    }

    /// Number of edges (strictly positive entries, self-loops included).
    pub fn edge_count(&self) -> usize {
        self.weights.iter().filter(|&&w| w > 0.0).count()
    }
}

/// Replaces every weight above `threshold` with 1 and the rest with 0.
pub fn binarize(g: &DirectedGraph, threshold: f64) -> Result<DirectedGraph, GraphError> {
    if threshold < 0.0 {
        return Err(GraphError::NegativeThreshold(threshold));
    }
    let weights = g.weights.mapv(|w| if w > threshold { 1.0 } else { 0.0 });
    Ok(DirectedGraph { n: g.n, weights })
}

/// Fraction of possible off-diagonal edges that are present.
pub fn density(g: &DirectedGraph) -> Result<f64, GraphError> {
    if g.n < 2 {
        return Err(GraphError::TooFewNodes { n: g.n, min: 2 });
    }
    let off_diag = g.edges().filter(|&(i, j, _)| i != j).count();
    Ok(off_diag as f64 / (g.n * (g.n - 1)) as f64)
}

/// Fraction of edges whose reverse edge is also present.
///
/// Undefined (an error) on an edgeless graph so that aggregate reports can
/// flag it instead of silently averaging in a zero.
pub fn reciprocity(g: &DirectedGraph) -> Result<f64, GraphError> {
    let mut edges = 0usize;
    let mut reciprocal = 0usize;
    for (i, j, _) in g.edges() {
        edges += 1;
        if g.has_edge(j, i) {
            reciprocal += 1;
        }
    }
    if edges == 0 {
        return Err(GraphError::EdgelessGraph);
    }
    Ok(reciprocal as f64 / edges as f64)
}

/// Mean total degree: 2|E| / n on the binarized view.
pub fn average_degree(g: &DirectedGraph) -> f64 {
    2.0 * g.edge_count() as f64 / g.n as f64
}

/// Total (in + out) degree of each node on the binarized view.
pub fn total_degrees(g: &DirectedGraph) -> Vec<usize> {
    let mut deg = vec![0usize; g.n];
    for (i, j, _) in g.edges() {
        deg[i] += 1;
        deg[j] += 1;
    }
    deg
}

/// In-degree of each node on the binarized view.
pub fn in_degrees(g: &DirectedGraph) -> Vec<usize> {
    let mut deg = vec![0usize; g.n];
    for (_, j, _) in g.edges() {
        deg[j] += 1;
    }
    deg
}

/// Empirical distribution of total node degree.
pub fn degree_histogram(g: &DirectedGraph) -> DegreeDistribution {
    DegreeDistribution::from_degrees(&total_degrees(g))
}

impl DegreeDistribution {
    /// Empirical distribution of a list of observed degrees.
    pub fn from_degrees(degrees: &[usize]) -> Self {
        let mut counts = std::collections::BTreeMap::new();
        for &d in degrees {
            *counts.entry(d).or_insert(0usize) += 1;
        }
        let total = degrees.len() as f64;
        let support: Vec<usize> = counts.keys().copied().collect();
        let probabilities = counts.values().map(|&c| c as f64 / total).collect();
        Self { support, probabilities }
    }

    /// Expected degree under the distribution.
    pub fn mean(&self) -> f64 {
        self.support
            .iter()
            .zip(&self.probabilities)
            .map(|(&d, &p)| d as f64 * p)
            .sum()
    }

    /// Checks the distribution invariants (sorted support, mass 1).
    pub fn is_valid(&self) -> bool {
        self.support.len() == self.probabilities.len()
            && self.support.windows(2).all(|w| w[0] < w[1])
            && self.probabilities.iter().all(|&p| p >= 0.0)
            && (self.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-9
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_edges(pairs: &[(usize, usize)]) -> Vec<(usize, usize, f64)> {
        pairs.iter().map(|&(i, j)| (i, j, 1.0)).collect()
    }

    #[test]
    fn new_graph_empty_is_all_zero() {
        let g = DirectedGraph::new(2, &[]).unwrap();
        assert_eq!(g.weights(), &Array2::<f64>::zeros((2, 2)));
    }

    #[test]
    fn new_graph_places_exact_entries() {
        let g = DirectedGraph::new(3, &unit_edges(&[(0, 1), (1, 2)])).unwrap();
        assert_eq!(g.edge_count(), 2);
        assert_eq!(g.weight(0, 1), 1.0);
        assert_eq!(g.weight(1, 2), 1.0);
        assert_eq!(g.weights().sum(), 2.0);
    }

    #[test]
    fn new_graph_rejects_negative_weight() {
        let err = DirectedGraph::new(2, &[(0, 1, -0.5)]).unwrap_err();
        assert!(matches!(err, GraphError::NegativeWeight { .. }));
    }

    #[test]
    fn new_graph_rejects_out_of_range_and_duplicates() {
        assert!(matches!(
            DirectedGraph::new(2, &[(0, 2, 1.0)]).unwrap_err(),
            GraphError::IndexOutOfRange { index: 2, n: 2 }
        ));
        assert!(matches!(
            DirectedGraph::new(2, &unit_edges(&[(0, 1), (0, 1)])).unwrap_err(),
            GraphError::DuplicateEdge { src: 0, dst: 1 }
        ));
    }

    #[test]
    fn new_graph_round_trips_all_triples() {
        let edges = vec![(0, 1, 0.25), (2, 0, 3.5), (1, 1, 0.75)];
        let g = DirectedGraph::new(3, &edges).unwrap();
        let mut read: Vec<_> = g.edges().collect();
        read.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut want = edges.clone();
        want.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        assert_eq!(read, want);
    }

    #[test]
    fn binarize_thresholds_strictly() {
        let g = DirectedGraph::new(2, &[(0, 1, 0.7), (1, 0, 0.9), (0, 0, 0.2), (1, 1, 0.1)])
            .unwrap();
        let b = binarize(&g, 0.5).unwrap();
        assert_eq!(b.weight(0, 1), 1.0);
        assert_eq!(b.weight(1, 0), 1.0);
        assert_eq!(b.weight(0, 0), 0.0);
        assert_eq!(b.weight(1, 1), 0.0);

        // boundary: equal to threshold drops out
        let g = DirectedGraph::new(1, &[(0, 0, 0.5)]).unwrap();
        assert_eq!(binarize(&g, 0.5).unwrap().weight(0, 0), 0.0);

        // zero case
        let z = binarize(&DirectedGraph::empty(3), 0.5).unwrap();
        assert_eq!(z.edge_count(), 0);
    }

    #[test]
    fn density_counts_off_diagonal() {
        assert_eq!(density(&DirectedGraph::empty(5)).unwrap(), 0.0);

        let mut edges = Vec::new();
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    edges.push((i, j, 1.0));
                }
            }
        }
        let complete = DirectedGraph::new(4, &edges).unwrap();
        assert_eq!(density(&complete).unwrap(), 1.0);

        let g = DirectedGraph::new(3, &unit_edges(&[(0, 1), (1, 2)])).unwrap();
        assert!((density(&g).unwrap() - 2.0 / 6.0).abs() < 1e-12);

        assert!(density(&DirectedGraph::empty(1)).is_err());
    }

    #[test]
    fn reciprocity_counts_mutual_edges() {
        let g = DirectedGraph::new(2, &unit_edges(&[(0, 1), (1, 0)])).unwrap();
        assert_eq!(reciprocity(&g).unwrap(), 1.0);

        let g = DirectedGraph::new(3, &unit_edges(&[(0, 1), (1, 0), (1, 2)])).unwrap();
        assert!((reciprocity(&g).unwrap() - 2.0 / 3.0).abs() < 1e-12);

        let g = DirectedGraph::new(3, &unit_edges(&[(0, 1), (1, 2)])).unwrap();
        assert_eq!(reciprocity(&g).unwrap(), 0.0);

        assert_eq!(
            reciprocity(&DirectedGraph::empty(3)).unwrap_err(),
            GraphError::EdgelessGraph
        );
    }

    #[test]
    fn average_degree_matches_formula() {
        assert_eq!(average_degree(&DirectedGraph::empty(4)), 0.0);
        let g = DirectedGraph::new(2, &unit_edges(&[(0, 1)])).unwrap();
        assert_eq!(average_degree(&g), 1.0);
        let cycle = DirectedGraph::new(3, &unit_edges(&[(0, 1), (1, 2), (2, 0)])).unwrap();
        assert_eq!(average_degree(&cycle), 2.0);
    }

    #[test]
    fn degree_histogram_examples() {
        let empty = degree_histogram(&DirectedGraph::empty(4));
        assert_eq!(empty.support, vec![0]);
        assert_eq!(empty.probabilities, vec![1.0]);

        let g = DirectedGraph::new(3, &unit_edges(&[(0, 1), (1, 2)])).unwrap();
        let h = degree_histogram(&g);
        assert_eq!(h.support, vec![1, 2]);
        assert!((h.probabilities[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((h.probabilities[1] - 1.0 / 3.0).abs() < 1e-12);

        let cycle = DirectedGraph::new(3, &unit_edges(&[(0, 1), (1, 2), (2, 0)])).unwrap();
        let h = degree_histogram(&cycle);
        assert_eq!(h.support, vec![2]);
        assert_eq!(h.probabilities, vec![1.0]);
    }

    #[test]
    fn histogram_mean_matches_average_degree() {
        let g = DirectedGraph::new(
            5,
            &unit_edges(&[(0, 1), (1, 2), (2, 0), (3, 0), (0, 3), (4, 2)]),
        )
        .unwrap();
        let h = degree_histogram(&g);
        assert!(h.is_valid());
        assert!((h.mean() - average_degree(&g)).abs() < 1e-9);
    }

    #[test]
    fn binarize_is_idempotent() {
        let g = DirectedGraph::new(3, &[(0, 1, 0.9), (1, 2, 0.1), (2, 2, 5.0)]).unwrap();
        let once = binarize(&g, 0.4).unwrap();
        let twice = binarize(&once, 0.7).unwrap();
        assert_eq!(once, twice);
    }
}
