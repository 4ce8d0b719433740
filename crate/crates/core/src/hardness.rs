//! Executable form of the clique reduction.
//!
//! A graph on `n` vertices becomes an instance with `n` labels, uniform label
//! probabilities and an expert who never confuses adjacent vertices:
//! `C[y'][y] = 0` if `y'` and `y` are adjacent, otherwise `1 / N̂(y)`, where
//! `N̂(y)` counts the vertices not adjacent to `y`, `y` itself included.
//! On that instance the objective of a set `S` collapses to
//! `(1/n) Σ_{y∈S} 1 / N̂_S(y)`, which peaks exactly at maximum cliques.
//!
//! Objective values are exact rationals.

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};
use rand::Rng;

use crate::error::{Error, Result};
use crate::objective::expected_accuracy;
use crate::optimizer::{brute_force_set, greedy_set};
use crate::types::{validate_confusion, ConfusionMatrix, LabelId, PredictionSet, ProbVector, PROB_TOL};

pub type Rational = Ratio<i128>;

/// Default vertex cap for exhaustive routines.
pub const DEFAULT_CLIQUE_CAP: usize = 16;

/// Simple undirected graph without self loops.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    adj: Vec<bool>,
}

impl Graph {
    pub fn empty(n: usize) -> Self {
        Graph {
            n,
            adj: vec![false; n * n],
        }
    }

    /// Builds a graph from zero-based edges, rejecting self loops, repeated
    /// edges (in either orientation) and out-of-range vertices.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Graph::empty(n);
        for &(u, v) in edges {
            g.add_edge(u, v)?;
        }
        Ok(g)
    }

    pub fn add_edge(&mut self, u: usize, v: usize) -> Result<()> {
        for w in [u, v] {
            if w >= self.n {
                return Err(Error::VertexOutOfRange { vertex: w, n: self.n });
            }
        }
        if u == v {
            return Err(Error::SelfLoopRejected(u));
        }
        if self.adj[u * self.n + v] {
            return Err(Error::DuplicateEdgeRejected(u, v));
        }
        self.adj[u * self.n + v] = true;
        self.adj[v * self.n + u] = true;
        Ok(())
    }

    pub fn complete(n: usize) -> Self {
        let mut g = Graph::empty(n);
        for u in 0..n {
            for v in u + 1..n {
                g.add_edge(u, v).expect("fresh edge");
            }
        }
        g
    }

    /// Path `0 - 1 - ... - n-1`.
    pub fn path(n: usize) -> Self {
        let mut g = Graph::empty(n);
        for u in 1..n {
            g.add_edge(u - 1, u).expect("fresh edge");
        }
        g
    }

    pub fn petersen() -> Self {
        let mut edges = Vec::with_capacity(15);
        for i in 0..5 {
            edges.push((i, (i + 1) % 5)); // outer cycle
            edges.push((i, i + 5)); // spokes
            edges.push((5 + i, 5 + (i + 2) % 5)); // inner pentagram
        }
        Graph::from_edges(10, &edges).expect("petersen edges are simple")
    }

    /// Erdős–Rényi `G(n, p)`.
    pub fn erdos_renyi<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> Self {
        let mut g = Graph::empty(n);
        for u in 0..n {
            for v in u + 1..n {
                if rng.random::<f64>() < p {
                    g.add_edge(u, v).expect("fresh edge");
                }
            }
        }
        g
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_adjacent(&self, u: usize, v: usize) -> bool {
        self.adj[u * self.n + v]
    }

    /// Edges `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.n)
            .flat_map(|u| (u + 1..self.n).map(move |v| (u, v)))
            .filter(|&(u, v)| self.is_adjacent(u, v))
            .collect()
    }

    /// `N̂_S(y)`: members of `set` not adjacent to `y`, counting `y` if present.
    pub fn non_adjacent_within(&self, set: &PredictionSet, y: LabelId) -> usize {
        set.iter().filter(|v| !self.is_adjacent(v.0, y.0)).count()
    }

    pub fn is_clique(&self, set: &PredictionSet) -> bool {
        let m = set.members();
        m.iter()
            .enumerate()
            .all(|(i, u)| m[i + 1..].iter().all(|v| self.is_adjacent(u.0, v.0)))
    }

    fn check_set(&self, set: &PredictionSet) -> Result<()> {
        if set.is_empty() {
            return Err(Error::EmptySet);
        }
        set.check_bounds(self.n)
    }
}

/// The instance `(p_true, C)` encoding `g`.
pub fn clique_to_instance(g: &Graph) -> (ProbVector, ConfusionMatrix) {
    let n = g.vertex_count();
    let all = PredictionSet::full(n);
    let non_adjacent: Vec<usize> = (0..n).map(|y| g.non_adjacent_within(&all, LabelId(y))).collect();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|pred| {
            (0..n)
                .map(|truth| {
                    if g.is_adjacent(pred, truth) {
                        0.0
                    } else {
                        1.0 / non_adjacent[truth] as f64
                    }
                })
                .collect()
        })
        .collect();
    let c = validate_confusion(rows, PROB_TOL).expect("reduction columns sum to one");
    (ProbVector::uniform(n), c)
}

/// `(1/n) Σ_{y∈S} 1 / N̂_S(y)`.
pub fn graph_objective(set: &PredictionSet, g: &Graph) -> Result<Rational> {
    g.check_set(set)?;
    let sum = set.iter().fold(Rational::zero(), |acc, y| {
        acc + Rational::new(1, g.non_adjacent_within(set, y) as i128)
    });
    Ok(sum / Rational::from_integer(g.vertex_count() as i128))
}

pub fn rational_to_f64(r: &Rational) -> f64 {
    r.to_f64().expect("finite rational")
}

/// Whether the floating-point objective on the reduced instance agrees with
/// the graph form within `1e-12`.
pub fn reduction_consistency(set: &PredictionSet, g: &Graph) -> Result<bool> {
    let exact = rational_to_f64(&graph_objective(set, g)?);
    let (p, c) = clique_to_instance(g);
    Ok((expected_accuracy(set, &p, &c) - exact).abs() <= 1e-12)
}

/// Removes the member with the most non-neighbours inside the set (ties to the
/// smallest index). Never decreases [`graph_objective`].
pub fn peel_max_nonadjacent(set: &PredictionSet, g: &Graph) -> Result<PredictionSet> {
    g.check_set(set)?;
    let (victim, count) = set
        .iter()
        .map(|y| (y, g.non_adjacent_within(set, y)))
        .fold(None, |best: Option<(LabelId, usize)>, (y, c)| match best {
            Some((_, bc)) if bc >= c => best,
            _ => Some((y, c)),
        })
        .expect("nonempty set");
    if count <= 1 {
        return Err(Error::AlreadyClique);
    }
    Ok(set.without(victim))
}

/// Exact maximum clique by extension search: each branch only adds vertices
/// larger than the last one and adjacent to every chosen vertex.
pub fn max_clique_bruteforce(g: &Graph, cap: usize) -> Result<(usize, PredictionSet)> {
    let n = g.vertex_count();
    if n > cap {
        return Err(Error::GraphTooLarge { n, cap });
    }
    fn extend(g: &Graph, chosen: &mut Vec<usize>, candidates: &[usize], best: &mut Vec<usize>) {
        if chosen.len() > best.len() {
            best.clone_from(chosen);
        }
        if chosen.len() + candidates.len() <= best.len() {
            return;
        }
        for (i, &v) in candidates.iter().enumerate() {
            let next: Vec<usize> = candidates[i + 1..]
                .iter()
                .copied()
                .filter(|&w| g.is_adjacent(v, w))
                .collect();
            chosen.push(v);
            extend(g, chosen, &next, best);
            chosen.pop();
        }
    }
    let mut best = Vec::new();
    let all: Vec<usize> = (0..n).collect();
    extend(g, &mut Vec::new(), &all, &mut best);
    Ok((best.len(), PredictionSet::from_indices(&best)))
}

/// Maximum of [`graph_objective`] over every nonempty subset, with the first
/// maximizer in bitmask order.
pub fn max_graph_objective(g: &Graph, cap: usize) -> Result<(Rational, PredictionSet)> {
    let n = g.vertex_count();
    if n > cap {
        return Err(Error::GraphTooLarge { n, cap });
    }
    if n == 0 {
        return Err(Error::EmptySet);
    }
    let mut best: Option<(Rational, PredictionSet)> = None;
    for mask in 1u64..(1u64 << n) {
        let set = PredictionSet::new((0..n).filter(|&v| mask >> v & 1 == 1).map(LabelId));
        let value = graph_objective(&set, g)?;
        if best.as_ref().is_none_or(|(b, _)| value > *b) {
            best = Some((value, set));
        }
    }
    Ok(best.expect("n >= 1"))
}

/// Whether some set reaches objective `k / n`.
pub fn decide_threshold(g: &Graph, k: usize, cap: usize) -> Result<bool> {
    let (best, _) = max_graph_objective(g, cap)?;
    Ok(best >= Rational::new(k as i128, g.vertex_count() as i128))
}

/// Greedy versus exhaustive optimum on the reduced instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ReductionGap {
    pub greedy_value: f64,
    pub optimum_value: f64,
    pub ratio: f64,
}

pub fn reduction_gap(g: &Graph, max_labels: usize) -> Result<ReductionGap> {
    let (p, c) = clique_to_instance(g);
    let greedy = greedy_set(&p, &c)?;
    let (_, optimum_value) = brute_force_set(&p, &c, max_labels)?;
    Ok(ReductionGap {
        greedy_value: greedy.value,
        optimum_value,
        ratio: greedy.value / optimum_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    fn set(idx: &[usize]) -> PredictionSet {
        PredictionSet::from_indices(idx)
    }

    #[test]
    fn triangle_reduces_to_identity() {
        let (p, c) = clique_to_instance(&Graph::complete(3));
        assert_eq!(c, ConfusionMatrix::identity(3));
        assert_eq!(p, ProbVector::uniform(3));
    }

    #[test]
    fn path_columns() {
        let (_, c) = clique_to_instance(&Graph::path(3));
        assert_eq!(c.column(LabelId(0)), vec![0.5, 0.0, 0.5]);
        assert_eq!(c.column(LabelId(1)), vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn empty_graph_is_uniform_expert() {
        let n = 4;
        let (_, c) = clique_to_instance(&Graph::empty(n));
        assert!(c.rows().iter().flatten().all(|&v| v == 0.25));
    }

    #[test]
    fn objective_examples() {
        let g = Graph::path(4);
        assert_eq!(graph_objective(&set(&[1, 2]), &g).unwrap(), Rational::new(2, 4));
        let e = Graph::empty(5);
        assert_eq!(graph_objective(&set(&[0, 1, 2, 3, 4]), &e).unwrap(), Rational::new(1, 5));
        assert_eq!(graph_objective(&set(&[3]), &e).unwrap(), Rational::new(1, 5));
        assert!(matches!(graph_objective(&PredictionSet::empty(), &e), Err(Error::EmptySet)));
    }

    #[test]
    fn consistency_on_small_graphs() {
        for g in [Graph::complete(3), Graph::path(3)] {
            for mask in 1..8usize {
                let s = PredictionSet::new((0..3).filter(|v| mask >> v & 1 == 1).map(LabelId));
                assert!(reduction_consistency(&s, &g).unwrap());
            }
        }
    }

    #[test]
    fn peel_examples() {
        let e = Graph::empty(3);
        let s = set(&[0, 1, 2]);
        let peeled = peel_max_nonadjacent(&s, &e).unwrap();
        assert_eq!(peeled.indices(), vec![1, 2]);
        assert_eq!(graph_objective(&peeled, &e).unwrap(), Rational::new(1, 3));
        assert_eq!(graph_objective(&s, &e).unwrap(), Rational::new(1, 3));

        let p = Graph::path(3);
        let peeled = peel_max_nonadjacent(&set(&[0, 2]), &p).unwrap();
        assert_eq!(peeled.indices(), vec![2]);
        assert_eq!(graph_objective(&peeled, &p).unwrap(), Rational::new(1, 3));

        assert!(matches!(
            peel_max_nonadjacent(&set(&[0, 1, 2]), &Graph::complete(3)),
            Err(Error::AlreadyClique)
        ));
    }

    #[test]
    fn clique_oracle_examples() {
        assert_eq!(max_clique_bruteforce(&Graph::complete(5), 16).unwrap().0, 5);
        assert_eq!(max_clique_bruteforce(&Graph::path(3), 16).unwrap().0, 2);
        let pet = Graph::petersen();
        assert_eq!(pet.edges().len(), 15);
        let (k, witness) = max_clique_bruteforce(&pet, 16).unwrap();
        assert_eq!(k, 2);
        assert!(pet.is_clique(&witness));
        // independent triangle scan
        for a in 0..10 {
            for b in a + 1..10 {
                for c in b + 1..10 {
                    assert!(!(pet.is_adjacent(a, b) && pet.is_adjacent(b, c) && pet.is_adjacent(a, c)));
                }
            }
        }
        assert!(matches!(
            max_clique_bruteforce(&Graph::empty(17), 16),
            Err(Error::GraphTooLarge { n: 17, cap: 16 })
        ));
    }

    #[test]
    fn threshold_examples() {
        assert!(decide_threshold(&Graph::complete(3), 3, 16).unwrap());
        assert!(!decide_threshold(&Graph::path(3), 3, 16).unwrap());
        let mut rng = RngStream::new(3, "threshold");
        for _ in 0..5 {
            let g = Graph::erdos_renyi(6, 0.5, &mut rng);
            assert!(decide_threshold(&g, 1, 16).unwrap());
        }
    }

    #[test]
    fn edge_validation() {
        assert!(matches!(Graph::from_edges(3, &[(0, 0)]), Err(Error::SelfLoopRejected(0))));
        assert!(matches!(
            Graph::from_edges(3, &[(0, 1), (1, 0)]),
            Err(Error::DuplicateEdgeRejected(1, 0))
        ));
        assert!(matches!(
            Graph::from_edges(3, &[(0, 3)]),
            Err(Error::VertexOutOfRange { vertex: 3, n: 3 })
        ));
    }

    #[test]
    fn gap_on_triangle_is_exact() {
        let gap = reduction_gap(&Graph::complete(3), 20).unwrap();
        assert!((gap.ratio - 1.0).abs() < 1e-12);
        assert!((gap.optimum_value - 1.0).abs() < 1e-12);
    }
}
