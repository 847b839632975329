//! Finite simple graphs, niceness, covers and the edge-list text format.

use std::collections::VecDeque;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default finite stand-in for "infinitely many adjacent vertices" in the
/// cover condition.
pub const DEFAULT_COVER_DEGREE: usize = 3;

/// A finite simple graph on vertices `0..n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "EdgeList", try_from = "EdgeList")]
pub struct Graph {
    adj: Vec<Vec<bool>>,
    labels: Option<Vec<String>>,
}

/// Serialized form of a [`Graph`].
#[derive(Serialize, Deserialize)]
struct EdgeList {
    n: usize,
    edges: Vec<(usize, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
}

impl From<Graph> for EdgeList {
    fn from(g: Graph) -> Self {
        EdgeList {
            n: g.n(),
            edges: g.edges(),
            labels: g.labels,
        }
    }
}

impl TryFrom<EdgeList> for Graph {
    type Error = Error;

    fn try_from(e: EdgeList) -> Result<Self> {
        let mut g = Graph::from_edges(e.n, &e.edges)?;
        if let Some(l) = e.labels {
            g.set_labels(l)?;
        }
        Ok(g)
    }
}

impl Graph {
    pub fn empty(n: usize) -> Self {
        Graph {
            adj: vec![vec![false; n]; n],
            labels: None,
        }
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Graph::empty(n);
        for &(u, v) in edges {
            g.add_edge(u, v)?;
        }
        Ok(g)
    }

    pub fn add_edge(&mut self, u: usize, v: usize) -> Result<()> {
        let n = self.n();
        if u >= n || v >= n {
            return Err(Error::Precondition(format!(
                "edge ({u},{v}) out of range for {n} vertices"
            )));
        }
        if u == v {
            return Err(Error::Precondition(format!("self-loop at {u}")));
        }
        self.adj[u][v] = true;
        self.adj[v][u] = true;
        Ok(())
    }

    /// Adds a vertex and returns its index.
    pub fn add_vertex(&mut self) -> usize {
        let n = self.n();
        for row in &mut self.adj {
            row.push(false);
        }
        self.adj.push(vec![false; n + 1]);
        if let Some(l) = &mut self.labels {
            l.push(n.to_string());
        }
        n
    }

    pub fn cycle(n: usize) -> Self {
        let edges: Vec<(usize, usize)> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Graph::from_edges(n, &edges).expect("cycle edges are valid")
    }

    pub fn path(n: usize) -> Self {
        let edges: Vec<(usize, usize)> = (1..n).map(|i| (i - 1, i)).collect();
        Graph::from_edges(n, &edges).expect("path edges are valid")
    }

    pub fn complete(n: usize) -> Self {
        let mut g = Graph::empty(n);
        for u in 0..n {
            for v in u + 1..n {
                g.adj[u][v] = true;
                g.adj[v][u] = true;
            }
        }
        g
    }

    /// Outer 5-cycle 0..5, inner pentagram 5..10, spokes i -- i+5.
    pub fn petersen() -> Self {
        let mut edges = Vec::new();
        for i in 0..5 {
            edges.push((i, (i + 1) % 5));
            edges.push((5 + i, 5 + (i + 2) % 5));
            edges.push((i, i + 5));
        }
        Graph::from_edges(10, &edges).expect("petersen edges are valid")
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn set_labels(&mut self, labels: Vec<String>) -> Result<()> {
        if labels.len() != self.n() {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for {} vertices",
                labels.len(),
                self.n()
            )));
        }
        self.labels = Some(labels);
        Ok(())
    }

    #[inline]
    pub fn adjacent(&self, u: usize, v: usize) -> bool {
        self.adj[u][v]
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.adj[v]
            .iter()
            .enumerate()
            .filter_map(|(u, &e)| e.then_some(u))
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].iter().filter(|&&e| e).count()
    }

    /// Edges `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.n();
        let mut out = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if self.adj[u][v] {
                    out.push((u, v));
                }
            }
        }
        out
    }

    /// Non-adjacent pairs `(u, v)` with `u < v`, in lexicographic order.
    pub fn non_edges(&self) -> Vec<(usize, usize)> {
        let n = self.n();
        let mut out = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if !self.adj[u][v] {
                    out.push((u, v));
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.edges().len()
    }

    pub fn degree_sequence(&self) -> Vec<usize> {
        let mut d: Vec<usize> = (0..self.n()).map(|v| self.degree(v)).collect();
        d.sort_unstable();
        d
    }

    /// Induced subgraph on `vertices`, renumbered in the given order.
    pub fn induced(&self, vertices: &[usize]) -> Graph {
        let mut g = Graph::empty(vertices.len());
        for (i, &a) in vertices.iter().enumerate() {
            for (j, &b) in vertices.iter().enumerate() {
                g.adj[i][j] = i != j && self.adj[a][b];
            }
        }
        g
    }

    /// Renames vertex `v` to `perm[v]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Graph> {
        let n = self.n();
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&x| x >= n || std::mem::replace(&mut seen[x], true)) {
            return Err(Error::Precondition("relabeling is not a permutation".into()));
        }
        let mut g = Graph::empty(n);
        for (u, v) in self.edges() {
            g.adj[perm[u]][perm[v]] = true;
            g.adj[perm[v]][perm[u]] = true;
        }
        Ok(g)
    }

    pub fn find_triangle(&self) -> Option<[usize; 3]> {
        let n = self.n();
        for a in 0..n {
            for b in a + 1..n {
                if !self.adj[a][b] {
                    continue;
                }
                for c in b + 1..n {
                    if self.adj[a][c] && self.adj[b][c] {
                        return Some([a, b, c]);
                    }
                }
            }
        }
        None
    }

    /// A 4-cycle `a-b-c-d-a`, listed in cycle order.
    pub fn find_square(&self) -> Option<[usize; 4]> {
        let n = self.n();
        for a in 0..n {
            for c in a + 1..n {
                let common: Vec<usize> = (0..n)
                    .filter(|&x| x != a && x != c && self.adj[a][x] && self.adj[c][x])
                    .take(2)
                    .collect();
                if common.len() == 2 {
                    return Some([a, common[0], c, common[1]]);
                }
            }
        }
        None
    }

    /// Length of a shortest cycle, `None` for forests.
    pub fn girth(&self) -> Option<usize> {
        let n = self.n();
        let mut best: Option<usize> = None;
        for s in 0..n {
            let mut dist = vec![usize::MAX; n];
            let mut parent = vec![usize::MAX; n];
            dist[s] = 0;
            let mut q = VecDeque::from([s]);
            while let Some(u) = q.pop_front() {
                for w in self.neighbors(u) {
                    if dist[w] == usize::MAX {
                        dist[w] = dist[u] + 1;
                        parent[w] = u;
                        q.push_back(w);
                    } else if parent[u] != w {
                        let len = dist[u] + dist[w] + 1;
                        best = Some(best.map_or(len, |b| b.min(len)));
                    }
                }
            }
        }
        best
    }

    pub fn is_connected(&self) -> bool {
        let n = self.n();
        if n == 0 {
            return true;
        }
        let mut seen = vec![false; n];
        seen[0] = true;
        let mut stack = vec![0];
        while let Some(u) = stack.pop() {
            for w in self.neighbors(u) {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

/// Why a graph failed the niceness test.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NicenessFailure {
    TooFewVertices { n: usize },
    /// No third vertex is adjacent to `a` but not to `b`.
    Undistinguished { a: usize, b: usize },
    Triangle { vertices: [usize; 3] },
    Square { vertices: [usize; 4] },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NicenessReport {
    pub is_nice: bool,
    pub failure: Option<NicenessFailure>,
}

impl NicenessReport {
    /// Re-checks the witness against `g`.
    pub fn witness_holds(&self, g: &Graph) -> bool {
        match &self.failure {
            None => self.is_nice,
            Some(NicenessFailure::TooFewVertices { n }) => *n == g.n() && g.n() < 2,
            Some(NicenessFailure::Undistinguished { a, b }) => {
                a != b
                    && *a < g.n()
                    && *b < g.n()
                    && !(0..g.n())
                        .any(|c| c != *a && c != *b && g.adjacent(c, *a) && !g.adjacent(c, *b))
            }
            Some(NicenessFailure::Triangle { vertices: [a, b, c] }) => {
                g.adjacent(*a, *b) && g.adjacent(*b, *c) && g.adjacent(*a, *c)
            }
            Some(NicenessFailure::Square { vertices: [a, b, c, d] }) => {
                let vs = [*a, *b, *c, *d];
                let distinct = (0..4).all(|i| (i + 1..4).all(|j| vs[i] != vs[j]));
                distinct
                    && g.adjacent(*a, *b)
                    && g.adjacent(*b, *c)
                    && g.adjacent(*c, *d)
                    && g.adjacent(*d, *a)
            }
        }
    }
}

/// Tests the two niceness conditions: at least two vertices with every
/// ordered pair distinguished by a third vertex, and no 3- or 4-cycles.
pub fn check_nice(g: &Graph) -> NicenessReport {
    let fail = |f| NicenessReport {
        is_nice: false,
        failure: Some(f),
    };
    let n = g.n();
    if n < 2 {
        return fail(NicenessFailure::TooFewVertices { n });
    }
    if let Some(t) = g.find_triangle() {
        return fail(NicenessFailure::Triangle { vertices: t });
    }
    if let Some(s) = g.find_square() {
        return fail(NicenessFailure::Square { vertices: s });
    }
    for a in 0..n {
        for b in 0..n {
            if a == b {
                continue;
            }
            let ok = (0..n).any(|c| c != a && c != b && g.adjacent(c, a) && !g.adjacent(c, b));
            if !ok {
                return fail(NicenessFailure::Undistinguished { a, b });
            }
        }
    }
    NicenessReport {
        is_nice: true,
        failure: None,
    }
}

/// Which clause of the cover condition an outside vertex satisfies.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverClause {
    /// Exactly one neighbor, lying in the image and of degree at least the
    /// threshold there.
    UniqueNeighbor,
    Isolated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutsideVertex {
    pub vertex: usize,
    pub neighbors: Vec<usize>,
    pub clause: Option<CoverClause>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverReport {
    pub pass: bool,
    /// Degree within the base graph required of the unique neighbor; the
    /// finite replacement for an infinite neighborhood.
    pub degree_threshold: usize,
    pub outside: Vec<OutsideVertex>,
}

/// Checks that `c_plus` is a cover of `c` along `embedding` (vertex `i` of
/// `c` maps to `embedding[i]`).
pub fn check_cover(
    c: &Graph,
    c_plus: &Graph,
    embedding: &[usize],
    degree_threshold: usize,
) -> Result<CoverReport> {
    if embedding.len() != c.n() {
        return Err(Error::Embedding(format!(
            "embedding has {} entries for {} vertices",
            embedding.len(),
            c.n()
        )));
    }
    let mut preimage = vec![None; c_plus.n()];
    for (i, &img) in embedding.iter().enumerate() {
        if img >= c_plus.n() {
            return Err(Error::Embedding(format!("image {img} out of range")));
        }
        if preimage[img].replace(i).is_some() {
            return Err(Error::Embedding(format!("vertex {img} hit twice")));
        }
    }
    for i in 0..c.n() {
        for j in i + 1..c.n() {
            if c.adjacent(i, j) != c_plus.adjacent(embedding[i], embedding[j]) {
                return Err(Error::Embedding(format!(
                    "pair ({i},{j}) adjacency not preserved; embedding is not induced"
                )));
            }
        }
    }
    let mut outside = Vec::new();
    for b in 0..c_plus.n() {
        if preimage[b].is_some() {
            continue;
        }
        let neighbors: Vec<usize> = c_plus.neighbors(b).collect();
        let clause = match neighbors.as_slice() {
            [] => Some(CoverClause::Isolated),
            [a] => match preimage[*a] {
                Some(ai) if c.degree(ai) >= degree_threshold => Some(CoverClause::UniqueNeighbor),
                _ => None,
            },
            _ => None,
        };
        outside.push(OutsideVertex {
            vertex: b,
            neighbors,
            clause,
        });
    }
    Ok(CoverReport {
        pass: outside.iter().all(|o| o.clause.is_some()),
        degree_threshold,
        outside,
    })
}

/// Parses the edge-list format: a `v <n>` header, then `e <i> <j>` lines
/// with `i < j < n`. Lines starting with `#` and blank lines are skipped.
pub fn load_graph(text: &str) -> Result<Graph> {
    let mut graph: Option<Graph> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let tag = parts.next().unwrap_or_default();
        let nums: Vec<&str> = parts.collect();
        let parse_num = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::parse(line_no, format!("expected a vertex index, got `{s}`")))
        };
        match tag {
            "v" => {
                if graph.is_some() {
                    return Err(Error::parse(line_no, "duplicate `v` header"));
                }
                if nums.len() != 1 {
                    return Err(Error::parse(line_no, "expected `v <n>`"));
                }
                graph = Some(Graph::empty(parse_num(nums[0])?));
            }
            "e" => {
                if nums.len() != 2 {
                    return Err(Error::parse(line_no, "expected `e <i> <j>`"));
                }
                let (i, j) = (parse_num(nums[0])?, parse_num(nums[1])?);
                if i == j {
                    return Err(Error::parse(line_no, format!("self-loop at {i}")));
                }
                let g = graph
                    .as_mut()
                    .ok_or_else(|| Error::parse(line_no, "edge before `v` header"))?;
                if i > j {
                    return Err(Error::parse(line_no, format!("edge ({i},{j}) must have i < j")));
                }
                if j >= g.n() {
                    return Err(Error::parse(
                        line_no,
                        format!("vertex {j} out of range for {} vertices", g.n()),
                    ));
                }
                if g.adjacent(i, j) {
                    return Err(Error::parse(line_no, format!("duplicate edge ({i},{j})")));
                }
                g.add_edge(i, j)?;
            }
            other => {
                return Err(Error::parse(line_no, format!("unknown record `{other}`")));
            }
        }
    }
    graph.ok_or_else(|| Error::parse(0, "missing `v <n>` header"))
}

pub fn save_graph(g: &Graph) -> String {
    let mut out = format!("v {}\n", g.n());
    for (u, v) in g.edges() {
        let _ = writeln!(out, "e {u} {v}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn triangle_and_square_rejected() {
        let k3 = Graph::complete(3);
        let r = check_nice(&k3);
        assert!(!r.is_nice);
        assert!(matches!(r.failure, Some(NicenessFailure::Triangle { .. })));
        assert!(r.witness_holds(&k3));

        let c4 = Graph::cycle(4);
        let r = check_nice(&c4);
        assert!(matches!(r.failure, Some(NicenessFailure::Square { .. })));
        assert!(r.witness_holds(&c4));
    }

    #[test]
    fn c5_and_petersen_are_nice() {
        assert!(check_nice(&Graph::cycle(5)).is_nice);
        let p = Graph::petersen();
        assert_eq!(p.edge_count(), 15);
        assert!(p.degree_sequence().iter().all(|&d| d == 3));
        assert_eq!(p.girth(), Some(5));
        assert!(check_nice(&p).is_nice);
    }

    #[test]
    fn small_and_undistinguished_graphs_fail() {
        let one = Graph::empty(1);
        let r = check_nice(&one);
        assert_eq!(r.failure, Some(NicenessFailure::TooFewVertices { n: 1 }));
        assert!(r.witness_holds(&one));
        // A path has leaves, which cannot be told apart from their neighbor.
        let p5 = Graph::path(5);
        let r = check_nice(&p5);
        assert!(matches!(r.failure, Some(NicenessFailure::Undistinguished { .. })));
        assert!(r.witness_holds(&p5));
        // Long cycles are nice.
        for n in 5..12 {
            assert!(check_nice(&Graph::cycle(n)).is_nice, "C{n}");
        }
    }

    #[test]
    fn planted_squares_always_fail() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let n = rng.gen_range(4..12);
            let mut g = Graph::empty(n);
            for u in 0..n {
                for v in u + 1..n {
                    if rng.gen_bool(0.2) {
                        g.add_edge(u, v).unwrap();
                    }
                }
            }
            let mut vs: Vec<usize> = (0..n).collect();
            for i in 0..4 {
                let j = rng.gen_range(i..n);
                vs.swap(i, j);
            }
            for i in 0..4 {
                g.add_edge(vs[i], vs[(i + 1) % 4]).unwrap();
            }
            let r = check_nice(&g);
            assert!(!r.is_nice);
            assert!(matches!(
                r.failure,
                Some(NicenessFailure::Triangle { .. }) | Some(NicenessFailure::Square { .. })
            ));
            assert!(r.witness_holds(&g));
        }
    }

    #[test]
    fn random_graph_witnesses_verify() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..300 {
            let n = rng.gen_range(0..10);
            let mut g = Graph::empty(n);
            for u in 0..n {
                for v in u + 1..n {
                    if rng.gen_bool(0.3) {
                        g.add_edge(u, v).unwrap();
                    }
                }
            }
            let r = check_nice(&g);
            assert_eq!(r.is_nice, r.failure.is_none());
            assert!(r.witness_holds(&g));
        }
    }

    #[test]
    fn cover_examples() {
        let c5 = Graph::cycle(5);
        let id: Vec<usize> = (0..5).collect();
        let r = check_cover(&c5, &c5, &id, DEFAULT_COVER_DEGREE).unwrap();
        assert!(r.pass);
        assert!(r.outside.is_empty());

        let mut plus = c5.clone();
        plus.add_vertex();
        let r = check_cover(&c5, &plus, &id, DEFAULT_COVER_DEGREE).unwrap();
        assert!(r.pass);
        assert_eq!(r.outside[0].clause, Some(CoverClause::Isolated));

        let mut two = c5.clone();
        let b = two.add_vertex();
        two.add_edge(b, 0).unwrap();
        two.add_edge(b, 2).unwrap();
        let r = check_cover(&c5, &two, &id, DEFAULT_COVER_DEGREE).unwrap();
        assert!(!r.pass);
        assert_eq!(r.outside[0].clause, None);
    }

    #[test]
    fn cover_degree_threshold_is_applied() {
        let c5 = Graph::cycle(5);
        let mut plus = c5.clone();
        let b = plus.add_vertex();
        plus.add_edge(b, 3).unwrap();
        let id: Vec<usize> = (0..5).collect();
        assert!(!check_cover(&c5, &plus, &id, 3).unwrap().pass);
        let r = check_cover(&c5, &plus, &id, 2).unwrap();
        assert!(r.pass);
        assert_eq!(r.outside[0].clause, Some(CoverClause::UniqueNeighbor));
    }

    #[test]
    fn cover_rejects_non_induced_embedding() {
        let c5 = Graph::cycle(5);
        let k5 = Graph::complete(5);
        let id: Vec<usize> = (0..5).collect();
        assert!(matches!(
            check_cover(&c5, &k5, &id, 3),
            Err(Error::Embedding(_))
        ));
        assert!(matches!(
            check_cover(&c5, &c5, &[0, 0, 1, 2, 3], 3),
            Err(Error::Embedding(_))
        ));
    }

    #[test]
    fn edge_list_format() {
        let g = load_graph("v 2\ne 0 1").unwrap();
        assert_eq!(g.edges(), vec![(0, 1)]);
        let c5 = load_graph("v 5\ne 0 1\ne 1 2\ne 2 3\ne 3 4\ne 0 4\n").unwrap();
        assert_eq!(c5, Graph::cycle(5));
        let commented = load_graph("# five cycle\nv 5\n\ne 0 1\ne 1 2\ne 2 3\ne 3 4\ne 0 4").unwrap();
        assert_eq!(commented, c5);
        assert_eq!(load_graph(&save_graph(&Graph::petersen())).unwrap(), Graph::petersen());
    }

    #[test]
    fn edge_list_errors_carry_line_numbers() {
        assert!(matches!(load_graph("e 0 0"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(load_graph("v 3\ne 1 1"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(load_graph("v 3\ne 0 3"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(load_graph("v 3\ne 0 1\ne 0 1"), Err(Error::Parse { line: 3, .. })));
        assert!(matches!(load_graph("v 3\nx 0 1"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(load_graph("v 3\ne 2 1"), Err(Error::Parse { line: 2, .. })));
        assert!(load_graph("").is_err());
    }
}
