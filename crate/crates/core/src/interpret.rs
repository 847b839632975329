//! The interpreted graph Γ(G), graph isomorphism, round trips, and
//! transversals viewed as covers.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::classify::{self, ElementKind};
use crate::error::{Error, Result};
use crate::fp_linalg::{self, FpVector};
use crate::graph::{self, CoverReport, Graph};
use crate::group::{GroupElement, MeklerGroup};
use crate::transversal::{Landscape, Transversal};

/// Default vertex cap for the isomorphism search.
pub const DEFAULT_ISO_CAP: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterpretedGraph {
    /// Least generator block of each `≈`-class of type-1^ν elements.
    pub vertices: Vec<FpVector>,
    pub graph: Graph,
    /// For each vertex, the generator `x_v` it is `≈`-equivalent to, if any.
    pub back_map: Vec<Option<usize>>,
}

/// Γ(G): `≈`-classes of noncentral type-1^ν elements, adjacent when they
/// commute.
pub fn gamma(land: &Landscape) -> Result<InterpretedGraph> {
    let group = land.group();
    let p = group.p();
    let n = group.n();
    let mut classes: BTreeMap<FpVector, FpVector> = BTreeMap::new();
    for i in 0..(p as u64).pow(n as u32) {
        let a = FpVector::from_index(p, n, i);
        if land.kind_of_gen(&a) != ElementKind::Type1Nu {
            continue;
        }
        let key = classify::approx_key(group, &a).expect("noncentral");
        // Enumeration is lexicographic, so the first hit is the least.
        classes.entry(key).or_insert(a);
    }
    let mut vertices: Vec<FpVector> = classes.into_values().collect();
    vertices.sort();
    let mut g = Graph::empty(vertices.len());
    for i in 0..vertices.len() {
        for j in i + 1..vertices.len() {
            if group.gens_commute(&vertices[i], &vertices[j]) {
                g.add_edge(i, j)?;
            }
        }
    }
    let back_map = vertices
        .iter()
        .map(|a| {
            let key = classify::approx_key(group, a);
            (0..n).find(|&v| classify::approx_key(group, &FpVector::unit(p, n, v)) == key)
        })
        .collect();
    Ok(InterpretedGraph {
        vertices,
        graph: g,
        back_map,
    })
}

impl InterpretedGraph {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "vertices": self.vertices.iter().map(|v| v.coords().to_vec()).collect::<Vec<_>>(),
            "edges": self.graph.edges(),
            "back_map": self.back_map,
        })
    }
}

/// Stable colouring of the disjoint union of `a` and `b` by iterated
/// neighbourhood refinement.
fn refine(a: &Graph, b: &Graph) -> (Vec<usize>, Vec<usize>) {
    let na = a.n();
    let total = na + b.n();
    let nbrs = |v: usize| -> Vec<usize> {
        if v < na {
            a.neighbors(v).collect()
        } else {
            b.neighbors(v - na).map(|w| w + na).collect()
        }
    };
    let adj: Vec<Vec<usize>> = (0..total).map(nbrs).collect();
    let mut color: Vec<usize> = adj.iter().map(|n| n.len()).collect();
    let mut count = 0;
    loop {
        let sigs: Vec<(usize, Vec<usize>)> = (0..total)
            .map(|v| {
                let mut s: Vec<usize> = adj[v].iter().map(|&w| color[w]).collect();
                s.sort_unstable();
                (color[v], s)
            })
            .collect();
        let mut ids: BTreeMap<&(usize, Vec<usize>), usize> = BTreeMap::new();
        for s in &sigs {
            let next = ids.len();
            ids.entry(s).or_insert(next);
        }
        let new: Vec<usize> = sigs.iter().map(|s| ids[s]).collect();
        let new_count = ids.len();
        color = new;
        if new_count == count {
            break;
        }
        count = new_count;
    }
    (color[..na].to_vec(), color[na..].to_vec())
}

/// A verified isomorphism `a -> b` (`map[i]` is the image of vertex `i`),
/// or `None`.
pub fn graphs_isomorphic(a: &Graph, b: &Graph, cap: usize) -> Result<Option<Vec<usize>>> {
    let n = a.n();
    if n.max(b.n()) > cap {
        return Err(Error::budget("isomorphism search vertex count", cap as u64));
    }
    if n != b.n() || a.edge_count() != b.edge_count() || a.degree_sequence() != b.degree_sequence() {
        return Ok(None);
    }
    let (ca, cb) = refine(a, b);
    let mut hist_a = ca.clone();
    let mut hist_b = cb.clone();
    hist_a.sort_unstable();
    hist_b.sort_unstable();
    if hist_a != hist_b {
        return Ok(None);
    }
    // Assign vertices in breadth-first order, starting in the rarest colour.
    let mut freq: BTreeMap<usize, usize> = BTreeMap::new();
    for &c in &ca {
        *freq.entry(c).or_default() += 1;
    }
    let mut order = Vec::with_capacity(n);
    let mut placed = vec![false; n];
    while order.len() < n {
        let start = (0..n)
            .filter(|&v| !placed[v])
            .min_by_key(|&v| (freq[&ca[v]], v))
            .expect("unplaced vertex");
        placed[start] = true;
        let mut q = std::collections::VecDeque::from([start]);
        while let Some(v) = q.pop_front() {
            order.push(v);
            for w in a.neighbors(v) {
                if !placed[w] {
                    placed[w] = true;
                    q.push_back(w);
                }
            }
        }
    }
    let mut map = vec![usize::MAX; n];
    let mut used = vec![false; n];
    fn extend(
        depth: usize,
        order: &[usize],
        a: &Graph,
        b: &Graph,
        ca: &[usize],
        cb: &[usize],
        map: &mut [usize],
        used: &mut [bool],
    ) -> bool {
        if depth == order.len() {
            return true;
        }
        let v = order[depth];
        for w in 0..b.n() {
            if used[w] || cb[w] != ca[v] {
                continue;
            }
            let consistent = order[..depth].iter().all(|&u| a.adjacent(u, v) == b.adjacent(map[u], w));
            if !consistent {
                continue;
            }
            map[v] = w;
            used[w] = true;
            if extend(depth + 1, order, a, b, ca, cb, map, used) {
                return true;
            }
            used[w] = false;
            map[v] = usize::MAX;
        }
        false
    }
    if !extend(0, &order, a, b, &ca, &cb, &mut map, &mut used) {
        return Ok(None);
    }
    if !is_isomorphism(a, b, &map) {
        return Err(Error::Precondition("isomorphism failed verification".into()));
    }
    Ok(Some(map))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundtripReport {
    pub vertices: usize,
    pub edges: usize,
    pub isomorphic: bool,
    /// Image in the original graph of each interpreted vertex.
    pub isomorphism: Option<Vec<usize>>,
    pub back_map: Vec<Option<usize>>,
}

/// Builds G(c), interprets Γ, and compares it with `c`.
pub fn roundtrip(c: &Graph, p: u32, cap: u64) -> Result<RoundtripReport> {
    roundtrip_with_iso_cap(c, p, cap, DEFAULT_ISO_CAP)
}

/// As [`roundtrip`]. The back map is reported as the isomorphism whenever
/// it is one.
pub fn roundtrip_with_iso_cap(c: &Graph, p: u32, cap: u64, iso_cap: usize) -> Result<RoundtripReport> {
    let nice = graph::check_nice(c);
    if !nice.is_nice {
        return Err(Error::NotNice(
            serde_json::to_string(&nice.failure).expect("failure serializes"),
        ));
    }
    let group = MeklerGroup::new(c.clone(), p)?;
    let land = Landscape::new(&group, cap)?;
    let gm = gamma(&land)?;
    let direct: Option<Vec<usize>> = gm.back_map.iter().copied().collect();
    let iso = match direct.filter(|m| is_isomorphism(&gm.graph, c, m)) {
        Some(m) => Some(m),
        None => graphs_isomorphic(&gm.graph, c, iso_cap)?,
    };
    Ok(RoundtripReport {
        vertices: gm.graph.n(),
        edges: gm.graph.edge_count(),
        isomorphic: iso.is_some(),
        isomorphism: iso,
        back_map: gm.back_map,
    })
}

/// Whether `map` is a bijection carrying the edges of `a` exactly onto
/// those of `b`.
pub fn is_isomorphism(a: &Graph, b: &Graph, map: &[usize]) -> bool {
    let n = a.n();
    if n != b.n() || map.len() != n {
        return false;
    }
    let mut seen = vec![false; n];
    for &v in map {
        if v >= n || seen[v] {
            return false;
        }
        seen[v] = true;
    }
    (0..n).all(|u| (u + 1..n).all(|v| a.adjacent(u, v) == b.adjacent(map[u], map[v])))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransversalCoverReport {
    /// Commutation graph on `x_nu ++ x_p ++ x_iota`.
    pub x_graph: Graph,
    /// For each `x_nu` entry, the Γ(G) vertex with the same `≈`-class.
    pub gamma_match: Vec<Option<usize>>,
    /// The `x_nu` entries are a bijective copy of Γ(G).
    pub matches_gamma: bool,
    pub cover: CoverReport,
    /// Each type-p entry is joined to its handle only.
    pub handles_only: bool,
    /// Generator blocks of the entries are linearly independent.
    pub gens_independent: bool,
    /// Commutators of non-adjacent entries are independent in G'.
    pub commutators_independent: bool,
    /// `⟨X⟩` has the order of G(X-graph) and satisfies its relations.
    pub presentation_holds: bool,
}

/// Views a transversal as a cover of its type-1^ν part and checks that it
/// generates a copy of the group of its commutation graph.
pub fn transversal_as_cover(land: &Landscape, x: &Transversal, degree_threshold: usize) -> Result<TransversalCoverReport> {
    let group = land.group();
    let p = group.p();
    let all = x.all();
    let k = all.len();
    let mut xg = Graph::empty(k);
    for i in 0..k {
        for j in i + 1..k {
            if group.commute(&all[i], &all[j]) {
                xg.add_edge(i, j)?;
            }
        }
    }
    let gm = gamma(land)?;
    let gamma_keys: Vec<FpVector> = gm
        .vertices
        .iter()
        .map(|v| classify::approx_key(group, v).expect("noncentral"))
        .collect();
    let gamma_match: Vec<Option<usize>> = x
        .x_nu
        .iter()
        .map(|e| {
            let key = classify::approx_key(group, &e.gen);
            gamma_keys.iter().position(|g| Some(g) == key.as_ref())
        })
        .collect();
    let mut hit: Vec<usize> = gamma_match.iter().flatten().copied().collect();
    hit.sort_unstable();
    hit.dedup();
    let matches_gamma = gamma_match.iter().all(|m| m.is_some()) && hit.len() == gm.vertices.len() && x.x_nu.len() == hit.len();

    let nu_len = x.x_nu.len();
    let base = xg.induced(&(0..nu_len).collect::<Vec<_>>());
    let cover = graph::check_cover(&base, &xg, &(0..nu_len).collect::<Vec<_>>(), degree_threshold)?;
    let handles_only = (0..x.x_p.len()).all(|i| {
        let v = nu_len + i;
        let nbrs: Vec<usize> = xg.neighbors(v).collect();
        x.handle_map.get(i).is_some_and(|&h| nbrs == vec![h])
    });

    let gens: Vec<FpVector> = all.iter().map(|e| e.gen.clone()).collect();
    let gens_independent = fp_linalg::rank(p, group.n(), &gens)? == k;
    let non_edges = xg.non_edges();
    let coms: Vec<FpVector> = non_edges
        .iter()
        .map(|&(i, j)| group.commutator(&all[i], &all[j]).map(|c| c.com))
        .collect::<Result<_>>()?;
    let commutators_independent = fp_linalg::rank(p, group.m(), &coms)? == coms.len();
    let h = group.subgroup_generated(&all)?;
    let presentation_holds = gens_independent && commutators_independent && h.log_order() == k + non_edges.len();
    Ok(TransversalCoverReport {
        x_graph: xg,
        gamma_match,
        matches_gamma,
        cover,
        handles_only,
        gens_independent,
        commutators_independent,
        presentation_holds,
    })
}

/// Whether commutation with `h` is constant on the `≈`-class of `g`.
pub fn commutation_well_defined(group: &MeklerGroup, g: &GroupElement, g2: &GroupElement, h: &GroupElement) -> Result<bool> {
    if !classify::approx(group, g, g2)? {
        return Err(Error::Precondition("elements are not ≈-equivalent".into()));
    }
    Ok(group.commute(g, h) == group.commute(g2, h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::DEFAULT_ENUM_CAP;
    use crate::graph::DEFAULT_COVER_DEGREE;
    use crate::transversal::build_transversal;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gamma_c5() {
        let g = MeklerGroup::new(Graph::cycle(5), 3).unwrap();
        let land = Landscape::new(&g, DEFAULT_ENUM_CAP).unwrap();
        let gm = gamma(&land).unwrap();
        assert_eq!(gm.graph.n(), 5);
        assert_eq!(gm.graph.edge_count(), 5);
        assert!(gm.back_map.iter().all(|b| b.is_some()));
    }

    #[test]
    fn gamma_abelian_is_empty() {
        let g = MeklerGroup::new(Graph::complete(3), 3).unwrap();
        let land = Landscape::new(&g, DEFAULT_ENUM_CAP).unwrap();
        assert_eq!(gamma(&land).unwrap().graph.n(), 0);
    }

    #[test]
    fn isomorphism_examples() {
        let c5 = Graph::cycle(5);
        let m = graphs_isomorphic(&c5, &c5, DEFAULT_ISO_CAP).unwrap().unwrap();
        assert_eq!(m.len(), 5);
        assert_eq!(graphs_isomorphic(&c5, &Graph::path(5), DEFAULT_ISO_CAP).unwrap(), None);
        let perm = [3, 0, 4, 1, 2];
        let r = c5.relabel(&perm).unwrap();
        let m = graphs_isomorphic(&c5, &r, DEFAULT_ISO_CAP).unwrap().unwrap();
        for (u, v) in c5.edges() {
            assert!(r.adjacent(m[u], m[v]));
        }
        assert!(graphs_isomorphic(&Graph::cycle(70), &Graph::cycle(70), DEFAULT_ISO_CAP).is_err());
    }

    #[test]
    fn isomorphism_random_relabelings() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..30 {
            let n = rng.gen_range(1..12);
            let mut g = Graph::empty(n);
            for u in 0..n {
                for v in u + 1..n {
                    if rng.gen_bool(0.4) {
                        g.add_edge(u, v).unwrap();
                    }
                }
            }
            let mut perm: Vec<usize> = (0..n).collect();
            rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut rng);
            let h = g.relabel(&perm).unwrap();
            assert!(graphs_isomorphic(&g, &h, DEFAULT_ISO_CAP).unwrap().is_some());
        }
        // Same degree sequence, different graphs: C6 versus two triangles.
        let two_tri = Graph::from_edges(6, &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]).unwrap();
        assert_eq!(graphs_isomorphic(&Graph::cycle(6), &two_tri, DEFAULT_ISO_CAP).unwrap(), None);
    }

    #[test]
    fn roundtrip_examples() {
        let r = roundtrip(&Graph::cycle(5), 3, DEFAULT_ENUM_CAP).unwrap();
        assert!(r.isomorphic);
        assert!(matches!(roundtrip(&Graph::complete(3), 3, DEFAULT_ENUM_CAP), Err(Error::NotNice(_))));
    }

    #[test]
    fn commutation_constant_on_approx_classes() {
        let g = MeklerGroup::new(Graph::petersen(), 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let x = g.random_element(&mut rng);
            let z = g.random_element(&mut rng);
            let central = g.element(FpVector::zero(3, g.n()), z.com).unwrap();
            let x2 = g.multiply(&g.power(&x, rng.gen_range(1..3)).unwrap(), &central).unwrap();
            let h = g.random_element(&mut rng);
            assert!(commutation_well_defined(&g, &x, &x2, &h).unwrap());
        }
    }

    #[test]
    fn c5_transversal_cover_is_trivial() {
        let g = MeklerGroup::new(Graph::cycle(5), 3).unwrap();
        let land = Landscape::new(&g, DEFAULT_ENUM_CAP).unwrap();
        let x = build_transversal(&land, 0).unwrap();
        let r = transversal_as_cover(&land, &x, DEFAULT_COVER_DEGREE).unwrap();
        assert!(r.matches_gamma);
        assert!(r.cover.pass && r.cover.outside.is_empty());
        assert!(r.presentation_holds);
    }

    #[test]
    fn planted_cover_joins_handles() {
        let mut c = Graph::cycle(5);
        c.add_vertex();
        c.add_edge(0, 5).unwrap();
        let g = MeklerGroup::new(c, 3).unwrap();
        let land = Landscape::new(&g, DEFAULT_ENUM_CAP).unwrap();
        let x = build_transversal(&land, 0).unwrap();
        assert!(!x.x_p.is_empty());
        let r = transversal_as_cover(&land, &x, 2).unwrap();
        assert!(r.matches_gamma);
        assert!(r.handles_only);
        assert!(r.cover.pass, "{:?}", r.cover);
        for o in &r.cover.outside {
            assert_eq!(o.neighbors.len(), 1);
        }
        assert!(r.presentation_holds);
    }
}
