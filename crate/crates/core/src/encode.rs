//! Finite relational structures, their encoding into nice graphs, and
//! random (ordered partite) hypergraph samples.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{self, Graph};

/// Default cap on the number of vertices an encoding may use.
pub const DEFAULT_GADGET_BUDGET: usize = 1_000_000;

/// Reserved relation name carrying the successor relation of an ordered
/// structure through the encoding.
const ORDER_RELATION: &str = "<";

/// Shortest tuple-to-element path.
const BASE_PATH_LEN: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Relation {
    pub name: String,
    pub arity: usize,
    /// Tuples are sets: stored sorted, without repeated entries.
    pub symmetric: bool,
    pub tuples: BTreeSet<Vec<usize>>,
}

/// A finite structure on `0..universe_size` with named relations. When
/// `ordered` is set the universe carries its index order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RelStructure {
    pub universe_size: usize,
    pub relations: Vec<Relation>,
    #[serde(default)]
    pub ordered: bool,
}

fn valid_name(name: &str) -> bool {
    let mut cs = name.chars();
    matches!(cs.next(), Some(c) if c.is_ascii_alphabetic())
        && cs.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl RelStructure {
    pub fn new(universe_size: usize) -> Self {
        RelStructure {
            universe_size,
            relations: Vec::new(),
            ordered: false,
        }
    }

    /// Declares a relation and returns its index.
    pub fn add_relation(&mut self, name: &str, arity: usize, symmetric: bool) -> Result<usize> {
        if !valid_name(name) {
            return Err(Error::Precondition(format!("invalid relation name `{name}`")));
        }
        if arity == 0 {
            return Err(Error::Precondition(format!("relation `{name}` has arity 0")));
        }
        if self.relation_index(name).is_some() {
            return Err(Error::Precondition(format!("relation `{name}` declared twice")));
        }
        self.relations.push(Relation {
            name: name.to_string(),
            arity,
            symmetric,
            tuples: BTreeSet::new(),
        });
        Ok(self.relations.len() - 1)
    }

    /// Adds a tuple; returns whether it was new. Symmetric tuples are
    /// sorted before storing.
    pub fn add_tuple(&mut self, rel: usize, tuple: &[usize]) -> Result<bool> {
        let n = self.universe_size;
        let r = self
            .relations
            .get_mut(rel)
            .ok_or_else(|| Error::Precondition(format!("no relation with index {rel}")))?;
        if tuple.len() != r.arity {
            return Err(Error::DimensionMismatch(format!(
                "relation `{}` has arity {}, tuple has {} entries",
                r.name,
                r.arity,
                tuple.len()
            )));
        }
        if let Some(&bad) = tuple.iter().find(|&&t| t >= n) {
            return Err(Error::Precondition(format!(
                "tuple entry {bad} out of range for universe of size {n}"
            )));
        }
        let mut t = tuple.to_vec();
        if r.symmetric {
            t.sort_unstable();
            if t.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::Precondition(format!(
                    "symmetric relation `{}` cannot hold tuple {tuple:?} with a repeated entry",
                    r.name
                )));
            }
        }
        Ok(r.tuples.insert(t))
    }

    pub fn relation_index(&self, name: &str) -> Option<usize> {
        self.relations.iter().position(|r| r.name == name)
    }

    pub fn relation(&self, name: &str) -> Option<&Relation> {
        self.relations.iter().find(|r| r.name == name)
    }

    /// Whether `name(tuple)` holds. Unknown relations and wrong arities
    /// yield `false`.
    pub fn holds(&self, name: &str, tuple: &[usize]) -> bool {
        let Some(r) = self.relation(name) else {
            return false;
        };
        if tuple.len() != r.arity {
            return false;
        }
        if r.symmetric {
            let mut t = tuple.to_vec();
            t.sort_unstable();
            r.tuples.contains(&t)
        } else {
            r.tuples.contains(tuple)
        }
    }

    pub fn tuple_count(&self) -> usize {
        self.relations.iter().map(|r| r.tuples.len()).sum()
    }

    /// Parses the `u`/`r`/`t` text format. An optional `order` line marks
    /// the structure as ordered; `sym` after an arity marks a set relation.
    pub fn parse(text: &str) -> Result<Self> {
        let mut out: Option<RelStructure> = None;
        let mut current: Option<usize> = None;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let head = parts.next().unwrap_or("");
            let rest: Vec<&str> = parts.collect();
            match head {
                "u" => {
                    if out.is_some() {
                        return Err(Error::parse(line_no, "duplicate universe line"));
                    }
                    let [n] = rest[..] else {
                        return Err(Error::parse(line_no, "expected `u <n>`"));
                    };
                    let n = n
                        .parse()
                        .map_err(|_| Error::parse(line_no, format!("bad universe size `{n}`")))?;
                    out = Some(RelStructure::new(n));
                }
                "order" => {
                    let s = out
                        .as_mut()
                        .ok_or_else(|| Error::parse(line_no, "`order` before `u`"))?;
                    if !rest.is_empty() {
                        return Err(Error::parse(line_no, "`order` takes no arguments"));
                    }
                    s.ordered = true;
                }
                "r" => {
                    let s = out
                        .as_mut()
                        .ok_or_else(|| Error::parse(line_no, "relation before `u`"))?;
                    let (name, arity, sym) = match rest[..] {
                        [name, arity] => (name, arity, false),
                        [name, arity, "sym"] => (name, arity, true),
                        _ => return Err(Error::parse(line_no, "expected `r <name> <arity> [sym]`")),
                    };
                    let arity = arity
                        .parse()
                        .map_err(|_| Error::parse(line_no, format!("bad arity `{arity}`")))?;
                    let idx = s
                        .add_relation(name, arity, sym)
                        .map_err(|e| Error::parse(line_no, e.to_string()))?;
                    current = Some(idx);
                }
                "t" => {
                    let s = out
                        .as_mut()
                        .ok_or_else(|| Error::parse(line_no, "tuple before `u`"))?;
                    let rel = current.ok_or_else(|| Error::parse(line_no, "tuple before any relation"))?;
                    let tuple = rest
                        .iter()
                        .map(|t| {
                            t.parse::<usize>()
                                .map_err(|_| Error::parse(line_no, format!("bad tuple entry `{t}`")))
                        })
                        .collect::<Result<Vec<_>>>()?;
                    s.add_tuple(rel, &tuple)
                        .map_err(|e| Error::parse(line_no, e.to_string()))?;
                }
                other => return Err(Error::parse(line_no, format!("unknown directive `{other}`"))),
            }
        }
        out.ok_or_else(|| Error::parse(0, "missing `u <n>` line"))
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "u {}", self.universe_size).unwrap();
        if self.ordered {
            s.push_str("order\n");
        }
        for r in &self.relations {
            write!(s, "r {} {}", r.name, r.arity).unwrap();
            if r.symmetric {
                s.push_str(" sym");
            }
            s.push('\n');
            for t in &r.tuples {
                s.push('t');
                for x in t {
                    write!(s, " {x}").unwrap();
                }
                s.push('\n');
            }
        }
        s
    }

    /// Image under the bijection `perm`, with relations kept in place.
    pub fn relabel(&self, perm: &[usize]) -> Result<RelStructure> {
        if perm.len() != self.universe_size {
            return Err(Error::DimensionMismatch(format!(
                "permutation of length {} for universe of size {}",
                perm.len(),
                self.universe_size
            )));
        }
        let mut out = RelStructure::new(self.universe_size);
        out.ordered = self.ordered;
        for (i, r) in self.relations.iter().enumerate() {
            out.add_relation(&r.name, r.arity, r.symmetric)?;
            for t in &r.tuples {
                let img: Vec<usize> = t.iter().map(|&x| perm[x]).collect();
                out.add_tuple(i, &img)?;
            }
        }
        Ok(out)
    }
}

/// Brute-force isomorphism test over all bijections of the universe, relation
/// by relation (same names and arities required). Ordered structures must
/// map by the identity.
pub fn structures_isomorphic(a: &RelStructure, b: &RelStructure, max_universe: usize) -> Result<Option<Vec<usize>>> {
    let n = a.universe_size;
    if n != b.universe_size || a.ordered != b.ordered || a.relations.len() != b.relations.len() {
        return Ok(None);
    }
    for (ra, rb) in a.relations.iter().zip(&b.relations) {
        if ra.name != rb.name || ra.arity != rb.arity || ra.tuples.len() != rb.tuples.len() {
            return Ok(None);
        }
    }
    if a.ordered {
        return Ok((a == b).then(|| (0..n).collect()));
    }
    if n > max_universe {
        return Err(Error::budget("structure isomorphism universe size", max_universe as u64));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    loop {
        if a.relabel(&perm)?.relations == b.relations {
            return Ok(Some(perm));
        }
        if !next_permutation(&mut perm) {
            return Ok(None);
        }
    }
}

fn next_permutation(v: &mut [usize]) -> bool {
    let n = v.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationHeader {
    pub name: String,
    pub arity: usize,
    pub symmetric: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TupleGadget {
    pub relation: usize,
    pub tuple: Vec<usize>,
    pub tuple_vertex: usize,
    /// One path per position, from the tuple vertex to the element vertex,
    /// endpoints included.
    pub paths: Vec<Vec<usize>>,
}

/// A private 5-cycle `anchor - cycle[0] - .. - cycle[3] - anchor`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepairGadget {
    pub anchor: usize,
    pub cycle: [usize; 4],
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GadgetLog {
    pub universe_size: usize,
    pub ordered: bool,
    pub relations: Vec<RelationHeader>,
    pub tuples: Vec<TupleGadget>,
    pub repairs: Vec<RepairGadget>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Encoding {
    pub graph: Graph,
    pub element_vertices: Vec<usize>,
    pub gadget_log: GadgetLog,
}

impl Encoding {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("encoding serializes")
    }

    pub fn gadget_log_json(&self) -> String {
        serde_json::to_string_pretty(&self.gadget_log).expect("gadget log serializes")
    }

    /// Reassembles an encoding from a graph file and its gadget log sidecar.
    pub fn from_parts(graph: Graph, gadget_log_json: &str) -> Result<Self> {
        let gadget_log: GadgetLog =
            serde_json::from_str(gadget_log_json).map_err(|e| Error::Decode(format!("gadget log: {e}")))?;
        let element_vertices = (0..gadget_log.universe_size).collect();
        Ok(Encoding {
            graph,
            element_vertices,
            gadget_log,
        })
    }
}

/// Path length used for position `pos` of relation `rel`: a symmetric
/// relation uses one length for all positions, other relations one per
/// position, so every (relation, position) class gets its own length.
fn path_lengths(headers: &[RelationHeader]) -> Vec<Vec<usize>> {
    let mut slot = 0;
    headers
        .iter()
        .map(|h| {
            let lens = if h.symmetric {
                vec![BASE_PATH_LEN + slot; h.arity]
            } else {
                (0..h.arity).map(|i| BASE_PATH_LEN + slot + i).collect()
            };
            slot += if h.symmetric { 1 } else { h.arity };
            lens
        })
        .collect()
}

fn headers_with_order(a: &RelStructure) -> Vec<RelationHeader> {
    let mut headers: Vec<RelationHeader> = a
        .relations
        .iter()
        .map(|r| RelationHeader {
            name: r.name.clone(),
            arity: r.arity,
            symmetric: r.symmetric,
        })
        .collect();
    if a.ordered {
        headers.push(RelationHeader {
            name: ORDER_RELATION.to_string(),
            arity: 2,
            symmetric: false,
        });
    }
    headers
}

pub fn encode(a: &RelStructure) -> Result<Encoding> {
    encode_with_budget(a, DEFAULT_GADGET_BUDGET)
}

/// Element vertices `0..n`; each tuple gets a tuple vertex joined to its
/// entries by private paths of length at least 3. Vertices of degree below
/// 2 then receive a private 5-cycle. Girth stays at least 5 and minimum
/// degree at least 2, which makes the result nice.
pub fn encode_with_budget(a: &RelStructure, budget: usize) -> Result<Encoding> {
    let n = a.universe_size;
    if n == 0 {
        return Err(Error::Precondition("cannot encode an empty universe".into()));
    }
    let headers = headers_with_order(a);
    let lens = path_lengths(&headers);
    let mut all_tuples: Vec<(usize, Vec<usize>)> = Vec::new();
    for (ri, r) in a.relations.iter().enumerate() {
        for t in &r.tuples {
            all_tuples.push((ri, t.clone()));
        }
    }
    if a.ordered {
        for i in 1..n {
            all_tuples.push((a.relations.len(), vec![i - 1, i]));
        }
    }
    let mut projected = n;
    for (ri, _) in &all_tuples {
        projected += 1 + lens[*ri].iter().map(|l| l - 1).sum::<usize>();
    }
    if projected > budget {
        return Err(Error::budget("encoding vertices", budget as u64));
    }

    let mut g = Graph::empty(n);
    let mut tuples = Vec::with_capacity(all_tuples.len());
    for (ri, t) in all_tuples {
        let tv = g.add_vertex();
        let mut paths = Vec::with_capacity(t.len());
        for (pos, &target) in t.iter().enumerate() {
            let mut path = vec![tv];
            for _ in 1..lens[ri][pos] {
                path.push(g.add_vertex());
            }
            path.push(target);
            for w in path.windows(2) {
                g.add_edge(w[0], w[1])?;
            }
            paths.push(path);
        }
        tuples.push(TupleGadget {
            relation: ri,
            tuple: t,
            tuple_vertex: tv,
            paths,
        });
    }

    let low: Vec<usize> = (0..g.n()).filter(|&v| g.degree(v) < 2).collect();
    if g.n() + 4 * low.len() > budget {
        return Err(Error::budget("encoding vertices", budget as u64));
    }
    let mut repairs = Vec::with_capacity(low.len());
    for anchor in low {
        let cycle = [g.add_vertex(), g.add_vertex(), g.add_vertex(), g.add_vertex()];
        g.add_edge(anchor, cycle[0])?;
        for w in cycle.windows(2) {
            g.add_edge(w[0], w[1])?;
        }
        g.add_edge(cycle[3], anchor)?;
        repairs.push(RepairGadget { anchor, cycle });
    }

    let report = graph::check_nice(&g);
    if !report.is_nice {
        return Err(Error::NotNice(format!(
            "encoder produced a non-nice graph: {:?}",
            report.failure
        )));
    }
    Ok(Encoding {
        graph: g,
        element_vertices: (0..n).collect(),
        gadget_log: GadgetLog {
            universe_size: n,
            ordered: a.ordered,
            relations: headers,
            tuples,
            repairs,
        },
    })
}

/// Rebuilds the structure from the gadget log after checking that the log
/// describes exactly the stored graph.
pub fn decode(e: &Encoding) -> Result<RelStructure> {
    let log = &e.gadget_log;
    let n = log.universe_size;
    let bad = |msg: String| Err(Error::Decode(msg));
    if n == 0 {
        return bad("empty universe".into());
    }
    if e.element_vertices != (0..n).collect::<Vec<_>>() {
        return bad("element vertices are not 0..n".into());
    }
    let order_idx = if log.ordered {
        match log.relations.last() {
            Some(h) if h.name == ORDER_RELATION && h.arity == 2 && !h.symmetric => Some(log.relations.len() - 1),
            _ => return bad("ordered log lacks its order relation".into()),
        }
    } else {
        None
    };
    let lens = path_lengths(&log.relations);

    let total = e.graph.n();
    if total < n {
        return bad(format!("graph has {total} vertices for {n} elements"));
    }
    let mut owner = vec![false; total];
    for v in owner.iter_mut().take(n) {
        *v = true;
    }
    let mut expected = Graph::empty(total);
    let claim = |v: usize, owner: &mut [bool]| -> Result<()> {
        if v >= total || owner[v] {
            return Err(Error::Decode(format!("gadget vertex {v} missing or shared")));
        }
        owner[v] = true;
        Ok(())
    };
    let mut out = RelStructure::new(n);
    out.ordered = log.ordered;
    for h in log.relations.iter().take(order_idx.unwrap_or(log.relations.len())) {
        out.add_relation(&h.name, h.arity, h.symmetric)
            .map_err(|err| Error::Decode(err.to_string()))?;
    }
    let mut order_pairs = Vec::new();
    for tg in &log.tuples {
        let Some(h) = log.relations.get(tg.relation) else {
            return bad(format!("tuple gadget refers to relation {}", tg.relation));
        };
        if tg.tuple.len() != h.arity || tg.paths.len() != h.arity {
            return bad(format!("gadget for `{}` has the wrong arity", h.name));
        }
        claim(tg.tuple_vertex, &mut owner)?;
        for (pos, path) in tg.paths.iter().enumerate() {
            if path.len() != lens[tg.relation][pos] + 1
                || path.first() != Some(&tg.tuple_vertex)
                || path.last() != Some(&tg.tuple[pos])
                || tg.tuple[pos] >= n
            {
                return bad(format!("path {pos} of a `{}` gadget is malformed", h.name));
            }
            for &v in &path[1..path.len() - 1] {
                claim(v, &mut owner)?;
            }
            for w in path.windows(2) {
                expected.add_edge(w[0], w[1]).map_err(|err| Error::Decode(err.to_string()))?;
            }
        }
        if Some(tg.relation) == order_idx {
            order_pairs.push((tg.tuple[0], tg.tuple[1]));
        } else {
            let fresh = out
                .add_tuple(tg.relation, &tg.tuple)
                .map_err(|err| Error::Decode(err.to_string()))?;
            if !fresh {
                return bad(format!("duplicate `{}` tuple {:?}", h.name, tg.tuple));
            }
        }
    }
    if order_idx.is_some() && order_pairs != (1..n).map(|i| (i - 1, i)).collect::<Vec<_>>() {
        return bad("order gadgets do not form the successor chain".into());
    }
    for r in &log.repairs {
        if r.anchor >= total || !owner[r.anchor] {
            return bad(format!("repair anchored at unknown vertex {}", r.anchor));
        }
        for &v in &r.cycle {
            claim(v, &mut owner)?;
        }
        let ring = [r.anchor, r.cycle[0], r.cycle[1], r.cycle[2], r.cycle[3], r.anchor];
        for w in ring.windows(2) {
            expected.add_edge(w[0], w[1]).map_err(|err| Error::Decode(err.to_string()))?;
        }
    }
    if let Some(v) = owner.iter().position(|&o| !o) {
        return bad(format!("vertex {v} belongs to no gadget"));
    }
    if expected.edges() != e.graph.edges() {
        return bad("graph edges disagree with the gadget log".into());
    }
    Ok(out)
}

/// `k`-uniform hypergraph on `n` vertices, each `k`-subset an edge
/// independently with probability `edge_probability`.
pub fn random_hypergraph(k: usize, n: usize, edge_probability: f64, seed: u64) -> Result<RelStructure> {
    if k < 2 || k > n {
        return Err(Error::Precondition(format!("need 2 <= k <= n, got k={k}, n={n}")));
    }
    if !(0.0..=1.0).contains(&edge_probability) {
        return Err(Error::Precondition(format!("edge probability {edge_probability} outside [0,1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = RelStructure::new(n);
    let r = s.add_relation("E", k, true)?;
    for t in k_subsets(n, k) {
        if rng.gen_bool(edge_probability) {
            s.add_tuple(r, &t)?;
        }
    }
    Ok(s)
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn k_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut c: Vec<usize> = (0..k).collect();
    loop {
        out.push(c.clone());
        let Some(i) = (0..k).rev().find(|&i| c[i] < n - k + i) else {
            return out;
        };
        c[i] += 1;
        for j in i + 1..k {
            c[j] = c[j - 1] + 1;
        }
    }
}

/// Finite ordered `k`-partite hypergraph: part `P_i` is the index block
/// `i*part_size..(i+1)*part_size`, the order is the index order, and `R`
/// holds only on tuples meeting every part once.
pub fn ordered_partite_hypergraph(k: usize, part_size: usize, edge_probability: f64, seed: u64) -> Result<RelStructure> {
    if k < 2 {
        return Err(Error::Precondition(format!("need k >= 2, got {k}")));
    }
    if !(0.0..=1.0).contains(&edge_probability) {
        return Err(Error::Precondition(format!("edge probability {edge_probability} outside [0,1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = RelStructure::new(k * part_size);
    s.ordered = true;
    let r = s.add_relation("R", k, true)?;
    for i in 0..k {
        let pi = s.add_relation(&format!("P{i}"), 1, false)?;
        for v in i * part_size..(i + 1) * part_size {
            s.add_tuple(pi, &[v])?;
        }
    }
    for t in transversal_tuples(k, part_size, None) {
        if rng.gen_bool(edge_probability) {
            s.add_tuple(r, &t)?;
        }
    }
    Ok(s)
}

/// Tuples with one entry from each part (skipping part `skip`), in part
/// order.
fn transversal_tuples(k: usize, part_size: usize, skip: Option<usize>) -> Vec<Vec<usize>> {
    let parts: Vec<usize> = (0..k).filter(|&i| Some(i) != skip).collect();
    let mut out = vec![Vec::new()];
    for &i in &parts {
        let mut next = Vec::with_capacity(out.len() * part_size);
        for t in &out {
            for v in i * part_size..(i + 1) * part_size {
                let mut t2: Vec<usize> = t.clone();
                t2.push(v);
                next.push(t2);
            }
        }
        out = next;
    }
    out
}

/// For each `s0`, the largest `s1` such that every choice of disjoint
/// parameter sets `|A_0| = s0`, `|A_1| = s1` is realized by some `b`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtensionReport {
    pub k: usize,
    pub part_size: usize,
    pub max_size: usize,
    /// `b` strictly between `b_0 < b_1` in the same part.
    pub between: Vec<Option<usize>>,
    /// `b` anywhere in the part.
    pub anywhere: Vec<Option<usize>>,
    pub checks: u64,
}

/// Exhaustive scan of the extension clause on a sample produced by
/// [`ordered_partite_hypergraph`]. Finite samples always fail the
/// betweenness form for neighbouring `b_0 < b_1`, so this only reports.
pub fn extension_report(s: &RelStructure, k: usize, part_size: usize, max_size: usize, budget: u64) -> Result<ExtensionReport> {
    if s.universe_size != k * part_size || s.relation("R").map(|r| r.arity) != Some(k) {
        return Err(Error::Precondition("structure is not an ordered partite sample of this shape".into()));
    }
    let mut checks = 0u64;
    let mut between = Vec::with_capacity(max_size + 1);
    let mut anywhere = Vec::with_capacity(max_size + 1);
    for s0 in 0..=max_size {
        for (strict, out) in [(true, &mut between), (false, &mut anywhere)] {
            let mut best = None;
            for s1 in 0..=max_size {
                if !extension_holds(s, k, part_size, s0, s1, strict, &mut checks, budget)? {
                    break;
                }
                best = Some(s1);
            }
            out.push(best);
        }
    }
    Ok(ExtensionReport {
        k,
        part_size,
        max_size,
        between,
        anywhere,
        checks,
    })
}

#[allow(clippy::too_many_arguments)]
fn extension_holds(
    s: &RelStructure,
    k: usize,
    part_size: usize,
    s0: usize,
    s1: usize,
    strict: bool,
    checks: &mut u64,
    budget: u64,
) -> Result<bool> {
    for j in 0..k {
        let others = transversal_tuples(k, part_size, Some(j));
        if s0 + s1 > others.len() {
            return Ok(false);
        }
        let part: Vec<usize> = (j * part_size..(j + 1) * part_size).collect();
        let holds = |b: usize, a: &[usize]| {
            let mut t = a.to_vec();
            t.push(b);
            s.holds("R", &t)
        };
        let windows: Vec<Vec<usize>> = if strict {
            let mut w = Vec::new();
            for x in 0..part.len() {
                for y in x + 1..part.len() {
                    w.push(part[x + 1..y].to_vec());
                }
            }
            w
        } else {
            vec![part.clone()]
        };
        for a0 in k_subsets(others.len(), s0) {
            let rest: Vec<usize> = (0..others.len()).filter(|i| !a0.contains(i)).collect();
            for a1 in k_subsets(rest.len(), s1) {
                for cands in &windows {
                    *checks += 1;
                    if *checks > budget {
                        return Err(Error::budget("extension clause checks", budget));
                    }
                    let ok = cands.iter().any(|&b| {
                        a0.iter().all(|&i| holds(b, &others[i])) && a1.iter().all(|&i| !holds(b, &others[rest[i]]))
                    });
                    if !ok {
                        return Ok(false);
                    }
                }
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::check_nice;
    use crate::interpret::graphs_isomorphic;

    #[test]
    fn text_format_round_trip() {
        let text = "# sample\nu 4\nr E 2 sym\nt 1 0\nt 2 3\nr L 1\nt 3\n";
        let s = RelStructure::parse(text).unwrap();
        assert!(s.holds("E", &[0, 1]));
        assert!(s.holds("E", &[1, 0]));
        assert!(!s.holds("E", &[0, 2]));
        assert_eq!(RelStructure::parse(&s.to_text()).unwrap(), s);
        assert!(RelStructure::parse("u 2\nr E 2 sym\nt 1 1\n").is_err());
        assert!(RelStructure::parse("u 2\nr E 2\nt 0 2\n").is_err());
        assert!(RelStructure::parse("u 2\nt 0 1\n").is_err());
        assert!(matches!(RelStructure::parse("r E 2\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn no_relations_is_recoverable() {
        let s = RelStructure::new(3);
        let e = encode(&s).unwrap();
        assert!(check_nice(&e.graph).is_nice);
        assert_eq!(e.gadget_log.repairs.len(), 3);
        assert_eq!(e.graph.n(), 15);
        assert_eq!(decode(&e).unwrap(), s);
    }

    #[test]
    fn single_binary_tuple() {
        let mut s = RelStructure::new(2);
        let r = s.add_relation("R", 2, false).unwrap();
        s.add_tuple(r, &[0, 1]).unwrap();
        let e = encode(&s).unwrap();
        assert_eq!(e.gadget_log.tuples.len(), 1);
        assert_eq!(e.gadget_log.tuples[0].paths[0].len(), 4);
        assert_eq!(e.gadget_log.tuples[0].paths[1].len(), 5);
        assert!(check_nice(&e.graph).is_nice);
        let d = decode(&e).unwrap();
        assert_eq!(d.relations[0].tuples, BTreeSet::from([vec![0, 1]]));
        // The reversed tuple is a different structure and a different graph.
        let mut s2 = RelStructure::new(2);
        s2.add_relation("R", 2, false).unwrap();
        s2.add_tuple(0, &[1, 0]).unwrap();
        let e2 = encode(&s2).unwrap();
        assert_eq!(decode(&e2).unwrap(), s2);
        assert_ne!(e.graph, e2.graph);
    }

    #[test]
    fn random_three_hypergraph_four_edges() {
        let s = (0..)
            .map(|seed| random_hypergraph(3, 5, 0.4, seed).unwrap())
            .find(|s| s.tuple_count() == 4)
            .unwrap();
        let e = encode(&s).unwrap();
        assert!(check_nice(&e.graph).is_nice);
        assert!(e.graph.girth().unwrap() >= 5);
        assert_eq!(decode(&e).unwrap(), s);
    }

    #[test]
    fn empty_universe_and_budget() {
        assert!(matches!(encode(&RelStructure::new(0)), Err(Error::Precondition(_))));
        let s = random_hypergraph(3, 6, 1.0, 0).unwrap();
        assert!(matches!(encode_with_budget(&s, 50), Err(Error::Budget { .. })));
    }

    #[test]
    fn corrupted_logs_are_rejected() {
        let s = random_hypergraph(2, 4, 0.5, 3).unwrap();
        let e = encode(&s).unwrap();
        assert!(!e.gadget_log.tuples.is_empty());

        let mut c = e.clone();
        c.gadget_log.tuples.pop();
        assert!(matches!(decode(&c), Err(Error::Decode(_))));

        let mut c = e.clone();
        c.gadget_log.tuples[0].tuple.swap(0, 1);
        assert!(matches!(decode(&c), Err(Error::Decode(_))));

        let mut c = e.clone();
        c.gadget_log.repairs.clear();
        assert!(matches!(decode(&c), Err(Error::Decode(_))));

        let mut c = e.clone();
        let (u, v) = c.graph.edges()[0];
        let w = (0..c.graph.n()).find(|&w| w != u && w != v && !c.graph.adjacent(u, w)).unwrap();
        c.graph.add_edge(u, w).unwrap();
        assert!(matches!(decode(&c), Err(Error::Decode(_))));

        let json = e.gadget_log_json();
        let back = Encoding::from_parts(e.graph.clone(), &json).unwrap();
        assert_eq!(decode(&back).unwrap(), s);
        assert!(Encoding::from_parts(e.graph.clone(), "{").is_err());
    }

    #[test]
    fn random_hypergraph_extremes_and_determinism() {
        assert_eq!(random_hypergraph(3, 6, 0.0, 1).unwrap().tuple_count(), 0);
        assert_eq!(random_hypergraph(3, 6, 1.0, 1).unwrap().tuple_count(), 20);
        assert_eq!(random_hypergraph(2, 7, 1.0, 1).unwrap().tuple_count(), 21);
        assert_eq!(random_hypergraph(3, 6, 0.5, 9).unwrap(), random_hypergraph(3, 6, 0.5, 9).unwrap());
        assert!(random_hypergraph(1, 3, 0.5, 0).is_err());
        assert!(random_hypergraph(4, 3, 0.5, 0).is_err());
        assert_eq!(k_subsets(5, 2).len(), 10);
        assert_eq!(k_subsets(6, 3).len(), 20);
    }

    #[test]
    fn hundred_random_structures_encode_nicely() {
        for seed in 0..100u64 {
            let k = 2 + (seed % 2) as usize;
            let n = k + (seed % 4) as usize;
            let s = random_hypergraph(k, n, 0.5, seed).unwrap();
            let e = encode(&s).unwrap();
            assert!(check_nice(&e.graph).is_nice, "seed {seed}");
            assert_eq!(decode(&e).unwrap(), s, "seed {seed}");
        }
    }

    #[test]
    fn partite_sample_shape() {
        let s = ordered_partite_hypergraph(2, 1, 1.0, 0).unwrap();
        assert_eq!(s.relation("R").unwrap().tuples, BTreeSet::from([vec![0, 1]]));
        for seed in 0..10 {
            let s = ordered_partite_hypergraph(3, 3, 0.6, seed).unwrap();
            assert!(s.ordered);
            let part = |v: usize| v / 3;
            for t in &s.relation("R").unwrap().tuples {
                let mut ps: Vec<usize> = t.iter().map(|&v| part(v)).collect();
                ps.sort_unstable();
                assert_eq!(ps, vec![0, 1, 2]);
            }
            for i in 0..3 {
                for v in 0..9 {
                    assert_eq!(s.holds(&format!("P{i}"), &[v]), part(v) == i);
                }
            }
        }
    }

    #[test]
    fn ordered_structures_survive_encoding() {
        let s = ordered_partite_hypergraph(2, 2, 0.5, 4).unwrap();
        let e = encode(&s).unwrap();
        assert!(check_nice(&e.graph).is_nice);
        assert_eq!(decode(&e).unwrap(), s);
        assert_eq!(RelStructure::parse(&s.to_text()).unwrap(), s);
    }

    #[test]
    fn extension_report_on_complete_and_empty_samples() {
        let full = ordered_partite_hypergraph(2, 3, 1.0, 0).unwrap();
        let r = extension_report(&full, 2, 3, 2, 1_000_000).unwrap();
        // Neighbouring b_0 < b_1 leave no room in between.
        assert_eq!(r.between, vec![None, None, None]);
        // Every b is joined to everything, so only A_1 = {} is realizable.
        assert_eq!(r.anywhere, vec![Some(0), Some(0), Some(0)]);
        let empty = ordered_partite_hypergraph(2, 3, 0.0, 0).unwrap();
        let r = extension_report(&empty, 2, 3, 2, 1_000_000).unwrap();
        assert_eq!(r.anywhere, vec![Some(2), None, None]);
        assert!(extension_report(&full, 2, 3, 3, 5).is_err());
    }

    #[test]
    fn extension_report_brute_force_agreement() {
        // Independent oracle: a realizable (s0, s1) pair needs, for each b,
        // the neighbourhood pattern of b to cover every choice of A_0, A_1.
        let s = ordered_partite_hypergraph(2, 4, 0.5, 11).unwrap();
        let r = extension_report(&s, 2, 4, 2, 10_000_000).unwrap();
        let nbrs = |b: usize, other: std::ops::Range<usize>| -> BTreeSet<usize> {
            other.filter(|&a| s.holds("R", &[a, b])).collect()
        };
        let realizable = |s0: usize, s1: usize| {
            [(0..4, 4..8), (4..8, 0..4)].into_iter().all(|(mine, other)| {
                let ns: Vec<BTreeSet<usize>> = mine.map(|b| nbrs(b, other.clone())).collect();
                let pool: Vec<usize> = other.collect();
                k_subsets(4, s0).iter().all(|a0| {
                    let rest: Vec<usize> = (0..4).filter(|i| !a0.contains(i)).collect();
                    k_subsets(rest.len(), s1).iter().all(|a1| {
                        ns.iter().any(|nb| {
                            a0.iter().all(|&i| nb.contains(&pool[i])) && a1.iter().all(|&i| !nb.contains(&pool[rest[i]]))
                        })
                    })
                })
            })
        };
        for s0 in 0..=2 {
            let expect = (0..=2).take_while(|&s1| realizable(s0, s1)).last();
            assert_eq!(r.anywhere[s0], expect, "s0 = {s0}");
        }
    }

    #[test]
    fn non_isomorphic_structures_give_non_isomorphic_graphs() {
        let mut corpus: Vec<RelStructure> = Vec::new();
        for k in [2usize, 3] {
            let n = 4;
            let all = k_subsets(n, k);
            for mask in 0u32..(1 << all.len()) {
                let mut s = RelStructure::new(n);
                s.add_relation("E", k, true).unwrap();
                for (i, t) in all.iter().enumerate() {
                    if mask >> i & 1 == 1 {
                        s.add_tuple(0, t).unwrap();
                    }
                }
                if s.tuple_count() <= 3 {
                    corpus.push(s);
                }
            }
        }
        // Keep one representative per isomorphism class.
        let mut reps: Vec<(RelStructure, Graph)> = Vec::new();
        for s in corpus {
            if reps.iter().any(|(r, _)| structures_isomorphic(r, &s, 8).unwrap().is_some()) {
                continue;
            }
            let g = encode(&s).unwrap().graph;
            reps.push((s, g));
        }
        assert!(reps.len() >= 8);
        for i in 0..reps.len() {
            for j in i + 1..reps.len() {
                if reps[i].0.relations[0].arity != reps[j].0.relations[0].arity {
                    continue;
                }
                assert!(
                    graphs_isomorphic(&reps[i].1, &reps[j].1, 64).unwrap().is_none(),
                    "{} vs {}",
                    reps[i].0.to_text(),
                    reps[j].0.to_text()
                );
            }
        }
        // Isomorphic set structures give isomorphic graphs.
        let s = random_hypergraph(3, 4, 0.5, 2).unwrap();
        let t = s.relabel(&[2, 0, 3, 1]).unwrap();
        let (gs, gt) = (encode(&s).unwrap().graph, encode(&t).unwrap().graph);
        assert!(graphs_isomorphic(&gs, &gt, 64).unwrap().is_some());
    }
}
