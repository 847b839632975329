//! Normal-form arithmetic in the Mekler group G(C).
//!
//! G(C) is the free 2-nilpotent group of exponent `p` on the vertices of `C`
//! modulo the relations `[x_u, x_v] = 1` for every edge `uv`. Every element
//! has a unique normal form
//!
//! ```text
//! x_0^{a_0} ... x_{n-1}^{a_{n-1}} * prod_{(u,v) non-edge, u<v} [x_u, x_v]^{c_uv}
//! ```
//!
//! with exponents in `0..p`. The basic commutators over non-edges form a
//! basis of `G' = Z(G)` when `C` has no universal vertex; in general the
//! center additionally contains the generators of universal vertices.
//!
//! Multiplication collects the generator block: moving `x_u^{b_u}` left
//! past `x_v^{a_v}` (`u < v`) contributes `[x_u, x_v]^{-a_v b_u}`, so
//!
//! ```text
//! (a, c) * (b, d) = (a + b, c + d + beta(a, b)),   beta(a, b)_uv = -a_v b_u
//! ```
//!
//! and `[g, h] = g^-1 h^-1 g h` has commutator block
//! `B(a, b)_uv = a_u b_v - a_v b_u`.

use std::collections::HashSet;
use std::fmt;

use num_bigint::BigUint;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fp_linalg::{self, mul_mod, FpSubspace, FpVector};
use crate::graph::Graph;

/// Default state budget for the commutator-length search.
pub const DEFAULT_COMMUTATOR_BUDGET: u64 = 1_000_000;

/// An element of G(C) in normal form.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GroupElement {
    pub gen: FpVector,
    pub com: FpVector,
}

impl fmt::Debug for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.gen, self.com)
    }
}

impl GroupElement {
    pub fn is_identity(&self) -> bool {
        self.gen.is_zero() && self.com.is_zero()
    }
}

/// A subgroup, described by the image of its generator block and its
/// intersection with the commutator block.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubgroupDescription {
    /// Generator-block projection of the subgroup.
    pub gen_space: FpSubspace,
    /// Commutator blocks of the subgroup elements whose generator block is
    /// zero.
    pub com_space: FpSubspace,
    /// One subgroup element per echelon row of `gen_space`, with matching
    /// generator block.
    section: Vec<GroupElement>,
}

impl PartialEq for SubgroupDescription {
    fn eq(&self, other: &Self) -> bool {
        if self.gen_space != other.gen_space || self.com_space != other.com_space {
            return false;
        }
        // Same projections; the section elements must agree modulo com_space.
        self.section.iter().zip(&other.section).all(|(a, b)| {
            let diff = a.com.sub(&b.com);
            self.com_space.contains(&diff).unwrap_or(false)
        })
    }
}

impl SubgroupDescription {
    /// log_p of the subgroup order.
    pub fn log_order(&self) -> usize {
        self.gen_space.dim() + self.com_space.dim()
    }

    pub fn order(&self) -> BigUint {
        BigUint::from(self.gen_space.p()).pow(self.log_order() as u32)
    }

    pub fn is_trivial(&self) -> bool {
        self.log_order() == 0
    }

    pub fn section(&self) -> &[GroupElement] {
        &self.section
    }
}

/// Result of [`MeklerGroup::commutator_length`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommutatorLength {
    Length(usize),
    NotInDerived,
}

/// The group G(C) for a graph `C` and odd prime `p`.
#[derive(Debug, Clone)]
pub struct MeklerGroup {
    p: u32,
    graph: Graph,
    nonedges: Vec<(usize, usize)>,
    nonedge_index: Vec<Vec<Option<usize>>>,
    radical: FpSubspace,
}

impl MeklerGroup {
    /// Builds G(C) and runs the presentation self-test.
    pub fn new(graph: Graph, p: u32) -> Result<Self> {
        fp_linalg::validate_prime(p)?;
        let n = graph.n();
        let nonedges = graph.non_edges();
        let mut nonedge_index = vec![vec![None; n]; n];
        for (k, &(u, v)) in nonedges.iter().enumerate() {
            nonedge_index[u][v] = Some(k);
            nonedge_index[v][u] = Some(k);
        }
        let mut group = MeklerGroup {
            p,
            graph,
            nonedges,
            nonedge_index,
            radical: FpSubspace::zero(p, n),
        };
        group.radical = group.compute_radical()?;
        group.verify_presentation()?;
        Ok(group)
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    /// Number of generators.
    pub fn n(&self) -> usize {
        self.graph.n()
    }

    /// Number of basic commutators (non-edges).
    pub fn m(&self) -> usize {
        self.nonedges.len()
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn nonedges(&self) -> &[(usize, usize)] {
        &self.nonedges
    }

    pub fn nonedge_index(&self, u: usize, v: usize) -> Option<usize> {
        self.nonedge_index[u][v]
    }

    /// Generator blocks of central elements: the radical of the commutator
    /// form.
    pub fn radical(&self) -> &FpSubspace {
        &self.radical
    }

    fn compute_radical(&self) -> Result<FpSubspace> {
        // a is radical iff B(a, e_w) = 0 for every w; each non-edge (u, v)
        // contributes the functionals a -> a_u and a -> a_v.
        let n = self.n();
        let mut rows = Vec::new();
        for &(u, v) in &self.nonedges {
            rows.push(FpVector::unit(self.p, n, u));
            rows.push(FpVector::unit(self.p, n, v));
        }
        fp_linalg::kernel(self.p, n, &rows)
    }

    pub fn identity(&self) -> GroupElement {
        GroupElement {
            gen: FpVector::zero(self.p, self.n()),
            com: FpVector::zero(self.p, self.m()),
        }
    }

    /// The generator `x_v`.
    pub fn generator(&self, v: usize) -> GroupElement {
        GroupElement {
            gen: FpVector::unit(self.p, self.n(), v),
            com: FpVector::zero(self.p, self.m()),
        }
    }

    /// The element with the given generator block and trivial commutator
    /// block.
    pub fn from_gen(&self, gen: FpVector) -> Result<GroupElement> {
        self.element(gen, FpVector::zero(self.p, self.m()))
    }

    pub fn element(&self, gen: FpVector, com: FpVector) -> Result<GroupElement> {
        let g = GroupElement { gen, com };
        self.check(&g)?;
        Ok(g)
    }

    pub fn check(&self, g: &GroupElement) -> Result<()> {
        if g.gen.p() != self.p
            || g.com.p() != self.p
            || g.gen.len() != self.n()
            || g.com.len() != self.m()
        {
            return Err(Error::ParentMismatch);
        }
        Ok(())
    }

    /// The correction `beta(a, b)` from collecting `x^a x^b`.
    fn cocycle(&self, a: &FpVector, b: &FpVector) -> FpVector {
        let p = self.p;
        let mut out = FpVector::zero(p, self.m());
        for (k, &(u, v)) in self.nonedges.iter().enumerate() {
            let t = mul_mod(a.get(v), b.get(u), p);
            if t != 0 {
                out.set(k, -(t as i64));
            }
        }
        out
    }

    /// The commutator form `B(a, b)_uv = a_u b_v - a_v b_u` over non-edges.
    pub fn form(&self, a: &FpVector, b: &FpVector) -> FpVector {
        let p = self.p;
        let coords = self
            .nonedges
            .iter()
            .map(|&(u, v)| {
                let x = mul_mod(a.get(u), b.get(v), p);
                let y = mul_mod(a.get(v), b.get(u), p);
                (x + p - y) % p
            })
            .collect();
        FpVector::from_residues(p, coords)
    }

    /// Whether the generator blocks commute, i.e. `B(a, b) = 0`.
    pub fn gens_commute(&self, a: &FpVector, b: &FpVector) -> bool {
        let p = self.p;
        self.nonedges.iter().all(|&(u, v)| {
            mul_mod(a.get(u), b.get(v), p) == mul_mod(a.get(v), b.get(u), p)
        })
    }

    pub fn multiply(&self, g: &GroupElement, h: &GroupElement) -> Result<GroupElement> {
        self.check(g)?;
        self.check(h)?;
        Ok(self.mul_unchecked(g, h))
    }

    pub(crate) fn mul_unchecked(&self, g: &GroupElement, h: &GroupElement) -> GroupElement {
        let mut com = g.com.add(&h.com);
        com = com.add(&self.cocycle(&g.gen, &h.gen));
        GroupElement {
            gen: g.gen.add(&h.gen),
            com,
        }
    }

    pub fn inverse(&self, g: &GroupElement) -> Result<GroupElement> {
        self.check(g)?;
        // (a, c)(-a, d) = (0, c + d + beta(a, -a)); solve for d.
        let neg = g.gen.neg();
        let corr = self.cocycle(&g.gen, &neg);
        Ok(GroupElement {
            gen: neg,
            com: g.com.neg().sub(&corr),
        })
    }

    /// `g^k` for any integer `k`.
    pub fn power(&self, g: &GroupElement, k: i64) -> Result<GroupElement> {
        self.check(g)?;
        let p = self.p as i64;
        let k = k.rem_euclid(p);
        // (a, c)^k = (k a, k c + C(k, 2) beta(a, a)).
        let binom = k * (k - 1) / 2;
        let mut com = g.com.scale(k);
        com = com.add(&self.cocycle(&g.gen, &g.gen).scale(binom));
        Ok(GroupElement {
            gen: g.gen.scale(k),
            com,
        })
    }

    /// `[g, h] = g^-1 h^-1 g h`, via the closed form.
    pub fn commutator(&self, g: &GroupElement, h: &GroupElement) -> Result<GroupElement> {
        self.check(g)?;
        self.check(h)?;
        Ok(GroupElement {
            gen: FpVector::zero(self.p, self.n()),
            com: self.form(&g.gen, &h.gen),
        })
    }

    /// `[g, h]` evaluated literally as the word `g^-1 h^-1 g h`.
    pub fn commutator_word(&self, g: &GroupElement, h: &GroupElement) -> Result<GroupElement> {
        let gi = self.inverse(g)?;
        let hi = self.inverse(h)?;
        let w = self.multiply(&gi, &hi)?;
        let w = self.multiply(&w, g)?;
        self.multiply(&w, h)
    }

    pub fn is_central(&self, g: &GroupElement) -> bool {
        self.radical.reduce(&g.gen).is_zero()
    }

    pub fn commute(&self, g: &GroupElement, h: &GroupElement) -> bool {
        self.gens_commute(&g.gen, &h.gen)
    }

    /// Checks that the normal form realizes the presentation: generator
    /// relations hold exactly on edges, commutator words agree with the
    /// closed form, and generators have order `p`.
    pub fn verify_presentation(&self) -> Result<()> {
        let n = self.n();
        let fail = |msg: String| Err(Error::Precondition(format!("presentation self-test: {msg}")));
        for u in 0..n {
            let xu = self.generator(u);
            if !self.power(&xu, self.p as i64)?.is_identity() {
                return fail(format!("x_{u}^p is not trivial"));
            }
            let mut acc = self.identity();
            for _ in 0..self.p {
                acc = self.mul_unchecked(&acc, &xu);
            }
            if !acc.is_identity() {
                return fail(format!("repeated product x_{u}^p is not trivial"));
            }
            for v in 0..n {
                if u == v {
                    continue;
                }
                let xv = self.generator(v);
                let word = self.commutator_word(&xu, &xv)?;
                if word != self.commutator(&xu, &xv)? {
                    return fail(format!("[x_{u}, x_{v}] word disagrees with closed form"));
                }
                if word.is_identity() != self.graph.adjacent(u, v) {
                    return fail(format!("[x_{u}, x_{v}] triviality does not match adjacency"));
                }
                // x_v x_u computed directly equals x_u x_v [x_v, x_u].
                let lhs = self.mul_unchecked(&xv, &xu);
                let rhs = self.mul_unchecked(&self.mul_unchecked(&xu, &xv), &self.commutator(&xv, &xu)?);
                if lhs != rhs {
                    return fail(format!("x_{v} x_{u} != x_{u} x_{v} [x_{v}, x_{u}]"));
                }
            }
        }
        Ok(())
    }

    /// `G' `: trivial generator block, commutator block spanned by all
    /// values of the commutator form.
    pub fn derived(&self) -> SubgroupDescription {
        let n = self.n();
        let mut rows = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                rows.push(self.form(&FpVector::unit(self.p, n, u), &FpVector::unit(self.p, n, v)));
            }
        }
        SubgroupDescription {
            gen_space: FpSubspace::zero(self.p, n),
            com_space: fp_linalg::rref(self.p, self.m(), &rows).expect("form values have matching length"),
            section: Vec::new(),
        }
    }

    /// `Z(G)`: radical generator block, full commutator block.
    pub fn center(&self) -> SubgroupDescription {
        self.subgroup_with_full_com(self.radical.clone())
    }

    pub fn whole(&self) -> SubgroupDescription {
        let n = self.n();
        SubgroupDescription {
            gen_space: FpSubspace::full(self.p, n),
            com_space: FpSubspace::full(self.p, self.m()),
            section: (0..n).map(|v| self.generator(v)).collect(),
        }
    }

    /// The subgroup with the given generator-block projection that contains
    /// all of the commutator block.
    pub fn subgroup_with_full_com(&self, gen_space: FpSubspace) -> SubgroupDescription {
        let section = gen_space
            .basis()
            .iter()
            .map(|r| GroupElement {
                gen: r.clone(),
                com: FpVector::zero(self.p, self.m()),
            })
            .collect();
        SubgroupDescription {
            gen_space,
            com_space: FpSubspace::full(self.p, self.m()),
            section,
        }
    }

    /// The subgroup generated by `elements`.
    ///
    /// Row-reduces the elements with group operations. Rows whose generator
    /// block vanishes are central relation words; their commutator blocks,
    /// together with the form values on the surviving rows, span the
    /// commutator part of the subgroup.
    pub fn subgroup_generated(&self, elements: &[GroupElement]) -> Result<SubgroupDescription> {
        for g in elements {
            self.check(g)?;
        }
        let n = self.n();
        let p = self.p;
        let mut rows: Vec<GroupElement> = elements.to_vec();
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..n {
            if r == rows.len() {
                break;
            }
            let Some(src) = (r..rows.len()).find(|&i| rows[i].gen.get(c) != 0) else {
                continue;
            };
            rows.swap(r, src);
            let inv = fp_linalg::inv_mod(rows[r].gen.get(c), p);
            rows[r] = self.power(&rows[r], inv as i64)?;
            let pivot = rows[r].clone();
            for i in 0..rows.len() {
                if i == r {
                    continue;
                }
                let k = rows[i].gen.get(c);
                if k != 0 {
                    let corr = self.power(&pivot, -(k as i64))?;
                    rows[i] = self.mul_unchecked(&rows[i], &corr);
                }
            }
            pivots.push(c);
            r += 1;
        }
        let section: Vec<GroupElement> = rows[..r].to_vec();
        let mut com_rows: Vec<FpVector> = rows[r..].iter().map(|g| g.com.clone()).collect();
        for i in 0..section.len() {
            for j in i + 1..section.len() {
                com_rows.push(self.form(&section[i].gen, &section[j].gen));
            }
        }
        let gen_rows: Vec<FpVector> = section.iter().map(|g| g.gen.clone()).collect();
        Ok(SubgroupDescription {
            gen_space: fp_linalg::rref(p, n, &gen_rows)?,
            com_space: fp_linalg::rref(p, self.m(), &com_rows)?,
            section,
        })
    }

    /// Membership in a subgroup description: subtract the canonical
    /// preimage of the generator block and test the residue.
    pub fn subgroup_contains(&self, h: &SubgroupDescription, g: &GroupElement) -> Result<bool> {
        self.check(g)?;
        let Some(coeffs) = h.gen_space.coordinates(&g.gen)? else {
            return Ok(false);
        };
        let mut pre = self.identity();
        for (s, &k) in h.section.iter().zip(&coeffs) {
            if k != 0 {
                pre = self.mul_unchecked(&pre, &self.power(s, k as i64)?);
            }
        }
        let residue = self.mul_unchecked(g, &self.inverse(&pre)?);
        debug_assert!(residue.gen.is_zero());
        h.com_space.contains(&residue.com)
    }

    /// `[H, H]` for a subgroup description.
    pub fn derived_of(&self, h: &SubgroupDescription) -> SubgroupDescription {
        let basis = h.gen_space.basis();
        let mut rows = Vec::new();
        for i in 0..basis.len() {
            for j in i + 1..basis.len() {
                rows.push(self.form(&basis[i], &basis[j]));
            }
        }
        SubgroupDescription {
            gen_space: FpSubspace::zero(self.p, self.n()),
            com_space: fp_linalg::rref(self.p, self.m(), &rows).expect("form values have matching length"),
            section: Vec::new(),
        }
    }

    /// Every nonzero value of the commutator form, deduplicated. Counts
    /// enumerated vectors against `budget`.
    pub fn form_image(&self, budget: u64) -> Result<Vec<FpVector>> {
        let n = self.n();
        let p = self.p;
        let mut spent = 0u64;
        let mut seen: HashSet<FpVector> = HashSet::new();
        let mut out = Vec::new();
        let total = (p as u64).checked_pow(n as u32).ok_or_else(|| Error::budget("commutator form image", budget))?;
        for idx in 1..total {
            let a = FpVector::from_index(p, n, idx);
            // Scalar multiples of a give the same image subspace.
            if a.get(a.leading().expect("nonzero index")) != 1 {
                continue;
            }
            let rows: Vec<FpVector> = (0..n).map(|w| self.form(&a, &FpVector::unit(p, n, w))).collect();
            let image = fp_linalg::rref(p, self.m(), &rows)?;
            let size = (p as u64).checked_pow(image.dim() as u32).unwrap_or(u64::MAX);
            spent = spent.saturating_add(size);
            if spent > budget {
                return Err(Error::budget("commutator form image", budget));
            }
            for v in image.elements() {
                if !v.is_zero() && seen.insert(v.clone()) {
                    out.push(v);
                }
            }
        }
        out.sort();
        Ok(out)
    }

    /// Minimum number of commutators whose product is `z`, by breadth-first
    /// search over sums of form values.
    pub fn commutator_length(&self, z: &GroupElement, budget: u64) -> Result<CommutatorLength> {
        self.check(z)?;
        if !z.gen.is_zero() {
            return Ok(CommutatorLength::NotInDerived);
        }
        if z.com.is_zero() {
            return Ok(CommutatorLength::Length(0));
        }
        // Each basic commutator power c e_uv = [x_u^c, x_v] costs one.
        let upper = z.com.coords().iter().filter(|&&c| c != 0).count() as u64;
        let with_bound = |e: Error| match e {
            Error::Budget { what, limit, .. } => Error::Budget {
                what,
                limit,
                best_bound: Some(upper),
            },
            other => other,
        };
        let image = self.form_image(budget).map_err(with_bound)?;
        let image_set: HashSet<&FpVector> = image.iter().collect();
        if image_set.contains(&z.com) {
            return Ok(CommutatorLength::Length(1));
        }
        let mut visited: HashSet<FpVector> = HashSet::new();
        visited.insert(FpVector::zero(self.p, self.m()));
        let mut frontier = vec![FpVector::zero(self.p, self.m())];
        let mut spent = image.len() as u64;
        for depth in 1..=upper as usize {
            let mut next = Vec::new();
            for f in &frontier {
                for b in &image {
                    let s = f.add(b);
                    if s == z.com {
                        return Ok(CommutatorLength::Length(depth));
                    }
                    if visited.insert(s.clone()) {
                        spent += 1;
                        if spent > budget {
                            return Err(Error::Budget {
                                what: "commutator length search".into(),
                                limit: budget,
                                best_bound: Some(upper),
                            });
                        }
                        next.push(s);
                    }
                }
            }
            frontier = next;
        }
        // The basic-commutator decomposition always succeeds within `upper`.
        Ok(CommutatorLength::Length(upper as usize))
    }

    /// `|G| = p^(n + m)`.
    pub fn order(&self) -> BigUint {
        BigUint::from(self.p).pow((self.n() + self.m()) as u32)
    }

    /// All generator blocks, each once, in lexicographic order.
    pub fn enumerate_gen_parts(&self) -> impl Iterator<Item = FpVector> + '_ {
        let total = (self.p as u64).checked_pow(self.n() as u32).unwrap_or(u64::MAX);
        (0..total).map(move |i| FpVector::from_index(self.p, self.n(), i))
    }

    pub fn random_element<R: Rng + ?Sized>(&self, rng: &mut R) -> GroupElement {
        let p = self.p;
        let gen = (0..self.n()).map(|_| rng.gen_range(0..p)).collect();
        let com = (0..self.m()).map(|_| rng.gen_range(0..p)).collect();
        GroupElement {
            gen: FpVector::from_residues(p, gen),
            com: FpVector::from_residues(p, com),
        }
    }

    /// Canonical literal `gen:[..];com:{(u,v):e,..}`; zero commutator
    /// entries are omitted.
    pub fn format_element(&self, g: &GroupElement) -> String {
        let gen: Vec<String> = g.gen.coords().iter().map(|c| c.to_string()).collect();
        let com: Vec<String> = self
            .nonedges
            .iter()
            .zip(g.com.coords())
            .filter(|(_, &c)| c != 0)
            .map(|(&(u, v), c)| format!("({u},{v}):{c}"))
            .collect();
        format!("gen:[{}];com:{{{}}}", gen.join(","), com.join(","))
    }

    /// Parses an element literal; whitespace is ignored.
    pub fn parse_element(&self, text: &str) -> Result<GroupElement> {
        let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        let err = |msg: &str| Error::Syntax {
            pos: 0,
            msg: format!("element literal: {msg}"),
        };
        let rest = s.strip_prefix("gen:[").ok_or_else(|| err("expected `gen:[`"))?;
        let close = rest.find(']').ok_or_else(|| err("unterminated generator block"))?;
        let gen_text = &rest[..close];
        let mut gen = Vec::new();
        if !gen_text.is_empty() {
            for tok in gen_text.split(',') {
                gen.push(tok.parse::<i64>().map_err(|_| err("bad generator exponent"))?);
            }
        }
        if gen.len() != self.n() {
            return Err(err(&format!("expected {} generator exponents, got {}", self.n(), gen.len())));
        }
        let rest = &rest[close + 1..];
        let mut com = FpVector::zero(self.p, self.m());
        if !rest.is_empty() {
            let body = rest
                .strip_prefix(";com:{")
                .and_then(|r| r.strip_suffix('}'))
                .ok_or_else(|| err("expected `;com:{...}`"))?;
            let mut seen = HashSet::new();
            let mut cur = body;
            while !cur.is_empty() {
                let entry_end = cur.find(')').ok_or_else(|| err("unterminated pair"))?;
                let pair = cur[..entry_end].strip_prefix('(').ok_or_else(|| err("expected `(`"))?;
                let (u, v) = pair.split_once(',').ok_or_else(|| err("expected `(u,v)`"))?;
                let u: usize = u.parse().map_err(|_| err("bad vertex"))?;
                let v: usize = v.parse().map_err(|_| err("bad vertex"))?;
                let after = cur[entry_end + 1..].strip_prefix(':').ok_or_else(|| err("expected `:`"))?;
                let (val, next) = match after.find(',') {
                    Some(i) => (&after[..i], &after[i + 1..]),
                    None => (after, ""),
                };
                let e: i64 = val.parse().map_err(|_| err("bad commutator exponent"))?;
                if u >= v || v >= self.n() {
                    return Err(err(&format!("pair ({u},{v}) must satisfy u < v < n")));
                }
                let k = self
                    .nonedge_index(u, v)
                    .ok_or_else(|| err(&format!("({u},{v}) is an edge")))?;
                if !seen.insert(k) {
                    return Err(err(&format!("duplicate pair ({u},{v})")));
                }
                com.set(k, e);
                cur = next;
            }
        }
        Ok(GroupElement {
            gen: FpVector::new(self.p, gen),
            com,
        })
    }
}
