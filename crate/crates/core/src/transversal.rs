//! Transversals and finite evaluation of the partial types Φ, Ψ and π.
//!
//! A [`Landscape`] holds the full classification of a group's generator
//! blocks. All predicates here are evaluated against it.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{self, Census, ElementKind};
use crate::error::{Error, Result};
use crate::fp_linalg::{self, FpSubspace, FpVector};
use crate::group::{GroupElement, MeklerGroup};

/// Default budget for enumerating coefficient vectors and search states.
pub const DEFAULT_SEARCH_BUDGET: u64 = 1_000_000;

/// Classification of every generator block of a group.
#[derive(Debug, Clone)]
pub struct Landscape<'a> {
    group: &'a MeklerGroup,
    cap: u64,
    census: Census,
    kinds: Vec<ElementKind>,
    nu_gens: Vec<FpVector>,
    p_gens: Vec<FpVector>,
    nu_span: FpSubspace,
    nu_p_span: FpSubspace,
}

impl<'a> Landscape<'a> {
    pub fn new(group: &'a MeklerGroup, cap: u64) -> Result<Self> {
        let census = classify::census(group, cap)?;
        let p = group.p();
        let n = group.n();
        let mut by_kernel: BTreeMap<Vec<FpVector>, ElementKind> = BTreeMap::new();
        for r in census.noncentral() {
            let a = FpVector::from_residues(p, r.representative.clone());
            by_kernel.insert(classify::centralizer_kernel(group, &a).basis().to_vec(), r.kind);
        }
        let total = (p as u64).pow(n as u32);
        let kinds: Vec<ElementKind> = (0..total)
            .into_par_iter()
            .map(|i| {
                let a = FpVector::from_index(p, n, i);
                if classify::approx_key(group, &a).is_none() {
                    return ElementKind::Central;
                }
                let k = classify::centralizer_kernel(group, &a);
                by_kernel[k.basis()]
            })
            .collect();
        let collect = |kind: ElementKind| -> Vec<FpVector> {
            kinds
                .iter()
                .enumerate()
                .filter(|(_, &k)| k == kind)
                .map(|(i, _)| FpVector::from_index(p, n, i as u64))
                .collect()
        };
        let nu_gens = collect(ElementKind::Type1Nu);
        let p_gens = collect(ElementKind::TypeP);
        let nu_span = group.radical().with_vectors(&nu_gens)?;
        let nu_p_span = nu_span.with_vectors(&p_gens)?;
        Ok(Landscape {
            group,
            cap,
            census,
            kinds,
            nu_gens,
            p_gens,
            nu_span,
            nu_p_span,
        })
    }

    pub fn group(&self) -> &'a MeklerGroup {
        self.group
    }

    pub fn census(&self) -> &Census {
        &self.census
    }

    pub fn kind_of_gen(&self, a: &FpVector) -> ElementKind {
        self.kinds[a.index() as usize]
    }

    pub fn kind_of(&self, g: &GroupElement) -> ElementKind {
        self.kind_of_gen(&g.gen)
    }

    /// Span of type-1^ν generator blocks plus the radical: the generator
    /// block of `⟨type 1^ν⟩·Z(G)`.
    pub fn nu_span(&self) -> &FpSubspace {
        &self.nu_span
    }

    /// Generator block of `⟨type 1^ν, type p⟩·Z(G)`.
    pub fn nu_p_span(&self) -> &FpSubspace {
        &self.nu_p_span
    }

    /// Centralizer kernel of the handle class of a type-p block.
    fn handle_key(&self, a: &FpVector) -> Result<Vec<FpVector>> {
        let hs = classify::handles_of_gen(self.group, a, self.cap)?;
        let h = hs.first().ok_or_else(|| Error::Domain("type p element without handle".into()))?;
        Ok(classify::centralizer_kernel(self.group, h).basis().to_vec())
    }
}

/// `g` is not in `⟨type 1^ν⟩·Z(G)`.
pub fn is_proper(land: &Landscape, g: &GroupElement) -> Result<bool> {
    land.group.check(g)?;
    if land.group.is_central(g) {
        return Err(Error::Precondition("is_proper needs a noncentral element".into()));
    }
    Ok(!land.nu_span.contains(&g.gen)?)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transversal {
    pub x_nu: Vec<GroupElement>,
    pub x_p: Vec<GroupElement>,
    pub x_iota: Vec<GroupElement>,
    /// Index into `x_nu` of the handle of each `x_p` entry.
    pub handle_map: Vec<usize>,
}

impl Transversal {
    pub fn all(&self) -> Vec<GroupElement> {
        let mut v = self.x_nu.clone();
        v.extend(self.x_p.iter().cloned());
        v.extend(self.x_iota.iter().cloned());
        v
    }

    pub fn len(&self) -> usize {
        self.x_nu.len() + self.x_p.len() + self.x_iota.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_json(&self, group: &MeklerGroup) -> serde_json::Value {
        let lit = |v: &[GroupElement]| -> Vec<String> { v.iter().map(|g| group.format_element(g)).collect() };
        serde_json::json!({
            "x_nu": lit(&self.x_nu),
            "x_p": lit(&self.x_p),
            "x_iota": lit(&self.x_iota),
            "handle_map": self.handle_map,
        })
    }
}

fn reps_of(land: &Landscape, kind: ElementKind) -> Vec<FpVector> {
    let p = land.group.p();
    land.census
        .noncentral()
        .filter(|r| r.kind == kind)
        .map(|r| FpVector::from_residues(p, r.representative.clone()))
        .collect()
}

/// Greedy transversal. `x_nu` takes the least representative of every
/// type-1^ν class; `x_p` and `x_iota` scan proper candidate classes in an
/// order shuffled by `seed`.
pub fn build_transversal(land: &Landscape, seed: u64) -> Result<Transversal> {
    let group = land.group;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nu_reps = reps_of(land, ElementKind::Type1Nu);
    let nu_keys: Vec<Vec<FpVector>> = nu_reps
        .iter()
        .map(|a| classify::centralizer_kernel(group, a).basis().to_vec())
        .collect();

    let mut p_cands: Vec<FpVector> = reps_of(land, ElementKind::TypeP)
        .into_iter()
        .filter(|a| !land.nu_span.contains(a).unwrap_or(true))
        .collect();
    p_cands.shuffle(&mut rng);
    let mut per_handle: BTreeMap<usize, FpSubspace> = BTreeMap::new();
    let mut x_p = Vec::new();
    let mut handle_map = Vec::new();
    for a in p_cands {
        let key = land.handle_key(&a)?;
        let h = nu_keys
            .iter()
            .position(|k| *k == key)
            .ok_or_else(|| Error::Domain("handle class missing from census".into()))?;
        let span = per_handle.entry(h).or_insert_with(|| land.nu_span.clone());
        if !span.contains(&a)? {
            *span = span.with_vectors(std::slice::from_ref(&a))?;
            x_p.push(group.from_gen(a)?);
            handle_map.push(h);
        }
    }

    let mut iota_cands: Vec<FpVector> = reps_of(land, ElementKind::Type1Iota)
        .into_iter()
        .filter(|a| !land.nu_span.contains(a).unwrap_or(true))
        .collect();
    iota_cands.shuffle(&mut rng);
    let mut span = land.nu_p_span.clone();
    let mut x_iota = Vec::new();
    for a in iota_cands {
        if !span.contains(&a)? {
            span = span.with_vectors(std::slice::from_ref(&a))?;
            x_iota.push(group.from_gen(a)?);
        }
    }

    Ok(Transversal {
        x_nu: nu_reps.into_iter().map(|a| group.from_gen(a)).collect::<Result<_>>()?,
        x_p,
        x_iota,
        handle_map,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Part {
    Nu,
    P,
    Iota,
    Central,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bounds {
    /// Maximum number of absorbing factors (type-1^ν products, or
    /// commutators for Ψ).
    pub m_max: usize,
    /// Maximum number of tuple entries combined in one instance.
    pub n_max: usize,
}

/// A violated instance of one of the schemas.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum Violation {
    WrongType {
        part: Part,
        index: usize,
        found: ElementKind,
    },
    Equivalent {
        part: Part,
        first: usize,
        second: usize,
    },
    /// The entry equals the product of `factors`, all of type 1^ν.
    NotProper {
        part: Part,
        index: usize,
        factors: Vec<GroupElement>,
    },
    /// `central * prod(factors) = prod_j x_{indices[j]}^{exponents[j]}`,
    /// where the factors are of the absorbing types.
    Dependent {
        part: Part,
        indices: Vec<usize>,
        exponents: Vec<u32>,
        factors: Vec<GroupElement>,
        central: GroupElement,
    },
    /// `prod_j y_{indices[j]}^{exponents[j]} = prod [a, b]` over the pairs.
    CentralDependent {
        indices: Vec<usize>,
        exponents: Vec<u32>,
        commutators: Vec<(GroupElement, GroupElement)>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredicateReport {
    pub satisfied: bool,
    pub bounds_used: Bounds,
    pub counterexample: Option<Violation>,
}

impl PredicateReport {
    fn pass(bounds: Bounds) -> Self {
        PredicateReport {
            satisfied: true,
            bounds_used: bounds,
            counterexample: None,
        }
    }

    fn fail(bounds: Bounds, v: Violation) -> Self {
        PredicateReport {
            satisfied: false,
            bounds_used: bounds,
            counterexample: Some(v),
        }
    }
}

/// Breadth-first reachability over `F_p^n / rad` by sums of step vectors.
struct Reach {
    p: u32,
    n: usize,
    dist: Vec<u32>,
    parent: Vec<(u64, u32)>,
    steps: Vec<FpVector>,
}

impl Reach {
    fn new(rad: &FpSubspace, steps: &[FpVector], max_steps: usize, budget: u64) -> Result<Self> {
        let p = rad.p();
        let n = rad.ambient();
        let total = (p as u64)
            .checked_pow(n as u32)
            .filter(|&t| t <= budget)
            .ok_or_else(|| Error::budget("bounded product search", budget))?;
        let mut uniq: Vec<FpVector> = steps.iter().map(|s| rad.reduce(s)).filter(|s| !s.is_zero()).collect();
        uniq.sort();
        uniq.dedup();
        let mut dist = vec![u32::MAX; total as usize];
        let mut parent = vec![(0u64, 0u32); total as usize];
        dist[0] = 0;
        let mut frontier = vec![FpVector::zero(p, n)];
        let mut work = 0u64;
        for d in 1..=max_steps {
            let mut next = Vec::new();
            for f in &frontier {
                let fi = f.index();
                for (si, s) in uniq.iter().enumerate() {
                    work += 1;
                    if work > budget.saturating_mul(64) {
                        return Err(Error::budget("bounded product search", budget));
                    }
                    let t = rad.reduce(&f.add(s));
                    let ti = t.index() as usize;
                    if dist[ti] == u32::MAX {
                        dist[ti] = d as u32;
                        parent[ti] = (fi, si as u32);
                        next.push(t);
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            frontier = next;
        }
        Ok(Reach {
            p,
            n,
            dist,
            parent,
            steps: uniq,
        })
    }

    /// Step vectors summing to `v` (mod rad), if reachable.
    fn path(&self, rad: &FpSubspace, v: &FpVector) -> Option<Vec<FpVector>> {
        let mut idx = rad.reduce(v).index();
        if self.dist[idx as usize] == u32::MAX {
            return None;
        }
        let mut out = Vec::new();
        while idx != 0 {
            let (prev, s) = self.parent[idx as usize];
            out.push(self.steps[s as usize].clone());
            idx = prev;
        }
        debug_assert!(out.iter().all(|s| s.p() == self.p && s.len() == self.n));
        out.reverse();
        Some(out)
    }
}

fn product(group: &MeklerGroup, items: &[GroupElement]) -> GroupElement {
    items.iter().fold(group.identity(), |acc, g| group.mul_unchecked(&acc, g))
}

/// Type-1^ν elements whose product is exactly `target`, given generator
/// blocks summing to `gen(target)` modulo the radical.
fn exact_factors(group: &MeklerGroup, blocks: Vec<FpVector>, target: &GroupElement) -> Result<Vec<GroupElement>> {
    let mut factors: Vec<GroupElement> = blocks.into_iter().map(|b| group.from_gen(b)).collect::<Result<_>>()?;
    let prod = product(group, &factors);
    let z = group.multiply(&group.inverse(&prod)?, target)?;
    // z is central and a type-1^ν element times a central one keeps its type.
    if let Some(last) = factors.last_mut() {
        *last = group.multiply(last, &z)?;
    }
    Ok(factors)
}

fn subsets_with_coefficients(
    k: usize,
    n_max: usize,
    p: u32,
    budget: u64,
    mut visit: impl FnMut(&[usize], &[u32]) -> Result<bool>,
) -> Result<()> {
    let mut spent = 0u64;
    for mask in 1u64..(1u64 << k) {
        let idx: Vec<usize> = (0..k).filter(|&i| mask >> i & 1 == 1).collect();
        if idx.len() > n_max {
            continue;
        }
        let combos = ((p - 1) as u64).pow(idx.len() as u32);
        for c in 0..combos {
            spent += 1;
            if spent > budget {
                return Err(Error::budget("coefficient enumeration", budget));
            }
            let mut q = Vec::with_capacity(idx.len());
            let mut r = c;
            for _ in 0..idx.len() {
                q.push((r % (p as u64 - 1)) as u32 + 1);
                r /= p as u64 - 1;
            }
            if visit(&idx, &q)? {
                return Ok(());
            }
        }
    }
    Ok(())
}

fn check_types_and_classes(land: &Landscape, part: Part, xs: &[GroupElement], want: ElementKind) -> Result<Option<Violation>> {
    for (i, x) in xs.iter().enumerate() {
        land.group.check(x)?;
        let found = land.kind_of(x);
        if found != want {
            return Ok(Some(Violation::WrongType { part, index: i, found }));
        }
    }
    let keys: Vec<FpSubspace> = xs.iter().map(|x| classify::centralizer_kernel(land.group, &x.gen)).collect();
    for i in 0..xs.len() {
        for j in i + 1..xs.len() {
            if keys[i] == keys[j] {
                return Ok(Some(Violation::Equivalent { part, first: i, second: j }));
            }
        }
    }
    Ok(None)
}

fn check_proper(land: &Landscape, part: Part, xs: &[GroupElement], reach: &Reach, m_max: usize) -> Result<Option<Violation>> {
    let rad = land.group.radical();
    for (i, x) in xs.iter().enumerate() {
        let r = rad.reduce(&x.gen);
        if reach.dist[r.index() as usize] as usize <= m_max {
            let blocks = reach.path(rad, &x.gen).expect("reachable");
            let factors = exact_factors(land.group, blocks, x)?;
            return Ok(Some(Violation::NotProper { part, index: i, factors }));
        }
    }
    Ok(None)
}

#[allow(clippy::too_many_arguments)]
fn check_independent(
    land: &Landscape,
    part: Part,
    xs: &[GroupElement],
    groups: &[Vec<usize>],
    reach: &Reach,
    bounds: Bounds,
    budget: u64,
) -> Result<Option<Violation>> {
    let group = land.group;
    let rad = group.radical();
    let p = group.p();
    let mut found = None;
    for members in groups {
        subsets_with_coefficients(members.len(), bounds.n_max, p, budget, |sub, q| {
            let indices: Vec<usize> = sub.iter().map(|&s| members[s]).collect();
            let mut v = FpVector::zero(p, group.n());
            for (&i, &c) in indices.iter().zip(q) {
                v = v.add(&xs[i].gen.scale(c as i64));
            }
            let r = rad.reduce(&v);
            if reach.dist[r.index() as usize] as usize > bounds.m_max {
                return Ok(false);
            }
            let blocks = reach.path(rad, &v).expect("reachable");
            let factors: Vec<GroupElement> = blocks.into_iter().map(|b| group.from_gen(b)).collect::<Result<_>>()?;
            let rhs: Vec<GroupElement> = indices
                .iter()
                .zip(q)
                .map(|(&i, &c)| group.power(&xs[i], c as i64))
                .collect::<Result<_>>()?;
            let rhs = product(group, &rhs);
            let lhs = product(group, &factors);
            let central = group.multiply(&rhs, &group.inverse(&lhs)?)?;
            found = Some(Violation::Dependent {
                part,
                indices,
                exponents: q.to_vec(),
                factors,
                central,
            });
            Ok(true)
        })?;
        if found.is_some() {
            break;
        }
    }
    Ok(found)
}

pub fn default_phi_bounds(land: &Landscape, p_len: usize, iota_len: usize) -> Bounds {
    Bounds {
        m_max: land.group.n(),
        n_max: p_len.max(iota_len),
    }
}

/// Evaluates every instance of Φ within `bounds` and reports the first
/// violated one.
pub fn check_phi(
    land: &Landscape,
    nu: &[GroupElement],
    xp: &[GroupElement],
    iota: &[GroupElement],
    bounds: Option<Bounds>,
) -> Result<PredicateReport> {
    let bounds = bounds.unwrap_or_else(|| default_phi_bounds(land, xp.len(), iota.len()));
    let budget = DEFAULT_SEARCH_BUDGET.max(land.cap);
    for (part, xs, kind) in [
        (Part::Nu, nu, ElementKind::Type1Nu),
        (Part::P, xp, ElementKind::TypeP),
        (Part::Iota, iota, ElementKind::Type1Iota),
    ] {
        if let Some(v) = check_types_and_classes(land, part, xs, kind)? {
            return Ok(PredicateReport::fail(bounds, v));
        }
    }
    let rad = land.group.radical();
    let reach_nu = Reach::new(rad, &land.nu_gens, bounds.m_max, budget)?;
    for (part, xs) in [(Part::P, xp), (Part::Iota, iota)] {
        if let Some(v) = check_proper(land, part, xs, &reach_nu, bounds.m_max)? {
            return Ok(PredicateReport::fail(bounds, v));
        }
    }

    let mut by_handle: BTreeMap<Vec<FpVector>, Vec<usize>> = BTreeMap::new();
    for (i, x) in xp.iter().enumerate() {
        by_handle.entry(land.handle_key(&x.gen)?).or_default().push(i);
    }
    let groups: Vec<Vec<usize>> = by_handle.into_values().collect();
    if let Some(v) = check_independent(land, Part::P, xp, &groups, &reach_nu, bounds, budget)? {
        return Ok(PredicateReport::fail(bounds, v));
    }

    if !iota.is_empty() {
        let mut absorbing = land.nu_gens.clone();
        absorbing.extend(land.p_gens.iter().cloned());
        let reach_np = Reach::new(rad, &absorbing, bounds.m_max, budget)?;
        let all = vec![(0..iota.len()).collect::<Vec<_>>()];
        if let Some(v) = check_independent(land, Part::Iota, iota, &all, &reach_np, bounds, budget)? {
            return Ok(PredicateReport::fail(bounds, v));
        }
    }
    Ok(PredicateReport::pass(bounds))
}

fn require_central(group: &MeklerGroup, ys: &[GroupElement]) -> Result<()> {
    for (i, y) in ys.iter().enumerate() {
        group.check(y)?;
        if !group.is_central(y) {
            return Err(Error::Precondition(format!("entry {i} of the central tuple is not central")));
        }
    }
    Ok(())
}

/// Writes `z ∈ G'` as a product of commutators of generator powers.
fn basic_commutators(group: &MeklerGroup, z: &GroupElement) -> Result<Vec<(GroupElement, GroupElement)>> {
    let mut out = Vec::new();
    for (k, &(u, v)) in group.nonedges().iter().enumerate() {
        let c = z.com.get(k);
        if c != 0 {
            out.push((group.power(&group.generator(u), c as i64)?, group.generator(v)));
        }
    }
    Ok(out)
}

/// Ψ, decided directly: the entries are linearly independent in `Z(G)`
/// over `G'`.
pub fn check_psi(group: &MeklerGroup, ys: &[GroupElement]) -> Result<PredicateReport> {
    require_central(group, ys)?;
    let bounds = Bounds {
        m_max: group.m(),
        n_max: ys.len(),
    };
    let derived = group.derived().com_space;
    let p = group.p();
    let vecs: Vec<FpVector> = ys.iter().map(|y| y.gen.concat(&derived.reduce(&y.com))).collect();
    let dim = group.n() + group.m();
    if fp_linalg::rank(p, dim, &vecs)? == ys.len() {
        return Ok(PredicateReport::pass(bounds));
    }
    // A dependency: kernel of the matrix with the entries as columns.
    let rows: Vec<FpVector> = (0..dim)
        .map(|r| FpVector::from_residues(p, vecs.iter().map(|v| v.get(r)).collect()))
        .collect();
    let alpha = fp_linalg::kernel(p, ys.len(), &rows)?.basis()[0].clone();
    let indices: Vec<usize> = (0..ys.len()).filter(|&i| alpha.get(i) != 0).collect();
    let exponents: Vec<u32> = indices.iter().map(|&i| alpha.get(i)).collect();
    let powers: Vec<GroupElement> = indices
        .iter()
        .zip(&exponents)
        .map(|(&i, &e)| group.power(&ys[i], e as i64))
        .collect::<Result<_>>()?;
    let z = product(group, &powers);
    Ok(PredicateReport::fail(
        bounds,
        Violation::CentralDependent {
            indices,
            exponents,
            commutators: basic_commutators(group, &z)?,
        },
    ))
}

/// Ψ by bounded quantifier expansion: every nontrivial combination of at
/// most `n_max` entries is compared against all products of at most `m_max`
/// commutators.
pub fn check_psi_expanded(group: &MeklerGroup, ys: &[GroupElement], bounds: Option<Bounds>, budget: u64) -> Result<PredicateReport> {
    require_central(group, ys)?;
    let bounds = bounds.unwrap_or(Bounds {
        m_max: group.m(),
        n_max: ys.len(),
    });
    let p = group.p();
    let n = group.n();
    let m = group.m();
    let pn = (p as u64).checked_pow(n as u32).filter(|&t| t.saturating_mul(t) <= budget);
    let pm = (p as u64).checked_pow(m as u32).filter(|&t| t <= budget);
    let (Some(pn), Some(pm)) = (pn, pm) else {
        return Err(Error::budget("commutator expansion", budget));
    };
    // One witness pair per value of the commutator form.
    let mut pairs: BTreeMap<FpVector, (FpVector, FpVector)> = BTreeMap::new();
    for i in 0..pn {
        let a = FpVector::from_index(p, n, i);
        for j in 0..pn {
            let b = FpVector::from_index(p, n, j);
            let v = group.form(&a, &b);
            if !v.is_zero() {
                pairs.entry(v).or_insert_with(|| (a.clone(), b));
            }
        }
    }
    let values: Vec<FpVector> = pairs.keys().cloned().collect();
    let com_rad = FpSubspace::zero(p, m);
    let reach = Reach::new(&com_rad, &values, bounds.m_max, pm.max(1))?;
    let mut found = None;
    subsets_with_coefficients(ys.len(), bounds.n_max, p, budget, |sub, q| {
        let powers: Vec<GroupElement> = sub
            .iter()
            .zip(q)
            .map(|(&i, &c)| group.power(&ys[i], c as i64))
            .collect::<Result<_>>()?;
        let z = product(group, &powers);
        if !z.gen.is_zero() || reach.dist[z.com.index() as usize] as usize > bounds.m_max {
            return Ok(false);
        }
        let path = reach.path(&com_rad, &z.com).expect("reachable");
        let commutators = path
            .iter()
            .map(|v| {
                let (a, b) = &pairs[v];
                Ok((group.from_gen(a.clone())?, group.from_gen(b.clone())?))
            })
            .collect::<Result<_>>()?;
        found = Some(Violation::CentralDependent {
            indices: sub.to_vec(),
            exponents: q.to_vec(),
            commutators,
        });
        Ok(true)
    })?;
    Ok(match found {
        Some(v) => PredicateReport::fail(bounds, v),
        None => PredicateReport::pass(bounds),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PiReport {
    pub satisfied: bool,
    pub phi: PredicateReport,
    pub psi: PredicateReport,
}

/// π = Φ ∪ Ψ.
pub fn check_pi(
    land: &Landscape,
    nu: &[GroupElement],
    xp: &[GroupElement],
    iota: &[GroupElement],
    ys: &[GroupElement],
    bounds: Option<Bounds>,
) -> Result<PiReport> {
    let phi = check_phi(land, nu, xp, iota, bounds)?;
    let psi = check_psi(land.group, ys)?;
    Ok(PiReport {
        satisfied: phi.satisfied && psi.satisfied,
        phi,
        psi,
    })
}

/// Re-evaluates a reported counterexample against the tuple it came from.
pub fn violation_holds(
    land: &Landscape,
    nu: &[GroupElement],
    xp: &[GroupElement],
    iota: &[GroupElement],
    ys: &[GroupElement],
    v: &Violation,
) -> Result<bool> {
    let group = land.group;
    let part = |p: Part| match p {
        Part::Nu => nu,
        Part::P => xp,
        Part::Iota => iota,
        Part::Central => ys,
    };
    let absorbing = |p: Part, g: &GroupElement| match p {
        Part::Iota => matches!(land.kind_of(g), ElementKind::Type1Nu | ElementKind::TypeP),
        _ => land.kind_of(g) == ElementKind::Type1Nu,
    };
    Ok(match v {
        Violation::WrongType { part: p, index, found } => {
            let want = match p {
                Part::Nu => ElementKind::Type1Nu,
                Part::P => ElementKind::TypeP,
                Part::Iota => ElementKind::Type1Iota,
                Part::Central => ElementKind::Central,
            };
            let k = land.kind_of(&part(*p)[*index]);
            k == *found && k != want
        }
        Violation::Equivalent { part: p, first, second } => {
            let xs = part(*p);
            first != second && classify::sim(group, &xs[*first], &xs[*second])?
        }
        Violation::NotProper { part: p, index, factors } => {
            factors.iter().all(|f| land.kind_of(f) == ElementKind::Type1Nu) && product(group, factors) == part(*p)[*index]
        }
        Violation::Dependent {
            part: p,
            indices,
            exponents,
            factors,
            central,
        } => {
            let xs = part(*p);
            let rhs: Vec<GroupElement> = indices
                .iter()
                .zip(exponents)
                .map(|(&i, &e)| group.power(&xs[i], e as i64))
                .collect::<Result<_>>()?;
            let lhs = group.multiply(central, &product(group, factors))?;
            exponents.iter().all(|&e| e % group.p() != 0)
                && group.is_central(central)
                && factors.iter().all(|f| absorbing(*p, f))
                && lhs == product(group, &rhs)
        }
        Violation::CentralDependent {
            indices,
            exponents,
            commutators,
        } => {
            let powers: Vec<GroupElement> = indices
                .iter()
                .zip(exponents)
                .map(|(&i, &e)| group.power(&ys[i], e as i64))
                .collect::<Result<_>>()?;
            let comms: Vec<GroupElement> = commutators
                .iter()
                .map(|(a, b)| group.commutator_word(a, b))
                .collect::<Result<_>>()?;
            !indices.is_empty() && exponents.iter().all(|&e| e % group.p() != 0) && product(group, &powers) == product(group, &comms)
        }
    })
}

/// Whether `s` is a handle-closed subset of some transversal, decided by
/// direct rank computations.
pub fn is_partial_transversal(land: &Landscape, s: &[GroupElement]) -> Result<bool> {
    let group = land.group;
    let mut nu = Vec::new();
    let mut xp = Vec::new();
    let mut iota = Vec::new();
    for g in s {
        group.check(g)?;
        match land.kind_of(g) {
            ElementKind::Type1Nu => nu.push(g.clone()),
            ElementKind::TypeP => xp.push(g.clone()),
            ElementKind::Type1Iota => iota.push(g.clone()),
            _ => return Ok(false),
        }
    }
    let distinct = |xs: &[GroupElement]| {
        let mut keys: Vec<FpSubspace> = xs.iter().map(|x| classify::centralizer_kernel(group, &x.gen)).collect();
        let before = keys.len();
        keys.sort_by(|a, b| a.basis().cmp(b.basis()));
        keys.dedup();
        keys.len() == before
    };
    if !distinct(&nu) || !distinct(&xp) || !distinct(&iota) {
        return Ok(false);
    }
    for x in xp.iter().chain(&iota) {
        if land.nu_span.contains(&x.gen)? {
            return Ok(false);
        }
    }
    let mut by_handle: BTreeMap<Vec<FpVector>, Vec<FpVector>> = BTreeMap::new();
    for x in &xp {
        by_handle.entry(land.handle_key(&x.gen)?).or_default().push(x.gen.clone());
    }
    for members in by_handle.values() {
        if land.nu_span.with_vectors(members)?.dim() != land.nu_span.dim() + members.len() {
            return Ok(false);
        }
    }
    let iota_gens: Vec<FpVector> = iota.iter().map(|x| x.gen.clone()).collect();
    if land.nu_p_span.with_vectors(&iota_gens)?.dim() != land.nu_p_span.dim() + iota.len() {
        return Ok(false);
    }
    Ok(xp.iter().all(|x| nu.iter().any(|b| group.commute(x, b))))
}

/// Appends one handle for every type-p member without a handle in `s`.
pub fn close_under_handles(land: &Landscape, s: &[GroupElement]) -> Result<Vec<GroupElement>> {
    let group = land.group;
    let mut out = s.to_vec();
    for x in s {
        if land.kind_of(x) != ElementKind::TypeP {
            continue;
        }
        let covered = out
            .iter()
            .any(|b| land.kind_of(b) == ElementKind::Type1Nu && group.commute(x, b));
        if !covered {
            let h = classify::handles_of_gen(group, &x.gen, land.cap)?;
            out.push(group.from_gen(h[0].clone())?);
        }
    }
    Ok(out)
}

/// A partial transversal that is also maximal in each of its three parts.
pub fn is_transversal(land: &Landscape, x: &Transversal) -> Result<bool> {
    if !is_partial_transversal(land, &x.all())? {
        return Ok(false);
    }
    let group = land.group;
    if x.x_nu.len() != land.census.class_counts.get(&ElementKind::Type1Nu).copied().unwrap_or(0) as usize {
        return Ok(false);
    }
    // No further proper type-p class can join its handle group.
    let mut spans: BTreeMap<Vec<FpVector>, FpSubspace> = BTreeMap::new();
    for g in &x.x_p {
        let key = land.handle_key(&g.gen)?;
        let s = spans.entry(key).or_insert_with(|| land.nu_span.clone());
        *s = s.with_vectors(std::slice::from_ref(&g.gen))?;
    }
    for a in reps_of(land, ElementKind::TypeP) {
        if land.nu_span.contains(&a)? {
            continue;
        }
        let key = land.handle_key(&a)?;
        let span = spans.get(&key).unwrap_or(&land.nu_span);
        let taken = x.x_p.iter().any(|g| classify::centralizer_kernel(group, &g.gen) == classify::centralizer_kernel(group, &a));
        if !taken && !span.contains(&a)? {
            return Ok(false);
        }
    }
    let iota_gens: Vec<FpVector> = x.x_iota.iter().map(|g| g.gen.clone()).collect();
    let span = land.nu_p_span.with_vectors(&iota_gens)?;
    for a in reps_of(land, ElementKind::Type1Iota) {
        if !land.nu_span.contains(&a)? && !span.contains(&a)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `⟨X⟩' = G'`.
pub fn verify_derived_invariance(group: &MeklerGroup, x: &[GroupElement]) -> Result<bool> {
    let h = group.subgroup_generated(x)?;
    Ok(group.derived_of(&h) == group.derived())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecompositionReport {
    /// log_p of `|⟨X⟩|`.
    pub h_log_order: usize,
    pub center_dim: usize,
    pub intersection_dim: usize,
    /// Whether some `K ≤ Z(G)` has `⟨X⟩ ∩ K = 1` and `⟨X⟩K = G`.
    pub complement_exists: bool,
    pub k_dim: Option<usize>,
    pub k_basis: Vec<GroupElement>,
}

/// Searches for a central complement of `⟨X⟩`.
pub fn decomposition_check(group: &MeklerGroup, x: &[GroupElement]) -> Result<DecompositionReport> {
    let p = group.p();
    let (n, m) = (group.n(), group.m());
    let h = group.subgroup_generated(x)?;
    // Z(G) is a coordinate subspace: the collection term vanishes on
    // radical blocks, so multiplication in Z is vector addition.
    let z_rows: Vec<FpVector> = group
        .radical()
        .basis()
        .iter()
        .map(|r| r.concat(&FpVector::zero(p, m)))
        .chain((0..m).map(|k| FpVector::zero(p, n).concat(&FpVector::unit(p, m, k))))
        .collect();
    let z = fp_linalg::rref(p, n + m, &z_rows)?;

    let a_cap_rad = {
        // Intersection of gen_space and radical via the kernel of the
        // stacked bases.
        let a = h.gen_space.basis();
        let r = group.radical().basis();
        let cols = a.len() + r.len();
        let rows: Vec<FpVector> = (0..n)
            .map(|i| {
                FpVector::from_residues(
                    p,
                    a.iter().map(|v| v.get(i)).chain(r.iter().map(|v| (p - v.get(i)) % p)).collect(),
                )
            })
            .collect();
        let ker = fp_linalg::kernel(p, cols, &rows)?;
        let vecs: Vec<FpVector> = ker
            .basis()
            .iter()
            .map(|c| {
                let mut v = FpVector::zero(p, n);
                for (k, av) in a.iter().enumerate() {
                    v.add_scaled(av, c.get(k));
                }
                v
            })
            .collect();
        fp_linalg::rref(p, n, &vecs)?
    };
    let mut hz_rows: Vec<FpVector> = Vec::new();
    for r in a_cap_rad.basis() {
        let coeffs = h.gen_space.coordinates(r)?.expect("in gen_space");
        let mut pre = group.identity();
        for (s, &k) in h.section().iter().zip(&coeffs) {
            pre = group.mul_unchecked(&pre, &group.power(s, k as i64)?);
        }
        hz_rows.push(pre.gen.concat(&pre.com));
    }
    for c in h.com_space.basis() {
        hz_rows.push(FpVector::zero(p, n).concat(c));
    }
    let h_cap_z = fp_linalg::rref(p, n + m, &hz_rows)?;
    let exists = z.dim() - h_cap_z.dim() == n + m - h.log_order();
    let (k_dim, k_basis) = if exists {
        let k = fp_linalg::extend_basis(&h_cap_z, z.basis())?;
        let basis = k
            .basis()
            .iter()
            .map(|v| group.element(FpVector::from_residues(p, v.coords()[..n].to_vec()), FpVector::from_residues(p, v.coords()[n..].to_vec())))
            .collect::<Result<Vec<_>>>()?;
        (Some(k.dim()), basis)
    } else {
        (None, Vec::new())
    };
    Ok(DecompositionReport {
        h_log_order: h.log_order(),
        center_dim: z.dim(),
        intersection_dim: h_cap_z.dim(),
        complement_exists: exists,
        k_dim,
        k_basis,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::DEFAULT_ENUM_CAP;
    use crate::graph::Graph;
    use rand::Rng;

    fn c5() -> MeklerGroup {
        MeklerGroup::new(Graph::cycle(5), 3).unwrap()
    }

    fn planted() -> MeklerGroup {
        let mut c = Graph::cycle(5);
        c.add_vertex();
        c.add_edge(0, 5).unwrap();
        MeklerGroup::new(c, 3).unwrap()
    }

    fn v(coords: &[i64]) -> FpVector {
        FpVector::new(3, coords.iter().copied())
    }

    #[test]
    fn properness() {
        let g = c5();
        let land = Landscape::new(&g, DEFAULT_ENUM_CAP).unwrap();
        assert!(!is_proper(&land, &g.generator(0)).unwrap());
        assert!(matches!(is_proper(&land, &g.identity()), Err(Error::Precondition(_))));
        // Vertices span everything, so nothing in G(C5) is proper.
        assert!(land.nu_span().is_full());

        let g = planted();
        let land = Landscape::new(&g, DEFAULT_ENUM_CAP).unwrap();
        assert_eq!(land.kind_of(&g.generator(5)), ElementKind::TypeP);
        assert!(is_proper(&land, &g.generator(5)).unwrap());
    }

    #[test]
    fn c5_transversal() {
        let g = c5();
        let land = Landscape::new(&g, DEFAULT_ENUM_CAP).unwrap();
        let x = build_transversal(&land, 0).unwrap();
        assert_eq!(x.x_nu.len(), 5);
        for vtx in 0..5 {
            assert!(x.x_nu.iter().any(|e| classify::sim(&g, e, &g.generator(vtx)).unwrap()));
        }
        assert!(x.x_p.is_empty() && x.x_iota.is_empty());
        assert_eq!(build_transversal(&land, 0).unwrap(), x);
        assert!(is_partial_transversal(&land, &x.all()).unwrap());
        assert!(is_transversal(&land, &x).unwrap());
        let phi = check_phi(&land, &x.x_nu, &x.x_p, &x.x_iota, None).unwrap();
        assert!(phi.satisfied, "{phi:?}");
        assert!(verify_derived_invariance(&g, &x.all()).unwrap());
        let d = decomposition_check(&g, &x.all()).unwrap();
        assert!(d.complement_exists);
        assert_eq!(d.k_dim, Some(0));
        for i in 0..x.x_nu.len() {
            let mut y = x.clone();
            y.x_nu.remove(i);
            assert!(!is_transversal(&land, &y).unwrap());
        }
    }

    #[test]
    fn derived_invariance_partial() {
        let g = c5();
        assert!(!verify_derived_invariance(&g, &[]).unwrap());
        // The vertex lines alone already give everything.
        let nu: Vec<GroupElement> = (0..5).map(|v| g.generator(v)).collect();
        assert!(verify_derived_invariance(&g, &nu).unwrap());
        assert!(!verify_derived_invariance(&g, &nu[..2]).unwrap());
    }

    #[test]
    fn abelian_case() {
        let g = MeklerGroup::new(Graph::complete(3), 3).unwrap();
        let land = Landscape::new(&g, DEFAULT_ENUM_CAP).unwrap();
        let x = build_transversal(&land, 7).unwrap();
        assert!(x.is_empty());
        let d = decomposition_check(&g, &x.all()).unwrap();
        assert!(d.complement_exists);
        assert_eq!(d.k_dim, Some(3));
        assert_eq!(d.h_log_order, 0);
    }

    #[test]
    fn decomposition_without_complement() {
        let g = c5();
        let d = decomposition_check(&g, &[g.generator(0)]).unwrap();
        assert!(!d.complement_exists);
        assert_eq!(d.k_dim, None);
    }

    #[test]
    fn decomposition_with_radical() {
        // Two universal vertices over a non-edge.
        let c = Graph::from_edges(4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3)]).unwrap();
        let g = MeklerGroup::new(c, 3).unwrap();
        let x = vec![g.generator(2), g.generator(3)];
        let d = decomposition_check(&g, &x).unwrap();
        assert!(d.complement_exists);
        assert_eq!(d.k_dim, Some(2));
        let mut all = x.clone();
        all.extend(d.k_basis.iter().cloned());
        assert_eq!(g.subgroup_generated(&all).unwrap().log_order(), 5);
    }

    #[test]
    fn phi_violations_detected() {
        let g = c5();
        let land = Landscape::new(&g, DEFAULT_ENUM_CAP).unwrap();
        assert!(check_phi(&land, &[], &[], &[], None).unwrap().satisfied);

        let pair = vec![g.generator(0), g.power(&g.generator(0), 2).unwrap()];
        let r = check_phi(&land, &pair, &[], &[], None).unwrap();
        assert_eq!(
            r.counterexample,
            Some(Violation::Equivalent {
                part: Part::Nu,
                first: 0,
                second: 1
            })
        );

        let skip = g.from_gen(v(&[1, 0, 1, 0, 0])).unwrap();
        assert_eq!(land.kind_of(&skip), ElementKind::TypeP);
        let r = check_phi(&land, &[], std::slice::from_ref(&skip), &[], None).unwrap();
        let cx = r.counterexample.clone().unwrap();
        assert!(matches!(cx, Violation::NotProper { part: Part::P, index: 0, .. }));
        assert!(violation_holds(&land, &[], &[skip.clone()], &[], &[], &cx).unwrap());

        let r = check_phi(&land, &[], &[g.generator(0)], &[], None).unwrap();
        assert!(matches!(r.counterexample, Some(Violation::WrongType { part: Part::P, .. })));
    }

    #[test]
    fn planted_instance() {
        let g = planted();
        let land = Landscape::new(&g, DEFAULT_ENUM_CAP).unwrap();
        let x5 = g.generator(5);
        assert!(!is_partial_transversal(&land, std::slice::from_ref(&x5)).unwrap());
        let closed = close_under_handles(&land, std::slice::from_ref(&x5)).unwrap();
        assert_eq!(closed.len(), 2);
        assert!(is_partial_transversal(&land, &closed).unwrap());

        let x = build_transversal(&land, 1).unwrap();
        assert!(!x.x_p.is_empty());
        assert!(is_transversal(&land, &x).unwrap());
        let phi = check_phi(&land, &x.x_nu, &x.x_p, &x.x_iota, None).unwrap();
        assert!(phi.satisfied, "{phi:?}");
        for (i, &h) in x.handle_map.iter().enumerate() {
            assert!(g.commute(&x.x_p[i], &x.x_nu[h]));
        }

        // Two type-p entries with the same handle and dependent modulo the
        // type-1^ν span.
        let a = g.from_gen(v(&[0, 0, 0, 0, 0, 1])).unwrap();
        let dep = [a.clone(), g.from_gen(v(&[0, 0, 0, 0, 0, 2])).unwrap()];
        let r = check_phi(&land, &[], &dep, &[], None).unwrap();
        assert!(!r.satisfied);
        let cx = r.counterexample.unwrap();
        assert!(violation_holds(&land, &[], &dep, &[], &[], &cx).unwrap());
    }

    #[test]
    fn builder_output_is_seed_deterministic_and_valid() {
        let g = planted();
        let land = Landscape::new(&g, DEFAULT_ENUM_CAP).unwrap();
        for seed in 0..6 {
            let x = build_transversal(&land, seed).unwrap();
            assert_eq!(x, build_transversal(&land, seed).unwrap());
            assert!(is_transversal(&land, &x).unwrap());
            let phi = check_phi(&land, &x.x_nu, &x.x_p, &x.x_iota, None).unwrap();
            assert!(phi.satisfied);
            assert!(verify_derived_invariance(&g, &x.all()).unwrap());
        }
    }

    #[test]
    fn psi_on_nice_graph_is_degenerate() {
        let g = c5();
        assert!(check_psi(&g, &[]).unwrap().satisfied);
        let z = g.commutator(&g.generator(0), &g.generator(2)).unwrap();
        let r = check_psi(&g, std::slice::from_ref(&z)).unwrap();
        assert!(!r.satisfied);
        let land = Landscape::new(&g, DEFAULT_ENUM_CAP).unwrap();
        assert!(violation_holds(&land, &[], &[], &[], &[z.clone()], r.counterexample.as_ref().unwrap()).unwrap());
        assert!(matches!(check_psi(&g, &[g.generator(0)]), Err(Error::Precondition(_))));
        let pi = check_pi(&land, &[g.generator(0)], &[], &[], &[z], None).unwrap();
        assert!(pi.phi.satisfied && !pi.psi.satisfied && !pi.satisfied);
    }

    #[test]
    fn psi_direct_agrees_with_expansion() {
        let c = Graph::from_edges(4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3)]).unwrap();
        let g = MeklerGroup::new(c, 3).unwrap();
        assert_eq!(g.radical().dim(), 2);
        let land = Landscape::new(&g, DEFAULT_ENUM_CAP).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut outcomes = [0usize; 2];
        for _ in 0..100 {
            let len = rng.gen_range(1..4);
            let ys: Vec<GroupElement> = (0..len)
                .map(|_| {
                    let gen = v(&[rng.gen_range(0..3), rng.gen_range(0..3), 0, 0]);
                    let com = v(&[rng.gen_range(0..3)]);
                    g.element(gen, com).unwrap()
                })
                .collect();
            let direct = check_psi(&g, &ys).unwrap();
            let expanded = check_psi_expanded(&g, &ys, None, DEFAULT_SEARCH_BUDGET).unwrap();
            assert_eq!(direct.satisfied, expanded.satisfied, "{ys:?}");
            for r in [&direct, &expanded] {
                if let Some(cx) = &r.counterexample {
                    assert!(violation_holds(&land, &[], &[], &[], &ys, cx).unwrap());
                }
            }
            outcomes[direct.satisfied as usize] += 1;
        }
        assert!(outcomes[0] > 0 && outcomes[1] > 0);
    }

    #[test]
    fn partial_transversal_examples() {
        let g = c5();
        let land = Landscape::new(&g, DEFAULT_ENUM_CAP).unwrap();
        assert!(is_partial_transversal(&land, &[]).unwrap());
        let pair = [g.generator(0), g.power(&g.generator(0), 2).unwrap()];
        assert!(!is_partial_transversal(&land, &pair).unwrap());
        assert!(is_partial_transversal(&land, &[g.generator(0), g.generator(3)]).unwrap());
        assert!(!is_partial_transversal(&land, &[g.identity()]).unwrap());
    }

    #[test]
    fn transversal_json_lists_literals() {
        let g = c5();
        let land = Landscape::new(&g, DEFAULT_ENUM_CAP).unwrap();
        let x = build_transversal(&land, 0).unwrap();
        let j = x.to_json(&g);
        assert_eq!(j["x_nu"].as_array().unwrap().len(), 5);
        assert!(j["x_nu"][0].as_str().unwrap().starts_with("gen:["));
    }
}
