//! Centralizers, the equivalence relations `∼`, `≈`, `≡_Z`, and the
//! element taxonomy with handles.
//!
//! Everything here depends only on generator blocks modulo the radical of
//! the commutator form, so enumeration is over `F_p^n`, never over whole
//! elements.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fp_linalg::{self, FpSubspace, FpVector};
use crate::group::{GroupElement, MeklerGroup, SubgroupDescription};

/// Default cap on the number of generator blocks enumerated (`3^13`).
pub const DEFAULT_ENUM_CAP: u64 = 1_594_323;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementKind {
    Central,
    #[serde(rename = "type_1_nu")]
    Type1Nu,
    #[serde(rename = "type_1_iota")]
    Type1Iota,
    TypeP,
    TypePMinus1,
    Other,
}

impl ElementKind {
    pub fn name(self) -> &'static str {
        match self {
            ElementKind::Central => "central",
            ElementKind::Type1Nu => "type_1_nu",
            ElementKind::Type1Iota => "type_1_iota",
            ElementKind::TypeP => "type_p",
            ElementKind::TypePMinus1 => "type_p_minus_1",
            ElementKind::Other => "other",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ElementClass {
    pub kind: ElementKind,
    /// Number of `≈`-classes in the `∼`-class.
    pub q: usize,
    pub isolated: bool,
}

impl ElementClass {
    pub fn central() -> Self {
        ElementClass {
            kind: ElementKind::Central,
            q: 0,
            isolated: false,
        }
    }

    pub fn from_counts(p: u32, q: usize, isolated: bool) -> Self {
        let kind = if q == 1 {
            if isolated {
                ElementKind::Type1Iota
            } else {
                ElementKind::Type1Nu
            }
        } else if q == p as usize {
            ElementKind::TypeP
        } else if q == p as usize - 1 {
            ElementKind::TypePMinus1
        } else {
            ElementKind::Other
        };
        ElementClass { kind, q, isolated }
    }
}

/// Linear functionals whose common kernel is the generator block of
/// `C_G(g)`: one per non-edge `(u, v)`, `x -> a_u x_v - a_v x_u`.
fn centralizer_rows(group: &MeklerGroup, a: &FpVector) -> Vec<FpVector> {
    let p = group.p();
    let n = group.n();
    group
        .nonedges()
        .iter()
        .filter(|&&(u, v)| a.get(u) != 0 || a.get(v) != 0)
        .map(|&(u, v)| {
            let mut r = FpVector::zero(p, n);
            r.set(v, a.get(u) as i64);
            r.set(u, -(a.get(v) as i64));
            r
        })
        .collect()
}

/// Generator block of the centralizer of any element with generator block
/// `a`.
pub fn centralizer_kernel(group: &MeklerGroup, a: &FpVector) -> FpSubspace {
    fp_linalg::kernel(group.p(), group.n(), &centralizer_rows(group, a))
        .expect("rows have ambient length n")
}

pub fn centralizer(group: &MeklerGroup, g: &GroupElement) -> Result<SubgroupDescription> {
    group.check(g)?;
    Ok(group.subgroup_with_full_com(centralizer_kernel(group, &g.gen)))
}

/// `g ∼ h`: equal centralizers.
pub fn sim(group: &MeklerGroup, g: &GroupElement, h: &GroupElement) -> Result<bool> {
    group.check(g)?;
    group.check(h)?;
    Ok(centralizer_kernel(group, &g.gen) == centralizer_kernel(group, &h.gen))
}

/// Projective representative of `a` modulo the radical: the reduced residue
/// scaled to have leading coefficient 1. `None` for central blocks.
pub fn approx_key(group: &MeklerGroup, a: &FpVector) -> Option<FpVector> {
    let r = group.radical().reduce(a);
    if r.is_zero() {
        None
    } else {
        Some(r.projective_normal())
    }
}

/// `g ≈ h`: `gen(g) ≡ r·gen(h)` modulo the radical for some `r` in `1..p`.
pub fn approx(group: &MeklerGroup, g: &GroupElement, h: &GroupElement) -> Result<bool> {
    group.check(g)?;
    group.check(h)?;
    let rad = group.radical();
    let a = rad.reduce(&g.gen);
    let b = rad.reduce(&h.gen);
    if a.is_zero() || b.is_zero() {
        return Ok(a.is_zero() && b.is_zero());
    }
    Ok(a.projective_normal() == b.projective_normal())
}

/// `g ≡_Z h`: same coset of the center.
pub fn zmod(group: &MeklerGroup, g: &GroupElement, h: &GroupElement) -> Result<bool> {
    group.check(g)?;
    group.check(h)?;
    let diff = g.gen.sub(&h.gen);
    Ok(group.radical().reduce(&diff).is_zero())
}

/// Full classification data for the `∼`-class of a generator block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassInfo {
    pub class: ElementClass,
    pub kernel: FpSubspace,
    /// Lexicographically least generator block of the class.
    pub representative: FpVector,
    /// Number of generator blocks in the class.
    pub class_size: u64,
}

fn pow_checked(p: u32, e: usize, cap: u64, what: &str) -> Result<u64> {
    match (p as u64).checked_pow(e as u32) {
        Some(v) if v <= cap => Ok(v),
        _ => Err(Error::budget(what, cap)),
    }
}

/// Classifies the `∼`-class of `a`.
///
/// The class lies inside the centralizer kernel `K(a)`, so only the
/// `p^dim K(a)` vectors of `K(a)` are enumerated.
pub fn class_info(group: &MeklerGroup, a: &FpVector, cap: u64) -> Result<ClassInfo> {
    let kernel = centralizer_kernel(group, a);
    if group.radical().reduce(a).is_zero() {
        return Err(Error::Precondition("element is central".into()));
    }
    pow_checked(group.p(), kernel.dim(), cap, "centralizer enumeration")?;
    let mut reps = BTreeSet::new();
    let mut least: Option<FpVector> = None;
    let mut size = 0u64;
    for b in kernel.elements() {
        let Some(key) = approx_key(group, &b) else {
            continue;
        };
        if centralizer_kernel(group, &b) != kernel {
            continue;
        }
        size += 1;
        if least.as_ref().is_none_or(|l| b < *l) {
            least = Some(b.clone());
        }
        reps.insert(key);
    }
    let isolated = kernel.dim() - group.radical().dim() == 1;
    Ok(ClassInfo {
        class: ElementClass::from_counts(group.p(), reps.len(), isolated),
        kernel,
        representative: least.expect("a lies in its own class"),
        class_size: size,
    })
}

pub fn type_of_with_cap(group: &MeklerGroup, g: &GroupElement, cap: u64) -> Result<ElementClass> {
    group.check(g)?;
    Ok(class_info(group, &g.gen, cap)?.class)
}

pub fn type_of(group: &MeklerGroup, g: &GroupElement) -> Result<ElementClass> {
    type_of_with_cap(group, g, DEFAULT_ENUM_CAP)
}

/// Type-1^ν representatives commuting with a type-p element, one per
/// `∼`-class.
pub fn handles_of_gen(group: &MeklerGroup, a: &FpVector, cap: u64) -> Result<Vec<FpVector>> {
    let info = class_info(group, a, cap)?;
    if info.class.kind != ElementKind::TypeP {
        return Err(Error::Domain(format!(
            "handles are defined for type p elements, got {}",
            info.class.kind.name()
        )));
    }
    let mut seen: BTreeMap<Vec<FpVector>, FpVector> = BTreeMap::new();
    for b in info.kernel.elements() {
        if approx_key(group, &b).is_none() {
            continue;
        }
        let kb = centralizer_kernel(group, &b);
        if seen.contains_key(kb.basis()) {
            continue;
        }
        let bi = class_info(group, &b, cap)?;
        if bi.class.kind == ElementKind::Type1Nu {
            seen.insert(kb.basis().to_vec(), bi.representative);
        }
    }
    Ok(seen.into_values().collect())
}

pub fn handles(group: &MeklerGroup, g: &GroupElement) -> Result<Vec<FpVector>> {
    group.check(g)?;
    handles_of_gen(group, &g.gen, DEFAULT_ENUM_CAP)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CensusClass {
    pub kernel_dim: usize,
    pub q: usize,
    pub isolated: bool,
    pub kind: ElementKind,
    pub representative: Vec<u32>,
    pub class_size: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Census {
    pub p: u32,
    pub n: usize,
    pub radical_dim: usize,
    /// Noncentral `∼`-classes, ordered by representative, followed by one
    /// `central` record when nonzero central generator blocks exist.
    pub classes: Vec<CensusClass>,
    /// Number of noncentral `∼`-classes per kind.
    pub class_counts: BTreeMap<ElementKind, u64>,
    /// Number of noncentral generator blocks per kind.
    pub element_counts: BTreeMap<ElementKind, u64>,
    pub noncentral_classes: u64,
    pub noncentral_gen_parts: u64,
}

impl Census {
    pub fn noncentral(&self) -> impl Iterator<Item = &CensusClass> {
        self.classes.iter().filter(|c| c.kind != ElementKind::Central)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("census serializes")
    }
}

#[derive(Default)]
struct Acc {
    least: u64,
    count: u64,
    reps: BTreeSet<FpVector>,
}

fn merge(into: &mut BTreeMap<Vec<FpVector>, Acc>, from: BTreeMap<Vec<FpVector>, Acc>) {
    for (k, v) in from {
        match into.get_mut(&k) {
            Some(acc) => {
                acc.least = acc.least.min(v.least);
                acc.count += v.count;
                acc.reps.extend(v.reps);
            }
            None => {
                into.insert(k, v);
            }
        }
    }
}

/// Classifies every noncentral `∼`-class by enumerating all of `F_p^n`.
pub fn census(group: &MeklerGroup, cap: u64) -> Result<Census> {
    let p = group.p();
    let n = group.n();
    let total = pow_checked(p, n, cap, "census enumeration")?;
    const CHUNK: u64 = 4096;
    let chunks = total.div_ceil(CHUNK);
    let classes = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut local: BTreeMap<Vec<FpVector>, Acc> = BTreeMap::new();
            for idx in c * CHUNK..((c + 1) * CHUNK).min(total) {
                let a = FpVector::from_index(p, n, idx);
                let Some(key) = approx_key(group, &a) else {
                    continue;
                };
                let k = centralizer_kernel(group, &a);
                let acc = local.entry(k.basis().to_vec()).or_insert_with(|| Acc {
                    least: idx,
                    ..Acc::default()
                });
                acc.least = acc.least.min(idx);
                acc.count += 1;
                acc.reps.insert(key);
            }
            local
        })
        .reduce(BTreeMap::new, |mut a, b| {
            merge(&mut a, b);
            a
        });

    let rad_dim = group.radical().dim();
    let mut records: Vec<CensusClass> = classes
        .into_iter()
        .map(|(basis, acc)| {
            let kernel_dim = basis.len();
            let class = ElementClass::from_counts(p, acc.reps.len(), kernel_dim - rad_dim == 1);
            CensusClass {
                kernel_dim,
                q: class.q,
                isolated: class.isolated,
                kind: class.kind,
                representative: FpVector::from_index(p, n, acc.least).coords().to_vec(),
                class_size: acc.count,
            }
        })
        .collect();
    records.sort_by(|a, b| a.representative.cmp(&b.representative));

    let mut class_counts = BTreeMap::new();
    let mut element_counts = BTreeMap::new();
    for r in &records {
        *class_counts.entry(r.kind).or_insert(0) += 1;
        *element_counts.entry(r.kind).or_insert(0) += r.class_size;
    }
    let noncentral_classes = records.len() as u64;
    let noncentral_gen_parts = records.iter().map(|r| r.class_size).sum();

    if rad_dim > 0 {
        let smallest = group
            .radical()
            .elements()
            .filter(|v| !v.is_zero())
            .min()
            .expect("nonzero radical");
        records.push(CensusClass {
            kernel_dim: n,
            q: 0,
            isolated: false,
            kind: ElementKind::Central,
            representative: smallest.coords().to_vec(),
            class_size: (p as u64).pow(rad_dim as u32) - 1,
        });
    }

    Ok(Census {
        p,
        n,
        radical_dim: rad_dim,
        classes: records,
        class_counts,
        element_counts,
        noncentral_classes,
        noncentral_gen_parts,
    })
}
