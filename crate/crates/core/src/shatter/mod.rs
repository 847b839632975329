//! Finite testers for the k-independence property and TP2 over relational
//! structures, Mekler groups and the bilinear form structure.

pub mod formula;
pub mod tp2;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encode::RelStructure;
use crate::error::{Error, Result};
use crate::fp_linalg::{self, FpVector};
use crate::group::{GroupElement, MeklerGroup};

pub use formula::{evaluate, evaluate_term, parse_formula, parse_term, Assignment, Atom, Formula, ParsedFormula, SortKind, Term, Var};
pub use tp2::{check_tp2, tp2_pattern, Tp2Budget, Tp2Instance, Tp2Report};

/// Default cap on the number of grid cells, so at most 65536 subsets.
pub const DEFAULT_MAX_CELLS: usize = 16;

/// Default number of formula evaluations a shattering search may spend.
pub const DEFAULT_SHATTER_BUDGET: u64 = 20_000_000;

/// Largest object or parameter domain the search will enumerate.
const MAX_DOMAIN: u64 = 1 << 22;

/// Largest memo table for search, in entries.
const MAX_MEMO: u64 = 1 << 24;

/// Label attached to every report: consistency means satisfiable in the
/// given finite structure.
pub const SEMANTICS: &str = "finite-structure";

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Value {
    Elem(usize),
    Group(GroupElement),
    Vector(FpVector),
}

/// `F_p^m` with the standard form `dot(a, b) = Σ a_i b_i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BilinearFormStructure {
    pub p: u32,
    pub m: usize,
}

impl BilinearFormStructure {
    pub fn dot(&self, a: &FpVector, b: &FpVector) -> u32 {
        a.dot(b).expect("vectors of the structure's dimension")
    }

    pub fn vector(&self, index: u64) -> FpVector {
        FpVector::from_index(self.p, self.m, index)
    }

    pub fn unit(&self, i: usize) -> FpVector {
        FpVector::unit(self.p, self.m, i)
    }

    /// Checks symmetry and linearity in the first argument on `samples`
    /// seeded random triples.
    pub fn verify_form(&self, samples: usize, seed: u64) -> bool {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let size = (self.p as u64).pow(self.m as u32);
        (0..samples).all(|_| {
            let a = self.vector(rng.gen_range(0..size));
            let b = self.vector(rng.gen_range(0..size));
            let c = self.vector(rng.gen_range(0..size));
            let k = rng.gen_range(0..self.p) as i64;
            let p = self.p;
            self.dot(&a, &b) == self.dot(&b, &a)
                && self.dot(&a.add(&b), &c) == (self.dot(&a, &c) + self.dot(&b, &c)) % p
                && self.dot(&a.scale(k), &c) == (k as u32 * self.dot(&a, &c)) % p
        })
    }
}

pub fn bilinear_structure(p: u32, m: usize) -> Result<BilinearFormStructure> {
    fp_linalg::validate_prime(p)?;
    if m == 0 {
        return Err(Error::Precondition("bilinear structure needs m >= 1".into()));
    }
    if (p as f64).powi(m as i32) > u64::MAX as f64 {
        return Err(Error::budget("bilinear structure size", u64::MAX));
    }
    let b = BilinearFormStructure { p, m };
    if !b.verify_form(100, 0) {
        return Err(Error::Domain("dot failed the bilinearity check".into()));
    }
    Ok(b)
}

/// A finite structure formulas are evaluated in.
#[derive(Debug, Clone)]
pub enum Structure {
    Relational(RelStructure),
    Group(MeklerGroup),
    Bilinear(BilinearFormStructure),
}

impl Structure {
    pub fn kind(&self) -> SortKind {
        match self {
            Structure::Relational(_) => SortKind::Relational,
            Structure::Group(_) => SortKind::Group,
            Structure::Bilinear(_) => SortKind::Bilinear,
        }
    }

    /// Whether `v` is an element of this structure.
    pub fn accepts(&self, v: &Value) -> bool {
        match (self, v) {
            (Structure::Relational(r), Value::Elem(i)) => *i < r.universe_size,
            (Structure::Group(g), Value::Group(x)) => g.check(x).is_ok(),
            (Structure::Bilinear(b), Value::Vector(x)) => x.p() == b.p && x.len() == b.m,
            _ => false,
        }
    }

    /// Number of elements, if it fits in a `u64`.
    pub fn domain_size(&self) -> Option<u64> {
        match self {
            Structure::Relational(r) => Some(r.universe_size as u64),
            Structure::Group(g) => (g.p() as u64).checked_pow((g.n() + g.m()) as u32),
            Structure::Bilinear(b) => (b.p as u64).checked_pow(b.m as u32),
        }
    }

    /// Element number `i` in the structure's enumeration order.
    pub fn object(&self, i: u64) -> Value {
        match self {
            Structure::Relational(_) => Value::Elem(i as usize),
            Structure::Group(g) => {
                let gens = (g.p() as u64).pow(g.n() as u32);
                let gen = FpVector::from_index(g.p(), g.n(), i % gens);
                let com = FpVector::from_index(g.p(), g.m(), i / gens);
                Value::Group(g.element(gen, com).expect("sizes match"))
            }
            Structure::Bilinear(b) => Value::Vector(b.vector(i)),
        }
    }

    /// Tuple number `i` of length `arity`, first coordinate most significant.
    pub fn tuple(&self, arity: usize, mut i: u64) -> Vec<Value> {
        let d = self.domain_size().expect("enumerable structure");
        let mut out = vec![Value::Elem(0); arity];
        for slot in out.iter_mut().rev() {
            *slot = self.object(i % d);
            i /= d;
        }
        out
    }

    fn tuple_domain(&self, arity: usize) -> Result<u64> {
        self.domain_size()
            .and_then(|d| d.checked_pow(arity as u32))
            .filter(|&t| t <= MAX_DOMAIN)
            .ok_or_else(|| Error::budget("tuple domain size", MAX_DOMAIN))
    }
}

/// Witness `object` for the pattern whose cells are the set bits of
/// `subset`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub subset: u64,
    pub object: Vec<Value>,
}

/// Grid `grid[j][i] = a_{j,i}` and a witness per subset of cells. Cells are
/// numbered in lexicographic order of `(i_0, .., i_{k-1})`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShatterInstance {
    pub formula: ParsedFormula,
    pub grid: Vec<Vec<Vec<Value>>>,
    pub witnesses: Vec<Witness>,
    /// Witnesses cover only a declared sample of the subsets.
    #[serde(default)]
    pub sample: bool,
}

impl ShatterInstance {
    pub fn grid_sizes(&self) -> Vec<usize> {
        self.grid.iter().map(Vec::len).collect()
    }

    pub fn cell_count(&self) -> usize {
        self.grid.iter().map(Vec::len).product()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("instance serializes")
    }
}

/// Index tuple `(i_0, .., i_{k-1})` of cell `c`.
pub fn cell_coords(sizes: &[usize], mut c: usize) -> Vec<usize> {
    let mut out = vec![0; sizes.len()];
    for (slot, &s) in out.iter_mut().zip(sizes).rev() {
        *slot = c % s;
        c /= s;
    }
    out
}

fn cell_index(sizes: &[usize], coords: &[usize]) -> usize {
    coords.iter().zip(sizes).fold(0, |acc, (&i, &s)| acc * s + i)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShatterViolation {
    pub subset: u64,
    pub cell: Vec<usize>,
    /// Whether the cell lies in the subset.
    pub expected: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShatterReport {
    pub semantics: String,
    pub pass: bool,
    pub grid_sizes: Vec<usize>,
    pub cells: usize,
    pub subsets_checked: u64,
    pub evaluations: u64,
    pub sample: bool,
    pub violation: Option<ShatterViolation>,
}

fn check_shape(s: &Structure, f: &ParsedFormula, grid: &[Vec<Vec<Value>>]) -> Result<()> {
    if f.k() != grid.len() {
        return Err(Error::DimensionMismatch(format!(
            "formula has {} parameter blocks, grid has {}",
            f.k(),
            grid.len()
        )));
    }
    for (j, block) in grid.iter().enumerate() {
        for a in block {
            if a.len() != f.y_arities[j] || !a.iter().all(|v| s.accepts(v)) {
                return Err(Error::DimensionMismatch(format!(
                    "grid entry in block {j} is not a {}-tuple of the structure",
                    f.y_arities[j]
                )));
            }
        }
    }
    Ok(())
}

fn assignment(x: &[Value], grid: &[Vec<Vec<Value>>], coords: &[usize]) -> Assignment {
    Assignment {
        x: x.to_vec(),
        y: coords.iter().enumerate().map(|(j, &i)| grid[j][i].clone()).collect(),
    }
}

/// Checks `φ(b_s; a_{0,i_0}, ..) ⟺ (i_0, ..) ∈ s` for every witness and cell.
/// Subsets are checked in parallel; the reported violation is the one with
/// the least subset, then the least cell.
pub fn verify_shatter(s: &Structure, inst: &ShatterInstance, max_cells: usize) -> Result<ShatterReport> {
    check_shape(s, &inst.formula, &inst.grid)?;
    let sizes = inst.grid_sizes();
    let cells = inst.cell_count();
    if cells > max_cells || cells >= 64 {
        return Err(Error::budget("shatter grid cells", max_cells as u64));
    }
    let mut ws: Vec<&Witness> = inst.witnesses.iter().collect();
    ws.sort_by_key(|w| w.subset);
    if ws.windows(2).any(|w| w[0].subset == w[1].subset) {
        return Err(Error::Precondition("two witnesses for the same subset".into()));
    }
    let total = 1u64 << cells;
    if let Some(w) = ws.iter().find(|w| w.subset >= total) {
        return Err(Error::Precondition(format!("subset {} out of range", w.subset)));
    }
    if !inst.sample && ws.len() as u64 != total {
        return Err(Error::Precondition(format!(
            "{} witnesses for {total} subsets and the instance is not a declared sample",
            ws.len()
        )));
    }
    for w in &ws {
        if w.object.len() != inst.formula.x_arity || !w.object.iter().all(|v| s.accepts(v)) {
            return Err(Error::DimensionMismatch(format!("witness for subset {} has the wrong shape", w.subset)));
        }
    }
    let results: Vec<Result<Option<ShatterViolation>>> = ws
        .par_iter()
        .map(|w| {
            for c in 0..cells {
                let coords = cell_coords(&sizes, c);
                let expected = w.subset >> c & 1 == 1;
                let got = evaluate(&inst.formula, s, &assignment(&w.object, &inst.grid, &coords))?;
                if got != expected {
                    return Ok(Some(ShatterViolation {
                        subset: w.subset,
                        cell: coords,
                        expected,
                    }));
                }
            }
            Ok(None)
        })
        .collect();
    let mut violation = None;
    let mut evaluations = 0u64;
    for r in results {
        match r? {
            Some(v) if violation.is_none() => {
                evaluations += cell_index(&sizes, &v.cell) as u64 + 1;
                violation = Some(v);
            }
            Some(v) => evaluations += cell_index(&sizes, &v.cell) as u64 + 1,
            None => evaluations += cells as u64,
        }
    }
    Ok(ShatterReport {
        semantics: SEMANTICS.to_string(),
        pass: violation.is_none(),
        grid_sizes: sizes,
        cells,
        subsets_checked: ws.len() as u64,
        evaluations,
        sample: inst.sample,
        violation,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub semantics: String,
    pub found: Option<ShatterInstance>,
    /// The whole search space was scanned.
    pub exhausted: bool,
    pub budget: u64,
    pub evaluations: u64,
    pub grids_tried: u64,
    pub seed: Option<u64>,
}

impl SearchOutcome {
    pub fn verdict(&self) -> String {
        match (&self.found, self.exhausted) {
            (Some(_), _) => "found".to_string(),
            (None, true) => "not found (search space exhausted)".to_string(),
            (None, false) => format!("not found (budget {})", self.budget),
        }
    }
}

fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    let Some(i) = (0..k).rev().find(|&i| c[i] < n - k + i) else {
        return false;
    };
    c[i] += 1;
    for j in i + 1..k {
        c[j] = c[j - 1] + 1;
    }
    true
}

/// Searches grids of the given sizes (sets of distinct parameter tuples per
/// block, lexicographic over index combinations) for one the formula
/// shatters. With a seed, parameter and object orders are shuffled first.
pub fn search_shatter(
    s: &Structure,
    f: &ParsedFormula,
    grid_sizes: &[usize],
    budget: u64,
    seed: Option<u64>,
) -> Result<SearchOutcome> {
    let k = f.k();
    if grid_sizes.len() != k {
        return Err(Error::DimensionMismatch(format!(
            "formula has {k} parameter blocks, {} grid sizes given",
            grid_sizes.len()
        )));
    }
    let cells: usize = grid_sizes.iter().product();
    if cells > DEFAULT_MAX_CELLS || cells == 0 {
        return Err(Error::budget("shatter grid cells", DEFAULT_MAX_CELLS as u64));
    }
    let outcome = |found, exhausted, evaluations, grids_tried| SearchOutcome {
        semantics: SEMANTICS.to_string(),
        found,
        exhausted,
        budget,
        evaluations,
        grids_tried,
        seed,
    };
    let xs_n = s.tuple_domain(f.x_arity)?;
    let ys_n: Vec<u64> = f.y_arities.iter().map(|&a| s.tuple_domain(a)).collect::<Result<_>>()?;
    let patterns = 1u64 << cells;
    if xs_n < patterns || ys_n.iter().zip(grid_sizes).any(|(&t, &n)| (n as u64) > t) {
        return Ok(outcome(None, true, 0, 0));
    }
    let mut rng = seed.map(ChaCha8Rng::seed_from_u64);
    let mut shuffled = |n: u64| -> Vec<u64> {
        let mut v: Vec<u64> = (0..n).collect();
        if let Some(r) = rng.as_mut() {
            v.shuffle(r);
        }
        v
    };
    let x_order = shuffled(xs_n);
    let y_orders: Vec<Vec<u64>> = ys_n.iter().map(|&t| shuffled(t)).collect();
    let xs: Vec<Vec<Value>> = x_order.iter().map(|&i| s.tuple(f.x_arity, i)).collect();
    let ys: Vec<Vec<Vec<Value>>> = y_orders
        .iter()
        .zip(&f.y_arities)
        .map(|(ord, &a)| ord.iter().map(|&i| s.tuple(a, i)).collect())
        .collect();

    let memo_size = ys_n.iter().try_fold(xs_n, |acc, &t| acc.checked_mul(t)).filter(|&m| m <= MAX_MEMO);
    let mut memo: Vec<u8> = vec![0; memo_size.unwrap_or(0) as usize];
    let mut strides = vec![1u64; k];
    for j in (0..k.saturating_sub(1)).rev() {
        strides[j] = strides[j + 1] * ys_n[j + 1];
    }
    let block = strides.first().map(|&s0| s0 * ys_n[0]).unwrap_or(1);

    let mut combos: Vec<Vec<usize>> = grid_sizes.iter().map(|&n| (0..n).collect()).collect();
    let cell_params: Vec<Vec<usize>> = (0..cells).map(|c| cell_coords(grid_sizes, c)).collect();
    let mut evaluations = 0u64;
    let mut grids_tried = 0u64;
    loop {
        grids_tried += 1;
        let mut first: Vec<Option<usize>> = vec![None; patterns as usize];
        let mut covered = 0u64;
        let cell_keys: Vec<Vec<usize>> = cell_params
            .iter()
            .map(|coords| coords.iter().enumerate().map(|(j, &i)| combos[j][i]).collect())
            .collect();
        for (xi, x) in xs.iter().enumerate() {
            let mut mask = 0u64;
            for (c, key) in cell_keys.iter().enumerate() {
                evaluations += 1;
                if evaluations > budget {
                    return Ok(outcome(None, false, evaluations - 1, grids_tried));
                }
                let slot = memo_size.map(|_| {
                    xi as u64 * block + key.iter().zip(&strides).map(|(&t, &st)| t as u64 * st).sum::<u64>()
                });
                let cached = slot.map(|i| memo[i as usize]).unwrap_or(0);
                let truth = if cached != 0 {
                    cached == 2
                } else {
                    let asg = Assignment {
                        x: x.clone(),
                        y: key.iter().enumerate().map(|(j, &t)| ys[j][t].clone()).collect(),
                    };
                    let t = evaluate(f, s, &asg)?;
                    if let Some(i) = slot {
                        memo[i as usize] = if t { 2 } else { 1 };
                    }
                    t
                };
                if truth {
                    mask |= 1 << c;
                }
            }
            if first[mask as usize].is_none() {
                first[mask as usize] = Some(xi);
                covered += 1;
                if covered == patterns {
                    break;
                }
            }
        }
        if covered == patterns {
            let grid = (0..k)
                .map(|j| combos[j].iter().map(|&t| ys[j][t].clone()).collect())
                .collect();
            let witnesses = first
                .iter()
                .enumerate()
                .map(|(subset, xi)| Witness {
                    subset: subset as u64,
                    object: xs[xi.expect("covered")].clone(),
                })
                .collect();
            let inst = ShatterInstance {
                formula: f.clone(),
                grid,
                witnesses,
                sample: false,
            };
            let report = verify_shatter(s, &inst, DEFAULT_MAX_CELLS)?;
            if !report.pass {
                return Err(Error::Domain(format!("search produced an instance failing verification: {:?}", report.violation)));
            }
            return Ok(outcome(Some(inst), false, evaluations, grids_tried));
        }
        let mut j = k;
        loop {
            if j == 0 {
                return Ok(outcome(None, true, evaluations, grids_tried));
            }
            j -= 1;
            if next_combination(&mut combos[j], ys_n[j] as usize) {
                break;
            }
            combos[j] = (0..grid_sizes[j]).collect();
        }
    }
}

/// The instance on the subgrid made of the first `sizes[j]` entries of
/// each block, reusing the witnesses of the full grid.
pub fn restrict_instance(inst: &ShatterInstance, sizes: &[usize]) -> Result<ShatterInstance> {
    let full = inst.grid_sizes();
    if sizes.len() != full.len() || sizes.iter().zip(&full).any(|(a, b)| a > b || *a == 0) {
        return Err(Error::Precondition(format!("{sizes:?} is not a subgrid of {full:?}")));
    }
    let sub_cells: usize = sizes.iter().product();
    if sub_cells >= 64 {
        return Err(Error::budget("shatter grid cells", 63));
    }
    let embed: Vec<usize> = (0..sub_cells).map(|c| cell_index(&full, &cell_coords(sizes, c))).collect();
    let mut witnesses = Vec::with_capacity(1 << sub_cells);
    for sub in 0u64..1 << sub_cells {
        let mask = embed
            .iter()
            .enumerate()
            .filter(|(c, _)| sub >> c & 1 == 1)
            .fold(0u64, |m, (_, &fc)| m | 1 << fc);
        match inst.witnesses.iter().find(|w| w.subset == mask) {
            Some(w) => witnesses.push(Witness {
                subset: sub,
                object: w.object.clone(),
            }),
            None if inst.sample => {}
            None => return Err(Error::Precondition(format!("no witness for subset {mask}"))),
        }
    }
    Ok(ShatterInstance {
        formula: inst.formula.clone(),
        grid: inst.grid.iter().zip(sizes).map(|(b, &n)| b[..n].to_vec()).collect(),
        sample: inst.sample || witnesses.len() as u64 != 1 << sub_cells,
        witnesses,
    })
}

/// `a_i = e_i`, `b_S = Σ_{i∈S} e_i` for `φ(x; y) := dot(x, y) = 1`.
pub fn bilinear_ip_instance(b: &BilinearFormStructure, n: usize) -> Result<ShatterInstance> {
    if n > b.m || n == 0 || n >= 64 {
        return Err(Error::Precondition(format!("need 1 <= n <= m = {}, got {n}", b.m)));
    }
    let formula = parse_formula("dot(x_1, y0_1) = 1")?;
    let grid = vec![(0..n).map(|i| vec![Value::Vector(b.unit(i))]).collect()];
    let witnesses = (0u64..1 << n)
        .map(|s| {
            let mut v = FpVector::zero(b.p, b.m);
            for i in (0..n).filter(|i| s >> i & 1 == 1) {
                v = v.add(&b.unit(i));
            }
            Witness {
                subset: s,
                object: vec![Value::Vector(v)],
            }
        })
        .collect();
    Ok(ShatterInstance {
        formula,
        grid,
        witnesses,
        sample: false,
    })
}

/// A `k`-uniform hypergraph with a witness vertex for every pattern over
/// a grid of `n` fresh vertices in each of `k - 1` coordinates, and its
/// canonical instance for `R(x_1, y0_1, .., y{k-2}_1)`.
#[derive(Debug, Clone)]
pub struct ShatteringHypergraph {
    pub structure: RelStructure,
    pub instance: ShatterInstance,
}

pub fn build_shattering_hypergraph(k: usize, n: usize) -> Result<ShatteringHypergraph> {
    if k < 2 || n == 0 {
        return Err(Error::Precondition(format!("need k >= 2 and n >= 1, got k={k}, n={n}")));
    }
    let cells = n
        .checked_pow((k - 1) as u32)
        .filter(|&c| c <= DEFAULT_MAX_CELLS)
        .ok_or_else(|| Error::budget("shatter grid cells", DEFAULT_MAX_CELLS as u64))?;
    let sizes = vec![n; k - 1];
    let grid_vertex = |j: usize, i: usize| j * n + i;
    let base = (k - 1) * n;
    let patterns = 1usize << cells;
    let mut s = RelStructure::new(base + patterns);
    let r = s.add_relation("R", k, true)?;
    for sub in 0..patterns {
        for c in (0..cells).filter(|c| sub >> c & 1 == 1) {
            let mut t: Vec<usize> = cell_coords(&sizes, c)
                .iter()
                .enumerate()
                .map(|(j, &i)| grid_vertex(j, i))
                .collect();
            t.push(base + sub);
            s.add_tuple(r, &t)?;
        }
    }
    let args: Vec<String> = std::iter::once("x_1".to_string())
        .chain((0..k - 1).map(|j| format!("y{j}_1")))
        .collect();
    let formula = parse_formula(&format!("R({})", args.join(", ")))?;
    let grid = (0..k - 1)
        .map(|j| (0..n).map(|i| vec![Value::Elem(grid_vertex(j, i))]).collect())
        .collect();
    let witnesses = (0..patterns)
        .map(|sub| Witness {
            subset: sub as u64,
            object: vec![Value::Elem(base + sub)],
        })
        .collect();
    Ok(ShatteringHypergraph {
        structure: s,
        instance: ShatterInstance {
            formula,
            grid,
            witnesses,
            sample: false,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;

    #[test]
    fn bilinear_basics() {
        let b = bilinear_structure(3, 4).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(b.dot(&b.unit(i), &b.unit(j)), u32::from(i == j));
            }
        }
        assert!(b.verify_form(100, 7));
        assert!(bilinear_structure(3, 0).is_err());
        assert!(bilinear_structure(4, 2).is_err());
    }

    #[test]
    fn one_cell_grid() {
        let b = Structure::Bilinear(bilinear_structure(3, 1).unwrap());
        let f = parse_formula("dot(x_1, y0_1) = 1").unwrap();
        let v = |c: i64| vec![Value::Vector(FpVector::new(3, [c]))];
        let mut inst = ShatterInstance {
            formula: f,
            grid: vec![vec![v(1)]],
            witnesses: vec![
                Witness { subset: 0, object: v(0) },
                Witness { subset: 1, object: v(1) },
            ],
            sample: false,
        };
        assert!(verify_shatter(&b, &inst, 16).unwrap().pass);
        inst.witnesses[0].object = v(1);
        let r = verify_shatter(&b, &inst, 16).unwrap();
        assert_eq!(
            r.violation,
            Some(ShatterViolation {
                subset: 0,
                cell: vec![0],
                expected: false
            })
        );
        inst.witnesses.pop();
        assert!(matches!(verify_shatter(&b, &inst, 16), Err(Error::Precondition(_))));
        inst.sample = true;
        assert!(!verify_shatter(&b, &inst, 16).unwrap().pass);
    }

    #[test]
    fn canonical_bilinear_family() {
        let b = bilinear_structure(3, 8).unwrap();
        let inst = bilinear_ip_instance(&b, 8).unwrap();
        let s = Structure::Bilinear(b.clone());
        let r = verify_shatter(&s, &inst, 16).unwrap();
        assert!(r.pass);
        assert_eq!(r.subsets_checked, 256);
        assert_eq!(r.evaluations, 256 * 8);

        // Oracle independent of the evaluator: dot(b_S, e_i) is the i-th
        // coordinate of b_S, which is 1 exactly when i ∈ S.
        for w in &inst.witnesses {
            let Value::Vector(v) = &w.object[0] else { panic!() };
            for i in 0..8 {
                assert_eq!(v.get(i) == 1, w.subset >> i & 1 == 1);
            }
        }

        let mut bad = inst.clone();
        bad.witnesses[77].object = bad.witnesses[76].object.clone();
        let r = verify_shatter(&s, &bad, 16).unwrap();
        let v = r.violation.unwrap();
        assert_eq!(v.subset, 77);
        assert_eq!(v.cell, vec![0]);
        assert!(verify_shatter(&s, &bilinear_ip_instance(&b, 5).unwrap(), 4).is_err());
    }

    #[test]
    fn restriction_is_monotone() {
        let b = bilinear_structure(3, 6).unwrap();
        let s = Structure::Bilinear(b.clone());
        let inst = bilinear_ip_instance(&b, 6).unwrap();
        for n in 1..=6 {
            let sub = restrict_instance(&inst, &[n]).unwrap();
            assert_eq!(sub.witnesses.len(), 1 << n);
            assert!(verify_shatter(&s, &sub, 16).unwrap().pass, "n = {n}");
        }
        let h = build_shattering_hypergraph(3, 3).unwrap();
        let hs = Structure::Relational(h.structure.clone());
        for sizes in [[1, 1], [1, 3], [2, 2], [3, 2], [2, 3]] {
            let sub = restrict_instance(&h.instance, &sizes).unwrap();
            assert!(verify_shatter(&hs, &sub, 16).unwrap().pass, "{sizes:?}");
        }
        assert!(restrict_instance(&inst, &[7]).is_err());
    }

    #[test]
    fn shattering_hypergraphs() {
        let h = build_shattering_hypergraph(2, 2).unwrap();
        assert_eq!(h.structure.universe_size, 2 + 4);
        let edges = &h.structure.relation("R").unwrap().tuples;
        assert_eq!(edges.len(), 4);
        for (k, n, patterns) in [(2, 3, 8u64), (3, 2, 16), (3, 3, 512), (4, 2, 256)] {
            let h = build_shattering_hypergraph(k, n).unwrap();
            let s = Structure::Relational(h.structure.clone());
            let r = verify_shatter(&s, &h.instance, 16).unwrap();
            assert!(r.pass, "k={k} n={n}");
            assert_eq!(r.subsets_checked, patterns);
            for t in &h.structure.relation("R").unwrap().tuples {
                assert_eq!(t.len(), k);
            }
        }
        assert!(matches!(build_shattering_hypergraph(3, 5), Err(Error::Budget { .. })));
        assert!(build_shattering_hypergraph(1, 2).is_err());
    }

    #[test]
    fn search_examples() {
        let b = Structure::Bilinear(bilinear_structure(3, 4).unwrap());
        let f = parse_formula("dot(x_1, y0_1) = 1").unwrap();
        let out = search_shatter(&b, &f, &[2], 1_000_000, None).unwrap();
        assert_eq!(out.verdict(), "found");
        assert!(verify_shatter(&b, out.found.as_ref().unwrap(), 16).unwrap().pass);
        let seeded = search_shatter(&b, &f, &[2], 1_000_000, Some(5)).unwrap();
        assert!(verify_shatter(&b, seeded.found.as_ref().unwrap(), 16).unwrap().pass);
        assert_eq!(seeded, search_shatter(&b, &f, &[2], 1_000_000, Some(5)).unwrap());

        let one = Structure::Relational(RelStructure::new(1));
        let eq = parse_formula("x_1 = y0_1").unwrap();
        let out = search_shatter(&one, &eq, &[2], 1_000_000, None).unwrap();
        assert!(out.found.is_none() && out.exhausted);

        let h = build_shattering_hypergraph(3, 2).unwrap();
        let hs = Structure::Relational(h.structure);
        let rf = parse_formula("R(x_1, y0_1, y1_1)").unwrap();
        let out = search_shatter(&hs, &rf, &[2, 2], 10_000_000, None).unwrap();
        assert!(verify_shatter(&hs, out.found.as_ref().unwrap(), 16).unwrap().pass);

        let out = search_shatter(&hs, &rf, &[2, 2], 10, None).unwrap();
        assert_eq!(out.verdict(), "not found (budget 10)");
        assert!(search_shatter(&hs, &rf, &[2], 10, None).is_err());
        assert!(search_shatter(&hs, &rf, &[5, 5], 10, None).is_err());
    }

    #[test]
    fn group_sort_search_runs() {
        // Commutation with a generator over G(P3, 3): an exploratory probe
        // whose outcome is only reported.
        let g = MeklerGroup::new(Graph::path(3), 3).unwrap();
        let s = Structure::Group(g);
        let f = parse_formula("Comm(x_1, y0_1)").unwrap();
        let out = search_shatter(&s, &f, &[2], 5_000_000, None).unwrap();
        if let Some(inst) = &out.found {
            assert!(verify_shatter(&s, inst, 16).unwrap().pass);
        }
    }

    #[test]
    fn two_ip_probe_finds_nothing_on_small_bilinear_structure() {
        let b = Structure::Bilinear(bilinear_structure(3, 3).unwrap());
        for text in ["dot(x_1*y0_1, y1_1) = 0", "dot(x_1, y0_1) = 1 & dot(x_1, y1_1) = 1", "x_1 = y0_1*y1_1"] {
            let f = parse_formula(text).unwrap();
            let out = search_shatter(&b, &f, &[2, 2], 3_000_000, None).unwrap();
            assert!(out.found.is_none(), "{text}");
        }
    }
}
