//! Exact linear algebra over the prime field F_p.
//!
//! Vectors carry their modulus and keep every coordinate reduced into
//! `0..p`. Subspaces are stored by their reduced row echelon basis, which is
//! a canonical form: two subspaces are equal iff their bases are equal.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Checks that `p` is an odd prime.
pub fn validate_prime(p: u32) -> Result<u32> {
    if p < 3 || p % 2 == 0 {
        return Err(Error::InvalidModulus(p));
    }
    let mut d = 3u32;
    while (d as u64) * (d as u64) <= p as u64 {
        if p % d == 0 {
            return Err(Error::InvalidModulus(p));
        }
        d += 2;
    }
    Ok(p)
}

#[inline]
pub(crate) fn mul_mod(a: u32, b: u32, p: u32) -> u32 {
    ((a as u64 * b as u64) % p as u64) as u32
}

#[inline]
pub(crate) fn reduce_i64(x: i64, p: u32) -> u32 {
    x.rem_euclid(p as i64) as u32
}

/// Multiplicative inverse of a nonzero residue.
pub fn inv_mod(a: u32, p: u32) -> u32 {
    debug_assert!(a % p != 0);
    let mut result = 1u64;
    let mut base = (a % p) as u64;
    let mut e = p - 2;
    let m = p as u64;
    while e > 0 {
        if e & 1 == 1 {
            result = result * base % m;
        }
        base = base * base % m;
        e >>= 1;
    }
    result as u32
}

/// A vector in F_p^len.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FpVector {
    p: u32,
    coords: Vec<u32>,
}

impl fmt::Debug for FpVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl fmt::Display for FpVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.coords.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl FpVector {
    /// Builds a vector from arbitrary integers, reducing each mod `p`.
    pub fn new(p: u32, coords: impl IntoIterator<Item = i64>) -> Self {
        FpVector {
            p,
            coords: coords.into_iter().map(|c| reduce_i64(c, p)).collect(),
        }
    }

    pub fn from_residues(p: u32, coords: Vec<u32>) -> Self {
        let coords = coords.into_iter().map(|c| c % p).collect();
        FpVector { p, coords }
    }

    pub fn zero(p: u32, len: usize) -> Self {
        FpVector {
            p,
            coords: vec![0; len],
        }
    }

    pub fn unit(p: u32, len: usize, i: usize) -> Self {
        let mut v = Self::zero(p, len);
        v.coords[i] = 1;
        v
    }

    /// The vector whose base-`p` digits are `index`, coordinate 0 most
    /// significant. Iterating `index` upwards walks vectors in
    /// lexicographic order.
    pub fn from_index(p: u32, len: usize, mut index: u64) -> Self {
        let mut coords = vec![0u32; len];
        for c in coords.iter_mut().rev() {
            *c = (index % p as u64) as u32;
            index /= p as u64;
        }
        FpVector { p, coords }
    }

    /// Inverse of [`FpVector::from_index`].
    pub fn index(&self) -> u64 {
        self.coords
            .iter()
            .fold(0u64, |acc, &c| acc * self.p as u64 + c as u64)
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coords(&self) -> &[u32] {
        &self.coords
    }

    pub fn get(&self, i: usize) -> u32 {
        self.coords[i]
    }

    pub fn set(&mut self, i: usize, value: i64) {
        self.coords[i] = reduce_i64(value, self.p);
    }

    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(|&c| c == 0)
    }

    /// Index of the first nonzero coordinate.
    pub fn leading(&self) -> Option<usize> {
        self.coords.iter().position(|&c| c != 0)
    }

    fn check_compatible(&self, other: &FpVector) -> Result<()> {
        if self.p != other.p || self.len() != other.len() {
            return Err(Error::DimensionMismatch(format!(
                "vectors over F_{} of length {} and F_{} of length {}",
                self.p,
                self.len(),
                other.p,
                other.len()
            )));
        }
        Ok(())
    }

    pub fn try_add(&self, other: &FpVector) -> Result<FpVector> {
        self.check_compatible(other)?;
        Ok(self.add(other))
    }

    /// Coordinate-wise sum. Panics on a length mismatch; use
    /// [`FpVector::try_add`] for checked addition.
    pub fn add(&self, other: &FpVector) -> FpVector {
        assert_eq!(self.len(), other.len(), "vector length mismatch");
        let p = self.p;
        FpVector {
            p,
            coords: self
                .coords
                .iter()
                .zip(&other.coords)
                .map(|(&a, &b)| (a + b) % p)
                .collect(),
        }
    }

    pub fn sub(&self, other: &FpVector) -> FpVector {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> FpVector {
        let p = self.p;
        FpVector {
            p,
            coords: self.coords.iter().map(|&a| (p - a) % p).collect(),
        }
    }

    pub fn scale(&self, k: i64) -> FpVector {
        let p = self.p;
        let k = reduce_i64(k, p);
        FpVector {
            p,
            coords: self.coords.iter().map(|&a| mul_mod(a, k, p)).collect(),
        }
    }

    /// `self += k * other`, in place.
    pub fn add_scaled(&mut self, other: &FpVector, k: u32) {
        let p = self.p;
        for (a, &b) in self.coords.iter_mut().zip(&other.coords) {
            *a = (*a + mul_mod(b, k, p)) % p;
        }
    }

    pub fn dot(&self, other: &FpVector) -> Result<u32> {
        self.check_compatible(other)?;
        let p = self.p as u64;
        let s = self
            .coords
            .iter()
            .zip(&other.coords)
            .fold(0u64, |acc, (&a, &b)| (acc + a as u64 * b as u64) % p);
        Ok(s as u32)
    }

    /// Scales so the leading coordinate is 1; the zero vector is returned
    /// unchanged. Two nonzero vectors span the same line iff their
    /// normalizations agree.
    pub fn projective_normal(&self) -> FpVector {
        match self.leading() {
            None => self.clone(),
            Some(i) => self.scale(inv_mod(self.coords[i], self.p) as i64),
        }
    }

    pub fn concat(&self, other: &FpVector) -> FpVector {
        let mut coords = self.coords.clone();
        coords.extend_from_slice(&other.coords);
        FpVector { p: self.p, coords }
    }
}

/// A subspace of F_p^ambient, stored as a reduced row echelon basis.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FpSubspace {
    p: u32,
    ambient: usize,
    basis: Vec<FpVector>,
    pivots: Vec<usize>,
}

impl FpSubspace {
    pub fn zero(p: u32, ambient: usize) -> Self {
        FpSubspace {
            p,
            ambient,
            basis: Vec::new(),
            pivots: Vec::new(),
        }
    }

    pub fn full(p: u32, ambient: usize) -> Self {
        FpSubspace {
            p,
            ambient,
            basis: (0..ambient).map(|i| FpVector::unit(p, ambient, i)).collect(),
            pivots: (0..ambient).collect(),
        }
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn ambient(&self) -> usize {
        self.ambient
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[FpVector] {
        &self.basis
    }

    pub fn pivots(&self) -> &[usize] {
        &self.pivots
    }

    pub fn is_full(&self) -> bool {
        self.dim() == self.ambient
    }

    fn check_vector(&self, v: &FpVector) -> Result<()> {
        if v.p() != self.p || v.len() != self.ambient {
            return Err(Error::DimensionMismatch(format!(
                "vector over F_{} of length {} against subspace of F_{}^{}",
                v.p(),
                v.len(),
                self.p,
                self.ambient
            )));
        }
        Ok(())
    }

    /// Canonical residue of `v` modulo this subspace: zero on every pivot
    /// column. Two vectors are congruent iff their residues are equal.
    pub fn reduce(&self, v: &FpVector) -> FpVector {
        let mut r = v.clone();
        for (row, &c) in self.basis.iter().zip(&self.pivots) {
            let k = r.get(c);
            if k != 0 {
                r.add_scaled(row, self.p - k);
            }
        }
        r
    }

    pub fn contains(&self, v: &FpVector) -> Result<bool> {
        self.check_vector(v)?;
        Ok(self.reduce(v).is_zero())
    }

    /// Smallest subspace containing both.
    pub fn sum(&self, other: &FpSubspace) -> Result<FpSubspace> {
        if self.p != other.p || self.ambient != other.ambient {
            return Err(Error::DimensionMismatch(
                "subspaces in different ambient spaces".into(),
            ));
        }
        let mut rows = self.basis.clone();
        rows.extend(other.basis.iter().cloned());
        rref(self.p, self.ambient, &rows)
    }

    pub fn with_vectors(&self, vs: &[FpVector]) -> Result<FpSubspace> {
        let mut rows = self.basis.clone();
        rows.extend(vs.iter().cloned());
        rref(self.p, self.ambient, &rows)
    }

    pub fn is_subspace_of(&self, other: &FpSubspace) -> Result<bool> {
        for b in &self.basis {
            if !other.contains(b)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Coordinates of `v` in the echelon basis, if `v` lies in the span.
    pub fn coordinates(&self, v: &FpVector) -> Result<Option<Vec<u32>>> {
        self.check_vector(v)?;
        let coeffs: Vec<u32> = self.pivots.iter().map(|&c| v.get(c)).collect();
        let mut recon = FpVector::zero(self.p, self.ambient);
        for (row, &k) in self.basis.iter().zip(&coeffs) {
            recon.add_scaled(row, k);
        }
        Ok((recon == *v).then_some(coeffs))
    }

    /// Every vector of the subspace, ordered by coordinates in the echelon
    /// basis. Yields `p^dim` items.
    pub fn elements(&self) -> impl Iterator<Item = FpVector> + '_ {
        let count = (self.p as u64).checked_pow(self.dim() as u32).unwrap_or(u64::MAX);
        (0..count).map(move |idx| {
            let coeffs = FpVector::from_index(self.p, self.dim(), idx);
            let mut v = FpVector::zero(self.p, self.ambient);
            for (row, &k) in self.basis.iter().zip(coeffs.coords()) {
                if k != 0 {
                    v.add_scaled(row, k);
                }
            }
            v
        })
    }
}

fn check_rows(p: u32, cols: usize, rows: &[FpVector]) -> Result<()> {
    validate_prime(p)?;
    for (i, r) in rows.iter().enumerate() {
        if r.p() != p || r.len() != cols {
            return Err(Error::DimensionMismatch(format!(
                "row {i} is over F_{} with length {}, expected F_{p} with length {cols}",
                r.p(),
                r.len()
            )));
        }
    }
    Ok(())
}

/// Reduced row echelon form; returns the nonzero rows and their pivots.
fn echelon(p: u32, cols: usize, rows: &[FpVector]) -> (Vec<FpVector>, Vec<usize>) {
    let mut m: Vec<FpVector> = rows.to_vec();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == m.len() {
            break;
        }
        let Some(src) = (r..m.len()).find(|&i| m[i].get(c) != 0) else {
            continue;
        };
        m.swap(r, src);
        let inv = inv_mod(m[r].get(c), p);
        m[r] = m[r].scale(inv as i64);
        let pivot_row = m[r].clone();
        for (i, row) in m.iter_mut().enumerate() {
            if i != r {
                let k = row.get(c);
                if k != 0 {
                    row.add_scaled(&pivot_row, p - k);
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    m.truncate(r);
    (m, pivots)
}

/// Canonical reduced row echelon basis of the row span.
pub fn rref(p: u32, cols: usize, rows: &[FpVector]) -> Result<FpSubspace> {
    check_rows(p, cols, rows)?;
    let (basis, pivots) = echelon(p, cols, rows);
    Ok(FpSubspace {
        p,
        ambient: cols,
        basis,
        pivots,
    })
}

/// Right kernel `{x : M x = 0}` of the matrix whose rows are `rows`.
pub fn kernel(p: u32, cols: usize, rows: &[FpVector]) -> Result<FpSubspace> {
    check_rows(p, cols, rows)?;
    let (basis, pivots) = echelon(p, cols, rows);
    let mut is_pivot = vec![false; cols];
    for &c in &pivots {
        is_pivot[c] = true;
    }
    let mut generators = Vec::new();
    for free in (0..cols).filter(|&c| !is_pivot[c]) {
        let mut v = FpVector::zero(p, cols);
        v.set(free, 1);
        for (row, &c) in basis.iter().zip(&pivots) {
            let k = row.get(free);
            if k != 0 {
                v.set(c, -(k as i64));
            }
        }
        generators.push(v);
    }
    rref(p, cols, &generators)
}

/// Whether `v` lies in `s`.
pub fn in_span(v: &FpVector, s: &FpSubspace) -> Result<bool> {
    s.contains(v)
}

/// Greedily extends `s` by the given candidates, in order, keeping each
/// candidate that is independent of what has been accepted so far. Returns
/// the span of the accepted candidates.
pub fn extend_basis(s: &FpSubspace, candidates: &[FpVector]) -> Result<FpSubspace> {
    let mut acc = s.clone();
    let mut chosen = Vec::new();
    for v in candidates {
        if !acc.contains(v)? {
            acc = acc.with_vectors(std::slice::from_ref(v))?;
            chosen.push(v.clone());
        }
    }
    rref(s.p, s.ambient, &chosen)
}

/// A direct-sum complement of `s`, extending by standard basis vectors in
/// index order.
pub fn complement(s: &FpSubspace, ambient_dim: usize) -> Result<FpSubspace> {
    if s.ambient != ambient_dim {
        return Err(Error::DimensionMismatch(format!(
            "subspace lives in dimension {}, not {ambient_dim}",
            s.ambient
        )));
    }
    let units: Vec<FpVector> = (0..ambient_dim)
        .map(|i| FpVector::unit(s.p, ambient_dim, i))
        .collect();
    extend_basis(s, &units)
}

/// Rank of a list of vectors.
pub fn rank(p: u32, cols: usize, rows: &[FpVector]) -> Result<usize> {
    Ok(rref(p, cols, rows)?.dim())
}
