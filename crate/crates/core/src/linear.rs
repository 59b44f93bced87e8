//! Graded vectors in `K^{p|q}`, supermatrices, and graded module actions.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{AlgebraError, Result};
use crate::grassmann::{Accumulator, GrassmannAlgebra, Parity, Supernumber, Tolerance};

/// Parity of basis slot `index` in a `(p, q)` grading.
#[inline]
pub fn slot_parity(p: usize, index: usize) -> Parity {
    if index < p {
        Parity::Even
    } else {
        Parity::Odd
    }
}

/// Element of `K^{p|q}`: `p` even slots followed by `q` odd slots.
#[derive(Clone, Debug)]
pub struct SuperVector {
    p: usize,
    q: usize,
    entries: Vec<Supernumber>,
}

impl SuperVector {
    /// Validates membership in `K^{p|q}`.
    pub fn new(p: usize, q: usize, entries: Vec<Supernumber>) -> Result<Self> {
        if entries.len() != p + q {
            return Err(AlgebraError::Dimension(format!(
                "K^{{{p}|{q}}} needs {} entries, got {}",
                p + q,
                entries.len()
            )));
        }
        if let Some(first) = entries.first() {
            let algebra = first.algebra();
            if entries.iter().any(|e| e.algebra() != algebra) {
                return Err(AlgebraError::Incompatible(
                    "vector entries from different algebras".into(),
                ));
            }
        }
        for (m, entry) in entries.iter().enumerate() {
            let want = slot_parity(p, m);
            if !entry.has_parity(want) {
                return Err(AlgebraError::Parity(format!(
                    "slot {} of K^{{{p}|{q}}} must be {:?}, got {}",
                    m + 1,
                    want,
                    entry
                )));
            }
        }
        Ok(SuperVector { p, q, entries })
    }

    pub fn zeros(p: usize, q: usize, algebra: GrassmannAlgebra) -> Self {
        SuperVector {
            p,
            q,
            entries: vec![algebra.zero(); p + q],
        }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn dim(&self) -> usize {
        self.p + self.q
    }

    pub fn entries(&self) -> &[Supernumber] {
        &self.entries
    }

    pub fn entry(&self, m: usize) -> &Supernumber {
        &self.entries[m]
    }

    pub fn into_entries(self) -> Vec<Supernumber> {
        self.entries
    }

    pub fn algebra(&self) -> Option<GrassmannAlgebra> {
        self.entries.first().map(|e| e.algebra())
    }

    /// `Σ_M ‖v^M‖`.
    pub fn norm(&self) -> f64 {
        self.entries.iter().map(Supernumber::norm).sum()
    }

    fn check_shape(&self, other: &SuperVector) -> Result<()> {
        if self.p != other.p || self.q != other.q {
            return Err(AlgebraError::Dimension(format!(
                "K^{{{}|{}}} vs K^{{{}|{}}}",
                self.p, self.q, other.p, other.q
            )));
        }
        Ok(())
    }

    pub fn checked_add(&self, other: &SuperVector) -> Result<SuperVector> {
        self.check_shape(other)?;
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a.checked_add(b))
            .collect::<Result<_>>()?;
        Ok(SuperVector { p: self.p, q: self.q, entries })
    }

    pub fn checked_sub(&self, other: &SuperVector) -> Result<SuperVector> {
        self.checked_add(&other.scale_real(-1.0))
    }

    pub fn scale_real(&self, factor: f64) -> SuperVector {
        SuperVector {
            p: self.p,
            q: self.q,
            entries: self.entries.iter().map(|e| e.scale_real(factor)).collect(),
        }
    }

    /// Scaling by an even supernumber. Odd scalars would swap the slot parities
    /// and leave `K^{p|q}`, so they are rejected.
    pub fn scale_even(&self, alpha: &Supernumber) -> Result<SuperVector> {
        if !alpha.is_even() {
            return Err(AlgebraError::Parity(
                "K^{p|q} is only closed under even scalars".into(),
            ));
        }
        let entries = self
            .entries
            .iter()
            .map(|e| alpha.checked_mul(e))
            .collect::<Result<Vec<_>>>()?;
        SuperVector::new(self.p, self.q, entries)
    }

    pub fn max_label(&self) -> u32 {
        self.entries.iter().map(Supernumber::max_label).max().unwrap_or(0)
    }

    pub fn approx_eq(&self, other: &SuperVector, tol: &Tolerance) -> bool {
        if self.check_shape(other).is_err() {
            return false;
        }
        match self.checked_sub(other) {
            Ok(diff) => tol.accepts(diff.norm(), self.norm().max(other.norm())),
            Err(_) => false,
        }
    }
}

/// Square supernumber matrix with the graded block structure `[[A, B], [C, D]]`.
#[derive(Clone, Debug)]
pub struct SuperMatrix {
    p: usize,
    q: usize,
    algebra: GrassmannAlgebra,
    // row-major, (p+q)^2 entries
    entries: Vec<Supernumber>,
}

impl SuperMatrix {
    pub fn new(p: usize, q: usize, rows: Vec<Vec<Supernumber>>) -> Result<Self> {
        let n = p + q;
        if n == 0 {
            return Err(AlgebraError::Dimension("empty supermatrix".into()));
        }
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(AlgebraError::Dimension(format!(
                "a ({p}|{q}) supermatrix needs {n}x{n} entries"
            )));
        }
        let algebra = rows[0][0].algebra();
        let entries: Vec<Supernumber> = rows.into_iter().flatten().collect();
        if entries.iter().any(|e| e.algebra() != algebra) {
            return Err(AlgebraError::Incompatible(
                "matrix entries from different algebras".into(),
            ));
        }
        Ok(SuperMatrix { p, q, algebra, entries })
    }

    pub fn from_fn(
        p: usize,
        q: usize,
        algebra: GrassmannAlgebra,
        mut f: impl FnMut(usize, usize) -> Supernumber,
    ) -> Self {
        let n = p + q;
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let e = f(i, j);
                assert_eq!(e.algebra(), algebra, "entry from a different algebra");
                entries.push(e);
            }
        }
        SuperMatrix { p, q, algebra, entries }
    }

    pub fn zeros(p: usize, q: usize, algebra: GrassmannAlgebra) -> Self {
        Self::from_fn(p, q, algebra, |_, _| algebra.zero())
    }

    pub fn identity(p: usize, q: usize, algebra: GrassmannAlgebra) -> Self {
        Self::from_fn(p, q, algebra, |i, j| {
            if i == j {
                algebra.one()
            } else {
                algebra.zero()
            }
        })
    }

    /// Elementary matrix `E_{row,col}` (0-based) with a single unit entry.
    pub fn unit(p: usize, q: usize, algebra: GrassmannAlgebra, row: usize, col: usize) -> Self {
        Self::from_fn(p, q, algebra, |i, j| {
            if i == row && j == col {
                algebra.one()
            } else {
                algebra.zero()
            }
        })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn dim(&self) -> usize {
        self.p + self.q
    }

    pub fn algebra(&self) -> GrassmannAlgebra {
        self.algebra
    }

    pub fn get(&self, i: usize, j: usize) -> &Supernumber {
        &self.entries[i * self.dim() + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: Supernumber) {
        assert_eq!(value.algebra(), self.algebra, "entry from a different algebra");
        let n = self.dim();
        self.entries[i * n + j] = value;
    }

    pub fn entries(&self) -> &[Supernumber] {
        &self.entries
    }

    pub fn rows(&self) -> Vec<Vec<Supernumber>> {
        self.entries.chunks(self.dim()).map(|r| r.to_vec()).collect()
    }

    /// Block parity of the position `(i, j)`: even on the diagonal blocks.
    pub fn block_parity(&self, i: usize, j: usize) -> Parity {
        slot_parity(self.p, i).plus(slot_parity(self.p, j))
    }

    /// `Some(Even)` iff A, D are even and B, C odd; `Some(Odd)` for the
    /// reverse; `None` for mixed matrices. The zero matrix reports `Even`.
    pub fn parity(&self) -> Option<Parity> {
        if self.has_parity(Parity::Even) {
            Some(Parity::Even)
        } else if self.has_parity(Parity::Odd) {
            Some(Parity::Odd)
        } else {
            None
        }
    }

    pub fn has_parity(&self, parity: Parity) -> bool {
        let n = self.dim();
        self.entries
            .iter()
            .enumerate()
            .all(|(k, e)| e.has_parity(self.block_parity(k / n, k % n).plus(parity)))
    }

    pub fn is_even(&self) -> bool {
        self.has_parity(Parity::Even)
    }

    /// Projection onto the even (or odd) supermatrices.
    pub fn parity_part(&self, parity: Parity) -> SuperMatrix {
        let n = self.dim();
        let entries = self
            .entries
            .iter()
            .enumerate()
            .map(|(k, e)| e.parity_project(self.block_parity(k / n, k % n).plus(parity)))
            .collect();
        SuperMatrix { p: self.p, q: self.q, algebra: self.algebra, entries }
    }

    fn check_shape(&self, other: &SuperMatrix) -> Result<()> {
        if self.p != other.p || self.q != other.q {
            return Err(AlgebraError::Dimension(format!(
                "({}|{}) vs ({}|{}) supermatrices",
                self.p, self.q, other.p, other.q
            )));
        }
        if self.algebra != other.algebra {
            return Err(AlgebraError::Incompatible(
                "supermatrices over different algebras".into(),
            ));
        }
        Ok(())
    }

    fn zip_with(&self, other: &SuperMatrix, factor: f64) -> Result<SuperMatrix> {
        self.check_shape(other)?;
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| if factor > 0.0 { a + b } else { a - b })
            .collect();
        Ok(SuperMatrix { p: self.p, q: self.q, algebra: self.algebra, entries })
    }

    pub fn checked_add(&self, other: &SuperMatrix) -> Result<SuperMatrix> {
        self.zip_with(other, 1.0)
    }

    pub fn checked_sub(&self, other: &SuperMatrix) -> Result<SuperMatrix> {
        self.zip_with(other, -1.0)
    }

    /// Row-column product with Grassmann multiplication of the entries.
    pub fn checked_mul(&self, other: &SuperMatrix) -> Result<SuperMatrix> {
        self.check_shape(other)?;
        let n = self.dim();
        let mut acc = Accumulator::new(self.algebra);
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let a = &self.entries[i * n + k];
                    let b = &other.entries[k * n + j];
                    if !a.is_zero() && !b.is_zero() {
                        acc.add_product(a, b, false);
                    }
                }
                entries.push(acc.finish());
            }
        }
        Ok(SuperMatrix { p: self.p, q: self.q, algebra: self.algebra, entries })
    }

    /// `MN - s·NM` without intermediate matrices.
    pub(crate) fn commutator_with_sign(&self, other: &SuperMatrix, sign: f64) -> Result<SuperMatrix> {
        self.check_shape(other)?;
        let n = self.dim();
        let mut acc = Accumulator::new(self.algebra);
        let mut entries = Vec::with_capacity(n * n);
        let flip = sign > 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let a = &self.entries[i * n + k];
                    let b = &other.entries[k * n + j];
                    if !a.is_zero() && !b.is_zero() {
                        acc.add_product(a, b, false);
                    }
                }
                let left = acc.finish();
                for k in 0..n {
                    let a = &other.entries[i * n + k];
                    let b = &self.entries[k * n + j];
                    if !a.is_zero() && !b.is_zero() {
                        acc.add_product(a, b, false);
                    }
                }
                let right = acc.finish();
                entries.push(if flip { &left - &right } else { &left + &right });
            }
        }
        Ok(SuperMatrix { p: self.p, q: self.q, algebra: self.algebra, entries })
    }

    pub fn scale_real(&self, factor: f64) -> SuperMatrix {
        SuperMatrix {
            p: self.p,
            q: self.q,
            algebra: self.algebra,
            entries: self.entries.iter().map(|e| e.scale_real(factor)).collect(),
        }
    }

    /// Left `Λ`-module action on `gl(p|q, Λ)`:
    /// `(α·M)_{ij} = (-1)^{ε(α) b_i} α M_{ij}` for pure `α`, with `b_i` the
    /// parity of row `i`. This is the action under which the supercommutator
    /// is left `Λ`-linear, `[αX, Y] = α[X, Y]`. Mixed `α` acts through its
    /// parity decomposition.
    pub fn left_scale(&self, alpha: &Supernumber) -> Result<SuperMatrix> {
        if alpha.algebra() != self.algebra {
            return Err(AlgebraError::Incompatible(
                "scalar from a different algebra".into(),
            ));
        }
        let even = alpha.even_part();
        let odd = alpha.odd_part();
        let n = self.dim();
        let entries = self
            .entries
            .iter()
            .enumerate()
            .map(|(k, e)| {
                let mut out = &even * e;
                if !odd.is_zero() {
                    let t = &odd * e;
                    out = if slot_parity(self.p, k / n) == Parity::Odd {
                        &out - &t
                    } else {
                        &out + &t
                    };
                }
                out
            })
            .collect();
        Ok(SuperMatrix { p: self.p, q: self.q, algebra: self.algebra, entries })
    }

    /// `‖M‖ = Σ_ij ‖M_ij‖`.
    pub fn norm(&self) -> f64 {
        self.entries.iter().map(Supernumber::norm).sum()
    }

    /// Numeric part of every entry.
    pub fn body_matrix(&self) -> DMatrix<Complex64> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |i, j| self.entries[i * n + j].body())
    }

    pub fn soul_matrix(&self) -> SuperMatrix {
        SuperMatrix {
            p: self.p,
            q: self.q,
            algebra: self.algebra,
            entries: self.entries.iter().map(Supernumber::soul).collect(),
        }
    }

    /// Lifts a numeric matrix to soul-free supernumber entries.
    pub fn from_body(p: usize, q: usize, algebra: GrassmannAlgebra, body: &DMatrix<Complex64>) -> Self {
        Self::from_fn(p, q, algebra, |i, j| algebra.scalar(body[(i, j)]))
    }

    /// Inverse from the body inverse and the terminating series
    /// `Σ_k (−B⁻¹S)^k B⁻¹`, where `S` is the soul part.
    pub fn inverse(&self) -> Result<SuperMatrix> {
        let body = self.body_matrix();
        let svd = body.clone().svd(false, false);
        let smin = svd.singular_values.iter().cloned().fold(f64::INFINITY, f64::min);
        let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
        if !(smin > 1e-13 * smax.max(1.0)) {
            return Err(AlgebraError::NotInvertible { body: smin });
        }
        let inv = body
            .try_inverse()
            .ok_or(AlgebraError::NotInvertible { body: smin })?;
        let inv = if self.algebra.field() == crate::grassmann::Field::Real {
            inv.map(|z| Complex64::new(z.re, 0.0))
        } else {
            inv
        };
        let inv_body = SuperMatrix::from_body(self.p, self.q, self.algebra, &inv);
        let step = -&(&inv_body * &self.soul_matrix());
        let mut term = inv_body.clone();
        let mut sum = inv_body;
        for _ in 0..self.algebra.budget() {
            term = &step * &term;
            if term.is_zero() {
                break;
            }
            sum = &sum + &term;
        }
        Ok(sum)
    }

    /// Matrix acting on a column of supernumbers (entry on the left).
    pub fn apply(&self, column: &[Supernumber]) -> Result<Vec<Supernumber>> {
        let n = self.dim();
        if column.len() != n {
            return Err(AlgebraError::Dimension(format!(
                "column of length {} for a {n}x{n} matrix",
                column.len()
            )));
        }
        let mut acc = Accumulator::new(self.algebra);
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            for (k, c) in column.iter().enumerate() {
                if c.algebra() != self.algebra {
                    return Err(AlgebraError::Incompatible("column from a different algebra".into()));
                }
                let a = &self.entries[i * n + k];
                if !a.is_zero() && !c.is_zero() {
                    acc.add_product(a, c, false);
                }
            }
            out.push(acc.finish());
        }
        Ok(out)
    }

    /// Action on `K^{p|q}`; the result is validated as an element of `K^{p|q}`.
    pub fn apply_vector(&self, v: &SuperVector) -> Result<SuperVector> {
        if v.p() != self.p || v.q() != self.q {
            return Err(AlgebraError::Dimension("vector and matrix gradings differ".into()));
        }
        SuperVector::new(self.p, self.q, self.apply(v.entries())?)
    }

    pub fn max_label(&self) -> u32 {
        self.entries.iter().map(Supernumber::max_label).max().unwrap_or(0)
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(Supernumber::is_finite)
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(Supernumber::is_zero)
    }

    pub fn approx_eq(&self, other: &SuperMatrix, tol: &Tolerance) -> bool {
        match self.checked_sub(other) {
            Ok(diff) => tol.accepts(diff.norm(), self.norm().max(other.norm())),
            Err(_) => false,
        }
    }

    /// `‖self − other‖`, infinite on a shape mismatch.
    pub fn distance(&self, other: &SuperMatrix) -> f64 {
        self.checked_sub(other).map(|d| d.norm()).unwrap_or(f64::INFINITY)
    }

    pub fn identical(&self, other: &SuperMatrix) -> bool {
        self.p == other.p
            && self.q == other.q
            && self.entries.iter().zip(&other.entries).all(|(a, b)| a.identical(b))
    }

    pub fn map_entries(&self, f: impl Fn(&Supernumber) -> Supernumber) -> SuperMatrix {
        SuperMatrix {
            p: self.p,
            q: self.q,
            algebra: self.algebra,
            entries: self.entries.iter().map(f).collect(),
        }
    }
}

macro_rules! matrix_binop {
    ($trait:ident, $method:ident, $checked:ident) => {
        impl $trait<&SuperMatrix> for &SuperMatrix {
            type Output = SuperMatrix;
            fn $method(self, rhs: &SuperMatrix) -> SuperMatrix {
                self.$checked(rhs).expect("supermatrices of the same shape and algebra")
            }
        }
        impl $trait<SuperMatrix> for SuperMatrix {
            type Output = SuperMatrix;
            fn $method(self, rhs: SuperMatrix) -> SuperMatrix {
                (&self).$method(&rhs)
            }
        }
    };
}

matrix_binop!(Add, add, checked_add);
matrix_binop!(Sub, sub, checked_sub);
matrix_binop!(Mul, mul, checked_mul);

impl Neg for &SuperMatrix {
    type Output = SuperMatrix;
    fn neg(self) -> SuperMatrix {
        self.scale_real(-1.0)
    }
}

/// JSON wire form `{"p":_, "q":_, "entries":[[supernumber,...],...]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SuperMatrixJson {
    pub p: usize,
    pub q: usize,
    pub entries: Vec<Vec<Supernumber>>,
}

impl Serialize for SuperMatrix {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        SuperMatrixJson { p: self.p, q: self.q, entries: self.rows() }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SuperMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let wire = SuperMatrixJson::deserialize(deserializer)?;
        SuperMatrix::new(wire.p, wire.q, wire.entries).map_err(serde::de::Error::custom)
    }
}

/// A graded left `Λ`-module with a pure decomposition.
pub trait GradedModule: Clone {
    fn parity_part(&self, parity: Parity) -> Self;
    /// Left action `α·v`.
    fn left_mul(&self, alpha: &Supernumber) -> Result<Self>;
    fn module_add(&self, other: &Self) -> Result<Self>;
    fn module_neg(&self) -> Self;
}

/// Induced right action `v·α = (-1)^{ε(v)ε(α)} α·v`, extended bilinearly
/// through the parity decompositions of `v` and `α`.
pub fn right_action<V: GradedModule>(v: &V, alpha: &Supernumber) -> Result<V> {
    let v0 = v.parity_part(Parity::Even);
    let v1 = v.parity_part(Parity::Odd);
    let a0 = alpha.even_part();
    let a1 = alpha.odd_part();
    let mut out = v0.left_mul(&a0)?;
    out = out.module_add(&v0.left_mul(&a1)?)?;
    out = out.module_add(&v1.left_mul(&a0)?)?;
    out.module_add(&v1.left_mul(&a1)?.module_neg())
}

impl GradedModule for Supernumber {
    fn parity_part(&self, parity: Parity) -> Self {
        self.parity_project(parity)
    }

    fn left_mul(&self, alpha: &Supernumber) -> Result<Self> {
        alpha.checked_mul(self)
    }

    fn module_add(&self, other: &Self) -> Result<Self> {
        self.checked_add(other)
    }

    fn module_neg(&self) -> Self {
        -self
    }
}

impl GradedModule for SuperMatrix {
    fn parity_part(&self, parity: Parity) -> Self {
        SuperMatrix::parity_part(self, parity)
    }

    fn left_mul(&self, alpha: &Supernumber) -> Result<Self> {
        self.left_scale(alpha)
    }

    fn module_add(&self, other: &Self) -> Result<Self> {
        self.checked_add(other)
    }

    fn module_neg(&self) -> Self {
        -self
    }
}

impl Mul<&SuperVector> for &SuperMatrix {
    type Output = SuperVector;
    fn mul(self, rhs: &SuperVector) -> SuperVector {
        self.apply_vector(rhs).expect("even supermatrix acting on K^{p|q}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn alg() -> GrassmannAlgebra {
        GrassmannAlgebra::real(8)
    }

    fn sn(text: &str) -> Supernumber {
        Supernumber::parse(text, alg()).unwrap()
    }

    fn m11(rows: [[&str; 2]; 2]) -> SuperMatrix {
        SuperMatrix::new(
            1,
            1,
            rows.iter().map(|r| r.iter().map(|t| sn(t)).collect()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn vector_norm_examples() {
        let v = SuperVector::new(1, 1, vec![sn("1 + z[1,2]"), sn("z[1]")]).unwrap();
        assert_eq!(v.norm(), 3.0);
        assert_eq!(SuperVector::zeros(2, 3, alg()).norm(), 0.0);
        let w = SuperVector::new(1, 1, vec![sn("2"), sn("z[1] + z[2]")]).unwrap();
        assert_eq!(w.norm(), 4.0);
    }

    #[test]
    fn vector_membership_rejects_wrong_parity() {
        assert!(SuperVector::new(1, 1, vec![sn("z[1]"), sn("z[2]")]).is_err());
        assert!(SuperVector::new(1, 1, vec![sn("1"), sn("1 + z[2]")]).is_err());
        let v = SuperVector::new(1, 1, vec![sn("1"), sn("z[2]")]).unwrap();
        assert!(v.scale_even(&sn("z[3]")).is_err());
        assert!(v.scale_even(&sn("2 + z[3,4]")).is_ok());
    }

    #[test]
    fn elementary_products() {
        let e12 = SuperMatrix::unit(1, 1, alg(), 0, 1);
        let e21 = SuperMatrix::unit(1, 1, alg(), 1, 0);
        let e11 = SuperMatrix::unit(1, 1, alg(), 0, 0);
        assert!((&e12 * &e21).identical(&e11));
        let m = m11([["1", "z[1]"], ["z[2]", "1"]]);
        let id = SuperMatrix::identity(1, 1, alg());
        assert!((&id * &m).identical(&m));
        assert!((&m * &SuperMatrix::zeros(1, 1, alg())).is_zero());
    }

    #[test]
    fn matrix_norm_examples() {
        assert_eq!(SuperMatrix::identity(1, 1, alg()).norm(), 2.0);
        assert_eq!(m11([["1", "z[1]"], ["z[2]", "1"]]).norm(), 4.0);
        assert_eq!(SuperMatrix::zeros(1, 1, alg()).norm(), 0.0);
    }

    #[test]
    fn parity_classification() {
        assert_eq!(m11([["1", "z[1]"], ["z[2]", "1"]]).parity(), Some(Parity::Even));
        assert_eq!(m11([["z[3]", "1"], ["z[1,2]", "z[4]"]]).parity(), Some(Parity::Odd));
        assert_eq!(m11([["1", "1"], ["0", "0"]]).parity(), None);
        let mixed = m11([["1 + z[1]", "z[2] + 1"], ["0", "z[3]"]]);
        let even = mixed.parity_part(Parity::Even);
        let odd = mixed.parity_part(Parity::Odd);
        assert!(even.is_even());
        assert_eq!(odd.parity(), Some(Parity::Odd));
        assert!((&even + &odd).identical(&mixed));
    }

    #[test]
    fn even_matrix_preserves_superspace() {
        let m = m11([["2 + z[1,2]", "z[3]"], ["z[4]", "1"]]);
        let v = SuperVector::new(1, 1, vec![sn("1 + z[5,6]"), sn("z[7]")]).unwrap();
        let w = &m * &v;
        assert_eq!(w.entries().len(), 2);
        let odd = m11([["z[3]", "1"], ["1", "z[4]"]]);
        assert!(odd.apply_vector(&v).is_err());
    }

    #[test]
    fn right_action_examples() {
        let even_v = m11([["1", "0"], ["0", "z[1,2]"]]);
        let odd_v = m11([["z[3]", "1"], ["z[4,5]", "0"]]);
        assert_eq!(odd_v.parity(), Some(Parity::Odd));
        let z1 = sn("z[1]");
        let r = right_action(&even_v, &z1).unwrap();
        assert!(r.identical(&even_v.left_scale(&z1).unwrap()));
        let r = right_action(&odd_v, &z1).unwrap();
        assert!(r.identical(&-&odd_v.left_scale(&z1).unwrap()));
        let z12 = sn("z[1,2]");
        let r = right_action(&odd_v, &z12).unwrap();
        assert!(r.identical(&odd_v.left_scale(&z12).unwrap()));
    }

    #[test]
    fn right_action_on_lambda_is_right_multiplication() {
        let v = sn("1 + z[1] + z[2,3] + z[4,5,6]");
        let a = sn("2 - z[7] + z[1,8]");
        let r = right_action(&v, &a).unwrap();
        assert!(r.approx_eq(&(&v * &a), &Tolerance::default()));
    }

    #[test]
    fn left_scale_uses_row_parity() {
        let e21 = SuperMatrix::unit(1, 1, alg(), 1, 0);
        let s = e21.left_scale(&sn("z[2]")).unwrap();
        assert!(s.get(1, 0).identical(&sn("-1*z[2]")));
        let e12 = SuperMatrix::unit(1, 1, alg(), 0, 1);
        let s = e12.left_scale(&sn("z[1]")).unwrap();
        assert!(s.get(0, 1).identical(&sn("z[1]")));
    }

    #[test]
    fn inverse_with_soul() {
        let m = m11([["2 + z[1,2]", "z[3]"], ["z[4]", "1 - z[5,6]"]]);
        let inv = m.inverse().unwrap();
        let id = SuperMatrix::identity(1, 1, alg());
        assert!((&m * &inv).approx_eq(&id, &Tolerance::default()));
        assert!((&inv * &m).approx_eq(&id, &Tolerance::default()));
        let singular = m11([["z[1,2]", "z[3]"], ["z[4]", "1"]]);
        assert!(matches!(singular.inverse(), Err(AlgebraError::NotInvertible { .. })));
    }

    #[test]
    fn json_round_trip() {
        let m = m11([["2 + z[1,2]", "z[3]"], ["z[4]", "1"]]);
        let text = serde_json::to_string(&m).unwrap();
        let back: SuperMatrix = serde_json::from_str(&text).unwrap();
        assert!(back.identical(&m));
        let bad = r#"{"p":1,"q":1,"entries":[[{"field":"R","budget":8,"terms":[]}]]}"#;
        assert!(serde_json::from_str::<SuperMatrix>(bad).is_err());
    }
}
