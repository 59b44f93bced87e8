//! Supernumbers over a finite set of Grassmann generators.
//!
//! A supernumber is a finite sum `z = Σ z_I ζ^I` over multi-indices
//! `I = (i_1 < i_2 < ... < i_p)` of generator labels in `1..=N`, where `N` is
//! the generator budget of the algebra `Λ_N`. `Λ_N` sits inside the
//! infinitely generated algebra as an exact subalgebra: products never leave
//! it, so every algebraic identity is exact up to floating-point rounding.
//!
//! Multi-indices are stored as bit masks (bit `j - 1` set iff `ζ^j` occurs),
//! which caps the budget at 64 generators.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{AlgebraError, Result};

/// Largest supported generator budget.
pub const MAX_BUDGET: u8 = 64;

/// Default generator budget.
pub const DEFAULT_BUDGET: u8 = 8;

/// Budgets up to this size multiply through a dense scratch buffer.
const DENSE_LIMIT: u8 = 12;

/// Coefficient field of the algebra.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Field {
    #[serde(rename = "R")]
    Real,
    #[serde(rename = "C")]
    Complex,
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Field::Real => f.write_str("R"),
            Field::Complex => f.write_str("C"),
        }
    }
}

/// Z2 grading of a pure element.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn from_bit(bit: u8) -> Self {
        if bit % 2 == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    /// `ε` as 0 or 1.
    pub fn bit(self) -> u8 {
        match self {
            Parity::Even => 0,
            Parity::Odd => 1,
        }
    }

    /// Parity of a product: `ε(ab) = ε(a) + ε(b) mod 2`.
    pub fn plus(self, other: Parity) -> Parity {
        Parity::from_bit(self.bit() + other.bit())
    }

    /// `(-1)^{ε(a) ε(b)}`.
    pub fn sign_with(self, other: Parity) -> f64 {
        if self == Parity::Odd && other == Parity::Odd {
            -1.0
        } else {
            1.0
        }
    }
}

/// Ordered set of distinct generator labels, stored as a bit mask.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(u64);

impl MultiIndex {
    /// The empty index (scalar term).
    pub const EMPTY: MultiIndex = MultiIndex(0);

    /// Builds an index from strictly increasing labels in `1..=budget`.
    pub fn new(labels: &[u32], budget: u8) -> Result<Self> {
        let mut bits = 0u64;
        let mut prev = 0u32;
        for &label in labels {
            if label == 0 || label > budget as u32 {
                return Err(AlgebraError::InvalidIndex(format!(
                    "generator label {label} outside 1..={budget}"
                )));
            }
            if label <= prev {
                return Err(AlgebraError::InvalidIndex(format!(
                    "labels must be strictly increasing, got {labels:?}"
                )));
            }
            prev = label;
            bits |= 1u64 << (label - 1);
        }
        Ok(MultiIndex(bits))
    }

    /// Index of a single generator `ζ^label`.
    pub fn generator(label: u32) -> Self {
        debug_assert!((1..=64).contains(&label));
        MultiIndex(1u64 << (label - 1))
    }

    pub fn from_bits(bits: u64) -> Self {
        MultiIndex(bits)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// Number of generators, i.e. the degree of `ζ^I`.
    pub fn degree(self) -> u32 {
        self.0.count_ones()
    }

    pub fn parity(self) -> Parity {
        Parity::from_bit((self.degree() % 2) as u8)
    }

    /// Largest label present (0 for the empty index).
    pub fn max_label(self) -> u32 {
        64 - self.0.leading_zeros()
    }

    pub fn contains(self, other: MultiIndex) -> bool {
        self.0 & other.0 == other.0
    }

    pub fn labels(self) -> impl Iterator<Item = u32> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let tz = bits.trailing_zeros();
                bits &= bits - 1;
                Some(tz + 1)
            }
        })
    }

    /// Sign of `ζ^I ζ^J` relative to `ζ^{I∪J}`, or `None` when a generator repeats.
    ///
    /// The sign is `(-1)^k` with `k` the number of pairs `(i, j)`, `i ∈ I`,
    /// `j ∈ J`, with `i > j`: the transpositions needed to merge the two
    /// sorted sequences.
    pub fn product_sign(self, other: MultiIndex) -> Option<bool> {
        if self.0 & other.0 != 0 {
            return None;
        }
        Some(merge_inversions_odd(self.0, other.0))
    }
}

/// Bit `i` set when an odd number of labels of `mask` lie strictly below `i`.
#[inline]
fn parity_below(mask: u64) -> u64 {
    let mut below = mask << 1;
    below ^= below << 1;
    below ^= below << 2;
    below ^= below << 4;
    below ^= below << 8;
    below ^= below << 16;
    below ^= below << 32;
    below
}

#[inline]
fn merge_inversions_odd(left: u64, right: u64) -> bool {
    (left & parity_below(right)).count_ones() % 2 == 1
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (k, label) in self.labels().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{label}")?;
        }
        f.write_str("]")
    }
}

/// Absolute and relative tolerance used by approximate comparisons.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerance {
    pub abs_eps: f64,
    pub rel_eps: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            abs_eps: 1e-12,
            rel_eps: 1e-9,
        }
    }
}

impl Tolerance {
    pub fn new(abs_eps: f64, rel_eps: f64) -> Result<Self> {
        if !(abs_eps.is_finite() && abs_eps >= 0.0 && rel_eps.is_finite() && rel_eps >= 0.0) {
            return Err(AlgebraError::InvalidInput(format!(
                "tolerances must be finite and non-negative, got abs={abs_eps}, rel={rel_eps}"
            )));
        }
        Ok(Tolerance { abs_eps, rel_eps })
    }

    /// Combined test `diff ≤ abs + rel · scale`.
    pub fn accepts(&self, diff: f64, scale: f64) -> bool {
        diff <= self.abs_eps + self.rel_eps * scale
    }
}

/// The algebra `Λ_N` over `R` or `C`: a field tag together with a generator budget.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct GrassmannAlgebra {
    field: Field,
    budget: u8,
}

impl GrassmannAlgebra {
    pub fn new(field: Field, budget: u8) -> Result<Self> {
        if budget == 0 || budget > MAX_BUDGET {
            return Err(AlgebraError::InvalidInput(format!(
                "generator budget must lie in 1..={MAX_BUDGET}, got {budget}"
            )));
        }
        Ok(GrassmannAlgebra { field, budget })
    }

    /// Real algebra; panics on an invalid budget.
    pub fn real(budget: u8) -> Self {
        Self::new(Field::Real, budget).expect("valid generator budget")
    }

    /// Complex algebra; panics on an invalid budget.
    pub fn complex(budget: u8) -> Self {
        Self::new(Field::Complex, budget).expect("valid generator budget")
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn budget(&self) -> u8 {
        self.budget
    }

    pub fn zero(&self) -> Supernumber {
        Supernumber {
            algebra: *self,
            terms: Vec::new(),
        }
    }

    pub fn one(&self) -> Supernumber {
        self.real_scalar(1.0)
    }

    pub fn real_scalar(&self, value: f64) -> Supernumber {
        self.scalar(Complex64::new(value, 0.0))
    }

    /// Soul-free supernumber. Panics if a real algebra receives an imaginary part.
    pub fn scalar(&self, value: Complex64) -> Supernumber {
        self.term(MultiIndex::EMPTY, value)
    }

    /// The generator `ζ^label`. Panics if the label exceeds the budget.
    pub fn generator(&self, label: u32) -> Supernumber {
        assert!(
            label >= 1 && label <= self.budget as u32,
            "generator label {label} outside 1..={}",
            self.budget
        );
        self.term(MultiIndex::generator(label), Complex64::new(1.0, 0.0))
    }

    /// `coeff · ζ^{labels}` with validated labels.
    pub fn monomial(&self, labels: &[u32], coeff: f64) -> Result<Supernumber> {
        let index = MultiIndex::new(labels, self.budget)?;
        Ok(self.term(index, Complex64::new(coeff, 0.0)))
    }

    fn term(&self, index: MultiIndex, value: Complex64) -> Supernumber {
        assert!(
            self.field == Field::Complex || value.im == 0.0,
            "imaginary coefficient in a real algebra"
        );
        let terms = if value == Complex64::new(0.0, 0.0) {
            Vec::new()
        } else {
            vec![(index, value)]
        };
        Supernumber {
            algebra: *self,
            terms,
        }
    }

    /// Builds a supernumber from arbitrary terms, summing duplicates and dropping zeros.
    pub fn from_terms<I>(&self, terms: I) -> Result<Supernumber>
    where
        I: IntoIterator<Item = (MultiIndex, Complex64)>,
    {
        let mut raw: Vec<(MultiIndex, Complex64)> = Vec::new();
        for (index, value) in terms {
            if index.max_label() > self.budget as u32 {
                return Err(AlgebraError::InvalidIndex(format!(
                    "index {index} exceeds budget {}",
                    self.budget
                )));
            }
            if self.field == Field::Real && value.im != 0.0 {
                return Err(AlgebraError::InvalidInput(format!(
                    "imaginary coefficient {value} in a real algebra"
                )));
            }
            if !(value.re.is_finite() && value.im.is_finite()) {
                return Err(AlgebraError::InvalidInput(format!(
                    "non-finite coefficient {value}"
                )));
            }
            raw.push((index, value));
        }
        raw.sort_by_key(|(index, _)| *index);
        let mut terms: Vec<(MultiIndex, Complex64)> = Vec::with_capacity(raw.len());
        for (index, value) in raw {
            match terms.last_mut() {
                Some((last, acc)) if *last == index => *acc += value,
                _ => terms.push((index, value)),
            }
        }
        terms.retain(|(_, v)| !is_zero(*v));
        Ok(Supernumber {
            algebra: *self,
            terms,
        })
    }
}

#[inline]
fn is_zero(v: Complex64) -> bool {
    v.re == 0.0 && v.im == 0.0
}

/// Element of `Λ_N`: canonical sparse map from multi-indices to nonzero coefficients.
#[derive(Clone, Debug)]
pub struct Supernumber {
    algebra: GrassmannAlgebra,
    // sorted by index bits, no zero coefficients
    terms: Vec<(MultiIndex, Complex64)>,
}

impl Supernumber {
    pub fn algebra(&self) -> GrassmannAlgebra {
        self.algebra
    }

    pub fn field(&self) -> Field {
        self.algebra.field
    }

    pub fn budget(&self) -> u8 {
        self.algebra.budget
    }

    pub fn terms(&self) -> impl Iterator<Item = (MultiIndex, Complex64)> + '_ {
        self.terms.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, index: MultiIndex) -> Complex64 {
        match self.terms.binary_search_by_key(&index, |(i, _)| *i) {
            Ok(pos) => self.terms[pos].1,
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    /// `‖z‖ = Σ_I |z_I|`.
    pub fn norm(&self) -> f64 {
        self.terms
            .iter()
            .map(|(_, v)| if v.im == 0.0 { v.re.abs() } else { v.norm() })
            .sum()
    }

    pub fn body(&self) -> Complex64 {
        self.coeff(MultiIndex::EMPTY)
    }

    pub fn soul(&self) -> Supernumber {
        self.filter(|index| !index.is_empty())
    }

    /// `(z_B, z_S)` with `z = z_B + z_S`.
    pub fn body_soul(&self) -> (Complex64, Supernumber) {
        (self.body(), self.soul())
    }

    pub fn even_part(&self) -> Supernumber {
        self.filter(|index| index.parity() == Parity::Even)
    }

    pub fn odd_part(&self) -> Supernumber {
        self.filter(|index| index.parity() == Parity::Odd)
    }

    /// Projection onto `⁰Λ` or `¹Λ`.
    pub fn parity_project(&self, target: Parity) -> Supernumber {
        match target {
            Parity::Even => self.even_part(),
            Parity::Odd => self.odd_part(),
        }
    }

    /// `Some(ε)` for pure elements, `None` for mixed ones. Zero reports `Even`.
    pub fn parity(&self) -> Option<Parity> {
        let mut seen_even = false;
        let mut seen_odd = false;
        for (index, _) in &self.terms {
            match index.parity() {
                Parity::Even => seen_even = true,
                Parity::Odd => seen_odd = true,
            }
        }
        match (seen_even, seen_odd) {
            (_, false) => Some(Parity::Even),
            (false, true) => Some(Parity::Odd),
            (true, true) => None,
        }
    }

    /// True when every stored term has the given parity (always true for zero).
    pub fn has_parity(&self, parity: Parity) -> bool {
        self.terms.iter().all(|(index, _)| index.parity() == parity)
    }

    pub fn is_even(&self) -> bool {
        self.has_parity(Parity::Even)
    }

    pub fn is_odd(&self) -> bool {
        self.has_parity(Parity::Odd)
    }

    /// Largest generator label occurring in any term (0 for soul-free values).
    pub fn max_label(&self) -> u32 {
        self.terms
            .iter()
            .map(|(index, _)| index.max_label())
            .max()
            .unwrap_or(0)
    }

    /// Union of all generators occurring in any term.
    pub fn support(&self) -> MultiIndex {
        MultiIndex(self.terms.iter().fold(0u64, |acc, (i, _)| acc | i.0))
    }

    fn filter(&self, keep: impl Fn(MultiIndex) -> bool) -> Supernumber {
        Supernumber {
            algebra: self.algebra,
            terms: self
                .terms
                .iter()
                .copied()
                .filter(|(index, _)| keep(*index))
                .collect(),
        }
    }

    fn check_compatible(&self, other: &Supernumber) -> Result<()> {
        if self.algebra != other.algebra {
            return Err(AlgebraError::Incompatible(format!(
                "Λ_{} over {} vs Λ_{} over {}",
                self.algebra.budget, self.algebra.field, other.algebra.budget, other.algebra.field
            )));
        }
        Ok(())
    }

    fn merge(&self, other: &Supernumber, other_sign: f64) -> Supernumber {
        let mut out = Vec::with_capacity(self.terms.len() + other.terms.len());
        let (mut i, mut j) = (0, 0);
        let (a, b) = (&self.terms, &other.terms);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                Ordering::Greater => {
                    out.push((b[j].0, b[j].1 * other_sign));
                    j += 1;
                }
                Ordering::Equal => {
                    let v = a[i].1 + b[j].1 * other_sign;
                    if !is_zero(v) {
                        out.push((a[i].0, v));
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend(b[j..].iter().map(|&(k, v)| (k, v * other_sign)));
        Supernumber {
            algebra: self.algebra,
            terms: out,
        }
    }

    pub fn checked_add(&self, other: &Supernumber) -> Result<Supernumber> {
        self.check_compatible(other)?;
        Ok(self.merge(other, 1.0))
    }

    pub fn checked_sub(&self, other: &Supernumber) -> Result<Supernumber> {
        self.check_compatible(other)?;
        Ok(self.merge(other, -1.0))
    }

    /// Grassmann product. Fails on a budget or field mismatch.
    pub fn checked_mul(&self, other: &Supernumber) -> Result<Supernumber> {
        self.check_compatible(other)?;
        let mut acc = Accumulator::new(self.algebra);
        acc.add_product(self, other, false);
        Ok(acc.finish())
    }

    pub fn scale_real(&self, factor: f64) -> Supernumber {
        if factor == 0.0 {
            return self.algebra.zero();
        }
        Supernumber {
            algebra: self.algebra,
            terms: self.terms.iter().map(|&(i, v)| (i, v * factor)).collect(),
        }
    }

    /// Multiplication by a field element. Fails if a real algebra receives an imaginary factor.
    pub fn scale(&self, factor: Complex64) -> Result<Supernumber> {
        if self.algebra.field == Field::Real && factor.im != 0.0 {
            return Err(AlgebraError::Incompatible(
                "imaginary factor applied to a real supernumber".into(),
            ));
        }
        let mut terms: Vec<_> = self.terms.iter().map(|&(i, v)| (i, v * factor)).collect();
        terms.retain(|(_, v)| !is_zero(*v));
        Ok(Supernumber {
            algebra: self.algebra,
            terms,
        })
    }

    /// `z^k`, with `z^0 = 1`.
    pub fn pow(&self, k: u32) -> Supernumber {
        let mut out = self.algebra.one();
        for _ in 0..k {
            out = &out * self;
        }
        out
    }

    /// Inverse `(1/z_B) Σ_k (-z_S/z_B)^k`; the sum terminates because the soul is nilpotent.
    pub fn invert(&self, tol: &Tolerance) -> Result<Supernumber> {
        let (body, soul) = self.body_soul();
        if body.norm() <= tol.abs_eps {
            return Err(AlgebraError::NotInvertible { body: body.norm() });
        }
        let inv_body = Complex64::new(1.0, 0.0) / body;
        let ratio = soul.scale(-inv_body)?;
        let mut power = self.algebra.one();
        let mut sum = self.algebra.one();
        for _ in 0..self.algebra.budget {
            power = &power * &ratio;
            if power.is_zero() {
                break;
            }
            sum = &sum + &power;
        }
        sum.scale(inv_body)
    }

    /// Left division by a monomial: returns `(q, r)` with `self = ζ^m q + r`,
    /// where `q` and `r` contain no generator of `m` and `r` collects the terms
    /// that do not contain all of `m`.
    pub fn left_divide(&self, m: MultiIndex) -> (Supernumber, Supernumber) {
        let mut quotient = Vec::new();
        let mut remainder = Vec::new();
        for &(index, value) in &self.terms {
            if index.contains(m) {
                let rest = MultiIndex(index.0 & !m.0);
                let odd = merge_inversions_odd(m.0, rest.0);
                quotient.push((rest, if odd { -value } else { value }));
            } else {
                remainder.push((index, value));
            }
        }
        quotient.sort_by_key(|(i, _)| *i);
        (
            Supernumber {
                algebra: self.algebra,
                terms: quotient,
            },
            Supernumber {
                algebra: self.algebra,
                terms: remainder,
            },
        )
    }

    /// Same value in a larger (or equal) budget.
    pub fn promote(&self, budget: u8) -> Result<Supernumber> {
        let target = GrassmannAlgebra::new(self.algebra.field, budget)?;
        if self.max_label() > budget as u32 {
            return Err(AlgebraError::InvalidInput(format!(
                "cannot move a supernumber using ζ^{} into budget {budget}",
                self.max_label()
            )));
        }
        Ok(Supernumber {
            algebra: target,
            terms: self.terms.clone(),
        })
    }

    /// Reinterprets a real value over the complex field.
    pub fn complexify(&self) -> Supernumber {
        Supernumber {
            algebra: GrassmannAlgebra {
                field: Field::Complex,
                budget: self.algebra.budget,
            },
            terms: self.terms.clone(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.terms
            .iter()
            .all(|(_, v)| v.re.is_finite() && v.im.is_finite())
    }

    /// `‖a − b‖ ≤ abs + rel · max(‖a‖, ‖b‖)`.
    pub fn approx_eq(&self, other: &Supernumber, tol: &Tolerance) -> bool {
        if self.algebra != other.algebra {
            return false;
        }
        let diff = self.merge(other, -1.0).norm();
        tol.accepts(diff, self.norm().max(other.norm()))
    }

    /// Bitwise identity of the canonical representation.
    pub fn identical(&self, other: &Supernumber) -> bool {
        self.algebra == other.algebra && self.terms == other.terms
    }

    /// Terms in display order: by degree, then lexicographically by labels.
    pub fn display_terms(&self) -> Vec<(MultiIndex, Complex64)> {
        let mut terms = self.terms.clone();
        terms.sort_by(|a, b| {
            a.0.degree()
                .cmp(&b.0.degree())
                .then_with(|| a.0.labels().cmp(b.0.labels()))
        });
        terms
    }

    /// Canonical ordering used to make accumulation order independent of operand order.
    fn canonical_cmp(&self, other: &Supernumber) -> Ordering {
        self.terms.len().cmp(&other.terms.len()).then_with(|| {
            for (a, b) in self.terms.iter().zip(&other.terms) {
                let ord = a.0.cmp(&b.0).then_with(|| {
                    (a.1.re.to_bits(), a.1.im.to_bits()).cmp(&(b.1.re.to_bits(), b.1.im.to_bits()))
                });
                if ord != Ordering::Equal {
                    return ord;
                }
            }
            Ordering::Equal
        })
    }
}

/// Sums of Grassmann products without intermediate allocations.
///
/// For small budgets the accumulator is a dense array indexed by mask;
/// otherwise products are collected and merged after a stable sort. In both
/// cases the summation order for a given output term is deterministic and
/// does not depend on which operand is on the left.
pub(crate) struct Accumulator {
    algebra: GrassmannAlgebra,
    dense: Vec<Complex64>,
    // inner operand scattered by mask, zero between products
    scratch: Vec<Complex64>,
    touched: Vec<u64>,
    sparse: Vec<(MultiIndex, Complex64)>,
}

impl Accumulator {
    pub(crate) fn new(algebra: GrassmannAlgebra) -> Self {
        let dense = if algebra.budget <= DENSE_LIMIT {
            vec![Complex64::new(0.0, 0.0); 1usize << algebra.budget]
        } else {
            Vec::new()
        };
        Accumulator {
            algebra,
            scratch: dense.clone(),
            dense,
            touched: Vec::new(),
            sparse: Vec::new(),
        }
    }

    #[inline]
    fn push(&mut self, bits: u64, value: Complex64) {
        if self.dense.is_empty() {
            self.sparse.push((MultiIndex(bits), value));
        } else {
            let slot = &mut self.dense[bits as usize];
            if is_zero(*slot) {
                self.touched.push(bits);
            }
            *slot += value;
        }
    }

    /// Adds `± a·b`.
    pub(crate) fn add_product(&mut self, a: &Supernumber, b: &Supernumber, negate: bool) {
        debug_assert_eq!(a.algebra, self.algebra);
        debug_assert_eq!(b.algebra, self.algebra);
        let a_outer = a.canonical_cmp(b) != Ordering::Greater;
        let real = self.algebra.field == Field::Real;
        let (outer, inner) = if a_outer { (a, b) } else { (b, a) };
        let term = |oi: u64, ov: Complex64, ii: u64, iv: Complex64| {
            let (li, ri) = if a_outer { (oi, ii) } else { (ii, oi) };
            let v = if real { Complex64::new(ov.re * iv.re, 0.0) } else { ov * iv };
            if merge_inversions_odd(li, ri) ^ negate {
                -v
            } else {
                v
            }
        };
        if !self.dense.is_empty() {
            // walk subsets of each complement when that beats the pair loop;
            // each output mask still sums its terms by ascending outer index
            let budget = self.algebra.budget as u32;
            let full = (1u64 << budget) - 1;
            let walk: usize = outer.terms.iter().map(|(o, _)| 1usize << (budget - o.0.count_ones())).sum();
            if walk + inner.terms.len() < outer.terms.len() * inner.terms.len() / 2 {
                let mut parities = 0u8;
                for &(ii, iv) in &inner.terms {
                    self.scratch[ii.0 as usize] = iv;
                    parities |= 1 << (ii.0.count_ones() % 2);
                }
                // pure inner: pair each subset S of comp minus its lowest label l
                // with S or S ∪ {l}, whichever has the inner parity
                let pure = parities != 3;
                let want = u32::from(parities == 2);
                for &(oi, ov) in &outer.terms {
                    let comp = full & !oi.0;
                    let below = parity_below(oi.0);
                    // ordering sign flips with |o||sub| when the outer operand is on the left
                    let odd_outer = a_outer && oi.0.count_ones() % 2 == 1;
                    let lowest = if pure { comp & comp.wrapping_neg() } else { 0 };
                    let rest = comp & !lowest;
                    let mut s = rest;
                    loop {
                        let sub = if lowest != 0 && s.count_ones() % 2 != want { s | lowest } else { s };
                        let iv = self.scratch[sub as usize];
                        if !is_zero(iv) {
                            let flip = ((sub & below).count_ones() % 2 == 1)
                                ^ (odd_outer && sub.count_ones() % 2 == 1)
                                ^ negate;
                            let v = if real { Complex64::new(ov.re * iv.re, 0.0) } else { ov * iv };
                            self.push(oi.0 | sub, if flip { -v } else { v });
                        }
                        if s == 0 {
                            break;
                        }
                        s = (s - 1) & rest;
                    }
                }
                for &(ii, _) in &inner.terms {
                    self.scratch[ii.0 as usize] = Complex64::new(0.0, 0.0);
                }
                return;
            }
        }
        for &(oi, ov) in &outer.terms {
            for &(ii, iv) in &inner.terms {
                if oi.0 & ii.0 != 0 {
                    continue;
                }
                let v = term(oi.0, ov, ii.0, iv);
                self.push(oi.0 | ii.0, v);
            }
        }
    }

    /// Adds `factor · a`.
    pub(crate) fn add_scaled(&mut self, a: &Supernumber, factor: f64) {
        debug_assert_eq!(a.algebra, self.algebra);
        for &(i, v) in &a.terms {
            self.push(i.0, v * factor);
        }
    }

    /// Returns the accumulated supernumber and resets the accumulator.
    pub(crate) fn finish(&mut self) -> Supernumber {
        let mut terms: Vec<(MultiIndex, Complex64)>;
        if self.dense.is_empty() {
            self.sparse.sort_by_key(|(i, _)| *i);
            terms = Vec::with_capacity(self.sparse.len());
            for &(index, value) in &self.sparse {
                match terms.last_mut() {
                    Some((last, acc)) if *last == index => *acc += value,
                    _ => terms.push((index, value)),
                }
            }
            self.sparse.clear();
            terms.retain(|(_, v)| !is_zero(*v));
        } else {
            self.touched.sort_unstable();
            self.touched.dedup();
            terms = Vec::with_capacity(self.touched.len());
            for &bits in &self.touched {
                let slot = &mut self.dense[bits as usize];
                if !is_zero(*slot) {
                    terms.push((MultiIndex(bits), *slot));
                }
                *slot = Complex64::new(0.0, 0.0);
            }
            self.touched.clear();
        }
        Supernumber {
            algebra: self.algebra,
            terms,
        }
    }
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident, $checked:ident) => {
        impl $trait<&Supernumber> for &Supernumber {
            type Output = Supernumber;
            fn $method(self, rhs: &Supernumber) -> Supernumber {
                self.$checked(rhs).expect("supernumbers from the same algebra")
            }
        }
        impl $trait<Supernumber> for Supernumber {
            type Output = Supernumber;
            fn $method(self, rhs: Supernumber) -> Supernumber {
                (&self).$method(&rhs)
            }
        }
        impl $trait<&Supernumber> for Supernumber {
            type Output = Supernumber;
            fn $method(self, rhs: &Supernumber) -> Supernumber {
                (&self).$method(rhs)
            }
        }
    };
}

forward_binop!(Add, add, checked_add);
forward_binop!(Sub, sub, checked_sub);
forward_binop!(Mul, mul, checked_mul);

impl Neg for &Supernumber {
    type Output = Supernumber;
    fn neg(self) -> Supernumber {
        self.scale_real(-1.0)
    }
}

impl Neg for Supernumber {
    type Output = Supernumber;
    fn neg(self) -> Supernumber {
        self.scale_real(-1.0)
    }
}

impl Mul<f64> for &Supernumber {
    type Output = Supernumber;
    fn mul(self, rhs: f64) -> Supernumber {
        self.scale_real(rhs)
    }
}

fn format_real(f: &mut fmt::Formatter<'_>, value: f64) -> fmt::Result {
    write!(f, "{value}")
}

impl fmt::Display for Supernumber {
    /// Text form such as `2 - 3*z[1] + 0.5*z[1,2]`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms = self.display_terms();
        if terms.is_empty() {
            return f.write_str("0");
        }
        for (k, (index, value)) in terms.iter().enumerate() {
            let real = value.im == 0.0;
            let (negative, magnitude) = if real && value.re < 0.0 {
                (true, Complex64::new(-value.re, 0.0))
            } else {
                (false, *value)
            };
            match (k, negative) {
                (0, true) => f.write_str("-")?,
                (0, false) => {}
                (_, true) => f.write_str(" - ")?,
                (_, false) => f.write_str(" + ")?,
            }
            if real {
                format_real(f, magnitude.re)?;
            } else {
                f.write_str("(")?;
                format_real(f, magnitude.re)?;
                if magnitude.im < 0.0 {
                    f.write_str("-")?;
                    format_real(f, -magnitude.im)?;
                } else {
                    f.write_str("+")?;
                    format_real(f, magnitude.im)?;
                }
                f.write_str("i)")?;
            }
            if !index.is_empty() {
                write!(f, "*z{index}")?;
            }
        }
        Ok(())
    }
}

/// JSON wire form `{"field":"R","budget":N,"terms":[{"index":[..],"re":x,"im":y}]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SupernumberJson {
    pub field: Field,
    pub budget: u8,
    pub terms: Vec<TermJson>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TermJson {
    pub index: Vec<u32>,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

impl From<&Supernumber> for SupernumberJson {
    fn from(z: &Supernumber) -> Self {
        SupernumberJson {
            field: z.field(),
            budget: z.budget(),
            terms: z
                .display_terms()
                .into_iter()
                .map(|(index, value)| TermJson {
                    index: index.labels().collect(),
                    re: value.re,
                    im: value.im,
                })
                .collect(),
        }
    }
}

impl TryFrom<SupernumberJson> for Supernumber {
    type Error = AlgebraError;

    fn try_from(wire: SupernumberJson) -> Result<Self> {
        let algebra = GrassmannAlgebra::new(wire.field, wire.budget)?;
        let terms = wire
            .terms
            .iter()
            .map(|t| Ok((MultiIndex::new(&t.index, wire.budget)?, Complex64::new(t.re, t.im))))
            .collect::<Result<Vec<_>>>()?;
        algebra.from_terms(terms)
    }
}

impl Serialize for Supernumber {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        SupernumberJson::from(self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Supernumber {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let wire = SupernumberJson::deserialize(deserializer)?;
        Supernumber::try_from(wire).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn alg() -> GrassmannAlgebra {
        GrassmannAlgebra::real(8)
    }

    fn z(i: u32) -> Supernumber {
        alg().generator(i)
    }

    fn num(v: f64) -> Supernumber {
        alg().real_scalar(v)
    }

    fn mono(labels: &[u32], c: f64) -> Supernumber {
        alg().monomial(labels, c).unwrap()
    }

    #[test]
    fn anticommuting_generators() {
        let p = &z(2) * &z(1);
        assert!(p.identical(&mono(&[1, 2], -1.0)));
    }

    #[test]
    fn repeated_generator_vanishes() {
        let p = &mono(&[1, 2], 1.0) * &mono(&[1, 3], 1.0);
        assert!(p.is_zero());
        assert!((&z(1) * &z(1)).is_zero());
    }

    #[test]
    fn square_of_generator_is_nilpotent() {
        let p = &(&num(1.0) + &z(1)) * &(&num(1.0) - &z(1));
        assert!(p.identical(&num(1.0)));
    }

    #[test]
    fn sign_of_interleaved_merge() {
        // ζ1ζ3 · ζ2ζ4 = -ζ1ζ2ζ3ζ4 (one inversion: 3 > 2)
        let p = &mono(&[1, 3], 1.0) * &mono(&[2, 4], 1.0);
        assert!(p.identical(&mono(&[1, 2, 3, 4], -1.0)));
        // ζ3ζ4 · ζ1ζ2 = +ζ1ζ2ζ3ζ4 (four inversions)
        let p = &mono(&[3, 4], 1.0) * &mono(&[1, 2], 1.0);
        assert!(p.identical(&mono(&[1, 2, 3, 4], 1.0)));
    }

    #[test]
    fn norm_examples() {
        let a = &(&num(2.0) - &z(1).scale_real(3.0)) + &mono(&[1, 2], 0.5);
        assert_eq!(a.norm(), 5.5);
        assert_eq!(alg().zero().norm(), 0.0);
        let p = &(&num(1.0) + &z(1)) * &(&num(1.0) + &z(2));
        assert_eq!(p.norm(), 4.0);
        assert_eq!(p.len(), 4);
    }

    #[test]
    fn body_and_soul() {
        let (b, s) = (&num(3.0) + &mono(&[1, 2], 1.0)).body_soul();
        assert_eq!(b.re, 3.0);
        assert!(s.identical(&mono(&[1, 2], 1.0)));
        let (b, s) = z(1).body_soul();
        assert_eq!(b.re, 0.0);
        assert!(s.identical(&z(1)));
        let (b, s) = num(2.5).body_soul();
        assert_eq!(b.re, 2.5);
        assert!(s.is_zero());
    }

    #[test]
    fn soul_is_nilpotent() {
        let x = &(&(&num(1.5) + &z(1)) + &mono(&[2, 3], 2.0)) + &mono(&[4, 5, 6], -1.0);
        let soul = x.soul();
        assert!(soul.pow(x.budget() as u32 + 1).is_zero());
    }

    #[test]
    fn parity_projection() {
        let x = &(&num(1.0) + &z(1)) + &mono(&[2, 3], 1.0);
        assert!(x.parity_project(Parity::Even).identical(&(&num(1.0) + &mono(&[2, 3], 1.0))));
        assert!(x.parity_project(Parity::Odd).identical(&z(1)));
        assert!(alg().zero().parity_project(Parity::Even).is_zero());
        assert_eq!(x.parity(), None);
        assert_eq!(z(3).parity(), Some(Parity::Odd));
        assert_eq!(alg().zero().parity(), Some(Parity::Even));
    }

    #[test]
    fn inversion_examples() {
        let tol = Tolerance::default();
        let inv = (&num(2.0) + &mono(&[1, 2], 1.0)).invert(&tol).unwrap();
        assert!(inv.identical(&(&num(0.5) + &mono(&[1, 2], -0.25))));
        assert!(num(1.0).invert(&tol).unwrap().identical(&num(1.0)));
        assert!(matches!(
            z(1).invert(&tol),
            Err(AlgebraError::NotInvertible { .. })
        ));
    }

    #[test]
    fn inverse_round_trip_with_deep_soul() {
        let tol = Tolerance::default();
        let x = &(&(&num(0.7) + &z(1)) + &mono(&[2, 3], 2.0)) + &mono(&[1, 4, 5, 6], -1.0);
        let x = &x + &(&z(7) * &z(8));
        let inv = x.invert(&tol).unwrap();
        assert!((&x * &inv).approx_eq(&num(1.0), &tol));
        assert!(inv.invert(&tol).unwrap().approx_eq(&x, &tol));
    }

    #[test]
    fn incompatible_operands_rejected() {
        let a = GrassmannAlgebra::real(4).generator(1);
        let b = GrassmannAlgebra::real(5).generator(1);
        assert!(matches!(a.checked_mul(&b), Err(AlgebraError::Incompatible(_))));
        let c = GrassmannAlgebra::complex(4).generator(1);
        assert!(a.checked_add(&c).is_err());
    }

    #[test]
    fn multi_index_validation() {
        assert!(MultiIndex::new(&[1, 1], 8).is_err());
        assert!(MultiIndex::new(&[2, 1], 8).is_err());
        assert!(MultiIndex::new(&[9], 8).is_err());
        assert!(MultiIndex::new(&[0], 8).is_err());
        let i = MultiIndex::new(&[1, 5, 64], 64).unwrap();
        assert_eq!(i.labels().collect::<Vec<_>>(), vec![1, 5, 64]);
        assert_eq!(i.max_label(), 64);
    }

    #[test]
    fn large_budget_uses_sparse_path() {
        let big = GrassmannAlgebra::real(64);
        let a = &big.generator(64) + &big.generator(3);
        let b = &big.generator(1) + &big.real_scalar(2.0);
        let p = &a * &b;
        // (ζ64 + ζ3)(ζ1 + 2) = -ζ1ζ64 - ζ1ζ3 + 2ζ64 + 2ζ3
        assert_eq!(p.len(), 4);
        assert_eq!(p.coeff(MultiIndex::new(&[1, 64], 64).unwrap()).re, -1.0);
        assert_eq!(p.coeff(MultiIndex::new(&[1, 3], 64).unwrap()).re, -1.0);
    }

    #[test]
    fn left_division_by_monomial() {
        let x = &(&mono(&[1, 3], 2.0) + &mono(&[3], 1.0)) + &mono(&[1, 2], 5.0);
        let (q, r) = x.left_divide(MultiIndex::generator(3));
        // ζ3·(-2ζ1 + 1) = 2ζ1ζ3 + ζ3
        assert!(q.identical(&(&mono(&[1], -2.0) + &num(1.0))));
        assert!(r.identical(&mono(&[1, 2], 5.0)));
        let back = &(&z(3) * &q) + &r;
        assert!(back.identical(&x));
    }

    #[test]
    fn display_text_form() {
        let a = &(&num(2.0) - &z(1).scale_real(3.0)) + &mono(&[1, 2], 0.5);
        assert_eq!(a.to_string(), "2 - 3*z[1] + 0.5*z[1,2]");
        assert_eq!(alg().zero().to_string(), "0");
        assert_eq!((-&z(2)).to_string(), "-1*z[2]");
    }

    #[test]
    fn json_round_trip() {
        let a = &(&num(2.0) - &z(1).scale_real(3.0)) + &mono(&[1, 2], 0.5);
        let text = serde_json::to_string(&a).unwrap();
        let back: Supernumber = serde_json::from_str(&text).unwrap();
        assert!(back.identical(&a));
        let bad = r#"{"field":"R","budget":8,"terms":[{"index":[2,1],"re":1.0}]}"#;
        assert!(serde_json::from_str::<Supernumber>(bad).is_err());
        let imaginary = r#"{"field":"R","budget":8,"terms":[{"index":[],"re":1.0,"im":2.0}]}"#;
        assert!(serde_json::from_str::<Supernumber>(imaginary).is_err());
    }

    #[test]
    fn complex_coefficients() {
        let c = GrassmannAlgebra::complex(4);
        let a = &c.scalar(Complex64::new(0.0, 1.0)) + &c.generator(1);
        let b = &c.scalar(Complex64::new(0.0, -1.0)) + &c.generator(1);
        let p = &a * &b;
        // (i + ζ1)(-i + ζ1) = 1 + iζ1 - iζ1 = 1
        assert!(p.identical(&c.one()));
        assert_eq!(a.norm(), 2.0);
    }
}
