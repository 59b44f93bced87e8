//! Seeded random supernumbers, vectors and matrices for sampling checks.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::grassmann::{Field, GrassmannAlgebra, MultiIndex, Parity, Supernumber};
use crate::linear::{slot_parity, SuperMatrix, SuperVector};
use crate::superlie::AlgebraElement;

/// Deterministic generator used across the crate.
pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Shape of random supernumbers.
#[derive(Clone, Copy, Debug)]
pub struct Sampling {
    /// Highest generator label that may appear.
    pub max_label: u32,
    /// Upper bound on the number of terms.
    pub max_terms: usize,
}

impl Sampling {
    pub fn new(max_label: u32, max_terms: usize) -> Self {
        Sampling { max_label, max_terms }
    }
}

fn coefficient<R: Rng + ?Sized>(rng: &mut R, field: Field) -> Complex64 {
    let re = rng.random_range(-1.0..=1.0);
    match field {
        Field::Real => Complex64::new(re, 0.0),
        Field::Complex => Complex64::new(re, rng.random_range(-1.0..=1.0)),
    }
}

fn random_index<R: Rng + ?Sized>(rng: &mut R, max_label: u32, parity: Option<Parity>) -> Option<MultiIndex> {
    if max_label == 0 {
        return match parity {
            Some(Parity::Odd) => None,
            _ => Some(MultiIndex::EMPTY),
        };
    }
    for _ in 0..64 {
        let mut bits = 0u64;
        for label in 1..=max_label {
            if rng.random_bool(0.4) {
                bits |= 1u64 << (label - 1);
            }
        }
        let index = MultiIndex::from_bits(bits);
        if parity.is_none_or(|p| index.parity() == p) {
            return Some(index);
        }
    }
    match parity {
        Some(Parity::Odd) => Some(MultiIndex::generator(rng.random_range(1..=max_label))),
        _ => Some(MultiIndex::EMPTY),
    }
}

/// Up to `max_terms` terms with uniform coefficients in `[−1, 1]`, optionally
/// restricted to one parity.
pub fn random_supernumber<R: Rng + ?Sized>(
    rng: &mut R,
    algebra: GrassmannAlgebra,
    parity: Option<Parity>,
    shape: Sampling,
) -> Supernumber {
    let max_label = shape.max_label.min(algebra.budget() as u32);
    let count = if shape.max_terms == 0 { 0 } else { rng.random_range(1..=shape.max_terms) };
    let mut terms = Vec::with_capacity(count);
    for _ in 0..count {
        if let Some(index) = random_index(rng, max_label, parity) {
            terms.push((index, coefficient(rng, algebra.field())));
        }
    }
    algebra.from_terms(terms).expect("labels within the budget")
}

/// Random pure vector entries for a `(p|q)` grading with the given overall parity.
pub fn random_components<R: Rng + ?Sized>(
    rng: &mut R,
    algebra: GrassmannAlgebra,
    p: usize,
    q: usize,
    parity: Parity,
    shape: Sampling,
) -> Vec<Supernumber> {
    (0..p + q)
        .map(|m| random_supernumber(rng, algebra, Some(slot_parity(p, m).plus(parity)), shape))
        .collect()
}

/// Random element of `K^{p|q}`.
pub fn random_even_vector<R: Rng + ?Sized>(
    rng: &mut R,
    algebra: GrassmannAlgebra,
    p: usize,
    q: usize,
    shape: Sampling,
) -> SuperVector {
    SuperVector::new(p, q, random_components(rng, algebra, p, q, Parity::Even, shape)).expect("even by construction")
}

/// Random pure element of a `(p|q)` graded module.
pub fn random_element<R: Rng + ?Sized>(
    rng: &mut R,
    algebra: GrassmannAlgebra,
    p: usize,
    q: usize,
    parity: Parity,
    shape: Sampling,
) -> AlgebraElement {
    AlgebraElement::new(p, q, random_components(rng, algebra, p, q, parity, shape)).expect("shape by construction")
}

/// Random pure `(p|q)` supermatrix.
pub fn random_matrix<R: Rng + ?Sized>(
    rng: &mut R,
    algebra: GrassmannAlgebra,
    p: usize,
    q: usize,
    parity: Parity,
    shape: Sampling,
) -> SuperMatrix {
    SuperMatrix::from_fn(p, q, algebra, |i, j| {
        let want = slot_parity(p, i).plus(slot_parity(p, j)).plus(parity);
        random_supernumber(rng, algebra, Some(want), shape)
    })
}

/// Even matrix with uniform `[−1, 1]` numbers on the even blocks and no soul.
pub fn random_body_matrix<R: Rng + ?Sized>(rng: &mut R, algebra: GrassmannAlgebra, p: usize, q: usize) -> SuperMatrix {
    SuperMatrix::from_fn(p, q, algebra, |i, j| {
        if slot_parity(p, i) == slot_parity(p, j) {
            algebra.scalar(coefficient(rng, algebra.field()))
        } else {
            algebra.zero()
        }
    })
}

/// Rescales `m` to norm `target` (zero stays zero).
pub fn with_norm(m: &SuperMatrix, target: f64) -> SuperMatrix {
    let n = m.norm();
    if n == 0.0 {
        m.clone()
    } else {
        m.scale_real(target / n)
    }
}

/// Random even matrix, dense body plus random soul, with norm drawn
/// uniformly from `[0.05, 1]·max_norm`.
pub fn random_even_matrix_within<R: Rng + ?Sized>(
    rng: &mut R,
    algebra: GrassmannAlgebra,
    p: usize,
    q: usize,
    shape: Sampling,
    max_norm: f64,
) -> SuperMatrix {
    let body = random_body_matrix(rng, algebra, p, q);
    let m = &body + &random_matrix(rng, algebra, p, q, Parity::Even, shape);
    let target = max_norm * rng.random_range(0.05..=1.0);
    with_norm(&m, target)
}
