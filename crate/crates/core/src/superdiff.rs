//! Numerical checks of supersmoothness: derivative coefficients recovered
//! with odd probe generators, and multilinearity of `d^k f` over even vectors.

use rand::Rng;
use serde::Serialize;

use crate::error::{AlgebraError, Result};
use crate::grassmann::{GrassmannAlgebra, MultiIndex, Parity, Supernumber};
use crate::linear::{slot_parity, SuperVector};
use crate::random::{random_even_vector, seeded, Sampling};

/// Default base step for first derivatives.
pub const DEFAULT_STEP: f64 = 1e-4;
/// Default relative residual tolerance.
pub const DEFAULT_TOL: f64 = 1e-6;

/// Step used at order `k`: `1e-4 · 10^{k−1}`, which keeps rounding below
/// the `O(h⁴)` truncation of the extrapolated differences.
pub fn step_for_order(k: usize) -> f64 {
    DEFAULT_STEP * 10f64.powi(k as i32 - 1)
}

type Evaluator = dyn Fn(&SuperVector) -> Result<SuperVector> + Send + Sync;

/// A black-box map `K^{p|q} → K^{p'|q'}` with a declared order to test.
pub struct SampledMap {
    domain: (usize, usize),
    codomain: (usize, usize),
    algebra: GrassmannAlgebra,
    k_max: usize,
    /// Highest generator used by constants inside the evaluator.
    constants_label: u32,
    eval: Box<Evaluator>,
}

impl SampledMap {
    pub fn new(
        domain: (usize, usize),
        codomain: (usize, usize),
        algebra: GrassmannAlgebra,
        k_max: usize,
        eval: impl Fn(&SuperVector) -> Result<SuperVector> + Send + Sync + 'static,
    ) -> Self {
        SampledMap {
            domain,
            codomain,
            algebra,
            k_max,
            constants_label: 0,
            eval: Box::new(eval),
        }
    }

    /// Declares the highest generator appearing in constants of the map.
    pub fn with_constants_label(mut self, label: u32) -> Self {
        self.constants_label = label;
        self
    }

    pub fn domain(&self) -> (usize, usize) {
        self.domain
    }

    pub fn codomain(&self) -> (usize, usize) {
        self.codomain
    }

    pub fn algebra(&self) -> GrassmannAlgebra {
        self.algebra
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn evaluate(&self, x: &SuperVector) -> Result<SuperVector> {
        if (x.p(), x.q()) != self.domain {
            return Err(AlgebraError::Dimension("point outside the map's domain".into()));
        }
        let y = (self.eval)(x)?;
        if (y.p(), y.q()) != self.codomain {
            return Err(AlgebraError::Dimension("evaluator returned the wrong codomain shape".into()));
        }
        Ok(y)
    }
}

fn axpy(x: &SuperVector, dirs: &[SuperVector], weights: &[f64]) -> Result<SuperVector> {
    let mut out = x.clone();
    for (d, w) in dirs.iter().zip(weights) {
        out = out.checked_add(&d.scale_real(*w))?;
    }
    Ok(out)
}

/// Nested central difference `Σ_s (Πs) f(x + h Σ s_i X_i) / (2h)^k`.
fn central_mixed(f: &SampledMap, x: &SuperVector, dirs: &[SuperVector], h: f64) -> Result<SuperVector> {
    let k = dirs.len();
    let (cp, cq) = f.codomain;
    let mut acc = SuperVector::zeros(cp, cq, f.algebra);
    for pattern in 0u32..(1 << k) {
        let signs: Vec<f64> = (0..k).map(|i| if pattern >> i & 1 == 1 { -1.0 } else { 1.0 }).collect();
        let weights: Vec<f64> = signs.iter().map(|s| s * h).collect();
        let value = f.evaluate(&axpy(x, dirs, &weights)?)?;
        let sign: f64 = signs.iter().product();
        acc = acc.checked_add(&value.scale_real(sign))?;
    }
    Ok(acc.scale_real(1.0 / (2.0 * h).powi(k as i32)))
}

/// `d^k f(x)(X_1, …, X_k)` by central differences with one Richardson level.
pub fn mixed_derivative(f: &SampledMap, x: &SuperVector, dirs: &[SuperVector], h: f64) -> Result<SuperVector> {
    if !(h > 0.0) {
        return Err(AlgebraError::InvalidInput("difference step must be positive".into()));
    }
    let coarse = central_mixed(f, x, dirs, h)?;
    let fine = central_mixed(f, x, dirs, h / 2.0)?;
    Ok(fine.scale_real(4.0 / 3.0).checked_sub(&coarse.scale_real(1.0 / 3.0))?)
}

/// Directional derivative along an even direction `H`.
pub fn frechet_directional(f: &SampledMap, x: &SuperVector, dir: &SuperVector, h: f64) -> Result<SuperVector> {
    mixed_derivative(f, x, std::slice::from_ref(dir), h)
}

/// A multi-index of domain slots with its coefficient column `b_{A_1…A_k}`.
type Probed = (Vec<usize>, Vec<Supernumber>);

/// Probe direction `θ e_slot`, with `θ = 1` on even slots.
fn probe(f: &SampledMap, slot: usize, label: u32) -> SuperVector {
    let (p, q) = f.domain;
    let algebra = f.algebra;
    let mut entries = vec![algebra.zero(); p + q];
    entries[slot] = match slot_parity(p, slot) {
        Parity::Even => algebra.one(),
        Parity::Odd => algebra.generator(label),
    };
    SuperVector::new(p, q, entries).expect("pure probe")
}

fn tuples(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..k {
        out = out
            .into_iter()
            .flat_map(|t| {
                (0..n).map(move |a| {
                    let mut t = t.clone();
                    t.push(a);
                    t
                })
            })
            .collect();
    }
    out
}

/// Coefficients of order `k` recovered with probe generators `labels[i]`
/// on position `i`; also returns the worst relative size of the remainder
/// that does not factor through the probes.
fn probe_coefficients(
    f: &SampledMap,
    x: &SuperVector,
    k: usize,
    labels: &[u32],
    h: f64,
) -> Result<(Vec<Probed>, f64)> {
    let (p, q) = f.domain;
    let mut out = Vec::new();
    let mut worst: f64 = 0.0;
    for tuple in tuples(p + q, k) {
        let dirs: Vec<SuperVector> = tuple.iter().zip(labels).map(|(&a, &l)| probe(f, a, l)).collect();
        let mut mask = 0u64;
        for (&a, &l) in tuple.iter().zip(labels) {
            if slot_parity(p, a) == Parity::Odd {
                mask |= 1u64 << (l - 1);
            }
        }
        let d = mixed_derivative(f, x, &dirs, h)?;
        let mut coeffs = Vec::with_capacity(d.dim());
        for entry in d.entries() {
            let (quotient, rest) = entry.left_divide(MultiIndex::from_bits(mask));
            worst = worst.max(rest.norm() / (entry.norm() + quotient.norm()).max(1e-3));
            coeffs.push(quotient);
        }
        out.push((tuple, coeffs));
    }
    Ok((out, worst))
}

/// First-order coefficients `b_A`, one codomain column per domain slot `A`,
/// with `d f(x)(X) = Σ_A X^A b_A`.
pub fn g1_coefficients(f: &SampledMap, x: &SuperVector, h: f64) -> Result<Vec<Vec<Supernumber>>> {
    let budget = f.algebra.budget() as u32;
    if budget < 2 || x.max_label().max(f.constants_label) > budget - 2 {
        return Err(AlgebraError::Refused(format!(
            "first-order probes use generators {} and {}; the point and constants must avoid them",
            budget.saturating_sub(1),
            budget
        )));
    }
    let (coeffs, _) = probe_coefficients(f, x, 1, &[budget], h)?;
    Ok(coeffs.into_iter().map(|(_, c)| c).collect())
}

/// `Σ X_1^{A_1}⋯X_k^{A_k} b_{A_1…A_k}` for a codomain of `width` components.
fn predict(
    dirs: &[SuperVector],
    coeffs: &[Probed],
    algebra: GrassmannAlgebra,
    width: usize,
) -> Vec<Supernumber> {
    let mut out = vec![algebra.zero(); width];
    for (tuple, c) in coeffs {
        let mut factor = algebra.one();
        for (dir, &a) in dirs.iter().zip(tuple) {
            factor = &factor * dir.entry(a);
            if factor.is_zero() {
                break;
            }
        }
        if factor.is_zero() {
            continue;
        }
        for (slot, b) in out.iter_mut().zip(c) {
            *slot = &*slot + &(&factor * b);
        }
    }
    out
}

/// Outcome of [`check_g_multilinear`].
#[derive(Clone, Debug, Serialize)]
pub struct DiffReport {
    pub order: usize,
    pub max_residual: f64,
    pub pass: bool,
    pub refused: bool,
    pub samples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

fn relative(diff: f64, a: f64, b: f64) -> f64 {
    diff / (a + b).max(1e-3)
}

fn vec_norm(v: &[Supernumber]) -> f64 {
    v.iter().map(Supernumber::norm).sum()
}

fn vec_sub(a: &[Supernumber], b: &[Supernumber]) -> Vec<Supernumber> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn vec_add(a: &[Supernumber], b: &[Supernumber]) -> Vec<Supernumber> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// Compares `d^k f(x)(X_1, …, X_k)` for random even directions with the
/// expansion in coefficients recovered along coordinate probes.
///
/// The base point, the directions and the map's constants may only use
/// generators up to `N − 2k`; the top `2k` generators carry two independent
/// probe sets whose coefficients must agree. Residuals are relative to
/// `max(‖actual‖ + ‖predicted‖, 1e−3)`. From order 3 on, a sample matching up
/// to a global sign is counted in the diagnostic rather than as a failure.
pub fn check_g_multilinear(
    f: &SampledMap,
    x: &SuperVector,
    k: usize,
    samples: usize,
    tol: f64,
    seed: u64,
) -> Result<DiffReport> {
    let refuse = |why: String| DiffReport {
        order: k,
        max_residual: f64::NAN,
        pass: false,
        refused: true,
        samples: 0,
        diagnostic: Some(why),
    };
    if k == 0 {
        return Err(AlgebraError::InvalidInput("order must be at least 1".into()));
    }
    if (x.p(), x.q()) != f.domain {
        return Err(AlgebraError::Dimension("base point outside the map's domain".into()));
    }
    if x.algebra().is_some_and(|a| a != f.algebra) {
        return Err(AlgebraError::Incompatible("base point from a different algebra".into()));
    }
    if k > f.k_max {
        return Ok(refuse(format!("order {k} exceeds the declared order {}", f.k_max)));
    }
    let budget = f.algebra.budget() as usize;
    if budget < 2 * k {
        return Ok(refuse(format!("order {k} needs {} probe generators, budget is {budget}", 2 * k)));
    }
    let ceiling = (budget - 2 * k) as u32;
    let used = x.max_label().max(f.constants_label);
    if used > ceiling {
        return Ok(refuse(format!(
            "point or constants use generator {used}; order {k} allows only 1..={ceiling}"
        )));
    }

    let h = step_for_order(k);
    let set1: Vec<u32> = (1..=k as u32).map(|i| ceiling + i).collect();
    let set2: Vec<u32> = (1..=k as u32).map(|i| ceiling + k as u32 + i).collect();
    let (b1, rest1) = probe_coefficients(f, x, k, &set1, h)?;
    let (b2, rest2) = probe_coefficients(f, x, k, &set2, h)?;
    let mut max_residual = rest1.max(rest2);
    for ((_, c1), (_, c2)) in b1.iter().zip(&b2) {
        let d = vec_norm(&vec_sub(c1, c2));
        max_residual = max_residual.max(relative(d, vec_norm(c1), vec_norm(c2)));
    }

    let (p, q) = f.domain;
    let width = f.codomain.0 + f.codomain.1;
    let shape = Sampling::new(ceiling, 4);
    let mut rng = seeded(seed);
    let mut flips = 0usize;
    for _ in 0..samples {
        let dirs: Vec<SuperVector> = (0..k)
            .map(|_| {
                let v = random_even_vector(&mut rng, f.algebra, p, q, shape);
                let scale = rng.random_range(0.5..=1.0) / v.norm().max(1e-12);
                v.scale_real(scale * (p + q) as f64)
            })
            .collect();
        let actual = mixed_derivative(f, x, &dirs, h)?;
        let predicted = predict(&dirs, &b1, f.algebra, width);
        let a = vec_norm(actual.entries());
        let b = vec_norm(&predicted);
        let direct = relative(vec_norm(&vec_sub(actual.entries(), &predicted)), a, b);
        let residual = if k >= 3 {
            let flipped = relative(vec_norm(&vec_add(actual.entries(), &predicted)), a, b);
            if flipped < direct && flipped <= tol {
                flips += 1;
            }
            direct.min(flipped)
        } else {
            direct
        };
        max_residual = max_residual.max(residual);
    }
    let diagnostic = (flips > 0).then(|| format!("{flips} samples matched only up to a global sign"));
    Ok(DiffReport {
        order: k,
        max_residual,
        pass: max_residual <= tol,
        refused: false,
        samples,
        diagnostic,
    })
}
