//! Lie superalgebras over `Λ`: the matrix supercommutator, structure constants
//! in a pure basis, axiom checks, `ad`, and the Grassmann shell.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{AlgebraError, Result};
use crate::grassmann::{Accumulator, Field, GrassmannAlgebra, Parity, Supernumber, Tolerance};
use crate::linear::{slot_parity, GradedModule, SuperMatrix};

/// Default absolute tolerance for skew and Jacobi residuals.
pub const AXIOM_TOL: f64 = 1e-10;

/// Supercommutator `MN − (−1)^{ε(M)ε(N)} NM`, extended bilinearly over the
/// parity decompositions of mixed inputs.
pub fn super_bracket(m: &SuperMatrix, n: &SuperMatrix) -> Result<SuperMatrix> {
    if m.p() != n.p() || m.q() != n.q() {
        return Err(AlgebraError::Dimension(format!(
            "({}|{}) vs ({}|{}) supermatrices",
            m.p(),
            m.q(),
            n.p(),
            n.q()
        )));
    }
    if let (Some(a), Some(b)) = (m.parity(), n.parity()) {
        return m.commutator_with_sign(n, a.sign_with(b));
    }
    let mut out = SuperMatrix::zeros(m.p(), m.q(), m.algebra());
    for a in [Parity::Even, Parity::Odd] {
        let ma = m.parity_part(a);
        if ma.is_zero() {
            continue;
        }
        for b in [Parity::Even, Parity::Odd] {
            let nb = n.parity_part(b);
            if nb.is_zero() {
                continue;
            }
            out = out.checked_add(&ma.commutator_with_sign(&nb, a.sign_with(b))?)?;
        }
    }
    Ok(out)
}

/// Element `Σ_M X^M E_M` of a free graded `Λ`-module with pure basis, stored
/// by its left coefficients `X^M`.
#[derive(Clone, Debug)]
pub struct AlgebraElement {
    p: usize,
    q: usize,
    coeffs: Vec<Supernumber>,
}

impl AlgebraElement {
    pub fn new(p: usize, q: usize, coeffs: Vec<Supernumber>) -> Result<Self> {
        if coeffs.len() != p + q || coeffs.is_empty() {
            return Err(AlgebraError::Dimension(format!(
                "({p}|{q}) element needs {} coefficients, got {}",
                p + q,
                coeffs.len()
            )));
        }
        let algebra = coeffs[0].algebra();
        if coeffs.iter().any(|c| c.algebra() != algebra) {
            return Err(AlgebraError::Incompatible(
                "coefficients from different algebras".into(),
            ));
        }
        Ok(AlgebraElement { p, q, coeffs })
    }

    pub fn zeros(p: usize, q: usize, algebra: GrassmannAlgebra) -> Self {
        AlgebraElement { p, q, coeffs: vec![algebra.zero(); p + q] }
    }

    /// Basis element `E_m` (0-based).
    pub fn basis(p: usize, q: usize, algebra: GrassmannAlgebra, m: usize) -> Self {
        let mut e = Self::zeros(p, q, algebra);
        e.coeffs[m] = algebra.one();
        e
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
        self.coeffs[0].algebra()
    }

    pub fn coeffs(&self) -> &[Supernumber] {
        &self.coeffs
    }

    pub fn coeff(&self, m: usize) -> &Supernumber {
        &self.coeffs[m]
    }

    pub fn basis_parity(&self, m: usize) -> Parity {
        slot_parity(self.p, m)
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(Supernumber::norm).sum()
    }

    pub fn has_parity(&self, parity: Parity) -> bool {
        self.coeffs
            .iter()
            .enumerate()
            .all(|(m, c)| c.has_parity(self.basis_parity(m).plus(parity)))
    }

    pub fn parity(&self) -> Option<Parity> {
        if self.has_parity(Parity::Even) {
            Some(Parity::Even)
        } else if self.has_parity(Parity::Odd) {
            Some(Parity::Odd)
        } else {
            None
        }
    }

    pub fn is_even(&self) -> bool {
        self.has_parity(Parity::Even)
    }

    pub fn parity_part(&self, parity: Parity) -> AlgebraElement {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(m, c)| c.parity_project(self.basis_parity(m).plus(parity)))
            .collect();
        AlgebraElement { p: self.p, q: self.q, coeffs }
    }

    fn check_shape(&self, other: &AlgebraElement) -> Result<()> {
        if self.p != other.p || self.q != other.q {
            return Err(AlgebraError::Dimension(format!(
                "({}|{}) vs ({}|{}) elements",
                self.p, self.q, other.p, other.q
            )));
        }
        if self.algebra() != other.algebra() {
            return Err(AlgebraError::Incompatible("elements over different algebras".into()));
        }
        Ok(())
    }

    pub fn checked_add(&self, other: &AlgebraElement) -> Result<AlgebraElement> {
        self.check_shape(other)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect();
        Ok(AlgebraElement { p: self.p, q: self.q, coeffs })
    }

    pub fn checked_sub(&self, other: &AlgebraElement) -> Result<AlgebraElement> {
        self.check_shape(other)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect();
        Ok(AlgebraElement { p: self.p, q: self.q, coeffs })
    }

    pub fn scale_real(&self, factor: f64) -> AlgebraElement {
        AlgebraElement {
            p: self.p,
            q: self.q,
            coeffs: self.coeffs.iter().map(|c| c.scale_real(factor)).collect(),
        }
    }

    /// `α·X = Σ (α X^M) E_M`.
    pub fn left_scale(&self, alpha: &Supernumber) -> Result<AlgebraElement> {
        let coeffs = self
            .coeffs
            .iter()
            .map(|c| alpha.checked_mul(c))
            .collect::<Result<_>>()?;
        Ok(AlgebraElement { p: self.p, q: self.q, coeffs })
    }

    /// Coefficients with respect to the right module structure, `X = Σ E_M · x̃^M`.
    /// The map is an involution, so it also converts back.
    pub fn right_coefficients(&self) -> Vec<Supernumber> {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(m, c)| flip_odd_part(c, self.basis_parity(m)))
            .collect()
    }

    pub fn from_right_coefficients(p: usize, q: usize, coeffs: Vec<Supernumber>) -> Result<Self> {
        let right = AlgebraElement::new(p, q, coeffs)?;
        let coeffs = right.right_coefficients();
        Ok(AlgebraElement { p, q, coeffs })
    }

    pub fn max_label(&self) -> u32 {
        self.coeffs.iter().map(Supernumber::max_label).max().unwrap_or(0)
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(Supernumber::is_finite)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(Supernumber::is_zero)
    }

    pub fn distance(&self, other: &AlgebraElement) -> f64 {
        self.checked_sub(other).map(|d| d.norm()).unwrap_or(f64::INFINITY)
    }

    pub fn approx_eq(&self, other: &AlgebraElement, tol: &Tolerance) -> bool {
        tol.accepts(self.distance(other), self.norm().max(other.norm()))
    }

    pub fn identical(&self, other: &AlgebraElement) -> bool {
        self.p == other.p
            && self.q == other.q
            && self.coeffs.iter().zip(&other.coeffs).all(|(a, b)| a.identical(b))
    }

    /// `Σ_M X^M · E_M` for a matrix basis, with the matrix module action.
    pub fn to_matrix(&self, basis: &[SuperMatrix]) -> Result<SuperMatrix> {
        if basis.len() != self.dim() {
            return Err(AlgebraError::Dimension("basis length differs from the element".into()));
        }
        let mut out = SuperMatrix::zeros(basis[0].p(), basis[0].q(), self.algebra());
        for (c, e) in self.coeffs.iter().zip(basis) {
            if !c.is_zero() {
                out = out.checked_add(&e.left_scale(c)?)?;
            }
        }
        Ok(out)
    }
}

/// Even part plus `(−1)^{parity}` times the odd part.
fn flip_odd_part(c: &Supernumber, parity: Parity) -> Supernumber {
    match parity {
        Parity::Even => c.clone(),
        Parity::Odd => &c.even_part() - &c.odd_part(),
    }
}

impl GradedModule for AlgebraElement {
    fn parity_part(&self, parity: Parity) -> Self {
        AlgebraElement::parity_part(self, parity)
    }

    fn left_mul(&self, alpha: &Supernumber) -> Result<Self> {
        self.left_scale(alpha)
    }

    fn module_add(&self, other: &Self) -> Result<Self> {
        self.checked_add(other)
    }

    fn module_neg(&self) -> Self {
        self.scale_real(-1.0)
    }
}

/// Dense tensor `f^K_{MN}` (0-based indices), not validated.
#[derive(Clone, Debug)]
pub struct StructureConstants {
    p: usize,
    q: usize,
    algebra: GrassmannAlgebra,
    // index (m * n + nn) * n + k
    f: Vec<Supernumber>,
}

/// Outcome of an axiom check over all basis pairs or triples.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AxiomReport {
    pub max_residual: f64,
    pub pass: bool,
    /// 1-based indices of the worst basis tuple, when the residual is nonzero.
    pub worst: Option<Vec<usize>>,
}

impl StructureConstants {
    pub fn zeros(p: usize, q: usize, algebra: GrassmannAlgebra) -> Self {
        let n = p + q;
        StructureConstants { p, q, algebra, f: vec![algebra.zero(); n * n * n] }
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

    pub fn basis_parity(&self, m: usize) -> Parity {
        slot_parity(self.p, m)
    }

    #[inline]
    fn idx(&self, m: usize, n: usize, k: usize) -> usize {
        let d = self.dim();
        (m * d + n) * d + k
    }

    /// `f^k_{mn}`.
    pub fn get(&self, m: usize, n: usize, k: usize) -> &Supernumber {
        &self.f[self.idx(m, n, k)]
    }

    pub fn set(&mut self, m: usize, n: usize, k: usize, value: Supernumber) -> Result<()> {
        if value.algebra() != self.algebra {
            return Err(AlgebraError::Incompatible("constant from a different algebra".into()));
        }
        let d = self.dim();
        if m >= d || n >= d || k >= d {
            return Err(AlgebraError::InvalidIndex(format!(
                "({},{},{}) outside 1..{d}",
                m + 1,
                n + 1,
                k + 1
            )));
        }
        let i = self.idx(m, n, k);
        self.f[i] = value;
        Ok(())
    }

    /// Sets `f^k_{mn}` and the graded-skew partner `f^k_{nm}`.
    pub fn set_skew(&mut self, m: usize, n: usize, k: usize, value: Supernumber) -> Result<()> {
        let sign = -self.basis_parity(m).sign_with(self.basis_parity(n));
        let partner = value.scale_real(sign);
        self.set(m, n, k, value)?;
        self.set(n, m, k, partner)
    }

    pub fn zero_element(&self) -> AlgebraElement {
        AlgebraElement::zeros(self.p, self.q, self.algebra)
    }

    /// `[X,Y]^K = Σ_{M,N} (−1)^{ε_M ε(Y^N)} X^M Y^N f^K_{MN}`.
    pub fn bracket(&self, x: &AlgebraElement, y: &AlgebraElement) -> Result<AlgebraElement> {
        if x.p() != self.p || x.q() != self.q || y.p() != self.p || y.q() != self.q {
            return Err(AlgebraError::Dimension("element grading differs from the algebra".into()));
        }
        if x.algebra() != self.algebra || y.algebra() != self.algebra {
            return Err(AlgebraError::Incompatible("element over a different algebra".into()));
        }
        let d = self.dim();
        // pairwise products with the sign folded in, skipping zeros
        let mut pairs: Vec<(usize, usize, Supernumber)> = Vec::new();
        for m in 0..d {
            let xm = &x.coeffs[m];
            if xm.is_zero() {
                continue;
            }
            for n in 0..d {
                let yn = &y.coeffs[n];
                if yn.is_zero() {
                    continue;
                }
                let signed = flip_odd_part(yn, self.basis_parity(m));
                pairs.push((m, n, xm * &signed));
            }
        }
        let mut acc = Accumulator::new(self.algebra);
        let mut coeffs = Vec::with_capacity(d);
        for k in 0..d {
            for (m, n, xy) in &pairs {
                let f = self.get(*m, *n, k);
                if !f.is_zero() && !xy.is_zero() {
                    acc.add_product(xy, f, false);
                }
            }
            coeffs.push(acc.finish());
        }
        Ok(AlgebraElement { p: self.p, q: self.q, coeffs })
    }

    /// Residual of graded skew symmetry `f^K_{MN} + (−1)^{ε_M ε_N} f^K_{NM}`.
    pub fn check_skew(&self, tol: f64) -> AxiomReport {
        let d = self.dim();
        let mut report = AxiomReport { max_residual: 0.0, pass: true, worst: None };
        for m in 0..d {
            for n in m..d {
                let sign = self.basis_parity(m).sign_with(self.basis_parity(n));
                let mut residual = 0.0;
                for k in 0..d {
                    residual += (self.get(m, n, k) + &self.get(n, m, k).scale_real(sign)).norm();
                }
                record(&mut report, residual, &[m, n]);
            }
        }
        report.pass = report.max_residual <= tol;
        report
    }

    /// Checks `f^K_{MN}` is pure of parity `ε_M + ε_N + ε_K`.
    pub fn check_grading(&self) -> Result<()> {
        let d = self.dim();
        for m in 0..d {
            for n in 0..d {
                for k in 0..d {
                    let want = self.basis_parity(m).plus(self.basis_parity(n)).plus(self.basis_parity(k));
                    if !self.get(m, n, k).has_parity(want) {
                        return Err(AlgebraError::Parity(format!(
                            "f^{}_{{{},{}}} = {} is not {:?}",
                            k + 1,
                            m + 1,
                            n + 1,
                            self.get(m, n, k),
                            want
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Left coefficients of `[E_a, [E_b, E_c]]`.
    fn nested(&self, a: usize, b: usize, c: usize, acc: &mut Accumulator) -> Vec<Supernumber> {
        let d = self.dim();
        let ea = self.basis_parity(a);
        let inner: Vec<Supernumber> = (0..d)
            .map(|k| flip_odd_part(self.get(b, c, k), ea))
            .collect();
        (0..d)
            .map(|l| {
                for (k, fk) in inner.iter().enumerate() {
                    let g = self.get(a, k, l);
                    if !fk.is_zero() && !g.is_zero() {
                        acc.add_product(fk, g, false);
                    }
                }
                acc.finish()
            })
            .collect()
    }

    /// Max residual of `(−1)^{ε_a ε_c}[a,[b,c]] + cyclic` over basis triples.
    pub fn check_graded_jacobi(&self, tol: f64) -> AxiomReport {
        let d = self.dim();
        let mut acc = Accumulator::new(self.algebra);
        let mut report = AxiomReport { max_residual: 0.0, pass: true, worst: None };
        let par = |i: usize| self.basis_parity(i);
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    let t1 = self.nested(a, b, c, &mut acc);
                    let t2 = self.nested(b, c, a, &mut acc);
                    let t3 = self.nested(c, a, b, &mut acc);
                    let s1 = par(a).sign_with(par(c));
                    let s2 = par(b).sign_with(par(a));
                    let s3 = par(c).sign_with(par(b));
                    let residual: f64 = (0..d)
                        .map(|l| {
                            acc.add_scaled(&t1[l], s1);
                            acc.add_scaled(&t2[l], s2);
                            acc.add_scaled(&t3[l], s3);
                            acc.finish().norm()
                        })
                        .sum();
                    record(&mut report, residual, &[a, b, c]);
                }
            }
        }
        report.pass = report.max_residual <= tol;
        report
    }

    /// True iff every constant has soul norm at most `tol`.
    pub fn is_conventional(&self, tol: f64) -> bool {
        self.f.iter().all(|c| c.soul().norm() <= tol)
    }

    /// `M·(p+q)` with `M = max ‖f^C_{AB}‖`.
    pub fn bracket_bound_constant(&self) -> f64 {
        let max = self.f.iter().map(Supernumber::norm).fold(0.0, f64::max);
        max * self.dim() as f64
    }

    /// Matrix of `ad_X` in right coordinates: column `a` holds the right
    /// coefficients of `[X, E_a]`. Acting on right coefficient columns it
    /// reproduces the bracket for every `Y`, ordinary products compose, and
    /// the matrix has the parity of `X`.
    pub fn ad_matrix(&self, x: &AlgebraElement) -> Result<SuperMatrix> {
        let d = self.dim();
        let mut cols = Vec::with_capacity(d);
        for a in 0..d {
            let ea = AlgebraElement::basis(self.p, self.q, self.algebra, a);
            cols.push(self.bracket(x, &ea)?.right_coefficients());
        }
        Ok(SuperMatrix::from_fn(self.p, self.q, self.algebra, |c, a| cols[a][c].clone()))
    }

    /// `ad_X Y` through [`Self::ad_matrix`].
    pub fn apply_ad(ad: &SuperMatrix, y: &AlgebraElement) -> Result<AlgebraElement> {
        let out = ad.apply(&y.right_coefficients())?;
        AlgebraElement::from_right_coefficients(y.p(), y.q(), out)
    }

    pub fn promote(&self, algebra: GrassmannAlgebra) -> Result<StructureConstants> {
        let f = self
            .f
            .iter()
            .map(|c| {
                let c = c.promote(algebra.budget())?;
                Ok(if algebra.field() == Field::Complex { c.complexify() } else { c })
            })
            .collect::<Result<_>>()?;
        Ok(StructureConstants { p: self.p, q: self.q, algebra, f })
    }

    pub fn is_finite(&self) -> bool {
        self.f.iter().all(Supernumber::is_finite)
    }
}

fn record(report: &mut AxiomReport, residual: f64, tuple: &[usize]) {
    if residual > report.max_residual || residual.is_nan() {
        report.max_residual = residual;
        report.worst = Some(tuple.iter().map(|i| i + 1).collect());
    }
}

/// Structure constants that passed the skew, grading and Jacobi checks.
#[derive(Clone, Debug)]
pub struct SuperLieAlgebra {
    constants: StructureConstants,
}

impl SuperLieAlgebra {
    pub fn new(constants: StructureConstants) -> Result<Self> {
        Self::with_tolerance(constants, AXIOM_TOL)
    }

    pub fn with_tolerance(constants: StructureConstants, tol: f64) -> Result<Self> {
        if !constants.is_finite() {
            return Err(AlgebraError::InvalidInput("non-finite structure constant".into()));
        }
        constants.check_grading()?;
        let skew = constants.check_skew(tol);
        if !skew.pass {
            return Err(AlgebraError::InvalidInput(format!(
                "graded skew symmetry fails at {:?} (residual {:e})",
                skew.worst.unwrap_or_default(),
                skew.max_residual
            )));
        }
        let jacobi = constants.check_graded_jacobi(tol);
        if !jacobi.pass {
            return Err(AlgebraError::InvalidInput(format!(
                "graded Jacobi identity fails at {:?} (residual {:e})",
                jacobi.worst.unwrap_or_default(),
                jacobi.max_residual
            )));
        }
        Ok(SuperLieAlgebra { constants })
    }

    /// Zero bracket on a `(p|q)` module.
    pub fn abelian(p: usize, q: usize, algebra: GrassmannAlgebra) -> Self {
        SuperLieAlgebra { constants: StructureConstants::zeros(p, q, algebra) }
    }

    pub fn constants(&self) -> &StructureConstants {
        &self.constants
    }

    pub fn into_constants(self) -> StructureConstants {
        self.constants
    }
}

impl std::ops::Deref for SuperLieAlgebra {
    type Target = StructureConstants;
    fn deref(&self) -> &StructureConstants {
        &self.constants
    }
}

/// See [`StructureConstants::check_graded_jacobi`].
pub fn check_graded_jacobi(constants: &StructureConstants, tol: f64) -> AxiomReport {
    constants.check_graded_jacobi(tol)
}

/// See [`StructureConstants::is_conventional`].
pub fn is_conventional(constants: &StructureConstants, tol: f64) -> bool {
    constants.is_conventional(tol)
}

/// See [`StructureConstants::bracket_bound_constant`].
pub fn bracket_bound_constant(constants: &StructureConstants) -> f64 {
    constants.bracket_bound_constant()
}

/// See [`StructureConstants::ad_matrix`].
pub fn ad_matrix(constants: &StructureConstants, x: &AlgebraElement) -> Result<SuperMatrix> {
    constants.ad_matrix(x)
}

/// Row-major matrix entries with the module row sign removed for a scalar of
/// parity `parity`: `vec(α·E)` for the given entries.
fn signed_entries(e: &SuperMatrix, parity: Parity) -> Vec<(usize, Supernumber, f64)> {
    let n = e.dim();
    (0..n * n)
        .map(|k| {
            let (i, j) = (k / n, k % n);
            let sign = parity.sign_with(slot_parity(e.p(), i));
            (k, e.get(i, j).clone(), sign)
        })
        .collect()
}

/// Solves `[E_M, E_N] = Σ_K f^K_{MN} · E_K` for a pure basis listed with its
/// even elements first.
///
/// Each `f^K_{MN}` is sought with parity `ε_M + ε_N + ε_K`. The body of the
/// basis must be linearly independent; the soul is handled by iterating the
/// body solve, which terminates by nilpotency. A pair whose bracket is not
/// re-expanded within tolerance gives [`AlgebraError::NotASubalgebra`].
pub fn structure_constants(basis: &[SuperMatrix]) -> Result<SuperLieAlgebra> {
    let first = basis
        .first()
        .ok_or_else(|| AlgebraError::InvalidInput("empty basis".into()))?;
    let algebra = first.algebra();
    let (mp, mq) = (first.p(), first.q());
    let mut parities = Vec::with_capacity(basis.len());
    for (i, e) in basis.iter().enumerate() {
        if e.p() != mp || e.q() != mq || e.algebra() != algebra {
            return Err(AlgebraError::Incompatible(format!("basis element {} differs in shape", i + 1)));
        }
        let parity = e
            .parity()
            .ok_or_else(|| AlgebraError::Parity(format!("basis element {} is not pure", i + 1)))?;
        parities.push(parity);
    }
    let p = parities.iter().take_while(|&&x| x == Parity::Even).count();
    if parities[p..].iter().any(|&x| x == Parity::Even) {
        return Err(AlgebraError::InvalidInput(
            "basis must list its even elements before its odd ones".into(),
        ));
    }
    let q = basis.len() - p;
    let d = p + q;
    let entries = (mp + mq) * (mp + mq);

    // body matrices for both scalar parities, columns indexed by K
    let body_for = |scalar: &dyn Fn(usize) -> Parity| -> DMatrix<Complex64> {
        let mut b = DMatrix::zeros(entries, d);
        for (k, e) in basis.iter().enumerate() {
            for (row, value, sign) in signed_entries(e, scalar(k)) {
                b[(row, k)] = value.body() * sign;
            }
        }
        b
    };
    let probe = body_for(&|_| Parity::Even);
    let svd = probe.clone().svd(false, false);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let rank = svd.rank((smax * 1e-10).max(1e-300));
    if rank < d {
        return Err(AlgebraError::LinearlyDependent { rank, expected: d });
    }

    let mut constants = StructureConstants::zeros(p, q, algebra);
    let tol = Tolerance::default();
    let mut acc = Accumulator::new(algebra);
    // left inverses for the two parity patterns of f^K, keyed by the parity of M+N
    let mut pinv_cache: [Option<DMatrix<Complex64>>; 2] = [None, None];
    for m in 0..d {
        for n in 0..d {
            let mn = slot_parity(p, m).plus(slot_parity(p, n));
            let target = super_bracket(&basis[m], &basis[n])?;
            let target_entries: Vec<Supernumber> = target.entries().to_vec();
            let f_parity = |k: usize| mn.plus(slot_parity(p, k));
            let slot = mn.bit() as usize;
            if pinv_cache[slot].is_none() {
                let b = body_for(&|k| f_parity(k));
                // left inverse through the Gram matrix; exact for orthonormal
                // elementary bases
                let bh = b.adjoint();
                let pinv = (&bh * &b)
                    .lu()
                    .solve(&bh)
                    .ok_or_else(|| AlgebraError::NumericalFailure("singular Gram matrix".into()))?;
                pinv_cache[slot] = Some(pinv);
            }
            let pinv = pinv_cache[slot].as_ref().expect("cached");
            let signed: Vec<Vec<(usize, Supernumber, f64)>> =
                (0..d).map(|k| signed_entries(&basis[k], f_parity(k))).collect();
            let mut f: Vec<Supernumber> = vec![algebra.zero(); d];
            for _ in 0..=(algebra.budget() as usize + 1) {
                // residual target minus the soul contribution of the current f
                let rhs: Vec<Supernumber> = (0..entries)
                    .map(|row| {
                        acc.add_scaled(&target_entries[row], 1.0);
                        for k in 0..d {
                            let (_, e, sign) = &signed[k][row];
                            let soul = e.soul();
                            if !soul.is_zero() && !f[k].is_zero() {
                                acc.add_product(&f[k], &soul, *sign > 0.0);
                            }
                        }
                        acc.finish()
                    })
                    .collect();
                let mut monomials: Vec<_> = rhs.iter().flat_map(|s| s.terms().map(|(i, _)| i)).collect();
                monomials.sort();
                monomials.dedup();
                let mut next: Vec<Vec<(crate::grassmann::MultiIndex, Complex64)>> = vec![Vec::new(); d];
                for mono in monomials {
                    let column = nalgebra::DVector::from_iterator(entries, rhs.iter().map(|s| s.coeff(mono)));
                    let solved = pinv * column;
                    for k in 0..d {
                        let v = solved[k];
                        if v.norm() > 1e-14 {
                            next[k].push((mono, v));
                        }
                    }
                }
                let next: Vec<Supernumber> = next
                    .into_iter()
                    .enumerate()
                    .map(|(k, terms)| {
                        algebra
                            .from_terms(terms.into_iter().map(|(i, v)| {
                                if algebra.field() == Field::Real {
                                    (i, Complex64::new(v.re, 0.0))
                                } else {
                                    (i, v)
                                }
                            }))
                            .map(|s| s.parity_project(f_parity(k)))
                    })
                    .collect::<Result<_>>()?;
                let settled = next.iter().zip(&f).all(|(a, b)| a.identical(b));
                f = next;
                if settled {
                    break;
                }
            }
            // re-expansion check with the module action
            let mut rebuilt = SuperMatrix::zeros(mp, mq, algebra);
            for (k, e) in basis.iter().enumerate() {
                if !f[k].is_zero() {
                    rebuilt = rebuilt.checked_add(&e.left_scale(&f[k])?)?;
                }
            }
            let residual = rebuilt.distance(&target);
            if !tol.accepts(residual, target.norm()) {
                return Err(AlgebraError::NotASubalgebra { m: m + 1, n: n + 1, residual });
            }
            for (k, value) in f.into_iter().enumerate() {
                constants.set(m, n, k, value)?;
            }
        }
    }
    SuperLieAlgebra::new(constants)
}

/// Standard basis of `gl(p|q)`: even elementary matrices first, then odd ones,
/// each group in row-major order.
pub fn gl_basis(p: usize, q: usize, algebra: GrassmannAlgebra) -> Vec<SuperMatrix> {
    let n = p + q;
    let mut even = Vec::new();
    let mut odd = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let e = SuperMatrix::unit(p, q, algebra, i, j);
            if slot_parity(p, i) == slot_parity(p, j) {
                even.push(e);
            } else {
                odd.push(e);
            }
        }
    }
    even.extend(odd);
    even
}

/// `(row, col)` positions of [`gl_basis`] in order.
pub fn gl_basis_positions(p: usize, q: usize) -> Vec<(usize, usize)> {
    let n = p + q;
    let mut even = Vec::new();
    let mut odd = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if slot_parity(p, i) == slot_parity(p, j) {
                even.push((i, j));
            } else {
                odd.push((i, j));
            }
        }
    }
    even.extend(odd);
    even
}

/// Coordinates of a matrix in the [`gl_basis`]: the inverse of
/// [`AlgebraElement::to_matrix`].
pub fn gl_coordinates(m: &SuperMatrix) -> AlgebraElement {
    let (p, q) = (m.p(), m.q());
    let positions = gl_basis_positions(p, q);
    let coeffs = positions
        .iter()
        .map(|&(i, j)| flip_odd_part(m.get(i, j), slot_parity(p, i)))
        .collect();
    AlgebraElement {
        p: p * p + q * q,
        q: 2 * p * q,
        coeffs,
    }
}

/// Soul-free complex constants of a graded Lie algebra promoted to a
/// `Λ_N`-module with the sign rule `[λX, μY] = λμ(−1)^{ε(μ)ε(X)}[X,Y]`.
pub fn grassmann_shell(base: &StructureConstants, budget: u8) -> Result<SuperLieAlgebra> {
    if !base.is_conventional(0.0) {
        return Err(AlgebraError::InvalidInput(
            "shell constants must be plain numbers".into(),
        ));
    }
    let jacobi = base.check_graded_jacobi(AXIOM_TOL);
    if !jacobi.pass {
        return Err(AlgebraError::InvalidInput(format!(
            "constants fail the graded Jacobi identity (residual {:e})",
            jacobi.max_residual
        )));
    }
    let algebra = GrassmannAlgebra::new(Field::Complex, budget)?;
    let promoted = base.promote(algebra)?;
    SuperLieAlgebra::new(promoted).map_err(|e| AlgebraError::InvalidInput(e.to_string()))
}

#[derive(Serialize, Deserialize)]
struct ConstantJson {
    #[serde(rename = "M")]
    m: usize,
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "K")]
    k: usize,
    value: Supernumber,
}

#[derive(Serialize, Deserialize)]
struct ConstantsJson {
    p: usize,
    q: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    field: Option<Field>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    budget: Option<u8>,
    #[serde(default)]
    f: Vec<ConstantJson>,
}

impl Serialize for StructureConstants {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let d = self.dim();
        let mut f = Vec::new();
        for m in 0..d {
            for n in 0..d {
                for k in 0..d {
                    let v = self.get(m, n, k);
                    if !v.is_zero() {
                        f.push(ConstantJson { m: m + 1, n: n + 1, k: k + 1, value: v.clone() });
                    }
                }
            }
        }
        ConstantsJson {
            p: self.p,
            q: self.q,
            field: Some(self.algebra.field()),
            budget: Some(self.algebra.budget()),
            f,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for StructureConstants {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error;
        let wire = ConstantsJson::deserialize(deserializer)?;
        let d = wire.p + wire.q;
        if d == 0 {
            return Err(D::Error::custom("structure constants need p + q > 0"));
        }
        let algebra = match (wire.field, wire.budget, wire.f.first()) {
            (Some(field), Some(budget), _) => GrassmannAlgebra::new(field, budget).map_err(D::Error::custom)?,
            (field, budget, Some(entry)) => {
                let a = entry.value.algebra();
                GrassmannAlgebra::new(field.unwrap_or(a.field()), budget.unwrap_or(a.budget()))
                    .map_err(D::Error::custom)?
            }
            (field, budget, None) => GrassmannAlgebra::new(
                field.unwrap_or(Field::Real),
                budget.unwrap_or(crate::grassmann::DEFAULT_BUDGET),
            )
            .map_err(D::Error::custom)?,
        };
        let mut out = StructureConstants::zeros(wire.p, wire.q, algebra);
        let mut seen = std::collections::HashSet::new();
        for entry in wire.f {
            for (name, v) in [("M", entry.m), ("N", entry.n), ("K", entry.k)] {
                if v == 0 || v > d {
                    return Err(D::Error::custom(format!("index {name}={v} outside 1..{d}")));
                }
            }
            if !seen.insert((entry.m, entry.n, entry.k)) {
                return Err(D::Error::custom(format!(
                    "duplicate entry (M,N,K)=({},{},{})",
                    entry.m, entry.n, entry.k
                )));
            }
            let value = if entry.value.algebra() == algebra {
                entry.value
            } else if entry.value.field() == algebra.field() || algebra.field() == Field::Complex {
                let v = entry.value.promote(algebra.budget()).map_err(D::Error::custom)?;
                if algebra.field() == Field::Complex { v.complexify() } else { v }
            } else {
                return Err(D::Error::custom("complex constant in a real algebra"));
            };
            out.set(entry.m - 1, entry.n - 1, entry.k - 1, value).map_err(D::Error::custom)?;
        }
        Ok(out)
    }
}

impl Serialize for SuperLieAlgebra {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.constants.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SuperLieAlgebra {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let constants = StructureConstants::deserialize(deserializer)?;
        SuperLieAlgebra::new(constants).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn alg() -> GrassmannAlgebra {
        GrassmannAlgebra::real(6)
    }

    fn sn(text: &str) -> Supernumber {
        Supernumber::parse(text, alg()).unwrap()
    }

    fn e(i: usize, j: usize) -> SuperMatrix {
        SuperMatrix::unit(1, 1, alg(), i, j)
    }

    fn gl11() -> SuperLieAlgebra {
        structure_constants(&gl_basis(1, 1, alg())).unwrap()
    }

    #[test]
    fn bracket_examples() {
        let b = super_bracket(&e(0, 1), &e(1, 0)).unwrap();
        assert!(b.identical(&SuperMatrix::identity(1, 1, alg())));
        assert!(super_bracket(&e(0, 0), &e(0, 1)).unwrap().identical(&e(0, 1)));
        let x = &e(0, 0).left_scale(&sn("2 + z[1,2]")).unwrap() + &e(0, 1).left_scale(&sn("z[3]")).unwrap();
        assert!(x.is_even());
        assert!(super_bracket(&x, &x).unwrap().is_zero());
        let other = SuperMatrix::identity(2, 1, alg());
        assert!(super_bracket(&x, &other).is_err());
    }

    #[test]
    fn mixed_bracket_is_bilinear() {
        let m = &e(0, 0) + &e(0, 1);
        let n = &e(1, 0) + &e(1, 1);
        let expected = super_bracket(&e(0, 0), &e(1, 0)).unwrap()
            + super_bracket(&e(0, 0), &e(1, 1)).unwrap()
            + super_bracket(&e(0, 1), &e(1, 0)).unwrap()
            + super_bracket(&e(0, 1), &e(1, 1)).unwrap();
        assert!(super_bracket(&m, &n).unwrap().identical(&expected));
    }

    #[test]
    fn gl11_constants() {
        let l = gl11();
        assert_eq!((l.p(), l.q()), (2, 2));
        // [E12, E21] = E11 + E22
        assert!((l.get(2, 3, 0).body().re - 1.0).abs() < 1e-15);
        assert!((l.get(2, 3, 1).body().re - 1.0).abs() < 1e-15);
        for m in 0..4 {
            for n in 0..4 {
                for k in 0..4 {
                    let v = l.get(m, n, k);
                    assert!(v.soul().is_zero());
                    let b = v.body().re;
                    assert!([0.0, 1.0, -1.0].iter().any(|t| (b - t).abs() < 1e-15), "{b}");
                }
            }
        }
        assert_eq!(l.check_graded_jacobi(AXIOM_TOL).max_residual, 0.0);
    }

    #[test]
    fn abelian_and_partial_bases() {
        let diag = vec![e(0, 0), e(1, 1)];
        let l = structure_constants(&diag).unwrap();
        assert!(l.constants().f.iter().all(Supernumber::is_zero));
        let pair = vec![e(0, 0), e(0, 1)];
        let l = structure_constants(&pair).unwrap();
        assert!((l.get(0, 1, 1).body().re - 1.0).abs() < 1e-15);
        // E12 and E21 alone do not close
        let open = vec![e(0, 1), e(1, 0)];
        assert!(matches!(
            structure_constants(&open),
            Err(AlgebraError::NotASubalgebra { m: 1, n: 2, .. })
        ));
        let dependent = vec![e(0, 0), e(0, 0).scale_real(2.0)];
        assert!(matches!(
            structure_constants(&dependent),
            Err(AlgebraError::LinearlyDependent { rank: 1, expected: 2 })
        ));
    }

    #[test]
    fn constants_with_soul_in_basis() {
        // E11 + z1 z2 E22 together with E22 spans the same diagonal algebra
        let a = &e(0, 0) + &e(1, 1).left_scale(&sn("z[1,2]")).unwrap();
        let basis = vec![a.clone(), e(1, 1), e(0, 1)];
        let l = structure_constants(&basis).unwrap();
        // [A, E12] = E12 - z1z2 E12 = (1 - z1z2) E12
        let v = l.get(0, 2, 2);
        assert!(v.approx_eq(&sn("1 - z[1,2]"), &Tolerance::default()), "{v}");
    }

    #[test]
    fn jacobi_detects_perturbation() {
        let l = gl11();
        assert!(l.check_graded_jacobi(AXIOM_TOL).pass);
        let zero = StructureConstants::zeros(2, 2, alg());
        assert!(check_graded_jacobi(&zero, AXIOM_TOL).pass);
        let mut broken = l.constants().clone();
        let flipped = -broken.get(2, 3, 0);
        broken.set_skew(2, 3, 0, flipped).unwrap();
        let report = check_graded_jacobi(&broken, AXIOM_TOL);
        assert!(!report.pass);
        assert!(report.max_residual > 0.5);
        assert!(SuperLieAlgebra::new(broken).is_err());
    }

    #[test]
    fn conventional_checks() {
        let l = gl11();
        assert!(is_conventional(l.constants(), 1e-12));
        let mut c = StructureConstants::zeros(1, 0, alg());
        c.set(0, 0, 0, sn("z[1,2]")).unwrap();
        assert!(!c.is_conventional(1e-12));
        assert!(SuperLieAlgebra::abelian(2, 2, alg()).is_conventional(0.0));
    }

    #[test]
    fn ad_examples() {
        let l = gl11();
        assert!(l.ad_matrix(&l.zero_element()).unwrap().is_zero());
        let x = AlgebraElement::basis(2, 2, alg(), 0);
        let ad = l.ad_matrix(&x).unwrap();
        assert!(ad.is_even());
        assert!((ad.get(2, 2).body().re - 1.0).abs() < 1e-15);
        assert!((ad.get(3, 3).body().re + 1.0).abs() < 1e-15);
        let off: f64 = (0..4)
            .flat_map(|i| (0..4).map(move |j| (i, j)))
            .filter(|&(i, j)| !(i == j && i >= 2))
            .map(|(i, j)| ad.get(i, j).norm())
            .sum();
        assert_eq!(off, 0.0);
        // identity is central
        let id = AlgebraElement::new(2, 2, vec![sn("1"), sn("1"), sn("0"), sn("0")]).unwrap();
        assert!(l.ad_matrix(&id).unwrap().norm() < 1e-15);
    }

    #[test]
    fn ad_reproduces_bracket() {
        let l = gl11();
        let x = AlgebraElement::new(2, 2, vec![sn("1 + z[1,2]"), sn("z[3,4]"), sn("z[5]"), sn("2*z[6]")]).unwrap();
        let y = AlgebraElement::new(2, 2, vec![sn("z[1]"), sn("3"), sn("1 + z[2]"), sn("z[3,4]")]).unwrap();
        let ad = l.ad_matrix(&x).unwrap();
        let via = StructureConstants::apply_ad(&ad, &y).unwrap();
        assert!(via.approx_eq(&l.bracket(&x, &y).unwrap(), &Tolerance::default()));
    }

    #[test]
    fn bound_constant_examples() {
        assert_eq!(SuperLieAlgebra::abelian(2, 1, alg()).bracket_bound_constant(), 0.0);
        assert!((gl11().bracket_bound_constant() - 4.0).abs() < 1e-14);
    }

    #[test]
    fn shell_sign_rule() {
        let c = GrassmannAlgebra::complex(4);
        let base = structure_constants(&gl_basis(1, 1, GrassmannAlgebra::complex(1))).unwrap();
        let shell = grassmann_shell(base.constants(), 4).unwrap();
        assert!(shell.is_conventional(0.0));
        assert_eq!(shell.check_graded_jacobi(0.0).max_residual, 0.0);
        let x = AlgebraElement::basis(2, 2, c, 2).left_scale(&c.generator(1)).unwrap();
        let y = AlgebraElement::basis(2, 2, c, 3).left_scale(&c.generator(2)).unwrap();
        let lhs = shell.bracket(&x, &y).unwrap();
        let xy = shell
            .bracket(&AlgebraElement::basis(2, 2, c, 2), &AlgebraElement::basis(2, 2, c, 3))
            .unwrap();
        let z12 = &c.generator(1) * &c.generator(2);
        let rhs = xy.left_scale(&-&z12).unwrap();
        assert!(lhs.identical(&rhs));
        let ab = grassmann_shell(&StructureConstants::zeros(1, 1, GrassmannAlgebra::complex(1)), 4).unwrap();
        let u = AlgebraElement::basis(1, 1, c, 1).left_scale(&c.generator(1)).unwrap();
        let v = AlgebraElement::basis(1, 1, c, 1).left_scale(&c.generator(2)).unwrap();
        assert!(ab.bracket(&u, &v).unwrap().is_zero());
    }

    #[test]
    fn shell_rejects_bad_constants() {
        let mut broken = StructureConstants::zeros(2, 2, GrassmannAlgebra::complex(1));
        let one = GrassmannAlgebra::complex(1).one();
        broken.set_skew(2, 3, 0, one.clone()).unwrap();
        broken.set_skew(0, 2, 2, one).unwrap();
        assert!(matches!(grassmann_shell(&broken, 4), Err(AlgebraError::InvalidInput(_))));
    }

    #[test]
    fn gl_coordinates_round_trip() {
        let m = &e(0, 0).left_scale(&sn("2 + z[1,2]")).unwrap()
            + &SuperMatrix::from_fn(1, 1, alg(), |i, j| if (i, j) == (1, 0) { sn("z[3]") } else { alg().zero() });
        let x = gl_coordinates(&m);
        let back = x.to_matrix(&gl_basis(1, 1, alg())).unwrap();
        assert!(back.identical(&m));
        // the (2,1) coordinate of an odd entry on an odd row picks up a sign
        assert!(x.coeff(3).identical(&sn("-1*z[3]")));
    }

    #[test]
    fn json_round_trip_and_rejects() {
        let l = gl11();
        let text = serde_json::to_string(&l).unwrap();
        let back: SuperLieAlgebra = serde_json::from_str(&text).unwrap();
        assert_eq!(back.check_graded_jacobi(0.0).max_residual, 0.0);
        let bad_index = r#"{"p":1,"q":0,"f":[{"M":2,"N":1,"K":1,"value":{"field":"R","budget":2,"terms":[]}}]}"#;
        assert!(serde_json::from_str::<StructureConstants>(bad_index).is_err());
        let one_sided = r#"{"p":1,"q":1,"f":[{"M":1,"N":2,"K":2,"value":{"field":"R","budget":2,"terms":[{"index":[],"re":1}]}}]}"#;
        assert!(serde_json::from_str::<StructureConstants>(one_sided).is_ok());
        assert!(serde_json::from_str::<SuperLieAlgebra>(one_sided).is_err());
    }
}
