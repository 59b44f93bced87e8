//! Power series of even supermatrices, `exp`/`log`, the Bernoulli series of
//! `ad`, and the group law `μ(X, Y)` as the time-one value of a flow.

use std::sync::OnceLock;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{AlgebraError, Result};
use crate::grassmann::Parity;
use crate::linear::SuperMatrix;
use crate::superlie::{super_bracket, AlgebraElement, StructureConstants, SuperLieAlgebra};

/// Integration and series settings shared by the exp/log and flow routines.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowConfig {
    /// Fixed RK4 steps on `[0, 1]`.
    pub steps: usize,
    pub series_tol: f64,
    pub series_max_terms: usize,
    /// Bound on `‖X‖`, `‖Y‖` and `‖ad_X‖` inputs.
    pub radius_guard: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            steps: 200,
            series_tol: 1e-14,
            series_max_terms: 64,
            radius_guard: 0.5,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(AlgebraError::InvalidInput("steps must be at least 1".into()));
        }
        if !(self.series_tol > 0.0) || !(self.radius_guard > 0.0) || !self.radius_guard.is_finite() {
            return Err(AlgebraError::InvalidInput(
                "series tolerance and radius guard must be positive".into(),
            ));
        }
        if self.series_max_terms == 0 {
            return Err(AlgebraError::InvalidInput("series needs at least one term".into()));
        }
        Ok(())
    }
}

/// Largest index with a tabulated Bernoulli number.
pub const BERNOULLI_MAX: usize = 40;

fn bernoulli_table() -> &'static Vec<BigRational> {
    static TABLE: OnceLock<Vec<BigRational>> = OnceLock::new();
    TABLE.get_or_init(|| {
        // B_m = −1/(m+1) Σ_{j<m} C(m+1, j) B_j
        let mut table: Vec<BigRational> = Vec::with_capacity(BERNOULLI_MAX + 1);
        table.push(BigRational::one());
        for m in 1..=BERNOULLI_MAX {
            let mut sum = BigRational::zero();
            let mut binom = BigInt::one();
            for (j, b) in table.iter().enumerate() {
                sum += BigRational::from_integer(binom.clone()) * b;
                binom = binom * BigInt::from(m + 1 - j) / BigInt::from(j + 1);
            }
            table.push(-sum / BigRational::from_integer(BigInt::from(m + 1)));
        }
        table
    })
}

/// Exact `B_k` with the convention `Σ B_k x^k / k! = x / (e^x − 1)`.
pub fn bernoulli(k: usize) -> Result<BigRational> {
    bernoulli_table()
        .get(k)
        .cloned()
        .ok_or_else(|| AlgebraError::OutOfDomain(format!("Bernoulli index {k} exceeds {BERNOULLI_MAX}")))
}

fn zeta_coefficients() -> &'static Vec<f64> {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut factorial = BigInt::one();
        bernoulli_table()
            .iter()
            .enumerate()
            .map(|(k, b)| {
                if k > 0 {
                    factorial *= BigInt::from(k);
                }
                (b / BigRational::from_integer(factorial.clone()))
                    .to_f64()
                    .expect("finite rational")
            })
            .collect()
    })
}

/// Coefficient sequences `a_k` for [`matrix_series`].
#[derive(Clone, Debug, PartialEq)]
pub enum SeriesCoeffs {
    /// `1/k!`
    Exp,
    /// `1`
    Geometric,
    /// `1/(k+1)!`, the series of `(e^x − 1)/x`
    Eta,
    /// `B_k/k!`, the series of `x/(e^x − 1)`
    Zeta,
    /// `(−1)^{k+1}/k` for `k ≥ 1`, the series of `log(1 + x)`
    Mercator,
    /// Explicit coefficients, zero beyond the list.
    Custom(Vec<f64>),
}

impl SeriesCoeffs {
    pub fn coeff(&self, k: usize) -> Result<f64> {
        Ok(match self {
            SeriesCoeffs::Exp => 1.0 / factorial(k),
            SeriesCoeffs::Geometric => 1.0,
            SeriesCoeffs::Eta => 1.0 / factorial(k + 1),
            SeriesCoeffs::Zeta => *zeta_coefficients().get(k).ok_or_else(|| {
                AlgebraError::OutOfDomain(format!("Bernoulli series needs more than {BERNOULLI_MAX} terms"))
            })?,
            SeriesCoeffs::Mercator => {
                if k == 0 {
                    0.0
                } else if k % 2 == 1 {
                    1.0 / k as f64
                } else {
                    -1.0 / k as f64
                }
            }
            SeriesCoeffs::Custom(c) => c.get(k).copied().unwrap_or(0.0),
        })
    }

    fn is_finite_list(&self) -> Option<usize> {
        match self {
            SeriesCoeffs::Custom(c) => Some(c.len()),
            _ => None,
        }
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// A summed series with the norm of the last term added.
#[derive(Clone, Debug)]
pub struct SeriesResult {
    pub value: SuperMatrix,
    pub terms: usize,
    pub last_term_norm: f64,
}

/// Stopping rule shared by the series loops: the current power weighted by
/// the larger of the current and next coefficient, against the accumulated norm.
fn negligible(power_norm: f64, a_k: f64, a_next: f64, acc_norm: f64, tol: f64) -> bool {
    power_norm == 0.0 || power_norm * a_k.abs().max(a_next.abs()) < tol * (1.0 + acc_norm)
}

/// `Σ_k a_k M^k` for an even `M`.
pub fn matrix_series(coeffs: &SeriesCoeffs, m: &SuperMatrix, cfg: &FlowConfig) -> Result<SeriesResult> {
    cfg.validate()?;
    if !m.is_even() {
        return Err(AlgebraError::Parity("power series need an even matrix".into()));
    }
    let mut power = SuperMatrix::identity(m.p(), m.q(), m.algebra());
    let mut acc = power.scale_real(coeffs.coeff(0)?);
    let mut last = acc.norm();
    let limit = coeffs.is_finite_list().unwrap_or(usize::MAX);
    for k in 0..cfg.series_max_terms {
        let a_k = coeffs.coeff(k)?;
        if k > 0 {
            power = &power * m;
            let term = power.scale_real(a_k);
            last = term.norm();
            acc = &acc + &term;
            if !acc.is_finite() {
                return Err(AlgebraError::NumericalFailure("series overflowed".into()));
            }
        }
        let next = if k + 1 < cfg.series_max_terms { coeffs.coeff(k + 1).unwrap_or(0.0) } else { 0.0 };
        if k + 1 >= limit || power.is_zero() || negligible(power.norm(), a_k, next, acc.norm(), cfg.series_tol) {
            return Ok(SeriesResult { value: acc, terms: k + 1, last_term_norm: last });
        }
    }
    Err(AlgebraError::Divergence { terms: cfg.series_max_terms, last_term_norm: last })
}

/// `exp(M)` by scaling and squaring with `‖M‖/2^s ≤ 0.5`.
pub fn exp_matrix(m: &SuperMatrix, cfg: &FlowConfig) -> Result<SuperMatrix> {
    let norm = m.norm();
    if !norm.is_finite() {
        return Err(AlgebraError::NumericalFailure("non-finite matrix".into()));
    }
    let mut s = 0u32;
    while norm / 2f64.powi(s as i32) > 0.5 {
        s += 1;
    }
    let scaled = m.scale_real(1.0 / 2f64.powi(s as i32));
    let mut e = matrix_series(&SeriesCoeffs::Exp, &scaled, cfg)?.value;
    for _ in 0..s {
        e = &e * &e;
    }
    Ok(e)
}

/// Principal square root by the Denman–Beavers iteration.
fn sqrt_matrix(g: &SuperMatrix) -> Result<SuperMatrix> {
    let mut y = g.clone();
    let mut z = SuperMatrix::identity(g.p(), g.q(), g.algebra());
    for _ in 0..60 {
        let y_next = (&y + &z.inverse()?).scale_real(0.5);
        let z_next = (&z + &y.inverse()?).scale_real(0.5);
        let change = y_next.distance(&y);
        y = y_next;
        z = z_next;
        if change <= 1e-15 * (1.0 + y.norm()) {
            return Ok(y);
        }
    }
    Err(AlgebraError::NumericalFailure("square root iteration did not settle".into()))
}

/// `log(G)` for `‖G − I‖ < 1`: square roots until `‖G − I‖ ≤ 1/4`, then the
/// Mercator series, rescaled by the number of roots taken.
pub fn log_matrix(g: &SuperMatrix, cfg: &FlowConfig) -> Result<SuperMatrix> {
    cfg.validate()?;
    if !g.is_even() {
        return Err(AlgebraError::Parity("log needs an even matrix".into()));
    }
    let id = SuperMatrix::identity(g.p(), g.q(), g.algebra());
    let dist = g.distance(&id);
    if !(dist < 1.0) {
        return Err(AlgebraError::OutOfDomain(format!("‖G − I‖ = {dist} is not below 1")));
    }
    let mut current = g.clone();
    let mut roots = 0;
    while current.distance(&id) > 0.25 {
        current = sqrt_matrix(&current)?;
        roots += 1;
        if roots > 20 {
            return Err(AlgebraError::NumericalFailure("square roots did not approach I".into()));
        }
    }
    let series = matrix_series(&SeriesCoeffs::Mercator, &(&current - &id), cfg)?;
    let out = series.value.scale_real(2f64.powi(roots));
    // drop rounding noise in the odd blocks
    Ok(out.parity_part(Parity::Even))
}

fn check_ad_guard(ad: &SuperMatrix, cfg: &FlowConfig) -> Result<()> {
    let norm = ad.norm();
    if !(norm <= cfg.radius_guard) {
        return Err(AlgebraError::OutOfDomain(format!(
            "‖ad‖ = {norm} exceeds the radius guard {}",
            cfg.radius_guard
        )));
    }
    Ok(())
}

/// `η(X) = Σ ad_X^k/(k+1)!` from the matrix of `ad_X`.
pub fn eta(ad: &SuperMatrix, cfg: &FlowConfig) -> Result<SuperMatrix> {
    check_ad_guard(ad, cfg)?;
    Ok(matrix_series(&SeriesCoeffs::Eta, ad, cfg)?.value)
}

/// `ζ(X) = Σ (B_k/k!) ad_X^k` from the matrix of `ad_X`.
pub fn zeta(ad: &SuperMatrix, cfg: &FlowConfig) -> Result<SuperMatrix> {
    check_ad_guard(ad, cfg)?;
    Ok(matrix_series(&SeriesCoeffs::Zeta, ad, cfg)?.value)
}

/// Vector operations needed by the flow.
pub trait LieVector: Clone {
    fn plus(&self, other: &Self) -> Self;
    fn minus(&self, other: &Self) -> Self;
    fn times(&self, factor: f64) -> Self;
    fn size(&self) -> f64;
    fn even(&self) -> bool;
    fn finite(&self) -> bool;
    /// Same shape and algebra as `other`.
    fn compatible(&self, other: &Self) -> bool;
}

/// A bracket on a space of [`LieVector`]s.
pub trait BracketAlgebra {
    type Elem: LieVector;
    fn bracket(&self, a: &Self::Elem, b: &Self::Elem) -> Result<Self::Elem>;
    fn zero_like(&self, a: &Self::Elem) -> Self::Elem {
        a.times(0.0)
    }
}

impl LieVector for SuperMatrix {
    fn plus(&self, other: &Self) -> Self {
        self + other
    }
    fn minus(&self, other: &Self) -> Self {
        self - other
    }
    fn times(&self, factor: f64) -> Self {
        self.scale_real(factor)
    }
    fn size(&self) -> f64 {
        self.norm()
    }
    fn even(&self) -> bool {
        self.is_even()
    }
    fn finite(&self) -> bool {
        self.is_finite()
    }
    fn compatible(&self, other: &Self) -> bool {
        self.p() == other.p() && self.q() == other.q() && self.algebra() == other.algebra()
    }
}

impl LieVector for AlgebraElement {
    fn plus(&self, other: &Self) -> Self {
        self.checked_add(other).expect("compatible elements")
    }
    fn minus(&self, other: &Self) -> Self {
        self.checked_sub(other).expect("compatible elements")
    }
    fn times(&self, factor: f64) -> Self {
        self.scale_real(factor)
    }
    fn size(&self) -> f64 {
        self.norm()
    }
    fn even(&self) -> bool {
        self.is_even()
    }
    fn finite(&self) -> bool {
        self.is_finite()
    }
    fn compatible(&self, other: &Self) -> bool {
        self.p() == other.p() && self.q() == other.q() && self.algebra() == other.algebra()
    }
}

/// `gl(p|q, Λ)` with the supercommutator.
#[derive(Clone, Copy, Debug, Default)]
pub struct MatrixAlgebra;

impl BracketAlgebra for MatrixAlgebra {
    type Elem = SuperMatrix;
    fn bracket(&self, a: &SuperMatrix, b: &SuperMatrix) -> Result<SuperMatrix> {
        super_bracket(a, b)
    }
}

impl BracketAlgebra for StructureConstants {
    type Elem = AlgebraElement;
    fn bracket(&self, a: &AlgebraElement, b: &AlgebraElement) -> Result<AlgebraElement> {
        StructureConstants::bracket(self, a, b)
    }
}

impl BracketAlgebra for SuperLieAlgebra {
    type Elem = AlgebraElement;
    fn bracket(&self, a: &AlgebraElement, b: &AlgebraElement) -> Result<AlgebraElement> {
        self.constants().bracket(a, b)
    }
}

fn check_inputs<A: BracketAlgebra>(inputs: &[&A::Elem], cfg: &FlowConfig) -> Result<()> {
    cfg.validate()?;
    for (i, v) in inputs.iter().enumerate() {
        if !v.compatible(inputs[0]) {
            return Err(AlgebraError::Incompatible("flow inputs differ in shape or algebra".into()));
        }
        if !v.even() {
            return Err(AlgebraError::Parity(format!("input {} is not even", i + 1)));
        }
        let size = v.size();
        if !(size <= cfg.radius_guard) {
            return Err(AlgebraError::OutOfDomain(format!(
                "input {} has norm {size} above the radius guard {}",
                i + 1,
                cfg.radius_guard
            )));
        }
    }
    Ok(())
}

fn rhs_unguarded<A: BracketAlgebra>(alg: &A, x: &A::Elem, z: &A::Elem, cfg: &FlowConfig) -> Result<A::Elem> {
    let coeffs = zeta_coefficients();
    let mut term = x.clone();
    let mut acc = x.clone();
    for k in 1..cfg.series_max_terms.min(BERNOULLI_MAX) {
        term = alg.bracket(z, &term)?;
        let c = coeffs[k];
        if c != 0.0 {
            acc = acc.plus(&term.times(c));
        }
        let next = coeffs.get(k + 1).copied().unwrap_or(0.0);
        if negligible(term.size(), c, next, acc.size(), cfg.series_tol) {
            return Ok(acc);
        }
    }
    Err(AlgebraError::Divergence {
        terms: cfg.series_max_terms.min(BERNOULLI_MAX),
        last_term_norm: term.size(),
    })
}

/// `F(X, Z) = X + Σ_{k≥1} (B_k/k!) ad_Z^k X`.
pub fn bch_rhs<A: BracketAlgebra>(alg: &A, x: &A::Elem, z: &A::Elem, cfg: &FlowConfig) -> Result<A::Elem> {
    check_inputs::<A>(&[x, z], cfg)?;
    rhs_unguarded(alg, x, z, cfg)
}

/// `μ(X, Y)`: RK4 for `dW/dt = F(X, W)`, `W(0) = Y`, returning `W(1)`.
///
/// The guard applies to `X` and `Y`; intermediate `W(t)` may leave it.
pub fn bch_flow<A: BracketAlgebra>(alg: &A, x: &A::Elem, y: &A::Elem, cfg: &FlowConfig) -> Result<A::Elem> {
    check_inputs::<A>(&[x, y], cfg)?;
    let h = 1.0 / cfg.steps as f64;
    let mut w = y.clone();
    for step in 0..cfg.steps {
        let k1 = rhs_unguarded(alg, x, &w, cfg)?;
        let k2 = rhs_unguarded(alg, x, &w.plus(&k1.times(0.5 * h)), cfg)?;
        let k3 = rhs_unguarded(alg, x, &w.plus(&k2.times(0.5 * h)), cfg)?;
        let k4 = rhs_unguarded(alg, x, &w.plus(&k3.times(h)), cfg)?;
        let incr = k1.plus(&k2.times(2.0)).plus(&k3.times(2.0)).plus(&k4);
        w = w.plus(&incr.times(h / 6.0));
        if !w.finite() {
            return Err(AlgebraError::NumericalFailure(format!("non-finite state at step {}", step + 1)));
        }
        if !w.even() {
            return Err(AlgebraError::NumericalFailure(format!("state lost evenness at step {}", step + 1)));
        }
    }
    Ok(w)
}

/// Classical BCH polynomial truncated at `order` (1 to 4).
pub fn bch_series_oracle<A: BracketAlgebra>(alg: &A, x: &A::Elem, y: &A::Elem, order: usize) -> Result<A::Elem> {
    if !(1..=4).contains(&order) {
        return Err(AlgebraError::InvalidInput(format!("oracle order {order} outside 1..=4")));
    }
    if !x.compatible(y) {
        return Err(AlgebraError::Incompatible("oracle inputs differ in shape or algebra".into()));
    }
    let mut out = x.plus(y);
    if order == 1 {
        return Ok(out);
    }
    let xy = alg.bracket(x, y)?;
    out = out.plus(&xy.times(0.5));
    if order == 2 {
        return Ok(out);
    }
    let xxy = alg.bracket(x, &xy)?;
    let yx = xy.times(-1.0);
    let yyx = alg.bracket(y, &yx)?;
    out = out.plus(&xxy.plus(&yyx).times(1.0 / 12.0));
    if order == 3 {
        return Ok(out);
    }
    let yxxy = alg.bracket(y, &xxy)?;
    Ok(out.minus(&yxxy.times(1.0 / 24.0)))
}

/// `‖exp(μ(X,Y)) − exp(X)exp(Y)‖` for matrices.
pub fn exp_identity_residual(x: &SuperMatrix, y: &SuperMatrix, mu: &SuperMatrix, cfg: &FlowConfig) -> Result<f64> {
    let lhs = exp_matrix(mu, cfg)?;
    let rhs = &exp_matrix(x, cfg)? * &exp_matrix(y, cfg)?;
    Ok(lhs.distance(&rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grassmann::{GrassmannAlgebra, Supernumber, Tolerance};
    use crate::superlie::{gl_basis, structure_constants};

    fn alg() -> GrassmannAlgebra {
        GrassmannAlgebra::real(6)
    }

    fn sn(text: &str) -> Supernumber {
        Supernumber::parse(text, alg()).unwrap()
    }

    fn m11(rows: [[&str; 2]; 2]) -> SuperMatrix {
        SuperMatrix::new(1, 1, rows.iter().map(|r| r.iter().map(|t| sn(t)).collect()).collect()).unwrap()
    }

    fn heis(a: f64, b: f64, c: f64) -> SuperMatrix {
        let g = GrassmannAlgebra::real(1);
        SuperMatrix::from_fn(3, 0, g, |i, j| match (i, j) {
            (0, 1) => g.real_scalar(a),
            (1, 2) => g.real_scalar(b),
            (0, 2) => g.real_scalar(c),
            _ => g.zero(),
        })
    }

    #[test]
    fn bernoulli_values() {
        let r = |n: i64, d: i64| BigRational::new(BigInt::from(n), BigInt::from(d));
        assert_eq!(bernoulli(0).unwrap(), r(1, 1));
        assert_eq!(bernoulli(1).unwrap(), r(-1, 2));
        assert_eq!(bernoulli(2).unwrap(), r(1, 6));
        assert_eq!(bernoulli(3).unwrap(), r(0, 1));
        assert_eq!(bernoulli(4).unwrap(), r(-1, 30));
        assert_eq!(bernoulli(12).unwrap(), r(-691, 2730));
        for k in (3..=BERNOULLI_MAX).step_by(2) {
            assert!(bernoulli(k).unwrap().is_zero());
        }
        assert!(bernoulli(41).is_err());
    }

    #[test]
    fn zeta_reproduces_generating_function() {
        for x in [0.3f64, -0.7, 1.5] {
            let series: f64 = (0..=BERNOULLI_MAX).map(|k| zeta_coefficients()[k] * x.powi(k as i32)).sum();
            assert!((series - x / (x.exp() - 1.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn series_examples() {
        let cfg = FlowConfig::default();
        let zero = SuperMatrix::zeros(1, 1, alg());
        let id = SuperMatrix::identity(1, 1, alg());
        assert!(matrix_series(&SeriesCoeffs::Exp, &zero, &cfg).unwrap().value.identical(&id));
        let n = m11([["0", "z[3] + z[1,2,4]"], ["0", "0"]]);
        assert!((&n * &n).is_zero());
        let e = matrix_series(&SeriesCoeffs::Exp, &n, &cfg).unwrap().value;
        assert!(e.identical(&(&id + &n)));
        assert!(exp_matrix(&n, &cfg).unwrap().approx_eq(&(&id + &n), &Tolerance::default()));
        let big = id.scale_real(1.0);
        assert_eq!(big.norm(), 2.0);
        assert!(matches!(
            matrix_series(&SeriesCoeffs::Geometric, &big, &cfg),
            Err(AlgebraError::Divergence { .. })
        ));
        assert!(matrix_series(&SeriesCoeffs::Exp, &m11([["0", "1"], ["0", "0"]]), &cfg).is_err());
    }

    #[test]
    fn exp_of_scalar_matrix() {
        let cfg = FlowConfig::default();
        let m = m11([["3", "0"], ["0", "-1"]]);
        let e = exp_matrix(&m, &cfg).unwrap();
        assert!((e.get(0, 0).body().re - 3f64.exp()).abs() < 1e-12 * 3f64.exp());
        assert!((e.get(1, 1).body().re - (-1f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn log_inverts_exp() {
        let cfg = FlowConfig::default();
        let m = m11([["0.1 + 0.05*z[1,2]", "0.07*z[3] - 0.02*z[4]"], ["0.03*z[5]", "-0.08 + 0.02*z[2,6]"]]);
        let back = log_matrix(&exp_matrix(&m, &cfg).unwrap(), &cfg).unwrap();
        assert!(back.distance(&m) < 1e-12, "{}", back.distance(&m));
        let far = SuperMatrix::identity(1, 1, alg()).scale_real(2.0);
        assert!(matches!(log_matrix(&far, &cfg), Err(AlgebraError::OutOfDomain(_))));
        // needs square roots before the series
        let m = m11([["0.3", "0.05*z[3]"], ["0.1*z[4]", "0.25"]]);
        let g = exp_matrix(&m, &cfg).unwrap();
        assert!(g.distance(&SuperMatrix::identity(1, 1, alg())) > 0.5);
        assert!(log_matrix(&g, &cfg).unwrap().distance(&m) < 1e-12);
    }

    #[test]
    fn eta_zeta_examples() {
        let cfg = FlowConfig::default();
        let gl = structure_constants(&gl_basis(1, 1, alg())).unwrap();
        let zero_ad = gl.ad_matrix(&gl.zero_element()).unwrap();
        let id = SuperMatrix::identity(2, 2, alg());
        assert!(eta(&zero_ad, &cfg).unwrap().identical(&id));
        assert!(zeta(&zero_ad, &cfg).unwrap().identical(&id));
        // ad of a soul-only even element: nilpotent of order 3 in this algebra
        let x = AlgebraElement::new(2, 2, vec![sn("0"), sn("0"), sn("0.05*z[1]"), sn("0.05*z[2]")]).unwrap();
        let ad = gl.ad_matrix(&x).unwrap();
        let ad2 = &ad * &ad;
        assert!((&ad2 * &ad).is_zero());
        let expected = &(&id - &ad.scale_real(0.5)) + &ad2.scale_real(1.0 / 12.0);
        assert!(zeta(&ad, &cfg).unwrap().approx_eq(&expected, &Tolerance::new(1e-15, 1e-15).unwrap()));
        let too_big = ad.scale_real(100.0);
        assert!(matches!(eta(&too_big, &cfg), Err(AlgebraError::OutOfDomain(_))));
    }

    #[test]
    fn rhs_examples() {
        let cfg = FlowConfig::default();
        let x = m11([["0.1 + 0.05*z[1,2]", "0.07*z[3]"], ["0.03*z[5]", "-0.08"]]);
        let zero = SuperMatrix::zeros(1, 1, alg());
        assert!(bch_rhs(&MatrixAlgebra, &x, &zero, &cfg).unwrap().identical(&x));
        let commuting = x.scale_real(-0.5);
        assert!(bch_rhs(&MatrixAlgebra, &x, &commuting, &cfg).unwrap().approx_eq(&x, &Tolerance::default()));
        let p = heis(0.2, 0.0, 0.0);
        let q = heis(0.0, 0.3, 0.0);
        let f = bch_rhs(&MatrixAlgebra, &p, &q, &cfg).unwrap();
        let pq = super_bracket(&p, &q).unwrap();
        assert!(f.approx_eq(&(&p + &pq.scale_real(0.5)), &Tolerance::new(1e-15, 0.0).unwrap()));
        let big = heis(0.6, 0.0, 0.0);
        assert!(matches!(bch_rhs(&MatrixAlgebra, &big, &q, &cfg), Err(AlgebraError::OutOfDomain(_))));
    }

    #[test]
    fn flow_examples() {
        let cfg = FlowConfig::default();
        let x = m11([["0.1 + 0.05*z[1,2]", "0.07*z[3]"], ["0.03*z[5]", "-0.08"]]);
        let zero = SuperMatrix::zeros(1, 1, alg());
        assert!(bch_flow(&MatrixAlgebra, &x, &zero, &cfg).unwrap().approx_eq(&x, &Tolerance::default()));
        let y = x.scale_real(0.7);
        let sum = &x + &y;
        assert!(bch_flow(&MatrixAlgebra, &x, &y, &cfg).unwrap().approx_eq(&sum, &Tolerance::default()));
        let p = heis(0.2, 0.0, 0.0);
        let q = heis(0.0, 0.3, 0.1);
        let mu = bch_flow(&MatrixAlgebra, &p, &q, &cfg).unwrap();
        let expected = &(&p + &q) + &super_bracket(&p, &q).unwrap().scale_real(0.5);
        assert!(mu.distance(&expected) < 1e-12);
        assert!(exp_identity_residual(&p, &q, &mu, &cfg).unwrap() < 1e-12);
        let odd = m11([["0", "1"], ["0", "0"]]).scale_real(0.1);
        assert!(matches!(bch_flow(&MatrixAlgebra, &odd, &zero, &cfg), Err(AlgebraError::Parity(_))));
    }

    #[test]
    fn flow_on_structure_constants_matches_matrices() {
        let cfg = FlowConfig { steps: 50, ..FlowConfig::default() };
        let basis = gl_basis(1, 1, alg());
        let gl = structure_constants(&basis).unwrap();
        let x = m11([["0.1 + 0.05*z[1,2]", "0.07*z[3]"], ["0.03*z[5]", "-0.08"]]);
        let y = m11([["-0.05", "0.02*z[4]"], ["0.06*z[6] + 0.01*z[1]", "0.1*z[3,4]"]]);
        let mu = bch_flow(&MatrixAlgebra, &x, &y, &cfg).unwrap();
        // element norms differ from the matrix norm only by signs of coefficients
        let cx = crate::superlie::gl_coordinates(&x);
        let cy = crate::superlie::gl_coordinates(&y);
        let mu_c = bch_flow(&gl, &cx, &cy, &cfg).unwrap();
        assert!(mu_c.to_matrix(&basis).unwrap().distance(&mu) < 1e-13);
    }

    #[test]
    fn oracle_orders() {
        let p = heis(0.2, 0.0, 0.0);
        let q = heis(0.0, 0.3, 0.0);
        assert!(bch_series_oracle(&MatrixAlgebra, &p, &q, 1).unwrap().identical(&(&p + &q)));
        let c = p.scale_real(2.0);
        assert!(bch_series_oracle(&MatrixAlgebra, &p, &c, 2).unwrap().approx_eq(&(&p + &c), &Tolerance::default()));
        assert!(bch_series_oracle(&MatrixAlgebra, &p, &q, 5).is_err());
        assert!(bch_series_oracle(&MatrixAlgebra, &p, &q, 0).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(FlowConfig { steps: 0, ..FlowConfig::default() }.validate().is_err());
        assert!(FlowConfig { series_tol: 0.0, ..FlowConfig::default() }.validate().is_err());
        let parsed: FlowConfig = serde_json::from_str(r#"{"steps": 10}"#).unwrap();
        assert_eq!(parsed.steps, 10);
        assert_eq!(parsed.radius_guard, 0.5);
    }
}
