//! Matrix super Lie groups: units of `gl(p|q, Λ)`, the Adjoint action,
//! logarithmic charts and their transitions, and the bracket of left-invariant
//! vector fields.

use serde::Serialize;

use crate::error::{AlgebraError, Result};
use crate::expbch::{bch_flow, exp_matrix, log_matrix, FlowConfig, MatrixAlgebra};
use crate::grassmann::{MultiIndex, Parity, Supernumber};
use crate::linear::SuperMatrix;
use crate::superlie::super_bracket;

/// Default chart radius in the matrix norm.
pub const CHART_RADIUS: f64 = 0.4;

/// Even supermatrix with invertible body.
#[derive(Clone, Debug)]
pub struct GroupElement {
    matrix: SuperMatrix,
}

impl GroupElement {
    pub fn new(matrix: SuperMatrix) -> Result<Self> {
        if !matrix.is_even() {
            return Err(AlgebraError::NotInGroup("matrix is not even".into()));
        }
        match matrix.inverse() {
            Ok(_) => Ok(GroupElement { matrix }),
            Err(AlgebraError::NotInvertible { body }) => Err(AlgebraError::NotInGroup(format!(
                "body is singular (smallest singular value {body:e})"
            ))),
            Err(e) => Err(e),
        }
    }

    pub fn identity_like(m: &SuperMatrix) -> Self {
        GroupElement { matrix: SuperMatrix::identity(m.p(), m.q(), m.algebra()) }
    }

    pub fn matrix(&self) -> &SuperMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> SuperMatrix {
        self.matrix
    }
}

pub fn group_mul(g: &GroupElement, h: &GroupElement) -> Result<GroupElement> {
    Ok(GroupElement { matrix: g.matrix.checked_mul(&h.matrix)? })
}

/// Body inverse completed by the terminating soul series.
pub fn group_inv(g: &GroupElement) -> Result<GroupElement> {
    Ok(GroupElement { matrix: g.matrix.inverse()? })
}

/// `Ad_g X = g X g⁻¹`.
pub fn adjoint(g: &GroupElement, x: &SuperMatrix) -> Result<SuperMatrix> {
    if !x.is_even() {
        return Err(AlgebraError::Parity("Ad acts on even algebra elements".into()));
    }
    let inv = g.matrix.inverse()?;
    g.matrix.checked_mul(x)?.checked_mul(&inv)
}

/// `κ^x(y) = log(x⁻¹y)` on `{y : ‖κ^x(y)‖ ≤ radius}`.
#[derive(Clone, Debug)]
pub struct Chart {
    center: GroupElement,
    center_inv: SuperMatrix,
    radius: f64,
}

impl Chart {
    pub fn new(center: GroupElement) -> Result<Self> {
        Self::with_radius(center, CHART_RADIUS)
    }

    pub fn with_radius(center: GroupElement, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(AlgebraError::InvalidInput("chart radius must be positive".into()));
        }
        let center_inv = center.matrix.inverse()?;
        Ok(Chart { center, center_inv, radius })
    }

    pub fn center(&self) -> &GroupElement {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }
}

pub fn chart_apply(c: &Chart, y: &GroupElement, cfg: &FlowConfig) -> Result<SuperMatrix> {
    let local = c.center_inv.checked_mul(&y.matrix)?;
    let coords = log_matrix(&local, cfg)?;
    let norm = coords.norm();
    if norm > c.radius {
        return Err(AlgebraError::OutOfDomain(format!(
            "point has chart norm {norm} beyond radius {}",
            c.radius
        )));
    }
    Ok(coords)
}

/// `x · exp(X)`.
pub fn chart_inverse(c: &Chart, x: &SuperMatrix, cfg: &FlowConfig) -> Result<GroupElement> {
    if !x.is_even() {
        return Err(AlgebraError::Parity("chart coordinates must be even".into()));
    }
    let norm = x.norm();
    if norm > c.radius {
        return Err(AlgebraError::OutOfDomain(format!(
            "coordinates of norm {norm} exceed the chart radius {}",
            c.radius
        )));
    }
    Ok(GroupElement { matrix: c.center.matrix.checked_mul(&exp_matrix(x, cfg)?)? })
}

/// Common point of two charts: `x·exp(½κ^x(y))` with its coordinates in both.
pub fn common_point(cx: &Chart, cy: &Chart, cfg: &FlowConfig) -> Result<(SuperMatrix, SuperMatrix)> {
    let to_y = chart_apply(cx, &cy.center, cfg)
        .map_err(|e| AlgebraError::OutOfDomain(format!("charts do not overlap: {e}")))?;
    let x_o = to_y.scale_real(0.5);
    let point = chart_inverse(cx, &x_o, cfg)?;
    let y_o = chart_apply(cy, &point, cfg)
        .map_err(|e| AlgebraError::OutOfDomain(format!("charts do not overlap: {e}")))?;
    Ok((x_o, y_o))
}

/// `κ^y ∘ (κ^x)⁻¹` through the group law: `μ(μ(Y_o, −X_o), X)`.
pub fn transition(cx: &Chart, cy: &Chart, x: &SuperMatrix, cfg: &FlowConfig) -> Result<SuperMatrix> {
    if !x.is_even() {
        return Err(AlgebraError::Parity("chart coordinates must be even".into()));
    }
    if x.norm() > cx.radius {
        return Err(AlgebraError::OutOfDomain("coordinates outside the source chart".into()));
    }
    let (x_o, y_o) = common_point(cx, cy, cfg)?;
    let shift = bch_flow(&MatrixAlgebra, &y_o, &x_o.scale_real(-1.0), cfg)?;
    bch_flow(&MatrixAlgebra, &shift, x, cfg)
}

/// `κ^y((κ^x)⁻¹(X))` computed directly.
pub fn transition_direct(cx: &Chart, cy: &Chart, x: &SuperMatrix, cfg: &FlowConfig) -> Result<SuperMatrix> {
    chart_apply(cy, &chart_inverse(cx, x, cfg)?, cfg)
}

/// Both sides of `κ^{xy⁻¹}(x e^X (y e^Y)⁻¹) = Ad_y μ(X, −Y)`.
pub fn group_op_in_charts(
    x: &GroupElement,
    y: &GroupElement,
    xc: &SuperMatrix,
    yc: &SuperMatrix,
    cfg: &FlowConfig,
) -> Result<(SuperMatrix, SuperMatrix)> {
    let y_inv = group_inv(y)?;
    let target = Chart::with_radius(group_mul(x, &y_inv)?, f64::INFINITY)?;
    let gx = chart_inverse(&Chart::new(x.clone())?, xc, cfg)?;
    let gy = chart_inverse(&Chart::new(y.clone())?, yc, cfg)?;
    let lhs = chart_apply(&target, &group_mul(&gx, &group_inv(&gy)?)?, cfg)?;
    let mu = bch_flow(&MatrixAlgebra, xc, &yc.scale_real(-1.0), cfg)?;
    let rhs = adjoint(y, &mu)?;
    Ok((lhs, rhs))
}

/// Outcome of [`livf_bracket_check`].
#[derive(Clone, Debug, Serialize)]
pub struct LivfReport {
    pub samples: usize,
    /// Graded commutator of the derivations against `A·[M,N]`.
    pub derivation_residual: f64,
    /// Commutator of the even lifts `θ₁M`, `θ₂N` against the lifted bracket.
    pub lifted_residual: f64,
    pub max_residual: f64,
    pub pass: bool,
}

/// Tolerance of [`livf_bracket_check`].
pub const LIVF_TOL: f64 = 1e-12;

/// `X^P X^Q` applied to the coordinate functions `x_kl` at `A`:
/// `Σ_ij (AP)_ij ∂_ij Σ_r x_kr Q_rl`.
fn derivation_pair(a: &SuperMatrix, p: &SuperMatrix, q: &SuperMatrix) -> Result<SuperMatrix> {
    let ap = a.checked_mul(p)?;
    let n = a.dim();
    let algebra = a.algebra();
    let mut out = SuperMatrix::zeros(a.p(), a.q(), algebra);
    for k in 0..n {
        for l in 0..n {
            // ∂_ij x_kr = δ_ik δ_jr leaves the j = r terms of row k
            let mut acc = algebra.zero();
            for j in 0..n {
                acc = &acc + &(ap.get(k, j) * q.get(j, l));
            }
            out.set(k, l, acc);
        }
    }
    Ok(out)
}

/// Vector-field commutator of the linear even fields `A ↦ AP`, `A ↦ AQ`:
/// `D V_Q(A)[V_P(A)] − D V_P(A)[V_Q(A)]`, the derivatives by central difference.
fn linear_field_commutator(a: &SuperMatrix, p: &SuperMatrix, q: &SuperMatrix) -> Result<SuperMatrix> {
    let field = |m: &SuperMatrix, x: &SuperMatrix| x.checked_mul(m);
    let derivative = |m: &SuperMatrix, at: &SuperMatrix, dir: &SuperMatrix| -> Result<SuperMatrix> {
        let t = 0.5;
        let plus = field(m, &at.checked_add(&dir.scale_real(t))?)?;
        let minus = field(m, &at.checked_sub(&dir.scale_real(t))?)?;
        Ok(plus.checked_sub(&minus)?.scale_real(1.0 / (2.0 * t)))
    };
    let vp = field(p, a)?;
    let vq = field(q, a)?;
    derivative(q, a, &vp)?.checked_sub(&derivative(p, a, &vq)?)
}

/// Checks `[X^M, X^N] = X^{[M,N]}` at each sample `A` along two routes.
pub fn livf_bracket_check(m: &SuperMatrix, n: &SuperMatrix, samples: &[SuperMatrix]) -> Result<LivfReport> {
    let pm = m.parity().ok_or_else(|| AlgebraError::Parity("M is not pure".into()))?;
    let pn = n.parity().ok_or_else(|| AlgebraError::Parity("N is not pure".into()))?;
    let algebra = m.algebra();
    let budget = algebra.budget() as u32;
    let used = samples
        .iter()
        .map(SuperMatrix::max_label)
        .chain([m.max_label(), n.max_label()])
        .max()
        .unwrap_or(0);
    if budget < 2 || used > budget - 2 {
        return Err(AlgebraError::Refused(format!(
            "the lift needs generators {} and {} free",
            budget.saturating_sub(1),
            budget
        )));
    }
    let theta1 = algebra.generator(budget - 1);
    let theta2 = algebra.generator(budget);
    let lift = |x: &SuperMatrix, parity: Parity, theta: &Supernumber| -> Result<(SuperMatrix, Supernumber)> {
        match parity {
            Parity::Even => Ok((x.clone(), algebra.one())),
            Parity::Odd => Ok((x.left_scale(theta)?, theta.clone())),
        }
    };
    let (lm, s1) = lift(m, pm, &theta1)?;
    let (ln, s2) = lift(n, pn, &theta2)?;
    // [s1·M, s2·N] = (−1)^{ε(s2)ε(M)} s1 s2 [M, N]
    let sign = pn.sign_with(pm);
    let scalar = (&s1 * &s2).scale_real(sign);
    let bracket = super_bracket(m, n)?;

    let mut report = LivfReport {
        samples: samples.len(),
        derivation_residual: 0.0,
        lifted_residual: 0.0,
        max_residual: 0.0,
        pass: true,
    };
    for a in samples {
        if !a.is_even() {
            return Err(AlgebraError::Parity("sample points must be even".into()));
        }
        let expected = a.checked_mul(&bracket)?;
        let derivations = derivation_pair(a, m, n)?
            .checked_sub(&derivation_pair(a, n, m)?.scale_real(pm.sign_with(pn)))?;
        report.derivation_residual = report.derivation_residual.max(derivations.distance(&expected));
        let lifted = linear_field_commutator(a, &lm, &ln)?;
        let lifted_expected = expected.left_scale(&scalar)?;
        report.lifted_residual = report.lifted_residual.max(lifted.distance(&lifted_expected));
        // the lifted commutator must factor through the probe generators
        let mask = s1.support().bits() | s2.support().bits();
        for entry in lifted.entries() {
            let (_, rest) = entry.left_divide(MultiIndex::from_bits(mask));
            report.lifted_residual = report.lifted_residual.max(rest.norm());
        }
    }
    report.max_residual = report.derivation_residual.max(report.lifted_residual);
    report.pass = report.max_residual <= LIVF_TOL;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grassmann::{GrassmannAlgebra, Tolerance};
    use crate::random::{random_matrix, seeded, with_norm, Sampling};

    fn alg() -> GrassmannAlgebra {
        GrassmannAlgebra::real(6)
    }

    fn sn(text: &str) -> Supernumber {
        Supernumber::parse(text, alg()).unwrap()
    }

    fn m11(rows: [[&str; 2]; 2]) -> SuperMatrix {
        SuperMatrix::new(1, 1, rows.iter().map(|r| r.iter().map(|t| sn(t)).collect()).collect()).unwrap()
    }

    fn near_identity(seed: u64, size: f64) -> GroupElement {
        let mut rng = seeded(seed);
        let x = with_norm(&random_matrix(&mut rng, alg(), 1, 1, Parity::Even, Sampling::new(4, 3)), size);
        GroupElement::new(exp_matrix(&x, &FlowConfig::default()).unwrap()).unwrap()
    }

    #[test]
    fn group_examples() {
        let g = GroupElement::new(m11([["2 + z[1,2]", "z[3]"], ["z[4]", "1"]])).unwrap();
        let id = GroupElement::identity_like(g.matrix());
        assert!(group_mul(&g, &id).unwrap().matrix().identical(g.matrix()));
        let n = m11([["0", "z[3]"], ["0", "0"]]);
        assert!((&n * &n).is_zero());
        let i_plus = GroupElement::new(&SuperMatrix::identity(1, 1, alg()) + &n).unwrap();
        let inv = group_inv(&i_plus).unwrap();
        assert!(inv.matrix().identical(&(&SuperMatrix::identity(1, 1, alg()) - &n)));
        let prod = group_mul(&g, &group_inv(&g).unwrap()).unwrap();
        assert!(prod.matrix().distance(id.matrix()) <= 1e-12);
        assert!(matches!(
            GroupElement::new(m11([["z[1,2]", "0"], ["0", "1"]])),
            Err(AlgebraError::NotInGroup(_))
        ));
        assert!(matches!(GroupElement::new(m11([["1", "1"], ["0", "1"]])), Err(AlgebraError::NotInGroup(_))));
    }

    #[test]
    fn adjoint_examples() {
        let g = near_identity(1, 0.3);
        let x = m11([["0.1 + z[1,2]", "z[3]"], ["z[4]", "-0.2"]]);
        let id = GroupElement::identity_like(&x);
        assert!(adjoint(&id, &x).unwrap().approx_eq(&x, &Tolerance::default()));
        assert!(adjoint(&g, &SuperMatrix::zeros(1, 1, alg())).unwrap().is_zero());
        // derivative of Ad(exp(tY)) at 0
        let cfg = FlowConfig::default();
        let y = m11([["0.3", "0.2*z[5]"], ["z[6]", "0.1 + z[1,5]"]]);
        let t = 1e-4;
        let plus = adjoint(&GroupElement::new(exp_matrix(&y.scale_real(t), &cfg).unwrap()).unwrap(), &x).unwrap();
        let minus = adjoint(&GroupElement::new(exp_matrix(&y.scale_real(-t), &cfg).unwrap()).unwrap(), &x).unwrap();
        let d = (&plus - &minus).scale_real(1.0 / (2.0 * t));
        assert!(d.distance(&super_bracket(&y, &x).unwrap()) < 1e-6);
    }

    #[test]
    fn chart_examples() {
        let cfg = FlowConfig::default();
        let x = near_identity(2, 0.2);
        let c = Chart::new(x.clone()).unwrap();
        assert!(chart_apply(&c, &x, &cfg).unwrap().norm() < 1e-14);
        let zero = SuperMatrix::zeros(1, 1, alg());
        assert!(chart_inverse(&c, &zero, &cfg).unwrap().matrix().distance(x.matrix()) < 1e-15);
        let coords = with_norm(&random_matrix(&mut seeded(9), alg(), 1, 1, Parity::Even, Sampling::new(4, 3)), 0.3);
        let y = chart_inverse(&c, &coords, &cfg).unwrap();
        assert!(chart_apply(&c, &y, &cfg).unwrap().distance(&coords) < 1e-10);
        assert!(chart_inverse(&c, &coords.scale_real(2.0), &cfg).is_err());
    }

    #[test]
    fn transition_examples() {
        let cfg = FlowConfig::default();
        let x = near_identity(3, 0.1);
        let y = near_identity(4, 0.1);
        let cx = Chart::new(x).unwrap();
        let cy = Chart::new(y).unwrap();
        let coords = with_norm(&random_matrix(&mut seeded(5), alg(), 1, 1, Parity::Even, Sampling::new(4, 3)), 0.15);
        let same = transition(&cx, &cx, &coords, &cfg).unwrap();
        assert!(same.distance(&coords) < 1e-12);
        let (x_o, y_o) = common_point(&cx, &cy, &cfg).unwrap();
        assert!(transition(&cx, &cy, &x_o, &cfg).unwrap().distance(&y_o) < 1e-10);
        let formula = transition(&cx, &cy, &coords, &cfg).unwrap();
        let direct = transition_direct(&cx, &cy, &coords, &cfg).unwrap();
        assert!(formula.distance(&direct) < 1e-8, "{}", formula.distance(&direct));
        let far = Chart::new(GroupElement::new(SuperMatrix::identity(1, 1, alg()).scale_real(3.0)).unwrap()).unwrap();
        assert!(matches!(transition(&cx, &far, &coords, &cfg), Err(AlgebraError::OutOfDomain(_))));
    }

    #[test]
    fn group_operation_in_charts() {
        let cfg = FlowConfig::default();
        let x = near_identity(6, 0.1);
        let y = near_identity(7, 0.1);
        let mut rng = seeded(8);
        let xc = with_norm(&random_matrix(&mut rng, alg(), 1, 1, Parity::Even, Sampling::new(4, 3)), 0.15);
        let yc = with_norm(&random_matrix(&mut rng, alg(), 1, 1, Parity::Even, Sampling::new(4, 3)), 0.15);
        let (lhs, rhs) = group_op_in_charts(&x, &y, &xc, &yc, &cfg).unwrap();
        assert!(lhs.distance(&rhs) < 1e-8, "{}", lhs.distance(&rhs));
    }

    #[test]
    fn livf_examples() {
        let e = |i, j| SuperMatrix::unit(1, 1, alg(), i, j);
        let id = SuperMatrix::identity(1, 1, alg());
        let r = livf_bracket_check(&e(0, 1), &e(1, 0), std::slice::from_ref(&id)).unwrap();
        assert!(r.pass, "{r:?}");
        let m = m11([["1 + z[1,2]", "z[3]"], ["z[4]", "2"]]);
        let r = livf_bracket_check(&m, &m, std::slice::from_ref(&id)).unwrap();
        assert_eq!(r.max_residual, 0.0);
        let mut rng = seeded(11);
        let shape = Sampling::new(4, 4);
        let samples: Vec<SuperMatrix> = (0..5).map(|_| random_matrix(&mut rng, alg(), 1, 1, Parity::Even, shape)).collect();
        for (pm, pn) in [(Parity::Odd, Parity::Odd), (Parity::Even, Parity::Odd), (Parity::Odd, Parity::Even)] {
            let m = random_matrix(&mut rng, alg(), 1, 1, pm, shape);
            let n = random_matrix(&mut rng, alg(), 1, 1, pn, shape);
            let r = livf_bracket_check(&m, &n, &samples).unwrap();
            assert!(r.pass, "{pm:?} {pn:?}: {r:?}");
        }
        let crowded = m11([["z[5,6]", "0"], ["0", "0"]]);
        assert!(matches!(livf_bracket_check(&crowded, &m, &samples), Err(AlgebraError::Refused(_))));
    }
}
