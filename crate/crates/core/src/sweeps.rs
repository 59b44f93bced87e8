//! Seeded verification sweeps over random samples in a matrix preset.

use rand::Rng;
use serde::Serialize;

use crate::error::{AlgebraError, Result};
use crate::expbch::{bch_flow, bch_series_oracle, eta, exp_identity_residual, zeta, FlowConfig, MatrixAlgebra};
use crate::grassmann::{GrassmannAlgebra, Parity};
use crate::linear::SuperMatrix;
use crate::presets::Preset;
use crate::random::{random_body_matrix, random_even_matrix_within, random_matrix, seeded, with_norm, Sampling};
use crate::superlie::ad_matrix;
use crate::supergroup::{
    group_op_in_charts, livf_bracket_check, transition, transition_direct, Chart, GroupElement, LivfReport,
};

const TERMS: usize = 3;

fn shape_of(preset: Preset) -> Result<(usize, usize)> {
    preset
        .matrix_shape()
        .ok_or_else(|| AlgebraError::InvalidInput(format!("{preset} has no matrix representation")))
}

fn pick_parity<R: Rng + ?Sized>(rng: &mut R, q: usize) -> Parity {
    if q > 0 && rng.random_bool(0.5) {
        Parity::Odd
    } else {
        Parity::Even
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ExpIdentityReport {
    pub alg: String,
    pub samples: usize,
    pub max_norm: f64,
    pub steps: usize,
    pub max_residual: f64,
    pub pass: bool,
}

/// `‖exp(μ(X,Y)) − exp(X)exp(Y)‖` over random even `X`, `Y` with norms up to `max_norm`.
pub fn exp_identity_sweep(
    preset: Preset,
    algebra: GrassmannAlgebra,
    samples: usize,
    max_norm: f64,
    tol: f64,
    cfg: &FlowConfig,
    seed: u64,
) -> Result<ExpIdentityReport> {
    let (p, q) = shape_of(preset)?;
    let mut rng = seeded(seed);
    let shape = Sampling::new(algebra.budget() as u32, TERMS);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let x = random_even_matrix_within(&mut rng, algebra, p, q, shape, max_norm);
        let y = random_even_matrix_within(&mut rng, algebra, p, q, shape, max_norm);
        let mu = bch_flow(&MatrixAlgebra, &x, &y, cfg)?;
        let r = exp_identity_residual(&x, &y, &mu, cfg)?;
        worst = if r.is_nan() { f64::NAN } else { worst.max(r) };
    }
    Ok(ExpIdentityReport {
        alg: preset.to_string(),
        samples,
        max_norm,
        steps: cfg.steps,
        max_residual: worst,
        pass: worst <= tol,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleRatioReport {
    pub samples: usize,
    pub norm: f64,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub pass: bool,
}

/// Ratio of the order-4 oracle gap at norm `norm` to the gap at `norm/2`.
///
/// Samples carry a dense random body; soul-only samples are nilpotent enough
/// for the quintic terms to vanish.
pub fn oracle_ratio_sweep(
    preset: Preset,
    algebra: GrassmannAlgebra,
    samples: usize,
    norm: f64,
    window: (f64, f64),
    cfg: &FlowConfig,
    seed: u64,
) -> Result<OracleRatioReport> {
    let (p, q) = shape_of(preset)?;
    let mut rng = seeded(seed);
    let shape = Sampling::new(algebra.budget() as u32, TERMS);
    let gap = |x: &SuperMatrix, y: &SuperMatrix| -> Result<f64> {
        let flow = bch_flow(&MatrixAlgebra, x, y, cfg)?;
        Ok(flow.distance(&bch_series_oracle(&MatrixAlgebra, x, y, 4)?))
    };
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    let draw = |rng: &mut _| -> Result<SuperMatrix> {
        let soul = random_matrix(rng, algebra, p, q, Parity::Even, shape);
        Ok(with_norm(&random_body_matrix(rng, algebra, p, q).checked_add(&soul)?, norm))
    };
    for _ in 0..samples {
        let x = draw(&mut rng)?;
        let y = draw(&mut rng)?;
        let ratio = gap(&x, &y)? / gap(&x.scale_real(0.5), &y.scale_real(0.5))?;
        lo = lo.min(ratio);
        hi = hi.max(ratio);
    }
    let pass = samples > 0 && lo >= window.0 && hi <= window.1;
    Ok(OracleRatioReport { samples, norm, min_ratio: lo, max_ratio: hi, pass })
}

#[derive(Clone, Debug, Serialize)]
pub struct ZetaEtaReport {
    pub samples: usize,
    pub max_ad_norm: f64,
    pub max_residual: f64,
    pub pass: bool,
}

/// `‖ζ(X)η(X) − I‖` with `‖ad_X‖ ≤ max_ad_norm`.
pub fn zeta_eta_sweep(
    preset: Preset,
    algebra: GrassmannAlgebra,
    samples: usize,
    max_ad_norm: f64,
    tol: f64,
    cfg: &FlowConfig,
    seed: u64,
) -> Result<ZetaEtaReport> {
    let (p, q) = shape_of(preset)?;
    let lie = preset.lie_algebra(algebra)?;
    let mut rng = seeded(seed);
    let shape = Sampling::new(algebra.budget() as u32, TERMS);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let x = preset.coordinates(&random_matrix(&mut rng, algebra, p, q, Parity::Even, shape))?;
        let ad = ad_matrix(lie.constants(), &x)?;
        let n = ad.norm();
        let ad = if n > 0.0 { ad.scale_real(max_ad_norm * rng.random_range(0.05..=1.0) / n) } else { ad };
        let prod = zeta(&ad, cfg)?.checked_mul(&eta(&ad, cfg)?)?;
        let id = SuperMatrix::identity(ad.p(), ad.q(), algebra);
        worst = worst.max(prod.distance(&id));
    }
    Ok(ZetaEtaReport { samples, max_ad_norm, max_residual: worst, pass: worst <= tol })
}

/// [`livf_bracket_check`] on independent random `(A, M, N)` triples.
pub fn livf_sweep(preset: Preset, algebra: GrassmannAlgebra, samples: usize, seed: u64) -> Result<LivfReport> {
    let (p, q) = shape_of(preset)?;
    let budget = algebra.budget() as u32;
    if budget < 3 {
        return Err(AlgebraError::InvalidInput("the lift check needs a budget of at least 3".into()));
    }
    let shape = Sampling::new(budget - 2, TERMS);
    let mut rng = seeded(seed);
    let mut total = LivfReport {
        samples: 0,
        derivation_residual: 0.0,
        lifted_residual: 0.0,
        max_residual: 0.0,
        pass: true,
    };
    for _ in 0..samples {
        let a = random_matrix(&mut rng, algebra, p, q, Parity::Even, shape);
        let pm = pick_parity(&mut rng, q);
        let pn = pick_parity(&mut rng, q);
        let m = random_matrix(&mut rng, algebra, p, q, pm, shape);
        let n = random_matrix(&mut rng, algebra, p, q, pn, shape);
        let r = livf_bracket_check(&m, &n, std::slice::from_ref(&a))?;
        total.samples += 1;
        total.derivation_residual = total.derivation_residual.max(r.derivation_residual);
        total.lifted_residual = total.lifted_residual.max(r.lifted_residual);
        total.max_residual = total.max_residual.max(r.max_residual);
        total.pass &= r.pass;
    }
    Ok(total)
}

#[derive(Clone, Debug, Serialize)]
pub struct ChartReport {
    pub alg: String,
    pub samples: usize,
    pub transition_residual: f64,
    pub group_op_residual: f64,
    pub max_residual: f64,
    pub pass: bool,
}

/// Transition formula against direct composition, and the group operation
/// read in charts, at random centers near the identity.
pub fn chart_sweep(
    preset: Preset,
    algebra: GrassmannAlgebra,
    samples: usize,
    tol: f64,
    cfg: &FlowConfig,
    seed: u64,
) -> Result<ChartReport> {
    let (p, q) = shape_of(preset)?;
    let mut rng = seeded(seed);
    let shape = Sampling::new(algebra.budget() as u32, TERMS);
    let near = |rng: &mut _, base: &SuperMatrix, size: f64| -> Result<GroupElement> {
        let step = random_even_matrix_within(rng, algebra, p, q, shape, size);
        GroupElement::new(base.checked_mul(&crate::expbch::exp_matrix(&step, cfg)?)?)
    };
    let id = SuperMatrix::identity(p, q, algebra);
    let mut report = ChartReport {
        alg: preset.to_string(),
        samples,
        transition_residual: 0.0,
        group_op_residual: 0.0,
        max_residual: 0.0,
        pass: true,
    };
    for _ in 0..samples {
        let x = near(&mut rng, &id, 0.1)?;
        let y = near(&mut rng, x.matrix(), 0.1)?;
        let (cx, cy) = (Chart::new(x.clone())?, Chart::new(y.clone())?);
        let coords = random_even_matrix_within(&mut rng, algebra, p, q, shape, 0.15);
        let a = transition(&cx, &cy, &coords, cfg)?;
        let b = transition_direct(&cx, &cy, &coords, cfg)?;
        report.transition_residual = report.transition_residual.max(a.distance(&b));

        let xc = random_even_matrix_within(&mut rng, algebra, p, q, shape, 0.15);
        let yc = random_even_matrix_within(&mut rng, algebra, p, q, shape, 0.15);
        let (lhs, rhs) = group_op_in_charts(&x, &y, &xc, &yc, cfg)?;
        report.group_op_residual = report.group_op_residual.max(lhs.distance(&rhs));
    }
    report.max_residual = report.transition_residual.max(report.group_op_residual);
    report.pass = report.max_residual <= tol;
    Ok(report)
}
