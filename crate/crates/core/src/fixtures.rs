//! Sample maps for the G-smoothness checker: polynomial superfunctions, the
//! BCH flow in its second argument, and the (non-smooth) body map.

use crate::error::{AlgebraError, Result};
use crate::expbch::{bch_flow, FlowConfig};
use crate::grassmann::{GrassmannAlgebra, Supernumber};
use crate::linear::SuperVector;
use crate::presets::Preset;
use crate::superdiff::SampledMap;
use crate::superlie::AlgebraElement;

/// A map together with the base point it is checked at.
pub struct Fixture {
    pub name: &'static str,
    pub map: SampledMap,
    pub point: SuperVector,
}

pub const POLYNOMIAL_NAMES: [&str; 5] = ["square", "x-theta", "cubic-pair", "linear", "mixed"];

fn sn(text: &str, alg: GrassmannAlgebra) -> Supernumber {
    Supernumber::parse(text, alg).expect("fixture literal")
}

fn point(p: usize, q: usize, entries: &[&str], alg: GrassmannAlgebra) -> Result<SuperVector> {
    SuperVector::new(p, q, entries.iter().map(|t| sn(t, alg)).collect())
}

fn check_budget(alg: GrassmannAlgebra) -> Result<()> {
    if alg.budget() < 8 {
        return Err(AlgebraError::InvalidInput("fixtures need a budget of at least 8".into()));
    }
    Ok(())
}

/// One of [`POLYNOMIAL_NAMES`], `body`, or `bch`.
pub fn fixture(name: &str, alg: GrassmannAlgebra) -> Result<Fixture> {
    check_budget(alg)?;
    let fx = match name {
        "square" => Fixture {
            name: "square",
            map: SampledMap::new((1, 0), (1, 0), alg, 3, |x| {
                let z = x.entry(0);
                SuperVector::new(1, 0, vec![z * z])
            }),
            point: point(1, 0, &["0.8 + z[1,2]"], alg)?,
        },
        "x-theta" => Fixture {
            name: "x-theta",
            map: SampledMap::new((1, 1), (0, 1), alg, 3, |v| SuperVector::new(0, 1, vec![v.entry(0) * v.entry(1)])),
            point: point(1, 1, &["0.4 + z[1,2]", "z[3] - 2*z[1]"], alg)?,
        },
        // θ1θ2 + x³
        "cubic-pair" => Fixture {
            name: "cubic-pair",
            map: SampledMap::new((1, 2), (1, 0), alg, 3, |v| {
                let x = v.entry(0);
                SuperVector::new(1, 0, vec![&(v.entry(1) * v.entry(2)) + &(&(x * x) * x)])
            }),
            point: point(1, 2, &["-0.5 + z[2,3]", "z[1]", "z[4] + 0.5*z[1,2,3]"], alg)?,
        },
        "linear" => {
            let l = [
                [sn("2 + z[1,2]", alg), sn("z[3]", alg)],
                [sn("z[2]", alg), sn("-1 + z[1,3]", alg)],
            ];
            Fixture {
                name: "linear",
                map: SampledMap::new((1, 1), (1, 1), alg, 3, move |x| {
                    let row = |i: usize| &(&l[i][0] * x.entry(0)) + &(&l[i][1] * x.entry(1));
                    SuperVector::new(1, 1, vec![row(0), row(1)])
                })
                .with_constants_label(3),
                point: point(1, 1, &["0.3 + z[1,4]", "z[2] - z[1,3,4]"], alg)?,
            }
        }
        // (x1 x2 + 0.5 x1², x2 θ + ζ1 x1)
        "mixed" => {
            let odd = alg.generator(1);
            Fixture {
                name: "mixed",
                map: SampledMap::new((2, 1), (1, 1), alg, 3, move |v| {
                    let (x1, x2, t) = (v.entry(0), v.entry(1), v.entry(2));
                    let even = &(x1 * x2) + &(x1 * x1).scale_real(0.5);
                    let odd_out = &(x2 * t) + &(&odd * x1);
                    SuperVector::new(1, 1, vec![even, odd_out])
                })
                .with_constants_label(1),
                point: point(2, 1, &["0.2 + z[1,2]", "-0.7", "z[3] + z[1,2,4]"], alg)?,
            }
        }
        "body" => Fixture {
            name: "body",
            map: SampledMap::new((1, 0), (1, 0), alg, 2, |v| {
                let a = v.entry(0).algebra();
                SuperVector::new(1, 0, vec![a.scalar(v.entry(0).body())])
            }),
            point: point(1, 0, &["0.8 + z[1,2]"], alg)?,
        },
        "bch" => bch_fixture(alg, FlowConfig { steps: 40, ..FlowConfig::default() })?,
        other => return Err(AlgebraError::InvalidInput(format!("unknown fixture '{other}'"))),
    };
    Ok(fx)
}

/// `Y ↦ μ(X₀, Y)` on `gl(1|1)` coordinates, at a point of norm about 0.1.
pub fn bch_fixture(alg: GrassmannAlgebra, cfg: FlowConfig) -> Result<Fixture> {
    check_budget(alg)?;
    let lie = Preset::Gl11.lie_algebra(alg)?;
    let (p, q) = (lie.p(), lie.q());
    let x0 = AlgebraElement::new(
        p,
        q,
        vec![
            sn("0.03 + 0.01*z[1,2]", alg),
            sn("-0.02", alg),
            sn("0.02*z[1]", alg),
            sn("0.01*z[2] - 0.01*z[3]", alg),
        ],
    )?;
    let label = x0.max_label();
    let map = SampledMap::new((p, q), (p, q), alg, 2, move |v| {
        let y = AlgebraElement::new(p, q, v.entries().to_vec())?;
        let mu = bch_flow(&lie, &x0, &y, &cfg)?;
        SuperVector::new(p, q, mu.coeffs().to_vec())
    })
    .with_constants_label(label);
    Ok(Fixture {
        name: "bch",
        map,
        point: point(p, q, &["0.02 - 0.01*z[3,4]", "0.01", "0.01*z[4]", "-0.02*z[2]"], alg)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::superdiff::{check_g_multilinear, DEFAULT_TOL};

    #[test]
    fn polynomials_pass_body_fails() {
        let alg = GrassmannAlgebra::real(8);
        for name in POLYNOMIAL_NAMES {
            let fx = fixture(name, alg).unwrap();
            for k in 1..=2 {
                let r = check_g_multilinear(&fx.map, &fx.point, k, 5, DEFAULT_TOL, 11).unwrap();
                assert!(r.pass, "{name} order {k}: {r:?}");
            }
        }
        let body = fixture("body", alg).unwrap();
        let r = check_g_multilinear(&body.map, &body.point, 1, 5, DEFAULT_TOL, 11).unwrap();
        assert!(!r.pass && !r.refused);
        assert!(fixture("nope", alg).is_err());
        assert!(fixture("square", GrassmannAlgebra::real(4)).is_err());
    }
}
