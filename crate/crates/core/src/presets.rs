//! Built-in algebras: `gl(1|1)`, `gl(2|1)`, the Heisenberg algebra of strictly
//! upper triangular 3×3 matrices, and abelian `(p|q)` algebras.

use std::fmt;
use std::str::FromStr;

use crate::error::{AlgebraError, Result};
use crate::grassmann::GrassmannAlgebra;
use crate::linear::SuperMatrix;
use crate::superlie::{gl_basis, gl_coordinates, structure_constants, AlgebraElement, SuperLieAlgebra};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    Gl11,
    Gl21,
    Heisenberg,
    Abelian { p: usize, q: usize },
}

impl FromStr for Preset {
    type Err = AlgebraError;

    /// `gl11`, `gl21`, `heisenberg`, or `abelian(p,q)`.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        match t.as_str() {
            "gl11" => return Ok(Preset::Gl11),
            "gl21" => return Ok(Preset::Gl21),
            "heisenberg" => return Ok(Preset::Heisenberg),
            _ => {}
        }
        let inner = t
            .strip_prefix("abelian(")
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(|| AlgebraError::InvalidInput(format!("unknown algebra preset '{s}'")))?;
        let parts: Vec<&str> = inner.split(',').map(str::trim).collect();
        if parts.len() != 2 {
            return Err(AlgebraError::InvalidInput("abelian preset needs abelian(p,q)".into()));
        }
        let num = |x: &str| {
            x.parse::<usize>()
                .map_err(|_| AlgebraError::InvalidInput(format!("bad dimension '{x}'")))
        };
        let (p, q) = (num(parts[0])?, num(parts[1])?);
        if p + q == 0 {
            return Err(AlgebraError::InvalidInput("abelian preset needs p + q > 0".into()));
        }
        Ok(Preset::Abelian { p, q })
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Preset::Gl11 => write!(f, "gl11"),
            Preset::Gl21 => write!(f, "gl21"),
            Preset::Heisenberg => write!(f, "heisenberg"),
            Preset::Abelian { p, q } => write!(f, "abelian({p},{q})"),
        }
    }
}

impl Preset {
    /// Grading `(p, q)` of the defining matrices, when the preset has them.
    pub fn matrix_shape(&self) -> Option<(usize, usize)> {
        match self {
            Preset::Gl11 => Some((1, 1)),
            Preset::Gl21 => Some((2, 1)),
            Preset::Heisenberg => Some((3, 0)),
            Preset::Abelian { .. } => None,
        }
    }

    /// Matrix basis, evens first.
    pub fn matrix_basis(&self, algebra: GrassmannAlgebra) -> Option<Vec<SuperMatrix>> {
        match self {
            Preset::Gl11 => Some(gl_basis(1, 1, algebra)),
            Preset::Gl21 => Some(gl_basis(2, 1, algebra)),
            Preset::Heisenberg => Some(vec![
                SuperMatrix::unit(3, 0, algebra, 0, 1),
                SuperMatrix::unit(3, 0, algebra, 1, 2),
                SuperMatrix::unit(3, 0, algebra, 0, 2),
            ]),
            Preset::Abelian { .. } => None,
        }
    }

    pub fn lie_algebra(&self, algebra: GrassmannAlgebra) -> Result<SuperLieAlgebra> {
        match self {
            Preset::Abelian { p, q } => Ok(SuperLieAlgebra::abelian(*p, *q, algebra)),
            _ => structure_constants(&self.matrix_basis(algebra).expect("matrix preset")),
        }
    }

    /// Coordinates of a matrix in this preset's basis.
    pub fn coordinates(&self, m: &SuperMatrix) -> Result<AlgebraElement> {
        match self {
            Preset::Gl11 | Preset::Gl21 => Ok(gl_coordinates(m)),
            Preset::Heisenberg => {
                let n = m.dim();
                for i in 0..n {
                    for j in 0..=i {
                        if !m.get(i, j).is_zero() {
                            return Err(AlgebraError::InvalidInput(
                                "Heisenberg elements are strictly upper triangular".into(),
                            ));
                        }
                    }
                }
                AlgebraElement::new(3, 0, vec![m.get(0, 1).clone(), m.get(1, 2).clone(), m.get(0, 2).clone()])
            }
            Preset::Abelian { .. } => Err(AlgebraError::InvalidInput("abelian presets have no matrices".into())),
        }
    }
}
