//! Text form of supernumbers: `2 - 3*z[1] + 0.5*z[1,2]`.
//!
//! Coefficients are real literals, imaginary literals such as `2.5i`, or
//! parenthesised complex values `(1-2i)`. A monomial `z[i1,...,ik]` must list
//! strictly increasing labels within the generator budget.

use num_complex::Complex64;

use crate::error::{AlgebraError, Result};
use crate::grassmann::{GrassmannAlgebra, MultiIndex, Supernumber};

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn error<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(AlgebraError::Parse {
            position: self.pos,
            message: message.into(),
        })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, byte: u8) -> bool {
        self.skip_ws();
        if self.peek() == Some(byte) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, byte: u8) -> Result<()> {
        if self.eat(byte) {
            Ok(())
        } else {
            self.error(format!("expected '{}'", byte as char))
        }
    }

    fn number(&mut self) -> Result<f64> {
        self.skip_ws();
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() || c == b'.' {
                self.pos += 1;
            } else {
                break;
            }
        }
        if self.pos == start {
            return self.error("expected a number");
        }
        if matches!(self.peek(), Some(b'e') | Some(b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.peek(), Some(b'+') | Some(b'-')) {
                self.pos += 1;
            }
            let digits = self.pos;
            while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                self.pos += 1;
            }
            if self.pos == digits {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii digits");
        match text.parse::<f64>() {
            Ok(v) => Ok(v),
            Err(_) => {
                self.pos = start;
                self.error(format!("malformed number '{text}'"))
            }
        }
    }

    /// A real or imaginary literal, `i` alone meaning `1i`.
    fn literal(&mut self) -> Result<Complex64> {
        self.skip_ws();
        if self.peek() == Some(b'i') {
            self.pos += 1;
            return Ok(Complex64::new(0.0, 1.0));
        }
        let v = self.number()?;
        if self.peek() == Some(b'i') {
            self.pos += 1;
            Ok(Complex64::new(0.0, v))
        } else {
            Ok(Complex64::new(v, 0.0))
        }
    }

    fn parenthesised(&mut self) -> Result<Complex64> {
        let mut value = Complex64::new(0.0, 0.0);
        let mut first = true;
        loop {
            self.skip_ws();
            let sign = if self.eat(b'-') {
                -1.0
            } else if self.eat(b'+') || first {
                1.0
            } else {
                break;
            };
            value += self.literal()? * sign;
            first = false;
        }
        self.expect(b')')?;
        Ok(value)
    }

    fn monomial(&mut self, budget: u8) -> Result<MultiIndex> {
        self.skip_ws();
        let start = self.pos;
        if !self.eat(b'z') {
            return self.error("expected a monomial 'z[...]'");
        }
        self.expect(b'[')?;
        let mut labels = Vec::new();
        self.skip_ws();
        if !self.eat(b']') {
            loop {
                self.skip_ws();
                let digits = self.pos;
                while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                    self.pos += 1;
                }
                if self.pos == digits {
                    return self.error("expected a generator label");
                }
                let text = std::str::from_utf8(&self.src[digits..self.pos]).expect("digits");
                let label: u32 = match text.parse() {
                    Ok(v) => v,
                    Err(_) => return self.error("generator label out of range"),
                };
                labels.push(label);
                if self.eat(b']') {
                    break;
                }
                self.expect(b',')?;
            }
        }
        MultiIndex::new(&labels, budget).map_err(|e| AlgebraError::Parse {
            position: start,
            message: e.to_string(),
        })
    }

    fn term(&mut self, budget: u8) -> Result<(MultiIndex, Complex64)> {
        self.skip_ws();
        match self.peek() {
            Some(b'z') => Ok((self.monomial(budget)?, Complex64::new(1.0, 0.0))),
            Some(_) => {
                let coeff = if self.eat(b'(') {
                    self.parenthesised()?
                } else {
                    self.literal()?
                };
                if self.eat(b'*') {
                    Ok((self.monomial(budget)?, coeff))
                } else {
                    Ok((MultiIndex::EMPTY, coeff))
                }
            }
            None => self.error("unexpected end of input"),
        }
    }
}

/// Parses the text form into an element of `algebra`.
pub fn parse_supernumber(text: &str, algebra: GrassmannAlgebra) -> Result<Supernumber> {
    let mut parser = Parser {
        src: text.as_bytes(),
        pos: 0,
    };
    let mut terms = Vec::new();
    let mut first = true;
    loop {
        parser.skip_ws();
        if parser.peek().is_none() {
            if first {
                return parser.error("empty expression");
            }
            break;
        }
        let sign = if parser.eat(b'-') {
            -1.0
        } else if parser.eat(b'+') || first {
            1.0
        } else {
            return parser.error("expected '+' or '-' between terms");
        };
        let position = parser.pos;
        let (index, coeff) = parser.term(algebra.budget())?;
        if algebra.field() == crate::grassmann::Field::Real && coeff.im != 0.0 {
            return Err(AlgebraError::Parse {
                position,
                message: "imaginary coefficient in a real algebra".into(),
            });
        }
        terms.push((index, coeff * sign));
        first = false;
    }
    algebra.from_terms(terms)
}

impl Supernumber {
    /// See [`parse_supernumber`].
    pub fn parse(text: &str, algebra: GrassmannAlgebra) -> Result<Supernumber> {
        parse_supernumber(text, algebra)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_canonical_text() {
        let alg = GrassmannAlgebra::real(8);
        let z = parse_supernumber("2 - 3*z[1] + 0.5*z[1,2]", alg).unwrap();
        assert_eq!(z.norm(), 5.5);
        assert_eq!(z.to_string(), "2 - 3*z[1] + 0.5*z[1,2]");
        let again = parse_supernumber(&z.to_string(), alg).unwrap();
        assert!(again.identical(&z));
    }

    #[test]
    fn bare_monomials_and_exponents() {
        let alg = GrassmannAlgebra::real(8);
        let z = parse_supernumber("-z[2,3] + z[] + 1.5e-1*z[4]", alg).unwrap();
        assert_eq!(z.body().re, 1.0);
        assert_eq!(z.norm(), 2.15);
    }

    #[test]
    fn rejects_bad_indices() {
        let alg = GrassmannAlgebra::real(8);
        for bad in ["z[1,1]", "z[2,1]", "z[9]", "3*", "1 2", "", "2 + ", "z[1"] {
            assert!(
                matches!(parse_supernumber(bad, alg), Err(AlgebraError::Parse { .. })),
                "accepted {bad:?}"
            );
        }
    }

    #[test]
    fn complex_literals() {
        let alg = GrassmannAlgebra::complex(4);
        let z = parse_supernumber("(1-2i)*z[1] + 3i", alg).unwrap();
        assert_eq!(z.body(), Complex64::new(0.0, 3.0));
        assert_eq!(z.coeff(MultiIndex::generator(1)), Complex64::new(1.0, -2.0));
        let again = parse_supernumber(&z.to_string(), alg).unwrap();
        assert!(again.identical(&z));
        assert!(parse_supernumber("2i", GrassmannAlgebra::real(4)).is_err());
    }
}
