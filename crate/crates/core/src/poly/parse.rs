//! Text form of polynomials:
//!
//! ```text
//! expr   := ['-'] term (('+'|'-') term)*
//! term   := coeff ('*' factor)* | factor ('*' factor)*
//! factor := 'x' INT ('^' INT)?
//! coeff  := INT | INT '/' INT | DECIMAL
//! ```
//!
//! Whitespace is ignored and variables are 1-based.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use super::{ExponentVector, Polynomial};
use crate::error::{Error, Result};

/// Parses `text` as a polynomial in `dimension` variables.
pub fn parse_polynomial(text: &str, dimension: usize) -> Result<Polynomial> {
    if dimension == 0 {
        return Err(Error::InvalidArgument("dimension must be positive".into()));
    }
    let mut parser = Parser { src: text.as_bytes(), pos: 0, dimension };
    let poly = parser.expr()?;
    parser.skip_ws();
    if parser.pos < parser.src.len() {
        return Err(parser.syntax("unexpected trailing input"));
    }
    Ok(poly)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    dimension: usize,
}

impl Parser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn syntax(&self, message: &str) -> Error {
        Error::Syntax { position: self.pos, message: message.to_string() }
    }

    fn expr(&mut self) -> Result<Polynomial> {
        let mut poly = Polynomial::zero(self.dimension);
        let mut negative = false;
        if self.peek() == Some(b'-') {
            self.pos += 1;
            negative = true;
        }
        loop {
            let (e, mut c) = self.term()?;
            if negative {
                c = -c;
            }
            poly.add_term(e, c);
            match self.peek() {
                Some(b'+') => negative = false,
                Some(b'-') => negative = true,
                _ => break,
            }
            self.pos += 1;
        }
        Ok(poly)
    }

    fn term(&mut self) -> Result<(ExponentVector, BigRational)> {
        let mut exps = ExponentVector::zeros(self.dimension);
        let coeff = match self.peek() {
            Some(b) if b.is_ascii_digit() => {
                let c = self.coeff()?;
                if self.peek() == Some(b'*') {
                    self.pos += 1;
                    self.factor(&mut exps)?;
                }
                c
            }
            Some(b'x') => {
                self.factor(&mut exps)?;
                BigRational::one()
            }
            _ => return Err(self.syntax("expected a coefficient or a variable")),
        };
        while self.peek() == Some(b'*') {
            self.pos += 1;
            self.factor(&mut exps)?;
        }
        Ok((exps, coeff))
    }

    fn factor(&mut self, exps: &mut ExponentVector) -> Result<()> {
        if self.peek() != Some(b'x') {
            return Err(self.syntax("expected a variable 'x<index>'"));
        }
        self.pos += 1;
        let start = self.pos;
        let index = self.integer()?;
        let index = usize::try_from(&index).map_err(|_| Error::Syntax {
            position: start,
            message: "variable index too large".into(),
        })?;
        if index == 0 || index > self.dimension {
            return Err(Error::VariableOutOfRange { index, dimension: self.dimension });
        }
        let mut power = 1u32;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let start = self.pos;
            power = u32::try_from(&self.integer()?).map_err(|_| Error::Syntax {
                position: start,
                message: "exponent too large".into(),
            })?;
        }
        exps.0[index - 1] += power;
        Ok(())
    }

    /// Unsigned decimal integer; no whitespace is skipped inside it.
    fn integer(&mut self) -> Result<BigInt> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.syntax("expected an integer"));
        }
        let digits = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii digits");
        Ok(digits.parse().expect("digits parse as an integer"))
    }

    fn coeff(&mut self) -> Result<BigRational> {
        let whole = self.integer()?;
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            let start = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            let frac = &self.src[start..self.pos];
            let scale = num_traits::pow(BigInt::from(10), frac.len());
            let frac_value: BigInt = if frac.is_empty() {
                BigInt::zero()
            } else {
                std::str::from_utf8(frac).expect("ascii digits").parse().expect("digits")
            };
            return Ok(BigRational::new(whole * &scale + frac_value, scale));
        }
        if self.peek() == Some(b'/') {
            self.pos += 1;
            let at = self.pos;
            let den = self.integer()?;
            if den.is_zero() {
                return Err(Error::ZeroDenominator { position: at });
            }
            return Ok(BigRational::new(whole, den));
        }
        Ok(BigRational::from_integer(whole))
    }
}
