//! Expression parser for group-ring elements and matrices.
//!
//! Grammar (whitespace-insensitive):
//!
//! ```text
//! input   := matrix | expr
//! matrix  := '[' row (',' row)* ']'        row := '[' expr (',' expr)* ']'
//! expr    := ['+'|'-'] term (('+'|'-') term)*
//! term    := factor (('*'|'/') factor)*
//! factor  := primary ['^' ['-'] integer]
//! primary := number | imaginary | var | '(' expr ')'
//! var     := 'x'|'y'|'z'|'u'|'v'           (generator index 0..4)
//! ```
//!
//! Numbers are exact: integers stay integers, `p/q` and decimal literals
//! become exact rationals; an `i` suffix (`2i`, `1.5i`, bare `i`) makes the
//! coefficient complex. `1/x` is `x^-1`; division generally means right
//! multiplication by the inverse, so the divisor must be a single invertible
//! term. Products respect the group's cocycle twist when one is attached.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use thiserror::Error;

use crate::groupring::{Coeff, RingElement, RingMatrix};
use crate::groups::GroupDescriptor;

#[derive(Debug, Error)]
#[error("parse error at byte {pos}: {message}")]
pub struct ParseError {
    pub pos: usize,
    pub message: String,
}

fn err<T>(pos: usize, message: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError { pos, message: message.into() })
}

/// A parsed expression: scalar element or bracketed matrix.
#[derive(Debug, Clone)]
pub enum Parsed {
    Element(RingElement),
    Matrix(RingMatrix),
}

impl Parsed {
    /// View any parse result as a matrix (elements become 1x1).
    pub fn into_matrix(self) -> RingMatrix {
        match self {
            Parsed::Element(e) => RingMatrix::from_element(e),
            Parsed::Matrix(m) => m,
        }
    }
}

pub fn parse_ring_expr(text: &str, group: &GroupDescriptor) -> Result<Parsed, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0, group: group.clone() };
    let out = if matches!(p.peek(), Some(Tok::LBrack)) {
        Parsed::Matrix(p.matrix()?)
    } else {
        Parsed::Element(p.expr()?)
    };
    match p.cur() {
        None => Ok(out),
        Some((t, at)) => {
            let hint = if matches!(t, Tok::Var(_)) {
                "; use `*` for multiplication"
            } else {
                ""
            };
            err(*at, format!("unexpected trailing input{hint}"))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Int(BigInt),
    Dec(BigRational),
    Imag(BigRational),
    Var(usize),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LPar,
    RPar,
    LBrack,
    RBrack,
    Comma,
}

const VARS: [char; 5] = ['x', 'y', 'z', 'u', 'v'];

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let at = i;
        match c {
            ' ' | '\t' | '\n' | '\r' => {
                i += 1;
            }
            '+' => {
                out.push((Tok::Plus, at));
                i += 1;
            }
            '-' => {
                out.push((Tok::Minus, at));
                i += 1;
            }
            '*' => {
                out.push((Tok::Star, at));
                i += 1;
            }
            '/' => {
                out.push((Tok::Slash, at));
                i += 1;
            }
            '^' => {
                out.push((Tok::Caret, at));
                i += 1;
            }
            '(' => {
                out.push((Tok::LPar, at));
                i += 1;
            }
            ')' => {
                out.push((Tok::RPar, at));
                i += 1;
            }
            '[' => {
                out.push((Tok::LBrack, at));
                i += 1;
            }
            ']' => {
                out.push((Tok::RBrack, at));
                i += 1;
            }
            ',' => {
                out.push((Tok::Comma, at));
                i += 1;
            }
            'i' => {
                out.push((Tok::Imag(BigRational::from(BigInt::from(1))), at));
                i += 1;
            }
            _ if VARS.contains(&c) => {
                out.push((Tok::Var(VARS.iter().position(|&v| v == c).unwrap()), at));
                i += 1;
            }
            _ if c.is_ascii_digit() => {
                let start = i;
                while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                    i += 1;
                }
                let mut frac_digits = 0usize;
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    let fs = i;
                    while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                        i += 1;
                    }
                    frac_digits = i - fs;
                    if frac_digits == 0 {
                        return err(i, "expected digits after decimal point");
                    }
                }
                let digits: String =
                    text[start..i].chars().filter(|&ch| ch != '.').collect();
                let value = digits.parse::<BigInt>().expect("digits");
                let imag = i < bytes.len() && bytes[i] == b'i';
                let rational = BigRational::new(value, BigInt::from(10u8).pow(frac_digits as u32));
                if imag {
                    i += 1;
                    out.push((Tok::Imag(rational), at));
                } else if frac_digits == 0 {
                    out.push((Tok::Int(rational.to_integer()), at));
                } else {
                    out.push((Tok::Dec(rational), at));
                }
            }
            _ => return err(at, format!("unexpected character `{c}`")),
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    group: GroupDescriptor,
}

impl Parser {
    fn cur(&self) -> Option<&(Tok, usize)> {
        self.toks.get(self.pos)
    }

    fn peek(&self) -> Option<&Tok> {
        self.cur().map(|(t, _)| t)
    }

    fn here(&self) -> usize {
        self.cur()
            .map(|(_, at)| *at)
            .unwrap_or_else(|| self.toks.last().map(|(_, at)| at + 1).unwrap_or(0))
    }

    fn advance(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(t, _)| t.clone());
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), ParseError> {
        if self.peek() == Some(&want) {
            self.pos += 1;
            Ok(())
        } else {
            err(self.here(), format!("expected {what}"))
        }
    }

    fn matrix(&mut self) -> Result<RingMatrix, ParseError> {
        let open = self.here();
        self.expect(Tok::LBrack, "`[`")?;
        let mut rows: Vec<Vec<RingElement>> = Vec::new();
        loop {
            let row_at = self.here();
            if self.peek() != Some(&Tok::LBrack) {
                return err(row_at, "matrix rows must be bracketed lists like [a, b]");
            }
            self.pos += 1;
            let mut row = Vec::new();
            loop {
                row.push(self.expr()?);
                match self.advance() {
                    Some(Tok::Comma) => continue,
                    Some(Tok::RBrack) => break,
                    _ => return err(self.here(), "expected `,` or `]` in matrix row"),
                }
            }
            if let Some(prev) = rows.first() {
                if prev.len() != row.len() {
                    return err(
                        row_at,
                        format!("ragged matrix: row of {} after row of {}", row.len(), prev.len()),
                    );
                }
            }
            rows.push(row);
            match self.advance() {
                Some(Tok::Comma) => continue,
                Some(Tok::RBrack) => break,
                _ => return err(self.here(), "expected `,` or `]` after matrix row"),
            }
        }
        let r = rows.len();
        let c = rows[0].len();
        let entries: Vec<RingElement> = rows.into_iter().flatten().collect();
        RingMatrix::from_entries(self.group.clone(), r, c, entries)
            .map_err(|e| ParseError { pos: open, message: e.to_string() })
    }

    fn expr(&mut self) -> Result<RingElement, ParseError> {
        let mut negate = false;
        match self.peek() {
            Some(Tok::Plus) => {
                self.pos += 1;
            }
            Some(Tok::Minus) => {
                self.pos += 1;
                negate = true;
            }
            _ => {}
        }
        let mut acc = self.term()?;
        if negate {
            acc = acc.neg();
        }
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.pos += 1;
                    let t = self.term()?;
                    acc = acc.add(&t).map_err(|e| self.ring_err(e))?;
                }
                Some(Tok::Minus) => {
                    self.pos += 1;
                    let t = self.term()?;
                    acc = acc.sub(&t).map_err(|e| self.ring_err(e))?;
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<RingElement, ParseError> {
        let mut acc = self.factor()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.pos += 1;
                    let f = self.factor()?;
                    acc = acc.mul(&f).map_err(|e| self.ring_err(e))?;
                }
                Some(Tok::Slash) => {
                    let at = self.here();
                    self.pos += 1;
                    let f = self.factor()?;
                    let inv = self.invert(&f, at)?;
                    acc = acc.mul(&inv).map_err(|e| self.ring_err(e))?;
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<RingElement, ParseError> {
        let base = self.primary()?;
        if self.peek() != Some(&Tok::Caret) {
            return Ok(base);
        }
        let caret_at = self.here();
        self.pos += 1;
        let mut negative = false;
        if self.peek() == Some(&Tok::Minus) {
            self.pos += 1;
            negative = true;
        }
        let k = match self.advance() {
            Some(Tok::Int(k)) => k,
            _ => return err(self.here(), "expected an integer exponent after `^`"),
        };
        let k = k
            .to_i64()
            .filter(|&k| k <= 4096)
            .ok_or_else(|| ParseError { pos: caret_at, message: "exponent too large".into() })?;
        let base = if negative { self.invert(&base, caret_at)? } else { base };
        let mut acc = RingElement::identity(self.group.clone());
        for _ in 0..k {
            acc = acc.mul(&base).map_err(|e| self.ring_err(e))?;
        }
        Ok(acc)
    }

    fn primary(&mut self) -> Result<RingElement, ParseError> {
        let at = self.here();
        match self.advance() {
            Some(Tok::Int(v)) => Ok(self.scalar(Coeff::Int(v))),
            Some(Tok::Dec(q)) => Ok(self.scalar(Coeff::Rat(q))),
            Some(Tok::Imag(q)) => Ok(self.scalar(Coeff::Cx(Complex64::new(
                0.0,
                q.to_f64().unwrap_or(f64::NAN),
            )))),
            Some(Tok::Var(axis)) => {
                if axis >= self.group.rank() {
                    return err(
                        at,
                        format!(
                            "variable `{}` needs generator index {}, but the group has rank {}",
                            VARS[axis],
                            axis + 1,
                            self.group.rank()
                        ),
                    );
                }
                let mut coords = vec![0i64; self.group.rank()];
                coords[axis] = 1;
                let s = self.group.element(&coords).expect("unit coordinate");
                RingElement::monomial(self.group.clone(), s, Coeff::from_i64(1))
                    .map_err(|e| self.ring_err(e))
            }
            Some(Tok::LPar) => {
                let inner = self.expr()?;
                self.expect(Tok::RPar, "`)`")?;
                Ok(inner)
            }
            Some(Tok::Minus) => err(at, "unexpected `-`; negate with a leading sign or parentheses"),
            _ => err(at, "expected a number, variable, or parenthesized expression"),
        }
    }

    fn scalar(&self, c: Coeff) -> RingElement {
        if c.is_zero() {
            return RingElement::zero(self.group.clone(), c.domain());
        }
        RingElement::monomial(self.group.clone(), self.group.identity(), c)
            .expect("identity is valid")
    }

    /// Inverse of a single-term element `c*s` as `c^-1 * s^-1`; anything with
    /// more support points has no representable inverse in the grammar.
    fn invert(&self, f: &RingElement, at: usize) -> Result<RingElement, ParseError> {
        let mut terms = f.support();
        let (s, c) = match (terms.next(), terms.next()) {
            (Some(term), None) => term,
            (None, _) => return err(at, "division by zero"),
            _ => return err(at, "can only divide by a single term like 2, x, or 3*y^2"),
        };
        let sinv = self.group.inv(s).expect("valid element");
        let cinv = c.recip().map_err(|e| self.ring_err(e))?;
        RingElement::monomial(self.group.clone(), sinv, cinv).map_err(|e| self.ring_err(e))
    }

    fn ring_err(&self, e: impl std::fmt::Display) -> ParseError {
        ParseError { pos: self.here(), message: e.to_string() }
    }
}

/// Parse helper used by builders that require a plain element.
pub fn parse_element(text: &str, group: &GroupDescriptor) -> Result<RingElement, ParseError> {
    match parse_ring_expr(text, group)? {
        Parsed::Element(e) => Ok(e),
        Parsed::Matrix(_) => err(0, "expected a scalar expression, found a matrix"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groupring::Domain as D;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn z(d: usize) -> GroupDescriptor {
        GroupDescriptor::lattice(d).unwrap()
    }

    #[test]
    fn spec_examples() {
        let g2 = z(2);
        let f = parse_element("5 - x - 1/x - y - 1/y", &g2).unwrap();
        assert_eq!(f.support_len(), 5);
        assert_eq!(f.domain(), D::Integer);

        let m = match parse_ring_expr("[[x-1],[y-1]]", &g2).unwrap() {
            Parsed::Matrix(m) => m,
            _ => panic!("expected matrix"),
        };
        assert_eq!((m.rows(), m.cols()), (2, 1));

        let g1 = z(1);
        let lehmer = parse_element("x^10+x^9-x^7-x^6-x^5-x^4-x^3+x+1", &g1).unwrap();
        assert_eq!(lehmer.support_len(), 9);
    }

    #[test]
    fn inverse_monomials() {
        let g = z(1);
        assert_eq!(
            parse_element("1/x", &g).unwrap(),
            parse_element("x^-1", &g).unwrap()
        );
        assert_eq!(
            parse_element("x/2", &g).unwrap(),
            parse_element("1/2 * x", &g).unwrap()
        );
        let f = parse_element("x^2/x", &g).unwrap();
        assert_eq!(f, parse_element("x", &g).unwrap());
    }

    #[test]
    fn parenthesized_negation() {
        let g2 = z(2);
        let a = parse_element("-(x-1)", &g2).unwrap();
        let b = parse_element("1-x", &g2).unwrap();
        assert_eq!(a, b);
        let c = parse_element("(x-1)*(y-1)", &g2).unwrap();
        assert_eq!(c, parse_element("x*y - x - y + 1", &g2).unwrap());
    }

    #[test]
    fn coefficient_domains() {
        let g = z(1);
        assert_eq!(parse_element("3*x - 4", &g).unwrap().domain(), D::Integer);
        assert_eq!(parse_element("3/4*x", &g).unwrap().domain(), D::Rational);
        assert_eq!(parse_element("0.25*x", &g).unwrap().domain(), D::Rational);
        assert_eq!(
            parse_element("0.25*x", &g).unwrap(),
            parse_element("1/4*x", &g).unwrap()
        );
        let cx = parse_element("2+3i - i*x", &g).unwrap();
        assert_eq!(cx.domain(), D::Complex);
        let e = cx.coeff(&g.identity()).to_c64();
        assert_eq!((e.re, e.im), (2.0, 3.0));
    }

    #[test]
    fn heisenberg_variables() {
        let h = GroupDescriptor::heisenberg();
        let xy = parse_element("x*y", &h).unwrap();
        let yx = parse_element("y*x", &h).unwrap();
        assert_ne!(xy, yx, "H3 is noncommutative");
        let z_center = parse_element("x*y - y*x*z", &h).unwrap();
        // xy = (1,1,1), yx = (1,1,0), z = (0,0,1); yx*z = (1,1,1)
        assert!(z_center.is_zero());
    }

    #[test]
    fn error_positions() {
        let g = z(1);
        let e = parse_element("x + ?", &g).unwrap_err();
        assert_eq!(e.pos, 4);
        let e = parse_element("y", &g).unwrap_err();
        assert!(e.message.contains("rank"));
        let e = parse_ring_expr("[[x],[x,x]]", &g).unwrap_err();
        assert!(e.message.contains("ragged"));
        let e = parse_element("1/(x+1)", &g).unwrap_err();
        assert!(e.message.contains("single term"));
        let e = parse_element("2x", &g).unwrap_err();
        assert!(e.message.contains('*'));
    }

    #[test]
    fn print_parse_roundtrip_corpus() {
        let groups = [z(1), z(2), z(3), GroupDescriptor::heisenberg()];
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for g in &groups {
            for _ in 0..60 {
                let mut f = crate::groupring::RingElement::zero(g.clone(), D::Integer);
                for _ in 0..rng.gen_range(1..=5) {
                    let coords: Vec<i64> =
                        (0..g.rank()).map(|_| rng.gen_range(-3..=3i64)).collect();
                    let s = g.element(&coords).unwrap();
                    let c = match rng.gen_range(0..3) {
                        0 => Coeff::from_i64(rng.gen_range(-9..=9)),
                        1 => Coeff::Rat(BigRational::new(
                            BigInt::from(rng.gen_range(-9..=9)),
                            BigInt::from(rng.gen_range(1..=9)),
                        )),
                        _ => Coeff::Cx(Complex64::new(
                            rng.gen_range(-4..=4) as f64,
                            rng.gen_range(-4..=4) as f64,
                        )),
                    };
                    f = f
                        .add(&RingElement::monomial(g.clone(), s, c).unwrap())
                        .unwrap();
                }
                let printed = f.to_string();
                let reparsed = parse_element(&printed, g)
                    .unwrap_or_else(|e| panic!("reparse of `{printed}` failed: {e}"));
                let want = f.promote(reparsed.domain());
                let got = reparsed.promote(f.domain());
                assert_eq!(got, want, "roundtrip of `{printed}`");
            }
        }
    }

    #[test]
    fn matrix_roundtrip() {
        let g2 = z(2);
        for text in ["[[x-1],[y-1]]", "[[y-1, -(x-1)]]", "[[2, x*y],[1/x, 4-y]]"] {
            let m = parse_ring_expr(text, &g2).unwrap().into_matrix();
            let printed = m.to_string();
            let again = parse_ring_expr(&printed, &g2).unwrap().into_matrix();
            assert_eq!(m, again, "roundtrip of `{printed}`");
        }
    }
}
