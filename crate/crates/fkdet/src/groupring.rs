//! Exact group-ring arithmetic: finitely supported elements `f = sum f_s s`,
//! matrices over them, convolution (optionally twisted by a 2-cocycle),
//! the star involution, traces, norms, and exact polynomial application.
//!
//! Coefficients live in one of three domains with one-way promotion
//! integer -> rational -> complex double. The exact domains feed the oracles
//! (spectral moments, Smith normal form); floats appear only where a value is
//! handed to an eigensolver or a twisted phase enters.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::groups::{Cocycle, GroupDescriptor, GroupElement, GroupError};

#[derive(Debug, Error)]
pub enum RingError {
    #[error("group mismatch: {0} vs {1}")]
    GroupMismatch(GroupDescriptor, GroupDescriptor),
    #[error("shape mismatch: {0}x{1} vs {2}x{3}")]
    ShapeMismatch(usize, usize, usize, usize),
    #[error("matrix must be square for this operation")]
    NotSquare,
    #[error("matrix dimensions must be >= 1")]
    EmptyMatrix,
    #[error("entry count {got} does not match shape {rows}x{cols}")]
    BadEntryCount { rows: usize, cols: usize, got: usize },
    #[error("division by zero coefficient")]
    DivisionByZero,
    #[error(transparent)]
    Group(#[from] GroupError),
}

/// Coefficient domain, ordered by promotion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Domain {
    Integer,
    Rational,
    Complex,
}

impl Domain {
    pub fn join(self, other: Domain) -> Domain {
        self.max(other)
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Domain::Integer => write!(f, "integer"),
            Domain::Rational => write!(f, "rational"),
            Domain::Complex => write!(f, "complex"),
        }
    }
}

/// A single coefficient; arithmetic promotes operands to the joined domain.
#[derive(Debug, Clone)]
pub enum Coeff {
    Int(BigInt),
    Rat(BigRational),
    Cx(Complex64),
}

impl Coeff {
    pub fn zero(domain: Domain) -> Self {
        Coeff::from_i64(0).to_domain(domain)
    }

    pub fn one(domain: Domain) -> Self {
        Coeff::from_i64(1).to_domain(domain)
    }

    pub fn from_i64(v: i64) -> Self {
        Coeff::Int(BigInt::from(v))
    }

    pub fn from_f64(re: f64) -> Self {
        Coeff::Cx(Complex64::new(re, 0.0))
    }

    pub fn domain(&self) -> Domain {
        match self {
            Coeff::Int(_) => Domain::Integer,
            Coeff::Rat(_) => Domain::Rational,
            Coeff::Cx(_) => Domain::Complex,
        }
    }

    /// Promote to a domain at or above the current one.
    pub fn to_domain(&self, domain: Domain) -> Coeff {
        match (self, domain) {
            (Coeff::Int(v), Domain::Rational) => Coeff::Rat(BigRational::from(v.clone())),
            (Coeff::Int(v), Domain::Complex) => {
                Coeff::Cx(Complex64::new(bigint_to_f64(v), 0.0))
            }
            (Coeff::Rat(v), Domain::Complex) => {
                Coeff::Cx(Complex64::new(rational_to_f64(v), 0.0))
            }
            _ => self.clone(),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Coeff::Int(v) => v.is_zero(),
            Coeff::Rat(v) => v.is_zero(),
            Coeff::Cx(v) => v.re == 0.0 && v.im == 0.0,
        }
    }

    /// Strict positivity; meaningful for the exact domains (complex compares
    /// the real part and requires a zero imaginary part).
    pub fn is_positive(&self) -> bool {
        match self {
            Coeff::Int(v) => v.is_positive(),
            Coeff::Rat(v) => v.is_positive(),
            Coeff::Cx(v) => v.im == 0.0 && v.re > 0.0,
        }
    }

    pub fn add(&self, rhs: &Coeff) -> Coeff {
        let d = self.domain().join(rhs.domain());
        match (self.to_domain(d), rhs.to_domain(d)) {
            (Coeff::Int(a), Coeff::Int(b)) => Coeff::Int(a + b),
            (Coeff::Rat(a), Coeff::Rat(b)) => Coeff::Rat(a + b),
            (Coeff::Cx(a), Coeff::Cx(b)) => Coeff::Cx(a + b),
            _ => unreachable!("joined domains"),
        }
    }

    pub fn mul(&self, rhs: &Coeff) -> Coeff {
        let d = self.domain().join(rhs.domain());
        match (self.to_domain(d), rhs.to_domain(d)) {
            (Coeff::Int(a), Coeff::Int(b)) => Coeff::Int(a * b),
            (Coeff::Rat(a), Coeff::Rat(b)) => Coeff::Rat(a * b),
            (Coeff::Cx(a), Coeff::Cx(b)) => Coeff::Cx(a * b),
            _ => unreachable!("joined domains"),
        }
    }

    pub fn neg(&self) -> Coeff {
        match self {
            Coeff::Int(v) => Coeff::Int(-v),
            Coeff::Rat(v) => Coeff::Rat(-v),
            Coeff::Cx(v) => Coeff::Cx(-v),
        }
    }

    pub fn conj(&self) -> Coeff {
        match self {
            Coeff::Cx(v) => Coeff::Cx(v.conj()),
            other => other.clone(),
        }
    }

    /// Exact inverse in the rational domain (integers promote), float inverse
    /// in the complex domain.
    pub fn recip(&self) -> Result<Coeff, RingError> {
        if self.is_zero() {
            return Err(RingError::DivisionByZero);
        }
        Ok(match self {
            // units of the integers invert without leaving the domain
            Coeff::Int(v) if v.magnitude() == &BigUint::from(1u8) => Coeff::Int(v.clone()),
            Coeff::Int(v) => Coeff::Rat(BigRational::from(v.clone()).recip()),
            Coeff::Rat(v) => Coeff::Rat(v.recip()),
            Coeff::Cx(v) => Coeff::Cx(v.inv()),
        })
    }

    pub fn abs_f64(&self) -> f64 {
        match self {
            Coeff::Int(v) => bigint_to_f64(v).abs(),
            Coeff::Rat(v) => rational_to_f64(v).abs(),
            Coeff::Cx(v) => v.norm(),
        }
    }

    pub fn to_c64(&self) -> Complex64 {
        match self.to_domain(Domain::Complex) {
            Coeff::Cx(v) => v,
            _ => unreachable!(),
        }
    }

    /// Real part as f64; exact-domain values round once here.
    pub fn to_f64(&self) -> f64 {
        match self {
            Coeff::Int(v) => bigint_to_f64(v),
            Coeff::Rat(v) => rational_to_f64(v),
            Coeff::Cx(v) => v.re,
        }
    }

    pub fn as_bigint(&self) -> Option<&BigInt> {
        match self {
            Coeff::Int(v) => Some(v),
            _ => None,
        }
    }
}

impl PartialEq for Coeff {
    fn eq(&self, other: &Self) -> bool {
        let d = self.domain().join(other.domain());
        match (self.to_domain(d), other.to_domain(d)) {
            (Coeff::Int(a), Coeff::Int(b)) => a == b,
            (Coeff::Rat(a), Coeff::Rat(b)) => a == b,
            (Coeff::Cx(a), Coeff::Cx(b)) => a == b,
            _ => unreachable!(),
        }
    }
}

impl fmt::Display for Coeff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coeff::Int(v) => write!(f, "{v}"),
            Coeff::Rat(v) => {
                if v.denom().is_one() {
                    write!(f, "{}", v.numer())
                } else {
                    write!(f, "{}/{}", v.numer(), v.denom())
                }
            }
            Coeff::Cx(v) => {
                if v.im == 0.0 {
                    write!(f, "{}", v.re)
                } else if v.re == 0.0 {
                    write!(f, "{}i", v.im)
                } else if v.im < 0.0 {
                    write!(f, "{}-{}i", v.re, -v.im)
                } else {
                    write!(f, "{}+{}i", v.re, v.im)
                }
            }
        }
    }
}

pub(crate) fn bigint_to_f64(v: &BigInt) -> f64 {
    v.to_f64().unwrap_or(f64::INFINITY * if v.is_negative() { -1.0 } else { 1.0 })
}

pub(crate) fn rational_to_f64(v: &BigRational) -> f64 {
    v.to_f64().unwrap_or(0.0)
}

/// Finitely supported function `Gamma -> coefficients`; no stored zeros.
#[derive(Debug, Clone)]
pub struct RingElement {
    group: GroupDescriptor,
    domain: Domain,
    support: BTreeMap<GroupElement, Coeff>,
}

impl RingElement {
    pub fn zero(group: GroupDescriptor, domain: Domain) -> Self {
        Self { group, domain, support: BTreeMap::new() }
    }

    pub fn identity(group: GroupDescriptor) -> Self {
        let e = group.identity();
        Self::from_terms(group, vec![(e, Coeff::from_i64(1))]).expect("identity is valid")
    }

    pub fn monomial(
        group: GroupDescriptor,
        at: GroupElement,
        coeff: Coeff,
    ) -> Result<Self, RingError> {
        Self::from_terms(group, vec![(at, coeff)])
    }

    pub fn from_terms(
        group: GroupDescriptor,
        terms: Vec<(GroupElement, Coeff)>,
    ) -> Result<Self, RingError> {
        let mut out = Self::zero(group, Domain::Integer);
        for (s, c) in terms {
            out.group.element(s.coords())?; // arity check
            out.accumulate(s, c);
        }
        Ok(out)
    }

    fn accumulate(&mut self, s: GroupElement, c: Coeff) {
        self.domain = self.domain.join(c.domain());
        let entry = self.support.entry(s);
        match entry {
            std::collections::btree_map::Entry::Vacant(v) => {
                if !c.is_zero() {
                    v.insert(c);
                }
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let sum = o.get().add(&c);
                if sum.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = sum;
                }
            }
        }
    }

    pub fn group(&self) -> &GroupDescriptor {
        &self.group
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn promote(&self, domain: Domain) -> Self {
        let domain = self.domain.join(domain);
        Self {
            group: self.group.clone(),
            domain,
            support: self
                .support
                .iter()
                .map(|(s, c)| (s.clone(), c.to_domain(domain)))
                .collect(),
        }
    }

    pub fn support(&self) -> impl Iterator<Item = (&GroupElement, &Coeff)> {
        self.support.iter()
    }

    pub fn support_len(&self) -> usize {
        self.support.len()
    }

    pub fn support_elements(&self) -> Vec<GroupElement> {
        self.support.keys().cloned().collect()
    }

    pub fn coeff(&self, s: &GroupElement) -> Coeff {
        self.support
            .get(s)
            .cloned()
            .unwrap_or_else(|| Coeff::zero(self.domain))
    }

    pub fn is_zero(&self) -> bool {
        self.support.is_empty()
    }

    fn check_group(&self, rhs: &RingElement) -> Result<(), RingError> {
        if self.group != rhs.group {
            return Err(RingError::GroupMismatch(self.group.clone(), rhs.group.clone()));
        }
        Ok(())
    }

    pub fn add(&self, rhs: &RingElement) -> Result<RingElement, RingError> {
        self.check_group(rhs)?;
        let mut out = self.clone();
        out.domain = out.domain.join(rhs.domain);
        for (s, c) in rhs.support.iter() {
            out.accumulate(s.clone(), c.clone());
        }
        Ok(out.normalized())
    }

    pub fn neg(&self) -> RingElement {
        Self {
            group: self.group.clone(),
            domain: self.domain,
            support: self.support.iter().map(|(s, c)| (s.clone(), c.neg())).collect(),
        }
    }

    pub fn sub(&self, rhs: &RingElement) -> Result<RingElement, RingError> {
        self.add(&rhs.neg())
    }

    pub fn scale(&self, c: &Coeff) -> RingElement {
        if c.is_zero() {
            return Self::zero(self.group.clone(), self.domain.join(c.domain()));
        }
        let mut out = Self::zero(self.group.clone(), self.domain.join(c.domain()));
        for (s, v) in self.support.iter() {
            out.accumulate(s.clone(), v.mul(c));
        }
        out.normalized()
    }

    fn normalized(mut self) -> Self {
        self.support.retain(|_, c| !c.is_zero());
        self
    }

    /// Twisted or plain convolution `(a b)_u = sum_{st=u} a_s b_t alpha(s,t)`.
    pub fn convolve(
        &self,
        rhs: &RingElement,
        alpha: Option<&Cocycle>,
    ) -> Result<RingElement, RingError> {
        self.check_group(rhs)?;
        let mut domain = self.domain.join(rhs.domain);
        if alpha.is_some() {
            domain = domain.join(Domain::Complex);
        }
        let mut out = Self::zero(self.group.clone(), domain);
        for (s, a) in self.support.iter() {
            for (t, b) in rhs.support.iter() {
                let u = self.group.mul(s, t)?;
                let mut c = a.mul(b).to_domain(domain);
                if let Some(alpha) = alpha {
                    c = c.mul(&Coeff::Cx(alpha.eval(s, t)));
                }
                out.accumulate(u, c);
            }
        }
        Ok(out.normalized())
    }

    /// Product in the group algebra attached to this element's group: twisted
    /// when the group carries a cocycle, plain otherwise.
    pub fn mul(&self, rhs: &RingElement) -> Result<RingElement, RingError> {
        self.convolve(rhs, self.group.cocycle().as_ref())
    }

    /// Star involution `(a*)_s = conj(a_{s^-1})`; in the twisted algebra the
    /// phase `conj(alpha(s, s^-1))` makes star match the operator adjoint of
    /// the twisted left regular representation.
    pub fn star(&self) -> RingElement {
        let alpha = self.group.cocycle();
        let mut out = Self::zero(self.group.clone(), self.domain);
        for (s, c) in self.support.iter() {
            let sinv = self.group.inv(s).expect("valid element");
            let mut v = c.conj();
            if let Some(alpha) = &alpha {
                v = v.mul(&Coeff::Cx(alpha.eval(&sinv, s).conj()));
            }
            out.accumulate(sinv, v);
        }
        out.normalized()
    }

    /// Coefficient of the identity; the normalized trace on the group algebra.
    pub fn trace_coeff(&self) -> Coeff {
        self.coeff(&self.group.identity())
    }

    /// `sum_s |a_s|`; upper bound for the operator norm.
    pub fn l1_norm(&self) -> f64 {
        self.support.values().map(|c| c.abs_f64()).sum()
    }
}

impl PartialEq for RingElement {
    fn eq(&self, other: &Self) -> bool {
        if self.group != other.group || self.support.len() != other.support.len() {
            return false;
        }
        self.support
            .iter()
            .zip(other.support.iter())
            .all(|((s, a), (t, b))| s == t && a == b)
    }
}

impl fmt::Display for RingElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.support.is_empty() {
            return write!(f, "0");
        }
        let vars = ["x", "y", "z", "u", "v"];
        let mut first = true;
        for (s, c) in self.support.iter() {
            // Heisenberg normal form (a,b,c) = x^a y^b z^(c-ab); abelian
            // coordinates are plain exponents.
            let mut exps: Vec<i64> = s.coords().to_vec();
            if matches!(self.group.kind(), crate::groups::GroupKind::Heisenberg) {
                exps[2] -= exps[0] * exps[1];
            }
            let mono: Vec<String> = exps
                .iter()
                .enumerate()
                .filter(|(_, &p)| p != 0)
                .map(|(axis, &p)| {
                    if p == 1 {
                        vars[axis].to_string()
                    } else {
                        format!("{}^{}", vars[axis], p)
                    }
                })
                .collect();
            let coeff_str = c.to_string();
            // complex a+bi / a-bi coefficients parenthesize so the printed
            // form reparses with the same grouping
            let compound = coeff_str.len() > 1 && coeff_str[1..].contains(['+', '-']);
            let (sign, mag) = if compound {
                ("+", format!("({coeff_str})"))
            } else if let Some(rest) = coeff_str.strip_prefix('-') {
                ("-", rest.to_string())
            } else {
                ("+", coeff_str)
            };
            if first {
                if sign == "-" {
                    write!(f, "-")?;
                }
                first = false;
            } else {
                write!(f, " {} ", sign)?;
            }
            if mono.is_empty() {
                write!(f, "{mag}")?;
            } else if mag == "1" {
                write!(f, "{}", mono.join("*"))?;
            } else {
                write!(f, "{}*{}", mag, mono.join("*"))?;
            }
        }
        Ok(())
    }
}

/// Dense matrix over a group ring; all entries share one group and domain.
#[derive(Debug, Clone)]
pub struct RingMatrix {
    group: GroupDescriptor,
    domain: Domain,
    rows: usize,
    cols: usize,
    entries: Vec<RingElement>, // row-major
}

/// Value equality: the domain tag is bookkeeping, `x * (1/2) * 2` equals `x`.
impl PartialEq for RingMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.group == other.group
            && self.rows == other.rows
            && self.cols == other.cols
            && self.entries == other.entries
    }
}

impl RingMatrix {
    pub fn from_entries(
        group: GroupDescriptor,
        rows: usize,
        cols: usize,
        entries: Vec<RingElement>,
    ) -> Result<Self, RingError> {
        if rows == 0 || cols == 0 {
            return Err(RingError::EmptyMatrix);
        }
        if entries.len() != rows * cols {
            return Err(RingError::BadEntryCount { rows, cols, got: entries.len() });
        }
        let mut domain = Domain::Integer;
        for e in &entries {
            if *e.group() != group {
                return Err(RingError::GroupMismatch(group, e.group().clone()));
            }
            domain = domain.join(e.domain());
        }
        let entries = entries.into_iter().map(|e| e.promote(domain)).collect();
        Ok(Self { group, domain, rows, cols, entries })
    }

    pub fn from_element(e: RingElement) -> Self {
        let group = e.group().clone();
        Self::from_entries(group, 1, 1, vec![e]).expect("1x1 is valid")
    }

    pub fn identity(group: GroupDescriptor, d: usize) -> Result<Self, RingError> {
        let one = RingElement::identity(group.clone());
        let zero = RingElement::zero(group.clone(), Domain::Integer);
        let entries = (0..d * d)
            .map(|k| if k % (d + 1) == 0 { one.clone() } else { zero.clone() })
            .collect();
        Self::from_entries(group, d, d, entries)
    }

    pub fn zero(group: GroupDescriptor, rows: usize, cols: usize) -> Result<Self, RingError> {
        let z = RingElement::zero(group.clone(), Domain::Integer);
        Self::from_entries(group, rows, cols, vec![z; rows * cols])
    }

    pub fn group(&self) -> &GroupDescriptor {
        &self.group
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entry(&self, i: usize, j: usize) -> &RingElement {
        &self.entries[i * self.cols + j]
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|e| e.is_zero())
    }

    pub fn promote(&self, domain: Domain) -> Self {
        let domain = self.domain.join(domain);
        Self {
            group: self.group.clone(),
            domain,
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|e| e.promote(domain)).collect(),
        }
    }

    pub fn add(&self, rhs: &RingMatrix) -> Result<RingMatrix, RingError> {
        if self.rows != rhs.rows || self.cols != rhs.cols {
            return Err(RingError::ShapeMismatch(self.rows, self.cols, rhs.rows, rhs.cols));
        }
        let entries = self
            .entries
            .iter()
            .zip(&rhs.entries)
            .map(|(a, b)| a.add(b))
            .collect::<Result<_, _>>()?;
        Self::from_entries(self.group.clone(), self.rows, self.cols, entries)
    }

    pub fn neg(&self) -> RingMatrix {
        Self {
            group: self.group.clone(),
            domain: self.domain,
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|e| e.neg()).collect(),
        }
    }

    /// Standard matrix product with (possibly twisted) convolution as the
    /// scalar product.
    pub fn mat_mul(&self, rhs: &RingMatrix) -> Result<RingMatrix, RingError> {
        if self.group != rhs.group {
            return Err(RingError::GroupMismatch(self.group.clone(), rhs.group.clone()));
        }
        if self.cols != rhs.rows {
            return Err(RingError::ShapeMismatch(self.rows, self.cols, rhs.rows, rhs.cols));
        }
        let mut entries = Vec::with_capacity(self.rows * rhs.cols);
        for i in 0..self.rows {
            for j in 0..rhs.cols {
                let mut acc = RingElement::zero(self.group.clone(), self.domain);
                for k in 0..self.cols {
                    acc = acc.add(&self.entry(i, k).mul(rhs.entry(k, j))?)?;
                }
                entries.push(acc);
            }
        }
        Self::from_entries(self.group.clone(), self.rows, rhs.cols, entries)
    }

    /// Conjugate transpose: `(f*)_{ij} = (f_{ji})*`.
    pub fn star(&self) -> RingMatrix {
        let mut entries = Vec::with_capacity(self.rows * self.cols);
        for j in 0..self.cols {
            for i in 0..self.rows {
                entries.push(self.entry(i, j).star());
            }
        }
        Self {
            group: self.group.clone(),
            domain: self.domain,
            rows: self.cols,
            cols: self.rows,
            entries,
        }
    }

    pub fn is_star_symmetric(&self) -> bool {
        self.is_square() && *self == self.star()
    }

    /// Unnormalized trace `sum_j <f_jj e, e>`: the identity coefficients of
    /// the diagonal. `trace(identity_d) = d`.
    pub fn trace(&self) -> Result<Coeff, RingError> {
        if !self.is_square() {
            return Err(RingError::NotSquare);
        }
        let mut acc = Coeff::zero(self.domain);
        for i in 0..self.rows {
            acc = acc.add(&self.entry(i, i).trace_coeff());
        }
        Ok(acc)
    }

    /// Sum of the absolute values of every coefficient in every entry;
    /// an upper bound for the operator norm of the represented operator.
    pub fn l1_norm(&self) -> f64 {
        self.entries.iter().map(|e| e.l1_norm()).sum()
    }

    /// `p(f)` for an integer-coefficient polynomial `p`, evaluated exactly in
    /// the ring by Horner's rule. `trace(poly_apply(t^k, f))` is the exact
    /// k-th spectral moment of a star-symmetric `f`.
    pub fn poly_apply(&self, coeffs_ascending: &[BigInt]) -> Result<RingMatrix, RingError> {
        if !self.is_square() {
            return Err(RingError::NotSquare);
        }
        let d = self.rows;
        let scalar = |c: &BigInt| -> Result<RingMatrix, RingError> {
            let id = RingMatrix::identity(self.group.clone(), d)?;
            Ok(id.scale_coeff(&Coeff::Int(c.clone())))
        };
        let mut acc = scalar(coeffs_ascending.last().unwrap_or(&BigInt::zero()))?;
        for c in coeffs_ascending.iter().rev().skip(1) {
            acc = acc.mat_mul(self)?.add(&scalar(c)?)?;
        }
        Ok(acc)
    }

    pub fn scale_coeff(&self, c: &Coeff) -> RingMatrix {
        let entries = self.entries.iter().map(|e| e.scale(c)).collect();
        Self::from_entries(self.group.clone(), self.rows, self.cols, entries)
            .expect("shape unchanged")
    }

    /// `f + eps * identity` (square only); used by the epsilon sweep.
    pub fn add_scalar_identity(&self, eps: &Coeff) -> Result<RingMatrix, RingError> {
        if !self.is_square() {
            return Err(RingError::NotSquare);
        }
        let shift = RingMatrix::identity(self.group.clone(), self.rows)?.scale_coeff(eps);
        self.add(&shift)
    }

    /// Union of the supports of all entries, in deterministic order.
    pub fn support_union(&self) -> Vec<GroupElement> {
        let mut set = std::collections::BTreeSet::new();
        for e in &self.entries {
            for (s, _) in e.support() {
                set.insert(s.clone());
            }
        }
        set.into_iter().collect()
    }

    /// `f^k` in the ring (k >= 0).
    pub fn ring_power(&self, k: usize) -> Result<RingMatrix, RingError> {
        if !self.is_square() {
            return Err(RingError::NotSquare);
        }
        let mut acc = RingMatrix::identity(self.group.clone(), self.rows)?;
        for _ in 0..k {
            acc = acc.mat_mul(self)?;
        }
        Ok(acc)
    }
}

impl fmt::Display for RingMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for i in 0..self.rows {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "[")?;
            for j in 0..self.cols {
                if j > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{}", self.entry(i, j))?;
            }
            write!(f, "]")?;
        }
        write!(f, "]")
    }
}
