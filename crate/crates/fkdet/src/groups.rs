//! Amenable group models: integer lattices `Z^d`, finite cyclic products, and
//! the discrete Heisenberg group, together with Folner box schedules,
//! invariance ratios, and the antisymmetric 2-cocycle twist on `Z^2`.
//!
//! Every determinant pipeline in this crate approximates a group operator by
//! compressions to finite subsets `F` of the group. The boxes produced by
//! [`GroupDescriptor::folner_box`] form a Folner sequence for each supported
//! group: the fraction of points `t` in the box with `Kt` inside the box tends
//! to 1 for every fixed finite `K` ([`GroupDescriptor::invariance_ratio`]).

use std::collections::HashMap;
use std::fmt;

use num_complex::Complex64;
use thiserror::Error;

/// Variables `x, y, z, u, v` in ring expressions map to coordinate axes, so
/// group ranks beyond five are not representable in the expression grammar.
pub const MAX_RANK: usize = 5;

#[derive(Debug, Error)]
pub enum GroupError {
    #[error("coordinate arity mismatch: expected {expected}, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("Folner boxes require n >= 1")]
    EmptyBox,
    #[error("lattice rank must be between 1 and {MAX_RANK}")]
    BadRank,
    #[error("cyclic moduli must all be >= 1 (got {0})")]
    BadModulus(u64),
    #[error("a cocycle twist is only supported on the rank-2 lattice")]
    BadTwist,
    #[error("invalid group spec `{spec}`: {reason}")]
    BadSpec { spec: String, reason: String },
    #[error("Folner sets must be nonempty")]
    EmptySet,
    #[error("duplicate element {0} in Folner set")]
    DuplicateElement(GroupElement),
}

/// Group element in canonical coordinates.
///
/// Lattice and Heisenberg coordinates are unconstrained integers; finite
/// cyclic coordinates are reduced to `0 <= c_i < n_i`. For the Heisenberg
/// group the fixed normal form is `(a, b, c) <-> [[1,a,c],[0,1,b],[0,0,1]]`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroupElement {
    coords: Vec<i64>,
}

impl GroupElement {
    pub fn coords(&self) -> &[i64] {
        &self.coords
    }
}

impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.coords.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// The supported group kinds.
#[derive(Debug, Clone, PartialEq)]
pub enum GroupKind {
    /// `Z^d`, `1 <= d <= MAX_RANK`.
    Lattice(usize),
    /// `Z/n_1 x ... x Z/n_k`, each modulus >= 1.
    FiniteCyclic(Vec<u64>),
    /// Discrete Heisenberg group of upper unitriangular 3x3 integer matrices.
    Heisenberg,
}

/// A group plus an optional cocycle twist (rank-2 lattice only).
#[derive(Debug, Clone, PartialEq)]
pub struct GroupDescriptor {
    kind: GroupKind,
    theta: Option<f64>,
}

/// Normalized unitary 2-cocycle `alpha_theta` on `Z^2`:
/// `alpha((n1,n2),(m1,m2)) = exp(2 pi i theta (n1 m2 - n2 m1))`.
///
/// Bilinearity and antisymmetry of the exponent give the cocycle identity
/// `alpha(s1,s2) alpha(s1 s2, s3) = alpha(s1, s2 s3) alpha(s2, s3)` and the
/// normalization `alpha(s, e) = alpha(e, s) = alpha(s, s) = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cocycle {
    theta: f64,
}

impl Cocycle {
    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Evaluate `alpha(s, t)`; always unit modulus.
    pub fn eval(&self, s: &GroupElement, t: &GroupElement) -> Complex64 {
        debug_assert!(s.coords.len() >= 2 && t.coords.len() >= 2);
        let cross = s.coords[0] * t.coords[1] - s.coords[1] * t.coords[0];
        if self.theta == 0.0 || cross == 0 {
            // exact 1: keeps theta=0 sections bitwise equal to untwisted ones
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * self.theta * cross as f64)
        }
    }
}

/// Evaluate a cocycle, checking the group precondition (rank-2 lattice).
pub fn cocycle_eval(
    group: &GroupDescriptor,
    alpha: &Cocycle,
    s: &GroupElement,
    t: &GroupElement,
) -> Result<Complex64, GroupError> {
    if group.kind != GroupKind::Lattice(2) {
        return Err(GroupError::BadTwist);
    }
    group.check_arity(s)?;
    group.check_arity(t)?;
    Ok(alpha.eval(s, t))
}

impl fmt::Display for GroupDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            GroupKind::Lattice(d) => write!(f, "Z^{d}")?,
            GroupKind::FiniteCyclic(moduli) => {
                for (i, n) in moduli.iter().enumerate() {
                    if i > 0 {
                        write!(f, " x ")?;
                    }
                    write!(f, "Z/{n}")?;
                }
            }
            GroupKind::Heisenberg => write!(f, "H3")?,
        }
        if let Some(theta) = self.theta {
            write!(f, " theta={theta}")?;
        }
        Ok(())
    }
}

impl GroupDescriptor {
    pub fn lattice(rank: usize) -> Result<Self, GroupError> {
        if rank == 0 || rank > MAX_RANK {
            return Err(GroupError::BadRank);
        }
        Ok(Self { kind: GroupKind::Lattice(rank), theta: None })
    }

    pub fn finite_cyclic(moduli: Vec<u64>) -> Result<Self, GroupError> {
        if moduli.is_empty() || moduli.len() > MAX_RANK {
            return Err(GroupError::BadRank);
        }
        if let Some(&bad) = moduli.iter().find(|&&n| n == 0) {
            return Err(GroupError::BadModulus(bad));
        }
        Ok(Self { kind: GroupKind::FiniteCyclic(moduli), theta: None })
    }

    pub fn heisenberg() -> Self {
        Self { kind: GroupKind::Heisenberg, theta: None }
    }

    /// Attach a cocycle twist; valid only on the rank-2 lattice.
    pub fn with_theta(mut self, theta: f64) -> Result<Self, GroupError> {
        if self.kind != GroupKind::Lattice(2) {
            return Err(GroupError::BadTwist);
        }
        self.theta = Some(theta);
        Ok(self)
    }

    /// Parse a group spec: `Z`, `Z^d`, `Z/n1 x Z/n2 ...`, `H3`.
    pub fn parse(spec: &str) -> Result<Self, GroupError> {
        let bad = |reason: &str| GroupError::BadSpec {
            spec: spec.to_string(),
            reason: reason.to_string(),
        };
        let s = spec.trim();
        if s.eq_ignore_ascii_case("H3") {
            return Ok(Self::heisenberg());
        }
        if s == "Z" {
            return Self::lattice(1);
        }
        if let Some(rank) = s.strip_prefix("Z^") {
            let d: usize = rank.trim().parse().map_err(|_| bad("rank must be an integer"))?;
            return Self::lattice(d);
        }
        if s.starts_with("Z/") {
            let mut moduli = Vec::new();
            for part in s.split('x') {
                let part = part.trim();
                let n = part
                    .strip_prefix("Z/")
                    .ok_or_else(|| bad("each factor must look like Z/n"))?;
                let n: u64 = n.trim().parse().map_err(|_| bad("modulus must be an integer"))?;
                moduli.push(n);
            }
            return Self::finite_cyclic(moduli);
        }
        Err(bad("expected Z, Z^d, Z/n1 x Z/n2 ..., or H3"))
    }

    pub fn kind(&self) -> &GroupKind {
        &self.kind
    }

    /// Coordinate tuple length for elements of this group.
    pub fn rank(&self) -> usize {
        match &self.kind {
            GroupKind::Lattice(d) => *d,
            GroupKind::FiniteCyclic(moduli) => moduli.len(),
            GroupKind::Heisenberg => 3,
        }
    }

    pub fn theta(&self) -> Option<f64> {
        self.theta
    }

    pub fn cocycle(&self) -> Option<Cocycle> {
        self.theta.map(|theta| Cocycle { theta })
    }

    pub fn is_finite(&self) -> bool {
        matches!(self.kind, GroupKind::FiniteCyclic(_))
    }

    /// Group order for finite kinds.
    pub fn order(&self) -> Option<u128> {
        match &self.kind {
            GroupKind::FiniteCyclic(moduli) => {
                Some(moduli.iter().map(|&n| n as u128).product())
            }
            _ => None,
        }
    }

    pub fn identity(&self) -> GroupElement {
        GroupElement { coords: vec![0; self.rank()] }
    }

    fn check_arity(&self, a: &GroupElement) -> Result<(), GroupError> {
        if a.coords.len() != self.rank() {
            return Err(GroupError::Arity { expected: self.rank(), got: a.coords.len() });
        }
        Ok(())
    }

    fn canon(&self, mut coords: Vec<i64>) -> GroupElement {
        if let GroupKind::FiniteCyclic(moduli) = &self.kind {
            for (c, &n) in coords.iter_mut().zip(moduli) {
                *c = c.rem_euclid(n as i64);
            }
        }
        GroupElement { coords }
    }

    /// Build an element from raw coordinates, canonicalizing finite ones.
    pub fn element(&self, coords: &[i64]) -> Result<GroupElement, GroupError> {
        if coords.len() != self.rank() {
            return Err(GroupError::Arity { expected: self.rank(), got: coords.len() });
        }
        Ok(self.canon(coords.to_vec()))
    }

    /// Group law in canonical coordinates.
    ///
    /// Heisenberg: `(a1,b1,c1)(a2,b2,c2) = (a1+a2, b1+b2, c1+c2+a1*b2)`,
    /// matching the product of the associated unitriangular matrices.
    pub fn mul(&self, a: &GroupElement, b: &GroupElement) -> Result<GroupElement, GroupError> {
        self.check_arity(a)?;
        self.check_arity(b)?;
        let coords = match &self.kind {
            GroupKind::Lattice(_) | GroupKind::FiniteCyclic(_) => {
                a.coords.iter().zip(&b.coords).map(|(x, y)| x + y).collect()
            }
            GroupKind::Heisenberg => vec![
                a.coords[0] + b.coords[0],
                a.coords[1] + b.coords[1],
                a.coords[2] + b.coords[2] + a.coords[0] * b.coords[1],
            ],
        };
        Ok(self.canon(coords))
    }

    /// Group inverse; Heisenberg: `(a,b,c)^{-1} = (-a, -b, ab - c)`.
    pub fn inv(&self, a: &GroupElement) -> Result<GroupElement, GroupError> {
        self.check_arity(a)?;
        let coords = match &self.kind {
            GroupKind::Lattice(_) | GroupKind::FiniteCyclic(_) => {
                a.coords.iter().map(|x| -x).collect()
            }
            GroupKind::Heisenberg => vec![
                -a.coords[0],
                -a.coords[1],
                a.coords[0] * a.coords[1] - a.coords[2],
            ],
        };
        Ok(self.canon(coords))
    }

    /// The Folner box with label `n`:
    /// lattice `{0..n-1}^d` in lexicographic order; finite groups the whole
    /// group (independent of `n`); Heisenberg `{(a,b,c): 0<=a,b<n, 0<=c<n^2}`.
    pub fn folner_box(&self, n: u64) -> Result<FolnerSet, GroupError> {
        if n == 0 {
            return Err(GroupError::EmptyBox);
        }
        let limits: Vec<u64> = match &self.kind {
            GroupKind::Lattice(d) => vec![n; *d],
            GroupKind::FiniteCyclic(moduli) => moduli.clone(),
            GroupKind::Heisenberg => vec![n, n, n * n],
        };
        let count: u128 = limits.iter().map(|&l| l as u128).product();
        assert!(count <= u32::MAX as u128, "Folner box too large to index");
        let mut elements = Vec::with_capacity(count as usize);
        let mut cur = vec![0i64; limits.len()];
        // odometer with the last coordinate fastest = lexicographic order
        'outer: loop {
            elements.push(GroupElement { coords: cur.clone() });
            for axis in (0..limits.len()).rev() {
                cur[axis] += 1;
                if (cur[axis] as u64) < limits[axis] {
                    continue 'outer;
                }
                cur[axis] = 0;
            }
            break;
        }
        FolnerSet::from_elements(self.clone(), elements, n)
    }

    /// Doubling schedule `4, 8, 16, ...` capped at (and always ending with)
    /// `cap`; finite groups need a single exact point.
    pub fn schedule(&self, cap: u64) -> Result<Vec<u64>, GroupError> {
        if cap == 0 {
            return Err(GroupError::EmptyBox);
        }
        if self.is_finite() {
            return Ok(vec![1]);
        }
        let mut ns = Vec::new();
        let mut n = 4u64;
        while n < cap {
            ns.push(n);
            n *= 2;
        }
        ns.push(cap);
        Ok(ns)
    }

    /// `|{t in F : Kt subset of F}| / |F|`, the left-invariance ratio.
    pub fn invariance_ratio(&self, f: &FolnerSet, k: &FolnerSet) -> Result<f64, GroupError> {
        let mut hits = 0usize;
        for t in f.iter() {
            let mut inside = true;
            for kk in k.iter() {
                if !f.contains(&self.mul(kk, t)?) {
                    inside = false;
                    break;
                }
            }
            if inside {
                hits += 1;
            }
        }
        Ok(hits as f64 / f.len() as f64)
    }
}

/// An ordered, duplicate-free finite subset of a group with O(1) membership.
///
/// Boxes carry their schedule label `n`; arbitrary subsets (used by the
/// subset-submultiplicativity tests) carry label 0.
#[derive(Debug, Clone)]
pub struct FolnerSet {
    group: GroupDescriptor,
    elements: Vec<GroupElement>,
    index: HashMap<GroupElement, usize>,
    label: u64,
}

impl FolnerSet {
    pub fn from_elements(
        group: GroupDescriptor,
        elements: Vec<GroupElement>,
        label: u64,
    ) -> Result<Self, GroupError> {
        if elements.is_empty() {
            return Err(GroupError::EmptySet);
        }
        let mut index = HashMap::with_capacity(elements.len());
        for (i, e) in elements.iter().enumerate() {
            group.check_arity(e)?;
            if index.insert(e.clone(), i).is_some() {
                return Err(GroupError::DuplicateElement(e.clone()));
            }
        }
        Ok(Self { group, elements, index, label })
    }

    pub fn group(&self) -> &GroupDescriptor {
        &self.group
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        false // nonempty by construction
    }

    pub fn label(&self) -> u64 {
        self.label
    }

    pub fn get(&self, i: usize) -> &GroupElement {
        &self.elements[i]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, GroupElement> {
        self.elements.iter()
    }

    pub fn index_of(&self, e: &GroupElement) -> Option<usize> {
        self.index.get(e).copied()
    }

    pub fn contains(&self, e: &GroupElement) -> bool {
        self.index.contains_key(e)
    }

    pub fn is_subset_of(&self, other: &FolnerSet) -> bool {
        self.elements.iter().all(|e| other.contains(e))
    }
}
