//! Finite-dimensional spectral computations on assembled sections:
//! log-determinants by Cholesky, full Hermitian spectra, exact integer
//! determinants, kappa-truncated eigenvalue products, and empirical spectral
//! measures.

use ndarray::Array1;
use ndarray_linalg::{Cholesky, EigValsh, UPLO};
use num_bigint::{BigInt, BigUint};
use num_complex::Complex64;
use num_traits::{Signed, Zero};
use thiserror::Error;

use crate::section::{FiniteSection, IntMatrix, SectionData};

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("matrix is not square")]
    NotSquare,
    #[error("matrix is not Hermitian (defect {defect:.3e} exceeds {tol:.3e})")]
    NotHermitian { defect: f64, tol: f64 },
    #[error("matrix is not positive definite ({0})")]
    NotPositiveDefinite(CholeskyFailure),
    #[error("eigensolver failed: {0}")]
    Lapack(String),
}

/// Sign-classified Cholesky breakdown: a vanishing pivot means a singular
/// leading minor, a negative one an indefinite matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CholeskyFailure {
    Singular { pivot_index: usize },
    Indefinite { pivot_index: usize, pivot: f64 },
}

impl std::fmt::Display for CholeskyFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CholeskyFailure::Singular { pivot_index } => {
                write!(f, "singular: pivot {pivot_index} vanishes")
            }
            CholeskyFailure::Indefinite { pivot_index, pivot } => {
                write!(f, "indefinite: pivot {pivot_index} = {pivot:.6e} < 0")
            }
        }
    }
}

/// Numerical-kernel threshold: `size * |H| * 2^-45`, a scaled
/// machine-precision rule separating structural zeros from small but genuine
/// eigenvalues.
pub fn default_keps(size: usize, norm_bound: f64) -> f64 {
    (size as f64) * norm_bound.max(1.0) * 2f64.powi(-45)
}

/// Spectrum of one Hermitian section together with the normalization needed
/// to read it as the empirical spectral measure `mu_{g,F}` (total mass `d`).
#[derive(Debug, Clone)]
pub struct SpectralSummary {
    /// ascending
    pub eigenvalues: Vec<f64>,
    /// `sum log lambda` over the nonkernel spectrum; `-inf` when the
    /// numerical kernel is nonempty; NaN if eigenvalues below `-keps` exist
    pub logdet: f64,
    /// `#{ lambda : |lambda| <= keps }`
    pub kernel_dim: usize,
    /// matrix order = block_dim * set_size
    pub size: usize,
    pub set_size: usize,
    pub block_dim: usize,
    pub keps: f64,
}

impl SpectralSummary {
    pub fn from_eigenvalues(
        mut eigenvalues: Vec<f64>,
        set_size: usize,
        block_dim: usize,
        keps: f64,
    ) -> Self {
        eigenvalues.sort_by(|a, b| a.total_cmp(b));
        let size = eigenvalues.len();
        let kernel_dim = eigenvalues.iter().filter(|l| l.abs() <= keps).count();
        let negative = eigenvalues.iter().any(|l| *l < -keps);
        let logdet = if negative {
            f64::NAN
        } else if kernel_dim > 0 {
            f64::NEG_INFINITY
        } else {
            eigenvalues.iter().map(|l| l.ln()).sum()
        };
        Self { eigenvalues, logdet, kernel_dim, size, set_size, block_dim, keps }
    }

    /// Kernel fraction `dim ker / (d |F|)` in [0, 1].
    pub fn kernel_fraction(&self) -> f64 {
        self.kernel_dim as f64 / self.size as f64
    }
}

fn hermitian_precheck(h: &FiniteSection) -> Result<(), SpectralError> {
    if !h.is_square() {
        return Err(SpectralError::NotSquare);
    }
    if h.hermitian_by_construction() {
        return Ok(());
    }
    let tol = 1e-10 * h.norm_bound().max(1.0);
    let defect = h.hermitian_defect();
    if defect > tol {
        return Err(SpectralError::NotHermitian { defect, tol });
    }
    Ok(())
}

enum ScalarChol {
    Done { logdet: f64, min_pivot: f64 },
    Broke { pivot_index: usize, pivot: f64 },
}

/// Unblocked in-place Cholesky, kept as the classifier for LAPACK failures:
/// it reports the exact offending pivot and its sign.
fn scalar_cholesky(h: &FiniteSection) -> ScalarChol {
    let n = h.rows();
    let mut a: Vec<Complex64> = (0..n)
        .flat_map(|r| (0..n).map(move |c| h.at(r, c)))
        .collect();
    let mut logdet = 0.0f64;
    let mut min_pivot = f64::INFINITY;
    for k in 0..n {
        let mut pivot = a[k * n + k].re;
        for j in 0..k {
            pivot -= a[k * n + j].norm_sqr();
        }
        if pivot <= 0.0 {
            return ScalarChol::Broke { pivot_index: k, pivot };
        }
        min_pivot = min_pivot.min(pivot);
        let root = pivot.sqrt();
        logdet += 2.0 * root.ln();
        for i in k + 1..n {
            let mut v = a[i * n + k];
            for j in 0..k {
                v -= a[i * n + j] * a[k * n + j].conj();
            }
            a[i * n + k] = v / root;
        }
        a[k * n + k] = Complex64::new(root, 0.0);
    }
    ScalarChol::Done { logdet, min_pivot }
}

/// On LAPACK breakdown, re-run the unblocked pass: if it completes (marginal
/// disagreement) its log-determinant is the honest answer; otherwise the
/// offending pivot's sign classifies the failure.
fn scalar_fallback(h: &FiniteSection) -> Result<(f64, f64), SpectralError> {
    match scalar_cholesky(h) {
        ScalarChol::Done { logdet, min_pivot } => Ok((logdet, min_pivot)),
        ScalarChol::Broke { pivot_index, pivot } => {
            let keps = default_keps(h.rows(), h.norm_bound());
            let failure = if pivot < -keps {
                CholeskyFailure::Indefinite { pivot_index, pivot }
            } else {
                CholeskyFailure::Singular { pivot_index }
            };
            Err(SpectralError::NotPositiveDefinite(failure))
        }
    }
}

/// `log det H` of a Hermitian positive-definite section, as twice the
/// log-product of the Cholesky diagonal.
pub fn logdet_cholesky(h: &FiniteSection) -> Result<f64, SpectralError> {
    logdet_cholesky_detailed(h).map(|(logdet, _)| logdet)
}

/// As `logdet_cholesky`, also reporting the smallest squared diagonal of the
/// factor. A factorization can scrape through on a numerically singular
/// matrix with a tiny positive pivot; callers watching for kernels must
/// compare this against the keps threshold.
pub fn logdet_cholesky_detailed(h: &FiniteSection) -> Result<(f64, f64), SpectralError> {
    hermitian_precheck(h)?;
    let from_diag = |diag: Vec<f64>| -> (f64, f64) {
        let logdet = 2.0 * diag.iter().map(|v| v.ln()).sum::<f64>();
        let min_pivot = diag.iter().fold(f64::INFINITY, |a, v| a.min(v * v));
        (logdet, min_pivot)
    };
    match h.data() {
        SectionData::Real(m) => match m.cholesky(UPLO::Lower) {
            Ok(l) => Ok(from_diag(l.diag().to_vec())),
            Err(_) => scalar_fallback(h),
        },
        SectionData::Complex(m) => match m.cholesky(UPLO::Lower) {
            Ok(l) => Ok(from_diag(l.diag().iter().map(|v| v.re).collect())),
            Err(_) => scalar_fallback(h),
        },
    }
}

/// Full ascending spectrum of a Hermitian section, with the numerical kernel
/// counted at the default threshold.
pub fn eigs_sym(h: &FiniteSection) -> Result<SpectralSummary, SpectralError> {
    eigs_sym_with(h, None)
}

/// As `eigs_sym` with an explicit kernel threshold.
pub fn eigs_sym_with(
    h: &FiniteSection,
    keps: Option<f64>,
) -> Result<SpectralSummary, SpectralError> {
    hermitian_precheck(h)?;
    let vals: Array1<f64> = match h.data() {
        SectionData::Real(m) => m
            .eigvalsh(UPLO::Lower)
            .map_err(|e| SpectralError::Lapack(e.to_string()))?,
        SectionData::Complex(m) => m
            .eigvalsh(UPLO::Lower)
            .map_err(|e| SpectralError::Lapack(e.to_string()))?,
    };
    let keps = keps.unwrap_or_else(|| default_keps(h.rows(), h.norm_bound()));
    Ok(SpectralSummary::from_eigenvalues(
        vals.to_vec(),
        h.set().len(),
        h.row_blocks(),
        keps,
    ))
}

const BAREISS_MAX: usize = 512;

/// `|det M|` of an integer matrix, exactly: fraction-free Bareiss elimination
/// up to order 512, unimodular diagonalization (Smith-style) beyond. Equals
/// the order of the cokernel `Z^n / M Z^n` when nonzero.
pub fn smith_abs_det(m: &IntMatrix) -> Result<BigUint, SpectralError> {
    if m.rows != m.cols {
        return Err(SpectralError::NotSquare);
    }
    let n = m.rows;
    if n == 0 {
        return Ok(BigUint::from(1u8));
    }
    if n <= BAREISS_MAX {
        Ok(bareiss_abs_det(m))
    } else {
        Ok(diagonalize_abs_det(m))
    }
}

fn bareiss_abs_det(m: &IntMatrix) -> BigUint {
    let n = m.rows;
    let mut a = m.data.clone();
    let mut prev = BigInt::from(1);
    for k in 0..n.saturating_sub(1) {
        if a[k * n + k].is_zero() {
            let Some(r) = (k + 1..n).find(|r| !a[r * n + k].is_zero()) else {
                return BigUint::zero();
            };
            for j in 0..n {
                a.swap(k * n + j, r * n + j); // sign flip, irrelevant for |det|
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let num = &a[i * n + j] * &a[k * n + k] - &a[i * n + k] * &a[k * n + j];
                a[i * n + j] = num / &prev; // exact by Sylvester's identity
            }
            a[i * n + k] = BigInt::zero();
        }
        prev = a[k * n + k].clone();
    }
    a[n * n - 1].magnitude().clone()
}

/// Diagonalize by unimodular row/column operations; the pivot product is the
/// determinant up to sign.
fn diagonalize_abs_det(m: &IntMatrix) -> BigUint {
    let n = m.rows;
    let mut a = m.data.clone();
    let at = |a: &Vec<BigInt>, i: usize, j: usize| -> BigInt { a[i * n + j].clone() };
    let mut det = BigUint::from(1u8);
    for k in 0..n {
        loop {
            // smallest nonzero entry of the trailing block into the pivot
            let mut best: Option<(usize, usize)> = None;
            for i in k..n {
                for j in k..n {
                    if !a[i * n + j].is_zero()
                        && best
                            .map(|(bi, bj)| {
                                a[i * n + j].magnitude() < a[bi * n + bj].magnitude()
                            })
                            .unwrap_or(true)
                    {
                        best = Some((i, j));
                    }
                }
            }
            let Some((bi, bj)) = best else { return BigUint::zero() };
            if bi != k {
                for j in 0..n {
                    a.swap(k * n + j, bi * n + j);
                }
            }
            if bj != k {
                for i in 0..n {
                    a.swap(i * n + k, i * n + bj);
                }
            }
            let pivot = at(&a, k, k);
            let mut clean = true;
            for i in k + 1..n {
                let q = &a[i * n + k] / &pivot;
                if !q.is_zero() {
                    for j in k..n {
                        let sub = &q * &a[k * n + j];
                        a[i * n + j] -= sub;
                    }
                }
                if !a[i * n + k].is_zero() {
                    clean = false;
                }
            }
            for j in k + 1..n {
                let q = &a[k * n + j] / &pivot;
                if !q.is_zero() {
                    for i in k..n {
                        let sub = &q * &a[i * n + k];
                        a[i * n + j] -= sub;
                    }
                }
                if !a[k * n + j].is_zero() {
                    clean = false;
                }
            }
            if clean {
                det *= pivot.magnitude();
                break;
            }
        }
    }
    det
}

/// `D_{g,F,kappa}`: the log-product and count of eigenvalues in
/// `(keps, kappa]`; the numerical kernel is excluded to match the open-at-zero
/// convention.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedProduct {
    pub kappa: f64,
    pub log_product: f64,
    pub count: usize,
}

pub fn truncated_log_product(s: &SpectralSummary, kappa: f64) -> TruncatedProduct {
    assert!(kappa > 0.0, "kappa must be positive");
    let mut log_product = 0.0;
    let mut count = 0;
    for &l in &s.eigenvalues {
        if l > s.keps && l <= kappa {
            log_product += l.ln();
            count += 1;
        }
        if l > kappa {
            break;
        }
    }
    TruncatedProduct { kappa, log_product, count }
}

/// Moments `m_k = (d/size) sum lambda^k` of the empirical spectral measure,
/// for k = 0..=k_max; total mass is the block dimension d.
pub fn empirical_moments(s: &SpectralSummary, k_max: usize) -> Vec<f64> {
    (0..=k_max as i32)
        .map(|k| {
            let sum: f64 = s.eigenvalues.iter().map(|l| l.powi(k)).sum();
            (s.block_dim as f64) * sum / (s.size as f64)
        })
        .collect()
}

/// Plain f64 LU determinant with partial pivoting; cross-check oracle for
/// the exact path at small orders.
pub fn det_lu_f64(m: &IntMatrix) -> f64 {
    let n = m.rows;
    let mut a: Vec<f64> = m.data.iter().map(crate::groupring::bigint_to_f64).collect();
    let mut det = 1.0f64;
    for k in 0..n {
        let piv = (k..n)
            .max_by(|&i, &j| a[i * n + k].abs().total_cmp(&a[j * n + k].abs()))
            .unwrap();
        if a[piv * n + k] == 0.0 {
            return 0.0;
        }
        if piv != k {
            for j in 0..n {
                a.swap(k * n + j, piv * n + j);
            }
            det = -det;
        }
        det *= a[k * n + k];
        for i in k + 1..n {
            let f = a[i * n + k] / a[k * n + k];
            for j in k..n {
                a[i * n + j] -= f * a[k * n + j];
            }
        }
    }
    det
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groupring::{Coeff, Domain, RingElement, RingMatrix};
    use crate::groups::{FolnerSet, GroupDescriptor, GroupElement};
    use crate::parse::parse_ring_expr;
    use crate::section::{assemble, assemble_exact_int, Side};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn section_of(text: &str, g: &GroupDescriptor, n: u64) -> FiniteSection {
        let m = parse_ring_expr(text, g).unwrap().into_matrix();
        assemble(&m, &g.folner_box(n).unwrap(), Side::Left).unwrap()
    }

    #[test]
    fn logdet_examples() {
        let z = GroupDescriptor::lattice(1).unwrap();
        let id = section_of("1", &z, 7);
        assert_eq!(logdet_cholesky(&id).unwrap(), 0.0);

        let s = section_of("5-2*x-2/x", &z, 2);
        assert!((logdet_cholesky(&s).unwrap() - 21f64.ln()).abs() < 1e-14);

        let diag = section_of("[[2,0],[0,3]]", &z, 1);
        assert!((logdet_cholesky(&diag).unwrap() - 6f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn cholesky_failure_classification() {
        let z = GroupDescriptor::lattice(1).unwrap();
        let singular = section_of("[[1,1],[1,1]]", &z, 1);
        match logdet_cholesky(&singular) {
            Err(SpectralError::NotPositiveDefinite(CholeskyFailure::Singular {
                pivot_index,
            })) => assert_eq!(pivot_index, 1),
            other => panic!("expected singular, got {other:?}"),
        }
        let indefinite = section_of("[[1,2],[2,1]]", &z, 1);
        match logdet_cholesky(&indefinite) {
            Err(SpectralError::NotPositiveDefinite(CholeskyFailure::Indefinite {
                pivot_index,
                pivot,
            })) => {
                assert_eq!(pivot_index, 1);
                assert!((pivot + 3.0).abs() < 1e-12);
            }
            other => panic!("expected indefinite, got {other:?}"),
        }
    }

    #[test]
    fn eigs_examples() {
        let z = GroupDescriptor::lattice(1).unwrap();
        let s = eigs_sym(&section_of("5-2*x-2/x", &z, 2)).unwrap();
        assert!((s.eigenvalues[0] - 3.0).abs() < 1e-12);
        assert!((s.eigenvalues[1] - 7.0).abs() < 1e-12);
        assert_eq!(s.kernel_dim, 0);
        assert!((s.logdet - 21f64.ln()).abs() < 1e-12);

        let id = eigs_sym(&section_of("1", &z, 5)).unwrap();
        assert!(id.eigenvalues.iter().all(|l| (l - 1.0).abs() < 1e-12));
        assert_eq!(id.kernel_dim, 0);

        let z2 = GroupDescriptor::finite_cyclic(vec![2]).unwrap();
        let rank_one = eigs_sym(&section_of("1+x", &z2, 1)).unwrap();
        assert!(rank_one.eigenvalues[0].abs() <= rank_one.keps);
        assert!((rank_one.eigenvalues[1] - 2.0).abs() < 1e-12);
        assert_eq!(rank_one.kernel_dim, 1);
        assert_eq!(rank_one.logdet, f64::NEG_INFINITY);
        assert_eq!(rank_one.kernel_fraction(), 0.5);
    }

    #[test]
    fn eigs_rejects_non_hermitian() {
        let z = GroupDescriptor::lattice(1).unwrap();
        let s = section_of("x", &z, 3);
        assert!(matches!(
            eigs_sym(&s),
            Err(SpectralError::NotHermitian { .. })
        ));
    }

    #[test]
    fn smith_examples() {
        let z4 = GroupDescriptor::finite_cyclic(vec![4]).unwrap();
        let f = parse_ring_expr("x-2", &z4).unwrap().into_matrix();
        let m = assemble_exact_int(&f, &z4.folner_box(1).unwrap()).unwrap();
        assert_eq!(smith_abs_det(&m).unwrap(), BigUint::from(15u8));

        let mut id = IntMatrix::zeros(3, 3);
        for i in 0..3 {
            id.set(i, i, BigInt::from(1));
        }
        assert_eq!(smith_abs_det(&id).unwrap(), BigUint::from(1u8));

        let mut d = IntMatrix::zeros(2, 2);
        d.set(0, 0, BigInt::from(2));
        d.set(1, 1, BigInt::from(3));
        assert_eq!(smith_abs_det(&d).unwrap(), BigUint::from(6u8));
    }

    #[test]
    fn smith_matches_lu_at_small_orders() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..120 {
            let n = rng.gen_range(1..=12);
            let mut m = IntMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    m.set(i, j, BigInt::from(rng.gen_range(-5i64..=5)));
                }
            }
            let exact = smith_abs_det(&m).unwrap();
            let lu = det_lu_f64(&m).abs().round();
            assert_eq!(
                crate::groupring::bigint_to_f64(&BigInt::from(exact.clone())),
                lu,
                "order {n}: smith {exact} vs lu {lu}"
            );
        }
    }

    #[test]
    fn diagonalization_agrees_with_bareiss() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..40 {
            let n = rng.gen_range(1..=8);
            let mut m = IntMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    m.set(i, j, BigInt::from(rng.gen_range(-6i64..=6)));
                }
            }
            assert_eq!(bareiss_abs_det(&m), diagonalize_abs_det(&m));
        }
        // singular case
        let mut s = IntMatrix::zeros(3, 3);
        for j in 0..3 {
            s.set(0, j, BigInt::from(j as i64 + 1));
            s.set(1, j, BigInt::from(2 * (j as i64 + 1)));
            s.set(2, j, BigInt::from(7));
        }
        assert_eq!(bareiss_abs_det(&s), BigUint::zero());
        assert_eq!(diagonalize_abs_det(&s), BigUint::zero());
    }

    #[test]
    fn truncated_product_examples() {
        let synth = |vals: Vec<f64>| SpectralSummary::from_eigenvalues(vals, 2, 1, 1e-12);
        let a = truncated_log_product(&synth(vec![3.0, 7.0]), 0.5);
        assert_eq!((a.log_product, a.count), (0.0, 0));

        let b = truncated_log_product(&synth(vec![0.1, 0.2, 3.0]), 0.5);
        assert!((b.log_product - 0.02f64.ln()).abs() < 1e-12);
        assert_eq!(b.count, 2);

        let c = truncated_log_product(&synth(vec![0.0, 2.0]), 0.5);
        assert_eq!((c.log_product, c.count), (0.0, 0));
    }

    #[test]
    fn moment_examples() {
        let z = GroupDescriptor::lattice(1).unwrap();
        let s = eigs_sym(&section_of("5-2*x-2/x", &z, 2)).unwrap();
        let m = empirical_moments(&s, 2);
        assert!((m[0] - 1.0).abs() < 1e-12);
        assert!((m[1] - 5.0).abs() < 1e-12);
        assert!((m[2] - 29.0).abs() < 1e-12);

        let id = eigs_sym(&section_of("1", &z, 6)).unwrap();
        for mk in empirical_moments(&id, 4) {
            assert!((mk - 1.0).abs() < 1e-12);
        }

        let zero = SpectralSummary::from_eigenvalues(vec![0.0; 6], 3, 2, 1e-12);
        let mz = empirical_moments(&zero, 3);
        assert_eq!(mz, vec![2.0, 0.0, 0.0, 0.0]);
    }

    /// Random star-symmetric positive element over Z^2 and a random subset
    /// containing the identity, for the submultiplicativity trials.
    fn random_pd_element(rng: &mut ChaCha8Rng) -> RingMatrix {
        let g = GroupDescriptor::lattice(2).unwrap();
        let mut h = RingElement::zero(g.clone(), Domain::Integer);
        for _ in 0..3 {
            let coords: Vec<i64> = (0..2).map(|_| rng.gen_range(-2i64..=2)).collect();
            let s = g.element(&coords).unwrap();
            let c = Coeff::from_i64(rng.gen_range(-3i64..=3));
            h = h.add(&RingElement::monomial(g.clone(), s, c).unwrap()).unwrap();
        }
        let sym = h.add(&h.star()).unwrap();
        let shift = RingElement::monomial(
            g.clone(),
            g.identity(),
            Coeff::from_i64(2 * sym.l1_norm() as i64 + 1),
        )
        .unwrap();
        RingMatrix::from_element(sym.add(&shift).unwrap())
    }

    fn random_subset(rng: &mut ChaCha8Rng, g: &GroupDescriptor) -> Vec<GroupElement> {
        let mut elems = vec![g.identity()];
        for a in 0..4i64 {
            for b in 0..4i64 {
                if (a, b) != (0, 0) && rng.gen_bool(0.5) {
                    elems.push(g.element(&[a, b]).unwrap());
                }
            }
        }
        elems
    }

    #[test]
    fn subset_submultiplicativity_of_determinants() {
        let g = GroupDescriptor::lattice(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..200 {
            let pd = random_pd_element(&mut rng);
            let xs = random_subset(&mut rng, &g);
            let ys = random_subset(&mut rng, &g);
            let inter: Vec<GroupElement> =
                xs.iter().filter(|e| ys.contains(e)).cloned().collect();
            let mut union = xs.clone();
            for e in &ys {
                if !union.contains(e) {
                    union.push(e.clone());
                }
            }
            let logdet = |elems: Vec<GroupElement>| -> f64 {
                let set = FolnerSet::from_elements(g.clone(), elems, 0).unwrap();
                logdet_cholesky(&assemble(&pd, &set, Side::Left).unwrap()).unwrap()
            };
            let lhs = logdet(union) + logdet(inter);
            let rhs = logdet(xs) + logdet(ys);
            let slack = 1e-9 * (1.0 + lhs.abs() + rhs.abs());
            assert!(lhs <= rhs + slack, "lhs {lhs} > rhs {rhs}");
        }
    }

    #[test]
    fn cholesky_agrees_with_eigenvalues() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let g = GroupDescriptor::lattice(2).unwrap();
        for _ in 0..25 {
            let pd = random_pd_element(&mut rng);
            let set = g.folner_box(4).unwrap();
            let sec = assemble(&pd, &set, Side::Left).unwrap();
            let ld = logdet_cholesky(&sec).unwrap();
            let sum: f64 = eigs_sym(&sec).unwrap().logdet;
            assert!((ld - sum).abs() <= 1e-8 * sec.rows() as f64);
        }
    }

    #[test]
    fn moment_consistency_with_ring_traces() {
        let g2 = GroupDescriptor::lattice(2).unwrap();
        let cases = [
            parse_ring_expr("4 + x + 1/x + y + 1/y", &g2).unwrap().into_matrix(),
            parse_ring_expr("[[4, 1+x],[1+1/x, 4+y+1/y]]", &g2).unwrap().into_matrix(),
        ];
        for gm in &cases {
            assert!(gm.is_star_symmetric());
            let d = gm.rows();
            let norm1 = gm.l1_norm();
            for n in [8u64, 16, 32] {
                let set = g2.folner_box(n).unwrap();
                let sec = assemble(gm, &set, Side::Left).unwrap();
                let spec = eigs_sym(&sec).unwrap();
                let moments = empirical_moments(&spec, 4);
                for k in 0..=4usize {
                    let pk = gm.ring_power(k).unwrap();
                    let exact = pk.trace().unwrap().to_f64();
                    let support = FolnerSet::from_elements(
                        g2.clone(),
                        pk.support_union(),
                        0,
                    )
                    .unwrap();
                    let ratio = g2.invariance_ratio(&set, &support).unwrap();
                    let bound = norm1.powi(k as i32) * (1.0 - ratio) * 2.0 * d as f64;
                    let err = (moments[k] - exact).abs();
                    assert!(
                        err <= bound + 1e-9,
                        "k={k} n={n}: err {err} > bound {bound}"
                    );
                }
            }
        }
    }
}
