//! The Folner-limit determinant estimator: per-site log-determinants of
//! growing sections, whose infimum certifies an upper bound and whose limit
//! is the operator determinant; plus kernel-dimension estimation and the
//! spectral-tail diagnostic.

use std::time::{Duration, Instant};

use num_rational::BigRational;
use thiserror::Error;

use crate::groupring::{Coeff, RingError, RingMatrix};
use crate::groups::GroupError;
use crate::section::{assemble, grow, FiniteSection, SectionError, Side};
use crate::spectral::{
    default_keps, eigs_sym, logdet_cholesky_detailed, truncated_log_product, SpectralError,
};

#[derive(Debug, Error)]
pub enum FkError {
    #[error("schedule is empty")]
    EmptySchedule,
    #[error("operator is not star-symmetric")]
    NotStarSymmetric,
    #[error("operator is not positive: eigenvalue {lambda_min:.6e} at box n={n}")]
    NotPositive { n: u64, lambda_min: f64 },
    #[error("epsilons must be strictly decreasing and positive")]
    BadEpsilons,
    #[error("tail threshold lambda must exceed 1")]
    BadLambda,
    #[error(transparent)]
    Ring(#[from] RingError),
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Section(#[from] SectionError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// One schedule point: box label, matrix order, per-site log-determinant
/// `v_n = log det(g_F) / |F|`, measured kernel fraction, and wall time.
#[derive(Debug, Clone)]
pub struct TracePoint {
    pub n: u64,
    pub size: usize,
    pub set_size: usize,
    pub v: f64,
    pub kernel_fraction: f64,
    pub wall: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    /// Last two schedule points agree within tol.
    Converged { value: f64, est_error: f64 },
    /// Not converged; the infimum so far still certifies an upper bound.
    UpperBoundOnly { running_inf: f64 },
    /// Kernel fraction persisted above threshold: the determinant is 0.
    KernelDetected,
}

#[derive(Debug, Clone)]
pub struct ApproximationTrace {
    pub points: Vec<TracePoint>,
    /// `min v_n`; an upper bound on the limit because the net converges to
    /// its infimum.
    pub running_inf: f64,
    pub verdict: Verdict,
}

impl ApproximationTrace {
    /// Best available estimate of `log det`: the converged value, `-inf` on a
    /// detected kernel, the certified upper bound otherwise.
    pub fn value(&self) -> f64 {
        match &self.verdict {
            Verdict::Converged { value, .. } => *value,
            Verdict::UpperBoundOnly { running_inf } => *running_inf,
            Verdict::KernelDetected => f64::NEG_INFINITY,
        }
    }

    pub fn is_converged(&self) -> bool {
        matches!(self.verdict, Verdict::Converged { .. })
    }

    /// Columns: n, size, logdet_per_site, running_inf, wall_ms.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,size,logdet_per_site,running_inf,wall_ms\n");
        let mut inf = f64::INFINITY;
        for p in &self.points {
            inf = inf.min(p.v);
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                p.n,
                p.size,
                p.v,
                inf,
                p.wall.as_millis()
            ));
        }
        out
    }
}

/// Kernel fractions `dim ker / (d |F_n|)` along the schedule.
#[derive(Debug, Clone)]
pub struct KernelEstimate {
    pub fractions: Vec<(u64, f64)>,
    pub limit_est: f64,
    pub est_error: f64,
}

/// Normalized persistence threshold for declaring a true kernel; genuine
/// kernel vectors contribute at least 1/size, far above this noise floor.
fn kernel_fraction_threshold(size: usize) -> f64 {
    10.0 * (size as f64) * 2f64.powi(-45)
}

struct PointMeasurement {
    v: f64,
    kernel_fraction: f64,
}

/// Cholesky first; fall back to the full spectrum and count the numerical
/// kernel on breakdown, or when the factorization scraped through with a
/// pivot at the kernel threshold.
fn measure(section: &FiniteSection, n: u64) -> Result<PointMeasurement, FkError> {
    let set_size = section.set().len() as f64;
    let keps = default_keps(section.rows(), section.norm_bound());
    match logdet_cholesky_detailed(section) {
        Ok((logdet, min_pivot)) if min_pivot > keps => {
            Ok(PointMeasurement { v: logdet / set_size, kernel_fraction: 0.0 })
        }
        Ok(_) | Err(SpectralError::NotPositiveDefinite(_)) => {
            let spec = eigs_sym(section)?;
            let lambda_min = spec.eigenvalues.first().copied().unwrap_or(0.0);
            if lambda_min < -spec.keps {
                return Err(FkError::NotPositive { n, lambda_min });
            }
            let v = if spec.kernel_dim > 0 {
                f64::NEG_INFINITY
            } else {
                spec.logdet / set_size
            };
            Ok(PointMeasurement { v, kernel_fraction: spec.kernel_fraction() })
        }
        Err(e) => Err(e.into()),
    }
}

/// `log det` of a star-symmetric positive `g` by per-site section
/// determinants over the schedule of Folner boxes.
pub fn fk_det_positive(
    g: &RingMatrix,
    schedule: &[u64],
    tol: f64,
) -> Result<ApproximationTrace, FkError> {
    if schedule.is_empty() {
        return Err(FkError::EmptySchedule);
    }
    if !g.is_star_symmetric() {
        return Err(FkError::NotStarSymmetric);
    }
    let group = g.group().clone();
    let mut points: Vec<TracePoint> = Vec::with_capacity(schedule.len());
    let mut running_inf = f64::INFINITY;
    let mut prev: Option<FiniteSection> = None;
    let mut prev_hit = false;
    let mut kernel_confirmed = false;
    for &n in schedule {
        let start = Instant::now();
        let set = group.folner_box(n)?;
        let section = match prev.take() {
            Some(p) if p.set().is_subset_of(&set) => grow(g, &p, &set)?,
            _ => assemble(g, &set, Side::Left)?,
        };
        let m = measure(&section, n)?;
        running_inf = running_inf.min(m.v);
        points.push(TracePoint {
            n,
            size: section.rows(),
            set_size: set.len(),
            v: m.v,
            kernel_fraction: m.kernel_fraction,
            wall: start.elapsed(),
        });
        let hit = m.kernel_fraction > kernel_fraction_threshold(section.rows());
        if hit && (prev_hit || schedule.len() == 1) {
            kernel_confirmed = true;
            break;
        }
        prev_hit = hit;
        prev = Some(section);
    }
    let verdict = if kernel_confirmed {
        Verdict::KernelDetected
    } else if points.len() >= 2 {
        let last = points[points.len() - 1].v;
        let prev_v = points[points.len() - 2].v;
        if (last - prev_v).abs() <= tol {
            Verdict::Converged { value: last, est_error: (last - prev_v).abs() }
        } else {
            Verdict::UpperBoundOnly { running_inf }
        }
    } else if group.is_finite() {
        // the full group is one exact section
        Verdict::Converged { value: points[0].v, est_error: 0.0 }
    } else {
        Verdict::UpperBoundOnly { running_inf }
    };
    Ok(ApproximationTrace { points, running_inf, verdict })
}

fn halve(mut trace: ApproximationTrace) -> ApproximationTrace {
    for p in &mut trace.points {
        p.v *= 0.5;
    }
    trace.running_inf *= 0.5;
    trace.verdict = match trace.verdict {
        Verdict::Converged { value, est_error } => {
            Verdict::Converged { value: value * 0.5, est_error: est_error * 0.5 }
        }
        Verdict::UpperBoundOnly { running_inf } => {
            Verdict::UpperBoundOnly { running_inf: running_inf * 0.5 }
        }
        Verdict::KernelDetected => Verdict::KernelDetected,
    };
    trace
}

/// `log det` of arbitrary rectangular `f` as half the determinant of `f*f`;
/// only `f*f` is ever sectioned so kernel conventions follow `ker f`.
pub fn fk_det_general(
    f: &RingMatrix,
    schedule: &[u64],
    tol: f64,
) -> Result<ApproximationTrace, FkError> {
    let h = f.star().mat_mul(f)?;
    // halving also halves successive differences, so double the inner tol
    Ok(halve(fk_det_positive(&h, schedule, 2.0 * tol)?))
}

/// Kernel fraction of `f` (via `f*f`) along the schedule.
pub fn vn_kernel_dim(f: &RingMatrix, schedule: &[u64]) -> Result<KernelEstimate, FkError> {
    if schedule.is_empty() {
        return Err(FkError::EmptySchedule);
    }
    let h = f.star().mat_mul(f)?;
    let group = h.group().clone();
    let mut fractions = Vec::with_capacity(schedule.len());
    let mut prev: Option<FiniteSection> = None;
    for &n in schedule {
        let set = group.folner_box(n)?;
        let section = match prev.take() {
            Some(p) if p.set().is_subset_of(&set) => grow(&h, &p, &set)?,
            _ => assemble(&h, &set, Side::Left)?,
        };
        let frac = measure(&section, n)?.kernel_fraction;
        fractions.push((n, frac));
        prev = Some(section);
    }
    let limit_est = fractions.last().unwrap().1;
    let est_error = if fractions.len() >= 2 {
        (limit_est - fractions[fractions.len() - 2].1).abs()
    } else {
        0.0
    };
    Ok(KernelEstimate { fractions, limit_est, est_error })
}

/// Regularized determinants `det(g + eps)` for a strictly decreasing list of
/// positive shifts; the shift is applied exactly in the ring.
pub fn epsilon_sweep(
    g: &RingMatrix,
    epsilons: &[f64],
    schedule: &[u64],
    tol: f64,
) -> Result<Vec<(f64, ApproximationTrace)>, FkError> {
    if epsilons.is_empty()
        || epsilons.iter().any(|e| !(*e > 0.0))
        || epsilons.windows(2).any(|w| w[1] >= w[0])
    {
        return Err(FkError::BadEpsilons);
    }
    if !g.is_star_symmetric() {
        return Err(FkError::NotStarSymmetric);
    }
    let mut out = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let exact = BigRational::from_float(eps).ok_or(FkError::BadEpsilons)?;
        let shifted = g.add_scalar_identity(&Coeff::Rat(exact))?;
        out.push((eps, fk_det_positive(&shifted, schedule, tol)?));
    }
    Ok(out)
}

/// Tail report for one kappa: `(n, D_{g,F_n,kappa}^{-1/|F_n|})` per point.
#[derive(Debug, Clone)]
pub struct TailDiagnostic {
    pub lambda: f64,
    /// Largest grid kappa whose ratios stay below lambda at the two largest
    /// boxes; None when the search fails (a report, not an error).
    pub kappa: Option<f64>,
    pub ratios: Vec<(u64, f64)>,
    pub pass: bool,
}

/// Check `limsup D^{-1/|F|} <= lambda` on a descending geometric kappa-grid.
/// The ratio is monotone in kappa, so the largest passing kappa is the
/// sharpest certified statement.
pub fn tail_diagnostic(
    g: &RingMatrix,
    lambda: f64,
    schedule: &[u64],
) -> Result<TailDiagnostic, FkError> {
    if !(lambda > 1.0) {
        return Err(FkError::BadLambda);
    }
    if schedule.is_empty() {
        return Err(FkError::EmptySchedule);
    }
    if !g.is_star_symmetric() {
        return Err(FkError::NotStarSymmetric);
    }
    let group = g.group().clone();
    let mut spectra = Vec::with_capacity(schedule.len());
    let mut prev: Option<FiniteSection> = None;
    for &n in schedule {
        let set = group.folner_box(n)?;
        let section = match prev.take() {
            Some(p) if p.set().is_subset_of(&set) => grow(g, &p, &set)?,
            _ => assemble(g, &set, Side::Left)?,
        };
        spectra.push((n, set.len(), eigs_sym(&section)?));
        prev = Some(section);
    }
    let lambda_max = spectra
        .last()
        .and_then(|(_, _, s)| s.eigenvalues.last().copied())
        .unwrap_or(1.0);
    let kappa_max = lambda_max.min(1.0) * (1.0 - 1e-9);
    let ratios_at = |kappa: f64| -> Vec<(u64, f64)> {
        spectra
            .iter()
            .map(|(n, set_size, s)| {
                let tp = truncated_log_product(s, kappa);
                (*n, (-tp.log_product / *set_size as f64).exp())
            })
            .collect()
    };
    let mut last_ratios = Vec::new();
    for j in 0..25 {
        let kappa = kappa_max * 0.8f64.powi(j);
        let ratios = ratios_at(kappa);
        let tail = &ratios[ratios.len().saturating_sub(2)..];
        if tail.iter().all(|(_, r)| *r <= lambda) {
            return Ok(TailDiagnostic { lambda, kappa: Some(kappa), ratios, pass: true });
        }
        last_ratios = ratios;
    }
    Ok(TailDiagnostic { lambda, kappa: None, ratios: last_ratios, pass: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::GroupDescriptor;
    use crate::parse::parse_ring_expr;
    use crate::section::assemble_exact_int;
    use crate::spectral::{logdet_cholesky, smith_abs_det};
    use num_bigint::BigUint;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mat(text: &str, g: &GroupDescriptor) -> RingMatrix {
        parse_ring_expr(text, g).unwrap().into_matrix()
    }

    fn z(d: usize) -> GroupDescriptor {
        GroupDescriptor::lattice(d).unwrap()
    }

    #[test]
    fn identity_is_exactly_zero() {
        let g = z(1);
        let tr = fk_det_positive(&mat("1", &g), &g.schedule(64).unwrap(), 5e-3).unwrap();
        for p in &tr.points {
            assert_eq!(p.v, 0.0);
        }
        assert_eq!(tr.verdict, Verdict::Converged { value: 0.0, est_error: 0.0 });
        assert_eq!(tr.running_inf, 0.0);
    }

    #[test]
    fn symmetric_quadratic_converges_to_two_log_two() {
        // 5-2x-2/x = (x-2)*(x-2), determinant 4 by the circle-average oracle
        let g = z(1);
        let tr =
            fk_det_positive(&mat("5-2*x-2/x", &g), &g.schedule(512).unwrap(), 5e-3).unwrap();
        assert!(tr.is_converged());
        assert!((tr.value() - 2.0 * 2f64.ln()).abs() <= 5e-3, "value {}", tr.value());
        // exact infimum: every per-site value lies above the limit
        for p in &tr.points {
            assert!(p.v >= 2.0 * 2f64.ln() - 1e-9);
        }
    }

    #[test]
    fn finite_group_kernel_detected() {
        let z2 = GroupDescriptor::finite_cyclic(vec![2]).unwrap();
        let tr = fk_det_positive(&mat("2+2*x", &z2), &z2.schedule(64).unwrap(), 5e-3).unwrap();
        assert_eq!(tr.verdict, Verdict::KernelDetected);
        assert_eq!(tr.value(), f64::NEG_INFINITY);
        assert_eq!(tr.points[0].kernel_fraction, 0.5);
    }

    #[test]
    fn general_route_halves_and_matches_oracles() {
        let g = z(1);
        // root at 2, strictly outside the circle: log 2
        let tr = fk_det_general(&mat("x-2", &g), &g.schedule(256).unwrap(), 5e-3).unwrap();
        assert!(tr.is_converged());
        assert!((tr.value() - 2f64.ln()).abs() <= 5e-3);

        // root on the circle: 0, with the known log(n+1)/n section decay
        let tr = fk_det_general(&mat("x-1", &g), &g.schedule(2048).unwrap(), 5e-3).unwrap();
        assert!(tr.is_converged());
        assert!(tr.value().abs() <= 5e-3);
        for p in &tr.points {
            let expect = ((p.set_size + 1) as f64).ln() / (2.0 * p.set_size as f64);
            assert!((p.v - expect).abs() < 1e-10, "n={} v={} expect={}", p.n, p.v, expect);
            assert!(p.v >= -1e-12);
        }

        // scalar: exact at every box
        let tr = fk_det_general(&mat("2", &g), &g.schedule(32).unwrap(), 5e-3).unwrap();
        for p in &tr.points {
            assert!((p.v - 2f64.ln()).abs() < 1e-14);
        }
        assert!((tr.value() - 2f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn bidiagonal_sections_match_exact_determinant() {
        // det of the n-box section of (x-2)*(x-2) is (4^(n+1)-1)/3
        let g = z(1);
        let h = mat("5-2*x-2/x", &g);
        for n in [1u64, 2, 3, 5, 8, 13] {
            let set = g.folner_box(n).unwrap();
            let exact = smith_abs_det(&assemble_exact_int(&h, &set).unwrap()).unwrap();
            let formula =
                (BigUint::from(4u8).pow(n as u32 + 1) - BigUint::from(1u8)) / BigUint::from(3u8);
            assert_eq!(exact, formula);
            let sec = assemble(&h, &set, Side::Left).unwrap();
            let ld = logdet_cholesky(&sec).unwrap();
            let exact_ld = crate::groupring::bigint_to_f64(&exact.clone().into()).ln();
            assert!((ld - exact_ld).abs() <= 1e-10 * (1.0 + exact_ld.abs()));
        }
    }

    #[test]
    fn kernel_dim_examples() {
        let g = z(1);
        let est = vn_kernel_dim(&mat("x-2", &g), &g.schedule(64).unwrap()).unwrap();
        assert!(est.fractions.iter().all(|(_, f)| *f == 0.0));
        assert_eq!(est.limit_est, 0.0);

        let z2 = GroupDescriptor::finite_cyclic(vec![2]).unwrap();
        let est = vn_kernel_dim(&mat("1+x", &z2), &z2.schedule(8).unwrap()).unwrap();
        assert_eq!(est.limit_est, 0.5);

        let est = vn_kernel_dim(&mat("0*x", &g), &g.schedule(16).unwrap()).unwrap();
        assert_eq!(est.limit_est, 1.0);
    }

    #[test]
    fn epsilon_sweep_examples() {
        let g = z(1);
        let sweep =
            epsilon_sweep(&mat("1", &g), &[0.1, 0.01], &g.schedule(16).unwrap(), 5e-3).unwrap();
        assert!((sweep[0].1.value() - 1.1f64.ln()).abs() < 1e-9);
        assert!((sweep[1].1.value() - 1.01f64.ln()).abs() < 1e-9);
        assert!(sweep[0].1.value() > sweep[1].1.value());

        let z2 = GroupDescriptor::finite_cyclic(vec![2]).unwrap();
        let sweep =
            epsilon_sweep(&mat("2+2*x", &z2), &[0.5], &z2.schedule(8).unwrap(), 5e-3).unwrap();
        // det [[2.5,2],[2,2.5]] = 2.25 over |F| = 2
        assert!((sweep[0].1.value() - 2.25f64.ln() / 2.0).abs() < 1e-12);

        assert!(matches!(
            epsilon_sweep(&mat("1", &g), &[0.01, 0.1], &g.schedule(8).unwrap(), 5e-3),
            Err(FkError::BadEpsilons)
        ));
        assert!(matches!(
            epsilon_sweep(&mat("1", &g), &[0.1, -0.2], &g.schedule(8).unwrap(), 5e-3),
            Err(FkError::BadEpsilons)
        ));
    }

    #[test]
    fn tail_identity_and_gapped() {
        let g = z(1);
        let d = tail_diagnostic(&mat("1", &g), 1.1, &g.schedule(32).unwrap()).unwrap();
        assert!(d.pass);
        assert!(d.ratios.iter().all(|(_, r)| (*r - 1.0).abs() < 1e-12));

        // spectrum inside [1,9]: no eigenvalues at or below any kappa < 1
        let d = tail_diagnostic(&mat("5-2*x-2/x", &g), 1.1, &g.schedule(64).unwrap()).unwrap();
        assert!(d.pass);
        assert!(d.ratios.iter().all(|(_, r)| (*r - 1.0).abs() < 1e-12));

        assert!(matches!(
            tail_diagnostic(&mat("1", &g), 0.9, &g.schedule(8).unwrap()),
            Err(FkError::BadLambda)
        ));
    }

    #[test]
    fn multiplicativity_on_finite_groups() {
        let z8 = GroupDescriptor::finite_cyclic(vec![8]).unwrap();
        let schedule = z8.schedule(8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let mut done = 0;
        while done < 12 {
            let poly = |rng: &mut ChaCha8Rng| -> RingMatrix {
                let c: Vec<i64> = (0..3).map(|_| rng.gen_range(-3i64..=3)).collect();
                mat(&format!("({}) + ({})*x + ({})*x^2", c[0], c[1], c[2]), &z8)
            };
            let f = poly(&mut rng);
            let gm = poly(&mut rng);
            let inv = |m: &RingMatrix| {
                let sec = assemble_exact_int(m, &z8.folner_box(1).unwrap()).unwrap();
                smith_abs_det(&sec).unwrap() != BigUint::from(0u8)
            };
            if !inv(&f) || !inv(&gm) {
                continue;
            }
            let prod = f.mat_mul(&gm).unwrap();
            let a = fk_det_general(&f, &schedule, 5e-3).unwrap().value();
            let b = fk_det_general(&gm, &schedule, 5e-3).unwrap().value();
            let ab = fk_det_general(&prod, &schedule, 5e-3).unwrap().value();
            assert!(
                (ab - (a + b)).abs() <= 1e-9 * (1.0 + a.abs() + b.abs()),
                "log dets {a} + {b} != {ab}"
            );
            done += 1;
        }
    }

    #[test]
    fn adjoint_symmetry_within_tol() {
        let g2 = z(2);
        for text in ["4 + x + 2*y", "5 + x*y - 2*x", "[[3+x, 1],[0, 3+1/y]]"] {
            let f = mat(text, &g2);
            let schedule = g2.schedule(32).unwrap();
            let a = fk_det_general(&f, &schedule, 5e-3).unwrap();
            let b = fk_det_general(&f.star(), &schedule, 5e-3).unwrap();
            assert!(
                (a.value() - b.value()).abs() <= 5e-3,
                "{text}: {} vs {}",
                a.value(),
                b.value()
            );
        }
    }

    #[test]
    fn integrality_lower_bound() {
        let g = z(1);
        for text in ["x-2", "x-1", "x^3 - x - 1", "2*x^2 - 3*x + 2"] {
            let tr = fk_det_general(&mat(text, &g), &g.schedule(64).unwrap(), 5e-3).unwrap();
            // integer sections have determinant >= 1 whenever nonsingular
            assert!(tr.running_inf >= -1e-9, "{text}: {}", tr.running_inf);
            assert!(tr.value() >= -1e-9);
        }
    }

    #[test]
    fn kernel_symmetry_under_star() {
        let z6 = GroupDescriptor::finite_cyclic(vec![6]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for _ in 0..10 {
            let c: Vec<i64> = (0..3).map(|_| rng.gen_range(-2i64..=2)).collect();
            let f = mat(&format!("({}) + ({})*x + ({})*x^3", c[0], c[1], c[2]), &z6);
            let a = vn_kernel_dim(&f, &z6.schedule(4).unwrap()).unwrap();
            let b = vn_kernel_dim(&f.star(), &z6.schedule(4).unwrap()).unwrap();
            assert!((a.limit_est - b.limit_est).abs() <= 0.05);
        }
    }

    #[test]
    fn trace_csv_shape() {
        let g = z(1);
        let tr = fk_det_positive(&mat("5-2*x-2/x", &g), &g.schedule(16).unwrap(), 5e-3).unwrap();
        let csv = tr.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "n,size,logdet_per_site,running_inf,wall_ms");
        assert_eq!(lines.len(), tr.points.len() + 1);
        for (line, p) in lines[1..].iter().zip(&tr.points) {
            let cols: Vec<&str> = line.split(',').collect();
            assert_eq!(cols.len(), 5);
            assert_eq!(cols[0], p.n.to_string());
            assert_eq!(cols[1], p.size.to_string());
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let g = z(1);
        assert!(matches!(
            fk_det_positive(&mat("x", &g), &g.schedule(8).unwrap(), 5e-3),
            Err(FkError::NotStarSymmetric)
        ));
        assert!(matches!(
            fk_det_positive(&mat("1", &g), &[], 5e-3),
            Err(FkError::EmptySchedule)
        ));
        // star-symmetric but indefinite
        assert!(matches!(
            fk_det_positive(&mat("x + 1/x", &g), &g.schedule(8).unwrap(), 5e-3),
            Err(FkError::NotPositive { .. })
        ));
    }
}
