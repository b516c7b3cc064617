//! Principal Birman–Schwinger eigenvalue γ(k), the bound-state equation
//! α·γ(k) = 1, and the weak-coupling predictors built from `(R 1_μ, 1_μ)`.

use std::f64::consts::PI;

use nalgebra::{DVector, SymmetricEigen};
use thiserror::Error;

use crate::bskernel::{assemble_q, r_form, KernelError, K_MAX, K_MIN};
use crate::measure::AtomicMeasure;
use crate::specfun::Flagged;

pub const POWER_TOLERANCE: f64 = 1e-13;
pub const POWER_MAX_ITER: usize = 20_000;
/// Accepted eigen-residual for the dense fallback, relative to γ.
pub const EIGEN_RESIDUAL_LIMIT: f64 = 1e-12;
pub const ROOT_REL_WIDTH: f64 = 1e-12;
pub const MAX_BRACKET_EXPANSIONS: usize = 200;
const SECANT_STEPS: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("eigen-solve did not converge; last residual {residual:e}")]
    NoConvergence { residual: f64 },
    #[error("coupling constant must be positive, got {0}")]
    InvalidCoupling(f64),
    #[error("bound-state bracket left the wavenumber range at k = {k:e} (alpha = {alpha})")]
    OutOfRange { alpha: f64, k: f64 },
    #[error("C_mu overflows: exponent {exponent}")]
    Overflow { exponent: f64 },
    #[error("invalid wavenumber list: {0}")]
    InvalidWavenumbers(String),
}

/// Top eigenpair of the assembled Q(−k²).
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralPoint {
    pub k: f64,
    pub gamma: f64,
    /// Unit vector in matrix (√w-weighted) coordinates, positive sum.
    pub eigvec: DVector<f64>,
    pub iterations: usize,
    pub residual: f64,
}

impl SpectralPoint {
    /// `ω(k) = −2π γ(k) / (μ_T ln k)`.
    pub fn omega(&self, total_mass: f64) -> f64 {
        -2.0 * PI * self.gamma / (total_mass * self.k.ln())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundState {
    pub alpha: f64,
    pub k_alpha: f64,
    /// `−k_alpha²`.
    pub lambda: f64,
    /// Unit vector in matrix coordinates.
    pub eigvec: DVector<f64>,
    pub bracket: (f64, f64),
    pub gamma_at_solution: f64,
}

impl BoundState {
    /// Atom values of the Birman–Schwinger eigenfunction φ_α, scaled so that
    /// `‖φ_α‖²_{L²_μ} = μ_T`; for small α this is `1_μ + O(1/ln k_α)`.
    pub fn density(&self, m: &AtomicMeasure) -> Vec<f64> {
        let scale = m.total_mass().sqrt();
        self.eigvec
            .iter()
            .zip(m.atoms())
            .map(|(v, a)| scale * v / a.weight.sqrt())
            .collect()
    }
}

fn normalized_sqrt_weights(m: &AtomicMeasure) -> DVector<f64> {
    let v = DVector::from_iterator(m.len(), m.atoms().iter().map(|a| a.weight.sqrt()));
    let n = v.norm();
    v / n
}

fn orient(mut v: DVector<f64>) -> DVector<f64> {
    if v.sum() < 0.0 {
        v.neg_mut();
    }
    v
}

/// γ(k): the largest eigenvalue of Q(−k²) and its eigenvector.
///
/// Power iteration from `√w/‖√w‖`, the k → 0 limit of the eigenvector; a
/// dense symmetric eigensolve takes over if it stalls.
pub fn gamma_top(m: &AtomicMeasure, k: f64) -> Result<SpectralPoint, SpectralError> {
    let q = assemble_q(m, k)?;
    let a = q.entries();
    let mut v = normalized_sqrt_weights(m);
    let mut residual = f64::INFINITY;
    for it in 1..=POWER_MAX_ITER {
        let y = a * &v;
        let gamma = v.dot(&y);
        residual = (&y - &v * gamma).norm();
        if residual <= POWER_TOLERANCE * gamma.abs() {
            return Ok(SpectralPoint { k, gamma, eigvec: orient(v), iterations: it, residual });
        }
        let norm = y.norm();
        if !(norm > 0.0) {
            break;
        }
        v = y / norm;
    }
    let eig = SymmetricEigen::new(a.clone());
    let (top, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|x, y| x.1.total_cmp(y.1))
        .ok_or(SpectralError::NoConvergence { residual })?;
    let gamma = eig.eigenvalues[top];
    let v = orient(eig.eigenvectors.column(top).into_owned());
    let dense_residual = (a * &v - &v * gamma).norm();
    if dense_residual <= EIGEN_RESIDUAL_LIMIT * gamma.abs() {
        Ok(SpectralPoint { k, gamma, eigvec: v, iterations: POWER_MAX_ITER, residual: dense_residual })
    } else {
        Err(SpectralError::NoConvergence { residual: dense_residual.min(residual) })
    }
}

/// Solves α·γ(k) = 1 for the unique bound state `λ = −k²`.
///
/// The root is bracketed from k = 1 by factors of 4, bisected in ln k (γ is
/// nearly affine in ln k) and polished with secant steps. Uniqueness of the
/// bound state holds only for small α; for larger α the principal one is
/// returned.
pub fn solve_bound_state(m: &AtomicMeasure, alpha: f64) -> Result<BoundState, SpectralError> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(SpectralError::InvalidCoupling(alpha));
    }
    let f = |ln_k: f64| -> Result<f64, SpectralError> {
        let k = ln_k.exp();
        Ok(alpha * gamma_top(m, k)?.gamma - 1.0)
    };
    let step = 4f64.ln();
    let (ln_min, ln_max) = (K_MIN.ln(), K_MAX.ln());
    let mut lo = 0.0f64;
    let mut f_lo = f(lo)?;
    let mut hi = lo;
    let mut f_hi = f_lo;
    // f decreases in ln k: f(lo) > 0 > f(hi) brackets the root
    let mut expansions = 0;
    while !(f_lo > 0.0 && f_hi <= 0.0) {
        expansions += 1;
        if expansions > MAX_BRACKET_EXPANSIONS {
            return Err(SpectralError::OutOfRange { alpha, k: lo.exp() });
        }
        if f_hi > 0.0 {
            lo = hi;
            f_lo = f_hi;
            hi += step;
            if hi > ln_max {
                return Err(SpectralError::OutOfRange { alpha, k: hi.exp() });
            }
            f_hi = f(hi)?;
        } else {
            hi = lo;
            f_hi = f_lo;
            lo -= step;
            if lo < ln_min {
                return Err(SpectralError::OutOfRange { alpha, k: lo.exp() });
            }
            f_lo = f(lo)?;
        }
    }
    let bracket = (lo.exp(), hi.exp());
    while hi - lo > ROOT_REL_WIDTH {
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid)?;
        if f_mid > 0.0 {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
            f_hi = f_mid;
        }
    }
    // Secant polish, kept inside the final bracket.
    let (mut x0, mut f0, mut x1, mut f1) = (lo, f_lo, hi, f_hi);
    for _ in 0..SECANT_STEPS {
        if f1 == f0 || f1 == 0.0 {
            break;
        }
        let x2 = x1 - f1 * (x1 - x0) / (f1 - f0);
        if !(x2 >= lo && x2 <= hi) {
            break;
        }
        let f2 = f(x2)?;
        x0 = x1;
        f0 = f1;
        x1 = x2;
        f1 = f2;
    }
    let ln_k = if f1.abs() <= f0.abs() { x1 } else { x0 };
    let k_alpha = ln_k.exp();
    let point = gamma_top(m, k_alpha)?;
    Ok(BoundState {
        alpha,
        k_alpha,
        lambda: -k_alpha * k_alpha,
        eigvec: point.eigvec,
        bracket,
        gamma_at_solution: point.gamma,
    })
}

/// `C_μ = exp(4π (R 1_μ, 1_μ) / μ_T²)`.
pub fn c_mu(m: &AtomicMeasure) -> Result<f64, SpectralError> {
    let exponent = 4.0 * PI * r_form(m)? / (m.total_mass() * m.total_mass());
    let value = exponent.exp();
    if value.is_finite() {
        Ok(value)
    } else {
        Err(SpectralError::Overflow { exponent })
    }
}

/// Weak-coupling eigenvalue predictor `−C_μ exp(−4π/(α μ_T))`.
pub fn lambda_asymptotic(m: &AtomicMeasure, alpha: f64) -> Result<Flagged, SpectralError> {
    if !(alpha > 0.0) {
        return Err(SpectralError::InvalidCoupling(alpha));
    }
    let cmu = c_mu(m)?;
    let log_abs = cmu.ln() - 4.0 * PI / (alpha * m.total_mass());
    if log_abs < f64::MIN_POSITIVE.ln() {
        Ok(Flagged { value: -0.0, underflow: true })
    } else {
        Ok(Flagged { value: -log_abs.exp(), underflow: false })
    }
}

/// `ln k(α) ≈ −2π/(α μ_T) + (2π/μ_T²)(R 1_μ, 1_μ)`.
pub fn predict_ln_k(m: &AtomicMeasure, alpha: f64) -> Result<f64, SpectralError> {
    if !(alpha > 0.0) {
        return Err(SpectralError::InvalidCoupling(alpha));
    }
    let mt = m.total_mass();
    Ok(-2.0 * PI / (alpha * mt) + 2.0 * PI / (mt * mt) * r_form(m)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationRow {
    pub k: f64,
    pub gamma: f64,
    /// Top eigenvalue of `T(k) = −2π Q(−k²)/(μ_T ln k)`.
    pub omega: f64,
    /// Distance from ω to the rest of the spectrum of T(k).
    pub gap: f64,
    /// Diameter of the rest of the spectrum of T(k).
    pub rest_diameter: f64,
    /// `‖φ_k − √w/‖√w‖‖` in matrix coordinates.
    pub dev: f64,
    /// `(ω − 1) ln k`, which tends to `(T₁φ, φ)`.
    pub scaled_omega: f64,
    /// `dev · |ln k|`, bounded as k → 0.
    pub scaled_dev: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationReport {
    pub rows: Vec<PerturbationRow>,
    /// `(T₁φ, φ) = −(2π/μ_T²)(R 1_μ, 1_μ)`.
    pub first_order: f64,
}

pub fn perturbation_report(m: &AtomicMeasure, k_list: &[f64]) -> Result<PerturbationReport, SpectralError> {
    if k_list.is_empty() {
        return Err(SpectralError::InvalidWavenumbers("empty list".into()));
    }
    if k_list.iter().any(|&k| !(k > 0.0 && k < 1.0)) {
        return Err(SpectralError::InvalidWavenumbers("every k must lie in (0, 1)".into()));
    }
    if k_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(SpectralError::InvalidWavenumbers("k values must be decreasing".into()));
    }
    let mt = m.total_mass();
    let phi0 = normalized_sqrt_weights(m);
    let rows = k_list
        .iter()
        .map(|&k| {
            let point = gamma_top(m, k)?;
            let scale = -2.0 * PI / (mt * k.ln());
            let q = assemble_q(m, k)?;
            let mut t = q.eigenvalues();
            t.iter_mut().for_each(|e| *e *= scale);
            let omega = point.omega(mt);
            let rest = &t[..t.len() - 1];
            let (gap, rest_diameter) = match (rest.first(), rest.last()) {
                (Some(lo), Some(hi)) => (omega - hi, hi - lo),
                _ => (omega, 0.0),
            };
            let dev = (&point.eigvec - &phi0).norm();
            Ok(PerturbationRow {
                k,
                gamma: point.gamma,
                omega,
                gap,
                rest_diameter,
                dev,
                scaled_omega: (omega - 1.0) * k.ln(),
                scaled_dev: dev * k.ln().abs(),
            })
        })
        .collect::<Result<Vec<_>, SpectralError>>()?;
    let first_order = -2.0 * PI / (mt * mt) * r_form(m)?;
    Ok(PerturbationReport { rows, first_order })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{circle, polyline, segment, Point};
    use crate::specfun::{i0, k0, EULER_GAMMA};

    /// Root of I₀(k)K₀(k) = 1/α by bisection on the closed form.
    fn circle_root(alpha: f64) -> f64 {
        let g = |k: f64| i0(k).unwrap() * k0(k).unwrap() - 1.0 / alpha;
        let (mut lo, mut hi) = (1e-12f64, 10.0f64);
        for _ in 0..200 {
            let mid = (lo * hi).sqrt();
            if g(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (lo * hi).sqrt()
    }

    #[test]
    fn circle_gamma_matches_closed_form() {
        let m = circle(1.0, 512).unwrap();
        let p = gamma_top(&m, 0.1).unwrap();
        let exact = i0(0.1).unwrap() * k0(0.1).unwrap();
        assert!((exact - 2.43314).abs() < 1e-5);
        assert!(((p.gamma - exact) / exact).abs() < 1e-3);
        assert!(p.residual <= 1e-12 * p.gamma);
        // eigenvector is the constant function by rotational symmetry
        let c = normalized_sqrt_weights(&m);
        assert!((&p.eigvec - c).amax() < 1e-10);
    }

    #[test]
    fn gamma_strictly_decays() {
        let m = polyline(&[Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(1.0, 1.0)], 40.0).unwrap();
        let g: Vec<f64> = [0.01, 0.1, 1.0].iter().map(|&k| gamma_top(&m, k).unwrap().gamma).collect();
        assert!(g[0] > g[1] && g[1] > g[2]);
    }

    #[test]
    fn gamma_log_growth() {
        let m = circle(1.0, 512).unwrap();
        let k = 1e-6;
        let g = gamma_top(&m, k).unwrap().gamma;
        let ratio = g / (-k.ln());
        assert!((ratio - 1.0).abs() < 0.1, "{ratio}");
    }

    #[test]
    fn bound_state_on_circle() {
        let m = circle(1.0, 512).unwrap();
        let bs = solve_bound_state(&m, 0.5).unwrap();
        let exact = circle_root(0.5);
        // leading order 2 e^{-C_E - 2}
        assert!((exact - 2.0 * (-EULER_GAMMA - 2.0).exp()).abs() < 0.01);
        assert!(((bs.k_alpha - exact) / exact).abs() < 1e-3);
        assert_eq!(bs.lambda, -bs.k_alpha * bs.k_alpha);
        assert!((bs.alpha * bs.gamma_at_solution - 1.0).abs() <= 1e-10);
        assert!(bs.bracket.0 <= bs.k_alpha && bs.k_alpha <= bs.bracket.1);
    }

    #[test]
    fn bound_state_errors_and_ordering() {
        let m = circle(1.0, 128).unwrap();
        assert!(matches!(solve_bound_state(&m, 0.0), Err(SpectralError::InvalidCoupling(_))));
        assert!(matches!(solve_bound_state(&m, -1.0), Err(SpectralError::InvalidCoupling(_))));
        assert!(matches!(solve_bound_state(&m, 0.02), Err(SpectralError::OutOfRange { .. })));
        let l2 = solve_bound_state(&m, 0.2).unwrap().lambda;
        let l1 = solve_bound_state(&m, 0.1).unwrap().lambda;
        assert!(l2 < l1 && l1 < 0.0);
    }

    #[test]
    fn predictors_on_circles() {
        let m1 = circle(1.0, 512).unwrap();
        let m2 = circle(2.0, 512).unwrap();
        let c1 = c_mu(&m1).unwrap();
        let c2 = c_mu(&m2).unwrap();
        // C_μ = (4/r²) e^{-2 C_E}
        let exact1 = 4.0 * (-2.0 * EULER_GAMMA).exp();
        assert!(((c1 - exact1) / exact1).abs() < 1e-3, "{c1}");
        assert!(((c2 - exact1 / 4.0) / (exact1 / 4.0)).abs() < 1e-3, "{c2}");
        let p1 = predict_ln_k(&m1, 0.1).unwrap();
        assert!((p1 - (-10.0 + 2f64.ln() - EULER_GAMMA)).abs() < 1e-3);
        let p2 = predict_ln_k(&m2, 0.1).unwrap();
        assert!((p2 - (-5.0 - EULER_GAMMA)).abs() < 1e-3);
        let la = lambda_asymptotic(&m1, 0.2).unwrap();
        assert!(!la.underflow);
        assert!(((la.value + exact1 * (-10f64).exp()) / la.value).abs() < 1e-3);
        let big = lambda_asymptotic(&m1, 1e12).unwrap();
        assert!(((big.value + c1) / c1).abs() < 1e-9);
        let tiny = lambda_asymptotic(&m1, 1e-4).unwrap();
        assert!(tiny.underflow && tiny.value == 0.0 && tiny.value.is_sign_negative());
    }

    #[test]
    fn c_mu_stable_under_refinement() {
        let a = c_mu(&circle(1.0, 512).unwrap()).unwrap();
        let b = c_mu(&circle(1.0, 1024).unwrap()).unwrap();
        assert!((a - b).abs() <= 1e-3 * a);
    }

    #[test]
    fn perturbation_report_rejects_bad_lists() {
        let m = circle(1.0, 32).unwrap();
        assert!(perturbation_report(&m, &[]).is_err());
        assert!(perturbation_report(&m, &[1.0]).is_err());
        assert!(perturbation_report(&m, &[1e-3, 1e-2]).is_err());
    }

    #[test]
    fn perturbation_on_segment() {
        // a segment has a genuinely non-constant principal eigenvector
        let m = segment(Point::new(0.0, 0.0), Point::new(1.0, 0.0), 256).unwrap();
        let rep = perturbation_report(&m, &[1e-3, 1e-5, 1e-7]).unwrap();
        let first = rep.rows[0].scaled_dev;
        assert!(first > 1e-6);
        for row in &rep.rows {
            assert!(row.scaled_dev <= 10.0 * first);
            assert!(row.gap > 0.0);
        }
        // ω → 1 monotonically
        for w in rep.rows.windows(2) {
            assert!((w[1].omega - 1.0).abs() < (w[0].omega - 1.0).abs());
        }
        let last = rep.rows.last().unwrap();
        let rel = ((last.scaled_omega - rep.first_order) / rep.first_order).abs();
        assert!(rel < 0.2, "{} vs {}", last.scaled_omega, rep.first_order);
    }
}
