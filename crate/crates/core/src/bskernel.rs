//! Weighted symmetric matrices for the Birman–Schwinger operator Q(−k²), its
//! leading rank-one part P and the bounded remainder R on L²_μ.
//!
//! An integral operator `f ↦ ∫ G(·, y) f(y) dμ(y)` on the atoms becomes the
//! symmetric matrix `D^{1/2} K D^{1/2}` with `D = diag(weights)`. A matrix
//! eigenvector `v` is the L²_μ function with values `v_i / √w_i`.
//!
//! Pairs closer than a panel size (in particular the diagonal) use the exact
//! average of the small-argument kernel `−ln(k|s|/2) − C_E` over the panel, so
//! the diagonals of Q, −ln(k)·P and R cancel exactly.

use std::f64::consts::{LN_2, PI};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use thiserror::Error;

use crate::measure::{self_log_average, Atom, AtomicMeasure, PanelKind};
use crate::numeric::gauss_legendre;
use crate::specfun::{k0_remainder_unchecked, k0_unchecked, x_k1_unchecked, EULER_GAMMA};

pub const MAX_ATOMS: usize = 4096;
pub const K_MIN: f64 = 1e-8;
pub const K_MAX: f64 = 1e3;
/// Largest `k · scale` for which the self-panel uses the small-argument law.
pub const SMALL_ARG_PANEL_LIMIT: f64 = 0.1;
const PANEL_QUADRATURE_POINTS: usize = 16;

const INV_TWO_PI: f64 = 0.5 / PI;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("atom {index} has no panel scale; bare point masses cannot be assembled")]
    MissingScale { index: usize },
    #[error("wavenumber {k} is outside [{K_MIN}, {K_MAX}]")]
    WavenumberOutOfRange { k: f64 },
    #[error("{n} atoms exceed the dense limit of {MAX_ATOMS}")]
    TooManyAtoms { n: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    Q,
    P,
    R,
    Residual,
}

/// Kernel value plus whether the self-panel fell back to local quadrature
/// because `k · scale` was too large for the small-argument law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelValue {
    pub value: f64,
    pub quadrature_fallback: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BSMatrix {
    entries: DMatrix<f64>,
    weights: Vec<f64>,
    k: f64,
    kind: OperatorKind,
    fallback_panels: usize,
}

impl BSMatrix {
    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.weights.len()
    }

    /// Number of panel pairs evaluated by local quadrature.
    pub fn fallback_panels(&self) -> usize {
        self.fallback_panels
    }

    /// `√w`, the matrix-coordinate image of the constant function 1_μ.
    pub fn sqrt_weights(&self) -> DVector<f64> {
        DVector::from_iterator(self.n(), self.weights.iter().map(|w| w.sqrt()))
    }

    /// `(A f, f)` in L²_μ for a function given by its atom values.
    pub fn quadratic_form(&self, f: &[f64]) -> f64 {
        let v = DVector::from_iterator(
            self.n(),
            f.iter().zip(&self.weights).map(|(fi, w)| fi * w.sqrt()),
        );
        v.dot(&(&self.entries * &v))
    }

    /// Converts matrix coordinates to L²_μ atom values.
    pub fn to_function(&self, v: &DVector<f64>) -> Vec<f64> {
        v.iter().zip(&self.weights).map(|(vi, w)| vi / w.sqrt()).collect()
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut e: Vec<f64> = self.entries.clone().symmetric_eigenvalues().iter().copied().collect();
        e.sort_by(f64::total_cmp);
        e
    }

    pub fn spectral_norm(&self) -> f64 {
        self.eigenvalues().iter().fold(0.0, |m, e| m.max(e.abs()))
    }
}

/// `(1/2π) K₀(k ρ)`, or its panel average when `ρ` is below half the panel
/// scale.
pub fn green_kernel(k: f64, rho: f64, panel_scale: f64, kind: PanelKind) -> Result<KernelValue, KernelError> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(KernelError::InvalidArgument(format!("k must be positive, got {k}")));
    }
    if !(rho >= 0.0) || !(panel_scale > 0.0) {
        return Err(KernelError::InvalidArgument(format!(
            "need rho >= 0 and panel_scale > 0, got rho={rho}, panel_scale={panel_scale}"
        )));
    }
    Ok(q_kernel(k, rho, panel_scale, kind))
}

/// Atoms closer than half a panel scale share a panel; the kernel is then
/// replaced by its panel average.
fn same_panel(rho: f64, scale: f64) -> bool {
    rho < 0.5 * scale
}

fn q_kernel(k: f64, rho: f64, scale: f64, kind: PanelKind) -> KernelValue {
    if !same_panel(rho, scale) {
        return KernelValue { value: INV_TWO_PI * k0_unchecked(k * rho), quadrature_fallback: false };
    }
    if k * scale <= SMALL_ARG_PANEL_LIMIT {
        let value = INV_TWO_PI * (-(0.5 * k).ln() - EULER_GAMMA + self_log_average(scale, kind));
        KernelValue { value, quadrature_fallback: false }
    } else {
        KernelValue { value: INV_TWO_PI * panel_average_k0(k, scale, kind), quadrature_fallback: true }
    }
}

/// Exact panel average of K₀(k|s|).
fn panel_average_k0(k: f64, scale: f64, kind: PanelKind) -> f64 {
    match kind {
        PanelKind::Curve => {
            // (2/h) ∫_0^{h/2} K₀(ks) ds with the logarithm integrated in closed form
            let half = 0.5 * scale;
            let (nodes, weights) = gauss_legendre(PANEL_QUADRATURE_POINTS);
            let smooth: f64 = nodes
                .iter()
                .zip(&weights)
                .map(|(t, w)| {
                    let s = 0.5 * half * (t + 1.0);
                    w * (k0_unchecked(k * s) + (0.5 * k * s).ln())
                })
                .sum::<f64>()
                * 0.5;
            smooth - ((0.5 * k * half).ln() - 1.0)
        }
        PanelKind::Area => {
            // (2/(ka)²) (1 − ka K₁(ka)), from ∫ x K₀(x) dx = −x K₁(x)
            let x = k * scale;
            2.0 / (x * x) * (1.0 - x_k1_unchecked(x))
        }
    }
}

fn r_kernel(rho: f64, scale: f64, kind: PanelKind) -> f64 {
    let log = if !same_panel(rho, scale) { -rho.ln() } else { self_log_average(scale, kind) };
    INV_TWO_PI * (log + LN_2 - EULER_GAMMA)
}

/// Panel scale and kind used for the pair (i, j); symmetric in i and j.
fn pair_panel(a: &Atom, b: &Atom, sa: f64, sb: f64) -> (f64, PanelKind) {
    let kind = if a.kind == PanelKind::Curve && b.kind == PanelKind::Curve {
        PanelKind::Curve
    } else {
        PanelKind::Area
    };
    (sa.min(sb), kind)
}

fn checked_scales(m: &AtomicMeasure) -> Result<Vec<f64>, KernelError> {
    if m.len() > MAX_ATOMS {
        return Err(KernelError::TooManyAtoms { n: m.len() });
    }
    m.atoms()
        .iter()
        .enumerate()
        .map(|(index, a)| a.scale.ok_or(KernelError::MissingScale { index }))
        .collect()
}

fn check_k(k: f64) -> Result<(), KernelError> {
    if (K_MIN..=K_MAX).contains(&k) {
        Ok(())
    } else {
        Err(KernelError::WavenumberOutOfRange { k })
    }
}

/// Fills `D^{1/2} K D^{1/2}` from a pair kernel; rows are computed in
/// parallel and mirrored, so the result is exactly symmetric.
fn assemble_symmetric<F>(m: &AtomicMeasure, scales: &[f64], kernel: F) -> (DMatrix<f64>, usize)
where
    F: Fn(f64, f64, PanelKind) -> (f64, bool) + Sync,
{
    let atoms = m.atoms();
    let n = atoms.len();
    let sqrt_w: Vec<f64> = atoms.iter().map(|a| a.weight.sqrt()).collect();
    let rows: Vec<(Vec<f64>, usize)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut fallbacks = 0;
            let row = (i..n)
                .map(|j| {
                    let rho = if i == j { 0.0 } else { atoms[i].position.dist(atoms[j].position) };
                    let (scale, kind) = pair_panel(&atoms[i], &atoms[j], scales[i], scales[j]);
                    let (value, fallback) = kernel(rho, scale, kind);
                    fallbacks += usize::from(fallback);
                    sqrt_w[i] * value * sqrt_w[j]
                })
                .collect();
            (row, fallbacks)
        })
        .collect();
    let mut entries = DMatrix::zeros(n, n);
    let mut fallbacks = 0;
    for (i, (row, f)) in rows.into_iter().enumerate() {
        fallbacks += f;
        for (offset, v) in row.into_iter().enumerate() {
            let j = i + offset;
            entries[(i, j)] = v;
            entries[(j, i)] = v;
        }
    }
    (entries, fallbacks)
}

/// Matrix realisation of Q(−k²).
pub fn assemble_q(m: &AtomicMeasure, k: f64) -> Result<BSMatrix, KernelError> {
    check_k(k)?;
    let scales = checked_scales(m)?;
    let (entries, fallback_panels) = assemble_symmetric(m, &scales, |rho, scale, kind| {
        let kv = q_kernel(k, rho, scale, kind);
        (kv.value, kv.quadrature_fallback)
    });
    Ok(BSMatrix { entries, weights: m.weights(), k, kind: OperatorKind::Q, fallback_panels })
}

/// Matrix realisation of the rank-one operator `P = (1/2π) 1_μ (·, 1_μ)`.
pub fn assemble_p(m: &AtomicMeasure) -> BSMatrix {
    let sqrt_w: Vec<f64> = m.atoms().iter().map(|a| a.weight.sqrt()).collect();
    let n = sqrt_w.len();
    let entries = DMatrix::from_fn(n, n, |i, j| INV_TWO_PI * sqrt_w[i] * sqrt_w[j]);
    BSMatrix { entries, weights: m.weights(), k: 0.0, kind: OperatorKind::P, fallback_panels: 0 }
}

/// Matrix realisation of R, kernel `(1/2π)(−ln|x − y| + ln 2 − C_E)`.
pub fn assemble_r(m: &AtomicMeasure) -> Result<BSMatrix, KernelError> {
    let scales = checked_scales(m)?;
    let (entries, _) = assemble_symmetric(m, &scales, |rho, scale, kind| (r_kernel(rho, scale, kind), false));
    Ok(BSMatrix { entries, weights: m.weights(), k: 0.0, kind: OperatorKind::R, fallback_panels: 0 })
}

/// `(R 1_μ, 1_μ)` in L²_μ.
pub fn r_form(m: &AtomicMeasure) -> Result<f64, KernelError> {
    let r = assemble_r(m)?;
    let s = r.sqrt_weights();
    Ok(s.dot(&(r.entries() * &s)))
}

/// `S(k) = Q(−k²) + ln(k) P − R` and its spectral norm.
///
/// Entries are evaluated directly from the Macdonald remainder
/// `s(kρ) = K₀(kρ) + ln(kρ/2) + C_E`, which avoids the cancellation of the
/// three-matrix difference. Within a panel the remainder of the
/// small-argument law vanishes identically.
pub fn decomposition_residual(m: &AtomicMeasure, k: f64) -> Result<(BSMatrix, f64), KernelError> {
    if !(k > 0.0 && k <= 0.5) {
        return Err(KernelError::InvalidArgument(format!("residual needs k in (0, 0.5], got {k}")));
    }
    check_k(k)?;
    let scales = checked_scales(m)?;
    let (entries, fallback_panels) = assemble_symmetric(m, &scales, |rho, scale, kind| {
        if !same_panel(rho, scale) {
            (INV_TWO_PI * k0_remainder_unchecked(k * rho), false)
        } else if k * scale <= SMALL_ARG_PANEL_LIMIT {
            (0.0, false)
        } else {
            let q = q_kernel(k, rho, scale, kind).value;
            (q + INV_TWO_PI * k.ln() - r_kernel(rho, scale, kind), true)
        }
    });
    let s = BSMatrix { entries, weights: m.weights(), k, kind: OperatorKind::Residual, fallback_panels };
    let norm = s.spectral_norm();
    Ok((s, norm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{circle, segment, Atom, Point};

    #[test]
    fn kernel_far_and_self_values() {
        let v = green_kernel(1.0, 1.0, 0.01, PanelKind::Curve).unwrap();
        assert!((v.value - INV_TWO_PI * 0.421_024_438_240_708_3).abs() < 1e-15);
        let v = green_kernel(0.1, 0.0, 0.01, PanelKind::Curve).unwrap();
        // ⟨−ln|s|⟩ over [−h/2, h/2] is 1 − ln(h/2)
        let expected = INV_TWO_PI * (-(0.05f64).ln() - EULER_GAMMA + 1.0 - (0.005f64).ln());
        assert!((v.value - expected).abs() < 1e-15);
        assert!(!v.quadrature_fallback);
        assert!(green_kernel(0.0, 1.0, 0.1, PanelKind::Area).is_err());
        assert!(green_kernel(1.0, -1.0, 0.1, PanelKind::Area).is_err());
    }

    #[test]
    fn fallback_matches_small_argument_law_near_threshold() {
        for kind in [PanelKind::Curve, PanelKind::Area] {
            let h = 1.0;
            let k: f64 = 0.1;
            let law = -(0.5 * k).ln() - EULER_GAMMA + self_log_average(h, kind);
            let exact = panel_average_k0(k, h, kind);
            // remainder of the law is O((kh)² ln kh)
            assert!((exact - law).abs() < 5e-3 * law, "{kind:?}: {exact} vs {law}");
            assert!(exact > law);
        }
        let v = green_kernel(10.0, 0.0, 0.05, PanelKind::Curve).unwrap();
        assert!(v.quadrature_fallback);
    }

    #[test]
    fn curve_fallback_against_fine_quadrature() {
        // Midpoint sum with the singular point excluded by symmetry.
        let (k, h) = (20.0, 0.1);
        let n = 2_000_000;
        let ds = 0.5 * h / n as f64;
        let fine: f64 = (0..n)
            .map(|i| k0_unchecked(k * (i as f64 + 0.5) * ds))
            .sum::<f64>()
            * ds
            / (0.5 * h);
        let avg = panel_average_k0(k, h, PanelKind::Curve);
        assert!((avg - fine).abs() < 1e-6 * fine, "{avg} vs {fine}");
    }

    #[test]
    fn entries_decrease_with_k() {
        let m = segment(Point::new(0.0, 0.0), Point::new(1.0, 0.5), 40).unwrap();
        let lo = assemble_q(&m, 0.1).unwrap();
        let hi = assemble_q(&m, 1.0).unwrap();
        assert!(lo.entries().iter().zip(hi.entries().iter()).all(|(a, b)| b <= a));
    }

    #[test]
    fn single_atom_matrix() {
        let h = 0.02;
        let m = AtomicMeasure::from_atoms(
            vec![Atom::panel(Point::ORIGIN, h, h, PanelKind::Curve)],
            "one",
        )
        .unwrap();
        let q = assemble_q(&m, 0.3).unwrap();
        let expected = h * INV_TWO_PI * (-(0.15f64).ln() - EULER_GAMMA + 1.0 - (0.5 * h).ln());
        assert!((q.entries()[(0, 0)] - expected).abs() < 1e-16);
    }

    #[test]
    fn assembly_errors() {
        let bare = AtomicMeasure::from_atoms(vec![Atom::point(Point::ORIGIN, 1.0)], "bare").unwrap();
        assert_eq!(assemble_q(&bare, 1.0), Err(KernelError::MissingScale { index: 0 }));
        assert!(assemble_r(&bare).is_err());
        let m = circle(1.0, 8).unwrap();
        assert!(matches!(assemble_q(&m, 1e-9), Err(KernelError::WavenumberOutOfRange { .. })));
        assert!(matches!(assemble_q(&m, 2e3), Err(KernelError::WavenumberOutOfRange { .. })));
        assert!(decomposition_residual(&m, 0.6).is_err());
        let big = circle(1.0, MAX_ATOMS + 1).unwrap();
        assert!(matches!(assemble_q(&big, 1.0), Err(KernelError::TooManyAtoms { .. })));
    }

    #[test]
    fn p_is_rank_one() {
        let m = circle(1.0, 64).unwrap();
        let p = assemble_p(&m);
        let e = p.eigenvalues();
        assert!((e[63] - 1.0).abs() < 1e-12);
        assert!(e[62].abs() < 1e-12);
        assert!((p.entries().trace() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn residual_matches_matrix_difference() {
        let m = circle(1.0, 64).unwrap();
        let k = 0.05;
        let (s, _) = decomposition_residual(&m, k).unwrap();
        let q = assemble_q(&m, k).unwrap();
        let p = assemble_p(&m);
        let r = assemble_r(&m).unwrap();
        let diff = q.entries() + p.entries() * k.ln() - r.entries();
        let scale = q.entries().amax();
        assert!((s.entries() - diff).amax() < 1e-14 * scale);
        assert!(s.entries().diagonal().iter().all(|&d| d == 0.0));
    }

    #[test]
    fn rows_symmetric_and_deterministic() {
        let m = segment(Point::new(-1.0, 0.0), Point::new(1.0, 0.3), 33).unwrap();
        let a = assemble_q(&m, 0.7).unwrap();
        let b = assemble_q(&m, 0.7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.entries(), &a.entries().transpose());
    }
}
