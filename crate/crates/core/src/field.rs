//! The bound-state eigenfunction in the plane,
//! `f = k R_{μdx}(−k²) φ = (k/2π) ∫ K₀(k|· − y|) φ(y) dμ(y)`, its L² norm, and
//! the Fourier transform `φ̂(p) = (1/2π) ∫ e^{−ip·x} φ(x) dμ(x)`.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::bskernel::green_kernel;
use crate::measure::{AtomicMeasure, Point, Rect};
use crate::spectral::{solve_bound_state, BoundState, SpectralError};
use crate::specfun::x_k1_unchecked;

/// `k·dist` beyond which every kernel term is below `e^{-20}`.
pub const FAR_FIELD_KRHO: f64 = 20.0;
/// Relative tolerance for kernel-norm vs grid-norm agreement.
pub const NORM_AGREEMENT: f64 = 0.02;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("phi has {got} entries, the measure has {expected} atoms")]
    Length { expected: usize, got: usize },
    #[error("wavenumber must be positive, got {0}")]
    Wavenumber(f64),
    #[error("grid needs at least 2x2 points, got {nx}x{ny}")]
    Grid { nx: usize, ny: usize },
    #[error("squared norm is negative beyond rounding: {0:e}")]
    Inconsistent(f64),
    #[error("atom {0} has no panel scale")]
    MissingScale(usize),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldValue {
    pub value: f64,
    /// Every kernel term is below `e^{-20}` at this point.
    pub underflow: bool,
}

fn check_phi(m: &AtomicMeasure, k: f64, phi: &[f64]) -> Result<(), FieldError> {
    if phi.len() != m.len() {
        return Err(FieldError::Length { expected: m.len(), got: phi.len() });
    }
    if !(k > 0.0 && k.is_finite()) {
        return Err(FieldError::Wavenumber(k));
    }
    if let Some(i) = m.atoms().iter().position(|a| a.scale.is_none()) {
        return Err(FieldError::MissingScale(i));
    }
    Ok(())
}

/// `(k/2π) Σ_j w_j φ_j K₀(k|x − x_j|)`, with the panel average inside a panel.
pub fn eval_eigenfunction(m: &AtomicMeasure, k: f64, phi: &[f64], x: Point) -> Result<FieldValue, FieldError> {
    check_phi(m, k, phi)?;
    Ok(eval_unchecked(m, k, phi, x))
}

fn eval_unchecked(m: &AtomicMeasure, k: f64, phi: &[f64], x: Point) -> FieldValue {
    let mut sum = 0.0;
    let mut nearest = f64::INFINITY;
    for (a, &p) in m.atoms().iter().zip(phi) {
        let rho = x.dist(a.position);
        nearest = nearest.min(rho);
        let scale = a.scale.unwrap_or(0.0);
        if k * rho > 745.0 {
            continue;
        }
        // green_kernel only fails on invalid arguments, which check_phi rules out
        let g = green_kernel(k, rho, scale, a.kind).map(|v| v.value).unwrap_or(0.0);
        sum += a.weight * p * g;
    }
    FieldValue { value: k * sum, underflow: k * nearest > FAR_FIELD_KRHO }
}

/// Kernel of `R_{μdx}(−k²)² `: `∫ K₀(k|x−z|)K₀(k|z−y|) dz/(2π)² = ρ K₁(kρ)/(4πk)`.
pub fn resolvent_square_kernel(k: f64, rho: f64) -> f64 {
    if rho == 0.0 {
        1.0 / (4.0 * PI * k * k)
    } else {
        x_k1_unchecked(k * rho) / (4.0 * PI * k * k)
    }
}

/// `‖k R_{μdx}(−k²) φ‖_{L²(ℝ²)}` from the exact squared-resolvent kernel.
pub fn l2_norm_via_k1(m: &AtomicMeasure, k: f64, phi: &[f64]) -> Result<f64, FieldError> {
    check_phi(m, k, phi)?;
    let atoms = m.atoms();
    let c: Vec<f64> = atoms.iter().zip(phi).map(|(a, p)| a.weight * p).collect();
    let (sum, abs_sum) = (0..atoms.len())
        .into_par_iter()
        .map(|i| {
            let mut s = 0.0;
            let mut a = 0.0;
            for j in 0..atoms.len() {
                let rho = if i == j { 0.0 } else { atoms[i].position.dist(atoms[j].position) };
                let t = c[i] * c[j] * resolvent_square_kernel(k, rho);
                s += t;
                a += t.abs();
            }
            (s, a)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold((0.0, 0.0), |acc, (s, a)| (acc.0 + s, acc.1 + a));
    if sum < -1e-12 * abs_sum.max(1.0) {
        return Err(FieldError::Inconsistent(sum));
    }
    Ok(k * sum.max(0.0).sqrt())
}

/// Matrix `√(w_i w_j) G₂(|x_i − x_j|)`; positive semi-definite.
pub fn resolvent_square_gram(m: &AtomicMeasure, k: f64) -> DMatrix<f64> {
    let atoms = m.atoms();
    let n = atoms.len();
    DMatrix::from_fn(n, n, |i, j| {
        let rho = if i == j { 0.0 } else { atoms[i].position.dist(atoms[j].position) };
        (atoms[i].weight * atoms[j].weight).sqrt() * resolvent_square_kernel(k, rho)
    })
}

/// `φ̂(p) = (1/2π) Σ_j w_j φ_j e^{−i p·x_j}`.
pub fn fourier_hat(m: &AtomicMeasure, phi: &[f64], p: Point) -> Result<Complex64, FieldError> {
    if phi.len() != m.len() {
        return Err(FieldError::Length { expected: m.len(), got: phi.len() });
    }
    let sum: Complex64 = m
        .atoms()
        .iter()
        .zip(phi)
        .map(|(a, &f)| Complex64::from_polar(a.weight * f, -(p.x * a.position.x + p.y * a.position.y)))
        .sum();
    Ok(sum / (2.0 * PI))
}

#[derive(Debug, Clone, PartialEq)]
pub enum FieldWarning {
    /// Part of the support lies outside the box; norms are not comparable.
    SupportOutsideBox,
}

/// Eigenfunction samples at the cell centres of an `nx × ny` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    pub region: Rect,
    pub nx: usize,
    pub ny: usize,
    /// `values[(iy, ix)]`.
    pub values: DMatrix<f64>,
    pub k: f64,
    pub l2_norm_kernel: f64,
    pub l2_norm_grid: f64,
    pub warnings: Vec<FieldWarning>,
}

impl FieldGrid {
    pub fn x(&self, ix: usize) -> f64 {
        self.region.x_min + (ix as f64 + 0.5) * self.region.width() / self.nx as f64
    }

    pub fn y(&self, iy: usize) -> f64 {
        self.region.y_min + (iy as f64 + 0.5) * self.region.height() / self.ny as f64
    }

    pub fn norms_comparable(&self) -> bool {
        self.warnings.is_empty()
    }

    /// Relative difference of the two norm estimates.
    pub fn norm_discrepancy(&self) -> f64 {
        ((self.l2_norm_grid - self.l2_norm_kernel) / self.l2_norm_kernel).abs()
    }

    /// CSV with header `# x y f`, rows `x,y,value`, y outer and x inner.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.nx * self.ny * 72 + 16);
        out.push_str("# x y f\n");
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                let _ = writeln!(
                    out,
                    "{},{},{}",
                    fmt17(self.x(ix)),
                    fmt17(self.y(iy)),
                    fmt17(self.values[(iy, ix)])
                );
            }
        }
        out
    }
}

/// Decimal float with 17 significant digits.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Samples the bound-state eigenfunction on a grid and computes both norms.
pub fn eigenfunction_grid(
    m: &AtomicMeasure,
    bs: &BoundState,
    region: Rect,
    nx: usize,
    ny: usize,
) -> Result<FieldGrid, FieldError> {
    if nx < 2 || ny < 2 {
        return Err(FieldError::Grid { nx, ny });
    }
    let phi = bs.density(m);
    let k = bs.k_alpha;
    check_phi(m, k, &phi)?;
    let dx = region.width() / nx as f64;
    let dy = region.height() / ny as f64;
    let samples: Vec<f64> = (0..nx * ny)
        .into_par_iter()
        .map(|idx| {
            let (iy, ix) = (idx / nx, idx % nx);
            let p = Point::new(
                region.x_min + (ix as f64 + 0.5) * dx,
                region.y_min + (iy as f64 + 0.5) * dy,
            );
            eval_unchecked(m, k, &phi, p).value
        })
        .collect();
    let values = DMatrix::from_row_slice(ny, nx, &samples);
    let l2_norm_grid = (samples.iter().map(|v| v * v).sum::<f64>() * dx * dy).sqrt();
    let l2_norm_kernel = l2_norm_via_k1(m, k, &phi)?;
    let mut warnings = Vec::new();
    if !m.atoms().iter().all(|a| region.contains(a.position)) {
        warnings.push(FieldWarning::SupportOutsideBox);
    }
    Ok(FieldGrid { region, nx, ny, values, k, l2_norm_kernel, l2_norm_grid, warnings })
}

/// Box of half-width `8/k` plus the support radius, which captures the
/// `e^{−k|x|}` tail.
pub fn tail_box(m: &AtomicMeasure, k: f64) -> Rect {
    Rect::centered(8.0 / k + m.max_radius())
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormRow {
    pub alpha: f64,
    pub k: f64,
    pub norm: f64,
    pub limit: f64,
    /// `|norm − limit| / limit`.
    pub deviation: f64,
}

/// `‖f_α‖` along a decreasing list of couplings, against the limit `μ_T/(2√π)`.
pub fn norm_limit_report(m: &AtomicMeasure, alphas: &[f64]) -> Result<Vec<NormRow>, FieldError> {
    let limit = m.total_mass() / (2.0 * PI.sqrt());
    alphas
        .iter()
        .map(|&alpha| {
            let bs = solve_bound_state(m, alpha)?;
            let phi = bs.density(m);
            let norm = l2_norm_via_k1(m, bs.k_alpha, &phi)?;
            Ok(NormRow { alpha, k: bs.k_alpha, norm, limit, deviation: ((norm - limit) / limit).abs() })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{circle, segment};
    use crate::specfun::{k0, k1};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn circle_center_value() {
        let m = circle(1.0, 512).unwrap();
        let phi = vec![1.0; m.len()];
        let v = eval_eigenfunction(&m, 0.1, &phi, Point::ORIGIN).unwrap();
        let exact = 0.1 * k0(0.1).unwrap();
        assert!((v.value - exact).abs() < 1e-4);
        assert!(!v.underflow);
    }

    #[test]
    fn rotational_symmetry() {
        let m = circle(1.0, 512).unwrap();
        let phi = vec![1.0; m.len()];
        let vals: Vec<f64> = (0..16)
            .map(|i| {
                let t = 2.0 * PI * (i as f64 + 0.3) / 16.0;
                eval_eigenfunction(&m, 0.3, &phi, Point::new(2.0 * t.cos(), 2.0 * t.sin())).unwrap().value
            })
            .collect();
        for v in &vals {
            assert!(((v - vals[0]) / vals[0]).abs() < 1e-6);
        }
    }

    #[test]
    fn far_field_flagged() {
        let m = circle(1.0, 64).unwrap();
        let phi = vec![1.0; m.len()];
        let v = eval_eigenfunction(&m, 0.5, &phi, Point::new(50.0, 0.0)).unwrap();
        assert!(v.underflow);
        assert!(v.value >= 0.0);
        assert!(eval_eigenfunction(&m, 0.5, &phi[1..], Point::ORIGIN).is_err());
    }

    #[test]
    fn squared_kernel_diagonal_limit() {
        let k = 0.7;
        let near = resolvent_square_kernel(k, 1e-10);
        let diag = resolvent_square_kernel(k, 0.0);
        assert!(((near - diag) / diag).abs() < 1e-12);
        let rho = 1.3;
        let direct = rho * k1(k * rho).unwrap() / (4.0 * PI * k);
        assert!((resolvent_square_kernel(k, rho) - direct).abs() < 1e-15);
    }

    #[test]
    fn fourier_hat_bounds() {
        let m = segment(Point::new(-0.5, 0.2), Point::new(1.0, -0.4), 50).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let phi: Vec<f64> = (0..m.len()).map(|_| rng.gen_range(-1.0..2.0)).collect();
        let bound: f64 = m.atoms().iter().zip(&phi).map(|(a, f)| a.weight * f.abs()).sum::<f64>() / (2.0 * PI);
        let lip = bound * m.max_radius();
        for _ in 0..100 {
            let p1 = Point::new(rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0));
            let p2 = Point::new(rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0));
            let h1 = fourier_hat(&m, &phi, p1).unwrap();
            let h2 = fourier_hat(&m, &phi, p2).unwrap();
            assert!(h1.norm() <= bound * (1.0 + 1e-12));
            assert!((h1 - h2).norm() <= lip * p1.dist(p2) * (1.0 + 1e-12));
        }
        let c = circle(1.0, 100).unwrap();
        let ones = vec![1.0; c.len()];
        let h0 = fourier_hat(&c, &ones, Point::ORIGIN).unwrap();
        assert!((h0.re - 1.0).abs() < 1e-14 && h0.im == 0.0);
    }

    #[test]
    fn grid_rejects_small_and_warns_outside() {
        let m = circle(1.0, 64).unwrap();
        let bs = solve_bound_state(&m, 0.5).unwrap();
        assert!(matches!(eigenfunction_grid(&m, &bs, Rect::centered(5.0), 1, 4), Err(FieldError::Grid { .. })));
        let g = eigenfunction_grid(&m, &bs, Rect::centered(0.5), 4, 4).unwrap();
        assert!(!g.norms_comparable());
    }

    #[test]
    fn csv_layout() {
        let m = circle(1.0, 32).unwrap();
        let bs = solve_bound_state(&m, 0.5).unwrap();
        let g = eigenfunction_grid(&m, &bs, Rect::new(-2.0, 2.0, -1.0, 1.0), 3, 2).unwrap();
        let csv = g.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "# x y f");
        assert_eq!(lines.len(), 1 + 6);
        // y outer, x inner
        let first: Vec<f64> = lines[1].split(',').map(|s| s.parse().unwrap()).collect();
        let second: Vec<f64> = lines[2].split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(first[1], second[1]);
        assert!(second[0] > first[0]);
        assert_eq!(fmt17(0.1), "1.0000000000000001e-1");
    }
}
