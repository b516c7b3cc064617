//! Special functions on the positive real axis: the Macdonald functions K₀ and
//! K₁, the modified Bessel functions I₀ and I₁, and the Bessel function J₀.
//!
//! Evaluation strategy, per function:
//!
//! | function | small argument            | large argument                           |
//! |----------|---------------------------|------------------------------------------|
//! | K₀, K₁   | power series, `x ≤ 2`     | Steed/Temme continued fraction, `x > 2`  |
//! | I₀, I₁   | power series, `x ≤ 50`    | Hankel asymptotic series, `x > 50`       |
//! | J₀       | power series, `x ≤ 4`     | Miller recurrence to 25, Hankel beyond   |
//!
//! All routines are pure functions of their input bits.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

use thiserror::Error;

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Crossover between the series and the continued fraction for K₀/K₁.
pub const K_SERIES_CROSSOVER: f64 = 2.0;
/// Crossover between the series and the asymptotic expansion for I₀/I₁.
pub const I_SERIES_CROSSOVER: f64 = 50.0;
const J0_SERIES_CROSSOVER: f64 = 4.0;
const J0_HANKEL_CROSSOVER: f64 = 25.0;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum SpecFunError {
    #[error("{func}({x}) is outside the domain of the function")]
    Domain { func: &'static str, x: f64 },
}

/// A value that may have been flushed to zero because it fell below the
/// normal floating-point range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Flagged {
    pub value: f64,
    pub underflow: bool,
}

impl Flagged {
    fn settle(value: f64) -> Self {
        if value < f64::MIN_POSITIVE {
            Flagged { value: 0.0, underflow: true }
        } else {
            Flagged { value, underflow: false }
        }
    }
}

fn require_positive(func: &'static str, x: f64) -> Result<(), SpecFunError> {
    if x > 0.0 {
        Ok(())
    } else {
        Err(SpecFunError::Domain { func, x })
    }
}

fn require_nonnegative(func: &'static str, x: f64) -> Result<(), SpecFunError> {
    if x >= 0.0 {
        Ok(())
    } else {
        Err(SpecFunError::Domain { func, x })
    }
}

/// K₀(x) for x > 0. Returns exactly zero where the result underflows.
pub fn k0(x: f64) -> Result<f64, SpecFunError> {
    k0_flagged(x).map(|f| f.value)
}

/// K₀(x) together with an underflow flag.
pub fn k0_flagged(x: f64) -> Result<Flagged, SpecFunError> {
    require_positive("k0", x)?;
    Ok(Flagged::settle(k0_unchecked(x)))
}

/// K₁(x) for x > 0. Returns exactly zero where the result underflows.
pub fn k1(x: f64) -> Result<f64, SpecFunError> {
    k1_flagged(x).map(|f| f.value)
}

pub fn k1_flagged(x: f64) -> Result<Flagged, SpecFunError> {
    require_positive("k1", x)?;
    Ok(Flagged::settle(k1_unchecked(x)))
}

/// I₀(x) for x ≥ 0.
pub fn i0(x: f64) -> Result<f64, SpecFunError> {
    require_nonnegative("i0", x)?;
    Ok(i0_unchecked(x))
}

/// I₁(x) for x ≥ 0.
pub fn i1(x: f64) -> Result<f64, SpecFunError> {
    require_nonnegative("i1", x)?;
    Ok(i1_unchecked(x))
}

/// J₀(x) for x ≥ 0.
pub fn j0(x: f64) -> Result<f64, SpecFunError> {
    require_nonnegative("j0", x)?;
    Ok(j0_unchecked(x))
}

/// Remainder of the small-argument law, `s(x) = K₀(x) + ln(x/2) + C_E`.
///
/// Computed without cancellation for `x ≤ 2`; `s(x) = O(x² ln x)` as x → 0.
pub fn k0_remainder(x: f64) -> Result<f64, SpecFunError> {
    require_positive("k0_remainder", x)?;
    Ok(k0_remainder_unchecked(x))
}

pub(crate) fn k0_remainder_unchecked(x: f64) -> f64 {
    if x > K_SERIES_CROSSOVER {
        return k0_unchecked(x) + (0.5 * x).ln() + EULER_GAMMA;
    }
    // s(x) = -(ln(x/2) + C_E)(I₀(x) - 1) + Σ_{m≥1} H_m (x²/4)^m / (m!)²
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut harmonic = 0.0;
    let mut i0_tail = 0.0;
    let mut h_sum = 0.0;
    for m in 1..200 {
        let mf = m as f64;
        term *= q / (mf * mf);
        harmonic += 1.0 / mf;
        i0_tail += term;
        h_sum += term * harmonic;
        if term < 1e-18 * i0_tail {
            break;
        }
    }
    -((0.5 * x).ln() + EULER_GAMMA) * i0_tail + h_sum
}

pub(crate) fn k0_unchecked(x: f64) -> f64 {
    if x <= K_SERIES_CROSSOVER {
        k0_series(x)
    } else {
        k01_continued_fraction(x).0
    }
}

pub(crate) fn k1_unchecked(x: f64) -> f64 {
    if x <= K_SERIES_CROSSOVER {
        k1_series(x)
    } else {
        k01_continued_fraction(x).1
    }
}

/// `x·K₁(x)`, which tends to 1 as x → 0.
pub(crate) fn x_k1_unchecked(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        x * k1_unchecked(x)
    }
}

fn k0_series(x: f64) -> f64 {
    // K₀(x) = -(ln(x/2) + C_E) I₀(x) + Σ_{m≥1} H_m (x²/4)^m / (m!)²
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut harmonic = 0.0;
    let mut i0_sum = 1.0;
    let mut h_sum = 0.0;
    for m in 1..200 {
        let mf = m as f64;
        term *= q / (mf * mf);
        harmonic += 1.0 / mf;
        i0_sum += term;
        h_sum += term * harmonic;
        if term < 1e-18 * i0_sum {
            break;
        }
    }
    -((0.5 * x).ln() + EULER_GAMMA) * i0_sum + h_sum
}

fn k1_series(x: f64) -> f64 {
    // K₁(x) = 1/x + ln(x/2) I₁(x)
    //         - (x/4) Σ_{m≥0} [ψ(m+1) + ψ(m+2)] (x²/4)^m / (m!(m+1)!)
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut psi_m1 = -EULER_GAMMA;
    let mut psi_m2 = 1.0 - EULER_GAMMA;
    let mut i1_sum = 1.0;
    let mut psi_sum = psi_m1 + psi_m2;
    for m in 1..200 {
        let mf = m as f64;
        term *= q / (mf * (mf + 1.0));
        psi_m1 += 1.0 / mf;
        psi_m2 += 1.0 / (mf + 1.0);
        i1_sum += term;
        psi_sum += term * (psi_m1 + psi_m2);
        if term < 1e-18 * i1_sum {
            break;
        }
    }
    1.0 / x + (0.5 * x).ln() * (0.5 * x) * i1_sum - 0.25 * x * psi_sum
}

/// Steed's evaluation of the Temme continued fraction for (K₀, K₁), x > 2.
fn k01_continued_fraction(x: f64) -> (f64, f64) {
    if x > 745.0 {
        return (0.0, 0.0);
    }
    const MAX_ITER: usize = 10_000;
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut h = d;
    let mut delh = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let a1 = 0.25;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 2..MAX_ITER {
        let fi = i as f64;
        a -= 2.0 * (fi - 1.0);
        c = -a * c / fi;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh = (b * d - 1.0) * delh;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < 0.5 * f64::EPSILON {
            break;
        }
    }
    h *= a1;
    let k0 = (PI / (2.0 * x)).sqrt() * (-x).exp() / s;
    let k1 = k0 * (x + 0.5 - h) / x;
    (k0, k1)
}

pub(crate) fn i0_unchecked(x: f64) -> f64 {
    if x <= I_SERIES_CROSSOVER {
        let q = 0.25 * x * x;
        let mut term = 1.0;
        let mut sum = 1.0;
        for m in 1..400 {
            let mf = m as f64;
            term *= q / (mf * mf);
            sum += term;
            if term < 1e-18 * sum {
                break;
            }
        }
        sum
    } else {
        i_asymptotic(0.0, x)
    }
}

pub(crate) fn i1_unchecked(x: f64) -> f64 {
    if x <= I_SERIES_CROSSOVER {
        let q = 0.25 * x * x;
        let mut term = 1.0;
        let mut sum = 1.0;
        for m in 1..400 {
            let mf = m as f64;
            term *= q / (mf * (mf + 1.0));
            sum += term;
            if term < 1e-18 * sum {
                break;
            }
        }
        0.5 * x * sum
    } else {
        i_asymptotic(1.0, x)
    }
}

/// I_ν(x) ~ e^x / √(2πx) Σ_j (-1)^j a_j(ν) / x^j with μ = 4ν².
fn i_asymptotic(nu: f64, x: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let mut term = 1.0;
    let mut sum = 1.0;
    for j in 1..60 {
        let odd = (2 * j - 1) as f64;
        let next = -term * (mu - odd * odd) / (j as f64 * 8.0 * x);
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    // e^x may overflow long before the product does.
    let half = (0.5 * x).exp();
    half * (half / (2.0 * PI * x).sqrt()) * sum
}

pub(crate) fn j0_unchecked(x: f64) -> f64 {
    if x <= J0_SERIES_CROSSOVER {
        j0_series(x)
    } else if x <= J0_HANKEL_CROSSOVER {
        j0_miller(x)
    } else {
        j0_hankel(x)
    }
}

fn j0_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for m in 1..100 {
        let mf = m as f64;
        term *= -q / (mf * mf);
        sum += term;
        if term.abs() < 1e-18 {
            break;
        }
    }
    sum
}

/// Backward recurrence J_{n-1} = (2n/x) J_n - J_{n+1}, normalised with
/// J₀ + 2 Σ J_{2m} = 1.
fn j0_miller(x: f64) -> f64 {
    let start = (x + 30.0 + 8.0 * x.cbrt()).ceil() as usize;
    let start = start + start % 2;
    let mut next = 0.0;
    let mut cur = 1e-300;
    let mut norm = 0.0;
    for n in (1..=start).rev() {
        let prev = 2.0 * n as f64 / x * cur - next;
        next = cur;
        cur = prev;
        // cur now holds J_{n-1}
        if (n - 1) % 2 == 0 && n > 1 {
            norm += 2.0 * cur;
        }
        if cur.abs() > 1e250 {
            cur *= 1e-250;
            next *= 1e-250;
            norm *= 1e-250;
        }
    }
    cur / (norm + cur)
}

/// Hankel expansion J₀(x) = √(2/(πx)) [P cos χ - Q sin χ], χ = x - π/4.
fn j0_hankel(x: f64) -> f64 {
    let z = 8.0 * x;
    let mut p = 1.0;
    let mut q = 0.0;
    // a_k = Π_{j=1}^{k} (-(2j-1)²) / (j z)
    let mut a = 1.0;
    for k in 1..40 {
        let odd = (2 * k - 1) as f64;
        let next = a * (-(odd * odd)) / (k as f64 * z);
        if next.abs() >= a.abs() || next.abs() < 1e-20 {
            break;
        }
        a = next;
        match k % 4 {
            1 => q += a,
            2 => p -= a,
            3 => q -= a,
            _ => p += a,
        }
    }
    // Rust's sin/cos reduce the exact argument; subtracting π/4 first would
    // lose digits for large x.
    let (sx, cx) = x.sin_cos();
    let cos_chi = FRAC_1_SQRT_2 * (cx + sx);
    let sin_chi = FRAC_1_SQRT_2 * (sx - cx);
    (1.0 / (FRAC_PI_2 * x)).sqrt() * (p * cos_chi - q * sin_chi)
}
