//! Spectral frame of the 3x3 Lax problem: the eigenvalue triple
//! `lambda_j(k)`, the phase functions `theta_ij`, their stationary
//! ("phase") points, and the xi-dependent region geometry of the
//! (y,t)-plane (critical line, indicator set, region labels).

use num_complex::Complex64;
use thiserror::Error;

pub const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Primitive cube root of unity, `exp(2 pi i / 3)`.
pub const OMEGA: Complex64 = Complex64 {
    re: -0.5,
    im: 0.866_025_403_784_438_7,
};

/// Values of xi separating the four asymptotic regions.
pub const REGION_BOUNDARIES: [f64; 3] = [-0.375, 0.0, 3.0];

/// Tolerance within which xi is considered to sit *on* a region boundary.
pub const BOUNDARY_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("xi = {xi} lies within {tol} of the region boundary {boundary}")]
    OnRegionBoundary { xi: f64, boundary: f64, tol: f64 },
    #[error("phase-point search expected {expected} roots for xi = {xi}, found {found}")]
    RootCount { xi: f64, expected: usize, found: usize },
}

/// `omega^n` for any integer n (period 3, exact table values).
pub fn omega_pow(n: i32) -> Complex64 {
    match n.rem_euclid(3) {
        0 => Complex64::new(1.0, 0.0),
        1 => OMEGA,
        _ => OMEGA.conj(),
    }
}

/// Eigenvalue `lambda_j(k) = (omega^j k + 1/(omega^j k)) / sqrt(3)`, j in {1,2,3}.
///
/// `lambda_3` is the branch that is real and dominant on the real axis;
/// the rotation identity `lambda_j(omega k) = lambda_{j+1}(k)` holds exactly.
pub fn lambda(j: u8, k: Complex64) -> Complex64 {
    debug_assert!((1..=3).contains(&j));
    let wk = omega_pow(j as i32) * k;
    (wk + wk.inv()) / SQRT3
}

/// `z(k) = k (1 + k^-6)^{1/3} / sqrt(3)` (principal cube root).
pub fn z_of_k(k: Complex64) -> Complex64 {
    let k6 = k.powi(6);
    k * (Complex64::new(1.0, 0.0) + k6.inv()).powf(1.0 / 3.0) / SQRT3
}

/// `z^3 = (k^3 + k^-3) / (3 sqrt(3))`, branch-free.
pub fn z_cubed(k: Complex64) -> Complex64 {
    let k3 = k.powi(3);
    (k3 + k3.inv()) / (3.0 * SQRT3)
}

/// Phase function `theta_ij(k; xi) = -i [ xi (lambda_i - lambda_j)
/// + (1/lambda_i - 1/lambda_j) ]`.
pub fn theta(i: u8, j: u8, k: Complex64, xi: f64) -> Complex64 {
    let (li, lj) = (lambda(i, k), lambda(j, k));
    -Complex64::i() * (xi * (li - lj) + (li.inv() - lj.inv()))
}

/// `theta_12` in closed form: with `w = k - 1/k`,
/// `theta_12 = w (xi - 3/(w^2 + 1))`.
///
/// This is an exact rational identity (no branch cuts), valid for all
/// complex k where lambda_1 lambda_2 != 0, and is the form used for
/// stationary-point searches and derivatives.
pub fn theta12(k: Complex64, xi: f64) -> Complex64 {
    let w = k - k.inv();
    let one = Complex64::new(1.0, 0.0);
    w * (xi * one - 3.0 * (w * w + one).inv())
}

/// d theta_12 / dk = `(1 + 1/k^2) (xi - 3 (1 - w^2)/(w^2+1)^2)`.
pub fn dtheta12_dk(k: Complex64, xi: f64) -> Complex64 {
    let w = k - k.inv();
    let one = Complex64::new(1.0, 0.0);
    let w2 = w * w;
    let den = (w2 + one) * (w2 + one);
    (one + (k * k).inv()) * (xi * one - 3.0 * (one - w2) * den.inv())
}

/// d^2 theta_12 / dk^2, from the chain rule on w = k - 1/k:
/// `theta'' = w'' theta_w + (w')^2 theta_ww` with
/// `theta_w = xi - 3(1-w^2)/(w^2+1)^2`, `theta_ww = 6 w (3-w^2)/(w^2+1)^3`.
pub fn d2theta12_dk2(k: Complex64, xi: f64) -> Complex64 {
    let w = k - k.inv();
    let one = Complex64::new(1.0, 0.0);
    let w2 = w * w;
    let p = w2 + one;
    let theta_w = xi * one - 3.0 * (one - w2) * (p * p).inv();
    let theta_ww = 6.0 * w * (3.0 * one - w2) * (p * p * p).inv();
    let wp = one + (k * k).inv();
    let wpp = -2.0 * (k * k * k).inv();
    wpp * theta_w + wp * wp * theta_ww
}

fn dtheta12_real(k: f64, xi: f64) -> f64 {
    let w = k - 1.0 / k;
    let w2 = w * w;
    let den = (w2 + 1.0) * (w2 + 1.0);
    (1.0 + 1.0 / (k * k)) * (xi - 3.0 * (1.0 - w2) / den)
}

/// Real stationary points of theta_12, sorted descending.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePointSet {
    pub xi: f64,
    /// k_1 > k_2 > ... > k_p; p in {0, 4, 8}. Points come in +/- pairs
    /// and reciprocal pairs {k, 1/k, -1/k, -k}.
    pub points: Vec<f64>,
}

impl PhasePointSet {
    pub fn count(&self) -> usize {
        self.points.len()
    }
}

/// Locate all real stationary points of `theta_12(.; xi)` by a sign scan
/// of d theta_12/dk over a geometric grid on [1e-3, 1e3] followed by
/// bisection, then mirror to the negative axis (theta_12 is odd in k).
pub fn phase_points(xi: f64) -> PhasePointSet {
    const K_MIN: f64 = 1e-3;
    const K_MAX: f64 = 1e3;
    const N_SCAN: usize = 6000;

    let ratio = (K_MAX / K_MIN).ln() / (N_SCAN as f64 - 1.0);
    let mut positive: Vec<f64> = Vec::new();
    let mut prev_k = K_MIN;
    let mut prev_g = dtheta12_real(prev_k, xi);
    for i in 1..N_SCAN {
        let k = K_MIN * ((i as f64) * ratio).exp();
        let g = dtheta12_real(k, xi);
        if prev_g == 0.0 {
            positive.push(prev_k);
        } else if prev_g * g < 0.0 {
            positive.push(bisect_root(prev_k, k, xi));
        }
        prev_k = k;
        prev_g = g;
    }
    let mut points: Vec<f64> = positive.iter().map(|&k| -k).collect();
    points.extend_from_slice(&positive);
    points.sort_by(|a, b| b.partial_cmp(a).unwrap());
    PhasePointSet { xi, points }
}

fn bisect_root(mut a: f64, mut b: f64, xi: f64) -> f64 {
    let mut fa = dtheta12_real(a, xi);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        let fm = dtheta12_real(mid, xi);
        if fm == 0.0 || (b - a).abs() < 1e-15 * mid.abs().max(1.0) {
            return mid;
        }
        if fa * fm < 0.0 {
            b = mid;
        } else {
            a = mid;
            fa = fm;
        }
    }
    0.5 * (a + b)
}

/// The four asymptotic regions of the (y,t) half-plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionLabel {
    /// xi < -3/8: no real stationary points, left solitonic sector.
    SolitonicLeft,
    /// -3/8 < xi < 0: eight stationary points.
    Zm24,
    /// 0 < xi < 3: four stationary points.
    Zm12,
    /// xi > 3: no real stationary points, right solitonic sector.
    SolitonicRight,
}

pub fn classify_region(xi: f64) -> Result<RegionLabel, SpectralError> {
    for &b in &REGION_BOUNDARIES {
        if (xi - b).abs() < BOUNDARY_TOL {
            return Err(SpectralError::OnRegionBoundary {
                xi,
                boundary: b,
                tol: BOUNDARY_TOL,
            });
        }
    }
    Ok(if xi < -0.375 {
        RegionLabel::SolitonicLeft
    } else if xi < 0.0 {
        RegionLabel::Zm24
    } else if xi < 3.0 {
        RegionLabel::Zm12
    } else {
        RegionLabel::SolitonicRight
    })
}

/// Critical line `L(xi) = (sqrt(3)/2) sqrt(1 + 1/xi)`; `None` where
/// 1 + 1/xi < 0 (xi in (-1, 0)) or xi = 0.
pub fn critical_line(xi: f64) -> Option<f64> {
    if xi == 0.0 {
        return None;
    }
    let v = 1.0 + 1.0 / xi;
    if v < 0.0 {
        None
    } else {
        Some(0.5 * SQRT3 * v.sqrt())
    }
}

/// Union of open real intervals; unbounded ends use +/- infinity.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorSet {
    pub intervals: Vec<(f64, f64)>,
}

impl IndicatorSet {
    pub fn contains(&self, k: f64) -> bool {
        self.intervals.iter().any(|&(a, b)| a < k && k < b)
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }
}

/// The set I(xi) on which the reflection coefficient enters through
/// rho = -r/(1-|r|^2) rather than rho = r.
///
/// With stationary points k_1 > ... > k_p:
/// - SolitonicLeft: all of R
/// - Zm24 (p = 8): (-inf,k_8) u (k_7,k_6) u (k_5,k_4) u (k_3,k_2) u (k_1,inf)
/// - Zm12 (p = 4): (k_4,k_3) u (k_2,k_1)
/// - SolitonicRight: empty
pub fn indicator_set(xi: f64) -> Result<IndicatorSet, SpectralError> {
    let region = classify_region(xi)?;
    let intervals = match region {
        RegionLabel::SolitonicLeft => vec![(f64::NEG_INFINITY, f64::INFINITY)],
        RegionLabel::SolitonicRight => vec![],
        RegionLabel::Zm24 => {
            let p = expect_points(xi, 8)?;
            vec![
                (f64::NEG_INFINITY, p[7]),
                (p[6], p[5]),
                (p[4], p[3]),
                (p[2], p[1]),
                (p[0], f64::INFINITY),
            ]
        }
        RegionLabel::Zm12 => {
            let p = expect_points(xi, 4)?;
            vec![(p[3], p[2]), (p[1], p[0])]
        }
    };
    Ok(IndicatorSet { intervals })
}

fn expect_points(xi: f64, expected: usize) -> Result<Vec<f64>, SpectralError> {
    let set = phase_points(xi);
    if set.count() != expected {
        return Err(SpectralError::RootCount {
            xi,
            expected,
            found: set.count(),
        });
    }
    Ok(set.points)
}
