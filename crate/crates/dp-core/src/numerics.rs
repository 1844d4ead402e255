//! Shared numerical kernels: Gauss-Legendre quadrature, natural cubic
//! spline interpolation, complex gamma (Lanczos), and a bisection helper.

use num_complex::Complex64;

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1],
/// by Newton iteration on P_n (machine-precision for n <= 64).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi-type initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // evaluate P_n(x) and P_n'(x) by recurrence
            let mut p0 = 1.0;
            let mut p1 = x;
            for j in 2..=n {
                let pj = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = pj;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Composite Gauss-Legendre integral of a complex-valued function over
/// [a, b], split into `panels` equal panels with an n-point rule each.
pub fn integrate_gl<F: Fn(f64) -> Complex64>(
    f: F,
    a: f64,
    b: f64,
    panels: usize,
    nodes_per_panel: usize,
) -> Complex64 {
    let (xs, ws) = gauss_legendre(nodes_per_panel);
    let h = (b - a) / panels as f64;
    let mut acc = Complex64::new(0.0, 0.0);
    for p in 0..panels {
        let lo = a + p as f64 * h;
        let mid = lo + 0.5 * h;
        for (x, w) in xs.iter().zip(ws.iter()) {
            acc += w * f(mid + 0.5 * h * x);
        }
    }
    acc * 0.5 * h
}

/// Natural cubic spline through (x_i, y_i); evaluates to 0 outside the hull.
#[derive(Debug, Clone)]
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    /// second derivatives at the knots
    m: Vec<f64>,
}

impl CubicSpline {
    /// `x` must be strictly increasing with at least two knots.
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        assert_eq!(x.len(), y.len());
        assert!(x.len() >= 2);
        assert!(x.windows(2).all(|w| w[0] < w[1]));
        let n = x.len();
        let mut m = vec![0.0; n];
        if n > 2 {
            // tridiagonal system for interior second derivatives
            let mut sub = vec![0.0; n];
            let mut diag = vec![0.0; n];
            let mut sup = vec![0.0; n];
            let mut rhs = vec![0.0; n];
            for i in 1..n - 1 {
                let h0 = x[i] - x[i - 1];
                let h1 = x[i + 1] - x[i];
                sub[i] = h0 / 6.0;
                diag[i] = (h0 + h1) / 3.0;
                sup[i] = h1 / 6.0;
                rhs[i] = (y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0;
            }
            // Thomas algorithm on indices 1..n-1 (natural ends: m = 0)
            for i in 2..n - 1 {
                let w = sub[i] / diag[i - 1];
                diag[i] -= w * sup[i - 1];
                rhs[i] -= w * rhs[i - 1];
            }
            m[n - 2] = rhs[n - 2] / diag[n - 2];
            for i in (1..n - 2).rev() {
                m[i] = (rhs[i] - sup[i] * m[i + 1]) / diag[i];
            }
        }
        CubicSpline { x, y, m }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        if t < self.x[0] || t > self.x[n - 1] {
            return 0.0;
        }
        let i = match self
            .x
            .binary_search_by(|v| v.partial_cmp(&t).unwrap())
        {
            Ok(j) => j.min(n - 2),
            Err(j) => j.saturating_sub(1).min(n - 2),
        };
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        a * self.y[i]
            + b * self.y[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }

    pub fn hull(&self) -> (f64, f64) {
        (self.x[0], *self.x.last().unwrap())
    }
}

/// Complex gamma function, Lanczos approximation (g = 7, 9 coefficients),
/// with reflection for Re z < 0.5. Relative accuracy ~1e-13 on the
/// strip needed here (arguments i*nu with |nu| < 1 and their shifts).
pub fn gamma(z: Complex64) -> Complex64 {
    const G: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_59,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    let pi = std::f64::consts::PI;
    if z.re < 0.5 {
        // reflection: Gamma(z) Gamma(1-z) = pi / sin(pi z)
        let s = (pi * z).sin();
        return pi / (s * gamma(Complex64::new(1.0, 0.0) - z));
    }
    let z = z - 1.0;
    let mut acc = Complex64::new(G[0], 0.0);
    for (i, &c) in G.iter().enumerate().skip(1) {
        acc += c / (z + i as f64);
    }
    let t = z + 7.5;
    (2.0 * pi).sqrt() * t.powc(z + 0.5) * (-t).exp() * acc
}

/// Bisection for a sign change of `f` on [a, b]; panics if f(a) f(b) > 0.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let mut fa = f(a);
    let fb = f(b);
    assert!(
        fa * fb <= 0.0,
        "bisect: no sign change on [{a}, {b}] (f: {fa}, {fb})"
    );
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        let fm = f(mid);
        if fm == 0.0 || (b - a).abs() < tol {
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

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gl_polynomial_exactness() {
        // n-point rule integrates degree 2n-1 exactly
        let (x, w) = gauss_legendre(5);
        let int_x8: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(8)).sum();
        assert!((int_x8 - 2.0 / 9.0).abs() < 1e-14);
        let (x, w) = gauss_legendre(20);
        let int_x38: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(38)).sum();
        assert!((int_x38 - 2.0 / 39.0).abs() < 1e-14);
        let wsum: f64 = w.iter().sum();
        assert!((wsum - 2.0).abs() < 1e-14);
    }

    #[test]
    fn gl_composite_exponential() {
        let got = integrate_gl(|x| Complex64::new(x.exp(), 0.0), -1.0, 1.0, 4, 16);
        let want = 1f64.exp() - (-1f64).exp();
        assert!((got.re - want).abs() < 1e-14);
        assert_eq!(got.im, 0.0);
    }

    #[test]
    fn spline_reproduces_cubic_and_extends_by_zero() {
        let x: Vec<f64> = (0..40).map(|i| -2.0 + 0.1 * i as f64).collect();
        let y: Vec<f64> = x.iter().map(|&t| t.sin()).collect();
        let s = CubicSpline::new(x, y);
        // natural ends carry an O(h^2) boundary layer; check the interior
        let mut worst: f64 = 0.0;
        for i in 0..300 {
            let t = -1.4 + 2.8 * (i as f64) / 299.0;
            worst = worst.max((s.eval(t) - t.sin()).abs());
        }
        assert!(worst < 2e-6, "spline sup error {worst}");
        // boundary layer stays O(h^2)
        assert!((s.eval(-1.95) - (-1.95f64).sin()).abs() < 5e-4);
        assert_eq!(s.eval(-2.5), 0.0);
        assert_eq!(s.eval(2.5), 0.0);
        // exact at knots
        assert!((s.eval(-2.0) - (-2.0f64).sin()).abs() < 1e-15);
    }

    #[test]
    fn gamma_real_values() {
        let g = gamma(Complex64::new(0.5, 0.0));
        assert!((g.re - std::f64::consts::PI.sqrt()).abs() < 1e-13);
        let g = gamma(Complex64::new(5.0, 0.0));
        assert!((g.re - 24.0).abs() < 1e-11);
        let g = gamma(Complex64::new(-0.5, 0.0));
        assert!((g.re + 2.0 * std::f64::consts::PI.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn gamma_imaginary_axis_modulus() {
        // |Gamma(i nu)|^2 = pi / (nu sinh(pi nu)); frozen spot value at nu = 0.045
        let pi = std::f64::consts::PI;
        for &nu in &[0.045, 0.1103178000763258, 0.3, 0.9] {
            let g = gamma(Complex64::new(0.0, nu));
            let want = pi / (nu * (pi * nu).sinh());
            assert!(
                (g.norm_sqr() - want).abs() < 1e-10 * want,
                "nu = {nu}: {} vs {want}",
                g.norm_sqr()
            );
        }
        let g = gamma(Complex64::new(0.0, 0.045));
        assert!((g.norm_sqr() - 492.18605384369895).abs() < 1e-7);
    }

    #[test]
    fn gamma_recurrence_complex() {
        let z = Complex64::new(0.3, -0.7);
        let lhs = gamma(z + 1.0);
        let rhs = z * gamma(z);
        assert!((lhs - rhs).norm() < 1e-13 * rhs.norm());
    }

    #[test]
    fn bisect_finds_root() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-14);
        assert!((r - 2f64.sqrt()).abs() < 1e-13);
    }
}
