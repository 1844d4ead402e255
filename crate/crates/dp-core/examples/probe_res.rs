//! Temporary probe: relation between the Blaschke dressing factors and
//! the tau-engine interaction constants (run and delete).

use dp_core::nsoliton::recon_point;
use dp_core::scattering::Dressing;
use num_complex::Complex64 as C;

fn main() {
    let phi1 = std::f64::consts::PI / 12.0; // slow
    let phi2 = std::f64::consts::PI / 8.0; // fast
    let z1 = C::from_polar(1.0, phi1);
    let z2 = C::from_polar(1.0, phi2);
    let (p1, p2) = (2.0 * phi1.sin(), 2.0 * phi2.sin());
    let num = (p1 - p2).powi(2) * (p1 * p1 - p1 * p2 + p2 * p2 - 3.0);
    let den = (p1 + p2).powi(2) * (p1 * p1 + p1 * p2 + p2 * p2 - 3.0);
    let g = num / den;
    let q = |p: f64| (((2.0 + p) / (1.0 - p)) / ((2.0 - p) / (1.0 + p))).ln();
    let (q1, q2) = (q(p1), q(p2));
    println!("p1={p1:.6} p2={p2:.6} G={g:.10} q1={q1:.10} q2={q2:.10}");

    // pole 1 dressed by pole 2 sitting in Delta
    let d = Dressing::reflectionless(vec![z2]);
    let dz = d.delta_zeta(z1, false);
    println!(
        "delta_zeta(z1)     = {dz:.10}  |.| = {:.10}  ln|.| = {:.10}",
        dz.norm(),
        dz.norm().ln()
    );
    println!("ln G               = {:.10}", g.ln());
    println!("ln G + p1 q2       = {:.10}", g.ln() + p1 * q2);
    println!("ln G - p1 q2       = {:.10}", g.ln() - p1 * q2);

    let k0 = recon_point();
    let t21 = d.t21(k0);
    let t12 = d.t12(k0);
    println!("ln t21(k0) = {:.10}", t21.ln());
    println!("ln t12(k0) = {:.10}", t12.ln());
    println!("q2 = {q2:.10}");

    // also the reverse: pole 2 dressed by pole 1
    let d_rev = Dressing::reflectionless(vec![z1]);
    let dzr = d_rev.delta_zeta(z2, false);
    println!(
        "delta_zeta(z2 by z1) |.| ln = {:.10}, ln G = {:.10}, ln G + p2 q1 = {:.10}",
        dzr.norm().ln(),
        g.ln(),
        g.ln() + p2 * q1
    );

    // ground truth: exact 2-soliton offsets at t = 40
    use dp_core::scattering::{DiscreteSpectrum, Pole};
    use dp_core::nsoliton::NSoliton;
    let mk = |z: C| Pole { zeta: z, c: C::new(1.0, 0.0) };
    let two = NSoliton::new(&DiscreteSpectrum::new(vec![mk(z1), mk(z2)]).unwrap()).unwrap();
    let one1 = NSoliton::new(&DiscreteSpectrum::new(vec![mk(z1)]).unwrap()).unwrap();
    let one2 = NSoliton::new(&DiscreteSpectrum::new(vec![mk(z2)]).unwrap()).unwrap();
    let t = 40.0;
    let (v1, v2) = (3.0 / (1.0 - p1 * p1), 3.0 / (1.0 - p2 * p2));
    let (x1e, u1e) = argmax_refined(&two, t, v1 * t - 30.0, v1 * t + 30.0);
    let (x2e, u2e) = argmax_refined(&two, t, v2 * t - 30.0, v2 * t + 30.0);
    let (x1b, u1b) = argmax_refined(&one1, t, v1 * t - 30.0, v1 * t + 30.0);
    let (x2b, u2b) = argmax_refined(&one2, t, v2 * t - 30.0, v2 * t + 30.0);
    println!("slow: exact x={x1e:.8} u={u1e:.8}  bare x={x1b:.8} u={u1b:.8}  Dx={:.8}", x1e - x1b);
    println!("fast: exact x={x2e:.8} u={u2e:.8}  bare x={x2b:.8} u={u2b:.8}  Dx={:.8}", x2e - x2b);
    println!("candidates for slow Dx:");
    println!("  ln G/p1 + q2        = {:.8}", g.ln() / p1 + q2);
    println!("  ln G/p1             = {:.8}", g.ln() / p1);
    println!("  -ln|dz|/p1          = {:.8}", -dz.norm().ln() / p1);
    println!("  -ln|dz|/p1 + lnT12  = {:.8}", -dz.norm().ln() / p1 + t12.ln().re);
    println!("  -ln|dz|/p1 + lnT21  = {:.8}", -dz.norm().ln() / p1 + t21.ln().re);
    println!("   ln|dz|/p1 - lnT12  = {:.8}", dz.norm().ln() / p1 - t12.ln().re);
}
// ---- appended: ground-truth offsets from the exact 2-soliton ----
#[allow(dead_code)]
fn argmax_refined(eng: &dp_core::nsoliton::NSoliton, t: f64, lo: f64, hi: f64) -> (f64, f64) {
    let n = 4000;
    let mut best = (lo, f64::MIN);
    for i in 0..=n {
        let x = lo + (hi - lo) * i as f64 / n as f64;
        let u = eng.u_of_x(x, t).unwrap();
        if u > best.1 {
            best = (x, u);
        }
    }
    // quadratic refinement
    let h = (hi - lo) / n as f64;
    let um = eng.u_of_x(best.0 - h, t).unwrap();
    let up = eng.u_of_x(best.0 + h, t).unwrap();
    let dx = 0.5 * h * (um - up) / (um - 2.0 * best.1 + up);
    (best.0 + dx, best.1)
}
