//! Γ, ζ and Bessel/Whittaker functions on the strips the analytic layer needs.

use crate::error::{invalid, Result};
use crate::quad::integrate;
use num_complex::Complex64;
use std::f64::consts::PI;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
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

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// `log Γ(z)` (principal branch continued along the real axis for Re z ≥ 1/2).
pub fn ln_gamma(z: Complex64) -> Complex64 {
    if z.re < 0.5 {
        // Reflection: Γ(z)Γ(1−z) = π / sin(πz).
        return c(PI.ln()) - (c(PI) * z).sin().ln() - ln_gamma(c(1.0) - z);
    }
    // Shift small arguments up to keep the Lanczos series well inside its range.
    if z.norm() < 8.0 {
        let mut shift = c(0.0);
        let mut w = z;
        while w.norm() < 8.0 {
            shift += w.ln();
            w += 1.0;
        }
        return ln_gamma(w) - shift;
    }
    let z1 = z - 1.0;
    let mut x = c(LANCZOS[0]);
    for (i, &ci) in LANCZOS.iter().enumerate().skip(1) {
        x += ci / (z1 + i as f64);
    }
    let t = z1 + LANCZOS_G + 0.5;
    c(0.5 * (2.0 * PI).ln()) + (z1 + 0.5) * t.ln() - t + x.ln()
}

pub fn gamma(z: Complex64) -> Complex64 {
    if z.im == 0.0 && z.re <= 0.0 && z.re == z.re.round() {
        return c(f64::INFINITY);
    }
    if z.re < 0.5 {
        return c(PI) / ((c(PI) * z).sin() * gamma(c(1.0) - z));
    }
    ln_gamma(z).exp()
}

pub fn gamma_real(x: f64) -> f64 {
    gamma(c(x)).re
}

/// Riemann ζ(s) for `s ≠ 1`: Borwein's alternating-series algorithm for
/// `Re s ≥ 0`, the functional equation below that.
pub fn zeta(s: Complex64) -> Complex64 {
    if s.re < 0.0 {
        let one_minus = c(1.0) - s;
        return c(2.0).powc(s)
            * c(PI).powc(s - 1.0)
            * (c(PI / 2.0) * s).sin()
            * gamma(one_minus)
            * zeta(one_minus);
    }
    if s.im.abs() > 30.0 {
        return zeta_euler_maclaurin(s);
    }
    if s.re > 40.0 {
        // 1 + 2^{-s} + 3^{-s} is exact to double precision here.
        return c(1.0) + c(2.0).powc(-s) + c(3.0).powc(-s);
    }
    let n = (40.0 + 1.5 * s.im.abs()).ceil() as usize;
    // d_k = n Σ_{i≤k} (n+i−1)! 4^i / ((n−i)! (2i)!)
    let mut d = vec![0.0f64; n + 1];
    let mut term = 1.0 / n as f64;
    let mut acc = term;
    d[0] = n as f64 * acc;
    for i in 1..=n {
        term *=
            (n + i - 1) as f64 * (n - i + 1) as f64 * 4.0 / ((2 * i - 1) as f64 * (2 * i) as f64);
        acc += term;
        d[i] = n as f64 * acc;
    }
    let dn = d[n];
    let mut sum = c(0.0);
    for k in 0..n {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * (d[k] - dn) * c((k + 1) as f64).powc(-s);
    }
    -sum / (dn * (c(1.0) - c(2.0).powc(c(1.0) - s)))
}

/// `B_{2k}/(2k)!` for `k = 1..=12`.
const BERNOULLI_OVER_FACTORIAL: [f64; 12] = [
    1.0 / 6.0 / 2.0,
    -1.0 / 30.0 / 24.0,
    1.0 / 42.0 / 720.0,
    -1.0 / 30.0 / 40_320.0,
    5.0 / 66.0 / 3_628_800.0,
    -691.0 / 2730.0 / 479_001_600.0,
    7.0 / 6.0 / 87_178_291_200.0,
    -3617.0 / 510.0 / 20_922_789_888_000.0,
    43_867.0 / 798.0 / 6_402_373_705_728_000.0,
    -174_611.0 / 330.0 / 2_432_902_008_176_640_000.0,
    854_513.0 / 138.0 / 1.124_000_727_777_607_7e21,
    -236_364_091.0 / 2730.0 / 6.204_484_017_332_394e23,
];

/// Euler–Maclaurin tail `Σ_{n≥0} (a+n)^{−w}` for `a` large against `|w|`.
pub fn hurwitz_tail(w: Complex64, a: f64) -> Complex64 {
    let mut total = c(a).powc(c(1.0) - w) / (w - 1.0) + c(a).powc(-w) * 0.5;
    // (w)_{2k−1} a^{−w−2k+1}
    let mut rising = w;
    let mut power = c(a).powc(-w - 1.0);
    for (k, &b) in BERNOULLI_OVER_FACTORIAL.iter().enumerate() {
        let term = rising * power * b;
        total += term;
        if term.norm() < 1e-18 * total.norm() {
            break;
        }
        let m = (2 * k + 1) as f64;
        rising *= (w + m) * (w + m + 1.0);
        power /= a * a;
    }
    total
}

fn zeta_euler_maclaurin(s: Complex64) -> Complex64 {
    let n = 20 + (s.im.abs() / 2.0).ceil() as usize;
    let mut head = c(0.0);
    for m in 1..n {
        head += c(m as f64).powc(-s);
    }
    head + hurwitz_tail(s, n as f64)
}

pub fn zeta_real(x: f64) -> f64 {
    zeta(c(x)).re
}

/// Completed `ξ(s) = π^{−s/2} Γ(s/2) ζ(s)`.
pub fn xi(s: Complex64) -> Complex64 {
    c(PI).powc(-s / 2.0) * gamma(s / 2.0) * zeta(s)
}

/// `K_ν(x) = ∫₀^∞ e^{−x cosh t} cosh(νt) dt` for real `x > 0`.
pub fn bessel_k(nu: Complex64, x: f64) -> Result<Complex64> {
    if !(x > 0.0) {
        return invalid("K_ν needs x > 0");
    }
    if nu.im.abs() > 2.0 {
        return bessel_k_shifted(nu, x);
    }
    // ∫₀^∞ e^{−x(cosh t − 1)} cosh(νt) dt by the trapezoid rule, which converges
    // geometrically for this entire, doubly-exponentially decaying integrand.
    let a = nu.re.abs();
    let mut tmax: f64 = 1.0;
    while x * (tmax.cosh() - 1.0) - a * tmax < 60.0 {
        tmax += 0.5;
    }
    let h = 0.1 / (1.0 + nu.im.abs() / 4.0);
    let n = (tmax / h).ceil() as usize;
    let mut sum = 0.5 * (nu * 0.0).cosh();
    for j in 1..=n {
        let t = j as f64 * h;
        sum += (-x * (t.cosh() - 1.0)).exp() * (nu * t).cosh();
    }
    finite(sum * h * (-x).exp())
}

/// `½∫_ℝ exp(−x cosh u + νu) du` along `u = t + iθ`, with `θ` at the height of
/// the saddle `sinh u = ν/x`. On the real axis the integrand is of size one
/// while the result is of size `e^{−π|Im ν|/2}`.
fn bessel_k_shifted(nu: Complex64, x: f64) -> Result<Complex64> {
    let b = nu.im.abs();
    let theta = nu.im.signum() * (b / x).min(1.0).asin().min(PI / 2.0 - 1.0 / b);
    let exponent = |t: f64| -> Complex64 {
        let u = Complex64::new(t, theta);
        -x * u.cosh() + nu * u
    };
    // The saddle sits at Re u = arccosh(b/x) when b > x.
    let centre = if b > x { (b / x).acosh() } else { 0.0 };
    let peak = exponent(centre).re.max(exponent(0.0).re);
    let h = 0.25 / (1.0 + b);
    let mut sum = Complex64::new(0.0, 0.0);
    for dir in [1.0, -1.0] {
        let mut j = if dir > 0.0 { 0 } else { 1 };
        loop {
            let t = dir * j as f64 * h;
            let e = exponent(t);
            sum += e.exp();
            if e.re < peak - 50.0 && dir * (t - centre) > 0.0 {
                break;
            }
            j += 1;
            if j > 2_000_000 {
                return Err(crate::error::Error::Quadrature {
                    achieved: f64::INFINITY,
                    target: 1e-15,
                });
            }
        }
    }
    finite(sum * (0.5 * h))
}

fn finite(v: Complex64) -> Result<Complex64> {
    if !v.re.is_finite() || !v.im.is_finite() {
        return Err(crate::error::Error::Quadrature {
            achieved: f64::INFINITY,
            target: 1e-15,
        });
    }
    Ok(v)
}

/// Whittaker `W_{κ,μ}(y)` for `Re(μ − κ) > −1/2`, from
/// `y^{μ+1/2} e^{−y/2}/Γ(μ−κ+1/2) ∫₀^∞ e^{−yt} t^{μ−κ−1/2}(1+t)^{μ+κ−1/2} dt`.
pub fn whittaker_w_complex(kappa: f64, mu: Complex64, y: f64) -> Result<Complex64> {
    if !(y > 0.0) {
        return invalid("Whittaker W needs y > 0");
    }
    let a = mu - kappa + 0.5;
    if a.re <= 0.0 {
        return invalid("need Re(μ − κ) > −1/2");
    }
    let b = mu + kappa - 0.5;
    // t = v⁴ removes the endpoint singularity; the tail is cut where e^{−yt} < e^{−50}.
    let tmax = (60.0 + (b.re.abs() + 1.0) * 10.0) / y;
    let vmax = tmax.powf(0.25);
    let f = |v: f64| -> Complex64 {
        if v == 0.0 {
            return c(0.0);
        }
        let t = v.powi(4);
        let lv = v.ln();
        let lt1 = (1.0 + t).ln();
        let log = c(-y * t) + (a - 1.0) * (4.0 * lv) + b * lt1 + c((4.0 * v.powi(3)).ln());
        log.exp()
    };
    let (v, _) = integrate(f, 0.0, vmax, 1e-14)?;
    let pre = ((mu + 0.5) * y.ln() - y / 2.0 - ln_gamma(a)).exp();
    Ok(pre * v)
}

/// `W_{κ,it}(y)`, real for real `t` and `|κ| < 1/2`.
pub fn whittaker_w(kappa: f64, t: f64, y: f64) -> Result<f64> {
    Ok(whittaker_w_complex(kappa, Complex64::new(0.0, t), y)?.re)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol * b.norm().max(1.0)
    }

    #[test]
    fn gamma_values() {
        assert!((gamma_real(5.0) - 24.0).abs() < 1e-12);
        assert!((gamma_real(0.5) - PI.sqrt()).abs() < 1e-14);
        assert!((gamma_real(-0.5) + 2.0 * PI.sqrt()).abs() < 1e-13);
        // |Γ(1/2 + it)|² = π / cosh(πt).
        for t in [0.3, 2.0, 7.5, 20.0] {
            let g = gamma(Complex64::new(0.5, t));
            assert!(
                (g.norm_sqr() / (PI / (PI * t).cosh()) - 1.0).abs() < 1e-12,
                "{t}"
            );
        }
        // Recurrence Γ(z+1) = zΓ(z) off the real axis.
        let z = Complex64::new(0.7, 3.1);
        assert!(close(gamma(z + 1.0), z * gamma(z), 1e-13));
    }

    #[test]
    fn zeta_values() {
        assert!((zeta_real(2.0) - PI * PI / 6.0).abs() < 1e-14);
        assert!((zeta_real(4.0) - PI.powi(4) / 90.0).abs() < 1e-14);
        assert!((zeta_real(0.0) + 0.5).abs() < 1e-14);
        assert!((zeta_real(-1.0) + 1.0 / 12.0).abs() < 1e-14);
        assert!((zeta_real(0.5) + 1.460_354_508_809_586_8).abs() < 1e-13);
        // First nontrivial zero.
        assert!(zeta(Complex64::new(0.5, 14.134_725_141_734_693)).norm() < 1e-11);
        // ζ(s̄) = conj ζ(s).
        let s = Complex64::new(0.8, 9.0);
        assert!(close(zeta(s.conj()), zeta(s).conj(), 1e-14));
    }

    #[test]
    fn zeta_high_on_the_line() {
        // Borwein and Euler–Maclaurin agree where both apply.
        let s = Complex64::new(0.5, 29.0);
        assert!(close(zeta(s), zeta_euler_maclaurin(s), 1e-11));
        let s = Complex64::new(3.0, 200.0);
        let direct: Complex64 = (1..200_000)
            .map(|n| c(n as f64).powc(-s))
            .sum::<Complex64>();
        assert!(close(zeta(s), direct, 1e-9));
        // A zero at height ≈ 236.52.
        assert!(zeta(Complex64::new(0.5, 236.524_229_665_816_2)).norm() < 1e-8);
    }

    #[test]
    fn hurwitz_tail_matches_summation() {
        let w = Complex64::new(3.5, 2.0);
        let direct: Complex64 = (0..100_000).map(|n| c(40.0 + n as f64).powc(-w)).sum();
        assert!(close(hurwitz_tail(w, 40.0), direct, 1e-10));
    }

    #[test]
    fn xi_is_symmetric() {
        for s in [
            Complex64::new(0.3, 2.0),
            Complex64::new(1.7, -4.0),
            Complex64::new(2.5, 0.0),
        ] {
            assert!(close(xi(s), xi(c(1.0) - s), 1e-12));
        }
    }

    #[test]
    fn bessel_k_closed_forms() {
        // K_{1/2}(x) = √(π/(2x)) e^{−x}.
        for x in [0.3, 1.0, 4.0, 30.0] {
            let k = bessel_k(c(0.5), x).unwrap();
            let exact = (PI / (2.0 * x)).sqrt() * (-x).exp();
            assert!((k.re / exact - 1.0).abs() < 1e-12, "{x}");
        }
        // K_0(1) and K_1(2) reference values.
        assert!((bessel_k(c(0.0), 1.0).unwrap().re - 0.421_024_438_240_708_3).abs() < 1e-14);
        assert!((bessel_k(c(1.0), 2.0).unwrap().re - 0.139_865_881_816_522_4).abs() < 1e-14);
        // Recurrence K_{ν+1} − K_{ν−1} = (2ν/x) K_ν at complex order.
        let nu = Complex64::new(0.4, 1.3);
        let x = 2.2;
        let lhs = bessel_k(nu + 1.0, x).unwrap() - bessel_k(nu - 1.0, x).unwrap();
        let rhs = bessel_k(nu, x).unwrap() * (2.0 * nu / x);
        assert!(close(lhs, rhs, 1e-12));
    }

    #[test]
    fn bessel_k_high_imaginary_order() {
        // 30-digit reference values; |K| is about e^{−π|Im ν|/2} below the turning point.
        let cases = [
            (
                0.25,
                20.0,
                0.5,
                -7.382_056_889_584_415e-15,
                -1.724_449_481_374_081_4e-14,
            ),
            (
                0.25,
                20.0,
                20.0,
                1.123_604_258_974_508_4e-14,
                3.595_417_839_066_882_2e-15,
            ),
            (
                0.25,
                20.0,
                150.0,
                1.937_951_058_238_886_9e-67,
                6.459_758_481_781_448_5e-69,
            ),
            (
                0.1,
                -12.0,
                3.0,
                4.747_195_117_041_189e-9,
                -5.550_954_012_047_204e-10,
            ),
            (
                0.1,
                5.0,
                60.0,
                1.149_878_428_673_424e-27,
                9.514_677_335_203_694_8e-30,
            ),
        ];
        for (a, b, x, re, im) in cases {
            let k = bessel_k(Complex64::new(a, b), x).unwrap();
            let want = Complex64::new(re, im);
            assert!((k - want).norm() < 1e-10 * want.norm(), "{a} {b} {x}: {k}");
        }
    }

    #[test]
    fn whittaker_bessel_identity() {
        for &t in &[0.0, 0.5, 1.0, 2.5, 5.0] {
            for &y in &[0.2, 0.7, 1.5, 4.0, 9.0] {
                let w = whittaker_w(0.0, t, 2.0 * y).unwrap();
                let k = bessel_k(Complex64::new(0.0, t), y).unwrap().re;
                let rhs = (2.0 * y / PI).sqrt() * k;
                assert!(
                    (w - rhs).abs() <= 1e-9 * rhs.abs().max(1e-300) + 1e-300,
                    "{t} {y}: {w} {rhs}"
                );
            }
        }
    }

    #[test]
    fn whittaker_positive_and_decaying() {
        for i in 0..50 {
            let y = 0.1 + i as f64;
            assert!(whittaker_w(0.25, 0.0, y).unwrap() > 0.0, "{y}");
        }
        let mut prev = f64::INFINITY;
        for y in [10.0, 20.0, 40.0, 80.0] {
            let v = (whittaker_w(0.25, 1.0, y).unwrap() * (y / 2.0).exp()).abs();
            assert!(v < 10.0 * y.powf(0.25) && v.is_finite());
            prev = prev.min(v);
        }
        assert!(prev.is_finite());
    }

    #[test]
    fn whittaker_kummer_closed_form() {
        // W_{κ, 1/2−κ}(y) = y^κ e^{−y/2}.
        let (kappa, y) = (0.25, 3.0);
        let w = whittaker_w_complex(kappa, c(0.5 - kappa), y).unwrap();
        assert!((w.re - y.powf(kappa) * (-y / 2.0).exp()).abs() < 1e-13);
    }
}
