//! Eisenstein series at the cusp ∞ of Γ₀(4) and of SL₂(ℤ), and incomplete
//! Eisenstein series.

use super::{coprime, reduce_sl2, UHPoint};
use crate::arith::{divisors, euler_phi, factorize, mobius, ramanujan_sum, two_adic_valuation};
use crate::error::{invalid, Error, Result};
use crate::quad::{gl_rule, integrate_with_limit};
use crate::special::{bessel_k, hurwitz_tail, ln_gamma, zeta};
use crate::testfn::BumpWeight;
use num_complex::Complex64;
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EisensteinMode {
    CosetSum,
    Fourier,
}

/// Coset sums stop at this `c`; the constant-term tail is added exactly.
pub const COSET_C_MAX: i64 = 400;

fn cx(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// `√π Γ(s−1/2)/Γ(s)`.
fn gamma_ratio(s: Complex64) -> Complex64 {
    cx(PI.sqrt()) * (ln_gamma(s - 0.5) - ln_gamma(s)).exp()
}

/// `Σ_{n∈ℤ} ((n+x)² + y²)^{−s}` for `Re s > 1/2`.
pub fn lattice_row_sum(x: f64, y: f64, s: Complex64) -> Result<Complex64> {
    if y >= 1.5 {
        row_sum_poisson(x, y, s)
    } else {
        Ok(row_sum_direct(x, y, s))
    }
}

fn row_sum_poisson(x: f64, y: f64, s: Complex64) -> Result<Complex64> {
    let mut total = gamma_ratio(s) * cx(y).powc(1.0 - 2.0 * s);
    let pre = cx(PI).powc(s) * 2.0 / (ln_gamma(s)).exp();
    let nu = s - 0.5;
    let mut m = 1;
    while 2.0 * PI * m as f64 * y < 60.0 + nu.re.abs() {
        let k = bessel_k(nu, 2.0 * PI * m as f64 * y)?;
        total += pre * cx(m as f64 / y).powc(nu) * k * (2.0 * (2.0 * PI * m as f64 * x).cos());
        m += 1;
    }
    Ok(total)
}

fn row_sum_direct(x: f64, y: f64, s: Complex64) -> Complex64 {
    const D: i64 = 40;
    let x0 = x - x.floor();
    let mut total = cx(0.0);
    for n in -D..=D {
        let t = n as f64 + x0;
        total += cx(t * t + y * y).powc(-s);
    }
    let tail = |a: f64| {
        // Σ_j binom(−s, j) y^{2j} Σ_{m≥0} (a+m)^{−2s−2j}
        let mut acc = cx(0.0);
        let mut binom = cx(1.0);
        let mut y2j = 1.0;
        for j in 0..40 {
            let term = binom * y2j * hurwitz_tail(2.0 * s + 2.0 * j as f64, a);
            acc += term;
            if term.norm() < 1e-18 * acc.norm() {
                break;
            }
            binom *= (-s - j as f64) / (j + 1) as f64;
            y2j *= y * y;
        }
        acc
    };
    total + tail(D as f64 + 1.0 + x0) + tail(D as f64 + 1.0 - x0)
}

/// `Σ_{c≥1, step|c} φ(c) c^{−w}` in closed form (`step ∈ {1, 4}`).
fn totient_dirichlet(step: i64, w: Complex64) -> Complex64 {
    let base = zeta(w - 1.0) / zeta(w);
    if step == 1 {
        base
    } else {
        cx(2.0).powc(1.0 - 2.0 * w) / (1.0 - cx(2.0).powc(-w)) * base
    }
}

/// `y^s Σ_{(c,d)=1, step|c, c ≥ 0} |cz+d|^{−2s}` over pairs up to sign, with
/// `c ≤ cmax` plus the exact constant-term tail of `c > cmax`.
pub fn coset_sum(p: UHPoint, s: Complex64, step: i64, cmax: i64) -> Result<Complex64> {
    if s.re <= 1.0 {
        return invalid("coset summation needs Re(s) > 1");
    }
    let mut inner = cx(1.0);
    let mut partial = cx(0.0);
    let w = 2.0 * s;
    for c in (step..=cmax).step_by(step as usize) {
        partial += cx(euler_phi(c) as f64) * cx(c as f64).powc(-w);
        let mut sq_free: Vec<i64> = vec![1];
        for (q, _) in factorize(c) {
            let extra: Vec<i64> = sq_free.iter().map(|e| e * q).collect();
            sq_free.extend(extra);
        }
        for e in sq_free {
            let scale = (c / e) as f64;
            let row = lattice_row_sum(scale * p.x, scale * p.y, s)?;
            inner += cx(mobius(e) as f64) * cx(e as f64).powc(-w) * row;
        }
    }
    let tail =
        gamma_ratio(s) * cx(p.y).powc(1.0 - 2.0 * s) * (totient_dirichlet(step, w) - partial);
    Ok(cx(p.y).powc(s) * (inner + tail))
}

/// Constant-term coefficient `φ(s)` of the level-4 series.
pub fn phi_constant(s: Complex64) -> Complex64 {
    gamma_ratio(s) * cx(4.0).powc(-2.0 * s) * 2.0 / (1.0 - cx(2.0).powc(-2.0 * s))
        * zeta(2.0 * s - 1.0)
        / zeta(2.0 * s)
}

/// The 2-local factor `L₂(s, ℓ)`.
pub fn l2_factor(s: Complex64, ell: i64) -> Result<Complex64> {
    let nu = two_adic_valuation(ell)?;
    let mut sum = cx(0.0);
    for j in 0..=nu {
        let r = ramanujan_sum(1 << (j + 2), ell) as f64;
        sum += cx(r) * cx(2.0).powc(-2.0 * j as f64 * s);
    }
    let one = cx(1.0);
    let num = one - cx(2.0).powc(one - 2.0 * s);
    let den =
        (one - cx(2.0).powc((nu as f64 + 1.0) * (one - 2.0 * s))) * (one - cx(2.0).powc(-2.0 * s));
    Ok(num / den * sum)
}

/// `φ(s, ℓ) = π^s/(4^{2s}Γ(s)ζ(2s)) · L₂(s,ℓ) · Σ_{ab=|ℓ|} (a/b)^{s−1/2}`.
pub fn phi_coefficient(s: Complex64, ell: i64) -> Result<Complex64> {
    if ell == 0 {
        return invalid("φ(s, ℓ) needs ℓ ≠ 0");
    }
    let l = ell.abs();
    let divisor_part: Complex64 = divisors(l)
        .into_iter()
        .map(|a| cx(a as f64 / (l / a) as f64).powc(s - 0.5))
        .sum();
    let pre = (s * PI.ln() - 2.0 * s * 4f64.ln() - ln_gamma(s)).exp() / zeta(2.0 * s);
    Ok(pre * l2_factor(s, ell)? * divisor_part)
}

/// `φ(s, ℓ)` from `π^s |ℓ|^{s−1/2}/(4^{2s}Γ(s)) Σ_{n ≤ nmax} c_{4n}(ℓ) n^{−2s}`.
pub fn phi_coefficient_direct(s: Complex64, ell: i64, nmax: i64) -> Complex64 {
    let mut sum = cx(0.0);
    for n in 1..=nmax {
        let r = ramanujan_sum(4 * n, ell);
        if r != 0 {
            sum += cx(r as f64) * cx(n as f64).powc(-2.0 * s);
        }
    }
    let pre = (s * PI.ln() - 2.0 * s * 4f64.ln() - ln_gamma(s)).exp();
    pre * cx(ell.abs() as f64).powc(s - 0.5) * sum
}

fn fourier_terms_needed(y: f64, nu: Complex64) -> i64 {
    ((60.0 + nu.re.abs() + nu.im.abs()) / (2.0 * PI * y)).ceil() as i64 + 1
}

/// `E(z, s) = Σ_{Γ∞\Γ₀(4)} Im(γz)^s`.
pub fn eisenstein_level4(p: UHPoint, s: Complex64, mode: EisensteinMode) -> Result<Complex64> {
    match mode {
        EisensteinMode::CosetSum => coset_sum(p, s, 4, COSET_C_MAX),
        EisensteinMode::Fourier => {
            if (s - 1.0).norm() < 1e-12 || (2.0 * s).norm() < 1e-12 {
                return invalid("s is a pole of φ(s)");
            }
            let y = p.y;
            let mut total = cx(y).powc(s) + phi_constant(s) * cx(y).powc(1.0 - s);
            let nu = s - 0.5;
            let lmax = fourier_terms_needed(y, nu);
            // Odd ℓ contribute nothing.
            for ell in (2..=lmax).step_by(2) {
                let k = bessel_k(nu, 2.0 * PI * ell as f64 * y)?;
                total += phi_coefficient(s, ell)?
                    * k
                    * (4.0 * y.sqrt() * (2.0 * PI * ell as f64 * p.x).cos());
            }
            Ok(total)
        }
    }
}

/// `E_∞(z, s)` for SL₂(ℤ), via its Fourier expansion at a reduced point.
pub fn eisenstein_level1(p: UHPoint, s: Complex64) -> Result<Complex64> {
    let xi2s = crate::special::xi(2.0 * s);
    Ok(eisenstein_level1_completed(p, s)? / xi2s)
}

/// `E*(z,s) = ξ(2s) E_∞(z,s)`, entire apart from `s ∈ {0, 1}`; invariant
/// under `s ↦ 1 − s`.
pub fn eisenstein_level1_completed(p: UHPoint, s: Complex64) -> Result<Complex64> {
    if (s - 1.0).norm() < 1e-9 || s.norm() < 1e-9 {
        return invalid("E* has poles at s = 0, 1");
    }
    // ξ(2s) and ξ(2s−1) have cancelling poles at s = 1/2; use evenness about 1/2.
    let s = if (s - 0.5).norm() < 1e-6 {
        cx(0.5 + 1e-4) + Complex64::new(0.0, s.im)
    } else {
        s
    };
    let (_, w) = reduce_sl2(p);
    let y = w.y;
    let xi = crate::special::xi;
    let mut total = xi(2.0 * s) * cx(y).powc(s) + xi(2.0 * s - 1.0) * cx(y).powc(1.0 - s);
    let nu = s - 0.5;
    for n in 1..=fourier_terms_needed(y, nu) {
        let sigma: Complex64 = divisors(n)
            .into_iter()
            .map(|d| cx(d as f64).powc(1.0 - 2.0 * s))
            .sum();
        let k = bessel_k(nu, 2.0 * PI * n as f64 * y)?;
        total += cx(n as f64).powc(nu)
            * sigma
            * k
            * (4.0 * y.sqrt() * (2.0 * PI * n as f64 * w.x).cos());
    }
    Ok(total)
}

/// `E(z|h) = Σ_{Γ∞\Γ₀(4)} h(Im γz)`.
pub fn incomplete_eisenstein(p: UHPoint, h: &BumpWeight, mode: EisensteinMode) -> Result<f64> {
    match mode {
        EisensteinMode::CosetSum => Ok(incomplete_coset_sum(p, h)),
        EisensteinMode::Fourier => {
            let mut total = incomplete_constant_term(p.y, h)?;
            let mut quiet = 0;
            let mut ell = 2;
            while quiet < 3 {
                let a = incomplete_coefficient_unfolded(ell, p.y, h)?;
                total += 2.0 * a * (2.0 * PI * ell as f64 * p.x).cos();
                quiet = if a.abs() < 1e-14 { quiet + 1 } else { 0 };
                ell += 2;
                if ell > 100_000 {
                    return Err(Error::Consistency(
                        "Fourier series of E(z|h) did not settle".into(),
                    ));
                }
            }
            Ok(total)
        }
    }
}

fn incomplete_coset_sum(p: UHPoint, h: &BumpWeight) -> f64 {
    let mut total = h.eval(p.y);
    let cmax = (1.0 / (h.alpha * p.y).sqrt()).floor() as i64;
    for c in (4..=cmax).step_by(4) {
        // |cz+d|² ≤ y/α.
        let r2 = p.y / h.alpha - (c as f64 * p.y).powi(2);
        if r2 < 0.0 {
            continue;
        }
        let r = r2.sqrt();
        let centre = -(c as f64) * p.x;
        for d in (centre - r).floor() as i64..=(centre + r).ceil() as i64 {
            if coprime(c, d) {
                let t = c as f64 * p.x + d as f64;
                total += h.eval(p.y / (t * t + (c as f64 * p.y).powi(2)));
            }
        }
    }
    total
}

/// `a_{ℓ,h}(y)` from the unfolded form
/// `δ_{ℓ0} h(y) + Σ_{4|c} c_c(ℓ) ∫ h(y/(c²(t²+y²))) e(−ℓt) dt`.
pub fn incomplete_coefficient_unfolded(ell: i64, y: f64, h: &BumpWeight) -> Result<f64> {
    let mut total = if ell == 0 { h.eval(y) } else { 0.0 };
    let cmax = (1.0 / (h.alpha * y).sqrt()).floor() as i64;
    for c in (4..=cmax).step_by(4) {
        let rc = ramanujan_sum(c, ell);
        if rc == 0 {
            continue;
        }
        let c2 = (c * c) as f64;
        let t2max = y / (c2 * h.alpha) - y * y;
        if t2max <= 0.0 {
            continue;
        }
        let t2min = (y / (c2 * h.beta) - y * y).max(0.0);
        let f = |t: f64| h.eval(y / (c2 * (t * t + y * y))) * (2.0 * PI * ell as f64 * t).cos();
        let (lo, hi) = (t2min.sqrt(), t2max.sqrt());
        let (v, _) =
            integrate_with_limit(f, lo, hi, 1e-13 * h.amplitude.abs().max(1e-300), 20_000)?;
        total += rc as f64 * 2.0 * v;
    }
    Ok(total)
}

/// `ζ(w)` for `Re w ≥ 8` by direct summation.
fn zeta_far_right(w: Complex64, logs: &[f64]) -> Complex64 {
    logs.iter().map(|&l| (-w * l).exp()).sum()
}

/// Abscissa of the contour used for the constant term.
const CONTOUR_SIGMA: f64 = 4.5;

/// `a_{0,h}(y) = h(y) + (2πi)⁻¹ ∫_{(σ)} φ(s) y^{1−s} H(−s) ds`, the integral
/// taken numerically on `Re s = 4.5`.
pub fn incomplete_constant_term(y: f64, h: &BumpWeight) -> Result<f64> {
    let sigma = CONTOUR_SIGMA;
    // Nodes for H(−s) = ∫ h(x) x^{−s−1} dx.
    let (gx, gw) = gl_rule(32);
    let panels = 256;
    let width = (h.beta - h.alpha) / panels as f64;
    let mut nodes = Vec::with_capacity(panels * gx.len());
    for pnl in 0..panels {
        let lo = h.alpha + width * pnl as f64;
        for (x, w) in gx.iter().zip(gw) {
            let t = lo + 0.5 * width * (1.0 + x);
            let hv = h.eval(t);
            if hv != 0.0 {
                nodes.push((t.ln(), 0.5 * width * w * hv * t.powf(-sigma - 1.0)));
            }
        }
    }
    let h_minus = |tau: f64| -> Complex64 {
        nodes
            .iter()
            .map(|&(l, w)| Complex64::from_polar(w, -tau * l))
            .sum()
    };
    let logs: Vec<f64> = (1..=160).map(|n| (n as f64).ln()).collect();
    let integrand = |tau: f64| -> f64 {
        let s = Complex64::new(sigma, tau);
        let phi = gamma_ratio(s) * cx(4.0).powc(-2.0 * s) * 2.0 / (1.0 - cx(2.0).powc(-2.0 * s))
            * zeta_far_right(2.0 * s - 1.0, &logs)
            / zeta_far_right(2.0 * s, &logs);
        (phi * cx(y).powc(1.0 - s) * h_minus(tau)).re
    };
    let scale = integrand(0.0).abs().max(1e-300);
    let spread = (h.beta / y).ln().abs() + (h.alpha / y).ln().abs() + 1.0;
    let panel = (4.0 / spread).min(1.0);
    let (qx, qw) = gl_rule(16);
    let mut total = 0.0;
    let mut quiet = 0;
    let mut lo = 0.0;
    while quiet < 40 {
        let mut part = 0.0;
        for (x, w) in qx.iter().zip(qw) {
            part += w * integrand(lo + 0.5 * panel * (1.0 + x));
        }
        part *= 0.5 * panel;
        total += part;
        quiet = if part.abs() < 1e-14 * scale {
            quiet + 1
        } else {
            0
        };
        lo += panel;
        if lo > 20_000.0 {
            return Err(Error::Quadrature {
                achieved: part.abs(),
                target: 1e-14 * scale,
            });
        }
    }
    Ok(h.eval(y) + total / PI)
}

/// `H(−1)/(2π)`, the limit of `a_{0,h}(y)` as `y → 0`.
pub fn incomplete_main_term(h: &BumpWeight) -> Result<f64> {
    let (v, _) = crate::testfn::mellin(h, cx(-1.0))?;
    Ok(v.re / (2.0 * PI))
}
