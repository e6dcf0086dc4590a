//! `W_{κ,it}` on the real axis and its squared Mellin transform.
//!
//! For small `|t|` the Laplace-type integral is used directly. For larger
//! `|t|` it cancels catastrophically (the value is of size `e^{−π|t|/2}`), so
//! the Whittaker equation is integrated inward from the asymptotic region.

use crate::error::{invalid, Result};
use crate::special::whittaker_w_complex;
use num_complex::Complex64;
use std::f64::consts::PI;

/// Above this `|t|` the differential equation replaces the integral.
pub const INTEGRAL_T_MAX: f64 = 5.0;

pub fn whittaker_w(kappa: f64, t: f64, y: f64) -> Result<f64> {
    if !(y > 0.0) {
        return invalid("Whittaker W needs y > 0");
    }
    if t.abs() <= INTEGRAL_T_MAX {
        // The oscillation of t^{it} near the endpoint can defeat the adaptive
        // rule; the differential equation takes over when it does.
        if let Ok(v) = crate::special::whittaker_w(kappa, t, y) {
            return Ok(v);
        }
    }
    let (m, e) = whittaker_w_scaled(kappa, t, y)?;
    Ok(m * e.exp())
}

/// `(m, e)` with `W_{κ,it}(y) = m·e^{e}`, safe from underflow at large `y`.
pub fn whittaker_w_scaled(kappa: f64, t: f64, y: f64) -> Result<(f64, f64)> {
    if !(y > 0.0) {
        return invalid("Whittaker W needs y > 0");
    }
    if t.abs() <= INTEGRAL_T_MAX && y < 600.0 {
        if let Ok(v) = whittaker_w_complex(kappa, Complex64::new(0.0, t), y) {
            return Ok((v.re * (y / 2.0).exp(), -y / 2.0));
        }
    }
    let mut ode = WhittakerOde::start(kappa, t, y);
    ode.run_to(y.ln(), |_, _, _, _| {});
    Ok((ode.w, ode.log_scale))
}

/// Asymptotic series `y^κ Σ a_n y^{−n}` and its `y`-derivative factor.
fn asymptotic(kappa: f64, t: f64, y: f64) -> (f64, f64) {
    let mut term: f64 = 1.0;
    let mut sum: f64 = 1.0;
    let mut dsum = 0.0;
    for n in 0..200 {
        let nf = n as f64;
        let a = 0.5 - kappa + nf;
        let next = -term * (a * a + t * t) / ((nf + 1.0) * y);
        if next.abs() > term.abs() || next.abs() < 1e-18 * sum.abs() {
            break;
        }
        term = next;
        sum += term;
        dsum += -(nf + 1.0) * term / y;
    }
    let pre = y.powf(kappa);
    // d/dy [y^κ e^{−y/2} S] = y^κ e^{−y/2} (S(κ/y − 1/2) + S')
    (pre * sum, pre * (sum * (kappa / y - 0.5) + dsum))
}

/// State of `w'' − w' + (−y²/4 + κy + 1/4 + t²) w = 0` in `u = ln y`,
/// carried with a running exponent so that the stored `w` stays O(1).
struct WhittakerOde {
    kappa: f64,
    t: f64,
    u: f64,
    w: f64,
    dw: f64,
    log_scale: f64,
}

impl WhittakerOde {
    fn start(kappa: f64, t: f64, target_y: f64) -> Self {
        let y0 = (20.0 * (t * t + 1.0)).max(80.0).max(target_y * 1.0001);
        let (w, dwdy) = asymptotic(kappa, t, y0);
        Self {
            kappa,
            t,
            u: y0.ln(),
            w,
            dw: dwdy * y0,
            log_scale: -y0 / 2.0,
        }
    }

    fn rhs(&self, u: f64, w: f64, dw: f64) -> (f64, f64) {
        let y = u.exp();
        let q = -y * y / 4.0 + self.kappa * y + 0.25 + self.t * self.t;
        (dw, dw - q * w)
    }

    fn step_size(&self) -> f64 {
        let y = self.u.exp();
        let rate = (y / 2.0 + self.t.abs() + 1.0).max(1.0);
        0.001 / rate
    }

    /// Integrate toward smaller `u`. After every step `visit(u, h, stages,
    /// log_scale)` receives the four RK4 stage values of `w` at
    /// `u, u+h/2, u+h/2, u+h`.
    fn run_to(&mut self, u_end: f64, mut visit: impl FnMut(f64, f64, [f64; 4], f64)) {
        while self.u > u_end {
            let h = -(self.step_size().min(self.u - u_end));
            let (u, w, dw) = (self.u, self.w, self.dw);
            let k1 = self.rhs(u, w, dw);
            let k2 = self.rhs(u + h / 2.0, w + h / 2.0 * k1.0, dw + h / 2.0 * k1.1);
            let k3 = self.rhs(u + h / 2.0, w + h / 2.0 * k2.0, dw + h / 2.0 * k2.1);
            let k4 = self.rhs(u + h, w + h * k3.0, dw + h * k3.1);
            visit(
                u,
                h,
                [w, w + h / 2.0 * k1.0, w + h / 2.0 * k2.0, w + h * k3.0],
                self.log_scale,
            );
            self.w += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
            self.dw += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
            self.u += h;
            let mag = self.w.abs().max(self.dw.abs());
            if mag > 1e100 || (mag < 1e-100 && mag > 0.0) {
                self.w /= mag;
                self.dw /= mag;
                self.log_scale += mag.ln();
            }
        }
    }
}

/// `M_{κ,it}(s) = ∫₀^∞ W_{κ,it}(y)² y^{s−2} dy` for several `s` at once.
pub fn mellin_whittaker_many(kappa: f64, t: f64, s: &[Complex64]) -> Result<Vec<Complex64>> {
    let sigma_min = s.iter().map(|v| v.re).fold(f64::INFINITY, f64::min);
    if !(sigma_min > 0.0) {
        return invalid("Mellin transform of W² needs Re(s) > 0");
    }
    // Near 0, W² y^{s−2} dy = O(y^{σ}) du.
    let u_end = (-34.0 / sigma_min).max(-400.0);
    let mut ode = WhittakerOde::start(kappa, t, 1.0);
    // The Mellin integrand rides along as a quadrature on the RK4 stages.
    let mut acc = vec![Complex64::new(0.0, 0.0); s.len()];
    ode.run_to(u_end, |u, h, ws, ls| {
        let at = |uu: f64, w: f64, sv: &Complex64| {
            (Complex64::new(2.0 * ls, 0.0) + (sv - 1.0) * uu).exp() * (w * w)
        };
        for (a, sv) in acc.iter_mut().zip(s) {
            let g = at(u, ws[0], sv)
                + at(u + h / 2.0, ws[1], sv) * 2.0
                + at(u + h / 2.0, ws[2], sv) * 2.0
                + at(u + h, ws[3], sv);
            // h < 0 while integrating toward small y.
            *a -= g * (h / 6.0);
        }
    });
    Ok(acc)
}

pub fn mellin_whittaker(kappa: f64, t: f64, s: Complex64) -> Result<Complex64> {
    Ok(mellin_whittaker_many(kappa, t, &[s])?[0])
}

/// `|M(σ)| / ((1+|t|)^{σ−1+2κ} e^{−π|t|})`.
pub fn matthes_ratio(kappa: f64, t: f64, sigma: f64) -> Result<f64> {
    let m = mellin_whittaker(kappa, t, Complex64::new(sigma, 0.0))?;
    Ok(m.norm() / ((1.0 + t.abs()).powf(sigma - 1.0 + 2.0 * kappa) * (-PI * t.abs()).exp()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ode_value(kappa: f64, t: f64, y: f64) -> f64 {
        let mut ode = WhittakerOde::start(kappa, t, y);
        ode.run_to(y.ln(), |_, _, _, _| {});
        ode.w * ode.log_scale.exp()
    }

    #[test]
    fn ode_matches_integral() {
        for kappa in [-0.25, 0.0, 0.25] {
            for t in [0.0, 2.0, 4.0] {
                for y in [0.3, 2.0, 9.0] {
                    let Ok(a) = crate::special::whittaker_w(kappa, t, y) else {
                        continue;
                    };
                    let b = ode_value(kappa, t, y);
                    assert!((a - b).abs() < 1e-8 * a.abs(), "{kappa} {t} {y}: {a} {b}");
                }
            }
        }
    }

    #[test]
    fn large_t_reference_values() {
        // Reference values from an independent 30-digit evaluation.
        let cases = [
            (-0.25, 6.0, 0.3, 1.575_901_199_121_819_1e-5),
            (0.25, 8.0, 2.0, 1.448_064_709_854_858_6e-6),
            (0.0, 15.0, 1.0, -1.606_845_035_764_920_4e-12),
            (0.25, 30.0, 5.0, -2.521_422_546_162_467_8e-21),
            (-0.25, 20.0, 0.05, 5.753_669_712_459_328_5e-16),
        ];
        for (kappa, t, y, want) in cases {
            let got = whittaker_w(kappa, t, y).unwrap();
            assert!(
                (got - want).abs() < 1e-8 * want.abs(),
                "{kappa} {t} {y}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn mellin_closed_form() {
        // ∫ W_{0,0}(y)² y^{−1} dy = (2/π)∫K₀² = π/2.
        let m = mellin_whittaker(0.0, 0.0, Complex64::new(1.0, 0.0)).unwrap();
        assert!((m.re - PI / 2.0).abs() < 1e-7, "{m}");
    }

    #[test]
    fn mellin_is_dominated_on_vertical_lines() {
        let sigma = 1.5;
        let taus: Vec<Complex64> = (-10..=10)
            .map(|i| Complex64::new(sigma, i as f64))
            .collect();
        let vals = mellin_whittaker_many(0.25, 2.0, &taus).unwrap();
        let m0 = vals[10].re;
        assert!(vals[10].im.abs() < 1e-12 * m0);
        for v in &vals {
            assert!(v.norm() <= m0 * (1.0 + 1e-10));
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(whittaker_w(0.0, 1.0, 0.0).is_err());
        assert!(mellin_whittaker(0.0, 1.0, Complex64::new(-0.1, 0.0)).is_err());
    }
}
