//! Twisted Poisson summation, shifted character sums and their closed-form
//! main term.

use crate::arith::{self, gcd, jacobi, kronecker, lcm, mobius, mod_inverse, ramanujan_sum};
use crate::error::{invalid, Result};
use crate::quad::pairwise_sum;
use crate::testfn::{self, BandlimitedMajorant};
use num_complex::Complex64;
use num_rational::Ratio;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

const BLOCK: i64 = 1 << 14;

/// Parameters of `Σ_{am = bn + ℓ} (m/r)(n/s) F(am/X)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftedSumParams {
    pub a: i64,
    pub b: i64,
    pub ell: i64,
    pub r: i64,
    pub s: i64,
    pub x: f64,
}

impl ShiftedSumParams {
    pub fn new(a: i64, b: i64, ell: i64, r: i64, s: i64, x: f64) -> Result<Self> {
        if a < 1 || b < 1 {
            return invalid("a and b must be positive");
        }
        if r < 1 || s < 1 || r % 2 == 0 || s % 2 == 0 {
            return invalid("r and s must be odd positive integers");
        }
        if gcd(a * b, r * s) != 1 {
            return invalid(format!(
                "gcd(ab, rs) must be 1 (a={a}, b={b}, r={r}, s={s})"
            ));
        }
        if !(x > 0.0) {
            return invalid("X must be positive");
        }
        Ok(Self { a, b, ell, r, s, x })
    }

    /// Whether `a, b, r, s ≤ X^ε`; callers may log a warning otherwise.
    pub fn within_exponent(&self, eps: f64) -> bool {
        let bound = self.x.powf(eps);
        [self.a, self.b, self.r, self.s]
            .iter()
            .all(|&v| (v as f64) <= bound)
    }
}

/// `n = n₀·m²` with `n₀` squarefree.
pub fn squarefree_split(n: i64) -> (i64, i64) {
    let (mut core, mut sq) = (1, 1);
    for (p, k) in arith::factorize(n) {
        if k % 2 == 1 {
            core *= p;
        }
        sq *= p.pow(k / 2);
    }
    (core, sq)
}

/// The exact finite sum `M(r₀, q, w, a, b, ℓ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MainTermM {
    pub r0: i64,
    pub q: i64,
    pub w: i64,
    pub a: i64,
    pub b: i64,
    pub ell: i64,
    pub value: Ratio<i64>,
}

pub fn main_term_m(r0: i64, q: i64, w: i64, a: i64, b: i64, ell: i64) -> MainTermM {
    let mut value = Ratio::from_integer(0);
    for d1 in arith::divisors(q) {
        for d2 in arith::divisors(w) {
            if gcd(d1 * d2, r0) != 1 {
                continue;
            }
            let g = gcd(a * d1, b * d2);
            if ell % g != 0 {
                continue;
            }
            let mu = mobius(d1) * mobius(d2);
            if mu == 0 {
                continue;
            }
            value += Ratio::new(mu * ramanujan_sum(r0, ell / g), lcm(d1, d2) * r0);
        }
    }
    MainTermM {
        r0,
        q,
        w,
        a,
        b,
        ell,
        value,
    }
}

/// Closed-form main term given `F̂(0)`.
pub fn mainterm_with_fhat0(p: &ShiftedSumParams, fhat0: f64) -> f64 {
    let (r0, q) = squarefree_split(p.r);
    let (s0, w) = squarefree_split(p.s);
    if r0 != s0 {
        return 0.0;
    }
    let g = gcd(p.a, p.b);
    let sign = jacobi(p.a * p.b / (g * g), r0);
    let m = main_term_m(r0, q, w, p.a, p.b, p.ell).value;
    sign as f64 * fhat0 * p.x / lcm(p.a, p.b) as f64 * (*m.numer() as f64 / *m.denom() as f64)
}

/// Exact zero-frequency Poisson term `F̂(0)·(X/a)·mean`, where `mean` is the
/// average of `m ↦ (m/r)(n/s)·[b | am − ℓ]` over one period `lcm(r, bs)`.
/// Valid for every admissible tuple; returns the mean as an exact rational.
pub fn zero_frequency_mean(p: &ShiftedSumParams) -> Ratio<i64> {
    let period = lcm(p.r, p.b * p.s);
    let total: i64 = (0..period)
        .map(|j| {
            let t = p.a * j - p.ell;
            if t.rem_euclid(p.b) != 0 {
                0
            } else {
                kronecker(j, p.r) * kronecker(t.div_euclid(p.b), p.s)
            }
        })
        .sum();
    Ratio::new(total, period)
}

pub fn zero_frequency_term(p: &ShiftedSumParams, fhat0: f64) -> f64 {
    let m = zero_frequency_mean(p);
    fhat0 * p.x / p.a as f64 * (*m.numer() as f64 / *m.denom() as f64)
}

/// Whether the square part of one modulus shares a prime with the squarefree
/// part of the other (`gcd(q, s₀) > 1` or `gcd(w, r₀) > 1`).
pub fn crossed_square_parts(r: i64, s: i64) -> bool {
    let (r0, q) = squarefree_split(r);
    let (s0, w) = squarefree_split(s);
    gcd(q, s0) > 1 || gcd(w, r0) > 1
}

pub fn shifted_sum_mainterm(p: &ShiftedSumParams, f: &BandlimitedMajorant) -> Result<Complex64> {
    Ok(Complex64::new(
        mainterm_with_fhat0(p, testfn::fourier(f, 0.0)?),
        0.0,
    ))
}

/// Direct double sum over `|am| ≤ M` with `n = (am − ℓ)/b` integral.
pub fn shifted_sum_bruteforce(
    p: &ShiftedSumParams,
    f: &BandlimitedMajorant,
    m_bound: f64,
) -> Result<Complex64> {
    if m_bound < 10.0 * p.x / p.a as f64 - 1e-9 {
        return invalid("truncation bound must be at least 10·X/a");
    }
    // Beyond the effective radius F is below its own rounding floor; those
    // terms are part of the reported tail rather than summed.
    let reach = m_bound.min(f.effective_radius() * p.x);
    let mmax = (reach / p.a as f64).floor() as i64;
    let nblocks = (2 * mmax + 1 + BLOCK - 1) / BLOCK;
    let partial: Vec<f64> = (0..nblocks)
        .into_par_iter()
        .map(|blk| {
            let lo = -mmax + blk * BLOCK;
            let hi = (lo + BLOCK - 1).min(mmax);
            let mut acc = 0.0;
            for m in lo..=hi {
                let t = p.a * m - p.ell;
                if t.rem_euclid(p.b) != 0 {
                    continue;
                }
                let n = t / p.b;
                let c = kronecker(m, p.r) * kronecker(n, p.s);
                if c != 0 {
                    acc += c as f64 * f.eval((p.a * m) as f64 / p.x);
                }
            }
            acc
        })
        .collect();
    Ok(Complex64::new(pairwise_sum(&partial), 0.0))
}

/// Brute-force values for every `ℓ` in `ells`, reusing one pass over `m`.
///
/// The summand depends on `m` only through `F(am/X)` and the residue of `m`
/// modulo `bs`, so the `m`-sum is accumulated per residue class first.
pub fn shifted_sum_bruteforce_many(
    a: i64,
    b: i64,
    r: i64,
    s: i64,
    ells: &[i64],
    table: &[f64],
) -> Vec<f64> {
    let period = b * s;
    let mmax = ((table.len() - 1) as i64) / a;
    let chi_r: Vec<f64> = (0..r).map(|j| kronecker(j, r) as f64).collect();
    let mut buckets = vec![0.0f64; period as usize];
    let mut comp = vec![0.0f64; period as usize];
    let mut jr = (-mmax).rem_euclid(r) as usize;
    let mut jp = (-mmax).rem_euclid(period) as usize;
    for m in -mmax..=mmax {
        let c = chi_r[jr];
        if c != 0.0 {
            let v = c * table[(a * m).unsigned_abs() as usize];
            let y = v - comp[jp];
            let t = buckets[jp] + y;
            comp[jp] = (t - buckets[jp]) - y;
            buckets[jp] = t;
        }
        jr += 1;
        if jr == r as usize {
            jr = 0;
        }
        jp += 1;
        if jp == period as usize {
            jp = 0;
        }
    }
    ells.iter()
        .map(|&ell| {
            let terms: Vec<f64> = (0..period)
                .map(|j| {
                    let t = a * j - ell;
                    if t.rem_euclid(b) != 0 {
                        return 0.0;
                    }
                    let n = t.div_euclid(b);
                    kronecker(n, s) as f64 * buckets[j as usize]
                })
                .collect();
            pairwise_sum(&terms)
        })
        .collect()
}

/// Result of one Poisson check: both sides and the truncation-tail estimate.
#[derive(Debug, Clone, Copy)]
pub struct PoissonCheck {
    pub lhs: Complex64,
    pub rhs: Complex64,
    pub tail_estimate: f64,
}

/// `Σ_{n≡t (d), |n|≤M} (n/r)F(n)` versus its dual Poisson sum.
pub fn poisson_check(
    f: &BandlimitedMajorant,
    d: i64,
    r: i64,
    t: i64,
    m_bound: i64,
) -> Result<PoissonCheck> {
    if d < 1 || r < 1 || r % 2 == 0 {
        return invalid("d must be positive and r odd positive");
    }
    if gcd(d, r) != 1 {
        return invalid(format!("gcd(d, r) must be 1 (d={d}, r={r})"));
    }
    let terms: Vec<f64> = (-m_bound..=m_bound)
        .filter(|n| (n - t).rem_euclid(d) == 0)
        .map(|n| kronecker(n, r) as f64 * f.eval(n as f64))
        .collect();
    let lhs = pairwise_sum(&terms);
    let tail_estimate = 2.0 * f.eval(m_bound as f64) * (1.0 + 1.0 / d as f64);
    let dr = d * r;
    let kmax = (f.bandwidth * dr as f64).ceil() as i64;
    let rbar = mod_inverse(r, d).unwrap_or(0);
    let rhs_terms: Vec<Complex64> = (-kmax..=kmax)
        .filter(|&k| (k.abs() as f64) < f.bandwidth * dr as f64)
        .map(|k| {
            let fh = f.fourier_by_convolution(k as f64 / dr as f64);
            if fh == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            arith::e_frac(t * k * rbar, d) * arith::gauss_tau(k, r) * fh
        })
        .collect();
    let rhs = pairwise_sum(&rhs_terms) * (jacobi(d, r) as f64 / dr as f64);
    Ok(PoissonCheck {
        lhs: Complex64::new(lhs, 0.0),
        rhs,
        tail_estimate,
    })
}

/// Both sides of `(1/r)Σ_t e(−tℓ/r) τ_{at}(r) conj(τ_{bt}(r)) = (ab/r) c_r(ℓ)`.
pub fn ramanujan_gauss_identity(
    r: i64,
    a: i64,
    b: i64,
    ell: i64,
) -> Result<(Complex64, Complex64)> {
    if r < 1 || r % 2 == 0 || !arith::is_squarefree(r) {
        return invalid(format!("r must be odd and squarefree, got {r}"));
    }
    if gcd(a * b, r) != 1 {
        return invalid("gcd(ab, r) must be 1");
    }
    let terms: Vec<Complex64> = (0..r)
        .map(|t| {
            arith::e_frac(-t * ell, r)
                * arith::gauss_tau(a * t, r)
                * arith::gauss_tau(b * t, r).conj()
        })
        .collect();
    let lhs = pairwise_sum(&terms) / r as f64;
    let rhs = Complex64::new((jacobi(a * b, r) * ramanujan_sum(r, ell)) as f64, 0.0);
    Ok((lhs, rhs))
}

/// One row of the character-sum grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridRow {
    pub a: i64,
    pub b: i64,
    pub ell: i64,
    pub r: i64,
    pub s: i64,
    pub bruteforce: f64,
    pub mainterm: f64,
    pub normalized_error: f64,
    pub zero_frequency: f64,
    pub zero_frequency_error: f64,
    pub crossed: bool,
}

/// The `(a, b, r, s)` part of the grid: `a, b ≤ amax`, odd `r, s ≤ rmax`, `gcd(ab, rs) = 1`.
pub fn grid_tuples(amax: i64, rmax: i64) -> Vec<(i64, i64, i64, i64)> {
    let mut out = Vec::new();
    for a in 1..=amax {
        for b in 1..=amax {
            for r in (1..=rmax).step_by(2) {
                for s in (1..=rmax).step_by(2) {
                    if gcd(a * b, r * s) == 1 {
                        out.push((a, b, r, s));
                    }
                }
            }
        }
    }
    out
}

/// Evaluate the full grid; error normalization is `F̂(0)X/[a,b]`.
pub fn verify_grid(
    f: &BandlimitedMajorant,
    x: f64,
    amax: i64,
    lmax: i64,
    rmax: i64,
) -> Result<Vec<GridRow>> {
    verify_tuples(f, x, &grid_tuples(amax, rmax), lmax)
}

/// [`verify_grid`] over an explicit list of `(a, b, r, s)` tuples.
pub fn verify_tuples(
    f: &BandlimitedMajorant,
    x: f64,
    tuples: &[(i64, i64, i64, i64)],
    lmax: i64,
) -> Result<Vec<GridRow>> {
    let fhat0 = testfn::fourier(f, 0.0)?;
    let radius = f.effective_radius().min(10.0);
    let table = f.table(x, (radius * x).ceil() as usize);
    let ells: Vec<i64> = (-lmax..=lmax).collect();
    let rows: Vec<Vec<GridRow>> = tuples
        .par_iter()
        .map(|&(a, b, r, s)| {
            let vals = shifted_sum_bruteforce_many(a, b, r, s, &ells, &table);
            ells.iter()
                .zip(vals)
                .map(|(&ell, bf)| {
                    let p = ShiftedSumParams { a, b, ell, r, s, x };
                    let mt = mainterm_with_fhat0(&p, fhat0);
                    let norm = fhat0 * x / lcm(a, b) as f64;
                    let zf = zero_frequency_term(&p, fhat0);
                    GridRow {
                        a,
                        b,
                        ell,
                        r,
                        s,
                        bruteforce: bf,
                        mainterm: mt,
                        normalized_error: (bf - mt).abs() / norm,
                        zero_frequency: zf,
                        zero_frequency_error: (bf - zf).abs() / norm,
                        crossed: crossed_square_parts(r, s),
                    }
                })
                .collect()
        })
        .collect();
    Ok(rows.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testfn::build_majorant;
    use std::sync::OnceLock;

    fn maj() -> &'static BandlimitedMajorant {
        static F: OnceLock<BandlimitedMajorant> = OnceLock::new();
        F.get_or_init(|| build_majorant(10.0).unwrap())
    }

    #[test]
    fn poisson_examples() {
        let f = maj();
        for &(d, r, t) in &[(1, 1, 0), (3, 5, 1), (2, 3, 0)] {
            let c = poisson_check(f, d, r, t, 60).unwrap();
            assert!((c.lhs - c.rhs).norm() < 1e-6, "d={d} r={r} t={t}: {:?}", c);
            assert!(c.tail_estimate < 1e-12);
        }
        assert!(poisson_check(f, 3, 9, 0, 60).is_err());
    }

    #[test]
    fn poisson_grid() {
        let f = maj();
        for d in 1..=6 {
            for r in (1..=15).step_by(2) {
                if gcd(d, r) != 1 {
                    continue;
                }
                for t in 0..d {
                    let c = poisson_check(f, d, r, t, 40).unwrap();
                    assert!((c.lhs - c.rhs).norm() < 1e-6, "d={d} r={r} t={t}");
                }
            }
        }
    }

    #[test]
    fn ramanujan_gauss_examples() {
        let (l, r) = ramanujan_gauss_identity(1, 1, 1, 0).unwrap();
        assert!((l - 1.0).norm() < 1e-12 && (r - 1.0).norm() < 1e-12);
        let (l, r) = ramanujan_gauss_identity(3, 1, 1, 0).unwrap();
        assert!((l - 2.0).norm() < 1e-9 && (r - 2.0).norm() < 1e-12);
        let (l, r) = ramanujan_gauss_identity(5, 1, 2, 1).unwrap();
        assert!((l - 1.0).norm() < 1e-9 && (r - 1.0).norm() < 1e-12);
        assert!(ramanujan_gauss_identity(4, 1, 1, 0).is_err());
        assert!(ramanujan_gauss_identity(9, 1, 1, 0).is_err());
    }

    #[test]
    fn ramanujan_gauss_identity_matches_character_sum() {
        // (1/r)Σ e(−tℓ/r)τ_{at}conj(τ_{bt}) also equals Σ_t (b̄t(at−ℓ)/r).
        for r in [3i64, 5, 7, 15, 21, 35] {
            for (a, b) in [(1, 1), (1, 2), (2, 4), (4, 1)] {
                if gcd(a * b, r) != 1 {
                    continue;
                }
                let bbar = mod_inverse(b, r).unwrap();
                for ell in -6..=6 {
                    let direct: i64 = (0..r).map(|t| jacobi(bbar * t * (a * t - ell), r)).sum();
                    let (l, rhs) = ramanujan_gauss_identity(r, a, b, ell).unwrap();
                    assert!((l - direct as f64).norm() < 1e-9);
                    assert!((rhs - direct as f64).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn main_term_m_examples() {
        assert_eq!(main_term_m(1, 1, 1, 1, 1, 0).value, Ratio::from_integer(1));
        assert_eq!(main_term_m(1, 3, 1, 1, 1, 0).value, Ratio::new(2, 3));
        // r = s = 9: d₁, d₂ ∈ {1, 3}; 1 − 1/3 − 1/3 + 1/3.
        assert_eq!(main_term_m(1, 3, 3, 1, 1, 0).value, Ratio::new(2, 3));
        // (a, b) ∤ ℓ kills the trivial term.
        assert_eq!(main_term_m(1, 1, 1, 2, 2, 1).value, Ratio::from_integer(0));
    }

    #[test]
    fn mainterm_trivial_and_mismatch() {
        let f = maj();
        let fh = testfn::fourier(f, 0.0).unwrap();
        let p = ShiftedSumParams::new(1, 1, 0, 1, 1, 1e5).unwrap();
        assert!((shifted_sum_mainterm(&p, f).unwrap().re - fh * 1e5).abs() < 1e-6);
        let p = ShiftedSumParams::new(1, 1, 0, 3, 5, 1e5).unwrap();
        assert_eq!(shifted_sum_mainterm(&p, f).unwrap().re, 0.0);
        assert!(ShiftedSumParams::new(3, 1, 0, 3, 1, 1e5).is_err());
    }

    #[test]
    fn bruteforce_examples() {
        let f = maj();
        let fh = testfn::fourier(f, 0.0).unwrap();
        let x = 1e5;
        let p = ShiftedSumParams::new(1, 1, 0, 1, 1, x).unwrap();
        let v = shifted_sum_bruteforce(&p, f, 10.0 * x).unwrap().re;
        assert!((v / (fh * x) - 1.0).abs() < 0.01);
        let p = ShiftedSumParams::new(1, 1, 0, 9, 1, x).unwrap();
        let v = shifted_sum_bruteforce(&p, f, 10.0 * x).unwrap().re;
        assert!((v / (fh * 6.0 * x / 9.0) - 1.0).abs() < 0.005);
        let p = ShiftedSumParams::new(1, 1, 0, 3, 5, x).unwrap();
        let v = shifted_sum_bruteforce(&p, f, 10.0 * x).unwrap().re;
        assert!(v.abs() < 1e-3 * x);
        let p = ShiftedSumParams::new(1, 1, 0, 9, 9, x).unwrap();
        let v = shifted_sum_bruteforce(&p, f, 10.0 * x).unwrap().re;
        let m = shifted_sum_mainterm(&p, f).unwrap().re;
        assert!(((v - m) / m).abs() < 0.005);
        assert!(shifted_sum_bruteforce(&p, f, x).is_err());
    }

    #[test]
    fn bucketed_matches_direct() {
        let f = maj();
        let x = 2e4;
        let table = f.table(x, (10.0 * x) as usize);
        for &(a, b, r, s) in &[(1, 1, 3, 3), (2, 3, 5, 7), (4, 1, 9, 25), (3, 2, 1, 5)] {
            let ells = [-5, 0, 4];
            let many = shifted_sum_bruteforce_many(a, b, r, s, &ells, &table);
            for (i, &ell) in ells.iter().enumerate() {
                let p = ShiftedSumParams::new(a, b, ell, r, s, x).unwrap();
                let direct = shifted_sum_bruteforce(&p, f, 10.0 * x).unwrap().re;
                assert!(
                    (direct - many[i]).abs() < 1e-7 * x,
                    "{a} {b} {r} {s} {ell}: {direct} {}",
                    many[i]
                );
            }
        }
    }

    #[test]
    fn table_matches_direct_evaluation() {
        let f = maj();
        let t = f.table(1000.0, 5000);
        for i in [0usize, 1, 777, 1500, 2999, 4200] {
            assert!((t[i] - f.eval(i as f64 / 1000.0)).abs() < 1e-11 * f.eval(0.0));
        }
    }

    #[test]
    fn zero_frequency_agrees_with_closed_form_off_the_crossed_class() {
        for (a, b, r, s) in grid_tuples(4, 27) {
            for ell in -6..=6 {
                let p = ShiftedSumParams::new(a, b, ell, r, s, 1.0).unwrap();
                if crossed_square_parts(r, s) {
                    continue;
                }
                let zf = zero_frequency_term(&p, 1.0);
                let mt = mainterm_with_fhat0(&p, 1.0);
                assert!((zf - mt).abs() < 1e-12, "{a} {b} {ell} {r} {s}: {zf} {mt}");
            }
        }
    }

    #[test]
    fn crossed_class_counterexample() {
        // r = 3, s = 9, ℓ = 1: the summand is (m/3)·[3 ∤ m − 1], whose mean is −1/3.
        let p = ShiftedSumParams::new(1, 1, 1, 3, 9, 1.0).unwrap();
        assert!(crossed_square_parts(3, 9));
        assert_eq!(zero_frequency_mean(&p), Ratio::new(-1, 3));
        assert_eq!(mainterm_with_fhat0(&p, 1.0), 0.0);
    }

    #[test]
    fn bruteforce_is_deterministic() {
        let f = maj();
        let p = ShiftedSumParams::new(2, 3, 1, 5, 7, 1e4).unwrap();
        let a = shifted_sum_bruteforce(&p, f, 1e5).unwrap();
        let b = shifted_sum_bruteforce(&p, f, 1e5).unwrap();
        assert_eq!(a.re.to_bits(), b.re.to_bits());
    }
}
