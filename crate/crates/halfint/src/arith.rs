//! Integer and quadratic-character primitives.
//!
//! Kronecker symbol convention: for odd positive bottom it is the Jacobi
//! symbol; `(a/2)` is 0 for even `a`, `+1` for `a ≡ ±1 (mod 8)` and `-1` for
//! `a ≡ ±3 (mod 8)`; `(a/-1)` is `-1` when `a < 0` and `+1` otherwise;
//! `(a/0)` is 1 when `|a| = 1` and 0 otherwise. The symbol is completely
//! multiplicative in the bottom argument under this convention.

use crate::error::{invalid, Result};
use num_complex::Complex64;
use std::f64::consts::PI;

pub use num_integer::{gcd, lcm};

/// `e(x) = exp(2πix)`.
pub fn e(x: f64) -> Complex64 {
    let t = 2.0 * PI * x;
    Complex64::new(t.cos(), t.sin())
}

/// `e(num/den)` with the fraction reduced mod 1 exactly before the float step.
pub fn e_frac(num: i64, den: i64) -> Complex64 {
    let r = num.rem_euclid(den);
    e(r as f64 / den as f64)
}

/// Prime factorization of `|n|` as (prime, exponent) pairs in increasing order.
pub fn factorize(n: i64) -> Vec<(i64, u32)> {
    let mut m = n.unsigned_abs();
    let mut out = Vec::new();
    if m < 2 {
        return out;
    }
    let mut p = 2u64;
    while p * p <= m {
        if m % p == 0 {
            let mut k = 0;
            while m % p == 0 {
                m /= p;
                k += 1;
            }
            out.push((p as i64, k));
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if m > 1 {
        out.push((m as i64, 1));
    }
    out
}

pub fn is_prime(n: i64) -> bool {
    if n < 2 {
        return false;
    }
    if n < 4 {
        return true;
    }
    if n % 2 == 0 {
        return false;
    }
    let mut p = 3;
    while p * p <= n {
        if n % p == 0 {
            return false;
        }
        p += 2;
    }
    true
}

/// All primes `≤ n` by sieve.
pub fn primes_up_to(n: usize) -> Vec<usize> {
    if n < 2 {
        return Vec::new();
    }
    let mut sieve = vec![true; n + 1];
    sieve[0] = false;
    sieve[1] = false;
    let mut i = 2;
    while i * i <= n {
        if sieve[i] {
            let mut j = i * i;
            while j <= n {
                sieve[j] = false;
                j += i;
            }
        }
        i += 1;
    }
    (0..=n).filter(|&k| sieve[k]).collect()
}

pub fn is_squarefree(n: i64) -> bool {
    n != 0 && factorize(n).iter().all(|&(_, k)| k == 1)
}

/// Möbius function; `mobius(0)` is 0.
pub fn mobius(n: i64) -> i64 {
    if n == 0 {
        return 0;
    }
    let f = factorize(n);
    if f.iter().any(|&(_, k)| k > 1) {
        0
    } else if f.len() % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Euler totient of `|n|`; `euler_phi(0)` is 0.
pub fn euler_phi(n: i64) -> i64 {
    if n == 0 {
        return 0;
    }
    factorize(n)
        .iter()
        .fold(n.abs(), |acc, &(p, _)| acc / p * (p - 1))
}

/// Positive divisors of `|n|` in increasing order.
pub fn divisors(n: i64) -> Vec<i64> {
    let mut ds = vec![1i64];
    for (p, k) in factorize(n) {
        let cur = ds.clone();
        let mut pk = 1;
        for _ in 0..k {
            pk *= p;
            ds.extend(cur.iter().map(|d| d * pk));
        }
    }
    ds.sort_unstable();
    ds
}

pub fn divisor_count(n: i64) -> i64 {
    factorize(n).iter().map(|&(_, k)| k as i64 + 1).product()
}

pub fn divisor_sum(n: i64) -> i64 {
    divisors(n).iter().sum()
}

/// Inverse of `a` modulo `m` (`m ≥ 1`), if it exists.
pub fn mod_inverse(a: i64, m: i64) -> Option<i64> {
    if m == 1 {
        return Some(0);
    }
    let (mut r0, mut r1) = (a.rem_euclid(m), m);
    let (mut s0, mut s1) = (1i64, 0i64);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (s0, s1) = (s1, s0 - q * s1);
    }
    (r0 == 1).then(|| s0.rem_euclid(m))
}

/// Largest `ν` with `2^ν | ell`.
pub fn two_adic_valuation(ell: i64) -> Result<u32> {
    if ell == 0 {
        return invalid("two-adic valuation of 0 is undefined");
    }
    Ok(ell.trailing_zeros())
}

/// Kronecker symbol `(a/n)`; see the module docs for the convention.
pub fn kronecker(a: i64, n: i64) -> i64 {
    if n == 0 {
        return i64::from(a.abs() == 1);
    }
    if a % 2 == 0 && n % 2 == 0 {
        return 0;
    }
    let v = n.trailing_zeros();
    let mut n = n >> v;
    let mut k = if v % 2 == 0 {
        1
    } else {
        match a.rem_euclid(8) {
            1 | 7 => 1,
            _ => -1,
        }
    };
    if n < 0 {
        n = -n;
        if a < 0 {
            k = -k;
        }
    }
    k * jacobi(a.rem_euclid(n), n)
}

/// Jacobi symbol for odd positive `n`.
pub fn jacobi(a: i64, n: i64) -> i64 {
    debug_assert!(n > 0 && n % 2 == 1);
    let mut a = a.rem_euclid(n);
    let mut n = n;
    let mut k = 1;
    while a != 0 {
        let v = a.trailing_zeros();
        a >>= v;
        if v % 2 == 1 && (n % 8 == 3 || n % 8 == 5) {
            k = -k;
        }
        if a % 4 == 3 && n % 4 == 3 {
            k = -k;
        }
        (a, n) = (n % a, a);
    }
    if n == 1 {
        k
    } else {
        0
    }
}

/// Ramanujan sum `c_r(ℓ)` via `μ(r/g)φ(r)/φ(r/g)`, `g = gcd(r, ℓ)`.
pub fn ramanujan_sum(r: i64, ell: i64) -> i64 {
    assert!(r >= 1, "ramanujan_sum requires r >= 1");
    let g = gcd(r, ell);
    let q = r / g;
    mobius(q) * euler_phi(r) / euler_phi(q)
}

/// Ramanujan sum by direct exponential summation, rounded.
pub fn ramanujan_sum_direct(r: i64, ell: i64) -> (i64, f64) {
    let s: Complex64 = (1..=r)
        .filter(|&a| gcd(a, r) == 1)
        .map(|a| e_frac(a * ell, r))
        .sum();
    let rounded = s.re.round();
    (rounded as i64, (s - Complex64::new(rounded, 0.0)).norm())
}

/// `n = d·δ²` with `d` a fundamental discriminant (or 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct FundamentalFactorization {
    pub n: i64,
    pub d: i64,
    pub delta: i64,
}

pub fn is_fundamental_discriminant(d: i64) -> bool {
    if d == 1 {
        return true;
    }
    match d.rem_euclid(4) {
        1 => is_squarefree(d),
        0 => {
            let m = d / 4;
            matches!(m.rem_euclid(4), 2 | 3) && is_squarefree(m)
        }
        _ => false,
    }
}

/// Decompose a discriminant `n ≡ 0, 1 (mod 4)` as `d·δ²`.
///
/// Integers `≡ 2, 3 (mod 4)` have no such decomposition and are rejected.
pub fn fund_disc_decompose(n: i64) -> Result<FundamentalFactorization> {
    if n == 0 {
        return invalid("cannot decompose 0");
    }
    if matches!(n.rem_euclid(4), 2 | 3) {
        return invalid(format!("{n} is not a discriminant (n ≡ 2,3 mod 4)"));
    }
    let (mut core, mut f) = (n.signum(), 1i64);
    for (p, k) in factorize(n) {
        if k % 2 == 1 {
            core *= p;
        }
        f *= p.pow(k / 2);
    }
    let (d, delta) = if core.rem_euclid(4) == 1 {
        (core, f)
    } else {
        (4 * core, f / 2)
    };
    Ok(FundamentalFactorization { n, d, delta })
}

/// `τ_v(r) = Σ_{b mod r} (b/r) e(vb/r)` by direct summation.
pub fn gauss_tau(v: i64, r: i64) -> Complex64 {
    assert!(r >= 1, "gauss_tau requires r >= 1");
    (0..r)
        .map(|b| {
            let c = kronecker(b, r);
            if c == 0 {
                Complex64::new(0.0, 0.0)
            } else {
                e_frac(v * b, r) * c as f64
            }
        })
        .sum()
}

/// Closed form of `τ_v(r)` for odd squarefree `r`:
/// `((1+i)/2 + (−1/r)(1−i)/2)(v/r)√r`.
pub fn gauss_tau_closed_form(v: i64, r: i64) -> Complex64 {
    let eps = Complex64::new(0.5, 0.5) + Complex64::new(0.5, -0.5) * jacobi(-1, r) as f64;
    eps * (jacobi(v, r) as f64) * (r as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn kronecker_examples() {
        assert_eq!(kronecker(7, 1), 1);
        assert_eq!(kronecker(0, 9), 0);
        assert_eq!(kronecker(5, 3), -1);
    }

    #[test]
    fn kronecker_matches_euler_criterion_for_odd_primes() {
        for p in primes_up_to(200).into_iter().skip(1) {
            let p = p as i64;
            for a in -50..50i64 {
                let mut pw = 1i64;
                let base = a.rem_euclid(p);
                for _ in 0..(p - 1) / 2 {
                    pw = pw * base % p;
                }
                let expect = if base == 0 {
                    0
                } else if pw == 1 {
                    1
                } else {
                    -1
                };
                assert_eq!(kronecker(a, p), expect, "a={a} p={p}");
            }
        }
    }

    #[test]
    fn kronecker_even_and_negative_bottom() {
        assert_eq!(kronecker(1, 2), 1);
        assert_eq!(kronecker(3, 2), -1);
        assert_eq!(kronecker(5, 2), -1);
        assert_eq!(kronecker(7, 2), 1);
        assert_eq!(kronecker(4, 2), 0);
        assert_eq!(kronecker(-3, -1), -1);
        assert_eq!(kronecker(3, -1), 1);
        assert_eq!(kronecker(-1, 0), 1);
        assert_eq!(kronecker(2, 0), 0);
    }

    #[test]
    fn ramanujan_examples() {
        assert_eq!(ramanujan_sum(1, 5), 1);
        assert_eq!(ramanujan_sum(3, 3), 2);
        assert_eq!(ramanujan_sum(9, 3), -3);
        assert_eq!(ramanujan_sum(3, 0), 2);
    }

    #[test]
    fn ramanujan_closed_form_vs_exponential_sum() {
        for r in 1..=200i64 {
            for ell in (0..=200i64).step_by(7).chain([1, 2, 3, 4, 6, 8, 12]) {
                let (direct, err) = ramanujan_sum_direct(r, ell);
                assert!(err < 1e-9, "r={r} ell={ell} err={err}");
                assert_eq!(direct, ramanujan_sum(r, ell), "r={r} ell={ell}");
            }
        }
    }

    #[test]
    fn decompose_examples() {
        let f = fund_disc_decompose(12).unwrap();
        assert_eq!((f.d, f.delta), (12, 1));
        let f = fund_disc_decompose(9).unwrap();
        assert_eq!((f.d, f.delta), (1, 3));
        let f = fund_disc_decompose(-4).unwrap();
        assert_eq!((f.d, f.delta), (-4, 1));
        assert!(fund_disc_decompose(0).is_err());
        assert!(fund_disc_decompose(3).is_err());
    }

    #[test]
    fn decompose_round_trip_all_discriminants() {
        for n in -10_000i64..=10_000 {
            if n == 0 || matches!(n.rem_euclid(4), 2 | 3) {
                continue;
            }
            let f = fund_disc_decompose(n).unwrap();
            assert_eq!(f.d * f.delta * f.delta, n);
            assert!(is_fundamental_discriminant(f.d), "n={n} d={}", f.d);
            assert!(f.delta >= 1);
        }
    }

    #[test]
    fn fundamental_discriminant_small_list() {
        let pos: Vec<i64> = (2..=30)
            .filter(|&d| is_fundamental_discriminant(d))
            .collect();
        assert_eq!(pos, vec![5, 8, 12, 13, 17, 21, 24, 28, 29]);
        let neg: Vec<i64> = (-24..0)
            .rev()
            .filter(|&d| is_fundamental_discriminant(d))
            .collect();
        assert_eq!(neg, vec![-3, -4, -7, -8, -11, -15, -19, -20, -23, -24]);
    }

    #[test]
    fn gauss_examples() {
        assert!(gauss_tau(0, 3).norm() < 1e-12);
        assert!((gauss_tau(1, 1) - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        assert!((gauss_tau(1, 5) - Complex64::new(5f64.sqrt(), 0.0)).norm() < 1e-12);
    }

    #[test]
    fn gauss_closed_form_odd_squarefree() {
        for r in (1..=99i64).step_by(2).filter(|&r| is_squarefree(r)) {
            for v in -r..=r {
                if gcd(v, r) != 1 {
                    continue;
                }
                let err = (gauss_tau(v, r) - gauss_tau_closed_form(v, r)).norm();
                assert!(err < 1e-9, "r={r} v={v} err={err}");
            }
        }
    }

    #[test]
    fn valuation_examples() {
        assert_eq!(two_adic_valuation(8).unwrap(), 3);
        assert_eq!(two_adic_valuation(7).unwrap(), 0);
        assert_eq!(two_adic_valuation(-12).unwrap(), 2);
        assert!(two_adic_valuation(0).is_err());
    }

    #[test]
    fn plumbing() {
        assert_eq!(mobius(30), -1);
        assert_eq!(mobius(12), 0);
        assert_eq!(euler_phi(36), 12);
        assert_eq!(divisor_count(36), 9);
        assert_eq!(divisor_sum(12), 28);
        assert_eq!(divisors(12), vec![1, 2, 3, 4, 6, 12]);
        assert_eq!(primes_up_to(20), vec![2, 3, 5, 7, 11, 13, 17, 19]);
        assert_eq!(mod_inverse(3, 7), Some(5));
        assert_eq!(mod_inverse(2, 4), None);
    }

    #[test]
    fn kronecker_multiplicative_in_top_exhaustive() {
        for n in (1..=100i64).step_by(2) {
            for a in 1..=100i64 {
                for b in 1..=100i64 {
                    assert_eq!(kronecker(a, n) * kronecker(b, n), kronecker(a * b, n));
                }
            }
        }
    }

    proptest! {
        #[test]
        fn kronecker_multiplicative_bottom(a in -500i64..500, m in -60i64..60, n in -60i64..60) {
            prop_assume!(m != 0 && n != 0);
            prop_assert_eq!(kronecker(a, m) * kronecker(a, n), kronecker(a, m * n));
        }

        #[test]
        fn kronecker_zero_iff_not_coprime(a in -500i64..500, n in 1i64..500) {
            prop_assert_eq!(kronecker(a, n) == 0, gcd(a, n) > 1);
        }

        #[test]
        fn kronecker_periodic_odd_bottom(a in -500i64..500, n in 0i64..100) {
            let n = 2 * n + 1;
            prop_assert_eq!(kronecker(a, n), kronecker(a + n, n));
        }

        #[test]
        fn phi_multiplicative(m in 1i64..300, n in 1i64..300) {
            prop_assume!(gcd(m, n) == 1);
            prop_assert_eq!(euler_phi(m * n), euler_phi(m) * euler_phi(n));
        }
    }
}
