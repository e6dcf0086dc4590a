//! Moments of short Dirichlet polynomials over primes twisted by quadratic
//! characters.
//!
//! Three kinds of moment are evaluated by direct enumeration:
//! products over disjoint prime intervals weighted by `F(m/X)`, pairs
//! `(m, n)` with `am = bn + ℓ`, and pairs of fundamental discriminants.
//! Gaussian moment constants are exact rationals.

use crate::arith::{is_prime, kronecker, primes_up_to};
use crate::error::{invalid, Result};
use crate::quad::pairwise_sum;
use crate::testfn::BandlimitedMajorant;
use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Real coefficients `a(p)` at primes, with `|a(p)| ≤ p^{1/2−δ}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrimeCoefficients {
    delta: f64,
    values: BTreeMap<u64, f64>,
}

impl PrimeCoefficients {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 0.5) {
            return invalid(format!("exponent gap δ = {delta} must lie in (0, 1/2)"));
        }
        Ok(Self {
            delta,
            values: BTreeMap::new(),
        })
    }

    pub fn insert(&mut self, p: u64, value: f64) -> Result<()> {
        if !is_prime(p as i64) {
            return invalid(format!("{p} is not prime"));
        }
        let bound = (p as f64).powf(0.5 - self.delta);
        if !value.is_finite() || value.abs() > bound {
            return invalid(format!(
                "|a({p})| = {} exceeds {p}^(1/2-δ) = {bound}",
                value.abs()
            ));
        }
        self.values.insert(p, value);
        Ok(())
    }

    /// Fill every prime `p ≤ x` from `f`.
    pub fn from_fn(x: f64, delta: f64, f: impl Fn(u64) -> f64) -> Result<Self> {
        let mut out = Self::new(delta)?;
        for p in primes_up_to(x.max(0.0) as usize) {
            out.insert(p as u64, f(p as u64))?;
        }
        Ok(out)
    }

    /// `a(p) = 1` for every prime `p ≤ x`.
    pub fn constant_one(x: f64) -> Self {
        Self::from_fn(x, 0.01, |_| 1.0).expect("1 ≤ p^0.49 for p ≥ 2")
    }

    /// Deligne-normalized eigenvalues `τ(p)/p^{11/2}` of the discriminant form.
    pub fn delta_eigenvalues(x: f64) -> Result<Self> {
        let n = x.max(2.0) as usize;
        let tau = crate::qseries::ramanujan_tau_table(n);
        Self::from_fn(x, 0.01, |p| tau[p as usize] as f64 / (p as f64).powf(5.5))
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn get(&self, p: u64) -> Option<f64> {
        self.values.get(&p).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.values.iter().map(|(&p, &v)| (p, v))
    }

    /// Primes in `lo < p ≤ hi` that carry a coefficient.
    pub fn primes_in(&self, lo: f64, hi: f64) -> Vec<(u64, f64)> {
        self.iter()
            .filter(|&(p, _)| p as f64 > lo && p as f64 <= hi)
            .collect()
    }
}

/// `B(x) = ½ Σ_{p≤x} a(p)²/p` and `A(ℓ) = 1 + Σ_{p|ℓ} a(p)²/p`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentStats {
    pub b: f64,
    pub a: f64,
}

impl MomentStats {
    pub fn new(coeffs: &PrimeCoefficients, x: f64, ell: i64) -> Self {
        let b = 0.5
            * coeffs
                .primes_in(0.0, x)
                .iter()
                .map(|&(p, v)| v * v / p as f64)
                .sum::<f64>();
        let a = 1.0
            + coeffs
                .iter()
                .filter(|&(p, _)| ell != 0 && ell % p as i64 == 0)
                .map(|(p, v)| v * v / p as f64)
                .sum::<f64>();
        Self { b, a }
    }
}

fn factorial(n: u64) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, k| acc * BigInt::from(k))
}

/// `k`th moment of a standard normal variable: `(2ℓ)!/(ℓ! 2^ℓ)` or 0.
pub fn gaussian_moment(k: u64) -> BigRational {
    if k % 2 == 1 {
        return BigRational::zero();
    }
    let l = k / 2;
    BigRational::new(factorial(k), factorial(l) * (BigInt::one() << l))
}

/// A number `rational · 2^{−1/2·[odd]}`; used for `C(k)` at odd `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct SurdRational {
    pub rational: BigRational,
    pub over_sqrt2: bool,
}

impl SurdRational {
    pub fn to_f64(&self) -> f64 {
        let r = self.rational.to_f64().unwrap_or(f64::NAN);
        if self.over_sqrt2 {
            r / std::f64::consts::SQRT_2
        } else {
            r
        }
    }
}

/// `C(k) = k!/(⌊k/2⌋! 2^{k/2})`.
pub fn pairing_constant(k: u64) -> SurdRational {
    let h = k / 2;
    SurdRational {
        rational: BigRational::new(factorial(k), factorial(h) * (BigInt::one() << h)),
        over_sqrt2: k % 2 == 1,
    }
}

/// Kronecker symbol table `(t/p)` over one period of `t` (8 when `p = 2`).
fn symbol_table(p: u64) -> Vec<i8> {
    let period = if p == 2 { 8 } else { p as i64 };
    (0..period).map(|t| kronecker(t, p as i64) as i8).collect()
}

struct PrimeRow {
    period: i64,
    weight: f64,
    chi: Vec<i8>,
}

impl PrimeRow {
    fn build(primes: &[(u64, f64)]) -> Vec<PrimeRow> {
        primes
            .iter()
            .map(|&(p, a)| PrimeRow {
                period: if p == 2 { 8 } else { p as i64 },
                weight: a / (p as f64).sqrt(),
                chi: symbol_table(p),
            })
            .collect()
    }

    fn term(&self, m: i64) -> f64 {
        self.weight * self.chi[m.rem_euclid(self.period) as usize] as f64
    }
}

fn poly(rows: &[PrimeRow], m: i64) -> f64 {
    rows.iter().map(|r| r.term(m)).sum()
}

/// An interval `(lo, hi]` of primes raised to the power `k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrimeInterval {
    pub lo: f64,
    pub hi: f64,
    pub k: u32,
}

fn check_disjoint(intervals: &[PrimeInterval]) -> Result<()> {
    let mut sorted: Vec<_> = intervals.to_vec();
    sorted.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    for w in sorted.windows(2) {
        if w[1].lo < w[0].hi {
            return invalid("prime intervals overlap");
        }
    }
    if intervals.iter().any(|i| !(i.lo < i.hi) || i.lo < 0.0) {
        return invalid("each interval needs 0 ≤ lo < hi");
    }
    Ok(())
}

/// Whether `x^{Σk} ≤ X^ε`.
pub fn within_exponent(x: f64, total_k: u32, big_x: f64, eps: f64) -> bool {
    total_k as f64 * x.ln() <= eps * big_x.ln()
}

fn weighted_sum(
    f: &BandlimitedMajorant,
    big_x: f64,
    radius_scale: f64,
    g: impl Fn(i64) -> f64 + Sync,
) -> f64 {
    let tmax = (f.effective_radius().min(10.0) * big_x / radius_scale).floor() as usize;
    let table = f.table(big_x / radius_scale, tmax);
    let block = 4096usize;
    let parts: Vec<f64> = (0..=tmax.div_ceil(block))
        .into_par_iter()
        .map(|bi| {
            let lo = bi * block;
            let hi = ((bi + 1) * block).min(tmax + 1);
            let vals: Vec<f64> = (lo..hi)
                .map(|t| {
                    let w = table[t];
                    if w == 0.0 {
                        return 0.0;
                    }
                    if t == 0 {
                        w * g(0)
                    } else {
                        w * (g(t as i64) + g(-(t as i64)))
                    }
                })
                .collect();
            pairwise_sum(&vals)
        })
        .collect();
    pairwise_sum(&parts)
}

/// `Σ_m Π_j (Σ_{p∈I_j} a(p)(m/p)/√p)^{k_j} F(m/X)` over `|m| ≤ 10X`.
pub fn multilinear_moment_bruteforce(
    coeffs: &PrimeCoefficients,
    intervals: &[PrimeInterval],
    f: &BandlimitedMajorant,
    big_x: f64,
) -> Result<f64> {
    check_disjoint(intervals)?;
    if !(big_x >= 1.0) {
        return invalid("X must be at least 1");
    }
    let rows: Vec<(Vec<PrimeRow>, i32)> = intervals
        .iter()
        .map(|i| (PrimeRow::build(&coeffs.primes_in(i.lo, i.hi)), i.k as i32))
        .collect();
    Ok(weighted_sum(f, big_x, 1.0, |m| {
        rows.iter().map(|(r, k)| poly(r, m).powi(*k)).product()
    }))
}

/// Upper bound `F̂(0) X Π_j C̃(k_j) (Σ_{p∈I_j} a(p)²/p)^{k_j/2}`.
pub fn multilinear_bound(
    coeffs: &PrimeCoefficients,
    intervals: &[PrimeInterval],
    fhat0: f64,
    big_x: f64,
) -> f64 {
    intervals.iter().fold(fhat0 * big_x, |acc, i| {
        let v: f64 = coeffs
            .primes_in(i.lo, i.hi)
            .iter()
            .map(|&(p, a)| a * a / p as f64)
            .sum();
        acc * gaussian_moment(i.k as u64).to_f64().unwrap_or(f64::NAN) * v.powf(i.k as f64 / 2.0)
    })
}

/// `Σ_{am = bn + ℓ} P(m)^k P(n)^j F(am/X)` with `P(t) = Σ_{2<p≤x, p∤ab} a(p)(t/p)/√p`.
#[allow(clippy::too_many_arguments)]
pub fn shifted_pair_moment_bruteforce(
    coeffs: &PrimeCoefficients,
    k: u32,
    j: u32,
    x: f64,
    f: &BandlimitedMajorant,
    big_x: f64,
    a: i64,
    b: i64,
    ell: i64,
) -> Result<f64> {
    if a < 1 || b < 1 {
        return invalid("a and b must be positive");
    }
    if !(big_x >= 1.0) {
        return invalid("X must be at least 1");
    }
    let primes: Vec<_> = coeffs
        .primes_in(2.0, x)
        .into_iter()
        .filter(|&(p, _)| (a * b) % p as i64 != 0)
        .collect();
    let rows = PrimeRow::build(&primes);
    // F(am/X) = F(m/(X/a)); terms with b ∤ am − ℓ drop out.
    Ok(weighted_sum(f, big_x, a as f64, |m| {
        let t = a * m - ell;
        if t.rem_euclid(b) != 0 {
            return 0.0;
        }
        poly(&rows, m).powi(k as i32) * poly(&rows, t / b).powi(j as i32)
    }))
}

/// Sieve of fundamental discriminants with `|d| ≤ bound` (including `d = 1`).
#[derive(Clone, Debug)]
pub struct FundamentalSieve {
    bound: i64,
    squarefree: Vec<bool>,
}

impl FundamentalSieve {
    pub fn new(bound: i64) -> Self {
        let n = bound.max(1) as usize;
        let mut squarefree = vec![true; n + 1];
        squarefree[0] = false;
        let mut p = 2usize;
        while p * p <= n {
            if (2..p).all(|q| p % q != 0) {
                let mut m = p * p;
                while m <= n {
                    squarefree[m] = false;
                    m += p * p;
                }
            }
            p += 1;
        }
        Self {
            bound: bound.max(1),
            squarefree,
        }
    }

    pub fn bound(&self) -> i64 {
        self.bound
    }

    fn sqfree(&self, n: i64) -> bool {
        self.squarefree[n.unsigned_abs() as usize]
    }

    pub fn is_fundamental(&self, d: i64) -> bool {
        if d == 0 || d.abs() > self.bound {
            return false;
        }
        match d.rem_euclid(4) {
            1 => self.sqfree(d),
            0 => {
                let m = d / 4;
                matches!(m.rem_euclid(4), 2 | 3) && self.sqfree(m)
            }
            _ => false,
        }
    }
}

/// Per-pair signature: `χ_{d₁}(p) + χ_{d₂}(p)` for each prime in order.
type Signature = Vec<i8>;

fn pair_signature(primes: &[u64], d1: i64, d2: i64) -> Signature {
    primes
        .iter()
        .map(|&p| (kronecker(d1, p as i64) + kronecker(d2, p as i64)) as i8)
        .collect()
}

/// Exact multiplicities of signatures over the qualifying pairs `(d₁, d₂)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairCensus {
    pub primes: Vec<u64>,
    pub counts: BTreeMap<Signature, u64>,
}

impl PairCensus {
    pub fn pairs(&self) -> u64 {
        self.counts.values().sum()
    }

    /// `Σ (Σ_p a(p)(χ_{d₁}(p)+χ_{d₂}(p))/√p)^{2k}`, accumulated in signature order.
    pub fn moment(&self, coeffs: &PrimeCoefficients, k: u32) -> f64 {
        let w: Vec<f64> = self
            .primes
            .iter()
            .map(|&p| coeffs.get(p).unwrap_or(0.0) / (p as f64).sqrt())
            .collect();
        let terms: Vec<f64> = self
            .counts
            .iter()
            .map(|(sig, &c)| {
                let v: f64 = sig.iter().zip(&w).map(|(&s, &wp)| s as f64 * wp).sum();
                c as f64 * v.powi(2 * k as i32)
            })
            .collect();
        pairwise_sum(&terms)
    }
}

fn moment_primes(coeffs: &PrimeCoefficients, x: f64, a: i64, b: i64) -> Vec<u64> {
    coeffs
        .primes_in(2.0, x)
        .into_iter()
        .map(|(p, _)| p)
        .filter(|&p| (a * b) % p as i64 != 0)
        .collect()
}

fn merge(
    mut acc: BTreeMap<Signature, u64>,
    other: BTreeMap<Signature, u64>,
) -> BTreeMap<Signature, u64> {
    for (k, v) in other {
        *acc.entry(k).or_insert(0) += v;
    }
    acc
}

/// Pairs enumerated by `d₁` with `a|d₁| ≤ X`, `d₂ = (ad₁ − ℓ)/b`.
pub fn shifted_pair_census(
    x: f64,
    big_x: f64,
    a: i64,
    b: i64,
    ell: i64,
    coeffs: &PrimeCoefficients,
) -> Result<PairCensus> {
    if a < 1 || b < 1 {
        return invalid("a and b must be positive");
    }
    let primes = moment_primes(coeffs, x, a, b);
    let d1max = (big_x / a as f64).floor() as i64;
    let sieve = FundamentalSieve::new(((a * d1max + ell.abs()) / b + 1).max(d1max));
    let block = 8192i64;
    let nblocks = (2 * d1max + 1 + block - 1) / block;
    let counts = (0..nblocks)
        .into_par_iter()
        .map(|bi| {
            let mut local = BTreeMap::new();
            let lo = -d1max + bi * block;
            let hi = (lo + block - 1).min(d1max);
            for d1 in lo..=hi {
                if !sieve.is_fundamental(d1) {
                    continue;
                }
                let t = a * d1 - ell;
                if t.rem_euclid(b) != 0 {
                    continue;
                }
                let d2 = t / b;
                if sieve.is_fundamental(d2) {
                    *local.entry(pair_signature(&primes, d1, d2)).or_insert(0) += 1;
                }
            }
            local
        })
        .reduce(BTreeMap::new, merge);
    Ok(PairCensus { primes, counts })
}

/// The same census enumerated by `d₂` first, `d₁ = (bd₂ + ℓ)/a`.
pub fn shifted_pair_census_swapped(
    x: f64,
    big_x: f64,
    a: i64,
    b: i64,
    ell: i64,
    coeffs: &PrimeCoefficients,
) -> Result<PairCensus> {
    if a < 1 || b < 1 {
        return invalid("a and b must be positive");
    }
    let primes = moment_primes(coeffs, x, a, b);
    let d1max = (big_x / a as f64).floor() as i64;
    let d2max = (a * d1max + ell.abs()) / b + 1;
    let sieve = FundamentalSieve::new(d2max.max(d1max));
    let mut counts = BTreeMap::new();
    for d2 in -d2max..=d2max {
        if !sieve.is_fundamental(d2) {
            continue;
        }
        let t = b * d2 + ell;
        if t.rem_euclid(a) != 0 {
            continue;
        }
        let d1 = t / a;
        if d1.abs() <= d1max && sieve.is_fundamental(d1) {
            *counts.entry(pair_signature(&primes, d1, d2)).or_insert(0) += 1;
        }
    }
    Ok(PairCensus { primes, counts })
}

/// `Σ_{d₁,d₂} (Σ_{2<p≤x, p∤ab} a(p)(χ_{d₁}(p)+χ_{d₂}(p))/√p)^{2k}`.
#[allow(clippy::too_many_arguments)]
pub fn shifted_moment_bruteforce(
    coeffs: &PrimeCoefficients,
    k: u32,
    x: f64,
    big_x: f64,
    a: i64,
    b: i64,
    ell: i64,
) -> Result<f64> {
    if k == 0 {
        return invalid("k must be positive");
    }
    Ok(shifted_pair_census(x, big_x, a, b, ell, coeffs)?.moment(coeffs, k))
}

/// `(2k)!/(2^k k!) · (2B + c·A)^k`, per unit `X/[a,b]`.
pub fn moment_bound_rhs(k: u32, stats: MomentStats, a: i64, b: i64, c_slack: f64) -> Result<f64> {
    if k == 0 || a < 1 || b < 1 || c_slack < 0.0 {
        return invalid("need k ≥ 1, a, b ≥ 1 and c_slack ≥ 0");
    }
    let g = gaussian_moment(2 * k as u64).to_f64().unwrap_or(f64::NAN);
    Ok(g * (2.0 * stats.b + c_slack * stats.a).powi(k as i32))
}

/// Ratio of a shifted moment to `X/[a,b] · (2k)!/(2^k k!) · (2B)^k`, and the
/// smallest `c ≥ 0` with `value ≤ X/[a,b] · rhs(c)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundProbe {
    pub value: f64,
    pub ratio: f64,
    pub min_slack: f64,
    pub b_over_a: f64,
}

pub fn bound_probe(
    value: f64,
    k: u32,
    stats: MomentStats,
    big_x: f64,
    a: i64,
    b: i64,
) -> Result<BoundProbe> {
    let unit = big_x / a.lcm(&b) as f64;
    let base = moment_bound_rhs(k, stats, a, b, 0.0)? * unit;
    let g = gaussian_moment(2 * k as u64).to_f64().unwrap_or(f64::NAN);
    let root = (value / (unit * g)).max(0.0).powf(1.0 / k as f64);
    Ok(BoundProbe {
        value,
        ratio: value / base,
        min_slack: ((root - 2.0 * stats.b) / stats.a).max(0.0),
        b_over_a: stats.b / stats.a,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testfn::build_majorant;
    use proptest::prelude::*;
    use std::sync::OnceLock;

    fn majorant() -> &'static BandlimitedMajorant {
        static F: OnceLock<BandlimitedMajorant> = OnceLock::new();
        F.get_or_init(|| build_majorant(10.0).unwrap())
    }

    fn ratio(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn gaussian_moments() {
        assert_eq!(gaussian_moment(0), ratio(1, 1));
        assert_eq!(gaussian_moment(2), ratio(1, 1));
        assert_eq!(gaussian_moment(4), ratio(3, 1));
        assert_eq!(gaussian_moment(3), ratio(0, 1));
        assert_eq!(gaussian_moment(10), ratio(945, 1));
    }

    #[test]
    fn pairing_constant_even_matches_gaussian() {
        for l in 0..15u64 {
            let c = pairing_constant(2 * l);
            assert!(!c.over_sqrt2);
            assert_eq!(c.rational, gaussian_moment(2 * l));
        }
        // C(3) = 3!/(1!·2^{3/2}) = 3/√2.
        let c3 = pairing_constant(3);
        assert_eq!(c3.rational, ratio(3, 1));
        assert!(c3.over_sqrt2);
        assert!((c3.to_f64() - 6.0 / 2f64.powf(1.5)).abs() < 1e-15);
    }

    #[test]
    fn bound_rhs_examples() {
        let s = |b, a| MomentStats { b, a };
        assert_eq!(moment_bound_rhs(1, s(1.0, 1.0), 1, 1, 0.0).unwrap(), 2.0);
        assert_eq!(moment_bound_rhs(2, s(1.0, 1.0), 1, 1, 0.0).unwrap(), 12.0);
        assert_eq!(moment_bound_rhs(2, s(2.0, 1.0), 1, 1, 1.0).unwrap(), 75.0);
        assert!(moment_bound_rhs(0, s(1.0, 1.0), 1, 1, 0.0).is_err());
        assert!(moment_bound_rhs(1, s(1.0, 1.0), 1, 1, -1.0).is_err());
    }

    #[test]
    fn coefficient_bound_enforced() {
        let mut c = PrimeCoefficients::new(0.1).unwrap();
        assert!(c.insert(4, 0.0).is_err());
        assert!(c.insert(5, 5f64.powf(0.4) * 1.001).is_err());
        c.insert(5, 1.9).unwrap();
        assert!(PrimeCoefficients::new(0.0).is_err());
    }

    #[test]
    fn stats_examples() {
        let c = PrimeCoefficients::constant_one(10.0);
        let st = MomentStats::new(&c, 10.0, 12);
        let b = 0.5 * (1.0 / 2.0 + 1.0 / 3.0 + 1.0 / 5.0 + 1.0 / 7.0);
        assert!((st.b - b).abs() < 1e-15);
        assert!((st.a - (1.0 + 0.5 + 1.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn sieve_matches_direct_test() {
        let s = FundamentalSieve::new(3000);
        for d in -3000..=3000 {
            assert_eq!(
                s.is_fundamental(d),
                crate::arith::is_fundamental_discriminant(d),
                "{d}"
            );
        }
    }

    #[test]
    fn empty_product_gives_mass() {
        let f = majorant();
        let x = 2.0e4;
        let v = multilinear_moment_bruteforce(&PrimeCoefficients::constant_one(10.0), &[], f, x)
            .unwrap();
        let fhat0 = f.fourier_by_convolution(0.0);
        assert!((v - fhat0 * x).abs() < 1e-9 * fhat0 * x);
    }

    #[test]
    fn single_prime_square() {
        let f = majorant();
        let x = 1.0e5;
        let c = PrimeCoefficients::constant_one(3.0);
        let iv = [PrimeInterval {
            lo: 2.5,
            hi: 3.0,
            k: 2,
        }];
        let v = multilinear_moment_bruteforce(&c, &iv, f, x).unwrap();
        let expect = f.fourier_by_convolution(0.0) * x * (6.0 / 9.0) / 3.0;
        assert!((v - expect).abs() < 1e-9 * expect, "{v} {expect}");
    }

    #[test]
    fn odd_multilinear_moment_vanishes() {
        let f = majorant();
        let x = 3.0e4;
        let c = PrimeCoefficients::delta_eigenvalues(30.0).unwrap();
        for iv in [
            vec![PrimeInterval {
                lo: 1.0,
                hi: 30.0,
                k: 1,
            }],
            vec![PrimeInterval {
                lo: 1.0,
                hi: 12.0,
                k: 3,
            }],
            vec![
                PrimeInterval {
                    lo: 1.0,
                    hi: 6.0,
                    k: 2,
                },
                PrimeInterval {
                    lo: 6.0,
                    hi: 12.0,
                    k: 1,
                },
            ],
        ] {
            let v = multilinear_moment_bruteforce(&c, &iv, f, x).unwrap();
            assert!(v.abs() < 1e-3 * x, "{iv:?}: {v}");
        }
    }

    #[test]
    fn multilinear_bound_on_small_grid() {
        let f = majorant();
        let x = 3.0e4;
        let fhat0 = f.fourier_by_convolution(0.0);
        let c = PrimeCoefficients::delta_eigenvalues(20.0).unwrap();
        for iv in [
            vec![PrimeInterval {
                lo: 1.0,
                hi: 20.0,
                k: 2,
            }],
            vec![PrimeInterval {
                lo: 1.0,
                hi: 8.0,
                k: 4,
            }],
            vec![
                PrimeInterval {
                    lo: 1.0,
                    hi: 5.0,
                    k: 2,
                },
                PrimeInterval {
                    lo: 5.0,
                    hi: 13.0,
                    k: 2,
                },
            ],
        ] {
            let v = multilinear_moment_bruteforce(&c, &iv, f, x).unwrap();
            let bound = multilinear_bound(&c, &iv, fhat0, x);
            assert!(v.abs() <= 1.05 * bound, "{iv:?}: {v} > {bound}");
        }
    }

    #[test]
    fn overlapping_intervals_rejected() {
        let f = majorant();
        let c = PrimeCoefficients::constant_one(10.0);
        let iv = [
            PrimeInterval {
                lo: 1.0,
                hi: 5.0,
                k: 1,
            },
            PrimeInterval {
                lo: 4.0,
                hi: 9.0,
                k: 1,
            },
        ];
        assert!(multilinear_moment_bruteforce(&c, &iv, f, 100.0).is_err());
    }

    #[test]
    fn shifted_pair_moment_same_parity_first_case() {
        // k = j = 0: the count of m with b | am − ℓ, weighted by F(am/X).
        let f = majorant();
        let x = 2.0e4;
        let c = PrimeCoefficients::constant_one(10.0);
        let v = shifted_pair_moment_bruteforce(&c, 0, 0, 10.0, f, x, 2, 3, 1).unwrap();
        let expect = f.fourier_by_convolution(0.0) * x / 6.0;
        assert!((v - expect).abs() < 1e-9 * expect);
    }

    #[test]
    fn shifted_pair_odd_moment_with_a_shared_prime() {
        // P(m)²P(m−1) with P(t) = a(3)(t/3)/√3: the mean over m mod 3 is a(3)³/(3·3^{3/2}).
        let f = majorant();
        let x = 3.0e4;
        let c = PrimeCoefficients::constant_one(3.0);
        let v = shifted_pair_moment_bruteforce(&c, 2, 1, 3.0, f, x, 1, 1, 1).unwrap();
        let expect = f.fourier_by_convolution(0.0) * x / (3.0 * 3f64.powf(1.5));
        assert!((v - expect).abs() < 1e-9 * expect, "{v} {expect}");
    }

    #[test]
    fn shifted_moment_empty_prime_range() {
        let c = PrimeCoefficients::constant_one(3.0);
        let v = shifted_moment_bruteforce(&c, 1, 3.0, 1000.0, 3, 1, 4).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn shifted_moment_swapped_enumeration_is_identical() {
        let c = PrimeCoefficients::constant_one(10.0);
        let a = shifted_pair_census(10.0, 1.0e4, 1, 1, 4, &c).unwrap();
        let b = shifted_pair_census_swapped(10.0, 1.0e4, 1, 1, 4, &c).unwrap();
        assert_eq!(a, b);
        assert!(a.pairs() > 1000);
        assert_eq!(a.moment(&c, 1).to_bits(), b.moment(&c, 1).to_bits());
        for (aa, bb, ell) in [(2, 3, 1), (3, 1, -5), (1, 2, 0)] {
            let p = shifted_pair_census(10.0, 5.0e3, aa, bb, ell, &c).unwrap();
            let q = shifted_pair_census_swapped(10.0, 5.0e3, aa, bb, ell, &c).unwrap();
            assert_eq!(p, q, "{aa} {bb} {ell}");
        }
    }

    #[test]
    fn shifted_moment_ratio_is_moderate() {
        let c = PrimeCoefficients::delta_eigenvalues(30.0).unwrap();
        let big_x = 2.0e4;
        for k in 1..=2 {
            let v = shifted_moment_bruteforce(&c, k, 30.0, big_x, 1, 1, 4).unwrap();
            let probe = bound_probe(v, k, MomentStats::new(&c, 30.0, 4), big_x, 1, 1).unwrap();
            assert!(probe.ratio > 0.0 && probe.ratio <= 10.0, "{k}: {probe:?}");
        }
    }

    #[test]
    fn shifted_moment_is_deterministic() {
        let c = PrimeCoefficients::delta_eigenvalues(20.0).unwrap();
        let a = shifted_moment_bruteforce(&c, 2, 20.0, 3.0e4, 2, 1, 3).unwrap();
        let b = shifted_moment_bruteforce(&c, 2, 20.0, 3.0e4, 2, 1, 3).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    proptest! {
        #[test]
        fn gaussian_moment_recurrence(l in 1u64..40) {
            // C̃(2ℓ) = (2ℓ − 1)·C̃(2ℓ − 2).
            let lhs = gaussian_moment(2 * l);
            let rhs = gaussian_moment(2 * l - 2) * BigRational::from_integer(BigInt::from(2 * l - 1));
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn stats_invariants(x in 2.0f64..200.0, ell in -1000i64..1000) {
            let c = PrimeCoefficients::delta_eigenvalues(x).unwrap();
            let st = MomentStats::new(&c, x, ell);
            prop_assert!(st.b >= 0.0);
            prop_assert!(st.a >= 1.0);
        }
    }
}
