//! Exact q-expansions and level-one Hecke eigenforms.
//!
//! Coefficients are big rationals throughout. Eigenforms whose Hecke field
//! is larger than ℚ carry their coefficients as elements of that field
//! together with a real embedding.

use crate::arith::{is_prime, primes_up_to};
use crate::error::{invalid, Error, Result};
use crate::moments::PrimeCoefficients;
use crate::numfield::{
    char_poly, poly_divrem, rat, rational_roots, real_roots, Elem, NumberField, Poly, RealRoot,
};
use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::collections::BTreeMap;
use std::fmt::Write as _;

pub const DEFAULT_ORDER: usize = 512;

/// A truncated q-expansion `Σ_{n≤N} c(n) qⁿ` of weight `twice_weight/2` on Γ₀(level).
#[derive(Clone, Debug, PartialEq)]
pub struct QExpansion {
    pub twice_weight: i64,
    pub level: u64,
    pub coeffs: Vec<BigRational>,
}

fn common_denominator(v: &[BigRational]) -> BigInt {
    v.iter().fold(BigInt::one(), |acc, c| acc.lcm(c.denom()))
}

fn to_integers(v: &[BigRational], den: &BigInt) -> Vec<BigInt> {
    v.iter()
        .map(|c| (c * BigRational::from_integer(den.clone())).to_integer())
        .collect()
}

/// Truncated product of integer series.
pub fn convolve(a: &[BigInt], b: &[BigInt], len: usize) -> Vec<BigInt> {
    let mut out = vec![BigInt::zero(); len];
    for (i, x) in a.iter().enumerate().take(len) {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate().take(len - i) {
            if !y.is_zero() {
                out[i + j] += x * y;
            }
        }
    }
    out
}

impl QExpansion {
    pub fn new(twice_weight: i64, level: u64, coeffs: Vec<BigRational>) -> Result<Self> {
        if coeffs.is_empty() || level == 0 {
            return invalid("a q-expansion needs at least one coefficient and a positive level");
        }
        Ok(Self {
            twice_weight,
            level,
            coeffs,
        })
    }

    pub fn from_integers(twice_weight: i64, level: u64, coeffs: &[BigInt]) -> Self {
        Self {
            twice_weight,
            level,
            coeffs: coeffs
                .iter()
                .map(|c| BigRational::from_integer(c.clone()))
                .collect(),
        }
    }

    pub fn zero(twice_weight: i64, level: u64, order: usize) -> Self {
        Self {
            twice_weight,
            level,
            coeffs: vec![BigRational::zero(); order + 1],
        }
    }

    pub fn one(level: u64, order: usize) -> Self {
        let mut s = Self::zero(0, level, order);
        s.coeffs[0] = BigRational::one();
        s
    }

    /// Truncation order `N`.
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeff(&self, n: usize) -> BigRational {
        self.coeffs
            .get(n)
            .cloned()
            .unwrap_or_else(BigRational::zero)
    }

    pub fn truncate(&self, order: usize) -> Self {
        let mut s = self.clone();
        s.coeffs.truncate(order + 1);
        s
    }

    fn check_level(&self, other: &Self) -> Result<()> {
        if self.level != other.level {
            return invalid(format!("level mismatch: {} vs {}", self.level, other.level));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_level(other)?;
        if self.twice_weight != other.twice_weight {
            return invalid("cannot add forms of different weight");
        }
        let n = self.order().min(other.order());
        Ok(Self {
            twice_weight: self.twice_weight,
            level: self.level,
            coeffs: (0..=n)
                .map(|i| &self.coeffs[i] + &other.coeffs[i])
                .collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(&-BigRational::one()))
    }

    pub fn scale(&self, c: &BigRational) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|x| x * c).collect(),
            ..self.clone()
        }
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_level(other)?;
        let len = self.order().min(other.order()) + 1;
        let (da, db) = (
            common_denominator(&self.coeffs),
            common_denominator(&other.coeffs),
        );
        let prod = convolve(
            &to_integers(&self.coeffs, &da),
            &to_integers(&other.coeffs, &db),
            len,
        );
        let den = da * db;
        Ok(Self {
            twice_weight: self.twice_weight + other.twice_weight,
            level: self.level,
            coeffs: prod
                .into_iter()
                .map(|c| BigRational::new(c, den.clone()))
                .collect(),
        })
    }

    pub fn pow(&self, e: u32) -> Result<Self> {
        let mut out = Self::one(self.level, self.order());
        let mut base = self.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                out = out.mul(&base)?;
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base)?;
            }
        }
        Ok(out)
    }

    /// Index of the first nonzero coefficient.
    pub fn valuation(&self) -> Option<usize> {
        self.coeffs.iter().position(|c| !c.is_zero())
    }

    pub fn is_zero(&self) -> bool {
        self.valuation().is_none()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.coeffs
            .iter()
            .map(|c| c.to_f64().unwrap_or(f64::NAN))
            .collect()
    }
}

/// `Π_{n≥1}(1 − qⁿ)` to order `len − 1`, from the pentagonal number theorem.
fn euler_product(len: usize) -> Vec<i8> {
    let mut out = vec![0i8; len];
    let mut k: i64 = 0;
    loop {
        let mut any = false;
        for kk in if k == 0 { vec![0] } else { vec![k, -k] } {
            let g = (kk * (3 * kk - 1) / 2) as usize;
            if g < len {
                out[g] = if kk.rem_euclid(2) == 0 { 1 } else { -1 };
                any = true;
            }
        }
        if !any {
            break;
        }
        k += 1;
    }
    out
}

/// `Δ = q Π(1 − qⁿ)²⁴` to order `N`, exact.
pub fn delta_expansion(order: usize) -> Result<QExpansion> {
    if order < 1 {
        return invalid("order must be at least 1");
    }
    let e: Vec<BigInt> = euler_product(order).into_iter().map(BigInt::from).collect();
    let p = QExpansion::from_integers(0, 1, &e).pow(24)?;
    let mut coeffs = vec![BigRational::zero()];
    coeffs.extend(p.coeffs.into_iter().take(order));
    Ok(QExpansion {
        twice_weight: 24,
        level: 1,
        coeffs,
    })
}

/// `τ(n)` for `0 ≤ n ≤ N` in machine integers (`τ(0) = 0`).
pub fn ramanujan_tau_table(order: usize) -> Vec<i128> {
    let len = order.max(1);
    let e: Vec<i128> = euler_product(len).into_iter().map(i128::from).collect();
    let mul = |a: &[i128], b: &[i128]| -> Vec<i128> {
        let mut out = vec![0i128; len];
        for (i, &x) in a.iter().enumerate() {
            if x != 0 {
                for (j, &y) in b.iter().enumerate().take(len - i) {
                    out[i + j] += x * y;
                }
            }
        }
        out
    };
    let e2 = mul(&e, &e);
    let e4 = mul(&e2, &e2);
    let e8 = mul(&e4, &e4);
    let e16 = mul(&e8, &e8);
    let p = mul(&e16, &e8);
    let mut out = vec![0i128];
    out.extend(p.into_iter().take(order));
    out
}

/// Bernoulli numbers `B_0 … B_n` (with `B_1 = −1/2`).
pub fn bernoulli(n: usize) -> Vec<BigRational> {
    // Σ_{j≤m} C(m+1, j) B_j = 0.
    let mut b = vec![BigRational::one()];
    let mut row: Vec<BigInt> = vec![BigInt::one(), BigInt::one()];
    for m in 1..=n {
        let mut next = vec![BigInt::one(); row.len() + 1];
        for j in 1..row.len() {
            next[j] = &row[j - 1] + &row[j];
        }
        row = next;
        let s: BigRational = (0..m)
            .map(|j| BigRational::from_integer(row[j].clone()) * &b[j])
            .sum();
        b.push(-s / BigRational::from_integer(row[m].clone()));
    }
    b
}

/// `E_{2k} = 1 − (4k/B_{2k}) Σ σ_{2k−1}(n) qⁿ`.
pub fn eisenstein(two_k: u32, order: usize) -> Result<QExpansion> {
    if two_k < 4 || two_k % 2 == 1 {
        return invalid("Eisenstein weight must be even and at least 4");
    }
    let b = bernoulli(two_k as usize)[two_k as usize].clone();
    let c = -rat(2 * two_k as i64) / b;
    let mut coeffs = vec![BigRational::one()];
    for n in 1..=order {
        let s: BigInt = crate::arith::divisors(n as i64)
            .into_iter()
            .map(|d| BigInt::from(d).pow(two_k - 1))
            .sum();
        coeffs.push(&c * BigRational::from_integer(s));
    }
    Ok(QExpansion {
        twice_weight: 2 * two_k as i64,
        level: 1,
        coeffs,
    })
}

/// `T_p`: `a(n) ↦ a(pn) + p^{2k−1} a(n/p)`, output order `⌊N/p⌋`.
pub fn hecke_tp(f: &QExpansion, p: u64) -> Result<QExpansion> {
    if !is_prime(p as i64) {
        return invalid(format!("{p} is not prime"));
    }
    if f.level != 1 || f.twice_weight % 4 != 0 {
        return invalid("T_p is implemented for even integral weight at level 1");
    }
    let out_order = f.order() / p as usize;
    if out_order < 1 {
        return Err(Error::OrderExhausted {
            needed: p as usize,
            available: f.order(),
        });
    }
    let two_k = (f.twice_weight / 2) as u32;
    let pk = BigRational::from_integer(BigInt::from(p).pow(two_k - 1));
    let pu = p as usize;
    let coeffs = (0..=out_order)
        .map(|n| {
            let mut c = f.coeffs[pu * n].clone();
            if n % pu == 0 {
                c += &pk * &f.coeffs[n / pu];
            }
            c
        })
        .collect();
    Ok(QExpansion {
        coeffs,
        ..f.clone()
    })
}

/// Dimension of `S_{2k}(SL₂(ℤ))`.
pub fn dim_cusp_forms(two_k: u32) -> usize {
    if two_k % 2 == 1 || two_k < 12 {
        return 0;
    }
    let base = (two_k / 12) as usize;
    if two_k % 12 == 2 {
        base - 1
    } else {
        base
    }
}

/// Reduced echelon basis of `S_{2k}`: the `i`th form has `a(j) = δ_{ij}` for `1 ≤ j ≤ dim`.
pub fn cusp_basis(two_k: u32, order: usize) -> Result<Vec<QExpansion>> {
    if two_k < 12 || two_k % 2 == 1 {
        return invalid("cusp forms need even weight at least 12");
    }
    let d = dim_cusp_forms(two_k);
    if d == 0 {
        return Ok(Vec::new());
    }
    if order < d {
        return Err(Error::OrderExhausted {
            needed: d,
            available: order,
        });
    }
    let delta = delta_expansion(order)?;
    let e4 = eisenstein(4, order)?;
    let e6 = eisenstein(6, order)?;
    // Δ^j E₄^a E₆^b with 4a + 6b = 2k − 12j; leading term q^j.
    let mut forms = Vec::with_capacity(d);
    for j in 1..=d {
        let rest = two_k as i64 - 12 * j as i64;
        let b = if rest % 4 == 0 { 0 } else { 1 };
        let a = (rest - 6 * b) / 4;
        if a < 0 {
            return Err(Error::Consistency(format!("no monomial of weight {rest}")));
        }
        let f = delta
            .pow(j as u32)?
            .mul(&e4.pow(a as u32)?)?
            .mul(&e6.pow(b as u32)?)?;
        forms.push(f);
    }
    // Back-substitute to clear a(j) above and below the diagonal.
    for i in 0..d {
        let lead = forms[i].coeffs[i + 1].clone();
        forms[i] = forms[i].scale(&(BigRational::one() / lead));
        for r in 0..d {
            if r != i {
                let c = forms[r].coeffs[i + 1].clone();
                if !c.is_zero() {
                    forms[r] = forms[r].sub(&forms[i].scale(&c))?;
                }
            }
        }
    }
    Ok(forms)
}

/// Matrix of `T_p` on the reduced echelon basis: `T_p f_i = Σ_j M[i][j] f_j`.
pub fn hecke_matrix(basis: &[QExpansion], p: u64) -> Result<Vec<Vec<BigRational>>> {
    let d = basis.len();
    basis
        .iter()
        .map(|f| {
            let t = hecke_tp(f, p)?;
            if t.order() < d {
                return Err(Error::OrderExhausted {
                    needed: d * p as usize,
                    available: f.order(),
                });
            }
            Ok((1..=d).map(|j| t.coeffs[j].clone()).collect())
        })
        .collect()
}

/// A normalized level-one Hecke eigenform, exact in its Hecke field, with
/// one chosen real embedding.
#[derive(Clone, Debug)]
pub struct HeckeEigenform {
    pub two_k: u32,
    pub field: NumberField,
    pub embedding: RealRoot,
    /// `a(n)` for `0 ≤ n ≤ N`, exact.
    pub coeffs: Vec<Elem>,
    /// `a(n)` under the embedding.
    pub numeric: Vec<f64>,
}

impl HeckeEigenform {
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eigenvalue(&self, p: u64) -> Option<&Elem> {
        self.coeffs.get(p as usize)
    }

    /// `a(p)` for primes `p ≤ N`, exact.
    pub fn eigenvalues(&self) -> BTreeMap<u64, Elem> {
        primes_up_to(self.order())
            .into_iter()
            .map(|p| (p as u64, self.coeffs[p].clone()))
            .collect()
    }

    pub fn is_rational(&self) -> bool {
        self.field.degree() == 1
    }

    /// The q-expansion, when every coefficient is rational.
    pub fn as_qexpansion(&self) -> Option<QExpansion> {
        let coeffs: Option<Vec<_>> = self
            .coeffs
            .iter()
            .map(|c| self.field.as_rational(c))
            .collect();
        Some(QExpansion {
            twice_weight: 2 * self.two_k as i64,
            level: 1,
            coeffs: coeffs?,
        })
    }

    /// `T_p f = a(p) f` on every coefficient `n ≤ N/p`.
    pub fn check_eigen(&self, p: u64) -> bool {
        let k = &self.field;
        let pk = BigRational::from_integer(BigInt::from(p).pow(self.two_k - 1));
        let ap = &self.coeffs[p as usize];
        let pu = p as usize;
        (0..=self.order() / pu).all(|n| {
            let mut lhs = self.coeffs[pu * n].clone();
            if n % pu == 0 {
                lhs = k.add(&lhs, &k.scale(&self.coeffs[n / pu], &pk));
            }
            lhs == k.mul(ap, &self.coeffs[n])
        })
    }
}

/// Squarefree factors of a Hecke characteristic polynomial: linear factors
/// for rational roots and the remaining cofactor.
fn split_char_poly(cp: &Poly) -> Result<Vec<Poly>> {
    let roots = rational_roots(cp)?;
    let mut rest = cp.clone();
    let mut out = Vec::new();
    for r in roots {
        let lin = vec![-r, BigRational::one()];
        let (q, rem) = poly_divrem(&rest, &lin);
        debug_assert!(rem.is_empty());
        rest = q;
        out.push(lin);
    }
    if crate::numfield::degree(&rest).is_some_and(|d| d > 0) {
        out.push(rest);
    }
    Ok(out)
}

/// Simultaneous Hecke eigenbasis of `S_{2k}`, ordered by the embedded `a(2)`.
/// Diagonalizes `T_2`; `T_3, T_5, T_7` are verified on the result.
pub fn eigenforms(two_k: u32, order: usize) -> Result<Vec<HeckeEigenform>> {
    let basis = cusp_basis(two_k, order)?;
    let d = basis.len();
    if d == 0 {
        return Ok(Vec::new());
    }
    if order < 3 * d || order < 2 * d.max(4) {
        return Err(Error::OrderExhausted {
            needed: (3 * d).max(8),
            available: order,
        });
    }
    let m = hecke_matrix(&basis, 2)?;
    let cp = char_poly(&m);
    let mut out = Vec::new();
    for factor in split_char_poly(&cp)? {
        let field = NumberField::new(factor)?;
        let lambda = field.generator();
        // (Mᵀ − λ) c = 0.
        let rows: Vec<Vec<Elem>> = (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| {
                        let e = field.from_rational(m[j][i].clone());
                        if i == j {
                            field.sub(&e, &lambda)
                        } else {
                            e
                        }
                    })
                    .collect()
            })
            .collect();
        let ns = field.null_space(&rows, d)?;
        if ns.len() != 1 {
            return Err(Error::Consistency(format!(
                "T_2 eigenspace of dimension {} in weight {two_k}",
                ns.len()
            )));
        }
        let c0 = field.inv(&ns[0][0])?;
        let c: Vec<Elem> = ns[0].iter().map(|x| field.mul(x, &c0)).collect();
        let coeffs: Vec<Elem> = (0..=order)
            .map(|n| {
                basis.iter().zip(&c).fold(field.zero(), |acc, (f, ci)| {
                    field.add(&acc, &field.scale(ci, &f.coeffs[n]))
                })
            })
            .collect();
        for root in real_roots(field.modulus(), 128)? {
            let numeric = coeffs.iter().map(|a| field.embed(a, &root)).collect();
            out.push(HeckeEigenform {
                two_k,
                field: field.clone(),
                embedding: root,
                coeffs: coeffs.clone(),
                numeric,
            });
        }
    }
    if out.len() != d {
        return Err(Error::Consistency(format!(
            "found {} eigenforms, expected {d}",
            out.len()
        )));
    }
    for f in &out {
        for p in [2u64, 3, 5, 7] {
            if (p as usize) <= order && !f.check_eigen(p) {
                return Err(Error::Consistency(format!(
                    "weight {two_k}: T_{p} eigen relation fails"
                )));
            }
        }
    }
    out.sort_by(|a, b| a.numeric[2].total_cmp(&b.numeric[2]));
    Ok(out)
}

/// `λ(p) = a(p)/p^{(2k−1)/2}` for primes `p ≤ N`, checking `|λ(p)| ≤ 2`.
pub fn deligne_normalize(f: &HeckeEigenform) -> Result<PrimeCoefficients> {
    let mut out = PrimeCoefficients::new(0.01)?;
    let e = (f.two_k as f64 - 1.0) / 2.0;
    for p in primes_up_to(f.order()) {
        let lam = f.numeric[p] / (p as f64).powf(e);
        if lam.abs() > 2.0 + 1e-9 {
            return Err(Error::Consistency(format!(
                "Deligne bound violated at p = {p}: λ = {lam}"
            )));
        }
        out.insert(
            p as u64,
            lam.clamp(-(p as f64).powf(0.49), (p as f64).powf(0.49)),
        )?;
    }
    Ok(out)
}

/// Numeric Deligne-normalized coefficients `λ(n) = a(n)/n^{(2k−1)/2}` for `n ≤ N`.
pub fn normalized_coefficients(f: &HeckeEigenform) -> Vec<f64> {
    let e = (f.two_k as f64 - 1.0) / 2.0;
    f.numeric
        .iter()
        .enumerate()
        .map(|(n, &a)| if n == 0 { 0.0 } else { a / (n as f64).powf(e) })
        .collect()
}

/// Serialize in the `QEXP v1` text format.
pub fn qexp_to_text(f: &QExpansion) -> String {
    let mut s = format!("QEXP v1 {} {} {}\n", f.twice_weight, f.level, f.order());
    for (n, c) in f.coeffs.iter().enumerate() {
        let _ = writeln!(s, "{n} {} {}", c.numer(), c.denom());
    }
    s
}

/// Parse one `QEXP v1` block; returns the form and the unread remainder.
pub fn qexp_from_text(text: &str) -> Result<(QExpansion, &str)> {
    let bad = |m: &str| Error::Cache(m.to_string());
    let (header, mut rest) = text.split_once('\n').ok_or_else(|| bad("missing header"))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() != 5 || h[0] != "QEXP" || h[1] != "v1" {
        return Err(bad("bad QEXP header"));
    }
    let tw: i64 = h[2].parse().map_err(|_| bad("bad weight"))?;
    let level: u64 = h[3].parse().map_err(|_| bad("bad level"))?;
    let n: usize = h[4].parse().map_err(|_| bad("bad order"))?;
    let mut coeffs = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let (line, r) = rest
            .split_once('\n')
            .ok_or_else(|| bad("truncated coefficients"))?;
        rest = r;
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 3 || parts[0].parse::<usize>().ok() != Some(i) {
            return Err(bad("bad coefficient line"));
        }
        let num: BigInt = parts[1].parse().map_err(|_| bad("bad numerator"))?;
        let den: BigInt = parts[2].parse().map_err(|_| bad("bad denominator"))?;
        if !den.is_positive() {
            return Err(bad("nonpositive denominator"));
        }
        coeffs.push(BigRational::new(num, den));
    }
    Ok((
        QExpansion {
            twice_weight: tw,
            level,
            coeffs,
        },
        rest,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn r(n: i64) -> BigRational {
        rat(n)
    }

    #[test]
    fn delta_coefficients() {
        let d = delta_expansion(30).unwrap();
        assert_eq!(d.coeff(0), r(0));
        assert_eq!(d.coeff(1), r(1));
        assert_eq!(d.coeff(2), r(-24));
        assert_eq!(d.coeff(3), r(252));
        assert_eq!(d.coeff(5), r(4830));
        assert_eq!(d.coeff(7), r(-16744));
        assert_eq!(d.coeff(6), d.coeff(2) * d.coeff(3));
        assert_eq!(d.coeff(11), r(534612));
        assert!(delta_expansion(0).is_err());
    }

    #[test]
    fn tau_table_matches_exact_expansion() {
        let d = delta_expansion(300).unwrap();
        let t = ramanujan_tau_table(300);
        for n in 0..=300 {
            assert_eq!(
                BigRational::from_integer(BigInt::from(t[n])),
                d.coeff(n),
                "{n}"
            );
        }
    }

    #[test]
    fn e4_cubed_minus_e6_squared() {
        let n = 80;
        let e4 = eisenstein(4, n).unwrap();
        let e6 = eisenstein(6, n).unwrap();
        assert_eq!(e4.coeff(1), r(240));
        assert_eq!(e6.coeff(1), r(-504));
        let lhs = e4.pow(3).unwrap().sub(&e6.pow(2).unwrap()).unwrap();
        assert_eq!(lhs, delta_expansion(n).unwrap().scale(&r(1728)));
    }

    #[test]
    fn bernoulli_values() {
        let b = bernoulli(12);
        assert_eq!(b[1], BigRational::new((-1).into(), 2.into()));
        assert_eq!(b[2], BigRational::new(1.into(), 6.into()));
        assert_eq!(b[12], BigRational::new((-691).into(), 2730.into()));
        assert_eq!(b[7], r(0));
    }

    #[test]
    fn hecke_on_delta() {
        let d = delta_expansion(60).unwrap();
        let t2 = hecke_tp(&d, 2).unwrap();
        assert_eq!(t2.truncate(20), d.truncate(20).scale(&r(-24)));
        let z = QExpansion::zero(24, 1, 40);
        assert!(hecke_tp(&z, 3).unwrap().is_zero());
        let t5 = hecke_tp(&d, 5).unwrap();
        assert_eq!(t5.coeff(1), d.coeff(5));
        assert!(hecke_tp(&d, 4).is_err());
        assert!(hecke_tp(&d.truncate(2), 3).is_err());
    }

    #[test]
    fn cusp_dimensions() {
        assert_eq!(cusp_basis(12, 20).unwrap().len(), 1);
        assert_eq!(cusp_basis(14, 20).unwrap().len(), 0);
        assert_eq!(cusp_basis(24, 20).unwrap().len(), 2);
        for two_k in (12..=60).step_by(2) {
            let b = cusp_basis(two_k, 30).unwrap();
            assert_eq!(b.len(), dim_cusp_forms(two_k));
            for (i, f) in b.iter().enumerate() {
                for j in 1..=b.len() {
                    assert_eq!(f.coeff(j), if i + 1 == j { r(1) } else { r(0) });
                }
                assert_eq!(f.coeff(0), r(0));
            }
        }
    }

    #[test]
    fn hecke_matrices_commute() {
        let b = cusp_basis(36, 120).unwrap();
        let mul = |a: &Vec<Vec<BigRational>>, c: &Vec<Vec<BigRational>>| -> Vec<Vec<BigRational>> {
            let n = a.len();
            (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| (0..n).map(|l| &a[i][l] * &c[l][j]).sum())
                        .collect()
                })
                .collect()
        };
        let ms: Vec<_> = [2u64, 3, 5]
            .iter()
            .map(|&p| hecke_matrix(&b, p).unwrap())
            .collect();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(mul(&ms[i], &ms[j]), mul(&ms[j], &ms[i]));
            }
        }
    }

    #[test]
    fn eigenforms_rational_cases() {
        let e = eigenforms(12, 40).unwrap();
        assert_eq!(e.len(), 1);
        assert_eq!(e[0].field.as_rational(&e[0].coeffs[2]), Some(r(-24)));
        assert_eq!(e[0].field.as_rational(&e[0].coeffs[3]), Some(r(252)));
        let e = eigenforms(16, 40).unwrap();
        assert_eq!(e.len(), 1);
        assert_eq!(e[0].field.as_rational(&e[0].coeffs[2]), Some(r(216)));
        let q = e[0].as_qexpansion().unwrap();
        let e4d = eisenstein(4, 40)
            .unwrap()
            .mul(&delta_expansion(40).unwrap())
            .unwrap();
        assert_eq!(q, e4d);
    }

    #[test]
    fn eigenforms_quadratic_field() {
        // a(2) = 540 ± 12√144169 in weight 24.
        let e = eigenforms(24, 40).unwrap();
        assert_eq!(e.len(), 2);
        let s = 144169f64.sqrt();
        assert!((e[0].numeric[2] - (540.0 - 12.0 * s)).abs() < 1e-9);
        assert!((e[1].numeric[2] - (540.0 + 12.0 * s)).abs() < 1e-9);
        for f in &e {
            assert!(!f.is_rational());
            let k = &f.field;
            let a2 = &f.coeffs[2];
            let a4 = &f.coeffs[4];
            let p = BigRational::from_integer(BigInt::from(2).pow(23));
            assert_eq!(*a4, k.sub(&k.mul(a2, a2), &k.from_rational(p)));
        }
    }

    #[test]
    fn hecke_relation_at_p_squared() {
        for two_k in [12u32, 16, 18, 20, 22, 26, 28] {
            for f in eigenforms(two_k, 60).unwrap() {
                let k = &f.field;
                for p in [2usize, 3, 5, 7] {
                    let pk = BigRational::from_integer(BigInt::from(p).pow(two_k - 1));
                    let rhs = k.sub(&k.mul(&f.coeffs[p], &f.coeffs[p]), &k.from_rational(pk));
                    assert_eq!(f.coeffs[p * p], rhs, "{two_k} {p}");
                }
            }
        }
    }

    #[test]
    fn deligne_normalization() {
        let f = &eigenforms(12, 1000).unwrap()[0];
        let lam = deligne_normalize(f).unwrap();
        assert!((lam.get(2).unwrap() + 24.0 / 2f64.powf(5.5)).abs() < 1e-15);
        assert!((lam.get(2).unwrap() + 0.5303).abs() < 1e-4);
        let norm = normalized_coefficients(f);
        for p in primes_up_to(31) {
            assert!((norm[p] * norm[p] - norm[p * p] - 1.0).abs() < 1e-12, "{p}");
        }
        for (p, l) in lam.iter() {
            assert!(l.abs() <= 2.0, "{p}");
        }
    }

    #[test]
    fn text_round_trip() {
        let f = cusp_basis(24, 20).unwrap()[1].clone();
        let t = qexp_to_text(&f);
        let (g, rest) = qexp_from_text(&t).unwrap();
        assert_eq!(f, g);
        assert!(rest.is_empty());
        assert!(qexp_from_text("QEXP v2 1 1 0\n0 1 1\n").is_err());
    }

    fn small_series() -> impl Strategy<Value = QExpansion> {
        proptest::collection::vec((-20i64..20, 1i64..6), 12).prop_map(|v| {
            QExpansion::new(
                0,
                1,
                v.into_iter()
                    .map(|(a, b)| BigRational::new(a.into(), b.into()))
                    .collect(),
            )
            .unwrap()
        })
    }

    proptest! {
        #[test]
        fn ring_axioms(a in small_series(), b in small_series(), c in small_series()) {
            let ab_c = a.mul(&b).unwrap().mul(&c).unwrap();
            let a_bc = a.mul(&b.mul(&c).unwrap()).unwrap();
            prop_assert_eq!(ab_c, a_bc);
            let lhs = a.mul(&b.add(&c).unwrap()).unwrap();
            let rhs = a.mul(&b).unwrap().add(&a.mul(&c).unwrap()).unwrap();
            prop_assert_eq!(lhs, rhs);
            prop_assert_eq!(a.mul(&b).unwrap(), b.mul(&a).unwrap());
        }
    }
}
