//! Exact arithmetic in `ℚ[x]/(m)` for a squarefree monic `m`, real-root
//! isolation, and dense linear algebra over such fields.

use crate::error::{Error, Result};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::fmt;

/// Polynomial over ℚ, coefficients from the constant term up.
pub type Poly = Vec<BigRational>;

pub fn rat(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

pub fn trim(p: &mut Poly) {
    while p.last().is_some_and(|c| c.is_zero()) {
        p.pop();
    }
}

pub fn degree(p: &Poly) -> Option<usize> {
    p.iter().rposition(|c| !c.is_zero())
}

pub fn poly_add(a: &Poly, b: &Poly) -> Poly {
    let n = a.len().max(b.len());
    let mut out: Poly = (0..n)
        .map(|i| {
            a.get(i).cloned().unwrap_or_else(BigRational::zero)
                + b.get(i).cloned().unwrap_or_else(BigRational::zero)
        })
        .collect();
    trim(&mut out);
    out
}

pub fn poly_neg(a: &Poly) -> Poly {
    a.iter().map(|c| -c).collect()
}

pub fn poly_sub(a: &Poly, b: &Poly) -> Poly {
    poly_add(a, &poly_neg(b))
}

pub fn poly_mul(a: &Poly, b: &Poly) -> Poly {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![BigRational::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    trim(&mut out);
    out
}

/// Quotient and remainder; panics on a zero divisor.
pub fn poly_divrem(a: &Poly, b: &Poly) -> (Poly, Poly) {
    let db = degree(b).expect("division by the zero polynomial");
    let lead = b[db].clone();
    let mut r = a.clone();
    trim(&mut r);
    let mut q = vec![BigRational::zero(); r.len().saturating_sub(db).max(1)];
    while let Some(dr) = degree(&r) {
        if dr < db {
            break;
        }
        let c = &r[dr] / &lead;
        for (i, bc) in b.iter().enumerate().take(db + 1) {
            let t = &c * bc;
            r[dr - db + i] -= t;
        }
        q[dr - db] = c;
        trim(&mut r);
    }
    trim(&mut q);
    (q, r)
}

pub fn poly_eval(p: &Poly, x: &BigRational) -> BigRational {
    p.iter()
        .rev()
        .fold(BigRational::zero(), |acc, c| acc * x + c)
}

pub fn poly_eval_f64(p: &Poly, x: f64) -> f64 {
    p.iter()
        .rev()
        .fold(0.0, |acc, c| acc * x + c.to_f64().unwrap_or(f64::NAN))
}

pub fn derivative(p: &Poly) -> Poly {
    let mut out: Poly = p
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, c)| c * rat(i as i64))
        .collect();
    trim(&mut out);
    out
}

fn make_monic(mut p: Poly) -> Poly {
    trim(&mut p);
    if let Some(d) = degree(&p) {
        let lead = p[d].clone();
        for c in p.iter_mut() {
            *c = &*c / &lead;
        }
    }
    p
}

pub fn poly_gcd(a: &Poly, b: &Poly) -> Poly {
    let (mut x, mut y) = (a.clone(), b.clone());
    trim(&mut x);
    trim(&mut y);
    while degree(&y).is_some() {
        let (_, r) = poly_divrem(&x, &y);
        x = y;
        y = r;
    }
    make_monic(x)
}

/// Rational roots of a squarefree polynomial whose roots are all real,
/// ascending. A rational root `u/v` in lowest terms has `v` dividing the
/// leading coefficient of the primitive integer multiple, so each isolating
/// interval is checked against those denominators.
pub fn rational_roots(p: &Poly) -> Result<Vec<BigRational>> {
    let mut q = p.clone();
    trim(&mut q);
    let d = degree(&q).ok_or_else(|| Error::InvalidArgument("zero polynomial".into()))?;
    let den_lcm = q.iter().fold(BigInt::one(), |acc, c| {
        num_integer::Integer::lcm(&acc, c.denom())
    });
    let lead = (&q[d] * BigRational::from_integer(den_lcm))
        .to_integer()
        .abs();
    let lead_small = lead.to_u64().filter(|&l| l <= 1_000_000).ok_or_else(|| {
        Error::InvalidArgument("leading coefficient too large for rational root search".into())
    })?;
    let mut out = Vec::new();
    for root in real_roots(&q, 64)? {
        for v in (1..=lead_small).filter(|v| lead_small % v == 0) {
            let vb = BigRational::from_integer(BigInt::from(v));
            let c = (root.midpoint() * &vb).round() / &vb;
            if poly_eval(&q, &c).is_zero() && !out.contains(&c) {
                out.push(c);
            }
        }
    }
    out.sort();
    Ok(out)
}

/// `1 + max |cᵢ/c_d|`: every complex root has modulus below this.
pub fn cauchy_bound(p: &Poly) -> BigRational {
    let d = degree(p).expect("nonzero polynomial");
    let lead = p[d].abs();
    let m = p
        .iter()
        .take(d)
        .map(|c| c.abs() / &lead)
        .max()
        .unwrap_or_else(BigRational::zero);
    m + BigRational::one()
}

/// Isolating interval `[lo, hi]` for a simple real root.
#[derive(Clone, Debug, PartialEq)]
pub struct RealRoot {
    pub lo: BigRational,
    pub hi: BigRational,
}

impl RealRoot {
    pub fn midpoint(&self) -> BigRational {
        (&self.lo + &self.hi) / rat(2)
    }

    pub fn to_f64(&self) -> f64 {
        self.midpoint().to_f64().unwrap_or(f64::NAN)
    }

    pub fn width(&self) -> BigRational {
        &self.hi - &self.lo
    }
}

fn sturm_chain(p: &Poly) -> Vec<Poly> {
    let mut chain = vec![p.clone(), derivative(p)];
    loop {
        let n = chain.len();
        if degree(&chain[n - 1]).is_none_or(|d| d == 0) {
            break;
        }
        let (_, r) = poly_divrem(&chain[n - 2], &chain[n - 1]);
        if degree(&r).is_none() {
            break;
        }
        chain.push(poly_neg(&r));
    }
    chain
}

fn sign_changes(chain: &[Poly], x: &BigRational) -> usize {
    let signs: Vec<i8> = chain
        .iter()
        .map(|q| {
            let v = poly_eval(q, x);
            if v.is_positive() {
                1
            } else if v.is_negative() {
                -1
            } else {
                0
            }
        })
        .filter(|&s| s != 0)
        .collect();
    signs.windows(2).filter(|w| w[0] != w[1]).count()
}

/// All real roots of a squarefree polynomial, ascending, each refined to
/// width at most `2^{-bits}`.
pub fn real_roots(p: &Poly, bits: u32) -> Result<Vec<RealRoot>> {
    let d = degree(p).ok_or_else(|| Error::InvalidArgument("zero polynomial".into()))?;
    if d == 0 {
        return Ok(Vec::new());
    }
    if degree(&poly_gcd(p, &derivative(p))) != Some(0) {
        return Err(Error::Consistency("polynomial has a repeated root".into()));
    }
    let chain = sturm_chain(p);
    let b = cauchy_bound(p);
    let mut stack = vec![(-b.clone(), b)];
    let mut isolated = Vec::new();
    while let Some((lo, hi)) = stack.pop() {
        let n = sign_changes(&chain, &lo) - sign_changes(&chain, &hi);
        if n == 0 {
            continue;
        }
        if n == 1 {
            isolated.push(RealRoot { lo, hi });
            continue;
        }
        let mid = (&lo + &hi) / rat(2);
        if poly_eval(p, &mid).is_zero() {
            // Nudge the split point off the root.
            let eps = (&hi - &lo) / rat(1024);
            stack.push((&mid + &eps, hi));
            stack.push((lo, mid + eps));
        } else {
            stack.push((mid.clone(), hi));
            stack.push((lo, mid));
        }
    }
    let target = BigRational::new(BigInt::one(), BigInt::one() << bits);
    let mut out: Vec<RealRoot> = isolated
        .into_iter()
        .map(|mut r| {
            let mut flo = poly_eval(p, &r.lo);
            while r.width() > target {
                let mid = r.midpoint();
                let fm = poly_eval(p, &mid);
                if fm.is_zero() {
                    return RealRoot {
                        lo: mid.clone(),
                        hi: mid,
                    };
                }
                if fm.is_positive() == flo.is_positive() && !flo.is_zero() {
                    r.lo = mid;
                    flo = fm;
                } else {
                    r.hi = mid;
                }
            }
            r
        })
        .collect();
    out.sort_by(|a, b| a.lo.cmp(&b.lo));
    Ok(out)
}

/// `ℚ[x]/(m)` with `m` monic and squarefree; irreducibility is assumed and a
/// zero divisor met during inversion is reported as an error.
#[derive(Clone, Debug, PartialEq)]
pub struct NumberField {
    modulus: Poly,
}

/// An element of a [`NumberField`], as a reduced polynomial in the generator.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Elem(pub Poly);

impl NumberField {
    pub fn new(modulus: Poly) -> Result<Self> {
        let m = make_monic(modulus);
        match degree(&m) {
            None | Some(0) => Err(Error::InvalidArgument(
                "modulus must have positive degree".into(),
            )),
            Some(_) => Ok(Self { modulus: m }),
        }
    }

    /// ℚ itself, presented as `ℚ[x]/(x − r)` so that the generator is `r`.
    pub fn rational(r: BigRational) -> Self {
        Self {
            modulus: vec![-r, BigRational::one()],
        }
    }

    pub fn modulus(&self) -> &Poly {
        &self.modulus
    }

    pub fn degree(&self) -> usize {
        degree(&self.modulus).unwrap_or(0)
    }

    fn reduce(&self, p: Poly) -> Elem {
        let (_, mut r) = poly_divrem(&p, &self.modulus);
        trim(&mut r);
        Elem(r)
    }

    pub fn zero(&self) -> Elem {
        Elem(Vec::new())
    }

    pub fn one(&self) -> Elem {
        self.from_rational(BigRational::one())
    }

    pub fn generator(&self) -> Elem {
        self.reduce(vec![BigRational::zero(), BigRational::one()])
    }

    pub fn from_rational(&self, r: BigRational) -> Elem {
        let mut v = vec![r];
        trim(&mut v);
        Elem(v)
    }

    pub fn add(&self, a: &Elem, b: &Elem) -> Elem {
        Elem(poly_add(&a.0, &b.0))
    }

    pub fn sub(&self, a: &Elem, b: &Elem) -> Elem {
        Elem(poly_sub(&a.0, &b.0))
    }

    pub fn mul(&self, a: &Elem, b: &Elem) -> Elem {
        self.reduce(poly_mul(&a.0, &b.0))
    }

    pub fn scale(&self, a: &Elem, r: &BigRational) -> Elem {
        let mut v: Poly = a.0.iter().map(|c| c * r).collect();
        trim(&mut v);
        Elem(v)
    }

    pub fn is_zero(&self, a: &Elem) -> bool {
        a.0.iter().all(|c| c.is_zero())
    }

    pub fn inv(&self, a: &Elem) -> Result<Elem> {
        // Extended Euclid: s·a + t·m = g.
        let (mut r0, mut r1) = (self.modulus.clone(), a.0.clone());
        let (mut s0, mut s1): (Poly, Poly) = (Vec::new(), vec![BigRational::one()]);
        trim(&mut r1);
        if degree(&r1).is_none() {
            return Err(Error::Consistency(
                "division by zero in number field".into(),
            ));
        }
        while degree(&r1).is_some() {
            let (q, r) = poly_divrem(&r0, &r1);
            let s = poly_sub(&s0, &poly_mul(&q, &s1));
            r0 = r1;
            r1 = r;
            s0 = s1;
            s1 = s;
        }
        if degree(&r0) != Some(0) {
            return Err(Error::Consistency(
                "zero divisor: modulus is reducible".into(),
            ));
        }
        let c = r0[0].clone();
        Ok(self.reduce(s0.iter().map(|x| x / &c).collect()))
    }

    /// Value under the embedding sending the generator to the given root.
    pub fn embed(&self, a: &Elem, root: &RealRoot) -> f64 {
        if a.0.len() <= 1 {
            return a.0.first().map_or(0.0, |c| c.to_f64().unwrap_or(f64::NAN));
        }
        poly_eval(&a.0, &root.midpoint())
            .to_f64()
            .unwrap_or(f64::NAN)
    }

    /// Exact rational value if the element lies in ℚ.
    pub fn as_rational(&self, a: &Elem) -> Option<BigRational> {
        match a.0.len() {
            0 => Some(BigRational::zero()),
            1 => Some(a.0[0].clone()),
            _ => None,
        }
    }

    /// A basis of the right null space of a dense `rows × cols` matrix.
    pub fn null_space(&self, m: &[Vec<Elem>], cols: usize) -> Result<Vec<Vec<Elem>>> {
        let mut a: Vec<Vec<Elem>> = m.to_vec();
        let mut pivots = Vec::new();
        let mut row = 0;
        for col in 0..cols {
            let Some(p) = (row..a.len()).find(|&r| !self.is_zero(&a[r][col])) else {
                continue;
            };
            a.swap(row, p);
            let inv = self.inv(&a[row][col])?;
            a[row] = a[row].iter().map(|x| self.mul(x, &inv)).collect();
            for r in 0..a.len() {
                if r != row && !self.is_zero(&a[r][col]) {
                    let f = a[r][col].clone();
                    let pr = a[row].clone();
                    for (x, y) in a[r].iter_mut().zip(&pr) {
                        *x = self.sub(x, &self.mul(&f, y));
                    }
                }
            }
            pivots.push(col);
            row += 1;
            if row == a.len() {
                break;
            }
        }
        let free: Vec<usize> = (0..cols).filter(|c| !pivots.contains(c)).collect();
        Ok(free
            .iter()
            .map(|&fc| {
                let mut v = vec![self.zero(); cols];
                v[fc] = self.one();
                for (r, &pc) in pivots.iter().enumerate() {
                    v[pc] = self.sub(&self.zero(), &a[r][fc]);
                }
                v
            })
            .collect())
    }
}

impl fmt::Display for Elem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .0
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(i, c)| match i {
                0 => format!("{c}"),
                1 => format!("({c})*x"),
                _ => format!("({c})*x^{i}"),
            })
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

/// Characteristic polynomial `det(x·I − M)` of a rational matrix (Faddeev–LeVerrier).
pub fn char_poly(m: &[Vec<BigRational>]) -> Poly {
    let n = m.len();
    let mut coeffs = vec![BigRational::zero(); n + 1];
    coeffs[n] = BigRational::one();
    let mut mk: Vec<Vec<BigRational>> = vec![vec![BigRational::zero(); n]; n];
    for k in 1..=n {
        // M_k = M·M_{k−1} + c_{n−k+1}·I, c_{n−k} = −tr(M·M_k)/k.
        let mut next = vec![vec![BigRational::zero(); n]; n];
        for i in 0..n {
            for j in 0..n {
                let mut s = BigRational::zero();
                for (l, row) in mk.iter().enumerate() {
                    s += &m[i][l] * &row[j];
                }
                if i == j {
                    s += &coeffs[n - k + 1];
                }
                next[i][j] = s;
            }
        }
        mk = next;
        let mut tr = BigRational::zero();
        for i in 0..n {
            for (l, row) in mk.iter().enumerate() {
                tr += &m[i][l] * &row[i];
            }
        }
        coeffs[n - k] = -tr / rat(k as i64);
    }
    coeffs
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(v: &[i64]) -> Poly {
        v.iter().map(|&x| rat(x)).collect()
    }

    #[test]
    fn sqrt2_field() {
        let k = NumberField::new(p(&[-2, 0, 1])).unwrap();
        let x = k.generator();
        assert_eq!(k.mul(&x, &x), k.from_rational(rat(2)));
        let inv = k.inv(&x).unwrap();
        assert_eq!(k.mul(&inv, &x), k.one());
        let roots = real_roots(k.modulus(), 128).unwrap();
        assert_eq!(roots.len(), 2);
        assert!((roots[1].to_f64() - 2f64.sqrt()).abs() < 1e-15);
        assert!(roots[1].width() <= BigRational::new(BigInt::one(), BigInt::one() << 128));
    }

    #[test]
    fn reducible_modulus_detected() {
        let k = NumberField::new(p(&[-1, 0, 1])).unwrap();
        let x = k.generator();
        assert!(k.inv(&k.sub(&x, &k.one())).is_err());
    }

    #[test]
    fn rational_roots_found() {
        // (x − 3)(2x + 1)(x² − 2)
        let q = poly_mul(&poly_mul(&p(&[-3, 1]), &p(&[1, 2])), &p(&[-2, 0, 1]));
        assert_eq!(
            rational_roots(&q).unwrap(),
            vec![BigRational::new((-1).into(), 2.into()), rat(3)]
        );
    }

    #[test]
    fn char_poly_of_companion() {
        let m = vec![vec![rat(0), rat(-6)], vec![rat(1), rat(5)]];
        assert_eq!(char_poly(&m), p(&[6, -5, 1]));
    }

    #[test]
    fn null_space_over_quadratic_field() {
        let k = NumberField::new(p(&[-5, 0, 1])).unwrap();
        let s = k.generator();
        // [[1, s], [s, 5]] has kernel spanned by (−s, 1).
        let m = vec![
            vec![k.one(), s.clone()],
            vec![s.clone(), k.from_rational(rat(5))],
        ];
        let ns = k.null_space(&m, 2).unwrap();
        assert_eq!(ns.len(), 1);
        assert_eq!(ns[0][1], k.one());
        assert_eq!(ns[0][0], k.sub(&k.zero(), &s));
    }
}
