//! Kohnen's plus space of weight `k + 1/2` on Γ₀(4), built from θ and
//! `F = Σ_{n odd} σ(n) qⁿ`, with the Hecke operators `T_{p²}` and the
//! matching of eigenforms to level-one forms of weight `2k`.

use crate::arith::{divisors, is_prime, kronecker, mobius};
use crate::error::{invalid, Error, Result};
use crate::numfield::{char_poly, poly_eval, rat, real_roots, Elem, NumberField, RealRoot};
use crate::qseries::{
    dim_cusp_forms, eigenforms, qexp_from_text, qexp_to_text, HeckeEigenform, QExpansion,
};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use std::collections::BTreeMap;
use std::fmt::Write as _;

/// A form of weight `k + 1/2` on Γ₀(4), optionally with its coordinates
/// `α_j` in the monomials `θ^{2k+1−4j} F^j`.
#[derive(Clone, Debug, PartialEq)]
pub struct HalfIntegralForm {
    pub qexp: QExpansion,
    pub plus: bool,
    pub alpha: Option<Vec<BigRational>>,
}

impl HalfIntegralForm {
    /// `k` with weight `k + 1/2`.
    pub fn k(&self) -> i64 {
        (self.qexp.twice_weight - 1) / 2
    }

    pub fn order(&self) -> usize {
        self.qexp.order()
    }

    pub fn coeff(&self, n: usize) -> BigRational {
        self.qexp.coeff(n)
    }

    /// Coefficients vanish off the plus classes.
    pub fn satisfies_plus(&self) -> bool {
        let sign = if self.k() % 2 == 0 { 1 } else { -1 };
        self.qexp
            .coeffs
            .iter()
            .enumerate()
            .all(|(n, c)| c.is_zero() || !matches!((sign * n as i64).rem_euclid(4), 2 | 3))
    }
}

fn excluded(k: i64, n: usize) -> bool {
    let sign = if k % 2 == 0 { 1 } else { -1 };
    matches!((sign * n as i64).rem_euclid(4), 2 | 3)
}

/// `θ = Σ_{m∈ℤ} q^{m²}`.
pub fn theta(order: usize) -> Result<HalfIntegralForm> {
    if order < 1 {
        return invalid("order must be at least 1");
    }
    let mut c = vec![BigRational::zero(); order + 1];
    c[0] = BigRational::one();
    let mut m = 1usize;
    while m * m <= order {
        c[m * m] = rat(2);
        m += 1;
    }
    Ok(HalfIntegralForm {
        qexp: QExpansion {
            twice_weight: 1,
            level: 4,
            coeffs: c,
        },
        plus: true,
        alpha: None,
    })
}

/// `F = Σ_{n odd} σ(n) qⁿ`, weight 2 on Γ₀(4).
pub fn f_generator(order: usize) -> QExpansion {
    let coeffs = (0..=order)
        .map(|n| {
            if n % 2 == 1 {
                rat(crate::arith::divisor_sum(n as i64))
            } else {
                BigRational::zero()
            }
        })
        .collect();
    QExpansion {
        twice_weight: 4,
        level: 4,
        coeffs,
    }
}

/// The monomials `θ^{2k+1−4j} F^j`, `0 ≤ j ≤ (2k+1)/4`.
pub fn monomials(k: u32, order: usize) -> Result<Vec<QExpansion>> {
    let th = theta(order)?.qexp;
    let f = f_generator(order);
    let top = (2 * k + 1) / 4;
    let mut out = Vec::with_capacity(top as usize + 1);
    let mut fj = QExpansion::one(4, order);
    for j in 0..=top {
        out.push(th.pow(2 * k + 1 - 4 * j)?.mul(&fj)?);
        fj = fj.mul(&f)?;
    }
    Ok(out)
}

/// The monomials as seen from the cusp 0: `θ^{2k+1−4j} (ϑ₄⁴/16)^j`, with
/// `ϑ₄(q) = θ(−q)`. Writing `g(−1/4z) = (−2iz)^{k+1/2} h₀(z)`, the series
/// `h₀` is `Σ α_j` times these.
pub fn zero_cusp_monomials(k: u32, order: usize) -> Result<Vec<QExpansion>> {
    let th = theta(order)?.qexp;
    let mut t4 = th.clone();
    for (n, c) in t4.coeffs.iter_mut().enumerate() {
        if n % 2 == 1 {
            *c = -c.clone();
        }
    }
    let f0 = t4
        .pow(4)?
        .scale(&BigRational::new(BigInt::one(), BigInt::from(16)));
    let top = (2 * k + 1) / 4;
    let mut out = Vec::with_capacity(top as usize + 1);
    let mut fj = QExpansion::one(4, order);
    for j in 0..=top {
        out.push(th.pow(2 * k + 1 - 4 * j)?.mul(&fj)?);
        fj = fj.mul(&f0)?;
    }
    Ok(out)
}

/// Exact coefficients of `h₀ = Σ α_j θ^{2k+1−4j} (ϑ₄⁴/16)^j`.
pub fn zero_cusp_series(
    k: u32,
    field: &NumberField,
    alpha: &[Elem],
    order: usize,
) -> Result<Vec<Elem>> {
    let monos = zero_cusp_monomials(k, order)?;
    let mut out = vec![field.zero(); order + 1];
    for (m, a) in monos.iter().zip(alpha) {
        if field.is_zero(a) {
            continue;
        }
        for (n, c) in m.coeffs.iter().enumerate() {
            if !c.is_zero() {
                out[n] = field.add(&out[n], &field.scale(a, c));
            }
        }
    }
    Ok(out)
}

fn rational_field() -> NumberField {
    NumberField::rational(BigRational::zero())
}

fn combine(monos: &[QExpansion], alpha: &[BigRational]) -> Result<QExpansion> {
    let mut acc = QExpansion::zero(monos[0].twice_weight, 4, monos[0].order());
    for (m, a) in monos.iter().zip(alpha) {
        if !a.is_zero() {
            acc = acc.add(&m.scale(a))?;
        }
    }
    Ok(acc)
}

/// Reduced echelon basis of `S⁺_{k+1/2}(Γ₀(4))`, pivoting on the lowest q-order.
pub fn plus_cusp_space(k: u32, order: usize) -> Result<Vec<HalfIntegralForm>> {
    if k < 2 {
        return invalid("k must be at least 2");
    }
    let expected = dim_cusp_forms(2 * k);
    if order < 8 * expected.max(1) {
        return Err(Error::OrderExhausted {
            needed: 8 * expected.max(1),
            available: order,
        });
    }
    let monos = monomials(k, order)?;
    let cols = monos.len();
    let q = rational_field();
    let rows: Vec<Vec<Elem>> = (0..=order)
        .filter(|&n| n == 0 || excluded(k as i64, n))
        .map(|n| {
            monos
                .iter()
                .map(|m| q.from_rational(m.coeffs[n].clone()))
                .collect()
        })
        .collect();
    let null = q.null_space(&rows, cols)?;
    let mut vecs: Vec<Vec<BigRational>> = null
        .iter()
        .map(|v| {
            v.iter()
                .map(|e| q.as_rational(e).expect("rational"))
                .collect()
        })
        .collect();
    let mut forms: Vec<QExpansion> = vecs
        .iter()
        .map(|a| combine(&monos, a))
        .collect::<Result<_>>()?;
    if forms.len() != expected {
        return Err(Error::Dimension {
            expected,
            found: forms.len(),
        });
    }
    echelonize(&mut forms, &mut vecs)?;
    Ok(forms
        .into_iter()
        .zip(vecs)
        .map(|(f, a)| HalfIntegralForm {
            qexp: f,
            plus: true,
            alpha: Some(a),
        })
        .collect())
}

/// Gauss–Jordan on q-coefficients; ties in the pivot order go to the smaller index.
fn echelonize(forms: &mut [QExpansion], alpha: &mut [Vec<BigRational>]) -> Result<()> {
    let d = forms.len();
    for i in 0..d {
        let (best, piv) = (i..d)
            .filter_map(|r| forms[r].valuation().map(|v| (r, v)))
            .min_by_key(|&(r, v)| (v, r))
            .ok_or_else(|| Error::Consistency("linearly dependent plus-space basis".into()))?;
        forms.swap(i, best);
        alpha.swap(i, best);
        let inv = BigRational::one() / forms[i].coeffs[piv].clone();
        forms[i] = forms[i].scale(&inv);
        alpha[i] = alpha[i].iter().map(|a| a * &inv).collect();
        for r in 0..d {
            if r == i {
                continue;
            }
            let c = forms[r].coeffs[piv].clone();
            if !c.is_zero() {
                forms[r] = forms[r].sub(&forms[i].scale(&c))?;
                let ai = alpha[i].clone();
                for (x, y) in alpha[r].iter_mut().zip(&ai) {
                    *x -= &c * y;
                }
            }
        }
    }
    Ok(())
}

/// Pivot positions of a reduced echelon basis.
pub fn pivots(basis: &[HalfIntegralForm]) -> Vec<usize> {
    basis
        .iter()
        .map(|g| g.qexp.valuation().unwrap_or(0))
        .collect()
}

fn tp2_coeff(k: i64, p: u64, n: usize, c: impl Fn(usize) -> BigRational) -> BigRational {
    let pu = p as usize;
    let sign = if k % 2 == 0 { 1 } else { -1 };
    let chi = kronecker(sign * n as i64, p as i64);
    let mut v = c(pu * pu * n);
    if chi != 0 {
        v += BigRational::from_integer(BigInt::from(chi) * BigInt::from(p).pow((k - 1) as u32))
            * c(n);
    }
    if n % (pu * pu) == 0 {
        v += BigRational::from_integer(BigInt::from(p).pow((2 * k - 1) as u32)) * c(n / (pu * pu));
    }
    v
}

/// `T_{p²}`: `c(p²n) + ((−1)^k n / p) p^{k−1} c(n) + p^{2k−1} c(n/p²)`, order `⌊N/p²⌋`.
pub fn hecke_tp2(g: &HalfIntegralForm, p: u64) -> Result<HalfIntegralForm> {
    if p == 2 || !is_prime(p as i64) {
        return invalid(format!("T_(p^2) needs an odd prime, got {p}"));
    }
    let out_order = g.order() / (p * p) as usize;
    if out_order < 1 {
        return Err(Error::OrderExhausted {
            needed: (p * p) as usize,
            available: g.order(),
        });
    }
    let k = g.k();
    let coeffs = (0..=out_order)
        .map(|n| tp2_coeff(k, p, n, |m| g.coeff(m)))
        .collect();
    let out = HalfIntegralForm {
        qexp: QExpansion {
            coeffs,
            ..g.qexp.clone()
        },
        plus: g.plus,
        alpha: None,
    };
    if g.plus && !out.satisfies_plus() {
        return Err(Error::Consistency(format!("T_{}² left the plus space", p)));
    }
    Ok(out)
}

/// `T_{p²} g_i = Σ_j M[i][j] g_j` on a reduced echelon basis.
pub fn hecke_matrix_tp2(basis: &[HalfIntegralForm], p: u64) -> Result<Vec<Vec<BigRational>>> {
    let piv = pivots(basis);
    basis
        .iter()
        .map(|g| {
            let t = hecke_tp2(g, p)?;
            let need = piv.iter().max().copied().unwrap_or(0);
            if t.order() < need {
                return Err(Error::OrderExhausted {
                    needed: need * (p * p) as usize,
                    available: g.order(),
                });
            }
            Ok(piv.iter().map(|&n| t.coeff(n)).collect())
        })
        .collect()
}

/// A plus-space Hecke eigenform, exact over its field, with one embedding.
#[derive(Clone, Debug)]
pub struct PlusEigenform {
    pub k: u32,
    pub field: NumberField,
    pub embedding: RealRoot,
    /// `c(n)`, normalized so the first nonzero coefficient is 1.
    pub coeffs: Vec<Elem>,
    /// Coordinates in the monomials `θ^{2k+1−4j} F^j`.
    pub alpha: Vec<Elem>,
    /// `T_{p²}` eigenvalues.
    pub lambda: BTreeMap<u64, Elem>,
}

impl PlusEigenform {
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn numeric(&self) -> Vec<f64> {
        self.coeffs
            .iter()
            .map(|c| self.field.embed(c, &self.embedding))
            .collect()
    }

    pub fn alpha_numeric(&self) -> Vec<f64> {
        self.alpha
            .iter()
            .map(|c| self.field.embed(c, &self.embedding))
            .collect()
    }

    /// `h₀` embedded, see [`zero_cusp_series`].
    pub fn zero_cusp_numeric(&self, order: usize) -> Result<Vec<f64>> {
        Ok(zero_cusp_series(self.k, &self.field, &self.alpha, order)?
            .iter()
            .map(|c| self.field.embed(c, &self.embedding))
            .collect())
    }

    pub fn lambda_numeric(&self, p: u64) -> Option<f64> {
        self.lambda
            .get(&p)
            .map(|l| self.field.embed(l, &self.embedding))
    }

    /// Exact `T_{p²}` eigenvalue, verified on every available coefficient.
    pub fn compute_lambda(&self, p: u64) -> Result<Elem> {
        let kf = &self.field;
        let out_order = self.order() / (p * p) as usize;
        if out_order < 1 {
            return Err(Error::OrderExhausted {
                needed: (p * p) as usize,
                available: self.order(),
            });
        }
        let n0 = self
            .coeffs
            .iter()
            .position(|c| !kf.is_zero(c))
            .ok_or_else(|| Error::Consistency("zero form".into()))?;
        let image = |n: usize| -> Elem {
            let pu = p as usize;
            let sign = if self.k % 2 == 0 { 1 } else { -1 };
            let chi = kronecker(sign * n as i64, p as i64);
            let mut v = self.coeffs[pu * pu * n].clone();
            if chi != 0 {
                let s =
                    BigRational::from_integer(BigInt::from(chi) * BigInt::from(p).pow(self.k - 1));
                v = kf.add(&v, &kf.scale(&self.coeffs[n], &s));
            }
            if n % (pu * pu) == 0 {
                let s = BigRational::from_integer(BigInt::from(p).pow(2 * self.k - 1));
                v = kf.add(&v, &kf.scale(&self.coeffs[n / (pu * pu)], &s));
            }
            v
        };
        if n0 > out_order {
            return Err(Error::OrderExhausted {
                needed: n0 * (p * p) as usize,
                available: self.order(),
            });
        }
        let lam = kf.mul(&image(n0), &kf.inv(&self.coeffs[n0])?);
        for n in 0..=out_order {
            if image(n) != kf.mul(&lam, &self.coeffs[n]) {
                return Err(Error::Consistency(format!(
                    "not a T_{}² eigenform at n = {n}",
                    p
                )));
            }
        }
        Ok(lam)
    }
}

pub const HECKE_PRIMES: [u64; 3] = [3, 5, 7];

/// Eigenvector `g = Σ cᵢ gᵢ` of `T_9` for the eigenvalue `mu ∈ K`.
fn eigenvector_in(
    basis: &[HalfIntegralForm],
    m9: &[Vec<BigRational>],
    field: &NumberField,
    mu: &Elem,
    embedding: RealRoot,
    k: u32,
) -> Result<PlusEigenform> {
    let d = basis.len();
    let rows: Vec<Vec<Elem>> = (0..d)
        .map(|i| {
            (0..d)
                .map(|j| {
                    let e = field.from_rational(m9[j][i].clone());
                    if i == j {
                        field.sub(&e, mu)
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
            "T_9 eigenspace has dimension {} for k = {k}",
            ns.len()
        )));
    }
    let c = &ns[0];
    let order = basis[0].order();
    let mut coeffs: Vec<Elem> = (0..=order)
        .map(|n| {
            basis.iter().zip(c).fold(field.zero(), |acc, (g, ci)| {
                field.add(&acc, &field.scale(ci, &g.coeff(n)))
            })
        })
        .collect();
    let nalpha = basis[0].alpha.as_ref().map_or(0, |a| a.len());
    let mut alpha: Vec<Elem> = (0..nalpha)
        .map(|j| {
            basis.iter().zip(c).fold(field.zero(), |acc, (g, ci)| {
                field.add(
                    &acc,
                    &field.scale(ci, &g.alpha.as_ref().expect("basis carries coordinates")[j]),
                )
            })
        })
        .collect();
    let n0 = coeffs
        .iter()
        .position(|x| !field.is_zero(x))
        .ok_or_else(|| Error::Consistency("zero eigenvector".into()))?;
    let inv = field.inv(&coeffs[n0])?;
    coeffs = coeffs.iter().map(|x| field.mul(x, &inv)).collect();
    alpha = alpha.iter().map(|x| field.mul(x, &inv)).collect();
    let mut g = PlusEigenform {
        k,
        field: field.clone(),
        embedding,
        coeffs,
        alpha,
        lambda: BTreeMap::new(),
    };
    for p in HECKE_PRIMES {
        if g.order() / (p * p) as usize >= n0.max(1) {
            let l = g.compute_lambda(p)?;
            g.lambda.insert(p, l);
        }
    }
    Ok(g)
}

/// Simultaneous `T_{p²}` eigenbasis of the plus space from `T_9` alone,
/// over the fields cut out by its characteristic polynomial.
pub fn plus_eigenforms(k: u32, order: usize) -> Result<Vec<PlusEigenform>> {
    let basis = plus_cusp_space(k, order)?;
    if basis.is_empty() {
        return Ok(Vec::new());
    }
    let m9 = hecke_matrix_tp2(&basis, 3)?;
    let cp = char_poly(&m9);
    let mut out = Vec::new();
    let roots = crate::numfield::rational_roots(&cp)?;
    let mut rest = cp.clone();
    let mut factors = Vec::new();
    for r in roots {
        let lin = vec![-r, BigRational::one()];
        rest = crate::numfield::poly_divrem(&rest, &lin).0;
        factors.push(lin);
    }
    if crate::numfield::degree(&rest).is_some_and(|d| d > 0) {
        factors.push(rest);
    }
    for factor in factors {
        let field = NumberField::new(factor)?;
        let mu = field.generator();
        for root in real_roots(field.modulus(), 128)? {
            out.push(eigenvector_in(&basis, &m9, &field, &mu, root, k)?);
        }
    }
    out.sort_by(|a, b| {
        a.lambda_numeric(3)
            .unwrap_or(0.0)
            .total_cmp(&b.lambda_numeric(3).unwrap_or(0.0))
    });
    Ok(out)
}

/// A plus-space eigenform paired with its level-one partner, both exact over
/// the partner's Hecke field.
#[derive(Clone, Debug)]
pub struct EigenPair {
    pub g: PlusEigenform,
    pub f: HeckeEigenform,
}

impl EigenPair {
    pub fn k(&self) -> u32 {
        self.g.k
    }
}

fn same_number(a: (&NumberField, &Elem, &RealRoot), b: (&NumberField, &Elem, &RealRoot)) -> bool {
    if a.0 == b.0 && a.2 == b.2 {
        return a.1 == b.1;
    }
    if let (Some(x), Some(y)) = (a.0.as_rational(a.1), b.0.as_rational(b.1)) {
        return x == y;
    }
    let va = poly_eval(&a.1 .0, &a.2.midpoint());
    let vb = poly_eval(&b.1 .0, &b.2.midpoint());
    let scale = va.abs().max(BigRational::one());
    (va - vb).abs() <= scale * BigRational::new(BigInt::one(), BigInt::one() << 80)
}

/// The unique level-one eigenform with `a_f(p) = λ_p` for every listed prime.
pub fn shimura_match(
    g: &PlusEigenform,
    primes: &[u64],
    candidates: &[HeckeEigenform],
) -> Result<HeckeEigenform> {
    let table = |f: &HeckeEigenform| -> String {
        primes
            .iter()
            .map(|&p| {
                format!(
                    "a({p})≈{:.6e}",
                    f.numeric.get(p as usize).copied().unwrap_or(f64::NAN)
                )
            })
            .collect::<Vec<_>>()
            .join(", ")
    };
    let lam_table = primes
        .iter()
        .map(|&p| format!("λ{p}≈{:.6e}", g.lambda_numeric(p).unwrap_or(f64::NAN)))
        .collect::<Vec<_>>()
        .join(", ");
    let matches: Vec<&HeckeEigenform> = candidates
        .iter()
        .filter(|f| {
            primes
                .iter()
                .all(|&p| match (g.lambda.get(&p), f.coeffs.get(p as usize)) {
                    (Some(l), Some(a)) => {
                        same_number((&g.field, l, &g.embedding), (&f.field, a, &f.embedding))
                    }
                    _ => false,
                })
        })
        .collect();
    match matches.as_slice() {
        [f] => Ok((*f).clone()),
        [] => Err(Error::NoMatch(format!(
            "{lam_table}; candidates: [{}]",
            candidates.iter().map(table).collect::<Vec<_>>().join("; ")
        ))),
        many => Err(Error::NoMatch(format!(
            "{} candidates match {lam_table}",
            many.len()
        ))),
    }
}

/// Matched pairs for every plus-space eigenform of weight `k + 1/2`.
pub fn eigen_pairs(k: u32, order: usize) -> Result<Vec<EigenPair>> {
    let gs = plus_eigenforms(k, order)?;
    if gs.is_empty() {
        return Ok(Vec::new());
    }
    let fs = eigenforms(2 * k, order)?;
    let basis = plus_cusp_space(k, order)?;
    let m9 = hecke_matrix_tp2(&basis, 3)?;
    let mut out = Vec::new();
    for g in gs {
        let f = shimura_match(&g, &HECKE_PRIMES, &fs)?;
        // Re-express g over the partner's field so both sides compare exactly.
        let mu = f.coeffs[3].clone();
        let g2 = eigenvector_in(&basis, &m9, &f.field, &mu, f.embedding.clone(), k)?;
        for (p, l) in &g2.lambda {
            if *l != f.coeffs[*p as usize] {
                return Err(Error::Consistency(format!(
                    "λ_{p} differs from a_f({p}) after re-expression"
                )));
            }
        }
        out.push(EigenPair { g: g2, f });
    }
    Ok(out)
}

/// `(c(|d|δ²), c(|d|) Σ_{e|δ} μ(e) e^{k−1} χ_d(e) a(δ/e))`, exact in the pair's field.
pub fn kz_coefficient_relation(pair: &EigenPair, d: i64, delta: u64) -> Result<(Elem, Elem)> {
    let k = pair.k() as i64;
    if !crate::arith::is_fundamental_discriminant(d) || (if k % 2 == 0 { d } else { -d }) <= 0 {
        return invalid(format!(
            "{d} is not a fundamental discriminant with (−1)^k d > 0"
        ));
    }
    if delta == 0 {
        return invalid("δ must be positive");
    }
    let n = d.unsigned_abs() as usize * (delta * delta) as usize;
    if n > pair.g.order() || delta as usize > pair.f.order() {
        return Err(Error::OrderExhausted {
            needed: n,
            available: pair.g.order(),
        });
    }
    let kf = &pair.g.field;
    let mut sum = kf.zero();
    for e in divisors(delta as i64) {
        let mu = mobius(e);
        let chi = kronecker(d, e);
        if mu == 0 || chi == 0 {
            continue;
        }
        let s =
            BigRational::from_integer(BigInt::from(mu * chi) * BigInt::from(e).pow((k - 1) as u32));
        sum = kf.add(
            &sum,
            &kf.scale(&pair.f.coeffs[(delta as i64 / e) as usize], &s),
        );
    }
    let rhs = kf.mul(&pair.g.coeffs[d.unsigned_abs() as usize], &sum);
    Ok((pair.g.coeffs[n].clone(), rhs))
}

/// Text serialization of a plus-space basis with the eigenvalue table.
pub fn plus_space_to_text(k: u32, basis: &[HalfIntegralForm], eigen: &[PlusEigenform]) -> String {
    let order = basis.first().map_or(0, |g| g.order());
    let mut s = format!("KOHNEN v1 {k} {order} {}\n", basis.len());
    for (i, g) in eigen.iter().enumerate() {
        let m: Vec<String> = g.field.modulus().iter().map(|c| c.to_string()).collect();
        let _ = writeln!(s, "FIELD {i} {} {}", m.join(" "), g.embedding.midpoint());
        for (p, l) in &g.lambda {
            let coords: Vec<String> = l.0.iter().map(|c| c.to_string()).collect();
            let _ = writeln!(
                s,
                "LAMBDA {i} {p} {}",
                if coords.is_empty() {
                    "0".into()
                } else {
                    coords.join(" ")
                }
            );
        }
    }
    for g in basis {
        s.push_str(&qexp_to_text(&g.qexp));
        let a: Vec<String> = g
            .alpha
            .as_ref()
            .map(|v| v.iter().map(|c| c.to_string()).collect())
            .unwrap_or_default();
        let _ = writeln!(s, "ALPHA {}", a.join(" "));
    }
    s
}

/// Parse the basis part of [`plus_space_to_text`].
pub fn plus_space_from_text(text: &str) -> Result<(u32, Vec<HalfIntegralForm>)> {
    let bad = |m: &str| Error::Cache(m.to_string());
    let mut lines = text.split_inclusive('\n');
    let header = lines.next().ok_or_else(|| bad("empty file"))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() != 5 || h[0] != "KOHNEN" || h[1] != "v1" {
        return Err(bad("bad KOHNEN header"));
    }
    let k: u32 = h[2].parse().map_err(|_| bad("bad k"))?;
    let dim: usize = h[4].parse().map_err(|_| bad("bad dimension"))?;
    let mut rest = &text[header.len()..];
    while rest.starts_with("FIELD") || rest.starts_with("LAMBDA") {
        rest = rest.split_once('\n').map_or("", |(_, r)| r);
    }
    let mut basis = Vec::with_capacity(dim);
    for _ in 0..dim {
        let (q, r) = qexp_from_text(rest)?;
        let (alpha_line, r2) = r
            .split_once('\n')
            .ok_or_else(|| bad("missing ALPHA line"))?;
        let alpha = alpha_line
            .strip_prefix("ALPHA")
            .ok_or_else(|| bad("missing ALPHA line"))?
            .split_whitespace()
            .map(|t| t.parse::<BigRational>().map_err(|_| bad("bad coordinate")))
            .collect::<Result<Vec<_>>>()?;
        rest = r2;
        basis.push(HalfIntegralForm {
            qexp: q,
            plus: true,
            alpha: Some(alpha),
        });
    }
    Ok((k, basis))
}

/// `|c(n)|` bound check helper: largest `|c(n)|/n^{k/2−1/4}` over `n ≤ N`.
pub fn normalized_growth(g: &PlusEigenform) -> f64 {
    let e = g.k as f64 / 2.0 - 0.25;
    g.numeric()
        .iter()
        .enumerate()
        .skip(1)
        .map(|(n, c)| c.abs() / (n as f64).powf(e))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qseries::delta_expansion;
    use std::sync::OnceLock;

    fn r(n: i64) -> BigRational {
        rat(n)
    }

    fn k6() -> &'static Vec<EigenPair> {
        static P: OnceLock<Vec<EigenPair>> = OnceLock::new();
        P.get_or_init(|| eigen_pairs(6, 400).unwrap())
    }

    #[test]
    fn theta_coefficients() {
        let t = theta(50).unwrap();
        assert_eq!(t.coeff(0), r(1));
        assert_eq!(t.coeff(1), r(2));
        assert_eq!(t.coeff(4), r(2));
        assert_eq!(t.coeff(2), r(0));
        assert_eq!(t.coeff(3), r(0));
        assert!(t.satisfies_plus());
        assert!(theta(0).is_err());
    }

    #[test]
    fn monomial_weights() {
        for k in 2..=8 {
            for m in monomials(k, 20).unwrap() {
                assert_eq!(m.twice_weight, 2 * k as i64 + 1);
                assert_eq!(m.level, 4);
            }
        }
    }

    #[test]
    fn dimensions_match_level_one() {
        for k in 2..=14u32 {
            let b = plus_cusp_space(k, 120).unwrap();
            assert_eq!(b.len(), dim_cusp_forms(2 * k), "k = {k}");
            for g in &b {
                assert!(g.satisfies_plus());
                assert_eq!(g.coeff(0), r(0));
            }
        }
    }

    #[test]
    fn coordinates_reproduce_expansion() {
        let b = plus_cusp_space(12, 100).unwrap();
        let monos = monomials(12, 100).unwrap();
        for g in &b {
            assert_eq!(combine(&monos, g.alpha.as_ref().unwrap()).unwrap(), g.qexp);
        }
    }

    #[test]
    fn plus_projection_is_idempotent() {
        // Re-running the solver on the span of its own output returns the same basis.
        let b = plus_cusp_space(10, 100).unwrap();
        let mut forms: Vec<_> = b.iter().map(|g| g.qexp.clone()).collect();
        let mut alpha: Vec<_> = b.iter().map(|g| g.alpha.clone().unwrap()).collect();
        echelonize(&mut forms, &mut alpha).unwrap();
        for (g, f) in b.iter().zip(&forms) {
            assert_eq!(&g.qexp, f);
        }
    }

    #[test]
    fn weight_13_2_eigenvalues() {
        let tau = delta_expansion(10).unwrap();
        let b = plus_cusp_space(6, 400).unwrap();
        assert_eq!(b.len(), 1);
        let g = &b[0];
        for p in [3u64, 5, 7] {
            let t = hecke_tp2(g, p).unwrap();
            let want = g.qexp.truncate(t.order()).scale(&tau.coeff(p as usize));
            assert_eq!(t.qexp, want, "p = {p}");
        }
        assert_eq!(tau.coeff(3), r(252));
        assert_eq!(tau.coeff(5), r(4830));
    }

    #[test]
    fn tp2_is_linear_and_preserves_plus() {
        let b = plus_cusp_space(12, 200).unwrap();
        let sum = HalfIntegralForm {
            qexp: b[0].qexp.add(&b[1].qexp).unwrap(),
            plus: true,
            alpha: None,
        };
        let lhs = hecke_tp2(&sum, 3).unwrap().qexp;
        let rhs = hecke_tp2(&b[0], 3)
            .unwrap()
            .qexp
            .add(&hecke_tp2(&b[1], 3).unwrap().qexp)
            .unwrap();
        assert_eq!(lhs, rhs);
        for g in &b {
            for p in [3, 5, 7] {
                assert!(hecke_tp2(g, p).unwrap().satisfies_plus());
            }
        }
        assert!(hecke_tp2(&b[0], 2).is_err());
        assert!(hecke_tp2(&b[0].clone(), 17).is_err());
    }

    #[test]
    fn match_k6_and_k8() {
        let p = k6();
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].f.field.as_rational(&p[0].f.coeffs[2]), Some(r(-24)));
        let p8 = eigen_pairs(8, 200).unwrap();
        assert_eq!(p8.len(), 1);
        assert_eq!(p8[0].f.field.as_rational(&p8[0].f.coeffs[2]), Some(r(216)));
    }

    #[test]
    fn mismatch_is_reported() {
        let mut g = plus_eigenforms(6, 200).unwrap().remove(0);
        let l3 = g.lambda[&3].clone();
        g.lambda.insert(3, g.field.add(&l3, &g.field.one()));
        let fs = eigenforms(12, 200).unwrap();
        assert!(matches!(
            shimura_match(&g, &HECKE_PRIMES, &fs),
            Err(Error::NoMatch(_))
        ));
    }

    #[test]
    fn kz_examples() {
        let p = &k6()[0];
        let (l, rr) = kz_coefficient_relation(p, 1, 1).unwrap();
        assert_eq!(l, rr);
        let (l, rr) = kz_coefficient_relation(p, 1, 2).unwrap();
        let kf = &p.g.field;
        assert_eq!(l, rr);
        assert_eq!(l, kf.scale(&p.g.coeffs[1], &r(-56)));
        let (l, rr) = kz_coefficient_relation(p, 5, 3).unwrap();
        assert_eq!(l, rr);
        assert!(kz_coefficient_relation(p, -3, 1).is_err());
        assert!(kz_coefficient_relation(p, 9, 1).is_err());
    }

    #[test]
    fn kz_quadratic_field() {
        for pair in eigen_pairs(12, 220).unwrap() {
            assert!(!pair.f.is_rational());
            for d in 1..=200i64 {
                if !crate::arith::is_fundamental_discriminant(d) {
                    continue;
                }
                let mut delta = 1u64;
                while d as u64 * delta * delta <= 200 {
                    let (l, rr) = kz_coefficient_relation(&pair, d, delta).unwrap();
                    assert_eq!(l, rr, "d = {d}, δ = {delta}");
                    delta += 1;
                }
            }
        }
    }

    #[test]
    fn text_round_trip() {
        let b = plus_cusp_space(12, 60).unwrap();
        let e = plus_eigenforms(12, 60).unwrap();
        let s = plus_space_to_text(12, &b, &e);
        let (k, back) = plus_space_from_text(&s).unwrap();
        assert_eq!(k, 12);
        assert_eq!(back, b);
        assert!(s.contains("LAMBDA 0 3"));
    }

    #[test]
    fn coefficient_growth_is_tame() {
        let g = &k6()[0].g;
        assert!(normalized_growth(g).is_finite());
        assert!(g.numeric()[1].abs() > 0.0);
        assert!((g.lambda_numeric(3).unwrap() - 252.0).abs() < 1e-9);
    }
}
