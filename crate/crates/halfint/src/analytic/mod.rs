//! Floating-point evaluation on the upper half-plane: modular matrices,
//! Γ₀(4) cosets, the theta multiplier and half-integral weight forms.

pub mod domain;
pub mod eisenstein;
pub mod whittaker;

use crate::arith::{gcd, jacobi};
use crate::error::{invalid, Error, Result};
use crate::kohnen::{zero_cusp_series, HalfIntegralForm, PlusEigenform};
use crate::numfield::{Elem, NumberField};
use num_complex::Complex64;
use num_traits::ToPrimitive;
use std::collections::{HashSet, VecDeque};
use std::f64::consts::PI;

pub use domain::{
    apply_rule, domain_integral, domain_integral_complex, fundamental_volume, gamma0_4_nodes,
    petersson_l2_normalize, petersson_norm, sl2_domain_integral, QuadratureValue,
};
pub use eisenstein::{eisenstein_level1, eisenstein_level4, incomplete_eisenstein, EisensteinMode};
pub use whittaker::{matthes_ratio, mellin_whittaker, whittaker_w};

/// Below this height the q-expansion at ∞ is not used directly.
pub const Y_MIN: f64 = 0.25;
/// Smallest effective height accepted after reduction.
pub const Y_REJECT: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UHPoint {
    pub x: f64,
    pub y: f64,
}

impl UHPoint {
    pub fn new(x: f64, y: f64) -> Result<Self> {
        if !(y > 0.0) || !x.is_finite() || !y.is_finite() {
            return invalid(format!(
                "point must lie in the upper half-plane, got {x} + {y}i"
            ));
        }
        Ok(Self { x, y })
    }

    pub fn from_complex(z: Complex64) -> Result<Self> {
        Self::new(z.re, z.im)
    }

    pub fn z(&self) -> Complex64 {
        Complex64::new(self.x, self.y)
    }
}

/// An integer matrix of determinant one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Mat2 {
    pub a: i64,
    pub b: i64,
    pub c: i64,
    pub d: i64,
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2 {
        a: 1,
        b: 0,
        c: 0,
        d: 1,
    };
    pub const S: Mat2 = Mat2 {
        a: 0,
        b: -1,
        c: 1,
        d: 0,
    };

    pub fn new(a: i64, b: i64, c: i64, d: i64) -> Result<Self> {
        if a * d - b * c != 1 {
            return invalid(format!("matrix ({a},{b};{c},{d}) is not in SL2(Z)"));
        }
        Ok(Self { a, b, c, d })
    }

    pub fn t(n: i64) -> Self {
        Self {
            a: 1,
            b: n,
            c: 0,
            d: 1,
        }
    }

    pub fn mul(&self, o: &Mat2) -> Mat2 {
        Mat2 {
            a: self.a * o.a + self.b * o.c,
            b: self.a * o.b + self.b * o.d,
            c: self.c * o.a + self.d * o.c,
            d: self.c * o.b + self.d * o.d,
        }
    }

    pub fn inv(&self) -> Mat2 {
        Mat2 {
            a: self.d,
            b: -self.b,
            c: -self.c,
            d: self.a,
        }
    }

    pub fn neg(&self) -> Mat2 {
        Mat2 {
            a: -self.a,
            b: -self.b,
            c: -self.c,
            d: -self.d,
        }
    }

    pub fn in_gamma0(&self, n: i64) -> bool {
        self.c % n == 0
    }

    /// `cz + d`.
    pub fn j(&self, z: Complex64) -> Complex64 {
        z * self.c as f64 + self.d as f64
    }

    pub fn act(&self, z: Complex64) -> Complex64 {
        (z * self.a as f64 + self.b as f64) / self.j(z)
    }

    pub fn act_point(&self, p: UHPoint) -> UHPoint {
        let w = self.act(p.z());
        // The imaginary part is recomputed from y/|cz+d|² to avoid cancellation.
        UHPoint {
            x: w.re,
            y: p.y / self.j(p.z()).norm_sqr(),
        }
    }
}

/// `w = M z` with `w` in `{|Re w| ≤ 1/2, |w| ≥ 1}`.
pub fn reduce_sl2(p: UHPoint) -> (Mat2, UHPoint) {
    let mut m = Mat2::IDENTITY;
    let mut w = p;
    for _ in 0..10_000 {
        let n = w.x.round();
        if n != 0.0 {
            let t = Mat2::t(-(n as i64));
            m = t.mul(&m);
            w = UHPoint { x: w.x - n, y: w.y };
        }
        let r2 = w.x * w.x + w.y * w.y;
        if r2 < 1.0 - 1e-15 {
            m = Mat2::S.mul(&m);
            w = UHPoint {
                x: -w.x / r2,
                y: w.y / r2,
            };
        } else {
            break;
        }
    }
    (m, w)
}

/// `Γ₀(4)\SL₂(ℤ)` key: bottom row modulo 4 up to the units ±1.
fn coset_key(m: &Mat2) -> (i64, i64) {
    let p = (m.c.rem_euclid(4), m.d.rem_euclid(4));
    let q = ((-m.c).rem_euclid(4), (-m.d).rem_euclid(4));
    p.min(q)
}

/// Right coset representatives of Γ₀(4) in SL₂(ℤ).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CosetSystem {
    reps: Vec<Mat2>,
}

impl CosetSystem {
    /// Breadth-first search over words in S and T, keeping the first matrix
    /// reaching each coset.
    pub fn generate() -> Self {
        let mut seen = HashSet::new();
        let mut reps = Vec::new();
        let mut queue = VecDeque::from([Mat2::IDENTITY]);
        while let Some(m) = queue.pop_front() {
            if !seen.insert(coset_key(&m)) {
                continue;
            }
            reps.push(m);
            for g in [Mat2::S, Mat2::t(1)] {
                queue.push_back(m.mul(&g));
            }
        }
        Self { reps }
    }

    pub fn reps(&self) -> &[Mat2] {
        &self.reps
    }

    pub fn index(&self) -> usize {
        self.reps.len()
    }

    /// The `i` with `m R_i⁻¹ ∈ Γ₀(4)`.
    pub fn coset_of(&self, m: &Mat2) -> usize {
        self.reps
            .iter()
            .position(|r| m.mul(&r.inv()).in_gamma0(4))
            .expect("coset system is complete")
    }

    /// Every pair of representatives is Γ₀(4)-inequivalent and the index is 6.
    pub fn verify(&self) -> Result<()> {
        if self.reps.len() != 6 {
            return Err(Error::Dimension {
                expected: 6,
                found: self.reps.len(),
            });
        }
        for (i, r) in self.reps.iter().enumerate() {
            if r.a * r.d - r.b * r.c != 1 {
                return Err(Error::Consistency(format!(
                    "representative {i} has determinant ≠ 1"
                )));
            }
            for s in &self.reps[i + 1..] {
                if r.mul(&s.inv()).in_gamma0(4) {
                    return Err(Error::Consistency(
                        "two representatives share a coset".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out =
            String::from("# right coset representatives of Gamma0(4) in SL2(Z): a b c d\n");
        for r in &self.reps {
            out.push_str(&format!("{} {} {} {}\n", r.a, r.b, r.c, r.d));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut reps = Vec::new();
        for line in text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
        {
            let v: Vec<i64> = line
                .split_whitespace()
                .map(|t| {
                    t.parse::<i64>()
                        .map_err(|e| Error::Cache(format!("bad coset entry {t:?}: {e}")))
                })
                .collect::<Result<_>>()?;
            if v.len() != 4 {
                return Err(Error::Cache(format!(
                    "coset line needs four integers: {line:?}"
                )));
            }
            reps.push(Mat2::new(v[0], v[1], v[2], v[3]).map_err(|e| Error::Cache(e.to_string()))?);
        }
        let sys = Self { reps };
        sys.verify()?;
        Ok(sys)
    }

    /// The frozen list shipped in `data/`.
    pub fn golden() -> Result<Self> {
        Self::from_text(include_str!("../../../../data/coset_reps_gamma0_4.txt"))
    }
}

/// Shimura's `(c/d)` for odd `d`.
fn shimura_symbol(c: i64, d: i64) -> i64 {
    if c == 0 {
        return if d.abs() == 1 { 1 } else { 0 };
    }
    let s = jacobi(c, d.abs());
    if c < 0 && d < 0 {
        -s
    } else {
        s
    }
}

/// `ν_θ(γ) = ε_d⁻¹ (c/d)` stored as an exponent of `ζ₈ = e^{2πi/8}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ThetaMultiplier {
    pub gamma: Mat2,
    pub exponent: u8,
}

impl ThetaMultiplier {
    pub fn new(gamma: Mat2) -> Result<Self> {
        if !gamma.in_gamma0(4) {
            return invalid(format!("{gamma:?} is not in Γ₀(4)"));
        }
        // ε_d = 1 or i; its inverse is ζ₈⁰ or ζ₈⁶.
        let eps_inv = if gamma.d.rem_euclid(4) == 1 { 0 } else { 6 };
        let sym = if shimura_symbol(gamma.c, gamma.d) == 1 {
            0
        } else {
            4
        };
        Ok(Self {
            gamma,
            exponent: (eps_inv + sym) % 8,
        })
    }

    pub fn root_value(exponent: u8) -> Complex64 {
        Complex64::from_polar(1.0, PI * exponent as f64 / 4.0)
    }

    pub fn value(&self) -> Complex64 {
        Self::root_value(self.exponent)
    }

    /// Exponent of `ν^n`.
    pub fn pow(&self, n: u32) -> u8 {
        ((self.exponent as u64 * n as u64) % 8) as u8
    }

    /// `j(γ, z) = ν(γ) (cz+d)^{1/2}`, principal square root.
    pub fn j(&self, z: Complex64) -> Complex64 {
        self.value() * self.gamma.j(z).sqrt()
    }

    /// `ν(γ)^{2k+1} (cz+d)^{k+1/2}`.
    pub fn factor(&self, k: u32, z: Complex64) -> Complex64 {
        Self::root_value(self.pow(2 * k + 1)) * self.gamma.j(z).sqrt().powu(2 * k + 1)
    }
}

/// Floating-point data for evaluating `g = Σ α_j θ^{2k+1−4j} F^j`.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfFormEvaluator {
    pub k: u32,
    pub coeffs: Vec<f64>,
    pub alpha: Vec<f64>,
    /// Expansion at the cusp 0 (empty: fall back to the monomials, which
    /// cancel badly when the form vanishes there).
    pub zero_coeffs: Vec<f64>,
    pub scale: f64,
}

/// Terms kept in the cusp-0 expansion; enough down to height `Y_REJECT`.
pub const ZERO_CHART_ORDER: usize = 160;

impl HalfFormEvaluator {
    pub fn from_form(g: &HalfIntegralForm) -> Result<Self> {
        let alpha = g
            .alpha
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("form has no monomial coordinates".into()))?;
        let to_f = |r: &num_rational::BigRational| r.to_f64().unwrap_or(f64::NAN);
        let field = NumberField::rational(num_rational::BigRational::from_integer(0.into()));
        let exact: Vec<Elem> = alpha
            .iter()
            .map(|a| field.from_rational(a.clone()))
            .collect();
        let zero = zero_cusp_series(g.k() as u32, &field, &exact, ZERO_CHART_ORDER)?;
        Ok(Self {
            k: g.k() as u32,
            coeffs: g.qexp.coeffs.iter().map(to_f).collect(),
            alpha: alpha.iter().map(to_f).collect(),
            zero_coeffs: zero
                .iter()
                .map(|c| field.as_rational(c).map_or(f64::NAN, |r| to_f(&r)))
                .collect(),
            scale: 1.0,
        })
    }

    pub fn from_eigenform(g: &PlusEigenform) -> Self {
        Self {
            k: g.k,
            coeffs: g.numeric(),
            alpha: g.alpha_numeric(),
            zero_coeffs: g.zero_cusp_numeric(ZERO_CHART_ORDER).unwrap_or_default(),
            scale: 1.0,
        }
    }

    /// `θ` itself (weight 1/2).
    pub fn theta(order: usize) -> Self {
        let mut coeffs = vec![0.0; order + 1];
        coeffs[0] = 1.0;
        let mut m = 1;
        while m * m <= order {
            coeffs[m * m] = 2.0;
            m += 1;
        }
        Self {
            k: 0,
            coeffs,
            alpha: vec![1.0],
            zero_coeffs: Vec::new(),
            scale: 1.0,
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            scale: self.scale * factor,
            ..self.clone()
        }
    }

    pub fn weight(&self) -> f64 {
        self.k as f64 + 0.5
    }
}

/// Which expansion is used to evaluate a form near a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Chart {
    Infinity,
    Zero,
    Half,
}

fn q_of(u: Complex64) -> Complex64 {
    (Complex64::new(0.0, 2.0 * PI) * u).exp()
}

/// `Σ_{n∈ℤ} sⁿ qⁿ²` with `s = ±1`.
fn theta_series(q: Complex64, sign: f64) -> Complex64 {
    let mut total = Complex64::new(1.0, 0.0);
    let mut qn2 = Complex64::new(1.0, 0.0); // q^{n²}
    let mut step = q; // q^{2n+1}
    let q2 = q * q;
    let mut sg = 1.0;
    for _ in 0..10_000 {
        qn2 *= step;
        step *= q2;
        sg *= sign;
        total += qn2 * (2.0 * sg);
        if qn2.norm() < 1e-18 {
            break;
        }
    }
    total
}

/// `ϑ₂(2u) = 2 e(u/4) Σ_{n≥0} q^{n(n+1)}`.
fn theta2_double(u: Complex64) -> Complex64 {
    let q = q_of(u);
    let mut total = Complex64::new(1.0, 0.0);
    let mut term = Complex64::new(1.0, 0.0);
    let mut step = q * q; // q^{2(n+1)}
    let q2 = q * q;
    for _ in 0..10_000 {
        term *= step;
        step *= q2;
        total += term;
        if term.norm() < 1e-18 {
            break;
        }
    }
    q_of(u / 4.0) * 2.0 * total
}

fn direct_series(g: &HalfFormEvaluator, z: Complex64) -> Complex64 {
    let q = q_of(z);
    let mut qn = Complex64::new(1.0, 0.0);
    let mut total = Complex64::new(0.0, 0.0);
    for &c in &g.coeffs {
        if c != 0.0 {
            total += qn * c;
        }
        qn *= q;
        if qn.norm() < 1e-40 {
            break;
        }
    }
    total * g.scale
}

fn combine_monomials(g: &HalfFormEvaluator, base: Complex64, f_value: Complex64) -> Complex64 {
    let top = 2 * g.k + 1;
    let mut total = Complex64::new(0.0, 0.0);
    let mut fj = Complex64::new(1.0, 0.0);
    for (j, &a) in g.alpha.iter().enumerate() {
        let e = top - 4 * j as u32;
        total += base.powu(e) * fj * a;
        fj *= f_value;
    }
    total * g.scale
}

/// The local parameter of `z` in a chart.
pub fn chart_parameter(z: Complex64, chart: Chart) -> Complex64 {
    match chart {
        Chart::Infinity => z,
        Chart::Zero => {
            let n = z.re.round();
            -1.0 / ((z - n) * 4.0)
        }
        Chart::Half => {
            let n = z.re.floor();
            1.0 / (2.0 - (z - n) * 4.0)
        }
    }
}

/// `g(z)` through the expansion at one cusp; exact identity for every `z`,
/// accurate when the chart parameter has imaginary part bounded below.
pub fn eval_in_chart(g: &HalfFormEvaluator, z: Complex64, chart: Chart) -> Complex64 {
    let u = chart_parameter(z, chart);
    match chart {
        Chart::Infinity => direct_series(g, z),
        Chart::Zero if zero_series_usable(g, u) => {
            let (m, _) = power_series_d(&g.zero_coeffs, u);
            (Complex64::new(0.0, -2.0) * u).sqrt().powu(2 * g.k + 1) * m * g.scale
        }
        Chart::Zero => {
            let th = theta_series(q_of(u), 1.0);
            let th_half = theta_series(q_of(u), -1.0);
            let f = th_half.powu(4) / 16.0;
            (Complex64::new(0.0, -2.0) * u).sqrt().powu(2 * g.k + 1) * combine_monomials(g, th, f)
        }
        Chart::Half => {
            let t2 = theta2_double(u);
            let t4 = theta_series(q_of(u), -1.0);
            let f = -t4.powu(4) / 16.0;
            (Complex64::new(0.0, -2.0) * u).sqrt().powu(2 * g.k + 1) * combine_monomials(g, t2, f)
        }
    }
}

/// The chart with the largest effective height at `z`.
pub fn best_chart(z: Complex64) -> (Chart, f64) {
    [Chart::Infinity, Chart::Zero, Chart::Half]
        .into_iter()
        .map(|c| (c, chart_parameter(z, c).im))
        .fold((Chart::Infinity, f64::NEG_INFINITY), |acc, v| {
            if v.1 > acc.1 {
                v
            } else {
                acc
            }
        })
}

/// `(δ, z')` with `z = δ z'`, `δ ∈ Γ₀(4)` and `z'` in a translate of the
/// standard domain by a coset representative.
pub fn reduce_gamma0_4(p: UHPoint, cosets: &CosetSystem) -> (Mat2, UHPoint) {
    let (m, w) = reduce_sl2(p);
    let minv = m.inv();
    let i = cosets.coset_of(&minv);
    let r = cosets.reps()[i];
    (minv.mul(&r.inv()), r.act_point(w))
}

fn default_cosets() -> &'static CosetSystem {
    static C: std::sync::OnceLock<CosetSystem> = std::sync::OnceLock::new();
    C.get_or_init(CosetSystem::generate)
}

/// `g(z)` for a form of weight `k + 1/2` on Γ₀(4).
pub fn eval_half_integral(g: &HalfFormEvaluator, p: UHPoint) -> Result<Complex64> {
    if p.y >= Y_MIN {
        return Ok(direct_series(g, p.z()));
    }
    let (delta, zp) = reduce_gamma0_4(p, default_cosets());
    let (chart, height) = best_chart(zp.z());
    if height < Y_REJECT {
        return Err(Error::Consistency(format!(
            "reduced point has effective height {height}"
        )));
    }
    let mult = ThetaMultiplier::new(delta)?;
    Ok(mult.factor(g.k, zp.z()) * eval_in_chart(g, zp.z(), chart))
}

/// `y^{k+1/2} |g(z)|²`, Γ₀(4)-invariant; computed in the best chart so no
/// multiplier is needed.
pub fn invariant_density(g: &HalfFormEvaluator, z: Complex64) -> f64 {
    let (chart, h) = best_chart(z);
    let v = eval_in_chart(g, z, chart);
    let u_im = match chart {
        Chart::Infinity => z.im,
        _ => h,
    };
    let gv = match chart {
        Chart::Infinity => v,
        // Strip the automorphy factor: y(z)^{k+1/2}|g(z)|² = (Im u)^{k+1/2}|g̃(u)|².
        _ => {
            v / (Complex64::new(0.0, -2.0) * chart_parameter(z, chart))
                .sqrt()
                .powu(2 * g.k + 1)
        }
    };
    u_im.powf(g.weight()) * gv.norm_sqr()
}

/// `θ`-type series with its `u`-derivative, `q = e(u)`.
fn theta_series_d(q: Complex64, sign: f64) -> (Complex64, Complex64) {
    let mut total = Complex64::new(1.0, 0.0);
    let mut deriv = Complex64::new(0.0, 0.0);
    let mut qn2 = Complex64::new(1.0, 0.0);
    let mut step = q;
    let q2 = q * q;
    let mut sg = 1.0;
    for n in 1..10_000u64 {
        qn2 *= step;
        step *= q2;
        sg *= sign;
        total += qn2 * (2.0 * sg);
        deriv += qn2 * (2.0 * sg * (n * n) as f64);
        if qn2.norm() * ((n * n) as f64) < 1e-18 {
            break;
        }
    }
    (total, deriv * Complex64::new(0.0, 2.0 * PI))
}

fn theta2_double_d(u: Complex64) -> (Complex64, Complex64) {
    // 2 Σ_{n≥0} e((n+1/2)² u)
    let lead = q_of(u / 4.0) * 2.0;
    let q = q_of(u);
    let mut total = Complex64::new(1.0, 0.0);
    let mut deriv = Complex64::new(0.25, 0.0);
    let mut term = Complex64::new(1.0, 0.0);
    let mut step = q * q;
    let q2 = q * q;
    for n in 1..10_000u64 {
        term *= step;
        step *= q2;
        let e = (n as f64 + 0.5).powi(2);
        total += term;
        deriv += term * e;
        if term.norm() * e < 1e-18 {
            break;
        }
    }
    (lead * total, lead * deriv * Complex64::new(0.0, 2.0 * PI))
}

/// The stored cusp-0 series is truncated; beyond its reach the monomial
/// form (exact at every height) is used instead.
fn zero_series_usable(g: &HalfFormEvaluator, u: Complex64) -> bool {
    2.0 * PI * u.im * g.zero_coeffs.len() as f64 > 45.0
}

/// `(Σ cₙ e(nu), d/du)`.
fn power_series_d(c: &[f64], u: Complex64) -> (Complex64, Complex64) {
    let q = q_of(u);
    let mut qn = Complex64::new(1.0, 0.0);
    let mut total = Complex64::new(0.0, 0.0);
    let mut deriv = Complex64::new(0.0, 0.0);
    for (n, &a) in c.iter().enumerate() {
        if a != 0.0 {
            total += qn * a;
            deriv += qn * (a * n as f64);
        }
        qn *= q;
        if qn.norm() < 1e-40 {
            break;
        }
    }
    (total, deriv * Complex64::new(0.0, 2.0 * PI))
}

fn direct_series_d(g: &HalfFormEvaluator, z: Complex64) -> (Complex64, Complex64) {
    let q = q_of(z);
    let mut qn = Complex64::new(1.0, 0.0);
    let mut total = Complex64::new(0.0, 0.0);
    let mut deriv = Complex64::new(0.0, 0.0);
    for (n, &c) in g.coeffs.iter().enumerate() {
        if c != 0.0 {
            total += qn * c;
            deriv += qn * (c * n as f64);
        }
        qn *= q;
        if qn.norm() < 1e-40 {
            break;
        }
    }
    (
        total * g.scale,
        deriv * Complex64::new(0.0, 2.0 * PI) * g.scale,
    )
}

fn combine_monomials_d(
    g: &HalfFormEvaluator,
    (b, db): (Complex64, Complex64),
    (f, df): (Complex64, Complex64),
) -> (Complex64, Complex64) {
    let top = 2 * g.k + 1;
    let mut total = Complex64::new(0.0, 0.0);
    let mut deriv = Complex64::new(0.0, 0.0);
    let mut fj = Complex64::new(1.0, 0.0);
    let mut fj1 = Complex64::new(0.0, 0.0); // f^{j-1}
    for (j, &a) in g.alpha.iter().enumerate() {
        let e = top - 4 * j as u32;
        let be1 = b.powu(e - 1);
        total += be1 * b * fj * a;
        deriv += (be1 * db * fj * e as f64 + be1 * b * fj1 * df * j as f64) * a;
        fj1 = fj;
        fj *= f;
    }
    (total * g.scale, deriv * g.scale)
}

/// `(g(z), g'(z))` through one chart, with every series differentiated termwise.
pub fn eval_in_chart_d(
    g: &HalfFormEvaluator,
    z: Complex64,
    chart: Chart,
) -> (Complex64, Complex64) {
    let u = chart_parameter(z, chart);
    let (m, dm, du_dz) = match chart {
        Chart::Infinity => return direct_series_d(g, z),
        Chart::Zero if zero_series_usable(g, u) => {
            let (m, dm) = power_series_d(&g.zero_coeffs, u);
            (m * g.scale, dm * g.scale, 4.0 * u * u)
        }
        Chart::Zero => {
            let th = theta_series_d(q_of(u), 1.0);
            let (t4, dt4) = theta_series_d(q_of(u), -1.0);
            let f = (t4.powu(4) / 16.0, t4.powu(3) * dt4 / 4.0);
            let (m, dm) = combine_monomials_d(g, th, f);
            (m, dm, 4.0 * u * u)
        }
        Chart::Half => {
            let t2 = theta2_double_d(u);
            let (t4, dt4) = theta_series_d(q_of(u), -1.0);
            let f = (-t4.powu(4) / 16.0, -t4.powu(3) * dt4 / 4.0);
            let (m, dm) = combine_monomials_d(g, t2, f);
            (m, dm, 4.0 * u * u)
        }
    };
    let auto = (Complex64::new(0.0, -2.0) * u).sqrt().powu(2 * g.k + 1);
    let value = auto * m;
    let deriv = auto * (m * g.weight() / u + dm) * du_dz;
    (value, deriv)
}

/// `(g(z), g'(z))` for a form of weight `k + 1/2` on Γ₀(4).
pub fn eval_half_integral_d(g: &HalfFormEvaluator, p: UHPoint) -> Result<(Complex64, Complex64)> {
    if p.y >= Y_MIN {
        return Ok(direct_series_d(g, p.z()));
    }
    let (delta, zp) = reduce_gamma0_4(p, default_cosets());
    let (chart, height) = best_chart(zp.z());
    if height < Y_REJECT {
        return Err(Error::Consistency(format!(
            "reduced point has effective height {height}"
        )));
    }
    let mult = ThetaMultiplier::new(delta)?;
    let w = zp.z();
    let (v, dv) = eval_in_chart_d(g, w, chart);
    let j = delta.j(w);
    let factor = mult.factor(g.k, w);
    // z = δw, dw/dz = (cw + d)².
    let deriv = factor * (v * (g.weight() * delta.c as f64) / j + dv) * j * j;
    Ok((factor * v, deriv))
}

/// Integer coprimality helper reused by the Eisenstein sums.
pub(crate) fn coprime(a: i64, b: i64) -> bool {
    gcd(a, b) == 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kohnen::plus_eigenforms;

    fn sample_gamma0_4(seed: u64) -> Mat2 {
        // Words in T and the lower-triangular generator (1,0;4,1).
        let mut m = Mat2::IDENTITY;
        let mut state = seed.wrapping_mul(6_364_136_223_846_793_005).wrapping_add(1);
        for _ in 0..4 {
            state = state
                .wrapping_mul(6_364_136_223_846_793_005)
                .wrapping_add(1_442_695_040_888_963_407);
            let e = ((state >> 33) % 5) as i64 - 2;
            let g = if (state >> 40) % 2 == 0 {
                Mat2::t(e)
            } else {
                Mat2 {
                    a: 1,
                    b: 0,
                    c: 4 * e,
                    d: 1,
                }
            };
            m = m.mul(&g);
        }
        if seed % 3 == 0 {
            m = m.neg();
        }
        m
    }

    #[test]
    fn termwise_derivative_matches_differences() {
        let g = HalfFormEvaluator::from_eigenform(&plus_eigenforms(6, 256).unwrap()[0]);
        let h = 1e-6;
        for (x, y) in [
            (0.1, 0.6),
            (0.31, 0.2),
            (-0.47, 0.07),
            (0.02, 0.03),
            (0.24, 0.011),
        ] {
            let z = Complex64::new(x, y);
            let p = UHPoint::new(x, y).unwrap();
            let (v, d) = eval_half_integral_d(&g, p).unwrap();
            let at =
                |w: Complex64| eval_half_integral(&g, UHPoint::from_complex(w).unwrap()).unwrap();
            assert!((v - at(z)).norm() <= 1e-12 * v.norm().max(1e-300));
            let fd = (at(z + h) - at(z - h)) / (2.0 * h);
            assert!((fd - d).norm() < 1e-5 * d.norm(), "{z}: {fd} vs {d}");
            for chart in [Chart::Zero, Chart::Half] {
                let (cv, cd) = eval_in_chart_d(&g, z, chart);
                if chart_parameter(z, chart).im > 0.3 {
                    let fd = (eval_in_chart(&g, z + h, chart) - eval_in_chart(&g, z - h, chart))
                        / (2.0 * h);
                    assert!((cv - eval_in_chart(&g, z, chart)).norm() <= 1e-12 * cv.norm());
                    assert!((fd - cd).norm() < 1e-5 * cd.norm(), "{chart:?} {z}");
                }
            }
        }
    }

    #[test]
    fn cosets_match_golden_file() {
        let sys = CosetSystem::generate();
        sys.verify().unwrap();
        assert_eq!(sys.index(), 6);
        assert_eq!(CosetSystem::golden().unwrap(), sys);
        assert_eq!(CosetSystem::from_text(&sys.to_text()).unwrap(), sys);
    }

    #[test]
    fn golden_parser_rejects_bad_input() {
        assert!(CosetSystem::from_text("1 0 0 1\n0 -1 1 0\n").is_err());
        assert!(CosetSystem::from_text("1 0 0 2\n").is_err());
        assert!(CosetSystem::from_text("1 x 0 1\n").is_err());
    }

    #[test]
    fn reduction_lands_in_standard_domain() {
        for (x, y) in [(0.3, 0.01), (-7.2, 0.2), (0.49, 3.0), (0.1234, 0.0003)] {
            let p = UHPoint::new(x, y).unwrap();
            let (m, w) = reduce_sl2(p);
            assert!(w.x.abs() <= 0.5 + 1e-12 && w.x * w.x + w.y * w.y >= 1.0 - 1e-9);
            assert!((m.act(p.z()) - w.z()).norm() < 1e-8 * w.z().norm());
        }
    }

    #[test]
    fn multiplier_is_a_cocycle() {
        let zs = [
            Complex64::new(0.1, 0.7),
            Complex64::new(-0.4, 1.9),
            Complex64::new(2.3, 0.05),
        ];
        for i in 0..40 {
            let g1 = sample_gamma0_4(i);
            let g2 = sample_gamma0_4(i + 100);
            let n12 = ThetaMultiplier::new(g1.mul(&g2)).unwrap();
            let n1 = ThetaMultiplier::new(g1).unwrap();
            let n2 = ThetaMultiplier::new(g2).unwrap();
            for &z in &zs {
                let lhs = n12.j(z);
                let rhs = n1.j(g2.act(z)) * n2.j(z);
                assert!((lhs - rhs).norm() < 1e-9 * lhs.norm(), "{g1:?} {g2:?}");
                assert!((n1.value().norm() - 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn multiplier_rejects_outside_gamma0_4() {
        assert!(ThetaMultiplier::new(Mat2::S).is_err());
        assert_eq!(
            ThetaMultiplier::new(Mat2::IDENTITY.neg()).unwrap().exponent,
            6
        );
    }

    #[test]
    fn theta_is_periodic_and_transforms() {
        let th = HalfFormEvaluator::theta(400);
        let z = UHPoint::new(0.3, 0.8).unwrap();
        let a = eval_half_integral(&th, z).unwrap();
        let b = eval_half_integral(&th, UHPoint::new(1.3, 0.8).unwrap()).unwrap();
        assert!((a - b).norm() < 1e-14);
        // θ(−1/(4z)) = √(−2iz) θ(z).
        let w = Complex64::new(0.2, 0.9);
        let lhs = eval_in_chart(&th, -1.0 / (w * 4.0), Chart::Infinity);
        let rhs = (Complex64::new(0.0, -2.0) * w).sqrt() * eval_in_chart(&th, w, Chart::Infinity);
        assert!((lhs - rhs).norm() < 1e-13);
    }

    #[test]
    fn charts_agree_where_they_overlap() {
        let forms = plus_eigenforms(6, 256).unwrap();
        let g = HalfFormEvaluator::from_eigenform(&forms[0]);
        for z in [
            Complex64::new(0.0, 1.0),
            Complex64::new(0.3, 0.6),
            Complex64::new(-0.45, 0.35),
        ] {
            let a = eval_in_chart(&g, z, Chart::Infinity);
            for chart in [Chart::Zero, Chart::Half] {
                let b = eval_in_chart(&g, z, chart);
                assert!(
                    (a - b).norm() < 1e-10 * a.norm(),
                    "{z} {chart:?}: {a} vs {b}"
                );
            }
        }
    }

    #[test]
    fn automorphy_self_test() {
        for k in [2u32, 6] {
            let forms = plus_eigenforms(k.max(6), 256).unwrap();
            let g = if k == 6 {
                HalfFormEvaluator::from_eigenform(&forms[0])
            } else {
                HalfFormEvaluator::theta(400)
            };
            for i in 0..20u64 {
                let gamma = sample_gamma0_4(i + 7);
                let z = Complex64::new(
                    -0.5 + (i as f64 * 0.37) % 1.0,
                    0.3 + (i as f64 * 0.53) % 1.2,
                );
                let p = UHPoint::from_complex(z).unwrap();
                let gz = eval_half_integral(&g, p).unwrap();
                let image = gamma.act_point(p);
                let lhs = eval_half_integral(&g, image).unwrap();
                let factor = ThetaMultiplier::new(gamma).unwrap().factor(g.k, z);
                let rel = (lhs / factor - gz).norm() / gz.norm();
                assert!(rel < 1e-9, "k={k} γ={gamma:?} z={z}: rel {rel}");
            }
        }
    }

    #[test]
    fn direct_and_reduced_paths_agree_at_i() {
        let forms = plus_eigenforms(6, 256).unwrap();
        let g = HalfFormEvaluator::from_eigenform(&forms[0]);
        let z = Complex64::new(0.0, 1.0);
        let direct = eval_in_chart(&g, z, Chart::Infinity).norm();
        let reduced = eval_in_chart(&g, z, Chart::Zero).norm();
        assert!((direct - reduced).abs() < 1e-10 * direct);
    }

    #[test]
    fn invariant_density_is_invariant() {
        let forms = plus_eigenforms(6, 256).unwrap();
        let g = HalfFormEvaluator::from_eigenform(&forms[0]);
        for i in 0..10u64 {
            let gamma = sample_gamma0_4(i + 50);
            let z = Complex64::new(0.17 * i as f64 - 0.5, 0.4 + 0.1 * i as f64);
            let a = invariant_density(&g, z);
            let b = invariant_density(&g, gamma.act(z));
            assert!((a - b).abs() < 1e-9 * a, "{a} {b}");
        }
    }

    #[test]
    fn points_reject_lower_half_plane() {
        assert!(UHPoint::new(0.0, 0.0).is_err());
        assert!(UHPoint::new(0.0, -1.0).is_err());
        assert!(Mat2::new(1, 1, 1, 1).is_err());
    }
}
