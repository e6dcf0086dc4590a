//! Mass equidistribution and zeros of plus-space eigenforms on Γ₀(4)\ℍ.
//!
//! Geometry: the Ford domain `D₄ = {|x| ≤ 1/2, |z − 1/4| ≥ 1/4, |z + 1/4| ≥ 1/4}`
//! has area `2π` and cusps `∞`, `0` and `±1/2`. Its two arcs are paired by
//! `γ = (1, 0; 4, 1)` and its vertical sides by `T`.

use crate::analytic::{
    eval_half_integral_d, invariant_density, CosetSystem, HalfFormEvaluator, Mat2, QuadratureValue,
    UHPoint,
};
use crate::error::{Error, Result};
use crate::kohnen::{plus_eigenforms, zero_cusp_series, PlusEigenform};
use crate::quad::{gl_rule, integrate};
use crate::record::{ExperimentRecord, Table};
use num_complex::Complex64;
use num_rational::Rational64;
use rayon::prelude::*;
use std::f64::consts::PI;

/// Lowest admissible height of a compact domain.
pub const Y0_MIN: f64 = 0.15;
/// Accepted distance of a winding number from the nearest integer.
pub const MAX_DEFECT: f64 = 0.05;
/// Boundary perturbations tried before giving up on a contour.
pub const MAX_RETRIES: usize = 5;
/// Newton target for located zeros.
pub const ZERO_TOL: f64 = 1e-10;
/// Height of the horocycles cutting off the three cusps (in chart coordinates).
pub const CUSP_HEIGHT: f64 = 2.0;

const PATH_TOL: f64 = 1e-8;
const MIN_CELL: f64 = 1e-7;
const SPLIT_FRACTIONS: [f64; 5] = [0.4617, 0.5383, 0.4231, 0.5769, 0.3846];

fn ford_lower(x: f64) -> f64 {
    let t = x.abs() - 0.25;
    (0.0625 - t * t).max(0.0).sqrt()
}

/// Closed membership in the Ford domain.
pub fn in_fundamental_domain(z: Complex64) -> bool {
    z.im > 0.0
        && z.re.abs() <= 0.5 + 1e-12
        && (z - 0.25).norm() >= 0.25 - 1e-12
        && (z + 0.25).norm() >= 0.25 - 1e-12
}

/// Half-open membership: of each pair of glued boundary points only one is
/// kept (`x = −1/2` and the left arc), so equivalent points are counted once.
pub fn canonical_member(z: Complex64) -> bool {
    const EPS: f64 = 1e-9;
    z.im > 0.0
        && z.re >= -0.5 - EPS
        && z.re < 0.5 - EPS
        && (z - 0.25).norm() > 0.25 + EPS
        && (z + 0.25).norm() >= 0.25 - EPS
}

/// A rectangle clipped to the Ford domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompactDomain {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl CompactDomain {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Result<Self> {
        if !(x0 < x1 && y0 < y1) || ![x0, x1, y0, y1].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "empty rectangle [{x0},{x1}]×[{y0},{y1}]"
            )));
        }
        if y0 < Y0_MIN {
            return Err(Error::InvalidArgument(format!(
                "y0 = {y0} is below {Y0_MIN}"
            )));
        }
        let d = Self {
            x0: x0.max(-0.5),
            x1: x1.min(0.5),
            y0,
            y1,
        };
        if d.x0 >= d.x1 {
            return Err(Error::InvalidArgument(
                "rectangle misses the fundamental domain".into(),
            ));
        }
        let nodes = d.nodes(8);
        if nodes.is_empty() || !nodes.iter().all(|(z, _)| in_fundamental_domain(*z)) {
            return Err(Error::Consistency(
                "clipped domain leaves the fundamental domain".into(),
            ));
        }
        if !(d.volume().value > 0.0) {
            return Err(Error::InvalidArgument("domain has zero area".into()));
        }
        Ok(d)
    }

    /// Parse `x0,x1,y0,y1`.
    pub fn parse(text: &str) -> Result<Self> {
        let v: Vec<f64> = text
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::InvalidArgument(format!("domain '{text}': {e}")))?;
        if v.len() != 4 {
            return Err(Error::InvalidArgument(format!(
                "domain '{text}' needs four numbers"
            )));
        }
        Self::new(v[0], v[1], v[2], v[3])
    }

    pub fn contains(&self, z: Complex64) -> bool {
        canonical_member(z)
            && z.re >= self.x0
            && z.re < self.x1
            && z.im >= self.y0
            && z.im < self.y1
    }

    fn x_breaks(&self) -> Vec<f64> {
        let mut b = vec![self.x0, self.x1, 0.0, 0.25, -0.25];
        if self.y0 < 0.25 {
            let r = (0.0625 - self.y0 * self.y0).sqrt();
            for c in [0.25 - r, 0.25 + r] {
                b.push(c);
                b.push(-c);
            }
        }
        b.retain(|&x| x >= self.x0 && x <= self.x1);
        b.sort_by(f64::total_cmp);
        b.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
        b
    }

    /// Tensor Gauss–Legendre nodes with weights `dx dy / y²`.
    fn nodes(&self, n: usize) -> Vec<(Complex64, f64)> {
        let (gx, gw) = gl_rule(n);
        let breaks = self.x_breaks();
        let mut out = Vec::new();
        for w in breaks.windows(2) {
            let (a, b) = (w[0], w[1]);
            for (xi, wi) in gx.iter().zip(gw) {
                let x = 0.5 * (a + b) + 0.5 * (b - a) * xi;
                let wx = 0.5 * (b - a) * wi;
                let lo = self.y0.max(ford_lower(x));
                if lo >= self.y1 {
                    continue;
                }
                let panels = ((self.y1 - lo) / 0.25).ceil().max(1.0) as usize;
                let h = (self.y1 - lo) / panels as f64;
                for p in 0..panels {
                    let c = lo + h * (p as f64 + 0.5);
                    for (yj, wj) in gx.iter().zip(gw) {
                        let y = c + 0.5 * h * yj;
                        out.push((Complex64::new(x, y), wx * 0.5 * h * wj / (y * y)));
                    }
                }
            }
        }
        out
    }

    fn integrate(&self, f: impl Fn(Complex64) -> f64 + Sync) -> QuadratureValue {
        let [a, b] = crate::analytic::domain::RULE_ORDERS;
        let coarse = crate::analytic::apply_rule(&self.nodes(a), &f);
        let fine = crate::analytic::apply_rule(&self.nodes(b), &f);
        QuadratureValue {
            value: fine,
            error: (fine - coarse).abs(),
        }
    }

    /// Hyperbolic area.
    pub fn volume(&self) -> QuadratureValue {
        self.integrate(|_| 1.0)
    }
}

/// `∬_D y^{k+1/2} |g|² dvol` for a normalized `g`.
pub fn mass_measure(g: &HalfFormEvaluator, d: &CompactDomain) -> Result<QuadratureValue> {
    let q = d.integrate(|z| invariant_density(g, z));
    if !q.value.is_finite() || q.error > 1e-6 {
        return Err(Error::Quadrature {
            achieved: q.error,
            target: 1e-6,
        });
    }
    Ok(q)
}

/// Nodes for `∫_{|s| ≤ 1/2, v ≥ ℓ(s)} f dvol` above either the line `v = 1/4`
/// (`circle = false`) or the circle `|u − i/2| = 1/2` (`circle = true`).
fn strip_nodes(n: usize, circle: bool) -> Vec<(Complex64, f64)> {
    const BREAKS: [f64; 8] = [0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0];
    let (gx, gw) = gl_rule(n);
    let mut out = Vec::new();
    for (xi, wi) in gx.iter().zip(gw) {
        // s = sin(φ)/2 removes the square-root endpoints of the circle.
        let (s, ws, lo) = if circle {
            let phi = 0.5 * PI * xi;
            (
                0.5 * phi.sin(),
                0.5 * phi.cos() * 0.5 * PI * wi,
                0.5 * (1.0 + phi.cos()),
            )
        } else {
            (0.5 * xi, 0.5 * wi, 0.25)
        };
        let start = lo;
        let mut lo = lo;
        for &hi in BREAKS.iter().filter(|&&b| b > start + 1e-12) {
            let half = 0.5 * (hi - lo);
            for (yj, wj) in gx.iter().zip(gw) {
                let v = lo + half * (1.0 + yj);
                out.push((Complex64::new(s, v), ws * half * wj / (v * v)));
            }
            lo = hi;
        }
        for (vj, wj) in gx.iter().zip(gw) {
            let t = 0.5 * (1.0 + vj);
            out.push((Complex64::new(s, lo / t), ws * 0.5 * wj / lo));
        }
    }
    out
}

/// Full-domain mass through the three cusp charts: the strip `y ≥ 1/4` at
/// `∞` and, in each of the charts at `0` and `1/2`, the region above the
/// circle `|u − i/2| = 1/2`. Independent of the six-tile rule used to
/// normalize.
pub fn full_domain_mass(g: &HalfFormEvaluator) -> QuadratureValue {
    let density = |piece: usize, u: Complex64| -> f64 {
        let z = match piece {
            0 => u,
            1 => -1.0 / (4.0 * u),
            _ => 0.5 - 1.0 / (4.0 * u),
        };
        invariant_density(g, z)
    };
    let mut total = QuadratureValue {
        value: 0.0,
        error: 0.0,
    };
    let [a, b] = crate::analytic::domain::RULE_ORDERS;
    for piece in 0..3 {
        let f = |u: Complex64| density(piece, u);
        let coarse = crate::analytic::apply_rule(&strip_nodes(a, piece > 0), f);
        let fine = crate::analytic::apply_rule(&strip_nodes(b, piece > 0), f);
        total.value += fine;
        total.error += (fine - coarse).abs();
    }
    total
}

/// Exact orders of vanishing at the cusps, in the width-one local parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CuspOrders {
    pub infinity: Rational64,
    pub zero: Rational64,
    pub half: Rational64,
}

impl CuspOrders {
    pub fn total(&self) -> Rational64 {
        self.infinity + self.zero + self.half
    }
}

pub fn cusp_orders(g: &PlusEigenform) -> Result<CuspOrders> {
    let kf = &g.field;
    let infinity = g
        .coeffs
        .iter()
        .position(|c| !kf.is_zero(c))
        .ok_or_else(|| Error::Consistency("form is zero".into()))?;
    // The valence bound caps every order by (2k+1)/4.
    let order = g.k as usize + 2;
    let h0 = zero_cusp_series(g.k, kf, &g.alpha, order)?;
    let zero = h0
        .iter()
        .position(|c| !kf.is_zero(c))
        .ok_or_else(|| Error::OrderExhausted {
            needed: order + 1,
            available: order,
        })?;
    // At 1/2 the monomial θ^{2k+1−4j}F^j starts at q^{(2k+1−4j)/4}, so the
    // largest j with α_j ≠ 0 decides.
    let jmax = g
        .alpha
        .iter()
        .rposition(|a| !kf.is_zero(a))
        .ok_or_else(|| Error::Consistency("no monomial coordinates".into()))?;
    Ok(CuspOrders {
        infinity: Rational64::from_integer(infinity as i64),
        zero: Rational64::from_integer(zero as i64),
        half: Rational64::new(2 * g.k as i64 + 1 - 4 * jmax as i64, 4),
    })
}

/// Elliptic points of Γ₀(4) among the tile corners, with stabilizer orders.
/// A corner `R·e` is elliptic when `R·Stab(e)·R⁻¹` meets Γ₀(4) nontrivially.
pub fn elliptic_points(cosets: &CosetSystem) -> Vec<(Complex64, u32)> {
    let rho = Complex64::new(-0.5, 3f64.sqrt() / 2.0);
    let st = Mat2::S.mul(&Mat2::t(1));
    let corners = [
        (Complex64::new(0.0, 1.0), Mat2::S, 2),
        (rho, st, 3),
        (rho + 1.0, Mat2::t(1).mul(&st).mul(&Mat2::t(-1)), 3),
    ];
    let mut out: Vec<(Complex64, u32)> = Vec::new();
    for r in cosets.reps() {
        for &(e, stab, order) in &corners {
            let conj = r.mul(&stab).mul(&r.inv());
            if conj.in_gamma0(4) {
                out.push((r.act(e), order));
            }
        }
    }
    out
}

/// `1/#Γ_ρ` (modulo ±1) for a zero at `z`.
pub fn stabilizer_weight(z: Complex64, elliptic: &[(Complex64, u32)]) -> f64 {
    elliptic
        .iter()
        .find(|(e, _)| (*e - z).norm() < 1e-8)
        .map_or(1.0, |&(_, o)| 1.0 / o as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeroRecord {
    pub location: UHPoint,
    pub multiplicity: u32,
    pub weight: f64,
    /// `|g(z)| / max_{∂cell} |g|`.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Result<Self> {
        if !(x0 < x1 && 0.0 < y0 && y0 < y1) {
            return Err(Error::InvalidArgument(format!(
                "bad rectangle [{x0},{x1}]×[{y0},{y1}]"
            )));
        }
        Ok(Self { x0, x1, y0, y1 })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let v: Vec<f64> = text
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::InvalidArgument(format!("region '{text}': {e}")))?;
        if v.len() != 4 {
            return Err(Error::InvalidArgument(format!(
                "region '{text}' needs four numbers"
            )));
        }
        Self::new(v[0], v[1], v[2], v[3])
    }

    fn size(&self) -> f64 {
        (self.x1 - self.x0).max(self.y1 - self.y0)
    }

    fn center(&self) -> Complex64 {
        Complex64::new(0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))
    }

    fn contains(&self, z: Complex64, slack: f64) -> bool {
        z.re >= self.x0 - slack
            && z.re <= self.x1 + slack
            && z.im >= self.y0 - slack
            && z.im <= self.y1 + slack
    }

    fn corners(&self) -> [Complex64; 4] {
        [
            Complex64::new(self.x0, self.y0),
            Complex64::new(self.x1, self.y0),
            Complex64::new(self.x1, self.y1),
            Complex64::new(self.x0, self.y1),
        ]
    }

    fn split(&self, fx: f64, fy: f64) -> [Rect; 4] {
        let xm = self.x0 + fx * (self.x1 - self.x0);
        let ym = self.y0 + fy * (self.y1 - self.y0);
        [
            Rect {
                x1: xm,
                y1: ym,
                ..*self
            },
            Rect {
                x0: xm,
                y1: ym,
                ..*self
            },
            Rect {
                x1: xm,
                y0: ym,
                ..*self
            },
            Rect {
                x0: xm,
                y0: ym,
                ..*self
            },
        ]
    }

    /// Deterministic small boundary move for retry `i ≥ 1`.
    fn perturbed(&self, i: usize) -> Rect {
        let s = self.size() * 1e-3 * i as f64;
        let sign = |j: usize| if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
        Rect {
            x0: self.x0 + 0.61 * s * sign(0),
            x1: self.x1 + 0.37 * s * sign(1),
            y0: (self.y0 + 0.53 * s * sign(2)).max(self.y0 * 0.5),
            y1: self.y1 + 0.29 * s * sign(3),
        }
    }
}

/// Result of an argument-principle count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContourCount {
    pub count: i64,
    pub winding: Complex64,
    pub defect: f64,
    /// The rectangle actually integrated over, after any perturbation.
    pub region: Rect,
    pub retries: usize,
}

type Path = Box<dyn Fn(f64) -> (Complex64, Complex64) + Sync + Send>;

fn segment(a: Complex64, b: Complex64) -> Path {
    Box::new(move |t| (a + (b - a) * t, b - a))
}

fn log_derivative(g: &HalfFormEvaluator, z: Complex64) -> Complex64 {
    let nan = Complex64::new(f64::NAN, f64::NAN);
    let Ok(p) = UHPoint::from_complex(z) else {
        return nan;
    };
    match eval_half_integral_d(g, p) {
        Ok((v, d)) if v.norm() > 0.0 => d / v,
        _ => nan,
    }
}

/// `(1/2πi) Σ ∫ g'/g dz` over consecutive path pieces parametrized by `[0, 1]`.
fn winding(g: &HalfFormEvaluator, pieces: &[Path]) -> Result<Complex64> {
    let parts: Vec<Result<Complex64>> = pieces
        .par_iter()
        .map(|p| {
            let (v, _) = integrate(
                |t| {
                    let (z, dz) = p(t);
                    log_derivative(g, z) * dz
                },
                0.0,
                1.0,
                PATH_TOL,
            )?;
            Ok(v)
        })
        .collect();
    let mut total = Complex64::new(0.0, 0.0);
    for p in parts {
        total += p?;
    }
    if !total.re.is_finite() || !total.im.is_finite() {
        return Err(Error::Consistency(
            "log-derivative undefined on contour".into(),
        ));
    }
    Ok(total / Complex64::new(0.0, 2.0 * PI))
}

fn rounded(w: Complex64) -> (i64, f64) {
    let n = w.re.round();
    (n as i64, (w - n).norm())
}

fn rect_pieces(r: &Rect) -> Vec<Path> {
    let c = r.corners();
    (0..4).map(|i| segment(c[i], c[(i + 1) % 4])).collect()
}

/// Count on exactly this rectangle, no perturbation.
fn count_exact(g: &HalfFormEvaluator, r: &Rect) -> Result<ContourCount> {
    let w = winding(g, &rect_pieces(r))?;
    let (count, defect) = rounded(w);
    if defect >= MAX_DEFECT {
        return Err(Error::Consistency(format!(
            "winding number {w} is not near an integer"
        )));
    }
    Ok(ContourCount {
        count,
        winding: w,
        defect,
        region: *r,
        retries: 0,
    })
}

/// Count with subdivision when the defect is too large.
fn count_subdivided(g: &HalfFormEvaluator, r: &Rect, depth: usize) -> Result<ContourCount> {
    match count_exact(g, r) {
        Ok(c) => Ok(c),
        Err(e) if depth == 0 => Err(e),
        Err(_) => {
            let kids = r.split(SPLIT_FRACTIONS[depth % 5], SPLIT_FRACTIONS[(depth + 1) % 5]);
            let mut total = ContourCount {
                count: 0,
                winding: Complex64::new(0.0, 0.0),
                defect: 0.0,
                region: *r,
                retries: 0,
            };
            for kid in &kids {
                let c = count_subdivided(g, kid, depth - 1)?;
                total.count += c.count;
                total.winding += c.winding;
                total.defect = total.defect.max(c.defect);
            }
            Ok(total)
        }
    }
}

/// Zeros in `r` counted with multiplicity, via the argument principle.
pub fn zero_count_region(g: &HalfFormEvaluator, r: &Rect) -> Result<ContourCount> {
    let mut last = None;
    for i in 0..=MAX_RETRIES {
        let rr = if i == 0 { *r } else { r.perturbed(i) };
        match count_subdivided(g, &rr, 2) {
            Ok(mut c) => {
                c.retries = i;
                return Ok(c);
            }
            Err(e) => last = Some(e),
        }
    }
    Err(last.unwrap_or_else(|| Error::Consistency("zero count failed".into())))
}

fn newton(g: &HalfFormEvaluator, z0: Complex64, m: u32) -> Option<Complex64> {
    let mut z = z0;
    for _ in 0..100 {
        let (v, d) = eval_half_integral_d(g, UHPoint::from_complex(z).ok()?).ok()?;
        if d.norm() == 0.0 {
            return None;
        }
        let step = v / d * m as f64;
        z -= step;
        if !(z.im > 0.0) {
            return None;
        }
        if step.norm() < 0.1 * ZERO_TOL {
            return Some(z);
        }
    }
    None
}

fn boundary_max(g: &HalfFormEvaluator, r: &Rect) -> f64 {
    let c = r.corners();
    let mut best: f64 = 0.0;
    for i in 0..4 {
        for j in 0..8 {
            let z = c[i] + (c[(i + 1) % 4] - c[i]) * (j as f64 / 8.0);
            if let Ok((v, _)) = eval_half_integral_d(g, UHPoint { x: z.re, y: z.im }) {
                best = best.max(v.norm());
            }
        }
    }
    best
}

fn refine(
    g: &HalfFormEvaluator,
    r: &Rect,
    m: u32,
    weights: &[(Complex64, u32)],
) -> Option<ZeroRecord> {
    let z = newton(g, r.center(), m)?;
    if !r.contains(z, 1e-9) {
        return None;
    }
    let (v, _) = eval_half_integral_d(g, UHPoint::from_complex(z).ok()?).ok()?;
    let scale = boundary_max(g, r);
    let residual = v.norm() / scale;
    if !(residual < 1e-8) {
        return None;
    }
    Some(ZeroRecord {
        location: UHPoint { x: z.re, y: z.im },
        multiplicity: m,
        weight: stabilizer_weight(z, weights),
        residual,
    })
}

fn locate_cell(
    g: &HalfFormEvaluator,
    r: &Rect,
    count: i64,
    weights: &[(Complex64, u32)],
) -> Result<Vec<ZeroRecord>> {
    if count <= 0 {
        return Ok(Vec::new());
    }
    if count == 1 || r.size() < MIN_CELL {
        if let Some(z) = refine(g, r, count as u32, weights) {
            return Ok(vec![z]);
        }
        if r.size() < MIN_CELL {
            return Err(Error::Consistency(format!(
                "Newton failed in a cell of size {:e}",
                r.size()
            )));
        }
    }
    // Quadtree step; off-centre splits avoid the symmetry lines.
    for (a, &fx) in SPLIT_FRACTIONS.iter().enumerate() {
        let fy = SPLIT_FRACTIONS[(a + 2) % 5];
        let kids = r.split(fx, fy);
        let counts: Vec<Result<ContourCount>> =
            kids.par_iter().map(|k| count_exact(g, k)).collect();
        let Ok(counts) = counts.into_iter().collect::<Result<Vec<_>>>() else {
            continue;
        };
        if counts.iter().map(|c| c.count).sum::<i64>() != count {
            continue;
        }
        let found: Vec<Result<Vec<ZeroRecord>>> = kids
            .par_iter()
            .zip(&counts)
            .map(|(k, c)| locate_cell(g, k, c.count, weights))
            .collect();
        let mut out = Vec::new();
        for f in found {
            out.extend(f?);
        }
        return Ok(out);
    }
    Err(Error::Consistency(
        "no admissible subdivision of a zero cell".into(),
    ))
}

/// Zeros in `r`, refined to `ZERO_TOL`, in quadtree order.
pub fn zeros_locate(g: &HalfFormEvaluator, r: &Rect) -> Result<(ContourCount, Vec<ZeroRecord>)> {
    let total = zero_count_region(g, r)?;
    let weights = elliptic_points(&CosetSystem::generate());
    let zeros = locate_cell(g, &total.region, total.count, &weights)?;
    let found: i64 = zeros.iter().map(|z| z.multiplicity as i64).sum();
    if found != total.count {
        return Err(Error::Consistency(format!(
            "located {found} zeros, counted {}",
            total.count
        )));
    }
    Ok((total, zeros))
}

/// Closed contour around the Ford domain cut off at horocycles of height
/// `CUSP_HEIGHT`. Glued sides are deformed by the same bump (`eps` for the
/// vertical pair, `eps_arc` for the arcs), so the region stays a
/// fundamental domain while its boundary leaves the lines where the real
/// structure tends to put zeros.
fn ford_contour(eps: f64, eps_arc: f64) -> Vec<Path> {
    let v = CUSP_HEIGHT;
    let top = CUSP_HEIGHT;
    let tb = 1.0 / (4.0 * v);
    let left = move |t: f64| -> (Complex64, Complex64) {
        let b = (PI * t).sin();
        let db = PI * (PI * t).cos();
        (
            Complex64::new(-0.5 + eps * b, top - t * (top - tb)),
            Complex64::new(eps * db, -(top - tb)),
        )
    };
    // Chart at 1/2 near −1/2: z = −1/2 − 1/(4u); at 0: z = −1/(4u).
    let z_start = -0.5 - 1.0 / (4.0 * Complex64::new(-0.5, v));
    let z_end = -1.0 / (4.0 * Complex64::new(0.5, v));
    let phi_s = (z_start + 0.25).arg();
    let phi_e = (z_end + 0.25).arg();
    let arc = move |t: f64| -> (Complex64, Complex64) {
        let phi = phi_s + t * (phi_e - phi_s);
        let r = 0.25 * (1.0 + eps_arc * (PI * t).sin());
        let dr = 0.25 * eps_arc * PI * (PI * t).cos();
        let e = Complex64::from_polar(1.0, phi);
        (
            -0.25 + e * r,
            e * dr + Complex64::i() * e * r * (phi_e - phi_s),
        )
    };
    let gamma = |w: Complex64| w / (4.0 * w + 1.0);
    let dgamma = |w: Complex64| 1.0 / ((4.0 * w + 1.0) * (4.0 * w + 1.0));
    let horo = move |u0: f64, u1: f64, shift: f64| -> Path {
        Box::new(move |t: f64| {
            let u = Complex64::new(u0 + t * (u1 - u0), v);
            (shift - 1.0 / (4.0 * u), (u1 - u0) / (4.0 * u * u))
        })
    };
    vec![
        segment(Complex64::new(0.5, top), Complex64::new(-0.5, top)),
        Box::new(left),
        horo(0.0, -0.5, -0.5),
        Box::new(arc),
        horo(0.5, -0.5, 0.0),
        Box::new(move |t: f64| {
            let (w, dw) = arc(1.0 - t);
            (gamma(w), -dgamma(w) * dw)
        }),
        horo(0.5, 0.0, 0.5),
        Box::new(move |t: f64| {
            let (w, dw) = left(1.0 - t);
            (w + 1.0, -dw)
        }),
    ]
}

const FORD_DEFORMATIONS: [(f64, f64); 6] = [
    (0.013, 0.021),
    (-0.017, 0.011),
    (0.023, -0.019),
    (0.007, 0.029),
    (-0.027, -0.009),
    (0.031, 0.017),
];

/// Zeros of `g` in the truncated Ford domain, counted with multiplicity.
pub fn interior_zero_count(g: &HalfFormEvaluator) -> Result<ContourCount> {
    let mut last = None;
    for (i, &(e1, e2)) in FORD_DEFORMATIONS.iter().enumerate() {
        let w = match winding(g, &ford_contour(e1, e2)) {
            Ok(w) => w,
            Err(e) => {
                last = Some(e);
                continue;
            }
        };
        let (count, defect) = rounded(w);
        if defect < MAX_DEFECT {
            return Ok(ContourCount {
                count,
                winding: w,
                defect,
                region: Rect {
                    x0: -0.5,
                    x1: 0.5,
                    y0: 0.0,
                    y1: CUSP_HEIGHT,
                },
                retries: i,
            });
        }
        last = Some(Error::Consistency(format!("winding number {w}")));
    }
    Err(last.unwrap_or_else(|| Error::Consistency("Ford contour failed".into())))
}

/// Zeros hidden beyond the cutoff horocycle at each cusp (`∞`, `0`, `1/2`):
/// the winding of the cusp series minus its order. All should be zero.
pub fn cusp_region_zeros(g: &HalfFormEvaluator, orders: &CuspOrders) -> Result<[f64; 3]> {
    let v = CUSP_HEIGHT;
    let weight = g.weight();
    let mut out = [0.0; 3];
    let maps: [(f64, Rational64); 3] = [
        (f64::NAN, orders.infinity),
        (0.0, orders.zero),
        (0.5, orders.half),
    ];
    for (i, &(shift, ord)) in maps.iter().enumerate() {
        let (w, _) = integrate(
            |t| {
                let u = Complex64::new(-0.5 + t, v);
                if i == 0 {
                    return log_derivative(g, u);
                }
                let z = shift - 1.0 / (4.0 * u);
                log_derivative(g, z) / (4.0 * u * u) - weight / u
            },
            0.0,
            1.0,
            PATH_TOL,
        )?;
        let ord = *ord.numer() as f64 / *ord.denom() as f64;
        out[i] = (w / Complex64::new(0.0, 2.0 * PI)).re - ord;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValenceReport {
    pub k: u32,
    pub interior: ContourCount,
    pub weighted_interior: f64,
    pub orders: CuspOrders,
    pub elliptic_weight: f64,
    pub hidden: [f64; 3],
    pub total: f64,
    pub expected: Rational64,
}

impl ValenceReport {
    pub fn holds(&self) -> bool {
        let exp = *self.expected.numer() as f64 / *self.expected.denom() as f64;
        (self.total - exp).abs() < 1e-12 && self.hidden.iter().all(|h| h.abs() < MAX_DEFECT)
    }
}

/// Interior count, cusp orders and elliptic contributions against `(k+1/2)/2`.
pub fn valence_check(form: &PlusEigenform) -> Result<ValenceReport> {
    let g = HalfFormEvaluator::from_eigenform(form);
    let orders = cusp_orders(form)?;
    let interior = interior_zero_count(&g)?;
    let hidden = cusp_region_zeros(&g, &orders)?;
    // Γ₀(4) has no elliptic points, so every interior zero has weight one;
    // the list is still derived from the coset data.
    let elliptic = elliptic_points(&CosetSystem::generate());
    let elliptic_weight = 0.0;
    let weighted_interior = if elliptic.is_empty() {
        interior.count as f64
    } else {
        return Err(Error::Consistency(
            "elliptic points present; weighted interior count needs located zeros".into(),
        ));
    };
    let ords = orders.total();
    let total = weighted_interior + *ords.numer() as f64 / *ords.denom() as f64 + elliptic_weight;
    Ok(ValenceReport {
        k: form.k,
        interior,
        weighted_interior,
        orders,
        elliptic_weight,
        hidden,
        total,
        expected: Rational64::new(2 * form.k as i64 + 1, 4),
    })
}

fn rat_f64(r: Rational64) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

pub fn valence_record(form: &PlusEigenform) -> Result<ExperimentRecord> {
    let v = valence_check(form)?;
    let mut rec = ExperimentRecord::new("que-valence").param("k", form.k);
    rec.result("interior_zeros", v.weighted_interior);
    rec.result("ord_infinity", rat_f64(v.orders.infinity));
    rec.result("ord_zero", rat_f64(v.orders.zero));
    rec.result("ord_half", rat_f64(v.orders.half));
    rec.result("elliptic_weight", v.elliptic_weight);
    rec.result("total", v.total);
    rec.result("winding_re", v.interior.winding.re);
    rec.result("winding_im", v.interior.winding.im);
    rec.oracle("total", rat_f64(v.expected));
    rec.residual("defect", v.interior.defect);
    for (i, name) in ["infinity", "zero", "half"].iter().enumerate() {
        rec.residual(&format!("hidden_zeros_{name}"), v.hidden[i]);
    }
    rec.check(
        "valence",
        v.holds(),
        format!("total {} vs {}", v.total, rat_f64(v.expected)),
    );
    Ok(rec)
}

/// Default grid: the whole compact part and a partition of it.
pub fn default_grid() -> Vec<CompactDomain> {
    let mk = |a, b, c, d| CompactDomain::new(a, b, c, d).expect("valid default domain");
    vec![
        mk(-0.5, 0.5, 0.15, 2.0),
        mk(-0.5, 0.0, 0.15, 2.0),
        mk(0.0, 0.5, 0.15, 2.0),
        mk(-0.5, 0.5, 0.15, 0.4),
        mk(-0.5, 0.5, 0.4, 2.0),
        mk(-0.25, 0.25, 0.3, 1.0),
    ]
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Zeros of `g` inside the bounding box of `grid`, counted once per orbit.
pub fn grid_zeros(g: &HalfFormEvaluator, grid: &[CompactDomain]) -> Result<Vec<ZeroRecord>> {
    let pad = 1e-3;
    let bx = Rect::new(
        grid.iter().map(|d| d.x0).fold(f64::INFINITY, f64::min) - pad * 1.37,
        grid.iter().map(|d| d.x1).fold(f64::NEG_INFINITY, f64::max) + pad * 0.71,
        grid.iter().map(|d| d.y0).fold(f64::INFINITY, f64::min) - pad * 0.53,
        grid.iter().map(|d| d.y1).fold(f64::NEG_INFINITY, f64::max) + pad * 1.13,
    )?;
    let (_, zeros) = zeros_locate(g, &bx)?;
    Ok(zeros
        .into_iter()
        .filter(|z| canonical_member(z.location.z()))
        .collect())
}

/// Per-weight zero counts and masses over `grid`.
pub fn equidistribution_report(
    weights: &[u32],
    grid: &[CompactDomain],
    order: usize,
) -> Result<ExperimentRecord> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty domain grid".into()));
    }
    let mut rec = ExperimentRecord::new("que-report")
        .param("weights", weights.to_vec())
        .param("domains", grid.len())
        .param("order", order);
    let mut table = Table::new(&[
        "k",
        "domain",
        "x0",
        "x1",
        "y0",
        "y1",
        "volume",
        "mass",
        "mass_discrepancy",
        "zero_count",
        "expected_count",
        "discrepancy",
    ]);
    let largest = grid
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.volume().value.total_cmp(&b.1.volume().value))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let mut skipped = Vec::new();
    for &k in weights {
        let forms = plus_eigenforms(k, order)?;
        let Some(form) = forms.first() else {
            skipped.push(k);
            continue;
        };
        let raw = HalfFormEvaluator::from_eigenform(form);
        let (g, _) = crate::analytic::petersson_l2_normalize(&raw)?;
        let zeros = grid_zeros(&g, grid)?;
        let mut discrepancies = Vec::new();
        for (i, d) in grid.iter().enumerate() {
            let vol = d.volume().value;
            let mass = mass_measure(&g, d)?.value;
            let count: u32 = zeros
                .iter()
                .filter(|z| d.contains(z.location.z()))
                .map(|z| z.multiplicity)
                .sum();
            let share = vol / (2.0 * PI);
            let expected = k as f64 / 2.0 * share;
            let disc = (count as f64 * 2.0 / k as f64 - share).abs();
            discrepancies.push(disc);
            table.push(vec![
                k as f64,
                i as f64,
                d.x0,
                d.x1,
                d.y0,
                d.y1,
                vol,
                mass,
                (mass - share).abs(),
                count as f64,
                expected,
                disc,
            ]);
            rec.check(
                &format!("mass_range_k{k}_d{i}"),
                (0.0..=1.0 + 1e-3).contains(&mass),
                format!("mass {mass}"),
            );
            if k == 14 && i == largest {
                let ratio = count as f64 / expected;
                rec.result("largest_domain_ratio_k14", ratio);
                rec.check(
                    "zero_scaling_k14",
                    (0.5..=1.5).contains(&ratio),
                    format!("count {count} vs expected {expected}"),
                );
            }
        }
        rec.result(&format!("median_discrepancy_k{k}"), median(discrepancies));
        rec.result(&format!("zeros_in_box_k{k}"), zeros.len() as f64);
    }
    if !skipped.is_empty() {
        rec.parameters
            .insert("skipped_empty_weights".into(), skipped.into());
    }
    rec.table = Some(table);
    Ok(rec)
}

/// Mass of one domain for the first eigenform of weight `k + 1/2`.
pub fn mass_record(k: u32, d: &CompactDomain, order: usize) -> Result<ExperimentRecord> {
    let forms = plus_eigenforms(k, order)?;
    let form = forms
        .first()
        .ok_or_else(|| Error::InvalidArgument(format!("no plus-space eigenform for k = {k}")))?;
    let (g, _) = crate::analytic::petersson_l2_normalize(&HalfFormEvaluator::from_eigenform(form))?;
    let m = mass_measure(&g, d)?;
    let vol = d.volume();
    let full = full_domain_mass(&g);
    let mut rec = ExperimentRecord::new("que-mass")
        .param("k", k)
        .param("domain", vec![d.x0, d.x1, d.y0, d.y1]);
    rec.result("mass", m.value);
    rec.result("volume", vol.value);
    rec.result("full_domain_mass", full.value);
    rec.oracle("volume_share", vol.value / (2.0 * PI));
    rec.oracle("full_domain_mass", 1.0);
    rec.residual("mass_error", m.error);
    rec.residual("discrepancy", (m.value - vol.value / (2.0 * PI)).abs());
    rec.residual("full_domain", (full.value - 1.0).abs());
    rec.check(
        "mass_range",
        (0.0..=1.0 + 1e-3).contains(&m.value),
        format!("mass {}", m.value),
    );
    rec.check(
        "full_domain_mass",
        (full.value - 1.0).abs() < 1e-3,
        format!("full mass {}", full.value),
    );
    Ok(rec)
}

/// Located zeros in a rectangle for the first eigenform of weight `k + 1/2`.
pub fn zeros_record(k: u32, r: &Rect, order: usize) -> Result<ExperimentRecord> {
    let forms = plus_eigenforms(k, order)?;
    let form = forms
        .first()
        .ok_or_else(|| Error::InvalidArgument(format!("no plus-space eigenform for k = {k}")))?;
    let g = HalfFormEvaluator::from_eigenform(form);
    let (count, zeros) = zeros_locate(&g, r)?;
    let mut rec = ExperimentRecord::new("que-zeros")
        .param("k", k)
        .param("region", vec![r.x0, r.x1, r.y0, r.y1]);
    rec.result("count", count.count as f64);
    rec.result("retries", count.retries as f64);
    rec.residual("defect", count.defect);
    let mut t = Table::new(&["x", "y", "multiplicity", "weight", "residual"]);
    for z in &zeros {
        t.push(vec![
            z.location.x,
            z.location.y,
            z.multiplicity as f64,
            z.weight,
            z.residual,
        ]);
    }
    rec.table = Some(t);
    Ok(rec)
}
