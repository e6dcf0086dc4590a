//! Numerical quadrature: adaptive Gauss–Kronrod (7/15), fixed Gauss–Legendre
//! rules and deterministic summation helpers.

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::ops::{Add, Mul, Sub};
use std::sync::OnceLock;

/// Values that can be integrated: real or complex.
pub trait QuadValue:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self>
{
    fn zero() -> Self;
    fn magnitude(&self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// One 15-point Kronrod panel; returns (estimate, |K15 − G7|).
pub fn gk15<T: QuadValue>(f: &impl Fn(f64) -> T, a: f64, b: f64) -> (T, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        k = k + s * WGK[j];
        if j % 2 == 1 {
            g = g + s * WG[j / 2];
        }
    }
    let k = k * h;
    let g = g * h;
    (k, (k - g).magnitude())
}

/// Adaptive Gauss–Kronrod integration of `f` over `[a, b]` to absolute
/// tolerance `tol`. Returns the value and the summed error estimate.
pub fn integrate<T: QuadValue>(f: impl Fn(f64) -> T, a: f64, b: f64, tol: f64) -> Result<(T, f64)> {
    integrate_with_limit(f, a, b, tol, 4000)
}

pub fn integrate_with_limit<T: QuadValue>(
    f: impl Fn(f64) -> T,
    a: f64,
    b: f64,
    tol: f64,
    max_panels: usize,
) -> Result<(T, f64)> {
    if a == b {
        return Ok((T::zero(), 0.0));
    }
    // Depth-first bisection with per-panel tolerance proportional to width;
    // the order of accumulation is fixed, so results are reproducible.
    let width = (b - a).abs();
    let mut stack = vec![(a, b)];
    let mut total = T::zero();
    let mut comp = T::zero();
    let mut err = 0.0;
    let mut panels = 0usize;
    while let Some((lo, hi)) = stack.pop() {
        let (v, e) = gk15(&f, lo, hi);
        panels += 1;
        let local_tol = tol * ((hi - lo).abs() / width).max(1e-6);
        if e <= local_tol || panels >= max_panels || (hi - lo).abs() < width * 1e-13 {
            // Kahan-style compensated accumulation.
            let y = v - comp;
            let t = total + y;
            comp = (t - total) - y;
            total = t;
            err += e;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((mid, hi));
            stack.push((lo, mid));
        }
    }
    if err > tol * 10.0 && err > 1e-300 {
        return Err(Error::Quadrature {
            achieved: err,
            target: tol,
        });
    }
    Ok((total, err))
}

/// Integrate over `[a, ∞)` by the substitution `x = a + t/(1−t)`.
pub fn integrate_to_inf<T: QuadValue>(f: impl Fn(f64) -> T, a: f64, tol: f64) -> Result<(T, f64)> {
    integrate(
        |t: f64| {
            if t >= 1.0 {
                return T::zero();
            }
            let u = 1.0 - t;
            f(a + t / u) * (1.0 / (u * u))
        },
        0.0,
        1.0,
        tol,
    )
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
                p1 = x;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        xs[i] = -x;
        xs[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        ws[i] = w;
        ws[n - 1 - i] = w;
    }
    (xs, ws)
}

/// Cached Gauss–Legendre rule for a handful of common orders.
pub fn gl_rule(n: usize) -> &'static (Vec<f64>, Vec<f64>) {
    static CACHE: OnceLock<
        std::sync::Mutex<std::collections::HashMap<usize, &'static (Vec<f64>, Vec<f64>)>>,
    > = OnceLock::new();
    let map = CACHE.get_or_init(Default::default);
    let mut guard = map.lock().expect("gl cache poisoned");
    *guard
        .entry(n)
        .or_insert_with(|| Box::leak(Box::new(gauss_legendre(n))))
}

/// Fixed-order composite Gauss–Legendre on `[a, b]` with `panels` equal panels.
pub fn fixed_gl<T: QuadValue>(
    f: impl Fn(f64) -> T,
    a: f64,
    b: f64,
    order: usize,
    panels: usize,
) -> T {
    let (xs, ws) = gl_rule(order);
    let h = (b - a) / panels as f64;
    let mut total = T::zero();
    for p in 0..panels {
        let lo = a + h * p as f64;
        let c = lo + 0.5 * h;
        let mut s = T::zero();
        for (x, w) in xs.iter().zip(ws) {
            s = s + f(c + 0.5 * h * x) * *w;
        }
        total = total + s * (0.5 * h);
    }
    total
}

/// Pairwise (tree) summation: deterministic and with `O(log n)` error growth.
pub fn pairwise_sum<T: QuadValue>(xs: &[T]) -> T {
    if xs.len() <= 16 {
        return xs.iter().fold(T::zero(), |acc, &x| acc + x);
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}
