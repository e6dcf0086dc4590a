//! Quadrature over Γ₀(4)\ℍ as six translates of the standard SL₂(ℤ) domain.

use super::{invariant_density, CosetSystem, HalfFormEvaluator};
use crate::error::{Error, Result};
use crate::quad::{gl_rule, QuadValue};
use num_complex::Complex64;
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureValue {
    pub value: f64,
    pub error: f64,
}

/// Breakpoints in `y` above the arc; the last panel maps `[Y_LAST, ∞)` to `v ∈ (0, 1]`.
const Y_BREAKS: [f64; 6] = [1.25, 2.5, 5.0, 10.0, 20.0, 40.0];

/// Coarse and fine Gauss–Legendre orders; their gap is the error estimate.
pub const RULE_ORDERS: [usize; 2] = [20, 28];

/// Nodes and weights (including `dy/y²`) of `∫_{|x|≤1/2, |w|≥1} f(w) dx dy/y²`
/// with `n`-point rules per panel.
fn standard_nodes(n: usize) -> Vec<(Complex64, f64)> {
    let (gx, gw) = gl_rule(n);
    let mut out = Vec::with_capacity(n * n * (Y_BREAKS.len() + 1));
    for (xi, wi) in gx.iter().zip(gw) {
        let x = 0.5 * xi;
        let wx = 0.5 * wi;
        let mut lo = (1.0 - x * x).sqrt();
        for &hi in &Y_BREAKS {
            let half = 0.5 * (hi - lo);
            for (yj, wj) in gx.iter().zip(gw) {
                let y = lo + half * (1.0 + yj);
                out.push((Complex64::new(x, y), wx * half * wj / (y * y)));
            }
            lo = hi;
        }
        // y = lo/v, dy/y² = dv/lo.
        for (vj, wj) in gx.iter().zip(gw) {
            let v = 0.5 * (1.0 + vj);
            out.push((Complex64::new(x, lo / v), wx * 0.5 * wj / lo));
        }
    }
    out
}

/// Quadrature nodes covering Γ₀(4)\ℍ (six translates of the standard domain).
pub fn gamma0_4_nodes(n: usize) -> Vec<(Complex64, f64)> {
    let base = standard_nodes(n);
    CosetSystem::generate()
        .reps()
        .iter()
        .flat_map(|r| base.iter().map(move |&(w, wt)| (r.act(w), wt)))
        .collect()
}

/// Weighted sum of `f` over the nodes, evaluated in parallel and reduced in order.
pub fn apply_rule<T: QuadValue + Send>(
    nodes: &[(Complex64, f64)],
    f: impl Fn(Complex64) -> T + Sync,
) -> T {
    let vals: Vec<T> = nodes.par_iter().map(|&(z, w)| f(z) * w).collect();
    vals.into_iter().fold(T::zero(), |a, b| a + b)
}

fn two_rules<T: QuadValue + Send>(
    nodes: impl Fn(usize) -> Vec<(Complex64, f64)>,
    f: impl Fn(Complex64) -> T + Sync,
) -> (T, f64) {
    let coarse = apply_rule(&nodes(RULE_ORDERS[0]), &f);
    let fine = apply_rule(&nodes(RULE_ORDERS[1]), &f);
    (fine, (fine - coarse).magnitude())
}

/// `∬_{Γ₀(4)\ℍ} f dvol` for Γ₀(4)-invariant `f`; the error is the gap
/// between 20- and 28-point rules.
pub fn domain_integral(f: impl Fn(Complex64) -> f64 + Sync) -> QuadratureValue {
    let (value, error) = two_rules(gamma0_4_nodes, f);
    QuadratureValue { value, error }
}

/// Complex-valued version of [`domain_integral`]; returns `(value, error)`.
pub fn domain_integral_complex(f: impl Fn(Complex64) -> Complex64 + Sync) -> (Complex64, f64) {
    two_rules(gamma0_4_nodes, f)
}

/// `∬_{SL₂(ℤ)\ℍ} f dvol` over the standard domain, same error convention.
pub fn sl2_domain_integral(f: impl Fn(Complex64) -> f64 + Sync) -> QuadratureValue {
    let (value, error) = two_rules(standard_nodes, f);
    QuadratureValue { value, error }
}

/// `vol(Γ₀(4)\ℍ)`, which should be `2π`.
pub fn fundamental_volume() -> QuadratureValue {
    domain_integral(|_| 1.0)
}

/// `∬ y^{k+1/2} |g|² dvol`.
pub fn petersson_norm(g: &HalfFormEvaluator) -> Result<QuadratureValue> {
    let q = domain_integral(|z| invariant_density(g, z));
    if !(q.value > 0.0) || !q.value.is_finite() {
        return Err(Error::Consistency(format!(
            "Petersson norm is not positive: {}",
            q.value
        )));
    }
    Ok(q)
}

/// `g / √⟨g, g⟩` together with `⟨g, g⟩`.
pub fn petersson_l2_normalize(g: &HalfFormEvaluator) -> Result<(HalfFormEvaluator, f64)> {
    let q = petersson_norm(g)?;
    if q.error > 1e-6 * q.value {
        return Err(Error::Quadrature {
            achieved: q.error / q.value,
            target: 1e-6,
        });
    }
    Ok((g.scaled(1.0 / q.value.sqrt()), q.value))
}
