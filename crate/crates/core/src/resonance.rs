//! Step-size classification against the resonance set of the splitting.
//!
//! A step tau is nonresonant for a given epsilon and threshold delta when
//! |sin(tau / eps^2)| >= delta, i.e. the phase tau / eps^2 keeps a margin
//! of at least asin(delta) from every integer multiple of pi. The phase
//! can reach 1e9 and beyond for small epsilon, where naive f64 reduction
//! modulo pi loses every meaningful digit, so the reduction runs in
//! double-double style with a two-term representation of pi.

use crate::{Error, Result};

const PI_HI: f64 = std::f64::consts::PI;
// Next f64 term of pi after PI_HI; together accurate to about 1e-32.
const PI_LO: f64 = 1.2246467991473532e-16;

// Exact product via FMA: a * b == p + e.
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let e = a.mul_add(b, -p);
    (p, e)
}

/// Reduce x >= 0 into [0, pi) with the two-term pi.
fn reduce_mod_pi(x: f64) -> f64 {
    let n = (x / PI_HI).round();
    if n == 0.0 {
        return x;
    }
    let (p, e) = two_prod(n, PI_HI);
    let mut r = x - p;
    r -= e;
    r -= n * PI_LO;
    if r < 0.0 {
        r += PI_HI;
        r += PI_LO;
    }
    if r >= PI_HI {
        r -= PI_HI;
        r -= PI_LO;
    }
    r.max(0.0)
}

/// tau / eps^2 reduced into [0, pi).
pub fn reduced_phase(tau: f64, epsilon: f64) -> f64 {
    reduce_mod_pi(tau / (epsilon * epsilon))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepClassification {
    pub tau: f64,
    pub epsilon: f64,
    pub delta: f64,
    /// tau / eps^2 mod pi, in [0, pi).
    pub reduced_phase: f64,
    /// |sin(tau / eps^2)|, the distance measure to the resonance set.
    pub margin: f64,
    pub nonresonant: bool,
    /// Margin within 1e-12 of delta: the verdict is not trustworthy.
    pub boundary: bool,
}

pub fn classify(tau: f64, epsilon: f64, delta: f64) -> Result<StepClassification> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::Param(format!("step size must be positive and finite, got {tau}")));
    }
    if !(epsilon.is_finite() && epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::Param(format!("epsilon must lie in (0, 1], got {epsilon}")));
    }
    if !(delta.is_finite() && delta > 0.0 && delta < 1.0) {
        return Err(Error::Param(format!("threshold must lie in (0, 1), got {delta}")));
    }
    let r = reduced_phase(tau, epsilon);
    let margin = r.sin().abs();
    Ok(StepClassification {
        tau,
        epsilon,
        delta,
        reduced_phase: r,
        margin,
        nonresonant: margin >= delta,
        boundary: (margin - delta).abs() < 1e-12,
    })
}

/// Interval form of the same test: the reduced phase must stay at least
/// asin(delta) away from 0 and pi. Kept as an independent cross-check of
/// the margin form.
pub fn classify_by_interval(tau: f64, epsilon: f64, delta: f64) -> Result<bool> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Param(format!("threshold must lie in (0, 1), got {delta}")));
    }
    let r = reduced_phase(tau, epsilon);
    let guard = delta.asin();
    Ok(r >= guard && r <= PI_HI - guard)
}

/// Geometric step ladder tau0 / ratio^m for m = 0 .. levels-1.
pub fn geometric_ladder(tau0: f64, ratio: f64, levels: usize) -> Result<Vec<f64>> {
    if !(tau0.is_finite() && tau0 > 0.0) {
        return Err(Error::Param(format!("ladder start must be positive, got {tau0}")));
    }
    if !(ratio.is_finite() && ratio > 1.0) {
        return Err(Error::Param(format!("ladder ratio must exceed 1, got {ratio}")));
    }
    if levels == 0 {
        return Err(Error::Param("ladder needs at least one level".into()));
    }
    let mut out = Vec::with_capacity(levels);
    let mut tau = tau0;
    for _ in 0..levels {
        out.push(tau);
        tau /= ratio;
    }
    Ok(out)
}
