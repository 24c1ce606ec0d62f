//! Explicit solution by quadrature: turning points, phase integrals,
//! the period `T` and the phase advances `beta_j`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use serde::{Deserialize, Serialize};

use super::{classify_case, Case, CentredParams, Signature, TIE_TOL};
use crate::error::{invalid, Result, SlError};
use crate::quadrature::integrate_adaptive;
use crate::roots::bracketed_root;

const QUAD_TOL: f64 = 1e-13;

/// `(Q(v) - Q(x0)) / (v - x0)`, evaluated without cancellation.
fn q_slope(sig: &Signature, x0: f64, v: f64) -> f64 {
    let m = sig.m();
    let mut total = 0.0;
    let mut left = 1.0;
    for k in 0..m {
        let right: f64 = (k + 1..m).map(|j| sig.factor(j, x0)).product();
        total += sig.sign(k) * left * right;
        left *= sig.factor(k, v);
    }
    total
}

/// Roots `gamma < 0 < delta` of `Q(u) = A^2` inside the admissible range.
pub fn turning_points(sig: &Signature, big_a: f64) -> Result<(f64, f64)> {
    sig.require_normalized()?;
    let amp = big_a.abs();
    let a_max = sig.a_max();
    if !(amp > 0.0 && amp < a_max) {
        return invalid(format!("turning points need 0 < |A| < {a_max}, got {big_a}"));
    }
    let target = 2.0 * amp.ln();
    let (lo, hi) = sig.u_range();
    let g = |v: f64| -> Result<f64> { Ok(sig.q(v).ln() - target) };
    let tol = |x: f64| 2.0 * f64::EPSILON * x.abs().max(1e-300);
    // Q -> 0 at the ends of the range, so log Q - 2 log A changes sign.
    let gamma = bracketed_root(g, lo * (1.0 - 1e-16), 0.0, tol(lo))?;
    let delta = bracketed_root(g, 0.0, hi * (1.0 - 1e-16), tol(hi))?;
    Ok((polish(sig, amp, gamma), polish(sig, amp, delta)))
}

/// A few Newton steps on `Q(v) - A^2`, kept only if they reduce the residual.
fn polish(sig: &Signature, amp: f64, mut v: f64) -> f64 {
    let a2 = amp * amp;
    for _ in 0..3 {
        let q = sig.q(v);
        let dq = q * sig.dlog_q(v);
        if dq == 0.0 {
            break;
        }
        let next = v - (q - a2) / dq;
        if (sig.q(next) - a2).abs() < (q - a2).abs() {
            v = next;
        } else {
            break;
        }
    }
    v
}

/// Elapsed time and phase changes along a monotone branch of `u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSolution {
    pub dthetas: Vec<f64>,
    pub dt: f64,
    pub error: f64,
}

/// Integrals `int dv / sqrt(Q - A^2)` and `int dv / ((alpha_j +- v) sqrt(Q - A^2))`
/// over `[u0, u1]`. `d0`, `d1` are `Q - A^2` at the endpoints (exactly zero at
/// turning points). The substitution `v = u0 + (u1 - u0) sin^2 psi` removes the
/// square-root singularities; near each end `Q - A^2` is expanded about that
/// end to avoid cancellation.
fn kernel(sig: &Signature, a2: f64, u0: f64, d0: f64, u1: f64, d1: f64) -> Result<(Vec<f64>, f64)> {
    let m = sig.m();
    let len = u1 - u0;
    let mut bad = false;
    // factors alpha_j +- v measured from the nearer end, which avoids
    // cancellation when an end sits close to a root of Q
    let f0: Vec<f64> = (0..m).map(|j| sig.factor(j, u0)).collect();
    let f1: Vec<f64> = (0..m).map(|j| sig.factor(j, u1)).collect();
    let r = integrate_adaptive(
        |psi, out| {
            let (s, c) = psi.sin_cos();
            let (d, lower) = if psi <= FRAC_PI_4 {
                (d0 + len * s * s * q_slope(sig, u0, u0 + len * s * s), true)
            } else {
                (d1 - len * c * c * q_slope(sig, u1, u1 - len * c * c), false)
            };
            let factor = |j: usize| {
                if lower {
                    f0[j] + sig.sign(j) * len * s * s
                } else {
                    f1[j] - sig.sign(j) * len * c * c
                }
            };
            if !(d > 0.0) {
                bad = true;
                out.iter_mut().for_each(|o| *o = 0.0);
                return;
            }
            let g = 2.0 * len * s * c / d.sqrt();
            out[0] = g;
            for j in 0..m {
                out[1 + j] = g / factor(j);
            }
        },
        0.0,
        FRAC_PI_2,
        m + 1,
        QUAD_TOL,
    )?;
    if bad {
        return invalid(format!(
            "Q(u) - A^2 is not positive on [{u0}, {u1}] (A^2 = {a2})"
        ));
    }
    Ok((r.value, r.error))
}

fn endpoint_gap(sig: &Signature, a2: f64, u: f64) -> Result<f64> {
    let d = sig.q(u) - a2;
    let scale = sig.q(0.0).max(a2);
    if d.abs() <= 1e-12 * scale {
        Ok(0.0)
    } else if d < 0.0 {
        invalid(format!("u = {u} lies outside the accessible range"))
    } else {
        Ok(d)
    }
}

/// Changes of time and of the phases `theta_j` while `u` moves monotonically
/// between `u0` and `u1`. The time change is positive; the phase changes have
/// the signs of `dtheta_j/dt` for `A > 0`.
pub fn quadrature_solution(sig: &Signature, big_a: f64, u0: f64, u1: f64) -> Result<QuadratureSolution> {
    let m = sig.m();
    let a2 = big_a * big_a;
    let (lo, hi) = sig.u_range();
    for u in [u0, u1] {
        if !(u > lo && u < hi) {
            return invalid(format!("u = {u} outside ({lo}, {hi})"));
        }
    }
    if u0 == u1 {
        return Ok(QuadratureSolution {
            dthetas: vec![0.0; m],
            dt: 0.0,
            error: 0.0,
        });
    }
    let (a, b) = if u0 < u1 { (u0, u1) } else { (u1, u0) };
    let (da, db) = (endpoint_gap(sig, a2, a)?, endpoint_gap(sig, a2, b)?);
    let (vals, err) = kernel(sig, a2, a, da, b, db)?;
    Ok(QuadratureSolution {
        dt: 0.5 * vals[0],
        dthetas: (0..m)
            .map(|j| -sig.sign(j) * 0.5 * big_a * vals[1 + j])
            .collect(),
        error: err * big_a.abs().max(1.0),
    })
}

/// Phase advances over one period and the period itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaResult {
    pub m: usize,
    pub a: usize,
    pub alphas: Vec<f64>,
    #[serde(rename = "A")]
    pub big_a: f64,
    pub betas: Vec<f64>,
    pub period: f64,
    pub gamma: f64,
    pub delta: f64,
    /// `|sum beta_j|`, zero in exact arithmetic.
    pub sum_residual: f64,
    pub error_estimate: f64,
}

/// Compute `beta_j` and `T` for case (d) parameters.
pub fn betas(p: &CentredParams) -> Result<BetaResult> {
    match classify_case(p)? {
        Case::D => {}
        other => {
            return invalid(format!(
                "phase advances are defined in case (d) only, got case {other:?}"
            ))
        }
    }
    let sig = p.signature();
    let amp = p.big_a.abs();
    let (gamma, delta) = turning_points(&sig, amp)?;
    let (vals, err) = kernel(&sig, amp * amp, gamma, 0.0, delta, 0.0)?;
    let mut betas: Vec<f64> = (0..p.m)
        .map(|j| -sig.sign(j) * amp * vals[1 + j])
        .collect();
    if p.big_a < 0.0 {
        betas.iter_mut().for_each(|b| *b = -*b);
    }
    let sum_residual = betas.iter().sum::<f64>().abs();
    Ok(BetaResult {
        m: p.m,
        a: p.a,
        alphas: p.alphas.clone(),
        big_a: p.big_a,
        betas,
        period: vals[0],
        gamma,
        delta,
        sum_residual,
        error_estimate: 2.0 * err * amp.max(1.0),
    })
}

/// Limits of `beta` as `A -> 0` and as `A -> A_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaLimits {
    pub small_a: Vec<f64>,
    pub large_a: Vec<f64>,
    /// Multiplicity of the smallest alpha among the first `a`.
    pub k: usize,
    /// Multiplicity of the smallest alpha among the last `m - a`.
    pub l: usize,
    /// Limit of the period as `A -> A_max`.
    pub large_a_period: f64,
}

fn ties(vals: &[f64]) -> Vec<bool> {
    let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    vals.iter()
        .map(|&v| (v - min).abs() <= TIE_TOL * min.abs().max(f64::MIN_POSITIVE))
        .collect()
}

/// Asymptotic phase advances. As `A -> 0`, `u` sweeps out the whole range,
/// which ends at the smallest alpha of each block; the letters attaining
/// that minimum share `-pi` (first block) and `+pi` (second block).
pub fn beta_limits(sig: &Signature) -> Result<BetaLimits> {
    sig.require_normalized()?;
    let m = sig.m();
    let a = sig.a;
    let first = ties(&sig.alphas[..a]);
    let second = ties(&sig.alphas[a..]);
    let k = first.iter().filter(|&&b| b).count();
    let l = second.iter().filter(|&&b| b).count();
    let mut small = vec![0.0; m];
    for j in 0..a {
        if first[j] {
            small[j] = -PI / k as f64;
        }
    }
    for j in a..m {
        if second[j - a] {
            small[j] = PI / l as f64;
        }
    }
    let s2: f64 = sig.alphas.iter().map(|x| x.powi(-2)).sum();
    let norm = (2.0 * s2).sqrt();
    let large = (0..m)
        .map(|j| -sig.sign(j) * 2.0 * PI / (sig.alphas[j] * norm))
        .collect();
    let prod: f64 = sig.alphas.iter().product();
    Ok(BetaLimits {
        small_a: small,
        large_a: large,
        k,
        l,
        large_a_period: 2.0 * PI / (2.0 * prod * s2).sqrt(),
    })
}

/// `beta` for a normalized signature at a given `A`, without the case checks
/// of [`betas`]. Used by scans.
pub fn betas_at(sig: &Signature, big_a: f64) -> Result<(Vec<f64>, f64)> {
    let (gamma, delta) = turning_points(sig, big_a)?;
    let amp = big_a.abs();
    let (vals, _) = kernel(sig, amp * amp, gamma, 0.0, delta, 0.0)?;
    let b = (0..sig.m())
        .map(|j| -sig.sign(j) * big_a * vals[1 + j])
        .collect();
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(SlError::NoConvergence("non-finite phase integral".into()));
    }
    Ok((b, vals[0]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn turning_points_example() {
        let sig = Signature::new(1, vec![1.0, 2.0, 2.0]).unwrap();
        let (g, d) = turning_points(&sig, 1.0).unwrap();
        assert!(g > -1.0 && g < 0.0);
        assert!(d > 0.0 && d < 2.0);
        assert!((sig.q(g) - 1.0).abs() < 1e-14);
        assert!((sig.q(d) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn slope_matches_difference_quotient() {
        let sig = Signature::new(2, vec![0.7, 1.3, 0.9, 1.1]).unwrap();
        let (x0, v) = (0.1, -0.25);
        let direct = (sig.q(v) - sig.q(x0)) / (v - x0);
        assert!((q_slope(&sig, x0, v) - direct).abs() < 1e-13);
    }

    #[test]
    fn two_dimensional_advances_are_pi() {
        let p = CentredParams::new(1, vec![1.5, 1.5], 0.7, 0.0).unwrap();
        let r = betas(&p).unwrap();
        assert!((r.betas[0] + PI).abs() < 1e-11);
        assert!((r.betas[1] - PI).abs() < 1e-11);
        assert!((r.period - PI).abs() < 1e-11);
    }

    #[test]
    fn limits_example() {
        let sig = Signature::new(1, vec![1.0, 2.0, 2.0]).unwrap();
        let l = beta_limits(&sig).unwrap();
        assert_eq!((l.k, l.l), (1, 2));
        assert!((l.small_a[0] + PI).abs() < 1e-15);
        assert!((l.small_a[1] - PI / 2.0).abs() < 1e-15);
        let s = 3f64.sqrt();
        assert!((l.large_a[0] + 2.0 * PI / s).abs() < 1e-14);
        assert!((l.large_a[1] - PI / s).abs() < 1e-14);
    }
}
