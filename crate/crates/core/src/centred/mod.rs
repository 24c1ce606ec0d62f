//! Evolving centred quadrics.
//!
//! The linear maps are diagonal, `phi_t = diag(w_1(t), ..., w_m(t))`, and
//! the evolution reduces to
//!
//! ```text
//! dw_j/dt = + conj(prod_{k != j} w_k)   (j <= a)
//! dw_j/dt = - conj(prod_{k != j} w_k)   (j >  a)
//! ```
//!
//! Indices in code are 0-based, so "j <= a" reads `j < a`.

mod betas;
mod periodic;

pub use betas::*;
pub use periodic::*;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, SlError};
use crate::ode::{Dopri5, OdeOptions, OdeStats};
use crate::roots::bracketed_root;

/// Relative tolerance used to decide ties and normalization.
pub const TIE_TOL: f64 = 1e-12;

/// Signature `a` and the shifted squared moduli `alpha_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Signature {
    pub a: usize,
    pub alphas: Vec<f64>,
}

impl Signature {
    pub fn new(a: usize, alphas: Vec<f64>) -> Result<Self> {
        let m = alphas.len();
        if m == 0 {
            return invalid("at least one alpha is required");
        }
        if a == 0 || a > m {
            return invalid(format!("signature a = {a} must lie in 1..={m}"));
        }
        if let Some(bad) = alphas.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
            return invalid(format!("alphas must be positive and finite, got {bad}"));
        }
        Ok(Signature { a, alphas })
    }

    pub fn m(&self) -> usize {
        self.alphas.len()
    }

    /// +1 for the first `a` letters, -1 for the rest.
    pub fn sign(&self, j: usize) -> f64 {
        if j < self.a {
            1.0
        } else {
            -1.0
        }
    }

    /// `alpha_j + u` or `alpha_j - u`, the squared modulus of `w_j`.
    pub fn factor(&self, j: usize, u: f64) -> f64 {
        self.alphas[j] + self.sign(j) * u
    }

    pub fn q(&self, u: f64) -> f64 {
        (0..self.m()).map(|j| self.factor(j, u)).product()
    }

    /// `Q'(u) / Q(u)`.
    pub fn dlog_q(&self, u: f64) -> f64 {
        (0..self.m()).map(|j| self.sign(j) / self.factor(j, u)).sum()
    }

    /// Open interval on which every factor is positive.
    pub fn u_range(&self) -> (f64, f64) {
        let lo = -(0..self.a)
            .map(|j| self.alphas[j])
            .fold(f64::INFINITY, f64::min);
        let hi = (self.a..self.m())
            .map(|j| self.alphas[j])
            .fold(f64::INFINITY, f64::min);
        (lo, hi)
    }

    /// `sum_{j<=a} 1/alpha_j - sum_{j>a} 1/alpha_j`.
    pub fn normalization_residual(&self) -> f64 {
        (0..self.m()).map(|j| self.sign(j) / self.alphas[j]).sum()
    }

    pub fn is_normalized(&self) -> bool {
        let scale: f64 = self.alphas.iter().map(|x| 1.0 / x).sum();
        self.normalization_residual().abs() <= 1e-10 * scale
    }

    pub fn require_normalized(&self) -> Result<()> {
        if self.a == self.m() {
            return invalid("normalization needs a < m");
        }
        if !self.is_normalized() {
            return Err(SlError::NotNormalized(format!(
                "sum of signed reciprocals is {:e}",
                self.normalization_residual()
            )));
        }
        Ok(())
    }

    /// `sqrt(alpha_1 ... alpha_m)`, the largest admissible `A`.
    pub fn a_max(&self) -> f64 {
        self.alphas.iter().product::<f64>().sqrt()
    }

    /// Rescale `alpha -> kappa^2 alpha`.
    pub fn scaled(&self, kappa: f64) -> Self {
        Signature {
            a: self.a,
            alphas: self.alphas.iter().map(|x| kappa * kappa * x).collect(),
        }
    }
}

/// Parameters of one evolving-quadric family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentredParams {
    pub m: usize,
    pub a: usize,
    pub alphas: Vec<f64>,
    #[serde(rename = "A")]
    pub big_a: f64,
    #[serde(default)]
    pub c: f64,
}

impl CentredParams {
    pub fn new(a: usize, alphas: Vec<f64>, big_a: f64, c: f64) -> Result<Self> {
        let p = CentredParams {
            m: alphas.len(),
            a,
            alphas,
            big_a,
            c,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m != self.alphas.len() {
            return Err(SlError::DimensionMismatch(format!(
                "m = {} but {} alphas given",
                self.m,
                self.alphas.len()
            )));
        }
        if self.m < 2 {
            return invalid("m must be at least 2");
        }
        Signature::new(self.a, self.alphas.clone())?;
        if !self.big_a.is_finite() || !self.c.is_finite() {
            return invalid("A and c must be finite");
        }
        Ok(())
    }

    pub fn signature(&self) -> Signature {
        Signature {
            a: self.a,
            alphas: self.alphas.clone(),
        }
    }

    /// Initial data with `u(0) = 0` and the whole phase `theta(0)` placed
    /// on `w_1`, chosen so that `Q(0)^{1/2} sin theta(0) = A`.
    pub fn initial_w(&self) -> Result<Vec<Complex64>> {
        let sig = self.signature();
        let q0 = sig.q(0.0);
        let s = self.big_a / q0.sqrt();
        if s.abs() > 1.0 + 1e-12 {
            return invalid(format!(
                "A = {} exceeds Q(0)^(1/2) = {}",
                self.big_a,
                q0.sqrt()
            ));
        }
        let theta = s.clamp(-1.0, 1.0).asin();
        Ok((0..self.m)
            .map(|j| {
                let r = sig.factor(j, 0.0).sqrt();
                if j == 0 {
                    Complex64::from_polar(r, theta)
                } else {
                    Complex64::new(r, 0.0)
                }
            })
            .collect())
    }
}

/// Right-hand side of the w-system.
pub fn rhs_w(a: usize, w: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); w.len()];
    rhs_w_into(a, w, &mut out);
    out
}

/// Same as [`rhs_w`], writing into `out`.
pub fn rhs_w_into(a: usize, w: &[Complex64], out: &mut [Complex64]) {
    let m = w.len();
    // prefix/suffix products avoid dividing by possibly-zero entries
    let mut prefix = vec![Complex64::new(1.0, 0.0); m + 1];
    for j in 0..m {
        prefix[j + 1] = prefix[j] * w[j];
    }
    let mut suffix = Complex64::new(1.0, 0.0);
    for j in (0..m).rev() {
        let others = (prefix[j] * suffix).conj();
        out[j] = if j < a { others } else { -others };
        suffix *= w[j];
    }
}

pub(crate) fn pack(w: &[Complex64]) -> Vec<f64> {
    w.iter().flat_map(|z| [z.re, z.im]).collect()
}

pub(crate) fn unpack(y: &[f64], m: usize) -> Vec<Complex64> {
    (0..m).map(|j| Complex64::new(y[2 * j], y[2 * j + 1])).collect()
}

/// Solve for the shift `lambda` that normalizes `alpha_j = |w_j(0)|^2 -+ lambda`.
///
/// Returns `lambda` (which is also `u(0)`) and the normalized alphas.
pub fn normalize_lambda(w0_sq: &[f64], a: usize) -> Result<(f64, Vec<f64>)> {
    let m = w0_sq.len();
    if a == 0 || a >= m {
        return invalid(format!("normalization requires 1 <= a < m, got a = {a}, m = {m}"));
    }
    if let Some(bad) = w0_sq.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
        return invalid(format!("|w_j(0)|^2 must be positive, got {bad}"));
    }
    let hi = w0_sq[..a].iter().copied().fold(f64::INFINITY, f64::min);
    let lo = -w0_sq[a..].iter().copied().fold(f64::INFINITY, f64::min);
    let alphas = |lam: f64| -> Vec<f64> {
        (0..m)
            .map(|j| if j < a { w0_sq[j] - lam } else { w0_sq[j] + lam })
            .collect()
    };
    let f = |lam: f64| -> Result<f64> {
        let al = alphas(lam);
        Ok((0..m)
            .map(|j| if j < a { 1.0 / al[j] } else { -1.0 / al[j] })
            .sum())
    };
    // f increases from -inf to +inf on (lo, hi)
    let width = hi - lo;
    let (l, h) = (lo + width * 1e-15, hi - width * 1e-15);
    let lam = bracketed_root(f, l, h, 4.0 * f64::EPSILON * width.max(1.0))?;
    let al = alphas(lam);
    let sig = Signature::new(a, al.clone())?;
    let scale: f64 = al.iter().map(|x| 1.0 / x).sum();
    if sig.normalization_residual().abs() > 1e-12 * scale {
        return Err(SlError::NoConvergence(format!(
            "normalization residual {:e}",
            sig.normalization_residual()
        )));
    }
    Ok((lam, al))
}

/// Reduced description of a point of the w-system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reduced {
    pub u: f64,
    pub thetas: Vec<f64>,
    pub theta: f64,
    #[serde(rename = "A")]
    pub big_a: f64,
}

/// Express `w` through `u`, the phases `theta_j` and the invariant `A`.
pub fn reduce(w: &[Complex64], sig: &Signature) -> Result<Reduced> {
    if w.len() != sig.m() {
        return Err(SlError::DimensionMismatch(format!(
            "{} values of w for m = {}",
            w.len(),
            sig.m()
        )));
    }
    let us: Vec<f64> = (0..sig.m())
        .map(|j| sig.sign(j) * (w[j].norm_sqr() - sig.alphas[j]))
        .collect();
    let u = us.iter().sum::<f64>() / us.len() as f64;
    let scale = 1.0 + sig.alphas.iter().copied().fold(0.0, f64::max);
    if us.iter().any(|x| (x - u).abs() > 1e-8 * scale) {
        return invalid(format!("w is inconsistent with alphas: u estimates {us:?}"));
    }
    let thetas: Vec<f64> = w.iter().map(|z| z.arg()).collect();
    let theta: f64 = thetas.iter().sum();
    let big_a = sig.q(u).max(0.0).sqrt() * theta.sin();
    Ok(Reduced {
        u,
        thetas,
        theta,
        big_a,
    })
}

/// Time derivatives of the reduced variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedRates {
    pub du: f64,
    pub dthetas: Vec<f64>,
    pub dtheta: f64,
}

pub fn rhs_reduced(sig: &Signature, u: f64, thetas: &[f64]) -> ReducedRates {
    let theta: f64 = thetas.iter().sum();
    let rq = sig.q(u).max(0.0).sqrt();
    let (s, c) = theta.sin_cos();
    let dthetas: Vec<f64> = (0..sig.m())
        .map(|j| -sig.sign(j) * rq * s / sig.factor(j, u))
        .collect();
    ReducedRates {
        du: 2.0 * rq * c,
        dtheta: dthetas.iter().sum(),
        dthetas,
    }
}

/// The four qualitative cases of the centred evolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Case {
    /// `A = 0`: contained in a special Lagrangian plane.
    A,
    /// `a = m`, `c > 0`, `A > 0`: escapes to infinity in both directions.
    B,
    /// `A` maximal: `u` constant and the phases rotate linearly.
    C,
    /// Generic: `u` and `theta` periodic.
    D,
}

/// Classify parameters. `A < 0` is treated through `|A|`, since flipping
/// `theta_1` by `pi` and reversing time changes the sign of `A`.
pub fn classify_case(p: &CentredParams) -> Result<Case> {
    p.validate()?;
    let sig = p.signature();
    let amp = p.big_a.abs();
    let a_max = sig.a_max();
    if amp <= 1e-14 * a_max.max(1.0) {
        return Ok(Case::A);
    }
    if p.a == p.m {
        if p.c <= 0.0 {
            return invalid("a = m with A > 0 requires c > 0");
        }
        return Ok(Case::B);
    }
    sig.require_normalized()?;
    if amp > a_max * (1.0 + 1e-10) {
        return invalid(format!("A = {amp} exceeds the maximum {a_max}"));
    }
    if (a_max - amp).abs() <= 1e-10 * a_max {
        return Ok(Case::C);
    }
    Ok(Case::D)
}

/// Closed-form solution in case (c): `u = 0`, `theta_j = theta_j(0) -+ A t / alpha_j`.
pub fn case_c_w(sig: &Signature, thetas0: &[f64], t: f64) -> Vec<Complex64> {
    let amp = sig.a_max();
    (0..sig.m())
        .map(|j| {
            let th = thetas0[j] - sig.sign(j) * amp * t / sig.alphas[j];
            Complex64::from_polar(sig.alphas[j].sqrt(), th)
        })
        .collect()
}

/// Sampled solution of the w-system with continuously lifted phases.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WTrajectory {
    pub a: usize,
    pub times: Vec<f64>,
    pub w: Vec<Vec<Complex64>>,
    pub thetas: Vec<Vec<f64>>,
    /// Time at which the blow-up guard fired, if any.
    pub escaped: Option<f64>,
    pub stats: OdeStats,
}

/// Right-hand side on the augmented real state `(w, theta)`, where the
/// lifted phases obey `theta_j' = Im(conj(w_j) w_j') / |w_j|^2`.
pub(crate) fn augmented_rhs(a: usize, m: usize) -> impl FnMut(f64, &[f64], &mut [f64]) {
    let mut w = vec![Complex64::new(0.0, 0.0); m];
    let mut dw = vec![Complex64::new(0.0, 0.0); m];
    move |_t, y, d| {
        for j in 0..m {
            w[j] = Complex64::new(y[2 * j], y[2 * j + 1]);
        }
        rhs_w_into(a, &w, &mut dw);
        for j in 0..m {
            d[2 * j] = dw[j].re;
            d[2 * j + 1] = dw[j].im;
            let r2 = w[j].norm_sqr();
            d[2 * m + j] = if r2 > 0.0 {
                (w[j].conj() * dw[j]).im / r2
            } else {
                0.0
            };
        }
    }
}

fn augmented_state(w0: &[Complex64]) -> Vec<f64> {
    let mut y = pack(w0);
    y.extend(w0.iter().map(|z| z.arg()));
    y
}

/// Integrate the w-system and record the state at each of `times`
/// (monotone, starting at the initial time). Stops early, recording the
/// escape time, if the blow-up guard fires.
pub fn integrate_w(
    a: usize,
    w0: &[Complex64],
    times: &[f64],
    opts: OdeOptions,
) -> Result<WTrajectory> {
    let m = w0.len();
    if a == 0 || a > m {
        return invalid(format!("signature a = {a} must lie in 1..={m}"));
    }
    if times.is_empty() {
        return invalid("at least one output time is required");
    }
    let y0 = augmented_state(w0);
    let mut solver = Dopri5::new(augmented_rhs(a, m), times[0], &y0, opts);
    let mut traj = WTrajectory {
        a,
        times: Vec::with_capacity(times.len()),
        w: Vec::with_capacity(times.len()),
        thetas: Vec::with_capacity(times.len()),
        escaped: None,
        stats: OdeStats::default(),
    };
    for &t in times {
        match solver.advance_to(t) {
            Ok(()) => {}
            Err(SlError::BlowUp { t }) => {
                traj.escaped = Some(t);
                break;
            }
            Err(e) => return Err(e),
        }
        let y = solver.y();
        traj.times.push(t);
        traj.w.push(unpack(y, m));
        traj.thetas.push(y[2 * m..].to_vec());
    }
    traj.stats = solver.stats();
    Ok(traj)
}

/// State at a single time.
pub fn w_at(a: usize, w0: &[Complex64], t: f64, opts: OdeOptions) -> Result<Vec<Complex64>> {
    let tr = integrate_w(a, w0, &[0.0, t], opts)?;
    match tr.escaped {
        Some(te) => Err(SlError::BlowUp { t: te }),
        None => Ok(tr.w[1].clone()),
    }
}

/// Forward and backward escape times for case (b), found by integrating
/// until the blow-up guard fires.
pub fn escape_times(p: &CentredParams, horizon: f64, opts: OdeOptions) -> Result<(Option<f64>, Option<f64>)> {
    let w0 = p.initial_w()?;
    let fwd = integrate_w(p.a, &w0, &[0.0, horizon], opts)?;
    let bwd = integrate_w(p.a, &w0, &[0.0, -horizon], opts)?;
    Ok((bwd.escaped, fwd.escaped))
}

/// Period and phase advances measured directly from the w-system: the
/// time between successive minima of `u` and the change of the lifted
/// phases over it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OdePeriod {
    pub period: f64,
    pub betas: Vec<f64>,
    /// Start of the measured period.
    pub t0: f64,
    /// `A` recomputed at both ends.
    pub invariant_drift: f64,
}

pub fn period_from_ode(p: &CentredParams, opts: OdeOptions) -> Result<OdePeriod> {
    let w0 = p.initial_w()?;
    period_from_w(p.a, &w0, opts)
}

/// Same as [`period_from_ode`] for arbitrary initial data.
pub fn period_from_w(a: usize, w0: &[Complex64], opts: OdeOptions) -> Result<OdePeriod> {
    let m = w0.len();
    let y0 = augmented_state(w0);
    let mut solver = Dopri5::new(augmented_rhs(a, m), 0.0, &y0, opts);
    // du/dt = 2 Re(w_1 ... w_m); a minimum of u is an upward zero crossing.
    let g = move |y: &[f64]| -> f64 {
        unpack(y, m)
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, z| acc * z)
            .re
    };
    let horizon = 1e6;
    let first = solver
        .advance_until(horizon, g)?
        .ok_or_else(|| SlError::NoConvergence("no minimum of u found".into()))?;
    // step past the event so the next crossing is a new one
    let nudge = solver.t() + 1e-9 * (1.0 + solver.t().abs());
    solver.advance_to(nudge)?;
    let second = solver
        .advance_until(horizon, g)?
        .ok_or_else(|| SlError::NoConvergence("second minimum of u not found".into()))?;
    let (t1, y1) = first;
    let (t2, y2) = second;
    let im = |y: &[f64]| {
        unpack(y, m)
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, z| acc * z)
            .im
    };
    Ok(OdePeriod {
        period: t2 - t1,
        betas: (0..m).map(|j| y2[2 * m + j] - y1[2 * m + j]).collect(),
        t0: t1,
        invariant_drift: (im(&y2) - im(&y1)).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn rhs_examples() {
        let d = rhs_w(1, &[c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0)]);
        assert_eq!(d, vec![c(1.0, 0.0), c(-1.0, 0.0), c(-1.0, 0.0)]);
        let d = rhs_w(1, &[c(0.0, 1.0), c(1.0, 0.0)]);
        assert!((d[0] - c(1.0, 0.0)).norm() < 1e-15);
        assert!((d[1] - c(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn normalization_example() {
        let (lam, al) = normalize_lambda(&[1.0, 1.0, 1.0], 1).unwrap();
        assert!((lam - 1.0 / 3.0).abs() < 1e-14);
        assert!((al[0] - 2.0 / 3.0).abs() < 1e-14);
        assert!((al[1] - 4.0 / 3.0).abs() < 1e-14);
        assert!((al[2] - 4.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn normalization_rejects_a_equal_m() {
        assert!(normalize_lambda(&[1.0, 2.0], 2).is_err());
    }

    #[test]
    fn case_classification() {
        let p = CentredParams::new(1, vec![1.0, 2.0, 2.0], 1.0, 0.0).unwrap();
        assert_eq!(classify_case(&p).unwrap(), Case::D);
        let p = CentredParams::new(1, vec![1.0, 2.0, 2.0], 2.0, 0.0).unwrap();
        assert_eq!(classify_case(&p).unwrap(), Case::C);
        let p = CentredParams::new(1, vec![1.0, 2.0, 2.0], 0.0, 0.0).unwrap();
        assert_eq!(classify_case(&p).unwrap(), Case::A);
        let p = CentredParams::new(3, vec![1.0, 2.0, 2.0], 0.5, 1.0).unwrap();
        assert_eq!(classify_case(&p).unwrap(), Case::B);
        let p = CentredParams::new(1, vec![1.0, 1.0, 1.0], 0.5, 1.0).unwrap();
        assert!(matches!(classify_case(&p), Err(SlError::NotNormalized(_))));
    }

    #[test]
    fn reduction_roundtrip() {
        let sig = Signature::new(1, vec![1.0, 2.0, 2.0]).unwrap();
        let u = 0.3f64;
        let th = [0.4, -0.1, 0.25];
        let w: Vec<Complex64> = (0..3)
            .map(|j| Complex64::from_polar(sig.factor(j, u).sqrt(), th[j]))
            .collect();
        let r = reduce(&w, &sig).unwrap();
        assert!((r.u - u).abs() < 1e-14);
        assert!((r.theta - 0.55).abs() < 1e-14);
        assert!((r.big_a - sig.q(u).sqrt() * 0.55f64.sin()).abs() < 1e-14);
    }
}
