//! Evolving the paraboloids `x_1^2 + .. + x_a^2 - x_{a+1}^2 - .. - x_{m-1}^2 + 2 x_m = 0`.
//!
//! The maps are `(x_1, .., x_m) -> (w_1 x_1, .., w_{m-1} x_{m-1}, x_m + beta)`.
//! The `w_j` obey the centred system on `m - 1` letters, and
//! `beta' = conj(w_1 .. w_{m-1})`, so that `beta(t) = C + u(t)/2 - i A t`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::centred::{betas_at, classify_case, quadrature_solution, rhs_w_into, Case, CentredParams, QuadratureSolution, Signature};
use crate::error::{invalid, Result, SlError};
use crate::ode::{Dopri5, OdeOptions, OdeStats};

/// Parameters of one paraboloid family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineParams {
    pub m: usize,
    pub a: usize,
    /// `alpha_1 .. alpha_{m-1}`.
    pub alphas: Vec<f64>,
    #[serde(rename = "A")]
    pub big_a: f64,
    /// `C = beta(0) - u(0)/2`.
    #[serde(rename = "C", default)]
    pub c_const: Complex64,
}

impl AffineParams {
    pub fn new(a: usize, alphas: Vec<f64>, big_a: f64, c_const: Complex64) -> Result<Self> {
        let p = AffineParams {
            m: alphas.len() + 1,
            a,
            alphas,
            big_a,
            c_const,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 3 || self.alphas.len() + 1 != self.m {
            return Err(SlError::DimensionMismatch(format!(
                "m = {} needs m - 1 alphas and m >= 3, got {}",
                self.m,
                self.alphas.len()
            )));
        }
        if 2 * self.a + 1 < self.m || self.a + 1 > self.m {
            return invalid(format!(
                "a = {} must satisfy (m - 1)/2 <= a <= m - 1 for m = {}",
                self.a, self.m
            ));
        }
        Signature::new(self.a, self.alphas.clone())?;
        if !self.big_a.is_finite() || !self.c_const.re.is_finite() || !self.c_const.im.is_finite() {
            return invalid("A and C must be finite");
        }
        Ok(())
    }

    pub fn signature(&self) -> Signature {
        Signature {
            a: self.a,
            alphas: self.alphas.clone(),
        }
    }

    /// The centred parameters on the first `m - 1` letters.
    pub fn centred(&self) -> Result<CentredParams> {
        CentredParams::new(self.a, self.alphas.clone(), self.big_a, 1.0)
    }

    /// Initial state with `u(0) = 0`, so `beta(0) = C`.
    pub fn initial_state(&self) -> Result<AffineState> {
        Ok(AffineState {
            w: self.centred()?.initial_w()?,
            beta: self.c_const,
        })
    }
}

/// The letters `w_j` and the translation `beta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineState {
    pub w: Vec<Complex64>,
    pub beta: Complex64,
}

/// Derivatives `(dw/dt, d beta/dt)`.
pub fn rhs_affine(w: &[Complex64], a: usize) -> (Vec<Complex64>, Complex64) {
    let mut dw = vec![Complex64::new(0.0, 0.0); w.len()];
    rhs_w_into(a, w, &mut dw);
    let prod = w.iter().fold(Complex64::new(1.0, 0.0), |acc, z| acc * z);
    (dw, prod.conj())
}

/// `beta(t) = beta(0) - u(0)/2 + u/2 - i A t`.
pub fn beta_closed(u: f64, u0: f64, t: f64, big_a: f64, beta0: Complex64) -> Complex64 {
    beta0 + Complex64::new(0.5 * (u - u0), -big_a * t)
}

/// The qualitative cases of the paraboloid evolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "case", rename_all = "lowercase")]
pub enum AffineCase {
    /// `A = 0`: part of a special Lagrangian plane.
    A,
    /// `a = m - 1`, `A != 0`: paraboloids escape to infinity, in finite
    /// time when `m >= 4`.
    B { finite_interval: bool },
    /// Maximal `A`: perpendicular symmetry.
    C,
    /// `u` periodic, `beta` drifting by `-i A T` every period.
    D,
}

impl AffineCase {
    pub fn never_periodic(&self) -> bool {
        matches!(self, AffineCase::D)
    }

    pub fn description(&self) -> &'static str {
        match self {
            AffineCase::A => "contained in a special Lagrangian plane",
            AffineCase::B { finite_interval: true } => "escapes to infinity on a bounded interval",
            AffineCase::B { finite_interval: false } => "exists for all t, u unbounded in both directions",
            AffineCase::C => "perpendicular symmetry, u constant",
            AffineCase::D => "u periodic, never periodic as a whole",
        }
    }
}

pub fn classify_affine_case(p: &AffineParams) -> Result<AffineCase> {
    p.validate()?;
    Ok(match classify_case(&p.centred()?)? {
        Case::A => AffineCase::A,
        Case::B => AffineCase::B {
            finite_interval: p.m >= 4,
        },
        Case::C => AffineCase::C,
        Case::D => AffineCase::D,
    })
}

/// Signed changes of `t` and `theta_j` while `u` runs from `u0` to `u1`
/// on a branch with `theta` in `(-pi/2, pi/2)`.
pub fn quadrature_affine(p: &AffineParams, u0: f64, u1: f64) -> Result<QuadratureSolution> {
    p.validate()?;
    let mut q = quadrature_solution(&p.signature(), p.big_a, u0, u1)?;
    if u1 < u0 {
        q.dt = -q.dt;
        q.dthetas.iter_mut().for_each(|d| *d = -*d);
    }
    Ok(q)
}

/// Sampled solution of the `(w, beta)` system.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AffineTrajectory {
    pub a: usize,
    pub times: Vec<f64>,
    pub w: Vec<Vec<Complex64>>,
    pub beta: Vec<Complex64>,
    /// Continuously lifted phases of the `w_j`.
    pub thetas: Vec<Vec<f64>>,
    pub escaped: Option<f64>,
    pub stats: OdeStats,
}

fn affine_rhs(a: usize, k: usize) -> impl FnMut(f64, &[f64], &mut [f64]) {
    let mut w = vec![Complex64::new(0.0, 0.0); k];
    let mut dw = vec![Complex64::new(0.0, 0.0); k];
    move |_t, y, d| {
        for j in 0..k {
            w[j] = Complex64::new(y[2 * j], y[2 * j + 1]);
        }
        rhs_w_into(a, &w, &mut dw);
        let prod = w.iter().fold(Complex64::new(1.0, 0.0), |acc, z| acc * z).conj();
        for j in 0..k {
            d[2 * j] = dw[j].re;
            d[2 * j + 1] = dw[j].im;
            let r2 = w[j].norm_sqr();
            d[2 * k + 2 + j] = if r2 > 0.0 { (w[j].conj() * dw[j]).im / r2 } else { 0.0 };
        }
        d[2 * k] = prod.re;
        d[2 * k + 1] = prod.im;
    }
}

/// Integrates from `state` at `times[0]`, recording every time in `times`.
pub fn integrate_affine(a: usize, state: &AffineState, times: &[f64], opts: OdeOptions) -> Result<AffineTrajectory> {
    let k = state.w.len();
    if k < 2 || a == 0 || a > k {
        return invalid(format!("need at least two letters and 1 <= a <= {k}"));
    }
    if times.is_empty() {
        return invalid("at least one output time is required");
    }
    let mut y0: Vec<f64> = state.w.iter().flat_map(|z| [z.re, z.im]).collect();
    y0.extend([state.beta.re, state.beta.im]);
    y0.extend(state.w.iter().map(|z| z.arg()));
    let mut solver = Dopri5::new(affine_rhs(a, k), times[0], &y0, opts);
    let mut out = AffineTrajectory {
        a,
        times: Vec::new(),
        w: Vec::new(),
        beta: Vec::new(),
        thetas: Vec::new(),
        escaped: None,
        stats: OdeStats::default(),
    };
    for &t in times {
        match solver.advance_to(t) {
            Ok(()) => {}
            Err(SlError::BlowUp { t }) => {
                out.escaped = Some(t);
                break;
            }
            Err(e) => return Err(e),
        }
        let y = solver.y();
        out.times.push(t);
        out.w.push((0..k).map(|j| Complex64::new(y[2 * j], y[2 * j + 1])).collect());
        out.beta.push(Complex64::new(y[2 * k], y[2 * k + 1]));
        out.thetas.push(y[2 * k + 2..].to_vec());
    }
    out.stats = solver.stats();
    Ok(out)
}

impl AffineTrajectory {
    /// `u(t) = |w_1|^2 - alpha_1`.
    pub fn u(&self, alphas: &[f64]) -> Vec<f64> {
        self.w.iter().map(|w| w[0].norm_sqr() - alphas[0]).collect()
    }

    /// CSV with columns `t`, the `w_j`, `beta` and the lifted phases.
    pub fn to_csv(&self) -> String {
        let k = self.w.first().map_or(0, |w| w.len());
        let mut head = vec!["t".to_string()];
        for j in 0..k {
            head.push(format!("re_w{}", j + 1));
            head.push(format!("im_w{}", j + 1));
        }
        head.push("re_beta".into());
        head.push("im_beta".into());
        for j in 0..k {
            head.push(format!("theta{}", j + 1));
        }
        let mut s = head.join(",");
        s.push('\n');
        for i in 0..self.times.len() {
            let mut row = vec![self.times[i]];
            for z in &self.w[i] {
                row.extend([z.re, z.im]);
            }
            row.extend([self.beta[i].re, self.beta[i].im]);
            row.extend(&self.thetas[i]);
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }
}

/// Drift of `beta` over one period of `u` in case (d), compared with the
/// predicted translation `-i A T`. Returns `(T, |beta(T) - beta(0) + i A T|)`.
pub fn translation_defect(p: &AffineParams, opts: OdeOptions) -> Result<(f64, f64)> {
    if classify_affine_case(p)? != AffineCase::D {
        return invalid("translation check applies to case (d)");
    }
    let (_, period) = betas_at(&p.signature(), p.big_a)?;
    let s = p.initial_state()?;
    let tr = integrate_affine(p.a, &s, &[0.0, period], opts)?;
    if let Some(t) = tr.escaped {
        return Err(SlError::BlowUp { t });
    }
    let drift = tr.beta[1] - tr.beta[0] + Complex64::new(0.0, p.big_a * period);
    Ok((period, drift.norm()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn rhs_examples() {
        let one = c(1.0, 0.0);
        let (dw, db) = rhs_affine(&[one, one], 2);
        assert_eq!(dw, vec![one, one]);
        assert_eq!(db, one);
        let (dw, db) = rhs_affine(&[one, one], 1);
        assert_eq!(dw, vec![one, -one]);
        assert_eq!(db, one);
    }

    #[test]
    fn beta_closed_at_zero() {
        assert_eq!(beta_closed(0.3, 0.3, 0.0, 2.0, c(1.0, -1.0)), c(1.0, -1.0));
    }

    #[test]
    fn case_labels() {
        let p = AffineParams::new(2, vec![1.0, 1.0], 0.0, c(0.0, 0.0)).unwrap();
        assert_eq!(classify_affine_case(&p).unwrap(), AffineCase::A);
        let p = AffineParams::new(2, vec![1.0, 1.0], 0.5, c(0.0, 0.0)).unwrap();
        assert_eq!(
            classify_affine_case(&p).unwrap(),
            AffineCase::B { finite_interval: false }
        );
        let p = AffineParams::new(3, vec![1.0, 1.0, 1.0], 0.5, c(0.0, 0.0)).unwrap();
        assert_eq!(
            classify_affine_case(&p).unwrap(),
            AffineCase::B { finite_interval: true }
        );
        assert!(AffineParams::new(1, vec![1.0, 1.0, 1.0], 0.5, c(0.0, 0.0)).is_err());
    }
}
