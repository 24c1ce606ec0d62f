//! The case `m = 3`, `a = 1`: the circle cross-section of the cone
//! `x_1^2 - x_2^2 - x_3^2 = 0` on the ellipsoid `sum alpha_j x_j^2 = 1`, the
//! conformal parametrization `Phi(s, t) = (w_j(t) x_j(s))` of the link of
//! the cone in S^5, and the explicit affine examples with `m = 3`.
//!
//! The conformal factor relating `dx/ds` to the vector product of the two
//! constraint normals is fixed to 1. It is unrelated to the turning point
//! `gamma` of the centred system.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::centred::{integrate_w, CentredParams, Signature};
use crate::elliptic::{complete_k, jacobi, jacobi_derivatives};
use crate::error::{invalid, Result, SlError};
use crate::ode::OdeOptions;

/// `(conj(w_2 w_3), -conj(w_3 w_1), -conj(w_1 w_2))`.
pub fn rhs_w3(w: &[Complex64; 3]) -> [Complex64; 3] {
    [
        (w[1] * w[2]).conj(),
        -(w[2] * w[0]).conj(),
        -(w[0] * w[1]).conj(),
    ]
}

/// The closed curve `C_+` with `x_1 > 0`, parametrized by Jacobi
/// elliptic functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossSection {
    pub alphas: [f64; 3],
    pub mu: f64,
    /// Elliptic modulus.
    pub nu: f64,
    /// True when `alpha_2 > alpha_3`, in which case the roles of `x_2`
    /// and `x_3` are exchanged.
    pub swapped: bool,
    /// Conformal factor, always 1.
    pub gamma: f64,
}

/// Values and `s`-derivatives of the three coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub x: [f64; 3],
    pub dx: [f64; 3],
}

pub fn cross_section(alphas: [f64; 3]) -> Result<CrossSection> {
    Signature::new(1, alphas.to_vec())?.require_normalized()?;
    let [a1, a2, a3] = alphas;
    let swapped = a2 > a3;
    let (mu, nu2) = if swapped {
        ((a1 + a2).sqrt(), (a2 - a3) / (a1 + a2))
    } else {
        ((a1 + a3).sqrt(), (a3 - a2) / (a1 + a3))
    };
    Ok(CrossSection {
        alphas,
        mu,
        nu: nu2.sqrt(),
        swapped,
        gamma: 1.0,
    })
}

impl CrossSection {
    /// Period in `s` of the curve.
    pub fn period(&self) -> Result<f64> {
        Ok(4.0 * complete_k(self.nu)? / self.mu)
    }

    pub fn at(&self, s: f64) -> Result<CurvePoint> {
        let [a1, a2, a3] = self.alphas;
        let j = jacobi(self.mu * s, self.nu)?;
        let d = jacobi_derivatives(&j, self.nu);
        let (p, q) = ((a1 + a2).powf(-0.5), (a1 + a3).powf(-0.5));
        let mu = self.mu;
        Ok(if self.swapped {
            CurvePoint {
                x: [q * j.dn, -p * j.sn, q * j.cn],
                dx: [q * mu * d.dn, -p * mu * d.sn, q * mu * d.cn],
            }
        } else {
            CurvePoint {
                x: [p * j.dn, p * j.cn, q * j.sn],
                dx: [p * mu * d.dn, p * mu * d.cn, q * mu * d.sn],
            }
        })
    }

    /// `v = x_3^2`.
    pub fn v(&self, s: f64) -> Result<f64> {
        Ok(self.at(s)?.x[2].powi(2))
    }

    /// Residuals of the ellipsoid and cone equations at `s`.
    pub fn constraint_residuals(&self, s: f64) -> Result<(f64, f64)> {
        let x = self.at(s)?.x;
        let [a1, a2, a3] = self.alphas;
        Ok((
            (a1 * x[0] * x[0] + a2 * x[1] * x[1] + a3 * x[2] * x[2] - 1.0).abs(),
            (x[0] * x[0] - x[1] * x[1] - x[2] * x[2]).abs(),
        ))
    }

    /// `dx/ds` minus the conformal vector field, given the derivative to test.
    pub fn conformal_defect(&self, x: &[f64; 3], dx: &[f64; 3]) -> f64 {
        let [a1, a2, a3] = self.alphas;
        let g = self.gamma;
        let want = [
            g * (a2 - a3) * x[1] * x[2],
            -g * (a1 + a3) * x[2] * x[0],
            g * (a1 + a2) * x[0] * x[1],
        ];
        (0..3).map(|i| (dx[i] - want[i]).abs()).fold(0.0, f64::max)
    }

    /// Defect of the curve ODE at `s` using finite differences with step `h`.
    pub fn ode_residual_fd(&self, s: f64, h: f64) -> Result<f64> {
        let p = self.at(s)?;
        let (f, b) = (self.at(s + h)?.x, self.at(s - h)?.x);
        let dx = [0, 1, 2].map(|i| (f[i] - b[i]) / (2.0 * h));
        Ok(self.conformal_defect(&p.x, &dx))
    }
}

/// `Phi` and its analytic partial derivatives on a grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConformalGrid {
    pub alphas: [f64; 3],
    pub big_a: f64,
    pub s: Vec<f64>,
    pub t: Vec<f64>,
    /// Indexed `[i_s * t.len() + i_t]`.
    pub phi: Vec<[Complex64; 3]>,
    pub dphi_ds: Vec<[Complex64; 3]>,
    pub dphi_dt: Vec<[Complex64; 3]>,
    /// `u(t)` recovered from `|w_1|^2 - alpha_1`.
    pub u: Vec<f64>,
    /// `v(s) = x_3(s)^2`.
    pub v: Vec<f64>,
}

/// Worst-case deviations from the conformality identities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConformalReport {
    /// `max ||Phi| - 1|`.
    pub sphere: f64,
    /// `max |g(Phi_s, Phi_t)|`.
    pub orthogonality: f64,
    /// `max ||Phi_s|^2 - |Phi_t|^2|`.
    pub equal_norms: f64,
    /// `max ||Phi_t|^2 - (alpha_3 - u + (alpha_2 - alpha_3)(alpha_1 + alpha_3) v)|`.
    pub norm_formula: f64,
}

fn as3(w: &[Complex64]) -> Result<[Complex64; 3]> {
    w.try_into()
        .map_err(|_| SlError::DimensionMismatch("expected three complex values".into()))
}

fn real_dot(a: &[Complex64; 3], b: &[Complex64; 3]) -> f64 {
    (0..3).map(|j| (a[j].conj() * b[j]).re).sum()
}

fn norm2(a: &[Complex64; 3]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

/// Evaluates `Phi(s, t)` on the given grids for the cone (`c = 0`) built
/// from `params`, which must have `m = 3` and `a = 1`.
pub fn conformal_map(params: &CentredParams, s: &[f64], t: &[f64], opts: OdeOptions) -> Result<ConformalGrid> {
    if params.m != 3 || params.a != 1 {
        return invalid("the conformal map needs m = 3 and a = 1");
    }
    if s.is_empty() || t.is_empty() {
        return invalid("empty grid");
    }
    if t.windows(2).any(|p| p[1] <= p[0]) {
        return invalid("t grid must be strictly increasing");
    }
    let alphas: [f64; 3] = params.alphas.clone().try_into().unwrap();
    let cs = cross_section(alphas)?;
    let w0 = params.initial_w()?;
    // integrate forwards and backwards from t = 0
    let mut ws: Vec<Option<[Complex64; 3]>> = vec![None; t.len()];
    let split = t.partition_point(|&x| x < 0.0);
    let fwd: Vec<f64> = std::iter::once(0.0).chain(t[split..].iter().copied()).collect();
    let bwd: Vec<f64> = std::iter::once(0.0).chain(t[..split].iter().rev().copied()).collect();
    for (times, forward) in [(fwd, true), (bwd, false)] {
        if times.len() < 2 {
            continue;
        }
        let tr = integrate_w(1, &w0, &times, opts)?;
        if let Some(te) = tr.escaped {
            return Err(SlError::BlowUp { t: te });
        }
        for (k, w) in tr.w.iter().enumerate().skip(1) {
            let idx = if forward { split + k - 1 } else { split - k };
            ws[idx] = Some(as3(w)?);
        }
    }
    let ws: Vec<[Complex64; 3]> = ws.into_iter().map(|w| w.expect("all times filled")).collect();
    let pts: Vec<CurvePoint> = s.iter().map(|&si| cs.at(si)).collect::<Result<_>>()?;
    let mut grid = ConformalGrid {
        alphas,
        big_a: params.big_a,
        s: s.to_vec(),
        t: t.to_vec(),
        phi: Vec::with_capacity(s.len() * t.len()),
        dphi_ds: Vec::with_capacity(s.len() * t.len()),
        dphi_dt: Vec::with_capacity(s.len() * t.len()),
        u: ws.iter().map(|w| w[0].norm_sqr() - alphas[0]).collect(),
        v: pts.iter().map(|p| p.x[2] * p.x[2]).collect(),
    };
    for p in &pts {
        for w in &ws {
            let dw = rhs_w3(w);
            grid.phi.push([0, 1, 2].map(|j| w[j] * p.x[j]));
            grid.dphi_ds.push([0, 1, 2].map(|j| w[j] * p.dx[j]));
            grid.dphi_dt.push([0, 1, 2].map(|j| dw[j] * p.x[j]));
        }
    }
    Ok(grid)
}

impl ConformalGrid {
    pub fn report(&self) -> ConformalReport {
        let [a1, a2, a3] = self.alphas;
        let nt = self.t.len();
        let mut r = ConformalReport {
            sphere: 0.0,
            orthogonality: 0.0,
            equal_norms: 0.0,
            norm_formula: 0.0,
        };
        for (k, phi) in self.phi.iter().enumerate() {
            let (is, it) = (k / nt, k % nt);
            let (ps, pt) = (&self.dphi_ds[k], &self.dphi_dt[k]);
            let formula = a3 - self.u[it] + (a2 - a3) * (a1 + a3) * self.v[is];
            r.sphere = r.sphere.max((norm2(phi).sqrt() - 1.0).abs());
            r.orthogonality = r.orthogonality.max(real_dot(ps, pt).abs());
            r.equal_norms = r.equal_norms.max((norm2(ps) - norm2(pt)).abs());
            r.norm_formula = r.norm_formula.max((norm2(pt) - formula).abs());
        }
        r
    }

    /// CSV with columns `s, t` and the real and imaginary parts of `Phi`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,t,re_z1,im_z1,re_z2,im_z2,re_z3,im_z3\n");
        let nt = self.t.len();
        for (k, phi) in self.phi.iter().enumerate() {
            let mut row = vec![self.s[k / nt], self.t[k % nt]];
            for z in phi {
                row.push(z.re);
                row.push(z.im);
            }
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Finite-difference conformality check at one grid point, with `w(t)`
/// advanced by the ODE. Returns `(orthogonality, equal_norms)`.
pub fn conformal_fd(params: &CentredParams, s: f64, t: f64, h: f64, opts: OdeOptions) -> Result<(f64, f64)> {
    let alphas: [f64; 3] = params
        .alphas
        .clone()
        .try_into()
        .map_err(|_| SlError::DimensionMismatch("m must be 3".into()))?;
    let cs = cross_section(alphas)?;
    let grid = conformal_map(params, &[s], &[t - h, t, t + h], opts)?;
    let x = |s| cs.at(s).map(|p| p.x);
    let (xm, x0, xp) = (x(s - h)?, x(s)?, x(s + h)?);
    let w: Vec<[Complex64; 3]> = grid
        .phi
        .iter()
        .map(|p| [0, 1, 2].map(|j| if x0[j] != 0.0 { p[j] / x0[j] } else { Complex64::new(0.0, 0.0) }))
        .collect();
    let ps: [Complex64; 3] = [0, 1, 2].map(|j| w[1][j] * (xp[j] - xm[j]) / (2.0 * h));
    let pt: [Complex64; 3] = [0, 1, 2].map(|j| (grid.phi[2][j] - grid.phi[0][j]) / (2.0 * h));
    Ok((real_dot(&ps, &pt).abs(), (norm2(&ps) - norm2(&pt)).abs()))
}

/// The two explicit families with `m = 3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Affine3Variant {
    /// `a = 2`: hyperbolic functions, quadric `x_1^2 + x_2^2 + 2 x_3 = 0`.
    A2,
    /// `a = 1`: trigonometric functions, quadric `x_1^2 - x_2^2 + 2 x_3 = 0`.
    A1,
}

/// Closed-form solution of the affine `m = 3` system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Affine3 {
    pub variant: Affine3Variant,
    #[serde(rename = "C")]
    pub c: Complex64,
    #[serde(rename = "D")]
    pub d: Complex64,
    #[serde(rename = "E")]
    pub e: Complex64,
}

fn ci(re: f64) -> Complex64 {
    Complex64::new(0.0, re)
}

impl Affine3 {
    pub fn new(variant: Affine3Variant, c: Complex64, d: Complex64, e: Complex64) -> Result<Self> {
        if c.norm() == 0.0 && d.norm() == 0.0 {
            return invalid("C and D cannot both vanish");
        }
        Ok(Affine3 { variant, c, d, e })
    }

    /// Constants matching initial data `w(0)` and `beta(0)`.
    pub fn from_initial(variant: Affine3Variant, w1: Complex64, w2: Complex64, beta0: Complex64) -> Result<Self> {
        let (c, d, e) = match variant {
            Affine3Variant::A2 => {
                let c = 0.5 * (w1 + w2.conj());
                let d = 0.5 * (w1 - w2.conj());
                (c, d, beta0 - 0.5 * c.norm_sqr() - 0.5 * d.norm_sqr())
            }
            Affine3Variant::A1 => {
                let c = 0.5 * (w1 - ci(1.0) * w2.conj());
                let d = 0.5 * (w1 + ci(1.0) * w2.conj());
                (c, d, beta0 - (c.conj() * d).re)
            }
        };
        Self::new(variant, c, d, e)
    }

    /// The conserved quantity `A`, with `d beta / dt = u'/2 - i A`.
    pub fn big_a(&self) -> f64 {
        match self.variant {
            Affine3Variant::A2 => -2.0 * (self.c * self.d.conj()).im,
            Affine3Variant::A1 => self.d.norm_sqr() - self.c.norm_sqr(),
        }
    }

    pub fn w(&self, t: f64) -> [Complex64; 2] {
        let (c, d) = (self.c, self.d);
        match self.variant {
            Affine3Variant::A2 => {
                let (p, q) = (t.exp(), (-t).exp());
                [c * p + d * q, c.conj() * p - d.conj() * q]
            }
            Affine3Variant::A1 => {
                let (p, q) = (Complex64::from_polar(1.0, t), Complex64::from_polar(1.0, -t));
                [c * p + d * q, ci(1.0) * d.conj() * p - ci(1.0) * c.conj() * q]
            }
        }
    }

    pub fn dw(&self, t: f64) -> [Complex64; 2] {
        let (c, d) = (self.c, self.d);
        match self.variant {
            Affine3Variant::A2 => {
                let (p, q) = (t.exp(), (-t).exp());
                [c * p - d * q, c.conj() * p + d.conj() * q]
            }
            Affine3Variant::A1 => {
                let (p, q) = (Complex64::from_polar(1.0, t), Complex64::from_polar(1.0, -t));
                [ci(1.0) * (c * p - d * q), -(d.conj() * p + c.conj() * q)]
            }
        }
    }

    pub fn beta(&self, t: f64) -> Complex64 {
        let (c, d, e) = (self.c, self.d, self.e);
        match self.variant {
            Affine3Variant::A2 => {
                0.5 * c.norm_sqr() * (2.0 * t).exp()
                    + 0.5 * d.norm_sqr() * (-2.0 * t).exp()
                    + ci(2.0 * (c * d.conj()).im * t)
                    + e
            }
            Affine3Variant::A1 => {
                0.5 * c * d.conj() * Complex64::from_polar(1.0, 2.0 * t)
                    + 0.5 * c.conj() * d * Complex64::from_polar(1.0, -2.0 * t)
                    + ci((c.norm_sqr() - d.norm_sqr()) * t)
                    + e
            }
        }
    }

    /// `conj(w_1 w_2)`, the derivative of `beta`.
    pub fn dbeta(&self, t: f64) -> Complex64 {
        let w = self.w(t);
        (w[0] * w[1]).conj()
    }

    /// Defect of the ODE system at `t`, using analytic derivatives.
    pub fn ode_residual(&self, t: f64) -> f64 {
        let w = self.w(t);
        let dw = self.dw(t);
        let sign = match self.variant {
            Affine3Variant::A2 => 1.0,
            Affine3Variant::A1 => -1.0,
        };
        let r1 = (dw[0] - w[1].conj()).norm();
        let r2 = (dw[1] - sign * w[0].conj()).norm();
        // the derivative of the closed-form beta, written out
        let db = self.dbeta(t);
        let analytic = match self.variant {
            Affine3Variant::A2 => {
                let (c, d) = (self.c, self.d);
                Complex64::new(
                    c.norm_sqr() * (2.0 * t).exp() - d.norm_sqr() * (-2.0 * t).exp(),
                    2.0 * (c * d.conj()).im,
                )
            }
            Affine3Variant::A1 => {
                let (c, d) = (self.c, self.d);
                ci(1.0) * c * d.conj() * Complex64::from_polar(1.0, 2.0 * t)
                    - ci(1.0) * c.conj() * d * Complex64::from_polar(1.0, -2.0 * t)
                    + ci(c.norm_sqr() - d.norm_sqr())
            }
        };
        r1.max(r2).max((db - analytic).norm())
    }

    fn sheet(&self, x1: f64, x2: f64) -> f64 {
        match self.variant {
            Affine3Variant::A2 => -0.5 * (x1 * x1 + x2 * x2),
            Affine3Variant::A1 => 0.5 * (x2 * x2 - x1 * x1),
        }
    }

    pub fn point(&self, x1: f64, x2: f64, t: f64) -> [Complex64; 3] {
        let w = self.w(t);
        [w[0] * x1, w[1] * x2, self.beta(t) + self.sheet(x1, x2)]
    }

    /// Partial derivatives in `x_1`, `x_2` and `t`.
    pub fn tangents(&self, x1: f64, x2: f64, t: f64) -> [[Complex64; 3]; 3] {
        let w = self.w(t);
        let dw = self.dw(t);
        let zero = Complex64::new(0.0, 0.0);
        let d2 = match self.variant {
            Affine3Variant::A2 => -x2,
            Affine3Variant::A1 => x2,
        };
        [
            [w[0], zero, Complex64::new(-x1, 0.0)],
            [zero, w[1], Complex64::new(d2, 0.0)],
            [dw[0] * x1, dw[1] * x2, self.dbeta(t)],
        ]
    }
}

/// Evaluates the explicit parametrization at each `(x_1, x_2, t)`.
pub fn affine3_closed(
    variant: Affine3Variant,
    c: Complex64,
    d: Complex64,
    e: Complex64,
    grid: &[[f64; 3]],
) -> Result<Vec<[Complex64; 3]>> {
    let sol = Affine3::new(variant, c, d, e)?;
    Ok(grid.iter().map(|p| sol.point(p[0], p[1], p[2])).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn rhs_at_ones() {
        let one = c(1.0, 0.0);
        assert_eq!(rhs_w3(&[one; 3]), [one, -one, -one]);
    }

    #[test]
    fn circular_cross_section() {
        let cs = cross_section([2.0 / 3.0, 4.0 / 3.0, 4.0 / 3.0]).unwrap();
        assert_eq!(cs.nu, 0.0);
        assert!(!cs.swapped);
        for k in 0..50 {
            let s = 0.13 * k as f64;
            let (e, q) = cs.constraint_residuals(s).unwrap();
            assert!(e < 1e-12 && q < 1e-12);
            let p = cs.at(s).unwrap();
            assert!(cs.conformal_defect(&p.x, &p.dx) < 1e-12);
        }
    }

    #[test]
    fn rejects_unnormalized() {
        assert!(cross_section([1.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn affine_closed_forms_solve_their_odes() {
        for variant in [Affine3Variant::A2, Affine3Variant::A1] {
            let s = Affine3::from_initial(variant, c(0.8, 0.3), c(-0.4, 0.9), c(0.1, 0.2)).unwrap();
            assert!((s.beta(0.0) - c(0.1, 0.2)).norm() < 1e-15);
            let w = s.w(0.0);
            assert!((w[0] - c(0.8, 0.3)).norm() < 1e-15);
            assert!((w[1] - c(-0.4, 0.9)).norm() < 1e-15);
            for &t in &[-0.7, 0.0, 0.4, 1.3] {
                assert!(s.ode_residual(t) < 1e-13, "{variant:?} at {t}");
            }
        }
    }
}
