//! Meshes of the constructed families and numerical checks of the special
//! Lagrangian conditions `omega|_L = 0`, `Im Omega|_L = 0`.
//!
//! Every family here has the form `N = { phi_t(x) : t in I, x in P }` with
//! `phi_t(x) = A(t) x + t0(t)`. At a point the tangent frame is
//! `(A'(t) x + t0'(t), A(t) v_1, .., A(t) v_{m-1})` for a basis `v_k` of
//! `T_x P`, so analytic frames need only the maps and their rates.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::affine::{integrate_affine, AffineParams, AffineState};
use crate::centred::{case_c_w, classify_case, integrate_w, rhs_w, Case, CentredParams, Signature};
use crate::error::{invalid, Result, SlError};
use crate::evolver::EvolMap;
use crate::linalg::{det_complex, orthogonal_complement};
use crate::multilinear::{eval_omega, from_complex, to_complex};
use crate::ode::OdeOptions;
use crate::threefold::{Affine3, Affine3Variant, ConformalGrid};

pub const FORMAT: &str = "slmesh-1";
/// Frames with `det(Gram) / prod |v_i|^2` below this are skipped.
pub const DEGENERATE_GRAM: f64 = 1e-14;
const NORMALIZATION: &str = "frame orthonormalized (QR); residuals per unit volume";

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

// ---------------------------------------------------------------------------
// residuals

/// `(max_{i<j} |omega(e_i, e_j)|, |Im Omega(e)|)` for an orthonormalized
/// copy `e` of the frame, or `None` if the frame is degenerate.
pub fn frame_residuals(frame: &[Vec<f64>]) -> Option<[f64; 2]> {
    let m = frame.len();
    if m == 0 || frame.iter().any(|v| v.len() != 2 * m) {
        return None;
    }
    let v = DMatrix::from_fn(2 * m, m, |r, c| frame[c][r]);
    let norms: Vec<f64> = (0..m).map(|c| v.column(c).norm()).collect();
    if norms.iter().any(|n| !(*n > 0.0) || !n.is_finite()) {
        return None;
    }
    let qr = v.qr();
    let r = qr.r();
    let ratio: f64 = (0..m).map(|i| (r[(i, i)] / norms[i]).powi(2)).product();
    if !(ratio >= DEGENERATE_GRAM) {
        return None;
    }
    let q = qr.q();
    let cols: Vec<Vec<f64>> = (0..m).map(|c| q.column(c).iter().copied().collect()).collect();
    let mut om: f64 = 0.0;
    for i in 0..m {
        for j in i + 1..m {
            om = om.max(eval_omega(&cols[i], &cols[j], m).expect("frame sizes").abs());
        }
    }
    let zs: Vec<Vec<Complex64>> = cols.iter().map(|c| to_complex(c)).collect();
    let refs: Vec<&[Complex64]> = zs.iter().map(|z| z.as_slice()).collect();
    Some([om, det_complex(&refs).im.abs()])
}

/// Summary of special Lagrangian residuals over a set of samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SLReport {
    pub max_omega_residual: f64,
    pub mean_omega_residual: f64,
    pub max_im_omega_residual: f64,
    pub mean_im_omega_residual: f64,
    pub normalization: String,
    pub sample_count: usize,
    /// Samples dropped because their frame was degenerate.
    pub skipped: usize,
}

impl SLReport {
    pub fn from_residuals(res: &[Option<[f64; 2]>]) -> Self {
        let good: Vec<[f64; 2]> = res.iter().flatten().copied().collect();
        let k = good.len().max(1) as f64;
        SLReport {
            max_omega_residual: good.iter().map(|r| r[0]).fold(0.0, f64::max),
            mean_omega_residual: good.iter().map(|r| r[0]).sum::<f64>() / k,
            max_im_omega_residual: good.iter().map(|r| r[1]).fold(0.0, f64::max),
            mean_im_omega_residual: good.iter().map(|r| r[1]).sum::<f64>() / k,
            normalization: NORMALIZATION.into(),
            sample_count: good.len(),
            skipped: res.len() - good.len(),
        }
    }

    pub fn max_residual(&self) -> f64 {
        self.max_omega_residual.max(self.max_im_omega_residual)
    }
}

/// A smooth map from parameters to `C^m = R^{2m}` (interleaved).
pub trait Parametrization: Sync {
    fn m(&self) -> usize;
    fn point(&self, p: &[f64]) -> Result<Vec<f64>>;
    /// Analytic partial derivatives, one per parameter, if known.
    fn frame(&self, _p: &[f64]) -> Result<Option<Vec<Vec<f64>>>> {
        Ok(None)
    }
}

/// Central-difference partial derivatives with step `h`.
pub fn fd_frame(par: &dyn Parametrization, p: &[f64], h: f64) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(p.len());
    let mut q = p.to_vec();
    for k in 0..p.len() {
        q[k] = p[k] + h;
        let fp = par.point(&q)?;
        q[k] = p[k] - h;
        let fm = par.point(&q)?;
        q[k] = p[k];
        out.push(fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect());
    }
    Ok(out)
}

/// How frames are obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tangents {
    Analytic,
    FiniteDifference(f64),
}

pub fn sl_residuals(par: &dyn Parametrization, samples: &[Vec<f64>], tangents: Tangents) -> Result<SLReport> {
    let res: Vec<Option<[f64; 2]>> = samples
        .par_iter()
        .map(|p| -> Result<Option<[f64; 2]>> {
            let frame = match tangents {
                Tangents::Analytic => par
                    .frame(p)?
                    .ok_or_else(|| SlError::InvalidInput("no analytic frame available".into()))?,
                Tangents::FiniteDifference(h) => fd_frame(par, p, h)?,
            };
            Ok(frame_residuals(&frame))
        })
        .collect::<Result<_>>()?;
    Ok(SLReport::from_residuals(&res))
}

/// Distance from a point of `C^m` to the plane `diag(e^{i theta_j}) R^m`.
pub fn distance_to_plane(v: &[f64], phases: &[f64]) -> f64 {
    to_complex(v)
        .iter()
        .zip(phases)
        .map(|(z, th)| (z * Complex64::from_polar(1.0, -th)).im.powi(2))
        .sum::<f64>()
        .sqrt()
}

// ---------------------------------------------------------------------------
// charts on quadrics

#[derive(Debug, Clone, Copy, PartialEq)]
enum Axis {
    /// Polar angle in `(0, pi)`.
    Polar,
    /// Last angle of a sphere, in `[0, 2 pi]`.
    Circle,
    Line,
    Radius,
}

fn sphere_axes(k: usize) -> Vec<Axis> {
    match k {
        0 => vec![],
        _ => {
            let mut v = vec![Axis::Polar; k - 1];
            v.push(Axis::Circle);
            v
        }
    }
}

/// Hyperspherical coordinates on `S^k`, `k = angles.len()`.
fn sphere(angles: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(angles.len() + 1);
    let mut s = 1.0;
    for a in angles {
        out.push(s * a.cos());
        s *= a.sin();
    }
    out.push(s);
    out
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Coordinates on the quadrics being evolved.
///
/// `Quadric` is `x_1^2 + .. + x_a^2 - x_{a+1}^2 - .. - x_m^2 = c`:
/// `S^{a-1} x R^{m-a}` for `c > 0` (one sheet when `a = 1`), `R^a x S^{m-a-1}`
/// for `c < 0` and `(0, R] x S^{a-1} x S^{m-a-1}` for the cone `c = 0`.
/// `Paraboloid` is `x_1^2 + .. + x_a^2 - .. - x_{m-1}^2 + 2 x_m = 0`, a graph
/// over `R^{m-1}`. `radius` truncates the non-compact directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Chart {
    Quadric { m: usize, a: usize, c: f64, radius: f64 },
    Paraboloid { m: usize, a: usize, radius: f64 },
}

impl Chart {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Chart::Quadric { m, a, c, radius } => {
                if m < 2 || a == 0 || a > m {
                    return invalid(format!("quadric chart needs m >= 2 and 1 <= a <= m, got m = {m}, a = {a}"));
                }
                if a == m && c <= 0.0 {
                    return Err(SlError::EmptyLevelSet(format!("definite quadric with c = {c}")));
                }
                if !c.is_finite() || !(radius > 0.0 && radius.is_finite()) {
                    return invalid("c must be finite and the radius positive");
                }
            }
            Chart::Paraboloid { m, a, radius } => {
                if m < 2 || a == 0 || a >= m {
                    return invalid(format!("paraboloid chart needs 1 <= a <= m - 1, got m = {m}, a = {a}"));
                }
                if !(radius > 0.0 && radius.is_finite()) {
                    return invalid("the radius must be positive");
                }
            }
        }
        Ok(())
    }

    /// Dimension of the ambient `R^n`.
    pub fn n(&self) -> usize {
        match *self {
            Chart::Quadric { m, .. } | Chart::Paraboloid { m, .. } => m,
        }
    }

    /// Number of chart parameters, `n - 1`.
    pub fn dim(&self) -> usize {
        self.n() - 1
    }

    fn radius(&self) -> f64 {
        match *self {
            Chart::Quadric { radius, .. } | Chart::Paraboloid { radius, .. } => radius,
        }
    }

    fn axes_kinds(&self) -> Vec<Axis> {
        match *self {
            Chart::Quadric { m, a, c, .. } => {
                if c > 0.0 {
                    let mut v = sphere_axes(a - 1);
                    v.extend(vec![Axis::Line; m - a]);
                    v
                } else if c < 0.0 {
                    let mut v = vec![Axis::Line; a];
                    v.extend(sphere_axes(m - a - 1));
                    v
                } else {
                    let mut v = vec![Axis::Radius];
                    v.extend(sphere_axes(a - 1));
                    v.extend(sphere_axes(m - a - 1));
                    v
                }
            }
            Chart::Paraboloid { m, .. } => vec![Axis::Line; m - 1],
        }
    }

    pub fn point(&self, q: &[f64]) -> Vec<f64> {
        match *self {
            Chart::Quadric { a, c, .. } => {
                if c > 0.0 {
                    let (ang, y) = q.split_at(a - 1);
                    let rho = (c + y.iter().map(|v| v * v).sum::<f64>()).sqrt();
                    let mut x: Vec<f64> = sphere(ang).into_iter().map(|s| rho * s).collect();
                    x.extend_from_slice(y);
                    x
                } else if c < 0.0 {
                    let (y, ang) = q.split_at(a);
                    let rho = (-c + y.iter().map(|v| v * v).sum::<f64>()).sqrt();
                    let mut x = y.to_vec();
                    x.extend(sphere(ang).into_iter().map(|s| rho * s));
                    x
                } else {
                    let r = q[0];
                    let (a1, a2) = q[1..].split_at(a - 1);
                    sphere(a1).into_iter().chain(sphere(a2)).map(|s| r * s).collect()
                }
            }
            Chart::Paraboloid { a, .. } => {
                let mut x = q.to_vec();
                let h: f64 = q
                    .iter()
                    .enumerate()
                    .map(|(j, v)| if j < a { v * v } else { -v * v })
                    .sum();
                x.push(-0.5 * h);
                x
            }
        }
    }

    pub fn normal(&self, x: &[f64]) -> Vec<f64> {
        match *self {
            Chart::Quadric { a, .. } => x
                .iter()
                .enumerate()
                .map(|(j, v)| if j < a { *v } else { -v })
                .collect(),
            Chart::Paraboloid { a, m, .. } => (0..m)
                .map(|j| match j {
                    j if j + 1 == m => 1.0,
                    j if j < a => x[j],
                    j => -x[j],
                })
                .collect(),
        }
    }

    /// Orthonormal basis of the tangent space at `x`.
    pub fn tangent(&self, x: &[f64]) -> Vec<Vec<f64>> {
        orthogonal_complement(&[self.normal(x)], self.n())
    }

    /// Grid values along each parameter axis.
    pub fn axes(&self, res: usize) -> Vec<Vec<f64>> {
        let r = self.radius();
        let res = res.max(1);
        self.axes_kinds()
            .into_iter()
            .map(|k| match k {
                Axis::Polar => (0..res).map(|i| (i as f64 + 0.5) * std::f64::consts::PI / res as f64).collect(),
                Axis::Circle => linspace(0.0, std::f64::consts::TAU, res + 1),
                Axis::Line => linspace(-r, r, res + 1),
                Axis::Radius => (1..=res).map(|i| r * i as f64 / res as f64).collect(),
            })
            .collect()
    }

    pub fn random_params<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let r = self.radius();
        self.axes_kinds()
            .into_iter()
            .map(|k| match k {
                Axis::Polar => rng.gen_range(0.0..std::f64::consts::PI),
                Axis::Circle => rng.gen_range(0.0..std::f64::consts::TAU),
                Axis::Line => rng.gen_range(-r..r),
                Axis::Radius => rng.gen_range(0.1 * r..r),
            })
            .collect()
    }
}

// ---------------------------------------------------------------------------
// mesh

/// A sampled piece of a submanifold on a tensor-product parameter grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    pub format: String,
    pub version: String,
    #[serde(default)]
    pub label: String,
    pub m: usize,
    /// Grid size along each parameter axis; axis 0 is `t` where present.
    pub shape: Vec<usize>,
    pub params: Vec<Vec<f64>>,
    /// Points of `R^{2m}`, `(x_1, y_1, .., x_m, y_m)`.
    pub vertices: Vec<Vec<f64>>,
    /// Quadrilaterals over the first two axes of the grid.
    pub faces: Vec<[usize; 4]>,
    /// Analytic-frame residuals `[omega, Im Omega]` per vertex.
    #[serde(default)]
    pub residuals: Option<Vec<Option<[f64; 2]>>>,
    /// Set when the evolution escaped before the end of the time span.
    #[serde(default)]
    pub truncated_at: Option<f64>,
    /// Free-form record of how the mesh was produced.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<serde_json::Value>,
}

fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for k in (0..shape.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * shape[k + 1];
    }
    s
}

fn multi_index(mut i: usize, shape: &[usize]) -> Vec<usize> {
    let mut idx = vec![0; shape.len()];
    for k in (0..shape.len()).rev() {
        idx[k] = i % shape[k];
        i /= shape[k];
    }
    idx
}

fn grid_faces(shape: &[usize]) -> Vec<[usize; 4]> {
    if shape.len() < 2 || shape[0] < 2 || shape[1] < 2 {
        return vec![];
    }
    let st = strides(shape);
    let rest: usize = shape[2..].iter().product();
    let mut faces = Vec::new();
    for r in 0..rest {
        let base: usize = multi_index(r, &shape[2..])
            .iter()
            .zip(&st[2..])
            .map(|(i, s)| i * s)
            .sum();
        for i in 0..shape[0] - 1 {
            for j in 0..shape[1] - 1 {
                let v = base + i * st[0] + j * st[1];
                faces.push([v, v + st[0], v + st[0] + st[1], v + st[1]]);
            }
        }
    }
    faces
}

/// Point and optional analytic frame for one grid node.
pub type NodeValue = (Vec<f64>, Option<Vec<Vec<f64>>>);

impl Mesh {
    /// Builds a mesh by evaluating `eval(index, params)` at every node of
    /// the product grid `axes`.
    pub fn from_grid<F>(m: usize, label: &str, axes: &[Vec<f64>], eval: F) -> Result<Mesh>
    where
        F: Fn(&[usize], &[f64]) -> Result<NodeValue> + Sync,
    {
        let shape: Vec<usize> = axes.iter().map(|a| a.len()).collect();
        if shape.is_empty() || shape.contains(&0) {
            return invalid("mesh grid has an empty axis");
        }
        let total: usize = shape.iter().product();
        let nodes: Vec<(Vec<f64>, Vec<f64>, Option<[f64; 2]>, bool)> = (0..total)
            .into_par_iter()
            .map(|i| -> Result<_> {
                let idx = multi_index(i, &shape);
                let p: Vec<f64> = idx.iter().zip(axes).map(|(k, a)| a[*k]).collect();
                let (v, frame) = eval(&idx, &p)?;
                let has = frame.is_some();
                let r = frame.and_then(|f| frame_residuals(&f));
                Ok((p, v, r, has))
            })
            .collect::<Result<_>>()?;
        let analytic = nodes.iter().all(|n| n.3);
        let mut mesh = Mesh {
            format: FORMAT.into(),
            version: crate::VERSION.into(),
            label: label.into(),
            m,
            faces: grid_faces(&shape),
            shape,
            params: Vec::with_capacity(total),
            vertices: Vec::with_capacity(total),
            residuals: None,
            truncated_at: None,
            provenance: None,
        };
        let mut res = Vec::with_capacity(total);
        for (p, v, r, _) in nodes {
            mesh.params.push(p);
            mesh.vertices.push(v);
            res.push(r);
        }
        if analytic {
            mesh.residuals = Some(res);
        }
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn validate(&self) -> Result<()> {
        if self.format != FORMAT {
            return Err(SlError::Format(format!("expected format {FORMAT}, got {}", self.format)));
        }
        let total: usize = self.shape.iter().product();
        if self.vertices.len() != total || self.params.len() != total {
            return Err(SlError::Format("vertex count does not match the grid shape".into()));
        }
        if let Some(v) = self.vertices.iter().find(|v| v.len() != 2 * self.m) {
            return Err(SlError::Format(format!("vertex of length {} in C^{}", v.len(), self.m)));
        }
        if self.params.iter().any(|p| p.len() != self.shape.len()) {
            return Err(SlError::Format("parameter tuple of wrong length".into()));
        }
        if self.vertices.iter().flatten().any(|x| !x.is_finite()) {
            return Err(SlError::Format("non-finite vertex coordinate".into()));
        }
        if self.faces.iter().flatten().any(|&i| i >= total) {
            return Err(SlError::Format("face index out of range".into()));
        }
        if let Some(r) = &self.residuals {
            if r.len() != total {
                return Err(SlError::Format("residual count does not match the grid".into()));
            }
        }
        Ok(())
    }

    /// Report built from the stored analytic-frame residuals.
    pub fn analytic_report(&self) -> Option<SLReport> {
        self.residuals.as_ref().map(|r| SLReport::from_residuals(r))
    }

    /// Residuals with frames estimated from grid neighbours: central
    /// differences inside, second-order one-sided differences at edges.
    pub fn fd_report(&self) -> Result<SLReport> {
        self.validate()?;
        if self.shape.len() != self.m {
            return invalid(format!(
                "need an {}-dimensional grid to estimate tangents, mesh has {} axes",
                self.m,
                self.shape.len()
            ));
        }
        if self.shape.contains(&1) {
            return invalid("every grid axis needs at least two nodes");
        }
        let st = strides(&self.shape);
        let total = self.vertices.len();
        let res: Vec<Option<[f64; 2]>> = (0..total)
            .into_par_iter()
            .map(|i| {
                let idx = multi_index(i, &self.shape);
                let frame: Vec<Vec<f64>> = (0..self.m)
                    .map(|k| {
                        let n = self.shape[k];
                        let at = |j: usize| i - idx[k] * st[k] + j * st[k];
                        let (p, v) = (&self.params, &self.vertices);
                        let diff = |a: usize, b: usize| -> Vec<f64> {
                            let h = p[b][k] - p[a][k];
                            v[b].iter().zip(&v[a]).map(|(x, y)| (x - y) / h).collect()
                        };
                        let j = idx[k];
                        if j > 0 && j + 1 < n {
                            diff(at(j - 1), at(j + 1))
                        } else if n < 3 {
                            diff(at(0), at(1))
                        } else {
                            // f'(x0) = (-3 f0 + 4 f1 - f2) / (2h) on a uniform axis
                            let (a, b, c) = if j == 0 { (at(0), at(1), at(2)) } else { (at(n - 1), at(n - 2), at(n - 3)) };
                            let h = p[b][k] - p[a][k];
                            (0..v[a].len())
                                .map(|r| (-3.0 * v[a][r] + 4.0 * v[b][r] - v[c][r]) / (2.0 * h))
                                .collect()
                        }
                    })
                    .collect();
                frame_residuals(&frame)
            })
            .collect();
        Ok(SLReport::from_residuals(&res))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Mesh> {
        let mesh: Mesh = serde_json::from_str(text)?;
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn csv_header(&self) -> String {
        let mut cols = vec!["t".to_string()];
        cols.extend((1..self.shape.len()).map(|k| format!("param{k}")));
        for j in 1..=self.m {
            cols.push(format!("x{j}"));
            cols.push(format!("y{j}"));
        }
        cols.push("res_omega".into());
        cols.push("res_imomega".into());
        cols.join(",")
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.csv_header();
        s.push('\n');
        for (i, (p, v)) in self.params.iter().zip(&self.vertices).enumerate() {
            let mut cells: Vec<String> = p.iter().chain(v).map(|x| format!("{x:.16e}")).collect();
            match self.residuals.as_ref().and_then(|r| r[i]) {
                Some([a, b]) => cells.extend([format!("{a:.16e}"), format!("{b:.16e}")]),
                None => cells.extend([String::new(), String::new()]),
            }
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    /// Vertices mapped to `R^3`.
    pub fn project(&self, proj: Option<&Projection>) -> Result<Vec<[f64; 3]>> {
        let proj = match proj {
            Some(p) => p.clone(),
            None if self.m <= 3 => Projection::Pca,
            None => return invalid("a projection (coordinate triple or pca) is required for m > 3"),
        };
        match proj {
            Projection::Coords(ix) => {
                if ix.iter().any(|&i| i >= 2 * self.m) {
                    return invalid(format!("projection index out of range for R^{}", 2 * self.m));
                }
                Ok(self.vertices.iter().map(|v| ix.map(|i| v[i])).collect())
            }
            Projection::Pca => Ok(pca3(&self.vertices, 2 * self.m)),
        }
    }

    pub fn to_obj(&self, proj: Option<&Projection>) -> Result<String> {
        let pts = self.project(proj)?;
        let mut s = format!("# {} {}\n", FORMAT, self.label);
        for p in &pts {
            writeln!(s, "v {:.16e} {:.16e} {:.16e}", p[0], p[1], p[2]).unwrap();
        }
        for f in &self.faces {
            writeln!(s, "f {} {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1, f[3] + 1).unwrap();
        }
        Ok(s)
    }

    pub fn to_ply(&self, proj: Option<&Projection>) -> Result<String> {
        let pts = self.project(proj)?;
        let mut s = String::from("ply\nformat ascii 1.0\n");
        writeln!(s, "comment {} {}", FORMAT, self.label).unwrap();
        writeln!(s, "element vertex {}", pts.len()).unwrap();
        s.push_str("property double x\nproperty double y\nproperty double z\n");
        writeln!(s, "element face {}", self.faces.len()).unwrap();
        s.push_str("property list uchar int vertex_indices\nend_header\n");
        for p in &pts {
            writeln!(s, "{:.16e} {:.16e} {:.16e}", p[0], p[1], p[2]).unwrap();
        }
        for f in &self.faces {
            writeln!(s, "4 {} {} {} {}", f[0], f[1], f[2], f[3]).unwrap();
        }
        Ok(s)
    }

    pub fn export(&self, format: ExportFormat, path: &Path, proj: Option<&Projection>) -> Result<()> {
        let text = match format {
            ExportFormat::Obj => self.to_obj(proj)?,
            ExportFormat::Ply => self.to_ply(proj)?,
            ExportFormat::Csv => self.to_csv(),
            ExportFormat::Json => self.to_json()?,
        };
        std::fs::write(path, text)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Obj,
    Ply,
    Csv,
    Json,
}

impl FromStr for ExportFormat {
    type Err = SlError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "obj" => Ok(ExportFormat::Obj),
            "ply" => Ok(ExportFormat::Ply),
            "csv" => Ok(ExportFormat::Csv),
            "json" => Ok(ExportFormat::Json),
            _ => invalid(format!("unknown mesh format {s:?}")),
        }
    }
}

/// Map from `R^{2m}` to `R^3` for polygon formats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Projection {
    /// Keep three real coordinates (0-based indices into `x_1, y_1, ..`).
    Coords([usize; 3]),
    /// Principal components, signs fixed so the largest entry is positive.
    Pca,
}

impl FromStr for Projection {
    type Err = SlError;
    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("pca") {
            return Ok(Projection::Pca);
        }
        let ix: Vec<usize> = s
            .split(',')
            .map(|t| t.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| SlError::InvalidInput(format!("bad projection {s:?}: {e}")))?;
        let ix: [usize; 3] = ix
            .try_into()
            .map_err(|_| SlError::InvalidInput("projection needs three indices".into()))?;
        Ok(Projection::Coords(ix))
    }
}

fn pca3(vs: &[Vec<f64>], d: usize) -> Vec<[f64; 3]> {
    let n = vs.len().max(1) as f64;
    let mean: Vec<f64> = (0..d).map(|k| vs.iter().map(|v| v[k]).sum::<f64>() / n).collect();
    let cov = DMatrix::from_fn(d, d, |i, j| {
        vs.iter().map(|v| (v[i] - mean[i]) * (v[j] - mean[j])).sum::<f64>() / n
    });
    let eig = cov.symmetric_eigen();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let axes: Vec<Vec<f64>> = order[..3]
        .iter()
        .map(|&c| {
            let col: Vec<f64> = eig.eigenvectors.column(c).iter().copied().collect();
            let big = col.iter().copied().fold(0.0f64, |a, x| if x.abs() > a.abs() { x } else { a });
            let s = if big < 0.0 { -1.0 } else { 1.0 };
            col.into_iter().map(|x| s * x).collect()
        })
        .collect();
    vs.iter()
        .map(|v| {
            [0, 1, 2].map(|a| (0..d).map(|k| (v[k] - mean[k]) * axes[a][k]).sum())
        })
        .collect()
}

/// True when every edge shared by two faces is traversed in opposite
/// directions, i.e. the faces are consistently oriented.
pub fn orientation_consistent(faces: &[[usize; 4]]) -> bool {
    let mut seen = std::collections::HashSet::new();
    for f in faces {
        for k in 0..4 {
            if !seen.insert((f[k], f[(k + 1) % 4])) {
                return false;
            }
        }
    }
    true
}

/// Signed volume enclosed by the quads (split into triangles), positive
/// for a closed surface with outward normals.
pub fn signed_volume(pts: &[[f64; 3]], faces: &[[usize; 4]]) -> f64 {
    let det = |a: [f64; 3], b: [f64; 3], c: [f64; 3]| {
        a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0]) + a[2] * (b[0] * c[1] - b[1] * c[0])
    };
    faces
        .iter()
        .map(|f| {
            let [a, b, c, d] = f.map(|i| pts[i]);
            (det(a, b, c) + det(a, c, d)) / 6.0
        })
        .sum()
}

// ---------------------------------------------------------------------------
// families

/// Tabulated maps `phi_t` and rates `d phi_t / dt` over a chart.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvolvedFamily {
    pub label: String,
    pub chart: Chart,
    pub times: Vec<f64>,
    pub maps: Vec<EvolMap>,
    pub rates: Vec<EvolMap>,
    pub truncated_at: Option<f64>,
}

fn node(map: &EvolMap, rate: &EvolMap, chart: &Chart, q: &[f64]) -> NodeValue {
    let x = chart.point(q);
    let mut frame = vec![from_complex(&rate.apply(&x))];
    for v in chart.tangent(&x) {
        frame.push(from_complex(&map.push(&v)));
    }
    (from_complex(&map.apply(&x)), Some(frame))
}

impl EvolvedFamily {
    pub fn m(&self) -> usize {
        self.maps.first().map_or(self.chart.n(), |p| p.m)
    }

    pub fn sample(&self, ti: usize, q: &[f64]) -> NodeValue {
        node(&self.maps[ti], &self.rates[ti], &self.chart, q)
    }

    /// Mesh over `times x chart grid` with `res` cells per chart axis.
    pub fn mesh(&self, res: usize) -> Result<Mesh> {
        let mut axes = vec![self.times.clone()];
        axes.extend(self.chart.axes(res));
        let mut mesh = Mesh::from_grid(self.m(), &self.label, &axes, |idx, p| Ok(self.sample(idx[0], &p[1..])))?;
        mesh.truncated_at = self.truncated_at;
        Ok(mesh)
    }

    /// Residuals at `count` random points (random time from the table and
    /// random chart parameters).
    pub fn residuals(&self, count: usize, seed: u64) -> Result<SLReport> {
        if self.times.is_empty() {
            return invalid("empty family");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let picks: Vec<(usize, Vec<f64>)> = (0..count)
            .map(|_| (rng.gen_range(0..self.times.len()), self.chart.random_params(&mut rng)))
            .collect();
        let res: Vec<Option<[f64; 2]>> = picks
            .par_iter()
            .map(|(i, q)| frame_residuals(&self.sample(*i, q).1.expect("analytic frame")))
            .collect();
        Ok(SLReport::from_residuals(&res))
    }
}

/// Integrates from `t = 0` towards both ends of `times` (sorted). The
/// callback receives a list starting at 0 and returns the states reached
/// plus an escape time. Returns the surviving times, states and the first
/// escape.
fn two_sided<T, F>(times: &[f64], mut run: F) -> Result<(Vec<f64>, Vec<T>, Option<f64>)>
where
    F: FnMut(&[f64]) -> Result<(Vec<T>, Option<f64>)>,
{
    if times.is_empty() || times.windows(2).any(|w| w[1] <= w[0]) {
        return invalid("times must be non-empty and strictly increasing");
    }
    let split = times.partition_point(|&t| t < 0.0);
    let fwd: Vec<f64> = std::iter::once(0.0).chain(times[split..].iter().copied()).collect();
    let bwd: Vec<f64> = std::iter::once(0.0).chain(times[..split].iter().rev().copied()).collect();
    let (f_states, f_esc) = run(&fwd)?;
    let (mut b_states, b_esc) = if bwd.len() > 1 { run(&bwd)? } else { (Vec::new(), None) };
    // drop the initial state at t = 0 from both runs
    let mut b: Vec<(f64, T)> = bwd.iter().copied().zip(b_states.drain(..)).skip(1).collect();
    b.reverse();
    let f: Vec<(f64, T)> = fwd.iter().copied().zip(f_states).skip(1).collect();
    let (ts, xs): (Vec<f64>, Vec<T>) = b.into_iter().chain(f).unzip();
    let esc = match (b_esc, f_esc) {
        (Some(a), Some(b)) => Some(if a.abs() < b.abs() { a } else { b }),
        (a, b) => a.or(b),
    };
    if ts.is_empty() {
        return Err(SlError::BlowUp { t: esc.unwrap_or(0.0) });
    }
    Ok((ts, xs, esc))
}

/// The family `N` built from centred quadric data, with `w` from the ODE.
pub fn centred_family(params: &CentredParams, c: f64, times: &[f64], radius: f64, opts: OdeOptions) -> Result<EvolvedFamily> {
    params.validate()?;
    let chart = Chart::Quadric { m: params.m, a: params.a, c, radius };
    chart.validate()?;
    let w0 = params.initial_w()?;
    let (times, ws, esc) = two_sided(times, |ts| {
        let tr = integrate_w(params.a, &w0, ts, opts)?;
        Ok((tr.w, tr.escaped))
    })?;
    Ok(EvolvedFamily {
        label: format!("centred m={} a={} c={c}", params.m, params.a),
        chart,
        maps: ws.iter().map(|w| EvolMap::diagonal(w)).collect(),
        rates: ws.iter().map(|w| EvolMap::diagonal(&rhs_w(params.a, w))).collect(),
        times,
        truncated_at: esc,
    })
}

fn affine_maps(a: usize, w: &[Complex64], beta: Complex64) -> (EvolMap, EvolMap) {
    let one = Complex64::new(1.0, 0.0);
    let mut full: Vec<Complex64> = w.to_vec();
    full.push(one);
    let mut dw = rhs_w(a, w);
    dw.push(zero());
    let prod = w.iter().fold(one, |acc, z| acc * z).conj();
    let k = w.len();
    let mut map = EvolMap::diagonal(&full);
    map.t0[k] = beta;
    let mut rate = EvolMap::diagonal(&dw);
    rate.t0[k] = prod;
    (map, rate)
}

/// The family built from a paraboloid, with `(w, beta)` from the ODE.
pub fn affine_family(params: &AffineParams, times: &[f64], radius: f64, opts: OdeOptions) -> Result<EvolvedFamily> {
    params.validate()?;
    let chart = Chart::Paraboloid { m: params.m, a: params.a, radius };
    chart.validate()?;
    let s0 = params.initial_state()?;
    let (times, states, esc) = two_sided(times, |ts| {
        let tr = integrate_affine(params.a, &s0, ts, opts)?;
        let states: Vec<AffineState> = tr
            .w
            .into_iter()
            .zip(tr.beta)
            .map(|(w, beta)| AffineState { w, beta })
            .collect();
        Ok((states, tr.escaped))
    })?;
    let (maps, rates) = states.iter().map(|s| affine_maps(params.a, &s.w, s.beta)).unzip();
    Ok(EvolvedFamily {
        label: format!("affine m={} a={}", params.m, params.a),
        chart,
        times,
        maps,
        rates,
        truncated_at: esc,
    })
}

/// Mesh of the centred family over `t_span` with `nt` time samples.
pub fn mesh_centred(params: &CentredParams, c: f64, t_span: (f64, f64), nt: usize, res: usize, radius: f64, opts: OdeOptions) -> Result<Mesh> {
    centred_family(params, c, &linspace(t_span.0, t_span.1, nt.max(2)), radius, opts)?.mesh(res)
}

/// Mesh of the paraboloid family over `t_span`.
pub fn mesh_affine(params: &AffineParams, t_span: (f64, f64), nt: usize, res: usize, radius: f64, opts: OdeOptions) -> Result<Mesh> {
    affine_family(params, &linspace(t_span.0, t_span.1, nt.max(2)), radius, opts)?.mesh(res)
}

/// Families with closed-form maps, evaluated at any `t`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClosedMaps {
    /// Centred case (c): `|w_j|` constant, phases linear in `t`.
    CaseC { signature: Signature, thetas0: Vec<f64> },
    /// The explicit `m = 3` paraboloid solutions.
    Affine3(Affine3),
}

/// A closed-form family as a smooth parametrization of `(t, chart params)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClosedFamily {
    pub chart: Chart,
    pub maps: ClosedMaps,
}

impl ClosedFamily {
    pub fn case_c(params: &CentredParams, c: f64, radius: f64) -> Result<Self> {
        if classify_case(params)? != Case::C {
            return invalid("parameters are not in case (c)");
        }
        let chart = Chart::Quadric { m: params.m, a: params.a, c, radius };
        chart.validate()?;
        let thetas0 = params.initial_w()?.iter().map(|z| z.arg()).collect();
        Ok(ClosedFamily {
            chart,
            maps: ClosedMaps::CaseC {
                signature: params.signature(),
                thetas0,
            },
        })
    }

    pub fn affine3(sol: Affine3, radius: f64) -> Result<Self> {
        let a = match sol.variant {
            Affine3Variant::A2 => 2,
            Affine3Variant::A1 => 1,
        };
        let chart = Chart::Paraboloid { m: 3, a, radius };
        chart.validate()?;
        Ok(ClosedFamily {
            chart,
            maps: ClosedMaps::Affine3(sol),
        })
    }

    pub fn maps_at(&self, t: f64) -> (EvolMap, EvolMap) {
        match &self.maps {
            ClosedMaps::CaseC { signature, thetas0 } => {
                let w = case_c_w(signature, thetas0, t);
                (EvolMap::diagonal(&w), EvolMap::diagonal(&rhs_w(signature.a, &w)))
            }
            ClosedMaps::Affine3(sol) => {
                let a = self.chart_a();
                let (map, mut rate) = affine_maps(a, &sol.w(t), sol.beta(t));
                // the closed forms carry their own derivatives
                let dw = sol.dw(t);
                rate.a[0] = dw[0];
                rate.a[4] = dw[1];
                rate.t0[2] = sol.dbeta(t);
                (map, rate)
            }
        }
    }

    fn chart_a(&self) -> usize {
        match self.chart {
            Chart::Quadric { a, .. } | Chart::Paraboloid { a, .. } => a,
        }
    }

    /// `count` random `(t, chart params)` with `t` uniform in `t_span`.
    pub fn random_samples(&self, t_span: (f64, f64), count: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| {
                let mut p = vec![rng.gen_range(t_span.0..=t_span.1)];
                p.extend(self.chart.random_params(&mut rng));
                p
            })
            .collect()
    }

    pub fn mesh(&self, times: &[f64], res: usize) -> Result<Mesh> {
        let mut axes = vec![times.to_vec()];
        axes.extend(self.chart.axes(res));
        let label = match self.maps {
            ClosedMaps::CaseC { .. } => "centred case c",
            ClosedMaps::Affine3(s) => match s.variant {
                Affine3Variant::A2 => "affine m=3 a=2",
                Affine3Variant::A1 => "affine m=3 a=1",
            },
        };
        Mesh::from_grid(self.chart.n(), label, &axes, |_, p| {
            let (map, rate) = self.maps_at(p[0]);
            Ok(node(&map, &rate, &self.chart, &p[1..]))
        })
    }
}

impl Parametrization for ClosedFamily {
    fn m(&self) -> usize {
        self.chart.n()
    }

    fn point(&self, p: &[f64]) -> Result<Vec<f64>> {
        let (map, _) = self.maps_at(p[0]);
        Ok(from_complex(&map.apply(&self.chart.point(&p[1..]))))
    }

    /// Frames from the chart tangent spaces rather than parameter
    /// derivatives; both span the same plane.
    fn frame(&self, p: &[f64]) -> Result<Option<Vec<Vec<f64>>>> {
        let (map, rate) = self.maps_at(p[0]);
        Ok(node(&map, &rate, &self.chart, &p[1..]).1)
    }
}

/// `diag(e^{i theta_j}) R^m`, special Lagrangian iff `sum theta_j` is a
/// multiple of `pi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotatedPlane {
    pub phases: Vec<f64>,
}

impl Parametrization for RotatedPlane {
    fn m(&self) -> usize {
        self.phases.len()
    }

    fn point(&self, p: &[f64]) -> Result<Vec<f64>> {
        Ok(from_complex(
            &self.phases.iter().zip(p).map(|(th, x)| Complex64::from_polar(*x, *th)).collect::<Vec<_>>(),
        ))
    }

    fn frame(&self, _p: &[f64]) -> Result<Option<Vec<Vec<f64>>>> {
        let m = self.m();
        Ok(Some(
            (0..m)
                .map(|j| {
                    let mut z = vec![zero(); m];
                    z[j] = Complex64::from_polar(1.0, self.phases[j]);
                    from_complex(&z)
                })
                .collect(),
        ))
    }
}

/// The explicit parametrization `(t, x_1, x_2)` of the `m = 3` paraboloid
/// solutions, with its own analytic partial derivatives.
impl Parametrization for Affine3 {
    fn m(&self) -> usize {
        3
    }

    fn point(&self, p: &[f64]) -> Result<Vec<f64>> {
        Ok(from_complex(&Affine3::point(self, p[1], p[2], p[0])))
    }

    fn frame(&self, p: &[f64]) -> Result<Option<Vec<Vec<f64>>>> {
        let [dx1, dx2, dt] = self.tangents(p[1], p[2], p[0]);
        Ok(Some(vec![from_complex(&dt), from_complex(&dx1), from_complex(&dx2)]))
    }
}

/// Mesh of the cone `{ r Phi(s, t) }` over a conformal grid, parameters
/// `(r, s, t)`.
pub fn cone_mesh(grid: &ConformalGrid, radii: &[f64]) -> Result<Mesh> {
    if radii.iter().any(|r| !(*r > 0.0)) {
        return invalid("cone radii must be positive");
    }
    let nt = grid.t.len();
    let axes = vec![radii.to_vec(), grid.s.clone(), grid.t.clone()];
    Mesh::from_grid(3, "cone m=3", &axes, |idx, p| {
        let k = idx[1] * nt + idx[2];
        let r = p[0];
        let scale = |z: &[Complex64; 3], s: f64| from_complex(&z.map(|v| v * s));
        Ok((
            scale(&grid.phi[k], r),
            Some(vec![
                scale(&grid.phi[k], 1.0),
                scale(&grid.dphi_ds[k], r),
                scale(&grid.dphi_dt[k], r),
            ]),
        ))
    })
}

/// Residuals of the cone at every grid node, with radius `r`.
pub fn cone_residuals(grid: &ConformalGrid, r: f64) -> SLReport {
    let res: Vec<Option<[f64; 2]>> = (0..grid.phi.len())
        .into_par_iter()
        .map(|k| {
            let sc = |z: &[Complex64; 3], s: f64| from_complex(&z.map(|v| v * s));
            frame_residuals(&[sc(&grid.phi[k], 1.0), sc(&grid.dphi_ds[k], r), sc(&grid.dphi_dt[k], r)])
        })
        .collect();
    SLReport::from_residuals(&res)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_plane_has_zero_residual() {
        let p = RotatedPlane { phases: vec![0.0; 3] };
        let r = sl_residuals(&p, &[vec![0.1, 0.2, 0.3]], Tangents::Analytic).unwrap();
        assert!(r.max_residual() < 1e-12);
    }

    #[test]
    fn chart_points_lie_on_quadric() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for (a, c) in [(1, 1.0), (2, 1.0), (2, -1.0), (2, 0.0), (3, 2.0), (1, -0.5)] {
            let ch = Chart::Quadric { m: 3, a, c, radius: 2.0 };
            ch.validate().unwrap();
            for _ in 0..20 {
                let x = ch.point(&ch.random_params(&mut rng));
                let v: f64 = x.iter().enumerate().map(|(j, v)| if j < a { v * v } else { -v * v }).sum();
                assert!((v - c).abs() < 1e-12, "a={a} c={c} value {v}");
                for t in ch.tangent(&x) {
                    let d: f64 = t.iter().zip(ch.normal(&x)).map(|(p, q)| p * q).sum();
                    assert!(d.abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn faces_are_consistent() {
        let faces = grid_faces(&[3, 4, 2]);
        assert_eq!(faces.len(), 2 * 3 * 2);
        assert!(orientation_consistent(&faces));
    }
}
