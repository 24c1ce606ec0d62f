//! Evolution data `(P, chi)`: a submanifold `P` of R^n of dimension `m - 1`
//! together with a linear or affine map `chi: R^n -> Lambda^{m-1} R^n`
//! whose values are tangent to `P`.
//!
//! `P` is described by a [`Surface`], which knows how to sample points and
//! tangent bases. `chi(x) = sum_i x_i chi_linear[i] + chi_const`.

mod classify;
mod symmetry;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, SlError};
use crate::linalg::{numerical_rank, orthogonal_complement};
use crate::multilinear::{Multivector, MAX_DIM};

pub use classify::{classify_square, SquareClass};
pub use symmetry::{symmetry_algebra, SymmetryAlgebra};

/// Format tag of serialized evolution data.
pub const FORMAT: &str = "slevodata-1";

/// Points with `|dQ| < SINGULAR_TOL` count as singular points of a quadric.
pub const SINGULAR_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Linear,
    Affine,
}

/// `Q(x) = x^T S x + b^T x + c0`, with `S` stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadricSpec {
    pub n: usize,
    #[serde(rename = "S")]
    pub s: Vec<f64>,
    pub b: Vec<f64>,
    #[serde(default)]
    pub c0: f64,
}

impl QuadricSpec {
    pub fn new(n: usize, s: Vec<f64>, b: Vec<f64>, c0: f64) -> Result<Self> {
        let q = QuadricSpec { n, s, b, c0 };
        q.validate()?;
        Ok(q)
    }

    /// `diag(1, .., 1, -1, .., -1)` with `a` plus signs.
    pub fn signature(m: usize, a: usize) -> Result<Self> {
        if a > m || m == 0 {
            return invalid(format!("signature ({a}, {}) is not valid", m as i64 - a as i64));
        }
        let mut s = vec![0.0; m * m];
        for j in 0..m {
            s[j * m + j] = if j < a { 1.0 } else { -1.0 };
        }
        Self::new(m, s, vec![0.0; m], 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        if n == 0 || n > MAX_DIM {
            return invalid(format!("dimension {n} out of range"));
        }
        if self.s.len() != n * n || self.b.len() != n {
            return Err(SlError::DimensionMismatch(format!(
                "quadric in R^{n} needs {} matrix entries and {n} linear terms",
                n * n
            )));
        }
        if self.s.iter().chain(&self.b).chain([&self.c0]).any(|v| !v.is_finite()) {
            return invalid("quadric coefficients must be finite");
        }
        let scale = self.s.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for i in 0..n {
            for j in 0..i {
                if (self.s[i * n + j] - self.s[j * n + i]).abs() > 1e-12 * scale.max(1.0) {
                    return invalid("quadric matrix must be symmetric");
                }
            }
        }
        if scale == 0.0 && self.b.iter().all(|v| *v == 0.0) {
            return invalid("quadratic and linear parts are both zero");
        }
        Ok(())
    }

    pub fn is_centred(&self) -> bool {
        self.b.iter().all(|v| *v == 0.0)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let n = self.n;
        let mut q = self.c0;
        for i in 0..n {
            let row: f64 = (0..n).map(|j| self.s[i * n + j] * x[j]).sum();
            q += x[i] * row + self.b[i] * x[i];
        }
        q
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|i| 2.0 * (0..n).map(|j| self.s[i * n + j] * x[j]).sum::<f64>() + self.b[i])
            .collect()
    }

    fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.s)
    }

    /// Rejects level sets that are empty or degenerate.
    fn check_level(&self, c: f64) -> Result<()> {
        let n = self.n;
        let eig = SymmetricEigen::new(self.matrix());
        let top = eig.eigenvalues.amax();
        let tol = 1e-12 * top.max(1.0);
        let mut b_null = 0.0f64;
        let mut centre = vec![0.0; n];
        let mut pos = 0;
        let mut neg = 0;
        for k in 0..n {
            let lam = eig.eigenvalues[k];
            let v = eig.eigenvectors.column(k);
            let bk: f64 = v.iter().zip(&self.b).map(|(a, b)| a * b).sum();
            if lam.abs() <= tol {
                b_null = b_null.max(bk.abs());
            } else {
                if lam > 0.0 {
                    pos += 1;
                } else {
                    neg += 1;
                }
                for (ci, vi) in centre.iter_mut().zip(v.iter()) {
                    *ci -= 0.5 * bk / lam * vi;
                }
            }
        }
        let b_scale = self.b.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if b_null > 1e-12 * b_scale.max(1.0) {
            // a linear term transverse to the kernel: dQ never vanishes
            return Ok(());
        }
        let shifted = c - self.value(&centre);
        let level_tol = 1e-12 * (c.abs() + self.c0.abs()).max(1.0);
        if shifted.abs() <= level_tol {
            if pos == 0 || neg == 0 {
                return Err(SlError::Degenerate(
                    "level set is a linear subspace of dimension below m - 1".into(),
                ));
            }
        } else if (shifted > 0.0 && pos == 0) || (shifted < 0.0 && neg == 0) {
            return Err(SlError::EmptyLevelSet(format!("Q(x) = {c} has no solutions")));
        }
        Ok(())
    }
}

/// Description of the submanifold `P`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Surface {
    /// The level set `Q = c`.
    Quadric { spec: QuadricSpec, c: f64 },
    /// The integral curve of `x' = M x + v` in R^2 through `base`.
    Curve {
        #[serde(rename = "M")]
        mat: [[f64; 2]; 2],
        v: [f64; 2],
        base: [f64; 2],
        span: f64,
    },
    /// `P x R^k`.
    Product { base: Box<Surface>, n_base: usize, k: usize },
}

/// A point of `P` with an orthonormal basis of its tangent space.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePoint {
    pub x: Vec<f64>,
    pub tangent: Vec<Vec<f64>>,
}

fn normalize(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    v.iter().map(|a| a / n).collect()
}

impl Surface {
    /// Ambient dimension.
    pub fn dim(&self) -> usize {
        match self {
            Surface::Quadric { spec, .. } => spec.n,
            Surface::Curve { .. } => 2,
            Surface::Product { n_base, k, .. } => n_base + k,
        }
    }

    /// Dimension of `P`.
    pub fn manifold_dim(&self) -> usize {
        match self {
            Surface::Quadric { spec, .. } => spec.n - 1,
            Surface::Curve { .. } => 1,
            Surface::Product { base, k, .. } => base.manifold_dim() + k,
        }
    }

    /// Orthonormal tangent basis at a point of `P`, or `None` at a singular point.
    pub fn tangent_at(&self, x: &[f64]) -> Option<Vec<Vec<f64>>> {
        match self {
            Surface::Quadric { spec, .. } => {
                let g = spec.gradient(x);
                let norm = g.iter().map(|a| a * a).sum::<f64>().sqrt();
                if norm < SINGULAR_TOL {
                    return None;
                }
                Some(orthogonal_complement(&[g], spec.n))
            }
            Surface::Curve { mat, v, .. } => {
                let f = [
                    mat[0][0] * x[0] + mat[0][1] * x[1] + v[0],
                    mat[1][0] * x[0] + mat[1][1] * x[1] + v[1],
                ];
                if f[0].hypot(f[1]) < SINGULAR_TOL {
                    return None;
                }
                Some(vec![normalize(&f)])
            }
            Surface::Product { base, n_base, k } => {
                let n = n_base + k;
                let mut t: Vec<Vec<f64>> = base
                    .tangent_at(&x[..*n_base])?
                    .into_iter()
                    .map(|mut v| {
                        v.resize(n, 0.0);
                        v
                    })
                    .collect();
                for j in 0..*k {
                    let mut e = vec![0.0; n];
                    e[n_base + j] = 1.0;
                    t.push(e);
                }
                Some(t)
            }
        }
    }

    fn sample_point(&self, rng: &mut ChaCha8Rng) -> Option<Vec<f64>> {
        match self {
            Surface::Quadric { spec, c } => {
                let n = spec.n;
                let radius = 2.0 * (1.0 + c.abs().sqrt());
                // box side chosen so |x0| is near radius * 2^-k in any dimension
                let k = rng.gen_range(0..4);
                let side = radius * (3.0 / n as f64).sqrt() / f64::powi(2.0, k);
                let x0: Vec<f64> = (0..n).map(|_| rng.gen_range(-side..side)).collect();
                let d = normalize(&(0..n).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>());
                // Q(x0 + s d) = c  <=>  qa s^2 + qb s + qc = 0
                let sd: Vec<f64> = (0..n)
                    .map(|i| (0..n).map(|j| spec.s[i * n + j] * d[j]).sum())
                    .collect();
                let qa: f64 = d.iter().zip(&sd).map(|(a, b)| a * b).sum();
                let g0 = spec.gradient(&x0);
                let qb: f64 = g0.iter().zip(&d).map(|(a, b)| a * b).sum();
                let qc = spec.value(&x0) - c;
                let s = if qa.abs() < 1e-14 {
                    if qb.abs() < 1e-14 {
                        return None;
                    }
                    -qc / qb
                } else {
                    let disc = qb * qb - 4.0 * qa * qc;
                    if disc < 0.0 {
                        return None;
                    }
                    let q = -0.5 * (qb + qb.signum() * disc.sqrt());
                    let r1 = q / qa;
                    let r2 = if q != 0.0 { qc / q } else { r1 };
                    if rng.gen_bool(0.5) {
                        r1
                    } else {
                        r2
                    }
                };
                if !s.is_finite() || s.abs() > 50.0 * radius {
                    return None;
                }
                let mut x: Vec<f64> = x0.iter().zip(&d).map(|(a, b)| a + s * b).collect();
                // one Newton correction along the gradient
                let g = spec.gradient(&x);
                let gg: f64 = g.iter().map(|a| a * a).sum();
                if gg.sqrt() < SINGULAR_TOL {
                    return None;
                }
                let r = spec.value(&x) - c;
                for (xi, gi) in x.iter_mut().zip(&g) {
                    *xi -= r * gi / gg;
                }
                Some(x)
            }
            Surface::Curve { mat, v, base, span } => {
                let s = rng.gen_range(-*span..*span);
                Some(curve_flow(mat, v, base, s).to_vec())
            }
            Surface::Product { base, k, .. } => {
                let mut x = base.sample_point(rng)?;
                let scale = 1.0 + x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                x.extend((0..*k).map(|_| rng.gen_range(-scale..scale)));
                Some(x)
            }
        }
    }

    /// Draws `count` nonsingular points of `P` with tangent bases.
    pub fn sample(&self, count: usize, seed: u64) -> Result<Vec<SamplePoint>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(count);
        let budget = 1000 + 200 * count;
        for _ in 0..budget {
            if out.len() == count {
                break;
            }
            if let Some(x) = self.sample_point(&mut rng) {
                if let Some(tangent) = self.tangent_at(&x) {
                    out.push(SamplePoint { x, tangent });
                }
            }
        }
        if out.len() < count {
            return Err(SlError::EmptyLevelSet(format!(
                "found only {} of {count} nonsingular points",
                out.len()
            )));
        }
        Ok(out)
    }
}

/// Time-`s` flow of `x' = M x + v` from `base`.
fn curve_flow(mat: &[[f64; 2]; 2], v: &[f64; 2], base: &[f64; 2], s: f64) -> [f64; 2] {
    let h = DMatrix::from_row_slice(
        3,
        3,
        &[mat[0][0], mat[0][1], v[0], mat[1][0], mat[1][1], v[1], 0.0, 0.0, 0.0],
    );
    let e = (h * s).exp();
    [
        e[(0, 0)] * base[0] + e[(0, 1)] * base[1] + e[(0, 2)],
        e[(1, 0)] * base[0] + e[(1, 1)] * base[1] + e[(1, 2)],
    ]
}

/// A set of linear or affine evolution data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionData {
    pub n: usize,
    pub m: usize,
    pub kind: Kind,
    pub chi_linear: Vec<Multivector>,
    pub chi_const: Multivector,
    pub surface: Surface,
}

#[derive(Serialize, Deserialize)]
struct Document {
    format: String,
    version: String,
    #[serde(flatten)]
    data: EvolutionData,
}

/// Numerical checks of the defining properties of evolution data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataReport {
    pub samples: usize,
    /// Largest relative distance of `chi(p)` from `Lambda^{m-1} T_p P`.
    pub tangency_residual: f64,
    /// Smallest `|chi(p)|` over the samples.
    pub min_chi_norm: f64,
    /// Rank of the sampled points (homogenized in the affine case).
    pub span_rank: usize,
    /// Rank required for `P` not to lie in a proper subspace.
    pub full_rank: usize,
}

impl DataReport {
    pub fn spans(&self) -> bool {
        self.span_rank == self.full_rank
    }
}

impl EvolutionData {
    pub fn new(chi_linear: Vec<Multivector>, chi_const: Multivector, surface: Surface) -> Result<Self> {
        let n = surface.dim();
        let m = surface.manifold_dim() + 1;
        if m < 2 || m > n {
            return invalid(format!("need 2 <= m <= n, got m = {m}, n = {n}"));
        }
        if chi_linear.len() != n {
            return Err(SlError::DimensionMismatch(format!(
                "chi needs {n} linear columns, got {}",
                chi_linear.len()
            )));
        }
        for c in chi_linear.iter().chain([&chi_const]) {
            if c.dim() != n || c.degree() != m - 1 {
                return Err(SlError::DimensionMismatch(format!(
                    "chi values must lie in Lambda^{} R^{n}",
                    m - 1
                )));
            }
            if c.coeffs().iter().any(|v| !v.is_finite()) {
                return invalid("chi coefficients must be finite");
            }
        }
        let kind = if chi_const.norm() == 0.0 {
            Kind::Linear
        } else {
            Kind::Affine
        };
        Ok(EvolutionData {
            n,
            m,
            kind,
            chi_linear,
            chi_const,
            surface,
        })
    }

    pub fn chi(&self, x: &[f64]) -> Multivector {
        let mut out = self.chi_const.clone();
        for (c, xi) in self.chi_linear.iter().zip(x) {
            if *xi != 0.0 {
                out.add_scaled(*xi, c).expect("shapes checked at construction");
            }
        }
        out
    }

    /// `chi` on R^{n+1}, linear, agreeing with `chi` on the slice `x_{n+1} = 1`.
    pub fn homogenized_chi(&self) -> Result<Vec<Multivector>> {
        let mut cols = Vec::with_capacity(self.n + 1);
        for c in self.chi_linear.iter().chain([&self.chi_const]) {
            cols.push(c.embed(1)?);
        }
        Ok(cols)
    }

    pub fn sample(&self, count: usize, seed: u64) -> Result<Vec<SamplePoint>> {
        self.surface.sample(count, seed)
    }

    /// Relative distance of `chi(p)` from the line spanned by the
    /// tangent blade at `p`.
    pub fn tangency_residual(&self, p: &SamplePoint) -> Result<f64> {
        let chi = self.chi(&p.x);
        let mut blade = Multivector::vector(&p.tangent[0])?;
        for t in &p.tangent[1..] {
            blade = blade.wedge(&Multivector::vector(t)?)?;
        }
        let dot: f64 = chi.coeffs().iter().zip(blade.coeffs()).map(|(a, b)| a * b).sum();
        let bn = blade.norm();
        let mut rest = chi.clone();
        rest.add_scaled(-dot / (bn * bn), &blade)?;
        Ok(rest.norm() / chi.norm().max(f64::MIN_POSITIVE))
    }

    /// Checks tangency, nonvanishing and spanning on `count` samples.
    pub fn validate(&self, count: usize, seed: u64) -> Result<DataReport> {
        let pts = self.sample(count.max(2 * self.n + 2), seed)?;
        let mut tangency: f64 = 0.0;
        let mut min_norm = f64::INFINITY;
        for p in &pts {
            tangency = tangency.max(self.tangency_residual(p)?);
            min_norm = min_norm.min(self.chi(&p.x).norm());
        }
        let affine = self.kind == Kind::Affine;
        let rows = self.n + usize::from(affine);
        let mat = DMatrix::from_fn(rows, pts.len(), |r, c| {
            if r < self.n {
                pts[c].x[r]
            } else {
                1.0
            }
        });
        Ok(DataReport {
            samples: pts.len(),
            tangency_residual: tangency,
            min_chi_norm: min_norm,
            span_rank: numerical_rank(&mat, 1e-10),
            full_rank: rows,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = Document {
            format: FORMAT.into(),
            version: crate::VERSION.into(),
            data: self.clone(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Document = serde_json::from_str(text)?;
        if doc.format != FORMAT {
            return Err(SlError::Format(format!(
                "expected format {FORMAT}, found {}",
                doc.format
            )));
        }
        let d = doc.data;
        if let Surface::Quadric { spec, .. } = &d.surface {
            spec.validate()?;
        }
        let rebuilt = EvolutionData::new(d.chi_linear, d.chi_const, d.surface)?;
        if rebuilt.kind != d.kind || rebuilt.n != d.n || rebuilt.m != d.m {
            return Err(SlError::Format("header disagrees with chi".into()));
        }
        Ok(rebuilt)
    }
}

/// `e_0 ^ .. ^ e_{n-1}` with `e_j` removed, as a multivector.
fn complement_blade(n: usize, j: usize) -> Result<Multivector> {
    let idx: Vec<usize> = (0..n).filter(|&i| i != j).collect();
    Multivector::blade(n, &idx)
}

/// Evolution data of the level set `Q = c`, with `chi = dQ . (e_1 ^ .. ^ e_m)`.
pub fn quadric_data(spec: &QuadricSpec, c: f64) -> Result<EvolutionData> {
    spec.validate()?;
    if !c.is_finite() {
        return invalid("level must be finite");
    }
    let n = spec.n;
    if n < 2 {
        return invalid("quadric data needs n >= 2");
    }
    spec.check_level(c)?;
    let blades: Vec<Multivector> = (0..n).map(|j| complement_blade(n, j)).collect::<Result<_>>()?;
    let sign = |j: usize| if j.is_multiple_of(2) { 1.0 } else { -1.0 };
    let mut chi_linear = Vec::with_capacity(n);
    for i in 0..n {
        let mut col = Multivector::zero(n, n - 1)?;
        for (j, blade) in blades.iter().enumerate() {
            col.add_scaled(sign(j) * 2.0 * spec.s[j * n + i], blade)?;
        }
        chi_linear.push(col);
    }
    let mut chi_const = Multivector::zero(n, n - 1)?;
    for (j, blade) in blades.iter().enumerate() {
        chi_const.add_scaled(sign(j) * spec.b[j], blade)?;
    }
    let surface = Surface::Quadric {
        spec: spec.clone(),
        c,
    };
    let data = EvolutionData::new(chi_linear, chi_const, surface)?;
    data.sample(1, 0)?;
    Ok(data)
}

/// `x_1^2 + .. + x_a^2 - x_{a+1}^2 - .. - x_m^2 = c`.
pub fn centred_quadric(m: usize, a: usize, c: f64) -> Result<EvolutionData> {
    quadric_data(&QuadricSpec::signature(m, a)?, c)
}

/// `x_1^2 + .. + x_a^2 - x_{a+1}^2 - .. - x_{m-1}^2 + 2 x_m = 0`.
pub fn paraboloid(m: usize, a: usize) -> Result<EvolutionData> {
    if m < 2 || a >= m {
        return invalid(format!("paraboloid needs a < m, got a = {a}, m = {m}"));
    }
    let mut s = vec![0.0; m * m];
    for j in 0..m - 1 {
        s[j * m + j] = if j < a { 1.0 } else { -1.0 };
    }
    let mut b = vec![0.0; m];
    b[m - 1] = 2.0;
    quadric_data(&QuadricSpec::new(m, s, b, 0.0)?, 0.0)
}

/// `P x R^k` with `chi' = chi ^ e_{n+1} ^ .. ^ e_{n+k}`.
pub fn extend_product(data: &EvolutionData, k: usize) -> Result<EvolutionData> {
    if k == 0 {
        return Ok(data.clone());
    }
    let n = data.n;
    if n + k > MAX_DIM {
        return invalid(format!("dimension {} exceeds {MAX_DIM}", n + k));
    }
    let extra: Vec<usize> = (n..n + k).collect();
    let tail = Multivector::blade(n + k, &extra)?;
    let lift = |c: &Multivector| -> Result<Multivector> { c.embed(k)?.wedge(&tail) };
    let mut chi_linear = data.chi_linear.iter().map(lift).collect::<Result<Vec<_>>>()?;
    chi_linear.extend((0..k).map(|_| Multivector::zero(n + k, data.m + k - 1).unwrap()));
    let chi_const = lift(&data.chi_const)?;
    let surface = Surface::Product {
        base: Box::new(data.surface.clone()),
        n_base: n,
        k,
    };
    EvolutionData::new(chi_linear, chi_const, surface)
}

/// An integral curve of `x' = M x + v` in R^2, times R^{m-2}.
pub fn curve_data(mat: [[f64; 2]; 2], v: [f64; 2], m: usize) -> Result<EvolutionData> {
    if m < 2 {
        return invalid("curve data needs m >= 2");
    }
    let all = [mat[0][0], mat[0][1], mat[1][0], mat[1][1], v[0], v[1]];
    if all.iter().any(|x| !x.is_finite()) {
        return invalid("curve data must be finite");
    }
    if all.iter().all(|x| *x == 0.0) {
        return invalid("the planar vector field is identically zero");
    }
    let field = |p: [f64; 2]| {
        [
            mat[0][0] * p[0] + mat[0][1] * p[1] + v[0],
            mat[1][0] * p[0] + mat[1][1] * p[1] + v[1],
        ]
    };
    let base = [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [0.0, 0.0]]
        .into_iter()
        .max_by(|p, q| {
            let f = field(*p);
            let g = field(*q);
            f[0].hypot(f[1]).partial_cmp(&g[0].hypot(g[1])).unwrap()
        })
        .unwrap();
    let scale = all.iter().map(|x| x * x).sum::<f64>().sqrt();
    let span = std::f64::consts::PI / scale.max(1e-12);
    let chi_linear = vec![
        Multivector::vector(&[mat[0][0], mat[1][0]])?,
        Multivector::vector(&[mat[0][1], mat[1][1]])?,
    ];
    let chi_const = Multivector::vector(&v)?;
    let surface = Surface::Curve {
        mat,
        v,
        base,
        span,
    };
    let planar = EvolutionData::new(chi_linear, chi_const, surface)?;
    extend_product(&planar, m - 2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hyperboloid_chi_matches_listed_coefficients() {
        let d = centred_quadric(3, 1, 1.0).unwrap();
        let x = [0.3, -1.2, 0.7];
        let chi = d.chi(&x);
        // 2 x_1 e_2^e_3 - 2 x_2 (-1) e_1^e_3 ... with the a = 1 signs
        assert!((chi.get(&[1, 2]) - 2.0 * x[0]).abs() < 1e-15);
        assert!((chi.get(&[0, 2]) - 2.0 * x[1]).abs() < 1e-15);
        assert!((chi.get(&[0, 1]) + 2.0 * x[2]).abs() < 1e-15);
        assert_eq!(d.kind, Kind::Linear);
    }

    #[test]
    fn paraboloid_constant_term() {
        for m in 2..=4 {
            let d = paraboloid(m, m - 1).unwrap();
            assert_eq!(d.kind, Kind::Affine);
            let idx: Vec<usize> = (0..m - 1).collect();
            let expect = if (m - 1) % 2 == 0 { 2.0 } else { -2.0 };
            assert_eq!(d.chi_const.get(&idx), expect);
        }
    }

    #[test]
    fn level_set_checks() {
        assert!(matches!(
            centred_quadric(3, 3, -1.0),
            Err(SlError::EmptyLevelSet(_))
        ));
        assert!(matches!(centred_quadric(3, 3, 0.0), Err(SlError::Degenerate(_))));
        assert!(centred_quadric(3, 2, 0.0).is_ok());
    }

    #[test]
    fn samples_lie_on_quadric() {
        let d = centred_quadric(4, 2, 1.0).unwrap();
        let Surface::Quadric { spec, c } = &d.surface else { unreachable!() };
        for p in d.sample(50, 7).unwrap() {
            assert!((spec.value(&p.x) - c).abs() < 1e-9 * (1.0 + p.x.iter().map(|v| v * v).sum::<f64>()));
        }
    }

    #[test]
    fn json_roundtrip() {
        let d = curve_data([[0.0, -1.0], [1.0, 0.0]], [0.0, 0.5], 3).unwrap();
        let back = EvolutionData::from_json(&d.to_json().unwrap()).unwrap();
        assert_eq!(d, back);
    }
}
