//! The flow of linear and affine maps `phi: R^n -> C^m` driven by
//! evolution data. At each `x`, `d phi / dt (x)` is the metric dual of
//! `Re Omega` contracted with `phi_*(chi(x))`.
//!
//! For `xi` in `Lambda^{m-1} R^n` the pushed-forward contraction is
//! `V(xi)_k = 1/2 sum_I xi_I conj(C_k(I))` with `C_k(I) = (-1)^k` times the
//! minor of the columns `A_I` with row `k` removed (0-based `k`).

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, SlError};
use crate::evodata::{EvolutionData, Kind, SamplePoint};
use crate::linalg::{det_complex, singular_values};
use crate::multilinear::{eval_omega, from_complex, Multivector};
use crate::ode::{Dopri5, OdeOptions, OdeStats};

/// `phi(x) = A x + t0` with `A` a complex `m x n` matrix stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolMap {
    pub n: usize,
    pub m: usize,
    #[serde(rename = "A")]
    pub a: Vec<Complex64>,
    pub t0: Vec<Complex64>,
}

impl EvolMap {
    pub fn new(m: usize, n: usize, a: Vec<Complex64>, t0: Vec<Complex64>) -> Result<Self> {
        if a.len() != m * n || t0.len() != m {
            return Err(SlError::DimensionMismatch(format!(
                "map C^{m} <- R^{n} needs {} matrix entries and {m} translation entries",
                m * n
            )));
        }
        if a.iter().chain(&t0).any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return invalid("map entries must be finite");
        }
        Ok(EvolMap { n, m, a, t0 })
    }

    pub fn linear(m: usize, n: usize, a: Vec<Complex64>) -> Result<Self> {
        Self::new(m, n, a, vec![Complex64::new(0.0, 0.0); m])
    }

    /// `x -> (w_1 x_1, .., w_m x_m)`.
    pub fn diagonal(w: &[Complex64]) -> Self {
        let m = w.len();
        let mut a = vec![Complex64::new(0.0, 0.0); m * m];
        for (j, wj) in w.iter().enumerate() {
            a[j * m + j] = *wj;
        }
        EvolMap::linear(m, m, a).expect("square diagonal map")
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.a[row * self.n + col]
    }

    pub fn apply(&self, x: &[f64]) -> Vec<Complex64> {
        (0..self.m)
            .map(|r| (0..self.n).map(|c| self.entry(r, c) * x[c]).sum::<Complex64>() + self.t0[r])
            .collect()
    }

    /// Image of a tangent vector.
    pub fn push(&self, v: &[f64]) -> Vec<Complex64> {
        (0..self.m)
            .map(|r| (0..self.n).map(|c| self.entry(r, c) * v[c]).sum())
            .collect()
    }

    pub fn norm(&self) -> f64 {
        self.a.iter().chain(&self.t0).map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    fn pack(&self) -> Vec<f64> {
        from_complex(&self.a).into_iter().chain(from_complex(&self.t0)).collect()
    }

    fn unpack(&self, y: &[f64]) -> Self {
        let z: Vec<Complex64> = y.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
        let (a, t0) = z.split_at(self.m * self.n);
        EvolMap {
            n: self.n,
            m: self.m,
            a: a.to_vec(),
            t0: t0.to_vec(),
        }
    }
}

/// Precomputed nonzero terms of each column of `chi` (and the constant).
struct Engine {
    n: usize,
    m: usize,
    columns: Vec<Vec<(Vec<usize>, f64)>>,
    constant: Vec<(Vec<usize>, f64)>,
}

impl Engine {
    fn new(data: &EvolutionData) -> Self {
        let terms = |c: &Multivector| c.terms().collect::<Vec<_>>();
        Engine {
            n: data.n,
            m: data.m,
            columns: data.chi_linear.iter().map(terms).collect(),
            constant: terms(&data.chi_const),
        }
    }

    /// `V(xi)` for `xi` given by its terms, with linear part `a`.
    fn field(&self, a: &[Complex64], xi: &[(Vec<usize>, f64)], out: &mut [Complex64]) {
        let (m, n) = (self.m, self.n);
        out.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        let mut cols: Vec<Vec<Complex64>> = vec![vec![Complex64::new(0.0, 0.0); m - 1]; m - 1];
        for (idx, coeff) in xi {
            for k in 0..m {
                for (ci, &col) in idx.iter().enumerate() {
                    let mut r2 = 0;
                    for r in 0..m {
                        if r != k {
                            cols[ci][r2] = a[r * n + col];
                            r2 += 1;
                        }
                    }
                }
                let refs: Vec<&[Complex64]> = cols.iter().map(|c| c.as_slice()).collect();
                let minor = det_complex(&refs);
                let sign = if k % 2 == 0 { 0.5 } else { -0.5 };
                out[k] += sign * coeff * minor.conj();
            }
        }
    }

    fn rhs(&self, a: &[Complex64], da: &mut [Complex64], dt0: &mut [Complex64]) {
        let (m, n) = (self.m, self.n);
        let mut v = vec![Complex64::new(0.0, 0.0); m];
        for i in 0..n {
            self.field(a, &self.columns[i], &mut v);
            for r in 0..m {
                da[r * n + i] = v[r];
            }
        }
        self.field(a, &self.constant, dt0);
    }

    fn rhs_packed(&self, y: &[f64], dy: &mut [f64]) {
        let (m, n) = (self.m, self.n);
        let a: Vec<Complex64> = y[..2 * m * n]
            .chunks_exact(2)
            .map(|c| Complex64::new(c[0], c[1]))
            .collect();
        let mut da = vec![Complex64::new(0.0, 0.0); m * n];
        let mut dt0 = vec![Complex64::new(0.0, 0.0); m];
        self.rhs(&a, &mut da, &mut dt0);
        for (k, z) in da.iter().chain(&dt0).enumerate() {
            dy[2 * k] = z.re;
            dy[2 * k + 1] = z.im;
        }
    }
}

fn check_dims(phi: &EvolMap, data: &EvolutionData) -> Result<()> {
    if phi.n != data.n || phi.m != data.m {
        return Err(SlError::DimensionMismatch(format!(
            "map C^{} <- R^{} does not match data with m = {}, n = {}",
            phi.m, phi.n, data.m, data.n
        )));
    }
    Ok(())
}

/// The time derivative of `phi`, returned in the same shape.
pub fn rhs_general(phi: &EvolMap, data: &EvolutionData) -> Result<EvolMap> {
    check_dims(phi, data)?;
    let eng = Engine::new(data);
    let mut da = vec![Complex64::new(0.0, 0.0); phi.m * phi.n];
    let mut dt0 = vec![Complex64::new(0.0, 0.0); phi.m];
    eng.rhs(&phi.a, &mut da, &mut dt0);
    Ok(EvolMap {
        n: phi.n,
        m: phi.m,
        a: da,
        t0: dt0,
    })
}

/// Diagnostics for the two conditions defining `C_P`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Membership {
    /// Largest `|omega(phi_* s, phi_* t)| / (|phi_* s| |phi_* t|)` over
    /// tangent pairs at the samples.
    pub omega_residual: f64,
    /// Smallest ratio of singular values of `phi` restricted to `T_p P`.
    pub min_singular_ratio: f64,
    pub injective: bool,
}

/// Injectivity threshold on the singular-value ratio.
pub const INJECTIVE_TOL: f64 = 1e-8;

pub fn membership_at(phi: &EvolMap, samples: &[SamplePoint]) -> Membership {
    let mut omega: f64 = 0.0;
    let mut ratio = f64::INFINITY;
    for p in samples {
        let imgs: Vec<Vec<f64>> = p.tangent.iter().map(|t| from_complex(&phi.push(t))).collect();
        let norms: Vec<f64> = imgs.iter().map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
        for i in 0..imgs.len() {
            for j in i + 1..imgs.len() {
                let w = eval_omega(&imgs[i], &imgs[j], phi.m).expect("lengths match");
                let scale = norms[i] * norms[j];
                if scale > 0.0 {
                    omega = omega.max(w.abs() / scale);
                }
            }
        }
        let mat = DMatrix::from_fn(2 * phi.m, imgs.len(), |r, c| imgs[c][r]);
        let sv = singular_values(&mat);
        let r = match (sv.first(), sv.last()) {
            (Some(&hi), Some(&lo)) if hi > 0.0 => lo / hi,
            _ => 0.0,
        };
        ratio = ratio.min(r);
    }
    Membership {
        omega_residual: omega,
        min_singular_ratio: ratio,
        injective: ratio >= INJECTIVE_TOL,
    }
}

/// Checks membership of `phi` in `C_P` on `count` sampled points.
pub fn membership_cp(phi: &EvolMap, data: &EvolutionData, count: usize, seed: u64) -> Result<Membership> {
    check_dims(phi, data)?;
    Ok(membership_at(phi, &data.sample(count, seed)?))
}

/// Options for [`integrate`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EvolveOptions {
    pub ode: OdeOptions,
    /// Number of output intervals.
    pub steps: usize,
    /// Number of sampled points for membership checks.
    pub samples: usize,
    pub seed: u64,
    /// Initial `omega` residual accepted as membership in `C_P`.
    pub membership_tol: f64,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions {
            ode: OdeOptions::default(),
            steps: 100,
            samples: 16,
            seed: 1,
            membership_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub maps: Vec<EvolMap>,
    pub membership: Vec<Membership>,
    /// Time at which the blow-up guard fired, if it did.
    pub escaped: Option<f64>,
    /// Checkpoints whose `omega` residual exceeds ten times the initial one plus `1e-8`.
    pub flagged: Vec<usize>,
    pub stats: OdeStats,
}

/// Integrates the flow from `phi0` to `t_end`, recording `steps + 1`
/// evenly spaced checkpoints.
pub fn integrate(phi0: &EvolMap, data: &EvolutionData, t_end: f64, opts: &EvolveOptions) -> Result<Trajectory> {
    check_dims(phi0, data)?;
    if !t_end.is_finite() || opts.steps == 0 {
        return invalid("t_end must be finite and steps positive");
    }
    let samples = data.sample(opts.samples.max(1), opts.seed)?;
    let first = membership_at(phi0, &samples);
    if first.omega_residual > opts.membership_tol {
        return invalid(format!(
            "initial map is not isotropic on P (residual {:e})",
            first.omega_residual
        ));
    }
    let eng = Engine::new(data);
    let mut solver = Dopri5::new(|_t, y: &[f64], dy: &mut [f64]| eng.rhs_packed(y, dy), 0.0, &phi0.pack(), opts.ode);
    let mut out = Trajectory {
        times: vec![0.0],
        maps: vec![phi0.clone()],
        membership: vec![first],
        escaped: None,
        flagged: Vec::new(),
        stats: OdeStats::default(),
    };
    let limit = 10.0 * first.omega_residual + 1e-8;
    for k in 1..=opts.steps {
        let t = t_end * k as f64 / opts.steps as f64;
        match solver.advance_to(t) {
            Ok(()) => {}
            Err(SlError::BlowUp { t }) => {
                out.escaped = Some(t);
                break;
            }
            Err(e) => return Err(e),
        }
        let map = phi0.unpack(solver.y());
        let mem = membership_at(&map, &samples);
        if mem.omega_residual > limit {
            out.flagged.push(k);
        }
        out.times.push(t);
        out.maps.push(map);
        out.membership.push(mem);
    }
    out.stats = solver.stats();
    Ok(out)
}

impl Trajectory {
    /// CSV with columns `t`, real and imaginary parts of every entry of
    /// `A` and `t0`, then the membership diagnostics.
    pub fn to_csv(&self) -> String {
        let Some(first) = self.maps.first() else {
            return String::new();
        };
        let (m, n) = (first.m, first.n);
        let mut head = vec!["t".to_string()];
        for r in 0..m {
            for c in 0..n {
                head.push(format!("re_a_{r}_{c}"));
                head.push(format!("im_a_{r}_{c}"));
            }
        }
        for r in 0..m {
            head.push(format!("re_t_{r}"));
            head.push(format!("im_t_{r}"));
        }
        head.push("omega_residual".into());
        head.push("min_singular_ratio".into());
        let mut s = head.join(",");
        s.push('\n');
        for ((t, map), mem) in self.times.iter().zip(&self.maps).zip(&self.membership) {
            let mut row = vec![format!("{t:.16e}")];
            row.extend(map.pack().iter().map(|v| format!("{v:.16e}")));
            row.push(format!("{:.16e}", mem.omega_residual));
            row.push(format!("{:.16e}", mem.min_singular_ratio));
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }
}

/// True if `data` is affine, in which case the translation part evolves.
pub fn moves_translation(data: &EvolutionData) -> bool {
    data.kind == Kind::Affine
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::centred::rhs_w;
    use crate::evodata::{centred_quadric, paraboloid};

    #[test]
    fn diagonal_map_reproduces_w_system() {
        let w = [
            Complex64::new(0.7, 0.2),
            Complex64::new(-0.3, 1.1),
            Complex64::new(0.5, -0.4),
        ];
        for a in 1..=3 {
            let data = centred_quadric(3, a, 1.0).unwrap();
            let d = rhs_general(&EvolMap::diagonal(&w), &data).unwrap();
            let expect = rhs_w(a, &w);
            for j in 0..3 {
                assert!((d.entry(j, j) - expect[j]).norm() < 1e-14, "a = {a}, j = {j}");
            }
        }
    }

    #[test]
    fn real_maps_stay_real() {
        let data = paraboloid(3, 2).unwrap();
        let a: Vec<Complex64> = [1.0, 0.5, 0.0, 0.2, 1.0, -0.3, 0.0, 0.1, 1.0]
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .collect();
        let phi = EvolMap::linear(3, 3, a).unwrap();
        let d = rhs_general(&phi, &data).unwrap();
        assert!(d.a.iter().chain(&d.t0).all(|z| z.im.abs() < 1e-14));
    }
}
