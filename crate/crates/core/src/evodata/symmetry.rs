//! The Lie algebra generated by the linear vector fields `L(alpha) = chi . alpha`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{EvolutionData, Kind, SamplePoint};
use crate::error::{invalid, Result, SlError};
use crate::linalg::{column_basis, numerical_rank};
use crate::multilinear::{binomial, contract, unrank, Multivector};

const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryAlgebra {
    /// Size of the matrices: `n`, or `n + 1` for affine data.
    pub n: usize,
    pub homogenized: bool,
    /// Orthonormal (Frobenius) basis of the algebra, row-major matrices.
    pub basis: Vec<Vec<f64>>,
    /// `L(alpha)` for the coordinate basis of `Lambda^{m-2}`.
    pub image_generators: Vec<Vec<f64>>,
    pub image_rank: usize,
    /// Dimension of the kernel of `L`.
    pub kernel_dim: usize,
    /// Largest distance of a commutator of basis elements from the span.
    pub closure_residual: f64,
    /// Whether the image of `L` is already closed under brackets.
    pub surjective: bool,
}

fn to_mat(v: &[f64], n: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(n, n, v)
}

fn from_mat(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

fn stack(mats: &[Vec<f64>], n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n * n, mats.len(), |r, c| mats[c][r])
}

fn columns(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.ncols()).map(|c| m.column(c).iter().copied().collect()).collect()
}

fn bracket(x: &[f64], y: &[f64], n: usize) -> Vec<f64> {
    let (a, b) = (to_mat(x, n), to_mat(y, n));
    from_mat(&(&a * &b - &b * &a))
}

fn linear_chi(data: &EvolutionData) -> Result<(Vec<Multivector>, bool)> {
    match data.kind {
        Kind::Linear => Ok((data.chi_linear.clone(), false)),
        Kind::Affine => Ok((data.homogenized_chi()?, true)),
    }
}

/// `L(alpha)` as a row-major matrix.
pub fn l_matrix(chi: &[Multivector], alpha: &Multivector) -> Result<Vec<f64>> {
    let n = chi.len();
    let mut out = vec![0.0; n * n];
    for (i, c) in chi.iter().enumerate() {
        let v = contract(c, alpha)?;
        for (r, vr) in v.iter().enumerate() {
            out[r * n + i] = *vr;
        }
    }
    Ok(out)
}

fn chi_at(chi: &[Multivector], y: &[f64]) -> Multivector {
    let mut out = Multivector::zero(chi[0].dim(), chi[0].degree()).expect("valid shape");
    for (c, yi) in chi.iter().zip(y) {
        out.add_scaled(*yi, c).expect("valid shape");
    }
    out
}

/// Computes the Lie closure of the image of `L`.
pub fn symmetry_algebra(data: &EvolutionData) -> Result<SymmetryAlgebra> {
    let (chi, homogenized) = linear_chi(data)?;
    let n = chi.len();
    let p = data.m - 2;
    let generators: Vec<Vec<f64>> = (0..binomial(n, p))
        .map(|r| l_matrix(&chi, &Multivector::blade(n, &unrank(r, p))?))
        .collect::<Result<_>>()?;
    let image = stack(&generators, n);
    let image_rank = numerical_rank(&image, RANK_TOL);
    let mut basis = columns(&column_basis(&image, RANK_TOL));
    if basis.is_empty() {
        return invalid("L vanishes identically");
    }
    loop {
        let mut all = basis.clone();
        for i in 0..basis.len() {
            for j in i + 1..basis.len() {
                all.push(bracket(&basis[i], &basis[j], n));
            }
        }
        let next = columns(&column_basis(&stack(&all, n), RANK_TOL));
        if next.len() > n * n {
            return Err(SlError::NoConvergence("Lie closure exceeded gl(n)".into()));
        }
        let grew = next.len() > basis.len();
        basis = next;
        if !grew {
            break;
        }
    }
    let span = stack(&basis, n);
    let mut closure_residual: f64 = 0.0;
    for i in 0..basis.len() {
        for j in i + 1..basis.len() {
            let v = DVector::from_vec(bracket(&basis[i], &basis[j], n));
            let rest = &v - &span * (span.transpose() * &v);
            closure_residual = closure_residual.max(rest.norm());
        }
    }
    Ok(SymmetryAlgebra {
        n,
        homogenized,
        surjective: basis.len() == image_rank,
        kernel_dim: generators.len() - image_rank,
        basis,
        image_generators: generators,
        image_rank,
        closure_residual,
    })
}

impl SymmetryAlgebra {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Largest entry of `X^T eta + eta X` over the basis.
    pub fn form_residual(&self, eta: &[f64]) -> Result<f64> {
        if eta.len() != self.n * self.n {
            return Err(SlError::DimensionMismatch("form size".into()));
        }
        let e = to_mat(eta, self.n);
        Ok(self
            .basis
            .iter()
            .map(|x| {
                let x = to_mat(x, self.n);
                (x.transpose() * &e + &e * &x).amax()
            })
            .fold(0.0, f64::max))
    }

    fn lift(&self, x: &[f64]) -> DVector<f64> {
        let mut y = x.to_vec();
        if self.homogenized {
            y.push(1.0);
        }
        DVector::from_vec(y)
    }

    /// Largest normal component of a basis field at the samples, relative
    /// to `|x|`.
    pub fn tangency_residual(&self, samples: &[SamplePoint]) -> f64 {
        let mut worst: f64 = 0.0;
        for p in samples {
            let y = self.lift(&p.x);
            let dim = p.x.len();
            for x in &self.basis {
                let v = to_mat(x, self.n) * &y;
                let mut rest: Vec<f64> = v.iter().take(dim).copied().collect();
                for t in &p.tangent {
                    let d: f64 = rest.iter().zip(t).map(|(a, b)| a * b).sum();
                    rest.iter_mut().zip(t).for_each(|(a, b)| *a -= d * b);
                }
                let r = rest.iter().map(|a| a * a).sum::<f64>().sqrt();
                worst = worst.max(r / y.norm());
            }
        }
        worst
    }

    /// Central-difference estimate of the Lie derivative of `chi` along
    /// `L(alpha)` at `x`, relative to `|L(alpha)| |chi(x)|`.
    pub fn invariance_residual(
        &self,
        data: &EvolutionData,
        alpha: &Multivector,
        x: &[f64],
        h: f64,
    ) -> Result<f64> {
        let (chi, _) = linear_chi(data)?;
        let gen = to_mat(&l_matrix(&chi, alpha)?, self.n);
        let y = self.lift(x);
        let pulled = |s: f64| -> Result<Multivector> {
            let fwd = (&gen * s).exp();
            let back = (&gen * -s).exp();
            let moved: Vec<f64> = (&fwd * &y).iter().copied().collect();
            chi_at(&chi, &moved).push_forward(&from_mat(&back), self.n)
        };
        let mut d = pulled(h)?;
        d.add_scaled(-1.0, &pulled(-h)?)?;
        let scale = gen.norm() * chi_at(&chi, y.as_slice()).norm();
        Ok(d.norm() / (2.0 * h) / scale.max(f64::MIN_POSITIVE))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evodata::centred_quadric;

    #[test]
    fn hyperboloid_gives_so_2_1() {
        let d = centred_quadric(3, 2, 1.0).unwrap();
        let g = symmetry_algebra(&d).unwrap();
        assert_eq!(g.dim(), 3);
        assert!(g.surjective);
        let eta = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0];
        assert!(g.form_residual(&eta).unwrap() < 1e-10);
        let pts = d.sample(20, 3).unwrap();
        assert!(g.tangency_residual(&pts) < 1e-10);
    }
}
