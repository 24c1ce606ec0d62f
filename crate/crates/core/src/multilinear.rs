//! Dense multivectors and forms on R^n.
//!
//! A degree-`k` element is stored as one coefficient per increasing index
//! set `i_1 < ... < i_k`, ordered by colexicographic rank. The same storage
//! holds forms: a form's coefficient on `I` is its value on `e_I`.
//!
//! Sign convention for contraction: a degree-`p` form is fed into the
//! *last* `p` slots of the multivector, so the free indices come first.
//! For example `(e_1 ^ e_2) . dx_1 = -e_2`.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SlError};
use crate::linalg::{det_complex, det_real};
use num_complex::Complex64;

/// Largest supported ambient dimension.
pub const MAX_DIM: usize = 16;

/// Binomial coefficient.
pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r = 1usize;
    for i in 0..k {
        r = r * (n - i) / (i + 1);
    }
    r
}

/// Colexicographic rank of an increasing index list.
pub fn rank(idx: &[usize]) -> usize {
    idx.iter().enumerate().map(|(j, &i)| binomial(i, j + 1)).sum()
}

/// Inverse of [`rank`].
pub fn unrank(mut r: usize, k: usize) -> Vec<usize> {
    let mut out = vec![0; k];
    for j in (0..k).rev() {
        let mut i = j;
        while binomial(i + 1, j + 1) <= r {
            i += 1;
        }
        out[j] = i;
        r -= binomial(i, j + 1);
    }
    out
}

/// Sort an index list, returning the permutation sign, or `None` if an
/// index repeats.
pub fn sort_with_sign(idx: &[usize]) -> Option<(Vec<usize>, f64)> {
    let mut v = idx.to_vec();
    let mut sign = 1.0;
    for i in 1..v.len() {
        let mut j = i;
        while j > 0 && v[j - 1] > v[j] {
            v.swap(j - 1, j);
            sign = -sign;
            j -= 1;
        }
    }
    if v.windows(2).any(|w| w[0] == w[1]) {
        return None;
    }
    Some((v, sign))
}

/// A homogeneous element of the exterior algebra of R^n.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Multivector {
    n: usize,
    k: usize,
    coeffs: Vec<f64>,
}

impl Multivector {
    pub fn zero(n: usize, k: usize) -> Result<Self> {
        if n > MAX_DIM {
            return Err(SlError::InvalidInput(format!(
                "ambient dimension {n} exceeds {MAX_DIM}"
            )));
        }
        if k > n {
            return Err(SlError::DimensionMismatch(format!(
                "degree {k} exceeds dimension {n}"
            )));
        }
        Ok(Multivector {
            n,
            k,
            coeffs: vec![0.0; binomial(n, k)],
        })
    }

    pub fn from_coeffs(n: usize, k: usize, coeffs: Vec<f64>) -> Result<Self> {
        let mut z = Self::zero(n, k)?;
        if coeffs.len() != z.coeffs.len() {
            return Err(SlError::DimensionMismatch(format!(
                "expected {} coefficients, got {}",
                z.coeffs.len(),
                coeffs.len()
            )));
        }
        z.coeffs = coeffs;
        Ok(z)
    }

    /// `e_{i_1} ^ ... ^ e_{i_k}` (0-based indices, any order).
    pub fn blade(n: usize, idx: &[usize]) -> Result<Self> {
        let mut z = Self::zero(n, idx.len())?;
        if let Some(&bad) = idx.iter().find(|&&i| i >= n) {
            return Err(SlError::DimensionMismatch(format!(
                "index {bad} out of range for dimension {n}"
            )));
        }
        if let Some((sorted, sign)) = sort_with_sign(idx) {
            z.coeffs[rank(&sorted)] = sign;
        }
        Ok(z)
    }

    /// A vector viewed as a degree-one element.
    pub fn vector(v: &[f64]) -> Result<Self> {
        Self::from_coeffs(v.len(), 1, v.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> usize {
        self.k
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    /// Signed coefficient on `e_{idx}`.
    pub fn get(&self, idx: &[usize]) -> f64 {
        match sort_with_sign(idx) {
            Some((s, sign)) if s.len() == self.k && s.iter().all(|&i| i < self.n) => {
                sign * self.coeffs[rank(&s)]
            }
            _ => 0.0,
        }
    }

    /// Iterate over `(indices, coefficient)` for nonzero coefficients.
    pub fn terms(&self) -> impl Iterator<Item = (Vec<usize>, f64)> + '_ {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(r, &c)| (unrank(r, self.k), c))
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.n != other.n || self.k != other.k {
            return Err(SlError::DimensionMismatch(format!(
                "({}, {}) vs ({}, {})",
                self.n, self.k, other.n, other.k
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let mut r = self.clone();
        for (a, b) in r.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b;
        }
        Ok(r)
    }

    pub fn add_scaled(&mut self, s: f64, other: &Self) -> Result<()> {
        self.check_same(other)?;
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += s * b;
        }
        Ok(())
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut r = self.clone();
        r.coeffs.iter_mut().for_each(|c| *c *= s);
        r
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Exterior product.
    pub fn wedge(&self, other: &Self) -> Result<Self> {
        if self.n != other.n {
            return Err(SlError::DimensionMismatch(format!(
                "wedge of elements over R^{} and R^{}",
                self.n, other.n
            )));
        }
        let mut out = Self::zero(self.n, self.k + other.k)?;
        for (i, a) in self.terms() {
            for (j, b) in other.terms() {
                let mut idx = i.clone();
                idx.extend_from_slice(&j);
                if let Some((s, sign)) = sort_with_sign(&idx) {
                    out.coeffs[rank(&s)] += sign * a * b;
                }
            }
        }
        Ok(out)
    }

    /// Embed into R^{n+extra} using the first `n` coordinates.
    pub fn embed(&self, extra: usize) -> Result<Self> {
        let mut out = Self::zero(self.n + extra, self.k)?;
        for (i, c) in self.terms() {
            out.coeffs[rank(&i)] = c;
        }
        Ok(out)
    }

    /// Image under the linear map `a` (row-major `rows x n`), i.e. the
    /// induced map on the `k`-th exterior power.
    pub fn push_forward(&self, a: &[f64], rows: usize) -> Result<Self> {
        if a.len() != rows * self.n {
            return Err(SlError::DimensionMismatch("matrix shape".into()));
        }
        let mut out = Self::zero(rows, self.k)?;
        let k = self.k;
        for (cols, c) in self.terms() {
            for r in 0..out.coeffs.len() {
                let rws = unrank(r, k);
                let mut sub = Vec::with_capacity(k * k);
                for &ri in &rws {
                    for &ci in &cols {
                        sub.push(a[ri * self.n + ci]);
                    }
                }
                out.coeffs[r] += c * det_real(sub, k);
            }
        }
        Ok(out)
    }
}

/// Contract the form `alpha` (degree `p`) into the last `p` slots of the
/// multivector `chi` (degree `q >= p`), giving a degree `q - p` multivector.
pub fn interior(chi: &Multivector, alpha: &Multivector) -> Result<Multivector> {
    if chi.n != alpha.n {
        return Err(SlError::DimensionMismatch(format!(
            "multivector over R^{} and form over R^{}",
            chi.n, alpha.n
        )));
    }
    if alpha.k > chi.k {
        return Err(SlError::DimensionMismatch(format!(
            "form degree {} exceeds multivector degree {}",
            alpha.k, chi.k
        )));
    }
    let mut out = Multivector::zero(chi.n, chi.k - alpha.k)?;
    for (i, c) in chi.terms() {
        for (j, a) in alpha.terms() {
            if !j.iter().all(|x| i.contains(x)) {
                continue;
            }
            let free: Vec<usize> = i.iter().copied().filter(|x| !j.contains(x)).collect();
            let mut order = free.clone();
            order.extend_from_slice(&j);
            // e_I = sign * e_free ^ e_J
            let (_, sign) = sort_with_sign(&order).expect("distinct indices");
            out.coeffs[rank(&free)] += sign * c * a;
        }
    }
    Ok(out)
}

/// Contraction of `chi` in degree `m-1` with a form of degree `m-2`,
/// returning a vector in R^n.
pub fn contract(chi: &Multivector, alpha: &Multivector) -> Result<Vec<f64>> {
    if alpha.k + 1 != chi.k {
        return Err(SlError::DimensionMismatch(format!(
            "contraction needs degrees (p+1, p), got ({}, {})",
            chi.k, alpha.k
        )));
    }
    Ok(interior(chi, alpha)?.coeffs)
}

/// Reads a real 2m-vector with interleaved `(Re, Im)` pairs as a point of C^m.
pub fn to_complex(v: &[f64]) -> Vec<Complex64> {
    v.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect()
}

/// Inverse of [`to_complex`].
pub fn from_complex(z: &[Complex64]) -> Vec<f64> {
    z.iter().flat_map(|c| [c.re, c.im]).collect()
}

fn check_len(v: &[f64], m: usize) -> Result<()> {
    if v.len() != 2 * m {
        return Err(SlError::DimensionMismatch(format!(
            "expected a vector of length {}, got {}",
            2 * m,
            v.len()
        )));
    }
    Ok(())
}

/// The Kahler form `omega = sum dx_j ^ dy_j` on C^m.
pub fn eval_omega(v1: &[f64], v2: &[f64], m: usize) -> Result<f64> {
    check_len(v1, m)?;
    check_len(v2, m)?;
    Ok((0..m)
        .map(|j| v1[2 * j] * v2[2 * j + 1] - v1[2 * j + 1] * v2[2 * j])
        .sum())
}

/// An ordered list of `m` tangent vectors in R^{2m}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub m: usize,
    pub vectors: Vec<Vec<f64>>,
}

impl Frame {
    pub fn new(vectors: Vec<Vec<f64>>) -> Result<Self> {
        let m = vectors.len();
        for v in &vectors {
            check_len(v, m)?;
        }
        Ok(Frame { m, vectors })
    }
}

/// The holomorphic volume form `dz_1 ^ ... ^ dz_m` on a frame.
pub fn eval_omega_complex(frame: &Frame) -> Result<Complex64> {
    if frame.vectors.len() != frame.m {
        return Err(SlError::DimensionMismatch("frame must hold m vectors".into()));
    }
    let cols: Vec<Vec<Complex64>> = frame
        .vectors
        .iter()
        .map(|v| check_len(v, frame.m).map(|_| to_complex(v)))
        .collect::<Result<_>>()?;
    let refs: Vec<&[Complex64]> = cols.iter().map(|c| c.as_slice()).collect();
    Ok(det_complex(&refs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_roundtrip() {
        for k in 0..=5 {
            for r in 0..binomial(8, k) {
                let idx = unrank(r, k);
                assert!(idx.windows(2).all(|w| w[0] < w[1]));
                assert_eq!(rank(&idx), r);
            }
        }
    }

    #[test]
    fn wedge_signs() {
        let e1 = Multivector::blade(3, &[0]).unwrap();
        let e2 = Multivector::blade(3, &[1]).unwrap();
        let e12 = e1.wedge(&e2).unwrap();
        let e21 = e2.wedge(&e1).unwrap();
        assert_eq!(e12.get(&[0, 1]), 1.0);
        assert_eq!(e21.get(&[0, 1]), -1.0);
        assert_eq!(e1.wedge(&e1).unwrap().norm(), 0.0);
    }

    #[test]
    fn documented_contraction_example() {
        let chi = Multivector::blade(3, &[0, 1]).unwrap();
        let dx1 = Multivector::blade(3, &[0]).unwrap();
        let v = contract(&chi, &dx1).unwrap();
        assert_eq!(v, vec![0.0, -1.0, 0.0]);
    }

    #[test]
    fn oversized_dimension_rejected() {
        assert!(Multivector::zero(17, 2).is_err());
        assert!(Multivector::zero(3, 4).is_err());
    }

    #[test]
    fn push_forward_of_top_degree_is_determinant() {
        let a = vec![2.0, 1.0, 0.0, 3.0];
        let top = Multivector::blade(2, &[0, 1]).unwrap();
        let img = top.push_forward(&a, 2).unwrap();
        assert!((img.get(&[0, 1]) - 6.0).abs() < 1e-15);
    }

    #[test]
    fn omega_on_axes() {
        let e1 = [1.0, 0.0, 0.0, 0.0];
        let ie1 = [0.0, 1.0, 0.0, 0.0];
        let e2 = [0.0, 0.0, 1.0, 0.0];
        assert_eq!(eval_omega(&e1, &ie1, 2).unwrap(), 1.0);
        assert_eq!(eval_omega(&e1, &e2, 2).unwrap(), 0.0);
        assert!(eval_omega(&e1, &[1.0], 2).is_err());
    }

    #[test]
    fn holomorphic_volume_on_axes() {
        let f = Frame::new(vec![vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 0.0, 1.0, 0.0]]).unwrap();
        assert_eq!(eval_omega_complex(&f).unwrap(), Complex64::new(1.0, 0.0));
        let g = Frame::new(vec![vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 0.0, 0.0, 1.0]]).unwrap();
        assert_eq!(eval_omega_complex(&g).unwrap(), Complex64::new(0.0, 1.0));
    }
}
