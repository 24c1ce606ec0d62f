//! Small dense helpers shared across modules.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Determinant of a square complex matrix given column by column.
pub fn det_complex(cols: &[&[Complex64]]) -> Complex64 {
    let n = cols.len();
    if n == 0 {
        return Complex64::new(1.0, 0.0);
    }
    let mut a: Vec<Complex64> = Vec::with_capacity(n * n);
    for c in cols {
        debug_assert_eq!(c.len(), n);
        a.extend_from_slice(c);
    }
    // a[col * n + row]
    let mut det = Complex64::new(1.0, 0.0);
    for k in 0..n {
        let mut p = k;
        let mut best = a[k * n + k].norm();
        for r in k + 1..n {
            let v = a[k * n + r].norm();
            if v > best {
                best = v;
                p = r;
            }
        }
        if best == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        if p != k {
            for c in 0..n {
                a.swap(c * n + k, c * n + p);
            }
            det = -det;
        }
        let piv = a[k * n + k];
        det *= piv;
        for r in k + 1..n {
            let f = a[k * n + r] / piv;
            if f != Complex64::new(0.0, 0.0) {
                for c in k + 1..n {
                    let v = a[c * n + k];
                    a[c * n + r] -= f * v;
                }
            }
        }
    }
    det
}

/// Determinant of a square real matrix stored row-major.
pub fn det_real(mut a: Vec<f64>, n: usize) -> f64 {
    let mut det = 1.0;
    for k in 0..n {
        let mut p = k;
        for r in k + 1..n {
            if a[r * n + k].abs() > a[p * n + k].abs() {
                p = r;
            }
        }
        if a[p * n + k] == 0.0 {
            return 0.0;
        }
        if p != k {
            for c in 0..n {
                a.swap(k * n + c, p * n + c);
            }
            det = -det;
        }
        let piv = a[k * n + k];
        det *= piv;
        for r in k + 1..n {
            let f = a[r * n + k] / piv;
            for c in k + 1..n {
                a[r * n + c] -= f * a[k * n + c];
            }
        }
    }
    det
}

/// One-sided Jacobi: rotates column pairs of `m` until they are mutually
/// orthogonal, returning the rotated matrix and the accumulated rotation.
/// The column norms are the singular values and the normalized nonzero
/// columns are left singular vectors.
fn jacobi_columns(m: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut a = m.clone();
    let c = a.ncols();
    let mut v = DMatrix::<f64>::identity(c, c);
    let rotate = |x: &mut DMatrix<f64>, i: usize, j: usize, cs: f64, sn: f64| {
        for r in 0..x.nrows() {
            let (p, q) = (x[(r, i)], x[(r, j)]);
            x[(r, i)] = cs * p - sn * q;
            x[(r, j)] = sn * p + cs * q;
        }
    };
    for _sweep in 0..60 {
        let mut rotated = false;
        for i in 0..c {
            for j in i + 1..c {
                let alpha = a.column(i).norm_squared();
                let beta = a.column(j).norm_squared();
                let gamma = a.column(i).dot(&a.column(j));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                rotate(&mut a, i, j, cs, sn);
                rotate(&mut v, i, j, cs, sn);
            }
        }
        if !rotated {
            break;
        }
    }
    (a, v)
}

fn column_norms(a: &DMatrix<f64>) -> Vec<f64> {
    (0..a.ncols()).map(|k| a.column(k).norm()).collect()
}

/// Singular values in descending order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let wide = m.ncols() > m.nrows();
    let (a, _) = jacobi_columns(&if wide { m.transpose() } else { m.clone() });
    let mut s = column_norms(&a);
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Numerical rank with threshold `rel` times the largest singular value.
pub fn numerical_rank(m: &DMatrix<f64>, rel: f64) -> usize {
    let s = singular_values(m);
    match s.first() {
        None => 0,
        Some(0.0) => 0,
        Some(&top) => s.iter().filter(|&&v| v > rel * top).count(),
    }
}

/// Orthonormal basis (as columns) of the column span of `m`.
pub fn column_basis(m: &DMatrix<f64>, rel: f64) -> DMatrix<f64> {
    if m.ncols() == 0 || m.nrows() == 0 {
        return DMatrix::zeros(m.nrows(), 0);
    }
    // for wide matrices, m = J W^T with J orthogonal; the columns of J
    // paired with nonzero columns of W span the range
    let wide = m.ncols() > m.nrows();
    let (a, v) = jacobi_columns(&if wide { m.transpose() } else { m.clone() });
    let norms = column_norms(&a);
    let top = norms.iter().copied().fold(0.0, f64::max);
    let mut keep: Vec<usize> = (0..norms.len()).filter(|&i| top > 0.0 && norms[i] > rel * top).collect();
    keep.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]).then(x.cmp(&y)));
    if wide {
        DMatrix::from_fn(m.nrows(), keep.len(), |r, c| v[(r, keep[c])])
    } else {
        DMatrix::from_fn(m.nrows(), keep.len(), |r, c| a[(r, keep[c])] / norms[keep[c]])
    }
}

/// Orthonormal basis of the orthogonal complement of the span of `v`
/// inside R^n, returned as rows.
pub fn orthogonal_complement(vs: &[Vec<f64>], n: usize) -> Vec<Vec<f64>> {
    let m = DMatrix::from_fn(n, vs.len(), |r, c| vs[c][r]);
    let full = DMatrix::<f64>::identity(n, n);
    let basis = column_basis(&m, 1e-12);
    // project out the span from the identity columns and orthonormalize
    let proj = &full - &basis * basis.transpose();
    if proj.amax() <= 1e-8 {
        return Vec::new();
    }
    let comp = column_basis(&proj, 1e-8);
    (0..comp.ncols())
        .map(|c| comp.column(c).iter().copied().collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn determinants() {
        let a = vec![2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 4.0];
        assert!((det_real(a, 3) - 18.0).abs() < 1e-12);
        let i = Complex64::i();
        let one = Complex64::new(1.0, 0.0);
        let c0 = [one, i];
        let c1 = [i, one];
        // det [[1, i], [i, 1]] = 1 - i^2 = 2
        assert!((det_complex(&[&c0, &c1]) - 2.0).norm() < 1e-15);
    }

    #[test]
    fn rank_deficient_two_by_two() {
        // a projector onto a line has singular values exactly 1 and 0
        let v = [0.7209320224934022, 0.6930057856494226];
        let p = DMatrix::from_fn(2, 2, |r, c| f64::from(u8::from(r == c)) - v[r] * v[c]);
        let s = singular_values(&p);
        assert!((s[0] - 1.0).abs() < 1e-14 && s[1] < 1e-14);
        let b = column_basis(&p, 1e-8);
        assert_eq!(b.ncols(), 1);
        assert!((b[(0, 0)] * v[0] + b[(1, 0)] * v[1]).abs() < 1e-14);
    }

    #[test]
    fn complement_is_orthogonal() {
        let v = vec![vec![1.0, 1.0, 0.0]];
        let c = orthogonal_complement(&v, 3);
        assert_eq!(c.len(), 2);
        for w in &c {
            assert!((w[0] + w[1]).abs() < 1e-12);
        }
    }
}
