//! Classification of evolution data with `m = n` through the 1-form
//! `beta = (dx_1 ^ .. ^ dx_n) . chi` and its exterior derivative.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{complement_blade, EvolutionData, QuadricSpec};
use crate::error::{invalid, Result};
use crate::linalg::{column_basis, singular_values};

/// Relative singular values below this count as zero.
const ZERO_BAND: f64 = 1e-11;
/// Relative singular values above this count as nonzero.
const NONZERO_BAND: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "label", rename_all = "snake_case")]
pub enum SquareClass {
    /// `beta = dQ` and `P` lies in the level set `Q = c`.
    Quadric { spec: QuadricSpec, c: f64 },
    /// `d beta = gamma ^ delta` with `beta` in the span of `gamma, delta`.
    CurveTimesPlane { gamma: Vec<f64>, delta: Vec<f64> },
    Indeterminate { reason: String },
}

/// `beta(x) = B x + beta0`, returned as `(B row-major, beta0)`.
fn beta_form(data: &EvolutionData) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = data.n;
    let mut b = vec![0.0; n * n];
    let mut b0 = vec![0.0; n];
    for j in 0..n {
        let blade = complement_blade(n, j)?;
        let idx: Vec<usize> = blade.terms().next().map(|(i, _)| i).unwrap_or_default();
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        for i in 0..n {
            b[j * n + i] = sign * data.chi_linear[i].get(&idx);
        }
        b0[j] = sign * data.chi_const.get(&idx);
    }
    Ok((b, b0))
}

fn band(sv: &[f64], scale: f64) -> std::result::Result<usize, String> {
    let mut rank = 0;
    for &s in sv {
        let r = s / scale;
        if r > NONZERO_BAND {
            rank += 1;
        } else if r > ZERO_BAND {
            return Err(format!(
                "singular value {s:e} of d(beta) is numerically ambiguous"
            ));
        }
    }
    Ok(rank)
}

/// Decides whether `m = n` data comes from a quadric or from a planar curve
/// times R^{m-2}.
pub fn classify_square(data: &EvolutionData) -> Result<SquareClass> {
    let n = data.n;
    if data.m != n {
        return invalid(format!("classification needs m = n, got m = {}, n = {n}", data.m));
    }
    let (b, b0) = beta_form(data)?;
    let scale = b
        .iter()
        .chain(&b0)
        .fold(0.0f64, |a, v| a.max(v.abs()));
    if scale == 0.0 {
        return Ok(SquareClass::Indeterminate {
            reason: "chi vanishes identically".into(),
        });
    }
    let dbeta = DMatrix::from_fn(n, n, |i, j| b[j * n + i] - b[i * n + j]);
    let sv = singular_values(&dbeta);
    let rank = match band(&sv, scale) {
        Ok(r) => r,
        Err(reason) => return Ok(SquareClass::Indeterminate { reason }),
    };
    match rank {
        0 => {
            let s: Vec<f64> = (0..n * n)
                .map(|k| {
                    let (i, j) = (k / n, k % n);
                    0.25 * (b[i * n + j] + b[j * n + i])
                })
                .collect();
            let spec = QuadricSpec::new(n, s, b0, 0.0)?;
            let p = data.sample(1, 11)?;
            let c = spec.value(&p[0].x);
            Ok(SquareClass::Quadric { spec, c })
        }
        2 => {
            let basis = column_basis(&dbeta, 1e-6);
            let pts = data.sample(4 * n, 12)?;
            let mut worst: f64 = 0.0;
            for p in &pts {
                let beta: Vec<f64> = (0..n)
                    .map(|j| (0..n).map(|i| b[j * n + i] * p.x[i]).sum::<f64>() + b0[j])
                    .collect();
                let v = nalgebra::DVector::from_vec(beta);
                let rest = &v - &basis * (basis.transpose() * &v);
                worst = worst.max(rest.norm() / v.norm().max(f64::MIN_POSITIVE));
            }
            if worst > NONZERO_BAND {
                return Ok(SquareClass::Indeterminate {
                    reason: format!("beta leaves the span of d(beta) by {worst:e}"),
                });
            }
            let col = |c: usize| basis.column(c).iter().copied().collect();
            Ok(SquareClass::CurveTimesPlane {
                gamma: col(0),
                delta: col(1),
            })
        }
        r => Ok(SquareClass::Indeterminate {
            reason: format!("d(beta) has rank {r}, so beta ^ d(beta) does not vanish"),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evodata::{centred_quadric, curve_data};

    #[test]
    fn hyperboloid_is_a_quadric() {
        let d = centred_quadric(3, 1, 1.0).unwrap();
        let SquareClass::Quadric { spec, c } = classify_square(&d).unwrap() else {
            panic!("expected quadric")
        };
        let expect = [1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, -1.0];
        for (a, b) in spec.s.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((c - 1.0).abs() < 1e-8);
    }

    #[test]
    fn stretched_curve_is_curve_times_plane() {
        let d = curve_data([[1.0, 0.0], [0.0, 1.0]], [0.0, 0.0], 3).unwrap();
        assert!(matches!(
            classify_square(&d).unwrap(),
            SquareClass::CurveTimesPlane { .. }
        ));
    }
}
