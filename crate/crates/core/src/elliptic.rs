//! Jacobi elliptic functions and the complete elliptic integral of the
//! first kind, computed with the arithmetic-geometric mean.
//!
//! All functions take the modulus `k` (not the parameter `k^2`).

use std::f64::consts::PI;

use crate::error::{invalid, Result};

const MAX_ITER: usize = 64;
const EPSILON: f64 = f64::EPSILON;

/// Values of `sn`, `cn` and `dn` at one point.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Jacobi {
    pub sn: f64,
    pub cn: f64,
    pub dn: f64,
}

fn complementary(k: f64) -> f64 {
    ((1.0 - k) * (1.0 + k)).max(0.0).sqrt()
}

fn check_modulus(k: f64) -> Result<f64> {
    if !k.is_finite() || k.abs() > 1.0 {
        return invalid(format!("elliptic modulus must satisfy |k| <= 1, got {k}"));
    }
    Ok(k.abs())
}

/// Descending AGM sequence starting at (1, k'). Returns the `a_n` and `c_n`.
fn agm_sequence(k: f64) -> (Vec<f64>, Vec<f64>) {
    let mut a = vec![1.0];
    let mut c = vec![k];
    let mut b = complementary(k);
    for _ in 0..MAX_ITER {
        let (an, bn) = (*a.last().unwrap(), b);
        let cn = 0.5 * (an - bn);
        a.push(0.5 * (an + bn));
        c.push(cn);
        b = (an * bn).sqrt();
        if cn.abs() <= EPSILON * an {
            break;
        }
    }
    (a, c)
}

/// Complete elliptic integral of the first kind `K(k)` for `0 <= |k| < 1`.
pub fn complete_k(k: f64) -> Result<f64> {
    let k = check_modulus(k)?;
    if k == 1.0 {
        return invalid("K(k) diverges at k = 1");
    }
    let (a, _) = agm_sequence(k);
    Ok(PI / (2.0 * a.last().unwrap()))
}

/// Jacobi elliptic functions `sn(t, k)`, `cn(t, k)`, `dn(t, k)`.
pub fn jacobi(t: f64, k: f64) -> Result<Jacobi> {
    let k = check_modulus(k)?;
    if !t.is_finite() {
        return invalid("argument must be finite");
    }
    if k == 1.0 {
        let s = 1.0 / t.cosh();
        return Ok(Jacobi {
            sn: t.tanh(),
            cn: s,
            dn: s,
        });
    }
    if k == 0.0 {
        return Ok(Jacobi {
            sn: t.sin(),
            cn: t.cos(),
            dn: 1.0,
        });
    }
    let (a, c) = agm_sequence(k);
    let n = a.len() - 1;
    let quarter = PI / (2.0 * a[n]);
    let period = 4.0 * quarter;
    let t = t - period * (t / period).round();

    let mut phi = 2f64.powi(n as i32) * a[n] * t;
    for j in (1..=n).rev() {
        phi = 0.5 * (phi + (c[j] / a[j] * phi.sin()).asin());
    }
    let (sn, cn) = phi.sin_cos();
    let kp = complementary(k);
    let dn = (kp * kp + k * k * cn * cn).sqrt();
    Ok(Jacobi { sn, cn, dn })
}

/// Derivatives with respect to the argument.
pub fn jacobi_derivatives(j: &Jacobi, k: f64) -> Jacobi {
    Jacobi {
        sn: j.cn * j.dn,
        cn: -j.sn * j.dn,
        dn: -k * k * j.sn * j.cn,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_zero_reduces_to_trig() {
        for &t in &[0.0, 0.3, 1.7, -4.2, 12.0] {
            let j = jacobi(t, 0.0).unwrap();
            assert!((j.sn - t.sin()).abs() < 1e-15);
            assert!((j.cn - t.cos()).abs() < 1e-15);
            assert_eq!(j.dn, 1.0);
        }
    }

    #[test]
    fn complete_k_known_values() {
        assert!((complete_k(0.0).unwrap() - PI / 2.0).abs() < 1e-15);
        // K(1/sqrt 2) = Gamma(1/4)^2 / (4 sqrt(pi))
        let expected = 1.854_074_677_301_372;
        assert!((complete_k(0.5f64.sqrt()).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn quarter_period_values() {
        let k = 0.8;
        let kk = complete_k(k).unwrap();
        let j = jacobi(kk, k).unwrap();
        assert!((j.sn - 1.0).abs() < 1e-14);
        assert!(j.cn.abs() < 1e-14);
        assert!((j.dn - 0.6).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_modulus() {
        assert!(jacobi(1.0, 1.5).is_err());
        assert!(complete_k(1.0).is_err());
    }
}
