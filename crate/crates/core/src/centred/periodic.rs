//! Parameters with rational phase advances, and the topology of the
//! resulting closed special Lagrangian m-folds.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{betas_at, integrate_w, CentredParams, Signature};
use crate::error::{invalid, Result, SlError};
use crate::ode::OdeOptions;
use crate::roots::{bracketed_root, fractions_between, gcd, lcm, recognize_rational};

/// A curve of normalized signatures to scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    /// `m = 3`, `a = 1`, `alpha = (alpha_1, alpha_2, alpha_2)`. Normalization
    /// forces `alpha_2 = 2 alpha_1`, so up to scale this is `(1, 2, 2)`.
    Sym,
    /// `m = 3`, `a = 1`, `alpha = (1, s, s / (s - 1))` for `s` in the range.
    Line { s_min: f64, s_max: f64 },
    /// One fixed normalized signature; only `A` varies.
    Fixed { a: usize, alphas: Vec<f64> },
}

impl Family {
    fn line_signature(s: f64) -> Result<Signature> {
        if !(s > 1.0) {
            return invalid(format!("line family needs s > 1, got {s}"));
        }
        Signature::new(1, vec![1.0, s, s / (s - 1.0)])
    }

    /// The signature at scan parameter `s` (ignored for one-point families).
    pub fn signature(&self, s: f64) -> Result<Signature> {
        match self {
            Family::Sym => Signature::new(1, vec![1.0, 2.0, 2.0]),
            Family::Line { .. } => Self::line_signature(s),
            Family::Fixed { a, alphas } => {
                let sig = Signature::new(*a, alphas.clone())?;
                sig.require_normalized()?;
                Ok(sig)
            }
        }
    }
}

/// Options for [`periodic_search`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    pub b_max: i64,
    /// Acceptance threshold for `|beta_j - pi a_j / b|`.
    pub tol: f64,
    /// Samples of `A / A_max` per scan line.
    pub grid: usize,
    /// Samples of the family parameter (two-parameter families only).
    pub s_grid: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            b_max: 8,
            tol: 1e-8,
            grid: 48,
            s_grid: 24,
        }
    }
}

/// A parameter set whose phase advances are `beta_j = pi a_j / b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicSolution {
    pub m: usize,
    pub a: usize,
    pub alphas: Vec<f64>,
    #[serde(rename = "A")]
    pub big_a: f64,
    pub numerators: Vec<i64>,
    pub b: i64,
    pub betas: Vec<f64>,
    pub period: f64,
    pub residual: f64,
}

impl PeriodicSolution {
    pub fn params(&self, c: f64) -> Result<CentredParams> {
        CentredParams::new(self.a, self.alphas.clone(), self.big_a, c)
    }
}

/// Write `beta / pi` as integers over a common denominator at most `b_max`.
pub fn rationalize(betas: &[f64], b_max: i64, tol: f64) -> Option<(Vec<i64>, i64)> {
    let mut fracs = Vec::with_capacity(betas.len());
    for &b in betas {
        fracs.push(recognize_rational(b / PI, b_max, tol / PI)?);
    }
    let den = fracs.iter().fold(1, |acc, &(_, q)| lcm(acc, q));
    if den > b_max {
        return None;
    }
    let mut nums: Vec<i64> = fracs.iter().map(|&(p, q)| p * (den / q)).collect();
    if nums.iter().sum::<i64>() != 0 {
        return None;
    }
    let g = nums.iter().fold(den, |acc, &n| gcd(acc, n));
    nums.iter_mut().for_each(|n| *n /= g);
    Some((nums, den / g))
}

fn a_fraction_grid(n: usize) -> Vec<f64> {
    // denser near both ends, where beta varies fastest
    (0..n)
        .map(|i| {
            let x = (i as f64 + 0.5) / n as f64;
            let y = 0.5 - 0.5 * (PI * x).cos();
            1e-4 + (1.0 - 2e-4) * y
        })
        .collect()
}

/// Solve `beta_0(A) = target` on one signature, scanning `A / A_max`.
fn solve_a_for_target(sig: &Signature, grid: &[f64], vals: &[f64], target: f64) -> Result<Vec<f64>> {
    let a_max = sig.a_max();
    let mut out = Vec::new();
    for i in 0..grid.len() - 1 {
        let (f0, f1) = (vals[i] - target, vals[i + 1] - target);
        if f0 == 0.0 {
            out.push(grid[i] * a_max);
        } else if f0.signum() != f1.signum() {
            let x = bracketed_root(
                |x| Ok(betas_at(sig, x * a_max)?.0[0] - target),
                grid[i],
                grid[i + 1],
                1e-15,
            )?;
            out.push(x * a_max);
        }
    }
    Ok(out)
}

fn finish(sig: &Signature, big_a: f64, opts: &SearchOptions) -> Result<Option<PeriodicSolution>> {
    let (betas, period) = betas_at(sig, big_a)?;
    let Some((nums, b)) = rationalize(&betas, opts.b_max, opts.tol) else {
        return Ok(None);
    };
    let residual = betas
        .iter()
        .zip(&nums)
        .map(|(beta, &n)| (beta - PI * n as f64 / b as f64).abs())
        .fold(0.0, f64::max);
    if residual > opts.tol {
        return Ok(None);
    }
    Ok(Some(PeriodicSolution {
        m: sig.m(),
        a: sig.a,
        alphas: sig.alphas.clone(),
        big_a,
        numerators: nums,
        b,
        betas,
        period,
        residual,
    }))
}

fn scan_signature(sig: &Signature, opts: &SearchOptions) -> Result<Vec<PeriodicSolution>> {
    let grid = a_fraction_grid(opts.grid);
    let a_max = sig.a_max();
    let vals: Vec<f64> = grid
        .par_iter()
        .map(|x| Ok(betas_at(sig, x * a_max)?.0[0]))
        .collect::<Result<_>>()?;
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min) / PI;
    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max) / PI;
    let found: Vec<Vec<PeriodicSolution>> = fractions_between(lo, hi, opts.b_max)
        .into_par_iter()
        .map(|(p, q)| {
            let target = PI * p as f64 / q as f64;
            let mut sols = Vec::new();
            for big_a in solve_a_for_target(sig, &grid, &vals, target)? {
                sols.extend(finish(sig, big_a, opts)?);
            }
            Ok(sols)
        })
        .collect::<Result<_>>()?;
    Ok(found.into_iter().flatten().collect())
}

fn scan_line(s_min: f64, s_max: f64, opts: &SearchOptions) -> Result<Vec<PeriodicSolution>> {
    if !(s_min > 1.0 && s_max > s_min) {
        return invalid(format!("line family needs 1 < s_min < s_max, got ({s_min}, {s_max})"));
    }
    let grid = a_fraction_grid(opts.grid);
    let n_s = opts.s_grid.max(2);
    let ss: Vec<f64> = (0..n_s)
        .map(|i| s_min + (s_max - s_min) * i as f64 / (n_s - 1) as f64)
        .collect();
    // beta_1 over the (s, A) grid, to find which targets are reachable
    let table: Vec<Vec<f64>> = ss
        .par_iter()
        .map(|&s| {
            let sig = Family::line_signature(s)?;
            let a_max = sig.a_max();
            grid.iter().map(|x| Ok(betas_at(&sig, x * a_max)?.0[0])).collect()
        })
        .collect::<Result<_>>()?;
    let lo = table.iter().flatten().copied().fold(f64::INFINITY, f64::min) / PI;
    let hi = table.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max) / PI;
    let found: Vec<Vec<PeriodicSolution>> = fractions_between(lo, hi, opts.b_max)
        .into_par_iter()
        .map(|(p1, q1)| scan_line_target(&ss, &grid, &table, (p1, q1), s_min, s_max, opts))
        .collect::<Result<_>>()?;
    Ok(found.into_iter().flatten().collect())
}

/// Solutions on the line family with `beta_1 = pi p1 / q1`.
fn scan_line_target(
    ss: &[f64],
    grid: &[f64],
    table: &[Vec<f64>],
    (p1, q1): (i64, i64),
    s_min: f64,
    s_max: f64,
    opts: &SearchOptions,
) -> Result<Vec<PeriodicSolution>> {
    let n_s = ss.len();
    let mut out = Vec::new();
    let t1 = PI * p1 as f64 / q1 as f64;
    // for each s, the A solving beta_1 = t1 (first branch), then beta_2
    let mut curve: Vec<(f64, f64, f64)> = Vec::new();
    for (i, &s) in ss.iter().enumerate() {
        let sig = Family::line_signature(s)?;
        if let Some(&big_a) = solve_a_for_target(&sig, grid, &table[i], t1)?.first() {
            curve.push((s, big_a, betas_at(&sig, big_a)?.0[1]));
        }
    }
    for w in curve.windows(2) {
        let (s0, _, b0) = w[0];
        let (s1, _, b1) = w[1];
        if (s1 - s0) > 1.5 * (s_max - s_min) / (n_s - 1) as f64 {
            continue;
        }
        for (p2, q2) in fractions_between(b0 / PI, b1 / PI, opts.b_max) {
            let t2 = PI * p2 as f64 / q2 as f64;
            let beta2_at = |s: f64| -> Result<(f64, f64)> {
                let sig = Family::line_signature(s)?;
                let a_max = sig.a_max();
                let vals: Vec<f64> = grid
                    .iter()
                    .map(|x| Ok(betas_at(&sig, x * a_max)?.0[0]))
                    .collect::<Result<_>>()?;
                let big_a = *solve_a_for_target(&sig, grid, &vals, t1)?
                    .first()
                    .ok_or_else(|| SlError::NoConvergence("lost beta_1 branch".into()))?;
                Ok((big_a, betas_at(&sig, big_a)?.0[1]))
            };
            let s_star = bracketed_root(|s| Ok(beta2_at(s)?.1 - t2), s0, s1, 1e-14)?;
            let (big_a, _) = beta2_at(s_star)?;
            let sig = Family::line_signature(s_star)?;
            if let Some(sol) = finish(&sig, big_a, opts)? {
                out.push(sol);
            }
        }
    }
    Ok(out)
}

/// Search a family for parameters with all `beta_j` in `pi Q` with
/// denominator at most `b_max`.
pub fn periodic_search(family: &Family, opts: &SearchOptions) -> Result<Vec<PeriodicSolution>> {
    if opts.b_max < 1 {
        return invalid("b_max must be positive");
    }
    let mut sols = match family {
        Family::Sym | Family::Fixed { .. } => scan_signature(&family.signature(0.0)?, opts)?,
        Family::Line { s_min, s_max } => scan_line(*s_min, *s_max, opts)?,
    };
    sols.sort_by(|x, y| {
        (x.b, &x.numerators)
            .cmp(&(y.b, &y.numerators))
            .then(x.big_a.partial_cmp(&y.big_a).unwrap())
    });
    sols.dedup_by(|x, y| {
        x.b == y.b
            && x.numerators == y.numerators
            && (x.big_a - y.big_a).abs() <= 1e-9 * x.big_a.abs().max(1.0)
            && x.alphas
                .iter()
                .zip(&y.alphas)
                .all(|(p, q)| (p - q).abs() <= 1e-9 * p.abs().max(1.0))
    });
    Ok(sols)
}

/// Check `w_j(t + bT) = (-1)^{a_j} w_j(t)` by direct integration over
/// `[0, b T]` and `[b T, 2 b T]`. Returns the largest deviation.
pub fn verify_periodic(sol: &PeriodicSolution, samples: usize, opts: OdeOptions) -> Result<f64> {
    let p = sol.params(0.0)?;
    let w0 = p.initial_w()?;
    let span = sol.b as f64 * sol.period;
    let n = samples.max(2);
    let times: Vec<f64> = (0..=2 * n).map(|i| span * i as f64 / n as f64).collect();
    let tr = integrate_w(p.a, &w0, &times, opts)?;
    if let Some(t) = tr.escaped {
        return Err(SlError::BlowUp { t });
    }
    let mut worst: f64 = 0.0;
    for i in 0..=n {
        for j in 0..p.m {
            let sign = if sol.numerators[j] % 2 == 0 { 1.0 } else { -1.0 };
            let d: Complex64 = tr.w[i + n][j] - tr.w[i][j] * sign;
            worst = worst.max(d.norm());
        }
    }
    Ok(worst)
}

/// Topological type of the closed special Lagrangian m-fold built from a
/// periodic solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub label: String,
    /// Number of connected pieces.
    pub pieces: usize,
    /// Whether the parametrization `P x S^1` is divided by a free `Z_2`.
    pub z2_quotient: bool,
    /// Whether `N = -N`.
    pub symmetric: Option<bool>,
}

/// Topology from the parity of the numerators and the sign of `c`.
pub fn classify_topology(m: usize, a: usize, numerators: &[i64], c: f64) -> Result<Topology> {
    if numerators.len() != m || a == 0 || a >= m {
        return invalid("need m numerators and 1 <= a < m");
    }
    let any_odd = numerators.iter().any(|n| n % 2 != 0);
    if m == 3 && a == 1 {
        let even = numerators[0] % 2 == 0;
        let t = match (even, c.partial_cmp(&0.0)) {
            (true, Some(std::cmp::Ordering::Greater)) => Topology {
                label: "two pieces N+ and N- = -N+, each S^1 x R^2".into(),
                pieces: 2,
                z2_quotient: any_odd,
                symmetric: Some(false),
            },
            (true, Some(std::cmp::Ordering::Less)) => Topology {
                label: "T^2 x R, with N = -N".into(),
                pieces: 1,
                z2_quotient: any_odd,
                symmetric: Some(true),
            },
            (true, _) => Topology {
                label: "two T^2-cones N+ and N- = -N+".into(),
                pieces: 2,
                z2_quotient: any_odd,
                symmetric: Some(false),
            },
            (false, Some(std::cmp::Ordering::Greater)) => Topology {
                label: "S^1 x R^2, with N = -N".into(),
                pieces: 1,
                z2_quotient: true,
                symmetric: Some(true),
            },
            (false, Some(std::cmp::Ordering::Less)) => Topology {
                label: "line bundle over the Klein bottle, one end T^2 x (0, inf), with N = -N"
                    .into(),
                pieces: 1,
                z2_quotient: true,
                symmetric: Some(true),
            },
            (false, _) => Topology {
                label: "T^2-cone, with N = -N".into(),
                pieces: 1,
                z2_quotient: true,
                symmetric: Some(true),
            },
        };
        return Ok(t);
    }
    let base = if c > 0.0 {
        format!("S^{} x R^{} x S^1", a - 1, m - a)
    } else if c < 0.0 {
        format!("R^{} x S^{} x S^1", a, m - a - 1)
    } else {
        format!("cone on S^{} x S^{} x S^1", a - 1, m - a - 1)
    };
    // an S^0 factor gives two sheets unless the involution swaps them
    let two_sheets = (c > 0.0 && a == 1 && numerators[0] % 2 == 0) || (c < 0.0 && m - a == 1 && numerators[m - 1] % 2 == 0);
    Ok(Topology {
        label: if any_odd {
            format!("({base}) / Z_2")
        } else {
            base
        },
        pieces: if two_sheets { 2 } else { 1 },
        z2_quotient: any_odd,
        symmetric: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rationalize_common_denominator() {
        let b = [-8.0 * PI / 7.0, 4.0 * PI / 7.0, 4.0 * PI / 7.0];
        assert_eq!(rationalize(&b, 8, 1e-10), Some((vec![-8, 4, 4], 7)));
        let b = [-9.0 * PI / 8.0, 9.0 * PI / 16.0, 9.0 * PI / 16.0];
        assert_eq!(rationalize(&b, 8, 1e-10), None);
    }

    #[test]
    fn topology_labels() {
        let t = classify_topology(3, 1, &[-8, 4, 4], 0.0).unwrap();
        assert_eq!(t.pieces, 2);
        assert!(t.label.contains("T^2-cones"));
        let t = classify_topology(3, 1, &[-3, 1, 2], 0.0).unwrap();
        assert_eq!(t.pieces, 1);
        let t = classify_topology(4, 2, &[-1, -1, 1, 1], 1.0).unwrap();
        assert_eq!(t.label, "(S^1 x R^2 x S^1) / Z_2");
    }
}
