//! Adaptive Dormand-Prince 5(4) integrator with PI step-size control.

use crate::error::{Result, SlError};

/// Tolerances and limits for [`Dopri5`].
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Largest allowed step (absolute value).
    pub h_max: f64,
    pub max_steps: usize,
    /// Frobenius-norm threshold that counts as escape to infinity.
    pub blowup: Option<f64>,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-10,
            atol: 1e-12,
            h_max: f64::INFINITY,
            max_steps: 5_000_000,
            blowup: Some(1e8),
        }
    }
}

impl OdeOptions {
    pub fn tight() -> Self {
        OdeOptions {
            rtol: 1e-13,
            atol: 1e-14,
            ..Default::default()
        }
    }

    pub fn with_h_max(mut self, h: f64) -> Self {
        self.h_max = h;
        self
    }
}

/// Step counters.
#[derive(Debug, Clone, Copy, Default, serde::Serialize, serde::Deserialize)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

/// Stateful integrator for `y' = f(t, y)`.
///
/// The right-hand side writes its result into the output slice.
pub struct Dopri5<F> {
    f: F,
    t: f64,
    y: Vec<f64>,
    k1: Vec<f64>,
    h: f64,
    err_old: f64,
    opts: OdeOptions,
    stats: OdeStats,
    work: Work,
}

struct Work {
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    k5: Vec<f64>,
    k6: Vec<f64>,
    k7: Vec<f64>,
    tmp: Vec<f64>,
    y_new: Vec<f64>,
}

impl Work {
    fn new(n: usize) -> Self {
        Work {
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
            k5: vec![0.0; n],
            k6: vec![0.0; n],
            k7: vec![0.0; n],
            tmp: vec![0.0; n],
            y_new: vec![0.0; n],
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl<F> Dopri5<F>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    pub fn new(mut f: F, t0: f64, y0: &[f64], opts: OdeOptions) -> Self {
        let n = y0.len();
        let mut k1 = vec![0.0; n];
        f(t0, y0, &mut k1);
        Dopri5 {
            f,
            t: t0,
            y: y0.to_vec(),
            k1,
            h: 0.0,
            err_old: 1e-4,
            opts,
            stats: OdeStats {
                evaluations: 1,
                ..Default::default()
            },
            work: Work::new(n),
        }
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn stats(&self) -> OdeStats {
        self.stats
    }

    /// Derivative at the current state.
    pub fn derivative(&self) -> &[f64] {
        &self.k1
    }

    fn initial_step(&self, span: f64) -> f64 {
        let d0 = norm(&self.y);
        let d1 = norm(&self.k1);
        let h = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6
        } else {
            0.01 * d0 / d1
        };
        h.min(span.abs()).min(self.opts.h_max).max(1e-12)
    }

    /// One trial step of size `h` from the current state, writing the
    /// proposal into `work.y_new` and returning the scaled error norm.
    fn trial(&mut self, h: f64) -> f64 {
        let n = self.y.len();
        let (t, y) = (self.t, &self.y);
        let w = &mut self.work;
        let f = &mut self.f;
        let k1 = &self.k1;
        for i in 0..n {
            w.tmp[i] = y[i] + h * A21 * k1[i];
        }
        f(t + C2 * h, &w.tmp, &mut w.k2);
        for i in 0..n {
            w.tmp[i] = y[i] + h * (A31 * k1[i] + A32 * w.k2[i]);
        }
        f(t + C3 * h, &w.tmp, &mut w.k3);
        for i in 0..n {
            w.tmp[i] = y[i] + h * (A41 * k1[i] + A42 * w.k2[i] + A43 * w.k3[i]);
        }
        f(t + C4 * h, &w.tmp, &mut w.k4);
        for i in 0..n {
            w.tmp[i] =
                y[i] + h * (A51 * k1[i] + A52 * w.k2[i] + A53 * w.k3[i] + A54 * w.k4[i]);
        }
        f(t + C5 * h, &w.tmp, &mut w.k5);
        for i in 0..n {
            w.tmp[i] = y[i]
                + h * (A61 * k1[i] + A62 * w.k2[i] + A63 * w.k3[i] + A64 * w.k4[i]
                    + A65 * w.k5[i]);
        }
        f(t + h, &w.tmp, &mut w.k6);
        for i in 0..n {
            w.y_new[i] = y[i]
                + h * (A71 * k1[i] + A73 * w.k3[i] + A74 * w.k4[i] + A75 * w.k5[i]
                    + A76 * w.k6[i]);
        }
        f(t + h, &w.y_new, &mut w.k7);
        self.stats.evaluations += 6;
        let mut acc = 0.0;
        for i in 0..n {
            let e = h
                * (E1 * k1[i] + E3 * w.k3[i] + E4 * w.k4[i] + E5 * w.k5[i] + E6 * w.k6[i]
                    + E7 * w.k7[i]);
            let sc = self.opts.atol + self.opts.rtol * y[i].abs().max(w.y_new[i].abs());
            acc += (e / sc) * (e / sc);
        }
        (acc / n.max(1) as f64).sqrt()
    }

    /// State reached by a single step of size `h` from the current point,
    /// without changing the integrator. Used for event localization.
    pub fn peek(&mut self, h: f64) -> Vec<f64> {
        self.trial(h);
        self.work.y_new.clone()
    }

    /// Take one accepted step towards `t_limit` without passing it.
    pub fn step(&mut self, t_limit: f64) -> Result<()> {
        let span = t_limit - self.t;
        if span == 0.0 {
            return Ok(());
        }
        let dir = span.signum();
        if self.h == 0.0 || self.h.signum() != dir {
            self.h = dir * self.initial_step(span);
        }
        loop {
            if self.stats.accepted + self.stats.rejected >= self.opts.max_steps {
                return Err(SlError::NoConvergence(format!(
                    "step limit {} reached at t = {}",
                    self.opts.max_steps, self.t
                )));
            }
            let mut h = self.h.abs().min(self.opts.h_max) * dir;
            let last = h.abs() >= (t_limit - self.t).abs();
            if last {
                h = t_limit - self.t;
            }
            if h.abs() < 1e-15 * self.t.abs().max(1.0) {
                return Err(SlError::NoConvergence(format!(
                    "step size underflow at t = {}",
                    self.t
                )));
            }
            let err = self.trial(h);
            if !err.is_finite() {
                self.stats.rejected += 1;
                self.h = h * FAC_MIN;
                continue;
            }
            let expo = 0.2 - BETA * 0.75;
            if err <= 1.0 {
                let mut fac = err.powf(expo) / self.err_old.powf(BETA) / SAFETY;
                fac = fac.clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
                let h_next = h / fac;
                self.err_old = err.max(1e-4);
                if let Some(limit) = self.opts.blowup {
                    if norm(&self.work.y_new) > limit {
                        let t_hit = self.locate_blowup(h, limit);
                        return Err(SlError::BlowUp { t: t_hit });
                    }
                }
                self.stats.accepted += 1;
                self.t = if last { t_limit } else { self.t + h };
                std::mem::swap(&mut self.y, &mut self.work.y_new);
                std::mem::swap(&mut self.k1, &mut self.work.k7);
                if !last || h_next.abs() > self.h.abs() {
                    self.h = h_next;
                }
                return Ok(());
            }
            let fac = (err.powf(expo) / SAFETY).min(1.0 / FAC_MIN);
            self.h = h / fac;
            self.stats.rejected += 1;
        }
    }

    fn locate_blowup(&mut self, h: f64, limit: f64) -> f64 {
        let (mut lo, mut hi) = (0.0, h);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            self.trial(mid);
            if norm(&self.work.y_new) > limit {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        self.t + hi
    }

    /// Integrate up to exactly `t_end`.
    pub fn advance_to(&mut self, t_end: f64) -> Result<()> {
        while self.t != t_end {
            self.step(t_end)?;
        }
        Ok(())
    }

    /// Integrate up to `t_end`, calling `obs(t, y)` after every accepted step.
    pub fn advance_with<G>(&mut self, t_end: f64, mut obs: G) -> Result<()>
    where
        G: FnMut(f64, &[f64]),
    {
        while self.t != t_end {
            self.step(t_end)?;
            obs(self.t, &self.y);
        }
        Ok(())
    }

    /// Integrate towards `t_end` until `g(y)` changes sign from negative to
    /// non-negative. Returns the located crossing time and state, leaving the
    /// integrator at that point.
    pub fn advance_until<G>(&mut self, t_end: f64, mut g: G) -> Result<Option<(f64, Vec<f64>)>>
    where
        G: FnMut(&[f64]) -> f64,
    {
        let mut g_prev = g(&self.y);
        while self.t != t_end {
            let t_prev = self.t;
            let y_prev = self.y.clone();
            let k_prev = self.k1.clone();
            self.step(t_end)?;
            let g_now = g(&self.y);
            if g_prev < 0.0 && g_now >= 0.0 {
                let h = self.t - t_prev;
                let (t_after, y_after, k_after) = (self.t, self.y.clone(), self.k1.clone());
                self.t = t_prev;
                self.y = y_prev;
                self.k1 = k_prev;
                let (mut lo, mut hi) = (0.0, h);
                let (mut g_lo, mut g_hi) = (g_prev, g_now);
                for _ in 0..100 {
                    let mut mid = lo - g_lo * (hi - lo) / (g_hi - g_lo);
                    if !(mid > lo.min(hi) && mid < lo.max(hi)) || (hi - lo).abs() < 1e-3 * h.abs() {
                        mid = 0.5 * (lo + hi);
                    }
                    let gm = g(&self.peek(mid));
                    if gm < 0.0 {
                        lo = mid;
                        g_lo = gm;
                    } else {
                        hi = mid;
                        g_hi = gm;
                    }
                    if (hi - lo).abs() <= 4.0 * f64::EPSILON * (self.t.abs() + h.abs()) {
                        break;
                    }
                }
                let tau = if g_lo.abs() < g_hi.abs() { lo } else { hi };
                let y_ev = self.peek(tau);
                self.t = t_after;
                self.y = y_after;
                self.k1 = k_after;
                self.reset_to(t_prev + tau, &y_ev);
                return Ok(Some((t_prev + tau, y_ev)));
            }
            g_prev = g_now;
        }
        Ok(None)
    }

    /// Restart from a new state, keeping the current step-size estimate.
    pub fn reset_to(&mut self, t: f64, y: &[f64]) {
        self.t = t;
        self.y.copy_from_slice(y);
        (self.f)(t, y, &mut self.k1);
        self.stats.evaluations += 1;
    }
}

/// Integrate from `t0` to `t1` and return the final state.
pub fn solve_to<F>(f: F, t0: f64, y0: &[f64], t1: f64, opts: OdeOptions) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let mut s = Dopri5::new(f, t0, y0, opts);
    s.advance_to(t1)?;
    Ok(s.y().to_vec())
}

/// Integrate and record the state at every time in `times` (monotone).
pub fn solve_grid<F>(f: F, y0: &[f64], times: &[f64], opts: OdeOptions) -> Result<Vec<Vec<f64>>>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    if times.is_empty() {
        return Ok(Vec::new());
    }
    let mut s = Dopri5::new(f, times[0], y0, opts);
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        s.advance_to(t)?;
        out.push(s.y().to_vec());
    }
    Ok(out)
}
