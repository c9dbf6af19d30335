//! Single-degree-of-freedom oscillator with Bouc-Wen hysteresis under base
//! excitation, integrated with fixed-step classical Runge-Kutta.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoucWenParams {
    pub damping_ratio: f64,
    /// Natural frequency in rad/s.
    pub natural_frequency: f64,
    /// Post-yield to pre-yield stiffness ratio.
    pub stiffness_ratio: f64,
    pub gamma: f64,
    /// In 1/m.
    pub alpha: f64,
    pub beta: f64,
    pub exponent: f64,
}

impl Default for BoucWenParams {
    fn default() -> Self {
        BoucWenParams {
            damping_ratio: 0.02,
            natural_frequency: 10.0,
            stiffness_ratio: 0.2,
            gamma: 0.5,
            alpha: 25.0,
            beta: 25.0,
            exponent: 1.0,
        }
    }
}

impl BoucWenParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.damping_ratio > 0.0
            && self.natural_frequency > 0.0
            && (0.0..=1.0).contains(&self.stiffness_ratio)
            && self.exponent >= 1.0
            && [self.gamma, self.alpha, self.beta].iter().all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid oscillator parameters {self:?}")))
        }
    }

    /// Largest hysteretic displacement reachable under monotonic loading.
    pub fn ultimate_displacement(&self) -> f64 {
        (self.gamma / (self.alpha + self.beta)).powf(1.0 / self.exponent)
    }

    /// Time derivative of `(y, ẏ, z)` under ground acceleration `ground`.
    #[inline]
    pub fn derivative(&self, state: [f64; 3], ground: f64) -> [f64; 3] {
        let [y, v, z] = state;
        let w = self.natural_frequency;
        let acc = -ground - 2.0 * self.damping_ratio * w * v - w * w * (self.stiffness_ratio * y + (1.0 - self.stiffness_ratio) * z);
        let za = z.abs();
        let (zn1, zn) = if self.exponent == 1.0 {
            (1.0, za)
        } else {
            (za.powf(self.exponent - 1.0), za.powf(self.exponent))
        };
        let zdot = self.gamma * v - self.alpha * v.abs() * zn1 * z - self.beta * v * zn;
        [v, acc, zdot]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub duration: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig { dt: 0.01, duration: 30.0 }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.duration >= 0.0 && self.dt.is_finite() && self.duration.is_finite()) {
            return Err(Error::InvalidArgument(format!("invalid integrator settings {self:?}")));
        }
        let ratio = self.duration / self.dt;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "duration {} is not a multiple of dt {}",
                self.duration, self.dt
            )));
        }
        Ok(())
    }

    /// Samples per trace, both end points included.
    pub fn n_steps(&self) -> usize {
        (self.duration / self.dt).round() as usize + 1
    }
}

/// Displacement, velocity and hysteretic displacement at every sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Response {
    pub displacement: Vec<f64>,
    pub velocity: Vec<f64>,
    pub hysteretic: Vec<f64>,
}

/// Integrates from `initial` over `n_steps` samples spaced `dt`, with the
/// excitation given as a function of time.
pub fn integrate<F: Fn(f64) -> f64>(params: &BoucWenParams, initial: [f64; 3], excitation: F, dt: f64, n_steps: usize) -> Result<Response> {
    params.validate()?;
    let mut out = Response {
        displacement: Vec::with_capacity(n_steps),
        velocity: Vec::with_capacity(n_steps),
        hysteretic: Vec::with_capacity(n_steps),
    };
    let mut s = initial;
    for i in 0..n_steps {
        if let Some(k) = s.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                channel: ["y", "ydot", "z"][k].to_string(),
                step: i,
            });
        }
        out.displacement.push(s[0]);
        out.velocity.push(s[1]);
        out.hysteretic.push(s[2]);
        if i + 1 < n_steps {
            let t = i as f64 * dt;
            s = step(params, s, dt, |tau| excitation(t + tau));
        }
    }
    Ok(out)
}

#[inline]
fn rk4<F: Fn(f64) -> f64>(params: &BoucWenParams, s: [f64; 3], t: f64, h: f64, excitation: &F) -> [f64; 3] {
    let add = |a: [f64; 3], b: [f64; 3], h: f64| [a[0] + h * b[0], a[1] + h * b[1], a[2] + h * b[2]];
    let mid = excitation(t + 0.5 * h);
    let k1 = params.derivative(s, excitation(t));
    let k2 = params.derivative(add(s, k1, 0.5 * h), mid);
    let k3 = params.derivative(add(s, k2, 0.5 * h), mid);
    let k4 = params.derivative(add(s, k3, h), excitation(t + h));
    std::array::from_fn(|j| s[j] + h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]))
}

const MAX_SPLITS: usize = 8;

/// One step of length `dt`. The right-hand side has kinks where the velocity
/// or the hysteretic displacement changes sign, so the step is split at each
/// such crossing to keep the fourth-order accuracy. `excitation` takes the
/// time offset within the step.
fn step<F: Fn(f64) -> f64>(params: &BoucWenParams, s: [f64; 3], dt: f64, excitation: F) -> [f64; 3] {
    let (mut s, mut t) = (s, 0.0);
    for _ in 0..MAX_SPLITS {
        let h = dt - t;
        let next = rk4(params, s, t, h, &excitation);
        let crossed = [1, 2].into_iter().filter(|&j| s[j] * next[j] < 0.0);
        // Earliest crossing by linear interpolation, then refined.
        let Some(j) = crossed.min_by(|&a, &b| (s[a] / (s[a] - next[a])).total_cmp(&(s[b] / (s[b] - next[b])))) else {
            return next;
        };
        let Some(hit) = crossing(params, s, t, h, j, next[j], &excitation) else {
            return next;
        };
        s = rk4(params, s, t, hit, &excitation);
        s[j] = 0.0;
        t += hit;
        if dt - t <= 1e-12 * dt {
            return s;
        }
    }
    rk4(params, s, t, dt - t, &excitation)
}

/// Sub-step length at which component `j` reaches zero, by the Illinois
/// variant of regula falsi.
fn crossing<F: Fn(f64) -> f64>(params: &BoucWenParams, s: [f64; 3], t: f64, h: f64, j: usize, end: f64, excitation: &F) -> Option<f64> {
    let (mut lo, mut hi) = (0.0, h);
    let (mut g_lo, mut g_hi) = (s[j], end);
    let tol = 1e-13 * h;
    let mut side = 0i8;
    for _ in 0..60 {
        let x = hi - g_hi * (hi - lo) / (g_hi - g_lo);
        if !x.is_finite() {
            return None;
        }
        let g = rk4(params, s, t, x, excitation)[j];
        if g == 0.0 || hi - lo < tol {
            return Some(x);
        }
        if g.signum() == g_lo.signum() {
            lo = x;
            g_lo = g;
            if side == -1 {
                g_hi *= 0.5;
            }
            side = -1;
        } else {
            hi = x;
            g_hi = g;
            if side == 1 {
                g_lo *= 0.5;
            }
            side = 1;
        }
        if (hi - lo) < tol {
            return Some(0.5 * (lo + hi));
        }
    }
    Some(0.5 * (lo + hi))
}

/// Response from rest to a sampled ground acceleration; the excitation is
/// linearly interpolated between samples. Returns `(y, z)`.
pub fn simulate_boucwen(params: &BoucWenParams, excitation: &[f64], config: &IntegratorConfig) -> Result<(Vec<f64>, Vec<f64>)> {
    config.validate()?;
    let n = config.n_steps();
    if excitation.len() != n {
        return Err(Error::Dimension {
            expected: n,
            actual: excitation.len(),
        });
    }
    params.validate()?;
    let dt = config.dt;
    let mut y = Vec::with_capacity(n);
    let mut z = Vec::with_capacity(n);
    let mut s = [0.0f64; 3];
    for i in 0..n {
        if let Some(k) = s.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                channel: ["y", "ydot", "z"][k].to_string(),
                step: i,
            });
        }
        y.push(s[0]);
        z.push(s[2]);
        if i + 1 < n {
            let (a, b) = (excitation[i], excitation[i + 1]);
            s = step(params, s, dt, |tau| a + (b - a) * tau / dt);
        }
    }
    Ok((y, z))
}
