//! Site-based stochastic ground motions: a gamma-shaped envelope modulating
//! the normalized output of a linear filter whose frequency drifts in time,
//! followed by a high-pass correction.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Gamma};
use statrs::function::gamma::ln_gamma;
use std::f64::consts::PI;

use super::oscillator::IntegratorConfig;
use crate::error::{Error, Result};
use crate::transforms::cumulative_trapezoid;

pub const GRAVITY: f64 = 9.81;

/// Corner frequency of the high-pass correction, in Hz.
pub const HIGH_PASS_CORNER: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundMotionParams {
    /// Expected Arias intensity, in g·s.
    pub arias_intensity: f64,
    /// Time between 5% and 95% of the Arias intensity, in s.
    pub duration_5_95: f64,
    /// Time at 45% of the Arias intensity, in s.
    pub t_mid: f64,
    /// Filter frequency at `t_mid`, in rad/s.
    pub omega_mid: f64,
    /// Rate of change of the filter frequency, in rad/s per s.
    pub omega_slope: f64,
    pub filter_damping: f64,
}

impl Default for GroundMotionParams {
    fn default() -> Self {
        GroundMotionParams {
            arias_intensity: 0.109,
            duration_5_95: 7.96,
            t_mid: 7.78,
            omega_mid: 4.66 * 2.0 * PI,
            omega_slope: -0.09 * 2.0 * PI,
            filter_damping: 0.24,
        }
    }
}

impl GroundMotionParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.arias_intensity >= 0.0
            && self.duration_5_95 > 0.0
            && self.t_mid > 0.0
            && self.omega_mid > 0.0
            && self.omega_slope.is_finite()
            && self.filter_damping > 0.0
            && self.filter_damping < 1.0
            && self.arias_intensity.is_finite()
            && self.duration_5_95.is_finite()
            && self.t_mid.is_finite()
            && self.omega_mid.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid ground-motion parameters {self:?}")))
        }
    }

    /// Filter frequency at time `t`, floored at 0.1 Hz.
    pub fn filter_frequency(&self, t: f64) -> f64 {
        (self.omega_mid + self.omega_slope * (t - self.t_mid)).max(0.2 * PI)
    }
}

/// `q(t) = a t^(b-1) exp(-c t)`, stored as `(ln a, b, c)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub ln_amplitude: f64,
    pub shape: f64,
    pub decay: f64,
}

impl Envelope {
    /// Envelope whose squared shape puts 5%, 45% and 95% of the expected
    /// Arias intensity at the requested times.
    pub fn calibrate(params: &GroundMotionParams) -> Result<Envelope> {
        params.validate()?;
        // q² is a gamma density in t with shape k = 2b - 1 and rate 2c; the
        // ratio of D5-95 to t45 only depends on k.
        let target = params.duration_5_95 / params.t_mid;
        let ratio = |k: f64| -> Result<f64> {
            let g = Gamma::new(k, 1.0).map_err(|e| Error::Infeasible(e.to_string()))?;
            Ok((g.inverse_cdf(0.95) - g.inverse_cdf(0.05)) / g.inverse_cdf(0.45))
        };
        let (mut lo, mut hi) = (1e-2f64.ln(), 1e4f64.ln());
        let (r_lo, r_hi) = (ratio(lo.exp())?, ratio(hi.exp())?);
        if !(r_hi < target && target < r_lo) {
            return Err(Error::Infeasible(format!(
                "no gamma envelope has D5-95 / t_mid = {target:.4} (reachable range {r_hi:.4}..{r_lo:.4})"
            )));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if ratio(mid.exp())? > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let k = (0.5 * (lo + hi)).exp();
        let g = Gamma::new(k, 1.0).map_err(|e| Error::Infeasible(e.to_string()))?;
        let rate = g.inverse_cdf(0.45) / params.t_mid;
        let decay = 0.5 * rate;
        let shape = 0.5 * (k + 1.0);
        // ∫q² dt = a² Γ(k) / rate^k, and I_a = π / (2 g²) ∫q² dt in g·s.
        let ln_amplitude = if params.arias_intensity > 0.0 {
            0.5 * ((params.arias_intensity * 2.0 * GRAVITY * GRAVITY / PI).ln() + k * rate.ln() - ln_gamma(k))
        } else {
            f64::NEG_INFINITY
        };
        Ok(Envelope {
            ln_amplitude,
            shape,
            decay,
        })
    }

    pub fn value(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return if self.shape == 1.0 { self.ln_amplitude.exp() } else { 0.0 };
        }
        (self.ln_amplitude + (self.shape - 1.0) * t.ln() - self.decay * t).exp()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundMotion {
    /// In m/s².
    pub acceleration: Vec<f64>,
    pub velocity: Vec<f64>,
    pub displacement: Vec<f64>,
}

/// One realization; identical for identical `(params, seed, config)`.
pub fn simulate_ground_motion(params: &GroundMotionParams, seed: u64, config: &IntegratorConfig) -> Result<GroundMotion> {
    config.validate()?;
    let envelope = Envelope::calibrate(params)?;
    let n = config.n_steps();
    let dt = config.dt;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / dt.sqrt();
    let noise: Vec<f64> = (0..n)
        .map(|_| {
            let s: f64 = StandardNormal.sample(&mut rng);
            s * scale
        })
        .collect();

    // Impulse responses of the filter, one per excitation instant, truncated
    // once they have decayed by e^-30.
    let zeta = params.filter_damping;
    let root = (1.0 - zeta * zeta).sqrt();
    let mut filtered = vec![0.0; n];
    let mut variance = vec![0.0; n];
    for (j, w) in noise.iter().enumerate() {
        let omega = params.filter_frequency(j as f64 * dt);
        let span = ((30.0 / (zeta * omega)) / dt).ceil() as usize;
        let end = n.min(j + span + 1);
        for (i, (f, v)) in filtered[j..end].iter_mut().zip(&mut variance[j..end]).enumerate() {
            let lag = i as f64 * dt;
            let h = omega / root * (-zeta * omega * lag).exp() * (omega * root * lag).sin();
            *f += h * w;
            *v += h * h * scale * scale;
        }
    }
    let raw: Vec<f64> = filtered
        .iter()
        .zip(&variance)
        .enumerate()
        .map(|(i, (f, v))| if *v > 0.0 { envelope.value(i as f64 * dt) * f / v.sqrt() } else { 0.0 })
        .collect();
    let acceleration = high_pass(&raw, dt, 2.0 * PI * HIGH_PASS_CORNER);
    if let Some(step) = acceleration.iter().position(|a| !a.is_finite()) {
        return Err(Error::NonFinite {
            channel: "acceleration".into(),
            step,
        });
    }
    let velocity = cumulative_trapezoid(&acceleration, dt);
    let displacement = cumulative_trapezoid(&velocity, dt);
    Ok(GroundMotion {
        acceleration,
        velocity,
        displacement,
    })
}

/// Critically damped second-order high-pass `s² / (s + ω_c)²`, discretized
/// with the bilinear transform.
pub fn high_pass(signal: &[f64], dt: f64, corner: f64) -> Vec<f64> {
    let k = 2.0 / dt;
    let (p, m) = (k + corner, k - corner);
    let norm = p * p;
    let b = [k * k / norm, -2.0 * k * k / norm, k * k / norm];
    let a = [-2.0 * p * m / norm, m * m / norm];
    let mut out = vec![0.0; signal.len()];
    for i in 0..signal.len() {
        let x = |d: usize| if i >= d { signal[i - d] } else { 0.0 };
        let y = |d: usize| if i >= d { out[i - d] } else { 0.0 };
        out[i] = b[0] * x(0) + b[1] * x(1) + b[2] * x(2) - a[0] * y(1) - a[1] * y(2);
    }
    out
}

/// `π / (2 g) ∫ a² dt` for an acceleration in m/s², expressed in g·s.
pub fn arias_intensity(acceleration: &[f64], dt: f64) -> f64 {
    let cumulative = cumulative_trapezoid(&acceleration.iter().map(|a| a * a).collect::<Vec<_>>(), dt);
    cumulative.last().copied().unwrap_or(0.0) * PI / (2.0 * GRAVITY * GRAVITY)
}

/// Times at which the running Arias intensity crosses the fractions `lo` and
/// `hi` of its total, linearly interpolated between samples.
pub fn arias_crossings(acceleration: &[f64], dt: f64, lo: f64, hi: f64) -> Option<(f64, f64)> {
    let cumulative = cumulative_trapezoid(&acceleration.iter().map(|a| a * a).collect::<Vec<_>>(), dt);
    let total = *cumulative.last()?;
    if !(total > 0.0) {
        return None;
    }
    let crossing = |frac: f64| {
        let level = frac * total;
        let i = cumulative.iter().position(|c| *c >= level)?;
        if i == 0 {
            return Some(0.0);
        }
        let (c0, c1) = (cumulative[i - 1], cumulative[i]);
        Some((i as f64 - 1.0 + (level - c0) / (c1 - c0)) * dt)
    };
    Some((crossing(lo)?, crossing(hi)?))
}

/// Significant duration between 5% and 95% of the Arias intensity.
pub fn significant_duration(acceleration: &[f64], dt: f64) -> Option<f64> {
    arias_crossings(acceleration, dt, 0.05, 0.95).map(|(a, b)| b - a)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn envelope_hits_its_targets() {
        let p = GroundMotionParams::default();
        let e = Envelope::calibrate(&p).unwrap();
        let cfg = IntegratorConfig { dt: 0.001, duration: 60.0 };
        let q: Vec<f64> = (0..cfg.n_steps()).map(|i| e.value(i as f64 * cfg.dt)).collect();
        assert!((arias_intensity(&q, cfg.dt) / p.arias_intensity - 1.0).abs() < 1e-3);
        let (t5, t95) = arias_crossings(&q, cfg.dt, 0.05, 0.95).unwrap();
        let (t45, _) = arias_crossings(&q, cfg.dt, 0.45, 0.5).unwrap();
        assert!((t95 - t5 - p.duration_5_95).abs() < 1e-2);
        assert!((t45 - p.t_mid).abs() < 1e-2);
    }

    #[test]
    fn impossible_duration_ratio_is_reported() {
        let p = GroundMotionParams {
            duration_5_95: 1e4,
            t_mid: 1e-3,
            ..GroundMotionParams::default()
        };
        assert!(matches!(Envelope::calibrate(&p), Err(Error::Infeasible(_))));
    }

    #[test]
    fn zero_intensity_and_determinism() {
        let cfg = IntegratorConfig { dt: 0.01, duration: 5.0 };
        let quiet = GroundMotionParams {
            arias_intensity: 0.0,
            ..GroundMotionParams::default()
        };
        let g = simulate_ground_motion(&quiet, 3, &cfg).unwrap();
        assert!(g.acceleration.iter().all(|a| *a == 0.0));

        let p = GroundMotionParams::default();
        let a = simulate_ground_motion(&p, 11, &cfg).unwrap();
        let b = simulate_ground_motion(&p, 11, &cfg).unwrap();
        let c = simulate_ground_motion(&p, 12, &cfg).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.acceleration, c.acceleration);
    }

    #[test]
    fn high_pass_removes_offsets() {
        let dt = 0.01;
        let step = vec![1.0; 3000];
        let out = high_pass(&step, dt, 2.0 * PI * HIGH_PASS_CORNER);
        assert!(out[2999].abs() < 1e-4);
        let tone: Vec<f64> = (0..3000).map(|i| (2.0 * PI * 5.0 * i as f64 * dt).sin()).collect();
        let out = high_pass(&tone, dt, 2.0 * PI * HIGH_PASS_CORNER);
        let late = out[2000..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!((late - 1.0).abs() < 0.01);
    }
}
