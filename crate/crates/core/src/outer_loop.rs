//! Indirect field-oriented reference generation: speed PI, slip estimate,
//! flux angle and the stator current references.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::machine::MachineParams;
use crate::predictor::Currents;

/// Discrete PI with output clamp and conditional integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PiState {
    pub kp: f64,
    pub ki: f64,
    pub integ: f64,
    pub u_min: f64,
    pub u_max: f64,
    pub dt: f64,
}

impl PiState {
    pub fn new(kp: f64, ki: f64, dt: f64) -> Self {
        Self {
            kp,
            ki,
            integ: 0.0,
            u_min: f64::NEG_INFINITY,
            u_max: f64::INFINITY,
            dt,
        }
    }

    pub fn with_limits(mut self, u_min: f64, u_max: f64) -> Self {
        self.u_min = u_min;
        self.u_max = u_max;
        self
    }

    pub fn update(&mut self, e: f64, anti_windup: bool) -> f64 {
        let (out, next) = pi_step(*self, e, anti_windup);
        *self = next;
        out
    }
}

/// One PI update. The integrator advances by `e·dt` unless anti-windup is on
/// and the output is already past a limit (before integrating) in the
/// direction the integral term would push it.
pub fn pi_step(s: PiState, e: f64, anti_windup: bool) -> (f64, PiState) {
    let held = s.kp * e + s.ki * s.integ;
    let push = s.ki * e;
    let frozen = anti_windup && ((held >= s.u_max && push > 0.0) || (held <= s.u_min && push < 0.0));
    let integ = if frozen { s.integ } else { s.integ + e * s.dt };
    let out = (s.kp * e + s.ki * integ).clamp(s.u_min, s.u_max);
    (out, PiState { integ, ..s })
}

/// `ω_sl = (i*_qs / i*_ds) / τ̂_r`
pub fn slip_frequency(iqs_ref: f64, ids_ref: f64, tau_r_hat: f64) -> Result<f64> {
    if ids_ref == 0.0 {
        return Err(Error::DegenerateReference("magnetizing current reference is zero"));
    }
    if !(tau_r_hat > 0.0) {
        return Err(Error::DegenerateReference("rotor time constant estimate must be positive"));
    }
    Ok(iqs_ref / ids_ref / tau_r_hat)
}

/// `θ + ω_e·dt`, wrapped to `[0, 2π)`.
pub fn advance_flux_angle(theta_a: f64, omega_e: f64, dt: f64) -> f64 {
    let th = (theta_a + omega_e * dt).rem_euclid(TAU);
    // rem_euclid can round up to exactly 2π for tiny negative inputs
    if th >= TAU {
        0.0
    } else {
        th
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ReferenceFrame {
    pub ids_ref: f64,
    pub iqs_ref: f64,
    /// Electrical frequency of the references (rad/s).
    pub omega_e: f64,
    pub theta_a: f64,
    pub i_star: f64,
}

impl ReferenceFrame {
    pub fn new(ids_ref: f64, iqs_ref: f64, omega_e: f64, theta_a: f64) -> Self {
        Self {
            ids_ref,
            iqs_ref,
            omega_e,
            theta_a,
            i_star: ids_ref.hypot(iqs_ref),
        }
    }
}

/// Stator current references `(I* sin θ, I* cos θ, 0, 0)` at the flux angle
/// extrapolated `lead` seconds ahead.
///
/// This is the single place where the sin/cos phase convention lives.
pub fn current_references(frame: &ReferenceFrame, lead: f64) -> Currents {
    let th = frame.theta_a + frame.omega_e * lead;
    let (s, c) = th.sin_cos();
    Currents::new(frame.i_star * s, frame.i_star * c, 0.0, 0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OuterLoopConfig {
    /// Speed PI proportional gain (A·s/rad).
    pub kp: f64,
    /// Speed PI integral gain (A/rad).
    pub ki: f64,
    /// Symmetric clamp on i*_qs (A).
    pub iqs_limit: f64,
    /// Magnetizing current set-point i*_ds (A).
    pub ids_ref: f64,
    /// Multiplier on the true rotor time constant used as the estimate.
    pub tau_r_scale: f64,
    /// Speed PI runs once every this many control periods.
    pub decimation: u32,
    pub anti_windup: bool,
}

impl Default for OuterLoopConfig {
    fn default() -> Self {
        Self {
            kp: 0.5,
            ki: 2.0,
            iqs_limit: 3.0,
            ids_ref: 1.0,
            tau_r_scale: 1.0,
            decimation: 10,
            anti_windup: true,
        }
    }
}

impl OuterLoopConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.kp.is_finite() && self.ki.is_finite()) {
            return Err(Error::config("outer_loop.kp", "speed gains must be finite"));
        }
        if !(self.iqs_limit.is_finite() && self.iqs_limit >= 0.0) {
            return Err(Error::config("outer_loop.iqs_limit", "must be finite and >= 0"));
        }
        if !(self.ids_ref.is_finite() && self.ids_ref != 0.0) {
            return Err(Error::config("outer_loop.ids_ref", "must be finite and non-zero"));
        }
        if !(self.tau_r_scale.is_finite() && self.tau_r_scale > 0.0) {
            return Err(Error::config("outer_loop.tau_r_scale", "must be finite and > 0"));
        }
        if self.decimation < 1 {
            return Err(Error::config("outer_loop.decimation", "must be >= 1"));
        }
        Ok(())
    }
}

/// Speed loop plus flux-angle integrator, stepped once per control period.
#[derive(Debug, Clone)]
pub struct OuterLoop {
    cfg: OuterLoopConfig,
    speed_pi: PiState,
    tau_r_hat: f64,
    poles: f64,
    ts: f64,
    frame: ReferenceFrame,
    tick: u64,
}

impl OuterLoop {
    pub fn new(cfg: OuterLoopConfig, params: &MachineParams) -> Self {
        let speed_pi = PiState::new(cfg.kp, cfg.ki, params.ts * f64::from(cfg.decimation))
            .with_limits(-cfg.iqs_limit, cfg.iqs_limit);
        let frame = ReferenceFrame::new(cfg.ids_ref, 0.0, 0.0, 0.0);
        Self {
            tau_r_hat: params.tau_r() * cfg.tau_r_scale,
            poles: params.poles(),
            ts: params.ts,
            speed_pi,
            frame,
            tick: 0,
            cfg,
        }
    }

    pub fn tau_r_hat(&self) -> f64 {
        self.tau_r_hat
    }

    /// Produces the reference frame for the current period and advances the
    /// flux angle to the next one.
    pub fn update(&mut self, omega_ref: f64, omega_meas: f64) -> Result<ReferenceFrame> {
        let mut iqs = self.frame.iqs_ref;
        if self.tick % u64::from(self.cfg.decimation) == 0 {
            iqs = self.speed_pi.update(omega_ref - omega_meas, self.cfg.anti_windup);
        }
        self.tick += 1;
        let slip = slip_frequency(iqs, self.cfg.ids_ref, self.tau_r_hat)?;
        let omega_e = slip + self.poles * omega_meas;
        let frame = ReferenceFrame::new(self.cfg.ids_ref, iqs, omega_e, self.frame.theta_a);
        self.frame = ReferenceFrame {
            theta_a: advance_flux_angle(frame.theta_a, omega_e, self.ts),
            ..frame
        };
        Ok(frame)
    }
}
