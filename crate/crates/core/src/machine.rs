//! Five-phase induction machine truth plant and the stationary-frame
//! transforms shared by the controller.
//!
//! The α–β plane carries the full stator/rotor current model; the x–y plane
//! is a plain R-L circuit through the stator leakage inductance. Mechanics
//! are a single inertia with viscous friction and a load torque.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Pair = [f64; 2];

/// Amplitude-invariant scale of [`clarke_5`].
pub const CLARKE_SCALE: f64 = 2.0 / 5.0;

/// Orientation of mechanical rotation in the α–β plane.
///
/// The current references turn from β towards α as the flux angle grows
/// (`i*_α = I* sin θ`, `i*_β = I* cos θ`), and the rotation matrix used for
/// the d–q projection has the same handedness. Positive speed is therefore
/// the β→α direction, which is the mirror of the textbook α→β convention.
/// All rotational terms of the plant and predictor are multiplied by this.
pub const ROTATION_SIGN: f64 = -1.0;

/// Electrical and mechanical constants of the drive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MachineParams {
    /// Stator resistance (Ω).
    pub rs: f64,
    /// Rotor resistance (Ω).
    pub rr: f64,
    /// Stator leakage inductance (H).
    pub lls: f64,
    /// Rotor leakage inductance (H).
    pub llr: f64,
    /// Mutual inductance (H).
    pub lm: f64,
    /// Rotational inertia (kg·m²).
    pub jm: f64,
    pub pole_pairs: u32,
    /// DC-link voltage (V).
    pub vdc: f64,
    /// Control sampling period (s).
    pub ts: f64,
    /// Viscous friction (N·m·s/rad).
    pub friction: f64,
}

impl Default for MachineParams {
    fn default() -> Self {
        Self {
            rs: 12.85,
            rr: 4.80,
            lls: 79.93e-3,
            llr: 79.93e-3,
            lm: 681.7e-3,
            jm: 0.02,
            pole_pairs: 3,
            vdc: 300.0,
            ts: 30e-6,
            friction: 0.0,
        }
    }
}

impl MachineParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("machine.rs", self.rs),
            ("machine.rr", self.rr),
            ("machine.lls", self.lls),
            ("machine.llr", self.llr),
            ("machine.lm", self.lm),
            ("machine.jm", self.jm),
            ("machine.vdc", self.vdc),
            ("machine.ts", self.ts),
        ];
        for (key, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(key, format!("must be finite and > 0, got {v}")));
            }
        }
        if self.pole_pairs < 1 {
            return Err(Error::config("machine.pole_pairs", "must be >= 1"));
        }
        if !(self.friction.is_finite() && self.friction >= 0.0) {
            return Err(Error::config("machine.friction", "must be finite and >= 0"));
        }
        Ok(())
    }

    /// Stator self inductance `Lls + LM`.
    pub fn ls(&self) -> f64 {
        self.lls + self.lm
    }

    /// Rotor self inductance `Llr + LM`.
    pub fn lr(&self) -> f64 {
        self.llr + self.lm
    }

    /// Stator transient inductance `Ls - LM²/Lr`.
    pub fn sigma_ls(&self) -> f64 {
        self.ls() - self.lm * self.lm / self.lr()
    }

    /// Rotor time constant `Lr/Rr`.
    pub fn tau_r(&self) -> f64 {
        self.lr() / self.rr
    }

    pub fn poles(&self) -> f64 {
        f64::from(self.pole_pairs)
    }
}

/// Five per-phase quantities ordered a, b, c, d, e.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Phases(pub [f64; 5]);

/// Result of the five-phase decoupling transform.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlaneComponents {
    pub ab: Pair,
    pub xy: Pair,
    pub zero: f64,
}

fn phase_angle(k: usize) -> f64 {
    k as f64 * 2.0 * PI / 5.0
}

/// Amplitude-invariant five-phase Clarke transform.
pub fn clarke_5(ph: &Phases) -> PlaneComponents {
    let mut out = PlaneComponents::default();
    for (k, &v) in ph.0.iter().enumerate() {
        let a1 = phase_angle(k);
        let a2 = 2.0 * a1;
        out.ab[0] += v * a1.cos();
        out.ab[1] += v * a1.sin();
        out.xy[0] += v * a2.cos();
        out.xy[1] += v * a2.sin();
        out.zero += v;
    }
    for c in out.ab.iter_mut().chain(out.xy.iter_mut()) {
        *c *= CLARKE_SCALE;
    }
    out.zero /= 5.0;
    out
}

/// Exact inverse of [`clarke_5`].
pub fn inverse_clarke_5(c: &PlaneComponents) -> Phases {
    let mut ph = [0.0; 5];
    for (k, v) in ph.iter_mut().enumerate() {
        let a1 = phase_angle(k);
        let a2 = 2.0 * a1;
        *v = c.ab[0] * a1.cos() + c.ab[1] * a1.sin() + c.xy[0] * a2.cos() + c.xy[1] * a2.sin() + c.zero;
    }
    Phases(ph)
}

/// Rotating-to-stationary projection `D(θ)·(d, q)ᵀ` with
/// `D = [[cos θ, sin θ], [-sin θ, cos θ]]`.
pub fn park(dq: Pair, theta_a: f64) -> Pair {
    let (s, c) = theta_a.sin_cos();
    [c * dq[0] + s * dq[1], -s * dq[0] + c * dq[1]]
}

/// Continuous-truth state of the machine.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlantState {
    pub is_ab: Pair,
    pub is_xy: Pair,
    pub ir_ab: Pair,
    /// Mechanical angular speed (rad/s).
    pub omega: f64,
    pub t: f64,
}

impl PlantState {
    /// Stator currents as (α, β, x, y).
    pub fn stator_currents(&self) -> [f64; 4] {
        [self.is_ab[0], self.is_ab[1], self.is_xy[0], self.is_xy[1]]
    }

    pub fn is_finite(&self) -> bool {
        self.is_ab
            .iter()
            .chain(&self.is_xy)
            .chain(&self.ir_ab)
            .chain([&self.omega, &self.t])
            .all(|v| v.is_finite())
    }

    /// Magnetic energy stored in the stator and rotor inductances (J).
    pub fn magnetic_energy(&self, p: &MachineParams) -> f64 {
        let (is, ir) = (self.is_ab, self.ir_ab);
        let dot = |a: Pair, b: Pair| a[0] * b[0] + a[1] * b[1];
        // amplitude-invariant scaling: power = (5/2)·vᵀi
        1.25 * (p.ls() * dot(is, is) + 2.0 * p.lm * dot(is, ir) + p.lr() * dot(ir, ir))
            + 1.25 * p.lls * dot(self.is_xy, self.is_xy)
    }

    pub fn kinetic_energy(&self, p: &MachineParams) -> f64 {
        0.5 * p.jm * self.omega * self.omega
    }
}

/// Stator voltages in the two planes.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Voltages {
    pub ab: Pair,
    pub xy: Pair,
}

/// Time derivative of the integrated part of [`PlantState`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StateDerivative {
    pub is_ab: Pair,
    pub is_xy: Pair,
    pub ir_ab: Pair,
    pub omega: f64,
}

/// Electromagnetic torque (N·m).
pub fn electromagnetic_torque(s: &PlantState, p: &MachineParams) -> f64 {
    let (is, ir) = (s.is_ab, s.ir_ab);
    ROTATION_SIGN * 2.5 * p.poles() * p.lm * (is[1] * ir[0] - is[0] * ir[1])
}

/// `J·v` with `J` the quarter-turn `[[0, -1], [1, 0]]`.
fn quarter_turn(v: Pair) -> Pair {
    [-v[1], v[0]]
}

/// Full-order machine dynamics.
pub fn plant_derivative(s: &PlantState, v: &Voltages, p: &MachineParams, t_load: f64) -> StateDerivative {
    let (ls, lr, lm) = (p.ls(), p.lr(), p.lm);
    let det = ls * lr - lm * lm;
    let omega_r = ROTATION_SIGN * p.poles() * s.omega;
    let psi_r = [lm * s.is_ab[0] + lr * s.ir_ab[0], lm * s.is_ab[1] + lr * s.ir_ab[1]];
    let emf = quarter_turn(psi_r);

    let mut d = StateDerivative::default();
    for k in 0..2 {
        let stator = v.ab[k] - p.rs * s.is_ab[k];
        let rotor = -p.rr * s.ir_ab[k] + omega_r * emf[k];
        d.is_ab[k] = (lr * stator - lm * rotor) / det;
        d.ir_ab[k] = (-lm * stator + ls * rotor) / det;
        d.is_xy[k] = (v.xy[k] - p.rs * s.is_xy[k]) / p.lls;
    }
    let te = electromagnetic_torque(s, p);
    d.omega = (te - t_load - p.friction * s.omega) / p.jm;
    d
}

/// Stator-only dynamics with the rotor branch removed: the rotor flux is
/// taken as `LM·i_s` and the speed is held. This is the continuous model
/// behind the controller's predictor.
pub fn reduced_derivative(s: &PlantState, v: &Voltages, p: &MachineParams) -> StateDerivative {
    let omega_r = ROTATION_SIGN * p.poles() * s.omega;
    let coupling = p.lm * p.lm / p.lr();
    let turned = quarter_turn(s.is_ab);
    let mut d = StateDerivative::default();
    for k in 0..2 {
        d.is_ab[k] = (v.ab[k] - p.rs * s.is_ab[k] - coupling * omega_r * turned[k]) / p.sigma_ls();
        d.is_xy[k] = (v.xy[k] - p.rs * s.is_xy[k]) / p.lls;
    }
    d
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RotorBranch {
    #[default]
    Full,
    /// Plant collapses to the predictor's stator-only model.
    Disabled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    #[default]
    Rk4,
    Euler,
}

/// Numerical options of the truth plant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantOptions {
    pub rotor: RotorBranch,
    pub integrator: Integrator,
    pub substeps: u32,
}

impl Default for PlantOptions {
    fn default() -> Self {
        Self {
            rotor: RotorBranch::Full,
            integrator: Integrator::Rk4,
            substeps: 10,
        }
    }
}

impl PlantOptions {
    pub fn validate(&self) -> Result<()> {
        if self.substeps < 1 {
            return Err(Error::config("plant.substeps", "must be >= 1"));
        }
        Ok(())
    }
}

fn advance(s: &PlantState, d: &StateDerivative, h: f64) -> PlantState {
    let mut n = *s;
    for k in 0..2 {
        n.is_ab[k] += h * d.is_ab[k];
        n.is_xy[k] += h * d.is_xy[k];
        n.ir_ab[k] += h * d.ir_ab[k];
    }
    n.omega += h * d.omega;
    n
}

fn combine(k: [&StateDerivative; 4]) -> StateDerivative {
    let w = |f: &dyn Fn(&StateDerivative) -> f64| {
        (f(k[0]) + 2.0 * f(k[1]) + 2.0 * f(k[2]) + f(k[3])) / 6.0
    };
    StateDerivative {
        is_ab: [w(&|d| d.is_ab[0]), w(&|d| d.is_ab[1])],
        is_xy: [w(&|d| d.is_xy[0]), w(&|d| d.is_xy[1])],
        ir_ab: [w(&|d| d.ir_ab[0]), w(&|d| d.ir_ab[1])],
        omega: w(&|d| d.omega),
    }
}

/// The machine together with its integration options.
#[derive(Debug, Clone)]
pub struct Plant {
    pub params: MachineParams,
    pub options: PlantOptions,
}

impl Plant {
    pub fn new(params: MachineParams, options: PlantOptions) -> Self {
        Self { params, options }
    }

    pub fn derivative(&self, s: &PlantState, v: &Voltages, t_load: f64) -> StateDerivative {
        match self.options.rotor {
            RotorBranch::Full => plant_derivative(s, v, &self.params, t_load),
            RotorBranch::Disabled => reduced_derivative(s, v, &self.params),
        }
    }

    /// Integrates one interval `dt` with constant voltages and load.
    pub fn step(&self, s: &PlantState, v: &Voltages, t_load: f64, dt: f64) -> Result<PlantState> {
        let n = self.options.substeps.max(1);
        let h = dt / f64::from(n);
        let mut x = *s;
        for _ in 0..n {
            x = match self.options.integrator {
                Integrator::Euler => advance(&x, &self.derivative(&x, v, t_load), h),
                Integrator::Rk4 => {
                    let k1 = self.derivative(&x, v, t_load);
                    let k2 = self.derivative(&advance(&x, &k1, h / 2.0), v, t_load);
                    let k3 = self.derivative(&advance(&x, &k2, h / 2.0), v, t_load);
                    let k4 = self.derivative(&advance(&x, &k3, h), v, t_load);
                    advance(&x, &combine([&k1, &k2, &k3, &k4]), h)
                }
            };
        }
        x.t = s.t + dt;
        if !x.is_finite() {
            return Err(Error::IntegrationFault { t: x.t, last_good_t: s.t });
        }
        Ok(x)
    }
}

/// One control period of the full-order plant with RK4 and `substeps`
/// sub-intervals.
pub fn plant_step(
    s: &PlantState,
    v: &Voltages,
    params: &MachineParams,
    t_load: f64,
    dt: f64,
    substeps: u32,
) -> Result<PlantState> {
    let plant = Plant::new(
        params.clone(),
        PlantOptions {
            substeps,
            ..PlantOptions::default()
        },
    );
    plant.step(s, v, t_load, dt)
}
