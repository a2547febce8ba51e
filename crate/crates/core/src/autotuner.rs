//! Closed-loop weighting-factor tuning.
//!
//! Two PI loops run once per metrics block: `λ_xy` is driven by the x–y
//! error index `gamma2`, `λ_sc` by the switching index `gamma3`. Both
//! controllers act on `e = reference - measured`; the gains are negative
//! because raising a weight lowers its index.

use serde::{Deserialize, Serialize};

use crate::cost::WeightVector;
use crate::error::{Error, Result};
use crate::metrics::MetricsBlock;
use crate::outer_loop::PiState;

/// Time unit of the tuner integrators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IntegralBase {
    /// `integ += e` once per block; `gi` is a per-update gain.
    #[default]
    Block,
    /// `integ += e·N·Ts`; `gi` is per second.
    Seconds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TunerConfig {
    /// Reference for the x–y RMS error (A).
    pub gamma2_ref: f64,
    /// Reference for the switching estimate.
    pub gamma3_ref: f64,
    pub gp2: f64,
    pub gi2: f64,
    pub gp3: f64,
    pub gi3: f64,
    pub lambda_xy_bounds: [f64; 2],
    pub lambda_sc_bounds: [f64; 2],
    /// Weights in force before the first block closes.
    pub initial: WeightVector,
    pub integral_base: IntegralBase,
}

impl Default for TunerConfig {
    fn default() -> Self {
        Self {
            gamma2_ref: 0.050,
            gamma3_ref: 200.0,
            gp2: -1.0,
            gi2: -2.8,
            gp3: -1.07e-6,
            gi3: -2.39e-6,
            lambda_xy_bounds: [0.0, 5.0],
            lambda_sc_bounds: [0.0, 0.01],
            initial: WeightVector::default(),
            integral_base: IntegralBase::Block,
        }
    }
}

impl TunerConfig {
    pub fn validate(&self) -> Result<()> {
        check_reference("tuner.gamma2_ref", self.gamma2_ref)?;
        check_reference("tuner.gamma3_ref", self.gamma3_ref)?;
        for (key, g) in [
            ("tuner.gp2", self.gp2),
            ("tuner.gi2", self.gi2),
            ("tuner.gp3", self.gp3),
            ("tuner.gi3", self.gi3),
        ] {
            if !g.is_finite() {
                return Err(Error::config(key, "gain must be finite"));
            }
        }
        for (key, [lo, hi]) in [
            ("tuner.lambda_xy_bounds", self.lambda_xy_bounds),
            ("tuner.lambda_sc_bounds", self.lambda_sc_bounds),
        ] {
            if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi) {
                return Err(Error::config(key, "bounds must be finite with 0 <= lo <= hi"));
            }
        }
        let WeightVector { lambda_xy, lambda_sc } = self.initial;
        if !in_bounds(lambda_xy, self.lambda_xy_bounds) || !in_bounds(lambda_sc, self.lambda_sc_bounds) {
            return Err(Error::config("tuner.initial", "initial weights must lie within their bounds"));
        }
        Ok(())
    }

    pub fn contains(&self, w: &WeightVector) -> bool {
        in_bounds(w.lambda_xy, self.lambda_xy_bounds) && in_bounds(w.lambda_sc, self.lambda_sc_bounds)
    }
}

fn in_bounds(v: f64, [lo, hi]: [f64; 2]) -> bool {
    (lo..=hi).contains(&v)
}

fn check_reference(key: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v >= 0.0) {
        return Err(Error::config(key, format!("reference must be finite and >= 0, got {v}")));
    }
    Ok(())
}

/// Integrator preload so the first output equals `initial` at zero error.
fn preloaded(kp: f64, ki: f64, dt: f64, [lo, hi]: [f64; 2], initial: f64) -> PiState {
    let mut pi = PiState::new(kp, ki, dt).with_limits(lo, hi);
    if ki != 0.0 {
        pi.integ = initial / ki;
    }
    pi
}

#[derive(Debug, Clone)]
pub struct AutoTuner {
    cfg: TunerConfig,
    pi_xy: PiState,
    pi_sc: PiState,
    lambda: WeightVector,
}

impl AutoTuner {
    /// `dt_block` is the block period `N·Ts`; it only enters the integrators
    /// with [`IntegralBase::Seconds`].
    pub fn new(cfg: TunerConfig, dt_block: f64) -> Self {
        let init = cfg.initial;
        let dt_block = match cfg.integral_base {
            IntegralBase::Block => 1.0,
            IntegralBase::Seconds => dt_block,
        };
        Self {
            pi_xy: preloaded(cfg.gp2, cfg.gi2, dt_block, cfg.lambda_xy_bounds, init.lambda_xy),
            pi_sc: preloaded(cfg.gp3, cfg.gi3, dt_block, cfg.lambda_sc_bounds, init.lambda_sc),
            lambda: init,
            cfg,
        }
    }

    /// Starts from explicit controller states instead of the preload.
    pub fn with_states(cfg: TunerConfig, pi_xy: PiState, pi_sc: PiState) -> Self {
        Self {
            lambda: cfg.initial,
            cfg,
            pi_xy,
            pi_sc,
        }
    }

    pub fn config(&self) -> &TunerConfig {
        &self.cfg
    }

    pub fn weights(&self) -> WeightVector {
        self.lambda
    }

    pub fn states(&self) -> (PiState, PiState) {
        (self.pi_xy, self.pi_sc)
    }

    /// Updates both weights from one finished block.
    pub fn step(&mut self, block: &MetricsBlock) -> WeightVector {
        let e2 = self.cfg.gamma2_ref - block.gamma2;
        let e3 = self.cfg.gamma3_ref - block.gamma3;
        self.lambda = WeightVector {
            lambda_xy: self.pi_xy.update(e2, true),
            lambda_sc: self.pi_sc.update(e3, true),
        };
        self.lambda
    }

    /// Replaces the index references; the integrators carry over.
    pub fn set_references(&mut self, gamma2_ref: f64, gamma3_ref: f64) -> Result<()> {
        check_reference("tuner.gamma2_ref", gamma2_ref)?;
        check_reference("tuner.gamma3_ref", gamma3_ref)?;
        self.cfg.gamma2_ref = gamma2_ref;
        self.cfg.gamma3_ref = gamma3_ref;
        Ok(())
    }
}
