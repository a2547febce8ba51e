//! Block-windowed performance indices.
//!
//! * `gamma1`: RMS α–β current error (A)
//! * `gamma2`: RMS x–y current error (A)
//! * `gamma3`: switching estimate `2π/(N·Ts·ω̄_e) · Σ SC/6`
//!
//! Windows are consecutive and non-overlapping; one block is produced every
//! `N` control periods.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::cost::WeightVector;
use crate::error::{Error, Result};
use crate::machine::Pair;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    /// Samples per block (N).
    pub window: usize,
    /// Lower bound on |ω̄_e| (rad/s) in the switching estimate, which is
    /// otherwise unbounded near standstill.
    pub omega_e_floor: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            window: 720,
            omega_e_floor: TAU,
        }
    }
}

impl MetricsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window < 1 {
            return Err(Error::config("metrics.window", "must be >= 1"));
        }
        if !(self.omega_e_floor.is_finite() && self.omega_e_floor > 0.0) {
            return Err(Error::config("metrics.omega_e_floor", "must be finite and > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsBlock {
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    /// Plain commutation rate `Σ SC / (6·N·Ts)` (1/s).
    pub switch_rate: f64,
    /// Control-period count at the end of the block.
    pub sample_end: u64,
    pub t_end: f64,
    /// Mean mechanical speed over the block (rad/s).
    pub omega: f64,
    /// Mean electrical frequency over the block (rad/s).
    pub omega_e: f64,
    /// Weights in force while the block was measured.
    pub lambda: WeightVector,
}

#[derive(Debug, Clone)]
pub struct MetricsAccumulator {
    window: usize,
    ts: f64,
    omega_e_floor: f64,
    sum_sq_ab: f64,
    sum_sq_xy: f64,
    sum_sc: u64,
    sum_omega_e: f64,
    sum_omega: f64,
    count: usize,
    samples_total: u64,
}

impl MetricsAccumulator {
    pub fn new(cfg: &MetricsConfig, ts: f64) -> Self {
        Self {
            window: cfg.window,
            ts,
            omega_e_floor: cfg.omega_e_floor,
            sum_sq_ab: 0.0,
            sum_sq_xy: 0.0,
            sum_sc: 0,
            sum_omega_e: 0.0,
            sum_omega: 0.0,
            count: 0,
            samples_total: 0,
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn is_full(&self) -> bool {
        self.count >= self.window
    }

    pub fn sum_sq_ab(&self) -> f64 {
        self.sum_sq_ab
    }

    pub fn sum_sq_xy(&self) -> f64 {
        self.sum_sq_xy
    }

    pub fn sum_sc(&self) -> u64 {
        self.sum_sc
    }

    pub fn accumulate(&mut self, e_ab: Pair, e_xy: Pair, sc: u32, omega_e: f64, omega: f64) {
        debug_assert!(self.count < self.window, "accumulate on a full window");
        self.sum_sq_ab += e_ab[0] * e_ab[0] + e_ab[1] * e_ab[1];
        self.sum_sq_xy += e_xy[0] * e_xy[0] + e_xy[1] * e_xy[1];
        self.sum_sc += u64::from(sc);
        self.sum_omega_e += omega_e;
        self.sum_omega += omega;
        self.count += 1;
        self.samples_total += 1;
    }

    /// Closes the window and resets the accumulators.
    pub fn finalize(&mut self, lambda: WeightVector) -> Result<MetricsBlock> {
        if self.count != self.window {
            return Err(Error::IncompleteWindow {
                count: self.count,
                window: self.window,
            });
        }
        let n = self.window as f64;
        let omega_e = self.sum_omega_e / n;
        let span = n * self.ts;
        let commutations = self.sum_sc as f64 / 6.0;
        let block = MetricsBlock {
            gamma1: (self.sum_sq_ab / n).sqrt(),
            gamma2: (self.sum_sq_xy / n).sqrt(),
            gamma3: TAU / (span * omega_e.abs().max(self.omega_e_floor)) * commutations,
            switch_rate: commutations / span,
            sample_end: self.samples_total,
            t_end: self.samples_total as f64 * self.ts,
            omega: self.sum_omega / n,
            omega_e,
            lambda,
        };
        self.sum_sq_ab = 0.0;
        self.sum_sq_xy = 0.0;
        self.sum_sc = 0;
        self.sum_omega_e = 0.0;
        self.sum_omega = 0.0;
        self.count = 0;
        Ok(block)
    }
}
