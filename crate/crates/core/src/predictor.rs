//! Controller-side discrete model of the stator currents.
//!
//! Stator currents are ordered (α, β, x, y). The model is the forward-Euler
//! discretization of the stator-only dynamics at the sampling period; the
//! rotor contribution is left to the backtracked correction term `G`.

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::machine::{MachineParams, Voltages, ROTATION_SIGN};
use crate::vsi::{enumerate_states, state_voltages, VsiState, NUM_STATES};

pub type Currents = Vector4<f64>;

pub fn voltage_vector(v: &Voltages) -> Vector4<f64> {
    Vector4::new(v.ab[0], v.ab[1], v.xy[0], v.xy[1])
}

/// `î(k+1) = Φ(ω)·i(k) + Ψ·v(u(k))`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteModel {
    pub phi: Matrix4<f64>,
    pub psi: Matrix4<f64>,
    /// Speed the model was built for (rad/s, mechanical).
    pub omega: f64,
    /// `Ψ·v(u)` for every inverter state, index order.
    forced: [Vector4<f64>; NUM_STATES],
}

impl DiscreteModel {
    /// Input contribution `Ψ·v(u)`.
    pub fn forced_response(&self, u: VsiState) -> &Vector4<f64> {
        &self.forced[u.index() as usize]
    }
}

/// Continuous-time system matrix of the stator-only model.
pub fn continuous_system(omega: f64, p: &MachineParams) -> (Matrix4<f64>, Matrix4<f64>) {
    let sls = p.sigma_ls();
    let omega_r = ROTATION_SIGN * p.poles() * omega;
    let cross = p.lm * p.lm / p.lr() * omega_r / sls;
    let r_ab = p.rs / sls;
    let r_xy = p.rs / p.lls;
    #[rustfmt::skip]
    let a = Matrix4::new(
        -r_ab,  cross, 0.0,   0.0,
        -cross, -r_ab, 0.0,   0.0,
        0.0,    0.0,   -r_xy, 0.0,
        0.0,    0.0,   0.0,   -r_xy,
    );
    let b = Matrix4::from_diagonal(&Vector4::new(1.0 / sls, 1.0 / sls, 1.0 / p.lls, 1.0 / p.lls));
    (a, b)
}

pub fn build_discrete_model(omega: f64, p: &MachineParams) -> DiscreteModel {
    let (a, b) = continuous_system(omega, p);
    let phi = Matrix4::identity() + a * p.ts;
    let psi = b * p.ts;
    let forced = enumerate_states().map(|u| psi * voltage_vector(&state_voltages(u, p.vdc)));
    DiscreteModel { phi, psi, omega, forced }
}

pub fn predict_one_step(is_k: &Currents, u_k: VsiState, model: &DiscreteModel) -> Currents {
    model.phi * is_k + model.forced_response(u_k)
}

/// Prediction residual `G(k) = i(k) - î(k)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CorrectionTerm(pub Currents);

impl CorrectionTerm {
    pub fn zero() -> Self {
        Self(Currents::zeros())
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }
}

pub fn update_correction(is_meas_k: &Currents, is_pred_k: &Currents) -> CorrectionTerm {
    CorrectionTerm(is_meas_k - is_pred_k)
}

/// Two-step prediction for a candidate applied over period k+1, given the
/// action already committed for period k.
pub fn predict_two_step(
    is_k: &Currents,
    u_applied: VsiState,
    u_candidate: VsiState,
    model: &DiscreteModel,
    g: &CorrectionTerm,
) -> Currents {
    let next = predict_one_step(is_k, u_applied, model);
    predict_one_step(&next, u_candidate, model) + g.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictorConfig {
    /// Rebuild the model when the speed moved more than this (rad/s).
    pub rebuild_threshold: f64,
    /// First-order smoothing of `G`; 1.0 leaves it unfiltered.
    pub g_filter: f64,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        Self {
            rebuild_threshold: 0.0,
            g_filter: 1.0,
        }
    }
}

impl PredictorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rebuild_threshold.is_finite() && self.rebuild_threshold >= 0.0) {
            return Err(Error::config("predictor.rebuild_threshold", "must be finite and >= 0"));
        }
        if !(self.g_filter > 0.0 && self.g_filter <= 1.0) {
            return Err(Error::config("predictor.g_filter", "must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Run-time predictor: cached model, correction term and the previous
/// one-step prediction used for backtracking.
#[derive(Debug, Clone)]
pub struct Predictor {
    params: MachineParams,
    cfg: PredictorConfig,
    model: DiscreteModel,
    g: CorrectionTerm,
    pending: Option<Currents>,
}

impl Predictor {
    pub fn new(params: MachineParams, cfg: PredictorConfig, omega: f64) -> Self {
        let model = build_discrete_model(omega, &params);
        Self {
            params,
            cfg,
            model,
            g: CorrectionTerm::zero(),
            pending: None,
        }
    }

    pub fn model(&self) -> &DiscreteModel {
        &self.model
    }

    pub fn correction(&self) -> &CorrectionTerm {
        &self.g
    }

    pub fn refresh(&mut self, omega: f64) {
        let moved = (omega - self.model.omega).abs();
        if moved > self.cfg.rebuild_threshold {
            self.model = build_discrete_model(omega, &self.params);
        }
    }

    /// Backtracks `G` from the measurement at k and the prediction made at
    /// k-1. Returns the raw (unfiltered) residual.
    pub fn correct(&mut self, is_meas: &Currents) -> CorrectionTerm {
        let raw = match &self.pending {
            Some(pred) => update_correction(is_meas, pred),
            None => CorrectionTerm::zero(),
        };
        let a = self.cfg.g_filter;
        self.g = if a >= 1.0 {
            raw
        } else {
            CorrectionTerm(self.g.0 + (raw.0 - self.g.0) * a)
        };
        raw
    }

    /// Records `î(k+1)` for the next backtracking step and returns it.
    pub fn commit_one_step(&mut self, is_k: &Currents, u_applied: VsiState) -> Currents {
        let next = predict_one_step(is_k, u_applied, &self.model);
        self.pending = Some(next);
        next
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::{reduced_derivative, PlantState};
    use crate::vsi::VsiState;

    fn params() -> MachineParams {
        MachineParams::default()
    }

    #[test]
    fn standstill_model_is_euler_of_rl_blocks() {
        let p = params();
        let m = build_discrete_model(0.0, &p);
        let sls = p.ls() - p.lm * p.lm / p.lr();
        let d_ab = 1.0 - p.ts * p.rs / sls;
        let d_xy = 1.0 - p.ts * p.rs / p.lls;
        #[rustfmt::skip]
        let expect = Matrix4::new(
            d_ab, 0.0, 0.0, 0.0,
            0.0, d_ab, 0.0, 0.0,
            0.0, 0.0, d_xy, 0.0,
            0.0, 0.0, 0.0, d_xy,
        );
        assert!((m.phi - expect).abs().max() < 1e-15);
        assert!((m.psi[(0, 0)] - p.ts / sls).abs() < 1e-15);
        assert!((m.psi[(2, 2)] - p.ts / p.lls).abs() < 1e-15);
    }

    #[test]
    fn vanishing_period_limit() {
        let p = MachineParams { ts: 1e-9, ..params() };
        let m = build_discrete_model(50.0, &p);
        assert!((m.phi - Matrix4::identity()).abs().max() < 1e-6);
        assert!(m.psi.abs().max() < 1e-6);
    }

    #[test]
    fn xy_block_speed_independent() {
        let p = params();
        let a = build_discrete_model(-300.0, &p);
        let b = build_discrete_model(77.0, &p);
        assert_eq!(a.phi.fixed_view::<2, 2>(2, 2), b.phi.fixed_view::<2, 2>(2, 2));
        assert_ne!(a.phi.fixed_view::<2, 2>(0, 0), b.phi.fixed_view::<2, 2>(0, 0));
    }

    #[test]
    fn null_state_from_rest_stays_at_rest() {
        let m = build_discrete_model(50.0, &params());
        let u0 = VsiState::from_index(0).unwrap();
        assert_eq!(predict_one_step(&Currents::zeros(), u0, &m), Currents::zeros());
        let g = CorrectionTerm::zero();
        assert_eq!(predict_two_step(&Currents::zeros(), u0, u0, &m, &g), Currents::zeros());
    }

    #[test]
    fn one_step_matches_euler_of_reduced_plant() {
        let p = params();
        let omega = 42.0;
        let m = build_discrete_model(omega, &p);
        let u = VsiState::from_index(13).unwrap();
        let s = PlantState {
            is_ab: [0.8, -0.3],
            is_xy: [0.05, 0.02],
            omega,
            ..Default::default()
        };
        let v = state_voltages(u, p.vdc);
        let d = reduced_derivative(&s, &v, &p);
        let euler = Currents::new(
            s.is_ab[0] + p.ts * d.is_ab[0],
            s.is_ab[1] + p.ts * d.is_ab[1],
            s.is_xy[0] + p.ts * d.is_xy[0],
            s.is_xy[1] + p.ts * d.is_xy[1],
        );
        let pred = predict_one_step(&Currents::from(s.stator_currents()), u, &m);
        assert!((pred - euler).abs().max() < 1e-9);
    }

    #[test]
    fn correction_examples() {
        let a = Currents::new(1.0, 2.0, 3.0, 4.0);
        assert_eq!(update_correction(&a, &a).0, Currents::zeros());
        let g = update_correction(&a, &Currents::new(0.5, 2.0, 3.0, 4.0));
        assert_eq!(g.0, Currents::new(0.5, 0.0, 0.0, 0.0));
    }

    #[test]
    fn correction_shifts_two_step_additively() {
        let m = build_discrete_model(30.0, &params());
        let i = Currents::new(0.3, 0.9, -0.01, 0.02);
        let (ua, uc) = (VsiState::from_index(5).unwrap(), VsiState::from_index(22).unwrap());
        let base = predict_two_step(&i, ua, uc, &m, &CorrectionTerm::zero());
        let shifted = predict_two_step(&i, ua, uc, &m, &CorrectionTerm(Currents::new(0.25, 0.0, 0.0, 0.0)));
        let d = shifted - base;
        assert!((d[0] - 0.25).abs() < 1e-15);
        assert_eq!(&d.as_slice()[1..], &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn phi_varies_continuously_with_speed() {
        let p = params();
        let (w, h) = (60.0, 1e-3);
        let fd = (build_discrete_model(w + h, &p).phi - build_discrete_model(w - h, &p).phi) / (2.0 * h);
        let coeff = p.ts * (p.lm * p.lm / p.lr()) * ROTATION_SIGN * p.poles() / p.sigma_ls();
        #[rustfmt::skip]
        let analytic = Matrix4::new(
            0.0, coeff, 0.0, 0.0,
            -coeff, 0.0, 0.0, 0.0,
            0.0, 0.0, 0.0, 0.0,
            0.0, 0.0, 0.0, 0.0,
        );
        assert!((fd - analytic).abs().max() < 1e-6);
    }

    #[test]
    fn predictor_backtracks_previous_prediction() {
        let p = params();
        let mut pr = Predictor::new(p, PredictorConfig::default(), 10.0);
        let i0 = Currents::new(0.1, 0.2, 0.0, 0.0);
        assert_eq!(pr.correct(&i0).0, Currents::zeros());
        let u = VsiState::from_index(3).unwrap();
        let pred = pr.commit_one_step(&i0, u);
        let meas = pred + Currents::new(0.01, -0.02, 0.0, 0.003);
        let g = pr.correct(&meas);
        assert!((g.0 - Currents::new(0.01, -0.02, 0.0, 0.003)).abs().max() < 1e-15);
    }

    #[test]
    fn filtered_correction_smooths() {
        let cfg = PredictorConfig { g_filter: 0.5, ..Default::default() };
        let mut pr = Predictor::new(params(), cfg, 0.0);
        let u = VsiState::from_index(0).unwrap();
        let i0 = Currents::zeros();
        pr.correct(&i0);
        pr.commit_one_step(&i0, u);
        pr.correct(&Currents::new(1.0, 0.0, 0.0, 0.0));
        assert!((pr.correction().0[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        assert!(PredictorConfig::default().validate().is_ok());
        let bad = PredictorConfig { g_filter: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
