//! Cost function and exhaustive selection over the inverter states.

use serde::{Deserialize, Serialize};

use crate::machine::Pair;
use crate::predictor::{predict_one_step, CorrectionTerm, Currents, DiscreteModel};
use crate::vsi::{enumerate_states, switch_changes, VsiState};

/// Cost-function weights `(λ_xy, λ_sc)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub lambda_xy: f64,
    pub lambda_sc: f64,
}

impl WeightVector {
    pub const fn new(lambda_xy: f64, lambda_sc: f64) -> Self {
        Self { lambda_xy, lambda_sc }
    }
}

impl Default for WeightVector {
    fn default() -> Self {
        Self::new(0.4, 0.0020)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionResult {
    pub u_opt: VsiState,
    pub cost: f64,
    /// Switch changes from the committed state to `u_opt`.
    pub sc: u32,
}

/// `‖e_ab‖² + λ_xy·‖e_xy‖² + λ_sc·sc`
pub fn cost(e_ab: Pair, e_xy: Pair, sc: u32, w: &WeightVector) -> f64 {
    let ab = e_ab[0] * e_ab[0] + e_ab[1] * e_ab[1];
    let xy = e_xy[0] * e_xy[0] + e_xy[1] * e_xy[1];
    ab + w.lambda_xy * xy + w.lambda_sc * f64::from(sc)
}

/// Picks the state for period k+1 minimizing the cost of the two-step
/// prediction. Candidates are visited in index order and only a strictly
/// lower cost replaces the incumbent, so ties go to the lowest index.
pub fn select(
    ref_k2: &Currents,
    is_k: &Currents,
    u_applied: VsiState,
    model: &DiscreteModel,
    g: &CorrectionTerm,
    w: &WeightVector,
) -> SelectionResult {
    let next = predict_one_step(is_k, u_applied, model);
    let free = model.phi * next + g.0;
    let mut best: Option<SelectionResult> = None;
    for u in enumerate_states() {
        let pred = free + model.forced_response(u);
        let e = ref_k2 - pred;
        let sc = switch_changes(u_applied, u);
        let j = cost([e[0], e[1]], [e[2], e[3]], sc, w);
        if best.is_none_or(|b| j < b.cost) {
            best = Some(SelectionResult { u_opt: u, cost: j, sc });
        }
    }
    best.expect("state set is non-empty")
}
