//! Two-level five-leg voltage source inverter.

use crate::machine::{clarke_5, Phases, Voltages};

pub const NUM_STATES: usize = 32;

/// Leg switch states `(Ka, .., Ke)` packed into the low five bits, Ka in
/// bit 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct VsiState(u8);

impl VsiState {
    pub const fn from_index(index: u8) -> Option<Self> {
        if index < NUM_STATES as u8 {
            Some(Self(index))
        } else {
            None
        }
    }

    pub fn from_legs(legs: [u8; 5]) -> Option<Self> {
        let mut idx = 0u8;
        for (k, &b) in legs.iter().enumerate() {
            if b > 1 {
                return None;
            }
            idx |= b << k;
        }
        Some(Self(idx))
    }

    pub const fn index(self) -> u8 {
        self.0
    }

    pub fn legs(self) -> [u8; 5] {
        std::array::from_fn(|k| (self.0 >> k) & 1)
    }

    /// Both null vectors (all legs low or all high).
    pub const fn is_null(self) -> bool {
        self.0 == 0 || self.0 == 31
    }
}

/// All 32 states in index order. The order is the argmin tie-break order.
pub fn enumerate_states() -> [VsiState; NUM_STATES] {
    std::array::from_fn(|i| VsiState(i as u8))
}

/// Phase voltages of a star-connected load with isolated neutral.
pub fn phase_voltages(u: VsiState, vdc: f64) -> Phases {
    let legs = u.legs();
    let mean = legs.iter().map(|&k| f64::from(k)).sum::<f64>() / 5.0;
    Phases(legs.map(|k| vdc * (f64::from(k) - mean)))
}

pub fn state_voltages(u: VsiState, vdc: f64) -> Voltages {
    let c = clarke_5(&phase_voltages(u, vdc));
    Voltages { ab: c.ab, xy: c.xy }
}

/// Number of legs that commute between two consecutive states.
pub fn switch_changes(prev: VsiState, next: VsiState) -> u32 {
    (prev.0 ^ next.0).count_ones()
}

/// Plane voltages of every state, computed once per DC-link value.
#[derive(Debug, Clone)]
pub struct VoltageTable {
    pub vdc: f64,
    table: [Voltages; NUM_STATES],
}

impl VoltageTable {
    pub fn new(vdc: f64) -> Self {
        Self {
            vdc,
            table: enumerate_states().map(|u| state_voltages(u, vdc)),
        }
    }

    pub fn get(&self, u: VsiState) -> &Voltages {
        &self.table[u.index() as usize]
    }
}
