//! Fixtures shared by the criterion benches.

use ncd_core::entanglement::werner_state;
use ncd_core::state::library;
use ncd_core::{BosonicState, FockOperator};

/// Werner state with one empty level per mode.
pub fn werner(p: f64) -> FockOperator {
    werner_state(p, 3).expect("p in range")
}

/// `(1 - eps)|0><0| + eps|2><2|`.
pub fn vacuum_two_photon(eps: f64) -> FockOperator {
    library::vacuum_two_photon(eps).expect("eps in range").fock_part().expect("Fock state").clone()
}

/// Dense single-mode state with every matrix element populated.
pub fn dense_single_mode(dim: usize) -> FockOperator {
    library::thermal(0.8).and_then(|s| s.to_fock_unchecked(&[dim])).expect("thermal").operator
}

pub fn diosi() -> BosonicState {
    library::diosi()
}
