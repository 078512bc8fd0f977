//! Unit conventions and physical constants.
//!
//! All Hamiltonian matrix elements are linear frequencies in GHz with ħ = 1;
//! time is in ns. Angular factors of 2π appear only inside the integrator.
//! Magnetic fields are passed in the units natural to each interface: static
//! bias fields in mT, drive amplitudes in G, microwave stray fields in µT.

/// Bohr magneton over Planck's constant, GHz/T (CODATA, linear frequency).
pub const MU_B_GHZ_PER_T: f64 = 13.996245;

/// Convert a static field in mT to T.
pub fn mt_to_t(b_mt: f64) -> f64 {
    b_mt * 1e-3
}

/// Convert a drive amplitude in G to T.
pub fn gauss_to_t(b_gauss: f64) -> f64 {
    b_gauss * 1e-4
}

/// Convert a field in µT to T.
pub fn ut_to_t(b_ut: f64) -> f64 {
    b_ut * 1e-6
}

/// Zeeman energy g·μB·B in GHz for a field in mT.
pub fn zeeman_ghz(g: f64, b_mt: f64) -> f64 {
    g * MU_B_GHZ_PER_T * mt_to_t(b_mt)
}

/// Zeeman drive prefactor g·μB·B₁ in GHz for an amplitude in G.
pub fn drive_prefactor_ghz(g: f64, b1_gauss: f64) -> f64 {
    g * MU_B_GHZ_PER_T * gauss_to_t(b1_gauss)
}

/// Convert µs to ns.
pub fn us_to_ns(t_us: f64) -> f64 {
    t_us * 1e3
}
