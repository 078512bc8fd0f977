//! Qudit readout models: the dispersive-shift estimator and the resonant
//! photon-emission projective measurement.
//!
//! The dispersive strategy only needs the pull χ = (G^m)²/Δ and a duration
//! estimate ∝ 1/χ; the full transmission protocol is out of scope. The
//! resonant strategy swaps the addressed 0↔1 pair onto the resonator (the
//! calibrated emission segment from the gate scheduler), waits out a photon
//! detection window, and applies an instantaneous POVM with efficiency η and
//! no dark counts; a click resets the photon and re-prepares the qudit with a
//! classical drive.

use ndarray::Array2;
use num_complex::Complex64 as C64;

use crate::composite::CompositeSpace;
use crate::error::{Error, Result};
use crate::gates::calibrate_emission;
use crate::lindblad::{evolve, EvolveOptions, NoiseModel};
use crate::schedule::ControlSchedule;

/// Single-photon detector: efficiency and detection window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorModel {
    /// Detection efficiency η ∈ [0, 1].
    pub efficiency: f64,
    /// Detection window, ns (detectors resolve 50–100 ns; the window sets how
    /// long the emitted photon is exposed to cavity loss before the POVM).
    pub window_ns: f64,
}

impl DetectorModel {
    pub fn new(efficiency: f64, window_ns: f64) -> Result<Self> {
        let d = Self { efficiency, window_ns };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(Error::Spec("detector efficiency must lie in [0, 1]".into()));
        }
        if self.window_ns <= 0.0 {
            return Err(Error::Spec("detection window must be positive".into()));
        }
        Ok(())
    }
}

/// Outcome of one resonant readout.
#[derive(Debug, Clone)]
pub struct ReadoutResult {
    /// Outcome probabilities [P(no click), P(click)].
    pub probabilities: [f64; 2],
    /// Post-measurement states conditioned on [no click, click]; the click
    /// branch includes the photon reset and the re-preparation drive.
    pub post_states: [Array2<C64>; 2],
    /// Total protocol duration: swap + detection window, ns.
    pub duration_ns: f64,
    /// Calibrated swap duration, ns.
    pub swap_ns: f64,
    /// Excited-pair population left on the qudit after the swap (residual
    /// qudit–resonator entanglement proxy).
    pub residual_excitation: f64,
}

/// Dispersive pull χ = (G^m)²/Δ (MHz) and the estimated readout duration
/// 1/(3χ) in ns.
pub fn dispersive_shift(g_mhz: f64, delta_mhz: f64) -> Result<(f64, f64)> {
    if g_mhz < 0.0 {
        return Err(Error::Spec("coupling must be non-negative".into()));
    }
    if delta_mhz < 10.0 * g_mhz {
        return Err(Error::Spec(format!(
            "dispersive validity violated: Δ = {delta_mhz} MHz < 10·G = {} MHz",
            10.0 * g_mhz
        )));
    }
    let chi_mhz = g_mhz * g_mhz / delta_mhz;
    let duration_ns = if chi_mhz > 0.0 { 1.0 / (3.0 * chi_mhz * 1e-3) } else { f64::INFINITY };
    Ok((chi_mhz, duration_ns))
}

/// Projector onto photon-number ≥ 1 states.
fn photon_projector(space: &CompositeSpace) -> Array2<C64> {
    let dim = space.dim();
    let mut p = Array2::zeros((dim, dim));
    for k in 0..dim {
        if space.n_photon[k] >= 0.5 {
            p[[k, k]] = C64::new(1.0, 0.0);
        }
    }
    p
}

/// Photon reset channel: every |spins, n⟩ with n ≥ 1 is mapped to
/// |spins, 0⟩ (Kraus sum over n).
fn reset_photon(space: &CompositeSpace, rho: &Array2<C64>) -> Array2<C64> {
    let dim = space.dim();
    let mut out: Array2<C64> = Array2::zeros((dim, dim));
    for ka in 0..dim {
        let (a1, a2, na) = space.labels_of(ka);
        for kb in 0..dim {
            let (b1, b2, nb) = space.labels_of(kb);
            if na == nb {
                out[[space.index_of(a1, a2, 0), space.index_of(b1, b2, 0)]] += rho[[ka, kb]];
            }
        }
    }
    out
}

/// Ideal re-preparation drive: |0⟩ ↔ |1⟩ exchange on the measured qudit
/// (instantaneous classical π pulse).
fn repreparation_unitary(space: &CompositeSpace, qudit: u8) -> Array2<C64> {
    let dim = space.dim();
    let mut u: Array2<C64> = Array2::zeros((dim, dim));
    for k in 0..dim {
        let (i1, i2, n) = space.labels_of(k);
        let (j1, j2) = if qudit == 1 {
            (if i1 == 0 { 1 } else if i1 == 1 { 0 } else { i1 }, i2)
        } else {
            (i1, if i2 == 0 { 1 } else if i2 == 1 { 0 } else { i2 })
        };
        u[[space.index_of(j1, j2, n), k]] = C64::new(1.0, 0.0);
    }
    u
}

/// Run the resonant projective readout of the 0↔1 pair of `qudit`.
///
/// The pair is swapped onto the resonator with the calibrated emission
/// segment, the photon is held for the detection window under the noise
/// model, and an instantaneous POVM with efficiency η fires on the photon.
/// A click resets the photon and re-prepares the qudit in |1⟩.
pub fn simulate_resonant_readout(
    rho: &Array2<C64>,
    space: &CompositeSpace,
    qudit: u8,
    pair: (usize, usize),
    detector: &DetectorModel,
    noise: &NoiseModel,
) -> Result<ReadoutResult> {
    detector.validate()?;
    if pair != (0, 1) {
        return Err(Error::Spec("resonant readout addresses the 0↔1 pair".into()));
    }
    let (n_own, _other) = if qudit == 1 {
        (space.levels1.len(), space.levels2.len())
    } else {
        (space.levels2.len(), space.levels1.len())
    };
    if n_own < 2 {
        return Err(Error::Spec("measured pair not retained in the space".into()));
    }
    if space.n_max < 1 {
        return Err(Error::Spec("readout needs at least one photon state".into()));
    }

    // Calibrated swap segment (closed-system tune-up on a reduced space).
    let cal_space = if qudit == 1 {
        crate::composite::assemble_space(
            space.spec1,
            space.spec2,
            &space.levels1[..2],
            &space.levels2[..1],
            1,
            space.b_mt,
            space.omega0_ghz,
        )?
    } else {
        crate::composite::assemble_space(
            space.spec1,
            space.spec2,
            &space.levels1[..1],
            &space.levels2[..2],
            1,
            space.b_mt,
            space.omega0_ghz,
        )?
    };
    let swap_ns = calibrate_emission(&cal_space, qudit, (0, 1))?;

    let gap = space.energy_of_slot(qudit, 1) - space.energy_of_slot(qudit, 0);
    let span = swap_ns + crate::gates::DETUNING_RAMP_NS + detector.window_ns;
    let mut sched = ControlSchedule::new(span);
    crate::gates::add_ramped_detuning(&mut sched, 0.0, swap_ns, gap - space.omega0_ghz)?;

    let traj = evolve(rho, space, &sched, noise, &EvolveOptions::default())?;
    let rho_end = traj.final_state().clone();

    // Residual excitation on the measured pair's upper level.
    let mut residual = 0.0;
    for k in 0..space.dim() {
        let (i1, i2, _) = space.labels_of(k);
        let own = if qudit == 1 { i1 } else { i2 };
        if own == 1 {
            residual += rho_end[[k, k]].re;
        }
    }
    if residual > 1e-2 {
        return Err(Error::Numerical(format!(
            "residual qudit–resonator entanglement after swap: excited population {residual:.4}"
        )));
    }

    // POVM: click = √η·Π₁ (photon present), no-click = {Π₀, √(1−η)·Π₁}.
    let eta = detector.efficiency;
    let p1 = photon_projector(space);
    let pi1 = p1.dot(&rho_end).dot(&p1);
    let trace = |m: &Array2<C64>| -> f64 { (0..space.dim()).map(|k| m[[k, k]].re).sum() };
    let p_click = (eta * trace(&pi1)).clamp(0.0, 1.0);

    let dim = space.dim();
    let eye = crate::linalg::eye(dim);
    let p0 = &eye - &p1;
    let pi0 = p0.dot(&rho_end).dot(&p0);
    let mut no_click = &pi0 + &pi1.mapv(|z| z * (1.0 - eta));
    if 1.0 - p_click > 1e-12 {
        no_click.mapv_inplace(|z| z / (1.0 - p_click));
    }

    let click = if p_click > 1e-12 {
        let reset = reset_photon(space, &pi1.mapv(|z| z / trace(&pi1)));
        let u = repreparation_unitary(space, qudit);
        u.dot(&reset).dot(&crate::linalg::dagger(&u))
    } else {
        // No support on the click branch: return the reset state unchanged.
        reset_photon(space, &rho_end)
    };

    Ok(ReadoutResult {
        probabilities: [1.0 - p_click, p_click],
        post_states: [no_click, click],
        duration_ns: span,
        swap_ns,
        residual_excitation: residual,
    })
}
