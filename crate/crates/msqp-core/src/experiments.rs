//! Benchmark scenarios: the Deutsch–Jozsa algorithm, two-qubit gate error
//! sweeps, and digital quantum simulation of the Heisenberg and transverse
//! Ising models.
//!
//! Every scenario is deterministic: identical configs produce bit-identical
//! CSV output. Exact reference curves are computed by direct matrix
//! exponentiation on the 4-dimensional logical space, independent of the
//! pulse-level pipeline.

use std::collections::HashMap;
use std::f64::consts::{PI, TAU};
use std::sync::{Arc, Mutex, OnceLock};

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::circuit::{compile_circuit, Circuit, Gate, DEFAULT_TWO_QUBIT_M};
use crate::compiler::{
    rotations_to_pulses, synthesize_z_rotation, GateProgram, GivensRotation, PulseOptions,
};
use crate::composite::{assemble_space, density_from_vector, CompositeSpace};
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::gates::{add_ramped_detuning, fit_frames, schedule_cz, ResonantCzPlan};
use crate::spins::coupling_strength;
use crate::lindblad::{evolve, evolve_vector, EvolveOptions, NoiseModel};
use crate::schedule::{ControlSchedule, LocalShiftSegment};
use crate::units::zeeman_ghz;

/// Drive amplitude used by the scenario compilers, G.
const SCENARIO_B1_GAUSS: f64 = 2.0;
/// Inter-pulse gap, ns.
const GAP_NS: f64 = 1.0;
/// Resonator parking detuning between dispersive exchange windows, GHz.
const PARK_DELTA_GHZ: f64 = -0.8;
/// Noise point used by the quantum-simulation scenarios (benchmark corner).
const QS_T2_US: f64 = 50.0;
const QS_Q: f64 = 1e6;

// ---------------------------------------------------------------------------
// Benchmark table
// ---------------------------------------------------------------------------

/// Rows of (sweep point, metrics, schedule duration) with stable columns.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl BenchmarkTable {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width mismatch");
        self.rows.push(row);
    }

    /// Newline-terminated CSV with a header row.
    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.9e}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    /// Column values by header name.
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let idx = self
            .columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Spec(format!("no column '{name}'")))?;
        Ok(self.rows.iter().map(|r| r[idx]).collect())
    }
}

/// Deterministic worker pool: results are merged in grid order regardless of
/// the `MSQP_WORKERS` thread count.
fn par_map<T, R, F>(items: Vec<T>, f: F) -> Result<Vec<R>>
where
    T: Send,
    R: Send,
    F: Fn(T) -> Result<R> + Sync + Send,
{
    let workers = std::env::var("MSQP_WORKERS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Numerical(format!("worker pool: {e}")))?;
    pool.install(|| items.into_par_iter().map(f).collect())
}

/// Dispatch a scenario by config name.
pub fn run_scenario(config: &ExperimentConfig) -> Result<BenchmarkTable> {
    config.validate()?;
    match config.scenario.as_str() {
        "deutsch-jozsa" => run_deutsch_jozsa(config),
        "cz-error" => sweep_cz_error(config),
        "gate-comparison" => compare_gate_fidelity(config),
        "heisenberg" => simulate_heisenberg(config),
        "tim" => simulate_tim(config),
        other => Err(Error::Config(format!("unknown scenario '{other}'"))),
    }
}

// ---------------------------------------------------------------------------
// Logical 4-dimensional oracles (two spin-½ halves, ħ = 1)
// ---------------------------------------------------------------------------

fn kron(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    let (ra, ca) = (a.nrows(), a.ncols());
    let (rb, cb) = (b.nrows(), b.ncols());
    let mut out = Array2::zeros((ra * rb, ca * cb));
    for i in 0..ra {
        for j in 0..ca {
            for k in 0..rb {
                for l in 0..cb {
                    out[[i * rb + k, j * cb + l]] = a[[i, j]] * b[[k, l]];
                }
            }
        }
    }
    out
}

fn sigma() -> (Array2<C64>, Array2<C64>, Array2<C64>, Array2<C64>) {
    let z = C64::new(0.0, 0.0);
    let o = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    let sx = ndarray::arr2(&[[z, o], [o, z]]);
    let sy = ndarray::arr2(&[[z, -i], [i, z]]);
    let sz = ndarray::arr2(&[[o, z], [z, -o]]);
    let id = ndarray::arr2(&[[o, z], [z, o]]);
    (sx, sy, sz, id)
}

/// s_{a,1}·s_{a,2} products and single-spin sums on the 4-dim logical space
/// (s = σ/2; logical |0⟩ has s_z = +½).
fn spin_ops() -> [Array2<C64>; 5] {
    let (sx, sy, sz, id) = sigma();
    let q = C64::new(0.25, 0.0);
    let h = C64::new(0.5, 0.0);
    [
        kron(&sx, &sx).mapv(|v| v * q),
        kron(&sy, &sy).mapv(|v| v * q),
        kron(&sz, &sz).mapv(|v| v * q),
        (kron(&sx, &id) + kron(&id, &sx)).mapv(|v| v * h),
        (kron(&sz, &id) + kron(&id, &sz)).mapv(|v| v * h),
    ]
}

/// Exact Heisenberg propagator e^{−i·Jt·(s_x s_x + s_y s_y + s_z s_z)}.
pub fn heisenberg_exact(jt: f64) -> Result<Array2<C64>> {
    let [xx, yy, zz, _, _] = spin_ops();
    crate::linalg::exp_i_herm(&(xx + yy + zz), jt)
}

/// Exact transverse-Ising propagator at J = 2b:
/// e^{−i·tb·(2 s_z s_z + s_x1 + s_x2)}.
pub fn tim_exact(tb: f64) -> Result<Array2<C64>> {
    let [_, _, zz, xsum, _] = spin_ops();
    crate::linalg::exp_i_herm(&(zz.mapv(|v| v * 2.0) + xsum), tb)
}

/// Ideal n-step Suzuki–Trotter propagator for the same Hamiltonian.
pub fn tim_trotter(tb: f64, n: usize) -> Result<Array2<C64>> {
    let [_, _, zz, xsum, _] = spin_ops();
    let step_zz = crate::linalg::exp_i_herm(&zz, 2.0 * tb / n as f64)?;
    let step_x = crate::linalg::exp_i_herm(&xsum, tb / n as f64)?;
    let step = step_zz.dot(&step_x);
    let mut u = crate::linalg::eye(4);
    for _ in 0..n {
        u = step.dot(&u);
    }
    Ok(u)
}

/// ⟨s_z1 + s_z2⟩ of a 4-dim logical state.
pub fn total_sz(psi: &Array1<C64>) -> f64 {
    let [_, _, _, _, zsum] = spin_ops();
    let mut e = C64::new(0.0, 0.0);
    for j in 0..4 {
        for k in 0..4 {
            e += psi[j].conj() * zsum[[j, k]] * psi[k];
        }
    }
    e.re
}

/// Exact and ideal-Trotter ⟨S_z(t)⟩ reference curves over a t·b grid.
pub fn tim_reference_curves(tb_grid: &[f64], n: usize) -> Result<Vec<(f64, f64, f64)>> {
    let psi0: Array1<C64> = {
        let mut v = Array1::zeros(4);
        v[0] = C64::new(1.0, 0.0);
        v
    };
    let mut out = Vec::with_capacity(tb_grid.len());
    for &tb in tb_grid {
        let exact = tim_exact(tb)?.dot(&psi0);
        let trotter = tim_trotter(tb, n)?.dot(&psi0);
        out.push((tb, total_sz(&exact), total_sz(&trotter)));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Shared scheduling helpers
// ---------------------------------------------------------------------------

/// Cache of calibrated controlled-phase plans, keyed by space and gate
/// parameters (the calibration is deterministic, so reuse is exact).
fn cz_cached(
    space: &CompositeSpace,
    target: (usize, usize),
    phi: f64,
) -> Result<Arc<(ResonantCzPlan, ControlSchedule)>> {
    static CACHE: OnceLock<Mutex<HashMap<String, Arc<(ResonantCzPlan, ControlSchedule)>>>> =
        OnceLock::new();
    let key = format!(
        "{:?}|{:?}|{}|{}|{}|{:?}|{:x}",
        space.levels1,
        space.levels2,
        space.n_max,
        space.b_mt,
        space.omega0_ghz,
        target,
        phi.to_bits()
    );
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(hit) = cache.lock().unwrap().get(&key) {
        return Ok(hit.clone());
    }
    let entry = Arc::new(schedule_cz(space, target, phi)?);
    cache.lock().unwrap().insert(key, entry.clone());
    Ok(entry)
}

/// Sequential schedule builder for compiled gate sequences, with per-qudit
/// virtual-z frame tracking.
///
/// `pending[j]` is the trailing z rotation R_z(p) by which the physical state
/// is ahead of the intended circuit: z rotations are applied virtually
/// (`virtual_rz` only moves the frame), every emitted pulse has its carrier
/// phase shifted by −p so the intended rotation is realized inside the
/// rotated frame, and deterministic z errors (controlled-phase frame angles,
/// measured AC-Stark phases) are simply added to the frame. The sequence then
/// realizes the intended circuit exactly, up to one trailing z rotation per
/// qudit that diagonal observables and frame-fitted comparisons never see.
struct SeqBuilder<'a> {
    space: &'a CompositeSpace,
    sched: ControlSchedule,
    t: f64,
    b1: f64,
    pending: [f64; 2],
    /// Cross-drive AC-Stark phase per ns inflicted on the *other* qudit while
    /// driving qudit j+1 (calibrated; 0 when the neighbour has no 0↔1 pair).
    stark: [f64; 2],
}

impl<'a> SeqBuilder<'a> {
    fn new(space: &'a CompositeSpace, b1: f64) -> Self {
        Self { space, sched: ControlSchedule::new(0.0), t: 0.0, b1, pending: [0.0; 2], stark: [0.0; 2] }
    }

    /// Builder with calibrated cross-drive Stark bookkeeping (two-qudit
    /// sequences). `parked` matches the context the pulses will run in.
    fn with_stark(space: &'a CompositeSpace, b1: f64, parked: bool) -> Result<Self> {
        let mut b = Self::new(space, b1);
        if space.levels1.len() >= 2 && space.levels2.len() >= 2 {
            b.stark = [stark_coef(space, 1, b1, parked)?, stark_coef(space, 2, b1, parked)?];
        }
        Ok(b)
    }

    /// Virtual z rotation R_z(α) on the 0↔1 pair of `qudit`.
    fn virtual_rz(&mut self, qudit: u8, alpha: f64) {
        self.pending[qudit as usize - 1] -= alpha;
    }

    /// Append drive pulses realizing `rotations` on the 0↔1 pair of `qudit`.
    fn pulses(&mut self, qudit: u8, rotations: Vec<GivensRotation>) -> Result<()> {
        let j = qudit as usize - 1;
        let m = vec![self.space.m_of_slot(qudit, 0), self.space.m_of_slot(qudit, 1)];
        // Rotations are written in logical slot order with their phases taken
        // in the untracked frame: shift each phase into the pending frame
        // (R_z(p)·g(θ,φ)·R_z(p)† = g(θ, φ−p)), then reorder for the pulse
        // generator, which requires the lower-m level first (a pair swap maps
        // g(θ, φ) → g(θ, −φ) for the same operator).
        let rotations: Vec<GivensRotation> = rotations
            .into_iter()
            .filter(|r| r.theta.abs() > 1e-12)
            .map(|r| {
                let phi = r.phi - self.pending[j];
                if m[r.p] > m[r.q] {
                    GivensRotation::new(r.q, r.p, r.theta, -phi)
                } else {
                    GivensRotation::new(r.p, r.q, r.theta, phi)
                }
            })
            .collect();
        if rotations.is_empty() {
            return Ok(());
        }
        let prog = GateProgram {
            rotations,
            diagonal_phases: vec![0.0; 2],
            level_map: Vec::new(),
            global_phase: 0.0,
            m_of_label: m,
        };
        let (spec, order) = if qudit == 1 {
            (&self.space.spec1, &self.space.order1)
        } else {
            (&self.space.spec2, &self.space.order2)
        };
        let opts = PulseOptions { b1_gauss: self.b1, gap_ns: GAP_NS, t_start_ns: self.t };
        let s = rotations_to_pulses(&prog, spec, order, &opts)?;
        let drive_ns: f64 = s.pulses.iter().map(|p| p.dur_ns).sum();
        self.pending[1 - j] += self.stark[j] * drive_ns;
        self.t = s.span_ns + GAP_NS;
        self.sched.extend(&s)?;
        Ok(())
    }

    /// Append a pre-built gate schedule, time-shifted to the current cursor.
    fn block(&mut self, gate: &ControlSchedule) -> Result<()> {
        let s = gate.shifted(self.t);
        self.t = s.span_ns + GAP_NS;
        self.sched.extend(&s)?;
        Ok(())
    }

    /// Append a calibrated controlled-phase block and absorb its diagonal
    /// frame phases into the virtual frames.
    fn block_cp(&mut self, entry: &(ResonantCzPlan, ControlSchedule)) -> Result<()> {
        self.block(&entry.1)?;
        let a = &entry.0.frame_phases1;
        let b = &entry.0.frame_phases2;
        self.pending[0] += a[1] - a[0];
        self.pending[1] += b[1] - b[0];
        Ok(())
    }

    fn finish(mut self) -> ControlSchedule {
        self.sched.span_ns = self.sched.span_ns.max(self.t);
        self.sched
    }
}

/// Measured AC-Stark z phase per ns that a resonant 0↔1 drive on `aggressor`
/// inflicts on the other qudit's 0↔1 coherence (includes every off-resonant
/// transition and the ambient resonator dressing during the drive). One 2π
/// rotation is simulated against the victim held in superposition; the phase
/// is linear in drive time at fixed amplitude.
fn stark_coef(space: &CompositeSpace, aggressor: u8, b1: f64, parked: bool) -> Result<f64> {
    static CACHE: OnceLock<Mutex<HashMap<String, f64>>> = OnceLock::new();
    let key = format!(
        "{:?}|{:?}|{}|{}|{}|{}|{}|{:x}",
        space.levels1,
        space.levels2,
        space.n_max,
        space.b_mt,
        space.omega0_ghz,
        aggressor,
        parked,
        b1.to_bits()
    );
    let cache = CACHE.get_or_init(Default::default);
    if let Some(&hit) = cache.lock().unwrap().get(&key) {
        return Ok(hit);
    }
    let mut b = SeqBuilder::new(space, b1);
    if parked {
        parked_pulses(&mut b, &[(aggressor, vec![GivensRotation::new(0, 1, TAU, 0.0)])])?;
    } else {
        b.pulses(aggressor, vec![GivensRotation::new(0, 1, TAU, 0.0)])?;
    }
    let drive_ns: f64 = b.sched.pulses.iter().map(|p| p.dur_ns).sum();
    let sched = b.finish();
    let (v0, v1) = if aggressor == 1 { ((0, 0), (0, 1)) } else { ((0, 0), (1, 0)) };
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut psi: Array1<C64> = Array1::zeros(space.dim());
    psi[space.index_of(v0.0, v0.1, 0)] = C64::new(h, 0.0);
    psi[space.index_of(v1.0, v1.1, 0)] = C64::new(h, 0.0);
    let traj = evolve_vector(&psi, space, &sched, &EvolveOptions::default())?;
    let fin = traj.final_state();
    let eps = (fin[space.index_of(v1.0, v1.1, 0)] * fin[space.index_of(v0.0, v0.1, 0)].conj()).arg();
    let coef = eps / drive_ns;
    cache.lock().unwrap().insert(key, coef);
    Ok(coef)
}

/// Project a full-space density matrix onto the zero-photon logical block.
fn logical_rho(
    space: &CompositeSpace,
    rho: &Array2<C64>,
    comps: &[(usize, usize)],
) -> Array2<C64> {
    let d = comps.len();
    let mut out = Array2::zeros((d, d));
    for (j, &(p, q)) in comps.iter().enumerate() {
        for (k, &(r, s)) in comps.iter().enumerate() {
            out[[j, k]] = rho[[space.index_of(p, q, 0), space.index_of(r, s, 0)]];
        }
    }
    out
}

/// Closed-system logical transfer matrix of a schedule over `comps`.
fn closed_logical_matrix(
    space: &CompositeSpace,
    sched: &ControlSchedule,
    comps: &[(usize, usize)],
) -> Result<Array2<C64>> {
    let d = comps.len();
    let mut m = Array2::zeros((d, d));
    let options = EvolveOptions::default();
    for (k, &(p, q)) in comps.iter().enumerate() {
        let psi0 = space.basis_vector(p, q, 0);
        let traj = evolve_vector(&psi0, space, sched, &options)?;
        let fin = traj.final_state();
        for (j, &(r, s)) in comps.iter().enumerate() {
            m[[j, k]] = fin[space.index_of(r, s, 0)];
        }
    }
    Ok(m)
}

/// Embed logical amplitudes into the zero-photon sector of the full space.
fn embed_logical(
    space: &CompositeSpace,
    comps: &[(usize, usize)],
    amps: &Array1<C64>,
) -> Array1<C64> {
    let mut psi = Array1::zeros(space.dim());
    for (j, &(p, q)) in comps.iter().enumerate() {
        psi[space.index_of(p, q, 0)] = amps[j];
    }
    psi
}

/// ⟨ψ|ρ|ψ⟩ for a logical reference state against a logical density block.
fn state_fidelity(rho: &Array2<C64>, psi: &Array1<C64>) -> f64 {
    let mut f = C64::new(0.0, 0.0);
    for j in 0..psi.len() {
        for k in 0..psi.len() {
            f += psi[j].conj() * rho[[j, k]] * psi[k];
        }
    }
    f.re
}

// ---------------------------------------------------------------------------
// Deutsch–Jozsa (§ single-qudit two-qubit encoding)
// ---------------------------------------------------------------------------

/// The four oracles: f₁, f₂ constant; f₃, f₄ balanced.
fn dj_oracle_gates(index: usize) -> Vec<Gate> {
    match index {
        1 => vec![],
        2 => vec![Gate::X(1)],
        3 => vec![Gate::CX(0, 1)],
        4 => vec![Gate::X(0), Gate::CX(0, 1), Gate::X(0)],
        _ => unreachable!(),
    }
}

fn dj_circuit(oracle: usize) -> Circuit {
    let mut gates = vec![Gate::X(1), Gate::H(0), Gate::H(1)];
    gates.extend(dj_oracle_gates(oracle));
    gates.push(Gate::H(0));
    Circuit { n_qubits: 2, gates }
}

/// Deutsch–Jozsa error sweep over (B₁, T₂) for all four oracles.
///
/// The full circuit (state preparation, oracle, final mixing) is compiled by
/// the Givens engine onto the 4-level single-qudit encoding and evolved at
/// pulse level; E = Tr(ρP) with P projecting on the wrong-outcome subspace.
/// Residual diagonal phases of the compiled program are virtual-Z bookkeeping
/// and cannot affect the measured populations.
pub fn run_deutsch_jozsa(config: &ExperimentConfig) -> Result<BenchmarkTable> {
    let hw = &config.hardware;
    if hw.levels2 < 5 {
        return Err(Error::Config("deutsch-jozsa needs 5 retained levels on qudit 2".into()));
    }
    let levels2: Vec<usize> = (0..hw.levels2).collect();
    let space = assemble_space(
        hw.spec1()?,
        hw.spec2()?,
        &[0],
        &levels2,
        hw.n_max.max(1),
        hw.b_mt,
        hw.omega0_ghz,
    )?;
    // Map logical ℓ → qudit slot via the m allocation.
    let slot_of_logical: Vec<usize> = DEFAULT_TWO_QUBIT_M
        .iter()
        .map(|&m| {
            (0..hw.levels2)
                .find(|&s| (space.m_of_slot(2, s) - m).abs() < 1e-9)
                .ok_or_else(|| Error::Config(format!("level m = {m} not retained")))
        })
        .collect::<Result<_>>()?;

    let programs: Vec<GateProgram> = (1..=4)
        .map(|o| compile_circuit(&dj_circuit(o), &DEFAULT_TWO_QUBIT_M))
        .collect::<Result<_>>()?;

    let mut jobs = Vec::new();
    for &b1 in &config.grids.b1_gauss {
        for &t2 in &config.grids.t2_us {
            for oracle in 1..=4usize {
                jobs.push((b1, t2, oracle));
            }
        }
    }
    let rows = par_map(jobs, |(b1, t2, oracle)| {
        let prog = &programs[oracle - 1];
        let opts = PulseOptions { b1_gauss: b1, gap_ns: GAP_NS, t_start_ns: 0.0 };
        let sched = rotations_to_pulses(prog, &space.spec2, &space.order2, &opts)?;
        let noise = NoiseModel::new([t2, t2], QS_Q, space.omega0_ghz)?;
        let rho0 = density_from_vector(&space.basis_vector(0, 0, 0));
        let traj = evolve(&rho0, &space, &sched, &noise, &EvolveOptions::default())?;
        let fin = traj.final_state();
        // Balanced oracles must answer logical {2,3}; constant ones {0,1}.
        let wrong: [usize; 2] = if oracle >= 3 { [0, 1] } else { [2, 3] };
        let error: f64 = wrong
            .iter()
            .map(|&l| {
                let s = slot_of_logical[l];
                fin[[space.index_of(0, s, 0), space.index_of(0, s, 0)]].re
            })
            .sum();
        Ok(vec![b1, t2, oracle as f64, error, sched.span_ns])
    })?;
    let mut table = BenchmarkTable::new(&["b1_gauss", "t2_us", "oracle", "error", "duration_ns"]);
    for r in rows {
        table.push(r);
    }
    Ok(table)
}

// ---------------------------------------------------------------------------
// Resonant controlled-Z error sweep
// ---------------------------------------------------------------------------

/// Fixed benchmark amplitudes: |p⟩|q⟩ rows (p = 0, 1; q = 0..3), renormalized.
pub const CZ_BENCH_AMPS: [f64; 8] = [0.31, 0.46, 0.48, 0.37, 0.37, 0.25, 0.25, 0.24];

fn cz_space_from(hw: &crate::config::HardwareConfig) -> Result<CompositeSpace> {
    assemble_space(hw.spec1()?, hw.spec2()?, &[0, 1, 2], &[0, 1, 2, 3], 2, hw.b_mt, hw.omega0_ghz)
}

/// 1−F of the controlled-Z on the fixed benchmark state over a (Q, T₂) grid.
pub fn sweep_cz_error(config: &ExperimentConfig) -> Result<BenchmarkTable> {
    let space = cz_space_from(&config.hardware)?;
    let entry = cz_cached(&space, (1, 1), PI)?;
    let (plan, sched) = (&entry.0, &entry.1);
    let comps = plan.logical_components(&space);
    let norm: f64 = CZ_BENCH_AMPS.iter().map(|a| a * a).sum::<f64>().sqrt();
    let amps: Array1<C64> =
        CZ_BENCH_AMPS.iter().map(|&a| C64::new(a / norm, 0.0)).collect();
    let ideal = plan.logical_unitary(&space);
    let psi_ref = ideal.dot(&amps);
    let psi0 = embed_logical(&space, &comps, &amps);
    let rho0 = density_from_vector(&psi0);

    let mut jobs = Vec::new();
    for &q in &config.grids.q {
        for &t2 in &config.grids.t2_us {
            jobs.push((q, t2));
        }
    }
    let rows = par_map(jobs, |(q, t2)| {
        let noise = NoiseModel::new([t2, t2], q, space.omega0_ghz)?;
        let traj = evolve(&rho0, &space, sched, &noise, &EvolveOptions::default())?;
        let rho_l = logical_rho(&space, traj.final_state(), &comps);
        let f = state_fidelity(&rho_l, &psi_ref);
        Ok(vec![q, t2, 1.0 - f, f, sched.span_ns])
    })?;
    let mut table = BenchmarkTable::new(&["q", "t2_us", "infidelity", "fidelity", "duration_ns"]);
    for r in rows {
        table.push(r);
    }
    Ok(table)
}

/// Closed-system ceiling of the same benchmark: 1−F with no noise at all.
pub fn cz_error_ceiling(config: &ExperimentConfig) -> Result<f64> {
    let space = cz_space_from(&config.hardware)?;
    let entry = cz_cached(&space, (1, 1), PI)?;
    let (plan, sched) = (&entry.0, &entry.1);
    let comps = plan.logical_components(&space);
    let norm: f64 = CZ_BENCH_AMPS.iter().map(|a| a * a).sum::<f64>().sqrt();
    let amps: Array1<C64> =
        CZ_BENCH_AMPS.iter().map(|&a| C64::new(a / norm, 0.0)).collect();
    let psi0 = embed_logical(&space, &comps, &amps);
    let traj = evolve_vector(&psi0, &space, sched, &EvolveOptions::default())?;
    let fin = traj.final_state();
    let psi_ref = plan.logical_unitary(&space).dot(&amps);
    let mut ov = C64::new(0.0, 0.0);
    for (j, &(p, q)) in comps.iter().enumerate() {
        ov += psi_ref[j].conj() * fin[space.index_of(p, q, 0)];
    }
    Ok(1.0 - ov.norm_sqr())
}

// ---------------------------------------------------------------------------
// Gate comparison: resonant CZ vs dispersive iSWAP
// ---------------------------------------------------------------------------

fn dispersive_space_from(hw: &crate::config::HardwareConfig) -> Result<CompositeSpace> {
    let s1 = hw.spec1()?;
    let e01 = {
        let tmp = assemble_space(s1, hw.spec2()?, &[0, 1], &[0, 1], 1, hw.b_mt, hw.omega0_ghz)?;
        tmp.energy_of_slot(1, 1) - tmp.energy_of_slot(1, 0)
    };
    assemble_space(s1, hw.spec2()?, &[0, 1], &[0, 1], 1, hw.b_mt, e01 - 0.020)
}

/// F(T₂) for both entangling gates at each Q, against the closed-system
/// (decoherence-free) reference state of the identical schedule.
pub fn compare_gate_fidelity(config: &ExperimentConfig) -> Result<BenchmarkTable> {
    // Shared 2×2 benchmark amplitudes (upper-left block of the CZ benchmark).
    let raw = [CZ_BENCH_AMPS[0], CZ_BENCH_AMPS[1], CZ_BENCH_AMPS[4], CZ_BENCH_AMPS[5]];
    let norm: f64 = raw.iter().map(|a| a * a).sum::<f64>().sqrt();
    let amps: Array1<C64> = raw.iter().map(|&a| C64::new(a / norm, 0.0)).collect();
    let comps: Vec<(usize, usize)> = vec![(0, 0), (0, 1), (1, 0), (1, 1)];

    // Gate 0: resonant CZ.
    let cz_space = cz_space_from(&config.hardware)?;
    let cz = cz_cached(&cz_space, (1, 1), PI)?;
    // Gate 1: dispersive iSWAP.
    let disp_space = dispersive_space_from(&config.hardware)?;
    let (_iplan, isched) =
        crate::gates::schedule_iswap_dispersive(&disp_space, crate::gates::IswapKind::Iswap)?;

    let per_gate: Vec<(u8, &CompositeSpace, &ControlSchedule)> =
        vec![(0, &cz_space, &cz.1), (1, &disp_space, &isched)];
    let mut refs = Vec::new();
    for (_, space, sched) in per_gate.iter() {
        // Restrict to the shared 2×2 block (the CZ space retains more levels).
        let psi0 = embed_logical(space, &comps, &amps);
        let traj = evolve_vector(&psi0, space, sched, &EvolveOptions::default())?;
        refs.push(traj.final_state().clone());
    }

    let mut jobs = Vec::new();
    for (gi, _) in per_gate.iter().enumerate() {
        for &q in &config.grids.q {
            for &t2 in &config.grids.t2_us {
                jobs.push((gi, q, t2));
            }
        }
    }
    let rows = par_map(jobs, |(gi, q, t2)| {
        let (gate, space, sched) = (per_gate[gi].0, per_gate[gi].1, per_gate[gi].2);
        let noise = NoiseModel::new([t2, t2], q, space.omega0_ghz)?;
        let psi0 = embed_logical(space, &comps, &amps);
        let rho0 = density_from_vector(&psi0);
        let traj = evolve(&rho0, space, sched, &noise, &EvolveOptions::default())?;
        let fin = traj.final_state();
        let psic = &refs[gi];
        let mut f = C64::new(0.0, 0.0);
        for j in 0..space.dim() {
            for k in 0..space.dim() {
                f += psic[j].conj() * fin[[j, k]] * psic[k];
            }
        }
        Ok(vec![gate as f64, q, t2, f.re, sched.span_ns])
    })?;
    let mut table = BenchmarkTable::new(&["gate", "q", "t2_us", "fidelity", "duration_ns"]);
    for r in rows {
        table.push(r);
    }
    Ok(table)
}

// ---------------------------------------------------------------------------
// Heisenberg quantum simulation
// ---------------------------------------------------------------------------

fn qs_space_from(hw: &crate::config::HardwareConfig) -> Result<CompositeSpace> {
    assemble_space(hw.spec1()?, hw.spec2()?, &[0, 1, 2], &[0, 1], 2, hw.b_mt, hw.omega0_ghz)
}

fn ry_rot(theta: f64) -> GivensRotation {
    GivensRotation::new(0, 1, theta, -PI / 2.0)
}

fn rx_rot(theta: f64) -> GivensRotation {
    GivensRotation::new(0, 1, theta, 0.0)
}

/// U_zz(φ) = e^{iφ/4}·U_{−φ}^{11}·R_z(φ/2)⊗R_z(φ/2): controlled-phase angle
/// (wrapped into (0, 2π)) plus the per-qudit z rotations.
fn zz_angles(phi: f64) -> (f64, f64) {
    ((-phi).rem_euclid(TAU), 0.5 * phi)
}

/// Basis-change pulse conjugating U_zz into U_xx / U_yy (applied on both
/// qudits before the controlled phase; inverted after).
fn axis_conjugation(axis: u8) -> Option<GivensRotation> {
    match axis {
        0 => Some(ry_rot(PI / 2.0)), // z → −x (sign cancels in the square)
        1 => Some(rx_rot(PI / 2.0)), // z → y
        _ => None,                   // z → z
    }
}

/// Append one U_aa(φ) block (axis 0 = xx, 1 = yy, 2 = zz) built from the
/// calibrated controlled-phase gate:
/// U_aa(φ) ∝ W†·U^{11}_{−φ}·R_z(φ/2)⊗R_z(φ/2)·W.
///
/// The z halves are virtual and the controlled-phase frame phases enter the
/// same virtual frames (`block_cp`), so the inverse conjugation pulses are
/// emitted in the updated frame and the block composes exactly, leaving only
/// trailing per-qudit z frames.
fn append_zz_like(
    builder: &mut SeqBuilder,
    axis: u8,
    phi: f64,
    cp: Option<&Arc<(ResonantCzPlan, ControlSchedule)>>,
) -> Result<()> {
    let (_, rz) = zz_angles(phi);
    let w = axis_conjugation(axis);
    if let Some(w) = &w {
        for q in [1u8, 2u8] {
            builder.pulses(q, vec![w.clone()])?;
        }
    }
    for q in [1u8, 2u8] {
        builder.virtual_rz(q, rz);
    }
    if let Some(cp) = cp {
        builder.block_cp(cp)?;
    }
    if let Some(w) = &w {
        for q in [1u8, 2u8] {
            builder.pulses(q, vec![w.inverse()])?;
        }
    }
    Ok(())
}

/// One dispersive exchange window: q₂ shifted into mutual resonance for τ at
/// the operating point; everything outside windows runs with the resonator
/// parked at [`PARK_DELTA_GHZ`].
struct DispersiveXy {
    gamma_ghz: f64,
    f_bright_ghz: f64,
    shift_window_mt: f64,
}

fn dispersive_xy(space: &CompositeSpace) -> Result<DispersiveXy> {
    let g1 = coupling_strength(&space.spec1, space.m_of_slot(1, 0).min(space.m_of_slot(1, 1)))?;
    let g2 = coupling_strength(&space.spec2, space.m_of_slot(2, 0).min(space.m_of_slot(2, 1)))?;
    let e1 = space.energy_of_slot(1, 1) - space.energy_of_slot(1, 0);
    let e2 = space.energy_of_slot(2, 1) - space.energy_of_slot(2, 0);
    let delta1 = e1 - space.omega0_ghz;
    let gamma_ghz = crate::gates::effective_dispersive_coupling(g1, g2, delta1 * 1e3)? * 1e-3;
    let f_bright_ghz = (delta1 * delta1 + 4.0 * (g1 * g1 + g2 * g2) * 1e-6).sqrt();
    // Bias moving E01(q₂) onto E01(q₁): mutual resonance with both qudits at
    // the common detuning Δ₁ from the resonator.
    let dm = space.m_of_slot(2, 1) - space.m_of_slot(2, 0);
    let shift_window_mt = (e1 - e2) / (zeeman_ghz(space.spec2.g, 1.0) * dm);
    Ok(DispersiveXy { gamma_ghz, f_bright_ghz, shift_window_mt })
}

impl DispersiveXy {
    /// Window duration for pair angle x, snapped to the bright-mode beat so
    /// the one-photon intermediate returns to zero at the edges.
    fn tau_ns(&self, x: f64) -> f64 {
        let tau0 = x / (TAU * self.gamma_ghz);
        let beats = (tau0 * self.f_bright_ghz).round();
        if beats >= 1.0 {
            beats / self.f_bright_ghz
        } else {
            tau0
        }
    }
}

/// Append pulses with the resonator parked (ramped detuning covering them).
fn parked_pulses(
    builder: &mut SeqBuilder,
    rotations: &[(u8, Vec<GivensRotation>)],
) -> Result<()> {
    if rotations.iter().all(|(_, r)| r.is_empty()) {
        return Ok(());
    }
    let t0 = builder.t;
    builder.t += crate::gates::DETUNING_RAMP_NS;
    for (q, rots) in rotations {
        builder.pulses(*q, rots.clone())?;
    }
    let t1 = builder.t;
    add_ramped_detuning(&mut builder.sched, t0, t1 - t0, PARK_DELTA_GHZ)?;
    builder.t = t1 + crate::gates::DETUNING_RAMP_NS + GAP_NS;
    Ok(())
}

/// Ideal two-qubit pair factor exp(−i·x·(σ_x⊗σ_x + σ_y⊗σ_y)/2) realized by
/// one exchange window (basis |00⟩,|01⟩,|10⟩,|11⟩).
fn pair_window_ideal(x: f64) -> Array2<C64> {
    let (c, s) = (x.cos(), x.sin());
    let mut u = crate::linalg::eye(4);
    u[[1, 1]] = C64::new(c, 0.0);
    u[[2, 2]] = C64::new(c, 0.0);
    u[[1, 2]] = C64::new(0.0, -s);
    u[[2, 1]] = C64::new(0.0, -s);
    u
}

/// Boundary z-frames of one standalone exchange window, fitted once per pair
/// angle against the ideal XY factor at the snapped effective angle. The
/// window is drive-free, so its lab propagator is start-time invariant and
/// the fit is reusable for every embedding.
struct WindowFrames {
    x: f64,
    /// Per-qudit input/output frame-phase differences (level 1 − level 0).
    in_theta: [f64; 2],
    out_theta: [f64; 2],
}

fn measure_window_frames(
    space: &CompositeSpace,
    xy: &DispersiveXy,
    x: f64,
    comps: &[(usize, usize)],
) -> Result<WindowFrames> {
    let tau = xy.tau_ns(x);
    let mut wsched = ControlSchedule::new(tau);
    wsched.add_local_shift(LocalShiftSegment {
        qudit: 2,
        t0_ns: 0.0,
        dur_ns: tau,
        db_mt: xy.shift_window_mt,
    })?;
    let m_lab = closed_logical_matrix(space, &wsched, comps)?;
    let x_eff = TAU * xy.gamma_ghz * tau;
    let fit = fit_frames(&m_lab, &pair_window_ideal(x_eff), comps, 2, 2);
    Ok(WindowFrames {
        x,
        in_theta: [fit.in1[1] - fit.in1[0], fit.in2[1] - fit.in2[0]],
        out_theta: [fit.out1[1] - fit.out1[0], fit.out2[1] - fit.out2[0]],
    })
}

/// One exchange window embedded so it composes as the bare XY pair factor up
/// to per-qudit trailing z frames (absorbed into the builder's virtual
/// frames).
///
/// In the diagonal interaction picture an embedding at t₀ conjugates the
/// standalone window by the diagonal precession factor R(t₀) on both sides,
/// adding ∓2π·E₀₁·t₀ to its fitted boundary frames. The XY factor commutes
/// with the *common* part of any per-qudit z pair, so only the differential
/// input angle matters — and it winds with t₀ at the rate 2π(E₀₁₁ − E₀₁₂), a
/// full turn every 1/|ΔE| ≈ 1.7 ns. The window start is therefore tuned
/// within one such period so the differential input angle (fitted frames,
/// precession, and the pending virtual frames combined) vanishes; the slack
/// before the window is spent with the resonator parked. The remaining
/// common input angle and the output frames are pushed into the virtual
/// frames.
fn append_tuned_window(b: &mut SeqBuilder, xy: &DispersiveXy, wf: &WindowFrames) -> Result<()> {
    let ramp = crate::gates::DETUNING_RAMP_NS;
    let e01 = [
        b.space.energy_of_slot(1, 1) - b.space.energy_of_slot(1, 0),
        b.space.energy_of_slot(2, 1) - b.space.energy_of_slot(2, 0),
    ];
    let de = e01[0] - e01[1];
    let period = 1.0 / de.abs();
    // Differential input angle at start time t: (θin₁ − θin₂) + (p₁ − p₂)
    // − 2π·ΔE·t ≡ 0 (mod 2π).
    let target = (wf.in_theta[0] - wf.in_theta[1] + b.pending[0] - b.pending[1]) / (TAU * de);
    let t_min = b.t + 2.0 * ramp;
    let t0 = t_min + (target - t_min).rem_euclid(period);
    // Park the slack; the down-ramp ends exactly at the window start.
    add_ramped_detuning(&mut b.sched, b.t, (t0 - ramp) - b.t, PARK_DELTA_GHZ)?;
    b.t = t0;
    append_xy_window(b, xy, wf.x)?;
    // Common input angle (equal on both qudits modulo 2π by the t₀ choice)
    // commutes through the XY factor and joins the output frames.
    let alpha = wf.in_theta[0] - TAU * e01[0] * t0 + b.pending[0];
    for j in 0..2 {
        b.pending[j] = (alpha + wf.out_theta[j] + TAU * e01[j] * t0).rem_euclid(TAU);
    }
    Ok(())
}

fn append_xy_window(builder: &mut SeqBuilder, xy: &DispersiveXy, x: f64) -> Result<()> {
    if x <= 1e-12 {
        return Ok(());
    }
    let tau = xy.tau_ns(x);
    builder.sched.add_local_shift(LocalShiftSegment {
        qudit: 2,
        t0_ns: builder.t,
        dur_ns: tau,
        db_mt: xy.shift_window_mt,
    })?;
    builder.t += tau + GAP_NS;
    Ok(())
}

/// Pair conjugations for the dispersive factors: the native window realizes
/// e^{−iθ(s_x s_x + s_y s_y)}; W maps it onto the xz / yz pairs.
fn pair_conjugation(pair: u8) -> Option<GivensRotation> {
    match pair {
        0 => None,                   // xy: native
        1 => Some(rx_rot(PI / 2.0)), // y → −z: realizes xx + zz
        _ => Some(ry_rot(PI / 2.0)), // x → +z: realizes zz + yy
    }
}

struct QsPoint {
    jt: f64,
    method: u8,
    duration_ns: f64,
    f_process: f64,
    f_state_closed: f64,
    f_noisy: f64,
    sz1: f64,
    sz2: f64,
    sz1_ref: f64,
    sz2_ref: f64,
}

fn single_sz(psi_or_rho_diag: &[f64], which: u8) -> f64 {
    // comps ordered (p,q) = p·2+q; logical |0⟩ carries s_z = +½.
    let mut e = 0.0;
    for (j, w) in psi_or_rho_diag.iter().enumerate() {
        let (p, q) = (j / 2, j % 2);
        let b = if which == 1 { p } else { q };
        e += w * (0.5 - b as f64);
    }
    e
}

fn evaluate_qs_point(
    space: &CompositeSpace,
    sched: &ControlSchedule,
    comps: &[(usize, usize)],
    u_exact: &Array2<C64>,
    psi0: &Array1<C64>,
    jt: f64,
    method: u8,
) -> Result<QsPoint> {
    let m = closed_logical_matrix(space, sched, comps)?;
    let fit = fit_frames(&m, u_exact, comps, 2, 2);
    let corrected = fit.corrected(&m, comps);
    let psi_exact = u_exact.dot(psi0);
    let psi_meas = corrected.dot(psi0);
    let mut ov = C64::new(0.0, 0.0);
    for j in 0..4 {
        ov += psi_exact[j].conj() * psi_meas[j];
    }
    let f_state_closed = ov.norm_sqr();

    // Noisy run against the frame-dressed exact target state.
    let mut psi_ref: Array1<C64> = Array1::zeros(4);
    let ideal_in: Array1<C64> = (0..4)
        .map(|k| {
            let (p, q) = comps[k];
            psi0[k] * C64::from_polar(1.0, fit.in1[p] + fit.in2[q])
        })
        .collect();
    let tmp = u_exact.dot(&ideal_in);
    for (j, &(p, q)) in comps.iter().enumerate() {
        psi_ref[j] = tmp[j] * C64::from_polar(1.0, fit.gamma + fit.out1[p] + fit.out2[q]);
    }
    let noise = NoiseModel::new([QS_T2_US, QS_T2_US], QS_Q, space.omega0_ghz)?;
    let rho0 = density_from_vector(&embed_logical(space, comps, psi0));
    let traj = evolve(&rho0, space, sched, &noise, &EvolveOptions::default())?;
    let rho_l = logical_rho(space, traj.final_state(), comps);
    let f_noisy = state_fidelity(&rho_l, &psi_ref);
    let diag: Vec<f64> = (0..4).map(|j| rho_l[[j, j]].re).collect();
    let exact_diag: Vec<f64> = (0..4).map(|j| psi_exact[j].norm_sqr()).collect();
    Ok(QsPoint {
        jt,
        method,
        duration_ns: sched.span_ns,
        f_process: fit.fidelity,
        f_state_closed,
        f_noisy,
        sz1: single_sz(&diag, 1),
        sz2: single_sz(&diag, 2),
        sz1_ref: single_sz(&exact_diag, 1),
        sz2_ref: single_sz(&exact_diag, 2),
    })
}

/// Digital Heisenberg evolution by both methods over the Jt grid.
pub fn simulate_heisenberg(config: &ExperimentConfig) -> Result<BenchmarkTable> {
    let res_space = qs_space_from(&config.hardware)?;
    let disp_space = dispersive_space_from(&config.hardware)?;
    let xy = dispersive_xy(&disp_space)?;
    let comps: Vec<(usize, usize)> = vec![(0, 0), (0, 1), (1, 0), (1, 1)];
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let psi0: Array1<C64> =
        ndarray::arr1(&[C64::new(h, 0.0), C64::new(h, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)]);

    let mut jobs = Vec::new();
    for &jt in &config.grids.jt {
        for method in [0u8, 1u8] {
            jobs.push((jt, method));
        }
    }
    let rows = par_map(jobs, |(jt, method)| {
        let u_exact = heisenberg_exact(jt)?;
        let point = if method == 0 {
            // Resonant: U_H = U_zz(Jt)·U_xx(Jt)·U_yy(Jt) (commuting factors),
            // each built from the calibrated controlled-phase gate.
            let mut b = SeqBuilder::with_stark(&res_space, SCENARIO_B1_GAUSS, false)?;
            let (cp_phi, _) = zz_angles(jt);
            let cp = if cp_phi > 1e-9 && cp_phi < TAU - 1e-9 {
                Some(cz_cached(&res_space, (1, 1), cp_phi)?)
            } else {
                None
            };
            if jt.rem_euclid(TAU) > 1e-9 || cp.is_some() {
                for axis in [1u8, 0u8, 2u8] {
                    append_zz_like(&mut b, axis, jt, cp.as_ref())?;
                }
            }
            let mut sched = b.finish();
            if sched.span_ns <= 0.0 {
                sched.span_ns = 1.0;
            }
            evaluate_qs_point(&res_space, &sched, &comps, &u_exact, &psi0, jt, 0)?
        } else {
            // Dispersive: three pair-exchange windows, each realizing the
            // commuting product of two half-angle single-axis factors
            // (xy native, then xz and yz by R_x/R_y(π/2) conjugation), which
            // composes to the full U_H.
            let mut b = SeqBuilder::with_stark(&disp_space, SCENARIO_B1_GAUSS, true)?;
            let x = jt / 4.0;
            if x > 1e-12 {
                let wf = measure_window_frames(&disp_space, &xy, x, &comps)?;
                for pair in [0u8, 1, 2] {
                    match pair_conjugation(pair) {
                        Some(w) => {
                            parked_pulses(&mut b, &[(1, vec![w.clone()]), (2, vec![w.clone()])])?;
                            append_tuned_window(&mut b, &xy, &wf)?;
                            let wi = w.inverse();
                            parked_pulses(&mut b, &[(1, vec![wi.clone()]), (2, vec![wi])])?;
                        }
                        None => append_tuned_window(&mut b, &xy, &wf)?,
                    }
                }
            }
            let mut sched = b.finish();
            if sched.span_ns <= 0.0 {
                sched.span_ns = 1.0;
            }
            evaluate_qs_point(&disp_space, &sched, &comps, &u_exact, &psi0, jt, 1)?
        };
        Ok(vec![
            point.jt,
            point.method as f64,
            point.duration_ns,
            point.f_process,
            point.f_state_closed,
            point.f_noisy,
            point.sz1,
            point.sz2,
            point.sz1_ref,
            point.sz2_ref,
        ])
    })?;
    let mut table = BenchmarkTable::new(&[
        "jt",
        "method",
        "duration_ns",
        "f_process",
        "f_state_closed",
        "f_noisy",
        "sz1",
        "sz2",
        "sz1_exact",
        "sz2_exact",
    ]);
    for r in rows {
        table.push(r);
    }
    Ok(table)
}

// ---------------------------------------------------------------------------
// Transverse-field Ising model
// ---------------------------------------------------------------------------

/// n-step Trotterized TIM (J = 2b, N = 2): exact, ideal-Trotter, and (when
/// enabled) full pulse-level hardware curves of ⟨S_z(t)⟩.
pub fn simulate_tim(config: &ExperimentConfig) -> Result<BenchmarkTable> {
    let n = config.trotter_steps;
    let refs = tim_reference_curves(&config.grids.tb, n)?;
    if !config.tim_hardware {
        let mut table = BenchmarkTable::new(&["tb", "sz_exact", "sz_trotter"]);
        for (tb, e, t) in refs {
            table.push(vec![tb, e, t]);
        }
        return Ok(table);
    }

    let space = qs_space_from(&config.hardware)?;
    let comps: Vec<(usize, usize)> = vec![(0, 0), (0, 1), (1, 0), (1, 1)];
    let jobs: Vec<(f64, f64, f64)> = refs.clone();
    let rows = par_map(jobs, |(tb, sz_exact, sz_trotter)| {
        let theta_x = tb / n as f64;
        let phi_zz = 2.0 * tb / n as f64;
        let (cp_phi, rz) = zz_angles(phi_zz);
        let mut b = SeqBuilder::with_stark(&space, SCENARIO_B1_GAUSS, false)?;
        if tb > 1e-12 {
            let cp = if cp_phi > 1e-9 && cp_phi < TAU - 1e-9 {
                Some(cz_cached(&space, (1, 1), cp_phi)?)
            } else {
                None
            };
            // z rotations are virtual and the controlled-phase frame phases
            // fold into the same running frames; a trailing z frame is
            // invisible to the diagonal S_z observable.
            for _ in 0..n {
                for q in [1u8, 2u8] {
                    b.pulses(q, vec![rx_rot(theta_x)])?;
                }
                for q in [1u8, 2u8] {
                    b.virtual_rz(q, rz);
                }
                if let Some(cp) = &cp {
                    b.block_cp(cp)?;
                }
            }
        }
        let mut sched = b.finish();
        if sched.span_ns <= 0.0 {
            sched.span_ns = 1.0;
        }
        let noise = NoiseModel::new([QS_T2_US, QS_T2_US], QS_Q, space.omega0_ghz)?;
        let rho0 = density_from_vector(&space.basis_vector(0, 0, 0));
        let traj = evolve(&rho0, &space, &sched, &noise, &EvolveOptions::default())?;
        let rho_l = logical_rho(&space, traj.final_state(), &comps);
        let diag: Vec<f64> = (0..4).map(|j| rho_l[[j, j]].re).collect();
        let sz_hw = single_sz(&diag, 1) + single_sz(&diag, 2);
        Ok(vec![tb, sz_exact, sz_trotter, sz_hw, sched.span_ns])
    })?;
    let mut table =
        BenchmarkTable::new(&["tb", "sz_exact", "sz_trotter", "sz_hardware", "duration_ns"]);
    for r in rows {
        table.push(r);
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{eye, max_abs_diff, max_abs_diff_up_to_phase};

    /// Logical rotations realizing R_z(α) = diag(e^{−iα/2}, e^{iα/2}) on
    /// the 0↔1 pair.
    fn rz_chain(alpha: f64) -> Vec<GivensRotation> {
        synthesize_z_rotation(alpha, 0, 1)
    }

    #[test]
    fn csv_is_deterministic_and_terminated() {
        let mut t = BenchmarkTable::new(&["a", "b"]);
        t.push(vec![1.0, 0.5]);
        let csv = t.to_csv();
        assert!(csv.ends_with('\n'));
        assert_eq!(csv, t.to_csv());
        assert_eq!(t.column("b").unwrap(), vec![0.5]);
    }

    #[test]
    fn heisenberg_oracle_basics() {
        assert!(max_abs_diff(&heisenberg_exact(0.0).unwrap(), &eye(4)) < 1e-12);
        // Total S_z is conserved.
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let psi0 = ndarray::arr1(&[
            C64::new(h, 0.0),
            C64::new(h, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
        ]);
        for jt in [0.7, 2.1, 5.0] {
            let psi = heisenberg_exact(jt).unwrap().dot(&psi0);
            assert!((total_sz(&psi) - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn tim_initial_sz_is_one() {
        let refs = tim_reference_curves(&[0.0], 6).unwrap();
        assert!((refs[0].1 - 1.0).abs() < 1e-12);
        assert!((refs[0].2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tim_trotter_converges_to_exact() {
        let grid: Vec<f64> = (0..13).map(|i| TAU * i as f64 / 12.0).collect();
        let refs = tim_reference_curves(&grid, 100).unwrap();
        let max_dev = refs.iter().map(|r| (r.1 - r.2).abs()).fold(0.0, f64::max);
        assert!(max_dev <= 1e-3, "n=100 Trotter deviation {max_dev}");
        // Low n is visibly worse in the demanding J=2b regime.
        let coarse = tim_reference_curves(&grid, 2).unwrap();
        let coarse_dev = coarse.iter().map(|r| (r.1 - r.2).abs()).fold(0.0, f64::max);
        assert!(coarse_dev > max_dev * 10.0);
    }

    /// Matrix-level check of the U_zz decomposition used by both QS methods:
    /// the physical chain (z rotations + controlled phase) equals
    /// e^{−iφ s_z s_z} up to global phase.
    #[test]
    fn zz_decomposition_identity() {
        let [_, _, zz, _, _] = spin_ops();
        for phi in [0.4, 1.3, PI, 5.0] {
            let target = crate::linalg::exp_i_herm(&zz, phi).unwrap();
            let (cp_phi, rz) = zz_angles(phi);
            let mut u = eye(4);
            // R_z(rz) on both logical qubits via the physical chain product.
            let chain = rz_chain(rz);
            let mut single = eye(2);
            for g in &chain {
                single = g.matrix(2).dot(&single);
            }
            u = kron(&single, &single).dot(&u);
            let mut cp = eye(4);
            cp[[3, 3]] = C64::from_polar(1.0, cp_phi);
            u = cp.dot(&u);
            assert!(
                max_abs_diff_up_to_phase(&u, &target) < 1e-12,
                "φ = {phi}: defect {}",
                max_abs_diff_up_to_phase(&u, &target)
            );
        }
    }

    /// Each scheduled resonant block (W, controlled phase, W†, with the
    /// half z rotations carried virtually) equals e^{−iφ s_a s_a} up to
    /// global phase.
    #[test]
    fn resonant_block_identity() {
        let [xx, yy, zz, _, _] = spin_ops();
        let phi = 1.7;
        let (cp_phi, rz) = zz_angles(phi);
        let mut cp = eye(4);
        cp[[3, 3]] = C64::from_polar(1.0, cp_phi);
        let vz = ndarray::arr2(&[
            [C64::from_polar(1.0, -0.5 * rz), C64::new(0.0, 0.0)],
            [C64::new(0.0, 0.0), C64::from_polar(1.0, 0.5 * rz)],
        ]);
        let vz4 = kron(&vz, &vz);
        for (axis, op) in [(0u8, &xx), (1u8, &yy)] {
            let target = crate::linalg::exp_i_herm(op, phi).unwrap();
            let w = axis_conjugation(axis).unwrap().matrix(2);
            let w4 = kron(&w, &w);
            let got = crate::linalg::dagger(&w4).dot(&cp).dot(&vz4).dot(&w4);
            assert!(
                max_abs_diff_up_to_phase(&got, &target) < 1e-12,
                "axis {axis}: defect {}",
                max_abs_diff_up_to_phase(&got, &target)
            );
        }
        // zz: controlled phase alone, times the virtual R_z(φ/2)⊗R_z(φ/2).
        let got = cp.dot(&vz4);
        let target = crate::linalg::exp_i_herm(&zz, phi).unwrap();
        assert!(max_abs_diff_up_to_phase(&got, &target) < 1e-12);
    }

    /// The pair conjugations map the native xy exchange onto xz / yz, and
    /// three windows at pair half-angle compose to the exact propagator.
    #[test]
    fn pair_conjugation_identity() {
        let [xx, yy, zz, _, _] = spin_ops();
        let theta = 1.1;
        let uxy = crate::linalg::exp_i_herm(&(&xx + &yy), theta).unwrap();
        for (pair, op) in [(1u8, &xx + &zz), (2u8, &yy + &zz)] {
            let target = crate::linalg::exp_i_herm(&op, theta).unwrap();
            let single = pair_conjugation(pair).unwrap().matrix(2);
            let wfull = kron(&single, &single);
            let got = crate::linalg::dagger(&wfull).dot(&uxy).dot(&wfull);
            assert!(
                max_abs_diff_up_to_phase(&got, &target) < 1e-12,
                "pair {pair}: defect {}",
                max_abs_diff_up_to_phase(&got, &target)
            );
        }
        // Full factorization: (xy)(xz)(yz), each at θ = Jt/2.
        let jt = 2.3;
        let pairs = [&xx + &yy, &xx + &zz, &yy + &zz];
        let mut u = eye(4);
        for p in pairs {
            u = crate::linalg::exp_i_herm(&p, 0.5 * jt).unwrap().dot(&u);
        }
        let target = heisenberg_exact(jt).unwrap();
        assert!(max_abs_diff_up_to_phase(&u, &target) < 1e-12);
    }

    #[test]
    fn dj_circuits_answer_correctly() {
        for oracle in 1..=4usize {
            let u = dj_circuit(oracle).unitary().unwrap();
            // Ideal circuit on |00⟩: wrong subspace exactly empty.
            let wrong: [usize; 2] = if oracle >= 3 { [0, 1] } else { [2, 3] };
            let p_wrong: f64 = wrong.iter().map(|&l| u[[l, 0]].norm_sqr()).sum();
            assert!(p_wrong < 1e-12, "oracle {oracle}: wrong population {p_wrong}");
        }
    }

    /// A tuned exchange window embedded away from t = 0 acts as the bare
    /// XY pair factor once the predicted trailing z frames are removed: the
    /// embedding time is chosen so the differential boundary frame vanishes,
    /// and the common part plus output frames land in the running frames.
    #[test]
    fn tuned_window_embeds_cleanly() {
        let cfg = ExperimentConfig::for_scenario("heisenberg").unwrap();
        let space = dispersive_space_from(&cfg.hardware).unwrap();
        let xy = dispersive_xy(&space).unwrap();
        let comps: Vec<(usize, usize)> = vec![(0, 0), (0, 1), (1, 0), (1, 1)];
        let x = 0.3;
        let wf = measure_window_frames(&space, &xy, x, &comps).unwrap();
        for start in [0.0, 137.0] {
            let mut b = SeqBuilder::with_stark(&space, SCENARIO_B1_GAUSS, true).unwrap();
            // Deliberately non-trivial embedding time, parked like any real
            // lead-in (unparked idle would accrue the ambient dispersive
            // shift, which the scenario never leaves running).
            if start > 0.0 {
                let ramp = crate::gates::DETUNING_RAMP_NS;
                add_ramped_detuning(&mut b.sched, 0.0, start - ramp, PARK_DELTA_GHZ).unwrap();
                b.t = start;
            }
            append_tuned_window(&mut b, &xy, &wf).unwrap();
            let pend = b.pending;
            let sched = b.finish();
            let mut m = closed_logical_matrix(&space, &sched, &comps).unwrap();
            // Remove the predicted trailing frames (relative convention; the
            // common piece joins the global phase).
            for (r, &(p, q)) in comps.iter().enumerate() {
                let corr = C64::from_polar(1.0, -(pend[0] * p as f64 + pend[1] * q as f64));
                for c in 0..comps.len() {
                    m[[r, c]] *= corr;
                }
            }
            let x_eff = TAU * xy.gamma_ghz * xy.tau_ns(wf.x);
            let defect = max_abs_diff_up_to_phase(&m, &pair_window_ideal(x_eff));
            assert!(defect < 2e-2, "start {start}: embedded window defect {defect}");
        }
    }

    #[test]
    fn dispersive_xy_parameters() {
        let cfg = ExperimentConfig::for_scenario("heisenberg").unwrap();
        let space = dispersive_space_from(&cfg.hardware).unwrap();
        let xy = dispersive_xy(&space).unwrap();
        assert!((xy.gamma_ghz * 1e3 - 0.04455).abs() < 2e-3, "Γ = {} MHz", xy.gamma_ghz * 1e3);
        // Full iSWAP pair angle π/2 ≈ 5.6 µs.
        let tau = xy.tau_ns(PI / 2.0);
        assert!((tau - 5612.0).abs() / 5612.0 < 0.05, "τ = {tau} ns");
        // Snapping lands on integer bright-mode beats.
        let beats = tau * xy.f_bright_ghz;
        assert!((beats - beats.round()).abs() < 1e-9);
    }
}
