//! Acceptance gate: every stated criterion asserted at its stated tolerance.
//!
//! Each criterion prints exactly one `criterion N (name): PASS/FAIL — detail`
//! line. The heavy benchmark tables (criteria 6–10) run on the default grids
//! and are shared between tests through lazy statics, so the whole gate costs
//! one full sweep per scenario. Run with `--nocapture` to see the lines as
//! they complete.

use std::f64::consts::{PI, TAU};
use std::sync::OnceLock;

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use msqp_core::compiler::{
    build_connectivity, givens_decompose, reconstruct_unitary, synthesize_diagonal,
};
use msqp_core::composite::{assemble_space, density_from_vector, CompositeSpace};
use msqp_core::config::{ExperimentConfig, HardwareConfig};
use msqp_core::experiments::{
    cz_error_ceiling, run_scenario, tim_reference_curves, BenchmarkTable,
};
use msqp_core::linalg::{hermiticity_defect, max_abs_diff_up_to_phase, min_eigenvalue};
use msqp_core::lindblad::{evolve, evolve_vector, EvolveOptions, NoiseModel};
use msqp_core::schedule::{ControlSchedule, DrivePulse};
use msqp_core::spins::{coupling_strength, level_order};

const G0_MHZ: f64 = 0.9439; // √110 · 0.090 MHz

fn report(n: usize, name: &str, pass: bool, detail: &str) {
    println!("criterion {n} ({name}): {} — {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {n} ({name}) failed: {detail}");
}

fn specs() -> (msqp_core::spins::QuditSpec, msqp_core::spins::QuditSpec) {
    let hw = HardwareConfig::default();
    (hw.spec1().unwrap(), hw.spec2().unwrap())
}

fn space(levels1: &[usize], levels2: &[usize], n_max: usize) -> CompositeSpace {
    let (q1, q2) = specs();
    assemble_space(q1, q2, levels1, levels2, n_max, 50.0, 7.5).unwrap()
}

/// Shared scenario tables on the default grids.
fn table(scenario: &str) -> &'static BenchmarkTable {
    static TABLES: OnceLock<std::sync::Mutex<std::collections::HashMap<String, &'static BenchmarkTable>>> =
        OnceLock::new();
    let map = TABLES.get_or_init(Default::default);
    if let Some(t) = map.lock().unwrap().get(scenario) {
        return t;
    }
    let config = ExperimentConfig::for_scenario(scenario).unwrap();
    let t: &'static BenchmarkTable = Box::leak(Box::new(run_scenario(&config).unwrap()));
    map.lock().unwrap().insert(scenario.to_string(), t);
    t
}

fn non_increasing(vals: &[f64], tol: f64) -> bool {
    vals.windows(2).all(|w| w[1] <= w[0] + tol)
}

/// Rows as (selector column values → metric) lookups.
fn select(t: &BenchmarkTable, filters: &[(&str, f64)], col: &str) -> Vec<f64> {
    let idx: Vec<(usize, f64)> = filters
        .iter()
        .map(|&(c, v)| (t.columns.iter().position(|x| x == c).unwrap(), v))
        .collect();
    let want = t.columns.iter().position(|x| x == col).unwrap();
    t.rows
        .iter()
        .filter(|r| idx.iter().all(|&(c, v)| (r[c] - v).abs() < 1e-9))
        .map(|r| r[want])
        .collect()
}

#[test]
fn criterion_01_coupling_enhancement() {
    let (q1, q2) = specs();
    let g1 = coupling_strength(&q1, 0.0).unwrap();
    let g2 = coupling_strength(&q2, 0.0).unwrap();
    let pass = (g1 - G0_MHZ).abs() < 5e-5
        && (g2 - G0_MHZ).abs() < 5e-5
        && (g1 - 1.0).abs() / 1.0 < 0.06;
    report(
        1,
        "coupling enhancement",
        pass,
        &format!("G⁰ = {g1:.4} MHz = √110·0.090 MHz, within 6% of 1 MHz"),
    );
}

#[test]
fn criterion_02_level_ordering() {
    let (q1, q2) = specs();
    let mut pass = true;
    for spec in [&q1, &q2] {
        let order = level_order(spec, 50.0).unwrap();
        let mut expect = vec![0.0f64];
        for k in 1..=10 {
            expect.push(-(k as f64));
            expect.push(k as f64);
        }
        pass &= order.m_of_p == expect;
    }
    report(2, "level ordering", pass, "energy-ordered m labels are 0, −1, +1, −2, +2, … for both qudits");
}

#[test]
fn criterion_03_analytic_lindblad_laws() {
    // Photon lifetime: ⟨n⟩ decays as e^{−2κt}; propagate one lifetime.
    let sp = space(&[0], &[0], 1);
    let noise = NoiseModel::new([f64::INFINITY, f64::INFINITY], 1e5, sp.omega0_ghz).unwrap();
    let kappa = sp.omega0_ghz / 1e5;
    let t_run = 1.0 / (2.0 * kappa);
    let rho0 = density_from_vector(&sp.basis_vector(0, 0, 1));
    let sched = ControlSchedule::new(t_run);
    let traj = evolve(&rho0, &sp, &sched, &noise, &EvolveOptions::default()).unwrap();
    let n_idx = sp.index_of(0, 0, 1);
    let p_photon = traj.final_state()[[n_idx, n_idx]].re;
    let rel_photon = (p_photon - (-1.0f64).exp()).abs() / (-1.0f64).exp();

    // 0↔−1 coherence on qudit 2 decays as e^{−t/T₂}; propagate one lifetime.
    let sp2 = space(&[0], &[0, 1], 1);
    let t2_us = 1.0;
    let noise2 = NoiseModel::new([f64::INFINITY, t2_us], f64::INFINITY, sp2.omega0_ghz).unwrap();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut psi: Array1<C64> = Array1::zeros(sp2.dim());
    psi[sp2.index_of(0, 0, 0)] = C64::new(h, 0.0);
    psi[sp2.index_of(0, 1, 0)] = C64::new(h, 0.0);
    let rho0 = density_from_vector(&psi);
    let sched = ControlSchedule::new(t2_us * 1e3);
    let traj = evolve(&rho0, &sp2, &sched, &noise2, &EvolveOptions::default()).unwrap();
    let coh = traj.final_state()[[sp2.index_of(0, 0, 0), sp2.index_of(0, 1, 0)]].norm();
    let rel_coh = (coh - 0.5 * (-1.0f64).exp()).abs() / (0.5 * (-1.0f64).exp());

    let pass = rel_photon < 1e-4 && rel_coh < 1e-4;
    report(
        3,
        "analytic Lindblad laws",
        pass,
        &format!("photon e^{{−2κt}} rel. error {rel_photon:.1e}, coherence e^{{−t/T₂}} rel. error {rel_coh:.1e} at one lifetime"),
    );
}

#[test]
fn criterion_04_vacuum_rabi_time() {
    let sp = space(&[0, 1], &[0], 1);
    let tau = msqp_core::gates::calibrate_emission(&sp, 1, (0, 1)).unwrap();
    let rel = (tau - 265.0).abs() / 265.0;
    report(
        4,
        "vacuum-Rabi emission time",
        rel < 0.10,
        &format!("calibrated swap {tau:.1} ns, within {:.1}% of 265 ns", rel * 100.0),
    );
}

#[test]
fn criterion_05_compiler_round_trip() {
    let m_full = [0.0, -1.0, 1.0, -2.0, 2.0];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    let mut max_count = [0usize; 6];
    for trial in 0..100 {
        let d = 2 + trial % 4;
        let raw = Array2::from_shape_fn((d, d), |_| {
            C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        });
        let u = msqp_core::linalg::orthonormalize_columns(&raw).unwrap();
        let graph = build_connectivity(&m_full[..d]).unwrap();
        let prog = givens_decompose(&u, &graph).unwrap();
        let recon = reconstruct_unitary(&prog);
        worst = worst.max(max_abs_diff_up_to_phase(&recon, &u));
        let flat = synthesize_diagonal(&prog);
        max_count[d] = max_count[d].max(flat.rotations.len());
    }
    let count_ok = (2..=5).all(|d| max_count[d] <= 4 * d * d);
    let pass = worst <= 1e-8 && count_ok;
    report(
        5,
        "compiler round trip",
        pass,
        &format!(
            "100 random unitaries d∈2..5: max reconstruction error {worst:.1e} (≤1e-8), rotation counts {:?} ≤ 4·d²",
            &max_count[2..=5]
        ),
    );
}

#[test]
fn criterion_06_deutsch_jozsa() {
    let t = table("deutsch-jozsa");
    let cfg = ExperimentConfig::for_scenario("deutsch-jozsa").unwrap();
    let mut best_worst = 0.0f64; // worst over oracles of the best grid corner
    let mut monotone = true;
    for oracle in 1..=4 {
        let of = oracle as f64;
        let best = t
            .rows
            .iter()
            .filter(|r| (r[2] - of).abs() < 1e-9)
            .map(|r| r[3])
            .fold(f64::INFINITY, f64::min);
        best_worst = best_worst.max(best);
        // Error monotone decreasing in T₂ at B₁ = 2 G.
        let errs: Vec<f64> = cfg
            .grids
            .t2_us
            .iter()
            .map(|&t2| select(t, &[("b1_gauss", 2.0), ("t2_us", t2), ("oracle", of)], "error")[0])
            .collect();
        monotone &= non_increasing(&errs, 1e-9);
    }
    let pass = best_worst <= 3e-2 && monotone;
    report(
        6,
        "Deutsch–Jozsa",
        pass,
        &format!("best-corner error ≤ {best_worst:.2e} for every oracle (order 1e-2), error monotone in T₂ at B₁ = 2 G: {monotone}"),
    );
}

#[test]
fn criterion_07_resonant_cz() {
    let t = table("cz-error");
    let cfg = ExperimentConfig::for_scenario("cz-error").unwrap();
    let f_point = select(t, &[("q", 1e6), ("t2_us", 400.0)], "fidelity")[0];
    let mut monotone = true;
    for &q in &cfg.grids.q {
        let errs: Vec<f64> = cfg
            .grids
            .t2_us
            .iter()
            .map(|&t2| select(t, &[("q", q), ("t2_us", t2)], "infidelity")[0])
            .collect();
        monotone &= non_increasing(&errs, 1e-9);
    }
    for &t2 in &cfg.grids.t2_us {
        let errs: Vec<f64> = cfg
            .grids
            .q
            .iter()
            .map(|&q| select(t, &[("q", q), ("t2_us", t2)], "infidelity")[0])
            .collect();
        monotone &= non_increasing(&errs, 1e-9);
    }
    let ceiling = cz_error_ceiling(&cfg).unwrap();
    let pass = f_point > 0.99 && monotone && ceiling <= 2e-3;
    report(
        7,
        "resonant CZ",
        pass,
        &format!("F(Q=10⁶, T₂=400 µs) = {f_point:.4} > 0.99, error monotone in Q and T₂: {monotone}, closed-system ceiling {ceiling:.2e} ≤ 2e-3"),
    );
}

#[test]
fn criterion_08_dispersive_iswap() {
    let t = table("gate-comparison");
    let cfg = ExperimentConfig::for_scenario("gate-comparison").unwrap();
    let tau = select(t, &[("gate", 1.0)], "duration_ns")[0];
    let tau_ok = (tau - 5600.0).abs() / 5600.0 < 0.15;
    let cz_dur = select(t, &[("gate", 0.0)], "duration_ns")[0];
    // Fidelity curves vs T₂ flat in Q to 1e-3.
    let mut flat_spread = 0.0f64;
    for &t2 in &cfg.grids.t2_us {
        let fs: Vec<f64> = cfg
            .grids
            .q
            .iter()
            .map(|&q| select(t, &[("gate", 1.0), ("q", q), ("t2_us", t2)], "fidelity")[0])
            .collect();
        let spread = fs.iter().cloned().fold(f64::MIN, f64::max)
            - fs.iter().cloned().fold(f64::MAX, f64::min);
        flat_spread = flat_spread.max(spread);
    }
    // CZ strictly above iSWAP for all T₂ ≤ 400 µs at Q = 10⁶.
    let mut cz_above = true;
    for &t2 in cfg.grids.t2_us.iter().filter(|&&t2| t2 <= 400.0) {
        let f_cz = select(t, &[("gate", 0.0), ("q", 1e6), ("t2_us", t2)], "fidelity")[0];
        let f_is = select(t, &[("gate", 1.0), ("q", 1e6), ("t2_us", t2)], "fidelity")[0];
        cz_above &= f_cz > f_is;
    }
    let pass = tau_ok && flat_spread <= 1e-3 && cz_above;
    report(
        8,
        "dispersive iSWAP",
        pass,
        &format!(
            "τ₂q = {tau:.0} ns (within 15% of 5.6 µs; CZ {cz_dur:.0} ns), iSWAP spread across Q ≤ {flat_spread:.1e} (≤1e-3), CZ > iSWAP for T₂ ≤ 400 µs at Q=10⁶: {cz_above}"
        ),
    );
}

#[test]
fn criterion_09_heisenberg_qs() {
    let t = table("heisenberg");
    let cfg = ExperimentConfig::for_scenario("heisenberg").unwrap();
    // Interior grid points: the compiler legitimately elides the identity
    // controlled phase at Jt ∈ {0, 2π}, so the constant-duration claim is
    // asserted where the three controlled-phase gates are actually present.
    let interior: Vec<f64> = cfg
        .grids
        .jt
        .iter()
        .copied()
        .filter(|&jt| jt > 1e-9 && (TAU - jt) > 1e-9)
        .collect();
    let res_dur: Vec<f64> = interior
        .iter()
        .map(|&jt| select(t, &[("jt", jt), ("method", 0.0)], "duration_ns")[0])
        .collect();
    let res_dur_ok = res_dur.iter().all(|&d| (d - 3000.0).abs() / 3000.0 <= 0.20);
    let disp_dur_2pi = select(t, &[("jt", TAU), ("method", 1.0)], "duration_ns")[0];
    let disp_dur_ok = (disp_dur_2pi - 17000.0).abs() / 17000.0 <= 0.20;
    // Fig. 7 structure at T₂ = 50 µs: resonant fidelity approximately
    // Jt-independent, dispersive fidelity degrades with Jt.
    let res_f: Vec<f64> = interior
        .iter()
        .map(|&jt| select(t, &[("jt", jt), ("method", 0.0)], "f_noisy")[0])
        .collect();
    let disp_f: Vec<f64> = interior
        .iter()
        .map(|&jt| select(t, &[("jt", jt), ("method", 1.0)], "f_noisy")[0])
        .collect();
    let res_spread = res_f.iter().cloned().fold(f64::MIN, f64::max)
        - res_f.iter().cloned().fold(f64::MAX, f64::min);
    let disp_drop = disp_f.first().unwrap() - disp_f.last().unwrap();
    let structure_ok = res_spread <= 0.05 && disp_drop > 0.05 && disp_drop > res_spread;
    let pass = res_dur_ok && disp_dur_ok && structure_ok;
    report(
        9,
        "Heisenberg quantum simulation",
        pass,
        &format!(
            "resonant duration {:.0}–{:.0} ns (3 µs ± 20%, Jt-independent), dispersive {disp_dur_2pi:.0} ns at Jt=2π (17 µs ± 20%), resonant fidelity spread {res_spread:.3} ≤ 0.05 vs dispersive drop {disp_drop:.3}",
            res_dur.iter().cloned().fold(f64::MAX, f64::min),
            res_dur.iter().cloned().fold(f64::MIN, f64::max)
        ),
    );
}

#[test]
fn criterion_10_tim() {
    let t = table("tim");
    let hw_dev = t
        .rows
        .iter()
        .map(|r| {
            let sz_trotter = r[2];
            let sz_hw = r[3];
            (sz_hw - sz_trotter).abs()
        })
        .fold(0.0f64, f64::max);
    // Noiseless convergence oracle at n = 100.
    let cfg = ExperimentConfig::for_scenario("tim").unwrap();
    let refs = tim_reference_curves(&cfg.grids.tb, 100).unwrap();
    let trotter_dev = refs.iter().map(|&(_, e, tr)| (tr - e).abs()).fold(0.0f64, f64::max);
    let pass = hw_dev <= 0.05 && trotter_dev <= 1e-3;
    report(
        10,
        "transverse-field Ising model",
        pass,
        &format!("hardware ⟨S_z⟩ within {hw_dev:.3} of the n=6 Trotter curve (≤0.05); n=100 Trotter vs exact ≤ {trotter_dev:.1e}"),
    );
}

#[test]
fn criterion_11_property_suite() {
    // Evolve invariants under drive + noise on the truncated product space.
    let sp = space(&[0, 1], &[0, 1], 1);
    let mut sched = ControlSchedule::new(6.0);
    sched
        .add_pulse(DrivePulse { b1_gauss: 2.0, freq_ghz: 5.7, phase: 0.3, t0_ns: 0.5, dur_ns: 5.0 })
        .unwrap();
    let h = 0.5f64.sqrt();
    let mut psi: Array1<C64> = Array1::zeros(sp.dim());
    psi[sp.index_of(0, 0, 0)] = C64::new(h, 0.0);
    psi[sp.index_of(1, 1, 0)] = C64::new(0.0, h);
    let noise = NoiseModel::new([50.0, 50.0], 1e5, sp.omega0_ghz).unwrap();
    let traj = evolve(&density_from_vector(&psi), &sp, &sched, &noise, &EvolveOptions::default())
        .unwrap();
    let rho = traj.final_state();
    let trace: f64 = (0..sp.dim()).map(|k| rho[[k, k]].re).sum();
    let invariants_ok = (trace - 1.0).abs() < 1e-7
        && hermiticity_defect(rho) < 1e-9
        && min_eigenvalue(rho).unwrap() > -1e-7;

    // Zero-photon bookends on both two-qudit gate schedules (closed system).
    let cz_space = msqp_core::gates::cz_space().unwrap();
    let (cz_plan, _) = msqp_core::gates::schedule_cz(&cz_space, (1, 1), PI).unwrap();
    let cz_bookend_ok = cz_plan.max_photon_end <= 1e-3 && cz_plan.max_leakage <= 1e-2;
    let disp = msqp_core::gates::dispersive_space().unwrap();
    let (_, isched) =
        msqp_core::gates::schedule_iswap_dispersive(&disp, msqp_core::gates::IswapKind::Iswap)
            .unwrap();
    let mut worst_photon = 0.0f64;
    for (p, q) in [(0usize, 1usize), (1, 0), (1, 1)] {
        let traj =
            evolve_vector(&disp.basis_vector(p, q, 0), &disp, &isched, &EvolveOptions::default())
                .unwrap();
        let photon: f64 = traj
            .final_state()
            .iter()
            .enumerate()
            .map(|(k, z)| z.norm_sqr() * disp.n_photon[k])
            .sum();
        worst_photon = worst_photon.max(photon);
    }
    let iswap_bookend_ok = worst_photon <= 1e-3;

    // CSV determinism: an identical config reproduces a bit-identical table.
    let mut cfg = ExperimentConfig::for_scenario("deutsch-jozsa").unwrap();
    cfg.grids.b1_gauss = vec![2.0];
    cfg.grids.t2_us = vec![100.0];
    let a = run_scenario(&cfg).unwrap().to_csv();
    let b = run_scenario(&cfg).unwrap().to_csv();
    let deterministic = a == b && a.ends_with('\n');

    let pass = invariants_ok && cz_bookend_ok && iswap_bookend_ok && deterministic;
    report(
        11,
        "property suite",
        pass,
        &format!(
            "evolve invariants: {invariants_ok}; CZ bookends (photon {:.1e}, leakage {:.1e}): {cz_bookend_ok}; iSWAP end photon {worst_photon:.1e}: {iswap_bookend_ok}; CSV determinism: {deterministic}",
            cz_plan.max_photon_end, cz_plan.max_leakage
        ),
    );
}
