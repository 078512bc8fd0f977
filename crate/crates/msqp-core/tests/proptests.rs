//! Property suite: density-matrix invariants under arbitrary short control
//! schedules, schedule algebra, compiler angle normalization, and CSV/config
//! determinism.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use proptest::prelude::*;

use msqp_core::compiler::GivensRotation;
use msqp_core::composite::{assemble_space, density_from_vector, CompositeSpace};
use msqp_core::config::ExperimentConfig;
use msqp_core::experiments::BenchmarkTable;
use msqp_core::linalg::{hermiticity_defect, min_eigenvalue};
use msqp_core::lindblad::{evolve, EvolveOptions, NoiseModel};
use msqp_core::schedule::{ControlSchedule, DetuningSegment, DrivePulse, LocalShiftSegment};
use msqp_core::spins::QuditSpec;

fn small_space() -> CompositeSpace {
    let q1 = QuditSpec::new(10.0, 7.1, 2.0, 0.090).unwrap();
    let q2 = QuditSpec::new(10.0, 7.7, 2.0, 0.090).unwrap();
    assemble_space(q1, q2, &[0, 1], &[0, 1], 1, 50.0, 7.5).unwrap()
}

/// Random normalized pure state on the space.
fn random_state(space: &CompositeSpace, seeds: &[f64]) -> Array1<C64> {
    let d = space.dim();
    let mut psi: Array1<C64> = Array1::zeros(d);
    for k in 0..d {
        let a = seeds[(2 * k) % seeds.len()];
        let b = seeds[(2 * k + 1) % seeds.len()];
        psi[k] = C64::new(a - 0.5, b - 0.5);
    }
    let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    psi.mapv(|z| z / norm)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// Trace, Hermiticity, and positivity are preserved by `evolve` for
    /// arbitrary (valid) short schedules and noise settings.
    #[test]
    fn evolve_preserves_density_invariants(
        b1 in 0.0f64..4.0,
        freq in 5.0f64..9.0,
        phase in 0.0f64..6.28,
        delta in -0.5f64..0.5,
        shift in -1.0f64..1.0,
        t2 in 1.0f64..100.0,
        q in 1e4f64..1e7,
        seeds in proptest::collection::vec(0.0f64..1.0, 16),
    ) {
        let space = small_space();
        let mut sched = ControlSchedule::new(6.0);
        sched.add_pulse(DrivePulse {
            b1_gauss: b1,
            freq_ghz: freq,
            phase,
            t0_ns: 0.5,
            dur_ns: 3.0,
        }).unwrap();
        sched.add_detuning(DetuningSegment {
            t0_ns: 1.0,
            dur_ns: 4.0,
            delta_ghz: delta,
            ramp_ns: 1.0,
        }).unwrap();
        sched.add_local_shift(LocalShiftSegment {
            qudit: 2,
            t0_ns: 2.0,
            dur_ns: 2.0,
            db_mt: shift,
        }).unwrap();

        let rho0 = density_from_vector(&random_state(&space, &seeds));
        let noise = NoiseModel::new([t2, t2], q, space.omega0_ghz).unwrap();
        let traj = evolve(&rho0, &space, &sched, &noise, &EvolveOptions::default()).unwrap();
        let rho = traj.final_state();

        let trace: f64 = (0..space.dim()).map(|k| rho[[k, k]].re).sum();
        prop_assert!((trace - 1.0).abs() < 1e-7, "trace drift {}", trace - 1.0);
        prop_assert!(hermiticity_defect(rho) < 1e-9);
        let lam = min_eigenvalue(rho).unwrap();
        prop_assert!(lam > -1e-7, "negative eigenvalue {lam}");
    }

    /// Schedule shifting and extension preserve validity and the span covers
    /// every segment.
    #[test]
    fn schedule_shift_extend_consistency(
        dt in 25.0f64..100.0,
        dur in 1.0f64..20.0,
        delta in -1.0f64..1.0,
    ) {
        let mut a = ControlSchedule::new(dur + 2.0);
        a.add_detuning(DetuningSegment { t0_ns: 1.0, dur_ns: dur, delta_ghz: delta, ramp_ns: 0.5 })
            .unwrap();
        a.add_pulse(DrivePulse { b1_gauss: 1.0, freq_ghz: 6.0, phase: 0.0, t0_ns: 0.5, dur_ns: 1.0 })
            .unwrap();
        let b = a.shifted(dt);
        prop_assert!((b.span_ns - (a.span_ns + dt)).abs() < 1e-9);
        prop_assert!((b.detunings[0].t0_ns - (1.0 + dt)).abs() < 1e-9);
        let mut c = ControlSchedule::new(0.0);
        c.extend(&a).unwrap();
        c.extend(&b).unwrap();
        prop_assert!((c.span_ns - b.span_ns).abs() < 1e-9);
        prop_assert_eq!(c.pulses.len(), 2);
        // The rendered table is deterministic.
        prop_assert_eq!(c.to_table(), c.to_table());
    }

    /// Givens construction normalizes θ into [0, 2π) while representing the
    /// same rotation up to the documented identities.
    #[test]
    fn givens_angle_normalization(theta in -20.0f64..20.0, phi in -10.0f64..10.0) {
        let g = GivensRotation::new(0, 1, theta, phi);
        prop_assert!((0.0..std::f64::consts::TAU).contains(&g.theta));
        let m = g.matrix(2);
        let mref = GivensRotation { p: 0, q: 1, theta, phi }.matrix(2);
        prop_assert!(msqp_core::linalg::max_abs_diff(&m, &mref) < 1e-12);
    }

    /// CSV rendering is bit-deterministic and newline-terminated for
    /// arbitrary payloads.
    #[test]
    fn benchmark_table_csv_deterministic(
        rows in proptest::collection::vec(proptest::collection::vec(-1e6f64..1e6, 3), 0..8)
    ) {
        let mut t = BenchmarkTable::new(&["a", "b", "c"]);
        for r in rows {
            t.push(r);
        }
        let csv = t.to_csv();
        prop_assert_eq!(csv.clone(), t.to_csv());
        prop_assert!(csv.ends_with('\n'));
        prop_assert_eq!(csv.lines().count(), t.rows.len() + 1);
    }

    /// Config round trip: parse(emit(config)) = config.
    #[test]
    fn config_round_trip(
        t2 in proptest::collection::vec(1.0f64..1000.0, 1..4),
        steps in 1usize..50,
    ) {
        let mut c = ExperimentConfig::for_scenario("tim").unwrap();
        c.grids.t2_us = t2;
        c.trotter_steps = steps;
        let back = ExperimentConfig::parse(&c.emit().unwrap()).unwrap();
        prop_assert_eq!(back, c);
    }
}
