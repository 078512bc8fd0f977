//! Python bindings for the molecular spin processor simulator.
//!
//! Build with `cargo build -p msqp-py --release` and import the resulting
//! `libmsqp.so` as `msqp` (see `python/smoke_test.py`).

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use msqp_core::composite::{assemble_space, density_from_vector, CompositeSpace};
use msqp_core::config::{ExperimentConfig, HardwareConfig};
use msqp_core::error::Error;
use msqp_core::lindblad::{evolve, EvolveOptions, NoiseModel};
use msqp_core::spins::level_order;

fn err(e: Error) -> PyErr {
    match e {
        Error::Numerical(_) => PyRuntimeError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

/// Anisotropy/coupling parameters of one molecular qudit.
#[pyclass(name = "QuditSpec")]
#[derive(Clone)]
struct PyQuditSpec {
    inner: msqp_core::spins::QuditSpec,
}

#[pymethods]
impl PyQuditSpec {
    #[new]
    fn new(spin: f64, d_ghz: f64, g: f64, g_mhz: f64) -> PyResult<Self> {
        Ok(Self { inner: msqp_core::spins::QuditSpec::new(spin, d_ghz, g, g_mhz).map_err(err)? })
    }

    /// E(m) = D·m² + g·μB·B·m in GHz.
    fn energy(&self, m: f64, b_mt: f64) -> f64 {
        self.inner.energy(m, b_mt)
    }

    /// Energy-ordered levels at field B: list of (m, energy_GHz).
    fn spectrum(&self, b_mt: f64) -> PyResult<Vec<(f64, f64)>> {
        let order = level_order(&self.inner, b_mt).map_err(err)?;
        Ok(order.m_of_p.iter().copied().zip(order.energies.iter().copied()).collect())
    }

    /// Photon-coupling strength G^m of the m ↔ m+1 transition, MHz.
    fn coupling(&self, m: f64) -> PyResult<f64> {
        msqp_core::spins::coupling_strength(&self.inner, m).map_err(err)
    }

    #[getter]
    fn spin(&self) -> f64 {
        self.inner.spin
    }

    #[getter]
    fn d_ghz(&self) -> f64 {
        self.inner.d_ghz
    }
}

/// Truncated two-qudit ⊗ resonator product space.
#[pyclass(name = "Space")]
struct PySpace {
    inner: CompositeSpace,
}

#[pymethods]
impl PySpace {
    /// Build a space from retained level counts and photon cutoff using the
    /// default hardware parameters.
    #[new]
    fn new(levels1: usize, levels2: usize, n_max: usize) -> PyResult<Self> {
        let hw = HardwareConfig::default();
        let l1: Vec<usize> = (0..levels1).collect();
        let l2: Vec<usize> = (0..levels2).collect();
        let inner = assemble_space(
            hw.spec1().map_err(err)?,
            hw.spec2().map_err(err)?,
            &l1,
            &l2,
            n_max,
            hw.b_mt,
            hw.omega0_ghz,
        )
        .map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    /// Basis labels (q1 slot, q2 slot, photon number) in index order.
    fn labels(&self) -> Vec<(usize, usize, usize)> {
        (0..self.inner.dim()).map(|k| self.inner.labels_of(k)).collect()
    }

    /// Evolve the basis state (i1, i2, n) under a scheduled controlled-phase
    /// gate with noise; returns the final diagonal populations.
    fn cz_populations(
        &self,
        i1: usize,
        i2: usize,
        phi: f64,
        t2_us: f64,
        q_factor: f64,
    ) -> PyResult<Vec<f64>> {
        let (_, sched) = msqp_core::gates::schedule_cz(&self.inner, (1, 1), phi).map_err(err)?;
        let noise =
            NoiseModel::new([t2_us, t2_us], q_factor, self.inner.omega0_ghz).map_err(err)?;
        let rho0 = density_from_vector(&self.inner.basis_vector(i1, i2, 0));
        let traj =
            evolve(&rho0, &self.inner, &sched, &noise, &EvolveOptions::default()).map_err(err)?;
        let fin = traj.final_state();
        Ok((0..self.inner.dim()).map(|k| fin[[k, k]].re).collect())
    }
}

/// Pulse table of the calibrated resonant controlled-phase gate; returns
/// (duration_ns, csv_table).
#[pyfunction]
fn cz_schedule(phi: f64, p: usize, q: usize) -> PyResult<(f64, String)> {
    let space = msqp_core::gates::cz_space().map_err(err)?;
    let (_, sched) = msqp_core::gates::schedule_cz(&space, (p, q), phi).map_err(err)?;
    Ok((sched.span_ns, sched.to_table()))
}

/// Pulse table of the dispersive iSWAP family: kind ∈ {"iswap", "sqrt-iswap"}.
#[pyfunction]
fn iswap_schedule(kind: &str) -> PyResult<(f64, String)> {
    let k = match kind {
        "iswap" => msqp_core::gates::IswapKind::Iswap,
        "sqrt-iswap" => msqp_core::gates::IswapKind::SqrtIswap,
        other => return Err(PyValueError::new_err(format!("unknown iSWAP kind '{other}'"))),
    };
    let space = msqp_core::gates::dispersive_space().map_err(err)?;
    let (_, sched) = msqp_core::gates::schedule_iswap_dispersive(&space, k).map_err(err)?;
    Ok((sched.span_ns, sched.to_table()))
}

/// Compile a circuit description into a drive-pulse table; returns
/// (rotation_count, duration_ns, csv_table).
#[pyfunction]
fn compile_circuit(text: &str, b1_gauss: f64) -> PyResult<(usize, f64, String)> {
    let circ = msqp_core::circuit::parse_circuit(text).map_err(err)?;
    let d = circ.dim();
    if d > msqp_core::circuit::DEFAULT_TWO_QUBIT_M.len() {
        return Err(PyValueError::new_err("circuit too large for the single-qudit encoding"));
    }
    let program =
        msqp_core::circuit::compile_circuit(&circ, &msqp_core::circuit::DEFAULT_TWO_QUBIT_M[..d])
            .map_err(err)?;
    let hw = HardwareConfig::default();
    let spec = hw.spec2().map_err(err)?;
    let order = level_order(&spec, hw.b_mt).map_err(err)?;
    let opts = msqp_core::compiler::PulseOptions { b1_gauss, gap_ns: 1.0, t_start_ns: 0.0 };
    let sched =
        msqp_core::compiler::rotations_to_pulses(&program, &spec, &order, &opts).map_err(err)?;
    Ok((program.rotations.len(), sched.span_ns, sched.to_table()))
}

/// Run a benchmark scenario from a TOML config string; returns the CSV table.
#[pyfunction]
fn run_scenario(config_toml: &str) -> PyResult<String> {
    let config = ExperimentConfig::parse(config_toml).map_err(err)?;
    let table = msqp_core::experiments::run_scenario(&config).map_err(err)?;
    Ok(table.to_csv())
}

/// Default TOML config for a named scenario.
#[pyfunction]
fn default_config(scenario: &str) -> PyResult<String> {
    ExperimentConfig::for_scenario(scenario).and_then(|c| c.emit()).map_err(err)
}

/// Dispersive readout: (χ_MHz, duration_ns) for coupling G and detuning Δ.
#[pyfunction]
fn dispersive_shift(g_mhz: f64, delta_mhz: f64) -> PyResult<(f64, f64)> {
    msqp_core::readout::dispersive_shift(g_mhz, delta_mhz).map_err(err)
}

#[pymodule]
fn msqp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyQuditSpec>()?;
    m.add_class::<PySpace>()?;
    m.add_function(wrap_pyfunction!(cz_schedule, m)?)?;
    m.add_function(wrap_pyfunction!(iswap_schedule, m)?)?;
    m.add_function(wrap_pyfunction!(compile_circuit, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(dispersive_shift, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
