//! `msqp` — command-line front end for the molecular spin quantum processor
//! simulator: spectra, pulse compilation, calibrated gates, benchmark
//! scenarios, and readout models.

use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::Serialize;

use msqp_core::composite::{assemble_space, density_from_vector};
use msqp_core::config::ExperimentConfig;
use msqp_core::error::{Error, Result};
use msqp_core::experiments::run_scenario;
use msqp_core::lindblad::NoiseModel;
use msqp_core::readout::{dispersive_shift, simulate_resonant_readout, DetectorModel};
use msqp_core::spins::level_order;

#[derive(Parser)]
#[command(
    name = "msqp",
    version,
    about = "Simulator and pulse compiler for a two-qudit molecular spin processor",
    long_about = "Simulator and pulse compiler for a two-qudit molecular spin processor.\n\
Exit codes: 0 success, 2 configuration/compile error, 3 numerical failure.\n\
Set MSQP_WORKERS to bound the sweep worker pool (default: all cores)."
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print the energy-ordered level spectrum of one qudit as CSV.
    Spectrum {
        /// Which qudit (1 or 2).
        #[arg(long, default_value_t = 1)]
        qudit: u8,
        /// Static field, mT.
        #[arg(long, default_value_t = 50.0)]
        b_mt: f64,
        /// Output CSV path (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compile a circuit file into a drive-pulse table.
    Compile {
        /// Circuit description file (`qubits N` header plus gate lines).
        #[arg(long)]
        circuit: PathBuf,
        /// Drive amplitude, G.
        #[arg(long, default_value_t = 2.0)]
        b1_gauss: f64,
        /// Output CSV path (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit the calibrated control schedule of an entangling gate.
    Gate {
        #[command(subcommand)]
        gate: GateCmd,
    },
    /// Run a benchmark scenario and write its CSV table plus a run manifest.
    Run {
        /// Scenario: deutsch-jozsa | cz-error | gate-comparison | heisenberg | tim.
        scenario: String,
        /// TOML config (defaults for the scenario if omitted).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the scenario named inside a config file (generic sweep runner).
    Sweep {
        /// TOML config with scenario, hardware, and grids.
        #[arg(long)]
        config: PathBuf,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Readout models: dispersive-shift table or resonant-readout summary.
    Readout {
        /// Spin–resonator detunings for the dispersive table, MHz.
        #[arg(long, value_delimiter = ',', default_values_t = vec![10.0, 20.0, 30.0, 50.0, 100.0])]
        delta_mhz: Vec<f64>,
        /// Enhanced coupling G^m, MHz.
        #[arg(long, default_value_t = 0.9439)]
        g_mhz: f64,
        /// Simulate the resonant single-photon protocol instead.
        #[arg(long)]
        resonant: bool,
        /// Detector efficiency η.
        #[arg(long, default_value_t = 1.0)]
        efficiency: f64,
        /// Detection window, ns.
        #[arg(long, default_value_t = 100.0)]
        window_ns: f64,
        /// Resonator quality factor for the resonant protocol.
        #[arg(long, default_value_t = 1e5)]
        q_factor: f64,
        /// Output CSV path (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum GateCmd {
    /// Resonant controlled-phase gate U_φ on a target component.
    Cz {
        /// Conditional phase, rad.
        #[arg(long, default_value_t = std::f64::consts::PI)]
        phi: f64,
        /// Target component (q1 level, q2 level).
        #[arg(long, num_args = 2, default_values_t = vec![1, 1])]
        target: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dispersive iSWAP.
    Iswap {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dispersive √iSWAP.
    SqrtIswap {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Everything needed to reproduce a run bit-identically, plus diagnostics.
#[derive(Serialize)]
struct RunManifest {
    tool_version: String,
    scenario: String,
    workers: usize,
    /// Wall-clock seconds per stage.
    timings_s: Timings,
    numerics: NumericsReport,
    config: ExperimentConfig,
}

#[derive(Serialize)]
struct Timings {
    total: f64,
}

#[derive(Serialize)]
struct NumericsReport {
    /// Integration step rule: fixed RK4 with dt ≤ 1/(oversample·f_max).
    dt_rule: String,
    oversample: f64,
    rwa: bool,
}

fn write_or_print(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, text)?;
            Ok(())
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn worker_count() -> usize {
    std::env::var("MSQP_WORKERS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

fn run_and_write(config: &ExperimentConfig, out: &PathBuf) -> Result<()> {
    let started = Instant::now();
    let table = run_scenario(config)?;
    std::fs::write(out, table.to_csv())?;
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        scenario: config.scenario.clone(),
        workers: worker_count(),
        timings_s: Timings { total: started.elapsed().as_secs_f64() },
        numerics: NumericsReport {
            dt_rule: "fixed-step RK4, dt <= 1/(oversample * f_max)".to_string(),
            oversample: 50.0,
            rwa: false,
        },
        config: config.clone(),
    };
    let text = toml::to_string_pretty(&manifest)
        .map_err(|e| Error::Config(format!("manifest serialization: {e}")))?;
    let mut mpath = out.clone();
    mpath.set_extension("manifest.toml");
    std::fs::write(&mpath, text)?;
    eprintln!(
        "wrote {} ({} rows) and {} in {:.1} s",
        out.display(),
        table.rows.len(),
        mpath.display(),
        started.elapsed().as_secs_f64()
    );
    Ok(())
}

fn real_main(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Spectrum { qudit, b_mt, out } => {
            let hw = msqp_core::config::HardwareConfig::default();
            let spec = match qudit {
                1 => hw.spec1()?,
                2 => hw.spec2()?,
                _ => return Err(Error::Config("qudit must be 1 or 2".into())),
            };
            let order = level_order(&spec, b_mt)?;
            let mut csv = String::from("label,m,energy_ghz\n");
            for (p, (&m, &e)) in order.m_of_p.iter().zip(order.energies.iter()).enumerate() {
                csv.push_str(&format!("{p},{m},{e:.9e}\n"));
            }
            write_or_print(&out, &csv)
        }
        Cmd::Compile { circuit, b1_gauss, out } => {
            let text = std::fs::read_to_string(&circuit)?;
            let circ = msqp_core::circuit::parse_circuit(&text)?;
            let d = circ.dim();
            if d > msqp_core::circuit::DEFAULT_TWO_QUBIT_M.len() {
                return Err(Error::Compile(format!(
                    "only up to {} logical levels are mapped onto one qudit",
                    msqp_core::circuit::DEFAULT_TWO_QUBIT_M.len()
                )));
            }
            let m = &msqp_core::circuit::DEFAULT_TWO_QUBIT_M[..d];
            let program = msqp_core::circuit::compile_circuit(&circ, m)?;
            let hw = msqp_core::config::HardwareConfig::default();
            let spec = hw.spec2()?;
            let order = level_order(&spec, hw.b_mt)?;
            let opts = msqp_core::compiler::PulseOptions {
                b1_gauss,
                gap_ns: 1.0,
                t_start_ns: 0.0,
            };
            let sched = msqp_core::compiler::rotations_to_pulses(&program, &spec, &order, &opts)?;
            eprintln!(
                "{} rotations -> {:.1} ns schedule",
                program.rotations.len(),
                sched.span_ns
            );
            write_or_print(&out, &sched.to_table())
        }
        Cmd::Gate { gate } => match gate {
            GateCmd::Cz { phi, target, out } => {
                let space = msqp_core::gates::cz_space()?;
                let (plan, sched) =
                    msqp_core::gates::schedule_cz(&space, (target[0], target[1]), phi)?;
                eprintln!(
                    "cz: phi = {phi:.6} rad on ({}, {}), duration {:.1} ns, wait {:.4} ns",
                    target[0], target[1], sched.span_ns, plan.wait_ns
                );
                write_or_print(&out, &sched.to_table())
            }
            GateCmd::Iswap { out } => {
                let space = msqp_core::gates::dispersive_space()?;
                let (plan, sched) = msqp_core::gates::schedule_iswap_dispersive(
                    &space,
                    msqp_core::gates::IswapKind::Iswap,
                )?;
                eprintln!(
                    "iswap: Gamma = {:.4} MHz, duration {:.1} ns",
                    plan.gamma_mhz, sched.span_ns
                );
                write_or_print(&out, &sched.to_table())
            }
            GateCmd::SqrtIswap { out } => {
                let space = msqp_core::gates::dispersive_space()?;
                let (plan, sched) = msqp_core::gates::schedule_iswap_dispersive(
                    &space,
                    msqp_core::gates::IswapKind::SqrtIswap,
                )?;
                eprintln!(
                    "sqrt-iswap: Gamma = {:.4} MHz, duration {:.1} ns",
                    plan.gamma_mhz, sched.span_ns
                );
                write_or_print(&out, &sched.to_table())
            }
        },
        Cmd::Run { scenario, config, out } => {
            let cfg = match config {
                Some(path) => {
                    let cfg = ExperimentConfig::from_path(&path)?;
                    if cfg.scenario != scenario {
                        return Err(Error::Config(format!(
                            "config names scenario '{}' but '{scenario}' was requested",
                            cfg.scenario
                        )));
                    }
                    cfg
                }
                None => ExperimentConfig::for_scenario(&scenario)?,
            };
            run_and_write(&cfg, &out)
        }
        Cmd::Sweep { config, out } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            run_and_write(&cfg, &out)
        }
        Cmd::Readout {
            delta_mhz,
            g_mhz,
            resonant,
            efficiency,
            window_ns,
            q_factor,
            out,
        } => {
            if resonant {
                let hw = msqp_core::config::HardwareConfig::default();
                let space = assemble_space(
                    hw.spec1()?,
                    hw.spec2()?,
                    &[0],
                    &[0, 1],
                    1,
                    hw.b_mt,
                    hw.omega0_ghz,
                )?;
                let detector = DetectorModel::new(efficiency, window_ns)?;
                let noise = NoiseModel::new([f64::INFINITY, f64::INFINITY], q_factor, hw.omega0_ghz)?;
                let excited = density_from_vector(&space.basis_vector(0, 1, 0));
                let r = simulate_resonant_readout(&excited, &space, 2, (0, 1), &detector, &noise)?;
                let csv = format!(
                    "p_no_click,p_click,duration_ns,swap_ns,residual_excitation\n{:.9e},{:.9e},{:.9e},{:.9e},{:.9e}\n",
                    r.probabilities[0],
                    r.probabilities[1],
                    r.duration_ns,
                    r.swap_ns,
                    r.residual_excitation
                );
                write_or_print(&out, &csv)
            } else {
                let mut csv = String::from("delta_mhz,chi_mhz,duration_ns\n");
                for &d in &delta_mhz {
                    let (chi, dur) = dispersive_shift(g_mhz, d)?;
                    csv.push_str(&format!("{d},{chi:.9e},{dur:.9e}\n"));
                }
                write_or_print(&out, &csv)
            }
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = real_main(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
