//! Experiment configuration: TOML schema, defaults, validation.
//!
//! One config file fully determines a run. Unknown keys are rejected so that
//! typos fail loudly instead of silently using defaults.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spins::QuditSpec;

/// Hardware parameters of the two-qudit unit cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HardwareConfig {
    /// Spin quantum number S of both molecules.
    pub spin: f64,
    /// Axial anisotropies D₁, D₂ in GHz.
    pub d1_ghz: f64,
    pub d2_ghz: f64,
    /// g-factors.
    pub g1: f64,
    pub g2: f64,
    /// Bare single-spin coupling G in MHz.
    pub g_mhz: f64,
    /// Resonator rest frequency, GHz.
    pub omega0_ghz: f64,
    /// Static field, mT.
    pub b_mt: f64,
    /// Photon-number cutoff.
    pub n_max: usize,
    /// Retained levels per qudit (energy-ordered label count).
    pub levels1: usize,
    pub levels2: usize,
}

impl Default for HardwareConfig {
    fn default() -> Self {
        Self {
            spin: 10.0,
            d1_ghz: 7.1,
            d2_ghz: 7.7,
            g1: 2.0,
            g2: 2.0,
            g_mhz: 0.090,
            omega0_ghz: 7.5,
            b_mt: 50.0,
            n_max: 1,
            levels1: 1,
            levels2: 5,
        }
    }
}

impl HardwareConfig {
    pub fn spec1(&self) -> Result<QuditSpec> {
        QuditSpec::new(self.spin, self.d1_ghz, self.g1, self.g_mhz)
    }

    pub fn spec2(&self) -> Result<QuditSpec> {
        QuditSpec::new(self.spin, self.d2_ghz, self.g2, self.g_mhz)
    }
}

/// Sweep grids. Scenario operations read the grids they need.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    /// Drive amplitudes, G.
    pub b1_gauss: Vec<f64>,
    /// Coherence times, µs.
    pub t2_us: Vec<f64>,
    /// Resonator quality factors.
    pub q: Vec<f64>,
    /// Heisenberg simulated phases J·t, rad.
    pub jt: Vec<f64>,
    /// Transverse-Ising simulated phases t·b, rad.
    pub tb: Vec<f64>,
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            b1_gauss: vec![1.0, 2.0, 3.0, 4.0, 5.0],
            t2_us: vec![10.0, 50.0, 100.0, 200.0, 400.0, 1000.0],
            q: vec![1e5, 1e6, 1e7],
            jt: linspace(0.0, std::f64::consts::TAU, 9),
            tb: linspace(0.0, std::f64::consts::TAU, 13),
        }
    }
}

/// One experiment run, fully resolved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Scenario name: deutsch-jozsa | cz-error | gate-comparison | heisenberg | tim.
    pub scenario: String,
    #[serde(default)]
    pub hardware: HardwareConfig,
    #[serde(default)]
    pub grids: GridConfig,
    /// Suzuki–Trotter step count for the TIM scenario.
    #[serde(default = "default_trotter")]
    pub trotter_steps: usize,
    /// Whether the TIM scenario also integrates the full hardware pipeline
    /// (the exact and ideal-Trotter reference curves are always produced).
    #[serde(default = "default_true")]
    pub tim_hardware: bool,
}

fn default_trotter() -> usize {
    6
}

fn default_true() -> bool {
    true
}

pub const SCENARIOS: [&str; 5] =
    ["deutsch-jozsa", "cz-error", "gate-comparison", "heisenberg", "tim"];

impl ExperimentConfig {
    /// Minimal config for a named scenario with every default applied.
    pub fn for_scenario(name: &str) -> Result<Self> {
        let c = Self {
            scenario: name.to_string(),
            hardware: HardwareConfig::default(),
            grids: GridConfig::default(),
            trotter_steps: default_trotter(),
            tim_hardware: true,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !SCENARIOS.contains(&self.scenario.as_str()) {
            return Err(Error::Config(format!(
                "unknown scenario '{}' (expected one of {})",
                self.scenario,
                SCENARIOS.join(", ")
            )));
        }
        self.hardware.spec1()?;
        self.hardware.spec2()?;
        if self.hardware.omega0_ghz <= 0.0 || self.hardware.b_mt <= 0.0 {
            return Err(Error::Config("ω₀ and B must be positive".into()));
        }
        if self.hardware.levels1 == 0 || self.hardware.levels2 == 0 {
            return Err(Error::Config("retained level counts must be positive".into()));
        }
        let g = &self.grids;
        for (name, grid) in
            [("b1_gauss", &g.b1_gauss), ("t2_us", &g.t2_us), ("q", &g.q), ("jt", &g.jt), ("tb", &g.tb)]
        {
            if grid.is_empty() {
                return Err(Error::Config(format!("grid '{name}' must be nonempty")));
            }
        }
        if g.b1_gauss.iter().any(|&b| b <= 0.0) {
            return Err(Error::Config("B₁ grid entries must be positive".into()));
        }
        if g.t2_us.iter().any(|&t| t <= 0.0) {
            return Err(Error::Config("T₂ grid entries must be positive".into()));
        }
        if g.q.iter().any(|&q| q <= 0.0) {
            return Err(Error::Config("Q grid entries must be positive".into()));
        }
        if self.trotter_steps == 0 {
            return Err(Error::Config("trotter_steps must be positive".into()));
        }
        Ok(())
    }

    /// Parse a TOML document; unknown keys are schema violations.
    pub fn parse(text: &str) -> Result<Self> {
        let c: Self =
            toml::from_str(text).map_err(|e| Error::Config(format!("config parse error: {e}")))?;
        c.validate()?;
        Ok(c)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Emit the resolved config as TOML (round-trips through [`parse`]).
    pub fn emit(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(format!("config emit error: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let c = ExperimentConfig::parse("scenario = \"deutsch-jozsa\"\n").unwrap();
        assert_eq!(c.hardware.n_max, 1);
        assert_eq!(c.hardware.levels2, 5);
        assert_eq!(c.grids.t2_us.len(), 6);
        assert_eq!(c.trotter_steps, 6);
    }

    #[test]
    fn paper_parameters_echoed() {
        let c = ExperimentConfig::for_scenario("cz-error").unwrap();
        assert_eq!(c.hardware.d1_ghz, 7.1);
        assert_eq!(c.hardware.d2_ghz, 7.7);
        assert_eq!(c.hardware.omega0_ghz, 7.5);
        assert_eq!(c.hardware.b_mt, 50.0);
    }

    #[test]
    fn zero_q_rejected() {
        let text = "scenario = \"cz-error\"\n[grids]\nq = [0.0]\n";
        assert!(ExperimentConfig::parse(text).is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(ExperimentConfig::parse("scenario = \"tim\"\nbogus = 1\n").is_err());
        assert!(ExperimentConfig::parse("scenario = \"tim\"\n[hardware]\nd3_ghz = 1.0\n").is_err());
    }

    #[test]
    fn round_trip() {
        let mut c = ExperimentConfig::for_scenario("heisenberg").unwrap();
        c.grids.jt = vec![0.5, 1.0];
        let text = c.emit().unwrap();
        let back = ExperimentConfig::parse(&text).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_scenario_rejected() {
        assert!(ExperimentConfig::parse("scenario = \"frobnicate\"\n").is_err());
    }
}
