//! Single-qudit physics: spin operators, level energies, transition ordering
//! and spin–photon coupling strengths.
//!
//! A molecular qudit is modelled by the easy-axis/easy-plane Hamiltonian
//! E_m = D·m² + g·μB·B·m on the (2S+1) states |m⟩, with transverse coupling to
//! the resonator photon scaling as √(S(S+1) − m(m+1)).

use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{zeeman_ghz, MU_B_GHZ_PER_T};

/// One molecular spin qudit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuditSpec {
    /// Spin quantum number S (2S must be a positive integer).
    pub spin: f64,
    /// Zero-field-splitting coefficient D in GHz (linear frequency).
    pub d_ghz: f64,
    /// Landé g-factor.
    pub g: f64,
    /// Bare spin–photon coupling G in MHz (linear frequency).
    pub g_mhz: f64,
}

impl QuditSpec {
    pub fn new(spin: f64, d_ghz: f64, g: f64, g_mhz: f64) -> Result<Self> {
        let spec = Self { spin, d_ghz, g, g_mhz };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !is_half_integer(self.spin) || self.spin < 0.5 {
            return Err(Error::Spec(format!(
                "spin must be a positive half-integer ≥ 1/2, got {}",
                self.spin
            )));
        }
        if self.g <= 0.0 {
            return Err(Error::Spec(format!("g-factor must be positive, got {}", self.g)));
        }
        if self.g_mhz < 0.0 {
            return Err(Error::Spec(format!("coupling G must be ≥ 0, got {}", self.g_mhz)));
        }
        Ok(())
    }

    /// Matrix dimension 2S+1.
    pub fn dim(&self) -> usize {
        (2.0 * self.spin).round() as usize + 1
    }

    /// m value of basis index i, ordered m = S, S−1, …, −S.
    pub fn m_of_index(&self, i: usize) -> f64 {
        self.spin - i as f64
    }

    /// Level energy E_m = D·m² + g·μB·B·m in GHz at a static field in mT.
    pub fn energy(&self, m: f64, b_mt: f64) -> f64 {
        self.d_ghz * m * m + zeeman_ghz(self.g, b_mt) * m
    }
}

fn is_half_integer(s: f64) -> bool {
    let twice = 2.0 * s;
    (twice - twice.round()).abs() < 1e-9 && twice.round() >= 1.0
}

/// Ladder coefficient √(S(S+1) − m(m+1)) for |m⟩ → |m+1⟩.
pub fn ladder_coeff(s: f64, m: f64) -> f64 {
    (s * (s + 1.0) - m * (m + 1.0)).max(0.0).sqrt()
}

/// Angular-momentum matrices for one spin, basis ordered m = S, S−1, …, −S.
#[derive(Debug, Clone)]
pub struct SpinOperators {
    pub sx: Array2<C64>,
    pub sy: Array2<C64>,
    pub sz: Array2<C64>,
}

/// Build Sx, Sy, Sz from the ladder construction.
pub fn build_spin_operators(s: f64) -> Result<SpinOperators> {
    if !is_half_integer(s) || s <= 0.0 {
        return Err(Error::Spec(format!("spin must be a positive half-integer, got {s}")));
    }
    let d = (2.0 * s).round() as usize + 1;
    let mut sp: Array2<C64> = Array2::zeros((d, d));
    let mut sz: Array2<C64> = Array2::zeros((d, d));
    for i in 0..d {
        let m = s - i as f64;
        sz[[i, i]] = C64::new(m, 0.0);
        // ⟨m+1|S₊|m⟩ with row index of m+1 being i−1.
        if i > 0 {
            sp[[i - 1, i]] = C64::new(ladder_coeff(s, m), 0.0);
        }
    }
    let sm = crate::linalg::dagger(&sp);
    let half = C64::new(0.5, 0.0);
    let half_i = C64::new(0.0, -0.5);
    let sx = (&sp + &sm).mapv(|z| z * half);
    let sy = (&sp - &sm).mapv(|z| z * half_i);
    Ok(SpinOperators { sx, sy, sz })
}

/// Energy ordering of the qudit levels at a static field.
///
/// Logical labels p = 0, 1, … index the levels by increasing energy; `m_of_p`
/// maps each label to its magnetic quantum number. Exact degeneracies (B = 0
/// with D > 0) are resolved by the documented tie-break: negative m first.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelOrder {
    /// m value of each energy-ordered label.
    pub m_of_p: Vec<f64>,
    /// Level energies in GHz, nondecreasing.
    pub energies: Vec<f64>,
    /// Static field the ordering was computed at, mT.
    pub b_mt: f64,
    /// True if an exact degeneracy was resolved by the tie-break.
    pub degenerate: bool,
}

impl LevelOrder {
    /// Logical label of a given m value.
    pub fn p_of_m(&self, m: f64) -> Option<usize> {
        self.m_of_p.iter().position(|&x| (x - m).abs() < 1e-9)
    }
}

/// Sort the qudit levels by increasing energy.
pub fn level_order(spec: &QuditSpec, b_mt: f64) -> Result<LevelOrder> {
    spec.validate()?;
    let d = spec.dim();
    let mut entries: Vec<(f64, f64)> = (0..d)
        .map(|i| {
            let m = spec.m_of_index(i);
            (spec.energy(m, b_mt), m)
        })
        .collect();
    let degenerate = {
        let mut es: Vec<f64> = entries.iter().map(|e| e.0).collect();
        es.sort_by(|a, b| a.partial_cmp(b).unwrap());
        es.windows(2).any(|w| w[0] == w[1])
    };
    entries.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap()
            .then(a.1.partial_cmp(&b.1).unwrap())
    });
    Ok(LevelOrder {
        m_of_p: entries.iter().map(|e| e.1).collect(),
        energies: entries.iter().map(|e| e.0).collect(),
        b_mt,
        degenerate,
    })
}

/// Diagonal single-qudit Hamiltonian in GHz, basis ordered m = S, …, −S.
pub fn qudit_hamiltonian(spec: &QuditSpec, b_mt: f64) -> Result<Array2<C64>> {
    spec.validate()?;
    let d = spec.dim();
    let mut h: Array2<C64> = Array2::zeros((d, d));
    for i in 0..d {
        h[[i, i]] = C64::new(spec.energy(spec.m_of_index(i), b_mt), 0.0);
    }
    Ok(h)
}

/// Spin–photon coupling G^m = G·√(S(S+1) − m(m+1)) for |m⟩ ↔ |m+1⟩, in MHz.
pub fn coupling_strength(spec: &QuditSpec, m: f64) -> Result<f64> {
    spec.validate()?;
    let step = spec.spin - m;
    if (step - step.round()).abs() > 1e-9 {
        return Err(Error::Spec(format!("m={m} is not on the S={} ladder", spec.spin)));
    }
    if m < -spec.spin - 1e-9 || m > spec.spin - 1.0 + 1e-9 {
        return Err(Error::Spec(format!(
            "transition m={m} ↔ m+1 outside the valid range for S={}",
            spec.spin
        )));
    }
    Ok(spec.g_mhz * ladder_coeff(spec.spin, m))
}

/// Coupling from a microwave stray field, |g·μB·⟨m|b·S|m′⟩|, in MHz.
///
/// `b_ut` is the field vector in µT at the molecule position.
pub fn coupling_from_field(spec: &QuditSpec, b_ut: [f64; 3], m: f64, mp: f64) -> Result<f64> {
    spec.validate()?;
    let ops = build_spin_operators(spec.spin)?;
    let i = (spec.spin - m).round() as isize;
    let j = (spec.spin - mp).round() as isize;
    let d = spec.dim() as isize;
    if i < 0 || i >= d || j < 0 || j >= d {
        return Err(Error::Spec(format!("m values {m}, {mp} outside the S={} ladder", spec.spin)));
    }
    let (i, j) = (i as usize, j as usize);
    let el = ops.sx[[i, j]] * b_ut[0] + ops.sy[[i, j]] * b_ut[1] + ops.sz[[i, j]] * b_ut[2];
    // µT → T, GHz → MHz.
    Ok(spec.g * MU_B_GHZ_PER_T * 1e-6 * el.norm() * 1e3)
}

/// London penetration depth used by the strip-field model, nm.
pub const LAMBDA_LONDON_NM: f64 = 90.0;

/// Approximate microwave field magnitude (µT) of a superconducting thin strip.
///
/// The current density follows the thin-film distribution
/// J(x) ∝ 1/√((w/2)² − x²), clamped within one London depth of the edges, and
/// the field is evaluated at `height_nm` above one strip edge by summing
/// two-dimensional line-current contributions. This is an approximate stand-in
/// for full electromagnetic solver output.
pub fn strip_field(current_na: f64, width_nm: f64, height_nm: f64) -> Result<f64> {
    if width_nm <= 0.0 || height_nm <= 0.0 {
        return Err(Error::Spec("strip_field: width and height must be positive".into()));
    }
    let mu0 = 4e-7 * std::f64::consts::PI;
    let i_amp = current_na * 1e-9;
    let w = width_nm * 1e-9;
    let h = height_nm * 1e-9;
    let x_eval = w / 2.0;
    let lam = (LAMBDA_LONDON_NM * 1e-9).min(w / 4.0);
    let a = w / 2.0;
    let n = 4001usize;
    let dx = w / (n - 1) as f64;
    let mut j_vals = vec![0.0f64; n];
    for (k, jv) in j_vals.iter_mut().enumerate() {
        let x = -a + k as f64 * dx;
        let xc = x.clamp(-(a - lam), a - lam);
        *jv = 1.0 / (a * a - xc * xc).sqrt();
    }
    // Trapezoid normalization so that ∫J dx = I.
    let mut norm = 0.0;
    for k in 0..n - 1 {
        norm += 0.5 * (j_vals[k] + j_vals[k + 1]) * dx;
    }
    let scale = i_amp / norm;
    let (mut bx, mut by) = (0.0f64, 0.0f64);
    for (k, jv) in j_vals.iter().enumerate() {
        let x = -a + k as f64 * dx;
        let r2 = (x_eval - x).powi(2) + h * h;
        let pref = mu0 * jv * scale / (2.0 * std::f64::consts::PI) * dx;
        bx += pref * h / r2;
        by += pref * (x_eval - x) / r2;
    }
    Ok((bx * bx + by * by).sqrt() * 1e6)
}
