//! The truncated two-qudit ⊗ photon product space and its Hamiltonian.
//!
//! Basis states are |level₁, level₂, n⟩ where the qudit levels index retained
//! energy-ordered labels and n counts photons up to `n_max`. The Hamiltonian is
//!
//!   H(t) = ω_r(t)(a†a + ½) + Σᵢ [Dᵢ S_{zi}² + gᵢ μB B S_{zi}]
//!        + Σᵢ 2Gᵢ (a + a†) S_{xi} + B₁(t) μB (g₁S_{y1} + g₂S_{y2})
//!
//! with the full (non-RWA) transverse coupling and cosine drive. Besides the
//! dense `hamiltonian_at` evaluator, the space precomputes a sparse
//! split used by the integrator: static diagonal energies, diagonal control
//! profiles (photon number, S_{zi}) and the off-diagonal coupling/drive terms
//! with their transition frequencies.

use ndarray::{Array1, Array2};
use ndarray::linalg::kron;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::eye;
use crate::schedule::ControlSchedule;
use crate::spins::{build_spin_operators, level_order, LevelOrder, QuditSpec, SpinOperators};
use crate::units::{gauss_to_t, zeeman_ghz, MU_B_GHZ_PER_T};

/// One off-diagonal Hamiltonian entry (upper triangle, r < c).
#[derive(Debug, Clone, Copy)]
pub struct OffDiagTerm {
    pub row: usize,
    pub col: usize,
    /// Matrix element in GHz (for the drive: per unit gμB·B₁ in GHz).
    pub amp: C64,
    /// Transition frequency d_row − d_col in GHz (diagonal-frame rates).
    pub freq: f64,
}

/// Truncated product space with precomputed operators.
#[derive(Debug, Clone)]
pub struct CompositeSpace {
    pub spec1: QuditSpec,
    pub spec2: QuditSpec,
    pub order1: LevelOrder,
    pub order2: LevelOrder,
    /// Retained energy-ordered labels per qudit, ascending.
    pub levels1: Vec<usize>,
    pub levels2: Vec<usize>,
    pub n_max: usize,
    pub b_mt: f64,
    pub omega0_ghz: f64,
    /// Static diagonal energies d_k in GHz (spins + photon at ω₀, incl. ½).
    pub diag: Vec<f64>,
    /// Photon number per basis state.
    pub n_photon: Vec<f64>,
    /// S_z eigenvalue (m) of qudit 1 / qudit 2 per basis state.
    pub sz1_diag: Vec<f64>,
    pub sz2_diag: Vec<f64>,
    /// Off-diagonal 2Gᵢ(a+a†)S_{xi} terms.
    pub coupling_terms: Vec<OffDiagTerm>,
    /// Off-diagonal g₁S_{y1}+g₂S_{y2} terms (amp excludes the μB·B₁(t) factor).
    pub drive_terms: Vec<OffDiagTerm>,
    ops1: SpinOperators,
    ops2: SpinOperators,
}

/// Build the composite space.
pub fn assemble_space(
    spec1: QuditSpec,
    spec2: QuditSpec,
    levels1: &[usize],
    levels2: &[usize],
    n_max: usize,
    b_mt: f64,
    omega0_ghz: f64,
) -> Result<CompositeSpace> {
    spec1.validate()?;
    spec2.validate()?;
    if levels1.is_empty() || levels2.is_empty() {
        return Err(Error::Spec("retained level lists must be nonempty".into()));
    }
    if n_max < 1 {
        return Err(Error::Spec("n_max must be ≥ 1".into()));
    }
    if omega0_ghz <= 0.0 {
        return Err(Error::Spec("resonator frequency must be positive".into()));
    }
    for (levels, spec) in [(levels1, &spec1), (levels2, &spec2)] {
        let d = spec.dim();
        if levels.iter().any(|&l| l >= d) {
            return Err(Error::Spec("retained label outside the qudit spectrum".into()));
        }
        if levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Spec("retained labels must be strictly ascending".into()));
        }
    }
    let order1 = level_order(&spec1, b_mt)?;
    let order2 = level_order(&spec2, b_mt)?;
    let ops1 = build_spin_operators(spec1.spin)?;
    let ops2 = build_spin_operators(spec2.spin)?;

    let n1 = levels1.len();
    let n2 = levels2.len();
    let np = n_max + 1;
    let dim = n1 * n2 * np;

    let mut diag = vec![0.0; dim];
    let mut n_photon = vec![0.0; dim];
    let mut sz1_diag = vec![0.0; dim];
    let mut sz2_diag = vec![0.0; dim];
    for i1 in 0..n1 {
        for i2 in 0..n2 {
            for n in 0..np {
                let k = (i1 * n2 + i2) * np + n;
                diag[k] = order1.energies[levels1[i1]]
                    + order2.energies[levels2[i2]]
                    + omega0_ghz * (n as f64 + 0.5);
                n_photon[k] = n as f64;
                sz1_diag[k] = order1.m_of_p[levels1[i1]];
                sz2_diag[k] = order2.m_of_p[levels2[i2]];
            }
        }
    }

    let mut space = CompositeSpace {
        spec1,
        spec2,
        order1,
        order2,
        levels1: levels1.to_vec(),
        levels2: levels2.to_vec(),
        n_max,
        b_mt,
        omega0_ghz,
        diag,
        n_photon,
        sz1_diag,
        sz2_diag,
        coupling_terms: Vec::new(),
        drive_terms: Vec::new(),
        ops1,
        ops2,
    };
    space.build_off_diag_terms();
    Ok(space)
}

impl CompositeSpace {
    pub fn dim(&self) -> usize {
        self.levels1.len() * self.levels2.len() * (self.n_max + 1)
    }

    /// Flat index of |level₁ slot i1, level₂ slot i2, n⟩.
    pub fn index_of(&self, i1: usize, i2: usize, n: usize) -> usize {
        (i1 * self.levels2.len() + i2) * (self.n_max + 1) + n
    }

    /// Inverse of [`Self::index_of`].
    pub fn labels_of(&self, k: usize) -> (usize, usize, usize) {
        let np = self.n_max + 1;
        let n = k % np;
        let rest = k / np;
        (rest / self.levels2.len(), rest % self.levels2.len(), n)
    }

    /// m value of retained slot `i` on the given qudit.
    pub fn m_of_slot(&self, qudit: u8, i: usize) -> f64 {
        match qudit {
            1 => self.order1.m_of_p[self.levels1[i]],
            _ => self.order2.m_of_p[self.levels2[i]],
        }
    }

    /// Level energy (GHz) of retained slot `i` on the given qudit.
    pub fn energy_of_slot(&self, qudit: u8, i: usize) -> f64 {
        match qudit {
            1 => self.order1.energies[self.levels1[i]],
            _ => self.order2.energies[self.levels2[i]],
        }
    }

    fn retained_op(&self, qudit: u8, full: &Array2<C64>) -> Array2<C64> {
        let (levels, order, spec) = match qudit {
            1 => (&self.levels1, &self.order1, &self.spec1),
            _ => (&self.levels2, &self.order2, &self.spec2),
        };
        let n = levels.len();
        let mut out = Array2::zeros((n, n));
        for (a, &la) in levels.iter().enumerate() {
            for (b, &lb) in levels.iter().enumerate() {
                let ia = (spec.spin - order.m_of_p[la]).round() as usize;
                let ib = (spec.spin - order.m_of_p[lb]).round() as usize;
                out[[a, b]] = full[[ia, ib]];
            }
        }
        out
    }

    fn build_off_diag_terms(&mut self) {
        let n1 = self.levels1.len();
        let n2 = self.levels2.len();
        let np = self.n_max + 1;
        let sx1 = self.retained_op(1, &self.ops1.sx.clone());
        let sx2 = self.retained_op(2, &self.ops2.sx.clone());
        let sy1 = self.retained_op(1, &self.ops1.sy.clone());
        let sy2 = self.retained_op(2, &self.ops2.sy.clone());
        let g1 = self.spec1.g_mhz * 1e-3;
        let g2 = self.spec2.g_mhz * 1e-3;

        let mut coupling = Vec::new();
        let mut drive = Vec::new();
        let push = |terms: &mut Vec<OffDiagTerm>, r: usize, c: usize, amp: C64, diag: &[f64]| {
            if amp.norm() < 1e-15 {
                return;
            }
            let (r, c, amp) = if r < c { (r, c, amp) } else { (c, r, amp.conj()) };
            if let Some(t) = terms.iter_mut().find(|t| t.row == r && t.col == c) {
                t.amp += amp;
            } else {
                terms.push(OffDiagTerm { row: r, col: c, amp, freq: diag[r] - diag[c] });
            }
        };

        for i1 in 0..n1 {
            for j1 in 0..n1 {
                for i2 in 0..n2 {
                    for j2 in 0..n2 {
                        for n in 0..np {
                            for m in 0..np {
                                // photon ladder: ⟨n|a+a†|m⟩
                                let ph = if n + 1 == m {
                                    (m as f64).sqrt()
                                } else if m + 1 == n {
                                    (n as f64).sqrt()
                                } else {
                                    continue;
                                };
                                let r = (i1 * n2 + i2) * np + n;
                                let c = (j1 * n2 + j2) * np + m;
                                if r >= c {
                                    continue;
                                }
                                let mut amp = C64::new(0.0, 0.0);
                                if i2 == j2 {
                                    amp += sx1[[i1, j1]] * 2.0 * g1 * ph;
                                }
                                if i1 == j1 {
                                    amp += sx2[[i2, j2]] * 2.0 * g2 * ph;
                                }
                                push(&mut coupling, r, c, amp, &self.diag);
                            }
                        }
                    }
                }
            }
        }
        for i1 in 0..n1 {
            for j1 in 0..n1 {
                for i2 in 0..n2 {
                    for j2 in 0..n2 {
                        for n in 0..np {
                            let r = (i1 * n2 + i2) * np + n;
                            let c = (j1 * n2 + j2) * np + n;
                            if r >= c {
                                continue;
                            }
                            let mut amp = C64::new(0.0, 0.0);
                            if i2 == j2 {
                                amp += sy1[[i1, j1]] * self.spec1.g;
                            }
                            if i1 == j1 {
                                amp += sy2[[i2, j2]] * self.spec2.g;
                            }
                            push(&mut drive, r, c, amp, &self.diag);
                        }
                    }
                }
            }
        }
        coupling.sort_by_key(|t| (t.row, t.col));
        drive.sort_by_key(|t| (t.row, t.col));
        self.coupling_terms = coupling;
        self.drive_terms = drive;
    }

    /// Dense lab-frame Hamiltonian at time t, in GHz.
    pub fn hamiltonian_at(&self, schedule: &ControlSchedule, t_ns: f64) -> Array2<C64> {
        let dim = self.dim();
        let mut h: Array2<C64> = Array2::zeros((dim, dim));
        let delta = schedule.delta_at(t_ns);
        let shift1 = zeeman_ghz(self.spec1.g, schedule.local_shift_at(t_ns, 1));
        let shift2 = zeeman_ghz(self.spec2.g, schedule.local_shift_at(t_ns, 2));
        for k in 0..dim {
            h[[k, k]] = C64::new(
                self.diag[k]
                    + delta * self.n_photon[k]
                    + shift1 * self.sz1_diag[k]
                    + shift2 * self.sz2_diag[k],
                0.0,
            );
        }
        for term in &self.coupling_terms {
            h[[term.row, term.col]] += term.amp;
            h[[term.col, term.row]] += term.amp.conj();
        }
        let b1 = MU_B_GHZ_PER_T * gauss_to_t(schedule.drive_field_at(t_ns));
        if b1 != 0.0 {
            for term in &self.drive_terms {
                h[[term.row, term.col]] += term.amp * b1;
                h[[term.col, term.row]] += (term.amp * b1).conj();
            }
        }
        h
    }

    /// Pure ground state |ground₁, ground₂⟩ ⊗ |0_ph⟩ as a density matrix.
    pub fn initial_state(&self) -> Array2<C64> {
        let psi = self.basis_vector(0, 0, 0);
        density_from_vector(&psi)
    }

    /// Basis vector |slot i1, slot i2, n⟩.
    pub fn basis_vector(&self, i1: usize, i2: usize, n: usize) -> Array1<C64> {
        let mut v = Array1::zeros(self.dim());
        v[self.index_of(i1, i2, n)] = C64::new(1.0, 0.0);
        v
    }

    /// Normalized zero-photon state from logical amplitudes, indexed
    /// `amps[i1 * levels2.len() + i2]`.
    pub fn logical_state(&self, amps: &[C64]) -> Result<Array1<C64>> {
        let n1 = self.levels1.len();
        let n2 = self.levels2.len();
        if amps.len() != n1 * n2 {
            return Err(Error::Spec(format!(
                "expected {} logical amplitudes, got {}",
                n1 * n2,
                amps.len()
            )));
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-12 {
            return Err(Error::Spec("logical amplitudes have zero norm".into()));
        }
        let mut v = Array1::zeros(self.dim());
        for i1 in 0..n1 {
            for i2 in 0..n2 {
                v[self.index_of(i1, i2, 0)] = amps[i1 * n2 + i2] / norm;
            }
        }
        Ok(v)
    }

    /// Lifted photon annihilation operator.
    pub fn op_a(&self) -> Array2<C64> {
        let np = self.n_max + 1;
        let mut a: Array2<C64> = Array2::zeros((np, np));
        for n in 1..np {
            a[[n - 1, n]] = C64::new((n as f64).sqrt(), 0.0);
        }
        let id12 = eye(self.levels1.len() * self.levels2.len());
        kron(&id12, &a)
    }

    /// Lifted photon number operator a†a.
    pub fn op_number(&self) -> Array2<C64> {
        let a = self.op_a();
        crate::linalg::dagger(&a).dot(&a)
    }

    /// Lifted spin operator for one qudit, projected to the retained levels.
    pub fn op_spin(&self, qudit: u8, which: SpinAxis) -> Array2<C64> {
        let full = match (qudit, which) {
            (1, SpinAxis::X) => &self.ops1.sx,
            (1, SpinAxis::Y) => &self.ops1.sy,
            (1, SpinAxis::Z) => &self.ops1.sz,
            (_, SpinAxis::X) => &self.ops2.sx,
            (_, SpinAxis::Y) => &self.ops2.sy,
            (_, SpinAxis::Z) => &self.ops2.sz,
        };
        let proj = self.retained_op(qudit, &full.clone());
        let np_id = eye(self.n_max + 1);
        match qudit {
            1 => kron(&kron(&proj, &eye(self.levels2.len())), &np_id),
            _ => kron(&kron(&eye(self.levels1.len()), &proj), &np_id),
        }
    }

    /// Projector onto a set of zero-photon logical components.
    pub fn logical_projector(&self, components: &[(usize, usize)]) -> Array2<C64> {
        let mut p: Array2<C64> = Array2::zeros((self.dim(), self.dim()));
        for &(i1, i2) in components {
            let k = self.index_of(i1, i2, 0);
            p[[k, k]] = C64::new(1.0, 0.0);
        }
        p
    }

    /// Largest frequency present: transitions among retained levels, the
    /// resonator over its scheduled range, and all drive carriers. Used by the
    /// integrator step-size policy.
    pub fn max_frequency_ghz(&self, schedule: &ControlSchedule) -> f64 {
        let mut f = schedule.max_carrier_ghz();
        let mut omega_max = self.omega0_ghz;
        for s in &schedule.detunings {
            omega_max = omega_max.max((self.omega0_ghz + s.delta_ghz).abs());
        }
        f = f.max(omega_max);
        for (levels, order) in [(&self.levels1, &self.order1), (&self.levels2, &self.order2)] {
            for &a in levels.iter() {
                for &b in levels.iter() {
                    if (order.m_of_p[a] - order.m_of_p[b]).abs() == 1.0 {
                        f = f.max((order.energies[a] - order.energies[b]).abs());
                    }
                }
            }
        }
        f
    }
}

/// Spin operator axis selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpinAxis {
    X,
    Y,
    Z,
}

/// ρ = ψψ† for a unit vector.
pub fn density_from_vector(psi: &Array1<C64>) -> Array2<C64> {
    let n = psi.len();
    let mut rho = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            rho[[i, j]] = psi[i] * psi[j].conj();
        }
    }
    rho
}
