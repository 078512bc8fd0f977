//! Single-qudit pulse compiler: QR/Givens decomposition of arbitrary
//! unitaries into dipole-allowed two-level rotations, Z-rotation synthesis,
//! routing across the level-connectivity graph, and drive-pulse generation.
//!
//! The compilation primitive is the Givens rotation on an adjacent-m pair,
//!
//!   g(θ, φ) = [[c, s], [−s̄, c]],   c = cos(θ/2),   s = −i sin(θ/2) e^{iφ},
//!
//! written in the (lower-m, higher-m) ordered two-level basis. A unitary is
//! reduced to diagonal form by column-major elimination with such rotations;
//! the residual diagonal phases are synthesized from the exact identity
//! R^Z(θ) = R(π/2, π) R(θ, π/2) R(π/2, 0) = diag(e^{−iθ/2}, e^{iθ/2}).
//!
//! Drive carriers in the generated schedules are referenced to the global
//! t = 0, which implements inter-pulse frame tracking implicitly: the free
//! phases e^{−i2πE_m t} accumulated between pulses are exactly the carrier
//! phases a t-referenced cosine already carries, so consecutive rotations
//! compose in the interaction picture without per-pulse bookkeeping.

use ndarray::Array2;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::schedule::{ControlSchedule, DrivePulse};
use crate::spins::{ladder_coeff, LevelOrder, QuditSpec};
use crate::units::{gauss_to_t, MU_B_GHZ_PER_T};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;
const PI: f64 = std::f64::consts::PI;

/// Two-level rotation g(θ, φ) on the dipole-allowed label pair (p, q), with
/// m_q = m_p + 1. θ is normalized into [0, 2π).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GivensRotation {
    /// Lower-m member of the pair (graph vertex label).
    pub p: usize,
    /// Higher-m member of the pair.
    pub q: usize,
    pub theta: f64,
    pub phi: f64,
}

impl GivensRotation {
    /// Normalized constructor: reduces θ into [0, 2π) using
    /// g(−θ, φ) = g(θ, φ+π) and g(θ+2π, φ) = g(2π−θ, φ+π).
    pub fn new(p: usize, q: usize, theta: f64, phi: f64) -> Self {
        let (mut th, mut ph) = (theta, phi);
        if th < 0.0 {
            th = -th;
            ph += PI;
        }
        th %= 2.0 * TWO_PI;
        if th >= TWO_PI {
            th = 2.0 * TWO_PI - th;
            ph += PI;
        }
        ph = ph.rem_euclid(TWO_PI);
        Self { p, q, theta: th, phi: ph }
    }

    /// Inverse rotation: g(θ, φ)† = g(θ, φ+π).
    pub fn inverse(&self) -> Self {
        Self::new(self.p, self.q, self.theta, self.phi + PI)
    }

    /// The 2×2 block (c, s; −s̄, c) in (p, q) order.
    pub fn block(&self) -> [[C64; 2]; 2] {
        let c = C64::new((self.theta / 2.0).cos(), 0.0);
        let s = C64::new(0.0, -1.0) * C64::from_polar((self.theta / 2.0).sin(), self.phi);
        [[c, s], [-s.conj(), c]]
    }

    /// Embedding into a d-dimensional identity.
    pub fn matrix(&self, d: usize) -> Array2<C64> {
        let mut m = crate::linalg::eye(d);
        let b = self.block();
        m[[self.p, self.p]] = b[0][0];
        m[[self.p, self.q]] = b[0][1];
        m[[self.q, self.p]] = b[1][0];
        m[[self.q, self.q]] = b[1][1];
        m
    }
}

/// Dipole-allowed connectivity over retained qudit labels: edge iff Δm = ±1.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectivityGraph {
    /// m value per vertex label.
    pub m_of_label: Vec<f64>,
    /// Edges (p, q) with m_q = m_p + 1, sorted.
    pub edges: Vec<(usize, usize)>,
}

impl ConnectivityGraph {
    pub fn dim(&self) -> usize {
        self.m_of_label.len()
    }

    pub fn is_edge(&self, p: usize, q: usize) -> bool {
        let (a, b) = if self.m_of_label[p] < self.m_of_label[q] { (p, q) } else { (q, p) };
        self.edges.contains(&(a, b))
    }

    /// Whether every vertex is reachable from vertex 0.
    pub fn is_connected(&self) -> bool {
        let d = self.dim();
        if d == 0 {
            return false;
        }
        let mut seen = vec![false; d];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &(a, b) in &self.edges {
                for (x, y) in [(a, b), (b, a)] {
                    if x == v && !seen[y] {
                        seen[y] = true;
                        stack.push(y);
                    }
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Vertex labels sorted by ascending m (the elimination path).
    pub fn path_order(&self) -> Vec<usize> {
        let mut labs: Vec<usize> = (0..self.dim()).collect();
        labs.sort_by(|&a, &b| self.m_of_label[a].partial_cmp(&self.m_of_label[b]).unwrap());
        labs
    }
}

/// Build the connectivity graph from an m assignment per label.
pub fn build_connectivity(m_of_label: &[f64]) -> Result<ConnectivityGraph> {
    let d = m_of_label.len();
    if d == 0 {
        return Err(Error::Compile("empty label set".into()));
    }
    for i in 0..d {
        for j in i + 1..d {
            if (m_of_label[i] - m_of_label[j]).abs() < 1e-9 {
                return Err(Error::Compile("labels must map to distinct m values".into()));
            }
        }
    }
    let mut edges = Vec::new();
    for i in 0..d {
        for j in 0..d {
            if (m_of_label[j] - m_of_label[i] - 1.0).abs() < 1e-9 {
                edges.push((i, j));
            }
        }
    }
    if edges.is_empty() && d > 1 {
        return Err(Error::Compile("no dipole-allowed transition among the labels".into()));
    }
    edges.sort_unstable();
    Ok(ConnectivityGraph { m_of_label: m_of_label.to_vec(), edges })
}

/// Connectivity graph for retained energy-ordered labels of one qudit.
pub fn connectivity_from_order(order: &LevelOrder, labels: &[usize]) -> Result<ConnectivityGraph> {
    let m: Vec<f64> = labels.iter().map(|&p| order.m_of_p[p]).collect();
    build_connectivity(&m)
}

/// Compiled single-qudit program: time-ordered rotations preceded by residual
/// diagonal phases (applied first), plus a tracked global phase.
#[derive(Debug, Clone, PartialEq)]
pub struct GateProgram {
    /// Time-ordered rotations (index 0 acts first).
    pub rotations: Vec<GivensRotation>,
    /// Residual diagonal phases λ_p per label, applied before the rotations.
    pub diagonal_phases: Vec<f64>,
    /// Logical multi-qubit basis index → qudit label.
    pub level_map: Vec<usize>,
    /// Unobservable global phase α: the program realizes e^{iα}·U.
    pub global_phase: f64,
    /// m assignment per label, carried for pulse synthesis.
    pub m_of_label: Vec<f64>,
}

impl GateProgram {
    pub fn rotation_count(&self) -> usize {
        self.rotations.len()
    }
}

/// Decompose a d×d unitary (in label basis) into adjacent-pair Givens
/// rotations plus residual diagonal phases.
///
/// Column-major elimination: for each column, sub-diagonal entries (in the
/// ascending-m path order) are zeroed bottom-up by rotations on path-adjacent
/// pairs; the remaining unitary is diagonal. Rotation count ≤ d(d−1)/2
/// (i.e. C = 1 in the ≤ C·d² bound; Z synthesis adds at most 3(d−1) more).
pub fn givens_decompose(u: &Array2<C64>, graph: &ConnectivityGraph) -> Result<GateProgram> {
    let d = graph.dim();
    if u.nrows() != d || u.ncols() != d {
        return Err(Error::Compile(format!(
            "unitary dimension {}×{} does not match the {d}-vertex graph",
            u.nrows(),
            u.ncols()
        )));
    }
    if crate::linalg::unitarity_defect(u) > 1e-10 {
        return Err(Error::Compile("input matrix is not unitary to 1e-10".into()));
    }
    if !graph.is_connected() {
        return Err(Error::Compile("connectivity graph is disconnected".into()));
    }
    let path = graph.path_order();
    // V in path coordinates: V[i][j] = U[path[i]][path[j]].
    let mut v = Array2::zeros((d, d));
    for i in 0..d {
        for j in 0..d {
            v[[i, j]] = u[[path[i], path[j]]];
        }
    }
    // Elimination rotations in application order (left-multiplied onto V).
    let mut applied: Vec<(usize, f64, f64)> = Vec::new();
    for j in 0..d {
        for k in (j..d.saturating_sub(1)).rev() {
            let a = v[[k, j]];
            let b = v[[k + 1, j]];
            if b.norm() < 1e-14 {
                continue;
            }
            let theta = 2.0 * b.norm().atan2(a.norm());
            let phi = a.arg() - b.arg() + PI / 2.0;
            // Apply g to rows k, k+1 of V.
            let c = C64::new((theta / 2.0).cos(), 0.0);
            let s = C64::new(0.0, -1.0) * C64::from_polar((theta / 2.0).sin(), phi);
            for col in 0..d {
                let top = v[[k, col]];
                let bot = v[[k + 1, col]];
                v[[k, col]] = c * top + s * bot;
                v[[k + 1, col]] = -s.conj() * top + c * bot;
            }
            v[[k + 1, j]] = C64::new(0.0, 0.0);
            applied.push((k, theta, phi));
        }
    }
    // The remainder must be diagonal with unit-modulus entries.
    let mut lambdas_path = vec![0.0; d];
    for i in 0..d {
        for j in 0..d {
            if i != j && v[[i, j]].norm() > 1e-9 {
                return Err(Error::Numerical(
                    "Givens elimination left a non-diagonal residual".into(),
                ));
            }
        }
        if (v[[i, i]].norm() - 1.0).abs() > 1e-9 {
            return Err(Error::Numerical("residual diagonal is not unimodular".into()));
        }
        lambdas_path[i] = v[[i, i]].arg();
    }
    // U = g₁† g₂† … g_N† D, so time order is D first, then g_N†, …, g₁†.
    let mut rotations = Vec::with_capacity(applied.len());
    for &(k, theta, phi) in applied.iter().rev() {
        let rot = GivensRotation::new(path[k], path[k + 1], theta, phi).inverse();
        if rot.theta > 1e-12 && (rot.theta - TWO_PI).abs() > 1e-12 {
            rotations.push(rot);
        }
    }
    let mut diagonal_phases = vec![0.0; d];
    for i in 0..d {
        diagonal_phases[path[i]] = lambdas_path[i];
    }
    Ok(GateProgram {
        rotations,
        diagonal_phases,
        level_map: (0..d).collect(),
        global_phase: 0.0,
        m_of_label: graph.m_of_label.clone(),
    })
}

/// The three-rotation synthesis of R^Z(θ) = diag(e^{−iθ/2}, e^{iθ/2}) on an
/// adjacent pair, returned in time order:
/// R(π/2, 0), then R(θ, π/2), then R(π/2, π).
pub fn synthesize_z_rotation(theta: f64, p: usize, q: usize) -> Vec<GivensRotation> {
    vec![
        GivensRotation::new(p, q, PI / 2.0, 0.0),
        GivensRotation::new(p, q, theta, PI / 2.0),
        GivensRotation::new(p, q, PI / 2.0, PI),
    ]
}

/// Expand the residual diagonal of a program into physical Z-rotation chains,
/// returning an equivalent program with empty diagonal.
///
/// The phases are realized up to a global phase: with C = −mean(λ), the chain
/// produces diag(e^{i(λ_p + C)}) and the program's global phase absorbs −C.
pub fn synthesize_diagonal(program: &GateProgram) -> GateProgram {
    let d = program.diagonal_phases.len();
    let graph = ConnectivityGraph {
        m_of_label: program.m_of_label.clone(),
        edges: Vec::new(),
    };
    let path = graph.path_order();
    let lam: Vec<f64> = path.iter().map(|&p| program.diagonal_phases[p]).collect();
    let c_shift = -lam.iter().sum::<f64>() / d as f64;
    // z_k(θ) = diag(…, e^{−iθ/2} at k, e^{+iθ/2} at k+1, …) telescoped so that
    // position j carries phase λ_j + C: θ_k = −2·Σ_{i≤k} (λ_i + C).
    let mut z_rots: Vec<GivensRotation> = Vec::new();
    let mut partial = 0.0;
    for k in 0..d.saturating_sub(1) {
        partial += lam[k] + c_shift;
        let mut theta_k = (-2.0 * partial).rem_euclid(2.0 * TWO_PI);
        if theta_k.abs() < 1e-12 || (theta_k - 2.0 * TWO_PI).abs() < 1e-12 {
            continue;
        }
        let (p, q) = (path[k], path[k + 1]);
        if (theta_k - TWO_PI).abs() < 1e-9 {
            // diag(−1, −1) on the pair is not a single rotation: split in two.
            theta_k /= 2.0;
            z_rots.extend(synthesize_z_rotation(theta_k, p, q));
        }
        z_rots.extend(synthesize_z_rotation(theta_k, p, q));
    }
    let mut rotations = z_rots;
    rotations.extend(program.rotations.iter().cloned());
    GateProgram {
        rotations,
        diagonal_phases: vec![0.0; d],
        level_map: program.level_map.clone(),
        global_phase: program.global_phase - c_shift,
        m_of_label: program.m_of_label.clone(),
    }
}

/// Implement a two-level rotation on a non-adjacent pair by conjugating with
/// a chain of π swaps along the shortest connectivity path (ties broken by
/// the lower-m route; on the physical Δm = ±1 line the path is unique).
///
/// Returned in time order; the product equals g(θ, φ) embedded on (p, q),
/// acting as identity on every other level.
pub fn route_rotation(
    graph: &ConnectivityGraph,
    p: usize,
    q: usize,
    theta: f64,
    phi: f64,
) -> Result<Vec<GivensRotation>> {
    if p == q || p >= graph.dim() || q >= graph.dim() {
        return Err(Error::Compile("routing requires two distinct valid labels".into()));
    }
    // Orient the pair by ascending m, mirroring the Givens block convention.
    let (lo, hi) = if graph.m_of_label[p] < graph.m_of_label[q] { (p, q) } else { (q, p) };
    if graph.is_edge(lo, hi) {
        return Ok(vec![GivensRotation::new(lo, hi, theta, phi)]);
    }
    // BFS shortest path lo → hi, neighbor order by ascending m.
    let d = graph.dim();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| graph.m_of_label[a].partial_cmp(&graph.m_of_label[b]).unwrap());
    let mut prev = vec![usize::MAX; d];
    let mut queue = std::collections::VecDeque::from([lo]);
    prev[lo] = lo;
    while let Some(v) = queue.pop_front() {
        if v == hi {
            break;
        }
        for &w in &order {
            if prev[w] == usize::MAX && graph.is_edge(v.min(w), v.max(w)) && v != w {
                prev[w] = v;
                queue.push_back(w);
            }
        }
    }
    if prev[hi] == usize::MAX {
        return Err(Error::Compile("no connectivity path between the pair".into()));
    }
    let mut chain = vec![hi];
    while *chain.last().unwrap() != lo {
        chain.push(prev[*chain.last().unwrap()]);
    }
    chain.reverse(); // lo = v₀, …, v_k = hi

    // W moves |lo⟩ to the neighbor of hi through π swaps; the inner rotation
    // parameters are read off the conjugated target block numerically.
    let mut swaps: Vec<GivensRotation> = Vec::new();
    for w in chain.windows(2).take(chain.len() - 2) {
        let (a, b) = if graph.m_of_label[w[0]] < graph.m_of_label[w[1]] {
            (w[0], w[1])
        } else {
            (w[1], w[0])
        };
        swaps.push(GivensRotation::new(a, b, PI, 0.0));
    }
    let target = GivensRotation::new(lo, hi, theta, phi);
    let mut w_mat = crate::linalg::eye(d);
    for s in &swaps {
        w_mat = s.matrix(d).dot(&w_mat);
    }
    let inner_full = w_mat
        .dot(&target.matrix(d))
        .dot(&crate::linalg::dagger(&w_mat));
    let carrier = chain[chain.len() - 2];
    let (ilo, ihi) = if graph.m_of_label[carrier] < graph.m_of_label[hi] {
        (carrier, hi)
    } else {
        (hi, carrier)
    };
    let c = inner_full[[ilo, ilo]];
    let s = inner_full[[ilo, ihi]];
    if c.im.abs() > 1e-10 {
        return Err(Error::Numerical("routed block is not in Givens form".into()));
    }
    let inner_theta = 2.0 * s.norm().atan2(c.re);
    let inner_phi = if s.norm() > 1e-14 { s.arg() + PI / 2.0 } else { 0.0 };
    let inner = GivensRotation::new(ilo, ihi, inner_theta, inner_phi);

    let mut seq = swaps.clone();
    seq.push(inner);
    for sw in swaps.iter().rev() {
        seq.push(sw.inverse());
    }
    Ok(seq)
}

/// Ordered product of the program: e^{iα} · R_N ⋯ R_1 · diag(e^{iλ}).
pub fn reconstruct_unitary(program: &GateProgram) -> Array2<C64> {
    let d = program.m_of_label.len();
    let mut m: Array2<C64> = Array2::zeros((d, d));
    for j in 0..d {
        m[[j, j]] = C64::from_polar(1.0, program.diagonal_phases[j]);
    }
    for rot in &program.rotations {
        m = rot.matrix(d).dot(&m);
    }
    let g = C64::from_polar(1.0, program.global_phase);
    m.mapv_into(|z| z * g)
}

/// Pulse-generation options.
#[derive(Debug, Clone, Copy)]
pub struct PulseOptions {
    /// Drive amplitude B₁, G.
    pub b1_gauss: f64,
    /// Idle gap between consecutive pulses, ns.
    pub gap_ns: f64,
    /// Schedule start time, ns.
    pub t_start_ns: f64,
}

impl Default for PulseOptions {
    fn default() -> Self {
        Self { b1_gauss: 2.0, gap_ns: 1.0, t_start_ns: 0.0 }
    }
}

/// Synthesize the drive-pulse schedule of a program on one qudit.
///
/// Each rotation becomes a rectangular pulse at the transition carrier
/// ω = |E_m − E_{m+1}| with duration τ = θ / (2π·g·μB·B₁·|⟨m|S_y|m+1⟩|). The
/// residual diagonal is expanded into Z chains first. Pulses whose duration
/// would fall below 10 carrier periods (where the envelope approximation
/// breaks) are stretched by lowering that pulse's amplitude to the longest
/// admissible value.
///
/// The drive-phase mapping from the rotation phase depends on which member of
/// the pair is higher in energy: for m ≥ 0 transitions the higher-energy level
/// has m+1 and φ_drive = φ − π/2; for m < 0 the ordering inverts and
/// φ_drive = π/2 − φ.
pub fn rotations_to_pulses(
    program: &GateProgram,
    spec: &QuditSpec,
    order: &LevelOrder,
    options: &PulseOptions,
) -> Result<ControlSchedule> {
    if options.b1_gauss <= 0.0 {
        return Err(Error::Compile("drive amplitude must be positive".into()));
    }
    let flat = if program.diagonal_phases.iter().any(|&l| l.abs() > 1e-12) {
        synthesize_diagonal(program)
    } else {
        program.clone()
    };
    let mut sched = ControlSchedule::new(options.t_start_ns);
    let mut t = options.t_start_ns;
    for rot in &flat.rotations {
        if rot.theta < 1e-12 {
            continue;
        }
        let m_lo = flat.m_of_label[rot.p];
        let m_hi = flat.m_of_label[rot.q];
        if (m_hi - m_lo - 1.0).abs() > 1e-9 {
            return Err(Error::Compile(format!(
                "rotation on ({}, {}) is not a dipole-allowed transition",
                rot.p, rot.q
            )));
        }
        let e_lo = energy_of_m(spec, order, m_lo)?;
        let e_hi = energy_of_m(spec, order, m_hi)?;
        let freq = (e_hi - e_lo).abs();
        let mel = ladder_coeff(spec.spin, m_lo) / 2.0;
        if mel < 1e-12 {
            return Err(Error::Compile("vanishing transition matrix element".into()));
        }
        let rabi_per_gauss = spec.g * MU_B_GHZ_PER_T * gauss_to_t(1.0) * mel; // GHz per G
        let mut b1 = options.b1_gauss;
        let mut dur = rot.theta / (TWO_PI * rabi_per_gauss * b1);
        let min_dur = 10.0 / freq;
        if dur < min_dur {
            b1 *= dur / min_dur;
            dur = min_dur;
        }
        // Energy ordering fixes the sign of the phase mapping.
        let phase = if e_hi > e_lo { rot.phi - PI / 2.0 } else { PI / 2.0 - rot.phi };
        sched.add_pulse(DrivePulse {
            b1_gauss: b1,
            freq_ghz: freq,
            phase: phase.rem_euclid(TWO_PI),
            t0_ns: t,
            dur_ns: dur,
        })?;
        t += dur + options.gap_ns;
    }
    sched.span_ns = sched.span_ns.max(t - options.gap_ns).max(options.t_start_ns);
    Ok(sched)
}

fn energy_of_m(spec: &QuditSpec, order: &LevelOrder, m: f64) -> Result<f64> {
    for (p, &mp) in order.m_of_p.iter().enumerate() {
        if (mp - m).abs() < 1e-9 {
            return Ok(order.energies[p]);
        }
    }
    let _ = spec;
    Err(Error::Compile(format!("m = {m} not present in the level order")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{eye, max_abs_diff, max_abs_diff_up_to_phase, orthonormalize_columns};
    use crate::spins::level_order;
    use approx::assert_relative_eq;
    use ndarray::Array2;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn q1() -> QuditSpec {
        QuditSpec::new(10.0, 7.1, 2.0, 0.090).unwrap()
    }

    fn dj_graph() -> ConnectivityGraph {
        // Logical {0,1,2,3} ↔ m {0,+1,−1,−2}.
        build_connectivity(&[0.0, 1.0, -1.0, -2.0]).unwrap()
    }

    fn five_graph() -> ConnectivityGraph {
        // Energy-ordered labels {0,−1,+1,−2,+2}.
        build_connectivity(&[0.0, -1.0, 1.0, -2.0, 2.0]).unwrap()
    }

    fn random_unitary(rng: &mut ChaCha8Rng, d: usize) -> Array2<C64> {
        let mut m = Array2::zeros((d, d));
        for i in 0..d {
            for j in 0..d {
                m[[i, j]] = C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
            }
        }
        orthonormalize_columns(&m).unwrap()
    }

    #[test]
    fn connectivity_examples() {
        let g = dj_graph();
        assert_eq!(g.edges, vec![(0, 1), (2, 0), (3, 2)]);
        assert!(g.is_connected());
        let g2 = build_connectivity(&[-0.5, 0.5]).unwrap();
        assert_eq!(g2.edges, vec![(0, 1)]);
        let g5 = five_graph();
        let mut e = g5.edges.clone();
        e.sort_unstable();
        assert_eq!(e, vec![(0, 2), (1, 0), (2, 4), (3, 1)]);
        // Disconnected m set rejected at decompose time.
        let gap = build_connectivity(&[0.0, 2.0]).unwrap_err();
        let _ = gap;
    }

    #[test]
    fn z_synthesis_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let theta: f64 = (rng.gen::<f64>() - 0.5) * 4.0 * TWO_PI;
            let rots = synthesize_z_rotation(theta, 0, 1);
            let mut m = eye(2);
            for r in &rots {
                m = r.matrix(2).dot(&m);
            }
            let mut target: Array2<C64> = Array2::zeros((2, 2));
            target[[0, 0]] = C64::from_polar(1.0, -theta / 2.0);
            target[[1, 1]] = C64::from_polar(1.0, theta / 2.0);
            assert!(
                max_abs_diff_up_to_phase(&m, &target) < 1e-10,
                "θ = {theta}"
            );
        }
    }

    #[test]
    fn identity_compiles_to_empty_program() {
        let g = dj_graph();
        let prog = givens_decompose(&eye(4), &g).unwrap();
        assert!(prog.rotations.is_empty());
        assert!(prog.diagonal_phases.iter().all(|&l| l.abs() < 1e-12));
    }

    #[test]
    fn single_rotation_is_a_fixed_point() {
        let g = dj_graph();
        let rot = GivensRotation::new(0, 1, 1.234, 0.77);
        let prog = givens_decompose(&rot.matrix(4), &g).unwrap();
        let recon = reconstruct_unitary(&prog);
        assert!(max_abs_diff_up_to_phase(&recon, &rot.matrix(4)) < 1e-10);
        assert_eq!(prog.rotations.len(), 1);
        assert_relative_eq!(prog.rotations[0].theta, 1.234, epsilon = 1e-10);
    }

    #[test]
    fn round_trip_100_random_unitaries() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let graphs = [
            build_connectivity(&[-0.5, 0.5]).unwrap(),
            build_connectivity(&[0.0, -1.0, 1.0]).unwrap(),
            dj_graph(),
            five_graph(),
        ];
        for trial in 0..100 {
            let g = &graphs[trial % 4];
            let d = g.dim();
            let u = random_unitary(&mut rng, d);
            let prog = givens_decompose(&u, g).unwrap();
            assert!(prog.rotation_count() <= d * (d - 1) / 2);
            let recon = reconstruct_unitary(&prog);
            let err = max_abs_diff_up_to_phase(&recon, &u);
            assert!(err < 1e-8, "trial {trial} d={d}: round-trip error {err:.2e}");
            // The fully synthesized (diagonal-free) program agrees too.
            let flat = synthesize_diagonal(&prog);
            assert!(flat.rotation_count() <= d * (d - 1) / 2 + 3 * (d - 1) + 3);
            let recon2 = reconstruct_unitary(&flat);
            let err2 = max_abs_diff(&recon2, &recon);
            assert!(err2 < 1e-8, "trial {trial}: Z-synthesis error {err2:.2e}");
        }
    }

    #[test]
    fn non_unitary_input_rejected() {
        let g = dj_graph();
        let mut m = eye(4);
        m[[0, 0]] = C64::new(1.1, 0.0);
        assert!(givens_decompose(&m, &g).is_err());
    }

    #[test]
    fn disconnected_graph_rejected() {
        let g = ConnectivityGraph { m_of_label: vec![0.0, 2.0], edges: vec![] };
        assert!(givens_decompose(&eye(2), &g).is_err());
    }

    #[test]
    fn routing_matches_matrix_oracle() {
        let g = dj_graph();
        // DJ pair (1, 2): m +1 ↔ m −1, routed through m 0 (label 0).
        let (theta, phi) = (0.9, 1.7);
        let seq = route_rotation(&g, 1, 2, theta, phi).unwrap();
        assert_eq!(seq.len(), 3);
        let mut m = eye(4);
        for r in &seq {
            m = r.matrix(4).dot(&m);
        }
        // Target: g(θ,φ) on the (2, 1) pair in ascending-m order.
        let target = GivensRotation::new(2, 1, theta, phi).matrix(4);
        assert!(max_abs_diff(&m, &target) < 1e-10);

        // Pair (1, 4) on the 5-level graph routes via 0 and 2.
        let g5 = five_graph();
        let seq2 = route_rotation(&g5, 1, 4, 0.6, -0.3).unwrap();
        assert_eq!(seq2.len(), 5);
        let mut m2 = eye(5);
        for r in &seq2 {
            m2 = r.matrix(5).dot(&m2);
        }
        let target2 = GivensRotation::new(1, 4, 0.6, -0.3).matrix(5);
        assert!(max_abs_diff(&m2, &target2) < 1e-10);

        // Adjacent pair passes through.
        let seq3 = route_rotation(&g, 0, 1, 0.4, 0.1).unwrap();
        assert_eq!(seq3.len(), 1);
    }

    #[test]
    fn pulse_duration_examples() {
        // π pulse on m0 ↔ m+1 of qudit 1 at B₁ = 2 G: τ ≈ 17.03 ns.
        let spec = q1();
        let order = level_order(&spec, 50.0).unwrap();
        let g = build_connectivity(&[0.0, 1.0]).unwrap();
        let prog = GateProgram {
            rotations: vec![GivensRotation::new(0, 1, PI, 0.0)],
            diagonal_phases: vec![0.0; 2],
            level_map: vec![0, 1],
            global_phase: 0.0,
            m_of_label: g.m_of_label.clone(),
        };
        let sched = rotations_to_pulses(
            &prog,
            &spec,
            &order,
            &PulseOptions { b1_gauss: 2.0, gap_ns: 1.0, t_start_ns: 0.0 },
        )
        .unwrap();
        assert_eq!(sched.pulses.len(), 1);
        assert_relative_eq!(sched.pulses[0].dur_ns, 17.034, epsilon = 5e-3);
        assert_relative_eq!(sched.pulses[0].freq_ghz, 8.4996245, epsilon = 1e-6);

        // Tiny rotations are pruned.
        let prog0 = GateProgram {
            rotations: vec![GivensRotation::new(0, 1, 1e-13, 0.0)],
            ..prog.clone()
        };
        let s0 = rotations_to_pulses(&prog0, &spec, &order, &PulseOptions::default()).unwrap();
        assert!(s0.pulses.is_empty());

        // Short pulses are stretched to 10 carrier periods with lower B₁.
        let prog_small = GateProgram {
            rotations: vec![GivensRotation::new(0, 1, 0.01, 0.0)],
            ..prog.clone()
        };
        let ss = rotations_to_pulses(&prog_small, &spec, &order, &PulseOptions::default()).unwrap();
        assert_relative_eq!(ss.pulses[0].dur_ns, 10.0 / 8.4996245, epsilon = 1e-9);
        assert!(ss.pulses[0].b1_gauss < 2.0);
    }

    fn oracle_space() -> crate::composite::CompositeSpace {
        let q2 = QuditSpec::new(10.0, 7.7, 2.0, 0.090).unwrap();
        crate::composite::assemble_space(q1(), q2, &[0, 1, 2, 3, 4], &[0], 1, 50.0, 7.5).unwrap()
    }

    /// Evolve a schedule on the 5-level oracle space from a zero-photon spin
    /// state and return the final interaction-picture state.
    fn evolve_closed(
        space: &crate::composite::CompositeSpace,
        sched: &ControlSchedule,
        amps: &[C64],
    ) -> ndarray::Array1<C64> {
        let psi0 = space.logical_state(amps).unwrap();
        let traj = crate::lindblad::evolve_vector(
            &psi0,
            space,
            sched,
            &crate::lindblad::EvolveOptions::default(),
        )
        .unwrap();
        traj.final_state().clone()
    }

    #[test]
    fn pulse_level_oracle_single_rotations() {
        // A compiled pulse must reproduce the ideal Givens matrix on random
        // initial states with infidelity ≤ 1e-3 at B₁ = 2 G, including pairs
        // where the higher-energy level has the lower m.
        let spec = q1();
        let order = level_order(&spec, 50.0).unwrap();
        let space = oracle_space();
        let graph = connectivity_from_order(&order, &[0, 1, 2, 3, 4]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        // (p, q) pairs in ascending-m order: (m0, m+1), (m−1, m0), (m−2, m−1).
        for &(p, q) in &[(0usize, 2usize), (1, 0), (3, 1)] {
            let rot = GivensRotation::new(p, q, 1.9, 0.7);
            let prog = GateProgram {
                rotations: vec![rot],
                diagonal_phases: vec![0.0; 5],
                level_map: (0..5).collect(),
                global_phase: 0.0,
                m_of_label: graph.m_of_label.clone(),
            };
            let sched = rotations_to_pulses(&prog, &spec, &order, &PulseOptions::default()).unwrap();
            let ideal = rot.matrix(5);
            for _ in 0..7 {
                let amps: Vec<C64> = (0..5)
                    .map(|_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
                    .collect();
                let norm: f64 = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                let amps: Vec<C64> = amps.iter().map(|z| z / norm).collect();
                let out = evolve_closed(&space, &sched, &amps);
                let mut target: Vec<C64> = vec![C64::new(0.0, 0.0); 5];
                for i in 0..5 {
                    for j in 0..5 {
                        target[i] += ideal[[i, j]] * amps[j];
                    }
                }
                let mut overlap = C64::new(0.0, 0.0);
                for i in 0..5 {
                    overlap += target[i].conj() * out[space.index_of(i, 0, 0)];
                }
                let infid = 1.0 - overlap.norm_sqr();
                assert!(infid < 1e-3, "pair ({p},{q}): infidelity {infid:.2e}");
            }
        }
    }

    #[test]
    fn pulse_level_oracle_full_program() {
        // A multi-pulse compiled program (QR + Z synthesis) reproduces the
        // target 3-level unitary under closed-system evolution.
        let spec = q1();
        let order = level_order(&spec, 50.0).unwrap();
        let space = oracle_space();
        let graph = build_connectivity(&[0.0, -1.0, 1.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let u = random_unitary(&mut rng, 3);
        let prog = givens_decompose(&u, &graph).unwrap();
        let sched = rotations_to_pulses(&prog, &spec, &order, &PulseOptions::default()).unwrap();
        let recon = reconstruct_unitary(&prog);
        for _ in 0..3 {
            let amps3: Vec<C64> = {
                let raw: Vec<C64> = (0..3)
                    .map(|_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
                    .collect();
                let n: f64 = raw.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                raw.iter().map(|z| z / n).collect()
            };
            let mut amps5 = vec![C64::new(0.0, 0.0); 5];
            amps5[..3].copy_from_slice(&amps3);
            let out = evolve_closed(&space, &sched, &amps5);
            let mut target = vec![C64::new(0.0, 0.0); 3];
            for i in 0..3 {
                for j in 0..3 {
                    target[i] += recon[[i, j]] * amps3[j];
                }
            }
            let mut overlap = C64::new(0.0, 0.0);
            for i in 0..3 {
                overlap += target[i].conj() * out[space.index_of(i, 0, 0)];
            }
            let infid = 1.0 - overlap.norm_sqr();
            assert!(infid < 2e-3, "program infidelity {infid:.2e}");
        }
    }

    #[test]
    fn leakage_grows_with_drive_amplitude() {
        // Driving harder speeds the gate but strictly increases leakage out of
        // the addressed pair on the 5-level qudit.
        let spec = q1();
        let order = level_order(&spec, 50.0).unwrap();
        let space = oracle_space();
        let graph = connectivity_from_order(&order, &[0, 1, 2, 3, 4]).unwrap();
        let leakage_at = |b1: f64| -> f64 {
            let prog = GateProgram {
                rotations: vec![GivensRotation::new(0, 2, PI, 0.0)],
                diagonal_phases: vec![0.0; 5],
                level_map: (0..5).collect(),
                global_phase: 0.0,
                m_of_label: graph.m_of_label.clone(),
            };
            let opts = PulseOptions { b1_gauss: b1, gap_ns: 0.0, t_start_ns: 0.0 };
            let sched = rotations_to_pulses(&prog, &spec, &order, &opts).unwrap();
            let mut amps = vec![C64::new(0.0, 0.0); 5];
            amps[0] = C64::new(1.0, 0.0);
            let out = evolve_closed(&space, &sched, &amps);
            let kept: f64 = [0usize, 2]
                .iter()
                .map(|&i| out[space.index_of(i, 0, 0)].norm_sqr())
                .sum();
            1.0 - kept
        };
        let low = leakage_at(2.0);
        let high = leakage_at(20.0);
        assert!(high > low, "leakage {high:.2e} at 20 G vs {low:.2e} at 2 G");
    }

    #[test]
    fn larger_b1_shortens_schedule_proportionally() {
        let spec = q1();
        let order = level_order(&spec, 50.0).unwrap();
        let g = dj_graph();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = random_unitary(&mut rng, 4);
        let prog = givens_decompose(&u, &g).unwrap();
        let total = |b1: f64| -> f64 {
            let s = rotations_to_pulses(
                &prog,
                &spec,
                &order,
                &PulseOptions { b1_gauss: b1, gap_ns: 0.0, t_start_ns: 0.0 },
            )
            .unwrap();
            s.pulses.iter().map(|p| p.dur_ns).sum()
        };
        let t1 = total(1.0);
        let t5 = total(5.0);
        assert!(t5 < t1);
        // Proportional up to the few pulses pinned at the 10-period floor.
        assert!((t1 / t5 - 5.0).abs() < 0.8, "ratio {}", t1 / t5);
    }
}
