//! Multi-qubit circuit descriptions and their unitaries.
//!
//! Circuits act on n qubits encoded in a single qudit: logical basis index
//! ℓ = Σ bᵢ 2^{n−1−i} (qubit 0 is the most significant bit). A circuit file
//! is line-oriented:
//!
//! ```text
//! qubits 2
//! x 1
//! h 0
//! cx 0 1
//! rz 0 0.785398
//! matrix
//! 1 0 0 0
//! 0 1 0 0
//! 0 0 0 1
//! 0 0 1 0
//! ```
//!
//! `matrix` is followed by 2ⁿ rows of 2ⁿ whitespace-separated complex entries
//! (`a+bi` form). `#` starts a comment. Compilation maps the logical basis
//! onto qudit m levels and hands the resulting unitary to the Givens engine.

use ndarray::Array2;
use num_complex::Complex64 as C64;

use crate::compiler::{build_connectivity, givens_decompose, GateProgram};
use crate::error::{Error, Result};
use crate::linalg::eye;

/// One circuit instruction.
#[derive(Debug, Clone, PartialEq)]
pub enum Gate {
    X(usize),
    H(usize),
    RX(usize, f64),
    RY(usize, f64),
    RZ(usize, f64),
    CX(usize, usize),
    /// Raw unitary on the full register.
    Matrix(Array2<C64>),
}

/// Parsed circuit: qubit count plus time-ordered gates.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    pub n_qubits: usize,
    pub gates: Vec<Gate>,
}

impl Circuit {
    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    /// Product unitary of the gate list (index 0 acts first).
    pub fn unitary(&self) -> Result<Array2<C64>> {
        let d = self.dim();
        let mut u = eye(d);
        for g in &self.gates {
            u = gate_matrix(g, self.n_qubits)?.dot(&u);
        }
        Ok(u)
    }
}

/// Dense register matrix of one gate.
pub fn gate_matrix(gate: &Gate, n_qubits: usize) -> Result<Array2<C64>> {
    let d = 1 << n_qubits;
    let single = |q: usize, m: [[C64; 2]; 2]| -> Result<Array2<C64>> {
        if q >= n_qubits {
            return Err(Error::Spec(format!("qubit {q} out of range for {n_qubits} qubits")));
        }
        let mut out = Array2::zeros((d, d));
        let bit = n_qubits - 1 - q;
        for col in 0..d {
            let b = (col >> bit) & 1;
            for (a, &amp) in [m[0][b], m[1][b]].iter().enumerate() {
                let row = (col & !(1 << bit)) | (a << bit);
                out[[row, col]] += amp;
            }
        }
        Ok(out)
    };
    let zero = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    match gate {
        Gate::X(q) => single(*q, [[zero, one], [one, zero]]),
        Gate::H(q) => {
            let h = C64::new(1.0 / 2f64.sqrt(), 0.0);
            single(*q, [[h, h], [h, -h]])
        }
        Gate::RX(q, t) => {
            let c = C64::new((t / 2.0).cos(), 0.0);
            let s = C64::new(0.0, -(t / 2.0).sin());
            single(*q, [[c, s], [s, c]])
        }
        Gate::RY(q, t) => {
            let c = C64::new((t / 2.0).cos(), 0.0);
            let s = C64::new((t / 2.0).sin(), 0.0);
            single(*q, [[c, -s], [s, c]])
        }
        Gate::RZ(q, t) => {
            let lo = C64::from_polar(1.0, -t / 2.0);
            let hi = C64::from_polar(1.0, t / 2.0);
            single(*q, [[lo, zero], [zero, hi]])
        }
        Gate::CX(c, t) => {
            if *c >= n_qubits || *t >= n_qubits || c == t {
                return Err(Error::Spec("invalid CX qubit indices".into()));
            }
            let cb = n_qubits - 1 - c;
            let tb = n_qubits - 1 - t;
            let mut out = Array2::zeros((d, d));
            for col in 0..d {
                let row = if (col >> cb) & 1 == 1 { col ^ (1 << tb) } else { col };
                out[[row, col]] = one;
            }
            Ok(out)
        }
        Gate::Matrix(m) => {
            if m.nrows() != d || m.ncols() != d {
                return Err(Error::Spec(format!(
                    "raw matrix is {}×{}, expected {d}×{d}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            if crate::linalg::unitarity_defect(m) > 1e-10 {
                return Err(Error::Spec("raw matrix is not unitary".into()));
            }
            Ok(m.clone())
        }
    }
}

/// Parse the line-oriented circuit format.
pub fn parse_circuit(text: &str) -> Result<Circuit> {
    let mut n_qubits: Option<usize> = None;
    let mut gates = Vec::new();
    let mut lines = text.lines().enumerate().peekable();
    while let Some((lineno, raw)) = lines.next() {
        let line = raw.split('#').next().unwrap_or("").trim().to_lowercase();
        if line.is_empty() {
            continue;
        }
        let mut tok = line.split_whitespace();
        let head = tok.next().unwrap();
        let bad = |what: &str| Error::Config(format!("line {}: {what}", lineno + 1));
        let arg_q = |tok: &mut dyn Iterator<Item = &str>| -> Result<usize> {
            tok.next()
                .ok_or_else(|| bad("missing qubit index"))?
                .parse()
                .map_err(|_| bad("bad qubit index"))
        };
        match head {
            "qubits" => {
                let n: usize = tok
                    .next()
                    .ok_or_else(|| bad("missing qubit count"))?
                    .parse()
                    .map_err(|_| bad("bad qubit count"))?;
                if n == 0 || n > 8 {
                    return Err(bad("qubit count must be in 1..=8"));
                }
                n_qubits = Some(n);
            }
            "x" | "h" | "cx" | "rx" | "ry" | "rz" | "matrix" => {
                let n = n_qubits.ok_or_else(|| bad("`qubits N` must come first"))?;
                match head {
                    "x" => gates.push(Gate::X(arg_q(&mut tok)?)),
                    "h" => gates.push(Gate::H(arg_q(&mut tok)?)),
                    "cx" => {
                        let c = arg_q(&mut tok)?;
                        let t = arg_q(&mut tok)?;
                        gates.push(Gate::CX(c, t));
                    }
                    "rx" | "ry" | "rz" => {
                        let q = arg_q(&mut tok)?;
                        let angle: f64 = tok
                            .next()
                            .ok_or_else(|| bad("missing rotation angle"))?
                            .parse()
                            .map_err(|_| bad("bad rotation angle"))?;
                        gates.push(match head {
                            "rx" => Gate::RX(q, angle),
                            "ry" => Gate::RY(q, angle),
                            _ => Gate::RZ(q, angle),
                        });
                    }
                    _ => {
                        let d = 1 << n;
                        let mut m = Array2::zeros((d, d));
                        for r in 0..d {
                            let (rl, row) = lines
                                .next()
                                .ok_or_else(|| bad("matrix rows truncated"))?;
                            let row = row.split('#').next().unwrap_or("").trim();
                            let entries: Vec<&str> = row.split_whitespace().collect();
                            if entries.len() != d {
                                return Err(Error::Config(format!(
                                    "line {}: expected {d} matrix entries, got {}",
                                    rl + 1,
                                    entries.len()
                                )));
                            }
                            for (c, e) in entries.iter().enumerate() {
                                m[[r, c]] = e.parse::<C64>().map_err(|_| {
                                    Error::Config(format!("line {}: bad complex entry '{e}'", rl + 1))
                                })?;
                            }
                        }
                        gates.push(Gate::Matrix(m));
                    }
                }
            }
            other => return Err(bad(&format!("unknown instruction '{other}'"))),
        }
        if tok.next().is_some() {
            return Err(Error::Config(format!("line {}: trailing tokens", lineno + 1)));
        }
    }
    let n_qubits = n_qubits.ok_or_else(|| Error::Config("missing `qubits N` header".into()))?;
    Ok(Circuit { n_qubits, gates })
}

/// Compile a circuit onto a qudit level allocation.
///
/// `m_of_logical[ℓ]` is the qudit m value hosting logical basis state ℓ; it
/// doubles as the connectivity-graph vertex assignment. The shipped default
/// for two qubits is [`DEFAULT_TWO_QUBIT_M`].
pub fn compile_circuit(circuit: &Circuit, m_of_logical: &[f64]) -> Result<GateProgram> {
    let d = circuit.dim();
    if m_of_logical.len() != d {
        return Err(Error::Compile(format!(
            "level allocation has {} entries, circuit needs {d}",
            m_of_logical.len()
        )));
    }
    let graph = build_connectivity(m_of_logical)?;
    let u = circuit.unitary()?;
    givens_decompose(&u, &graph)
}

/// Default 2-qubit-in-qudit allocation: logical {0,1,2,3} ↔ m {0,+1,−1,−2}.
pub const DEFAULT_TWO_QUBIT_M: [f64; 4] = [0.0, 1.0, -1.0, -2.0];
