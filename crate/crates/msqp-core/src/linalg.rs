//! Small dense complex linear algebra helpers.
//!
//! Every space in this crate has dimension ≲ 50, so naive O(n³) kernels and a
//! cyclic Jacobi eigensolver are all that is needed; no external BLAS/LAPACK.

use ndarray::Array2;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Conjugate transpose.
pub fn dagger(a: &Array2<C64>) -> Array2<C64> {
    a.t().mapv(|z| z.conj())
}

/// Identity matrix of dimension n.
pub fn eye(n: usize) -> Array2<C64> {
    Array2::from_diag_elem(n, C64::new(1.0, 0.0))
}

/// Largest absolute entry of a − b.
pub fn max_abs_diff(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Largest deviation from Hermiticity, max |a − a†|.
pub fn hermiticity_defect(a: &Array2<C64>) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            worst = worst.max((a[[i, j]] - a[[j, i]].conj()).norm());
        }
    }
    worst
}

/// Largest absolute entry of a − e^{iα}·b, minimized over the global phase α.
///
/// The phase is fixed from the largest-magnitude entry of b.
pub fn max_abs_diff_up_to_phase(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
    let mut best = (0.0f64, (0usize, 0usize));
    for ((i, j), z) in b.indexed_iter() {
        if z.norm() > best.0 {
            best = (z.norm(), (i, j));
        }
    }
    if best.0 == 0.0 {
        return max_abs_diff(a, b);
    }
    let (i, j) = best.1;
    if a[[i, j]].norm() == 0.0 {
        return max_abs_diff(a, b);
    }
    let phase = a[[i, j]] / b[[i, j]];
    let phase = phase / C64::new(phase.norm(), 0.0);
    let rotated = b.mapv(|z| z * phase);
    max_abs_diff(a, &rotated)
}

/// Check that u†u = 1 within tol.
pub fn unitarity_defect(u: &Array2<C64>) -> f64 {
    let n = u.nrows();
    max_abs_diff(&dagger(u).dot(u), &eye(n))
}

/// Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order and the matching unit eigenvectors
/// as columns of a unitary matrix.
pub fn eigh(a: &Array2<C64>) -> Result<(Vec<f64>, Array2<C64>)> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Numerical("eigh: matrix not square".into()));
    }
    if hermiticity_defect(a) > 1e-9 * (1.0 + frobenius(a)) {
        return Err(Error::Numerical("eigh: matrix not Hermitian".into()));
    }
    let mut m = a.clone();
    let mut v = eye(n);
    let scale = frobenius(&m).max(1e-300);
    for _sweep in 0..60 {
        let off = off_diag_norm(&m);
        if off <= 1e-14 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let g = m[[p, q]];
                if g.norm() <= 1e-300 {
                    continue;
                }
                let alpha = m[[p, p]].re;
                let beta = m[[q, q]].re;
                let phi = g.arg();
                let gm = g.norm();
                let t = if (alpha - beta).abs() < 1e-300 * scale {
                    1.0
                } else {
                    let tau = (alpha - beta) / (2.0 * gm);
                    tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // Plane rotation u = [[c, −s·e^{iφ}], [s·e^{−iφ}, c]] on (p, q).
                let eip = C64::from_polar(1.0, phi);
                let ein = eip.conj();
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = mkp * c + mkq * s * ein;
                    m[[k, q]] = -mkp * s * eip + mkq * c;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = mpk * c + mqk * s * eip;
                    m[[q, k]] = -mpk * s * ein + mqk * c;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = vkp * c + vkq * s * ein;
                    v[[k, q]] = -vkp * s * eip + vkq * c;
                }
            }
        }
    }
    if off_diag_norm(&m) > 1e-10 * scale {
        return Err(Error::Numerical("eigh: Jacobi iteration did not converge".into()));
    }
    let mut pairs: Vec<(f64, usize)> = (0..n).map(|i| (m[[i, i]].re, i)).collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let vals: Vec<f64> = pairs.iter().map(|&(l, _)| l).collect();
    let mut vecs = Array2::zeros((n, n));
    for (new_col, &(_, old_col)) in pairs.iter().enumerate() {
        for k in 0..n {
            vecs[[k, new_col]] = v[[k, old_col]];
        }
    }
    Ok((vals, vecs))
}

/// exp(−i·x·H) for Hermitian H, via the Jacobi eigendecomposition.
pub fn exp_i_herm(h: &Array2<C64>, x: f64) -> Result<Array2<C64>> {
    let (vals, vecs) = eigh(h)?;
    let n = h.nrows();
    let mut d = Array2::zeros((n, n));
    for (i, &l) in vals.iter().enumerate() {
        d[[i, i]] = C64::from_polar(1.0, -x * l);
    }
    Ok(vecs.dot(&d).dot(&dagger(&vecs)))
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(a: &Array2<C64>) -> Result<f64> {
    let (vals, _) = eigh(a)?;
    Ok(vals[0])
}

/// Frobenius norm.
pub fn frobenius(a: &Array2<C64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn off_diag_norm(a: &Array2<C64>) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[[i, j]].norm_sqr();
            }
        }
    }
    s.sqrt()
}

/// Orthonormalize the columns of a matrix (modified Gram–Schmidt).
///
/// Used to turn random complex matrices into test unitaries.
pub fn orthonormalize_columns(a: &Array2<C64>) -> Result<Array2<C64>> {
    let n = a.nrows();
    let mut q = a.clone();
    for j in 0..n {
        for k in 0..j {
            let mut proj = C64::new(0.0, 0.0);
            for i in 0..n {
                proj += q[[i, k]].conj() * q[[i, j]];
            }
            for i in 0..n {
                let qik = q[[i, k]];
                q[[i, j]] -= proj * qik;
            }
        }
        let norm: f64 = (0..n).map(|i| q[[i, j]].norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-12 {
            return Err(Error::Numerical("orthonormalize: rank-deficient input".into()));
        }
        for i in 0..n {
            q[[i, j]] /= C64::new(norm, 0.0);
        }
    }
    Ok(q)
}
