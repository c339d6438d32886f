//! Small dense linear algebra on `ndarray` matrices: LU solves, the matrix
//! exponential, Jacobi eigenvalues for Hermitian matrices, and careful sums.
//!
//! The matrices in this crate are tiny by numerical-linear-algebra standards
//! (a few hundred rows at the very most), so simple textbook algorithms with
//! partial pivoting are both fast enough and easy to audit.

use ndarray::{Array1, Array2};

pub use ndarray::linalg::kron;

use crate::{C64, Error, Result};

/// Maximum absolute entry.
pub fn sup_norm(a: &Array2<C64>) -> f64 {
    a.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// Maximum absolute column sum (the induced 1-norm).
pub fn one_norm(a: &Array2<C64>) -> f64 {
    let mut best = 0.0_f64;
    for col in a.columns() {
        let s: f64 = col.iter().map(|v| v.norm()).sum();
        best = best.max(s);
    }
    best
}

/// Frobenius norm.
pub fn frobenius_norm(a: &Array2<C64>) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Solve `A X = B` for complex square `A` by LU with partial pivoting.
pub fn solve(a: &Array2<C64>, b: &Array2<C64>) -> Result<Array2<C64>> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n {
        return Err(Error::Dimension(format!(
            "solve needs square A and matching B, got A {}x{} B {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    let mut lu = a.clone();
    let mut x = b.clone();
    let m = x.ncols();
    for k in 0..n {
        let mut piv = k;
        let mut best = lu[[k, k]].norm();
        for i in (k + 1)..n {
            let v = lu[[i, k]].norm();
            if v > best {
                best = v;
                piv = i;
            }
        }
        if best == 0.0 {
            return Err(Error::Infeasible("singular matrix in LU solve".into()));
        }
        if piv != k {
            for j in 0..n {
                lu.swap([k, j], [piv, j]);
            }
            for j in 0..m {
                x.swap([k, j], [piv, j]);
            }
        }
        let pivot = lu[[k, k]];
        for i in (k + 1)..n {
            let factor = lu[[i, k]] / pivot;
            if factor == C64::new(0.0, 0.0) {
                continue;
            }
            for j in (k + 1)..n {
                let sub = factor * lu[[k, j]];
                lu[[i, j]] -= sub;
            }
            for j in 0..m {
                let sub = factor * x[[k, j]];
                x[[i, j]] -= sub;
            }
            lu[[i, k]] = C64::new(0.0, 0.0);
        }
    }
    for k in (0..n).rev() {
        let pivot = lu[[k, k]];
        for j in 0..m {
            let mut v = x[[k, j]];
            for i in (k + 1)..n {
                v -= lu[[k, i]] * x[[i, j]];
            }
            x[[k, j]] = v / pivot;
        }
    }
    Ok(x)
}

/// Solve `A x = b` for real square `A` by LU with partial pivoting.
pub fn solve_real(a: &Array2<f64>, b: &Array1<f64>) -> Result<Array1<f64>> {
    let n = a.nrows();
    if a.ncols() != n || b.len() != n {
        return Err(Error::Dimension(format!(
            "solve_real needs square A and matching b, got A {}x{} b {}",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    let mut lu = a.clone();
    let mut x = b.clone();
    for k in 0..n {
        let mut piv = k;
        let mut best = lu[[k, k]].abs();
        for i in (k + 1)..n {
            if lu[[i, k]].abs() > best {
                best = lu[[i, k]].abs();
                piv = i;
            }
        }
        if best == 0.0 {
            return Err(Error::Infeasible("singular matrix in LU solve".into()));
        }
        if piv != k {
            for j in 0..n {
                lu.swap([k, j], [piv, j]);
            }
            x.swap(k, piv);
        }
        for i in (k + 1)..n {
            let factor = lu[[i, k]] / lu[[k, k]];
            if factor == 0.0 {
                continue;
            }
            for j in (k + 1)..n {
                let sub = factor * lu[[k, j]];
                lu[[i, j]] -= sub;
            }
            let sub = factor * x[k];
            x[i] -= sub;
        }
    }
    for k in (0..n).rev() {
        let mut v = x[k];
        for i in (k + 1)..n {
            v -= lu[[k, i]] * x[i];
        }
        x[k] = v / lu[[k, k]];
    }
    Ok(x)
}

/// Inverse of a real square matrix, column by column.
pub fn inverse_real(a: &Array2<f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    let mut inv = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let mut e = Array1::<f64>::zeros(n);
        e[j] = 1.0;
        let col = solve_real(a, &e)?;
        inv.column_mut(j).assign(&col);
    }
    Ok(inv)
}

/// 1-norm condition number of a real square matrix.
pub fn cond_1(a: &Array2<f64>) -> Result<f64> {
    let norm_a = {
        let mut best = 0.0_f64;
        for col in a.columns() {
            best = best.max(col.iter().map(|v| v.abs()).sum());
        }
        best
    };
    let inv = inverse_real(a)?;
    let norm_inv = {
        let mut best = 0.0_f64;
        for col in inv.columns() {
            best = best.max(col.iter().map(|v| v.abs()).sum());
        }
        best
    };
    Ok(norm_a * norm_inv)
}

/// Matrix exponential by Pade(13) with scaling and squaring.
///
/// The order-13 approximant is accurate to double precision for scaled
/// 1-norms below 5.372, and the squaring phase undoes the scaling.
pub fn expm(a: &Array2<C64>) -> Result<Array2<C64>> {
    const THETA_13: f64 = 5.371_920_351_148_152;
    const B: [f64; 14] = [
        64_764_752_532_480_000.0,
        32_382_376_266_240_000.0,
        7_771_770_303_897_600.0,
        1_187_353_796_428_800.0,
        129_060_195_264_000.0,
        10_559_470_521_600.0,
        670_442_572_800.0,
        33_522_128_640.0,
        1_323_241_920.0,
        40_840_800.0,
        960_960.0,
        16_380.0,
        182.0,
        1.0,
    ];

    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Dimension(format!(
            "expm needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }

    let norm = one_norm(a);
    let s = if norm > THETA_13 {
        (norm / THETA_13).log2().ceil() as i32
    } else {
        0
    };
    let scale = C64::new(2f64.powi(s), 0.0);
    let a1 = a.mapv(|v| v / scale);

    let eye = Array2::<C64>::eye(n);
    let a2 = a1.dot(&a1);
    let a4 = a2.dot(&a2);
    let a6 = a4.dot(&a2);

    let c = |k: usize| C64::new(B[k], 0.0);
    let u_inner = a6.mapv(|v| v * c(13)) + a4.mapv(|v| v * c(11)) + a2.mapv(|v| v * c(9));
    let u_poly = a6.dot(&u_inner)
        + a6.mapv(|v| v * c(7))
        + a4.mapv(|v| v * c(5))
        + a2.mapv(|v| v * c(3))
        + eye.mapv(|v| v * c(1));
    let u = a1.dot(&u_poly);

    let v_inner = a6.mapv(|v| v * c(12)) + a4.mapv(|v| v * c(10)) + a2.mapv(|v| v * c(8));
    let v = a6.dot(&v_inner)
        + a6.mapv(|v| v * c(6))
        + a4.mapv(|v| v * c(4))
        + a2.mapv(|v| v * c(2))
        + eye.mapv(|v| v * c(0));

    let p = &v + &u;
    let q = &v - &u;
    let mut r = solve(&q, &p)?;
    for _ in 0..s {
        r = r.dot(&r);
    }
    Ok(r)
}

/// Eigenvalues of a Hermitian matrix, ascending.
///
/// Works through the real symmetric embedding `[[Re, -Im], [Im, Re]]`, whose
/// spectrum is that of the original matrix with every eigenvalue doubled, and
/// diagonalizes it with cyclic Jacobi rotations.
pub fn hermitian_eigenvalues(h: &Array2<C64>) -> Result<Vec<f64>> {
    let n = h.nrows();
    if h.ncols() != n {
        return Err(Error::Dimension(format!(
            "eigenvalues need a square matrix, got {}x{}",
            h.nrows(),
            h.ncols()
        )));
    }
    let scale = sup_norm(h).max(1e-300);
    let mut defect = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            defect = defect.max((h[[i, j]] - h[[j, i]].conj()).norm());
        }
    }
    if defect > 1e-8 * scale {
        return Err(Error::Domain(format!(
            "matrix is not Hermitian (defect {defect:.3e} against scale {scale:.3e})"
        )));
    }

    let m = 2 * n;
    let mut s = Array2::<f64>::zeros((m, m));
    for i in 0..n {
        for j in 0..n {
            let v = h[[i, j]];
            s[[i, j]] = v.re;
            s[[i, j + n]] = -v.im;
            s[[i + n, j]] = v.im;
            s[[i + n, j + n]] = v.re;
        }
    }

    let frob: f64 = s.iter().map(|v| v * v).sum::<f64>().sqrt();
    let tol = 1e-14 * frob.max(1e-300);
    for _sweep in 0..60 {
        let mut off = 0.0;
        for p in 0..m {
            for q in (p + 1)..m {
                off += s[[p, q]] * s[[p, q]];
            }
        }
        if (2.0 * off).sqrt() <= tol {
            break;
        }
        for p in 0..m.saturating_sub(1) {
            for q in (p + 1)..m {
                let apq = s[[p, q]];
                if apq.abs() <= tol / m as f64 {
                    continue;
                }
                let tau = (s[[q, q]] - s[[p, p]]) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let sn = t * c;
                for k in 0..m {
                    let akp = s[[k, p]];
                    let akq = s[[k, q]];
                    s[[k, p]] = c * akp - sn * akq;
                    s[[k, q]] = sn * akp + c * akq;
                }
                for k in 0..m {
                    let apk = s[[p, k]];
                    let aqk = s[[q, k]];
                    s[[p, k]] = c * apk - sn * aqk;
                    s[[q, k]] = sn * apk + c * aqk;
                }
            }
        }
    }

    let mut eigs: Vec<f64> = (0..m).map(|i| s[[i, i]]).collect();
    eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // The embedding doubles every eigenvalue; take one of each pair.
    Ok(eigs.into_iter().step_by(2).collect())
}

/// Spectral norm (largest singular value) via the eigenvalues of `A^dag A`.
pub fn spectral_norm(a: &Array2<C64>) -> Result<f64> {
    let at = a.t().mapv(|v| v.conj());
    let gram = at.dot(a);
    let eigs = hermitian_eigenvalues(&gram)?;
    Ok(eigs.last().copied().unwrap_or(0.0).max(0.0).sqrt())
}

/// Pairwise summation, which keeps the rounding error at O(log n) ulps even
/// for the long alternating-sign sums that show up in Wigner integrals.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}
