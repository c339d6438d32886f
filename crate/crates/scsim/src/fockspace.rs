//! Truncated Fock-space building blocks: mode operators, state containers,
//! displacement operators, the `f_q` nonlinearity diagonals, and the coupled
//! atom-cavity-mirror Hamiltonians.
//!
//! Truncation is treated as a first-class concern. Operators that are exact
//! on the full space pick up artifacts in the top few levels of a truncated
//! one, so tests and callers distinguish the interior block (trustworthy)
//! from the boundary (documented garbage), and evolution code monitors the
//! top-level population against a [`TruncationPolicy`].

use ndarray::{Array1, Array2, s};

use crate::linalg::{self, kron};
use crate::specfun::{laguerre, ln_factorial};
use crate::{C64, Error, Result};

/// Annihilation operator `b` with `b[n-1, n] = sqrt(n)`.
pub fn annihilation(dim: usize) -> Array2<C64> {
    let mut b = Array2::zeros((dim, dim));
    for n in 1..dim {
        b[[n - 1, n]] = C64::new((n as f64).sqrt(), 0.0);
    }
    b
}

/// Creation operator `b^dag`.
pub fn creation(dim: usize) -> Array2<C64> {
    annihilation(dim).t().mapv(|v| v.conj())
}

/// Number operator `n = b^dag b`, exact even at the truncation edge.
pub fn number_op(dim: usize) -> Array2<C64> {
    Array2::from_diag(&Array1::from_iter(
        (0..dim).map(|n| C64::new(n as f64, 0.0)),
    ))
}

/// Scalar nonlinearity weight
/// `f_q(n, alpha) = e^{-alpha^2/2} n! L_n^q(alpha^2) / (n + q)!`.
///
/// These are the level-dependent weights a displacement operator imprints on
/// a sideband transition that changes the phonon number by `q`.
pub fn f_q_value(q: usize, n: usize, alpha: f64) -> f64 {
    let x = alpha * alpha;
    let log_scale = -0.5 * x + ln_factorial::<f64>(n) - ln_factorial::<f64>(n + q);
    log_scale.exp() * laguerre(n, q, x)
}

/// Diagonal operator `f_q(n, alpha)` on a `dim`-level space.
pub fn f_q_diagonal(q: usize, alpha: f64, dim: usize) -> Array2<C64> {
    Array2::from_diag(&Array1::from_iter(
        (0..dim).map(|n| C64::new(f_q_value(q, n, alpha), 0.0)),
    ))
}

/// Truncation budget used by displacement sizing and evolution monitors.
#[derive(Debug, Clone, Copy)]
pub struct TruncationPolicy {
    /// Extra levels kept above the naive support estimate.
    pub margin: usize,
    /// Largest tolerated population of the top Fock level during evolution.
    pub top_tol: f64,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self {
            margin: 8,
            top_tol: 1e-8,
        }
    }
}

/// Dimension at which the truncated `exp(alpha b^dag - conj(alpha) b)` agrees
/// with the exact matrix elements on the interior half of the space to
/// roughly 1e-8 or better.
pub fn displacement_dim_for(alpha: C64, policy: &TruncationPolicy) -> usize {
    8 * (alpha.norm_sqr().ceil() as usize).max(1) + policy.margin
}

/// Displacement operator by direct exponentiation of the truncated
/// generator `alpha b^dag - conj(alpha) b`.
///
/// The truncated generator is still anti-Hermitian, so this matrix is
/// unitary to machine precision at every dimension. Its matrix elements,
/// however, are only faithful to the infinite-dimensional operator on the
/// interior of the space; see [`displacement_elements`] for the exact
/// elements and the module tests for the certified agreement region.
pub fn displacement(alpha: C64, dim: usize) -> Result<Array2<C64>> {
    let b = annihilation(dim);
    let bd = creation(dim);
    let gen = bd.mapv(|v| v * alpha) - b.mapv(|v| v * alpha.conj());
    linalg::expm(&gen)
}

/// Exact matrix elements of the displacement operator,
/// `<m|D(alpha)|n> = sqrt(n!/m!) alpha^{m-n} e^{-|alpha|^2/2} L_n^{m-n}(|alpha|^2)`
/// for `m >= n` and the conjugate-reflected form below the diagonal.
///
/// Unlike [`displacement`], every entry here equals the untruncated
/// operator's element, so the matrix is not exactly unitary once truncated.
/// This is the right building block when the state it acts on is itself
/// supported well inside the truncation.
pub fn displacement_elements(alpha: C64, dim: usize) -> Array2<C64> {
    let x = alpha.norm_sqr();
    let gauss = (-0.5 * x).exp();
    let mut d = Array2::zeros((dim, dim));

    let mut up = C64::new(1.0, 0.0); // alpha^k
    let mut down = C64::new(1.0, 0.0); // (-conj(alpha))^k
    for k in 0..dim {
        if k > 0 {
            up *= alpha;
            down *= -alpha.conj();
        }
        // t_n = sqrt(n! / (n+k)!), built by recurrence along the diagonal.
        let mut t = (-0.5 * ln_factorial::<f64>(k)).exp();
        for n in 0..dim - k {
            if n > 0 {
                t *= (n as f64 / (n + k) as f64).sqrt();
            }
            let l = laguerre(n, k, x) * gauss * t;
            d[[n + k, n]] = up * l;
            if k > 0 {
                d[[n, n + k]] = down * l;
            }
        }
    }
    d
}

/// Cavity-conditioned mirror displacement
/// `sum_m |m><m| (x) D(ratio * m)` on the cavity (x) mirror space.
///
/// This is the polaron frame change that absorbs the radiation-pressure
/// coupling; `ratio` is the coupling-to-frequency quotient `g / nu`.
pub fn polaron(ratio: f64, cavity_dim: usize, mirror_dim: usize) -> Array2<C64> {
    let mut p = Array2::zeros((cavity_dim * mirror_dim, cavity_dim * mirror_dim));
    for m in 0..cavity_dim {
        let block = displacement_elements(C64::new(ratio * m as f64, 0.0), mirror_dim);
        let off = m * mirror_dim;
        p.slice_mut(s![off..off + mirror_dim, off..off + mirror_dim])
            .assign(&block);
    }
    p
}

/// Parameters of the coupled two-level atom, cavity mode, and mirror mode.
#[derive(Debug, Clone, Copy)]
pub struct LabParams {
    /// Mirror (mechanical) frequency.
    pub nu: f64,
    /// Atomic transition frequency.
    pub omega21: f64,
    /// Cavity frequency.
    pub omega_c: f64,
    /// Atom-cavity exchange rate.
    pub h: f64,
    /// Radiation-pressure coupling of photon number to mirror position.
    pub g: f64,
}

fn eye(dim: usize) -> Array2<C64> {
    Array2::eye(dim)
}

/// `sigma^+ = |e><g|` on the atom basis `{0 = g, 1 = e}`.
pub fn sigma_plus() -> Array2<C64> {
    let mut s = Array2::zeros((2, 2));
    s[[1, 0]] = C64::new(1.0, 0.0);
    s
}

/// `sigma^- = |g><e|`.
pub fn sigma_minus() -> Array2<C64> {
    sigma_plus().t().mapv(|v| v.conj())
}

/// Three-factor Kronecker product, used for atom (x) cavity (x) mirror
/// operators.
pub fn kron3(a: &Array2<C64>, b: &Array2<C64>, c: &Array2<C64>) -> Array2<C64> {
    kron(&kron(a, b), c)
}

/// Lab-frame Hamiltonian on atom (x) cavity (x) mirror:
/// free terms, the bare atom-cavity exchange, and the radiation-pressure
/// coupling `-g n_c (b + b^dag)`.
pub fn lab_hamiltonian(p: &LabParams, cavity_dim: usize, mirror_dim: usize) -> Array2<C64> {
    let i2 = eye(2);
    let ic = eye(cavity_dim);
    let im = eye(mirror_dim);
    let nc = number_op(cavity_dim);
    let nm = number_op(mirror_dim);
    let a = annihilation(cavity_dim);
    let b = annihilation(mirror_dim);
    let bd = creation(mirror_dim);
    let see = Array2::from_diag(&Array1::from(vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)]));

    let mut h = kron3(&i2, &nc.mapv(|v| v * p.omega_c), &im);
    h = h + kron3(&see.mapv(|v| v * p.omega21), &ic, &im);
    h = h + kron3(&i2, &ic, &nm.mapv(|v| v * p.nu));
    h = h - kron3(&i2, &nc, &(&b + &bd)).mapv(|v| v * p.g);
    let jc = kron3(&sigma_plus(), &a, &im);
    let jc = &jc + &jc.t().mapv(|v| v.conj());
    h + jc.mapv(|v| v * p.h)
}

/// Polaron-frame Hamiltonian: the radiation-pressure term is traded for a
/// photon-number Kerr shift `-(g^2/nu) n_c^2`, and the atom-cavity exchange
/// picks up a mirror displacement dressing `D(g/nu)`.
pub fn transformed_hamiltonian(p: &LabParams, cavity_dim: usize, mirror_dim: usize) -> Array2<C64> {
    let i2 = eye(2);
    let ic = eye(cavity_dim);
    let im = eye(mirror_dim);
    let nc = number_op(cavity_dim);
    let nm = number_op(mirror_dim);
    let a = annihilation(cavity_dim);
    let see = Array2::from_diag(&Array1::from(vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)]));
    let ratio = p.g / p.nu;
    let d = displacement_elements(C64::new(ratio, 0.0), mirror_dim);

    let kerr = nc.dot(&nc).mapv(|v| v * (p.g * p.g / p.nu));
    let mut h = kron3(&i2, &nc.mapv(|v| v * p.omega_c), &im);
    h = h + kron3(&see.mapv(|v| v * p.omega21), &ic, &im);
    h = h + kron3(&i2, &ic, &nm.mapv(|v| v * p.nu));
    h = h - kron3(&i2, &kerr, &im);
    let jc = kron3(&sigma_plus(), &a, &d);
    let jc = &jc + &jc.t().mapv(|v| v.conj());
    h + jc.mapv(|v| v * p.h)
}

/// Which diagonal of the displacement dressing a drive picks out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sideband {
    /// Phonon-number preserving part, weighted by `f_0(n)`.
    Carrier,
    /// Phonon-lowering part, `-h alpha (sigma^+ a f_1 b + h.c.)`.
    Red,
    /// Phonon-raising part, `h alpha (sigma^+ a b^dag f_1 + h.c.)`.
    Blue,
}

/// Resolved sideband interaction on atom (x) cavity (x) mirror.
///
/// These are exactly the central three diagonals of the dressed exchange in
/// [`transformed_hamiltonian`]; driving near the matching resonance keeps
/// one of them and drops the rest.
pub fn sideband_hamiltonian(
    kind: Sideband,
    h: f64,
    alpha: f64,
    cavity_dim: usize,
    mirror_dim: usize,
) -> Array2<C64> {
    let a = annihilation(cavity_dim);
    let b = annihilation(mirror_dim);
    let bd = creation(mirror_dim);
    let f0 = f_q_diagonal(0, alpha, mirror_dim);
    let f1 = f_q_diagonal(1, alpha, mirror_dim);

    let (mirror_part, weight) = match kind {
        Sideband::Carrier => (f0, h),
        Sideband::Red => (f1.dot(&b), -h * alpha),
        Sideband::Blue => (bd.dot(&f1), h * alpha),
    };
    let term = kron3(&sigma_plus(), &a, &mirror_part);
    let term = &term + &term.t().mapv(|v| v.conj());
    term.mapv(|v| v * weight)
}

/// First and second ladder moments of a state.
#[derive(Debug, Clone, Copy)]
pub struct Moments {
    /// `<b>`
    pub mean_b: C64,
    /// `<b^2>`
    pub mean_bb: C64,
    /// `<n>`
    pub mean_n: f64,
}

/// Normalized pure state on a truncated Fock space.
#[derive(Debug, Clone, PartialEq)]
pub struct FockVector {
    amps: Array1<C64>,
}

impl FockVector {
    /// Build from raw amplitudes, normalizing. Rejects empty, non-finite,
    /// and numerically zero input.
    pub fn new(amps: Vec<C64>) -> Result<Self> {
        if amps.is_empty() {
            return Err(Error::Dimension("state needs at least one level".into()));
        }
        if amps.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::Domain("non-finite amplitude".into()));
        }
        let norm_sq: f64 = amps.iter().map(|c| c.norm_sqr()).sum();
        if norm_sq < 1e-300 {
            return Err(Error::Domain("cannot normalize the zero vector".into()));
        }
        let scale = norm_sq.sqrt();
        Ok(Self {
            amps: Array1::from(amps).mapv(|c| c / scale),
        })
    }

    /// Build from amplitudes that are already normalized to 1e-12.
    pub fn from_normalized(amps: Vec<C64>) -> Result<Self> {
        let norm_sq: f64 = amps.iter().map(|c| c.norm_sqr()).sum();
        if (norm_sq.sqrt() - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!(
                "amplitudes have norm {} but claim to be normalized",
                norm_sq.sqrt()
            )));
        }
        Self::new(amps)
    }

    /// Fock basis state `|n>`.
    pub fn fock(n: usize, dim: usize) -> Result<Self> {
        if n >= dim {
            return Err(Error::Dimension(format!(
                "|{n}> does not fit in {dim} levels"
            )));
        }
        let mut amps = vec![C64::new(0.0, 0.0); dim];
        amps[n] = C64::new(1.0, 0.0);
        Self::new(amps)
    }

    /// Vacuum `|0>`.
    pub fn vacuum(dim: usize) -> Result<Self> {
        Self::fock(0, dim)
    }

    /// Coherent state truncated to `dim` levels and renormalized. The
    /// amplitudes follow `beta^n / sqrt(n!)` exactly; only the discarded
    /// tail differs from the ideal state.
    pub fn coherent(beta: C64, dim: usize) -> Result<Self> {
        let mut amps = Vec::with_capacity(dim);
        let mut c = C64::new(1.0, 0.0);
        for n in 0..dim {
            if n > 0 {
                c = c * beta / C64::new((n as f64).sqrt(), 0.0);
            }
            amps.push(c);
        }
        Self::new(amps)
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amps(&self) -> &Array1<C64> {
        &self.amps
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &FockVector) -> Result<C64> {
        if self.dim() != other.dim() {
            return Err(Error::Dimension(format!(
                "inner product of {} and {} level states",
                self.dim(),
                other.dim()
            )));
        }
        Ok(self
            .amps
            .iter()
            .zip(other.amps.iter())
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// `|<self|other>|^2`. States of different dimension are compared by
    /// embedding the smaller one.
    pub fn fidelity(&self, other: &FockVector) -> Result<f64> {
        let d = self.dim().max(other.dim());
        let a = self.embedded(d)?;
        let b = other.embedded(d)?;
        Ok(a.inner(&b)?.norm_sqr())
    }

    /// Same state on a taller space, padded with zeros.
    pub fn embedded(&self, dim: usize) -> Result<Self> {
        if dim < self.dim() {
            return Err(Error::Dimension(format!(
                "cannot embed {} levels into {dim}",
                self.dim()
            )));
        }
        let mut amps = self.amps.to_vec();
        amps.resize(dim, C64::new(0.0, 0.0));
        Self::new(amps)
    }

    /// Projector `|psi><psi|` as a density operator.
    pub fn to_density(&self) -> DensityOp {
        let n = self.dim();
        let mut mat = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                mat[[i, j]] = self.amps[i] * self.amps[j].conj();
            }
        }
        DensityOp { mat }
    }

    /// `<psi|op|psi>`.
    pub fn expectation(&self, op: &Array2<C64>) -> Result<C64> {
        if op.nrows() != self.dim() || op.ncols() != self.dim() {
            return Err(Error::Dimension(format!(
                "operator {}x{} against a {} level state",
                op.nrows(),
                op.ncols(),
                self.dim()
            )));
        }
        let applied = op.dot(&self.amps);
        Ok(self
            .amps
            .iter()
            .zip(applied.iter())
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Ladder moments, computed directly from the amplitudes.
    pub fn moments(&self) -> Moments {
        let n = self.dim();
        let mut mean_b = C64::new(0.0, 0.0);
        let mut mean_bb = C64::new(0.0, 0.0);
        let mut mean_n = 0.0;
        for k in 0..n {
            let ck = self.amps[k];
            mean_n += k as f64 * ck.norm_sqr();
            if k + 1 < n {
                mean_b += ck.conj() * self.amps[k + 1] * ((k + 1) as f64).sqrt();
            }
            if k + 2 < n {
                mean_bb +=
                    ck.conj() * self.amps[k + 2] * (((k + 1) * (k + 2)) as f64).sqrt();
            }
        }
        Moments {
            mean_b,
            mean_bb,
            mean_n,
        }
    }
}

/// Density operator on a truncated Fock space. Construction checks
/// Hermiticity and unit trace; positivity is available as an explicit check
/// because it costs a full diagonalization.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOp {
    mat: Array2<C64>,
}

impl DensityOp {
    /// Validate and wrap a matrix: square, finite, Hermitian within 1e-10
    /// (relative to its scale), trace within 1e-9 of one.
    pub fn new(mat: Array2<C64>) -> Result<Self> {
        let n = mat.nrows();
        if n == 0 || mat.ncols() != n {
            return Err(Error::Dimension(format!(
                "density operator must be square and nonempty, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        if mat.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::Domain("non-finite density matrix entry".into()));
        }
        let scale = linalg::sup_norm(&mat).max(1.0);
        let mut defect = 0.0_f64;
        for i in 0..n {
            for j in i..n {
                defect = defect.max((mat[[i, j]] - mat[[j, i]].conj()).norm());
            }
        }
        if defect > 1e-10 * scale {
            return Err(Error::Domain(format!(
                "density matrix is not Hermitian (defect {defect:.3e})"
            )));
        }
        let tr: C64 = (0..n).map(|i| mat[[i, i]]).sum();
        if (tr - C64::new(1.0, 0.0)).norm() > 1e-9 {
            return Err(Error::Domain(format!(
                "density matrix trace is {tr}, expected 1"
            )));
        }
        Ok(Self { mat })
    }

    /// `|psi><psi|`.
    pub fn pure(v: &FockVector) -> Self {
        v.to_density()
    }

    pub fn mat(&self) -> &Array2<C64> {
        &self.mat
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim()).map(|i| self.mat[[i, i]]).sum()
    }

    /// Population of the top Fock level, the truncation canary.
    pub fn top_population(&self) -> f64 {
        self.mat[[self.dim() - 1, self.dim() - 1]].re
    }

    /// Smallest eigenvalue; a healthy density operator has this above
    /// roughly -1e-9.
    pub fn min_eigenvalue(&self) -> Result<f64> {
        let eigs = linalg::hermitian_eigenvalues(&self.mat)?;
        Ok(eigs.first().copied().unwrap_or(0.0))
    }

    /// `<psi|rho|psi>`, the fidelity against a pure target.
    pub fn fidelity_pure(&self, v: &FockVector) -> Result<f64> {
        Ok(v.expectation(&self.mat)?.re)
    }

    /// Same state on a taller space.
    pub fn embedded(&self, dim: usize) -> Result<Self> {
        if dim < self.dim() {
            return Err(Error::Dimension(format!(
                "cannot embed {} levels into {dim}",
                self.dim()
            )));
        }
        let mut mat = Array2::zeros((dim, dim));
        mat.slice_mut(s![..self.dim(), ..self.dim()]).assign(&self.mat);
        Ok(Self { mat })
    }

    /// Trace out the leading tensor factor of dimension `left_dim`.
    pub fn partial_trace_left(&self, left_dim: usize) -> Result<Self> {
        let n = self.dim();
        if left_dim == 0 || !n.is_multiple_of(left_dim) {
            return Err(Error::Dimension(format!(
                "cannot split {n} levels as {left_dim} x k"
            )));
        }
        let right = n / left_dim;
        let mut mat = Array2::zeros((right, right));
        for a in 0..left_dim {
            let off = a * right;
            for i in 0..right {
                for j in 0..right {
                    mat[[i, j]] += self.mat[[off + i, off + j]];
                }
            }
        }
        Ok(Self { mat })
    }

    /// `tr(rho op)`.
    pub fn expectation(&self, op: &Array2<C64>) -> Result<C64> {
        if op.nrows() != self.dim() || op.ncols() != self.dim() {
            return Err(Error::Dimension(format!(
                "operator {}x{} against a {} level density matrix",
                op.nrows(),
                op.ncols(),
                self.dim()
            )));
        }
        let prod = self.mat.dot(op);
        Ok((0..self.dim()).map(|i| prod[[i, i]]).sum())
    }

    /// Ladder moments `tr(rho b)`, `tr(rho b^2)`, `tr(rho n)`.
    pub fn moments(&self) -> Moments {
        let n = self.dim();
        let mut mean_b = C64::new(0.0, 0.0);
        let mut mean_bb = C64::new(0.0, 0.0);
        let mut mean_n = 0.0;
        for k in 0..n {
            mean_n += k as f64 * self.mat[[k, k]].re;
            if k + 1 < n {
                // tr(rho b) = sum_k sqrt(k+1) rho[k+1, k]
                mean_b += self.mat[[k + 1, k]] * ((k + 1) as f64).sqrt();
            }
            if k + 2 < n {
                mean_bb += self.mat[[k + 2, k]] * (((k + 1) * (k + 2)) as f64).sqrt();
            }
        }
        Moments {
            mean_b,
            mean_bb,
            mean_n,
        }
    }
}
