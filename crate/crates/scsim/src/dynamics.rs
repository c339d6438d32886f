//! Open-system dynamics: damped-oscillator master equations, the matching
//! Gaussian phase-space propagator, and driven-dissipative relaxation into
//! the dark state of a designed coupling.
//!
//! Two views of the same damping channel are provided. The Lindblad route
//! evolves the density matrix directly; the Fokker-Planck route evolves a
//! sampled Wigner function through the exact Ornstein-Uhlenbeck kernel of
//! the damped harmonic oscillator. For a thermal environment they agree to
//! quadrature accuracy, which doubles as a cross-check of both codes.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::design::{dark_state_operator, CouplingDesign};
use crate::fockspace::{
    annihilation, sigma_minus, sigma_plus, DensityOp, FockVector, TruncationPolicy,
};
use crate::linalg::{kron, sup_norm};
use crate::nonclassicality::{
    negativity_volume, resolve_extent, wigner, Extent, WignerGrid, WignerGridSpec,
};
use crate::scs::{sphere_coherent_state, SphereParams};
use crate::{Error, Result, C64};

/// Absolute-plus-relative local error tolerance of the adaptive integrator.
pub const ODE_TOL: f64 = 1e-9;

/// Tolerated drift of the trace during integration.
pub const TRACE_TOL: f64 = 1e-9;

const MAX_STEPS: usize = 1_000_000;

/// Truncated thermal state with mean occupation `nbar`, renormalized so the
/// truncated geometric weights sum to one. It is the exact fixed point of
/// the truncated damping generator, not just an approximation to the
/// infinite-dimensional one, because the truncated ladder still satisfies
/// detailed balance level by level.
pub fn thermal_state(nbar: f64, dim: usize) -> Result<DensityOp> {
    if !(nbar >= 0.0) || !nbar.is_finite() {
        return Err(Error::Domain(format!(
            "thermal occupation must be finite and nonnegative, got {nbar}"
        )));
    }
    if dim == 0 {
        return Err(Error::Dimension("thermal state needs dim >= 1".into()));
    }
    let q = nbar / (nbar + 1.0);
    let mut weights: Vec<f64> = Vec::with_capacity(dim);
    let mut w = 1.0;
    for _ in 0..dim {
        weights.push(w);
        w *= q;
    }
    let total: f64 = weights.iter().sum();
    let mut mat = Array2::zeros((dim, dim));
    for (n, w) in weights.iter().enumerate() {
        mat[[n, n]] = C64::new(w / total, 0.0);
    }
    DensityOp::new(mat)
}

/// Damped harmonic oscillator coupled to a thermal bath: decay rate `gamma`
/// and bath occupation `nbar`.
#[derive(Debug, Clone, Copy)]
pub struct DampedOscillatorModel {
    pub gamma: f64,
    pub nbar: f64,
    pub policy: TruncationPolicy,
}

impl DampedOscillatorModel {
    pub fn new(gamma: f64, nbar: f64) -> Self {
        Self {
            gamma,
            nbar,
            policy: TruncationPolicy::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::Domain(format!(
                "damping rate must be finite and nonnegative, got {}",
                self.gamma
            )));
        }
        if !(self.nbar >= 0.0) || !self.nbar.is_finite() {
            return Err(Error::Domain(format!(
                "bath occupation must be finite and nonnegative, got {}",
                self.nbar
            )));
        }
        Ok(())
    }
}

/// Dormand-Prince 5(4) on a matrix-valued autonomous right-hand side.
/// `check` runs after every accepted step, on the symmetrized state.
fn integrate_adaptive(
    mut y: Array2<C64>,
    t_span: f64,
    rhs: impl Fn(&Array2<C64>) -> Array2<C64>,
    mut check: impl FnMut(&Array2<C64>) -> Result<()>,
    checkpoints: &[f64],
    mut record: impl FnMut(usize, &Array2<C64>),
) -> Result<()> {
    const A: [[f64; 6]; 6] = [
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [
            19372.0 / 6561.0,
            -25360.0 / 2187.0,
            64448.0 / 6561.0,
            -212.0 / 729.0,
            0.0,
            0.0,
        ],
        [
            9017.0 / 3168.0,
            -355.0 / 33.0,
            46732.0 / 5247.0,
            49.0 / 176.0,
            -5103.0 / 18656.0,
            0.0,
        ],
        [
            35.0 / 384.0,
            0.0,
            500.0 / 1113.0,
            125.0 / 192.0,
            -2187.0 / 6784.0,
            11.0 / 84.0,
        ],
    ];
    // Difference between the 5th and embedded 4th order weights.
    const E: [f64; 7] = [
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ];

    let mut t = 0.0;
    let mut k1 = rhs(&y);
    let mut h = (t_span / 100.0).max(1e-6).min(t_span.max(1e-6));
    let mut cp_idx = 0;
    while cp_idx < checkpoints.len() && checkpoints[cp_idx] <= 0.0 {
        record(cp_idx, &y);
        cp_idx += 1;
    }

    let mut steps = 0;
    while t < t_span && cp_idx <= checkpoints.len() {
        let target = if cp_idx < checkpoints.len() {
            checkpoints[cp_idx]
        } else {
            t_span
        };
        if target - t < 1e-14 * (1.0 + target.abs()) {
            if cp_idx < checkpoints.len() {
                record(cp_idx, &y);
                cp_idx += 1;
            }
            continue;
        }
        let h_try = h.min(target - t);

        let mut ks: Vec<Array2<C64>> = Vec::with_capacity(7);
        ks.push(k1.clone());
        for a_row in &A {
            let mut arg = y.clone();
            for (j, k) in ks.iter().enumerate() {
                let a = a_row[j];
                if a != 0.0 {
                    arg.scaled_add(C64::new(h_try * a, 0.0), k);
                }
            }
            ks.push(rhs(&arg));
        }
        // Stage 7 argument equals the 5th order solution (FSAL), so ks[6]
        // is also the first stage of the next step.
        let y_next = {
            let mut arg = y.clone();
            for (j, k) in ks.iter().take(6).enumerate() {
                let a = A[5][j];
                if a != 0.0 {
                    arg.scaled_add(C64::new(h_try * a, 0.0), k);
                }
            }
            arg
        };
        let mut err_mat: Array2<C64> = Array2::zeros(y.raw_dim());
        for (j, k) in ks.iter().enumerate() {
            if E[j] != 0.0 {
                err_mat.scaled_add(C64::new(h_try * E[j], 0.0), k);
            }
        }
        let scale = 1.0 + sup_norm(&y_next);
        let err = sup_norm(&err_mat) / scale;

        steps += 1;
        if steps > MAX_STEPS {
            return Err(Error::Convergence(format!(
                "integrator exceeded {MAX_STEPS} steps at t = {t:.3e}"
            )));
        }

        if err <= ODE_TOL {
            t += h_try;
            y = y_next;
            // Keep the state exactly Hermitian; the generator preserves
            // Hermiticity, so any defect is integrator noise.
            let defect = {
                let adj = y.t().mapv(|z| z.conj());
                sup_norm(&(&y - &adj))
            };
            if defect > 1e-8 * scale {
                return Err(Error::Convergence(format!(
                    "state lost Hermiticity (defect {defect:.2e}) at t = {t:.3e}"
                )));
            }
            let adj = y.t().mapv(|z| z.conj());
            y = (&y + &adj).mapv(|z| z * 0.5);
            let trace: C64 = (0..y.nrows()).map(|i| y[[i, i]]).sum();
            if (trace.re - 1.0).abs() > TRACE_TOL || trace.im.abs() > TRACE_TOL {
                return Err(Error::Convergence(format!(
                    "trace drifted to {} at t = {t:.3e}",
                    trace.re
                )));
            }
            check(&y)?;
            if (target - t).abs() < 1e-14 * (1.0 + target.abs()) && cp_idx < checkpoints.len() {
                record(cp_idx, &y);
                cp_idx += 1;
            }
            k1 = ks.pop().expect("seven stages");
        }

        let grow = if err == 0.0 {
            5.0
        } else {
            (0.9 * (ODE_TOL / err).powf(0.2)).clamp(0.2, 5.0)
        };
        h = (h_try * grow).max(1e-12);
        if h < 1e-12 * (1.0 + t) {
            return Err(Error::Convergence(format!(
                "step size underflow at t = {t:.3e}"
            )));
        }
        if t >= t_span && cp_idx >= checkpoints.len() {
            break;
        }
    }
    Ok(())
}

struct DampingContext {
    b: Array2<C64>,
    bd: Array2<C64>,
    n: Array2<C64>,
    bbd: Array2<C64>,
    gamma: f64,
    nbar: f64,
}

impl DampingContext {
    fn new(dim: usize, model: &DampedOscillatorModel) -> Self {
        let b = annihilation(dim);
        let bd = b.t().mapv(|z| z.conj());
        let n = bd.dot(&b);
        let bbd = b.dot(&bd);
        Self {
            b,
            bd,
            n,
            bbd,
            gamma: model.gamma,
            nbar: model.nbar,
        }
    }

    fn rhs(&self, rho: &Array2<C64>) -> Array2<C64> {
        let down = C64::new(self.gamma / 2.0 * (self.nbar + 1.0), 0.0);
        let up = C64::new(self.gamma / 2.0 * self.nbar, 0.0);
        let mut out = self.b.dot(rho).dot(&self.bd) * 2.0;
        out -= &self.n.dot(rho);
        out -= &rho.dot(&self.n);
        out *= down;
        if self.nbar > 0.0 {
            let mut heat = self.bd.dot(rho).dot(&self.b) * 2.0;
            heat -= &self.bbd.dot(rho);
            heat -= &rho.dot(&self.bbd);
            out += &(heat * up);
        }
        out
    }
}

/// Evolve a state under thermal damping, sampling at the requested times.
/// Times must be nonnegative and strictly increasing. The state keeps the
/// dimension of `rho0`; embed with headroom first, because the top-level
/// population is monitored against the model's truncation policy.
pub fn lindblad_damped_trajectory(
    rho0: &DensityOp,
    model: &DampedOscillatorModel,
    times: &[f64],
) -> Result<Vec<DensityOp>> {
    model.validate()?;
    if times.is_empty() {
        return Ok(Vec::new());
    }
    if times[0] < 0.0 || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain(
            "sample times must be nonnegative and strictly increasing".into(),
        ));
    }
    let dim = rho0.dim();
    let ctx = DampingContext::new(dim, model);
    let top_tol = model.policy.top_tol;
    let mut out: Vec<Option<DensityOp>> = vec![None; times.len()];
    integrate_adaptive(
        rho0.mat().clone(),
        *times.last().expect("nonempty"),
        |rho| ctx.rhs(rho),
        |rho| {
            let top = rho[[dim - 1, dim - 1]].re;
            if top > top_tol {
                return Err(Error::Truncation {
                    msg: format!("top Fock level reached population {top:.2e}"),
                    suggested_dim: dim + dim / 2 + 4,
                });
            }
            Ok(())
        },
        times,
        |idx, rho| {
            out[idx] = Some(DensityOp::new(rho.clone()).expect("integrator keeps states valid"));
        },
    )?;
    Ok(out
        .into_iter()
        .map(|r| r.expect("every checkpoint recorded"))
        .collect())
}

/// Single-time convenience wrapper around the trajectory integrator.
pub fn lindblad_damped_oscillator(
    rho0: &DensityOp,
    model: &DampedOscillatorModel,
    t: f64,
) -> Result<DensityOp> {
    if t == 0.0 {
        return Ok(rho0.clone());
    }
    let mut traj = lindblad_damped_trajectory(rho0, model, &[t])?;
    Ok(traj.pop().expect("one checkpoint"))
}

/// Push a sampled Wigner function through the damped-oscillator propagator.
///
/// The kernel is the exact Green function of the oscillator Fokker-Planck
/// equation: contraction of the mean by `exp(-gamma t / 2)` plus isotropic
/// Gaussian diffusion of variance `(nbar + 1/2)(1 - exp(-gamma t)) / 2` per
/// quadrature. It factorizes over the axes, so the convolution is two dense
/// matrix products instead of a four-dimensional sum.
///
/// The grid window must contain the contraction path toward the origin and
/// the kernel must be wide enough for the quadrature to resolve, otherwise
/// a resolution error is returned rather than a quietly lossy propagation.
pub fn fp_propagate(
    grid: &WignerGrid,
    model: &DampedOscillatorModel,
    t: f64,
) -> Result<WignerGrid> {
    model.validate()?;
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!(
            "propagation time must be finite and nonnegative, got {t}"
        )));
    }
    if t == 0.0 || model.gamma == 0.0 {
        return Ok(grid.clone());
    }
    let c = (-model.gamma * t / 2.0).exp();
    let var = (model.nbar + 0.5) / 2.0 * (1.0 - (-model.gamma * t).exp());
    let sigma = var.sqrt();
    let (dx, dp) = (grid.dx(), grid.dp());
    if sigma < 2.0 * dx.max(dp) {
        return Err(Error::Resolution {
            msg: format!(
                "diffusion kernel width {sigma:.3e} is under two grid cells; \
                 refine the grid or propagate in one longer step"
            ),
            suggested_nx: 2 * (grid.xs.len() - 1) + 1,
            suggested_np: 2 * (grid.ps.len() - 1) + 1,
        });
    }
    let kernel = |axis: &[f64]| -> Array2<f64> {
        let n = axis.len();
        let norm = 1.0 / (2.0 * std::f64::consts::PI * var).sqrt();
        let mut k = Array2::zeros((n, n));
        for i in 0..n {
            for ip in 0..n {
                let d = axis[i] - c * axis[ip];
                k[[i, ip]] = norm * (-d * d / (2.0 * var)).exp();
            }
        }
        k
    };
    let kx = kernel(&grid.xs);
    let kp = kernel(&grid.ps);
    let half = kx.dot(&grid.values) * dx;
    let values = half.dot(&kp.t()) * dp;
    let out = WignerGrid {
        xs: grid.xs.clone(),
        ps: grid.ps.clone(),
        values,
    };
    let lost = (out.mass() - grid.mass()).abs();
    if lost > 1e-3 {
        return Err(Error::Resolution {
            msg: format!(
                "propagation lost mass {lost:.2e}: kernel support leaves the window"
            ),
            suggested_nx: 2 * (grid.xs.len() - 1) + 1,
            suggested_np: 2 * (grid.ps.len() - 1) + 1,
        });
    }
    Ok(out)
}

/// One point of a negativity-decay curve.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NegativityTimePoint {
    /// Dimensionless time `gamma * t`.
    pub gamma_t: f64,
    pub delta: f64,
    pub converged: bool,
}

/// Negativity volume along a damping trajectory, computed with the
/// phase-space propagator on one shared grid.
///
/// The window is resolved from the initial state and then symmetrized about
/// the origin, so the contraction toward the origin stays inside it for all
/// times and every sample is measured on identical quadrature.
pub fn negativity_decay(
    rho0: &DensityOp,
    model: &DampedOscillatorModel,
    gamma_ts: &[f64],
    spec: &WignerGridSpec,
) -> Result<Vec<NegativityTimePoint>> {
    model.validate()?;
    if model.gamma <= 0.0 {
        return Err(Error::Domain(
            "negativity decay needs a strictly positive damping rate".into(),
        ));
    }
    if gamma_ts.is_empty() {
        return Ok(Vec::new());
    }
    if gamma_ts[0] < 0.0 || gamma_ts.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain(
            "gamma*t samples must be nonnegative and strictly increasing".into(),
        ));
    }
    let resolved = resolve_extent(rho0, spec)?;
    let sym = match resolved.extent {
        Extent::Explicit {
            x_min,
            x_max,
            p_min,
            p_max,
        } => {
            let l = x_min.abs().max(x_max.abs()).max(p_min.abs()).max(p_max.abs());
            Extent::Explicit {
                x_min: -l,
                x_max: l,
                p_min: -l,
                p_max: l,
            }
        }
        Extent::Auto { .. } => unreachable!("resolve_extent returns explicit windows"),
    };
    let shared = WignerGridSpec {
        nx: resolved.nx,
        np: resolved.np,
        extent: sym,
    };
    let w0 = wigner(rho0, &shared)?;
    let mut out = Vec::with_capacity(gamma_ts.len());
    for &gt in gamma_ts {
        let grid = if gt == 0.0 {
            w0.clone()
        } else {
            fp_propagate(&w0, model, gt / model.gamma)?
        };
        let est = negativity_volume(&grid)?;
        out.push(NegativityTimePoint {
            gamma_t: gt,
            delta: est.delta,
            converged: est.converged,
        });
    }
    Ok(out)
}

/// Serialize a decay curve as CSV with `#` metadata lines.
pub fn negativity_decay_to_csv(points: &[NegativityTimePoint]) -> String {
    use std::fmt::Write;
    let mut s = String::new();
    let _ = writeln!(s, "# columns: gamma_t,delta,converged");
    for p in points {
        let _ = writeln!(s, "{:.16e},{:.16e},{}", p.gamma_t, p.delta, p.converged);
    }
    s
}

/// Parse CSV produced by [`negativity_decay_to_csv`].
pub fn negativity_decay_from_csv(text: &str) -> Result<Vec<NegativityTimePoint>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = line.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(Error::Domain(format!(
                "decay CSV line {}: expected 3 fields",
                lineno + 1
            )));
        }
        let bad = |what: &str| Error::Domain(format!("decay CSV line {}: bad {what}", lineno + 1));
        out.push(NegativityTimePoint {
            gamma_t: parts[0].parse().map_err(|_| bad("gamma_t"))?,
            delta: parts[1].parse().map_err(|_| bad("delta"))?,
            converged: parts[2].parse().map_err(|_| bad("converged"))?,
        });
    }
    Ok(out)
}

/// Driven-dissipative model whose unique steady state is the dark state of
/// the designed coupling: a two-level atom exchanging excitations with the
/// mirror through `H = omega0 (sigma+ A + sigma- A^dag)` while decaying at
/// rate `gamma_a`.
#[derive(Debug, Clone)]
pub struct DarkStateModel {
    pub design: CouplingDesign,
    /// Overall drive strength multiplying the designed operator.
    pub omega0: f64,
    /// Atomic spontaneous-emission rate.
    pub gamma_a: f64,
    /// Mirror truncation: defaults to twice the target's support.
    pub mirror_dim: usize,
    pub policy: TruncationPolicy,
    /// Grid for per-sample negativity along the relaxation; `None` skips it.
    pub delta_spec: Option<WignerGridSpec>,
}

impl DarkStateModel {
    pub fn new(design: CouplingDesign, omega0: f64, gamma_a: f64) -> Self {
        let mirror_dim = 2 * (design.n_top + 1);
        Self {
            design,
            omega0,
            gamma_a,
            mirror_dim,
            policy: TruncationPolicy::default(),
            delta_spec: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.omega0 > 0.0) || !(self.gamma_a > 0.0) {
            return Err(Error::Domain(format!(
                "drive and decay rates must be positive, got omega0 = {}, gamma_a = {}",
                self.omega0, self.gamma_a
            )));
        }
        if self.mirror_dim < self.design.n_top + 2 {
            return Err(Error::Dimension(format!(
                "mirror_dim {} cannot hold the dark state's {} levels plus headroom",
                self.mirror_dim,
                self.design.n_top + 1
            )));
        }
        Ok(())
    }

    /// The mirror state the dissipation funnels into.
    pub fn dark_target(&self) -> Result<FockVector> {
        sphere_coherent_state(&SphereParams {
            n_top: self.design.n_top,
            lambda: self.design.lambda,
            mu: C64::new(self.design.mu, 0.0),
        })
    }

    fn operators(&self, mirror_dim: usize) -> (Array2<C64>, Array2<C64>) {
        let a = dark_state_operator(&self.design, mirror_dim) * C64::new(self.omega0, 0.0);
        let ad = a.t().mapv(|z| z.conj());
        let h = kron(&sigma_plus(), &a) + kron(&sigma_minus(), &ad);
        let jump = kron(&sigma_minus(), &Array2::eye(mirror_dim));
        (h, jump)
    }
}

/// Right-hand side of the relaxation master equation evaluated at `rho`
/// (joint atom x mirror state), returned as its Frobenius norm. Zero, up to
/// roundoff, exactly when `rho` is stationary; the dark state
/// `|g> (x) |target>` gives machine-level values.
pub fn relaxation_generator_residual(model: &DarkStateModel, rho: &DensityOp) -> Result<f64> {
    model.validate()?;
    if !rho.dim().is_multiple_of(2) {
        return Err(Error::Dimension(format!(
            "joint state dimension {} is not atom x mirror",
            rho.dim()
        )));
    }
    let mirror_dim = rho.dim() / 2;
    let (h, jump) = model.operators(mirror_dim);
    let gen = relaxation_rhs(&h, &jump, model.gamma_a, rho.mat());
    Ok(crate::linalg::frobenius_norm(&gen))
}

fn relaxation_rhs(
    h: &Array2<C64>,
    jump: &Array2<C64>,
    gamma_a: f64,
    rho: &Array2<C64>,
) -> Array2<C64> {
    let i = C64::new(0.0, 1.0);
    let jd = jump.t().mapv(|z| z.conj());
    let jdj = jd.dot(jump);
    let mut out = (h.dot(rho) - rho.dot(h)) * (-i);
    let mut diss = jump.dot(rho).dot(&jd) * 2.0;
    diss -= &jdj.dot(rho);
    diss -= &rho.dot(&jdj);
    out += &(diss * C64::new(gamma_a / 2.0, 0.0));
    out
}

/// One sample of a relaxation run.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RelaxationSample {
    pub t: f64,
    /// Overlap of the reduced mirror state with the dark target.
    pub fidelity: f64,
    /// Negativity volume of the reduced mirror state, if requested.
    pub delta: Option<f64>,
    pub trace_defect: f64,
}

/// Result of [`dark_state_relaxation`].
#[derive(Debug, Clone)]
pub struct RelaxationRun {
    pub samples: Vec<RelaxationSample>,
    /// Reduced mirror state at the final time.
    pub final_mirror: DensityOp,
    /// Mirror dimension actually used (it can grow once if the truncation
    /// monitor trips).
    pub mirror_dim: usize,
}

/// Relax an initial mirror state toward the dark state: the atom is started
/// in its ground state, driven through the designed coupling, and damped.
/// Samples are taken at `n_samples` evenly spaced times from 0 to `t_final`.
///
/// If the top mirror level becomes populated beyond the policy tolerance,
/// the run restarts once with a half-again larger mirror; a second trip is
/// reported as an error.
pub fn dark_state_relaxation(
    model: &DarkStateModel,
    rho0_mirror: &DensityOp,
    t_final: f64,
    n_samples: usize,
) -> Result<RelaxationRun> {
    model.validate()?;
    if !(t_final > 0.0) || n_samples < 2 {
        return Err(Error::Domain(
            "relaxation needs t_final > 0 and at least two samples".into(),
        ));
    }
    match dark_state_relaxation_at(model, rho0_mirror, t_final, n_samples, model.mirror_dim) {
        Err(Error::Truncation { suggested_dim, .. }) => {
            dark_state_relaxation_at(model, rho0_mirror, t_final, n_samples, suggested_dim)
        }
        other => other,
    }
}

fn dark_state_relaxation_at(
    model: &DarkStateModel,
    rho0_mirror: &DensityOp,
    t_final: f64,
    n_samples: usize,
    mirror_dim: usize,
) -> Result<RelaxationRun> {
    if rho0_mirror.dim() > mirror_dim {
        return Err(Error::Dimension(format!(
            "initial mirror state dimension {} exceeds mirror_dim {}",
            rho0_mirror.dim(),
            mirror_dim
        )));
    }
    let target = model.dark_target()?.embedded(mirror_dim)?;
    // Fixed measurement grid shared by all samples, sized by the target
    // (the largest state on the trajectory) and symmetrized about the
    // origin so it also holds the initial state.
    let delta_spec = match model.delta_spec {
        None => None,
        Some(spec) => {
            let resolved = resolve_extent(&target, &spec)?;
            let sym = match resolved.extent {
                Extent::Explicit {
                    x_min,
                    x_max,
                    p_min,
                    p_max,
                } => {
                    let l = x_min.abs().max(x_max.abs()).max(p_min.abs()).max(p_max.abs());
                    Extent::Explicit {
                        x_min: -l,
                        x_max: l,
                        p_min: -l,
                        p_max: l,
                    }
                }
                auto => auto,
            };
            Some(WignerGridSpec {
                nx: resolved.nx,
                np: resolved.np,
                extent: sym,
            })
        }
    };

    let rho_m = rho0_mirror.embedded(mirror_dim)?;
    let ground = {
        let mut g = Array2::zeros((2, 2));
        g[[0, 0]] = C64::new(1.0, 0.0);
        g
    };
    let rho_full = kron(&ground, rho_m.mat());
    let (h, jump) = model.operators(mirror_dim);
    let times: Vec<f64> = (0..n_samples)
        .map(|k| t_final * k as f64 / (n_samples - 1) as f64)
        .collect();

    let top_tol = model.policy.top_tol;
    let mut recorded: Vec<Option<Array2<C64>>> = vec![None; n_samples];
    integrate_adaptive(
        rho_full,
        t_final,
        |rho| relaxation_rhs(&h, &jump, model.gamma_a, rho),
        |rho| {
            // Population of the top mirror level, summed over the atom.
            let top = rho[[mirror_dim - 1, mirror_dim - 1]].re
                + rho[[2 * mirror_dim - 1, 2 * mirror_dim - 1]].re;
            if top > top_tol {
                return Err(Error::Truncation {
                    msg: format!("top mirror level reached population {top:.2e}"),
                    suggested_dim: mirror_dim + mirror_dim / 2 + 4,
                });
            }
            Ok(())
        },
        &times,
        |idx, rho| {
            recorded[idx] = Some(rho.clone());
        },
    )?;

    let mut samples = Vec::with_capacity(n_samples);
    let mut final_mirror = None;
    for (idx, slot) in recorded.into_iter().enumerate() {
        let full = slot.expect("every checkpoint recorded");
        let trace: C64 = (0..full.nrows()).map(|i| full[[i, i]]).sum();
        let trace_defect = (trace.re - 1.0).abs() + trace.im.abs();
        let joint = DensityOp::new(full)?;
        let mirror = joint.partial_trace_left(2)?;
        let fidelity = mirror.fidelity_pure(&target)?;
        let delta = match &delta_spec {
            None => None,
            Some(spec) => Some(negativity_volume(&wigner(&mirror, spec)?)?.delta),
        };
        samples.push(RelaxationSample {
            t: times[idx],
            fidelity,
            delta,
            trace_defect,
        });
        if idx == n_samples - 1 {
            final_mirror = Some(mirror);
        }
    }
    Ok(RelaxationRun {
        samples,
        final_mirror: final_mirror.expect("last sample exists"),
        mirror_dim,
    })
}

/// Serialize a relaxation run's samples as CSV with `#` metadata lines.
pub fn relaxation_to_csv(run: &RelaxationRun) -> String {
    use std::fmt::Write;
    let mut s = String::new();
    let _ = writeln!(s, "# mirror_dim={}", run.mirror_dim);
    let _ = writeln!(s, "# columns: t,fidelity,delta,trace_defect");
    for p in &run.samples {
        let delta = match p.delta {
            Some(d) => format!("{d:.16e}"),
            None => String::new(),
        };
        let _ = writeln!(
            s,
            "{:.16e},{:.16e},{delta},{:.16e}",
            p.t, p.fidelity, p.trace_defect
        );
    }
    s
}

/// Parse the sample table written by [`relaxation_to_csv`].
pub fn relaxation_samples_from_csv(text: &str) -> Result<Vec<RelaxationSample>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = line.split(',').map(str::trim).collect();
        if parts.len() != 4 {
            return Err(Error::Domain(format!(
                "relaxation CSV line {}: expected 4 fields",
                lineno + 1
            )));
        }
        let bad =
            |what: &str| Error::Domain(format!("relaxation CSV line {}: bad {what}", lineno + 1));
        out.push(RelaxationSample {
            t: parts[0].parse().map_err(|_| bad("t"))?,
            fidelity: parts[1].parse().map_err(|_| bad("fidelity"))?,
            delta: if parts[2].is_empty() {
                None
            } else {
                Some(parts[2].parse().map_err(|_| bad("delta"))?)
            },
            trace_defect: parts[3].parse().map_err(|_| bad("trace_defect"))?,
        });
    }
    Ok(out)
}
