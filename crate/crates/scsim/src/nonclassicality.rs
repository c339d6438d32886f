//! Wigner functions and the nonclassicality measures built on them:
//! negativity volume, quadrature squeezing, and phase-space extrema counts.
//!
//! Conventions, fixed once for the whole crate: the phase-space point is
//! `alpha = x + i p`, the Wigner function integrates to 1 over `dx dp`, the
//! vacuum is an isotropic Gaussian with variance 1/4 per quadrature and peak
//! `2 / pi`. Squeezing is reported as `s_theta = 4 Var(X_theta) - 1`, which
//! is 0 for vacuum, negative for squeezed quadratures, and `2n` for `|n>`.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::fockspace::{DensityOp, FockVector, Moments};
use crate::linalg::pairwise_sum;
use crate::{Error, Result, C64};

/// Human-readable statement of the phase-space conventions, embedded in
/// output files so grids are interpretable without the source.
pub const WIGNER_CONVENTION: &str =
    "alpha = x + i*p; integral W dx dp = 1; vacuum variance 1/4 per quadrature";

/// Convergence tolerance for the negativity-volume subsample check.
pub const NEGATIVITY_CONV_TOL: f64 = 1e-3;

/// Default relative threshold for counting phase-space extrema.
pub const DEFAULT_EXTREMA_THRESHOLD: f64 = 0.02;

/// Either a pure state or a density operator; everything in this module
/// accepts both.
#[derive(Clone, Copy)]
pub enum StateRef<'a> {
    Pure(&'a FockVector),
    Mixed(&'a DensityOp),
}

impl<'a> From<&'a FockVector> for StateRef<'a> {
    fn from(v: &'a FockVector) -> Self {
        StateRef::Pure(v)
    }
}

impl<'a> From<&'a DensityOp> for StateRef<'a> {
    fn from(r: &'a DensityOp) -> Self {
        StateRef::Mixed(r)
    }
}

impl StateRef<'_> {
    fn moments(&self) -> Moments {
        match self {
            StateRef::Pure(v) => v.moments(),
            StateRef::Mixed(r) => r.moments(),
        }
    }

    fn density(&self) -> DensityOp {
        match self {
            StateRef::Pure(v) => v.to_density(),
            StateRef::Mixed(r) => (*r).clone(),
        }
    }
}

/// Phase-space window of a grid.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub enum Extent {
    /// Window derived from the state's moments: `sigmas` standard
    /// deviations around the mean plus an absolute `pad`.
    Auto { sigmas: f64, pad: f64 },
    /// Fixed window.
    Explicit {
        x_min: f64,
        x_max: f64,
        p_min: f64,
        p_max: f64,
    },
}

/// Sampling request for a Wigner grid. Point counts must be odd so the
/// half-resolution convergence subsample shares the grid's endpoints.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct WignerGridSpec {
    pub nx: usize,
    pub np: usize,
    pub extent: Extent,
}

impl Default for WignerGridSpec {
    fn default() -> Self {
        Self {
            nx: 161,
            np: 161,
            extent: Extent::Auto {
                sigmas: 4.0,
                pad: 0.5,
            },
        }
    }
}

impl WignerGridSpec {
    fn validate(&self) -> Result<()> {
        for (name, n) in [("nx", self.nx), ("np", self.np)] {
            if n < 33 || n.is_multiple_of(2) {
                return Err(Error::Resolution {
                    msg: format!("{name} = {n} must be odd and at least 33"),
                    suggested_nx: if self.nx.is_multiple_of(2) { self.nx + 1 } else { self.nx.max(33) },
                    suggested_np: if self.np.is_multiple_of(2) { self.np + 1 } else { self.np.max(33) },
                });
            }
        }
        match self.extent {
            Extent::Auto { sigmas, pad } => {
                if !(sigmas > 0.0) || !(pad >= 0.0) {
                    return Err(Error::Domain(format!(
                        "auto extent needs sigmas > 0 and pad >= 0, got {sigmas}, {pad}"
                    )));
                }
            }
            Extent::Explicit {
                x_min,
                x_max,
                p_min,
                p_max,
            } => {
                let vals = [x_min, x_max, p_min, p_max];
                if vals.iter().any(|v| !v.is_finite()) || x_min >= x_max || p_min >= p_max {
                    return Err(Error::Domain(format!(
                        "explicit extent [{x_min}, {x_max}] x [{p_min}, {p_max}] is not a window"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Resolve an `Auto` extent against a concrete state, returning a spec with
/// an `Explicit` window. Useful when several states must share one grid,
/// for example along a relaxation trajectory.
pub fn resolve_extent<'a>(
    state: impl Into<StateRef<'a>>,
    spec: &WignerGridSpec,
) -> Result<WignerGridSpec> {
    spec.validate()?;
    let extent = match spec.extent {
        e @ Extent::Explicit { .. } => e,
        Extent::Auto { sigmas, pad } => {
            let m = state.into().moments();
            let cx = m.mean_b.re;
            let cp = m.mean_b.im;
            // The isotropic non-central spread sqrt((<x^2> + <p^2>) / 2)
            // = sqrt((2<n> + 1) / 4), deliberately not the per-quadrature
            // central variances: a squeezed non-Gaussian state carries
            // fringes well past a few sigmas of its narrow quadrature, and
            // a window sized by that quadrature clips them.
            let sigma = ((2.0 * m.mean_n + 1.0) / 4.0).sqrt();
            let half = sigmas * sigma + pad;
            Extent::Explicit {
                x_min: cx - half,
                x_max: cx + half,
                p_min: cp - half,
                p_max: cp + half,
            }
        }
    };
    Ok(WignerGridSpec {
        nx: spec.nx,
        np: spec.np,
        extent,
    })
}

/// A sampled Wigner function. `values[[i, j]] = W(xs[i], ps[j])` on uniform
/// ascending axes.
#[derive(Debug, Clone, PartialEq)]
pub struct WignerGrid {
    pub xs: Vec<f64>,
    pub ps: Vec<f64>,
    pub values: Array2<f64>,
}

/// Flat serialization form of a grid, for JSON output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WignerGridData {
    pub xs: Vec<f64>,
    pub ps: Vec<f64>,
    /// Row-major: `values[i][j] = W(xs[i], ps[j])`.
    pub values: Vec<Vec<f64>>,
}

impl From<&WignerGrid> for WignerGridData {
    fn from(g: &WignerGrid) -> Self {
        Self {
            xs: g.xs.clone(),
            ps: g.ps.clone(),
            values: g
                .values
                .rows()
                .into_iter()
                .map(|r| r.to_vec())
                .collect(),
        }
    }
}

impl TryFrom<WignerGridData> for WignerGrid {
    type Error = Error;

    fn try_from(d: WignerGridData) -> Result<Self> {
        let (nx, np) = (d.xs.len(), d.ps.len());
        if d.values.len() != nx || d.values.iter().any(|r| r.len() != np) {
            return Err(Error::Dimension(format!(
                "grid data is not {nx} x {np} rectangular"
            )));
        }
        let mut values = Array2::zeros((nx, np));
        for (i, row) in d.values.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                values[[i, j]] = v;
            }
        }
        let g = WignerGrid {
            xs: d.xs,
            ps: d.ps,
            values,
        };
        g.check_axes()?;
        Ok(g)
    }
}

impl WignerGrid {
    fn check_axes(&self) -> Result<()> {
        for (name, axis) in [("x", &self.xs), ("p", &self.ps)] {
            if axis.len() < 2 {
                return Err(Error::Dimension(format!("{name} axis too short")));
            }
            let d = axis[1] - axis[0];
            if !(d > 0.0) {
                return Err(Error::Domain(format!("{name} axis must ascend")));
            }
            for w in axis.windows(2) {
                if ((w[1] - w[0]) - d).abs() > 1e-9 * d.abs() {
                    return Err(Error::Domain(format!("{name} axis is not uniform")));
                }
            }
        }
        Ok(())
    }

    /// Grid step along x.
    pub fn dx(&self) -> f64 {
        self.xs[1] - self.xs[0]
    }

    /// Grid step along p.
    pub fn dp(&self) -> f64 {
        self.ps[1] - self.ps[0]
    }

    /// Riemann mass `sum W dx dp`, which should be 1 for a faithful grid.
    pub fn mass(&self) -> f64 {
        let flat: Vec<f64> = self.values.iter().copied().collect();
        pairwise_sum(&flat) * self.dx() * self.dp()
    }

    /// Serialize as CSV with `#` metadata lines and `x,p,w` data rows.
    pub fn to_csv(&self) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        let _ = writeln!(s, "# convention: {WIGNER_CONVENTION}");
        let _ = writeln!(s, "# nx={} np={}", self.xs.len(), self.ps.len());
        let _ = writeln!(s, "# columns: x,p,w");
        for (i, &x) in self.xs.iter().enumerate() {
            for (j, &p) in self.ps.iter().enumerate() {
                let _ = writeln!(s, "{x:.16e},{p:.16e},{:.16e}", self.values[[i, j]]);
            }
        }
        s
    }

    /// Parse CSV produced by [`WignerGrid::to_csv`].
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rows: Vec<(f64, f64, f64)> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split(',');
            let mut next = |what: &str| -> Result<f64> {
                it.next()
                    .ok_or_else(|| {
                        Error::Domain(format!("grid CSV line {}: missing {what}", lineno + 1))
                    })?
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| {
                        Error::Domain(format!("grid CSV line {}: bad {what}", lineno + 1))
                    })
            };
            rows.push((next("x")?, next("p")?, next("w")?));
        }
        if rows.len() < 4 {
            return Err(Error::Domain("grid CSV has too few rows".into()));
        }
        // Rows are written x-major: p cycles fastest.
        let np = rows
            .iter()
            .take_while(|r| r.0 == rows[0].0)
            .count();
        if np < 2 || !rows.len().is_multiple_of(np) {
            return Err(Error::Domain(format!(
                "grid CSV is not rectangular ({} rows, {np} p-values)",
                rows.len()
            )));
        }
        let nx = rows.len() / np;
        let xs: Vec<f64> = (0..nx).map(|i| rows[i * np].0).collect();
        let ps: Vec<f64> = (0..np).map(|j| rows[j].1).collect();
        let mut values = Array2::zeros((nx, np));
        for i in 0..nx {
            for j in 0..np {
                let (x, p, w) = rows[i * np + j];
                if x != xs[i] || p != ps[j] {
                    return Err(Error::Domain(format!(
                        "grid CSV row {} breaks the lattice pattern",
                        i * np + j + 1
                    )));
                }
                values[[i, j]] = w;
            }
        }
        let g = WignerGrid { xs, ps, values };
        g.check_axes()?;
        Ok(g)
    }
}

/// Sample the Wigner function of a state on a grid.
///
/// The evaluation contracts the density matrix against exact displacement
/// matrix elements, `W = (2/pi) sum_{mn} rho_mn (-1)^m <n|D(2 alpha)|m>`,
/// reorganized per off-diagonal so every entry costs one Laguerre recurrence
/// step. The result is exact for the truncated density matrix; there is no
/// further phase-space approximation, so the only quality check needed is
/// that the grid itself resolves and contains the state, which is enforced
/// through the unit-mass test below.
pub fn wigner<'a>(state: impl Into<StateRef<'a>>, spec: &WignerGridSpec) -> Result<WignerGrid> {
    let state = state.into();
    let resolved = resolve_extent(state, spec)?;
    let (x_min, x_max, p_min, p_max) = match resolved.extent {
        Extent::Explicit {
            x_min,
            x_max,
            p_min,
            p_max,
        } => (x_min, x_max, p_min, p_max),
        Extent::Auto { .. } => unreachable!("resolve_extent returns explicit windows"),
    };
    let (nx, np) = (resolved.nx, resolved.np);
    let xs: Vec<f64> = (0..nx)
        .map(|i| x_min + (x_max - x_min) * i as f64 / (nx - 1) as f64)
        .collect();
    let ps: Vec<f64> = (0..np)
        .map(|j| p_min + (p_max - p_min) * j as f64 / (np - 1) as f64)
        .collect();

    let rho = state.density();
    let d = rho.dim();
    let mat = rho.mat();

    // Per-diagonal weights with everything point-independent folded in:
    // diag[k][m] = (parity) * t_{k,m} * rho[m, m+k], doubled for k >= 1
    // because the conjugate diagonal contributes its mirror term.
    let mut weights: Vec<Vec<C64>> = Vec::with_capacity(d);
    for k in 0..d {
        let mut t = (-0.5 * crate::specfun::ln_factorial::<f64>(k)).exp();
        let mut wk = Vec::with_capacity(d - k);
        for m in 0..d - k {
            if m > 0 {
                t *= (m as f64 / (m + k) as f64).sqrt();
            }
            let parity = if m % 2 == 0 { 1.0 } else { -1.0 };
            let scale = if k == 0 { 1.0 } else { 2.0 };
            wk.push(mat[[m, m + k]] * (parity * t * scale));
        }
        weights.push(wk);
    }

    let mut values = Array2::zeros((nx, np));
    for (i, &x) in xs.iter().enumerate() {
        for (j, &p) in ps.iter().enumerate() {
            let beta = C64::new(2.0 * x, 2.0 * p);
            let r2 = beta.norm_sqr();
            let gauss = (-0.5 * r2).exp();
            let mut total = 0.0;
            let mut beta_k = C64::new(1.0, 0.0);
            for (k, wk) in weights.iter().enumerate() {
                if k > 0 {
                    beta_k *= beta;
                }
                // Laguerre recurrence in m at fixed upper index k.
                let mut prev = 0.0;
                let mut cur = 1.0;
                let mut acc = C64::new(0.0, 0.0);
                for (m, w) in wk.iter().enumerate() {
                    if m == 1 {
                        prev = 1.0;
                        cur = 1.0 + k as f64 - r2;
                    } else if m > 1 {
                        let mf = (m - 1) as f64;
                        let next = ((2.0 * mf + k as f64 + 1.0 - r2) * cur
                            - (mf + k as f64) * prev)
                            / (mf + 1.0);
                        prev = cur;
                        cur = next;
                    }
                    acc += w * cur;
                }
                total += (acc * beta_k).re;
            }
            values[[i, j]] = 2.0 / std::f64::consts::PI * gauss * total;
        }
    }

    let grid = WignerGrid { xs, ps, values };
    let mass = grid.mass();
    if (mass - 1.0).abs() > 1e-4 {
        return Err(Error::Resolution {
            msg: format!(
                "grid mass {mass:.6} is not 1: window too small or sampling too coarse"
            ),
            suggested_nx: 2 * (nx - 1) + 1,
            suggested_np: 2 * (np - 1) + 1,
        });
    }
    Ok(grid)
}

/// Negativity volume with a built-in convergence probe.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NegativityEstimate {
    /// `integral |W| dx dp - 1` on the full grid.
    pub delta: f64,
    /// Same quantity from the stride-2 subsample.
    pub delta_coarse: f64,
    /// Whether the two agree within [`NEGATIVITY_CONV_TOL`].
    pub converged: bool,
}

/// Negativity volume `delta = integral |W| - 1`.
///
/// The convergence flag compares against the half-resolution subsample; the
/// subsample shares the grid's endpoints only when the point counts are odd,
/// which is why the grid spec enforces that. The flag is conservative: it
/// can misreport a converged value as unconverged near the tolerance, never
/// the other way around for a smooth refinement sequence.
pub fn negativity_volume(grid: &WignerGrid) -> Result<NegativityEstimate> {
    let (nx, np) = (grid.xs.len(), grid.ps.len());
    if nx.is_multiple_of(2) || np.is_multiple_of(2) {
        return Err(Error::Resolution {
            msg: format!("negativity needs odd point counts, got {nx} x {np}"),
            suggested_nx: nx + 1 - nx % 2,
            suggested_np: np + 1 - np % 2,
        });
    }
    let cell = grid.dx() * grid.dp();
    let abs_flat: Vec<f64> = grid.values.iter().map(|v| v.abs()).collect();
    let delta = pairwise_sum(&abs_flat) * cell - 1.0;

    let mut coarse: Vec<f64> = Vec::with_capacity(nx.div_ceil(2) * np.div_ceil(2));
    for i in (0..nx).step_by(2) {
        for j in (0..np).step_by(2) {
            coarse.push(grid.values[[i, j]].abs());
        }
    }
    let delta_coarse = pairwise_sum(&coarse) * 4.0 * cell - 1.0;
    Ok(NegativityEstimate {
        delta,
        delta_coarse,
        converged: (delta - delta_coarse).abs() <= NEGATIVITY_CONV_TOL,
    })
}

/// Quadrature squeezing `s_theta = 4 Var(X_theta) - 1` from exact operator
/// moments, where `X_theta = (b e^{-i theta} + b^dag e^{i theta}) / 2`.
pub fn squeezing<'a>(state: impl Into<StateRef<'a>>, theta: f64) -> f64 {
    let m = state.into().moments();
    let rot = C64::new(0.0, -theta).exp();
    let mean = (m.mean_b * rot).re;
    2.0 * (m.mean_bb * rot * rot).re + 2.0 * m.mean_n - 4.0 * mean * mean
}

/// Mass and central second moments of a grid, mass-normalized.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GridMoments {
    pub mass: f64,
    pub mean_x: f64,
    pub mean_p: f64,
    pub var_x: f64,
    pub var_p: f64,
    pub cov_xp: f64,
}

/// Integrate low-order moments of the grid. Because the Wigner function is
/// the Weyl-symmetric quasidistribution, these match symmetric operator
/// moments; in particular the variances here are directly comparable to
/// [`squeezing`].
pub fn grid_moments(grid: &WignerGrid) -> GridMoments {
    let (nx, np) = (grid.xs.len(), grid.ps.len());
    let n = nx * np;
    let mut w = Vec::with_capacity(n);
    let mut wx = Vec::with_capacity(n);
    let mut wp = Vec::with_capacity(n);
    let mut wxx = Vec::with_capacity(n);
    let mut wpp = Vec::with_capacity(n);
    let mut wxp = Vec::with_capacity(n);
    for i in 0..nx {
        let x = grid.xs[i];
        for j in 0..np {
            let p = grid.ps[j];
            let v = grid.values[[i, j]];
            w.push(v);
            wx.push(v * x);
            wp.push(v * p);
            wxx.push(v * x * x);
            wpp.push(v * p * p);
            wxp.push(v * x * p);
        }
    }
    let cell = grid.dx() * grid.dp();
    let mass = pairwise_sum(&w) * cell;
    let mean_x = pairwise_sum(&wx) * cell / mass;
    let mean_p = pairwise_sum(&wp) * cell / mass;
    let xx = pairwise_sum(&wxx) * cell / mass;
    let pp = pairwise_sum(&wpp) * cell / mass;
    let xp = pairwise_sum(&wxp) * cell / mass;
    GridMoments {
        mass,
        mean_x,
        mean_p,
        var_x: xx - mean_x * mean_x,
        var_p: pp - mean_p * mean_p,
        cov_xp: xp - mean_x * mean_p,
    }
}

/// Squeezing measured from a sampled grid instead of operator moments.
pub fn squeezing_from_grid(grid: &WignerGrid, theta: f64) -> f64 {
    let m = grid_moments(grid);
    let (c, s) = (theta.cos(), theta.sin());
    let var = c * c * m.var_x + s * s * m.var_p + 2.0 * c * s * m.cov_xp;
    4.0 * var - 1.0
}

/// Counts of significant phase-space features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtremaCount {
    /// Connected regions with `W > threshold`.
    pub positive: usize,
    /// Connected regions with `W < -threshold`.
    pub negative: usize,
}

impl ExtremaCount {
    pub fn total(&self) -> usize {
        self.positive + self.negative
    }
}

/// Count significant extrema as connected components of the super- and
/// sub-level sets at `threshold_frac * max|W|`, with 8-connectivity.
///
/// Counting level-set components rather than strict local extrema is
/// deliberate: a crescent-shaped lobe carries a pair of symmetric numerical
/// maxima that are one physical feature, and a component count sees it as
/// one. The threshold suppresses quadrature ripples around zero.
pub fn count_extrema(grid: &WignerGrid, threshold_frac: f64) -> Result<ExtremaCount> {
    if !(threshold_frac > 0.0 && threshold_frac < 1.0) {
        return Err(Error::Domain(format!(
            "threshold fraction must be in (0, 1), got {threshold_frac}"
        )));
    }
    let peak = grid.values.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    if peak == 0.0 {
        return Ok(ExtremaCount {
            positive: 0,
            negative: 0,
        });
    }
    let tau = threshold_frac * peak;
    let count = |sign: f64| -> usize {
        let (nx, np) = (grid.xs.len(), grid.ps.len());
        let inside =
            |i: usize, j: usize| -> bool { sign * grid.values[[i, j]] > tau };
        let mut seen = vec![false; nx * np];
        let mut components = 0;
        let mut stack = Vec::new();
        for i0 in 0..nx {
            for j0 in 0..np {
                if seen[i0 * np + j0] || !inside(i0, j0) {
                    continue;
                }
                components += 1;
                seen[i0 * np + j0] = true;
                stack.push((i0, j0));
                while let Some((i, j)) = stack.pop() {
                    for di in -1i64..=1 {
                        for dj in -1i64..=1 {
                            let (ni, nj) = (i as i64 + di, j as i64 + dj);
                            if ni < 0 || nj < 0 || ni >= nx as i64 || nj >= np as i64 {
                                continue;
                            }
                            let (ni, nj) = (ni as usize, nj as usize);
                            if !seen[ni * np + nj] && inside(ni, nj) {
                                seen[ni * np + nj] = true;
                                stack.push((ni, nj));
                            }
                        }
                    }
                }
            }
        }
        components
    };
    Ok(ExtremaCount {
        positive: count(1.0),
        negative: count(-1.0),
    })
}
