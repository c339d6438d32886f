//! Inverse design of driving-field ratios.
//!
//! Given the target family parameters `(N, lambda, mu)` and the drive
//! amplitudes `alpha_1..alpha_N`, this module solves the linear conditions
//! that make the sphere-coherent state an exact dark state of the engineered
//! jump operator
//! `A = f_0(n, alpha_0) - sum_j r_j alpha_j f_1(n, alpha_j) b`,
//! where `alpha_0^2` sits on a root of `L_N` so that the ladder terminates.
//!
//! The system matrix mixes rows of very different scale (its entries carry
//! `L_{n-1}^1(alpha_j^2)` factors spanning several orders), so a plain LU
//! solve leaves a residual near 1e-12 even though the system is only mildly
//! ill-conditioned. The solver therefore always runs a few rounds of
//! iterative refinement with compensated (error-free transformation) dot
//! products, carrying the solution as an unevaluated hi + lo pair. The
//! reported least-squares residual describes that refined pair; the public
//! `ratios` are its correctly rounded f64 part.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::fockspace::{annihilation, f_q_diagonal, f_q_value, FockVector};
use crate::linalg;
use crate::scs::{sphere_coherent_state, SphereParams};
use crate::specfun::{g_value, laguerre, laguerre_root};
use crate::{C64, Error, Result};

/// Condition-number ceiling beyond which a design is reported infeasible
/// rather than solved.
const COND_LIMIT: f64 = 1e12;

/// A solved coupling design.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CouplingDesign {
    /// Highest occupied Fock level of the target state.
    pub n_top: usize,
    /// Sphere curvature of the target state.
    pub lambda: f64,
    /// Amplitude parameter of the target state.
    pub mu: f64,
    /// Carrier drive amplitude, `sqrt` of the selected root of `L_N`.
    pub alpha0: f64,
    /// Index of the selected root, 0 for the smallest.
    pub root_index: usize,
    /// Sideband drive amplitudes, one per level transition.
    pub alphas: Vec<f64>,
    /// Drive strength ratios `Omega_j / Omega_0`.
    pub ratios: Vec<f64>,
    /// Low-order corrections such that `ratios[j] + ratios_lo[j]` is the
    /// extended-precision solution whose residual is `ls_residual`.
    pub ratios_lo: Vec<f64>,
    /// Euclidean residual of the refined solution in the solved system.
    pub ls_residual: f64,
    /// Relative dark-state residual `||A psi|| / ||A||` of the target state.
    pub ds_residual: f64,
    /// 1-norm condition number of the system matrix.
    pub condition: f64,
}

/// Default drive amplitudes `alpha_j = j / 10`.
pub fn default_alphas(n_top: usize) -> Vec<f64> {
    (1..=n_top).map(|j| j as f64 / 10.0).collect()
}

fn validate_inputs(n_top: usize, lambda: f64, mu: f64, alphas: &[f64]) -> Result<()> {
    if n_top == 0 {
        return Err(Error::Domain("target needs at least two levels".into()));
    }
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::Domain(format!(
            "curvature must be finite and >= 0, got {lambda}"
        )));
    }
    if !mu.is_finite() || mu == 0.0 {
        return Err(Error::Domain(format!(
            "mu must be finite and nonzero, got {mu}"
        )));
    }
    if alphas.len() != n_top {
        return Err(Error::Dimension(format!(
            "need {n_top} drive amplitudes, got {}",
            alphas.len()
        )));
    }
    for (j, &a) in alphas.iter().enumerate() {
        if !a.is_finite() || a == 0.0 {
            return Err(Error::Domain(format!(
                "drive amplitude {} is {a}, must be finite and nonzero",
                j + 1
            )));
        }
    }
    for i in 0..alphas.len() {
        for j in (i + 1)..alphas.len() {
            if alphas[i] == alphas[j] {
                return Err(Error::Domain(format!(
                    "drive amplitudes must be distinct, {} repeats",
                    alphas[i]
                )));
            }
        }
    }
    Ok(())
}

// Error-free transformations: two_sum splits a + b into rounded sum and
// exact remainder, two_prod does the same for a * b via FMA.
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let err = a.mul_add(b, -p);
    (p, err)
}

// Compensated dot: sum_i a_i * b_i with the rounding errors carried along,
// returned as a hi + lo pair.
fn dot_dd(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut hi = 0.0;
    let mut lo = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        let (p, pe) = two_prod(x, y);
        let (s, se) = two_sum(hi, p);
        hi = s;
        lo += pe + se;
    }
    (hi, lo)
}

// Residual r = rhs - M (x_hi + x_lo), each component accumulated in
// extended precision and rounded once at the end.
fn residual_dd(
    m: &Array2<f64>,
    x_hi: &Array1<f64>,
    x_lo: &Array1<f64>,
    rhs: &Array1<f64>,
) -> Array1<f64> {
    let n = rhs.len();
    let mut r = Array1::zeros(n);
    for i in 0..n {
        let row: Vec<f64> = m.row(i).to_vec();
        let (hi1, lo1) = dot_dd(&row, x_hi.as_slice().unwrap());
        let (hi2, lo2) = dot_dd(&row, x_lo.as_slice().unwrap());
        // rhs - (hi1 + hi2 + lo1 + lo2), largest terms cancelled first
        let (s, e) = two_sum(rhs[i], -hi1);
        r[i] = s + (e - hi2 - lo1 - lo2);
    }
    r
}

/// Solve for the drive ratios using the smallest root of `L_N`.
pub fn solve_couplings(
    n_top: usize,
    lambda: f64,
    mu: f64,
    alphas: &[f64],
) -> Result<CouplingDesign> {
    solve_couplings_with_root(n_top, lambda, mu, alphas, 0)
}

/// Solve for the drive ratios with an explicit root choice for `alpha_0^2`.
/// Every root of `L_N` terminates the ladder; the smallest keeps the carrier
/// drive weakest and is the default.
pub fn solve_couplings_with_root(
    n_top: usize,
    lambda: f64,
    mu: f64,
    alphas: &[f64],
    root_index: usize,
) -> Result<CouplingDesign> {
    validate_inputs(n_top, lambda, mu, alphas)?;
    let root = laguerre_root::<f64>(n_top, root_index)?;
    let alpha0 = root.sqrt();

    // Row n (1-based): sum_j alpha_j e^{-alpha_j^2/2} L_{n-1}^1(alpha_j^2) xi_j
    //                  = n L_{n-1}(alpha0^2) / (sqrt(N - n + 1) g(lambda, n))
    // with xi_j = mu e^{alpha0^2/2} Omega_j / Omega_0.
    let n = n_top;
    let mut m = Array2::<f64>::zeros((n, n));
    let mut rhs = Array1::<f64>::zeros(n);
    for row in 1..=n {
        for (col, &aj) in alphas.iter().enumerate() {
            m[[row - 1, col]] = aj * (-0.5 * aj * aj).exp() * laguerre(row - 1, 1, aj * aj);
        }
        let g = g_value(lambda, n_top, row)?;
        rhs[row - 1] =
            row as f64 * laguerre(row - 1, 0, root) / (((n_top - row + 1) as f64).sqrt() * g);
    }

    let condition = linalg::cond_1(&m).map_err(|_| {
        Error::Infeasible("system matrix is numerically singular".into())
    })?;
    if !condition.is_finite() || condition > COND_LIMIT {
        return Err(Error::Infeasible(format!(
            "system matrix condition number {condition:.3e} exceeds {COND_LIMIT:.0e}; \
             spread the drive amplitudes further apart"
        )));
    }

    let mut xi_hi = linalg::solve_real(&m, &rhs)
        .map_err(|_| Error::Infeasible("system matrix is numerically singular".into()))?;
    let mut xi_lo = Array1::<f64>::zeros(n);

    // Refinement with compensated residuals. Three rounds push the residual
    // of the hi + lo pair to a few ulps of the rhs.
    for _ in 0..3 {
        let r = residual_dd(&m, &xi_hi, &xi_lo, &rhs);
        let d = linalg::solve_real(&m, &r)
            .map_err(|_| Error::Infeasible("refinement solve failed".into()))?;
        for i in 0..n {
            let (s, e) = two_sum(xi_hi[i], d[i] + xi_lo[i]);
            xi_hi[i] = s;
            xi_lo[i] = e;
        }
    }
    let r = residual_dd(&m, &xi_hi, &xi_lo, &rhs);
    let ls_residual = r.iter().map(|v| v * v).sum::<f64>().sqrt();

    // Undo the xi scaling: r_j = xi_j e^{-alpha0^2/2} / mu.
    let scale = (-0.5 * root).exp() / mu;
    let ratios: Vec<f64> = xi_hi.iter().map(|x| x * scale).collect();
    let ratios_lo: Vec<f64> = xi_lo.iter().map(|x| x * scale).collect();

    let mut design = CouplingDesign {
        n_top,
        lambda,
        mu,
        alpha0,
        root_index,
        alphas: alphas.to_vec(),
        ratios,
        ratios_lo,
        ls_residual,
        ds_residual: f64::NAN,
        condition,
    };
    let target = sphere_coherent_state(&SphereParams {
        n_top,
        lambda,
        mu: C64::new(mu, 0.0),
    })?;
    design.ds_residual = dark_state_residual(&design, &target)?;
    Ok(design)
}

/// The engineered jump operator
/// `A = f_0(n, alpha0) - sum_j r_j alpha_j f_1(n, alpha_j) b`
/// on a `dim`-level space, in units of the carrier drive.
pub fn dark_state_operator(design: &CouplingDesign, dim: usize) -> Array2<C64> {
    let b = annihilation(dim);
    let mut a = f_q_diagonal(0, design.alpha0, dim);
    for (r, &aj) in design.ratios.iter().zip(&design.alphas) {
        let f1b = f_q_diagonal(1, aj, dim).dot(&b);
        a = a - f1b.mapv(|v| v * (r * aj));
    }
    a
}

/// Relative dark-state residual `||A psi|| / ||A||_2`.
pub fn dark_state_residual(design: &CouplingDesign, state: &FockVector) -> Result<f64> {
    let a = dark_state_operator(design, state.dim());
    let applied = a.dot(state.amps());
    let num: f64 = applied.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let denom = linalg::spectral_norm(&a)?;
    if denom == 0.0 {
        return Err(Error::Domain("dark operator is identically zero".into()));
    }
    Ok(num / denom)
}

/// Effective motional deformation seen by the mirror,
/// `f(n) = sum_j r_j alpha_j f_1(n, alpha_j) / f_0(n, alpha0)`.
///
/// The denominator vanishes at `n = N` (that is the ladder-termination
/// root), so the value diverges there; below the pole the dark state obeys
/// `f(n) b |psi> = |psi>` row by row.
pub fn motional_deformation(design: &CouplingDesign, n: usize) -> Result<f64> {
    let f0 = f_q_value(0, n, design.alpha0);
    if n == design.n_top || f0.abs() < 1e-12 {
        return Err(Error::Pole(format!(
            "motional deformation diverges at level {n} (carrier weight {f0:.3e})"
        )));
    }
    let mut num = 0.0;
    for (r, &aj) in design.ratios.iter().zip(&design.alphas) {
        num += r * aj * f_q_value(1, n, aj);
    }
    Ok(num / f0)
}

/// One row of a curvature sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepPoint {
    pub lambda: f64,
    pub feasible: bool,
    pub ls_residual: f64,
    pub ds_residual: f64,
    pub condition: f64,
    pub ratios: Vec<f64>,
}

/// Solve the design across a curvature grid. Infeasible points are flagged
/// rather than aborting the sweep.
pub fn sweep_curvature(
    n_top: usize,
    mu: f64,
    alphas: &[f64],
    lambdas: &[f64],
) -> Result<Vec<SweepPoint>> {
    validate_inputs(n_top, if lambdas.is_empty() { 0.0 } else { lambdas[0].max(0.0) }, mu, alphas)?;
    let mut out = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        match solve_couplings(n_top, lambda, mu, alphas) {
            Ok(d) => out.push(SweepPoint {
                lambda,
                feasible: true,
                ls_residual: d.ls_residual,
                ds_residual: d.ds_residual,
                condition: d.condition,
                ratios: d.ratios,
            }),
            Err(Error::Infeasible(_)) => out.push(SweepPoint {
                lambda,
                feasible: false,
                ls_residual: f64::NAN,
                ds_residual: f64::NAN,
                condition: f64::NAN,
                ratios: vec![f64::NAN; n_top],
            }),
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Serialize sweep rows as CSV. Lines starting with `#` are comments; the
/// data columns are `lambda, feasible, ls_residual, ds_residual, condition,
/// ratio_1..ratio_N`.
pub fn sweep_to_csv(points: &[SweepPoint]) -> String {
    use std::fmt::Write;
    let mut s = String::new();
    let n = points.first().map_or(0, |p| p.ratios.len());
    let _ = write!(s, "# lambda,feasible,ls_residual,ds_residual,condition");
    for j in 1..=n {
        let _ = write!(s, ",ratio_{j}");
    }
    let _ = writeln!(s);
    for p in points {
        let _ = write!(
            s,
            "{:.16e},{},{:.16e},{:.16e},{:.16e}",
            p.lambda,
            if p.feasible { 1 } else { 0 },
            p.ls_residual,
            p.ds_residual,
            p.condition
        );
        for r in &p.ratios {
            let _ = write!(s, ",{r:.16e}");
        }
        let _ = writeln!(s);
    }
    s
}

/// Parse CSV produced by [`sweep_to_csv`], skipping `#` comment lines.
pub fn sweep_from_csv(text: &str) -> Result<Vec<SweepPoint>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 6 {
            return Err(Error::Domain(format!(
                "sweep CSV line {}: expected at least 6 fields, got {}",
                lineno + 1,
                fields.len()
            )));
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| Error::Domain(format!("sweep CSV line {}: bad number {s:?}", lineno + 1)))
        };
        let lambda = parse(fields[0])?;
        let feasible = fields[1] == "1";
        let ls_residual = parse(fields[2])?;
        let ds_residual = parse(fields[3])?;
        let condition = parse(fields[4])?;
        let ratios = fields[5..]
            .iter()
            .map(|f| parse(f))
            .collect::<Result<Vec<f64>>>()?;
        out.push(SweepPoint {
            lambda,
            feasible,
            ls_residual,
            ds_residual,
            condition,
            ratios,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn keystone_design_matches_reference_ratios() {
        let d = solve_couplings(2, 1.0, 0.4, &[0.1, 0.2]).unwrap();
        assert_relative_eq!(d.ratios[0], -135.558_886_2, max_relative = 1e-7);
        assert_relative_eq!(d.ratios[1], 71.421_813_1, max_relative = 1e-7);
        assert_relative_eq!(d.alpha0, 0.765_366_864_730_179_5, epsilon = 1e-13);
        assert!(d.ls_residual < 1e-12, "ls residual {:.2e}", d.ls_residual);
        assert!(d.ds_residual < 1e-10, "ds residual {:.2e}", d.ds_residual);
        assert!(d.condition < 1e8);
    }

    #[test]
    fn single_transition_design_has_closed_form() {
        // N = 1: the system is scalar. alpha0 = 1 (root of L_1),
        // xi = L_0(1) / (g(lambda, 1) alpha_1 e^{-alpha_1^2/2}).
        let (lambda, mu, a1) = (1.0, 0.4, 0.1);
        let d = solve_couplings(1, lambda, mu, &[a1]).unwrap();
        let s = (1.0_f64 + lambda * lambda / 4.0).sqrt();
        let g = lambda + s;
        let xi = 1.0 / (g * a1 * (-0.5 * a1 * a1).exp());
        assert_relative_eq!(xi, 4.745_025_463_224_88, max_relative = 1e-12);
        let want_ratio = xi * (-0.5_f64).exp() / mu;
        assert_relative_eq!(d.ratios[0], want_ratio, max_relative = 1e-12);
    }

    #[test]
    fn designed_state_is_in_the_kernel() {
        for (n_top, lambda) in [(2usize, 0.5), (3, 1.0), (4, 2.0)] {
            let d = solve_couplings(n_top, lambda, 0.4, &default_alphas(n_top)).unwrap();
            let psi = sphere_coherent_state(&SphereParams {
                n_top,
                lambda,
                mu: C64::new(0.4, 0.0),
            })
            .unwrap();
            let resid = dark_state_residual(&d, &psi).unwrap();
            assert!(
                resid < 1e-10,
                "N = {n_top}, lambda = {lambda}: residual {resid:.2e}"
            );
        }
    }

    #[test]
    fn recurrence_roundtrip_reaches_unit_fidelity() {
        let (n_top, lambda, mu) = (3usize, 1.0, 0.4);
        let d = solve_couplings(n_top, lambda, mu, &default_alphas(n_top)).unwrap();
        let rebuilt = crate::scs::nonlinear_cs_from_recurrence(
            &d.ratios,
            d.alpha0,
            &d.alphas,
            n_top + 1,
        )
        .unwrap();
        let target = sphere_coherent_state(&SphereParams {
            n_top,
            lambda,
            mu: C64::new(mu, 0.0),
        })
        .unwrap();
        let fid = rebuilt.fidelity(&target).unwrap();
        assert!(fid > 1.0 - 1e-12, "fidelity defect {:.2e}", 1.0 - fid);
    }

    #[test]
    fn residual_distinguishes_wrong_states() {
        let d = solve_couplings(2, 1.0, 0.4, &[0.1, 0.2]).unwrap();
        let wrong = FockVector::fock(0, 3).unwrap();
        let resid = dark_state_residual(&d, &wrong).unwrap();
        assert!(resid > 1e-3, "vacuum should not be dark, residual {resid:.2e}");
    }

    #[test]
    fn alternative_roots_also_terminate_the_ladder() {
        let (n_top, lambda, mu) = (3usize, 1.0, 0.4);
        for root_index in 0..n_top {
            let d =
                solve_couplings_with_root(n_top, lambda, mu, &default_alphas(n_top), root_index)
                    .unwrap();
            let psi = sphere_coherent_state(&SphereParams {
                n_top,
                lambda,
                mu: C64::new(mu, 0.0),
            })
            .unwrap();
            let resid = dark_state_residual(&d, &psi).unwrap();
            assert!(
                resid < 1e-9,
                "root {root_index}: residual {resid:.2e}"
            );
        }
    }

    #[test]
    fn motional_deformation_reproduces_the_state_below_the_pole() {
        let (n_top, lambda, mu) = (3usize, 1.0, 0.4);
        let d = solve_couplings(n_top, lambda, mu, &default_alphas(n_top)).unwrap();
        let psi = sphere_coherent_state(&SphereParams {
            n_top,
            lambda,
            mu: C64::new(mu, 0.0),
        })
        .unwrap();
        // Row n of f(n) b |psi> = |psi> reads
        // f(n) sqrt(n+1) c_{n+1} = c_n, valid for n < N.
        for n in 0..n_top {
            let f = motional_deformation(&d, n).unwrap();
            let lhs = f * ((n + 1) as f64).sqrt() * psi.amps()[n + 1].re;
            let rhs = psi.amps()[n].re;
            assert_relative_eq!(lhs, rhs, max_relative = 1e-9);
        }
        assert!(matches!(
            motional_deformation(&d, n_top),
            Err(Error::Pole(_))
        ));
    }

    #[test]
    fn bad_inputs_are_rejected() {
        assert!(solve_couplings(0, 1.0, 0.4, &[]).is_err());
        assert!(solve_couplings(2, -1.0, 0.4, &[0.1, 0.2]).is_err());
        assert!(solve_couplings(2, 1.0, 0.0, &[0.1, 0.2]).is_err());
        assert!(solve_couplings(2, 1.0, 0.4, &[0.1]).is_err());
        assert!(solve_couplings(2, 1.0, 0.4, &[0.1, 0.1]).is_err());
        assert!(solve_couplings(2, 1.0, 0.4, &[0.1, 0.0]).is_err());
        assert!(solve_couplings_with_root(2, 1.0, 0.4, &[0.1, 0.2], 2).is_err());
    }

    #[test]
    fn near_coincident_drives_report_infeasible() {
        // Drive amplitudes this close make the system matrix effectively
        // rank deficient.
        let err = solve_couplings(3, 1.0, 0.4, &[0.1, 0.1 + 1e-13, 0.3]).unwrap_err();
        assert!(matches!(err, Error::Infeasible(_)), "got {err:?}");
    }

    #[test]
    fn sweep_flags_infeasible_points_and_roundtrips_csv() {
        let lambdas = [0.0, 0.5, 1.0];
        let points = sweep_curvature(2, 0.4, &[0.1, 0.2], &lambdas).unwrap();
        assert_eq!(points.len(), 3);
        assert!(points.iter().all(|p| p.feasible));

        let csv = sweep_to_csv(&points);
        let back = sweep_from_csv(&csv).unwrap();
        assert_eq!(back.len(), points.len());
        for (a, b) in points.iter().zip(&back) {
            assert_eq!(a.lambda, b.lambda);
            assert_eq!(a.feasible, b.feasible);
            assert_eq!(a.ls_residual, b.ls_residual);
            for (x, y) in a.ratios.iter().zip(&b.ratios) {
                assert_eq!(x, y, "ratio changed across CSV roundtrip");
            }
        }
    }

    #[test]
    fn refined_pair_beats_plain_solve() {
        // The headline reason for compensated refinement: at N = 4 a plain
        // LU solution's residual stalls above 1e-12.
        let n_top = 4;
        let lambda = 1.0;
        let d = solve_couplings(n_top, lambda, 0.4, &default_alphas(n_top)).unwrap();
        assert!(d.ls_residual < 1e-13, "refined residual {:.2e}", d.ls_residual);
        // The lo parts are genuinely tiny against the hi parts.
        for (hi, lo) in d.ratios.iter().zip(&d.ratios_lo) {
            assert!(lo.abs() <= 1e-10 * hi.abs().max(1.0));
        }
    }
}
