//! Sphere-coherent states and their deformed ladder algebra.
//!
//! A deformation function `f(n)` turns the harmonic ladder into a nonlinear
//! one, `B = b f(n)`. The flat choice `f(n) = sqrt(N + 1 - n)` produces a
//! finite su(2)-like ladder that terminates after `N + 1` levels; multiplying
//! it by the sphere factor `g(lambda, n)` bends the amplitude law and yields
//! the sphere-coherent family. The trapped-ion deformation is an unrelated
//! infinite ladder used as an independent cross-check of the nonlinear
//! coherent-state machinery.

use ndarray::Array2;

use crate::fockspace::FockVector;
use crate::specfun::{binomial, g_factorial, g_value, laguerre};
use crate::{C64, Error, Result};

/// Which nonlinear ladder is in play.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeformationSpec {
    /// `f(n) = sqrt(N + 1 - n)`: the undeformed finite ladder.
    Flat { n_top: usize },
    /// `f(n) = sqrt(N + 1 - n) g(lambda, n)`: the sphere-deformed ladder.
    Sphere { n_top: usize, lambda: f64 },
    /// `f(n) = L_n^1(eta^2) / ((n + 1) L_n(eta^2))`: the Lamb-Dicke
    /// deformation of a driven trapped ion.
    TrappedIon { eta: f64 },
}

impl DeformationSpec {
    /// Highest level the ladder supports, if finite.
    pub fn ladder_top(&self) -> Option<usize> {
        match self {
            DeformationSpec::Flat { n_top } | DeformationSpec::Sphere { n_top, .. } => {
                Some(n_top + 1)
            }
            DeformationSpec::TrappedIon { .. } => None,
        }
    }
}

/// Evaluate the deformation function at level `n`.
///
/// Finite ladders are defined on `0..=N+1` and vanish exactly at `N + 1`,
/// which is what terminates the ladder. The trapped-ion deformation has
/// poles wherever `L_n(eta^2)` vanishes; those return [`Error::Pole`].
pub fn deformation_value(spec: &DeformationSpec, n: usize) -> Result<f64> {
    match *spec {
        DeformationSpec::Flat { n_top } => {
            if n > n_top + 1 {
                return Err(Error::Domain(format!(
                    "level {n} outside the 0..={} ladder",
                    n_top + 1
                )));
            }
            Ok(((n_top + 1 - n) as f64).sqrt())
        }
        DeformationSpec::Sphere { n_top, lambda } => {
            if n > n_top + 1 {
                return Err(Error::Domain(format!(
                    "level {n} outside the 0..={} ladder",
                    n_top + 1
                )));
            }
            if n == n_top + 1 {
                // The flat factor is exactly zero here; do not evaluate g.
                return Ok(0.0);
            }
            let flat = ((n_top + 1 - n) as f64).sqrt();
            Ok(flat * g_value(lambda, n_top, n)?)
        }
        DeformationSpec::TrappedIon { eta } => {
            if !eta.is_finite() || eta <= 0.0 {
                return Err(Error::Domain(format!(
                    "Lamb-Dicke parameter must be finite and positive, got {eta}"
                )));
            }
            let x = eta * eta;
            let denom = laguerre(n, 0, x);
            if denom.abs() < 1e-12 {
                return Err(Error::Pole(format!(
                    "trapped-ion deformation at level {n}: L_{n}({x}) = {denom:.3e}"
                )));
            }
            Ok(laguerre(n, 1, x) / ((n + 1) as f64 * denom))
        }
    }
}

/// Deformed lowering and raising operators on a `dim`-level space.
#[derive(Debug, Clone)]
pub struct DeformedOps {
    /// `B = b f(n)`, with `B[n-1, n] = sqrt(n) f(n)`.
    pub lowering: Array2<C64>,
    /// `B^dag`.
    pub raising: Array2<C64>,
}

/// Build the deformed ladder operators.
///
/// For finite ladders `dim` may be at most `N + 2`; at exactly `N + 2` the
/// top level is annihilated by the raising operator, so the ladder closes on
/// itself instead of leaking probability into the truncation edge.
pub fn deformed_ops(spec: &DeformationSpec, dim: usize) -> Result<DeformedOps> {
    if dim == 0 {
        return Err(Error::Dimension("need at least one level".into()));
    }
    if let Some(top) = spec.ladder_top() {
        if dim > top + 1 {
            return Err(Error::Dimension(format!(
                "finite ladder supports at most {} levels, requested {dim}",
                top + 1
            )));
        }
    }
    let mut lowering = Array2::zeros((dim, dim));
    for n in 1..dim {
        let f = deformation_value(spec, n)?;
        lowering[[n - 1, n]] = C64::new((n as f64).sqrt() * f, 0.0);
    }
    let raising = lowering.t().mapv(|v: C64| v.conj());
    Ok(DeformedOps { lowering, raising })
}

/// Parameters of a sphere-coherent state.
#[derive(Debug, Clone, Copy)]
pub struct SphereParams {
    /// Highest occupied Fock level; the state has `n_top + 1` amplitudes.
    pub n_top: usize,
    /// Sphere curvature. Zero reduces to a binomial (su(2) coherent) state.
    pub lambda: f64,
    /// Complex amplitude parameter of the family.
    pub mu: C64,
}

/// Sphere-coherent state with amplitudes
/// `c_n ~ sqrt(C(N, n)) [g(lambda, n)]! mu^n`, normalized.
pub fn sphere_coherent_state(p: &SphereParams) -> Result<FockVector> {
    if !p.mu.re.is_finite() || !p.mu.im.is_finite() {
        return Err(Error::Domain("mu must be finite".into()));
    }
    let dim = p.n_top + 1;
    let mut amps = Vec::with_capacity(dim);
    let mut mu_pow = C64::new(1.0, 0.0);
    for n in 0..dim {
        if n > 0 {
            mu_pow *= p.mu;
        }
        let weight = binomial::<f64>(p.n_top, n).sqrt() * g_factorial(p.lambda, p.n_top, n)?;
        amps.push(mu_pow * weight);
    }
    FockVector::new(amps)
}

/// Rebuild the dark state level by level from coupling data alone.
///
/// Each row of the dark-state condition fixes the next amplitude:
/// `C_{m+1} = sqrt(m+1) e^{-alpha0^2/2} L_m(alpha0^2) C_m /
///            sum_j r_j alpha_j e^{-alpha_j^2/2} L_m^1(alpha_j^2)`.
/// When `alpha0^2` sits on a root of `L_N` the ladder terminates at level
/// `N`, which is how a finite superposition survives contact with an
/// infinite-dimensional mode.
pub fn nonlinear_cs_from_recurrence(
    ratios: &[f64],
    alpha0: f64,
    alphas: &[f64],
    dim: usize,
) -> Result<FockVector> {
    if ratios.len() != alphas.len() || ratios.is_empty() {
        return Err(Error::Dimension(format!(
            "{} ratios against {} drive amplitudes",
            ratios.len(),
            alphas.len()
        )));
    }
    if dim == 0 {
        return Err(Error::Dimension("need at least one level".into()));
    }
    let x0 = alpha0 * alpha0;
    let gauss0 = (-0.5 * x0).exp();
    let mut amps = Vec::with_capacity(dim);
    let mut c = 1.0_f64;
    amps.push(C64::new(c, 0.0));
    for m in 0..dim - 1 {
        let mut denom = 0.0;
        for (r, &a) in ratios.iter().zip(alphas) {
            denom += r * a * (-0.5 * a * a).exp() * laguerre(m, 1, a * a);
        }
        let numer = ((m + 1) as f64).sqrt() * gauss0 * laguerre(m, 0, x0);
        if numer != 0.0 && denom.abs() < 1e-300 {
            return Err(Error::Infeasible(format!(
                "ladder recurrence stalled at level {m}: drive sum is zero"
            )));
        }
        c = if numer == 0.0 { 0.0 } else { numer * c / denom };
        if !c.is_finite() {
            return Err(Error::Infeasible(format!(
                "ladder recurrence diverged at level {}",
                m + 1
            )));
        }
        amps.push(C64::new(c, 0.0));
    }
    FockVector::new(amps)
}

/// Nonlinear coherent state of the trapped-ion deformation: the eigenstate
/// of `B = b f(n)` with eigenvalue `chi`, built by the recursion
/// `c_{k+1} = chi c_k / (sqrt(k+1) f(k+1))`.
///
/// Returns the normalized state together with a one-term estimate of the
/// discarded tail weight.
pub fn trapped_ion_nlcs(eta: f64, chi: C64, dim: usize) -> Result<(FockVector, f64)> {
    if dim < 2 {
        return Err(Error::Dimension("need at least two levels".into()));
    }
    let spec = DeformationSpec::TrappedIon { eta };
    let mut amps = Vec::with_capacity(dim);
    let mut c = C64::new(1.0, 0.0);
    amps.push(c);
    for k in 0..dim - 1 {
        let f = deformation_value(&spec, k + 1)?;
        if f.abs() < 1e-14 {
            return Err(Error::Pole(format!(
                "deformation vanishes at level {}: eigenstate recursion diverges",
                k + 1
            )));
        }
        c = chi * c / C64::new(((k + 1) as f64).sqrt() * f, 0.0);
        amps.push(c);
    }
    let norm_sq: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
    // Estimate the first discarded amplitude to bound the truncated tail.
    let tail = match deformation_value(&spec, dim) {
        Ok(f) if f.abs() > 1e-14 => {
            let next = c * chi / C64::new((dim as f64).sqrt() * f, 0.0);
            next.norm_sqr() / (norm_sq + next.norm_sqr())
        }
        _ => 1.0,
    };
    Ok((FockVector::new(amps)?, tail))
}

/// `|| B psi - chi psi ||` for the deformed lowering operator of `spec`
/// built at the state's dimension.
pub fn eigenvalue_residual(spec: &DeformationSpec, state: &FockVector, chi: C64) -> Result<f64> {
    let ops = deformed_ops(spec, state.dim())?;
    let applied = ops.lowering.dot(state.amps());
    let resid: f64 = applied
        .iter()
        .zip(state.amps().iter())
        .map(|(a, s)| (a - chi * s).norm_sqr())
        .sum();
    Ok(resid.sqrt())
}


#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn scs_is_normalized(
            n_top in 1usize..6,
            lambda in 0.0..3.0f64,
            mu in 0.05..1.5f64,
        ) {
            let v = sphere_coherent_state(&SphereParams {
                n_top,
                lambda,
                mu: C64::new(mu, 0.0),
            }).unwrap();
            let norm_sq: f64 = v.amps().iter().map(|a| a.norm_sqr()).sum();
            prop_assert!((norm_sq - 1.0).abs() < 1e-12);
            prop_assert_eq!(v.dim(), n_top + 1);
        }

        #[test]
        fn scs_amplitudes_follow_the_ladder_ratio(
            n_top in 1usize..6,
            lambda in 0.0..3.0f64,
            mu in 0.05..1.5f64,
        ) {
            let v = sphere_coherent_state(&SphereParams {
                n_top,
                lambda,
                mu: C64::new(mu, 0.0),
            }).unwrap();
            for n in 0..n_top {
                let got = (v.amps()[n + 1] / v.amps()[n]).re;
                let want = ((n_top - n) as f64 / (n + 1) as f64).sqrt()
                    * g_value::<f64>(lambda, n_top, n + 1).unwrap()
                    * mu;
                prop_assert!((got - want).abs() < 1e-10 * want.abs().max(1.0));
            }
        }

        #[test]
        fn deformed_commutator_is_diagonal(
            n_top in 1usize..5,
            lambda in 0.0..3.0f64,
        ) {
            // [B, B^dag] is diagonal for any diagonal deformation.
            let ops = deformed_ops(
                &DeformationSpec::Sphere { n_top, lambda },
                n_top + 2,
            ).unwrap();
            let comm = ops.lowering.dot(&ops.raising) - ops.raising.dot(&ops.lowering);
            for i in 0..comm.nrows() {
                for j in 0..comm.ncols() {
                    if i != j {
                        prop_assert!(comm[[i, j]].norm() < 1e-12);
                    }
                }
            }
        }
    }
}
