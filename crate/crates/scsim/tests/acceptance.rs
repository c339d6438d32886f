//! End-to-end acceptance checks for the whole library. Each test covers one
//! numbered criterion, prints a single `ACCEPTANCE <k> (<name>): PASS/FAIL`
//! line with the measured numbers, and asserts both the physics tolerances
//! and its wall-clock budget.
//!
//! Run `cargo test --test acceptance -- --nocapture` to see the lines.

use std::time::Instant;

use ndarray::{s, Array2};
use scsim::design::{default_alphas, dark_state_residual, solve_couplings};
use scsim::dynamics::{
    dark_state_relaxation, lindblad_damped_oscillator, lindblad_damped_trajectory,
    negativity_decay, relaxation_generator_residual, DampedOscillatorModel, DarkStateModel,
};
use scsim::fockspace::{
    annihilation, creation, displacement, displacement_elements, lab_hamiltonian, polaron,
    transformed_hamiltonian, DensityOp, FockVector, LabParams,
};
use scsim::linalg::kron;
use scsim::nonclassicality::{
    count_extrema, grid_moments, negativity_volume, resolve_extent, squeezing, wigner, Extent,
    WignerGridSpec, DEFAULT_EXTREMA_THRESHOLD,
};
use scsim::scs::{nonlinear_cs_from_recurrence, sphere_coherent_state, SphereParams};
use scsim::specfun::laguerre_smallest_root;
use scsim::C64;

fn scs(n_top: usize, lambda: f64, mu: f64) -> FockVector {
    sphere_coherent_state(&SphereParams {
        n_top,
        lambda,
        mu: C64::new(mu, 0.0),
    })
    .expect("acceptance states are inside every domain check")
}

fn report(k: usize, name: &str, ok: bool, details: &str) {
    println!(
        "ACCEPTANCE {k} ({name}): {} — {details}",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "criterion {k} ({name}) failed: {details}");
}

/// Symmetrize a resolved window about the origin so damping trajectories
/// stay inside it.
fn symmetric_spec(state: &FockVector, nx: usize) -> WignerGridSpec {
    let resolved = resolve_extent(
        state,
        &WignerGridSpec {
            nx,
            np: nx,
            ..Default::default()
        },
    )
    .expect("auto extent always resolves");
    let l = match resolved.extent {
        Extent::Explicit {
            x_min,
            x_max,
            p_min,
            p_max,
        } => x_min.abs().max(x_max.abs()).max(p_min.abs()).max(p_max.abs()),
        Extent::Auto { .. } => unreachable!(),
    };
    WignerGridSpec {
        nx,
        np: nx,
        extent: Extent::Explicit {
            x_min: -l,
            x_max: l,
            p_min: -l,
            p_max: l,
        },
    }
}

#[test]
fn criterion_1_design_round_trip() {
    let t0 = Instant::now();
    let mu = 0.4;
    let mut worst_ls = 0.0_f64;
    let mut worst_ds = 0.0_f64;
    let mut worst_fid_gap = 0.0_f64;
    for n_top in [2usize, 3, 4] {
        for lambda in [0.25, 0.5, 1.0, 2.0, 3.0] {
            let alphas = default_alphas(n_top);
            let design = solve_couplings(n_top, lambda, mu, &alphas)
                .expect("acceptance grid designs are feasible");
            worst_ls = worst_ls.max(design.ls_residual);
            let target = scs(n_top, lambda, mu);
            let ds = dark_state_residual(&design, &target).unwrap();
            worst_ds = worst_ds.max(ds);
            let rebuilt = nonlinear_cs_from_recurrence(
                &design.ratios,
                design.alpha0,
                &design.alphas,
                n_top + 1,
            )
            .unwrap();
            let fid = rebuilt.fidelity(&target).unwrap();
            worst_fid_gap = worst_fid_gap.max(1.0 - fid);
        }
    }
    let elapsed = t0.elapsed().as_secs_f64();
    let ok = worst_ls < 1e-12 && worst_ds < 1e-10 && worst_fid_gap < 1e-10 && elapsed < 1.0;
    report(
        1,
        "design round-trip",
        ok,
        &format!(
            "15 designs: worst linear residual {worst_ls:.2e} (< 1e-12), worst dark-state \
             residual {worst_ds:.2e} (< 1e-10), worst fidelity gap {worst_fid_gap:.2e} \
             (< 1e-10), {elapsed:.2}s (< 1s)"
        ),
    );
}

#[test]
fn criterion_2_negativity_grows_with_curvature_and_size() {
    let t0 = Instant::now();
    let lambdas = [0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0];
    let spec = WignerGridSpec {
        nx: 321,
        np: 321,
        ..Default::default()
    };
    let mut at_lambda_1 = Vec::new();
    let mut monotone = true;
    let mut all_converged = true;
    for n_top in [2usize, 3, 4] {
        let mut row = Vec::new();
        for &lambda in &lambdas {
            let psi = scs(n_top, lambda, 0.4);
            let grid = wigner(&psi, &spec).unwrap();
            let est = negativity_volume(&grid).unwrap();
            all_converged &= est.converged;
            row.push(est.delta);
        }
        monotone &= row.windows(2).all(|w| w[1] >= w[0] - 1e-9);
        at_lambda_1.push(row[2]);
    }
    let ordered = at_lambda_1[2] > at_lambda_1[1] && at_lambda_1[1] > at_lambda_1[0];
    let elapsed = t0.elapsed().as_secs_f64();
    let ok = monotone && ordered && all_converged && elapsed < 30.0;
    report(
        2,
        "negativity grows with curvature and size",
        ok,
        &format!(
            "delta non-decreasing in lambda for N = 2,3,4: {monotone}; at lambda = 1: \
             N4 {:.5} > N3 {:.5} > N2 {:.5}: {ordered}; grids converged (1e-3): \
             {all_converged}; {elapsed:.1}s (< 30s)",
            at_lambda_1[2], at_lambda_1[1], at_lambda_1[0]
        ),
    );
}

#[test]
fn criterion_3_phase_space_structure() {
    let t0 = Instant::now();
    let mut counts = Vec::new();
    let mut mins = Vec::new();
    let mut ok = true;
    for n_top in [2usize, 3, 4] {
        let psi = scs(n_top, 1.0, 0.4);
        let grid = wigner(&psi, &WignerGridSpec::default()).unwrap();
        let count = count_extrema(&grid, DEFAULT_EXTREMA_THRESHOLD).unwrap();
        let min = grid.values.iter().cloned().fold(f64::MAX, f64::min);
        ok &= count.total() == n_top + 1 && min < 0.0;
        counts.push(count.total());
        mins.push(min);
    }
    let elapsed = t0.elapsed().as_secs_f64();
    ok &= elapsed < 10.0;
    report(
        3,
        "phase-space structure",
        ok,
        &format!(
            "extrema for N = 2,3,4: {counts:?} (want [3, 4, 5]); Wigner minima \
             {:.3}, {:.3}, {:.3} (all < 0); {elapsed:.1}s (< 10s)",
            mins[0], mins[1], mins[2]
        ),
    );
}

#[test]
fn criterion_4_quadrature_squeezing() {
    let t0 = Instant::now();
    let mut best_s0 = f64::MAX;
    let mut worst_s90 = f64::MAX;
    for k in 1..=40 {
        let lambda = 0.05 * k as f64;
        let psi = scs(4, lambda, 0.4);
        let s0 = squeezing(&psi, 0.0);
        let s90 = squeezing(&psi, std::f64::consts::FRAC_PI_2);
        best_s0 = best_s0.min(s0);
        worst_s90 = worst_s90.min(s90);
    }
    let elapsed = t0.elapsed().as_secs_f64();
    let ok = best_s0 < 0.0 && worst_s90 >= -1e-6 && elapsed < 5.0;
    report(
        4,
        "quadrature squeezing",
        ok,
        &format!(
            "N = 4, lambda in (0, 2]: min s_0 = {best_s0:.4} (< 0), min s_pi/2 = \
             {worst_s90:.4} (>= -1e-6); {elapsed:.1}s (< 5s)"
        ),
    );
}

#[test]
fn criterion_5_master_equation_vs_phase_space_propagator() {
    let t0 = Instant::now();
    let model = DampedOscillatorModel::new(1.0, 0.5);
    let dim_work = 30;
    let mut worst_sup = 0.0_f64;
    let mut worst_var_gap = 0.0_f64;
    for lambda in [1.0, 2.0] {
        let psi = scs(4, lambda, 0.4);
        // 161 points keep the gamma*t = 0.1 diffusion kernel at least two
        // cells wide on this state's window.
        let spec = symmetric_spec(&psi, 161);
        let w0 = wigner(&psi, &spec).unwrap();
        let rho0 = psi.to_density().embedded(dim_work).unwrap();
        let times = [0.1, 0.5, 1.0, 3.0, 10.0];
        let traj = lindblad_damped_trajectory(&rho0, &model, &times).unwrap();
        for (idx, &gt) in times.iter().enumerate() {
            let w_me = wigner(&traj[idx], &spec).unwrap();
            let w_fp = scsim::dynamics::fp_propagate(&w0, &model, gt).unwrap();
            let sup = w_me
                .values
                .iter()
                .zip(w_fp.values.iter())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if gt <= 3.0 {
                worst_sup = worst_sup.max(sup);
            } else {
                // Thermal endpoint: both engines must sit at the bath's
                // per-quadrature variance (nbar + 1/2) / 2 = 0.5. The mean
                // still carries the e^{-gamma t / 2} remnant of the initial
                // displacement, so the variance is the sharp observable.
                for grid in [&w_me, &w_fp] {
                    let m = grid_moments(grid);
                    worst_var_gap = worst_var_gap
                        .max((m.var_x - 0.5).abs())
                        .max((m.var_p - 0.5).abs());
                }
                worst_sup = worst_sup.max(sup);
            }
        }
    }
    let elapsed = t0.elapsed().as_secs_f64();
    let ok = worst_sup < 1e-3 && worst_var_gap < 1e-3 && elapsed < 60.0;
    report(
        5,
        "master equation vs phase-space propagator",
        ok,
        &format!(
            "N = 4, lambda in {{1, 2}}, nbar = 0.5: sup|W_me - W_fp| = {worst_sup:.2e} \
             (< 1e-3) over gamma*t in {{0.1, 0.5, 1, 3, 10}}; thermal endpoint per-axis \
             variance gap {worst_var_gap:.2e} (< 1e-3); {elapsed:.1}s (< 60s)"
        ),
    );
}

#[test]
fn criterion_6_negativity_decay_ordering() {
    let t0 = Instant::now();
    let model = DampedOscillatorModel::new(1.0, 0.5);
    let gts = [0.0, 0.1, 0.5, 1.0, 3.0];
    let spec = WignerGridSpec {
        nx: 161,
        np: 161,
        ..Default::default()
    };
    let mut curves = Vec::new();
    for lambda in [1.0, 2.0] {
        let psi = scs(4, lambda, 0.4);
        let pts = negativity_decay(&psi.to_density(), &model, &gts, &spec).unwrap();
        curves.push(pts.iter().map(|p| p.delta).collect::<Vec<_>>());
    }
    let non_increasing = curves
        .iter()
        .all(|c| c.windows(2).all(|w| w[1] <= w[0] + 1e-9));
    // Numerical slack: by gamma*t = 3 both curves sit within quadrature
    // noise of zero, so the ordering is asserted up to 1e-6.
    let ordered = curves[0]
        .iter()
        .zip(&curves[1])
        .all(|(lo, hi)| hi >= &(lo - 1e-6));
    let elapsed = t0.elapsed().as_secs_f64();
    let ok = non_increasing && ordered && elapsed < 60.0;
    report(
        6,
        "negativity decay ordering",
        ok,
        &format!(
            "delta(t) non-increasing: {non_increasing}; delta_lambda2 >= delta_lambda1 \
             pointwise: {ordered}; lambda = 1: {:?}; lambda = 2: {:?}; {elapsed:.1}s \
             (budget shared with criterion 5)",
            curves[0]
                .iter()
                .map(|d| format!("{d:.4}"))
                .collect::<Vec<_>>(),
            curves[1]
                .iter()
                .map(|d| format!("{d:.4}"))
                .collect::<Vec<_>>()
        ),
    );
}

#[test]
fn criterion_7_dissipative_preparation() {
    let t0 = Instant::now();
    let design = solve_couplings(3, 1.0, 0.4, &default_alphas(3)).unwrap();
    let model = DarkStateModel::new(design, 1.0, 1.0);

    // Stationarity of the exact dark state |g> (x) |target>.
    let target = model
        .dark_target()
        .unwrap()
        .embedded(model.mirror_dim)
        .unwrap();
    let mut joint = Vec::with_capacity(2 * model.mirror_dim);
    for ga in [C64::new(1.0, 0.0), C64::new(0.0, 0.0)] {
        for ma in target.amps() {
            joint.push(ga * ma);
        }
    }
    let joint = FockVector::new(joint).unwrap();
    let stationarity = relaxation_generator_residual(&model, &joint.to_density()).unwrap();

    // Relaxation from |g, 0> at gamma_a / omega0 = 1.
    let vac = DensityOp::pure(&FockVector::vacuum(model.mirror_dim).unwrap());
    let run = dark_state_relaxation(&model, &vac, 150.0, 31).unwrap();
    let final_fid = run.samples.last().unwrap().fidelity;

    let elapsed = t0.elapsed().as_secs_f64();
    let ok = stationarity < 1e-10 && final_fid > 0.99 && elapsed < 120.0;
    report(
        7,
        "dissipative preparation",
        ok,
        &format!(
            "N = 3, lambda = 1: dark-state generator residual {stationarity:.2e} \
             (< 1e-10); relaxation from the ground state at gamma_a/omega0 = 1 reaches \
             F = {final_fid:.4} (> 0.99) by t = 150; {elapsed:.1}s (< 120s)"
        ),
    );
}

#[test]
fn criterion_8_analytic_anchors() {
    let t0 = Instant::now();

    let root = laguerre_smallest_root::<f64>(2).unwrap();
    let root_err = (root - (2.0 - 2.0_f64.sqrt())).abs();

    let one = FockVector::fock(1, 3).unwrap();
    let grid = wigner(
        &one,
        &WignerGridSpec {
            nx: 321,
            np: 321,
            ..Default::default()
        },
    )
    .unwrap();
    let delta = negativity_volume(&grid).unwrap().delta;
    let delta_err = (delta - 2.0 * (2.0 * (-0.5_f64).exp() - 1.0)).abs();

    let beta = C64::new(1.2, 0.0);
    let psi = FockVector::coherent(beta, 25).unwrap();
    let model = DampedOscillatorModel::new(1.0, 0.0);
    let t = 0.7;
    let rho_t = lindblad_damped_oscillator(&psi.to_density(), &model, t).unwrap();
    let expect = FockVector::coherent(beta * (-0.5_f64 * t).exp(), 25).unwrap();
    let fid_gap = 1.0 - rho_t.fidelity_pure(&expect).unwrap();

    let mut fock_gap = 0.0_f64;
    for n in 0..6usize {
        let v = FockVector::fock(n, 8).unwrap();
        for theta in [0.0, 0.7, std::f64::consts::FRAC_PI_2] {
            fock_gap = fock_gap.max((squeezing(&v, theta) - 2.0 * n as f64).abs());
        }
    }

    let elapsed = t0.elapsed().as_secs_f64();
    let ok = root_err < 1e-12 && delta_err < 1e-3 && fid_gap < 1e-6 && fock_gap < 1e-12;
    report(
        8,
        "analytic anchors",
        ok,
        &format!(
            "smallest root of L_2 off by {root_err:.1e} (< 1e-12); delta(|1>) off by \
             {delta_err:.1e} (< 1e-3); coherent decay fidelity gap {fid_gap:.1e} \
             (< 1e-6); s_theta(|n>) - 2n = {fock_gap:.1e} (< 1e-12); {elapsed:.1}s"
        ),
    );
}

#[test]
fn criterion_9_truncation_honesty() {
    let t0 = Instant::now();

    // Ladder commutator: identity on the interior, -(dim - 1) at the corner.
    let dim = 12;
    let b = annihilation(dim);
    let bd = creation(dim);
    let comm = b.dot(&bd) - bd.dot(&b);
    let mut comm_interior = 0.0_f64;
    for i in 0..dim - 1 {
        for j in 0..dim - 1 {
            let want = if i == j { 1.0 } else { 0.0 };
            comm_interior = comm_interior.max((comm[[i, j]] - C64::new(want, 0.0)).norm());
        }
    }
    let corner = comm[[dim - 1, dim - 1]].re;

    // Displacement: the exponential route matches the exact matrix elements
    // on the interior half and must disagree at the boundary.
    let alpha = C64::new(1.0, 0.5);
    let d_exp = displacement(alpha, 24).unwrap();
    let d_el = displacement_elements(alpha, 24);
    let diff = &d_exp - &d_el;
    let half = 12;
    let disp_interior = diff
        .slice(s![..half, ..half])
        .iter()
        .map(|v| v.norm())
        .fold(0.0, f64::max);
    let disp_boundary = diff.iter().map(|v| v.norm()).fold(0.0, f64::max);

    // Polaron frame change maps the radiation-pressure form to the Kerr
    // form on the interior of the mirror ladder only.
    let p = LabParams {
        nu: 1.0,
        omega21: 0.3,
        omega_c: 0.8,
        h: 0.05,
        g: 0.12,
    };
    let (dc, dm) = (3, 24);
    let h1 = lab_hamiltonian(&p, dc, dm);
    let h2 = transformed_hamiltonian(&p, dc, dm);
    let pol = kron(&Array2::eye(2), &polaron(p.g / p.nu, dc, dm));
    let mapped = pol.t().mapv(|v| v.conj()).dot(&h1).dot(&pol);
    let pol_diff = &mapped - &h2;
    let mut pol_interior = 0.0_f64;
    let mut pol_boundary = 0.0_f64;
    for i in 0..pol_diff.nrows() {
        for j in 0..pol_diff.ncols() {
            let v = pol_diff[[i, j]].norm();
            if i % dm < dm / 2 && j % dm < dm / 2 {
                pol_interior = pol_interior.max(v);
            } else {
                pol_boundary = pol_boundary.max(v);
            }
        }
    }
    let elapsed = t0.elapsed().as_secs_f64();
    let ok = comm_interior < 1e-12
        && (corner + (dim as f64 - 1.0)).abs() < 1e-12
        && disp_interior < 1e-8
        && disp_boundary > 1e-2
        && pol_interior < 1e-6
        && pol_boundary > 1e-2
        && elapsed < 30.0;
    report(
        9,
        "truncation honesty",
        ok,
        &format!(
            "[b, b+] interior off identity by {comm_interior:.1e}, corner = {corner:.0} \
             (= -(dim-1)); displacement routes: interior {disp_interior:.1e} (< 1e-8), \
             boundary {disp_boundary:.1e} (> 1e-2, expected failure); polaron identity: \
             interior {pol_interior:.1e} (< 1e-6), boundary {pol_boundary:.1e} (> 1e-2, \
             expected failure); {elapsed:.1}s"
        ),
    );
}
