//! End-to-end tests of the `scsim` binary: exit codes, file formats read
//! back through the library parsers, config merging, and determinism.

use std::path::Path;
use std::process::{Command, Output};

use scsim::design::{default_alphas, solve_couplings, sweep_from_csv, CouplingDesign};
use scsim::dynamics::{negativity_decay_from_csv, relaxation_samples_from_csv};
use scsim::nonclassicality::{negativity_volume, WignerGrid, WignerGridData};
use scsim::scs::{sphere_coherent_state, SphereParams};
use scsim::C64;
use scsim_cli::{negativity_sweep_from_csv, squeezing_sweep_from_csv, StateTable};

fn scsim_bin(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scsim"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary launches")
}

fn run_ok(dir: &Path, args: &[&str]) -> String {
    let out = scsim_bin(dir, args);
    assert!(
        out.status.success(),
        "command {args:?} failed with {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn run_err(dir: &Path, args: &[&str]) -> (i32, String) {
    let out = scsim_bin(dir, args);
    assert!(!out.status.success(), "command {args:?} unexpectedly passed");
    (
        out.status.code().expect("exit code set"),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("reading {name}: {e}"))
}

/// Value of a `# key: value` metadata line in a CSV output.
fn meta_value<'a>(text: &'a str, key: &str) -> Option<&'a str> {
    let prefix = format!("# {key}: ");
    text.lines()
        .find(|l| l.starts_with(&prefix))
        .map(|l| &l[prefix.len()..])
}

#[test]
fn missing_mu_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let (code, stderr) = run_err(dir.path(), &["design", "--n", "2"]);
    assert_eq!(code, 2);
    assert!(stderr.contains("--mu"), "stderr: {stderr}");
}

#[test]
fn single_design_csv_matches_the_library() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(
        dir.path(),
        &[
            "design",
            "--n",
            "2",
            "--lambda",
            "1",
            "--mu",
            "0.4",
            "--reproducible",
        ],
    );
    let text = read(dir.path(), "design.csv");
    let rows = sweep_from_csv(&text).expect("design CSV parses");
    assert_eq!(rows.len(), 1);
    let expected = solve_couplings(2, 1.0, 0.4, &default_alphas(2)).unwrap();
    // The 17-significant-digit formatting round-trips f64 exactly.
    assert_eq!(rows[0].ratios, expected.ratios);
    assert_eq!(rows[0].condition, expected.condition);
    assert!(rows[0].feasible);
    let alpha0: f64 = meta_value(&text, "alpha0").unwrap().parse().unwrap();
    assert_eq!(alpha0, expected.alpha0);
}

#[test]
fn single_design_json_decodes_to_the_library_type() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(
        dir.path(),
        &[
            "design",
            "--n",
            "3",
            "--lambda",
            "0.5",
            "--mu",
            "0.4",
            "--format",
            "json",
            "--reproducible",
        ],
    );
    let text = read(dir.path(), "design.json");
    let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    let design: CouplingDesign = serde_json::from_value(doc["design"].clone()).unwrap();
    let expected = solve_couplings(3, 0.5, 0.4, &default_alphas(3)).unwrap();
    assert_eq!(design.ratios, expected.ratios);
    assert_eq!(design.alpha0, expected.alpha0);
    assert_eq!(doc["meta"]["command"], "design");
}

#[test]
fn design_sweep_flags_infeasible_points_without_failing() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(
        dir.path(),
        &[
            "design",
            "--n",
            "2",
            "--mu",
            "0.4",
            "--lambda-grid",
            "0:2:0.5",
            "--reproducible",
        ],
    );
    let rows = sweep_from_csv(&read(dir.path(), "design.csv")).unwrap();
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().all(|r| r.feasible));
    assert!(rows.iter().all(|r| r.ds_residual < 1e-10));
}

#[test]
fn state_amplitudes_match_the_library() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(
        dir.path(),
        &[
            "state",
            "--n",
            "3",
            "--lambda",
            "0.7",
            "--mu",
            "0.4",
            "--reproducible",
        ],
    );
    let amps = StateTable::amps_from_csv(&read(dir.path(), "state.csv")).unwrap();
    let psi = sphere_coherent_state(&SphereParams {
        n_top: 3,
        lambda: 0.7,
        mu: C64::new(0.4, 0.0),
    })
    .unwrap();
    assert_eq!(amps.len(), psi.dim());
    for (got, want) in amps.iter().zip(psi.amps()) {
        assert_eq!(got.0, want.re);
        assert_eq!(got.1, want.im);
    }
}

#[test]
fn wigner_csv_reads_back_with_matching_negativity() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(
        dir.path(),
        &[
            "wigner",
            "--n",
            "2",
            "--lambda",
            "1",
            "--mu",
            "0.4",
            "--nx",
            "81",
            "--reproducible",
        ],
    );
    let text = read(dir.path(), "wigner.csv");
    let grid = WignerGrid::from_csv(&text).expect("grid CSV parses");
    assert_eq!(grid.xs.len(), 81);
    let recomputed = negativity_volume(&grid).unwrap().delta;
    let reported: f64 = meta_value(&text, "delta").unwrap().parse().unwrap();
    assert!(
        (recomputed - reported).abs() < 1e-15,
        "recomputed {recomputed} vs reported {reported}"
    );
    // The flagship three-level state carries about 0.145 of negativity.
    assert!((reported - 0.1447).abs() < 1e-3, "delta = {reported}");
    assert_eq!(meta_value(&text, "extrema_positive"), Some("2"));
    assert_eq!(meta_value(&text, "extrema_negative"), Some("1"));

    // The JSON form round-trips through the library's grid reader too.
    run_ok(
        dir.path(),
        &[
            "wigner",
            "--n",
            "2",
            "--lambda",
            "1",
            "--mu",
            "0.4",
            "--nx",
            "81",
            "--format",
            "json",
            "--reproducible",
        ],
    );
    let doc: serde_json::Value = serde_json::from_str(&read(dir.path(), "wigner.json")).unwrap();
    let data: WignerGridData = serde_json::from_value(doc["grid"].clone()).unwrap();
    let json_grid = WignerGrid::try_from(data).expect("JSON grid validates");
    assert_eq!(json_grid, grid, "JSON and CSV grids must be identical");
}

#[test]
fn negativity_sweep_agrees_with_the_wigner_command() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(
        dir.path(),
        &[
            "sweep-negativity",
            "--n",
            "2",
            "--lambda-grid",
            "0:1:1",
            "--mu",
            "0.4",
            "--nx",
            "81",
            "--reproducible",
        ],
    );
    let rows = negativity_sweep_from_csv(&read(dir.path(), "sweep-negativity.csv")).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(
        rows[1].delta > rows[0].delta,
        "curvature must raise negativity: {rows:?}"
    );

    run_ok(
        dir.path(),
        &[
            "wigner",
            "--n",
            "2",
            "--lambda",
            "1",
            "--mu",
            "0.4",
            "--nx",
            "81",
            "--reproducible",
        ],
    );
    let reported: f64 = meta_value(&read(dir.path(), "wigner.csv"), "delta")
        .unwrap()
        .parse()
        .unwrap();
    assert!(
        (rows[1].delta - reported).abs() < 1e-15,
        "sweep row {} vs wigner command {reported}",
        rows[1].delta
    );
}

#[test]
fn squeezing_sweep_reads_back_and_dips_below_vacuum() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(
        dir.path(),
        &[
            "sweep-squeezing",
            "--n",
            "4",
            "--lambda-grid",
            "0.2:1:0.2",
            "--mu",
            "0.4",
            "--reproducible",
        ],
    );
    let rows = squeezing_sweep_from_csv(&read(dir.path(), "sweep-squeezing.csv")).unwrap();
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().any(|r| r.s0 < 0.0), "no squeezing found: {rows:?}");
    assert!(rows.iter().all(|r| r.s0 >= -1.0 && r.s_half_pi >= -1.0));
}

#[test]
fn evolve_decays_and_both_engines_agree() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(
        dir.path(),
        &[
            "evolve",
            "--n",
            "2",
            "--gamma-t",
            "0,0.5,1",
            "--nx",
            "81",
            "--reproducible",
        ],
    );
    let fp = negativity_decay_from_csv(&read(dir.path(), "evolve.csv")).unwrap();
    assert_eq!(fp.len(), 3);
    assert!((fp[0].delta - 0.1447).abs() < 2e-3);
    assert!(fp.windows(2).all(|w| w[1].delta <= w[0].delta + 1e-12));

    run_ok(
        dir.path(),
        &[
            "evolve",
            "--n",
            "2",
            "--gamma-t",
            "0,0.5,1",
            "--nx",
            "81",
            "--engine",
            "lindblad",
            "--out",
            "evolve_lb.csv",
            "--reproducible",
        ],
    );
    let lb = negativity_decay_from_csv(&read(dir.path(), "evolve_lb.csv")).unwrap();
    for (a, b) in fp.iter().zip(&lb) {
        assert_eq!(a.gamma_t, b.gamma_t);
        assert!(
            (a.delta - b.delta).abs() < 1e-6,
            "engines disagree at gamma*t = {}: {} vs {}",
            a.gamma_t,
            a.delta,
            b.delta
        );
    }
}

#[test]
fn evolve_emits_readable_grids() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(
        dir.path(),
        &[
            "evolve",
            "--n",
            "2",
            "--gamma-t",
            "0,1",
            "--nx",
            "81",
            "--emit-grids",
            "--reproducible",
        ],
    );
    let rows = negativity_decay_from_csv(&read(dir.path(), "evolve.csv")).unwrap();
    for (k, row) in rows.iter().enumerate() {
        let grid = WignerGrid::from_csv(&read(dir.path(), &format!("evolve_gt{k}.csv")))
            .expect("emitted grid parses");
        let delta = negativity_volume(&grid).unwrap().delta;
        assert!(
            (delta - row.delta).abs() < 1e-15,
            "grid {k} disagrees with its table row"
        );
    }
}

#[test]
fn relax_fidelity_rises_and_samples_read_back() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(
        dir.path(),
        &[
            "relax",
            "--n",
            "2",
            "--t-final",
            "30",
            "--samples",
            "7",
            "--delta-nx",
            "81",
            "--reproducible",
        ],
    );
    let text = read(dir.path(), "relax.csv");
    let samples = relaxation_samples_from_csv(&text).unwrap();
    assert_eq!(samples.len(), 7);
    let first = samples.first().unwrap();
    let last = samples.last().unwrap();
    assert!(last.fidelity > 0.97, "final fidelity {}", last.fidelity);
    assert!(last.fidelity > first.fidelity);
    assert!(samples.iter().all(|s| s.trace_defect < 1e-9));
    // Negativity grows from the vacuum's zero toward the target's share.
    let d0 = first.delta.expect("delta requested");
    let d1 = last.delta.expect("delta requested");
    assert!(d0.abs() < 1e-6, "vacuum negativity {d0}");
    assert!(d1 > 0.1, "relaxed negativity {d1}");
}

#[test]
fn reproducible_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "design",
        "--n",
        "2",
        "--mu",
        "0.4",
        "--reproducible",
        "--out",
    ];
    run_ok(dir.path(), &[&args[..], &["a.csv"]].concat());
    run_ok(dir.path(), &[&args[..], &["b.csv"]].concat());
    assert_eq!(read(dir.path(), "a.csv"), read(dir.path(), "b.csv"));

    // Without the flag a timestamp is recorded.
    run_ok(
        dir.path(),
        &["design", "--n", "2", "--mu", "0.4", "--out", "c.csv"],
    );
    assert!(meta_value(&read(dir.path(), "c.csv"), "generated_unix").is_some());
}

#[test]
fn infeasible_design_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let (code, stderr) = run_err(
        dir.path(),
        &[
            "design",
            "--n",
            "2",
            "--mu",
            "0.4",
            "--alphas",
            "0.1,0.1000000000001",
        ],
    );
    assert_eq!(code, 3);
    assert!(stderr.contains("infeasible"), "stderr: {stderr}");
}

#[test]
fn numerical_errors_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let (code, stderr) = run_err(dir.path(), &["wigner", "--nx", "20"]);
    assert_eq!(code, 4);
    assert!(stderr.contains("resolution"), "stderr: {stderr}");

    // An undersized master-equation basis trips the truncation monitor.
    let (code, stderr) = run_err(
        dir.path(),
        &[
            "evolve",
            "--n",
            "2",
            "--gamma-t",
            "0,1",
            "--nx",
            "81",
            "--engine",
            "lindblad",
            "--dim",
            "8",
        ],
    );
    assert_eq!(code, 4);
    assert!(stderr.contains("truncation"), "stderr: {stderr}");
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _) = run_err(
        dir.path(),
        &[
            "design",
            "--n",
            "2",
            "--mu",
            "0.4",
            "--lambda-grid",
            "0:1:0.5",
            "--root-index",
            "1",
        ],
    );
    assert_eq!(code, 2);

    let (code, stderr) = run_err(
        dir.path(),
        &["wigner", "--x-min", "-3", "--x-max", "3", "--p-min", "-3"],
    );
    assert_eq!(code, 2);
    assert!(stderr.contains("p-max"), "stderr: {stderr}");

    let (code, _) = run_err(dir.path(), &["evolve", "--gamma-t", "1,0.5"]);
    assert_eq!(code, 2);

    // Clap's own rejection of unknown flags also lands on 2.
    let (code, _) = run_err(dir.path(), &["design", "--bogus"]);
    assert_eq!(code, 2);
}

#[test]
fn config_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("cfg.txt"),
        "n = 2\nmu = 0.4\nlambda = 2.0\nreproducible = true\n",
    )
    .unwrap();

    run_ok(dir.path(), &["design", "--config", "cfg.txt"]);
    let rows = sweep_from_csv(&read(dir.path(), "design.csv")).unwrap();
    assert_eq!(rows[0].lambda, 2.0);
    assert!(
        meta_value(&read(dir.path(), "design.csv"), "generated_unix").is_none(),
        "config-set reproducible must hold"
    );

    run_ok(
        dir.path(),
        &["design", "--config", "cfg.txt", "--lambda", "1"],
    );
    let rows = sweep_from_csv(&read(dir.path(), "design.csv")).unwrap();
    assert_eq!(rows[0].lambda, 1.0, "explicit flag must override config");

    // JSON config works too and format is honored.
    std::fs::write(
        dir.path().join("cfg.json"),
        r#"{"n": 2, "mu": 0.4, "format": "json", "reproducible": true}"#,
    )
    .unwrap();
    run_ok(dir.path(), &["design", "--config", "cfg.json"]);
    let doc: serde_json::Value =
        serde_json::from_str(&read(dir.path(), "design.json")).unwrap();
    assert_eq!(doc["design"]["n_top"], 2);
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("cfg.txt"), "n = 2\nmu = 0.4\ntypo = 1\n").unwrap();
    let (code, stderr) = run_err(dir.path(), &["design", "--config", "cfg.txt"]);
    assert_eq!(code, 2);
    assert!(stderr.contains("typo"), "stderr: {stderr}");
}

#[test]
fn output_dir_env_var_is_honored() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_scsim"))
        .current_dir(dir.path())
        .env("SCSIM_OUTPUT_DIR", dir.path().join("results"))
        .args(["state", "--n", "2", "--reproducible"])
        .output()
        .expect("binary launches");
    assert!(out.status.success());
    assert!(dir.path().join("results/state.csv").exists());
}
