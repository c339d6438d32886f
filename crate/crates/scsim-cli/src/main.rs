//! `scsim`: command-line front end for the sphere-coherent-state library.
//!
//! Every long option can also come from a `--config` file (a JSON object or
//! `key = value` lines, keys named like the flags); explicit flags win.
//! Results go to `--out`, defaulting to `<command>.<ext>` in
//! `SCSIM_OUTPUT_DIR` or the working directory.

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use scsim::design::{
    dark_state_operator, default_alphas, solve_couplings, solve_couplings_with_root,
    sweep_curvature, sweep_to_csv, SweepPoint,
};
use scsim::dynamics::{
    dark_state_relaxation, fp_propagate, lindblad_damped_trajectory, negativity_decay_to_csv,
    relaxation_to_csv, DampedOscillatorModel, DarkStateModel, NegativityTimePoint,
};
use scsim::fockspace::{DensityOp, FockVector};
use scsim::nonclassicality::{
    count_extrema, negativity_volume, resolve_extent, squeezing, wigner, Extent, WignerGrid,
    WignerGridData, WignerGridSpec, DEFAULT_EXTREMA_THRESHOLD, WIGNER_CONVENTION,
};
use scsim::scs::{sphere_coherent_state, SphereParams};
use scsim::C64;
use scsim_cli::{
    exit_code, negativity_sweep_to_csv, parse_grid, parse_list, parse_usize_list,
    squeezing_sweep_to_csv, Config, Meta, NegativitySweepRow, SqueezingSweepRow, StateTable,
};

#[derive(Debug)]
enum CliError {
    /// Malformed request: bad flags, bad config, bad value. Exit 2.
    Usage(String),
    /// Library-reported failure; exit code follows the error class.
    Lib(scsim::Error),
    /// Filesystem or encoding trouble. Exit 1.
    Io(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Lib(e) => exit_code(e),
            CliError::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Lib(e) => write!(f, "{e}"),
            CliError::Io(m) => write!(f, "{m}"),
        }
    }
}

impl From<scsim::Error> for CliError {
    fn from(e: scsim::Error) -> Self {
        CliError::Lib(e)
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Parser)]
#[command(
    name = "scsim",
    version,
    about = "Engineer and analyze sphere-coherent motional states",
    long_about = "Engineer and analyze sphere-coherent motional states.\n\n\
        Any long option can also be supplied through --config (a JSON object \
        or key=value lines, keys named like the flags without dashes in \
        front); explicit flags override the file. Unrecognized config keys \
        are rejected."
)]
struct Cli {
    /// Config file providing defaults for any long option.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output file; default <command>.<ext> in SCSIM_OUTPUT_DIR or the
    /// working directory.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Output format.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    /// Omit run-varying metadata so repeated runs are byte-identical.
    #[arg(long, global = true)]
    reproducible: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Engine {
    /// Phase-space propagator (exact Gaussian kernel).
    Fp,
    /// Density-matrix master equation.
    Lindblad,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the drive ratios that make the target state dark.
    #[command(allow_negative_numbers = true)]
    Design {
        /// Highest occupied Fock level of the target state [default: 4].
        #[arg(long)]
        n: Option<usize>,
        /// Amplitude parameter of the target state (required).
        #[arg(long)]
        mu: Option<f64>,
        /// Sphere curvature for a single design [default: 1.0].
        #[arg(long, conflicts_with = "lambda_grid")]
        lambda: Option<f64>,
        /// Curvature sweep as start:stop:step; infeasible points are
        /// flagged in the output instead of aborting.
        #[arg(long)]
        lambda_grid: Option<String>,
        /// Comma-separated sideband drive amplitudes [default: j/10].
        #[arg(long)]
        alphas: Option<String>,
        /// Which root of the Laguerre polynomial sets the carrier drive,
        /// 0 for the smallest; single designs only.
        #[arg(long)]
        root_index: Option<usize>,
    },

    /// Print the Fock amplitudes of a sphere-coherent state.
    #[command(allow_negative_numbers = true)]
    State {
        /// Highest occupied Fock level [default: 4].
        #[arg(long)]
        n: Option<usize>,
        /// Sphere curvature [default: 1.0].
        #[arg(long)]
        lambda: Option<f64>,
        /// Amplitude parameter [default: 0.4].
        #[arg(long)]
        mu: Option<f64>,
    },

    /// Sample the Wigner function of a sphere-coherent state on a grid.
    #[command(allow_negative_numbers = true)]
    Wigner {
        /// Highest occupied Fock level [default: 3].
        #[arg(long)]
        n: Option<usize>,
        /// Sphere curvature [default: 1.0].
        #[arg(long)]
        lambda: Option<f64>,
        /// Amplitude parameter [default: 0.4].
        #[arg(long)]
        mu: Option<f64>,
        /// Grid points along x, odd and at least 33 [default: 161].
        #[arg(long)]
        nx: Option<usize>,
        /// Grid points along p [default: same as nx].
        #[arg(long)]
        np: Option<usize>,
        /// Explicit window: pass all four bounds or none (auto window).
        #[arg(long)]
        x_min: Option<f64>,
        #[arg(long)]
        x_max: Option<f64>,
        #[arg(long)]
        p_min: Option<f64>,
        #[arg(long)]
        p_max: Option<f64>,
    },

    /// Negativity volume across state sizes and curvatures.
    #[command(allow_negative_numbers = true)]
    SweepNegativity {
        /// Comma-separated state sizes [default: 2,3,4].
        #[arg(long)]
        n: Option<String>,
        /// Curvature grid start:stop:step [default: 0:3:0.25].
        #[arg(long)]
        lambda_grid: Option<String>,
        /// Amplitude parameter [default: 0.4].
        #[arg(long)]
        mu: Option<f64>,
        /// Grid points per axis [default: 321].
        #[arg(long)]
        nx: Option<usize>,
    },

    /// Quadrature squeezing across curvature, from exact moments.
    #[command(allow_negative_numbers = true)]
    SweepSqueezing {
        /// Highest occupied Fock level [default: 4].
        #[arg(long)]
        n: Option<usize>,
        /// Curvature grid start:stop:step [default: 0.05:2:0.05].
        #[arg(long)]
        lambda_grid: Option<String>,
        /// Amplitude parameter [default: 0.4].
        #[arg(long)]
        mu: Option<f64>,
    },

    /// Negativity decay of a state under thermal damping.
    #[command(allow_negative_numbers = true)]
    Evolve {
        /// Highest occupied Fock level [default: 4].
        #[arg(long)]
        n: Option<usize>,
        /// Sphere curvature [default: 1.0].
        #[arg(long)]
        lambda: Option<f64>,
        /// Amplitude parameter [default: 0.4].
        #[arg(long)]
        mu: Option<f64>,
        /// Damping rate [default: 1.0].
        #[arg(long)]
        gamma: Option<f64>,
        /// Bath occupation [default: 0.5].
        #[arg(long)]
        nbar: Option<f64>,
        /// Comma-separated sample times gamma*t [default: 0,0.25,0.5,1,2].
        #[arg(long)]
        gamma_t: Option<String>,
        /// Grid points per axis [default: 161].
        #[arg(long)]
        nx: Option<usize>,
        /// Evolution engine [default: fp].
        #[arg(long, value_enum)]
        engine: Option<Engine>,
        /// Fock levels for the lindblad engine [default: 30].
        #[arg(long)]
        dim: Option<usize>,
        /// Also write one Wigner CSV per time sample next to the output.
        #[arg(long)]
        emit_grids: bool,
    },

    /// Relax the mirror from vacuum into the designed dark state.
    #[command(allow_negative_numbers = true)]
    Relax {
        /// Highest occupied Fock level of the target [default: 3].
        #[arg(long)]
        n: Option<usize>,
        /// Sphere curvature [default: 1.0].
        #[arg(long)]
        lambda: Option<f64>,
        /// Amplitude parameter [default: 0.4].
        #[arg(long)]
        mu: Option<f64>,
        /// Drive strength [default: 1.0].
        #[arg(long)]
        omega0: Option<f64>,
        /// Atomic decay rate [default: 1.0].
        #[arg(long)]
        gamma_a: Option<f64>,
        /// Final time in units of 1/omega0 [default: 150].
        #[arg(long)]
        t_final: Option<f64>,
        /// Number of evenly spaced samples [default: 31].
        #[arg(long)]
        samples: Option<usize>,
        /// Mirror truncation [default: twice the target support].
        #[arg(long)]
        mirror_dim: Option<usize>,
        /// Also track negativity volume per sample on an nx-point grid.
        #[arg(long)]
        delta_nx: Option<usize>,
    },
}

/// Flag-over-config resolution. Every lookup consumes the config key so
/// leftovers can be reported as typos.
struct Resolver {
    cfg: Option<Config>,
}

impl Resolver {
    fn raw(&self, key: &str) -> Option<String> {
        self.cfg
            .as_ref()
            .and_then(|c| c.get(key))
            .map(str::to_string)
    }

    fn opt<T: std::str::FromStr>(&self, flag: Option<T>, key: &str) -> CliResult<Option<T>> {
        let cfg_val = self.raw(key);
        if flag.is_some() {
            return Ok(flag);
        }
        match cfg_val {
            None => Ok(None),
            Some(s) => s.parse::<T>().map(Some).map_err(|_| {
                CliError::Usage(format!("config key '{key}': cannot parse '{s}'"))
            }),
        }
    }

    fn or<T: std::str::FromStr>(&self, flag: Option<T>, key: &str, default: T) -> CliResult<T> {
        Ok(self.opt(flag, key)?.unwrap_or(default))
    }

    /// Boolean switch: a set flag wins, otherwise the config key decides.
    fn switch(&self, flag: bool, key: &str) -> CliResult<bool> {
        let cfg_val = self.raw(key);
        if flag {
            return Ok(true);
        }
        match cfg_val.as_deref() {
            None => Ok(false),
            Some("true") | Some("1") | Some("yes") => Ok(true),
            Some("false") | Some("0") | Some("no") => Ok(false),
            Some(other) => Err(CliError::Usage(format!(
                "config key '{key}': expected a boolean, got '{other}'"
            ))),
        }
    }

    /// Call once all parameters are resolved, before doing any work.
    fn finish(&self) -> CliResult<()> {
        if let Some(cfg) = &self.cfg {
            let unused = cfg.unused_keys();
            if !unused.is_empty() {
                return Err(CliError::Usage(format!(
                    "unknown config keys: {}",
                    unused.join(", ")
                )));
            }
        }
        Ok(())
    }
}

struct Output {
    format: Format,
    out: Option<PathBuf>,
    reproducible: bool,
}

impl Output {
    fn ext(&self) -> &'static str {
        match self.format {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }

    fn resolve_path(&self, command: &str) -> CliResult<PathBuf> {
        if let Some(p) = &self.out {
            return Ok(p.clone());
        }
        let name = format!("{command}.{}", self.ext());
        match std::env::var_os("SCSIM_OUTPUT_DIR") {
            Some(dir) => {
                let dir = PathBuf::from(dir);
                std::fs::create_dir_all(&dir).map_err(|e| {
                    CliError::Io(format!("cannot create {}: {e}", dir.display()))
                })?;
                Ok(dir.join(name))
            }
            None => Ok(PathBuf::from(name)),
        }
    }

    fn write(&self, command: &str, csv: &str, json: &serde_json::Value) -> CliResult<PathBuf> {
        let path = self.resolve_path(command)?;
        let text = match self.format {
            Format::Csv => csv.to_string(),
            Format::Json => {
                let mut s = serde_json::to_string_pretty(json)
                    .map_err(|e| CliError::Io(format!("JSON encoding failed: {e}")))?;
                s.push('\n');
                s
            }
        };
        write_file(&path, &text)?;
        Ok(path)
    }
}

fn write_file(path: &PathBuf, text: &str) -> CliResult<()> {
    std::fs::write(path, text)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn scs_state(n_top: usize, lambda: f64, mu: f64) -> CliResult<FockVector> {
    Ok(sphere_coherent_state(&SphereParams {
        n_top,
        lambda,
        mu: C64::new(mu, 0.0),
    })?)
}

/// Shared measurement window for a damping trajectory: the state's auto
/// window symmetrized about the origin, so the contraction stays inside it.
fn symmetrized_spec(rho: &DensityOp, spec: &WignerGridSpec) -> CliResult<WignerGridSpec> {
    let resolved = resolve_extent(rho, spec)?;
    let extent = match resolved.extent {
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
    Ok(WignerGridSpec {
        nx: resolved.nx,
        np: resolved.np,
        extent,
    })
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.code());
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let cfg = match &cli.config {
        None => None,
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", p.display())))?;
            Some(Config::parse(&text).map_err(CliError::Usage)?)
        }
    };
    let r = Resolver { cfg };

    let format = match cli.format {
        Some(f) => f,
        None => match r.raw("format").as_deref() {
            None | Some("csv") => Format::Csv,
            Some("json") => Format::Json,
            Some(other) => {
                return Err(CliError::Usage(format!(
                    "config key 'format': expected csv or json, got '{other}'"
                )))
            }
        },
    };
    let out = match cli.out {
        Some(p) => Some(p),
        None => r.raw("out").map(PathBuf::from),
    };
    let reproducible = r.switch(cli.reproducible, "reproducible")?;
    let output = Output {
        format,
        out,
        reproducible,
    };

    match cli.command {
        Command::Design {
            n,
            mu,
            lambda,
            lambda_grid,
            alphas,
            root_index,
        } => cmd_design(&r, &output, n, mu, lambda, lambda_grid, alphas, root_index),
        Command::State { n, lambda, mu } => cmd_state(&r, &output, n, lambda, mu),
        Command::Wigner {
            n,
            lambda,
            mu,
            nx,
            np,
            x_min,
            x_max,
            p_min,
            p_max,
        } => cmd_wigner(&r, &output, n, lambda, mu, nx, np, [x_min, x_max, p_min, p_max]),
        Command::SweepNegativity {
            n,
            lambda_grid,
            mu,
            nx,
        } => cmd_sweep_negativity(&r, &output, n, lambda_grid, mu, nx),
        Command::SweepSqueezing { n, lambda_grid, mu } => {
            cmd_sweep_squeezing(&r, &output, n, lambda_grid, mu)
        }
        Command::Evolve {
            n,
            lambda,
            mu,
            gamma,
            nbar,
            gamma_t,
            nx,
            engine,
            dim,
            emit_grids,
        } => cmd_evolve(
            &r, &output, n, lambda, mu, gamma, nbar, gamma_t, nx, engine, dim, emit_grids,
        ),
        Command::Relax {
            n,
            lambda,
            mu,
            omega0,
            gamma_a,
            t_final,
            samples,
            mirror_dim,
            delta_nx,
        } => cmd_relax(
            &r, &output, n, lambda, mu, omega0, gamma_a, t_final, samples, mirror_dim, delta_nx,
        ),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_design(
    r: &Resolver,
    output: &Output,
    n: Option<usize>,
    mu: Option<f64>,
    lambda: Option<f64>,
    lambda_grid: Option<String>,
    alphas: Option<String>,
    root_index: Option<usize>,
) -> CliResult<()> {
    let n = r.or(n, "n", 4)?;
    let mu = r.opt(mu, "mu")?.ok_or_else(|| {
        CliError::Usage("--mu is required: the target state's amplitude parameter".into())
    })?;
    // Single curvature or a sweep. Flags decide first; with no flag, the
    // config may set exactly one of the two.
    let lambda_cfg = r.raw("lambda");
    let grid_cfg = r.raw("lambda-grid");
    let (single, grid_expr) = match (lambda, lambda_grid) {
        (Some(l), None) => (Some(l), None),
        (None, Some(g)) => (None, Some(g)),
        (Some(_), Some(_)) => unreachable!("clap enforces the conflict"),
        (None, None) => match (lambda_cfg, grid_cfg) {
            (Some(_), Some(_)) => {
                return Err(CliError::Usage(
                    "config sets both lambda and lambda-grid; pass one as a flag to choose".into(),
                ))
            }
            (Some(s), None) => {
                let l: f64 = s.parse().map_err(|_| {
                    CliError::Usage(format!("config key 'lambda': cannot parse '{s}'"))
                })?;
                (Some(l), None)
            }
            (None, Some(g)) => (None, Some(g)),
            (None, None) => (Some(1.0), None),
        },
    };
    let alphas = match r.opt(alphas, "alphas")? {
        Some(s) => parse_list(&s).map_err(CliError::Usage)?,
        None => default_alphas(n),
    };
    let root_index = r.opt(root_index, "root-index")?;
    if grid_expr.is_some() && root_index.is_some() {
        return Err(CliError::Usage(
            "--root-index applies only to a single-curvature design".into(),
        ));
    }
    r.finish()?;

    let mut meta = Meta::new("design", output.reproducible);
    meta.param("n", n).param("mu", mu);
    meta.param(
        "alphas",
        alphas
            .iter()
            .map(|a| a.to_string())
            .collect::<Vec<_>>()
            .join(","),
    );

    match (single, grid_expr) {
        (Some(lambda), None) => {
            let design = solve_couplings_with_root(n, lambda, mu, &alphas, root_index.unwrap_or(0))?;
            meta.param("lambda", lambda);
            meta.param("root-index", design.root_index);
            meta.note("alpha0", format!("{:.16e}", design.alpha0));
            let row = SweepPoint {
                lambda,
                feasible: true,
                ls_residual: design.ls_residual,
                ds_residual: design.ds_residual,
                condition: design.condition,
                ratios: design.ratios.clone(),
            };
            let csv = format!("{}{}", meta.csv_header(), sweep_to_csv(&[row]));
            let json = serde_json::json!({ "meta": meta, "design": design });
            let path = output.write("design", &csv, &json)?;
            println!(
                "design n={} lambda={} mu={}: alpha0={:.6}, ls_residual={:.3e}, ds_residual={:.3e}",
                n, lambda, mu, design.alpha0, design.ls_residual, design.ds_residual
            );
            println!(
                "ratios: [{}]",
                design
                    .ratios
                    .iter()
                    .map(|v| format!("{v:.6}"))
                    .collect::<Vec<_>>()
                    .join(", ")
            );
            println!("wrote {}", path.display());
        }
        (None, Some(expr)) => {
            let lambdas = parse_grid(&expr).map_err(CliError::Usage)?;
            meta.param("lambda-grid", &expr);
            let points = sweep_curvature(n, mu, &alphas, &lambdas)?;
            let feasible = points.iter().filter(|p| p.feasible).count();
            let csv = format!("{}{}", meta.csv_header(), sweep_to_csv(&points));
            let json = serde_json::json!({ "meta": meta, "sweep": points });
            let path = output.write("design", &csv, &json)?;
            println!(
                "design sweep n={} mu={}: {} of {} points feasible",
                n,
                mu,
                feasible,
                lambdas.len()
            );
            println!("wrote {}", path.display());
        }
        _ => unreachable!("exactly one mode is chosen above"),
    }
    Ok(())
}

fn cmd_state(
    r: &Resolver,
    output: &Output,
    n: Option<usize>,
    lambda: Option<f64>,
    mu: Option<f64>,
) -> CliResult<()> {
    let n = r.or(n, "n", 4)?;
    let lambda = r.or(lambda, "lambda", 1.0)?;
    let mu = r.or(mu, "mu", 0.4)?;
    r.finish()?;

    let psi = scs_state(n, lambda, mu)?;
    let table = StateTable {
        n_top: n,
        lambda,
        mu,
        amps: psi.amps().iter().map(|c| (c.re, c.im)).collect(),
    };
    let mut meta = Meta::new("state", output.reproducible);
    meta.param("n", n).param("lambda", lambda).param("mu", mu);
    let csv = table.to_csv(&meta);
    let json = serde_json::json!({ "meta": meta, "state": table });
    let path = output.write("state", &csv, &json)?;
    println!("state n={n} lambda={lambda} mu={mu}: {} levels", psi.dim());
    println!("wrote {}", path.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_wigner(
    r: &Resolver,
    output: &Output,
    n: Option<usize>,
    lambda: Option<f64>,
    mu: Option<f64>,
    nx: Option<usize>,
    np: Option<usize>,
    window: [Option<f64>; 4],
) -> CliResult<()> {
    let n = r.or(n, "n", 3)?;
    let lambda = r.or(lambda, "lambda", 1.0)?;
    let mu = r.or(mu, "mu", 0.4)?;
    let nx = r.or(nx, "nx", 161)?;
    let np = r.opt(np, "np")?.unwrap_or(nx);
    let bounds = [
        r.opt(window[0], "x-min")?,
        r.opt(window[1], "x-max")?,
        r.opt(window[2], "p-min")?,
        r.opt(window[3], "p-max")?,
    ];
    let extent = match bounds.iter().filter(|b| b.is_some()).count() {
        0 => Extent::Auto {
            sigmas: 4.0,
            pad: 0.5,
        },
        4 => Extent::Explicit {
            x_min: bounds[0].unwrap(),
            x_max: bounds[1].unwrap(),
            p_min: bounds[2].unwrap(),
            p_max: bounds[3].unwrap(),
        },
        _ => {
            return Err(CliError::Usage(
                "window needs all four of --x-min --x-max --p-min --p-max, or none".into(),
            ))
        }
    };
    r.finish()?;

    let psi = scs_state(n, lambda, mu)?;
    let spec = WignerGridSpec { nx, np, extent };
    let grid = wigner(&psi, &spec)?;
    let est = negativity_volume(&grid)?;
    let extrema = count_extrema(&grid, DEFAULT_EXTREMA_THRESHOLD)?;

    let mut meta = Meta::new("wigner", output.reproducible);
    meta.param("n", n).param("lambda", lambda).param("mu", mu);
    meta.param("nx", nx).param("np", np);
    meta.note("delta", format!("{:.16e}", est.delta));
    meta.note("delta_converged", est.converged);
    meta.note("extrema_positive", extrema.positive);
    meta.note("extrema_negative", extrema.negative);
    let csv = format!("{}{}", meta.csv_header(), grid.to_csv());
    let json = serde_json::json!({
        "meta": meta,
        "convention": WIGNER_CONVENTION,
        "grid": WignerGridData::from(&grid),
        "delta": est.delta,
        "delta_coarse": est.delta_coarse,
        "converged": est.converged,
        "extrema": { "positive": extrema.positive, "negative": extrema.negative },
    });
    let path = output.write("wigner", &csv, &json)?;
    println!(
        "delta = {:.6} (converged: {}); extrema: {} positive, {} negative",
        est.delta, est.converged, extrema.positive, extrema.negative
    );
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_sweep_negativity(
    r: &Resolver,
    output: &Output,
    n: Option<String>,
    lambda_grid: Option<String>,
    mu: Option<f64>,
    nx: Option<usize>,
) -> CliResult<()> {
    let n_list = match r.opt(n, "n")? {
        Some(s) => parse_usize_list(&s).map_err(CliError::Usage)?,
        None => vec![2, 3, 4],
    };
    let grid_expr = r.or(lambda_grid, "lambda-grid", "0:3:0.25".to_string())?;
    let lambdas = parse_grid(&grid_expr).map_err(CliError::Usage)?;
    let mu = r.or(mu, "mu", 0.4)?;
    let nx = r.or(nx, "nx", 321)?;
    if n_list.is_empty() {
        return Err(CliError::Usage("--n needs at least one state size".into()));
    }
    r.finish()?;

    let spec = WignerGridSpec {
        nx,
        np: nx,
        ..WignerGridSpec::default()
    };
    let mut rows = Vec::with_capacity(n_list.len() * lambdas.len());
    for &n_top in &n_list {
        for &lambda in &lambdas {
            let psi = scs_state(n_top, lambda, mu)?;
            let est = negativity_volume(&wigner(&psi, &spec)?)?;
            rows.push(NegativitySweepRow {
                n_top,
                lambda,
                delta: est.delta,
                converged: est.converged,
            });
        }
    }

    let mut meta = Meta::new("sweep-negativity", output.reproducible);
    meta.param(
        "n",
        n_list
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(","),
    );
    meta.param("lambda-grid", &grid_expr);
    meta.param("mu", mu).param("nx", nx);
    meta.note("convention", WIGNER_CONVENTION);
    let csv = negativity_sweep_to_csv(&rows, &meta);
    let json = serde_json::json!({ "meta": meta, "rows": rows });
    let path = output.write("sweep-negativity", &csv, &json)?;
    let best = rows
        .iter()
        .max_by(|a, b| a.delta.total_cmp(&b.delta))
        .expect("rows is nonempty");
    println!(
        "{} rows; largest delta = {:.6} at n={}, lambda={}",
        rows.len(),
        best.delta,
        best.n_top,
        best.lambda
    );
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_sweep_squeezing(
    r: &Resolver,
    output: &Output,
    n: Option<usize>,
    lambda_grid: Option<String>,
    mu: Option<f64>,
) -> CliResult<()> {
    let n = r.or(n, "n", 4)?;
    let grid_expr = r.or(lambda_grid, "lambda-grid", "0.05:2:0.05".to_string())?;
    let lambdas = parse_grid(&grid_expr).map_err(CliError::Usage)?;
    let mu = r.or(mu, "mu", 0.4)?;
    r.finish()?;

    let mut rows = Vec::with_capacity(lambdas.len());
    for &lambda in &lambdas {
        let psi = scs_state(n, lambda, mu)?;
        rows.push(SqueezingSweepRow {
            lambda,
            s0: squeezing(&psi, 0.0),
            s_half_pi: squeezing(&psi, std::f64::consts::FRAC_PI_2),
        });
    }

    let mut meta = Meta::new("sweep-squeezing", output.reproducible);
    meta.param("n", n).param("lambda-grid", &grid_expr).param("mu", mu);
    meta.note("convention", WIGNER_CONVENTION);
    let csv = squeezing_sweep_to_csv(&rows, &meta);
    let json = serde_json::json!({ "meta": meta, "rows": rows });
    let path = output.write("sweep-squeezing", &csv, &json)?;
    if let Some(best) = rows.iter().min_by(|a, b| a.s0.total_cmp(&b.s0)) {
        println!(
            "{} rows; deepest s(0) = {:.6} at lambda = {}",
            rows.len(),
            best.s0,
            best.lambda
        );
    }
    println!("wrote {}", path.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_evolve(
    r: &Resolver,
    output: &Output,
    n: Option<usize>,
    lambda: Option<f64>,
    mu: Option<f64>,
    gamma: Option<f64>,
    nbar: Option<f64>,
    gamma_t: Option<String>,
    nx: Option<usize>,
    engine: Option<Engine>,
    dim: Option<usize>,
    emit_grids: bool,
) -> CliResult<()> {
    let n = r.or(n, "n", 4)?;
    let lambda = r.or(lambda, "lambda", 1.0)?;
    let mu = r.or(mu, "mu", 0.4)?;
    let gamma = r.or(gamma, "gamma", 1.0)?;
    let nbar = r.or(nbar, "nbar", 0.5)?;
    let gts_expr = r.or(gamma_t, "gamma-t", "0,0.25,0.5,1,2".to_string())?;
    let gts = parse_list(&gts_expr).map_err(CliError::Usage)?;
    let nx = r.or(nx, "nx", 161)?;
    let engine = match engine {
        Some(e) => e,
        None => match r.raw("engine").as_deref() {
            None | Some("fp") => Engine::Fp,
            Some("lindblad") => Engine::Lindblad,
            Some(other) => {
                return Err(CliError::Usage(format!(
                    "config key 'engine': expected fp or lindblad, got '{other}'"
                )))
            }
        },
    };
    let dim = r.or(dim, "dim", 30)?;
    let emit_grids = r.switch(emit_grids, "emit-grids")?;
    if gts.is_empty() || gts[0] < 0.0 || gts.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::Usage(
            "--gamma-t samples must be nonnegative and strictly increasing".into(),
        ));
    }
    if gamma.is_nan() || gamma <= 0.0 {
        return Err(CliError::Usage(format!(
            "--gamma must be positive, got {gamma}"
        )));
    }
    r.finish()?;

    let psi = scs_state(n, lambda, mu)?;
    let rho0 = DensityOp::pure(&psi);
    let model = DampedOscillatorModel::new(gamma, nbar);
    let base_spec = WignerGridSpec {
        nx,
        np: nx,
        ..WignerGridSpec::default()
    };

    // One shared symmetric window for all samples, so every negativity
    // number is measured on identical quadrature.
    let shared = symmetrized_spec(&rho0, &base_spec)?;
    let mut rows: Vec<NegativityTimePoint> = Vec::with_capacity(gts.len());
    let mut grids: Vec<WignerGrid> = Vec::new();
    match engine {
        Engine::Fp => {
            let w0 = wigner(&rho0, &shared)?;
            for &gt in &gts {
                let g = if gt == 0.0 {
                    w0.clone()
                } else {
                    fp_propagate(&w0, &model, gt / gamma)?
                };
                let est = negativity_volume(&g)?;
                rows.push(NegativityTimePoint {
                    gamma_t: gt,
                    delta: est.delta,
                    converged: est.converged,
                });
                if emit_grids {
                    grids.push(g);
                }
            }
        }
        Engine::Lindblad => {
            let rho_w = rho0.embedded(dim)?;
            let times: Vec<f64> = gts.iter().map(|gt| gt / gamma).collect();
            let states = lindblad_damped_trajectory(&rho_w, &model, &times)?;
            for (&gt, rho_t) in gts.iter().zip(&states) {
                let g = wigner(rho_t, &shared)?;
                let est = negativity_volume(&g)?;
                rows.push(NegativityTimePoint {
                    gamma_t: gt,
                    delta: est.delta,
                    converged: est.converged,
                });
                if emit_grids {
                    grids.push(g);
                }
            }
        }
    }

    let mut meta = Meta::new("evolve", output.reproducible);
    meta.param("n", n).param("lambda", lambda).param("mu", mu);
    meta.param("gamma", gamma).param("nbar", nbar);
    meta.param("gamma-t", &gts_expr).param("nx", nx);
    meta.param(
        "engine",
        match engine {
            Engine::Fp => "fp",
            Engine::Lindblad => "lindblad",
        },
    );
    if engine == Engine::Lindblad {
        meta.param("dim", dim);
    }
    meta.note("convention", WIGNER_CONVENTION);
    let csv = format!("{}{}", meta.csv_header(), negativity_decay_to_csv(&rows));
    let json = serde_json::json!({ "meta": meta, "decay": rows });
    let path = output.write("evolve", &csv, &json)?;

    if emit_grids {
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "evolve".into());
        for (k, g) in grids.iter().enumerate() {
            let gpath = path.with_file_name(format!("{stem}_gt{k}.csv"));
            let mut gmeta = Meta::new("evolve", output.reproducible);
            gmeta.param("gamma-t", gts[k]);
            write_file(&gpath, &format!("{}{}", gmeta.csv_header(), g.to_csv()))?;
            println!("wrote {}", gpath.display());
        }
    }
    let first = rows.first().expect("at least one sample");
    let last = rows.last().expect("at least one sample");
    println!(
        "delta: {:.6} at gamma*t={} down to {:.6} at gamma*t={}",
        first.delta, first.gamma_t, last.delta, last.gamma_t
    );
    println!("wrote {}", path.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_relax(
    r: &Resolver,
    output: &Output,
    n: Option<usize>,
    lambda: Option<f64>,
    mu: Option<f64>,
    omega0: Option<f64>,
    gamma_a: Option<f64>,
    t_final: Option<f64>,
    samples: Option<usize>,
    mirror_dim: Option<usize>,
    delta_nx: Option<usize>,
) -> CliResult<()> {
    let n = r.or(n, "n", 3)?;
    let lambda = r.or(lambda, "lambda", 1.0)?;
    let mu = r.or(mu, "mu", 0.4)?;
    let omega0 = r.or(omega0, "omega0", 1.0)?;
    let gamma_a = r.or(gamma_a, "gamma-a", 1.0)?;
    let t_final = r.or(t_final, "t-final", 150.0)?;
    let samples = r.or(samples, "samples", 31)?;
    let mirror_dim = r.opt(mirror_dim, "mirror-dim")?;
    let delta_nx = r.opt(delta_nx, "delta-nx")?;
    r.finish()?;

    let design = solve_couplings(n, lambda, mu, &default_alphas(n))?;
    let mut model = DarkStateModel::new(design, omega0, gamma_a);
    if let Some(d) = mirror_dim {
        model.mirror_dim = d;
    }
    if let Some(nx) = delta_nx {
        model.delta_spec = Some(WignerGridSpec {
            nx,
            np: nx,
            ..WignerGridSpec::default()
        });
    }
    let rho0 = DensityOp::pure(&FockVector::vacuum(n + 1)?);
    let run = dark_state_relaxation(&model, &rho0, t_final, samples)?;

    let mut meta = Meta::new("relax", output.reproducible);
    meta.param("n", n).param("lambda", lambda).param("mu", mu);
    meta.param("omega0", omega0).param("gamma-a", gamma_a);
    meta.param("t-final", t_final).param("samples", samples);
    if let Some(nx) = delta_nx {
        meta.param("delta-nx", nx);
        meta.note("convention", WIGNER_CONVENTION);
    }
    meta.note("mirror_dim", run.mirror_dim);
    let csv = format!("{}{}", meta.csv_header(), relaxation_to_csv(&run));
    let last = run.samples.last().expect("at least two samples");
    let json = serde_json::json!({
        "meta": meta,
        "mirror_dim": run.mirror_dim,
        "samples": run.samples,
        "final_fidelity": last.fidelity,
    });
    let path = output.write("relax", &csv, &json)?;
    println!(
        "final fidelity {:.6} at t = {} with mirror_dim = {}",
        last.fidelity, last.t, run.mirror_dim
    );
    println!("wrote {}", path.display());

    // The designed operator annihilates the target; report the residual so
    // a user can see the engineered kernel directly.
    let a = dark_state_operator(&model.design, run.mirror_dim);
    let target = model.dark_target()?.embedded(run.mirror_dim)?;
    let applied = a.dot(target.amps());
    let resid: f64 = applied.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    println!("dark-state residual |A psi| = {resid:.3e}");
    Ok(())
}
