//! Output schemas, config handling, and exit-code mapping for the `scsim`
//! binary. Living in a library target lets the integration tests read back
//! emitted files with the same code that wrote them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

/// Stable exit codes: 0 success, 2 usage, 3 infeasible design, 4 numerical
/// (convergence, truncation, resolution, pole).
pub fn exit_code(e: &scsim::Error) -> i32 {
    match e {
        scsim::Error::Domain(_) | scsim::Error::Dimension(_) => 2,
        scsim::Error::Infeasible(_) => 3,
        scsim::Error::Pole(_)
        | scsim::Error::Truncation { .. }
        | scsim::Error::Resolution { .. }
        | scsim::Error::Convergence(_) => 4,
    }
}

/// Deterministic metadata block shared by every output file. Keys are
/// sorted; the only run-varying entry is `generated_unix`, suppressed by
/// `--reproducible`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Meta(pub BTreeMap<String, String>);

impl Meta {
    pub fn new(command: &str, reproducible: bool) -> Self {
        let mut m = BTreeMap::new();
        m.insert("tool".into(), "scsim".into());
        m.insert("version".into(), env!("CARGO_PKG_VERSION").into());
        m.insert("command".into(), command.into());
        if !reproducible {
            let now = std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0);
            m.insert("generated_unix".into(), now.to_string());
        }
        Meta(m)
    }

    pub fn param(&mut self, key: &str, value: impl std::fmt::Display) -> &mut Self {
        self.0.insert(format!("param.{key}"), value.to_string());
        self
    }

    pub fn note(&mut self, key: &str, value: impl std::fmt::Display) -> &mut Self {
        self.0.insert(key.into(), value.to_string());
        self
    }

    /// Render as `# key: value` comment lines for CSV files.
    pub fn csv_header(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.0 {
            let _ = writeln!(s, "# {k}: {v}");
        }
        s
    }
}

/// Sphere-coherent-state amplitude table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateTable {
    pub n_top: usize,
    pub lambda: f64,
    pub mu: f64,
    /// `(re, im)` per Fock level, normalized.
    pub amps: Vec<(f64, f64)>,
}

impl StateTable {
    pub fn to_csv(&self, meta: &Meta) -> String {
        let mut s = meta.csv_header();
        let _ = writeln!(s, "# columns: n,re,im");
        for (n, (re, im)) in self.amps.iter().enumerate() {
            let _ = writeln!(s, "{n},{re:.16e},{im:.16e}");
        }
        s
    }

    /// Parse the amplitude rows back out of [`StateTable::to_csv`] output.
    pub fn amps_from_csv(text: &str) -> Result<Vec<(f64, f64)>, String> {
        let mut out = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parts: Vec<&str> = line.split(',').map(str::trim).collect();
            if parts.len() != 3 {
                return Err(format!("state CSV line {}: expected 3 fields", lineno + 1));
            }
            let n: usize = parts[0]
                .parse()
                .map_err(|_| format!("state CSV line {}: bad level index", lineno + 1))?;
            if n != out.len() {
                return Err(format!("state CSV line {}: levels out of order", lineno + 1));
            }
            let re: f64 = parts[1]
                .parse()
                .map_err(|_| format!("state CSV line {}: bad re", lineno + 1))?;
            let im: f64 = parts[2]
                .parse()
                .map_err(|_| format!("state CSV line {}: bad im", lineno + 1))?;
            out.push((re, im));
        }
        Ok(out)
    }
}

/// One row of a negativity sweep over curvature, per state size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NegativitySweepRow {
    pub n_top: usize,
    pub lambda: f64,
    pub delta: f64,
    pub converged: bool,
}

pub fn negativity_sweep_to_csv(rows: &[NegativitySweepRow], meta: &Meta) -> String {
    let mut s = meta.csv_header();
    let _ = writeln!(s, "# columns: n,lambda,delta,converged");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{:.16e},{:.16e},{}",
            r.n_top, r.lambda, r.delta, r.converged
        );
    }
    s
}

pub fn negativity_sweep_from_csv(text: &str) -> Result<Vec<NegativitySweepRow>, String> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = line.split(',').map(str::trim).collect();
        if parts.len() != 4 {
            return Err(format!(
                "negativity sweep line {}: expected 4 fields",
                lineno + 1
            ));
        }
        let bad = |what: &str| format!("negativity sweep line {}: bad {what}", lineno + 1);
        out.push(NegativitySweepRow {
            n_top: parts[0].parse().map_err(|_| bad("n"))?,
            lambda: parts[1].parse().map_err(|_| bad("lambda"))?,
            delta: parts[2].parse().map_err(|_| bad("delta"))?,
            converged: parts[3].parse().map_err(|_| bad("converged"))?,
        });
    }
    Ok(out)
}

/// One row of a squeezing sweep: both canonical quadratures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqueezingSweepRow {
    pub lambda: f64,
    pub s0: f64,
    pub s_half_pi: f64,
}

pub fn squeezing_sweep_to_csv(rows: &[SqueezingSweepRow], meta: &Meta) -> String {
    let mut s = meta.csv_header();
    let _ = writeln!(s, "# columns: lambda,s0,s_half_pi");
    for r in rows {
        let _ = writeln!(s, "{:.16e},{:.16e},{:.16e}", r.lambda, r.s0, r.s_half_pi);
    }
    s
}

pub fn squeezing_sweep_from_csv(text: &str) -> Result<Vec<SqueezingSweepRow>, String> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = line.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(format!(
                "squeezing sweep line {}: expected 3 fields",
                lineno + 1
            ));
        }
        let bad = |what: &str| format!("squeezing sweep line {}: bad {what}", lineno + 1);
        out.push(SqueezingSweepRow {
            lambda: parts[0].parse().map_err(|_| bad("lambda"))?,
            s0: parts[1].parse().map_err(|_| bad("s0"))?,
            s_half_pi: parts[2].parse().map_err(|_| bad("s_half_pi"))?,
        });
    }
    Ok(out)
}

/// Config file contents: flat string map, merged under explicit flags.
/// Tracks key usage so typos are caught instead of silently ignored.
#[derive(Debug, Default)]
pub struct Config {
    map: BTreeMap<String, String>,
    used: std::cell::RefCell<BTreeSet<String>>,
}

impl Config {
    /// Parse either a JSON object of scalars or `key = value` lines.
    pub fn parse(text: &str) -> Result<Self, String> {
        let trimmed = text.trim_start();
        let mut map = BTreeMap::new();
        if trimmed.starts_with('{') {
            let v: serde_json::Value =
                serde_json::from_str(text).map_err(|e| format!("config is not valid JSON: {e}"))?;
            let obj = v
                .as_object()
                .ok_or_else(|| "config JSON must be an object".to_string())?;
            for (k, val) in obj {
                let s = match val {
                    serde_json::Value::String(s) => s.clone(),
                    serde_json::Value::Number(n) => n.to_string(),
                    serde_json::Value::Bool(b) => b.to_string(),
                    other => {
                        return Err(format!("config key '{k}' has non-scalar value {other}"))
                    }
                };
                map.insert(k.clone(), s);
            }
        } else {
            for (lineno, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (k, v) = line
                    .split_once('=')
                    .ok_or_else(|| format!("config line {}: expected key=value", lineno + 1))?;
                map.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
        Ok(Config {
            map,
            used: Default::default(),
        })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        let hit = self.map.get(key).map(String::as_str);
        if hit.is_some() {
            self.used.borrow_mut().insert(key.to_string());
        }
        hit
    }

    /// Keys never consumed by the command, almost always typos.
    pub fn unused_keys(&self) -> Vec<String> {
        let used = self.used.borrow();
        self.map
            .keys()
            .filter(|k| !used.contains(*k))
            .cloned()
            .collect()
    }
}

/// Parse `start:stop:step` into an inclusive grid.
pub fn parse_grid(text: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("grid '{text}' is not start:stop:step"));
    }
    let start: f64 = parts[0].trim().parse().map_err(|_| "bad grid start".to_string())?;
    let stop: f64 = parts[1].trim().parse().map_err(|_| "bad grid stop".to_string())?;
    let step: f64 = parts[2].trim().parse().map_err(|_| "bad grid step".to_string())?;
    let finite = start.is_finite() && stop.is_finite() && step.is_finite();
    if !finite || step <= 0.0 || stop < start {
        return Err(format!("grid '{text}' must ascend with positive step"));
    }
    let count = ((stop - start) / step).round() as usize + 1;
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let v = start + step * k as f64;
        if v > stop + step * 1e-9 {
            break;
        }
        out.push(v);
    }
    Ok(out)
}

/// Parse a comma-separated float list.
pub fn parse_list(text: &str) -> Result<Vec<f64>, String> {
    text.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| format!("bad number '{}' in list", p.trim()))
        })
        .collect()
}

/// Parse a comma-separated unsigned integer list.
pub fn parse_usize_list(text: &str) -> Result<Vec<usize>, String> {
    text.split(',')
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .map_err(|_| format!("bad integer '{}' in list", p.trim()))
        })
        .collect()
}
