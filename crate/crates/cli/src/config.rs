//! Run configuration: TOML text, structural schema, typed sections, semantic validation.

use crate::schema;
use imcf_core::analysis::DEFAULT_BARRIER_THRESHOLD;
use imcf_core::flow::{FlowConfig, Integrator};
use imcf_core::geometry::{compute_geometry_with, GeometryOptions, GraphState, EPS_SPACE};
use imcf_core::grid::{FdOrder, PeriodicGrid, ScalarField};
use imcf_core::spacetime::{
    make_exp_rw, make_minkowski_slab, make_sads_interior_with, make_sads_region, make_warped_rw, SadsParams,
    SpacetimeModel,
};
use imcf_core::ImcfError;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::f64::consts::TAU;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

/// One offending key path and what is wrong with it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct ConfigError {
    pub violations: Vec<Violation>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ConfigError: {} violation(s)", self.violations.len())?;
        for v in &self.violations {
            write!(f, "\n  {}: {}", v.path, v.message)?;
        }
        Ok(())
    }
}

impl ConfigError {
    fn single(path: &str, message: impl Into<String>) -> Self {
        Self { violations: vec![Violation { path: path.into(), message: message.into() }] }
    }

    /// True when some violation sits at `path` or below it.
    pub fn mentions(&self, path: &str) -> bool {
        self.violations.iter().any(|v| v.path == path || v.path.starts_with(&format!("{path}.")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSection {
    pub name: String,
    pub dim: Option<usize>,
    pub lambda: Option<f64>,
    pub eps: Option<f64>,
    pub x0_min: Option<f64>,
    pub x0_max: Option<f64>,
    pub n: Option<usize>,
    pub m: Option<f64>,
    pub kappa: Option<i32>,
    pub epsilon: Option<f64>,
    pub r_top: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSection {
    pub shape: Vec<usize>,
    pub periods: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub amplitude: f64,
    pub k: Vec<i64>,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialSection {
    pub kind: String,
    pub value: Option<f64>,
    pub offset: Option<f64>,
    pub modes: Option<Vec<Mode>>,
    pub path: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSection {
    pub t_max: f64,
    pub cfl: Option<f64>,
    pub fd_order: Option<u32>,
    pub h_min_floor: Option<f64>,
    pub vtilde_abort: Option<f64>,
    pub record_every: Option<usize>,
    pub snapshot_every: Option<f64>,
    pub integrator: Option<String>,
    pub eps_space: Option<f64>,
    pub residuals: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct TimelikeSection {
    pub enabled: Option<bool>,
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct BarrierSection {
    pub enabled: Option<bool>,
    pub x0: Option<Vec<f64>>,
    pub x0_min: Option<f64>,
    pub x0_max: Option<f64>,
    pub count: Option<usize>,
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct DecaySection {
    pub enabled: Option<bool>,
    pub tau0: Option<f64>,
    pub b: Option<f64>,
    pub phi: Option<String>,
    pub phi_value: Option<f64>,
    pub phi_scale: Option<f64>,
    pub n_tau: Option<usize>,
    pub n_x: Option<usize>,
    pub analytic_divergence: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct IdentitySection {
    pub enabled: Option<bool>,
    pub tau0: Option<f64>,
    pub tau: Option<f64>,
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct TraceChecksSection {
    pub enabled: Option<bool>,
    pub volume_tol: Option<f64>,
    pub tau_tol: Option<f64>,
    pub growth_slack: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ChecksSection {
    pub seed: Option<u64>,
    #[serde(default)]
    pub timelike: TimelikeSection,
    #[serde(default)]
    pub barrier: BarrierSection,
    #[serde(default)]
    pub decay: DecaySection,
    #[serde(default)]
    pub identity: IdentitySection,
    #[serde(default)]
    pub trace: TraceChecksSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct LifespanSection {
    pub curves: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct OracleSection {
    pub tol: Option<f64>,
    pub resolutions: Option<Vec<usize>>,
    pub max_deviation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct OutputSection {
    pub dir: Option<String>,
    pub snapshot_format: Option<String>,
    pub snapshots: Option<bool>,
}

/// The file contents after structural validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigFile {
    pub model: ModelSection,
    pub grid: GridSection,
    pub initial: InitialSection,
    pub flow: FlowSection,
    #[serde(default)]
    pub checks: ChecksSection,
    #[serde(default)]
    pub lifespan: LifespanSection,
    #[serde(default)]
    pub oracle: OracleSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnapshotFormat {
    Binary,
    Csv,
}

/// A validated configuration with every object needed to start a run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub file: ConfigFile,
    pub model: SpacetimeModel,
    pub grid: Arc<PeriodicGrid>,
    pub u0: ScalarField,
    pub flow: FlowConfig,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub snapshot_format: SnapshotFormat,
    pub write_snapshots: bool,
    /// Hex SHA-256 of the effective configuration, output directory excluded.
    pub config_hash: String,
}

impl RunConfig {
    pub fn barrier_threshold(&self) -> f64 {
        self.file.checks.barrier.threshold.unwrap_or(DEFAULT_BARRIER_THRESHOLD)
    }

    /// Spatially constant initial data.
    pub fn is_homogeneous_data(&self) -> bool {
        let v = self.u0.values();
        v.iter().all(|&x| x == v[0])
    }
}

const DEFAULT_OUTPUT_DIR: &str = "imcf_out";

struct Collector(Vec<Violation>);

impl Collector {
    fn push(&mut self, path: &str, message: impl Into<String>) {
        self.0.push(Violation { path: path.into(), message: message.into() });
    }
}

pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    parse_config_with(path, None)
}

/// Parses and validates `path`; `seed` overrides `checks.seed`.
pub fn parse_config_with(path: &Path, seed: Option<u64>) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::single("<file>", format!("cannot read {}: {e}", path.display())))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_config_str(&text, &base, seed)
}

/// Parses configuration text; relative file paths resolve against `base`.
pub fn parse_config_str(text: &str, base: &Path, seed: Option<u64>) -> Result<RunConfig, ConfigError> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::single("<syntax>", e.message()))?;
    let mut raw = Vec::new();
    schema::walk(&table, schema::ROOT, "", &mut raw);
    if !raw.is_empty() {
        return Err(ConfigError {
            violations: raw.into_iter().map(|(path, message)| Violation { path, message }).collect(),
        });
    }
    let mut file: ConfigFile = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| ConfigError::single("<schema>", e.message()))?;
    if let Some(s) = seed {
        file.checks.seed = Some(s);
    }
    build(file, base)
}

fn build(file: ConfigFile, base: &Path) -> Result<RunConfig, ConfigError> {
    let mut c = Collector(Vec::new());
    let flow = flow_config(&file.flow, &mut c);
    let grid = grid_from(&file, &mut c);
    let model = grid.as_ref().and_then(|g| model_from(&file.model, g, &mut c));
    let u0_file = initial_file_bytes(&file.initial, base, &mut c);
    let u0 = grid.as_ref().and_then(|g| initial_field(&file.initial, g, u0_file.as_deref(), &mut c));
    validate_checks(&file.checks, &mut c);
    validate_oracle(&file, &mut c);
    let snapshot_format = match file.output.snapshot_format.as_deref() {
        None | Some("bin") => SnapshotFormat::Binary,
        Some("csv") => SnapshotFormat::Csv,
        Some(other) => {
            c.push("output.snapshot_format", format!("'{other}' is not one of bin, csv"));
            SnapshotFormat::Binary
        }
    };
    if let (Some(m), Some(u), Some(f)) = (&model, &u0, &flow) {
        if c.0.is_empty() {
            let opts = GeometryOptions { order: f.fd_order, eps_space: f.eps_space };
            match compute_geometry_with(m, &GraphState::new(0.0, u.clone()), opts) {
                Ok(_) => {}
                Err(e @ ImcfError::NotSpacelike { .. }) => {
                    c.push("initial", format!("violates the spacelike invariant |Du| < 1 - eps_space: {e}"))
                }
                Err(e @ ImcfError::Domain(_)) => c.push("initial", format!("graph leaves the model's time range: {e}")),
                Err(e) => c.push("initial", format!("initial geometry cannot be evaluated: {e}")),
            }
        }
    }
    if !c.0.is_empty() {
        return Err(ConfigError { violations: c.0 });
    }
    let (model, grid, u0, flow) = (model.expect("checked"), grid.expect("checked"), u0.expect("checked"), flow.expect("checked"));
    let seed = file.checks.seed.unwrap_or(0);
    let config_hash = hash_config(&file, seed, u0_file.as_deref());
    Ok(RunConfig {
        output_dir: PathBuf::from(file.output.dir.clone().unwrap_or_else(|| DEFAULT_OUTPUT_DIR.into())),
        write_snapshots: file.output.snapshots.unwrap_or(true),
        file,
        model,
        grid,
        u0,
        flow,
        seed,
        snapshot_format,
        config_hash,
    })
}

fn hash_config(file: &ConfigFile, seed: u64, u0_bytes: Option<&[u8]>) -> String {
    let mut canonical = file.clone();
    canonical.output.dir = None;
    canonical.checks.seed = Some(seed);
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(&canonical).expect("config serializes"));
    if let Some(b) = u0_bytes {
        h.update(b);
    }
    hex::encode(h.finalize())
}

fn flow_config(s: &FlowSection, c: &mut Collector) -> Option<FlowConfig> {
    let mut f = FlowConfig::new(s.t_max);
    let before = c.0.len();
    if let Some(v) = s.cfl {
        f.cfl = v;
    }
    if let Some(k) = s.fd_order {
        match FdOrder::from_int(k) {
            Ok(o) => f.fd_order = o,
            Err(_) => c.push("flow.fd_order", format!("{k} is not 2 or 4")),
        }
    }
    if let Some(v) = s.h_min_floor {
        f.h_min_floor = v;
    }
    if let Some(v) = s.vtilde_abort {
        f.vtilde_abort = v;
    }
    if let Some(v) = s.record_every {
        f.record_every = v;
    }
    if let Some(v) = s.snapshot_every {
        f.snapshot_every = v;
    }
    if let Some(name) = &s.integrator {
        f.integrator = match name.as_str() {
            "euler" => Integrator::Euler,
            "rk2" => Integrator::Rk2,
            "rk4" => Integrator::Rk4,
            other => {
                c.push("flow.integrator", format!("'{other}' is not one of euler, rk2, rk4"));
                Integrator::Rk2
            }
        };
    }
    f.eps_space = s.eps_space.unwrap_or(EPS_SPACE);
    if let Some(r) = s.residuals {
        f.residuals = r;
    }
    if let Err(e) = f.validate() {
        c.push("flow", e.to_string());
    }
    (c.0.len() == before).then_some(f)
}

fn grid_from(file: &ConfigFile, c: &mut Collector) -> Option<Arc<PeriodicGrid>> {
    let shape = &file.grid.shape;
    let periods = file.grid.periods.clone().unwrap_or_else(|| vec![TAU; shape.len()]);
    match PeriodicGrid::new(shape, &periods) {
        Ok(g) => Some(Arc::new(g)),
        Err(e) => {
            c.push("grid", e.to_string());
            None
        }
    }
}

/// Required and optional parameter keys per model name.
fn model_keys(name: &str) -> Option<(&'static [&'static str], &'static [&'static str])> {
    Some(match name {
        "exp_rw" => (&["lambda"], &["dim"]),
        "warped_rw" => (&["lambda", "eps"], &["dim"]),
        "minkowski_slab" => (&["x0_min", "x0_max"], &["dim"]),
        "sads_interior" => (&["n", "lambda", "m"], &["kappa", "epsilon"]),
        "sads_region" => (&["n", "lambda", "m", "r_top", "x0_min", "x0_max"], &["kappa"]),
        _ => return None,
    })
}

fn model_from(s: &ModelSection, grid: &Arc<PeriodicGrid>, c: &mut Collector) -> Option<SpacetimeModel> {
    let Some((required, optional)) = model_keys(&s.name) else {
        c.push(
            "model.name",
            format!("unknown model '{}' (exp_rw, warped_rw, minkowski_slab, sads_interior, sads_region)", s.name),
        );
        return None;
    };
    let present: Vec<(&str, bool)> = vec![
        ("dim", s.dim.is_some()),
        ("lambda", s.lambda.is_some()),
        ("eps", s.eps.is_some()),
        ("x0_min", s.x0_min.is_some()),
        ("x0_max", s.x0_max.is_some()),
        ("n", s.n.is_some()),
        ("m", s.m.is_some()),
        ("kappa", s.kappa.is_some()),
        ("epsilon", s.epsilon.is_some()),
        ("r_top", s.r_top.is_some()),
    ];
    let before = c.0.len();
    for (key, set) in present {
        let path = format!("model.{key}");
        if set && !required.contains(&key) && !optional.contains(&key) {
            c.push(&path, format!("not a parameter of model {}", s.name));
        }
        if !set && required.contains(&key) {
            c.push(&path, format!("missing required key for model {}", s.name));
        }
    }
    let d = grid.dim();
    if let Some(dim) = s.dim {
        if dim != d {
            c.push("model.dim", format!("{dim} does not match the {d}-dimensional grid"));
        }
    }
    if let (true, Some(n)) = (s.name.starts_with("sads"), s.n) {
        if n + 1 != d {
            c.push("grid.shape", format!("model {} with n = {n} is {}-dimensional, grid is {d}-dimensional", s.name, n + 1));
        }
    }
    if c.0.len() > before {
        return None;
    }
    let periods = Some(grid.periods().to_vec());
    let kappa = s.kappa.unwrap_or(0);
    let built = match s.name.as_str() {
        "exp_rw" => make_exp_rw(s.lambda.expect("required"), d, periods),
        "warped_rw" => make_warped_rw(s.lambda.expect("required"), s.eps.expect("required"), d, periods),
        "minkowski_slab" => make_minkowski_slab(d, s.x0_min.expect("required"), s.x0_max.expect("required"), periods),
        "sads_interior" => {
            let mut p = SadsParams::new(s.n.expect("required"), s.lambda.expect("required"), s.m.expect("required"), kappa);
            if let Some(e) = s.epsilon {
                p.epsilon = e;
            }
            p.periods = periods;
            make_sads_interior_with(&p)
        }
        "sads_region" => make_sads_region(
            s.n.expect("required"),
            s.lambda.expect("required"),
            s.m.expect("required"),
            kappa,
            s.r_top.expect("required"),
            (s.x0_min.expect("required"), s.x0_max.expect("required")),
            periods,
        ),
        _ => unreachable!("checked by model_keys"),
    };
    match built {
        Ok(m) => Some(m),
        Err(e) => {
            c.push("model", e.to_string());
            None
        }
    }
}

fn initial_file_bytes(s: &InitialSection, base: &Path, c: &mut Collector) -> Option<Vec<u8>> {
    if s.kind != "file" {
        return None;
    }
    let rel = s.path.as_ref()?;
    let path = base.join(rel);
    match std::fs::read(&path) {
        Ok(b) => Some(b),
        Err(e) => {
            c.push("initial.path", format!("cannot read {}: {e}", path.display()));
            None
        }
    }
}

fn parse_values(bytes: &[u8]) -> Result<Vec<f64>, String> {
    let text = std::str::from_utf8(bytes).map_err(|e| e.to_string())?;
    let mut out = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        for tok in line.split(|ch: char| ch == ',' || ch.is_whitespace()).filter(|t| !t.is_empty()) {
            out.push(tok.parse::<f64>().map_err(|_| format!("'{tok}' is not a number"))?);
        }
    }
    Ok(out)
}

fn initial_field(s: &InitialSection, grid: &Arc<PeriodicGrid>, file: Option<&[u8]>, c: &mut Collector) -> Option<ScalarField> {
    let allowed: &[&str] = match s.kind.as_str() {
        "constant" => &["value"],
        "fourier" => &["offset", "modes"],
        "file" => &["path"],
        other => {
            c.push("initial.kind", format!("'{other}' is not one of constant, fourier, file"));
            return None;
        }
    };
    let before = c.0.len();
    for (key, set) in [("value", s.value.is_some()), ("offset", s.offset.is_some()), ("modes", s.modes.is_some()), ("path", s.path.is_some())] {
        if set && !allowed.contains(&key) {
            c.push(&format!("initial.{key}"), format!("not used by initial data of kind {}", s.kind));
        }
    }
    match s.kind.as_str() {
        "constant" if s.value.is_none() => c.push("initial.value", "missing required key for kind constant"),
        "fourier" if s.modes.is_none() => c.push("initial.modes", "missing required key for kind fourier"),
        "file" if s.path.is_none() => c.push("initial.path", "missing required key for kind file"),
        _ => {}
    }
    let d = grid.dim();
    for (i, m) in s.modes.iter().flatten().enumerate() {
        if m.k.len() != d {
            c.push(&format!("initial.modes[{i}].k"), format!("{} wave numbers for a {d}-dimensional grid", m.k.len()));
        }
        if !m.amplitude.is_finite() || !m.phase.is_finite() {
            c.push(&format!("initial.modes[{i}]"), "amplitude and phase must be finite");
        }
    }
    if c.0.len() > before {
        return None;
    }
    match s.kind.as_str() {
        "constant" => {
            let v = s.value.expect("checked");
            if !v.is_finite() {
                c.push("initial.value", "must be finite");
                return None;
            }
            Some(ScalarField::constant(grid.clone(), v))
        }
        "fourier" => {
            let offset = s.offset.unwrap_or(0.0);
            let modes = s.modes.clone().expect("checked");
            let periods = grid.periods().to_vec();
            Some(ScalarField::from_fn(grid.clone(), move |x| {
                offset
                    + modes
                        .iter()
                        .map(|m| {
                            let arg: f64 = (0..x.len()).map(|a| TAU * m.k[a] as f64 * x[a] / periods[a]).sum();
                            m.amplitude * (arg + m.phase).sin()
                        })
                        .sum::<f64>()
            }))
        }
        _ => {
            let bytes = file?;
            match parse_values(bytes) {
                Ok(v) if v.len() != grid.len() => {
                    c.push("initial.path", format!("{} values for a grid of {} points", v.len(), grid.len()));
                    None
                }
                Ok(v) if v.iter().any(|x| !x.is_finite()) => {
                    c.push("initial.path", "values must be finite");
                    None
                }
                Ok(v) => Some(ScalarField::new(grid.clone(), v).expect("length checked")),
                Err(e) => {
                    c.push("initial.path", e);
                    None
                }
            }
        }
    }
}

fn validate_checks(s: &ChecksSection, c: &mut Collector) {
    if s.timelike.samples == Some(0) {
        c.push("checks.timelike.samples", "must be at least 1");
    }
    let b = &s.barrier;
    if b.x0.is_some() && (b.x0_min.is_some() || b.x0_max.is_some() || b.count.is_some()) {
        c.push("checks.barrier.x0", "give either an explicit x0 list or x0_min/x0_max/count, not both");
    }
    if let Some(xs) = &b.x0 {
        if xs.is_empty() || xs.windows(2).any(|w| !(w[1] > w[0])) {
            c.push("checks.barrier.x0", "must be a nonempty increasing list");
        }
    }
    if matches!(b.count, Some(n) if n < 2) {
        c.push("checks.barrier.count", "must be at least 2");
    }
    if matches!(b.threshold, Some(t) if !t.is_finite()) {
        c.push("checks.barrier.threshold", "must be finite");
    }
    let d = &s.decay;
    match d.phi.as_deref() {
        None | Some("measured") => {
            if d.phi_value.is_some() {
                c.push("checks.decay.phi_value", "only used with phi = \"constant\"");
            }
        }
        Some("constant") => {
            if !matches!(d.phi_value, Some(v) if v > 0.0 && v.is_finite()) {
                c.push("checks.decay.phi_value", "phi = \"constant\" needs a positive phi_value");
            }
        }
        Some(other) => c.push("checks.decay.phi", format!("'{other}' is not one of measured, constant")),
    }
    if matches!(d.phi_scale, Some(v) if !(v > 0.0 && v.is_finite())) {
        c.push("checks.decay.phi_scale", "must be positive");
    }
    if matches!(d.n_tau, Some(n) if n < 2) {
        c.push("checks.decay.n_tau", "must be at least 2");
    }
    if d.n_x == Some(0) {
        c.push("checks.decay.n_x", "must be at least 1");
    }
    if s.identity.samples == Some(0) {
        c.push("checks.identity.samples", "must be at least 1");
    }
    let t = &s.trace;
    for (key, v) in [("volume_tol", t.volume_tol), ("tau_tol", t.tau_tol), ("growth_slack", t.growth_slack)] {
        if matches!(v, Some(x) if !(x > 0.0)) {
            c.push(&format!("checks.trace.{key}"), "must be positive");
        }
    }
}

fn validate_oracle(file: &ConfigFile, c: &mut Collector) {
    if matches!(file.oracle.tol, Some(t) if !(t > 0.0 && t < 1.0)) {
        c.push("oracle.tol", "must lie in (0, 1)");
    }
    if matches!(file.oracle.max_deviation, Some(t) if !(t > 0.0)) {
        c.push("oracle.max_deviation", "must be positive");
    }
    if let Some(rs) = &file.oracle.resolutions {
        if rs.is_empty() {
            c.push("oracle.resolutions", "must not be empty");
        }
        if rs.windows(2).any(|w| !(w[1] > w[0])) {
            c.push("oracle.resolutions", "must be strictly increasing");
        }
    }
    if file.lifespan.curves == Some(0) {
        c.push("lifespan.curves", "must be at least 1");
    }
}
