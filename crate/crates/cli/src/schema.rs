//! Structural validation of the raw TOML table before typed deserialization.

use toml::{Table, Value};

#[derive(Debug, Clone, Copy)]
pub(crate) enum Kind {
    Float,
    Int,
    Bool,
    Str,
    FloatList,
    IntList,
    Table(&'static [Field]),
    TableList(&'static [Field]),
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Field {
    pub name: &'static str,
    pub kind: Kind,
    pub required: bool,
}

const fn opt(name: &'static str, kind: Kind) -> Field {
    Field { name, kind, required: false }
}

const fn req(name: &'static str, kind: Kind) -> Field {
    Field { name, kind, required: true }
}

const MODEL: &[Field] = &[
    req("name", Kind::Str),
    opt("dim", Kind::Int),
    opt("lambda", Kind::Float),
    opt("eps", Kind::Float),
    opt("x0_min", Kind::Float),
    opt("x0_max", Kind::Float),
    opt("n", Kind::Int),
    opt("m", Kind::Float),
    opt("kappa", Kind::Int),
    opt("epsilon", Kind::Float),
    opt("r_top", Kind::Float),
];

const GRID: &[Field] = &[req("shape", Kind::IntList), opt("periods", Kind::FloatList)];

const MODE: &[Field] = &[req("amplitude", Kind::Float), req("k", Kind::IntList), opt("phase", Kind::Float)];

const INITIAL: &[Field] = &[
    req("kind", Kind::Str),
    opt("value", Kind::Float),
    opt("offset", Kind::Float),
    opt("modes", Kind::TableList(MODE)),
    opt("path", Kind::Str),
];

const FLOW: &[Field] = &[
    req("t_max", Kind::Float),
    opt("cfl", Kind::Float),
    opt("fd_order", Kind::Int),
    opt("h_min_floor", Kind::Float),
    opt("vtilde_abort", Kind::Float),
    opt("record_every", Kind::Int),
    opt("snapshot_every", Kind::Float),
    opt("integrator", Kind::Str),
    opt("eps_space", Kind::Float),
    opt("residuals", Kind::Bool),
];

const TIMELIKE: &[Field] = &[opt("enabled", Kind::Bool), opt("samples", Kind::Int)];

const BARRIER: &[Field] = &[
    opt("enabled", Kind::Bool),
    opt("x0", Kind::FloatList),
    opt("x0_min", Kind::Float),
    opt("x0_max", Kind::Float),
    opt("count", Kind::Int),
    opt("threshold", Kind::Float),
];

const DECAY: &[Field] = &[
    opt("enabled", Kind::Bool),
    opt("tau0", Kind::Float),
    opt("b", Kind::Float),
    opt("phi", Kind::Str),
    opt("phi_value", Kind::Float),
    opt("phi_scale", Kind::Float),
    opt("n_tau", Kind::Int),
    opt("n_x", Kind::Int),
    opt("analytic_divergence", Kind::Bool),
];

const IDENTITY: &[Field] = &[
    opt("enabled", Kind::Bool),
    opt("tau0", Kind::Float),
    opt("tau", Kind::Float),
    opt("samples", Kind::Int),
];

const TRACE_CHECKS: &[Field] = &[
    opt("enabled", Kind::Bool),
    opt("volume_tol", Kind::Float),
    opt("tau_tol", Kind::Float),
    opt("growth_slack", Kind::Float),
];

const CHECKS: &[Field] = &[
    opt("seed", Kind::Int),
    opt("timelike", Kind::Table(TIMELIKE)),
    opt("barrier", Kind::Table(BARRIER)),
    opt("decay", Kind::Table(DECAY)),
    opt("identity", Kind::Table(IDENTITY)),
    opt("trace", Kind::Table(TRACE_CHECKS)),
];

const LIFESPAN: &[Field] = &[opt("curves", Kind::Int)];

const ORACLE: &[Field] = &[opt("tol", Kind::Float), opt("resolutions", Kind::IntList), opt("max_deviation", Kind::Float)];

const OUTPUT: &[Field] = &[opt("dir", Kind::Str), opt("snapshot_format", Kind::Str), opt("snapshots", Kind::Bool)];

pub(crate) const ROOT: &[Field] = &[
    req("model", Kind::Table(MODEL)),
    req("grid", Kind::Table(GRID)),
    req("initial", Kind::Table(INITIAL)),
    req("flow", Kind::Table(FLOW)),
    opt("checks", Kind::Table(CHECKS)),
    opt("lifespan", Kind::Table(LIFESPAN)),
    opt("oracle", Kind::Table(ORACLE)),
    opt("output", Kind::Table(OUTPUT)),
];

fn join(prefix: &str, key: &str) -> String {
    if prefix.is_empty() {
        key.to_string()
    } else {
        format!("{prefix}.{key}")
    }
}

fn type_name(v: &Value) -> &'static str {
    match v {
        Value::String(_) => "string",
        Value::Integer(_) => "integer",
        Value::Float(_) => "float",
        Value::Boolean(_) => "boolean",
        Value::Datetime(_) => "datetime",
        Value::Array(_) => "array",
        Value::Table(_) => "table",
    }
}

fn expected(kind: Kind) -> &'static str {
    match kind {
        Kind::Float => "number",
        Kind::Int => "integer",
        Kind::Bool => "boolean",
        Kind::Str => "string",
        Kind::FloatList => "array of numbers",
        Kind::IntList => "array of integers",
        Kind::Table(_) => "table",
        Kind::TableList(_) => "array of tables",
    }
}

/// Reports every leaf under an unknown key, so `[flw] cfl = ..` names `flw.cfl`.
fn unknown(v: &Value, path: &str, out: &mut Vec<(String, String)>) {
    match v {
        Value::Table(t) if !t.is_empty() => {
            for (k, sub) in t {
                unknown(sub, &join(path, k), out);
            }
        }
        _ => out.push((path.to_string(), "unknown key".into())),
    }
}

/// Appends one `(path, message)` entry per violation found under `table`.
pub(crate) fn walk(table: &Table, fields: &[Field], prefix: &str, out: &mut Vec<(String, String)>) {
    for (key, v) in table {
        if !fields.iter().any(|f| f.name == key) {
            unknown(v, &join(prefix, key), out);
        }
    }
    for f in fields {
        let path = join(prefix, f.name);
        let Some(v) = table.get(f.name) else {
            if f.required {
                out.push((path, "missing required key".into()));
            }
            continue;
        };
        let ok = match (f.kind, v) {
            (Kind::Float, Value::Float(_) | Value::Integer(_)) => true,
            (Kind::Int, Value::Integer(_)) => true,
            (Kind::Bool, Value::Boolean(_)) => true,
            (Kind::Str, Value::String(_)) => true,
            (Kind::FloatList, Value::Array(a)) => a.iter().all(|x| matches!(x, Value::Float(_) | Value::Integer(_))),
            (Kind::IntList, Value::Array(a)) => a.iter().all(|x| matches!(x, Value::Integer(_))),
            (Kind::Table(sub), Value::Table(t)) => {
                walk(t, sub, &path, out);
                true
            }
            (Kind::TableList(sub), Value::Array(a)) => {
                for (i, item) in a.iter().enumerate() {
                    match item {
                        Value::Table(t) => walk(t, sub, &format!("{path}[{i}]"), out),
                        other => out.push((format!("{path}[{i}]"), format!("expected table, found {}", type_name(other)))),
                    }
                }
                true
            }
            _ => false,
        };
        if !ok {
            out.push((path, format!("expected {}, found {}", expected(f.kind), type_name(v))));
        }
    }
}
