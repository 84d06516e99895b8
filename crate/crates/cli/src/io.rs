//! JSON input and output.
//!
//! Every vector over state-action pairs is flat, state-major:
//! entry `s * n_actions + a`. Transitions are flat with index
//! `(s * n_actions + a) * n_states + s2`.

use std::fs;
use std::path::Path;

use rewardsafe::safe_set::{RowProvenance, SafetyMatrix};
use rewardsafe::scalar::parse_rational;
use rewardsafe::{ContextualBandit, DeterministicPolicy, Policy, Rational, Scalar, TabularMdp};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::error::{CliError, CliResult};

/// Scalars the CLI can read from and write to JSON.
pub trait CliScalar: Scalar {
    /// Reads a JSON number or numeric string.
    fn from_json(v: &Value, promote: bool) -> CliResult<Self>;
    /// Reads a command-line literal such as `0.25` or `1/3`.
    fn from_flag(text: &str) -> CliResult<Self>;
    fn to_json(&self) -> Value;
}

impl CliScalar for f64 {
    fn from_json(v: &Value, _promote: bool) -> CliResult<Self> {
        match v {
            Value::Number(n) => n.as_f64().ok_or_else(|| CliError::Parse(format!("bad number {n}"))),
            Value::String(s) => f64::from_flag(s),
            other => Err(CliError::Parse(format!("expected a number, got {other}"))),
        }
    }

    fn from_flag(text: &str) -> CliResult<Self> {
        parse_rational(text)
            .map(|q| q.as_f64())
            .ok_or_else(|| CliError::Parse(format!("not a number: {text:?}")))
    }

    fn to_json(&self) -> Value {
        if self.is_finite() {
            json!(self)
        } else if self.is_nan() {
            json!("nan")
        } else if *self > 0.0 {
            json!("inf")
        } else {
            json!("-inf")
        }
    }
}

impl CliScalar for Rational {
    fn from_json(v: &Value, promote: bool) -> CliResult<Self> {
        match v {
            Value::String(s) => Rational::from_flag(s),
            Value::Number(n) => {
                if let Some(i) = n.as_i64() {
                    return Ok(Rational::from_integer(i.into()));
                }
                let x = n.as_f64().ok_or_else(|| CliError::Parse(format!("bad number {n}")))?;
                if promote {
                    Rational::from_f64_exact(x).ok_or_else(|| CliError::Parse(format!("cannot promote {n}")))
                } else {
                    Err(CliError::Parse(format!(
                        "float literal {n} in rational mode; quote it as a string (\"{n}\") or pass --promote-floats"
                    )))
                }
            }
            other => Err(CliError::Parse(format!("expected a number, got {other}"))),
        }
    }

    fn from_flag(text: &str) -> CliResult<Self> {
        parse_rational(text).ok_or_else(|| CliError::Parse(format!("not a number: {text:?}")))
    }

    fn to_json(&self) -> Value {
        json!(self.to_string())
    }
}

pub fn vec_json<S: CliScalar>(v: &[S]) -> Value {
    Value::Array(v.iter().map(CliScalar::to_json).collect())
}

pub fn read_json(path: &Path) -> CliResult<Value> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

fn parse_vec<S: CliScalar>(vals: &[Value], promote: bool, what: &str) -> CliResult<Vec<S>> {
    vals.iter()
        .enumerate()
        .map(|(i, v)| S::from_json(v, promote).map_err(|e| CliError::Parse(format!("{what}[{i}]: {e}"))))
        .collect()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    #[serde(default)]
    description: Option<String>,
    #[serde(default)]
    kind: Option<String>,
    n_states: usize,
    n_actions: usize,
    #[serde(default)]
    gamma: Option<Value>,
    #[serde(default)]
    transitions: Option<Vec<Value>>,
    mu0: Vec<Value>,
    reward: Vec<Value>,
}

#[derive(Debug, Clone)]
pub enum Model<S> {
    Mdp(TabularMdp<S>),
    Bandit(ContextualBandit<S>),
}

impl<S: Scalar> Model<S> {
    /// The MDP view; a bandit embeds with `gamma = 0` and self-loops.
    pub fn mdp(&self) -> TabularMdp<S> {
        match self {
            Model::Mdp(m) => m.clone(),
            Model::Bandit(b) => b.as_mdp(S::zero()),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Model::Mdp(_) => "mdp",
            Model::Bandit(_) => "bandit",
        }
    }

    pub fn as_f64(&self) -> Model<f64> {
        match self {
            Model::Mdp(m) => Model::Mdp(m.as_f64()),
            Model::Bandit(b) => Model::Bandit(ContextualBandit {
                n_states: b.n_states,
                n_actions: b.n_actions,
                mu0: b.mu0.iter().map(Scalar::as_f64).collect(),
                reward: b.reward.iter().map(Scalar::as_f64).collect(),
            }),
        }
    }
}

pub fn load_model<S: CliScalar>(path: &Path, promote: bool) -> CliResult<Model<S>> {
    let raw = read_json(path)?;
    let f: ModelFile = serde_json::from_value(raw).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    let _ = f.description;
    let kind = match f.kind.as_deref() {
        Some(k) => k.to_string(),
        None if f.transitions.is_some() => "mdp".into(),
        None => "bandit".into(),
    };
    let mu0 = parse_vec::<S>(&f.mu0, promote, "mu0")?;
    let reward = parse_vec::<S>(&f.reward, promote, "reward")?;
    let shape = |e: rewardsafe::Error| CliError::Parse(format!("{}: {e}", path.display()));
    match kind.as_str() {
        "mdp" => {
            let t = f.transitions.ok_or_else(|| CliError::Parse("mdp needs \"transitions\"".into()))?;
            let transitions = parse_vec::<S>(&t, promote, "transitions")?;
            let g = f.gamma.ok_or_else(|| CliError::Parse("mdp needs \"gamma\"".into()))?;
            let gamma = S::from_json(&g, promote).map_err(|e| CliError::Parse(format!("gamma: {e}")))?;
            let m = TabularMdp::new(f.n_states, f.n_actions, transitions, mu0, gamma, reward).map_err(shape)?;
            Ok(Model::Mdp(m))
        }
        "bandit" => {
            if f.transitions.is_some() {
                return Err(CliError::Parse("a bandit has no \"transitions\"".into()));
            }
            if let Some(g) = f.gamma {
                if !S::from_json(&g, promote)?.is_zero() {
                    return Err(CliError::Parse("a bandit has gamma = 0".into()));
                }
            }
            Ok(Model::Bandit(ContextualBandit::new(f.n_states, f.n_actions, mu0, reward).map_err(shape)?))
        }
        other => Err(CliError::Parse(format!("unknown model kind {other:?}"))),
    }
}

/// A flat vector: either a bare array or `{"values": [...]}`.
pub fn load_vector<S: CliScalar>(path: &Path, len: usize, promote: bool) -> CliResult<Vec<S>> {
    let raw = read_json(path)?;
    let arr = match &raw {
        Value::Array(a) => a,
        Value::Object(o) => match o.get("values") {
            Some(Value::Array(a)) => a,
            _ => return Err(CliError::Parse(format!("{}: expected an array or {{\"values\": [...]}}", path.display()))),
        },
        _ => return Err(CliError::Parse(format!("{}: expected an array", path.display()))),
    };
    if arr.len() != len {
        return Err(CliError::Parse(format!("{}: expected {len} entries, found {}", path.display(), arr.len())));
    }
    parse_vec(arr, promote, "values")
}

pub fn load_policy<S: CliScalar>(path: &Path, n: usize, m: usize, promote: bool) -> CliResult<Policy<S>> {
    let probs = load_vector(path, n * m, promote)?;
    Policy::new(n, m, probs).map_err(CliError::Core)
}

pub fn policy_json<S: CliScalar>(pi: &Policy<S>) -> Value {
    vec_json(&pi.probs)
}

pub fn matrix_json<S: CliScalar>(mat: &SafetyMatrix<S>, n_pairs: usize, l: &S, mode: &str) -> Value {
    let rows: Vec<Value> = mat.rows.iter().map(|r| vec_json(r)).collect();
    let prov: Vec<Value> = mat
        .provenance
        .iter()
        .map(|p| json!({"vertex": p.vertex.actions, "e_f": p.e_f, "e_g": p.e_g}))
        .collect();
    json!({
        "mode": mode,
        "n_pairs": n_pairs,
        "regret_bound": l.to_json(),
        "rows": rows,
        "provenance": prov,
    })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixFile {
    mode: String,
    n_pairs: usize,
    regret_bound: Value,
    rows: Vec<Vec<Value>>,
    provenance: Vec<ProvenanceFile>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProvenanceFile {
    vertex: Vec<usize>,
    e_f: Vec<usize>,
    e_g: Vec<usize>,
}

/// Reads a matrix written by [`matrix_json`]; returns it with its `L`.
pub fn load_matrix<S: CliScalar>(path: &Path, n_pairs: usize) -> CliResult<(SafetyMatrix<S>, S)> {
    let raw = read_json(path)?;
    let f: MatrixFile = serde_json::from_value(raw).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    if f.n_pairs != n_pairs {
        return Err(CliError::Parse(format!("matrix has {} columns, model has {n_pairs} pairs", f.n_pairs)));
    }
    if f.rows.len() != f.provenance.len() {
        return Err(CliError::Parse("rows and provenance differ in length".into()));
    }
    // Rational files hold exact strings; float files hold round-trip decimals.
    let exact = f.mode == "rational";
    let mut rows = Vec::with_capacity(f.rows.len());
    for (i, r) in f.rows.iter().enumerate() {
        if r.len() != n_pairs {
            return Err(CliError::Parse(format!("row {i} has {} entries", r.len())));
        }
        rows.push(parse_vec::<S>(r, !exact, "row")?);
    }
    let provenance = f
        .provenance
        .into_iter()
        .map(|p| RowProvenance { vertex: DeterministicPolicy { actions: p.vertex }, e_f: p.e_f, e_g: p.e_g })
        .collect();
    let l = S::from_json(&f.regret_bound, !exact)?;
    Ok((SafetyMatrix { rows, provenance }, l))
}
