//! Plain-text problem files.
//!
//! One `key: value` pair per line; blank lines and lines starting with `#`
//! are ignored. Values are a scalar, a word, or a bracketed comma separated
//! list. Matrices are row-major. Floats are written with 17 significant
//! digits, which reproduces every `f64` exactly on reading.
//!
//! ```text
//! x_blocks: [1]
//! y_blocks: [1]
//! z_dim: 1
//! A: [1.0000000000000000e0]
//! B: [1.0000000000000000e0]
//! c: [1.0000000000000000e0]
//! f.Q: [1.0000000000000000e0]
//! f.l: [0.0000000000000000e0]
//! f.const: 0.0000000000000000e0
//! f.sigma_hat_mode: tight
//! f.sigma_mode: zero
//! g.Q: ...
//! p1.kind: zero
//! p1.params: []
//! q1.kind: l1
//! q1.params: [5.0000000000000000e-1]
//! ```
//!
//! `p1`/`q1` kinds are `zero` (no params), `l1` (`[weight]`) and `box`
//! (`[lo_1, .., lo_d, hi_1, .., hi_d]`).

use std::collections::HashMap;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::blockalg::{BlockOperator, BlockStructure, BlockVector};
use crate::error::{Error, Result};
use crate::model::{MajorizerMode, MinorizerMode, ProblemSpec, ProxFriendlyFunction, SmoothConvexFunction};

const KEYS: &[&str] = &[
    "x_blocks",
    "y_blocks",
    "z_dim",
    "A",
    "B",
    "c",
    "f.Q",
    "f.l",
    "f.const",
    "f.sigma_hat_mode",
    "f.sigma_mode",
    "g.Q",
    "g.l",
    "g.const",
    "g.sigma_hat_mode",
    "g.sigma_mode",
    "p1.kind",
    "p1.params",
    "q1.kind",
    "q1.params",
];

fn float(v: f64) -> String {
    format!("{v:.16e}")
}

fn list<T>(items: impl IntoIterator<Item = T>, f: impl Fn(T) -> String) -> String {
    let parts: Vec<String> = items.into_iter().map(f).collect();
    format!("[{}]", parts.join(", "))
}

fn row_major(m: &DMatrix<f64>) -> String {
    list((0..m.nrows()).flat_map(|i| (0..m.ncols()).map(move |j| (i, j))), |(i, j)| float(m[(i, j)]))
}

fn write_smooth(out: &mut String, name: &str, h: &SmoothConvexFunction) {
    let _ = writeln!(out, "{name}.Q: {}", row_major(h.quad().matrix()));
    let _ = writeln!(out, "{name}.l: {}", list(h.linear().data().iter(), |v| float(*v)));
    let _ = writeln!(out, "{name}.const: {}", float(h.constant()));
    let _ = writeln!(out, "{name}.sigma_hat_mode: {}", h.majorizer_mode().name());
    let _ = writeln!(out, "{name}.sigma_mode: {}", h.minorizer_mode().name());
}

fn write_prox(out: &mut String, name: &str, p: &ProxFriendlyFunction) {
    let (kind, params): (&str, Vec<f64>) = match p {
        ProxFriendlyFunction::Zero { .. } => ("zero", vec![]),
        ProxFriendlyFunction::L1 { weight, .. } => ("l1", vec![*weight]),
        ProxFriendlyFunction::BoxIndicator { lo, hi } => ("box", lo.iter().chain(hi).copied().collect()),
    };
    let _ = writeln!(out, "{name}.kind: {kind}");
    let _ = writeln!(out, "{name}.params: {}", list(params, float));
}

/// Serializes `spec`; [`parse`] of the result gives back an equal spec.
pub fn to_string(spec: &ProblemSpec) -> String {
    let mut out = String::new();
    let dims = |s: &BlockStructure| list(s.dims().iter(), |d| d.to_string());
    let _ = writeln!(out, "x_blocks: {}", dims(spec.x_structure()));
    let _ = writeln!(out, "y_blocks: {}", dims(spec.y_structure()));
    let _ = writeln!(out, "z_dim: {}", spec.z_dim());
    let _ = writeln!(out, "A: {}", row_major(spec.a_adj()));
    let _ = writeln!(out, "B: {}", row_major(spec.b_adj()));
    let _ = writeln!(out, "c: {}", list(spec.c().iter(), |v| float(*v)));
    write_smooth(&mut out, "f", spec.f());
    write_smooth(&mut out, "g", spec.g());
    write_prox(&mut out, "p1", spec.p1());
    write_prox(&mut out, "q1", spec.q1());
    out
}

struct Fields {
    map: HashMap<String, (usize, String)>,
    last_line: usize,
}

fn perr(line: usize, field: &str, msg: impl Into<String>) -> Error {
    Error::Parse { line, field: field.to_string(), msg: msg.into() }
}

impl Fields {
    fn raw(&self, key: &str) -> Result<(usize, &str)> {
        self.map
            .get(key)
            .map(|(l, v)| (*l, v.as_str()))
            .ok_or_else(|| perr(self.last_line, key, "missing field"))
    }

    fn word(&self, key: &str) -> Result<(usize, &str)> {
        self.raw(key)
    }

    fn usize(&self, key: &str) -> Result<usize> {
        let (line, v) = self.raw(key)?;
        v.parse().map_err(|_| perr(line, key, format!("`{v}` is not a non-negative integer")))
    }

    fn f64(&self, key: &str) -> Result<f64> {
        let (line, v) = self.raw(key)?;
        parse_f64(v).ok_or_else(|| perr(line, key, format!("`{v}` is not a finite number")))
    }

    fn items(&self, key: &str) -> Result<(usize, Vec<&str>)> {
        let (line, v) = self.raw(key)?;
        let inner = v
            .strip_prefix('[')
            .and_then(|s| s.strip_suffix(']'))
            .ok_or_else(|| perr(line, key, "expected a list `[a, b, ...]`"))?;
        if inner.trim().is_empty() {
            return Ok((line, vec![]));
        }
        Ok((line, inner.split(',').map(str::trim).collect()))
    }

    fn usizes(&self, key: &str) -> Result<Vec<usize>> {
        let (line, items) = self.items(key)?;
        items
            .iter()
            .enumerate()
            .map(|(i, s)| {
                s.parse().map_err(|_| perr(line, key, format!("entry {i}: `{s}` is not a non-negative integer")))
            })
            .collect()
    }

    fn floats(&self, key: &str, expected: usize) -> Result<Vec<f64>> {
        let (line, items) = self.items(key)?;
        if items.len() != expected {
            return Err(perr(line, key, format!("expected {expected} entries, found {}", items.len())));
        }
        items
            .iter()
            .enumerate()
            .map(|(i, s)| parse_f64(s).ok_or_else(|| perr(line, key, format!("entry {i}: `{s}` is not a finite number"))))
            .collect()
    }

    fn matrix(&self, key: &str, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
        Ok(DMatrix::from_row_slice(rows, cols, &self.floats(key, rows * cols)?))
    }

    fn line(&self, key: &str) -> usize {
        self.map.get(key).map_or(self.last_line, |(l, _)| *l)
    }
}

fn parse_f64(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn split_lines(text: &str) -> Result<Fields> {
    let mut map = HashMap::new();
    let mut last_line = 0;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        last_line = line;
        let t = raw.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let (key, value) = t
            .split_once(':')
            .ok_or_else(|| perr(line, t, "expected `key: value`"))?;
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(perr(line, key, "unknown field"));
        }
        if let Some((first, _)) = map.insert(key.to_string(), (line, value.trim().to_string())) {
            return Err(perr(line, key, format!("duplicate field (first on line {first})")));
        }
    }
    Ok(Fields { map, last_line })
}

fn structure(fields: &Fields, key: &str) -> Result<BlockStructure> {
    let dims = fields.usizes(key)?;
    BlockStructure::new(dims).map_err(|e| perr(fields.line(key), key, e.to_string()))
}

fn smooth(fields: &Fields, name: &str, st: &BlockStructure) -> Result<SmoothConvexFunction> {
    let n = st.total_dim();
    let qk = format!("{name}.Q");
    let q = fields.matrix(&qk, n, n)?;
    let l = DVector::from_vec(fields.floats(&format!("{name}.l"), n)?);
    let constant = fields.f64(&format!("{name}.const"))?;
    let mk = format!("{name}.sigma_hat_mode");
    let (line, m) = fields.word(&mk)?;
    let major = match m {
        "tight" => MajorizerMode::Tight,
        "loose" => MajorizerMode::Loose,
        other => return Err(perr(line, &mk, format!("`{other}` is not tight | loose"))),
    };
    let nk = format!("{name}.sigma_mode");
    let (line, m) = fields.word(&nk)?;
    let minor = match m {
        "zero" => MinorizerMode::Zero,
        "mineig" => MinorizerMode::MinEig,
        other => return Err(perr(line, &nk, format!("`{other}` is not zero | mineig"))),
    };
    let quad = BlockOperator::symmetric(st.clone(), q).map_err(|e| perr(fields.line(&qk), &qk, e.to_string()))?;
    SmoothConvexFunction::new(quad, BlockVector::new(st.clone(), l)?, constant, major, minor)
        .map_err(|e| perr(fields.line(&qk), &qk, e.to_string()))
}

fn prox(fields: &Fields, name: &str, dim: usize) -> Result<ProxFriendlyFunction> {
    let kk = format!("{name}.kind");
    let pk = format!("{name}.params");
    let (line, kind) = fields.word(&kk)?;
    let built = match kind {
        "zero" => {
            fields.floats(&pk, 0)?;
            Ok(ProxFriendlyFunction::zero(dim))
        }
        "l1" => ProxFriendlyFunction::l1(dim, fields.floats(&pk, 1)?[0]),
        "box" => {
            let v = fields.floats(&pk, 2 * dim)?;
            ProxFriendlyFunction::box_indicator(v[..dim].to_vec(), v[dim..].to_vec())
        }
        other => return Err(perr(line, &kk, format!("`{other}` is not zero | l1 | box"))),
    };
    built.map_err(|e| perr(fields.line(&pk), &pk, e.to_string()))
}

/// Parses a problem file. Errors name the offending line and field.
pub fn parse(text: &str) -> Result<ProblemSpec> {
    let fields = split_lines(text)?;
    let xs = structure(&fields, "x_blocks")?;
    let ys = structure(&fields, "y_blocks")?;
    let nz = fields.usize("z_dim")?;
    let (nx, ny) = (xs.total_dim(), ys.total_dim());
    let a_adj = fields.matrix("A", nz, nx)?;
    let b_adj = fields.matrix("B", nz, ny)?;
    let c = DVector::from_vec(fields.floats("c", nz)?);
    let f = smooth(&fields, "f", &xs)?;
    let g = smooth(&fields, "g", &ys)?;
    let p1 = prox(&fields, "p1", xs.block_dim(0))?;
    let q1 = prox(&fields, "q1", ys.block_dim(0))?;
    ProblemSpec::new(xs, ys, nz, p1, q1, f, g, a_adj, b_adj, c)
        .map_err(|e| perr(fields.line("z_dim"), "z_dim", e.to_string()))
}

pub fn read(path: &std::path::Path) -> Result<ProblemSpec> {
    parse(&std::fs::read_to_string(path)?)
}

pub fn write(path: &std::path::Path, spec: &ProblemSpec) -> Result<()> {
    std::fs::write(path, to_string(spec))?;
    Ok(())
}
