//! LP and MPS writers and parsers.

mod lp;
mod mps;

pub use lp::{parse_lp, write_lp};
pub use mps::{parse_mps, write_mps, write_mps_named};

use std::path::Path;

use thiserror::Error;

use crate::mip::{Constraint, ModelError, MipModel, Sense, VarKind};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("line {line}: {message}")]
    Grammar { line: usize, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

pub(crate) fn grammar(line: usize, message: impl Into<String>) -> FormatError {
    FormatError::Grammar { line, message: message.into() }
}

/// Shortest round-trip decimal; exponent form for very large or small magnitudes.
pub fn fmt_num(x: f64) -> String {
    if x == f64::INFINITY {
        return "+inf".into();
    }
    if x == f64::NEG_INFINITY {
        return "-inf".into();
    }
    let a = x.abs();
    if x == 0.0 {
        "0".into()
    } else if a >= 1e16 || a < 1e-5 {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

/// Map a name onto `[A-Za-z0-9_]`, prefixing `_` when it would read as a number.
pub fn sanitize(name: &str) -> String {
    let mut s: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
        .collect();
    if s.is_empty() || s.starts_with(|c: char| c.is_ascii_digit()) || s.parse::<f64>().is_ok() {
        s.insert(0, '_');
    }
    s
}

pub(crate) fn parse_num(tok: &str, line: usize) -> Result<f64, FormatError> {
    tok.parse::<f64>()
        .map_err(|_| grammar(line, format!("expected a number, found `{tok}`")))
}

/// Write `model` to `path`, choosing the dialect from the extension (`.mps` or LP).
pub fn write_model_file(model: &MipModel, path: impl AsRef<Path>) -> Result<(), FormatError> {
    let path = path.as_ref();
    let text = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("mps")) {
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("model");
        write_mps_named(model, stem)
    } else {
        write_lp(model)
    };
    std::fs::write(path, text)?;
    Ok(())
}

/// Read a model file, choosing the dialect from the extension.
pub fn read_model_file(path: impl AsRef<Path>) -> Result<MipModel, FormatError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("mps")) {
        parse_mps(&text)
    } else {
        parse_lp(&text)
    }
}

/// Partially parsed constraint shared by both parsers.
pub(crate) struct PendingCons {
    pub line: usize,
    pub cons: Constraint,
}

pub(crate) fn add_pending(model: &mut MipModel, pending: Vec<PendingCons>) -> Result<(), FormatError> {
    for p in pending {
        model.add_constraint(p.cons).map_err(|e| grammar(p.line, e.to_string()))?;
    }
    Ok(())
}

pub(crate) fn kind_of(binary: bool, integer: bool) -> VarKind {
    if binary {
        VarKind::Binary
    } else if integer {
        VarKind::Integer
    } else {
        VarKind::Continuous
    }
}

pub(crate) fn sense_of(tok: &str) -> Option<Sense> {
    match tok {
        "<=" | "=<" | "<" => Some(Sense::Le),
        ">=" | "=>" | ">" => Some(Sense::Ge),
        "=" => Some(Sense::Eq),
        _ => None,
    }
}

pub(crate) fn var_names(model: &MipModel) -> Vec<String> {
    model.vars().iter().map(|v| sanitize(&v.name)).collect()
}
