//! Line-oriented dump format for reproducing solver failures.
//!
//! ```text
//! maximize 1 1
//! 1 1 <= 1
//! 1 0 >= 0.25
//! ```
//!
//! Numbers use Rust's shortest round-trip formatting, so a dump parses
//! back to a bit-identical program.

use super::{LinearProgram, Relation, Sense};
use crate::error::{param, Result};

pub(super) fn render(lp: &LinearProgram) -> String {
    let mut out = String::new();
    out.push_str(match lp.sense {
        Sense::Maximize => "maximize",
        Sense::Minimize => "minimize",
    });
    for c in &lp.objective {
        out.push(' ');
        out.push_str(&c.to_string());
    }
    out.push('\n');
    for row in &lp.rows {
        let coeffs: Vec<String> = row.coeffs.iter().map(f64::to_string).collect();
        out.push_str(&coeffs.join(" "));
        out.push(' ');
        out.push_str(row.relation.symbol());
        out.push(' ');
        out.push_str(&row.rhs.to_string());
        out.push('\n');
    }
    out
}

pub(super) fn parse(src: &str) -> Result<LinearProgram> {
    let mut lines = src.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
    let head = lines.next().ok_or_else(|| param("empty LP dump"))?;
    let mut tokens = head.split_whitespace();
    let sense = match tokens.next() {
        Some("maximize") => Sense::Maximize,
        Some("minimize") => Sense::Minimize,
        other => return Err(param(format!("expected maximize/minimize, found {other:?}"))),
    };
    let objective = tokens.map(number).collect::<Result<Vec<_>>>()?;
    let mut lp = LinearProgram::new(sense, objective);
    for line in lines {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let pos = tokens
            .iter()
            .position(|t| matches!(*t, "<=" | ">=" | "="))
            .ok_or_else(|| param(format!("row without relation: {line}")))?;
        let relation = match tokens[pos] {
            "<=" => Relation::Le,
            ">=" => Relation::Ge,
            _ => Relation::Eq,
        };
        if pos + 2 != tokens.len() {
            return Err(param(format!("malformed row: {line}")));
        }
        let coeffs = tokens[..pos].iter().copied().map(number).collect::<Result<Vec<_>>>()?;
        lp.add_row(coeffs, relation, number(tokens[pos + 1])?);
    }
    lp.validate()?;
    Ok(lp)
}

fn number(tok: &str) -> Result<f64> {
    tok.parse::<f64>()
        .map_err(|_| param(format!("not a number: {tok}")))
}
