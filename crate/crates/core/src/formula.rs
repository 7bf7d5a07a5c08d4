//! Model formula parsing.
//!
//! A formula names the response block and the predictor block of a fit:
//!
//! ```text
//! y1 + y2 + y3 ~ x1 + x2
//! ```
//!
//! Left of `~` are responses, right are predictors, joined by `+`. Names
//! match `[A-Za-z_][A-Za-z0-9_.]*`. No other operators are supported —
//! interactions, transforms, and intercept suppression are rejected with the
//! offending token and its byte offset. Response order is preserved; under
//! the logit link the *last* response is the reference category.

use crate::error::{Error, Result};
use crate::ingest::{ColumnData, DataTable};
use serde::{Deserialize, Serialize};

/// A parsed formula: ordered response and predictor names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormulaSpec {
    pub responses: Vec<String>,
    pub predictors: Vec<String>,
}

/// A formula resolved against a concrete table: column indices per side.
#[derive(Debug, Clone)]
pub struct BoundFormula {
    pub spec: FormulaSpec,
    pub response_cols: Vec<usize>,
    pub predictor_cols: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Tilde,
    Plus,
    Name(String),
}

fn is_name_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '.'
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>> {
    let mut toks = Vec::new();
    let mut it = text.char_indices().peekable();
    while let Some(&(off, c)) = it.peek() {
        if c.is_whitespace() {
            it.next();
        } else if c == '~' {
            it.next();
            toks.push((Tok::Tilde, off));
        } else if c == '+' {
            it.next();
            toks.push((Tok::Plus, off));
        } else if is_name_start(c) {
            let mut name = String::new();
            while let Some(&(noff, nc)) = it.peek() {
                if is_name_char(nc) {
                    name.push(nc);
                    it.next();
                } else if nc.is_whitespace() || nc == '~' || nc == '+' {
                    break;
                } else {
                    return Err(Error::InvalidIdentifier {
                        token: nc.to_string(),
                        offset: noff,
                    });
                }
            }
            toks.push((Tok::Name(name), off));
        } else {
            return Err(Error::InvalidIdentifier {
                token: c.to_string(),
                offset: off,
            });
        }
    }
    Ok(toks)
}

/// Parse a side of the formula: `name (+ name)*`, duplicates rejected.
fn parse_side(toks: &[(Tok, usize)], side: &'static str) -> Result<Vec<String>> {
    if toks.is_empty() {
        return Err(Error::EmptySide { side });
    }
    let mut names: Vec<String> = Vec::new();
    let mut want_name = true;
    for (tok, off) in toks {
        match (tok, want_name) {
            (Tok::Name(n), true) => {
                if names.iter().any(|x| x == n) {
                    return Err(Error::DuplicateName {
                        name: n.clone(),
                        side,
                        offset: *off,
                    });
                }
                names.push(n.clone());
                want_name = false;
            }
            (Tok::Plus, false) => want_name = true,
            (Tok::Name(n), false) => {
                return Err(Error::InvalidIdentifier {
                    token: n.clone(),
                    offset: *off,
                })
            }
            (Tok::Plus, true) => {
                return Err(Error::InvalidIdentifier {
                    token: "+".into(),
                    offset: *off,
                })
            }
            (Tok::Tilde, _) => unreachable!("tilde removed by split"),
        }
    }
    if want_name {
        // trailing '+'
        let (_, off) = toks.last().unwrap();
        return Err(Error::InvalidIdentifier {
            token: "+".into(),
            offset: *off,
        });
    }
    Ok(names)
}

/// Parse a formula string into a [`FormulaSpec`].
pub fn parse_formula(text: &str) -> Result<FormulaSpec> {
    let toks = tokenize(text)?;
    let tilde_count = toks.iter().filter(|(t, _)| *t == Tok::Tilde).count();
    if tilde_count != 1 {
        return Err(Error::MissingTilde { count: tilde_count });
    }
    let split = toks.iter().position(|(t, _)| *t == Tok::Tilde).unwrap();
    let responses = parse_side(&toks[..split], "response")?;
    let predictors = parse_side(&toks[split + 1..], "predictor")?;
    Ok(FormulaSpec {
        responses,
        predictors,
    })
}

/// Render a spec back to canonical text: single spaces, `+` separators.
pub fn render(spec: &FormulaSpec) -> String {
    format!(
        "{} ~ {}",
        spec.responses.join(" + "),
        spec.predictors.join(" + ")
    )
}

fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for i in 1..=a.len() {
        cur[0] = i;
        for j in 1..=b.len() {
            let cost = if a[i - 1] == b[j - 1] { 0 } else { 1 };
            cur[j] = (prev[j] + 1).min(cur[j - 1] + 1).min(prev[j - 1] + cost);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

fn resolve(name: &str, table: &DataTable) -> Result<usize> {
    if let Some(ix) = table.names.iter().position(|n| n == name) {
        return Ok(ix);
    }
    let suggestion = table
        .names
        .iter()
        .min_by_key(|n| levenshtein(name, n))
        .cloned();
    Err(Error::UnknownColumn {
        name: name.to_string(),
        suggestion,
    })
}

/// Resolve every formula name against the table's header.
pub fn validate_against_table(spec: &FormulaSpec, table: &DataTable) -> Result<BoundFormula> {
    let response_cols = spec
        .responses
        .iter()
        .map(|n| resolve(n, table))
        .collect::<Result<Vec<_>>>()?;
    let predictor_cols = spec
        .predictors
        .iter()
        .map(|n| resolve(n, table))
        .collect::<Result<Vec<_>>>()?;
    Ok(BoundFormula {
        spec: spec.clone(),
        response_cols,
        predictor_cols,
    })
}

/// Column kind as seen by the binding (handy for callers that branch on it).
pub fn column_kind(table: &DataTable, col: usize) -> &'static str {
    match table.columns[col] {
        ColumnData::Numeric(_) => "numeric",
        ColumnData::Categorical(_) => "categorical",
    }
}
