//! LP file format: writer and a reader for the subset the writer emits.

use std::fmt::Write as _;

use thiserror::Error;

use crate::fixed::Fixed;
use crate::model::{ModelError, ModelIr, Sense, VarKind};

pub const MAX_NAME_LEN: usize = 255;
const SIGNIFICANT_DIGITS: u32 = 12;
const TERMS_PER_LINE: usize = 6;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LpError {
    #[error("name `{0}...` exceeds {MAX_NAME_LEN} characters")]
    NameTooLong(String),
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Rounds to 12 significant digits and prints as a plain decimal.
pub fn render_number(value: Fixed) -> String {
    let raw = value.raw();
    let magnitude = raw.unsigned_abs();
    let digits = if magnitude == 0 { 1 } else { magnitude.ilog10() + 1 };
    if digits <= SIGNIFICANT_DIGITS {
        return value.to_string();
    }
    let unit = 10u128.pow(digits - SIGNIFICANT_DIGITS);
    let rounded = (magnitude + unit / 2) / unit * unit;
    let signed = if raw < 0 { -(rounded as i128) } else { rounded as i128 };
    Fixed::from_raw(signed).to_string()
}

fn check_name(name: &str) -> Result<(), LpError> {
    if name.len() > MAX_NAME_LEN {
        Err(LpError::NameTooLong(name.chars().take(32).collect()))
    } else {
        Ok(())
    }
}

fn write_expression(out: &mut String, model: &ModelIr, terms: &[(Fixed, usize)]) {
    if terms.is_empty() {
        out.push_str(" 0");
        return;
    }
    for (i, &(c, v)) in terms.iter().enumerate() {
        if i > 0 && i % TERMS_PER_LINE == 0 {
            out.push_str("\n   ");
        }
        let sign = if c.is_negative() { '-' } else { '+' };
        let abs = c.abs();
        let name = &model.variables()[v].name;
        if abs == Fixed::ONE {
            let _ = write!(out, " {sign} {name}");
        } else {
            let _ = write!(out, " {sign} {} {name}", render_number(abs));
        }
    }
}

/// Emits the model. Output depends only on the model, so equal models give
/// byte-identical files.
pub fn write_lp(model: &ModelIr) -> Result<String, LpError> {
    for v in model.variables() {
        check_name(&v.name)?;
    }
    for c in model.constraints() {
        check_name(&c.tag)?;
    }
    let mut out = String::from("Maximize\n obj:");
    write_expression(&mut out, model, model.objective());
    out.push_str("\nSubject To\n");
    for row in model.constraints() {
        let _ = write!(out, " {}:", row.tag);
        write_expression(&mut out, model, &row.terms);
        let _ = writeln!(out, " {} {}", row.sense, render_number(row.rhs));
    }
    out.push_str("Bounds\n");
    for v in model.variables().iter().filter(|v| v.kind == VarKind::Continuous) {
        let _ = match (v.lower, v.upper) {
            (None, None) => writeln!(out, " {} free", v.name),
            (Some(l), None) => writeln!(out, " {} >= {}", v.name, render_number(l)),
            (None, Some(u)) => writeln!(out, " -inf <= {} <= {}", v.name, render_number(u)),
            (Some(l), Some(u)) => {
                writeln!(out, " {} <= {} <= {}", render_number(l), v.name, render_number(u))
            }
        };
    }
    let binaries: Vec<&str> = model.binaries().map(|v| v.name.as_str()).collect();
    if !binaries.is_empty() {
        out.push_str("Binaries\n");
        for name in binaries {
            let _ = writeln!(out, " {name}");
        }
    }
    out.push_str("End\n");
    Ok(out)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    Start,
    Objective,
    Rows,
    Bounds,
    Binaries,
    End,
}

fn section_of(line: &str) -> Option<Section> {
    match line.to_ascii_lowercase().as_str() {
        "maximize" | "maximise" | "max" => Some(Section::Objective),
        "subject to" | "such that" | "st" | "s.t." => Some(Section::Rows),
        "bounds" | "bound" => Some(Section::Bounds),
        "binaries" | "binary" | "bin" => Some(Section::Binaries),
        "end" => Some(Section::End),
        _ => None,
    }
}

fn is_number(token: &str) -> bool {
    token.parse::<Fixed>().is_ok()
}

struct Reader {
    model: ModelIr,
    line: usize,
}

impl Reader {
    fn syntax(&self, message: impl Into<String>) -> LpError {
        LpError::Syntax {
            line: self.line,
            message: message.into(),
        }
    }

    fn var(&mut self, name: &str) -> usize {
        self.model.ensure_var(name, VarKind::Continuous, Some(Fixed::ZERO), None)
    }

    fn number(&self, token: &str) -> Result<Fixed, LpError> {
        match token.to_ascii_lowercase().as_str() {
            "inf" | "+inf" | "infinity" | "+infinity" | "-inf" | "-infinity" => {
                Err(self.syntax("infinite value where a number is required"))
            }
            _ => token.parse().map_err(|_| self.syntax(format!("bad number `{token}`"))),
        }
    }

    /// Parses `[+|-] [coef] name ...`.
    fn expression(&mut self, tokens: &[&str]) -> Result<Vec<(Fixed, usize)>, LpError> {
        let mut terms = Vec::new();
        let mut sign = Fixed::ONE;
        let mut coef: Option<Fixed> = None;
        for &tok in tokens {
            match tok {
                "+" => {}
                "-" => sign = -sign,
                _ if is_number(tok) => {
                    if coef.is_some() {
                        return Err(self.syntax("two coefficients in a row"));
                    }
                    coef = Some(self.number(tok)?);
                }
                _ => {
                    let c = coef.take().unwrap_or(Fixed::ONE);
                    let c = if sign.is_negative() { -c } else { c };
                    let v = self.var(tok);
                    terms.push((c, v));
                    sign = Fixed::ONE;
                }
            }
        }
        if let Some(c) = coef {
            if !c.is_zero() {
                return Err(self.syntax("constant term in expression"));
            }
        }
        Ok(terms)
    }

    fn bound(&mut self, tokens: &[&str]) -> Result<(), LpError> {
        let set = |r: &mut Reader, name: &str, lower: Option<Option<Fixed>>, upper: Option<Option<Fixed>>| {
            let id = r.var(name);
            let (l, u) = r.model.bounds(id);
            r.model.set_bounds(id, lower.unwrap_or(l), upper.unwrap_or(u));
        };
        let bound_value = |r: &Reader, tok: &str| -> Result<Option<Fixed>, LpError> {
            match tok.to_ascii_lowercase().as_str() {
                "-inf" | "-infinity" | "+inf" | "inf" | "infinity" | "+infinity" => Ok(None),
                _ => r.number(tok).map(Some),
            }
        };
        match tokens {
            [name, free] if free.eq_ignore_ascii_case("free") => {
                set(self, name, Some(None), Some(None));
            }
            [lo, "<=", name, "<=", hi] => {
                let (l, u) = (bound_value(self, lo)?, bound_value(self, hi)?);
                set(self, name, Some(l), Some(u));
            }
            [name, op, value] if !is_number(name) => {
                let v = bound_value(self, value)?;
                match *op {
                    ">=" => set(self, name, Some(v), None),
                    "<=" => set(self, name, None, Some(v)),
                    "=" => set(self, name, Some(v), Some(v)),
                    _ => return Err(self.syntax(format!("bad bound operator `{op}`"))),
                }
            }
            [value, op, name] => {
                let v = bound_value(self, value)?;
                match *op {
                    "<=" => set(self, name, Some(v), None),
                    ">=" => set(self, name, None, Some(v)),
                    "=" => set(self, name, Some(v), Some(v)),
                    _ => return Err(self.syntax(format!("bad bound operator `{op}`"))),
                }
            }
            _ => return Err(self.syntax("unrecognized bound")),
        }
        Ok(())
    }
}

/// Splits on whitespace and around operators so `x>=1` and `x >= 1` agree.
fn tokenize(text: &str) -> Vec<String> {
    let mut spaced = String::with_capacity(text.len() * 2);
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let two: String = chars[i..chars.len().min(i + 2)].iter().collect();
        if two == "<=" || two == ">=" || two == "=<" || two == "=>" {
            let op = if two.starts_with('<') || two.ends_with('<') { "<=" } else { ">=" };
            spaced.push_str(&format!(" {op} "));
            i += 2;
            continue;
        }
        // A sign directly after an exponent marker belongs to the number.
        let in_exponent = i > 0
            && matches!(chars[i - 1], 'e' | 'E')
            && i >= 2
            && (chars[i - 2].is_ascii_digit() || chars[i - 2] == '.');
        match c {
            '+' | '-' if !in_exponent => {
                spaced.push(' ');
                spaced.push(c);
                spaced.push(' ');
            }
            '=' | '<' | '>' => {
                let op = match c {
                    '<' => "<=",
                    '>' => ">=",
                    _ => "=",
                };
                spaced.push_str(&format!(" {op} "));
            }
            _ => spaced.push(c),
        }
        i += 1;
    }
    spaced.split_whitespace().map(str::to_string).collect()
}

/// Folds a sign into the number or infinity that follows it when the sign
/// opens the line or follows an operator.
fn join_signs(tokens: Vec<String>) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for t in tokens {
        let lower = t.to_ascii_lowercase();
        let numeric = is_number(&t) || lower == "inf" || lower == "infinity";
        let signed = out.last().is_some_and(|p| p == "-" || p == "+")
            && (out.len() == 1 || matches!(out[out.len() - 2].as_str(), "<=" | ">=" | "="));
        if numeric && signed {
            let sign = out.pop().unwrap();
            out.push(format!("{sign}{t}"));
        } else {
            out.push(t);
        }
    }
    out
}

/// Reads a maximization LP file as written by [`write_lp`] (and the common
/// variants of its keywords). Undeclared-bound variables default to `[0, +inf)`.
pub fn read_lp(text: &str) -> Result<ModelIr, LpError> {
    let mut reader = Reader {
        model: ModelIr::new(),
        line: 0,
    };
    let mut section = Section::Start;
    // Rows may span lines; gather each statement before parsing.
    let mut pending: Vec<String> = Vec::new();
    let mut pending_line = 0;
    let mut statements: Vec<(Section, usize, Vec<String>)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('\\').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(next) = section_of(line) {
            if !pending.is_empty() {
                statements.push((section, pending_line, std::mem::take(&mut pending)));
            }
            section = next;
            continue;
        }
        if line.to_ascii_lowercase().starts_with("minimi") {
            return Err(LpError::Syntax {
                line: idx + 1,
                message: "only maximization models are supported".into(),
            });
        }
        let starts_statement = match section {
            Section::Rows | Section::Objective => line.contains(':'),
            _ => true,
        };
        if starts_statement && !pending.is_empty() {
            statements.push((section, pending_line, std::mem::take(&mut pending)));
        }
        if pending.is_empty() {
            pending_line = idx + 1;
        }
        pending.push(line.to_string());
    }
    if !pending.is_empty() {
        statements.push((section, pending_line, pending));
    }
    let mut objective = Vec::new();
    for (sec, line, parts) in statements {
        reader.line = line;
        let text = parts.join(" ");
        match sec {
            Section::Start | Section::End => return Err(reader.syntax("content outside a section")),
            Section::Objective => {
                let body = text.split_once(':').map_or(text.as_str(), |(_, b)| b);
                let tokens = tokenize(body);
                let refs: Vec<&str> = tokens.iter().map(String::as_str).collect();
                objective.extend(reader.expression(&refs)?);
            }
            Section::Rows => {
                let (tag, body) = text
                    .split_once(':')
                    .ok_or_else(|| reader.syntax("row without a name"))?;
                let tokens = tokenize(body);
                let pos = tokens
                    .iter()
                    .position(|t| t == "<=" || t == ">=" || t == "=")
                    .ok_or_else(|| reader.syntax("row without a comparison"))?;
                let sense = match tokens[pos].as_str() {
                    "<=" => Sense::Le,
                    ">=" => Sense::Ge,
                    _ => Sense::Eq,
                };
                let rhs_tokens = &tokens[pos + 1..];
                let rhs = match rhs_tokens {
                    [v] => reader.number(v)?,
                    [s, v] if s == "-" => -reader.number(v)?,
                    [s, v] if s == "+" => reader.number(v)?,
                    _ => return Err(reader.syntax("right-hand side must be a single number")),
                };
                let refs: Vec<&str> = tokens[..pos].iter().map(String::as_str).collect();
                let terms = reader.expression(&refs)?;
                reader.model.add_constraint(tag.trim(), terms, sense, rhs)?;
            }
            Section::Bounds => {
                for part in parts {
                    let tokens = join_signs(tokenize(&part));
                    let refs: Vec<&str> = tokens.iter().map(String::as_str).collect();
                    reader.bound(&refs)?;
                }
            }
            Section::Binaries => {
                for name in text.split_whitespace() {
                    let id = reader.var(name);
                    reader.model.set_binary(id);
                }
            }
        }
    }
    reader.model.add_objective_terms(objective);
    Ok(reader.model)
}
