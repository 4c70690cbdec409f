//! CPLEX-LP text export and a small grammar checker for the same format.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use thiserror::Error;

use super::model::{MilpModel, Sense};

const TERMS_PER_LINE: usize = 8;

/// Formats `v` rounded to 12 significant digits, in the shortest decimal
/// form that parses back to that rounded value.
pub fn fmt_coef(v: f64) -> String {
    let rounded: f64 = format!("{v:.11e}").parse().expect("formatted float parses");
    if rounded == 0.0 {
        return "0".to_string();
    }
    let mut s = format!("{rounded}");
    if s.contains('e') || s.len() > 24 {
        s = format!("{rounded:e}");
    }
    s
}

fn write_expr(out: &mut String, terms: impl IntoIterator<Item = (String, f64)>) {
    let mut first = true;
    for (count, (name, coef)) in terms.into_iter().enumerate() {
        if count > 0 && count % TERMS_PER_LINE == 0 {
            out.push_str("\n   ");
        }
        let sign = if coef < 0.0 { "-" } else { "+" };
        if first && coef >= 0.0 {
            let _ = write!(out, " {} {}", fmt_coef(coef), name);
        } else {
            let _ = write!(out, " {} {} {}", sign, fmt_coef(coef.abs()), name);
        }
        first = false;
    }
}

/// Renders `model` as CPLEX-LP text. Columns are named `x_i_j`, `y_i_j_k`,
/// `s_j`, `Ci_i` and `Cmax`; every binary is listed once under `Binaries`.
pub fn export_lp(model: &MilpModel) -> String {
    let names: Vec<String> = model.vars.iter().map(|v| v.name()).collect();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "\\ robosched makespan model: {} robots, {} tasks, big-M {}",
        model.n_robots,
        model.n_tasks,
        fmt_coef(model.big_m)
    );
    out.push_str("Minimize\n obj:");
    let obj_terms: Vec<(String, f64)> = model
        .objective
        .iter()
        .enumerate()
        .filter(|(_, &c)| c != 0.0)
        .map(|(col, &c)| (names[col].clone(), c))
        .collect();
    if obj_terms.is_empty() {
        out.push_str(" 0 Cmax");
    } else {
        write_expr(&mut out, obj_terms);
    }
    out.push_str("\nSubject To\n");
    for row in &model.rows {
        let _ = write!(out, " {}:", row.name);
        write_expr(&mut out, row.terms.iter().map(|&(c, a)| (names[c].clone(), a)));
        let rhs = if row.rhs < 0.0 { format!("-{}", fmt_coef(-row.rhs)) } else { fmt_coef(row.rhs) };
        let _ = writeln!(out, " {} {}", row.sense.symbol(), rhs);
    }
    out.push_str("Bounds\n");
    for (var, (name, b)) in model.vars.iter().zip(names.iter().zip(&model.bounds)) {
        if var.is_binary() {
            if b.upper == 0.0 {
                let _ = writeln!(out, " {name} = 0");
            }
            continue;
        }
        match (b.lower, b.upper.is_finite()) {
            (lo, true) => {
                let _ = writeln!(out, " {} <= {} <= {}", fmt_signed(lo), name, fmt_signed(b.upper));
            }
            (lo, false) => {
                let _ = writeln!(out, " {} >= {}", name, fmt_signed(lo));
            }
        }
    }
    out.push_str("Binaries\n");
    let binaries: Vec<&String> = model.vars.iter().zip(&names).filter(|(v, _)| v.is_binary()).map(|(_, n)| n).collect();
    for chunk in binaries.chunks(TERMS_PER_LINE) {
        out.push(' ');
        out.push_str(&chunk.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(" "));
        out.push('\n');
    }
    out.push_str("End\n");
    out
}

fn fmt_signed(v: f64) -> String {
    if v < 0.0 {
        format!("-{}", fmt_coef(-v))
    } else {
        fmt_coef(v)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LpParseError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("missing section `{0}`")]
    MissingSection(&'static str),
    #[error("variable `{0}` is used but never declared in Bounds or Binaries")]
    Undeclared(String),
    #[error("binary `{0}` is listed more than once")]
    DuplicateBinary(String),
    #[error("constraint name `{0}` is used more than once")]
    DuplicateRow(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedRow {
    pub name: String,
    pub terms: BTreeMap<String, f64>,
    pub sense: Sense,
    pub rhs: f64,
}

/// What the checker learned from an LP file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LpSummary {
    pub objective: BTreeMap<String, f64>,
    pub rows: Vec<ParsedRow>,
    pub bounded: BTreeSet<String>,
    pub binaries: BTreeSet<String>,
}

impl LpSummary {
    /// Every column that appears anywhere in the file.
    pub fn variables(&self) -> BTreeSet<String> {
        let mut all: BTreeSet<String> = self.objective.keys().cloned().collect();
        for r in &self.rows {
            all.extend(r.terms.keys().cloned());
        }
        all.extend(self.bounded.iter().cloned());
        all.extend(self.binaries.iter().cloned());
        all
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Preamble,
    Objective,
    Constraints,
    Bounds,
    Binaries,
    Generals,
    Done,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Colon,
    Cmp(Sense),
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || "_!\"#$%&()/,;?@'`{}|~".contains(c)
}

fn is_ident_char(c: char) -> bool {
    is_ident_start(c) || c.is_ascii_digit() || c == '.' || c == '[' || c == ']'
}

fn tokenize(text: &str, line: usize) -> Result<Vec<Tok>, LpParseError> {
    let err = |message: String| LpParseError::Syntax { line, message };
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut p = 0;
    while p < chars.len() {
        let c = chars[p];
        if c.is_whitespace() {
            p += 1;
        } else if c == '+' {
            out.push(Tok::Plus);
            p += 1;
        } else if c == '-' {
            out.push(Tok::Minus);
            p += 1;
        } else if c == ':' {
            out.push(Tok::Colon);
            p += 1;
        } else if c == '<' || c == '>' || c == '=' {
            let mut op = String::from(c);
            if p + 1 < chars.len() && "<>=".contains(chars[p + 1]) {
                op.push(chars[p + 1]);
                p += 1;
            }
            p += 1;
            let sense = match op.as_str() {
                "<" | "<=" | "=<" => Sense::Le,
                ">" | ">=" | "=>" => Sense::Ge,
                "=" => Sense::Eq,
                _ => return Err(err(format!("bad operator `{op}`"))),
            };
            out.push(Tok::Cmp(sense));
        } else if c.is_ascii_digit() || c == '.' {
            let begin = p;
            while p < chars.len() && (chars[p].is_ascii_digit() || chars[p] == '.') {
                p += 1;
            }
            if p < chars.len() && (chars[p] == 'e' || chars[p] == 'E') {
                let mut q = p + 1;
                if q < chars.len() && (chars[q] == '+' || chars[q] == '-') {
                    q += 1;
                }
                if q < chars.len() && chars[q].is_ascii_digit() {
                    p = q;
                    while p < chars.len() && chars[p].is_ascii_digit() {
                        p += 1;
                    }
                }
            }
            let s: String = chars[begin..p].iter().collect();
            let v: f64 = s.parse().map_err(|_| err(format!("bad number `{s}`")))?;
            out.push(Tok::Num(v));
        } else if is_ident_start(c) {
            let begin = p;
            while p < chars.len() && is_ident_char(chars[p]) {
                p += 1;
            }
            out.push(Tok::Ident(chars[begin..p].iter().collect()));
        } else {
            return Err(err(format!("unexpected character `{c}`")));
        }
    }
    Ok(out)
}

fn section_header(line: &str) -> Option<Section> {
    let l = line.trim().to_ascii_lowercase();
    let l = l.split_whitespace().collect::<Vec<_>>().join(" ");
    match l.as_str() {
        "minimize" | "minimum" | "min" | "maximize" | "maximum" | "max" => Some(Section::Objective),
        "subject to" | "such that" | "st" | "s.t." => Some(Section::Constraints),
        "bounds" | "bound" => Some(Section::Bounds),
        "binaries" | "binary" | "bin" => Some(Section::Binaries),
        "generals" | "general" | "gen" => Some(Section::Generals),
        "end" => Some(Section::Done),
        _ => None,
    }
}

/// Parses `name: expr` or `expr` (objective or constraint body). Returns the
/// name, linear terms, and the tokens after the expression.
fn parse_linear(toks: &[Tok], line: usize) -> Result<(Option<String>, BTreeMap<String, f64>, &[Tok]), LpParseError> {
    let err = |message: &str| LpParseError::Syntax { line, message: message.to_string() };
    let (name, mut rest) = match toks {
        [Tok::Ident(n), Tok::Colon, rest @ ..] => (Some(n.clone()), rest),
        _ => (None, toks),
    };
    let mut terms: BTreeMap<String, f64> = BTreeMap::new();
    let mut sign = 1.0;
    let mut coef: Option<f64> = None;
    let mut expect_term = true;
    while let Some(tok) = rest.first() {
        match tok {
            Tok::Plus | Tok::Minus => {
                if coef.is_some() {
                    return Err(err("sign after coefficient"));
                }
                if !expect_term && terms.is_empty() && sign == 1.0 {
                    // fallthrough
                }
                if matches!(tok, Tok::Minus) {
                    sign = -sign;
                }
                expect_term = true;
            }
            Tok::Num(v) => {
                if coef.is_some() || !expect_term {
                    break;
                }
                coef = Some(*v);
            }
            Tok::Ident(n) => {
                if !expect_term {
                    return Err(err("missing operator between terms"));
                }
                *terms.entry(n.clone()).or_insert(0.0) += sign * coef.unwrap_or(1.0);
                sign = 1.0;
                coef = None;
                expect_term = false;
            }
            Tok::Cmp(_) | Tok::Colon => break,
        }
        rest = &rest[1..];
    }
    if coef.is_some() {
        // trailing constant is not part of a linear expression
        return Err(err("constant term in expression"));
    }
    if terms.is_empty() {
        return Err(err("empty linear expression"));
    }
    Ok((name, terms, rest))
}

fn parse_signed_number(toks: &[Tok], line: usize) -> Result<f64, LpParseError> {
    let err = |message: &str| LpParseError::Syntax { line, message: message.to_string() };
    match toks {
        [Tok::Num(v)] | [Tok::Plus, Tok::Num(v)] => Ok(*v),
        [Tok::Minus, Tok::Num(v)] => Ok(-*v),
        [Tok::Ident(s)] | [Tok::Plus, Tok::Ident(s)] if s.eq_ignore_ascii_case("inf") || s.eq_ignore_ascii_case("infinity") => {
            Ok(f64::INFINITY)
        }
        [Tok::Minus, Tok::Ident(s)] if s.eq_ignore_ascii_case("inf") || s.eq_ignore_ascii_case("infinity") => Ok(f64::NEG_INFINITY),
        _ => Err(err("expected a number")),
    }
}

fn parse_bound(toks: &[Tok], line: usize) -> Result<String, LpParseError> {
    let err = |message: &str| LpParseError::Syntax { line, message: message.to_string() };
    // `x free`
    if let [Tok::Ident(v), Tok::Ident(kw)] = toks {
        if kw.eq_ignore_ascii_case("free") {
            return Ok(v.clone());
        }
    }
    let cmp_pos: Vec<usize> = toks.iter().enumerate().filter(|(_, t)| matches!(t, Tok::Cmp(_))).map(|(p, _)| p).collect();
    let var_at = |range: &[Tok]| -> Option<String> {
        match range {
            [Tok::Ident(v)] if !v.eq_ignore_ascii_case("inf") && !v.eq_ignore_ascii_case("infinity") => Some(v.clone()),
            _ => None,
        }
    };
    match cmp_pos.as_slice() {
        [c] => {
            let (lhs, rhs) = (&toks[..*c], &toks[c + 1..]);
            if let Some(v) = var_at(lhs) {
                parse_signed_number(rhs, line)?;
                Ok(v)
            } else if let Some(v) = var_at(rhs) {
                parse_signed_number(lhs, line)?;
                Ok(v)
            } else {
                Err(err("bound must relate one variable to a number"))
            }
        }
        [a, b] => {
            parse_signed_number(&toks[..*a], line)?;
            parse_signed_number(&toks[b + 1..], line)?;
            var_at(&toks[a + 1..*b]).ok_or_else(|| err("double bound needs a variable in the middle"))
        }
        _ => Err(err("malformed bound")),
    }
}

/// Checks `text` against the LP grammar used by [`export_lp`] and returns
/// the parsed objective, rows and declarations.
///
/// Beyond syntax, every column used in the objective or a constraint must be
/// declared under `Bounds` or `Binaries`, binaries must be unique and row
/// names must not repeat.
pub fn check_lp_text(text: &str) -> Result<LpSummary, LpParseError> {
    let mut summary = LpSummary::default();
    let mut section = Section::Preamble;
    let mut seen_sections = BTreeSet::new();
    let mut pending: Vec<Tok> = Vec::new();
    let mut pending_line = 0;
    let mut row_names = BTreeSet::new();

    let flush_constraint = |pending: &mut Vec<Tok>, line: usize, summary: &mut LpSummary, row_names: &mut BTreeSet<String>| -> Result<(), LpParseError> {
        if pending.is_empty() {
            return Ok(());
        }
        let (name, terms, rest) = parse_linear(pending, line)?;
        let (sense, rhs) = match rest {
            [Tok::Cmp(s), tail @ ..] => (*s, parse_signed_number(tail, line)?),
            _ => return Err(LpParseError::Syntax { line, message: "constraint without sense and right-hand side".into() }),
        };
        let name = name.unwrap_or_else(|| format!("R{}", summary.rows.len() + 1));
        if !row_names.insert(name.clone()) {
            return Err(LpParseError::DuplicateRow(name));
        }
        summary.rows.push(ParsedRow { name, terms, sense, rhs });
        pending.clear();
        Ok(())
    };

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('\\').next().unwrap_or("");
        if content.trim().is_empty() {
            continue;
        }
        if let Some(next) = section_header(content) {
            if section == Section::Objective {
                let (_, terms, rest) = parse_linear(&pending, pending_line)?;
                if !rest.is_empty() {
                    return Err(LpParseError::Syntax { line: pending_line, message: "trailing tokens in objective".into() });
                }
                summary.objective = terms;
                pending.clear();
            } else if section == Section::Constraints {
                flush_constraint(&mut pending, pending_line, &mut summary, &mut row_names)?;
            }
            section = next;
            seen_sections.insert(format!("{next:?}"));
            continue;
        }
        let toks = tokenize(content, line)?;
        match section {
            Section::Preamble | Section::Done => {
                return Err(LpParseError::Syntax { line, message: "content outside of a section".into() });
            }
            Section::Objective => {
                if pending.is_empty() {
                    pending_line = line;
                }
                pending.extend(toks);
            }
            Section::Constraints => {
                // a new row starts with `name:`; a completed row ends in a number
                let starts_named = matches!(toks.as_slice(), [Tok::Ident(_), Tok::Colon, ..]);
                let pending_complete = pending.iter().any(|t| matches!(t, Tok::Cmp(_)))
                    && matches!(pending.last(), Some(Tok::Num(_)) | Some(Tok::Ident(_)));
                if starts_named || pending_complete {
                    flush_constraint(&mut pending, pending_line, &mut summary, &mut row_names)?;
                }
                if pending.is_empty() {
                    pending_line = line;
                }
                pending.extend(toks);
            }
            Section::Bounds => {
                summary.bounded.insert(parse_bound(&toks, line)?);
            }
            Section::Binaries | Section::Generals => {
                for t in toks {
                    match t {
                        Tok::Ident(v) => {
                            if section == Section::Binaries && !summary.binaries.insert(v.clone()) {
                                return Err(LpParseError::DuplicateBinary(v));
                            }
                            if section == Section::Generals {
                                summary.bounded.insert(v);
                            }
                        }
                        _ => return Err(LpParseError::Syntax { line, message: "expected variable names".into() }),
                    }
                }
            }
        }
    }
    if section == Section::Constraints {
        flush_constraint(&mut pending, pending_line, &mut summary, &mut row_names)?;
    }
    for (key, name) in [("Objective", "Minimize"), ("Constraints", "Subject To"), ("Done", "End")] {
        if !seen_sections.contains(key) {
            return Err(LpParseError::MissingSection(name));
        }
    }
    let declared: BTreeSet<&String> = summary.bounded.iter().chain(&summary.binaries).collect();
    for v in summary.objective.keys().chain(summary.rows.iter().flat_map(|r| r.terms.keys())) {
        if !declared.contains(v) {
            return Err(LpParseError::Undeclared(v.clone()));
        }
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::build_model;
    use crate::model::{validate_instance, CostParams, ObjectiveWeights, RobotProfile, Task, ValidateOptions};

    fn one_task() -> MilpModel {
        let inst = validate_instance(
            vec![Task::new("a", 2.0)],
            vec![RobotProfile::new("r", Vec::<String>::new())],
            None,
            CostParams::default(),
            ObjectiveWeights { alpha: 1.0, beta: 0.0, lambda: 0.0 },
            ValidateOptions::default(),
        )
        .unwrap();
        build_model(&inst)
    }

    #[test]
    fn coefficient_formatting() {
        assert_eq!(fmt_coef(1.0), "1");
        assert_eq!(fmt_coef(0.001), "0.001");
        assert_eq!(fmt_coef(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_coef(123456789.123456789), "123456789.123");
        assert_eq!(fmt_coef(1e-30), "1e-30");
    }

    #[test]
    fn smallest_model_text() {
        let text = export_lp(&one_task());
        assert!(text.contains("Minimize\n obj: 1 Cmax\n"), "{text}");
        assert!(text.contains(" assign_0: 1 x_0_0 = 1\n"));
        assert!(text.contains(" mksp_0: - 1 s_0 + 1 Cmax >= 2\n"));
        let summary = check_lp_text(&text).unwrap();
        assert_eq!(summary.binaries.len(), 1);
        assert_eq!(summary.rows.len(), 3);
    }

    #[test]
    fn rejects_broken_text() {
        let good = export_lp(&one_task());
        assert!(matches!(check_lp_text(&good.replace("End\n", "")), Err(LpParseError::MissingSection("End"))));
        let dup = good.replace("Binaries\n x_0_0\n", "Binaries\n x_0_0 x_0_0\n");
        assert_eq!(check_lp_text(&dup), Err(LpParseError::DuplicateBinary("x_0_0".into())));
        let undeclared = good.replace(" Cmax >= 0\n", "");
        assert_eq!(check_lp_text(&undeclared), Err(LpParseError::Undeclared("Cmax".into())));
        assert!(check_lp_text(&good.replace(">= 2", ">= 2 3")).is_err());
        assert!(check_lp_text(&good.replace("Subject To", "Subject Tx")).is_err());
    }

    #[test]
    fn multi_line_rows_parse() {
        let text = "Minimize\n obj: x + 2 y\nSubject To\n c1: x\n   + y >= 1\n c2: x - y\n <= 4\nBounds\n x >= 0\n 0 <= y <= 3\nEnd\n";
        let s = check_lp_text(text).unwrap();
        assert_eq!(s.rows.len(), 2);
        assert_eq!(s.rows[1].terms["y"], -1.0);
        assert_eq!(s.rows[1].rhs, 4.0);
    }
}
