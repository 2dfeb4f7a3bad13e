//! Reader and writer for a subset of the CPLEX LP text format.
//!
//! Supported sections: `Minimize`/`Maximize`, `Subject To`, `Bounds`,
//! `Generals`, `Binaries` and `End`. Section keywords are only recognized
//! as the first token on a line. Quadratic terms, SOS sections,
//! semi-continuous declarations and indicator constraints are rejected with
//! [`LpFormatError::Unsupported`].
//!
//! Numbers are written with the shortest decimal representation that parses
//! back to the identical `f64`, so `read(write(p)) == p` holds exactly. The
//! writer lists every variable in the objective (zero coefficients included)
//! so that variable order survives the round trip, and declares every bound
//! explicitly.
//!
//! ```text
//! \ Problem: knapsack
//! Maximize
//!  obj: 5 x0 + 4 x1
//! Subject To
//!  c0: 6 x0 + 4 x1 <= 9
//! Bounds
//!  0 <= x0 <= 1
//!  0 <= x1 <= 1
//! Generals
//!  x0 x1
//! End
//! ```

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::problem::{Constraint, Problem, Relation};

#[derive(Debug, Error)]
pub enum LpFormatError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("unsupported LP feature at line {line}, column {column}: {feature}")]
    Unsupported { line: usize, column: usize, feature: String },
    #[error("refusing to write invalid problem: {0}")]
    InvalidProblem(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

const TERMS_PER_LINE: usize = 8;

/// Formats `v` so that `v.to_string().parse::<f64>() == v` bit for bit.
pub fn format_number(v: f64) -> String {
    if v == f64::INFINITY {
        return "+inf".into();
    }
    if v == f64::NEG_INFINITY {
        return "-inf".into();
    }
    let a = v.abs();
    if a == 0.0 || (1e-5..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn write_linear(out: &mut String, terms: impl Iterator<Item = (f64, String)>) {
    for (k, (coef, name)) in terms.enumerate() {
        if k > 0 && k % TERMS_PER_LINE == 0 {
            out.push_str("\n   ");
        }
        let sign = if coef.is_sign_negative() { "-" } else { "+" };
        if k == 0 {
            if coef.is_sign_negative() {
                out.push_str(" -");
            }
        } else {
            let _ = write!(out, " {sign}");
        }
        let _ = write!(out, " {} {}", format_number(coef.abs()), name);
    }
}

pub fn write_lp_string(problem: &Problem) -> Result<String, LpFormatError> {
    let report = problem.validate();
    if !report.is_ok() {
        return Err(LpFormatError::InvalidProblem(report.to_string()));
    }
    let mut out = String::new();
    let _ = writeln!(out, "\\ Problem: {}", problem.name);
    out.push_str(if problem.maximize { "Maximize\n" } else { "Minimize\n" });
    out.push_str(" obj:");
    let sense = if problem.maximize { -1.0 } else { 1.0 };
    write_linear(
        &mut out,
        problem.objective.iter().zip(&problem.var_names).map(|(&c, n)| (sense * c, n.clone())),
    );
    out.push('\n');

    out.push_str("Subject To\n");
    for con in &problem.constraints {
        let _ = write!(out, " {}:", con.name);
        write_linear(&mut out, con.coeffs.iter().map(|&(j, a)| (a, problem.var_names[j].clone())));
        let _ = writeln!(out, " {} {}", con.relation.symbol(), format_number(con.rhs));
    }

    out.push_str("Bounds\n");
    for (j, name) in problem.var_names.iter().enumerate() {
        let (lo, up) = (problem.var_lower[j], problem.var_upper[j]);
        if lo == f64::NEG_INFINITY && up == f64::INFINITY {
            let _ = writeln!(out, " {name} free");
        } else {
            let _ = writeln!(out, " {} <= {} <= {}", format_number(lo), name, format_number(up));
        }
    }

    let integers: Vec<&str> = problem
        .var_names
        .iter()
        .zip(&problem.is_integer)
        .filter(|(_, &int)| int)
        .map(|(n, _)| n.as_str())
        .collect();
    if !integers.is_empty() {
        out.push_str("Generals\n");
        for chunk in integers.chunks(TERMS_PER_LINE * 2) {
            let _ = writeln!(out, " {}", chunk.join(" "));
        }
    }
    out.push_str("End\n");
    Ok(out)
}

/// Writes `problem` to `path`, returning the number of bytes written.
pub fn write_lp_file(problem: &Problem, path: impl AsRef<Path>) -> Result<usize, LpFormatError> {
    let text = write_lp_string(problem)?;
    std::fs::write(path, &text)?;
    Ok(text.len())
}

pub fn read_lp_file(path: impl AsRef<Path>) -> Result<Problem, LpFormatError> {
    let text = std::fs::read_to_string(path)?;
    read_lp_str(&text)
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Colon,
    Rel(Relation),
    Caret,
    Bracket,
    Arrow,
    Star,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
    line_start: bool,
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || "_#$%&!?@'~|{}();,/`\"".contains(c)
}

fn is_ident_char(c: char) -> bool {
    is_ident_start(c) || c.is_ascii_digit() || c == '.'
}

fn tokenize(text: &str) -> Result<(Vec<Token>, Option<String>), LpFormatError> {
    let mut tokens = Vec::new();
    let mut name = None;
    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let chars: Vec<char> = raw.chars().collect();
        let mut i = 0;
        let mut line_start = true;
        while i < chars.len() {
            let c = chars[i];
            let column = i + 1;
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            if c == '\\' {
                if tokens.is_empty() && name.is_none() {
                    let comment: String = chars[i + 1..].iter().collect();
                    if let Some(rest) = comment.trim_start().strip_prefix("Problem:") {
                        name = Some(rest.trim().to_string());
                    }
                }
                break;
            }
            let push = |tokens: &mut Vec<Token>, tok: Tok, line_start: &mut bool| {
                tokens.push(Token { tok, line, column, line_start: *line_start });
                *line_start = false;
            };
            match c {
                '+' => {
                    push(&mut tokens, Tok::Plus, &mut line_start);
                    i += 1;
                }
                '-' if chars.get(i + 1) == Some(&'>') => {
                    push(&mut tokens, Tok::Arrow, &mut line_start);
                    i += 2;
                }
                '-' => {
                    push(&mut tokens, Tok::Minus, &mut line_start);
                    i += 1;
                }
                ':' => {
                    push(&mut tokens, Tok::Colon, &mut line_start);
                    i += 1;
                }
                '^' => {
                    push(&mut tokens, Tok::Caret, &mut line_start);
                    i += 1;
                }
                '*' => {
                    push(&mut tokens, Tok::Star, &mut line_start);
                    i += 1;
                }
                '[' | ']' => {
                    push(&mut tokens, Tok::Bracket, &mut line_start);
                    i += 1;
                }
                '<' | '>' | '=' => {
                    let next = chars.get(i + 1).copied();
                    let (rel, len) = match (c, next) {
                        ('<', Some('=')) | ('=', Some('<')) => (Relation::Le, 2),
                        ('>', Some('=')) | ('=', Some('>')) => (Relation::Ge, 2),
                        ('<', _) => (Relation::Le, 1),
                        ('>', _) => (Relation::Ge, 1),
                        _ => (Relation::Eq, 1),
                    };
                    push(&mut tokens, Tok::Rel(rel), &mut line_start);
                    i += len;
                }
                c if c.is_ascii_digit() || c == '.' => {
                    let start = i;
                    while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                        i += 1;
                    }
                    if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                        let mut k = i + 1;
                        if k < chars.len() && (chars[k] == '+' || chars[k] == '-') {
                            k += 1;
                        }
                        if k < chars.len() && chars[k].is_ascii_digit() {
                            i = k;
                            while i < chars.len() && chars[i].is_ascii_digit() {
                                i += 1;
                            }
                        }
                    }
                    let s: String = chars[start..i].iter().collect();
                    let v = s.parse::<f64>().map_err(|_| LpFormatError::Parse {
                        line,
                        column,
                        message: format!("malformed number '{s}'"),
                    })?;
                    push(&mut tokens, Tok::Num(v), &mut line_start);
                }
                c if is_ident_start(c) => {
                    let start = i;
                    while i < chars.len() && is_ident_char(chars[i]) {
                        i += 1;
                    }
                    let s: String = chars[start..i].iter().collect();
                    push(&mut tokens, Tok::Ident(s), &mut line_start);
                }
                other => {
                    return Err(LpFormatError::Parse { line, column, message: format!("unexpected character '{other}'") });
                }
            }
        }
    }
    Ok((tokens, name))
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Section {
    Objective,
    Constraints,
    Bounds,
    Generals,
    Binaries,
    End,
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    names: HashMap<String, usize>,
    problem: Problem,
}

fn infinity_keyword(s: &str) -> Option<f64> {
    match s.to_ascii_lowercase().as_str() {
        "inf" | "infinity" => Some(f64::INFINITY),
        _ => None,
    }
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn peek_at(&self, k: usize) -> Option<&Token> {
        self.tokens.get(self.pos + k)
    }

    fn error_here(&self, message: impl Into<String>) -> LpFormatError {
        let (line, column) = self
            .peek()
            .or_else(|| self.tokens.last())
            .map(|t| (t.line, t.column))
            .unwrap_or((1, 1));
        LpFormatError::Parse { line, column, message: message.into() }
    }

    fn unsupported(&self, tok: &Token, feature: &str) -> LpFormatError {
        LpFormatError::Unsupported { line: tok.line, column: tok.column, feature: feature.into() }
    }

    /// Returns the section keyword (and its token length) at the current position.
    fn section_keyword(&self) -> Result<Option<(Section, usize)>, LpFormatError> {
        let Some(tok) = self.peek() else { return Ok(None) };
        if !tok.line_start {
            return Ok(None);
        }
        let Tok::Ident(word) = &tok.tok else { return Ok(None) };
        let lower = word.to_ascii_lowercase();
        let next_is = |w: &str| {
            matches!(self.peek_at(1), Some(Token { tok: Tok::Ident(s), line, .. }) if *line == tok.line && s.eq_ignore_ascii_case(w))
        };
        let found = match lower.as_str() {
            "minimize" | "minimum" | "min" => Some((Section::Objective, 1)),
            "maximize" | "maximum" | "max" => Some((Section::Objective, 1)),
            "subject" if next_is("to") => Some((Section::Constraints, 2)),
            "such" if next_is("that") => Some((Section::Constraints, 2)),
            "st" | "s.t." | "st." => Some((Section::Constraints, 1)),
            "bounds" | "bound" => Some((Section::Bounds, 1)),
            "generals" | "general" | "gen" | "integers" | "integer" => Some((Section::Generals, 1)),
            "binaries" | "binary" | "bin" => Some((Section::Binaries, 1)),
            "end" => Some((Section::End, 1)),
            "sos" | "sos1" | "sos2" => return Err(self.unsupported(tok, "SOS constraints")),
            "semi-continuous" | "semis" | "semi" => {
                return Err(self.unsupported(tok, "semi-continuous variables"))
            }
            _ => None,
        };
        Ok(found)
    }

    fn var_index(&mut self, name: &str) -> usize {
        if let Some(&j) = self.names.get(name) {
            return j;
        }
        let p = &mut self.problem;
        let j = p.objective.len();
        p.var_names.push(name.to_string());
        p.objective.push(0.0);
        p.var_lower.push(0.0);
        p.var_upper.push(f64::INFINITY);
        p.is_integer.push(false);
        self.names.insert(name.to_string(), j);
        j
    }

    fn at_boundary(&self) -> Result<bool, LpFormatError> {
        Ok(self.peek().is_none() || self.section_keyword()?.is_some())
    }

    fn optional_label(&mut self) -> Option<String> {
        if let (Some(Token { tok: Tok::Ident(name), .. }), Some(Token { tok: Tok::Colon, .. })) =
            (self.peek(), self.peek_at(1))
        {
            let name = name.clone();
            self.pos += 2;
            return Some(name);
        }
        None
    }

    /// Parses a signed numeric literal (including `inf`).
    fn signed_number(&mut self) -> Result<f64, LpFormatError> {
        let mut sign = 1.0;
        loop {
            match self.peek().map(|t| &t.tok) {
                Some(Tok::Plus) => self.pos += 1,
                Some(Tok::Minus) => {
                    sign = -sign;
                    self.pos += 1;
                }
                _ => break,
            }
        }
        let value = match self.peek().map(|t| t.tok.clone()) {
            Some(Tok::Num(v)) => v,
            Some(Tok::Ident(s)) => match infinity_keyword(&s) {
                Some(v) => v,
                None => return Err(self.error_here(format!("expected a number, found '{s}'"))),
            },
            _ => return Err(self.error_here("expected a number")),
        };
        self.pos += 1;
        Ok(sign * value)
    }

    /// Parses `[+-] [coef] name` terms until a relation, section keyword or
    /// label. Repeated variables are summed.
    fn linear_expr(&mut self, stop_at_label: bool) -> Result<Vec<(usize, f64)>, LpFormatError> {
        let mut terms: Vec<(usize, f64)> = Vec::new();
        let mut slot: HashMap<usize, usize> = HashMap::new();
        loop {
            if self.at_boundary()? {
                break;
            }
            if stop_at_label && !terms.is_empty() {
                if let (Some(Token { tok: Tok::Ident(_), .. }), Some(Token { tok: Tok::Colon, .. })) =
                    (self.peek(), self.peek_at(1))
                {
                    break;
                }
            }
            let start = self.peek().cloned().expect("not at boundary");
            match start.tok {
                Tok::Rel(_) => break,
                Tok::Caret | Tok::Bracket | Tok::Star => return Err(self.unsupported(&start, "quadratic terms")),
                Tok::Arrow => return Err(self.unsupported(&start, "indicator constraints")),
                _ => {}
            }
            let mut sign = 1.0;
            let mut saw_sign = false;
            loop {
                match self.peek().map(|t| &t.tok) {
                    Some(Tok::Plus) => {
                        saw_sign = true;
                        self.pos += 1;
                    }
                    Some(Tok::Minus) => {
                        saw_sign = true;
                        sign = -sign;
                        self.pos += 1;
                    }
                    _ => break,
                }
            }
            if !saw_sign && !terms.is_empty() {
                return Err(self.error_here("expected '+' or '-' between terms"));
            }
            let mut coef = 1.0;
            if let Some(Tok::Num(v)) = self.peek().map(|t| &t.tok) {
                coef = *v;
                self.pos += 1;
            }
            let tok = self.peek().cloned();
            match tok.map(|t| (t.tok.clone(), t)) {
                Some((Tok::Ident(name), _)) if infinity_keyword(&name).is_none() => {
                    self.pos += 1;
                    if let Some(next) = self.peek().cloned() {
                        match next.tok {
                            Tok::Caret | Tok::Star | Tok::Bracket => {
                                return Err(self.unsupported(&next, "quadratic terms"))
                            }
                            Tok::Arrow => return Err(self.unsupported(&next, "indicator constraints")),
                            _ => {}
                        }
                    }
                    let j = self.var_index(&name);
                    match slot.get(&j) {
                        Some(&k) => terms[k].1 += sign * coef,
                        None => {
                            slot.insert(j, terms.len());
                            terms.push((j, sign * coef));
                        }
                    }
                }
                Some((Tok::Bracket, t)) | Some((Tok::Caret, t)) => {
                    return Err(self.unsupported(&t, "quadratic terms"))
                }
                _ => return Err(self.error_here("constant terms are not supported; expected a variable name")),
            }
        }
        Ok(terms)
    }

    fn parse_objective(&mut self) -> Result<(), LpFormatError> {
        self.optional_label();
        let terms = self.linear_expr(false)?;
        if let Some(t) = self.peek() {
            if matches!(t.tok, Tok::Rel(_)) {
                return Err(self.error_here("relation in objective"));
            }
        }
        for (j, c) in terms {
            self.problem.objective[j] = c;
        }
        Ok(())
    }

    fn parse_constraints(&mut self) -> Result<(), LpFormatError> {
        while !self.at_boundary()? {
            let name = self.optional_label().unwrap_or_else(|| format!("c{}", self.problem.constraints.len()));
            let coeffs = self.linear_expr(true)?;
            let relation = match self.peek().map(|t| t.tok.clone()) {
                Some(Tok::Rel(r)) => r,
                _ => return Err(self.error_here("expected a relation (<=, >=, =)")),
            };
            self.pos += 1;
            let rhs_line = self.peek().map(|t| t.line);
            let rhs = self.signed_number()?;
            if let Some(Token { tok: Tok::Ident(_), line, .. }) = self.peek() {
                if Some(*line) == rhs_line {
                    return Err(self.error_here("variables on the right-hand side are not supported"));
                }
            }
            self.problem.constraints.push(Constraint { name, coeffs, relation, rhs });
        }
        Ok(())
    }

    fn bound_name(&mut self) -> Result<usize, LpFormatError> {
        match self.peek().map(|t| t.tok.clone()) {
            Some(Tok::Ident(name)) if infinity_keyword(&name).is_none() => {
                self.pos += 1;
                Ok(self.var_index(&name))
            }
            _ => Err(self.error_here("expected a variable name in bound")),
        }
    }

    fn apply_bound(&mut self, j: usize, rel: Relation, value: f64, var_on_left: bool) {
        let rel = match (rel, var_on_left) {
            (Relation::Le, false) => Relation::Ge,
            (Relation::Ge, false) => Relation::Le,
            (r, _) => r,
        };
        let p = &mut self.problem;
        match rel {
            Relation::Le => p.var_upper[j] = value,
            Relation::Ge => p.var_lower[j] = value,
            Relation::Eq => {
                p.var_lower[j] = value;
                p.var_upper[j] = value;
            }
        }
    }

    fn expect_rel(&mut self) -> Result<Relation, LpFormatError> {
        match self.peek().map(|t| t.tok.clone()) {
            Some(Tok::Rel(r)) => {
                self.pos += 1;
                Ok(r)
            }
            _ => Err(self.error_here("expected a relation in bound")),
        }
    }

    fn parse_bounds(&mut self) -> Result<(), LpFormatError> {
        while !self.at_boundary()? {
            let starts_with_var = matches!(
                self.peek().map(|t| &t.tok),
                Some(Tok::Ident(s)) if infinity_keyword(s).is_none()
            );
            if starts_with_var {
                let j = self.bound_name()?;
                if let Some(Tok::Ident(w)) = self.peek().map(|t| &t.tok) {
                    if w.eq_ignore_ascii_case("free") {
                        self.pos += 1;
                        self.problem.var_lower[j] = f64::NEG_INFINITY;
                        self.problem.var_upper[j] = f64::INFINITY;
                        continue;
                    }
                }
                let rel = self.expect_rel()?;
                let v = self.signed_number()?;
                self.apply_bound(j, rel, v, true);
            } else {
                let v = self.signed_number()?;
                let rel = self.expect_rel()?;
                let j = self.bound_name()?;
                self.apply_bound(j, rel, v, false);
                if let Some(Tok::Rel(_)) = self.peek().map(|t| &t.tok) {
                    let rel2 = self.expect_rel()?;
                    let v2 = self.signed_number()?;
                    self.apply_bound(j, rel2, v2, true);
                }
            }
        }
        Ok(())
    }

    fn parse_integers(&mut self, binary: bool) -> Result<(), LpFormatError> {
        while !self.at_boundary()? {
            let j = self.bound_name()?;
            self.problem.is_integer[j] = true;
            if binary {
                self.problem.var_lower[j] = 0.0;
                self.problem.var_upper[j] = 1.0;
            }
        }
        Ok(())
    }
}

pub fn read_lp_str(text: &str) -> Result<Problem, LpFormatError> {
    let (tokens, name) = tokenize(text)?;
    let mut parser = Parser { tokens, pos: 0, names: HashMap::new(), problem: Problem::default() };
    parser.problem.name = name.unwrap_or_default();

    let mut seen_objective = false;
    while parser.peek().is_some() {
        let Some((section, len)) = parser.section_keyword()? else {
            return Err(parser.error_here("expected a section keyword"));
        };
        let keyword = parser.peek().cloned().expect("keyword token");
        parser.pos += len;
        match section {
            Section::Objective => {
                if seen_objective {
                    return Err(LpFormatError::Parse {
                        line: keyword.line,
                        column: keyword.column,
                        message: "duplicate objective section".into(),
                    });
                }
                seen_objective = true;
                if let Tok::Ident(w) = &keyword.tok {
                    parser.problem.maximize = w.to_ascii_lowercase().starts_with("max");
                }
                parser.parse_objective()?;
            }
            Section::Constraints => parser.parse_constraints()?,
            Section::Bounds => parser.parse_bounds()?,
            Section::Generals => parser.parse_integers(false)?,
            Section::Binaries => parser.parse_integers(true)?,
            Section::End => break,
        }
    }
    if !seen_objective {
        return Err(LpFormatError::Parse { line: 1, column: 1, message: "missing objective section".into() });
    }
    let mut problem = parser.problem;
    if problem.maximize {
        for c in &mut problem.objective {
            *c = -*c;
        }
    }
    Ok(problem)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::ProblemBuilder;

    fn minimal() -> Problem {
        let mut b = ProblemBuilder::new("minimal");
        b.add_var(1.0, 0.0, 1.0, true);
        b.build()
    }

    #[test]
    fn minimal_instance_sections() {
        let text = write_lp_string(&minimal()).unwrap();
        assert!(text.contains("Minimize"));
        assert!(text.contains("Bounds\n 0 <= x0 <= 1"));
        assert!(text.contains("Generals\n x0"));
        assert_eq!(read_lp_str(&text).unwrap(), minimal());
    }

    #[test]
    fn maximization_round_trip() {
        let mut b = ProblemBuilder::new("knap").maximize();
        let x = b.add_binary(5.0);
        let y = b.add_binary(4.0);
        b.add_constraint(vec![(x, 6.0), (y, 4.0)], Relation::Le, 9.0);
        let p = b.build();
        let text = write_lp_string(&p).unwrap();
        assert!(text.contains("Maximize\n obj: 5 x0 + 4 x1"), "{text}");
        let q = read_lp_str(&text).unwrap();
        assert_eq!(q, p);
        assert_eq!(q.objective, vec![-5.0, -4.0]);
    }

    #[test]
    fn awkward_numbers_round_trip_exactly() {
        let mut b = ProblemBuilder::new("nums");
        let vals = [0.1, -1e-300, 1e300, 123456789.123456789, -0.0, 5e-324, 2.0f64.sqrt()];
        for (k, &v) in vals.iter().enumerate() {
            b.add_var(v, f64::NEG_INFINITY, if k % 2 == 0 { f64::INFINITY } else { v.abs() }, false);
        }
        b.add_constraint(vals.iter().enumerate().map(|(j, &v)| (j, v)).collect(), Relation::Eq, -1.0 / 3.0);
        let p = b.build();
        let q = read_lp_str(&write_lp_string(&p).unwrap()).unwrap();
        assert_eq!(q, p);
        for (a, b) in p.objective.iter().zip(&q.objective) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn quadratic_term_is_unsupported() {
        let text = "Minimize\n obj: x1^2 + x2\nSubject To\n c: x1 + x2 >= 1\nEnd\n";
        match read_lp_str(text) {
            Err(LpFormatError::Unsupported { line, feature, .. }) => {
                assert_eq!(line, 2);
                assert!(feature.contains("quadratic"));
            }
            other => panic!("expected unsupported error, got {other:?}"),
        }
        let bracket = "Minimize\n obj: [ x * y ] / 2\nEnd\n";
        assert!(matches!(read_lp_str(bracket), Err(LpFormatError::Unsupported { .. })));
    }

    #[test]
    fn sos_and_indicator_are_unsupported() {
        let sos = "Minimize\n obj: x\nSOS\n s1: S1:: x:1 y:2\nEnd\n";
        assert!(matches!(read_lp_str(sos), Err(LpFormatError::Unsupported { .. })));
        let ind = "Minimize\n obj: x\nSubject To\n c: b = 1 -> x >= 2\nEnd\n";
        assert!(matches!(read_lp_str(ind), Err(LpFormatError::Unsupported { .. })));
    }

    #[test]
    fn parse_error_reports_position() {
        let text = "Minimize\n obj: x + y\nSubject To\n c0: x + y >= \nEnd\n";
        match read_lp_str(text) {
            Err(LpFormatError::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("expected parse error, got {other:?}"),
        }
        match read_lp_str("Minimize\n obj: x $ 3\n") {
            Err(LpFormatError::Parse { line, column, .. }) => assert_eq!((line, column), (2, 9)),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn reads_hand_written_file() {
        let text = r"\ a hand written model
Maximize
  profit: 3x + 2 y - z
Subject To
  cap: x + y + z <= 4
  x + 3 y >= 2
  link: x - z = 0
Bounds
  x <= 10
  -5 <= z <= 5
  y free
Binaries
  b
General
  x
End
";
        let p = read_lp_str(text).unwrap();
        assert!(p.maximize);
        assert_eq!(p.var_names, vec!["x", "y", "z", "b"]);
        assert_eq!(p.objective, vec![-3.0, -2.0, 1.0, 0.0]);
        assert_eq!(p.constraints.len(), 3);
        assert_eq!(p.constraints[1].name, "c1");
        assert_eq!(p.constraints[1].coeffs, vec![(0, 1.0), (1, 3.0)]);
        assert_eq!(p.var_upper[0], 10.0);
        assert_eq!((p.var_lower[2], p.var_upper[2]), (-5.0, 5.0));
        assert_eq!((p.var_lower[1], p.var_upper[1]), (f64::NEG_INFINITY, f64::INFINITY));
        assert_eq!((p.var_lower[3], p.var_upper[3], p.is_integer[3]), (0.0, 1.0, true));
        assert!(p.is_integer[0]);
        assert!(p.validate().is_ok());
    }

    #[test]
    fn refuses_invalid_problem() {
        let mut b = ProblemBuilder::new("bad");
        b.add_var(0.0, 2.0, 1.0, false);
        assert!(matches!(write_lp_string(&b.build()), Err(LpFormatError::InvalidProblem(_))));
    }
}
