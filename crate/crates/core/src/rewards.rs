//! Reward functions built from solver metrics with arithmetic composition.
//!
//! Leaves report the *change* of a metric since the previous evaluation, so
//! the reward returned at reset covers everything from solve start up to the
//! first decision point, and summing all rewards of an episode gives the
//! metric total.
//!
//! Expressions compose with the usual operators:
//!
//! ```
//! use milpenv::rewards::RewardExpr;
//!
//! let squared = RewardExpr::lp_iterations().pow(2.0);
//! let mixed = -RewardExpr::nnodes() * 0.5 + RewardExpr::is_done();
//! assert_eq!(squared.to_string(), "(lp_iterations ^ 2)");
//! assert_eq!(mixed.to_string().parse::<RewardExpr>().unwrap(), mixed);
//! ```

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;
use std::time::Duration;

use thiserror::Error;

use crate::engine::SolverState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    LpIterations,
    NNodes,
    /// Seconds spent inside solver calls (monotonic clock).
    SolvingTime,
    /// 1 on the terminal transition, 0 otherwise.
    IsDone,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::LpIterations => "lp_iterations",
            Metric::NNodes => "nnodes",
            Metric::SolvingTime => "solving_time",
            Metric::IsDone => "is_done",
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "lp_iterations" => Metric::LpIterations,
            "nnodes" => Metric::NNodes,
            "solving_time" => Metric::SolvingTime,
            "is_done" => Metric::IsDone,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Exp,
    Log,
    Abs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinaryOp {
    fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Pow => "^",
        }
    }

    pub fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            BinaryOp::Add => a + b,
            BinaryOp::Sub => a - b,
            BinaryOp::Mul => a * b,
            BinaryOp::Div => a / b,
            BinaryOp::Pow => a.powf(b),
        }
    }
}

impl UnaryOp {
    pub fn apply(self, a: f64) -> f64 {
        match self {
            UnaryOp::Neg => -a,
            UnaryOp::Exp => a.exp(),
            UnaryOp::Log => a.ln(),
            UnaryOp::Abs => a.abs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RewardExpr {
    Metric(Metric),
    Constant(f64),
    Unary(UnaryOp, Box<RewardExpr>),
    Binary(BinaryOp, Box<RewardExpr>, Box<RewardExpr>),
}

/// Per-transition leaf values.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MetricValues {
    pub lp_iterations: f64,
    pub nnodes: f64,
    pub solving_time: f64,
    pub is_done: f64,
}

impl MetricValues {
    pub fn get(&self, metric: Metric) -> f64 {
        match metric {
            Metric::LpIterations => self.lp_iterations,
            Metric::NNodes => self.nnodes,
            Metric::SolvingTime => self.solving_time,
            Metric::IsDone => self.is_done,
        }
    }
}

impl RewardExpr {
    pub fn lp_iterations() -> Self {
        RewardExpr::Metric(Metric::LpIterations)
    }

    pub fn nnodes() -> Self {
        RewardExpr::Metric(Metric::NNodes)
    }

    pub fn solving_time() -> Self {
        RewardExpr::Metric(Metric::SolvingTime)
    }

    pub fn is_done() -> Self {
        RewardExpr::Metric(Metric::IsDone)
    }

    pub fn constant(c: f64) -> Self {
        RewardExpr::Constant(c)
    }

    pub fn pow(self, exponent: impl Into<RewardExpr>) -> Self {
        RewardExpr::Binary(BinaryOp::Pow, Box::new(self), Box::new(exponent.into()))
    }

    pub fn exp(self) -> Self {
        RewardExpr::Unary(UnaryOp::Exp, Box::new(self))
    }

    pub fn log(self) -> Self {
        RewardExpr::Unary(UnaryOp::Log, Box::new(self))
    }

    pub fn abs(self) -> Self {
        RewardExpr::Unary(UnaryOp::Abs, Box::new(self))
    }

    pub fn eval(&self, values: &MetricValues) -> f64 {
        match self {
            RewardExpr::Metric(m) => values.get(*m),
            RewardExpr::Constant(c) => *c,
            RewardExpr::Unary(op, a) => op.apply(a.eval(values)),
            RewardExpr::Binary(op, a, b) => op.apply(a.eval(values), b.eval(values)),
        }
    }
}

impl From<f64> for RewardExpr {
    fn from(c: f64) -> Self {
        RewardExpr::Constant(c)
    }
}

impl From<Metric> for RewardExpr {
    fn from(m: Metric) -> Self {
        RewardExpr::Metric(m)
    }
}

macro_rules! binary_operator {
    ($trait:ident, $method:ident, $op:expr) => {
        impl<T: Into<RewardExpr>> $trait<T> for RewardExpr {
            type Output = RewardExpr;
            fn $method(self, rhs: T) -> RewardExpr {
                RewardExpr::Binary($op, Box::new(self), Box::new(rhs.into()))
            }
        }

        impl $trait<RewardExpr> for f64 {
            type Output = RewardExpr;
            fn $method(self, rhs: RewardExpr) -> RewardExpr {
                RewardExpr::Binary($op, Box::new(RewardExpr::Constant(self)), Box::new(rhs))
            }
        }
    };
}

binary_operator!(Add, add, BinaryOp::Add);
binary_operator!(Sub, sub, BinaryOp::Sub);
binary_operator!(Mul, mul, BinaryOp::Mul);
binary_operator!(Div, div, BinaryOp::Div);

impl Neg for RewardExpr {
    type Output = RewardExpr;
    fn neg(self) -> RewardExpr {
        RewardExpr::Unary(UnaryOp::Neg, Box::new(self))
    }
}

/// Canonical, fully parenthesized infix form accepted by [`FromStr`].
impl fmt::Display for RewardExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RewardExpr::Metric(m) => f.write_str(m.name()),
            RewardExpr::Constant(c) if c.is_sign_negative() => write!(f, "(-{})", -c),
            RewardExpr::Constant(c) => write!(f, "{c}"),
            RewardExpr::Unary(UnaryOp::Neg, a) => write!(f, "(-{a})"),
            RewardExpr::Unary(op, a) => {
                let name = match op {
                    UnaryOp::Exp => "exp",
                    UnaryOp::Log => "log",
                    UnaryOp::Abs => "abs",
                    UnaryOp::Neg => unreachable!(),
                };
                write!(f, "{name}({a})")
            }
            RewardExpr::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("reward expression error at position {position}: {message}")]
pub struct ParseError {
    /// Byte offset into the input.
    pub position: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Lexeme {
    Num(f64),
    Ident(String),
    Sym(char),
    Pow,
}

struct ExprParser {
    lexemes: Vec<(Lexeme, usize)>,
    pos: usize,
    len: usize,
}

fn lex(text: &str) -> Result<Vec<(Lexeme, usize)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut k = i + 1;
                if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                    k += 1;
                }
                if k < bytes.len() && bytes[k].is_ascii_digit() {
                    i = k;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let s = &text[start..i];
            let v = s
                .parse::<f64>()
                .map_err(|_| ParseError { position: start, message: format!("malformed number '{s}'") })?;
            out.push((Lexeme::Num(v), start));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Lexeme::Ident(text[start..i].to_string()), start));
        } else if c == '*' && bytes.get(i + 1) == Some(&b'*') {
            out.push((Lexeme::Pow, i));
            i += 2;
        } else if "+-*/^()".contains(c) {
            out.push((if c == '^' { Lexeme::Pow } else { Lexeme::Sym(c) }, i));
            i += 1;
        } else {
            let ch = text[i..].chars().next().unwrap_or(c);
            return Err(ParseError { position: i, message: format!("unexpected character '{ch}'") });
        }
    }
    Ok(out)
}

impl ExprParser {
    fn peek(&self) -> Option<&Lexeme> {
        self.lexemes.get(self.pos).map(|(l, _)| l)
    }

    fn here(&self) -> usize {
        self.lexemes.get(self.pos).map_or(self.len, |(_, p)| *p)
    }

    fn err(&self, message: impl Into<String>) -> ParseError {
        ParseError { position: self.here(), message: message.into() }
    }

    fn expect_sym(&mut self, c: char) -> Result<(), ParseError> {
        if self.peek() == Some(&Lexeme::Sym(c)) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected '{c}'")))
        }
    }

    fn expr(&mut self) -> Result<RewardExpr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(Lexeme::Sym('+')) => BinaryOp::Add,
                Some(Lexeme::Sym('-')) => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = RewardExpr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<RewardExpr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(Lexeme::Sym('*')) => BinaryOp::Mul,
                Some(Lexeme::Sym('/')) => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = RewardExpr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<RewardExpr, ParseError> {
        if self.peek() == Some(&Lexeme::Sym('-')) {
            self.pos += 1;
            let inner = self.unary()?;
            return Ok(-inner);
        }
        self.power()
    }

    fn power(&mut self) -> Result<RewardExpr, ParseError> {
        let base = self.atom()?;
        if self.peek() == Some(&Lexeme::Pow) {
            self.pos += 1;
            let exponent = self.unary()?;
            return Ok(base.pow(exponent));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<RewardExpr, ParseError> {
        match self.peek().cloned() {
            Some(Lexeme::Num(v)) => {
                self.pos += 1;
                Ok(RewardExpr::Constant(v))
            }
            Some(Lexeme::Sym('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect_sym(')')?;
                Ok(e)
            }
            Some(Lexeme::Ident(name)) => {
                let start = self.here();
                self.pos += 1;
                if let Some(m) = Metric::from_name(&name) {
                    return Ok(RewardExpr::Metric(m));
                }
                let op = match name.as_str() {
                    "exp" => UnaryOp::Exp,
                    "log" => UnaryOp::Log,
                    "abs" => UnaryOp::Abs,
                    _ => return Err(ParseError { position: start, message: format!("unknown name '{name}'") }),
                };
                self.expect_sym('(')?;
                let e = self.expr()?;
                self.expect_sym(')')?;
                Ok(RewardExpr::Unary(op, Box::new(e)))
            }
            Some(_) => Err(self.err("expected a number, metric, function or '('")),
            None => Err(self.err("unexpected end of expression")),
        }
    }
}

impl FromStr for RewardExpr {
    type Err = ParseError;

    /// Grammar: `+ - * /` and `^` (or `**`, right associative, binds tighter
    /// than unary minus), functions `exp log abs`, leaves `lp_iterations
    /// nnodes solving_time is_done` and numeric literals.
    fn from_str(text: &str) -> Result<Self, ParseError> {
        let mut p = ExprParser { lexemes: lex(text)?, pos: 0, len: text.len() };
        let e = p.expr()?;
        if p.pos != p.lexemes.len() {
            return Err(p.err("unexpected trailing input"));
        }
        Ok(e)
    }
}

/// Two-method contract shared by all reward functions.
pub trait RewardFunction {
    /// Called at the beginning of every episode, after the solver has been
    /// reset.
    fn before_reset(&mut self, state: &crate::engine::SolverState);

    /// Called once per reset and per step, in order.
    fn evaluate(&mut self, state: &crate::engine::SolverState, done: bool) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
struct Counters {
    lp_iterations: u64,
    nnodes: u64,
    solving_time: Duration,
}

impl Counters {
    fn of(state: &SolverState) -> Self {
        Self {
            lp_iterations: state.total_lp_iterations(),
            nnodes: state.nodes_processed(),
            solving_time: state.solving_time(),
        }
    }
}

/// A [`RewardExpr`] evaluated on metric deltas.
#[derive(Debug, Clone)]
pub struct Reward {
    expr: RewardExpr,
    last: Counters,
}

impl Reward {
    pub fn new(expr: RewardExpr) -> Self {
        Self { expr, last: Counters::default() }
    }

    pub fn expr(&self) -> &RewardExpr {
        &self.expr
    }

    /// Leaf values for the transition ending in `state`, advancing the snapshot.
    pub fn take_deltas(&mut self, state: &SolverState, done: bool) -> MetricValues {
        let now = Counters::of(state);
        let values = MetricValues {
            lp_iterations: (now.lp_iterations - self.last.lp_iterations) as f64,
            nnodes: (now.nnodes - self.last.nnodes) as f64,
            solving_time: now.solving_time.saturating_sub(self.last.solving_time).as_secs_f64(),
            is_done: if done { 1.0 } else { 0.0 },
        };
        self.last = now;
        values
    }
}

impl From<RewardExpr> for Reward {
    fn from(expr: RewardExpr) -> Self {
        Reward::new(expr)
    }
}

impl RewardFunction for Reward {
    fn before_reset(&mut self, _state: &SolverState) {
        // Solve start is the origin of every counter.
        self.last = Counters::default();
    }

    fn evaluate(&mut self, state: &SolverState, done: bool) -> f64 {
        let values = self.take_deltas(state, done);
        self.expr.eval(&values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn values(lp: f64, nodes: f64) -> MetricValues {
        MetricValues { lp_iterations: lp, nnodes: nodes, solving_time: 0.0, is_done: 0.0 }
    }

    #[test]
    fn constant_power() {
        let e = RewardExpr::constant(3.0).pow(RewardExpr::constant(2.0));
        assert_eq!(e.eval(&values(1.0, 1.0)), 9.0);
        assert_eq!(e.eval(&values(7.0, 0.0)), 9.0);
    }

    #[test]
    fn squared_iterations_on_deltas() {
        let e = RewardExpr::lp_iterations().pow(2.0);
        assert_eq!(e.eval(&values(5.0, 0.0)), 25.0);
        assert_eq!(e.eval(&values(3.0, 0.0)), 9.0);
        assert_eq!(e.to_string(), "(lp_iterations ^ 2)");
        assert_eq!("lp_iterations ^ 2".parse::<RewardExpr>().unwrap(), e);
        assert_eq!("lp_iterations ** 2".parse::<RewardExpr>().unwrap(), e);
    }

    #[test]
    fn precedence() {
        let e: RewardExpr = "-2 ^ 2 + 3 * nnodes / 2 - 1".parse().unwrap();
        assert_eq!(e.eval(&values(0.0, 4.0)), -4.0 + 6.0 - 1.0);
        let e: RewardExpr = "2 ^ 3 ^ 2".parse().unwrap();
        assert_eq!(e.eval(&MetricValues::default()), 512.0);
        let e: RewardExpr = "abs(log(exp(-3)))".parse().unwrap();
        assert!((e.eval(&MetricValues::default()) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn division_by_zero_propagates() {
        let e = RewardExpr::constant(1.0) / RewardExpr::nnodes();
        assert_eq!(e.eval(&values(0.0, 0.0)), f64::INFINITY);
        assert!(RewardExpr::constant(-1.0).log().eval(&MetricValues::default()).is_nan());
    }

    #[test]
    fn parse_errors_carry_position() {
        let err = "lp_iterations + ".parse::<RewardExpr>().unwrap_err();
        assert_eq!(err.position, 16);
        let err = "lp_iterations + foo".parse::<RewardExpr>().unwrap_err();
        assert_eq!(err.position, 16);
        assert!(err.message.contains("foo"));
        let err = "(nnodes".parse::<RewardExpr>().unwrap_err();
        assert_eq!(err.position, 7);
        let err = "nnodes $".parse::<RewardExpr>().unwrap_err();
        assert_eq!(err.position, 7);
        let err = "nnodes nnodes".parse::<RewardExpr>().unwrap_err();
        assert_eq!(err.position, 7);
    }

    fn arb_expr() -> impl Strategy<Value = RewardExpr> {
        let leaf = prop_oneof![
            Just(RewardExpr::lp_iterations()),
            Just(RewardExpr::nnodes()),
            Just(RewardExpr::solving_time()),
            Just(RewardExpr::is_done()),
            (-1e6f64..1e6).prop_map(RewardExpr::Constant),
        ];
        leaf.prop_recursive(4, 32, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| a + b),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| a - b),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| a * b),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| a / b),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| a.pow(b)),
                inner.clone().prop_map(|a| -a),
                inner.clone().prop_map(RewardExpr::exp),
                inner.clone().prop_map(RewardExpr::log),
                inner.prop_map(RewardExpr::abs),
            ]
        })
    }

    fn arb_values() -> impl Strategy<Value = MetricValues> {
        (0u32..1000, 0u32..50, 0.0f64..2.0, prop::bool::ANY).prop_map(|(lp, n, t, d)| MetricValues {
            lp_iterations: lp as f64,
            nnodes: n as f64,
            solving_time: t,
            is_done: if d { 1.0 } else { 0.0 },
        })
    }

    proptest! {
        #[test]
        fn canonical_text_round_trips(e in arb_expr(), v in arb_values()) {
            let text = e.to_string();
            let parsed: RewardExpr = text.parse().unwrap();
            prop_assert_eq!(parsed.to_string(), text);
            let (a, b) = (e.eval(&v), parsed.eval(&v));
            prop_assert!(a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()));
        }

        #[test]
        fn composition_is_pointwise(a in arb_expr(), b in arb_expr(), v in arb_values()) {
            let (x, y) = (a.eval(&v), b.eval(&v));
            for op in [BinaryOp::Add, BinaryOp::Sub, BinaryOp::Mul, BinaryOp::Div, BinaryOp::Pow] {
                let composed = RewardExpr::Binary(op, Box::new(a.clone()), Box::new(b.clone()));
                let lhs = composed.eval(&v);
                let rhs = op.apply(x, y);
                prop_assert!(lhs.to_bits() == rhs.to_bits() || (lhs.is_nan() && rhs.is_nan()));
            }
        }
    }
}
