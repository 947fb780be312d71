//! Restriction language: a small boolean formula language over parameter
//! comparisons, evaluated with strong-Kleene three-valued semantics so that
//! formulas can be checked against partial assignments.
//!
//! Grammar:
//!
//! ```text
//! expr := or
//! or   := and { "||" and }
//! and  := not { "&&" not }
//! not  := "!" not | atom
//! atom := "(" expr ")" | cmp
//! cmp  := IDENT ("=" | "!=") (IDENT | STRING)
//! ```
//!
//! An identifier on the right of a comparison names either a value of the
//! left parameter's domain or another parameter; quoted strings are always
//! values.

use std::fmt;

use thiserror::Error;

use crate::model::{Assignment, Parameter};

/// Three-valued truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TruthValue {
    True,
    False,
    Unknown,
}

impl TruthValue {
    pub fn from_bool(b: bool) -> Self {
        if b {
            TruthValue::True
        } else {
            TruthValue::False
        }
    }

    pub fn negate(self) -> Self {
        match self {
            TruthValue::True => TruthValue::False,
            TruthValue::False => TruthValue::True,
            TruthValue::Unknown => TruthValue::Unknown,
        }
    }

    pub fn and(self, other: Self) -> Self {
        match (self, other) {
            (TruthValue::False, _) | (_, TruthValue::False) => TruthValue::False,
            (TruthValue::True, TruthValue::True) => TruthValue::True,
            _ => TruthValue::Unknown,
        }
    }

    pub fn or(self, other: Self) -> Self {
        match (self, other) {
            (TruthValue::True, _) | (_, TruthValue::True) => TruthValue::True,
            (TruthValue::False, TruthValue::False) => TruthValue::False,
            _ => TruthValue::Unknown,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CompareOp {
    Eq,
    Ne,
}

/// Right-hand side of a comparison.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Operand {
    /// Index into the left parameter's domain.
    Value(usize),
    /// Another parameter. `same_name[v]` is the index in the right domain of
    /// the value whose name equals left value `v`, if any.
    Param {
        index: usize,
        same_name: Vec<Option<usize>>,
    },
}

/// Resolved restriction formula. Parameter and value references are indices
/// into the model signature the formula was parsed against.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum RestrictionAst {
    And(Box<RestrictionAst>, Box<RestrictionAst>),
    Or(Box<RestrictionAst>, Box<RestrictionAst>),
    Not(Box<RestrictionAst>),
    Compare {
        param: usize,
        op: CompareOp,
        rhs: Operand,
    },
}

impl RestrictionAst {
    pub fn evaluate<A: Assignment + ?Sized>(&self, assignment: &A) -> TruthValue {
        match self {
            RestrictionAst::And(l, r) => {
                let left = l.evaluate(assignment);
                if left == TruthValue::False {
                    return TruthValue::False;
                }
                left.and(r.evaluate(assignment))
            }
            RestrictionAst::Or(l, r) => {
                let left = l.evaluate(assignment);
                if left == TruthValue::True {
                    return TruthValue::True;
                }
                left.or(r.evaluate(assignment))
            }
            RestrictionAst::Not(inner) => inner.evaluate(assignment).negate(),
            RestrictionAst::Compare { param, op, rhs } => {
                let Some(left) = assignment.value_of(*param) else {
                    return TruthValue::Unknown;
                };
                let equal = match rhs {
                    Operand::Value(v) => left == *v,
                    Operand::Param { index, same_name } => match assignment.value_of(*index) {
                        Some(right) => same_name[left] == Some(right),
                        None => return TruthValue::Unknown,
                    },
                };
                TruthValue::from_bool(match op {
                    CompareOp::Eq => equal,
                    CompareOp::Ne => !equal,
                })
            }
        }
    }

    /// Indices of every parameter the formula mentions.
    pub fn parameters(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.collect_parameters(&mut out);
        out.sort_unstable();
        out.dedup();
        out
    }

    fn collect_parameters(&self, out: &mut Vec<usize>) {
        match self {
            RestrictionAst::And(l, r) | RestrictionAst::Or(l, r) => {
                l.collect_parameters(out);
                r.collect_parameters(out);
            }
            RestrictionAst::Not(inner) => inner.collect_parameters(out),
            RestrictionAst::Compare { param, rhs, .. } => {
                out.push(*param);
                if let Operand::Param { index, .. } = rhs {
                    out.push(*index);
                }
            }
        }
    }

    /// Canonical source text. Parsing the result against the same signature
    /// yields an identical tree.
    pub fn to_source(&self, params: &[Parameter]) -> String {
        let mut out = String::new();
        self.write_source(params, &mut out);
        out
    }

    fn write_source(&self, params: &[Parameter], out: &mut String) {
        match self {
            RestrictionAst::Or(l, r) => {
                l.write_source(params, out);
                out.push_str(" || ");
                r.write_child(params, out, matches!(**r, RestrictionAst::Or(..)));
            }
            RestrictionAst::And(l, r) => {
                l.write_child(params, out, matches!(**l, RestrictionAst::Or(..)));
                out.push_str(" && ");
                r.write_child(
                    params,
                    out,
                    matches!(**r, RestrictionAst::Or(..) | RestrictionAst::And(..)),
                );
            }
            RestrictionAst::Not(inner) => {
                out.push('!');
                inner.write_child(
                    params,
                    out,
                    matches!(**inner, RestrictionAst::Or(..) | RestrictionAst::And(..)),
                );
            }
            RestrictionAst::Compare { param, op, rhs } => {
                let left = &params[*param];
                out.push_str(&left.name);
                out.push_str(match op {
                    CompareOp::Eq => " = ",
                    CompareOp::Ne => " != ",
                });
                match rhs {
                    Operand::Value(v) => {
                        let value = &left.values[*v];
                        let clashes = params.iter().any(|p| &p.name == value);
                        if is_ident(value) && !clashes {
                            out.push_str(value);
                        } else {
                            out.push('"');
                            out.push_str(value);
                            out.push('"');
                        }
                    }
                    Operand::Param { index, .. } => out.push_str(&params[*index].name),
                }
            }
        }
    }

    fn write_child(&self, params: &[Parameter], out: &mut String, parens: bool) {
        if parens {
            out.push('(');
            self.write_source(params, out);
            out.push(')');
        } else {
            self.write_source(params, out);
        }
    }
}

/// A parsed restriction together with the text it was parsed from.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Restriction {
    source: String,
    ast: RestrictionAst,
}

impl Restriction {
    pub fn parse(text: &str, params: &[Parameter]) -> Result<Self, ParseError> {
        let ast = parse_restriction(text, params)?;
        Ok(Restriction {
            source: text.trim().to_string(),
            ast,
        })
    }

    /// Wraps a tree built programmatically; the stored source is its
    /// canonical rendering.
    pub fn from_ast(ast: RestrictionAst, params: &[Parameter]) -> Self {
        Restriction {
            source: ast.to_source(params),
            ast,
        }
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn ast(&self) -> &RestrictionAst {
        &self.ast
    }

    pub fn evaluate<A: Assignment + ?Sized>(&self, assignment: &A) -> TruthValue {
        self.ast.evaluate(assignment)
    }
}

impl fmt::Display for Restriction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at position {position}: expected {}, found {found}", expected.join(" or "))]
    Syntax {
        position: usize,
        expected: Vec<String>,
        found: String,
    },
    #[error("unknown parameter `{name}` at position {position}")]
    UnknownParameter { name: String, position: usize },
    #[error("value `{value}` is not in the domain of parameter `{parameter}` (position {position})")]
    ValueNotInDomain {
        parameter: String,
        value: String,
        position: usize,
    },
    #[error("parameters `{left}` and `{right}` share no value names (position {position})")]
    NoSharedValues {
        left: String,
        right: String,
        position: usize,
    },
    #[error("`{name}` at position {position} is both a parameter and a value of `{parameter}`; quote it to mean the value")]
    Ambiguous {
        name: String,
        parameter: String,
        position: usize,
    },
}

/// Parses `text` against the parameter signature `params`.
pub fn parse_restriction(text: &str, params: &[Parameter]) -> Result<RestrictionAst, ParseError> {
    let tokens = lex(text)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        params,
    };
    let ast = parser.or()?;
    let tok = parser.peek();
    if tok.kind != TokenKind::End {
        return Err(parser.unexpected(&["`&&`", "`||`", "end of input"]));
    }
    Ok(ast)
}

pub(crate) fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum TokenKind {
    Ident(String),
    Str(String),
    Eq,
    Ne,
    And,
    Or,
    Not,
    LParen,
    RParen,
    End,
}

impl TokenKind {
    fn describe(&self) -> String {
        match self {
            TokenKind::Ident(s) => format!("identifier `{s}`"),
            TokenKind::Str(s) => format!("string \"{s}\""),
            TokenKind::Eq => "`=`".into(),
            TokenKind::Ne => "`!=`".into(),
            TokenKind::And => "`&&`".into(),
            TokenKind::Or => "`||`".into(),
            TokenKind::Not => "`!`".into(),
            TokenKind::LParen => "`(`".into(),
            TokenKind::RParen => "`)`".into(),
            TokenKind::End => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokenKind,
    position: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = text.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    let syntax = |position: usize, expected: &[&str], found: String| ParseError::Syntax {
        position,
        expected: expected.iter().map(|s| s.to_string()).collect(),
        found,
    };
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let kind = match c {
            b' ' | b'\t' | b'\r' | b'\n' => {
                i += 1;
                continue;
            }
            b'(' => {
                i += 1;
                TokenKind::LParen
            }
            b')' => {
                i += 1;
                TokenKind::RParen
            }
            b'=' => {
                i += 1;
                TokenKind::Eq
            }
            b'!' => {
                if bytes.get(i + 1) == Some(&b'=') {
                    i += 2;
                    TokenKind::Ne
                } else {
                    i += 1;
                    TokenKind::Not
                }
            }
            b'&' | b'|' => {
                if bytes.get(i + 1) != Some(&c) {
                    let op = if c == b'&' { "`&&`" } else { "`||`" };
                    return Err(syntax(start, &[op], format!("`{}`", c as char)));
                }
                i += 2;
                if c == b'&' {
                    TokenKind::And
                } else {
                    TokenKind::Or
                }
            }
            b'"' => {
                let Some(len) = text[i + 1..].find('"') else {
                    return Err(syntax(start, &["closing `\"`"], "end of input".into()));
                };
                let value = text[i + 1..i + 1 + len].to_string();
                i += len + 2;
                TokenKind::Str(value)
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                TokenKind::Ident(text[start..i].to_string())
            }
            _ => {
                let ch = text[i..].chars().next().unwrap_or('?');
                return Err(syntax(
                    start,
                    &["identifier", "`(`", "`!`"],
                    format!("character `{ch}`"),
                ));
            }
        };
        tokens.push(Token {
            kind,
            position: start,
        });
    }
    tokens.push(Token {
        kind: TokenKind::End,
        position: text.len(),
    });
    Ok(tokens)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    params: &'a [Parameter],
}

impl Parser<'_> {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn bump(&mut self) -> Token {
        let tok = self.tokens[self.pos].clone();
        if tok.kind != TokenKind::End {
            self.pos += 1;
        }
        tok
    }

    fn unexpected(&self, expected: &[&str]) -> ParseError {
        let tok = self.peek();
        ParseError::Syntax {
            position: tok.position,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: tok.kind.describe(),
        }
    }

    fn or(&mut self) -> Result<RestrictionAst, ParseError> {
        let mut left = self.and()?;
        while self.peek().kind == TokenKind::Or {
            self.bump();
            let right = self.and()?;
            left = RestrictionAst::Or(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn and(&mut self) -> Result<RestrictionAst, ParseError> {
        let mut left = self.not()?;
        while self.peek().kind == TokenKind::And {
            self.bump();
            let right = self.not()?;
            left = RestrictionAst::And(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn not(&mut self) -> Result<RestrictionAst, ParseError> {
        if self.peek().kind == TokenKind::Not {
            self.bump();
            return Ok(RestrictionAst::Not(Box::new(self.not()?)));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<RestrictionAst, ParseError> {
        match self.peek().kind {
            TokenKind::LParen => {
                self.bump();
                let inner = self.or()?;
                if self.peek().kind != TokenKind::RParen {
                    return Err(self.unexpected(&["`)`", "`&&`", "`||`"]));
                }
                self.bump();
                Ok(inner)
            }
            TokenKind::Ident(_) => self.comparison(),
            _ => Err(self.unexpected(&["identifier", "`(`", "`!`"])),
        }
    }

    fn comparison(&mut self) -> Result<RestrictionAst, ParseError> {
        let tok = self.bump();
        let TokenKind::Ident(name) = tok.kind else {
            unreachable!("comparison starts at an identifier")
        };
        let param = self.lookup_param(&name, tok.position)?;
        let op = match self.peek().kind {
            TokenKind::Eq => CompareOp::Eq,
            TokenKind::Ne => CompareOp::Ne,
            _ => return Err(self.unexpected(&["`=`", "`!=`"])),
        };
        self.bump();
        let rhs_tok = self.peek().clone();
        let left = &self.params[param];
        let rhs = match &rhs_tok.kind {
            TokenKind::Str(value) => Operand::Value(self.lookup_value(param, value, rhs_tok.position)?),
            TokenKind::Ident(ident) => {
                let as_value = left.values.iter().position(|v| v == ident);
                let as_param = self.params.iter().position(|p| &p.name == ident);
                match (as_value, as_param) {
                    (Some(_), Some(_)) => {
                        return Err(ParseError::Ambiguous {
                            name: ident.clone(),
                            parameter: left.name.clone(),
                            position: rhs_tok.position,
                        })
                    }
                    (Some(v), None) => Operand::Value(v),
                    (None, Some(index)) => {
                        let right = &self.params[index];
                        let same_name: Vec<Option<usize>> = left
                            .values
                            .iter()
                            .map(|v| right.values.iter().position(|w| w == v))
                            .collect();
                        if same_name.iter().all(Option::is_none) {
                            return Err(ParseError::NoSharedValues {
                                left: left.name.clone(),
                                right: right.name.clone(),
                                position: rhs_tok.position,
                            });
                        }
                        Operand::Param { index, same_name }
                    }
                    (None, None) => {
                        return Err(ParseError::ValueNotInDomain {
                            parameter: left.name.clone(),
                            value: ident.clone(),
                            position: rhs_tok.position,
                        })
                    }
                }
            }
            _ => return Err(self.unexpected(&["identifier", "string"])),
        };
        self.bump();
        Ok(RestrictionAst::Compare { param, op, rhs })
    }

    fn lookup_param(&self, name: &str, position: usize) -> Result<usize, ParseError> {
        self.params
            .iter()
            .position(|p| p.name == name)
            .ok_or_else(|| ParseError::UnknownParameter {
                name: name.to_string(),
                position,
            })
    }

    fn lookup_value(&self, param: usize, value: &str, position: usize) -> Result<usize, ParseError> {
        let p = &self.params[param];
        p.values
            .iter()
            .position(|v| v == value)
            .ok_or_else(|| ParseError::ValueNotInDomain {
                parameter: p.name.clone(),
                value: value.to_string(),
                position,
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Interaction;

    fn robots() -> Vec<Parameter> {
        let pos = ["pos1", "pos2", "pos3"];
        let grip = ["open", "close"];
        vec![
            Parameter::new("P1", pos).unwrap(),
            Parameter::new("P2", pos).unwrap(),
            Parameter::new("GM1", grip).unwrap(),
            Parameter::new("GM2", grip).unwrap(),
        ]
    }

    fn cmp(param: usize, value: usize) -> RestrictionAst {
        RestrictionAst::Compare {
            param,
            op: CompareOp::Eq,
            rhs: Operand::Value(value),
        }
    }

    #[test]
    fn parses_gripper_conjunction() {
        let ast = parse_restriction("GM1 = close && GM2 = open", &robots()).unwrap();
        assert_eq!(ast, RestrictionAst::And(Box::new(cmp(2, 1)), Box::new(cmp(3, 0))));
    }

    #[test]
    fn parses_parameter_equality() {
        let ast = parse_restriction("P1 = P2", &robots()).unwrap();
        match ast {
            RestrictionAst::Compare {
                param: 0,
                op: CompareOp::Eq,
                rhs: Operand::Param { index: 1, same_name },
            } => assert_eq!(same_name, vec![Some(0), Some(1), Some(2)]),
            other => panic!("unexpected tree {other:?}"),
        }
    }

    #[test]
    fn rejects_value_outside_domain() {
        let err = parse_restriction("GM1 = sideways", &robots()).unwrap_err();
        assert_eq!(
            err,
            ParseError::ValueNotInDomain {
                parameter: "GM1".into(),
                value: "sideways".into(),
                position: 6
            }
        );
    }

    #[test]
    fn rejects_unknown_parameter() {
        let err = parse_restriction("GM3 = open", &robots()).unwrap_err();
        assert!(matches!(err, ParseError::UnknownParameter { ref name, position: 0 } if name == "GM3"));
    }

    #[test]
    fn syntax_errors_carry_position_and_expectation() {
        let err = parse_restriction("GM1 = open &&", &robots()).unwrap_err();
        match err {
            ParseError::Syntax {
                position, expected, ..
            } => {
                assert_eq!(position, 13);
                assert!(expected.contains(&"identifier".to_string()));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_restriction("(GM1 = open", &robots()),
            Err(ParseError::Syntax { position: 11, .. })
        ));
        assert!(matches!(
            parse_restriction("GM1 open", &robots()),
            Err(ParseError::Syntax { position: 4, .. })
        ));
        assert!(matches!(
            parse_restriction("GM1 = open & GM2 = open", &robots()),
            Err(ParseError::Syntax { position: 11, .. })
        ));
        assert!(matches!(parse_restriction("", &robots()), Err(ParseError::Syntax { .. })));
    }

    #[test]
    fn parameters_without_shared_values_cannot_be_compared() {
        let err = parse_restriction("P1 = GM1", &robots()).unwrap_err();
        assert!(matches!(err, ParseError::NoSharedValues { .. }));
    }

    #[test]
    fn ambiguous_identifier_needs_quotes() {
        let params = vec![
            Parameter::new("A", ["B", "x"]).unwrap(),
            Parameter::new("B", ["B", "y"]).unwrap(),
        ];
        assert!(matches!(
            parse_restriction("A = B", &params),
            Err(ParseError::Ambiguous { .. })
        ));
        assert_eq!(
            parse_restriction("A = \"B\"", &params).unwrap(),
            cmp(0, 0)
        );
        let printed = cmp(0, 0).to_source(&params);
        assert_eq!(printed, "A = \"B\"");
    }

    #[test]
    fn and_binds_tighter_than_or() {
        let params = robots();
        let ast = parse_restriction("GM1 = open || GM1 = close && GM2 = open", &params).unwrap();
        assert!(matches!(ast, RestrictionAst::Or(_, ref r) if matches!(**r, RestrictionAst::And(..))));
        assert_eq!(ast.to_source(&params), "GM1 = open || GM1 = close && GM2 = open");
    }

    #[test]
    fn kleene_evaluation() {
        let params = robots();
        let eq = parse_restriction("P1 = P2", &params).unwrap();
        let i = Interaction::from_pairs([(0, 0), (1, 1)]).unwrap();
        assert_eq!(eq.evaluate(&i), TruthValue::False);
        let partial = Interaction::from_pairs([(0, 0)]).unwrap();
        assert_eq!(eq.evaluate(&partial), TruthValue::Unknown);

        let grip = parse_restriction("GM1 = close && GM2 = open", &params).unwrap();
        let t1 = Interaction::from_pairs([(0, 0), (1, 0), (2, 1), (3, 0)]).unwrap();
        assert_eq!(grip.evaluate(&t1), TruthValue::True);
        // False dominates Unknown in a conjunction.
        let half = Interaction::from_pairs([(2, 0)]).unwrap();
        assert_eq!(grip.evaluate(&half), TruthValue::False);
        let or = parse_restriction("GM1 = close || P1 = pos1", &params).unwrap();
        assert_eq!(or.evaluate(&Interaction::from_pairs([(2, 1)]).unwrap()), TruthValue::True);
        assert_eq!(or.evaluate(&half), TruthValue::Unknown);
        let neg = parse_restriction("!(P1 = P2)", &params).unwrap();
        assert_eq!(neg.evaluate(&i), TruthValue::True);
        assert_eq!(neg.evaluate(&partial), TruthValue::Unknown);
    }

    #[test]
    fn truth_tables() {
        use TruthValue::*;
        let all = [True, False, Unknown];
        for a in all {
            for b in all {
                assert_eq!(a.and(b), b.and(a));
                assert_eq!(a.or(b), b.or(a));
                // De Morgan holds in strong Kleene logic.
                assert_eq!(a.and(b).negate(), a.negate().or(b.negate()));
            }
        }
        assert_eq!(Unknown.negate(), Unknown);
        assert_eq!(True.and(Unknown), Unknown);
        assert_eq!(False.or(Unknown), Unknown);
    }
}
