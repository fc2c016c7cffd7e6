//! Recursive-descent parser for the textual formula grammar.
//!
//! ```text
//! formula  := implies
//! implies  := or ('->' implies)?
//! or       := and ('|' and)*
//! and      := unary ('&' unary)*
//! unary    := '!' unary | 'G' interval '(' formula ')' | 'F' interval '(' formula ')'
//!           | 'true' | '(' formula ')' | pred
//! interval := '[' number ',' number ']'
//! pred     := expr ('<' | '>') number
//! expr     := term (('+' | '-') term)*
//! term     := number '*' factor | factor
//! factor   := ident ('.' ident)? | number | '-' factor | 'norm2' '(' ident '-' point ')'
//!           | 'abs' '(' expr ')' | '(' expr ')'
//! point    := '[' number ',' number ',' number ']' | ident
//! ```

use super::ast::{Comparison, Expr, Formula, Interval, Point, Predicate};
use super::StlError;

/// How interval bounds in the text are interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum TimeUnit {
    /// Bounds are sample offsets and must be non-negative integers.
    #[default]
    Samples,
    /// Bounds are seconds, converted to samples with `round(bound / dt)`.
    Seconds { dt: f64 },
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    pub time_unit: TimeUnit,
}

pub fn parse(text: &str) -> Result<Formula, StlError> {
    parse_with(text, ParseOptions::default())
}

pub fn parse_with(text: &str, options: ParseOptions) -> Result<Formula, StlError> {
    let tokens = lex(text)?;
    let mut p = Parser { tokens, pos: 0, options };
    let f = p.formula()?;
    match p.peek() {
        Tok::Eof => Ok(f),
        _ => Err(p.error("unexpected trailing input")),
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(f64),
    LBracket,
    RBracket,
    LParen,
    RParen,
    Comma,
    Dot,
    Amp,
    Pipe,
    Bang,
    Less,
    Greater,
    Arrow,
    Minus,
    Plus,
    Star,
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, StlError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        let (start_line, start_col) = (line, col);
        let push = |out: &mut Vec<Token>, tok| out.push(Token { tok, line: start_line, column: start_col });
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let s = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            col += i - s;
            push(&mut out, Tok::Ident(chars[s..i].iter().collect()));
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let s = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let literal: String = chars[s..i].iter().collect();
            let value: f64 = literal.parse().map_err(|_| StlError::Syntax {
                line: start_line,
                column: start_col,
                message: format!("malformed number `{literal}`"),
            })?;
            col += i - s;
            push(&mut out, Tok::Number(value));
            continue;
        }
        let (tok, width) = match c {
            '[' => (Tok::LBracket, 1),
            ']' => (Tok::RBracket, 1),
            '(' => (Tok::LParen, 1),
            ')' => (Tok::RParen, 1),
            ',' => (Tok::Comma, 1),
            '.' => (Tok::Dot, 1),
            '&' => (Tok::Amp, 1),
            '|' => (Tok::Pipe, 1),
            '!' => (Tok::Bang, 1),
            '<' => (Tok::Less, 1),
            '>' => (Tok::Greater, 1),
            '+' => (Tok::Plus, 1),
            '*' => (Tok::Star, 1),
            '-' if chars.get(i + 1) == Some(&'>') => (Tok::Arrow, 2),
            '-' => (Tok::Minus, 1),
            other => {
                return Err(StlError::Syntax {
                    line,
                    column: col,
                    message: format!("unexpected character `{other}`"),
                })
            }
        };
        push(&mut out, tok);
        i += width;
        col += width;
    }
    out.push(Token { tok: Tok::Eof, line, column: col });
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    options: ParseOptions,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        let idx = (self.pos + offset).min(self.tokens.len() - 1);
        &self.tokens[idx].tok
    }

    fn bump(&mut self) -> Tok {
        let t = self.tokens[self.pos].tok.clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn error(&self, message: impl Into<String>) -> StlError {
        let t = &self.tokens[self.pos];
        StlError::Syntax { line: t.line, column: t.column, message: message.into() }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), StlError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.error(format!("expected {what}")))
        }
    }

    fn formula(&mut self) -> Result<Formula, StlError> {
        let lhs = self.or()?;
        if *self.peek() == Tok::Arrow {
            self.bump();
            let rhs = self.formula()?;
            return Ok(Formula::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<Formula, StlError> {
        let mut f = self.and()?;
        while *self.peek() == Tok::Pipe {
            self.bump();
            f = Formula::or(f, self.and()?);
        }
        Ok(f)
    }

    fn and(&mut self) -> Result<Formula, StlError> {
        let mut f = self.unary()?;
        while *self.peek() == Tok::Amp {
            self.bump();
            f = Formula::and(f, self.unary()?);
        }
        Ok(f)
    }

    fn unary(&mut self) -> Result<Formula, StlError> {
        match self.peek().clone() {
            Tok::Bang => {
                self.bump();
                Ok(Formula::not(self.unary()?))
            }
            Tok::Ident(name) if (name == "G" || name == "F") && *self.peek_at(1) == Tok::LBracket => {
                self.bump();
                let interval = self.interval()?;
                self.expect(Tok::LParen, "`(` after interval")?;
                let body = self.formula()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(if name == "G" {
                    Formula::Globally(interval, Box::new(body))
                } else {
                    Formula::Eventually(interval, Box::new(body))
                })
            }
            Tok::Ident(name) if name == "true" && *self.peek_at(1) != Tok::Dot => {
                self.bump();
                Ok(Formula::True)
            }
            Tok::LParen => {
                let save = self.pos;
                self.bump();
                match self.formula() {
                    Ok(f) if *self.peek() == Tok::RParen => {
                        self.bump();
                        Ok(f)
                    }
                    first => {
                        // `(x + 1) > 0` is a parenthesised expression, not a formula.
                        let err = match first {
                            Ok(_) => self.error("expected `)`"),
                            Err(e) => e,
                        };
                        self.pos = save;
                        self.predicate().map_err(|_| err)
                    }
                }
            }
            _ => self.predicate(),
        }
    }

    fn interval(&mut self) -> Result<Interval, StlError> {
        self.expect(Tok::LBracket, "`[`")?;
        let (line, column) = (self.tokens[self.pos].line, self.tokens[self.pos].column);
        let a = self.bound()?;
        self.expect(Tok::Comma, "`,` in interval")?;
        let b = self.bound()?;
        self.expect(Tok::RBracket, "`]`")?;
        if a > b {
            return Err(StlError::Syntax {
                line,
                column,
                message: format!("interval lower bound {a} exceeds upper bound {b}"),
            });
        }
        Ok(Interval { start: a, end: b })
    }

    fn bound(&mut self) -> Result<usize, StlError> {
        let v = match self.peek() {
            Tok::Number(v) => *v,
            _ => return Err(self.error("expected interval bound")),
        };
        self.bump();
        match self.options.time_unit {
            TimeUnit::Samples => {
                if v.fract() != 0.0 {
                    return Err(self.error(format!("sample bound `{v}` must be an integer")));
                }
                Ok(v as usize)
            }
            TimeUnit::Seconds { dt } => Ok((v / dt).round() as usize),
        }
    }

    fn signed_number(&mut self) -> Result<f64, StlError> {
        let neg = if *self.peek() == Tok::Minus {
            self.bump();
            true
        } else {
            false
        };
        match *self.peek() {
            Tok::Number(v) => {
                self.bump();
                Ok(if neg { -v } else { v })
            }
            _ => Err(self.error("expected number")),
        }
    }

    fn predicate(&mut self) -> Result<Formula, StlError> {
        let expr = self.expr()?;
        let comparison = match self.peek() {
            Tok::Less => Comparison::Less,
            Tok::Greater => Comparison::Greater,
            _ => return Err(self.error("expected `<` or `>` in predicate")),
        };
        self.bump();
        let threshold = self.signed_number()?;
        Ok(Formula::Predicate(Predicate { expr, comparison, threshold }))
    }

    fn expr(&mut self) -> Result<Expr, StlError> {
        let mut e = self.term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    e = Expr::Add(Box::new(e), Box::new(self.term()?));
                }
                Tok::Minus => {
                    self.bump();
                    e = Expr::Sub(Box::new(e), Box::new(self.term()?));
                }
                _ => return Ok(e),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, StlError> {
        let scaled = match (self.peek(), self.peek_at(1), self.peek_at(2)) {
            (Tok::Number(_), Tok::Star, _) => true,
            (Tok::Minus, Tok::Number(_), Tok::Star) => true,
            _ => false,
        };
        if scaled {
            let k = self.signed_number()?;
            self.bump();
            return Ok(Expr::Scale(k, Box::new(self.factor()?)));
        }
        self.factor()
    }

    fn factor(&mut self) -> Result<Expr, StlError> {
        match self.bump() {
            Tok::Number(v) => Ok(Expr::Const(v)),
            Tok::Minus => match self.peek() {
                Tok::Number(v) => {
                    let v = *v;
                    self.bump();
                    Ok(Expr::Const(-v))
                }
                _ => Ok(Expr::Scale(-1.0, Box::new(self.factor()?))),
            },
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) if name == "norm2" && *self.peek() == Tok::LParen => {
                self.bump();
                let vector = self.ident()?;
                self.expect(Tok::Minus, "`-` in norm2(vector - point)")?;
                let point = self.point()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(Expr::Norm { vector, point })
            }
            Tok::Ident(name) if name == "abs" && *self.peek() == Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(Expr::Abs(Box::new(e)))
            }
            Tok::Ident(_) => {
                self.pos -= 1;
                Ok(Expr::Channel(self.ident()?))
            }
            _ => {
                self.pos -= 1;
                Err(self.error("expected expression"))
            }
        }
    }

    /// `ident ('.' ident)*`
    fn ident(&mut self) -> Result<String, StlError> {
        let mut name = match self.bump() {
            Tok::Ident(s) => s,
            _ => {
                self.pos -= 1;
                return Err(self.error("expected identifier"));
            }
        };
        while *self.peek() == Tok::Dot {
            self.bump();
            match self.bump() {
                Tok::Ident(s) => {
                    name.push('.');
                    name.push_str(&s);
                }
                _ => {
                    self.pos -= 1;
                    return Err(self.error("expected identifier after `.`"));
                }
            }
        }
        Ok(name)
    }

    fn point(&mut self) -> Result<Point, StlError> {
        if *self.peek() == Tok::LBracket {
            self.bump();
            let x = self.signed_number()?;
            self.expect(Tok::Comma, "`,`")?;
            let y = self.signed_number()?;
            self.expect(Tok::Comma, "`,`")?;
            let z = self.signed_number()?;
            self.expect(Tok::RBracket, "`]`")?;
            Ok(Point::Literal([x, y, z]))
        } else {
            Ok(Point::Named(self.ident()?))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn norm(vector: &str, point: Point) -> Expr {
        Expr::Norm { vector: vector.into(), point }
    }

    #[test]
    fn obstacle_form() {
        let f = parse("G[0,150](norm2(y - [0,0,0]) > 0.5)").unwrap();
        assert_eq!(
            f,
            Formula::Globally(
                Interval { start: 0, end: 150 },
                Box::new(Formula::pred(
                    norm("y", Point::Literal([0.0, 0.0, 0.0])),
                    Comparison::Greater,
                    0.5
                ))
            )
        );
    }

    #[test]
    fn via_point_with_named_point() {
        let f = parse("F[0,150](norm2(y - via) < 0.01)").unwrap();
        match f {
            Formula::Eventually(i, body) => {
                assert_eq!(i, Interval { start: 0, end: 150 });
                assert_eq!(
                    *body,
                    Formula::pred(norm("y", Point::Named("via".into())), Comparison::Less, 0.01)
                );
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn space_limit_conjunction() {
        let f = parse("G[90,150](y.y > -4 & y.y < 2)").unwrap();
        assert_eq!(
            f,
            Formula::Globally(
                Interval { start: 90, end: 150 },
                Box::new(Formula::and(
                    Formula::channel_gt("y.y", -4.0),
                    Formula::channel_lt("y.y", 2.0)
                ))
            )
        );
    }

    #[test]
    fn precedence_and_implication() {
        let f = parse("a > 0 | b > 0 & c > 0 -> !d < 1").unwrap();
        let expected = Formula::implies(
            Formula::or(
                Formula::channel_gt("a", 0.0),
                Formula::and(Formula::channel_gt("b", 0.0), Formula::channel_gt("c", 0.0)),
            ),
            Formula::not(Formula::channel_lt("d", 1.0)),
        );
        assert_eq!(f, expected);
    }

    #[test]
    fn parenthesised_expression_predicate() {
        let f = parse("(x + 1) > 0").unwrap();
        assert_eq!(
            f,
            Formula::pred(
                Expr::Add(Box::new(Expr::Channel("x".into())), Box::new(Expr::Const(1.0))),
                Comparison::Greater,
                0.0
            )
        );
        let g = parse("(-2 * x - abs(y.z)) < 3").unwrap();
        assert_eq!(g.to_string(), "((-2 * x) - abs(y.z)) < 3");
    }

    #[test]
    fn reversed_interval_rejected_with_position() {
        match parse("G[5,2](x > 0)") {
            Err(StlError::Syntax { line, column, message }) => {
                assert_eq!((line, column), (1, 3));
                assert!(message.contains("exceeds"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn syntax_errors_report_location() {
        match parse("G[0,10](x > 0)\n  & y >") {
            Err(StlError::Syntax { line, column, .. }) => assert_eq!((line, column), (2, 8)),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse("x ? 1").is_err());
        assert!(parse("G[0.5,2](x > 0)").is_err());
        assert!(parse("x > 0 )").is_err());
    }

    #[test]
    fn unknown_channels_parse_fine() {
        assert!(parse("no_such.channel > 3").is_ok());
    }

    #[test]
    fn seconds_are_converted_by_rounding() {
        let opts = ParseOptions { time_unit: TimeUnit::Seconds { dt: 0.02 } };
        let f = parse_with("G[0.6,2.4](vel.z < 0.005)", opts).unwrap();
        assert_eq!(f.horizon(), 120);
        match f {
            Formula::Globally(i, _) => assert_eq!(i, Interval { start: 30, end: 120 }),
            _ => unreachable!(),
        }
    }

    #[test]
    fn true_literal() {
        assert_eq!(parse("true").unwrap(), Formula::True);
        assert_eq!(parse("true & x > 1").unwrap().to_string(), "(true & x > 1)");
    }

    #[test]
    fn pretty_print_round_trip() {
        for text in [
            "G[0,150](norm2(y - [0,0,0]) > 0.5)",
            "F[0,150](norm2(y - via) < 0.01)",
            "G[90,150](y.y > -4 & y.y < 2)",
            "G[30,120](vel.z < 0.005)",
            "!(a > 1) -> F[1,3](G[0,2](b < -1e-3 | abs(c - 2) > 0.25))",
        ] {
            let f = parse(text).unwrap();
            let again = parse(&f.to_string()).unwrap();
            assert_eq!(f, again, "{text}");
        }
    }
}
