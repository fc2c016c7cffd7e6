use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::StlError;

/// Inclusive window of sample offsets `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interval {
    pub start: usize,
    pub end: usize,
}

impl Interval {
    pub fn new(start: usize, end: usize) -> Result<Self, StlError> {
        if start > end {
            return Err(StlError::IntervalOrder { start, end });
        }
        Ok(Self { start, end })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparison {
    Less,
    Greater,
}

/// A constant point: literal coordinates, or a name resolved from the
/// scenario's symbol table by [`Formula::bind`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Point {
    Literal([f64; 3]),
    Named(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Expr {
    Channel(String),
    Const(f64),
    /// Euclidean distance between vector `vector` (channels `vector.x/y/z`)
    /// and a constant point.
    Norm { vector: String, point: Point },
    Abs(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Scale(f64, Box<Expr>),
}

/// Atomic proposition `expr < threshold` or `expr > threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predicate {
    pub expr: Expr,
    pub comparison: Comparison,
    pub threshold: f64,
}

impl Predicate {
    pub fn new(expr: Expr, comparison: Comparison, threshold: f64) -> Self {
        Self { expr, comparison, threshold }
    }

    /// Signed margin of the comparison given the expression value.
    pub fn margin(&self, value: f64) -> f64 {
        match self.comparison {
            Comparison::Greater => value - self.threshold,
            Comparison::Less => self.threshold - value,
        }
    }

    /// d margin / d value.
    pub fn margin_slope(&self) -> f64 {
        match self.comparison {
            Comparison::Greater => 1.0,
            Comparison::Less => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Formula {
    /// Trivially satisfied; robustness `+inf`.
    True,
    Predicate(Predicate),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    /// Kept as written; evaluated as `Or(Not a, b)`.
    Implies(Box<Formula>, Box<Formula>),
    Eventually(Interval, Box<Formula>),
    Globally(Interval, Box<Formula>),
}

impl Formula {
    pub fn pred(expr: Expr, comparison: Comparison, threshold: f64) -> Self {
        Formula::Predicate(Predicate::new(expr, comparison, threshold))
    }

    pub fn channel_gt(channel: &str, threshold: f64) -> Self {
        Self::pred(Expr::Channel(channel.into()), Comparison::Greater, threshold)
    }

    pub fn channel_lt(channel: &str, threshold: f64) -> Self {
        Self::pred(Expr::Channel(channel.into()), Comparison::Less, threshold)
    }

    pub fn not(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Self {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Self {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn implies(a: Formula, b: Formula) -> Self {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn eventually(start: usize, end: usize, f: Formula) -> Result<Self, StlError> {
        Ok(Formula::Eventually(Interval::new(start, end)?, Box::new(f)))
    }

    pub fn globally(start: usize, end: usize, f: Formula) -> Result<Self, StlError> {
        Ok(Formula::Globally(Interval::new(start, end)?, Box::new(f)))
    }

    /// Conjunction of all formulas; `True` for an empty list.
    pub fn all(items: impl IntoIterator<Item = Formula>) -> Self {
        items
            .into_iter()
            .reduce(Formula::and)
            .unwrap_or(Formula::True)
    }

    /// Axis-aligned box membership `lo < v < hi` for vector `vector`,
    /// expanded into a conjunction of six channel predicates.
    pub fn inside_box(vector: &str, lo: [f64; 3], hi: [f64; 3]) -> Self {
        let mut parts = Vec::with_capacity(6);
        for (axis, name) in ["x", "y", "z"].iter().enumerate() {
            let ch = format!("{vector}.{name}");
            parts.push(Self::channel_gt(&ch, lo[axis]));
            parts.push(Self::channel_lt(&ch, hi[axis]));
        }
        Self::all(parts)
    }

    /// Samples needed beyond `t0` to evaluate: nested sum of interval upper bounds.
    pub fn horizon(&self) -> usize {
        match self {
            Formula::True | Formula::Predicate(_) => 0,
            Formula::Not(f) => f.horizon(),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                a.horizon().max(b.horizon())
            }
            Formula::Eventually(i, f) | Formula::Globally(i, f) => i.end + f.horizon(),
        }
    }

    pub fn is_trivial(&self) -> bool {
        matches!(self, Formula::True)
    }

    /// Direct children, in order.
    pub fn children(&self) -> Vec<&Formula> {
        match self {
            Formula::True | Formula::Predicate(_) => vec![],
            Formula::Not(f) | Formula::Eventually(_, f) | Formula::Globally(_, f) => vec![f],
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => vec![a, b],
        }
    }

    /// Pre-order list of all subformulas, including `self`.
    pub fn subformulas(&self) -> Vec<&Formula> {
        let mut out = vec![self];
        for c in self.children() {
            out.extend(c.subformulas());
        }
        out
    }

    /// Names of points not yet bound to coordinates.
    pub fn unbound_points(&self) -> Vec<String> {
        let mut names = Vec::new();
        for f in self.subformulas() {
            if let Formula::Predicate(p) = f {
                p.expr.visit_points(&mut |pt| {
                    if let Point::Named(n) = pt {
                        if !names.contains(n) {
                            names.push(n.clone());
                        }
                    }
                });
            }
        }
        names
    }

    /// Replaces named points with coordinates from `symbols`.
    pub fn bind(&self, symbols: &BTreeMap<String, [f64; 3]>) -> Result<Formula, StlError> {
        Ok(match self {
            Formula::True => Formula::True,
            Formula::Predicate(p) => Formula::Predicate(Predicate {
                expr: p.expr.bind(symbols)?,
                comparison: p.comparison,
                threshold: p.threshold,
            }),
            Formula::Not(f) => Formula::not(f.bind(symbols)?),
            Formula::And(a, b) => Formula::and(a.bind(symbols)?, b.bind(symbols)?),
            Formula::Or(a, b) => Formula::or(a.bind(symbols)?, b.bind(symbols)?),
            Formula::Implies(a, b) => Formula::implies(a.bind(symbols)?, b.bind(symbols)?),
            Formula::Eventually(i, f) => Formula::Eventually(*i, Box::new(f.bind(symbols)?)),
            Formula::Globally(i, f) => Formula::Globally(*i, Box::new(f.bind(symbols)?)),
        })
    }

    /// Channels read by the formula's predicates (vectors expanded).
    pub fn channels(&self) -> Vec<String> {
        let mut out = Vec::new();
        for f in self.subformulas() {
            if let Formula::Predicate(p) = f {
                p.expr.collect_channels(&mut out);
            }
        }
        out.sort();
        out.dedup();
        out
    }
}

impl Expr {
    fn visit_points(&self, visit: &mut dyn FnMut(&Point)) {
        match self {
            Expr::Channel(_) | Expr::Const(_) => {}
            Expr::Norm { point, .. } => visit(point),
            Expr::Abs(e) | Expr::Scale(_, e) => e.visit_points(visit),
            Expr::Add(a, b) | Expr::Sub(a, b) => {
                a.visit_points(visit);
                b.visit_points(visit);
            }
        }
    }

    fn bind(&self, symbols: &BTreeMap<String, [f64; 3]>) -> Result<Expr, StlError> {
        Ok(match self {
            Expr::Channel(_) | Expr::Const(_) => self.clone(),
            Expr::Norm { vector, point } => {
                let point = match point {
                    Point::Literal(_) => point.clone(),
                    Point::Named(n) => Point::Literal(
                        *symbols.get(n).ok_or_else(|| StlError::UnboundPoint(n.clone()))?,
                    ),
                };
                Expr::Norm { vector: vector.clone(), point }
            }
            Expr::Abs(e) => Expr::Abs(Box::new(e.bind(symbols)?)),
            Expr::Scale(k, e) => Expr::Scale(*k, Box::new(e.bind(symbols)?)),
            Expr::Add(a, b) => Expr::Add(Box::new(a.bind(symbols)?), Box::new(b.bind(symbols)?)),
            Expr::Sub(a, b) => Expr::Sub(Box::new(a.bind(symbols)?), Box::new(b.bind(symbols)?)),
        })
    }

    fn collect_channels(&self, out: &mut Vec<String>) {
        match self {
            Expr::Channel(c) => out.push(c.clone()),
            Expr::Const(_) => {}
            Expr::Norm { vector, .. } => {
                for a in ["x", "y", "z"] {
                    out.push(format!("{vector}.{a}"));
                }
            }
            Expr::Abs(e) | Expr::Scale(_, e) => e.collect_channels(out),
            Expr::Add(a, b) | Expr::Sub(a, b) => {
                a.collect_channels(out);
                b.collect_channels(out);
            }
        }
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Point::Literal([x, y, z]) => write!(f, "[{x}, {y}, {z}]"),
            Point::Named(n) => f.write_str(n),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Channel(c) => f.write_str(c),
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Norm { vector, point } => write!(f, "norm2({vector} - {point})"),
            Expr::Abs(e) => write!(f, "abs({e})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Scale(k, e) => write!(f, "({k} * {e})"),
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::True => f.write_str("true"),
            Formula::Predicate(p) => {
                let op = match p.comparison {
                    Comparison::Less => "<",
                    Comparison::Greater => ">",
                };
                write!(f, "{} {op} {}", p.expr, p.threshold)
            }
            Formula::Not(a) => write!(f, "!({a})"),
            Formula::And(a, b) => write!(f, "({a} & {b})"),
            Formula::Or(a, b) => write!(f, "({a} | {b})"),
            Formula::Implies(a, b) => write!(f, "({a} -> {b})"),
            Formula::Eventually(i, a) => write!(f, "F[{},{}]({a})", i.start, i.end),
            Formula::Globally(i, a) => write!(f, "G[{},{}]({a})", i.start, i.end),
        }
    }
}
