//! Long-horizon task files: an ordered list of subtasks, each an atomic
//! action with pre-condition, post-condition, DMP skill and motion
//! constraint. Compiled to an LTL chain and from there to a behaviour tree.

mod blueprint;
mod ltl;

pub use blueprint::{ltl_to_bt, ActionNode, BtBlueprint, BtNode, ConditionExpr};
pub use ltl::{abstract_to_ltl, Atom, LtlForm, LtlFormula, SubtaskAtoms};

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stl::{parse, Formula, StlError};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("malformed task file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("subtask `{subtask}` is missing its {component}")]
    Missing { subtask: String, component: &'static str },
    #[error("subtask `{subtask}`: window [{start}, {end}] is empty or reversed")]
    BadWindow { subtask: String, start: f64, end: f64 },
    #[error("windows of `{first}` and `{second}` overlap or are out of order")]
    OverlappingWindows { first: String, second: String },
    #[error("subtask `{subtask}`, {field}: {source}")]
    Stl { subtask: String, field: &'static str, source: StlError },
    #[error("subtask `{subtask}`, {field}: `{text}` is not a predicate")]
    BadPredicate { subtask: String, field: &'static str, text: String },
    #[error("duplicate subtask name `{0}`")]
    DuplicateName(String),
    #[error("subtask name `{0}` must be an identifier (letters, digits, `_`)")]
    BadName(String),
    #[error("unsupported structure: {0}")]
    Unsupported(String),
}

/// A symbolic predicate such as `Picked` or `At(cup, goal)`, or its negation.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Symbol {
    pub name: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub args: Vec<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub negated: bool,
}

impl Symbol {
    /// Key under which a world resolves this predicate (`At(cup,goal)`).
    pub fn id(&self) -> String {
        if self.args.is_empty() {
            self.name.clone()
        } else {
            format!("{}({})", self.name, self.args.join(","))
        }
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negated {
            f.write_str("!")?;
        }
        f.write_str(&self.id())
    }
}

/// Pre- or post-condition: a symbolic predicate, an instantaneous STL
/// formula over world channels, or `true`.
#[derive(Debug, Clone, PartialEq)]
pub enum Condition {
    True,
    Symbol(Symbol),
    Stl(Formula),
}

impl Condition {
    /// `true`, `[!]Name`, `[!]Name(arg, ...)`, or else an STL formula.
    pub fn parse(text: &str) -> Result<Self, StlError> {
        let t = text.trim();
        if t == "true" {
            return Ok(Condition::True);
        }
        if let Some(sym) = parse_symbol(t) {
            return Ok(Condition::Symbol(sym));
        }
        Ok(Condition::Stl(parse(t)?))
    }
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn parse_symbol(t: &str) -> Option<Symbol> {
    let (negated, body) = match t.strip_prefix('!') {
        Some(rest) => (true, rest.trim()),
        None => (false, t),
    };
    let (name, args) = match body.find('(') {
        Some(i) => {
            let inner = body[i + 1..].strip_suffix(')')?;
            let args: Vec<String> = inner.split(',').map(|a| a.trim().to_owned()).collect();
            if !args.iter().all(|a| is_ident(a)) {
                return None;
            }
            (body[..i].trim(), args)
        }
        None => (body, Vec::new()),
    };
    (is_ident(name) && name != "true" && name != "norm2" && name != "abs")
        .then(|| Symbol { name: name.to_owned(), args, negated })
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Condition::True => f.write_str("true"),
            Condition::Symbol(s) => s.fmt(f),
            Condition::Stl(p) => p.fmt(f),
        }
    }
}

/// Where an action starts or ends: a named world entity (object, region,
/// end-effector `ee`), optionally offset, or a fixed point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Binding {
    Named(String),
    Point([f64; 3]),
    Offset { at: String, offset: [f64; 3] },
}

impl fmt::Display for Binding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Binding::Named(n) => f.write_str(n),
            Binding::Point([x, y, z]) => write!(f, "[{x}, {y}, {z}]"),
            Binding::Offset { at, offset: [x, y, z] } => write!(f, "{at} + [{x}, {y}, {z}]"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSpec {
    pub skill: String,
    pub init: Binding,
    pub goal: Binding,
    /// Attach `object` (default: the goal entity) on completion.
    #[serde(default)]
    pub grasp: bool,
    /// Detach whatever is held on completion.
    #[serde(default)]
    pub release: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object: Option<String>,
    /// Target end-effector orientation `[w, x, y, z]`; adds an orientation DMP.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orientation: Option<[f64; 4]>,
}

/// One atomic action: the four slots plus its ordering window.
#[derive(Debug, Clone, PartialEq)]
pub struct Subtask {
    pub name: String,
    pub window: (f64, f64),
    pub pre: Condition,
    pub post: Condition,
    pub action: ActionSpec,
    pub c_stl: Formula,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    pub subtasks: Vec<Subtask>,
}

impl TaskSpec {
    pub fn len(&self) -> usize {
        self.subtasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subtasks.is_empty()
    }
}

/// On-disk form. Every slot is optional here so that a missing one is
/// reported by name rather than as a generic decoding error.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TaskFile {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    pub subtasks: Vec<SubtaskFile>,
}

fn default_schema() -> u32 {
    SCHEMA_VERSION
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SubtaskFile {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pre: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub post: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<ActionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_stl: Option<String>,
}

pub fn parse_task(text: &str) -> Result<TaskSpec, TaskError> {
    let file: TaskFile = serde_json::from_str(text)?;
    file.validate()
}

impl TaskFile {
    pub fn validate(&self) -> Result<TaskSpec, TaskError> {
        let mut subtasks: Vec<Subtask> = Vec::with_capacity(self.subtasks.len());
        let mut names = BTreeMap::new();
        for s in &self.subtasks {
            if !is_ident(&s.name) {
                // names end up in symbol ids and log channel names
                return Err(TaskError::BadName(s.name.clone()));
            }
            if names.insert(s.name.clone(), ()).is_some() {
                return Err(TaskError::DuplicateName(s.name.clone()));
            }
            let missing = |component| TaskError::Missing { subtask: s.name.clone(), component };
            let [start, end] = s.window.ok_or_else(|| missing("window"))?;
            if !(start < end) || start < 0.0 {
                return Err(TaskError::BadWindow { subtask: s.name.clone(), start, end });
            }
            let cond = |field: &'static str, text: &Option<String>| -> Result<Condition, TaskError> {
                let text = text.as_deref().ok_or_else(|| missing(field))?;
                Condition::parse(text).map_err(|source| TaskError::Stl { subtask: s.name.clone(), field, source })
            };
            let pre = cond("pre-condition", &s.pre)?;
            if let Condition::Stl(_) = pre {
                // pre-conditions gate ticking and must be symbolic
                return Err(TaskError::BadPredicate {
                    subtask: s.name.clone(),
                    field: "pre-condition",
                    text: s.pre.clone().unwrap_or_default(),
                });
            }
            let post = cond("post-condition", &s.post)?;
            let action = s.action.clone().ok_or_else(|| missing("action"))?;
            let c_text = s.c_stl.as_deref().ok_or_else(|| missing("c_stl"))?;
            let c_stl = if c_text.trim().is_empty() {
                Formula::True
            } else {
                parse(c_text).map_err(|source| TaskError::Stl { subtask: s.name.clone(), field: "c_stl", source })?
            };
            if let Some(prev) = subtasks.last() {
                if start < prev.window.1 {
                    return Err(TaskError::OverlappingWindows { first: prev.name.clone(), second: s.name.clone() });
                }
            }
            subtasks.push(Subtask { name: s.name.clone(), window: (start, end), pre, post, action, c_stl });
        }
        Ok(TaskSpec { subtasks })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symbols_and_formulas() {
        assert_eq!(Condition::parse("true").unwrap(), Condition::True);
        let Condition::Symbol(s) = Condition::parse("!At(cup, goal)").unwrap() else { panic!() };
        assert!(s.negated);
        assert_eq!(s.id(), "At(cup,goal)");
        assert!(matches!(Condition::parse("cup.z > 0.1").unwrap(), Condition::Stl(_)));
        assert!(Condition::parse("Picked(").is_err());
    }
}
