//! LTL chain to behaviour-tree blueprint.
//!
//! `U(F psi_1, U(F psi_2, ...))` becomes a root Sequence over the subtasks in
//! window order, and each `psi = PoC | (PrC & U(C_STL, Action))` becomes
//!
//! ```text
//! Fallback(Condition(PoC), Sequence(Condition(PrC), Parallel(Condition(monitor), Action)))
//! ```
//!
//! The PoC condition node of subtask `i` holds when the post-condition of
//! `i` *or of any later subtask* holds. Without that regression a reactive
//! root would re-run `pick` once `place` releases the object.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ltl::{atomic_action, Atom, LtlForm, LtlFormula};
use super::{ActionSpec, Condition, Symbol, TaskError, SCHEMA_VERSION};
use crate::stl::{parse, Formula};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BtNode {
    Sequence { children: Vec<BtNode> },
    Fallback { children: Vec<BtNode> },
    Parallel { success_threshold: usize, failure_threshold: usize, children: Vec<BtNode> },
    Condition { id: String },
    Action(ActionNode),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionNode {
    pub subtask: usize,
    pub name: String,
    #[serde(flatten)]
    pub spec: ActionSpec,
    #[serde(with = "formula_text")]
    pub constraint: Formula,
    /// Post-condition the action must establish to report Success.
    pub post: String,
}

/// What a condition id resolves to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConditionExpr {
    True,
    Symbol(Symbol),
    Stl {
        #[serde(with = "formula_text")]
        formula: Formula,
    },
    AnyOf { ids: Vec<String> },
    /// Runtime monitor of the constraint on action node `subtask`.
    Monitor { subtask: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BtBlueprint {
    pub schema_version: u32,
    pub root: BtNode,
    pub symbols: BTreeMap<String, ConditionExpr>,
}

impl BtBlueprint {
    pub fn actions(&self) -> Vec<&ActionNode> {
        fn walk<'a>(n: &'a BtNode, out: &mut Vec<&'a ActionNode>) {
            match n {
                BtNode::Sequence { children } | BtNode::Fallback { children } | BtNode::Parallel { children, .. } => {
                    children.iter().for_each(|c| walk(c, out))
                }
                BtNode::Action(a) => out.push(a),
                BtNode::Condition { .. } => {}
            }
        }
        let mut out = Vec::new();
        walk(&self.root, &mut out);
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("blueprint serialises")
    }

    pub fn from_json(text: &str) -> Result<Self, TaskError> {
        Ok(serde_json::from_str(text)?)
    }
}

fn condition_expr(c: &Condition) -> ConditionExpr {
    match c {
        Condition::True => ConditionExpr::True,
        Condition::Symbol(s) => ConditionExpr::Symbol(s.clone()),
        Condition::Stl(f) => ConditionExpr::Stl { formula: f.clone() },
    }
}

/// Splits the right-nested chain into its `F psi` links.
fn chain(f: &LtlFormula) -> Result<Vec<&LtlFormula>, TaskError> {
    match f {
        LtlFormula::True => Ok(Vec::new()),
        LtlFormula::Eventually(_) => Ok(vec![f]),
        LtlFormula::Until(head, rest) if matches!(**head, LtlFormula::Eventually(_)) => {
            if matches!(**rest, LtlFormula::True) {
                return Err(TaskError::Unsupported("chain terminated by `true`".into()));
            }
            let mut out = vec![&**head];
            out.extend(chain(rest)?);
            Ok(out)
        }
        other => Err(TaskError::Unsupported(format!("expected an Until/Eventually chain, found {other:?}"))),
    }
}

fn subtask_of(link: &LtlFormula, n: usize) -> Result<usize, TaskError> {
    let LtlFormula::Eventually(psi) = link else { unreachable!() };
    let i = match &**psi {
        LtlFormula::Or(p, _) => match **p {
            LtlFormula::Prop(Atom::PostCondition(i)) => i,
            _ => return Err(TaskError::Unsupported("atomic action must start with its post-condition".into())),
        },
        _ => return Err(TaskError::Unsupported("atomic action is not a disjunction".into())),
    };
    if i >= n || **psi != atomic_action(i) {
        return Err(TaskError::Unsupported(format!("link {i} is not of the form PoC | (PrC & U(C_STL, Action))")));
    }
    Ok(i)
}

pub fn ltl_to_bt(form: &LtlForm) -> Result<BtBlueprint, TaskError> {
    let n = form.atoms.len();
    let links = chain(&form.formula)?;
    let order = links.iter().map(|l| subtask_of(l, n)).collect::<Result<Vec<_>, _>>()?;
    if order != (0..n).collect::<Vec<_>>() {
        return Err(TaskError::Unsupported(format!("chain visits subtasks {order:?}, expected 0..{n} in order")));
    }
    for w in form.atoms.windows(2) {
        if w[1].window.0 < w[0].window.1 {
            return Err(TaskError::OverlappingWindows { first: w[0].name.clone(), second: w[1].name.clone() });
        }
    }

    let mut symbols = BTreeMap::new();
    let post_ids: Vec<String> = form.atoms.iter().map(|a| format!("post:{}", a.name)).collect();
    for (id, a) in post_ids.iter().zip(&form.atoms) {
        symbols.insert(id.clone(), condition_expr(&a.post));
    }
    let mut children = Vec::with_capacity(n);
    for (i, a) in form.atoms.iter().enumerate() {
        let done = format!("done:{}", a.name);
        symbols.insert(done.clone(), ConditionExpr::AnyOf { ids: post_ids[i..].to_vec() });
        let pre = format!("pre:{}", a.name);
        symbols.insert(pre.clone(), condition_expr(&a.pre));
        let monitor = format!("monitor:{}", a.name);
        symbols.insert(monitor.clone(), ConditionExpr::Monitor { subtask: i });
        let action = BtNode::Action(ActionNode {
            subtask: i,
            name: a.name.clone(),
            spec: a.action.clone(),
            constraint: a.c_stl.clone(),
            post: post_ids[i].clone(),
        });
        children.push(BtNode::Fallback {
            children: vec![
                BtNode::Condition { id: done },
                BtNode::Sequence {
                    children: vec![
                        BtNode::Condition { id: pre },
                        BtNode::Parallel {
                            success_threshold: 2,
                            failure_threshold: 0,
                            children: vec![BtNode::Condition { id: monitor }, action],
                        },
                    ],
                },
            ],
        });
    }
    Ok(BtBlueprint { schema_version: SCHEMA_VERSION, root: BtNode::Sequence { children }, symbols })
}

impl std::fmt::Display for ActionNode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {} {} -> {}", self.name, self.spec.skill, self.spec.init, self.spec.goal)
    }
}


mod formula_text {
    use super::{parse, Formula};
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(f: &Formula, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&f.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Formula, D::Error> {
        let text = String::deserialize(d)?;
        parse(&text).map_err(D::Error::custom)
    }
}
