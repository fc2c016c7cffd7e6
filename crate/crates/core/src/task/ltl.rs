//! LTL abstraction of a task: spatial relations become atomic propositions
//! and every atomic action becomes `PoC | (PrC & (C_STL U Action))`; the
//! task is the right-nested chain `U(F psi_1, U(F psi_2, ... F psi_N))`.

use std::fmt;

use super::{ActionSpec, Condition, TaskSpec};
use crate::stl::Formula;

#[derive(Debug, Clone, PartialEq)]
pub enum Atom {
    PostCondition(usize),
    PreCondition(usize),
    Constraint(usize),
    Action(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub enum LtlFormula {
    True,
    Prop(Atom),
    Not(Box<LtlFormula>),
    And(Box<LtlFormula>, Box<LtlFormula>),
    Or(Box<LtlFormula>, Box<LtlFormula>),
    Eventually(Box<LtlFormula>),
    Globally(Box<LtlFormula>),
    Until(Box<LtlFormula>, Box<LtlFormula>),
}

/// What each subtask's propositions stand for.
#[derive(Debug, Clone, PartialEq)]
pub struct SubtaskAtoms {
    pub name: String,
    pub window: (f64, f64),
    pub post: Condition,
    pub pre: Condition,
    pub action: ActionSpec,
    pub c_stl: Formula,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LtlForm {
    pub formula: LtlFormula,
    pub atoms: Vec<SubtaskAtoms>,
}

fn b(f: LtlFormula) -> Box<LtlFormula> {
    Box::new(f)
}

/// `PoC | (PrC & U(C_STL, Action))` for subtask `i`.
pub fn atomic_action(i: usize) -> LtlFormula {
    use LtlFormula::*;
    Or(
        b(Prop(Atom::PostCondition(i))),
        b(And(b(Prop(Atom::PreCondition(i))), b(Until(b(Prop(Atom::Constraint(i))), b(Prop(Atom::Action(i))))))),
    )
}

pub fn abstract_to_ltl(spec: &TaskSpec) -> LtlForm {
    let atoms = spec
        .subtasks
        .iter()
        .map(|s| SubtaskAtoms {
            name: s.name.clone(),
            window: s.window,
            post: s.post.clone(),
            pre: s.pre.clone(),
            action: s.action.clone(),
            c_stl: s.c_stl.clone(),
        })
        .collect::<Vec<_>>();
    let mut formula = LtlFormula::True;
    for i in (0..atoms.len()).rev() {
        let step = LtlFormula::Eventually(b(atomic_action(i)));
        formula = if i + 1 == atoms.len() { step } else { LtlFormula::Until(b(step), b(formula)) };
    }
    LtlForm { formula, atoms }
}

impl LtlForm {
    /// Formula text with propositions spelled out.
    pub fn render(&self) -> String {
        let mut out = String::new();
        self.write(&self.formula, &mut out);
        out
    }

    fn write(&self, f: &LtlFormula, out: &mut String) {
        use LtlFormula::*;
        match f {
            True => out.push_str("true"),
            Prop(a) => out.push_str(&self.atom_text(a)),
            Not(x) => {
                out.push('!');
                self.write(x, out);
            }
            And(x, y) | Or(x, y) => {
                out.push('(');
                self.write(x, out);
                out.push_str(if matches!(f, And(..)) { " & " } else { " | " });
                self.write(y, out);
                out.push(')');
            }
            Eventually(x) | Globally(x) => {
                out.push_str(if matches!(f, Eventually(..)) { "F " } else { "G " });
                self.write(x, out);
            }
            Until(x, y) => {
                out.push_str("U(");
                self.write(x, out);
                out.push_str(", ");
                self.write(y, out);
                out.push(')');
            }
        }
    }

    fn atom_text(&self, a: &Atom) -> String {
        match a {
            Atom::PostCondition(i) => self.atoms[*i].post.to_string(),
            Atom::PreCondition(i) => self.atoms[*i].pre.to_string(),
            Atom::Constraint(i) => format!("C_STL[{}]", self.atoms[*i].name),
            Atom::Action(i) => format!("DMP_{}", self.atoms[*i].name),
        }
    }

    /// Chain skeleton with `psi_name` placeholders, e.g. `U(F psi_a, F psi_b)`.
    pub fn outline(&self) -> String {
        fn go(form: &LtlForm, f: &LtlFormula) -> String {
            match f {
                LtlFormula::True => "true".into(),
                LtlFormula::Eventually(x) => match **x {
                    LtlFormula::Or(ref p, _) => match **p {
                        LtlFormula::Prop(Atom::PostCondition(i)) => format!("F psi_{}", form.atoms[i].name),
                        _ => "F ?".into(),
                    },
                    _ => "F ?".into(),
                },
                LtlFormula::Until(x, y) => format!("U({}, {})", go(form, x), go(form, y)),
                _ => "?".into(),
            }
        }
        go(self, &self.formula)
    }
}

impl fmt::Display for LtlForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}
