//! Post-hoc evaluation of an execution log against the whole task:
//! every subtask's post-condition must hold somewhere in its realized
//! window, and its constraint must hold on its executed motion.

use serde::{Deserialize, Serialize};

use super::exec::{EventKind, ExecutionLog};
use super::scenario::Scenario;
use super::{SimError, SCHEMA_VERSION};
use crate::opt::lenient_f64;
use crate::stl::{first_difference, prefix_bounds, robustness, Formula, SignalTrace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubtaskEvaluation {
    pub name: String,
    /// Realized window, inclusive log rows.
    pub window: [usize; 2],
    /// Whether the action ran (and completed) in the final pass.
    pub executed: bool,
    /// Rows of the last completed execution, inclusive.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segment: Option<[usize; 2]>,
    #[serde(with = "lenient_f64")]
    pub post_robustness: f64,
    #[serde(with = "lenient_f64")]
    pub constraint_robustness: f64,
    #[serde(with = "lenient_f64")]
    pub robustness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub schema_version: u32,
    pub scenario: String,
    pub subtasks: Vec<SubtaskEvaluation>,
    #[serde(with = "lenient_f64")]
    pub robustness: f64,
    pub satisfied: bool,
}

/// Rows `[a, b]` of the log as an action-frame trace (`y`, `vel`, `q`, `qvel`).
fn segment_trace(log: &ExecutionLog, full: &SignalTrace, a: usize, b: usize) -> Result<SignalTrace, SimError> {
    let mut tr = full.window(a, b + 1)?;
    for prefix in ["y", "q"] {
        let vel = if prefix == "y" { "vel" } else { "qvel" };
        let axes: &[&str] = if prefix == "y" { &["x", "y", "z"] } else { &["w", "x", "y", "z"] };
        for ax in axes {
            let c = tr.channel(&format!("{prefix}.{ax}")).expect("logged").to_vec();
            tr.insert(format!("{vel}.{ax}"), first_difference(&c, log.dt))?;
        }
    }
    Ok(tr)
}

/// Entity positions at row `r`, read back from the logged channels.
fn points_at(log: &ExecutionLog, scenario: &Scenario, r: usize) -> std::collections::BTreeMap<String, [f64; 3]> {
    let w = &scenario.spec.world;
    let mut out = std::collections::BTreeMap::new();
    let get = |n: &str| log.channel_names.iter().position(|c| c == n).map(|i| log.rows[r].channels[i]);
    for name in std::iter::once("ee").chain(w.objects.keys().map(String::as_str)).chain(w.regions.keys().map(String::as_str)) {
        let pre = if name == "ee" { "y" } else { name };
        if let (Some(x), Some(y), Some(z)) = (get(&format!("{pre}.x")), get(&format!("{pre}.y")), get(&format!("{pre}.z"))) {
            out.insert(name.to_owned(), [x, y, z]);
        }
    }
    out
}

pub fn evaluate(log: &ExecutionLog, scenario: &Scenario) -> Result<Evaluation, SimError> {
    let n = scenario.task.len();
    let last_row = log.rows.len() - 1;
    let full = log.trace()?;
    // last completed execution of every subtask, as log rows: from the
    // pose before its first command to its last command
    let mut segments: Vec<Option<[usize; 2]>> = vec![None; n];
    let mut started: Vec<Option<usize>> = vec![None; n];
    let mut first_start: Vec<Option<usize>> = vec![None; n];
    for e in &log.events {
        let Some(i) = e.subtask else { continue };
        match e.kind {
            EventKind::Start => started[i] = Some(e.tick),
            EventKind::Completed => {
                if let Some(s) = started[i] {
                    segments[i] = Some([s - 1, (e.tick - 1).max(s - 1)]);
                }
            }
            _ => {}
        }
    }
    for i in 0..n {
        first_start[i] = segments[i].map(|s| s[0] + 1);
    }
    // window of a subtask: from its segment until the next subtask starts
    // commanding (that row also shows the completion's grasp or release)
    let mut windows = vec![[0, last_row]; n];
    let mut prev_end = 0;
    for i in 0..n {
        let start = segments[i].map_or(prev_end, |s| s[0]);
        let end = (i + 1..n).find_map(|j| first_start[j]).unwrap_or(last_row).max(start);
        windows[i] = [start, end];
        prev_end = end;
    }
    let actions = scenario.blueprint.actions();
    let mut subtasks = Vec::with_capacity(n);
    for (i, s) in scenario.task.subtasks.iter().enumerate() {
        let [a, b] = windows[i];
        let done = Formula::eventually(0, b - a, Formula::channel_gt(&format!("pred.done_{}", s.name), 0.0))?;
        let post = robustness(&done, &full, a)?;
        let constraint = match segments[i] {
            Some([sa, sb]) => {
                let action = actions.iter().find(|x| x.subtask == i).expect("compiled");
                let f = action.constraint.bind(&points_at(log, scenario, sa))?;
                let tr = segment_trace(log, &full, sa, sb)?;
                if f.horizon() < tr.len() {
                    robustness(&f, &tr, 0)?
                } else {
                    // cut short by an early post-condition: best case over
                    // the unexecuted rest, i.e. no violation was observed
                    prefix_bounds(&f, &tr, 0)?.1
                }
            }
            // the action never had to run
            None => f64::INFINITY,
        };
        subtasks.push(SubtaskEvaluation {
            name: s.name.clone(),
            window: [a, b],
            executed: segments[i].is_some(),
            segment: segments[i],
            post_robustness: post,
            constraint_robustness: constraint,
            robustness: post.min(constraint),
        });
    }
    let rho = subtasks.iter().map(|s| s.robustness).fold(f64::INFINITY, f64::min);
    Ok(Evaluation {
        schema_version: SCHEMA_VERSION,
        scenario: scenario.spec.name.clone(),
        subtasks,
        robustness: rho,
        satisfied: rho >= 0.0,
    })
}
