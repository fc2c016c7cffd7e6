//! Kinematic world: objects, regions, end-effector, and what the symbolic
//! predicates of a task mean in it.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::stl::{robustness, Formula, SignalTrace};
use crate::task::{Binding, Symbol};

/// Grasp succeeds when the end-effector is this close to the object.
pub const GRASP_TOLERANCE: f64 = 0.01;
/// Default tolerance of `at` / `placed` predicates.
pub const AT_TOLERANCE: f64 = 0.02;
/// Magnitude of the margin reported for boolean predicates.
pub const BOOL_MARGIN: f64 = 0.01;

const IDENTITY: [f64; 4] = [1.0, 0.0, 0.0, 0.0];

fn identity() -> [f64; 4] {
    IDENTITY
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: [f64; 3],
    #[serde(default = "identity")]
    pub orientation: [f64; 4],
}

impl Pose {
    pub fn at(position: [f64; 3]) -> Self {
        Self { position, orientation: IDENTITY }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub center: [f64; 3],
    #[serde(default)]
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub ee: Pose,
    #[serde(default)]
    pub objects: BTreeMap<String, Pose>,
    #[serde(default)]
    pub regions: BTreeMap<String, Region>,
    /// Held object and its offset from the end-effector.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub held: Option<(String, [f64; 3])>,
}

/// A named predicate in the scenario's table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PredicateDef {
    Held { object: String },
    Empty,
    At { object: String, target: Binding, #[serde(default = "at_tol")] tol: f64 },
    Placed { object: String, target: Binding, #[serde(default = "at_tol")] tol: f64 },
    /// Horizontally within `tol` of the target and not below it by more than `tol`.
    Above { object: String, target: Binding, #[serde(default = "at_tol")] tol: f64 },
    /// Instantaneous STL formula over world channels.
    Stl { formula: String },
}

fn at_tol() -> f64 {
    AT_TOLERANCE
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    (0..3).map(|d| (a[d] - b[d]).powi(2)).sum::<f64>().sqrt()
}

fn signed(b: bool) -> f64 {
    if b { BOOL_MARGIN } else { -BOOL_MARGIN }
}

impl WorldState {
    pub fn validate(&self) -> Result<(), SimError> {
        for name in self.objects.keys() {
            if name == "ee" || self.regions.contains_key(name) {
                return Err(SimError::Scenario(format!("entity name `{name}` is used twice")));
            }
        }
        if self.regions.contains_key("ee") {
            return Err(SimError::Scenario("`ee` is reserved for the end-effector".into()));
        }
        if let Some((o, _)) = &self.held {
            if !self.objects.contains_key(o) {
                return Err(SimError::Scenario(format!("held object `{o}` does not exist")));
            }
        }
        Ok(())
    }

    pub fn entity(&self, name: &str) -> Result<[f64; 3], SimError> {
        if name == "ee" {
            return Ok(self.ee.position);
        }
        if let Some(o) = self.objects.get(name) {
            return Ok(o.position);
        }
        self.regions.get(name).map(|r| r.center).ok_or_else(|| SimError::UnknownEntity(name.to_owned()))
    }

    pub fn resolve(&self, b: &Binding) -> Result<[f64; 3], SimError> {
        match b {
            Binding::Named(n) => self.entity(n),
            Binding::Point(p) => Ok(*p),
            Binding::Offset { at, offset } => {
                let p = self.entity(at)?;
                Ok(std::array::from_fn(|d| p[d] + offset[d]))
            }
        }
    }

    /// Positions of every named entity, for binding STL points.
    pub fn points(&self) -> BTreeMap<String, [f64; 3]> {
        let mut out = BTreeMap::new();
        out.insert("ee".to_owned(), self.ee.position);
        out.extend(self.objects.iter().map(|(k, v)| (k.clone(), v.position)));
        out.extend(self.regions.iter().map(|(k, v)| (k.clone(), v.center)));
        out
    }

    pub fn holding(&self) -> Option<&str> {
        self.held.as_ref().map(|(o, _)| o.as_str())
    }

    /// Moves the end-effector; a held object keeps its offset.
    pub fn command(&mut self, position: [f64; 3], orientation: [f64; 4]) {
        self.ee = Pose { position, orientation };
        if let Some((o, off)) = &self.held {
            if let Some(obj) = self.objects.get_mut(o) {
                obj.position = std::array::from_fn(|d| position[d] + off[d]);
            }
        }
    }

    /// Attaches `object` if the end-effector is within grasp tolerance.
    pub fn grasp(&mut self, object: &str) -> Result<bool, SimError> {
        let p = self.objects.get(object).ok_or_else(|| SimError::UnknownEntity(object.to_owned()))?.position;
        if dist(p, self.ee.position) > GRASP_TOLERANCE {
            return Ok(false);
        }
        let e = self.ee.position;
        self.held = Some((object.to_owned(), std::array::from_fn(|d| p[d] - e[d])));
        Ok(true)
    }

    pub fn release(&mut self) {
        self.held = None;
    }

    /// One-sample trace: `y.*`, `q.*` for the end-effector, `<name>.*` for
    /// objects and regions.
    pub fn snapshot(&self) -> SignalTrace {
        let mut tr = SignalTrace::new(1.0, 1).expect("one sample");
        for (name, v) in self.channels() {
            tr.insert(name, vec![v]).expect("one sample");
        }
        tr
    }

    pub fn channels(&self) -> Vec<(String, f64)> {
        let mut out = Vec::new();
        let axes = ["x", "y", "z"];
        for (d, a) in axes.iter().enumerate() {
            out.push((format!("y.{a}"), self.ee.position[d]));
        }
        for (d, a) in ["w", "x", "y", "z"].iter().enumerate() {
            out.push((format!("q.{a}"), self.ee.orientation[d]));
        }
        for (name, p) in self.objects.iter().map(|(k, v)| (k, v.position)).chain(self.regions.iter().map(|(k, v)| (k, v.center))) {
            for (d, a) in axes.iter().enumerate() {
                out.push((format!("{name}.{a}"), p[d]));
            }
        }
        out
    }

    /// Signed margin of a predicate: positive exactly when it holds.
    pub fn margin(&self, def: &PredicateDef) -> Result<f64, SimError> {
        Ok(match def {
            PredicateDef::Held { object } => signed(self.holding() == Some(object.as_str())),
            PredicateDef::Empty => signed(self.held.is_none()),
            PredicateDef::At { object, target, tol } => tol - dist(self.entity(object)?, self.resolve(target)?),
            PredicateDef::Placed { object, target, tol } => {
                let near = tol - dist(self.entity(object)?, self.resolve(target)?);
                near.min(signed(self.holding() != Some(object.as_str())))
            }
            PredicateDef::Above { object, target, tol } => {
                let (p, t) = (self.entity(object)?, self.resolve(target)?);
                let dxy = ((p[0] - t[0]).powi(2) + (p[1] - t[1]).powi(2)).sqrt();
                (tol - dxy).min(p[2] - (t[2] - tol))
            }
            PredicateDef::Stl { formula } => self.formula_margin(&crate::stl::parse(formula)?)?,
        })
    }

    pub fn formula_margin(&self, f: &Formula) -> Result<f64, SimError> {
        if f.horizon() > 0 {
            return Err(SimError::Scenario(format!("world condition `{f}` must be instantaneous")));
        }
        let bound = f.bind(&self.points())?;
        Ok(robustness(&bound, &self.snapshot(), 0)?)
    }
}

/// Built-in meaning of `Held(o)`, `Empty`, `At(o, t)`, `Placed(o, t)`.
pub fn builtin(sym: &Symbol) -> Option<PredicateDef> {
    let a = &sym.args;
    Some(match (sym.name.as_str(), a.len()) {
        ("Held" | "Picked" | "Holding", 1) => PredicateDef::Held { object: a[0].clone() },
        ("Empty" | "HandEmpty", 0) => PredicateDef::Empty,
        ("At", 2) => PredicateDef::At { object: a[0].clone(), target: Binding::Named(a[1].clone()), tol: AT_TOLERANCE },
        ("Above", 2) => {
            PredicateDef::Above { object: a[0].clone(), target: Binding::Named(a[1].clone()), tol: AT_TOLERANCE }
        }
        ("Placed", 2) => {
            PredicateDef::Placed { object: a[0].clone(), target: Binding::Named(a[1].clone()), tol: AT_TOLERANCE }
        }
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn world() -> WorldState {
        let mut w = WorldState {
            ee: Pose::at([0.0, 0.0, 0.3]),
            objects: BTreeMap::new(),
            regions: BTreeMap::new(),
            held: None,
        };
        w.objects.insert("cup".into(), Pose::at([0.4, 0.0, 0.05]));
        w.regions.insert("goal".into(), Region { center: [0.4, 0.5, 0.05], radius: 0.05 });
        w
    }

    #[test]
    fn grasp_needs_contact_and_object_follows() {
        let mut w = world();
        assert!(!w.grasp("cup").unwrap());
        w.command([0.4, 0.0, 0.055], IDENTITY);
        assert!(w.grasp("cup").unwrap());
        w.command([0.4, 0.5, 0.105], IDENTITY);
        assert!((w.entity("cup").unwrap()[2] - 0.1).abs() < 1e-12);
        let at = PredicateDef::At { object: "cup".into(), target: Binding::Named("goal".into()), tol: 0.02 };
        assert!(w.margin(&at).unwrap() < 0.0);
        w.command([0.4, 0.5, 0.055], IDENTITY);
        assert!(w.margin(&at).unwrap() > 0.0);
        let placed = PredicateDef::Placed { object: "cup".into(), target: Binding::Named("goal".into()), tol: 0.02 };
        assert!(w.margin(&placed).unwrap() < 0.0);
        w.release();
        assert!(w.margin(&placed).unwrap() > 0.0);
    }

    #[test]
    fn stl_condition_on_world_channels() {
        let w = world();
        let m = w.formula_margin(&crate::stl::parse("cup.z > 0.01 & norm2(y - goal) < 1").unwrap()).unwrap();
        assert!((m - 0.04).abs() < 1e-12);
        assert!(w.formula_margin(&crate::stl::parse("F[0,2](cup.z > 0)").unwrap()).is_err());
    }
}
