//! The four benchmark constraints (via-point, obstacle, space limit, velocity
//! limit) over 151-sample demonstrations that each violate their constraint.

use super::{OptConfig, OptError, OptimizationProblem};
use crate::dmp::{DmpModel, DmpParams};
use crate::stl::parse;

pub const SAMPLES: usize = 151;

pub const VIA_POINT: [f64; 3] = [0.606, 0.394, 0.0];
pub const OBSTACLE_CENTER: [f64; 3] = [0.52, 0.48, 0.0];
pub const OBSTACLE_RADIUS: f64 = 0.1;

#[derive(Debug, Clone)]
pub struct Table2Case {
    pub name: &'static str,
    pub demo: Vec<[f64; 3]>,
    pub problem: OptimizationProblem,
}

pub fn min_jerk(a: [f64; 3], b: [f64; 3], samples: usize) -> Vec<[f64; 3]> {
    (0..samples)
        .map(|k| {
            let s = k as f64 / (samples - 1) as f64;
            let m = s.powi(3) * (10.0 - 15.0 * s + 6.0 * s * s);
            std::array::from_fn(|d| a[d] + (b[d] - a[d]) * m)
        })
        .collect()
}

fn space_limit_demo() -> Vec<[f64; 3]> {
    let mut p = min_jerk([0.0; 3], [5.0, 1.0, 0.0], SAMPLES);
    for (k, row) in p.iter_mut().enumerate() {
        let s = k as f64 / (SAMPLES - 1) as f64;
        // excursion to y ~ 3 around sample 100, vanishing at both ends
        row[1] += 2.3 * (-((s - 0.65) / 0.12).powi(2)).exp() * (std::f64::consts::PI * s).sin();
    }
    p
}

fn case(name: &'static str, demo: Vec<[f64; 3]>, constraint: &str) -> Result<Table2Case, OptError> {
    let model = DmpModel::learn(&demo, DmpParams::default(), None)?;
    let problem = OptimizationProblem::new(model, parse(constraint)?, OptConfig::default());
    Ok(Table2Case { name, demo, problem })
}

pub fn via_point() -> Result<Table2Case, OptError> {
    let v = VIA_POINT;
    case(
        "via-point",
        min_jerk([0.0; 3], [1.0, 1.0, 0.0], SAMPLES),
        &format!("F[0,150](norm2(y - [{}, {}, {}]) < 0.01)", v[0], v[1], v[2]),
    )
}

pub fn obstacle() -> Result<Table2Case, OptError> {
    let c = OBSTACLE_CENTER;
    case(
        "obstacle",
        min_jerk([0.0; 3], [1.0, 1.0, 0.0], SAMPLES),
        &format!("G[0,150](norm2(y - [{}, {}, {}]) > {OBSTACLE_RADIUS})", c[0], c[1], c[2]),
    )
}

pub fn space_limit() -> Result<Table2Case, OptError> {
    case("space-limit", space_limit_demo(), "G[90,150](y.y > -4 & y.y < 2)")
}

pub fn velocity_limit() -> Result<Table2Case, OptError> {
    case("velocity-limit", min_jerk([0.0; 3], [0.6, 0.3, 0.5], SAMPLES), "G[30,120](vel.z < 0.005)")
}

pub fn table2_cases() -> Result<Vec<Table2Case>, OptError> {
    Ok(vec![via_point()?, obstacle()?, space_limit()?, velocity_limit()?])
}
