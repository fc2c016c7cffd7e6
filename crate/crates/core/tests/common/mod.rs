//! Test-only helpers shared by integration tests: an independent recursive
//! robustness evaluator and random formula/trace generators.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use tamp_core::stl::{Comparison, Expr, Formula, Interval, Point, SignalTrace};

pub const CHANNELS: [&str; 3] = ["x", "y.a", "y.b"];

/// Direct recursive evaluation of the quantitative semantics, one time point
/// at a time. Deliberately shares no code with the library evaluator.
pub fn oracle(f: &Formula, tr: &SignalTrace, t: usize) -> f64 {
    match f {
        Formula::True => f64::INFINITY,
        Formula::Predicate(p) => {
            let v = oracle_expr(&p.expr, tr, t);
            match p.comparison {
                Comparison::Greater => v - p.threshold,
                Comparison::Less => p.threshold - v,
            }
        }
        Formula::Not(a) => -oracle(a, tr, t),
        Formula::And(a, b) => {
            let (x, y) = (oracle(a, tr, t), oracle(b, tr, t));
            if x < y { x } else { y }
        }
        Formula::Or(a, b) => {
            let (x, y) = (oracle(a, tr, t), oracle(b, tr, t));
            if x > y { x } else { y }
        }
        Formula::Implies(a, b) => {
            let (x, y) = (-oracle(a, tr, t), oracle(b, tr, t));
            if x > y { x } else { y }
        }
        Formula::Globally(i, a) => {
            let mut best = f64::INFINITY;
            for k in t + i.start..=t + i.end {
                let v = oracle(a, tr, k);
                if v < best {
                    best = v;
                }
            }
            best
        }
        Formula::Eventually(i, a) => {
            let mut best = f64::NEG_INFINITY;
            for k in t + i.start..=t + i.end {
                let v = oracle(a, tr, k);
                if v > best {
                    best = v;
                }
            }
            best
        }
    }
}

fn oracle_expr(e: &Expr, tr: &SignalTrace, t: usize) -> f64 {
    match e {
        Expr::Channel(c) => tr.channel(c).unwrap()[t],
        Expr::Const(c) => *c,
        Expr::Norm { vector, point } => {
            let p = match point {
                Point::Literal(p) => *p,
                Point::Named(_) => panic!("unbound"),
            };
            let mut s = 0.0;
            for (a, axis) in ["x", "y", "z"].iter().enumerate() {
                let d = tr.channel(&format!("{vector}.{axis}")).unwrap()[t] - p[a];
                s += d * d;
            }
            s.sqrt()
        }
        Expr::Abs(e) => oracle_expr(e, tr, t).abs(),
        Expr::Scale(k, e) => k * oracle_expr(e, tr, t),
        Expr::Add(a, b) => oracle_expr(a, tr, t) + oracle_expr(b, tr, t),
        Expr::Sub(a, b) => oracle_expr(a, tr, t) - oracle_expr(b, tr, t),
    }
}

/// Boolean satisfaction under the same discrete semantics.
pub fn satisfies(f: &Formula, tr: &SignalTrace, t: usize) -> bool {
    match f {
        Formula::True => true,
        Formula::Predicate(p) => {
            let v = oracle_expr(&p.expr, tr, t);
            match p.comparison {
                Comparison::Greater => v > p.threshold,
                Comparison::Less => v < p.threshold,
            }
        }
        Formula::Not(a) => !satisfies(a, tr, t),
        Formula::And(a, b) => satisfies(a, tr, t) && satisfies(b, tr, t),
        Formula::Or(a, b) => satisfies(a, tr, t) || satisfies(b, tr, t),
        Formula::Implies(a, b) => !satisfies(a, tr, t) || satisfies(b, tr, t),
        Formula::Globally(i, a) => (t + i.start..=t + i.end).all(|k| satisfies(a, tr, k)),
        Formula::Eventually(i, a) => (t + i.start..=t + i.end).any(|k| satisfies(a, tr, k)),
    }
}

pub fn random_trace(rng: &mut ChaCha8Rng, len: usize) -> SignalTrace {
    let mut tr = SignalTrace::new(0.1, len).unwrap();
    for c in CHANNELS {
        tr.insert(c, (0..len).map(|_| rng.gen_range(-2.0..2.0)).collect()).unwrap();
    }
    for axis in ["x", "y", "z"] {
        tr.insert(format!("p.{axis}"), (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .unwrap();
    }
    tr
}

pub fn random_expr(rng: &mut ChaCha8Rng) -> Expr {
    match rng.gen_range(0..6) {
        0 | 1 => Expr::Channel(CHANNELS[rng.gen_range(0..CHANNELS.len())].into()),
        2 => Expr::Norm {
            vector: "p".into(),
            point: Point::Literal([
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ]),
        },
        3 => Expr::Sub(
            Box::new(Expr::Channel(CHANNELS[rng.gen_range(0..3)].into())),
            Box::new(Expr::Channel(CHANNELS[rng.gen_range(0..3)].into())),
        ),
        4 => Expr::Scale(rng.gen_range(-2.0..2.0), Box::new(Expr::Channel("x".into()))),
        _ => Expr::Abs(Box::new(Expr::Channel(CHANNELS[rng.gen_range(0..3)].into()))),
    }
}

/// Random formula of depth ≤ `depth` whose horizon is at most `max_horizon`.
pub fn random_formula(rng: &mut ChaCha8Rng, depth: usize, max_horizon: usize) -> Formula {
    let leaf = depth == 0 || rng.gen_bool(0.25);
    if leaf {
        let cmp = if rng.gen_bool(0.5) { Comparison::Less } else { Comparison::Greater };
        return Formula::pred(random_expr(rng), cmp, rng.gen_range(-1.0..1.0));
    }
    match rng.gen_range(0..7) {
        0 => Formula::not(random_formula(rng, depth - 1, max_horizon)),
        1 => Formula::and(
            random_formula(rng, depth - 1, max_horizon),
            random_formula(rng, depth - 1, max_horizon),
        ),
        2 => Formula::or(
            random_formula(rng, depth - 1, max_horizon),
            random_formula(rng, depth - 1, max_horizon),
        ),
        3 => Formula::implies(
            random_formula(rng, depth - 1, max_horizon),
            random_formula(rng, depth - 1, max_horizon),
        ),
        k => {
            let end = rng.gen_range(0..=max_horizon.min(6));
            let start = rng.gen_range(0..=end);
            let body = random_formula(rng, depth - 1, max_horizon - end);
            let i = Interval { start, end };
            if k % 2 == 0 {
                Formula::Globally(i, Box::new(body))
            } else {
                Formula::Eventually(i, Box::new(body))
            }
        }
    }
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    if den < 1e-12 {
        num
    } else {
        num / den
    }
}

/// Minimum-jerk profile from `a` to `b` over `samples` points.
pub fn min_jerk(a: [f64; 3], b: [f64; 3], samples: usize) -> Vec<[f64; 3]> {
    (0..samples)
        .map(|k| {
            let s = k as f64 / (samples - 1) as f64;
            let m = 10.0 * s.powi(3) - 15.0 * s.powi(4) + 6.0 * s.powi(5);
            [a[0] + (b[0] - a[0]) * m, a[1] + (b[1] - a[1]) * m, a[2] + (b[2] - a[2]) * m]
        })
        .collect()
}

/// Minimum-jerk path with a smooth sideways bump of height `h` along `axis`.
pub fn bumped(a: [f64; 3], b: [f64; 3], samples: usize, axis: usize, h: f64) -> Vec<[f64; 3]> {
    let mut p = min_jerk(a, b, samples);
    for (k, row) in p.iter_mut().enumerate() {
        let s = k as f64 / (samples - 1) as f64;
        row[axis] += h * (std::f64::consts::PI * s).sin().powi(2);
    }
    p
}

pub fn path_length(p: &[[f64; 3]]) -> f64 {
    p.windows(2)
        .map(|w| ((w[1][0] - w[0][0]).powi(2) + (w[1][1] - w[0][1]).powi(2) + (w[1][2] - w[0][2]).powi(2)).sqrt())
        .sum()
}

pub fn rmse(a: &[[f64; 3]], b: &[[f64; 3]]) -> f64 {
    let s: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (0..3).map(|d| (x[d] - y[d]).powi(2)).sum::<f64>())
        .sum();
    (s / a.len() as f64).sqrt()
}

pub fn trace_points(tr: &SignalTrace, prefix: &str) -> Vec<[f64; 3]> {
    let [x, y, z] = tr.vector(prefix).unwrap();
    (0..tr.len()).map(|k| [x[k], y[k], z[k]]).collect()
}
