mod common;

use common::{bumped, min_jerk, path_length, rmse, trace_points};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tamp_core::dmp::{
    angle_between, learn_forcing, quat_exp, BasisSet, CanonicalSystem, DmpModel, DmpParams, QuatDmpModel,
};

fn model(samples: usize) -> DmpModel {
    DmpModel {
        params: DmpParams::default(),
        y_init: [0.0; 3],
        y_goal: [1.0, 0.5, -0.25],
        forcing: vec![[0.0; 3]; samples],
        basis: None,
    }
}

#[test]
fn homogeneous_demo_needs_no_forcing() {
    // critically damped solution of the unforced system, densely sampled
    let p = DmpParams { dt: 1e-4, ..Default::default() };
    let w = p.alpha / (2.0 * p.tau);
    let (y0, g) = (0.0, 1.0);
    let demo: Vec<[f64; 3]> = (0..20_001)
        .map(|k| {
            let t = k as f64 * p.dt;
            let y = g - (g - y0) * (1.0 + w * t) * (-w * t).exp();
            [y, y0, g]
        })
        .collect();
    let f = learn_forcing(&demo, &p, [g, y0, g]).unwrap();
    let worst = f.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(worst <= 1e-3, "max |F| = {worst}");
}

#[test]
fn learned_forcing_reproduces_demos() {
    let demos = [
        min_jerk([0.0; 3], [1.0, 1.0, 0.0], 151),
        bumped([0.0; 3], [1.0, 0.0, 0.0], 151, 1, 0.3),
        bumped([0.2, -0.1, 0.4], [-0.5, 0.6, 0.1], 151, 2, -0.2),
    ];
    for demo in demos {
        let m = DmpModel::learn(&demo, DmpParams::default(), Some(25)).unwrap();
        let out = trace_points(&m.rollout().unwrap(), "y");
        let err = rmse(&out, &demo) / path_length(&demo);
        assert!(err <= 0.01, "relative RMSE {err}");
    }
}

#[test]
fn unforced_rollout_reaches_goal_after_three_tau() {
    let m = model(151);
    let tr = m.rollout().unwrap();
    let end = trace_points(&tr, "y")[150];
    for d in 0..3 {
        assert!((end[d] - m.y_goal[d]).abs() <= 1e-2);
    }
}

#[test]
fn bounded_forcing_still_converges() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..20 {
        let m = model(300);
        let mut f = vec![[0.0; 3]; 300];
        for row in f.iter_mut().take(135) {
            *row = [rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0)];
        }
        // 150 samples of forcing (last 10% zero), then 3 tau of free motion
        let y = m.positions(&f, m.y_init, m.y_goal).unwrap();
        for d in 0..3 {
            assert!((y[299][d] - m.y_goal[d]).abs() <= 1e-2);
        }
    }
}

#[test]
fn rollout_is_affine_in_forcing() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let m = model(151);
    let zero = trace_points(&m.rollout().unwrap(), "y");
    for _ in 0..50 {
        let mut draw = || -> Vec<[f64; 3]> {
            (0..151).map(|_| [rng.gen_range(-30.0..30.0), rng.gen_range(-30.0..30.0), rng.gen_range(-30.0..30.0)]).collect()
        };
        let (f1, f2) = (draw(), draw());
        let sum: Vec<[f64; 3]> = f1.iter().zip(&f2).map(|(a, b)| [a[0] + b[0], a[1] + b[1], a[2] + b[2]]).collect();
        let y12 = m.positions(&sum, m.y_init, m.y_goal).unwrap();
        let y1 = m.positions(&f1, m.y_init, m.y_goal).unwrap();
        let y2 = m.positions(&f2, m.y_init, m.y_goal).unwrap();
        for k in 0..151 {
            for d in 0..3 {
                let r = y12[k][d] - y1[k][d] - y2[k][d] + zero[k][d];
                assert!(r.abs() <= 1e-10, "{r}");
            }
        }
    }
}

#[test]
fn relearning_a_rollout_recovers_forcing() {
    // The difference between central and backward velocity estimates costs
    // about alpha * dt / 2 relative error, so this runs on a finer grid.
    let samples = 1501;
    let mut m = model(samples);
    m.params.dt = 0.002;
    let f: Vec<[f64; 3]> = (0..samples)
        .map(|k| {
            let t = k as f64 * m.params.dt;
            [20.0 * (2.0 * t).sin(), -15.0 * (3.0 * t).cos() + 5.0, 10.0 * t * (3.0 - t)]
        })
        .collect();
    let y = m.positions(&f, m.y_init, m.y_goal).unwrap();
    let back = learn_forcing(&y, &m.params, m.y_goal).unwrap();
    let fmax = f.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
    // the last sample never enters the rollout
    let err = rmse(&back[..samples - 1], &f[..samples - 1]);
    assert!(err <= 0.02 * fmax, "RMSE {err} vs max {fmax}");
}

#[test]
fn basis_residual_shrinks_with_more_bases() {
    let demo = bumped([0.0; 3], [1.0, 0.0, 0.5], 151, 1, 0.3);
    let p = DmpParams::default();
    let f = learn_forcing(&demo, &p, demo[150]).unwrap();
    let cs = CanonicalSystem::for_samples(p.tau, p.dt, 151);
    let phases = cs.phases(151);
    let mut prev = f64::INFINITY;
    for n in [5, 10, 20, 50] {
        let fit = BasisSet::new(n, &cs, 151).unwrap().fit(&f, &phases).unwrap();
        let total: f64 = fit.residual.iter().map(|r| r * r).sum::<f64>().sqrt();
        assert!(total <= prev, "N = {n}: {total} > {prev}");
        prev = total;
    }
}

#[test]
fn twenty_five_bases_fit_min_jerk_forcing() {
    let demo = min_jerk([0.0; 3], [1.0, 1.0, 0.0], 151);
    let m = DmpModel::learn(&demo, DmpParams::default(), Some(25)).unwrap();
    let fit = m.basis.as_ref().unwrap();
    let recon = fit.reconstruct(&m.canonical().phases(151));
    let fmax = m.forcing.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
    let err = rmse(&recon, &m.forcing);
    assert!(err <= 0.02 * fmax, "RMSE {err} vs max {fmax}");
}

#[test]
fn one_basis_per_sample_interpolates() {
    let samples = 40;
    let demo = bumped([0.0; 3], [1.0, 0.0, 0.0], samples, 1, 0.2);
    let p = DmpParams::default();
    let f = learn_forcing(&demo, &p, demo[samples - 1]).unwrap();
    let cs = CanonicalSystem::for_samples(p.tau, p.dt, samples);
    let fit = BasisSet::new(samples, &cs, samples).unwrap().fit(&f, &cs.phases(samples)).unwrap();
    let fmax = f.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
    assert!(fit.residual.iter().all(|r| *r <= 1e-6 * fmax), "{:?}", fit.residual);
}

fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let cov: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let vx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let vy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

/// Worst per-axis correlation; correlation is invariant to a per-axis affine
/// map, which absorbs the change of endpoints. Axes on which the demo does
/// not move are skipped.
fn aligned_correlation(a: &[[f64; 3]], b: &[[f64; 3]]) -> f64 {
    (0..3)
        .filter_map(|d| {
            let xs: Vec<f64> = a.iter().map(|p| p[d]).collect();
            let ys: Vec<f64> = b.iter().map(|p| p[d]).collect();
            let spread = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                - xs.iter().cloned().fold(f64::INFINITY, f64::min);
            (spread > 1e-9).then(|| pearson(&xs, &ys))
        })
        .fold(1.0, f64::min)
}

#[test]
fn new_endpoints_keep_demo_shape() {
    let demo = bumped([0.0; 3], [1.0, 0.0, 0.0], 151, 1, 0.3);
    let m = DmpModel::learn(&demo, DmpParams::default(), None).unwrap();
    for (start, goal) in [([0.0, 0.1, 0.0], [1.3, -0.1, 0.2]), ([0.1, 0.0, -0.2], [0.8, 0.2, 0.0])] {
        let y = trace_points(&m.rollout_with(&m.forcing, start, goal).unwrap(), "y");
        let c = aligned_correlation(&demo, &y);
        assert!(c >= 0.9, "{start:?} -> {goal:?}: correlation {c}");
    }
}

#[test]
fn orientation_demo_is_reproduced() {
    let samples = 151;
    let demo: Vec<[f64; 4]> = min_jerk([0.0; 3], [0.4, -0.3, 0.6], samples)
        .into_iter()
        .enumerate()
        .map(|(k, v)| {
            let s = k as f64 / (samples - 1) as f64;
            let wobble = 0.2 * (std::f64::consts::PI * s).sin();
            quat_exp([v[0] + wobble, v[1], v[2]])
        })
        .collect();
    let m = QuatDmpModel::learn(&demo, 0.02).unwrap();
    let qs = m.orientations_with(&m.forcing, m.q_init, m.q_goal).unwrap();
    let worst = qs.iter().zip(&demo).map(|(a, b)| angle_between(*a, *b)).fold(0.0f64, f64::max);
    let total = angle_between(demo[0], demo[samples - 1]);
    assert!(worst <= 0.05 * total, "worst {worst} rad of {total}");
}
