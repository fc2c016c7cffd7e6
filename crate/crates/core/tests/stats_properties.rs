mod common;

use common::{bumped, min_jerk, path_length, rmse};
use nalgebra::{Matrix3, SymmetricEigen};
use proptest::prelude::*;
use tamp_core::stats::{combine_weights, fit_gmm_gmr, space_weights, time_weights, DemoSet, GmmConfig, StatsError};

fn set(demos: Vec<Vec<[f64; 3]>>) -> DemoSet {
    let with_dt: Vec<(f64, Vec<[f64; 3]>)> = demos.into_iter().map(|d| (0.02, d)).collect();
    DemoSet::new(&with_dt, 151).unwrap()
}

#[test]
fn identical_demos_have_no_spread() {
    let d = bumped([0.0; 3], [1.0, 0.5, 0.0], 151, 2, 0.2);
    let stats = fit_gmm_gmr(&set(vec![d.clone(), d.clone()]), &GmmConfig::default()).unwrap();
    assert!(rmse(&stats.mean, &d) <= 1e-6);
    assert!(stats.variances().iter().flatten().all(|v| *v <= 1e-7));
    assert!(stats.w.iter().flatten().all(|w| *w == 1.0));
}

#[test]
fn single_demo_gives_unit_weights() {
    let d = min_jerk([0.0; 3], [1.0, 1.0, 0.0], 151);
    let stats = fit_gmm_gmr(&set(vec![d]), &GmmConfig::default()).unwrap();
    assert!(stats.w.iter().flatten().all(|w| *w == 1.0));
}

#[test]
fn mirrored_demos_regress_to_midpoint() {
    let mid = min_jerk([0.0; 3], [1.0, 0.0, 0.0], 151);
    let up = bumped([0.0; 3], [1.0, 0.0, 0.0], 151, 1, 0.2);
    let down = bumped([0.0; 3], [1.0, 0.0, 0.0], 151, 1, -0.2);
    let stats = fit_gmm_gmr(&set(vec![up, down]), &GmmConfig::default()).unwrap();
    let err = rmse(&stats.mean, &mid) / path_length(&mid);
    assert!(err <= 0.02, "relative RMSE {err}");
}

fn diverging(center: f64, sign: f64, samples: usize) -> Vec<[f64; 3]> {
    let mut p = min_jerk([0.0; 3], [1.0, 0.0, 0.5], samples);
    for (k, row) in p.iter_mut().enumerate() {
        let s = (k as f64 - center) / 12.0;
        row[1] += sign * 0.15 * (-s * s).exp();
    }
    p
}

#[test]
fn variance_peaks_where_demos_disagree() {
    for center in [50.0, 75.0, 100.0] {
        let demos = vec![diverging(center, 1.0, 151), diverging(center, -1.0, 151), diverging(center, 0.5, 151)];
        let stats = fit_gmm_gmr(&set(demos), &GmmConfig::default()).unwrap();
        let traces: Vec<f64> = stats.cov.iter().map(|c| c[0][0] + c[1][1] + c[2][2]).collect();
        let argmax = (0..traces.len()).max_by(|&a, &b| traces[a].total_cmp(&traces[b])).unwrap();
        assert!((argmax as f64 - center).abs() <= 5.0, "peak at {argmax}, expected {center}");
    }
}

#[test]
fn covariances_are_psd_and_fit_is_seeded() {
    let demos = vec![
        bumped([0.0; 3], [1.0, 0.0, 0.0], 151, 1, 0.1),
        bumped([0.0; 3], [1.0, 0.0, 0.0], 151, 2, 0.1),
        bumped([0.0; 3], [1.0, 0.0, 0.0], 151, 1, -0.05),
    ];
    let cfg = GmmConfig { seed: 3, ..Default::default() };
    let a = fit_gmm_gmr(&set(demos.clone()), &cfg).unwrap();
    let b = fit_gmm_gmr(&set(demos), &cfg).unwrap();
    assert_eq!(a, b);
    for c in &a.cov {
        let m = Matrix3::from_fn(|i, j| c[i][j]);
        assert_eq!(m, m.transpose());
        assert!(SymmetricEigen::new(m).eigenvalues.iter().all(|v| *v >= -1e-12));
    }
    assert!(a.w.iter().flatten().all(|w| *w > 0.0 && *w <= 1.0));
}

#[test]
fn too_few_samples_for_components() {
    let demos = vec![(0.1, min_jerk([0.0; 3], [1.0; 3], 5)), (0.1, bumped([0.0; 3], [1.0; 3], 5, 0, 0.1))];
    let s = DemoSet::new(&demos, 5).unwrap();
    assert!(matches!(fit_gmm_gmr(&s, &GmmConfig::default()), Err(StatsError::NotEnoughData { .. })));
}

proptest! {
    #[test]
    fn weights_are_bounded(vars in prop::collection::vec((0.0f64..10.0, 0.0f64..10.0, 0.0f64..10.0), 1..60)) {
        let space: Vec<[f64; 3]> = vars.iter().map(|v| [v.0, v.1, v.2]).collect();
        let axes: [Vec<f64>; 3] = std::array::from_fn(|d| space.iter().map(|v| v[d]).collect());
        let wt = [time_weights(&axes[0]).unwrap(), time_weights(&axes[1]).unwrap(), time_weights(&axes[2]).unwrap()];
        let ws = space_weights(&space).unwrap();
        let w = combine_weights(&wt, &ws).unwrap();
        for x in wt.iter().flatten().chain(ws.iter().flatten()).chain(w.iter().flatten()) {
            prop_assert!(*x > 0.0 && *x <= 1.0 && x.is_finite());
        }
    }

    #[test]
    fn time_weights_scale_invariant_and_monotone(vars in prop::collection::vec(0.0f64..5.0, 2..60), c in 1e-3f64..1e3) {
        let w = time_weights(&vars).unwrap();
        let scaled: Vec<f64> = vars.iter().map(|v| v * c).collect();
        let ws = time_weights(&scaled).unwrap();
        for (a, b) in w.iter().zip(&ws) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        for i in 0..vars.len() {
            for j in 0..vars.len() {
                if vars[i] < vars[j] {
                    prop_assert!(w[i] > w[j]);
                }
            }
        }
    }
}

