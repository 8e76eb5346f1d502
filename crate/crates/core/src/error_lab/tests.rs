use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4, PI};

use nalgebra::{Rotation3, Unit, Vector3};
use proptest::prelude::*;
use rand::Rng;

use super::*;
use crate::clustering::KMeansParams;
use crate::data::{synthesize, NormProfile};
use crate::eval::{brute_force_knn, brute_force_topk, EncodedIndex};
use crate::vq::{train, QuantizerKind, TrainParams};

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

#[test]
fn triple_examples() {
    let x = [1.0, -2.0, 0.5];
    let q = [0.3, 0.1, 2.0];
    let e = error_triple(&x, &x, &q).unwrap();
    assert_eq!((e.u, e.gamma), (Some(0.0), 0.0));
    assert!(e.eta.abs() < 1e-15);

    let twice: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
    let e = error_triple(&x, &twice, &q).unwrap();
    assert!(close(e.u.unwrap(), 1.0, 1e-15) && close(e.gamma, 1.0, 1e-15) && e.eta.abs() < 1e-15);

    let e = error_triple(&[1.0, 0.0], &[0.0, 1.0], &[1.0, 0.0]).unwrap();
    assert_eq!((e.u, e.gamma, e.eta), (Some(1.0), 0.0, 1.0));
}

#[test]
fn triple_undefined_u_and_errors() {
    let e = error_triple(&[1.0, 0.0], &[1.0, 1.0], &[0.0, 1.0]).unwrap();
    assert_eq!(e.u, None);
    assert!(error_triple(&[0.0, 0.0], &[1.0, 0.0], &[1.0, 0.0]).is_err());
    assert!(error_triple(&[1.0, 0.0], &[0.0, 0.0], &[1.0, 0.0]).is_err());
    assert!(error_triple(&[1.0, 0.0], &[1.0], &[1.0, 0.0]).is_err());
}

#[test]
fn hat_and_bar_examples() {
    assert_eq!(construct_hat(&[3.0, 4.0], &[0.0, 10.0]).unwrap(), vec![6.0, 8.0]);
    assert_eq!(construct_hat(&[3.0, 4.0], &[5.0, 0.0]).unwrap(), vec![3.0, 4.0]);
    assert_eq!(construct_bar(&[0.0, 2.0], &[1.0, 0.0]).unwrap(), vec![2.0, 0.0]);
    assert_eq!(construct_bar(&[1.0, 2.0], &[0.5, 1.0]).unwrap(), vec![1.0, 2.0]);
    assert!(construct_hat(&[0.0, 0.0], &[1.0, 0.0]).is_err());
    assert!(construct_bar(&[1.0, 0.0], &[0.0, 0.0]).is_err());
}

#[test]
fn cos_gamma_examples() {
    let (a, b) = (0.4, 1.1);
    assert!(close(cos_gamma(AngleConfig { alpha: a, beta: b, t: 0.0 }), (a - b).cos(), 1e-15));
    assert!(close(cos_gamma(AngleConfig { alpha: a, beta: b, t: FRAC_PI_2 }), a.cos() * b.cos(), 1e-15));
    let c = cos_gamma(AngleConfig {
        alpha: FRAC_PI_4,
        beta: FRAC_PI_4,
        t: FRAC_PI_3,
    });
    assert!(close(c, 0.75, 1e-12));
}

/// Realizes `cfg` in an arbitrary frame by rotations: `x̄` a random unit
/// vector, `x` and `q` tilted from it about a shared axis, then `q` spun
/// around `x̄` by `t`.
fn rotation_oracle(cfg: AngleConfig, seed: u64) -> f64 {
    let mut rng = crate::rng::rng_from(seed);
    let mut rv = || Vector3::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
    let xbar = Unit::new_normalize(rv());
    let axis = Unit::new_normalize(xbar.cross(&rv()));
    let x: Vector3<f64> = Rotation3::from_axis_angle(&axis, cfg.alpha) * xbar.into_inner();
    let q0: Vector3<f64> = Rotation3::from_axis_angle(&axis, cfg.beta) * xbar.into_inner();
    let q: Vector3<f64> = Rotation3::from_axis_angle(&xbar, cfg.t) * q0;
    x.dot(&q) / (x.norm() * q.norm())
}

#[test]
fn cos_gamma_matches_rotation_oracle() {
    let mut rng = crate::rng::rng_from(3);
    for i in 0..10_000 {
        let cfg = AngleConfig {
            alpha: rng.random::<f64>() * FRAC_PI_2,
            beta: rng.random::<f64>() * FRAC_PI_2,
            t: rng.random::<f64>() * PI,
        };
        let oracle = rotation_oracle(cfg, i);
        assert!(close(cos_gamma(cfg), oracle, 1e-9), "{cfg:?}");
        let (x, xbar, q) = construct_3d(cfg);
        assert!(close(dot(&x, &q), oracle, 1e-9));
        assert!(close(dot(&x, &xbar), cfg.alpha.cos(), 1e-12));
        assert!(close(dot(&q, &xbar), cfg.beta.cos(), 1e-12));
    }
}

#[test]
fn region_examples() {
    let (lo, hi) = angle_bound_region(FRAC_PI_4, FRAC_PI_4).unwrap();
    assert!(close(lo, 0.0938, 5e-5), "{lo}");
    assert!(close(hi, 1.0, 1e-12));
    for a in [0.1, 0.7, 1.3] {
        let (_, hi) = angle_bound_region(a, a).unwrap();
        assert!(close(hi, 1.0, 1e-12));
    }
    for bad in [0.0, FRAC_PI_2, -0.1, 2.0] {
        assert!(angle_bound_region(bad, 0.5).is_err());
        assert!(angle_bound_region(0.5, bad).is_err());
    }
}

/// Fraction of a fine `t` grid over `(0, π/2)` where `u ≤ η`, scaled to
/// radians, measured on the explicit 3-D vectors.
fn measured_width(alpha: f64, beta: f64) -> f64 {
    let steps = 20_000;
    let h = FRAC_PI_2 / steps as f64;
    let ok = (0..steps)
        .filter(|&i| {
            let cfg = AngleConfig {
                alpha,
                beta,
                t: (i as f64 + 0.5) * h,
            };
            let (u, eta) = angle_bound_errors(cfg).unwrap();
            u.is_some_and(|u| u <= eta)
        })
        .count();
    ok as f64 * h
}

#[test]
fn feasible_width_matches_geometry() {
    for (a, b) in [(0.1, 0.3), (0.3, 0.1), (0.2, 0.4), (0.5, 0.05), (1.2, 0.3), (0.3, 1.2), (0.7, 0.7)] {
        let w = feasible_width(a, b).unwrap();
        assert!(close(w, measured_width(a, b), 1e-3), "({a}, {b}): {w}");
    }
}

#[test]
fn feasible_width_grid_layout() {
    let grid = feasible_width_grid(12).unwrap();
    assert_eq!(grid.len(), 144);
    assert!(grid.iter().all(|g| (0.0..=FRAC_PI_2).contains(&g.2)));
    // small angles with α > β cover almost the whole range; α < β does not
    let w = |a, b| grid.iter().find(|g| close(g.0, a, 1e-12) && close(g.1, b, 1e-12)).unwrap().2;
    let h = FRAC_PI_2 / 12.0;
    assert!(w(2.5 * h, 0.5 * h) > 0.9 * FRAC_PI_2);
    assert!(w(0.5 * h, 2.5 * h) < 0.5 * FRAC_PI_2);
    assert!(feasible_width_grid(0).is_err());
}

#[test]
fn bound_holds_inside_and_fails_outside() {
    let inside = verify_angle_bound(20_000, 5).unwrap();
    assert_eq!(inside.violations, 0, "{inside:?}");
    let outside = verify_angle_bound_outside(2_000, 6).unwrap();
    assert!(outside.violations > 0);
    assert!(verify_angle_bound(0, 1).is_err());
}

#[test]
fn bound_boundary_case() {
    // α = β with cos t = 1: x̄, x and q are coplanar and x = q direction
    let (u, eta) = angle_bound_errors(AngleConfig {
        alpha: 0.6,
        beta: 0.6,
        t: 0.0,
    })
    .unwrap();
    assert!(u.unwrap() <= eta + 1e-12);
}

#[test]
fn slope_and_pearson() {
    assert_eq!(zero_intercept_slope(&[(1.0, 2.0), (2.0, 4.0)]), Some(2.0));
    assert_eq!(zero_intercept_slope(&[(0.0, 1.0)]), None);
    // through-origin slope differs from the ordinary one on offset data
    let s = zero_intercept_slope(&[(1.0, 2.0), (2.0, 3.0)]).unwrap();
    assert!(close(s, 8.0 / 5.0, 1e-15));
    assert!(close(pearson(&[(1.0, 1.0), (2.0, 3.0), (3.0, 5.0)]).unwrap(), 1.0, 1e-15));
    assert!(close(pearson(&[(1.0, 3.0), (2.0, 2.0), (3.0, 1.0)]).unwrap(), -1.0, 1e-15));
    assert_eq!(pearson(&[(1.0, 1.0), (1.0, 2.0)]), None);
    assert_eq!(pearson(&[(1.0, 1.0)]), None);
}

fn random_triples(n: usize, d: usize, seed: u64) -> Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let mut rng = crate::rng::rng_from(seed);
    let mut v = |s: f64| (0..d).map(|_| s * (rng.random::<f64>() - 0.5)).collect::<Vec<f64>>();
    (0..n)
        .map(|_| {
            let x = v(4.0);
            let noise = v(1.0);
            let xt = x.iter().zip(&noise).map(|(a, b)| a + b).collect();
            (x, xt, v(2.0))
        })
        .collect()
}

#[test]
fn norm_cloud_is_the_identity_line() {
    let study = scatter_from_triples(&random_triples(5_000, 6, 7)).unwrap();
    for r in study.rows.iter().filter(|r| r.kind == ErrorKind::Norm) {
        assert!(close(r.error, r.ip_error, 1e-9));
    }
    let s = &study.summary;
    assert!(close(s.norm_slope.unwrap(), 1.0, 1e-9));
    assert!(close(s.norm_pearson.unwrap(), 1.0, 1e-9));
    assert_eq!(s.intercept, "zero");
    assert_eq!(s.pairs + s.skipped, 5_000);
}

#[test]
fn scatter_skips_orthogonal_pairs() {
    let t = vec![
        (vec![1.0, 0.0], vec![1.0, 0.1], vec![0.0, 1.0]),
        (vec![1.0, 0.0], vec![1.0, 0.1], vec![1.0, 1.0]),
    ];
    let s = scatter_from_triples(&t).unwrap();
    assert_eq!((s.summary.pairs, s.summary.skipped), (1, 1));
    assert_eq!(s.rows.len(), 2);
}

fn quantized(kind: QuantizerKind, m: usize) -> (Dataset, Dataset, AnyModel, Codes) {
    let data = synthesize(3_000, 16, NormProfile::Longtail, 8).unwrap();
    let queries = synthesize(40, 16, NormProfile::Constant, 9).unwrap();
    let p = TrainParams {
        kmeans: KMeansParams {
            seed: 10,
            max_iters: 15,
            ..KMeansParams::default()
        },
        ..TrainParams::default()
    };
    let model = AnyModel::Vq(train(kind, &data, m, 16, &p).unwrap().model);
    let index = EncodedIndex::build(model, &data).unwrap();
    let codes = index.codes().clone();
    (data, queries, index.model().clone(), codes)
}

#[test]
fn quantized_clouds() {
    let (data, queries, model, codes) = quantized(QuantizerKind::Pq, 8);
    let truth = brute_force_topk(&data, &queries, 20).unwrap();
    let study = error_study(&model, &codes, &data, &queries, &truth).unwrap();
    let s = &study.summary;
    assert!(close(s.norm_slope.unwrap(), 1.0, 1e-9));
    assert!(close(s.norm_pearson.unwrap(), 1.0, 1e-9));
    // the angular cloud is not a line
    assert!(s.angular_pearson.unwrap() < 0.9, "{s:?}");
    assert!(s.angular_slope.unwrap() > 0.0);
    assert_eq!(s.pairs + s.skipped, 40 * 20);
    assert_eq!(study.rows.len(), 2 * s.pairs);
}

#[test]
fn exact_reconstruction_gives_a_degenerate_cloud() {
    let data = synthesize(50, 4, NormProfile::Gaussian, 11).unwrap();
    let t: Vec<_> = data
        .rows()
        .map(|x| {
            let x = widen(x);
            (x.clone(), x, vec![1.0, 0.5, -0.2, 0.3])
        })
        .collect();
    let s = scatter_from_triples(&t).unwrap();
    assert!(s.rows.iter().all(|r| r.error.abs() < 1e-12 && r.ip_error.abs() < 1e-12));
    assert_eq!(s.summary.norm_pearson, None);
}

#[test]
fn euclidean_examples() {
    assert_eq!(euclidean_error(&[1.0, 2.0], &[1.0, 2.0], &[0.0, 0.0]).unwrap(), 0.0);
    assert_eq!(euclidean_error(&[1.0, 0.0], &[-1.0, 0.0], &[2.0, 0.0]).unwrap(), 2.0);
    assert!(euclidean_error(&[1.0, 0.0], &[0.0, 0.0], &[1.0, 0.0]).is_err());
}

#[test]
fn angular_error_dominates_euclidean_error() {
    let (data, queries, model, codes) = quantized(QuantizerKind::Rq, 4);
    let truth = brute_force_knn(&data, &queries, 20).unwrap();
    let s = euclidean_study(&model, &codes, &data, &queries, &truth).unwrap().summary;
    assert!(s.angular_slope.unwrap() > s.norm_slope.unwrap(), "{s:?}");
}

#[test]
fn scatter_csv_layout() {
    let study = scatter_from_triples(&random_triples(10, 3, 12)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.csv");
    study.write_csv(&path).unwrap();
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("kind,error,ip_error"));
    assert_eq!(lines.count(), study.rows.len());
    assert!(text.contains("\nnorm,") && text.contains("\nangular,"));
}

fn vec3() -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-10.0f64..10.0, 3)
}

proptest! {
    #[test]
    fn hat_ip_error_equals_norm_error(x in vec3(), xt in vec3(), q in vec3()) {
        prop_assume!(norm(&x) > 1e-3 && norm(&xt) > 1e-3 && dot(&q, &x).abs() > 1e-6);
        let hat = construct_hat(&x, &xt).unwrap();
        let e = error_triple(&x, &hat, &q).unwrap();
        prop_assert!((e.u.unwrap() - e.gamma).abs() <= 1e-9);
        let g = error_triple(&x, &xt, &q).unwrap().gamma;
        prop_assert!((e.gamma - g).abs() <= 1e-9);
    }

    #[test]
    fn bar_has_zero_norm_error(x in vec3(), xt in vec3(), q in vec3()) {
        prop_assume!(norm(&x) > 1e-3 && norm(&xt) > 1e-3);
        let bar = construct_bar(&x, &xt).unwrap();
        let e = error_triple(&x, &bar, &q).unwrap();
        prop_assert!(e.gamma <= 1e-12);
        let direct = error_triple(&x, &xt, &q).unwrap().eta;
        prop_assert!((e.eta - direct).abs() <= 1e-9);
    }

    #[test]
    fn triple_ranges(x in vec3(), xt in vec3(), q in vec3()) {
        prop_assume!(norm(&x) > 1e-3 && norm(&xt) > 1e-3);
        let e = error_triple(&x, &xt, &q).unwrap();
        prop_assert!(e.gamma >= 0.0);
        prop_assert!((-1e-12..=2.0 + 1e-12).contains(&e.eta));
        if let Some(u) = e.u {
            prop_assert!(u >= 0.0);
        }
    }

    #[test]
    fn region_is_ordered(a in 0.01f64..1.56, b in 0.01f64..1.56) {
        let (lo, hi) = angle_bound_region(a, b).unwrap();
        prop_assert!(lo <= hi);
    }
}

