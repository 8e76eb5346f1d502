use super::*;
use crate::clustering::KMeansParams;
use crate::data::{synthesize, NormProfile};
use crate::linalg::dot;
use crate::rng::rng_from;
use crate::vq::Codebook;
use rand::Rng;

fn params(seed: u64) -> NeqParams {
    NeqParams {
        base: TrainParams {
            kmeans: KMeansParams {
                seed,
                ..KMeansParams::default()
            },
            aq_rounds: 1,
            opq_rounds: 3,
            beam_width: 4,
            ..TrainParams::default()
        },
        ..NeqParams::default()
    }
}

/// A NEQ model over an exact 2-D direction codebook (the four axis units).
fn axis_model(norm_book: Vec<f64>) -> NeqModel {
    let dirs = Codebook::new(2, vec![1.0, 0.0, 0.0, 1.0, -1.0, 0.0, 0.0, -1.0]).unwrap();
    let direction = QuantizerModel::from_parts(QuantizerKind::Rq, 2, vec![dirs], None, 1, false).unwrap();
    NeqModel::from_parts(Some(NormCodebooks::new(vec![norm_book]).unwrap()), direction, false).unwrap()
}

#[test]
fn table_lookup_arithmetic() {
    let model = axis_model(vec![2.0, 1.0, 3.0, 4.0]);
    let t = IpTable::from_entries(1, 4, vec![0.5, 0.0, 0.0, 0.0]).unwrap();
    assert_eq!(neq_ip(&model, &t, &[0, 0]), 1.0);
    // q orthogonal to the used direction codeword
    let t = model.ip_table_f64(&[0.0, 7.0]).unwrap();
    for n in 0..4 {
        assert_eq!(neq_ip(&model, &t, &[n, 0]), 0.0);
    }
}

#[test]
fn exact_composition() {
    let model = axis_model(vec![0.5, 1.5, 3.0, 4.0]);
    let x = [0.0f32, 3.0];
    let code = model.encode(&x).unwrap();
    assert_eq!(code.direction_indexes, vec![1]);
    assert_eq!(code.norm_indexes, vec![2]);
    let rec = model.reconstruct(&code.to_indexes()).unwrap();
    assert!((norm(&rec) - 3.0).abs() < 1e-6);
    let mut rng = rng_from(1);
    for _ in 0..20 {
        let q = [rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5];
        let t = model.ip_table_f64(&q).unwrap();
        let ip = neq_ip(&model, &t, &code.to_indexes());
        assert!((ip - 3.0 * q[1]).abs() < 1e-6);
    }
}

#[test]
fn scaling_keeps_direction_code() {
    let data = synthesize(400, 8, NormProfile::Longtail, 2).unwrap();
    let model = neq_train(&data, QuantizerKind::Rq, 4, 1, 16, &params(3)).unwrap().model;
    for x in data.rows().take(30) {
        let a = model.encode(x).unwrap();
        let scaled: Vec<f32> = x.iter().map(|v| v * 2.0).collect();
        let b = model.encode(&scaled).unwrap();
        assert_eq!(a.direction_indexes, b.direction_indexes);
    }
}

#[test]
fn norm_absorption() {
    let data = synthesize(500, 8, NormProfile::Gaussian, 4).unwrap();
    let trained = neq_train(&data, QuantizerKind::Pq, 4, 1, 16, &params(5)).unwrap();
    let model = &trained.model;
    let codes = model.encode_all(&data).unwrap();
    let nb = model.norm_codebooks().unwrap();
    for (i, code) in codes.iter().enumerate() {
        let bar = model.direction_model().reconstruct(&code[1..]).unwrap();
        let rec = model.reconstruct(code).unwrap();
        let lq = nb.value(&code[..1]);
        assert!((norm(&rec) - lq * norm(&bar)).abs() < 1e-9);
        // with the exact relative norm the item norm is recovered
        let l = trained.report.relative_norms[i];
        assert!((l * norm(&bar) - data.norms()[i]).abs() < 1e-6 * data.norms()[i].max(1.0));
    }
}

#[test]
fn exact_direction_gives_raw_norms() {
    // items on the axes, direction codebook exact: l_x = ‖x‖
    let rows: Vec<[f32; 2]> = (1..=40)
        .map(|i| {
            let s = i as f32 * 0.25;
            match i % 4 {
                0 => [s, 0.0],
                1 => [0.0, s],
                2 => [-s, 0.0],
                _ => [0.0, -s],
            }
        })
        .collect();
    let data = Dataset::from_rows(&rows).unwrap();
    let t = neq_train(&data, QuantizerKind::Rq, 2, 1, 4, &params(6)).unwrap();
    for (l, n) in t.report.relative_norms.iter().zip(data.norms()) {
        assert!((l - n).abs() < 1e-6, "{l} vs {n}");
    }
}

#[test]
fn recursive_norm_residuals_match_training() {
    let data = synthesize(600, 8, NormProfile::Longtail, 7).unwrap();
    let t = neq_train(&data, QuantizerKind::Rq, 4, 2, 16, &params(8)).unwrap();
    let codes = t.model.encode_all(&data).unwrap();
    let nb = t.model.norm_codebooks().unwrap();
    for (i, code) in codes.iter().enumerate() {
        let residual = t.report.relative_norms[i] - nb.value(&code[..2]);
        assert!((residual - t.report.norm_residuals[i]).abs() < 1e-9);
    }
    assert!(t.report.norm_mse[1] <= t.report.norm_mse[0]);
}

#[test]
fn ip_matches_reconstruction_for_every_base() {
    let data = synthesize(300, 8, NormProfile::Longtail, 9).unwrap();
    let queries = synthesize(20, 8, NormProfile::Constant, 10).unwrap();
    for kind in QuantizerKind::ALL {
        let model = neq_train(&data, kind, 4, 1, 8, &params(11)).unwrap().model;
        let codes = model.encode_all(&data).unwrap();
        for q in queries.rows() {
            let t = model.ip_table(q).unwrap();
            let qw = widen(q);
            for c in codes.iter() {
                let direct = dot(&qw, &model.reconstruct(c).unwrap());
                let approx = neq_ip(&model, &t, c);
                assert!((approx - direct).abs() <= 1e-4 * direct.abs() + 1e-9, "{kind}");
            }
        }
    }
}

#[test]
fn op_count_breakdown() {
    let data = synthesize(200, 8, NormProfile::Gaussian, 12).unwrap();
    for (m, mp) in [(4, 1), (4, 2), (8, 3)] {
        let model = neq_train(&data, QuantizerKind::Rq, m, mp, 8, &params(13)).unwrap().model;
        let code = model.encode(data.row(0)).unwrap().to_indexes();
        let t = model.ip_table(data.row(1)).unwrap();
        let mut ops = OpCount::default();
        let v = neq_ip_counted(&model, &t, &code, &mut ops);
        assert_eq!(v, neq_ip(&model, &t, &code));
        assert_eq!(ops.lookups, m);
        // (M′ − 1) + (M − M′ − 1) additions, then one multiplication
        assert_eq!(ops.additions, m - 2);
        assert_eq!(ops.multiplications, 1);
    }
}

#[test]
fn m_prime_range() {
    let data = synthesize(100, 4, NormProfile::Gaussian, 14).unwrap();
    for (m, mp) in [(4, 0), (4, 4), (1, 1)] {
        assert!(matches!(
            neq_train(&data, QuantizerKind::Rq, m, mp, 4, &params(0)),
            Err(Error::Config(_))
        ));
    }
}

#[test]
fn zero_norm_items() {
    let mut rows: Vec<Vec<f32>> = synthesize(100, 4, NormProfile::Gaussian, 15)
        .unwrap()
        .rows()
        .map(<[f32]>::to_vec)
        .collect();
    rows[3] = vec![0.0; 4];
    rows[50] = vec![0.0; 4];
    let data = Dataset::from_rows(&rows).unwrap();
    let t = neq_train(&data, QuantizerKind::Rq, 3, 1, 8, &params(16)).unwrap();
    assert_eq!(t.report.zero_norm_items, 2);
    let code = t.model.encode(&[0.0; 4]).unwrap();
    let nb = t.model.norm_codebooks().unwrap();
    let chosen = nb.books()[0][usize::from(code.norm_indexes[0])];
    assert!(nb.books()[0].iter().all(|&c| c.abs() >= chosen.abs()));
    // zero-norm rows are skipped by the norm error
    let codes = t.model.encode_all(&data).unwrap();
    assert!(norm_error_report(&t.model, &data, &codes).unwrap().is_finite());
}

#[test]
fn norm_error_beats_baseline() {
    let data = synthesize(2000, 16, NormProfile::Topheavy, 17).unwrap();
    let p = params(18);
    let ne = neq_train(&data, QuantizerKind::Rq, 4, 1, 32, &p).unwrap().model;
    let rq = vq::train_rq(&data, 4, 32, &p.base).unwrap().model;
    let ne_err = norm_error_report(&ne, &data, &ne.encode_all(&data).unwrap()).unwrap();
    let rq_err = vq_norm_error(&rq, &data, &rq.encode_all(&data).unwrap()).unwrap();
    assert!(ne_err < rq_err, "ne {ne_err} vs rq {rq_err}");
}

#[test]
fn exact_norm_ablation() {
    let data = synthesize(800, 8, NormProfile::Longtail, 19).unwrap();
    let p = NeqParams {
        exact_norm: true,
        ..params(20)
    };
    assert!(neq_train(&data, QuantizerKind::Rq, 6, 1, 256, &p).is_err());
    assert!(neq_train(&data, QuantizerKind::Rq, 6, 4, 16, &p).is_err());
    let t = neq_train(&data, QuantizerKind::Rq, 6, 4, 256, &p).unwrap();
    assert_eq!(t.model.m(), 6);
    assert_eq!(t.model.direction_model().m(), 2);
    let codes = t.model.encode_all(&data).unwrap();
    for (i, c) in codes.iter().enumerate() {
        let l = t.model.norm_value(&c[..4]);
        assert_eq!(l, f64::from(t.report.relative_norms[i] as f32));
    }
}

#[test]
fn raw_direction_ablation() {
    let data = synthesize(400, 8, NormProfile::Longtail, 21).unwrap();
    let p = NeqParams {
        raw_direction: true,
        ..params(22)
    };
    let t = neq_train(&data, QuantizerKind::Rq, 4, 1, 16, &p).unwrap();
    assert!(t.model.raw_direction());
    let codes = t.model.encode_all(&data).unwrap();
    for (i, c) in codes.iter().enumerate().take(50) {
        let xt = t.model.direction_model().reconstruct(&c[1..]).unwrap();
        assert!((t.report.relative_norms[i] - data.norms()[i] / norm(&xt)).abs() < 1e-9);
    }
}

#[test]
fn select_m_prime_is_argmax() {
    let data = synthesize(600, 8, NormProfile::Longtail, 23).unwrap();
    let queries = synthesize(30, 8, NormProfile::Constant, 24).unwrap();
    let sel = select_m_prime(&data, QuantizerKind::Rq, 4, 16, &params(25), &queries, 10, 50).unwrap();
    assert_eq!(sel.recalls.len(), 3);
    let best = sel.recalls.iter().find(|r| r.0 == sel.best).unwrap().1;
    assert!(sel.recalls.iter().all(|r| r.1 <= best));
    let first_best = sel.recalls.iter().find(|r| r.1 == best).unwrap().0;
    assert_eq!(first_best, sel.best);

    let two = select_m_prime(&data, QuantizerKind::Rq, 2, 16, &params(25), &queries, 10, 50).unwrap();
    assert_eq!(two.best, 1);
    assert!(two.recalls.is_empty());
    assert!(select_m_prime(&data, QuantizerKind::Rq, 4, 16, &params(25), &Dataset::empty(8), 10, 50).is_err());
}
