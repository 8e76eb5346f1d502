use neq_core::data::{read_ivecs, read_vecs, synthesize, write_ivecs, write_vecs, NormProfile, VecFormat};
use neq_core::eval::{brute_force_topk, recall_curve, AnyModel, EncodedIndex, GroundTruth};
use neq_core::imi::{candidate_rerank, traverse_neq, EarlyStop, NeqImi};
use neq_core::neq::{neq_train, NeqParams};
use neq_core::storage::{deserialize_index, serialize_index};
use neq_core::vq::{train, QuantizerKind, TrainParams};

#[test]
fn files_to_recall_and_back() {
    let dir = tempfile::tempdir().unwrap();
    let data = synthesize(3000, 16, NormProfile::Longtail, 1).unwrap();
    let queries = synthesize(50, 16, NormProfile::Constant, 2).unwrap();
    let (dp, qp, gp) = (dir.path().join("d.fvecs"), dir.path().join("q.fvecs"), dir.path().join("g.ivecs"));
    write_vecs(&data, &dp, VecFormat::Fvecs).unwrap();
    write_vecs(&queries, &qp, VecFormat::Fvecs).unwrap();
    let data = read_vecs(&dp, VecFormat::Fvecs).unwrap();
    let queries = read_vecs(&qp, VecFormat::Fvecs).unwrap();

    let truth = brute_force_topk(&data, &queries, 10).unwrap();
    let rows: Vec<Vec<i32>> = truth.rows().iter().map(|r| r.iter().map(|&i| i as i32).collect()).collect();
    write_ivecs(&rows, &gp).unwrap();
    let back: Vec<Vec<usize>> = read_ivecs(&gp).unwrap().iter().map(|r| r.iter().map(|&i| i as usize).collect()).collect();
    let truth = GroundTruth::new(10, back).unwrap();
    assert!(truth.verify(&data, &queries).unwrap());

    let p = NeqParams {
        base: TrainParams {
            aq_rounds: 2,
            ..TrainParams::default()
        },
        ..NeqParams::default()
    };
    let cps = [10, 100, 1000, 3000];
    for kind in QuantizerKind::ALL {
        let ne = AnyModel::Neq(neq_train(&data, kind, 4, 1, 16, &p).unwrap().model);
        let vq = AnyModel::Vq(train(kind, &data, 4, 16, &p.base).unwrap().model);
        for model in [vq, ne] {
            let index = EncodedIndex::build(model, &data).unwrap();
            let curve = recall_curve(&index, &queries, &truth, &cps).unwrap();
            assert!(curve.mean.windows(2).all(|w| w[0] <= w[1]));
            assert_eq!(*curve.mean.last().unwrap(), 1.0);

            let path = dir.path().join("i.neqx");
            serialize_index(index.model(), index.codes(), &path).unwrap();
            let (m, c) = deserialize_index(&path).unwrap();
            let again = recall_curve(&EncodedIndex::from_parts(m, c).unwrap(), &queries, &truth, &cps).unwrap();
            assert_eq!(again.mean, curve.mean);
        }
    }
}

#[test]
fn multi_index_candidates_feed_exact_rerank() {
    let data = synthesize(4000, 8, NormProfile::Longtail, 3).unwrap();
    let queries = synthesize(30, 8, NormProfile::Constant, 4).unwrap();
    let truth = brute_force_topk(&data, &queries, 5).unwrap();
    let imi = NeqImi::build(&data, 16, &Default::default()).unwrap();
    let mut hits = 0;
    for (qi, q) in queries.rows().enumerate() {
        let t = traverse_neq(&imi, q, 400, None).unwrap();
        assert!(t.ids.len() >= 400);
        let r = candidate_rerank(&t.ids, q, &data, 5).unwrap();
        hits += r.ids.iter().filter(|i| truth.get(qi).contains(i)).count();
        let full = traverse_neq(&imi, q, data.len(), Some(EarlyStop { k: 5, data: &data })).unwrap();
        assert_eq!(candidate_rerank(&full.ids, q, &data, 5).unwrap().ids, truth.get(qi));
    }
    // a tenth of the items already holds most of the true top-5
    assert!(hits as f64 / (30.0 * 5.0) > 0.5, "{hits}");
}
