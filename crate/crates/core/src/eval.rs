//! Ground truth, recall and recall-item curves.

use std::cmp::Ordering;
use std::io::Write;
use std::path::Path;

use crate::data::Dataset;
use crate::error::{check_dim, Error, Result};
use crate::linalg::{dot_f32, sq_dist_f32, widen};
use crate::neq::{neq_ip, NeqModel};
use crate::par;
use crate::vq::{Codes, IpTable, QuantizerKind, QuantizerModel};

/// Exact top-`k` ids per query, best first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruth {
    k: usize,
    ids: Vec<Vec<usize>>,
}

impl GroundTruth {
    pub fn new(k: usize, ids: Vec<Vec<usize>>) -> Result<Self> {
        if k == 0 || ids.iter().any(|r| r.len() != k) {
            return Err(Error::Domain(format!("every ground-truth row must have k={k} ids")));
        }
        Ok(Self { k, ids })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn get(&self, q: usize) -> &[usize] {
        &self.ids[q]
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.ids
    }

    /// Recomputes the exact answer and compares.
    pub fn verify(&self, data: &Dataset, queries: &Dataset) -> Result<bool> {
        Ok(brute_force_topk(data, queries, self.k)? == *self)
    }
}

/// Descending by score, ascending by id on ties.
#[inline]
fn rank_order(scores: &[f64], a: usize, b: usize) -> Ordering {
    scores[b].total_cmp(&scores[a]).then(a.cmp(&b))
}

/// The `t` best ids by score (descending, ties to the lower id), via partial
/// selection followed by a sort of the selected prefix.
pub fn top_t(scores: &[f64], t: usize) -> Vec<usize> {
    let t = t.min(scores.len());
    let mut ids: Vec<usize> = (0..scores.len()).collect();
    if t == 0 {
        return Vec::new();
    }
    if t < ids.len() {
        ids.select_nth_unstable_by(t - 1, |&a, &b| rank_order(scores, a, b));
        ids.truncate(t);
    }
    ids.sort_unstable_by(|&a, &b| rank_order(scores, a, b));
    ids
}

/// Exact maximum-inner-product top-`k` for every query.
pub fn brute_force_topk(data: &Dataset, queries: &Dataset, k: usize) -> Result<GroundTruth> {
    check_dim(data.dim(), queries.dim())?;
    if k == 0 || k > data.len() {
        return Err(Error::Domain(format!("k={k} outside [1, n={}]", data.len())));
    }
    let ids = par::map_range(queries.len(), |qi| {
        let q = widen(queries.row(qi));
        let scores: Vec<f64> = data.rows().map(|x| dot_f32(&q, x)).collect();
        top_t(&scores, k)
    });
    GroundTruth::new(k, ids)
}

/// Exact nearest neighbors by Euclidean distance (ties to the lower id).
pub fn brute_force_knn(data: &Dataset, queries: &Dataset, k: usize) -> Result<GroundTruth> {
    check_dim(data.dim(), queries.dim())?;
    if k == 0 || k > data.len() {
        return Err(Error::Domain(format!("k={k} outside [1, n={}]", data.len())));
    }
    let ids = par::map_range(queries.len(), |qi| {
        let q = widen(queries.row(qi));
        let scores: Vec<f64> = data.rows().map(|x| -sq_dist_f32(&q, x)).collect();
        top_t(&scores, k)
    });
    GroundTruth::new(k, ids)
}

/// `|S′ ∩ S| / |S|`.
pub fn recall_at(ranked: &[usize], truth: &[usize]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    let hits = truth.iter().filter(|t| ranked.contains(t)).count();
    hits as f64 / truth.len() as f64
}

/// Something that can score every indexed item against a query.
pub trait ApproxScorer: Sync {
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    fn dim(&self) -> usize;
    /// One score per item, larger is better.
    fn scores(&self, q: &[f32]) -> Result<Vec<f64>>;
}

/// Exact inner products; recall 1 at `T = k` by construction.
pub struct ExactScorer<'a>(pub &'a Dataset);

impl ApproxScorer for ExactScorer<'_> {
    fn len(&self) -> usize {
        self.0.len()
    }
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn scores(&self, q: &[f32]) -> Result<Vec<f64>> {
        check_dim(self.0.dim(), q.len())?;
        let q = widen(q);
        Ok(self.0.rows().map(|x| dot_f32(&q, x)).collect())
    }
}

/// Either a baseline quantizer or a NEQ model.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyModel {
    Vq(QuantizerModel),
    Neq(NeqModel),
}

impl AnyModel {
    pub fn dim(&self) -> usize {
        match self {
            Self::Vq(m) => m.dim(),
            Self::Neq(m) => m.dim(),
        }
    }

    /// Total code length.
    pub fn m(&self) -> usize {
        match self {
            Self::Vq(m) => m.m(),
            Self::Neq(m) => m.m(),
        }
    }

    pub fn m_prime(&self) -> usize {
        match self {
            Self::Vq(_) => 0,
            Self::Neq(m) => m.m_prime(),
        }
    }

    pub fn k(&self) -> usize {
        match self {
            Self::Vq(m) => m.k(),
            Self::Neq(m) => m.k(),
        }
    }

    pub fn base_kind(&self) -> QuantizerKind {
        match self {
            Self::Vq(m) => m.kind(),
            Self::Neq(m) => m.base_kind(),
        }
    }

    /// `pq`, `ne-pq`, ...
    pub fn label(&self) -> String {
        match self {
            Self::Vq(m) => m.kind().name().to_string(),
            Self::Neq(m) => format!("ne-{}", m.base_kind().name()),
        }
    }

    pub fn encode_all(&self, data: &Dataset) -> Result<Codes> {
        match self {
            Self::Vq(m) => m.encode_all(data),
            Self::Neq(m) => m.encode_all(data),
        }
    }

    pub fn reconstruct(&self, code: &[u16]) -> Result<Vec<f64>> {
        match self {
            Self::Vq(m) => m.reconstruct(code),
            Self::Neq(m) => m.reconstruct(code),
        }
    }

    pub fn ip_table(&self, q: &[f32]) -> Result<IpTable> {
        match self {
            Self::Vq(m) => m.ip_table(q),
            Self::Neq(m) => m.ip_table(q),
        }
    }

    /// Table-based approximate inner product of one code.
    #[inline]
    pub fn score(&self, table: &IpTable, code: &[u16]) -> f64 {
        match self {
            Self::Vq(_) => table.score(code),
            Self::Neq(m) => neq_ip(m, table, code),
        }
    }
}

/// A model together with the codes of an indexed dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedIndex {
    model: AnyModel,
    codes: Codes,
}

impl EncodedIndex {
    pub fn build(model: AnyModel, data: &Dataset) -> Result<Self> {
        let codes = model.encode_all(data)?;
        Ok(Self { model, codes })
    }

    pub fn build_vq(model: QuantizerModel, data: &Dataset) -> Result<Self> {
        Self::build(AnyModel::Vq(model), data)
    }

    pub fn build_neq(model: NeqModel, data: &Dataset) -> Result<Self> {
        Self::build(AnyModel::Neq(model), data)
    }

    pub fn from_parts(model: AnyModel, codes: Codes) -> Result<Self> {
        check_dim(model.m(), codes.code_len())?;
        for code in codes.iter() {
            model.reconstruct(code)?;
        }
        Ok(Self { model, codes })
    }

    pub fn model(&self) -> &AnyModel {
        &self.model
    }

    pub fn codes(&self) -> &Codes {
        &self.codes
    }
}

impl ApproxScorer for EncodedIndex {
    fn len(&self) -> usize {
        self.codes.len()
    }
    fn dim(&self) -> usize {
        self.model.dim()
    }
    fn scores(&self, q: &[f32]) -> Result<Vec<f64>> {
        let table = self.model.ip_table(q)?;
        Ok(self.codes.iter().map(|c| self.model.score(&table, c)).collect())
    }
}

/// Labels a curve with the run that produced it.
#[derive(Debug, Clone, Default, PartialEq, serde::Serialize)]
pub struct CurveMeta {
    pub label: String,
    pub m: usize,
    pub m_prime: usize,
    pub k: usize,
    pub seed: u64,
}

/// Mean recall (and its spread across repetitions) at each probe budget.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct RecallCurve {
    pub checkpoints: Vec<usize>,
    pub mean: Vec<f64>,
    /// Standard deviation across repetitions; zero for a single run.
    pub stddev: Vec<f64>,
    pub meta: CurveMeta,
}

/// Sorted, de-duplicated checkpoints clamped to `[1, n]`.
pub fn normalize_checkpoints(checkpoints: &[usize], n: usize) -> Result<Vec<usize>> {
    if checkpoints.is_empty() {
        return Err(Error::Config("at least one checkpoint is required".into()));
    }
    if checkpoints.contains(&0) {
        return Err(Error::Config("checkpoints must be >= 1".into()));
    }
    let mut v: Vec<usize> = checkpoints.iter().map(|&t| t.min(n)).collect();
    v.sort_unstable();
    v.dedup();
    Ok(v)
}

/// `1, 2, 5, 10, 20, 50, …` below `n`, then `n`.
pub fn default_checkpoints(n: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut base = 1usize;
    'outer: loop {
        for f in [1, 2, 5] {
            let t = base.saturating_mul(f);
            if t >= n {
                break 'outer;
            }
            out.push(t);
        }
        base = base.saturating_mul(10);
    }
    out.push(n.max(1));
    out
}

/// Per-query recall at each (normalized) checkpoint.
pub fn per_query_recalls<S: ApproxScorer + ?Sized>(
    scorer: &S,
    queries: &Dataset,
    truth: &GroundTruth,
    checkpoints: &[usize],
) -> Result<Vec<Vec<f64>>> {
    check_dim(scorer.dim(), queries.dim())?;
    check_dim(truth.len(), queries.len())?;
    let n = scorer.len();
    if n == 0 {
        return Err(Error::Domain("cannot rank an empty index".into()));
    }
    let cps = normalize_checkpoints(checkpoints, n)?;
    let t_max = *cps.last().expect("non-empty");
    let k = truth.k() as f64;
    let rows: Vec<Result<Vec<f64>>> = par::map_range(queries.len(), |qi| {
        let scores = scorer.scores(queries.row(qi))?;
        let ranked = top_t(&scores, t_max);
        let mut is_truth = vec![false; n];
        for &t in truth.get(qi) {
            if t < n {
                is_truth[t] = true;
            }
        }
        let mut out = Vec::with_capacity(cps.len());
        let mut hits = 0usize;
        let mut c = 0;
        for (pos, &id) in ranked.iter().enumerate() {
            hits += usize::from(is_truth[id]);
            while c < cps.len() && cps[c] == pos + 1 {
                out.push(hits as f64 / k);
                c += 1;
            }
        }
        Ok(out)
    });
    rows.into_iter().collect()
}

/// Ranks every item by approximate score per query and reports mean recall
/// at each checkpoint (clamped to `n`).
pub fn recall_curve<S: ApproxScorer + ?Sized>(
    scorer: &S,
    queries: &Dataset,
    truth: &GroundTruth,
    checkpoints: &[usize],
) -> Result<RecallCurve> {
    let rows = per_query_recalls(scorer, queries, truth, checkpoints)?;
    let cps = normalize_checkpoints(checkpoints, scorer.len())?;
    let nq = rows.len().max(1) as f64;
    let mean = (0..cps.len())
        .map(|c| rows.iter().map(|r| r[c]).sum::<f64>() / nq)
        .collect();
    Ok(RecallCurve {
        stddev: vec![0.0; cps.len()],
        checkpoints: cps,
        mean,
        meta: CurveMeta::default(),
    })
}

/// Mean and (population) standard deviation of repeated runs.
pub fn aggregate_repetitions(curves: &[RecallCurve]) -> Result<RecallCurve> {
    let first = curves.first().ok_or_else(|| Error::Domain("no curves to aggregate".into()))?;
    if curves.iter().any(|c| c.checkpoints != first.checkpoints) {
        return Err(Error::Domain("curves have different checkpoints".into()));
    }
    let r = curves.len() as f64;
    let mut mean = Vec::with_capacity(first.checkpoints.len());
    let mut stddev = Vec::with_capacity(first.checkpoints.len());
    for c in 0..first.checkpoints.len() {
        let mu = curves.iter().map(|x| x.mean[c]).sum::<f64>() / r;
        let var = curves.iter().map(|x| (x.mean[c] - mu).powi(2)).sum::<f64>() / r;
        mean.push(mu);
        stddev.push(var.sqrt());
    }
    Ok(RecallCurve {
        checkpoints: first.checkpoints.clone(),
        mean,
        stddev,
        meta: first.meta.clone(),
    })
}

/// `T,mean_recall,stddev` rows.
pub fn write_curve_csv(curve: &RecallCurve, path: impl AsRef<Path>) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "T,mean_recall,stddev")?;
    for ((t, m), s) in curve.checkpoints.iter().zip(&curve.mean).zip(&curve.stddev) {
        writeln!(out, "{t},{m:.6},{s:.6}")?;
    }
    out.flush()?;
    Ok(())
}
