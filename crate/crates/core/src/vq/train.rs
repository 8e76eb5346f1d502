use nalgebra::DMatrix;

use super::{subspace_layout, Codebook, QuantizerKind, QuantizerModel, DEFAULT_BEAM_WIDTH, MAX_K};
use crate::clustering::{lloyd_from, lloyd_kmeans, KMeansParams};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{narrow, sq_dist, Matrix};
use crate::rng::derive_indexed;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainParams {
    pub kmeans: KMeansParams,
    /// Alternation rounds for OPQ.
    pub opq_rounds: usize,
    /// Lloyd iterations per OPQ round after the first.
    pub opq_inner_iters: usize,
    /// Alternation rounds for AQ.
    pub aq_rounds: usize,
    pub beam_width: usize,
    /// Ridge added to singular AQ normal equations.
    pub aq_ridge: f64,
    /// Let PQ/OPQ split `d` into subspaces whose sizes differ by one when
    /// `d % M != 0`. Off by default.
    pub allow_uneven: bool,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            kmeans: KMeansParams::default(),
            opq_rounds: 10,
            opq_inner_iters: 4,
            aq_rounds: 5,
            beam_width: DEFAULT_BEAM_WIDTH,
            aq_ridge: 1e-4,
            allow_uneven: false,
        }
    }
}

/// Training diagnostics.
#[derive(Debug, Clone, Default, PartialEq, serde::Serialize)]
pub struct TrainReport {
    /// Total squared quantization error after initialization and after each
    /// alternation round (OPQ/AQ), or after each codebook (RQ).
    pub error_history: Vec<f64>,
    pub kmeans_iterations: Vec<usize>,
    pub duplicated_centroids: usize,
    /// Largest `|RᵀR − I|` entry after each OPQ round.
    pub rotation_defects: Vec<f64>,
    pub ridge_applied: bool,
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub model: QuantizerModel,
    pub report: TrainReport,
}

pub(crate) fn check_common(m: usize, k: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::Config("M must be >= 1".into()));
    }
    if k == 0 || k > MAX_K {
        return Err(Error::Config(format!("K={k} outside [1, {MAX_K}]")));
    }
    Ok(())
}

fn check_layout(d: usize, m: usize, allow_uneven: bool) -> Result<()> {
    if m > d {
        return Err(Error::Config(format!("M={m} exceeds d={d}")));
    }
    if !d.is_multiple_of(m) && !allow_uneven {
        return Err(Error::Config(format!("d={d} is not divisible by M={m}")));
    }
    Ok(())
}

/// Trains any quantizer kind with the shared parameters.
pub fn train(kind: QuantizerKind, data: &Dataset, m: usize, k: usize, params: &TrainParams) -> Result<Trained> {
    match kind {
        QuantizerKind::Pq => train_pq(data, m, k, params),
        QuantizerKind::Opq => train_opq(data, m, k, params),
        QuantizerKind::Rq => train_rq(data, m, k, params),
        QuantizerKind::Aq => super::train_aq(data, m, k, params),
    }
}

pub(crate) fn nonempty(data: &Dataset) -> Result<()> {
    if data.is_empty() {
        return Err(Error::Domain("cannot train on an empty dataset".into()));
    }
    Ok(())
}

struct PqState {
    centroids: Vec<Matrix>,
    codes: Vec<Vec<u16>>,
    iterations: Vec<usize>,
    duplicated: usize,
}

impl PqState {
    fn reconstruction(&self, layout: &[(usize, usize)], n: usize, d: usize) -> Matrix {
        let mut y = Matrix::zeros(n, d);
        for (sub, &(s, l)) in layout.iter().enumerate() {
            for (i, &c) in self.codes[sub].iter().enumerate() {
                y.row_mut(i)[s..s + l].copy_from_slice(self.centroids[sub].row(usize::from(c)));
            }
        }
        y
    }
}

fn pq_from_scratch(x: &Matrix, layout: &[(usize, usize)], k: usize, params: &KMeansParams) -> Result<PqState> {
    let mut st = PqState {
        centroids: Vec::new(),
        codes: Vec::new(),
        iterations: Vec::new(),
        duplicated: 0,
    };
    for (sub, &(s, l)) in layout.iter().enumerate() {
        let p = params.with_seed(derive_indexed(params.seed, sub as u64));
        let r = lloyd_kmeans(&x.columns(s, l), k, &p)?;
        st.codes.push(r.assignments.iter().map(|&a| a as u16).collect());
        st.iterations.push(r.iterations_run);
        st.duplicated += r.duplicated_centroids;
        st.centroids.push(r.centroids);
    }
    Ok(st)
}

fn pq_codebooks(st: &PqState) -> Result<Vec<Codebook>> {
    st.centroids
        .iter()
        .map(|c| Codebook::new(c.cols(), narrow(c.as_slice())))
        .collect()
}

/// Product quantization: independent k-means per feature subspace.
pub fn train_pq(data: &Dataset, m: usize, k: usize, params: &TrainParams) -> Result<Trained> {
    check_common(m, k)?;
    nonempty(data)?;
    let d = data.dim();
    check_layout(d, m, params.allow_uneven)?;
    let layout = subspace_layout(d, m);
    let x = Matrix::from_dataset(data);
    let st = pq_from_scratch(&x, &layout, k, &params.kmeans)?;
    let y = st.reconstruction(&layout, x.rows(), d);
    let err = total_sq(&x, &y);
    let model = QuantizerModel::from_parts(QuantizerKind::Pq, d, pq_codebooks(&st)?, None, 1, false)?;
    Ok(Trained {
        model,
        report: TrainReport {
            error_history: vec![err],
            kmeans_iterations: st.iterations,
            duplicated_centroids: st.duplicated,
            ..Default::default()
        },
    })
}

fn total_sq(a: &Matrix, b: &Matrix) -> f64 {
    (0..a.rows()).map(|i| sq_dist(a.row(i), b.row(i))).sum()
}

/// `X Rᵀ`: every row rotated by `R`.
fn rotate_rows(x: &Matrix, r: &DMatrix<f64>) -> Matrix {
    let (n, d) = (x.rows(), x.cols());
    let mut out = Matrix::zeros(n, d);
    for i in 0..n {
        let xi = x.row(i);
        let oi = out.row_mut(i);
        for (a, o) in oi.iter_mut().enumerate() {
            *o = (0..d).map(|b| r[(a, b)] * xi[b]).sum();
        }
    }
    out
}

/// Orthogonal Procrustes: the rotation `R` minimizing `Σ‖R x − y‖²` is
/// `U Vᵀ` where `U Σ Vᵀ = Yᵀ X`.
fn procrustes(x: &Matrix, y: &Matrix) -> Result<DMatrix<f64>> {
    let d = x.cols();
    let mut m = DMatrix::<f64>::zeros(d, d);
    for i in 0..x.rows() {
        let (xi, yi) = (x.row(i), y.row(i));
        for a in 0..d {
            let ya = yi[a];
            if ya == 0.0 {
                continue;
            }
            for b in 0..d {
                m[(a, b)] += ya * xi[b];
            }
        }
    }
    let svd = m.svd(true, true);
    let (u, vt) = match (svd.u, svd.v_t) {
        (Some(u), Some(vt)) => (u, vt),
        _ => return Err(Error::Domain("SVD failed during rotation update".into())),
    };
    Ok(u * vt)
}

fn defect(r: &DMatrix<f64>) -> f64 {
    let p = r.transpose() * r;
    let d = r.nrows();
    let mut worst: f64 = 0.0;
    for a in 0..d {
        for b in 0..d {
            let t = if a == b { 1.0 } else { 0.0 };
            worst = worst.max((p[(a, b)] - t).abs());
        }
    }
    worst
}

/// Optimized PQ: alternates PQ codebook refinement on `R x` with an
/// orthogonal Procrustes update of `R`, starting from `R = I`.
pub fn train_opq(data: &Dataset, m: usize, k: usize, params: &TrainParams) -> Result<Trained> {
    check_common(m, k)?;
    nonempty(data)?;
    if params.opq_rounds == 0 {
        return Err(Error::Config("OPQ needs at least one round".into()));
    }
    let d = data.dim();
    check_layout(d, m, params.allow_uneven)?;
    let layout = subspace_layout(d, m);
    let x = Matrix::from_dataset(data);
    let n = x.rows();

    let mut rot = DMatrix::<f64>::identity(d, d);
    let mut st = pq_from_scratch(&x, &layout, k, &params.kmeans)?;
    let mut report = TrainReport {
        kmeans_iterations: st.iterations.clone(),
        duplicated_centroids: st.duplicated,
        ..Default::default()
    };
    for round in 0..params.opq_rounds {
        if round > 0 {
            let z = rotate_rows(&x, &rot);
            let inner = KMeansParams {
                max_iters: params.opq_inner_iters.max(1),
                ..params.kmeans
            };
            for (sub, &(s, l)) in layout.iter().enumerate() {
                let r = lloyd_from(&z.columns(s, l), st.centroids[sub].clone(), &inner)?;
                st.codes[sub] = r.assignments.iter().map(|&a| a as u16).collect();
                st.centroids[sub] = r.centroids;
            }
        }
        let y = st.reconstruction(&layout, n, d);
        rot = procrustes(&x, &y)?;
        let err = total_sq(&rotate_rows(&x, &rot), &y);
        report.error_history.push(err);
        report.rotation_defects.push(defect(&rot));
    }
    let mut rotation = Vec::with_capacity(d * d);
    for a in 0..d {
        for b in 0..d {
            rotation.push(rot[(a, b)] as f32);
        }
    }
    let model = QuantizerModel::from_parts(QuantizerKind::Opq, d, pq_codebooks(&st)?, Some(rotation), 1, false)?;
    Ok(Trained { model, report })
}

/// Residual quantization: codebook `m` is k-means over the residuals left
/// by greedy encoding with codebooks `1..m`.
pub fn train_rq(data: &Dataset, m: usize, k: usize, params: &TrainParams) -> Result<Trained> {
    check_common(m, k)?;
    nonempty(data)?;
    let d = data.dim();
    let mut residual = Matrix::from_dataset(data);
    let mut codebooks = Vec::with_capacity(m);
    let mut report = TrainReport::default();
    for stage in 0..m {
        let p = params.kmeans.with_seed(derive_indexed(params.kmeans.seed, stage as u64));
        let r = lloyd_kmeans(&residual, k, &p)?;
        report.kmeans_iterations.push(r.iterations_run);
        report.duplicated_centroids += r.duplicated_centroids;
        let cb = Codebook::new(d, narrow(r.centroids.as_slice()))?;
        let mut err = 0.0;
        for i in 0..residual.rows() {
            let row = residual.row_mut(i);
            let (best, dist) = cb.nearest(row);
            for (v, &c) in row.iter_mut().zip(cb.word(best)) {
                *v -= f64::from(c);
            }
            err += dist;
        }
        report.error_history.push(err);
        codebooks.push(cb);
    }
    let model = QuantizerModel::from_parts(QuantizerKind::Rq, d, codebooks, None, 1, false)?;
    Ok(Trained { model, report })
}
