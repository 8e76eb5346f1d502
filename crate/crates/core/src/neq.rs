//! Norm-explicit quantization.
//!
//! An item `x` is split into a direction, quantized by an unmodified base VQ
//! with `M − M′` codebooks into `x̄`, and a relative norm `l_x = ‖x‖/‖x̄‖`,
//! quantized by `M′` recursive scalar codebooks. The approximation is
//! `x̃ = (Σ l^m[i^m]) · x̄`, so `‖x̃‖` carries the norm error of the scalar
//! codebooks only.

use crate::clustering::{scalar_kmeans, KMeansParams};
use crate::data::{decompose, Dataset};
use crate::error::{check_dim, Error, Result};
use crate::eval::{brute_force_topk, recall_curve, EncodedIndex};
use crate::linalg::{norm, widen};
use crate::par;
use crate::rng::derive_seed;
use crate::vq::{self, Codes, IpTable, QuantizerKind, QuantizerModel, TrainParams, TrainReport};

/// Index slots taken by an `f32` norm in the exact-norm ablation.
pub const EXACT_NORM_SLOTS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize, serde::Deserialize)]
pub struct NeqParams {
    pub base: TrainParams,
    /// Store `l_x` as an `f32` spread over four one-byte index slots instead
    /// of quantizing it.
    pub exact_norm: bool,
    /// Quantize `x` itself rather than `x/‖x‖`; `l_x = ‖x‖/‖x̃‖`.
    pub raw_direction: bool,
}

/// `M′` scalar codebooks of `K` values each.
#[derive(Debug, Clone, PartialEq)]
pub struct NormCodebooks {
    k: usize,
    books: Vec<Vec<f64>>,
}

impl NormCodebooks {
    pub fn new(books: Vec<Vec<f64>>) -> Result<Self> {
        let k = books.first().map_or(0, Vec::len);
        if books.is_empty() || k == 0 || books.iter().any(|b| b.len() != k) {
            return Err(Error::Domain("norm codebooks must be non-empty and equally sized".into()));
        }
        if books.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Domain("norm codewords must be finite".into()));
        }
        Ok(Self { k, books })
    }

    pub fn m(&self) -> usize {
        self.books.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn books(&self) -> &[Vec<f64>] {
        &self.books
    }

    /// Recursive nearest-codeword quantization (ties to the lowest index);
    /// values outside the codeword range clamp to the extreme codeword.
    pub fn quantize(&self, value: f64) -> Vec<u16> {
        let mut residual = value;
        let mut out = Vec::with_capacity(self.m());
        for book in &self.books {
            let mut best = (0, f64::INFINITY);
            for (i, &c) in book.iter().enumerate() {
                let d = (residual - c).abs();
                if d < best.1 {
                    best = (i, d);
                }
            }
            residual -= book[best.0];
            out.push(best.0 as u16);
        }
        out
    }

    pub fn value(&self, idx: &[u16]) -> f64 {
        self.books.iter().zip(idx).map(|(b, &i)| b[usize::from(i)]).sum()
    }
}

/// Per-item code: `M′` norm indexes followed by `M − M′` direction indexes.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NeqCode {
    pub norm_indexes: Vec<u16>,
    pub direction_indexes: Vec<u16>,
}

impl NeqCode {
    /// The `M` indexes in storage order.
    pub fn to_indexes(&self) -> Vec<u16> {
        let mut v = self.norm_indexes.clone();
        v.extend_from_slice(&self.direction_indexes);
        v
    }
}

/// A trained NEQ model.
#[derive(Debug, Clone, PartialEq)]
pub struct NeqModel {
    m: usize,
    m_prime: usize,
    /// Empty in the exact-norm ablation.
    norms: Option<NormCodebooks>,
    direction: QuantizerModel,
    raw_direction: bool,
}

impl NeqModel {
    /// Assembles a model from parts. `norms = None` selects the exact-norm
    /// ablation, which needs `K ≥ 256` for byte-sized slots.
    pub fn from_parts(norms: Option<NormCodebooks>, direction: QuantizerModel, raw_direction: bool) -> Result<Self> {
        let m_prime = match &norms {
            Some(n) => {
                if n.k() != direction.k() {
                    return Err(Error::Domain("norm and direction codebooks differ in K".into()));
                }
                n.m()
            }
            None => {
                if direction.k() < 256 {
                    return Err(Error::Config("the exact-norm ablation needs K >= 256".into()));
                }
                EXACT_NORM_SLOTS
            }
        };
        Ok(Self {
            m: m_prime + direction.m(),
            m_prime,
            norms,
            direction,
            raw_direction,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn m_prime(&self) -> usize {
        self.m_prime
    }

    pub fn k(&self) -> usize {
        self.direction.k()
    }

    pub fn dim(&self) -> usize {
        self.direction.dim()
    }

    pub fn base_kind(&self) -> QuantizerKind {
        self.direction.kind()
    }

    pub fn norm_codebooks(&self) -> Option<&NormCodebooks> {
        self.norms.as_ref()
    }

    pub fn direction_model(&self) -> &QuantizerModel {
        &self.direction
    }

    pub fn exact_norm(&self) -> bool {
        self.norms.is_none()
    }

    pub fn raw_direction(&self) -> bool {
        self.raw_direction
    }

    fn encode_norm(&self, l: f64) -> Vec<u16> {
        match &self.norms {
            Some(n) => n.quantize(l),
            None => (l as f32).to_le_bytes().iter().map(|&b| u16::from(b)).collect(),
        }
    }

    /// Quantized relative norm of a code's norm indexes.
    pub fn norm_value(&self, norm_idx: &[u16]) -> f64 {
        match &self.norms {
            Some(n) => n.value(norm_idx),
            None => {
                let mut b = [0u8; 4];
                for (dst, &s) in b.iter_mut().zip(norm_idx) {
                    *dst = s as u8;
                }
                f64::from(f32::from_le_bytes(b))
            }
        }
    }

    /// Direction code and relative norm.
    fn split(&self, x: &[f64]) -> (Vec<u16>, f64) {
        let len = norm(x);
        let target: Vec<f64> = if self.raw_direction || len == 0.0 {
            x.to_vec()
        } else {
            x.iter().map(|v| v / len).collect()
        };
        let code = self.direction.encode_unchecked(&target);
        let bar = self.direction.reconstruct_unchecked(&code);
        (code, relative_norm(len, &bar))
    }

    pub fn encode_f64(&self, x: &[f64]) -> Result<NeqCode> {
        check_dim(self.dim(), x.len())?;
        let (dir, l) = self.split(x);
        Ok(NeqCode {
            norm_indexes: self.encode_norm(l),
            direction_indexes: dir,
        })
    }

    pub fn encode(&self, x: &[f32]) -> Result<NeqCode> {
        self.encode_f64(&widen(x))
    }

    /// Encodes every row; each code is stored as its `M` indexes.
    pub fn encode_all(&self, data: &Dataset) -> Result<Codes> {
        check_dim(self.dim(), data.dim())?;
        let per: Vec<Vec<u16>> = par::map_chunks(data.as_slice(), data.dim(), |x| {
            let (dir, l) = self.split(&widen(x));
            let mut v = self.encode_norm(l);
            v.extend(dir);
            v
        });
        Codes::new(self.m, per.concat())
    }

    fn check_code(&self, code: &[u16]) -> Result<()> {
        check_dim(self.m, code.len())?;
        let limit = if self.exact_norm() { 256 } else { self.k() };
        if let Some(&bad) = code[..self.m_prime].iter().find(|&&i| usize::from(i) >= limit) {
            return Err(Error::Domain(format!("norm index {bad} out of range")));
        }
        self.direction.reconstruct(&code[self.m_prime..]).map(|_| ())
    }

    /// `x̃ = (Σ l^m[i^m]) · x̄` from the `M` stored indexes.
    pub fn reconstruct(&self, code: &[u16]) -> Result<Vec<f64>> {
        self.check_code(code)?;
        let l = self.norm_value(&code[..self.m_prime]);
        let bar = self.direction.reconstruct_unchecked(&code[self.m_prime..]);
        Ok(bar.into_iter().map(|v| l * v).collect())
    }

    /// Lookup table over the `M − M′` direction codebooks.
    pub fn ip_table(&self, q: &[f32]) -> Result<IpTable> {
        self.direction.ip_table(q)
    }

    pub fn ip_table_f64(&self, q: &[f64]) -> Result<IpTable> {
        self.direction.ip_table_f64(q)
    }
}

fn relative_norm(len: f64, bar: &[f64]) -> f64 {
    let b = norm(bar);
    if b > 0.0 {
        len / b
    } else {
        len
    }
}

/// Counts the arithmetic of the table-based inner product.
pub trait OpCounter {
    fn lookup(&mut self);
    fn add(&mut self);
    fn mul(&mut self);
}

/// Counter that records nothing; compiles away.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoCount;

impl OpCounter for NoCount {
    #[inline(always)]
    fn lookup(&mut self) {}
    #[inline(always)]
    fn add(&mut self) {}
    #[inline(always)]
    fn mul(&mut self) {}
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub struct OpCount {
    pub lookups: usize,
    pub additions: usize,
    pub multiplications: usize,
}

impl OpCounter for OpCount {
    fn lookup(&mut self) {
        self.lookups += 1;
    }
    fn add(&mut self) {
        self.additions += 1;
    }
    fn mul(&mut self) {
        self.multiplications += 1;
    }
}

/// Approximate `qᵀx` as `l · p`: `l` sums the `M′` norm codewords, `p` the
/// `M − M′` table entries. Both sums start from their first term.
pub fn neq_ip_counted<C: OpCounter>(model: &NeqModel, table: &IpTable, code: &[u16], ops: &mut C) -> f64 {
    let mp = model.m_prime;
    let l = match &model.norms {
        Some(n) => {
            let mut l = 0.0;
            for (j, (book, &i)) in n.books.iter().zip(&code[..mp]).enumerate() {
                ops.lookup();
                if j == 0 {
                    l = book[usize::from(i)];
                } else {
                    ops.add();
                    l += book[usize::from(i)];
                }
            }
            l
        }
        None => {
            for _ in 0..mp {
                ops.lookup();
            }
            model.norm_value(&code[..mp])
        }
    };
    let mut p = 0.0;
    for (j, &i) in code[mp..].iter().enumerate() {
        ops.lookup();
        if j == 0 {
            p = table.get(j, usize::from(i));
        } else {
            ops.add();
            p += table.get(j, usize::from(i));
        }
    }
    ops.mul();
    l * p
}

#[inline]
pub fn neq_ip(model: &NeqModel, table: &IpTable, code: &[u16]) -> f64 {
    neq_ip_counted(model, table, code, &mut NoCount)
}

/// Training diagnostics for [`neq_train`].
#[derive(Debug, Clone, Default, serde::Serialize)]
pub struct NeqReport {
    pub direction: TrainReport,
    /// `l_x` of every training item (0 for zero-norm items).
    pub relative_norms: Vec<f64>,
    /// Mean squared relative-norm residual after each norm codebook.
    pub norm_mse: Vec<f64>,
    /// `l_x − quantized l_x` per training item after the last norm codebook.
    pub norm_residuals: Vec<f64>,
    pub zero_norm_items: usize,
}

#[derive(Debug, Clone)]
pub struct NeqTrained {
    pub model: NeqModel,
    pub report: NeqReport,
}

/// NEQ codebook learning: train the base quantizer on directions, compute
/// relative norms from the direction reconstructions, then learn `M′` norm
/// codebooks recursively on the relative norms.
pub fn neq_train(
    data: &Dataset,
    base_kind: QuantizerKind,
    m: usize,
    m_prime: usize,
    k: usize,
    params: &NeqParams,
) -> Result<NeqTrained> {
    if data.is_empty() {
        return Err(Error::Domain("cannot train on an empty dataset".into()));
    }
    if params.exact_norm {
        if m_prime != EXACT_NORM_SLOTS {
            return Err(Error::Config(format!("the exact-norm ablation uses M'={EXACT_NORM_SLOTS}")));
        }
        if k < 256 {
            return Err(Error::Config("the exact-norm ablation needs K >= 256".into()));
        }
    }
    if m < 2 || m_prime == 0 || m_prime >= m {
        return Err(Error::Config(format!("M'={m_prime} outside [1, M-1] for M={m}")));
    }
    let dec = decompose(data);
    let base = TrainParams {
        allow_uneven: true,
        ..params.base
    };
    let target = if params.raw_direction { data } else { &dec.directions };
    let trained = vq::train(base_kind, target, m - m_prime, k, &base)?;
    let direction = trained.model;
    let codes = direction.encode_all(target)?;
    let rel: Vec<f64> = par::map_range(data.len(), |i| {
        relative_norm(dec.norms[i], &direction.reconstruct_unchecked(codes.get(i)))
    });
    let nonzero: Vec<usize> = (0..data.len()).filter(|&i| dec.norms[i] > 0.0).collect();
    let mut report = NeqReport {
        direction: trained.report,
        zero_norm_items: dec.zero_rows.len(),
        ..Default::default()
    };
    let norms = if params.exact_norm {
        report.norm_residuals = nonzero.iter().map(|&i| rel[i] - f64::from(rel[i] as f32)).collect();
        None
    } else {
        if nonzero.is_empty() {
            return Err(Error::Domain("every item has zero norm".into()));
        }
        let mut residual: Vec<f64> = nonzero.iter().map(|&i| rel[i]).collect();
        let mut books = Vec::with_capacity(m_prime);
        for stage in 0..m_prime {
            let p = KMeansParams {
                seed: derive_seed(params.base.kmeans.seed, &format!("norm-{stage}")),
                ..params.base.kmeans
            };
            let r = scalar_kmeans(&residual, k, &p)?;
            // Rounded to f32 so that persisted models reload bit-exactly.
            let book: Vec<f64> = r.centroids.as_slice().iter().map(|&v| f64::from(v as f32)).collect();
            let single = NormCodebooks::new(vec![book.clone()])?;
            for v in residual.iter_mut() {
                *v -= single.value(&single.quantize(*v));
            }
            report.norm_mse.push(residual.iter().map(|v| v * v).sum::<f64>() / residual.len() as f64);
            books.push(book);
        }
        report.norm_residuals = residual;
        Some(NormCodebooks::new(books)?)
    };
    report.relative_norms = rel;
    let model = NeqModel::from_parts(norms, direction, params.raw_direction)?;
    Ok(NeqTrained { model, report })
}

/// Mean of `|‖x‖ − ‖x̃‖| / ‖x‖` over the non-zero rows.
pub fn mean_relative_norm_error<F>(data: &Dataset, reconstruct: F) -> Result<f64>
where
    F: Fn(usize) -> Result<Vec<f64>> + Sync + Send,
{
    let norms = data.norms();
    let errs: Vec<Result<Option<f64>>> = par::map_range(data.len(), |i| {
        if norms[i] == 0.0 {
            return Ok(None);
        }
        let r = reconstruct(i)?;
        Ok(Some((norms[i] - norm(&r)).abs() / norms[i]))
    });
    let mut sum = 0.0;
    let mut count = 0usize;
    for e in errs {
        if let Some(v) = e? {
            sum += v;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::Domain("no non-zero items to measure".into()));
    }
    Ok(sum / count as f64)
}

/// Mean relative norm error of a NEQ model on `data` with precomputed codes.
pub fn norm_error_report(model: &NeqModel, data: &Dataset, codes: &Codes) -> Result<f64> {
    check_dim(data.len(), codes.len())?;
    mean_relative_norm_error(data, |i| model.reconstruct(codes.get(i)))
}

/// Same measure for a baseline quantizer.
pub fn vq_norm_error(model: &QuantizerModel, data: &Dataset, codes: &Codes) -> Result<f64> {
    check_dim(data.len(), codes.len())?;
    mean_relative_norm_error(data, |i| model.reconstruct(codes.get(i)))
}

/// Outcome of [`select_m_prime`].
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct MPrimeSelection {
    pub best: usize,
    /// `(M′, mean recall at the probe budget)` for every candidate tried.
    pub recalls: Vec<(usize, f64)>,
}

/// Tries every `M′ ∈ [1, M−1]` and keeps the one with the highest mean
/// recall@`probe` for top-`k` on `queries` (ties towards smaller `M′`).
///
/// The queries are used both for selection and, if the caller reuses them,
/// for reporting; pass held-out queries to avoid optimistic numbers.
#[allow(clippy::too_many_arguments)]
pub fn select_m_prime(
    data: &Dataset,
    base_kind: QuantizerKind,
    m: usize,
    k: usize,
    params: &NeqParams,
    queries: &Dataset,
    topk: usize,
    probe: usize,
) -> Result<MPrimeSelection> {
    if queries.is_empty() {
        return Err(Error::Domain("select_m_prime needs sample queries".into()));
    }
    if m < 2 {
        return Err(Error::Config("NEQ needs M >= 2".into()));
    }
    if m == 2 {
        return Ok(MPrimeSelection {
            best: 1,
            recalls: Vec::new(),
        });
    }
    let truth = brute_force_topk(data, queries, topk)?;
    let mut recalls = Vec::with_capacity(m - 1);
    for mp in 1..m {
        let trained = neq_train(data, base_kind, m, mp, k, params)?;
        let index = EncodedIndex::build_neq(trained.model, data)?;
        let curve = recall_curve(&index, queries, &truth, &[probe])?;
        recalls.push((mp, curve.mean[0]));
    }
    let mut best = recalls[0];
    for &r in &recalls[1..] {
        if r.1 > best.1 {
            best = r;
        }
    }
    Ok(MPrimeSelection {
        best: best.0,
        recalls,
    })
}

#[cfg(test)]
mod tests;
