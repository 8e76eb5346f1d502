//! The baseline vector quantizers (PQ, OPQ, RQ, AQ) behind one model type.
//!
//! A [`QuantizerModel`] approximates `x` by `x̃ = Σ_m c^m[i^m]`: for PQ/OPQ
//! the codewords live in disjoint subspaces and the sum is a concatenation
//! (OPQ additionally rotates by `R`), for RQ/AQ every codeword spans all `d`
//! features. Inner products against a query are served from an [`IpTable`]
//! with `M` lookups per item.

mod aq;
mod train;

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

pub use aq::{aq_beam_encode, train_aq};
pub use train::{train, train_opq, train_pq, train_rq, TrainParams, TrainReport, Trained};

use crate::data::Dataset;
use crate::error::{check_dim, Error, Result};
use crate::linalg::{dot_f32, sq_dist_f32, widen};
use crate::par;

/// Largest supported codebook size; indexes are stored as `u16`.
pub const MAX_K: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuantizerKind {
    Pq,
    Opq,
    Rq,
    Aq,
}

impl QuantizerKind {
    pub const ALL: [QuantizerKind; 4] = [Self::Pq, Self::Opq, Self::Rq, Self::Aq];

    pub fn name(self) -> &'static str {
        match self {
            Self::Pq => "pq",
            Self::Opq => "opq",
            Self::Rq => "rq",
            Self::Aq => "aq",
        }
    }

    /// Whether codewords cover disjoint feature subspaces.
    pub fn is_product(self) -> bool {
        matches!(self, Self::Pq | Self::Opq)
    }
}

impl fmt::Display for QuantizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for QuantizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pq" => Ok(Self::Pq),
            "opq" => Ok(Self::Opq),
            "rq" => Ok(Self::Rq),
            "aq" => Ok(Self::Aq),
            other => Err(Error::Config(format!("unknown quantizer `{other}`"))),
        }
    }
}

/// `K` codewords of dimension `dim`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    dim: usize,
    words: Vec<f32>,
}

impl Codebook {
    pub fn new(dim: usize, words: Vec<f32>) -> Result<Self> {
        if dim == 0 || words.is_empty() || !words.len().is_multiple_of(dim) {
            return Err(Error::Domain(format!(
                "codebook of {} values cannot hold codewords of dimension {dim}",
                words.len()
            )));
        }
        Ok(Self { dim, words })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.words.len() / self.dim
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn word(&self, k: usize) -> &[f32] {
        &self.words[k * self.dim..(k + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.words
    }

    /// Nearest codeword to `x` (ties to the lowest index).
    #[inline]
    pub fn nearest(&self, x: &[f64]) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for k in 0..self.len() {
            let d = sq_dist_f32(x, self.word(k));
            if d < best.1 {
                best = (k, d);
            }
        }
        best
    }
}

/// Codeword indexes of one item, one per codebook.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Code(pub Vec<u16>);

impl Code {
    pub fn as_slice(&self) -> &[u16] {
        &self.0
    }
}

/// Flat `n × M` code storage.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Codes {
    m: usize,
    data: Vec<u16>,
}

impl Codes {
    pub fn new(m: usize, data: Vec<u16>) -> Result<Self> {
        if m == 0 || !data.len().is_multiple_of(m) {
            return Err(Error::Domain(format!(
                "{} code entries do not split into codes of length {m}",
                data.len()
            )));
        }
        Ok(Self { m, data })
    }

    pub fn empty(m: usize) -> Self {
        Self { m, data: Vec::new() }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len().checked_div(self.m).unwrap_or(0)
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn code_len(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn get(&self, i: usize) -> &[u16] {
        &self.data[i * self.m..(i + 1) * self.m]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[u16]> {
        self.data.chunks_exact(self.m.max(1))
    }

    pub fn as_slice(&self) -> &[u16] {
        &self.data
    }

    pub fn push(&mut self, code: &[u16]) -> Result<()> {
        check_dim(self.m, code.len())?;
        self.data.extend_from_slice(code);
        Ok(())
    }

    pub fn extend(&mut self, other: &Codes) -> Result<()> {
        check_dim(self.m, other.m)?;
        self.data.extend_from_slice(&other.data);
        Ok(())
    }
}

/// Balanced split of `d` features into `m` contiguous subspaces: the first
/// `d % m` subspaces take one extra feature.
pub fn subspace_layout(d: usize, m: usize) -> Vec<(usize, usize)> {
    let base = d / m;
    let extra = d % m;
    let mut out = Vec::with_capacity(m);
    let mut start = 0;
    for i in 0..m {
        let len = base + usize::from(i < extra);
        out.push((start, len));
        start += len;
    }
    out
}

/// Precomputed products for AQ beam search.
#[derive(Debug)]
pub(crate) struct AqTables {
    /// `‖c_m[k]‖²`, indexed `m * K + k`.
    pub sq_norms: Vec<f64>,
    /// `c_j[a] · c_m[b]` for `j < m`, one `K × K` block per pair.
    pub cross: Vec<f64>,
}

/// A trained vector quantizer.
#[derive(Debug)]
pub struct QuantizerModel {
    kind: QuantizerKind,
    dim: usize,
    k: usize,
    codebooks: Vec<Codebook>,
    /// Row-major `d × d` orthonormal matrix; `Some` only for OPQ.
    rotation: Option<Vec<f32>>,
    beam_width: usize,
    ridge_applied: bool,
    aq_tables: OnceLock<AqTables>,
}

impl Clone for QuantizerModel {
    fn clone(&self) -> Self {
        Self {
            kind: self.kind,
            dim: self.dim,
            k: self.k,
            codebooks: self.codebooks.clone(),
            rotation: self.rotation.clone(),
            beam_width: self.beam_width,
            ridge_applied: self.ridge_applied,
            aq_tables: OnceLock::new(),
        }
    }
}

impl PartialEq for QuantizerModel {
    fn eq(&self, o: &Self) -> bool {
        self.kind == o.kind
            && self.dim == o.dim
            && self.k == o.k
            && self.codebooks == o.codebooks
            && self.rotation == o.rotation
            && self.beam_width == o.beam_width
            && self.ridge_applied == o.ridge_applied
    }
}

/// Default AQ beam width.
pub const DEFAULT_BEAM_WIDTH: usize = 32;

impl QuantizerModel {
    /// Assembles a model from parts, checking shapes.
    pub fn from_parts(
        kind: QuantizerKind,
        dim: usize,
        codebooks: Vec<Codebook>,
        rotation: Option<Vec<f32>>,
        beam_width: usize,
        ridge_applied: bool,
    ) -> Result<Self> {
        let m = codebooks.len();
        if m == 0 || dim == 0 {
            return Err(Error::Config("a quantizer needs M >= 1 and d >= 1".into()));
        }
        let k = codebooks[0].len();
        if k == 0 || k > MAX_K {
            return Err(Error::Config(format!("K={k} outside [1, {MAX_K}]")));
        }
        if codebooks.iter().any(|c| c.len() != k) {
            return Err(Error::Domain("codebooks differ in size".into()));
        }
        if kind.is_product() {
            if m > dim {
                return Err(Error::Config(format!("M={m} exceeds d={dim}")));
            }
            for (cb, (_, len)) in codebooks.iter().zip(subspace_layout(dim, m)) {
                check_dim(len, cb.dim())?;
            }
        } else {
            for cb in &codebooks {
                check_dim(dim, cb.dim())?;
            }
        }
        match (&rotation, kind) {
            (Some(r), QuantizerKind::Opq) => check_dim(dim * dim, r.len())?,
            (None, QuantizerKind::Opq) => {
                return Err(Error::Domain("OPQ model without rotation".into()))
            }
            (Some(_), _) => return Err(Error::Domain(format!("{kind} model with rotation"))),
            _ => {}
        }
        if kind == QuantizerKind::Aq && beam_width == 0 {
            return Err(Error::Config("beam width must be >= 1".into()));
        }
        Ok(Self {
            kind,
            dim,
            k,
            codebooks,
            rotation,
            beam_width,
            ridge_applied,
            aq_tables: OnceLock::new(),
        })
    }

    pub fn kind(&self) -> QuantizerKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn m(&self) -> usize {
        self.codebooks.len()
    }

    pub fn codebooks(&self) -> &[Codebook] {
        &self.codebooks
    }

    pub fn rotation(&self) -> Option<&[f32]> {
        self.rotation.as_deref()
    }

    pub fn beam_width(&self) -> usize {
        self.beam_width
    }

    /// Whether the AQ least-squares update needed the ridge term.
    pub fn ridge_applied(&self) -> bool {
        self.ridge_applied
    }

    pub fn with_beam_width(mut self, beam_width: usize) -> Self {
        self.beam_width = beam_width.max(1);
        self
    }

    fn layout(&self) -> Vec<(usize, usize)> {
        subspace_layout(self.dim, self.m())
    }

    /// `R x` for OPQ, `x` otherwise.
    pub(crate) fn rotate(&self, x: &[f64]) -> Vec<f64> {
        match &self.rotation {
            Some(r) => r.chunks_exact(self.dim).map(|row| dot_f32(x, row)).collect(),
            None => x.to_vec(),
        }
    }

    fn rotate_back(&self, y: &[f64]) -> Vec<f64> {
        match &self.rotation {
            Some(r) => {
                let mut out = vec![0.0; self.dim];
                for (row, &s) in r.chunks_exact(self.dim).zip(y) {
                    for (o, &v) in out.iter_mut().zip(row) {
                        *o += s * f64::from(v);
                    }
                }
                out
            }
            None => y.to_vec(),
        }
    }

    pub(crate) fn aq_tables(&self) -> &AqTables {
        self.aq_tables.get_or_init(|| aq::build_tables(self))
    }

    /// Encodes an `f64` vector of dimension `d`.
    pub fn encode_f64(&self, x: &[f64]) -> Result<Code> {
        check_dim(self.dim, x.len())?;
        Ok(Code(self.encode_unchecked(x)))
    }

    pub(crate) fn encode_unchecked(&self, x: &[f64]) -> Vec<u16> {
        match self.kind {
            QuantizerKind::Pq | QuantizerKind::Opq => {
                let y = self.rotate(x);
                self.codebooks
                    .iter()
                    .zip(self.layout())
                    .map(|(cb, (s, l))| cb.nearest(&y[s..s + l]).0 as u16)
                    .collect()
            }
            QuantizerKind::Rq => self.greedy_residual(x).0,
            QuantizerKind::Aq => aq::beam_search(self, x, self.beam_width).0,
        }
    }

    /// Greedy residual encoding: nearest codeword per codebook, in order.
    pub(crate) fn greedy_residual(&self, x: &[f64]) -> (Vec<u16>, Vec<f64>) {
        let mut r = x.to_vec();
        let mut code = Vec::with_capacity(self.m());
        for cb in &self.codebooks {
            let (k, _) = cb.nearest(&r);
            for (ri, &c) in r.iter_mut().zip(cb.word(k)) {
                *ri -= f64::from(c);
            }
            code.push(k as u16);
        }
        (code, r)
    }

    pub fn encode(&self, x: &[f32]) -> Result<Code> {
        self.encode_f64(&widen(x))
    }

    /// Encodes every row of `data` (in parallel when enabled).
    pub fn encode_all(&self, data: &Dataset) -> Result<Codes> {
        check_dim(self.dim, data.dim())?;
        if matches!(self.kind, QuantizerKind::Aq) {
            let _ = self.aq_tables();
        }
        let per: Vec<Vec<u16>> =
            par::map_chunks(data.as_slice(), self.dim, |x| self.encode_unchecked(&widen(x)));
        Codes::new(self.m(), per.concat())
    }

    fn check_code(&self, code: &[u16]) -> Result<()> {
        check_dim(self.m(), code.len())?;
        if let Some(&bad) = code.iter().find(|&&i| usize::from(i) >= self.k) {
            return Err(Error::Domain(format!("code index {bad} outside [0, {})", self.k)));
        }
        Ok(())
    }

    /// `x̃` for a code, in the original (unrotated) space.
    pub fn reconstruct(&self, code: &[u16]) -> Result<Vec<f64>> {
        self.check_code(code)?;
        Ok(self.reconstruct_unchecked(code))
    }

    pub(crate) fn reconstruct_unchecked(&self, code: &[u16]) -> Vec<f64> {
        if self.kind.is_product() {
            let mut y = vec![0.0; self.dim];
            for ((cb, (s, l)), &i) in self.codebooks.iter().zip(self.layout()).zip(code) {
                for (dst, &c) in y[s..s + l].iter_mut().zip(cb.word(usize::from(i))) {
                    *dst = f64::from(c);
                }
            }
            self.rotate_back(&y)
        } else {
            let mut y = vec![0.0; self.dim];
            for (cb, &i) in self.codebooks.iter().zip(code) {
                for (dst, &c) in y.iter_mut().zip(cb.word(usize::from(i))) {
                    *dst += f64::from(c);
                }
            }
            y
        }
    }

    /// Query–codeword inner product table.
    pub fn ip_table(&self, q: &[f32]) -> Result<IpTable> {
        self.ip_table_f64(&widen(q))
    }

    pub fn ip_table_f64(&self, q: &[f64]) -> Result<IpTable> {
        check_dim(self.dim, q.len())?;
        let mut entries = Vec::with_capacity(self.m() * self.k);
        if self.kind.is_product() {
            let y = self.rotate(q);
            for (cb, (s, l)) in self.codebooks.iter().zip(self.layout()) {
                entries.extend((0..self.k).map(|k| dot_f32(&y[s..s + l], cb.word(k))));
            }
        } else {
            for cb in &self.codebooks {
                entries.extend((0..self.k).map(|k| dot_f32(q, cb.word(k))));
            }
        }
        Ok(IpTable {
            m: self.m(),
            k: self.k,
            entries,
        })
    }
}

/// `M × K` table of query–codeword inner products.
#[derive(Debug, Clone, PartialEq)]
pub struct IpTable {
    m: usize,
    k: usize,
    entries: Vec<f64>,
}

impl IpTable {
    pub fn from_entries(m: usize, k: usize, entries: Vec<f64>) -> Result<Self> {
        check_dim(m * k, entries.len())?;
        Ok(Self { m, k, entries })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn get(&self, m: usize, k: usize) -> f64 {
        self.entries[m * self.k + k]
    }

    pub fn row(&self, m: usize) -> &[f64] {
        &self.entries[m * self.k..(m + 1) * self.k]
    }

    /// `Σ_m entries[m][code[m]]`.
    #[inline]
    pub fn score(&self, code: &[u16]) -> f64 {
        debug_assert_eq!(code.len(), self.m);
        let mut acc = self.entries[usize::from(code[0])];
        for (m, &i) in code.iter().enumerate().skip(1) {
            acc += self.entries[m * self.k + usize::from(i)];
        }
        acc
    }
}

/// Approximate inner product of a coded item from a lookup table.
pub fn table_ip(table: &IpTable, code: &[u16]) -> Result<f64> {
    check_dim(table.m, code.len())?;
    if code.iter().any(|&i| usize::from(i) >= table.k) {
        return Err(Error::Domain("code index outside the table".into()));
    }
    Ok(table.score(code))
}

/// Sum of squared reconstruction errors over `data`.
pub fn total_error(model: &QuantizerModel, data: &Dataset, codes: &Codes) -> f64 {
    let per = par::map_range(data.len(), |i| {
        let x = widen(data.row(i));
        let xr = model.reconstruct_unchecked(codes.get(i));
        crate::linalg::sq_dist(&x, &xr)
    });
    per.iter().sum()
}
