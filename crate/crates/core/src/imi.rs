//! Inverted multi-index over two codebooks, for inner-product candidate
//! generation.
//!
//! Cells `(i, j)` are visited in non-increasing order of a cell score that is
//! monotone in both coordinates once each coordinate's codewords are sorted
//! by their partial score (multi-sequence traversal). The VQ variant scores
//! `qᵀc¹[i] + qᵀc²[j]`; the NEQ variant scores `l[i] · qᵀc[j]` and splits the
//! directions by the sign of `qᵀc[j]` so the product stays monotone.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::clustering::{scalar_kmeans, spherical_kmeans, KMeansParams};
use crate::data::{decompose, Dataset};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{dot, dot_f32, norm, sq_dist, widen, Matrix};
use crate::rng::derive_seed;
use crate::vq::{Codes, QuantizerModel};

/// `K × K` posting lists, row-major by `(first index, second index)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiIndex {
    k: usize,
    lists: Vec<Vec<u32>>,
}

impl MultiIndex {
    /// Partitions item ids by their two-index code.
    pub fn build(codes: &Codes, k: usize) -> Result<Self> {
        check_dim(2, codes.code_len())?;
        if k == 0 {
            return Err(Error::Config("K must be >= 1".into()));
        }
        if codes.len() > u32::MAX as usize {
            return Err(Error::Range("too many items for 32-bit ids".into()));
        }
        let mut lists = vec![Vec::new(); k * k];
        for (id, c) in codes.iter().enumerate() {
            let (i, j) = (usize::from(c[0]), usize::from(c[1]));
            if i >= k || j >= k {
                return Err(Error::Domain(format!("item {id} coded ({i}, {j}) outside K={k}")));
            }
            lists[i * k + j].push(id as u32);
        }
        Ok(Self { k, lists })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn list(&self, i: usize, j: usize) -> &[u32] {
        &self.lists[i * self.k + j]
    }

    pub fn len(&self) -> usize {
        self.lists.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One visited cell.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
    pub score: f64,
    /// 1 or 2; VQ traversals only have phase 1.
    pub phase: u8,
}

/// Result of a traversal.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Traversal {
    /// Items in cell order.
    pub ids: Vec<usize>,
    /// Every visited cell in emission order, empty ones included.
    pub cells: Vec<Cell>,
    /// Priority-queue size after each emitted cell.
    pub frontier: Vec<usize>,
    pub stopped_early: bool,
}

impl Traversal {
    pub fn max_frontier(&self) -> usize {
        self.frontier.iter().copied().max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    score: f64,
    row: usize,
    col: usize,
    a: usize,
    b: usize,
}

impl PartialEq for Entry {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl Ord for Entry {
    // max-heap: higher score first, then lower row id, then lower col id
    fn cmp(&self, o: &Self) -> Ordering {
        self.score
            .total_cmp(&o.score)
            .then(o.row.cmp(&self.row))
            .then(o.col.cmp(&self.col))
    }
}

/// Codeword ids sorted by partial score; `descending` ties go to lower ids.
fn order(values: &[f64], ids: impl Iterator<Item = usize>, descending: bool) -> Vec<(usize, f64)> {
    let mut v: Vec<(usize, f64)> = ids.map(|i| (i, values[i])).collect();
    v.sort_by(|x, y| {
        let c = x.1.total_cmp(&y.1);
        let c = if descending { c.reverse() } else { c };
        c.then(x.0.cmp(&y.0))
    });
    v
}

/// Multi-sequence walk over `rows × cols` (both pre-sorted). The visited set
/// is a staircase: `row_len[a]` cells of sorted row `a` have been emitted.
struct Walker<F> {
    rows: Vec<(usize, f64)>,
    cols: Vec<(usize, f64)>,
    score: F,
    heap: BinaryHeap<Entry>,
    row_len: Vec<usize>,
}

impl<F: Fn(f64, f64) -> f64> Walker<F> {
    fn new(rows: Vec<(usize, f64)>, cols: Vec<(usize, f64)>, score: F) -> Self {
        let mut w = Self {
            row_len: vec![0; rows.len()],
            rows,
            cols,
            score,
            heap: BinaryHeap::new(),
        };
        if !w.rows.is_empty() && !w.cols.is_empty() {
            w.push(0, 0);
        }
        w
    }

    fn push(&mut self, a: usize, b: usize) {
        let (r, c) = (self.rows[a], self.cols[b]);
        self.heap.push(Entry {
            score: (self.score)(r.1, c.1),
            row: r.0,
            col: c.0,
            a,
            b,
        });
    }

    fn next(&mut self) -> Option<Entry> {
        let e = self.heap.pop()?;
        let (a, b) = (e.a, e.b);
        self.row_len[a] = b + 1;
        if a + 1 < self.rows.len() && (b == 0 || self.row_len[a + 1] >= b) {
            self.push(a + 1, b);
        }
        if b + 1 < self.cols.len() && (a == 0 || self.row_len[a - 1] >= b + 2) {
            self.push(a, b + 1);
        }
        Some(e)
    }

    fn len(&self) -> usize {
        self.heap.len()
    }
}

/// Inner products of `q` against a candidate list; the best `k` by value,
/// ties to the lower id.
#[derive(Debug, Clone, PartialEq)]
pub struct Reranked {
    pub ids: Vec<usize>,
    pub scores: Vec<f64>,
    /// Fewer than `k` candidates were supplied.
    pub short: bool,
}

pub fn candidate_rerank(ids: &[usize], q: &[f32], data: &Dataset, k: usize) -> Result<Reranked> {
    check_dim(data.dim(), q.len())?;
    if let Some(&bad) = ids.iter().find(|&&i| i >= data.len()) {
        return Err(Error::Domain(format!("candidate {bad} not in the dataset")));
    }
    let qw = widen(q);
    let mut scored: Vec<(f64, usize)> = ids.iter().map(|&i| (dot_f32(&qw, data.row(i)), i)).collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    scored.dedup_by_key(|s| s.1);
    let short = scored.len() < k;
    scored.truncate(k);
    Ok(Reranked {
        ids: scored.iter().map(|s| s.1).collect(),
        scores: scored.iter().map(|s| s.0).collect(),
        short,
    })
}

fn append(index: &MultiIndex, row: usize, col: usize, out: &mut Vec<usize>) {
    out.extend(index.list(row, col).iter().map(|&i| i as usize));
}

/// IMI over a two-codebook quantizer.
#[derive(Debug, Clone, PartialEq)]
pub struct VqImi {
    model: QuantizerModel,
    index: MultiIndex,
}

impl VqImi {
    pub fn build(model: QuantizerModel, data: &Dataset) -> Result<Self> {
        if model.m() != 2 {
            return Err(Error::Config(format!("an IMI needs M=2 codebooks, got {}", model.m())));
        }
        let codes = model.encode_all(data)?;
        let index = MultiIndex::build(&codes, model.k())?;
        Ok(Self { model, index })
    }

    pub fn model(&self) -> &QuantizerModel {
        &self.model
    }

    pub fn index(&self) -> &MultiIndex {
        &self.index
    }
}

/// Visits cells by `qᵀc¹[i] + qᵀc²[j]` until at least `budget` items are
/// gathered or every cell is visited.
pub fn traverse_vq(imi: &VqImi, q: &[f32], budget: usize) -> Result<Traversal> {
    let table = imi.model.ip_table(q)?;
    let k = imi.index.k;
    let rows = order(table.row(0), 0..k, true);
    let cols = order(table.row(1), 0..k, true);
    let mut w = Walker::new(rows, cols, |a, b| a + b);
    let mut out = Traversal::default();
    while out.ids.len() < budget {
        let Some(e) = w.next() else { break };
        append(&imi.index, e.row, e.col, &mut out.ids);
        out.cells.push(Cell {
            row: e.row,
            col: e.col,
            score: e.score,
            phase: 1,
        });
        out.frontier.push(w.len());
    }
    Ok(out)
}

/// IMI over a scalar norm codebook and a unit-norm direction codebook.
#[derive(Debug, Clone, PartialEq)]
pub struct NeqImi {
    /// k-means centers of the item norms.
    norm_centers: Vec<f64>,
    /// Largest item norm in each norm cluster; used as the cell's norm.
    l_max: Vec<f64>,
    /// `K × d` unit direction codewords.
    directions: Matrix,
    /// Largest `‖x/‖x‖ − c[j]‖` over the items of direction cluster `j`.
    radii: Vec<f64>,
    index: MultiIndex,
}

impl NeqImi {
    /// Spherical k-means on the item directions, scalar k-means on the norms.
    pub fn build(data: &Dataset, k: usize, params: &KMeansParams) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Domain("cannot index an empty dataset".into()));
        }
        let dec = decompose(data);
        let dirs = Matrix::from_dataset(&dec.directions);
        let live: Vec<usize> = (0..data.len()).filter(|&i| dec.norms[i] > 0.0).collect();
        if live.is_empty() {
            return Err(Error::Domain("every item has zero norm".into()));
        }
        // f32 storage leaves directions within ~1e-7 of unit length; renormalize in f64.
        let mut train = dirs.select_rows(&live);
        for r in 0..train.rows() {
            let n = norm(train.row(r));
            train.row_mut(r).iter_mut().for_each(|v| *v /= n);
        }
        let sph = spherical_kmeans(&train, k, &params.with_seed(derive_seed(params.seed, "imi-direction")))?;
        let nk = scalar_kmeans(&dec.norms, k, &params.with_seed(derive_seed(params.seed, "imi-norm")))?;
        let norm_centers = nk.centroids.as_slice().to_vec();
        let mut l_max = norm_centers.clone();
        let mut seen = vec![false; k];
        for (i, &a) in nk.assignments.iter().enumerate() {
            if !seen[a] || dec.norms[i] > l_max[a] {
                l_max[a] = dec.norms[i];
                seen[a] = true;
            }
        }
        let directions = sph.centroids;
        let mut col = vec![0usize; data.len()];
        for (slot, &i) in live.iter().enumerate() {
            col[i] = sph.assignments[slot];
        }
        let mut radii = vec![0.0f64; k];
        for (slot, &i) in live.iter().enumerate() {
            let j = col[i];
            radii[j] = radii[j].max(sq_dist(train.row(slot), directions.row(j)).sqrt());
        }
        let mut flat = Vec::with_capacity(2 * data.len());
        for (&a, &c) in nk.assignments.iter().zip(&col) {
            flat.push(a as u16);
            flat.push(c as u16);
        }
        let index = MultiIndex::build(&Codes::new(2, flat)?, k)?;
        Ok(Self {
            norm_centers,
            l_max,
            directions,
            radii,
            index,
        })
    }

    pub fn norm_centers(&self) -> &[f64] {
        &self.norm_centers
    }

    pub fn l_max(&self) -> &[f64] {
        &self.l_max
    }

    pub fn directions(&self) -> &Matrix {
        &self.directions
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn index(&self) -> &MultiIndex {
        &self.index
    }

    fn spherical(&self) -> bool {
        (0..self.directions.rows()).all(|j| (norm(self.directions.row(j)) - 1.0).abs() <= 1e-9)
    }
}

/// Early-termination settings for [`traverse_neq`].
#[derive(Debug, Clone, Copy)]
pub struct EarlyStop<'a> {
    pub k: usize,
    pub data: &'a Dataset,
}

/// Running exact top-`k` of the items seen so far.
struct TopK {
    k: usize,
    heap: BinaryHeap<std::cmp::Reverse<OrdF64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct OrdF64(f64);

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, o: &Self) -> Ordering {
        self.0.total_cmp(&o.0)
    }
}

impl TopK {
    fn offer(&mut self, v: f64) {
        if self.heap.len() < self.k {
            self.heap.push(std::cmp::Reverse(OrdF64(v)));
        } else if let Some(min) = self.heap.peek() {
            if v > min.0 .0 {
                self.heap.pop();
                self.heap.push(std::cmp::Reverse(OrdF64(v)));
            }
        }
    }

    fn kth(&self) -> Option<f64> {
        (self.heap.len() == self.k).then(|| self.heap.peek().map(|r| r.0 .0)).flatten()
    }
}

/// Largest `row_bound(a) · suffix[b]` over unvisited cells of a staircase.
fn remaining_max(row_len: &[usize], rows: &[(usize, f64)], suffix: &[f64]) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for (a, &len) in row_len.iter().enumerate() {
        if len < suffix.len() {
            best = best.max(rows[a].1 * suffix[len]);
        }
    }
    best
}

fn suffix_max(cols: &[(usize, f64)], ub: &[f64]) -> Vec<f64> {
    let mut out = vec![f64::NEG_INFINITY; cols.len()];
    let mut acc = f64::NEG_INFINITY;
    for b in (0..cols.len()).rev() {
        acc = acc.max(ub[cols[b].0]);
        out[b] = acc;
    }
    out
}

/// Two-phase traversal by `l_max[i] · qᵀc[j]`: first the directions with
/// `qᵀc[j] ≥ 0` (norms descending), then, once those are exhausted, the
/// negative ones (norms ascending).
///
/// With `early_stop`, candidates are scored exactly as they arrive and the
/// walk ends once the `k`-th best exceeds `l_max[i] · max(0, ‖q‖ cos(θ_j −
/// ρ_j))` for every unvisited cell, where `θ_j` is the angle between `q` and
/// `c[j]` and `ρ_j` the angular radius of cluster `j`. That bounds every item
/// in the cell.
pub fn traverse_neq(
    imi: &NeqImi,
    q: &[f32],
    budget: usize,
    early_stop: Option<EarlyStop<'_>>,
) -> Result<Traversal> {
    check_dim(imi.directions.cols(), q.len())?;
    let qw = widen(q);
    let k = imi.index.k;
    let p: Vec<f64> = (0..k).map(|j| dot(&qw, imi.directions.row(j))).collect();

    let mut stop = match early_stop {
        Some(es) => {
            check_dim(imi.directions.cols(), es.data.dim())?;
            check_dim(imi.index.len(), es.data.len())?;
            if es.k == 0 {
                return Err(Error::Config("early stop needs k >= 1".into()));
            }
            if !imi.spherical() {
                return Err(Error::Domain("early stop needs unit-norm direction codewords".into()));
            }
            Some((es, TopK { k: es.k, heap: BinaryHeap::new() }))
        }
        None => None,
    };
    // Items of direction cluster j lie within angle rho_j = 2 asin(r_j / 2)
    // of c[j], so their cosine with q is at most cos(max(0, theta_j - rho_j)).
    let qn = norm(&qw);
    let ub: Vec<f64> = (0..k)
        .map(|j| {
            if qn == 0.0 {
                return 0.0;
            }
            let theta = (p[j] / qn).clamp(-1.0, 1.0).acos();
            let rho = 2.0 * (imi.radii[j] / 2.0).min(1.0).asin();
            (qn * (theta - rho).max(0.0).cos()).max(0.0)
        })
        .collect();

    let rows_desc = order(&imi.l_max, 0..k, true);
    let rows_asc = order(&imi.l_max, 0..k, false);
    let pos = order(&p, (0..k).filter(|&j| p[j] >= 0.0), true);
    let neg = order(&p, (0..k).filter(|&j| p[j] < 0.0), true);
    let (suf1, suf2) = (suffix_max(&pos, &ub), suffix_max(&neg, &ub));

    let mut out = Traversal::default();
    let mut phase1 = Walker::new(rows_desc, pos, |l, v| l * v);
    let mut phase2: Option<Walker<_>> = None;
    let mut phase2_row_len = vec![0usize; k];
    while out.ids.len() < budget {
        let (e, phase) = match phase1.next() {
            Some(e) => (e, 1u8),
            None => {
                let w = phase2.get_or_insert_with(|| Walker::new(rows_asc.clone(), neg.clone(), |l, v| l * v));
                match w.next() {
                    Some(e) => (e, 2),
                    None => break,
                }
            }
        };
        let start = out.ids.len();
        append(&imi.index, e.row, e.col, &mut out.ids);
        out.cells.push(Cell {
            row: e.row,
            col: e.col,
            score: e.score,
            phase,
        });
        out.frontier.push(phase1.len() + phase2.as_ref().map_or(0, Walker::len));
        if let Some((es, top)) = stop.as_mut() {
            for &id in &out.ids[start..] {
                top.offer(dot_f32(&qw, es.data.row(id)));
            }
            if let Some(kth) = top.kth() {
                if let Some(w) = &phase2 {
                    phase2_row_len.copy_from_slice(&w.row_len);
                }
                let rem1 = remaining_max(&phase1.row_len, &phase1.rows, &suf1);
                let rows2 = phase2.as_ref().map_or(&rows_asc, |w| &w.rows);
                let rem2 = remaining_max(&phase2_row_len, rows2, &suf2);
                if kth > rem1.max(rem2) {
                    out.stopped_early = true;
                    break;
                }
            }
        }
    }
    Ok(out)
}
