//! Additive quantization: beam-search encoding and least-squares codebook
//! updates, initialized from RQ.

use super::train::{check_common, nonempty, train_rq, TrainParams, TrainReport, Trained};
use super::{AqTables, Code, Codebook, Codes, QuantizerKind, QuantizerModel};
use crate::data::Dataset;
use crate::error::{check_dim, Error, Result};
use crate::linalg::{dot_f32, narrow, solve_spd, sq_dist, widen};
use crate::par;

/// Cross tables above this many entries are not materialized.
const CROSS_LIMIT: usize = 1 << 24;

fn pair_index(j: usize, m: usize) -> usize {
    m * (m - 1) / 2 + j
}

pub(crate) fn build_tables(model: &QuantizerModel) -> AqTables {
    let (m, k) = (model.m(), model.k());
    let cbs = model.codebooks();
    let wide: Vec<Vec<f64>> = cbs.iter().map(|c| widen(c.as_slice())).collect();
    let d = model.dim();
    let mut sq_norms = Vec::with_capacity(m * k);
    for w in &wide {
        sq_norms.extend(w.chunks_exact(d).map(|c| c.iter().map(|v| v * v).sum::<f64>()));
    }
    let pairs = m * (m - 1) / 2;
    let mut cross = Vec::new();
    if pairs * k * k <= CROSS_LIMIT {
        cross.reserve(pairs * k * k);
        for (mm, cb) in cbs.iter().enumerate().skip(1) {
            for wj in &wide[..mm] {
                for a in 0..k {
                    let ca = &wj[a * d..(a + 1) * d];
                    cross.extend((0..k).map(|b| dot_f32(ca, cb.word(b))));
                }
            }
        }
    }
    AqTables { sq_norms, cross }
}

fn cross_dot(model: &QuantizerModel, t: &AqTables, j: usize, a: usize, m: usize, b: usize) -> f64 {
    let k = model.k();
    if t.cross.is_empty() {
        let ca = widen(model.codebooks()[j].word(a));
        dot_f32(&ca, model.codebooks()[m].word(b))
    } else {
        t.cross[(pair_index(j, m) * k + a) * k + b]
    }
}

fn direct_error(model: &QuantizerModel, x: &[f64], code: &[u16]) -> f64 {
    sq_dist(x, &model.reconstruct_unchecked(code))
}

/// Beam search over the codebooks in order, keeping the `width` partial codes
/// with the smallest residual norm (ties towards the lexicographically
/// smaller code). The greedy path is evaluated too, so the result is never
/// worse than `width = 1`. Returns the code and its squared error.
pub(crate) fn beam_search(model: &QuantizerModel, x: &[f64], width: usize) -> (Vec<u16>, f64) {
    let (m, k) = (model.m(), model.k());
    let width = width.max(1);
    let t = model.aq_tables();
    let x_sq: f64 = x.iter().map(|v| v * v).sum();
    let mut beam: Vec<(f64, Vec<u16>)> = vec![(x_sq, Vec::with_capacity(m))];
    let mut delta = vec![0.0; k];
    for stage in 0..m {
        let cb = &model.codebooks()[stage];
        let sq = &t.sq_norms[stage * k..(stage + 1) * k];
        let xd: Vec<f64> = (0..k).map(|b| dot_f32(x, cb.word(b))).collect();
        let mut cand: Vec<(f64, usize, u16)> = Vec::with_capacity(beam.len() * k);
        for (p, (err, code)) in beam.iter().enumerate() {
            for b in 0..k {
                delta[b] = sq[b] - 2.0 * xd[b];
            }
            for (j, &a) in code.iter().enumerate() {
                let a = usize::from(a);
                if t.cross.is_empty() {
                    for (b, dv) in delta.iter_mut().enumerate() {
                        *dv += 2.0 * cross_dot(model, t, j, a, stage, b);
                    }
                } else {
                    let base = (pair_index(j, stage) * k + a) * k;
                    for (dv, &c) in delta.iter_mut().zip(&t.cross[base..base + k]) {
                        *dv += 2.0 * c;
                    }
                }
            }
            cand.extend(delta.iter().enumerate().map(|(b, &dv)| (err + dv, p, b as u16)));
        }
        let lex = |a: &(f64, usize, u16), b: &(f64, usize, u16)| {
            a.0.total_cmp(&b.0)
                .then_with(|| beam[a.1].1.cmp(&beam[b.1].1))
                .then(a.2.cmp(&b.2))
        };
        if cand.len() > width {
            cand.select_nth_unstable_by(width - 1, lex);
            cand.truncate(width);
        }
        cand.sort_by(lex);
        beam = cand
            .into_iter()
            .map(|(e, p, b)| {
                let mut c = beam[p].1.clone();
                c.push(b);
                (e, c)
            })
            .collect();
    }
    let best = beam.swap_remove(0).1;
    let best_err = direct_error(model, x, &best);
    if width > 1 {
        let greedy = model.greedy_residual(x).0;
        let greedy_err = direct_error(model, x, &greedy);
        if greedy_err < best_err {
            return (greedy, greedy_err);
        }
    }
    (best, best_err)
}

/// Beam-search encoding with an explicit width. Defined for the additive
/// kinds (AQ, and RQ codebooks); product quantizers are rejected.
pub fn aq_beam_encode(model: &QuantizerModel, x: &[f32], beam_width: usize) -> Result<Code> {
    if model.kind().is_product() {
        return Err(Error::Domain(format!("beam search needs full-dimensional codebooks, got {}", model.kind())));
    }
    check_dim(model.dim(), x.len())?;
    Ok(Code(beam_search(model, &widen(x), beam_width).0))
}

/// Least-squares codebook update for fixed codes:
/// `min_C Σ_x ‖x − Σ_m c^m[i^m_x]‖²`, solved through the `MK × MK` normal
/// equations. Returns the new codebooks and whether the ridge was needed.
pub(crate) fn least_squares_update(
    data: &Dataset,
    codes: &Codes,
    k: usize,
    ridge: f64,
) -> Result<(Vec<Vec<f64>>, bool)> {
    let (m, d) = (codes.code_len(), data.dim());
    let n_var = m * k;
    let mut g = vec![0.0; n_var * n_var];
    let mut r = vec![0.0; n_var * d];
    for (i, code) in codes.iter().enumerate() {
        let x = data.row(i);
        for (a, &ia) in code.iter().enumerate() {
            let u = a * k + usize::from(ia);
            for (b, &ib) in code.iter().enumerate() {
                g[u * n_var + b * k + usize::from(ib)] += 1.0;
            }
            for (dst, &v) in r[u * d..(u + 1) * d].iter_mut().zip(x) {
                *dst += f64::from(v);
            }
        }
    }
    let sol = solve_spd(&g, n_var, &r, d, ridge)?;
    let books = (0..m)
        .map(|mm| sol.x[mm * k * d..(mm + 1) * k * d].to_vec())
        .collect();
    Ok((books, sol.ridge_applied))
}

fn error_of(model: &QuantizerModel, data: &Dataset, codes: &Codes) -> Vec<f64> {
    par::map_range(data.len(), |i| direct_error(model, &widen(data.row(i)), codes.get(i)))
}

/// AQ training: RQ initialization, then `aq_rounds` alternations of a
/// least-squares codebook update and beam-search re-encoding. Updates that
/// would raise the total error are rejected, and an item keeps its previous
/// code when the new one is worse.
pub fn train_aq(data: &Dataset, m: usize, k: usize, params: &TrainParams) -> Result<Trained> {
    check_common(m, k)?;
    nonempty(data)?;
    if params.aq_rounds == 0 {
        return Err(Error::Config("AQ needs at least one round".into()));
    }
    let d = data.dim();
    let rq = train_rq(data, m, k, params)?;
    let mut model = QuantizerModel::from_parts(
        QuantizerKind::Aq,
        d,
        rq.model.codebooks().to_vec(),
        None,
        params.beam_width,
        false,
    )?;
    let mut codes = model.encode_all(data)?;
    let mut per = error_of(&model, data, &codes);
    let mut report = TrainReport {
        kmeans_iterations: rq.report.kmeans_iterations,
        duplicated_centroids: rq.report.duplicated_centroids,
        ..Default::default()
    };
    let mut total: f64 = per.iter().sum();
    report.error_history.push(total);
    let mut ridge_used = false;
    for _ in 0..params.aq_rounds {
        let (books, ridge) = least_squares_update(data, &codes, k, params.aq_ridge)?;
        // Codewords no item uses keep their previous value.
        let mut used = vec![false; m * k];
        for code in codes.iter() {
            for (mm, &i) in code.iter().enumerate() {
                used[mm * k + usize::from(i)] = true;
            }
        }
        let mut cbs = Vec::with_capacity(m);
        for (mm, book) in books.iter().enumerate() {
            let mut words = narrow(book);
            let old = model.codebooks()[mm].as_slice();
            for c in 0..k {
                if !used[mm * k + c] {
                    words[c * d..(c + 1) * d].copy_from_slice(&old[c * d..(c + 1) * d]);
                }
            }
            cbs.push(Codebook::new(d, words)?);
        }
        let candidate =
            QuantizerModel::from_parts(QuantizerKind::Aq, d, cbs, None, params.beam_width, ridge_used || ridge)?;
        let cand_per = error_of(&candidate, data, &codes);
        let cand_total: f64 = cand_per.iter().sum();
        if cand_total <= total {
            model = candidate;
            per = cand_per;
            ridge_used |= ridge;
        }
        let fresh = model.encode_all(data)?;
        let fresh_per = error_of(&model, data, &fresh);
        let mut merged = Vec::with_capacity(codes.as_slice().len());
        for i in 0..data.len() {
            if fresh_per[i] < per[i] {
                merged.extend_from_slice(fresh.get(i));
                per[i] = fresh_per[i];
            } else {
                merged.extend_from_slice(codes.get(i));
            }
        }
        codes = Codes::new(m, merged)?;
        total = per.iter().sum();
        report.error_history.push(total);
    }
    report.ridge_applied = ridge_used;
    let model = QuantizerModel::from_parts(
        QuantizerKind::Aq,
        d,
        model.codebooks().to_vec(),
        None,
        params.beam_width,
        ridge_used,
    )?;
    Ok(Trained { model, report })
}
