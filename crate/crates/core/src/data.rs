//! Dense datasets, TEXMEX vector files, norm statistics and synthetic data.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::OnceLock;

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::rng_from;

/// Row-major collection of `n` vectors of dimension `d`.
///
/// Entries are always finite. Norms are computed on first use and cached.
#[derive(Debug, Default)]
pub struct Dataset {
    dim: usize,
    data: Vec<f32>,
    norms: OnceLock<Vec<f64>>,
}

impl Clone for Dataset {
    fn clone(&self) -> Self {
        Self {
            dim: self.dim,
            data: self.data.clone(),
            norms: self.norms.clone(),
        }
    }
}

impl PartialEq for Dataset {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.data == other.data
    }
}

impl Dataset {
    pub fn new(dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            if !data.is_empty() {
                return Err(Error::Domain("non-empty dataset with dimension 0".into()));
            }
        } else if !data.len().is_multiple_of(dim) {
            return Err(Error::Domain(format!(
                "buffer of {} entries is not a multiple of d={dim}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!(
                "non-finite entry at row {}",
                pos / dim.max(1)
            )));
        }
        Ok(Self {
            dim,
            data,
            norms: OnceLock::new(),
        })
    }

    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(Error::Domain(format!(
                    "row {i} has length {}, expected {dim}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::new(dim, data)
    }

    /// An empty dataset that still carries a dimension.
    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            data: Vec::new(),
            norms: OnceLock::new(),
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.dim.max(1))
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    /// Euclidean row norms, accumulated in `f64`.
    pub fn norms(&self) -> &[f64] {
        self.norms.get_or_init(|| self.rows().map(row_norm).collect())
    }

    pub fn select(&self, ids: &[usize]) -> Self {
        let mut data = Vec::with_capacity(ids.len() * self.dim);
        for &i in ids {
            data.extend_from_slice(self.row(i));
        }
        Self {
            dim: self.dim,
            data,
            norms: OnceLock::new(),
        }
    }

    /// Uniform sample of `count` rows without replacement, in ascending id
    /// order. Returns a copy of the whole set when `count >= n`.
    pub fn sample(&self, count: usize, seed: u64) -> Self {
        let n = self.len();
        if count >= n {
            return self.clone();
        }
        let mut rng = rng_from(seed);
        let mut ids = sample(&mut rng, n, count).into_vec();
        ids.sort_unstable();
        self.select(&ids)
    }
}

pub(crate) fn row_norm(r: &[f32]) -> f64 {
    r.iter()
        .map(|&v| f64::from(v) * f64::from(v))
        .sum::<f64>()
        .sqrt()
}

/// TEXMEX vector file flavours.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VecFormat {
    Fvecs,
    Bvecs,
    Ivecs,
}

impl VecFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        path.extension()?.to_str()?.parse().ok()
    }

    fn elem_size(self) -> usize {
        match self {
            VecFormat::Bvecs => 1,
            VecFormat::Fvecs | VecFormat::Ivecs => 4,
        }
    }
}

impl FromStr for VecFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fvecs" => Ok(Self::Fvecs),
            "bvecs" => Ok(Self::Bvecs),
            "ivecs" => Ok(Self::Ivecs),
            other => Err(Error::Config(format!("unknown vector format `{other}`"))),
        }
    }
}

/// Reads the raw records of a vector file: `(d, payload bytes)` per record.
fn read_records(path: &Path, format: VecFormat) -> Result<(usize, Vec<Vec<u8>>)> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut records = Vec::new();
    let mut dim: Option<usize> = None;
    let mut header = [0u8; 4];
    loop {
        // Distinguish a clean EOF from a header cut short.
        let mut got = 0;
        while got < 4 {
            let r = reader.read(&mut header[got..])?;
            if r == 0 {
                break;
            }
            got += r;
        }
        if got == 0 {
            break;
        }
        if got < 4 {
            return Err(io::Error::new(io::ErrorKind::UnexpectedEof, "truncated record header").into());
        }
        let d = i32::from_le_bytes(header);
        if d <= 0 {
            return Err(Error::Format(format!(
                "record {} declares non-positive dimension {d}",
                records.len()
            )));
        }
        let d = d as usize;
        match dim {
            None => dim = Some(d),
            Some(prev) if prev != d => {
                return Err(Error::Format(format!(
                    "record {} declares d={d} after d={prev}",
                    records.len()
                )))
            }
            _ => {}
        }
        let mut payload = vec![0u8; d * format.elem_size()];
        reader.read_exact(&mut payload)?;
        records.push(payload);
    }
    Ok((dim.unwrap_or(0), records))
}

/// Reads an fvecs/bvecs/ivecs file; byte and int entries are widened.
pub fn read_vecs(path: impl AsRef<Path>, format: VecFormat) -> Result<Dataset> {
    let (dim, records) = read_records(path.as_ref(), format)?;
    let mut data = Vec::with_capacity(records.len() * dim);
    for rec in &records {
        match format {
            VecFormat::Fvecs => data.extend(
                rec.chunks_exact(4)
                    .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])),
            ),
            VecFormat::Ivecs => data.extend(
                rec.chunks_exact(4)
                    .map(|b| i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f32),
            ),
            VecFormat::Bvecs => data.extend(rec.iter().map(|&b| f32::from(b))),
        }
    }
    Dataset::new(dim, data)
}

/// Writes a dataset. bvecs needs entries in `[0, 255]`, ivecs integral
/// entries that fit an `i32`.
pub fn write_vecs(ds: &Dataset, path: impl AsRef<Path>, format: VecFormat) -> Result<()> {
    // Validate first so a failed write leaves no partial file.
    for (i, &v) in ds.as_slice().iter().enumerate() {
        let ok = match format {
            VecFormat::Fvecs => true,
            VecFormat::Bvecs => (0.0..=255.0).contains(&v) && v.fract() == 0.0,
            VecFormat::Ivecs => v.fract() == 0.0 && v >= i32::MIN as f32 && v <= i32::MAX as f32,
        };
        if !ok {
            return Err(Error::Range(format!(
                "entry {v} (row {}) not representable as {format:?}",
                i / ds.dim().max(1)
            )));
        }
    }
    let mut w = BufWriter::new(File::create(path)?);
    let d = ds.dim() as i32;
    for row in ds.rows().take(ds.len()) {
        w.write_all(&d.to_le_bytes())?;
        for &v in row {
            match format {
                VecFormat::Fvecs => w.write_all(&v.to_le_bytes())?,
                VecFormat::Bvecs => w.write_all(&[v as u8])?,
                VecFormat::Ivecs => w.write_all(&(v as i32).to_le_bytes())?,
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads an ivecs file as integer rows (e.g. ground-truth ids).
pub fn read_ivecs(path: impl AsRef<Path>) -> Result<Vec<Vec<i32>>> {
    let (_, records) = read_records(path.as_ref(), VecFormat::Ivecs)?;
    Ok(records
        .iter()
        .map(|rec| {
            rec.chunks_exact(4)
                .map(|b| i32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect()
        })
        .collect())
}

pub fn write_ivecs(rows: &[Vec<i32>], path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for row in rows {
        w.write_all(&(row.len() as i32).to_le_bytes())?;
        for v in row {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Summary of the row-norm distribution.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct NormStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub stddev: f64,
    /// Equal-width bucket counts over `[0, max]`.
    pub histogram: Vec<usize>,
}

pub fn norm_stats(ds: &Dataset, buckets: usize) -> Result<NormStats> {
    if ds.is_empty() {
        return Err(Error::Domain("norm statistics of an empty dataset".into()));
    }
    if buckets == 0 {
        return Err(Error::Config("histogram needs at least one bucket".into()));
    }
    let norms = ds.norms();
    let n = norms.len() as f64;
    let min = norms.iter().copied().fold(f64::INFINITY, f64::min);
    let max = norms.iter().copied().fold(0.0, f64::max);
    let mean = norms.iter().sum::<f64>() / n;
    let var = norms.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let mut histogram = vec![0usize; buckets];
    for &v in norms {
        let b = if max > 0.0 {
            ((v / max) * buckets as f64) as usize
        } else {
            0
        };
        histogram[b.min(buckets - 1)] += 1;
    }
    Ok(NormStats {
        min,
        max,
        mean,
        stddev: var.sqrt(),
        histogram,
    })
}

/// Norms and unit directions of every row.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub norms: Vec<f64>,
    pub directions: Dataset,
    /// Rows whose norm is zero; their direction is the zero vector.
    pub zero_rows: Vec<usize>,
}

pub fn decompose(ds: &Dataset) -> Decomposition {
    let norms = ds.norms().to_vec();
    let mut data = Vec::with_capacity(ds.as_slice().len());
    let mut zero_rows = Vec::new();
    for (i, row) in ds.rows().take(ds.len()).enumerate() {
        let n = norms[i];
        if n > 0.0 {
            data.extend(row.iter().map(|&v| (f64::from(v) / n) as f32));
        } else {
            zero_rows.push(i);
            data.extend(std::iter::repeat_n(0.0f32, ds.dim()));
        }
    }
    Decomposition {
        norms,
        directions: Dataset {
            dim: ds.dim(),
            data,
            norms: OnceLock::new(),
        },
        zero_rows,
    }
}

/// Shape of the norm distribution of a synthetic dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NormProfile {
    /// Every norm is 1 (SIFT-like).
    Constant,
    /// `|N(1, 0.1)|`.
    Gaussian,
    /// Pareto with scale 1 and shape 3 (long right tail, ImageNet-like).
    Longtail,
    /// `1 − |N(0, 0.15)|` clipped to `(0, 1]`: most items near the maximum.
    Topheavy,
}

impl FromStr for NormProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "constant" => Ok(Self::Constant),
            "gaussian" => Ok(Self::Gaussian),
            "longtail" => Ok(Self::Longtail),
            "topheavy" => Ok(Self::Topheavy),
            other => Err(Error::Config(format!("unknown norm profile `{other}`"))),
        }
    }
}

const PARETO_SHAPE: f64 = 3.0;
const TOPHEAVY_FLOOR: f64 = 1e-3;

impl NormProfile {
    fn draw<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            NormProfile::Constant => 1.0,
            NormProfile::Gaussian => {
                let n = Normal::new(1.0, 0.1).expect("valid normal");
                f64::abs(n.sample(rng))
            }
            NormProfile::Longtail => {
                // inverse CDF of Pareto(x_m = 1, a)
                let u: f64 = rng.random::<f64>();
                (1.0 - u).powf(-1.0 / PARETO_SHAPE)
            }
            NormProfile::Topheavy => {
                let z: f64 = StandardNormal.sample(rng);
                (1.0 - (0.15 * z).abs()).clamp(TOPHEAVY_FLOOR, 1.0)
            }
        }
    }
}

/// Deterministic synthetic dataset: directions uniform on the sphere, norms
/// drawn from `profile`.
pub fn synthesize(n: usize, d: usize, profile: NormProfile, seed: u64) -> Result<Dataset> {
    if n == 0 || d == 0 {
        return Err(Error::Config("synthesize needs n, d >= 1".into()));
    }
    let mut rng = rng_from(seed);
    let mut data = Vec::with_capacity(n * d);
    let mut dir = vec![0.0f64; d];
    for _ in 0..n {
        let len = loop {
            for v in dir.iter_mut() {
                *v = StandardNormal.sample(&mut rng);
            }
            let len = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
            if len > 1e-12 {
                break len;
            }
        };
        let scale = profile.draw(&mut rng) / len;
        data.extend(dir.iter().map(|v| (v * scale) as f32));
    }
    Dataset::new(d, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn reads_hand_built_fvecs() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("a.fvecs");
        let mut bytes = Vec::new();
        for r in 0..2 {
            bytes.extend_from_slice(&4i32.to_le_bytes());
            for c in 0..4 {
                bytes.extend_from_slice(&((r * 4 + c) as f32).to_le_bytes());
            }
        }
        std::fs::write(&path, bytes).unwrap();
        let ds = read_vecs(&path, VecFormat::Fvecs).unwrap();
        assert_eq!((ds.len(), ds.dim()), (2, 4));
        assert_eq!(ds.row(1), &[4.0, 5.0, 6.0, 7.0]);
    }

    #[test]
    fn bvecs_entries_are_widened() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("a.bvecs");
        let mut bytes = 3i32.to_le_bytes().to_vec();
        bytes.extend_from_slice(&[1, 2, 3]);
        std::fs::write(&path, bytes).unwrap();
        let ds = read_vecs(&path, VecFormat::Bvecs).unwrap();
        assert_eq!(ds.row(0), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn inconsistent_dimension_is_a_format_error() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.fvecs");
        let mut bytes = 4i32.to_le_bytes().to_vec();
        bytes.extend_from_slice(&[0u8; 16]);
        bytes.extend_from_slice(&5i32.to_le_bytes());
        bytes.extend_from_slice(&[0u8; 20]);
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(
            read_vecs(&path, VecFormat::Fvecs),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn truncated_record_is_an_io_error() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("short.fvecs");
        let mut bytes = 4i32.to_le_bytes().to_vec();
        bytes.extend_from_slice(&[0u8; 10]);
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(read_vecs(&path, VecFormat::Fvecs), Err(Error::Io(_))));
        std::fs::write(&path, [4u8, 0]).unwrap();
        assert!(matches!(read_vecs(&path, VecFormat::Fvecs), Err(Error::Io(_))));
    }

    #[test]
    fn bvecs_rejects_out_of_range() {
        let dir = tempdir().unwrap();
        let ds = Dataset::from_rows(&[[300.0f32, 1.0]]).unwrap();
        let err = write_vecs(&ds, dir.path().join("x.bvecs"), VecFormat::Bvecs);
        assert!(matches!(err, Err(Error::Range(_))));
    }

    #[test]
    fn empty_dataset_round_trips_as_zero_records() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("e.fvecs");
        write_vecs(&Dataset::empty(8), &path, VecFormat::Fvecs).unwrap();
        assert_eq!(std::fs::metadata(&path).unwrap().len(), 0);
        assert_eq!(read_vecs(&path, VecFormat::Fvecs).unwrap().len(), 0);
    }

    #[test]
    fn rejects_non_finite_rows() {
        assert!(Dataset::from_rows(&[[f32::NAN, 1.0]]).is_err());
        assert!(Dataset::from_rows(&[[f32::INFINITY, 1.0]]).is_err());
    }

    #[test]
    fn norm_stats_of_three_four_five() {
        let ds = Dataset::from_rows(&[[3.0f32, 4.0], [0.0, 0.0]]).unwrap();
        let s = norm_stats(&ds, 4).unwrap();
        assert_eq!((s.min, s.max, s.mean), (0.0, 5.0, 2.5));
        assert_eq!(s.histogram.iter().sum::<usize>(), 2);
        assert_eq!(s.histogram, vec![1, 0, 0, 1]);
        assert!(norm_stats(&Dataset::empty(2), 4).is_err());
    }

    #[test]
    fn identical_rows_have_zero_spread() {
        let ds = Dataset::from_rows(&[[1.0f32, 2.0], [1.0, 2.0], [1.0, 2.0]]).unwrap();
        assert_eq!(norm_stats(&ds, 3).unwrap().stddev, 0.0);
    }

    #[test]
    fn norm_stats_agree_with_streaming_recomputation() {
        let ds = synthesize(1000, 8, NormProfile::Gaussian, 3).unwrap();
        let s = norm_stats(&ds, 10).unwrap();
        // Welford's single-pass recurrence as an independent oracle.
        let (mut count, mut mean, mut m2) = (0.0f64, 0.0f64, 0.0f64);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for row in ds.rows() {
            let v = row.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
            count += 1.0;
            let delta = v - mean;
            mean += delta / count;
            m2 += delta * (v - mean);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        assert!((s.mean - mean).abs() < 1e-9);
        assert!((s.stddev - (m2 / count).sqrt()).abs() < 1e-9);
        assert!((s.min - lo).abs() < 1e-9 && (s.max - hi).abs() < 1e-9);
    }

    #[test]
    fn decompose_examples() {
        let ds = Dataset::from_rows(&[[3.0f32, 4.0], [1.0, 0.0], [0.0, 0.0]]).unwrap();
        let dec = decompose(&ds);
        assert_eq!(dec.norms, vec![5.0, 1.0, 0.0]);
        assert!((dec.directions.row(0)[0] - 0.6).abs() < 1e-6);
        assert!((dec.directions.row(0)[1] - 0.8).abs() < 1e-6);
        assert_eq!(dec.directions.row(1), &[1.0, 0.0]);
        assert_eq!(dec.directions.row(2), &[0.0, 0.0]);
        assert_eq!(dec.zero_rows, vec![2]);
    }

    #[test]
    fn constant_profile_has_unit_norms() {
        let ds = synthesize(100, 8, NormProfile::Constant, 7).unwrap();
        assert!(norm_stats(&ds, 4).unwrap().stddev < 1e-7);
        assert_eq!(ds, synthesize(100, 8, NormProfile::Constant, 7).unwrap());
    }

    #[test]
    fn longtail_profile_has_a_long_tail() {
        let ds = synthesize(10_000, 16, NormProfile::Longtail, 11).unwrap();
        let mut norms = ds.norms().to_vec();
        norms.sort_by(f64::total_cmp);
        let median = norms[norms.len() / 2];
        assert!(norms[norms.len() - 1] / median > 3.0);
    }

    #[test]
    fn topheavy_profile_stays_in_unit_interval() {
        let ds = synthesize(2000, 4, NormProfile::Topheavy, 5).unwrap();
        let s = norm_stats(&ds, 10).unwrap();
        assert!(s.max <= 1.0 + 1e-6 && s.min > 0.0);
        // Most mass sits in the top buckets.
        assert!(s.histogram[9] + s.histogram[8] > ds.len() / 2);
    }
}
