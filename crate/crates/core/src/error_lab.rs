//! Decomposing quantization error into norm and angular parts, and how each
//! propagates into inner-product (and Euclidean) error.

use std::f64::consts::FRAC_PI_2;
use std::io::Write;
use std::path::Path;

use rand::Rng;

use crate::data::Dataset;
use crate::error::{check_dim, Error, Result};
use crate::eval::{AnyModel, GroundTruth};
use crate::linalg::{dot, norm, widen};
use crate::par;
use crate::rng::rng_from;
use crate::vq::Codes;

/// Pairs with `|qᵀx|` below this are left out of scatter studies.
pub const MIN_ABS_IP: f64 = 1e-12;

/// Relative inner-product, norm and angular error of an approximation.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ErrorTriple {
    /// `|qᵀx − qᵀx̃| / |qᵀx|`; `None` when `qᵀx = 0`.
    pub u: Option<f64>,
    /// `|‖x‖ − ‖x̃‖| / ‖x‖`.
    pub gamma: f64,
    /// `1 − cos∠(x, x̃)`.
    pub eta: f64,
}

fn nonzero(v: &[f64], what: &str) -> Result<f64> {
    let n = norm(v);
    if n > 0.0 {
        Ok(n)
    } else {
        Err(Error::Domain(format!("{what} must be non-zero")))
    }
}

pub fn error_triple(x: &[f64], x_tilde: &[f64], q: &[f64]) -> Result<ErrorTriple> {
    check_dim(x.len(), x_tilde.len())?;
    check_dim(x.len(), q.len())?;
    let nx = nonzero(x, "x")?;
    let nt = nonzero(x_tilde, "x̃")?;
    let qx = dot(q, x);
    let u = (qx != 0.0).then(|| (qx - dot(q, x_tilde)).abs() / qx.abs());
    Ok(ErrorTriple {
        u,
        gamma: (nx - nt).abs() / nx,
        eta: 1.0 - dot(x, x_tilde) / (nx * nt),
    })
}

/// `x̂ = ‖x̃‖ · x/‖x‖`: exact direction, the approximation's norm.
pub fn construct_hat(x: &[f64], x_tilde: &[f64]) -> Result<Vec<f64>> {
    check_dim(x.len(), x_tilde.len())?;
    let nx = nonzero(x, "x")?;
    let s = norm(x_tilde) / nx;
    Ok(x.iter().map(|v| v * s).collect())
}

/// `x̄ = ‖x‖ · x̃/‖x̃‖`: exact norm, the approximation's direction.
pub fn construct_bar(x: &[f64], x_tilde: &[f64]) -> Result<Vec<f64>> {
    check_dim(x.len(), x_tilde.len())?;
    let nt = nonzero(x_tilde, "x̃")?;
    let s = norm(x) / nt;
    Ok(x_tilde.iter().map(|v| v * s).collect())
}

/// `α = ∠(x, x̄)`, `β = ∠(q, x̄)`, and the dihedral angle `t` between the
/// planes `(x̄, x)` and `(x̄, q)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct AngleConfig {
    pub alpha: f64,
    pub beta: f64,
    pub t: f64,
}

/// Cosine of the angle between `x` and `q` for a configuration.
pub fn cos_gamma(cfg: AngleConfig) -> f64 {
    let AngleConfig { alpha, beta, t } = cfg;
    alpha.sin() * beta.sin() * t.cos() + alpha.cos() * beta.cos()
}

/// Unit vectors `(x, x̄, q)` in 3-D realizing `cfg`: `x̄` on the third axis,
/// `x` in the first–third plane, `q` rotated out of that plane by `t`.
pub fn construct_3d(cfg: AngleConfig) -> ([f64; 3], [f64; 3], [f64; 3]) {
    let AngleConfig { alpha, beta, t } = cfg;
    let xbar = [0.0, 0.0, 1.0];
    let x = [alpha.sin(), 0.0, alpha.cos()];
    let q = [beta.sin() * t.cos(), beta.sin() * t.sin(), beta.cos()];
    (x, xbar, q)
}

fn check_open(a: f64, name: &str) -> Result<()> {
    if a > 0.0 && a < FRAC_PI_2 {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name}={a} outside (0, π/2)")))
    }
}

/// Bounds on `cos t` within which the inner-product error of `x̄` does not
/// exceed the angular error `1 − cos α`. The bounds may leave `[−1, 1]`.
pub fn angle_bound_region(alpha: f64, beta: f64) -> Result<(f64, f64)> {
    check_open(alpha, "alpha")?;
    check_open(beta, "beta")?;
    let scale = beta.cos() / (alpha.sin() * beta.sin());
    let ca = alpha.cos();
    Ok((scale * (1.0 / (2.0 - ca) - ca), scale * (1.0 / ca - ca)))
}

/// Measure of `t ∈ (0, π/2)` inside the region.
pub fn feasible_width(alpha: f64, beta: f64) -> Result<f64> {
    let (lo, hi) = angle_bound_region(alpha, beta)?;
    let (lo, hi) = (lo.max(0.0), hi.min(1.0));
    Ok(if lo <= hi { lo.acos() - hi.acos() } else { 0.0 })
}

/// `(α, β, width)` on a `steps × steps` grid of cell centers in `(0, π/2)²`.
pub fn feasible_width_grid(steps: usize) -> Result<Vec<(f64, f64, f64)>> {
    if steps == 0 {
        return Err(Error::Config("grid needs at least one step".into()));
    }
    let h = FRAC_PI_2 / steps as f64;
    let mut out = Vec::with_capacity(steps * steps);
    for i in 0..steps {
        for j in 0..steps {
            let (a, b) = ((i as f64 + 0.5) * h, (j as f64 + 0.5) * h);
            out.push((a, b, feasible_width(a, b)?));
        }
    }
    Ok(out)
}

/// `u` of `x̄` against `x` and the angular error `η = 1 − cos α`.
pub fn angle_bound_errors(cfg: AngleConfig) -> Result<(Option<f64>, f64)> {
    let (x, xbar, q) = construct_3d(cfg);
    let e = error_triple(&x, &xbar, &q)?;
    Ok((e.u, e.eta))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize)]
pub struct AngleBoundCheck {
    pub samples: usize,
    pub violations: usize,
    /// Largest `u − η` seen.
    pub max_excess: f64,
}

const TOL: f64 = 1e-9;

fn draw_angle<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let a = rng.random::<f64>() * FRAC_PI_2;
        if a > 0.0 {
            return a;
        }
    }
}

fn run_check<F>(samples: usize, seed: u64, mut draw: F) -> Result<AngleBoundCheck>
where
    F: FnMut(&mut rand_chacha::ChaCha8Rng) -> Result<AngleConfig>,
{
    if samples == 0 {
        return Err(Error::Config("need at least one sample".into()));
    }
    let mut rng = rng_from(seed);
    let mut out = AngleBoundCheck {
        samples,
        violations: 0,
        max_excess: f64::NEG_INFINITY,
    };
    for _ in 0..samples {
        let cfg = draw(&mut rng)?;
        let (u, eta) = angle_bound_errors(cfg)?;
        let Some(u) = u else { continue };
        out.max_excess = out.max_excess.max(u - eta);
        if u > eta + TOL {
            out.violations += 1;
        }
    }
    Ok(out)
}

/// Samples configurations with `cos t` uniform inside the region (clipped to
/// `[−1, 1]`) and counts `u > η + 1e-9`.
pub fn verify_angle_bound(samples: usize, seed: u64) -> Result<AngleBoundCheck> {
    run_check(samples, seed, |rng| loop {
        let (a, b) = (draw_angle(rng), draw_angle(rng));
        let (lo, hi) = angle_bound_region(a, b)?;
        let (lo, hi) = (lo.max(-1.0), hi.min(1.0));
        if lo > hi {
            continue;
        }
        let c = lo + (hi - lo) * rng.random::<f64>();
        return Ok(AngleConfig {
            alpha: a,
            beta: b,
            t: c.clamp(-1.0, 1.0).acos(),
        });
    })
}

/// Same, with `cos t` strictly above the upper bound (needs `α < β`).
pub fn verify_angle_bound_outside(samples: usize, seed: u64) -> Result<AngleBoundCheck> {
    run_check(samples, seed, |rng| loop {
        let (a, b) = (draw_angle(rng), draw_angle(rng));
        let (_, hi) = angle_bound_region(a, b)?;
        if hi >= 1.0 {
            continue;
        }
        let c = hi + (1.0 - hi) * rng.random::<f64>();
        if c <= hi {
            continue;
        }
        return Ok(AngleConfig {
            alpha: a,
            beta: b,
            t: c.acos(),
        });
    })
}

/// Through-origin least-squares slope `Σxy / Σx²`; `None` if `Σx² = 0`.
pub fn zero_intercept_slope(points: &[(f64, f64)]) -> Option<f64> {
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Pearson correlation; `None` when either coordinate is constant.
pub fn pearson(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in points {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorKind {
    Norm,
    Angular,
}

impl ErrorKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Norm => "norm",
            Self::Angular => "angular",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ScatterRow {
    pub kind: ErrorKind,
    pub error: f64,
    pub ip_error: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ScatterSummary {
    /// Always `"zero"`: slopes are fitted through the origin.
    pub intercept: &'static str,
    pub norm_slope: Option<f64>,
    pub norm_pearson: Option<f64>,
    pub angular_slope: Option<f64>,
    pub angular_pearson: Option<f64>,
    pub pairs: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterStudy {
    pub rows: Vec<ScatterRow>,
    pub summary: ScatterSummary,
}

impl ScatterStudy {
    pub fn points(&self, kind: ErrorKind) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter(|r| r.kind == kind)
            .map(|r| (r.error, r.ip_error))
            .collect()
    }

    fn from_pairs(pairs: Vec<Option<[ScatterRow; 2]>>) -> Self {
        let total = pairs.len();
        let rows: Vec<ScatterRow> = pairs.into_iter().flatten().flatten().collect();
        let mut s = Self {
            rows,
            summary: ScatterSummary {
                intercept: "zero",
                norm_slope: None,
                norm_pearson: None,
                angular_slope: None,
                angular_pearson: None,
                pairs: 0,
                skipped: 0,
            },
        };
        let (np, ap) = (s.points(ErrorKind::Norm), s.points(ErrorKind::Angular));
        s.summary.pairs = np.len();
        s.summary.skipped = total - np.len();
        s.summary.norm_slope = zero_intercept_slope(&np);
        s.summary.norm_pearson = pearson(&np);
        s.summary.angular_slope = zero_intercept_slope(&ap);
        s.summary.angular_pearson = pearson(&ap);
        s
    }

    /// `kind,error,ip_error` rows.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "kind,error,ip_error")?;
        for r in &self.rows {
            writeln!(out, "{},{:e},{:e}", r.kind.name(), r.error, r.ip_error)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Norm rows `(γ, u(x̂))` and angular rows `(η, u(x̄))` for given triples.
pub fn scatter_from_triples(triples: &[(Vec<f64>, Vec<f64>, Vec<f64>)]) -> Result<ScatterStudy> {
    let pairs: Vec<Result<Option<[ScatterRow; 2]>>> =
        par::map_range(triples.len(), |i| {
            let (x, xt, q) = &triples[i];
            scatter_pair(x, xt, q, |x, xa, q| Ok(error_triple(x, xa, q)?.u))
        });
    Ok(ScatterStudy::from_pairs(pairs.into_iter().collect::<Result<_>>()?))
}

fn scatter_pair<F>(x: &[f64], x_tilde: &[f64], q: &[f64], measure: F) -> Result<Option<[ScatterRow; 2]>>
where
    F: Fn(&[f64], &[f64], &[f64]) -> Result<Option<f64>>,
{
    if dot(q, x).abs() < MIN_ABS_IP || norm(x) == 0.0 || norm(x_tilde) == 0.0 {
        return Ok(None);
    }
    let base = error_triple(x, x_tilde, q)?;
    let hat = construct_hat(x, x_tilde)?;
    let bar = construct_bar(x, x_tilde)?;
    let (Some(uh), Some(ub)) = (measure(x, &hat, q)?, measure(x, &bar, q)?) else {
        return Ok(None);
    };
    Ok(Some([
        ScatterRow {
            kind: ErrorKind::Norm,
            error: base.gamma,
            ip_error: uh,
        },
        ScatterRow {
            kind: ErrorKind::Angular,
            error: base.eta,
            ip_error: ub,
        },
    ]))
}

fn model_pairs<F>(
    model: &AnyModel,
    codes: &Codes,
    data: &Dataset,
    queries: &Dataset,
    truth: &GroundTruth,
    measure: F,
) -> Result<ScatterStudy>
where
    F: Fn(&[f64], &[f64], &[f64]) -> Result<Option<f64>> + Sync + Send,
{
    check_dim(data.dim(), queries.dim())?;
    check_dim(data.len(), codes.len())?;
    check_dim(queries.len(), truth.len())?;
    let k = truth.k();
    let pairs: Vec<Result<Option<[ScatterRow; 2]>>> = par::map_range(queries.len() * k, |p| {
        let (qi, j) = (p / k, p % k);
        let id = truth.get(qi)[j];
        let q = widen(queries.row(qi));
        let x = widen(data.row(id));
        let xt = model.reconstruct(codes.get(id))?;
        scatter_pair(&x, &xt, &q, &measure)
    });
    Ok(ScatterStudy::from_pairs(pairs.into_iter().collect::<Result<_>>()?))
}

/// For every (query, true top-k item) pair: `(γ, u(x̂))` and `(η, u(x̄))`,
/// with through-origin slopes and Pearson correlations of both clouds.
pub fn error_study(
    model: &AnyModel,
    codes: &Codes,
    data: &Dataset,
    queries: &Dataset,
    truth: &GroundTruth,
) -> Result<ScatterStudy> {
    model_pairs(model, codes, data, queries, truth, |x, xa, q| Ok(error_triple(x, xa, q)?.u))
}

/// `|‖x − q‖ − ‖x̃ − q‖| / ‖x − q‖`.
pub fn euclidean_error(x: &[f64], x_tilde: &[f64], q: &[f64]) -> Result<f64> {
    check_dim(x.len(), x_tilde.len())?;
    check_dim(x.len(), q.len())?;
    let d: f64 = x.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    if d == 0.0 {
        return Err(Error::Domain("x equals q; Euclidean error undefined".into()));
    }
    let dt: f64 = x_tilde.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    Ok((d - dt).abs() / d)
}

/// The scatter study with the Euclidean distance error `v` in place of `u`;
/// `truth` should hold nearest neighbors by distance.
pub fn euclidean_study(
    model: &AnyModel,
    codes: &Codes,
    data: &Dataset,
    queries: &Dataset,
    truth: &GroundTruth,
) -> Result<ScatterStudy> {
    model_pairs(model, codes, data, queries, truth, |x, xa, q| {
        if x.iter().zip(q).all(|(a, b)| a == b) {
            return Ok(None);
        }
        euclidean_error(x, xa, q).map(Some)
    })
}

#[cfg(test)]
mod tests;
