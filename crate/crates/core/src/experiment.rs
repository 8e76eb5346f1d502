//! Runs a [`RunConfig`]: trains every configured quantizer, measures recall
//! curves against exact ground truth, and writes CSV/JSON reports.

use std::path::Path;

use crate::clustering::KMeansParams;
use crate::config::{DataSource, QuantizerSpec, RunConfig};
use crate::data::{read_vecs, synthesize, Dataset, NormProfile, VecFormat};
use crate::error::{Error, Result};
use crate::error_lab::{error_study, ScatterSummary};
use crate::eval::{
    aggregate_repetitions, brute_force_topk, default_checkpoints, recall_curve, AnyModel, CurveMeta,
    EncodedIndex, GroundTruth, RecallCurve,
};
use crate::neq::{mean_relative_norm_error, neq_train, NeqParams};
use crate::rng::{derive_indexed, derive_seed};
use crate::vq::{train, TrainParams};

/// Version of the JSON manifest layout.
pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

/// Per-quantizer outcome.
#[derive(Debug, Clone, serde::Serialize)]
pub struct QuantizerResult {
    pub label: String,
    pub curve: RecallCurve,
    /// Mean relative norm error per repetition.
    pub norm_errors: Vec<f64>,
    pub scatter: Option<ScatterSummary>,
    /// File name of the curve CSV inside the output directory.
    pub csv: String,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub library_version: &'static str,
    pub config: RunConfig,
    pub n: usize,
    pub d: usize,
    pub num_queries: usize,
    pub results: Vec<QuantizerResult>,
}

/// Dataset and queries for a config.
pub fn load_inputs(cfg: &RunConfig) -> Result<(Dataset, Dataset)> {
    let data = match &cfg.data {
        DataSource::File { path } => {
            let fmt = VecFormat::from_path(path)
                .ok_or_else(|| Error::Config(format!("cannot infer the format of {}", path.display())))?;
            read_vecs(path, fmt)?
        }
        DataSource::Synth { n, d, profile } => synthesize(*n, *d, *profile, derive_seed(cfg.seed, "data"))?,
    };
    let queries = match &cfg.queries {
        Some(path) => {
            let fmt = VecFormat::from_path(path)
                .ok_or_else(|| Error::Config(format!("cannot infer the format of {}", path.display())))?;
            read_vecs(path, fmt)?
        }
        None => synthesize(cfg.num_queries, data.dim(), NormProfile::Constant, derive_seed(cfg.seed, "queries"))?,
    };
    Ok((data, queries))
}

/// Training parameters shared by every quantizer of a run.
pub fn train_params(cfg: &RunConfig, seed: u64) -> TrainParams {
    TrainParams {
        kmeans: KMeansParams {
            max_iters: cfg.kmeans_iters.max(1),
            seed,
            ..KMeansParams::default()
        },
        opq_rounds: cfg.opq_rounds,
        aq_rounds: cfg.aq_rounds,
        beam_width: cfg.beam_width,
        ..TrainParams::default()
    }
}

/// Trains one configured quantizer on `train_set`.
pub fn train_spec(cfg: &RunConfig, spec: QuantizerSpec, train_set: &Dataset, seed: u64) -> Result<AnyModel> {
    let params = train_params(cfg, seed);
    if spec.norm_explicit {
        let np = NeqParams {
            base: params,
            exact_norm: cfg.exact_norm,
            raw_direction: cfg.raw_direction,
        };
        let mp = if cfg.exact_norm { crate::neq::EXACT_NORM_SLOTS } else { cfg.m_prime };
        Ok(AnyModel::Neq(neq_train(train_set, spec.base, cfg.m, mp, cfg.k, &np)?.model))
    } else {
        Ok(AnyModel::Vq(train(spec.base, train_set, cfg.m, cfg.k, &params)?.model))
    }
}

fn file_label(spec: QuantizerSpec) -> String {
    spec.to_string().replace('-', "_")
}

/// Runs the experiment and writes `curve_<label>.csv`, optional
/// `scatter_<label>.csv`, and `manifest.json` into `out_dir`.
pub fn run_experiment(cfg: &RunConfig, out_dir: impl AsRef<Path>) -> Result<ExperimentReport> {
    cfg.validate()?;
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir)?;
    let (data, queries) = load_inputs(cfg)?;
    if cfg.topk > data.len() {
        return Err(Error::Config(format!("topk={} exceeds n={}", cfg.topk, data.len())));
    }
    let truth: GroundTruth = brute_force_topk(&data, &queries, cfg.topk)?;
    let checkpoints = if cfg.checkpoints.is_empty() {
        default_checkpoints(data.len())
    } else {
        cfg.checkpoints.clone()
    };

    let mut results = Vec::with_capacity(cfg.quantizers.len());
    for &spec in &cfg.quantizers {
        let label = spec.to_string();
        let mut curves = Vec::with_capacity(cfg.repetitions);
        let mut norm_errors = Vec::with_capacity(cfg.repetitions);
        let mut scatter = None;
        for rep in 0..cfg.repetitions {
            // Baseline and NE variant share the seed so they see the same sample.
            let seed = derive_indexed(derive_seed(cfg.seed, spec.base.name()), rep as u64);
            let train_set = if cfg.train_sample > 0 {
                data.sample(cfg.train_sample, derive_seed(seed, "sample"))
            } else {
                data.clone()
            };
            let model = train_spec(cfg, spec, &train_set, seed)?;
            let index = EncodedIndex::build(model, &data)?;
            let mut curve = recall_curve(&index, &queries, &truth, &checkpoints)?;
            curve.meta = CurveMeta {
                label: label.clone(),
                m: cfg.m,
                m_prime: index.model().m_prime(),
                k: cfg.k,
                seed,
            };
            curves.push(curve);
            norm_errors.push(mean_relative_norm_error(&data, |i| {
                index.model().reconstruct(index.codes().get(i))
            })?);
            if cfg.analyze && rep == 0 {
                let study = error_study(index.model(), index.codes(), &data, &queries, &truth)?;
                study.write_csv(out_dir.join(format!("scatter_{}.csv", file_label(spec))))?;
                scatter = Some(study.summary);
            }
        }
        let mut curve = aggregate_repetitions(&curves)?;
        curve.meta.seed = cfg.seed;
        let csv = format!("curve_{}.csv", file_label(spec));
        crate::eval::write_curve_csv(&curve, out_dir.join(&csv))?;
        results.push(QuantizerResult {
            label,
            curve,
            norm_errors,
            scatter,
            csv,
        });
    }
    let report = ExperimentReport {
        schema_version: MANIFEST_SCHEMA_VERSION,
        library_version: env!("CARGO_PKG_VERSION"),
        config: cfg.clone(),
        n: data.len(),
        d: data.dim(),
        num_queries: queries.len(),
        results,
    };
    let json = serde_json::to_string_pretty(&report).map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(out_dir.join("manifest.json"), json + "\n")?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> RunConfig {
        RunConfig::parse(
            "synth_n = 600\nsynth_d = 8\nnum_queries = 20\nquantizers = pq, ne-pq\nm = 4\nk = 16\n\
             topk = 5\ncheckpoints = 5,50,100\nrepetitions = 2\nanalyze = true\nkmeans_iters = 8\n",
        )
        .unwrap()
    }

    #[test]
    fn writes_curves_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let r = run_experiment(&small(), dir.path()).unwrap();
        assert_eq!(r.results.len(), 2);
        assert_eq!(r.results[0].curve.checkpoints, r.results[1].curve.checkpoints);
        let csv = std::fs::read_to_string(dir.path().join("curve_ne_pq.csv")).unwrap();
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.starts_with("T,mean_recall,stddev\n"));
        assert!(dir.path().join("scatter_pq.csv").exists());
        let manifest: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(manifest["schema_version"], 1);
        assert_eq!(manifest["results"][0]["norm_errors"].as_array().unwrap().len(), 2);
    }

    #[test]
    fn reproducible_outputs() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        run_experiment(&small(), a.path()).unwrap();
        run_experiment(&small(), b.path()).unwrap();
        for f in ["curve_pq.csv", "curve_ne_pq.csv", "scatter_ne_pq.csv", "manifest.json"] {
            let (x, y) = (std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap());
            assert_eq!(x, y, "{f}");
        }
    }
}
