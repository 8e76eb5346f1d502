//! `neq`: dataset synthesis, training, evaluation and analysis from the shell.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgAction, CommandFactory, FromArgMatches, Parser, Subcommand};
use neq_core::config::{parse_pairs, QuantizerSpec, RunConfig};
use neq_core::data::{read_ivecs, read_vecs, synthesize, write_ivecs, write_vecs, Dataset, NormProfile, VecFormat};
use neq_core::error_lab::{
    error_study, feasible_width_grid, verify_angle_bound, verify_angle_bound_outside, ScatterSummary,
};
use neq_core::eval::{
    brute_force_topk, default_checkpoints, recall_curve, write_curve_csv, AnyModel, CurveMeta, EncodedIndex,
    GroundTruth,
};
use neq_core::experiment::{run_experiment, train_params, train_spec};
use neq_core::imi::{candidate_rerank, traverse_neq, traverse_vq, EarlyStop, NeqImi, VqImi};
use neq_core::neq::{mean_relative_norm_error, select_m_prime, NeqParams};
use neq_core::rng::derive_seed;
use neq_core::storage::{deserialize_index, serialize_index};
use neq_core::vq::QuantizerKind;

#[derive(Parser)]
#[command(name = "neq", version, about = "Norm-explicit vector quantization toolkit", args_override_self = true)]
struct Cli {
    /// Flat `key = value` file supplying flag values; flags given on the
    /// command line win. For `run` it is the experiment description.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(clap::Args, Clone)]
struct TrainOpts {
    #[arg(long, default_value_t = 8)]
    m: usize,
    #[arg(long, default_value_t = 1)]
    mprime: usize,
    #[arg(long, default_value_t = 256)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = neq_core::vq::DEFAULT_BEAM_WIDTH)]
    beam_width: usize,
    #[arg(long, default_value_t = 10)]
    opq_rounds: usize,
    #[arg(long, default_value_t = 5)]
    aq_rounds: usize,
    #[arg(long, default_value_t = 25)]
    kmeans_iters: usize,
    /// Train on a uniform sample of this many items (0 = all).
    #[arg(long, default_value_t = 0)]
    train_sample: usize,
    /// Store the relative norm exactly in four index slots.
    #[arg(long)]
    exact_norm: bool,
    /// Quantize items rather than their unit directions.
    #[arg(long)]
    raw_direction: bool,
}

impl TrainOpts {
    fn run_config(&self) -> RunConfig {
        RunConfig {
            m: self.m,
            m_prime: self.mprime,
            k: self.k,
            seed: self.seed,
            beam_width: self.beam_width,
            opq_rounds: self.opq_rounds,
            aq_rounds: self.aq_rounds,
            kmeans_iters: self.kmeans_iters,
            train_sample: self.train_sample,
            exact_norm: self.exact_norm,
            raw_direction: self.raw_direction,
            ..RunConfig::default()
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a synthetic dataset (and optionally queries).
    Synth {
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        #[arg(long, default_value_t = 16)]
        d: usize,
        #[arg(long, default_value = "longtail")]
        profile: NormProfile,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Unit-norm queries written alongside.
        #[arg(long)]
        queries_out: Option<PathBuf>,
        #[arg(long, default_value_t = 200)]
        num_queries: usize,
    },
    /// Train a quantizer, encode the data and write an index file.
    Train {
        /// `pq`, `opq`, `rq`, `aq`, or `ne-` prefixed.
        #[arg(long)]
        quantizer: QuantizerSpec,
        #[arg(long)]
        norm_explicit: bool,
        #[command(flatten)]
        opts: TrainOpts,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Append the codes of more items to an index.
    Encode {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Defaults to rewriting the index in place.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact top-k by inner product, as ivecs.
    Gt {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        #[arg(long, default_value_t = 20)]
        topk: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recall-item curve of an index.
    Eval {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, default_value_t = 20)]
        topk: usize,
        /// Comma-separated probe budgets; a geometric grid by default.
        #[arg(long, value_delimiter = ',')]
        checkpoints: Vec<usize>,
        /// CSV path; stdout otherwise.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Candidate generation with an inverted multi-index, then exact rerank.
    ImiSearch {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        /// A two-codebook VQ index to walk; otherwise a norm/direction
        /// multi-index is built from the data.
        #[arg(long)]
        index: Option<PathBuf>,
        #[arg(long, default_value_t = 16)]
        imi_k: usize,
        #[arg(long, default_value_t = 1000)]
        budget: usize,
        #[arg(long, default_value_t = 10)]
        topk: usize,
        /// Stop once no unvisited cell can beat the current top-k.
        #[arg(long)]
        early_stop: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Error decomposition, norm error and angle-bound checks for an index.
    Analyze {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        #[arg(long, default_value_t = 20)]
        topk: usize,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pick the number of norm codebooks by recall on sample queries.
    SelectMprime {
        #[arg(long)]
        quantizer: QuantizerKind,
        #[command(flatten)]
        opts: TrainOpts,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        #[arg(long, default_value_t = 20)]
        topk: usize,
        /// Probe budget at which recall is compared.
        #[arg(long, default_value_t = 100)]
        probe: usize,
    },
    /// Run a full experiment from `--config`.
    Run {
        #[arg(long)]
        out: PathBuf,
        /// `key=value` overriding the config file; repeatable.
        #[arg(long = "set", action = ArgAction::Append)]
        set: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

enum Failure {
    Usage(String),
    Run(neq_core::Error),
}

impl From<neq_core::Error> for Failure {
    fn from(e: neq_core::Error) -> Self {
        Self::Run(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::Run(e.into())
    }
}

type Res<T> = Result<T, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn input(path: &Path) -> Res<&Path> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(usage(format!("input file {} does not exist", path.display())))
    }
}

fn format_of(path: &Path) -> Res<VecFormat> {
    VecFormat::from_path(path)
        .filter(|f| *f != VecFormat::Ivecs)
        .ok_or_else(|| usage(format!("{}: expected a .fvecs or .bvecs file", path.display())))
}

fn load(path: &Path) -> Res<Dataset> {
    let fmt = format_of(input(path)?)?;
    Ok(read_vecs(path, fmt)?)
}

fn load_index(path: &Path) -> Res<EncodedIndex> {
    let (model, codes) = deserialize_index(input(path)?)?;
    Ok(EncodedIndex::from_parts(model, codes)?)
}

fn load_truth(path: &Path, topk: usize, n: usize) -> Res<GroundTruth> {
    let rows = read_ivecs(input(path)?)?;
    let mut ids = Vec::with_capacity(rows.len());
    for (q, row) in rows.iter().enumerate() {
        if row.len() < topk {
            return Err(usage(format!("ground truth row {q} has {} ids, need {topk}", row.len())));
        }
        let r: Option<Vec<usize>> = row[..topk]
            .iter()
            .map(|&i| usize::try_from(i).ok().filter(|&i| i < n))
            .collect();
        ids.push(r.ok_or_else(|| usage(format!("ground truth row {q} names an item outside the index")))?);
    }
    Ok(GroundTruth::new(topk, ids)?)
}

fn cmd_synth(n: usize, d: usize, profile: NormProfile, seed: u64, out: &Path, qout: Option<&Path>, nq: usize) -> Res<()> {
    let data = synthesize(n, d, profile, derive_seed(seed, "data"))?;
    write_vecs(&data, out, format_of(out)?)?;
    if let Some(qp) = qout {
        let q = synthesize(nq, d, NormProfile::Constant, derive_seed(seed, "queries"))?;
        write_vecs(&q, qp, format_of(qp)?)?;
    }
    println!("wrote {n} x {d} ({profile:?}) to {}", out.display());
    Ok(())
}

fn cmd_train(spec: QuantizerSpec, opts: &TrainOpts, data: &Path, out: &Path) -> Res<()> {
    let data = load(data)?;
    let cfg = opts.run_config();
    let seed = derive_seed(opts.seed, spec.base.name());
    let train_set = if opts.train_sample > 0 {
        data.sample(opts.train_sample, derive_seed(seed, "sample"))
    } else {
        data.clone()
    };
    let model = train_spec(&cfg, spec, &train_set, seed)?;
    let index = EncodedIndex::build(model, &data)?;
    serialize_index(index.model(), index.codes(), out)?;
    let err = mean_relative_norm_error(&data, |i| index.model().reconstruct(index.codes().get(i)))?;
    println!(
        "trained {} M={} M'={} K={} on {} items; mean relative norm error {err:.4e}",
        index.model().label(),
        index.model().m(),
        index.model().m_prime(),
        index.model().k(),
        data.len()
    );
    Ok(())
}

fn cmd_encode(index: &Path, data: &Path, out: Option<&Path>) -> Res<()> {
    let idx = load_index(index)?;
    let data = load(data)?;
    let mut codes = idx.codes().clone();
    codes.extend(&idx.model().encode_all(&data)?)?;
    serialize_index(idx.model(), &codes, out.unwrap_or(index))?;
    println!("appended {} codes; index holds {}", data.len(), codes.len());
    Ok(())
}

fn cmd_gt(data: &Path, queries: &Path, topk: usize, out: &Path) -> Res<()> {
    let (data, queries) = (load(data)?, load(queries)?);
    if topk == 0 || topk > data.len() {
        return Err(usage(format!("topk must be in [1, {}]", data.len())));
    }
    let truth = brute_force_topk(&data, &queries, topk)?;
    let rows: Vec<Vec<i32>> = truth
        .rows()
        .iter()
        .map(|r| r.iter().map(|&i| i as i32).collect())
        .collect();
    write_ivecs(&rows, out)?;
    println!("wrote top-{topk} for {} queries to {}", queries.len(), out.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_eval(
    index: &Path,
    queries: &Path,
    gt: &Path,
    topk: usize,
    checkpoints: &[usize],
    out: Option<&Path>,
    json: Option<&Path>,
) -> Res<()> {
    let idx = load_index(index)?;
    let queries = load(queries)?;
    let n = idx.codes().len();
    let truth = load_truth(gt, topk, n)?;
    if truth.len() != queries.len() {
        return Err(usage(format!("{} ground-truth rows for {} queries", truth.len(), queries.len())));
    }
    let cps = if checkpoints.is_empty() {
        default_checkpoints(n)
    } else {
        checkpoints.to_vec()
    };
    let mut curve = recall_curve(&idx, &queries, &truth, &cps)?;
    curve.meta = CurveMeta {
        label: idx.model().label(),
        m: idx.model().m(),
        m_prime: idx.model().m_prime(),
        k: idx.model().k(),
        seed: 0,
    };
    match out {
        Some(p) => write_curve_csv(&curve, p)?,
        None => {
            let mut s = std::io::stdout().lock();
            writeln!(s, "T,mean_recall,stddev")?;
            for ((t, m), sd) in curve.checkpoints.iter().zip(&curve.mean).zip(&curve.stddev) {
                writeln!(s, "{t},{m:.6},{sd:.6}")?;
            }
        }
    }
    if let Some(p) = json {
        let text = serde_json::to_string_pretty(&curve).map_err(|e| neq_core::Error::Format(e.to_string()))?;
        std::fs::write(p, text + "\n")?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_imi(
    data: &Path,
    queries: &Path,
    index: Option<&Path>,
    imi_k: usize,
    budget: usize,
    topk: usize,
    early_stop: bool,
    seed: u64,
    out: Option<&Path>,
) -> Res<()> {
    let (data, queries) = (load(data)?, load(queries)?);
    enum Walker {
        Vq(VqImi),
        Neq(NeqImi),
    }
    let walker = match index {
        Some(p) => {
            if early_stop {
                return Err(usage("--early-stop applies to the norm/direction multi-index only"));
            }
            let (model, _) = deserialize_index(input(p)?)?;
            match model {
                AnyModel::Vq(m) => Walker::Vq(VqImi::build(m, &data)?),
                AnyModel::Neq(_) => return Err(usage("--index must hold a plain two-codebook quantizer")),
            }
        }
        None => {
            let p = neq_core::clustering::KMeansParams::default().with_seed(derive_seed(seed, "imi"));
            Walker::Neq(NeqImi::build(&data, imi_k, &p)?)
        }
    };
    let mut rows = String::from("query,rank,id,score\n");
    let (mut scanned, mut stopped) = (0usize, 0usize);
    for (qi, q) in queries.rows().enumerate() {
        let t = match &walker {
            Walker::Vq(w) => traverse_vq(w, q, budget)?,
            Walker::Neq(w) => {
                let es = early_stop.then_some(EarlyStop { k: topk, data: &data });
                traverse_neq(w, q, budget, es)?
            }
        };
        scanned += t.ids.len();
        stopped += usize::from(t.stopped_early);
        let r = candidate_rerank(&t.ids, q, &data, topk)?;
        for (rank, (id, s)) in r.ids.iter().zip(&r.scores).enumerate() {
            rows.push_str(&format!("{qi},{rank},{id},{s:.6}\n"));
        }
    }
    match out {
        Some(p) => std::fs::write(p, rows)?,
        None => print!("{rows}"),
    }
    eprintln!(
        "{} queries, {:.1} candidates per query, {stopped} stopped early",
        queries.len(),
        scanned as f64 / queries.len().max(1) as f64
    );
    Ok(())
}

#[derive(serde::Serialize)]
struct AnalyzeReport {
    label: String,
    mean_relative_norm_error: f64,
    scatter: ScatterSummary,
    angle_bound_inside: neq_core::error_lab::AngleBoundCheck,
    angle_bound_outside: neq_core::error_lab::AngleBoundCheck,
}

#[allow(clippy::too_many_arguments)]
fn cmd_analyze(index: &Path, data: &Path, queries: &Path, topk: usize, samples: usize, seed: u64, out: &Path) -> Res<()> {
    let idx = load_index(index)?;
    let (data, queries) = (load(data)?, load(queries)?);
    let codes = if idx.codes().len() == data.len() {
        idx.codes().clone()
    } else {
        idx.model().encode_all(&data)?
    };
    std::fs::create_dir_all(out)?;
    let truth = brute_force_topk(&data, &queries, topk.min(data.len()))?;
    let study = error_study(idx.model(), &codes, &data, &queries, &truth)?;
    study.write_csv(out.join("scatter.csv"))?;
    let mut grid = String::from("alpha,beta,width\n");
    for (a, b, w) in feasible_width_grid(32)? {
        grid.push_str(&format!("{a:.6},{b:.6},{w:.6}\n"));
    }
    std::fs::write(out.join("feasible_width.csv"), grid)?;
    let report = AnalyzeReport {
        label: idx.model().label(),
        mean_relative_norm_error: mean_relative_norm_error(&data, |i| idx.model().reconstruct(codes.get(i)))?,
        scatter: study.summary,
        angle_bound_inside: verify_angle_bound(samples, derive_seed(seed, "inside"))?,
        angle_bound_outside: verify_angle_bound_outside(samples, derive_seed(seed, "outside"))?,
    };
    let text = serde_json::to_string_pretty(&report).map_err(|e| neq_core::Error::Format(e.to_string()))?;
    std::fs::write(out.join("analysis.json"), text.clone() + "\n")?;
    println!("{text}");
    Ok(())
}

fn cmd_select(kind: QuantizerKind, opts: &TrainOpts, data: &Path, queries: &Path, topk: usize, probe: usize) -> Res<()> {
    let (data, queries) = (load(data)?, load(queries)?);
    let cfg = opts.run_config();
    let params = NeqParams {
        base: train_params(&cfg, derive_seed(opts.seed, kind.name())),
        exact_norm: false,
        raw_direction: opts.raw_direction,
    };
    let sel = select_m_prime(&data, kind, opts.m, opts.k, &params, &queries, topk, probe)?;
    for (mp, r) in &sel.recalls {
        eprintln!("M'={mp}: recall@{probe} {r:.4}");
    }
    println!("mprime={}", sel.best);
    Ok(())
}

fn cmd_run(config: Option<&Path>, out: &Path, set: &[String], seed: Option<u64>) -> Res<()> {
    let path = config.ok_or_else(|| usage("run needs --config"))?;
    let text = std::fs::read_to_string(input(path)?)?;
    let mut pairs = parse_pairs(&text).map_err(|e| usage(e.to_string()))?;
    for kv in set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| usage(format!("--set expects key=value, got `{kv}`")))?;
        pairs.insert(k.trim().to_string(), v.trim().to_string());
    }
    if let Some(s) = seed {
        pairs.insert("seed".into(), s.to_string());
    }
    let cfg = RunConfig::from_pairs(&pairs).map_err(|e| usage(e.to_string()))?;
    let report = run_experiment(&cfg, out)?;
    for r in &report.results {
        let pts: Vec<String> = r
            .curve
            .checkpoints
            .iter()
            .zip(&r.curve.mean)
            .map(|(t, m)| format!("{t}:{m:.3}"))
            .collect();
        println!("{:<8} {}", r.label, pts.join(" "));
    }
    Ok(())
}

/// Value of `--config` in raw arguments, if any.
fn config_arg(args: &[OsString]) -> Option<PathBuf> {
    let mut it = args.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(v) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(v));
        }
    }
    None
}

/// Inserts config-file values as flags right after the subcommand, so that
/// flags given later on the command line override them.
fn inject_config(args: Vec<OsString>) -> Res<Vec<OsString>> {
    let Some(path) = config_arg(&args) else {
        return Ok(args);
    };
    let cmd = Cli::command();
    let names: Vec<String> = cmd.get_subcommands().map(|s| s.get_name().to_string()).collect();
    let Some(pos) = args.iter().position(|a| names.iter().any(|n| a == n.as_str())) else {
        return Ok(args);
    };
    let sub_name = args[pos].to_string_lossy().to_string();
    if sub_name == "run" {
        return Ok(args);
    }
    let text = std::fs::read_to_string(input(&path)?)?;
    let pairs: BTreeMap<String, String> = parse_pairs(&text).map_err(|e| usage(e.to_string()))?;
    let sub = cmd.find_subcommand(&sub_name).expect("listed above");
    let known_anywhere = |flag: &str| {
        cmd.get_subcommands()
            .any(|s| s.get_arguments().any(|a| a.get_long() == Some(flag)))
    };
    let mut extra = Vec::new();
    for (k, v) in &pairs {
        let flag = k.replace('_', "-");
        let Some(arg) = sub.get_arguments().find(|a| a.get_long() == Some(flag.as_str())) else {
            if known_anywhere(&flag) {
                continue;
            }
            return Err(usage(format!("unknown config key `{k}`")));
        };
        if matches!(arg.get_action(), ArgAction::SetTrue) {
            match v.to_ascii_lowercase().as_str() {
                "true" | "1" | "yes" => extra.push(OsString::from(format!("--{flag}"))),
                "false" | "0" | "no" => {}
                _ => return Err(usage(format!("config key `{k}` expects a boolean"))),
            }
        } else {
            extra.push(OsString::from(format!("--{flag}={v}")));
        }
    }
    let mut out = args;
    out.splice(pos + 1..pos + 1, extra);
    Ok(out)
}

fn threads() -> Res<()> {
    let Ok(v) = std::env::var("NEQ_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| usage(format!("NEQ_THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| neq_core::Error::Config(e.to_string()))?;
    Ok(())
}

fn dispatch(cli: Cli) -> Res<()> {
    let config = cli.config.as_deref();
    match cli.cmd {
        Cmd::Synth {
            n,
            d,
            profile,
            seed,
            out,
            queries_out,
            num_queries,
        } => cmd_synth(n, d, profile, seed, &out, queries_out.as_deref(), num_queries),
        Cmd::Train {
            quantizer,
            norm_explicit,
            opts,
            data,
            out,
        } => {
            let spec = QuantizerSpec {
                norm_explicit: quantizer.norm_explicit || norm_explicit,
                ..quantizer
            };
            cmd_train(spec, &opts, &data, &out)
        }
        Cmd::Encode { index, data, out } => cmd_encode(&index, &data, out.as_deref()),
        Cmd::Gt {
            data,
            queries,
            topk,
            out,
        } => cmd_gt(&data, &queries, topk, &out),
        Cmd::Eval {
            index,
            queries,
            gt,
            topk,
            checkpoints,
            out,
            json,
        } => cmd_eval(&index, &queries, &gt, topk, &checkpoints, out.as_deref(), json.as_deref()),
        Cmd::ImiSearch {
            data,
            queries,
            index,
            imi_k,
            budget,
            topk,
            early_stop,
            seed,
            out,
        } => cmd_imi(&data, &queries, index.as_deref(), imi_k, budget, topk, early_stop, seed, out.as_deref()),
        Cmd::Analyze {
            index,
            data,
            queries,
            topk,
            samples,
            seed,
            out,
        } => cmd_analyze(&index, &data, &queries, topk, samples, seed, &out),
        Cmd::SelectMprime {
            quantizer,
            opts,
            data,
            queries,
            topk,
            probe,
        } => cmd_select(quantizer, &opts, &data, &queries, topk, probe),
        Cmd::Run { out, set, seed } => cmd_run(config, &out, &set, seed),
    }
}

fn main() -> ExitCode {
    let result = inject_config(std::env::args_os().collect()).and_then(|args| {
        let matches = Cli::command().try_get_matches_from(args).map_err(|e| {
            // help and version are not errors
            if !e.use_stderr() {
                let _ = e.print();
                std::process::exit(0);
            }
            usage(e.render().to_string())
        })?;
        let cli = Cli::from_arg_matches(&matches).map_err(|e| usage(e.to_string()))?;
        threads()?;
        dispatch(cli)
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {}", msg.trim_end());
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
