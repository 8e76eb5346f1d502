//! Flat `key = value` experiment configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::data::NormProfile;
use crate::error::{Error, Result};
use crate::vq::{QuantizerKind, DEFAULT_BEAM_WIDTH};

/// A baseline quantizer or its norm-explicit variant (`pq`, `ne-pq`, ...).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct QuantizerSpec {
    pub base: QuantizerKind,
    pub norm_explicit: bool,
}

impl fmt::Display for QuantizerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.norm_explicit {
            write!(f, "ne-{}", self.base)
        } else {
            write!(f, "{}", self.base)
        }
    }
}

impl FromStr for QuantizerSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let (ne, rest) = match s.strip_prefix("ne-").or_else(|| s.strip_prefix("neq-")) {
            Some(r) => (true, r),
            None => (false, s.as_str()),
        };
        Ok(Self {
            base: rest.parse()?,
            norm_explicit: ne,
        })
    }
}

impl serde::Serialize for QuantizerSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Where the base vectors come from.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum DataSource {
    File { path: PathBuf },
    Synth { n: usize, d: usize, profile: NormProfile },
}

/// Declarative description of a recall experiment.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct RunConfig {
    pub data: DataSource,
    /// Query file; synthetic queries (unit norm, distinct seed) otherwise.
    pub queries: Option<PathBuf>,
    pub num_queries: usize,
    pub quantizers: Vec<QuantizerSpec>,
    pub m: usize,
    pub m_prime: usize,
    pub k: usize,
    pub topk: usize,
    /// Empty: the default geometric grid up to `n`.
    pub checkpoints: Vec<usize>,
    pub seed: u64,
    pub repetitions: usize,
    pub beam_width: usize,
    pub opq_rounds: usize,
    pub aq_rounds: usize,
    pub kmeans_iters: usize,
    /// Train on a uniform sample of this many items (0 = all).
    pub train_sample: usize,
    pub exact_norm: bool,
    pub raw_direction: bool,
    /// Also emit the error-decomposition scatter per quantizer.
    pub analyze: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: DataSource::Synth {
                n: 10_000,
                d: 16,
                profile: NormProfile::Longtail,
            },
            queries: None,
            num_queries: 200,
            quantizers: vec![
                QuantizerSpec {
                    base: QuantizerKind::Rq,
                    norm_explicit: false,
                },
                QuantizerSpec {
                    base: QuantizerKind::Rq,
                    norm_explicit: true,
                },
            ],
            m: 8,
            m_prime: 1,
            k: 256,
            topk: 20,
            checkpoints: Vec::new(),
            seed: 0,
            repetitions: 1,
            beam_width: DEFAULT_BEAM_WIDTH,
            opq_rounds: 10,
            aq_rounds: 5,
            kmeans_iters: 25,
            train_sample: 0,
            exact_norm: false,
            raw_direction: false,
            analyze: false,
        }
    }
}

pub const CONFIG_KEYS: &[&str] = &[
    "data",
    "synth_n",
    "synth_d",
    "synth_profile",
    "queries",
    "num_queries",
    "quantizers",
    "m",
    "mprime",
    "k",
    "topk",
    "checkpoints",
    "seed",
    "repetitions",
    "beam_width",
    "opq_rounds",
    "aq_rounds",
    "kmeans_iters",
    "train_sample",
    "exact_norm",
    "raw_direction",
    "analyze",
];

/// Parses `key = value` lines; `#` starts a comment. Later keys win.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", no + 1)))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", no + 1)));
        }
        out.insert(k.to_string(), v.trim().to_string());
    }
    Ok(out)
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{v}`")))
}

fn flag(key: &str, v: &str) -> Result<bool> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("`{key}`: expected a boolean, got `{v}`"))),
    }
}

fn list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| num(key, s))
        .collect()
}

impl RunConfig {
    /// Builds a config from parsed pairs on top of the defaults. Unknown keys
    /// are reported together.
    pub fn from_pairs(pairs: &BTreeMap<String, String>) -> Result<Self> {
        let unknown: Vec<&str> = pairs
            .keys()
            .map(String::as_str)
            .filter(|k| !CONFIG_KEYS.contains(k))
            .collect();
        if !unknown.is_empty() {
            return Err(Error::Config(format!("unknown config keys: {}", unknown.join(", "))));
        }
        let mut c = Self::default();
        let (mut sn, mut sd, mut sp) = match &c.data {
            DataSource::Synth { n, d, profile } => (*n, *d, *profile),
            DataSource::File { .. } => unreachable!("default is synthetic"),
        };
        for (k, v) in pairs {
            match k.as_str() {
                "data" => {
                    c.data = DataSource::File {
                        path: PathBuf::from(v),
                    }
                }
                "synth_n" => sn = num(k, v)?,
                "synth_d" => sd = num(k, v)?,
                "synth_profile" => sp = v.parse()?,
                "queries" => c.queries = Some(PathBuf::from(v)),
                "num_queries" => c.num_queries = num(k, v)?,
                "quantizers" => {
                    c.quantizers = v
                        .split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(str::parse)
                        .collect::<Result<_>>()?
                }
                "m" => c.m = num(k, v)?,
                "mprime" => c.m_prime = num(k, v)?,
                "k" => c.k = num(k, v)?,
                "topk" => c.topk = num(k, v)?,
                "checkpoints" => c.checkpoints = list(k, v)?,
                "seed" => c.seed = num(k, v)?,
                "repetitions" => c.repetitions = num(k, v)?,
                "beam_width" => c.beam_width = num(k, v)?,
                "opq_rounds" => c.opq_rounds = num(k, v)?,
                "aq_rounds" => c.aq_rounds = num(k, v)?,
                "kmeans_iters" => c.kmeans_iters = num(k, v)?,
                "train_sample" => c.train_sample = num(k, v)?,
                "exact_norm" => c.exact_norm = flag(k, v)?,
                "raw_direction" => c.raw_direction = flag(k, v)?,
                "analyze" => c.analyze = flag(k, v)?,
                _ => unreachable!("checked above"),
            }
        }
        if matches!(c.data, DataSource::Synth { .. }) {
            c.data = DataSource::Synth {
                n: sn,
                d: sd,
                profile: sp,
            };
        }
        c.validate()?;
        Ok(c)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::from_pairs(&parse_pairs(text)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.quantizers.is_empty() {
            return bad("no quantizers configured".into());
        }
        if self.m == 0 || self.k == 0 || self.topk == 0 || self.repetitions == 0 {
            return bad("m, k, topk and repetitions must be >= 1".into());
        }
        if self.quantizers.iter().any(|q| q.norm_explicit) && (self.m_prime == 0 || self.m_prime >= self.m) {
            return bad(format!("mprime={} outside [1, m-1] for m={}", self.m_prime, self.m));
        }
        if self.checkpoints.contains(&0) {
            return bad("checkpoints must be >= 1".into());
        }
        if self.queries.is_none() && self.num_queries == 0 {
            return bad("num_queries must be >= 1".into());
        }
        if let DataSource::Synth { n, d, .. } = self.data {
            if n == 0 || d == 0 {
                return bad("synth_n and synth_d must be >= 1".into());
            }
        }
        Ok(())
    }
}
