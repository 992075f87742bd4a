//! Key-value benchmark/node configuration. Plain `key = value` lines,
//! `#` comments, comma-separated lists. Unknown keys are errors so typos
//! surface instead of silently running defaults.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::analyzer::DepsMode;
use crate::engine::SyntheticCost;
use crate::pow::Difficulty;
use crate::roles::ValidatorMode;

use super::report::ReportFormat;
use super::runner::Phase;
use super::workload::Ratio;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    /// Leader plus in-process followers, all in one process.
    Local,
    /// Leader connecting to `followers` over TCP.
    Leader,
    /// Follower serving on `listen`.
    Follower,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got {text:?}")]
    BadLine { line: usize, text: String },
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: bad value for {key}: {detail}")]
    BadValue {
        line: usize,
        key: &'static str,
        detail: String,
    },
    #[error("role=follower requires `listen`")]
    FollowerNeedsListen,
    #[error("role=leader requires a nonempty `followers` list")]
    LeaderNeedsFollowers,
}

/// Everything a `bench run` needs. Defaults give a small local run.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchConfig {
    pub role: Role,
    /// host:port to serve on (follower role).
    pub listen: Option<String>,
    /// host:port endpoints to dial (leader role).
    pub followers: Vec<String>,
    /// In-process community sizes to sweep (local role).
    pub follower_counts: Vec<u32>,
    /// Also run the serial baseline.
    pub include_serial: bool,
    pub target: Difficulty,
    pub rho: Ratio,
    pub txns_per_block: u32,
    pub blocks: u32,
    pub seed: u64,
    pub deps: DepsMode,
    pub emit_hints: bool,
    pub contract_cost_us: u64,
    pub monetary_cost_us: u64,
    pub warmup: u32,
    pub phases: Vec<Phase>,
    pub validators: Vec<ValidatorMode>,
    pub zipf_exponent: f64,
    pub pool_factor: f64,
    pub out_dir: PathBuf,
    pub report_format: ReportFormat,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            role: Role::Local,
            listen: None,
            followers: Vec::new(),
            follower_counts: vec![1, 2, 3, 4, 5],
            include_serial: true,
            target: Difficulty::bench_default(),
            rho: Ratio::new(1, 2),
            txns_per_block: 100,
            blocks: 35,
            seed: 42,
            deps: DepsMode::Full,
            emit_hints: true,
            contract_cost_us: 50,
            monetary_cost_us: 5,
            warmup: 5,
            phases: vec![Phase::ExecOnly],
            validators: vec![ValidatorMode::Serial],
            zipf_exponent: 0.5,
            pool_factor: 4.0,
            out_dir: PathBuf::from("bench-out"),
            report_format: ReportFormat::Csv,
        }
    }
}

impl BenchConfig {
    pub fn cost(&self) -> SyntheticCost {
        SyntheticCost::from_us(self.contract_cost_us, self.monetary_cost_us)
    }
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(format!("expected true/false, got {s:?}")),
    }
}

fn list(s: &str) -> impl Iterator<Item = &str> {
    s.split(',').map(str::trim).filter(|p| !p.is_empty())
}

pub fn parse_config(text: &str) -> Result<BenchConfig, ConfigError> {
    let mut cfg = BenchConfig::default();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::BadLine {
            line,
            text: raw.trim().to_string(),
        })?;
        let key = key.trim();
        let value = value.trim();
        let bad = |k: &'static str, detail: String| ConfigError::BadValue {
            line,
            key: k,
            detail,
        };

        match key {
            "role" => {
                cfg.role = match value {
                    "local" => Role::Local,
                    "leader" => Role::Leader,
                    "follower" => Role::Follower,
                    _ => return Err(bad("role", format!("{value:?} not local/leader/follower"))),
                }
            }
            "listen" => cfg.listen = Some(value.to_string()),
            "followers" => cfg.followers = list(value).map(String::from).collect(),
            "follower_counts" => {
                cfg.follower_counts = list(value)
                    .map(|p| p.parse::<u32>().map_err(|e| bad("follower_counts", e.to_string())))
                    .collect::<Result<_, _>>()?;
            }
            "include_serial" => {
                cfg.include_serial = parse_bool(value).map_err(|e| bad("include_serial", e))?
            }
            "target" => {
                cfg.target =
                    Difficulty::from_hex(value).map_err(|e| bad("target", e.to_string()))?
            }
            "rho" => cfg.rho = value.parse().map_err(|e: super::workload::RatioParseError| {
                bad("rho", e.to_string())
            })?,
            "txns_per_block" => {
                cfg.txns_per_block = value.parse().map_err(|e| {
                    bad("txns_per_block", format!("{e}"))
                })?
            }
            "blocks" => cfg.blocks = value.parse().map_err(|e| bad("blocks", format!("{e}")))?,
            "seed" => cfg.seed = value.parse().map_err(|e| bad("seed", format!("{e}")))?,
            "deps" => {
                cfg.deps = DepsMode::parse(value)
                    .ok_or_else(|| bad("deps", format!("{value:?} not full/from-to-only")))?
            }
            "emit_hints" => cfg.emit_hints = parse_bool(value).map_err(|e| bad("emit_hints", e))?,
            "contract_cost_us" => {
                cfg.contract_cost_us =
                    value.parse().map_err(|e| bad("contract_cost_us", format!("{e}")))?
            }
            "monetary_cost_us" => {
                cfg.monetary_cost_us =
                    value.parse().map_err(|e| bad("monetary_cost_us", format!("{e}")))?
            }
            "warmup" => cfg.warmup = value.parse().map_err(|e| bad("warmup", format!("{e}")))?,
            "phases" => {
                cfg.phases = list(value)
                    .map(|p| {
                        Phase::parse(p)
                            .ok_or_else(|| bad("phases", format!("{p:?} not exec/exec-pow")))
                    })
                    .collect::<Result<_, _>>()?;
            }
            "validators" => {
                cfg.validators = list(value)
                    .map(|p| {
                        ValidatorMode::parse(p).ok_or_else(|| {
                            bad("validators", format!("{p:?} not serial/default/sharing"))
                        })
                    })
                    .collect::<Result<_, _>>()?;
            }
            "zipf_exponent" => {
                cfg.zipf_exponent =
                    value.parse().map_err(|e| bad("zipf_exponent", format!("{e}")))?
            }
            "pool_factor" => {
                cfg.pool_factor = value.parse().map_err(|e| bad("pool_factor", format!("{e}")))?
            }
            "out_dir" => cfg.out_dir = PathBuf::from(value),
            "report_format" => {
                cfg.report_format = ReportFormat::parse(value)
                    .ok_or_else(|| bad("report_format", format!("{value:?}")))?
            }
            _ => {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                })
            }
        }
    }

    match cfg.role {
        Role::Follower if cfg.listen.is_none() => Err(ConfigError::FollowerNeedsListen),
        Role::Leader if cfg.followers.is_empty() => Err(ConfigError::LeaderNeedsFollowers),
        _ => Ok(cfg),
    }
}

pub fn load_config(path: &Path) -> Result<BenchConfig, std::io::Error> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
}
