//! Simulation configuration files.
//!
//! Flat `key = value` text grouped into `[section]` blocks, one section per
//! subsystem. Unknown sections and keys are errors so config typos surface
//! immediately. Every key has a default; a config file only overrides.

use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::exec::{ExecConfig, LatencyModel};
use crate::metrics::MetricsConfig;
use crate::pipeline::BlockLimits;
use crate::program_cache::CacheConfig;
use crate::workload::WorkloadConfig;

/// Calibrated workload whose cache-size statistics track the production
/// measurements at desk scale; see `configs/paper_calibration.conf`.
pub const PAPER_CALIBRATION: &str = include_str!("../configs/paper_calibration.conf");

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config i/o failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("config line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimConfig {
    pub cache: CacheConfig,
    pub limits: BlockLimits,
    pub workload: WorkloadConfig,
    pub latency: LatencyModel,
    pub exec: ExecConfig,
    pub metrics: MetricsConfig,
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.cache
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.workload
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.exec.lanes == 0
            || self.exec.max_batch_size == 0
            || self.exec.max_batches_per_slot == 0
        {
            return Err(ConfigError::Invalid(
                "exec lanes, max_batch_size and max_batches_per_slot must be >= 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.exec.cu_actual_fraction) {
            return Err(ConfigError::Invalid(
                "cu_actual_fraction must be in 0..1".into(),
            ));
        }
        if self.latency.per_miss_load_us < 0.0
            || self.latency.per_batch_base_us < 0.0
            || self.latency.per_hit_us < 0.0
            || self.latency.prune_per_entry_us < 0.0
        {
            return Err(ConfigError::Invalid("latency costs must be >= 0".into()));
        }
        Ok(())
    }
}

fn parse_err(line: usize, reason: impl Into<String>) -> ConfigError {
    ConfigError::Parse {
        line,
        reason: reason.into(),
    }
}

fn parse_u64(value: &str, line: usize) -> Result<u64, ConfigError> {
    value
        .replace('_', "")
        .parse::<u64>()
        .map_err(|_| parse_err(line, format!("expected an integer, found {value:?}")))
}

fn parse_usize(value: &str, line: usize) -> Result<usize, ConfigError> {
    Ok(parse_u64(value, line)? as usize)
}

fn parse_f64(value: &str, line: usize) -> Result<f64, ConfigError> {
    value
        .replace('_', "")
        .parse::<f64>()
        .map_err(|_| parse_err(line, format!("expected a number, found {value:?}")))
}

pub fn parse_config(text: &str) -> Result<SimConfig, ConfigError> {
    let mut config = SimConfig::default();
    let mut section = String::new();
    for (index, raw) in text.lines().enumerate() {
        let line_no = index + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| parse_err(line_no, "unterminated section header"))?;
            section = name.trim().to_string();
            match section.as_str() {
                "cache" | "budget" | "workload" | "latency" | "sim" | "metrics" => {}
                other => return Err(parse_err(line_no, format!("unknown section [{other}]"))),
            }
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| parse_err(line_no, format!("expected key = value, found {line:?}")))?;
        let key = key.trim();
        let value = value.trim();
        match (section.as_str(), key) {
            ("cache", "capacity") => config.cache.capacity = parse_usize(value, line_no)?,
            ("cache", "eviction_fraction") => {
                config.cache.eviction_fraction = parse_f64(value, line_no)?
            }
            ("cache", "slots_per_epoch") => {
                let v = parse_u64(value, line_no)?;
                config.cache.slots_per_epoch = v;
                config.workload.slots_per_epoch = v;
            }
            ("budget", "block_cu_limit") => {
                config.limits.block_cu_limit = parse_u64(value, line_no)?
            }
            ("budget", "per_account_cu_limit") => {
                config.limits.per_account_cu_limit = parse_u64(value, line_no)?
            }
            ("budget", "vote_cu_limit") => config.limits.vote_cu_limit = parse_u64(value, line_no)?,
            ("budget", "account_data_limit_bytes") => {
                config.limits.account_data_limit_bytes = parse_u64(value, line_no)?
            }
            ("budget", "max_locks_per_tx") => {
                config.limits.max_locks_per_tx = parse_usize(value, line_no)?
            }
            ("budget", "tx_cu_limit") => config.limits.tx_cu_limit = parse_u64(value, line_no)?,
            ("budget", "max_blockhash_age") => {
                config.limits.max_blockhash_age = parse_u64(value, line_no)?
            }
            ("workload", "seed") => config.workload.seed = parse_u64(value, line_no)?,
            ("workload", "num_programs") => {
                config.workload.num_programs = parse_u64(value, line_no)?
            }
            ("workload", "zipf_s") => config.workload.zipf_s = parse_f64(value, line_no)?,
            ("workload", "num_accounts") => {
                config.workload.num_accounts = parse_u64(value, line_no)?
            }
            ("workload", "txs_per_slot_mean") => {
                config.workload.txs_per_slot_mean = parse_f64(value, line_no)?
            }
            ("workload", "write_prob") => config.workload.write_prob = parse_f64(value, line_no)?,
            ("workload", "accounts_per_tx_min") => {
                config.workload.accounts_per_tx_min = parse_u64(value, line_no)?
            }
            ("workload", "accounts_per_tx_max") => {
                config.workload.accounts_per_tx_max = parse_u64(value, line_no)?
            }
            ("workload", "cu_min") => config.workload.cu_min = parse_u64(value, line_no)?,
            ("workload", "cu_max") => config.workload.cu_max = parse_u64(value, line_no)?,
            ("workload", "vote_fraction") => {
                config.workload.vote_fraction = parse_f64(value, line_no)?
            }
            ("workload", "slots") => config.workload.slots = parse_u64(value, line_no)?,
            ("workload", "fork_prob_per_slot") => {
                config.workload.fork_prob_per_slot = parse_f64(value, line_no)?
            }
            ("workload", "root_lag") => config.workload.root_lag = parse_u64(value, line_no)?,
            ("latency", "per_miss_load_us") => {
                config.latency.per_miss_load_us = parse_f64(value, line_no)?
            }
            ("latency", "per_batch_base_us") => {
                config.latency.per_batch_base_us = parse_f64(value, line_no)?
            }
            ("latency", "per_hit_us") => config.latency.per_hit_us = parse_f64(value, line_no)?,
            ("latency", "prune_per_entry_us") => {
                config.latency.prune_per_entry_us = parse_f64(value, line_no)?
            }
            ("sim", "lanes") => config.exec.lanes = parse_u64(value, line_no)?,
            ("sim", "max_batch_size") => config.exec.max_batch_size = parse_usize(value, line_no)?,
            ("sim", "max_batches_per_slot") => {
                config.exec.max_batches_per_slot = parse_usize(value, line_no)?
            }
            ("sim", "cu_actual_fraction") => {
                config.exec.cu_actual_fraction = parse_f64(value, line_no)?
            }
            ("metrics", "hist_misses_bin") => {
                config.metrics.misses.bin_width = parse_f64(value, line_no)?
            }
            ("metrics", "hist_misses_max") => {
                config.metrics.misses.max_value = parse_f64(value, line_no)?
            }
            ("metrics", "hist_evictions_bin") => {
                config.metrics.evictions.bin_width = parse_f64(value, line_no)?
            }
            ("metrics", "hist_evictions_max") => {
                config.metrics.evictions.max_value = parse_f64(value, line_no)?
            }
            ("metrics", "hist_pc_time_bin") => {
                config.metrics.pc_time_us.bin_width = parse_f64(value, line_no)?
            }
            ("metrics", "hist_pc_time_max") => {
                config.metrics.pc_time_us.max_value = parse_f64(value, line_no)?
            }
            ("metrics", "hist_prune_time_bin") => {
                config.metrics.prune_time_us.bin_width = parse_f64(value, line_no)?
            }
            ("metrics", "hist_prune_time_max") => {
                config.metrics.prune_time_us.max_value = parse_f64(value, line_no)?
            }
            ("", key) => {
                return Err(parse_err(
                    line_no,
                    format!("key {key:?} outside any section"),
                ))
            }
            (section, key) => {
                return Err(parse_err(
                    line_no,
                    format!("unknown key {key:?} in section [{section}]"),
                ))
            }
        }
    }
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<SimConfig, ConfigError> {
    parse_config(&fs::read_to_string(path)?)
}

/// Canonical text form of a configuration; parses back to an equal value.
pub fn to_text(config: &SimConfig) -> String {
    format!(
        "[cache]\n\
         capacity = {}\n\
         eviction_fraction = {}\n\
         slots_per_epoch = {}\n\
         \n\
         [budget]\n\
         block_cu_limit = {}\n\
         per_account_cu_limit = {}\n\
         vote_cu_limit = {}\n\
         account_data_limit_bytes = {}\n\
         max_locks_per_tx = {}\n\
         tx_cu_limit = {}\n\
         max_blockhash_age = {}\n\
         \n\
         [workload]\n\
         seed = {}\n\
         num_programs = {}\n\
         zipf_s = {}\n\
         num_accounts = {}\n\
         txs_per_slot_mean = {}\n\
         write_prob = {}\n\
         accounts_per_tx_min = {}\n\
         accounts_per_tx_max = {}\n\
         cu_min = {}\n\
         cu_max = {}\n\
         vote_fraction = {}\n\
         slots = {}\n\
         fork_prob_per_slot = {}\n\
         root_lag = {}\n\
         \n\
         [latency]\n\
         per_miss_load_us = {}\n\
         per_batch_base_us = {}\n\
         per_hit_us = {}\n\
         prune_per_entry_us = {}\n\
         \n\
         [sim]\n\
         lanes = {}\n\
         max_batch_size = {}\n\
         max_batches_per_slot = {}\n\
         cu_actual_fraction = {}\n\
         \n\
         [metrics]\n\
         hist_misses_bin = {}\n\
         hist_misses_max = {}\n\
         hist_evictions_bin = {}\n\
         hist_evictions_max = {}\n\
         hist_pc_time_bin = {}\n\
         hist_pc_time_max = {}\n\
         hist_prune_time_bin = {}\n\
         hist_prune_time_max = {}\n",
        config.cache.capacity,
        config.cache.eviction_fraction,
        config.cache.slots_per_epoch,
        config.limits.block_cu_limit,
        config.limits.per_account_cu_limit,
        config.limits.vote_cu_limit,
        config.limits.account_data_limit_bytes,
        config.limits.max_locks_per_tx,
        config.limits.tx_cu_limit,
        config.limits.max_blockhash_age,
        config.workload.seed,
        config.workload.num_programs,
        config.workload.zipf_s,
        config.workload.num_accounts,
        config.workload.txs_per_slot_mean,
        config.workload.write_prob,
        config.workload.accounts_per_tx_min,
        config.workload.accounts_per_tx_max,
        config.workload.cu_min,
        config.workload.cu_max,
        config.workload.vote_fraction,
        config.workload.slots,
        config.workload.fork_prob_per_slot,
        config.workload.root_lag,
        config.latency.per_miss_load_us,
        config.latency.per_batch_base_us,
        config.latency.per_hit_us,
        config.latency.prune_per_entry_us,
        config.exec.lanes,
        config.exec.max_batch_size,
        config.exec.max_batches_per_slot,
        config.exec.cu_actual_fraction,
        config.metrics.misses.bin_width,
        config.metrics.misses.max_value,
        config.metrics.evictions.bin_width,
        config.metrics.evictions.max_value,
        config.metrics.pc_time_us.bin_width,
        config.metrics.pc_time_us.max_value,
        config.metrics.prune_time_us.bin_width,
        config.metrics.prune_time_us.max_value,
    )
}
