//! Synthetic transaction streams and fork schedules.
//!
//! Program popularity follows a Zipf distribution whose skew drives the
//! cache-size experiments: a handful of hot programs dominate while a long
//! tail trickles in misses. Everything is generated from a seeded stream so
//! the same configuration always produces the same trace, and traces can be
//! written to and replayed from line-oriented text files.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::ledger::Slot;
use crate::pipeline::{AccountId, Transaction, TxSig};
use crate::program_cache::ProgramId;
use crate::rng::Xoshiro256PlusPlus;

/// Vote program shipped with the validator; vote transactions invoke it.
pub fn vote_program() -> ProgramId {
    ProgramId([0xFE; 32])
}

/// System program shipped with the validator.
pub fn system_program() -> ProgramId {
    ProgramId([0xFD; 32])
}

/// Synthetic program id for popularity rank `index`.
pub fn user_program(index: u64) -> ProgramId {
    ProgramId::from_u64(index)
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WorkloadError {
    #[error("zipf domain must not be empty")]
    EmptyDomain,
    #[error("invalid workload config: {0}")]
    InvalidConfig(&'static str),
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace i/o failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed trace at line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadConfig {
    pub seed: u64,
    pub num_programs: u64,
    /// Zipf skew exponent; 0 is uniform.
    pub zipf_s: f64,
    pub num_accounts: u64,
    /// Poisson mean of transactions generated per slot.
    pub txs_per_slot_mean: f64,
    /// Probability that a referenced account is writable.
    pub write_prob: f64,
    pub accounts_per_tx_min: u64,
    pub accounts_per_tx_max: u64,
    pub cu_min: u64,
    pub cu_max: u64,
    pub vote_fraction: f64,
    /// Number of slots to simulate.
    pub slots: u64,
    /// Probability that a slot gets a competing sibling branch.
    pub fork_prob_per_slot: f64,
    /// The root trails the tip by this many slots.
    pub root_lag: u64,
    pub slots_per_epoch: u64,
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            num_programs: 600,
            zipf_s: 1.2,
            num_accounts: 100_000,
            txs_per_slot_mean: 384.0,
            write_prob: 0.5,
            accounts_per_tx_min: 2,
            accounts_per_tx_max: 8,
            cu_min: 1_000,
            cu_max: 200_000,
            vote_fraction: 0.1,
            slots: 300,
            fork_prob_per_slot: 0.05,
            root_lag: 32,
            slots_per_epoch: 432_000,
        }
    }
}

impl WorkloadConfig {
    pub fn validate(&self) -> Result<(), WorkloadError> {
        if self.num_programs == 0 {
            return Err(WorkloadError::InvalidConfig("num_programs must be >= 1"));
        }
        if self.num_accounts == 0 {
            return Err(WorkloadError::InvalidConfig("num_accounts must be >= 1"));
        }
        if self.zipf_s < 0.0 || !self.zipf_s.is_finite() {
            return Err(WorkloadError::InvalidConfig("zipf_s must be >= 0"));
        }
        if self.txs_per_slot_mean < 0.0 || !self.txs_per_slot_mean.is_finite() {
            return Err(WorkloadError::InvalidConfig(
                "txs_per_slot_mean must be >= 0",
            ));
        }
        if !(0.0..=1.0).contains(&self.write_prob) {
            return Err(WorkloadError::InvalidConfig("write_prob must be in 0..1"));
        }
        if !(0.0..=1.0).contains(&self.vote_fraction) {
            return Err(WorkloadError::InvalidConfig(
                "vote_fraction must be in 0..1",
            ));
        }
        if !(0.0..=1.0).contains(&self.fork_prob_per_slot) {
            return Err(WorkloadError::InvalidConfig(
                "fork_prob_per_slot must be in 0..1",
            ));
        }
        if self.accounts_per_tx_min > self.accounts_per_tx_max {
            return Err(WorkloadError::InvalidConfig(
                "accounts_per_tx range is inverted",
            ));
        }
        if self.accounts_per_tx_max > self.num_accounts {
            return Err(WorkloadError::InvalidConfig(
                "accounts_per_tx_max exceeds num_accounts",
            ));
        }
        if self.cu_min > self.cu_max {
            return Err(WorkloadError::InvalidConfig("cu range is inverted"));
        }
        if self.slots_per_epoch == 0 {
            return Err(WorkloadError::InvalidConfig("slots_per_epoch must be >= 1"));
        }
        Ok(())
    }
}

/// Zipf sampler over `[0, n)` with exponent `s`: index k is drawn with
/// probability proportional to 1 / (k + 1)^s. Uses a precomputed cumulative
/// table and binary search, so the distribution is exact and deterministic.
#[derive(Debug, Clone)]
pub struct ZipfSampler {
    cdf: Vec<f64>,
}

impl ZipfSampler {
    pub fn new(n: u64, s: f64) -> Result<Self, WorkloadError> {
        if n == 0 {
            return Err(WorkloadError::EmptyDomain);
        }
        let mut cdf = Vec::with_capacity(n as usize);
        let mut total = 0.0f64;
        for k in 0..n {
            total += 1.0 / ((k + 1) as f64).powf(s);
            cdf.push(total);
        }
        for c in cdf.iter_mut() {
            *c /= total;
        }
        // guard against floating point drift on the last bucket
        *cdf.last_mut().expect("n >= 1") = 1.0;
        Ok(Self { cdf })
    }

    pub fn sample(&self, rng: &mut Xoshiro256PlusPlus) -> u64 {
        let u = rng.next_f64();
        self.cdf.partition_point(|&c| c <= u) as u64
    }
}

/// One-shot draw; builds the cumulative table each call. Use [`ZipfSampler`]
/// when drawing repeatedly.
pub fn zipf_sample(rng: &mut Xoshiro256PlusPlus, n: u64, s: f64) -> Result<u64, WorkloadError> {
    Ok(ZipfSampler::new(n, s)?.sample(rng))
}

/// Deterministic unique signature for the k-th transaction of a slot.
fn tx_sig(slot: Slot, index: u64) -> TxSig {
    (slot << 24) | index
}

/// Generates the transactions arriving during `slot`. Transaction count is
/// Poisson, program choice is Zipf (votes invoke the vote builtin), account
/// sets are distinct draws with `write_prob` deciding writability.
pub fn gen_slot_txs(
    config: &WorkloadConfig,
    rng: &mut Xoshiro256PlusPlus,
    slot: Slot,
) -> Vec<Transaction> {
    let zipf = ZipfSampler::new(config.num_programs, config.zipf_s).expect("validated config");
    let count = rng.poisson(config.txs_per_slot_mean);
    let mut txs = Vec::with_capacity(count as usize);
    for index in 0..count {
        let is_vote = rng.gen_bool(config.vote_fraction);
        let program = if is_vote {
            vote_program()
        } else {
            user_program(zipf.sample(rng))
        };
        let account_count = if config.accounts_per_tx_max == 0 {
            0
        } else {
            rng.gen_range_inclusive(config.accounts_per_tx_min, config.accounts_per_tx_max)
        };
        let mut accounts: Vec<AccountId> = Vec::with_capacity(account_count as usize);
        while (accounts.len() as u64) < account_count {
            let candidate = rng.gen_range(config.num_accounts);
            if !accounts.contains(&candidate) {
                accounts.push(candidate);
            }
        }
        let mut reads = BTreeSet::new();
        let mut writes = BTreeSet::new();
        for account in accounts {
            if rng.gen_bool(config.write_prob) {
                writes.insert(account);
            } else {
                reads.insert(account);
            }
        }
        let requested_cu = rng.gen_range_inclusive(config.cu_min, config.cu_max);
        let data_bytes = 128 + 32 * (reads.len() + writes.len()) as u64;
        txs.push(Transaction {
            sig: tx_sig(slot, index),
            blockhash_ref: slot,
            programs: vec![program],
            reads,
            writes,
            requested_cu,
            is_vote,
            precompiles: BTreeSet::new(),
            data_bytes,
        });
    }
    txs
}

/// Fork-graph mutations around one executed slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForkStep {
    /// The slot whose transactions execute during this step.
    pub slot: Slot,
    /// Slots added before execution: the main-chain slot and, on forking
    /// steps, a competing sibling of the same parent.
    pub adds: Vec<(Slot, Slot)>,
    /// Root advancement applied after execution.
    pub set_root: Option<Slot>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ForkSchedule {
    pub steps: Vec<ForkStep>,
}

/// Builds the fork schedule: main-chain slots 1..=slots, each with an
/// optional competing sibling (ids above the main range so they never
/// collide), and the root trailing the tip by `root_lag` slots.
pub fn gen_fork_schedule(config: &WorkloadConfig, rng: &mut Xoshiro256PlusPlus) -> ForkSchedule {
    let mut steps = Vec::with_capacity(config.slots as usize);
    let mut current_root = 0u64;
    for slot in 1..=config.slots {
        let parent = slot - 1;
        let mut adds = vec![(slot, parent)];
        if rng.gen_bool(config.fork_prob_per_slot) {
            adds.push((config.slots + 1 + slot, parent));
        }
        let candidate = slot.saturating_sub(config.root_lag);
        let set_root = if candidate > current_root {
            current_root = candidate;
            Some(candidate)
        } else {
            None
        };
        steps.push(ForkStep {
            slot,
            adds,
            set_root,
        });
    }
    ForkSchedule { steps }
}

/// One line of a trace file.
#[derive(Debug, Clone, PartialEq)]
pub enum TraceRecord {
    AddSlot { child: Slot, parent: Slot },
    SetRoot { slot: Slot },
    Tx { slot: Slot, tx: Transaction },
}

/// A recorded workload: slot-ordered records plus the seed of the run that
/// produced them. The seed rides along so a replay reproduces the
/// generating run exactly, including the eviction sampling stream.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub seed: u64,
    pub records: Vec<TraceRecord>,
}

/// Generates the full trace for a configuration: per slot, fork additions,
/// then the slot's transactions, then the root advancement.
pub fn generate_trace(config: &WorkloadConfig) -> Result<Trace, WorkloadError> {
    config.validate()?;
    let mut tx_rng = Xoshiro256PlusPlus::seed_from_u64(config.seed);
    let mut fork_rng = Xoshiro256PlusPlus::seed_from_u64(config.seed ^ 0x666F726B); // "fork"
    let schedule = gen_fork_schedule(config, &mut fork_rng);
    let mut records = Vec::new();
    for step in &schedule.steps {
        for &(child, parent) in &step.adds {
            records.push(TraceRecord::AddSlot { child, parent });
        }
        for tx in gen_slot_txs(config, &mut tx_rng, step.slot) {
            records.push(TraceRecord::Tx {
                slot: step.slot,
                tx,
            });
        }
        if let Some(root) = step.set_root {
            records.push(TraceRecord::SetRoot { slot: root });
        }
    }
    Ok(Trace {
        seed: config.seed,
        records,
    })
}

const TRACE_HEADER: &str = "# svm-sim-trace v1";
const TRACE_COLUMNS: &str =
    "# columns: kind,slot[,parent | ,sig,blockhash,vote,cu,data,programs,reads,writes,precompiles]";

fn join_u64<I: IntoIterator<Item = u64>>(items: I) -> String {
    items
        .into_iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(";")
}

fn format_record(record: &TraceRecord) -> String {
    match record {
        TraceRecord::AddSlot { child, parent } => format!("add_slot,{child},{parent}"),
        TraceRecord::SetRoot { slot } => format!("set_root,{slot}"),
        TraceRecord::Tx { slot, tx } => {
            let programs = tx
                .programs
                .iter()
                .map(|p| p.to_hex())
                .collect::<Vec<_>>()
                .join(";");
            format!(
                "tx,{},{},{},{},{},{},{},{},{},{}",
                slot,
                tx.sig,
                tx.blockhash_ref,
                u8::from(tx.is_vote),
                tx.requested_cu,
                tx.data_bytes,
                programs,
                join_u64(tx.reads.iter().copied()),
                join_u64(tx.writes.iter().copied()),
                join_u64(tx.precompiles.iter().map(|p| *p as u64)),
            )
        }
    }
}

pub fn write_trace(trace: &Trace, path: &Path) -> Result<(), TraceError> {
    let mut out = String::new();
    out.push_str(TRACE_HEADER);
    out.push('\n');
    out.push_str(&format!("# seed: {}\n", trace.seed));
    out.push_str(TRACE_COLUMNS);
    out.push('\n');
    for record in &trace.records {
        out.push_str(&format_record(record));
        out.push('\n');
    }
    let mut file = fs::File::create(path)?;
    file.write_all(out.as_bytes())?;
    Ok(())
}

fn malformed(line: usize, reason: impl Into<String>) -> TraceError {
    TraceError::Malformed {
        line,
        reason: reason.into(),
    }
}

fn parse_u64(field: &str, line: usize, what: &str) -> Result<u64, TraceError> {
    field
        .parse::<u64>()
        .map_err(|_| malformed(line, format!("invalid {what}: {field:?}")))
}

fn parse_u64_list(field: &str, line: usize, what: &str) -> Result<Vec<u64>, TraceError> {
    if field.is_empty() {
        return Ok(Vec::new());
    }
    field
        .split(';')
        .map(|item| parse_u64(item, line, what))
        .collect()
}

pub fn load_trace(path: &Path) -> Result<Trace, TraceError> {
    let text = fs::read_to_string(path)?;
    parse_trace(&text)
}

pub fn parse_trace(text: &str) -> Result<Trace, TraceError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, first)) if first == TRACE_HEADER => {}
        Some((_, other)) => {
            return Err(malformed(1, format!("unexpected header {other:?}")));
        }
        None => return Err(malformed(1, "empty file")),
    }
    let seed = match lines.next() {
        Some((_, line)) => match line.strip_prefix("# seed: ") {
            Some(value) => value
                .parse::<u64>()
                .map_err(|_| malformed(2, format!("invalid seed {value:?}")))?,
            None => return Err(malformed(2, "missing seed header")),
        },
        None => return Err(malformed(2, "missing seed header")),
    };
    let mut records = Vec::new();
    for (index, line) in lines {
        let line_no = index + 1;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        match fields[0] {
            "add_slot" => {
                if fields.len() != 3 {
                    return Err(malformed(line_no, "add_slot takes 2 fields"));
                }
                records.push(TraceRecord::AddSlot {
                    child: parse_u64(fields[1], line_no, "slot")?,
                    parent: parse_u64(fields[2], line_no, "parent")?,
                });
            }
            "set_root" => {
                if fields.len() != 2 {
                    return Err(malformed(line_no, "set_root takes 1 field"));
                }
                records.push(TraceRecord::SetRoot {
                    slot: parse_u64(fields[1], line_no, "slot")?,
                });
            }
            "tx" => {
                if fields.len() != 11 {
                    return Err(malformed(
                        line_no,
                        format!("tx takes 10 fields, found {}", fields.len() - 1),
                    ));
                }
                let slot = parse_u64(fields[1], line_no, "slot")?;
                let programs = if fields[7].is_empty() {
                    Vec::new()
                } else {
                    fields[7]
                        .split(';')
                        .map(|hex| {
                            ProgramId::from_hex(hex).ok_or_else(|| {
                                malformed(line_no, format!("bad program id {hex:?}"))
                            })
                        })
                        .collect::<Result<Vec<_>, _>>()?
                };
                let reads: BTreeSet<AccountId> =
                    parse_u64_list(fields[8], line_no, "read account")?
                        .into_iter()
                        .collect();
                let writes: BTreeSet<AccountId> =
                    parse_u64_list(fields[9], line_no, "write account")?
                        .into_iter()
                        .collect();
                if !reads.is_disjoint(&writes) {
                    return Err(malformed(line_no, "read and write sets overlap"));
                }
                let precompiles = parse_u64_list(fields[10], line_no, "precompile")?
                    .into_iter()
                    .map(|p| p as u32)
                    .collect();
                records.push(TraceRecord::Tx {
                    slot,
                    tx: Transaction {
                        sig: parse_u64(fields[2], line_no, "sig")?,
                        blockhash_ref: parse_u64(fields[3], line_no, "blockhash")?,
                        programs,
                        reads,
                        writes,
                        requested_cu: parse_u64(fields[5], line_no, "cu")?,
                        is_vote: match fields[4] {
                            "0" => false,
                            "1" => true,
                            other => {
                                return Err(malformed(line_no, format!("bad vote flag {other:?}")))
                            }
                        },
                        precompiles,
                        data_bytes: parse_u64(fields[6], line_no, "data bytes")?,
                    },
                });
            }
            other => return Err(malformed(line_no, format!("unknown record kind {other:?}"))),
        }
    }
    Ok(Trace { seed, records })
}
