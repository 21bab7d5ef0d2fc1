//! Slot execution driver.
//!
//! For each batch: replenish the program cache (extract, load what is
//! missing, run the eviction pass), execute the transactions against the
//! resolved programs, commit results, release locks. Execution latency is
//! model-derived, not measured: per-batch program cache time is exactly
//! base + misses * load_cost + hits * hit_cost, which keeps runs
//! reproducible while preserving the miss-dominated structure of the real
//! measurement.
//!
//! Lanes are logical: batches are assigned round-robin loader tokens and
//! executed in deterministic virtual time, so the lane count cannot change
//! which transactions commit.

use std::collections::{BTreeSet, VecDeque};

use thiserror::Error;

use crate::ledger::{ForkGraph, Slot};
use crate::pipeline::{
    form_batch, AccountLockTable, BlockBudget, BlockLimits, SanitizedTransaction, StatusCache,
    TxError,
};
use crate::program_cache::{
    BatchCache, CacheError, LoaderToken, ProgramCache, ProgramCacheEntry, ProgramId,
};
use crate::rng::Xoshiro256PlusPlus;

/// Cost model for cache activity, in microseconds.
#[derive(Debug, Clone, PartialEq)]
pub struct LatencyModel {
    /// Cost of loading one missing program.
    pub per_miss_load_us: f64,
    /// Fixed per-batch cache overhead.
    pub per_batch_base_us: f64,
    /// Cost of one cache hit.
    pub per_hit_us: f64,
    /// Pruning cost per surviving cache entry scanned.
    pub prune_per_entry_us: f64,
}

impl Default for LatencyModel {
    fn default() -> Self {
        Self {
            per_miss_load_us: 31_782.73,
            per_batch_base_us: 13_348.65,
            per_hit_us: 0.0,
            prune_per_entry_us: 2.0,
        }
    }
}

impl LatencyModel {
    /// Program cache time attributed to a batch. Exact by construction.
    pub fn pc_time_us(&self, hits: u64, misses: u64) -> f64 {
        self.per_batch_base_us
            + misses as f64 * self.per_miss_load_us
            + hits as f64 * self.per_hit_us
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    #[error("cannot fit a latency model from two equal miss means")]
    DegenerateFit,
}

/// Solves pc = base + misses * load for two observed (miss mean, pc mean)
/// points. The per-hit cost is fixed at zero for the fit.
pub fn fit_latency_model(
    mean_misses_a: f64,
    mean_pc_us_a: f64,
    mean_misses_b: f64,
    mean_pc_us_b: f64,
) -> Result<LatencyModel, FitError> {
    if mean_misses_a == mean_misses_b {
        return Err(FitError::DegenerateFit);
    }
    let per_miss = (mean_pc_us_a - mean_pc_us_b) / (mean_misses_a - mean_misses_b);
    let base = mean_pc_us_a - mean_misses_a * per_miss;
    Ok(LatencyModel {
        per_miss_load_us: per_miss,
        per_batch_base_us: base,
        per_hit_us: 0.0,
        prune_per_entry_us: 0.0,
    })
}

/// Per-batch measurements, the unit of all reported statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchStats {
    pub slot: Slot,
    pub batch_index: u64,
    pub hits: u64,
    pub misses: u64,
    pub evictions: u64,
    pub pc_time_us: f64,
    /// Cache pruning time incurred since the previous batch.
    pub prune_time_us: f64,
    pub executed: u64,
    pub deferred: u64,
    pub cu: u64,
}

/// Outcome of a transaction that entered execution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExecOutcome {
    Committed { actual_cu: u64 },
    Dropped(TxError),
}

/// Per-transaction outcomes for one batch: everything that executed plus
/// everything the scheduler deferred or dropped while forming the batch.
#[derive(Debug)]
pub struct BatchResult {
    pub executed: Vec<(SanitizedTransaction, ExecOutcome)>,
    pub deferred: Vec<(SanitizedTransaction, TxError)>,
}

impl BatchResult {
    pub fn outcome_count(&self) -> usize {
        self.executed.len() + self.deferred.len()
    }

    pub fn committed(&self) -> impl Iterator<Item = (&SanitizedTransaction, u64)> {
        self.executed
            .iter()
            .filter_map(|(tx, outcome)| match outcome {
                ExecOutcome::Committed { actual_cu } => Some((tx, *actual_cu)),
                ExecOutcome::Dropped(_) => None,
            })
    }
}

/// Where simulated loads find program account data.
pub trait ProgramSource {
    fn program_info(&self, id: ProgramId) -> ProgramInfo;
}

#[derive(Debug, Clone)]
pub struct ProgramInfo {
    pub deployment_slot: Slot,
    pub effective_slot: Slot,
    pub owner: ProgramId,
    pub account_size: u64,
}

/// Source for synthetic workloads: every program is pre-deployed at the
/// genesis slot.
#[derive(Debug, Default)]
pub struct GenesisDeployedSource;

impl ProgramSource for GenesisDeployedSource {
    fn program_info(&self, _id: ProgramId) -> ProgramInfo {
        ProgramInfo {
            deployment_slot: 0,
            effective_slot: 0,
            owner: ProgramId([0xAB; 32]),
            account_size: 36 * 1024,
        }
    }
}

/// Cache interaction counts for one batch, plus the resolved programs.
#[derive(Debug)]
pub struct ReplenishOutcome {
    pub batch_cache: BatchCache,
    pub hits: u64,
    pub misses: u64,
    pub evictions: u64,
}

#[derive(Debug, Error)]
pub enum ExecError {
    #[error(transparent)]
    Cache(#[from] CacheError),
}

/// Pre-loads every program the batch invokes. Misses are loaded through
/// `source` and charged to this batch; the eviction pass runs afterwards if
/// the insertions pushed the cache over capacity. The returned batch cache
/// is fully resolved.
pub fn replenish_program_cache(
    batch: &[SanitizedTransaction],
    cache: &mut ProgramCache,
    graph: &ForkGraph,
    slot: Slot,
    lane: LoaderToken,
    source: &dyn ProgramSource,
    rng: &mut Xoshiro256PlusPlus,
) -> Result<ReplenishOutcome, ExecError> {
    let mut remaining: BTreeSet<ProgramId> = batch
        .iter()
        .flat_map(|tx| tx.tx().programs.iter().copied())
        .collect();
    let mut resolved = std::collections::BTreeMap::new();
    let mut hits = 0u64;
    let mut misses = 0u64;
    let mut first_round = true;
    while !remaining.is_empty() {
        let extracted = cache.extract_for_batch(&remaining, slot, graph, lane, first_round)?;
        if first_round {
            hits = extracted.executable_count() as u64;
        }
        resolved.extend(extracted.resolved);
        remaining = &extracted.missing | &extracted.awaited;
        if remaining.is_empty() {
            break;
        }
        assert!(
            !extracted.missing.is_empty(),
            "cooperative loading stalled: awaited programs but no claim on this lane"
        );
        for id in &extracted.missing {
            let info = source.program_info(*id);
            let entry = ProgramCacheEntry::new_loaded(
                *id,
                info.owner,
                info.account_size,
                info.deployment_slot,
                info.effective_slot,
                cache.env_version(),
            )?;
            cache.finish_load(*id, slot, entry, lane)?;
            misses += 1;
        }
        first_round = false;
    }
    let evictions = cache.evict_two_random(rng).len() as u64;
    Ok(ReplenishOutcome {
        batch_cache: BatchCache {
            slot,
            resolved,
            missing: BTreeSet::new(),
            awaited: BTreeSet::new(),
        },
        hits,
        misses,
        evictions,
    })
}

/// Executes a formed batch against its resolved programs. Transactions that
/// invoke a tombstoned program are dropped; the rest commit with their
/// actual cost (`requested_cu * cu_actual_fraction`). Usage counters advance
/// per program invocation.
#[allow(clippy::too_many_arguments)]
pub fn execute_batch(
    batch: Vec<SanitizedTransaction>,
    deferred: Vec<(SanitizedTransaction, TxError)>,
    replenished: &ReplenishOutcome,
    model: &LatencyModel,
    cu_actual_fraction: f64,
    slot: Slot,
    batch_index: u64,
    prune_carry_us: f64,
) -> (BatchResult, BatchStats) {
    let mut executed = Vec::with_capacity(batch.len());
    let mut committed_count = 0u64;
    let mut cu_total = 0u64;
    for tx in batch {
        let tombstoned = tx.tx().programs.iter().any(|p| {
            replenished
                .batch_cache
                .resolved
                .get(p)
                .map(|entry| entry.kind.is_tombstone())
                .unwrap_or(false)
        });
        if tombstoned {
            executed.push((tx, ExecOutcome::Dropped(TxError::InvalidProgram)));
            continue;
        }
        let actual_cu = (tx.tx().requested_cu as f64 * cu_actual_fraction).floor() as u64;
        for program in &tx.tx().programs {
            if let Some(entry) = replenished.batch_cache.resolved.get(program) {
                entry
                    .ix_usage_counter
                    .fetch_add(1, std::sync::atomic::Ordering::Relaxed);
            }
        }
        committed_count += 1;
        cu_total += actual_cu;
        executed.push((tx, ExecOutcome::Committed { actual_cu }));
    }
    let deferred_count = deferred
        .iter()
        .filter(|(_, err)| err.is_retryable())
        .count() as u64;
    let stats = BatchStats {
        slot,
        batch_index,
        hits: replenished.hits,
        misses: replenished.misses,
        evictions: replenished.evictions,
        pc_time_us: model.pc_time_us(replenished.hits, replenished.misses),
        prune_time_us: prune_carry_us,
        executed: committed_count,
        deferred: deferred_count,
        cu: cu_total,
    };
    (BatchResult { executed, deferred }, stats)
}

/// Finalizes a batch: committed transactions enter the status cache and
/// settle their actual cost; dropped ones refund their reservation in full.
/// Every lock taken for the batch is released.
pub fn commit_batch(
    result: &BatchResult,
    status_cache: &mut StatusCache,
    budget: &mut BlockBudget,
    locks: &mut AccountLockTable,
) {
    for (tx, outcome) in &result.executed {
        match outcome {
            ExecOutcome::Committed { actual_cu } => {
                status_cache.insert(tx.sig(), tx.tx().blockhash_ref);
                budget
                    .adjust(tx.sig(), *actual_cu)
                    .expect("batch member reserved");
            }
            ExecOutcome::Dropped(_) => {
                budget.release(tx.sig()).expect("batch member reserved");
            }
        }
        locks.unlock(tx).expect("batch member locked");
    }
}

/// Per-slot execution knobs.
#[derive(Debug, Clone, PartialEq)]
pub struct ExecConfig {
    /// Logical execution lanes; batches take round-robin loader tokens.
    pub lanes: u64,
    pub max_batch_size: usize,
    /// Stand-in for the real time-based ingestion cutoff.
    pub max_batches_per_slot: usize,
    /// Fraction of the requested compute a transaction actually consumes.
    pub cu_actual_fraction: f64,
}

impl Default for ExecConfig {
    fn default() -> Self {
        Self {
            lanes: 4,
            max_batch_size: 64,
            max_batches_per_slot: 64,
            cu_actual_fraction: 1.0,
        }
    }
}

/// Runs one slot to completion: expires stale transactions, then forms and
/// executes batches until the queue empties, nothing more can be scheduled
/// (budget exhausted), or the per-slot batch cap is reached. The slot's
/// budget is dropped afterwards; remaining transactions stay queued for the
/// next slot.
#[allow(clippy::too_many_arguments)]
pub fn run_slot(
    slot: Slot,
    queue: &mut VecDeque<SanitizedTransaction>,
    cache: &mut ProgramCache,
    graph: &ForkGraph,
    status_cache: &mut StatusCache,
    limits: &BlockLimits,
    model: &LatencyModel,
    exec_config: &ExecConfig,
    source: &dyn ProgramSource,
    rng: &mut Xoshiro256PlusPlus,
    prune_carry_us: f64,
    mut on_batch: impl FnMut(&BatchResult, &BatchStats),
) -> Result<Vec<BatchStats>, ExecError> {
    queue.retain(|tx| slot.saturating_sub(tx.tx().blockhash_ref) <= limits.max_blockhash_age);
    let mut budget = BlockBudget::new(limits.clone());
    let mut locks = AccountLockTable::default();
    let mut stats_out = Vec::new();
    let mut prune_carry_us = prune_carry_us;
    for batch_index in 0..exec_config.max_batches_per_slot as u64 {
        if queue.is_empty() {
            break;
        }
        let formed = form_batch(
            queue,
            &mut locks,
            &mut budget,
            status_cache,
            exec_config.max_batch_size,
        );
        if formed.batch.is_empty() {
            // Locks are free at this point, so an empty batch means every
            // queued transaction is blocked on the block budget (retryable,
            // wait for the next slot) or was dropped by the status cache.
            let made_progress = formed.deferred.iter().any(|(_, err)| !err.is_retryable());
            if made_progress {
                continue;
            }
            break;
        }
        let lane = LoaderToken(batch_index % exec_config.lanes);
        let replenished =
            replenish_program_cache(&formed.batch, cache, graph, slot, lane, source, rng)?;
        let (result, stats) = execute_batch(
            formed.batch,
            formed.deferred,
            &replenished,
            model,
            exec_config.cu_actual_fraction,
            slot,
            batch_index,
            std::mem::take(&mut prune_carry_us),
        );
        commit_batch(&result, status_cache, &mut budget, &mut locks);
        on_batch(&result, &stats);
        stats_out.push(stats);
    }
    Ok(stats_out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{sanitize, Transaction};
    use crate::program_cache::{CacheConfig, EntryKind};
    use std::collections::BTreeSet;

    fn linear_graph(len: Slot) -> ForkGraph {
        let mut g = ForkGraph::new(0);
        for s in 1..=len {
            g.add_slot(s, s - 1).unwrap();
        }
        g
    }

    fn tx_for_program(sig: u64, program: ProgramId, write: u64) -> SanitizedTransaction {
        let t = Transaction {
            sig,
            blockhash_ref: 0,
            programs: vec![program],
            reads: BTreeSet::new(),
            writes: [write].into_iter().collect(),
            requested_cu: 100,
            is_vote: false,
            precompiles: BTreeSet::new(),
            data_bytes: 0,
        };
        sanitize(t, 0, &BTreeSet::new(), &BlockLimits::default()).unwrap()
    }

    fn cache_with_capacity(capacity: usize) -> ProgramCache {
        ProgramCache::new(CacheConfig {
            capacity,
            ..CacheConfig::default()
        })
    }

    #[test]
    fn fit_latency_model_from_reference_points() {
        let model = fit_latency_model(0.85, 40_363.97, 0.02, 13_984.30).unwrap();
        assert!((model.per_miss_load_us - 31_782.73).abs() < 0.01);
        assert!((model.per_batch_base_us - 13_348.65).abs() < 0.01);
        // predicted mean at 0.09 misses per batch
        let predicted = model.per_batch_base_us + 0.09 * model.per_miss_load_us;
        assert!((predicted - 16_209.09).abs() < 0.01);
        let observed = 15_239.21;
        let rel_err = (predicted - observed).abs() / observed;
        assert!(rel_err < 0.10, "relative error {rel_err}");
        assert!((rel_err - 0.064).abs() < 0.002);
    }

    #[test]
    fn fit_rejects_equal_miss_means() {
        assert_eq!(
            fit_latency_model(0.5, 100.0, 0.5, 200.0).unwrap_err(),
            FitError::DegenerateFit
        );
    }

    #[test]
    fn pc_time_identity_for_empty_batch() {
        let model = LatencyModel {
            per_miss_load_us: 31_782.73,
            per_batch_base_us: 13_348.65,
            per_hit_us: 0.0,
            prune_per_entry_us: 0.0,
        };
        assert_eq!(model.pc_time_us(0, 0), 13_348.65);
        // one miss, zero hits
        assert!((model.pc_time_us(0, 1) - 45_131.38).abs() < 1e-9);
    }

    #[test]
    fn replenish_warm_hit() {
        let mut cache = cache_with_capacity(16);
        let graph = linear_graph(3);
        let p = ProgramId::from_u64(1);
        let source = GenesisDeployedSource;
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(1);
        let batch = vec![tx_for_program(1, p, 10)];

        let first = replenish_program_cache(
            &batch,
            &mut cache,
            &graph,
            1,
            LoaderToken(0),
            &source,
            &mut rng,
        )
        .unwrap();
        assert_eq!((first.hits, first.misses), (0, 1));

        let batch = vec![tx_for_program(2, p, 11)];
        let second = replenish_program_cache(
            &batch,
            &mut cache,
            &graph,
            2,
            LoaderToken(0),
            &source,
            &mut rng,
        )
        .unwrap();
        assert_eq!((second.hits, second.misses), (1, 0));
        assert!(second.batch_cache.is_fully_resolved());
    }

    #[test]
    fn replenish_loads_union_of_missing_programs() {
        let mut cache = cache_with_capacity(16);
        let graph = linear_graph(3);
        let source = GenesisDeployedSource;
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(2);
        // three transactions, three distinct uncached programs; one repeated
        let batch = vec![
            tx_for_program(1, ProgramId::from_u64(10), 1),
            tx_for_program(2, ProgramId::from_u64(11), 2),
            tx_for_program(3, ProgramId::from_u64(12), 3),
            tx_for_program(4, ProgramId::from_u64(10), 4),
        ];
        let outcome = replenish_program_cache(
            &batch,
            &mut cache,
            &graph,
            1,
            LoaderToken(0),
            &source,
            &mut rng,
        )
        .unwrap();
        assert_eq!(outcome.misses, 3);
        assert_eq!(outcome.batch_cache.resolved.len(), 3);
        assert_eq!(cache.stats_snapshot().insertions, 3);
    }

    #[test]
    fn replenish_triggers_eviction_pass_over_capacity() {
        let capacity = 10;
        let mut cache = cache_with_capacity(capacity);
        let graph = linear_graph(3);
        let source = GenesisDeployedSource;
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(3);
        for n in 0..capacity as u64 {
            let batch = vec![tx_for_program(n, ProgramId::from_u64(n), n)];
            replenish_program_cache(
                &batch,
                &mut cache,
                &graph,
                1,
                LoaderToken(0),
                &source,
                &mut rng,
            )
            .unwrap();
        }
        assert_eq!(cache.loaded_count(), capacity);
        // the insertion that pushes the cache to capacity + 1 triggers a
        // pass shrinking it to floor(0.9 * capacity)
        let batch = vec![tx_for_program(99, ProgramId::from_u64(99), 99)];
        let outcome = replenish_program_cache(
            &batch,
            &mut cache,
            &graph,
            2,
            LoaderToken(0),
            &source,
            &mut rng,
        )
        .unwrap();
        assert_eq!(cache.loaded_count(), 9);
        assert_eq!(outcome.evictions, 2);
    }

    #[test]
    fn execute_batch_empty_costs_base_time() {
        let model = LatencyModel::default();
        let rep = ReplenishOutcome {
            batch_cache: BatchCache {
                slot: 1,
                resolved: Default::default(),
                missing: BTreeSet::new(),
                awaited: BTreeSet::new(),
            },
            hits: 0,
            misses: 0,
            evictions: 0,
        };
        let (result, stats) = execute_batch(vec![], vec![], &rep, &model, 1.0, 1, 0, 0.0);
        assert_eq!(result.outcome_count(), 0);
        assert_eq!(stats.executed, 0);
        assert_eq!(stats.pc_time_us, model.per_batch_base_us);
    }

    #[test]
    fn execute_batch_drops_tombstoned_transactions() {
        let mut cache = cache_with_capacity(16);
        let graph = linear_graph(3);
        let p = ProgramId::from_u64(5);
        cache
            .insert_entry(ProgramCacheEntry::new_tombstone(
                p,
                ProgramId([0xAA; 32]),
                0,
                EntryKind::FailedVerification,
            ))
            .unwrap();
        let source = GenesisDeployedSource;
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(4);
        let batch = vec![tx_for_program(1, p, 1)];
        let rep = replenish_program_cache(
            &batch,
            &mut cache,
            &graph,
            1,
            LoaderToken(0),
            &source,
            &mut rng,
        )
        .unwrap();
        assert_eq!(rep.misses, 0, "tombstone resolution is not a miss");
        let (result, stats) = execute_batch(
            batch,
            vec![],
            &rep,
            &LatencyModel::default(),
            1.0,
            1,
            0,
            0.0,
        );
        assert_eq!(
            result.executed[0].1,
            ExecOutcome::Dropped(TxError::InvalidProgram)
        );
        assert_eq!(stats.executed, 0);
    }

    fn run_one_slot(
        slot: Slot,
        queue: &mut VecDeque<SanitizedTransaction>,
        cache: &mut ProgramCache,
        graph: &ForkGraph,
        status: &mut StatusCache,
        limits: &BlockLimits,
        exec_config: &ExecConfig,
    ) -> Vec<BatchStats> {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(9);
        run_slot(
            slot,
            queue,
            cache,
            graph,
            status,
            limits,
            &LatencyModel::default(),
            exec_config,
            &GenesisDeployedSource,
            &mut rng,
            0.0,
            |_, _| {},
        )
        .unwrap()
    }

    #[test]
    fn run_slot_empty_queue_executes_nothing() {
        let mut cache = cache_with_capacity(16);
        let graph = linear_graph(1);
        let mut queue = VecDeque::new();
        let mut status = StatusCache::default();
        let stats = run_one_slot(
            1,
            &mut queue,
            &mut cache,
            &graph,
            &mut status,
            &BlockLimits::default(),
            &ExecConfig::default(),
        );
        assert!(stats.is_empty());
    }

    #[test]
    fn run_slot_splits_queue_into_batches() {
        let mut cache = cache_with_capacity(16);
        let graph = linear_graph(1);
        let mut queue: VecDeque<_> = (0..8)
            .map(|n| tx_for_program(n, ProgramId::from_u64(n), 100 + n))
            .collect();
        let mut status = StatusCache::default();
        let exec_config = ExecConfig {
            max_batch_size: 4,
            ..ExecConfig::default()
        };
        let stats = run_one_slot(
            1,
            &mut queue,
            &mut cache,
            &graph,
            &mut status,
            &BlockLimits::default(),
            &exec_config,
        );
        assert_eq!(stats.len(), 2);
        assert_eq!(stats.iter().map(|s| s.executed).sum::<u64>(), 8);
        assert_eq!(status.len(), 8, "every commit lands in the status cache");
        assert!(queue.is_empty());
    }

    #[test]
    fn run_slot_defers_when_budget_exhausted() {
        let mut cache = cache_with_capacity(16);
        let graph = linear_graph(2);
        let limits = BlockLimits {
            block_cu_limit: 150,
            ..BlockLimits::default()
        };
        // each transaction requests 100 cu, so only one fits per block
        let mut queue: VecDeque<_> = (0..3)
            .map(|n| tx_for_program(n, ProgramId::from_u64(n), 100 + n))
            .collect();
        let mut status = StatusCache::default();
        let stats = run_one_slot(
            1,
            &mut queue,
            &mut cache,
            &graph,
            &mut status,
            &limits,
            &ExecConfig::default(),
        );
        assert_eq!(stats.iter().map(|s| s.executed).sum::<u64>(), 1);
        assert_eq!(queue.len(), 2, "budget-blocked transactions stay queued");
        // the next slot picks them up
        let stats = run_one_slot(
            2,
            &mut queue,
            &mut cache,
            &graph,
            &mut status,
            &limits,
            &ExecConfig::default(),
        );
        assert_eq!(stats.iter().map(|s| s.executed).sum::<u64>(), 1);
        assert_eq!(queue.len(), 1);
    }

    #[test]
    fn run_slot_expires_stale_transactions() {
        let mut cache = cache_with_capacity(16);
        let mut graph = linear_graph(1);
        graph.add_slot(200, 1).unwrap();
        let mut queue: VecDeque<_> = vec![tx_for_program(1, ProgramId::from_u64(1), 1)]
            .into_iter()
            .collect();
        let mut status = StatusCache::default();
        // blockhash_ref = 0; at slot 200 the default max age of 150 is blown
        let stats = run_one_slot(
            200,
            &mut queue,
            &mut cache,
            &graph,
            &mut status,
            &BlockLimits::default(),
            &ExecConfig::default(),
        );
        assert!(stats.is_empty());
        assert!(queue.is_empty());
    }

    #[test]
    fn replayed_transaction_is_rejected_next_slot() {
        let mut cache = cache_with_capacity(16);
        let graph = linear_graph(2);
        let mut status = StatusCache::default();
        let tx = tx_for_program(7, ProgramId::from_u64(7), 7);
        let mut queue: VecDeque<_> = vec![tx.clone()].into_iter().collect();
        run_one_slot(
            1,
            &mut queue,
            &mut cache,
            &graph,
            &mut status,
            &BlockLimits::default(),
            &ExecConfig::default(),
        );
        assert_eq!(status.len(), 1);
        // replay the same (sig, blockhash) pair in the next slot
        queue.push_back(tx);
        let stats = run_one_slot(
            2,
            &mut queue,
            &mut cache,
            &graph,
            &mut status,
            &BlockLimits::default(),
            &ExecConfig::default(),
        );
        assert!(stats.is_empty());
        assert_eq!(status.len(), 1);
    }

    #[test]
    fn lane_count_does_not_change_outcomes() {
        let graph = linear_graph(1);
        let mut committed = Vec::new();
        for lanes in [1u64, 4] {
            let mut cache = cache_with_capacity(8);
            let mut status = StatusCache::default();
            let mut queue: VecDeque<_> = (0..20)
                .map(|n| tx_for_program(n, ProgramId::from_u64(n % 12), n))
                .collect();
            let exec_config = ExecConfig {
                lanes,
                max_batch_size: 4,
                ..ExecConfig::default()
            };
            let mut sigs = Vec::new();
            let mut rng = Xoshiro256PlusPlus::seed_from_u64(42);
            let stats = run_slot(
                1,
                &mut queue,
                &mut cache,
                &graph,
                &mut status,
                &BlockLimits::default(),
                &LatencyModel::default(),
                &exec_config,
                &GenesisDeployedSource,
                &mut rng,
                0.0,
                |result, _| {
                    sigs.extend(result.committed().map(|(tx, _)| tx.sig()));
                },
            )
            .unwrap();
            committed.push((sigs, stats));
        }
        assert_eq!(committed[0], committed[1]);
    }
}
