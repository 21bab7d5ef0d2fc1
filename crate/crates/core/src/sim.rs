//! End-to-end simulation runs, sweeps and report re-aggregation.
//!
//! A run drives one workload through the pipeline slot by slot: apply fork
//! events, roll the epoch when the slot crosses a boundary, sanitize and
//! enqueue arriving transactions, execute batches, then advance the root
//! and prune the cache per the fork schedule. Prune time is attributed to
//! the next executed batch, matching the per-batch measurement unit.
//!
//! Workload generation, fork scheduling and eviction sampling draw from
//! separate seeded streams, so changing the cache capacity never perturbs
//! the transaction stream — a sweep runs the identical workload per size.

use std::collections::VecDeque;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::config::{self, ConfigError, SimConfig};
use crate::exec::{
    run_slot, BatchResult, BatchStats, ExecError, GenesisDeployedSource, ProgramSource,
};
use crate::ledger::{epoch_of, ForkGraph, LedgerError, Slot};
use crate::metrics::{
    batches_csv, histograms_csv, parse_batches_csv, summary_csv, sweep_csv, MetricsError,
    SeriesStore, SweepEntry, SweepReport,
};
use crate::pipeline::{sanitize, StatusCache, Transaction};
use crate::program_cache::{ProgramCache, ProgramCacheEntry, StatsSnapshot};
use crate::rng::Xoshiro256PlusPlus;
use crate::workload::{
    gen_fork_schedule, gen_slot_txs, load_trace, system_program, vote_program, ForkStep, Trace,
    TraceError, TraceRecord,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("i/o failed: {0}")]
    Io(#[from] std::io::Error),
}

/// Receives every executed batch; the default implementation ignores them.
pub trait SimObserver {
    fn on_batch(&mut self, _result: &BatchResult, _stats: &BatchStats) {}
}

pub struct NoopObserver;

impl SimObserver for NoopObserver {}

#[derive(Debug)]
pub struct RunOutput {
    pub store: SeriesStore,
    pub cache_stats: StatsSnapshot,
    /// Transactions dropped at ingestion by sanitization.
    pub sanitize_drops: u64,
    /// Transactions accepted into the scheduling queue.
    pub txs_enqueued: u64,
    /// Transactions still queued when the run ended.
    pub leftover_queue: usize,
}

/// Everything that happens around one executed slot.
struct SlotWork {
    slot: Slot,
    adds: Vec<(Slot, Slot)>,
    txs: Vec<Transaction>,
    set_root: Option<Slot>,
}

/// Runs a configuration with a synthetic workload.
pub fn run(config: &SimConfig, observer: &mut dyn SimObserver) -> Result<RunOutput, SimError> {
    config.validate()?;
    let mut tx_rng = Xoshiro256PlusPlus::seed_from_u64(config.workload.seed);
    let mut fork_rng = Xoshiro256PlusPlus::seed_from_u64(config.workload.seed ^ 0x666F_726B);
    let schedule = gen_fork_schedule(&config.workload, &mut fork_rng);
    let workload = config.workload.clone();
    let steps = schedule
        .steps
        .into_iter()
        .map(move |step: ForkStep| SlotWork {
            slot: step.slot,
            adds: step.adds,
            txs: gen_slot_txs(&workload, &mut tx_rng, step.slot),
            set_root: step.set_root,
        });
    run_impl(config, steps, &GenesisDeployedSource, observer)
}

/// Replays a recorded trace under a configuration. The trace supplies the
/// transactions, fork events and run seed; everything else (cache size,
/// budgets, latency model) comes from the config.
pub fn run_trace(
    config: &SimConfig,
    trace: &Trace,
    observer: &mut dyn SimObserver,
) -> Result<RunOutput, SimError> {
    let mut config = config.clone();
    config.workload.seed = trace.seed;
    config.validate()?;
    let mut work: Vec<SlotWork> = Vec::new();
    // Fork additions open a slot's work; the root advance closes it. A
    // transaction for an unopened slot opens it implicitly.
    let ensure_slot = |work: &mut Vec<SlotWork>, slot: Slot| {
        if work.last().map(|w| w.slot) != Some(slot) {
            work.push(SlotWork {
                slot,
                adds: Vec::new(),
                txs: Vec::new(),
                set_root: None,
            });
        }
    };
    for record in &trace.records {
        match record {
            TraceRecord::AddSlot { child, parent } => {
                // main-chain slots execute; siblings attach to the same step
                if *parent + 1 == *child || work.is_empty() {
                    ensure_slot(&mut work, *child);
                    work.last_mut()
                        .expect("just ensured")
                        .adds
                        .push((*child, *parent));
                } else {
                    work.last_mut()
                        .expect("not empty")
                        .adds
                        .push((*child, *parent));
                }
            }
            TraceRecord::Tx { slot, tx } => {
                ensure_slot(&mut work, *slot);
                work.last_mut().expect("just ensured").txs.push(tx.clone());
            }
            TraceRecord::SetRoot { slot } => {
                if let Some(last) = work.last_mut() {
                    last.set_root = Some(*slot);
                }
            }
        }
    }
    run_impl(&config, work.into_iter(), &GenesisDeployedSource, observer)
}

fn run_impl(
    config: &SimConfig,
    steps: impl Iterator<Item = SlotWork>,
    source: &dyn ProgramSource,
    observer: &mut dyn SimObserver,
) -> Result<RunOutput, SimError> {
    let mut graph = ForkGraph::new(0);
    let mut cache = ProgramCache::new(config.cache.clone());
    cache
        .insert_entry(ProgramCacheEntry::new_builtin(system_program()))
        .expect("builtin seed");
    cache
        .insert_entry(ProgramCacheEntry::new_builtin(vote_program()))
        .expect("builtin seed");
    let mut eviction_rng = Xoshiro256PlusPlus::seed_from_u64(config.workload.seed ^ 0x6576_6963);
    let mut status_cache = StatusCache::default();
    let mut queue = VecDeque::new();
    let mut store = SeriesStore::new();
    let mut sanitize_drops = 0u64;
    let mut txs_enqueued = 0u64;
    let mut prune_carry_us = 0.0f64;
    let enabled_precompiles = Default::default();

    for step in steps {
        for &(child, parent) in &step.adds {
            graph.add_slot(child, parent)?;
        }
        let epoch = epoch_of(step.slot, config.cache.slots_per_epoch)?;
        while cache.env_version() < epoch {
            let next = cache.env_version() + 1;
            cache.on_epoch_boundary(next).expect("adjacent epoch");
        }
        for tx in step.txs {
            match sanitize(tx, step.slot, &enabled_precompiles, &config.limits) {
                Ok(sanitized) => {
                    queue.push_back(sanitized);
                    txs_enqueued += 1;
                }
                Err(_) => sanitize_drops += 1,
            }
        }
        let slot_stats = run_slot(
            step.slot,
            &mut queue,
            &mut cache,
            &graph,
            &mut status_cache,
            &config.limits,
            &config.latency,
            &config.exec,
            source,
            &mut eviction_rng,
            std::mem::take(&mut prune_carry_us),
            |result, stats| observer.on_batch(result, stats),
        )?;
        for stats in &slot_stats {
            store.record_batch(stats);
        }
        if let Some(new_root) = step.set_root {
            graph.set_root(new_root)?;
            let outcome = cache.prune(
                new_root,
                &graph,
                cache.env_version(),
                config.latency.prune_per_entry_us,
            );
            prune_carry_us += outcome.elapsed_us;
        }
    }
    Ok(RunOutput {
        store,
        cache_stats: cache.stats_snapshot(),
        sanitize_drops,
        txs_enqueued,
        leftover_queue: queue.len(),
    })
}

/// Writes batches.csv, summary.csv and histograms.csv for a finished run,
/// plus the effective config for later re-aggregation.
pub fn write_run_outputs(
    out_dir: &Path,
    output: &RunOutput,
    config: &SimConfig,
) -> Result<(), SimError> {
    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join("batches.csv"), batches_csv(&output.store))?;
    let summary = if output.store.batch_count() == 0 {
        String::from("metric,min,max,mean,sum,count\n")
    } else {
        summary_csv(&output.store.summaries()?)
    };
    fs::write(out_dir.join("summary.csv"), summary)?;
    fs::write(
        out_dir.join("histograms.csv"),
        histograms_csv(&output.store, &config.metrics)?,
    )?;
    fs::write(out_dir.join("config.conf"), config::to_text(config))?;
    Ok(())
}

/// Runs one simulation from a config file and writes its outputs.
pub fn run_simulation(
    config_path: &Path,
    out_dir: &Path,
    seed_override: Option<u64>,
) -> Result<RunOutput, SimError> {
    let mut config = config::load_config(config_path)?;
    if let Some(seed) = seed_override {
        config.workload.seed = seed;
    }
    let output = run(&config, &mut NoopObserver)?;
    write_run_outputs(out_dir, &output, &config)?;
    Ok(output)
}

/// Runs the same workload once per cache size (identical seed) and writes
/// per-size outputs plus the combined sweep.csv, sizes descending.
pub fn run_sweep(
    config_path: &Path,
    sizes: &[usize],
    out_dir: &Path,
    seed_override: Option<u64>,
) -> Result<SweepReport, SimError> {
    let mut config = config::load_config(config_path)?;
    if let Some(seed) = seed_override {
        config.workload.seed = seed;
    }
    let mut sizes: Vec<usize> = sizes.to_vec();
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    sizes.dedup();
    let mut report = SweepReport::default();
    for size in sizes {
        let mut sized = config.clone();
        sized.cache.capacity = size;
        let output = run(&sized, &mut NoopObserver)?;
        write_run_outputs(&out_dir.join(format!("size_{size}")), &output, &sized)?;
        report.entries.push(SweepEntry {
            cache_size: size,
            rows: if output.store.batch_count() == 0 {
                Vec::new()
            } else {
                output.store.summaries()?
            },
            batch_count: output.store.batch_count() as u64,
        });
    }
    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join("sweep.csv"), sweep_csv(&report))?;
    Ok(report)
}

/// Re-aggregates a run directory from its batches.csv: recomputes
/// summary.csv and histograms.csv and returns the summary text.
pub fn report(in_dir: &Path) -> Result<String, SimError> {
    let batches = fs::read_to_string(in_dir.join("batches.csv"))?;
    let store = parse_batches_csv(&batches)?;
    let config_path = in_dir.join("config.conf");
    let config = if config_path.exists() {
        config::load_config(&config_path)?
    } else {
        SimConfig::default()
    };
    let summary = if store.batch_count() == 0 {
        String::from("metric,min,max,mean,sum,count\n")
    } else {
        summary_csv(&store.summaries()?)
    };
    fs::write(in_dir.join("summary.csv"), &summary)?;
    fs::write(
        in_dir.join("histograms.csv"),
        histograms_csv(&store, &config.metrics)?,
    )?;
    Ok(summary)
}

/// Generates a trace file from a config.
pub fn gen_trace_file(
    config_path: &Path,
    out_path: &Path,
    seed_override: Option<u64>,
) -> Result<usize, SimError> {
    let mut config = config::load_config(config_path)?;
    if let Some(seed) = seed_override {
        config.workload.seed = seed;
    }
    let trace = crate::workload::generate_trace(&config.workload)
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
    crate::workload::write_trace(&trace, out_path)?;
    Ok(trace.records.len())
}

/// Loads a trace file and replays it under a config.
pub fn run_simulation_from_trace(
    config_path: &Path,
    trace_path: &Path,
    out_dir: &Path,
) -> Result<RunOutput, SimError> {
    let config = config::load_config(config_path)?;
    let trace = load_trace(trace_path)?;
    let output = run_trace(&config, &trace, &mut NoopObserver)?;
    write_run_outputs(out_dir, &output, &config)?;
    Ok(output)
}
