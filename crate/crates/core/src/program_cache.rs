//! Global fork-aware program cache.
//!
//! Keeps one version list per program id, ordered by deployment slot, and
//! resolves the correct version for a querying slot through the fork graph.
//! Tombstones record invalid programs so they are never re-loaded. Loaded
//! entries above the elastic capacity are unloaded by 2-random selection:
//! sample two candidates, unload the one used less often, repeat until the
//! cache is back at 90% of capacity. Re-rooting prunes versions stranded on
//! orphaned branches and collapses superseded history below the root.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use thiserror::Error;

use crate::ledger::{Epoch, ForkGraph, Slot, SlotRelationship};
use crate::rng::Xoshiro256PlusPlus;

/// Default target size of the cache in loaded entries.
pub const DEFAULT_CACHE_CAPACITY: usize = 512;
/// Eviction reduces the loaded count to this fraction of capacity.
pub const DEFAULT_EVICTION_FRACTION: f64 = 0.9;
/// Mainnet epoch length in slots.
pub const DEFAULT_SLOTS_PER_EPOCH: u64 = 432_000;

/// Opaque 32-byte program identifier (program public key role).
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ProgramId(pub [u8; 32]);

impl ProgramId {
    /// Id with the index packed into the leading bytes; used by synthetic
    /// workloads and tests.
    pub fn from_u64(n: u64) -> Self {
        let mut bytes = [0u8; 32];
        bytes[..8].copy_from_slice(&n.to_be_bytes());
        Self(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        let mut s = String::with_capacity(64);
        for b in &self.0 {
            s.push_str(&format!("{b:02x}"));
        }
        s
    }

    pub fn from_hex(s: &str) -> Option<Self> {
        if s.len() != 64 || !s.is_ascii() {
            return None;
        }
        let mut bytes = [0u8; 32];
        for (i, chunk) in s.as_bytes().chunks(2).enumerate() {
            let hi = (chunk[0] as char).to_digit(16)?;
            let lo = (chunk[1] as char).to_digit(16)?;
            bytes[i] = (hi * 16 + lo) as u8;
        }
        Some(Self(bytes))
    }
}

impl fmt::Debug for ProgramId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ProgramId({}..)", &self.to_hex()[..12])
    }
}

impl fmt::Display for ProgramId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", &self.to_hex()[..12])
    }
}

/// Identifies the execution lane holding a cooperative loading claim.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LoaderToken(pub u64);

/// State of a cache entry.
///
/// Only `Loaded` and `Builtin` are executable. `FailedVerification`,
/// `Closed` and `DelayVisibility` are tombstones: they resolve, mark the
/// program invalid, and prevent reload attempts. `Unloaded` keeps the usage
/// statistics of an evicted program; touching it again is a reload.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntryKind {
    Loaded { env_version: u64 },
    Builtin,
    Unloaded,
    FailedVerification,
    Closed,
    DelayVisibility,
}

impl EntryKind {
    pub fn is_executable(&self) -> bool {
        matches!(self, EntryKind::Loaded { .. } | EntryKind::Builtin)
    }

    pub fn is_tombstone(&self) -> bool {
        matches!(
            self,
            EntryKind::FailedVerification | EntryKind::Closed | EntryKind::DelayVisibility
        )
    }
}

/// One versioned, slot-scoped cached program.
#[derive(Debug)]
pub struct ProgramCacheEntry {
    pub program_id: ProgramId,
    pub kind: EntryKind,
    /// Public key of the loader that owns the program account.
    pub account_owner: ProgramId,
    pub account_size: u64,
    /// Slot in which the program was (re)deployed.
    pub deployment_slot: Slot,
    /// Slot in which this version becomes active; never before deployment.
    pub effective_slot: Slot,
    /// How often this entry was used by a transaction batch.
    pub tx_usage_counter: AtomicU64,
    /// How often this entry was used by an executed transaction.
    pub ix_usage_counter: AtomicU64,
    /// Latest slot in which the entry was accessed.
    pub latest_access_slot: AtomicU64,
}

impl ProgramCacheEntry {
    pub fn new_loaded(
        program_id: ProgramId,
        account_owner: ProgramId,
        account_size: u64,
        deployment_slot: Slot,
        effective_slot: Slot,
        env_version: u64,
    ) -> Result<Self, CacheError> {
        if effective_slot < deployment_slot {
            return Err(CacheError::InvariantViolation {
                program_id,
                deployment_slot,
                effective_slot,
            });
        }
        Ok(Self {
            program_id,
            kind: EntryKind::Loaded { env_version },
            account_owner,
            account_size,
            deployment_slot,
            effective_slot,
            tx_usage_counter: AtomicU64::new(0),
            ix_usage_counter: AtomicU64::new(0),
            latest_access_slot: AtomicU64::new(deployment_slot),
        })
    }

    /// Builtins ship with the validator; they live at deployment slot 0.
    pub fn new_builtin(program_id: ProgramId) -> Self {
        Self {
            program_id,
            kind: EntryKind::Builtin,
            account_owner: program_id,
            account_size: 0,
            deployment_slot: 0,
            effective_slot: 0,
            tx_usage_counter: AtomicU64::new(0),
            ix_usage_counter: AtomicU64::new(0),
            latest_access_slot: AtomicU64::new(0),
        }
    }

    pub fn new_tombstone(
        program_id: ProgramId,
        account_owner: ProgramId,
        slot: Slot,
        kind: EntryKind,
    ) -> Self {
        debug_assert!(kind.is_tombstone());
        Self {
            program_id,
            kind,
            account_owner,
            account_size: 0,
            deployment_slot: slot,
            effective_slot: slot,
            tx_usage_counter: AtomicU64::new(0),
            ix_usage_counter: AtomicU64::new(0),
            latest_access_slot: AtomicU64::new(slot),
        }
    }

    /// Unloaded twin of a loaded entry: statistics survive, the compiled
    /// program does not.
    fn to_unloaded(&self) -> Option<Self> {
        match self.kind {
            EntryKind::Loaded { .. } => Some(Self {
                program_id: self.program_id,
                kind: EntryKind::Unloaded,
                account_owner: self.account_owner,
                account_size: self.account_size,
                deployment_slot: self.deployment_slot,
                effective_slot: self.effective_slot,
                tx_usage_counter: AtomicU64::new(self.tx_usage_counter.load(Ordering::Relaxed)),
                ix_usage_counter: AtomicU64::new(self.ix_usage_counter.load(Ordering::Relaxed)),
                latest_access_slot: AtomicU64::new(self.latest_access_slot.load(Ordering::Relaxed)),
            }),
            _ => None,
        }
    }

    pub fn tx_usage(&self) -> u64 {
        self.tx_usage_counter.load(Ordering::Relaxed)
    }

    pub fn ix_usage(&self) -> u64 {
        self.ix_usage_counter.load(Ordering::Relaxed)
    }

    pub fn latest_access(&self) -> Slot {
        self.latest_access_slot.load(Ordering::Relaxed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CacheConfig {
    /// Target size in loaded entries.
    pub capacity: usize,
    /// Eviction shrinks the loaded count to this fraction of capacity.
    pub eviction_fraction: f64,
    pub slots_per_epoch: u64,
}

impl Default for CacheConfig {
    fn default() -> Self {
        Self {
            capacity: DEFAULT_CACHE_CAPACITY,
            eviction_fraction: DEFAULT_EVICTION_FRACTION,
            slots_per_epoch: DEFAULT_SLOTS_PER_EPOCH,
        }
    }
}

impl CacheConfig {
    pub fn validate(&self) -> Result<(), CacheError> {
        if self.capacity == 0
            || !(self.eviction_fraction > 0.0 && self.eviction_fraction <= 1.0)
            || self.slots_per_epoch == 0
        {
            return Err(CacheError::InvalidConfig);
        }
        Ok(())
    }

    pub fn eviction_target(&self) -> usize {
        (self.eviction_fraction * self.capacity as f64).floor() as usize
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CacheError {
    #[error("entry for {program_id} has effective slot {effective_slot} before deployment slot {deployment_slot}")]
    InvariantViolation {
        program_id: ProgramId,
        deployment_slot: Slot,
        effective_slot: Slot,
    },
    #[error("invalid cache configuration")]
    InvalidConfig,
    #[error("slot {0} is not in the fork graph")]
    UnknownSlot(Slot),
    #[error("loading claim for {program_id} is held by another lane")]
    NotClaimHolder { program_id: ProgramId },
    #[error("no loading claim for {program_id} at slot {slot}")]
    NoSuchClaim { program_id: ProgramId, slot: Slot },
    #[error("entry for {program_id} at slot {slot} is not loaded")]
    NotLoaded { program_id: ProgramId, slot: Slot },
    #[error("no entry for {program_id} at slot {slot}")]
    NoSuchEntry { program_id: ProgramId, slot: Slot },
    #[error("epoch {requested} does not follow current epoch {current}")]
    NonAdjacentEpoch { current: Epoch, requested: Epoch },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InsertOutcome {
    Inserted,
    Replaced,
    RejectedOlder,
}

/// Point-in-time copy of the cache counters.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StatsSnapshot {
    pub hits: u64,
    pub misses: u64,
    pub evictions: u64,
    pub insertions: u64,
    pub prunes: u64,
    pub prune_time_us: f64,
}

#[derive(Debug, Default)]
struct ProgramCacheStats {
    hits: AtomicU64,
    misses: AtomicU64,
    evictions: AtomicU64,
    insertions: AtomicU64,
    prunes: AtomicU64,
    prune_time_us: f64,
}

/// Programs resolved for one transaction batch.
///
/// `resolved` holds executable entries and tombstones; the caller decides
/// what a tombstone means for its transactions. `missing` programs were
/// claimed for loading by this lane; `awaited` programs are being loaded by
/// another lane and will resolve once that load finishes.
#[derive(Debug)]
pub struct BatchCache {
    pub slot: Slot,
    pub resolved: BTreeMap<ProgramId, Arc<ProgramCacheEntry>>,
    pub missing: BTreeSet<ProgramId>,
    pub awaited: BTreeSet<ProgramId>,
}

impl BatchCache {
    pub fn is_fully_resolved(&self) -> bool {
        self.missing.is_empty() && self.awaited.is_empty()
    }

    pub fn executable_count(&self) -> usize {
        self.resolved
            .values()
            .filter(|e| e.kind.is_executable())
            .count()
    }
}

/// One eviction event, with the sampled pair's usage counters.
#[derive(Debug, Clone)]
pub struct Eviction {
    pub program_id: ProgramId,
    pub deployment_slot: Slot,
    pub victim_usage: u64,
    pub rival_usage: u64,
}

/// What a prune removed and queued for recompilation.
#[derive(Debug, Clone)]
pub struct PruneOutcome {
    pub removed: Vec<(ProgramId, Slot)>,
    pub recompile_queue: Vec<(ProgramId, Slot)>,
    pub elapsed_us: f64,
}

/// The global cache. Entry lookup and cooperative loading are usable from
/// shared references (counters are atomic, claims sit behind a mutex);
/// insertion, eviction, pruning and epoch turnover are exclusive and happen
/// at batch boundaries.
#[derive(Debug)]
pub struct ProgramCache {
    /// program id -> versions ordered by deployment slot ascending.
    entries: HashMap<ProgramId, Vec<Arc<ProgramCacheEntry>>>,
    /// program id -> (slot, lane) currently loading it. Guarantees a single
    /// loader per program while letting other lanes wait for the result.
    loading_entries: Mutex<HashMap<ProgramId, (Slot, LoaderToken)>>,
    latest_root_slot: Slot,
    latest_root_epoch: Epoch,
    /// Generation of the current runtime environment; advances per epoch.
    env_version: u64,
    config: CacheConfig,
    stats: ProgramCacheStats,
    /// Bumped whenever a cooperative load finishes, releasing waiters.
    load_generation: AtomicU64,
}

impl ProgramCache {
    pub fn new(config: CacheConfig) -> Self {
        Self {
            entries: HashMap::new(),
            loading_entries: Mutex::new(HashMap::new()),
            latest_root_slot: 0,
            latest_root_epoch: 0,
            env_version: 0,
            config,
            stats: ProgramCacheStats::default(),
            load_generation: AtomicU64::new(0),
        }
    }

    pub fn config(&self) -> &CacheConfig {
        &self.config
    }

    pub fn latest_root_slot(&self) -> Slot {
        self.latest_root_slot
    }

    pub fn latest_root_epoch(&self) -> Epoch {
        self.latest_root_epoch
    }

    pub fn env_version(&self) -> u64 {
        self.env_version
    }

    pub fn load_generation(&self) -> u64 {
        self.load_generation.load(Ordering::Acquire)
    }

    /// Count of entries holding a compiled program; the number eviction
    /// compares against capacity. Builtins, tombstones and unloaded entries
    /// are exempt.
    pub fn loaded_count(&self) -> usize {
        self.entries
            .values()
            .flatten()
            .filter(|e| matches!(e.kind, EntryKind::Loaded { .. }))
            .count()
    }

    pub fn slot_versions(&self, id: &ProgramId) -> &[Arc<ProgramCacheEntry>] {
        self.entries.get(id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn insert_entry(
        &mut self,
        mut entry: ProgramCacheEntry,
    ) -> Result<InsertOutcome, CacheError> {
        if entry.effective_slot < entry.deployment_slot {
            return Err(CacheError::InvariantViolation {
                program_id: entry.program_id,
                deployment_slot: entry.deployment_slot,
                effective_slot: entry.effective_slot,
            });
        }
        if entry.kind == EntryKind::Builtin {
            entry.deployment_slot = 0;
            entry.effective_slot = 0;
        }
        let versions = self.entries.entry(entry.program_id).or_default();
        match versions.binary_search_by_key(&entry.deployment_slot, |e| e.deployment_slot) {
            Err(pos) => {
                versions.insert(pos, Arc::new(entry));
                self.stats.insertions.fetch_add(1, Ordering::Relaxed);
                Ok(InsertOutcome::Inserted)
            }
            Ok(pos) => {
                let existing = &versions[pos];
                let supersedes = match (existing.kind, entry.kind) {
                    // reload of an evicted program
                    (EntryKind::Unloaded, EntryKind::Loaded { .. }) => true,
                    // recompilation for a newer runtime environment
                    (
                        EntryKind::Loaded { env_version: old },
                        EntryKind::Loaded { env_version: new },
                    ) => new > old,
                    (EntryKind::Builtin, EntryKind::Builtin) => true,
                    _ => false,
                };
                if !supersedes {
                    return Ok(InsertOutcome::RejectedOlder);
                }
                // usage statistics carry across unload/reload
                entry.tx_usage_counter = AtomicU64::new(
                    entry.tx_usage_counter.load(Ordering::Relaxed) + existing.tx_usage(),
                );
                entry.ix_usage_counter = AtomicU64::new(
                    entry.ix_usage_counter.load(Ordering::Relaxed) + existing.ix_usage(),
                );
                entry.latest_access_slot = AtomicU64::new(
                    entry
                        .latest_access_slot
                        .load(Ordering::Relaxed)
                        .max(existing.latest_access()),
                );
                versions[pos] = Arc::new(entry);
                self.stats.insertions.fetch_add(1, Ordering::Relaxed);
                Ok(InsertOutcome::Replaced)
            }
        }
    }

    /// Resolves the requested programs for a batch executing at `slot`.
    ///
    /// For each key the newest version whose deployment slot is on the
    /// querying slot's fork and whose effective slot has been reached
    /// decides the outcome: executable versions hit, tombstones resolve
    /// without counting anything, unloaded or stale-environment versions
    /// miss and must be reloaded. Missing programs are claimed for loading
    /// under `token` unless another lane already holds the claim, in which
    /// case they are reported as awaited.
    ///
    /// `first_round` controls hit/miss accounting: only the first extract
    /// for a batch counts, re-extracts after cooperative loads do not.
    pub fn extract_for_batch(
        &self,
        keys: &BTreeSet<ProgramId>,
        slot: Slot,
        graph: &ForkGraph,
        token: LoaderToken,
        first_round: bool,
    ) -> Result<BatchCache, CacheError> {
        if !graph.contains(slot) {
            return Err(CacheError::UnknownSlot(slot));
        }
        let mut batch = BatchCache {
            slot,
            resolved: BTreeMap::new(),
            missing: BTreeSet::new(),
            awaited: BTreeSet::new(),
        };
        let mut hits = 0u64;
        let mut misses = 0u64;
        for &key in keys {
            let mut outcome = KeyOutcome::Miss;
            if let Some(versions) = self.entries.get(&key) {
                for entry in versions.iter().rev() {
                    // Everything at or below the root survives pruning only
                    // if it is on the rooted chain, so the graph walk can be
                    // skipped for those versions.
                    let on_fork = entry.deployment_slot <= self.latest_root_slot
                        || matches!(
                            graph.relationship(entry.deployment_slot, slot),
                            SlotRelationship::Equal | SlotRelationship::Ancestor
                        );
                    if !on_fork || entry.effective_slot > slot {
                        continue;
                    }
                    // newest eligible version decides the outcome
                    outcome = match entry.kind {
                        EntryKind::Builtin => KeyOutcome::Hit(entry),
                        EntryKind::Loaded { env_version } if env_version == self.env_version => {
                            KeyOutcome::Hit(entry)
                        }
                        // stale environment or unloaded: reload path
                        EntryKind::Loaded { .. } | EntryKind::Unloaded => KeyOutcome::Miss,
                        _ => KeyOutcome::Tombstone(entry),
                    };
                    break;
                }
            }
            match outcome {
                KeyOutcome::Hit(entry) => {
                    entry.tx_usage_counter.fetch_add(1, Ordering::Relaxed);
                    entry.latest_access_slot.fetch_max(slot, Ordering::Relaxed);
                    batch.resolved.insert(key, Arc::clone(entry));
                    hits += 1;
                }
                KeyOutcome::Tombstone(entry) => {
                    // tombstones resolve; no miss, no loading claim
                    batch.resolved.insert(key, Arc::clone(entry));
                }
                KeyOutcome::Miss => {
                    let mut loading = self.loading_entries.lock().unwrap();
                    match loading.get(&key) {
                        None => {
                            loading.insert(key, (slot, token));
                            batch.missing.insert(key);
                            misses += 1;
                        }
                        Some((_, holder)) if *holder == token => {
                            // this lane already claimed it; not a new miss
                            batch.missing.insert(key);
                        }
                        Some(_) => {
                            batch.awaited.insert(key);
                        }
                    }
                }
            }
        }
        if first_round {
            self.stats.hits.fetch_add(hits, Ordering::Relaxed);
            self.stats.misses.fetch_add(misses, Ordering::Relaxed);
        }
        Ok(batch)
    }

    /// Completes a cooperative load: releases the claim, inserts the result
    /// and wakes up lanes awaiting this program.
    pub fn finish_load(
        &mut self,
        id: ProgramId,
        slot: Slot,
        outcome: ProgramCacheEntry,
        token: LoaderToken,
    ) -> Result<InsertOutcome, CacheError> {
        if outcome.effective_slot < outcome.deployment_slot {
            return Err(CacheError::InvariantViolation {
                program_id: outcome.program_id,
                deployment_slot: outcome.deployment_slot,
                effective_slot: outcome.effective_slot,
            });
        }
        {
            let mut loading = self.loading_entries.lock().unwrap();
            match loading.get(&id) {
                None => {
                    return Err(CacheError::NoSuchClaim {
                        program_id: id,
                        slot,
                    })
                }
                Some((_, holder)) if *holder != token => {
                    return Err(CacheError::NotClaimHolder { program_id: id })
                }
                Some((claim_slot, _)) if *claim_slot != slot => {
                    return Err(CacheError::NoSuchClaim {
                        program_id: id,
                        slot,
                    })
                }
                Some(_) => {}
            }
            loading.remove(&id);
        }
        let result = self.insert_entry(outcome);
        self.load_generation.fetch_add(1, Ordering::Release);
        result
    }

    /// 2-random eviction pass. A no-op unless the loaded count exceeds
    /// capacity; otherwise unloads entries until the count equals
    /// floor(eviction_fraction * capacity).
    ///
    /// Candidates are indexed in (program id, deployment slot) order so the
    /// pass is a pure function of the generator stream. Each round draws two
    /// distinct loaded entries; the one with the lower transaction usage is
    /// unloaded, ties broken toward the older access slot, then the first
    /// draw.
    pub fn evict_two_random(&mut self, rng: &mut Xoshiro256PlusPlus) -> Vec<Eviction> {
        let mut evictions = Vec::new();
        if self.loaded_count() <= self.config.capacity {
            return evictions;
        }
        let target = self.config.eviction_target();
        let mut candidates: Vec<(ProgramId, Slot)> = self
            .entries
            .iter()
            .flat_map(|(id, versions)| {
                versions
                    .iter()
                    .filter(|e| matches!(e.kind, EntryKind::Loaded { .. }))
                    .map(|e| (*id, e.deployment_slot))
            })
            .collect();
        candidates.sort_unstable();
        while candidates.len() > target {
            let (victim_index, victim_usage, rival_usage) = {
                let usage_of = |i: usize| {
                    let (id, slot) = candidates[i];
                    let entry = self.find_version(&id, slot).expect("candidate exists");
                    (entry.tx_usage(), entry.latest_access())
                };
                if candidates.len() == 1 {
                    let (usage, _) = usage_of(0);
                    (0, usage, usage)
                } else {
                    let n = candidates.len() as u64;
                    let first = rng.gen_range(n) as usize;
                    let mut second = rng.gen_range(n - 1) as usize;
                    if second >= first {
                        second += 1;
                    }
                    let (first_usage, first_access) = usage_of(first);
                    let (second_usage, second_access) = usage_of(second);
                    if second_usage < first_usage
                        || (second_usage == first_usage && second_access < first_access)
                    {
                        (second, second_usage, first_usage)
                    } else {
                        (first, first_usage, second_usage)
                    }
                }
            };
            let (id, slot) = candidates[victim_index];
            self.unload_version(&id, slot);
            self.stats.evictions.fetch_add(1, Ordering::Relaxed);
            evictions.push(Eviction {
                program_id: id,
                deployment_slot: slot,
                victim_usage,
                rival_usage,
            });
            candidates.remove(victim_index);
        }
        evictions
    }

    fn find_version(&self, id: &ProgramId, slot: Slot) -> Option<&Arc<ProgramCacheEntry>> {
        self.entries
            .get(id)?
            .iter()
            .find(|e| e.deployment_slot == slot)
    }

    fn unload_version(&mut self, id: &ProgramId, slot: Slot) {
        if let Some(versions) = self.entries.get_mut(id) {
            if let Some(entry) = versions.iter_mut().find(|e| e.deployment_slot == slot) {
                if let Some(unloaded) = entry.to_unloaded() {
                    *entry = Arc::new(unloaded);
                }
            }
        }
    }

    /// Removes entries stranded by a re-root and collapses superseded
    /// history. Call after `graph.set_root(new_root)`.
    ///
    /// Versions on orphaned branches disappear; among versions at or below
    /// the new root only the latest survives per program; surviving loaded
    /// entries compiled under an older environment are unloaded and queued
    /// for recompilation. The reported time is `per_entry_us` times the
    /// number of surviving entries scanned.
    pub fn prune(
        &mut self,
        new_root: Slot,
        graph: &ForkGraph,
        now_epoch: Epoch,
        per_entry_us: f64,
    ) -> PruneOutcome {
        let mut removed = Vec::new();
        let mut recompile_queue = Vec::new();
        let env_version = self.env_version;
        let previous_root = self.latest_root_slot;
        for (id, versions) in self.entries.iter_mut() {
            versions.retain(|entry| {
                // Entries at or below the previous root survived the last
                // prune, so they are on the rooted chain and stay visible
                // under any descendant root without a graph walk.
                let keep = entry.deployment_slot <= previous_root
                    || matches!(
                        graph.relationship(entry.deployment_slot, new_root),
                        SlotRelationship::Equal
                            | SlotRelationship::Ancestor
                            | SlotRelationship::Descendant
                    );
                if !keep {
                    removed.push((*id, entry.deployment_slot));
                }
                keep
            });
            // collapse history: keep only the newest version at or below the
            // new root (versions are ordered by deployment slot)
            let below = versions
                .iter()
                .filter(|e| e.deployment_slot <= new_root)
                .count();
            if below > 1 {
                for entry in versions.drain(..below - 1) {
                    removed.push((*id, entry.deployment_slot));
                }
            }
            for entry in versions.iter_mut() {
                if let EntryKind::Loaded { env_version: env } = entry.kind {
                    if env < env_version {
                        recompile_queue.push((*id, entry.deployment_slot));
                        if let Some(unloaded) = entry.to_unloaded() {
                            *entry = Arc::new(unloaded);
                        }
                    }
                }
            }
        }
        self.entries.retain(|_, versions| !versions.is_empty());
        self.latest_root_slot = new_root;
        self.latest_root_epoch = now_epoch;
        let scanned: usize = self.entries.values().map(Vec::len).sum();
        let elapsed_us = per_entry_us * scanned as f64;
        self.stats.prunes.fetch_add(1, Ordering::Relaxed);
        self.stats.prune_time_us += elapsed_us;
        removed.sort_unstable();
        recompile_queue.sort_unstable();
        PruneOutcome {
            removed,
            recompile_queue,
            elapsed_us,
        }
    }

    /// Rolls the runtime environment over to the next epoch. Entries
    /// compiled for older environments stay resolvable as reload misses
    /// until pruned; builtins are unaffected.
    pub fn on_epoch_boundary(&mut self, next_epoch: Epoch) -> Result<(), CacheError> {
        if next_epoch != self.env_version + 1 {
            return Err(CacheError::NonAdjacentEpoch {
                current: self.env_version,
                requested: next_epoch,
            });
        }
        self.env_version = next_epoch;
        Ok(())
    }

    /// Unloads one loaded entry, keeping its statistics.
    pub fn unload_entry(&mut self, id: ProgramId, deployment_slot: Slot) -> Result<(), CacheError> {
        let versions = self.entries.get_mut(&id).ok_or(CacheError::NoSuchEntry {
            program_id: id,
            slot: deployment_slot,
        })?;
        let entry = versions
            .iter_mut()
            .find(|e| e.deployment_slot == deployment_slot)
            .ok_or(CacheError::NoSuchEntry {
                program_id: id,
                slot: deployment_slot,
            })?;
        match entry.to_unloaded() {
            Some(unloaded) => {
                *entry = Arc::new(unloaded);
                Ok(())
            }
            None => Err(CacheError::NotLoaded {
                program_id: id,
                slot: deployment_slot,
            }),
        }
    }

    pub fn stats_snapshot(&self) -> StatsSnapshot {
        StatsSnapshot {
            hits: self.stats.hits.load(Ordering::Relaxed),
            misses: self.stats.misses.load(Ordering::Relaxed),
            evictions: self.stats.evictions.load(Ordering::Relaxed),
            insertions: self.stats.insertions.load(Ordering::Relaxed),
            prunes: self.stats.prunes.load(Ordering::Relaxed),
            prune_time_us: self.stats.prune_time_us,
        }
    }
}

enum KeyOutcome<'a> {
    Hit(&'a Arc<ProgramCacheEntry>),
    Tombstone(&'a Arc<ProgramCacheEntry>),
    Miss,
}
