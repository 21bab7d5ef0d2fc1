//! Transaction validity checks and batch formation.
//!
//! Mirrors the banking-stage discipline: sanitization (blockhash age,
//! precompiles, cost and lock-count limits), status-cache deduplication,
//! all-or-nothing account read/write locking, block budget reservation, and
//! the retryable/fatal split that decides whether a failed transaction is
//! re-tried in a later batch or dropped.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};

use thiserror::Error;

use crate::ledger::Slot;
use crate::program_cache::ProgramId;

pub type TxSig = u64;
pub type AccountId = u64;
pub type PrecompileId = u32;

/// Mainnet-style block limit defaults. All configurable.
pub const DEFAULT_BLOCK_CU_LIMIT: u64 = 48_000_000;
pub const DEFAULT_PER_ACCOUNT_CU_LIMIT: u64 = 12_000_000;
pub const DEFAULT_VOTE_CU_LIMIT: u64 = 36_000_000;
pub const DEFAULT_ACCOUNT_DATA_LIMIT_BYTES: u64 = 100_000_000;
pub const DEFAULT_MAX_LOCKS_PER_TX: usize = 64;
pub const DEFAULT_TX_CU_LIMIT: u64 = 1_400_000;
pub const DEFAULT_MAX_BLOCKHASH_AGE: u64 = 150;

/// A transaction as it arrives from signature verification: declared account
/// access sets, invoked programs, and a compute-unit request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transaction {
    pub sig: TxSig,
    /// Slot whose blockhash the transaction references; bounds its lifetime.
    pub blockhash_ref: Slot,
    pub programs: Vec<ProgramId>,
    pub reads: BTreeSet<AccountId>,
    pub writes: BTreeSet<AccountId>,
    pub requested_cu: u64,
    pub is_vote: bool,
    pub precompiles: BTreeSet<PrecompileId>,
    /// Account data bytes the transaction touches, for the block data limit.
    pub data_bytes: u64,
}

impl Transaction {
    pub fn lock_count(&self) -> usize {
        self.reads.len() + self.writes.len()
    }
}

/// A transaction that passed `sanitize` and is safe to schedule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SanitizedTransaction {
    tx: Transaction,
    sanitized_at: Slot,
}

impl SanitizedTransaction {
    pub fn tx(&self) -> &Transaction {
        &self.tx
    }

    pub fn sig(&self) -> TxSig {
        self.tx.sig
    }

    pub fn sanitized_at(&self) -> Slot {
        self.sanitized_at
    }
}

/// Scheduling and validity failures. Retryable errors send the transaction
/// back to the queue for a later batch; fatal errors drop it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum TxError {
    #[error("account in use by another transaction")]
    AccountInUse,
    #[error("transaction would exceed the account data block limit")]
    WouldExceedAccountDataBlockLimit,
    #[error("transaction would exceed the block cost limit")]
    WouldExceedMaxBlockCostLimit,
    #[error("transaction would exceed a per-account cost limit")]
    WouldExceedMaxAccountCostLimit,
    #[error("transaction would exceed the vote cost limit")]
    WouldExceedMaxVoteCostLimit,
    #[error("transaction locks too many accounts")]
    TooManyAccountLocks,
    #[error("blockhash is expired")]
    BlockhashExpired,
    #[error("transaction was already processed")]
    AlreadyProcessed,
    #[error("transaction references a disabled precompile")]
    InvalidPrecompile,
    #[error("compute unit request exceeds the per-transaction limit")]
    CuRequestTooLarge,
    #[error("transaction invokes an invalid program")]
    InvalidProgram,
}

impl TxError {
    pub fn is_retryable(&self) -> bool {
        matches!(
            self,
            TxError::AccountInUse
                | TxError::WouldExceedAccountDataBlockLimit
                | TxError::WouldExceedMaxBlockCostLimit
                | TxError::WouldExceedMaxAccountCostLimit
                | TxError::WouldExceedMaxVoteCostLimit
        )
    }
}

/// Static per-block limits.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockLimits {
    pub block_cu_limit: u64,
    pub per_account_cu_limit: u64,
    pub vote_cu_limit: u64,
    pub account_data_limit_bytes: u64,
    pub max_locks_per_tx: usize,
    pub tx_cu_limit: u64,
    pub max_blockhash_age: u64,
}

impl Default for BlockLimits {
    fn default() -> Self {
        Self {
            block_cu_limit: DEFAULT_BLOCK_CU_LIMIT,
            per_account_cu_limit: DEFAULT_PER_ACCOUNT_CU_LIMIT,
            vote_cu_limit: DEFAULT_VOTE_CU_LIMIT,
            account_data_limit_bytes: DEFAULT_ACCOUNT_DATA_LIMIT_BYTES,
            max_locks_per_tx: DEFAULT_MAX_LOCKS_PER_TX,
            tx_cu_limit: DEFAULT_TX_CU_LIMIT,
            max_blockhash_age: DEFAULT_MAX_BLOCKHASH_AGE,
        }
    }
}

/// Validity checks applied before a transaction may be scheduled, in the
/// order the pipeline runs them: blockhash expiry, precompile availability,
/// compute request, lock count. The first failing check's error is returned.
pub fn sanitize(
    tx: Transaction,
    current_slot: Slot,
    enabled_precompiles: &BTreeSet<PrecompileId>,
    limits: &BlockLimits,
) -> Result<SanitizedTransaction, TxError> {
    if current_slot.saturating_sub(tx.blockhash_ref) > limits.max_blockhash_age {
        return Err(TxError::BlockhashExpired);
    }
    if !tx.precompiles.is_subset(enabled_precompiles) {
        return Err(TxError::InvalidPrecompile);
    }
    if tx.requested_cu > limits.tx_cu_limit {
        return Err(TxError::CuRequestTooLarge);
    }
    if tx.lock_count() > limits.max_locks_per_tx {
        return Err(TxError::TooManyAccountLocks);
    }
    Ok(SanitizedTransaction {
        tx,
        sanitized_at: current_slot,
    })
}

/// Executed-transaction record used to reject duplicates. Keyed by the
/// (signature, blockhash) pair: the same signature under a different
/// blockhash is a different transaction.
#[derive(Debug, Default, Clone)]
pub struct StatusCache {
    processed: HashSet<(TxSig, Slot)>,
}

impl StatusCache {
    pub fn check(&self, tx: &SanitizedTransaction) -> Result<(), TxError> {
        if self.processed.contains(&(tx.sig(), tx.tx().blockhash_ref)) {
            return Err(TxError::AlreadyProcessed);
        }
        Ok(())
    }

    pub fn insert(&mut self, sig: TxSig, blockhash_ref: Slot) {
        self.processed.insert((sig, blockhash_ref));
    }

    pub fn len(&self) -> usize {
        self.processed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.processed.is_empty()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LockError {
    #[error("transaction does not hold its locks")]
    NotHeld,
}

/// Account read/write locks for the batch being formed. Writers exclude
/// everything; readers only exclude writers.
#[derive(Debug, Default)]
pub struct AccountLockTable {
    read_locks: HashMap<AccountId, u32>,
    write_locks: HashSet<AccountId>,
    holders: HashSet<TxSig>,
}

impl AccountLockTable {
    /// Takes every lock the transaction declares, or none of them.
    pub fn try_lock(&mut self, tx: &SanitizedTransaction) -> Result<(), TxError> {
        let t = tx.tx();
        for w in &t.writes {
            if self.write_locks.contains(w) || self.read_locks.contains_key(w) {
                return Err(TxError::AccountInUse);
            }
        }
        for r in &t.reads {
            if self.write_locks.contains(r) {
                return Err(TxError::AccountInUse);
            }
        }
        for w in &t.writes {
            self.write_locks.insert(*w);
        }
        for r in &t.reads {
            *self.read_locks.entry(*r).or_insert(0) += 1;
        }
        self.holders.insert(t.sig);
        Ok(())
    }

    pub fn unlock(&mut self, tx: &SanitizedTransaction) -> Result<(), LockError> {
        if !self.holders.remove(&tx.sig()) {
            return Err(LockError::NotHeld);
        }
        let t = tx.tx();
        for w in &t.writes {
            self.write_locks.remove(w);
        }
        for r in &t.reads {
            if let Some(count) = self.read_locks.get_mut(r) {
                *count -= 1;
                if *count == 0 {
                    self.read_locks.remove(r);
                }
            }
        }
        Ok(())
    }

    pub fn is_clear(&self) -> bool {
        self.read_locks.is_empty() && self.write_locks.is_empty() && self.holders.is_empty()
    }

    pub fn read_count(&self, account: AccountId) -> u32 {
        self.read_locks.get(&account).copied().unwrap_or(0)
    }

    pub fn is_write_locked(&self, account: AccountId) -> bool {
        self.write_locks.contains(&account)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BudgetError {
    #[error("transaction {0} has no outstanding reservation")]
    NotReserved(TxSig),
}

#[derive(Debug, Clone)]
struct Reservation {
    cu: u64,
    data_bytes: u64,
    is_vote: bool,
    writes: Vec<AccountId>,
}

/// Per-block compute, vote, per-account and data budgets with consumed
/// counters. Reservations are all-or-nothing and refundable.
#[derive(Debug)]
pub struct BlockBudget {
    limits: BlockLimits,
    consumed_cu: u64,
    consumed_vote_cu: u64,
    consumed_data_bytes: u64,
    per_account_consumed: HashMap<AccountId, u64>,
    reservations: HashMap<TxSig, Reservation>,
}

impl BlockBudget {
    pub fn new(limits: BlockLimits) -> Self {
        Self {
            limits,
            consumed_cu: 0,
            consumed_vote_cu: 0,
            consumed_data_bytes: 0,
            per_account_consumed: HashMap::new(),
            reservations: HashMap::new(),
        }
    }

    pub fn limits(&self) -> &BlockLimits {
        &self.limits
    }

    pub fn consumed_cu(&self) -> u64 {
        self.consumed_cu
    }

    pub fn consumed_vote_cu(&self) -> u64 {
        self.consumed_vote_cu
    }

    pub fn consumed_data_bytes(&self) -> u64 {
        self.consumed_data_bytes
    }

    pub fn account_consumed(&self, account: AccountId) -> u64 {
        self.per_account_consumed
            .get(&account)
            .copied()
            .unwrap_or(0)
    }

    /// Reserves the transaction's requested costs against every limit it
    /// touches; nothing is consumed if any limit would be exceeded.
    pub fn reserve(&mut self, tx: &SanitizedTransaction) -> Result<(), TxError> {
        debug_assert!(
            !self.reservations.contains_key(&tx.sig()),
            "double reservation for {}",
            tx.sig()
        );
        let t = tx.tx();
        let cu = t.requested_cu;
        if self.consumed_cu + cu > self.limits.block_cu_limit {
            return Err(TxError::WouldExceedMaxBlockCostLimit);
        }
        for w in &t.writes {
            if self.account_consumed(*w) + cu > self.limits.per_account_cu_limit {
                return Err(TxError::WouldExceedMaxAccountCostLimit);
            }
        }
        if t.is_vote && self.consumed_vote_cu + cu > self.limits.vote_cu_limit {
            return Err(TxError::WouldExceedMaxVoteCostLimit);
        }
        if self.consumed_data_bytes + t.data_bytes > self.limits.account_data_limit_bytes {
            return Err(TxError::WouldExceedAccountDataBlockLimit);
        }
        self.consumed_cu += cu;
        if t.is_vote {
            self.consumed_vote_cu += cu;
        }
        self.consumed_data_bytes += t.data_bytes;
        for w in &t.writes {
            *self.per_account_consumed.entry(*w).or_insert(0) += cu;
        }
        self.reservations.insert(
            t.sig,
            Reservation {
                cu,
                data_bytes: t.data_bytes,
                is_vote: t.is_vote,
                writes: t.writes.iter().copied().collect(),
            },
        );
        Ok(())
    }

    /// Replaces a reservation with the actual cost once execution finishes.
    /// Refunds the difference; the charge never grows beyond what was
    /// reserved. An actual cost of zero (aborted or unexecuted) refunds the
    /// reservation entirely, data bytes included.
    pub fn adjust(&mut self, sig: TxSig, actual_cu: u64) -> Result<(), BudgetError> {
        let reservation = self
            .reservations
            .remove(&sig)
            .ok_or(BudgetError::NotReserved(sig))?;
        let actual = actual_cu.min(reservation.cu);
        let refund = reservation.cu - actual;
        self.consumed_cu -= refund;
        if reservation.is_vote {
            self.consumed_vote_cu -= refund;
        }
        for w in &reservation.writes {
            let consumed = self
                .per_account_consumed
                .get_mut(w)
                .expect("reserved account present");
            *consumed -= refund;
            if *consumed == 0 {
                self.per_account_consumed.remove(w);
            }
        }
        if actual == 0 {
            self.consumed_data_bytes -= reservation.data_bytes;
        }
        Ok(())
    }

    /// Fully refunds a reservation (deferred or aborted transaction).
    pub fn release(&mut self, sig: TxSig) -> Result<(), BudgetError> {
        self.adjust(sig, 0)
    }
}

/// A formed execution batch plus everything that could not join it.
/// Retryable deferrals have already been re-queued by `form_batch`; fatal
/// ones appear in `deferred` only and are gone from the queue.
#[derive(Debug)]
pub struct FormedBatch {
    pub batch: Vec<SanitizedTransaction>,
    pub deferred: Vec<(SanitizedTransaction, TxError)>,
}

/// Scans the queue in order, admitting transactions that pass the status
/// cache, take all their account locks, and fit the block budget, until the
/// batch is full or the queue is exhausted. Conflicting transactions are
/// skipped over, deferred with their error, and retryable ones re-enter the
/// queue tail for a later batch.
pub fn form_batch(
    queue: &mut VecDeque<SanitizedTransaction>,
    locks: &mut AccountLockTable,
    budget: &mut BlockBudget,
    status_cache: &StatusCache,
    max_batch_size: usize,
) -> FormedBatch {
    let mut batch = Vec::new();
    let mut deferred = Vec::new();
    let mut requeue = Vec::new();
    let scan_len = queue.len();
    for _ in 0..scan_len {
        if batch.len() >= max_batch_size {
            break;
        }
        let tx = queue.pop_front().expect("scan bounded by queue length");
        if let Err(err) = status_cache.check(&tx) {
            deferred.push((tx, err));
            continue;
        }
        if let Err(err) = locks.try_lock(&tx) {
            requeue.push(tx.clone());
            deferred.push((tx, err));
            continue;
        }
        if let Err(err) = budget.reserve(&tx) {
            locks.unlock(&tx).expect("lock just taken");
            if err.is_retryable() {
                requeue.push(tx.clone());
            }
            deferred.push((tx, err));
            continue;
        }
        batch.push(tx);
    }
    queue.extend(requeue);
    FormedBatch { batch, deferred }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tx(sig: TxSig) -> Transaction {
        Transaction {
            sig,
            blockhash_ref: 0,
            programs: vec![ProgramId::from_u64(1)],
            reads: BTreeSet::new(),
            writes: BTreeSet::new(),
            requested_cu: 0,
            is_vote: false,
            precompiles: BTreeSet::new(),
            data_bytes: 0,
        }
    }

    fn sanitized(t: Transaction) -> SanitizedTransaction {
        sanitize(t, 0, &BTreeSet::new(), &BlockLimits::default()).unwrap()
    }

    fn tx_rw(sig: TxSig, reads: &[AccountId], writes: &[AccountId]) -> SanitizedTransaction {
        let mut t = tx(sig);
        t.reads = reads.iter().copied().collect();
        t.writes = writes.iter().copied().collect();
        sanitized(t)
    }

    #[test]
    fn sanitize_rejects_expired_blockhash() {
        let mut t = tx(1);
        t.blockhash_ref = 100;
        let err = sanitize(t, 251, &BTreeSet::new(), &BlockLimits::default()).unwrap_err();
        // 251 - 100 = 151 > 150
        assert_eq!(err, TxError::BlockhashExpired);
    }

    #[test]
    fn sanitize_accepts_at_exact_age_limit() {
        let mut t = tx(1);
        t.blockhash_ref = 100;
        assert!(sanitize(t, 250, &BTreeSet::new(), &BlockLimits::default()).is_ok());
    }

    #[test]
    fn sanitize_rejects_disabled_precompile() {
        let mut t = tx(2);
        t.precompiles.insert(3);
        let enabled: BTreeSet<PrecompileId> = [1, 2].into_iter().collect();
        assert_eq!(
            sanitize(t, 0, &enabled, &BlockLimits::default()).unwrap_err(),
            TxError::InvalidPrecompile
        );
    }

    #[test]
    fn sanitize_rejects_oversized_cu_request() {
        let mut t = tx(3);
        t.requested_cu = DEFAULT_TX_CU_LIMIT + 1;
        assert_eq!(
            sanitize(t, 0, &BTreeSet::new(), &BlockLimits::default()).unwrap_err(),
            TxError::CuRequestTooLarge
        );
    }

    #[test]
    fn sanitize_rejects_too_many_locks() {
        let mut t = tx(4);
        t.reads = (0..40).collect();
        t.writes = (40..65).collect();
        assert_eq!(t.lock_count(), 65);
        assert_eq!(
            sanitize(t, 0, &BTreeSet::new(), &BlockLimits::default()).unwrap_err(),
            TxError::TooManyAccountLocks
        );
    }

    #[test]
    fn sanitize_passes_through_the_transaction() {
        let t = tx(5);
        let s = sanitize(t.clone(), 7, &BTreeSet::new(), &BlockLimits::default()).unwrap();
        assert_eq!(s.tx(), &t);
        assert_eq!(s.sanitized_at(), 7);
    }

    #[test]
    fn status_cache_keys_on_sig_and_blockhash() {
        let mut cache = StatusCache::default();
        let fresh = sanitized(tx(10));
        assert!(cache.check(&fresh).is_ok());

        cache.insert(10, 0);
        assert_eq!(cache.check(&fresh).unwrap_err(), TxError::AlreadyProcessed);

        // same signature, different blockhash_ref: a different key
        let mut other = tx(10);
        other.blockhash_ref = 1;
        let other = sanitize(other, 1, &BTreeSet::new(), &BlockLimits::default()).unwrap();
        assert!(cache.check(&other).is_ok());
    }

    #[test]
    fn write_write_conflict_is_account_in_use() {
        let mut locks = AccountLockTable::default();
        locks.try_lock(&tx_rw(1, &[], &[7])).unwrap();
        assert_eq!(
            locks.try_lock(&tx_rw(2, &[], &[7])).unwrap_err(),
            TxError::AccountInUse
        );
    }

    #[test]
    fn shared_reads_overlap() {
        let mut locks = AccountLockTable::default();
        locks.try_lock(&tx_rw(1, &[7], &[])).unwrap();
        locks.try_lock(&tx_rw(2, &[7], &[])).unwrap();
        assert_eq!(locks.read_count(7), 2);
    }

    #[test]
    fn write_excludes_read_and_vice_versa() {
        let mut locks = AccountLockTable::default();
        locks.try_lock(&tx_rw(1, &[], &[7])).unwrap();
        assert_eq!(
            locks.try_lock(&tx_rw(3, &[7], &[])).unwrap_err(),
            TxError::AccountInUse
        );
        locks.unlock(&tx_rw(1, &[], &[7])).unwrap();
        locks.try_lock(&tx_rw(3, &[7], &[])).unwrap();
        assert_eq!(
            locks.try_lock(&tx_rw(4, &[], &[7])).unwrap_err(),
            TxError::AccountInUse
        );
    }

    #[test]
    fn failed_lock_takes_nothing() {
        let mut locks = AccountLockTable::default();
        locks.try_lock(&tx_rw(1, &[], &[7])).unwrap();
        // would lock 6 and 7; 7 conflicts, so 6 must stay free
        assert!(locks.try_lock(&tx_rw(2, &[], &[6, 7])).is_err());
        assert!(!locks.is_write_locked(6));
        locks.try_lock(&tx_rw(3, &[], &[6])).unwrap();
    }

    #[test]
    fn unlock_restores_table_exactly() {
        let mut locks = AccountLockTable::default();
        let a = tx_rw(1, &[1, 2], &[3]);
        locks.try_lock(&a).unwrap();
        locks.unlock(&a).unwrap();
        assert!(locks.is_clear());
    }

    #[test]
    fn unlock_one_of_two_readers_keeps_count() {
        let mut locks = AccountLockTable::default();
        let a = tx_rw(1, &[9], &[]);
        let b = tx_rw(2, &[9], &[]);
        locks.try_lock(&a).unwrap();
        locks.try_lock(&b).unwrap();
        locks.unlock(&a).unwrap();
        assert_eq!(locks.read_count(9), 1);
    }

    #[test]
    fn double_unlock_is_not_held() {
        let mut locks = AccountLockTable::default();
        let a = tx_rw(1, &[1], &[]);
        locks.try_lock(&a).unwrap();
        locks.unlock(&a).unwrap();
        assert_eq!(locks.unlock(&a).unwrap_err(), LockError::NotHeld);
    }

    fn budget_with(block_cu_limit: u64) -> BlockBudget {
        BlockBudget::new(BlockLimits {
            block_cu_limit,
            ..BlockLimits::default()
        })
    }

    fn tx_cu(sig: TxSig, cu: u64) -> SanitizedTransaction {
        let mut t = tx(sig);
        t.requested_cu = cu;
        sanitized(t)
    }

    #[test]
    fn reserve_respects_block_limit() {
        let mut budget = budget_with(100);
        budget.reserve(&tx_cu(1, 60)).unwrap();
        assert_eq!(
            budget.reserve(&tx_cu(2, 60)).unwrap_err(),
            TxError::WouldExceedMaxBlockCostLimit
        );
        assert_eq!(budget.consumed_cu(), 60);
    }

    #[test]
    fn reserve_respects_vote_limit_only_for_votes() {
        let mut budget = BlockBudget::new(BlockLimits {
            block_cu_limit: 1_000,
            vote_cu_limit: 50,
            ..BlockLimits::default()
        });
        let mut vote = tx(1);
        vote.is_vote = true;
        vote.requested_cu = 60;
        assert_eq!(
            budget.reserve(&sanitized(vote)).unwrap_err(),
            TxError::WouldExceedMaxVoteCostLimit
        );
        // the same cost as a non-vote fits
        budget.reserve(&tx_cu(2, 60)).unwrap();
    }

    #[test]
    fn reserve_respects_per_account_limit() {
        let mut budget = BlockBudget::new(BlockLimits {
            per_account_cu_limit: 100,
            ..BlockLimits::default()
        });
        let mut a = tx(1);
        a.writes.insert(5);
        a.requested_cu = 80;
        budget.reserve(&sanitized(a)).unwrap();
        let mut b = tx(2);
        b.writes.insert(5);
        b.requested_cu = 30;
        assert_eq!(
            budget.reserve(&sanitized(b)).unwrap_err(),
            TxError::WouldExceedMaxAccountCostLimit
        );
    }

    #[test]
    fn reserve_respects_data_limit() {
        let mut budget = BlockBudget::new(BlockLimits {
            account_data_limit_bytes: 1_000,
            ..BlockLimits::default()
        });
        let mut a = tx(1);
        a.data_bytes = 800;
        budget.reserve(&sanitized(a)).unwrap();
        let mut b = tx(2);
        b.data_bytes = 300;
        assert_eq!(
            budget.reserve(&sanitized(b)).unwrap_err(),
            TxError::WouldExceedAccountDataBlockLimit
        );
    }

    #[test]
    fn zero_cost_reserve_changes_nothing() {
        let mut budget = budget_with(100);
        budget.reserve(&tx_cu(1, 0)).unwrap();
        assert_eq!(budget.consumed_cu(), 0);
        assert_eq!(budget.consumed_data_bytes(), 0);
    }

    #[test]
    fn adjust_refunds_difference() {
        let mut budget = budget_with(1_000);
        budget.reserve(&tx_cu(1, 60)).unwrap();
        budget.adjust(1, 40).unwrap();
        assert_eq!(budget.consumed_cu(), 40);
    }

    #[test]
    fn adjust_zero_is_full_refund() {
        let mut budget = budget_with(1_000);
        let mut t = tx(1);
        t.requested_cu = 60;
        t.data_bytes = 100;
        t.writes.insert(4);
        budget.reserve(&sanitized(t)).unwrap();
        budget.adjust(1, 0).unwrap();
        assert_eq!(budget.consumed_cu(), 0);
        assert_eq!(budget.consumed_data_bytes(), 0);
        assert_eq!(budget.account_consumed(4), 0);
    }

    #[test]
    fn adjust_identity_and_never_grows() {
        let mut budget = budget_with(1_000);
        budget.reserve(&tx_cu(1, 60)).unwrap();
        budget.adjust(1, 60).unwrap();
        assert_eq!(budget.consumed_cu(), 60);
        budget.reserve(&tx_cu(2, 10)).unwrap();
        // actual above the reservation is clamped
        budget.adjust(2, 500).unwrap();
        assert_eq!(budget.consumed_cu(), 70);
    }

    #[test]
    fn adjust_requires_reservation() {
        let mut budget = budget_with(100);
        assert_eq!(
            budget.adjust(42, 0).unwrap_err(),
            BudgetError::NotReserved(42)
        );
    }

    #[test]
    fn form_batch_applies_locking_rules() {
        // [T1 w{a}, T2 w{a}, T3 r{a}, T4 r{b}] -> batch {T1, T4}
        let mut queue: VecDeque<_> = [
            tx_rw(1, &[], &[100]),
            tx_rw(2, &[], &[100]),
            tx_rw(3, &[100], &[]),
            tx_rw(4, &[200], &[]),
        ]
        .into_iter()
        .collect();
        let mut locks = AccountLockTable::default();
        let mut budget = BlockBudget::new(BlockLimits::default());
        let status = StatusCache::default();
        let formed = form_batch(&mut queue, &mut locks, &mut budget, &status, 64);
        let sigs: Vec<TxSig> = formed.batch.iter().map(|t| t.sig()).collect();
        assert_eq!(sigs, vec![1, 4]);
        let deferred: Vec<(TxSig, TxError)> =
            formed.deferred.iter().map(|(t, e)| (t.sig(), *e)).collect();
        assert_eq!(
            deferred,
            vec![(2, TxError::AccountInUse), (3, TxError::AccountInUse)]
        );
        // retryable deferrals re-entered the queue
        let queued: Vec<TxSig> = queue.iter().map(|t| t.sig()).collect();
        assert_eq!(queued, vec![2, 3]);
    }

    #[test]
    fn form_batch_empty_queue() {
        let mut queue = VecDeque::new();
        let mut locks = AccountLockTable::default();
        let mut budget = BlockBudget::new(BlockLimits::default());
        let formed = form_batch(
            &mut queue,
            &mut locks,
            &mut budget,
            &StatusCache::default(),
            4,
        );
        assert!(formed.batch.is_empty());
        assert!(formed.deferred.is_empty());
    }

    #[test]
    fn form_batch_respects_max_batch_size() {
        let mut queue: VecDeque<_> = (0..10).map(|n| tx_rw(n, &[], &[n + 100])).collect();
        let mut locks = AccountLockTable::default();
        let mut budget = BlockBudget::new(BlockLimits::default());
        let formed = form_batch(
            &mut queue,
            &mut locks,
            &mut budget,
            &StatusCache::default(),
            4,
        );
        assert_eq!(formed.batch.len(), 4);
        assert!(formed.deferred.is_empty());
        assert_eq!(queue.len(), 6);
    }

    #[test]
    fn form_batch_drops_already_processed() {
        let mut queue: VecDeque<_> = [tx_rw(1, &[], &[1]), tx_rw(2, &[], &[2])]
            .into_iter()
            .collect();
        let mut status = StatusCache::default();
        status.insert(1, 0);
        let mut locks = AccountLockTable::default();
        let mut budget = BlockBudget::new(BlockLimits::default());
        let formed = form_batch(&mut queue, &mut locks, &mut budget, &status, 64);
        assert_eq!(formed.batch.len(), 1);
        assert_eq!(formed.batch[0].sig(), 2);
        assert_eq!(formed.deferred[0].1, TxError::AlreadyProcessed);
        // fatal: not re-queued
        assert!(queue.is_empty());
    }

    #[test]
    fn form_batch_unlocks_on_budget_failure() {
        let mut queue: VecDeque<_> = [tx_cu(1, 90), {
            let mut t = tx(2);
            t.requested_cu = 90;
            t.writes.insert(7);
            sanitized(t)
        }]
        .into_iter()
        .collect();
        let mut locks = AccountLockTable::default();
        let mut budget = budget_with(100);
        let formed = form_batch(
            &mut queue,
            &mut locks,
            &mut budget,
            &StatusCache::default(),
            64,
        );
        assert_eq!(formed.batch.len(), 1);
        assert_eq!(formed.deferred[0].1, TxError::WouldExceedMaxBlockCostLimit);
        // the failed transaction's locks were rolled back
        assert!(!locks.is_write_locked(7));
        assert_eq!(queue.len(), 1);
    }
}

#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    fn overlap(a: &BTreeSet<AccountId>, b: &BTreeSet<AccountId>) -> bool {
        !a.is_disjoint(b)
    }

    proptest! {
        /// Every batch formed from an arbitrary queue is conflict-free:
        /// no write-write and no write-read account overlap between members.
        #[test]
        fn formed_batches_are_conflict_free(
            specs in proptest::collection::vec(
                (
                    proptest::collection::btree_set(0u64..12, 0..4),
                    proptest::collection::btree_set(0u64..12, 0..4),
                    0u64..2_000,
                ),
                1..40,
            )
        ) {
            let mut queue: VecDeque<SanitizedTransaction> = specs
                .into_iter()
                .enumerate()
                .map(|(index, (reads, writes, cu))| {
                    let reads: BTreeSet<AccountId> =
                        reads.difference(&writes).copied().collect();
                    let tx = Transaction {
                        sig: index as TxSig,
                        blockhash_ref: 0,
                        programs: vec![ProgramId::from_u64(index as u64 % 5)],
                        reads,
                        writes,
                        requested_cu: cu,
                        is_vote: false,
                        precompiles: BTreeSet::new(),
                        data_bytes: 0,
                    };
                    sanitize(tx, 0, &BTreeSet::new(), &BlockLimits::default()).unwrap()
                })
                .collect();
            let mut locks = AccountLockTable::default();
            let mut budget = BlockBudget::new(BlockLimits {
                block_cu_limit: 10_000,
                ..BlockLimits::default()
            });
            let status = StatusCache::default();
            let mut rounds = 0;
            while !queue.is_empty() {
                let formed = form_batch(&mut queue, &mut locks, &mut budget, &status, 8);
                for (i, a) in formed.batch.iter().enumerate() {
                    for b in formed.batch.iter().skip(i + 1) {
                        prop_assert!(!overlap(&a.tx().writes, &b.tx().writes));
                        prop_assert!(!overlap(&a.tx().writes, &b.tx().reads));
                        prop_assert!(!overlap(&a.tx().reads, &b.tx().writes));
                    }
                }
                // commit: release locks and settle reservations
                for tx in &formed.batch {
                    budget.adjust(tx.sig(), tx.tx().requested_cu).unwrap();
                    locks.unlock(tx).unwrap();
                }
                if formed.batch.is_empty() {
                    break;
                }
                rounds += 1;
                prop_assert!(rounds < 1_000, "scheduler failed to make progress");
            }
            prop_assert!(locks.is_clear());
        }
    }
}
