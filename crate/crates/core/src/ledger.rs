//! Slot timeline and fork graph.
//!
//! Slots form a tree rooted at the genesis slot: every non-root slot has
//! exactly one parent with a strictly smaller slot number, which rules out
//! cycles by construction. The root is movable; advancing it orphans the
//! branches that do not contain the new root, the trigger for program cache
//! pruning.

use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Chain height unit. One block is produced per slot.
pub type Slot = u64;
/// Fixed-length group of slots. Runtime environments roll over per epoch.
pub type Epoch = u64;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LedgerError {
    #[error("parent slot {0} is not in the fork graph")]
    UnknownParent(Slot),
    #[error("slot {0} is already in the fork graph")]
    DuplicateSlot(Slot),
    #[error("child slot {child} must be greater than parent slot {parent}")]
    NonMonotoneChild { child: Slot, parent: Slot },
    #[error("slot {new_root} is not a descendant of the current root {root}")]
    RootNotDescendant { new_root: Slot, root: Slot },
    #[error("slot {0} is not in the fork graph")]
    UnknownSlot(Slot),
    #[error("slots_per_epoch must be at least 1")]
    ZeroEpochLength,
}

/// How two slots relate along the fork tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotRelationship {
    /// The slots are the same.
    Equal,
    /// The first slot is on the parent chain of the second.
    Ancestor,
    /// The second slot is on the parent chain of the first.
    Descendant,
    /// Both slots are known but on diverged branches.
    Unrelated,
    /// At least one slot is not (or no longer) in the graph.
    Unknown,
}

/// Epoch of a slot: floor(slot / slots_per_epoch).
pub fn epoch_of(slot: Slot, slots_per_epoch: u64) -> Result<Epoch, LedgerError> {
    if slots_per_epoch == 0 {
        return Err(LedgerError::ZeroEpochLength);
    }
    Ok(slot / slots_per_epoch)
}

/// Slot parentage with a movable root.
///
/// Ancestors of the root stay in the graph after re-rooting so that history
/// queries keep working; only branches that diverge from the root's chain are
/// removed.
#[derive(Debug, Clone)]
pub struct ForkGraph {
    parent_of: BTreeMap<Slot, Slot>,
    known: BTreeSet<Slot>,
    root: Slot,
}

impl ForkGraph {
    pub fn new(root: Slot) -> Self {
        let mut known = BTreeSet::new();
        known.insert(root);
        Self {
            parent_of: BTreeMap::new(),
            known,
            root,
        }
    }

    pub fn root(&self) -> Slot {
        self.root
    }

    pub fn contains(&self, slot: Slot) -> bool {
        self.known.contains(&slot)
    }

    pub fn len(&self) -> usize {
        self.known.len()
    }

    pub fn is_empty(&self) -> bool {
        self.known.is_empty()
    }

    pub fn slots(&self) -> impl Iterator<Item = Slot> + '_ {
        self.known.iter().copied()
    }

    pub fn parent(&self, slot: Slot) -> Option<Slot> {
        self.parent_of.get(&slot).copied()
    }

    pub fn add_slot(&mut self, child: Slot, parent: Slot) -> Result<(), LedgerError> {
        if !self.known.contains(&parent) {
            return Err(LedgerError::UnknownParent(parent));
        }
        if self.known.contains(&child) {
            return Err(LedgerError::DuplicateSlot(child));
        }
        if child <= parent {
            return Err(LedgerError::NonMonotoneChild { child, parent });
        }
        self.parent_of.insert(child, parent);
        self.known.insert(child);
        Ok(())
    }

    /// True when `anc` lies on the parent chain of `desc`.
    ///
    /// Parents have strictly smaller slot numbers, so the walk can stop as
    /// soon as it drops below `anc`.
    fn on_parent_chain(&self, anc: Slot, desc: Slot) -> bool {
        let mut cur = desc;
        while cur > anc {
            match self.parent_of.get(&cur) {
                Some(&p) => cur = p,
                None => return false,
            }
        }
        cur == anc
    }

    pub fn relationship(&self, a: Slot, b: Slot) -> SlotRelationship {
        if !self.known.contains(&a) || !self.known.contains(&b) {
            return SlotRelationship::Unknown;
        }
        if a == b {
            return SlotRelationship::Equal;
        }
        if a < b && self.on_parent_chain(a, b) {
            return SlotRelationship::Ancestor;
        }
        if b < a && self.on_parent_chain(b, a) {
            return SlotRelationship::Descendant;
        }
        SlotRelationship::Unrelated
    }

    /// Advances the root and removes every slot that is neither an ancestor
    /// of the new root, nor the new root itself, nor one of its descendants.
    /// Returns the removed (orphaned) slots.
    pub fn set_root(&mut self, new_root: Slot) -> Result<BTreeSet<Slot>, LedgerError> {
        if !self.known.contains(&new_root) {
            return Err(LedgerError::UnknownSlot(new_root));
        }
        if !matches!(
            self.relationship(self.root, new_root),
            SlotRelationship::Equal | SlotRelationship::Ancestor
        ) {
            return Err(LedgerError::RootNotDescendant {
                new_root,
                root: self.root,
            });
        }

        // Full ancestor chain of the new root, walked once.
        let mut ancestors = BTreeSet::new();
        let mut cur = new_root;
        while let Some(&p) = self.parent_of.get(&cur) {
            ancestors.insert(p);
            cur = p;
        }

        let orphaned: BTreeSet<Slot> = self
            .known
            .iter()
            .copied()
            .filter(|&s| {
                if s == new_root || ancestors.contains(&s) {
                    return false;
                }
                !self.on_parent_chain(new_root, s)
            })
            .collect();

        for s in &orphaned {
            self.known.remove(s);
            self.parent_of.remove(s);
        }
        self.root = new_root;
        Ok(orphaned)
    }
}
