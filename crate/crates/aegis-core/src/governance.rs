//! Block-clocked commit-reveal voting over the active pattern set.
//!
//! Voters propose adding or removing a pattern, then vote in two phases:
//! a commit window in which only a hash of the vote is submitted alongside a
//! deposit, and a reveal window in which votes are opened. A proposal is
//! decided the moment either side reaches a strict majority of the voter set
//! snapshotted at proposal time; proposals that never reach a majority expire
//! when the reveal window closes. Deposits are returned on reveal and
//! forfeited to a treasury otherwise, which makes vote withholding costly.
//!
//! Every pattern-set change is recorded as an event, and the active set can
//! be reconstructed from the event log alone.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pattern::{parse_pattern, pattern_id, validate_pattern, NamedPattern, PatternId};
use crate::word::{keccak256, Address, Hash32};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum GovError {
    #[error("a proposal with this vote id is already in flight or its subject is already active")]
    DuplicateProposal,
    #[error("pattern is not in the active set")]
    PatternNotActive,
    #[error("caller is not an eligible voter for this proposal")]
    NotEligible,
    #[error("deposit does not match the required amount")]
    WrongDeposit,
    #[error("commit window is not open")]
    CommitClosed,
    #[error("voter has already committed")]
    AlreadyCommitted,
    #[error("no commitment to reveal")]
    NoCommitment,
    #[error("reveal window is not open")]
    RevealClosed,
    #[error("revealed vote does not match the commitment")]
    HashMismatch,
    #[error("caller is not the owner")]
    NotOwner,
    #[error("proposed pattern is invalid: {0}")]
    InvalidPattern(String),
}

/// Pattern-set change log entry. The active set is a pure function of the
/// event sequence.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    PatternAdded { id: PatternId, name: String, text: String },
    PatternRemoved { id: PatternId },
    ProposalExpired { vote_id: PatternId },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Action {
    Add { name: String, text: String },
    Remove,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Open,
    Accepted,
    Rejected,
    Expired,
}

#[derive(Clone, Debug)]
pub struct Proposal {
    pub vote_id: PatternId,
    pub action: Action,
    pub proposer: Address,
    /// First block of the commit window.
    pub start: u64,
    /// First block after the commit window (start of the reveal window).
    pub commit_end: u64,
    /// First block after the reveal window.
    pub reveal_end: u64,
    /// Deposit amount snapshotted at proposal time.
    pub deposit: u64,
    /// Voter set snapshotted at proposal time.
    pub voters: BTreeSet<Address>,
    pub outcome: Outcome,
    /// Whether the proposer's deposit is still held.
    proposer_escrow: bool,
    commitments: BTreeMap<Address, Hash32>,
    reveals: BTreeMap<Address, bool>,
}

impl Proposal {
    /// Strict majority of the snapshotted voter set.
    pub fn threshold(&self) -> usize {
        self.voters.len() / 2 + 1
    }

    fn tally(&self, vote: bool) -> usize {
        self.reveals.values().filter(|v| **v == vote).count()
    }

    /// Deposits currently held for this proposal.
    fn escrowed(&self) -> u64 {
        let held = self.commitments.len() as u64 + u64::from(self.proposer_escrow);
        held * self.deposit
    }
}

pub struct Governance {
    owner: Address,
    voters: BTreeSet<Address>,
    commit_window: u64,
    reveal_window: u64,
    deposit: u64,
    block: u64,
    active: BTreeMap<PatternId, NamedPattern>,
    proposals: BTreeMap<PatternId, Proposal>,
    events: Vec<Event>,
    treasury: u64,
    total_deposited: u64,
    total_refunded: u64,
}

impl Governance {
    pub fn new(
        owner: Address,
        voters: impl IntoIterator<Item = Address>,
        commit_window: u64,
        reveal_window: u64,
        deposit: u64,
    ) -> Governance {
        Governance {
            owner,
            voters: voters.into_iter().collect(),
            commit_window,
            reveal_window,
            deposit,
            block: 0,
            active: BTreeMap::new(),
            proposals: BTreeMap::new(),
            events: Vec::new(),
            treasury: 0,
            total_deposited: 0,
            total_refunded: 0,
        }
    }

    pub fn block(&self) -> u64 {
        self.block
    }

    pub fn treasury(&self) -> u64 {
        self.treasury
    }

    /// Deposit required for a proposal opened at the current block.
    pub fn deposit(&self) -> u64 {
        self.deposit
    }

    pub fn total_deposited(&self) -> u64 {
        self.total_deposited
    }

    pub fn total_refunded(&self) -> u64 {
        self.total_refunded
    }

    /// Deposits currently held by open proposals.
    pub fn escrowed(&self) -> u64 {
        self.proposals.values().map(Proposal::escrowed).sum()
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn proposal(&self, vote_id: PatternId) -> Option<&Proposal> {
        self.proposals.get(&vote_id)
    }

    /// Patterns currently active, in stable id order.
    pub fn active_patterns(&self) -> Vec<NamedPattern> {
        self.active.values().cloned().collect()
    }

    // -- admin -------------------------------------------------------------

    pub fn set_voters(
        &mut self,
        caller: Address,
        voters: impl IntoIterator<Item = Address>,
    ) -> Result<(), GovError> {
        self.require_owner(caller)?;
        self.voters = voters.into_iter().collect();
        Ok(())
    }

    pub fn set_windows(
        &mut self,
        caller: Address,
        commit_window: u64,
        reveal_window: u64,
    ) -> Result<(), GovError> {
        self.require_owner(caller)?;
        self.commit_window = commit_window;
        self.reveal_window = reveal_window;
        Ok(())
    }

    pub fn set_deposit(&mut self, caller: Address, amount: u64) -> Result<(), GovError> {
        self.require_owner(caller)?;
        self.deposit = amount;
        Ok(())
    }

    fn require_owner(&self, caller: Address) -> Result<(), GovError> {
        if caller == self.owner {
            Ok(())
        } else {
            Err(GovError::NotOwner)
        }
    }

    // -- proposals ----------------------------------------------------------

    /// Proposes adding a pattern. The vote id is the proposed pattern's id.
    pub fn propose_add(
        &mut self,
        caller: Address,
        name: &str,
        text: &str,
        deposit_paid: u64,
    ) -> Result<PatternId, GovError> {
        let ast = parse_pattern(text).map_err(|e| GovError::InvalidPattern(e.to_string()))?;
        let report = validate_pattern(&ast);
        if let Some(f) = report.findings.first() {
            return Err(GovError::InvalidPattern(f.message.clone()));
        }
        let vote_id = pattern_id(&ast);
        if self.active.contains_key(&vote_id) {
            return Err(GovError::DuplicateProposal);
        }
        let action = Action::Add { name: name.to_string(), text: text.to_string() };
        self.open_proposal(caller, vote_id, action, deposit_paid)?;
        Ok(vote_id)
    }

    /// Proposes removing an active pattern. The vote id is that pattern's id.
    pub fn propose_remove(
        &mut self,
        caller: Address,
        target: PatternId,
        deposit_paid: u64,
    ) -> Result<PatternId, GovError> {
        if !self.active.contains_key(&target) {
            return Err(GovError::PatternNotActive);
        }
        self.open_proposal(caller, target, Action::Remove, deposit_paid)?;
        Ok(target)
    }

    fn open_proposal(
        &mut self,
        caller: Address,
        vote_id: PatternId,
        action: Action,
        deposit_paid: u64,
    ) -> Result<(), GovError> {
        if !self.voters.contains(&caller) {
            return Err(GovError::NotEligible);
        }
        if let Some(existing) = self.proposals.get(&vote_id) {
            if existing.outcome == Outcome::Open {
                return Err(GovError::DuplicateProposal);
            }
        }
        if deposit_paid != self.deposit {
            return Err(GovError::WrongDeposit);
        }
        self.total_deposited += deposit_paid;
        // Windows, deposit and voter set are all frozen here; later admin
        // changes only affect future proposals.
        let proposal = Proposal {
            vote_id,
            action,
            proposer: caller,
            start: self.block,
            commit_end: self.block + self.commit_window,
            reveal_end: self.block + self.commit_window + self.reveal_window,
            deposit: self.deposit,
            voters: self.voters.clone(),
            outcome: Outcome::Open,
            proposer_escrow: true,
            commitments: BTreeMap::new(),
            reveals: BTreeMap::new(),
        };
        self.proposals.insert(vote_id, proposal);
        Ok(())
    }

    // -- voting --------------------------------------------------------------

    /// The hash a voter submits during the commit window.
    pub fn commitment_hash(vote_id: PatternId, vote: bool, nonce: &[u8; 32]) -> Hash32 {
        let mut buf = Vec::with_capacity(65);
        buf.extend_from_slice(&(vote_id.0).0);
        buf.push(u8::from(vote));
        buf.extend_from_slice(nonce);
        keccak256(&buf)
    }

    pub fn commit(
        &mut self,
        caller: Address,
        vote_id: PatternId,
        commitment: Hash32,
        deposit_paid: u64,
    ) -> Result<(), GovError> {
        let block = self.block;
        let proposal = match self.proposals.get_mut(&vote_id) {
            Some(p) if p.outcome == Outcome::Open => p,
            _ => return Err(GovError::CommitClosed),
        };
        if block < proposal.start || block >= proposal.commit_end {
            return Err(GovError::CommitClosed);
        }
        if !proposal.voters.contains(&caller) {
            return Err(GovError::NotEligible);
        }
        if proposal.commitments.contains_key(&caller) {
            return Err(GovError::AlreadyCommitted);
        }
        if deposit_paid != proposal.deposit {
            return Err(GovError::WrongDeposit);
        }
        proposal.commitments.insert(caller, commitment);
        self.total_deposited += deposit_paid;
        Ok(())
    }

    /// Opens a committed vote. Returns the refunded deposit. Reveals are
    /// accepted for the whole reveal window, even once the proposal has been
    /// decided, so late voters can still recover their deposit.
    pub fn reveal(
        &mut self,
        caller: Address,
        vote_id: PatternId,
        vote: bool,
        nonce: &[u8; 32],
    ) -> Result<u64, GovError> {
        let block = self.block;
        let proposal = match self.proposals.get_mut(&vote_id) {
            Some(p) => p,
            None => return Err(GovError::RevealClosed),
        };
        if block < proposal.commit_end || block >= proposal.reveal_end {
            return Err(GovError::RevealClosed);
        }
        if !proposal.voters.contains(&caller) {
            return Err(GovError::NotEligible);
        }
        let committed = match proposal.commitments.get(&caller) {
            Some(h) => *h,
            None => return Err(GovError::NoCommitment),
        };
        if Self::commitment_hash(vote_id, vote, nonce) != committed {
            return Err(GovError::HashMismatch);
        }
        proposal.commitments.remove(&caller);
        proposal.reveals.insert(caller, vote);
        let refund = proposal.deposit;
        self.total_refunded += refund;

        if proposal.outcome == Outcome::Open && proposal.tally(vote) >= proposal.threshold() {
            let accepted = vote;
            proposal.outcome = if accepted { Outcome::Accepted } else { Outcome::Rejected };
            // Return the proposer's deposit now that the vote is decided.
            proposal.proposer_escrow = false;
            let proposer_refund = proposal.deposit;
            let action = proposal.action.clone();
            self.total_refunded += proposer_refund;
            if accepted {
                self.apply(vote_id, action);
            }
        }
        Ok(refund)
    }

    fn apply(&mut self, vote_id: PatternId, action: Action) {
        match action {
            Action::Add { name, text } => {
                let ast = parse_pattern(&text).expect("proposal text validated at proposal time");
                let named = NamedPattern {
                    name: name.clone(),
                    id: vote_id,
                    text: text.clone(),
                    ast,
                };
                self.active.insert(vote_id, named);
                self.events.push(Event::PatternAdded { id: vote_id, name, text });
            }
            Action::Remove => {
                // The target may have been removed by a racing proposal; the
                // event is only logged when something actually changes.
                if self.active.remove(&vote_id).is_some() {
                    self.events.push(Event::PatternRemoved { id: vote_id });
                }
            }
        }
    }

    // -- clock ----------------------------------------------------------------

    /// Advances the block clock, finalizing proposals whose reveal window has
    /// closed: open proposals expire, and all still-held deposits are
    /// forfeited to the treasury.
    pub fn advance_blocks(&mut self, n: u64) {
        for _ in 0..n {
            self.block += 1;
            let due: Vec<PatternId> = self
                .proposals
                .values()
                .filter(|p| p.reveal_end <= self.block && p.escrowed() > 0)
                .map(|p| p.vote_id)
                .collect();
            for vote_id in due {
                let p = self.proposals.get_mut(&vote_id).expect("listed above");
                if p.outcome == Outcome::Open {
                    p.outcome = Outcome::Expired;
                    self.events.push(Event::ProposalExpired { vote_id });
                }
                let forfeited = p.escrowed();
                p.commitments.clear();
                p.proposer_escrow = false;
                self.treasury += forfeited;
            }
        }
    }
}

/// Rebuilds the active pattern set from an event log.
pub fn replay_events(events: &[Event]) -> Result<Vec<NamedPattern>, GovError> {
    let mut active: BTreeMap<PatternId, NamedPattern> = BTreeMap::new();
    for event in events {
        match event {
            Event::PatternAdded { id, name, text } => {
                let ast =
                    parse_pattern(text).map_err(|e| GovError::InvalidPattern(e.to_string()))?;
                active.insert(
                    *id,
                    NamedPattern { name: name.clone(), id: *id, text: text.clone(), ast },
                );
            }
            Event::PatternRemoved { id } => {
                active.remove(id);
            }
            Event::ProposalExpired { .. } => {}
        }
    }
    Ok(active.into_values().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::BUILTIN_PATTERN_SOURCES;

    const OWNER: Address = Address([0x01; 20]);

    fn voter(i: u8) -> Address {
        Address([0x10 + i; 20])
    }

    fn gov(n_voters: u8) -> Governance {
        Governance::new(OWNER, (0..n_voters).map(voter), 10, 10, 100)
    }

    fn pattern_text(i: usize) -> &'static str {
        BUILTIN_PATTERN_SOURCES[i].1
    }

    fn run_add(g: &mut Governance, text: &str, votes: &[(Address, bool)]) -> PatternId {
        let id = g.propose_add(voter(0), "p", text, 100).unwrap();
        let nonce = [7u8; 32];
        for (who, vote) in votes {
            let h = Governance::commitment_hash(id, *vote, &nonce);
            g.commit(*who, id, h, 100).unwrap();
        }
        g.advance_blocks(10);
        for (who, vote) in votes {
            g.reveal(*who, id, *vote, &nonce).unwrap();
        }
        id
    }

    #[test]
    fn add_then_remove_lifecycle() {
        let mut g = gov(3);
        let votes: Vec<_> = (0..3).map(|i| (voter(i), true)).collect();
        let id = run_add(&mut g, pattern_text(0), &votes);
        assert_eq!(g.proposal(id).unwrap().outcome, Outcome::Accepted);
        assert_eq!(g.active_patterns().len(), 1);

        g.advance_blocks(10);
        g.propose_remove(voter(1), id, 100).unwrap();
        let nonce = [9u8; 32];
        for i in 0..2 {
            let h = Governance::commitment_hash(id, true, &nonce);
            g.commit(voter(i), id, h, 100).unwrap();
        }
        g.advance_blocks(10);
        for i in 0..2 {
            g.reveal(voter(i), id, true, &nonce).unwrap();
        }
        assert!(g.active_patterns().is_empty());
        assert_eq!(g.events().len(), 2);
        assert_eq!(replay_events(g.events()).unwrap(), g.active_patterns());
    }

    #[test]
    fn rejected_votes_do_not_change_the_set() {
        let mut g = gov(3);
        let votes: Vec<_> = (0..3).map(|i| (voter(i), false)).collect();
        let id = run_add(&mut g, pattern_text(1), &votes);
        assert_eq!(g.proposal(id).unwrap().outcome, Outcome::Rejected);
        assert!(g.active_patterns().is_empty());
        assert!(g.events().is_empty());
    }

    #[test]
    fn unrevealed_deposits_are_forfeited_on_expiry() {
        let mut g = gov(4);
        let id = g.propose_add(voter(0), "p", pattern_text(2), 100).unwrap();
        let h = Governance::commitment_hash(id, true, &[1; 32]);
        g.commit(voter(1), id, h, 100).unwrap();
        g.advance_blocks(20);
        assert_eq!(g.proposal(id).unwrap().outcome, Outcome::Expired);
        // Proposer and the silent committer both lose their deposits.
        assert_eq!(g.treasury(), 200);
        assert!(g.active_patterns().is_empty());
        assert_eq!(g.events(), &[Event::ProposalExpired { vote_id: id }]);
    }

    #[test]
    fn window_boundaries_are_half_open() {
        let mut g = gov(1);
        let id = g.propose_add(voter(0), "p", pattern_text(3), 100).unwrap();
        let h = Governance::commitment_hash(id, true, &[2; 32]);
        // Reveal is closed during the commit window.
        assert_eq!(g.reveal(voter(0), id, true, &[2; 32]), Err(GovError::RevealClosed));
        g.advance_blocks(10);
        // Block 10 is the first reveal block and the first closed commit block.
        assert_eq!(g.commit(voter(0), id, h, 100), Err(GovError::CommitClosed));
        assert_eq!(g.reveal(voter(0), id, true, &[2; 32]), Err(GovError::NoCommitment));
    }

    #[test]
    fn wrong_reveal_is_rejected_and_deposit_stays_escrowed() {
        let mut g = gov(1);
        let id = g.propose_add(voter(0), "p", pattern_text(4), 100).unwrap();
        let h = Governance::commitment_hash(id, true, &[3; 32]);
        g.commit(voter(0), id, h, 100).unwrap();
        g.advance_blocks(10);
        assert_eq!(g.reveal(voter(0), id, false, &[3; 32]), Err(GovError::HashMismatch));
        assert_eq!(g.reveal(voter(0), id, true, &[4; 32]), Err(GovError::HashMismatch));
        assert_eq!(g.escrowed(), 200);
        g.reveal(voter(0), id, true, &[3; 32]).unwrap();
        assert_eq!(g.escrowed(), 0);
        assert_eq!(g.active_patterns().len(), 1);
    }

    #[test]
    fn admin_operations_are_owner_only_and_do_not_touch_open_proposals() {
        let mut g = gov(2);
        assert_eq!(g.set_deposit(voter(0), 5), Err(GovError::NotOwner));
        let id = g.propose_add(voter(0), "p", pattern_text(5), 100).unwrap();
        g.set_deposit(OWNER, 5).unwrap();
        g.set_windows(OWNER, 1, 1).unwrap();
        // The in-flight proposal still uses its snapshotted deposit/windows.
        let h = Governance::commitment_hash(id, true, &[5; 32]);
        assert_eq!(g.commit(voter(1), id, h, 5), Err(GovError::WrongDeposit));
        g.commit(voter(1), id, h, 100).unwrap();
        assert_eq!(g.proposal(id).unwrap().commit_end, 10);
    }

    #[test]
    fn duplicate_and_missing_targets_are_rejected() {
        let mut g = gov(3);
        let votes: Vec<_> = (0..3).map(|i| (voter(i), true)).collect();
        let id = run_add(&mut g, pattern_text(6), &votes);
        assert_eq!(
            g.propose_add(voter(0), "again", pattern_text(6), 100),
            Err(GovError::DuplicateProposal)
        );
        assert_eq!(
            g.propose_remove(voter(0), PatternId(Hash32([0; 32])), 100),
            Err(GovError::PatternNotActive)
        );
        // A second proposal while one is in flight shares the vote id.
        g.advance_blocks(10);
        g.propose_remove(voter(0), id, 100).unwrap();
        assert_eq!(g.propose_remove(voter(1), id, 100), Err(GovError::DuplicateProposal));
    }

    #[test]
    fn garbage_pattern_text_is_rejected_up_front() {
        let mut g = gov(1);
        let err = g.propose_add(voter(0), "p", "(opcode = CALL) =>", 100);
        assert!(matches!(err, Err(GovError::InvalidPattern(_))));
        let err = g.propose_add(
            voter(0),
            "p",
            "(opcode = SSTORE) -> (opcode = SSTORE) where (src.stack(5) = dst.stack(0))",
            100,
        );
        assert!(matches!(err, Err(GovError::InvalidPattern(_))));
    }
}
