//! Randomized operation sequences against the governance state machine,
//! checking the deposit-conservation invariant after every step.

use aegis_core::governance::{Governance, Outcome};
use aegis_core::pattern::PatternId;
use aegis_core::word::Address;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;

pub const OWNER: Address = Address([0x01; 20]);

pub fn voter(i: usize) -> Address {
    let mut a = [0x10; 20];
    a[19] = i as u8;
    Address(a)
}

/// Distinct, statically valid pattern texts parameterized by a literal.
pub fn pattern_text(i: usize) -> String {
    format!("(opcode = CALL) -> (opcode = SSTORE) where (src.pc = {i})")
}

fn conservation(gov: &Governance) {
    assert_eq!(
        gov.total_deposited(),
        gov.total_refunded() + gov.treasury() + gov.escrowed(),
        "deposit conservation violated at block {}",
        gov.block()
    );
}

/// Runs one random sequence of governance operations, asserting the
/// conservation invariant after every call, then drains all windows and
/// checks the terminal state: nothing escrowed, no proposal left open, and
/// the event log replaying to exactly the active pattern set.
pub fn run_random_sequence(seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let voter_count = rng.gen_range(1..=9);
    let voters: Vec<Address> = (0..voter_count).map(voter).collect();
    let mut gov = Governance::new(
        OWNER,
        voters.iter().copied(),
        rng.gen_range(1..=6),
        rng.gen_range(1..=6),
        rng.gen_range(1..=5) * 10,
    );
    // Vote/nonce pairs used at commit time, so reveals can reproduce them.
    let mut secrets: HashMap<(Address, PatternId), (bool, [u8; 32])> = HashMap::new();
    let mut vote_ids: Vec<PatternId> = Vec::new();

    let ops = rng.gen_range(0..=30);
    for _ in 0..ops {
        match rng.gen_range(0..100) {
            0..=7 => {
                let keep = rng.gen_range(1..=voters.len());
                let _ = gov.set_voters(OWNER, voters[..keep].iter().copied());
            }
            8..=11 => {
                let _ = gov.set_windows(OWNER, rng.gen_range(1..=6), rng.gen_range(1..=6));
            }
            12..=15 => {
                let _ = gov.set_deposit(OWNER, rng.gen_range(1..=5) * 10);
            }
            16..=19 => {
                // Non-owner admin calls must be rejected and change nothing.
                let before = gov.deposit();
                assert!(gov.set_deposit(voter(0), 7).is_err());
                assert_eq!(gov.deposit(), before);
            }
            20..=39 => {
                let proposer = voters[rng.gen_range(0..voters.len())];
                let deposit = if rng.gen_bool(0.8) {
                    gov.deposit()
                } else {
                    gov.deposit() + 1
                };
                let text = pattern_text(rng.gen_range(0..12));
                if let Ok(id) = gov.propose_add(proposer, "candidate", &text, deposit) {
                    vote_ids.push(id);
                }
            }
            40..=44 => {
                let proposer = voters[rng.gen_range(0..voters.len())];
                if let Some(p) = gov.active_patterns().first() {
                    let id = p.id;
                    let deposit = gov.deposit();
                    if gov.propose_remove(proposer, id, deposit).is_ok() {
                        vote_ids.push(id);
                    }
                }
            }
            45..=69 if !vote_ids.is_empty() => {
                let vote_id = vote_ids[rng.gen_range(0..vote_ids.len())];
                let caller = voters[rng.gen_range(0..voters.len())];
                let vote = rng.gen_bool(0.6);
                let nonce = rng.gen::<[u8; 32]>();
                let commitment = Governance::commitment_hash(vote_id, vote, &nonce);
                let deposit = gov
                    .proposal(vote_id)
                    .map(|p| p.deposit)
                    .unwrap_or_else(|| gov.deposit());
                if gov.commit(caller, vote_id, commitment, deposit).is_ok() {
                    secrets.insert((caller, vote_id), (vote, nonce));
                }
            }
            70..=94 if !vote_ids.is_empty() => {
                let vote_id = vote_ids[rng.gen_range(0..vote_ids.len())];
                let caller = voters[rng.gen_range(0..voters.len())];
                if let Some((vote, mut nonce)) = secrets.get(&(caller, vote_id)).copied() {
                    if rng.gen_bool(0.1) {
                        nonce[0] ^= 1; // wrong secret; must not release the deposit
                    }
                    if gov.reveal(caller, vote_id, vote, &nonce).is_ok() {
                        secrets.remove(&(caller, vote_id));
                    }
                } else {
                    assert!(gov.reveal(caller, vote_id, true, &[0; 32]).is_err());
                }
            }
            _ => gov.advance_blocks(rng.gen_range(1..=4)),
        }
        conservation(&gov);
    }

    // Drain every window: all escrow must be released or forfeited.
    gov.advance_blocks(10_000);
    conservation(&gov);
    assert_eq!(gov.escrowed(), 0, "escrow left after all windows closed");
    for id in &vote_ids {
        let p = gov.proposal(*id).expect("proposal retained");
        assert_ne!(p.outcome, Outcome::Open, "proposal still open at the end");
    }
    let replayed = aegis_core::governance::replay_events(gov.events()).expect("replayable log");
    assert_eq!(replayed, gov.active_patterns(), "event log out of sync");
}

/// Runs a full ceremony with `v` voters of which `yes` reveal an accepting
/// vote and the rest reveal a rejecting one, returning the outcome.
pub fn ceremony_outcome(v: usize, yes: usize) -> Outcome {
    assert!(yes <= v && v >= 1);
    let voters: Vec<Address> = (0..v).map(voter).collect();
    let mut gov = Governance::new(OWNER, voters.iter().copied(), 5, 5, 10);
    let id = gov
        .propose_add(voters[0], "candidate", &pattern_text(0), 10)
        .expect("valid proposal");
    let nonce = [7u8; 32];
    for (i, voter) in voters.iter().enumerate() {
        let vote = i < yes;
        let c = Governance::commitment_hash(id, vote, &nonce);
        gov.commit(*voter, id, c, 10).expect("commit in window");
    }
    gov.advance_blocks(5);
    for (i, voter) in voters.iter().enumerate() {
        let _ = gov.reveal(*voter, id, i < yes, &nonce);
    }
    gov.advance_blocks(5);
    gov.proposal(id).expect("proposal retained").outcome
}
