use std::collections::{BTreeMap, BTreeSet};

use super::{
    Address, Bytes, ChainState, ContractError, ContractEvent, Genesis, LedgerError, LedgerTransaction, List1Entry,
    List3Result, OpenedBid, Payload, Phase, ResultClaim, ResultStatus, StoredSubmission, Target,
};
use crate::authority::{verify_cert, CaPublic, Certificate};
use crate::blindsig::{self, bid_message, BlindSignature};
use crate::groups::{AnySuite, PairingSuite};
use crate::tre::TreCiphertext;

/// Genesis plus its decoded public keys.
#[derive(Debug)]
pub(super) struct Context<S: PairingSuite> {
    pub suite: S,
    pub genesis: Genesis,
    ca: CaPublic<S>,
    contract1_sig: S::G1,
}

impl<S: PairingSuite> Context<S> {
    pub fn new(suite: S, genesis: Genesis) -> Result<Self, LedgerError> {
        let described = AnySuite::from_descriptor(&genesis.suite).map_err(|e| LedgerError::Genesis(e.to_string()))?;
        if described.descriptor() != suite.descriptor() {
            return Err(LedgerError::Genesis(format!(
                "genesis describes {:?}, ledger runs {:?}",
                genesis.suite,
                suite.descriptor()
            )));
        }
        genesis.schedule.validate().map_err(LedgerError::Genesis)?;
        let g1 = |b: &Bytes, what: &str| {
            suite.g1_decode(&b.0).map_err(|e| LedgerError::Genesis(format!("{what}: {e}")))
        };
        let ca = CaPublic { key: g1(&genesis.keys.ca_key, "ca key")?, auction_id: genesis.auction_id, hash: genesis.sig_hash };
        let contract1_sig = g1(&genesis.keys.contract1_sig, "contract-1 signature key")?;
        Ok(Context { suite, genesis, ca, contract1_sig })
    }
}

fn malformed(what: impl std::fmt::Display) -> ContractError {
    ContractError::MalformedPayload(what.to_string())
}

pub(super) fn execute<S: PairingSuite>(
    ctx: &Context<S>,
    state: &mut ChainState,
    tx: &LedgerTransaction,
) -> Result<Vec<ContractEvent>, ContractError> {
    let phase = ctx.genesis.schedule.phase_at(tx.tick);
    if tx.value > 0 && !matches!(tx.payload, Payload::Deposit) {
        return Err(ContractError::UnexpectedValue);
    }
    match (&tx.target, &tx.payload) {
        (Target::Contract1, Payload::RequestSignature { cert, c_prime }) => {
            request_signature(ctx, state, phase, cert, c_prime)
        }
        (Target::Contract1, Payload::PostSignature { cert_serial, s_prime }) => {
            post_signature(ctx, state, phase, &tx.sender, *cert_serial, s_prime)
        }
        (Target::Contract2, Payload::Deposit) => deposit(ctx, state, phase, &tx.sender, tx.value),
        (Target::Contract2, Payload::SubmitBid { esub }) => submit_bid(ctx, state, phase, tx, esub),
        (Target::Contract2, Payload::PublishResult { opened, unopenable, claim }) => {
            publish_result(ctx, state, phase, &tx.sender, opened, unopenable, claim)
        }
        (Target::Contract2, Payload::AbortTimeout) => abort_timeout(ctx, state, tx.tick),
        (target, payload) => Err(malformed(format!("{} is not a {target:?} call", payload.name()))),
    }
}

fn require_phase(phase: Phase, expected: Phase, action: &'static str) -> Result<(), ContractError> {
    if phase != expected {
        return Err(ContractError::PhaseClosed { action, phase });
    }
    Ok(())
}

fn deposit<S: PairingSuite>(
    ctx: &Context<S>,
    state: &mut ChainState,
    phase: Phase,
    sender: &Address,
    value: u64,
) -> Result<Vec<ContractEvent>, ContractError> {
    if !matches!(phase, Phase::Announce | Phase::Registration) {
        return Err(ContractError::PhaseClosed { action: "deposit", phase });
    }
    if *sender != ctx.genesis.auctioneer {
        return Err(ContractError::Unauthorized);
    }
    if state.deposit_locked {
        return Err(ContractError::DepositRejected("already locked".into()));
    }
    if value != ctx.genesis.deposit {
        return Err(ContractError::DepositRejected(format!("expected {}, got {value}", ctx.genesis.deposit)));
    }
    let balance = state.balances.entry(*sender).or_insert(0);
    if *balance < value {
        return Err(ContractError::DepositRejected(format!("balance {} below {value}", *balance)));
    }
    *balance -= value;
    state.escrow += value;
    state.deposit_locked = true;
    Ok(vec![ContractEvent::DepositLocked { amount: value }])
}

fn request_signature<S: PairingSuite>(
    ctx: &Context<S>,
    state: &mut ChainState,
    phase: Phase,
    cert: &Bytes,
    c_prime: &Bytes,
) -> Result<Vec<ContractEvent>, ContractError> {
    require_phase(phase, Phase::Signing, "signature request")?;
    let cert = Certificate::from_bytes(&ctx.suite, &cert.0).map_err(malformed)?;
    ctx.suite.scalar_decode(&c_prime.0).map_err(|e| malformed(format!("c': {e}")))?;
    if !verify_cert(&ctx.suite, &cert, &ctx.ca) {
        return Err(ContractError::InvalidCert);
    }
    if let Some(entry) = state.list1.get(&cert.serial) {
        if entry.bid_flag == 1 || entry.blinded_request.is_some() {
            return Err(ContractError::AlreadyRequested(cert.serial));
        }
    }
    state.list1.insert(
        cert.serial,
        List1Entry { cert_serial: cert.serial, bid_flag: 0, blinded_request: Some(c_prime.clone()), posted_signature: None },
    );
    Ok(vec![ContractEvent::SignatureRequested { cert_serial: cert.serial, c_prime: c_prime.clone() }])
}

fn post_signature<S: PairingSuite>(
    ctx: &Context<S>,
    state: &mut ChainState,
    phase: Phase,
    sender: &Address,
    serial: u32,
    s_prime: &Bytes,
) -> Result<Vec<ContractEvent>, ContractError> {
    if *sender != ctx.genesis.auctioneer {
        return Err(ContractError::Unauthorized);
    }
    require_phase(phase, Phase::Signing, "signature post")?;
    ctx.suite.scalar_decode(&s_prime.0).map_err(|e| malformed(format!("s': {e}")))?;
    match state.list1.get_mut(&serial) {
        Some(entry) if entry.blinded_request.is_some() && entry.posted_signature.is_none() => {
            entry.bid_flag = 1;
            entry.posted_signature = Some(s_prime.clone());
            Ok(vec![ContractEvent::SignaturePosted { cert_serial: serial }])
        }
        _ => Err(ContractError::NoPendingRequest(serial)),
    }
}

fn submit_bid<S: PairingSuite>(
    ctx: &Context<S>,
    state: &mut ChainState,
    phase: Phase,
    tx: &LedgerTransaction,
    esub: &Bytes,
) -> Result<Vec<ContractEvent>, ContractError> {
    require_phase(phase, Phase::Bidding, "bid submission")?;
    TreCiphertext::from_bytes(&ctx.suite, &esub.0).map_err(malformed)?;
    let index = state.submissions.len() as u32;
    state.submissions.push(StoredSubmission { seq: tx.seq, sender: tx.sender, esub: esub.clone() });
    Ok(vec![ContractEvent::BidStored { submission_index: index }])
}

/// Outcome of re-checking an opened list against the stored submissions.
#[derive(Debug, PartialEq, Eq)]
pub struct Tally {
    pub valid: Vec<u32>,
    pub discarded: Vec<u32>,
    pub winner: Option<(u32, u64)>,
    pub events: Vec<ContractEvent>,
}

/// Signature check, first-wins deduplication on `c` in submission order,
/// and lowest bid with ties to the earliest submission.
pub fn tally<S: PairingSuite>(
    suite: &S,
    hash: blindsig::SigHash,
    signer: &S::G1,
    submission_count: u32,
    opened: &[OpenedBid],
) -> Tally {
    let mut by_index: Vec<&OpenedBid> = opened.iter().collect();
    by_index.sort_by_key(|o| o.submission_index);
    let mut seen: BTreeMap<Vec<u8>, u32> = BTreeMap::new();
    let mut valid = Vec::new();
    let mut events = Vec::new();
    let mut winner: Option<(u32, u64)> = None;
    for o in by_index {
        let sig = match (suite.scalar_decode(&o.c.0), suite.scalar_decode(&o.s.0)) {
            (Ok(c), Ok(s)) => BlindSignature { c, s },
            _ => {
                events.push(ContractEvent::InvalidOpening { submission_index: o.submission_index });
                continue;
            }
        };
        if !blindsig::verify(suite, hash, &bid_message(o.bid), &sig, signer) {
            events.push(ContractEvent::InvalidOpening { submission_index: o.submission_index });
            continue;
        }
        if let Some(&first) = seen.get(&o.c.0) {
            events.push(ContractEvent::DuplicateCommitment { submission_index: o.submission_index, first_index: first });
            continue;
        }
        seen.insert(o.c.0.clone(), o.submission_index);
        valid.push(o.submission_index);
        // Strict `<` keeps the earliest submission among equal bids.
        if winner.map_or(true, |(_, best)| o.bid < best) {
            winner = Some((o.submission_index, o.bid));
        }
    }
    let valid_set: BTreeSet<u32> = valid.iter().copied().collect();
    let discarded = (0..submission_count).filter(|i| !valid_set.contains(i)).collect();
    Tally { valid, discarded, winner, events }
}

fn publish_result<S: PairingSuite>(
    ctx: &Context<S>,
    state: &mut ChainState,
    phase: Phase,
    sender: &Address,
    opened: &[OpenedBid],
    unopenable: &[u32],
    claim: &ResultClaim,
) -> Result<Vec<ContractEvent>, ContractError> {
    if *sender != ctx.genesis.auctioneer {
        return Err(ContractError::Unauthorized);
    }
    require_phase(phase, Phase::Tally, "result publication")?;
    if state.list3.is_some() {
        return Err(ContractError::AlreadyFinalized);
    }
    let n = state.submissions.len() as u32;
    let mut covered = BTreeSet::new();
    for i in opened.iter().map(|o| o.submission_index).chain(unopenable.iter().copied()) {
        if i >= n {
            return Err(malformed(format!("submission index {i} out of range")));
        }
        if !covered.insert(i) {
            return Err(malformed(format!("submission index {i} listed twice")));
        }
    }
    if covered.len() as u32 != n {
        return Err(ContractError::InconsistentResult(format!(
            "{} of {n} submissions accounted for",
            covered.len()
        )));
    }

    let t = tally(&ctx.suite, ctx.genesis.sig_hash, &ctx.contract1_sig, n, opened);
    let expected = match t.winner {
        Some((idx, bid)) => ResultClaim {
            status: ResultStatus::Completed,
            winner_submission_index: Some(idx),
            winning_bid: Some(bid),
        },
        None => ResultClaim { status: ResultStatus::Void, winner_submission_index: None, winning_bid: None },
    };
    if *claim != expected {
        return Err(ContractError::InconsistentResult(format!("claimed {claim:?}, recomputed {expected:?}")));
    }

    let mut events = t.events;
    let list2: Vec<Bytes> = t
        .valid
        .iter()
        .map(|i| opened.iter().find(|o| o.submission_index == *i).expect("valid index is opened").c.clone())
        .collect();
    state.list2 = list2;
    state.list3 = Some(List3Result {
        status: expected.status,
        winner_submission_index: expected.winner_submission_index,
        winner_address: expected.winner_submission_index.map(|i| state.submissions[i as usize].sender),
        winning_bid: expected.winning_bid,
        all_opened: opened.to_vec(),
        valid_indices: t.valid,
        discarded_indices: t.discarded,
        unopenable_indices: unopenable.to_vec(),
    });
    events.push(ContractEvent::ResultPublished { status: expected.status });
    let released = std::mem::take(&mut state.escrow);
    *state.balances.entry(ctx.genesis.auctioneer).or_insert(0) += released;
    events.push(ContractEvent::EscrowReleased { to: ctx.genesis.auctioneer, amount: released });
    Ok(events)
}

fn abort_timeout<S: PairingSuite>(
    ctx: &Context<S>,
    state: &mut ChainState,
    tick: u64,
) -> Result<Vec<ContractEvent>, ContractError> {
    if state.list3.is_some() {
        return Err(ContractError::AlreadyFinalized);
    }
    if tick <= ctx.genesis.schedule.t4 {
        return Err(ContractError::NotTimedOut);
    }
    let mut submitters: Vec<Address> = Vec::new();
    for s in &state.submissions {
        if !submitters.contains(&s.sender) {
            submitters.push(s.sender);
        }
    }
    let mut events = Vec::new();
    if !submitters.is_empty() {
        let share = state.escrow / submitters.len() as u64;
        for addr in &submitters {
            *state.balances.entry(*addr).or_insert(0) += share;
            events.push(ContractEvent::Compensation { to: *addr, amount: share });
        }
        state.escrow -= share * submitters.len() as u64;
    }
    events.push(ContractEvent::EscrowRetained { amount: state.escrow });
    state.list3 = Some(List3Result {
        status: ResultStatus::Aborted,
        winner_submission_index: None,
        winner_address: None,
        winning_bid: None,
        all_opened: Vec::new(),
        valid_indices: Vec::new(),
        discarded_indices: Vec::new(),
        unopenable_indices: Vec::new(),
    });
    events.push(ContractEvent::ResultPublished { status: ResultStatus::Aborted });
    Ok(events)
}
