//! Full auction runs: a tick-driven orchestrator over bidder agents, the
//! auctioneer, the CA and the time server, all meeting on one ledger.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::authority::{allow_all, AuctionId, AuthorityError, CertificateAuthority};
use crate::blindsig::{bid_message, BlindSignature, SigHash};
use crate::chain::{
    Address, Announcement, Bytes, Genesis, Ledger, LedgerError, LedgerHandle, Payload, Phase, PhaseSchedule,
    ResultStatus, Target, TxRequest,
};
use crate::groups::PairingSuite;
use crate::tre::{self, Plaintext, TimeLabel, TreError};

mod agents;
mod trace;

pub use agents::{Auctioneer, BidderAgent, BidderReport, TimeServer};
pub use trace::{fairness_report, trace_jsonl, FairnessReport, TraceEvent};

#[derive(Debug, thiserror::Error)]
pub enum AuctionError {
    #[error("invalid config field `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },
    #[error("time-bound key for `{0}` does not verify or is for the wrong label")]
    InvalidTimeBoundKey(String),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Authority(#[from] AuthorityError),
    #[error(transparent)]
    Tre(#[from] TreError),
}

/// Scripted behaviours layered on top of an otherwise honest run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    #[default]
    Honest,
    DoubleRequest,
    AuctioneerAbort,
    EarlyDecryptor,
    Replayer,
    Tamperer,
}

impl Scenario {
    pub const ALL: [Scenario; 6] = [
        Scenario::Honest,
        Scenario::DoubleRequest,
        Scenario::AuctioneerAbort,
        Scenario::EarlyDecryptor,
        Scenario::Replayer,
        Scenario::Tamperer,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Honest => "honest",
            Scenario::DoubleRequest => "double-request",
            Scenario::AuctioneerAbort => "auctioneer-abort",
            Scenario::EarlyDecryptor => "early-decryptor",
            Scenario::Replayer => "replayer",
            Scenario::Tamperer => "tamperer",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Scenario::Honest => "all agents follow the protocol",
            Scenario::DoubleRequest => "bidder 0 asks contract-1 for a second signature on a lower bid",
            Scenario::AuctioneerAbort => "the auctioneer never publishes; escrow is split after T4",
            Scenario::EarlyDecryptor => "the auctioneer tries to open bids with each key broadcast before release",
            Scenario::Replayer => "an outsider resubmits bidder 0's ciphertext from its own address",
            Scenario::Tamperer => "bidder 0's ciphertext has one bit flipped in transit",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scenario::ALL.into_iter().find(|sc| sc.name() == s).ok_or_else(|| format!("unknown scenario `{s}`"))
    }
}

/// Inclusive range bids are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BidRange {
    pub min: u64,
    pub max: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuctionConfig {
    pub auction_id: String,
    pub deposit: u64,
    pub schedule: PhaseSchedule,
    /// Bids are encrypted to `epoch:<release_tick>`.
    pub release_tick: u64,
    pub bidder_count: u32,
    pub bid_range: BidRange,
    pub rng_seed: u64,
    #[serde(default)]
    pub sig_hash: SigHash,
    #[serde(default)]
    pub scenario: Scenario,
}

impl Default for AuctionConfig {
    fn default() -> Self {
        AuctionConfig {
            auction_id: "auction-1".into(),
            deposit: 100,
            schedule: PhaseSchedule { t1: 2, t2: 4, t3: 6, t4: 9 },
            release_tick: 6,
            bidder_count: 20,
            bid_range: BidRange { min: 10, max: 99 },
            rng_seed: 0,
            sig_hash: SigHash::Sha256,
            scenario: Scenario::Honest,
        }
    }
}

impl AuctionConfig {
    pub fn validate(&self) -> Result<(), AuctionError> {
        let bad = |field, reason: String| Err(AuctionError::InvalidConfig { field, reason });
        if self.auction_id.is_empty() {
            return bad("auction_id", "must not be empty".into());
        }
        if self.deposit == 0 {
            return bad("deposit", "must be positive".into());
        }
        if let Err(reason) = self.schedule.validate() {
            return bad("schedule", reason);
        }
        let s = &self.schedule;
        // The key is broadcast at the end of `release_tick`; the tally needs
        // one more tick inside the tally phase.
        if self.release_tick < s.t3 || self.release_tick >= s.t4 {
            return bad("release_tick", format!("must lie in [T3, T4) = [{}, {})", s.t3, s.t4));
        }
        if self.bid_range.min > self.bid_range.max {
            return bad("bid_range", format!("min {} exceeds max {}", self.bid_range.min, self.bid_range.max));
        }
        Ok(())
    }

    pub fn release_label(&self) -> TimeLabel {
        TimeLabel::epoch(self.release_tick)
    }
}

/// Decrypted content of a bid: `(c, s) || b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Submission<S: PairingSuite> {
    pub signature: BlindSignature<S>,
    pub bid: u64,
}

impl<S: PairingSuite> Submission<S> {
    pub fn to_plaintext(&self, suite: &S) -> Plaintext {
        let mut bytes = self.signature.to_bytes(suite);
        bytes.extend(bid_message(self.bid));
        Plaintext::from_bytes(bytes)
    }

    pub fn from_plaintext(suite: &S, pt: &Plaintext) -> Option<Self> {
        let bytes = pt.as_bytes();
        let split = bytes.len().checked_sub(8)?;
        let signature = BlindSignature::from_bytes(suite, &bytes[..split]).ok()?;
        let bid = u64::from_be_bytes(bytes[split..].try_into().ok()?);
        Some(Submission { signature, bid })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuctionOutcome {
    pub status: ResultStatus,
    /// The winner is known only by submission position and one-time address.
    pub winner_submission_index: Option<u32>,
    pub winner_address: Option<Address>,
    pub winning_bid: Option<u64>,
    pub submission_count: u32,
    pub opened_count: u32,
    /// Openings dropped for a bad signature, a repeated `c`, or an
    /// undecodable ciphertext.
    pub discarded_count: u32,
    pub state_hash: String,
}

#[derive(Debug)]
pub struct AuctionRun<S: PairingSuite> {
    pub config: AuctionConfig,
    pub outcome: AuctionOutcome,
    pub ledger: Ledger<S>,
    pub trace: Vec<TraceEvent>,
    pub bidders: Vec<BidderReport>,
}

impl<S: PairingSuite> AuctionRun<S> {
    pub fn trace_jsonl(&self) -> String {
        trace_jsonl(&self.trace)
    }

    pub fn fairness(&self) -> FairnessReport {
        fairness_report(&self.trace, self.config.release_label().as_str())
    }
}

const WATCHDOG: &str = "watchdog";

/// Runs one auction end to end. Protocol failures end up in the outcome
/// status; only invalid configuration is an error.
pub fn run_auction<S: PairingSuite>(suite: &S, config: &AuctionConfig) -> Result<AuctionRun<S>, AuctionError> {
    config.validate()?;
    let suite = *suite;
    let schedule = config.schedule;
    let hash = config.sig_hash;
    let label = config.release_label();
    let mut master = ChaCha20Rng::seed_from_u64(config.rng_seed);

    let mut ts = TimeServer::new(suite, tre::ts_gen(&suite, &mut master));
    let auction_id = AuctionId::from_name(&config.auction_id);
    let mut ca = CertificateAuthority::new(suite, hash, auction_id, schedule.t1, allow_all(), &mut master);
    let keys = ca.ca_provision_contracts(ts.public(), &mut master)?;
    let auctioneer_address = Address::named(&format!("auctioneer:{}", config.auction_id));
    let genesis = Genesis::announce(
        &suite,
        &Announcement {
            sig_hash: hash,
            auction_id,
            schedule,
            release_label: label.clone(),
            deposit: config.deposit,
            auctioneer: auctioneer_address,
            balances: BTreeMap::from([(auctioneer_address, config.deposit)]),
            ts_public: *ts.public(),
            ca_key: ca.public().key,
            contracts: keys.publics(),
        },
    );
    let ledger = LedgerHandle::new(Ledger::new(suite, genesis)?);
    let mut auctioneer = Auctioneer::new(suite, hash, auctioneer_address, keys, *ts.public(), label.clone(), master.gen());
    let signer = auctioneer.signer_public();
    let tre_public = auctioneer.tre_public();

    let mut bidders: Vec<BidderAgent<S>> = (0..config.bidder_count)
        .map(|i| {
            let bid = master.gen_range(config.bid_range.min..=config.bid_range.max);
            BidderAgent::new(suite, hash, i, bid, master.gen())
        })
        .collect();
    if config.scenario == Scenario::DoubleRequest {
        if let Some(b) = bidders.first_mut() {
            b.double_request = true;
        }
    }
    let mut adversary_rng = ChaCha20Rng::seed_from_u64(master.gen());

    let mut trace = Vec::new();
    for tick in 0..=schedule.t4 + 1 {
        ledger.advance_to(tick);
        let phase = schedule.phase_at(tick);
        let first_of_phase = tick == schedule.first_tick(phase);
        match phase {
            Phase::Announce => {
                let receipt = ledger.submit(TxRequest {
                    sender: auctioneer_address,
                    target: Target::Contract2,
                    payload: Payload::Deposit,
                    value: config.deposit,
                });
                trace.push(TraceEvent::on_ledger(agents::AUCTIONEER, "deposit", &receipt, json!({ "amount": config.deposit })));
            }
            Phase::Registration if first_of_phase => {
                for b in bidders.iter_mut() {
                    trace.push(b.register(&mut ca, tick));
                }
            }
            Phase::Signing => {
                if first_of_phase {
                    request_signatures(&mut bidders, &mut auctioneer, &ledger, tick, &mut trace);
                }
                let (_, events) = auctioneer.sign_round(&ledger);
                trace.extend(events);
            }
            Phase::Bidding if first_of_phase => {
                submit_bids(&mut bidders, &ledger, &ts, &tre_public, &label, signer, config.scenario, &mut trace);
                if config.scenario == Scenario::Replayer {
                    replay_first_submission(&ledger, &suite, &mut adversary_rng, &mut trace);
                }
            }
            Phase::Tally if tick == config.release_tick + 1 && config.scenario != Scenario::AuctioneerAbort => {
                let tbk = ts.key_for(&label).expect("release key was broadcast last tick").clone();
                let (_, events) = auctioneer.tally(&tbk, &ledger)?;
                trace.extend(events);
            }
            Phase::Closed if ledger.read(|l| l.state().list3.is_none()) => {
                let sender = Address::named(WATCHDOG);
                let receipt = ledger.submit(TxRequest::new(sender, Target::Contract2, Payload::AbortTimeout));
                trace.push(TraceEvent::on_ledger(WATCHDOG, "abort_timeout", &receipt, json!({})));
            }
            _ => {}
        }
        if config.scenario == Scenario::EarlyDecryptor && tick > schedule.t2 && tick <= config.release_tick {
            if let Some(key) = ts.latest() {
                trace.extend(auctioneer.peek(tick, key, &ledger));
            }
        }
        trace.push(ts.broadcast(tick)?);
    }

    let ledger = ledger.into_inner().expect("agents hold no ledger handles after the run");
    let outcome = outcome_of(&ledger);
    log::info!(
        "auction {} ({}) finished: {:?}, {} submissions",
        config.auction_id,
        config.scenario,
        outcome.status,
        outcome.submission_count
    );
    Ok(AuctionRun {
        config: config.clone(),
        outcome,
        ledger,
        trace,
        bidders: bidders.into_iter().map(|b| b.report).collect(),
    })
}

fn request_signatures<S: PairingSuite>(
    bidders: &mut [BidderAgent<S>],
    auctioneer: &mut Auctioneer<S>,
    ledger: &LedgerHandle<S>,
    tick: u64,
    trace: &mut Vec<TraceEvent>,
) {
    let signer = auctioneer.signer_public();
    let mut offers = Vec::with_capacity(bidders.len());
    for b in bidders.iter() {
        offers.push(b.cert().map(|cert| {
            let (y, event) = auctioneer.offer_session(cert.serial, tick);
            trace.push(event);
            y
        }));
    }
    // Blinding runs in parallel; submission order is the agent order.
    let requests: Vec<(Option<TxRequest>, Option<TxRequest>)> = bidders
        .par_iter_mut()
        .zip(offers.par_iter())
        .map(|(b, y)| match y {
            Some(y) => {
                let first = b.prepare_request(y, &signer);
                let repeat = if b.double_request { b.prepare_repeat_request(y, &signer) } else { None };
                (first, repeat)
            }
            None => (None, None),
        })
        .collect();
    for (b, (first, repeat)) in bidders.iter_mut().zip(requests) {
        if let Some(req) = first {
            let receipt = ledger.submit(req);
            b.observe_request(&receipt);
            trace.push(TraceEvent::on_ledger(b.actor(), "request_signature", &receipt, json!({})));
        }
        if let Some(req) = repeat {
            let receipt = ledger.submit(req);
            b.observe(&receipt);
            trace.push(TraceEvent::on_ledger(b.actor(), "request_signature", &receipt, json!({ "repeat": true })));
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn submit_bids<S: PairingSuite>(
    bidders: &mut [BidderAgent<S>],
    ledger: &LedgerHandle<S>,
    ts: &TimeServer<S>,
    tre_public: &tre::TrePublicKey<S>,
    label: &TimeLabel,
    signer: S::G1,
    scenario: Scenario,
    trace: &mut Vec<TraceEvent>,
) {
    let posted: Vec<Option<Bytes>> = ledger.read(|l| {
        bidders
            .iter()
            .map(|b| b.cert().and_then(|c| l.state().list1.get(&c.serial)).and_then(|e| e.posted_signature.clone()))
            .collect()
    });
    let ts_public = ts.public();
    let mut requests: Vec<Option<TxRequest>> = bidders
        .par_iter_mut()
        .zip(posted.par_iter())
        .map(|(b, s_prime)| {
            b.collect_signature(s_prime.as_ref(), &signer);
            b.prepare_submission(ts_public, tre_public, label)
        })
        .collect();
    if scenario == Scenario::Tamperer {
        if let Some(Some(TxRequest { payload: Payload::SubmitBid { esub }, .. })) = requests.first_mut() {
            // Last byte of V holds the low bits of the bid.
            if let Some(last) = esub.0.last_mut() {
                *last ^= 0x01;
            }
            trace.push(TraceEvent::off_ledger(
                ledger.read(|l| l.tick()),
                "tamperer",
                "flip_bit",
                json!({ "target_agent": 0 }),
            ));
        }
    }
    for (b, req) in bidders.iter_mut().zip(requests) {
        let Some(req) = req else {
            continue;
        };
        let receipt = ledger.submit(req);
        b.observe(&receipt);
        trace.push(TraceEvent::on_ledger(b.actor(), "submit_bid", &receipt, json!({})));
    }
}

fn replay_first_submission<S: PairingSuite>(
    ledger: &LedgerHandle<S>,
    suite: &S,
    rng: &mut ChaCha20Rng,
    trace: &mut Vec<TraceEvent>,
) {
    let Some(esub) = ledger.read(|l| l.state().submissions.first().map(|s| s.esub.clone())) else {
        return;
    };
    let sender = agents::one_time_address(suite, rng);
    let receipt = ledger.submit(TxRequest::new(sender, Target::Contract2, Payload::SubmitBid { esub }));
    trace.push(TraceEvent::on_ledger("replayer", "submit_bid", &receipt, json!({ "copied_index": 0 })));
}

fn outcome_of<S: PairingSuite>(ledger: &Ledger<S>) -> AuctionOutcome {
    let state = ledger.state();
    let submission_count = state.submissions.len() as u32;
    let state_hash = hex::encode(ledger.state_hash());
    match &state.list3 {
        Some(r) => AuctionOutcome {
            status: r.status,
            winner_submission_index: r.winner_submission_index,
            winner_address: r.winner_address,
            winning_bid: r.winning_bid,
            submission_count,
            opened_count: r.all_opened.len() as u32,
            discarded_count: (r.discarded_indices.len() + r.unopenable_indices.len()) as u32,
            state_hash,
        },
        None => AuctionOutcome {
            status: ResultStatus::Aborted,
            winner_submission_index: None,
            winner_address: None,
            winning_bid: None,
            submission_count,
            opened_count: 0,
            discarded_count: 0,
            state_hash,
        },
    }
}
