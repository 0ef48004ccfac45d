//! Deterministic single-sequencer ledger hosting the two auction contracts.
//!
//! Contract-1 keeps List1 (certificate → bid flag, blinded request, posted
//! signature). Contract-2 keeps the deposit escrow, the stored encrypted
//! submissions, List2 (accepted commitments `c`) and List3 (the result).
//! State changes only by applying transactions in sequence order, so any
//! party holding the genesis and the log can recompute the state hash.

mod contracts;
mod ledger;

pub use contracts::{tally, Tally};
pub use ledger::{replay, replay_any, DumpLine, Ledger, LedgerHandle, ParsedDump, Receipt, TxRequest};

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::authority::{AuctionId, ContractPublics};
use crate::blindsig::SigHash;
use crate::groups::{PairingSuite, SuiteDescriptor};
use crate::tre::{TimeLabel, TimeServerPublic};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ContractError {
    #[error("malformed payload: {0}")]
    MalformedPayload(String),
    #[error("{action} not allowed during {phase:?}")]
    PhaseClosed { action: &'static str, phase: Phase },
    #[error("certificate does not verify")]
    InvalidCert,
    #[error("certificate {0} already requested a signature")]
    AlreadyRequested(u32),
    #[error("no pending signature request for certificate {0}")]
    NoPendingRequest(u32),
    #[error("sender is not authorized for this call")]
    Unauthorized,
    #[error("inconsistent result: {0}")]
    InconsistentResult(String),
    #[error("tally window has not timed out")]
    NotTimedOut,
    #[error("auction already finalized")]
    AlreadyFinalized,
    #[error("deposit rejected: {0}")]
    DepositRejected(String),
    #[error("value transfer not accepted by this call")]
    UnexpectedValue,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LedgerError {
    #[error("genesis does not match the suite: {0}")]
    Genesis(String),
    #[error("transaction {got} out of order, expected seq {expected}")]
    SeqOutOfOrder { expected: u64, got: u64 },
    #[error("transaction {seq} goes back in time ({tick} < {last})")]
    TickRegression { seq: u64, tick: u64, last: u64 },
    #[error("corrupt ledger dump: {0}")]
    CorruptDump(String),
}

/// Opaque bytes, hex in JSON.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Bytes(pub Vec<u8>);

impl fmt::Debug for Bytes {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{}", hex::encode(&self.0))
    }
}

impl From<Vec<u8>> for Bytes {
    fn from(v: Vec<u8>) -> Self {
        Bytes(v)
    }
}

impl Serialize for Bytes {
    fn serialize<Ser: Serializer>(&self, s: Ser) -> Result<Ser::Ok, Ser::Error> {
        s.serialize_str(&hex::encode(&self.0))
    }
}

impl<'de> Deserialize<'de> for Bytes {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        hex::decode(&s).map(Bytes).map_err(serde::de::Error::custom)
    }
}

/// 20-byte ledger address.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Address(pub [u8; 20]);

impl Address {
    /// First 20 bytes of SHA-256 over a public-key encoding.
    pub fn from_public_key(encoded: &[u8]) -> Self {
        let d = Sha256::digest(encoded);
        let mut a = [0u8; 20];
        a.copy_from_slice(&d[..20]);
        Address(a)
    }

    /// Fixed, keyless address for a named system actor.
    pub fn named(name: &str) -> Self {
        Self::from_public_key(format!("actor:{name}").as_bytes())
    }
}

impl fmt::Debug for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{}", hex::encode(self.0))
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{}", hex::encode(self.0))
    }
}

impl Serialize for Address {
    fn serialize<Ser: Serializer>(&self, s: Ser) -> Result<Ser::Ok, Ser::Error> {
        s.serialize_str(&format!("0x{}", hex::encode(self.0)))
    }
}

impl<'de> Deserialize<'de> for Address {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let raw = s.strip_prefix("0x").ok_or_else(|| serde::de::Error::custom("address must start with 0x"))?;
        let bytes = hex::decode(raw).map_err(serde::de::Error::custom)?;
        let arr: [u8; 20] = bytes.try_into().map_err(|_| serde::de::Error::custom("address must be 20 bytes"))?;
        Ok(Address(arr))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Contract1,
    Contract2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Announce,
    Registration,
    Signing,
    Bidding,
    Tally,
    Closed,
}

/// Phase ends `T1 < T2 < T3 < T4` in logical ticks. Tick 0 is the
/// announcement; phase `i` covers `(T(i-1), Ti]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseSchedule {
    pub t1: u64,
    pub t2: u64,
    pub t3: u64,
    pub t4: u64,
}

impl PhaseSchedule {
    pub fn validate(&self) -> Result<(), String> {
        if !(0 < self.t1 && self.t1 < self.t2 && self.t2 < self.t3 && self.t3 < self.t4) {
            return Err(format!(
                "phase ends must satisfy 0 < T1 < T2 < T3 < T4, got {} {} {} {}",
                self.t1, self.t2, self.t3, self.t4
            ));
        }
        Ok(())
    }

    pub fn phase_at(&self, tick: u64) -> Phase {
        match tick {
            0 => Phase::Announce,
            t if t <= self.t1 => Phase::Registration,
            t if t <= self.t2 => Phase::Signing,
            t if t <= self.t3 => Phase::Bidding,
            t if t <= self.t4 => Phase::Tally,
            _ => Phase::Closed,
        }
    }

    pub fn first_tick(&self, phase: Phase) -> u64 {
        match phase {
            Phase::Announce => 0,
            Phase::Registration => 1,
            Phase::Signing => self.t1 + 1,
            Phase::Bidding => self.t2 + 1,
            Phase::Tally => self.t3 + 1,
            Phase::Closed => self.t4 + 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResultStatus {
    Completed,
    Aborted,
    Void,
}

/// One decrypted submission as announced by the auctioneer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpenedBid {
    pub submission_index: u32,
    pub c: Bytes,
    pub s: Bytes,
    pub bid: u64,
}

/// The auctioneer's claimed result; contract-2 recomputes and compares.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultClaim {
    pub status: ResultStatus,
    pub winner_submission_index: Option<u32>,
    pub winning_bid: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payload {
    /// Auctioneer locks the announced deposit; carries `value`.
    Deposit,
    RequestSignature { cert: Bytes, c_prime: Bytes },
    PostSignature { cert_serial: u32, s_prime: Bytes },
    SubmitBid { esub: Bytes },
    PublishResult { opened: Vec<OpenedBid>, unopenable: Vec<u32>, claim: ResultClaim },
    AbortTimeout,
}

impl Payload {
    pub fn name(&self) -> &'static str {
        match self {
            Payload::Deposit => "deposit",
            Payload::RequestSignature { .. } => "request_signature",
            Payload::PostSignature { .. } => "post_signature",
            Payload::SubmitBid { .. } => "submit_bid",
            Payload::PublishResult { .. } => "publish_result",
            Payload::AbortTimeout => "abort_timeout",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerTransaction {
    pub seq: u64,
    pub tick: u64,
    pub sender: Address,
    pub target: Target,
    pub payload: Payload,
    pub value: u64,
}

/// Everything contract-side observable about one application.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum ContractEvent {
    DepositLocked { amount: u64 },
    SignatureRequested { cert_serial: u32, c_prime: Bytes },
    SignaturePosted { cert_serial: u32 },
    BidStored { submission_index: u32 },
    /// A later submission repeats an earlier commitment `c`.
    DuplicateCommitment { submission_index: u32, first_index: u32 },
    InvalidOpening { submission_index: u32 },
    ResultPublished { status: ResultStatus },
    EscrowReleased { to: Address, amount: u64 },
    Compensation { to: Address, amount: u64 },
    EscrowRetained { amount: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct List1Entry {
    pub cert_serial: u32,
    pub bid_flag: u8,
    pub blinded_request: Option<Bytes>,
    pub posted_signature: Option<Bytes>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredSubmission {
    pub seq: u64,
    pub sender: Address,
    pub esub: Bytes,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct List3Result {
    pub status: ResultStatus,
    pub winner_submission_index: Option<u32>,
    pub winner_address: Option<Address>,
    pub winning_bid: Option<u64>,
    pub all_opened: Vec<OpenedBid>,
    pub valid_indices: Vec<u32>,
    pub discarded_indices: Vec<u32>,
    /// Submissions whose ciphertext did not yield a well-formed opening.
    pub unopenable_indices: Vec<u32>,
}

/// Complete contract and account state. Serialized canonically (struct field
/// order, `BTreeMap` key order) for hashing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainState {
    pub next_seq: u64,
    pub last_tick: u64,
    /// Running SHA-256 over genesis and every applied transaction.
    pub log_head: Bytes,
    pub balances: BTreeMap<Address, u64>,
    pub escrow: u64,
    pub deposit_locked: bool,
    pub list1: BTreeMap<u32, List1Entry>,
    pub submissions: Vec<StoredSubmission>,
    pub list2: Vec<Bytes>,
    pub list3: Option<List3Result>,
}

impl ChainState {
    /// Money across every account plus escrow.
    pub fn total_money(&self) -> u128 {
        self.balances.values().map(|&v| v as u128).sum::<u128>() + self.escrow as u128
    }

    pub fn hash(&self) -> [u8; 32] {
        let bytes = serde_json::to_vec(self).expect("state serializes");
        Sha256::digest(&bytes).into()
    }
}

/// Public keys of the announcement, as encoded group elements.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnouncedKeys {
    pub ts_g: Bytes,
    pub ts_s_g: Bytes,
    pub ts_s_g2: Bytes,
    pub ca_key: Bytes,
    pub contract1_enc: Bytes,
    pub contract1_sig: Bytes,
    pub contract2_tre_a_g: Bytes,
    pub contract2_tre_as_g: Bytes,
}

/// The auction announcement every replay starts from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Genesis {
    pub version: u32,
    pub suite: SuiteDescriptor,
    pub sig_hash: SigHash,
    pub auction_id: AuctionId,
    pub schedule: PhaseSchedule,
    pub release_label: String,
    pub deposit: u64,
    pub auctioneer: Address,
    pub balances: BTreeMap<Address, u64>,
    pub keys: AnnouncedKeys,
}

/// Inputs for [`Genesis::announce`].
#[derive(Debug, Clone)]
pub struct Announcement<S: PairingSuite> {
    pub sig_hash: SigHash,
    pub auction_id: AuctionId,
    pub schedule: PhaseSchedule,
    pub release_label: TimeLabel,
    pub deposit: u64,
    pub auctioneer: Address,
    pub balances: BTreeMap<Address, u64>,
    pub ts_public: TimeServerPublic<S>,
    pub ca_key: S::G1,
    pub contracts: ContractPublics<S>,
}

impl Genesis {
    pub const VERSION: u32 = 1;

    pub fn announce<S: PairingSuite>(suite: &S, a: &Announcement<S>) -> Self {
        let g1 = |p: &S::G1| Bytes(suite.g1_encode(p));
        Genesis {
            version: Self::VERSION,
            suite: suite.descriptor(),
            sig_hash: a.sig_hash,
            auction_id: a.auction_id,
            schedule: a.schedule,
            release_label: a.release_label.to_string(),
            deposit: a.deposit,
            auctioneer: a.auctioneer,
            balances: a.balances.clone(),
            keys: AnnouncedKeys {
                ts_g: g1(&a.ts_public.g),
                ts_s_g: g1(&a.ts_public.s_g),
                ts_s_g2: Bytes(suite.g2_encode(&a.ts_public.s_g2)),
                ca_key: g1(&a.ca_key),
                contract1_enc: g1(&a.contracts.contract1_enc),
                contract1_sig: g1(&a.contracts.contract1_sig),
                contract2_tre_a_g: g1(&a.contracts.contract2_tre.a_g),
                contract2_tre_as_g: g1(&a.contracts.contract2_tre.as_g),
            },
        }
    }

    pub fn initial_state(&self) -> ChainState {
        let head = Sha256::digest(serde_json::to_vec(self).expect("genesis serializes"));
        ChainState {
            next_seq: 1,
            last_tick: 0,
            log_head: Bytes(head.to_vec()),
            balances: self.balances.clone(),
            escrow: 0,
            deposit_locked: false,
            list1: BTreeMap::new(),
            submissions: Vec::new(),
            list2: Vec::new(),
            list3: None,
        }
    }
}

#[cfg(test)]
mod unit {
    use super::*;

    #[test]
    fn phases_follow_schedule() {
        let s = PhaseSchedule { t1: 2, t2: 4, t3: 6, t4: 8 };
        s.validate().unwrap();
        let phases: Vec<Phase> = (0..10).map(|t| s.phase_at(t)).collect();
        use Phase::*;
        assert_eq!(
            phases,
            vec![Announce, Registration, Registration, Signing, Signing, Bidding, Bidding, Tally, Tally, Closed]
        );
        for p in [Registration, Signing, Bidding, Tally, Closed] {
            assert_eq!(s.phase_at(s.first_tick(p)), p);
        }
        assert!(PhaseSchedule { t1: 2, t2: 2, t3: 6, t4: 8 }.validate().is_err());
    }

    #[test]
    fn address_serde() {
        let a = Address::named("auctioneer");
        let json = serde_json::to_string(&a).unwrap();
        assert!(json.starts_with("\"0x"));
        assert_eq!(serde_json::from_str::<Address>(&json).unwrap(), a);
        assert!(serde_json::from_str::<Address>("\"0x12\"").is_err());
    }

    #[test]
    fn payload_json_is_tagged() {
        let p = Payload::PostSignature { cert_serial: 3, s_prime: Bytes(vec![0xab]) };
        let json = serde_json::to_string(&p).unwrap();
        assert_eq!(json, r#"{"kind":"post_signature","cert_serial":3,"s_prime":"ab"}"#);
        assert_eq!(serde_json::from_str::<Payload>(&json).unwrap(), p);
    }
}
