use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde_json::json;

use super::trace::TraceEvent;
use super::{AuctionError, Submission};
use crate::authority::{BidderIdentity, Certificate, CertificateAuthority, ContractKeys};
use crate::blindsig::{self, bid_message, BlindRequest, BlindSignature, BlindingFactors, SigHash, SignerSession};
use crate::chain::{
    tally, Address, Bytes, LedgerHandle, OpenedBid, Payload, Receipt, ResultClaim, ResultStatus, Target, TxRequest,
};
use crate::groups::PairingSuite;
use crate::tre::{self, TimeBoundKey, TimeLabel, TimeServerKeys, TimeServerPublic, TreCiphertext, TrePublicKey};

/// Publishes `sH1(T)` for `epoch:<tick>` at the end of every tick.
#[derive(Debug)]
pub struct TimeServer<S: PairingSuite> {
    suite: S,
    keys: TimeServerKeys<S>,
    published: BTreeMap<String, TimeBoundKey<S>>,
    latest: Option<TimeBoundKey<S>>,
}

impl<S: PairingSuite> TimeServer<S> {
    pub fn new(suite: S, keys: TimeServerKeys<S>) -> Self {
        TimeServer { suite, keys, published: BTreeMap::new(), latest: None }
    }

    pub fn public(&self) -> &TimeServerPublic<S> {
        &self.keys.public
    }

    pub fn broadcast(&mut self, tick: u64) -> Result<TraceEvent, AuctionError> {
        let label = TimeLabel::epoch(tick);
        let tbk = tre::ts_broadcast(&self.suite, &self.keys, &label)?;
        self.published.insert(label.to_string(), tbk.clone());
        self.latest = Some(tbk);
        Ok(TraceEvent::off_ledger(tick, "time-server", "broadcast", json!({ "label": label.as_str() })))
    }

    /// `None` until the label's tick has passed.
    pub fn key_for(&self, label: &TimeLabel) -> Option<&TimeBoundKey<S>> {
        self.published.get(label.as_str())
    }

    pub fn latest(&self) -> Option<&TimeBoundKey<S>> {
        self.latest.as_ref()
    }
}

/// What a bidder agent did, for tests and reports.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct BidderReport {
    pub agent: u32,
    pub bid: u64,
    pub cert_serial: Option<u32>,
    pub submission_address: Option<Address>,
    pub own_signature_verified: bool,
    /// Hex of the unblinded `c`; known only to this agent.
    pub commitment: Option<String>,
    /// Ledger or CA errors the agent ran into, in order.
    pub observed_errors: Vec<String>,
    pub failure: Option<String>,
}

/// Fresh key pair whose digest is used once as a sender address.
pub(super) fn one_time_address<S: PairingSuite>(suite: &S, rng: &mut ChaCha20Rng) -> Address {
    let x = suite.random_nonzero_scalar(rng);
    Address::from_public_key(&suite.g1_encode(&suite.g1_mul(&x, &suite.g1_generator())))
}

#[derive(Debug)]
pub struct BidderAgent<S: PairingSuite> {
    suite: S,
    hash: SigHash,
    identity: BidderIdentity<S>,
    rng: ChaCha20Rng,
    cert: Option<Certificate<S>>,
    factors: Option<BlindingFactors<S>>,
    request: Option<BlindRequest<S>>,
    signature: Option<BlindSignature<S>>,
    /// Sends a second signature request right after the first.
    pub double_request: bool,
    pub report: BidderReport,
}

impl<S: PairingSuite> BidderAgent<S> {
    pub fn new(suite: S, hash: SigHash, agent: u32, bid: u64, seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let identity = BidderIdentity::generate(&suite, format!("bidder-{agent}"), &mut rng);
        BidderAgent {
            suite,
            hash,
            identity,
            rng,
            cert: None,
            factors: None,
            request: None,
            signature: None,
            double_request: false,
            report: BidderReport {
                agent,
                bid,
                cert_serial: None,
                submission_address: None,
                own_signature_verified: false,
                commitment: None,
                observed_errors: Vec::new(),
                failure: None,
            },
        }
    }

    pub fn actor(&self) -> String {
        format!("bidder/{}", self.report.agent)
    }

    pub fn cert(&self) -> Option<&Certificate<S>> {
        self.cert.as_ref()
    }

    fn halted(&self) -> bool {
        self.report.failure.is_some()
    }

    fn fail(&mut self, reason: String) {
        self.report.observed_errors.push(reason.clone());
        self.report.failure.get_or_insert(reason);
    }

    /// Off-ledger enrolment with the CA.
    pub fn register(&mut self, ca: &mut CertificateAuthority<S>, tick: u64) -> TraceEvent {
        match ca.ca_register(tick, &self.identity.id, &self.identity.public, &mut self.rng) {
            Ok(cert) => {
                self.report.cert_serial = Some(cert.serial);
                self.cert = Some(cert);
                TraceEvent::off_ledger(tick, self.actor(), "register", json!({ "ok": true }))
            }
            Err(e) => {
                self.fail(e.to_string());
                TraceEvent::off_ledger(tick, self.actor(), "register", json!({ "ok": false, "error": e.to_string() }))
            }
        }
    }

    /// Blinds the bid against the session point `y` and builds the
    /// contract-1 request.
    pub fn prepare_request(&mut self, y: &S::G1, signer: &S::G1) -> Option<TxRequest> {
        if self.halted() {
            return None;
        }
        let cert = self.cert.as_ref()?;
        let cert_bytes = cert.to_bytes(&self.suite);
        let factors = BlindingFactors::random(&self.suite, &mut self.rng);
        let request = match blindsig::blind(&self.suite, self.hash, &bid_message(self.report.bid), y, signer, &factors) {
            Ok(r) => r,
            Err(e) => {
                self.fail(e.to_string());
                return None;
            }
        };
        let payload =
            Payload::RequestSignature { cert: Bytes(cert_bytes), c_prime: Bytes(self.suite.scalar_encode(&request.c_prime)) };
        self.factors = Some(factors);
        self.request = Some(request);
        Some(TxRequest::new(one_time_address(&self.suite, &mut self.rng), Target::Contract1, payload))
    }

    /// A second request for the same certificate, blinding a lower bid.
    pub fn prepare_repeat_request(&mut self, y: &S::G1, signer: &S::G1) -> Option<TxRequest> {
        let cert = self.cert.as_ref()?;
        let cert_bytes = cert.to_bytes(&self.suite);
        let factors = BlindingFactors::random(&self.suite, &mut self.rng);
        let cheaper = self.report.bid.saturating_sub(1);
        let request = blindsig::blind(&self.suite, self.hash, &bid_message(cheaper), y, signer, &factors).ok()?;
        let payload =
            Payload::RequestSignature { cert: Bytes(cert_bytes), c_prime: Bytes(self.suite.scalar_encode(&request.c_prime)) };
        Some(TxRequest::new(one_time_address(&self.suite, &mut self.rng), Target::Contract1, payload))
    }

    pub fn observe(&mut self, receipt: &Receipt) {
        if let Some(e) = &receipt.error {
            self.report.observed_errors.push(e.clone());
        }
    }

    pub fn observe_request(&mut self, receipt: &Receipt) {
        if let Some(e) = &receipt.error {
            self.fail(e.clone());
        }
    }

    /// Reads the posted `s'` from contract-1, unblinds and checks the result.
    pub fn collect_signature(&mut self, posted: Option<&Bytes>, signer: &S::G1) {
        if self.halted() {
            return;
        }
        let (Some(factors), Some(request)) = (&self.factors, &self.request) else {
            return;
        };
        let Some(s_prime) = posted.and_then(|b| self.suite.scalar_decode(&b.0).ok()) else {
            self.fail("no signature posted".into());
            return;
        };
        let sig = BlindSignature { c: request.c, s: blindsig::unblind(&self.suite, &s_prime, factors) };
        if blindsig::verify(&self.suite, self.hash, &bid_message(self.report.bid), &sig, signer) {
            self.report.own_signature_verified = true;
            self.report.commitment = Some(hex::encode(self.suite.scalar_encode(&sig.c)));
            self.signature = Some(sig);
        } else {
            self.fail("unblinded signature does not verify".into());
        }
    }

    /// Encrypts `(c, s) || b` to the release label under contract-2's key.
    pub fn prepare_submission(
        &mut self,
        ts: &TimeServerPublic<S>,
        recipient: &TrePublicKey<S>,
        label: &TimeLabel,
    ) -> Option<TxRequest> {
        if self.halted() {
            return None;
        }
        let signature = self.signature?;
        let submission = Submission { signature, bid: self.report.bid };
        let ct = match tre::tre_encrypt(&self.suite, ts, recipient, label, &submission.to_plaintext(&self.suite), &mut self.rng)
        {
            Ok(ct) => ct,
            Err(e) => {
                self.fail(e.to_string());
                return None;
            }
        };
        let address = one_time_address(&self.suite, &mut self.rng);
        self.report.submission_address = Some(address);
        Some(TxRequest::new(address, Target::Contract2, Payload::SubmitBid { esub: Bytes(ct.to_bytes(&self.suite)) }))
    }
}

/// One decryption attempt on a stored submission.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Opening {
    index: u32,
    /// Well-formed `(c, s) || b`, signature not yet checked.
    parsed: Option<(Bytes, Bytes, u64)>,
    recovered: bool,
}

/// Holds contract-1's signing key and contract-2's TRE secret.
#[derive(Debug)]
pub struct Auctioneer<S: PairingSuite> {
    suite: S,
    hash: SigHash,
    pub address: Address,
    keys: ContractKeys<S>,
    ts: TimeServerPublic<S>,
    release_label: TimeLabel,
    sessions: BTreeMap<u32, SignerSession<S>>,
    rng: ChaCha20Rng,
}

pub const AUCTIONEER: &str = "auctioneer";

impl<S: PairingSuite> Auctioneer<S> {
    pub fn new(
        suite: S,
        hash: SigHash,
        address: Address,
        keys: ContractKeys<S>,
        ts: TimeServerPublic<S>,
        release_label: TimeLabel,
        seed: u64,
    ) -> Self {
        Auctioneer {
            suite,
            hash,
            address,
            keys,
            ts,
            release_label,
            sessions: BTreeMap::new(),
            rng: ChaCha20Rng::seed_from_u64(seed),
        }
    }

    pub fn signer_public(&self) -> S::G1 {
        self.keys.contract1_sig.public
    }

    pub fn tre_public(&self) -> TrePublicKey<S> {
        self.keys.contract2_tre.public
    }

    /// Opens a signing session for a certificate holder and hands out `Y`.
    /// A holder gets one session; asking again returns the same `Y`.
    pub fn offer_session(&mut self, cert_serial: u32, tick: u64) -> (S::G1, TraceEvent) {
        let suite = self.suite;
        let rng = &mut self.rng;
        let session = self.sessions.entry(cert_serial).or_insert_with(|| blindsig::session_init(&suite, rng));
        let event = TraceEvent::off_ledger(tick, AUCTIONEER, "offer_session", json!({ "cert_serial": cert_serial }));
        (session.y, event)
    }

    /// Signs every pending request on contract-1 with that holder's session.
    pub fn sign_round(&mut self, ledger: &LedgerHandle<S>) -> (usize, Vec<TraceEvent>) {
        let tick = ledger.read(|l| l.tick());
        let pending: Vec<(u32, Bytes)> = ledger.read(|l| {
            l.state()
                .list1
                .values()
                .filter(|e| e.bid_flag == 0)
                .filter_map(|e| e.blinded_request.clone().map(|c| (e.cert_serial, c)))
                .collect()
        });
        let mut events = Vec::new();
        let mut signed = 0;
        for (serial, c_prime) in pending {
            let skip = |reason: String| {
                TraceEvent::off_ledger(tick, AUCTIONEER, "skip_request", json!({ "cert_serial": serial, "reason": reason }))
            };
            let Some(session) = self.sessions.remove(&serial) else {
                events.push(skip("no session offered".into()));
                continue;
            };
            let s_prime = self
                .suite
                .scalar_decode(&c_prime.0)
                .map_err(|e| e.to_string())
                .and_then(|c| blindsig::sign(&self.suite, &self.keys.contract1_sig, &session, &c).map_err(|e| e.to_string()));
            let s_prime = match s_prime {
                Ok(s) => s,
                Err(reason) => {
                    events.push(skip(reason));
                    continue;
                }
            };
            let receipt = ledger.submit(TxRequest::new(
                self.address,
                Target::Contract1,
                Payload::PostSignature { cert_serial: serial, s_prime: Bytes(self.suite.scalar_encode(&s_prime)) },
            ));
            if receipt.accepted {
                signed += 1;
            }
            let y = hex::encode(self.suite.g1_encode(&session.y));
            events.push(TraceEvent::on_ledger(
                AUCTIONEER,
                "post_signature",
                &receipt,
                json!({ "cert_serial": serial, "y": y }),
            ));
        }
        (signed, events)
    }

    fn open(&self, index: u32, esub: &Bytes, key: &TimeBoundKey<S>, checked: bool) -> Opening {
        let signer = self.keys.contract1_sig.public;
        let a = self.keys.contract2_tre.secret();
        let parsed = TreCiphertext::from_bytes(&self.suite, &esub.0).ok().and_then(|ct| {
            let pt = if checked {
                tre::tre_decrypt(&self.suite, &self.ts, &ct, a, key).ok()?
            } else {
                tre::decrypt_with_key(&self.suite, &ct, a, &key.key)
            };
            Submission::from_plaintext(&self.suite, &pt)
        });
        let recovered = parsed.as_ref().is_some_and(|sub| {
            blindsig::verify(&self.suite, self.hash, &bid_message(sub.bid), &sub.signature, &signer)
        });
        let parsed = parsed.map(|sub| {
            (Bytes(self.suite.scalar_encode(&sub.signature.c)), Bytes(self.suite.scalar_encode(&sub.signature.s)), sub.bid)
        });
        Opening { index, parsed, recovered }
    }

    fn stored(ledger: &LedgerHandle<S>) -> Vec<Bytes> {
        ledger.read(|l| l.state().submissions.iter().map(|s| s.esub.clone()).collect())
    }

    /// Tries to open every stored submission with whatever key is current,
    /// skipping the label check. Used by the early-decryptor scenario.
    pub fn peek(&self, tick: u64, key: &TimeBoundKey<S>, ledger: &LedgerHandle<S>) -> Vec<TraceEvent> {
        let stored = Self::stored(ledger);
        let openings: Vec<Opening> =
            stored.par_iter().enumerate().map(|(i, esub)| self.open(i as u32, esub, key, false)).collect();
        openings
            .into_iter()
            .map(|o| {
                TraceEvent::off_ledger(
                    tick,
                    "early-decryptor",
                    "decrypt",
                    json!({
                        "submission_index": o.index,
                        "key_label": key.label.as_str(),
                        "target_label": self.release_label.as_str(),
                        "recovered": o.recovered,
                    }),
                )
            })
            .collect()
    }

    /// Opens all submissions with the release key, recomputes the winner and
    /// publishes it to contract-2.
    pub fn tally(&self, tbk: &TimeBoundKey<S>, ledger: &LedgerHandle<S>) -> Result<(Receipt, Vec<TraceEvent>), AuctionError> {
        if tbk.label != self.release_label || !tre::verify_time_key(&self.suite, &self.ts, tbk) {
            return Err(AuctionError::InvalidTimeBoundKey(tbk.label.to_string()));
        }
        let tick = ledger.read(|l| l.tick());
        let stored = Self::stored(ledger);
        let openings: Vec<Opening> =
            stored.par_iter().enumerate().map(|(i, esub)| self.open(i as u32, esub, tbk, true)).collect();

        let mut events = Vec::with_capacity(openings.len() + 1);
        let mut opened = Vec::new();
        let mut unopenable = Vec::new();
        for o in &openings {
            events.push(TraceEvent::off_ledger(
                tick,
                AUCTIONEER,
                "decrypt",
                json!({
                    "submission_index": o.index,
                    "key_label": tbk.label.as_str(),
                    "target_label": self.release_label.as_str(),
                    "recovered": o.recovered,
                }),
            ));
            match &o.parsed {
                Some((c, s, bid)) => {
                    opened.push(OpenedBid { submission_index: o.index, c: c.clone(), s: s.clone(), bid: *bid })
                }
                None => unopenable.push(o.index),
            }
        }
        let t = tally(&self.suite, self.hash, &self.keys.contract1_sig.public, stored.len() as u32, &opened);
        let claim = match t.winner {
            Some((i, bid)) => {
                ResultClaim { status: ResultStatus::Completed, winner_submission_index: Some(i), winning_bid: Some(bid) }
            }
            None => ResultClaim { status: ResultStatus::Void, winner_submission_index: None, winning_bid: None },
        };
        let detail = json!({
            "opened": opened.len(),
            "unopenable": unopenable.len(),
            "discarded": t.discarded.len(),
            "status": claim.status,
        });
        let receipt = ledger.submit(TxRequest::new(
            self.address,
            Target::Contract2,
            Payload::PublishResult { opened, unopenable, claim },
        ));
        events.push(TraceEvent::on_ledger(AUCTIONEER, "publish_result", &receipt, detail));
        Ok((receipt, events))
    }
}
