use std::sync::Arc;

use parking_lot::RwLock;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::contracts::{execute, Context};
use super::{
    Address, Bytes, ChainState, ContractEvent, Genesis, LedgerError, LedgerTransaction, Payload, Target,
};
use crate::groups::{AnySuite, PairingSuite};

/// A transaction before the sequencer stamps it with `seq` and `tick`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TxRequest {
    pub sender: Address,
    pub target: Target,
    pub payload: Payload,
    pub value: u64,
}

impl TxRequest {
    pub fn new(sender: Address, target: Target, payload: Payload) -> Self {
        TxRequest { sender, target, payload, value: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Receipt {
    pub seq: u64,
    pub tick: u64,
    pub accepted: bool,
    pub error: Option<String>,
    pub events: Vec<ContractEvent>,
}

/// One line of a ledger dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum DumpLine {
    Genesis(Genesis),
    Tx(LedgerTransaction),
    StateHash { hash: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedDump {
    pub genesis: Genesis,
    pub txs: Vec<LedgerTransaction>,
    pub embedded_hash: Option<String>,
}

impl ParsedDump {
    /// Genesis first, then transactions, then an optional trailing state hash.
    pub fn parse(text: &str) -> Result<Self, LedgerError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let parse_line = |no: usize, l: &str| {
            serde_json::from_str::<DumpLine>(l).map_err(|e| LedgerError::CorruptDump(format!("line {}: {e}", no + 1)))
        };
        let genesis = match lines.next() {
            None => return Err(LedgerError::CorruptDump("empty log".into())),
            Some((no, l)) => match parse_line(no, l)? {
                DumpLine::Genesis(g) => g,
                _ => return Err(LedgerError::CorruptDump("first record must be genesis".into())),
            },
        };
        let mut txs = Vec::new();
        let mut embedded_hash = None;
        for (no, l) in lines {
            if embedded_hash.is_some() {
                return Err(LedgerError::CorruptDump(format!("line {}: record after state hash", no + 1)));
            }
            match parse_line(no, l)? {
                DumpLine::Tx(tx) => txs.push(tx),
                DumpLine::StateHash { hash } => embedded_hash = Some(hash),
                DumpLine::Genesis(_) => {
                    return Err(LedgerError::CorruptDump(format!("line {}: second genesis", no + 1)))
                }
            }
        }
        Ok(ParsedDump { genesis, txs, embedded_hash })
    }
}

/// The sequencer and the state it owns.
#[derive(Debug)]
pub struct Ledger<S: PairingSuite> {
    ctx: Context<S>,
    state: ChainState,
    log: Vec<LedgerTransaction>,
    receipts: Vec<Receipt>,
    clock: u64,
}

impl<S: PairingSuite> Ledger<S> {
    pub fn new(suite: S, genesis: Genesis) -> Result<Self, LedgerError> {
        let ctx = Context::new(suite, genesis)?;
        let state = ctx.genesis.initial_state();
        Ok(Ledger { ctx, state, log: Vec::new(), receipts: Vec::new(), clock: 0 })
    }

    pub fn suite(&self) -> &S {
        &self.ctx.suite
    }

    pub fn genesis(&self) -> &Genesis {
        &self.ctx.genesis
    }

    pub fn state(&self) -> &ChainState {
        &self.state
    }

    pub fn state_hash(&self) -> [u8; 32] {
        self.state.hash()
    }

    pub fn log(&self) -> &[LedgerTransaction] {
        &self.log
    }

    pub fn receipts(&self) -> &[Receipt] {
        &self.receipts
    }

    pub fn tick(&self) -> u64 {
        self.clock
    }

    /// Moves the sequencer clock forward. Earlier ticks are ignored.
    pub fn advance_to(&mut self, tick: u64) {
        self.clock = self.clock.max(tick);
    }

    /// Stamps and applies a transaction at the current tick.
    pub fn submit(&mut self, req: TxRequest) -> Receipt {
        let tx = LedgerTransaction {
            seq: self.state.next_seq,
            tick: self.clock.max(self.state.last_tick),
            sender: req.sender,
            target: req.target,
            payload: req.payload,
            value: req.value,
        };
        self.apply(tx).expect("sequencer-stamped transactions are in order")
    }

    /// Applies a pre-stamped transaction. Rejected transactions are still
    /// appended; only sequencing violations are errors.
    pub fn apply(&mut self, tx: LedgerTransaction) -> Result<Receipt, LedgerError> {
        if tx.seq != self.state.next_seq {
            return Err(LedgerError::SeqOutOfOrder { expected: self.state.next_seq, got: tx.seq });
        }
        if tx.tick < self.state.last_tick {
            return Err(LedgerError::TickRegression { seq: tx.seq, tick: tx.tick, last: self.state.last_tick });
        }
        let mut next = self.state.clone();
        let outcome = execute(&self.ctx, &mut next, &tx);
        let (accepted, error, events) = match outcome {
            Ok(events) => {
                self.state = next;
                (true, None, events)
            }
            Err(e) => (false, Some(e.to_string()), Vec::new()),
        };
        let mut h = Sha256::new();
        h.update(&self.state.log_head.0);
        h.update(serde_json::to_vec(&tx).expect("tx serializes"));
        h.update([accepted as u8]);
        self.state.log_head = Bytes(h.finalize().to_vec());
        self.state.next_seq += 1;
        self.state.last_tick = tx.tick;
        self.clock = self.clock.max(tx.tick);
        let receipt = Receipt { seq: tx.seq, tick: tx.tick, accepted, error, events };
        log::debug!("seq {} {} accepted={}", tx.seq, tx.payload.name(), accepted);
        self.log.push(tx);
        self.receipts.push(receipt.clone());
        Ok(receipt)
    }

    pub fn dump_lines(&self) -> Vec<DumpLine> {
        let mut out = Vec::with_capacity(self.log.len() + 2);
        out.push(DumpLine::Genesis(self.ctx.genesis.clone()));
        out.extend(self.log.iter().cloned().map(DumpLine::Tx));
        out.push(DumpLine::StateHash { hash: hex::encode(self.state_hash()) });
        out
    }

    /// Line-delimited JSON: genesis, transactions, state hash.
    pub fn dump_jsonl(&self) -> String {
        let mut out = String::new();
        for line in self.dump_lines() {
            out.push_str(&serde_json::to_string(&line).expect("dump line serializes"));
            out.push('\n');
        }
        out
    }
}

/// Re-applies `txs` from genesis and returns the final state hash.
pub fn replay<S: PairingSuite>(suite: S, genesis: &Genesis, txs: &[LedgerTransaction]) -> Result<[u8; 32], LedgerError> {
    let mut ledger = Ledger::new(suite, genesis.clone())?;
    for tx in txs {
        ledger.apply(tx.clone())?;
    }
    Ok(ledger.state_hash())
}

/// [`replay`] with the suite rebuilt from the genesis descriptor.
pub fn replay_any(genesis: &Genesis, txs: &[LedgerTransaction]) -> Result<[u8; 32], LedgerError> {
    let suite = AnySuite::from_descriptor(&genesis.suite).map_err(|e| LedgerError::Genesis(e.to_string()))?;
    match suite {
        AnySuite::Production(s) => replay(s, genesis, txs),
        AnySuite::Mock(s) => replay(s, genesis, txs),
    }
}

/// Shared ledger for concurrent producers. Writes go through one lock (the
/// sequencer); reads see a consistent snapshot at some seq.
#[derive(Debug)]
pub struct LedgerHandle<S: PairingSuite>(Arc<RwLock<Ledger<S>>>);

impl<S: PairingSuite> Clone for LedgerHandle<S> {
    fn clone(&self) -> Self {
        LedgerHandle(Arc::clone(&self.0))
    }
}

impl<S: PairingSuite> LedgerHandle<S> {
    pub fn new(ledger: Ledger<S>) -> Self {
        LedgerHandle(Arc::new(RwLock::new(ledger)))
    }

    pub fn submit(&self, req: TxRequest) -> Receipt {
        self.0.write().submit(req)
    }

    pub fn advance_to(&self, tick: u64) {
        self.0.write().advance_to(tick)
    }

    /// The ledger, if this is the last handle.
    pub fn into_inner(self) -> Result<Ledger<S>, Self> {
        Arc::try_unwrap(self.0).map(RwLock::into_inner).map_err(LedgerHandle)
    }

    pub fn read<T>(&self, f: impl FnOnce(&Ledger<S>) -> T) -> T {
        f(&self.0.read())
    }
}
