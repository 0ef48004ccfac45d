use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::chain::Receipt;

/// One step taken by an agent. `seq` is set when the step was a ledger
/// transaction; everything else happened off-ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub tick: u64,
    pub actor: String,
    pub action: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seq: Option<u64>,
    pub detail: Value,
}

impl TraceEvent {
    pub fn off_ledger(tick: u64, actor: impl Into<String>, action: &str, detail: Value) -> Self {
        TraceEvent { tick, actor: actor.into(), action: action.to_string(), seq: None, detail }
    }

    pub fn on_ledger(actor: impl Into<String>, action: &str, receipt: &Receipt, mut detail: Value) -> Self {
        if let Value::Object(map) = &mut detail {
            map.insert("accepted".into(), json!(receipt.accepted));
            if let Some(e) = &receipt.error {
                map.insert("error".into(), json!(e));
            }
        }
        TraceEvent {
            tick: receipt.tick,
            actor: actor.into(),
            action: action.to_string(),
            seq: Some(receipt.seq),
            detail,
        }
    }

    pub fn is_off_ledger(&self) -> bool {
        self.seq.is_none()
    }
}

pub fn trace_jsonl(events: &[TraceEvent]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&serde_json::to_string(e).expect("trace event serializes"));
        out.push('\n');
    }
    out
}

/// Decryption attempts found in a trace, checked against the broadcast of
/// the release label's key.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct FairnessReport {
    pub release_broadcast_position: Option<usize>,
    pub attempts: usize,
    /// Attempts that recovered a validly signed bid before the release key
    /// was broadcast.
    pub early_recoveries: usize,
    pub wrong_key_attempts: usize,
    /// Wrong-key attempts whose output nonetheless verified.
    pub wrong_key_recoveries: usize,
}

impl FairnessReport {
    pub fn holds(&self) -> bool {
        self.early_recoveries == 0 && self.wrong_key_recoveries == 0
    }
}

pub fn fairness_report(events: &[TraceEvent], release_label: &str) -> FairnessReport {
    let broadcast = events.iter().position(|e| {
        e.action == "broadcast" && e.detail.get("label").and_then(Value::as_str) == Some(release_label)
    });
    let mut report = FairnessReport { release_broadcast_position: broadcast, ..Default::default() };
    for (pos, e) in events.iter().enumerate().filter(|(_, e)| e.action == "decrypt") {
        report.attempts += 1;
        let recovered = e.detail.get("recovered").and_then(Value::as_bool).unwrap_or(false);
        if recovered && broadcast.map_or(true, |b| pos < b) {
            report.early_recoveries += 1;
        }
        let key_label = e.detail.get("key_label").and_then(Value::as_str);
        if key_label != Some(release_label) {
            report.wrong_key_attempts += 1;
            if recovered {
                report.wrong_key_recoveries += 1;
            }
        }
    }
    report
}
