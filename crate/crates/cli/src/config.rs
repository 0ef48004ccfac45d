use std::path::{Path, PathBuf};

use anyhow::Context;
use sealedbid_core::auction::{AuctionConfig, BidRange, Scenario};
use sealedbid_core::blindsig::SigHash;
use sealedbid_core::chain::PhaseSchedule;
use sealedbid_core::groups::BackendId;
use serde::{Deserialize, Serialize};

/// Mock order used when a mock run does not name one. Large enough that
/// honest challenges never collide.
pub const DEFAULT_MOCK_ORDER: u64 = (1 << 61) - 1;

/// Everything `run` needs: the auction parameters plus artifact plumbing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub auction_id: String,
    pub deposit: u64,
    pub schedule: PhaseSchedule,
    pub release_tick: u64,
    pub bidder_count: u32,
    pub bid_range: BidRange,
    pub rng_seed: u64,
    #[serde(default)]
    pub sig_hash: SigHash,
    #[serde(default)]
    pub scenario: Scenario,
    #[serde(default = "default_backend")]
    pub backend: BackendId,
    #[serde(default)]
    pub mock_order: Option<u64>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

fn default_backend() -> BackendId {
    BackendId::Production
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    pub fn auction(&self) -> AuctionConfig {
        AuctionConfig {
            auction_id: self.auction_id.clone(),
            deposit: self.deposit,
            schedule: self.schedule,
            release_tick: self.release_tick,
            bidder_count: self.bidder_count,
            bid_range: self.bid_range,
            rng_seed: self.rng_seed,
            sig_hash: self.sig_hash,
            scenario: self.scenario,
        }
    }

    pub fn mock_order(&self) -> Option<u64> {
        match self.backend {
            BackendId::Production => None,
            BackendId::Mock => Some(self.mock_order.unwrap_or(DEFAULT_MOCK_ORDER)),
        }
    }
}
