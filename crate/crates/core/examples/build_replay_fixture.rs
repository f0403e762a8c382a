//! Regenerates a replay store for a campaign config by answering every
//! prompt with the deterministic mock endpoint.
//!
//! cargo run -p cdbench --example build_replay_fixture -- tests/fixtures/desk.toml

use std::path::PathBuf;
use std::sync::Arc;

use cdbench::campaign::{Campaign, CampaignConfig, Overrides};
use cdbench::predictions::QueryMode;

#[path = "../tests/common/mock.rs"]
mod mock;

fn main() -> cdbench::Result<()> {
    let config = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("crates/core/tests/fixtures/desk.toml"));
    let scratch = std::env::temp_dir().join(format!("cdbench-fixture-{}", std::process::id()));
    let overrides = Overrides {
        mode: Some(QueryMode::Record),
        out_dir: Some(scratch.clone()),
        ..Overrides::default()
    };
    let cfg = CampaignConfig::load(&config, &overrides)?;
    let store = cfg.query.replay_store.clone();
    if store.exists() {
        std::fs::remove_file(&store).map_err(|e| cdbench::Error::io(&store, e))?;
    }
    let campaign = Campaign::with_transport(cfg, Arc::new(mock::MockTransport))?;
    campaign.generate()?;
    let outcome = campaign.query()?;
    println!(
        "{} responses recorded to {}, {} quarantined",
        outcome.records.len(),
        store.display(),
        outcome.quarantined.len()
    );
    std::fs::remove_dir_all(&scratch).map_err(|e| cdbench::Error::io(&scratch, e))?;
    Ok(())
}
