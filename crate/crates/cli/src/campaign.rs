//! Listening-test campaign commands.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use clap::Args;
use listening_test::{build_campaign, Campaign, CampaignManifest, RatingLog, Service};
use serde_json::json;

use crate::failure::Failure;
use crate::{out_parent, Output};

#[derive(Args, Debug)]
pub struct BuildArgs {
    /// Campaign manifest JSON.
    #[arg(long)]
    manifest: PathBuf,
    /// Built campaign JSON (operator-side; contains system names).
    #[arg(long)]
    out: PathBuf,
    /// Override the manifest's seed.
    #[arg(long)]
    seed: Option<u64>,
}

pub fn build(a: BuildArgs, out: Output) -> Result<(), Failure> {
    let (mut manifest, base) = CampaignManifest::load(&a.manifest)?;
    if let Some(seed) = a.seed {
        manifest.seed = seed;
    }
    let campaign = build_campaign(&manifest, &base)?;
    out_parent(&a.out)?;
    std::fs::write(&a.out, serde_json::to_string_pretty(&campaign).expect("campaign serializes"))
        .map_err(|e| Failure::runtime(format!("{}: {e}", a.out.display())))?;
    out.emit(
        json!({ "campaign": campaign.id, "trials": campaign.trials.len(), "out": a.out }),
        || format!("campaign {} with {} trials -> {}", campaign.id, campaign.trials.len(), a.out.display()),
    );
    Ok(())
}

fn load_campaign(path: &PathBuf) -> Result<Campaign, Failure> {
    let raw = std::fs::read_to_string(path).map_err(|e| Failure::runtime(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&raw).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    /// Built campaign JSON; repeat to serve several.
    #[arg(long = "campaign", required = true)]
    campaigns: Vec<PathBuf>,
    /// Append-only rating log (created if missing, replayed if present).
    #[arg(long)]
    log: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    /// Static files for the listener UI.
    #[arg(long)]
    ui: Option<PathBuf>,
}

pub fn serve(a: ServeArgs, out: Output) -> Result<(), Failure> {
    let campaigns = a.campaigns.iter().map(load_campaign).collect::<Result<Vec<_>, _>>()?;
    let ids: Vec<String> = campaigns.iter().map(|c| c.id.clone()).collect();
    let service = Service::open(campaigns, &a.log)?;
    let runtime = tokio::runtime::Runtime::new().map_err(Failure::runtime)?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(a.addr)
            .await
            .map_err(|e| Failure::runtime(format!("bind {}: {e}", a.addr)))?;
        let addr = listener.local_addr().map_err(Failure::runtime)?;
        out.emit(json!({ "listening": format!("http://{addr}"), "campaigns": ids }), || {
            format!("serving {} on http://{addr}", ids.join(", "))
        });
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        listening_test::http::serve(listener, Arc::new(Mutex::new(service)), a.ui, shutdown)
            .await
            .map_err(Failure::runtime)
    })
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    #[arg(long)]
    campaign: PathBuf,
    #[arg(long)]
    log: PathBuf,
    /// Write CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn report(a: ReportArgs, out: Output) -> Result<(), Failure> {
    let campaign = load_campaign(&a.campaign)?;
    let records = RatingLog::read(&a.log)?;
    let agg = listening_test::aggregate(&campaign, &records);
    let csv = agg.to_csv();
    if let Some(path) = &a.out {
        out_parent(path)?;
        std::fs::write(path, &csv).map_err(|e| Failure::runtime(format!("{}: {e}", path.display())))?;
    }
    out.emit(serde_json::to_value(&agg).expect("aggregate serializes"), || match &a.out {
        Some(path) => format!("report -> {}", path.display()),
        None => csv.trim_end().to_string(),
    });
    Ok(())
}
