use crate::Failure;
use anyhow::{anyhow, Context};
use std::net::IpAddr;
use std::path::PathBuf;
use wheelsim_service::{serve, LevelRegistry, ServiceConfig};

#[derive(clap::Args)]
pub struct Args {
    #[arg(long, default_value_t = 8032)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: IpAddr,
    #[arg(long, env = "WHEELSIM_LEVEL_DIR", default_value = "levels")]
    level_dir: PathBuf,
    /// Directory of static files (the browser client) served at `/`.
    #[arg(long)]
    static_dir: Option<PathBuf>,
}

pub fn run(args: Args) -> Result<u8, Failure> {
    let (registry, skipped) = LevelRegistry::load_dir(&args.level_dir)
        .with_context(|| format!("cannot load levels from {}", args.level_dir.display()))
        .map_err(Failure::input)?;
    for e in &skipped {
        tracing::warn!("skipping level: {e}");
    }
    if registry.is_empty() {
        return Err(Failure::input(anyhow!(
            "no levels in {}",
            args.level_dir.display()
        )));
    }
    let config = ServiceConfig {
        static_dir: args.static_dir,
        ..ServiceConfig::default()
    };

    let rt = tokio::runtime::Runtime::new().map_err(Failure::runtime)?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind((args.host, args.port))
            .await
            .with_context(|| format!("cannot listen on {}:{}", args.host, args.port))
            .map_err(Failure::input)?;
        let addr = listener.local_addr().map_err(Failure::runtime)?;
        tracing::info!(levels = registry.len(), "listening on http://{addr}");
        println!("listening on http://{addr}");
        serve(listener, registry, config, async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(Failure::runtime)
    })?;
    Ok(0)
}
