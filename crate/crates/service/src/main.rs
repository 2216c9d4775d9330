use std::path::PathBuf;

use anyhow::Context;
use cbo_service::{app, ServiceConfig};
use clap::Parser;

#[derive(Parser, Debug)]
#[command(name = "cbo-service", version, about = "HTTP tiles, verdicts, rays and centers")]
struct Args {
    /// Address to bind, `HOST:PORT`.
    #[arg(long)]
    listen: Option<String>,
    /// Flat `key = value` config file; flags override it.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    let mut config = ServiceConfig::default();
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        config.apply(&text).with_context(|| format!("in {}", path.display()))?;
    }
    if let Some(listen) = args.listen {
        config.listen = listen;
    }
    if let Some(n) = args.workers {
        config.workers = n.max(1);
    }
    eprintln!("# cbo-service");
    for (key, value) in serde_json::to_value(&config)?.as_object().unwrap() {
        eprintln!("{} = {}", key.replace('_', "-"), value.as_str().map_or(value.to_string(), str::to_string));
    }
    let listener = tokio::net::TcpListener::bind(&config.listen)
        .await
        .with_context(|| format!("binding {}", config.listen))?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, app(config)).await?;
    Ok(())
}
