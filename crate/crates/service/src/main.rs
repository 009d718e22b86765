use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use securexam_service::{router, spawn_sweeper, Platform, ServiceConfig, SystemClock};

fn usage() -> ExitCode {
    eprintln!("usage: securexam-server [--config FILE]");
    ExitCode::from(2)
}

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .init();

    let mut args = std::env::args().skip(1);
    let mut config_path: Option<PathBuf> = std::env::var_os("SECUREXAM_CONFIG").map(PathBuf::from);
    while let Some(arg) = args.next() {
        match arg.as_str() {
            "--config" => match args.next() {
                Some(p) => config_path = Some(p.into()),
                None => return usage(),
            },
            "--help" => {
                usage();
                return ExitCode::SUCCESS;
            }
            _ => return usage(),
        }
    }

    let config = match ServiceConfig::load(config_path.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config: {e}");
            return ExitCode::from(2);
        }
    };
    let addr = format!("{}:{}", config.bind, config.port);
    let sweep = Duration::from_millis(config.sweep_interval_ms.max(50));
    let platform = match Platform::open(config, Arc::new(SystemClock)) {
        Ok(p) => Arc::new(p),
        Err(e) => {
            eprintln!("startup: {e}");
            return ExitCode::FAILURE;
        }
    };
    spawn_sweeper(Arc::clone(&platform), sweep);

    let listener = match tokio::net::TcpListener::bind(&addr).await {
        Ok(l) => l,
        Err(e) => {
            eprintln!("bind {addr}: {e}");
            return ExitCode::FAILURE;
        }
    };
    tracing::info!(%addr, "listening");
    let shutdown = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    if let Err(e) = axum::serve(listener, router(platform)).with_graceful_shutdown(shutdown).await {
        eprintln!("server: {e}");
        return ExitCode::FAILURE;
    }
    ExitCode::SUCCESS
}
