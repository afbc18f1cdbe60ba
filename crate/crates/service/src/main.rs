use std::sync::Arc;

use easg_service::{router, HttpTransport, LlmClient, Service, ServiceConfig, SystemClock};

#[tokio::main]
async fn main() {
    if let Err(e) = run().await {
        eprintln!("easg-server: {e}");
        std::process::exit(1);
    }
}

async fn run() -> Result<(), Box<dyn std::error::Error>> {
    let config = ServiceConfig::from_env()?;
    let llm = match &config.llm.endpoint {
        Some(_) => Some(LlmClient::new(
            Box::new(HttpTransport::new(&config.llm)?),
            config.llm.clone(),
        )),
        None => None,
    };
    let bind = config.bind;
    let svc = Service::open_with(config, Arc::new(SystemClock), llm)?;
    eprintln!(
        "easg-server: {} events replayed from {}",
        svc.snapshot().last_seq,
        svc.log_path().display()
    );
    let listener = tokio::net::TcpListener::bind(bind).await?;
    eprintln!("easg-server: listening on {}", listener.local_addr()?);
    axum::serve(listener, router(Arc::new(svc)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
