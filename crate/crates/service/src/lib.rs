//! HTTP service over the assessment, explanation and study engines, backed by a
//! plain-file store.

mod api;
mod error;
mod records;
mod state;
pub mod store;

use std::net::SocketAddr;

pub use api::router;
pub use error::{ApiError, ApiResult, ErrorBody};
pub use records::{content_id, JobKind, JobRecord, JobState, ModelRecord, ModelSummary, SessionRecord, SpaceRecord};
pub use state::{
    AppState, AssessmentInput, BuildSpaceRequest, CreateDataset, CreateSessions, DatasetSummary, ExplainQuery,
    PredictRequest, ServiceConfig, SessionCase, SessionReport, SessionView, TrainRequest, DEFAULT_WORKERS,
};

/// Environment variable that overrides the store root.
pub const STORE_ENV: &str = "REHABXAI_STORE";

/// Serves on an already-bound listener until the future is dropped or the
/// server fails.
pub async fn serve_on(listener: tokio::net::TcpListener, state: AppState) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}

/// Binds `127.0.0.1:{port}` and serves until Ctrl-C.
pub async fn serve(config: ServiceConfig) -> std::io::Result<()> {
    let state = AppState::new(&config).map_err(|e| std::io::Error::other(e.message))?;
    let listener = tokio::net::TcpListener::bind(SocketAddr::from(([127, 0, 0, 1], config.port))).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
