use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::extract::{Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use tokio::net::TcpListener;
use tower::limit::ConcurrencyLimitLayer;
use tower_http::timeout::TimeoutLayer;
use tower_http::trace::TraceLayer;

use rankroute::{Error, Prompt};

use crate::api::{render, AggregateRequest, Engine, PromptInput, RouteRequest};

pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Remote(_) => StatusCode::BAD_GATEWAY,
            Error::Infeasible { .. }
            | Error::EmptyInput(_)
            | Error::InvalidParameter(_)
            | Error::MissingLeaderboard(_)
            | Error::UnknownModel(_)
            | Error::Parse { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError {
            status,
            message: e.to_string(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = render(&serde_json::json!({ "error": self.message }));
        (
            self.status,
            [(header::CONTENT_TYPE, "application/json")],
            body,
        )
            .into_response()
    }
}

fn json_body(body: String) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], body).into_response()
}

/// Runs provider work off the async workers; remote providers block.
async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    F: FnOnce() -> rankroute::Result<T> + Send + 'static,
    T: Send + 'static,
{
    match tokio::task::spawn_blocking(f).await {
        Ok(r) => r.map_err(ApiError::from),
        Err(e) => Err(ApiError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            message: format!("worker failed: {e}"),
        }),
    }
}

async fn route_handler(
    State(engine): State<Arc<Engine>>,
    Json(req): Json<RouteRequest>,
) -> Result<Response, ApiError> {
    let start = Instant::now();
    let hash = Prompt::new(req.prompt.prompt.clone())
        .map(|p| p.text_hash())
        .unwrap_or_default();
    let e = engine.clone();
    let resp = blocking(move || e.route(&req)).await?;
    tracing::info!(
        prompt_hash = %hash,
        model = %resp.model,
        pi = ?resp.policy.iter().map(|p| p.probability).collect::<Vec<_>>(),
        win_rate = resp.predicted_win_rate,
        coefficient = resp.predicted_coefficient,
        latency_us = start.elapsed().as_micros() as u64,
        "routed"
    );
    Ok(json_body(render(&resp)))
}

async fn aggregate_handler(
    State(engine): State<Arc<Engine>>,
    Json(req): Json<AggregateRequest>,
) -> Result<Response, ApiError> {
    let start = Instant::now();
    let n = req.prompts.len();
    let doc = blocking(move || engine.aggregate(&req.prompts)).await?;
    tracing::info!(
        prompts = n,
        latency_us = start.elapsed().as_micros() as u64,
        "aggregated"
    );
    Ok(json_body(render(&doc)))
}

#[derive(Deserialize)]
struct LeaderboardQuery {
    prompt: String,
    #[serde(default)]
    prompt_id: Option<String>,
    /// Comma-separated category path.
    #[serde(default)]
    category: Option<String>,
}

async fn leaderboard_handler(
    State(engine): State<Arc<Engine>>,
    Query(q): Query<LeaderboardQuery>,
) -> Result<Response, ApiError> {
    let input = PromptInput {
        prompt: q.prompt,
        prompt_id: q.prompt_id,
        category_path: q
            .category
            .map(|c| c.split(',').map(str::to_string).collect()),
    };
    let doc = blocking(move || engine.leaderboard(&input)).await?;
    Ok(json_body(render(&doc)))
}

async fn models_handler(State(engine): State<Arc<Engine>>) -> Response {
    let mut body = engine.catalog.to_json_string();
    body.push('\n');
    json_body(body)
}

async fn health() -> &'static str {
    "ok"
}

pub fn app(engine: Arc<Engine>, max_concurrent: usize, timeout: Duration) -> Router {
    Router::new()
        .route("/v1/route", post(route_handler))
        .route("/v1/leaderboard/aggregate", post(aggregate_handler))
        .route("/v1/leaderboard", get(leaderboard_handler))
        .route("/v1/models", get(models_handler))
        .route("/healthz", get(health))
        .with_state(engine)
        .layer(TimeoutLayer::with_status_code(
            StatusCode::SERVICE_UNAVAILABLE,
            timeout,
        ))
        .layer(ConcurrencyLimitLayer::new(max_concurrent))
        .layer(TraceLayer::new_for_http())
}

/// Serves until `shutdown` resolves, then drains in-flight requests.
pub async fn run<F>(listener: TcpListener, router: Router, shutdown: F) -> std::io::Result<()>
where
    F: std::future::Future<Output = ()> + Send + 'static,
{
    axum::serve(listener, router)
        .with_graceful_shutdown(shutdown)
        .await
}

/// Resolves on Ctrl-C or SIGTERM.
pub async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {}
        _ = term => {}
    }
    tracing::info!("shutting down");
}
