//! JSON-over-HTTP interface: chat, operator console, reports, engine
//! inspection, devices, clock and monitoring.

use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Map, Value};

use crate::fabric::DeviceKind;
use crate::gateway::{Gateway, GatewayError};
use crate::nlu::Utterance;

/// Header naming the caller on device endpoints.
pub const PRINCIPAL_HEADER: &str = "x-principal";

type Shared = Arc<Gateway>;

pub struct ApiError(GatewayError);

impl<E: Into<GatewayError>> From<E> for ApiError {
    fn from(e: E) -> Self {
        ApiError(e.into())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let code = self.0.code();
        let status = match code {
            "NotFound" => StatusCode::NOT_FOUND,
            "Forbidden" => StatusCode::FORBIDDEN,
            "Conflict" | "NotConfigured" | "SchemaOrder" | "DuplicateSerial" => {
                StatusCode::CONFLICT
            }
            "DeviceOffline" => StatusCode::SERVICE_UNAVAILABLE,
            _ => StatusCode::BAD_REQUEST,
        };
        (
            status,
            Json(json!({ "error_code": code, "message": self.0.to_string() })),
        )
            .into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn bad(message: impl Into<String>) -> ApiError {
    ApiError(GatewayError::InvalidParameter(message.into()))
}

fn principal(headers: &HeaderMap) -> ApiResult<String> {
    headers
        .get(PRINCIPAL_HEADER)
        .and_then(|v| v.to_str().ok())
        .map(str::to_string)
        .ok_or_else(|| {
            ApiError(GatewayError::Forbidden(format!(
                "missing {PRINCIPAL_HEADER} header"
            )))
        })
}

pub fn router(gateway: Shared) -> Router {
    Router::new()
        .route("/api/sessions", post(open_session))
        .route("/api/sessions/{id}", get(session_info))
        .route(
            "/api/sessions/{id}/messages",
            post(send_message).get(list_messages),
        )
        .route("/api/sessions/{id}/contexts", get(session_contexts))
        .route("/api/operator/queue", get(operator_queue))
        .route("/api/operator/sessions/{id}/takeover", post(take_over))
        .route("/api/operator/sessions/{id}/reply", post(operator_reply))
        .route("/api/operator/sessions/{id}/release", post(release))
        .route("/api/operator/repair", post(repair))
        .route("/api/reports", post(create_report).get(list_reports))
        .route("/api/reports/{id}", get(get_report))
        .route("/api/help", get(help))
        .route("/api/recommendations", get(recommendations))
        .route("/api/engine/entities", get(engine_entities))
        .route("/api/engine/parse", get(engine_parse))
        .route("/devices", get(list_devices))
        .route("/devices/{serial}", get(get_device))
        .route("/devices/{serial}/actions", post(device_action))
        .route("/devices/{serial}/config", post(device_config))
        .route("/devices/{serial}/offline", post(device_offline))
        .route("/clock", get(clock))
        .route("/clock/advance", post(advance_clock))
        .route("/monitor/uptime/{serial}", get(uptime))
        .route("/monitor/report", get(monitor_report))
        .route("/monitor/alerts", get(alerts))
        .route("/monitor/intents", get(top_intents))
        .with_state(gateway)
}

// ---- chat -----------------------------------------------------------------

#[derive(Deserialize)]
struct OpenSession {
    principal: String,
}

async fn open_session(
    State(gw): State<Shared>,
    Json(body): Json<OpenSession>,
) -> ApiResult<impl IntoResponse> {
    let id = gw.open_session(&body.principal)?;
    Ok((StatusCode::CREATED, Json(json!({ "session_id": id }))))
}

async fn session_info(State(gw): State<Shared>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    Ok(Json(json!(gw.session_info(&id)?)))
}

#[derive(Deserialize)]
struct SendMessage {
    text: String,
}

async fn send_message(
    State(gw): State<Shared>,
    Path(id): Path<String>,
    Json(body): Json<SendMessage>,
) -> ApiResult<Json<Value>> {
    let messages = gw.handle_utterance(&id, &body.text)?;
    Ok(Json(json!({ "messages": messages })))
}

#[derive(Deserialize)]
struct Since {
    #[serde(default)]
    since: u64,
}

async fn list_messages(
    State(gw): State<Shared>,
    Path(id): Path<String>,
    Query(q): Query<Since>,
) -> ApiResult<Json<Value>> {
    Ok(Json(
        json!({ "messages": gw.messages_since(&id, q.since)? }),
    ))
}

async fn session_contexts(
    State(gw): State<Shared>,
    Path(id): Path<String>,
) -> ApiResult<Json<Value>> {
    Ok(Json(json!({ "contexts": gw.contexts(&id)? })))
}

// ---- operators --------------------------------------------------------------

#[derive(Deserialize)]
struct OperatorBody {
    operator: String,
    #[serde(default)]
    text: Option<String>,
}

async fn operator_queue(State(gw): State<Shared>) -> Json<Value> {
    Json(json!({ "queue": gw.operator_queue() }))
}

async fn take_over(
    State(gw): State<Shared>,
    Path(id): Path<String>,
    Json(body): Json<OperatorBody>,
) -> ApiResult<Json<Value>> {
    gw.take_over(&body.operator, &id)?;
    Ok(Json(json!(gw.session_info(&id)?)))
}

async fn operator_reply(
    State(gw): State<Shared>,
    Path(id): Path<String>,
    Json(body): Json<OperatorBody>,
) -> ApiResult<Json<Value>> {
    let text = body.text.ok_or_else(|| bad("text is required"))?;
    Ok(Json(json!(gw.operator_send(&body.operator, &id, &text)?)))
}

async fn release(
    State(gw): State<Shared>,
    Path(id): Path<String>,
    Json(body): Json<OperatorBody>,
) -> ApiResult<Json<Value>> {
    gw.release(&body.operator, &id)?;
    Ok(Json(json!(gw.session_info(&id)?)))
}

#[derive(Deserialize)]
struct RepairBody {
    operator: String,
    serial: String,
}

async fn repair(State(gw): State<Shared>, Json(body): Json<RepairBody>) -> ApiResult<Json<Value>> {
    Ok(Json(json!(gw.remote_repair(&body.operator, &body.serial)?)))
}

// ---- reports and help -------------------------------------------------------

#[derive(Deserialize)]
struct ReportBody {
    serial_id: String,
    issue: String,
}

async fn create_report(
    State(gw): State<Shared>,
    Json(body): Json<ReportBody>,
) -> ApiResult<impl IntoResponse> {
    let report = gw.report_error(&body.serial_id, &body.issue)?;
    Ok((StatusCode::CREATED, Json(json!(report))))
}

async fn list_reports(State(gw): State<Shared>) -> Json<Value> {
    Json(json!({ "reports": gw.reports() }))
}

async fn get_report(State(gw): State<Shared>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    Ok(Json(json!(gw.report(&id)?)))
}

async fn help(State(gw): State<Shared>) -> Json<Value> {
    Json(json!({ "text": gw.help_text(), "intents": gw.help_entries() }))
}

#[derive(Deserialize)]
struct PrincipalQuery {
    principal: String,
    #[serde(default)]
    k: Option<usize>,
}

async fn recommendations(State(gw): State<Shared>, Query(q): Query<PrincipalQuery>) -> Json<Value> {
    Json(
        json!({ "text": gw.recommend_text(&q.principal), "intents": gw.recommendations(&q.principal) }),
    )
}

// ---- engine inspection -------------------------------------------------------

#[derive(Deserialize)]
struct TextQuery {
    text: String,
    #[serde(default)]
    principal: Option<String>,
}

async fn engine_entities(State(gw): State<Shared>, Query(q): Query<TextQuery>) -> Json<Value> {
    let (tokens, entities) = gw.engine().inspect(&q.text);
    Json(json!({ "tokens": tokens, "entities": entities }))
}

async fn engine_parse(State(gw): State<Shared>, Query(q): Query<TextQuery>) -> Json<Value> {
    let principal = q.principal.unwrap_or_else(|| "owner".to_string());
    let candidates = gw.fabric().candidates(&principal);
    let contexts = gw.engine().new_context_stack();
    let utterance = Utterance {
        session_id: "inspect".into(),
        text: q.text,
        turn_index: 0,
    };
    Json(json!(gw.engine().understand(
        &utterance,
        &contexts,
        &candidates
    )))
}

// ---- devices ----------------------------------------------------------------

#[derive(Deserialize)]
struct DeviceFilter {
    #[serde(default)]
    kind: Option<String>,
    #[serde(default)]
    location: Option<String>,
}

async fn list_devices(
    State(gw): State<Shared>,
    headers: HeaderMap,
    Query(q): Query<DeviceFilter>,
) -> ApiResult<Json<Value>> {
    let who = principal(&headers)?;
    if !gw.fabric().knows_principal(&who) {
        return Err(ApiError(GatewayError::Forbidden(format!(
            "unknown principal {who}"
        ))));
    }
    let kind = match q.kind.as_deref() {
        Some(k) => {
            Some(DeviceKind::parse(k).ok_or_else(|| bad(format!("unknown device kind {k}")))?)
        }
        None => None,
    };
    Ok(Json(
        json!({ "devices": gw.fabric().discover(kind, q.location.as_deref(), &who) }),
    ))
}

async fn get_device(
    State(gw): State<Shared>,
    headers: HeaderMap,
    Path(serial): Path<String>,
) -> ApiResult<Json<Value>> {
    let who = principal(&headers)?;
    Ok(Json(json!(gw.fabric().device(&serial, &who)?)))
}

#[derive(Deserialize)]
struct ActionBody {
    action: String,
    #[serde(default)]
    params: Map<String, Value>,
}

async fn device_action(
    State(gw): State<Shared>,
    headers: HeaderMap,
    Path(serial): Path<String>,
    Json(body): Json<ActionBody>,
) -> ApiResult<Json<Value>> {
    let who = principal(&headers)?;
    let state = gw.invoke_device(&who, &serial, &body.action, &body.params)?;
    Ok(Json(json!({ "serial_id": serial, "state": state })))
}

#[derive(Deserialize)]
struct ConfigBody {
    field: String,
    value: String,
}

async fn device_config(
    State(gw): State<Shared>,
    headers: HeaderMap,
    Path(serial): Path<String>,
    Json(body): Json<ConfigBody>,
) -> ApiResult<Json<Value>> {
    let who = principal(&headers)?;
    let remaining = gw.configure_device(&who, &serial, &body.field, &body.value)?;
    let configured = gw.fabric().device(&serial, &who)?.configured;
    Ok(Json(
        json!({ "serial_id": serial, "remaining_fields": remaining, "configured": configured }),
    ))
}

#[derive(Deserialize)]
struct OfflineBody {
    hours: f64,
}

async fn device_offline(
    State(gw): State<Shared>,
    Path(serial): Path<String>,
    Json(body): Json<OfflineBody>,
) -> ApiResult<Json<Value>> {
    gw.set_offline(&serial, body.hours)?;
    Ok(Json(json!({ "serial_id": serial, "now": gw.now() })))
}

// ---- clock and monitor ----------------------------------------------------

async fn clock(State(gw): State<Shared>) -> Json<Value> {
    Json(json!({ "now": gw.now() }))
}

#[derive(Deserialize)]
struct AdvanceBody {
    seconds: u64,
    #[serde(default)]
    step: Option<u64>,
}

async fn advance_clock(
    State(gw): State<Shared>,
    Json(body): Json<AdvanceBody>,
) -> ApiResult<Json<Value>> {
    if body.step == Some(0) {
        return Err(bad("step must be positive"));
    }
    let gw2 = gw.clone();
    let alerts = tokio::task::spawn_blocking(move || match body.step {
        Some(step) => gw2.advance_clock_by(body.seconds, step),
        None => gw2.advance_clock(body.seconds),
    })
    .await
    .map_err(|e| ApiError(GatewayError::Conflict(e.to_string())))?;
    Ok(Json(json!({ "now": gw.now(), "alerts": alerts })))
}

#[derive(Deserialize)]
struct Window {
    #[serde(default)]
    from: Option<u64>,
    #[serde(default)]
    to: Option<u64>,
}

async fn uptime(
    State(gw): State<Shared>,
    Path(serial): Path<String>,
    Query(w): Query<Window>,
) -> ApiResult<Json<Value>> {
    let to = w.to.unwrap_or_else(|| gw.now());
    let from = w.from.unwrap_or(0);
    Ok(Json(json!(gw.uptime(&serial, from, to)?)))
}

async fn monitor_report(
    State(gw): State<Shared>,
    Query(w): Query<Window>,
) -> ApiResult<Json<Value>> {
    let to = w.to.unwrap_or_else(|| gw.now());
    let from = w.from.unwrap_or(0);
    if from > to {
        return Err(bad("from must not be after to"));
    }
    Ok(Json(json!(gw.monitor_report(from, to))))
}

async fn alerts(State(gw): State<Shared>) -> Json<Value> {
    Json(json!({ "alerts": gw.alerts() }))
}

async fn top_intents(State(gw): State<Shared>, Query(q): Query<PrincipalQuery>) -> Json<Value> {
    Json(json!({ "intents": gw.top_intents(&q.principal, q.k.unwrap_or(3)) }))
}

/// Serves the API until Ctrl-C.
pub async fn serve(gateway: Shared, addr: std::net::SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(%addr, "listening");
    axum::serve(listener, router(gateway))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
