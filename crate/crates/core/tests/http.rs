mod common;

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use iotchat::http::router;
use serde_json::{json, Value};
use tower::ServiceExt;

fn app() -> Router {
    router(Arc::new(common::gateway()))
}

async fn call(
    app: &Router,
    method: Method,
    uri: &str,
    principal: Option<&str>,
    body: Option<Value>,
) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some(p) = principal {
        req = req.header("x-principal", p);
    }
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (
        status,
        serde_json::from_slice(&bytes).unwrap_or(Value::Null),
    )
}

fn bot_texts(v: &Value) -> Vec<&str> {
    v["messages"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|m| m["author"] == "bot")
        .map(|m| m["text"].as_str().unwrap())
        .collect()
}

#[tokio::test]
async fn chat_round_trip() {
    let app = app();
    let (status, body) = call(
        &app,
        Method::POST,
        "/api/sessions",
        None,
        Some(json!({"principal": "owner"})),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED);
    let id = body["session_id"].as_str().unwrap().to_string();
    let uri = format!("/api/sessions/{id}/messages");
    let (status, body) = call(
        &app,
        Method::POST,
        &uri,
        None,
        Some(json!({"text": "How much is my car charged?"})),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(
        bot_texts(&body),
        ["The Tesla Model S is currently 40% charged. 3 Hours 10 minutes to full charge."]
    );
    let (_, log) = call(&app, Method::GET, &format!("{uri}?since=1"), None, None).await;
    assert_eq!(log["messages"].as_array().unwrap().len(), 1);
    let (_, info) = call(
        &app,
        Method::GET,
        &format!("/api/sessions/{id}"),
        None,
        None,
    )
    .await;
    assert_eq!(info["turns"], 1);
}

#[tokio::test]
async fn contexts_are_visible() {
    let app = app();
    let (_, body) = call(
        &app,
        Method::POST,
        "/api/sessions",
        None,
        Some(json!({"principal": "owner"})),
    )
    .await;
    let id = body["session_id"].as_str().unwrap();
    let text = json!({"text": "Keep the living room temperature comfortable"});
    call(
        &app,
        Method::POST,
        &format!("/api/sessions/{id}/messages"),
        None,
        Some(text),
    )
    .await;
    let (_, ctx) = call(
        &app,
        Method::GET,
        &format!("/api/sessions/{id}/contexts"),
        None,
        None,
    )
    .await;
    assert_eq!(ctx["contexts"][0]["name"], "location");
}

#[tokio::test]
async fn errors_carry_codes_and_statuses() {
    let app = app();
    let cases = [
        (
            Method::POST,
            "/api/sessions",
            None,
            Some(json!({"principal": "mallory"})),
            StatusCode::FORBIDDEN,
            "Forbidden",
        ),
        (
            Method::GET,
            "/api/sessions/s-404",
            None,
            None,
            StatusCode::NOT_FOUND,
            "NotFound",
        ),
        (
            Method::GET,
            "/devices/TH-1001",
            Some("guest"),
            None,
            StatusCode::FORBIDDEN,
            "Forbidden",
        ),
        (
            Method::GET,
            "/devices/NOPE",
            Some("owner"),
            None,
            StatusCode::NOT_FOUND,
            "NotFound",
        ),
        (
            Method::POST,
            "/devices/LK-4001/actions",
            Some("owner"),
            Some(json!({"action": "lock.lock"})),
            StatusCode::CONFLICT,
            "NotConfigured",
        ),
        (
            Method::POST,
            "/devices/TH-1001/actions",
            Some("owner"),
            Some(json!({"action": "thermostat.setSetpoint", "params": {"setpoint": 99}})),
            StatusCode::BAD_REQUEST,
            "InvalidParameter",
        ),
        (
            Method::GET,
            "/api/reports/r-9",
            None,
            None,
            StatusCode::NOT_FOUND,
            "NotFound",
        ),
    ];
    for (method, uri, who, body, status, code) in cases {
        let (got, err) = call(&app, method, uri, who, body).await;
        assert_eq!(
            (got, err["error_code"].as_str()),
            (status, Some(code)),
            "{uri}"
        );
        assert!(err["message"].is_string());
    }
}

#[tokio::test]
async fn devices_act_and_report_offline() {
    let app = app();
    let (_, list) = call(
        &app,
        Method::GET,
        "/devices?kind=light&location=guest%20bedroom",
        Some("guest"),
        None,
    )
    .await;
    assert_eq!(list["devices"].as_array().unwrap().len(), 2);
    let (status, out) = call(
        &app,
        Method::POST,
        "/devices/LT-3001/actions",
        Some("guest"),
        Some(json!({"action": "lights.on"})),
    )
    .await;
    assert_eq!(
        (status, &out["state"]["power"]),
        (StatusCode::OK, &json!("on"))
    );

    call(
        &app,
        Method::POST,
        "/devices/LT-3001/offline",
        None,
        Some(json!({"hours": 1})),
    )
    .await;
    let (status, err) = call(
        &app,
        Method::POST,
        "/devices/LT-3001/actions",
        Some("owner"),
        Some(json!({"action": "lights.off"})),
    )
    .await;
    assert_eq!(
        (status, err["error_code"].as_str()),
        (StatusCode::SERVICE_UNAVAILABLE, Some("DeviceOffline"))
    );
}

#[tokio::test]
async fn device_config_walks_the_schema() {
    let app = app();
    let (status, out) = call(
        &app,
        Method::POST,
        "/devices/KT-5001/config",
        Some("owner"),
        Some(json!({"field": "wifi_network", "value": "HomeNet"})),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(out["configured"], true);
}

#[tokio::test]
async fn clock_drives_monitoring() {
    let app = app();
    call(
        &app,
        Method::POST,
        "/devices/LK-4001/offline",
        None,
        Some(json!({"hours": 48})),
    )
    .await;
    let (_, clock) = call(
        &app,
        Method::POST,
        "/clock/advance",
        None,
        Some(json!({"seconds": 86401})),
    )
    .await;
    assert_eq!(clock["now"], 86401);
    let (_, alerts) = call(&app, Method::GET, "/monitor/alerts", None, None).await;
    assert_eq!(alerts["alerts"].as_array().unwrap().len(), 1);
    let (_, up) = call(
        &app,
        Method::GET,
        "/monitor/uptime/LK-4001?from=0&to=86401",
        None,
        None,
    )
    .await;
    assert_eq!(
        up["uptime_s"].as_u64().unwrap() + up["downtime_s"].as_u64().unwrap(),
        86401
    );
    let (status, _) = call(&app, Method::GET, "/monitor/report", None, None).await;
    assert_eq!(status, StatusCode::OK);
}

#[tokio::test]
async fn operator_flow_over_http() {
    let app = app();
    call(
        &app,
        Method::POST,
        "/devices/LK-4001/offline",
        None,
        Some(json!({"hours": 48})),
    )
    .await;
    call(
        &app,
        Method::POST,
        "/clock/advance",
        None,
        Some(json!({"seconds": 86401})),
    )
    .await;
    let (_, body) = call(
        &app,
        Method::POST,
        "/api/sessions",
        None,
        Some(json!({"principal": "owner"})),
    )
    .await;
    let id = body["session_id"].as_str().unwrap();
    let human = json!({"text": "No, I want to talk to a human"});
    call(
        &app,
        Method::POST,
        &format!("/api/sessions/{id}/messages"),
        None,
        Some(human),
    )
    .await;
    let (_, queue) = call(&app, Method::GET, "/api/operator/queue", None, None).await;
    assert_eq!(queue["queue"][0]["session_id"], id);

    let op = json!({"operator": "ana"});
    let (status, _) = call(
        &app,
        Method::POST,
        &format!("/api/operator/sessions/{id}/takeover"),
        None,
        Some(op.clone()),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    let reply = json!({"operator": "ana", "text": "On it."});
    let (_, msg) = call(
        &app,
        Method::POST,
        &format!("/api/operator/sessions/{id}/reply"),
        None,
        Some(reply),
    )
    .await;
    assert_eq!(msg["author"], "operator");
    let repair = json!({"operator": "ana", "serial": "LK-4001"});
    let (_, dev) = call(
        &app,
        Method::POST,
        "/api/operator/repair",
        None,
        Some(repair),
    )
    .await;
    assert_eq!(dev["online"], true);
    let (_, info) = call(
        &app,
        Method::POST,
        &format!("/api/operator/sessions/{id}/release"),
        None,
        Some(op),
    )
    .await;
    assert_eq!(info["mode"]["mode"], "bot");
}

#[tokio::test]
async fn help_recommendations_and_inspection() {
    let app = app();
    let (_, help) = call(&app, Method::GET, "/api/help", None, None).await;
    assert!(help["intents"].as_array().unwrap().len() >= 10);
    let (status, recs) = call(
        &app,
        Method::GET,
        "/api/recommendations?principal=owner",
        None,
        None,
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert!(recs["text"].is_string());
    let (_, parse) = call(
        &app,
        Method::GET,
        "/api/engine/parse?text=lock%20the%20door",
        None,
        None,
    )
    .await;
    assert_eq!(parse["result"]["matched_intent"], "lock_door");
    let (_, report) = call(
        &app,
        Method::POST,
        "/api/reports",
        None,
        Some(json!({"serial_id": "LK-4001", "issue": "jammed"})),
    )
    .await;
    assert_eq!(report["stakeholder"], "Smart Lock Vendor");
}
