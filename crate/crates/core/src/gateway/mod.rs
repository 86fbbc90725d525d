//! The chatbot service: sessions, the utterance pipeline, setup wizard,
//! proactive alerts, error reports and human-operator escalation.

pub mod session;
pub mod templates;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use indexmap::IndexMap;
use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::config::{Config, ConfigError};
use crate::fabric::{
    comfort_setpoint, DeviceState, DeviceView, Fabric, FabricError, OfflineWindow, Permissions,
};
use crate::monitor::{AlertEvent, Monitor, MonitorError, MonitorReport, Uptime};
use crate::nlu::intents::value_text;
use crate::nlu::{
    normalize, Clarification, FallbackReason, ParseResult, ReplyOutcome, ReplyTracker,
    ResolvedAction, RuleEngine, Understander, Understanding, Utterance,
};

pub use session::{Author, ChatMessage, Mode, Pending, Session, MASK};
pub use templates::{
    format_duration, format_setpoint, format_temperature, weather_adjective, TemplateError,
    Templates,
};

const AFFIRMATIVE: &[&str] = &["yes", "y", "ok", "sure"];
const NEGATIVE: &[&str] = &["no", "n", "nope"];
const ESCALATION_WORDS: &[&str] = &["human", "operator", "person", "agent"];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GatewayError {
    #[error("{0} not found")]
    NotFound(String),
    #[error("{0}")]
    Forbidden(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Fabric(#[from] FabricError),
    #[error(transparent)]
    Monitor(#[from] MonitorError),
}

impl GatewayError {
    pub fn code(&self) -> &'static str {
        match self {
            GatewayError::NotFound(_) => "NotFound",
            GatewayError::Forbidden(_) => "Forbidden",
            GatewayError::Conflict(_) => "Conflict",
            GatewayError::InvalidParameter(_) => "InvalidParameter",
            GatewayError::Fabric(e) => e.code(),
            GatewayError::Monitor(e) => e.code(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportStatus {
    Open,
    Dispatched,
    Resolved,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub report_id: String,
    pub serial_id: String,
    pub issue: String,
    pub stakeholder: String,
    pub created_at: u64,
    pub status: ReportStatus,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueueEntry {
    pub session_id: String,
    pub principal: String,
    pub waiting_since: u64,
    pub last_user_message: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HelpEntry {
    pub intent: String,
    pub example: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionInfo {
    pub session_id: String,
    pub principal: String,
    pub mode: Mode,
    pub pending: String,
    pub turns: u64,
}

struct SessionSlot {
    principal: String,
    session: Arc<Mutex<Session>>,
}

pub struct Gateway {
    engine: Arc<dyn Understander>,
    templates: Templates,
    fabric: Fabric,
    monitor: Mutex<Monitor>,
    // Lock order: undelivered, then sessions, then a single session.
    undelivered: Mutex<BTreeMap<String, Vec<AlertEvent>>>,
    sessions: RwLock<IndexMap<String, SessionSlot>>,
    queue: Mutex<Vec<String>>,
    reports: Mutex<IndexMap<String, ErrorReport>>,
    clock: Mutex<()>,
    session_seq: AtomicU64,
    pipeline_runs: AtomicU64,
    authorized_mutations: AtomicU64,
}

impl Gateway {
    /// Builds the rule engine, fleet and monitor described by `config`.
    pub fn from_config(config: &Config) -> Result<Self, ConfigError> {
        let engine =
            RuleEngine::from_specs(&config.entities, &config.intents, config.default_lifespan)?;
        Self::with_engine(Arc::new(engine), config)
    }

    /// Same as [`Gateway::from_config`] but with a caller-supplied engine.
    pub fn with_engine(
        engine: Arc<dyn Understander>,
        config: &Config,
    ) -> Result<Self, ConfigError> {
        let templates = Templates::new(config.templates.clone());
        if let Some(id) = templates.missing() {
            return Err(ConfigError::MissingTemplate(id.to_string()));
        }
        if config.monitor.poll_interval == 0 {
            return Err(ConfigError::Invalid(
                "monitor.poll_interval must be positive".into(),
            ));
        }
        let fabric = Fabric::new(
            config.device_classes.clone(),
            config.environment.clone(),
            Permissions::new(config.permissions.clone()),
        )?;
        for seed in &config.devices {
            fabric.register_device(seed)?;
        }
        for window in &config.availability_script {
            fabric.schedule_offline(window.clone())?;
        }
        let mut monitor = Monitor::new(config.monitor);
        monitor.poll(fabric.now(), &fabric.heartbeats());
        Ok(Gateway {
            engine,
            templates,
            fabric,
            monitor: Mutex::new(monitor),
            undelivered: Mutex::new(BTreeMap::new()),
            sessions: RwLock::new(IndexMap::new()),
            queue: Mutex::new(Vec::new()),
            reports: Mutex::new(IndexMap::new()),
            clock: Mutex::new(()),
            session_seq: AtomicU64::new(0),
            pipeline_runs: AtomicU64::new(0),
            authorized_mutations: AtomicU64::new(0),
        })
    }

    pub fn engine(&self) -> &dyn Understander {
        self.engine.as_ref()
    }

    pub fn fabric(&self) -> &Fabric {
        &self.fabric
    }

    pub fn templates(&self) -> &Templates {
        &self.templates
    }

    /// Times the language pipeline has run.
    pub fn pipeline_runs(&self) -> u64 {
        self.pipeline_runs.load(Ordering::SeqCst)
    }

    /// State changes the gateway requested on behalf of permitted principals.
    pub fn authorized_mutations(&self) -> u64 {
        self.authorized_mutations.load(Ordering::SeqCst)
    }

    // ---- sessions -------------------------------------------------------

    pub fn open_session(&self, principal: &str) -> Result<String, GatewayError> {
        if !self.fabric.knows_principal(principal) {
            return Err(GatewayError::Forbidden(format!(
                "unknown principal {principal}"
            )));
        }
        let id = format!("s-{}", self.session_seq.fetch_add(1, Ordering::SeqCst) + 1);
        let session = Arc::new(Mutex::new(Session::new(
            id.clone(),
            principal.to_string(),
            self.engine.new_context_stack(),
        )));
        let mut undelivered = self.undelivered.lock();
        self.sessions.write().insert(
            id.clone(),
            SessionSlot {
                principal: principal.to_string(),
                session: session.clone(),
            },
        );
        let queued = undelivered.remove(principal).unwrap_or_default();
        drop(undelivered);
        let mut s = session.lock();
        for alert in queued {
            self.offer_alert(&mut s, alert);
        }
        Ok(id)
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, GatewayError> {
        self.sessions
            .read()
            .get(id)
            .map(|slot| slot.session.clone())
            .ok_or_else(|| GatewayError::NotFound(format!("session {id}")))
    }

    pub fn session_ids(&self) -> Vec<String> {
        self.sessions.read().keys().cloned().collect()
    }

    pub fn session_info(&self, id: &str) -> Result<SessionInfo, GatewayError> {
        let slot = self.session(id)?;
        let s = slot.lock();
        Ok(SessionInfo {
            session_id: s.session_id.clone(),
            principal: s.principal.clone(),
            mode: s.mode.clone(),
            pending: s.pending.label().to_string(),
            turns: s.turns,
        })
    }

    /// Log entries after `cursor` (0 returns everything).
    pub fn messages_since(&self, id: &str, cursor: u64) -> Result<Vec<ChatMessage>, GatewayError> {
        Ok(self.session(id)?.lock().since(cursor).to_vec())
    }

    /// Live context frames of a session.
    pub fn contexts(&self, id: &str) -> Result<Vec<crate::nlu::ContextFrame>, GatewayError> {
        Ok(self.session(id)?.lock().contexts.frames().to_vec())
    }

    /// Runs one user turn and returns the bot messages it produced.
    pub fn handle_utterance(&self, id: &str, text: &str) -> Result<Vec<ChatMessage>, GatewayError> {
        let slot = self.session(id)?;
        let mut s = slot.lock();
        let relayed = matches!(s.mode, Mode::HumanOperator { .. });
        let masked = !relayed && s.pending.expects_masked();
        s.push(Author::User, text, None, masked);
        let start = s.log().len();
        s.turns += 1;

        let mut consumed = BTreeSet::new();
        let mut pushes = Vec::new();
        if !relayed {
            match std::mem::take(&mut s.pending) {
                Pending::None => {
                    let understanding = self.run_pipeline(&s, text);
                    consumed = understanding.consumed_contexts.clone();
                    pushes = understanding.pushes.clone();
                    self.handle_understanding(&mut s, understanding, true);
                }
                Pending::Clarification {
                    clarification,
                    tracker,
                } => self.clarification_reply(&mut s, text, clarification, tracker),
                Pending::WizardSelect { devices, tracker } => {
                    self.wizard_select(&mut s, text, devices, tracker)
                }
                Pending::WizardField {
                    serial,
                    name,
                    fields,
                    index,
                } => self.wizard_field(&mut s, text, serial, name, fields, index),
                Pending::EscalationPrompt { alert, reprompted } => {
                    self.escalation_reply(&mut s, text, alert, reprompted)
                }
            }
        }
        s.contexts.end_turn(&consumed, pushes);
        self.flush_deferred(&mut s);
        Ok(s.log()[start..].to_vec())
    }

    fn run_pipeline(&self, s: &Session, text: &str) -> Understanding {
        self.pipeline_runs.fetch_add(1, Ordering::SeqCst);
        let utterance = Utterance {
            session_id: s.session_id.clone(),
            text: text.to_string(),
            turn_index: s.turns,
        };
        let candidates = self.fabric.candidates(&s.principal);
        self.engine.understand(&utterance, &s.contexts, &candidates)
    }

    fn handle_understanding(&self, s: &mut Session, understanding: Understanding, record: bool) {
        match understanding.result {
            ParseResult::ResolvedAction(action) => {
                if record {
                    self.monitor
                        .lock()
                        .record_query(&s.principal, &action.matched_intent);
                }
                self.execute(s, &action);
            }
            ParseResult::Clarification(clarification) => {
                if record {
                    self.monitor
                        .lock()
                        .record_query(&s.principal, &clarification.partial.matched_intent);
                }
                self.ask(s, &clarification);
                s.pending = Pending::Clarification {
                    clarification,
                    tracker: ReplyTracker::default(),
                };
            }
            ParseResult::Fallback { reason } => self.fallback(s, &reason),
        }
    }

    fn ask(&self, s: &mut Session, clarification: &Clarification) {
        s.push(
            Author::Bot,
            &clarification.question,
            Some(clarification.labels()),
            false,
        );
    }

    fn fallback(&self, s: &mut Session, reason: &FallbackReason) {
        match reason {
            FallbackReason::NoIntent | FallbackReason::Abandoned => self.say(s, "fallback", &[]),
            FallbackReason::MissingSlot { slot } => {
                self.say(s, "missing_slot", &[("slot", slot.clone())])
            }
            FallbackReason::NoDevice { kind, location } => self.say(
                s,
                "no_device",
                &[
                    ("kind", kind.clone().unwrap_or_else(|| "device".into())),
                    (
                        "where",
                        location
                            .as_ref()
                            .map(|l| format!(" in the {l}"))
                            .unwrap_or_default(),
                    ),
                ],
            ),
        }
    }

    /// Renders a template into the log; a rendering failure falls back to the
    /// fixed fallback line.
    fn say(&self, s: &mut Session, id: &str, params: &[(&str, String)]) {
        let text = self.render(id, params);
        s.bot(&text);
    }

    fn render(&self, id: &str, params: &[(&str, String)]) -> String {
        match self.templates.render(id, params) {
            Ok(text) => text,
            Err(err) => {
                tracing::warn!(%err, "template rendering failed");
                self.templates
                    .get("fallback")
                    .unwrap_or_default()
                    .to_string()
            }
        }
    }

    fn apology(&self, s: &mut Session, name: &str, err: &FabricError) {
        let specific = format!("error.{}", err.code());
        let id = if self.templates.get(&specific).is_some() {
            specific.as_str()
        } else {
            "error"
        };
        self.say(
            s,
            id,
            &[("name", name.to_string()), ("code", err.code().to_string())],
        );
    }

    fn view(&self, serial: &str) -> Option<DeviceView> {
        self.fabric
            .snapshot()
            .into_iter()
            .find(|d| d.serial_id == serial)
    }

    fn name_of(&self, serial: &str) -> String {
        self.view(serial)
            .map(|d| d.friendly_name)
            .unwrap_or_else(|| serial.to_string())
    }

    fn invoke(
        &self,
        s: &Session,
        serial: &str,
        action: &str,
        params: &Map<String, Value>,
    ) -> Result<Map<String, Value>, FabricError> {
        let out = self.fabric.invoke(serial, action, params, &s.principal)?;
        if DeviceState::is_mutating(action) {
            self.authorized_mutations.fetch_add(1, Ordering::SeqCst);
        }
        Ok(out)
    }

    // ---- actions --------------------------------------------------------

    fn execute(&self, s: &mut Session, action: &ResolvedAction) {
        match action.action_name.as_str() {
            "bot.help" => {
                let text = self.help_text();
                s.bot(&text);
            }
            "bot.recommend" => {
                let text = self.recommend_text(&s.principal);
                s.bot(&text);
            }
            "bot.escalate" => self.escalate(s),
            "wizard.setup" => self.wizard_start(s),
            "smartHome.setComfort" => self.each_target(s, action, |gw, s, serial, _| {
                let outside = gw.fabric.outside_temp();
                let params = obj(json!({ "setpoint": comfort_setpoint(outside) }));
                let out = gw.invoke(s, serial, "thermostat.setSetpoint", &params)?;
                let location = gw.location_of(action, serial);
                Ok(gw.render(
                    "comfort_set",
                    &[
                        ("weather", weather_adjective(outside).to_string()),
                        ("outside_temp", format_temperature(outside)),
                        ("location", location),
                        ("setpoint", format_setpoint(number(&out, "setpoint"))),
                    ],
                ))
            }),
            "smartHome.setTemperature" => self.each_target(s, action, |gw, s, serial, _| {
                let (device_action, params) = if let Some(sp) = action.parameters.get("setpoint") {
                    ("thermostat.setSetpoint", obj(json!({ "setpoint": sp })))
                } else if let Some(delta) = action.parameters.get("delta") {
                    ("thermostat.adjust", obj(json!({ "delta": delta })))
                } else {
                    return Ok(gw.render("missing_slot", &[("slot", "setpoint".into())]));
                };
                let out = gw.invoke(s, serial, device_action, &params)?;
                Ok(gw.render(
                    "setpoint_set",
                    &[
                        ("location", gw.location_of(action, serial)),
                        ("setpoint", format_setpoint(number(&out, "setpoint"))),
                    ],
                ))
            }),
            "smartHome.setMode" => self.each_target(s, action, |gw, s, serial, name| {
                let mode = action
                    .parameters
                    .get("mode")
                    .cloned()
                    .unwrap_or(Value::Null);
                let out = gw.invoke(
                    s,
                    serial,
                    "thermostat.setMode",
                    &obj(json!({ "mode": mode })),
                )?;
                let mode = out.get("mode").map(value_text).unwrap_or_default();
                Ok(gw.render("mode_set", &[("name", name.to_string()), ("mode", mode)]))
            }),
            "car.getChargeStatus" => self.each_target(s, action, |gw, s, serial, name| {
                let out = gw.invoke(s, serial, "car.getCharge", &Map::new())?;
                let minutes = out
                    .get("minutes_to_full")
                    .and_then(Value::as_u64)
                    .unwrap_or(0);
                if minutes == 0 {
                    return Ok(gw.render("charge_full", &[("name", name.to_string())]));
                }
                Ok(gw.render(
                    "charge_status",
                    &[
                        ("name", name.to_string()),
                        (
                            "battery_pct",
                            format_temperature(number(&out, "battery_pct")),
                        ),
                        ("duration", format_duration(minutes)),
                    ],
                ))
            }),
            "smartHome.lightsOn" => self.grouped(s, action, "lights.on", "lights_on"),
            "smartHome.lightsOff" => self.grouped(s, action, "lights.off", "lights_off"),
            "smartHome.lock" => self.simple(s, action, "lock.lock", "lock_locked"),
            "smartHome.unlock" => self.simple(s, action, "lock.unlock", "lock_unlocked"),
            "smartHome.kettleOn" => self.simple(s, action, "kettle.on", "kettle_on"),
            "smartHome.kettleOff" => self.simple(s, action, "kettle.off", "kettle_off"),
            "smartHome.getStatus" => self.each_target(s, action, |gw, s, serial, name| {
                let view = gw.fabric.device(serial, &s.principal)?;
                Ok(gw.render(
                    "status",
                    &[
                        ("name", name.to_string()),
                        ("location", view.location.clone()),
                        (
                            "availability",
                            if view.online { "online" } else { "offline" }.to_string(),
                        ),
                        ("summary", summarize(&view.state)),
                    ],
                ))
            }),
            other => {
                let other = other.to_string();
                self.each_target(s, action, move |gw, s, serial, _| {
                    gw.invoke(s, serial, &other, &action.parameters)?;
                    Ok(gw.render("action_done", &[]))
                })
            }
        }
    }

    fn location_of(&self, action: &ResolvedAction, serial: &str) -> String {
        action
            .parameters
            .get("location")
            .map(value_text)
            .or_else(|| self.view(serial).map(|d| d.location))
            .unwrap_or_default()
    }

    /// One reply line per target device.
    fn each_target<F>(&self, s: &mut Session, action: &ResolvedAction, f: F)
    where
        F: Fn(&Gateway, &Session, &str, &str) -> Result<String, FabricError>,
    {
        if action.targets.is_empty() {
            return self.say(s, "action_done", &[]);
        }
        for serial in &action.targets {
            let name = self.name_of(serial);
            match f(self, s, serial, &name) {
                Ok(line) => {
                    s.bot(&line);
                }
                Err(err) => self.apology(s, &name, &err),
            }
        }
    }

    fn simple(
        &self,
        s: &mut Session,
        action: &ResolvedAction,
        device_action: &str,
        template: &str,
    ) {
        self.each_target(s, action, |gw, s, serial, name| {
            gw.invoke(s, serial, device_action, &Map::new())?;
            Ok(gw.render(template, &[("name", name.to_string())]))
        })
    }

    /// One confirmation naming every device that succeeded, then one apology
    /// per failure.
    fn grouped(
        &self,
        s: &mut Session,
        action: &ResolvedAction,
        device_action: &str,
        template: &str,
    ) {
        let mut done = Vec::new();
        let mut failed = Vec::new();
        for serial in &action.targets {
            let name = self.name_of(serial);
            match self.invoke(s, serial, device_action, &Map::new()) {
                Ok(_) => done.push(name),
                Err(err) => failed.push((name, err)),
            }
        }
        if !done.is_empty() {
            self.say(s, template, &[("names", done.join(", "))]);
        }
        for (name, err) in failed {
            self.apology(s, &name, &err);
        }
    }

    // ---- clarification --------------------------------------------------

    fn clarification_reply(
        &self,
        s: &mut Session,
        text: &str,
        clarification: Clarification,
        mut tracker: ReplyTracker,
    ) {
        let labels = clarification.labels();
        let mut outcome = tracker.reply(text, &labels);
        if let ReplyOutcome::Selected(selected) = &outcome {
            let candidates = self.fabric.candidates(&s.principal);
            match self
                .engine
                .complete_clarification(&clarification, selected, &candidates)
            {
                Some(understanding) => return self.handle_understanding(s, understanding, false),
                None => outcome = tracker.fail(),
            }
        }
        match outcome {
            ReplyOutcome::Abandoned => self.fallback(s, &FallbackReason::Abandoned),
            _ => {
                self.ask(s, &clarification);
                s.pending = Pending::Clarification {
                    clarification,
                    tracker,
                };
            }
        }
    }

    // ---- setup wizard ---------------------------------------------------

    fn wizard_start(&self, s: &mut Session) {
        let devices: Vec<(String, String)> = self
            .fabric
            .unconfigured(&s.principal)
            .into_iter()
            .map(|d| (d.serial_id, d.friendly_name))
            .collect();
        if devices.is_empty() {
            return self.say(s, "wizard_none", &[]);
        }
        self.say(s, "wizard_intro", &[]);
        self.wizard_menu(s, &devices);
        s.pending = Pending::WizardSelect {
            devices,
            tracker: ReplyTracker::default(),
        };
    }

    fn wizard_menu(&self, s: &mut Session, devices: &[(String, String)]) {
        self.say(s, "wizard_select", &[]);
        let labels: Vec<String> = devices.iter().map(|(_, name)| name.clone()).collect();
        let menu = labels
            .iter()
            .enumerate()
            .map(|(i, name)| format!("{}) {name}", i + 1))
            .collect::<Vec<_>>()
            .join(" ");
        let text = self.render("wizard_menu", &[("menu", menu)]);
        s.push(Author::Bot, &text, Some(labels), false);
    }

    fn wizard_select(
        &self,
        s: &mut Session,
        text: &str,
        devices: Vec<(String, String)>,
        mut tracker: ReplyTracker,
    ) {
        let labels: Vec<String> = devices.iter().map(|(_, name)| name.clone()).collect();
        let outcome = match tracker.reply(text, &labels) {
            ReplyOutcome::Selected(sel) if sel.len() != 1 => tracker.fail(),
            other => other,
        };
        match outcome {
            ReplyOutcome::Selected(sel) => {
                let (serial, name) = devices[sel[0]].clone();
                match self.fabric.remaining_fields(&serial) {
                    Err(err) => self.say(
                        s,
                        "wizard_aborted",
                        &[("name", name), ("code", err.code().into())],
                    ),
                    Ok(fields) if fields.is_empty() => {
                        self.say(s, "wizard_done", &[("name", name)])
                    }
                    Ok(fields) => {
                        self.say(
                            s,
                            "wizard_first_field",
                            &[("prompt", fields[0].prompt.clone())],
                        );
                        s.pending = Pending::WizardField {
                            serial,
                            name,
                            fields,
                            index: 0,
                        };
                    }
                }
            }
            ReplyOutcome::Reprompt => {
                self.wizard_menu(s, &devices);
                s.pending = Pending::WizardSelect { devices, tracker };
            }
            ReplyOutcome::Abandoned => self.fallback(s, &FallbackReason::Abandoned),
        }
    }

    fn wizard_field(
        &self,
        s: &mut Session,
        text: &str,
        serial: String,
        name: String,
        fields: Vec<crate::fabric::ConfigField>,
        index: usize,
    ) {
        let field = &fields[index];
        match self
            .fabric
            .configure(&serial, &field.name, text.trim(), &s.principal)
        {
            Err(err) => self.say(
                s,
                "wizard_aborted",
                &[("name", name), ("code", err.code().into())],
            ),
            Ok(_) => {
                self.authorized_mutations.fetch_add(1, Ordering::SeqCst);
                if index + 1 < fields.len() {
                    self.say(
                        s,
                        "wizard_field",
                        &[("prompt", fields[index + 1].prompt.clone())],
                    );
                    s.pending = Pending::WizardField {
                        serial,
                        name,
                        fields,
                        index: index + 1,
                    };
                } else {
                    self.say(s, "wizard_done", &[("name", name)]);
                }
            }
        }
    }

    // ---- alerts, reports, escalation -------------------------------------

    /// Presents an alert now if the session is free, otherwise holds it until
    /// the pending item resolves.
    fn offer_alert(&self, s: &mut Session, alert: AlertEvent) {
        if s.pending.is_none() && s.mode == Mode::Bot {
            self.present_alert(s, alert);
        } else {
            s.deferred_alerts.push(alert);
        }
    }

    fn flush_deferred(&self, s: &mut Session) {
        while s.pending.is_none() && s.mode == Mode::Bot && !s.deferred_alerts.is_empty() {
            let alert = s.deferred_alerts.remove(0);
            self.present_alert(s, alert);
        }
    }

    fn present_alert(&self, s: &mut Session, alert: AlertEvent) {
        let Some(view) = self.view(&alert.serial_id) else {
            return;
        };
        // A device that came back before the user could see the alert needs no prompt.
        if view.online {
            return;
        }
        let hours = self.monitor.lock().config().offline_threshold as f64 / 3600.0;
        self.say(
            s,
            "alert_offline",
            &[
                ("device", view.friendly_name.to_lowercase()),
                ("hours", format_temperature(hours)),
            ],
        );
        self.say(
            s,
            "alert_report_prompt",
            &[("vendor", self.vendor_label(&alert.serial_id))],
        );
        s.pending = Pending::EscalationPrompt {
            alert,
            reprompted: false,
        };
    }

    fn vendor_label(&self, serial: &str) -> String {
        match self.fabric.class_of(serial) {
            Ok(class) if !class.vendor.trim().is_empty() => class.vendor,
            _ => "device vendor".to_string(),
        }
    }

    fn escalation_reply(&self, s: &mut Session, text: &str, alert: AlertEvent, reprompted: bool) {
        let tokens = normalize(text);
        let has = |words: &[&str]| tokens.iter().any(|t| words.contains(&t.as_str()));
        if has(ESCALATION_WORDS) {
            self.escalate(s);
        } else if has(NEGATIVE) {
            self.say(s, "report_declined", &[]);
        } else if has(AFFIRMATIVE) {
            let name = self.name_of(&alert.serial_id);
            let issue = format!("{name} offline since t={}s", alert.offline_since);
            match self.report_error(&alert.serial_id, &issue) {
                Ok(report) if report.stakeholder == "unknown" => self.say(
                    s,
                    "report_unknown_vendor",
                    &[
                        ("device", name.to_lowercase()),
                        ("report_id", report.report_id),
                    ],
                ),
                Ok(report) => self.say(
                    s,
                    "report_sent",
                    &[
                        ("vendor", report.stakeholder),
                        ("report_id", report.report_id),
                    ],
                ),
                Err(err) => {
                    let code = err.code().to_string();
                    self.say(s, "error", &[("name", name), ("code", code)]);
                }
            }
        } else if !reprompted {
            self.say(
                s,
                "alert_report_prompt",
                &[("vendor", self.vendor_label(&alert.serial_id))],
            );
            s.pending = Pending::EscalationPrompt {
                alert,
                reprompted: true,
            };
        } else {
            self.say(s, "report_declined", &[]);
        }
    }

    fn escalate(&self, s: &mut Session) {
        self.say(s, "escalated", &[]);
        if s.mode == Mode::Bot {
            s.mode = Mode::HumanOperator { operator: None };
            s.escalated_at = Some(self.fabric.now());
            s.pending = Pending::None;
            self.queue.lock().push(s.session_id.clone());
        }
    }

    /// Files a report with the device's vendor, or with "unknown".
    pub fn report_error(&self, serial: &str, issue: &str) -> Result<ErrorReport, GatewayError> {
        let class = self
            .fabric
            .class_of(serial)
            .map_err(|_| GatewayError::NotFound(format!("device {serial}")))?;
        let known = !class.vendor.trim().is_empty();
        let mut reports = self.reports.lock();
        let report = ErrorReport {
            report_id: format!("r-{}", reports.len() + 1),
            serial_id: serial.to_string(),
            issue: issue.to_string(),
            stakeholder: if known {
                class.vendor
            } else {
                "unknown".to_string()
            },
            created_at: self.fabric.now(),
            status: if known {
                ReportStatus::Dispatched
            } else {
                ReportStatus::Open
            },
        };
        if !known {
            tracing::warn!(serial, "no vendor on record; report left open");
        }
        reports.insert(report.report_id.clone(), report.clone());
        Ok(report)
    }

    pub fn report(&self, report_id: &str) -> Result<ErrorReport, GatewayError> {
        self.reports
            .lock()
            .get(report_id)
            .cloned()
            .ok_or_else(|| GatewayError::NotFound(format!("report {report_id}")))
    }

    pub fn reports(&self) -> Vec<ErrorReport> {
        self.reports.lock().values().cloned().collect()
    }

    // ---- operators ------------------------------------------------------

    pub fn operator_queue(&self) -> Vec<QueueEntry> {
        let ids = self.queue.lock().clone();
        ids.iter()
            .filter_map(|id| {
                let slot = self.session(id).ok()?;
                let s = slot.lock();
                Some(QueueEntry {
                    session_id: id.clone(),
                    principal: s.principal.clone(),
                    waiting_since: s.escalated_at.unwrap_or(0),
                    last_user_message: s.last_user_text().map(str::to_string),
                })
            })
            .collect()
    }

    pub fn take_over(&self, operator: &str, id: &str) -> Result<(), GatewayError> {
        let slot = self.session(id)?;
        let mut queue = self.queue.lock();
        let Some(pos) = queue.iter().position(|q| q == id) else {
            return Err(GatewayError::Conflict(format!(
                "session {id} is not waiting for an operator"
            )));
        };
        queue.remove(pos);
        slot.lock().mode = Mode::HumanOperator {
            operator: Some(operator.to_string()),
        };
        Ok(())
    }

    pub fn operator_send(
        &self,
        operator: &str,
        id: &str,
        text: &str,
    ) -> Result<ChatMessage, GatewayError> {
        let slot = self.session(id)?;
        let mut s = slot.lock();
        if !s.held_by(operator) {
            return Err(GatewayError::Forbidden(format!(
                "{operator} does not hold session {id}"
            )));
        }
        Ok(s.push(Author::Operator, text, None, false))
    }

    pub fn release(&self, operator: &str, id: &str) -> Result<(), GatewayError> {
        let slot = self.session(id)?;
        let mut s = slot.lock();
        if !s.held_by(operator) {
            return Err(GatewayError::Forbidden(format!(
                "{operator} does not hold session {id}"
            )));
        }
        s.mode = Mode::Bot;
        s.escalated_at = None;
        self.flush_deferred(&mut s);
        Ok(())
    }

    /// Remote fix: clears the device's current outage and records it online.
    pub fn remote_repair(&self, operator: &str, serial: &str) -> Result<DeviceView, GatewayError> {
        let _clock = self.clock.lock();
        self.fabric.repair(serial)?;
        self.monitor
            .lock()
            .poll(self.fabric.now(), &self.fabric.heartbeats());
        tracing::info!(operator, serial, "remote repair");
        self.view(serial)
            .ok_or_else(|| GatewayError::NotFound(format!("device {serial}")))
    }

    // ---- direct device access --------------------------------------------

    /// Runs a device action for `principal` outside any chat session.
    pub fn invoke_device(
        &self,
        principal: &str,
        serial: &str,
        action: &str,
        params: &Map<String, Value>,
    ) -> Result<Map<String, Value>, GatewayError> {
        let out = self.fabric.invoke(serial, action, params, principal)?;
        if DeviceState::is_mutating(action) {
            self.authorized_mutations.fetch_add(1, Ordering::SeqCst);
        }
        Ok(out)
    }

    /// Stores one configuration field; returns the fields still to come.
    pub fn configure_device(
        &self,
        principal: &str,
        serial: &str,
        field: &str,
        value: &str,
    ) -> Result<Vec<String>, GatewayError> {
        let remaining = self.fabric.configure(serial, field, value, principal)?;
        self.authorized_mutations.fetch_add(1, Ordering::SeqCst);
        Ok(remaining)
    }

    // ---- help and recommendations ----------------------------------------

    pub fn help_entries(&self) -> Vec<HelpEntry> {
        self.engine
            .intents()
            .iter()
            .filter_map(|i| {
                i.example.clone().map(|example| HelpEntry {
                    intent: i.name.clone(),
                    example,
                })
            })
            .collect()
    }

    pub fn help_text(&self) -> String {
        let examples = self
            .help_entries()
            .into_iter()
            .map(|h| format!("\"{}\"", h.example))
            .collect::<Vec<_>>()
            .join(", ");
        self.render("help", &[("examples", examples)])
    }

    /// Up to three most frequent intents of `principal`, excluding the bot's
    /// own meta intents.
    pub fn recommendations(&self, principal: &str) -> Vec<HelpEntry> {
        let counts = self.monitor.lock().top_intents(principal, usize::MAX);
        counts
            .into_iter()
            .filter_map(|c| {
                let def = self.engine.intents().iter().find(|i| i.name == c.intent)?;
                if def.action_name.starts_with("bot.") {
                    return None;
                }
                Some(HelpEntry {
                    intent: def.name.clone(),
                    example: def.example.clone().unwrap_or_else(|| def.name.clone()),
                })
            })
            .take(3)
            .collect()
    }

    pub fn recommend_text(&self, principal: &str) -> String {
        let recs = self.recommendations(principal);
        if recs.is_empty() {
            return self.help_text();
        }
        let examples = recs
            .into_iter()
            .map(|h| format!("\"{}\"", h.example))
            .collect::<Vec<_>>()
            .join(", ");
        self.render("recommend", &[("examples", examples)])
    }

    // ---- clock and monitoring -------------------------------------------

    pub fn now(&self) -> u64 {
        self.fabric.now()
    }

    /// Advances simulated time in poll-sized steps, delivering any alerts.
    pub fn advance_clock(&self, seconds: u64) -> Vec<AlertEvent> {
        let step = self.monitor.lock().config().poll_interval;
        self.advance_clock_by(seconds, step)
    }

    /// Like [`Gateway::advance_clock`] with an explicit poll step.
    pub fn advance_clock_by(&self, seconds: u64, step: u64) -> Vec<AlertEvent> {
        let step = step.max(1);
        let _clock = self.clock.lock();
        let mut fired = Vec::new();
        let mut remaining = seconds;
        while remaining > 0 {
            let dt = remaining.min(step);
            remaining -= dt;
            self.fabric.tick(dt);
            let alerts = self
                .monitor
                .lock()
                .poll(self.fabric.now(), &self.fabric.heartbeats());
            for alert in alerts {
                self.deliver(&alert);
                fired.push(alert);
            }
        }
        fired
    }

    /// Takes `serial` offline from now for `hours` hours.
    pub fn set_offline(&self, serial: &str, hours: f64) -> Result<(), GatewayError> {
        if !(hours.is_finite() && hours > 0.0) {
            return Err(GatewayError::InvalidParameter(
                "hours must be positive".into(),
            ));
        }
        let now = self.fabric.now();
        let window = OfflineWindow {
            serial_id: serial.to_string(),
            offline_from: now,
            offline_to: now + (hours * 3600.0).round().max(1.0) as u64,
        };
        Ok(self.fabric.schedule_offline(window)?)
    }

    fn deliver(&self, alert: &AlertEvent) {
        for principal in self.fabric.principals() {
            if !self.fabric.can_see(&principal, &alert.serial_id) {
                continue;
            }
            let mut undelivered = self.undelivered.lock();
            let open: Vec<Arc<Mutex<Session>>> = self
                .sessions
                .read()
                .values()
                .filter(|slot| slot.principal == principal)
                .map(|slot| slot.session.clone())
                .collect();
            if open.is_empty() {
                undelivered
                    .entry(principal)
                    .or_default()
                    .push(alert.clone());
                continue;
            }
            drop(undelivered);
            for session in open {
                self.offer_alert(&mut session.lock(), alert.clone());
            }
        }
    }

    pub fn alerts(&self) -> Vec<AlertEvent> {
        self.monitor.lock().alerts().to_vec()
    }

    pub fn uptime(&self, serial: &str, from: u64, to: u64) -> Result<Uptime, GatewayError> {
        Ok(self.monitor.lock().uptime(serial, from, to)?)
    }

    pub fn monitor_report(&self, from: u64, to: u64) -> MonitorReport {
        self.monitor.lock().report(from, to)
    }

    pub fn top_intents(&self, principal: &str, k: usize) -> Vec<crate::monitor::IntentCount> {
        self.monitor.lock().top_intents(principal, k)
    }
}

fn obj(v: Value) -> Map<String, Value> {
    match v {
        Value::Object(m) => m,
        _ => Map::new(),
    }
}

fn number(map: &Map<String, Value>, key: &str) -> f64 {
    map.get(key).and_then(Value::as_f64).unwrap_or(0.0)
}

fn summarize(state: &Map<String, Value>) -> String {
    state
        .iter()
        .filter(|(k, _)| k.as_str() != "minutes_per_percent")
        .map(|(k, v)| format!("{} {}", k.replace('_', " "), value_text(v)))
        .collect::<Vec<_>>()
        .join(", ")
}
