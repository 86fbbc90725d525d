//! Heartbeat tracking, uptime accounting, offline alerts and query statistics,
//! all on the simulated clock.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::fabric::Heartbeat;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonitorConfig {
    /// A device is offline once this many seconds pass without a heartbeat.
    #[serde(default = "default_heartbeat_timeout")]
    pub heartbeat_timeout: u64,
    /// Offline episodes longer than this raise one alert.
    #[serde(default = "default_offline_threshold")]
    pub offline_threshold: u64,
    /// Largest clock step between two polls.
    #[serde(default = "default_poll_interval")]
    pub poll_interval: u64,
}

fn default_heartbeat_timeout() -> u64 {
    120
}
fn default_offline_threshold() -> u64 {
    86_400
}
fn default_poll_interval() -> u64 {
    60
}

impl Default for MonitorConfig {
    fn default() -> Self {
        MonitorConfig {
            heartbeat_timeout: default_heartbeat_timeout(),
            offline_threshold: default_offline_threshold(),
            poll_interval: default_poll_interval(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Availability {
    Online,
    Offline,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AvailabilityWindow {
    pub serial_id: String,
    pub status: Availability,
    pub from: u64,
    /// `None` while the window is still open.
    pub to: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlertRule {
    OfflineThreshold,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlertEvent {
    pub alert_id: String,
    pub serial_id: String,
    pub rule: AlertRule,
    pub offline_since: u64,
    pub fired_at: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Uptime {
    pub uptime_s: u64,
    pub downtime_s: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MonitorError {
    #[error("unknown device {0}")]
    NotFound(String),
    #[error("no observations for {serial} over [{from}, {to})")]
    NoData { serial: String, from: u64, to: u64 },
    #[error("window start {from} is after its end {to}")]
    InvalidWindow { from: u64, to: u64 },
}

impl MonitorError {
    pub fn code(&self) -> &'static str {
        match self {
            MonitorError::NotFound(_) | MonitorError::NoData { .. } => "NotFound",
            MonitorError::InvalidWindow { .. } => "InvalidParameter",
        }
    }
}

#[derive(Debug, Clone, Default)]
struct History {
    windows: Vec<AvailabilityWindow>,
    /// Start of the offline window that already fired its alert.
    alerted_from: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceReport {
    pub serial_id: String,
    pub from: u64,
    pub to: u64,
    pub uptime_s: u64,
    pub downtime_s: u64,
    pub uptime_pct: f64,
    pub offline_episodes: Vec<AvailabilityWindow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentCount {
    pub intent: String,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorReport {
    pub from: u64,
    pub to: u64,
    pub devices: Vec<DeviceReport>,
    pub alerts: Vec<AlertEvent>,
    pub top_intents: BTreeMap<String, Vec<IntentCount>>,
}

/// Single logical poller. Readers see the state left by the last poll.
#[derive(Debug, Clone)]
pub struct Monitor {
    config: MonitorConfig,
    histories: BTreeMap<String, History>,
    alerts: Vec<AlertEvent>,
    last_poll: Option<u64>,
    queries: BTreeMap<String, BTreeMap<String, u64>>,
}

impl Monitor {
    pub fn new(config: MonitorConfig) -> Self {
        Monitor {
            config,
            histories: BTreeMap::new(),
            alerts: Vec::new(),
            last_poll: None,
            queries: BTreeMap::new(),
        }
    }

    pub fn config(&self) -> &MonitorConfig {
        &self.config
    }

    pub fn last_poll(&self) -> Option<u64> {
        self.last_poll
    }

    /// Updates availability from heartbeats and returns newly fired alerts.
    pub fn poll(&mut self, now: u64, heartbeats: &[(String, Heartbeat)]) -> Vec<AlertEvent> {
        let mut fired = Vec::new();
        for (serial, hb) in heartbeats {
            let offline = now.saturating_sub(hb.last_seen) > self.config.heartbeat_timeout;
            let history = self.histories.entry(serial.clone()).or_default();
            if history.windows.is_empty() {
                let start = hb.registered_at.min(now);
                if offline && hb.last_seen > start {
                    history
                        .windows
                        .push(window(serial, Availability::Online, start));
                }
                let status = if offline {
                    Availability::Offline
                } else {
                    Availability::Online
                };
                let from = if offline {
                    hb.last_seen.max(start)
                } else {
                    start
                };
                history.windows.push(window(serial, status, from));
            } else {
                let want = if offline {
                    Availability::Offline
                } else {
                    Availability::Online
                };
                let current = history.windows.last().map(|w| (w.status, w.from));
                if let Some((status, from)) = current {
                    if status != want {
                        let boundary = if offline {
                            hb.last_seen
                        } else {
                            hb.online_since
                        };
                        let cut = boundary.clamp(from, now);
                        transition(history, serial, want, cut);
                    }
                }
            }
            let threshold = self.config.offline_threshold;
            if let Some(open) = history.windows.last() {
                if open.status == Availability::Offline
                    && history.alerted_from != Some(open.from)
                    && now.saturating_sub(open.from) > threshold
                {
                    history.alerted_from = Some(open.from);
                    let alert = AlertEvent {
                        alert_id: format!("alert-{}", self.alerts.len() + fired.len() + 1),
                        serial_id: serial.clone(),
                        rule: AlertRule::OfflineThreshold,
                        offline_since: open.from,
                        fired_at: now,
                    };
                    fired.push(alert);
                }
            }
        }
        self.alerts.extend(fired.iter().cloned());
        self.last_poll = Some(self.last_poll.map_or(now, |p| p.max(now)));
        fired
    }

    pub fn alerts(&self) -> &[AlertEvent] {
        &self.alerts
    }

    pub fn windows(&self, serial: &str) -> Option<&[AvailabilityWindow]> {
        self.histories.get(serial).map(|h| h.windows.as_slice())
    }

    /// Seconds online and offline within `[from, to)`. Always sums to `to - from`.
    pub fn uptime(&self, serial: &str, from: u64, to: u64) -> Result<Uptime, MonitorError> {
        if from > to {
            return Err(MonitorError::InvalidWindow { from, to });
        }
        let history = self
            .histories
            .get(serial)
            .ok_or_else(|| MonitorError::NotFound(serial.to_string()))?;
        let observed_from = history.windows.first().map(|w| w.from);
        let observed_to = self.last_poll;
        match (observed_from, observed_to) {
            (Some(start), Some(end)) if start <= from && to <= end => {}
            _ => {
                return Err(MonitorError::NoData {
                    serial: serial.to_string(),
                    from,
                    to,
                })
            }
        }
        let end = observed_to.unwrap_or(to);
        let mut up = 0;
        let mut down = 0;
        for w in &history.windows {
            let lo = w.from.max(from);
            let hi = w.to.unwrap_or(end).min(to);
            if hi > lo {
                match w.status {
                    Availability::Online => up += hi - lo,
                    Availability::Offline => down += hi - lo,
                }
            }
        }
        Ok(Uptime {
            uptime_s: up,
            downtime_s: down,
        })
    }

    pub fn record_query(&mut self, principal: &str, intent: &str) {
        *self
            .queries
            .entry(principal.to_string())
            .or_default()
            .entry(intent.to_string())
            .or_insert(0) += 1;
    }

    /// Most frequent intents, count descending then name ascending.
    pub fn top_intents(&self, principal: &str, k: usize) -> Vec<IntentCount> {
        let Some(counts) = self.queries.get(principal) else {
            return Vec::new();
        };
        let mut all: Vec<IntentCount> = counts
            .iter()
            .map(|(intent, &count)| IntentCount {
                intent: intent.clone(),
                count,
            })
            .collect();
        all.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.intent.cmp(&b.intent)));
        all.truncate(k);
        all
    }

    /// Per-device uptime, alerts and top intents over `[from, to)`, clamped
    /// to what has been observed. Devices in serial order.
    pub fn report(&self, from: u64, to: u64) -> MonitorReport {
        let mut devices = Vec::new();
        if let Some(last) = self.last_poll {
            for (serial, history) in &self.histories {
                let Some(first) = history.windows.first().map(|w| w.from) else {
                    continue;
                };
                let lo = from.max(first);
                let hi = to.min(last);
                if hi <= lo {
                    continue;
                }
                let Ok(u) = self.uptime(serial, lo, hi) else {
                    continue;
                };
                let offline_episodes = history
                    .windows
                    .iter()
                    .filter(|w| {
                        w.status == Availability::Offline
                            && w.from < hi
                            && w.to.unwrap_or(last) > lo
                    })
                    .cloned()
                    .collect();
                devices.push(DeviceReport {
                    serial_id: serial.clone(),
                    from: lo,
                    to: hi,
                    uptime_s: u.uptime_s,
                    downtime_s: u.downtime_s,
                    uptime_pct: 100.0 * u.uptime_s as f64 / (hi - lo) as f64,
                    offline_episodes,
                });
            }
        }
        let mut alerts: Vec<AlertEvent> = self
            .alerts
            .iter()
            .filter(|a| a.fired_at >= from && a.fired_at <= to)
            .cloned()
            .collect();
        alerts.sort_by(|a, b| {
            a.serial_id
                .cmp(&b.serial_id)
                .then(a.fired_at.cmp(&b.fired_at))
        });
        let top_intents = self
            .queries
            .keys()
            .map(|p| (p.clone(), self.top_intents(p, 3)))
            .collect();
        MonitorReport {
            from,
            to,
            devices,
            alerts,
            top_intents,
        }
    }
}

fn window(serial: &str, status: Availability, from: u64) -> AvailabilityWindow {
    AvailabilityWindow {
        serial_id: serial.to_string(),
        status,
        from,
        to: None,
    }
}

fn transition(history: &mut History, serial: &str, status: Availability, at: u64) {
    let reopen_previous =
        history.windows.last().is_some_and(|w| w.from == at) && history.windows.len() > 1;
    if reopen_previous {
        // Zero-length window: the previous stretch simply continues.
        history.windows.pop();
        if let Some(prev) = history.windows.last_mut() {
            prev.to = None;
        }
        return;
    }
    if let Some(last) = history.windows.last_mut() {
        if last.from == at {
            last.status = status;
            return;
        }
        last.to = Some(at);
    }
    history.windows.push(window(serial, status, at));
}
