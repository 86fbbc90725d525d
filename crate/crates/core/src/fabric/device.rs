use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::FabricError;

pub const SETPOINT_MIN: f64 = 5.0;
pub const SETPOINT_MAX: f64 = 35.0;
/// Thermostat drift toward its setpoint, °C per simulated minute.
pub const DRIFT_PER_MINUTE: f64 = 0.5;
/// Kettle heating rate, °C per simulated minute.
pub const KETTLE_HEAT_PER_MINUTE: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeviceKind {
    Light,
    Thermostat,
    Lock,
    Car,
    Kettle,
}

impl DeviceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DeviceKind::Light => "light",
            DeviceKind::Thermostat => "thermostat",
            DeviceKind::Lock => "lock",
            DeviceKind::Car => "car",
            DeviceKind::Kettle => "kettle",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s.to_ascii_lowercase().as_str() {
            "light" => DeviceKind::Light,
            "thermostat" => DeviceKind::Thermostat,
            "lock" => DeviceKind::Lock,
            "car" => DeviceKind::Car,
            "kettle" => DeviceKind::Kettle,
            _ => return None,
        })
    }
}

impl fmt::Display for DeviceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigField {
    pub name: String,
    pub prompt: String,
    #[serde(default)]
    pub masked: bool,
}

/// Information shared by every device of one model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviceClass {
    pub class_id: String,
    pub kind: DeviceKind,
    pub capabilities: Vec<String>,
    #[serde(default)]
    pub config_schema: Vec<ConfigField>,
    #[serde(default)]
    pub vendor: String,
}

impl DeviceClass {
    pub fn validate(&self) -> Result<(), FabricError> {
        if self.capabilities.is_empty() {
            return Err(FabricError::InvalidClass(format!(
                "{} has no capabilities",
                self.class_id
            )));
        }
        if self.kind == DeviceKind::Lock
            && !self
                .config_schema
                .iter()
                .any(|f| f.name == "passcode" && f.masked)
        {
            return Err(FabricError::InvalidClass(format!(
                "lock class {} needs a masked passcode field",
                self.class_id
            )));
        }
        Ok(())
    }

    pub fn supports(&self, action: &str) -> bool {
        self.capabilities.iter().any(|c| c == action)
    }
}

/// Charging speed as an exact rational number of minutes per percent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RateRepr", into = "String")]
pub struct ChargeRate {
    num: u64,
    den: u64,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RateRepr {
    Whole(u64),
    Text(String),
}

impl TryFrom<RateRepr> for ChargeRate {
    type Error = String;

    fn try_from(r: RateRepr) -> Result<Self, String> {
        match r {
            RateRepr::Whole(n) => ChargeRate::new(n, 1),
            RateRepr::Text(s) => s.parse().ok(),
        }
        .ok_or_else(|| "minutes_per_percent must be a positive rational like \"19/6\"".to_string())
    }
}

impl std::str::FromStr for ChargeRate {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        let (n, d) = s.split_once('/').unwrap_or((s, "1"));
        ChargeRate::new(
            n.trim().parse().map_err(|_| ())?,
            d.trim().parse().map_err(|_| ())?,
        )
        .ok_or(())
    }
}

impl From<ChargeRate> for String {
    fn from(r: ChargeRate) -> String {
        r.to_string()
    }
}

impl fmt::Display for ChargeRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl ChargeRate {
    /// Reproduces a 40 % battery needing 3 h 10 min: 190 / 60 = 19/6.
    pub const DEFAULT: ChargeRate = ChargeRate { num: 19, den: 6 };

    pub fn new(num: u64, den: u64) -> Option<Self> {
        (num > 0 && den > 0).then_some(ChargeRate { num, den })
    }

    pub fn as_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// Battery is tracked in units of 1/(60·num) percent, so one simulated
    /// second of charging adds exactly `den` units.
    fn units_per_percent(self) -> u64 {
        60 * self.num
    }
}

impl Default for ChargeRate {
    fn default() -> Self {
        ChargeRate::DEFAULT
    }
}

/// Exact battery level for a car.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Battery {
    units: u64,
    rate: ChargeRate,
}

impl Battery {
    pub fn from_percent(pct: f64, rate: ChargeRate) -> Self {
        let full = 100 * rate.units_per_percent();
        let units = (pct.clamp(0.0, 100.0) * rate.units_per_percent() as f64).round() as u64;
        Battery {
            units: units.min(full),
            rate,
        }
    }

    pub fn percent(&self) -> f64 {
        self.units as f64 / self.rate.units_per_percent() as f64
    }

    pub fn rate(&self) -> ChargeRate {
        self.rate
    }

    pub fn is_full(&self) -> bool {
        self.units >= 100 * self.rate.units_per_percent()
    }

    pub fn charge_for(&mut self, seconds: u64) {
        let full = 100 * self.rate.units_per_percent();
        self.units = self
            .units
            .saturating_add(seconds.saturating_mul(self.rate.den))
            .min(full);
    }

    /// Whole minutes to 100 %: ceil((100 − pct) × minutes_per_percent).
    pub fn minutes_to_full(&self) -> u64 {
        let remaining = 100 * self.rate.units_per_percent() - self.units;
        remaining.div_ceil(60 * self.rate.den)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Power {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThermostatMode {
    Heat,
    Cool,
    Auto,
    Off,
}

/// Live state; the variant always matches the device's class kind.
#[derive(Debug, Clone, PartialEq)]
pub enum DeviceState {
    Light {
        power: Power,
    },
    Thermostat {
        current_temp: f64,
        setpoint: f64,
        mode: ThermostatMode,
    },
    Lock {
        locked: bool,
        passcode_digest: Option<String>,
    },
    Car {
        battery: Battery,
        charging: bool,
    },
    Kettle {
        power: Power,
        water_temp: f64,
    },
}

/// Optional initial values in a seed document.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSeed {
    pub power: Option<Power>,
    pub current_temp: Option<f64>,
    pub setpoint: Option<f64>,
    pub mode: Option<ThermostatMode>,
    pub locked: Option<bool>,
    pub battery_pct: Option<f64>,
    pub charging: Option<bool>,
    pub minutes_per_percent: Option<ChargeRate>,
    pub water_temp: Option<f64>,
}

impl DeviceState {
    pub fn initial(kind: DeviceKind, seed: &StateSeed) -> Result<Self, FabricError> {
        Ok(match kind {
            DeviceKind::Light => DeviceState::Light {
                power: seed.power.unwrap_or(Power::Off),
            },
            DeviceKind::Thermostat => {
                let setpoint = seed.setpoint.unwrap_or(20.0);
                check_setpoint(setpoint)?;
                DeviceState::Thermostat {
                    current_temp: seed.current_temp.unwrap_or(setpoint),
                    setpoint,
                    mode: seed.mode.unwrap_or(ThermostatMode::Auto),
                }
            }
            DeviceKind::Lock => DeviceState::Lock {
                locked: seed.locked.unwrap_or(true),
                passcode_digest: None,
            },
            DeviceKind::Car => {
                let pct = seed.battery_pct.unwrap_or(100.0);
                if !(0.0..=100.0).contains(&pct) {
                    return Err(FabricError::InvalidParameter(format!(
                        "battery_pct {pct} outside 0..100"
                    )));
                }
                DeviceState::Car {
                    battery: Battery::from_percent(
                        pct,
                        seed.minutes_per_percent.unwrap_or_default(),
                    ),
                    charging: seed.charging.unwrap_or(false),
                }
            }
            DeviceKind::Kettle => DeviceState::Kettle {
                power: seed.power.unwrap_or(Power::Off),
                water_temp: seed.water_temp.unwrap_or(20.0),
            },
        })
    }

    pub fn kind(&self) -> DeviceKind {
        match self {
            DeviceState::Light { .. } => DeviceKind::Light,
            DeviceState::Thermostat { .. } => DeviceKind::Thermostat,
            DeviceState::Lock { .. } => DeviceKind::Lock,
            DeviceState::Car { .. } => DeviceKind::Car,
            DeviceState::Kettle { .. } => DeviceKind::Kettle,
        }
    }

    /// Externally visible state. Passcode digests never appear here.
    pub fn observe(&self) -> Map<String, Value> {
        let v = match self {
            DeviceState::Light { power } => json!({ "power": power }),
            DeviceState::Thermostat {
                current_temp,
                setpoint,
                mode,
            } => json!({
                "current_temp": round1(*current_temp),
                "setpoint": round1(*setpoint),
                "mode": mode,
            }),
            DeviceState::Lock { locked, .. } => json!({ "locked": locked }),
            DeviceState::Car { battery, charging } => json!({
                "battery_pct": battery.percent(),
                "charging": charging,
                "minutes_to_full": battery.minutes_to_full(),
                "minutes_per_percent": battery.rate().to_string(),
            }),
            DeviceState::Kettle { power, water_temp } => json!({
                "power": power,
                "water_temp": round1(*water_temp),
            }),
        };
        match v {
            Value::Object(m) => m,
            _ => Map::new(),
        }
    }

    /// Whether `action` changes state. Read-only actions return false.
    pub fn is_mutating(action: &str) -> bool {
        !matches!(action, "status" | "car.getCharge")
    }

    /// Applies one control action. The caller has already checked the
    /// capability list, permissions and availability.
    pub fn apply(
        &mut self,
        action: &str,
        params: &Map<String, Value>,
        configured: bool,
    ) -> Result<(), FabricError> {
        let unsupported = || FabricError::UnsupportedAction(action.to_string());
        match (self, action) {
            (_, "status") => {}
            (DeviceState::Light { power }, "lights.on") => *power = Power::On,
            (DeviceState::Light { power }, "lights.off") => *power = Power::Off,
            (DeviceState::Thermostat { setpoint, .. }, "thermostat.setSetpoint") => {
                let value = number_param(params, "setpoint")?;
                check_setpoint(value)?;
                *setpoint = round1(value);
            }
            (DeviceState::Thermostat { setpoint, .. }, "thermostat.adjust") => {
                let delta = number_param(params, "delta")?;
                *setpoint = round1((*setpoint + delta).clamp(SETPOINT_MIN, SETPOINT_MAX));
            }
            (DeviceState::Thermostat { mode, .. }, "thermostat.setMode") => {
                let raw = params.get("mode").cloned().unwrap_or(Value::Null);
                *mode = serde_json::from_value(raw).map_err(|_| {
                    FabricError::InvalidParameter("mode must be heat, cool, auto or off".into())
                })?;
            }
            (DeviceState::Lock { locked, .. }, "lock.lock" | "lock.unlock") => {
                if !configured {
                    return Err(FabricError::NotConfigured);
                }
                *locked = action == "lock.lock";
            }
            (DeviceState::Car { .. }, "car.getCharge") => {}
            (DeviceState::Car { charging, .. }, "car.startCharging") => *charging = true,
            (DeviceState::Car { charging, .. }, "car.stopCharging") => *charging = false,
            (DeviceState::Kettle { power, .. }, "kettle.on") => *power = Power::On,
            (DeviceState::Kettle { power, .. }, "kettle.off") => *power = Power::Off,
            _ => return Err(unsupported()),
        }
        Ok(())
    }

    /// Advances physical state by `seconds` of simulated time.
    pub fn advance(&mut self, seconds: u64) {
        let minutes = seconds as f64 / 60.0;
        match self {
            DeviceState::Car { battery, charging } if *charging => battery.charge_for(seconds),
            DeviceState::Thermostat {
                current_temp,
                setpoint,
                ..
            } => {
                let step = DRIFT_PER_MINUTE * minutes;
                let gap = *setpoint - *current_temp;
                *current_temp = if gap.abs() <= step {
                    *setpoint
                } else {
                    *current_temp + step.copysign(gap)
                };
            }
            DeviceState::Kettle { power, water_temp } if *power == Power::On => {
                *water_temp = (*water_temp + KETTLE_HEAT_PER_MINUTE * minutes).min(100.0);
                if *water_temp >= 100.0 {
                    *power = Power::Off;
                }
            }
            _ => {}
        }
    }
}

fn number_param(params: &Map<String, Value>, key: &str) -> Result<f64, FabricError> {
    params
        .get(key)
        .and_then(|v| {
            v.as_f64()
                .or_else(|| v.as_str().and_then(|s| s.parse().ok()))
        })
        .ok_or_else(|| FabricError::InvalidParameter(format!("{key} must be a number")))
}

fn check_setpoint(value: f64) -> Result<(), FabricError> {
    if (SETPOINT_MIN..=SETPOINT_MAX).contains(&value) {
        Ok(())
    } else {
        Err(FabricError::InvalidParameter(format!(
            "setpoint {value} outside {SETPOINT_MIN}..{SETPOINT_MAX}"
        )))
    }
}

pub fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

/// Comfort policy: 18 + 0.2 × outside, clamped to [18, 26], one decimal.
pub fn comfort_setpoint(outside_temp: f64) -> f64 {
    round1((18.0 + 0.2 * outside_temp).clamp(18.0, 26.0))
}

/// Minutes until a car is full; 0 for any other state.
pub fn time_to_full(state: &DeviceState) -> u64 {
    match state {
        DeviceState::Car { battery, .. } => battery.minutes_to_full(),
        _ => 0,
    }
}

/// One registered device: serial-level identity plus live state.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceInstance {
    pub serial_id: String,
    pub class_id: String,
    pub friendly_name: String,
    pub location: String,
    pub state: DeviceState,
    pub online: bool,
    pub last_seen: u64,
    pub configured: bool,
    /// Index of the next config field expected.
    pub config_progress: usize,
    pub config_values: BTreeMap<String, String>,
    pub registered_at: u64,
    /// Start of the current online stretch.
    pub online_since: u64,
}

impl DeviceInstance {
    pub fn kind(&self) -> DeviceKind {
        self.state.kind()
    }

    pub fn view(&self) -> DeviceView {
        DeviceView {
            serial_id: self.serial_id.clone(),
            class_id: self.class_id.clone(),
            kind: self.kind(),
            friendly_name: self.friendly_name.clone(),
            location: self.location.clone(),
            state: self.state.observe(),
            online: self.online,
            last_seen: self.last_seen,
            configured: self.configured,
        }
    }
}

/// Serializable snapshot of a device, safe to expose over any interface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceView {
    pub serial_id: String,
    pub class_id: String,
    pub kind: DeviceKind,
    pub friendly_name: String,
    pub location: String,
    pub state: Map<String, Value>,
    pub online: bool,
    pub last_seen: u64,
    pub configured: bool,
}
