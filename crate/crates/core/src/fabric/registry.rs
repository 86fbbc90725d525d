use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use indexmap::IndexMap;
use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use super::device::{
    ConfigField, DeviceClass, DeviceInstance, DeviceKind, DeviceState, DeviceView, StateSeed,
};
use super::permissions::Permissions;
use super::FabricError;
use crate::nlu::DeviceRef;

/// A scripted outage: the device is offline during `[from, to)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OfflineWindow {
    pub serial_id: String,
    pub offline_from: u64,
    pub offline_to: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentSeed {
    pub outside_temp: f64,
    #[serde(default)]
    pub start_time: u64,
}

impl Default for EnvironmentSeed {
    fn default() -> Self {
        EnvironmentSeed {
            outside_temp: 17.0,
            start_time: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeviceSeed {
    pub serial: String,
    pub class: String,
    pub name: String,
    pub location: String,
    #[serde(default)]
    pub configured: Option<bool>,
    #[serde(default)]
    pub state: StateSeed,
}

/// What the monitor needs to know about one device.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Heartbeat {
    pub last_seen: u64,
    pub online_since: u64,
    pub registered_at: u64,
}

struct Registry {
    classes: IndexMap<String, DeviceClass>,
    devices: Vec<Arc<Mutex<DeviceInstance>>>,
    index: HashMap<String, usize>,
    outside_temp: f64,
    clock: u64,
    script: Vec<OfflineWindow>,
    permissions: Permissions,
}

impl Registry {
    fn offline_stretch(&self, serial: &str, t: u64) -> Option<(u64, u64)> {
        let mut windows: Vec<(u64, u64)> = self
            .script
            .iter()
            .filter(|w| w.serial_id == serial)
            .map(|w| (w.offline_from, w.offline_to))
            .collect();
        windows.sort_unstable();
        let mut merged: Vec<(u64, u64)> = Vec::new();
        for (from, to) in windows {
            match merged.last_mut() {
                Some(last) if from <= last.1 => last.1 = last.1.max(to),
                _ => merged.push((from, to)),
            }
        }
        merged.into_iter().find(|&(from, to)| from <= t && t < to)
    }

    fn latest_recovery(&self, serial: &str, after: u64, upto: u64) -> Option<u64> {
        self.script
            .iter()
            .filter(|w| w.serial_id == serial && w.offline_to > after && w.offline_to <= upto)
            .map(|w| w.offline_to)
            .max()
    }

    fn slot(&self, serial: &str) -> Result<&Arc<Mutex<DeviceInstance>>, FabricError> {
        self.index
            .get(serial)
            .map(|&i| &self.devices[i])
            .ok_or_else(|| FabricError::NotFound(serial.to_string()))
    }
}

/// The simulated device fleet.
///
/// Reads and per-device transitions take the registry read lock plus that
/// device's mutex; `tick` and registration take the write lock, so a tick never
/// interleaves with an in-flight transition.
pub struct Fabric {
    inner: RwLock<Registry>,
    mutations: AtomicU64,
}

impl Fabric {
    pub fn new(
        classes: Vec<DeviceClass>,
        environment: EnvironmentSeed,
        permissions: Permissions,
    ) -> Result<Self, FabricError> {
        let mut map = IndexMap::new();
        for class in classes {
            class.validate()?;
            if map.contains_key(&class.class_id) {
                return Err(FabricError::InvalidClass(format!(
                    "duplicate class {}",
                    class.class_id
                )));
            }
            map.insert(class.class_id.clone(), class);
        }
        Ok(Fabric {
            inner: RwLock::new(Registry {
                classes: map,
                devices: Vec::new(),
                index: HashMap::new(),
                outside_temp: environment.outside_temp,
                clock: environment.start_time,
                script: Vec::new(),
                permissions,
            }),
            mutations: AtomicU64::new(0),
        })
    }

    pub fn register_device(&self, seed: &DeviceSeed) -> Result<String, FabricError> {
        let mut reg = self.inner.write();
        let class = reg
            .classes
            .get(&seed.class)
            .ok_or_else(|| FabricError::UnknownClass(seed.class.clone()))?;
        if reg.index.contains_key(&seed.serial) {
            return Err(FabricError::DuplicateSerial(seed.serial.clone()));
        }
        let state = DeviceState::initial(class.kind, &seed.state)?;
        let schema_len = class.config_schema.len();
        let configured = schema_len == 0 || seed.configured.unwrap_or(false);
        let now = reg.clock;
        let online = reg.offline_stretch(&seed.serial, now).is_none();
        let instance = DeviceInstance {
            serial_id: seed.serial.clone(),
            class_id: seed.class.clone(),
            friendly_name: seed.name.clone(),
            location: seed.location.clone(),
            state,
            online,
            last_seen: now,
            configured,
            config_progress: if configured { schema_len } else { 0 },
            config_values: BTreeMap::new(),
            registered_at: now,
            online_since: now,
        };
        let idx = reg.devices.len();
        reg.devices.push(Arc::new(Mutex::new(instance)));
        reg.index.insert(seed.serial.clone(), idx);
        Ok(seed.serial.clone())
    }

    pub fn now(&self) -> u64 {
        self.inner.read().clock
    }

    pub fn outside_temp(&self) -> f64 {
        self.inner.read().outside_temp
    }

    pub fn knows_principal(&self, principal: &str) -> bool {
        self.inner.read().permissions.knows(principal)
    }

    pub fn principals(&self) -> Vec<String> {
        self.inner
            .read()
            .permissions
            .principals()
            .map(String::from)
            .collect()
    }

    pub fn class(&self, class_id: &str) -> Option<DeviceClass> {
        self.inner.read().classes.get(class_id).cloned()
    }

    pub fn class_of(&self, serial: &str) -> Result<DeviceClass, FabricError> {
        let reg = self.inner.read();
        let class_id = reg.slot(serial)?.lock().class_id.clone();
        reg.classes
            .get(&class_id)
            .cloned()
            .ok_or(FabricError::UnknownClass(class_id))
    }

    pub fn can_see(&self, principal: &str, serial: &str) -> bool {
        let reg = self.inner.read();
        let Ok(slot) = reg.slot(serial) else {
            return false;
        };
        let dev = slot.lock();
        reg.permissions.allows(principal, dev.kind(), &dev.location)
    }

    /// Devices matching every given filter that `requester` may see, in
    /// registration order.
    pub fn discover(
        &self,
        kind: Option<DeviceKind>,
        location: Option<&str>,
        requester: &str,
    ) -> Vec<DeviceView> {
        let reg = self.inner.read();
        reg.devices
            .iter()
            .filter_map(|slot| {
                let dev = slot.lock();
                let visible = reg.permissions.allows(requester, dev.kind(), &dev.location)
                    && kind.is_none_or(|k| dev.kind() == k)
                    && location.is_none_or(|l| dev.location.eq_ignore_ascii_case(l));
                visible.then(|| dev.view())
            })
            .collect()
    }

    /// Visible devices as the engine's candidate list.
    pub fn candidates(&self, requester: &str) -> Vec<DeviceRef> {
        self.discover(None, None, requester)
            .into_iter()
            .map(|d| DeviceRef {
                serial: d.serial_id,
                kind: d.kind.as_str().to_string(),
                name: d.friendly_name,
                location: d.location,
            })
            .collect()
    }

    /// Unconfigured visible devices, registration order.
    pub fn unconfigured(&self, requester: &str) -> Vec<DeviceView> {
        self.discover(None, None, requester)
            .into_iter()
            .filter(|d| !d.configured)
            .collect()
    }

    pub fn device(&self, serial: &str, requester: &str) -> Result<DeviceView, FabricError> {
        let reg = self.inner.read();
        let dev = reg.slot(serial)?.lock();
        if !reg.permissions.allows(requester, dev.kind(), &dev.location) {
            return Err(FabricError::Forbidden);
        }
        Ok(dev.view())
    }

    /// Unfiltered snapshot of every device, for tests and reports.
    pub fn snapshot(&self) -> Vec<DeviceView> {
        let reg = self.inner.read();
        reg.devices.iter().map(|d| d.lock().view()).collect()
    }

    /// Runs one control action against a device.
    pub fn invoke(
        &self,
        serial: &str,
        action: &str,
        params: &Map<String, Value>,
        requester: &str,
    ) -> Result<Map<String, Value>, FabricError> {
        let reg = self.inner.read();
        let slot = reg.slot(serial)?;
        let mut dev = slot.lock();
        if !reg.permissions.allows(requester, dev.kind(), &dev.location) {
            return Err(FabricError::Forbidden);
        }
        let class = reg
            .classes
            .get(&dev.class_id)
            .ok_or_else(|| FabricError::UnknownClass(dev.class_id.clone()))?;
        if !class.supports(action) {
            return Err(FabricError::UnsupportedAction(action.to_string()));
        }
        if reg.offline_stretch(serial, reg.clock).is_some() {
            return Err(FabricError::DeviceOffline);
        }
        let configured = dev.configured;
        let mut next = dev.state.clone();
        next.apply(action, params, configured)?;
        if DeviceState::is_mutating(action) {
            dev.state = next;
            self.mutations.fetch_add(1, Ordering::SeqCst);
        }
        Ok(dev.state.observe())
    }

    /// Stores the next config field. Calling with the first field of a fully
    /// configured device restarts the schema.
    pub fn configure(
        &self,
        serial: &str,
        field: &str,
        value: &str,
        requester: &str,
    ) -> Result<Vec<String>, FabricError> {
        let reg = self.inner.read();
        let slot = reg.slot(serial)?;
        let mut dev = slot.lock();
        if !reg.permissions.allows(requester, dev.kind(), &dev.location) {
            return Err(FabricError::Forbidden);
        }
        if reg.offline_stretch(serial, reg.clock).is_some() {
            return Err(FabricError::DeviceOffline);
        }
        let class = reg
            .classes
            .get(&dev.class_id)
            .ok_or_else(|| FabricError::UnknownClass(dev.class_id.clone()))?;
        let schema = &class.config_schema;
        let expected = if dev.config_progress >= schema.len() {
            0
        } else {
            dev.config_progress
        };
        let Some(spec) = schema.get(expected) else {
            return Err(FabricError::SchemaOrder {
                expected: None,
                got: field.to_string(),
            });
        };
        if spec.name != field {
            return Err(FabricError::SchemaOrder {
                expected: Some(spec.name.clone()),
                got: field.to_string(),
            });
        }
        if value.trim().is_empty() {
            return Err(FabricError::InvalidParameter(format!(
                "{field} must not be empty"
            )));
        }
        if spec.masked {
            let digest = hex::encode(Sha256::digest(format!("{serial}:{value}")));
            match &mut dev.state {
                DeviceState::Lock {
                    passcode_digest, ..
                } if field == "passcode" => *passcode_digest = Some(digest),
                _ => {
                    dev.config_values.insert(field.to_string(), digest);
                }
            }
        } else {
            dev.config_values
                .insert(field.to_string(), value.to_string());
        }
        dev.config_progress = expected + 1;
        if dev.config_progress == schema.len() {
            dev.configured = true;
        }
        self.mutations.fetch_add(1, Ordering::SeqCst);
        Ok(schema[dev.config_progress..]
            .iter()
            .map(|f| f.name.clone())
            .collect())
    }

    /// Schema fields still to be entered, in order. A fully configured device
    /// starts over from the first field.
    pub fn remaining_fields(&self, serial: &str) -> Result<Vec<ConfigField>, FabricError> {
        let reg = self.inner.read();
        let dev = reg.slot(serial)?.lock();
        let class = reg
            .classes
            .get(&dev.class_id)
            .ok_or_else(|| FabricError::UnknownClass(dev.class_id.clone()))?;
        let schema = &class.config_schema;
        let start = if dev.config_progress >= schema.len() {
            0
        } else {
            dev.config_progress
        };
        Ok(schema[start..].to_vec())
    }

    /// True when a stored masked value matches `candidate`.
    pub fn verify_secret(
        &self,
        serial: &str,
        field: &str,
        candidate: &str,
    ) -> Result<bool, FabricError> {
        let reg = self.inner.read();
        let dev = reg.slot(serial)?.lock();
        let digest = hex::encode(Sha256::digest(format!("{serial}:{candidate}")));
        let stored = match &dev.state {
            DeviceState::Lock {
                passcode_digest, ..
            } if field == "passcode" => passcode_digest.clone(),
            _ => dev.config_values.get(field).cloned(),
        };
        Ok(stored.as_deref() == Some(digest.as_str()))
    }

    /// Advances the simulated clock, device physics and heartbeats.
    pub fn tick(&self, dt: u64) {
        if dt == 0 {
            return;
        }
        let mut reg = self.inner.write();
        let old = reg.clock;
        let new = old + dt;
        reg.clock = new;
        for slot in &reg.devices {
            let mut dev = slot.lock();
            dev.state.advance(dt);
            match reg.offline_stretch(&dev.serial_id, new) {
                None => {
                    if let Some(back) = reg.latest_recovery(&dev.serial_id, old, new) {
                        dev.online_since = back;
                    } else if !dev.online {
                        dev.online_since = new;
                    }
                    dev.last_seen = new;
                    dev.online = true;
                }
                Some((from, _)) => {
                    if from > old {
                        dev.last_seen = dev.last_seen.max(from);
                    }
                    dev.online = false;
                }
            }
        }
    }

    /// Adds a scripted outage.
    pub fn schedule_offline(&self, window: OfflineWindow) -> Result<(), FabricError> {
        if window.offline_from >= window.offline_to {
            return Err(FabricError::InvalidParameter(
                "offline window must have from < to".into(),
            ));
        }
        let mut reg = self.inner.write();
        reg.slot(&window.serial_id)?;
        let now = reg.clock;
        let serial = window.serial_id.clone();
        reg.script.push(window);
        if reg.offline_stretch(&serial, now).is_some() {
            let idx = reg.index[&serial];
            reg.devices[idx].lock().online = false;
        }
        Ok(())
    }

    pub fn availability_script(&self) -> Vec<OfflineWindow> {
        self.inner.read().script.clone()
    }

    /// Clears any outage covering the current instant and brings the device
    /// back online now.
    pub fn repair(&self, serial: &str) -> Result<(), FabricError> {
        let mut reg = self.inner.write();
        reg.slot(serial)?;
        let now = reg.clock;
        reg.script.retain_mut(|w| {
            if w.serial_id == serial && w.offline_from <= now && now < w.offline_to {
                w.offline_to = now;
            }
            w.offline_from < w.offline_to
        });
        let idx = reg.index[serial];
        let mut dev = reg.devices[idx].lock();
        if !dev.online {
            dev.online_since = now;
        }
        dev.online = true;
        dev.last_seen = now;
        Ok(())
    }

    pub fn heartbeats(&self) -> Vec<(String, Heartbeat)> {
        let reg = self.inner.read();
        reg.devices
            .iter()
            .map(|slot| {
                let d = slot.lock();
                (
                    d.serial_id.clone(),
                    Heartbeat {
                        last_seen: d.last_seen,
                        online_since: d.online_since,
                        registered_at: d.registered_at,
                    },
                )
            })
            .collect()
    }

    /// Number of successful state-changing invokes and configure calls.
    pub fn mutation_count(&self) -> u64 {
        self.mutations.load(Ordering::SeqCst)
    }
}
