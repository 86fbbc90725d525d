//! Simulated IoT device fleet behind a uniform control surface.

pub mod device;
pub mod permissions;
pub mod registry;

pub use device::{
    comfort_setpoint, time_to_full, Battery, ChargeRate, ConfigField, DeviceClass, DeviceInstance,
    DeviceKind, DeviceState, DeviceView, Power, StateSeed, ThermostatMode,
};
pub use permissions::{Grant, Permissions};
pub use registry::{DeviceSeed, EnvironmentSeed, Fabric, Heartbeat, OfflineWindow};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FabricError {
    #[error("device is offline")]
    DeviceOffline,
    #[error("device has not been set up yet")]
    NotConfigured,
    #[error("unsupported action {0}")]
    UnsupportedAction(String),
    #[error("requester is not permitted to access this device")]
    Forbidden,
    #[error("configuration field {got} is out of order (expected {expected:?})")]
    SchemaOrder {
        expected: Option<String>,
        got: String,
    },
    #[error("unknown device {0}")]
    NotFound(String),
    #[error("serial {0} is already registered")]
    DuplicateSerial(String),
    #[error("unknown device class {0}")]
    UnknownClass(String),
    #[error("invalid device class: {0}")]
    InvalidClass(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl FabricError {
    /// Stable error code used in REST error bodies and apology templates.
    pub fn code(&self) -> &'static str {
        match self {
            FabricError::DeviceOffline => "DeviceOffline",
            FabricError::NotConfigured => "NotConfigured",
            FabricError::UnsupportedAction(_) => "UnsupportedAction",
            FabricError::Forbidden => "Forbidden",
            FabricError::SchemaOrder { .. } => "SchemaOrder",
            FabricError::NotFound(_) | FabricError::UnknownClass(_) => "NotFound",
            FabricError::DuplicateSerial(_) => "DuplicateSerial",
            FabricError::InvalidClass(_) | FabricError::InvalidParameter(_) => "InvalidParameter",
        }
    }
}
