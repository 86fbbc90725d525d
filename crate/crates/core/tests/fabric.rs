mod common;

use std::sync::Arc;
use std::thread;

use common::*;
use iotchat::fabric::{comfort_setpoint, DeviceKind, FabricError, OfflineWindow};
use serde_json::{json, Map, Value};

fn params(v: Value) -> Map<String, Value> {
    v.as_object().cloned().unwrap_or_default()
}

fn serials(views: &[iotchat::fabric::DeviceView]) -> Vec<&str> {
    views.iter().map(|d| d.serial_id.as_str()).collect()
}

#[test]
fn discovery_filters_by_kind_location_and_permission() {
    let gw = gateway();
    let fabric = gw.fabric();
    let lights = fabric.discover(Some(DeviceKind::Light), Some("guest bedroom"), "owner");
    assert_eq!(serials(&lights), ["LT-3001", "LT-3002"]);
    assert_eq!(fabric.discover(None, None, "owner").len(), 7);
    let guest = fabric.discover(None, None, "guest");
    assert!(guest
        .iter()
        .all(|d| shipped_allows("guest", d.kind.as_str(), &d.location)));
    assert_eq!(serials(&guest), ["LT-3001", "LT-3002"]);
    assert!(fabric.discover(None, None, "stranger").is_empty());
}

#[test]
fn guests_cannot_touch_other_devices() {
    let gw = gateway();
    let err = gw.fabric().invoke(
        "TH-1001",
        "thermostat.adjust",
        &params(json!({"delta": 1})),
        "guest",
    );
    assert_eq!(err, Err(FabricError::Forbidden));
    assert_eq!(gw.fabric().mutation_count(), 0);
}

#[test]
fn offline_devices_reject_actions_until_back() {
    let gw = gateway();
    let fabric = gw.fabric();
    fabric
        .schedule_offline(OfflineWindow {
            serial_id: "LT-3001".into(),
            offline_from: 0,
            offline_to: 600,
        })
        .unwrap();
    assert_eq!(
        fabric.invoke("LT-3001", "lights.on", &Map::new(), "owner"),
        Err(FabricError::DeviceOffline)
    );
    gw.advance_clock(600);
    assert!(fabric
        .invoke("LT-3001", "lights.on", &Map::new(), "owner")
        .is_ok());
    assert_eq!(fabric.mutation_count(), 1);
}

#[test]
fn unconfigured_lock_refuses_to_lock() {
    let gw = gateway();
    let err = gw
        .fabric()
        .invoke("LK-4001", "lock.lock", &Map::new(), "owner");
    assert_eq!(err, Err(FabricError::NotConfigured));
}

#[test]
fn unsupported_actions_are_rejected() {
    let gw = gateway();
    let err = gw
        .fabric()
        .invoke("LT-3001", "car.startCharging", &Map::new(), "owner");
    assert!(matches!(err, Err(FabricError::UnsupportedAction(_))));
}

#[test]
fn config_fields_must_arrive_in_order() {
    let gw = gateway();
    let fabric = gw.fabric();
    let err = fabric
        .configure("KT-5001", "bogus", "x", "owner")
        .unwrap_err();
    assert_eq!(err.code(), "SchemaOrder");
    fabric
        .configure("LK-4001", "passcode", "4821", "owner")
        .unwrap();
    assert!(fabric.verify_secret("LK-4001", "passcode", "4821").unwrap());
    assert!(!fabric.verify_secret("LK-4001", "passcode", "0000").unwrap());
    let view = fabric.device("LK-4001", "owner").unwrap();
    assert!(view.configured);
    assert!(!serde_json::to_string(&view).unwrap().contains("4821"));
}

#[test]
fn concurrent_adjustments_are_atomic() {
    let gw = Arc::new(gateway());
    let before = gw.fabric().device("TH-1001", "owner").unwrap().state["setpoint"]
        .as_f64()
        .unwrap();
    let handles: Vec<_> = (0..8)
        .map(|i| {
            let gw = Arc::clone(&gw);
            thread::spawn(move || {
                let sign = if i % 2 == 0 { 1 } else { -1 };
                for _ in 0..200 {
                    for delta in [sign, -sign] {
                        gw.fabric()
                            .invoke(
                                "TH-1001",
                                "thermostat.adjust",
                                &params(json!({"delta": delta})),
                                "owner",
                            )
                            .unwrap();
                    }
                }
            })
        })
        .collect();
    for h in handles {
        h.join().unwrap();
    }
    let after = gw.fabric().device("TH-1001", "owner").unwrap().state["setpoint"]
        .as_f64()
        .unwrap();
    assert_eq!(gw.fabric().mutation_count(), 3200);
    assert_eq!(after, before);
}

#[test]
fn concurrent_toggles_and_ticks_stay_consistent() {
    let gw = Arc::new(gateway());
    let workers: Vec<_> = (0..4)
        .map(|i| {
            let gw = Arc::clone(&gw);
            thread::spawn(move || {
                for n in 0..250 {
                    if i == 0 {
                        gw.advance_clock(1);
                    } else {
                        let action = if n % 2 == 0 {
                            "lights.on"
                        } else {
                            "lights.off"
                        };
                        gw.fabric()
                            .invoke("LT-3002", action, &Map::new(), "owner")
                            .unwrap();
                    }
                }
            })
        })
        .collect();
    for w in workers {
        w.join().unwrap();
    }
    assert_eq!(gw.now(), 250);
    assert_eq!(gw.fabric().mutation_count(), 750);
    assert_eq!(
        gw.fabric().device("LT-3002", "owner").unwrap().state["power"],
        "off"
    );
}

#[test]
fn comfort_setpoint_is_clamped_and_monotone() {
    let oracle = |t: f64| ((18.0 + 0.2 * t).clamp(18.0, 26.0) * 10.0).round() / 10.0;
    let mut last = f64::MIN;
    for tenth in -400..=600 {
        let t = tenth as f64 / 10.0;
        let s = comfort_setpoint(t);
        assert_eq!(s, oracle(t), "outside {t}");
        assert!(s >= last);
        last = s;
    }
    assert_eq!(comfort_setpoint(17.0), 21.4);
}

#[test]
fn car_charges_on_the_clock() {
    let gw = gateway();
    let charge = |gw: &iotchat::gateway::Gateway| {
        gw.fabric()
            .invoke("CAR-2001", "car.getCharge", &Map::new(), "owner")
            .unwrap()["minutes_to_full"]
            .as_u64()
            .unwrap()
    };
    assert_eq!(charge(&gw), 190);
    gw.advance_clock(190 * 60);
    assert_eq!(charge(&gw), 0);
    assert_eq!(gw.fabric().mutation_count(), 0);
}
