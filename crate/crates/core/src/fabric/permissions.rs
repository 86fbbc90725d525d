use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::device::DeviceKind;

/// One allow-list entry; `"*"` matches anything.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grant {
    pub kind: String,
    pub location: String,
}

impl Grant {
    pub fn owner() -> Self {
        Grant {
            kind: "*".into(),
            location: "*".into(),
        }
    }

    fn allows(&self, kind: DeviceKind, location: &str) -> bool {
        (self.kind == "*" || self.kind.eq_ignore_ascii_case(kind.as_str()))
            && (self.location == "*" || self.location.eq_ignore_ascii_case(location))
    }
}

/// Per-principal allow-lists of (kind, location) pairs.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Permissions {
    grants: IndexMap<String, Vec<Grant>>,
}

impl Permissions {
    pub fn new(grants: IndexMap<String, Vec<Grant>>) -> Self {
        Permissions { grants }
    }

    pub fn knows(&self, principal: &str) -> bool {
        self.grants.contains_key(principal)
    }

    pub fn principals(&self) -> impl Iterator<Item = &str> {
        self.grants.keys().map(String::as_str)
    }

    pub fn allows(&self, principal: &str, kind: DeviceKind, location: &str) -> bool {
        self.grants
            .get(principal)
            .is_some_and(|gs| gs.iter().any(|g| g.allows(kind, location)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wildcard_and_scoped_grants() {
        let mut g = IndexMap::new();
        g.insert("owner".to_string(), vec![Grant::owner()]);
        g.insert(
            "guest".to_string(),
            vec![Grant {
                kind: "light".into(),
                location: "guest bedroom".into(),
            }],
        );
        g.insert("nobody".to_string(), vec![]);
        let p = Permissions::new(g);
        assert!(p.allows("owner", DeviceKind::Lock, "front door"));
        assert!(p.allows("guest", DeviceKind::Light, "Guest Bedroom"));
        assert!(!p.allows("guest", DeviceKind::Light, "kitchen"));
        assert!(!p.allows("nobody", DeviceKind::Light, "kitchen"));
        assert!(!p.allows("stranger", DeviceKind::Light, "kitchen"));
        assert!(p.knows("nobody"));
        assert!(!p.knows("stranger"));
    }
}
