use indexmap::IndexMap;

/// Template ids the gateway renders. All must be present in a configuration.
pub const REQUIRED_TEMPLATES: &[&str] = &[
    "fallback",
    "comfort_set",
    "setpoint_set",
    "mode_set",
    "charge_status",
    "charge_full",
    "lights_on",
    "lights_off",
    "lock_locked",
    "lock_unlocked",
    "kettle_on",
    "kettle_off",
    "status",
    "no_device",
    "missing_slot",
    "help",
    "recommend",
    "wizard_intro",
    "wizard_select",
    "wizard_menu",
    "wizard_first_field",
    "wizard_field",
    "wizard_done",
    "wizard_none",
    "wizard_aborted",
    "alert_offline",
    "alert_report_prompt",
    "report_sent",
    "report_unknown_vendor",
    "report_declined",
    "escalated",
    "action_done",
    "error",
];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TemplateError {
    #[error("unknown template {0}")]
    Unknown(String),
    #[error("template {template} has unbound placeholder {placeholder}")]
    Unbound {
        template: String,
        placeholder: String,
    },
}

/// Fixed strings with `{name}` placeholders.
#[derive(Debug, Clone, Default)]
pub struct Templates {
    by_id: IndexMap<String, String>,
}

impl Templates {
    pub fn new(by_id: IndexMap<String, String>) -> Self {
        Templates { by_id }
    }

    pub fn missing(&self) -> Option<&'static str> {
        REQUIRED_TEMPLATES
            .iter()
            .copied()
            .find(|id| !self.by_id.contains_key(*id))
    }

    pub fn get(&self, id: &str) -> Option<&str> {
        self.by_id.get(id).map(String::as_str)
    }

    /// Interpolates `params` into template `id`. Every placeholder must be bound.
    pub fn render(&self, id: &str, params: &[(&str, String)]) -> Result<String, TemplateError> {
        let template = self
            .by_id
            .get(id)
            .ok_or_else(|| TemplateError::Unknown(id.to_string()))?;
        let mut out = String::with_capacity(template.len());
        let mut rest = template.as_str();
        while let Some(open) = rest.find('{') {
            out.push_str(&rest[..open]);
            let after = &rest[open + 1..];
            match after.find('}') {
                Some(close)
                    if after[..close]
                        .chars()
                        .all(|c| c.is_ascii_lowercase() || c == '_' || c.is_ascii_digit()) =>
                {
                    let name = &after[..close];
                    let value = params
                        .iter()
                        .find(|(k, _)| *k == name)
                        .map(|(_, v)| v)
                        .ok_or_else(|| TemplateError::Unbound {
                            template: id.to_string(),
                            placeholder: name.to_string(),
                        })?;
                    out.push_str(value);
                    rest = &after[close + 1..];
                }
                _ => {
                    out.push('{');
                    rest = after;
                }
            }
        }
        out.push_str(rest);
        Ok(out)
    }
}

/// "a cool" below 18 °C, "a warm" from 18 to 28 °C, "a hot" above.
pub fn weather_adjective(outside: f64) -> &'static str {
    if outside < 18.0 {
        "a cool"
    } else if outside <= 28.0 {
        "a warm"
    } else {
        "a hot"
    }
}

/// Whole degrees print without a decimal ("17"), others with one ("17.5").
pub fn format_temperature(t: f64) -> String {
    let r = (t * 10.0).round() / 10.0;
    if r.fract() == 0.0 {
        format!("{r:.0}")
    } else {
        format!("{r:.1}")
    }
}

/// Setpoints always carry one decimal ("21.4", "20.0").
pub fn format_setpoint(t: f64) -> String {
    format!("{t:.1}")
}

/// "{H} Hours {M} minutes", always plural.
pub fn format_duration(minutes: u64) -> String {
    format!("{} Hours {} minutes", minutes / 60, minutes % 60)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(pairs: &[(&str, &str)]) -> Templates {
        Templates::new(
            pairs
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        )
    }

    #[test]
    fn renders_use_case_a() {
        let tpl = t(&[(
            "comfort_set",
            "The weather outside is {weather} {outside_temp} degrees Celsius. Setting temperature in the {location} to {setpoint} degree Celsius.",
        )]);
        let text = tpl
            .render(
                "comfort_set",
                &[
                    ("weather", weather_adjective(17.0).into()),
                    ("outside_temp", format_temperature(17.0)),
                    ("location", "living room".into()),
                    ("setpoint", format_setpoint(21.4)),
                ],
            )
            .unwrap();
        assert_eq!(
            text,
            "The weather outside is a cool 17 degrees Celsius. Setting temperature in the living room to 21.4 degree Celsius."
        );
    }

    #[test]
    fn durations() {
        assert_eq!(format_duration(190), "3 Hours 10 minutes");
        assert_eq!(format_duration(0), "0 Hours 0 minutes");
        assert_eq!(format_duration(61), "1 Hours 1 minutes");
    }

    #[test]
    fn adjectives() {
        assert_eq!(weather_adjective(17.9), "a cool");
        assert_eq!(weather_adjective(18.0), "a warm");
        assert_eq!(weather_adjective(28.0), "a warm");
        assert_eq!(weather_adjective(28.1), "a hot");
    }

    #[test]
    fn unbound_placeholder_is_an_error() {
        let tpl = t(&[("x", "Hello {name}, {missing}")]);
        assert!(matches!(
            tpl.render("x", &[("name", "A".into())]),
            Err(TemplateError::Unbound { .. })
        ));
        assert!(matches!(
            tpl.render("nope", &[]),
            Err(TemplateError::Unknown(_))
        ));
    }

    #[test]
    fn stray_braces_pass_through() {
        let tpl = t(&[("x", "{ not a placeholder } {Name}")]);
        assert_eq!(
            tpl.render("x", &[]).unwrap(),
            "{ not a placeholder } {Name}"
        );
    }
}
