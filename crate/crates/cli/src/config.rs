//! TOML config files.

use std::path::Path;

use rfcollapse::scenarios::{ConfigError, RawConfig, ScenarioConfig};

/// Read, default and validate a scenario config. Unknown keys are rejected.
pub fn parse_config(path: impl AsRef<Path>) -> Result<ScenarioConfig, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::new("<file>", format!("cannot read {}: {e}", path.display())))?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| schema_error(text, &e))?;
    ScenarioConfig::resolve(raw)
}

/// Emit a config as TOML with every field explicit.
pub fn config_to_toml(cfg: &ScenarioConfig) -> String {
    toml::to_string(&cfg.to_raw()).expect("config serializes to TOML")
}

/// Name the offending key. Unknown-field and missing-field messages carry it
/// in backticks; for type errors the key is read off the reported span.
fn schema_error(text: &str, e: &toml::de::Error) -> ConfigError {
    let message = e.message().trim().to_string();
    let quoted = message
        .split('`')
        .nth(1)
        .filter(|_| message.starts_with("unknown field") || message.starts_with("missing field"));
    let field = match quoted {
        Some(name) => name.to_string(),
        None => e
            .span()
            .and_then(|span| {
                let line_start = text[..span.start].rfind('\n').map_or(0, |p| p + 1);
                let line = text[line_start..].lines().next()?;
                let (key, _) = line.split_once('=')?;
                Some(key.trim().trim_matches('"').to_string())
            })
            .filter(|k| !k.is_empty())
            .unwrap_or_else(|| "<document>".to_string()),
    };
    ConfigError::new(field, message)
}
