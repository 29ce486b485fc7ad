use causal_core::checklist::ChecklistConfig;
use causal_core::legal::LegalConfig;
use causal_core::study::parse_json_bytes;
use causal_core::Result;
use serde::{Deserialize, Serialize};

/// Checklist thresholds and legal rule settings. Every report prints the
/// effective values, defaults included.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EngineConfig {
    pub checklist: ChecklistConfig,
    pub legal: LegalConfig,
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        self.checklist.validate()?;
        self.legal.validate()
    }
}

pub fn parse_config(bytes: &[u8]) -> Result<EngineConfig> {
    let cfg: EngineConfig = parse_json_bytes(bytes)?;
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use causal_core::Error;

    #[test]
    fn partial_config_keeps_defaults() {
        let cfg = parse_config(br#"{"legal":{"use_lcl":true}}"#).unwrap();
        assert!(cfg.legal.use_lcl);
        assert_eq!(cfg.legal.rr_threshold, 2.0);
        assert_eq!(cfg.checklist, ChecklistConfig::default());
    }

    #[test]
    fn bad_values_and_keys() {
        assert!(matches!(parse_config(br#"{"checklist":{"alpha":2}}"#), Err(Error::Config(_))));
        let Err(Error::Schema { path, .. }) = parse_config(br#"{"legal":{"rr_treshold":2}}"#) else { panic!() };
        assert_eq!(path, "legal.rr_treshold");
    }
}
