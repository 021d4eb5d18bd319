use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Channel access procedure used by the reference BSS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolKind {
    /// Every STA contends independently.
    #[serde(alias = "Edca")]
    Edca,
    /// The AP polls buffer status and solicits uplink with a basic trigger.
    #[serde(rename = "trigger", alias = "TriggerBased")]
    TriggerBased,
    /// A STA that wins contention shares its TxOP, coordinated by the AP.
    #[serde(rename = "sharing", alias = "SharingBased")]
    SharingBased,
}

impl ProtocolKind {
    pub const ALL: [ProtocolKind; 3] = [
        ProtocolKind::Edca,
        ProtocolKind::TriggerBased,
        ProtocolKind::SharingBased,
    ];

    /// Short lowercase tag used in scenario names and CSV output.
    pub fn tag(self) -> &'static str {
        match self {
            ProtocolKind::Edca => "edca",
            ProtocolKind::TriggerBased => "trigger",
            ProtocolKind::SharingBased => "sharing",
        }
    }
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown protocol `{0}` (expected edca, trigger or sharing)")]
pub struct UnknownProtocol(pub String);

impl FromStr for ProtocolKind {
    type Err = UnknownProtocol;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "edca" => Ok(ProtocolKind::Edca),
            "trigger" | "trigger-based" | "triggerbased" => Ok(ProtocolKind::TriggerBased),
            "sharing" | "sharing-based" | "sharingbased" | "share" => Ok(ProtocolKind::SharingBased),
            _ => Err(UnknownProtocol(s.to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tags_round_trip() {
        for p in ProtocolKind::ALL {
            assert_eq!(p.tag().parse::<ProtocolKind>().unwrap(), p);
        }
        assert!("aloha".parse::<ProtocolKind>().is_err());
    }
}
