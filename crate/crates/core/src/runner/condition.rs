use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::prompt::VariantId;

/// Sampling temperature with total ordering and bitwise equality, so it can key maps.
#[derive(Debug, Clone, Copy)]
pub struct Temperature(f64);

impl Temperature {
    /// `None` for NaN or infinities.
    pub fn new(value: f64) -> Option<Self> {
        // fold -0.0 into 0.0 so equal temperatures hash equally
        value.is_finite().then_some(Self(value + 0.0))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl PartialEq for Temperature {
    fn eq(&self, other: &Self) -> bool {
        self.0.to_bits() == other.0.to_bits()
    }
}

impl Eq for Temperature {}

impl Hash for Temperature {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.0.to_bits().hash(state);
    }
}

impl PartialOrd for Temperature {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Temperature {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl fmt::Display for Temperature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for Temperature {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let v: f64 = s.trim().parse().map_err(|_| format!("invalid temperature {s:?}"))?;
        Temperature::new(v).ok_or_else(|| format!("invalid temperature {s:?}"))
    }
}

impl Serialize for Temperature {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.0)
    }
}

impl<'de> Deserialize<'de> for Temperature {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = f64::deserialize(d)?;
        Temperature::new(v).ok_or_else(|| serde::de::Error::custom("temperature must be finite"))
    }
}

/// One cell of the chatbot × variant × temperature factorial.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Condition {
    pub chatbot: String,
    #[serde(rename = "variant")]
    pub prompt_variant: VariantId,
    pub temperature: Temperature,
}

impl Condition {
    pub fn new(chatbot: impl Into<String>, prompt_variant: VariantId, temperature: Temperature) -> Self {
        Self { chatbot: chatbot.into(), prompt_variant, temperature }
    }

    /// Key shared by every chatbot in the same variant/temperature cell.
    pub fn cell_key(&self) -> String {
        format!("{}/{}", self.prompt_variant, self.temperature)
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.chatbot, self.prompt_variant, self.temperature)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(v: f64) -> Temperature {
        Temperature::new(v).unwrap()
    }

    #[test]
    fn temperature_ordering_and_equality() {
        assert!(t(0.0) < t(0.5));
        assert_eq!(t(-0.0), t(0.0));
        assert!(Temperature::new(f64::NAN).is_none());
        assert_eq!("0.5".parse::<Temperature>().unwrap(), t(0.5));
        assert_eq!(t(0.0).to_string(), "0");
        assert_eq!(t(0.5).to_string(), "0.5");
    }

    #[test]
    fn display_and_serde() {
        let c = Condition::new("gpt", VariantId::PBrPi, t(0.5));
        assert_eq!(c.to_string(), "gpt/P_BR_PI/0.5");
        assert_eq!(c.cell_key(), "P_BR_PI/0.5");
        let json = serde_json::to_string(&c).unwrap();
        assert_eq!(json, r#"{"chatbot":"gpt","variant":"P_BR_PI","temperature":0.5}"#);
        assert_eq!(serde_json::from_str::<Condition>(&json).unwrap(), c);
    }
}
