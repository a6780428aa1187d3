use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Building blocks a prompt can be made from, in rendering order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentKind {
    ResearchBackground,
    PersonalInterview,
    Demographics,
    SurveyBlock,
}

impl ComponentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ComponentKind::ResearchBackground => "research_background",
            ComponentKind::PersonalInterview => "personal_interview",
            ComponentKind::Demographics => "demographics",
            ComponentKind::SurveyBlock => "survey_block",
        }
    }
}

impl fmt::Display for ComponentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum VariantId {
    #[serde(rename = "P_BR")]
    PBr,
    #[serde(rename = "P_BR_PI")]
    PBrPi,
    #[serde(rename = "P_BR_DI")]
    PBrDi,
    #[serde(rename = "P_BR_PI_DI")]
    PBrPiDi,
}

impl VariantId {
    pub const ALL: [VariantId; 4] = [VariantId::PBr, VariantId::PBrPi, VariantId::PBrDi, VariantId::PBrPiDi];

    pub fn as_str(self) -> &'static str {
        match self {
            VariantId::PBr => "P_BR",
            VariantId::PBrPi => "P_BR_PI",
            VariantId::PBrDi => "P_BR_DI",
            VariantId::PBrPiDi => "P_BR_PI_DI",
        }
    }

    pub fn includes(self, kind: ComponentKind) -> bool {
        variant_components(self).contains(&kind)
    }

    pub fn has_interview(self) -> bool {
        self.includes(ComponentKind::PersonalInterview)
    }
}

impl fmt::Display for VariantId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VariantId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        VariantId::ALL
            .into_iter()
            .find(|v| v.as_str().eq_ignore_ascii_case(s) || v.as_str().replace('_', "-").eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown prompt variant {s:?} (expected P_BR, P_BR_PI, P_BR_DI or P_BR_PI_DI)"))
    }
}

/// Component kinds of a variant, in rendering order.
pub fn variant_components(variant: VariantId) -> &'static [ComponentKind] {
    use ComponentKind::*;
    match variant {
        VariantId::PBr => &[ResearchBackground, SurveyBlock],
        VariantId::PBrPi => &[ResearchBackground, PersonalInterview, SurveyBlock],
        VariantId::PBrDi => &[ResearchBackground, Demographics, SurveyBlock],
        VariantId::PBrPiDi => &[ResearchBackground, PersonalInterview, Demographics, SurveyBlock],
    }
}
