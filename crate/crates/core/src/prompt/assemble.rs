use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::format::{format_instruction, render_survey_block};
use super::template::{PromptTemplate, TemplateValues};
use super::tokenizer::TokenCounter;
use super::{variant_components, ComponentKind, PromptError, VariantId};
use crate::survey::{Respondent, SurveyInstrument};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptComponent {
    pub kind: ComponentKind,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub variant_id: VariantId,
    pub respondent_id: String,
    pub full_text: String,
    pub token_count: usize,
    pub encoding: String,
    pub backend: String,
    /// sha256 hex of each included component's text.
    pub component_digest: BTreeMap<ComponentKind, String>,
}

impl RenderedPrompt {
    pub fn digest(&self) -> String {
        sha256_hex(&self.full_text)
    }
}

pub fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

pub fn render_demographics(respondent: &Respondent) -> String {
    respondent.demographics.iter().map(|(k, v)| format!("- {k}: {v}\n")).collect()
}

/// Collects the components a variant needs from the respondent and shared inputs.
pub fn variant_material(
    variant: VariantId,
    respondent: &Respondent,
    background: &str,
    instrument: &SurveyInstrument,
) -> Result<Vec<PromptComponent>, PromptError> {
    let missing = |kind| PromptError::MissingComponent {
        variant,
        kind,
        respondent_id: respondent.respondent_id.clone(),
    };
    variant_components(variant)
        .iter()
        .map(|&kind| {
            let text = match kind {
                ComponentKind::ResearchBackground => {
                    if background.trim().is_empty() {
                        return Err(missing(kind));
                    }
                    background.to_string()
                }
                ComponentKind::PersonalInterview => {
                    if respondent.interview_transcript.trim().is_empty() {
                        return Err(missing(kind));
                    }
                    respondent.interview_transcript.clone()
                }
                ComponentKind::Demographics => {
                    if respondent.demographics.is_empty() {
                        return Err(missing(kind));
                    }
                    render_demographics(respondent)
                }
                ComponentKind::SurveyBlock => render_survey_block(instrument),
            };
            Ok(PromptComponent { kind, text })
        })
        .collect()
}

pub fn assemble_prompt(
    variant: VariantId,
    respondent: &Respondent,
    background: &str,
    instrument: &SurveyInstrument,
    template: &PromptTemplate,
    counter: &dyn TokenCounter,
) -> Result<RenderedPrompt, PromptError> {
    let components = variant_material(variant, respondent, background, instrument)?;
    let text_of = |kind| components.iter().find(|c| c.kind == kind).map(|c| c.text.as_str());
    let format = format_instruction(instrument);
    let values = TemplateValues {
        background: text_of(ComponentKind::ResearchBackground).unwrap_or_default(),
        interview: text_of(ComponentKind::PersonalInterview),
        demographics: text_of(ComponentKind::Demographics),
        survey_items: text_of(ComponentKind::SurveyBlock).unwrap_or_default(),
        format_instruction: &format,
    };
    let full_text = template.render(&values);
    Ok(RenderedPrompt {
        variant_id: variant,
        respondent_id: respondent.respondent_id.clone(),
        token_count: counter.count(&full_text),
        encoding: counter.encoding().to_string(),
        backend: counter.backend().to_string(),
        component_digest: components.iter().map(|c| (c.kind, sha256_hex(&c.text))).collect(),
        full_text,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompt::tokenizer::{builtin_registry, O200K_BASE};
    use crate::prompt::default_template;

    fn person(id: &str, transcript: &str) -> Respondent {
        let mut demographics = indexmap::IndexMap::new();
        demographics.insert("age".to_string(), "41".to_string());
        demographics.insert("role".to_string(), "site director".to_string());
        Respondent {
            respondent_id: id.into(),
            interview_transcript: transcript.into(),
            demographics,
            observed_ratings: None,
        }
    }

    fn build(v: VariantId, r: &Respondent) -> Result<RenderedPrompt, PromptError> {
        let counter = builtin_registry().resolve(O200K_BASE).unwrap();
        assemble_prompt(v, r, "Background text.", &SurveyInstrument::breq(), &default_template(), counter.as_ref())
    }

    #[test]
    fn baseline_is_identical_across_respondents() {
        let a = build(VariantId::PBr, &person("a", "one")).unwrap();
        let b = build(VariantId::PBr, &person("b", "two")).unwrap();
        assert_eq!(a.full_text, b.full_text);
        assert_eq!(a.component_digest, b.component_digest);
    }

    #[test]
    fn interview_digest_tracks_transcript() {
        let a = build(VariantId::PBrPi, &person("a", "I walk every morning.")).unwrap();
        let b = build(VariantId::PBrPi, &person("a", "I rarely move.")).unwrap();
        let k = ComponentKind::PersonalInterview;
        assert_ne!(a.component_digest[&k], b.component_digest[&k]);
        assert_eq!(
            a.component_digest[&ComponentKind::SurveyBlock],
            b.component_digest[&ComponentKind::SurveyBlock]
        );
    }

    #[test]
    fn token_counts_are_monotone() {
        let r = person("a", "We run a soccer club after school and I join the kids most days.");
        let t = |v| build(v, &r).unwrap().token_count;
        assert!(t(VariantId::PBr) <= t(VariantId::PBrPi));
        assert!(t(VariantId::PBrPi) <= t(VariantId::PBrPiDi));
        assert!(t(VariantId::PBr) <= t(VariantId::PBrDi));
        assert!(t(VariantId::PBrDi) <= t(VariantId::PBrPiDi));
    }

    #[test]
    fn empty_transcript_is_assembly_error() {
        let err = build(VariantId::PBrPiDi, &person("z", "  ")).unwrap_err();
        match err {
            PromptError::MissingComponent { variant, kind, respondent_id } => {
                assert_eq!(variant, VariantId::PBrPiDi);
                assert_eq!(kind, ComponentKind::PersonalInterview);
                assert_eq!(respondent_id, "z");
            }
            other => panic!("unexpected {other:?}"),
        }
        // baseline does not need a transcript
        assert!(build(VariantId::PBr, &person("z", "")).is_ok());
    }

    #[test]
    fn missing_demographics_and_background() {
        let mut r = person("d", "text");
        r.demographics.clear();
        assert!(matches!(
            build(VariantId::PBrDi, &r),
            Err(PromptError::MissingComponent { kind: ComponentKind::Demographics, .. })
        ));
        let counter = builtin_registry().resolve(O200K_BASE).unwrap();
        let err = assemble_prompt(VariantId::PBr, &r, " ", &SurveyInstrument::breq(), &default_template(), counter.as_ref());
        assert!(matches!(err, Err(PromptError::MissingComponent { kind: ComponentKind::ResearchBackground, .. })));
    }

    #[test]
    fn every_item_appears_once_in_order() {
        let inst = SurveyInstrument::breq();
        let p = build(VariantId::PBrPiDi, &person("a", "Transcript.")).unwrap();
        let mut last = 0;
        for item in &inst.items {
            assert_eq!(p.full_text.matches(&item.text).count(), 1, "{}", item.text);
            let pos = p.full_text.find(&item.text).unwrap();
            assert!(pos >= last);
            last = pos;
        }
    }

    #[test]
    fn fixed_component_order() {
        let p = build(VariantId::PBrPiDi, &person("a", "TRANSCRIPT-MARK")).unwrap();
        let bg = p.full_text.find("Background text.").unwrap();
        let iv = p.full_text.find("TRANSCRIPT-MARK").unwrap();
        let dm = p.full_text.find("- age: 41").unwrap();
        let sv = p.full_text.find("I value the benefits of exercise.").unwrap();
        let fmt = p.full_text.find("BEGIN RATINGS").unwrap();
        assert!(bg < iv && iv < dm && dm < sv && sv < fmt);
    }
}
