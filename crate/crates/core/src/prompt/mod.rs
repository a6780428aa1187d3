//! Prompt variants, template rendering and token accounting.

mod assemble;
pub mod format;
mod template;
pub mod tokenizer;
mod variant;

use thiserror::Error;

pub use assemble::{assemble_prompt, render_demographics, sha256_hex, variant_material, PromptComponent, RenderedPrompt};
pub use template::{check_template, Placeholder, PromptTemplate, TemplateValues, TemplateViolation};
pub use tokenizer::{count_tokens, TokenCounter, TokenizerError, TokenizerRegistry};
pub use variant::{variant_components, ComponentKind, VariantId};

const DEFAULT_TEMPLATE: &str = include_str!("../../../../data/template.txt");

/// The bundled template.
pub fn default_template() -> PromptTemplate {
    PromptTemplate::parse(DEFAULT_TEMPLATE).expect("bundled template is valid")
}

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("template: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Template(Vec<TemplateViolation>),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("variant {variant} needs {kind} but respondent {respondent_id} has none")]
    MissingComponent { variant: VariantId, kind: ComponentKind, respondent_id: String },
    #[error(transparent)]
    Tokenizer(#[from] TokenizerError),
}
