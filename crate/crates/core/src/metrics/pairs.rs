//! Correlations across the factorial: chatbot pairs per cell, and each
//! condition against the human matrix.

use std::collections::BTreeMap;

use serde::Serialize;

use super::{CorrelationMode, MetricsError};
use crate::prompt::VariantId;
use crate::runner::{Condition, Temperature};
use crate::survey::ResponseMatrix;

/// Matrices keyed by condition; absent conditions had no usable data.
pub type MatrixSet = BTreeMap<Condition, ResponseMatrix>;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairCorrelation {
    pub variant: VariantId,
    pub temperature: Temperature,
    pub a: String,
    pub b: String,
    pub rho: Option<f64>,
    pub n_points: usize,
}

impl PairCorrelation {
    pub fn label(&self) -> String {
        format!("{}-{}", self.a, self.b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HumanCorrelation {
    pub chatbot: String,
    pub variant: VariantId,
    /// `None` for the mean over temperatures.
    pub temperature: Option<Temperature>,
    pub rho: Option<f64>,
    pub n_points: usize,
}

/// Cells of the design in order: variants, then temperatures.
pub fn design_cells(conditions: &[Condition]) -> Vec<(VariantId, Temperature)> {
    let mut cells: Vec<(VariantId, Temperature)> = conditions.iter().map(|c| (c.prompt_variant, c.temperature)).collect();
    cells.sort();
    cells.dedup();
    cells
}

/// Chatbot pairs `(i, j)` with `i < j` in `chatbots` order.
pub fn chatbot_pairs(chatbots: &[String]) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for i in 0..chatbots.len() {
        for j in i + 1..chatbots.len() {
            out.push((chatbots[i].clone(), chatbots[j].clone()));
        }
    }
    out
}

/// For every (variant, temperature) cell and chatbot pair, the correlation of
/// the two chatbots' matrices. Missing matrices yield undefined entries and are
/// listed in the returned gaps.
pub fn llm_pair_correlations(
    matrices: &MatrixSet,
    chatbots: &[String],
    cells: &[(VariantId, Temperature)],
    mode: &dyn CorrelationMode,
) -> Result<(Vec<PairCorrelation>, Vec<String>), MetricsError> {
    let mut out = Vec::new();
    let mut gaps = Vec::new();
    for &(variant, temperature) in cells {
        for (a, b) in chatbot_pairs(chatbots) {
            let ca = Condition::new(a.clone(), variant, temperature);
            let cb = Condition::new(b.clone(), variant, temperature);
            let corr = match (matrices.get(&ca), matrices.get(&cb)) {
                (Some(ma), Some(mb)) => mode.correlate(ma, mb)?,
                (ma, mb) => {
                    for (m, c) in [(ma.is_none(), &ca), (mb.is_none(), &cb)] {
                        let name = c.to_string();
                        if m && !gaps.contains(&name) {
                            gaps.push(name);
                        }
                    }
                    super::Correlation { rho: None, n_points: 0 }
                }
            };
            out.push(PairCorrelation { variant, temperature, a, b, rho: corr.rho, n_points: corr.n_points });
        }
    }
    Ok((out, gaps))
}

/// Each condition against the human matrix, then per (chatbot, variant) the
/// arithmetic mean over temperatures (undefined if any cell is undefined).
pub fn human_correlations(
    matrices: &MatrixSet,
    human: &ResponseMatrix,
    conditions: &[Condition],
    mode: &dyn CorrelationMode,
) -> Result<Vec<HumanCorrelation>, MetricsError> {
    let mut groups: Vec<((String, VariantId), Vec<&Condition>)> = Vec::new();
    for c in conditions {
        let key = (c.chatbot.clone(), c.prompt_variant);
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(c),
            None => groups.push((key, vec![c])),
        }
    }
    let mut out = Vec::new();
    for ((chatbot, variant), mut conds) in groups {
        conds.sort_by_key(|c| c.temperature);
        let mut rhos = Vec::new();
        let mut total_points = 0;
        for c in conds {
            let corr = match matrices.get(c) {
                Some(m) => mode.correlate(m, human)?,
                None => super::Correlation { rho: None, n_points: 0 },
            };
            rhos.push(corr.rho);
            total_points += corr.n_points;
            out.push(HumanCorrelation {
                chatbot: chatbot.clone(),
                variant,
                temperature: Some(c.temperature),
                rho: corr.rho,
                n_points: corr.n_points,
            });
        }
        let mean = rhos.iter().copied().collect::<Option<Vec<f64>>>().map(|v| v.iter().sum::<f64>() / v.len() as f64);
        out.push(HumanCorrelation { chatbot, variant, temperature: None, rho: mean, n_points: total_points });
    }
    Ok(out)
}
