//! Item-, person- and test-level RMSE between a generated and a human matrix.

use indexmap::IndexMap;

use super::MetricsError;
use crate::survey::{rai, ResponseMatrix, SurveyInstrument};

/// Checks that both matrices cover the same respondents and items.
pub fn check_aligned(ai: &ResponseMatrix, human: &ResponseMatrix) -> Result<(), MetricsError> {
    if ai.item_count() != human.item_count() {
        return Err(MetricsError::ItemCountMismatch { left: ai.item_count(), right: human.item_count() });
    }
    let (a, h) = (ai.id_set(), human.id_set());
    if a != h {
        return Err(MetricsError::RespondentMismatch {
            only_left: a.difference(&h).map(|s| s.to_string()).collect(),
            only_right: h.difference(&a).map(|s| s.to_string()).collect(),
        });
    }
    if a.is_empty() {
        return Err(MetricsError::Empty(ai.source().to_string()));
    }
    Ok(())
}

fn human_row<'a>(human: &'a ResponseMatrix, id: &str) -> &'a [i32] {
    human.row(id).expect("respondent sets checked")
}

/// sqrt(Σ_p d² / P) per item, keyed by 1-based item id.
pub fn item_rmse(ai: &ResponseMatrix, human: &ResponseMatrix) -> Result<Vec<(u32, f64)>, MetricsError> {
    check_aligned(ai, human)?;
    let p = ai.n_respondents() as f64;
    let mut sums = vec![0.0f64; ai.item_count()];
    for (id, row) in ai.rows() {
        for ((s, &x), &y) in sums.iter_mut().zip(row).zip(human_row(human, id)) {
            *s += f64::from(x - y).powi(2);
        }
    }
    Ok(sums.into_iter().enumerate().map(|(i, s)| (i as u32 + 1, (s / p).sqrt())).collect())
}

/// sqrt(Σ_i d² / I) per respondent, in the generated matrix's row order.
pub fn person_rmse(ai: &ResponseMatrix, human: &ResponseMatrix) -> Result<IndexMap<String, f64>, MetricsError> {
    check_aligned(ai, human)?;
    let items = ai.item_count() as f64;
    Ok(ai
        .rows()
        .map(|(id, row)| {
            let s: f64 = row.iter().zip(human_row(human, id)).map(|(&x, &y)| f64::from(x - y).powi(2)).sum();
            (id.to_string(), (s / items).sqrt())
        })
        .collect())
}

/// sqrt(Σ_p (RAI_ai − RAI_human)² / P).
pub fn test_rmse(ai: &ResponseMatrix, human: &ResponseMatrix, instrument: &SurveyInstrument) -> Result<f64, MetricsError> {
    check_aligned(ai, human)?;
    let mut s = 0.0;
    for (id, row) in ai.rows() {
        let d = rai(row, instrument)? - rai(human_row(human, id), instrument)?;
        s += d * d;
    }
    Ok((s / ai.n_respondents() as f64).sqrt())
}
