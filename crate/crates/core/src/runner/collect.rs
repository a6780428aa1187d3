//! Turning stored records into response matrices.

use std::collections::BTreeMap;

use serde::Serialize;

use super::{Condition, RunStatus, RunStore, RunnerError};
use crate::survey::{LikertScale, MatrixSource, ResponseMatrix, SurveyInstrument};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Exclusion {
    pub respondent_id: String,
    /// `missing`, or the statuses of the respondent's records joined by `+`.
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollectedMatrix {
    pub matrix: ResponseMatrix,
    pub exclusions: Vec<Exclusion>,
}

/// Combines repeat ratings of one item: the mean, rounded to the nearest
/// scale point; an exact half goes to whichever neighbour is nearer the scale
/// midpoint, and to the lower one when both are equally near.
pub fn aggregate_repeats(values: &[i32], scale: &LikertScale) -> Option<i32> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as i64;
    let s: i64 = values.iter().map(|&v| i64::from(v)).sum();
    let f = s.div_euclid(n);
    let r = s - f * n;
    let pick = match (2 * r).cmp(&n) {
        std::cmp::Ordering::Less => f,
        std::cmp::Ordering::Greater => f + 1,
        std::cmp::Ordering::Equal => {
            let mid2 = scale.midpoint_x2();
            let (dl, du) = ((2 * f - mid2).abs(), (2 * (f + 1) - mid2).abs());
            if du < dl {
                f + 1
            } else {
                f
            }
        }
    };
    Some(pick as i32)
}

/// Matrix of ok ratings for `condition` over `respondent_ids`, in that order.
/// Respondents without any ok record are excluded and listed.
pub fn collect_matrix(
    store: &RunStore,
    condition: &Condition,
    instrument: &SurveyInstrument,
    respondent_ids: &[String],
) -> Result<CollectedMatrix, RunnerError> {
    let mut by_resp: BTreeMap<&str, Vec<(u32, RunStatus, Option<&[i32]>)>> = BTreeMap::new();
    for rec in store.for_condition(condition) {
        by_resp.entry(rec.key.respondent_id.as_str()).or_default().push((rec.key.repeat_index, rec.status, rec.ratings()));
    }
    let mut rows = Vec::new();
    let mut exclusions = Vec::new();
    for id in respondent_ids {
        let Some(recs) = by_resp.get_mut(id.as_str()) else {
            exclusions.push(Exclusion { respondent_id: id.clone(), reason: "missing".into() });
            continue;
        };
        recs.sort_by_key(|r| r.0);
        let ok: Vec<&[i32]> = recs.iter().filter_map(|r| r.2).collect();
        if ok.is_empty() {
            let mut statuses: Vec<&str> = recs.iter().map(|r| r.1.as_str()).collect();
            statuses.dedup();
            exclusions.push(Exclusion { respondent_id: id.clone(), reason: statuses.join("+") });
            continue;
        }
        let row: Vec<i32> = (0..instrument.item_count())
            .map(|i| {
                let vals: Vec<i32> = ok.iter().map(|r| r[i]).collect();
                aggregate_repeats(&vals, &instrument.scale).expect("at least one ok repeat")
            })
            .collect();
        rows.push((id.clone(), row));
    }
    if rows.is_empty() {
        return Err(RunnerError::EmptyMatrix { condition: condition.to_string(), exclusions });
    }
    let matrix = ResponseMatrix::new(MatrixSource::Condition(condition.clone()), instrument, rows)?;
    Ok(CollectedMatrix { matrix, exclusions })
}
