//! Subscale scores and the relative autonomy index.

use thiserror::Error;

use super::{Subscale, SurveyInstrument};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScoringError {
    #[error("subscale {subscale_id}: item {item_id} is outside a rating vector of length {len}")]
    ItemOutOfRange { subscale_id: String, item_id: u32, len: usize },
    #[error("subscale {subscale_id} has no items")]
    EmptySubscale { subscale_id: String },
    #[error("subscale {subscale_id} has no RAI weight")]
    MissingWeight { subscale_id: String },
}

/// Arithmetic mean of `ratings` over the subscale's items (1-based ids).
pub fn subscale_mean(ratings: &[i32], subscale: &Subscale) -> Result<f64, ScoringError> {
    if subscale.item_ids.is_empty() {
        return Err(ScoringError::EmptySubscale { subscale_id: subscale.subscale_id.clone() });
    }
    let mut sum = 0i64;
    for &item_id in &subscale.item_ids {
        let idx = (item_id as usize).checked_sub(1).filter(|&i| i < ratings.len()).ok_or_else(|| {
            ScoringError::ItemOutOfRange {
                subscale_id: subscale.subscale_id.clone(),
                item_id,
                len: ratings.len(),
            }
        })?;
        sum += i64::from(ratings[idx]);
    }
    Ok(sum as f64 / subscale.item_ids.len() as f64)
}

/// Weighted sum of subscale means, in the instrument's subscale order.
pub fn rai(ratings: &[i32], instrument: &SurveyInstrument) -> Result<f64, ScoringError> {
    let mut total = 0.0;
    for sub in &instrument.subscales {
        let weight = sub
            .rai_weight
            .ok_or_else(|| ScoringError::MissingWeight { subscale_id: sub.subscale_id.clone() })?;
        total += weight * subscale_mean(ratings, sub)?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn breq() -> SurveyInstrument {
        SurveyInstrument::breq()
    }

    #[test]
    fn constant_vector_mean() {
        let inst = breq();
        for sub in &inst.subscales {
            assert_eq!(subscale_mean(&[4; 15], sub).unwrap(), 4.0);
        }
    }

    #[test]
    fn external_mean_hand_case() {
        let inst = breq();
        let ratings: Vec<i32> = (1..=15).map(|i| ((i - 1) % 6) + 1).collect();
        assert_eq!(subscale_mean(&ratings, inst.subscale("external").unwrap()).unwrap(), 2.5);
    }

    #[test]
    fn introjected_mean_hand_case() {
        let inst = breq();
        let mut ratings = vec![1; 15];
        ratings[4] = 2;
        ratings[5] = 4;
        ratings[6] = 6;
        assert_eq!(subscale_mean(&ratings, inst.subscale("introjected").unwrap()).unwrap(), 4.0);
    }

    #[test]
    fn out_of_range_index_is_structural_error() {
        let inst = breq();
        let err = subscale_mean(&[3; 10], inst.subscale("intrinsic").unwrap()).unwrap_err();
        assert!(matches!(err, ScoringError::ItemOutOfRange { item_id: 12, .. }));
    }

    #[test]
    fn rai_hand_case_is_thirteen() {
        // subscale means ext=1, intj=2, ide=5, intr=6
        let ratings = [1, 1, 1, 1, 2, 2, 2, 5, 5, 5, 5, 6, 6, 6, 6];
        assert_eq!(rai(&ratings, &breq()).unwrap(), 13.0);
    }

    #[test]
    fn rai_zero_weights() {
        let mut inst = breq();
        for s in &mut inst.subscales {
            s.rai_weight = Some(0.0);
        }
        assert_eq!(rai(&[1, 6, 2, 5, 3, 4, 1, 6, 2, 5, 3, 4, 1, 6, 2], &inst).unwrap(), 0.0);
    }

    #[test]
    fn rai_missing_weight() {
        let mut inst = breq();
        inst.subscales[2].rai_weight = None;
        assert_eq!(
            rai(&[3; 15], &inst).unwrap_err(),
            ScoringError::MissingWeight { subscale_id: "identified".into() }
        );
    }

    proptest! {
        #[test]
        fn rai_zero_on_constant_vectors(r in 1i32..=6) {
            prop_assert_eq!(rai(&[r; 15], &breq()).unwrap(), 0.0);
        }

        #[test]
        fn subscale_mean_within_bounds(ratings in prop::collection::vec(1i32..=6, 15)) {
            for sub in &breq().subscales {
                let m = subscale_mean(&ratings, sub).unwrap();
                prop_assert!((1.0..=6.0).contains(&m));
            }
        }

        #[test]
        fn rai_is_linear_in_subscale_means(
            a in prop::collection::vec(1i32..=6, 15),
            b in prop::collection::vec(1i32..=6, 15),
        ) {
            let inst = breq();
            // brute force: per-subscale sums written out by hand
            let groups: [(&[usize], f64); 4] = [
                (&[0, 1, 2, 3], -2.0),
                (&[4, 5, 6], -1.0),
                (&[7, 8, 9, 10], 1.0),
                (&[11, 12, 13, 14], 2.0),
            ];
            let mut summed = 0.0;
            for (idx, w) in groups {
                let ma: f64 = idx.iter().map(|&i| a[i] as f64).sum::<f64>() / idx.len() as f64;
                let mb: f64 = idx.iter().map(|&i| b[i] as f64).sum::<f64>() / idx.len() as f64;
                summed += w * (ma + mb);
            }
            let lhs = rai(&a, &inst).unwrap() + rai(&b, &inst).unwrap();
            prop_assert!((lhs - summed).abs() < 1e-12);
        }
    }
}
