use serde::Serialize;

use super::MetricsError;
use crate::survey::{MatrixSource, ResponseMatrix};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ItemStats {
    #[serde(skip)]
    pub source: MatrixSource,
    pub item_id: u32,
    pub mean: f64,
    /// Sample variance; `None` with fewer than two respondents.
    pub variance: Option<f64>,
    pub n: usize,
}

/// Per-item mean and sample (n − 1) variance across respondents.
pub fn item_stats(matrix: &ResponseMatrix) -> Result<Vec<ItemStats>, MetricsError> {
    let n = matrix.n_respondents();
    if n == 0 {
        return Err(MetricsError::Empty(matrix.source().to_string()));
    }
    let stats = (0..matrix.item_count())
        .map(|i| {
            let mean = matrix.column(i).map(f64::from).sum::<f64>() / n as f64;
            let variance = (n > 1).then(|| {
                matrix.column(i).map(|x| (f64::from(x) - mean).powi(2)).sum::<f64>() / (n - 1) as f64
            });
            ItemStats { source: matrix.source().clone(), item_id: i as u32 + 1, mean, variance, n }
        })
        .collect();
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: &[&[i32]]) -> ResponseMatrix {
        ResponseMatrix::with_item_count(
            MatrixSource::Human,
            rows[0].len(),
            rows.iter().enumerate().map(|(k, r)| (format!("p{k}"), r.to_vec())),
        )
        .unwrap()
    }

    #[test]
    fn hand_cases() {
        let s = item_stats(&matrix(&[&[1, 5], &[3, 5], &[5, 5]])).unwrap();
        assert_eq!((s[0].mean, s[0].variance), (3.0, Some(4.0)));
        assert_eq!((s[1].mean, s[1].variance), (5.0, Some(0.0)));
        assert_eq!(s[1].item_id, 2);
        let single = item_stats(&matrix(&[&[2, 4]])).unwrap();
        assert_eq!(single[0].mean, 2.0);
        assert!(single.iter().all(|x| x.variance.is_none() && x.n == 1));
    }

    #[test]
    fn empty_is_an_error() {
        let m = ResponseMatrix::with_item_count(MatrixSource::Human, 3, Vec::new()).unwrap();
        assert!(item_stats(&m).is_err());
    }
}
