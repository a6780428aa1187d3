//! Pearson correlation and the strategies for correlating two response matrices.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::Serialize;

use super::special::t_two_sided;
use super::MetricsError;
use crate::survey::ResponseMatrix;

/// Sample Pearson coefficient; `None` when lengths differ, n < 2, or either
/// input has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Two-sided p-value of a Pearson coefficient from `n` pairs.
pub fn pearson_p_value(r: f64, n: usize) -> Option<f64> {
    if n < 3 {
        return None;
    }
    let df = (n - 2) as f64;
    if r.abs() >= 1.0 {
        return Some(0.0);
    }
    let t = r * (df / (1.0 - r * r)).sqrt();
    Some(t_two_sided(t, df))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Correlation {
    pub rho: Option<f64>,
    pub n_points: usize,
}

/// How two response matrices are reduced to one coefficient. Both matrices
/// are first restricted to their common respondents.
pub trait CorrelationMode: Send + Sync {
    fn name(&self) -> &str;
    fn correlate(&self, a: &ResponseMatrix, b: &ResponseMatrix) -> Result<Correlation, MetricsError>;
}

fn common(a: &ResponseMatrix, b: &ResponseMatrix) -> Result<Vec<String>, MetricsError> {
    if a.item_count() != b.item_count() {
        return Err(MetricsError::ItemCountMismatch { left: a.item_count(), right: b.item_count() });
    }
    let ids: BTreeSet<&str> = a.id_set().intersection(&b.id_set()).copied().collect();
    Ok(ids.into_iter().map(str::to_string).collect())
}

/// One coefficient over the person × item grids flattened row-major.
#[derive(Debug, Clone, Copy, Default)]
pub struct Flattened;

impl CorrelationMode for Flattened {
    fn name(&self) -> &str {
        "flattened"
    }

    fn correlate(&self, a: &ResponseMatrix, b: &ResponseMatrix) -> Result<Correlation, MetricsError> {
        let ids = common(a, b)?;
        let flat = |m: &ResponseMatrix| -> Vec<f64> {
            ids.iter().flat_map(|id| m.row(id).expect("common id").iter().map(|&r| f64::from(r))).collect()
        };
        let (x, y) = (flat(a), flat(b));
        Ok(Correlation { rho: pearson(&x, &y), n_points: x.len() })
    }
}

/// Mean of per-respondent coefficients across items. Respondents whose rows
/// have zero variance are skipped; `n_points` counts the ones used.
#[derive(Debug, Clone, Copy, Default)]
pub struct PerRespondent;

impl CorrelationMode for PerRespondent {
    fn name(&self) -> &str {
        "per_respondent"
    }

    fn correlate(&self, a: &ResponseMatrix, b: &ResponseMatrix) -> Result<Correlation, MetricsError> {
        let ids = common(a, b)?;
        let as_f = |r: &[i32]| r.iter().map(|&v| f64::from(v)).collect::<Vec<_>>();
        let rs: Vec<f64> = ids
            .iter()
            .filter_map(|id| pearson(&as_f(a.row(id).expect("common id")), &as_f(b.row(id).expect("common id"))))
            .collect();
        let rho = (!rs.is_empty()).then(|| rs.iter().sum::<f64>() / rs.len() as f64);
        Ok(Correlation { rho, n_points: rs.len() })
    }
}

#[derive(Clone)]
pub struct CorrelationRegistry {
    modes: BTreeMap<String, Arc<dyn CorrelationMode>>,
}

impl CorrelationRegistry {
    /// `flattened` and `per_respondent`.
    pub fn builtin() -> Self {
        let mut reg = Self { modes: BTreeMap::new() };
        reg.register(Arc::new(Flattened));
        reg.register(Arc::new(PerRespondent));
        reg
    }

    pub fn register(&mut self, mode: Arc<dyn CorrelationMode>) {
        self.modes.insert(mode.name().to_string(), mode);
    }

    pub fn resolve(&self, name: &str) -> Result<Arc<dyn CorrelationMode>, MetricsError> {
        self.modes.get(name).cloned().ok_or_else(|| MetricsError::UnknownMode {
            name: name.to_string(),
            known: self.modes.keys().cloned().collect(),
        })
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.modes.keys().map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Association {
    pub rho: Option<f64>,
    pub p_value: Option<f64>,
    pub n: usize,
}

/// Correlation between each respondent's interview length and their person
/// RMSE averaged over the supplied interview-bearing conditions.
pub fn interview_length_association(
    interview_tokens: &BTreeMap<String, usize>,
    person_rmse_by_condition: &[&indexmap::IndexMap<String, f64>],
) -> Association {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (id, &tokens) in interview_tokens {
        let vals: Vec<f64> = person_rmse_by_condition.iter().filter_map(|m| m.get(id).copied()).collect();
        if vals.is_empty() {
            continue;
        }
        x.push(tokens as f64);
        y.push(vals.iter().sum::<f64>() / vals.len() as f64);
    }
    let n = x.len();
    if n < 3 {
        return Association { rho: None, p_value: None, n };
    }
    let rho = pearson(&x, &y);
    Association { rho, p_value: rho.and_then(|r| pearson_p_value(r, n)), n }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::survey::MatrixSource;
    use indexmap::IndexMap;

    #[test]
    fn basic_cases() {
        assert_eq!(pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]), Some(1.0));
        assert_eq!(pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), Some(-1.0));
        assert_eq!(pearson(&[1.0, 1.0, 1.0], &[3.0, 2.0, 1.0]), None);
        assert_eq!(pearson(&[1.0], &[1.0]), None);
        assert_eq!(pearson(&[1.0, 2.0], &[1.0]), None);
    }

    fn m(rows: &[(&str, &[i32])]) -> ResponseMatrix {
        ResponseMatrix::with_item_count(
            MatrixSource::Human,
            rows[0].1.len(),
            rows.iter().map(|(id, r)| (id.to_string(), r.to_vec())),
        )
        .unwrap()
    }

    #[test]
    fn flattened_uses_common_ids_in_id_order() {
        let a = m(&[("b", &[1, 2]), ("a", &[3, 4]), ("x", &[6, 6])]);
        let b = m(&[("a", &[3, 4]), ("b", &[1, 2])]);
        let c = Flattened.correlate(&a, &b).unwrap();
        assert_eq!(c, Correlation { rho: Some(1.0), n_points: 4 });
    }

    #[test]
    fn per_respondent_skips_flat_rows() {
        let a = m(&[("a", &[1, 2, 3]), ("b", &[2, 2, 2]), ("c", &[1, 2, 3])]);
        let b = m(&[("a", &[1, 2, 3]), ("b", &[1, 2, 3]), ("c", &[3, 2, 1])]);
        let c = PerRespondent.correlate(&a, &b).unwrap();
        assert_eq!(c, Correlation { rho: Some(0.0), n_points: 2 });
    }

    #[test]
    fn registry_resolves_modes() {
        let reg = CorrelationRegistry::builtin();
        assert_eq!(reg.names().collect::<Vec<_>>(), ["flattened", "per_respondent"]);
        assert!(matches!(reg.resolve("spearman"), Err(MetricsError::UnknownMode { .. })));
    }

    #[test]
    fn association_cases() {
        let tokens: BTreeMap<String, usize> = [("a", 100), ("b", 250), ("c", 400), ("d", 90)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        let affine: IndexMap<String, f64> = tokens.iter().map(|(k, &v)| (k.clone(), 0.5 + v as f64 * 0.01)).collect();
        let got = interview_length_association(&tokens, &[&affine]);
        assert!((got.rho.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(got.p_value, Some(0.0));
        let flat: BTreeMap<String, usize> = tokens.keys().map(|k| (k.clone(), 50)).collect();
        assert_eq!(interview_length_association(&flat, &[&affine]).rho, None);
        let two: BTreeMap<String, usize> = tokens.into_iter().take(2).collect();
        assert_eq!(interview_length_association(&two, &[&affine]).n, 2);
    }

    #[test]
    fn p_value_matches_reference() {
        use statrs::distribution::{ContinuousCDF, StudentsT};
        for &(r, n) in &[(0.404, 19usize), (-0.2, 10), (0.9, 5), (0.0, 30)] {
            let df = (n - 2) as f64;
            let t: f64 = r * (df / (1.0 - r * r)).sqrt();
            let want = 2.0 * (1.0 - StudentsT::new(0.0, 1.0, df).unwrap().cdf(t.abs()));
            assert!((pearson_p_value(r, n).unwrap() - want).abs() < 1e-10);
        }
    }
}
