//! Fixed-effects, main-effects-only ANOVA for balanced single-observation designs.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::special::f_sf;
use super::MetricsError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnovaRow {
    pub factor: String,
    pub df: usize,
    pub ss: f64,
    pub ms: f64,
    /// `None` on the residual row and whenever the residual mean square is zero.
    pub f: Option<f64>,
    pub p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnovaTable {
    /// Factor rows in input order, then the residual row.
    pub rows: Vec<AnovaRow>,
    pub ss_total: f64,
    pub n: usize,
}

impl AnovaTable {
    pub fn row(&self, factor: &str) -> Option<&AnovaRow> {
        self.rows.iter().find(|r| r.factor == factor)
    }

    pub fn residual(&self) -> &AnovaRow {
        self.rows.last().expect("table always has a residual row")
    }
}

/// One observation: a level per factor plus the response.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub levels: Vec<String>,
    pub value: f64,
}

/// Main-effects ANOVA over a full, balanced cross of `factors` with exactly
/// one observation per cell.
pub fn anova_main_effects(factors: &[&str], observations: &[Observation]) -> Result<AnovaTable, MetricsError> {
    let k = factors.len();
    if k == 0 {
        return Err(MetricsError::Design("no factors".into()));
    }
    if let Some(o) = observations.iter().find(|o| o.levels.len() != k) {
        return Err(MetricsError::Design(format!("observation {:?} has {} levels, expected {k}", o.levels, o.levels.len())));
    }
    if let Some(o) = observations.iter().find(|o| !o.value.is_finite()) {
        return Err(MetricsError::Design(format!("observation {:?} is not finite", o.levels)));
    }
    let levels: Vec<Vec<&str>> = (0..k)
        .map(|f| observations.iter().map(|o| o.levels[f].as_str()).collect::<BTreeSet<_>>().into_iter().collect())
        .collect();
    if let Some(f) = levels.iter().position(|l| l.len() < 2) {
        return Err(MetricsError::Design(format!("factor {} needs at least two levels", factors[f])));
    }
    let cells: usize = levels.iter().map(Vec::len).product();
    let mut by_cell: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    for o in observations {
        let idx: Vec<usize> = (0..k).map(|f| levels[f].binary_search(&o.levels[f].as_str()).expect("level seen")).collect();
        if by_cell.insert(idx, o.value).is_some() {
            return Err(MetricsError::Design(format!("cell {:?} observed more than once", o.levels)));
        }
    }
    if by_cell.len() != cells {
        return Err(MetricsError::Design(format!(
            "unbalanced design: {} of {cells} cells observed",
            by_cell.len()
        )));
    }
    let n = cells;
    let df_factors: Vec<usize> = levels.iter().map(|l| l.len() - 1).collect();
    let df_res = (n - 1)
        .checked_sub(df_factors.iter().sum())
        .filter(|&d| d > 0)
        .ok_or_else(|| MetricsError::Design("no residual degrees of freedom".into()))?;

    // canonical cell order, shifted by the first value
    let shift = *by_cell.values().next().expect("non-empty");
    let ys: Vec<(&Vec<usize>, f64)> = by_cell.iter().map(|(c, &v)| (c, v - shift)).collect();
    let grand = ys.iter().map(|(_, y)| y).sum::<f64>() / n as f64;
    let effects: Vec<Vec<f64>> = (0..k)
        .map(|f| {
            let per = (n / levels[f].len()) as f64;
            let mut sums = vec![0.0; levels[f].len()];
            for (c, y) in &ys {
                sums[c[f]] += y;
            }
            sums.into_iter().map(|s| s / per - grand).collect()
        })
        .collect();
    let ss_factors: Vec<f64> = (0..k)
        .map(|f| {
            let per = (n / levels[f].len()) as f64;
            effects[f].iter().map(|e| per * e * e).sum()
        })
        .collect();
    let ss_total: f64 = ys.iter().map(|(_, y)| (y - grand).powi(2)).sum();
    let ss_res: f64 = ys
        .iter()
        .map(|(c, y)| {
            let fitted = grand + (0..k).map(|f| effects[f][c[f]]).sum::<f64>();
            (y - fitted).powi(2)
        })
        .sum();
    let ms_res = ss_res / df_res as f64;

    let mut rows: Vec<AnovaRow> = (0..k)
        .map(|f| {
            let ms = ss_factors[f] / df_factors[f] as f64;
            let fstat = (ms_res > 0.0).then(|| ms / ms_res);
            AnovaRow {
                factor: factors[f].to_string(),
                df: df_factors[f],
                ss: ss_factors[f],
                ms,
                f: fstat,
                p: fstat.map(|x| f_sf(x, df_factors[f] as f64, df_res as f64)),
            }
        })
        .collect();
    rows.push(AnovaRow { factor: "residual".into(), df: df_res, ss: ss_res, ms: ms_res, f: None, p: None });
    Ok(AnovaTable { rows, ss_total, n })
}

/// One correlation from the chatbot-pair × prompt × temperature design.
#[derive(Debug, Clone, PartialEq)]
pub struct PairObservation {
    pub pair_label: String,
    pub variant: String,
    pub temperature: String,
    pub rho: f64,
}

/// Three-way main-effects ANOVA with factors `pair`, `prompt`, `temperature`.
pub fn anova3_main_effects(observations: &[PairObservation]) -> Result<AnovaTable, MetricsError> {
    let obs: Vec<Observation> = observations
        .iter()
        .map(|o| Observation {
            levels: vec![o.pair_label.clone(), o.variant.clone(), o.temperature.clone()],
            value: o.rho,
        })
        .collect();
    anova_main_effects(&["pair", "prompt", "temperature"], &obs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn design(f: impl Fn(usize, usize, usize) -> f64) -> Vec<PairObservation> {
        let mut out = Vec::new();
        for p in 0..3 {
            for v in 0..4 {
                for t in 0..2 {
                    out.push(PairObservation {
                        pair_label: format!("pair{p}"),
                        variant: format!("P{v}"),
                        temperature: format!("T{t}"),
                        rho: f(p, v, t),
                    });
                }
            }
        }
        out
    }

    #[test]
    fn paper_design_dfs() {
        let t = anova3_main_effects(&design(|p, v, t| 0.9 - 0.05 * p as f64 + 0.01 * ((v * 7 + t * 3 + p) % 5) as f64))
            .unwrap();
        let dfs: Vec<usize> = t.rows.iter().map(|r| r.df).collect();
        assert_eq!(dfs, [2, 3, 1, 17]);
        assert_eq!(dfs.iter().sum::<usize>(), t.n - 1);
        let ss: f64 = t.rows.iter().map(|r| r.ss).sum();
        assert!((ss - t.ss_total).abs() <= 1e-9 * t.ss_total.max(1e-300));
    }

    #[test]
    fn constant_response_has_undefined_f() {
        let t = anova3_main_effects(&design(|_, _, _| 0.9)).unwrap();
        assert!(t.rows.iter().all(|r| r.ss == 0.0 && r.f.is_none() && r.p.is_none()));
    }

    #[test]
    fn order_does_not_matter() {
        let mut obs = design(|p, v, t| ((p * 31 + v * 17 + t * 5) % 11) as f64 / 10.0);
        let a = anova3_main_effects(&obs).unwrap();
        obs.reverse();
        obs.swap(3, 17);
        assert_eq!(anova3_main_effects(&obs).unwrap(), a);
    }

    #[test]
    fn design_errors() {
        let mut obs = design(|_, _, _| 1.0);
        obs.pop();
        assert!(matches!(anova3_main_effects(&obs), Err(MetricsError::Design(_))));
        let mut dup = design(|_, _, _| 1.0);
        dup[1] = dup[0].clone();
        assert!(matches!(anova3_main_effects(&dup), Err(MetricsError::Design(_))));
    }
}
