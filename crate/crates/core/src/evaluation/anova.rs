use serde::{Deserialize, Serialize};

use super::special::f_upper_tail;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnovaResult {
    /// `f64::INFINITY` is reported as `None` in serialized form.
    #[serde(with = "finite_or_null")]
    pub f: f64,
    pub p: f64,
    pub df_between: usize,
    pub df_within: usize,
    /// Within-group variance was zero while group means differ.
    pub infinite_f: bool,
}

mod finite_or_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// Classical one-way ANOVA; the p-value is the upper tail of F(k-1, N-k).
pub fn anova_oneway(groups: &[Vec<f64>]) -> Result<AnovaResult> {
    if groups.len() < 2 {
        return Err(Error::contract("ANOVA needs at least two groups"));
    }
    if let Some(i) = groups.iter().position(|g| g.len() < 2) {
        return Err(Error::contract(format!("ANOVA group {i} has fewer than two values")));
    }
    if groups.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::contract("ANOVA values must be finite"));
    }
    let k = groups.len();
    let n: usize = groups.iter().map(Vec::len).sum();
    let grand = groups.iter().flatten().sum::<f64>() / n as f64;
    let mut ss_between = 0.0;
    let mut ss_within = 0.0;
    for g in groups {
        let m = g.iter().sum::<f64>() / g.len() as f64;
        ss_between += g.len() as f64 * (m - grand) * (m - grand);
        ss_within += g.iter().map(|x| (x - m) * (x - m)).sum::<f64>();
    }
    let (df_b, df_w) = (k - 1, n - k);
    let result = |f: f64, p: f64, infinite_f: bool| AnovaResult {
        f,
        p,
        df_between: df_b,
        df_within: df_w,
        infinite_f,
    };
    // Exact-zero checks on group means rather than on rounded sums of squares.
    let means_equal = groups
        .iter()
        .map(|g| g.iter().sum::<f64>() / g.len() as f64)
        .collect::<Vec<_>>()
        .windows(2)
        .all(|w| w[0] == w[1]);
    let within_zero = groups.iter().all(|g| g.iter().all(|&x| x == g[0]));
    if means_equal && (within_zero || ss_between == 0.0) {
        return Ok(result(0.0, 1.0, false));
    }
    if within_zero {
        return Ok(result(f64::INFINITY, 0.0, true));
    }
    let f = (ss_between / df_b as f64) / (ss_within / df_w as f64);
    Ok(result(f, f_upper_tail(f, df_b as f64, df_w as f64), false))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_groups() {
        let r = anova_oneway(&[vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]]).unwrap();
        assert_eq!((r.f, r.p), (0.0, 1.0));
    }

    #[test]
    fn zero_within_variance() {
        let r = anova_oneway(&[vec![0.0; 3], vec![1.0; 3]]).unwrap();
        assert_eq!(r.p, 0.0);
        assert!(r.infinite_f && r.f.is_infinite());
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"f\":null"));
    }

    #[test]
    fn all_values_equal() {
        let r = anova_oneway(&[vec![2.0; 3], vec![2.0; 4]]).unwrap();
        assert_eq!((r.f, r.p), (0.0, 1.0));
    }

    #[test]
    fn small_table() {
        // [3,4,5] vs [6,7,8]: SSB = 13.5, SSW = 4, F = 13.5 / (4 / 4) = 13.5
        let r = anova_oneway(&[vec![3.0, 4.0, 5.0], vec![6.0, 7.0, 8.0]]).unwrap();
        assert!((r.f - 13.5).abs() < 1e-12);
        assert_eq!((r.df_between, r.df_within), (1, 4));
        assert!(r.p > 0.0 && r.p < 0.05);
    }

    #[test]
    fn group_too_small() {
        assert!(anova_oneway(&[vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(anova_oneway(&[vec![1.0, 2.0]]).is_err());
    }
}
