//! Partition comparison and the adjusted-adherence model-selection rule.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{BccError, Result};

/// A labelling of `n >= 2` items. Labels are arbitrary integers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    labels: Vec<i64>,
}

impl Partition {
    pub fn new(labels: Vec<i64>) -> Result<Self> {
        if labels.len() < 2 {
            return Err(BccError::Invalid(format!("a partition needs at least 2 items, got {}", labels.len())));
        }
        Ok(Self { labels })
    }

    pub fn from_usize(labels: &[usize]) -> Result<Self> {
        Self::new(labels.iter().map(|&l| l as i64).collect())
    }

    pub fn labels(&self) -> &[i64] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Reads `subject,label` rows (header required) in file order.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<(Vec<String>, Self)> {
        let path = path.as_ref();
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).flexible(true).from_path(path).map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => BccError::io(path, io),
            other => BccError::Invalid(format!("{other:?}")),
        })?;
        let mut ids = Vec::new();
        let mut labels = Vec::new();
        for (line, rec) in reader.records().enumerate() {
            let rec = rec?;
            let parse_err = |m: String| BccError::Parse { path: path.display().to_string(), line: line + 2, message: m };
            if rec.len() < 2 {
                return Err(parse_err("expected at least two columns (subject, label)".into()));
            }
            let label: i64 = rec[1].parse().map_err(|_| parse_err(format!("non-integer label '{}'", &rec[1])))?;
            ids.push(rec[0].to_string());
            labels.push(label);
        }
        Ok((ids, Self::new(labels)?))
    }
}

fn choose2(x: u64) -> f64 {
    (x * x.saturating_sub(1)) as f64 / 2.0
}

struct Contingency {
    cells: BTreeMap<(i64, i64), u64>,
    rows: BTreeMap<i64, u64>,
    cols: BTreeMap<i64, u64>,
    n: u64,
}

fn contingency(a: &Partition, b: &Partition) -> Result<Contingency> {
    if a.len() != b.len() {
        return Err(BccError::Invalid(format!("partition lengths differ ({} vs {})", a.len(), b.len())));
    }
    let mut t = Contingency { cells: BTreeMap::new(), rows: BTreeMap::new(), cols: BTreeMap::new(), n: a.len() as u64 };
    for (&x, &y) in a.labels.iter().zip(&b.labels) {
        *t.cells.entry((x, y)).or_default() += 1;
        *t.rows.entry(x).or_default() += 1;
        *t.cols.entry(y).or_default() += 1;
    }
    Ok(t)
}

/// A metric value with a flag set when the formula was degenerate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub value: f64,
    pub degenerate: bool,
}

/// Hubert–Arabie adjusted Rand index. Returns 1 (flagged) when the
/// denominator vanishes, i.e. both partitions are trivial in the same way.
pub fn adjusted_rand(a: &Partition, b: &Partition) -> Result<MetricValue> {
    let t = contingency(a, b)?;
    let index: f64 = t.cells.values().map(|&c| choose2(c)).sum();
    let sa: f64 = t.rows.values().map(|&c| choose2(c)).sum();
    let sb: f64 = t.cols.values().map(|&c| choose2(c)).sum();
    let expected = sa * sb / choose2(t.n);
    let max = 0.5 * (sa + sb);
    let denom = max - expected;
    if denom.abs() < 1e-12 {
        return Ok(MetricValue { value: 1.0, degenerate: true });
    }
    Ok(MetricValue { value: (index - expected) / denom, degenerate: false })
}

/// Pair-counting Jaccard `n11 / (n11 + n10 + n01)`; 1 (flagged) when no pair
/// is co-clustered in either partition.
pub fn jaccard_pair(a: &Partition, b: &Partition) -> Result<MetricValue> {
    let t = contingency(a, b)?;
    let n11: f64 = t.cells.values().map(|&c| choose2(c)).sum();
    let sa: f64 = t.rows.values().map(|&c| choose2(c)).sum();
    let sb: f64 = t.cols.values().map(|&c| choose2(c)).sum();
    let denom = sa + sb - n11;
    if denom <= 0.0 {
        return Ok(MetricValue { value: 1.0, degenerate: true });
    }
    Ok(MetricValue { value: n11 / denom, degenerate: false })
}

/// `(K alpha - 1) / (K - 1)`, mapping `[1/K, 1]` onto `[0, 1]`.
pub fn adjusted_adherence(alpha: f64, k: usize) -> Result<f64> {
    if k < 2 {
        return Err(BccError::Invalid("K must be at least 2".into()));
    }
    let lower = 1.0 / k as f64;
    if !(alpha >= lower - 1e-12 && alpha <= 1.0 + 1e-12) {
        return Err(BccError::Invalid(format!("adherence {alpha} outside [1/K, 1] for K = {k}")));
    }
    let kf = k as f64;
    Ok(((kf * alpha - 1.0) / (kf - 1.0)).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSelection {
    #[serde(rename = "K_hat")]
    pub k_hat: usize,
    pub tie: bool,
    /// `(K, mean adjusted adherence)` in ascending `K`.
    pub scores: Vec<(usize, f64)>,
}

/// Argmax of the mean adjusted adherence; ties go to the smallest K and are flagged.
pub fn select_k(scores: &[(usize, f64)]) -> Result<KSelection> {
    if scores.is_empty() {
        return Err(BccError::Invalid("no candidate K values".into()));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by_key(|&(k, _)| k);
    let best = sorted.iter().map(|&(_, s)| s).fold(f64::NEG_INFINITY, f64::max);
    let winners: Vec<usize> = sorted.iter().filter(|&&(_, s)| s == best).map(|&(k, _)| k).collect();
    Ok(KSelection { k_hat: winners[0], tie: winners.len() > 1, scores: sorted })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArandReport {
    /// Agreement of the global clustering.
    pub global: f64,
    /// Mean over markers of the local-clustering agreement.
    pub individual: f64,
}

/// `truth_l` and `est_l` are `[subject][marker]`.
pub fn arand_report(truth_c: &[usize], truth_l: &[Vec<usize>], est_c: &[usize], est_l: &[Vec<usize>]) -> Result<ArandReport> {
    let global = adjusted_rand(&Partition::from_usize(truth_c)?, &Partition::from_usize(est_c)?)?.value;
    if truth_l.len() != est_l.len() || truth_l.is_empty() {
        return Err(BccError::Invalid("local label matrices differ in shape".into()));
    }
    let r = truth_l[0].len();
    let mut total = 0.0;
    for m in 0..r {
        let a: Vec<usize> = truth_l.iter().map(|row| row[m]).collect();
        let b: Vec<usize> = est_l.iter().map(|row| row[m]).collect();
        total += adjusted_rand(&Partition::from_usize(&a)?, &Partition::from_usize(&b)?)?.value;
    }
    Ok(ArandReport { global, individual: total / r as f64 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(v: &[i64]) -> Partition {
        Partition::new(v.to_vec()).unwrap()
    }

    #[test]
    fn ari_basics() {
        assert_eq!(adjusted_rand(&p(&[1, 1, 2, 2]), &p(&[1, 1, 2, 2])).unwrap().value, 1.0);
        assert_eq!(adjusted_rand(&p(&[1, 1, 2, 2]), &p(&[5, 5, 3, 3])).unwrap().value, 1.0);
        // pairs: a co-clusters {12,34}; b co-clusters {13,24}; no overlap
        let v = adjusted_rand(&p(&[1, 1, 2, 2]), &p(&[1, 2, 1, 2])).unwrap().value;
        assert!((v - (-0.5)).abs() < 1e-12);
        assert!(adjusted_rand(&p(&[1, 2]), &p(&[1, 2, 3])).is_err());
        assert!(Partition::new(vec![1]).is_err());
        let d = adjusted_rand(&p(&[1, 1, 1]), &p(&[2, 2, 2])).unwrap();
        assert!(d.degenerate && d.value == 1.0);
    }

    #[test]
    fn jaccard_basics() {
        assert_eq!(jaccard_pair(&p(&[1, 1, 2, 2]), &p(&[1, 1, 2, 2])).unwrap().value, 1.0);
        assert_eq!(jaccard_pair(&p(&[1, 1, 1, 1]), &p(&[1, 2, 3, 4])).unwrap().value, 0.0);
        // a: {12,34}; b: {12,13,23}; n11 = 1, union = 4
        assert!((jaccard_pair(&p(&[1, 1, 2, 2]), &p(&[1, 1, 1, 2])).unwrap().value - 0.25).abs() < 1e-15);
        let d = jaccard_pair(&p(&[1, 2, 3]), &p(&[3, 2, 1])).unwrap();
        assert!(d.degenerate && d.value == 1.0);
    }

    #[test]
    fn adherence_mapping() {
        assert_eq!(adjusted_adherence(1.0, 4).unwrap(), 1.0);
        assert!(adjusted_adherence(1.0 / 3.0, 3).unwrap().abs() < 1e-15);
        let a: Vec<f64> = [0.92, 0.82, 0.80].iter().map(|&x| adjusted_adherence(x, 3).unwrap()).collect();
        assert!((a[0] - 0.88).abs() < 1e-12 && (a[1] - 0.73).abs() < 1e-12 && (a[2] - 0.70).abs() < 1e-12);
        assert!(((a.iter().sum::<f64>() / 3.0) - 0.77).abs() < 1e-12);
        assert!(adjusted_adherence(0.2, 3).is_err());
    }

    #[test]
    fn k_selection() {
        let s = select_k(&[(2, 0.5), (3, 0.8), (4, 0.6)]).unwrap();
        assert_eq!((s.k_hat, s.tie), (3, false));
        let s = select_k(&[(3, 0.7), (2, 0.7)]).unwrap();
        assert_eq!((s.k_hat, s.tie), (2, true));
        assert_eq!(select_k(&[(5, 0.1)]).unwrap().k_hat, 5);
    }
}
