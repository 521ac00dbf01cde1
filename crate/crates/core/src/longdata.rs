//! Irregular mixed-type longitudinal data and the per-series design matrices.
//!
//! Each (subject, marker) pair owns its own time grid; nothing here aligns
//! times across markers. Subjects are indexed in order of first appearance in
//! the input, markers in the order they are declared by the caller.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{BccError, Issue, Result};
use crate::family::Family;

pub const CSV_HEADER: [&str; 4] = ["subject_id", "marker_id", "time", "value"];

#[derive(Debug, Clone, PartialEq)]
pub struct LongRecord {
    pub subject_id: String,
    pub marker_id: String,
    pub time: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkerSpec {
    pub name: String,
    pub family: Family,
}

impl MarkerSpec {
    pub fn new(name: impl Into<String>, family: Family) -> Self {
        Self {
            name: name.into(),
            family,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarkerSeries {
    pub subject: usize,
    pub marker: usize,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl MarkerSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// Immutable collection of per-subject, per-marker series.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    subject_ids: Vec<String>,
    markers: Vec<MarkerSpec>,
    /// Indexed `[subject][marker]`.
    series: Vec<Vec<MarkerSeries>>,
}

impl Dataset {
    /// Builds a dataset from long-format records, validating every value
    /// against its marker's family.
    pub fn from_records(records: &[LongRecord], markers: Vec<MarkerSpec>) -> Result<Self> {
        let mut issues = Vec::new();
        if markers.is_empty() {
            issues.push(Issue::new("markers", "at least one marker is required"));
        }
        let marker_index: HashMap<&str, usize> = markers
            .iter()
            .enumerate()
            .map(|(r, m)| (m.name.as_str(), r))
            .collect();
        if marker_index.len() != markers.len() {
            issues.push(Issue::new("markers", "duplicate marker names"));
        }

        let mut subject_ids: Vec<String> = Vec::new();
        let mut subject_index: HashMap<String, usize> = HashMap::new();
        let mut raw: Vec<Vec<Vec<(f64, f64)>>> = Vec::new();

        for (row, rec) in records.iter().enumerate() {
            let Some(&r) = marker_index.get(rec.marker_id.as_str()) else {
                issues.push(Issue::new(
                    format!("record[{row}].marker_id"),
                    format!("undeclared marker '{}'", rec.marker_id),
                ));
                continue;
            };
            if !rec.time.is_finite() {
                issues.push(Issue::new(format!("record[{row}].time"), "time must be finite"));
                continue;
            }
            if let Err(msg) = markers[r].family.check_value(rec.value) {
                issues.push(Issue::new(
                    format!("record[{row}].value"),
                    format!("{msg} {} for {} marker '{}'", rec.value, markers[r].family, rec.marker_id),
                ));
                continue;
            }
            let i = *subject_index.entry(rec.subject_id.clone()).or_insert_with(|| {
                subject_ids.push(rec.subject_id.clone());
                raw.push(vec![Vec::new(); markers.len()]);
                subject_ids.len() - 1
            });
            raw[i][r].push((rec.time, rec.value));
        }

        if subject_ids.len() < 2 {
            issues.push(Issue::new("subjects", "at least 2 subjects are required"));
        }
        for (i, per_marker) in raw.iter().enumerate() {
            for (r, obs) in per_marker.iter().enumerate() {
                if obs.is_empty() {
                    issues.push(Issue::new(
                        format!("subject '{}'", subject_ids[i]),
                        format!("no observations for marker '{}'", markers[r].name),
                    ));
                }
            }
        }
        if !issues.is_empty() {
            return Err(BccError::Validation(issues));
        }

        let series = raw
            .into_iter()
            .enumerate()
            .map(|(i, per_marker)| {
                per_marker
                    .into_iter()
                    .enumerate()
                    .map(|(r, mut obs)| {
                        obs.sort_by(|a, b| a.0.total_cmp(&b.0));
                        MarkerSeries {
                            subject: i,
                            marker: r,
                            times: obs.iter().map(|o| o.0).collect(),
                            values: obs.iter().map(|o| o.1).collect(),
                        }
                    })
                    .collect()
            })
            .collect();

        Ok(Self {
            subject_ids,
            markers,
            series,
        })
    }

    pub fn n_subjects(&self) -> usize {
        self.subject_ids.len()
    }

    pub fn n_markers(&self) -> usize {
        self.markers.len()
    }

    pub fn subject_ids(&self) -> &[String] {
        &self.subject_ids
    }

    pub fn markers(&self) -> &[MarkerSpec] {
        &self.markers
    }

    pub fn family(&self, r: usize) -> Family {
        self.markers[r].family
    }

    pub fn series(&self, subject: usize, marker: usize) -> &MarkerSeries {
        &self.series[subject][marker]
    }

    /// Total number of observations for marker `r`.
    pub fn marker_total(&self, r: usize) -> usize {
        self.series.iter().map(|s| s[r].len()).sum()
    }

    /// Long-format records in a deterministic order (subject, marker, time).
    pub fn to_records(&self) -> Vec<LongRecord> {
        let mut out = Vec::new();
        for (i, per_marker) in self.series.iter().enumerate() {
            for (r, s) in per_marker.iter().enumerate() {
                for (&t, &y) in s.times.iter().zip(&s.values) {
                    out.push(LongRecord {
                        subject_id: self.subject_ids[i].clone(),
                        marker_id: self.markers[r].name.clone(),
                        time: t,
                        value: y,
                    });
                }
            }
        }
        out
    }

    /// A copy of this dataset with every value replaced, keeping times and structure.
    pub fn with_values(&self, values: impl Fn(usize, usize) -> Vec<f64>) -> Self {
        let mut next = self.clone();
        for (i, per_marker) in next.series.iter_mut().enumerate() {
            for (r, s) in per_marker.iter_mut().enumerate() {
                let v = values(i, r);
                assert_eq!(v.len(), s.values.len());
                s.values = v;
            }
        }
        next
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_to_io(path, e))?;
        w.write_record(CSV_HEADER)?;
        for rec in self.to_records() {
            w.write_record([
                rec.subject_id.as_str(),
                rec.marker_id.as_str(),
                &fmt_f64(rec.time),
                &fmt_f64(rec.value),
            ])?;
        }
        w.flush().map_err(|e| BccError::io(path, e))?;
        Ok(())
    }
}

fn csv_to_io(path: &Path, e: csv::Error) -> BccError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => BccError::io(path, io),
        other => BccError::Invalid(format!("{}: {other:?}", path.display())),
    }
}

/// Shortest round-trip representation, used for every float written to disk.
pub fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

/// Reads a long-format CSV with header `subject_id,marker_id,time,value`.
pub fn ingest_csv(path: impl AsRef<Path>, markers: Vec<MarkerSpec>) -> Result<Dataset> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_to_io(path, e))?;
    let header = reader.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(BccError::Parse {
            path: display,
            line: 1,
            message: format!("expected header '{}'", CSV_HEADER.join(",")),
        });
    }
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| BccError::Parse {
            path: display.clone(),
            line: e.position().map(|p| p.line() as usize).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
        let parse = |idx: usize, what: &str| -> Result<f64> {
            row[idx].parse::<f64>().map_err(|_| BccError::Parse {
                path: display.clone(),
                line,
                message: format!("invalid {what} '{}'", &row[idx]),
            })
        };
        records.push(LongRecord {
            subject_id: row[0].to_string(),
            marker_id: row[1].to_string(),
            time: parse(2, "time")?,
            value: parse(3, "value")?,
        });
    }
    Dataset::from_records(&records, markers)
}

/// One column of a design matrix, as a function of time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DesignTerm {
    Intercept,
    /// `time^power`, with `power >= 1`.
    TimePow(u32),
}

impl DesignTerm {
    #[inline]
    pub fn eval(self, t: f64) -> f64 {
        match self {
            DesignTerm::Intercept => 1.0,
            DesignTerm::TimePow(1) => t,
            DesignTerm::TimePow(p) => t.powi(p as i32),
        }
    }
}

impl fmt::Display for DesignTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DesignTerm::Intercept => f.write_str("intercept"),
            DesignTerm::TimePow(1) => f.write_str("time"),
            DesignTerm::TimePow(p) => write!(f, "time^{p}"),
        }
    }
}

impl std::str::FromStr for DesignTerm {
    type Err = BccError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "intercept" | "1" => return Ok(DesignTerm::Intercept),
            "time" | "t" => return Ok(DesignTerm::TimePow(1)),
            _ => {}
        }
        let power = s
            .strip_prefix("time^")
            .or_else(|| s.strip_prefix("time"))
            .and_then(|p| p.parse::<u32>().ok())
            .filter(|&p| p >= 1);
        power
            .map(DesignTerm::TimePow)
            .ok_or_else(|| BccError::Invalid(format!("unknown design term '{s}'")))
    }
}

impl Serialize for DesignTerm {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for DesignTerm {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Fixed and random design terms for every marker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSpec {
    pub fixed: Vec<Vec<DesignTerm>>,
    pub random: Vec<Vec<DesignTerm>>,
}

impl DesignSpec {
    /// `(intercept, time)` fixed and intercept-only random for every marker.
    pub fn linear_random_intercept(n_markers: usize) -> Self {
        Self {
            fixed: vec![vec![DesignTerm::Intercept, DesignTerm::TimePow(1)]; n_markers],
            random: vec![vec![DesignTerm::Intercept]; n_markers],
        }
    }

    pub fn p(&self, r: usize) -> usize {
        self.fixed[r].len()
    }

    pub fn q(&self, r: usize) -> usize {
        self.random[r].len()
    }

    pub fn validate(&self, n_markers: usize) -> Vec<Issue> {
        let mut issues = Vec::new();
        if self.fixed.len() != n_markers || self.random.len() != n_markers {
            issues.push(Issue::new(
                "markers",
                format!(
                    "design given for {} fixed / {} random markers, expected {n_markers}",
                    self.fixed.len(),
                    self.random.len()
                ),
            ));
            return issues;
        }
        for r in 0..n_markers {
            let fixed = &self.fixed[r];
            let random = &self.random[r];
            if fixed.is_empty() {
                issues.push(Issue::new(format!("markers[{r}].fixed"), "at least one fixed term is required"));
            }
            if random.is_empty() {
                issues.push(Issue::new(format!("markers[{r}].random"), "at least one random term is required"));
            }
            if random.len() > fixed.len() {
                issues.push(Issue::new(
                    format!("markers[{r}].random"),
                    "random dimension exceeds fixed dimension",
                ));
            }
            for (idx, t) in random.iter().enumerate() {
                if !fixed.contains(t) {
                    issues.push(Issue::new(
                        format!("markers[{r}].random[{idx}]"),
                        format!("random term '{t}' is not among the fixed terms"),
                    ));
                }
            }
            for (list, name) in [(fixed, "fixed"), (random, "random")] {
                for a in 0..list.len() {
                    if list[a + 1..].contains(&list[a]) {
                        issues.push(Issue::new(format!("markers[{r}].{name}"), format!("duplicate term '{}'", list[a])));
                    }
                }
            }
        }
        issues
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesDesign {
    pub x: DMatrix<f64>,
    pub z: DMatrix<f64>,
}

/// Materialised `X` (n×p) and `Z` (n×q) for every (subject, marker).
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrices {
    p: Vec<usize>,
    q: Vec<usize>,
    designs: Vec<Vec<SeriesDesign>>,
}

fn build_matrix(times: &[f64], terms: &[DesignTerm]) -> DMatrix<f64> {
    DMatrix::from_fn(times.len(), terms.len(), |j, c| terms[c].eval(times[j]))
}

pub fn build_designs(data: &Dataset, spec: &DesignSpec) -> Result<DesignMatrices> {
    let issues = spec.validate(data.n_markers());
    if !issues.is_empty() {
        return Err(BccError::Validation(issues));
    }
    let designs = (0..data.n_subjects())
        .map(|i| {
            (0..data.n_markers())
                .map(|r| {
                    let s = data.series(i, r);
                    SeriesDesign {
                        x: build_matrix(&s.times, &spec.fixed[r]),
                        z: build_matrix(&s.times, &spec.random[r]),
                    }
                })
                .collect()
        })
        .collect();
    Ok(DesignMatrices {
        p: (0..data.n_markers()).map(|r| spec.p(r)).collect(),
        q: (0..data.n_markers()).map(|r| spec.q(r)).collect(),
        designs,
    })
}

impl DesignMatrices {
    pub fn get(&self, subject: usize, marker: usize) -> &SeriesDesign {
        &self.designs[subject][marker]
    }

    pub fn p(&self, marker: usize) -> usize {
        self.p[marker]
    }

    pub fn q(&self, marker: usize) -> usize {
        self.q[marker]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn rec(s: &str, m: &str, t: f64, y: f64) -> LongRecord {
        LongRecord {
            subject_id: s.into(),
            marker_id: m.into(),
            time: t,
            value: y,
        }
    }

    fn gaussian_marker() -> Vec<MarkerSpec> {
        vec![MarkerSpec::new("fev", Family::Gaussian)]
    }

    #[test]
    fn two_subjects_one_marker() {
        let mut recs = Vec::new();
        for s in ["a", "b"] {
            for t in [0.0, 12.0, 24.0] {
                recs.push(rec(s, "fev", t, 0.5));
            }
        }
        let d = Dataset::from_records(&recs, gaussian_marker()).unwrap();
        assert_eq!(d.n_subjects(), 2);
        assert_eq!(d.n_markers(), 1);
        assert_eq!(d.series(0, 0).len(), 3);
        assert_eq!(d.series(1, 0).len(), 3);
    }

    #[test]
    fn non_binary_value_rejected() {
        let markers = vec![MarkerSpec::new("wheeze", Family::Binomial)];
        let recs = vec![rec("a", "wheeze", 0.0, 2.5), rec("b", "wheeze", 0.0, 1.0)];
        let err = Dataset::from_records(&recs, markers).unwrap_err();
        assert!(err.to_string().contains("non-binary value"), "{err}");
    }

    #[test]
    fn missing_marker_names_subject_and_marker() {
        let markers = vec![
            MarkerSpec::new("wheeze", Family::Binomial),
            MarkerSpec::new("fev", Family::Gaussian),
        ];
        let recs = vec![
            rec("a", "wheeze", 0.0, 1.0),
            rec("a", "fev", 0.0, 0.1),
            rec("b", "wheeze", 0.0, 0.0),
        ];
        let err = Dataset::from_records(&recs, markers).unwrap_err().to_string();
        assert!(err.contains("'b'") && err.contains("'fev'"), "{err}");
    }

    #[test]
    fn subject_order_is_first_appearance_and_times_sorted() {
        let recs = vec![
            rec("z", "fev", 5.0, 1.0),
            rec("a", "fev", 3.0, 2.0),
            rec("z", "fev", 1.0, 3.0),
        ];
        let d = Dataset::from_records(&recs, gaussian_marker()).unwrap();
        assert_eq!(d.subject_ids(), &["z".to_string(), "a".to_string()]);
        assert_eq!(d.series(0, 0).times, vec![1.0, 5.0]);
        assert_eq!(d.series(0, 0).values, vec![3.0, 1.0]);
    }

    #[test]
    fn ingest_reports_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "subject_id,marker_id,time,value\na,fev,0,1\nb,fev,zero,1").unwrap();
        drop(f);
        match ingest_csv(&path, gaussian_marker()).unwrap_err() {
            BccError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn ingest_rejects_wrong_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "id,marker,t,y\na,fev,0,1\n").unwrap();
        assert!(matches!(
            ingest_csv(&path, gaussian_marker()),
            Err(BccError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn child_shaped_totals() {
        // 187 subjects with 622 / 609 / 398 observations over three markers
        let markers = vec![
            MarkerSpec::new("wheeze", Family::Binomial),
            MarkerSpec::new("cough", Family::Binomial),
            MarkerSpec::new("fevfvc", Family::Gaussian),
        ];
        let totals = [622usize, 609, 398];
        let n = 187;
        let mut recs = Vec::new();
        for (r, m) in markers.iter().enumerate() {
            for obs in 0..totals[r] {
                let (i, j) = if obs < n { (obs, 0) } else { ((obs - n) % n, 1 + (obs - n) / n) };
                let y = if m.family == Family::Gaussian { 0.1 * obs as f64 } else { (obs % 2) as f64 };
                recs.push(rec(&format!("s{i}"), &m.name, 12.0 * j as f64, y));
            }
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("child.csv");
        let tmp = Dataset::from_records(&recs, markers.clone()).unwrap();
        tmp.write_csv(&path).unwrap();
        let d = ingest_csv(&path, markers).unwrap();
        assert_eq!(d.n_subjects(), 187);
        assert_eq!((0..3).map(|r| d.marker_total(r)).collect::<Vec<_>>(), totals);
    }

    #[test]
    fn linear_design_rows() {
        let recs: Vec<_> = ["a", "b"]
            .iter()
            .flat_map(|s| [0.0, 12.0, 24.0].map(|t| rec(s, "fev", t, 0.0)))
            .collect();
        let d = Dataset::from_records(&recs, gaussian_marker()).unwrap();
        let spec = DesignSpec::linear_random_intercept(1);
        let m = build_designs(&d, &spec).unwrap();
        let g = m.get(0, 0);
        assert_eq!(g.x, DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 12.0, 1.0, 24.0]));
        assert_eq!(g.z, DMatrix::from_element(3, 1, 1.0));
        assert_eq!((m.p(0), m.q(0)), (2, 1));

        let full = DesignSpec {
            fixed: spec.fixed.clone(),
            random: spec.fixed.clone(),
        };
        let m = build_designs(&d, &full).unwrap();
        assert_eq!(m.get(1, 0).x, m.get(1, 0).z);
    }

    #[test]
    fn design_validation() {
        let bad = DesignSpec {
            fixed: vec![vec![DesignTerm::Intercept]],
            random: vec![vec![DesignTerm::Intercept, DesignTerm::TimePow(1)]],
        };
        let issues = bad.validate(1);
        assert!(issues.iter().any(|i| i.message.contains("exceeds")));
        assert!(issues.iter().any(|i| i.message.contains("not among")));
    }

    #[test]
    fn design_term_parsing() {
        assert_eq!("time^2".parse::<DesignTerm>().unwrap(), DesignTerm::TimePow(2));
        assert_eq!("time2".parse::<DesignTerm>().unwrap(), DesignTerm::TimePow(2));
        assert_eq!("Intercept".parse::<DesignTerm>().unwrap(), DesignTerm::Intercept);
        assert!("age".parse::<DesignTerm>().is_err());
        assert_eq!(DesignTerm::TimePow(3).to_string(), "time^3");
    }
}
