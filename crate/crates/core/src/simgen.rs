//! Synthetic data with known global and local clusterings, and parameter-recovery scoring.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::assignment::best_assignment;
use crate::config::{MarkerConfig, McmcControls, ModelConfig, SigmaStructure};
use crate::dist::{sample_gamma, std_normal};
use crate::error::{BccError, Issue, Result};
use crate::family::Family;
use crate::longdata::{Dataset, DesignTerm, LongRecord, MarkerSpec};
use crate::postprocess::{sample_response, RelabeledDraws};

const TRUE_PARAMS_JSON: &str = include_str!("../data/true_params.json");

/// Degrees of freedom of the heavy-tailed random-effect law.
pub const T_DF: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarkerTruth {
    pub name: String,
    pub family: Family,
    pub fixed: Vec<DesignTerm>,
    pub random: Vec<DesignTerm>,
    /// `[cluster][coef]`.
    pub gamma: Vec<Vec<f64>>,
    /// `[cluster]` covariance as rows.
    pub sigma: Vec<Vec<Vec<f64>>>,
    /// `[cluster]`; 1 for families without dispersion.
    pub sigma2: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrueParams {
    #[serde(rename = "K")]
    pub k: usize,
    pub markers: Vec<MarkerTruth>,
}

impl TrueParams {
    pub fn validate(&self) -> Vec<Issue> {
        let mut issues = Vec::new();
        for (r, m) in self.markers.iter().enumerate() {
            let path = format!("params.markers[{r}]");
            if m.gamma.len() != self.k || m.sigma.len() != self.k || m.sigma2.len() != self.k {
                issues.push(Issue::new(&path, "one gamma, sigma and sigma2 entry per cluster required"));
                continue;
            }
            if m.gamma.iter().any(|g| g.len() != m.fixed.len()) {
                issues.push(Issue::new(format!("{path}.gamma"), "length must match fixed terms"));
            }
            let q = m.random.len();
            if m.sigma.iter().any(|s| s.len() != q || s.iter().any(|row| row.len() != q)) {
                issues.push(Issue::new(format!("{path}.sigma"), "must be q x q"));
            }
        }
        issues
    }

    fn sigma_matrix(&self, k: usize, r: usize) -> DMatrix<f64> {
        let s = &self.markers[r].sigma[k];
        let q = s.len();
        DMatrix::from_fn(q, q, |a, b| s[a][b])
    }
}

/// The shipped parameter table for `K` in {2, 3, 4}.
pub fn default_true_params(k: usize) -> Result<TrueParams> {
    let table: BTreeMap<String, TrueParams> = serde_json::from_str(TRUE_PARAMS_JSON)?;
    table
        .get(&k.to_string())
        .cloned()
        .ok_or_else(|| BccError::Invalid(format!("no default true parameters for K = {k}; supported: 2, 3, 4")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RandomEffectLaw {
    #[default]
    Normal,
    /// Multivariate t with 5 degrees of freedom, scaled so its covariance equals `Sigma`.
    #[serde(rename = "t5")]
    StudentT,
}

fn default_windows() -> Vec<(f64, f64)> {
    vec![(0.0, 0.0), (0.0, 15.0), (15.0, 25.0), (25.0, 30.0)]
}

fn default_size() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    #[serde(rename = "K")]
    pub k: usize,
    /// Subjects per true global cluster; one entry, or one per cluster.
    #[serde(default = "default_sizes")]
    pub cluster_sizes: Vec<usize>,
    pub alpha: Vec<f64>,
    #[serde(default)]
    pub re_law: RandomEffectLaw,
    /// Visit-time windows; a zero-width window is a fixed time. One entry per visit.
    #[serde(default = "default_windows")]
    pub windows: Vec<(f64, f64)>,
    /// Defaults to [`default_true_params`] for `K`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<TrueParams>,
    #[serde(default)]
    pub seed: u64,
}

fn default_sizes() -> Vec<usize> {
    vec![default_size()]
}

impl ScenarioSpec {
    pub fn new(k: usize, alpha: Vec<f64>, re_law: RandomEffectLaw, seed: u64) -> Self {
        Self {
            k,
            cluster_sizes: default_sizes(),
            alpha,
            re_law,
            windows: default_windows(),
            params: None,
            seed,
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_json_str(&std::fs::read_to_string(path).map_err(|e| BccError::io(path, e))?)
    }

    pub fn sizes(&self) -> Vec<usize> {
        if self.cluster_sizes.len() == 1 {
            vec![self.cluster_sizes[0]; self.k]
        } else {
            self.cluster_sizes.clone()
        }
    }

    pub fn resolved_params(&self) -> Result<TrueParams> {
        match &self.params {
            Some(p) => Ok(p.clone()),
            None => default_true_params(self.k),
        }
    }

    pub fn validate(&self) -> Result<TrueParams> {
        let params = self.resolved_params()?;
        let mut issues = params.validate();
        if self.k < 2 {
            issues.push(Issue::new("K", "K must be ≥ 2"));
        }
        if params.k != self.k {
            issues.push(Issue::new("params.K", "must equal K"));
        }
        let lower = 1.0 / self.k as f64;
        if self.alpha.len() != params.markers.len() {
            issues.push(Issue::new("alpha", format!("expected {} entries", params.markers.len())));
        }
        for (r, &a) in self.alpha.iter().enumerate() {
            if !(a >= lower - 1e-12 && a <= 1.0) {
                issues.push(Issue::new(format!("alpha[{r}]"), "must lie in [1/K, 1]"));
            }
        }
        let sizes = self.sizes();
        if sizes.len() != self.k || sizes.iter().any(|&s| s < 1) {
            issues.push(Issue::new("cluster_sizes", "one positive size, or one per cluster"));
        }
        if self.windows.is_empty() || self.windows.iter().any(|&(a, b)| !(a <= b)) {
            issues.push(Issue::new("windows", "each window needs lower ≤ upper"));
        }
        if issues.is_empty() {
            Ok(params)
        } else {
            Err(BccError::Validation(issues))
        }
    }
}

/// A generated dataset and the truth it came from. Labels are 0-based.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedTruth {
    pub data: Dataset,
    pub global: Vec<usize>,
    /// `[subject][marker]`.
    pub local: Vec<Vec<usize>>,
    pub params: TrueParams,
    pub spec: ScenarioSpec,
}

fn sample_random_effect<R: Rng + ?Sized>(rng: &mut R, chol: &DMatrix<f64>, law: RandomEffectLaw) -> DVector<f64> {
    let z = DVector::from_fn(chol.nrows(), |_, _| std_normal(rng));
    let b = chol * z;
    match law {
        RandomEffectLaw::Normal => b,
        RandomEffectLaw::StudentT => {
            // chi-square(df) as Gamma(df/2, rate 1/2)
            let w = sample_gamma(rng, 0.5 * T_DF, 0.5);
            b * (((T_DF - 2.0) / T_DF).sqrt() / (w / T_DF).sqrt())
        }
    }
}

/// Generates one dataset: global labels in contiguous blocks, each local
/// label equal to the global one with probability `alpha_r` and otherwise
/// uniform over the remaining labels, visit times drawn per window and sorted.
pub fn simulate_dataset(spec: &ScenarioSpec) -> Result<SimulatedTruth> {
    let params = spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let k = spec.k;
    let global: Vec<usize> = spec.sizes().iter().enumerate().flat_map(|(c, &n)| std::iter::repeat_n(c, n)).collect();
    let n = global.len();
    let r_count = params.markers.len();
    let width = n.to_string().len();
    let chols: Vec<Vec<DMatrix<f64>>> = (0..k)
        .map(|c| {
            (0..r_count)
                .map(|r| {
                    crate::linalg::cholesky_jittered(&params.sigma_matrix(c, r))
                        .ok_or_else(|| BccError::validation(format!("params.markers[{r}].sigma[{c}]"), "not positive definite"))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut records = Vec::with_capacity(n * r_count * spec.windows.len());
    let mut local = vec![vec![0; r_count]; n];
    for i in 0..n {
        let id = format!("S{:0width$}", i + 1);
        for r in 0..r_count {
            let m = &params.markers[r];
            let l = if rng.random::<f64>() < spec.alpha[r] {
                global[i]
            } else {
                let other = rng.random_range(0..k - 1);
                if other >= global[i] { other + 1 } else { other }
            };
            local[i][r] = l;
            let mut times: Vec<f64> = spec
                .windows
                .iter()
                .map(|&(a, b)| if b > a { rng.random_range(a..b) } else { a })
                .collect();
            times.sort_by(f64::total_cmp);
            let beta = sample_random_effect(&mut rng, &chols[l][r], spec.re_law);
            for &t in &times {
                let fixed: f64 = m.fixed.iter().zip(&m.gamma[l]).map(|(term, g)| term.eval(t) * g).sum();
                let random: f64 = m.random.iter().zip(beta.iter()).map(|(term, b)| term.eval(t) * b).sum();
                let y = sample_response(&mut rng, m.family, fixed + random, m.sigma2[l]);
                records.push(LongRecord { subject_id: id.clone(), marker_id: m.name.clone(), time: t, value: y });
            }
        }
    }
    let markers = params.markers.iter().map(|m| MarkerSpec::new(m.name.clone(), m.family)).collect();
    let data = Dataset::from_records(&records, markers)?;
    Ok(SimulatedTruth { data, global, local, params, spec: spec.clone() })
}

/// Model configuration matching the generating design of `params`.
pub fn fit_config_for(params: &TrueParams, mcmc: McmcControls) -> ModelConfig {
    ModelConfig {
        markers: params
            .markers
            .iter()
            .map(|m| MarkerConfig { name: m.name.clone(), family: m.family, fixed: m.fixed.clone(), random: m.random.clone() })
            .collect(),
        k: params.k,
        alpha_shared: false,
        sigma_common: true,
        sigma_structure: SigmaStructure::Diagonal,
        priors: None,
        mcmc,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthFile {
    #[serde(rename = "K")]
    pub k: usize,
    /// 1-based.
    #[serde(rename = "C")]
    pub global: Vec<usize>,
    /// 1-based, `[subject][marker]`.
    #[serde(rename = "L")]
    pub local: Vec<Vec<usize>>,
    pub subject_ids: Vec<String>,
    pub params: TrueParams,
    pub spec: ScenarioSpec,
}

impl SimulatedTruth {
    pub fn truth_file(&self) -> TruthFile {
        TruthFile {
            k: self.params.k,
            global: self.global.iter().map(|c| c + 1).collect(),
            local: self.local.iter().map(|row| row.iter().map(|l| l + 1).collect()).collect(),
            subject_ids: self.data.subject_ids().to_vec(),
            params: self.params.clone(),
            spec: self.spec.clone(),
        }
    }

    pub fn write_truth_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = serde_json::to_string_pretty(&self.truth_file())?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| BccError::io(path, e))
    }
}

/// Cluster-indexed point estimates, `[cluster][marker]...`, comparable with [`TrueParams`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamEstimate {
    pub pi: Vec<f64>,
    pub alpha: Vec<f64>,
    pub gamma: Vec<Vec<Vec<f64>>>,
    /// Diagonal of each random-effect covariance.
    pub sigma_diag: Vec<Vec<Vec<f64>>>,
    pub sigma2: Vec<Vec<f64>>,
}

impl ParamEstimate {
    pub fn from_truth(t: &SimulatedTruth) -> Self {
        let p = &t.params;
        let n = t.global.len() as f64;
        let mut pi = vec![0.0; p.k];
        for &c in &t.global {
            pi[c] += 1.0 / n;
        }
        Self {
            pi,
            alpha: t.spec.alpha.clone(),
            gamma: (0..p.k).map(|k| p.markers.iter().map(|m| m.gamma[k].clone()).collect()).collect(),
            sigma_diag: (0..p.k)
                .map(|k| p.markers.iter().map(|m| (0..m.random.len()).map(|j| m.sigma[k][j][j]).collect()).collect())
                .collect(),
            sigma2: (0..p.k).map(|k| p.markers.iter().map(|m| m.sigma2[k]).collect()).collect(),
        }
    }

    pub fn posterior_mean(relabeled: &RelabeledDraws) -> Self {
        let pd = &relabeled.draws;
        let layout = &pd.layout;
        let s = pd.draws.len() as f64;
        let (k, r) = (layout.k, layout.r);
        let mut e = Self {
            pi: vec![0.0; k],
            alpha: vec![0.0; r],
            gamma: (0..k).map(|_| (0..r).map(|m| vec![0.0; layout.p[m]]).collect()).collect(),
            sigma_diag: (0..k).map(|_| (0..r).map(|m| vec![0.0; layout.q[m]]).collect()).collect(),
            sigma2: vec![vec![0.0; r]; k],
        };
        for d in &pd.draws {
            for c in 0..k {
                e.pi[c] += d.pi[c] / s;
                for m in 0..r {
                    for (acc, v) in e.gamma[c][m].iter_mut().zip(&d.gamma[c][m]) {
                        *acc += v / s;
                    }
                    let q = layout.q[m];
                    for j in 0..q {
                        e.sigma_diag[c][m][j] += d.sigma[c][m][j * q + j] / s;
                    }
                    e.sigma2[c][m] += d.sigma2[c][m] / s;
                }
            }
            for m in 0..r {
                e.alpha[m] += d.alpha[m] / s;
            }
        }
        e
    }

    /// Copy with clusters renamed by `perm[old] = new`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut out = self.clone();
        for (old, &new) in perm.iter().enumerate() {
            out.pi[new] = self.pi[old];
            out.gamma[new] = self.gamma[old].clone();
            out.sigma_diag[new] = self.sigma_diag[old].clone();
            out.sigma2[new] = self.sigma2[old].clone();
        }
        out
    }

    /// Named scalars in a fixed order (1-based indices).
    pub fn named(&self, families: &[Family]) -> Vec<(String, f64)> {
        let mut out = Vec::new();
        for (k, &p) in self.pi.iter().enumerate() {
            out.push((format!("pi[{}]", k + 1), p));
        }
        for (r, &a) in self.alpha.iter().enumerate() {
            out.push((format!("alpha[{}]", r + 1), a));
        }
        for k in 0..self.gamma.len() {
            for r in 0..self.gamma[k].len() {
                for (j, &g) in self.gamma[k][r].iter().enumerate() {
                    out.push((format!("gamma[{},{},{}]", k + 1, r + 1, j + 1), g));
                }
                for (j, &s) in self.sigma_diag[k][r].iter().enumerate() {
                    out.push((format!("Sigma[{},{},{},{}]", k + 1, r + 1, j + 1, j + 1), s));
                }
                if families[r] == Family::Gaussian {
                    out.push((format!("sigma2[{},{}]", k + 1, r + 1), self.sigma2[k][r]));
                }
            }
        }
        out
    }
}

/// Cluster permutation (`perm[estimated] = true`) minimising total squared
/// error in the fixed effects.
pub fn align_to_truth(truth: &ParamEstimate, estimate: &ParamEstimate) -> Vec<usize> {
    let k = truth.gamma.len();
    let cost: Vec<Vec<f64>> = (0..k)
        .map(|est| {
            (0..k)
                .map(|tru| {
                    estimate.gamma[est]
                        .iter()
                        .zip(&truth.gamma[tru])
                        .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)))
                        .sum()
                })
                .collect()
        })
        .collect();
    best_assignment(&cost)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmseTable {
    pub rows: Vec<(String, f64)>,
    /// Alignment applied to each replicate's estimate, `perm[estimated] = true`.
    pub alignments: Vec<Vec<usize>>,
}

impl RmseTable {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.rows.iter().find(|(n, _)| n == name).map(|&(_, v)| v)
    }
}

/// Per-parameter root mean square error across replicates, after aligning
/// each estimate to its truth by the best label permutation.
pub fn rmse(pairs: &[(ParamEstimate, ParamEstimate)], families: &[Family]) -> Result<RmseTable> {
    if pairs.is_empty() {
        return Err(BccError::Invalid("no replicates to score".into()));
    }
    let mut sums: Vec<(String, f64)> = Vec::new();
    let mut alignments = Vec::new();
    for (truth, est) in pairs {
        let perm = align_to_truth(truth, est);
        let aligned = est.permuted(&perm);
        alignments.push(perm);
        let t = truth.named(families);
        let e = aligned.named(families);
        if sums.is_empty() {
            sums = t.iter().map(|(n, _)| (n.clone(), 0.0)).collect();
        }
        for ((acc, (_, tv)), (_, ev)) in sums.iter_mut().zip(&t).zip(&e) {
            acc.1 += (ev - tv) * (ev - tv);
        }
    }
    let n = pairs.len() as f64;
    Ok(RmseTable { rows: sums.into_iter().map(|(name, s)| (name, (s / n).sqrt())).collect(), alignments })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tables_load() {
        for k in 2..=4 {
            let p = default_true_params(k).unwrap();
            assert_eq!(p.k, k);
            assert!(p.validate().is_empty());
        }
        assert!(default_true_params(5).is_err());
    }

    #[test]
    fn perfect_adherence_and_blocks() {
        let truth = simulate_dataset(&ScenarioSpec::new(2, vec![1.0; 3], RandomEffectLaw::Normal, 3)).unwrap();
        assert_eq!(truth.data.n_subjects(), 200);
        assert!(truth.global[..100].iter().all(|&c| c == 0) && truth.global[100..].iter().all(|&c| c == 1));
        for (i, row) in truth.local.iter().enumerate() {
            assert!(row.iter().all(|&l| l == truth.global[i]));
        }
        let s = truth.data.series(0, 0);
        assert_eq!(s.times[0], 0.0);
        assert!(s.times.windows(2).all(|w| w[0] <= w[1]) && s.times[3] < 30.0);
    }

    #[test]
    fn seeded_generation_is_repeatable() {
        let spec = ScenarioSpec::new(3, vec![0.9; 3], RandomEffectLaw::StudentT, 11);
        assert_eq!(simulate_dataset(&spec).unwrap(), simulate_dataset(&spec).unwrap());
    }

    #[test]
    fn rmse_of_offset_estimates() {
        let truth = simulate_dataset(&ScenarioSpec::new(2, vec![1.0; 3], RandomEffectLaw::Normal, 1)).unwrap();
        let t = ParamEstimate::from_truth(&truth);
        let families: Vec<Family> = truth.params.markers.iter().map(|m| m.family).collect();
        let zero = rmse(&[(t.clone(), t.clone())], &families).unwrap();
        assert!(zero.rows.iter().all(|(_, v)| *v == 0.0));
        let mut shifted = t.clone();
        shifted.gamma.iter_mut().flatten().flatten().for_each(|g| *g += 0.1);
        // swapping the estimate's clusters must not matter
        let swapped = shifted.permuted(&[1, 0]);
        let table = rmse(&[(t.clone(), swapped)], &families).unwrap();
        assert!((table.get("gamma[1,1,1]").unwrap() - 0.1).abs() < 1e-12);
        assert_eq!(table.alignments[0], vec![1, 0]);
    }
}
