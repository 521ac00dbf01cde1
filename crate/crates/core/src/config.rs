//! Model configuration, MCMC controls and prior hyperparameters.
//!
//! The on-disk form is JSON:
//!
//! ```json
//! {
//!   "markers": [{"name": "wheeze", "family": "binomial",
//!                "fixed": ["intercept", "time"], "random": ["intercept"]}],
//!   "K": 3,
//!   "alpha_shared": false,
//!   "sigma_common": true,
//!   "sigma_structure": "diagonal",
//!   "priors": {"v0_scale": 25.0},
//!   "mcmc": {"burnin": 10000, "iterations": 30000, "thin": 20, "chains": 2, "seed": 1}
//! }
//! ```

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{BccError, Issue, Result};
use crate::family::Family;
use crate::linalg::cholesky_lower;
use crate::longdata::{Dataset, DesignSpec, DesignTerm, MarkerSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SigmaStructure {
    #[default]
    Diagonal,
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarkerConfig {
    pub name: String,
    pub family: Family,
    pub fixed: Vec<DesignTerm>,
    pub random: Vec<DesignTerm>,
}

fn default_chains() -> usize {
    1
}

fn default_band() -> [f64; 2] {
    [0.2, 0.5]
}

fn default_window() -> usize {
    50
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McmcControls {
    pub burnin: usize,
    /// Total iterations including burn-in.
    pub iterations: usize,
    pub thin: usize,
    #[serde(default = "default_chains")]
    pub chains: usize,
    #[serde(default)]
    pub seed: u64,
    /// Acceptance band the step-size adaptation aims for during burn-in.
    #[serde(default = "default_band")]
    pub target_accept: [f64; 2],
    #[serde(default = "default_window")]
    pub adapt_window: usize,
}

impl McmcControls {
    pub fn new(burnin: usize, iterations: usize, thin: usize) -> Self {
        Self {
            burnin,
            iterations,
            thin,
            chains: 1,
            seed: 0,
            target_accept: default_band(),
            adapt_window: default_window(),
        }
    }

    /// Number of draws each chain retains.
    pub fn retained(&self) -> usize {
        self.iterations.saturating_sub(self.burnin) / self.thin.max(1)
    }
}

/// Optional scalar overrides applied on top of [`default_vague_priors`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorOverrides {
    pub delta1: Option<f64>,
    pub delta2: Option<f64>,
    pub phi0: Option<f64>,
    pub v0_scale: Option<f64>,
    pub c0: Option<f64>,
    pub d0: Option<f64>,
    pub a0: Option<f64>,
    pub b0: Option<f64>,
    pub lambda0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub markers: Vec<MarkerConfig>,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(default)]
    pub alpha_shared: bool,
    /// One Gaussian dispersion per marker shared by all clusters.
    #[serde(default = "default_true")]
    pub sigma_common: bool,
    #[serde(default)]
    pub sigma_structure: SigmaStructure,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub priors: Option<PriorOverrides>,
    pub mcmc: McmcControls,
}

impl ModelConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| BccError::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn n_markers(&self) -> usize {
        self.markers.len()
    }

    pub fn marker_specs(&self) -> Vec<MarkerSpec> {
        self.markers
            .iter()
            .map(|m| MarkerSpec::new(m.name.clone(), m.family))
            .collect()
    }

    pub fn design_spec(&self) -> DesignSpec {
        DesignSpec {
            fixed: self.markers.iter().map(|m| m.fixed.clone()).collect(),
            random: self.markers.iter().map(|m| m.random.clone()).collect(),
        }
    }

    pub fn families(&self) -> Vec<Family> {
        self.markers.iter().map(|m| m.family).collect()
    }

    pub fn with_k(&self, k: usize) -> Self {
        let mut c = self.clone();
        c.k = k;
        c
    }
}

/// Hyperparameters for one (cluster, marker) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterPrior {
    /// Prior covariance of the fixed effects, p×p.
    #[serde(with = "crate::linalg::serde_rows")]
    pub v0: DMatrix<f64>,
    /// Inverse-gamma shape/scale for diagonal random-effect variances.
    pub c0: f64,
    pub d0: f64,
    /// Wishart degrees of freedom for the full random-effect precision.
    pub lambda0: f64,
    /// Prior guess of the random-effect covariance (the precision prior has mean `lambda0_scale^-1`).
    #[serde(with = "crate::linalg::serde_rows")]
    pub lambda0_scale: DMatrix<f64>,
    /// Inverse-gamma shape/scale for the Gaussian dispersion.
    pub a0: f64,
    pub b0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorHyperparams {
    /// Truncated-Beta shapes per marker. Under a shared adherence the first entry is used.
    pub delta: Vec<(f64, f64)>,
    /// Dirichlet concentration on the global proportions.
    pub phi0: Vec<f64>,
    /// Indexed `[cluster][marker]`.
    pub cluster: Vec<Vec<ClusterPrior>>,
}

pub const DEFAULT_V0_SCALE: f64 = 25.0;
pub const DEFAULT_IG: f64 = 0.001;

/// Vague defaults: uniform adherence, flat Dirichlet, `V0 = 25 I`, IG(0.001, 0.001)
/// on variances, and a Wishart with `q + 1` degrees of freedom around the identity.
pub fn default_vague_priors(config: &ModelConfig, _data: Option<&Dataset>) -> PriorHyperparams {
    let k = config.k;
    let o = config.priors.clone().unwrap_or_default();
    let delta = (o.delta1.unwrap_or(1.0), o.delta2.unwrap_or(1.0));
    let cluster = (0..k)
        .map(|_| {
            config
                .markers
                .iter()
                .map(|m| {
                    let p = m.fixed.len();
                    let q = m.random.len();
                    ClusterPrior {
                        v0: DMatrix::identity(p, p) * o.v0_scale.unwrap_or(DEFAULT_V0_SCALE),
                        c0: o.c0.unwrap_or(DEFAULT_IG),
                        d0: o.d0.unwrap_or(DEFAULT_IG),
                        lambda0: o.lambda0.unwrap_or(q as f64 + 1.0),
                        lambda0_scale: DMatrix::identity(q, q),
                        a0: o.a0.unwrap_or(DEFAULT_IG),
                        b0: o.b0.unwrap_or(DEFAULT_IG),
                    }
                })
                .collect()
        })
        .collect();
    PriorHyperparams {
        delta: vec![delta; config.n_markers()],
        phi0: vec![o.phi0.unwrap_or(1.0); k],
        cluster,
    }
}

fn is_spd(m: &DMatrix<f64>) -> bool {
    m.is_square() && (m - m.transpose()).amax() <= 1e-10 * m.amax().max(1.0) && cholesky_lower(m).is_some()
}

/// Checks every invariant of the configuration, priors and (optionally) the data.
pub fn validate_config(
    config: &ModelConfig,
    priors: &PriorHyperparams,
    data: Option<&Dataset>,
) -> std::result::Result<(), Vec<Issue>> {
    let mut issues = Vec::new();
    let k = config.k;
    let r_count = config.n_markers();
    if k < 2 {
        issues.push(Issue::new("K", "K must be ≥ 2"));
    }
    let m = &config.mcmc;
    if m.thin < 1 {
        issues.push(Issue::new("mcmc.thin", "thin must be ≥ 1"));
    }
    if m.iterations <= m.burnin {
        issues.push(Issue::new("mcmc.iterations", "iterations must exceed burnin"));
    }
    if m.chains < 1 {
        issues.push(Issue::new("mcmc.chains", "chains must be ≥ 1"));
    }
    if m.adapt_window < 1 {
        issues.push(Issue::new("mcmc.adapt_window", "adapt_window must be ≥ 1"));
    }
    let [lo, hi] = m.target_accept;
    if !(lo > 0.0 && hi < 1.0 && lo < hi) {
        issues.push(Issue::new("mcmc.target_accept", "target band must satisfy 0 < lo < hi < 1"));
    }
    if r_count == 0 {
        issues.push(Issue::new("markers", "at least one marker is required"));
    }
    for a in 0..r_count {
        if config.markers[a + 1..].iter().any(|o| o.name == config.markers[a].name) {
            issues.push(Issue::new(format!("markers[{a}].name"), "duplicate marker name"));
        }
    }
    issues.extend(config.design_spec().validate(r_count));

    if let Some(data) = data {
        if data.n_markers() != r_count {
            issues.push(Issue::new(
                "markers",
                format!("config declares {r_count} markers, data has {}", data.n_markers()),
            ));
        } else {
            for (r, (mc, ms)) in config.markers.iter().zip(data.markers()).enumerate() {
                if mc.name != ms.name || mc.family != ms.family {
                    issues.push(Issue::new(
                        format!("markers[{r}]"),
                        format!("config marker {}:{} does not match data marker {}:{}", mc.name, mc.family, ms.name, ms.family),
                    ));
                }
                for i in 0..data.n_subjects() {
                    for &y in &data.series(i, r).values {
                        if let Err(msg) = mc.family.check_value(y) {
                            issues.push(Issue::new(
                                format!("data[{}].{}", data.subject_ids()[i], mc.name),
                                format!("{msg} {y}"),
                            ));
                        }
                    }
                }
            }
        }
    }

    if priors.delta.len() != r_count {
        issues.push(Issue::new("priors.delta", format!("expected {r_count} entries")));
    }
    for (r, &(d1, d2)) in priors.delta.iter().enumerate() {
        if !(d1 > 0.0 && d2 > 0.0) {
            issues.push(Issue::new(format!("priors.delta[{r}]"), "delta shapes must be > 0"));
        }
    }
    if priors.phi0.len() != k {
        issues.push(Issue::new("priors.phi0", format!("expected {k} entries")));
    }
    if priors.phi0.iter().any(|&v| !(v > 0.0)) {
        issues.push(Issue::new("priors.phi0", "Dirichlet concentrations must be > 0"));
    }
    if priors.cluster.len() != k || priors.cluster.iter().any(|row| row.len() != r_count) {
        issues.push(Issue::new("priors.cluster", format!("expected {k}×{r_count} cells")));
        return if issues.is_empty() { Ok(()) } else { Err(issues) };
    }
    for (c, row) in priors.cluster.iter().enumerate() {
        for (r, cp) in row.iter().enumerate() {
            let path = format!("priors.cluster[{c}][{r}]");
            let mk = &config.markers[r];
            let (p, q) = (mk.fixed.len(), mk.random.len());
            if cp.v0.nrows() != p || !is_spd(&cp.v0) {
                issues.push(Issue::new(format!("{path}.v0"), format!("must be a {p}×{p} symmetric positive definite matrix")));
            }
            for (name, v) in [("c0", cp.c0), ("d0", cp.d0), ("a0", cp.a0), ("b0", cp.b0)] {
                if !(v > 0.0 && v.is_finite()) {
                    issues.push(Issue::new(format!("{path}.{name}"), "must be > 0"));
                }
            }
            if config.sigma_structure == SigmaStructure::Full {
                if !(cp.lambda0 >= q as f64) {
                    issues.push(Issue::new(
                        format!("{path}.lambda0"),
                        format!("Wishart degrees of freedom {} must be ≥ q = {q}", cp.lambda0),
                    ));
                }
                if cp.lambda0_scale.nrows() != q || !is_spd(&cp.lambda0_scale) {
                    issues.push(Issue::new(format!("{path}.lambda0_scale"), format!("must be a {q}×{q} SPD matrix")));
                }
            }
        }
    }
    if issues.is_empty() {
        Ok(())
    } else {
        Err(issues)
    }
}

/// Parses, builds default priors and validates, returning the first structured failure.
pub fn load_validated(config_path: impl AsRef<Path>) -> Result<(ModelConfig, PriorHyperparams)> {
    let config = ModelConfig::load(config_path)?;
    let priors = default_vague_priors(&config, None);
    validate_config(&config, &priors, None).map_err(BccError::Validation)?;
    Ok((config, priors))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn child_config(k: usize) -> ModelConfig {
        let marker = |name: &str, family| MarkerConfig {
            name: name.into(),
            family,
            fixed: vec![DesignTerm::Intercept, DesignTerm::TimePow(1)],
            random: vec![DesignTerm::Intercept],
        };
        ModelConfig {
            markers: vec![
                marker("wheeze", Family::Binomial),
                marker("cough", Family::Binomial),
                marker("fevfvc", Family::Gaussian),
            ],
            k,
            alpha_shared: false,
            sigma_common: true,
            sigma_structure: SigmaStructure::Diagonal,
            priors: None,
            mcmc: McmcControls::new(10_000, 30_000, 20),
        }
    }

    #[test]
    fn vague_defaults() {
        let cfg = child_config(3);
        let p = default_vague_priors(&cfg, None);
        assert_eq!(p.phi0, vec![1.0, 1.0, 1.0]);
        assert!(p.delta.iter().all(|&d| d == (1.0, 1.0)));
        for row in &p.cluster {
            for cp in row {
                assert_eq!(cp.v0, DMatrix::from_diagonal_element(2, 2, 25.0));
                assert_eq!((cp.c0, cp.d0, cp.a0, cp.b0), (0.001, 0.001, 0.001, 0.001));
                assert_eq!(cp.lambda0, 2.0);
            }
        }
        assert_eq!(cfg.mcmc.retained(), 1000);
        assert!(validate_config(&cfg, &p, None).is_ok());
    }

    #[test]
    fn defaults_pass_validation_with_full_sigma() {
        let mut cfg = child_config(4);
        cfg.sigma_structure = SigmaStructure::Full;
        let p = default_vague_priors(&cfg, None);
        assert!(validate_config(&cfg, &p, None).is_ok());
    }

    #[test]
    fn validation_messages() {
        let mut cfg = child_config(3);
        cfg.mcmc.thin = 0;
        let p = default_vague_priors(&cfg, None);
        let errs = validate_config(&cfg, &p, None).unwrap_err();
        assert!(errs.iter().any(|e| e.message == "thin must be ≥ 1" && e.path == "mcmc.thin"));

        let cfg = child_config(1);
        let p = default_vague_priors(&cfg, None);
        let errs = validate_config(&cfg, &p, None).unwrap_err();
        assert!(errs.iter().any(|e| e.message == "K must be ≥ 2"));

        let mut cfg = child_config(3);
        cfg.sigma_structure = SigmaStructure::Full;
        cfg.markers[0].random = vec![DesignTerm::Intercept, DesignTerm::TimePow(1)];
        let mut p = default_vague_priors(&cfg, None);
        p.cluster[1][0].lambda0 = 1.5;
        let errs = validate_config(&cfg, &p, None).unwrap_err();
        assert!(errs.iter().any(|e| e.path == "priors.cluster[1][0].lambda0"), "{errs:?}");

        let mut cfg = child_config(3);
        cfg.mcmc.iterations = cfg.mcmc.burnin;
        let p = default_vague_priors(&cfg, None);
        assert!(validate_config(&cfg, &p, None).is_err());
    }

    #[test]
    fn json_round_trip_and_defaults() {
        let text = r#"{
            "markers": [{"name": "y", "family": "poisson", "fixed": ["intercept", "time"], "random": ["intercept"]}],
            "K": 2,
            "mcmc": {"burnin": 10, "iterations": 20, "thin": 1}
        }"#;
        let cfg = ModelConfig::from_json_str(text).unwrap();
        assert!(cfg.sigma_common);
        assert_eq!(cfg.sigma_structure, SigmaStructure::Diagonal);
        assert_eq!(cfg.mcmc.target_accept, [0.2, 0.5]);
        let back = ModelConfig::from_json_str(&cfg.to_json_pretty()).unwrap();
        assert_eq!(back, cfg);

        let priors = default_vague_priors(&cfg, None);
        let s = serde_json::to_string(&priors).unwrap();
        let back: PriorHyperparams = serde_json::from_str(&s).unwrap();
        assert_eq!(back, priors);
    }

    #[test]
    fn missing_key_is_named() {
        let text = r#"{"markers": [], "mcmc": {"burnin": 1, "iterations": 2, "thin": 1}}"#;
        let err = ModelConfig::from_json_str(text).unwrap_err().to_string();
        assert!(err.contains("`K`"), "{err}");
    }

    #[test]
    fn overrides_apply() {
        let mut cfg = child_config(2);
        cfg.priors = Some(PriorOverrides {
            delta1: Some(5.0),
            phi0: Some(10.0),
            v0_scale: Some(1000.0),
            ..Default::default()
        });
        let p = default_vague_priors(&cfg, None);
        assert_eq!(p.delta[0], (5.0, 1.0));
        assert_eq!(p.phi0, vec![10.0, 10.0]);
        assert_eq!(p.cluster[0][0].v0[(0, 0)], 1000.0);
    }
}
