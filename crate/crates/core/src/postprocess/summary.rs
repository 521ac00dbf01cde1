use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::diagnostics::{geweke_z, mode_label, quantile_sorted, GEWEKE_FIRST, GEWEKE_LAST};
use super::ppc::PpcResult;
use super::relabel::RelabeledDraws;
use crate::error::{BccError, Result};
use crate::family::Family;
use crate::longdata::fmt_f64;
use crate::mcmc::{AcceptanceSummary, Draw, DrawLayout};
use crate::metrics::adjusted_adherence;

/// Address of one scalar parameter inside a [`Draw`]. Indices are 0-based;
/// names are 1-based: `gamma[k,r,j]`, `Sigma[k,r,a,b]` (upper triangle only),
/// `sigma2[k,r]` (Gaussian markers only).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamSlot {
    Alpha(usize),
    Pi(usize),
    Gamma { k: usize, r: usize, j: usize },
    Sigma { k: usize, r: usize, a: usize, b: usize },
    Sigma2 { k: usize, r: usize },
}

impl ParamSlot {
    pub fn name(&self) -> String {
        match *self {
            ParamSlot::Alpha(r) => format!("alpha[{}]", r + 1),
            ParamSlot::Pi(k) => format!("pi[{}]", k + 1),
            ParamSlot::Gamma { k, r, j } => format!("gamma[{},{},{}]", k + 1, r + 1, j + 1),
            ParamSlot::Sigma { k, r, a, b } => format!("Sigma[{},{},{},{}]", k + 1, r + 1, a + 1, b + 1),
            ParamSlot::Sigma2 { k, r } => format!("sigma2[{},{}]", k + 1, r + 1),
        }
    }

    pub fn get(&self, draw: &Draw, layout: &DrawLayout) -> f64 {
        match *self {
            ParamSlot::Alpha(r) => draw.alpha[r],
            ParamSlot::Pi(k) => draw.pi[k],
            ParamSlot::Gamma { k, r, j } => draw.gamma[k][r][j],
            ParamSlot::Sigma { k, r, a, b } => draw.sigma[k][r][a * layout.q[r] + b],
            ParamSlot::Sigma2 { k, r } => draw.sigma2[k][r],
        }
    }

    /// Writes `value`; covariance entries are mirrored to keep `Sigma` symmetric.
    pub fn set(&self, draw: &mut Draw, layout: &DrawLayout, value: f64) {
        match *self {
            ParamSlot::Alpha(r) => draw.alpha[r] = value,
            ParamSlot::Pi(k) => draw.pi[k] = value,
            ParamSlot::Gamma { k, r, j } => draw.gamma[k][r][j] = value,
            ParamSlot::Sigma { k, r, a, b } => {
                let q = layout.q[r];
                draw.sigma[k][r][a * q + b] = value;
                draw.sigma[k][r][b * q + a] = value;
            }
            ParamSlot::Sigma2 { k, r } => draw.sigma2[k][r] = value,
        }
    }
}

/// Every scalar parameter in a fixed order: adherence, proportions, then per
/// cluster and marker the fixed effects, covariance and dispersion.
pub fn param_slots(layout: &DrawLayout) -> Vec<ParamSlot> {
    let mut out: Vec<ParamSlot> = (0..layout.r).map(ParamSlot::Alpha).collect();
    out.extend((0..layout.k).map(ParamSlot::Pi));
    for k in 0..layout.k {
        for r in 0..layout.r {
            out.extend((0..layout.p[r]).map(|j| ParamSlot::Gamma { k, r, j }));
            let q = layout.q[r];
            for a in 0..q {
                out.extend((a..q).map(|b| ParamSlot::Sigma { k, r, a, b }));
            }
            if layout.families[r] == Family::Gaussian {
                out.push(ParamSlot::Sigma2 { k, r });
            }
        }
    }
    out
}

/// `(name, value)` for every slot of [`param_slots`].
pub fn scalar_parameters(draw: &Draw, layout: &DrawLayout) -> Vec<(String, f64)> {
    param_slots(layout).iter().map(|s| (s.name(), s.get(draw, layout))).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub lower: f64,
    pub upper: f64,
    /// Geweke z on the first chain, when it is long enough and not constant.
    pub geweke_z: Option<f64>,
}

/// Mean, SD and equal-tailed 95% type-7 interval.
pub fn summarize_values(name: impl Into<String>, values: &[f64]) -> ParamSummary {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    ParamSummary {
        name: name.into(),
        mean,
        sd,
        lower: quantile_sorted(&sorted, 0.025),
        upper: quantile_sorted(&sorted, 0.975),
        geweke_z: None,
    }
}

/// Per-subject modal labels after relabelling. Labels are 0-based.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModeEstimate {
    pub c_hat: Vec<usize>,
    /// Relabelled empirical frequency of the modal global label.
    pub c_prob: Vec<f64>,
    pub c_tie: Vec<bool>,
    /// `[subject][marker]`.
    pub l_hat: Vec<Vec<usize>>,
    pub l_tie: Vec<Vec<bool>>,
}

pub fn point_estimate_mode(relabeled: &RelabeledDraws) -> Result<ModeEstimate> {
    let draws = &relabeled.draws.draws;
    let layout = &relabeled.draws.layout;
    if draws.is_empty() {
        return Err(BccError::Invalid("no retained draws".into()));
    }
    let mut est = ModeEstimate {
        c_hat: Vec::with_capacity(layout.n),
        c_prob: Vec::with_capacity(layout.n),
        c_tie: Vec::with_capacity(layout.n),
        l_hat: Vec::with_capacity(layout.n),
        l_tie: Vec::with_capacity(layout.n),
    };
    for i in 0..layout.n {
        let (c, p, tie) = mode_label(draws.iter().map(|d| d.global[i]), layout.k);
        est.c_hat.push(c);
        est.c_prob.push(p);
        est.c_tie.push(tie);
        let (mut ls, mut ts) = (Vec::with_capacity(layout.r), Vec::with_capacity(layout.r));
        for r in 0..layout.r {
            let (l, _, tie) = mode_label(draws.iter().map(|d| d.local(layout, i, r)), layout.k);
            ls.push(l);
            ts.push(tie);
        }
        est.l_hat.push(ls);
        est.l_tie.push(ts);
    }
    Ok(est)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringResult {
    #[serde(rename = "K")]
    pub k: usize,
    pub n_subjects: usize,
    pub n_chains: usize,
    pub n_draws: usize,
    pub relabel_rounds: usize,
    pub parameters: Vec<ParamSummary>,
    /// Adherence per marker, a subset of `parameters` repeated for convenience.
    pub adherence: Vec<ParamSummary>,
    /// Posterior mean of `(K alpha_r - 1)/(K - 1)` averaged over markers.
    pub mean_adjusted_adherence: f64,
    /// Cluster proportions implied by the modal global labels.
    pub proportions: Vec<f64>,
    pub c_ties: usize,
    pub l_ties: usize,
    pub acceptance: Vec<AcceptanceSummary>,
    pub ppc_p_value: Option<f64>,
    #[serde(skip)]
    pub modes: ModeEstimate,
}

pub fn summarize(relabeled: &RelabeledDraws, ppc: Option<&PpcResult>) -> Result<ClusteringResult> {
    let pd = &relabeled.draws;
    let layout = &pd.layout;
    if pd.draws.len() < 2 {
        return Err(BccError::Invalid(format!("at least 2 draws required, got {}", pd.draws.len())));
    }
    let per_draw: Vec<Vec<(String, f64)>> = pd.draws.iter().map(|d| scalar_parameters(d, layout)).collect();
    let names: Vec<String> = per_draw[0].iter().map(|(n, _)| n.clone()).collect();
    let first_chain: Vec<usize> = (0..pd.draws.len()).filter(|&s| pd.draws[s].chain == pd.draws[0].chain).collect();
    let parameters: Vec<ParamSummary> = names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let values: Vec<f64> = per_draw.iter().map(|row| row[j].1).collect();
            let mut s = summarize_values(name.clone(), &values);
            let chain: Vec<f64> = first_chain.iter().map(|&d| values[d]).collect();
            s.geweke_z = geweke_z(&chain, GEWEKE_FIRST, GEWEKE_LAST).ok();
            s
        })
        .collect();
    let adherence: Vec<ParamSummary> = parameters.iter().filter(|p| p.name.starts_with("alpha[")).cloned().collect();
    let k = layout.k;
    let mut adj = 0.0;
    for d in &pd.draws {
        let per: f64 = d.alpha.iter().map(|&a| adjusted_adherence(a, k).unwrap_or(0.0)).sum();
        adj += per / d.alpha.len() as f64;
    }
    let modes = point_estimate_mode(relabeled)?;
    let mut proportions = vec![0.0; k];
    for &c in &modes.c_hat {
        proportions[c] += 1.0 / layout.n as f64;
    }
    Ok(ClusteringResult {
        k,
        n_subjects: layout.n,
        n_chains: pd.n_chains(),
        n_draws: pd.draws.len(),
        relabel_rounds: relabeled.rounds,
        parameters,
        adherence,
        mean_adjusted_adherence: adj / pd.draws.len() as f64,
        proportions,
        c_ties: modes.c_tie.iter().filter(|&&t| t).count(),
        l_ties: modes.l_tie.iter().flatten().filter(|&&t| t).count(),
        acceptance: pd.acceptance.clone(),
        ppc_p_value: ppc.map(|p| p.p_value),
        modes,
    })
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    Ok(std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| BccError::io(path, e))?))
}

pub fn write_summary_json(result: &ClusteringResult, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(result)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| BccError::io(path, e))
}

/// `subject,C_hat,L_1..L_R,prob_C` with 1-based labels.
pub fn write_clusters_csv(result: &ClusteringResult, subject_ids: &[String], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let r = result.modes.l_hat.first().map_or(0, |l| l.len());
    let mut header = vec!["subject".to_string(), "C_hat".to_string()];
    header.extend((1..=r).map(|j| format!("L_{j}")));
    header.push("prob_C".into());
    let io = |e| BccError::io(path, e);
    writeln!(w, "{}", header.join(",")).map_err(io)?;
    for (i, id) in subject_ids.iter().enumerate() {
        let mut row = vec![id.clone(), (result.modes.c_hat[i] + 1).to_string()];
        row.extend(result.modes.l_hat[i].iter().map(|l| (l + 1).to_string()));
        row.push(fmt_f64(result.modes.c_prob[i]));
        writeln!(w, "{}", row.join(",")).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Long-format trace of every scalar parameter: `chain,draw,parameter,value`.
pub fn write_trace_csv(relabeled: &RelabeledDraws, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io = |e| BccError::io(path, e);
    let mut w = create(path)?;
    writeln!(w, "chain,draw,parameter,value").map_err(io)?;
    for d in &relabeled.draws.draws {
        for (name, v) in scalar_parameters(d, &relabeled.draws.layout) {
            writeln!(w, "{},{},\"{}\",{}", d.chain + 1, d.index + 1, name, fmt_f64(v)).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}
