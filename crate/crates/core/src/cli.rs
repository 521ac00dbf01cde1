//! Command-line front end: `fit`, `simulate`, `select-k`, `diagnose` and `metrics`.
//!
//! Every command that writes a directory also writes `manifest.json` with
//! SHA-256 hashes of its inputs, the seeds used and the files produced.
//! Exit codes: 0 success, 2 invalid input, 3 runtime failure.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{default_vague_priors, validate_config, ModelConfig};
use crate::error::{BccError, Result};
use crate::harness::replicate_seed;
use crate::longdata::{fmt_f64, ingest_csv, Dataset};
use crate::metrics::{adjusted_rand, jaccard_pair, Partition};
use crate::pipeline::{fit, ppc_seed, select_k_fits};
use crate::postprocess::{
    geweke_z, param_slots, posterior_predictive_check, read_draws, relabel_stephens, write_clusters_csv, write_draws,
    write_permutations_csv, write_summary_json, write_trace_csv, GEWEKE_FIRST, GEWEKE_LAST,
};
use crate::simgen::{fit_config_for, simulate_dataset, ScenarioSpec};

#[derive(Debug, Parser)]
#[command(name = "bcc", version, about = "Bayesian consensus clustering of mixed-type longitudinal markers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the model and write draws, summaries and cluster assignments.
    Fit {
        /// Long-format CSV: subject_id,marker_id,time,value.
        #[arg(long)]
        data: PathBuf,
        /// Model configuration JSON.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides `mcmc.seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides `mcmc.chains`.
        #[arg(long)]
        chains: Option<usize>,
    },
    /// Generate replicate datasets and their ground truth from a scenario.
    Simulate {
        /// Scenario JSON.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Master seed; overrides the scenario's own seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1)]
        replicates: usize,
    },
    /// Fit a range of cluster counts and pick the one with the largest mean adjusted adherence.
    SelectK {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// `lo..hi` (inclusive), a comma list, or a single value.
        #[arg(long, default_value = "2..6")]
        k_range: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        chains: Option<usize>,
    },
    /// Geweke statistics and a posterior predictive check for a finished fit.
    Diagnose {
        /// Directory written by `fit`.
        fit_dir: PathBuf,
        /// Report directory; defaults to `<fit_dir>/diagnostics`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Adjusted Rand index and pair-counting Jaccard between two `subject,label` files.
    Metrics {
        a: PathBuf,
        b: PathBuf,
        /// Also write the JSON to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parses `args` (including the program name), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: Command) -> Result<()> {
    match command {
        Command::Fit { data, config, out, seed, chains } => cmd_fit(&data, &config, &out, seed, chains),
        Command::Simulate { config, out, seed, replicates } => cmd_simulate(&config, &out, seed, replicates),
        Command::SelectK { data, config, out, k_range, seed, chains } => {
            cmd_select_k(&data, &config, &parse_k_range(&k_range)?, &out, seed, chains)
        }
        Command::Diagnose { fit_dir, out } => {
            let out = out.unwrap_or_else(|| fit_dir.join("diagnostics"));
            cmd_diagnose(&fit_dir, &out)
        }
        Command::Metrics { a, b, out } => {
            let json = cmd_metrics(&a, &b)?;
            println!("{json}");
            if let Some(path) = out {
                std::fs::write(&path, format!("{json}\n")).map_err(|e| BccError::io(&path, e))?;
            }
            Ok(())
        }
    }
}

/// `"2..5"` is inclusive; `"2,4"` and `"3"` list values. Values must lie in 2..=20.
pub fn parse_k_range(s: &str) -> Result<Vec<usize>> {
    let bad = || BccError::validation("--k-range", format!("cannot parse '{s}'; use lo..hi, a comma list or one value"));
    let num = |t: &str| t.trim().parse::<usize>().map_err(|_| bad());
    let mut ks: Vec<usize> = if let Some((lo, hi)) = s.split_once("..") {
        let (lo, hi) = (num(lo)?, num(hi.trim_start_matches('='))?);
        if lo > hi {
            return Err(bad());
        }
        (lo..=hi).collect()
    } else {
        s.split(',').map(num).collect::<Result<_>>()?
    };
    ks.sort_unstable();
    ks.dedup();
    if ks.is_empty() || ks.iter().any(|&k| !(2..=20).contains(&k)) {
        return Err(BccError::validation("--k-range", "every K must lie in 2..=20"));
    }
    Ok(ks)
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| BccError::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| BccError::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| BccError::io(path, e))
}

/// Record of one command invocation.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    /// SHA-256 of each input file, by role.
    pub inputs: BTreeMap<String, String>,
    pub seed: Option<u64>,
    pub derived_seeds: BTreeMap<String, u64>,
    /// Paths relative to the output directory, sorted.
    pub outputs: Vec<String>,
    pub created_unix: u64,
}

fn write_manifest(
    out: &Path,
    command: &str,
    inputs: BTreeMap<String, String>,
    seed: Option<u64>,
    derived_seeds: BTreeMap<String, u64>,
) -> Result<()> {
    let mut outputs = Vec::new();
    collect_files(out, out, &mut outputs)?;
    outputs.push("manifest.json".into());
    outputs.sort();
    outputs.dedup();
    let manifest = RunManifest {
        command: command.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        inputs,
        seed,
        derived_seeds,
        outputs,
        created_unix: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    write_text(&out.join("manifest.json"), &text)
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<String>) -> Result<()> {
    let entries = std::fs::read_dir(dir).map_err(|e| BccError::io(dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| BccError::io(dir, e))?;
        let path = entry.path();
        if path.is_dir() {
            collect_files(root, &path, out)?;
        } else if let Ok(rel) = path.strip_prefix(root) {
            out.push(rel.to_string_lossy().replace('\\', "/"));
        }
    }
    Ok(())
}

fn require_file(flag: &str, path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(BccError::validation(flag, format!("no such file: {}", path.display())))
    }
}

/// Loads the configuration with CLI overrides applied, then the data it describes.
fn load_inputs(data: &Path, config: &Path, seed: Option<u64>, chains: Option<usize>) -> Result<(ModelConfig, Dataset)> {
    require_file("--data", data)?;
    require_file("--config", config)?;
    let mut cfg = ModelConfig::load(config)?;
    if let Some(s) = seed {
        cfg.mcmc.seed = s;
    }
    if let Some(c) = chains {
        cfg.mcmc.chains = c;
    }
    let dataset = ingest_csv(data, cfg.marker_specs())?;
    Ok((cfg, dataset))
}

pub fn cmd_fit(data: &Path, config: &Path, out: &Path, seed: Option<u64>, chains: Option<usize>) -> Result<()> {
    let (cfg, dataset) = load_inputs(data, config, seed, chains)?;
    let priors = default_vague_priors(&cfg, Some(&dataset));
    validate_config(&cfg, &priors, Some(&dataset)).map_err(BccError::Validation)?;
    let data_bytes = read_bytes(data)?;
    let config_bytes = read_bytes(config)?;
    let output = fit(&dataset, &cfg, &priors, false)?;

    create_dir(out)?;
    write_text(&out.join("data.csv"), std::str::from_utf8(&data_bytes).map_err(|_| BccError::validation("--data", "not UTF-8"))?)?;
    let mut effective = cfg.to_json_pretty();
    effective.push('\n');
    write_text(&out.join("config.json"), &effective)?;
    write_draws(&output.raw, out.join("draws"))?;
    write_permutations_csv(&output.relabeled.permutations, &output.raw.draws, out.join("relabel_permutations.csv"))?;
    write_summary_json(&output.result, out.join("summary.json"))?;
    write_clusters_csv(&output.result, dataset.subject_ids(), out.join("clusters.csv"))?;
    write_trace_csv(&output.relabeled, out.join("trace.csv"))?;

    let inputs = BTreeMap::from([
        ("config".to_string(), sha256_hex(&config_bytes)),
        ("data".to_string(), sha256_hex(&data_bytes)),
    ]);
    let derived = output
        .raw
        .chain_seeds
        .iter()
        .enumerate()
        .map(|(c, &s)| (format!("chain_{}", c + 1), s))
        .collect();
    write_manifest(out, "fit", inputs, Some(cfg.mcmc.seed), derived)
}

pub fn cmd_simulate(config: &Path, out: &Path, seed: Option<u64>, replicates: usize) -> Result<()> {
    if replicates == 0 {
        return Err(BccError::validation("--replicates", "must be at least 1"));
    }
    require_file("--config", config)?;
    let spec_bytes = read_bytes(config)?;
    let template = ScenarioSpec::load(config)?;
    let master = seed.unwrap_or(template.seed);
    create_dir(out)?;
    let width = replicates.to_string().len().max(3);
    let mut derived = BTreeMap::new();
    for j in 0..replicates {
        let mut spec = template.clone();
        spec.seed = replicate_seed(master, j);
        let truth = simulate_dataset(&spec)?;
        let name = format!("rep_{:0width$}", j + 1);
        let dir = out.join(&name);
        create_dir(&dir)?;
        truth.data.write_csv(dir.join("data.csv"))?;
        truth.write_truth_json(dir.join("truth.json"))?;
        let mut labels = String::from("subject,C");
        for m in 1..=truth.data.n_markers() {
            labels.push_str(&format!(",L_{m}"));
        }
        labels.push('\n');
        for (i, id) in truth.data.subject_ids().iter().enumerate() {
            labels.push_str(&format!("{id},{}", truth.global[i] + 1));
            for l in &truth.local[i] {
                labels.push_str(&format!(",{}", l + 1));
            }
            labels.push('\n');
        }
        write_text(&dir.join("truth_clusters.csv"), &labels)?;
        let mut cfg = fit_config_for(&truth.params, crate::config::McmcControls::new(1000, 6000, 1)).to_json_pretty();
        cfg.push('\n');
        write_text(&dir.join("fit_config.json"), &cfg)?;
        derived.insert(name, spec.seed);
    }
    let inputs = BTreeMap::from([("scenario".to_string(), sha256_hex(&spec_bytes))]);
    write_manifest(out, "simulate", inputs, Some(master), derived)
}

pub fn cmd_select_k(data: &Path, config: &Path, ks: &[usize], out: &Path, seed: Option<u64>, chains: Option<usize>) -> Result<()> {
    if ks.len() == 1 {
        eprintln!("warning: a single candidate K = {} is selected trivially", ks[0]);
    }
    let (cfg, dataset) = load_inputs(data, config, seed, chains)?;
    let (selection, results) = select_k_fits(&dataset, &cfg, ks)?;
    create_dir(out)?;
    let mut table = String::from("K,mean_adjusted_adherence");
    let r = cfg.n_markers();
    for m in 1..=r {
        table.push_str(&format!(",alpha_{m}"));
    }
    table.push('\n');
    for res in &results {
        table.push_str(&format!("{},{}", res.k, fmt_f64(res.mean_adjusted_adherence)));
        for a in &res.adherence {
            table.push_str(&format!(",{}", fmt_f64(a.mean)));
        }
        table.push('\n');
    }
    write_text(&out.join("adherence_by_k.csv"), &table)?;
    let mut json = serde_json::to_string_pretty(&selection)?;
    json.push('\n');
    write_text(&out.join("k_selection.json"), &json)?;
    println!("K_hat = {}{}", selection.k_hat, if selection.tie { " (tie)" } else { "" });
    let inputs = BTreeMap::from([
        ("config".to_string(), sha256_hex(&read_bytes(config)?)),
        ("data".to_string(), sha256_hex(&read_bytes(data)?)),
    ]);
    write_manifest(out, "select-k", inputs, Some(cfg.mcmc.seed), BTreeMap::new())
}

#[derive(Debug, Serialize)]
struct DiagnosticsReport {
    n_parameters: usize,
    n_chains: usize,
    /// Share of finite Geweke statistics with `|z| < 3.29`.
    geweke_within: f64,
    geweke_failures: Vec<String>,
    ppc_p_value: f64,
}

pub fn cmd_diagnose(fit_dir: &Path, out: &Path) -> Result<()> {
    if !fit_dir.join("draws").join(crate::postprocess::LAYOUT_FILE).is_file() {
        return Err(BccError::validation("fit_dir", format!("{} holds no fit output; run `bcc fit` first", fit_dir.display())));
    }
    let cfg = ModelConfig::load(fit_dir.join("config.json"))?;
    let dataset = ingest_csv(fit_dir.join("data.csv"), cfg.marker_specs())?;
    let raw = read_draws(fit_dir.join("draws"))?;
    let relabeled = relabel_stephens(&raw)?;
    let layout = &relabeled.draws.layout;
    let slots = param_slots(layout);
    create_dir(out)?;

    let mut geweke = String::from("parameter,chain,z,status\n");
    let (mut finite, mut within) = (0usize, 0usize);
    let mut failures = Vec::new();
    let n_chains = relabeled.draws.n_chains();
    for slot in &slots {
        for c in 0..n_chains {
            let values: Vec<f64> = relabeled.draws.chain(c).map(|d| slot.get(d, layout)).collect();
            let name = slot.name();
            // entries pinned by the model structure (e.g. off-diagonal of a diagonal Sigma)
            if values.windows(2).all(|w| w[0] == w[1]) {
                geweke.push_str(&format!("\"{name}\",{},,constant\n", c + 1));
                continue;
            }
            match geweke_z(&values, GEWEKE_FIRST, GEWEKE_LAST) {
                Ok(z) => {
                    finite += 1;
                    if z.abs() < 3.29 {
                        within += 1;
                    }
                    geweke.push_str(&format!("\"{name}\",{},{},ok\n", c + 1, fmt_f64(z)));
                }
                Err(e) => {
                    failures.push(format!("{name} (chain {}): {e}", c + 1));
                    geweke.push_str(&format!("\"{name}\",{},,\"{e}\"\n", c + 1));
                }
            }
        }
    }
    write_text(&out.join("geweke.csv"), &geweke)?;
    if finite == 0 {
        if let Some(first) = failures.first() {
            eprintln!("warning: no Geweke statistic could be computed; first failure: {first}");
        }
    }

    let designs = crate::longdata::build_designs(&dataset, &cfg.design_spec())?;
    let ppc = posterior_predictive_check(&relabeled.draws, &dataset, &designs, ppc_seed(&cfg))?;
    let mut table = String::from("chain,draw,T_obs,T_rep\n");
    for ((d, o), r) in relabeled.draws.draws.iter().zip(&ppc.t_obs).zip(&ppc.t_rep) {
        table.push_str(&format!("{},{},{},{}\n", d.chain + 1, d.index + 1, fmt_f64(*o), fmt_f64(*r)));
    }
    write_text(&out.join("ppc.csv"), &table)?;
    let report = DiagnosticsReport {
        n_parameters: slots.len(),
        n_chains,
        geweke_within: if finite > 0 { within as f64 / finite as f64 } else { f64::NAN },
        geweke_failures: failures,
        ppc_p_value: ppc.p_value,
    };
    let mut json = serde_json::to_string_pretty(&report)?;
    json.push('\n');
    write_text(&out.join("diagnostics.json"), &json)?;
    println!("Bayesian p-value {:.3}; {within} of {finite} Geweke statistics within |z| < 3.29", ppc.p_value);
    let inputs = BTreeMap::from([("summary".to_string(), sha256_hex(&read_bytes(&fit_dir.join("summary.json"))?))]);
    write_manifest(out, "diagnose", inputs, Some(cfg.mcmc.seed), BTreeMap::new())
}

/// `{"aRand": .., "jaccard": ..}` after matching the two files by subject id.
pub fn cmd_metrics(a: &Path, b: &Path) -> Result<String> {
    let (ids_a, pa) = Partition::read_csv(a)?;
    let (ids_b, pb) = Partition::read_csv(b)?;
    let index_b: BTreeMap<&str, usize> = ids_b.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let index_a: BTreeMap<&str, usize> = ids_a.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    if index_a.len() != ids_a.len() || index_b.len() != ids_b.len() {
        return Err(BccError::Invalid("duplicate subject ids in a partition file".into()));
    }
    let only_a: Vec<&str> = ids_a.iter().map(String::as_str).filter(|s| !index_b.contains_key(s)).collect();
    let only_b: Vec<&str> = ids_b.iter().map(String::as_str).filter(|s| !index_a.contains_key(s)).collect();
    if !only_a.is_empty() || !only_b.is_empty() {
        let list = |ids: &[&str]| {
            let mut s = ids.iter().take(20).copied().collect::<Vec<_>>().join(", ");
            if ids.len() > 20 {
                s.push_str(&format!(", ... ({} more)", ids.len() - 20));
            }
            s
        };
        return Err(BccError::Invalid(format!(
            "subject ids differ; only in {}: [{}]; only in {}: [{}]",
            a.display(),
            list(&only_a),
            b.display(),
            list(&only_b)
        )));
    }
    let aligned = Partition::new(ids_a.iter().map(|id| pb.labels()[index_b[id.as_str()]]).collect())?;
    let ari = adjusted_rand(&pa, &aligned)?;
    let jac = jaccard_pair(&pa, &aligned)?;
    let value = serde_json::json!({ "aRand": ari.value, "jaccard": jac.value });
    Ok(serde_json::to_string(&value)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_ranges() {
        assert_eq!(parse_k_range("2..5").unwrap(), vec![2, 3, 4, 5]);
        assert_eq!(parse_k_range("4,2,4").unwrap(), vec![2, 4]);
        assert_eq!(parse_k_range("3").unwrap(), vec![3]);
        assert!(parse_k_range("5..2").is_err());
        assert!(parse_k_range("1..3").is_err());
        assert!(parse_k_range("x").is_err());
    }

    #[test]
    fn sha_hex() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run(["bcc", "fit"]), 2);
        assert_eq!(run(["bcc", "frobnicate"]), 2);
    }
}
