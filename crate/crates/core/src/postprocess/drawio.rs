//! On-disk form of a set of posterior draws.
//!
//! A draws directory holds `layout.json` (dimensions, acceptance, chain seeds)
//! and four CSV tables keyed by `chain,draw` (both 1-based):
//! `draws_params.csv` (one column per scalar parameter), `draws_labels.csv`
//! (`subject,C,L_1..L_R`, 1-based labels), `draws_beta.csv`
//! (`subject,b_r_j`) and, when recorded, `draws_prob.csv` (`subject,p_1..p_K`).

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::summary::param_slots;
use crate::error::{BccError, Result};
use crate::longdata::fmt_f64;
use crate::mcmc::{AcceptanceSummary, Draw, DrawLayout, PosteriorDraws};

pub const LAYOUT_FILE: &str = "layout.json";
pub const PARAMS_FILE: &str = "draws_params.csv";
pub const LABELS_FILE: &str = "draws_labels.csv";
pub const BETA_FILE: &str = "draws_beta.csv";
pub const PROB_FILE: &str = "draws_prob.csv";

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LayoutFile {
    layout: DrawLayout,
    draws_per_chain: Vec<usize>,
    chain_seeds: Vec<u64>,
    acceptance: Vec<AcceptanceSummary>,
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| open_error(path, e))
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::Reader::from_path(path).map_err(|e| open_error(path, e))
}

fn open_error(path: &Path, e: csv::Error) -> BccError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => BccError::io(path, io),
        other => BccError::Invalid(format!("{}: {other:?}", path.display())),
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> BccError + '_ {
    move |e| BccError::io(path, e)
}

/// Writes every draw under `dir` (created if needed).
pub fn write_draws(draws: &PosteriorDraws, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let layout = &draws.layout;
    let n_chains = draws.n_chains();
    let meta = LayoutFile {
        layout: layout.clone(),
        draws_per_chain: (0..n_chains).map(|c| draws.chain(c).count()).collect(),
        chain_seeds: draws.chain_seeds.clone(),
        acceptance: draws.acceptance.clone(),
    };
    let path = dir.join(LAYOUT_FILE);
    let mut text = serde_json::to_string_pretty(&meta)?;
    text.push('\n');
    std::fs::write(&path, text).map_err(io_err(&path))?;

    let slots = param_slots(layout);
    let path = dir.join(PARAMS_FILE);
    let mut w = writer(&path)?;
    let mut header = vec!["chain".to_string(), "draw".to_string()];
    header.extend(slots.iter().map(|s| s.name()));
    w.write_record(&header)?;
    for d in &draws.draws {
        let mut row = vec![(d.chain + 1).to_string(), (d.index + 1).to_string()];
        row.extend(slots.iter().map(|s| fmt_f64(s.get(d, layout))));
        w.write_record(&row)?;
    }
    w.flush().map_err(io_err(&path))?;

    let path = dir.join(LABELS_FILE);
    let mut w = writer(&path)?;
    let mut header = vec!["chain".to_string(), "draw".to_string(), "subject".to_string(), "C".to_string()];
    header.extend((1..=layout.r).map(|r| format!("L_{r}")));
    w.write_record(&header)?;
    for d in &draws.draws {
        for i in 0..layout.n {
            let mut row = vec![(d.chain + 1).to_string(), (d.index + 1).to_string(), (i + 1).to_string(), (d.global[i] + 1).to_string()];
            row.extend((0..layout.r).map(|r| (d.local(layout, i, r) + 1).to_string()));
            w.write_record(&row)?;
        }
    }
    w.flush().map_err(io_err(&path))?;

    let path = dir.join(BETA_FILE);
    let mut w = writer(&path)?;
    let mut header = vec!["chain".to_string(), "draw".to_string(), "subject".to_string()];
    for r in 0..layout.r {
        header.extend((1..=layout.q[r]).map(|j| format!("b_{}_{j}", r + 1)));
    }
    w.write_record(&header)?;
    let per_subject: usize = layout.q.iter().sum();
    for d in &draws.draws {
        for i in 0..layout.n {
            let mut row = vec![(d.chain + 1).to_string(), (d.index + 1).to_string(), (i + 1).to_string()];
            row.extend(d.beta[i * per_subject..(i + 1) * per_subject].iter().map(|&b| fmt_f64(b)));
            w.write_record(&row)?;
        }
    }
    w.flush().map_err(io_err(&path))?;

    let path = dir.join(PROB_FILE);
    if draws.has_probabilities() {
        let mut w = writer(&path)?;
        let mut header = vec!["chain".to_string(), "draw".to_string(), "subject".to_string()];
        header.extend((1..=layout.k).map(|k| format!("p_{k}")));
        w.write_record(&header)?;
        for d in &draws.draws {
            for i in 0..layout.n {
                let mut row = vec![(d.chain + 1).to_string(), (d.index + 1).to_string(), (i + 1).to_string()];
                row.extend((0..layout.k).map(|k| fmt_f64(d.prob(layout, i, k))));
                w.write_record(&row)?;
            }
        }
        w.flush().map_err(io_err(&path))?;
    } else if path.exists() {
        std::fs::remove_file(&path).map_err(io_err(&path))?;
    }
    Ok(())
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> BccError {
    BccError::Parse { path: path.display().to_string(), line, message: message.into() }
}

/// Reads `path` and checks that rows appear in the order written, with
/// `rows_per_draw` rows per draw; `fill(draw, subject, fields)` consumes the
/// columns after the key.
fn read_table(
    path: &Path,
    draws: &mut [Draw],
    key_len: usize,
    width: usize,
    rows_per_draw: usize,
    mut fill: impl FnMut(&mut Draw, usize, &[f64]) -> std::result::Result<(), String>,
) -> Result<()> {
    let mut rd = reader(path)?;
    let header = rd.headers()?.clone();
    if header.len() != key_len + width {
        return Err(parse_err(path, 1, format!("expected {} columns, found {}", key_len + width, header.len())));
    }
    let mut count = 0usize;
    let mut values = vec![0.0; width];
    for (row, rec) in rd.records().enumerate() {
        let rec = rec?;
        let line = row + 2;
        let s = count / rows_per_draw;
        let i = count % rows_per_draw;
        let Some(d) = draws.get_mut(s) else {
            return Err(parse_err(path, line, "more rows than draws in the layout"));
        };
        let int = |j: usize| rec[j].parse::<usize>().map_err(|_| parse_err(path, line, format!("bad integer '{}'", &rec[j])));
        if int(0)? != d.chain + 1 || int(1)? != d.index + 1 || (key_len == 3 && int(2)? != i + 1) {
            return Err(parse_err(path, line, "rows out of order"));
        }
        for (j, v) in values.iter_mut().enumerate() {
            *v = rec[key_len + j].parse().map_err(|_| parse_err(path, line, format!("bad number '{}'", &rec[key_len + j])))?;
        }
        fill(d, i, &values).map_err(|m| parse_err(path, line, m))?;
        count += 1;
    }
    if count != draws.len() * rows_per_draw {
        return Err(parse_err(path, count + 1, format!("expected {} rows, found {count}", draws.len() * rows_per_draw)));
    }
    Ok(())
}

/// Inverse of [`write_draws`]. Probabilities are left empty when their file is absent.
pub fn read_draws(dir: impl AsRef<Path>) -> Result<PosteriorDraws> {
    let dir = dir.as_ref();
    let path = dir.join(LAYOUT_FILE);
    let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
    let meta: LayoutFile = serde_json::from_str(&text)?;
    let layout = meta.layout;
    let (n, r, k) = (layout.n, layout.r, layout.k);
    let blank = |chain: usize, index: usize| Draw {
        chain,
        index,
        alpha: vec![0.0; r],
        pi: vec![0.0; k],
        gamma: (0..k).map(|_| layout.p.iter().map(|&p| vec![0.0; p]).collect()).collect(),
        sigma: (0..k).map(|_| layout.q.iter().map(|&q| vec![0.0; q * q]).collect()).collect(),
        sigma2: vec![vec![1.0; r]; k],
        global: vec![0; n],
        local: vec![0; n * r],
        beta: vec![0.0; layout.beta_len()],
        prob_global: Vec::new(),
    };
    let mut draws: Vec<Draw> = meta
        .draws_per_chain
        .iter()
        .enumerate()
        .flat_map(|(c, &m)| (0..m).map(move |s| (c, s)))
        .map(|(c, s)| blank(c, s))
        .collect();

    let slots = param_slots(&layout);
    let path = dir.join(PARAMS_FILE);
    {
        let mut rd = reader(&path)?;
        let header = rd.headers()?.clone();
        let names: Vec<String> = slots.iter().map(|s| s.name()).collect();
        if header.iter().skip(2).ne(names.iter().map(String::as_str)) {
            return Err(parse_err(&path, 1, "parameter columns do not match the layout"));
        }
    }
    read_table(&path, &mut draws, 2, slots.len(), 1, |d, _, v| {
        for (slot, &x) in slots.iter().zip(v) {
            slot.set(d, &layout, x);
        }
        Ok(())
    })?;

    let label = |x: f64| -> std::result::Result<usize, String> {
        if x.fract() == 0.0 && x >= 1.0 && x <= k as f64 {
            Ok(x as usize - 1)
        } else {
            Err(format!("label {x} outside 1..={k}"))
        }
    };
    read_table(&dir.join(LABELS_FILE), &mut draws, 3, 1 + r, n, |d, i, v| {
        d.global[i] = label(v[0])?;
        for m in 0..r {
            d.local[i * r + m] = label(v[1 + m])?;
        }
        Ok(())
    })?;

    let per_subject: usize = layout.q.iter().sum();
    read_table(&dir.join(BETA_FILE), &mut draws, 3, per_subject, n, |d, i, v| {
        d.beta[i * per_subject..(i + 1) * per_subject].copy_from_slice(v);
        Ok(())
    })?;

    let path = dir.join(PROB_FILE);
    if path.exists() {
        draws.iter_mut().for_each(|d| d.prob_global = vec![0.0; n * k]);
        read_table(&path, &mut draws, 3, k, n, |d, i, v| {
            d.prob_global[i * k..(i + 1) * k].copy_from_slice(v);
            Ok(())
        })?;
    }
    Ok(PosteriorDraws { layout, draws, acceptance: meta.acceptance, chain_seeds: meta.chain_seeds })
}

/// `chain,draw,old_1..old_K`: the 1-based new label given to each old label.
pub fn write_permutations_csv(permutations: &[Vec<usize>], draws: &[Draw], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let k = permutations.first().map_or(0, |p| p.len());
    let mut w = writer(path)?;
    let mut header = vec!["chain".to_string(), "draw".to_string()];
    header.extend((1..=k).map(|j| format!("old_{j}")));
    w.write_record(&header)?;
    for (p, d) in permutations.iter().zip(draws) {
        let mut row = vec![(d.chain + 1).to_string(), (d.index + 1).to_string()];
        row.extend(p.iter().map(|&x| (x + 1).to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(io_err(path))
}
