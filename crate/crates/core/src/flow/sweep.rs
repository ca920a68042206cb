//! Configuration sweeps.
//!
//! A matrix file uses the configuration syntax with a list of alternatives
//! per key:
//!
//! ```text
//! ip_name = mem
//! data_width = 8, 16, 32
//! ecc = none, sed, secded, dected
//! lp_modes = -, retention, shutdown, retention+shutdown
//! ```
//!
//! For set-valued keys `+` joins the members of one alternative and `-`
//! stands for the empty set.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use thiserror::Error;

use super::{cmd_flow, FlowOptions};
use crate::configspec::{parse_config, IpConfiguration};
use crate::vplan::format_pct;

const SET_KEYS: [&str; 3] = ["lp_modes", "ahb_bursts", "bug_mutations"];
const KEYS: [&str; 8] = [
    "ip_name",
    "data_width",
    "addr_words",
    "ecc",
    "tech",
    "lp_modes",
    "ahb_bursts",
    "bug_mutations",
];

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("matrix is empty")]
    Empty,
    #[error("matrix yields no valid configuration")]
    NoValidConfig,
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Alternatives per key, in file order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matrix {
    pub axes: Vec<(String, Vec<String>)>,
}

pub fn parse_matrix(text: &str) -> Result<Matrix, SweepError> {
    let mut axes: Vec<(String, Vec<String>)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() || content == "[debug]" {
            continue;
        }
        let err = |msg: String| SweepError::Syntax { line, msg };
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| err(format!("expected `key = values`, got `{content}`")))?;
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(err(format!("unknown key `{key}`")));
        }
        if axes.iter().any(|(k, _)| k == key) {
            return Err(err(format!("duplicate key `{key}`")));
        }
        let is_set = SET_KEYS.contains(&key);
        let mut alts = Vec::new();
        for alt in value.split(',').map(str::trim) {
            if alt.is_empty() {
                return Err(err(format!("empty alternative for `{key}`")));
            }
            let alt = if is_set {
                if alt == "-" {
                    String::new()
                } else {
                    alt.split('+').map(str::trim).collect::<Vec<_>>().join(",")
                }
            } else {
                alt.to_string()
            };
            if !alts.contains(&alt) {
                alts.push(alt);
            }
        }
        axes.push((key.to_string(), alts));
    }
    if axes.is_empty() {
        return Err(SweepError::Empty);
    }
    Ok(Matrix { axes })
}

impl Matrix {
    /// Number of raw combinations, valid or not.
    pub fn size(&self) -> usize {
        self.axes.iter().map(|(_, v)| v.len()).product()
    }

    /// Configuration text for every combination, first axis slowest.
    pub fn combinations(&self) -> Vec<String> {
        let mut out = vec![Vec::<(&str, &str)>::new()];
        for (key, alts) in &self.axes {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    alts.iter().map(move |a| {
                        let mut p = prefix.clone();
                        p.push((key.as_str(), a.as_str()));
                        p
                    })
                })
                .collect();
        }
        out.into_iter()
            .map(|pairs| {
                let mut text = String::new();
                let mut debug = String::new();
                for (k, v) in pairs {
                    let target = if k == "bug_mutations" { &mut debug } else { &mut text };
                    target.push_str(&format!("{k} = {v}\n"));
                }
                if !debug.is_empty() {
                    text.push_str("[debug]\n");
                    text.push_str(&debug);
                }
                text
            })
            .collect()
    }

    /// Valid configurations, deduplicated by tag, plus the number of
    /// combinations rejected by the configuration rules.
    pub fn configurations(&self) -> (Vec<IpConfiguration>, usize) {
        let mut seen = std::collections::BTreeSet::new();
        let mut valid = Vec::new();
        let mut invalid = 0;
        for text in self.combinations() {
            match parse_config(&text) {
                Ok(cfg) => {
                    if seen.insert(cfg.config_tag()) {
                        valid.push(cfg);
                    }
                }
                Err(e) => {
                    log::debug!("skipping combination: {e}");
                    invalid += 1;
                }
            }
        }
        (valid, invalid)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub config_tag: String,
    pub exit_code: i32,
    pub runs: usize,
    pub fails: usize,
    /// One decimal, empty when the flow did not reach rollup.
    pub coverage_mean: String,
    pub pushed: usize,
    pub wall_ms: u128,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub rows: Vec<SweepRow>,
    pub skipped: usize,
    pub table: PathBuf,
}

pub const SUMMARY_FILE: &str = "summary.csv";

/// Runs the flow for every valid configuration in the matrix, each under
/// `<out>/<config_tag>`, and writes `<out>/summary.csv`. A failing
/// configuration is recorded and the sweep continues.
pub fn cmd_sweep(
    matrix: &Matrix,
    superset: &Path,
    out: &Path,
    seed: u64,
    jobs: usize,
    archive: Option<&Path>,
) -> Result<SweepSummary, SweepError> {
    let (configs, skipped) = matrix.configurations();
    if configs.is_empty() {
        return Err(SweepError::NoValidConfig);
    }
    let cfg_dir = out.join("configs");
    fs::create_dir_all(&cfg_dir).map_err(|e| SweepError::Io(format!("{}: {e}", cfg_dir.display())))?;
    let archive = archive.map_or_else(|| out.join("archive"), Path::to_path_buf);
    let mut rows = Vec::with_capacity(configs.len());
    for cfg in &configs {
        let tag = cfg.config_tag();
        let cfg_path = cfg_dir.join(format!("{tag}.cfg"));
        fs::write(&cfg_path, cfg.to_canonical_text())
            .map_err(|e| SweepError::Io(format!("{}: {e}", cfg_path.display())))?;
        let mut opts = FlowOptions::new(&cfg_path, superset, &out.join(&tag), seed);
        opts.archive = Some(archive.clone());
        opts.jobs = jobs;
        let start = Instant::now();
        let o = cmd_flow(&opts);
        let wall_ms = start.elapsed().as_millis();
        log::info!("{tag}: exit {} ({} ms)", o.exit_code, wall_ms);
        rows.push(SweepRow {
            config_tag: tag,
            exit_code: o.exit_code,
            runs: o.runs,
            fails: o.fails,
            coverage_mean: o.coverage_mean.as_ref().map(format_pct).unwrap_or_default(),
            pushed: o.pushed,
            wall_ms,
            error: o.error().map(|(s, m)| format!("{s}: {m}")).unwrap_or_default(),
        });
    }
    let table = out.join(SUMMARY_FILE);
    let mut w = csv::Writer::from_path(&table)?;
    w.write_record([
        "config_tag",
        "exit_code",
        "runs",
        "fails",
        "coverage_mean",
        "pushed",
        "wall_ms",
        "error",
    ])?;
    for r in &rows {
        w.write_record([
            r.config_tag.clone(),
            r.exit_code.to_string(),
            r.runs.to_string(),
            r.fails.to_string(),
            r.coverage_mean.clone(),
            r.pushed.to_string(),
            r.wall_ms.to_string(),
            r.error.clone(),
        ])?;
    }
    w.flush().map_err(|e| SweepError::Io(format!("{}: {e}", table.display())))?;
    Ok(SweepSummary {
        rows,
        skipped,
        table,
    })
}
