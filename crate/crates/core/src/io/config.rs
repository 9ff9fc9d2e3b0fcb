//! Flat `key = value` experiment configuration.
//!
//! Lines are `key = value`; `#` starts a comment; lists are comma separated
//! and β accepts `inf`. Unknown keys are errors. Keys:
//!
//! | key | default |
//! |-----|---------|
//! | `scenario` | required |
//! | `n_grid` | `100, 400, 1600` |
//! | `beta_grid` | `0.5, 1, 2, inf` |
//! | `replications` (alias `R`) | `10000` |
//! | `master_seed` | `1` |
//! | `tolerance_se_multiplier` | `3` |
//! | `backend` | `grid_quadrature` (or `metropolis`) |
//! | `grid_nodes_per_dim`, `grid_span_sd` | `201`, `12` |
//! | `mh_chains`, `mh_steps`, `mh_burn_in`, `mh_proposal_scale` | `16`, `2500`, `1000`, `2.4` |

use std::collections::HashSet;
use std::path::Path;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::beta::Beta;
use crate::error::{EosError, Result};
use crate::harness::ExperimentConfig;
use crate::posterior::{GridConfig, MetropolisConfig, PosteriorBackend};

fn parse_value<T: FromStr>(line: usize, key: &str, raw: &str) -> Result<T> {
    raw.trim()
        .parse()
        .map_err(|_| EosError::Parse { line, message: format!("invalid value `{}` for `{key}`", raw.trim()) })
}

fn parse_list<T: FromStr>(line: usize, key: &str, raw: &str) -> Result<Vec<T>> {
    raw.split(',').filter(|s| !s.trim().is_empty()).map(|s| parse_value(line, key, s)).collect()
}

/// Parses config text and fills defaults. Does not validate.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut scenario = None;
    let mut cfg = ExperimentConfig::new("");
    let mut backend_kind = String::from("grid_quadrature");
    let mut grid = GridConfig::default();
    let mut mh = MetropolisConfig::default();
    let mut seen = HashSet::new();

    for (idx, raw_line) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw_line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| EosError::Parse { line, message: "expected `key = value`".into() })?;
        let key = match key.trim() {
            "R" => "replications",
            "scenario_id" => "scenario",
            k => k,
        };
        if !seen.insert(key.to_string()) {
            return Err(EosError::Parse { line, message: format!("duplicate key `{key}`") });
        }
        let value = value.trim();
        match key {
            "scenario" => scenario = Some(value.to_string()),
            "n_grid" => cfg.n_grid = parse_list(line, key, value)?,
            "beta_grid" => {
                cfg.beta_grid = value
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| Beta::from_str(s).map_err(|e| EosError::Parse { line, message: e.to_string() }))
                    .collect::<Result<_>>()?
            }
            "replications" => cfg.replications = parse_value(line, key, value)?,
            "master_seed" => cfg.master_seed = parse_value(line, key, value)?,
            "tolerance_se_multiplier" => cfg.tolerance_se_multiplier = parse_value(line, key, value)?,
            "backend" => backend_kind = value.to_string(),
            "grid_nodes_per_dim" => grid.nodes_per_dim = parse_value(line, key, value)?,
            "grid_span_sd" => grid.span_sd = parse_value(line, key, value)?,
            "mh_chains" => mh.chains = parse_value(line, key, value)?,
            "mh_steps" => mh.steps = parse_value(line, key, value)?,
            "mh_burn_in" => mh.burn_in = parse_value(line, key, value)?,
            "mh_proposal_scale" => mh.proposal_scale = parse_value(line, key, value)?,
            other => return Err(EosError::Parse { line, message: format!("unknown key `{other}`") }),
        }
    }
    cfg.scenario_id =
        scenario.ok_or_else(|| EosError::Parse { line: 0, message: "missing required key `scenario`".into() })?;
    cfg.backend = match backend_kind.as_str() {
        "grid_quadrature" | "grid" => PosteriorBackend::GridQuadrature(grid),
        "metropolis" => PosteriorBackend::Metropolis(mh),
        other => return Err(EosError::Parse { line: 0, message: format!("unknown backend `{other}`") }),
    };
    Ok(cfg)
}

/// Canonical text form; `parse_config(serialize_config(c)) == c`.
pub fn serialize_config(cfg: &ExperimentConfig) -> String {
    let join = |v: Vec<String>| v.join(", ");
    let mut s = String::new();
    s.push_str(&format!("scenario = {}\n", cfg.scenario_id));
    s.push_str(&format!("n_grid = {}\n", join(cfg.n_grid.iter().map(|n| n.to_string()).collect())));
    s.push_str(&format!("beta_grid = {}\n", join(cfg.beta_grid.iter().map(|b| b.to_string()).collect())));
    s.push_str(&format!("replications = {}\n", cfg.replications));
    s.push_str(&format!("master_seed = {}\n", cfg.master_seed));
    s.push_str(&format!("tolerance_se_multiplier = {}\n", cfg.tolerance_se_multiplier));
    match cfg.backend {
        PosteriorBackend::GridQuadrature(g) => {
            s.push_str("backend = grid_quadrature\n");
            s.push_str(&format!("grid_nodes_per_dim = {}\n", g.nodes_per_dim));
            s.push_str(&format!("grid_span_sd = {}\n", g.span_sd));
        }
        PosteriorBackend::Metropolis(m) => {
            s.push_str("backend = metropolis\n");
            s.push_str(&format!("mh_chains = {}\n", m.chains));
            s.push_str(&format!("mh_steps = {}\n", m.steps));
            s.push_str(&format!("mh_burn_in = {}\n", m.burn_in));
            s.push_str(&format!("mh_proposal_scale = {}\n", m.proposal_scale));
        }
    }
    s
}

/// Hex SHA-256 of the canonical config text.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let digest = Sha256::digest(serialize_config(cfg).as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Reads, parses and validates a config file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    let cfg = parse_config(&text)?;
    cfg.validate()?;
    Ok(cfg)
}
