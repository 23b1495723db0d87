//! Flat `key = value` study configuration files.
//!
//! One key per line; `#` starts a comment. Lists are comma separated and
//! fractions such as `1/3` are accepted wherever a number is expected.
//!
//! | key | meaning | default |
//! |-----|---------|---------|
//! | `kind` | `corrector`, `heat_obstacle`, `eigen`, `pme` | required |
//! | `n` | dimension | 3 |
//! | `alpha` | hole exponent, `a_ε = c0 ε^α` | 3 |
//! | `c0` | hole prefactor (`r0` when critical) | 1 |
//! | `eps` | strictly decreasing list | `1/2, 1/3, 1/4` |
//! | `h_rule` | `resolve:<steps per radius>`, `cells:<steps per period>`, `fixed:<h>` | `resolve:6` |
//! | `box` | `lo, hi` of every axis | `0, 1` |
//! | `capacity_match` | capacity-matched node sets for holes under five steps | `true` |
//! | `k` | corrector right-hand side or `auto` (`cap(B_1)`) | `auto` |
//! | `tol` | solver tolerance | `1e-8` |
//! | `delta` | penalty width, `0` for the projected scheme | 0 |
//! | `t_final`, `cfl_safety`, `snapshots` | time window, step safety, saved intervals | `0.05, 0.9, 20` |
//! | `amplitude`, `initial` | data scale; `obstacle`, `sine` or `bump` | `1, obstacle` |
//! | `p`, `m` | eigen exponent, PME exponent | `0.5, 2` |
//! | `layer_scale` | multiplier on `(ε a/2)^{1/2}` | 1 |
//! | `limit_h` | spacing of the limit grid | finest row |
//! | `sandwich_tol`, `cell_resolution` | barrier tolerance, cell steps per radius | `1e-8, 6` |
//! | `record_wall_time`, `seed` | provenance | `true, 0` |
//! | `output`, `formats` | report directory, `csv,json,plot` | none, `csv,json` |

use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::correctors::HRule;
use crate::error::{Error, Result};
use crate::lab::report::ReportFormat;
use crate::lab::study::StudyConfig;

fn number(key: &str, s: &str) -> Result<f64> {
    let s = s.trim();
    let parsed = match s.split_once('/') {
        Some((a, b)) => a
            .trim()
            .parse::<f64>()
            .ok()
            .zip(b.trim().parse::<f64>().ok())
            .map(|(a, b)| a / b),
        None => s.parse::<f64>().ok(),
    };
    parsed
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Config(format!("{key}: expected a number, got '{s}'")))
}

fn integer(key: &str, s: &str) -> Result<usize> {
    s.trim()
        .parse()
        .map_err(|_| Error::Config(format!("{key}: expected a non-negative integer, got '{s}'")))
}

fn boolean(key: &str, s: &str) -> Result<bool> {
    match s.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(Error::Config(format!("{key}: expected true or false, got '{other}'"))),
    }
}

fn h_rule(s: &str) -> Result<HRule> {
    let (name, arg) = s
        .split_once(':')
        .ok_or_else(|| Error::Config(format!("h_rule: expected '<rule>:<value>', got '{s}'")))?;
    match name.trim() {
        "resolve" => Ok(HRule::ResolveHole(number("h_rule", arg)?)),
        "cells" => Ok(HRule::CellsPerPeriod(integer("h_rule", arg)?)),
        "fixed" => Ok(HRule::Fixed(number("h_rule", arg)?)),
        other => Err(Error::Config(format!("h_rule: unknown rule '{other}'"))),
    }
}

/// Parses a configuration; relative output paths are kept as written.
pub fn parse_config(text: &str) -> Result<StudyConfig> {
    let mut cfg = StudyConfig::default();
    let mut kind_seen = false;
    let mut seen = std::collections::HashSet::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", lineno + 1)))?;
        let (key, value) = (key.trim(), value.trim());
        if !seen.insert(key.to_string()) {
            return Err(Error::Config(format!("line {}: duplicate key '{key}'", lineno + 1)));
        }
        match key {
            "kind" => {
                cfg.kind = value.parse()?;
                kind_seen = true;
            }
            "n" => cfg.n = integer(key, value)?,
            "alpha" => cfg.alpha = number(key, value)?,
            "c0" | "r0" => cfg.c0 = number(key, value)?,
            "eps" => {
                cfg.eps_list = value
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| number(key, s))
                    .collect::<Result<_>>()?
            }
            "h_rule" => cfg.h_rule = h_rule(value)?,
            "box" => {
                let parts: Vec<f64> = value.split(',').map(|s| number(key, s)).collect::<Result<_>>()?;
                let [lo, hi] = parts[..] else {
                    return Err(Error::Config("box: expected 'lo, hi'".into()));
                };
                cfg.box_lo = lo;
                cfg.box_hi = hi;
            }
            "capacity_match" => cfg.capacity_match = boolean(key, value)?,
            "k" => {
                cfg.k = if value == "auto" {
                    None
                } else {
                    Some(number(key, value)?)
                }
            }
            "tol" => cfg.tol = number(key, value)?,
            "delta" => cfg.delta = number(key, value)?,
            "t_final" => cfg.t_final = number(key, value)?,
            "cfl_safety" => cfg.cfl_safety = number(key, value)?,
            "snapshots" => cfg.snapshots = integer(key, value)?,
            "amplitude" => cfg.amplitude = number(key, value)?,
            "initial" => cfg.initial = value.parse()?,
            "p" => cfg.p = number(key, value)?,
            "m" => cfg.m = number(key, value)?,
            "layer_scale" => cfg.layer_scale = number(key, value)?,
            "limit_h" => cfg.limit_h = Some(number(key, value)?),
            "sandwich_tol" => cfg.sandwich_tol = number(key, value)?,
            "cell_resolution" => cfg.cell_resolution = number(key, value)?,
            "record_wall_time" => cfg.record_wall_time = boolean(key, value)?,
            "seed" => cfg.seed = integer(key, value)? as u64,
            "output" => cfg.output = Some(PathBuf::from(value)),
            "formats" => {
                cfg.formats = value
                    .split(',')
                    .map(|s| s.parse::<ReportFormat>())
                    .collect::<Result<_>>()?
            }
            other => return Err(Error::Config(format!("line {}: unknown key '{other}'", lineno + 1))),
        }
    }
    if !kind_seen {
        return Err(Error::Config("missing required key 'kind'".into()));
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Reads and parses a configuration file; a relative `output` is resolved
/// against the file's directory.
pub fn load_config(path: &Path) -> Result<StudyConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut cfg = parse_config(&text)?;
    if let (Some(out), Some(dir)) = (&cfg.output, path.parent()) {
        if out.is_relative() {
            cfg.output = Some(dir.join(out));
        }
    }
    Ok(cfg)
}

/// SHA-256 of the canonical JSON form of every solver-relevant field.
pub fn config_hash(cfg: &StudyConfig) -> String {
    let canonical = serde_json::to_string(cfg).expect("config serializes");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}
