//! Key-value run configuration with `[game]`, `[numerics]`, and `[run]`
//! sections. Parsing is strict: unknown keys, malformed values, and shape
//! mismatches are reported with the offending line number.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use fuelgame_core::{CostFunction, GameSpec, JointState, SchemeParams, Variant};

/// A parse or validation failure, carrying the 1-based line number when the
/// problem is tied to a specific line.
#[derive(Debug)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        Self {
            line: Some(line),
            message: message.into(),
        }
    }

    fn global(message: impl Into<String>) -> Self {
        Self {
            line: None,
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(n) => write!(f, "config line {n}: {}", self.message),
            None => write!(f, "config: {}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// A fully validated run configuration.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub spec: GameSpec,
    pub params: SchemeParams,
    /// Monte Carlo path count for `verify` and endpoint summaries.
    pub n_paths: usize,
    /// Boundary table coverage in accessible fuel.
    pub y_max: f64,
    pub output_dir: PathBuf,
    /// Player index for value/verify queries.
    pub player: usize,
    /// Number of states on evaluation grids.
    pub grid_points: usize,
    /// Start state for simulation and verification.
    pub start: JointState,
}

struct Raw {
    line: usize,
    value: String,
}

type Section = BTreeMap<String, Raw>;

fn parse_sections(text: &str) -> Result<BTreeMap<String, Section>, ConfigError> {
    let mut sections: BTreeMap<String, Section> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            let name = name.trim();
            if !matches!(name, "game" | "numerics" | "run") {
                return Err(ConfigError::at(line_no, format!("unknown section [{name}]")));
            }
            current = Some(name.to_string());
            sections.entry(name.to_string()).or_default();
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::at(
                line_no,
                format!("expected `key = value`, got `{line}`"),
            ));
        };
        let Some(section) = current.as_ref() else {
            return Err(ConfigError::at(
                line_no,
                "key outside any [game]/[numerics]/[run] section",
            ));
        };
        let key = key.trim().to_string();
        let entry = sections.get_mut(section).unwrap();
        if entry.contains_key(&key) {
            return Err(ConfigError::at(line_no, format!("duplicate key `{key}`")));
        }
        entry.insert(
            key,
            Raw {
                line: line_no,
                value: value.trim().to_string(),
            },
        );
    }
    Ok(sections)
}

fn take(section: &mut Section, key: &str) -> Option<Raw> {
    section.remove(key)
}

fn reject_unknown(name: &str, section: &Section) -> Result<(), ConfigError> {
    if let Some((key, raw)) = section.iter().next() {
        return Err(ConfigError::at(
            raw.line,
            format!("unknown key `{key}` in [{name}]"),
        ));
    }
    Ok(())
}

fn parse_num<T: std::str::FromStr>(raw: &Raw, key: &str) -> Result<T, ConfigError> {
    raw.value
        .parse()
        .map_err(|_| ConfigError::at(raw.line, format!("invalid value `{}` for {key}", raw.value)))
}

fn parse_float_list(raw: &Raw, key: &str) -> Result<Vec<f64>, ConfigError> {
    raw.value
        .split_whitespace()
        .map(|t| {
            t.parse().map_err(|_| {
                ConfigError::at(raw.line, format!("invalid number `{t}` in {key}"))
            })
        })
        .collect()
}

fn parse_adjacency(raw: &Raw) -> Result<Vec<Vec<u8>>, ConfigError> {
    let mut rows = Vec::new();
    for row in raw.value.split(';') {
        let mut parsed = Vec::new();
        for tok in row.split_whitespace() {
            match tok {
                "0" => parsed.push(0u8),
                "1" => parsed.push(1u8),
                _ => {
                    return Err(ConfigError::at(
                        raw.line,
                        format!("adjacency entries must be 0 or 1, got `{tok}`"),
                    ))
                }
            }
        }
        if parsed.is_empty() {
            return Err(ConfigError::at(raw.line, "empty adjacency row"));
        }
        rows.push(parsed);
    }
    Ok(rows)
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut sections = parse_sections(text)?;
    let mut game = sections.remove("game").unwrap_or_default();
    let mut numerics = sections.remove("numerics").unwrap_or_default();
    let mut run = sections.remove("run").unwrap_or_default();

    // [game]
    let variant_raw = take(&mut game, "variant")
        .ok_or_else(|| ConfigError::global("missing required key `variant` in [game]"))?;
    let players_raw = take(&mut game, "players")
        .ok_or_else(|| ConfigError::global("missing required key `players` in [game]"))?;
    let alpha_raw = take(&mut game, "alpha")
        .ok_or_else(|| ConfigError::global("missing required key `alpha` in [game]"))?;
    let n: usize = parse_num(&players_raw, "players")?;
    if n < 2 {
        return Err(ConfigError::at(players_raw.line, "players must be at least 2"));
    }
    let alpha: f64 = parse_num(&alpha_raw, "alpha")?;
    if !(alpha > 0.0) {
        return Err(ConfigError::at(alpha_raw.line, "alpha must be positive"));
    }
    let cost = match take(&mut game, "cost") {
        None => CostFunction::quadratic(),
        Some(raw) => {
            let mut toks = raw.value.split_whitespace();
            match (toks.next(), toks.next()) {
                (Some("quadratic"), None) => CostFunction::quadratic(),
                (Some("quadratic_log_cosh"), Some(w)) => {
                    let w: f64 = w.parse().map_err(|_| {
                        ConfigError::at(raw.line, format!("invalid weight `{w}` for cost"))
                    })?;
                    CostFunction::quadratic_log_cosh(w)
                }
                _ => {
                    return Err(ConfigError::at(
                        raw.line,
                        format!("unknown cost `{}` (expected `quadratic` or `quadratic_log_cosh W`)", raw.value),
                    ))
                }
            }
        }
    };
    let adjacency = take(&mut game, "adjacency");
    let spec = match variant_raw.value.as_str() {
        "pooling" => {
            if let Some(raw) = adjacency {
                return Err(ConfigError::at(raw.line, "adjacency is only valid for variant = sharing"));
            }
            GameSpec::pooling(n, alpha, cost)
        }
        "dividing" => {
            if let Some(raw) = adjacency {
                return Err(ConfigError::at(raw.line, "adjacency is only valid for variant = sharing"));
            }
            GameSpec::dividing(n, alpha, cost)
        }
        "sharing" => {
            let raw = adjacency.ok_or_else(|| {
                ConfigError::at(variant_raw.line, "variant = sharing requires an adjacency key")
            })?;
            let rows = parse_adjacency(&raw)?;
            if rows.len() != n {
                return Err(ConfigError::at(
                    raw.line,
                    format!("adjacency has {} rows but players = {n}", rows.len()),
                ));
            }
            if let Some(bad) = rows.iter().position(|r| r.iter().all(|&a| a == 0)) {
                return Err(ConfigError::at(
                    raw.line,
                    format!("adjacency row {bad} is all zeros: each player needs access to at least one resource"),
                ));
            }
            GameSpec::sharing(rows, alpha, cost)
        }
        other => {
            return Err(ConfigError::at(
                variant_raw.line,
                format!("unknown variant `{other}` (expected pooling, dividing, or sharing)"),
            ))
        }
    }
    .map_err(|e| ConfigError::at(variant_raw.line, e.to_string()))?;
    reject_unknown("game", &game)?;

    // [numerics]
    let mut params = SchemeParams::for_discount(alpha);
    let mut delta_set = false;
    if let Some(raw) = take(&mut numerics, "dt") {
        params.dt = parse_num(&raw, "dt")?;
        if !(params.dt > 0.0) {
            return Err(ConfigError::at(raw.line, "dt must be positive"));
        }
    }
    if let Some(raw) = take(&mut numerics, "delta") {
        params.delta = parse_num(&raw, "delta")?;
        delta_set = true;
        if !(params.delta > 0.0) {
            return Err(ConfigError::at(raw.line, "delta must be positive"));
        }
    }
    if !delta_set {
        params.delta = params.dt.sqrt();
    }
    if let Some(raw) = take(&mut numerics, "horizon") {
        params.horizon = parse_num(&raw, "horizon")?;
        if !(params.horizon > 0.0) {
            return Err(ConfigError::at(raw.line, "horizon must be positive"));
        }
    }
    if let Some(raw) = take(&mut numerics, "boundary_tol") {
        params.boundary_tol = parse_num(&raw, "boundary_tol")?;
    }
    if let Some(raw) = take(&mut numerics, "seed") {
        params.seed = parse_num(&raw, "seed")?;
    }
    let n_paths = match take(&mut numerics, "paths") {
        Some(raw) => parse_num(&raw, "paths")?,
        None => 2000usize,
    };
    let y_max = match take(&mut numerics, "y_max") {
        Some(raw) => {
            let v: f64 = parse_num(&raw, "y_max")?;
            if !(v > 0.0) {
                return Err(ConfigError::at(raw.line, "y_max must be positive"));
            }
            v
        }
        None => 4.0,
    };
    reject_unknown("numerics", &numerics)?;

    // [run]
    let output_dir = match take(&mut run, "output_dir") {
        Some(raw) => PathBuf::from(raw.value),
        None => PathBuf::from("out"),
    };
    let player = match take(&mut run, "player") {
        Some(raw) => {
            let p: usize = parse_num(&raw, "player")?;
            if p >= n {
                return Err(ConfigError::at(
                    raw.line,
                    format!("player {p} out of range for {n} players"),
                ));
            }
            p
        }
        None => 0,
    };
    let grid_points = match take(&mut run, "grid_points") {
        Some(raw) => {
            let g: usize = parse_num(&raw, "grid_points")?;
            if g == 0 {
                return Err(ConfigError::at(raw.line, "grid_points must be positive"));
            }
            g
        }
        None => 25,
    };
    let positions = match take(&mut run, "start_positions") {
        Some(raw) => {
            let v = parse_float_list(&raw, "start_positions")?;
            if v.len() != n {
                return Err(ConfigError::at(
                    raw.line,
                    format!("start_positions has {} entries but players = {n}", v.len()),
                ));
            }
            v
        }
        None => vec![0.0; n],
    };
    let m = spec.n_resources();
    let resources = match take(&mut run, "start_resources") {
        Some(raw) => {
            let v = parse_float_list(&raw, "start_resources")?;
            if v.len() != m {
                return Err(ConfigError::at(
                    raw.line,
                    format!("start_resources has {} entries but the game has {m} pools", v.len()),
                ));
            }
            if let Some(bad) = v.iter().find(|y| !(**y >= 0.0)) {
                return Err(ConfigError::at(
                    raw.line,
                    format!("resource levels must be nonnegative, got {bad}"),
                ));
            }
            v
        }
        None => match spec.variant() {
            Variant::Pooling => vec![0.8],
            _ => vec![0.5; m],
        },
    };
    reject_unknown("run", &run)?;

    Ok(RunConfig {
        spec,
        params,
        n_paths,
        y_max,
        output_dir,
        player,
        grid_points,
        start: JointState::new(positions, resources),
    })
}
