use std::collections::BTreeMap;
use std::path::Path;

use crate::CliError;

/// Settings that may come from a `key = value` file; command-line flags win.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Config {
    pub tol: Option<f64>,
    pub points_per_axis: Option<usize>,
    pub cutoff: Option<f64>,
    pub seed: Option<u64>,
    pub mc_n: Option<usize>,
    pub mc_replicates: Option<u64>,
    pub budget: Option<f64>,
    pub threads: Option<usize>,
}

const KEYS: [&str; 8] = [
    "tol",
    "points_per_axis",
    "cutoff",
    "seed",
    "mc_n",
    "mc_replicates",
    "budget",
    "threads",
];

fn parse_value<T: std::str::FromStr>(key: &str, raw: &str, line: usize) -> Result<T, CliError> {
    raw.parse()
        .map_err(|_| CliError::Usage(format!("config line {line}: bad value for {key}: {raw}")))
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Blank lines, `#` comments and `[section]` headers are ignored; values
    /// may be quoted.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut seen = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() || line.starts_with('[') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Usage(format!("config line {}: expected key = value", i + 1))
            })?;
            let key = key.trim().replace('-', "_");
            if !KEYS.contains(&key.as_str()) {
                return Err(CliError::Usage(format!(
                    "config line {}: unknown key {key}",
                    i + 1
                )));
            }
            let value = value.trim().trim_matches('"').to_string();
            seen.insert(key, (value, i + 1));
        }
        let mut c = Config::default();
        for (key, (v, line)) in &seen {
            match key.as_str() {
                "tol" => c.tol = Some(parse_value(key, v, *line)?),
                "points_per_axis" => c.points_per_axis = Some(parse_value(key, v, *line)?),
                "cutoff" => c.cutoff = Some(parse_value(key, v, *line)?),
                "seed" => c.seed = Some(parse_value(key, v, *line)?),
                "mc_n" => c.mc_n = Some(parse_value(key, v, *line)?),
                "mc_replicates" => c.mc_replicates = Some(parse_value(key, v, *line)?),
                "budget" => c.budget = Some(parse_value(key, v, *line)?),
                "threads" => c.threads = Some(parse_value(key, v, *line)?),
                _ => unreachable!(),
            }
        }
        Ok(c)
    }
}
