use std::collections::BTreeMap;
use std::path::Path;

use crate::CliError;

pub type Point = BTreeMap<String, f64>;

fn canonical(key: &str) -> String {
    match key.trim() {
        "ρ" => "rho".into(),
        "α" => "alpha".into(),
        "β" => "beta".into(),
        "λ" => "lambda".into(),
        k => k.to_lowercase(),
    }
}

/// One point written as `alpha=1,lambda=0.5`; a chain `α=β=1` gives every
/// named key the same value.
pub fn parse_inline(text: &str) -> Result<Point, CliError> {
    let mut point = Point::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let parts: Vec<&str> = item.split('=').collect();
        if parts.len() < 2 {
            return Err(CliError::Usage(format!("expected key=value, got {item:?}")));
        }
        let raw = parts[parts.len() - 1].trim();
        let value: f64 = raw
            .parse()
            .map_err(|_| CliError::Usage(format!("bad number {raw:?} in {item:?}")))?;
        for key in &parts[..parts.len() - 1] {
            point.insert(canonical(key), value);
        }
    }
    if point.is_empty() {
        return Err(CliError::Usage("empty point".into()));
    }
    Ok(point)
}

/// A JSON array of objects, or one inline point per line (`#` comments).
pub fn parse_file(path: &Path) -> Result<Vec<Point>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    if text.trim_start().starts_with('[') {
        let raw: Vec<BTreeMap<String, f64>> = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        return Ok(raw
            .into_iter()
            .map(|p| p.into_iter().map(|(k, v)| (canonical(&k), v)).collect())
            .collect());
    }
    text.lines()
        .enumerate()
        .filter_map(|(i, l)| {
            let l = l.split('#').next().unwrap_or("").trim();
            (!l.is_empty()).then_some((i, l))
        })
        .map(|(i, l)| {
            parse_inline(l)
                .map_err(|e| CliError::Usage(format!("{} line {}: {e}", path.display(), i + 1)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chains_and_aliases() {
        let p = parse_inline("α=β=1,λ=0.5").unwrap();
        assert_eq!(p["alpha"], 1.0);
        assert_eq!(p["beta"], 1.0);
        assert_eq!(p["lambda"], 0.5);
        assert!(parse_inline("rho").is_err());
        assert!(parse_inline("rho=x").is_err());
    }
}
