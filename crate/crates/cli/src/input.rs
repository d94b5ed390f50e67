use std::path::Path;

use crate::CliError;

/// Columns picked by header name or 1-based position; `a:b` is an inclusive
/// range and items may be comma-separated.
pub fn resolve_columns(spec: &str, header: &[String]) -> Result<Vec<usize>, CliError> {
    let find = |s: &str| -> Result<usize, CliError> {
        let s = s.trim();
        if let Some(i) = header.iter().position(|h| h == s) {
            return Ok(i);
        }
        match s.parse::<usize>() {
            Ok(k) if (1..=header.len()).contains(&k) => Ok(k - 1),
            _ => Err(CliError::Usage(format!(
                "no column {s:?} in header {header:?}"
            ))),
        }
    };
    let mut cols = Vec::new();
    for item in spec.split(',').filter(|s| !s.trim().is_empty()) {
        match item.split_once(':') {
            Some((a, b)) => {
                let (a, b) = (find(a)?, find(b)?);
                if a > b {
                    return Err(CliError::Usage(format!("empty column range {item:?}")));
                }
                cols.extend(a..=b);
            }
            None => cols.push(find(item)?),
        }
    }
    if cols.is_empty() {
        return Err(CliError::Usage(format!("no columns selected by {spec:?}")));
    }
    Ok(cols)
}

pub struct Table {
    pub header: Vec<String>,
    /// Row-major selected values.
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub n: usize,
}

pub fn read_blocks(path: &Path, x_cols: &str, y_cols: &str) -> Result<Table, CliError> {
    let file =
        std::fs::File::open(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(file);
    let malformed = |e: csv::Error| {
        let at = e
            .position()
            .map(|p| format!(" at line {}", p.line()))
            .unwrap_or_default();
        match e.kind() {
            csv::ErrorKind::Io(_) => CliError::Io(format!("{}: {e}", path.display())),
            _ => CliError::Usage(format!("malformed CSV{at}: {e}")),
        }
    };
    let header: Vec<String> = rdr
        .headers()
        .map_err(malformed)?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(CliError::Usage(
            "malformed CSV at line 1: missing header".into(),
        ));
    }
    let (xc, yc) = (
        resolve_columns(x_cols, &header)?,
        resolve_columns(y_cols, &header)?,
    );
    let (mut x, mut y, mut n) = (Vec::new(), Vec::new(), 0);
    for record in rdr.records() {
        let record = record.map_err(malformed)?;
        let line = record.position().map_or(0, |p| p.line());
        let value = |c: usize| -> Result<f64, CliError> {
            let raw = record.get(c).unwrap_or("").trim();
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| {
                    CliError::Usage(format!(
                        "malformed CSV at line {line}: column {:?} is not a finite number: {raw:?}",
                        header[c]
                    ))
                })
        };
        for &c in &xc {
            x.push(value(c)?);
        }
        for &c in &yc {
            y.push(value(c)?);
        }
        n += 1;
    }
    Ok(Table { header, x, y, n })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn column_specs() {
        let h: Vec<String> = ["a", "b", "c", "d"].iter().map(|s| s.to_string()).collect();
        assert_eq!(resolve_columns("a:b", &h).unwrap(), vec![0, 1]);
        assert_eq!(resolve_columns("3:4", &h).unwrap(), vec![2, 3]);
        assert_eq!(resolve_columns("d,a", &h).unwrap(), vec![3, 0]);
        assert!(resolve_columns("e", &h).is_err());
        assert!(resolve_columns("c:a", &h).is_err());
        assert!(resolve_columns("5", &h).is_err());
    }
}
