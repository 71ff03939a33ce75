//! Plain-text matrix files for `nhmc stationary`.
//!
//! One row per line; entries separated by whitespace and/or commas; each
//! entry a decimal or a ratio `p/q`. Blank lines and `#` comments are ignored.

use nhmc::StochasticMatrix;

use crate::config::parse_real;

/// Parses and validates a matrix file.
pub fn parse_matrix(text: &str) -> Result<StochasticMatrix, String> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let content = line.split('#').next().unwrap_or("");
        let entries: Vec<&str> = content
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .collect();
        if entries.is_empty() {
            continue;
        }
        let row = entries
            .iter()
            .map(|e| parse_real(e).map_err(|m| format!("line {}: {m}", lineno + 1)))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    StochasticMatrix::from_rows(&rows).map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_ratios_and_comments() {
        let m = parse_matrix("# P1\n1/3 2/3\n\n2/3, 1/3  # second row\n").unwrap();
        assert_eq!(m.get(1, 0), 2.0 / 3.0);
        assert!(parse_matrix("0.6 0.5\n0.5 0.5\n").unwrap_err().contains("row 1"));
        assert!(parse_matrix("0.5 x\n0.5 0.5\n").unwrap_err().contains("line 1"));
        assert!(parse_matrix("1\n").is_err());
    }
}
