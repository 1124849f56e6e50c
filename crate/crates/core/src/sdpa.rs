//! Writer and reader for the SDPA sparse format (`.dat-s`).
//!
//! Layout: number of constraints, number of blocks, block sizes,
//! right-hand sides, then one entry per line as
//! `matno blkno i j value` with 1-based upper-triangle indices and the
//! objective as matrix 0. Output is byte-deterministic for identical
//! input.

use crate::error::{Error, Result};

/// One sparse entry; `matrix` 0 is the objective, `1..=m` the
/// constraints. Indices are 1-based with `row <= col`.
#[derive(Debug, Clone, PartialEq)]
pub struct SdpaEntry {
    pub matrix: usize,
    pub block: usize,
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

/// In-memory form of a `.dat-s` file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SdpaFile {
    pub block_sizes: Vec<usize>,
    pub rhs: Vec<f64>,
    pub entries: Vec<SdpaEntry>,
}

impl SdpaFile {
    pub fn num_constraints(&self) -> usize {
        self.rhs.len()
    }

    /// Renders the file. Entries are emitted in the stored order; callers
    /// sort them beforehand when determinism across sources matters.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{}\n", self.rhs.len()));
        out.push_str(&format!("{}\n", self.block_sizes.len()));
        let sizes: Vec<String> = self.block_sizes.iter().map(|s| s.to_string()).collect();
        out.push_str(&sizes.join(" "));
        out.push('\n');
        let rhs: Vec<String> = self.rhs.iter().map(|v| format_g17(*v)).collect();
        out.push_str(&rhs.join(" "));
        out.push('\n');
        for e in &self.entries {
            out.push_str(&format!(
                "{} {} {} {} {}\n",
                e.matrix,
                e.block,
                e.row,
                e.col,
                format_g17(e.value)
            ));
        }
        out
    }

    /// Parses a `.dat-s` file produced by [`SdpaFile::render`] (or any
    /// plain file without comment lines).
    pub fn parse(text: &str) -> Result<SdpaFile> {
        let mut lines = text.lines();
        let mut next_line = || {
            lines
                .next()
                .ok_or_else(|| Error::MalformedInput("sdpa file truncated".into()))
        };
        let num_constraints: usize = parse_token(next_line()?.trim(), "constraint count")?;
        let num_blocks: usize = parse_token(next_line()?.trim(), "block count")?;
        let sizes_line = next_line()?;
        let block_sizes: Vec<usize> = sizes_line
            .split_whitespace()
            .map(|t| parse_token(t, "block size"))
            .collect::<Result<_>>()?;
        if block_sizes.len() != num_blocks {
            return Err(Error::MalformedInput(format!(
                "expected {num_blocks} block sizes, found {}",
                block_sizes.len()
            )));
        }
        let rhs_line = next_line()?;
        let rhs: Vec<f64> = rhs_line
            .split_whitespace()
            .map(|t| parse_token(t, "right-hand side"))
            .collect::<Result<_>>()?;
        if rhs.len() != num_constraints {
            return Err(Error::MalformedInput(format!(
                "expected {num_constraints} right-hand sides, found {}",
                rhs.len()
            )));
        }
        let mut entries = Vec::new();
        for line in lines {
            let tokens: Vec<&str> = line.split_whitespace().collect();
            if tokens.is_empty() {
                continue;
            }
            if tokens.len() != 5 {
                return Err(Error::MalformedInput(format!(
                    "entry line needs 5 fields, got {}: {line:?}",
                    tokens.len()
                )));
            }
            let matrix: usize = parse_token(tokens[0], "matrix number")?;
            let block: usize = parse_token(tokens[1], "block number")?;
            let row: usize = parse_token(tokens[2], "row index")?;
            let col: usize = parse_token(tokens[3], "column index")?;
            let value: f64 = parse_token(tokens[4], "entry value")?;
            if matrix > num_constraints {
                return Err(Error::MalformedInput(format!(
                    "matrix number {matrix} exceeds constraint count {num_constraints}"
                )));
            }
            if block == 0 || block > num_blocks {
                return Err(Error::MalformedInput(format!(
                    "block number {block} out of range"
                )));
            }
            let size = block_sizes[block - 1];
            if row == 0 || col == 0 || row > size || col > size || row > col {
                return Err(Error::MalformedInput(format!(
                    "indices ({row}, {col}) invalid for upper triangle of block size {size}"
                )));
            }
            entries.push(SdpaEntry {
                matrix,
                block,
                row,
                col,
                value,
            });
        }
        Ok(SdpaFile {
            block_sizes,
            rhs,
            entries,
        })
    }
}

fn parse_token<T: std::str::FromStr>(token: &str, what: &str) -> Result<T> {
    token
        .parse()
        .map_err(|_| Error::MalformedInput(format!("cannot parse {what} from {token:?}")))
}

/// C-style `%.17g` formatting: 17 significant digits, fixed notation for
/// exponents in `[-4, 17)`, scientific otherwise, trailing zeros trimmed.
pub fn format_g17(value: f64) -> String {
    if value == 0.0 {
        return "0".to_string();
    }
    if !value.is_finite() {
        return if value.is_nan() {
            "nan".to_string()
        } else if value > 0.0 {
            "inf".to_string()
        } else {
            "-inf".to_string()
        };
    }
    let scientific = format!("{:.16e}", value);
    let (mantissa, exponent) = scientific
        .split_once('e')
        .expect("{:e} always contains an exponent");
    let exp: i32 = exponent.parse().expect("exponent is an integer");
    if !(-4..17).contains(&exp) {
        let mantissa = trim_trailing_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (16 - exp).max(0) as usize;
        trim_trailing_zeros(&format!("{:.*}", decimals, value))
    }
}

fn trim_trailing_zeros(s: &str) -> String {
    if !s.contains('.') {
        return s.to_string();
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g17_fixed_and_scientific() {
        assert_eq!(format_g17(0.0), "0");
        assert_eq!(format_g17(1.0), "1");
        assert_eq!(format_g17(-2.5), "-2.5");
        assert_eq!(format_g17(0.125), "0.125");
        assert_eq!(format_g17(1e-5), "1.0000000000000001e-05");
        assert_eq!(format_g17(1e18), "1e+18");
        assert_eq!(format_g17(0.0001), "0.0001");
        // Round trip through parse.
        for v in [
            1.0 / 3.0,
            -7.25e-9,
            123456.789,
            2.0_f64.powi(-40),
            5.0_f64.sqrt(),
        ] {
            let s = format_g17(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
    }

    #[test]
    fn render_parse_round_trip() {
        let file = SdpaFile {
            block_sizes: vec![1, 2],
            rhs: vec![1.0, 0.0],
            entries: vec![
                SdpaEntry {
                    matrix: 0,
                    block: 1,
                    row: 1,
                    col: 1,
                    value: 5.0,
                },
                SdpaEntry {
                    matrix: 1,
                    block: 2,
                    row: 1,
                    col: 2,
                    value: -0.5,
                },
                SdpaEntry {
                    matrix: 2,
                    block: 2,
                    row: 2,
                    col: 2,
                    value: 1.0 / 3.0,
                },
            ],
        };
        let text = file.render();
        let parsed = SdpaFile::parse(&text).unwrap();
        assert_eq!(parsed, file);
        assert_eq!(parsed.render(), text);
    }

    #[test]
    fn empty_constraint_list_renders_empty_rhs_line() {
        let file = SdpaFile {
            block_sizes: vec![3],
            rhs: vec![],
            entries: vec![SdpaEntry {
                matrix: 0,
                block: 1,
                row: 1,
                col: 3,
                value: 1.0,
            }],
        };
        let text = file.render();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "0");
        assert_eq!(lines[1], "1");
        assert_eq!(lines[2], "3");
        assert_eq!(lines[3], "");
        assert_eq!(SdpaFile::parse(&text).unwrap(), file);
    }

    #[test]
    fn parse_rejects_malformed_files() {
        assert!(SdpaFile::parse("1\n").is_err());
        assert!(SdpaFile::parse("0\n1\n2 2\n\n").is_err());
        assert!(SdpaFile::parse("0\n1\n2\n\n0 1 2 1 1.0\n").is_err());
        assert!(SdpaFile::parse("0\n1\n2\n\n0 1 1 5 1.0\n").is_err());
        assert!(SdpaFile::parse("0\n1\n2\n\n3 1 1 1 1.0\n").is_err());
    }
}
