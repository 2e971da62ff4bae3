//! Shared helpers for the line-oriented text formats.

use crate::error::{Error, Result};
use crate::grid::{CellIndex, GridSpec};

/// Content of a line with any `#` comment removed, or `None` if nothing is left.
pub(crate) fn strip_comment(line: &str) -> Option<&str> {
    let body = match line.find('#') {
        Some(pos) => &line[..pos],
        None => line,
    };
    let body = body.trim();
    (!body.is_empty()).then_some(body)
}

/// Parsed `key=value` header fields following a magic tag and version.
pub(crate) struct Header<'a> {
    fields: Vec<(&'a str, &'a str)>,
    line: usize,
}

impl<'a> Header<'a> {
    pub fn parse(text: &'a str, line: usize, magic: &str) -> Result<Self> {
        let mut tokens = text.split_whitespace();
        let err = |msg: String| Error::Parse { line, msg };
        match tokens.next() {
            Some(tag) if tag == magic => {}
            other => return Err(err(format!("expected `{magic}` header, found {other:?}"))),
        }
        match tokens.next() {
            Some("v1") => {}
            other => return Err(err(format!("unsupported format version {other:?}"))),
        }
        let mut fields = Vec::new();
        for tok in tokens {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| err(format!("malformed header field `{tok}`")))?;
            fields.push((k, v));
        }
        Ok(Header { fields, line })
    }

    pub fn get<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self
            .fields
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| *v)
            .ok_or_else(|| Error::Parse {
                line: self.line,
                msg: format!("header is missing `{key}=`"),
            })?;
        raw.parse().map_err(|_| Error::Parse {
            line: self.line,
            msg: format!("bad value `{raw}` for `{key}`"),
        })
    }

    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::new(self.get("level")?, self.get("halfwidth")?, self.get("dim")?).map_err(
            |e| Error::Parse {
                line: self.line,
                msg: e.to_string(),
            },
        )
    }
}

pub(crate) fn parse_cell(tokens: &[&str], line: usize) -> Result<CellIndex> {
    tokens
        .iter()
        .map(|t| {
            t.parse::<i64>().map_err(|_| Error::Parse {
                line,
                msg: format!("bad cell coordinate `{t}`"),
            })
        })
        .collect::<Result<Vec<_>>>()
        .map(CellIndex)
}

pub(crate) fn parse_real(token: &str, line: usize) -> Result<f64> {
    token
        .parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| Error::Parse {
            line,
            msg: format!("bad real number `{token}`"),
        })
}

pub(crate) fn write_cell(out: &mut String, cell: &CellIndex) {
    use std::fmt::Write;
    for c in cell.coords() {
        let _ = write!(out, "{c} ");
    }
}

/// Sum with Neumaier compensation; the canonical mass sum used for normalization checks.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    // infinities poison the compensation term with NaN
    if sum.is_finite() {
        sum + comp
    } else {
        sum
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_and_blank_lines() {
        assert_eq!(strip_comment("  # only a comment"), None);
        assert_eq!(strip_comment(""), None);
        assert_eq!(strip_comment("1 2 0.5 # trailing"), Some("1 2 0.5"));
    }

    #[test]
    fn header_fields() {
        let h = Header::parse("mmot-measure v1 level=3 halfwidth=2 dim=1", 1, "mmot-measure")
            .unwrap();
        let g = h.grid().unwrap();
        assert_eq!((g.level, g.halfwidth, g.dim), (3, 2.0, 1));
        assert!(Header::parse("mmot-measure v2 level=3", 1, "mmot-measure").is_err());
        assert!(Header::parse("mmot-plan v1", 1, "mmot-measure").is_err());
        let h = Header::parse("mmot-measure v1 level=3", 1, "mmot-measure").unwrap();
        assert!(h.grid().is_err());
    }

    #[test]
    fn compensated_sum_beats_naive() {
        let v = [1.0, 1e-16, 1e-16, 1e-16, 1e-16];
        assert_eq!(compensated_sum(v), 1.0 + 4e-16);
    }
}
