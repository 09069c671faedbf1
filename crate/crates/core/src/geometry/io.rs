//! Plain-text matrix format.
//!
//! ```text
//! p m
//! a_11 ... a_1m b_1
//! ...
//! a_p1 ... a_pm b_p
//! ```
//!
//! Numbers are written with Rust's shortest round-tripping `f64` formatting.
//! Blank lines and lines starting with `#` are ignored on input.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use super::Polytope;
use crate::error::{Error, Result};

impl Polytope {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} {}", self.n_rows(), self.dim());
        for j in 0..self.n_rows() {
            let mut fields: Vec<String> = self.a().row(j).iter().map(|v| format!("{v:?}")).collect();
            fields.push(format!("{:?}", self.b()[j]));
            let _ = writeln!(s, "{}", fields.join(" "));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

        let (hline, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "missing 'p m' header".into(),
        })?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse {
                line: hline,
                msg: format!("bad header: {e}"),
            })?;
        let [p, m] = dims[..] else {
            return Err(Error::Parse {
                line: hline,
                msg: "header must be 'p m'".into(),
            });
        };

        let mut a = DMatrix::zeros(p, m);
        let mut b = DVector::zeros(p);
        for j in 0..p {
            let (ln, line) = lines.next().ok_or(Error::Parse {
                line: hline + j + 1,
                msg: format!("expected {p} constraint rows, found {j}"),
            })?;
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse {
                    line: ln,
                    msg: format!("bad number: {e}"),
                })?;
            if vals.len() != m + 1 {
                return Err(Error::Parse {
                    line: ln,
                    msg: format!("expected {} numbers, found {}", m + 1, vals.len()),
                });
            }
            for k in 0..m {
                a[(j, k)] = vals[k];
            }
            b[j] = vals[m];
        }
        if let Some((ln, _)) = lines.next() {
            return Err(Error::Parse {
                line: ln,
                msg: "trailing data after constraint rows".into(),
            });
        }
        Polytope::new(a, b).map_err(|e| Error::Parse {
            line: hline,
            msg: e.to_string(),
        })
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}
