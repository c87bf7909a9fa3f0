//! Plain-text layout files.
//!
//! ```text
//! n R
//! x_1 y_1
//! ...
//! x_n y_n
//! ```
//!
//! Numbers are written in the shortest form that parses back to the same
//! `f64`, so reading a written file reproduces the layout bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::instance::{Layout, Point};

#[derive(Clone, Debug, PartialEq)]
pub struct LayoutFile {
    pub radius: f64,
    pub layout: Layout,
}

impl LayoutFile {
    pub fn new(layout: Layout, radius: f64) -> Self {
        LayoutFile { radius, layout }
    }

    pub fn n(&self) -> usize {
        self.layout.len()
    }

    pub fn render(&self) -> String {
        let mut out = String::with_capacity(48 * (self.n() + 1));
        writeln!(out, "{} {}", self.n(), self.radius).unwrap();
        for c in self.layout.centers() {
            writeln!(out, "{} {}", c.x, c.y).unwrap();
        }
        out
    }

    pub fn parse(text: &str) -> Result<LayoutFile> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let (line, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "missing header".into(),
        })?;
        let (n, radius) = pair(line, header)?;
        let n: usize = n.parse().map_err(|_| Error::Parse {
            line,
            message: format!("circle count {n:?} is not a non-negative integer"),
        })?;
        let radius = number(line, radius)?;
        if n == 0 {
            return Err(Error::Parse {
                line,
                message: "circle count must be at least 1".into(),
            });
        }

        let mut centers = Vec::with_capacity(n);
        for (line, text) in lines {
            if centers.len() == n {
                return Err(Error::Parse {
                    line,
                    message: format!("more than {n} coordinate rows"),
                });
            }
            let (x, y) = pair(line, text)?;
            centers.push(Point::new(number(line, x)?, number(line, y)?));
        }
        if centers.len() != n {
            return Err(Error::Parse {
                line: text.lines().count() + 1,
                message: format!("expected {n} coordinate rows, found {}", centers.len()),
            });
        }
        Ok(LayoutFile {
            radius,
            layout: Layout::new(centers).expect("coordinates checked finite"),
        })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<LayoutFile> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
        LayoutFile::parse(&text)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path.as_ref(), self.render())
            .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))
    }
}

fn pair(line: usize, text: &str) -> Result<(&str, &str)> {
    let mut fields = text.split_whitespace();
    match (fields.next(), fields.next(), fields.next()) {
        (Some(a), Some(b), None) => Ok((a, b)),
        _ => Err(Error::Parse {
            line,
            message: format!("expected two fields, got {text:?}"),
        }),
    }
}

fn number(line: usize, field: &str) -> Result<f64> {
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::Parse {
            line,
            message: format!("{field:?} is not a finite number"),
        }),
    }
}
