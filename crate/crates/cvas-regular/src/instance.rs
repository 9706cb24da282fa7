//! The line-oriented instance text format shared by the library and the CLI.
//!
//! ```text
//! # comments run to end of line
//! dimension 3
//! transition a 1 0 0
//! transition b -1 1 0
//! transition c 0 -1 1
//! source 0 0 0
//! target 0 1/4 1/4
//! ```
//!
//! `dimension` comes first, followed by any number of `transition` lines and
//! exactly one `source` and one `target` line. Labels match
//! `[A-Za-z0-9_]+`; rationals are written `n` or `p/q`. Printing produces the
//! canonical form above (lowest terms, single spaces, no comments), and
//! parsing a canonical file and printing it again is byte-identical.

use std::fmt;

use thiserror::Error;

use crate::cvas::{Configuration, Cvas, Transition};
use crate::rational::Rational;

/// A parsed instance: a system and the two endpoint configurations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub sys: Cvas,
    pub source: Configuration,
    pub target: Configuration,
}

/// A parse failure with a 1-based line and column.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {column}: {message}")]
pub struct InstanceError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

fn err(line: usize, column: usize, message: impl Into<String>) -> InstanceError {
    InstanceError {
        line,
        column,
        message: message.into(),
    }
}

/// Whitespace-separated tokens of a line with their 1-based columns.
fn tokens(line: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in line.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                out.push((s, &line[s..i]));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push((s, &line[s..]));
    }
    out.into_iter()
        .map(|(s, t)| (line[..s].chars().count() + 1, t))
        .collect()
}

fn valid_label(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl Instance {
    pub fn parse(text: &str) -> Result<Instance, InstanceError> {
        let mut dim: Option<usize> = None;
        let mut transitions: Vec<Transition> = Vec::new();
        let mut source: Option<Configuration> = None;
        let mut target: Option<Configuration> = None;
        let mut last_line = 0;
        for (ln, raw) in text.lines().enumerate() {
            let line_no = ln + 1;
            last_line = line_no;
            let content = raw.split('#').next().unwrap_or("");
            let toks = tokens(content);
            let Some(&(kcol, keyword)) = toks.first() else { continue };
            let args = &toks[1..];
            if keyword != "dimension" && dim.is_none() {
                return Err(err(line_no, kcol, "expected `dimension` first"));
            }
            let expect_len = |n: usize| -> Result<(), InstanceError> {
                if args.len() != n {
                    let col = args.get(n).map(|t| t.0).unwrap_or(raw.chars().count() + 1);
                    return Err(err(
                        line_no,
                        col,
                        format!("`{keyword}` expects {n} values, found {}", args.len()),
                    ));
                }
                Ok(())
            };
            match keyword {
                "dimension" => {
                    if dim.is_some() {
                        return Err(err(line_no, kcol, "duplicate `dimension`"));
                    }
                    expect_len(1)?;
                    let (c, t) = args[0];
                    dim = Some(
                        t.parse::<usize>()
                            .map_err(|_| err(line_no, c, format!("invalid dimension `{t}`")))?,
                    );
                }
                "transition" => {
                    let d = dim.unwrap();
                    if args.is_empty() {
                        return Err(err(line_no, kcol, "`transition` needs a label"));
                    }
                    let (lc, label) = args[0];
                    if !valid_label(label) {
                        return Err(err(line_no, lc, format!("invalid label `{label}`")));
                    }
                    if transitions.iter().any(|t| t.label == label) {
                        return Err(err(line_no, lc, format!("duplicate label `{label}`")));
                    }
                    let vals = &args[1..];
                    if vals.len() != d {
                        let col = vals.get(d).map(|t| t.0).unwrap_or(raw.chars().count() + 1);
                        return Err(err(
                            line_no,
                            col,
                            format!("transition `{label}` expects {d} integers, found {}", vals.len()),
                        ));
                    }
                    let effect = vals
                        .iter()
                        .map(|&(c, t)| {
                            t.parse::<i64>()
                                .map_err(|_| err(line_no, c, format!("invalid integer `{t}`")))
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    transitions.push(Transition {
                        label: label.to_string(),
                        effect,
                    });
                }
                "source" | "target" => {
                    let d = dim.unwrap();
                    let slot = if keyword == "source" { &mut source } else { &mut target };
                    if slot.is_some() {
                        return Err(err(line_no, kcol, format!("duplicate `{keyword}`")));
                    }
                    expect_len(d)?;
                    let mut values = Vec::with_capacity(d);
                    for &(c, t) in args {
                        let v: Rational = t
                            .parse()
                            .map_err(|e| err(line_no, c, format!("invalid rational: {e}")))?;
                        if v.is_negative() {
                            return Err(err(line_no, c, format!("negative counter value `{t}`")));
                        }
                        values.push(v);
                    }
                    *slot = Some(Configuration::new(values).expect("checked non-negative"));
                }
                other => {
                    return Err(err(line_no, kcol, format!("unknown keyword `{other}`")));
                }
            }
        }
        let end = last_line + 1;
        let dim = dim.ok_or_else(|| err(end, 1, "missing `dimension`"))?;
        let source = source.ok_or_else(|| err(end, 1, "missing `source`"))?;
        let target = target.ok_or_else(|| err(end, 1, "missing `target`"))?;
        let sys = Cvas::new(dim, transitions).map_err(|e| err(end, 1, e.to_string()))?;
        Ok(Instance {
            sys,
            source,
            target,
        })
    }
}

impl fmt::Display for Instance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "dimension {}", self.sys.dim())?;
        for t in self.sys.transitions() {
            write!(f, "transition {}", t.label)?;
            for v in &t.effect {
                write!(f, " {v}")?;
            }
            writeln!(f)?;
        }
        for (kw, c) in [("source", &self.source), ("target", &self.target)] {
            write!(f, "{kw}")?;
            for v in c.values() {
                write!(f, " {v}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}
