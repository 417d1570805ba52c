//! Plain-text containers for plant wiring and center filters.
//!
//! Path file grammar (whitespace separated, `#` starts a comment, blank
//! lines ignored, indices 1-based):
//!
//! ```text
//! ANCPATHS 1
//! K 4
//! FS 16000
//! PRIMARY_LEN 512
//! SECONDARY_LEN 512
//! ESTIMATE_LEN 256
//! P <k> <PRIMARY_LEN coefficients>           one row per node
//! S <k> <m> <SECONDARY_LEN coefficients>     one row per (sensor k, source m)
//! Shat <k> <ESTIMATE_LEN coefficients>       one row per node
//! ```
//!
//! `ESTIMATE_LEN 0` means the file carries no models and there are no
//! `Shat` rows. Center-filter files use the same conventions:
//!
//! ```text
//! ANCCENTER 1
//! K 4
//! N 512
//! W <k> <N coefficients>                     one row per node
//! ```
//!
//! Coefficients are written with Rust's shortest round-trip float
//! formatting, so save followed by load reproduces every bit.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{FirResponse, PathSet};
use crate::error::{AncError, Result};

const PATHS_MAGIC: &str = "ANCPATHS";
const CENTER_MAGIC: &str = "ANCCENTER";
const FORMAT_VERSION: u64 = 1;

fn write_coeff_row(out: &mut impl Write, label: &str, taps: &[f64]) -> Result<()> {
    write!(out, "{label}")?;
    for t in taps {
        write!(out, " {t}")?;
    }
    writeln!(out)?;
    Ok(())
}

/// Writes a path set and its sample rate in the documented text format.
pub fn save_paths(paths: &PathSet, sample_rate_hz: u32, file: &Path) -> Result<()> {
    paths.validate()?;
    let k = paths.nodes();
    let estimate_len = paths.estimates.first().map_or(0, FirResponse::len);
    let mut out = BufWriter::new(fs::File::create(file)?);
    writeln!(out, "{PATHS_MAGIC} {FORMAT_VERSION}")?;
    writeln!(out, "K {k}")?;
    writeln!(out, "FS {sample_rate_hz}")?;
    writeln!(out, "PRIMARY_LEN {}", paths.primary[0].len())?;
    writeln!(out, "SECONDARY_LEN {}", paths.secondary[0][0].len())?;
    writeln!(out, "ESTIMATE_LEN {estimate_len}")?;
    for (i, p) in paths.primary.iter().enumerate() {
        write_coeff_row(&mut out, &format!("P {}", i + 1), &p.taps)?;
    }
    for (i, row) in paths.secondary.iter().enumerate() {
        for (j, s) in row.iter().enumerate() {
            write_coeff_row(&mut out, &format!("S {} {}", i + 1, j + 1), &s.taps)?;
        }
    }
    for (i, e) in paths.estimates.iter().enumerate() {
        write_coeff_row(&mut out, &format!("Shat {}", i + 1), &e.taps)?;
    }
    out.flush()?;
    Ok(())
}

/// Tokenized line with its 1-based position for error reporting.
struct Line<'a> {
    number: usize,
    tokens: Vec<&'a str>,
}

fn tokenize(text: &str) -> Vec<Line<'_>> {
    text.lines()
        .enumerate()
        .filter_map(|(i, raw)| {
            let body = raw.split('#').next().unwrap_or("");
            let tokens: Vec<&str> = body.split_whitespace().collect();
            if tokens.is_empty() {
                None
            } else {
                Some(Line {
                    number: i + 1,
                    tokens,
                })
            }
        })
        .collect()
}

fn parse_err(path_kind: &str, line: usize, message: impl std::fmt::Display) -> AncError {
    let text = format!("line {line}: {message}");
    match path_kind {
        "center" => AncError::CenterFile(text),
        _ => AncError::PathFile(text),
    }
}

fn parse_usize(kind: &str, line: &Line, token: &str, what: &str) -> Result<usize> {
    token
        .parse::<usize>()
        .map_err(|_| parse_err(kind, line.number, format!("expected {what}, got {token:?}")))
}

fn parse_coeffs(kind: &str, line: &Line, tokens: &[&str], expected: usize, what: &str) -> Result<Vec<f64>> {
    if tokens.len() != expected {
        return Err(parse_err(
            kind,
            line.number,
            format!("{what} row has {} coefficients, expected {expected}", tokens.len()),
        ));
    }
    let mut taps = Vec::with_capacity(expected);
    for tok in tokens {
        let v: f64 = tok
            .parse()
            .map_err(|_| parse_err(kind, line.number, format!("bad coefficient {tok:?}")))?;
        if !v.is_finite() {
            return Err(parse_err(kind, line.number, format!("non-finite coefficient {tok:?}")));
        }
        taps.push(v);
    }
    Ok(taps)
}

/// Expects `LABEL <value>` on the given line.
fn header_value(kind: &str, lines: &[Line], index: usize, label: &str) -> Result<usize> {
    let line = lines.get(index).ok_or_else(|| {
        parse_err(kind, index + 1, format!("missing {label} header line"))
    })?;
    if line.tokens.len() != 2 || line.tokens[0] != label {
        return Err(parse_err(
            kind,
            line.number,
            format!("expected `{label} <value>`, got {:?}", line.tokens.join(" ")),
        ));
    }
    parse_usize(kind, line, line.tokens[1], &format!("{label} value"))
}

/// Reads a path file, returning the plant wiring and its sample rate.
pub fn load_paths(file: &Path) -> Result<(PathSet, u32)> {
    let kind = "paths";
    let text = fs::read_to_string(file)?;
    let lines = tokenize(&text);
    if lines.is_empty() {
        return Err(AncError::PathFile("file is empty".into()));
    }
    let magic = &lines[0];
    if magic.tokens != [PATHS_MAGIC, "1"] {
        return Err(parse_err(
            kind,
            magic.number,
            format!("expected `{PATHS_MAGIC} {FORMAT_VERSION}` header"),
        ));
    }
    let k = header_value(kind, &lines, 1, "K")?;
    let fs_hz = header_value(kind, &lines, 2, "FS")?;
    let primary_len = header_value(kind, &lines, 3, "PRIMARY_LEN")?;
    let secondary_len = header_value(kind, &lines, 4, "SECONDARY_LEN")?;
    let estimate_len = header_value(kind, &lines, 5, "ESTIMATE_LEN")?;
    if k == 0 {
        return Err(parse_err(kind, lines[1].number, "K must be at least 1"));
    }
    let fs_hz = u32::try_from(fs_hz)
        .ok()
        .filter(|&v| v > 0)
        .ok_or_else(|| parse_err(kind, lines[2].number, "FS must be a positive 32-bit value"))?;

    let mut primary: Vec<Option<Vec<f64>>> = vec![None; k];
    let mut secondary: Vec<Vec<Option<Vec<f64>>>> = vec![vec![None; k]; k];
    let mut estimates: Vec<Option<Vec<f64>>> = vec![None; k];

    for line in &lines[6..] {
        let label = line.tokens[0];
        match label {
            "P" | "Shat" => {
                if line.tokens.len() < 2 {
                    return Err(parse_err(kind, line.number, format!("{label} row needs a node index")));
                }
                let node = parse_usize(kind, line, line.tokens[1], "node index")?;
                if node == 0 || node > k {
                    return Err(parse_err(kind, line.number, format!("node index {node} out of 1..={k}")));
                }
                let (slot, len, what) = if label == "P" {
                    (&mut primary[node - 1], primary_len, "primary")
                } else {
                    (&mut estimates[node - 1], estimate_len, "estimate")
                };
                if len == 0 {
                    return Err(parse_err(kind, line.number, "estimate rows present but ESTIMATE_LEN is 0"));
                }
                if slot.is_some() {
                    return Err(parse_err(kind, line.number, format!("duplicate {label} row for node {node}")));
                }
                *slot = Some(parse_coeffs(kind, line, &line.tokens[2..], len, what)?);
            }
            "S" => {
                if line.tokens.len() < 3 {
                    return Err(parse_err(kind, line.number, "S row needs sensor and source indices"));
                }
                let sensor = parse_usize(kind, line, line.tokens[1], "sensor index")?;
                let source = parse_usize(kind, line, line.tokens[2], "source index")?;
                if sensor == 0 || sensor > k || source == 0 || source > k {
                    return Err(parse_err(
                        kind,
                        line.number,
                        format!("indices ({sensor},{source}) out of 1..={k}"),
                    ));
                }
                let slot = &mut secondary[sensor - 1][source - 1];
                if slot.is_some() {
                    return Err(parse_err(
                        kind,
                        line.number,
                        format!("duplicate S row for sensor {sensor}, source {source}"),
                    ));
                }
                *slot = Some(parse_coeffs(kind, line, &line.tokens[3..], secondary_len, "secondary")?);
            }
            other => {
                return Err(parse_err(kind, line.number, format!("unknown row label {other:?}")));
            }
        }
    }

    let collect = |rows: Vec<Option<Vec<f64>>>, what: &str| -> Result<Vec<FirResponse>> {
        rows.into_iter()
            .enumerate()
            .map(|(i, row)| {
                row.map(|taps| FirResponse { taps }).ok_or_else(|| {
                    AncError::PathFile(format!("missing {what} row for node {}", i + 1))
                })
            })
            .collect()
    };

    let paths = PathSet {
        primary: collect(primary, "P")?,
        secondary: {
            let mut rows = Vec::with_capacity(k);
            for (i, row) in secondary.into_iter().enumerate() {
                let mut out = Vec::with_capacity(k);
                for (j, slot) in row.into_iter().enumerate() {
                    out.push(slot.map(|taps| FirResponse { taps }).ok_or_else(|| {
                        AncError::PathFile(format!("missing S row for sensor {}, source {}", i + 1, j + 1))
                    })?);
                }
                rows.push(out);
            }
            rows
        },
        estimates: if estimate_len == 0 {
            Vec::new()
        } else {
            collect(estimates, "Shat")?
        },
    };
    paths.validate()?;
    Ok((paths, fs_hz))
}

/// Writes per-node center filters as `W <k>` rows.
pub fn save_center_filters(centers: &[Vec<f64>], file: &Path) -> Result<()> {
    if centers.is_empty() {
        return Err(AncError::CenterFile("no filters to save".into()));
    }
    let n = centers[0].len();
    if n == 0 || centers.iter().any(|c| c.len() != n) {
        return Err(AncError::CenterFile(
            "filters must be non-empty with uniform length".into(),
        ));
    }
    if centers.iter().flatten().any(|w| !w.is_finite()) {
        return Err(AncError::CenterFile("filters must have finite weights".into()));
    }
    let mut out = BufWriter::new(fs::File::create(file)?);
    writeln!(out, "{CENTER_MAGIC} {FORMAT_VERSION}")?;
    writeln!(out, "K {}", centers.len())?;
    writeln!(out, "N {n}")?;
    for (i, c) in centers.iter().enumerate() {
        write_coeff_row(&mut out, &format!("W {}", i + 1), c)?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a center-filter file: one weight vector per node.
pub fn load_center_filters(file: &Path) -> Result<Vec<Vec<f64>>> {
    let kind = "center";
    let text = fs::read_to_string(file)?;
    let lines = tokenize(&text);
    if lines.is_empty() {
        return Err(AncError::CenterFile("file is empty".into()));
    }
    if lines[0].tokens != [CENTER_MAGIC, "1"] {
        return Err(parse_err(
            kind,
            lines[0].number,
            format!("expected `{CENTER_MAGIC} {FORMAT_VERSION}` header"),
        ));
    }
    let k = header_value(kind, &lines, 1, "K")?;
    let n = header_value(kind, &lines, 2, "N")?;
    if k == 0 || n == 0 {
        return Err(parse_err(kind, lines[1].number, "K and N must be at least 1"));
    }

    let mut centers: Vec<Option<Vec<f64>>> = vec![None; k];
    for line in &lines[3..] {
        if line.tokens[0] != "W" || line.tokens.len() < 2 {
            return Err(parse_err(kind, line.number, "expected `W <k> <coefficients>`"));
        }
        let node = parse_usize(kind, line, line.tokens[1], "node index")?;
        if node == 0 || node > k {
            return Err(parse_err(kind, line.number, format!("node index {node} out of 1..={k}")));
        }
        if centers[node - 1].is_some() {
            return Err(parse_err(kind, line.number, format!("duplicate W row for node {node}")));
        }
        centers[node - 1] = Some(parse_coeffs(kind, line, &line.tokens[2..], n, "center")?);
    }
    centers
        .into_iter()
        .enumerate()
        .map(|(i, slot)| {
            slot.ok_or_else(|| AncError::CenterFile(format!("missing W row for node {}", i + 1)))
        })
        .collect()
}
