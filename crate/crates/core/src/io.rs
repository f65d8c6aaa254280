//! Text formats: `ambimat v1` matrices, signal CSV and `key=value` records.
//!
//! Numbers are written with 17 significant digits so that parsing restores the exact bits.

use std::fmt::Write as _;

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::signal::TimeSeries;

#[derive(Debug, Clone, PartialEq)]
pub enum MatrixData {
    Real(Array2<f64>),
    Complex(Array2<Complex64>),
}

impl MatrixData {
    pub fn dim(&self) -> (usize, usize) {
        match self {
            MatrixData::Real(a) => a.dim(),
            MatrixData::Complex(a) => a.dim(),
        }
    }
}

/// A matrix plus the comment lines that follow its rows.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixFile {
    pub data: MatrixData,
    pub comments: Vec<String>,
}

fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_complex(v: Complex64) -> String {
    let sign = if v.im.is_sign_negative() { '-' } else { '+' };
    format!("{:.16e}{sign}{:.16e}j", v.re, v.im.abs())
}

pub fn write_matrix(m: &MatrixFile) -> String {
    let (rows, cols) = m.data.dim();
    let kind = match m.data {
        MatrixData::Real(_) => "real",
        MatrixData::Complex(_) => "complex",
    };
    let mut out = format!("# ambimat v1 {rows} {cols} {kind}\n");
    for r in 0..rows {
        let line: Vec<String> = match &m.data {
            MatrixData::Real(a) => a.row(r).iter().map(|&v| fmt_real(v)).collect(),
            MatrixData::Complex(a) => a.row(r).iter().map(|&v| fmt_complex(v)).collect(),
        };
        out.push_str(&line.join(","));
        out.push('\n');
    }
    for c in &m.comments {
        out.push_str("# ");
        out.push_str(c);
        out.push('\n');
    }
    out
}

pub fn real_matrix(a: Array2<f64>, comments: Vec<String>) -> String {
    write_matrix(&MatrixFile {
        data: MatrixData::Real(a),
        comments,
    })
}

pub fn complex_matrix(a: Array2<Complex64>, comments: Vec<String>) -> String {
    write_matrix(&MatrixFile {
        data: MatrixData::Complex(a),
        comments,
    })
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| Error::Parse {
        line,
        msg: format!("bad number '{s}'"),
    })
}

fn parse_complex(s: &str, line: usize) -> Result<Complex64> {
    let s = s.trim();
    let body = s.strip_suffix('j').ok_or_else(|| Error::Parse {
        line,
        msg: format!("complex entry '{s}' lacks trailing j"),
    })?;
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&i| matches!(bytes[i], b'+' | b'-') && !matches!(bytes[i - 1], b'e' | b'E'))
        .ok_or_else(|| Error::Parse {
            line,
            msg: format!("complex entry '{s}' has no imaginary part"),
        })?;
    let re = parse_f64(&body[..split], line)?;
    let im = parse_f64(&body[split + 1..], line)?;
    let im = if bytes[split] == b'-' { -im } else { im };
    Ok(Complex64::new(re, im))
}

pub fn parse_matrix(text: &str) -> Result<MatrixFile> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        msg: "empty file".into(),
    })?;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() != 6 || h[0] != "#" || h[1] != "ambimat" || h[2] != "v1" {
        return Err(Error::Parse {
            line: 1,
            msg: format!("bad header '{header}'"),
        });
    }
    let count = |s: &str| {
        s.parse::<usize>().map_err(|_| Error::Parse {
            line: 1,
            msg: format!("bad dimension '{s}'"),
        })
    };
    let (rows, cols) = (count(h[3])?, count(h[4])?);
    let complex = match h[5] {
        "complex" => true,
        "real" => false,
        other => {
            return Err(Error::Parse {
                line: 1,
                msg: format!("element type must be real or complex, got '{other}'"),
            })
        }
    };
    let mut re = Vec::with_capacity(if complex { 0 } else { rows * cols });
    let mut cx = Vec::with_capacity(if complex { rows * cols } else { 0 });
    let mut comments = Vec::new();
    let mut seen = 0;
    for (i, line) in lines {
        if let Some(c) = line.strip_prefix('#') {
            comments.push(c.strip_prefix(' ').unwrap_or(c).to_string());
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        if !comments.is_empty() {
            return Err(Error::Parse {
                line: i + 1,
                msg: "data after trailing comments".into(),
            });
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols {
            return Err(Error::Parse {
                line: i + 1,
                msg: format!("expected {cols} entries, found {}", fields.len()),
            });
        }
        for f in fields {
            if complex {
                cx.push(parse_complex(f, i + 1)?);
            } else {
                re.push(parse_f64(f, i + 1)?);
            }
        }
        seen += 1;
    }
    if seen != rows {
        return Err(Error::Parse {
            line: 1,
            msg: format!("header declares {rows} rows, found {seen}"),
        });
    }
    let shape_err = |_| Error::Parse {
        line: 1,
        msg: "shape mismatch".into(),
    };
    let data = if complex {
        MatrixData::Complex(Array2::from_shape_vec((rows, cols), cx).map_err(shape_err)?)
    } else {
        MatrixData::Real(Array2::from_shape_vec((rows, cols), re).map_err(shape_err)?)
    };
    Ok(MatrixFile { data, comments })
}

pub fn write_signal(x: &TimeSeries) -> String {
    let mut out = format!("# signal v1 n={} dt={}\n", x.n(), fmt_real(x.dt()));
    for v in x.samples() {
        let _ = writeln!(out, "{}", fmt_real(*v));
    }
    out
}

/// Reads a signal file; the header is optional, in which case `dt` falls back to `default_dt`.
pub fn parse_signal(text: &str, default_dt: f64) -> Result<TimeSeries> {
    let mut dt = default_dt;
    let mut declared_n = None;
    let mut samples = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let words: Vec<&str> = rest.split_whitespace().collect();
            if words.first() == Some(&"signal") {
                for (k, v) in parse_pairs(&words[1..].join(" ")) {
                    match k.as_str() {
                        "n" => {
                            declared_n = Some(v.parse::<usize>().map_err(|_| Error::Parse {
                                line: i + 1,
                                msg: format!("bad n '{v}'"),
                            })?)
                        }
                        "dt" => dt = parse_f64(&v, i + 1)?,
                        _ => {}
                    }
                }
            }
            continue;
        }
        // tolerate a trailing comma-separated column layout by taking the first field
        let field = line.split(',').next().unwrap_or(line);
        samples.push(parse_f64(field, i + 1)?);
    }
    if let Some(n) = declared_n {
        if n != samples.len() {
            return Err(Error::Input(format!(
                "header declares n={n} but file holds {} samples",
                samples.len()
            )));
        }
    }
    TimeSeries::new(samples, dt)
}

fn parse_pairs(text: &str) -> Vec<(String, String)> {
    text.split_whitespace()
        .filter_map(|w| w.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

/// `key=value` pairs from whitespace- or newline-separated text; `#` starts a comment.
pub fn parse_kv(text: &str) -> Vec<(String, String)> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(parse_pairs)
        .collect()
}

pub fn kv_line(pairs: &[(&str, String)]) -> String {
    pairs
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn fmt_num(v: f64) -> String {
    fmt_real(v)
}
