//! Shared layout for the binary containers written by this crate.
//!
//! Every container starts with an ASCII header: a `<MAGIC> <version>` line,
//! then `key value` lines, terminated by a line reading `end`. The binary
//! payload follows immediately and is always little-endian.

use std::io::Write;
use std::str::FromStr;

use num_complex::Complex;

use crate::error::{Error, Result};

pub(crate) struct Header {
    fields: Vec<(String, String)>,
}

pub(crate) fn write_header<W: Write>(
    w: &mut W,
    magic: &str,
    version: u32,
    fields: &[(&str, String)],
) -> Result<()> {
    writeln!(w, "{magic} {version}")?;
    for (k, v) in fields {
        debug_assert!(!v.contains('\n'));
        writeln!(w, "{k} {v}")?;
    }
    writeln!(w, "end")?;
    Ok(())
}

/// Splits a container into its header and payload, checking magic and version.
pub(crate) fn split_header<'a>(
    bytes: &'a [u8],
    magic: &str,
    version: u32,
) -> Result<(Header, &'a [u8])> {
    let mut pos = 0;
    let mut lines = Vec::new();
    loop {
        let rest = &bytes[pos..];
        let nl = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::format(format!("{magic}: header not terminated")))?;
        let line = std::str::from_utf8(&rest[..nl])
            .map_err(|_| Error::format(format!("{magic}: header is not valid UTF-8")))?;
        pos += nl + 1;
        if line == "end" {
            break;
        }
        lines.push(line.to_owned());
    }
    let first = lines
        .first()
        .ok_or_else(|| Error::format(format!("{magic}: empty header")))?;
    let expected = format!("{magic} {version}");
    if *first != expected {
        return Err(Error::format(format!(
            "bad magic line {first:?}, expected {expected:?}"
        )));
    }
    let fields = lines[1..]
        .iter()
        .map(|l| match l.split_once(' ') {
            Some((k, v)) => (k.to_owned(), v.to_owned()),
            None => (l.clone(), String::new()),
        })
        .collect();
    Ok((Header { fields }, &bytes[pos..]))
}

impl Header {
    pub fn get(&self, key: &str) -> Result<&str> {
        self.fields
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| Error::format(format!("header field `{key}` missing")))
    }

    pub fn parse<T: FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.get(key)?;
        raw.trim()
            .parse()
            .map_err(|_| Error::format(format!("header field `{key}` has bad value {raw:?}")))
    }

    pub fn list_f64(&self, key: &str, expected_len: usize) -> Result<Vec<f64>> {
        let raw = self.get(key)?;
        let values = raw
            .split_whitespace()
            .enumerate()
            .map(|(i, s)| {
                s.parse::<f64>().map_err(|_| {
                    Error::format(format!("header field `{key}` entry {i} is not a number: {s:?}"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if values.len() != expected_len {
            return Err(Error::format(format!(
                "header field `{key}` has {} entries, expected {expected_len}",
                values.len()
            )));
        }
        Ok(values)
    }
}

pub(crate) fn join_f64(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

pub(crate) fn write_complex64<W: Write>(w: &mut W, values: &[Complex<f64>]) -> Result<()> {
    let mut buf = Vec::with_capacity(values.len() * 8);
    for v in values {
        buf.extend_from_slice(&(v.re as f32).to_le_bytes());
        buf.extend_from_slice(&(v.im as f32).to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub(crate) fn read_complex64(payload: &[u8], count: usize, what: &str) -> Result<Vec<Complex<f64>>> {
    if payload.len() != count * 8 {
        return Err(Error::format(format!(
            "{what}: dimension mismatch, payload holds {} bytes ({} complex values), header implies {count}",
            payload.len(),
            payload.len() as f64 / 8.0
        )));
    }
    Ok(payload
        .chunks_exact(8)
        .map(|c| {
            let re = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
            let im = f32::from_le_bytes([c[4], c[5], c[6], c[7]]);
            Complex::new(re as f64, im as f64)
        })
        .collect())
}

pub(crate) fn write_real32<W: Write>(w: &mut W, values: &[f64]) -> Result<()> {
    let mut buf = Vec::with_capacity(values.len() * 4);
    for v in values {
        buf.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub(crate) fn read_real32(payload: &[u8], count: usize, what: &str) -> Result<Vec<f64>> {
    if payload.len() != count * 4 {
        return Err(Error::format(format!(
            "{what}: dimension mismatch, payload holds {} bytes, header implies {} values",
            payload.len(),
            count
        )));
    }
    Ok(payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect())
}
