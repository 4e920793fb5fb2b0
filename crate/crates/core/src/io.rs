//! On-disk formats: complex literals, snapshot CSV, the binary Gram
//! container, result CSVs, and atomic writes.

use std::fmt::Write as _;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use faer::{c64, Mat};

use crate::dynamics::SnapshotSet;
use crate::gram::{GramTriple, Provenance};
use crate::{Error, Result};

pub const GRAM_MAGIC: &[u8; 16] = b"SPECRKHS-GRAM\0\0\0";

/// Shortest round-trip decimal for `v`.
pub fn format_real(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-5..1e16).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// `re`, or `re+imi` / `re-imi` when the imaginary part is non-zero.
pub fn format_complex(z: c64) -> String {
    if z.im == 0.0 {
        return format_real(z.re);
    }
    let sign = if z.im.is_sign_negative() { '-' } else { '+' };
    format!("{}{sign}{}i", format_real(z.re), format_real(z.im.abs()))
}

/// 17 significant digits.
pub fn format_sci(v: f64) -> String {
    format!("{v:.16e}")
}

/// Parses `a`, `a+bi`, `a-bi`, `bi`, `i`, `-i`.
pub fn parse_complex(s: &str) -> Result<c64> {
    let t = s.trim();
    let err = || Error::Parse(format!("invalid complex literal '{s}'"));
    if t.is_empty() {
        return Err(err());
    }
    let Some(body) = t.strip_suffix(['i', 'j']) else {
        return t.parse::<f64>().map(|re| c64::new(re, 0.0)).map_err(|_| err());
    };
    let bytes = body.as_bytes();
    // split at the last sign that is not leading and not an exponent sign
    let split = (1..bytes.len())
        .rev()
        .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let imag = |txt: &str| -> Result<f64> {
        match txt {
            "" | "+" => Ok(1.0),
            "-" => Ok(-1.0),
            _ => txt.parse::<f64>().map_err(|_| err()),
        }
    };
    match split {
        Some(k) => {
            let re = body[..k].parse::<f64>().map_err(|_| err())?;
            Ok(c64::new(re, imag(&body[k..])?))
        }
        None => Ok(c64::new(0.0, imag(body)?)),
    }
}

/// Writes via a temporary file in the same directory and renames it.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp.{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Header `d=<dim>,s=<samples>`, then `x_1..x_d` followed by `S` blocks of
/// `y_1..y_d` per row.
pub fn snapshots_to_csv(set: &SnapshotSet) -> String {
    let mut out = format!("d={},s={}\n", set.dim(), set.samples());
    for i in 0..set.len() {
        let mut fields: Vec<String> = set.x(i).iter().map(|z| format_complex(*z)).collect();
        for s in 0..set.samples() {
            fields.extend(set.y(i, s).iter().map(|z| format_complex(*z)));
        }
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn snapshots_from_csv(text: &str) -> Result<SnapshotSet> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
    let header = lines.next().ok_or_else(|| Error::Parse("empty snapshot file".into()))?;
    let mut dim = None;
    let mut samples = None;
    for part in header.split(',') {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("bad snapshot header '{header}'")))?;
        let v: usize = v.trim().parse().map_err(|_| Error::Parse(format!("bad header value '{v}'")))?;
        match k.trim().to_ascii_lowercase().as_str() {
            "d" => dim = Some(v),
            "s" => samples = Some(v),
            other => return Err(Error::Parse(format!("unknown header key '{other}'"))),
        }
    }
    let dim = dim.ok_or_else(|| Error::Parse("header missing d".into()))?;
    let samples = samples.unwrap_or(1);
    let width = dim * (1 + samples);
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (row, line) in lines.enumerate() {
        let vals: Vec<c64> = line.split(',').map(parse_complex).collect::<Result<_>>()?;
        if vals.len() != width {
            return Err(Error::Parse(format!("row {} has {} fields, expected {width}", row + 1, vals.len())));
        }
        x.extend_from_slice(&vals[..dim]);
        y.extend_from_slice(&vals[dim..]);
    }
    SnapshotSet::new(dim, samples, x, y)
}

pub fn gram_to_bytes(gram: &GramTriple) -> Result<Vec<u8>> {
    let n = gram.n();
    let complex = !gram.is_real();
    let mut out = Vec::with_capacity(25 + 3 * n * n * if complex { 16 } else { 8 });
    out.extend_from_slice(GRAM_MAGIC);
    out.extend_from_slice(&(n as u64).to_le_bytes());
    out.push(complex as u8);
    for m in [&gram.g, &gram.a, &gram.r] {
        for j in 0..n {
            for i in 0..n {
                let z = m[(i, j)];
                out.extend_from_slice(&z.re.to_le_bytes());
                if complex {
                    out.extend_from_slice(&z.im.to_le_bytes());
                }
            }
        }
    }
    out.extend_from_slice(serde_json::to_string(&gram.provenance)?.as_bytes());
    Ok(out)
}

pub fn gram_from_bytes(bytes: &[u8]) -> Result<GramTriple> {
    let bad = |m: &str| Error::Parse(format!("gram container: {m}"));
    if bytes.len() < 25 || &bytes[..16] != GRAM_MAGIC {
        return Err(bad("missing magic header"));
    }
    let n = u64::from_le_bytes(bytes[16..24].try_into().expect("8 bytes")) as usize;
    let complex = match bytes[24] {
        0 => false,
        1 => true,
        f => return Err(bad(&format!("unknown flag byte {f}"))),
    };
    let width = if complex { 16 } else { 8 };
    let body = n
        .checked_mul(n)
        .and_then(|v| v.checked_mul(3 * width))
        .ok_or_else(|| bad("size overflow"))?;
    if bytes.len() < 25 + body {
        return Err(bad("truncated matrix data"));
    }
    let f = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
    let read = |which: usize| {
        Mat::from_fn(n, n, |i, j| {
            let o = 25 + (which * n * n + j * n + i) * width;
            c64::new(f(o), if complex { f(o + 8) } else { 0.0 })
        })
    };
    let (g, a, r) = (read(0), read(1), read(2));
    let provenance: Provenance = serde_json::from_slice(&bytes[25 + body..])?;
    GramTriple::new(g, a, r, provenance)
}

pub fn write_gram(path: &Path, gram: &GramTriple) -> Result<()> {
    write_atomic(path, &gram_to_bytes(gram)?)
}

pub fn read_gram(path: &Path) -> Result<GramTriple> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    gram_from_bytes(&bytes)
}

/// Simple CSV table with a header and 17-significant-digit floats.
pub fn csv_table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{}", r.join(","));
    }
    out
}
