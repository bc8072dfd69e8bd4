//! File formats.
//!
//! * Signal: text, one `index value` pair per line, `#` starts a comment.
//! * Observation: text, `index y_0 ... y_{M-1}` per line.
//! * Metadata: JSON [`Metadata`].
//! * Coefficients: CSV `kind,j,k,value` after a `# n=<grid size>` line;
//!   `kind` is `scaling` or `detail`. Scaling rows come first, then detail
//!   rows by level and position.
//! * Trend checks: CSV with columns [`TREND_COLUMNS`].
//!
//! Numbers are written with Rust's shortest round-trip formatting, so
//! reading a file back gives the exact values that were written.

use std::fs;
use std::path::Path;

use mcwd_core::bench::TrendCheck;
use mcwd_core::{ChannelSpec, SignalGrid, WaveletCoeffs};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{CliError, CliResult};

pub fn write_file(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn read_file(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn format_columns(columns: &[&[f64]], header: &str) -> String {
    let rows = columns.first().map_or(0, |c| c.len());
    let mut out = format!("# {header}\n");
    for i in 0..rows {
        out.push_str(&i.to_string());
        for c in columns {
            out.push(' ');
            out.push_str(&c[i].to_string());
        }
        out.push('\n');
    }
    out
}

/// Parses `index v_1 ... v_width` rows; indices must run 0, 1, 2, ...
pub fn parse_columns(text: &str, width: usize, path: &Path) -> CliResult<Vec<Vec<f64>>> {
    let mut columns = vec![Vec::new(); width];
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |msg: String| CliError::parse(path, format!("line {}: {msg}", lineno + 1));
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != width + 1 {
            return Err(bad(format!("expected {} columns, found {}", width + 1, fields.len())));
        }
        let index: usize = fields[0].parse().map_err(|_| bad(format!("bad index {:?}", fields[0])))?;
        if index != columns[0].len() {
            return Err(bad(format!("expected index {}, found {index}", columns[0].len())));
        }
        for (col, field) in columns.iter_mut().zip(&fields[1..]) {
            col.push(field.parse().map_err(|_| bad(format!("bad number {field:?}")))?);
        }
    }
    Ok(columns)
}

pub fn write_signal(path: &Path, signal: &SignalGrid) -> CliResult<()> {
    write_file(path, &format_columns(&[signal.values()], "index value"))
}

pub fn read_signal(path: &Path) -> CliResult<SignalGrid> {
    let text = read_file(path)?;
    let column = parse_columns(&text, 1, path)?.pop().expect("one column");
    SignalGrid::new(column).map_err(|e| CliError::parse(path, e))
}

pub fn write_observation(path: &Path, samples: &[SignalGrid]) -> CliResult<()> {
    let columns: Vec<&[f64]> = samples.iter().map(|s| s.values()).collect();
    let names: Vec<String> = (0..samples.len()).map(|l| format!("y{l}")).collect();
    write_file(path, &format_columns(&columns, &format!("index {}", names.join(" "))))
}

pub fn read_observation(path: &Path, channels: usize) -> CliResult<Vec<SignalGrid>> {
    let text = read_file(path)?;
    parse_columns(&text, channels, path)?
        .into_iter()
        .map(|c| SignalGrid::new(c).map_err(|e| CliError::parse(path, e)))
        .collect()
}

/// Sidecar describing a simulated observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metadata {
    pub n: usize,
    pub seed: u64,
    /// Calibration SNR in dB, absent when the channels' own `sigma` was used.
    /// Non-finite values are written as strings (`"inf"`).
    #[serde(with = "extended_float")]
    pub snr_db: Option<f64>,
    /// Test signal name or input file.
    pub signal: String,
    /// Channel specs with the noise level actually used.
    pub channels: Vec<ChannelSpec>,
}

impl Metadata {
    pub fn write(&self, path: &Path) -> CliResult<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| CliError::Runtime(e.to_string()))?;
        write_file(path, &(text + "\n"))
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        serde_json::from_str(&read_file(path)?).map_err(|e| CliError::parse(path, e))
    }
}

mod extended_float {
    use super::*;

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Number(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match *v {
            None => s.serialize_none(),
            Some(x) if x.is_finite() => s.serialize_some(&Repr::Number(x)),
            Some(x) => s.serialize_some(&Repr::Text(x.to_string())),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        use serde::de::Error;
        match Option::<Repr>::deserialize(d)? {
            None => Ok(None),
            Some(Repr::Number(x)) => Ok(Some(x)),
            Some(Repr::Text(t)) => t.parse().map(Some).map_err(|_| D::Error::custom(format!("bad number {t:?}"))),
        }
    }
}

pub const COEFF_COLUMNS: [&str; 4] = ["kind", "j", "k", "value"];

fn csv_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::parse(path, e)
}

pub fn format_coeffs(coeffs: &WaveletCoeffs, n: usize) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Runtime(e.to_string());
    w.write_record(COEFF_COLUMNS).map_err(err)?;
    let j0 = coeffs.j0().to_string();
    for (k, v) in coeffs.scaling().iter().enumerate() {
        w.write_record(["scaling", &j0, &k.to_string(), &v.to_string()]).map_err(err)?;
    }
    for (j, level) in coeffs.levels() {
        let j = j.to_string();
        for (k, v) in level.iter().enumerate() {
            w.write_record(["detail", &j, &k.to_string(), &v.to_string()]).map_err(err)?;
        }
    }
    let body = String::from_utf8(w.into_inner().map_err(|e| CliError::Runtime(e.to_string()))?)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(format!("# n={n}\n{body}"))
}

/// Reads a coefficient file; returns the coefficients and the grid size.
pub fn parse_coeffs(text: &str, path: &Path) -> CliResult<(WaveletCoeffs, usize)> {
    let first = text.lines().next().unwrap_or("");
    let n: usize = first
        .strip_prefix("# n=")
        .and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| CliError::parse(path, "first line must be `# n=<grid size>`"))?;
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.iter().ne(COEFF_COLUMNS) {
        return Err(CliError::parse(path, format!("expected header {COEFF_COLUMNS:?}, found {header:?}")));
    }
    let mut j0 = None;
    let mut scaling = Vec::new();
    let mut details: Vec<Vec<f64>> = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let bad = |msg: String| CliError::parse(path, format!("row {}: {msg}", row + 1));
        let j: u32 = rec[1].parse().map_err(|_| bad(format!("bad level {:?}", &rec[1])))?;
        let k: usize = rec[2].parse().map_err(|_| bad(format!("bad position {:?}", &rec[2])))?;
        let v: f64 = rec[3].parse().map_err(|_| bad(format!("bad value {:?}", &rec[3])))?;
        let start = *j0.get_or_insert(j);
        match &rec[0] {
            "scaling" if details.is_empty() && j == start && k == scaling.len() => scaling.push(v),
            "detail" if j >= start => {
                let idx = (j - start) as usize;
                if idx == details.len() && k == 0 {
                    details.push(Vec::new());
                }
                let last = idx + 1 == details.len();
                match details.get_mut(idx) {
                    Some(level) if last && k == level.len() => level.push(v),
                    _ => return Err(bad(format!("detail ({j}, {k}) out of order"))),
                }
            }
            other => return Err(bad(format!("unexpected {other} row ({j}, {k})"))),
        }
    }
    let j0 = j0.ok_or_else(|| CliError::parse(path, "no coefficients"))?;
    let coeffs = WaveletCoeffs::new(j0, scaling, details).map_err(|e| CliError::parse(path, e))?;
    Ok((coeffs, n))
}

pub const TREND_COLUMNS: [&str; 9] = ["name", "kind", "worse", "better", "mean_diff", "se", "z", "pairs", "passed"];

pub fn format_trends(checks: &[TrendCheck]) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Runtime(e.to_string());
    w.write_record(TREND_COLUMNS).map_err(err)?;
    for c in checks {
        let kind = match c.kind {
            mcwd_core::bench::TrendKind::Strict => "strict",
            mcwd_core::bench::TrendKind::NonInferior => "non_inferior",
        };
        w.write_record([
            c.name.clone(),
            kind.to_string(),
            c.worse.to_string(),
            c.better.to_string(),
            c.test.mean_diff.to_string(),
            c.test.se.to_string(),
            c.test.z.to_string(),
            c.test.pairs.to_string(),
            c.passed.to_string(),
        ])
        .map_err(err)?;
    }
    String::from_utf8(w.into_inner().map_err(|e| CliError::Runtime(e.to_string()))?).map_err(|e| CliError::Runtime(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use mcwd_core::kernels::KernelSpec;
    use mcwd_core::LrdSpec;

    #[test]
    fn columns_round_trip_exactly() {
        let a = [0.1, -1e-300, 3.0f64.sqrt(), f64::MAX];
        let b = [1.0 / 3.0, 0.0, -2.5e17, f64::MIN_POSITIVE];
        let text = format_columns(&[&a, &b], "index a b");
        let back = parse_columns(&text, 2, Path::new("x")).unwrap();
        assert_eq!(back, vec![a.to_vec(), b.to_vec()]);
    }

    #[test]
    fn columns_reject_bad_rows() {
        let p = Path::new("x");
        assert!(parse_columns("0 1.0\n2 2.0\n", 1, p).is_err());
        assert!(parse_columns("0 1.0 2.0\n", 1, p).is_err());
        assert!(parse_columns("0 abc\n", 1, p).is_err());
    }

    #[test]
    fn metadata_round_trips_infinite_snr() {
        for snr in [Some(f64::INFINITY), Some(12.5), None] {
            let m = Metadata {
                n: 64,
                seed: u64::MAX,
                snr_db: snr,
                signal: "lidar".into(),
                channels: vec![ChannelSpec::new(KernelSpec::Boxcar { c: 0.1 }, LrdSpec::white(0.123_456_789_012_345_67))],
            };
            let text = serde_json::to_string(&m).unwrap();
            assert_eq!(serde_json::from_str::<Metadata>(&text).unwrap(), m);
        }
    }

    #[test]
    fn coeffs_round_trip_exactly() {
        let c = WaveletCoeffs::new(1, vec![0.25, -1.0 / 7.0], vec![vec![1e-17, 2.0], vec![0.1, 0.2, 0.3, 1.0 / 3.0]]).unwrap();
        let text = format_coeffs(&c, 32).unwrap();
        let (back, n) = parse_coeffs(&text, Path::new("x")).unwrap();
        assert_eq!(n, 32);
        assert_eq!(back, c);
    }

    #[test]
    fn coeffs_reject_shuffled_rows() {
        let text = "# n=8\nkind,j,k,value\nscaling,0,0,1\ndetail,0,0,1\ndetail,1,1,2\ndetail,1,0,3\n";
        assert!(parse_coeffs(text, Path::new("x")).is_err());
        assert!(parse_coeffs("kind,j,k,value\n", Path::new("x")).is_err());
    }
}
