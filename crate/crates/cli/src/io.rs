//! File formats. Floats are written with Rust's shortest round-trip
//! formatting, so reading a file back recovers every value exactly.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use hbest_core::TimeSeries;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// Write via a temporary sibling and rename, so readers never see a partial file.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{name}.tmp{}", std::process::id()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> CliResult<()> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| CliError::input(e.to_string()))?;
    text.push('\n');
    atomic_write(path, text.as_bytes())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

/// CSV text from a header and rows of already-formatted fields.
pub fn csv_bytes<I, R>(header: &[&str], rows: I) -> CliResult<Vec<u8>>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| CliError::input(e.to_string());
    w.write_record(header).map_err(fail)?;
    for row in rows {
        w.write_record(row).map_err(fail)?;
    }
    w.into_inner().map_err(|e| CliError::input(e.to_string()))
}

pub fn fmt(x: f64) -> String {
    format!("{x}")
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Clone, Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Digests of every regular file under `root` (recursively), with paths
/// relative to `root`, sorted. Entries whose name is in `skip` are left out.
pub fn digest_tree(root: &Path, skip: &[&str]) -> CliResult<Vec<FileDigest>> {
    let mut files = Vec::new();
    collect_files(root, &mut files)?;
    files.sort();
    let mut out = Vec::new();
    for f in files {
        let name = f.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        if skip.contains(&name) || name.starts_with('.') {
            continue;
        }
        let rel = f
            .strip_prefix(root)
            .unwrap_or(&f)
            .to_string_lossy()
            .replace('\\', "/");
        out.push(FileDigest {
            path: rel,
            sha256: sha256_file(&f)?,
            bytes: fs::metadata(&f)?.len(),
        });
    }
    Ok(out)
}

pub fn digest_files(paths: &[PathBuf]) -> CliResult<Vec<FileDigest>> {
    paths
        .iter()
        .map(|p| {
            Ok(FileDigest {
                path: p.to_string_lossy().into_owned(),
                sha256: sha256_file(p)?,
                bytes: fs::metadata(p)?.len(),
            })
        })
        .collect()
}

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) -> CliResult<()> {
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect_files(&path, out)?;
        } else {
            out.push(path);
        }
    }
    Ok(())
}

/// Series CSV: header `t,value`, one row per observation, t from 0.
pub fn series_csv(series: &TimeSeries) -> CliResult<Vec<u8>> {
    csv_bytes(
        &["t", "value"],
        series
            .values()
            .iter()
            .enumerate()
            .map(|(t, v)| [t.to_string(), fmt(*v)]),
    )
}

pub fn write_series(dir: &Path, series: &TimeSeries) -> CliResult<PathBuf> {
    let path = dir.join(format!("{}.csv", series.label));
    atomic_write(&path, &series_csv(series)?)?;
    Ok(path)
}

pub fn read_series(path: &Path) -> CliResult<TimeSeries> {
    let label = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| CliError::input(format!("bad series file name {}", path.display())))?
        .to_string();
    let bad = |msg: String| CliError::input(format!("{}: {msg}", path.display()));
    let mut rdr = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let headers = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["t", "value"] {
        return Err(bad(format!(
            "expected header `t,value`, found `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut values = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let v: f64 = rec[1]
            .trim()
            .parse()
            .map_err(|_| bad(format!("line {}: cannot parse value `{}`", i + 2, &rec[1])))?;
        values.push(v);
    }
    TimeSeries::new(label, values).map_err(|e| bad(e.to_string()))
}

/// CSV files of a data directory (or of its `series/` subdirectory), in
/// file-name order.
pub fn series_files(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let dir = if dir.join("series").is_dir() {
        dir.join("series")
    } else {
        dir.to_path_buf()
    };
    let mut files: Vec<PathBuf> = fs::read_dir(&dir)
        .map_err(|e| CliError::input(format!("cannot read data directory {}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    Ok(files)
}

/// Tabulated true log-spectra: `series,frequency,log_spectrum`, grouped by
/// series in the order given.
pub fn truth_csv(
    labels: &[String],
    frequencies: &[f64],
    values: &[Vec<f64>],
) -> CliResult<Vec<u8>> {
    csv_bytes(
        &["series", "frequency", "log_spectrum"],
        labels.iter().zip(values).flat_map(|(l, v)| {
            frequencies
                .iter()
                .zip(v)
                .map(move |(w, g)| [l.clone(), fmt(*w), fmt(*g)])
        }),
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct TruthTable {
    pub frequencies: Vec<f64>,
    pub series: BTreeMap<String, Vec<f64>>,
}

pub fn read_truth(path: &Path) -> CliResult<TruthTable> {
    let bad = |msg: String| CliError::input(format!("{}: {msg}", path.display()));
    let mut rdr = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let mut frequencies: Vec<f64> = Vec::new();
    let mut series: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut freq_of: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        if rec.len() != 3 {
            return Err(bad(format!("line {}: expected 3 fields", i + 2)));
        }
        let num = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| bad(format!("line {}: bad number `{s}`", i + 2)))
        };
        let (w, g) = (num(&rec[1])?, num(&rec[2])?);
        series.entry(rec[0].to_string()).or_default().push(g);
        freq_of.entry(rec[0].to_string()).or_default().push(w);
    }
    for f in freq_of.values() {
        if frequencies.is_empty() {
            frequencies = f.clone();
        } else if *f != frequencies {
            return Err(bad(
                "series are tabulated on different frequency grids".into()
            ));
        }
    }
    if series.is_empty() {
        return Err(bad("empty truth table".into()));
    }
    Ok(TruthTable {
        frequencies,
        series,
    })
}

/// Group assignment: CSV `series,group`. Each series may appear once.
pub fn read_groups(path: &Path) -> CliResult<BTreeMap<String, String>> {
    let bad = |msg: String| CliError::input(format!("{}: {msg}", path.display()));
    let mut rdr = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let headers = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["series", "group"] {
        return Err(bad("expected header `series,group`".into()));
    }
    let mut map = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        if map.insert(rec[0].to_string(), rec[1].to_string()).is_some() {
            return Err(bad(format!(
                "series `{}` is assigned to more than one group",
                &rec[0]
            )));
        }
    }
    Ok(map)
}
