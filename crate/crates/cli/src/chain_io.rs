//! On-disk chain storage.
//!
//! A chain directory holds `meta.json` plus either four columnar CSV files
//!
//! | file            | columns                                  |
//! |-----------------|------------------------------------------|
//! | `tau.csv`       | `sample,block,tau`                       |
//! | `beta_glob.csv` | `sample,block,b0,...,bB`                 |
//! | `zeta.csv`      | `sample,series,zeta`                     |
//! | `beta_loc.csv`  | `sample,series,b0,...,bB`                |
//!
//! or a single `chain.bin`: the magic bytes `HBCHAIN1` followed by
//! little-endian f64 values, block by block and sample by sample, each state
//! laid out as τ, β_glob, ζ (one per replicate), β_loc (replicate-major).
//! The local files are only written for hierarchical fits. Timing is kept
//! out of this directory so that repeated runs produce identical bytes.

use std::path::Path;

use hbest_core::sampler::SamplerConfig;
use hbest_core::{Chain, ChainBlock, ParameterState, SplineVector};
use serde::{Deserialize, Serialize};

use crate::config::ChainFormat;
use crate::error::{CliError, CliResult};
use crate::io::{atomic_write, csv_bytes, fmt, read_json, write_json};

const MAGIC: &[u8; 8] = b"HBCHAIN1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockMeta {
    pub replicates: Vec<usize>,
    pub global_accepts: usize,
    pub local_accepts: Vec<usize>,
    pub proposals: usize,
    pub map_nonconverged: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainMeta {
    pub format: ChainFormat,
    pub config: SamplerConfig,
    pub labels: Vec<String>,
    pub basis_count: usize,
    pub samples: usize,
    pub blocks: Vec<BlockMeta>,
}

fn coeff_header(first: &str, second: &str, b: usize) -> Vec<String> {
    let mut h = vec![first.to_string(), second.to_string()];
    h.extend((0..=b).map(|k| format!("b{k}")));
    h
}

fn row(prefix: [String; 2], coeffs: &SplineVector) -> Vec<String> {
    let mut r = prefix.to_vec();
    r.extend(coeffs.as_slice().iter().map(|v| fmt(*v)));
    r
}

pub fn write_chain(dir: &Path, chain: &Chain, format: ChainFormat) -> CliResult<()> {
    let meta = ChainMeta {
        format,
        config: chain.config.clone(),
        labels: chain.labels.clone(),
        basis_count: chain.basis_count,
        samples: chain.n_samples(),
        blocks: chain
            .blocks
            .iter()
            .map(|b| BlockMeta {
                replicates: b.replicates.clone(),
                global_accepts: b.global_accepts,
                local_accepts: b.local_accepts.clone(),
                proposals: b.proposals,
                map_nonconverged: b.map_nonconverged,
            })
            .collect(),
    };
    write_json(&dir.join("meta.json"), &meta)?;
    match format {
        ChainFormat::Csv => write_csv(dir, chain),
        ChainFormat::Binary => atomic_write(&dir.join("chain.bin"), &binary_bytes(chain)),
    }
}

fn write_csv(dir: &Path, chain: &Chain) -> CliResult<()> {
    let b = chain.basis_count;
    let mut tau = Vec::new();
    let mut glob = Vec::new();
    let mut zeta = Vec::new();
    let mut loc = Vec::new();
    for (k, block) in chain.blocks.iter().enumerate() {
        for (i, s) in block.samples.iter().enumerate() {
            tau.push(vec![i.to_string(), k.to_string(), fmt(s.tau)]);
            glob.push(row([i.to_string(), k.to_string()], &s.beta_glob));
            for (pos, &rep) in block.replicates.iter().enumerate().take(s.zeta.len()) {
                let label = chain.labels[rep].clone();
                zeta.push(vec![i.to_string(), label.clone(), fmt(s.zeta[pos])]);
                loc.push(row([i.to_string(), label], &s.beta_loc[pos]));
            }
        }
    }
    atomic_write(
        &dir.join("tau.csv"),
        &csv_bytes(&["sample", "block", "tau"], tau)?,
    )?;
    let gh = coeff_header("sample", "block", b);
    let gh: Vec<&str> = gh.iter().map(String::as_str).collect();
    atomic_write(&dir.join("beta_glob.csv"), &csv_bytes(&gh, glob)?)?;
    if !zeta.is_empty() {
        atomic_write(
            &dir.join("zeta.csv"),
            &csv_bytes(&["sample", "series", "zeta"], zeta)?,
        )?;
        let lh = coeff_header("sample", "series", b);
        let lh: Vec<&str> = lh.iter().map(String::as_str).collect();
        atomic_write(&dir.join("beta_loc.csv"), &csv_bytes(&lh, loc)?)?;
    }
    Ok(())
}

fn binary_bytes(chain: &Chain) -> Vec<u8> {
    let mut out = MAGIC.to_vec();
    for block in &chain.blocks {
        for s in &block.samples {
            let mut push = |v: f64| out.extend_from_slice(&v.to_le_bytes());
            push(s.tau);
            s.beta_glob.as_slice().iter().for_each(|&v| push(v));
            s.zeta.iter().for_each(|&v| push(v));
            for b in &s.beta_loc {
                b.as_slice().iter().for_each(|&v| push(v));
            }
        }
    }
    out
}

fn has_local(meta: &ChainMeta) -> bool {
    meta.config.mode == hbest_core::Mode::Hierarchical
}

fn empty_block(meta: &BlockMeta) -> ChainBlock {
    ChainBlock {
        replicates: meta.replicates.clone(),
        samples: Vec::new(),
        global_accepts: meta.global_accepts,
        local_accepts: meta.local_accepts.clone(),
        proposals: meta.proposals,
        map_nonconverged: meta.map_nonconverged,
    }
}

pub fn read_chain(dir: &Path) -> CliResult<Chain> {
    let meta: ChainMeta = read_json(&dir.join("meta.json"))?;
    let blocks = match meta.format {
        ChainFormat::Csv => read_csv(dir, &meta)?,
        ChainFormat::Binary => read_binary(dir, &meta)?,
    };
    Ok(Chain {
        config: meta.config.clone(),
        labels: meta.labels.clone(),
        basis_count: meta.basis_count,
        blocks,
        elapsed_secs: 0.0,
        post_burn_secs: 0.0,
    })
}

fn parse_rows(path: &Path, ncols: usize) -> CliResult<Vec<csv::StringRecord>> {
    let bad = |msg: String| CliError::input(format!("{}: {msg}", path.display()));
    let mut rdr = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        if rec.len() != ncols {
            return Err(bad(format!(
                "expected {ncols} columns, found {}",
                rec.len()
            )));
        }
        rows.push(rec);
    }
    Ok(rows)
}

fn num<T: std::str::FromStr>(s: &str, path: &Path) -> CliResult<T> {
    s.parse()
        .map_err(|_| CliError::input(format!("{}: bad value `{s}`", path.display())))
}

fn read_csv(dir: &Path, meta: &ChainMeta) -> CliResult<Vec<ChainBlock>> {
    let b = meta.basis_count;
    let n = meta.samples;
    let mut blocks: Vec<ChainBlock> = meta.blocks.iter().map(empty_block).collect();
    for block in blocks.iter_mut() {
        let l = if has_local(meta) {
            block.replicates.len()
        } else {
            0
        };
        block.samples = vec![
            ParameterState {
                beta_glob: SplineVector::zeros(b),
                beta_loc: vec![SplineVector::zeros(b); l],
                tau: 0.0,
                zeta: vec![0.0; l],
            };
            n
        ];
    }
    let sample_block = |rec: &csv::StringRecord, path: &Path| -> CliResult<(usize, usize)> {
        let (i, k): (usize, usize) = (num(&rec[0], path)?, num(&rec[1], path)?);
        if i >= n || k >= meta.blocks.len() {
            return Err(CliError::input(format!(
                "{}: sample or block index out of range",
                path.display()
            )));
        }
        Ok((i, k))
    };
    let p = dir.join("tau.csv");
    for rec in parse_rows(&p, 3)? {
        let (i, k) = sample_block(&rec, &p)?;
        blocks[k].samples[i].tau = num(&rec[2], &p)?;
    }
    let p = dir.join("beta_glob.csv");
    for rec in parse_rows(&p, b + 3)? {
        let (i, k) = sample_block(&rec, &p)?;
        for j in 0..=b {
            blocks[k].samples[i].beta_glob.0[j] = num(&rec[j + 2], &p)?;
        }
    }
    if has_local(meta) {
        // Hierarchical fits have one block covering every replicate.
        let pos_of = |label: &str, path: &Path| -> CliResult<usize> {
            let rep = meta.labels.iter().position(|l| l == label).ok_or_else(|| {
                CliError::input(format!("{}: unknown series `{label}`", path.display()))
            })?;
            meta.blocks[0]
                .replicates
                .iter()
                .position(|&r| r == rep)
                .ok_or_else(|| {
                    CliError::input(format!("{}: series `{label}` not in block", path.display()))
                })
        };
        let p = dir.join("zeta.csv");
        for rec in parse_rows(&p, 3)? {
            let i: usize = num(&rec[0], &p)?;
            let pos = pos_of(&rec[1], &p)?;
            blocks[0]
                .samples
                .get_mut(i)
                .ok_or_else(|| CliError::input("sample out of range"))?
                .zeta[pos] = num(&rec[2], &p)?;
        }
        let p = dir.join("beta_loc.csv");
        for rec in parse_rows(&p, b + 3)? {
            let i: usize = num(&rec[0], &p)?;
            let pos = pos_of(&rec[1], &p)?;
            let s = blocks[0]
                .samples
                .get_mut(i)
                .ok_or_else(|| CliError::input("sample out of range"))?;
            for j in 0..=b {
                s.beta_loc[pos].0[j] = num(&rec[j + 2], &p)?;
            }
        }
    }
    Ok(blocks)
}

fn read_binary(dir: &Path, meta: &ChainMeta) -> CliResult<Vec<ChainBlock>> {
    let path = dir.join("chain.bin");
    let bytes = std::fs::read(&path)?;
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(CliError::input(format!(
            "{}: not a chain file",
            path.display()
        )));
    }
    let mut values = bytes[MAGIC.len()..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
    let b = meta.basis_count;
    let truncated = || CliError::input(format!("{}: truncated chain file", path.display()));
    let mut next = || values.next().ok_or_else(truncated);
    let mut blocks: Vec<ChainBlock> = meta.blocks.iter().map(empty_block).collect();
    for block in blocks.iter_mut() {
        let l = if has_local(meta) {
            block.replicates.len()
        } else {
            0
        };
        for _ in 0..meta.samples {
            let tau = next()?;
            let glob = (0..=b).map(|_| next()).collect::<CliResult<Vec<f64>>>()?;
            let zeta = (0..l).map(|_| next()).collect::<CliResult<Vec<f64>>>()?;
            let loc = (0..l)
                .map(|_| {
                    (0..=b)
                        .map(|_| next())
                        .collect::<CliResult<Vec<f64>>>()
                        .map(SplineVector::from_vec)
                })
                .collect::<CliResult<Vec<_>>>()?;
            block.samples.push(ParameterState {
                beta_glob: SplineVector::from_vec(glob),
                beta_loc: loc,
                tau,
                zeta,
            });
        }
    }
    if !(bytes.len() - MAGIC.len()).is_multiple_of(8) || values.next().is_some() {
        return Err(CliError::input(format!(
            "{}: trailing bytes in chain file",
            path.display()
        )));
    }
    Ok(blocks)
}
