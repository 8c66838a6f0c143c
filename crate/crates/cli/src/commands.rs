use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use hbest_core::evaluate::Band;
use hbest_core::rng::stream;
use hbest_core::{
    aepl, aepl_untrimmed, ess, gen_ar2_mixture, gen_hierarchical, gen_ma4, local_sd,
    posterior_summary, run_chain, standardize, Chain, Dataset, EvalGrid, HbestError, Mode,
    SimulatedDataset, SpectrumSummary, TimeSeries,
};
use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::chain_io::{read_chain, write_chain};
use crate::config::{self, FitConfig, Setting, SimulateConfig};
use crate::error::{CliError, CliResult};
use crate::io::{
    atomic_write, csv_bytes, digest_files, fmt, read_groups, read_json, read_series, read_truth,
    series_files, truth_csv, write_json, write_series,
};
use crate::manifest::RunManifest;
use crate::{EvaluateArgs, FitArgs, SimulateArgs};

fn to_value<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("serialisable")
}

// ---------------------------------------------------------------- simulate

pub fn simulate(args: &SimulateArgs, argv: &[String]) -> CliResult<()> {
    let mut cfg: SimulateConfig = config::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if args.standardize {
        cfg.setting.set_standardize(true);
    }
    if cfg.datasets == 0 {
        return Err(CliError::input("datasets must be at least 1"));
    }
    let grid = EvalGrid::new(cfg.eval_grid_size, EvalGrid::DEFAULT_TRIM)?;
    let started = Instant::now();

    // Dataset s draws from its own stream, so the output does not depend on
    // how datasets are scheduled across threads.
    let generated: Vec<CliResult<SimulatedDataset>> = (0..cfg.datasets)
        .into_par_iter()
        .map(|s| {
            let mut rng = stream(cfg.seed, s as u64, 0, 0);
            Ok(match &cfg.setting {
                Setting::Ma4(m) => gen_ma4(m, &mut rng)?,
                Setting::Ar2Mixture(a) => gen_ar2_mixture(a, &mut rng)?,
                Setting::Hierarchical(h) => gen_hierarchical(h, &mut rng)?,
            })
        })
        .collect();

    fs::create_dir_all(&args.out)?;
    for (s, ds) in generated.into_iter().enumerate() {
        let ds = ds?;
        let dir = args.out.join(format!("dataset_{s:03}"));
        for series in &ds.series {
            write_series(&dir.join("series"), series)?;
        }
        let labels: Vec<String> = ds.series.iter().map(|x| x.label.clone()).collect();
        atomic_write(
            &dir.join("truth.csv"),
            &truth_csv(&labels, &grid.omegas, &ds.true_log_spectra(&grid.omegas))?,
        )?;
        let truths: Vec<_> = labels
            .iter()
            .zip(&ds.truths)
            .zip(&ds.series)
            .map(|((l, t), x)| json!({"series": l, "length": x.len(), "spectrum": t}))
            .collect();
        write_json(
            &dir.join("metadata.json"),
            &json!({
                "dataset": s,
                "setting": cfg.setting,
                "replicates": truths,
                "hierarchical_draw": ds.hier,
            }),
        )?;
    }

    let mut manifest = RunManifest::new("simulate", argv, to_value(&cfg), Some(cfg.seed));
    manifest.inputs = digest_files(std::slice::from_ref(&args.config))?;
    manifest
        .timings
        .insert("total".into(), started.elapsed().as_secs_f64());
    manifest.finish(&args.out)
}

// --------------------------------------------------------------------- fit

/// Per-fit bookkeeping written next to the chain.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FitInfo {
    pub group: Option<String>,
    pub seed: u64,
    pub mode: Mode,
    pub series: Vec<String>,
    pub standardized: bool,
    pub eval_grid_size: usize,
    pub trim: (f64, f64),
    pub elapsed_secs: f64,
    pub post_burn_secs: f64,
    pub global_acceptance: Vec<f64>,
    pub local_acceptance: Vec<f64>,
    pub map_nonconverged: usize,
}

pub const FIT_INFO: &str = "fit.json";

fn resolve_fit_config(args: &FitArgs) -> CliResult<FitConfig> {
    let mut cfg = match &args.config {
        Some(p) => config::load(p)?,
        None => FitConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(mode) = args.mode {
        cfg.mode = mode;
    }
    if args.standardize {
        cfg.standardize = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load_series(inputs: &[PathBuf]) -> CliResult<(Vec<TimeSeries>, Vec<PathBuf>)> {
    let mut files = Vec::new();
    for p in inputs {
        if p.is_dir() {
            files.extend(series_files(p)?);
        } else {
            files.push(p.clone());
        }
    }
    if files.is_empty() {
        return Err(CliError::input("no series files found"));
    }
    let series = files
        .iter()
        .map(|f| read_series(f))
        .collect::<CliResult<Vec<_>>>()?;
    let mut seen = std::collections::BTreeSet::new();
    for s in &series {
        if !seen.insert(s.label.clone()) {
            return Err(CliError::input(format!(
                "duplicate series label `{}`",
                s.label
            )));
        }
    }
    Ok((series, files))
}

/// Seed of group `g`: the configured seed for an ungrouped fit, otherwise a
/// draw from the group's own stream.
fn group_seed(seed: u64, g: usize, grouped: bool) -> u64 {
    if grouped {
        stream(seed, g as u64, 0, u64::MAX).next_u64()
    } else {
        seed
    }
}

pub fn fit(args: &FitArgs, argv: &[String]) -> CliResult<()> {
    let cfg = resolve_fit_config(args)?;
    let (mut series, files) = load_series(&args.data)?;
    if cfg.standardize {
        series = series.iter().map(standardize).collect::<Result<_, _>>()?;
    }
    let grid = cfg.eval_grid()?;

    // (group name, members) in group-name order; one unnamed group without --groups.
    let groups: Vec<(Option<String>, Vec<TimeSeries>)> = match &args.groups {
        None => vec![(None, series)],
        Some(path) => {
            let assignment = read_groups(path)?;
            for label in assignment.keys() {
                if !series.iter().any(|s| &s.label == label) {
                    return Err(CliError::input(format!(
                        "group file names unknown series `{label}`"
                    )));
                }
            }
            let mut by_group: BTreeMap<String, Vec<TimeSeries>> = BTreeMap::new();
            for s in series {
                if let Some(g) = assignment.get(&s.label) {
                    by_group.entry(g.clone()).or_default().push(s);
                }
            }
            by_group.into_iter().map(|(g, v)| (Some(g), v)).collect()
        }
    };
    let grouped = args.groups.is_some();

    fs::create_dir_all(&args.out)?;
    let started = Instant::now();
    let mut diagnostics = Vec::new();
    for (g, (name, members)) in groups.iter().enumerate() {
        let dir = match name {
            Some(n) => args.out.join(n),
            None => args.out.clone(),
        };
        let seed = group_seed(cfg.seed, g, grouped);
        let sampler = cfg.sampler(seed);
        let data = Dataset::from_series(members, sampler.hp.basis_count)?;
        let chain = match run_chain(&data, &sampler) {
            Ok(c) => c,
            Err(HbestError::SamplerFailure {
                iteration,
                message,
                state,
            }) => {
                let dump = dir.join("failure_state.json");
                write_json(
                    &dump,
                    &json!({"iteration": iteration, "message": message, "state": state}),
                )?;
                return Err(CliError::Numerical {
                    message: format!(
                        "sampler failed at iteration {iteration}: {message} (state written to {})",
                        dump.display()
                    ),
                    dump: Some(dump),
                });
            }
            Err(e) => return Err(e.into()),
        };
        write_chain(&dir.join("chain"), &chain, cfg.chain_format)?;
        let summary = posterior_summary(&chain, &grid)?;
        write_summary(&dir, &summary)?;
        let info = FitInfo {
            group: name.clone(),
            seed,
            mode: cfg.mode,
            series: chain.labels.clone(),
            standardized: cfg.standardize,
            eval_grid_size: cfg.eval_grid_size,
            trim: cfg.trim,
            elapsed_secs: chain.elapsed_secs,
            post_burn_secs: chain.post_burn_secs,
            global_acceptance: chain.blocks.iter().map(|b| b.global_acceptance()).collect(),
            local_acceptance: chain
                .blocks
                .iter()
                .flat_map(|b| b.local_acceptance())
                .collect(),
            map_nonconverged: chain.blocks.iter().map(|b| b.map_nonconverged).sum(),
        };
        write_json(&dir.join(FIT_INFO), &info)?;
        diagnostics.push(json!({
            "group": name,
            "seed": seed,
            "global_acceptance": info.global_acceptance,
            "local_acceptance": info.local_acceptance,
            "map_nonconverged": info.map_nonconverged,
            "elapsed_secs": info.elapsed_secs,
        }));
    }

    let mut manifest = RunManifest::new("fit", argv, to_value(&cfg), Some(cfg.seed));
    let mut inputs = files;
    inputs.extend(args.config.iter().cloned());
    inputs.extend(args.groups.iter().cloned());
    manifest.inputs = digest_files(&inputs)?;
    manifest
        .timings
        .insert("total".into(), started.elapsed().as_secs_f64());
    manifest.diagnostics = json!(diagnostics);
    manifest.finish(&args.out)
}

/// Long-format summary: `frequency,estimate,lower,upper,series,kind`, plus
/// the same content as JSON.
pub fn write_summary(dir: &Path, summary: &SpectrumSummary) -> CliResult<()> {
    let mut rows: Vec<[String; 6]> = Vec::new();
    let mut push = |band: &Band, series: &str, kind: &str| {
        for (k, w) in summary.grid.omegas.iter().enumerate() {
            rows.push([
                fmt(*w),
                fmt(band.mean[k]),
                fmt(band.lower[k]),
                fmt(band.upper[k]),
                series.into(),
                kind.into(),
            ]);
        }
    };
    for (label, band) in summary.labels.iter().zip(&summary.replicates) {
        push(band, label, "replicate");
    }
    if let Some(g) = &summary.global {
        push(g, "global", "global");
    }
    if let Some(local) = &summary.local {
        for (label, band) in summary.labels.iter().zip(local) {
            push(band, label, "local");
        }
    }
    atomic_write(
        &dir.join("summary.csv"),
        &csv_bytes(
            &["frequency", "estimate", "lower", "upper", "series", "kind"],
            rows,
        )?,
    )?;
    write_json(&dir.join("summary.json"), summary)
}

// ---------------------------------------------------------------- evaluate

struct NamedFit {
    name: String,
    dir: PathBuf,
}

fn is_fit_dir(p: &Path) -> bool {
    p.join("chain").join("meta.json").is_file()
}

fn expand_fits(args: &[String]) -> CliResult<Vec<NamedFit>> {
    let mut out = Vec::new();
    for arg in args {
        let (name, path) = match arg.split_once('=') {
            Some((n, p)) => (n.to_string(), PathBuf::from(p)),
            None => {
                let p = PathBuf::from(arg);
                let n = p
                    .file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_else(|| arg.clone());
                (n, p)
            }
        };
        if is_fit_dir(&path) {
            out.push(NamedFit { name, dir: path });
            continue;
        }
        // A grouped fit: one fit per subdirectory.
        let mut subs: Vec<PathBuf> = fs::read_dir(&path)
            .map_err(|e| {
                CliError::input(format!("cannot read fit directory {}: {e}", path.display()))
            })?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| is_fit_dir(p))
            .collect();
        subs.sort();
        if subs.is_empty() {
            return Err(CliError::input(format!(
                "{} contains no fit outputs",
                path.display()
            )));
        }
        for sub in subs {
            let g = sub
                .file_name()
                .expect("subdirectory name")
                .to_string_lossy()
                .into_owned();
            out.push(NamedFit {
                name: format!("{name}/{g}"),
                dir: sub,
            });
        }
    }
    let mut names = std::collections::BTreeSet::new();
    for f in &out {
        if !names.insert(f.name.clone()) {
            return Err(CliError::input(format!(
                "fit name `{}` used twice; name fits as name=path",
                f.name
            )));
        }
    }
    Ok(out)
}

/// Truth tabulated on the evaluation grid, one vector per chain replicate.
fn truths_for(
    chain: &Chain,
    table: &crate::io::TruthTable,
    grid: &EvalGrid,
    fit: &str,
) -> CliResult<Vec<Vec<f64>>> {
    chain
        .labels
        .iter()
        .map(|l| {
            table
                .series
                .get(l)
                .cloned()
                .ok_or_else(|| CliError::input(format!("truth has no series `{l}` (fit `{fit}`)")))
        })
        .collect::<CliResult<Vec<_>>>()
        .and_then(|t| {
            if t.iter().any(|v| v.len() != grid.size()) {
                Err(CliError::input("truth and evaluation grid differ in size"))
            } else {
                Ok(t)
            }
        })
}

#[derive(Clone, Debug, Serialize)]
struct EssRow {
    parameter: String,
    ess: f64,
    ess_per_second: Option<f64>,
    degenerate: bool,
}

fn ess_report(chain: &Chain, post_burn_secs: f64) -> CliResult<Vec<EssRow>> {
    if chain.n_samples() < 10 {
        return Ok(Vec::new());
    }
    let mut traces: Vec<(String, Vec<f64>)> = Vec::new();
    let b = chain.basis_count;
    for block in &chain.blocks {
        // Independent fits have one block per series; tag their parameters.
        let tag = if chain.blocks.len() == 1 {
            String::new()
        } else {
            format!("[{}]", chain.labels[block.replicates[0]])
        };
        traces.push((
            format!("tau{tag}"),
            block.samples.iter().map(|s| s.tau).collect(),
        ));
        for j in 0..=b {
            traces.push((
                format!("beta_glob{tag}[{j}]"),
                block.samples.iter().map(|s| s.beta_glob.0[j]).collect(),
            ));
        }
        for (pos, &rep) in block.replicates.iter().enumerate() {
            if block.samples[0].zeta.is_empty() {
                break;
            }
            let label = &chain.labels[rep];
            traces.push((
                format!("zeta[{label}]"),
                block.samples.iter().map(|s| s.zeta[pos]).collect(),
            ));
            for j in 0..=b {
                traces.push((
                    format!("beta_loc[{label}][{j}]"),
                    block.samples.iter().map(|s| s.beta_loc[pos].0[j]).collect(),
                ));
            }
        }
    }
    traces
        .into_iter()
        .map(|(parameter, x)| {
            let e = ess(&x)?;
            Ok(EssRow {
                parameter,
                ess: e.ess,
                ess_per_second: (post_burn_secs > 0.0).then(|| e.ess / post_burn_secs),
                degenerate: e.degenerate,
            })
        })
        .collect()
}

pub fn evaluate(args: &EvaluateArgs, argv: &[String]) -> CliResult<()> {
    let started = Instant::now();
    let fits = expand_fits(&args.fits)?;
    let truth_path = args.truth.as_ref().map(|p| {
        if p.is_dir() {
            p.join("truth.csv")
        } else {
            p.clone()
        }
    });
    let truth = truth_path.as_ref().map(|p| read_truth(p)).transpose()?;
    fs::create_dir_all(&args.out)?;

    let mut reports = Vec::new();
    let mut scores: Vec<(String, f64, f64)> = Vec::new();
    let mut inputs = Vec::new();
    for f in &fits {
        let chain = read_chain(&f.dir.join("chain"))?;
        let info: FitInfo = read_json(&f.dir.join(FIT_INFO))?;
        inputs.push(f.dir.join("chain").join("meta.json"));
        let grid = match &truth {
            Some(t) => {
                let g = EvalGrid::new(t.frequencies.len(), info.trim)?;
                let matches = g
                    .omegas
                    .iter()
                    .zip(&t.frequencies)
                    .all(|(a, b)| (a - b).abs() <= 1e-12 * a.abs().max(1.0));
                if !matches {
                    return Err(CliError::input(format!(
                        "truth frequencies are not the {}-point evaluation grid",
                        t.frequencies.len()
                    )));
                }
                g
            }
            None => EvalGrid::new(info.eval_grid_size, info.trim)?,
        };
        let dir = args.out.join(&f.name);
        write_summary(&dir, &posterior_summary(&chain, &grid)?)?;

        let sd = if chain.n_replicates() >= 2 && chain.mode() != Mode::Independent {
            let sd = local_sd(&chain, &grid)?;
            let rows = grid.omegas.iter().zip(&sd).map(|(w, s)| [fmt(*w), fmt(*s)]);
            atomic_write(
                &dir.join("local_sd.csv"),
                &csv_bytes(&["frequency", "local_sd"], rows)?,
            )?;
            Some(sd)
        } else {
            None
        };

        let ess_rows = ess_report(&chain, info.post_burn_secs)?;
        let rows = ess_rows.iter().map(|r| {
            [
                r.parameter.clone(),
                fmt(r.ess),
                r.ess_per_second.map(fmt).unwrap_or_default(),
                r.degenerate.to_string(),
            ]
        });
        atomic_write(
            &dir.join("ess.csv"),
            &csv_bytes(&["parameter", "ess", "ess_per_second", "degenerate"], rows)?,
        )?;

        let mut report = json!({
            "name": f.name,
            "path": f.dir,
            "mode": chain.mode(),
            "samples": chain.n_samples(),
            "replicates": chain.labels,
            "local_sd_mean": sd.map(|v| v.iter().sum::<f64>() / v.len() as f64),
            "ess": ess_rows,
        });
        if let Some(t) = &truth {
            let truths = truths_for(&chain, t, &grid, &f.name)?;
            let a = aepl(&chain, &truths, &grid)?;
            let u = aepl_untrimmed(&chain, &truths, &grid)?;
            report["aepl"] = json!(a);
            report["aepl_untrimmed"] = json!(u);
            scores.push((f.name.clone(), a, u));
        }
        reports.push(report);
    }

    let mut result = json!({ "fits": reports });
    if truth.is_some() {
        let rows = scores.iter().map(|(n, a, u)| [n.clone(), fmt(*a), fmt(*u)]);
        atomic_write(
            &args.out.join("aepl.csv"),
            &csv_bytes(&["fit", "aepl", "aepl_untrimmed"], rows)?,
        )?;
        let mut ratios = Vec::new();
        for (i, (na, a, ua)) in scores.iter().enumerate() {
            for (nb, b, ub) in scores.iter().skip(i + 1) {
                ratios.push((na.clone(), nb.clone(), (a / b).ln(), (ua / ub).ln()));
            }
        }
        result["log_aepl_ratios"] = json!(ratios
            .iter()
            .map(|(a, b, r, ru)| json!({"a": a, "b": b, "log_ratio": r, "log_ratio_untrimmed": ru}))
            .collect::<Vec<_>>());
        let rows = ratios
            .iter()
            .map(|(a, b, r, ru)| [a.clone(), b.clone(), fmt(*r), fmt(*ru)]);
        atomic_write(
            &args.out.join("aepl_ratios.csv"),
            &csv_bytes(
                &["fit_a", "fit_b", "log_ratio", "log_ratio_untrimmed"],
                rows,
            )?,
        )?;
    }
    write_json(&args.out.join("evaluation.json"), &result)?;

    let mut manifest = RunManifest::new(
        "evaluate",
        argv,
        json!({"fits": args.fits, "truth": truth_path}),
        None,
    );
    inputs.extend(truth_path);
    manifest.inputs = digest_files(&inputs)?;
    manifest
        .timings
        .insert("total".into(), started.elapsed().as_secs_f64());
    manifest.finish(&args.out)
}
