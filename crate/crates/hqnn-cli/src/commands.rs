//! Command implementations. Every command is deterministic given its config:
//! all stochastic components are seeded from config fields, parallel sweeps
//! collect results in config-index order, and artifacts land only in the
//! declared output directory.

use std::fs;
use std::path::Path;

use hqnn_core::analysis::{ablation_table, estimate_expressibility, AblationRow, MetricsReport};
use hqnn_core::ansatz::{compile, render_catalog_csv, CircuitSpec, TEMPLATE_COUNT};
use hqnn_core::data::{load_csv, split, synthesize, write_csv, DeviceRecord, Standardizer, TARGET_NAMES};
use hqnn_core::error::Error;
use hqnn_core::grad::Statevector;
use hqnn_core::model::{
    evaluate, load_model, save_model, target_iqr, train, Backbone, HybridModel, ModelConfig,
    TrainResult,
};
use hqnn_core::noise::{default_noise_grid, noise_sweep, render_delta_csv, render_grid_csv, NoiseMode};
use hqnn_core::seed;
use rayon::prelude::*;

use crate::config::{DatasetSource, ExperimentConfig};

type Result<T> = std::result::Result<T, Error>;

fn ensure_out_dir(out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_dataset(config: &ExperimentConfig) -> Result<Vec<DeviceRecord>> {
    match &config.dataset {
        DatasetSource::Csv { path } => load_csv(path),
        DatasetSource::Synth { n, seed } => synthesize(*n, *seed),
    }
}

pub fn cmd_datagen(n: usize, gen_seed: u64, out: &Path) -> Result<()> {
    let records = synthesize(n, gen_seed)?;
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    write_csv(&records, out)?;
    println!("wrote {} records to {}", records.len(), out.display());
    Ok(())
}

pub fn cmd_catalog(out_dir: &Path) -> Result<()> {
    ensure_out_dir(out_dir)?;
    let path = out_dir.join("catalog.csv");
    write_text(&path, &render_catalog_csv())?;
    println!("wrote {}", path.display());
    Ok(())
}

struct Prepared {
    records: Vec<DeviceRecord>,
    assignment: hqnn_core::data::SplitAssignment,
    standardizer: Standardizer,
    iqr: [f64; 6],
}

fn prepare(config: &ExperimentConfig) -> Result<Prepared> {
    let records = load_dataset(config)?;
    let ratios = config.split.ratios;
    let assignment = split(records.len(), (ratios[0], ratios[1], ratios[2]), config.split.seed)?;
    let standardizer = Standardizer::fit(&records, &assignment.train)?;
    let iqr = target_iqr(&records, &assignment.train)?;
    Ok(Prepared {
        records,
        assignment,
        standardizer,
        iqr,
    })
}

fn history_csv(result: &TrainResult) -> String {
    let mut out = String::from("epoch,train_loss,val_loss\n");
    for e in &result.history {
        out.push_str(&format!("{},{},{}\n", e.epoch, e.train_loss, e.val_loss));
    }
    out
}

fn metrics_json(report: &MetricsReport) -> Result<String> {
    serde_json::to_string_pretty(report)
        .map_err(|e| Error::Contract(format!("metrics serialization: {e}")))
}

pub fn cmd_train(config: &ExperimentConfig, out_dir: &Path) -> Result<()> {
    ensure_out_dir(out_dir)?;
    let prep = prepare(config)?;
    let mut model = HybridModel::init(config.model.clone(), config.train.seed)?;
    let result = train(
        &mut model,
        &prep.records,
        &prep.assignment,
        &prep.standardizer,
        &config.train,
        &Statevector,
    )?;
    let report = evaluate(
        &model,
        &prep.records,
        &prep.assignment.test,
        &prep.standardizer,
        &prep.iqr,
        &Statevector,
    )?;
    save_model(&model, &prep.standardizer, &prep.iqr, &out_dir.join("model.json"))?;
    write_text(&out_dir.join("metrics.json"), &metrics_json(&report)?)?;
    write_text(&out_dir.join("metrics.csv"), &report.to_csv(&TARGET_NAMES))?;
    write_text(&out_dir.join("history.csv"), &history_csv(&result))?;
    println!(
        "trained {} epochs (best epoch {}); test overall nRMSE {:.4}, R2 {:.4}",
        result.history.len(),
        result.best_epoch,
        report.overall_nrmse,
        report.overall_r2
    );
    Ok(())
}

pub fn cmd_eval(model_path: &Path, data_path: &Path, out_dir: &Path) -> Result<()> {
    ensure_out_dir(out_dir)?;
    let (model, standardizer, iqr) = load_model(model_path)?;
    let records = load_csv(data_path)?;
    let indices: Vec<usize> = (0..records.len()).collect();
    let report = evaluate(&model, &records, &indices, &standardizer, &iqr, &Statevector)?;
    write_text(&out_dir.join("metrics.json"), &metrics_json(&report)?)?;
    write_text(&out_dir.join("metrics.csv"), &report.to_csv(&TARGET_NAMES))?;
    println!(
        "evaluated {} records; overall nRMSE {:.4}, R2 {:.4}",
        records.len(),
        report.overall_nrmse,
        report.overall_r2
    );
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMode {
    Single,
    Mixed,
}

struct SweepRow {
    labels: Vec<String>,
    param_count: usize,
    depth: usize,
    two_qubit_count: usize,
    family: &'static str,
    levels: usize,
    d_kl: Option<f64>,
    overall_nrmse: Option<f64>,
    overall_r2: Option<f64>,
    status: String,
}

/// Train/evaluate one circuit configuration, averaged over split repetitions.
fn run_sweep_point(
    config: &ExperimentConfig,
    records: &[DeviceRecord],
    spec: &CircuitSpec,
    backbone: Backbone,
    index: u64,
    with_dkl: bool,
) -> Result<(Option<f64>, f64, f64)> {
    let model_config = match backbone {
        Backbone::Strict => ModelConfig::strict(spec.clone()),
        Backbone::Dual => ModelConfig::dual(spec.clone()),
        Backbone::Ann => ModelConfig::ann(),
    };
    let ratios = config.split.ratios;
    let mut nrmse_sum = 0.0;
    let mut r2_sum = 0.0;
    for rep in 0..config.num_splits {
        let split_seed = seed::derive(config.split.seed, "sweep-split", rep as u64);
        let assignment = split(records.len(), (ratios[0], ratios[1], ratios[2]), split_seed)?;
        let standardizer = Standardizer::fit(records, &assignment.train)?;
        let iqr = target_iqr(records, &assignment.train)?;
        // Initialization is fixed per circuit configuration, not per split.
        let mut model =
            HybridModel::init(model_config.clone(), seed::derive(config.train.seed, "sweep-init", index))?;
        let mut train_config = config.train.clone();
        train_config.seed = seed::derive(config.train.seed, "sweep-train", index * 1000 + rep as u64);
        train(
            &mut model,
            records,
            &assignment,
            &standardizer,
            &train_config,
            &Statevector,
        )?;
        let report = evaluate(
            &model,
            records,
            &assignment.test,
            &standardizer,
            &iqr,
            &Statevector,
        )?;
        nrmse_sum += report.overall_nrmse;
        r2_sum += report.overall_r2;
    }
    let d_kl = if with_dkl {
        let circuit = compile(spec)?;
        Some(estimate_expressibility(
            &circuit,
            config.expressibility.pairs,
            config.expressibility.bins,
            seed::derive(config.expressibility.seed, "sweep-expr", index),
        )?)
    } else {
        None
    };
    let n = config.num_splits as f64;
    Ok((d_kl, nrmse_sum / n, r2_sum / n))
}

fn sweep_row(
    config: &ExperimentConfig,
    records: &[DeviceRecord],
    spec: CircuitSpec,
    labels: Vec<String>,
    backbone: Backbone,
    index: u64,
    with_dkl: bool,
) -> SweepRow {
    let compiled = compile(&spec).expect("sweep specs are valid by construction");
    let descriptors = compiled.descriptors();
    let levels = spec.level_templates().len();
    match run_sweep_point(config, records, &spec, backbone, index, with_dkl) {
        Ok((d_kl, nrmse, r2)) => SweepRow {
            labels,
            param_count: descriptors.param_count,
            depth: descriptors.depth,
            two_qubit_count: descriptors.two_qubit_gate_count,
            family: descriptors.entangler_family.label(),
            levels,
            d_kl,
            overall_nrmse: Some(nrmse),
            overall_r2: Some(r2),
            status: "ok".into(),
        },
        Err(e) => SweepRow {
            labels,
            param_count: descriptors.param_count,
            depth: descriptors.depth,
            two_qubit_count: descriptors.two_qubit_gate_count,
            family: descriptors.entangler_family.label(),
            levels,
            d_kl: None,
            overall_nrmse: None,
            overall_r2: None,
            status: format!("error: {e}"),
        },
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn cmd_sweep(config: &ExperimentConfig, mode: SweepMode, out_dir: &Path) -> Result<()> {
    ensure_out_dir(out_dir)?;
    let records = load_dataset(config)?;
    match mode {
        SweepMode::Single => {
            // 19 templates x 5 levels under the strict backbone.
            let jobs: Vec<(u8, usize)> = (1..=TEMPLATE_COUNT)
                .flat_map(|t| (1..=5usize).map(move |l| (t, l)))
                .collect();
            let rows: Vec<SweepRow> = jobs
                .par_iter()
                .enumerate()
                .map(|(index, &(template, levels))| {
                    let spec = CircuitSpec::single(template, levels).expect("valid ids");
                    sweep_row(
                        config,
                        &records,
                        spec,
                        vec![template.to_string(), levels.to_string()],
                        Backbone::Strict,
                        index as u64,
                        true,
                    )
                })
                .collect();

            let mut csv = String::from(
                "template,levels,param_count,depth,two_qubit_count,entangler_family,d_kl,overall_nrmse,overall_r2,status\n",
            );
            for r in &rows {
                csv.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{}\n",
                    r.labels[0],
                    r.labels[1],
                    r.param_count,
                    r.depth,
                    r.two_qubit_count,
                    r.family,
                    opt(r.d_kl),
                    opt(r.overall_nrmse),
                    opt(r.overall_r2),
                    r.status
                ));
            }
            write_text(&out_dir.join("sweep_single.csv"), &csv)?;

            let ablation_rows: Vec<AblationRow> = rows
                .iter()
                .filter(|r| r.status == "ok")
                .map(|r| AblationRow {
                    label: format!("t{}-L{}", r.labels[0], r.labels[1]),
                    levels: r.levels,
                    param_count: r.param_count,
                    depth: r.depth,
                    two_qubit_count: r.two_qubit_count,
                    d_kl: r.d_kl.unwrap_or(f64::NAN),
                    entangler_family: match r.family {
                        "none" => hqnn_core::ansatz::EntanglerFamily::None,
                        "cnot" => hqnn_core::ansatz::EntanglerFamily::CnotLike,
                        "cr" => hqnn_core::ansatz::EntanglerFamily::ControlledRotation,
                        _ => hqnn_core::ansatz::EntanglerFamily::Mixed,
                    },
                    overall_nrmse: r.overall_nrmse.unwrap_or(f64::NAN),
                })
                .collect();
            let ablation = ablation_table(&ablation_rows)?;
            let json = serde_json::to_string_pretty(&ablation)
                .map_err(|e| Error::Contract(format!("ablation serialization: {e}")))?;
            write_text(&out_dir.join("ablation.json"), &json)?;
            write_text(&out_dir.join("ablation.csv"), &ablation.to_csv())?;
            println!(
                "single sweep: {} rows -> {}, ablation -> {}",
                rows.len(),
                out_dir.join("sweep_single.csv").display(),
                out_dir.join("ablation.json").display()
            );
        }
        SweepMode::Mixed => {
            // All ordered template pairs at two levels under the dual backbone.
            let jobs: Vec<(u8, u8)> = (1..=TEMPLATE_COUNT)
                .flat_map(|a| (1..=TEMPLATE_COUNT).map(move |b| (a, b)))
                .collect();
            let rows: Vec<SweepRow> = jobs
                .par_iter()
                .enumerate()
                .map(|(index, &(a, b))| {
                    let spec = CircuitSpec::mixed(&[a, b]).expect("valid ids");
                    sweep_row(
                        config,
                        &records,
                        spec,
                        vec![a.to_string(), b.to_string()],
                        Backbone::Dual,
                        index as u64,
                        false,
                    )
                })
                .collect();
            let mut csv = String::from(
                "template_a,template_b,param_count,depth,two_qubit_count,entangler_family,overall_nrmse,overall_r2,status\n",
            );
            for r in &rows {
                csv.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{}\n",
                    r.labels[0],
                    r.labels[1],
                    r.param_count,
                    r.depth,
                    r.two_qubit_count,
                    r.family,
                    opt(r.overall_nrmse),
                    opt(r.overall_r2),
                    r.status
                ));
            }
            write_text(&out_dir.join("sweep_mixed.csv"), &csv)?;
            println!(
                "mixed sweep: {} rows -> {}",
                rows.len(),
                out_dir.join("sweep_mixed.csv").display()
            );
        }
    }
    Ok(())
}

/// Parse a template selector: "all", "1-19", or "1,5,13".
pub fn parse_templates(arg: &str) -> Result<Vec<u8>> {
    if arg == "all" {
        return Ok((1..=TEMPLATE_COUNT).collect());
    }
    if let Some((lo, hi)) = arg.split_once('-') {
        let lo: u8 = lo.trim().parse().map_err(|_| bad_templates(arg))?;
        let hi: u8 = hi.trim().parse().map_err(|_| bad_templates(arg))?;
        if lo == 0 || hi > TEMPLATE_COUNT || lo > hi {
            return Err(bad_templates(arg));
        }
        return Ok((lo..=hi).collect());
    }
    let ids = arg
        .split(',')
        .map(|s| s.trim().parse::<u8>().map_err(|_| bad_templates(arg)))
        .collect::<Result<Vec<u8>>>()?;
    if ids.is_empty() || ids.iter().any(|&t| t == 0 || t > TEMPLATE_COUNT) {
        return Err(bad_templates(arg));
    }
    Ok(ids)
}

fn bad_templates(arg: &str) -> Error {
    Error::Config(format!(
        "cannot parse template selector '{arg}' (use 'all', '1-19', or '1,5,13')"
    ))
}

/// Parse a level selector: "1-3" or "2".
pub fn parse_levels(arg: &str) -> Result<Vec<usize>> {
    let parse_one = |s: &str| -> Result<usize> {
        s.trim()
            .parse::<usize>()
            .map_err(|_| Error::Config(format!("cannot parse level '{s}'")))
    };
    let levels = if let Some((lo, hi)) = arg.split_once('-') {
        let (lo, hi) = (parse_one(lo)?, parse_one(hi)?);
        if lo == 0 || lo > hi {
            return Err(Error::Config(format!("bad level range '{arg}'")));
        }
        (lo..=hi).collect()
    } else {
        vec![parse_one(arg)?]
    };
    if levels.iter().any(|&l| l == 0 || l > 5) {
        return Err(Error::Config(format!("levels '{arg}' outside 1..=5")));
    }
    Ok(levels)
}

pub fn cmd_expressibility(
    templates: &[u8],
    levels: &[usize],
    pairs: usize,
    bins: usize,
    expr_seed: u64,
    out_dir: &Path,
) -> Result<()> {
    ensure_out_dir(out_dir)?;
    let jobs: Vec<(u8, usize)> = templates
        .iter()
        .flat_map(|&t| levels.iter().map(move |&l| (t, l)))
        .collect();
    let rows: Vec<Result<(u8, usize, usize, f64)>> = jobs
        .par_iter()
        .enumerate()
        .map(|(index, &(template, level))| {
            let circuit = compile(&CircuitSpec::single(template, level)?)?;
            let d_kl = estimate_expressibility(
                &circuit,
                pairs,
                bins,
                seed::derive(expr_seed, "expressibility-cmd", index as u64),
            )?;
            Ok((template, level, circuit.num_params(), d_kl))
        })
        .collect();
    let mut csv = String::from("template,levels,param_count,d_kl\n");
    for row in rows {
        let (t, l, p, d) = row?;
        csv.push_str(&format!("{t},{l},{p},{d}\n"));
    }
    let path = out_dir.join("expressibility.csv");
    write_text(&path, &csv)?;
    println!("wrote {}", path.display());
    Ok(())
}

/// Parse "p1,p2;p1,p2;..." into a noise grid.
pub fn parse_grid(arg: &str) -> Result<Vec<(f64, f64)>> {
    let mut grid = Vec::new();
    for part in arg.split(';') {
        let (p1, p2) = part.split_once(',').ok_or_else(|| {
            Error::Config(format!("grid entry '{part}' is not 'p1,p2'"))
        })?;
        let parse = |s: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("cannot parse probability '{s}'")))
        };
        grid.push((parse(p1)?, parse(p2)?));
    }
    if grid.is_empty() {
        return Err(Error::Config("noise grid is empty".into()));
    }
    Ok(grid)
}

pub fn cmd_noise(
    config: &ExperimentConfig,
    model_path: &Path,
    mode: NoiseMode,
    grid: Option<Vec<(f64, f64)>>,
    out_dir: &Path,
) -> Result<()> {
    ensure_out_dir(out_dir)?;
    let (model, standardizer, iqr) = load_model(model_path)?;
    let records = load_dataset(config)?;
    let ratios = config.split.ratios;
    let assignment = split(records.len(), (ratios[0], ratios[1], ratios[2]), config.split.seed)?;
    let grid = grid.unwrap_or_else(default_noise_grid);
    let points = noise_sweep(
        &model,
        &records,
        &assignment,
        &standardizer,
        &iqr,
        &grid,
        mode,
        &config.train,
    )?;
    write_text(&out_dir.join("noise_grid.csv"), &render_grid_csv(&points))?;
    write_text(&out_dir.join("noise_delta.csv"), &render_delta_csv(&points)?)?;
    for p in &points {
        println!(
            "p1={} p2={}: overall R2 {:.4} ({})",
            p.p1,
            p.p2,
            p.overall_r2,
            TARGET_NAMES
                .iter()
                .zip(p.per_target_r2.iter())
                .map(|(n, v)| format!("{n}={v:.3}"))
                .collect::<Vec<_>>()
                .join(", ")
        );
    }
    Ok(())
}

/// Run `body` inside a rayon pool with `jobs` threads (0 = library default).
pub fn with_jobs<T>(jobs: usize, body: impl FnOnce() -> T + Send) -> Result<T>
where
    T: Send,
{
    if jobs == 0 {
        Ok(body())
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Config(format!("cannot build a {jobs}-thread pool: {e}")))?;
        Ok(pool.install(body))
    }
}
