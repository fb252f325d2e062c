use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use mlspl::metrics::{format_table, AggregateReport, Criterion, MetricsReport};
use mlspl::predictor::write_scores_csv;
use mlspl::protocol::{benchmark, scheme_compare, BenchmarkResult, GridResult, GridSpec, Protocol};
use mlspl::selfpace::{verify_scheme, NegatedRegularizer, SelfPacedFunction, VerificationGrid, VerificationReport};
use mlspl::{BaselineMode, MlsplModel, SchemeKind, TrainConfig};
use serde::Serialize;

use crate::args::{BenchmarkArgs, EvaluateArgs, TrainArgs, VerifyArgs};
use crate::manifest::{DatasetIdentity, FileDigest, RunManifest, TOOL};

pub const MODEL_FILE: &str = "model.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_TXT: &str = "report.txt";
pub const SCORES_FILE: &str = "scores.csv";
pub const SCHEMES_FILE: &str = "schemes.csv";
pub const VERIFY_FILE: &str = "verification.json";

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let path = dir.join(name);
    let text = serde_json::to_string_pretty(value)?;
    fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}

fn create_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

pub fn train(args: &TrainArgs) -> Result<()> {
    let mut manifest = RunManifest::new("train");
    let cfg = args.config.resolve()?;
    let t = Instant::now();
    let ds = args.data.load()?;
    manifest.timings.insert("load".into(), t.elapsed().as_secs_f64());
    manifest.dataset = Some(DatasetIdentity::new(&args.data, &ds)?);

    let t = Instant::now();
    let model = MlsplModel::fit(&ds, &cfg)?;
    manifest.timings.insert("train".into(), t.elapsed().as_secs_f64());
    log::info!("{} sweeps, converged: {}", model.history.len(), model.converged);

    create_out(&args.out)?;
    model.save(args.out.join(MODEL_FILE))?;
    manifest.seeds = vec![cfg.seed];
    manifest.config = Some(cfg);
    manifest.checkpoint = Some(FileDigest::of(&args.out.join(MODEL_FILE))?);
    write_json(&args.out, MANIFEST_FILE, &manifest)?;
    println!(
        "trained on {} instances ({} sweeps, converged: {}); checkpoint {}",
        ds.n_instances(),
        model.history.len(),
        model.converged,
        args.out.join(MODEL_FILE).display()
    );
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct EvaluationOutput {
    pub tool: &'static str,
    pub n_instances: usize,
    pub n_labels: usize,
    pub report: MetricsReport,
}

pub fn single_report_table(report: &MetricsReport) -> String {
    let rows: Vec<(String, String)> = Criterion::ALL
        .iter()
        .map(|&c| {
            let arrow = if c.higher_is_better() { "↑" } else { "↓" };
            (format!("{} {arrow}", c.title()), format!("{:.4}", report.get(c)))
        })
        .collect();
    let width = rows.iter().map(|(k, _)| k.chars().count()).max().unwrap_or(0);
    rows.iter().map(|(k, v)| format!("{k}{}  {v}\n", " ".repeat(width - k.chars().count()))).collect()
}

pub fn evaluate(args: &EvaluateArgs) -> Result<()> {
    let mut manifest = RunManifest::new("evaluate");
    let model = MlsplModel::load(&args.model).with_context(|| format!("loading {}", args.model.display()))?;
    let t = Instant::now();
    let ds = args.data.load()?;
    manifest.timings.insert("load".into(), t.elapsed().as_secs_f64());
    manifest.dataset = Some(DatasetIdentity::new(&args.data, &ds)?);
    manifest.checkpoint = Some(FileDigest::of(&args.model)?);

    let t = Instant::now();
    let (prediction, report) = model.evaluate(&ds)?;
    manifest.timings.insert("evaluate".into(), t.elapsed().as_secs_f64());

    create_out(&args.out)?;
    let out = EvaluationOutput { tool: TOOL, n_instances: ds.n_instances(), n_labels: ds.n_labels(), report };
    write_json(&args.out, REPORT_JSON, &out)?;
    let table = single_report_table(&report);
    write_text(&args.out, REPORT_TXT, &table)?;
    let file = File::create(args.out.join(SCORES_FILE))?;
    write_scores_csv(prediction.scores.view(), &model.label_names, BufWriter::new(file))?;
    manifest.seeds = vec![model.config.seed];
    manifest.config = Some(model.config.clone());
    write_json(&args.out, MANIFEST_FILE, &manifest)?;
    print!("{table}");
    Ok(())
}

/// One repeat without its timing, so reports are byte-identical across reruns.
#[derive(Debug, Serialize)]
pub struct RepeatEntry {
    pub repeat: usize,
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub sweeps: usize,
    pub converged: bool,
    pub report: MetricsReport,
    pub grid: Option<GridResult>,
}

#[derive(Debug, Serialize)]
pub struct MethodEntry {
    pub method: String,
    pub aggregate: AggregateReport,
    pub repeats: Vec<RepeatEntry>,
}

#[derive(Debug, Serialize)]
pub struct BenchmarkOutput {
    pub tool: &'static str,
    pub protocol: Protocol,
    pub methods: Vec<MethodEntry>,
}

fn method_entry(result: BenchmarkResult) -> MethodEntry {
    MethodEntry {
        method: result.method,
        aggregate: result.aggregate,
        repeats: result
            .repeats
            .into_iter()
            .map(|r| RepeatEntry {
                repeat: r.repeat,
                seed: r.seed,
                n_train: r.n_train,
                n_test: r.n_test,
                sweeps: r.sweeps,
                converged: r.converged,
                report: r.report,
                grid: r.grid,
            })
            .collect(),
    }
}

fn protocol_of(args: &BenchmarkArgs, cfg: &TrainConfig) -> Protocol {
    Protocol { train_fraction: args.train_fraction, repeats: args.repeats, seed: cfg.seed }
}

fn record_timing(manifest: &mut RunManifest, result: &BenchmarkResult) {
    let total: f64 = result.repeats.iter().map(|r| r.train_seconds).sum();
    manifest.timings.insert(format!("train:{}", result.method), total);
}

pub fn benchmark_cmd(args: &BenchmarkArgs) -> Result<()> {
    let mut manifest = RunManifest::new("benchmark");
    let cfg = args.config.resolve()?;
    let protocol = protocol_of(args, &cfg);
    let grid = args.grid.then(GridSpec::default);
    let t = Instant::now();
    let ds = args.data.load()?;
    manifest.timings.insert("load".into(), t.elapsed().as_secs_f64());
    manifest.dataset = Some(DatasetIdentity::new(&args.data, &ds)?);

    let mut methods = vec![("mlspl".to_string(), cfg.clone())];
    if args.baselines {
        for mode in [BaselineMode::MllocEquivalent, BaselineMode::IndependentBinary] {
            methods.push((mode.name().to_string(), TrainConfig { baseline_mode: mode, ..cfg.clone() }));
        }
    }
    let t = Instant::now();
    let mut entries = Vec::new();
    for (name, method_cfg) in &methods {
        // the pace grid only matters when weights follow the schedule
        let grid = grid.as_ref().filter(|_| method_cfg.baseline_mode == BaselineMode::Full);
        let result = benchmark(&ds, name, method_cfg, &protocol, grid)?;
        record_timing(&mut manifest, &result);
        entries.push(method_entry(result));
    }
    manifest.timings.insert("total".into(), t.elapsed().as_secs_f64());
    finish_benchmark(args, manifest, cfg, protocol, grid, entries, None)
}

pub fn scheme_compare_cmd(args: &BenchmarkArgs) -> Result<()> {
    let mut manifest = RunManifest::new("scheme-compare");
    let cfg = args.config.resolve()?;
    let protocol = protocol_of(args, &cfg);
    let grid = args.grid.then(GridSpec::default);
    let t = Instant::now();
    let ds = args.data.load()?;
    manifest.timings.insert("load".into(), t.elapsed().as_secs_f64());
    manifest.dataset = Some(DatasetIdentity::new(&args.data, &ds)?);

    let t = Instant::now();
    let results = scheme_compare(&ds, &cfg, &protocol, grid.as_ref())?;
    manifest.timings.insert("total".into(), t.elapsed().as_secs_f64());
    let mut entries = Vec::new();
    for (_, result) in results {
        record_timing(&mut manifest, &result);
        entries.push(method_entry(result));
    }
    let csv = schemes_csv(&entries)?;
    finish_benchmark(args, manifest, cfg, protocol, grid, entries, Some(csv))
}

/// Long-format rows `(scheme, criterion, mean, std)`.
pub fn schemes_csv(entries: &[MethodEntry]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["scheme", "criterion", "mean", "std"])?;
    for e in entries {
        for c in Criterion::ALL {
            let s = e.aggregate.get(c);
            w.write_record([e.method.clone(), c.name().to_string(), s.mean.to_string(), s.std.to_string()])?;
        }
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn finish_benchmark(
    args: &BenchmarkArgs,
    mut manifest: RunManifest,
    cfg: TrainConfig,
    protocol: Protocol,
    grid: Option<GridSpec>,
    methods: Vec<MethodEntry>,
    schemes: Option<String>,
) -> Result<()> {
    create_out(&args.out)?;
    let columns: Vec<(String, AggregateReport)> = methods.iter().map(|m| (m.method.clone(), m.aggregate.clone())).collect();
    let table = format_table(&columns);
    write_text(&args.out, REPORT_TXT, &table)?;
    if let Some(csv) = schemes {
        write_text(&args.out, SCHEMES_FILE, &csv)?;
    }
    manifest.seeds = (0..protocol.repeats).map(|r| protocol.repeat_seed(r)).collect();
    let output = BenchmarkOutput { tool: TOOL, protocol: protocol.clone(), methods };
    write_json(&args.out, REPORT_JSON, &output)?;
    manifest.config = Some(cfg);
    manifest.protocol = Some(protocol);
    manifest.grid = grid;
    write_json(&args.out, MANIFEST_FILE, &manifest)?;
    print!("{table}");
    Ok(())
}

pub fn verification_table(reports: &[VerificationReport]) -> String {
    let mut out = String::new();
    for r in reports {
        out.push_str(&format!("{}: {}\n", r.scheme, if r.passed() { "PASS" } else { "FAIL" }));
        for c in &r.checks {
            out.push_str(&format!(
                "  {:<26} {}  worst {:.3e}  tol {:.1e}  samples {}\n",
                c.name,
                if c.passed { "ok  " } else { "FAIL" },
                c.worst,
                c.tolerance,
                c.samples
            ));
        }
    }
    out
}

pub fn verify_schemes(args: &VerifyArgs) -> Result<()> {
    let grid = VerificationGrid::default();
    let negated: Vec<NegatedRegularizer> = SchemeKind::ALL.iter().map(|&k| NegatedRegularizer(k)).collect();
    let schemes: Vec<&dyn SelfPacedFunction> = if args.corrupt {
        negated.iter().map(|s| s as &dyn SelfPacedFunction).collect()
    } else {
        SchemeKind::ALL.iter().map(|s| s as &dyn SelfPacedFunction).collect()
    };
    let reports: Vec<VerificationReport> = schemes.iter().map(|s| verify_scheme(*s, &grid)).collect();
    print!("{}", verification_table(&reports));
    if let Some(dir) = &args.out {
        create_out(dir)?;
        write_json(dir, VERIFY_FILE, &reports)?;
    }
    let failed: Vec<&str> = reports.iter().filter(|r| !r.passed()).map(|r| r.scheme.as_str()).collect();
    if !failed.is_empty() {
        bail!("verification failed for {}", failed.join(", "));
    }
    Ok(())
}
