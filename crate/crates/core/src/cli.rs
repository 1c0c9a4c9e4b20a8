//! Command dispatch and artifact writing for the `bornlab` binary.
//!
//! Every ρ-bearing command writes rows with the column order of [`RHO_COLUMNS`],
//! with floats at 17 significant digits and an explicit `rho_defined` flag.
//! Undefined ρ is an empty CSV field (`null` in JSON), never a sentinel number.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config::{OutputFormat, RunConfig};
use crate::experiment::{record_rates, run_experiment, summarize, CountsRecord, EstimateOptions};
use crate::measure::{
    interference_term, sorkin, Combination, PathAmplitudes, ProbabilityRule, ProbabilityVector,
    SorkinResult,
};
use crate::rng::{substream, DOMAIN_HIERARCHY};
use crate::systematics::{
    detector_rho_sweep, max_abs_rho, misalignment_rho_sweep, poisson_sigma, power_sigma_sweep,
    rho_curve, RhoPoint,
};
use crate::{Error, Result};

pub const RHO_COLUMNS: [&str; 16] = [
    "position_u",
    "p0",
    "pA",
    "pB",
    "pC",
    "pAB",
    "pBC",
    "pCA",
    "pABC",
    "iAB",
    "iBC",
    "iCA",
    "epsilon",
    "delta",
    "rho",
    "rho_defined",
];

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "BORNLAB_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Patterns,
    Sorkin,
    Run,
    SweepPower,
    SweepMask,
    SweepDetector,
    Hierarchy,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::Patterns,
        Command::Sorkin,
        Command::Run,
        Command::SweepPower,
        Command::SweepMask,
        Command::SweepDetector,
        Command::Hierarchy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Patterns => "patterns",
            Command::Sorkin => "sorkin",
            Command::Run => "run",
            Command::SweepPower => "sweep-power",
            Command::SweepMask => "sweep-mask",
            Command::SweepDetector => "sweep-detector",
            Command::Hierarchy => "hierarchy",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown command {s:?}")))
    }
}

/// What a successful dispatch produced.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub summary: Value,
    pub warnings: Vec<String>,
    /// Human-readable report lines for stdout.
    pub report: Vec<String>,
}

/// Builds the global worker pool, honouring [`THREADS_ENV`] when set.
pub fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::invalid(format!("{THREADS_ENV} must be a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))
}

/// 17 significant digits.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// A ρ row: position, the eight values, pair terms, ε, δ and ρ.
#[derive(Debug, Clone, Copy)]
struct RhoRow {
    u: f64,
    values: [f64; 8],
    result: SorkinResult,
}

impl From<&RhoPoint> for RhoRow {
    fn from(p: &RhoPoint) -> Self {
        Self {
            u: p.u,
            values: p.values,
            result: p.result,
        }
    }
}

impl RhoRow {
    fn fields(&self) -> Vec<String> {
        let r = &self.result;
        let mut out = vec![format_float(self.u)];
        out.extend(self.values.iter().map(|&v| format_float(v)));
        out.extend(
            [r.i_ab, r.i_bc, r.i_ca, r.epsilon, r.delta]
                .into_iter()
                .map(format_float),
        );
        out.push(r.rho.map(format_float).unwrap_or_default());
        out.push(r.rho_defined().to_string());
        out
    }

    fn json(&self) -> Map<String, Value> {
        let r = &self.result;
        let mut m = Map::new();
        m.insert("position_u".into(), json!(self.u));
        for (c, v) in Combination::ALL.iter().zip(self.values) {
            m.insert(
                format!(
                    "p{}",
                    if *c == Combination::Zero {
                        "0"
                    } else {
                        c.label()
                    }
                ),
                json!(v),
            );
        }
        m.insert("iAB".into(), json!(r.i_ab));
        m.insert("iBC".into(), json!(r.i_bc));
        m.insert("iCA".into(), json!(r.i_ca));
        m.insert("epsilon".into(), json!(r.epsilon));
        m.insert("delta".into(), json!(r.delta));
        m.insert("rho".into(), json!(r.rho));
        m.insert("rho_defined".into(), json!(r.rho_defined()));
        m
    }
}

/// One table of output: header plus rows of already-formatted fields, and
/// the same rows as JSON objects.
struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
    json_rows: Vec<Value>,
}

impl Table {
    fn rho(rows: &[RhoRow]) -> Self {
        Self::rho_with_extra(rows, None)
    }

    fn rho_with_extra(rows: &[RhoRow], extra: Option<(&str, Vec<Option<f64>>)>) -> Self {
        let mut header: Vec<String> = RHO_COLUMNS.iter().map(|s| s.to_string()).collect();
        let mut out_rows: Vec<Vec<String>> = rows.iter().map(RhoRow::fields).collect();
        let mut json_rows: Vec<Map<String, Value>> = rows.iter().map(RhoRow::json).collect();
        if let Some((name, values)) = extra {
            header.push(name.to_string());
            for ((row, obj), v) in out_rows.iter_mut().zip(json_rows.iter_mut()).zip(values) {
                row.push(v.map(format_float).unwrap_or_default());
                obj.insert(name.to_string(), json!(v));
            }
        }
        Self {
            header,
            rows: out_rows,
            json_rows: json_rows.into_iter().map(Value::Object).collect(),
        }
    }

    fn write(&self, path: &Path, format: OutputFormat) -> Result<()> {
        let bytes = match format {
            OutputFormat::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                let io = |e: csv::Error| Error::Format(e.to_string());
                w.write_record(&self.header).map_err(io)?;
                for row in &self.rows {
                    w.write_record(row).map_err(io)?;
                }
                w.into_inner().map_err(|e| Error::Format(e.to_string()))?
            }
            OutputFormat::Json => {
                let mut s = serde_json::to_string_pretty(&self.json_rows)
                    .map_err(|e| Error::Format(e.to_string()))?;
                s.push('\n');
                s.into_bytes()
            }
        };
        write_file(path, &bytes)
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn extension(format: OutputFormat) -> &'static str {
    match format {
        OutputFormat::Csv => "csv",
        OutputFormat::Json => "json",
    }
}

/// Reads a counts file with columns `combination,counts,dwell_s`: eight rows,
/// or eight rows per value of an optional `repetition` column.
pub fn read_counts(path: &Path) -> Result<Vec<CountsRecord>> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_counts(&text)
}

pub fn parse_counts(text: &str) -> Result<Vec<CountsRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| Error::Format(e.to_string()))?
        .clone();
    let find = |name: &str| header.iter().position(|h| h == name);
    let expected = ["combination", "counts", "dwell_s"];
    let columns: Vec<usize> = expected.iter().filter_map(|name| find(name)).collect();
    if columns.len() != expected.len() {
        return Err(Error::Format(format!(
            "counts header must contain {}, got {}",
            expected.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let repetition_column = find("repetition");
    let reference_column = find("reference_counts");

    let mut records: Vec<CountsRecord> = Vec::new();
    for (slot, row) in reader.records().enumerate() {
        let row = row.map_err(|e| Error::Format(e.to_string()))?;
        let field = |i: usize, what: &str| -> Result<&str> {
            row.get(i)
                .ok_or_else(|| Error::Format(format!("row {}: missing {what}", slot + 1)))
        };
        let number = |i: usize, what: &str| -> Result<f64> {
            let text = field(i, what)?;
            text.parse::<f64>()
                .map_err(|_| Error::Format(format!("row {}: bad {what} {text:?}", slot + 1)))
        };
        let repetition = match repetition_column {
            Some(i) => {
                let text = field(i, "repetition")?;
                text.parse::<usize>().map_err(|_| {
                    Error::Format(format!("row {}: bad repetition {text:?}", slot + 1))
                })?
            }
            None => 0,
        };
        let reference_counts = match reference_column {
            Some(i) if !field(i, "reference_counts")?.is_empty() => {
                Some(number(i, "reference_counts")?)
            }
            _ => None,
        };
        let entry = crate::experiment::CountEntry {
            combination: Combination::from_label(field(columns[0], "combination")?)?,
            counts: number(columns[1], "counts")?,
            dwell_time: number(columns[2], "dwell_s")?,
            slot: slot as u64,
            reference_counts,
        };
        match records.last_mut() {
            Some(r) if r.repetition == repetition => r.entries.push(entry),
            _ => {
                if records.iter().any(|r| r.repetition == repetition) {
                    return Err(Error::Format(format!(
                        "row {}: rows of repetition {repetition} are not contiguous",
                        slot + 1
                    )));
                }
                records.push(CountsRecord {
                    repetition,
                    entries: vec![entry],
                });
            }
        }
    }
    if records.is_empty() {
        return Err(Error::Format("counts file has no rows".into()));
    }
    for r in &records {
        r.validate()?;
    }
    Ok(records)
}

/// Maximum |I_k| over random amplitude triples (or k-tuples), relative to
/// max(1, largest probability involved), for each order in `orders`.
#[derive(Debug, Clone, Serialize)]
pub struct HierarchyLine {
    pub order: usize,
    pub samples: usize,
    pub max_abs_term: f64,
    pub max_relative: f64,
}

pub fn hierarchy_audit(
    rule: &ProbabilityRule,
    orders: &[usize],
    samples: usize,
    seed: u64,
) -> Result<Vec<HierarchyLine>> {
    orders
        .iter()
        .map(|&k| {
            let mut rng = substream(seed, DOMAIN_HIERARCHY, k as u64, 0);
            let mut max_abs_term = 0.0f64;
            let mut max_relative = 0.0f64;
            for _ in 0..samples {
                let amps: Vec<Complex64> = (0..k.max(2))
                    .map(|_| {
                        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                    })
                    .collect();
                let amps = PathAmplitudes::new(amps)?;
                let paths: Vec<usize> = (0..k).collect();
                let term = interference_term(rule, &amps, &paths)?;
                let scale = rule.probability(amps.superpose(amps.all_paths())?).max(1.0);
                max_abs_term = max_abs_term.max(term.abs());
                max_relative = max_relative.max(term.abs() / scale);
            }
            Ok(HierarchyLine {
                order: k,
                samples,
                max_abs_term,
                max_relative,
            })
        })
        .collect()
}

struct Artifacts {
    tables: Vec<(String, Table)>,
    summary: Value,
    warnings: Vec<String>,
    report: Vec<String>,
}

fn all_undefined_warning(rows: &[RhoRow]) -> Vec<String> {
    if rows.iter().all(|r| !r.result.rho_defined()) {
        vec!["rho is undefined (delta below guard) at every point".to_string()]
    } else {
        Vec::new()
    }
}

fn rho_summary(points: &[RhoPoint]) -> Value {
    let defined = points.iter().filter(|p| p.result.rho_defined()).count();
    json!({
        "points": points.len(),
        "defined": defined,
        "undefined": points.len() - defined,
        "max_abs_rho": max_abs_rho(points),
    })
}

fn patterns(cfg: &RunConfig) -> Result<Artifacts> {
    let points = rho_curve(&cfg.plate()?, &cfg.mask()?, &cfg.grid(), cfg.guard)?;
    let rows: Vec<RhoRow> = points.iter().map(RhoRow::from).collect();
    let peak = points.iter().map(|p| p.values[7]).fold(0.0, f64::max);
    let max_eps = points
        .iter()
        .map(|p| p.result.epsilon.abs())
        .fold(0.0, f64::max);
    let mut summary = rho_summary(&points);
    summary["max_abs_epsilon_over_peak"] = json!(if peak > 0.0 { max_eps / peak } else { 0.0 });
    summary["abc_peak"] = json!(peak);
    Ok(Artifacts {
        warnings: all_undefined_warning(&rows),
        tables: vec![("patterns".into(), Table::rho(&rows))],
        summary,
        report: vec![format!("wrote {} pattern points", rows.len())],
    })
}

fn sorkin_counts(cfg: &RunConfig) -> Result<Artifacts> {
    let path = cfg.counts_input.as_ref().ok_or_else(|| {
        Error::config(
            "counts_input",
            "required by the sorkin command (or pass --counts)",
        )
    })?;
    let records = read_counts(path)?;
    let opts = EstimateOptions {
        dead_time_correction: cfg.dead_time_correction.then_some(cfg.dead_time),
        ..EstimateOptions::with_guard(cfg.guard)
    };
    let rows = records
        .iter()
        .map(|r| {
            let rates = record_rates(r, &opts)?;
            Ok(RhoRow {
                u: cfg.position_u,
                values: rates.values(),
                result: sorkin(&rates, cfg.guard),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let sigmas = records
        .iter()
        .map(|r| {
            let counts = r.counts()?;
            Ok(poisson_sigma(&counts, &sorkin(&counts, cfg.guard)))
        })
        .collect::<Result<Vec<_>>>()?;

    let (summary, report) = if let [row] = rows.as_slice() {
        let result = row.result;
        let line = match result.rho {
            Some(rho) => format!(
                "epsilon = {}  delta = {}  rho = {}",
                format_float(result.epsilon),
                format_float(result.delta),
                format_float(rho)
            ),
            None => format!("epsilon = {}  rho undefined", format_float(result.epsilon)),
        };
        (
            json!({
                "epsilon": result.epsilon,
                "delta": result.delta,
                "rho": result.rho,
                "poisson_sigma_rho": sigmas[0],
            }),
            vec![line],
        )
    } else {
        match summarize(rows.iter().map(|r| r.result.rho).collect()) {
            Ok(series) => (
                json!({
                    "repetitions": rows.len(),
                    "defined": series.defined,
                    "undefined": series.undefined,
                    "mean_rho": series.mean,
                    "sample_std": series.sample_std,
                    "standard_error": series.standard_error,
                }),
                vec![format!(
                    "rho = {} ± {} (SEM) over {} of {} repetitions",
                    format_float(series.mean),
                    format_float(series.standard_error),
                    series.defined,
                    rows.len()
                )],
            ),
            Err(_) => (
                json!({ "repetitions": rows.len(), "defined": 0 }),
                vec!["rho undefined in every repetition".into()],
            ),
        }
    };
    Ok(Artifacts {
        warnings: all_undefined_warning(&rows),
        tables: vec![("sorkin".into(), Table::rho(&rows))],
        summary,
        report,
    })
}

fn counts_table(records: &[CountsRecord]) -> Table {
    let header = [
        "repetition",
        "slot",
        "combination",
        "counts",
        "dwell_s",
        "reference_counts",
    ]
    .map(String::from)
    .to_vec();
    let mut rows = Vec::new();
    let mut json_rows = Vec::new();
    for r in records {
        for e in &r.entries {
            rows.push(vec![
                r.repetition.to_string(),
                e.slot.to_string(),
                e.combination.label().to_string(),
                format_float(e.counts),
                format_float(e.dwell_time),
                e.reference_counts.map(format_float).unwrap_or_default(),
            ]);
            json_rows.push(json!({
                "repetition": r.repetition,
                "slot": e.slot,
                "combination": e.combination.label(),
                "counts": e.counts,
                "dwell_s": e.dwell_time,
                "reference_counts": e.reference_counts,
            }));
        }
    }
    Table {
        header,
        rows,
        json_rows,
    }
}

fn run(cfg: &RunConfig) -> Result<Artifacts> {
    let records = run_experiment(
        &cfg.plate()?,
        &cfg.mask()?,
        &cfg.power_model(),
        &cfg.detector(),
        &cfg.experiment(),
    )?;
    let opts = EstimateOptions {
        dead_time_correction: cfg.dead_time_correction.then_some(cfg.dead_time),
        ..EstimateOptions::with_guard(cfg.guard)
    };
    let rows = records
        .iter()
        .map(|r| {
            let rates = record_rates(r, &opts)?;
            Ok(RhoRow {
                u: cfg.position_u,
                values: rates.values(),
                result: sorkin(&rates, cfg.guard),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut warnings = all_undefined_warning(&rows);
    let (summary, report) = match summarize(rows.iter().map(|r| r.result.rho).collect()) {
        Ok(series) => (
            json!({
                "repetitions": records.len(),
                "defined": series.defined,
                "undefined": series.undefined,
                "mean_rho": series.mean,
                "sample_std": series.sample_std,
                "standard_error": series.standard_error,
            }),
            vec![format!(
                "rho = {} ± {} (SEM), std {}, {} of {} repetitions defined",
                format_float(series.mean),
                format_float(series.standard_error),
                format_float(series.sample_std),
                series.defined,
                records.len()
            )],
        ),
        Err(Error::EmptySeries { undefined }) => {
            warnings.push(format!("no defined rho in {undefined} repetitions"));
            (
                json!({"repetitions": records.len(), "defined": 0, "undefined": undefined}),
                Vec::new(),
            )
        }
        Err(e) => return Err(e),
    };
    Ok(Artifacts {
        tables: vec![
            ("run".into(), Table::rho(&rows)),
            ("run_counts".into(), counts_table(&records)),
        ],
        summary,
        warnings,
        report,
    })
}

fn sweep_power(cfg: &RunConfig) -> Result<Artifacts> {
    let sweep = power_sigma_sweep(&cfg.plate()?, &cfg.mask()?, &cfg.grid(), cfg.guard)?;
    let rows: Vec<RhoRow> = sweep.iter().map(|p| RhoRow::from(&p.point)).collect();
    let sigmas: Vec<Option<f64>> = sweep.iter().map(|p| p.sigma_per_dp).collect();
    let defined: Vec<f64> = sigmas.iter().flatten().copied().collect();
    let points: Vec<RhoPoint> = sweep.iter().map(|p| p.point).collect();
    let mut summary = rho_summary(&points);
    summary["min_sigma_rho_per_dp"] = json!(defined.iter().copied().reduce(f64::min));
    summary["max_sigma_rho_per_dp"] = json!(defined.iter().copied().reduce(f64::max));
    Ok(Artifacts {
        warnings: all_undefined_warning(&rows),
        tables: vec![(
            "sweep-power".into(),
            Table::rho_with_extra(&rows, Some(("sigma_rho_per_dp", sigmas))),
        )],
        summary,
        report: Vec::new(),
    })
}

fn sweep_mask(cfg: &RunConfig) -> Result<Artifacts> {
    let sampler = cfg.displacement_distribution();
    let sweep = misalignment_rho_sweep(
        &cfg.plate()?,
        &cfg.mask()?,
        &sampler,
        &cfg.grid(),
        cfg.seed,
        cfg.guard,
    )?;
    let rows: Vec<RhoRow> = sweep.points.iter().map(RhoRow::from).collect();
    let mut summary = rho_summary(&sweep.points);
    summary["displacements"] = json!(sweep.displacements);
    let report = vec![format!(
        "max |rho| = {}",
        max_abs_rho(&sweep.points)
            .map(format_float)
            .unwrap_or_else(|| "undefined".into())
    )];
    Ok(Artifacts {
        warnings: all_undefined_warning(&rows),
        tables: vec![("sweep-mask".into(), Table::rho(&rows))],
        summary,
        report,
    })
}

fn sweep_detector(cfg: &RunConfig) -> Result<Artifacts> {
    let mut warnings = Vec::new();
    if cfg.plate_leakage != 0.0 || cfg.mask_leakage != 0.0 || cfg.mask_displacement != 0.0 {
        warnings.push(
            "sweep-detector ignores leakage and displacement: the detector is the only systematic"
                .to_string(),
        );
    }
    let plate = cfg.plate()?.with_leakage(0.0)?;
    let mask = cfg.mask()?.with_leakage(0.0)?.with_displacement(0.0);
    let points = detector_rho_sweep(
        &plate,
        &mask,
        &cfg.detector(),
        &cfg.scaling(),
        &cfg.grid(),
        cfg.guard,
    )?;
    let rows: Vec<RhoRow> = points.iter().map(RhoRow::from).collect();
    warnings.extend(all_undefined_warning(&rows));
    let center = points
        .iter()
        .min_by(|a, b| a.u.abs().total_cmp(&b.u.abs()))
        .and_then(|p| p.result.rho);
    let mut summary = rho_summary(&points);
    summary["rho_near_center"] = json!(center);
    let report = vec![format!(
        "max |rho| = {}",
        max_abs_rho(&points)
            .map(format_float)
            .unwrap_or_else(|| "undefined".into())
    )];
    Ok(Artifacts {
        tables: vec![("sweep-detector".into(), Table::rho(&rows))],
        summary,
        warnings,
        report,
    })
}

fn hierarchy(cfg: &RunConfig) -> Result<Artifacts> {
    let lines = hierarchy_audit(
        &cfg.probability_rule(),
        &[2, 3, 4, 5],
        cfg.hierarchy_samples,
        cfg.seed,
    )?;
    let header = ["order", "samples", "max_abs_term", "max_relative"]
        .map(String::from)
        .to_vec();
    let rows = lines
        .iter()
        .map(|l| {
            vec![
                l.order.to_string(),
                l.samples.to_string(),
                format_float(l.max_abs_term),
                format_float(l.max_relative),
            ]
        })
        .collect();
    let json_rows = lines
        .iter()
        .map(|l| serde_json::to_value(l).expect("plain struct"))
        .collect();
    let report = lines
        .iter()
        .filter(|l| l.order >= 3)
        .map(|l| {
            let verdict = if l.max_relative <= 1e-12 { "≤" } else { ">" };
            format!(
                "max |I_{}| {verdict} 1e-12·scale (max relative {})",
                l.order,
                format_float(l.max_relative)
            )
        })
        .collect();
    Ok(Artifacts {
        tables: vec![(
            "hierarchy".into(),
            Table {
                header,
                rows,
                json_rows,
            },
        )],
        summary: json!({ "orders": lines }),
        warnings: Vec::new(),
        report,
    })
}

/// Runs `command` and writes its tables plus a `<command>.manifest.json`
/// into `cfg.output_dir`.
pub fn dispatch(command: Command, cfg: &RunConfig) -> Result<Outcome> {
    cfg.validate()?;
    let artifacts = match command {
        Command::Patterns => patterns(cfg)?,
        Command::Sorkin => sorkin_counts(cfg)?,
        Command::Run => run(cfg)?,
        Command::SweepPower => sweep_power(cfg)?,
        Command::SweepMask => sweep_mask(cfg)?,
        Command::SweepDetector => sweep_detector(cfg)?,
        Command::Hierarchy => hierarchy(cfg)?,
    };

    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.clone(),
        source,
    })?;
    let mut files = Vec::new();
    for (name, table) in &artifacts.tables {
        let path = dir.join(format!("{name}.{}", extension(cfg.format)));
        table.write(&path, cfg.format)?;
        files.push(path);
    }

    let manifest = json!({
        "command": command.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "seed": cfg.seed,
        "config": cfg,
        "outputs": files
            .iter()
            .map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .collect::<Vec<_>>(),
        "summary": artifacts.summary,
        "warnings": artifacts.warnings,
    });
    let manifest_path = dir.join(format!("{}.manifest.json", command.name()));
    let mut text =
        serde_json::to_string_pretty(&manifest).map_err(|e| Error::Format(e.to_string()))?;
    text.push('\n');
    write_file(&manifest_path, text.as_bytes())?;
    files.push(manifest_path);

    Ok(Outcome {
        files,
        summary: artifacts.summary,
        warnings: artifacts.warnings,
        report: artifacts.report,
    })
}

/// Counts file for the eight probabilities of `pv`, one dwell each.
pub fn counts_csv(pv: &ProbabilityVector, dwell: f64) -> String {
    let mut out = String::from("combination,counts,dwell_s\n");
    for c in Combination::ALL {
        out.push_str(&format!(
            "{},{},{}\n",
            c.label(),
            format_float(pv.get(c)),
            dwell
        ));
    }
    out
}
