use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use gendermix::estimator::{
    bootstrap_interval, default_bin_edges, partial_contributions, PartialMethod,
};
use gendermix::experiments::{
    export_report, run_partial_profile, run_sweep, write_partial_csv, write_report_csv,
    write_report_json, PartialProfileConfig, ReportFormat, SweepConfig,
};
use gendermix::numfmt::format_sig12;
use gendermix::reference::{
    filter_min_count, ingest_canonical_csv, ingest_ssa_year_files, letter_table,
    merge as merge_tables, read_target_csv, read_target_list, IngestOptions, YearRange,
};
use gendermix::rng::RNG_ALGORITHM;
use gendermix::simulator::{default_beta0_grid, generate, Sampling};
use gendermix::{
    estimate as run_estimate, Error, Method, ReferenceTable, Result, TableMode, TargetList,
};
use serde::Serialize;
use serde_json::json;

use crate::tables::{self, report_skipped};

const TOOL: &str = "gendermix";
const VERSION: &str = env!("CARGO_PKG_VERSION");

pub struct Context {
    pub config_file: Option<PathBuf>,
    pub threads: Option<usize>,
}

impl Context {
    /// Resolved settings of a command, for embedding in its outputs.
    fn record<T: Serialize>(&self, command: &str, args: &T) -> serde_json::Value {
        json!({
            "command": command,
            "args": args,
            "config_file": self.config_file,
            "threads": self.threads,
        })
    }
}

fn write_stdout(bytes: &[u8]) -> Result<()> {
    let mut out = io::stdout().lock();
    out.write_all(bytes)
        .and_then(|()| out.flush())
        .map_err(|e| Error::io("<stdout>", e))
}

fn pretty_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn usage(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

#[derive(Clone, Copy, Debug, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    /// `name,female,male` CSV
    Canonical,
    /// Directory of SSA `yobYYYY.txt` files
    Ssa,
}

#[derive(Debug, Args, Serialize)]
pub struct IngestArgs {
    #[arg(long, value_enum, default_value = "canonical")]
    format: InputFormat,
    /// Input CSV file, or the directory of year files for `ssa`.
    #[arg(long)]
    input: PathBuf,
    /// Birth years to keep with `ssa`: `YYYY` or `FIRST-LAST`.
    #[arg(long, value_name = "RANGE")]
    years: Option<String>,
    /// Drop names with fewer individuals than this.
    #[arg(long, default_value_t = 100)]
    min_count: u64,
    /// Reduce the table to initial or last letters.
    #[arg(long, default_value = "none", value_name = "none|initial|last")]
    letters: TableMode,
    /// Keep only the first token of compound names.
    #[arg(long)]
    first_token: bool,
    #[arg(long)]
    output: PathBuf,
}

fn parse_years(s: &str) -> Result<YearRange> {
    let year = |t: &str| {
        t.trim()
            .parse::<u16>()
            .map_err(|_| usage(format!("bad year `{t}` in `{s}`")))
    };
    let range = match s.split_once('-') {
        Some((a, b)) => YearRange {
            first: year(a)?,
            last: year(b)?,
        },
        None => {
            let y = year(s)?;
            YearRange { first: y, last: y }
        }
    };
    if range.first > range.last {
        return Err(usage(format!("empty year range `{s}`")));
    }
    Ok(range)
}

pub fn ingest(args: &IngestArgs, ctx: &Context) -> Result<()> {
    let options = IngestOptions {
        first_token: args.first_token,
    };
    let ingested = match args.format {
        InputFormat::Canonical => {
            if args.years.is_some() {
                return Err(usage("--years applies to --format ssa only"));
            }
            ingest_canonical_csv(&args.input, options)?
        }
        InputFormat::Ssa => {
            let years = args.years.as_deref().map(parse_years).transpose()?;
            ingest_ssa_year_files(&args.input, years, options)?
        }
    };
    report_skipped(&args.input.display().to_string(), &ingested.skipped);
    let mut skipped = ingested.skipped;

    let mut table = filter_min_count(&ingested.value, args.min_count)?;
    if let Some(position) = args.letters.letter_position() {
        let reduced = letter_table(&table, position)?;
        report_skipped("letter reduction", &reduced.skipped);
        skipped.extend(reduced.skipped);
        table = reduced.value;
    }

    let meta = tables::describe(&table, &skipped, ctx.record("ingest", args));
    tables::save(&table, &args.output, &meta)?;
    write_stdout(&pretty_json(&meta)?)
}

#[derive(Debug, Args, Serialize)]
pub struct MergeArgs {
    /// Tables to pool (repeat the flag or separate with commas).
    #[arg(long, required = true, num_args = 1.., value_delimiter = ',')]
    input: Vec<PathBuf>,
    #[arg(long)]
    output: PathBuf,
}

pub fn merge(args: &MergeArgs, ctx: &Context) -> Result<()> {
    let loaded: Vec<ReferenceTable> = args
        .input
        .iter()
        .map(|p| tables::load(p))
        .collect::<Result<_>>()?;
    let table = merge_tables(&loaded)?;
    let meta = tables::describe(&table, &[], ctx.record("merge", args));
    tables::save(&table, &args.output, &meta)?;
    write_stdout(&pretty_json(&meta)?)
}

#[derive(Clone, Copy, Debug, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TargetFormat {
    /// `name,count` CSV
    Csv,
    /// One name per line
    List,
}

#[derive(Debug, Args, Serialize)]
pub struct EstimateArgs {
    #[arg(long)]
    reference: PathBuf,
    #[arg(long)]
    target: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    target_format: TargetFormat,
    /// `ggem`, `m0`, `m1`, `m2`, or a full spec such as `m2:0.9`.
    #[arg(long, default_value = "ggem")]
    method: String,
    /// Cutoff probability for `m1` and `m2`.
    #[arg(long)]
    cutoff: Option<f64>,
    /// Reference-side imbalance for `ggem`.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    gamma_star: f64,
    /// Number of bootstrap resamples for a percentile interval.
    #[arg(long, value_name = "N")]
    bootstrap: Option<u32>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON report on stdout (the default).
    #[arg(long, conflicts_with = "csv")]
    json: bool,
    /// One-row CSV report on stdout.
    #[arg(long)]
    csv: bool,
    /// Analyse initial or last letters instead of names.
    #[arg(long, default_value = "none", value_name = "none|initial|last")]
    letters: TableMode,
    /// Keep only the first token of compound target names.
    #[arg(long)]
    first_token: bool,
    /// Add the per-inclination partial contributions (JSON only).
    #[arg(long)]
    partial: bool,
}

fn resolve_method(name: &str, cutoff: Option<f64>, gamma_star: f64) -> Result<Method> {
    let method = if name.contains(':') {
        if cutoff.is_some() {
            return Err(usage(
                "give the cutoff either in --method or with --cutoff, not both",
            ));
        }
        name.parse::<Method>()?
    } else {
        match name {
            "m0" | "method0" | "ggem" if cutoff.is_some() => {
                return Err(usage(format!("--cutoff does not apply to `{name}`")))
            }
            "m0" | "method0" => Method::Method0,
            "m1" | "method1" => Method::Method1 {
                cutoff: cutoff.ok_or_else(|| usage("`m1` needs --cutoff"))?,
            },
            "m2" | "method2" => Method::Method2 {
                cutoff: cutoff.ok_or_else(|| usage("`m2` needs --cutoff"))?,
            },
            "ggem" => Method::Ggem { gamma_star },
            _ => return Err(usage(format!("unknown method `{name}`"))),
        }
    };
    if gamma_star != 0.0 && !matches!(method, Method::Ggem { .. }) {
        return Err(usage("--gamma-star applies to ggem only"));
    }
    method.validate()?;
    Ok(method)
}

const ESTIMATE_CSV_COLUMNS: [&str; 21] = [
    "method",
    "cutoff",
    "gamma_star",
    "beta",
    "gamma",
    "alpha",
    "clamped",
    "attributed_female",
    "attributed_male",
    "individuals_total",
    "individuals_matched",
    "individuals_used",
    "unique_names_total",
    "unique_names_matched",
    "bootstrap_low",
    "bootstrap_high",
    "bootstrap_repeats",
    "bootstrap_failures",
    "seed",
    "letters",
    "tool_version",
];

pub fn estimate(args: &EstimateArgs, ctx: &Context) -> Result<()> {
    let method = resolve_method(&args.method, args.cutoff, args.gamma_star)?;
    if args.partial && args.csv {
        return Err(usage("--partial output is available in JSON only"));
    }
    let partial_method = match (args.partial, method) {
        (false, _) => None,
        (true, Method::Method0) => Some(PartialMethod::Method0),
        (true, Method::Ggem { gamma_star }) => Some(PartialMethod::Ggem { gamma_star }),
        (true, _) => return Err(usage("--partial supports m0 and ggem only")),
    };

    let reference = tables::load(&args.reference)?;
    let options = IngestOptions {
        first_token: args.first_token,
    };
    let ingested = match args.target_format {
        TargetFormat::Csv => read_target_csv(&args.target, options)?,
        TargetFormat::List => read_target_list(&args.target, options)?,
    };
    report_skipped(&args.target.display().to_string(), &ingested.skipped);
    let (reference, target) = project(reference, ingested.value, args.letters)?;

    let mut report = run_estimate(&target, &reference, method)?;
    if let Some(n) = args.bootstrap {
        report.bootstrap = Some(bootstrap_interval(
            &target, &reference, method, n, args.seed,
        )?);
    }
    if report.clamped {
        eprintln!("note: the composition estimate sits at the boundary (clamped)");
    }

    if args.csv {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(ESTIMATE_CSV_COLUMNS)?;
        let b = report.bootstrap;
        let gamma_star = match method {
            Method::Ggem { gamma_star } => Some(gamma_star),
            _ => None,
        };
        let alpha = report.composition.alpha();
        let c = &report.coverage;
        w.write_record([
            method.name().to_owned(),
            format_sig12(method.cutoff()),
            format_sig12(gamma_star),
            format_sig12(Some(report.beta())),
            format_sig12(Some(report.gamma())),
            if alpha.is_infinite() {
                "inf".to_owned()
            } else {
                format_sig12(Some(alpha))
            },
            report.clamped.to_string(),
            format_sig12(Some(report.attributed_female)),
            format_sig12(Some(report.attributed_male)),
            format_sig12(Some(c.individuals_total)),
            format_sig12(Some(c.individuals_matched)),
            format_sig12(Some(c.individuals_used)),
            c.unique_names_total.to_string(),
            c.unique_names_matched.to_string(),
            format_sig12(b.map(|b| b.low)),
            format_sig12(b.map(|b| b.high)),
            b.map(|b| b.repeats.to_string()).unwrap_or_default(),
            b.map(|b| b.failures.to_string()).unwrap_or_default(),
            args.seed.to_string(),
            reference.mode().to_string(),
            VERSION.to_owned(),
        ])?;
        let bytes = w
            .into_inner()
            .map_err(|e| Error::io("<csv writer>", e.into_error()))?;
        return write_stdout(&bytes);
    }

    let partial = partial_method
        .map(|m| partial_contributions(&target, &reference, &default_bin_edges(), m))
        .transpose()?;
    let out = json!({
        "tool": TOOL,
        "version": VERSION,
        "config": ctx.record("estimate", args),
        "method": method.to_string(),
        "reference": {
            "source_id": reference.source_id(),
            "mode": reference.mode(),
            "names": reference.len(),
            "individuals": reference.total_individuals(),
        },
        "target": {
            "path": args.target,
            "names": target.len(),
            "individuals": target.total_individuals(),
            "skipped_records": ingested.skipped.len(),
        },
        "estimate": report,
        "partial": partial,
    });
    write_stdout(&pretty_json(&out)?)
}

/// Bring reference and target to the requested key level.
fn project(
    reference: ReferenceTable,
    target: TargetList,
    mode: TableMode,
) -> Result<(ReferenceTable, TargetList)> {
    let Some(position) = mode.letter_position() else {
        if reference.mode() != TableMode::FullName {
            return Err(Error::ModeMismatch {
                expected: TableMode::FullName,
                found: reference.mode(),
            });
        }
        return Ok((reference, target));
    };
    let reference = if reference.mode() == mode {
        reference
    } else {
        let reduced = letter_table(&reference, position)?;
        report_skipped("reference letter reduction", &reduced.skipped);
        reduced.value
    };
    let reduced = target.to_letters(position)?;
    report_skipped("target letter reduction", &reduced.skipped);
    Ok((reference, reduced.value))
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long)]
    reference: PathBuf,
    /// Female fraction of the population.
    #[arg(long)]
    beta0: f64,
    /// Number of individuals.
    #[arg(long)]
    size: u64,
    #[arg(long, default_value = "natural", value_name = "natural|uniform")]
    sampling: Sampling,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Target `name,count` CSV to write.
    #[arg(long)]
    output: PathBuf,
    /// Truth `name,female,male` CSV [default: <output stem>.truth.csv].
    #[arg(long)]
    truth: Option<PathBuf>,
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

pub fn simulate(args: &SimulateArgs, ctx: &Context) -> Result<()> {
    let reference = tables::load(&args.reference)?;
    let population = generate(&reference, args.beta0, args.size, args.sampling, args.seed)?;
    let truth = args
        .truth
        .clone()
        .unwrap_or_else(|| sibling(&args.output, ".truth.csv"));
    population.export(&args.output, &truth)?;

    let params = json!({
        "tool": TOOL,
        "version": VERSION,
        "rng_algorithm": RNG_ALGORITHM,
        "config": ctx.record("simulate", args),
        "reference_source": reference.source_id(),
        "target": args.output,
        "truth": truth,
        "seed": population.seed(),
        "beta_true": population.beta_true(),
        "female": population.female_total(),
        "male": population.male_total(),
        "names": population.len(),
    });
    let bytes = pretty_json(&params)?;
    write_file(&sibling(&args.output, ".params.json"), &bytes)?;
    write_stdout(&bytes)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Figure {
    /// Errors of every method over the composition grid.
    Fig3,
    /// Partial contributions by name inclination at one composition.
    Fig4,
    /// Method 0 and gGEM on letters over the composition grid.
    Fig6,
}

#[derive(Debug, Args, Serialize)]
pub struct BenchArgs {
    /// Table the synthetic populations are drawn from.
    #[arg(long)]
    build_ref: PathBuf,
    /// Table the estimators use [default: the build table].
    #[arg(long)]
    analyze_ref: Option<PathBuf>,
    /// Comma-separated method specs, e.g. `m0,m1:0.5,m2:0.9,ggem`.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    /// `default` for the 52-point grid, or a file of female fractions.
    #[arg(long, default_value = "default")]
    grid: String,
    #[arg(long, default_value_t = 1000)]
    repeats: u32,
    /// Individuals per synthetic population.
    #[arg(long, default_value_t = 10_000)]
    size: u64,
    #[arg(long, default_value = "natural", value_name = "natural|uniform")]
    sampling: Sampling,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Key level of the analysis [default: names; initial for fig6].
    #[arg(long, value_name = "names|initial|last")]
    mode: Option<TableMode>,
    /// Report file [default: stdout].
    #[arg(long)]
    output: Option<PathBuf>,
    /// Report format [default: csv for figure presets, json otherwise].
    #[arg(long, value_name = "json|csv")]
    format: Option<ReportFormat>,
    /// Preset sweep layout with its own default methods, mode and format.
    #[arg(long, value_enum)]
    figure: Option<Figure>,
    /// Composition for the fig4 preset.
    #[arg(long, default_value_t = 0.04)]
    beta0: f64,
}

fn read_grid(spec: &str) -> Result<Vec<f64>> {
    if spec == "default" {
        return Ok(default_beta0_grid());
    }
    let path = Path::new(spec);
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(|l| l.split([',', ' ', '\t']))
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| usage(format!("{}: bad grid value `{t}`", path.display())))
        })
        .collect()
}

fn default_methods(figure: Option<Figure>) -> Vec<Method> {
    match figure {
        Some(Figure::Fig4) | Some(Figure::Fig6) => vec![Method::Method0, Method::ggem()],
        _ => {
            let mut m = Vec::new();
            for cutoff in [0.5, 0.7, 0.9] {
                m.push(Method::Method1 { cutoff });
            }
            for cutoff in [0.5, 0.7, 0.9] {
                m.push(Method::Method2 { cutoff });
            }
            m.push(Method::ggem());
            m
        }
    }
}

pub fn bench(args: &BenchArgs, ctx: &Context) -> Result<()> {
    let build_id = args.build_ref.display().to_string();
    let analyze_path = args.analyze_ref.as_ref().unwrap_or(&args.build_ref);
    let analyze_id = analyze_path.display().to_string();
    let mut tables_by_id = BTreeMap::new();
    tables_by_id.insert(build_id.clone(), tables::load(&args.build_ref)?);
    if analyze_id != build_id {
        tables_by_id.insert(analyze_id.clone(), tables::load(analyze_path)?);
    }

    let methods = args
        .methods
        .clone()
        .unwrap_or_else(|| default_methods(args.figure));
    let mode = args.mode.unwrap_or(match args.figure {
        Some(Figure::Fig6) => TableMode::InitialLetter,
        _ => TableMode::FullName,
    });
    let format = args.format.unwrap_or(if args.figure.is_some() {
        ReportFormat::Csv
    } else {
        ReportFormat::Json
    });
    let record = ctx.record("bench", args);

    if args.figure == Some(Figure::Fig4) {
        if mode != TableMode::FullName {
            return Err(usage("the fig4 preset works on full names only"));
        }
        let partial_methods = methods
            .iter()
            .map(|m| match *m {
                Method::Method0 => Ok(PartialMethod::Method0),
                Method::Ggem { gamma_star } => Ok(PartialMethod::Ggem { gamma_star }),
                other => Err(usage(format!(
                    "the fig4 preset supports m0 and ggem, not `{other}`"
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        let config = PartialProfileConfig {
            reference_build: build_id,
            reference_analyze: analyze_id,
            methods: partial_methods,
            beta0: args.beta0,
            repeats: args.repeats,
            population_size: args.size,
            sampling: args.sampling,
            seed: args.seed,
            bin_edges: default_bin_edges(),
        };
        eprintln!(
            "bench: fig4 profile at beta0 = {} over {} population(s)",
            args.beta0, args.repeats
        );
        let report = run_partial_profile(&config, &tables_by_id)?;
        let bytes = match format {
            ReportFormat::Json => pretty_json(&json!({ "cli": record, "report": report }))?,
            ReportFormat::Csv => {
                let mut buf = Vec::new();
                write_partial_csv(&report, &mut buf)?;
                buf
            }
        };
        return emit(args.output.as_deref(), &bytes, format, &record);
    }

    let config = SweepConfig {
        reference_build: build_id,
        reference_analyze: analyze_id,
        methods,
        beta0_grid: read_grid(&args.grid)?,
        repeats: args.repeats,
        population_size: args.size,
        sampling: args.sampling,
        seed: args.seed,
        mode,
    };
    eprintln!(
        "bench: {} grid point(s) x {} repeat(s) x {} method(s), mode {}",
        config.beta0_grid.len(),
        config.repeats,
        config.methods.len(),
        config.mode
    );
    let report = run_sweep(&config, &tables_by_id)?;
    let failed: u32 = report.cells.iter().map(|c| c.failures).sum();
    if failed > 0 {
        eprintln!(
            "note: {failed} method run(s) could not produce an estimate; see the failures column"
        );
    }

    match (&args.output, format) {
        (Some(path), ReportFormat::Json) => {
            export_report(&report, ReportFormat::Json, path)?;
            Ok(())
        }
        (Some(path), ReportFormat::Csv) => {
            export_report(&report, ReportFormat::Csv, path)?;
            write_sidecar(path, &record)
        }
        (None, ReportFormat::Json) => {
            let mut out = Vec::new();
            write_report_json(&report, &mut out)?;
            write_stdout(&out)
        }
        (None, ReportFormat::Csv) => {
            let mut out = Vec::new();
            write_report_csv(&report, &mut out)?;
            write_stdout(&out)
        }
    }
}

/// CSV reports cannot carry provenance, so it goes next to them.
fn write_sidecar(path: &Path, record: &serde_json::Value) -> Result<()> {
    let meta = json!({
        "tool": TOOL,
        "version": VERSION,
        "rng_algorithm": RNG_ALGORITHM,
        "config": record,
    });
    write_file(&tables::meta_path(path), &pretty_json(&meta)?)
}

fn emit(
    output: Option<&Path>,
    bytes: &[u8],
    format: ReportFormat,
    record: &serde_json::Value,
) -> Result<()> {
    match output {
        Some(path) => {
            write_file(path, bytes)?;
            if format == ReportFormat::Csv {
                write_sidecar(path, record)?;
            }
            Ok(())
        }
        None => write_stdout(bytes),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_flags_resolve() {
        assert_eq!(resolve_method("m0", None, 0.0).unwrap(), Method::Method0);
        assert_eq!(
            resolve_method("m2", Some(0.9), 0.0).unwrap(),
            Method::Method2 { cutoff: 0.9 }
        );
        assert_eq!(
            resolve_method("m1:0.7", None, 0.0).unwrap(),
            Method::Method1 { cutoff: 0.7 }
        );
        assert_eq!(
            resolve_method("ggem", None, 0.2).unwrap(),
            Method::Ggem { gamma_star: 0.2 }
        );
        assert!(resolve_method("m1", None, 0.0).is_err());
        assert!(resolve_method("m1", Some(0.4), 0.0).is_err());
        assert!(resolve_method("m0", Some(0.9), 0.0).is_err());
        assert!(resolve_method("m2:0.9", Some(0.9), 0.0).is_err());
        assert!(resolve_method("m0", None, 0.3).is_err());
        assert!(resolve_method("ggem", None, 1.0).is_err());
    }

    #[test]
    fn year_ranges_parse() {
        assert_eq!(
            parse_years("1990").unwrap(),
            YearRange {
                first: 1990,
                last: 1990
            }
        );
        assert_eq!(
            parse_years("1880-2017").unwrap(),
            YearRange {
                first: 1880,
                last: 2017
            }
        );
        assert!(parse_years("2017-1880").is_err());
        assert!(parse_years("x").is_err());
    }

    #[test]
    fn default_grid_has_52_points() {
        assert_eq!(read_grid("default").unwrap().len(), 52);
    }

    #[test]
    fn fig3_preset_covers_seven_estimators() {
        assert_eq!(default_methods(Some(Figure::Fig3)).len(), 7);
        assert_eq!(
            default_methods(Some(Figure::Fig6)),
            vec![Method::Method0, Method::ggem()]
        );
    }
}
