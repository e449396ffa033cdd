//! Method-comparison sweeps over synthetic populations.
//!
//! A sweep generates `repeats` populations at every grid value of the true
//! female fraction, runs every configured method on each population, and
//! reports the mean estimate, its spread across repeats, the error metrics
//! and the mean coverage. Population `(grid index i, repeat r)` is always
//! drawn with seed `derive_seed(config.seed, [i, r])`, so any grid point can
//! be recomputed on its own and reports are byte-identical across runs and
//! thread counts.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{
    partial_contributions, Matched, MatchedName, Method, PartialBin, PartialMethod,
};
use crate::numfmt::{format_sig12, sig12, sig12_opt};
use crate::reference::{letter_key, letter_table, ReferenceTable, TableMode};
use crate::rng::{derive_seed, RNG_ALGORITHM};
use crate::simulator::{LabeledPopulation, PopulationSampler, Sampling};

/// Signed error of an estimate, `beta - beta0`.
pub fn abs_error(beta: f64, beta0: f64) -> f64 {
    beta - beta0
}

/// Relative error of the minority-gender share, in percent:
/// `100 (min(beta, 1 - beta) - min(beta0, 1 - beta0)) / min(beta0, 1 - beta0)`.
/// Undefined for single-gender populations.
pub fn rel_error(beta: f64, beta0: f64) -> Option<f64> {
    let minority0 = beta0.min(1.0 - beta0);
    if minority0 <= 0.0 {
        return None;
    }
    Some(100.0 * (beta.min(1.0 - beta) - minority0) / minority0)
}

/// Share of a population recognized by a reference.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageStats {
    pub names_matched_frac: f64,
    pub individuals_matched_frac: f64,
    /// `None` when the population has no individuals of that gender.
    pub female_matched_frac: Option<f64>,
    pub male_matched_frac: Option<f64>,
}

#[derive(Default)]
struct CoverageTally {
    names: usize,
    names_matched: usize,
    female: f64,
    female_matched: f64,
    male: f64,
    male_matched: f64,
}

impl CoverageTally {
    fn add(&mut self, female: f64, male: f64, matched: bool) {
        self.names += 1;
        self.female += female;
        self.male += male;
        if matched {
            self.names_matched += 1;
            self.female_matched += female;
            self.male_matched += male;
        }
    }

    fn finish(&self) -> CoverageStats {
        let ratio = |a: f64, b: f64| (b > 0.0).then(|| a / b);
        CoverageStats {
            names_matched_frac: self.names_matched as f64 / self.names as f64,
            individuals_matched_frac: (self.female_matched + self.male_matched)
                / (self.female + self.male),
            female_matched_frac: ratio(self.female_matched, self.female),
            male_matched_frac: ratio(self.male_matched, self.male),
        }
    }
}

/// Coverage of a labeled population by a reference table, overall and per
/// true gender.
pub fn coverage_stats(population: &LabeledPopulation, reference: &ReferenceTable) -> CoverageStats {
    let mut tally = CoverageTally::default();
    for (key, c) in population.iter() {
        tally.add(c.female, c.male, reference.contains(key));
    }
    tally.finish()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    /// Table the populations are drawn from.
    pub reference_build: String,
    /// Table the estimators use; may differ from the build table.
    pub reference_analyze: String,
    pub methods: Vec<Method>,
    pub beta0_grid: Vec<f64>,
    pub repeats: u32,
    pub population_size: u64,
    pub sampling: Sampling,
    pub seed: u64,
    /// Populations are generated at name level and reduced to letters
    /// before analysis in the letter modes.
    pub mode: TableMode,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::InvalidArgument("repeats must be at least 1".into()));
        }
        if self.population_size == 0 {
            return Err(Error::InvalidArgument(
                "population size must be at least 1".into(),
            ));
        }
        if let Some(b) = self.beta0_grid.iter().find(|b| !(0.0..=1.0).contains(*b)) {
            return Err(Error::InvalidArgument(format!(
                "grid value {b} lies outside [0, 1]"
            )));
        }
        self.methods.iter().try_for_each(Method::validate)
    }
}

/// Aggregates for one `(beta0, method)` pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    #[serde(serialize_with = "sig12")]
    pub beta0: f64,
    pub method: Method,
    /// Mean of the per-population estimates; `None` if every repeat failed.
    #[serde(serialize_with = "sig12_opt")]
    pub mean_beta: Option<f64>,
    /// Standard deviation across repeats (n - 1 denominator, 0 for a single
    /// successful repeat).
    #[serde(serialize_with = "sig12_opt")]
    pub sigma_beta: Option<f64>,
    #[serde(serialize_with = "sig12_opt")]
    pub abs_error: Option<f64>,
    #[serde(serialize_with = "sig12_opt")]
    pub rel_error_pct: Option<f64>,
    #[serde(serialize_with = "sig12")]
    pub names_matched_frac: f64,
    #[serde(serialize_with = "sig12")]
    pub individuals_matched_frac: f64,
    #[serde(serialize_with = "sig12_opt")]
    pub female_matched_frac: Option<f64>,
    #[serde(serialize_with = "sig12_opt")]
    pub male_matched_frac: Option<f64>,
    pub repeats: u32,
    /// Repeats on which the method could not produce an estimate.
    pub failures: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub rng_algorithm: String,
    pub build_source: String,
    pub analyze_source: String,
    pub config: SweepConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub provenance: Provenance,
    pub cells: Vec<SweepCell>,
}

/// Seed of population `repeat` at grid point `grid_index`.
pub fn population_seed(seed: u64, grid_index: usize, repeat: u32) -> u64 {
    derive_seed(seed, &[grid_index as u64, u64::from(repeat)])
}

/// Analysis-side view of the build table: every build name mapped to its
/// (possibly letter-reduced) key, keys in canonical order.
struct Plan<'a> {
    sampler: PopulationSampler<'a>,
    /// build name index -> analysis key index; `None` if it has no key
    key_of: Vec<Option<usize>>,
    /// per analysis key: reference probabilities when matched
    keys: Vec<Option<(f64, f64)>>,
}

impl<'a> Plan<'a> {
    fn new(
        config: &SweepConfig,
        build: &'a ReferenceTable,
        analyze: &ReferenceTable,
    ) -> Result<Self> {
        let position = config.mode.letter_position();
        let analyze = match position {
            Some(p) if analyze.mode() != config.mode => letter_table(analyze, p)?.value,
            _ if analyze.mode() != config.mode => {
                return Err(Error::ModeMismatch {
                    expected: config.mode,
                    found: analyze.mode(),
                })
            }
            _ => analyze.clone(),
        };

        let sampler = PopulationSampler::new(build, config.sampling);
        let projected: Vec<Option<String>> = sampler
            .keys()
            .iter()
            .map(|k| match position {
                Some(p) => letter_key(k, p).map(|c| c.to_string()),
                None => Some((*k).to_owned()),
            })
            .collect();
        let index: BTreeMap<&str, usize> = {
            let mut distinct: Vec<&str> = projected.iter().flatten().map(String::as_str).collect();
            distinct.sort_unstable();
            distinct.dedup();
            distinct
                .into_iter()
                .enumerate()
                .map(|(i, k)| (k, i))
                .collect()
        };
        let key_of = projected
            .iter()
            .map(|k| k.as_deref().map(|k| index[k]))
            .collect();
        let keys = index
            .keys()
            .map(|k| analyze.get(k).map(|c| (c.p_female(), c.inclination())))
            .collect();
        Ok(Plan {
            sampler,
            key_of,
            keys,
        })
    }

    fn run(&self, config: &SweepConfig, beta0: f64, seed: u64) -> Result<Outcome> {
        let draws = self
            .sampler
            .draw_counts(beta0, config.population_size, seed)?;
        let mut per_key = vec![[0u64; 2]; self.keys.len()];
        for (i, d) in draws.iter().enumerate() {
            if let Some(k) = self.key_of[i] {
                per_key[k][0] += d[0];
                per_key[k][1] += d[1];
            }
        }

        let mut matched = Matched::default();
        let mut tally = CoverageTally::default();
        for (counts, info) in per_key.iter().zip(&self.keys) {
            let n = counts[0] + counts[1];
            if n == 0 {
                continue;
            }
            let (female, male) = (counts[0] as f64, counts[1] as f64);
            tally.add(female, male, info.is_some());
            matched.unique_names_total += 1;
            matched.individuals_total += n as f64;
            if let Some((p_female, delta)) = *info {
                matched.names.push(MatchedName {
                    count: n as f64,
                    p_female,
                    delta,
                });
            }
        }

        let betas = config
            .methods
            .iter()
            .map(|m| matched.estimate(*m).ok().map(|e| e.beta()))
            .collect();
        Ok(Outcome {
            betas,
            coverage: tally.finish(),
        })
    }
}

struct Outcome {
    betas: Vec<Option<f64>>,
    coverage: CoverageStats,
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

fn sample_std(xs: &[f64], mean: f64) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

fn lookup<'a>(
    tables: &'a BTreeMap<String, ReferenceTable>,
    id: &str,
) -> Result<&'a ReferenceTable> {
    tables
        .get(id)
        .ok_or_else(|| Error::MissingTable(id.to_owned()))
}

fn grid_point(plan: &Plan<'_>, config: &SweepConfig, grid_index: usize) -> Result<Vec<SweepCell>> {
    let beta0 = *config
        .beta0_grid
        .get(grid_index)
        .ok_or_else(|| Error::InvalidArgument(format!("grid index {grid_index} out of range")))?;
    let outcomes: Vec<Outcome> = (0..config.repeats)
        .into_par_iter()
        .map(|r| plan.run(config, beta0, population_seed(config.seed, grid_index, r)))
        .collect::<Result<_>>()?;

    let cov_mean = |f: fn(&CoverageStats) -> Option<f64>| {
        mean(
            &outcomes
                .iter()
                .filter_map(|o| f(&o.coverage))
                .collect::<Vec<_>>(),
        )
    };
    let names_frac = cov_mean(|c| Some(c.names_matched_frac)).unwrap_or(0.0);
    let indiv_frac = cov_mean(|c| Some(c.individuals_matched_frac)).unwrap_or(0.0);
    let female_frac = cov_mean(|c| c.female_matched_frac);
    let male_frac = cov_mean(|c| c.male_matched_frac);

    Ok(config
        .methods
        .iter()
        .enumerate()
        .map(|(m, method)| {
            let betas: Vec<f64> = outcomes.iter().filter_map(|o| o.betas[m]).collect();
            let mean_beta = mean(&betas);
            SweepCell {
                beta0,
                method: *method,
                mean_beta,
                sigma_beta: mean_beta.map(|mu| sample_std(&betas, mu)),
                abs_error: mean_beta.map(|b| abs_error(b, beta0)),
                rel_error_pct: mean_beta.and_then(|b| rel_error(b, beta0)),
                names_matched_frac: names_frac,
                individuals_matched_frac: indiv_frac,
                female_matched_frac: female_frac,
                male_matched_frac: male_frac,
                repeats: config.repeats,
                failures: config.repeats - betas.len() as u32,
            }
        })
        .collect())
}

/// Cells of a single grid point, identical to the corresponding cells of
/// [`run_sweep`].
pub fn run_grid_point(
    config: &SweepConfig,
    tables: &BTreeMap<String, ReferenceTable>,
    grid_index: usize,
) -> Result<Vec<SweepCell>> {
    config.validate()?;
    let build = lookup(tables, &config.reference_build)?;
    let analyze = lookup(tables, &config.reference_analyze)?;
    let plan = Plan::new(config, build, analyze)?;
    grid_point(&plan, config, grid_index)
}

/// Run the whole sweep. `tables` maps the ids named in the config to
/// loaded reference tables.
pub fn run_sweep(
    config: &SweepConfig,
    tables: &BTreeMap<String, ReferenceTable>,
) -> Result<SweepReport> {
    config.validate()?;
    let build = lookup(tables, &config.reference_build)?;
    let analyze = lookup(tables, &config.reference_analyze)?;
    let plan = Plan::new(config, build, analyze)?;

    let per_point: Vec<Vec<SweepCell>> = (0..config.beta0_grid.len())
        .into_par_iter()
        .map(|i| grid_point(&plan, config, i))
        .collect::<Result<_>>()?;

    Ok(SweepReport {
        provenance: Provenance {
            tool: env!("CARGO_PKG_NAME").to_owned(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
            rng_algorithm: RNG_ALGORITHM.to_owned(),
            build_source: build.source_id().to_owned(),
            analyze_source: analyze.source_id().to_owned(),
            config: config.clone(),
        },
        cells: per_point.into_iter().flatten().collect(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            _ => Err(Error::InvalidArgument(format!(
                "unknown report format `{s}`"
            ))),
        }
    }
}

impl fmt::Display for ReportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
        })
    }
}

pub const REPORT_CSV_COLUMNS: [&str; 12] = [
    "beta0",
    "method",
    "cutoff",
    "mean_beta",
    "sigma_beta",
    "abs_error",
    "rel_error_pct",
    "names_matched_frac",
    "individuals_matched_frac",
    "female_matched_frac",
    "male_matched_frac",
    "failures",
];

pub fn write_report_csv<W: Write>(report: &SweepReport, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(REPORT_CSV_COLUMNS)?;
    for c in &report.cells {
        w.write_record([
            format_sig12(Some(c.beta0)),
            c.method.name().to_owned(),
            format_sig12(c.method.cutoff()),
            format_sig12(c.mean_beta),
            format_sig12(c.sigma_beta),
            format_sig12(c.abs_error),
            format_sig12(c.rel_error_pct),
            format_sig12(Some(c.names_matched_frac)),
            format_sig12(Some(c.individuals_matched_frac)),
            format_sig12(c.female_matched_frac),
            format_sig12(c.male_matched_frac),
            c.failures.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

pub fn write_report_json<W: Write>(report: &SweepReport, mut writer: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut writer, report)?;
    writer
        .write_all(b"\n")
        .map_err(|e| Error::io("<json writer>", e))
}

pub fn read_report_json<R: Read>(reader: R) -> Result<SweepReport> {
    Ok(serde_json::from_reader(reader)?)
}

pub fn export_report(report: &SweepReport, format: ReportFormat, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    match format {
        ReportFormat::Csv => write_report_csv(report, &mut out)?,
        ReportFormat::Json => write_report_json(report, &mut out)?,
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Settings for averaging per-inclination partial contributions over
/// synthetic populations at a single composition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartialProfileConfig {
    pub reference_build: String,
    pub reference_analyze: String,
    pub methods: Vec<PartialMethod>,
    pub beta0: f64,
    pub repeats: u32,
    pub population_size: u64,
    pub sampling: Sampling,
    pub seed: u64,
    pub bin_edges: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartialProfileRow {
    pub method: PartialMethod,
    #[serde(serialize_with = "sig12")]
    pub low: f64,
    #[serde(serialize_with = "sig12")]
    pub high: f64,
    /// Mean over the repeats in which the bin is populated.
    #[serde(serialize_with = "sig12_opt")]
    pub mean_beta_partial: Option<f64>,
    #[serde(serialize_with = "sig12")]
    pub mean_individuals: f64,
    /// Mean whole-population estimate of the same method.
    #[serde(serialize_with = "sig12_opt")]
    pub mean_beta: Option<f64>,
    pub populated_repeats: u32,
    pub failures: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartialProfileReport {
    pub tool: String,
    pub version: String,
    pub rng_algorithm: String,
    pub config: PartialProfileConfig,
    pub rows: Vec<PartialProfileRow>,
}

/// Average the partial contributions of each method over `repeats`
/// populations drawn at `beta0`. Population `r` uses
/// `population_seed(seed, 0, r)`.
pub fn run_partial_profile(
    config: &PartialProfileConfig,
    tables: &BTreeMap<String, ReferenceTable>,
) -> Result<PartialProfileReport> {
    if config.repeats == 0 || config.population_size == 0 {
        return Err(Error::InvalidArgument(
            "repeats and population size must be at least 1".into(),
        ));
    }
    if !(0.0..=1.0).contains(&config.beta0) {
        return Err(Error::InvalidArgument(format!(
            "beta0 must lie in [0, 1], got {}",
            config.beta0
        )));
    }
    let build = lookup(tables, &config.reference_build)?;
    let analyze = lookup(tables, &config.reference_analyze)?;
    let sampler = PopulationSampler::new(build, config.sampling);
    let bins = config.bin_edges.len().saturating_sub(1);

    type Run = Vec<Option<(Vec<PartialBin>, f64)>>;
    let runs: Vec<Run> = (0..config.repeats)
        .into_par_iter()
        .map(|r| {
            let pop = sampler.draw(
                config.beta0,
                config.population_size,
                population_seed(config.seed, 0, r),
            )?;
            let target = pop.to_target()?;
            config
                .methods
                .iter()
                .map(|m| {
                    let whole = match *m {
                        PartialMethod::Method0 => Method::Method0,
                        PartialMethod::Ggem { gamma_star } => Method::Ggem { gamma_star },
                    };
                    match partial_contributions(&target, analyze, &config.bin_edges, *m) {
                        Ok(b) => Ok(Some((
                            b,
                            crate::estimator::estimate(&target, analyze, whole)?.beta(),
                        ))),
                        Err(e) if e.is_estimation_impossible() => Ok(None),
                        Err(e) => Err(e),
                    }
                })
                .collect::<Result<Run>>()
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(config.methods.len() * bins);
    for (m, method) in config.methods.iter().enumerate() {
        let ok: Vec<&(Vec<PartialBin>, f64)> = runs.iter().filter_map(|r| r[m].as_ref()).collect();
        let failures = config.repeats - ok.len() as u32;
        let mean_beta = mean(&ok.iter().map(|(_, b)| *b).collect::<Vec<_>>());
        for b in 0..bins {
            let partials: Vec<f64> = ok.iter().filter_map(|(p, _)| p[b].beta_partial).collect();
            let individuals: Vec<f64> = ok.iter().map(|(p, _)| p[b].individuals).collect();
            rows.push(PartialProfileRow {
                method: *method,
                low: config.bin_edges[b],
                high: config.bin_edges[b + 1],
                mean_beta_partial: mean(&partials),
                mean_individuals: mean(&individuals).unwrap_or(0.0),
                mean_beta,
                populated_repeats: partials.len() as u32,
                failures,
            });
        }
    }
    Ok(PartialProfileReport {
        tool: env!("CARGO_PKG_NAME").to_owned(),
        version: env!("CARGO_PKG_VERSION").to_owned(),
        rng_algorithm: RNG_ALGORITHM.to_owned(),
        config: config.clone(),
        rows,
    })
}

pub const PARTIAL_CSV_COLUMNS: [&str; 9] = [
    "beta0",
    "method",
    "low",
    "high",
    "mean_beta_partial",
    "mean_individuals",
    "mean_beta",
    "populated_repeats",
    "failures",
];

pub fn write_partial_csv<W: Write>(report: &PartialProfileReport, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(PARTIAL_CSV_COLUMNS)?;
    for r in &report.rows {
        let name = match r.method {
            PartialMethod::Method0 => "method0",
            PartialMethod::Ggem { .. } => "ggem",
        };
        w.write_record([
            format_sig12(Some(report.config.beta0)),
            name.to_owned(),
            format_sig12(Some(r.low)),
            format_sig12(Some(r.high)),
            format_sig12(r.mean_beta_partial),
            format_sig12(Some(r.mean_individuals)),
            format_sig12(r.mean_beta),
            r.populated_repeats.to_string(),
            r.failures.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}
