//! Synthetic labeled populations.
//!
//! [`generate`] draws a population with a prescribed female fraction from the
//! female and male sides of a reference table. [`apply_pipeline`] instead
//! pushes the whole reference through a leaky pipeline with a given
//! female-to-male survival ratio, which is exactly the generative model the
//! global estimator inverts.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::PipelineRatio;
use crate::numfmt::format_sig12;
use crate::reference::{letter_key, Ingested, LetterPosition, ReferenceTable, Skipped, TargetList};
use crate::rng::stream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampling {
    /// Names drawn in proportion to their per-gender counts.
    Natural,
    /// Every name of a gender's pool equally likely.
    Uniform,
}

impl fmt::Display for Sampling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sampling::Natural => "natural",
            Sampling::Uniform => "uniform",
        })
    }
}

impl FromStr for Sampling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "natural" => Ok(Sampling::Natural),
            "uniform" => Ok(Sampling::Uniform),
            _ => Err(Error::InvalidArgument(format!("unknown sampling `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PipelineMode {
    /// Real-valued expected counts.
    Expected,
    /// Independent per-individual survival draws.
    Sampled,
}

impl FromStr for PipelineMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "expected" => Ok(PipelineMode::Expected),
            "sampled" => Ok(PipelineMode::Sampled),
            _ => Err(Error::InvalidArgument(format!(
                "unknown pipeline mode `{s}`"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrueCounts {
    pub female: f64,
    pub male: f64,
}

impl TrueCounts {
    pub fn total(&self) -> f64 {
        self.female + self.male
    }
}

/// A population with known per-name gender counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledPopulation {
    entries: BTreeMap<String, TrueCounts>,
    beta_true: f64,
    seed: u64,
    /// `None` for populations produced by [`apply_pipeline`].
    sampling: Option<Sampling>,
}

impl LabeledPopulation {
    fn new(
        entries: BTreeMap<String, TrueCounts>,
        seed: u64,
        sampling: Option<Sampling>,
    ) -> Result<Self> {
        let entries: BTreeMap<String, TrueCounts> = entries
            .into_iter()
            .filter(|(_, c)| c.total() > 0.0)
            .collect();
        if entries.is_empty() {
            return Err(Error::InvalidArgument(
                "population has no individuals".into(),
            ));
        }
        let (female, total) = totals(&entries);
        Ok(LabeledPopulation {
            entries,
            beta_true: female / total,
            seed,
            sampling,
        })
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = (&str, TrueCounts)> + '_ {
        self.entries.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn get(&self, key: &str) -> Option<TrueCounts> {
        self.entries.get(key).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn beta_true(&self) -> f64 {
        self.beta_true
    }

    pub fn gamma_true(&self) -> f64 {
        2.0 * self.beta_true - 1.0
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn sampling(&self) -> Option<Sampling> {
        self.sampling
    }

    pub fn female_total(&self) -> f64 {
        self.entries.values().map(|c| c.female).sum()
    }

    pub fn male_total(&self) -> f64 {
        self.entries.values().map(|c| c.male).sum()
    }

    pub fn total(&self) -> f64 {
        totals(&self.entries).1
    }

    /// The name list an estimator sees: truth labels summed per name.
    pub fn to_target(&self) -> Result<TargetList> {
        TargetList::from_weights(self.iter().map(|(k, c)| (k.to_owned(), c.total())))
    }

    /// Pool names by initial or last letter. Truth labels are carried along,
    /// so the reduced population keeps exact per-gender counts.
    pub fn to_letters(&self, position: LetterPosition) -> Result<Ingested<Self>> {
        let mut map: BTreeMap<String, TrueCounts> = BTreeMap::new();
        let mut skipped = Vec::new();
        for (key, c) in self.iter() {
            match letter_key(key, position) {
                Some(l) => {
                    let e = map.entry(l.to_string()).or_default();
                    e.female += c.female;
                    e.male += c.male;
                }
                None => skipped.push(Skipped {
                    line: None,
                    raw: key.to_owned(),
                    individuals: c.total().round() as u64,
                    reason: "no Latin letter in the selected position".into(),
                }),
            }
        }
        Ok(Ingested {
            value: Self::new(map, self.seed, self.sampling)?,
            skipped,
        })
    }

    /// Canonical target CSV (`name,count`).
    pub fn write_target_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["name", "count"])?;
        for (key, c) in self.iter() {
            w.write_record([key, &format_count(c.total())])?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    /// Truth sidecar (`name,true_female,true_male`).
    pub fn write_truth_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["name", "true_female", "true_male"])?;
        for (key, c) in self.iter() {
            w.write_record([key, &format_count(c.female), &format_count(c.male)])?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    /// Write `<stem>.csv` style target and truth files.
    pub fn export(&self, target_path: &Path, truth_path: &Path) -> Result<()> {
        let open = |p: &Path| {
            std::fs::File::create(p)
                .map(std::io::BufWriter::new)
                .map_err(|e| Error::io(p, e))
        };
        self.write_target_csv(open(target_path)?)?;
        self.write_truth_csv(open(truth_path)?)
    }
}

fn totals(entries: &BTreeMap<String, TrueCounts>) -> (f64, f64) {
    entries.values().fold((0.0, 0.0), |(f, t), c| {
        (f + c.female, t + c.female + c.male)
    })
}

fn format_count(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 9.0e15 {
        format!("{}", x as i64)
    } else {
        format_sig12(Some(x))
    }
}

/// Number of female draws for a requested female fraction (round half up).
pub fn female_draws(beta0: f64, size: u64) -> u64 {
    ((beta0 * size as f64 + 0.5).floor() as u64).min(size)
}

struct Pool {
    members: Vec<usize>,
    alias: WeightedAliasIndex<f64>,
}

impl Pool {
    fn build(weights: impl Iterator<Item = (usize, u64)>, sampling: Sampling) -> Option<Self> {
        let (members, w): (Vec<usize>, Vec<f64>) = weights
            .filter(|(_, c)| *c > 0)
            .map(|(i, c)| {
                let w = match sampling {
                    Sampling::Natural => c as f64,
                    Sampling::Uniform => 1.0,
                };
                (i, w)
            })
            .unzip();
        if members.is_empty() {
            return None;
        }
        let alias = WeightedAliasIndex::new(w).ok()?;
        Some(Pool { members, alias })
    }
}

/// Reusable sampler over the female and male sides of a reference.
///
/// A unisex name sits in both pools, each with its own per-gender count.
pub struct PopulationSampler<'a> {
    reference: &'a ReferenceTable,
    keys: Vec<&'a str>,
    female: Option<Pool>,
    male: Option<Pool>,
    sampling: Sampling,
}

impl<'a> PopulationSampler<'a> {
    pub fn new(reference: &'a ReferenceTable, sampling: Sampling) -> Self {
        let keys: Vec<&str> = reference.iter().map(|(k, _)| k).collect();
        let counts: Vec<_> = reference.iter().map(|(_, c)| c).collect();
        PopulationSampler {
            reference,
            keys,
            female: Pool::build(counts.iter().map(|c| c.female).enumerate(), sampling),
            male: Pool::build(counts.iter().map(|c| c.male).enumerate(), sampling),
            sampling,
        }
    }

    pub fn reference(&self) -> &'a ReferenceTable {
        self.reference
    }

    /// Reference keys in the order used by [`Self::draw_counts`].
    pub fn keys(&self) -> &[&'a str] {
        &self.keys
    }

    pub fn sampling(&self) -> Sampling {
        self.sampling
    }

    /// Per-reference-name `[female, male]` draws.
    pub fn draw_counts(&self, beta0: f64, size: u64, seed: u64) -> Result<Vec<[u64; 2]>> {
        if !(0.0..=1.0).contains(&beta0) {
            return Err(Error::InvalidArgument(format!(
                "beta0 must lie in [0, 1], got {beta0}"
            )));
        }
        if size == 0 {
            return Err(Error::InvalidArgument(
                "population size must be positive".into(),
            ));
        }
        let n_female = female_draws(beta0, size);
        let n_male = size - n_female;
        let mut counts = vec![[0u64; 2]; self.keys.len()];
        let mut rng = stream(seed);
        for (side, n, pool, label) in [
            (0, n_female, &self.female, "female"),
            (1, n_male, &self.male, "male"),
        ] {
            if n == 0 {
                continue;
            }
            let pool = pool.as_ref().ok_or(Error::EmptyPool(label))?;
            for _ in 0..n {
                let i = pool.members[pool.alias.sample(&mut rng)];
                counts[i][side] += 1;
            }
        }
        Ok(counts)
    }

    pub fn draw(&self, beta0: f64, size: u64, seed: u64) -> Result<LabeledPopulation> {
        let counts = self.draw_counts(beta0, size, seed)?;
        let entries = self
            .keys
            .iter()
            .zip(&counts)
            .filter(|(_, c)| c[0] + c[1] > 0)
            .map(|(k, c)| {
                (
                    (*k).to_owned(),
                    TrueCounts {
                        female: c[0] as f64,
                        male: c[1] as f64,
                    },
                )
            })
            .collect();
        LabeledPopulation::new(entries, seed, Some(self.sampling))
    }
}

/// Draw `round(beta0 * size)` individuals from the female side of the
/// reference and the rest from the male side.
pub fn generate(
    reference: &ReferenceTable,
    beta0: f64,
    size: u64,
    sampling: Sampling,
    seed: u64,
) -> Result<LabeledPopulation> {
    PopulationSampler::new(reference, sampling).draw(beta0, size, seed)
}

/// 0.5%, then 1% to 99% in steps of 2%, then 99.5%.
pub fn default_beta0_grid() -> Vec<f64> {
    std::iter::once(0.005)
        .chain((0..50).map(|k| f64::from(1 + 2 * k) / 100.0))
        .chain(std::iter::once(0.995))
        .collect()
}

/// Push the whole reference through a leaky pipeline.
///
/// Females survive with probability `kappa * eta` and males with `kappa`,
/// where `kappa = 1 / max(eta, 1)` keeps both at most one. Expected mode
/// returns the mean counts; sampled mode draws each individual independently.
/// The reference itself plays the pristine population, so `gamma_star` of
/// the pipeline is not used here.
pub fn apply_pipeline(
    reference: &ReferenceTable,
    pipeline: &PipelineRatio,
    mode: PipelineMode,
    seed: u64,
) -> Result<LabeledPopulation> {
    let eta = pipeline.eta();
    let kappa = 1.0 / eta.max(1.0);
    let (keep_female, keep_male) = ((kappa * eta).min(1.0), kappa);
    let mut rng = stream(seed);
    let mut entries = BTreeMap::new();
    for (key, c) in reference.iter() {
        let counts = match mode {
            PipelineMode::Expected => TrueCounts {
                female: keep_female * c.female as f64,
                male: keep_male * c.male as f64,
            },
            PipelineMode::Sampled => {
                let mut survive = |n: u64, p: f64| -> Result<f64> {
                    let b = Binomial::new(n, p)
                        .map_err(|e| Error::InvalidArgument(format!("binomial draw: {e}")))?;
                    Ok(b.sample(&mut rng) as f64)
                };
                TrueCounts {
                    female: survive(c.female, keep_female)?,
                    male: survive(c.male, keep_male)?,
                }
            }
        };
        entries.insert(key.to_owned(), counts);
    }
    LabeledPopulation::new(entries, seed, None)
}
