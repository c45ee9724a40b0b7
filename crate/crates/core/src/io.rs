//! File formats: series and draws as CSV, run configuration as TOML,
//! truth and reports as JSON. All writes go through a temporary file in
//! the target directory followed by a rename.

use std::fmt;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::covariates::CovariateDesign;
use crate::error::{Error, Result};
use crate::metrics::EnergyEstimator;
use crate::model::{param_names, ModelSpec, ParamSet, Priors, Variant};
use crate::sampler::{PosteriorDraws, SamplerConfig};
use crate::simplex::{close_with_floor, Composition, DEFAULT_FLOOR};
use crate::simulation::{ScenarioSpec, StudyConfig};

pub const SCHEMA_VERSION: u32 = 1;

/// Writes `bytes` to `path` atomically, creating parent directories.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn read_to_string(path: &Path) -> Result<String> {
    let mut s = String::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_string(&mut s))
        .map_err(|e| Error::io(path, e))?;
    Ok(s)
}

/// Serializes `value` as pretty JSON to `path`.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&read_to_string(path)?)?)
}

/// Time label of a series row: a calendar month or a plain integer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TimeLabel {
    Month { year: i32, month: u32 },
    Index(i64),
}

impl TimeLabel {
    /// Position on a common integer axis, used for ordering checks.
    fn ordinal(self) -> i64 {
        match self {
            TimeLabel::Month { year, month } => year as i64 * 12 + month as i64 - 1,
            TimeLabel::Index(i) => i,
        }
    }

    fn same_kind(self, other: TimeLabel) -> bool {
        matches!(
            (self, other),
            (TimeLabel::Month { .. }, TimeLabel::Month { .. }) | (TimeLabel::Index(_), TimeLabel::Index(_))
        )
    }

    /// The label `steps` periods later.
    pub fn advance(self, steps: usize) -> TimeLabel {
        match self {
            TimeLabel::Month { year, month } => {
                let o = year as i64 * 12 + month as i64 - 1 + steps as i64;
                TimeLabel::Month {
                    year: o.div_euclid(12) as i32,
                    month: o.rem_euclid(12) as u32 + 1,
                }
            }
            TimeLabel::Index(i) => TimeLabel::Index(i + steps as i64),
        }
    }
}

impl FromStr for TimeLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Ok(i) = s.parse::<i64>() {
            return Ok(TimeLabel::Index(i));
        }
        let bad = || Error::Config(format!("time label `{s}` is neither YYYY-MM nor an integer"));
        let (y, m) = s.split_once('-').ok_or_else(bad)?;
        if y.len() != 4 || m.len() != 2 {
            return Err(bad());
        }
        let year: i32 = y.parse().map_err(|_| bad())?;
        let month: u32 = m.parse().map_err(|_| bad())?;
        if !(1..=12).contains(&month) {
            return Err(bad());
        }
        Ok(TimeLabel::Month { year, month })
    }
}

impl fmt::Display for TimeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimeLabel::Month { year, month } => write!(f, "{year:04}-{month:02}"),
            TimeLabel::Index(i) => write!(f, "{i}"),
        }
    }
}

/// A compositional series with its time labels and part names.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesFile {
    pub time_header: String,
    pub labels: Vec<TimeLabel>,
    pub parts: Vec<String>,
    pub y: Vec<Composition>,
}

impl SeriesFile {
    pub fn new(labels: Vec<TimeLabel>, parts: Vec<String>, y: Vec<Composition>) -> Result<Self> {
        let s = SeriesFile {
            time_header: "time".into(),
            labels,
            parts,
            y,
        };
        s.validate()?;
        Ok(s)
    }

    /// Integer labels `1..=n`.
    pub fn indexed(y: Vec<Composition>) -> Result<Self> {
        let parts = y.first().map_or(0, |c| c.parts());
        let labels = (1..=y.len() as i64).map(TimeLabel::Index).collect();
        SeriesFile::new(labels, (1..=parts).map(|c| format!("c{c}")).collect(), y)
    }

    fn validate(&self) -> Result<()> {
        Error::check_dim(self.labels.len(), self.y.len())?;
        if self.parts.len() < 2 {
            return Err(Error::InvalidDimension("a series needs at least two parts".into()));
        }
        for y in &self.y {
            Error::check_dim(self.parts.len(), y.parts())?;
        }
        for w in self.labels.windows(2) {
            if !w[0].same_kind(w[1]) || w[1].ordinal() <= w[0].ordinal() {
                return Err(Error::Config(format!("time labels must strictly increase: {} then {}", w[0], w[1])));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// 1-based position of a time reference.
    pub fn resolve(&self, r: &TimeRef) -> Result<usize> {
        match r {
            TimeRef::Position(p) => {
                if *p == 0 || *p > self.len() {
                    return Err(Error::Config(format!("position {p} outside 1..={}", self.len())));
                }
                Ok(*p)
            }
            TimeRef::Label(s) => {
                let label: TimeLabel = s.parse()?;
                self.labels
                    .iter()
                    .position(|l| *l == label)
                    .map(|i| i + 1)
                    .ok_or_else(|| Error::Config(format!("time label {label} not in the series")))
            }
        }
    }

    pub fn parse<R: Read>(reader: R, path: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = rdr.headers()?.clone();
        if header.len() < 3 {
            return Err(Error::Row {
                path: path.into(),
                row: 1,
                message: "header needs a time column and at least two parts".into(),
            });
        }
        let time_header = header[0].to_string();
        let parts: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut labels = Vec::new();
        let mut y = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            // header is line 1
            let row = i + 2;
            let rec = rec?;
            let err = |message: String| Error::Row {
                path: path.into(),
                row,
                message,
            };
            if rec.len() != parts.len() + 1 {
                return Err(err(format!("expected {} fields, found {}", parts.len() + 1, rec.len())));
            }
            let label: TimeLabel = rec[0].parse().map_err(|e: Error| err(e.to_string()))?;
            let raw: Vec<f64> = rec
                .iter()
                .skip(1)
                .map(|v| v.parse::<f64>().map_err(|_| err(format!("`{v}` is not a number"))))
                .collect::<Result<_>>()?;
            // rows that are already closed are kept as written
            let comp = match Composition::new(raw.clone()) {
                Ok(c) if raw.iter().all(|v| *v >= DEFAULT_FLOOR) => c,
                _ => close_with_floor(&raw, DEFAULT_FLOOR).map_err(|e| err(e.to_string()))?,
            };
            if let Some(prev) = labels.last() {
                let prev: &TimeLabel = prev;
                if !prev.same_kind(label) || label.ordinal() <= prev.ordinal() {
                    return Err(err(format!("time {label} does not follow {prev}")));
                }
            }
            labels.push(label);
            y.push(comp);
        }
        let s = SeriesFile {
            time_header,
            labels,
            parts,
            y,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        SeriesFile::parse(f, path)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec![self.time_header.clone()];
        header.extend(self.parts.iter().cloned());
        w.write_record(&header)?;
        for (l, y) in self.labels.iter().zip(&self.y) {
            let mut rec = vec![l.to_string()];
            rec.extend(y.as_slice().iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.into_inner().map_err(|e| Error::io("<memory>", e.into_error()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes()?)
    }
}

/// A time given either as a 1-based row position or as a row label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TimeRef {
    Position(usize),
    Label(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForecastSection {
    pub horizon: usize,
    pub paths_per_draw: usize,
    /// Also write every simulated path.
    pub raw: bool,
}

impl Default for ForecastSection {
    fn default() -> Self {
        ForecastSection {
            horizon: 1,
            paths_per_draw: 1,
            raw: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RollingSection {
    pub origins: Vec<TimeRef>,
    #[serde(default = "default_horizons")]
    pub horizons: Vec<usize>,
    /// Models to compare; defaults to all three.
    #[serde(default = "all_variants")]
    pub variants: Vec<Variant>,
}

fn default_horizons() -> Vec<usize> {
    vec![1]
}

fn all_variants() -> Vec<Variant> {
    vec![Variant::Baseline, Variant::FixedEffect, Variant::Intervention]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudySection {
    /// Scenario names such as `k0.5_dneg_p0`; defaults to the full grid.
    pub scenarios: Vec<String>,
    pub replications: usize,
    pub threshold: f64,
    pub strict_threshold: f64,
}

impl Default for StudySection {
    fn default() -> Self {
        let d = StudyConfig::default();
        StudySection {
            scenarios: ScenarioSpec::grid().into_iter().map(|s| s.name).collect(),
            replications: d.replications,
            threshold: d.threshold,
            strict_threshold: d.strict_threshold,
        }
    }
}

impl StudySection {
    pub fn scenarios(&self) -> Result<Vec<ScenarioSpec>> {
        if self.scenarios.is_empty() {
            return Err(Error::Config("the study lists no scenarios".into()));
        }
        self.scenarios.iter().map(|n| ScenarioSpec::from_name(n)).collect()
    }

    pub fn config(&self, sampler: &SamplerConfig, seed: u64) -> StudyConfig {
        StudyConfig {
            replications: self.replications,
            seed,
            threshold: self.threshold,
            strict_threshold: self.strict_threshold,
            sampler: sampler.clone(),
        }
    }
}

/// The declarative run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub variant: Variant,
    /// Last pre-break period, as a position or a label.
    #[serde(rename = "break", default, skip_serializing_if = "Option::is_none")]
    pub break_at: Option<TimeRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub energy: EnergyEstimator,
    #[serde(default)]
    pub covariates: CovariateDesign,
    #[serde(default)]
    pub priors: Priors,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub forecast: ForecastSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rolling: Option<RollingSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub study: Option<StudySection>,
}

impl RunConfig {
    pub fn new(variant: Variant) -> Self {
        RunConfig {
            schema_version: SCHEMA_VERSION,
            variant,
            break_at: None,
            seed: None,
            out: None,
            energy: EnergyEstimator::default(),
            covariates: CovariateDesign::default(),
            priors: Priors::default(),
            sampler: SamplerConfig::default(),
            forecast: ForecastSection::default(),
            rolling: None,
            study: None,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self> {
        RunConfig::parse(&read_to_string(path)?).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_toml()?.as_bytes())
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.variant != Variant::Baseline && self.break_at.is_none() {
            return Err(Error::Config(format!("variant {} needs a `break`", self.variant)));
        }
        if !self.priors.is_valid() {
            return Err(Error::Config("prior scales must be positive and finite".into()));
        }
        if self.forecast.horizon == 0 || self.forecast.paths_per_draw == 0 {
            return Err(Error::Config("forecast horizon and paths_per_draw must be at least 1".into()));
        }
        self.covariates.validate()?;
        self.sampler.validate()
    }

    /// Model structure for `variant` on `series`.
    pub fn model_for(&self, variant: Variant, series: &SeriesFile) -> Result<ModelSpec> {
        let break_index = match variant {
            Variant::Baseline => None,
            _ => Some(series.resolve(self.break_at.as_ref().ok_or_else(|| {
                Error::Config(format!("variant {variant} needs a `break`"))
            })?)?),
        };
        Ok(ModelSpec::new(
            variant,
            series.parts.len(),
            self.covariates.k_mean(),
            self.covariates.k_prec(),
            break_index,
        )?
        .with_priors(self.priors.clone()))
    }

    pub fn model(&self, series: &SeriesFile) -> Result<ModelSpec> {
        self.model_for(self.variant, series)
    }
}

const DRAW_META: [&str; 2] = ["chain", "iteration"];

/// Writes draws as CSV: chain, iteration, parameters, `lp__`, `divergent`.
pub fn draws_to_bytes(draws: &PosteriorDraws) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = DRAW_META.iter().map(|s| s.to_string()).collect();
    header.extend(draws.names.iter().cloned());
    header.push("lp__".into());
    header.push("divergent".into());
    w.write_record(&header)?;
    for k in 0..draws.len() {
        let mut rec = vec![(k / draws.draws + 1).to_string(), (k % draws.draws + 1).to_string()];
        rec.extend(draws.row(k).iter().map(|v| v.to_string()));
        rec.push(draws.lp[k].to_string());
        rec.push(u8::from(draws.divergent[k]).to_string());
        w.write_record(&rec)?;
    }
    w.into_inner().map_err(|e| Error::io("<memory>", e.into_error()))
}

pub fn write_draws(path: &Path, draws: &PosteriorDraws) -> Result<()> {
    write_atomic(path, &draws_to_bytes(draws)?)
}

/// Reads draws written by [`write_draws`]; the columns must match `spec`.
pub fn parse_draws<R: Read>(reader: R, path: &Path, spec: &ModelSpec) -> Result<PosteriorDraws> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let names = param_names(spec);
    let mut expected: Vec<String> = DRAW_META.iter().map(|s| s.to_string()).collect();
    expected.extend(names.iter().cloned());
    expected.push("lp__".into());
    expected.push("divergent".into());
    if header != expected {
        return Err(Error::Config(format!(
            "{}: draw columns do not match the {} model configured",
            path.display(),
            spec.variant
        )));
    }
    let p = names.len();
    let mut values = Vec::new();
    let mut lp = Vec::new();
    let mut divergent = Vec::new();
    let mut chain_sizes: Vec<usize> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec?;
        let err = |message: String| Error::Row {
            path: path.into(),
            row,
            message,
        };
        let num = |j: usize| -> Result<f64> {
            rec[j].parse::<f64>().map_err(|_| err(format!("`{}` is not a number", &rec[j])))
        };
        let chain: usize = rec[0].parse().map_err(|_| err("bad chain".into()))?;
        let iter: usize = rec[1].parse().map_err(|_| err("bad iteration".into()))?;
        if chain == chain_sizes.len() + 1 {
            chain_sizes.push(0);
        }
        if chain != chain_sizes.len() || iter != chain_sizes[chain - 1] + 1 {
            return Err(err(format!("chain {chain} iteration {iter} out of order")));
        }
        chain_sizes[chain - 1] += 1;
        for j in 0..p {
            values.push(num(2 + j)?);
        }
        lp.push(num(2 + p)?);
        divergent.push(match &rec[3 + p] {
            "0" => false,
            "1" => true,
            v => return Err(err(format!("divergent flag `{v}`"))),
        });
    }
    let draws = chain_sizes.first().copied().unwrap_or(0);
    if chain_sizes.iter().any(|n| *n != draws) {
        return Err(Error::Config(format!("{}: chains have unequal lengths", path.display())));
    }
    PosteriorDraws::new(spec.clone(), chain_sizes.len(), draws, values, lp, divergent)
}

pub fn read_draws(path: &Path, spec: &ModelSpec) -> Result<PosteriorDraws> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_draws(f, path, spec)
}

/// True parameters of a simulated dataset, published next to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthFile {
    pub description: String,
    pub variant: Variant,
    pub parts: usize,
    pub break_index: Option<usize>,
    pub covariates: CovariateDesign,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioSpec>,
    pub params: ParamSet,
    /// Means `mu_t` along the simulated path.
    pub mu: Vec<Vec<f64>>,
}

/// Writes rows of serializable records as CSV.
pub fn write_table<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    write_atomic(path, &bytes)
}
