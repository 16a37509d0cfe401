//! Readers and writers for every file the commands consume or produce.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use stratdesign::regions::{Ellipse, Point, ReplicateRectangle, StratumRegion, VarianceRegion};
use stratdesign::sim::{BenchmarkPlan, BenchmarkReport, SyntheticSpec, SyntheticStratum, Weighting};
use stratdesign::variance::VarBounds;
use stratdesign::{
    validate_dataset, AllocationPlan, Dataset, DefaultRule, DesignConfig, SolverConfig, StratumSample,
    UnitRecord,
};

use crate::error::{CliError, CliResult};

const DATA_COLUMNS: [&str; 4] = ["stratum", "treated", "outcome", "propensity"];

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn csv_reader(path: &Path) -> CliResult<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

fn column_index(path: &Path, headers: &csv::StringRecord, name: &str) -> CliResult<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| CliError::input(path, format!("line 1: missing column `{name}`")))
}

fn parse_treated(s: &str) -> Option<bool> {
    match s {
        "1" | "true" | "TRUE" | "True" => Some(true),
        "0" | "false" | "FALSE" | "False" => Some(false),
        _ => None,
    }
}

/// Reads a unit-level dataset. Strata appear in first-seen order. Weights come
/// from `weights` when given, otherwise from stratum sizes.
pub fn read_dataset(path: &Path, weights: Option<&Path>) -> CliResult<Dataset> {
    let mut reader = csv_reader(path)?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::input(path, format!("line 1: {e}")))?
        .clone();
    let idx: Vec<usize> = DATA_COLUMNS
        .iter()
        .map(|c| column_index(path, &headers, c))
        .collect::<CliResult<_>>()?;

    let mut order: Vec<String> = Vec::new();
    let mut units: HashMap<String, Vec<UnitRecord>> = HashMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            CliError::input(path, format!("line {line}: {e}"))
        })?;
        let line = line_of(&record);
        let field = |i: usize| record.get(idx[i]).unwrap_or("");
        let fail = |msg: String| CliError::input(path, format!("line {line}: {msg}"));
        let stratum = field(0);
        if stratum.is_empty() {
            return Err(fail("empty stratum".into()));
        }
        let treated = parse_treated(field(1))
            .ok_or_else(|| fail(format!("treated must be 0 or 1, got `{}`", field(1))))?;
        let number = |i: usize| {
            field(i)
                .parse::<f64>()
                .map_err(|_| fail(format!("{} is not a number: `{}`", DATA_COLUMNS[i], field(i))))
        };
        let unit = UnitRecord::new(treated, number(2)?, number(3)?).map_err(|e| fail(e.to_string()))?;
        if !units.contains_key(stratum) {
            order.push(stratum.to_string());
        }
        units.entry(stratum.to_string()).or_default().push(unit);
    }
    if order.is_empty() {
        return Err(CliError::input(path, "no data rows"));
    }

    let total: usize = units.values().map(Vec::len).sum();
    let explicit = match weights {
        Some(w) => Some(read_weights(w, &order)?),
        None => None,
    };
    let strata = order
        .iter()
        .map(|id| {
            let u = units.remove(id).unwrap_or_default();
            let w = match &explicit {
                Some(map) => map[id],
                None => u.len() as f64 / total as f64,
            };
            StratumSample::new(id.clone(), w, u)
        })
        .collect();
    validate_dataset(strata).map_err(|e| CliError::input(path, e))
}

#[derive(Debug, Deserialize)]
struct WeightRow {
    stratum: String,
    weight: f64,
}

fn read_weights(path: &Path, strata: &[String]) -> CliResult<HashMap<String, f64>> {
    let mut reader = csv_reader(path)?;
    let mut map = HashMap::new();
    for row in reader.deserialize::<WeightRow>() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            CliError::input(path, format!("line {line}: {e}"))
        })?;
        if !strata.contains(&row.stratum) {
            return Err(CliError::input(path, format!("unknown stratum `{}`", row.stratum)));
        }
        if map.insert(row.stratum.clone(), row.weight).is_some() {
            return Err(CliError::input(path, format!("duplicate stratum `{}`", row.stratum)));
        }
    }
    if let Some(missing) = strata.iter().find(|s| !map.contains_key(*s)) {
        return Err(CliError::input(path, format!("no weight for stratum `{missing}`")));
    }
    Ok(map)
}

/// Flat key-value design configuration. Absent keys take library defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub gamma: f64,
    pub alpha: f64,
    pub bootstrap_reps: usize,
    pub n_r: u64,
    pub default_rule: DefaultRule,
    pub seed: u64,
    pub sigma_floor: f64,
    pub max_iters: usize,
    pub rel_tol: f64,
    pub mve_tol: f64,
}

impl Default for ConfigFile {
    fn default() -> Self {
        ConfigFile::from(DesignConfig::default())
    }
}

impl From<DesignConfig> for ConfigFile {
    fn from(c: DesignConfig) -> Self {
        ConfigFile {
            gamma: c.gamma,
            alpha: c.alpha,
            bootstrap_reps: c.bootstrap_reps,
            n_r: c.n_r,
            default_rule: c.default_rule,
            seed: c.seed,
            sigma_floor: c.sigma_floor,
            max_iters: c.solver.max_iters,
            rel_tol: c.solver.rel_tol,
            mve_tol: c.solver.mve_tol,
        }
    }
}

impl From<&ConfigFile> for DesignConfig {
    fn from(c: &ConfigFile) -> Self {
        DesignConfig {
            gamma: c.gamma,
            alpha: c.alpha,
            bootstrap_reps: c.bootstrap_reps,
            n_r: c.n_r,
            default_rule: c.default_rule,
            seed: c.seed,
            sigma_floor: c.sigma_floor,
            solver: SolverConfig {
                max_iters: c.max_iters,
                rel_tol: c.rel_tol,
                mve_tol: c.mve_tol,
            },
        }
    }
}

pub fn read_config(path: &Path) -> CliResult<DesignConfig> {
    let file: ConfigFile = toml::from_str(&read_text(path)?).map_err(|e| CliError::input(path, e))?;
    let config = DesignConfig::from(&file);
    config.validate().map_err(|e| CliError::input(path, e))?;
    Ok(config)
}

fn default_gammas() -> Vec<f64> {
    vec![1.0, 1.1, 1.5, 2.0]
}

fn default_reps() -> usize {
    1000
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct BenchmarkSection {
    #[serde(default = "default_gammas")]
    gammas: Vec<f64>,
    #[serde(default = "default_reps")]
    reps: usize,
}

impl Default for BenchmarkSection {
    fn default() -> Self {
        BenchmarkSection {
            gammas: default_gammas(),
            reps: default_reps(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecFile {
    strata: Vec<SyntheticStratum>,
    #[serde(default = "one")]
    confounding_gamma: f64,
    #[serde(default = "tilt")]
    outcome_tilt: f64,
    #[serde(default)]
    weighting: Weighting,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    benchmark: BenchmarkSection,
}

fn one() -> f64 {
    1.0
}

fn tilt() -> f64 {
    0.1
}

/// Reads a synthetic population plus its `[benchmark]` section.
pub fn read_spec(path: &Path) -> CliResult<(SyntheticSpec, BenchmarkPlan)> {
    let file: SpecFile = toml::from_str(&read_text(path)?).map_err(|e| CliError::input(path, e))?;
    let spec = SyntheticSpec {
        strata: file.strata,
        confounding_gamma: file.confounding_gamma,
        outcome_tilt: file.outcome_tilt,
        weighting: file.weighting,
        seed: file.seed,
    };
    spec.validate().map_err(|e| CliError::input(path, e))?;
    let plan = BenchmarkPlan {
        gammas: file.benchmark.gammas,
        reps: file.benchmark.reps,
    };
    if plan.reps == 0 {
        return Err(CliError::input(path, "benchmark reps must be positive"));
    }
    if plan.gammas.is_empty() || plan.gammas.iter().any(|g| !(*g >= 1.0 && g.is_finite())) {
        return Err(CliError::input(path, "benchmark gammas must be a nonempty list of values >= 1"));
    }
    Ok((spec, plan))
}

/// Exported confidence region of one stratum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionRecord {
    pub stratum: String,
    pub ellipse_center: Point,
    pub ellipse_shape: [[f64; 2]; 2],
    pub box_lo: f64,
    pub box_hi: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point_estimate: Option<Point>,
}

impl RegionRecord {
    pub fn new(r: &StratumRegion) -> Self {
        RegionRecord {
            stratum: r.stratum.clone(),
            ellipse_center: r.region.ellipse.center,
            ellipse_shape: r.region.ellipse.shape,
            box_lo: r.region.box_lo,
            box_hi: r.region.box_hi,
            point_estimate: Some(r.point_estimate),
        }
    }

    pub fn region(&self) -> stratdesign::Result<VarianceRegion> {
        let e = Ellipse::new(self.ellipse_center, self.ellipse_shape)?;
        if !(self.box_lo < self.box_hi) {
            return Err(stratdesign::Error::InvalidConfig(format!(
                "stratum `{}`: box_lo must be below box_hi",
                self.stratum
            )));
        }
        Ok(VarianceRegion::new(e, self.box_lo, self.box_hi))
    }
}

pub fn write_regions(path: &Path, regions: &[StratumRegion]) -> CliResult<()> {
    let records: Vec<RegionRecord> = regions.iter().map(RegionRecord::new).collect();
    let mut text = serde_json::to_string_pretty(&records).expect("regions serialize");
    text.push('\n');
    write_file(path, text)
}

pub fn read_regions(path: &Path) -> CliResult<Vec<RegionRecord>> {
    let records: Vec<RegionRecord> =
        serde_json::from_str(&read_text(path)?).map_err(|e| CliError::input(path, e))?;
    for r in &records {
        r.region().map_err(|e| CliError::input(path, e))?;
    }
    Ok(records)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RectangleRow {
    pub stratum: String,
    pub replicate: usize,
    pub s0_lo: f64,
    pub s0_hi: f64,
    pub s1_lo: f64,
    pub s1_hi: f64,
}

impl RectangleRow {
    pub fn new(stratum: &str, r: &ReplicateRectangle) -> Self {
        RectangleRow {
            stratum: stratum.to_string(),
            replicate: r.replicate,
            s0_lo: r.sigma0.var_lower,
            s0_hi: r.sigma0.var_upper,
            s1_lo: r.sigma1.var_lower,
            s1_hi: r.sigma1.var_upper,
        }
    }

    pub fn rectangle(&self) -> ReplicateRectangle {
        ReplicateRectangle {
            replicate: self.replicate,
            sigma0: VarBounds {
                var_lower: self.s0_lo,
                var_upper: self.s0_hi,
            },
            sigma1: VarBounds {
                var_lower: self.s1_lo,
                var_upper: self.s1_hi,
            },
        }
    }
}

fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>, header: &[&str]) -> CliResult<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::io(path, std::io::Error::other(e));
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::io(path, std::io::Error::other(e.to_string())))?;
    write_file(path, bytes)
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path, header: &[&str]) -> CliResult<Vec<T>> {
    let mut reader = csv_reader(path)?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::input(path, format!("line 1: {e}")))?
        .clone();
    if headers.is_empty() {
        return Ok(Vec::new());
    }
    if headers.iter().collect::<Vec<_>>() != header {
        return Err(CliError::input(
            path,
            format!("line 1: expected header `{}`", header.join(",")),
        ));
    }
    reader
        .deserialize()
        .map(|row| {
            row.map_err(|e: csv::Error| {
                let line = e.position().map_or(0, |p| p.line());
                CliError::input(path, format!("line {line}: {e}"))
            })
        })
        .collect()
}

const RECTANGLE_HEADER: [&str; 6] = ["stratum", "replicate", "s0_lo", "s0_hi", "s1_lo", "s1_hi"];

pub fn write_rectangles(path: &Path, regions: &[StratumRegion]) -> CliResult<()> {
    let rows = regions
        .iter()
        .flat_map(|r| r.rectangles.iter().map(|rect| RectangleRow::new(&r.stratum, rect)));
    write_csv(path, rows, &RECTANGLE_HEADER)
}

pub fn read_rectangles(path: &Path) -> CliResult<Vec<RectangleRow>> {
    read_csv(path, &RECTANGLE_HEADER)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AllocationRow {
    pub stratum: String,
    pub n_treated: u64,
    pub n_control: u64,
}

const ALLOCATION_HEADER: [&str; 3] = ["stratum", "n_treated", "n_control"];

pub fn write_allocation(path: &Path, strata: &[String], plan: &AllocationPlan) -> CliResult<()> {
    let rows = strata.iter().zip(&plan.integer).map(|(s, a)| AllocationRow {
        stratum: s.clone(),
        n_treated: a.treated,
        n_control: a.control,
    });
    write_csv(path, rows, &ALLOCATION_HEADER)
}

pub fn read_allocation(path: &Path) -> CliResult<Vec<AllocationRow>> {
    read_csv(path, &ALLOCATION_HEADER)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkCsvRow {
    pub design: String,
    pub gamma: f64,
    pub avg_loss: f64,
    pub rel_to_equal: f64,
    pub rel_to_naive: f64,
    pub reps: usize,
    pub seed: u64,
}

const BENCHMARK_HEADER: [&str; 7] = ["design", "gamma", "avg_loss", "rel_to_equal", "rel_to_naive", "reps", "seed"];

pub fn write_benchmark(path: &Path, report: &BenchmarkReport) -> CliResult<()> {
    let rows = report.rows.iter().map(|r| BenchmarkCsvRow {
        design: r.design.name().to_string(),
        gamma: r.gamma,
        avg_loss: r.avg_loss,
        rel_to_equal: r.rel_to_equal,
        rel_to_naive: r.rel_to_naive,
        reps: r.reps,
        seed: r.seed,
    });
    write_csv(path, rows, &BENCHMARK_HEADER)
}

pub fn read_benchmark(path: &Path) -> CliResult<Vec<BenchmarkCsvRow>> {
    read_csv(path, &BENCHMARK_HEADER)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Numerical(format!("cannot serialize {}: {e}", path.display())))?;
    text.push('\n');
    write_file(path, text)
}
