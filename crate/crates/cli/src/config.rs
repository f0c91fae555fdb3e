//! Run configuration: defaults, an optional TOML or JSON file, then flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, ValueEnum};
use fleet_select::{BoundingBox, Constraints, CoverageMetric, SensorColocationMode, StoreConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    #[default]
    Greedy,
    MinBudget,
    Incremental,
    RandomMp,
    MaxPoints,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SensorModeArg {
    AllFleet,
    SelectedOnly,
}

impl From<SensorModeArg> for SensorColocationMode {
    fn from(m: SensorModeArg) -> Self {
        match m {
            SensorModeArg::AllFleet => SensorColocationMode::AllFleet,
            SensorModeArg::SelectedOnly => SensorColocationMode::SelectedOnly,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    Union,
    Multiplicity,
}

impl From<MetricArg> for CoverageMetric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Union => CoverageMetric::Union,
            MetricArg::Multiplicity => CoverageMetric::Multiplicity,
        }
    }
}

/// Every tunable of the pipeline. Echoed into each report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub spatial_granularity_m: f64,
    pub temporal_granularity_s: i64,
    pub epoch: i64,
    pub index_geohash_precision: usize,
    pub extent: Option<BoundingBox>,
    /// Strata document (custom polygons or an exported grid); overrides the grid.
    pub strata_file: Option<PathBuf>,
    pub colocation_spatial_radius_m: f64,
    pub colocation_temporal_radius_s: i64,

    pub algorithm: Algorithm,
    pub budget: usize,
    pub min_ref_colocations: u64,
    pub min_sensor_colocations: u64,
    pub sensor_colocation_mode: SensorColocationMode,
    pub weights_file: Option<PathBuf>,
    /// Weighted coverage to reach with `min-budget`.
    pub coverage_target: Option<f64>,
    /// Already deployed vehicles for `incremental`.
    pub existing: Vec<u64>,
    pub k_min_records: u64,
    pub seed: u64,

    pub budgets: Vec<usize>,
    pub random_mp_runs: usize,
    pub metric: CoverageMetric,
}

impl Default for RunConfig {
    fn default() -> Self {
        let store = StoreConfig::default();
        Self {
            spatial_granularity_m: 100.0,
            temporal_granularity_s: store.temporal_granularity_s,
            epoch: store.epoch,
            index_geohash_precision: store.index_geohash_precision,
            extent: None,
            strata_file: None,
            colocation_spatial_radius_m: store.colocation_spatial_radius_m,
            colocation_temporal_radius_s: store.colocation_temporal_radius_s,
            algorithm: Algorithm::Greedy,
            budget: 10,
            min_ref_colocations: 0,
            min_sensor_colocations: 0,
            sensor_colocation_mode: SensorColocationMode::AllFleet,
            weights_file: None,
            coverage_target: None,
            existing: Vec::new(),
            k_min_records: 0,
            seed: 0,
            budgets: vec![10, 20, 30, 40, 50],
            random_mp_runs: 10,
            metric: CoverageMetric::Union,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let parsed = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(anyhow::Error::from)
        } else {
            toml::from_str(&text).map_err(anyhow::Error::from)
        };
        parsed.with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn store_config(&self) -> StoreConfig {
        StoreConfig {
            temporal_granularity_s: self.temporal_granularity_s,
            epoch: self.epoch,
            index_geohash_precision: self.index_geohash_precision,
            colocation_spatial_radius_m: self.colocation_spatial_radius_m,
            colocation_temporal_radius_s: self.colocation_temporal_radius_s,
        }
    }

    pub fn constraints(&self) -> Constraints {
        Constraints {
            min_ref_colocations: self.min_ref_colocations,
            min_sensor_colocations: self.min_sensor_colocations,
            sensor_colocation_mode: self.sensor_colocation_mode,
        }
    }
}

fn parse_extent(s: &str) -> Result<BoundingBox, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    let [min_lon, min_lat, max_lon, max_lat] = parts[..] else {
        return Err("expected min_lon,min_lat,max_lon,max_lat".into());
    };
    BoundingBox::new(min_lon, min_lat, max_lon, max_lat).map_err(|e| e.to_string())
}

#[derive(Debug, Args, Default)]
pub struct PipelineArgs {
    /// Grid cell size in meters.
    #[arg(long)]
    pub spatial_granularity_m: Option<f64>,
    /// Interval width in seconds.
    #[arg(long)]
    pub temporal_granularity_s: Option<i64>,
    /// Start of interval 0, in the records' time base.
    #[arg(long)]
    pub epoch: Option<i64>,
    #[arg(long)]
    pub index_geohash_precision: Option<usize>,
    /// Study area as min_lon,min_lat,max_lon,max_lat.
    #[arg(long, value_parser = parse_extent, allow_hyphen_values = true)]
    pub extent: Option<BoundingBox>,
    /// GeoJSON strata document to use instead of a grid.
    #[arg(long)]
    pub strata_file: Option<PathBuf>,
    #[arg(long)]
    pub colocation_spatial_radius_m: Option<f64>,
    #[arg(long)]
    pub colocation_temporal_radius_s: Option<i64>,
}

#[derive(Debug, Args, Default)]
pub struct SelectArgs {
    #[arg(long, value_enum)]
    pub algorithm: Option<Algorithm>,
    /// Maximum number of vehicles to pick.
    #[arg(long)]
    pub budget: Option<usize>,
    /// Minimum reference-monitor colocations per chosen vehicle.
    #[arg(long, short = 'b')]
    pub min_ref_colocations: Option<u64>,
    /// Minimum vehicle-to-vehicle colocations per chosen vehicle.
    #[arg(long, short = 's')]
    pub min_sensor_colocations: Option<u64>,
    #[arg(long, value_enum)]
    pub sensor_colocation_mode: Option<SensorModeArg>,
    /// CSV of stratum_id,interval_id,weight; unlisted cells weigh 1.
    #[arg(long)]
    pub weights_file: Option<PathBuf>,
    #[arg(long)]
    pub coverage_target: Option<f64>,
    /// Comma-separated ids of vehicles already deployed.
    #[arg(long, value_delimiter = ',')]
    pub existing: Option<Vec<u64>>,
    /// Random-MP eligibility: minimum record count.
    #[arg(long)]
    pub k_min_records: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args, Default)]
pub struct EvalArgs {
    /// Comma-separated budget sweep.
    #[arg(long, value_delimiter = ',')]
    pub budgets: Option<Vec<usize>>,
    #[arg(long)]
    pub random_mp_runs: Option<usize>,
    #[arg(long, value_enum)]
    pub metric: Option<MetricArg>,
}

macro_rules! overlay {
    ($cfg:ident, $args:ident, $($field:ident),+) => {
        $(if let Some(v) = $args.$field.take() { $cfg.$field = v.into(); })+
    };
}

impl PipelineArgs {
    pub fn apply(mut self, cfg: &mut RunConfig) -> anyhow::Result<()> {
        overlay!(
            cfg,
            self,
            spatial_granularity_m,
            temporal_granularity_s,
            epoch,
            index_geohash_precision,
            colocation_spatial_radius_m,
            colocation_temporal_radius_s
        );
        if let Some(e) = self.extent {
            cfg.extent = Some(e);
        }
        if let Some(p) = self.strata_file {
            cfg.strata_file = Some(p);
        }
        if !cfg.spatial_granularity_m.is_finite() || cfg.spatial_granularity_m <= 0.0 {
            bail!("spatial granularity must be positive");
        }
        cfg.store_config().validate()?;
        Ok(())
    }
}

impl SelectArgs {
    pub fn apply(mut self, cfg: &mut RunConfig) {
        overlay!(
            cfg,
            self,
            algorithm,
            budget,
            min_ref_colocations,
            min_sensor_colocations,
            sensor_colocation_mode,
            existing,
            k_min_records,
            seed
        );
        if let Some(p) = self.weights_file {
            cfg.weights_file = Some(p);
        }
        if let Some(k) = self.coverage_target {
            cfg.coverage_target = Some(k);
        }
    }
}

impl EvalArgs {
    pub fn apply(mut self, cfg: &mut RunConfig) {
        overlay!(cfg, self, budgets, random_mp_runs, metric);
    }
}
