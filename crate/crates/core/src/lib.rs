//! Vehicle selection for city-scale drive-by sensing.
//!
//! The pipeline stratifies a study area into spatial cells ([`strata`]),
//! ingests GPS pings into a spatio-temporal index ([`store`]), turns each
//! vehicle's pings into a set of (stratum, interval) coverage cells
//! ([`coverage`]), and picks a subset of vehicles that maximizes weighted
//! coverage under a budget and calibration colocation constraints
//! ([`selection`]). [`synth`] generates fleets for experiments and
//! [`experiment`] scores selections on a held-out period.

pub mod coverage;
pub mod error;
pub mod experiment;
pub mod geo;
pub mod io;
pub mod selection;
pub mod store;
pub mod strata;
pub mod synth;

pub use coverage::{
    build_coverage, evaluate_selection, holdout_split, percentage_coverage,
    percentage_coverage_with, union_coverage, weighted_value, CoverageCell, CoverageExport,
    CoverageMatrix, CoverageMetric, WeightMap,
};
pub use error::{Error, Result};
pub use experiment::{evaluate_methods, BudgetRow, EvaluationConfig, EvaluationReport};
pub use geo::{geohash_decode, geohash_encode, haversine_distance, BoundingBox, GeoPoint, Geohash};
pub use selection::{
    baseline_max_points, baseline_random_mp, brute_force_optimum, greedy_incremental,
    greedy_max_coverage, greedy_min_budget, ColocationProfile, Constraints, SelectionConfig,
    SelectionResult, SensorColocationMode, StopReason,
};
pub use store::{
    ingest, IndexedRecord, IngestReport, MobilityRecord, MobilityStore, ReferenceMonitor,
    StoreConfig, VehicleId,
};
pub use strata::{load_custom_strata, make_grid, Stratification, Stratum, StratumId};
pub use synth::{gen_fixed_route, gen_fleet, gen_random_walk, FleetSpec};
