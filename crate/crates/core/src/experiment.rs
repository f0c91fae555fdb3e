//! Holdout comparison of greedy selection against the Random-MP and Max Points
//! baselines over a sweep of budgets.

use serde::{Deserialize, Serialize};

use crate::coverage::{percentage_coverage_with, CoverageMatrix, CoverageMetric};
use crate::selection::{
    baseline_max_points, baseline_random_mp, greedy_max_coverage, ColocationProfile,
    SelectionConfig, RANDOM_MP_GENERATOR,
};
use crate::store::VehicleId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluationConfig {
    pub budgets: Vec<usize>,
    pub random_mp_runs: usize,
    pub k_min_records: u64,
    pub seed: u64,
    pub metric: CoverageMetric,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            budgets: vec![10, 20, 30, 40, 50],
            random_mp_runs: 10,
            k_min_records: 0,
            seed: 0,
            metric: CoverageMetric::Union,
        }
    }
}

impl EvaluationConfig {
    /// Seed of the `run`-th Random-MP repetition.
    pub fn random_mp_seed(&self, run: usize) -> u64 {
        self.seed.wrapping_add(run as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetRow {
    pub budget: usize,
    pub greedy: f64,
    pub max_points: f64,
    pub random_mp_mean: f64,
    /// Sample standard deviation (n - 1); 0 with fewer than two runs.
    pub random_mp_std: f64,
    pub random_mp: Vec<f64>,
    pub greedy_vehicles: Vec<VehicleId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub train_vehicles: usize,
    pub test_vehicles: usize,
    pub test_universe_size: usize,
    pub random_mp_generator: String,
    pub rows: Vec<BudgetRow>,
}

/// Select on `train`, score on `test`.
///
/// Greedy runs once at the largest budget; smaller budgets take prefixes of
/// its pick order, which is what a direct run at that budget would return.
pub fn evaluate_methods(
    train: &CoverageMatrix,
    test: &CoverageMatrix,
    profile: &ColocationProfile,
    selection: &SelectionConfig,
    cfg: &EvaluationConfig,
) -> EvaluationReport {
    let max_budget = cfg.budgets.iter().copied().max().unwrap_or(0);
    let greedy = greedy_max_coverage(
        train,
        profile,
        &SelectionConfig {
            budget: max_budget,
            ..selection.clone()
        },
    );
    let score = |chosen: &[VehicleId]| percentage_coverage_with(test, chosen, cfg.metric);

    let rows = cfg
        .budgets
        .iter()
        .map(|&budget| {
            let prefix = &greedy.chosen[..budget.min(greedy.chosen.len())];
            let random_mp: Vec<f64> = (0..cfg.random_mp_runs)
                .map(|run| {
                    score(
                        &baseline_random_mp(
                            train,
                            cfg.k_min_records,
                            budget,
                            cfg.random_mp_seed(run),
                        )
                        .chosen,
                    )
                })
                .collect();
            let (mean, std) = mean_and_sample_std(&random_mp);
            BudgetRow {
                budget,
                greedy: score(prefix),
                max_points: score(&baseline_max_points(train, budget).chosen),
                random_mp_mean: mean,
                random_mp_std: std,
                random_mp,
                greedy_vehicles: prefix.to_vec(),
            }
        })
        .collect();

    EvaluationReport {
        train_vehicles: train.len(),
        test_vehicles: test.len(),
        test_universe_size: test.universe_size(),
        random_mp_generator: RANDOM_MP_GENERATOR.to_string(),
        rows,
    }
}

pub fn mean_and_sample_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
