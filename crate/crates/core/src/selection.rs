//! Vehicle selection: greedy weighted maximum coverage with calibration
//! colocation constraints, its budget-minimizing and incremental variants, an
//! exhaustive optimum for small fleets, and the Random-MP / Max Points baselines.
//!
//! All routines break ties toward the smallest vehicle id.

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coverage::{CoverageMatrix, WeightMap};
use crate::error::{Error, Result};
use crate::store::{MobilityStore, ReferenceMonitor, VehicleId};

/// Generator used by the Random-MP baseline: ChaCha8 seeded with
/// `seed_from_u64`, partial Fisher-Yates shuffle of the eligible ids.
pub const RANDOM_MP_GENERATOR: &str = "chacha8/seed_from_u64/partial_fisher_yates";

/// Vehicles above this count are refused by [`brute_force_optimum`].
pub const BRUTE_FORCE_MAX_VEHICLES: usize = 20;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorColocationMode {
    /// A vehicle's sensor colocations count against every other fleet vehicle.
    #[default]
    AllFleet,
    /// Only colocations with other members of the final selection count, so
    /// every chosen vehicle needs `s` colocations with the rest of the set.
    /// Greedy lets the first member in on its fleet-wide count and requires
    /// each later pick to reach `s` against the members so far.
    SelectedOnly,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Constraints {
    pub min_ref_colocations: u64,
    pub min_sensor_colocations: u64,
    pub sensor_colocation_mode: SensorColocationMode,
}

impl Constraints {
    pub fn is_active(&self) -> bool {
        self.min_ref_colocations > 0 || self.min_sensor_colocations > 0
    }
}

#[derive(Debug, Clone, Default)]
pub struct SelectionConfig {
    pub budget: usize,
    pub constraints: Constraints,
    pub weights: WeightMap,
}

impl SelectionConfig {
    pub fn with_budget(budget: usize) -> Self {
        Self {
            budget,
            ..Default::default()
        }
    }
}

/// Colocation counts feeding the calibration constraints.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ColocationProfile {
    /// Colocations with reference monitors per vehicle.
    #[serde(default)]
    pub reference: BTreeMap<VehicleId, u64>,
    /// Vehicle-pair colocations keyed `(smaller id, larger id)`.
    #[serde(default, with = "pair_list")]
    pub pairs: BTreeMap<(VehicleId, VehicleId), u64>,
}

impl ColocationProfile {
    pub fn from_store(store: &MobilityStore, monitors: &[ReferenceMonitor]) -> Self {
        Self {
            reference: store.reference_colocation_counts(monitors),
            pairs: store.pairwise_colocation_counts(),
        }
    }

    pub fn with_reference(mut self, counts: impl IntoIterator<Item = (VehicleId, u64)>) -> Self {
        self.reference.extend(counts);
        self
    }

    /// Adds `count` to the symmetric pair count of `a` and `b`.
    pub fn add_pair(&mut self, a: VehicleId, b: VehicleId, count: u64) {
        if a != b {
            *self.pairs.entry((a.min(b), a.max(b))).or_insert(0) += count;
        }
    }

    pub fn ref_colocations(&self, v: VehicleId) -> u64 {
        self.reference.get(&v).copied().unwrap_or(0)
    }

    pub fn pair(&self, a: VehicleId, b: VehicleId) -> u64 {
        self.pairs.get(&(a.min(b), a.max(b))).copied().unwrap_or(0)
    }

    /// Colocations of `v` with every other vehicle.
    pub fn fleet_sensor_colocations(&self) -> HashMap<VehicleId, u64> {
        let mut out = HashMap::new();
        for (&(a, b), &n) in &self.pairs {
            *out.entry(a).or_insert(0) += n;
            *out.entry(b).or_insert(0) += n;
        }
        out
    }
}

mod pair_list {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    type Pairs = BTreeMap<(u64, u64), u64>;

    pub fn serialize<S: Serializer>(pairs: &Pairs, s: S) -> Result<S::Ok, S::Error> {
        let list: Vec<(u64, u64, u64)> = pairs.iter().map(|(&(a, b), &n)| (a, b, n)).collect();
        list.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Pairs, D::Error> {
        let list = Vec::<(u64, u64, u64)>::deserialize(d)?;
        let mut pairs = Pairs::new();
        for (a, b, n) in list {
            if a == b {
                return Err(serde::de::Error::custom(format!(
                    "pair ({a}, {a}) names one vehicle"
                )));
            }
            *pairs.entry((a.min(b), a.max(b))).or_insert(0) += n;
        }
        Ok(pairs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    BudgetExhausted,
    NoGain,
    CoverageReached,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    /// Picks in selection order.
    pub chosen: Vec<VehicleId>,
    /// Weighted coverage added by each pick.
    pub marginal_gains: Vec<f64>,
    /// Weighted coverage of everything deployed, including pre-existing vehicles.
    pub total_weighted_coverage: f64,
    /// Weighted coverage of pre-existing vehicles (incremental deployments only).
    pub initial_weighted_coverage: f64,
    pub feasible: bool,
    pub stop_reason: StopReason,
}

/// Mutable greedy state over dense universe indices.
struct Greedy<'a> {
    m: &'a CoverageMatrix,
    weights: Vec<f64>,
    profile: &'a ColocationProfile,
    constraints: Constraints,
    fleet_sensor: HashMap<VehicleId, u64>,
    covered: Vec<bool>,
    selected: Vec<bool>,
    selected_ids: Vec<VehicleId>,
    chosen: Vec<VehicleId>,
    gains: Vec<f64>,
}

enum Candidate {
    Best(usize, f64),
    /// Unselected vehicles remain but none passes the constraints.
    Blocked,
    /// Every vehicle is already selected.
    Exhausted,
}

impl<'a> Greedy<'a> {
    fn new(
        m: &'a CoverageMatrix,
        weights: &WeightMap,
        profile: &'a ColocationProfile,
        constraints: Constraints,
    ) -> Self {
        Self {
            m,
            weights: weights.dense(m),
            profile,
            constraints,
            fleet_sensor: profile.fleet_sensor_colocations(),
            covered: vec![false; m.universe_size()],
            selected: vec![false; m.len()],
            selected_ids: Vec::new(),
            chosen: Vec::new(),
            gains: Vec::new(),
        }
    }

    fn preselect(&mut self, existing: &[VehicleId]) -> Result<()> {
        for &v in existing {
            let p = self.m.position(v).ok_or(Error::UnknownVehicle(v))?;
            if !self.selected[p] {
                self.mark(p);
            }
        }
        Ok(())
    }

    fn eligible(&self, p: usize) -> bool {
        let v = self.m.vehicle_ids()[p];
        let c = &self.constraints;
        if self.profile.ref_colocations(v) < c.min_ref_colocations {
            return false;
        }
        if c.min_sensor_colocations == 0 {
            return true;
        }
        let sensor = match c.sensor_colocation_mode {
            SensorColocationMode::AllFleet => self.fleet_sensor.get(&v).copied().unwrap_or(0),
            // the first member only needs someone it could pair with; every
            // later pick pairs with the members so far, which tops up theirs
            SensorColocationMode::SelectedOnly if self.selected_ids.is_empty() => {
                self.fleet_sensor.get(&v).copied().unwrap_or(0)
            }
            SensorColocationMode::SelectedOnly => self
                .selected_ids
                .iter()
                .map(|&s| self.profile.pair(v, s))
                .sum(),
        };
        sensor >= c.min_sensor_colocations
    }

    fn gain(&self, p: usize) -> f64 {
        self.m
            .set_at(p)
            .iter()
            .filter(|&&c| !self.covered[c as usize])
            .map(|&c| self.weights[c as usize])
            .sum()
    }

    fn best(&self) -> Candidate {
        let mut best: Option<(usize, f64)> = None;
        let mut any_unselected = false;
        for p in 0..self.m.len() {
            if self.selected[p] {
                continue;
            }
            any_unselected = true;
            if !self.eligible(p) {
                continue;
            }
            let g = self.gain(p);
            if best.is_none_or(|(_, bg)| g > bg) {
                best = Some((p, g));
            }
        }
        match best {
            Some((p, g)) => Candidate::Best(p, g),
            None if any_unselected => Candidate::Blocked,
            None => Candidate::Exhausted,
        }
    }

    fn mark(&mut self, p: usize) {
        self.selected[p] = true;
        self.selected_ids.push(self.m.vehicle_ids()[p]);
        for &c in self.m.set_at(p) {
            self.covered[c as usize] = true;
        }
    }

    fn take(&mut self, p: usize, gain: f64) {
        self.mark(p);
        self.chosen.push(self.m.vehicle_ids()[p]);
        self.gains.push(gain);
    }

    /// Weighted value of all covered cells, summed in universe order.
    fn value(&self) -> f64 {
        self.covered
            .iter()
            .zip(&self.weights)
            .filter(|(&c, _)| c)
            .map(|(_, &w)| w)
            .sum()
    }

    /// Whether constraint filtering leaves fewer vehicles than the budget needs.
    fn fleet_short_of(&self, budget: usize) -> bool {
        if self.constraints.sensor_colocation_mode == SensorColocationMode::SelectedOnly
            && self.constraints.min_sensor_colocations > 0
        {
            return false;
        }
        let open = (0..self.m.len()).filter(|&p| !self.selected[p]);
        let eligible = open.clone().filter(|&p| self.eligible(p)).count();
        eligible < budget.min(open.count())
    }

    /// A selection-only run that ends with one member and no partner for it.
    fn lone_member(&self) -> bool {
        self.constraints.sensor_colocation_mode == SensorColocationMode::SelectedOnly
            && self.constraints.min_sensor_colocations > 0
            && self.selected_ids.len() == 1
            && self.chosen.len() == 1
    }

    fn clear_picks(&mut self) {
        self.chosen.clear();
        self.gains.clear();
        self.selected_ids.clear();
        self.selected.fill(false);
        self.covered.fill(false);
    }

    fn max_coverage(mut self, budget: usize, initial: f64) -> SelectionResult {
        let short = self.fleet_short_of(budget);
        let stop = loop {
            if self.chosen.len() >= budget {
                break StopReason::BudgetExhausted;
            }
            match self.best() {
                Candidate::Best(_, g) if g <= 0.0 => break StopReason::NoGain,
                Candidate::Best(p, g) => self.take(p, g),
                Candidate::Blocked => break StopReason::Infeasible,
                Candidate::Exhausted => break StopReason::NoGain,
            }
        };
        if self.lone_member() {
            self.clear_picks();
            return self.finish(StopReason::Infeasible, false, initial);
        }
        let feasible = !short && stop != StopReason::Infeasible;
        self.finish(stop, feasible, initial)
    }

    fn finish(self, stop_reason: StopReason, feasible: bool, initial: f64) -> SelectionResult {
        SelectionResult {
            total_weighted_coverage: self.value(),
            initial_weighted_coverage: initial,
            chosen: self.chosen,
            marginal_gains: self.gains,
            feasible,
            stop_reason,
        }
    }
}

/// Greedy weighted maximum coverage under a vehicle budget.
///
/// Each round picks the unselected vehicle passing the colocation thresholds
/// with the largest weighted marginal gain. The loop stops early once no
/// candidate adds coverage. `feasible` is false when constraints leave fewer
/// eligible vehicles than the budget asks for.
pub fn greedy_max_coverage(
    m: &CoverageMatrix,
    profile: &ColocationProfile,
    cfg: &SelectionConfig,
) -> SelectionResult {
    Greedy::new(m, &cfg.weights, profile, cfg.constraints).max_coverage(cfg.budget, 0.0)
}

/// Greedy picks until weighted coverage reaches `k`.
pub fn greedy_min_budget(
    m: &CoverageMatrix,
    profile: &ColocationProfile,
    weights: &WeightMap,
    k: f64,
    constraints: Constraints,
) -> SelectionResult {
    let mut g = Greedy::new(m, weights, profile, constraints);
    let mut value = 0.0;
    let stop = loop {
        if value >= k {
            break StopReason::CoverageReached;
        }
        match g.best() {
            Candidate::Best(p, gain) if gain > 0.0 => {
                g.take(p, gain);
                value = g.value();
            }
            _ => break StopReason::Infeasible,
        }
    };
    if g.lone_member() {
        g.clear_picks();
        return g.finish(StopReason::Infeasible, false, 0.0);
    }
    g.finish(stop, stop == StopReason::CoverageReached, 0.0)
}

/// Extends an existing deployment by up to `extra_budget` vehicles. Occupancy
/// starts from the existing vehicles' coverage; only new picks are returned.
/// `cfg.budget` is ignored in favour of `extra_budget`.
pub fn greedy_incremental(
    m: &CoverageMatrix,
    profile: &ColocationProfile,
    existing: &[VehicleId],
    extra_budget: usize,
    cfg: &SelectionConfig,
) -> Result<SelectionResult> {
    let mut g = Greedy::new(m, &cfg.weights, profile, cfg.constraints);
    g.preselect(existing)?;
    let initial = g.value();
    Ok(g.max_coverage(extra_budget, initial))
}

/// Exact optimum by exhaustive search over every feasible subset of at most
/// `budget` vehicles. Among equal values the shortest id list wins, then the
/// lexicographically smallest.
pub fn brute_force_optimum(
    m: &CoverageMatrix,
    profile: &ColocationProfile,
    weights: &WeightMap,
    budget: usize,
    constraints: Constraints,
) -> Result<(f64, Vec<VehicleId>)> {
    if m.len() > BRUTE_FORCE_MAX_VEHICLES {
        return Err(Error::TooManyVehicles {
            got: m.len(),
            max: BRUTE_FORCE_MAX_VEHICLES,
        });
    }
    let fleet_sensor = profile.fleet_sensor_colocations();
    let per_subset_sensor = constraints.min_sensor_colocations > 0
        && constraints.sensor_colocation_mode == SensorColocationMode::SelectedOnly;
    let candidates: Vec<usize> = (0..m.len())
        .filter(|&p| {
            let v = m.vehicle_ids()[p];
            profile.ref_colocations(v) >= constraints.min_ref_colocations
                && (per_subset_sensor
                    || fleet_sensor.get(&v).copied().unwrap_or(0)
                        >= constraints.min_sensor_colocations)
        })
        .collect();

    let mut search = Exhaustive {
        m,
        profile,
        weights: weights.dense(m),
        candidates,
        budget,
        min_sensor: if per_subset_sensor {
            constraints.min_sensor_colocations
        } else {
            0
        },
        counts: vec![0; m.universe_size()],
        stack: Vec::new(),
        best_value: 0.0,
        best: Vec::new(),
    };
    search.visit(0, 0.0);
    let ids = search.best.iter().map(|&p| m.vehicle_ids()[p]).collect();
    Ok((search.best_value, ids))
}

struct Exhaustive<'a> {
    m: &'a CoverageMatrix,
    profile: &'a ColocationProfile,
    weights: Vec<f64>,
    candidates: Vec<usize>,
    budget: usize,
    min_sensor: u64,
    counts: Vec<u32>,
    stack: Vec<usize>,
    best_value: f64,
    best: Vec<usize>,
}

impl Exhaustive<'_> {
    /// Pre-order walk that extends the current subset with larger candidates,
    /// so subsets are visited in lexicographic order.
    fn visit(&mut self, next: usize, value: f64) {
        let better = value > self.best_value
            || (value == self.best_value && self.stack.len() < self.best.len());
        if better && self.subset_ok() {
            self.best_value = value;
            self.best = self.stack.clone();
        }
        if self.stack.len() >= self.budget {
            return;
        }
        for i in next..self.candidates.len() {
            let p = self.candidates[i];
            let mut added = 0.0;
            for &c in self.m.set_at(p) {
                if self.counts[c as usize] == 0 {
                    added += self.weights[c as usize];
                }
                self.counts[c as usize] += 1;
            }
            self.stack.push(p);
            self.visit(i + 1, value + added);
            self.stack.pop();
            for &c in self.m.set_at(p) {
                self.counts[c as usize] -= 1;
            }
        }
    }

    fn subset_ok(&self) -> bool {
        if self.min_sensor == 0 {
            return true;
        }
        let ids: Vec<VehicleId> = self
            .stack
            .iter()
            .map(|&p| self.m.vehicle_ids()[p])
            .collect();
        ids.iter().all(|&v| {
            ids.iter()
                .filter(|&&o| o != v)
                .map(|&o| self.profile.pair(v, o))
                .sum::<u64>()
                >= self.min_sensor
        })
    }
}

/// Marginal gains of an externally ordered pick list.
fn evaluate_order(m: &CoverageMatrix, weights: &WeightMap, order: &[VehicleId]) -> (Vec<f64>, f64) {
    let dense = weights.dense(m);
    let mut covered = vec![false; m.universe_size()];
    let mut gains = Vec::with_capacity(order.len());
    for &v in order {
        let p = m.position(v).expect("baseline picks come from the matrix");
        let mut g = 0.0;
        for &c in m.set_at(p) {
            if !covered[c as usize] {
                covered[c as usize] = true;
                g += dense[c as usize];
            }
        }
        gains.push(g);
    }
    let total = covered
        .iter()
        .zip(&dense)
        .filter(|(&c, _)| c)
        .map(|(_, &w)| w)
        .sum();
    (gains, total)
}

fn baseline_result(m: &CoverageMatrix, chosen: Vec<VehicleId>, budget: usize) -> SelectionResult {
    let (marginal_gains, total) = evaluate_order(m, &WeightMap::uniform(), &chosen);
    let filled = chosen.len() >= budget;
    SelectionResult {
        chosen,
        marginal_gains,
        total_weighted_coverage: total,
        initial_weighted_coverage: 0.0,
        feasible: filled,
        stop_reason: if filled {
            StopReason::BudgetExhausted
        } else {
            StopReason::Infeasible
        },
    }
}

/// Random-MP: uniform sample without replacement among vehicles reporting at
/// least `k_min_records` records.
pub fn baseline_random_mp(
    m: &CoverageMatrix,
    k_min_records: u64,
    budget: usize,
    seed: u64,
) -> SelectionResult {
    let mut eligible: Vec<VehicleId> = (0..m.len())
        .filter(|&p| m.record_count_at(p) >= k_min_records)
        .map(|p| m.vehicle_ids()[p])
        .collect();
    let take = budget.min(eligible.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (picked, _) = eligible.partial_shuffle(&mut rng, take);
    let chosen = picked.to_vec();
    baseline_result(m, chosen, budget)
}

/// Max Points: the `budget` vehicles with the most records.
pub fn baseline_max_points(m: &CoverageMatrix, budget: usize) -> SelectionResult {
    let mut order: Vec<usize> = (0..m.len()).collect();
    order.sort_by_key(|&p| (std::cmp::Reverse(m.record_count_at(p)), m.vehicle_ids()[p]));
    let chosen = order
        .into_iter()
        .take(budget)
        .map(|p| m.vehicle_ids()[p])
        .collect();
    baseline_result(m, chosen, budget)
}
