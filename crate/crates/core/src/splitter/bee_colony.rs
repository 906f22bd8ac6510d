use std::time::{Duration, Instant};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{random_assignment, random_partition_indexed, CellIndex, Partition};
use crate::dataset::Dataset;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BeeColonyParams {
    /// Number of food sites (candidate partitions).
    pub colony_size: usize,
    /// Most stagnant sites re-seeded per iteration.
    pub scouts: usize,
    /// Swap attempts per employed or onlooker visit; the best is kept.
    pub neighborhood: usize,
    /// Onlooker share of a site grows as `(1 / (1 + objective))^exponent`.
    pub exponent: f64,
    /// Visits without improvement before a site may be abandoned.
    pub abandonment: usize,
    pub max_iterations: usize,
    pub seed: u64,
    /// Wall-clock budget in seconds; `None` runs all iterations.
    pub time_budget_secs: Option<f64>,
}

impl Default for BeeColonyParams {
    fn default() -> Self {
        BeeColonyParams {
            colony_size: 20,
            scouts: 4,
            neighborhood: 10,
            exponent: 2.0,
            abandonment: 15,
            max_iterations: 500,
            seed: 0,
            time_budget_secs: None,
        }
    }
}

impl BeeColonyParams {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("colony_size", self.colony_size),
            ("scouts", self.scouts),
            ("neighborhood", self.neighborhood),
            ("abandonment", self.abandonment),
            ("max_iterations", self.max_iterations),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Config(format!("bee colony {name} must be at least 1")));
            }
        }
        if !(self.exponent.is_finite() && self.exponent >= 0.0) {
            return Err(Error::Config("bee colony exponent must be finite and non-negative".into()));
        }
        if self.time_budget_secs.is_some_and(|t| t.is_nan() || t <= 0.0) {
            return Err(Error::Config("time budget must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DbcOutcome {
    pub partition: Partition,
    pub objective: f64,
    /// Objective of the seeded random partition the search started from.
    pub initial_objective: f64,
    pub iterations: usize,
    /// Best objective after each iteration.
    pub history: Vec<f64>,
    pub timed_out: bool,
}

struct Site {
    partition: Partition,
    objective: f64,
    stagnant: usize,
    rng: ChaCha8Rng,
}

impl Site {
    /// Best-of-m swap move; applied only if it improves the site.
    fn visit(&mut self, m: usize) {
        let n = self.partition.n_records();
        let mut best: Option<(usize, usize, f64)> = None;
        for _ in 0..m {
            let i = self.rng.random_range(0..n);
            let mut j = self.rng.random_range(0..n);
            let mut tries = 0;
            while self.partition.assignment()[j] == self.partition.assignment()[i] && tries < 32 {
                j = self.rng.random_range(0..n);
                tries += 1;
            }
            let delta = self.partition.swap_delta(i, j);
            if best.is_none_or(|b| delta < b.2) {
                best = Some((i, j, delta));
            }
        }
        match best {
            Some((i, j, delta)) if delta < -1e-12 => {
                self.partition.apply_swap(i, j);
                self.objective = self.partition.objective();
                self.stagnant = 0;
            }
            _ => self.stagnant += 1,
        }
    }
}

/// Whole onlooker visits per site, proportional to `weights`, summing to
/// `total` (largest remainder, ties to the lower index).
fn allocate(weights: &[f64], total: usize) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    if sum <= 0.0 {
        return vec![total / weights.len(); weights.len()];
    }
    let quotas: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut out: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut rest: Vec<usize> = (0..weights.len()).collect();
    rest.sort_by(|&a, &b| {
        let (ra, rb) = (quotas[a] - quotas[a].floor(), quotas[b] - quotas[b].floor());
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let missing = total - out.iter().sum::<usize>();
    for &i in rest.iter().take(missing) {
        out[i] += 1;
    }
    out
}

/// Directed bee colony search over size-balanced partitions.
///
/// Site 0 starts from `random_partition(d, k, seed)`, so the result is never
/// worse than that partition. Each site owns its RNG stream; the outcome
/// does not depend on the rayon pool size.
pub fn dbc_optimize(d: &Dataset, k: usize, params: &BeeColonyParams) -> Result<DbcOutcome> {
    params.validate()?;
    let index = CellIndex::new(d)?;
    let n = index.cells.len();
    if k < 2 || n < k {
        return Err(Error::contract(format!("cannot split {n} records into {k} cohorts")));
    }
    let start = Instant::now();
    let budget = params.time_budget_secs.map(Duration::from_secs_f64);

    let initial = random_partition_indexed(&index, k, params.seed)?;
    let initial_objective = initial.objective();
    let mut sites: Vec<Site> = (0..params.colony_size)
        .map(|s| {
            let mut rng = crate::rng::stream(params.seed, 1000 + s as u64);
            let partition = if s == 0 {
                initial.clone()
            } else {
                Partition::new(&index, k, random_assignment(n, k, &mut rng)).expect("balanced")
            };
            Site {
                objective: partition.objective(),
                partition,
                stagnant: 0,
                rng,
            }
        })
        .collect();

    let mut best = initial;
    let mut best_obj = initial_objective;
    let mut history = Vec::with_capacity(params.max_iterations);
    let mut timed_out = false;
    let mut iterations = 0;
    let mut scout_rng = crate::rng::stream(params.seed, 999);

    for _ in 0..params.max_iterations {
        if budget.is_some_and(|b| start.elapsed() >= b) {
            timed_out = true;
            break;
        }
        iterations += 1;
        let m = params.neighborhood;
        // employed bees
        sites.par_iter_mut().for_each(|s| s.visit(m));
        // onlookers
        let weights: Vec<f64> = sites
            .iter()
            .map(|s| (1.0 / (1.0 + s.objective)).powf(params.exponent))
            .collect();
        let visits = allocate(&weights, params.colony_size);
        sites.par_iter_mut().zip(visits).for_each(|(s, v)| {
            for _ in 0..v {
                s.visit(m);
            }
        });

        for s in &sites {
            if s.objective < best_obj - 1e-15 {
                best_obj = s.objective;
                best = s.partition.clone();
            }
        }
        history.push(best_obj);
        if best_obj == 0.0 {
            break;
        }

        // scouts: replace the most stagnant exhausted sites
        let mut exhausted: Vec<usize> = (0..sites.len())
            .filter(|&i| sites[i].stagnant > params.abandonment)
            .collect();
        exhausted.sort_by(|&a, &b| sites[b].stagnant.cmp(&sites[a].stagnant).then(a.cmp(&b)));
        for &i in exhausted.iter().take(params.scouts) {
            let p = Partition::new(&index, k, random_assignment(n, k, &mut scout_rng)).expect("balanced");
            sites[i].objective = p.objective();
            sites[i].partition = p;
            sites[i].stagnant = 0;
        }
    }

    debug_assert!(best.check_invariants().is_ok());
    Ok(DbcOutcome {
        objective: best_obj,
        partition: best,
        initial_objective,
        iterations,
        history,
        timed_out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::splitter::tests::people;
    use crate::splitter::{cohort_distance, random_partition};

    #[test]
    fn symmetric_optimum_is_reached() {
        let d = people(&[40.0; 8], &[1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        let out = dbc_optimize(&d, 2, &BeeColonyParams { seed: 3, ..BeeColonyParams::default() }).unwrap();
        assert_eq!(out.objective, 0.0);
        assert_eq!(cohort_distance(&out.partition, &d).unwrap(), 0.0);
    }

    #[test]
    fn history_is_monotone_and_beats_start() {
        let ages: Vec<f64> = (0..120).map(|i| 18.0 + f64::from((i * 37) % 80)).collect();
        let sexes: Vec<f64> = (0..120).map(|i| f64::from(i % 3 == 0)).collect();
        let d = people(&ages, &sexes);
        let params = BeeColonyParams { max_iterations: 60, seed: 8, ..BeeColonyParams::default() };
        let out = dbc_optimize(&d, 4, &params).unwrap();
        assert!(out.objective <= out.initial_objective);
        assert_eq!(out.initial_objective, random_partition(&d, 4, 8).unwrap().objective());
        assert!(out.history.windows(2).all(|w| w[1] <= w[0]));
        assert!((cohort_distance(&out.partition, &d).unwrap() - out.objective).abs() < 1e-12);
        out.partition.check_invariants().unwrap();
    }

    #[test]
    fn independent_of_pool_size() {
        let ages: Vec<f64> = (0..90).map(|i| 20.0 + f64::from((i * 53) % 70)).collect();
        let sexes: Vec<f64> = (0..90).map(|i| f64::from(i % 2)).collect();
        let d = people(&ages, &sexes);
        let params = BeeColonyParams { max_iterations: 40, seed: 2, ..BeeColonyParams::default() };
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| dbc_optimize(&d, 3, &params).unwrap())
        };
        let (a, b) = (run(1), run(4));
        assert_eq!(a.partition, b.partition);
        assert_eq!(a.history, b.history);
    }

    #[test]
    fn tiny_budget_times_out_gracefully() {
        let ages: Vec<f64> = (0..500).map(|i| 18.0 + f64::from(i % 80)).collect();
        let d = people(&ages, &vec![0.0; 500]);
        let params = BeeColonyParams {
            time_budget_secs: Some(1e-9),
            ..BeeColonyParams::default()
        };
        let out = dbc_optimize(&d, 5, &params).unwrap();
        assert!(out.timed_out);
        assert_eq!(out.objective, out.initial_objective);
    }

    #[test]
    fn allocation_sums_to_total() {
        assert_eq!(allocate(&[1.0, 1.0, 2.0], 8), vec![2, 2, 4]);
        assert_eq!(allocate(&[1.0, 1.0, 1.0], 4).iter().sum::<usize>(), 4);
        assert!(BeeColonyParams { scouts: 0, ..BeeColonyParams::default() }.validate().is_err());
    }
}
