//! Size-balanced k-way partitions whose cohorts share the same joint
//! distribution of age band and sex.

mod bee_colony;

use rand::seq::SliceRandom;
use serde::Serialize;

pub use bee_colony::{dbc_optimize, BeeColonyParams, DbcOutcome};

use crate::dataset::{Dataset, FeatureKind};
use crate::{Error, Result};

pub const AGE_COLUMN: &str = "AGE";
pub const SEX_COLUMN: &str = "GENDER";

/// Lower edges of the 10-year age bands; the last band is open-ended and
/// ages below 18 fall into the first.
pub const AGE_BIN_EDGES: [f64; 9] = [18.0, 28.0, 38.0, 48.0, 58.0, 68.0, 78.0, 88.0, 98.0];

pub fn age_bin(age: f64) -> usize {
    AGE_BIN_EDGES.iter().rposition(|&e| age >= e).unwrap_or(0)
}

/// Histogram cell of every record: `age_bin * n_sex + sex`, or the final
/// "missing" cell when either value is absent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellIndex {
    pub cells: Vec<usize>,
    pub n_cells: usize,
}

impl CellIndex {
    pub fn new(d: &Dataset) -> Result<Self> {
        let age = d
            .column_by_name(AGE_COLUMN)
            .ok_or_else(|| Error::MissingColumn(AGE_COLUMN.into()))?;
        let sex = d
            .column_by_name(SEX_COLUMN)
            .ok_or_else(|| Error::MissingColumn(SEX_COLUMN.into()))?;
        let n_sex = match &d.schema().feature(SEX_COLUMN).expect("present").kind {
            FeatureKind::Binary => 2,
            FeatureKind::Categorical { categories } | FeatureKind::Ordinal { categories } => categories.len(),
            FeatureKind::Continuous { .. } => {
                return Err(Error::Schema(format!("{SEX_COLUMN} must be categorical")))
            }
        };
        let missing = AGE_BIN_EDGES.len() * n_sex;
        let cells = age
            .iter()
            .zip(sex)
            .map(|(&a, &s)| {
                if a.is_nan() || s.is_nan() {
                    missing
                } else {
                    age_bin(a) * n_sex + s as usize
                }
            })
            .collect();
        Ok(CellIndex {
            cells,
            n_cells: missing + 1,
        })
    }
}

/// Assignment of records to `k` cohorts with cached per-cohort histograms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Partition {
    k: usize,
    assignment: Vec<usize>,
    #[serde(skip)]
    cells: Vec<usize>,
    #[serde(skip)]
    counts: Vec<Vec<u32>>,
    #[serde(skip)]
    sizes: Vec<usize>,
}

impl Partition {
    /// Validates `assignment` (entries in `[0, k)`, sizes within one of each
    /// other) and caches histograms over `index`.
    pub fn new(index: &CellIndex, k: usize, assignment: Vec<usize>) -> Result<Self> {
        if k < 2 {
            return Err(Error::contract("a partition needs at least two cohorts"));
        }
        if assignment.len() != index.cells.len() {
            return Err(Error::contract("assignment length differs from the record count"));
        }
        if assignment.len() < k {
            return Err(Error::contract(format!("{} records cannot fill {k} cohorts", assignment.len())));
        }
        let mut counts = vec![vec![0u32; index.n_cells]; k];
        let mut sizes = vec![0usize; k];
        for (&c, &cell) in assignment.iter().zip(&index.cells) {
            if c >= k {
                return Err(Error::contract(format!("cohort index {c} out of range")));
            }
            counts[c][cell] += 1;
            sizes[c] += 1;
        }
        let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
        if hi - lo > 1 {
            return Err(Error::contract("cohort sizes differ by more than one"));
        }
        Ok(Partition {
            k,
            assignment,
            cells: index.cells.clone(),
            counts,
            sizes,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_records(&self) -> usize {
        self.assignment.len()
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Cached cell counts of cohort `c`.
    pub fn histogram(&self, c: usize) -> &[u32] {
        &self.counts[c]
    }

    /// Record indices per cohort, ascending.
    pub fn cohorts(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (i, &c) in self.assignment.iter().enumerate() {
            out[c].push(i);
        }
        out
    }

    /// Records outside cohort `c`, ascending.
    pub fn complement(&self, c: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&i| self.assignment[i] != c).collect()
    }

    /// Re-derives every cached quantity and checks the size rule.
    pub fn check_invariants(&self) -> Result<()> {
        let mut counts = vec![vec![0u32; self.counts[0].len()]; self.k];
        for (&c, &cell) in self.assignment.iter().zip(&self.cells) {
            counts[c][cell] += 1;
        }
        if counts != self.counts {
            return Err(Error::contract("cached histograms are stale"));
        }
        let sizes: Vec<usize> = counts.iter().map(|h| h.iter().map(|&v| v as usize).sum()).collect();
        if sizes != self.sizes || sizes.iter().sum::<usize>() != self.assignment.len() {
            return Err(Error::contract("cached sizes are stale"));
        }
        if sizes.iter().max().unwrap() - sizes.iter().min().unwrap() > 1 {
            return Err(Error::contract("cohort sizes differ by more than one"));
        }
        Ok(())
    }

    /// Mean pairwise L1 distance between normalised cohort histograms,
    /// from the cache.
    pub fn objective(&self) -> f64 {
        let mut total = 0.0;
        for a in 0..self.k {
            for b in a + 1..self.k {
                total += self.pair_distance(a, b);
            }
        }
        total / (self.k * (self.k - 1) / 2) as f64
    }

    fn pair_distance(&self, a: usize, b: usize) -> f64 {
        let (na, nb) = (self.sizes[a] as f64, self.sizes[b] as f64);
        self.counts[a]
            .iter()
            .zip(&self.counts[b])
            .map(|(&x, &y)| (f64::from(x) / na - f64::from(y) / nb).abs())
            .sum()
    }

    /// Objective change if records `i` and `j` exchanged cohorts.
    pub fn swap_delta(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.assignment[i], self.assignment[j]);
        let (ci, cj) = (self.cells[i], self.cells[j]);
        if a == b || ci == cj {
            return 0.0;
        }
        // only cells ci and cj of cohorts a and b change
        let frac = |c: usize, cell: usize, adj: i64| {
            (i64::from(self.counts[c][cell]) + adj) as f64 / self.sizes[c] as f64
        };
        let adjust = |c: usize, cell: usize| -> i64 {
            match (c == a, c == b) {
                (true, _) if cell == ci => -1,
                (true, _) if cell == cj => 1,
                (_, true) if cell == cj => -1,
                (_, true) if cell == ci => 1,
                _ => 0,
            }
        };
        let mut delta = 0.0;
        for cell in [ci, cj] {
            for x in 0..self.k {
                for y in x + 1..self.k {
                    if x != a && x != b && y != a && y != b {
                        continue;
                    }
                    let before = (frac(x, cell, 0) - frac(y, cell, 0)).abs();
                    let after = (frac(x, cell, adjust(x, cell)) - frac(y, cell, adjust(y, cell))).abs();
                    delta += after - before;
                }
            }
        }
        delta / (self.k * (self.k - 1) / 2) as f64
    }

    pub fn apply_swap(&mut self, i: usize, j: usize) {
        let (a, b) = (self.assignment[i], self.assignment[j]);
        if a == b {
            return;
        }
        let (ci, cj) = (self.cells[i], self.cells[j]);
        self.counts[a][ci] -= 1;
        self.counts[a][cj] += 1;
        self.counts[b][cj] -= 1;
        self.counts[b][ci] += 1;
        self.assignment.swap(i, j);
        debug_assert!(self.check_invariants().is_ok());
    }
}

/// Objective recomputed from `d` and the assignment, ignoring the cache.
pub fn cohort_distance(p: &Partition, d: &Dataset) -> Result<f64> {
    let index = CellIndex::new(d)?;
    if index.cells.len() != p.n_records() {
        return Err(Error::contract("partition and dataset differ in length"));
    }
    let mut hist = vec![vec![0.0f64; index.n_cells]; p.k];
    let mut sizes = vec![0.0f64; p.k];
    for (&c, &cell) in p.assignment.iter().zip(&index.cells) {
        hist[c][cell] += 1.0;
        sizes[c] += 1.0;
    }
    if sizes.contains(&0.0) {
        return Err(Error::contract("a cohort has no records"));
    }
    let mut total = 0.0;
    for a in 0..p.k {
        for b in a + 1..p.k {
            total += hist[a]
                .iter()
                .zip(&hist[b])
                .map(|(x, y)| (x / sizes[a] - y / sizes[b]).abs())
                .sum::<f64>();
        }
    }
    Ok(total / (p.k * (p.k - 1) / 2) as f64)
}

pub(crate) fn random_assignment(n: usize, k: usize, rng: &mut impl rand::Rng) -> Vec<usize> {
    let mut slots: Vec<usize> = (0..n).map(|i| i % k).collect();
    slots.shuffle(rng);
    slots
}

/// Uniformly random size-balanced partition.
pub fn random_partition(d: &Dataset, k: usize, seed: u64) -> Result<Partition> {
    let index = CellIndex::new(d)?;
    random_partition_indexed(&index, k, seed)
}

/// Balanced random partition of `n` anonymous records; every record shares
/// one histogram cell, so the objective is always 0.
pub fn random_partition_n(n: usize, k: usize, seed: u64) -> Result<Partition> {
    let index = CellIndex {
        cells: vec![0; n],
        n_cells: 1,
    };
    random_partition_indexed(&index, k, seed)
}

pub(crate) fn random_partition_indexed(index: &CellIndex, k: usize, seed: u64) -> Result<Partition> {
    if k < 2 || index.cells.len() < k {
        return Err(Error::contract(format!(
            "cannot split {} records into {k} cohorts",
            index.cells.len()
        )));
    }
    let mut rng = crate::rng::stream(seed, 0x5B1);
    Partition::new(index, k, random_assignment(index.cells.len(), k, &mut rng))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::dataset::{FeatureSchema, FeatureSpec, DELAYED_TARGET, EARLY_TARGET};
    use proptest::prelude::*;

    pub(crate) fn people(ages: &[f64], sexes: &[f64]) -> Dataset {
        let schema = FeatureSchema::new(vec![
            FeatureSpec::continuous(AGE_COLUMN, 0.0, 120.0),
            FeatureSpec::categorical(SEX_COLUMN, &["female", "male"]),
            FeatureSpec::target(EARLY_TARGET),
            FeatureSpec::target(DELAYED_TARGET),
        ])
        .unwrap();
        let n = ages.len();
        Dataset::new(schema, vec![ages.to_vec(), sexes.to_vec()], [vec![0; n], vec![0; n]]).unwrap()
    }

    /// Independent recomputation: string-keyed histograms and explicit sums.
    fn oracle(ages: &[f64], sexes: &[f64], assignment: &[usize], k: usize) -> f64 {
        use std::collections::BTreeMap;
        let key = |a: f64, s: f64| {
            if a.is_nan() || s.is_nan() {
                "missing".to_string()
            } else {
                let band = if a >= 98.0 { 98 } else { 18 + 10 * (((a.max(18.0) - 18.0) / 10.0).floor() as i64) };
                format!("{band}/{s}")
            }
        };
        let mut hists: Vec<BTreeMap<String, f64>> = vec![BTreeMap::new(); k];
        let mut sizes = vec![0.0; k];
        for i in 0..ages.len() {
            *hists[assignment[i]].entry(key(ages[i], sexes[i])).or_default() += 1.0;
            sizes[assignment[i]] += 1.0;
        }
        let mut sum = 0.0;
        let mut pairs = 0.0;
        for a in 0..k {
            for b in a + 1..k {
                let keys: std::collections::BTreeSet<&String> = hists[a].keys().chain(hists[b].keys()).collect();
                for key in keys {
                    let x = hists[a].get(key).copied().unwrap_or(0.0) / sizes[a];
                    let y = hists[b].get(key).copied().unwrap_or(0.0) / sizes[b];
                    sum += (x - y).abs();
                }
                pairs += 1.0;
            }
        }
        sum / pairs
    }

    #[test]
    fn age_bands() {
        assert_eq!(age_bin(5.0), 0);
        assert_eq!(age_bin(27.9), 0);
        assert_eq!(age_bin(28.0), 1);
        assert_eq!(age_bin(97.99), 7);
        assert_eq!(age_bin(98.0), 8);
        assert_eq!(age_bin(130.0), 8);
    }

    #[test]
    fn identical_and_disjoint_cohorts() {
        let d = people(&[30.0, 30.0, 50.0, 50.0], &[0.0, 0.0, 1.0, 1.0]);
        let idx = CellIndex::new(&d).unwrap();
        let same = Partition::new(&idx, 2, vec![0, 1, 0, 1]).unwrap();
        assert_eq!(cohort_distance(&same, &d).unwrap(), 0.0);
        let d = people(&[30.0, 30.0, 30.0, 30.0], &[1.0, 1.0, 0.0, 0.0]);
        let idx = CellIndex::new(&d).unwrap();
        let apart = Partition::new(&idx, 2, vec![0, 0, 1, 1]).unwrap();
        assert_eq!(cohort_distance(&apart, &d).unwrap(), 2.0);
        assert_eq!(apart.objective(), 2.0);
    }

    #[test]
    fn twelve_records_match_oracle() {
        let ages = [19.0, 25.0, 33.0, 47.0, 47.5, 61.0, 70.0, 88.0, 99.0, f64::NAN, 40.0, 22.0];
        let sexes = [0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, f64::NAN, 0.0];
        let assignment = vec![0, 1, 2, 0, 1, 2, 0, 1, 2, 2, 1, 0];
        let d = people(&ages, &sexes);
        let p = Partition::new(&CellIndex::new(&d).unwrap(), 3, assignment.clone()).unwrap();
        let expected = oracle(&ages, &sexes, &assignment, 3);
        assert!((cohort_distance(&p, &d).unwrap() - expected).abs() < 1e-12);
        assert!((p.objective() - expected).abs() < 1e-12);
    }

    #[test]
    fn random_partition_is_balanced_and_deterministic() {
        let d = people(&[30.0; 11], &[0.0; 11]);
        let p = random_partition(&d, 5, 4).unwrap();
        let mut sizes = p.sizes().to_vec();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![2, 2, 2, 2, 3]);
        assert_eq!(p, random_partition(&d, 5, 4).unwrap());
        let d10 = people(&[30.0; 10], &[0.0; 10]);
        assert_eq!(random_partition(&d10, 5, 1).unwrap().sizes(), &[2; 5]);
        assert!(random_partition(&d10, 11, 1).is_err());
    }

    #[test]
    fn unbalanced_assignment_is_rejected() {
        let d = people(&[30.0; 5], &[0.0; 5]);
        let idx = CellIndex::new(&d).unwrap();
        assert!(Partition::new(&idx, 2, vec![0, 0, 0, 0, 1]).is_err());
        assert!(Partition::new(&idx, 2, vec![0, 0, 0, 1, 2]).is_err());
    }

    proptest! {
        #[test]
        fn swap_delta_matches_recomputation(
            recs in prop::collection::vec((18.0f64..110.0, 0u8..2), 6..40),
            k in 2usize..5,
            seed in any::<u64>(),
            swaps in prop::collection::vec((any::<prop::sample::Index>(), any::<prop::sample::Index>()), 1..20),
        ) {
            prop_assume!(recs.len() >= k);
            let ages: Vec<f64> = recs.iter().map(|r| r.0).collect();
            let sexes: Vec<f64> = recs.iter().map(|r| f64::from(r.1)).collect();
            let d = people(&ages, &sexes);
            let mut p = random_partition(&d, k, seed).unwrap();
            let obj = p.objective();
            prop_assert!(obj >= 0.0);
            // relabelling cohorts does not change the objective
            let relabelled: Vec<usize> = p.assignment().iter().map(|&c| (c + 1) % k).collect();
            let q = Partition::new(&CellIndex::new(&d).unwrap(), k, relabelled).unwrap();
            prop_assert!((q.objective() - obj).abs() < 1e-12);
            for (a, b) in swaps {
                let (i, j) = (a.index(ages.len()), b.index(ages.len()));
                let before = p.objective();
                let delta = p.swap_delta(i, j);
                p.apply_swap(i, j);
                prop_assert!(p.check_invariants().is_ok());
                let after = cohort_distance(&p, &d).unwrap();
                prop_assert!((after - before - delta).abs() < 1e-12);
                let oracle_value = oracle(&ages, &sexes, p.assignment(), k);
                prop_assert!((after - oracle_value).abs() < 1e-12);
            }
        }
    }
}
