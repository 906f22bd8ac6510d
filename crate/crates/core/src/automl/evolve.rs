use std::collections::HashMap;
use std::sync::Mutex;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::genome::{crossover, mutate, Family, Grammar, PipelineGenome};
use super::pipeline::{Classifier, FittedPipeline, PipelineFactory};
use crate::dataset::{Dataset, Target};
use crate::model::ModelSpec;
use crate::splitter::{random_partition_n, Partition};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolutionParams {
    pub population: usize,
    pub generations: usize,
    pub tournament: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub elitism: usize,
    pub seed: u64,
    /// Folds of the inner cross-validation (plain random split).
    pub inner_k: usize,
}

impl Default for EvolutionParams {
    fn default() -> Self {
        EvolutionParams {
            population: 16,
            generations: 8,
            tournament: 3,
            crossover_rate: 0.7,
            mutation_rate: 0.4,
            elitism: 2,
            seed: 0,
            inner_k: 3,
        }
    }
}

impl EvolutionParams {
    pub fn validate(&self) -> Result<()> {
        if self.population < 2 {
            return Err(Error::Config("evolution population must be at least 2".into()));
        }
        if self.elitism >= self.population {
            return Err(Error::Config("evolution elitism must be below the population size".into()));
        }
        if self.tournament == 0 {
            return Err(Error::Config("evolution tournament size must be at least 1".into()));
        }
        for (name, r) in [("crossover_rate", self.crossover_rate), ("mutation_rate", self.mutation_rate)] {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::Config(format!("evolution {name} must lie in [0, 1]")));
            }
        }
        if self.inner_k < 2 {
            return Err(Error::Config("evolution inner_k must be at least 2".into()));
        }
        Ok(())
    }
}

/// Mean inner cross-validation accuracy of genomes, memoised by canonical
/// string. Only ever sees the rows it was built with.
pub struct FitnessEvaluator<'a> {
    train: &'a Dataset,
    target: Target,
    folds: Vec<(Dataset, Dataset)>,
    seed: u64,
    cache: Mutex<HashMap<String, f64>>,
    failures: Mutex<Vec<String>>,
}

impl<'a> FitnessEvaluator<'a> {
    pub fn new(train: &'a Dataset, target: Target, partition: &Partition, seed: u64) -> Result<Self> {
        if partition.n_records() != train.n_rows() {
            return Err(Error::contract("inner partition does not cover the training rows"));
        }
        let cohorts = partition.cohorts();
        let folds = (0..partition.k())
            .map(|c| (train.subset(&partition.complement(c)), train.subset(&cohorts[c])))
            .collect();
        Ok(FitnessEvaluator {
            train,
            target,
            folds,
            seed,
            cache: Mutex::new(HashMap::new()),
            failures: Mutex::new(Vec::new()),
        })
    }

    pub fn n_rows(&self) -> usize {
        self.train.n_rows()
    }

    fn compute(&self, g: &PipelineGenome) -> Result<f64> {
        let seed = crate::rng::derive_seed(self.seed, crate::rng::hash_str(&g.to_string()));
        let mut total = 0.0;
        for (i, (fit_rows, eval_rows)) in self.folds.iter().enumerate() {
            let y = fit_rows.target(self.target);
            if y.iter().all(|&v| v == y[0]) {
                return Err(Error::contract(format!("inner fold {i} has a single class")));
            }
            let model = FittedPipeline::fit(g, fit_rows, self.target, crate::rng::derive_seed(seed, i as u64))?;
            let probs = model.predict_proba(eval_rows)?;
            let truth = eval_rows.target(self.target);
            let hits = probs.iter().zip(truth).filter(|(p, &t)| u8::from(**p >= 0.5) == t).count();
            total += hits as f64 / truth.len() as f64;
        }
        Ok(total / self.folds.len() as f64)
    }

    /// Fitness in [0, 1]; a failed fit scores 0 and is recorded.
    pub fn fitness(&self, g: &PipelineGenome) -> f64 {
        let key = g.to_string();
        if let Some(&f) = self.cache.lock().expect("cache lock").get(&key) {
            return f;
        }
        let f = match self.compute(g) {
            Ok(f) => f,
            Err(e) => {
                log::warn!("pipeline {key} failed during fitness evaluation: {e}");
                self.failures.lock().expect("failure lock").push(format!("{key}: {e}"));
                0.0
            }
        };
        self.cache.lock().expect("cache lock").insert(key, f);
        f
    }

    pub fn evaluations(&self) -> usize {
        self.cache.lock().expect("cache lock").len()
    }

    pub fn failures(&self) -> Vec<String> {
        self.failures.lock().expect("failure lock").clone()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvolutionOutcome {
    pub best: PipelineGenome,
    pub best_fitness: f64,
    /// Best-so-far fitness after the initial population and each generation.
    pub history: Vec<f64>,
    pub evaluations: usize,
    pub failures: Vec<String>,
}

fn tournament<'g>(pop: &'g [(PipelineGenome, f64)], size: usize, rng: &mut impl Rng) -> &'g PipelineGenome {
    let mut best = rng.random_range(0..pop.len());
    for _ in 1..size {
        let c = rng.random_range(0..pop.len());
        if pop[c].1 > pop[best].1 || (pop[c].1 == pop[best].1 && c < best) {
            best = c;
        }
    }
    &pop[best].0
}

/// Genetic search over `grammar`; the grammar's default genome is always
/// part of the initial population.
pub fn evolve(
    train: &Dataset,
    target: Target,
    inner: &Partition,
    grammar: &Grammar,
    params: &EvolutionParams,
) -> Result<EvolutionOutcome> {
    params.validate()?;
    grammar.validate()?;
    let eval = FitnessEvaluator::new(train, target, inner, params.seed)?;
    evolve_with(&eval, grammar, params)
}

pub(crate) fn evolve_with(
    eval: &FitnessEvaluator<'_>,
    grammar: &Grammar,
    params: &EvolutionParams,
) -> Result<EvolutionOutcome> {
    let mut rng = crate::rng::stream(params.seed, 0xE70);
    let mut population = vec![grammar.default_genome()];
    while population.len() < params.population {
        population.push(grammar.random_genome(&mut rng));
    }

    let score = |pop: Vec<PipelineGenome>| -> Vec<(PipelineGenome, f64)> {
        // distinct genomes in first-seen order, evaluated in parallel
        let mut distinct: Vec<PipelineGenome> = Vec::new();
        for g in &pop {
            if !distinct.contains(g) {
                distinct.push(g.clone());
            }
        }
        distinct.par_iter().for_each(|g| {
            eval.fitness(g);
        });
        pop.into_iter()
            .map(|g| {
                let f = eval.fitness(&g);
                (g, f)
            })
            .collect()
    };

    let mut scored = score(population);
    let mut best = scored[0].clone();
    let update = |best: &mut (PipelineGenome, f64), scored: &[(PipelineGenome, f64)]| {
        for s in scored {
            if s.1 > best.1 {
                *best = s.clone();
            }
        }
    };
    update(&mut best, &scored);
    let mut history = vec![best.1];

    for _ in 0..params.generations {
        let mut ranked = scored.clone();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
        let mut next: Vec<PipelineGenome> = ranked.iter().take(params.elitism).map(|s| s.0.clone()).collect();
        while next.len() < params.population {
            let a = tournament(&scored, params.tournament, &mut rng);
            let mut child = if rng.random_bool(params.crossover_rate) {
                let b = tournament(&scored, params.tournament, &mut rng);
                crossover(a, b, &mut rng)
            } else {
                a.clone()
            };
            if rng.random_bool(params.mutation_rate) {
                child = mutate(&child, grammar, &mut rng);
            }
            next.push(child);
        }
        scored = score(next);
        update(&mut best, &scored);
        history.push(best.1);
    }

    Ok(EvolutionOutcome {
        best: best.0,
        best_fitness: best.1,
        history,
        evaluations: eval.evaluations(),
        failures: eval.failures(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridOutcome {
    pub best: ModelSpec,
    pub best_fitness: f64,
    /// Fitness of every cell, in grid order.
    pub scores: Vec<(ModelSpec, f64)>,
}

/// Exhaustive search over model cells with the other genes of `base` fixed.
/// Ties go to the first cell in grid order.
pub fn grid_search(
    base: &PipelineGenome,
    grid: &[ModelSpec],
    train: &Dataset,
    target: Target,
    inner: &Partition,
    seed: u64,
) -> Result<GridOutcome> {
    let eval = FitnessEvaluator::new(train, target, inner, seed)?;
    grid_search_with(&eval, base, grid)
}

pub(crate) fn grid_search_with(
    eval: &FitnessEvaluator<'_>,
    base: &PipelineGenome,
    grid: &[ModelSpec],
) -> Result<GridOutcome> {
    if grid.is_empty() {
        return Err(Error::contract("grid search needs at least one cell"));
    }
    let scores: Vec<(ModelSpec, f64)> = grid
        .par_iter()
        .map(|cell| (cell.clone(), eval.fitness(&base.with_model(cell.clone()))))
        .collect();
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if s.1 > scores[best].1 {
            best = i;
        }
    }
    Ok(GridOutcome {
        best: scores[best].0.clone(),
        best_fitness: scores[best].1,
        scores,
    })
}

/// Full search for one training set: evolution over the grammar, then a grid
/// refinement of the winning family's hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchOutcome {
    pub evolution: EvolutionOutcome,
    pub tuned: PipelineGenome,
    pub tuned_fitness: f64,
}

pub fn search_pipeline(
    train: &Dataset,
    target: Target,
    grammar: &Grammar,
    params: &EvolutionParams,
) -> Result<SearchOutcome> {
    params.validate()?;
    grammar.validate()?;
    let inner = random_partition_n(train.n_rows(), params.inner_k, crate::rng::derive_seed(params.seed, 0x1A))?;
    let eval = FitnessEvaluator::new(train, target, &inner, params.seed)?;
    let evolution = evolve_with(&eval, grammar, params)?;
    let family = Family::of(&evolution.best.model);
    let grid = grid_search_with(&eval, &evolution.best, &grammar.family_cells(family))?;
    // the evolved cell is part of the grid, so tuning never lowers fitness
    let (tuned, tuned_fitness) = if grid.best_fitness > evolution.best_fitness {
        (evolution.best.with_model(grid.best.clone()), grid.best_fitness)
    } else {
        (evolution.best.clone(), evolution.best_fitness)
    };
    Ok(SearchOutcome {
        evolution,
        tuned,
        tuned_fitness,
    })
}

/// Factory that runs the whole search on each training set it is given.
#[derive(Debug, Clone)]
pub struct EvolvedPipeline {
    pub grammar: Grammar,
    pub params: EvolutionParams,
}

struct Searched {
    pipeline: FittedPipeline,
    outcome: SearchOutcome,
}

impl Classifier for Searched {
    fn predict_proba(&self, data: &Dataset) -> Result<Vec<f64>> {
        self.pipeline.predict_proba(data)
    }

    fn describe(&self) -> String {
        format!(
            "{} (inner accuracy {:.4}, {} genomes evaluated)",
            self.outcome.tuned, self.outcome.tuned_fitness, self.outcome.evolution.evaluations
        )
    }
}

impl PipelineFactory for EvolvedPipeline {
    fn fit(&self, train: &Dataset, target: Target, seed: u64) -> Result<Box<dyn Classifier>> {
        let params = EvolutionParams { seed, ..self.params.clone() };
        let outcome = search_pipeline(train, target, &self.grammar, &params)?;
        let pipeline = FittedPipeline::fit(&outcome.tuned, train, target, seed)?;
        Ok(Box::new(Searched { pipeline, outcome }))
    }

    fn describe(&self) -> String {
        format!(
            "evolved (population {}, generations {}, inner k {})",
            self.params.population, self.params.generations, self.params.inner_k
        )
    }
}
