//! Genetic search over preprocessing-plus-model pipelines, followed by grid
//! tuning of the winning model family.

mod evolve;
mod genome;
mod pipeline;

pub use evolve::{
    evolve, grid_search, search_pipeline, EvolutionOutcome, EvolutionParams, EvolvedPipeline,
    FitnessEvaluator, GridOutcome, SearchOutcome,
};
pub use genome::{
    crossover, model_from_str, model_to_string, mutate, BoostingGrid, DecisionTreeGrid, Family,
    ForestGrid, Grammar, Imputer, PipelineGenome, Scaler, Selector,
};
pub use pipeline::{Classifier, FittedPipeline, FixedPipeline, PipelineFactory};
