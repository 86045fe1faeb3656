//! GlucoLens: postprandial glucose analytics and prediction.
//!
//! The crate turns four lifestyle data sources (a CGM trace, an activity
//! event log, a food log, and a work log) into per-lunch glycemic targets
//! and tabular feature sets, then trains and evaluates predictors of
//! postprandial AUC, maximum glucose, and hyperglycemia. It also generates
//! diverse counterfactual interventions for the hyperglycemia classifier
//! and supports hybrid predictors that fold zero-shot language-model
//! estimates into the feature matrix.
//!
//! A typical flow:
//!
//! 1. [`ingest`] parses the raw CSV sources into validated domain records
//!    and assembles one [`ingest::ParticipantData`] bundle per participant.
//! 2. [`glycemic`] computes AUC, incremental AUC, and maximum glucose over
//!    a configurable postprandial window, plus fasting and overnight
//!    glucose statistics.
//! 3. [`features`] builds one of the five canonical feature sets per lunch
//!    and standardizes the resulting matrix.
//! 4. [`models`] provides from-scratch ridge, random-forest, multilayer
//!    perceptron, and gradient-boosted-tree backbones.
//! 5. [`resampling`] adds Gaussian-noise augmentation and ADASYN class
//!    balancing on the training side only.
//! 6. [`ensemble`] combines classifiers by soft voting and wires the
//!    LLM-hybrid regression modes; [`llm`] holds the prompt, provider
//!    clients, and response cache.
//! 7. [`eval`] splits data, scores predictions, runs seeded multi-repeat
//!    experiments, and generates synthetic cohorts for desk-scale runs.
//! 8. [`counterfactual`] searches for diverse, proximal feature changes
//!    that flip a classifier's decision.
//!
//! Each major capability has a runnable example under `examples/`; the
//! `glucolens` binary exposes the same pipeline as subcommands.

pub mod cli;
pub mod config;
pub mod counterfactual;
pub mod ensemble;
pub mod eval;
pub mod features;
pub mod glycemic;
pub mod ingest;
pub mod llm;
pub mod models;
pub mod resampling;

mod rng;
mod timeutil;

pub use rng::derive_seed;
