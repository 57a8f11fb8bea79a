//! Tabletop manipulation benchmark toolkit: LLM-driven scene and task
//! generation with geometric solvers, trajectory quality metrics, and
//! Bayesian sensitivity analysis over policy rollouts.

pub mod cli;
pub mod genpipe;
pub mod geometry;
pub mod placement;
pub mod scene_model;
pub mod sensitivity;
pub mod spatial_solver;
pub mod task_model;
pub mod trajectory;
