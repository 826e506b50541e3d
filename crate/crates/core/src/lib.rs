//! Capacity-bound analysis of single-pass multi-hop reasoning.
//!
//! The crate is organised as five loosely coupled pieces:
//!
//! * [`theory`]: entropy helpers, the Fano-style accuracy bounds, output
//!   capacity budgets, the parametric demand model and chain-success decay.
//! * [`benchgen`]: deterministic synthetic multi-hop QA benchmark builder.
//! * [`orchestrator`]: multi-call (decompose / answer / contract) reasoning
//!   and single-pass baselines against any chat-completions endpoint, plus
//!   hermetic mock models.
//! * [`scoring`]: answer extraction, token F1 and report aggregation.
//! * [`fitting`]: exhaustive grid fit of the demand/capacity model to F1 grids.
//!
//! Data-parallel loops go through [`par`], which uses rayon when the
//! `parallel` feature is enabled (the default) and runs sequentially otherwise.

pub mod benchgen;
pub mod fitting;
pub mod orchestrator;
pub mod par;
pub mod reference;
pub mod scoring;
pub mod theory;

pub use theory::{AnswerSpace, BoundParams, ChainSpec, TaskPoint};
