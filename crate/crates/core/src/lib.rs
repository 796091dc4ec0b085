//! Polyphonic soundscape synthesis and few-shot continual-learning
//! evaluation for multi-label audio classification.
//!
//! The crate has two halves. The audio half ([`audio`], [`scene`], [`clips`])
//! turns a corpus of single-labeled clips into strongly labeled 10 s scenes
//! and 1 s multi-label clips with known polyphony and per-event SNR. The
//! learning half ([`embeddings`], [`fewshot`], [`eval`]) extends a base
//! multi-label classifier to novel classes from a handful of support
//! examples and scores the result by support size, polyphony and SNR.
//! [`world`] provides a synthetic embedding world for running the learning
//! half without audio.

pub mod audio;
pub mod clips;
pub mod embeddings;
pub mod eval;
pub mod fewshot;
pub mod scene;
pub mod error;
pub mod rng;
pub mod world;

pub use error::{Error, Result};
