//! Fact-tampering attacks on news articles, band-based bias detectors, a
//! small fact-checking knowledge graph, and the evaluation harness that
//! scores detectors against labeled corpora.

pub mod attacks;
pub mod corpus;
pub mod detectors;
pub mod evalharness;
pub mod factcheck;
pub mod textkit;
