//! Reading-sequence detection for eye-tracking studies on web pages.
//!
//! Fixations are matched to the word boxes of the rendered page, grouped into
//! reading lines, assigned to words with a Viterbi pass and then turned into
//! reading sequences. Per-participant reading features are compared between
//! Low and High scoring learners with the Mann-Whitney U test.

pub mod alignment;
pub mod cli;
pub mod features;
pub mod geometry;
pub mod ingest;
pub mod pipeline;
pub mod report;
pub mod sequences;
pub mod stats;
pub mod synth;
