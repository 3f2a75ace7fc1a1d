//! File formats, synthetic data, evaluation and the command line for the
//! `wellsvm-core` learner.

pub mod bench;
pub mod cli;
pub mod cv;
pub mod io;
pub mod kmeans;
pub mod model;
pub mod report;
pub mod scale;
pub mod split;
pub mod synth;
pub mod train;
pub mod verify;
