//! File formats, training runs, the noise-sweep benchmark and the command-line
//! front end built on [`spectralseq_core`].

pub mod bench;
pub mod checkpoint;
pub mod config;
pub mod data;
pub mod format;
pub mod run;

pub use spectralseq_core as core;
