//! Command-line pipeline: run configuration, the align/crop, geometric,
//! morphometric and EDMA stages, the JSON report, and synthetic studies.

mod args;
mod config;
mod error;
mod pipeline;
mod report;
mod synth;

pub use args::{run, Cli, Command, RunArgs};
pub use config::{EdmaSection, GpaSection, MethodInputs, PermutationSection, RunConfig, SubjectInputs};
pub use error::{CliError, ErrorKind};
pub use pipeline::{
    cmd_align_crop, cmd_edma_compare, cmd_geom_compare, cmd_gpa_analyze, cmd_pipeline, edma_stage,
    geometric_stage, morphometric_stage, prepare, MethodData, Prepared, Subject,
};
pub use report::*;
pub use synth::{write_synthetic_study, SynthMethod, SynthStudyOptions, SYNTH_ALIGN_NAMES};
