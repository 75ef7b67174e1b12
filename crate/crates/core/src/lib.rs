pub mod cli;
pub mod dataset;
pub mod experiment;
pub mod llsf;
pub mod metrics;
pub mod model;
pub mod synth;
pub mod tensor;
