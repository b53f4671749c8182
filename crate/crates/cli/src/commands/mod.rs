pub mod eval;
pub mod extract;
pub mod opm_sim;
pub mod quantize;
pub mod report;
pub mod synth;
pub mod train;
