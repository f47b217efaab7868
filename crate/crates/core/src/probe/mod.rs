//! Probe harness: input generators, regularity-estimate probes, the
//! three-dimensional vector-calculus bridge, the identity suite and reports.

pub mod bridge;
pub mod estimate;
pub mod generate;
pub mod identities;
pub mod report;

pub use bridge::{bridge_check, VectorFieldN3};
pub use estimate::{estimate_probe_interior, estimate_probe_weighted, halfspace_probe, EstimateConfig, MediaChoice};
pub use generate::{generate_manufactured, GeneratorKind, Manufactured};
pub use identities::run_identity_suite;
pub use report::{Flag, ProbeParams, ProbeReport, Sample};
