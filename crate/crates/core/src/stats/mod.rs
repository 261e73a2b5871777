//! Random measures, empirical barycenters and the Monte-Carlo harness for the
//! law of large numbers and the central limit theorem, plus bound diagnostics.

mod counterexample;
mod diagnostics;
mod experiments;
mod sampler;

pub use counterexample::{counterexample, counterexample_population, CounterexampleReport, CounterexampleRow, ATOM_SUP};
pub use diagnostics::{diagnostics, fisher_information, BoundCheck, DiagnosticsReport};
pub use experiments::{
    clt_experiment, empirical_barycenter, empirical_barycenter_stream, interior_compact, lln_experiment,
    log_gradient_gap, polynomial_basis, reference_barycenter, sign_test_p_value, BootstrapBand, CltReport,
    LlnRow, LlnTable, Normality, SignTest, BOOTSTRAP_RESAMPLES, INTERIOR_MARGIN, MIN_CLT_REPLICATES,
    SIGN_TEST_LEVEL,
};
pub use sampler::{empirical_population, Draw, MeasureSampler, SamplerFamily};
