//! Experiment runner: seeded benchmarks, ablations, sensitivity sweeps and
//! the selection and convergence reports built from their logs.

pub mod experiment;
pub mod method;
pub mod report;
pub mod spec;
pub mod synth;

pub use experiment::{
    mask_seed, method_seed, run_experiment, run_experiment_on, sensitivity_sweep, sensitivity_sweep_on, sweep_csv,
    timings_csv, CellSummary, DatasetInfo, ExperimentOutcome, ExperimentReport, HarnessError, RunArtifacts,
    RunRecord, RunTiming, SweepAxis, SweepPoint,
};
pub use method::{parse_method_list, Method, MethodParseError};
pub use report::{
    convergence_report, gnuplot_script, parse_selection_log, parse_trace, selection_report, SelectionReport, Stratum,
    StratumTally, TaggedLog,
};
pub use spec::{DatasetSource, ExperimentSpec, GroundTruth, SpecError, DEFAULT_RATES};
pub use synth::{make_synth, SynthKind};
