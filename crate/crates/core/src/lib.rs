pub mod baselines;
pub mod data;
pub mod engine;
pub mod harness;
pub mod learners;
pub mod linalg;
pub mod metrics;
pub mod search;
pub mod seed;
pub mod simulate;
