pub mod assignment;
pub mod assistant;
pub mod features;
pub mod metrics;
pub mod redaction;
pub mod simulator;
pub mod vault;
