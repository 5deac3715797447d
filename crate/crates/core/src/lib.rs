pub mod defense;
pub mod endpoints;
pub mod engine;
pub mod metrics;
pub mod netmodel;
pub mod scenario;
pub mod sim;
