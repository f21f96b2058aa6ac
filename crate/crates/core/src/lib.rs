pub mod analysis;
pub mod cli;
pub mod corpus;
pub mod experiments;
pub mod metrics;
pub mod tagger;
