//! Core of the crowdlabel annotation platform: corpus preparation, boosted
//! sampling, round bookkeeping and agreement statistics.

pub mod annotation;
pub mod corpus;
pub mod sampling;
pub mod scheme;
pub mod stats;
