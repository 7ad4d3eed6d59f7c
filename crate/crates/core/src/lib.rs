pub mod activation;
pub mod complexity;
pub mod construction;
pub mod data;
pub mod delta;
pub mod erm;
pub mod experiments;
pub mod error;
pub mod group;
pub mod measure;
pub mod net;
pub mod rng;
pub mod stats;
