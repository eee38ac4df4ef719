//! Joint neural approximation of traveling-wave profiles and their speed.

pub mod autodiff;
pub mod cli;
pub mod loss;
pub mod models;
pub mod network;
pub mod oracle;
pub mod trainer;
