pub mod cli;
pub mod config;
pub mod error;
pub mod formats;
pub mod parallel;
pub mod report;
