pub mod config;
pub mod model;
pub mod objects;
pub mod programs;
pub mod simulator;
pub mod checker;
pub mod valency;
pub mod cli;
