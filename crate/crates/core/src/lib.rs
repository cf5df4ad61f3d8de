//! Simulation-optimization of (R, B) replenishment policies on tree-shaped
//! multi-echelon supply chains.
//!
//! * [`model`]: network, policy and scenario types with validation;
//! * [`sampling`]: counter-based random streams, bootstrap draws and a
//!   synthetic history generator;
//! * [`engine`]: the day-stepped discrete-event simulator;
//! * [`objective`]: the penalized replication-averaged objective;
//! * [`optim`]: Nelder–Mead, Gaussian-process and RBF minimizers;
//! * [`config`] and [`io`]: TOML configuration and CSV artifacts.

pub mod config;
pub mod engine;
pub mod io;
pub mod model;
pub mod objective;
pub mod optim;
pub mod sampling;
