//! Deterministic discrete-event simulator of a fault-tolerant LAN switching
//! fabric.
//!
//! A run pushes constant-rate flows hop by hop over a weighted topology while
//! scripted or random faults take links and nodes down. A controller that
//! learns about failures only through periodic link probes fails traffic over
//! to predefined backups or recomputed shortest paths. [`metrics`] turns the
//! run into packet loss, recovery time and rerouting success figures.
//!
//! ```
//! use ftswitch::shell::{bundled, Scenario};
//!
//! let out = Scenario::parse(bundled::TESTCASE1).unwrap().run();
//! assert_eq!(out.report.success_rate_percent, 100.0);
//! assert!(out.report.mttr_ms.unwrap() < 250);
//! ```

pub mod engine;
pub mod failover;
pub mod faults;
pub mod metrics;
pub mod shell;
pub mod sim;
pub mod topology;
pub mod traffic;
