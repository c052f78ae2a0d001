//! Delay- and price-differentiated cloud service menus.
//!
//! A provider offers `L` SLAs: on-demand service at price `p` with expected
//! wait at most `T`, plus slower SLAs at lower prices. This crate covers
//!
//! * [`model`]: willingness-to-pay curves and customer type populations,
//! * [`queueing`]: service-time distributions and M/G/1 waiting times,
//! * [`mechanism`]: segmentation, truthful revenue-maximizing prices and a
//!   brute-force misreport checker,
//! * [`optimizer`]: exact searches over server partitions and market
//!   segmentations for the separated (SMS), priority-sharing (PBS) and hybrid
//!   architectures, plus closed-form bounds and load sweeps,
//! * [`simulator`]: a discrete-event simulator used to check every delay formula,
//! * [`scenario`] and [`cli`]: scenario files, presets and the commands behind
//!   the `qosdiff` binary.

pub mod cli;
pub mod error;
pub mod mechanism;
pub mod model;
pub mod optimizer;
pub mod queueing;
pub mod scenario;
pub mod simulator;

pub use error::{Error, Result};
pub use mechanism::{DsicReport, Segmentation, SlaMenu};
pub use model::{CustomerType, TypePopulation, WtpModel};
pub use optimizer::{Architecture, ArchitectureConfig, OptResult, SearchOptions};
pub use queueing::{DelayVector, ServiceDist};
pub use simulator::{Dispatch, SimConfig, SimReport};
