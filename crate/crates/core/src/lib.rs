//! Nonconvex penalized regression paths (MCP, SCAD, lasso, Mnet and their
//! group versions) fitted by coordinate descent with sequential strong rules
//! and KKT repair.

pub mod cli;
pub mod cv;
pub mod data;
pub mod error;
pub mod group;
pub mod io;
pub mod linalg;
pub mod oracle;
pub mod path;
pub mod penalty;
pub mod screening;
pub mod sim;
pub mod solver;

pub use data::{load_dataset, standardize, unstandardize, Dataset, Family, StandardizedDesign};
pub use error::{Error, Result};
pub use linalg::Matrix;
pub use path::{fit_path, CoefPath, PathOptions, Scale, Strategy};
pub use penalty::{PenaltyFamily, PenaltySpec};
