pub mod error;
pub mod kernel;
pub mod maximal;
pub mod mol;
pub mod order;
pub mod picard;
pub mod problem;
pub mod scalar;

pub use error::{Error, Result};
pub use problem::Side;
pub use scalar::Real;

pub type ProblemSpec = problem::ProblemSpec<f64>;
pub type Grid = problem::Grid<f64>;
pub type Trajectory = problem::Trajectory<f64>;
pub type GreenKernel = kernel::GreenKernel<f64>;
pub type PicardConfig = picard::PicardConfig<f64>;
pub type PicardDiagnostics = picard::PicardDiagnostics<f64>;
pub type MolConfig = mol::MolConfig<f64>;
pub type OrderReport = order::OrderReport<f64>;
