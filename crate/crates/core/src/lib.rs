pub mod cutplane;
pub mod erm;
pub mod error;
pub mod field;
pub mod gamma;
pub mod io;
pub mod linalg;
pub mod lp;
pub mod sim;
pub mod wells;

pub use error::{Error, Result};
pub use field::{OneField, PointSet};
