pub mod campaign;
pub mod error;
pub mod idempotent;
pub mod io;
pub mod jordan;
pub mod linalg;
pub mod preserver;
pub mod random;
pub mod reconstruction;
pub mod witness;

pub use error::{Error, Result};
