pub mod absdom;
pub mod cli;
pub mod contexts;
pub mod depgraph;
pub mod error;
pub mod explorer;
pub mod interfering;
pub mod syntax;

pub use error::{Error, Result};
